//! Seeded random operators and states.
//!
//! Every sampler takes an explicit RNG. Independent streams for parallel
//! restarts come from [`stream`], so results do not depend on scheduling.

use faer::Mat;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

use crate::operator::*;

pub type LabRng = ChaCha20Rng;

pub fn seeded(seed: u64) -> LabRng {
    ChaCha20Rng::seed_from_u64(seed)
}

/// Stream `k` of the generator seeded with `seed`.
pub fn stream(seed: u64, k: u64) -> LabRng {
    let mut r = ChaCha20Rng::seed_from_u64(seed);
    r.set_stream(k);
    r
}

pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R) -> c64 {
    let a: f64 = rng.sample(StandardNormal);
    let b: f64 = rng.sample(StandardNormal);
    cx(a, b) * std::f64::consts::FRAC_1_SQRT_2
}

/// Square matrix of i.i.d. standard complex Gaussians.
pub fn ginibre<R: Rng + ?Sized>(n: usize, rng: &mut R) -> CMat {
    let mut m = zeros(n);
    for j in 0..n {
        for i in 0..n {
            m[(i, j)] = complex_normal(rng);
        }
    }
    m
}

/// Haar-random unitary: QR of a Ginibre matrix with the phases of R's
/// diagonal folded back into Q.
pub fn random_unitary<R: Rng + ?Sized>(n: usize, rng: &mut R) -> CMat {
    let g = ginibre(n, rng);
    let qr = g.qr();
    let q = qr.compute_q();
    let r = qr.compute_r();
    let phases: Vec<c64> = (0..n)
        .map(|i| {
            let d = r.read(i, i);
            let a = d.norm();
            if a == 0.0 {
                ONE
            } else {
                d / a
            }
        })
        .collect();
    Mat::from_fn(n, n, |i, j| q.read(i, j) * phases[j])
}

/// GUE-like Hermitian matrix normalized to unit operator norm.
pub fn random_hermitian<R: Rng + ?Sized>(n: usize, rng: &mut R) -> CMat {
    let g = ginibre(n, rng);
    let h = symmetrize(&g);
    let norm = operator_norm(&h);
    if norm == 0.0 {
        h
    } else {
        scale_re(&h, 1.0 / norm)
    }
}

/// Density matrix `G G^dagger / Tr` with `G` of shape `n x rank`.
pub fn random_density<R: Rng + ?Sized>(n: usize, rank: usize, rng: &mut R) -> DensityOperator {
    let rank = rank.clamp(1, n);
    let mut g = Mat::<c64>::zeros(n, rank);
    for j in 0..rank {
        for i in 0..n {
            g[(i, j)] = complex_normal(rng);
        }
    }
    let m = &g * g.adjoint();
    let t = trace(&m).re;
    DensityOperator::new(scale_re(&m, 1.0 / t), None).expect("Wishart sample is a valid state")
}

pub fn random_pure_state<R: Rng + ?Sized>(layout: Vec<usize>, rng: &mut R) -> PureState {
    let dim: usize = layout.iter().product();
    let amps: Vec<c64> = (0..dim).map(|_| complex_normal(rng)).collect();
    PureState::normalized(amps, layout).expect("Gaussian vector is nonzero")
}

/// Uniform point on the probability simplex.
pub fn random_simplex<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<f64> {
    let e: Vec<f64> = (0..n).map(|_| -(1.0 - rng.gen::<f64>()).ln()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|x| x / s).collect()
}
