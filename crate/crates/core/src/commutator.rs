//! Trace norms of `[A, log B]` for dominated pairs `0 <= A <= B`, the
//! spectral-partition decomposition behind their logarithmic bound, and
//! seeded scans for the empirical constant.
//!
//! Samplers emit `B` diagonal. Commutators are then formed entrywise,
//! `[A, log B]_ij = A_ij (log b_j - log b_i)`, which keeps full relative
//! precision for spectra spanning many decades.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::operator::*;
use crate::random::{random_unitary, stream, LabRng};
use rand::Rng;

/// `0 <= A <= B`, `Tr B = 1`, `p = Tr A`.
#[derive(Debug, Clone)]
pub struct DominatedPair {
    pub a: HermitianOperator,
    pub b: HermitianOperator,
    pub p: f64,
}

pub const DOMINATION_TOL: f64 = 1e-10;

impl DominatedPair {
    pub fn new(a: HermitianOperator, b: HermitianOperator) -> Result<Self> {
        if a.dim() != b.dim() {
            return Err(LabError::DimensionMismatch(format!(
                "A has dimension {}, B has {}",
                a.dim(),
                b.dim()
            )));
        }
        let tb = trace(b.matrix()).re;
        if (tb - 1.0).abs() > DOMINATION_TOL {
            return Err(LabError::InvalidState(format!("Tr B = {tb}, expected 1")));
        }
        let amin = a.eigenvalues()[0];
        if amin < -DOMINATION_TOL {
            return Err(LabError::InvalidState(format!(
                "A has eigenvalue {amin:.3e}"
            )));
        }
        let gap = eigvalsh(&(b.matrix() - a.matrix()))[0];
        if gap < -DOMINATION_TOL {
            return Err(LabError::InvalidState(format!(
                "B - A has eigenvalue {gap:.3e}"
            )));
        }
        let p = trace(a.matrix()).re;
        Ok(Self {
            a,
            b,
            p: p.clamp(0.0, 1.0),
        })
    }

    pub fn dim(&self) -> usize {
        self.a.dim()
    }

    /// `(B - A, B)`, whose trace is `1 - p`.
    pub fn complement(&self) -> Self {
        let a = HermitianOperator::new(self.b.matrix() - self.a.matrix(), None).expect("square");
        Self {
            a,
            b: self.b.clone(),
            p: 1.0 - self.p,
        }
    }
}

/// `A` and `B` expressed in an eigenbasis of `B`, restricted to its support.
struct DiagonalFrame {
    b: Vec<f64>,
    a: CMat,
}

fn is_diagonal(m: &CMat) -> bool {
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            if i != j && m[(i, j)] != ZERO {
                return false;
            }
        }
    }
    true
}

fn frame(pair: &DominatedPair) -> DiagonalFrame {
    let (b, a) = if is_diagonal(pair.b.matrix()) {
        let b: Vec<f64> = (0..pair.dim())
            .map(|i| pair.b.matrix()[(i, i)].re)
            .collect();
        (b, pair.a.matrix().clone())
    } else {
        let e = pair.b.eigh();
        let a = e.to_eigenbasis(pair.a.matrix());
        (e.values, a)
    };
    let keep: Vec<usize> = (0..b.len()).filter(|&i| b[i] > SUPPORT_FLOOR).collect();
    DiagonalFrame {
        b: keep.iter().map(|&i| b[i]).collect(),
        a: faer::Mat::from_fn(keep.len(), keep.len(), |i, j| a[(keep[i], keep[j])]),
    }
}

/// `i [log B, A]` in the frame, Hermitian.
fn i_commutator(fr: &DiagonalFrame) -> CMat {
    let lb: Vec<f64> = fr.b.iter().map(|x| x.ln()).collect();
    let n = lb.len();
    faer::Mat::from_fn(n, n, |i, j| I * fr.a[(i, j)] * (lb[i] - lb[j]))
}

/// `||[A, log B]||_1` on the support of `B`.
pub fn commutator_trace_norm(pair: &DominatedPair) -> f64 {
    if pair.p <= 0.0 || pair.p >= 1.0 {
        return 0.0;
    }
    let m = i_commutator(&frame(pair));
    eigvalsh(&symmetrize(&m)).iter().map(|x| x.abs()).sum()
}

/// `log(1/p) sqrt(p)` for `p <= e^-2`, else its maximum `2/e`.
pub fn f_small(p: f64) -> Result<f64> {
    if p <= 0.0 || p > 1.0 || !p.is_finite() {
        return Err(LabError::Domain(format!("f(p) needs 0 < p <= 1, got {p}")));
    }
    Ok(if p <= (-2.0f64).exp() {
        (1.0 / p).ln() * p.sqrt()
    } else {
        2.0 / std::f64::consts::E
    })
}

// ---------------------------------------------------------------------------
// Sampling
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpectralProfile {
    /// Uniform on the probability simplex.
    UniformSimplex,
    /// `b_i ~ r^i`; `None` uses `r = p`.
    Geometric(Option<f64>),
    /// Half the weight spread over a top cluster, the rest `ratio` below;
    /// `None` uses `ratio = p^2`.
    TwoScale(Option<f64>),
    /// Cycles through the three profiles by sample index.
    Mixed,
}

impl SpectralProfile {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "uniform" | "simplex" => Ok(Self::UniformSimplex),
            "geometric" => Ok(Self::Geometric(None)),
            "two-scale" | "two_scale" => Ok(Self::TwoScale(None)),
            "mixed" => Ok(Self::Mixed),
            other => Err(LabError::Usage(format!(
                "unknown spectral profile `{other}` (uniform, geometric, two-scale, mixed)"
            ))),
        }
    }

    fn resolve(self, index: u64) -> Self {
        match self {
            Self::Mixed => match index % 3 {
                0 => Self::UniformSimplex,
                1 => Self::Geometric(None),
                _ => Self::TwoScale(None),
            },
            other => other,
        }
    }
}

fn sample_spectrum(dim: usize, p: f64, profile: SpectralProfile, rng: &mut LabRng) -> Vec<f64> {
    let mut b: Vec<f64> = match profile {
        SpectralProfile::UniformSimplex | SpectralProfile::Mixed => {
            crate::random::random_simplex(dim, rng)
        }
        SpectralProfile::Geometric(r) => {
            let r = r.unwrap_or(p);
            // Geometric weights decay fast; a log-space build avoids underflow
            // before normalization.
            (0..dim).map(|i| (i as f64 * r.ln()).exp()).collect()
        }
        SpectralProfile::TwoScale(r) => {
            let r = r.unwrap_or(p * p);
            let top = (dim / 2).max(1);
            (0..dim)
                .map(|i| {
                    let jitter = 0.5 + rng.gen::<f64>();
                    if i < top {
                        jitter
                    } else {
                        r * jitter
                    }
                })
                .collect()
        }
    };
    let s: f64 = b.iter().sum();
    for x in &mut b {
        *x /= s;
    }
    b
}

/// `A = B^{1/2} X B^{1/2}` with `Tr A = p`, where `X` is shifted toward 0
/// or toward `1` so that `0 <= X <= 1` is preserved.
pub fn dominated_pair_from(b: &[f64], x: &CMat, p: f64) -> Result<DominatedPair> {
    if !(0.0..=1.0).contains(&p) {
        return Err(LabError::Parameter(format!("p = {p} outside [0, 1]")));
    }
    let n = b.len();
    let sb: Vec<f64> = b.iter().map(|v| v.max(0.0).sqrt()).collect();
    let tr_b = |m: &CMat| (0..n).map(|i| b[i] * m[(i, i)].re).sum::<f64>();
    let t = tr_b(x);
    let x = if t >= p {
        if t == 0.0 {
            x.clone()
        } else {
            scale_re(x, p / t)
        }
    } else {
        let c = (1.0 - p) / (1.0 - t);
        let comp = identity(n) - x;
        identity(n) - scale_re(&comp, c)
    };
    let a = faer::Mat::from_fn(n, n, |i, j| x[(i, j)] * (sb[i] * sb[j]));
    DominatedPair::new(
        HermitianOperator::new(a, None)?,
        HermitianOperator::from_real_diag(b),
    )
}

/// Seeded dominated pair with `B` diagonal.
pub fn sample_dominated_pair(
    dim: usize,
    p: f64,
    seed: u64,
    profile: SpectralProfile,
) -> Result<DominatedPair> {
    let mut rng = crate::random::seeded(seed);
    sample_with(dim, p, profile.resolve(seed), &mut rng)
}

fn sample_with(
    dim: usize,
    p: f64,
    profile: SpectralProfile,
    rng: &mut LabRng,
) -> Result<DominatedPair> {
    if dim < 2 {
        return Err(LabError::Parameter(format!(
            "dim must be at least 2, got {dim}"
        )));
    }
    if !(p > 0.0 && p < 1.0) {
        return Err(LabError::Parameter(format!(
            "p must lie in (0, 1), got {p}"
        )));
    }
    let b = sample_spectrum(dim, p, profile, rng);
    let u = random_unitary(dim, rng);
    let d: Vec<f64> = (0..dim).map(|_| rng.gen::<f64>()).collect();
    let ud = faer::Mat::from_fn(dim, dim, |i, j| u[(i, j)] * d[j]);
    let x = symmetrize(&(&ud * u.adjoint()));
    dominated_pair_from(&b, &x, p)
}

// ---------------------------------------------------------------------------
// Partition decomposition
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Block {
    pub k: usize,
    /// `[p^{k+1}, p^k)`.
    pub interval: (f64, f64),
    pub dim: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartBounds {
    pub w_pp: f64,
    pub v: f64,
    pub v_prime: f64,
    pub total: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionDecomposition {
    pub p: f64,
    pub w: f64,
    pub v: f64,
    pub v_prime: f64,
    pub w_pp: f64,
    pub trace_norm: f64,
    pub blocks: Vec<Block>,
    pub bounds: PartBounds,
    /// `|W - (V - V' + W'')|`.
    pub identity_residual: f64,
    /// `|W - ||[A, log B]||_1|`.
    pub duality_residual: f64,
    pub all_hold: bool,
}

fn interval_index(b: f64, p: f64) -> usize {
    // Endpoints p^k sit in I_{k-1}; the slack absorbs rounding in the ratio.
    let k = (b.ln() / p.ln() - 1e-12).ceil() - 1.0;
    if k < 0.0 {
        0
    } else {
        k as usize
    }
}

pub fn partition_decompose(pair: &DominatedPair) -> Result<PartitionDecomposition> {
    let p = pair.p;
    if !(p > 0.0 && p < 1.0) {
        return Err(LabError::Parameter(format!(
            "decomposition needs 0 < p < 1, got {p}"
        )));
    }
    let fr = frame(pair);
    let n = fr.b.len();
    let lb: Vec<f64> = fr.b.iter().map(|x| x.ln()).collect();
    let ks: Vec<usize> = fr.b.iter().map(|&x| interval_index(x, p)).collect();

    let m = symmetrize(&i_commutator(&fr));
    let eig = Eigh::new(&m);
    let trace_norm: f64 = eig.values.iter().map(|x| x.abs()).sum();
    let h = eig.apply(f64::signum);

    // W_kl = i sum_{i in k, j in l} A_ij H_ji (log b_i - log b_j)
    let mut wkl: BTreeMap<(usize, usize), c64> = BTreeMap::new();
    for i in 0..n {
        for j in 0..n {
            let v = I * fr.a[(i, j)] * h[(j, i)] * (lb[i] - lb[j]);
            *wkl.entry((ks[i], ks[j])).or_insert(ZERO) += v;
        }
    }
    let kset: std::collections::BTreeSet<usize> = ks.iter().copied().collect();
    let get = |k: usize, l: usize| wkl.get(&(k, l)).copied().unwrap_or(ZERO);

    let w: c64 = wkl.values().fold(ZERO, |acc, x| acc + *x);
    let w_pp: c64 = wkl
        .iter()
        .filter(|((k, l), _)| k.abs_diff(*l) >= 2)
        .fold(ZERO, |acc, (_, x)| acc + *x);
    let mut v = ZERO;
    let mut v_prime = ZERO;
    for &k in &kset {
        if kset.contains(&(k + 1)) {
            v += get(k, k) + get(k, k + 1) + get(k + 1, k) + get(k + 1, k + 1);
            v_prime += get(k + 1, k + 1);
        } else {
            v += get(k, k);
        }
    }

    let blocks = kset
        .iter()
        .map(|&k| Block {
            k,
            interval: (p.powi(k as i32 + 1), p.powi(k as i32)),
            dim: ks.iter().filter(|&&x| x == k).count(),
        })
        .collect();

    let lg = (1.0 / p).ln();
    let f = f_small(p)?;
    let bounds = PartBounds {
        w_pp: 6.0 * p.sqrt() * f,
        v: 4.0 * p * lg,
        v_prime: p * lg,
        total: 6.0 * p.sqrt() * f + 5.0 * p * lg,
    };
    let identity_residual = (w - (v - v_prime + w_pp)).norm();
    let duality_residual = (w.re - trace_norm).abs();
    let slack = 1e-12;
    let all_hold = w_pp.re.abs() <= bounds.w_pp + slack
        && v.re.abs() <= bounds.v + slack
        && v_prime.re.abs() <= bounds.v_prime + slack
        && w.re.abs() <= bounds.total + slack
        && identity_residual <= 1e-8
        && duality_residual <= 1e-8;
    Ok(PartitionDecomposition {
        p,
        w: w.re,
        v: v.re,
        v_prime: v_prime.re,
        w_pp: w_pp.re,
        trace_norm,
        blocks,
        bounds,
        identity_residual,
        duality_residual,
        all_hold,
    })
}

// ---------------------------------------------------------------------------
// Auxiliary bounds
// ---------------------------------------------------------------------------

/// `(||[A, log B]||_1, log(b_U/b_L) Tr A)` with `b_L, b_U` the extreme
/// eigenvalues of `B` on its support.
pub fn clustered_commutator_check(pair: &DominatedPair) -> (f64, f64) {
    let fr = frame(pair);
    let lo = fr.b.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = fr.b.iter().copied().fold(0.0, f64::max);
    let lhs: f64 = eigvalsh(&symmetrize(&i_commutator(&fr)))
        .iter()
        .map(|x| x.abs())
        .sum();
    (lhs, (hi / lo).ln() * trace(pair.a.matrix()).re)
}

/// `(||AX - XB||_2, max(a_U - b_L, b_U - a_L) ||X||_2)`.
pub fn shifted_commutator_check(a: &CMat, b: &CMat, x: &CMat) -> (f64, f64) {
    let ea = eigvalsh(a);
    let eb = eigvalsh(b);
    let (al, au) = (ea[0], ea[ea.len() - 1]);
    let (bl, bu) = (eb[0], eb[eb.len() - 1]);
    let lhs = frobenius_norm(&(a * x - x * b));
    (lhs, (au - bl).max(bu - al) * frobenius_norm(x))
}

// ---------------------------------------------------------------------------
// Scans
// ---------------------------------------------------------------------------

pub const HARD_CONSTANT: f64 = 11.0;
pub const SOFT_CONSTANT: f64 = 2.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanCell {
    pub dim: usize,
    pub p: f64,
    pub samples: usize,
    pub max_ratio: f64,
    pub witness_ref: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanViolation {
    pub dim: usize,
    pub p: f64,
    pub sample: usize,
    pub ratio: f64,
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanWitness {
    pub a: OperatorJson,
    pub b: OperatorJson,
    pub trace_norm: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScanReport {
    pub cells: Vec<ScanCell>,
    pub global_max: f64,
    /// Ratios above the proven constant 11.
    pub violations: Vec<ScanViolation>,
    /// Ratios above the finite-dimensional constant 2.
    pub soft_flags: Vec<ScanViolation>,
    #[serde(skip)]
    pub witnesses: BTreeMap<String, ScanWitness>,
}

/// splitmix64 finalizer, used to derive per-sample streams.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn cell_stream_id(dim: usize, p: f64) -> u64 {
    mix(mix(dim as u64) ^ p.to_bits())
}

pub fn ratio_scan(
    dims: &[usize],
    p_grid: &[f64],
    samples_per_cell: usize,
    seed: u64,
    profile: SpectralProfile,
) -> Result<ScanReport> {
    for &p in p_grid {
        if !(p > 0.0 && p <= 1.0) {
            return Err(LabError::Parameter(format!(
                "scan p must lie in (0, 1], got {p}"
            )));
        }
    }
    let mut cells = Vec::new();
    let mut violations = Vec::new();
    let mut soft_flags = Vec::new();
    let mut witnesses = BTreeMap::new();
    let mut global_max: f64 = 0.0;
    for &dim in dims {
        for &p in p_grid {
            if p >= 1.0 {
                // h(1) = 0 and A = B; the ratio is undefined.
                continue;
            }
            let h = binary_entropy(p);
            let id = cell_stream_id(dim, p);
            let results: Vec<(f64, DominatedPair, f64)> = (0..samples_per_cell)
                .into_par_iter()
                .map(|s| {
                    let mut rng = stream(seed ^ id, s as u64);
                    let pair = sample_with(dim, p, profile.resolve(s as u64), &mut rng)?;
                    let tn = commutator_trace_norm(&pair);
                    Ok((tn / h, pair, tn))
                })
                .collect::<Result<_>>()?;
            let mut best = 0usize;
            for (s, (ratio, _, _)) in results.iter().enumerate() {
                if *ratio > results[best].0 {
                    best = s;
                }
                let v = ScanViolation {
                    dim,
                    p,
                    sample: s,
                    ratio: *ratio,
                    bound: HARD_CONSTANT,
                };
                if *ratio > HARD_CONSTANT {
                    violations.push(v.clone());
                }
                if *ratio > SOFT_CONSTANT {
                    soft_flags.push(ScanViolation {
                        bound: SOFT_CONSTANT,
                        ..v
                    });
                }
            }
            let witness_ref = format!("witness_d{dim}_p{p}_s{best}");
            if let Some((ratio, pair, tn)) = results.get(best) {
                global_max = global_max.max(*ratio);
                witnesses.insert(
                    witness_ref.clone(),
                    ScanWitness {
                        a: OperatorJson::from_matrix(pair.a.matrix(), None),
                        b: OperatorJson::from_matrix(pair.b.matrix(), None),
                        trace_norm: *tn,
                    },
                );
            }
            cells.push(ScanCell {
                dim,
                p,
                samples: samples_per_cell,
                max_ratio: results.get(best).map_or(0.0, |r| r.0),
                witness_ref,
            });
        }
    }
    Ok(ScanReport {
        cells,
        global_max,
        violations,
        soft_flags,
        witnesses,
    })
}
