//! Mixing and entangling rates.
//!
//! Rates are entropy derivatives in nats per unit time under
//! `e^{-iHt}`. With that convention `dS/dt = i Tr(H [rho, log rho])`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::operator::*;
use crate::random::{random_pure_state, stream};

/// `{(p, rho1), (1 - p, rho2)}`; only `rho2` evolves.
#[derive(Debug, Clone)]
pub struct TwoStateEnsemble {
    pub p: f64,
    pub rho1: DensityOperator,
    pub rho2: DensityOperator,
}

impl TwoStateEnsemble {
    pub fn new(p: f64, rho1: DensityOperator, rho2: DensityOperator) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(LabError::Parameter(format!(
                "probability {p} outside [0, 1]"
            )));
        }
        if rho1.dim() != rho2.dim() {
            return Err(LabError::DimensionMismatch(format!(
                "ensemble states have dimensions {} and {}",
                rho1.dim(),
                rho2.dim()
            )));
        }
        Ok(Self { p, rho1, rho2 })
    }

    pub fn dim(&self) -> usize {
        self.rho1.dim()
    }

    pub fn average(&self) -> DensityOperator {
        self.rho1
            .mix(self.p, &self.rho2)
            .expect("dimensions checked")
    }

    /// `rho(t) = p rho1 + (1-p) U rho2 U^dagger`.
    pub fn evolved(&self, u: &CMat) -> DensityOperator {
        self.rho1
            .mix(self.p, &self.rho2.evolve(u))
            .expect("dimensions checked")
    }
}

fn check_dim(what: &str, got: usize, want: usize) -> Result<()> {
    if got != want {
        return Err(LabError::DimensionMismatch(format!(
            "{what} has dimension {got}, expected {want}"
        )));
    }
    Ok(())
}

/// `e^{-iHt}` from a precomputed eigendecomposition.
pub fn propagator(eig: &Eigh, t: f64) -> CMat {
    eig.apply_complex(|e| c64::new((e * t).cos(), -(e * t).sin()))
}

/// `i (1-p) Tr(H [rho2, log rho])`.
pub fn mixing_rate(ens: &TwoStateEnsemble, h: &HermitianOperator) -> Result<f64> {
    check_dim("Hamiltonian", h.dim(), ens.dim())?;
    let log_rho = log_support(ens.average().matrix(), SUPPORT_FLOOR);
    let c = commutator(ens.rho2.matrix(), &log_rho);
    let val = I * trace_product(h.matrix(), &c) * (1.0 - ens.p);
    discard_residue(val)
}

fn discard_residue(val: c64) -> Result<f64> {
    if val.im.abs() > 1e-10 * val.re.abs().max(1.0) {
        log::warn!("rate carries imaginary residue {:.3e}", val.im);
    }
    Ok(val.re)
}

/// `max_{||H|| <= 1}` of the mixing rate: `(1-p) ||[rho2, log rho]||_1`.
pub fn max_mixing_rate(ens: &TwoStateEnsemble) -> f64 {
    let log_rho = log_support(ens.average().matrix(), SUPPORT_FLOOR);
    (1.0 - ens.p) * trace_norm(&commutator(ens.rho2.matrix(), &log_rho))
}

/// The Hamiltonian attaining [`max_mixing_rate`].
pub fn optimal_mixing_hamiltonian(ens: &TwoStateEnsemble) -> HermitianOperator {
    let log_rho = log_support(ens.average().matrix(), SUPPORT_FLOOR);
    let k = scale(&commutator(ens.rho2.matrix(), &log_rho), I);
    let s = Eigh::new(&symmetrize(&k)).apply(f64::signum);
    HermitianOperator::new(s, None).expect("sign matrix is Hermitian")
}

fn check_ensemble(ps: &[f64], rhos: &[DensityOperator]) -> Result<()> {
    if ps.len() != rhos.len() || ps.is_empty() {
        return Err(LabError::DimensionMismatch(format!(
            "{} probabilities for {} states",
            ps.len(),
            rhos.len()
        )));
    }
    shannon_entropy(ps)?;
    for r in rhos {
        check_dim("ensemble state", r.dim(), rhos[0].dim())?;
    }
    Ok(())
}

fn ensemble_average(ps: &[f64], rhos: &[DensityOperator]) -> CMat {
    let n = rhos[0].dim();
    let mut avg = zeros(n);
    for (p, r) in ps.iter().zip(rhos) {
        avg += scale_re(r.matrix(), *p);
    }
    avg
}

/// `i sum_i p_i Tr(H_i [rho_i, log rho])`, one Hamiltonian per state.
pub fn ensemble_mixing_rate(
    ps: &[f64],
    rhos: &[DensityOperator],
    hs: &[HermitianOperator],
) -> Result<f64> {
    check_ensemble(ps, rhos)?;
    if hs.len() != rhos.len() {
        return Err(LabError::DimensionMismatch(format!(
            "{} Hamiltonians for {} states",
            hs.len(),
            rhos.len()
        )));
    }
    let log_rho = log_support(&ensemble_average(ps, rhos), SUPPORT_FLOOR);
    let mut val = ZERO;
    for ((p, r), h) in ps.iter().zip(rhos).zip(hs) {
        check_dim("Hamiltonian", h.dim(), r.dim())?;
        val += trace_product(h.matrix(), &commutator(r.matrix(), &log_rho)) * *p;
    }
    discard_residue(I * val)
}

/// Per-state maximum over `-1 <= H_i <= 1`: `sum_i p_i ||[rho_i, log rho]||_1`.
pub fn max_ensemble_mixing_rate(ps: &[f64], rhos: &[DensityOperator]) -> Result<f64> {
    check_ensemble(ps, rhos)?;
    let log_rho = log_support(&ensemble_average(ps, rhos), SUPPORT_FLOOR);
    Ok(ps
        .iter()
        .zip(rhos)
        .map(|(p, r)| p * trace_norm(&commutator(r.matrix(), &log_rho)))
        .sum())
}

/// Central difference of `S(rho(t))` at `t = 0`.
pub fn mixing_rate_finite_difference(
    ens: &TwoStateEnsemble,
    h: &HermitianOperator,
    dt: f64,
) -> Result<f64> {
    check_dim("Hamiltonian", h.dim(), ens.dim())?;
    check_step(dt)?;
    let eig = h.eigh();
    let s = |t: f64| von_neumann_entropy(&ens.evolved(&propagator(&eig, t)));
    Ok((s(dt) - s(-dt)) / (2.0 * dt))
}

/// Central difference of `S(sum p_i U_i rho_i U_i^dagger)`.
pub fn ensemble_rate_finite_difference(
    ps: &[f64],
    rhos: &[DensityOperator],
    hs: &[HermitianOperator],
    dt: f64,
) -> Result<f64> {
    check_ensemble(ps, rhos)?;
    check_step(dt)?;
    let eigs: Vec<Eigh> = hs.iter().map(|h| h.eigh()).collect();
    let s = |t: f64| {
        let evolved: Vec<DensityOperator> = rhos
            .iter()
            .zip(&eigs)
            .map(|(r, e)| r.evolve(&propagator(e, t)))
            .collect();
        entropy_of_spectrum(&eigvalsh(&ensemble_average(ps, &evolved)))
    };
    Ok((s(dt) - s(-dt)) / (2.0 * dt))
}

fn check_step(dt: f64) -> Result<()> {
    if dt <= 0.0 || !dt.is_finite() {
        return Err(LabError::Parameter(format!("step {dt} must be positive")));
    }
    Ok(())
}

/// `[D(h) - D(h/2)] / [D(h/2) - D(h/4)]`; close to 4 for a second-order
/// difference quotient in its asymptotic regime.
pub fn richardson_ratio<F: Fn(f64) -> Result<f64>>(d: F, h: f64) -> Result<f64> {
    let (a, b, c) = (d(h)?, d(h / 2.0)?, d(h / 4.0)?);
    Ok((a - b) / (b - c))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SandwichRow {
    pub t: f64,
    pub entropy: f64,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SandwichReport {
    pub rows: Vec<SandwichRow>,
    /// Largest amount by which either side of the sandwich is violated.
    pub max_violation: f64,
}

/// `S_bar <= S(rho(t)) <= S_bar + h(p)` along `t_grid`.
pub fn total_mixing_check(
    ens: &TwoStateEnsemble,
    h: &HermitianOperator,
    t_grid: &[f64],
) -> Result<SandwichReport> {
    check_dim("Hamiltonian", h.dim(), ens.dim())?;
    let lower =
        ens.p * von_neumann_entropy(&ens.rho1) + (1.0 - ens.p) * von_neumann_entropy(&ens.rho2);
    let upper = lower + binary_entropy(ens.p);
    let eig = h.eigh();
    let mut max_violation: f64 = 0.0;
    let rows = t_grid
        .iter()
        .map(|&t| {
            let entropy = von_neumann_entropy(&ens.evolved(&propagator(&eig, t)));
            max_violation = max_violation.max(lower - entropy).max(entropy - upper);
            SandwichRow {
                t,
                entropy,
                lower,
                upper,
            }
        })
        .collect();
    Ok(SandwichReport {
        rows,
        max_violation,
    })
}

// ---------------------------------------------------------------------------
// Entangling rates
// ---------------------------------------------------------------------------

/// Pure state on `a (x) A (x) B (x) b` with a coupling `H_AB`.
#[derive(Debug, Clone)]
pub struct BipartiteSetting {
    /// `(dim a, dim A, dim B, dim b)`.
    pub dims: [usize; 4],
    pub h: HermitianOperator,
    pub psi: PureState,
}

impl BipartiteSetting {
    pub fn new(dims: [usize; 4], h: HermitianOperator, psi: PureState) -> Result<Self> {
        if dims.contains(&0) {
            return Err(LabError::Parameter(
                "local dimensions must be positive".into(),
            ));
        }
        check_dim("H_AB", h.dim(), dims[1] * dims[2])?;
        check_dim("state", psi.dim(), dims.iter().product())?;
        let psi = PureState::new(psi.into_amplitudes(), dims.to_vec())?;
        Ok(Self { dims, h, psi })
    }

    /// `d = min(dim A, dim B)`.
    pub fn d(&self) -> usize {
        self.dims[1].min(self.dims[2])
    }

    pub fn h_norm(&self) -> f64 {
        self.h.norm()
    }
}

const H_FACTORS: [usize; 2] = [1, 2];
const LEFT: [usize; 2] = [0, 1];
const RIGHT: [usize; 2] = [2, 3];

/// `i Tr((1 (x) H (x) 1) [|psi><psi|, log rho_aA (x) 1])`.
pub fn entangling_rate(setting: &BipartiteSetting) -> Result<f64> {
    Ok(rate_kernel(
        &setting.h,
        &setting.dims,
        setting.psi.amplitudes(),
        &LEFT,
        false,
    )
    .0)
}

/// The same trace expression evaluated with full matrices; the imaginary
/// part is the residue the vector formula discards.
pub fn entangling_rate_trace(setting: &BipartiteSetting) -> Result<c64> {
    let layout = setting.dims.to_vec();
    let hf = embed(setting.h.matrix(), &layout, &H_FACTORS)?;
    let rho = setting.psi.reduced(&LEFT)?;
    let l = log_support(rho.matrix(), SUPPORT_FLOOR);
    let lf = embed(&l, &layout, &LEFT)?;
    let p = setting.psi.projector();
    Ok(I * trace_product(&hf, &commutator(p.matrix(), &lf)))
}

/// Daleckii-Krein derivative of the support logarithm applied to `y`.
fn log_frechet(eig: &Eigh, y: &CMat) -> CMat {
    let n = eig.dim();
    let lam = &eig.values;
    let yt = eig.to_eigenbasis(y);
    let f1 = |a: f64, b: f64| -> f64 {
        if a <= SUPPORT_FLOOR || b <= SUPPORT_FLOOR {
            0.0
        } else if (a - b).abs() <= 1e-12 * a.max(b) {
            2.0 / (a + b)
        } else {
            (a.ln() - b.ln()) / (a - b)
        }
    };
    let g = faer::Mat::from_fn(n, n, |i, j| yt[(i, j)] * f1(lam[i], lam[j]));
    eig.from_eigenbasis(&g)
}

/// Rate and, optionally, `M psi` with `M = i[L, H] + G (x) 1`, so the
/// directional derivative along `dpsi` is `2 Re <dpsi | M psi>`.
fn rate_kernel(
    h: &HermitianOperator,
    dims: &[usize; 4],
    amps: &[c64],
    side: &[usize; 2],
    grad: bool,
) -> (f64, Vec<c64>) {
    let layout = dims.to_vec();
    let psi_m = state_matrix(amps, &layout, side).expect("valid factors");
    let rho = &psi_m * psi_m.adjoint();
    let eig = Eigh::new(&rho);
    let l = eig.apply(|x| if x > SUPPORT_FLOOR { x.ln() } else { 0.0 });
    let l_psi_m = &l * &psi_m;
    let l_psi = state_from_matrix(&l_psi_m, &layout, side);
    let h_psi = apply_local(h.matrix(), &layout, &H_FACTORS, amps);
    let x = inner(&h_psi, &l_psi);
    let rate = 2.0 * x.im;
    if !grad {
        return (rate, vec![]);
    }
    let h_psi_m = state_matrix(&h_psi, &layout, side).expect("valid factors");
    let l_h_psi = state_from_matrix(&(&l * &h_psi_m), &layout, side);
    let h_l_psi = apply_local(h.matrix(), &layout, &H_FACTORS, &l_psi);
    let y = scale(
        &(&h_psi_m * psi_m.adjoint() - &psi_m * h_psi_m.adjoint()),
        I,
    );
    let g = log_frechet(&eig, &y);
    let g_psi = state_from_matrix(&(&g * &psi_m), &layout, side);
    let m_psi = (0..amps.len())
        .map(|k| I * (l_h_psi[k] - h_l_psi[k]) + g_psi[k])
        .collect();
    (rate, m_psi)
}

/// Central difference of `S(rho_aA)` under `e^{-iHt}` on `A (x) B`.
pub fn rate_finite_difference(setting: &BipartiteSetting, dt: f64) -> Result<f64> {
    check_step(dt)?;
    let eig = setting.h.eigh();
    let s = |t: f64| -> Result<f64> {
        let u = propagator(&eig, t);
        let amps = apply_local(&u, &setting.dims, &H_FACTORS, setting.psi.amplitudes());
        let psi = PureState::normalized(amps, setting.dims.to_vec())?;
        psi.entanglement_entropy(&LEFT)
    };
    Ok((s(dt)? - s(-dt)?) / (2.0 * dt))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TotalEntanglingReport {
    pub before: f64,
    pub after: f64,
    pub change: f64,
    pub bound: f64,
    pub holds: bool,
}

/// `|S(rho_aA) before - after| <= 2 log d` for one unitary on `A (x) B`.
pub fn total_entangling_check(
    u: &CMat,
    dims: [usize; 4],
    psi: &PureState,
) -> Result<TotalEntanglingReport> {
    let dab = dims[1] * dims[2];
    if u.nrows() != dab || u.ncols() != dab {
        return Err(LabError::DimensionMismatch(format!(
            "unitary is {}x{}, A (x) B has dimension {dab}",
            u.nrows(),
            u.ncols()
        )));
    }
    let defect = max_abs_diff(&(u.adjoint() * u), &identity(dab));
    if defect > 1e-10 {
        return Err(LabError::Domain(format!(
            "input is not unitary (defect {defect:.3e})"
        )));
    }
    check_dim("state", psi.dim(), dims.iter().product())?;
    let psi = PureState::new(psi.amplitudes().to_vec(), dims.to_vec())?;
    let before = psi.entanglement_entropy(&LEFT)?;
    let after_amps = apply_local(u, &dims, &H_FACTORS, psi.amplitudes());
    let after = PureState::normalized(after_amps, dims.to_vec())?.entanglement_entropy(&LEFT)?;
    let d = dims[1].min(dims[2]) as f64;
    let bound = 2.0 * d.ln();
    let change = (after - before).abs();
    Ok(TotalEntanglingReport {
        before,
        after,
        change,
        bound,
        holds: change <= bound + 1e-9,
    })
}

/// `mu = [rho_A (x) 1/d - rho_AB/d^2] / (1 - 1/d^2)` with `d = dim B`.
pub fn extension_state(rho_ab: &DensityOperator) -> Result<DensityOperator> {
    let layout = rho_ab
        .layout()
        .filter(|l| l.len() == 2)
        .ok_or_else(|| LabError::Usage("extension state needs a two-factor layout (A, B)".into()))?
        .to_vec();
    let d = layout[1];
    if d == 1 {
        return Err(LabError::Domain(
            "dim B = 1 makes the extension degenerate".into(),
        ));
    }
    let df = d as f64;
    let rho_a = partial_trace(rho_ab, &[0])?;
    let tau = scale_re(&kron(rho_a.matrix(), &identity(d)), 1.0 / df);
    let mu = scale_re(
        &(tau - scale_re(rho_ab.matrix(), 1.0 / (df * df))),
        1.0 / (1.0 - 1.0 / (df * df)),
    );
    DensityOperator::new(mu, Some(layout))
}

/// `{(1 - 1/d^2, mu), (1/d^2, rho_AB)}` whose average is `rho_A (x) 1/d`;
/// `rho_AB` is the evolving member.
pub fn reduction_ensemble(rho_ab: &DensityOperator) -> Result<TwoStateEnsemble> {
    let mu = extension_state(rho_ab)?;
    let d = rho_ab.layout().expect("checked by extension_state")[1] as f64;
    TwoStateEnsemble::new(1.0 - 1.0 / (d * d), mu, rho_ab.clone())
}

// ---------------------------------------------------------------------------
// Optimizer
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AscentOptions {
    pub restarts: usize,
    pub max_iterations: usize,
    pub seed: u64,
    pub initial_step: f64,
    pub gradient_tol: f64,
}

impl Default for AscentOptions {
    fn default() -> Self {
        Self {
            restarts: 20,
            max_iterations: 200,
            seed: 0,
            initial_step: 0.5,
            gradient_tol: 1e-9,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub state: OperatorJson,
    pub hamiltonian: OperatorJson,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub value: f64,
    pub bound: f64,
    pub ratio: f64,
    pub witness: Witness,
    pub seed: u64,
    pub iterations: usize,
    /// `value / ln 2`.
    pub value_bits: f64,
    pub converged: bool,
    pub restart_values: Vec<f64>,
}

struct AscentRun {
    value: f64,
    amps: Vec<c64>,
    iterations: usize,
    converged: bool,
}

fn project_tangent(psi: &[c64], g: &mut [c64]) {
    let overlap = inner(psi, g).re;
    for (gk, pk) in g.iter_mut().zip(psi) {
        *gk -= *pk * overlap;
    }
}

fn ascend(
    h: &HermitianOperator,
    dims: &[usize; 4],
    start: Vec<c64>,
    side: &[usize; 2],
    opts: &AscentOptions,
) -> AscentRun {
    let mut psi = start;
    let (mut value, mut m_psi) = rate_kernel(h, dims, &psi, side, true);
    let mut step = opts.initial_step;
    let mut iterations = 0;
    let mut converged = false;
    while iterations < opts.max_iterations {
        iterations += 1;
        let mut g: Vec<c64> = m_psi.iter().map(|x| *x * 2.0).collect();
        project_tangent(&psi, &mut g);
        let gnorm = vec_norm(&g);
        if gnorm < opts.gradient_tol {
            converged = true;
            break;
        }
        let mut accepted = false;
        while step > 1e-14 {
            let trial: Vec<c64> = psi.iter().zip(&g).map(|(p, gk)| *p + *gk * step).collect();
            let n = vec_norm(&trial);
            let trial: Vec<c64> = trial.into_iter().map(|x| x / n).collect();
            let (tv, tm) = rate_kernel(h, dims, &trial, side, true);
            if tv > value {
                let gain = tv - value;
                psi = trial;
                value = tv;
                m_psi = tm;
                accepted = true;
                if gain < 1e-13 * value.abs().max(1.0) {
                    converged = true;
                }
                break;
            }
            step *= 0.5;
        }
        if !accepted || converged {
            converged = true;
            break;
        }
        step = (step * 2.0).min(4.0);
    }
    AscentRun {
        value,
        amps: psi,
        iterations,
        converged,
    }
}

/// Gradient of the entangling rate with respect to `psi`, as a complex
/// vector `g` with `dGamma = Re <g | dpsi>`. Exposed for gradient checks.
pub fn entangling_rate_gradient(setting: &BipartiteSetting) -> Vec<c64> {
    let side = smaller_side(&setting.dims);
    let (_, m) = rate_kernel(
        &setting.h,
        &setting.dims,
        setting.psi.amplitudes(),
        &side,
        true,
    );
    m.into_iter().map(|x| x * 2.0).collect()
}

/// `S(aA) = S(Bb)` for pure states, so the rate can be computed from the
/// cut side whose reduced state is generically full rank.
fn smaller_side(dims: &[usize; 4]) -> [usize; 2] {
    if dims[0] * dims[1] <= dims[2] * dims[3] {
        LEFT
    } else {
        RIGHT
    }
}

/// Best-of-restarts Riemannian gradient ascent of the entangling rate over
/// pure states on `a (x) A (x) B (x) b`, with `H_AB` normalized to unit norm.
pub fn maximize_entangling_rate(
    h_ab: &HermitianOperator,
    dims_ab: [usize; 2],
    ancilla_dims: [usize; 2],
    opts: &AscentOptions,
) -> Result<RateReport> {
    if opts.restarts == 0 {
        return Err(LabError::Parameter("need at least one restart".into()));
    }
    check_dim("H_AB", h_ab.dim(), dims_ab[0] * dims_ab[1])?;
    let dims = [ancilla_dims[0], dims_ab[0], dims_ab[1], ancilla_dims[1]];
    if dims.contains(&0) {
        return Err(LabError::Parameter(
            "local dimensions must be positive".into(),
        ));
    }
    let norm = h_ab.norm();
    let h = if norm > 0.0 {
        h_ab.scaled(1.0 / norm)
    } else {
        h_ab.clone()
    };
    let side = smaller_side(&dims);
    // A rate and its negative are both reachable (flip the sign of the
    // state's phase structure), so maximizing the signed rate suffices.
    let runs: Vec<AscentRun> = (0..opts.restarts)
        .into_par_iter()
        .map(|k| {
            let mut rng = stream(opts.seed, k as u64);
            let start = random_pure_state(dims.to_vec(), &mut rng).into_amplitudes();
            ascend(&h, &dims, start, &side, opts)
        })
        .collect();
    let restart_values: Vec<f64> = runs.iter().map(|r| r.value).collect();
    let best = runs
        .iter()
        .enumerate()
        .max_by(|(i, a), (j, b)| a.value.total_cmp(&b.value).then(j.cmp(i)))
        .map(|(_, r)| r)
        .expect("at least one restart");
    let d = dims_ab[0].min(dims_ab[1]) as f64;
    let bound = 4.0 * d.ln();
    let state = PureState::normalized(best.amps.clone(), dims.to_vec())?;
    let value = rate_kernel(&h, &dims, state.amplitudes(), &LEFT, false)
        .0
        .max(0.0);
    Ok(RateReport {
        value,
        bound,
        ratio: if bound > 0.0 { value / bound } else { 0.0 },
        witness: Witness {
            state: OperatorJson::from_state(&state),
            hamiltonian: OperatorJson::from_matrix(h.matrix(), Some(&dims_ab)),
        },
        seed: opts.seed,
        iterations: runs.iter().map(|r| r.iterations).sum(),
        value_bits: value / std::f64::consts::LN_2,
        converged: best.converged,
        restart_values,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuperpositionReport {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

/// `S(a psi1 + b psi2) <= 2 (|a|^2 S(psi1) + |b|^2 S(psi2) + h(|a|^2))`
/// across the cut `keep | rest`.
pub fn superposition_entropy_check(
    psi1: &PureState,
    psi2: &PureState,
    alpha: c64,
    beta: c64,
    keep: &[usize],
) -> Result<SuperpositionReport> {
    if psi1.layout() != psi2.layout() {
        return Err(LabError::DimensionMismatch(
            "states have different layouts".into(),
        ));
    }
    let total = alpha.norm_sqr() + beta.norm_sqr();
    if (total - 1.0).abs() > 1e-10 {
        return Err(LabError::Parameter(format!(
            "|alpha|^2 + |beta|^2 = {total}, expected 1"
        )));
    }
    let ov = psi1.overlap(psi2).norm();
    if ov > 1e-10 {
        return Err(LabError::Domain(format!(
            "states are not orthogonal (overlap {ov:.3e})"
        )));
    }
    let amps: Vec<c64> = psi1
        .amplitudes()
        .iter()
        .zip(psi2.amplitudes())
        .map(|(a, b)| alpha * *a + beta * *b)
        .collect();
    let sup = PureState::normalized(amps, psi1.layout().to_vec())?;
    let lhs = sup.entanglement_entropy(keep)?;
    let (pa, pb) = (alpha.norm_sqr(), beta.norm_sqr());
    let rhs = 2.0
        * (pa * psi1.entanglement_entropy(keep)?
            + pb * psi2.entanglement_entropy(keep)?
            + binary_entropy(pa));
    Ok(SuperpositionReport {
        lhs,
        rhs,
        holds: lhs <= rhs + 1e-9,
    })
}
