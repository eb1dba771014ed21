//! Quasi-adiabatic continuation along gapped Hamiltonian paths.
//!
//! The generator is built in the energy domain. With `W` the odd spectral
//! weight of the filter, `K_ij = -i W(E_i - E_j) (dH/ds)_ij` in the eigenbasis
//! of `H(s)`; for `|E_i - E_0| >= Delta` this gives `iK|psi_0> = d|psi_0>/ds`,
//! first-order perturbation theory in the parallel-transport gauge.

use std::collections::BTreeMap;

use faer::Mat;
use serde::{Deserialize, Serialize};

use crate::dynamics::{area_rate_constant, cut_log_apply};
use crate::error::{LabError, Result};
use crate::fit::loglog_slope;
use crate::hamiltonian::{assemble, assemble_on, tfim, translation_defect, Potential};
use crate::lattice::{ball, boundary_and_area, LatticeSpec, Region};
use crate::operator::*;

pub const DEFAULT_SHARPNESS: f64 = 6.0;
pub const SHARPNESS_RANGE: (f64, f64) = (0.5, 40.0);

// ---------------------------------------------------------------------------
// Filter
// ---------------------------------------------------------------------------

/// `exp(b (1 - 1/(1 - x^2)))` on `(-1, 1)`, zero outside.
pub fn bump(x: f64, b: f64) -> f64 {
    if x.abs() >= 1.0 {
        0.0
    } else {
        (b * (1.0 - 1.0 / (1.0 - x * x))).exp()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterGrid {
    /// Largest sampled `Delta t`.
    pub tau_max: f64,
    pub t_points: usize,
    /// Odd number of Simpson nodes on `[0, 1]`.
    pub quadrature_points: usize,
    /// Window in `Delta t` for the decay fit.
    pub fit_window: (f64, f64),
}

impl Default for FilterGrid {
    fn default() -> Self {
        Self {
            tau_max: 50.0,
            t_points: 501,
            quadrature_points: 20001,
            fit_window: (5.0, 50.0),
        }
    }
}

/// Filter with spectral weight `W(w) = -(1 - g(w/Delta))/w` and time-domain
/// samples `F(t) = i f(t)`, `f(t) = 1/2 - (1/pi) int_0^1 g(u) sin(u Delta t)/u du`
/// for `t > 0` (odd continuation for `t < 0`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterFunction {
    pub delta: f64,
    pub sharpness: f64,
    pub grid: FilterGrid,
    pub t: Vec<f64>,
    /// Imaginary part of `F(t)`.
    pub f: Vec<f64>,
    /// Log-log slope of the tail envelope `sup_{t' >= t} |F(t')|`.
    pub decay_exponent: Option<f64>,
}

impl FilterFunction {
    pub fn w(&self, omega: f64) -> f64 {
        if omega == 0.0 {
            0.0
        } else {
            -(1.0 - bump(omega / self.delta, self.sharpness)) / omega
        }
    }

    /// `f(t)` by Simpson quadrature.
    pub fn f_at(&self, t: f64) -> f64 {
        time_profile(
            self.delta * t.abs(),
            self.sharpness,
            self.grid.quadrature_points,
        ) * t.signum()
    }

    /// `(omega, W(omega))` on an even grid over `[-extent, extent]`.
    pub fn weight_samples(&self, extent: f64, points: usize) -> Vec<(f64, f64)> {
        crate::dynamics::time_grid(-extent, extent, points)
            .into_iter()
            .map(|w| (w, self.w(w)))
            .collect()
    }
}

fn time_profile(tau: f64, b: f64, n: usize) -> f64 {
    if tau == 0.0 {
        return 0.5;
    }
    let n = if n.is_multiple_of(2) { n + 1 } else { n };
    let h = 1.0 / (n - 1) as f64;
    let mut acc = 0.0;
    for k in 0..n {
        let u = k as f64 * h;
        let v = if k == 0 {
            tau
        } else {
            bump(u, b) * (u * tau).sin() / u
        };
        let c = if k == 0 || k == n - 1 {
            1.0
        } else if k % 2 == 1 {
            4.0
        } else {
            2.0
        };
        acc += c * v;
    }
    0.5 - acc * h / 3.0 / std::f64::consts::PI
}

pub fn build_filter(delta: f64, sharpness: f64) -> Result<FilterFunction> {
    build_filter_with(delta, sharpness, FilterGrid::default())
}

pub fn build_filter_with(delta: f64, sharpness: f64, grid: FilterGrid) -> Result<FilterFunction> {
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(LabError::Parameter(format!(
            "Delta = {delta} must be positive"
        )));
    }
    if !(SHARPNESS_RANGE.0..=SHARPNESS_RANGE.1).contains(&sharpness) {
        return Err(LabError::Parameter(format!(
            "bump sharpness {sharpness} outside [{}, {}]",
            SHARPNESS_RANGE.0, SHARPNESS_RANGE.1
        )));
    }
    if grid.t_points < 2 || grid.quadrature_points < 3 || !(grid.tau_max > 0.0) {
        return Err(LabError::Parameter("filter grid too coarse".into()));
    }
    let taus = crate::dynamics::time_grid(0.0, grid.tau_max, grid.t_points);
    let f: Vec<f64> = taus
        .iter()
        .map(|&tau| time_profile(tau, sharpness, grid.quadrature_points))
        .collect();
    let (lo, hi) = grid.fit_window;
    let mut env = vec![0.0; f.len()];
    let mut running: f64 = 0.0;
    for k in (0..f.len()).rev() {
        running = running.max(f[k].abs());
        env[k] = running;
    }
    let (xs, ys): (Vec<f64>, Vec<f64>) = taus
        .iter()
        .zip(&env)
        .filter(|(&tau, _)| tau >= lo - 1e-12 && tau <= hi + 1e-12)
        .map(|(&tau, &e)| (tau, e))
        .unzip();
    Ok(FilterFunction {
        delta,
        sharpness,
        grid,
        t: taus.iter().map(|tau| tau / delta).collect(),
        f,
        decay_exponent: loglog_slope(&xs, &ys),
    })
}

/// `F^Lambda(A)`: `(-i W(E_i - E_j) A_ij)` in the eigenbasis `eig`.
pub fn filter_map(eig: &Eigh, a: &CMat, filter: &FilterFunction) -> CMat {
    let at = eig.to_eigenbasis(a);
    let e = &eig.values;
    let n = e.len();
    let k = Mat::from_fn(n, n, |i, j| at[(i, j)] * cx(0.0, -filter.w(e[i] - e[j])));
    symmetrize(&eig.from_eigenbasis(&k))
}

// ---------------------------------------------------------------------------
// Paths
// ---------------------------------------------------------------------------

/// `H(s) = (1-s) H_0 + s H_1` on a lattice.
#[derive(Debug, Clone)]
pub struct QAPath {
    pub spec: LatticeSpec,
    pub h0: Potential,
    pub h1: Potential,
    pub gap_floor: f64,
    pub steps: usize,
    m0: CMat,
    m1: CMat,
}

impl QAPath {
    pub fn new(
        spec: LatticeSpec,
        h0: Potential,
        h1: Potential,
        gap_floor: f64,
        steps: usize,
    ) -> Result<Self> {
        if h0.n_sites != spec.n_sites()
            || h1.n_sites != spec.n_sites()
            || h0.local_dim != h1.local_dim
        {
            return Err(LabError::DimensionMismatch(
                "path endpoints disagree with the lattice".into(),
            ));
        }
        if steps == 0 {
            return Err(LabError::Parameter("a path needs at least one step".into()));
        }
        if !(gap_floor >= 0.0) {
            return Err(LabError::Parameter(format!(
                "gap floor {gap_floor} is negative"
            )));
        }
        let m0 = assemble(&h0)?.into_matrix();
        let m1 = assemble(&h1)?.into_matrix();
        Ok(Self {
            spec,
            h0,
            h1,
            gap_floor,
            steps,
            m0,
            m1,
        })
    }

    /// TFIM field sweep `g0 -> g1` on a periodic chain.
    pub fn tfim(l: usize, j: f64, g0: f64, g1: f64, steps: usize) -> Result<Self> {
        let spec = LatticeSpec::chain(l)?;
        let h0 = tfim(&spec, j, g0)?;
        let h1 = tfim(&spec, j, g1)?;
        Self::new(spec, h0, h1, 0.0, steps)
    }

    pub fn layout(&self) -> Vec<usize> {
        self.h0.layout()
    }

    pub fn hamiltonian(&self, s: f64) -> CMat {
        let a = scale_re(&self.m0, 1.0 - s);
        let b = scale_re(&self.m1, s);
        &a + &b
    }

    pub fn derivative(&self) -> CMat {
        &self.m1 - &self.m0
    }

    pub fn potential_at(&self, s: f64) -> Result<Potential> {
        self.h0.scaled(1.0 - s).plus(&self.h1.scaled(s))
    }

    /// `H_1 - H_0` with terms on the same support and anchor combined.
    pub fn derivative_potential(&self) -> Potential {
        let mut acc: BTreeMap<(Vec<usize>, usize), CMat> = BTreeMap::new();
        for (pot, k) in [(&self.h1, 1.0), (&self.h0, -1.0)] {
            for t in &pot.terms {
                let op = scale_re(&t.op, k);
                acc.entry((t.sites.clone(), t.anchor))
                    .and_modify(|m| *m = &*m + &op)
                    .or_insert(op);
            }
        }
        let mut out = Potential::new(self.h0.n_sites, self.h0.local_dim);
        for ((sites, anchor), op) in acc {
            if frobenius_norm(&op) > 1e-14 {
                out.norm_bound = out.norm_bound.max(operator_norm(&op));
                out.terms
                    .push(crate::hamiltonian::Term { sites, op, anchor });
            }
        }
        out
    }

    pub fn gap(&self, s: f64) -> f64 {
        let ev = eigvalsh(&self.hamiltonian(s));
        ev[1] - ev[0]
    }

    /// `(s, gap)` at the smallest gap over an even grid of `points`.
    pub fn min_gap(&self, points: usize) -> (f64, f64) {
        crate::dynamics::time_grid(0.0, 1.0, points.max(2))
            .into_iter()
            .map(|s| (s, self.gap(s)))
            .fold((0.0, f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a })
    }

    /// Sets the floor to `fraction` of the smallest gap on the step grid.
    pub fn with_auto_floor(mut self, fraction: f64) -> Self {
        self.gap_floor = fraction * self.min_gap(self.steps + 1).1;
        self
    }

    /// Checks the gap at every step point.
    pub fn validate(&self) -> Result<Vec<(f64, f64)>> {
        let mut last_valid = f64::NAN;
        let mut out = vec![];
        for s in crate::dynamics::time_grid(0.0, 1.0, self.steps + 1) {
            let gap = self.gap(s);
            if gap < self.gap_floor {
                return Err(LabError::GapCollapse {
                    s,
                    gap,
                    floor: self.gap_floor,
                    last_valid,
                });
            }
            last_valid = s;
            out.push((s, gap));
        }
        Ok(out)
    }

    /// The path restricted to `[a, b]` and reparametrized onto `[0, 1]`.
    pub fn segment(&self, a: f64, b: f64, steps: usize) -> Result<Self> {
        let h0 = self.potential_at(a)?;
        let h1 = self.potential_at(b)?;
        Self::new(self.spec, h0, h1, self.gap_floor, steps)
    }

    pub fn reversed(&self) -> Result<Self> {
        Self::new(
            self.spec,
            self.h1.clone(),
            self.h0.clone(),
            self.gap_floor,
            self.steps,
        )
    }

    pub fn is_translation_invariant(&self) -> bool {
        let d = self.h0.local_dim;
        translation_defect(&self.m0, &self.spec, d) <= 1e-12
            && translation_defect(&self.m1, &self.spec, d) <= 1e-12
    }
}

/// Spectrum of `H(s)` with the ground-state gap checked against the filter.
pub struct Frame {
    pub s: f64,
    pub eig: Eigh,
    pub gap: f64,
}

impl Frame {
    pub fn new(path: &QAPath, s: f64, filter: &FilterFunction) -> Result<Self> {
        let eig = Eigh::new(&path.hamiltonian(s));
        let gap = eig.values[1] - eig.values[0];
        if gap < filter.delta * (1.0 - 1e-12) {
            return Err(LabError::Gap {
                s,
                gap,
                required: filter.delta,
            });
        }
        Ok(Self { s, eig, gap })
    }

    pub fn ground(&self) -> Vec<c64> {
        self.eig.column(0)
    }

    pub fn generator(&self, path: &QAPath, filter: &FilterFunction) -> CMat {
        filter_map(&self.eig, &path.derivative(), filter)
    }
}

/// `K(s)` on the full lattice.
pub fn qac_generator(path: &QAPath, s: f64, filter: &FilterFunction) -> Result<HermitianOperator> {
    let frame = Frame::new(path, s, filter)?;
    HermitianOperator::new(frame.generator(path, filter), Some(path.layout()))
}

/// Ground state of `H(s)` with its phase aligned to `reference`.
pub fn aligned_ground_state(path: &QAPath, s: f64, reference: &[c64]) -> Vec<c64> {
    let g = Eigh::new(&path.hamiltonian(s)).column(0);
    let ov = inner(&g, reference);
    let ph = if ov.norm() > 0.0 { ov / ov.norm() } else { ONE };
    g.into_iter().map(|x| x * ph).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tangency {
    pub s: f64,
    pub residual: f64,
    pub derivative_norm: f64,
    pub tolerance: f64,
    pub holds: bool,
}

/// `||iK|psi_0> - d|psi_0>/ds||` with the derivative from phase-aligned
/// central differences of exact ground states.
pub fn tangency_residual(
    path: &QAPath,
    s: f64,
    filter: &FilterFunction,
    h: f64,
) -> Result<Tangency> {
    let frame = Frame::new(path, s, filter)?;
    let psi = frame.ground();
    let k = frame.generator(path, filter);
    let ik_psi: Vec<c64> = matvec(&k, &psi).into_iter().map(|x| I * x).collect();
    let plus = aligned_ground_state(path, s + h, &psi);
    let minus = aligned_ground_state(path, s - h, &psi);
    let d: Vec<c64> = plus
        .iter()
        .zip(&minus)
        .map(|(a, b)| (*a - *b) / (2.0 * h))
        .collect();
    let diff: Vec<c64> = ik_psi.iter().zip(&d).map(|(a, b)| *a - *b).collect();
    let residual = vec_norm(&diff);
    let derivative_norm = vec_norm(&d);
    let tolerance = 1e-6 * derivative_norm.max(1.0);
    Ok(Tangency {
        s,
        residual,
        derivative_norm,
        tolerance,
        holds: residual <= tolerance,
    })
}

// ---------------------------------------------------------------------------
// Truncated generators
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruncationReport {
    pub center: usize,
    pub s: f64,
    pub norms: Vec<f64>,
    pub region_sizes: Vec<usize>,
    /// Log-log slope of `||k_r||` over `r in [2, r_max]`.
    pub slope: Option<f64>,
    /// `||sum_r k_r - F(dh)||` when the last region is the whole lattice.
    pub telescoping_residual: Option<f64>,
}

/// Local terms of `dH/ds` anchored at `center`, combined on their joint support.
fn anchored_derivative(path: &QAPath, center: usize) -> Result<(Region, CMat)> {
    let dpot = path.derivative_potential();
    let mut sub = Potential::new(dpot.n_sites, dpot.local_dim);
    sub.terms = dpot
        .terms
        .into_iter()
        .filter(|t| t.anchor == center)
        .collect();
    let support = sub
        .terms
        .iter()
        .fold(Region::new([center]), |acc, t| acc.union(&t.support()));
    let op = assemble_on(&sub, &support)?;
    Ok((support, op))
}

/// `k_0 = F^{L_0}(dh)`, `k_r = F^{L_r}(dh) - F^{L_{r-1}}(dh)` with
/// `L_r = ball(center, r) u supp(dh)` and `F^L` built from `H(s)` restricted to `L`.
pub fn truncated_generators(
    path: &QAPath,
    s: f64,
    filter: &FilterFunction,
    center: usize,
    r_max: usize,
) -> Result<TruncationReport> {
    let spec = &path.spec;
    if center >= spec.n_sites() {
        return Err(LabError::Usage(format!("center {center} out of range")));
    }
    if r_max > spec.max_distance() {
        return Err(LabError::Domain(format!(
            "radius {r_max} exceeds the lattice diameter {}",
            spec.max_distance()
        )));
    }
    let pot = path.potential_at(s)?;
    let (support, dh) = anchored_derivative(path, center)?;
    let d = pot.local_dim;
    let mut norms = vec![];
    let mut sizes = vec![];
    let mut prev: Option<(Vec<usize>, CMat)> = None;
    let mut total: Option<CMat> = None;
    for r in 0..=r_max {
        let region = ball(center, r, spec)?.union(&support);
        let sites = region.to_vec();
        let layout = vec![d; sites.len()];
        let pos: Vec<usize> = support
            .to_vec()
            .iter()
            .map(|x| sites.binary_search(x).expect("support inside region"))
            .collect();
        let a = embed(&dh, &layout, &pos)?;
        let eig = Eigh::new(&assemble_on(&pot, &region)?);
        let f = filter_map(&eig, &a, filter);
        let (k, sum) = match (&prev, &total) {
            (Some((ps, pf)), Some(pt)) => {
                let inner_pos: Vec<usize> = ps
                    .iter()
                    .map(|x| sites.binary_search(x).expect("nested regions"))
                    .collect();
                let k = &f - &embed(pf, &layout, &inner_pos)?;
                let sum = &embed(pt, &layout, &inner_pos)? + &k;
                (k, sum)
            }
            _ => (f.clone(), f.clone()),
        };
        norms.push(operator_norm(&k));
        sizes.push(sites.len());
        prev = Some((sites, f));
        total = Some(sum);
    }
    let telescoping_residual = match (&prev, &total) {
        (Some((sites, _)), Some(sum)) if sites.len() == spec.n_sites() => {
            let direct = untruncated_term_generator(path, s, filter, center)?;
            Some(max_abs_diff(sum, &direct))
        }
        _ => None,
    };
    let xs: Vec<f64> = (2..=r_max).map(|r| r as f64).collect();
    let slope = if r_max >= 3 {
        loglog_slope(&xs, &norms[2..])
    } else {
        None
    };
    Ok(TruncationReport {
        center,
        s,
        norms,
        region_sizes: sizes,
        slope,
        telescoping_residual,
    })
}

/// `F(dh_center)` from the full Hamiltonian, computed afresh.
fn untruncated_term_generator(
    path: &QAPath,
    s: f64,
    filter: &FilterFunction,
    center: usize,
) -> Result<CMat> {
    let (support, dh) = anchored_derivative(path, center)?;
    let a = embed(&dh, &path.layout(), &support.to_vec())?;
    let eig = Eigh::new(&path.hamiltonian(s));
    Ok(filter_map(&eig, &a, filter))
}

/// Area-rate constant `C(s)` from `||k_r||`, maximized over `centers`.
pub fn generator_constant(
    path: &QAPath,
    s: f64,
    filter: &FilterFunction,
    centers: &[usize],
) -> Result<(f64, Vec<f64>)> {
    let r_max = path.spec.max_distance();
    let mut best = vec![0.0; r_max + 1];
    for &c in centers {
        let rep = truncated_generators(path, s, filter, c, r_max)?;
        for (b, n) in best.iter_mut().zip(rep.norms) {
            *b = f64::max(*b, n);
        }
    }
    let c = area_rate_constant(&best, path.spec.nu, path.h0.local_dim);
    Ok((c, best))
}

// ---------------------------------------------------------------------------
// Transport
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransportOptions {
    pub steps: usize,
    /// Repeat with twice the steps and report the fidelity difference.
    pub step_check: bool,
    /// Evaluate `C(s)` at each step.
    pub constants: bool,
}

impl Default for TransportOptions {
    fn default() -> Self {
        Self {
            steps: 200,
            step_check: true,
            constants: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransportRow {
    pub s: f64,
    pub gap: f64,
    pub fidelity: f64,
    pub entropy: f64,
    pub rate: f64,
    /// `C(s) A`, or NaN when constants are off.
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransportResult {
    pub steps: usize,
    pub area: usize,
    pub rows: Vec<TransportRow>,
    /// `max_s C(s)`.
    pub constant: f64,
    pub bound: f64,
    pub delta_s: f64,
    /// Entropy change between the exact endpoint ground states.
    pub delta_s_exact: f64,
    pub final_fidelity: f64,
    pub max_unitarity_defect: f64,
    pub rate_violations: Vec<f64>,
    pub total_holds: bool,
    /// `|fidelity(steps) - fidelity(2 steps)|` at `s = 1`.
    pub step_check: Option<f64>,
    #[serde(skip)]
    pub unitary: CMat,
}

fn unitary_defect(u: &CMat) -> f64 {
    let p = u.adjoint() * u;
    max_abs_diff(&p, &identity(u.nrows()))
}

/// Closest unitary `U (U^dagger U)^{-1/2}`, by Newton-Schulz steps
/// `U <- U (3 - U^dagger U)/2`; the input is already nearly unitary.
fn polar(u: &CMat) -> CMat {
    let n = u.nrows();
    let mut u = u.clone();
    for _ in 0..8 {
        let p = u.adjoint() * &u;
        if max_abs_diff(&p, &identity(n)) <= 1e-15 {
            break;
        }
        let corr = scale_re(&(scale_re(&identity(n), 3.0) - &p), 0.5);
        u = &u * &corr;
    }
    u
}

fn rhs(k: &CMat, u: &CMat) -> CMat {
    scale(&(k * u), I)
}

fn axpy(u: &CMat, h: f64, k: &CMat) -> CMat {
    u + &scale_re(k, h)
}

/// Integrates `dU/ds = i K(s) U` with RK4 and polar re-unitarization, tracking
/// the transported ground state across the cut `region`.
pub fn transport(
    path: &QAPath,
    filter: &FilterFunction,
    region: &Region,
    opts: TransportOptions,
) -> Result<TransportResult> {
    let mut out = transport_run(path, filter, region, opts.steps, opts.constants)?;
    if opts.step_check {
        let fine = transport_run(path, filter, region, 2 * opts.steps, false)?;
        out.step_check = Some((out.final_fidelity - fine.final_fidelity).abs());
    }
    Ok(out)
}

fn transport_run(
    path: &QAPath,
    filter: &FilterFunction,
    region: &Region,
    steps: usize,
    constants: bool,
) -> Result<TransportResult> {
    if steps == 0 {
        return Err(LabError::Parameter(
            "transport needs at least one step".into(),
        ));
    }
    let spec = &path.spec;
    let area = boundary_and_area(region, spec)?.area;
    let keep = region.to_vec();
    let layout = path.layout();
    let floor = path.gap_floor.max(filter.delta);
    let centers: Vec<usize> = if path.is_translation_invariant() {
        vec![0]
    } else {
        (0..spec.n_sites()).collect()
    };
    let mut last_valid = f64::NAN;
    let frame_at = |s: f64, last_valid: f64| -> Result<Frame> {
        let eig = Eigh::new(&path.hamiltonian(s));
        let gap = eig.values[1] - eig.values[0];
        if gap < floor * (1.0 - 1e-12) {
            return Err(LabError::GapCollapse {
                s,
                gap,
                floor,
                last_valid,
            });
        }
        Ok(Frame { s, eig, gap })
    };
    let h = 1.0 / steps as f64;
    let dim = path.h0.dim();
    let mut u = identity(dim);
    let mut frame = frame_at(0.0, last_valid)?;
    let psi0 = frame.ground();
    let mut k_now = frame.generator(path, filter);
    let mut rows = Vec::with_capacity(steps + 1);
    let mut max_defect: f64 = 0.0;
    let mut constant: f64 = 0.0;
    let mut violations = vec![];
    let entropy0_exact =
        PureState::new(psi0.clone(), layout.clone())?.entanglement_entropy(&keep)?;
    for n in 0..=steps {
        let s = n as f64 * h;
        let phi = matvec(&u, &psi0);
        let state = PureState::normalized(phi.clone(), layout.clone())?;
        let entropy = state.entanglement_entropy(&keep)?;
        let l_phi = cut_log_apply(&state, region)?;
        let k_phi = matvec(&k_now, &phi);
        let rate = 2.0 * inner(&l_phi, &k_phi).im;
        let fidelity = inner(&frame.ground(), &phi).norm().min(1.0);
        let bound = if constants {
            let (c, _) = generator_constant(path, s, filter, &centers)?;
            constant = constant.max(c);
            c * area as f64
        } else {
            f64::NAN
        };
        if constants && rate.abs() > bound {
            violations.push(s);
        }
        max_defect = max_defect.max(unitary_defect(&u));
        rows.push(TransportRow {
            s,
            gap: frame.gap,
            fidelity,
            entropy,
            rate,
            bound,
        });
        last_valid = s;
        if n == steps {
            break;
        }
        let mid = frame_at(s + 0.5 * h, last_valid)?;
        let k_mid = mid.generator(path, filter);
        let next = frame_at(s + h, last_valid)?;
        let k_next = next.generator(path, filter);
        let k1 = rhs(&k_now, &u);
        let k2 = rhs(&k_mid, &axpy(&u, 0.5 * h, &k1));
        let k3 = rhs(&k_mid, &axpy(&u, 0.5 * h, &k2));
        let k4 = rhs(&k_next, &axpy(&u, h, &k3));
        let incr = &(&k1 + &scale_re(&k2, 2.0)) + &(&scale_re(&k3, 2.0) + &k4);
        u = polar(&axpy(&u, h / 6.0, &incr));
        frame = next;
        k_now = k_next;
    }
    let final_ground = PureState::new(frame.ground(), layout.clone())?;
    let delta_s_exact = final_ground.entanglement_entropy(&keep)? - entropy0_exact;
    let first = rows.first().expect("at least one row");
    let last = rows.last().expect("at least one row");
    let delta_s = last.entropy - first.entropy;
    let bound = constant * area as f64;
    Ok(TransportResult {
        steps,
        area,
        constant,
        bound,
        delta_s,
        delta_s_exact,
        final_fidelity: last.fidelity,
        max_unitarity_defect: max_defect,
        rate_violations: violations,
        total_holds: !constants || delta_s.abs() <= bound,
        step_check: None,
        rows,
        unitary: u,
    })
}

/// `|<psi_0(0)| U_back U_forth |psi_0(0)>|`.
pub fn round_trip_fidelity(
    path: &QAPath,
    filter: &FilterFunction,
    region: &Region,
    steps: usize,
) -> Result<f64> {
    let opts = TransportOptions {
        steps,
        step_check: false,
        constants: false,
    };
    let forth = transport(path, filter, region, opts)?;
    let back = transport(&path.reversed()?, filter, region, opts)?;
    let psi0 = Eigh::new(&path.hamiltonian(0.0)).column(0);
    let u = &back.unitary * &forth.unitary;
    Ok(inner(&psi0, &matvec(&u, &psi0)).norm())
}

/// `|<U psi_0 | U_2 U_1 psi_0>|` for the halves `[0, 1/2]` and `[1/2, 1]`.
pub fn concatenation_fidelity(
    path: &QAPath,
    filter: &FilterFunction,
    region: &Region,
    steps: usize,
) -> Result<f64> {
    let opts = TransportOptions {
        steps,
        step_check: false,
        constants: false,
    };
    let whole = transport(path, filter, region, opts)?;
    let half = (steps / 2).max(1);
    let first = transport(
        &path.segment(0.0, 0.5, half)?,
        filter,
        region,
        TransportOptions {
            steps: half,
            ..opts
        },
    )?;
    let second = transport(
        &path.segment(0.5, 1.0, half)?,
        filter,
        region,
        TransportOptions {
            steps: half,
            ..opts
        },
    )?;
    let psi0 = Eigh::new(&path.hamiltonian(0.0)).column(0);
    let a = matvec(&whole.unitary, &psi0);
    let b = matvec(&(&second.unitary * &first.unitary), &psi0);
    Ok(inner(&a, &b).norm())
}
