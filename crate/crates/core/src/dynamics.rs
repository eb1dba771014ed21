//! Exact Heisenberg evolution, Lieb-Robinson checks and the real-time
//! entanglement rate of a local Hamiltonian across a cut.

use std::sync::Arc;

use faer::Mat;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::hamiltonian::{assemble, assemble_on, Potential, Term};
use crate::lattice::{
    ball_cap, boundary_and_area, distance_unchecked, reproducing_constant, LatticeSpec, Region,
};
use crate::operator::*;
use crate::rates::propagator;

/// Constant in the single-term entangling bound `|Gamma| <= c ||h|| log d`.
pub const SIE_CONSTANT: f64 = 4.0;

/// Eigendecomposition of `H`, shared read-only by every evolution query.
#[derive(Debug, Clone)]
pub struct Evolution {
    eig: Eigh,
}

impl Evolution {
    pub fn new(h: &HermitianOperator) -> Self {
        Self { eig: h.eigh() }
    }

    pub fn dim(&self) -> usize {
        self.eig.dim()
    }

    pub fn eigh(&self) -> &Eigh {
        &self.eig
    }

    /// `V^dagger A V`, the input of [`Evolution::heisenberg_prepared`].
    pub fn prepare(&self, a: &CMat) -> CMat {
        self.eig.to_eigenbasis(a)
    }

    /// `e^{-iHt} A e^{iHt}` for `A` already in the eigenbasis.
    pub fn heisenberg_prepared(&self, a_eig: &CMat, t: f64) -> CMat {
        let e = &self.eig.values;
        let n = e.len();
        let rot = Mat::from_fn(n, n, |i, j| {
            let ph = -(e[i] - e[j]) * t;
            a_eig[(i, j)] * cx(ph.cos(), ph.sin())
        });
        self.eig.from_eigenbasis(&rot)
    }

    pub fn heisenberg(&self, a: &CMat, t: f64) -> CMat {
        self.heisenberg_prepared(&self.prepare(a), t)
    }

    /// `e^{-iHt} psi`.
    pub fn schrodinger(&self, amps: &[c64], t: f64) -> Vec<c64> {
        matvec(&propagator(&self.eig, t), amps)
    }
}

/// `tau_t(A) = e^{-iHt} A e^{iHt}`, exact through the spectrum of `H`.
pub fn heisenberg_evolve(h: &HermitianOperator, t: f64, a: &CMat) -> Result<CMat> {
    if a.nrows() != h.dim() || a.ncols() != h.dim() {
        return Err(LabError::DimensionMismatch(format!(
            "operator is {}x{}, Hamiltonian has dimension {}",
            a.nrows(),
            a.ncols(),
            h.dim()
        )));
    }
    Ok(Evolution::new(h).heisenberg(a, t))
}

// ---------------------------------------------------------------------------
// Lieb-Robinson
// ---------------------------------------------------------------------------

/// Operator acting on the listed lattice sites, factors in list order.
#[derive(Debug, Clone)]
pub struct LocalOp {
    pub sites: Vec<usize>,
    pub op: CMat,
}

impl LocalOp {
    pub fn new(sites: Vec<usize>, op: CMat) -> Self {
        Self { sites, op }
    }

    pub fn norm(&self) -> f64 {
        operator_norm(&self.op)
    }
}

/// `s = max_v sum_{V containing v} ||Phi(V)|| |V| exp(mu diam V)`.
pub fn strict_lr_velocity(pot: &Potential, spec: &LatticeSpec, mu: f64) -> f64 {
    let mut per_site = vec![0.0; pot.n_sites];
    for t in &pot.terms {
        let w = operator_norm(&t.op) * t.sites.len() as f64 * (mu * diameter(t, spec) as f64).exp();
        for &v in &t.sites {
            per_site[v] += w;
        }
    }
    per_site.into_iter().fold(0.0, f64::max)
}

fn diameter(t: &Term, spec: &LatticeSpec) -> usize {
    let mut d = 0;
    for &a in &t.sites {
        for &b in &t.sites {
            d = d.max(distance_unchecked(a, b, spec));
        }
    }
    d
}

/// `2 ||A|| ||B|| |X| exp(2 s |t| - mu d)`.
pub fn lr_bound(norm_a: f64, norm_b: f64, x_size: usize, s: f64, mu: f64, t: f64, d: usize) -> f64 {
    2.0 * norm_a * norm_b * x_size as f64 * (2.0 * s * t.abs() - mu * d as f64).exp()
}

/// Decay function `K(r) = kappa e^{-mu r} (1+r)^{-a}` of the reproducing form,
/// with `kappa` scaled so that `sum_{V containing v,w} ||Phi(V)|| <= K(d(v,w))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReproducingForm {
    pub mu: f64,
    pub exponent: f64,
    pub kappa: f64,
    pub lambda: f64,
}

impl ReproducingForm {
    pub fn from_potential(
        pot: &Potential,
        spec: &LatticeSpec,
        mu: f64,
        exponent: f64,
    ) -> Result<Self> {
        let k0 = |r: usize| (-mu * r as f64).exp() / (1.0 + r as f64).powf(exponent);
        let n = pot.n_sites;
        let mut pair = vec![0.0; n * n];
        for t in &pot.terms {
            let w = operator_norm(&t.op);
            for &a in &t.sites {
                for &b in &t.sites {
                    pair[a * n + b] += w;
                }
            }
        }
        let mut kappa: f64 = 0.0;
        for a in 0..n {
            for b in 0..n {
                kappa = kappa.max(pair[a * n + b] / k0(distance_unchecked(a, b, spec)));
            }
        }
        let lambda0 = reproducing_constant(&k0, spec)?;
        Ok(Self {
            mu,
            exponent,
            kappa,
            lambda: kappa * lambda0,
        })
    }

    pub fn k(&self, r: usize) -> f64 {
        self.kappa * (-self.mu * r as f64).exp() / (1.0 + r as f64).powf(self.exponent)
    }

    /// `2 ||A|| ||B|| |X| |Y| K(d) exp(2 lambda |t|) / lambda`.
    pub fn bound(
        &self,
        norm_a: f64,
        norm_b: f64,
        x_size: usize,
        y_size: usize,
        t: f64,
        d: usize,
    ) -> f64 {
        2.0 * norm_a
            * norm_b
            * (x_size * y_size) as f64
            * self.k(d)
            * (2.0 * self.lambda * t.abs()).exp()
            / self.lambda
    }
}

#[derive(Debug, Clone)]
pub struct LRSetting {
    pub evolution: Arc<Evolution>,
    pub layout: Vec<usize>,
    pub a: LocalOp,
    pub b: LocalOp,
    pub norm_a: f64,
    pub norm_b: f64,
    pub distance: usize,
    pub s: f64,
    pub mu: f64,
    pub reproducing: Option<ReproducingForm>,
}

impl LRSetting {
    pub fn new(
        evolution: Arc<Evolution>,
        pot: &Potential,
        spec: &LatticeSpec,
        a: LocalOp,
        b: LocalOp,
        mu: f64,
    ) -> Result<Self> {
        if !(mu > 0.0) {
            return Err(LabError::Parameter(format!("mu = {mu} must be positive")));
        }
        if evolution.dim() != pot.dim() {
            return Err(LabError::DimensionMismatch(
                "evolution and potential disagree".into(),
            ));
        }
        for op in [&a, &b] {
            Region::new(op.sites.iter().copied()).validate(spec)?;
            let local = pot.local_dim.pow(op.sites.len() as u32);
            if op.op.nrows() != local || op.op.ncols() != local {
                return Err(LabError::DimensionMismatch("local operator size".into()));
            }
        }
        if a.sites.iter().any(|x| b.sites.contains(x)) {
            return Err(LabError::Domain("supports of A and B overlap".into()));
        }
        let distance = a
            .sites
            .iter()
            .flat_map(|&x| b.sites.iter().map(move |&y| (x, y)))
            .map(|(x, y)| distance_unchecked(x, y, spec))
            .min()
            .unwrap_or(0);
        Ok(Self {
            evolution,
            layout: pot.layout(),
            norm_a: a.norm(),
            norm_b: b.norm(),
            a,
            b,
            distance,
            s: strict_lr_velocity(pot, spec, mu),
            mu,
            reproducing: None,
        })
    }

    pub fn with_reproducing(mut self, form: ReproducingForm) -> Self {
        self.reproducing = Some(form);
        self
    }

    pub fn bound(&self, t: f64) -> f64 {
        lr_bound(
            self.norm_a,
            self.norm_b,
            self.a.sites.len(),
            self.s,
            self.mu,
            t,
            self.distance,
        )
    }

    /// The bound is vacuous once it reaches the trivial `2 ||A|| ||B||`.
    pub fn trivial_cap(&self) -> f64 {
        2.0 * self.norm_a * self.norm_b
    }

    /// `||[tau_t(A), B]||` given `tau_t(A)`.
    pub fn commutator_norm(&self, at: &CMat) -> f64 {
        let ab = right_mul_local(at, &self.b.op, &self.layout, &self.b.sites);
        let ba = left_mul_local(&self.b.op, &self.layout, &self.b.sites, at);
        operator_norm(&(ab - ba))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LrRow {
    pub t: f64,
    pub exact_norm: Option<f64>,
    pub bound: f64,
    pub vacuous: bool,
    pub reproducing_bound: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LrReport {
    pub x: Vec<usize>,
    pub y: Vec<usize>,
    pub distance: usize,
    pub s: f64,
    pub mu: f64,
    pub reproducing: Option<ReproducingForm>,
    pub rows: Vec<LrRow>,
    /// Largest `exact / bound` over non-vacuous points.
    pub max_ratio: f64,
    pub violations: Vec<f64>,
    pub vacuous_points: usize,
}

/// Evenly spaced grid on `[t0, t1]`.
pub fn time_grid(t0: f64, t1: f64, points: usize) -> Vec<f64> {
    match points {
        0 => vec![],
        1 => vec![t0],
        _ => (0..points)
            .map(|k| t0 + (t1 - t0) * k as f64 / (points - 1) as f64)
            .collect(),
    }
}

/// Exact commutator norms against both bounds. With `evaluate_vacuous` off,
/// points whose bounds are all vacuous are not diagonalized.
pub fn lr_check(setting: &LRSetting, t_grid: &[f64], evaluate_vacuous: bool) -> Result<LrReport> {
    let mut out = lr_check_many(std::slice::from_ref(setting), t_grid, evaluate_vacuous)?;
    Ok(out.remove(0))
}

/// [`lr_check`] for settings sharing one evolution and one `A_X`, so each
/// `tau_t(A_X)` is formed once.
pub fn lr_check_many(
    settings: &[LRSetting],
    t_grid: &[f64],
    evaluate_vacuous: bool,
) -> Result<Vec<LrReport>> {
    let Some(first) = settings.first() else {
        return Ok(vec![]);
    };
    if settings.iter().any(|s| {
        !Arc::ptr_eq(&s.evolution, &first.evolution)
            || s.a.sites != first.a.sites
            || s.a.op != first.a.op
    }) {
        return Err(LabError::Usage(
            "settings must share the evolution and A".into(),
        ));
    }
    let a_full = embed(&first.a.op, &first.layout, &first.a.sites)?;
    let a_eig = first.evolution.prepare(&a_full);
    let skeleton: Vec<Vec<LrRow>> = settings
        .iter()
        .map(|set| t_grid.iter().map(|&t| set.row_skeleton(t)).collect())
        .collect();
    let needed: Vec<bool> = (0..t_grid.len())
        .map(|k| {
            settings
                .iter()
                .zip(&skeleton)
                .any(|(set, rows)| evaluate_vacuous || set.is_live(&rows[k]))
        })
        .collect();
    let norms: Vec<Vec<Option<f64>>> = t_grid
        .par_iter()
        .enumerate()
        .map(|(k, &t)| {
            if !needed[k] {
                return vec![None; settings.len()];
            }
            let at = first.evolution.heisenberg_prepared(&a_eig, t);
            settings
                .iter()
                .zip(&skeleton)
                .map(|(set, rows)| {
                    (evaluate_vacuous || set.is_live(&rows[k])).then(|| set.commutator_norm(&at))
                })
                .collect()
        })
        .collect();
    Ok(settings
        .iter()
        .zip(skeleton)
        .enumerate()
        .map(|(i, (set, mut rows))| {
            for (k, row) in rows.iter_mut().enumerate() {
                row.exact_norm = norms[k][i];
            }
            set.summarize(rows)
        })
        .collect())
}

impl LRSetting {
    fn row_skeleton(&self, t: f64) -> LrRow {
        let bound = self.bound(t);
        let reproducing_bound = self.reproducing.map(|f| {
            f.bound(
                self.norm_a,
                self.norm_b,
                self.a.sites.len(),
                self.b.sites.len(),
                t,
                self.distance,
            )
        });
        LrRow {
            t,
            exact_norm: None,
            bound,
            vacuous: bound >= self.trivial_cap(),
            reproducing_bound,
        }
    }

    fn live_bounds(&self, row: &LrRow) -> Vec<f64> {
        let cap = self.trivial_cap();
        let mut live = vec![];
        if !row.vacuous {
            live.push(row.bound);
        }
        if let Some(b) = row.reproducing_bound.filter(|&b| b < cap) {
            live.push(b);
        }
        live
    }

    fn is_live(&self, row: &LrRow) -> bool {
        !self.live_bounds(row).is_empty()
    }

    fn summarize(&self, rows: Vec<LrRow>) -> LrReport {
        let mut max_ratio: f64 = 0.0;
        let mut violations = vec![];
        for row in &rows {
            let Some(x) = row.exact_norm else { continue };
            for b in self.live_bounds(row) {
                max_ratio = max_ratio.max(x / b);
                if x > b * (1.0 + 1e-12) + 1e-12 && violations.last() != Some(&row.t) {
                    violations.push(row.t);
                }
            }
        }
        LrReport {
            x: self.a.sites.clone(),
            y: self.b.sites.clone(),
            distance: self.distance,
            s: self.s,
            mu: self.mu,
            reproducing: self.reproducing,
            vacuous_points: rows.iter().filter(|r| r.vacuous).count(),
            rows,
            max_ratio,
            violations,
        }
    }
}

/// Basis map `b -> target` of the unitary moving site `v` to `perm[v]`.
fn basis_permutation(perm: &[usize], local_dim: usize) -> Vec<usize> {
    let n = perm.len();
    let layout = vec![local_dim; n];
    let st = strides(&layout);
    (0..local_dim.pow(n as u32))
        .map(|b| {
            (0..n)
                .map(|v| ((b / st[v]) % local_dim) * st[perm[v]])
                .sum()
        })
        .collect()
}

/// `P M P^dagger` for a basis permutation `P`.
fn permute_operator(m: &CMat, map: &[usize]) -> CMat {
    let n = m.nrows();
    let mut out = zeros(n);
    for j in 0..n {
        for i in 0..n {
            out[(map[i], map[j])] = m[(i, j)];
        }
    }
    out
}

/// Site permutation of a periodic lattice taking site 0 to `x`.
fn translation_to(spec: &LatticeSpec, x: usize) -> Vec<usize> {
    let c = spec.coords(x);
    let mut perm: Vec<usize> = (0..spec.n_sites()).collect();
    for (axis, &k) in c.iter().enumerate() {
        let unit = spec.translation(axis);
        for _ in 0..k {
            perm = perm.iter().map(|&v| unit[v]).collect();
        }
    }
    perm
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairScan {
    pub pairs: usize,
    pub evaluated_points: usize,
    pub max_ratio: f64,
    pub violations: Vec<(usize, usize, f64)>,
    /// Evolved operators were obtained from site 0 by lattice translations.
    pub used_translations: bool,
    pub reports: Vec<LrReport>,
}

/// Lieb-Robinson check over every ordered pair of single sites at distance
/// at least `min_distance`, with `A = a_op` on `x` and `B = b_op` on `y`.
/// On translation-invariant periodic systems `tau_t(A_x)` is the translate
/// of `tau_t(A_0)`, which is exact and avoids re-evolving per site.
#[allow(clippy::too_many_arguments)]
pub fn lr_all_pairs(
    evolution: Arc<Evolution>,
    pot: &Potential,
    spec: &LatticeSpec,
    a_op: &CMat,
    b_op: &CMat,
    min_distance: usize,
    mu: f64,
    t_grid: &[f64],
) -> Result<PairScan> {
    let n = spec.n_sites();
    let layout = pot.layout();
    let h = assemble(pot)?;
    let invariant = spec.periodic
        && crate::hamiltonian::translation_defect(h.matrix(), spec, pot.local_dim) <= 1e-12;
    let base = LocalOp::new(vec![0], a_op.clone());
    let mut reports = vec![];
    let mut evolved_0: Vec<Option<CMat>> = vec![None; t_grid.len()];
    if invariant {
        let probe: Vec<LRSetting> = (1..n)
            .map(|y| {
                LRSetting::new(
                    evolution.clone(),
                    pot,
                    spec,
                    base.clone(),
                    LocalOp::new(vec![y], b_op.clone()),
                    mu,
                )
            })
            .collect::<Result<_>>()?;
        let a_eig = evolution.prepare(&embed(a_op, &layout, &[0])?);
        evolved_0 = t_grid
            .par_iter()
            .map(|&t| {
                let live = probe
                    .iter()
                    .any(|p| p.distance >= min_distance && p.is_live(&p.row_skeleton(t)));
                live.then(|| evolution.heisenberg_prepared(&a_eig, t))
            })
            .collect();
    }
    for x in 0..n {
        let settings: Vec<LRSetting> = (0..n)
            .filter(|&y| y != x && distance_unchecked(x, y, spec) >= min_distance)
            .map(|y| {
                LRSetting::new(
                    evolution.clone(),
                    pot,
                    spec,
                    LocalOp::new(vec![x], a_op.clone()),
                    LocalOp::new(vec![y], b_op.clone()),
                    mu,
                )
            })
            .collect::<Result<_>>()?;
        if settings.is_empty() {
            continue;
        }
        if !invariant {
            reports.extend(lr_check_many(&settings, t_grid, false)?);
            continue;
        }
        let map = basis_permutation(&translation_to(spec, x), pot.local_dim);
        for set in settings {
            let mut rows: Vec<LrRow> = t_grid.iter().map(|&t| set.row_skeleton(t)).collect();
            for (k, row) in rows.iter_mut().enumerate() {
                if set.is_live(row) {
                    let a0 = evolved_0[k].as_ref().expect("live points were evolved");
                    row.exact_norm = Some(set.commutator_norm(&permute_operator(a0, &map)));
                }
            }
            reports.push(set.summarize(rows));
        }
    }
    let mut violations = vec![];
    let mut max_ratio: f64 = 0.0;
    let mut evaluated = 0;
    for r in &reports {
        max_ratio = max_ratio.max(r.max_ratio);
        evaluated += r.rows.iter().filter(|row| row.exact_norm.is_some()).count();
        violations.extend(r.violations.iter().map(|&t| (r.x[0], r.y[0], t)));
    }
    Ok(PairScan {
        pairs: reports.len(),
        evaluated_points: evaluated,
        max_ratio,
        violations,
        used_translations: invariant,
        reports,
    })
}

// ---------------------------------------------------------------------------
// Real-time entanglement rate
// ---------------------------------------------------------------------------

/// `C = 2 c_SIE log d sum_r (2r+1)^{2 nu} ||h(r)||`: `M(r) <= 2A(2r+1)^nu`
/// sites can host a crossing term of radius `r`, and each such term entangles
/// at most `c_SIE ||h(r)|| (2r+1)^nu log d`.
pub fn area_rate_constant(norms: &[f64], nu: usize, local_dim: usize) -> f64 {
    let sum: f64 = norms
        .iter()
        .enumerate()
        .map(|(r, n)| ball_cap(r, nu).powi(2) * n)
        .sum();
    2.0 * SIE_CONSTANT * (local_dim as f64).ln() * sum
}

/// `||h(r)||`: the largest norm, over anchors, of the terms anchored there
/// with radius `r`.
pub fn radial_norms(pot: &Potential, spec: &LatticeSpec) -> Result<Vec<f64>> {
    if pot.n_sites != spec.n_sites() {
        return Err(LabError::Usage(
            "potential and lattice disagree on site count".into(),
        ));
    }
    let radius = |t: &Term| {
        t.sites
            .iter()
            .map(|&s| distance_unchecked(t.anchor, s, spec))
            .max()
            .unwrap_or(0)
    };
    let r_max = pot.terms.iter().map(radius).max().unwrap_or(0);
    let mut norms = vec![0.0; r_max + 1];
    for v in 0..pot.n_sites {
        for (r, slot) in norms.iter_mut().enumerate() {
            let mut sub = Potential::new(pot.n_sites, pot.local_dim);
            sub.terms = pot
                .terms
                .iter()
                .filter(|t| t.anchor == v && radius(t) == r)
                .cloned()
                .collect();
            if sub.terms.is_empty() {
                continue;
            }
            let region = sub
                .terms
                .iter()
                .fold(Region::default(), |acc, t| acc.union(&t.support()));
            *slot = f64::max(*slot, operator_norm(&assemble_on(&sub, &region)?));
        }
    }
    Ok(norms)
}

/// `(log rho_B1 (x) 1) psi` for the cut `region`.
pub fn cut_log_apply(psi: &PureState, region: &Region) -> Result<Vec<c64>> {
    let sites = region.to_vec();
    let m = state_matrix(psi.amplitudes(), psi.layout(), &sites)?;
    let l = log_support(&(&m * m.adjoint()), SUPPORT_FLOOR);
    Ok(state_from_matrix(&(&l * &m), psi.layout(), &sites))
}

/// Whether the smaller side of the cut has a full-rank reduced state.
pub fn cut_is_full_rank(psi: &PureState, region: &Region) -> Result<bool> {
    let sites = region.to_vec();
    let m = state_matrix(psi.amplitudes(), psi.layout(), &sites)?;
    let rho = if m.nrows() <= m.ncols() {
        &m * m.adjoint()
    } else {
        m.adjoint() * &m
    };
    Ok(eigvalsh(&rho).first().is_some_and(|&x| x > SUPPORT_FLOOR))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TermContribution {
    pub index: usize,
    pub sites: Vec<usize>,
    pub crossing: bool,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RealtimeRate {
    pub rate: f64,
    pub bound: f64,
    pub constant: f64,
    pub area: usize,
    pub radial_norms: Vec<f64>,
    pub contributions: Vec<TermContribution>,
    /// Largest `|contribution|` among terms inside one side.
    pub max_interior: f64,
    /// Set when the cut was rank deficient and the rate came from
    /// finite differences.
    pub finite_difference: bool,
}

/// `dS_B1/dt = i sum_terms Tr(h [|psi><psi|, log rho_B1 (x) 1])` under
/// `e^{-iHt}`, with its area-law bound.
pub fn realtime_entropy_rate(
    pot: &Potential,
    spec: &LatticeSpec,
    psi: &PureState,
    region: &Region,
) -> Result<RealtimeRate> {
    if pot.terms.is_empty() && pot.n_sites == 0 {
        return Err(LabError::Usage("empty decomposition".into()));
    }
    if psi.layout() != pot.layout().as_slice() {
        return Err(LabError::DimensionMismatch(
            "state layout differs from the potential".into(),
        ));
    }
    let area = boundary_and_area(region, spec)?.area;
    let norms = radial_norms(pot, spec)?;
    let constant = area_rate_constant(&norms, spec.nu, pot.local_dim);
    let layout = pot.layout();
    let full_rank = cut_is_full_rank(psi, region)?;
    let l_psi = cut_log_apply(psi, region)?;
    let mut contributions = Vec::with_capacity(pot.terms.len());
    let mut max_interior: f64 = 0.0;
    let mut rate = 0.0;
    for (index, t) in pot.terms.iter().enumerate() {
        let inside = t.sites.iter().filter(|s| region.contains(**s)).count();
        let crossing = inside > 0 && inside < t.sites.len();
        let h_psi = apply_local(&t.op, &layout, &t.sites, psi.amplitudes());
        let value = 2.0 * inner(&h_psi, &l_psi).im;
        if !crossing {
            max_interior = max_interior.max(value.abs());
        }
        rate += value;
        contributions.push(TermContribution {
            index,
            sites: t.sites.clone(),
            crossing,
            value,
        });
    }
    if !full_rank {
        log::warn!("reduced state is rank deficient; using the finite-difference rate");
        rate = realtime_rate_finite_difference(pot, psi, region, 1e-4)?;
    }
    Ok(RealtimeRate {
        rate,
        bound: constant * area as f64,
        constant,
        area,
        radial_norms: norms,
        contributions,
        max_interior,
        finite_difference: !full_rank,
    })
}

/// Central difference of `S_B1(e^{-iHt} psi)` at `t = 0`.
pub fn realtime_rate_finite_difference(
    pot: &Potential,
    psi: &PureState,
    region: &Region,
    dt: f64,
) -> Result<f64> {
    if !(dt > 0.0) {
        return Err(LabError::Parameter(format!("step {dt} must be positive")));
    }
    let evo = Evolution::new(&assemble(pot)?);
    let sites = region.to_vec();
    let s = |t: f64| -> Result<f64> {
        let amps = evo.schrodinger(psi.amplitudes(), t);
        PureState::normalized(amps, psi.layout().to_vec())?.entanglement_entropy(&sites)
    };
    Ok((s(dt)? - s(-dt)?) / (2.0 * dt))
}
