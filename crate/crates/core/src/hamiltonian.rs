//! Local potentials, their assembly into Hamiltonians, spectra, and the
//! Jordan-Wigner map for lattice fermions.

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::fit::loglog_slope;
use crate::lattice::{distance_unchecked, snake_order, LatticeSpec, Region};
use crate::operator::*;

/// One interaction `Phi(V)`: a Hermitian operator on `sites`, listed in the
/// operator's own factor order, attributed to the site `anchor`.
#[derive(Debug, Clone)]
pub struct Term {
    pub sites: Vec<usize>,
    pub op: CMat,
    pub anchor: usize,
}

impl Term {
    pub fn support(&self) -> Region {
        Region::new(self.sites.iter().copied())
    }
}

#[derive(Debug, Clone)]
pub struct Potential {
    pub n_sites: usize,
    pub local_dim: usize,
    pub terms: Vec<Term>,
    /// Uniform bound on `||Phi(V)||` over the recorded terms.
    pub norm_bound: f64,
}

impl Potential {
    pub fn new(n_sites: usize, local_dim: usize) -> Self {
        Self {
            n_sites,
            local_dim,
            terms: Vec::new(),
            norm_bound: 0.0,
        }
    }

    pub fn layout(&self) -> Vec<usize> {
        vec![self.local_dim; self.n_sites]
    }

    pub fn dim(&self) -> usize {
        self.local_dim.pow(self.n_sites as u32)
    }

    pub fn add_term(&mut self, sites: Vec<usize>, op: CMat, anchor: usize) -> Result<()> {
        if sites.is_empty() {
            return Err(LabError::Usage("term needs at least one site".into()));
        }
        for (i, &s) in sites.iter().enumerate() {
            if s >= self.n_sites || sites[..i].contains(&s) {
                return Err(LabError::Usage(format!("bad term support {sites:?}")));
            }
        }
        if anchor >= self.n_sites {
            return Err(LabError::Usage(format!("anchor {anchor} out of range")));
        }
        let local = self.local_dim.pow(sites.len() as u32);
        if op.nrows() != local || op.ncols() != local {
            return Err(LabError::DimensionMismatch(format!(
                "term on {} sites needs a {local}x{local} operator",
                sites.len()
            )));
        }
        let op = HermitianOperator::new(op, None)?.into_matrix();
        self.norm_bound = self.norm_bound.max(operator_norm(&op));
        self.terms.push(Term { sites, op, anchor });
        Ok(())
    }

    pub fn scaled(&self, k: f64) -> Self {
        Self {
            n_sites: self.n_sites,
            local_dim: self.local_dim,
            terms: self
                .terms
                .iter()
                .map(|t| Term {
                    sites: t.sites.clone(),
                    op: scale_re(&t.op, k),
                    anchor: t.anchor,
                })
                .collect(),
            norm_bound: self.norm_bound * k.abs(),
        }
    }

    /// Term-wise union, i.e. the potential of `H_self + H_other`.
    pub fn plus(&self, other: &Self) -> Result<Self> {
        if self.n_sites != other.n_sites || self.local_dim != other.local_dim {
            return Err(LabError::DimensionMismatch(
                "potentials live on different systems".into(),
            ));
        }
        let mut out = self.clone();
        out.terms.extend(other.terms.iter().cloned());
        out.norm_bound = self.norm_bound.max(other.norm_bound);
        Ok(out)
    }

    /// Largest distance from a term's anchor to its support.
    pub fn range(&self, spec: &LatticeSpec) -> usize {
        self.terms
            .iter()
            .map(|t| term_radius(t, spec))
            .max()
            .unwrap_or(0)
    }
}

fn term_radius(t: &Term, spec: &LatticeSpec) -> usize {
    t.sites
        .iter()
        .map(|&s| distance_unchecked(t.anchor, s, spec))
        .max()
        .unwrap_or(0)
}

/// `acc += k * embed(op)` on the factors at `positions` of `layout`.
pub(crate) fn add_embedded(
    acc: &mut CMat,
    op: &CMat,
    layout: &[usize],
    positions: &[usize],
    k: f64,
) {
    let os = factor_offsets(layout, positions);
    let rest: Vec<usize> = (0..layout.len())
        .filter(|p| !positions.contains(p))
        .collect();
    let or = factor_offsets(layout, &rest);
    for (b, &ob) in os.iter().enumerate() {
        for (a, &oa) in os.iter().enumerate() {
            let v = op[(a, b)] * k;
            if v == ZERO {
                continue;
            }
            for &r in &or {
                acc[(oa + r, ob + r)] += v;
            }
        }
    }
}

/// `H = sum_V Phi(V)` on the full lattice.
pub fn assemble(pot: &Potential) -> Result<HermitianOperator> {
    let layout = pot.layout();
    let dim = checked_dim(pot.local_dim, pot.n_sites)?;
    let mut acc = zeros(dim);
    for t in &pot.terms {
        add_embedded(&mut acc, &t.op, &layout, &t.sites, 1.0);
    }
    HermitianOperator::new(acc, Some(layout))
}

fn checked_dim(local: usize, n: usize) -> Result<usize> {
    let dim = (local as u128).pow(n as u32);
    if dim > dim_cap() as u128 {
        return Err(LabError::Capacity {
            dim: dim.min(usize::MAX as u128) as usize,
            cap: dim_cap(),
        });
    }
    Ok(dim as usize)
}

/// `H_Lambda`: the terms supported inside `region`, on the region's factors
/// in ascending site order.
pub fn assemble_on(pot: &Potential, region: &Region) -> Result<CMat> {
    let sites = region.to_vec();
    let dim = checked_dim(pot.local_dim, sites.len())?;
    let layout = vec![pot.local_dim; sites.len()];
    let mut acc = zeros(dim);
    for t in &pot.terms {
        if t.sites.iter().all(|s| region.contains(*s)) {
            let pos: Vec<usize> = t
                .sites
                .iter()
                .map(|s| sites.binary_search(s).expect("inside region"))
                .collect();
            add_embedded(&mut acc, &t.op, &layout, &pos, 1.0);
        }
    }
    Ok(acc)
}

// ---------------------------------------------------------------------------
// Presets
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PresetParams {
    pub j: f64,
    pub g: f64,
    pub t: f64,
    pub u: f64,
    pub mu: f64,
}

impl Default for PresetParams {
    fn default() -> Self {
        Self {
            j: 1.0,
            g: 2.0,
            t: 1.0,
            u: 4.0,
            mu: 0.0,
        }
    }
}

/// `-J sum Z_v Z_w - g sum X_v` over nearest-neighbour bonds.
pub fn tfim(spec: &LatticeSpec, j: f64, g: f64) -> Result<Potential> {
    let mut pot = Potential::new(spec.n_sites(), 2);
    let zz = scale_re(&kron(&pauli::z(), &pauli::z()), -j);
    let x = scale_re(&pauli::x(), -g);
    for (v, w) in spec.bonds() {
        pot.add_term(vec![v, w], zz.clone(), v)?;
    }
    for v in 0..spec.n_sites() {
        pot.add_term(vec![v], x.clone(), v)?;
    }
    Ok(pot)
}

/// Transverse-field part `-sum X_v` alone; the derivative of a field sweep.
pub fn transverse_field(spec: &LatticeSpec) -> Result<Potential> {
    let mut pot = Potential::new(spec.n_sites(), 2);
    for v in 0..spec.n_sites() {
        pot.add_term(vec![v], scale_re(&pauli::x(), -1.0), v)?;
    }
    Ok(pot)
}

/// `J sum (XX + YY + ZZ)` over nearest-neighbour bonds.
pub fn heisenberg(spec: &LatticeSpec, j: f64) -> Result<Potential> {
    let mut pot = Potential::new(spec.n_sites(), 2);
    let xx = kron(&pauli::x(), &pauli::x());
    let yy = kron(&pauli::y(), &pauli::y());
    let zz = kron(&pauli::z(), &pauli::z());
    let bond = scale_re(&(&(&xx + &yy) + &zz), j);
    for (v, w) in spec.bonds() {
        pot.add_term(vec![v, w], bond.clone(), v)?;
    }
    Ok(pot)
}

pub fn preset_potential(
    name: &str,
    params: &PresetParams,
    spec: &LatticeSpec,
) -> Result<Potential> {
    match name {
        "tfim" => tfim(spec, params.j, params.g),
        "heisenberg" => heisenberg(spec, params.j),
        "hubbard_jw" => jordan_wigner(&hubbard(
            spec,
            params.t,
            params.u,
            params.mu,
            ModeOrdering::RowMajor,
        )),
        other => Err(LabError::Usage(format!(
            "unknown preset `{other}` (expected tfim, heisenberg or hubbard_jw)"
        ))),
    }
}

// ---------------------------------------------------------------------------
// Spectra
// ---------------------------------------------------------------------------

pub const DEGENERACY_TOL: f64 = 1e-8;
pub const DEFAULT_GAP_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralData {
    pub eigenvalues: Vec<f64>,
    pub gap: f64,
    pub degeneracy: usize,
    pub delta_e: f64,
    pub gapped: bool,
}

/// Gap above the lowest `q` levels.
pub fn spectral_gap(h: &HermitianOperator, q: usize, floor: f64) -> Result<SpectralData> {
    if q == 0 {
        return Err(LabError::Parameter(
            "degeneracy q must be at least 1".into(),
        ));
    }
    if q >= h.dim() {
        return Err(LabError::Parameter(format!(
            "q = {q} leaves no level above the ground space of dimension {}",
            h.dim()
        )));
    }
    Ok(spectral_data(h.eigenvalues(), q, floor))
}

fn spectral_data(eigenvalues: Vec<f64>, q: usize, floor: f64) -> SpectralData {
    let gap = eigenvalues[q] - eigenvalues[q - 1];
    let delta_e = eigenvalues[q - 1] - eigenvalues[0];
    SpectralData {
        gap,
        delta_e,
        degeneracy: q,
        gapped: gap > floor,
        eigenvalues,
    }
}

/// Counts levels within [`DEGENERACY_TOL`] of the ground energy.
pub fn spectral_gap_auto(h: &HermitianOperator, floor: f64) -> Result<SpectralData> {
    let ev = h.eigenvalues();
    let q = ev
        .iter()
        .take_while(|&&e| e - ev[0] <= DEGENERACY_TOL)
        .count();
    if q >= ev.len() {
        return Err(LabError::Domain("spectrum is fully degenerate".into()));
    }
    Ok(spectral_data(ev, q, floor))
}

// ---------------------------------------------------------------------------
// Quasi-local structure
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuasiLocal {
    /// `||h_center(r)||` indexed by `r`.
    pub norms: Vec<f64>,
    /// Slope of `log ||h(r)||` against `log r` over `r >= 1`.
    pub decay_exponent: Option<f64>,
}

/// Groups the terms anchored at `center` by radius.
pub fn quasi_local_decompose(
    pot: &Potential,
    center: usize,
    spec: &LatticeSpec,
) -> Result<QuasiLocal> {
    if pot.n_sites != spec.n_sites() {
        return Err(LabError::Usage(
            "potential and lattice disagree on site count".into(),
        ));
    }
    if center >= pot.n_sites {
        return Err(LabError::Usage(format!("center {center} out of range")));
    }
    let mine: Vec<&Term> = pot.terms.iter().filter(|t| t.anchor == center).collect();
    let r_max = mine.iter().map(|t| term_radius(t, spec)).max().unwrap_or(0);
    let mut norms = vec![0.0; r_max + 1];
    for (r, slot) in norms.iter_mut().enumerate() {
        let group: Vec<&Term> = mine
            .iter()
            .copied()
            .filter(|t| term_radius(t, spec) == r)
            .collect();
        if group.is_empty() {
            continue;
        }
        let region = group
            .iter()
            .fold(Region::default(), |acc, t| acc.union(&t.support()));
        let mut sub = Potential::new(pot.n_sites, pot.local_dim);
        sub.terms = group.into_iter().cloned().collect();
        *slot = operator_norm(&assemble_on(&sub, &region)?);
    }
    let xs: Vec<f64> = (1..norms.len()).map(|r| r as f64).collect();
    let decay_exponent = loglog_slope(&xs, &norms[1..]);
    Ok(QuasiLocal {
        norms,
        decay_exponent,
    })
}

// ---------------------------------------------------------------------------
// Fermions
// ---------------------------------------------------------------------------

/// Quadratic-plus-density fermion Hamiltonian on ordered modes:
/// `sum t c+_a c_b + h.c. + sum U n_a n_b + sum e n_a`.
#[derive(Debug, Clone, Default)]
pub struct FermionicSpec {
    pub n_modes: usize,
    pub hopping: Vec<(usize, usize, c64)>,
    pub density: Vec<(usize, usize, f64)>,
    pub onsite: Vec<(usize, f64)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ModeOrdering {
    RowMajor,
    Snake,
}

/// Fermi-Hubbard model; mode of `(site, spin)` is `2 * position + spin`.
pub fn hubbard(
    spec: &LatticeSpec,
    t: f64,
    u: f64,
    mu: f64,
    ordering: ModeOrdering,
) -> FermionicSpec {
    let order = match ordering {
        ModeOrdering::RowMajor => (0..spec.n_sites()).collect(),
        ModeOrdering::Snake => snake_order(spec),
    };
    let mut pos = vec![0; spec.n_sites()];
    for (p, &v) in order.iter().enumerate() {
        pos[v] = p;
    }
    let mode = |v: usize, s: usize| 2 * pos[v] + s;
    let mut f = FermionicSpec {
        n_modes: 2 * spec.n_sites(),
        ..Default::default()
    };
    for (v, w) in spec.bonds() {
        for s in 0..2 {
            f.hopping.push((mode(v, s), mode(w, s), re(-t)));
        }
    }
    for v in 0..spec.n_sites() {
        f.density.push((mode(v, 0), mode(v, 1), u));
        for s in 0..2 {
            f.onsite.push((mode(v, s), -mu));
        }
    }
    f
}

fn sigma_plus() -> CMat {
    from_rows(&[&[ZERO, ZERO], &[ONE, ZERO]])
}

fn sigma_minus() -> CMat {
    from_rows(&[&[ZERO, ONE], &[ZERO, ZERO]])
}

fn number() -> CMat {
    from_real_diag(&[0.0, 1.0])
}

fn kron_all(ops: &[CMat]) -> CMat {
    ops.iter()
        .skip(1)
        .fold(ops[0].clone(), |acc, o| kron(&acc, o))
}

/// `c+_lo Z...Z c_hi` with the string on the modes strictly between.
fn hop_string(lo: usize, hi: usize) -> CMat {
    let mut ops = vec![sigma_plus()];
    ops.extend((lo + 1..hi).map(|_| pauli::z()));
    ops.push(sigma_minus());
    kron_all(&ops)
}

/// Spin form of a fermionic Hamiltonian with explicit `Z` strings.
pub fn jordan_wigner(f: &FermionicSpec) -> Result<Potential> {
    let mut pot = Potential::new(f.n_modes, 2);
    for &(a, e) in &f.onsite {
        pot.add_term(vec![a], scale_re(&number(), e), a)?;
    }
    for &(a, b, u) in &f.density {
        if a == b {
            pot.add_term(vec![a], scale_re(&number(), u), a)?;
        } else {
            pot.add_term(
                vec![a, b],
                scale_re(&kron(&number(), &number()), u),
                a.min(b),
            )?;
        }
    }
    for &(a, b, t) in &f.hopping {
        if a == b {
            pot.add_term(vec![a], scale_re(&number(), 2.0 * t.re), a)?;
            continue;
        }
        let (lo, hi) = (a.min(b), a.max(b));
        let coef = if a < b { t } else { t.conj() };
        let x = scale(&hop_string(lo, hi), coef);
        let op = &x + x.adjoint();
        pot.add_term((lo..=hi).collect(), op, lo)?;
    }
    Ok(pot)
}

/// Annihilator `c_j = Z_0 ... Z_{j-1} sigma^-_j` on `n` modes.
pub fn jw_annihilation(j: usize, n: usize) -> CMat {
    let ops: Vec<CMat> = (0..n)
        .map(|k| match k.cmp(&j) {
            std::cmp::Ordering::Less => pauli::z(),
            std::cmp::Ordering::Equal => sigma_minus(),
            std::cmp::Ordering::Greater => identity(2),
        })
        .collect();
    kron_all(&ops)
}

/// Largest deviation from `{c_i, c+_j} = delta_ij` and `{c_i, c_j} = 0`.
pub fn anticommutation_defect(n: usize) -> f64 {
    let cs: Vec<CMat> = (0..n).map(|j| jw_annihilation(j, n)).collect();
    let id = identity(1 << n);
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            let cd = adjoint(&cs[j]);
            let mixed = &(&cs[i] * &cd) + &(&cd * &cs[i]);
            let target = if i == j { id.clone() } else { zeros(1 << n) };
            worst = worst.max(max_abs_diff(&mixed, &target));
            let same = &(&cs[i] * &cs[j]) + &(&cs[j] * &cs[i]);
            worst = worst.max(max_abs_diff(&same, &zeros(1 << n)));
        }
    }
    worst
}

/// `sum_a n_a` on `n` modes.
pub fn number_operator(n: usize) -> CMat {
    let d = 1usize << n;
    from_real_diag(&(0..d).map(|b| b.count_ones() as f64).collect::<Vec<_>>())
}

/// Direct second-quantized construction from the annihilators, used to
/// cross-check the term-wise spin form.
pub fn fermionic_matrix(f: &FermionicSpec) -> CMat {
    let n = f.n_modes;
    let cs: Vec<CMat> = (0..n).map(|j| jw_annihilation(j, n)).collect();
    let ns: Vec<CMat> = cs.iter().map(|c| c.adjoint() * c).collect();
    let mut h = zeros(1 << n);
    for &(a, e) in &f.onsite {
        h += scale_re(&ns[a], e);
    }
    for &(a, b, u) in &f.density {
        h += scale_re(&(&ns[a] * &ns[b]), u);
    }
    for &(a, b, t) in &f.hopping {
        let x = scale(&(cs[a].adjoint() * &cs[b]), t);
        h += &x + x.adjoint();
    }
    h
}

// ---------------------------------------------------------------------------
// Symmetries
// ---------------------------------------------------------------------------

/// Permutation of basis states induced by moving site `v` to `perm[v]`.
pub fn site_permutation_operator(perm: &[usize], local_dim: usize) -> CMat {
    let n = perm.len();
    let dim = local_dim.pow(n as u32);
    let st = strides(&vec![local_dim; n]);
    let mut out = zeros(dim);
    for b in 0..dim {
        let mut target = 0;
        for v in 0..n {
            let digit = (b / st[v]) % local_dim;
            target += digit * st[perm[v]];
        }
        out[(target, b)] = ONE;
    }
    out
}

/// Unit translation along `axis`.
pub fn shift_operator(spec: &LatticeSpec, axis: usize, local_dim: usize) -> CMat {
    site_permutation_operator(&spec.translation(axis), local_dim)
}

/// `max_e ||T_e H T_e^dagger - H||_max`.
pub fn translation_defect(h: &CMat, spec: &LatticeSpec, local_dim: usize) -> f64 {
    (0..spec.nu)
        .map(|axis| {
            let t = shift_operator(spec, axis, local_dim);
            let th = &t * h;
            max_abs_diff(&(&th * t.adjoint()), h)
        })
        .fold(0.0, f64::max)
}
