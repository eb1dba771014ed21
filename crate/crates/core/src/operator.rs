//! Dense complex operators on tensor-product spaces.
//!
//! Factor layouts are lists of local dimensions. The first factor is the
//! most significant digit of the flat basis index, so the layout of
//! `kron(a, b)` is the layout of `a` followed by the layout of `b`.

use std::sync::atomic::{AtomicUsize, Ordering};

use faer::{Mat, Side};
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};

pub use faer::complex_native::c64;

pub type CMat = Mat<c64>;

/// Eigenvalues below this are outside the support of a positive operator.
pub const SUPPORT_FLOOR: f64 = 1e-12;

pub const DEFAULT_DIM_CAP: usize = 1 << 14;

static DIM_CAP: AtomicUsize = AtomicUsize::new(DEFAULT_DIM_CAP);

pub fn dim_cap() -> usize {
    DIM_CAP.load(Ordering::Relaxed)
}

pub fn set_dim_cap(cap: usize) {
    DIM_CAP.store(cap.max(1), Ordering::Relaxed);
}

fn check_cap(dim: usize) -> Result<()> {
    let cap = dim_cap();
    if dim > cap {
        return Err(LabError::Capacity { dim, cap });
    }
    Ok(())
}

pub const ZERO: c64 = c64 { re: 0.0, im: 0.0 };
pub const ONE: c64 = c64 { re: 1.0, im: 0.0 };
pub const I: c64 = c64 { re: 0.0, im: 1.0 };

#[inline]
pub fn cx(re: f64, im: f64) -> c64 {
    c64::new(re, im)
}

#[inline]
pub fn re(x: f64) -> c64 {
    c64::new(x, 0.0)
}

// ---------------------------------------------------------------------------
// Plain matrix helpers
// ---------------------------------------------------------------------------

pub fn zeros(n: usize) -> CMat {
    Mat::zeros(n, n)
}

pub fn identity(n: usize) -> CMat {
    Mat::from_fn(n, n, |i, j| if i == j { ONE } else { ZERO })
}

pub fn from_real_diag(d: &[f64]) -> CMat {
    let n = d.len();
    Mat::from_fn(n, n, |i, j| if i == j { re(d[i]) } else { ZERO })
}

pub fn from_rows(rows: &[&[c64]]) -> CMat {
    let n = rows.len();
    let m = rows.first().map_or(0, |r| r.len());
    Mat::from_fn(n, m, |i, j| rows[i][j])
}

pub fn adjoint(m: &CMat) -> CMat {
    m.adjoint().to_owned()
}

pub fn scale(m: &CMat, k: c64) -> CMat {
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)] * k)
}

pub fn scale_re(m: &CMat, k: f64) -> CMat {
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)] * k)
}

pub fn commutator(a: &CMat, b: &CMat) -> CMat {
    a * b - b * a
}

pub fn trace(m: &CMat) -> c64 {
    let mut t = ZERO;
    for i in 0..m.nrows().min(m.ncols()) {
        t += m[(i, i)];
    }
    t
}

/// `Tr(a b)` without forming the product.
pub fn trace_product(a: &CMat, b: &CMat) -> c64 {
    let mut t = ZERO;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            t += a[(i, j)] * b[(j, i)];
        }
    }
    t
}

pub fn frobenius_norm(m: &CMat) -> f64 {
    let mut s = 0.0;
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            s += m[(i, j)].norm_sqr();
        }
    }
    s.sqrt()
}

pub fn max_abs_diff(a: &CMat, b: &CMat) -> f64 {
    let mut d: f64 = 0.0;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            d = d.max((a[(i, j)] - b[(i, j)]).norm());
        }
    }
    d
}

/// Relative Frobenius distance between `m` and its adjoint.
pub fn hermitian_defect(m: &CMat) -> f64 {
    let norm = frobenius_norm(m);
    if norm == 0.0 {
        return 0.0;
    }
    let mut s = 0.0;
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            s += (m[(i, j)] - m[(j, i)].conj()).norm_sqr();
        }
    }
    s.sqrt() / norm
}

pub fn symmetrize(m: &CMat) -> CMat {
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| {
        (m[(i, j)] + m[(j, i)].conj()) * 0.5
    })
}

pub fn kron(a: &CMat, b: &CMat) -> CMat {
    let (ar, ac) = (a.nrows(), a.ncols());
    let (br, bc) = (b.nrows(), b.ncols());
    Mat::from_fn(ar * br, ac * bc, |i, j| {
        a[(i / br, j / bc)] * b[(i % br, j % bc)]
    })
}

pub fn matvec(m: &CMat, v: &[c64]) -> Vec<c64> {
    let mut out = vec![ZERO; m.nrows()];
    for (j, &vj) in v.iter().enumerate() {
        if vj == ZERO {
            continue;
        }
        for (i, o) in out.iter_mut().enumerate() {
            *o += m[(i, j)] * vj;
        }
    }
    out
}

pub fn inner(a: &[c64], b: &[c64]) -> c64 {
    a.iter()
        .zip(b)
        .fold(ZERO, |acc, (x, y)| acc + x.conj() * *y)
}

pub fn vec_norm(v: &[c64]) -> f64 {
    v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

/// `<u| m |v>`.
pub fn expectation(u: &[c64], m: &CMat, v: &[c64]) -> c64 {
    inner(u, &matvec(m, v))
}

// ---------------------------------------------------------------------------
// Index bookkeeping for tensor factors
// ---------------------------------------------------------------------------

pub fn strides(layout: &[usize]) -> Vec<usize> {
    let mut s = vec![1; layout.len()];
    for k in (0..layout.len().saturating_sub(1)).rev() {
        s[k] = s[k + 1] * layout[k + 1];
    }
    s
}

/// Flat offsets contributed by the given factors, enumerated with the
/// first listed factor most significant.
pub fn factor_offsets(layout: &[usize], factors: &[usize]) -> Vec<usize> {
    let st = strides(layout);
    let mut offs = vec![0usize];
    for &f in factors {
        let mut next = Vec::with_capacity(offs.len() * layout[f]);
        for &o in &offs {
            for digit in 0..layout[f] {
                next.push(o + digit * st[f]);
            }
        }
        offs = next;
    }
    offs
}

fn complement(n: usize, factors: &[usize]) -> Vec<usize> {
    (0..n).filter(|k| !factors.contains(k)).collect()
}

fn validate_factors(layout: &[usize], factors: &[usize]) -> Result<()> {
    for (i, &f) in factors.iter().enumerate() {
        if f >= layout.len() {
            return Err(LabError::Usage(format!(
                "factor {f} out of range for layout of {} factors",
                layout.len()
            )));
        }
        if factors[..i].contains(&f) {
            return Err(LabError::Usage(format!("factor {f} listed twice")));
        }
    }
    Ok(())
}

/// Partial trace keeping `keep` (in ascending factor order).
pub fn partial_trace_matrix(m: &CMat, layout: &[usize], keep: &[usize]) -> Result<CMat> {
    let dim: usize = layout.iter().product();
    if m.nrows() != dim || m.ncols() != dim {
        return Err(LabError::DimensionMismatch(format!(
            "matrix is {}x{}, layout product is {dim}",
            m.nrows(),
            m.ncols()
        )));
    }
    validate_factors(layout, keep)?;
    let mut keep = keep.to_vec();
    keep.sort_unstable();
    let traced = complement(layout.len(), &keep);
    let ok = factor_offsets(layout, &keep);
    let ot = factor_offsets(layout, &traced);
    let dk = ok.len();
    Ok(Mat::from_fn(dk, dk, |a, b| {
        let mut s = ZERO;
        for &t in &ot {
            s += m[(ok[a] + t, ok[b] + t)];
        }
        s
    }))
}

/// Reshape a state vector into the matrix `Psi[kept, traced]`.
pub fn state_matrix(amps: &[c64], layout: &[usize], keep: &[usize]) -> Result<CMat> {
    validate_factors(layout, keep)?;
    let mut keep = keep.to_vec();
    keep.sort_unstable();
    let traced = complement(layout.len(), &keep);
    let ok = factor_offsets(layout, &keep);
    let ot = factor_offsets(layout, &traced);
    Ok(Mat::from_fn(ok.len(), ot.len(), |a, b| amps[ok[a] + ot[b]]))
}

/// Inverse of [`state_matrix`].
pub fn state_from_matrix(psi: &CMat, layout: &[usize], keep: &[usize]) -> Vec<c64> {
    let mut keep = keep.to_vec();
    keep.sort_unstable();
    let traced = complement(layout.len(), &keep);
    let ok = factor_offsets(layout, &keep);
    let ot = factor_offsets(layout, &traced);
    let mut out = vec![ZERO; ok.len() * ot.len()];
    for (a, &oa) in ok.iter().enumerate() {
        for (b, &ob) in ot.iter().enumerate() {
            out[oa + ob] = psi[(a, b)];
        }
    }
    out
}

/// Embed `op`, acting on `sites` (listed in the operator's own factor
/// order), into the full space described by `layout`.
pub fn embed(op: &CMat, layout: &[usize], sites: &[usize]) -> Result<CMat> {
    validate_factors(layout, sites)?;
    let local: usize = sites.iter().map(|&s| layout[s]).product();
    if op.nrows() != local || op.ncols() != local {
        return Err(LabError::DimensionMismatch(format!(
            "local operator is {}x{}, sites span dimension {local}",
            op.nrows(),
            op.ncols()
        )));
    }
    let dim: usize = layout.iter().product();
    check_cap(dim)?;
    let os = factor_offsets(layout, sites);
    let or = factor_offsets(layout, &complement(layout.len(), sites));
    let mut out = zeros(dim);
    for &r in &or {
        for (b, &ob) in os.iter().enumerate() {
            for (a, &oa) in os.iter().enumerate() {
                let v = op[(a, b)];
                if v != ZERO {
                    out[(oa + r, ob + r)] = v;
                }
            }
        }
    }
    Ok(out)
}

/// Apply a local operator to a state vector without embedding it.
pub fn apply_local(op: &CMat, layout: &[usize], sites: &[usize], amps: &[c64]) -> Vec<c64> {
    let os = factor_offsets(layout, sites);
    let or = factor_offsets(layout, &complement(layout.len(), sites));
    let mut out = vec![ZERO; amps.len()];
    let mut buf = vec![ZERO; os.len()];
    for &r in &or {
        for (b, &ob) in os.iter().enumerate() {
            buf[b] = amps[ob + r];
        }
        for (a, &oa) in os.iter().enumerate() {
            let mut s = ZERO;
            for (b, &x) in buf.iter().enumerate() {
                s += op[(a, b)] * x;
            }
            out[oa + r] = s;
        }
    }
    out
}

/// `embed(op) * m` for a local `op`, in O(dim^2 * local) time.
pub fn left_mul_local(op: &CMat, layout: &[usize], sites: &[usize], m: &CMat) -> CMat {
    let os = factor_offsets(layout, sites);
    let or = factor_offsets(layout, &complement(layout.len(), sites));
    let mut out = Mat::zeros(m.nrows(), m.ncols());
    for j in 0..m.ncols() {
        for &r in &or {
            for (a, &oa) in os.iter().enumerate() {
                let mut s = ZERO;
                for (b, &ob) in os.iter().enumerate() {
                    s += op[(a, b)] * m[(ob + r, j)];
                }
                out[(oa + r, j)] = s;
            }
        }
    }
    out
}

/// `m * embed(op)` for a local `op`.
pub fn right_mul_local(m: &CMat, op: &CMat, layout: &[usize], sites: &[usize]) -> CMat {
    let os = factor_offsets(layout, sites);
    let or = factor_offsets(layout, &complement(layout.len(), sites));
    let mut out = Mat::zeros(m.nrows(), m.ncols());
    for &r in &or {
        for (b, &ob) in os.iter().enumerate() {
            for i in 0..m.nrows() {
                let mut s = ZERO;
                for (a, &oa) in os.iter().enumerate() {
                    s += m[(i, oa + r)] * op[(a, b)];
                }
                out[(i, ob + r)] = s;
            }
        }
    }
    out
}

/// Reorder tensor factors of a state: output factor `k` is input factor `order[k]`.
pub fn permute_state(amps: &[c64], layout: &[usize], order: &[usize]) -> Vec<c64> {
    let out_layout: Vec<usize> = order.iter().map(|&k| layout[k]).collect();
    let in_st = strides(layout);
    let out_st = strides(&out_layout);
    let mut out = vec![ZERO; amps.len()];
    for (idx, o) in out.iter_mut().enumerate() {
        let mut src = 0;
        for (k, &f) in order.iter().enumerate() {
            let digit = (idx / out_st[k]) % out_layout[k];
            src += digit * in_st[f];
        }
        *o = amps[src];
    }
    out
}

// ---------------------------------------------------------------------------
// Spectral machinery
// ---------------------------------------------------------------------------

/// Eigendecomposition of a Hermitian matrix, eigenvalues ascending.
#[derive(Debug, Clone)]
pub struct Eigh {
    pub values: Vec<f64>,
    pub vectors: CMat,
}

impl Eigh {
    pub fn new(m: &CMat) -> Self {
        let n = m.nrows();
        if n == 0 {
            return Self {
                values: vec![],
                vectors: zeros(0),
            };
        }
        let evd = m.selfadjoint_eigendecomposition(Side::Lower);
        let s = evd.s().column_vector();
        let vals: Vec<f64> = (0..n).map(|i| s.read(i).re).collect();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
        let u = evd.u();
        Self {
            values: order.iter().map(|&k| vals[k]).collect(),
            vectors: Mat::from_fn(n, n, |i, j| u.read(i, order[j])),
        }
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    /// `V f(D) V^dagger`.
    pub fn apply<F: Fn(f64) -> f64>(&self, f: F) -> CMat {
        let n = self.dim();
        let fv: Vec<f64> = self.values.iter().map(|&x| f(x)).collect();
        let vd = Mat::from_fn(n, n, |i, j| self.vectors[(i, j)] * fv[j]);
        &vd * self.vectors.adjoint()
    }

    /// `V f(D) V^dagger` for complex-valued spectral functions.
    pub fn apply_complex<F: Fn(f64) -> c64>(&self, f: F) -> CMat {
        let n = self.dim();
        let fv: Vec<c64> = self.values.iter().map(|&x| f(x)).collect();
        let vd = Mat::from_fn(n, n, |i, j| self.vectors[(i, j)] * fv[j]);
        &vd * self.vectors.adjoint()
    }

    /// Express `m` in the eigenbasis: `V^dagger m V`.
    pub fn to_eigenbasis(&self, m: &CMat) -> CMat {
        let t = self.vectors.adjoint() * m;
        &t * &self.vectors
    }

    /// Inverse of [`Eigh::to_eigenbasis`].
    pub fn from_eigenbasis(&self, m: &CMat) -> CMat {
        let t = &self.vectors * m;
        &t * self.vectors.adjoint()
    }

    pub fn column(&self, j: usize) -> Vec<c64> {
        (0..self.dim()).map(|i| self.vectors[(i, j)]).collect()
    }
}

pub fn eigvalsh(m: &CMat) -> Vec<f64> {
    if m.nrows() == 0 {
        return vec![];
    }
    let mut v = m.selfadjoint_eigenvalues(Side::Lower);
    v.sort_by(f64::total_cmp);
    v
}

pub fn singular_values(m: &CMat) -> Vec<f64> {
    if m.nrows() == 0 {
        return vec![];
    }
    m.singular_values()
}

fn anti_hermitian_defect(m: &CMat) -> f64 {
    let norm = frobenius_norm(m);
    if norm == 0.0 {
        return 0.0;
    }
    let mut s = 0.0;
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            s += (m[(i, j)] + m[(j, i)].conj()).norm_sqr();
        }
    }
    s.sqrt() / norm
}

/// Sum of singular values. Hermitian and anti-Hermitian inputs go through
/// the eigenvalue route.
pub fn trace_norm(m: &CMat) -> f64 {
    if m.nrows() != m.ncols() {
        return singular_values(m).iter().sum();
    }
    if hermitian_defect(m) <= 1e-12 {
        eigvalsh(&symmetrize(m)).iter().map(|x| x.abs()).sum()
    } else if anti_hermitian_defect(m) <= 1e-12 {
        eigvalsh(&symmetrize(&scale(m, I)))
            .iter()
            .map(|x| x.abs())
            .sum()
    } else {
        singular_values(m).iter().sum()
    }
}

/// Largest singular value.
pub fn operator_norm(m: &CMat) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    if m.nrows() == m.ncols() && hermitian_defect(m) <= 1e-12 {
        let v = eigvalsh(&symmetrize(m));
        v[0].abs().max(v[v.len() - 1].abs())
    } else if m.nrows() == m.ncols() && anti_hermitian_defect(m) <= 1e-12 {
        let v = eigvalsh(&symmetrize(&scale(m, I)));
        v[0].abs().max(v[v.len() - 1].abs())
    } else {
        singular_values(m).into_iter().fold(0.0, f64::max)
    }
}

/// Matrix logarithm restricted to the support: eigenvalues below `floor`
/// map to 0.
pub fn log_support(m: &CMat, floor: f64) -> CMat {
    Eigh::new(m).apply(|x| if x > floor { x.ln() } else { 0.0 })
}

pub fn entropy_of_spectrum(values: &[f64]) -> f64 {
    values
        .iter()
        .filter(|&&x| x > SUPPORT_FLOOR)
        .map(|&x| -x * x.ln())
        .sum()
}

pub fn shannon_entropy(p: &[f64]) -> Result<f64> {
    if let Some(x) = p.iter().find(|&&x| x < 0.0 || !x.is_finite()) {
        return Err(LabError::Domain(format!(
            "probability entry {x} is negative or not finite"
        )));
    }
    let total: f64 = p.iter().sum();
    if (total - 1.0).abs() > 1e-10 {
        return Err(LabError::Domain(format!(
            "probabilities sum to {total}, expected 1"
        )));
    }
    Ok(p.iter().filter(|&&x| x > 0.0).map(|&x| -x * x.ln()).sum())
}

/// Binary entropy `h(p)` in nats.
pub fn binary_entropy(p: f64) -> f64 {
    let term = |x: f64| if x > 0.0 { -x * x.ln() } else { 0.0 };
    term(p) + term(1.0 - p)
}

// ---------------------------------------------------------------------------
// Domain types
// ---------------------------------------------------------------------------

fn check_layout(dim: usize, layout: Option<&[usize]>) -> Result<()> {
    if let Some(l) = layout {
        if l.contains(&0) {
            return Err(LabError::Usage("layout contains a zero dimension".into()));
        }
        let prod: usize = l.iter().product();
        if prod != dim {
            return Err(LabError::DimensionMismatch(format!(
                "layout {l:?} has product {prod}, operator dimension is {dim}"
            )));
        }
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct HermitianOperator {
    mat: CMat,
    layout: Option<Vec<usize>>,
}

impl HermitianOperator {
    /// Symmetrizes `(M + M^dagger)/2`; warns above 1e-10 relative asymmetry.
    pub fn new(mat: CMat, layout: Option<Vec<usize>>) -> Result<Self> {
        if mat.nrows() != mat.ncols() {
            return Err(LabError::DimensionMismatch(format!(
                "operator must be square, got {}x{}",
                mat.nrows(),
                mat.ncols()
            )));
        }
        if mat.nrows() == 0 {
            return Err(LabError::Usage(
                "operator dimension must be positive".into(),
            ));
        }
        check_cap(mat.nrows())?;
        check_layout(mat.nrows(), layout.as_deref())?;
        let defect = hermitian_defect(&mat);
        if defect > 1e-10 {
            log::warn!("symmetrizing operator with relative asymmetry {defect:.3e}");
        }
        Ok(Self {
            mat: symmetrize(&mat),
            layout,
        })
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            mat: identity(dim),
            layout: None,
        }
    }

    pub fn zero(dim: usize) -> Self {
        Self {
            mat: zeros(dim),
            layout: None,
        }
    }

    pub fn from_real_diag(d: &[f64]) -> Self {
        Self {
            mat: from_real_diag(d),
            layout: None,
        }
    }

    pub fn with_layout(mut self, layout: Vec<usize>) -> Result<Self> {
        check_layout(self.dim(), Some(&layout))?;
        self.layout = Some(layout);
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn layout(&self) -> Option<&[usize]> {
        self.layout.as_deref()
    }

    pub fn matrix(&self) -> &CMat {
        &self.mat
    }

    pub fn into_matrix(self) -> CMat {
        self.mat
    }

    pub fn eigh(&self) -> Eigh {
        Eigh::new(&self.mat)
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        eigvalsh(&self.mat)
    }

    /// Operator norm (largest |eigenvalue|).
    pub fn norm(&self) -> f64 {
        let v = self.eigenvalues();
        v[0].abs().max(v[v.len() - 1].abs())
    }

    pub fn scaled(&self, k: f64) -> Self {
        Self {
            mat: scale_re(&self.mat, k),
            layout: self.layout.clone(),
        }
    }

    pub fn conjugated_by(&self, u: &CMat) -> Self {
        let t = u * &self.mat;
        Self {
            mat: symmetrize(&(&t * u.adjoint())),
            layout: self.layout.clone(),
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.dim() != other.dim() {
            return Err(LabError::DimensionMismatch(format!(
                "cannot add operators of dimension {} and {}",
                self.dim(),
                other.dim()
            )));
        }
        Ok(Self {
            mat: &self.mat + &other.mat,
            layout: self.layout.clone().or_else(|| other.layout.clone()),
        })
    }
}

#[derive(Debug, Clone)]
pub struct DensityOperator {
    op: HermitianOperator,
}

impl DensityOperator {
    pub const EIG_TOL: f64 = 1e-10;
    pub const TRACE_TOL: f64 = 1e-10;

    pub fn new(mat: CMat, layout: Option<Vec<usize>>) -> Result<Self> {
        let op = HermitianOperator::new(mat, layout)?;
        Self::from_hermitian(op)
    }

    pub fn from_hermitian(op: HermitianOperator) -> Result<Self> {
        let tr = trace(op.matrix()).re;
        if (tr - 1.0).abs() > Self::TRACE_TOL {
            return Err(LabError::InvalidState(format!("trace is {tr}, expected 1")));
        }
        let min = op.eigenvalues()[0];
        if min < -Self::EIG_TOL {
            return Err(LabError::InvalidState(format!(
                "negative eigenvalue {min:.3e}"
            )));
        }
        Ok(Self { op })
    }

    /// Skips validation; for results of trace-preserving maps on valid inputs.
    pub(crate) fn trusted(mat: CMat, layout: Option<Vec<usize>>) -> Self {
        Self {
            op: HermitianOperator {
                mat: symmetrize(&mat),
                layout,
            },
        }
    }

    pub fn maximally_mixed(layout: Vec<usize>) -> Self {
        let dim: usize = layout.iter().product();
        Self::trusted(scale_re(&identity(dim), 1.0 / dim as f64), Some(layout))
    }

    pub fn from_diag(p: &[f64]) -> Result<Self> {
        Self::new(from_real_diag(p), None)
    }

    pub fn dim(&self) -> usize {
        self.op.dim()
    }

    pub fn layout(&self) -> Option<&[usize]> {
        self.op.layout()
    }

    pub fn matrix(&self) -> &CMat {
        self.op.matrix()
    }

    pub fn as_hermitian(&self) -> &HermitianOperator {
        &self.op
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        self.op.eigenvalues()
    }

    pub fn with_layout(self, layout: Vec<usize>) -> Result<Self> {
        Ok(Self {
            op: self.op.with_layout(layout)?,
        })
    }

    /// `p * self + (1 - p) * other`.
    pub fn mix(&self, p: f64, other: &Self) -> Result<Self> {
        if self.dim() != other.dim() {
            return Err(LabError::DimensionMismatch(format!(
                "cannot mix states of dimension {} and {}",
                self.dim(),
                other.dim()
            )));
        }
        let m = scale_re(self.matrix(), p) + scale_re(other.matrix(), 1.0 - p);
        Ok(Self::trusted(m, self.layout().map(<[usize]>::to_vec)))
    }

    /// `u rho u^dagger`.
    pub fn evolve(&self, u: &CMat) -> Self {
        let t = u * self.matrix();
        Self::trusted(&t * u.adjoint(), self.layout().map(<[usize]>::to_vec))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PureState {
    amps: Vec<c64>,
    layout: Vec<usize>,
}

impl PureState {
    pub const NORM_TOL: f64 = 1e-12;

    pub fn new(amps: Vec<c64>, layout: Vec<usize>) -> Result<Self> {
        check_layout(amps.len(), Some(&layout))?;
        let n = vec_norm(&amps);
        if (n - 1.0).abs() > Self::NORM_TOL {
            return Err(LabError::InvalidState(format!(
                "state norm is {n}, expected 1"
            )));
        }
        Ok(Self { amps, layout })
    }

    pub fn normalized(mut amps: Vec<c64>, layout: Vec<usize>) -> Result<Self> {
        check_layout(amps.len(), Some(&layout))?;
        let n = vec_norm(&amps);
        if n == 0.0 || !n.is_finite() {
            return Err(LabError::InvalidState(
                "cannot normalize a zero vector".into(),
            ));
        }
        for a in &mut amps {
            *a /= n;
        }
        Ok(Self { amps, layout })
    }

    pub fn basis(index: usize, layout: Vec<usize>) -> Result<Self> {
        let dim: usize = layout.iter().product();
        if index >= dim {
            return Err(LabError::Usage(format!(
                "basis index {index} out of range {dim}"
            )));
        }
        let mut amps = vec![ZERO; dim];
        amps[index] = ONE;
        Self::new(amps, layout)
    }

    /// `sum_j |j>|j> / sqrt(d)` on a `d x d` pair.
    pub fn maximally_entangled(d: usize) -> Self {
        let mut amps = vec![ZERO; d * d];
        for j in 0..d {
            amps[j * d + j] = re(1.0 / (d as f64).sqrt());
        }
        Self {
            amps,
            layout: vec![d, d],
        }
    }

    pub fn product(&self, other: &Self) -> Self {
        let mut amps = Vec::with_capacity(self.dim() * other.dim());
        for a in &self.amps {
            for b in &other.amps {
                amps.push(*a * *b);
            }
        }
        let mut layout = self.layout.clone();
        layout.extend_from_slice(&other.layout);
        Self { amps, layout }
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn layout(&self) -> &[usize] {
        &self.layout
    }

    pub fn amplitudes(&self) -> &[c64] {
        &self.amps
    }

    pub fn into_amplitudes(self) -> Vec<c64> {
        self.amps
    }

    pub fn projector(&self) -> DensityOperator {
        let n = self.dim();
        let m = Mat::from_fn(n, n, |i, j| self.amps[i] * self.amps[j].conj());
        DensityOperator::trusted(m, Some(self.layout.clone()))
    }

    /// Reduced state on `keep` (ascending factor order).
    pub fn reduced(&self, keep: &[usize]) -> Result<DensityOperator> {
        if keep.is_empty() {
            return Err(LabError::Usage("keep set must be nonempty".into()));
        }
        let psi = state_matrix(&self.amps, &self.layout, keep)?;
        let rho = &psi * psi.adjoint();
        let mut k = keep.to_vec();
        k.sort_unstable();
        let layout = k.iter().map(|&f| self.layout[f]).collect();
        Ok(DensityOperator::trusted(rho, Some(layout)))
    }

    /// Entanglement entropy of the factors in `keep` against the rest.
    pub fn entanglement_entropy(&self, keep: &[usize]) -> Result<f64> {
        Ok(von_neumann_entropy(&self.reduced(keep)?))
    }

    pub fn apply(&self, u: &CMat) -> Result<Self> {
        if u.nrows() != self.dim() || u.ncols() != self.dim() {
            return Err(LabError::DimensionMismatch(format!(
                "operator is {}x{}, state dimension is {}",
                u.nrows(),
                u.ncols(),
                self.dim()
            )));
        }
        Ok(Self {
            amps: matvec(u, &self.amps),
            layout: self.layout.clone(),
        })
    }

    pub fn overlap(&self, other: &Self) -> c64 {
        inner(&self.amps, &other.amps)
    }
}

// ---------------------------------------------------------------------------
// Named operations
// ---------------------------------------------------------------------------

/// Kronecker product with concatenated layouts.
pub fn tensor_product(a: &HermitianOperator, b: &HermitianOperator) -> Result<HermitianOperator> {
    let dim = a.dim().checked_mul(b.dim()).ok_or(LabError::Capacity {
        dim: usize::MAX,
        cap: dim_cap(),
    })?;
    check_cap(dim)?;
    let la = a.layout().map_or_else(|| vec![a.dim()], <[usize]>::to_vec);
    let lb = b.layout().map_or_else(|| vec![b.dim()], <[usize]>::to_vec);
    let mut layout = la;
    layout.extend(lb);
    Ok(HermitianOperator {
        mat: kron(a.matrix(), b.matrix()),
        layout: Some(layout),
    })
}

pub fn partial_trace(rho: &DensityOperator, keep: &[usize]) -> Result<DensityOperator> {
    let layout = rho
        .layout()
        .ok_or_else(|| LabError::Usage("partial trace requires a factor layout".into()))?;
    if keep.is_empty() {
        return Err(LabError::Usage("keep set must be nonempty".into()));
    }
    let m = partial_trace_matrix(rho.matrix(), layout, keep)?;
    let mut k = keep.to_vec();
    k.sort_unstable();
    let out_layout = k.iter().map(|&f| layout[f]).collect();
    Ok(DensityOperator::trusted(m, Some(out_layout)))
}

pub fn hermitian_log_support(rho: &DensityOperator, floor: f64) -> Result<HermitianOperator> {
    if floor <= 0.0 {
        return Err(LabError::Parameter(format!(
            "support floor must be positive, got {floor}"
        )));
    }
    let tr = trace(rho.matrix()).re;
    if tr <= 0.0 {
        return Err(LabError::Domain(format!("trace {tr} is not positive")));
    }
    Ok(HermitianOperator {
        mat: symmetrize(&log_support(rho.matrix(), floor)),
        layout: rho.layout().map(<[usize]>::to_vec),
    })
}

pub fn von_neumann_entropy(rho: &DensityOperator) -> f64 {
    entropy_of_spectrum(&rho.eigenvalues())
}

// ---------------------------------------------------------------------------
// Report attachments
// ---------------------------------------------------------------------------

/// Row-major operator dump: `{dim, layout, re[], im[]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperatorJson {
    pub dim: usize,
    pub layout: Option<Vec<usize>>,
    pub re: Vec<f64>,
    pub im: Vec<f64>,
}

impl OperatorJson {
    pub fn from_matrix(m: &CMat, layout: Option<&[usize]>) -> Self {
        let n = m.nrows();
        let mut re = Vec::with_capacity(n * n);
        let mut im = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                re.push(m[(i, j)].re);
                im.push(m[(i, j)].im);
            }
        }
        Self {
            dim: n,
            layout: layout.map(<[usize]>::to_vec),
            re,
            im,
        }
    }

    pub fn from_state(psi: &PureState) -> Self {
        Self {
            dim: psi.dim(),
            layout: Some(psi.layout().to_vec()),
            re: psi.amplitudes().iter().map(|a| a.re).collect(),
            im: psi.amplitudes().iter().map(|a| a.im).collect(),
        }
    }

    pub fn to_matrix(&self) -> Result<CMat> {
        let n = self.dim;
        if self.re.len() != n * n || self.im.len() != n * n {
            return Err(LabError::DimensionMismatch(format!(
                "expected {} entries, got re={} im={}",
                n * n,
                self.re.len(),
                self.im.len()
            )));
        }
        Ok(Mat::from_fn(n, n, |i, j| {
            cx(self.re[i * n + j], self.im[i * n + j])
        }))
    }
}

// ---------------------------------------------------------------------------
// Paulis
// ---------------------------------------------------------------------------

pub mod pauli {
    use super::*;

    pub fn x() -> CMat {
        from_rows(&[&[ZERO, ONE], &[ONE, ZERO]])
    }

    pub fn y() -> CMat {
        from_rows(&[&[ZERO, -I], &[I, ZERO]])
    }

    pub fn z() -> CMat {
        from_real_diag(&[1.0, -1.0])
    }

    pub fn id() -> CMat {
        identity(2)
    }

    /// Swap on `d x d`.
    pub fn swap(d: usize) -> CMat {
        let n = d * d;
        Mat::from_fn(n, n, |r, c| {
            let (a, b) = (r / d, r % d);
            if c == b * d + a {
                ONE
            } else {
                ZERO
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::{random_density, random_hermitian, random_unitary, seeded};

    #[test]
    fn identity_tensor_identity() {
        let i2 = HermitianOperator::identity(2);
        let t = tensor_product(&i2, &i2).unwrap();
        assert_eq!(t.layout(), Some(&[2usize, 2][..]));
        assert!(max_abs_diff(t.matrix(), &identity(4)) == 0.0);
    }

    #[test]
    fn z_tensor_z_is_diagonal_sign_product() {
        let z = HermitianOperator::new(pauli::z(), None).unwrap();
        let zz = tensor_product(&z, &z).unwrap();
        let expect = from_real_diag(&[1.0, -1.0, -1.0, 1.0]);
        assert!(max_abs_diff(zz.matrix(), &expect) == 0.0);
        // |01><01| entry
        assert_eq!(zz.matrix()[(1, 1)].re, -1.0);
    }

    #[test]
    fn kron_matches_index_formula() {
        let mut rng = seeded(11);
        let a = random_hermitian(2, &mut rng);
        let b = random_hermitian(2, &mut rng);
        let k = kron(&a, &b);
        for i1 in 0..2 {
            for j1 in 0..2 {
                for i2 in 0..2 {
                    for j2 in 0..2 {
                        let direct = a[(i1, j1)] * b[(i2, j2)];
                        let got = k[(i1 * 2 + i2, j1 * 2 + j2)];
                        assert!((direct - got).norm() <= 1e-15);
                    }
                }
            }
        }
    }

    #[test]
    fn tensor_product_respects_cap() {
        set_dim_cap(8);
        let a = HermitianOperator::identity(4);
        let err = tensor_product(&a, &a).unwrap_err();
        set_dim_cap(DEFAULT_DIM_CAP);
        assert!(matches!(err, LabError::Capacity { dim: 16, cap: 8 }));
    }

    #[test]
    fn partial_trace_of_product_and_bell_states() {
        let psi = PureState::basis(0, vec![2, 2]).unwrap();
        let r = partial_trace(&psi.projector(), &[0]).unwrap();
        let expect = from_real_diag(&[1.0, 0.0]);
        assert!(max_abs_diff(r.matrix(), &expect) < 1e-15);

        let bell = PureState::maximally_entangled(2);
        let r = partial_trace(&bell.projector(), &[1]).unwrap();
        assert!(max_abs_diff(r.matrix(), &scale_re(&identity(2), 0.5)) < 1e-15);
    }

    #[test]
    fn partial_trace_matches_double_index_sum() {
        let mut rng = seeded(3);
        let rho = random_density(6, 6, &mut rng)
            .with_layout(vec![2, 3])
            .unwrap();
        let ra = partial_trace(&rho, &[0]).unwrap();
        let rb = partial_trace(&rho, &[1]).unwrap();
        let m = rho.matrix();
        for i in 0..2 {
            for j in 0..2 {
                let mut s = ZERO;
                for k in 0..3 {
                    s += m[(i * 3 + k, j * 3 + k)];
                }
                assert!((s - ra.matrix()[(i, j)]).norm() <= 1e-13);
            }
        }
        for i in 0..3 {
            for j in 0..3 {
                let mut s = ZERO;
                for k in 0..2 {
                    s += m[(k * 3 + i, k * 3 + j)];
                }
                assert!((s - rb.matrix()[(i, j)]).norm() <= 1e-13);
            }
        }
        assert!((trace(ra.matrix()).re - 1.0).abs() < 1e-12);
        assert!(ra.eigenvalues()[0] > -1e-12);
    }

    #[test]
    fn partial_trace_requires_layout() {
        let rho = DensityOperator::from_diag(&[0.5, 0.5]).unwrap();
        assert!(matches!(partial_trace(&rho, &[0]), Err(LabError::Usage(_))));
    }

    #[test]
    fn pure_state_reduction_matches_density_route() {
        let mut rng = seeded(5);
        let psi = crate::random::random_pure_state(vec![2, 3, 2], &mut rng);
        for keep in [&[0][..], &[1], &[0, 2], &[1, 2]] {
            let a = psi.reduced(keep).unwrap();
            let b = partial_trace(&psi.projector(), keep).unwrap();
            assert!(max_abs_diff(a.matrix(), b.matrix()) < 1e-14);
        }
    }

    #[test]
    fn log_of_maximally_mixed_and_pure() {
        let d = 3;
        let rho = DensityOperator::maximally_mixed(vec![d]);
        let l = hermitian_log_support(&rho, SUPPORT_FLOOR).unwrap();
        let expect = scale_re(&identity(d), -(d as f64).ln());
        assert!(max_abs_diff(l.matrix(), &expect) < 1e-13);

        let pure = PureState::basis(1, vec![3]).unwrap().projector();
        let l = hermitian_log_support(&pure, SUPPORT_FLOOR).unwrap();
        assert!(frobenius_norm(l.matrix()) < 1e-13);
    }

    #[test]
    fn log_round_trips_through_exp() {
        let mut rng = seeded(17);
        let rho = random_density(2, 2, &mut rng);
        let l = hermitian_log_support(&rho, SUPPORT_FLOOR).unwrap();
        let back = l.eigh().apply(f64::exp);
        assert!(max_abs_diff(&back, rho.matrix()) < 1e-10);
    }

    #[test]
    fn log_rejects_bad_floor() {
        let rho = DensityOperator::maximally_mixed(vec![2]);
        assert!(hermitian_log_support(&rho, 0.0).is_err());
    }

    #[test]
    fn entropy_examples() {
        let pure = PureState::basis(0, vec![4]).unwrap().projector();
        assert!(von_neumann_entropy(&pure).abs() < 1e-14);
        let mixed = DensityOperator::maximally_mixed(vec![4]);
        assert!((von_neumann_entropy(&mixed) - 4f64.ln()).abs() < 1e-13);
        let rho = DensityOperator::from_diag(&[0.25, 0.75]).unwrap();
        let expect = -0.25 * 0.25f64.ln() - 0.75 * 0.75f64.ln();
        assert!((von_neumann_entropy(&rho) - expect).abs() < 1e-14);
        assert!((expect - 0.5623).abs() < 1e-4);
    }

    #[test]
    fn trace_norm_examples() {
        assert_eq!(trace_norm(&zeros(3)), 0.0);
        assert!((trace_norm(&from_real_diag(&[1.0, -2.0])) - 3.0).abs() < 1e-14);
        let mut rng = seeded(23);
        let g = crate::random::ginibre(4, &mut rng);
        let sv: f64 = singular_values(&g).iter().sum();
        assert!((trace_norm(&g) - sv).abs() < 1e-12);
    }

    #[test]
    fn trace_norm_is_attained_by_sign_matrix() {
        let mut rng = seeded(29);
        let m = random_hermitian(5, &mut rng);
        let sign = Eigh::new(&m).apply(f64::signum);
        let t = trace_product(&sign, &m).re;
        assert!((t - trace_norm(&m)).abs() < 1e-10);
    }

    #[test]
    fn shannon_examples() {
        assert_eq!(shannon_entropy(&[1.0, 0.0]).unwrap(), 0.0);
        assert!((shannon_entropy(&[0.5, 0.5]).unwrap() - 2f64.ln()).abs() < 1e-15);
        let h = shannon_entropy(&[0.1, 0.9]).unwrap();
        assert!((h - (-0.1 * 0.1f64.ln() - 0.9 * 0.9f64.ln())).abs() < 1e-15);
        assert!((h - 0.3251).abs() < 1e-4);
        assert!(matches!(
            shannon_entropy(&[-0.1, 1.1]),
            Err(LabError::Domain(_))
        ));
    }

    #[test]
    fn hermitian_constructor_symmetrizes() {
        let m = from_rows(&[&[ONE, cx(1.0, 1e-6)], &[cx(1.0, 0.0), ONE]]);
        let h = HermitianOperator::new(m, None).unwrap();
        assert!(hermitian_defect(h.matrix()) == 0.0);
        assert!(HermitianOperator::new(identity(4), Some(vec![3])).is_err());
    }

    #[test]
    fn unitary_conjugation_preserves_operator_norm() {
        let mut rng = seeded(31);
        let h = HermitianOperator::new(random_hermitian(4, &mut rng), None).unwrap();
        let u = random_unitary(4, &mut rng);
        assert!((h.norm() - h.conjugated_by(&u).norm()).abs() < 1e-12);
    }

    #[test]
    fn json_round_trip() {
        let mut rng = seeded(37);
        let m = random_hermitian(3, &mut rng);
        let j = OperatorJson::from_matrix(&m, Some(&[3]));
        let s = serde_json::to_string(&j).unwrap();
        let back: OperatorJson = serde_json::from_str(&s).unwrap();
        assert!(max_abs_diff(&back.to_matrix().unwrap(), &m) == 0.0);
    }

    #[test]
    fn permute_state_swaps_factors() {
        let a = PureState::basis(1, vec![2]).unwrap();
        let b = PureState::basis(2, vec![3]).unwrap();
        let ab = a.product(&b);
        let ba = b.product(&a);
        let p = permute_state(ab.amplitudes(), ab.layout(), &[1, 0]);
        assert_eq!(p, ba.amplitudes());
    }

    #[test]
    fn local_application_matches_embedding() {
        let mut rng = seeded(41);
        let layout = [2, 3, 2];
        let op = random_hermitian(4, &mut rng);
        let sites = [2, 0];
        let full = embed(&op, &layout, &sites).unwrap();
        let psi = crate::random::random_pure_state(layout.to_vec(), &mut rng);
        let a = apply_local(&op, &layout, &sites, psi.amplitudes());
        let b = matvec(&full, psi.amplitudes());
        assert!(a.iter().zip(&b).all(|(x, y)| (*x - *y).norm() < 1e-13));
        let m = random_hermitian(12, &mut rng);
        assert!(max_abs_diff(&left_mul_local(&op, &layout, &sites, &m), &(&full * &m)) < 1e-12);
        assert!(max_abs_diff(&right_mul_local(&m, &op, &layout, &sites), &(&m * &full)) < 1e-12);
    }
}
