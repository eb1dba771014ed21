//! Geometry of `Z_L^nu` tori.
//!
//! Sites are flat indices in row-major order: coordinate 0 is the most
//! significant digit. Regions are ordered sets of flat indices, which makes
//! iteration lexicographic in coordinates.

use std::collections::{BTreeSet, VecDeque};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LatticeSpec {
    pub nu: usize,
    pub l: usize,
    /// Open boundaries drop the wrap-around bonds; used by Hamiltonian presets.
    pub periodic: bool,
}

impl LatticeSpec {
    pub fn new(nu: usize, l: usize) -> Result<Self> {
        if nu == 0 {
            return Err(LabError::Parameter(
                "lattice dimension must be at least 1".into(),
            ));
        }
        if l < 2 {
            return Err(LabError::Parameter(format!(
                "side length must be at least 2, got {l}"
            )));
        }
        if (l as f64).powi(nu as i32) > 1e9 {
            return Err(LabError::Parameter(format!(
                "lattice {l}^{nu} is too large"
            )));
        }
        Ok(Self {
            nu,
            l,
            periodic: true,
        })
    }

    pub fn chain(l: usize) -> Result<Self> {
        Self::new(1, l)
    }

    pub fn open(mut self) -> Self {
        self.periodic = false;
        self
    }

    pub fn n_sites(&self) -> usize {
        self.l.pow(self.nu as u32)
    }

    pub fn coords(&self, site: usize) -> Vec<usize> {
        let mut c = vec![0; self.nu];
        let mut s = site;
        for k in (0..self.nu).rev() {
            c[k] = s % self.l;
            s /= self.l;
        }
        c
    }

    pub fn index(&self, coords: &[usize]) -> Result<usize> {
        if coords.len() != self.nu {
            return Err(LabError::Domain(format!(
                "site has {} coordinates, lattice dimension is {}",
                coords.len(),
                self.nu
            )));
        }
        let mut s = 0;
        for &c in coords {
            if c >= self.l {
                return Err(LabError::Domain(format!(
                    "coordinate {c} out of range [0, {})",
                    self.l
                )));
            }
            s = s * self.l + c;
        }
        Ok(s)
    }

    fn check_site(&self, site: usize) -> Result<()> {
        if site >= self.n_sites() {
            return Err(LabError::Domain(format!(
                "site {site} out of range for {} sites",
                self.n_sites()
            )));
        }
        Ok(())
    }

    fn coord_distance(&self, a: usize, b: usize) -> usize {
        let d = a.abs_diff(b);
        if self.periodic {
            d.min(self.l - d)
        } else {
            d
        }
    }

    /// Site reached by stepping `+1` along `axis`, or `None` across an open edge.
    pub fn step(&self, site: usize, axis: usize) -> Option<usize> {
        let mut c = self.coords(site);
        if c[axis] + 1 == self.l {
            if !self.periodic {
                return None;
            }
            c[axis] = 0;
        } else {
            c[axis] += 1;
        }
        Some(self.index(&c).expect("in range"))
    }

    pub fn neighbours(&self, site: usize) -> Vec<usize> {
        let c = self.coords(site);
        let mut out = BTreeSet::new();
        for axis in 0..self.nu {
            for delta in [1, self.l - 1] {
                if !self.periodic
                    && ((delta == 1 && c[axis] + 1 == self.l) || (delta != 1 && c[axis] == 0))
                {
                    continue;
                }
                let mut n = c.clone();
                n[axis] = (c[axis] + delta) % self.l;
                out.insert(self.index(&n).expect("in range"));
            }
        }
        out.remove(&site);
        out.into_iter().collect()
    }

    /// Nearest-neighbour bonds `(v, v + e_axis)`, wrap bonds included on tori.
    pub fn bonds(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for v in 0..self.n_sites() {
            for axis in 0..self.nu {
                if let Some(w) = self.step(v, axis) {
                    if w != v {
                        out.push((v, w));
                    }
                }
            }
        }
        out
    }

    pub fn max_distance(&self) -> usize {
        if self.periodic {
            self.nu * (self.l / 2)
        } else {
            self.nu * (self.l - 1)
        }
    }

    /// Translation by one unit along `axis`, as a site permutation.
    pub fn translation(&self, axis: usize) -> Vec<usize> {
        (0..self.n_sites())
            .map(|v| {
                let mut c = self.coords(v);
                c[axis] = (c[axis] + 1) % self.l;
                self.index(&c).expect("in range")
            })
            .collect()
    }
}

pub fn torus_distance(x: usize, y: usize, spec: &LatticeSpec) -> Result<usize> {
    spec.check_site(x)?;
    spec.check_site(y)?;
    Ok(distance_unchecked(x, y, spec))
}

pub(crate) fn distance_unchecked(x: usize, y: usize, spec: &LatticeSpec) -> usize {
    let (cx, cy) = (spec.coords(x), spec.coords(y));
    cx.iter()
        .zip(&cy)
        .map(|(&a, &b)| spec.coord_distance(a, b))
        .sum()
}

pub fn torus_distance_coords(x: &[usize], y: &[usize], spec: &LatticeSpec) -> Result<usize> {
    torus_distance(spec.index(x)?, spec.index(y)?, spec)
}

/// Corrected ball-volume cap `(2r+1)^nu`.
pub fn ball_cap(r: usize, nu: usize) -> f64 {
    ((2 * r + 1) as f64).powi(nu as i32)
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Region {
    pub sites: BTreeSet<usize>,
}

impl Region {
    pub fn new<I: IntoIterator<Item = usize>>(sites: I) -> Self {
        Self {
            sites: sites.into_iter().collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn contains(&self, v: usize) -> bool {
        self.sites.contains(&v)
    }

    pub fn to_vec(&self) -> Vec<usize> {
        self.sites.iter().copied().collect()
    }

    pub fn complement(&self, spec: &LatticeSpec) -> Region {
        Region::new((0..spec.n_sites()).filter(|v| !self.contains(*v)))
    }

    pub fn union(&self, other: &Region) -> Region {
        Region::new(self.sites.union(&other.sites).copied())
    }

    pub fn is_subset(&self, other: &Region) -> bool {
        self.sites.is_subset(&other.sites)
    }

    pub fn validate(&self, spec: &LatticeSpec) -> Result<()> {
        match self.sites.iter().next_back() {
            Some(&v) if v >= spec.n_sites() => Err(LabError::Domain(format!(
                "region site {v} outside lattice of {} sites",
                spec.n_sites()
            ))),
            _ => Ok(()),
        }
    }

    /// Half-open slab `a0..b0 x a1..b1 x ...`, one range per axis.
    pub fn slab(ranges: &[(usize, usize)], spec: &LatticeSpec) -> Result<Region> {
        if ranges.len() != spec.nu {
            return Err(LabError::Usage(format!(
                "slab needs {} ranges, got {}",
                spec.nu,
                ranges.len()
            )));
        }
        for &(a, b) in ranges {
            if a >= b || b > spec.l {
                return Err(LabError::Usage(format!(
                    "bad slab range {a}..{b} for side {}",
                    spec.l
                )));
            }
        }
        Ok(Region::new((0..spec.n_sites()).filter(|&v| {
            spec.coords(v)
                .iter()
                .zip(ranges)
                .all(|(&c, &(a, b))| c >= a && c < b)
        })))
    }

    /// Parse a region literal.
    ///
    /// Slabs use half-open ranges joined by `x` or `×`: `0..5`, `0..2 x 0..4`.
    /// Coordinate lists separate sites with `;` and coordinates with `,`:
    /// `0;3;4` or `0,0;1,2`.
    pub fn parse(text: &str, spec: &LatticeSpec) -> Result<Region> {
        let text = text.trim();
        if text.is_empty() {
            return Err(LabError::Usage("empty region literal".into()));
        }
        let bad = |what: &str| LabError::Usage(format!("cannot parse region `{text}`: {what}"));
        if text.contains("..") {
            let mut ranges = Vec::new();
            for part in text.split(['x', '×', 'X']) {
                let (a, b) = part
                    .trim()
                    .split_once("..")
                    .ok_or_else(|| bad("range without `..`"))?;
                let a = a.trim().parse::<usize>().map_err(|_| bad("range start"))?;
                let b = b.trim().parse::<usize>().map_err(|_| bad("range end"))?;
                ranges.push((a, b));
            }
            return Region::slab(&ranges, spec);
        }
        let mut sites = BTreeSet::new();
        for item in text.split(';') {
            let coords = item
                .trim()
                .trim_start_matches('(')
                .trim_end_matches(')')
                .split(',')
                .map(|c| c.trim().parse::<usize>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|_| bad("coordinate"))?;
            sites.insert(spec.index(&coords)?);
        }
        Ok(Region { sites })
    }
}

pub fn ball(v: usize, r: usize, spec: &LatticeSpec) -> Result<Region> {
    spec.check_site(v)?;
    Ok(Region::new(
        (0..spec.n_sites()).filter(|&w| distance_unchecked(v, w, spec) <= r),
    ))
}

/// Union of balls of radius `r` around every site of `region`.
pub fn fattening(region: &Region, r: usize, spec: &LatticeSpec) -> Region {
    Region::new((0..spec.n_sites()).filter(|&w| {
        region
            .sites
            .iter()
            .any(|&v| distance_unchecked(v, w, spec) <= r)
    }))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundaryInfo {
    pub boundary_in: Region,
    pub boundary_out: Region,
    pub area: usize,
}

fn check_proper(region: &Region, spec: &LatticeSpec) -> Result<()> {
    region.validate(spec)?;
    if region.is_empty() || region.len() == spec.n_sites() {
        return Err(LabError::Domain(
            "bipartition needs a proper nonempty region".into(),
        ));
    }
    Ok(())
}

pub fn boundary_and_area(region: &Region, spec: &LatticeSpec) -> Result<BoundaryInfo> {
    check_proper(region, spec)?;
    let mut b_in = BTreeSet::new();
    let mut b_out = BTreeSet::new();
    for v in 0..spec.n_sites() {
        let inside = region.contains(v);
        if spec
            .neighbours(v)
            .iter()
            .any(|&w| region.contains(w) != inside)
        {
            if inside {
                b_in.insert(v);
            } else {
                b_out.insert(v);
            }
        }
    }
    let area = b_in.len().max(b_out.len());
    Ok(BoundaryInfo {
        boundary_in: Region { sites: b_in },
        boundary_out: Region { sites: b_out },
        area,
    })
}

/// `m(v)`: graph distance from every site to `dB1 u dB2`.
pub fn boundary_distances(region: &Region, spec: &LatticeSpec) -> Result<Vec<usize>> {
    let info = boundary_and_area(region, spec)?;
    let mut dist = vec![usize::MAX; spec.n_sites()];
    let mut queue = VecDeque::new();
    for &v in info
        .boundary_in
        .sites
        .iter()
        .chain(&info.boundary_out.sites)
    {
        dist[v] = 0;
        queue.push_back(v);
    }
    while let Some(v) = queue.pop_front() {
        for w in spec.neighbours(v) {
            if dist[w] == usize::MAX {
                dist[w] = dist[v] + 1;
                queue.push_back(w);
            }
        }
    }
    Ok(dist)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileRow {
    pub r: usize,
    pub m: usize,
    pub bound: f64,
}

/// `M(r)` for `r = 0..=r_max` with the cap `2 A (2r+1)^nu`.
pub fn boundary_profile(
    region: &Region,
    spec: &LatticeSpec,
    r_max: usize,
) -> Result<Vec<ProfileRow>> {
    let area = boundary_and_area(region, spec)?.area;
    let dist = boundary_distances(region, spec)?;
    Ok((0..=r_max)
        .map(|r| ProfileRow {
            r,
            m: dist.iter().filter(|&&d| d <= r).count(),
            bound: 2.0 * area as f64 * ball_cap(r, spec.nu),
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReproducingReport {
    pub lambda: f64,
    pub lambda_doubled: f64,
    /// `lambda` keeps growing with the side length.
    pub non_reproducing: bool,
}

/// Smallest `lambda` with `sum_x K(d(v,x)) K(d(x,w)) <= lambda K(d(v,w))`.
/// Translation invariance lets `v` be fixed at the origin.
pub fn reproducing_constant<K: Fn(usize) -> f64>(k: &K, spec: &LatticeSpec) -> Result<f64> {
    let n = spec.n_sites();
    let from_origin: Vec<f64> = (0..n).map(|x| k(distance_unchecked(0, x, spec))).collect();
    for d in 0..=spec.max_distance() {
        let kd = k(d);
        if kd <= 0.0 || !kd.is_finite() {
            return Err(LabError::Domain(format!("K({d}) = {kd} is not positive")));
        }
    }
    let mut lambda: f64 = 0.0;
    for w in 0..n {
        let s: f64 = (0..n)
            .map(|x| from_origin[x] * k(distance_unchecked(x, w, spec)))
            .sum();
        lambda = lambda.max(s / from_origin[w]);
    }
    Ok(lambda)
}

/// Reproducing constant at `L` and `2L`; a ratio above 1.5 flags a decay
/// function whose constant does not stay bounded.
pub fn reproducing_check<K: Fn(usize) -> f64>(
    k: &K,
    spec: &LatticeSpec,
) -> Result<ReproducingReport> {
    let lambda = reproducing_constant(k, spec)?;
    let doubled = LatticeSpec {
        l: 2 * spec.l,
        ..*spec
    };
    let lambda_doubled = reproducing_constant(k, &doubled)?;
    Ok(ReproducingReport {
        lambda,
        lambda_doubled,
        non_reproducing: lambda_doubled > 1.5 * lambda,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub triples: usize,
    /// `(x, y, z)` failing identity, symmetry or the triangle inequality.
    pub violations: Vec<(usize, usize, usize)>,
}

/// Metric axioms of the torus distance on `triples` random site triples.
pub fn metric_axiom_check<R: Rng + ?Sized>(
    spec: &LatticeSpec,
    triples: usize,
    rng: &mut R,
) -> MetricReport {
    let n = spec.n_sites();
    let mut violations = Vec::new();
    for _ in 0..triples {
        let (x, y, z) = (
            rng.gen_range(0..n),
            rng.gen_range(0..n),
            rng.gen_range(0..n),
        );
        let d = |a, b| distance_unchecked(a, b, spec);
        let ok = (d(x, y) == 0) == (x == y) && d(x, y) == d(y, x) && d(x, z) <= d(x, y) + d(y, z);
        if !ok {
            violations.push((x, y, z));
        }
    }
    MetricReport {
        triples,
        violations,
    }
}

/// Random proper region: half the draws are balls around a random site,
/// the rest keep each site independently at a random density.
pub fn random_region<R: Rng + ?Sized>(spec: &LatticeSpec, rng: &mut R) -> Region {
    let n = spec.n_sites();
    loop {
        if rng.gen::<bool>() {
            let r = rng.gen_range(0..=spec.max_distance());
            let region = ball(rng.gen_range(0..n), r, spec).expect("site in range");
            if region.len() < n {
                return region;
            }
            continue;
        }
        let density = rng.gen_range(0.05..0.95);
        let region = Region::new((0..n).filter(|_| rng.gen::<f64>() < density));
        if !region.is_empty() && region.len() < n {
            return region;
        }
    }
}

/// Boustrophedon ordering of a 2D lattice; identity order otherwise.
pub fn snake_order(spec: &LatticeSpec) -> Vec<usize> {
    if spec.nu != 2 {
        return (0..spec.n_sites()).collect();
    }
    let mut out = Vec::with_capacity(spec.n_sites());
    for row in 0..spec.l {
        for k in 0..spec.l {
            let col = if row % 2 == 0 { k } else { spec.l - 1 - k };
            out.push(row * spec.l + col);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chain10() -> LatticeSpec {
        LatticeSpec::chain(10).unwrap()
    }

    #[test]
    fn distance_examples() {
        let s = chain10();
        assert_eq!(torus_distance(4, 4, &s).unwrap(), 0);
        assert_eq!(torus_distance(1, 9, &s).unwrap(), 2);
        let s2 = LatticeSpec::new(2, 6).unwrap();
        assert_eq!(torus_distance_coords(&[0, 0], &[3, 5], &s2).unwrap(), 4);
        assert!(torus_distance(10, 0, &s).is_err());
        assert!(torus_distance_coords(&[6, 0], &[0, 0], &s2).is_err());
    }

    #[test]
    fn ball_examples() {
        let s = chain10();
        assert_eq!(ball(3, 0, &s).unwrap().to_vec(), vec![3]);
        assert_eq!(ball(0, 2, &s).unwrap().to_vec(), vec![0, 1, 2, 8, 9]);
        let s2 = LatticeSpec::new(2, 8).unwrap();
        let b = ball(s2.index(&[4, 4]).unwrap(), 1, &s2).unwrap();
        assert_eq!(b.len(), 5);
        for r in 0..5 {
            assert!(ball(0, r, &s2).unwrap().len() as f64 <= ball_cap(r, 2));
        }
    }

    #[test]
    fn boundary_examples() {
        let s = chain10();
        let info = boundary_and_area(&Region::new(0..5), &s).unwrap();
        assert_eq!(info.boundary_in.to_vec(), vec![0, 4]);
        assert_eq!(info.boundary_out.to_vec(), vec![5, 9]);
        assert_eq!(info.area, 2);

        let s2 = LatticeSpec::new(2, 6).unwrap();
        let info = boundary_and_area(&Region::new([14]), &s2).unwrap();
        assert_eq!(info.boundary_in.to_vec(), vec![14]);
        assert_eq!(info.boundary_out.len(), 4);
        assert_eq!(info.area, 4);

        let s4 = LatticeSpec::new(2, 4).unwrap();
        let half = Region::parse("0..2 x 0..4", &s4).unwrap();
        assert_eq!(half.len(), 8);
        assert_eq!(boundary_and_area(&half, &s4).unwrap().area, 8);

        assert!(boundary_and_area(&Region::default(), &s).is_err());
        assert!(boundary_and_area(&Region::new(0..10), &s).is_err());
    }

    #[test]
    fn profile_examples() {
        let s = chain10();
        let p = boundary_profile(&Region::new(0..5), &s, 10).unwrap();
        assert_eq!(p[0].m, 4);
        for w in p.windows(2) {
            assert!(w[1].m >= w[0].m);
            assert!(w[1].m - w[0].m <= 4);
        }
        assert_eq!(p[10].m, 10);
        assert!(p.iter().all(|row| row.m as f64 <= row.bound));
    }

    #[test]
    fn reproducing_examples() {
        let s = LatticeSpec::chain(16).unwrap();
        let flat = reproducing_constant(&|_| 1.0, &s).unwrap();
        assert!((flat - 16.0).abs() < 1e-12);

        let poly = reproducing_check(&|r| (1.0 + r as f64).powi(-3), &s).unwrap();
        assert!(poly.lambda.is_finite() && !poly.non_reproducing);

        let exp = reproducing_check(&|r| (-(r as f64)).exp(), &s).unwrap();
        assert!(exp.non_reproducing);

        assert!(reproducing_constant(&|r| if r > 3 { 0.0 } else { 1.0 }, &s).is_err());
    }

    #[test]
    fn region_parsing() {
        let s = chain10();
        assert_eq!(
            Region::parse("0..5", &s).unwrap().to_vec(),
            vec![0, 1, 2, 3, 4]
        );
        assert_eq!(Region::parse("7;2", &s).unwrap().to_vec(), vec![2, 7]);
        let s2 = LatticeSpec::new(2, 3).unwrap();
        assert_eq!(
            Region::parse("(0,1);(2,2)", &s2).unwrap().to_vec(),
            vec![1, 8]
        );
        assert_eq!(
            Region::parse("0..1 × 1..3", &s2).unwrap().to_vec(),
            vec![1, 2]
        );
        assert!(Region::parse("0..11", &s).is_err());
        assert!(Region::parse("a;b", &s).is_err());
    }

    #[test]
    fn open_chain_has_no_wrap() {
        let s = chain10().open();
        assert_eq!(torus_distance(0, 9, &s).unwrap(), 9);
        assert_eq!(s.bonds().len(), 9);
        assert_eq!(chain10().bonds().len(), 10);
    }

    #[test]
    fn snake_order_is_a_permutation() {
        let s = LatticeSpec::new(2, 3).unwrap();
        let o = snake_order(&s);
        assert_eq!(o, vec![0, 1, 2, 5, 4, 3, 6, 7, 8]);
    }
}
