//! Flat cylinders `C = ℝⁿ / H` for closed subgroups `H = V ⊕ Λ` (a linear
//! subspace plus a lattice).
//!
//! Points are stored by a canonical representative: the component along `V` is
//! removed and the coordinates along the (projected) lattice basis are reduced
//! to `[0, 1)`. Distances are exact closest-vector computations: the lattice
//! coefficients are enumerated over a box derived from the inverse Gram
//! matrix, which contains every lattice vector at least as close as the
//! rounded least-squares guess.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::metric::{ExtReal, MetricSpace, Polyline, EPS_METRIC};

/// Largest supported lattice rank.
pub const MAX_LATTICE_RANK: usize = 4;

/// Default tolerance for deciding that two lifts tie.
pub const DEFAULT_EPS_GAP: f64 = 1e-7;

const INDEPENDENCE_RTOL: f64 = 1e-10;

/// Serialized form: row vectors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubgroupSpec {
    pub ambient_dim: usize,
    #[serde(default)]
    pub subspace_basis: Vec<Vec<f64>>,
    #[serde(default)]
    pub lattice_basis: Vec<Vec<f64>>,
}

/// A closed subgroup of `(ℝⁿ, +)`, given by a basis of its identity component
/// `V` and a basis of a lattice `Λ` complementing it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SubgroupSpec", into = "SubgroupSpec")]
pub struct ClosedSubgroup {
    ambient_dim: usize,
    subspace_basis: Vec<DVector<f64>>,
    lattice_basis: Vec<DVector<f64>>,
}

fn rank_with_tol(vectors: &[DVector<f64>]) -> usize {
    if vectors.is_empty() {
        return 0;
    }
    let m = DMatrix::from_columns(vectors);
    let sv = m.svd(false, false).singular_values;
    let max = sv.iter().cloned().fold(0.0, f64::max);
    if max == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > max * INDEPENDENCE_RTOL).count()
}

impl ClosedSubgroup {
    pub fn new(
        ambient_dim: usize,
        subspace_basis: Vec<DVector<f64>>,
        lattice_basis: Vec<DVector<f64>>,
    ) -> Result<Self> {
        if ambient_dim == 0 {
            return Err(Error::input("ambient dimension must be positive"));
        }
        for v in subspace_basis.iter().chain(&lattice_basis) {
            check_dim(ambient_dim, v.len())?;
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::input("subgroup basis vectors must be finite"));
            }
        }
        if lattice_basis.len() > MAX_LATTICE_RANK {
            return Err(Error::input(format!(
                "lattice rank {} exceeds the supported maximum {MAX_LATTICE_RANK}",
                lattice_basis.len()
            )));
        }
        if rank_with_tol(&subspace_basis) < subspace_basis.len() {
            return Err(Error::input("subspace basis is linearly dependent"));
        }
        let all: Vec<_> = subspace_basis
            .iter()
            .chain(&lattice_basis)
            .cloned()
            .collect();
        if rank_with_tol(&all) < all.len() {
            return Err(Error::NotDiscrete);
        }
        Ok(Self {
            ambient_dim,
            subspace_basis,
            lattice_basis,
        })
    }

    /// `{0} ⊂ ℝⁿ`.
    pub fn trivial(ambient_dim: usize) -> Self {
        Self {
            ambient_dim,
            subspace_basis: Vec::new(),
            lattice_basis: Vec::new(),
        }
    }

    /// A pure lattice; the ambient dimension is taken from the first vector.
    pub fn lattice(basis: Vec<DVector<f64>>) -> Result<Self> {
        let n = basis
            .first()
            .map(|v| v.len())
            .ok_or_else(|| Error::input("empty lattice basis; use ClosedSubgroup::trivial"))?;
        Self::new(n, Vec::new(), basis)
    }

    /// `(2π ℤ)ᵏ`, the kernel of the exponential map of the k-torus.
    pub fn standard_torus(k: usize) -> Self {
        let basis = (0..k)
            .map(|i| {
                let mut e = DVector::zeros(k);
                e[i] = std::f64::consts::TAU;
                e
            })
            .collect();
        Self {
            ambient_dim: k,
            subspace_basis: Vec::new(),
            lattice_basis: basis,
        }
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    pub fn subspace_basis(&self) -> &[DVector<f64>] {
        &self.subspace_basis
    }

    pub fn lattice_basis(&self) -> &[DVector<f64>] {
        &self.lattice_basis
    }

    /// `(a, b)` with `ℝⁿ/H ≅ ℝᵃ × Tᵇ`.
    pub fn cylinder_type(&self) -> (usize, usize) {
        let b = self.lattice_basis.len();
        (self.ambient_dim - self.subspace_basis.len() - b, b)
    }

    pub fn is_trivial(&self) -> bool {
        self.subspace_basis.is_empty() && self.lattice_basis.is_empty()
    }

    /// Half the length of the shortest nonzero lattice vector projected off `V`.
    pub fn injectivity_radius(&self) -> Result<ExtReal> {
        Ok(Cylinder::new(self.clone())?.injectivity_radius())
    }

    /// True when every element of `self` lies in `other`.
    pub fn is_subgroup_of(&self, other: &ClosedSubgroup) -> Result<bool> {
        check_dim(other.ambient_dim, self.ambient_dim)?;
        let cyl = Cylinder::new(other.clone())?;
        let zero = cyl.project(&DVector::zeros(self.ambient_dim))?;
        for v in &self.subspace_basis {
            // a line lies in `other` only if it lies in its identity component
            let perp = v - &cyl.v_ortho * (cyl.v_ortho.transpose() * v);
            if perp.norm() > EPS_METRIC * (1.0 + v.norm()) {
                return Ok(false);
            }
        }
        for v in &self.lattice_basis {
            if cyl.distance(&cyl.project(v)?, &zero) > EPS_METRIC * (1.0 + v.norm()) {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

fn rows(vs: &[DVector<f64>]) -> Vec<Vec<f64>> {
    vs.iter().map(|v| v.iter().copied().collect()).collect()
}

impl From<ClosedSubgroup> for SubgroupSpec {
    fn from(g: ClosedSubgroup) -> Self {
        SubgroupSpec {
            ambient_dim: g.ambient_dim,
            subspace_basis: rows(&g.subspace_basis),
            lattice_basis: rows(&g.lattice_basis),
        }
    }
}

impl TryFrom<SubgroupSpec> for ClosedSubgroup {
    type Error = Error;

    fn try_from(s: SubgroupSpec) -> Result<Self> {
        let to_vecs = |rows: Vec<Vec<f64>>| -> Vec<DVector<f64>> {
            rows.into_iter().map(DVector::from_vec).collect()
        };
        ClosedSubgroup::new(
            s.ambient_dim,
            to_vecs(s.subspace_basis),
            to_vecs(s.lattice_basis),
        )
    }
}

/// A point of a flat cylinder, stored by its canonical representative.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(transparent)]
pub struct CylinderPoint {
    #[serde(serialize_with = "ser_vec")]
    rep: DVector<f64>,
}

fn ser_vec<S: serde::Serializer>(v: &DVector<f64>, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.collect_seq(v.iter())
}

impl CylinderPoint {
    pub fn rep(&self) -> &DVector<f64> {
        &self.rep
    }

    pub fn to_vec(&self) -> Vec<f64> {
        self.rep.iter().copied().collect()
    }
}

/// A lift of a geodesic between two cylinder points: the straight segment in
/// `ℝⁿ` from `p.rep` to `p.rep + displacement`, where
/// `displacement = q.rep − p.rep − Σ cᵢ λᵢ`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GeodesicLift {
    #[serde(serialize_with = "ser_vec")]
    pub displacement: DVector<f64>,
    pub norm: f64,
    pub lattice_coeffs: Vec<i64>,
}

/// The quotient `ℝⁿ/H` with precomputed projection data.
#[derive(Clone, Debug)]
pub struct Cylinder {
    group: ClosedSubgroup,
    /// Orthonormal basis of `V`, as columns.
    v_ortho: DMatrix<f64>,
    /// Lattice basis projected off `V`, as columns.
    lattice: DMatrix<f64>,
    gram_inv: DMatrix<f64>,
    /// `G⁻¹ Bᵀ`: least-squares lattice coordinates.
    coords: DMatrix<f64>,
    inj_radius: ExtReal,
}

impl Cylinder {
    pub fn new(group: ClosedSubgroup) -> Result<Self> {
        let n = group.ambient_dim;
        let v_ortho = if group.subspace_basis.is_empty() {
            DMatrix::zeros(n, 0)
        } else {
            DMatrix::from_columns(&group.subspace_basis).qr().q()
        };
        let b = group.lattice_basis.len();
        let lattice = if b == 0 {
            DMatrix::zeros(n, 0)
        } else {
            let raw = DMatrix::from_columns(&group.lattice_basis);
            &raw - &v_ortho * (v_ortho.transpose() * &raw)
        };
        let gram = lattice.transpose() * &lattice;
        let gram_inv = if b == 0 {
            DMatrix::zeros(0, 0)
        } else {
            gram.clone().try_inverse().ok_or(Error::NotDiscrete)?
        };
        let coords = &gram_inv * lattice.transpose();
        let mut cyl = Self {
            group,
            v_ortho,
            lattice,
            gram_inv,
            coords,
            inj_radius: ExtReal::Infinite,
        };
        if b > 0 {
            let shortest = cyl.shortest_nonzero()?;
            cyl.inj_radius = ExtReal::Finite(0.5 * shortest);
        }
        Ok(cyl)
    }

    /// `ℝ / period·ℤ`.
    pub fn circle(period: f64) -> Result<Self> {
        Self::new(ClosedSubgroup::lattice(vec![DVector::from_element(1, period)])?)
    }

    /// Euclidean `ℝⁿ` viewed as a cylinder with trivial subgroup.
    pub fn euclidean(n: usize) -> Self {
        Self::new(ClosedSubgroup::trivial(n)).expect("trivial subgroup is valid")
    }

    pub fn group(&self) -> &ClosedSubgroup {
        &self.group
    }

    pub fn ambient_dim(&self) -> usize {
        self.group.ambient_dim
    }

    pub fn lattice_rank(&self) -> usize {
        self.lattice.ncols()
    }

    pub fn injectivity_radius(&self) -> ExtReal {
        self.inj_radius
    }

    /// Every pair of points is joined by exactly one minimizing geodesic only
    /// when there is no lattice part.
    pub fn is_uniquely_geodesic(&self) -> bool {
        self.lattice_rank() == 0
    }

    /// The covering projection `ℝⁿ → ℝⁿ/H`.
    pub fn project(&self, mu: &DVector<f64>) -> Result<CylinderPoint> {
        check_dim(self.ambient_dim(), mu.len())?;
        Ok(self.project_unchecked(mu))
    }

    pub fn project_slice(&self, mu: &[f64]) -> Result<CylinderPoint> {
        self.project(&DVector::from_row_slice(mu))
    }

    pub(crate) fn project_unchecked(&self, mu: &DVector<f64>) -> CylinderPoint {
        let mut perp = mu.clone();
        if self.v_ortho.ncols() > 0 {
            perp -= &self.v_ortho * (self.v_ortho.transpose() * mu);
        }
        if self.lattice.ncols() == 0 {
            return CylinderPoint { rep: perp };
        }
        let t = &self.coords * &perp;
        let off_lattice = &perp - &self.lattice * &t;
        let frac = t.map(|x| {
            let f = x - x.floor();
            if f >= 1.0 {
                0.0
            } else {
                f
            }
        });
        CylinderPoint {
            rep: &self.lattice * frac + off_lattice,
        }
    }

    /// Lattice coordinates of a representative (in `[0, 1)` for canonical ones).
    pub fn lattice_coords(&self, p: &CylinderPoint) -> DVector<f64> {
        &self.coords * &p.rep
    }

    /// Group operation on the cylinder.
    pub fn add(&self, p: &CylinderPoint, q: &CylinderPoint) -> CylinderPoint {
        self.project_unchecked(&(&p.rep + &q.rep))
    }

    pub fn sub(&self, p: &CylinderPoint, q: &CylinderPoint) -> CylinderPoint {
        self.project_unchecked(&(&p.rep - &q.rep))
    }

    /// `|d − Σ cᵢ λᵢ|`, accumulated in a fixed order.
    pub fn residual_norm(&self, d: &DVector<f64>, c: &[i64]) -> f64 {
        let mut r = d.clone();
        for (i, &ci) in c.iter().enumerate() {
            if ci != 0 {
                r.axpy(-(ci as f64), &self.lattice.column(i), 1.0);
            }
        }
        r.norm()
    }

    /// Least-squares real lattice coordinates of `d` and the rounded guess.
    fn center(&self, d: &DVector<f64>) -> (DVector<f64>, Vec<i64>) {
        let t = &self.coords * d;
        let c0 = t.iter().map(|x| x.round() as i64).collect();
        (t, c0)
    }

    /// All integer coefficient vectors `c` with `|d − Bc| ≤ radius`, via the box
    /// `|cᵢ − tᵢ| ≤ radius·√(G⁻¹)ᵢᵢ` around the least-squares solution `t`.
    fn enumerate_within(&self, d: &DVector<f64>, radius: f64) -> Vec<(Vec<i64>, f64)> {
        let b = self.lattice_rank();
        if b == 0 {
            let n = d.norm();
            return if n <= radius { vec![(Vec::new(), n)] } else { Vec::new() };
        }
        let (t, _) = self.center(d);
        let ranges: Vec<(i64, i64)> = (0..b)
            .map(|i| {
                let w = radius * self.gram_inv[(i, i)].sqrt() * (1.0 + 1e-9) + 1e-9;
                ((t[i] - w).ceil() as i64, (t[i] + w).floor() as i64)
            })
            .collect();
        let mut out = Vec::new();
        let mut c: Vec<i64> = ranges.iter().map(|r| r.0).collect();
        if ranges.iter().any(|r| r.0 > r.1) {
            return out;
        }
        loop {
            let n = self.residual_norm(d, &c);
            if n <= radius {
                out.push((c.clone(), n));
            }
            // odometer increment
            let mut i = 0;
            loop {
                if i == b {
                    return out;
                }
                c[i] += 1;
                if c[i] <= ranges[i].1 {
                    break;
                }
                c[i] = ranges[i].0;
                i += 1;
            }
        }
    }

    fn shortest_nonzero(&self) -> Result<f64> {
        let b = self.lattice_rank();
        let bound = (0..b)
            .map(|i| self.lattice.column(i).norm())
            .fold(f64::INFINITY, f64::min);
        if !(bound > 0.0) {
            return Err(Error::NotDiscrete);
        }
        let zero = DVector::zeros(self.ambient_dim());
        let best = self
            .enumerate_within(&zero, bound)
            .into_iter()
            .filter(|(c, _)| c.iter().any(|&x| x != 0))
            .map(|(_, n)| n)
            .fold(f64::INFINITY, f64::min);
        if !(best > EPS_METRIC) {
            return Err(Error::NotDiscrete);
        }
        Ok(best)
    }

    /// Minimal norm and coefficients of `d − Bc` over integer `c`.
    pub fn closest(&self, d: &DVector<f64>) -> (Vec<i64>, f64) {
        let (_, c0) = self.center(d);
        let r0 = self.residual_norm(d, &c0);
        let mut best = (c0, r0);
        for (c, n) in self.enumerate_within(d, r0) {
            if n < best.1 || (n == best.1 && c < best.0) {
                best = (c, n);
            }
        }
        best
    }

    /// The quotient distance `min_h |p − q − h|`.
    pub fn distance(&self, p: &CylinderPoint, q: &CylinderPoint) -> f64 {
        let d = &q.rep - &p.rep;
        self.closest(&d).1
    }

    fn lift_from(&self, p: &CylinderPoint, q: &CylinderPoint, c: Vec<i64>, norm: f64) -> GeodesicLift {
        let mut displacement = &q.rep - &p.rep;
        for (i, &ci) in c.iter().enumerate() {
            if ci != 0 {
                displacement.axpy(-(ci as f64), &self.lattice.column(i), 1.0);
            }
        }
        GeodesicLift {
            displacement,
            norm,
            lattice_coeffs: c,
        }
    }

    fn sort_lifts(lifts: &mut [GeodesicLift]) {
        lifts.sort_by(|a, b| {
            a.norm
                .total_cmp(&b.norm)
                .then_with(|| a.lattice_coeffs.cmp(&b.lattice_coeffs))
        });
    }

    /// Every lift whose length is within `eps_gap` of the minimum, sorted by
    /// `(norm, coefficients)`. A single entry means the minimizing geodesic is
    /// unique at this tolerance.
    pub fn enumerate_minimizing_lifts(
        &self,
        p: &CylinderPoint,
        q: &CylinderPoint,
        eps_gap: f64,
    ) -> Vec<GeodesicLift> {
        let d = &q.rep - &p.rep;
        let (_, min) = self.closest(&d);
        let mut lifts: Vec<_> = self
            .enumerate_within(&d, min + eps_gap)
            .into_iter()
            .map(|(c, n)| self.lift_from(p, q, c, n))
            .collect();
        Self::sort_lifts(&mut lifts);
        lifts
    }

    /// Lifts with coefficients in `c_min + [−half_width, half_width]ᵇ`, where
    /// `c_min` belongs to the first minimizing lift; sorted like
    /// [`Cylinder::enumerate_minimizing_lifts`].
    pub fn lifts_in_box(
        &self,
        p: &CylinderPoint,
        q: &CylinderPoint,
        half_width: i64,
    ) -> Vec<GeodesicLift> {
        let d = &q.rep - &p.rep;
        let (c_min, _) = self.closest(&d);
        let b = c_min.len();
        let side = (2 * half_width + 1) as usize;
        let total = side.pow(b as u32);
        let mut lifts = Vec::with_capacity(total);
        for idx in 0..total {
            let mut rem = idx;
            let c: Vec<i64> = c_min
                .iter()
                .map(|&c0| {
                    let off = (rem % side) as i64 - half_width;
                    rem /= side;
                    c0 + off
                })
                .collect();
            let n = self.residual_norm(&d, &c);
            lifts.push(self.lift_from(p, q, c, n));
        }
        Self::sort_lifts(&mut lifts);
        lifts
    }

    /// Projection of the straight segment along `lift`, sampled at `steps + 1`
    /// points.
    pub fn geodesic_polyline(
        &self,
        p: &CylinderPoint,
        lift: &GeodesicLift,
        steps: usize,
    ) -> Result<Polyline<CylinderPoint>> {
        if steps < 1 {
            return Err(Error::input("geodesic_polyline needs steps >= 1"));
        }
        check_dim(self.ambient_dim(), lift.displacement.len())?;
        let points = (0..=steps)
            .map(|s| {
                let t = s as f64 / steps as f64;
                self.project_unchecked(&(&p.rep + &lift.displacement * t))
            })
            .collect();
        Polyline::new(points)
    }

    /// Steps so that consecutive waypoints are at most `max_step` apart.
    pub fn steps_for(norm: f64, max_step: f64) -> usize {
        ((norm / max_step).ceil() as usize).max(1)
    }

    /// All minimizing geodesics between `p` and `q` as sampled polylines.
    pub fn minimizing_geodesics(
        &self,
        p: &CylinderPoint,
        q: &CylinderPoint,
        eps_gap: f64,
        max_step: f64,
    ) -> Vec<Polyline<CylinderPoint>> {
        self.enumerate_minimizing_lifts(p, q, eps_gap)
            .iter()
            .filter_map(|l| {
                self.geodesic_polyline(p, l, Self::steps_for(l.norm, max_step))
                    .ok()
            })
            .collect()
    }
}

impl MetricSpace for Cylinder {
    type Point = CylinderPoint;

    fn dist(&self, a: &CylinderPoint, b: &CylinderPoint) -> ExtReal {
        if a.rep.len() != b.rep.len() {
            return ExtReal::Infinite;
        }
        ExtReal::Finite(self.distance(a, b))
    }
}

/// Hash grid over canonical representatives for small-radius queries.
pub struct CylinderIndex<'a> {
    cyl: &'a Cylinder,
    points: &'a [CylinderPoint],
    cell: f64,
    cells: HashMap<Vec<i64>, Vec<usize>>,
    shifts: Vec<DVector<f64>>,
    /// Bounding box of the representatives, for pruning shifted queries.
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl<'a> CylinderIndex<'a> {
    pub fn new(cyl: &'a Cylinder, points: &'a [CylinderPoint], cell: f64) -> Self {
        let cell = if cell > 0.0 && cell.is_finite() { cell } else { 1.0 };
        let mut cells: HashMap<Vec<i64>, Vec<usize>> = HashMap::new();
        for (i, p) in points.iter().enumerate() {
            cells.entry(Self::key(&p.rep, cell)).or_default().push(i);
        }
        let b = cyl.lattice_rank();
        let shifts = (0..3usize.pow(b as u32))
            .map(|idx| {
                let mut rem = idx;
                let mut h = DVector::zeros(cyl.ambient_dim());
                for i in 0..b {
                    let c = (rem % 3) as f64 - 1.0;
                    rem /= 3;
                    h.axpy(c, &cyl.lattice.column(i), 1.0);
                }
                h
            })
            .collect();
        let n = cyl.ambient_dim();
        let mut lo = vec![f64::INFINITY; n];
        let mut hi = vec![f64::NEG_INFINITY; n];
        for p in points {
            for (j, &x) in p.rep.iter().enumerate() {
                lo[j] = lo[j].min(x);
                hi[j] = hi[j].max(x);
            }
        }
        Self {
            cyl,
            points,
            cell,
            cells,
            shifts,
            lo,
            hi,
        }
    }

    fn use_linear_scan(&self, r: f64) -> bool {
        let beyond_injectivity = match self.cyl.injectivity_radius() {
            ExtReal::Finite(inj) => r > 0.5 * inj,
            ExtReal::Infinite => false,
        };
        beyond_injectivity || (r / self.cell) > 8.0
    }

    /// Calls `visit(center, i)` for every point in a grid cell overlapping
    /// the box of half width `r` around some lattice shift of `q`.
    fn scan(&self, q: &CylinderPoint, r: f64, mut visit: impl FnMut(&DVector<f64>, usize)) {
        let n = self.cyl.ambient_dim();
        let mut key = vec![0i64; n];
        let mut lo = vec![0i64; n];
        let mut hi = vec![0i64; n];
        for h in &self.shifts {
            let center = &q.rep + h;
            if (0..n).any(|j| center[j] + r < self.lo[j] || center[j] - r > self.hi[j]) {
                continue;
            }
            for j in 0..n {
                lo[j] = ((center[j] - r) / self.cell).floor() as i64;
                hi[j] = ((center[j] + r) / self.cell).floor() as i64;
            }
            key.copy_from_slice(&lo);
            loop {
                if let Some(ids) = self.cells.get(&key) {
                    for &i in ids {
                        visit(&center, i);
                    }
                }
                let mut i = 0;
                while i < n {
                    key[i] += 1;
                    if key[i] <= hi[i] {
                        break;
                    }
                    key[i] = lo[i];
                    i += 1;
                }
                if i == n {
                    break;
                }
            }
        }
    }

    /// Distance from `q` to the nearest indexed point, if it is at most `r`.
    pub fn nearest(&self, q: &CylinderPoint, r: f64) -> Option<f64> {
        let best = if self.use_linear_scan(r) {
            self.points
                .iter()
                .map(|p| self.cyl.distance(q, p))
                .fold(f64::INFINITY, f64::min)
        } else {
            // below half the injectivity radius the shifted Euclidean
            // distance is the quotient distance
            let mut best = f64::INFINITY;
            self.scan(q, r, |center, i| {
                let d2: f64 = center
                    .iter()
                    .zip(self.points[i].rep.iter())
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum();
                best = best.min(d2);
            });
            best.sqrt()
        };
        (best <= r).then_some(best)
    }

    fn key(x: &DVector<f64>, cell: f64) -> Vec<i64> {
        x.iter().map(|v| (v / cell).floor() as i64).collect()
    }

    /// Indices of points within distance `r` of `q`, in increasing index order.
    pub fn within(&self, q: &CylinderPoint, r: f64) -> Vec<usize> {
        let mut out = Vec::new();
        if self.use_linear_scan(r) {
            for (i, p) in self.points.iter().enumerate() {
                if self.cyl.distance(q, p) <= r {
                    out.push(i);
                }
            }
            return out;
        }
        self.scan(q, r, |_, i| out.push(i));
        out.sort_unstable();
        out.dedup();
        out.retain(|&i| self.cyl.distance(q, &self.points[i]) <= r);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn v(xs: &[f64]) -> DVector<f64> {
        DVector::from_row_slice(xs)
    }

    fn circle() -> Cylinder {
        Cylinder::circle(2.0 * PI).unwrap()
    }

    #[test]
    fn project_examples() {
        let c = circle();
        let p = c.project(&v(&[7.0 * PI])).unwrap();
        assert!((p.rep()[0] - PI).abs() < 1e-12);

        let t = Cylinder::euclidean(2);
        let mu = v(&[1.5, -2.0]);
        assert_eq!(t.project(&mu).unwrap().rep(), &mu);

        let g = ClosedSubgroup::new(2, vec![v(&[1.0, 0.0])], vec![v(&[0.0, 1.0])]).unwrap();
        let c = Cylinder::new(g).unwrap();
        let p = c.project(&v(&[3.5, 2.25])).unwrap();
        assert!((p.rep() - v(&[0.0, 0.25])).norm() < 1e-12);

        assert!(matches!(
            c.project(&v(&[1.0])),
            Err(Error::DimensionMismatch { expected: 2, got: 1 })
        ));
    }

    #[test]
    fn canonical_coordinates_in_unit_interval() {
        let c = Cylinder::new(ClosedSubgroup::lattice(vec![v(&[1.0, 0.0]), v(&[0.5, 0.5])]).unwrap()).unwrap();
        for mu in [v(&[-3.2, 7.7]), v(&[-1e-17, 0.0]), v(&[100.25, -0.5])] {
            let p = c.project(&mu).unwrap();
            for t in c.lattice_coords(&p).iter() {
                assert!((-1e-12..1.0 + 1e-12).contains(t), "coordinate {t}");
            }
        }
    }

    #[test]
    fn distance_examples() {
        let c = circle();
        let p0 = c.project_slice(&[0.0]).unwrap();
        assert!((c.distance(&p0, &c.project_slice(&[PI]).unwrap()) - PI).abs() < 1e-12);
        assert!((c.distance(&p0, &c.project_slice(&[1.5 * PI]).unwrap()) - PI / 2.0).abs() < 1e-12);

        let c = Cylinder::new(ClosedSubgroup::lattice(vec![v(&[1.0, 0.0])]).unwrap()).unwrap();
        let d = c.distance(
            &c.project_slice(&[0.0, 0.0]).unwrap(),
            &c.project_slice(&[0.75, 1.0]).unwrap(),
        );
        assert!((d - 1.0625f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn lift_examples() {
        let c = circle();
        let p0 = c.project_slice(&[0.0]).unwrap();
        let lifts = c.enumerate_minimizing_lifts(&p0, &c.project_slice(&[PI]).unwrap(), DEFAULT_EPS_GAP);
        assert_eq!(lifts.len(), 2);
        assert!((lifts[0].displacement[0] - PI).abs() < 1e-12);
        assert!((lifts[1].displacement[0] + PI).abs() < 1e-12);

        let lifts = c.enumerate_minimizing_lifts(&p0, &c.project_slice(&[1.0]).unwrap(), DEFAULT_EPS_GAP);
        assert_eq!(lifts.len(), 1);
        assert!((lifts[0].displacement[0] - 1.0).abs() < 1e-12);

        let sq = Cylinder::new(
            ClosedSubgroup::lattice(vec![v(&[1.0, 0.0]), v(&[0.0, 1.0])]).unwrap(),
        )
        .unwrap();
        let lifts = sq.enumerate_minimizing_lifts(
            &sq.project_slice(&[0.0, 0.0]).unwrap(),
            &sq.project_slice(&[0.5, 0.5]).unwrap(),
            DEFAULT_EPS_GAP,
        );
        assert_eq!(lifts.len(), 4);
        for l in &lifts {
            assert!((l.displacement[0].abs() - 0.5).abs() < 1e-12);
            assert!((l.displacement[1].abs() - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn geodesic_polyline_examples() {
        let c = circle();
        let p0 = c.project_slice(&[0.0]).unwrap();
        let q = c.project_slice(&[1.0]).unwrap();
        let lift = &c.enumerate_minimizing_lifts(&p0, &q, DEFAULT_EPS_GAP)[0];
        let pl = c.geodesic_polyline(&p0, lift, 4).unwrap();
        let xs: Vec<f64> = pl.points().iter().map(|p| p.rep()[0]).collect();
        for (x, e) in xs.iter().zip([0.0, 0.25, 0.5, 0.75, 1.0]) {
            assert!((x - e).abs() < 1e-12);
        }

        let q = c.project_slice(&[PI]).unwrap();
        let lifts = c.enumerate_minimizing_lifts(&p0, &q, DEFAULT_EPS_GAP);
        let neg = lifts.iter().find(|l| l.displacement[0] < 0.0).unwrap();
        let pl = c.geodesic_polyline(&p0, neg, 2).unwrap();
        let xs: Vec<f64> = pl.points().iter().map(|p| p.rep()[0]).collect();
        assert!((xs[1] - 1.5 * PI).abs() < 1e-12);
        assert!((xs[2] - PI).abs() < 1e-12);
        assert!(c.geodesic_polyline(&p0, neg, 0).is_err());

        let e = Cylinder::euclidean(2);
        let a = e.project_slice(&[0.0, 0.0]).unwrap();
        let b = e.project_slice(&[2.0, 1.0]).unwrap();
        let l = &e.enumerate_minimizing_lifts(&a, &b, DEFAULT_EPS_GAP)[0];
        let pl = e.geodesic_polyline(&a, l, 2).unwrap();
        assert!((pl.points()[1].rep() - v(&[1.0, 0.5])).norm() < 1e-12);
    }

    #[test]
    fn injectivity_radius_examples() {
        assert_eq!(circle().injectivity_radius(), ExtReal::Finite(PI));
        assert_eq!(Cylinder::euclidean(3).injectivity_radius(), ExtReal::Infinite);
        let g = ClosedSubgroup::lattice(vec![v(&[1.0, 0.0]), v(&[0.5, 0.5])]).unwrap();
        let r = g.injectivity_radius().unwrap().unwrap_finite();
        assert!((r - 0.5 * 0.5f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn dependent_lattice_is_not_discrete() {
        let res = ClosedSubgroup::lattice(vec![v(&[1.0, 0.0]), v(&[2.0, 0.0])]);
        assert!(matches!(res, Err(Error::NotDiscrete)));
        let res = ClosedSubgroup::new(2, vec![v(&[1.0, 0.0])], vec![v(&[3.0, 0.0])]);
        assert!(matches!(res, Err(Error::NotDiscrete)));
    }

    #[test]
    fn cylinder_type_counts() {
        let g = ClosedSubgroup::new(3, vec![v(&[1.0, 0.0, 0.0])], vec![v(&[0.0, 1.0, 0.0])]).unwrap();
        assert_eq!(g.cylinder_type(), (1, 1));
    }

    #[test]
    fn subgroup_inclusion() {
        let fine = ClosedSubgroup::lattice(vec![v(&[2.0 * PI])]).unwrap();
        let coarse = ClosedSubgroup::lattice(vec![v(&[4.0 * PI])]).unwrap();
        assert!(coarse.is_subgroup_of(&fine).unwrap());
        assert!(!fine.is_subgroup_of(&coarse).unwrap());
    }

    #[test]
    fn subgroup_serde_round_trip() {
        let g = ClosedSubgroup::new(2, vec![v(&[1.0, 0.0])], vec![v(&[0.0, 1.0])]).unwrap();
        let s = serde_json::to_string(&g).unwrap();
        let back: ClosedSubgroup = serde_json::from_str(&s).unwrap();
        assert_eq!(g, back);
        let bad = r#"{"ambient_dim":1,"lattice_basis":[[1.0],[2.0]]}"#;
        assert!(serde_json::from_str::<ClosedSubgroup>(bad).is_err());
    }

    #[test]
    fn index_matches_linear_scan() {
        let c = Cylinder::new(ClosedSubgroup::lattice(vec![v(&[1.0, 0.0]), v(&[0.3, 0.9])]).unwrap()).unwrap();
        let pts: Vec<_> = (0..400)
            .map(|i| {
                let x = (i as f64 * 0.618_033_988_7).fract() * 3.0;
                let y = (i as f64 * 0.414_213_562).fract() * 3.0;
                c.project_slice(&[x, y]).unwrap()
            })
            .collect();
        let idx = CylinderIndex::new(&c, &pts, 0.05);
        for q in pts.iter().take(50) {
            let r = 0.07;
            let mut brute: Vec<usize> = (0..pts.len()).filter(|&i| c.distance(q, &pts[i]) <= r).collect();
            brute.sort_unstable();
            assert_eq!(idx.within(q, r), brute);
        }
        let probes: Vec<_> = (0..200)
            .map(|i| c.project_slice(&[(i as f64 * 0.377).fract() * 2.0, (i as f64 * 0.771).fract() * 2.0]).unwrap())
            .collect();
        for q in &probes {
            let r = 0.07;
            let brute = pts.iter().map(|p| c.distance(q, p)).fold(f64::INFINITY, f64::min);
            match idx.nearest(q, r) {
                Some(d) => assert!((d - brute).abs() < 1e-12),
                None => assert!(brute > r),
            }
        }
    }
}
