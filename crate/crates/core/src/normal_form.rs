//! Abelian local normal form of the momentum map.
//!
//! Near a point `m` the algebra splits as `𝔤 = 𝔤_m ⊕ 𝔪 ⊕ 𝔮`, where `𝔤_m` is
//! the isotropy algebra, `𝔨 = 𝔤_m ⊕ 𝔪` is the kernel of the Chu form and `𝔮`
//! is a complement on which the Chu form is nondegenerate. In slice
//! coordinates `(g, ρ, v)` the momentum map reads
//!
//! `J_U(g, ρ, v) = J_V(v) + ρ − ⟨P_𝔮 g, ·⟩_𝔮`,
//!
//! where `J_V` is the quadratic momentum map of the isotropy representation on
//! the symplectic slice `V`. As a covector, `−⟨P_𝔮 g, ·⟩_𝔮` has coordinates
//! `chu_q · P_𝔮 g` in the dual of the `𝔮` basis.

use nalgebra::{Complex, DMatrix, DVector};

use serde::Serialize;

use crate::error::{check_dim, Error, Result};
use crate::harness::{build_fiber_quotient, check_local_conditions, LocalOptions, PassCounts, SampledMap};
use crate::holonomy::MomentumMap;
use crate::mesh::{action_angle_mesh, box_mesh, product_mesh};
use crate::metric::EPS_METRIC;
use crate::model::{ModelPoint, SymplecticModel};

const RANK_TOL: f64 = 1e-9;

/// Diagonal torus action on `ℂⁿ` with weights `αⱼ ∈ ℝᵏ`.
#[derive(Clone, Debug, PartialEq)]
pub struct TorusRepresentation {
    weights: Vec<DVector<f64>>,
}

impl TorusRepresentation {
    pub fn new(weights: Vec<DVector<f64>>) -> Result<Self> {
        let k = weights
            .first()
            .map(|w| w.len())
            .ok_or_else(|| Error::input("a representation needs at least one weight"))?;
        for w in &weights {
            check_dim(k, w.len())?;
            if w.iter().any(|x| !x.is_finite()) {
                return Err(Error::input("weights must be finite"));
            }
        }
        Ok(Self { weights })
    }

    pub fn complex_dim(&self) -> usize {
        self.weights.len()
    }

    pub fn algebra_dim(&self) -> usize {
        self.weights[0].len()
    }

    pub fn weights(&self) -> &[DVector<f64>] {
        &self.weights
    }

    /// `e^{i⟨αⱼ, θ⟩} zⱼ`.
    pub fn act(&self, theta: &DVector<f64>, z: &[Complex<f64>]) -> Vec<Complex<f64>> {
        self.weights
            .iter()
            .zip(z)
            .map(|(w, zj)| zj * Complex::from_polar(1.0, w.dot(theta)))
            .collect()
    }
}

/// `J_V(z) = ½ Σⱼ |zⱼ|² αⱼ`.
pub fn rep_momentum(rep: &TorusRepresentation, z: &[Complex<f64>]) -> Result<DVector<f64>> {
    check_dim(rep.complex_dim(), z.len())?;
    Ok(rep
        .weights
        .iter()
        .zip(z)
        .fold(DVector::zeros(rep.algebra_dim()), |acc, (w, zj)| acc + w * (0.5 * zj.norm_sqr())))
}

/// Image of the ball of the given radius: `{½ Σ tⱼ αⱼ : tⱼ ≥ 0, Σ tⱼ ≤ r²}`,
/// sampled on a simplex grid with `samples` subdivisions per edge.
pub fn rep_image_cone(rep: &TorusRepresentation, radius: f64, samples: usize) -> Result<Vec<DVector<f64>>> {
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::input(format!("radius must be positive, got {radius}")));
    }
    let samples = samples.max(1);
    let n = rep.complex_dim();
    let r2 = radius * radius;
    let mut out = Vec::new();
    let mut idx = vec![0usize; n];
    loop {
        let t: Vec<f64> = idx.iter().map(|&i| r2 * i as f64 / samples as f64).collect();
        out.push(
            rep.weights
                .iter()
                .zip(&t)
                .fold(DVector::zeros(rep.algebra_dim()), |acc, (w, tj)| acc + w * (0.5 * tj)),
        );
        // next composition with sum ≤ samples
        let mut pos = 0;
        loop {
            if pos == n {
                return Ok(out);
            }
            idx[pos] += 1;
            if idx.iter().sum::<usize>() <= samples {
                break;
            }
            idx[pos] = 0;
            pos += 1;
        }
    }
}

/// Orthonormal basis (columns) of the null space of `a`.
pub(crate) fn null_space(a: &DMatrix<f64>, cols: usize) -> DMatrix<f64> {
    if a.nrows() == 0 {
        return DMatrix::identity(cols, cols);
    }
    let ata = a.tr_mul(a);
    let scale = ata.amax().max(1.0);
    let eig = ata.symmetric_eigen();
    let keep: Vec<_> = (0..cols)
        .filter(|&i| eig.eigenvalues[i].abs() <= RANK_TOL * scale)
        .map(|i| eig.eigenvectors.column(i).into_owned())
        .collect();
    from_columns(&keep, cols)
}

fn from_columns(cols: &[DVector<f64>], rows: usize) -> DMatrix<f64> {
    if cols.is_empty() {
        DMatrix::zeros(rows, 0)
    } else {
        DMatrix::from_columns(cols)
    }
}

/// Orthonormal basis of the column space of `a`.
fn range(a: &DMatrix<f64>) -> DMatrix<f64> {
    let rows = a.nrows();
    if a.ncols() == 0 {
        return DMatrix::zeros(rows, 0);
    }
    let aat = a * a.transpose();
    let scale = aat.amax().max(1.0);
    let eig = aat.symmetric_eigen();
    let keep: Vec<_> = (0..rows)
        .filter(|&i| eig.eigenvalues[i].abs() > RANK_TOL * scale)
        .map(|i| eig.eigenvectors.column(i).into_owned())
        .collect();
    from_columns(&keep, rows)
}

/// Orthonormal complement of `range(s)` inside the subspace with orthonormal
/// basis `t`.
fn complement_in(s: &DMatrix<f64>, t: &DMatrix<f64>) -> DMatrix<f64> {
    if t.ncols() == 0 {
        return t.clone();
    }
    let r = range(s);
    if r.ncols() == 0 {
        return t.clone();
    }
    let inner = null_space(&(r.transpose() * t), t.ncols());
    t * inner
}

/// `𝔤 = 𝔤_m ⊕ 𝔪 ⊕ 𝔮` with bases as columns of `k`-row matrices and the
/// Chu form restricted to `𝔮`.
#[derive(Clone, Debug, PartialEq)]
pub struct SliceSplitting {
    basis_gm: DMatrix<f64>,
    basis_m: DMatrix<f64>,
    basis_q: DMatrix<f64>,
    chu_q: DMatrix<f64>,
}

impl SliceSplitting {
    pub fn new(
        basis_gm: DMatrix<f64>,
        basis_m: DMatrix<f64>,
        basis_q: DMatrix<f64>,
        chu_q: DMatrix<f64>,
    ) -> Result<Self> {
        let k = basis_gm.nrows();
        check_dim(k, basis_m.nrows())?;
        check_dim(k, basis_q.nrows())?;
        check_dim(k, basis_gm.ncols() + basis_m.ncols() + basis_q.ncols())?;
        let dq = basis_q.ncols();
        if chu_q.nrows() != dq || chu_q.ncols() != dq {
            return Err(Error::input("chu_q must be square of size dim q"));
        }
        if (&chu_q + chu_q.transpose()).amax() > 1e-12 * chu_q.amax().max(1.0) {
            return Err(Error::input("chu_q is not antisymmetric"));
        }
        if dq > 0 && chu_q.determinant().abs() <= EPS_METRIC {
            return Err(Error::input("chu_q is degenerate"));
        }
        let mut all = DMatrix::zeros(k, k);
        all.columns_mut(0, basis_gm.ncols()).copy_from(&basis_gm);
        all.columns_mut(basis_gm.ncols(), basis_m.ncols()).copy_from(&basis_m);
        all.columns_mut(k - dq, dq).copy_from(&basis_q);
        if k > 0 && all.rank(RANK_TOL) < k {
            return Err(Error::input("splitting bases do not span the algebra"));
        }
        Ok(Self {
            basis_gm,
            basis_m,
            basis_q,
            chu_q,
        })
    }

    /// Coordinate splitting: the first `d_gm` basis vectors span `𝔤_m`, the
    /// next `d_m` span `𝔪` and the rest span `𝔮`.
    pub fn standard(d_gm: usize, d_m: usize, chu_q: DMatrix<f64>) -> Result<Self> {
        let k = d_gm + d_m + chu_q.nrows();
        let id = DMatrix::<f64>::identity(k, k);
        Self::new(
            id.columns(0, d_gm).into_owned(),
            id.columns(d_gm, d_m).into_owned(),
            id.columns(d_gm + d_m, k - d_gm - d_m).into_owned(),
            chu_q,
        )
    }

    /// `(dim 𝔤_m, dim 𝔪, dim 𝔮)`.
    pub fn dims(&self) -> (usize, usize, usize) {
        (self.basis_gm.ncols(), self.basis_m.ncols(), self.basis_q.ncols())
    }

    pub fn algebra_dim(&self) -> usize {
        self.basis_gm.nrows()
    }

    pub fn basis_gm(&self) -> &DMatrix<f64> {
        &self.basis_gm
    }

    pub fn basis_m(&self) -> &DMatrix<f64> {
        &self.basis_m
    }

    pub fn basis_q(&self) -> &DMatrix<f64> {
        &self.basis_q
    }

    pub fn chu_q(&self) -> &DMatrix<f64> {
        &self.chu_q
    }

    /// Assembles `(J_V, ρ, chu_q · P_𝔮 g)` into a covector on `𝔤`, using the
    /// dual bases of the three factors.
    pub fn assemble(&self, jv: &DVector<f64>, rho: &DVector<f64>, g_coord: &DVector<f64>) -> Result<DVector<f64>> {
        let (dgm, dm, _) = self.dims();
        check_dim(dgm, jv.len())?;
        check_dim(dm, rho.len())?;
        check_dim(self.algebra_dim(), g_coord.len())?;
        let all = self.all_bases();
        let dual = all
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::input("splitting bases do not span the algebra"))?
            .transpose();
        let pq = self.q_coords(g_coord, &all)?;
        let mut coords = DVector::zeros(self.algebra_dim());
        coords.rows_mut(0, dgm).copy_from(jv);
        coords.rows_mut(dgm, dm).copy_from(rho);
        let q_part = &self.chu_q * pq;
        coords.rows_mut(dgm + dm, q_part.len()).copy_from(&q_part);
        Ok(dual * coords)
    }

    fn all_bases(&self) -> DMatrix<f64> {
        let k = self.algebra_dim();
        let (dgm, dm, dq) = self.dims();
        let mut all = DMatrix::zeros(k, k);
        all.columns_mut(0, dgm).copy_from(&self.basis_gm);
        all.columns_mut(dgm, dm).copy_from(&self.basis_m);
        all.columns_mut(dgm + dm, dq).copy_from(&self.basis_q);
        all
    }

    /// Coordinates of the `𝔮` component of `g` in the `𝔮` basis.
    fn q_coords(&self, g: &DVector<f64>, all: &DMatrix<f64>) -> Result<DVector<f64>> {
        let (dgm, dm, dq) = self.dims();
        let coeffs = all
            .clone()
            .lu()
            .solve(g)
            .ok_or_else(|| Error::input("splitting bases do not span the algebra"))?;
        Ok(coeffs.rows(dgm + dm, dq).into_owned())
    }
}

/// `J_U(g, ρ, z) = J_V(z) + ρ − ⟨P_𝔮 g, ·⟩_𝔮`, with the representation's
/// weights expressed in the `𝔤_m` basis of `split`.
pub fn local_normal_form(
    split: &SliceSplitting,
    rep: &TorusRepresentation,
    g_coord: &DVector<f64>,
    rho: &DVector<f64>,
    z: &[Complex<f64>],
) -> Result<DVector<f64>> {
    check_dim(split.dims().0, rep.algebra_dim())?;
    split.assemble(&rep_momentum(rep, z)?, rho, g_coord)
}

/// Slice coordinates around a point of a model: the splitting at `m`, a
/// symplectic slice `V` and a complement `W ≅ 𝔪*`.
#[derive(Clone, Debug)]
pub struct SliceChart {
    point: DVector<f64>,
    splitting: SliceSplitting,
    /// Orthonormal basis of `V` (columns).
    v_basis: DMatrix<f64>,
    /// Basis of `W`, normalised so that `ω(ξ_{𝔪,i}(m), w_j) = δ_ij`.
    w_basis: DMatrix<f64>,
}

impl SliceChart {
    pub fn at(model: &SymplecticModel, m: &ModelPoint) -> Result<Self> {
        let x = m.coords().clone();
        let k = model.algebra_dim();
        let dim = model.dim();
        let fields = DMatrix::from_columns(&(0..k).map(|i| model.generator_field(&x, i)).collect::<Vec<_>>());
        let psi = model.chu_map(m).matrix;
        let gm = null_space(&fields, k);
        let kern = null_space(&psi, k);
        let basis_m = complement_in(&gm, &kern);
        let basis_q = complement_in(&kern, &DMatrix::identity(k, k));
        let chu_q = basis_q.transpose() * &psi * &basis_q;
        let splitting = SliceSplitting::new(gm, basis_m, basis_q, chu_q)?;

        let omega = model.omega();
        // (g·m)^ω = {u : ξ(m)ᵀ Ω u = 0 for all ξ}
        let g_orth = null_space(&(fields.transpose() * omega), dim);
        let k_dot_m = &fields * &kern;
        let v_basis = complement_in(&k_dot_m, &g_orth);
        let q_dot_m = &fields * splitting.basis_q();
        let q_orth = null_space(&(q_dot_m.transpose() * omega), dim);
        let mut kv = DMatrix::zeros(dim, k_dot_m.ncols() + v_basis.ncols());
        kv.columns_mut(0, k_dot_m.ncols()).copy_from(&k_dot_m);
        kv.columns_mut(k_dot_m.ncols(), v_basis.ncols()).copy_from(&v_basis);
        let w_raw = complement_in(&kv, &q_orth);
        let m_dot_m = &fields * splitting.basis_m();
        check_dim(m_dot_m.ncols(), w_raw.ncols())?;
        let pairing = m_dot_m.transpose() * omega * &w_raw;
        let w_basis = if pairing.nrows() == 0 {
            w_raw
        } else {
            let inv = pairing
                .try_inverse()
                .ok_or_else(|| Error::input("slice complement does not pair with the m directions"))?;
            w_raw * inv
        };
        Ok(Self {
            point: x,
            splitting,
            v_basis,
            w_basis,
        })
    }

    pub fn splitting(&self) -> &SliceSplitting {
        &self.splitting
    }

    pub fn point(&self) -> &DVector<f64> {
        &self.point
    }

    pub fn slice_dim(&self) -> usize {
        self.v_basis.ncols()
    }

    pub fn v_basis(&self) -> &DMatrix<f64> {
        &self.v_basis
    }

    pub fn w_basis(&self) -> &DMatrix<f64> {
        &self.w_basis
    }

    /// `Φ_g(m + W ρ + V v)` in lifted coordinates.
    pub fn chart_point(&self, model: &SymplecticModel, g: &DVector<f64>, rho: &DVector<f64>, v: &DVector<f64>) -> Result<DVector<f64>> {
        check_dim(model.algebra_dim(), g.len())?;
        check_dim(self.w_basis.ncols(), rho.len())?;
        check_dim(self.v_basis.ncols(), v.len())?;
        let base = &self.point + &self.w_basis * rho + &self.v_basis * v;
        Ok(model.act_lifted(g, &base))
    }

    /// Quadratic momentum map of the isotropy action on `V`:
    /// `⟨J_V(v), η⟩ = ½ ω(η·v, v)` for `η` in the `𝔤_m` basis.
    pub fn slice_momentum(&self, model: &SymplecticModel, v: &DVector<f64>) -> Result<DVector<f64>> {
        check_dim(self.v_basis.ncols(), v.len())?;
        let u = &self.v_basis * v;
        let gm = self.splitting.basis_gm();
        Ok(DVector::from_fn(gm.ncols(), |a, _| {
            let lin = model
                .linear_parts()
                .iter()
                .enumerate()
                .fold(DMatrix::zeros(model.dim(), model.dim()), |acc, (i, ai)| acc + ai * gm[(i, a)]);
            0.5 * (lin * &u).dot(&(model.omega() * &u))
        }))
    }

    /// `J_U` in this chart.
    pub fn local_value(&self, model: &SymplecticModel, g: &DVector<f64>, rho: &DVector<f64>, v: &DVector<f64>) -> Result<DVector<f64>> {
        self.splitting.assemble(&self.slice_momentum(model, v)?, rho, g)
    }
}

/// Fit of `lifted K = J_U + c` over a chart mesh.
#[derive(Clone, Debug)]
pub struct ConsistencyReport {
    pub constant: DVector<f64>,
    pub max_residual: f64,
    pub samples: usize,
}

/// Evaluates lifted `K` and `J_U` on a grid of `steps + 1` values per chart
/// coordinate in `[−half_width, half_width]`, fits the constant `c` by least
/// squares (the mean difference) and reports the largest residual.
pub fn consistency_check(
    k: &MomentumMap,
    chart: &SliceChart,
    half_width: f64,
    steps: usize,
) -> Result<ConsistencyReport> {
    let model = k.model();
    let ka = model.algebra_dim();
    let dm = chart.w_basis.ncols();
    let dv = chart.v_basis.ncols();
    let total = ka + dm + dv;
    let steps = steps.max(1);
    let count = (steps + 1).checked_pow(total as u32).filter(|&c| c <= 2_000_000).ok_or_else(|| {
        Error::input("consistency mesh too large; reduce steps")
    })?;
    let coord = |i: usize| -half_width + 2.0 * half_width * i as f64 / steps as f64;
    let mut diffs = Vec::with_capacity(count);
    for flat in 0..count {
        let mut rem = flat;
        let mut c = DVector::zeros(total);
        for j in 0..total {
            c[j] = coord(rem % (steps + 1));
            rem /= steps + 1;
        }
        let g = c.rows(0, ka).into_owned();
        let rho = c.rows(ka, dm).into_owned();
        let v = c.rows(ka + dm, dv).into_owned();
        let x = chart.chart_point(model, &g, &rho, &v)?;
        diffs.push(k.lift_value(&x) - chart.local_value(model, &g, &rho, &v)?);
    }
    let constant = diffs.iter().fold(DVector::zeros(ka), |a, d| a + d) / diffs.len() as f64;
    let max_residual = diffs.iter().map(|d| (d - &constant).amax()).fold(0.0, f64::max);
    Ok(ConsistencyReport {
        constant,
        max_residual,
        samples: diffs.len(),
    })
}

/// Aggregated local-condition verdicts on one sampled map.
#[derive(Clone, Debug, Serialize)]
pub struct LocalFlags {
    pub lfc: bool,
    pub loi: bool,
    pub lcd: bool,
    pub counts: PassCounts,
}

impl LocalFlags {
    pub fn all(&self) -> bool {
        self.lfc && self.loi && self.lcd
    }

    fn of(map: &SampledMap) -> Result<Self> {
        let q = build_fiber_quotient(map, map.default_eps_fiber(), None)?;
        let report = check_local_conditions(map, &q, &LocalOptions::default())?;
        let counts = report.counts();
        Ok(Self {
            lfc: counts.lfc == counts.checked,
            loi: counts.loi == counts.checked,
            lcd: counts.lcd == counts.checked,
            counts,
        })
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct LocalPropertiesReport {
    /// `("g_m", …)`, `("m", …)` and `("q", …)` for the nonzero factors.
    pub factors: Vec<(String, LocalFlags)>,
    pub product: LocalFlags,
}

impl LocalPropertiesReport {
    pub fn all(&self) -> bool {
        self.product.all() && self.factors.iter().all(|(_, f)| f.all())
    }
}

/// Samples `J_U` over a neighbourhood of the origin (action-angle mesh on the
/// slice, boxes on `𝔪*` and `𝔮`) and runs the local-condition checks on each
/// factor and on the product map.
pub fn check_local_properties(
    split: &SliceSplitting,
    rep: Option<&TorusRepresentation>,
    half_width: f64,
    resolution: usize,
) -> Result<LocalPropertiesReport> {
    let (dgm, dm, dq) = split.dims();
    let rep = match (dgm, rep) {
        (0, _) => None,
        (_, Some(r)) => {
            check_dim(dgm, r.algebra_dim())?;
            Some(r)
        }
        (_, None) => return Err(Error::input("a representation is required when g_m is nonzero")),
    };
    let to_complex = |x: &DVector<f64>| -> Vec<Complex<f64>> {
        (0..x.len() / 2).map(|j| Complex::new(x[2 * j], x[2 * j + 1])).collect()
    };
    let mut factors = Vec::new();
    let slice_mesh = match rep {
        Some(r) => {
            let mesh = action_angle_mesh(r.complex_dim(), half_width, resolution, 8)?;
            let vals = mesh
                .points
                .iter()
                .map(|x| rep_momentum(r, &to_complex(x)))
                .collect::<Result<Vec<_>>>()?;
            let map = SampledMap::euclidean(mesh.points.clone(), &mesh.edges, vals)?.with_boundary(mesh.boundary.clone())?;
            factors.push(("g_m".to_string(), LocalFlags::of(&map)?));
            mesh
        }
        None => box_mesh(0, half_width, resolution)?,
    };
    let m_mesh = box_mesh(dm, half_width, resolution)?;
    if dm > 0 {
        let map = SampledMap::euclidean(m_mesh.points.clone(), &m_mesh.edges, m_mesh.points.clone())?
            .with_boundary(m_mesh.boundary.clone())?;
        factors.push(("m".to_string(), LocalFlags::of(&map)?));
    }
    let q_mesh = box_mesh(dq, half_width, resolution)?;
    if dq > 0 {
        let vals = q_mesh.points.iter().map(|a| split.chu_q() * a).collect();
        let map = SampledMap::euclidean(q_mesh.points.clone(), &q_mesh.edges, vals)?.with_boundary(q_mesh.boundary.clone())?;
        factors.push(("q".to_string(), LocalFlags::of(&map)?));
    }
    let mesh = product_mesh(&product_mesh(&slice_mesh, &m_mesh), &q_mesh);
    let sd = slice_mesh.points[0].len();
    let vals = mesh
        .points
        .iter()
        .map(|x| {
            let jv = match rep {
                Some(r) => rep_momentum(r, &to_complex(&x.rows(0, sd).into_owned()))?,
                None => DVector::zeros(0),
            };
            let rho = x.rows(sd, dm).into_owned();
            let g = split.basis_q() * x.rows(sd + dm, dq);
            split.assemble(&jv, &rho, &g)
        })
        .collect::<Result<Vec<_>>>()?;
    let map = SampledMap::euclidean(mesh.points.clone(), &mesh.edges, vals)?.with_boundary(mesh.boundary.clone())?;
    Ok(LocalPropertiesReport {
        factors,
        product: LocalFlags::of(&map)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::TAU;

    fn v(xs: &[f64]) -> DVector<f64> {
        DVector::from_row_slice(xs)
    }

    fn c(re: f64, im: f64) -> Complex<f64> {
        Complex::new(re, im)
    }

    fn std_omega() -> DMatrix<f64> {
        DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0])
    }

    #[test]
    fn rep_momentum_examples() {
        let one = TorusRepresentation::new(vec![v(&[1.0])]).unwrap();
        assert_eq!(rep_momentum(&one, &[c(0.0, 0.0)]).unwrap()[0], 0.0);
        assert!((rep_momentum(&one, &[c(1.0, 1.0)]).unwrap()[0] - 1.0).abs() < 1e-15);
        let two = TorusRepresentation::new(vec![v(&[1.0, 0.0]), v(&[0.0, 1.0])]).unwrap();
        let j = rep_momentum(&two, &[c(1.0, 1.0), c(2f64.sqrt(), 0.0)]).unwrap();
        assert!((j - v(&[1.0, 1.0])).norm() < 1e-15);
    }

    #[test]
    fn rep_momentum_is_invariant() {
        let rep = TorusRepresentation::new(vec![v(&[1.0, 2.0]), v(&[-1.0, 0.5])]).unwrap();
        let z = [c(0.3, -0.2), c(1.1, 0.4)];
        let moved = rep.act(&v(&[0.7, -1.9]), &z);
        let a = rep_momentum(&rep, &z).unwrap();
        let b = rep_momentum(&rep, &moved).unwrap();
        assert!((a - b).norm() < 1e-14);
    }

    #[test]
    fn rep_momentum_directional_derivative() {
        let rep = TorusRepresentation::new(vec![v(&[1.0]), v(&[-2.0])]).unwrap();
        let z = [c(0.3, 0.1), c(-0.5, 0.7)];
        let u = [c(0.2, -0.4), c(1.0, 0.3)];
        // derivative of ½|z + t u|² at t = 0 is Re(z̄ u)
        let exact: f64 = rep
            .weights()
            .iter()
            .zip(z.iter().zip(&u))
            .map(|(w, (zj, uj))| w[0] * (zj.conj() * uj).re)
            .sum();
        let t = 1e-6;
        let zt: Vec<_> = z.iter().zip(&u).map(|(a, b)| a + b * t).collect();
        let fd = (rep_momentum(&rep, &zt).unwrap()[0] - rep_momentum(&rep, &z).unwrap()[0]) / t;
        assert!((fd - exact).abs() < 1e-5);
    }

    #[test]
    fn image_cone_examples() {
        let r = 1.5;
        let opposite = TorusRepresentation::new(vec![v(&[1.0]), v(&[-1.0])]).unwrap();
        let pts = rep_image_cone(&opposite, r, 10).unwrap();
        let min = pts.iter().map(|p| p[0]).fold(f64::INFINITY, f64::min);
        let max = pts.iter().map(|p| p[0]).fold(f64::NEG_INFINITY, f64::max);
        assert!((min + r * r / 2.0).abs() < 1e-12 && (max - r * r / 2.0).abs() < 1e-12);

        let diag = TorusRepresentation::new(vec![v(&[1.0, 1.0])]).unwrap();
        for p in rep_image_cone(&diag, r, 7).unwrap() {
            assert_eq!(p[0], p[1]);
        }

        let tri = TorusRepresentation::new(vec![v(&[1.0, 0.0]), v(&[0.0, 1.0])]).unwrap();
        let pts = rep_image_cone(&tri, 1.0, 8).unwrap();
        assert_eq!(pts.len(), 45);
        for p in &pts {
            assert!(p[0] >= 0.0 && p[1] >= 0.0 && p[0] + p[1] <= 0.5 + 1e-12);
        }
        assert!(rep_image_cone(&tri, 0.0, 8).is_err());
    }

    #[test]
    fn local_normal_form_examples() {
        let split = SliceSplitting::standard(0, 0, std_omega()).unwrap();
        let rep = TorusRepresentation::new(vec![DVector::zeros(0)]).unwrap();
        assert_eq!(local_normal_form(&split, &rep, &v(&[0.0, 0.0]), &v(&[]), &[c(0.0, 0.0)]).unwrap(), v(&[0.0, 0.0]));
        // the covector −⟨(1, 0), ·⟩_q has coordinates chu_q · (1, 0)ᵀ = (0, −1)
        let out = local_normal_form(&split, &rep, &v(&[1.0, 0.0]), &v(&[]), &[c(0.0, 0.0)]).unwrap();
        assert_eq!(out, v(&[0.0, -1.0]));

        let pure_m = SliceSplitting::standard(0, 2, DMatrix::zeros(0, 0)).unwrap();
        let out = local_normal_form(&pure_m, &rep, &v(&[0.3, 0.4]), &v(&[1.5, -2.0]), &[c(1.0, 0.0)]).unwrap();
        assert_eq!(out, v(&[1.5, -2.0]));
    }

    #[test]
    fn local_properties_examples() {
        let trivial = SliceSplitting::standard(0, 2, DMatrix::zeros(0, 0)).unwrap();
        assert!(check_local_properties(&trivial, None, 1.0, 6).unwrap().all());

        let split = SliceSplitting::standard(1, 0, DMatrix::zeros(0, 0)).unwrap();
        let rep = TorusRepresentation::new(vec![v(&[1.0]), v(&[-1.0])]).unwrap();
        let r = check_local_properties(&split, Some(&rep), 1.0, 6).unwrap();
        assert!(r.all(), "{:?}", r);

        let q_only = SliceSplitting::standard(0, 0, std_omega()).unwrap();
        assert!(check_local_properties(&q_only, None, 1.0, 6).unwrap().all());
        assert!(check_local_properties(&split, None, 1.0, 6).is_err());
    }

    #[test]
    fn splitting_validation() {
        assert!(SliceSplitting::standard(0, 0, DMatrix::zeros(2, 2)).is_err());
        assert!(SliceSplitting::standard(0, 0, DMatrix::identity(2, 2)).is_err());
        let id = DMatrix::<f64>::identity(2, 2);
        let dup = SliceSplitting::new(
            id.columns(0, 1).into_owned(),
            id.columns(0, 1).into_owned(),
            DMatrix::zeros(2, 0),
            DMatrix::zeros(0, 0),
        );
        assert!(dup.is_err());
    }

    #[test]
    fn chart_on_standard_torus() {
        let model = SymplecticModel::new(
            std_omega(),
            vec![Some(TAU), Some(TAU)],
            DMatrix::from_row_slice(1, 2, &[1.0, 0.0]),
        )
        .unwrap();
        let m = model.point_slice(&[1.0, 2.0]).unwrap();
        let chart = SliceChart::at(&model, &m).unwrap();
        assert_eq!(chart.splitting().dims(), (0, 1, 0));
        assert_eq!(chart.slice_dim(), 0);
        let k = MomentumMap::new(model).unwrap();
        let rep = consistency_check(&k, &chart, 0.5, 8).unwrap();
        assert!(rep.max_residual < 1e-12);
        assert!((rep.constant[0] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn chart_on_translation_torus() {
        let model = SymplecticModel::new(std_omega(), vec![Some(TAU), Some(TAU)], DMatrix::identity(2, 2)).unwrap();
        let m = model.point_slice(&[0.5, 0.5]).unwrap();
        let chart = SliceChart::at(&model, &m).unwrap();
        assert_eq!(chart.splitting().dims(), (0, 0, 2));
        let k = MomentumMap::new(model).unwrap();
        let rep = consistency_check(&k, &chart, 0.5, 6).unwrap();
        assert!(rep.max_residual < 1e-12, "{}", rep.max_residual);
    }

    #[test]
    fn chart_at_fixed_point_of_representation() {
        let model =
            SymplecticModel::linear_representation(&[v(&[1.0, 0.0]), v(&[0.0, 1.0])]).unwrap();
        let m = model.point_slice(&[0.0; 4]).unwrap();
        let chart = SliceChart::at(&model, &m).unwrap();
        assert_eq!(chart.splitting().dims(), (2, 0, 0));
        assert_eq!(chart.slice_dim(), 4);
        let k = MomentumMap::new(model).unwrap();
        let rep = consistency_check(&k, &chart, 0.5, 3).unwrap();
        assert!(rep.max_residual < 1e-12, "{}", rep.max_residual);
        assert!(rep.constant.norm() < 1e-12);
    }

    #[test]
    fn differential_at_origin_matches_tangent_map() {
        let model = SymplecticModel::new(
            std_omega(),
            vec![Some(TAU), Some(TAU)],
            DMatrix::from_row_slice(1, 2, &[1.0, 0.0]),
        )
        .unwrap();
        let m = model.point_slice(&[0.2, 0.9]).unwrap();
        let chart = SliceChart::at(&model, &m).unwrap();
        let t = crate::holonomy::tangent_matrix(&model, &m);
        // chart directions: g moves along ξ(m), ρ along W
        let dg = &t * model.generator_field(m.coords(), 0);
        let drho = &t * chart.w_basis().column(0);
        let h = 1e-3;
        let ju = |g: f64, r: f64| chart.local_value(&model, &v(&[g]), &v(&[r]), &v(&[])).unwrap();
        assert!(((ju(h, 0.0) - ju(0.0, 0.0)) / h - dg).norm() < 1e-12);
        assert!(((ju(0.0, h) - ju(0.0, 0.0)) / h - drho).norm() < 1e-9);
    }
}
