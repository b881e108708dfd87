//! Flat symplectic models with Abelian symmetry.
//!
//! A model is `ℝ^{2n}` with some coordinates made periodic (a torus, a
//! cylinder or a vector space), a constant symplectic matrix `Ω` with
//! `ω(u, v) = uᵀ Ω v`, and `k` commuting infinitesimal generators. Each
//! generator is an affine field `ξᵢ(m) = cᵢ + Aᵢ m`; on tori only the constant
//! part may be nonzero, and on vector spaces `Aᵢ` gives linear actions such as
//! torus representations on `ℂⁿ`.
//!
//! Hamiltonian vector fields follow `i_{X_h} ω = dh`, i.e. `X_h = Ω⁻ᵀ ∇h`.
//!
//! Paths in a model are polylines of *lifted* coordinates in the universal
//! cover `ℝ^{2n}`; a closed loop on the torus ends at its start shifted by
//! periods.

use nalgebra::{DMatrix, DVector};

use crate::error::{check_dim, Error, Result};
use crate::metric::Polyline;

const STRUCTURE_TOL: f64 = 1e-12;

/// Central finite-difference step for gradients of Hamiltonians.
pub const FD_STEP: f64 = 1e-6;

#[derive(Clone, Debug)]
pub struct SymplecticModel {
    omega: DMatrix<f64>,
    omega_inv_t: DMatrix<f64>,
    periods: Vec<Option<f64>>,
    /// Constant parts `cᵢ`, one row per generator.
    generators: DMatrix<f64>,
    /// Linear parts `Aᵢ`; empty when every field is constant.
    linear_parts: Vec<DMatrix<f64>>,
}

/// A point of the model with periodic coordinates reduced to `[0, period)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelPoint {
    coords: DVector<f64>,
}

impl ModelPoint {
    pub fn coords(&self) -> &DVector<f64> {
        &self.coords
    }
}

/// `Ψ(m)(ξᵢ, ξⱼ) = ω(ξᵢ(m), ξⱼ(m))`.
#[derive(Clone, Debug, PartialEq)]
pub struct ChuForm {
    pub matrix: DMatrix<f64>,
}

#[derive(Clone, Debug)]
pub struct FlowResult {
    pub point: ModelPoint,
    /// Endpoint in lifted coordinates (continuous along the trajectory).
    pub lifted: DVector<f64>,
    pub energy_drift: f64,
    pub steps: usize,
}

fn scale(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(1.0_f64, |a, x| a.max(x.abs()))
}

fn reduce(x: f64, period: f64) -> f64 {
    let r = x - period * (x / period).floor();
    if r >= period || r < 0.0 {
        0.0
    } else {
        r
    }
}

impl SymplecticModel {
    /// Model with constant generator fields (rows of `generators`).
    pub fn new(
        omega: DMatrix<f64>,
        periods: Vec<Option<f64>>,
        generators: DMatrix<f64>,
    ) -> Result<Self> {
        Self::with_linear_parts(omega, periods, generators, Vec::new())
    }

    pub fn with_linear_parts(
        omega: DMatrix<f64>,
        periods: Vec<Option<f64>>,
        generators: DMatrix<f64>,
        linear_parts: Vec<DMatrix<f64>>,
    ) -> Result<Self> {
        let dim = omega.nrows();
        if dim == 0 || dim % 2 != 0 || omega.ncols() != dim {
            return Err(Error::input(format!(
                "omega must be a nonempty square matrix of even size, got {}x{}",
                omega.nrows(),
                omega.ncols()
            )));
        }
        if omega.iter().any(|x| !x.is_finite()) {
            return Err(Error::input("omega has non-finite entries"));
        }
        if (&omega + omega.transpose()).amax() > STRUCTURE_TOL * scale(&omega) {
            return Err(Error::input("omega is not antisymmetric"));
        }
        let omega_inv = omega
            .clone()
            .try_inverse()
            .filter(|inv| inv.iter().all(|x| x.is_finite()))
            .ok_or_else(|| Error::input("omega is degenerate"))?;
        check_dim(dim, periods.len())?;
        for p in periods.iter().flatten() {
            if !(p.is_finite() && *p > 0.0) {
                return Err(Error::input(format!("periods must be positive, got {p}")));
            }
        }
        check_dim(dim, generators.ncols())?;
        let k = generators.nrows();
        if k == 0 {
            return Err(Error::input("at least one generator is required"));
        }
        if !linear_parts.is_empty() {
            check_dim(k, linear_parts.len())?;
            for a in &linear_parts {
                if a.nrows() != dim || a.ncols() != dim {
                    return Err(Error::input("linear parts must be square of the model dimension"));
                }
                if (a.transpose() * &omega + &omega * a).amax() > STRUCTURE_TOL * scale(a) * scale(&omega) {
                    return Err(Error::input("a linear part is not infinitesimally symplectic"));
                }
                for (i, p) in periods.iter().enumerate() {
                    if p.is_some() && (a.row(i).amax() > 0.0 || a.column(i).amax() > 0.0) {
                        return Err(Error::input(
                            "linear parts must vanish on periodic coordinates",
                        ));
                    }
                }
            }
            for i in 0..k {
                for j in (i + 1)..k {
                    let (ai, aj) = (&linear_parts[i], &linear_parts[j]);
                    let comm = ai * aj - aj * ai;
                    let ci = generators.row(i).transpose();
                    let cj = generators.row(j).transpose();
                    let mixed = ai * cj - aj * ci;
                    if comm.amax() > STRUCTURE_TOL * scale(ai) * scale(aj) || mixed.amax() > STRUCTURE_TOL {
                        return Err(Error::input("generator fields do not commute"));
                    }
                }
            }
        }
        Ok(Self {
            omega_inv_t: omega_inv.transpose(),
            omega,
            periods,
            generators,
            linear_parts,
        })
    }

    /// `ℂⁿ = ℝ^{2n}` (coordinates `x₁, y₁, x₂, y₂, …`) with the diagonal torus
    /// action `zⱼ ↦ e^{i⟨αⱼ, θ⟩} zⱼ`. Each complex line carries
    /// `ω(u, v) = −u_x v_y + u_y v_x`, for which `⟨J(z), ξ⟩ = ½ ω(ξ·z, z)`
    /// equals `½ Σⱼ |zⱼ|² ⟨αⱼ, ξ⟩`.
    pub fn linear_representation(weights: &[DVector<f64>]) -> Result<Self> {
        let n = weights.len();
        let k = weights
            .first()
            .map(|w| w.len())
            .ok_or_else(|| Error::input("at least one weight is required"))?;
        for w in weights {
            check_dim(k, w.len())?;
        }
        let dim = 2 * n;
        let mut omega = DMatrix::zeros(dim, dim);
        for j in 0..n {
            omega[(2 * j, 2 * j + 1)] = -1.0;
            omega[(2 * j + 1, 2 * j)] = 1.0;
        }
        let linear_parts = (0..k)
            .map(|i| {
                let mut a = DMatrix::zeros(dim, dim);
                for (j, w) in weights.iter().enumerate() {
                    a[(2 * j, 2 * j + 1)] = -w[i];
                    a[(2 * j + 1, 2 * j)] = w[i];
                }
                a
            })
            .collect();
        Self::with_linear_parts(omega, vec![None; dim], DMatrix::zeros(k, dim), linear_parts)
    }

    pub fn dim(&self) -> usize {
        self.omega.nrows()
    }

    pub fn algebra_dim(&self) -> usize {
        self.generators.nrows()
    }

    pub fn omega(&self) -> &DMatrix<f64> {
        &self.omega
    }

    pub fn periods(&self) -> &[Option<f64>] {
        &self.periods
    }

    pub fn generators(&self) -> &DMatrix<f64> {
        &self.generators
    }

    pub fn linear_parts(&self) -> &[DMatrix<f64>] {
        &self.linear_parts
    }

    pub fn has_constant_generators(&self) -> bool {
        self.linear_parts.iter().all(|a| a.amax() == 0.0)
    }

    /// Reduces periodic coordinates.
    pub fn point(&self, coords: DVector<f64>) -> Result<ModelPoint> {
        check_dim(self.dim(), coords.len())?;
        if coords.iter().any(|x| !x.is_finite()) {
            return Err(Error::input("model point has non-finite coordinates"));
        }
        Ok(self.reduce(coords))
    }

    pub fn point_slice(&self, coords: &[f64]) -> Result<ModelPoint> {
        self.point(DVector::from_row_slice(coords))
    }

    fn reduce(&self, mut coords: DVector<f64>) -> ModelPoint {
        for (x, p) in coords.iter_mut().zip(&self.periods) {
            if let Some(p) = p {
                *x = reduce(*x, *p);
            }
        }
        ModelPoint { coords }
    }

    /// True when `a` and `b` (lifted coordinates) define the same point.
    pub fn same_point(&self, a: &DVector<f64>, b: &DVector<f64>, tol: f64) -> bool {
        a.iter().zip(b.iter()).zip(&self.periods).all(|((x, y), p)| {
            let d = x - y;
            match p {
                Some(p) => {
                    let r = reduce(d, *p);
                    r.min(p - r) <= tol
                }
                None => d.abs() <= tol,
            }
        })
    }

    fn check_index(&self, xi_index: usize) -> Result<()> {
        if xi_index >= self.algebra_dim() {
            return Err(Error::input(format!(
                "generator index {xi_index} out of range (k = {})",
                self.algebra_dim()
            )));
        }
        Ok(())
    }

    /// `ξᵢ(m)` at lifted coordinates `m`.
    pub fn generator_field(&self, m: &DVector<f64>, xi_index: usize) -> DVector<f64> {
        let mut v = self.generators.row(xi_index).transpose();
        if let Some(a) = self.linear_parts.get(xi_index) {
            v += a * m;
        }
        v
    }

    /// Field of a general algebra element `ξ = Σ ξᵢ eᵢ`.
    pub fn algebra_field(&self, m: &DVector<f64>, xi: &DVector<f64>) -> DVector<f64> {
        (0..self.algebra_dim()).fold(DVector::zeros(self.dim()), |acc, i| {
            acc + self.generator_field(m, i) * xi[i]
        })
    }

    pub(crate) fn contraction_at(&self, m: &DVector<f64>, xi_index: usize) -> DVector<f64> {
        self.omega.tr_mul(&self.generator_field(m, xi_index))
    }

    /// The covector `v ↦ ω(ξᵢ(m), v)`, stored as a column (`Ωᵀ ξᵢ(m)`).
    pub fn contraction_form(&self, m: &ModelPoint, xi_index: usize) -> Result<DVector<f64>> {
        self.check_index(xi_index)?;
        Ok(self.contraction_at(&m.coords, xi_index))
    }

    pub fn chu_map(&self, m: &ModelPoint) -> ChuForm {
        self.chu_at(&m.coords)
    }

    pub(crate) fn chu_at(&self, m: &DVector<f64>) -> ChuForm {
        let k = self.algebra_dim();
        let fields: Vec<_> = (0..k).map(|i| self.generator_field(m, i)).collect();
        let matrix = DMatrix::from_fn(k, k, |i, j| fields[i].dot(&(&self.omega * &fields[j])));
        ChuForm { matrix }
    }

    /// Central-difference gradient.
    pub fn gradient<F: Fn(&[f64]) -> f64>(&self, h: &F, m: &DVector<f64>) -> Result<DVector<f64>> {
        let mut x: Vec<f64> = m.iter().copied().collect();
        let mut g = DVector::zeros(self.dim());
        for i in 0..self.dim() {
            let x0 = x[i];
            let step = FD_STEP * (1.0 + x0.abs());
            x[i] = x0 + step;
            let fp = h(&x);
            x[i] = x0 - step;
            let fm = h(&x);
            x[i] = x0;
            let d = (fp - fm) / (2.0 * step);
            if !d.is_finite() {
                return Err(Error::Integration(format!(
                    "non-finite Hamiltonian near {:?}",
                    x
                )));
            }
            g[i] = d;
        }
        Ok(g)
    }

    /// `X_h = Ω⁻ᵀ ∇h`.
    pub fn hamiltonian_vector_field<F: Fn(&[f64]) -> f64>(
        &self,
        h: &F,
        m: &DVector<f64>,
    ) -> Result<DVector<f64>> {
        Ok(&self.omega_inv_t * self.gradient(h, m)?)
    }

    /// `{F, G}(m) = ω(X_F, X_G)`; with this convention `{J_ξ, J_η} = Ψ(ξ, η)`.
    pub fn poisson_bracket<F, G>(&self, f: &F, g: &G, m: &DVector<f64>) -> Result<f64>
    where
        F: Fn(&[f64]) -> f64,
        G: Fn(&[f64]) -> f64,
    {
        let xf = self.hamiltonian_vector_field(f, m)?;
        let xg = self.hamiltonian_vector_field(g, m)?;
        Ok(xf.dot(&(&self.omega * xg)))
    }

    /// Fixed-step RK4 integration of `X_h` in lifted coordinates, returning the
    /// state after each of `checkpoints` equal sub-intervals (plus the start).
    pub fn flow_trajectory<F: Fn(&[f64]) -> f64>(
        &self,
        h: &F,
        m0: &DVector<f64>,
        t: f64,
        dt: f64,
        checkpoints: usize,
    ) -> Result<Vec<DVector<f64>>> {
        check_dim(self.dim(), m0.len())?;
        if !(dt > 0.0) || !t.is_finite() {
            return Err(Error::input(format!("need dt > 0 and finite t, got dt = {dt}, t = {t}")));
        }
        let checkpoints = checkpoints.max(1);
        let per = ((t.abs() / dt / checkpoints as f64).ceil() as usize).max(1);
        let total = per * checkpoints;
        let step = t / total as f64;
        let mut x = m0.clone();
        let mut out = Vec::with_capacity(checkpoints + 1);
        out.push(x.clone());
        for _ in 0..checkpoints {
            for _ in 0..per {
                let k1 = self.hamiltonian_vector_field(h, &x)?;
                let k2 = self.hamiltonian_vector_field(h, &(&x + &k1 * (0.5 * step)))?;
                let k3 = self.hamiltonian_vector_field(h, &(&x + &k2 * (0.5 * step)))?;
                let k4 = self.hamiltonian_vector_field(h, &(&x + &k3 * step))?;
                x += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (step / 6.0);
            }
            if x.iter().any(|v| !v.is_finite()) {
                return Err(Error::Integration("trajectory left the finite range".into()));
            }
            out.push(x.clone());
        }
        Ok(out)
    }

    /// `F_t(m0)` for the Hamiltonian flow of `h`. Negative `t` flows backwards;
    /// `dt` is the step magnitude.
    pub fn hamiltonian_flow<F: Fn(&[f64]) -> f64>(
        &self,
        h: &F,
        m0: &ModelPoint,
        t: f64,
        dt: f64,
    ) -> Result<FlowResult> {
        let h0 = h(m0.coords.as_slice());
        if !h0.is_finite() {
            return Err(Error::Integration("non-finite Hamiltonian at the start".into()));
        }
        let traj = self.flow_trajectory(h, &m0.coords, t, dt, 1)?;
        let lifted = traj.into_iter().last().expect("trajectory has an endpoint");
        let h1 = h(lifted.as_slice());
        if !h1.is_finite() {
            return Err(Error::Integration("non-finite Hamiltonian at the end".into()));
        }
        let steps = ((t.abs() / dt).ceil() as usize).max(1);
        Ok(FlowResult {
            point: self.reduce(lifted.clone()),
            lifted,
            energy_drift: (h1 - h0).abs(),
            steps,
        })
    }

    /// One closed coordinate loop per periodic coordinate, from the origin to
    /// the origin shifted by that period, with `samples` segments.
    pub fn loop_basis(&self, samples: usize) -> Vec<Polyline<DVector<f64>>> {
        let samples = samples.max(1);
        self.periods
            .iter()
            .enumerate()
            .filter_map(|(i, p)| p.map(|p| (i, p)))
            .map(|(i, p)| {
                let points = (0..=samples)
                    .map(|s| {
                        let mut x = DVector::zeros(self.dim());
                        x[i] = p * s as f64 / samples as f64;
                        x
                    })
                    .collect();
                Polyline::new(points).expect("loop has at least two points")
            })
            .collect()
    }

    /// `Φ_g(m)`: time-one flow of the field of `g ∈ 𝔤`. For affine commuting
    /// fields this is the exponential of the augmented matrix `[[A, c], [0, 0]]`.
    pub fn act(&self, g: &DVector<f64>, m: &ModelPoint) -> Result<ModelPoint> {
        check_dim(self.algebra_dim(), g.len())?;
        Ok(self.reduce(self.act_lifted(g, &m.coords)))
    }

    pub(crate) fn act_lifted(&self, g: &DVector<f64>, m: &DVector<f64>) -> DVector<f64> {
        let c = self.generators.tr_mul(g);
        if self.has_constant_generators() {
            return m + c;
        }
        let dim = self.dim();
        let mut aug = DMatrix::zeros(dim + 1, dim + 1);
        let lin = self
            .linear_parts
            .iter()
            .enumerate()
            .fold(DMatrix::zeros(dim, dim), |acc, (i, a)| acc + a * g[i]);
        aug.view_mut((0, 0), (dim, dim)).copy_from(&lin);
        aug.view_mut((0, dim), (dim, 1)).copy_from(&c);
        let e = aug.exp();
        e.view((0, 0), (dim, dim)) * m + e.view((0, dim), (dim, 1))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{PI, TAU};

    fn std_omega() -> DMatrix<f64> {
        DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0])
    }

    fn s1_on_t2(factor: f64) -> SymplecticModel {
        SymplecticModel::new(
            std_omega() * factor,
            vec![Some(TAU), Some(TAU)],
            DMatrix::from_row_slice(1, 2, &[1.0, 0.0]),
        )
        .unwrap()
    }

    fn r2_on_t2() -> SymplecticModel {
        SymplecticModel::new(std_omega(), vec![Some(TAU), Some(TAU)], DMatrix::identity(2, 2)).unwrap()
    }

    #[test]
    fn contraction_form_examples() {
        let m = s1_on_t2(1.0);
        let p = m.point_slice(&[0.3, 1.2]).unwrap();
        assert_eq!(m.contraction_form(&p, 0).unwrap().as_slice(), &[0.0, 1.0]);
        let r = r2_on_t2();
        assert_eq!(r.contraction_form(&p, 1).unwrap().as_slice(), &[-1.0, 0.0]);
        let d = s1_on_t2(2.0);
        assert_eq!(d.contraction_form(&p, 0).unwrap().as_slice(), &[0.0, 2.0]);
        assert!(m.contraction_form(&p, 1).is_err());
    }

    #[test]
    fn chu_map_examples() {
        let p = DVector::from_row_slice(&[0.1, 0.2]);
        assert_eq!(s1_on_t2(1.0).chu_at(&p).matrix, DMatrix::zeros(1, 1));
        assert_eq!(r2_on_t2().chu_at(&p).matrix, std_omega());
        let twice = SymplecticModel::new(
            std_omega(),
            vec![Some(TAU), Some(TAU)],
            DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 1.0, 0.0]),
        )
        .unwrap();
        assert_eq!(twice.chu_at(&p).matrix, DMatrix::zeros(2, 2));
    }

    #[test]
    fn invalid_models_rejected() {
        let periods = vec![Some(TAU), Some(TAU)];
        let g = DMatrix::from_row_slice(1, 2, &[1.0, 0.0]);
        assert!(SymplecticModel::new(DMatrix::identity(2, 2), periods.clone(), g.clone()).is_err());
        assert!(SymplecticModel::new(DMatrix::zeros(2, 2), periods.clone(), g.clone()).is_err());
        assert!(SymplecticModel::new(std_omega(), vec![Some(-1.0), None], g.clone()).is_err());
        assert!(SymplecticModel::new(std_omega(), periods, DMatrix::zeros(1, 3)).is_err());
    }

    #[test]
    fn periodic_reduction() {
        let m = s1_on_t2(1.0);
        let p = m.point_slice(&[-0.5, 7.0]).unwrap();
        assert!((p.coords()[0] - (TAU - 0.5)).abs() < 1e-12);
        assert!((p.coords()[1] - (7.0 - TAU)).abs() < 1e-12);
        assert!(m.same_point(&DVector::from_row_slice(&[0.0, 0.0]), &DVector::from_row_slice(&[TAU, -TAU]), 1e-12));
    }

    #[test]
    fn constant_hamiltonian_flow_is_identity() {
        let m = s1_on_t2(1.0);
        let p = m.point_slice(&[1.0, 2.0]).unwrap();
        let r = m.hamiltonian_flow(&|_: &[f64]| 3.0, &p, 5.0, 1e-2).unwrap();
        assert!((r.point.coords() - p.coords()).norm() < 1e-12);
    }

    #[test]
    fn invariant_flow_moves_first_angle_only() {
        // h = cos φ₂: X_h = Ω⁻ᵀ (0, −sin φ₂) = (−sin φ₂, 0); exact solution is linear.
        let m = s1_on_t2(1.0);
        let p = m.point_slice(&[0.5, 1.1]).unwrap();
        let t = 3.0;
        let r = m.hamiltonian_flow(&|x: &[f64]| x[1].cos(), &p, t, 1e-2).unwrap();
        let expected = 0.5 - t * 1.1f64.sin();
        assert!((r.lifted[0] - expected).abs() < 1e-8);
        assert_eq!(r.lifted[1], 1.1);
        assert!(r.energy_drift < 1e-12);
    }

    #[test]
    fn time_reversal() {
        let m = s1_on_t2(1.0);
        let h = |x: &[f64]| x[0].cos() + 0.5 * x[1].sin();
        let p = m.point_slice(&[0.4, 2.0]).unwrap();
        let fwd = m.hamiltonian_flow(&h, &p, 10.0, 1e-3).unwrap();
        let back = m.hamiltonian_flow(&h, &fwd.point, -10.0, 1e-3).unwrap();
        assert!(m.same_point(back.point.coords(), p.coords(), 1e-6));
    }

    #[test]
    fn rk4_converges_at_fourth_order() {
        let m = s1_on_t2(1.0);
        let h = |x: &[f64]| x[0].cos() + x[1].cos();
        let start = DVector::from_row_slice(&[0.3, 1.0]);
        let end = |dt: f64| m.flow_trajectory(&h, &start, 2.0, dt, 1).unwrap().pop().unwrap();
        let (a, b, c) = (end(0.2), end(0.1), end(0.05));
        let ratio = (&a - &b).norm() / (&b - &c).norm();
        assert!((ratio - 16.0).abs() < 2.0, "convergence ratio {ratio}");
    }

    #[test]
    fn flow_preserves_omega_area() {
        let m = s1_on_t2(1.0);
        let h = |x: &[f64]| x[0].cos() * x[1].sin() + 0.3 * x[1].cos();
        let base = DVector::from_row_slice(&[0.7, 0.2]);
        let (u, v) = (
            DVector::from_row_slice(&[1.0, 0.3]),
            DVector::from_row_slice(&[-0.2, 1.0]),
        );
        let eps = 1e-5;
        let flow = |x: DVector<f64>| m.flow_trajectory(&h, &x, 5.0, 1e-3, 1).unwrap().pop().unwrap();
        let du = (flow(&base + &u * eps) - flow(&base - &u * eps)) / (2.0 * eps);
        let dv = (flow(&base + &v * eps) - flow(&base - &v * eps)) / (2.0 * eps);
        let before = u.dot(&(m.omega() * &v));
        let after = du.dot(&(m.omega() * &dv));
        assert!((before - after).abs() < 1e-5, "{before} vs {after}");
    }

    #[test]
    fn loop_basis_counts() {
        assert_eq!(s1_on_t2(1.0).loop_basis(8).len(), 2);
        let rep = SymplecticModel::linear_representation(&[DVector::from_row_slice(&[1.0])]).unwrap();
        assert!(rep.loop_basis(8).is_empty());
        let cyl = SymplecticModel::new(
            std_omega(),
            vec![Some(TAU), None],
            DMatrix::from_row_slice(1, 2, &[1.0, 0.0]),
        )
        .unwrap();
        let loops = cyl.loop_basis(4);
        assert_eq!(loops.len(), 1);
        assert_eq!(loops[0].last()[0], TAU);
    }

    #[test]
    fn linear_representation_is_valid_and_rotates() {
        let w = [DVector::from_row_slice(&[1.0, 0.0]), DVector::from_row_slice(&[0.0, 1.0])];
        let rep = SymplecticModel::linear_representation(&w).unwrap();
        let p = rep.point_slice(&[1.0, 0.0, 0.0, 2.0]).unwrap();
        let q = rep.act(&DVector::from_row_slice(&[PI / 2.0, 0.0]), &p).unwrap();
        let expect = DVector::from_row_slice(&[0.0, 1.0, 0.0, 2.0]);
        assert!((q.coords() - expect).norm() < 1e-12);
    }

    #[test]
    fn noncommuting_fields_rejected() {
        // rotation in the (x, y) plane and a translation along x do not commute
        let rot = DMatrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]);
        let res = SymplecticModel::with_linear_parts(
            DMatrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]),
            vec![None, None],
            DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 1.0, 0.0]),
            vec![rot, DMatrix::zeros(2, 2)],
        );
        assert!(res.is_err());
    }

    #[test]
    fn bracket_of_components_is_chu() {
        let r = r2_on_t2();
        // local momentum components: J₁ = φ₂, J₂ = −φ₁
        let j1 = |x: &[f64]| x[1];
        let j2 = |x: &[f64]| -x[0];
        let m = DVector::from_row_slice(&[0.3, 0.4]);
        let b = r.poisson_bracket(&j1, &j2, &m).unwrap();
        assert!((b - r.chu_at(&m).matrix[(0, 1)]).abs() < 1e-9);
    }
}
