//! Parallel transport, Hamiltonian holonomy and the cylinder-valued momentum map.
//!
//! Transport integrates the contraction forms `i_{ξᵢ}ω` along a path in
//! covering coordinates. The holonomy group is generated by the transports of
//! the coordinate loops, and the momentum map `K` takes values in
//! `𝔤* / H` where `H` is that group.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cylinder::{ClosedSubgroup, Cylinder, CylinderPoint};
use crate::error::{check_dim, Error, Result};
use crate::metric::{ExtReal, Polyline, EPS_METRIC};
use crate::model::{ModelPoint, SymplecticModel};

/// Default tolerance for conserved-quantity checks.
pub const TOL_NOETHER: f64 = 1e-6;

/// Largest denominator accepted when reducing rationally dependent holonomy
/// generators to a lattice basis.
pub const MAX_DENOMINATOR: i64 = 1000;

const RATIONAL_TOL: f64 = 1e-9;
const ENDPOINT_TOL: f64 = 1e-9;
const SAMPLE_SEED: u64 = 0x5eed;

#[derive(Clone, Debug)]
pub struct TransportResult {
    pub delta_nu: DVector<f64>,
    pub path: Polyline<DVector<f64>>,
    pub estimated_error: f64,
}

#[derive(Clone, Debug)]
pub struct MomentumValue {
    pub value: CylinderPoint,
    pub basepoint: ModelPoint,
    pub base_value: DVector<f64>,
}

fn segment_integral(model: &SymplecticModel, a: &DVector<f64>, b: &DVector<f64>, panels: usize) -> DVector<f64> {
    let k = model.algebra_dim();
    let d = b - a;
    let h = 1.0 / panels as f64;
    let eval = |t: f64| -> DVector<f64> {
        let m = a + &d * t;
        DVector::from_fn(k, |i, _| model.contraction_at(&m, i).dot(&d))
    };
    let mut sum = (eval(0.0) + eval(1.0)) * 0.5;
    for p in 1..panels {
        sum += eval(p as f64 * h);
    }
    sum * h
}

/// `Δνᵢ = ∫_path i_{ξᵢ}ω`, by the trapezoid rule on every segment. The error
/// estimate compares one and two panels per segment.
pub fn parallel_transport(model: &SymplecticModel, path: &Polyline<DVector<f64>>) -> Result<TransportResult> {
    let k = model.algebra_dim();
    let mut coarse = DVector::zeros(k);
    let mut fine = DVector::zeros(k);
    for p in path.points() {
        check_dim(model.dim(), p.len())?;
        if p.iter().any(|x| !x.is_finite()) {
            return Err(Error::input("path has non-finite coordinates"));
        }
    }
    for w in path.points().windows(2) {
        coarse += segment_integral(model, &w[0], &w[1], 1);
        fine += segment_integral(model, &w[0], &w[1], 2);
    }
    let estimated_error = (&fine - &coarse).amax() / 3.0;
    Ok(TransportResult {
        delta_nu: fine,
        path: path.clone(),
        estimated_error,
    })
}

/// Transports of the loop basis, one per periodic coordinate.
pub fn holonomy_generators(model: &SymplecticModel) -> Result<Vec<DVector<f64>>> {
    model
        .loop_basis(1)
        .iter()
        .map(|l| parallel_transport(model, l).map(|t| t.delta_nu))
        .collect()
}

/// The subgroup of `𝔤*` generated by the loop transports.
pub fn holonomy_group(model: &SymplecticModel) -> Result<ClosedSubgroup> {
    assemble_lattice(model.algebra_dim(), &holonomy_generators(model)?)
}

/// Best rational approximation `p/q` with `q ≤ MAX_DENOMINATOR`.
fn rationalize(x: f64) -> Option<(i64, i64)> {
    let (mut h0, mut h1) = (0i64, 1i64);
    let (mut k0, mut k1) = (1i64, 0i64);
    let mut r = x;
    for _ in 0..64 {
        let a = r.floor();
        if a.abs() > 1e12 {
            break;
        }
        let a = a as i64;
        let (h2, k2) = (a * h1 + h0, a * k1 + k0);
        if k2 > MAX_DENOMINATOR {
            break;
        }
        (h0, h1, k0, k1) = (h1, h2, k1, k2);
        if (x - h1 as f64 / k1 as f64).abs() <= RATIONAL_TOL * x.abs().max(1.0) {
            return Some((h1, k1));
        }
        let frac = r - a as f64;
        if frac.abs() < 1e-15 {
            break;
        }
        r = 1.0 / frac;
    }
    None
}

fn gcd(a: i128, b: i128) -> i128 {
    if b == 0 {
        a.abs()
    } else {
        gcd(b, a % b)
    }
}

/// Basis of the row lattice of an integer matrix, by Euclidean row reduction.
fn integer_row_basis(mut rows: Vec<Vec<i128>>, cols: usize) -> Vec<Vec<i128>> {
    let mut basis = Vec::new();
    for c in 0..cols {
        loop {
            let mut nz: Vec<usize> = (0..rows.len()).filter(|&i| rows[i][c] != 0).collect();
            if nz.len() <= 1 {
                if let Some(&i) = nz.first() {
                    basis.push(rows.remove(i));
                }
                break;
            }
            nz.sort_by_key(|&i| rows[i][c].abs());
            let pivot = rows[nz[0]].clone();
            for &i in &nz[1..] {
                let q = rows[i][c] / pivot[c];
                for (x, p) in rows[i].iter_mut().zip(&pivot) {
                    *x -= q * p;
                }
            }
        }
    }
    basis
}

/// Lattice generated by `generators` in `ℝᵏ`, or an error when the group they
/// generate is not closed (or not representable with small denominators).
pub fn assemble_lattice(k: usize, generators: &[DVector<f64>]) -> Result<ClosedSubgroup> {
    let gens: Vec<DVector<f64>> = generators
        .iter()
        .filter(|g| g.norm() >= EPS_METRIC)
        .cloned()
        .collect();
    for g in &gens {
        check_dim(k, g.len())?;
    }
    if gens.is_empty() {
        return Ok(ClosedSubgroup::trivial(k));
    }
    // greedy maximal independent subset
    let mut base: Vec<DVector<f64>> = Vec::new();
    let mut rest = Vec::new();
    for g in &gens {
        let mut trial = base.clone();
        trial.push(g.clone());
        let m = DMatrix::from_columns(&trial);
        let sv = m.svd(false, false).singular_values;
        let max = sv.max();
        if sv.iter().filter(|&&s| s > max * 1e-9).count() == trial.len() {
            base = trial;
        } else {
            rest.push(g.clone());
        }
    }
    if rest.is_empty() {
        return ClosedSubgroup::lattice(base).map_err(|e| match e {
            Error::NotDiscrete => Error::NonClosedHolonomy("generators are not discrete".into()),
            e => e,
        });
    }
    let b = DMatrix::from_columns(&base);
    let r = base.len();
    let mut fractions: Vec<Vec<(i64, i64)>> = Vec::new();
    for g in &rest {
        let coeffs = b
            .clone()
            .svd(true, true)
            .solve(g, 1e-12)
            .map_err(|e| Error::NonClosedHolonomy(e.to_string()))?;
        let mut row = Vec::with_capacity(r);
        for &c in coeffs.iter() {
            let frac = rationalize(c).ok_or_else(|| {
                Error::NonClosedHolonomy(format!(
                    "generators are rationally independent along a line (ratio {c})"
                ))
            })?;
            row.push(frac);
        }
        fractions.push(row);
    }
    let denom = fractions
        .iter()
        .flatten()
        .fold(1i128, |acc, &(_, q)| acc / gcd(acc, q as i128) * q as i128);
    let mut rows: Vec<Vec<i128>> = (0..r)
        .map(|i| (0..r).map(|j| if i == j { denom } else { 0 }).collect())
        .collect();
    for row in &fractions {
        rows.push(row.iter().map(|&(p, q)| p as i128 * (denom / q as i128)).collect());
    }
    let int_basis = integer_row_basis(rows, r);
    let lattice: Vec<DVector<f64>> = int_basis
        .iter()
        .map(|z| {
            z.iter()
                .zip(&base)
                .fold(DVector::zeros(k), |acc, (&c, v)| acc + v * (c as f64 / denom as f64))
        })
        .collect();
    ClosedSubgroup::lattice(lattice).map_err(|e| match e {
        Error::NotDiscrete => Error::NonClosedHolonomy("reduced generators are not discrete".into()),
        e => e,
    })
}

/// `K(m) = π(base_value + ∫_path α)` for a path from `basepoint` to `m`.
pub fn momentum_map(
    model: &SymplecticModel,
    cylinder: &Cylinder,
    m: &ModelPoint,
    basepoint: &ModelPoint,
    base_value: &DVector<f64>,
    path: &Polyline<DVector<f64>>,
) -> Result<MomentumValue> {
    check_dim(model.algebra_dim(), base_value.len())?;
    check_dim(model.algebra_dim(), cylinder.ambient_dim())?;
    if !model.same_point(path.first(), basepoint.coords(), ENDPOINT_TOL)
        || !model.same_point(path.last(), m.coords(), ENDPOINT_TOL)
    {
        return Err(Error::input("path does not connect the basepoint to m"));
    }
    let t = parallel_transport(model, path)?;
    Ok(MomentumValue {
        value: cylinder.project(&(base_value + t.delta_nu))?,
        basepoint: basepoint.clone(),
        base_value: base_value.clone(),
    })
}

/// `νᵢ = ω(ξᵢ(m), v)`.
pub fn tangent_momentum(model: &SymplecticModel, m: &ModelPoint, v: &DVector<f64>) -> Result<DVector<f64>> {
    check_dim(model.dim(), v.len())?;
    Ok(tangent_matrix(model, m) * v)
}

/// `T_m K` as a `k × 2n` matrix; row `i` is the contraction form of `ξᵢ`.
pub fn tangent_matrix(model: &SymplecticModel, m: &ModelPoint) -> DMatrix<f64> {
    let rows: Vec<_> = (0..model.algebra_dim())
        .map(|i| model.contraction_at(m.coords(), i).transpose())
        .collect();
    DMatrix::from_rows(&rows)
}

/// A momentum map with fixed holonomy, basepoint and base value. Values are
/// computed along the straight segment from the basepoint to a lift of the
/// argument; other paths change the result only by holonomy.
#[derive(Clone, Debug)]
pub struct MomentumMap {
    model: SymplecticModel,
    cylinder: Cylinder,
    basepoint: DVector<f64>,
    base_value: DVector<f64>,
}

impl MomentumMap {
    /// Holonomy computed from the model, basepoint at the origin, `K = 0` there.
    pub fn new(model: SymplecticModel) -> Result<Self> {
        let group = holonomy_group(&model)?;
        let dim = model.dim();
        let k = model.algebra_dim();
        Self::with_basepoint(model, group, DVector::zeros(dim), DVector::zeros(k))
    }

    pub fn with_basepoint(
        model: SymplecticModel,
        group: ClosedSubgroup,
        basepoint: DVector<f64>,
        base_value: DVector<f64>,
    ) -> Result<Self> {
        check_dim(model.dim(), basepoint.len())?;
        check_dim(model.algebra_dim(), base_value.len())?;
        check_dim(model.algebra_dim(), group.ambient_dim())?;
        Ok(Self {
            cylinder: Cylinder::new(group)?,
            model,
            basepoint,
            base_value,
        })
    }

    pub fn model(&self) -> &SymplecticModel {
        &self.model
    }

    pub fn cylinder(&self) -> &Cylinder {
        &self.cylinder
    }

    pub fn basepoint(&self) -> &DVector<f64> {
        &self.basepoint
    }

    pub fn base_value(&self) -> &DVector<f64> {
        &self.base_value
    }

    /// `base_value + ∫ α` along the straight segment, before projection.
    pub fn lift_value(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.base_value + segment_integral(&self.model, &self.basepoint, x, 2)
    }

    pub fn value(&self, x: &DVector<f64>) -> Result<CylinderPoint> {
        check_dim(self.model.dim(), x.len())?;
        self.cylinder.project(&self.lift_value(x))
    }

    pub fn value_at(&self, m: &ModelPoint) -> Result<CylinderPoint> {
        self.value(m.coords())
    }

    /// Value along an explicit path starting at the basepoint (or any of its
    /// periodic translates).
    pub fn value_along(&self, path: &Polyline<DVector<f64>>) -> Result<CylinderPoint> {
        if !self.model.same_point(path.first(), &self.basepoint, ENDPOINT_TOL) {
            return Err(Error::input("path does not start at the basepoint"));
        }
        let t = parallel_transport(&self.model, path)?;
        self.cylinder.project(&(&self.base_value + t.delta_nu))
    }

    fn sample_points(&self, count: usize) -> Vec<DVector<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(SAMPLE_SEED);
        (0..count)
            .map(|_| {
                DVector::from_iterator(
                    self.model.dim(),
                    self.model.periods().iter().map(|p| match p {
                        Some(p) => rng.random_range(0.0..*p),
                        None => rng.random_range(-1.0..1.0),
                    }),
                )
            })
            .collect()
    }

    /// Max over checkpoints of `d(K(F_s(m0)), K(m0))` for an invariant `h`.
    pub fn noether_check<F: Fn(&[f64]) -> f64>(
        &self,
        h: &F,
        m0: &ModelPoint,
        t: f64,
        dt: f64,
        checkpoints: usize,
    ) -> Result<f64> {
        let mut points = self.sample_points(16);
        points.push(m0.coords().clone());
        let mut violation = 0.0f64;
        for p in &points {
            let grad = self.model.gradient(h, p)?;
            for i in 0..self.model.algebra_dim() {
                violation = violation.max(grad.dot(&self.model.generator_field(p, i)).abs());
            }
        }
        if violation > TOL_NOETHER {
            return Err(Error::NotInvariant { violation });
        }
        let traj = self.model.flow_trajectory(h, m0.coords(), t, dt, checkpoints)?;
        let k0 = self.value(&traj[0])?;
        traj.iter().try_fold(0.0f64, |acc, x| {
            Ok(acc.max(self.cylinder.distance(&k0, &self.value(x)?)))
        })
    }

    /// `σ(g) = K(Φ_g(m)) − K(m)`, checked to be independent of `m` over
    /// `samples` points (at least 8).
    pub fn nonequivariance_cocycle(&self, g: &DVector<f64>, samples: usize, tol: f64) -> Result<CylinderPoint> {
        check_dim(self.model.algebra_dim(), g.len())?;
        let values: Vec<CylinderPoint> = self
            .sample_points(samples.max(8))
            .iter()
            .map(|m| {
                let moved = self.model.act_lifted(g, m);
                Ok(self.cylinder.sub(&self.value(&moved)?, &self.value(m)?))
            })
            .collect::<Result<_>>()?;
        let mut spread = 0.0f64;
        for (i, a) in values.iter().enumerate() {
            for b in &values[i + 1..] {
                spread = spread.max(self.cylinder.distance(a, b));
            }
        }
        if spread > tol {
            return Err(Error::CocycleNotConstant { spread });
        }
        Ok(values.into_iter().next().expect("at least eight samples"))
    }

    /// Default finite-difference step for brackets on the target.
    pub fn bracket_step(&self) -> f64 {
        match self.cylinder.injectivity_radius().finite() {
            Some(r) => (r / 10.0).min(1e-4),
            None => 1e-4,
        }
    }

    /// `{f, g}(μ) = Ψ(m_ref)(∇(f∘π), ∇(g∘π))` at a lift of `at`.
    pub fn poisson_bracket<F, G>(&self, f: &F, g: &G, at: &CylinderPoint, m_ref: &ModelPoint) -> Result<f64>
    where
        F: Fn(&CylinderPoint) -> f64,
        G: Fn(&CylinderPoint) -> f64,
    {
        self.poisson_bracket_with_step(f, g, at, m_ref, self.bracket_step())
    }

    pub fn poisson_bracket_with_step<F, G>(
        &self,
        f: &F,
        g: &G,
        at: &CylinderPoint,
        m_ref: &ModelPoint,
        step: f64,
    ) -> Result<f64>
    where
        F: Fn(&CylinderPoint) -> f64,
        G: Fn(&CylinderPoint) -> f64,
    {
        check_dim(self.cylinder.ambient_dim(), at.rep().len())?;
        if !(step > 0.0) || ExtReal::from_f64(step) >= self.cylinder.injectivity_radius() {
            return Err(Error::input(format!(
                "finite-difference step {step} must be positive and below the injectivity radius"
            )));
        }
        let grad = |f: &dyn Fn(&CylinderPoint) -> f64| -> Result<DVector<f64>> {
            let k = at.rep().len();
            let mut out = DVector::zeros(k);
            for i in 0..k {
                let mut plus = at.rep().clone();
                plus[i] += step;
                let mut minus = at.rep().clone();
                minus[i] -= step;
                out[i] = (f(&self.cylinder.project(&plus)?) - f(&self.cylinder.project(&minus)?)) / (2.0 * step);
            }
            Ok(out)
        };
        let psi = self.model.chu_map(m_ref).matrix;
        let gf = grad(f)?;
        let gg = grad(g)?;
        Ok(gf.dot(&(psi * gg)))
    }
}
