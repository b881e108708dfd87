//! Randomized properties of the quotient metric, polyline lengths, transport
//! and the non-equivariance cocycle.

use std::f64::consts::TAU;

use cylconvex::holonomy::parallel_transport;
use cylconvex::metric::polyline_length;
use cylconvex::{ClosedSubgroup, Cylinder, CylinderPoint, MomentumMap, Polyline, SymplecticModel};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn v(xs: &[f64]) -> DVector<f64> {
    DVector::from_row_slice(xs)
}

/// A fixed family covering circles, tori, skew lattices, a line factor and
/// plain Euclidean space; coordinates are taken in three dimensions and cut
/// to the ambient one.
fn cylinder(which: usize) -> Cylinder {
    match which {
        0 => Cylinder::circle(TAU).unwrap(),
        1 => Cylinder::new(ClosedSubgroup::standard_torus(2)).unwrap(),
        2 => Cylinder::new(ClosedSubgroup::lattice(vec![v(&[1.0, 0.0]), v(&[0.4, 0.8])]).unwrap()).unwrap(),
        3 => Cylinder::new(ClosedSubgroup::new(3, vec![v(&[0.0, 0.0, 1.0])], vec![v(&[1.5, 0.0, 0.3]), v(&[0.2, 1.1, 0.0])]).unwrap())
            .unwrap(),
        4 => Cylinder::new(
            ClosedSubgroup::lattice(vec![v(&[1.0, 0.0, 0.0]), v(&[0.5, 0.9, 0.0]), v(&[0.3, 0.2, 0.7])]).unwrap(),
        )
        .unwrap(),
        _ => Cylinder::euclidean(2),
    }
}

fn point(cyl: &Cylinder, xs: &[f64; 3]) -> CylinderPoint {
    cyl.project_slice(&xs[..cyl.ambient_dim()]).unwrap()
}

fn coords() -> impl Strategy<Value = [f64; 3]> {
    prop::array::uniform3(-8.0f64..8.0)
}

fn length(cyl: &Cylinder, pts: Vec<CylinderPoint>) -> f64 {
    polyline_length(cyl, &Polyline::new(pts).unwrap()).unwrap_finite()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn refinement_never_shortens(which in 0usize..6, raw in prop::collection::vec(coords(), 2..8), extra in coords(), at in 0usize..8) {
        let cyl = cylinder(which);
        let pts: Vec<_> = raw.iter().map(|x| point(&cyl, x)).collect();
        let before = length(&cyl, pts.clone());
        let mut refined = pts.clone();
        refined.insert(1 + at % (pts.len() - 1), point(&cyl, &extra));
        prop_assert!(length(&cyl, refined) >= before - 1e-9);
    }

    #[test]
    fn concatenation_is_additive(which in 0usize..6, a in prop::collection::vec(coords(), 2..6), b in prop::collection::vec(coords(), 1..6)) {
        let cyl = cylinder(which);
        let pa: Vec<_> = a.iter().map(|x| point(&cyl, x)).collect();
        let mut pb = vec![pa.last().unwrap().clone()];
        pb.extend(b.iter().map(|x| point(&cyl, x)));
        let (la, lb) = (Polyline::new(pa).unwrap(), Polyline::new(pb).unwrap());
        let joined = polyline_length(&cyl, &la.concat(&lb)).unwrap_finite();
        let sum = polyline_length(&cyl, &la).unwrap_finite() + polyline_length(&cyl, &lb).unwrap_finite();
        prop_assert!((joined - sum).abs() <= 1e-9);
    }

    #[test]
    fn endpoints_bound_length(which in 0usize..6, raw in prop::collection::vec(coords(), 2..8)) {
        let cyl = cylinder(which);
        let pts: Vec<_> = raw.iter().map(|x| point(&cyl, x)).collect();
        let d = cyl.distance(&pts[0], pts.last().unwrap());
        prop_assert!(d <= length(&cyl, pts) + 1e-9);
    }

    #[test]
    fn reparametrization_keeps_length(which in 0usize..6, raw in prop::collection::vec(coords(), 2..8), dup in 0usize..8) {
        let cyl = cylinder(which);
        let pts: Vec<_> = raw.iter().map(|x| point(&cyl, x)).collect();
        let line = Polyline::new(pts.clone()).unwrap();
        let base = polyline_length(&cyl, &line).unwrap_finite();
        prop_assert!((polyline_length(&cyl, &line.reversed()).unwrap_finite() - base).abs() <= 1e-9);
        // pausing at a vertex
        let mut paused = pts.clone();
        let i = dup % pts.len();
        paused.insert(i, pts[i].clone());
        prop_assert!((length(&cyl, paused) - base).abs() <= 1e-9);
        // a vertex inserted on a minimizing lift
        let lift = &cyl.enumerate_minimizing_lifts(&pts[0], &pts[1], 1e-9)[0];
        let mid = cyl.project(&(pts[0].rep() + &lift.displacement * 0.37)).unwrap();
        let mut split = pts.clone();
        split.insert(1, mid);
        prop_assert!((length(&cyl, split) - base).abs() <= 1e-9);
    }

    #[test]
    fn metric_axioms(which in 0usize..6, a in coords(), b in coords(), c in coords()) {
        let cyl = cylinder(which);
        let (p, q, r) = (point(&cyl, &a), point(&cyl, &b), point(&cyl, &c));
        prop_assert!(cyl.distance(&p, &p) <= 1e-12);
        prop_assert!((cyl.distance(&p, &q) - cyl.distance(&q, &p)).abs() <= 1e-9);
        prop_assert!(cyl.distance(&p, &r) <= cyl.distance(&p, &q) + cyl.distance(&q, &r) + 1e-9);
        if cyl.distance(&p, &q) < 1e-12 {
            prop_assert!((p.rep() - q.rep()).amax() < 1e-9);
        }
    }
}

fn torus_model() -> SymplecticModel {
    SymplecticModel::new(
        DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]),
        vec![Some(TAU), Some(TAU)],
        DMatrix::identity(2, 2),
    )
    .unwrap()
}

fn linear_model() -> SymplecticModel {
    SymplecticModel::linear_representation(&[v(&[1.0, 0.0]), v(&[1.0, 2.0])]).unwrap()
}

fn path(model: &SymplecticModel, raw: &[[f64; 4]]) -> Polyline<DVector<f64>> {
    Polyline::new(raw.iter().map(|x| DVector::from_row_slice(&x[..model.dim()])).collect()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn transport_is_additive(linear in any::<bool>(), a in prop::collection::vec(prop::array::uniform4(-3.0f64..3.0), 2..5), b in prop::collection::vec(prop::array::uniform4(-3.0f64..3.0), 1..5)) {
        let model = if linear { linear_model() } else { torus_model() };
        let pa = path(&model, &a);
        let mut braw = vec![*a.last().unwrap()];
        braw.extend(b);
        let pb = path(&model, &braw);
        let whole = parallel_transport(&model, &pa.concat(&pb)).unwrap().delta_nu;
        let parts = parallel_transport(&model, &pa).unwrap().delta_nu + parallel_transport(&model, &pb).unwrap().delta_nu;
        prop_assert!((whole - parts).amax() <= 1e-9);
    }

    #[test]
    fn contractible_loops_carry_no_transport(linear in any::<bool>(), pts in prop::collection::vec(prop::array::uniform4(-3.0f64..3.0), 2..5)) {
        let model = if linear { linear_model() } else { torus_model() };
        let mut raw = pts.clone();
        raw.push(pts[0]);
        let t = parallel_transport(&model, &path(&model, &raw)).unwrap().delta_nu;
        prop_assert!(t.amax() <= 1e-9);
    }

    #[test]
    fn reversal_negates_transport(linear in any::<bool>(), pts in prop::collection::vec(prop::array::uniform4(-3.0f64..3.0), 2..5)) {
        let model = if linear { linear_model() } else { torus_model() };
        let p = path(&model, &pts);
        let fwd = parallel_transport(&model, &p).unwrap().delta_nu;
        let back = parallel_transport(&model, &p.reversed()).unwrap().delta_nu;
        prop_assert!((fwd + back).amax() <= 1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn cocycle_is_additive(g1 in prop::array::uniform2(-4.0f64..4.0), g2 in prop::array::uniform2(-4.0f64..4.0)) {
        let k = MomentumMap::new(torus_model()).unwrap();
        let cyl = k.cylinder();
        let s1 = k.nonequivariance_cocycle(&v(&g1), 8, 1e-8).unwrap();
        let s2 = k.nonequivariance_cocycle(&v(&g2), 8, 1e-8).unwrap();
        let s12 = k.nonequivariance_cocycle(&(v(&g1) + v(&g2)), 8, 1e-8).unwrap();
        prop_assert!(cyl.distance(&s12, &cyl.add(&s1, &s2)) <= 1e-8);
    }
}
