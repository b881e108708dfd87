//! Fixtures shared by the benchmarks.

use cylconvex::config::HarnessTarget;
use cylconvex::mesh::torus_mesh;
use cylconvex::registry;
use cylconvex::report::momentum_sampled_map;
use cylconvex::{ClosedSubgroup, Cylinder, CylinderPoint, MomentumMap, SampledMap};
use nalgebra::DVector;

pub fn momentum(name: &str) -> MomentumMap {
    let model = registry::lookup(name).expect("builtin").model.build().expect("valid builtin");
    MomentumMap::new(model).expect("closed holonomy")
}

/// `K` of a builtin on a `resolution × resolution` torus mesh.
pub fn torus_map(name: &str, resolution: usize, target: HarnessTarget) -> SampledMap {
    let k = momentum(name);
    let mesh = torus_mesh(k.model(), resolution, 1.0).expect("mesh");
    momentum_sampled_map(&k, &mesh, target).expect("sampled map")
}

/// A skew rank-3 lattice cylinder and a quasi-random point cloud on it.
pub fn skew_cylinder(points: usize) -> (Cylinder, Vec<CylinderPoint>) {
    let basis = vec![
        DVector::from_row_slice(&[1.0, 0.0, 0.0]),
        DVector::from_row_slice(&[0.5, 0.9, 0.0]),
        DVector::from_row_slice(&[0.3, 0.2, 0.7]),
    ];
    let cyl = Cylinder::new(ClosedSubgroup::lattice(basis).expect("lattice")).expect("cylinder");
    let pts = (0..points)
        .map(|i| {
            let t = i as f64;
            cyl.project_slice(&[(t * 0.618_034).fract() * 4.0, (t * 0.414_214).fract() * 4.0, (t * 0.732_051).fract() * 4.0])
                .expect("point")
        })
        .collect();
    (cyl, pts)
}
