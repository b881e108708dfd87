//! Sample meshes on model domains.

use std::f64::consts::TAU;

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::harness::SampledMap;
use crate::holonomy::MomentumMap;
use crate::model::SymplecticModel;

/// Points, symmetric edge list and mesh-boundary flags.
#[derive(Clone, Debug)]
pub struct Mesh {
    pub points: Vec<DVector<f64>>,
    pub edges: Vec<(usize, usize)>,
    pub boundary: Vec<bool>,
    /// Typical domain edge length.
    pub spacing: f64,
}

/// Edges of a rectangular grid (first axis fastest). Periodic axes wrap
/// around when they have at least three samples.
pub fn grid_edges(shape: &[usize], periodic: &[bool]) -> Vec<(usize, usize)> {
    let total: usize = shape.iter().product();
    let mut strides = vec![1usize; shape.len()];
    for d in 1..shape.len() {
        strides[d] = strides[d - 1] * shape[d - 1];
    }
    let mut edges = Vec::new();
    for idx in 0..total {
        for (d, (&len, &stride)) in shape.iter().zip(&strides).enumerate() {
            let i = (idx / stride) % len;
            if i + 1 < len {
                edges.push((idx, idx + stride));
            } else if periodic[d] && len >= 3 {
                edges.push((idx, idx - i * stride));
            }
        }
    }
    edges
}

/// Rectangular mesh on a model: periodic coordinates get `resolution` samples
/// over one period, line coordinates `resolution + 1` samples on
/// `[−extent, extent]`.
pub fn torus_mesh(model: &SymplecticModel, resolution: usize, extent: f64) -> Result<Mesh> {
    if resolution < 2 {
        return Err(Error::input("mesh resolution must be at least 2"));
    }
    let periods = model.periods();
    let shape: Vec<usize> = periods
        .iter()
        .map(|p| if p.is_some() { resolution } else { resolution + 1 })
        .collect();
    let periodic: Vec<bool> = periods.iter().map(Option::is_some).collect();
    let total = shape
        .iter()
        .try_fold(1usize, |acc, &s| acc.checked_mul(s))
        .filter(|&t| t <= 4_000_000)
        .ok_or_else(|| Error::input("mesh too large; lower the resolution"))?;
    let step = |d: usize| match periods[d] {
        Some(p) => p / resolution as f64,
        None => 2.0 * extent / resolution as f64,
    };
    let mut points = Vec::with_capacity(total);
    let mut boundary = Vec::with_capacity(total);
    for idx in 0..total {
        let mut rem = idx;
        let mut x = DVector::zeros(shape.len());
        let mut on_edge = false;
        for d in 0..shape.len() {
            let i = rem % shape[d];
            rem /= shape[d];
            x[d] = match periods[d] {
                Some(_) => i as f64 * step(d),
                None => {
                    on_edge |= i == 0 || i == resolution;
                    -extent + i as f64 * step(d)
                }
            };
        }
        points.push(x);
        boundary.push(on_edge);
    }
    let spacing = (0..shape.len()).map(step).fold(0.0, f64::max);
    Ok(Mesh {
        points,
        edges: grid_edges(&shape, &periodic),
        boundary,
        spacing,
    })
}

/// Action-angle mesh of the ball of radius `radius` in `ℂⁿ`: actions
/// `|zⱼ|² = r² iⱼ / N` with `Σ iⱼ ≤ N`, and `angles` samples on each circle
/// with `iⱼ > 0` (the angle is dropped where `zⱼ = 0`).
///
/// Edges join king moves in the action grid at equal angles (any angle on a
/// coordinate that is zero at either end) and single angle steps at equal
/// actions.
pub fn action_angle_mesh(complex_dim: usize, radius: f64, resolution: usize, angles: usize) -> Result<Mesh> {
    if complex_dim == 0 || complex_dim > 3 {
        return Err(Error::input("action-angle meshes support 1 to 3 complex dimensions"));
    }
    if !(radius > 0.0) || resolution < 1 || angles < 3 {
        return Err(Error::input("need radius > 0, resolution >= 1 and at least 3 angles"));
    }
    let n = complex_dim;
    // enumerate action indices
    let mut actions: Vec<Vec<usize>> = Vec::new();
    let mut idx = vec![0usize; n];
    'outer: loop {
        actions.push(idx.clone());
        let mut pos = 0;
        loop {
            if pos == n {
                break 'outer;
            }
            idx[pos] += 1;
            if idx.iter().sum::<usize>() <= resolution {
                break;
            }
            idx[pos] = 0;
            pos += 1;
        }
    }
    // nodes: (action, angle vector with 0 where the action vanishes)
    let mut nodes: Vec<(usize, Vec<usize>)> = Vec::new();
    let mut lookup = std::collections::HashMap::new();
    for (ai, act) in actions.iter().enumerate() {
        let free: Vec<usize> = (0..n).filter(|&j| act[j] > 0).collect();
        let count = angles.pow(free.len() as u32);
        for flat in 0..count {
            let mut rem = flat;
            let mut ang = vec![0usize; n];
            for &j in &free {
                ang[j] = rem % angles;
                rem /= angles;
            }
            lookup.insert((act.clone(), ang.clone()), nodes.len());
            nodes.push((ai, ang));
        }
    }
    let r2 = radius * radius;
    let points: Vec<DVector<f64>> = nodes
        .iter()
        .map(|(ai, ang)| {
            let act = &actions[*ai];
            let mut x = DVector::zeros(2 * n);
            for j in 0..n {
                let amp = (r2 * act[j] as f64 / resolution as f64).sqrt();
                let theta = TAU * ang[j] as f64 / angles as f64;
                x[2 * j] = amp * theta.cos();
                x[2 * j + 1] = amp * theta.sin();
            }
            x
        })
        .collect();
    let boundary = nodes
        .iter()
        .map(|(ai, _)| actions[*ai].iter().sum::<usize>() == resolution)
        .collect();

    let mut edges = Vec::new();
    let moves: Vec<Vec<i64>> = (0..3usize.pow(n as u32))
        .map(|m| {
            let mut rem = m;
            (0..n)
                .map(|_| {
                    let d = (rem % 3) as i64 - 1;
                    rem /= 3;
                    d
                })
                .collect()
        })
        .filter(|d: &Vec<i64>| d.iter().any(|&x| x != 0))
        .collect();
    for (id, (ai, ang)) in nodes.iter().enumerate() {
        let act = &actions[*ai];
        // angle steps at fixed action
        for j in 0..n {
            if act[j] > 0 && angles >= 3 {
                let mut next = ang.clone();
                next[j] = (ang[j] + 1) % angles;
                let other = lookup[&(act.clone(), next)];
                edges.push((id, other));
            }
        }
        // king moves in the action grid
        for mv in &moves {
            let target: Option<Vec<usize>> = act
                .iter()
                .zip(mv)
                .map(|(&a, &d)| usize::try_from(a as i64 + d).ok())
                .collect();
            let Some(target) = target else { continue };
            if target.iter().sum::<usize>() > resolution {
                continue;
            }
            // angle choices on the target: equal where both ends carry an
            // angle, free where the target gains one, dropped where it loses one
            let mut choices: Vec<Vec<usize>> = vec![vec![0; n]];
            for j in 0..n {
                let opts: Vec<usize> = if target[j] == 0 {
                    vec![0]
                } else if act[j] == 0 {
                    (0..angles).collect()
                } else {
                    vec![ang[j]]
                };
                choices = choices
                    .into_iter()
                    .flat_map(|c| {
                        opts.iter().map(move |&o| {
                            let mut c = c.clone();
                            c[j] = o;
                            c
                        })
                    })
                    .collect();
            }
            for c in choices {
                let other = lookup[&(target.clone(), c)];
                if id < other {
                    edges.push((id, other));
                }
            }
        }
    }
    edges.sort_unstable();
    edges.dedup();
    let spacing = (r2 / resolution as f64).sqrt();
    Ok(Mesh {
        points,
        edges,
        boundary,
        spacing,
    })
}

/// Grid on `[−half_width, half_width]^dim` with `resolution + 1` samples per
/// axis. `dim = 0` gives a single point.
pub fn box_mesh(dim: usize, half_width: f64, resolution: usize) -> Result<Mesh> {
    if resolution < 1 || !(half_width > 0.0) {
        return Err(Error::input("box mesh needs resolution >= 1 and a positive half width"));
    }
    let shape = vec![resolution + 1; dim];
    let total = shape
        .iter()
        .try_fold(1usize, |acc, &s| acc.checked_mul(s))
        .filter(|&t| t <= 4_000_000)
        .ok_or_else(|| Error::input("mesh too large; lower the resolution"))?;
    let step = 2.0 * half_width / resolution as f64;
    let mut points = Vec::with_capacity(total);
    let mut boundary = Vec::with_capacity(total);
    for idx in 0..total {
        let mut rem = idx;
        let mut x = DVector::zeros(dim);
        let mut edge = false;
        for d in 0..dim {
            let i = rem % (resolution + 1);
            rem /= resolution + 1;
            edge |= i == 0 || i == resolution;
            x[d] = -half_width + i as f64 * step;
        }
        points.push(x);
        boundary.push(edge);
    }
    Ok(Mesh {
        points,
        edges: grid_edges(&shape, &vec![false; dim]),
        boundary,
        spacing: step,
    })
}

/// Cartesian product: points are concatenations, edges move in one factor.
pub fn product_mesh(a: &Mesh, b: &Mesh) -> Mesh {
    let (na, nb) = (a.points.len(), b.points.len());
    let id = |i: usize, j: usize| i + na * j;
    let mut points = Vec::with_capacity(na * nb);
    let mut boundary = Vec::with_capacity(na * nb);
    for j in 0..nb {
        for i in 0..na {
            let mut x = DVector::zeros(a.points[i].len() + b.points[j].len());
            x.rows_mut(0, a.points[i].len()).copy_from(&a.points[i]);
            x.rows_mut(a.points[i].len(), b.points[j].len()).copy_from(&b.points[j]);
            points.push(x);
            boundary.push(a.boundary[i] || b.boundary[j]);
        }
    }
    let mut edges = Vec::with_capacity(a.edges.len() * nb + b.edges.len() * na);
    for j in 0..nb {
        edges.extend(a.edges.iter().map(|&(p, q)| (id(p, j), id(q, j))));
    }
    for i in 0..na {
        edges.extend(b.edges.iter().map(|&(p, q)| (id(i, p), id(i, q))));
    }
    Mesh {
        points,
        edges,
        boundary,
        spacing: a.spacing.max(b.spacing),
    }
}

/// `K` evaluated on every mesh point.
pub fn sample_momentum(k: &MomentumMap, mesh: &Mesh) -> Result<SampledMap> {
    let values = mesh.points.iter().map(|x| k.value(x)).collect::<Result<Vec<_>>>()?;
    SampledMap::new(mesh.points.clone(), &mesh.edges, values, k.cylinder().clone())?
        .with_boundary(mesh.boundary.clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    #[test]
    fn periodic_grid_degree() {
        let e = grid_edges(&[4, 5], &[true, true]);
        assert_eq!(e.len(), 2 * 20);
        let open = grid_edges(&[4, 5], &[false, false]);
        assert_eq!(open.len(), 3 * 5 + 4 * 4);
    }

    #[test]
    fn torus_mesh_shape() {
        let model = SymplecticModel::new(
            DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]),
            vec![Some(TAU), None],
            DMatrix::from_row_slice(1, 2, &[1.0, 0.0]),
        )
        .unwrap();
        let mesh = torus_mesh(&model, 8, 1.0).unwrap();
        assert_eq!(mesh.points.len(), 8 * 9);
        assert_eq!(mesh.boundary.iter().filter(|&&b| b).count(), 16);
    }

    #[test]
    fn box_and_product_meshes() {
        let a = box_mesh(1, 1.0, 4).unwrap();
        assert_eq!(a.points.len(), 5);
        let p = product_mesh(&a, &box_mesh(1, 1.0, 2).unwrap());
        assert_eq!(p.points.len(), 15);
        assert_eq!(p.edges.len(), 4 * 3 + 2 * 5);
        assert_eq!(box_mesh(0, 1.0, 4).unwrap().points.len(), 1);
    }

    #[test]
    fn action_angle_mesh_counts() {
        let mesh = action_angle_mesh(2, 1.0, 4, 8).unwrap();
        // origin, 4 + 4 axis actions with 8 angles, 6 interior actions with 64
        assert_eq!(mesh.points.len(), 1 + 8 * 8 + 6 * 64);
        for (a, b) in &mesh.edges {
            assert!(a != b);
        }
        for p in &mesh.points {
            assert!(p.norm() <= 1.0 + 1e-12);
        }
    }
}
