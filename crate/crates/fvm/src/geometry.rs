//! Median-dual metrics. Every quantity is an [`ActiveScalar`], so the metric
//! computation is recorded when the coordinates are registered inputs.

use partape::ActiveScalar;

use crate::error::MeshError;
use crate::mesh::{Side, Topology};

pub type Vec2 = [ActiveScalar; 2];

/// Dual-cell geometry of a mesh.
#[derive(Debug, Clone)]
pub struct Metrics {
    /// Dual volume per point.
    pub volumes: Vec<ActiveScalar>,
    /// Dual face normal per edge, oriented from `edges[e][0]` to `edges[e][1]`,
    /// with length equal to the dual face length.
    pub normals: Vec<Vec2>,
    /// `n . d / |d|^2` per edge, with `d` the edge vector.
    pub weights: Vec<ActiveScalar>,
    /// Outward normal of each boundary edge, full edge length. Each endpoint
    /// owns half of it.
    pub boundary_normals: Vec<Vec2>,
    /// Length of each boundary edge.
    pub boundary_lengths: Vec<ActiveScalar>,
}

fn zero() -> ActiveScalar {
    ActiveScalar::new(0.0)
}

fn sub(p: &Vec2, q: &Vec2) -> Vec2 {
    [&p[0] - &q[0], &p[1] - &q[1]]
}

fn cross(p: &Vec2, q: &Vec2) -> ActiveScalar {
    &p[0] * &q[1] - &p[1] * &q[0]
}

/// Clockwise rotation by a quarter turn.
fn rot_cw(v: &Vec2) -> Vec2 {
    [v[1].clone(), -&v[0]]
}

fn rot_ccw(v: &Vec2) -> Vec2 {
    [-&v[1], v[0].clone()]
}

/// Median-dual metrics of `coords` on the faces of `topo`.
///
/// Each face is split at its vertex centroid; a vertex receives the
/// quadrilateral spanned by itself, the midpoints of its two face sides and
/// the centroid, and every face side contributes the segment from its
/// midpoint to the centroid to the dual face of its edge.
pub fn compute_metrics(
    edges: &[[usize; 2]],
    topo: &Topology,
    coords: &[Vec2],
) -> Result<Metrics, MeshError> {
    let mut volumes: Vec<ActiveScalar> = (0..coords.len()).map(|_| zero()).collect();
    let mut normals: Vec<Vec2> = (0..edges.len()).map(|_| [zero(), zero()]).collect();
    for (face, sides) in topo.faces.iter().zip(&topo.face_edges) {
        let k = face.len();
        let inv = 1.0 / k as f64;
        let c: Vec2 = [
            face.iter().map(|&v| &coords[v][0]).sum::<ActiveScalar>() * inv,
            face.iter().map(|&v| &coords[v][1]).sum::<ActiveScalar>() * inv,
        ];
        let mids: Vec<Vec2> = (0..k)
            .map(|i| {
                let (p, q) = (&coords[face[i]], &coords[face[(i + 1) % k]]);
                [(&p[0] + &q[0]) * 0.5, (&p[1] + &q[1]) * 0.5]
            })
            .collect();
        for i in 0..k {
            let v = face[i];
            let p = &coords[v];
            let next = &mids[i];
            let prev = &mids[(i + k - 1) % k];
            // Shoelace over (p, next, c, prev), counter-clockwise.
            let quad = (cross(p, next) + cross(next, &c) + cross(&c, prev) + cross(prev, p)) * 0.5;
            if quad.value().is_nan() || quad.value() <= 0.0 {
                return Err(MeshError::Degenerate {
                    vertices: face.clone(),
                    area: quad.value(),
                });
            }
            volumes[v] += &quad;

            let e = sides[i];
            let s = sub(&c, next);
            let n = if edges[e][0] == v { rot_cw(&s) } else { rot_ccw(&s) };
            let acc = &mut normals[e];
            acc[0] += &n[0];
            acc[1] += &n[1];
        }
    }
    let weights = edges
        .iter()
        .zip(&normals)
        .map(|(&[a, b], n)| {
            let d = sub(&coords[b], &coords[a]);
            (&n[0] * &d[0] + &n[1] * &d[1]) / (&d[0] * &d[0] + &d[1] * &d[1])
        })
        .collect();
    let mut boundary_normals = Vec::with_capacity(topo.boundary.len());
    let mut boundary_lengths = Vec::with_capacity(topo.boundary.len());
    for b in &topo.boundary {
        let [a, c] = edges[b.edge];
        let d = sub(&coords[c], &coords[a]);
        let n = match b.interior {
            Side::Left => rot_cw(&d),
            Side::Right => rot_ccw(&d),
        };
        boundary_lengths.push((&d[0] * &d[0] + &d[1] * &d[1]).sqrt());
        boundary_normals.push(n);
    }
    Ok(Metrics {
        volumes,
        normals,
        weights,
        boundary_normals,
        boundary_lengths,
    })
}

/// Passive coordinates of a mesh as [`Vec2`] values.
pub fn passive_coords(points: &[[f64; 2]]) -> Vec<Vec2> {
    points
        .iter()
        .map(|p| [ActiveScalar::new(p[0]), ActiveScalar::new(p[1])])
        .collect()
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;

    use super::*;
    use crate::mesh::Mesh;

    #[test]
    fn single_triangle_splits_area_evenly() {
        let m = Mesh::new(
            vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]],
            vec![[0, 1], [1, 2], [2, 0]],
            BTreeMap::new(),
        )
        .unwrap();
        let t = Topology::build(&m).unwrap();
        let g = compute_metrics(m.edges(), &t, &passive_coords(m.points())).unwrap();
        for v in &g.volumes {
            assert!((v.value() - 1.0 / 6.0).abs() < 1e-15);
        }
    }

    #[test]
    fn dual_cells_are_closed() {
        let m = Mesh::generate_grid(4, 3, 2.0, 1.5).unwrap();
        let t = Topology::build(&m).unwrap();
        let g = compute_metrics(m.edges(), &t, &passive_coords(m.points())).unwrap();
        let mut sum = vec![[0.0f64; 2]; m.num_points()];
        for (e, &[a, b]) in m.edges().iter().enumerate() {
            for k in 0..2 {
                sum[a][k] += g.normals[e][k].value();
                sum[b][k] -= g.normals[e][k].value();
            }
        }
        for (i, be) in t.boundary.iter().enumerate() {
            let [a, b] = m.edges()[be.edge];
            for k in 0..2 {
                sum[a][k] += 0.5 * g.boundary_normals[i][k].value();
                sum[b][k] += 0.5 * g.boundary_normals[i][k].value();
            }
        }
        for s in sum {
            assert!(s[0].abs() < 1e-14 && s[1].abs() < 1e-14, "{s:?}");
        }
    }
}
