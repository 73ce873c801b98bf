//! 2D edge-based meshes: validation, text I/O, a structured generator and the
//! planar face structure needed for median-dual metrics.
//!
//! Text format, one item per line, `#` starts a comment:
//!
//! ```text
//! points N
//! x y          (N lines)
//! edges M
//! a b          (M lines, zero-based point indices)
//! marker NAME K
//! i            (K lines of point indices)
//! ```

use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;
use std::path::Path;

use crate::error::MeshError;

#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    points: Vec<[f64; 2]>,
    edges: Vec<[usize; 2]>,
    markers: BTreeMap<String, Vec<usize>>,
}

impl Mesh {
    /// Validates and builds a mesh.
    pub fn new(
        points: Vec<[f64; 2]>,
        edges: Vec<[usize; 2]>,
        markers: BTreeMap<String, Vec<usize>>,
    ) -> Result<Self, MeshError> {
        let n = points.len();
        for (i, p) in points.iter().enumerate() {
            if !p[0].is_finite() || !p[1].is_finite() {
                return Err(MeshError::Invalid(format!("point {i} has non-finite coordinates")));
            }
        }
        let mut seen = HashSet::with_capacity(edges.len());
        let mut used = vec![false; n];
        for (e, &[a, b]) in edges.iter().enumerate() {
            if a >= n || b >= n {
                return Err(MeshError::Invalid(format!("edge {e} ({a}, {b}) references a point outside 0..{n}")));
            }
            if a == b {
                return Err(MeshError::Invalid(format!("edge {e} ({a}, {b}) has identical endpoints")));
            }
            if !seen.insert((a.min(b), a.max(b))) {
                return Err(MeshError::Invalid(format!("edge {e} ({a}, {b}) is a duplicate")));
            }
            used[a] = true;
            used[b] = true;
        }
        if let Some(p) = used.iter().position(|u| !u) {
            return Err(MeshError::Invalid(format!("point {p} is not referenced by any edge")));
        }
        for (name, pts) in &markers {
            if let Some(&p) = pts.iter().find(|&&p| p >= n) {
                return Err(MeshError::Invalid(format!("marker {name} references point {p} outside 0..{n}")));
            }
        }
        Ok(Self { points, edges, markers })
    }

    pub fn points(&self) -> &[[f64; 2]] {
        &self.points
    }

    pub fn edges(&self) -> &[[usize; 2]] {
        &self.edges
    }

    pub fn markers(&self) -> &BTreeMap<String, Vec<usize>> {
        &self.markers
    }

    pub fn num_points(&self) -> usize {
        self.points.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    /// Axis-aligned bounding box as `(min, max)`.
    pub fn bbox(&self) -> ([f64; 2], [f64; 2]) {
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        for p in &self.points {
            for k in 0..2 {
                lo[k] = lo[k].min(p[k]);
                hi[k] = hi[k].max(p[k]);
            }
        }
        (lo, hi)
    }

    /// Same connectivity with new coordinates.
    pub fn with_points(&self, points: Vec<[f64; 2]>) -> Result<Self, MeshError> {
        if points.len() != self.points.len() {
            return Err(MeshError::Invalid(format!(
                "expected {} points, got {}",
                self.points.len(),
                points.len()
            )));
        }
        Ok(Self {
            points,
            ..self.clone()
        })
    }

    pub fn parse(text: &str) -> Result<Self, MeshError> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
            .filter(|(_, l)| !l.is_empty());
        let mut points = Vec::new();
        let mut edges = Vec::new();
        let mut markers = BTreeMap::new();
        let mut have_points = false;
        let mut have_edges = false;
        while let Some((line, header)) = lines.next() {
            let words: Vec<&str> = header.split_whitespace().collect();
            match words.as_slice() {
                ["points", n] => {
                    if have_points {
                        return Err(parse_err(line, "second points section"));
                    }
                    have_points = true;
                    let n = count(line, n)?;
                    for _ in 0..n {
                        let (l, body) = lines.next().ok_or_else(|| parse_err(line, "points section is truncated"))?;
                        let [x, y] = numbers::<f64, 2>(l, body)?;
                        points.push([x, y]);
                    }
                }
                ["edges", m] => {
                    if have_edges {
                        return Err(parse_err(line, "second edges section"));
                    }
                    have_edges = true;
                    let m = count(line, m)?;
                    for _ in 0..m {
                        let (l, body) = lines.next().ok_or_else(|| parse_err(line, "edges section is truncated"))?;
                        edges.push(numbers::<usize, 2>(l, body)?);
                    }
                }
                ["marker", name, k] => {
                    let k = count(line, k)?;
                    let mut pts = Vec::with_capacity(k);
                    for _ in 0..k {
                        let (l, body) = lines.next().ok_or_else(|| parse_err(line, "marker section is truncated"))?;
                        pts.push(numbers::<usize, 1>(l, body)?[0]);
                    }
                    if markers.insert(name.to_string(), pts).is_some() {
                        return Err(parse_err(line, &format!("marker {name} defined twice")));
                    }
                }
                _ => return Err(parse_err(line, &format!("unexpected line `{header}`"))),
            }
        }
        if !have_points || !have_edges {
            return Err(parse_err(0, "missing points or edges section"));
        }
        Self::new(points, edges, markers)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "points {}", self.points.len());
        for p in &self.points {
            // `{:?}` prints the shortest representation that round-trips.
            let _ = writeln!(s, "{:?} {:?}", p[0], p[1]);
        }
        let _ = writeln!(s, "edges {}", self.edges.len());
        for e in &self.edges {
            let _ = writeln!(s, "{} {}", e[0], e[1]);
        }
        for (name, pts) in &self.markers {
            let _ = writeln!(s, "marker {name} {}", pts.len());
            for p in pts {
                let _ = writeln!(s, "{p}");
            }
        }
        s
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, MeshError> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), MeshError> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    /// Rectangle `[0, lx] x [0, ly]` split into `nx * ny` cells, each cut by
    /// its lower-left to upper-right diagonal. Edges are emitted point by point
    /// in row-major order (right, up, diagonal), so contiguous edge runs are
    /// spatially compact. Markers: `left`, `right`, `bottom`, `top`.
    pub fn generate_grid(nx: usize, ny: usize, lx: f64, ly: f64) -> Result<Self, MeshError> {
        if nx < 1 || ny < 1 || lx.is_nan() || ly.is_nan() || lx <= 0.0 || ly <= 0.0 {
            return Err(MeshError::Invalid(format!("grid {nx}x{ny} of size {lx}x{ly}")));
        }
        let id = |i: usize, j: usize| j * (nx + 1) + i;
        let mut points = Vec::with_capacity((nx + 1) * (ny + 1));
        for j in 0..=ny {
            for i in 0..=nx {
                points.push([lx * i as f64 / nx as f64, ly * j as f64 / ny as f64]);
            }
        }
        let mut edges = Vec::with_capacity(3 * nx * ny + nx + ny);
        for j in 0..=ny {
            for i in 0..=nx {
                if i < nx {
                    edges.push([id(i, j), id(i + 1, j)]);
                }
                if j < ny {
                    edges.push([id(i, j), id(i, j + 1)]);
                }
                if i < nx && j < ny {
                    edges.push([id(i, j), id(i + 1, j + 1)]);
                }
            }
        }
        let mut markers = BTreeMap::new();
        markers.insert("left".into(), (0..=ny).map(|j| id(0, j)).collect());
        markers.insert("right".into(), (0..=ny).map(|j| id(nx, j)).collect());
        markers.insert("bottom".into(), (0..=nx).map(|i| id(i, 0)).collect());
        markers.insert("top".into(), (0..=nx).map(|i| id(i, ny)).collect());
        Self::new(points, edges, markers)
    }
}

fn parse_err(line: usize, msg: &str) -> MeshError {
    MeshError::Parse {
        line,
        msg: msg.to_string(),
    }
}

fn count(line: usize, s: &str) -> Result<usize, MeshError> {
    s.parse().map_err(|_| parse_err(line, &format!("bad count `{s}`")))
}

fn numbers<T: std::str::FromStr + Copy + Default, const N: usize>(line: usize, s: &str) -> Result<[T; N], MeshError> {
    let mut out = [T::default(); N];
    let mut it = s.split_whitespace();
    for o in out.iter_mut() {
        let w = it.next().ok_or_else(|| parse_err(line, &format!("expected {N} values")))?;
        *o = w.parse().map_err(|_| parse_err(line, &format!("bad number `{w}`")))?;
    }
    if it.next().is_some() {
        return Err(parse_err(line, &format!("expected {N} values")));
    }
    Ok(out)
}

/// Side of an edge `[a, b]` relative to the direction `a -> b`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

/// A boundary half-face: half of a boundary edge attached to one endpoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BoundaryEdge {
    pub edge: usize,
    /// Side of `[a, b]` on which the interior lies.
    pub interior: Side,
    /// Index into the sorted marker names, `None` for unmarked edges.
    pub marker: Option<usize>,
}

/// Interior faces and boundary edges recovered by planar face traversal.
#[derive(Debug, Clone)]
pub struct Topology {
    /// Counter-clockwise vertex cycles.
    pub faces: Vec<Vec<usize>>,
    /// Edge index of each face side `faces[f][k] -> faces[f][k + 1]`.
    pub face_edges: Vec<Vec<usize>>,
    pub boundary: Vec<BoundaryEdge>,
    pub marker_names: Vec<String>,
}

impl Topology {
    pub fn build(mesh: &Mesh) -> Result<Self, MeshError> {
        let n = mesh.num_points();
        let pts = mesh.points();
        let mut adj: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
        for (e, &[a, b]) in mesh.edges().iter().enumerate() {
            adj[a].push((b, e));
            adj[b].push((a, e));
        }
        let angle = |from: usize, to: usize| (pts[to][1] - pts[from][1]).atan2(pts[to][0] - pts[from][0]);
        for (v, list) in adj.iter_mut().enumerate() {
            list.sort_by(|x, y| angle(v, x.0).total_cmp(&angle(v, y.0)));
        }
        // Half-edge h = 2e + d walks edges[e] forward (d = 0) or backward.
        let m = mesh.num_edges();
        let mut visited = vec![false; 2 * m];
        let mut faces = Vec::new();
        let mut face_edges = Vec::new();
        let mut left_interior = vec![false; 2 * m];
        for start in 0..2 * m {
            if visited[start] {
                continue;
            }
            let mut cycle = Vec::new();
            let mut cyc_edges = Vec::new();
            let mut halves = Vec::new();
            let mut h = start;
            loop {
                visited[h] = true;
                halves.push(h);
                let [a, b] = mesh.edges()[h / 2];
                let (u, v) = if h % 2 == 0 { (a, b) } else { (b, a) };
                cycle.push(u);
                cyc_edges.push(h / 2);
                let list = &adj[v];
                let k = list.iter().position(|&(w, _)| w == u).expect("adjacency is symmetric");
                let (w, e) = list[(k + list.len() - 1) % list.len()];
                h = 2 * e + usize::from(mesh.edges()[e][0] != v);
                debug_assert_eq!(if h % 2 == 0 { mesh.edges()[e][1] } else { mesh.edges()[e][0] }, w);
                if h == start {
                    break;
                }
            }
            let area = signed_area(pts, &cycle);
            if area > 0.0 {
                for &h in &halves {
                    left_interior[h] = true;
                }
                faces.push(cycle);
                face_edges.push(cyc_edges);
            } else if area == 0.0 && cycle.len() > 2 {
                return Err(MeshError::Degenerate { vertices: cycle, area });
            }
        }
        let marker_names: Vec<String> = mesh.markers().keys().cloned().collect();
        let marker_sets: Vec<HashSet<usize>> =
            mesh.markers().values().map(|v| v.iter().copied().collect()).collect();
        let mut boundary = Vec::new();
        for (e, &[a, b]) in mesh.edges().iter().enumerate() {
            let interior = match (left_interior[2 * e], left_interior[2 * e + 1]) {
                (true, true) => continue,
                (true, false) => Side::Left,
                (false, true) => Side::Right,
                (false, false) => {
                    return Err(MeshError::Invalid(format!("edge {e} ({a}, {b}) borders no face")));
                }
            };
            let marker = marker_sets.iter().position(|s| s.contains(&a) && s.contains(&b));
            boundary.push(BoundaryEdge { edge: e, interior, marker });
        }
        Ok(Self {
            faces,
            face_edges,
            boundary,
            marker_names,
        })
    }

    pub fn marker_index(&self, name: &str) -> Option<usize> {
        self.marker_names.iter().position(|m| m == name)
    }
}

fn signed_area(pts: &[[f64; 2]], cycle: &[usize]) -> f64 {
    let k = cycle.len();
    0.5 * (0..k)
        .map(|i| {
            let p = pts[cycle[i]];
            let q = pts[cycle[(i + 1) % k]];
            p[0] * q[1] - p[1] * q[0]
        })
        .sum::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_counts() {
        let m = Mesh::generate_grid(2, 2, 1.0, 1.0).unwrap();
        assert_eq!((m.num_points(), m.num_edges()), (9, 16));
        let m = Mesh::generate_grid(5, 3, 2.0, 1.0).unwrap();
        assert_eq!(m.num_points(), 6 * 4);
        assert_eq!(m.num_edges(), 5 * 4 + 6 * 3 + 15);
    }

    #[test]
    fn grid_faces_are_triangles() {
        let m = Mesh::generate_grid(3, 2, 1.0, 1.0).unwrap();
        let t = Topology::build(&m).unwrap();
        assert_eq!(t.faces.len(), 12);
        assert!(t.faces.iter().all(|f| f.len() == 3));
        assert_eq!(t.boundary.len(), 2 * 3 + 2 * 2);
        assert!(t.boundary.iter().all(|b| b.marker.is_some()));
    }

    #[test]
    fn parse_reports_line_numbers() {
        let err = Mesh::parse("points 2\n0 0\n1 x\n").unwrap_err();
        assert!(matches!(err, MeshError::Parse { line: 3, .. }), "{err}");
        let err = Mesh::parse("points 1\n0 0\nedges 1\n0 0\n").unwrap_err();
        assert!(matches!(err, MeshError::Invalid(_)), "{err}");
    }
}
