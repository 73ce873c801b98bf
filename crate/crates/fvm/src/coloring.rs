//! Edge coloring with contiguous color groups, load-balance efficiency,
//! adaptive group-size search and the gather structure of the reduction
//! strategy.

use std::collections::HashMap;
use std::ops::Range;

pub const DEFAULT_MAX_COLORS: usize = 255;
pub const DEFAULT_GROUP_SIZE: usize = 512;
pub const DEFAULT_EFFICIENCY_THRESHOLD: f64 = 0.875;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Group {
    pub color: usize,
    pub edges: Range<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Coloring {
    pub group_size: usize,
    pub groups: Vec<Group>,
    /// Group indices per color, in edge order.
    pub color_groups: Vec<Vec<usize>>,
    pub num_edges: usize,
}

impl Coloring {
    pub fn colors(&self) -> usize {
        self.color_groups.len()
    }

    pub fn efficiency(&self, threads: usize) -> f64 {
        coloring_efficiency(self, threads)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ColoringFailure {
    pub group_size: usize,
    pub max_colors: usize,
}

/// Packs edges into contiguous groups of `group_size` and colors them first
/// fit: two groups conflict iff they touch a common point.
pub fn color_edges(
    edges: &[[usize; 2]],
    num_points: usize,
    group_size: usize,
    max_colors: usize,
) -> Result<Coloring, ColoringFailure> {
    let group_size = group_size.max(1);
    let fail = ColoringFailure { group_size, max_colors };
    let words = max_colors.div_ceil(64).max(1);
    // used[p * words ..] is the bitset of colors already touching point p.
    let mut used = vec![0u64; num_points * words];
    let mut forbidden = vec![0u64; words];
    let mut groups = Vec::with_capacity(edges.len().div_ceil(group_size));
    let mut color_groups: Vec<Vec<usize>> = Vec::new();
    for start in (0..edges.len()).step_by(group_size) {
        let range = start..(start + group_size).min(edges.len());
        forbidden.iter_mut().for_each(|w| *w = 0);
        for &[a, b] in &edges[range.clone()] {
            for p in [a, b] {
                for (f, u) in forbidden.iter_mut().zip(&used[p * words..(p + 1) * words]) {
                    *f |= u;
                }
            }
        }
        let color = (0..max_colors)
            .find(|&c| forbidden[c / 64] & (1 << (c % 64)) == 0)
            .ok_or(fail)?;
        for &[a, b] in &edges[range.clone()] {
            used[a * words + color / 64] |= 1 << (color % 64);
            used[b * words + color / 64] |= 1 << (color % 64);
        }
        if color == color_groups.len() {
            color_groups.push(Vec::new());
        }
        color_groups[color].push(groups.len());
        groups.push(Group { color, edges: range });
    }
    Ok(Coloring {
        group_size,
        groups,
        color_groups,
        num_edges: edges.len(),
    })
}

/// Useful work over busy-slot capacity when each thread takes whole groups:
/// `edges / sum_c(threads * group_size * ceil(groups_c / threads))`.
pub fn coloring_efficiency(c: &Coloring, threads: usize) -> f64 {
    let t = threads.max(1);
    let slots: usize = c
        .color_groups
        .iter()
        .map(|g| t * c.group_size * g.len().div_ceil(t))
        .sum();
    if slots == 0 {
        return 1.0;
    }
    c.num_edges as f64 / slots as f64
}

/// Returns true iff no two groups of one color share a point. Quadratic in
/// the group count per color; meant for tests.
pub fn is_conflict_free(c: &Coloring, edges: &[[usize; 2]]) -> bool {
    for groups in &c.color_groups {
        let pts: Vec<Vec<usize>> = groups
            .iter()
            .map(|&g| {
                let mut p: Vec<usize> = edges[c.groups[g].edges.clone()].iter().flatten().copied().collect();
                p.sort_unstable();
                p.dedup();
                p
            })
            .collect();
        for i in 0..pts.len() {
            for j in i + 1..pts.len() {
                if pts[i].iter().any(|p| pts[j].binary_search(p).is_ok()) {
                    return false;
                }
            }
        }
    }
    let mut seen = vec![false; edges.len()];
    for g in &c.groups {
        for e in g.edges.clone() {
            if std::mem::replace(&mut seen[e], true) {
                return false;
            }
        }
    }
    seen.into_iter().all(|s| s)
}

/// Outcome of a bisection over `1..=max`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Bisection {
    pub best: Option<usize>,
    pub probes: usize,
}

/// Largest `s` in `1..=max` with `admissible(s)`, assuming admissibility is
/// monotone (true up to some size, false above). Probes `max` first and
/// memoizes every probe.
pub fn bisect_largest(max: usize, mut admissible: impl FnMut(usize) -> bool) -> Bisection {
    let mut memo = HashMap::new();
    let mut probe = |s: usize| *memo.entry(s).or_insert_with(|| admissible(s));
    if max == 0 {
        return Bisection { best: None, probes: 0 };
    }
    if probe(max) {
        return Bisection { best: Some(max), probes: 1 };
    }
    // lo admissible (0 = none known), hi inadmissible.
    let (mut lo, mut hi) = (0, max);
    while hi - lo > 1 {
        let mid = lo + (hi - lo).div_ceil(2);
        if probe(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let probes = memo.len();
    Bisection {
        best: (lo > 0).then_some(lo),
        probes,
    }
}

#[derive(Debug, Clone)]
pub enum GroupSizeChoice {
    Colored { size: usize, coloring: Coloring, probes: usize },
    /// No group size is admissible; use the reduction strategy.
    Fallback { probes: usize },
}

/// Largest group size in `1..=max_size` whose coloring succeeds and reaches
/// `threshold` efficiency on `threads` threads.
pub fn adaptive_group_size(
    edges: &[[usize; 2]],
    num_points: usize,
    max_size: usize,
    threads: usize,
    threshold: f64,
    max_colors: usize,
) -> GroupSizeChoice {
    let mut cache: HashMap<usize, Coloring> = HashMap::new();
    let b = bisect_largest(max_size, |s| match color_edges(edges, num_points, s, max_colors) {
        Ok(c) if coloring_efficiency(&c, threads) >= threshold => {
            cache.insert(s, c);
            true
        }
        _ => false,
    });
    match b.best {
        Some(size) => GroupSizeChoice::Colored {
            size,
            coloring: cache.remove(&size).expect("admissible probes are cached"),
            probes: b.probes,
        },
        None => GroupSizeChoice::Fallback { probes: b.probes },
    }
}

/// Per point, the incident edges with sign +1 where the point is the tail
/// (`edges[e][0]`) and -1 where it is the head.
pub fn gather_structure(edges: &[[usize; 2]], num_points: usize) -> Vec<Vec<(usize, f64)>> {
    let mut g = vec![Vec::new(); num_points];
    for (e, &[a, b]) in edges.iter().enumerate() {
        g[a].push((e, 1.0));
        g[b].push((e, -1.0));
    }
    g
}

#[cfg(test)]
mod tests {
    use super::*;

    fn full(colors: &[usize], g: usize) -> Coloring {
        let mut groups = Vec::new();
        let mut color_groups = Vec::new();
        for (c, &n) in colors.iter().enumerate() {
            let mut ids = Vec::new();
            for _ in 0..n {
                let s = groups.len() * g;
                ids.push(groups.len());
                groups.push(Group { color: c, edges: s..s + g });
            }
            color_groups.push(ids);
        }
        Coloring {
            group_size: g,
            num_edges: groups.len() * g,
            groups,
            color_groups,
        }
    }

    #[test]
    fn efficiency_examples() {
        assert_eq!(coloring_efficiency(&full(&[8], 16), 4), 1.0);
        assert_eq!(coloring_efficiency(&full(&[5], 16), 4), 0.625);
        assert_eq!(coloring_efficiency(&full(&[4, 4], 16), 4), 1.0);
    }

    #[test]
    fn path_coloring() {
        let edges = [[0, 1], [1, 2], [2, 3]];
        let c = color_edges(&edges, 4, 1, 255).unwrap();
        assert_eq!(c.color_groups, vec![vec![0, 2], vec![1]]);
        assert!(is_conflict_free(&c, &edges));
        let c = color_edges(&edges, 4, 3, 255).unwrap();
        assert_eq!((c.groups.len(), c.colors()), (1, 1));
    }

    #[test]
    fn color_limit_fails() {
        let star: Vec<[usize; 2]> = (1..5).map(|i| [0, i]).collect();
        assert_eq!(
            color_edges(&star, 5, 1, 3),
            Err(ColoringFailure { group_size: 1, max_colors: 3 })
        );
        assert_eq!(color_edges(&star, 5, 1, 4).unwrap().colors(), 4);
    }

    #[test]
    fn bisection_cases() {
        assert_eq!(bisect_largest(512, |_| true), Bisection { best: Some(512), probes: 1 });
        let b = bisect_largest(512, |s| s <= 7);
        assert_eq!(b.best, Some(7));
        assert!(b.probes <= 10);
        assert_eq!(bisect_largest(64, |_| false).best, None);
    }

    #[test]
    fn gather_of_path() {
        let g = gather_structure(&[[0, 1], [1, 2]], 3);
        assert_eq!(g[1], vec![(0, -1.0), (1, 1.0)]);
    }
}
