use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use partape_fvm::{
    adaptive_group_size, bisect_largest, color_edges, coloring_efficiency, gather_structure, is_conflict_free, Coloring,
    GroupSizeChoice, Mesh,
};

/// Independent check: within a color, every point is owned by at most one
/// group; the groups partition the edges into contiguous runs.
fn brute_force_valid(c: &Coloring, edges: &[[usize; 2]], num_points: usize) -> bool {
    let mut next = 0;
    for g in &c.groups {
        if g.edges.start != next || g.edges.is_empty() || g.edges.len() > c.group_size {
            return false;
        }
        next = g.edges.end;
    }
    if next != edges.len() {
        return false;
    }
    for (color, groups) in c.color_groups.iter().enumerate() {
        let mut owner = vec![usize::MAX; num_points];
        for &gi in groups {
            if c.groups[gi].color != color {
                return false;
            }
            for &[a, b] in &edges[c.groups[gi].edges.clone()] {
                for p in [a, b] {
                    if owner[p] != usize::MAX && owner[p] != gi {
                        return false;
                    }
                    owner[p] = gi;
                }
            }
        }
    }
    c.color_groups.iter().map(Vec::len).sum::<usize>() == c.groups.len()
}

#[test]
fn grid_colorings_are_conflict_free() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for n in [1, 2, 5, 16, 33, 65] {
        let mesh = Mesh::generate_grid(n, n, 1.0, 1.0).unwrap();
        for s in [1, 2, 3, 64, 512] {
            let c = color_edges(mesh.edges(), mesh.num_points(), s, 255).unwrap();
            assert!(brute_force_valid(&c, mesh.edges(), mesh.num_points()), "n={n} s={s}");
        }
    }
    for _ in 0..100 {
        let n = rng.gen_range(1..=65);
        let s = rng.gen_range(1..=600);
        let mesh = Mesh::generate_grid(n, rng.gen_range(1..=65), 1.0, 1.0).unwrap();
        let c = color_edges(mesh.edges(), mesh.num_points(), s, 255).unwrap();
        assert!(brute_force_valid(&c, mesh.edges(), mesh.num_points()), "n={n} s={s}");
    }
}

#[test]
fn library_checker_agrees_with_oracle() {
    let mesh = Mesh::generate_grid(9, 7, 1.0, 1.0).unwrap();
    for s in [1, 4, 10, 50] {
        let c = color_edges(mesh.edges(), mesh.num_points(), s, 255).unwrap();
        assert!(is_conflict_free(&c, mesh.edges()));
        let mut broken = c.clone();
        // Move a group into the color of a group it touches.
        let g0 = broken.color_groups[0][0];
        let touching = (0..broken.groups.len()).find(|&g| {
            g != g0 && broken.groups[g].color != broken.groups[g0].color && {
                let pts = |g: usize| -> Vec<usize> { mesh.edges()[broken.groups[g].edges.clone()].iter().flatten().copied().collect() };
                let a = pts(g0);
                pts(g).iter().any(|p| a.contains(p))
            }
        });
        if let Some(g) = touching {
            let old = broken.groups[g].color;
            broken.color_groups[old].retain(|&x| x != g);
            broken.groups[g].color = 0;
            broken.color_groups[0].push(g);
            assert!(!is_conflict_free(&broken, mesh.edges()));
            assert!(!brute_force_valid(&broken, mesh.edges(), mesh.num_points()));
        }
    }
}

#[test]
fn one_group_covers_everything() {
    let mesh = Mesh::generate_grid(4, 4, 1.0, 1.0).unwrap();
    let c = color_edges(mesh.edges(), mesh.num_points(), 10_000, 255).unwrap();
    assert_eq!((c.groups.len(), c.colors()), (1, 1));
    assert_eq!(coloring_efficiency(&c, 1), mesh.num_edges() as f64 / 10_000.0);
}

#[test]
fn single_edge_mesh() {
    let c = color_edges(&[[0, 1]], 2, 1, 255).unwrap();
    assert_eq!(c.colors(), 1);
    assert!(brute_force_valid(&c, &[[0, 1]], 2));
}

#[test]
fn efficiency_matches_slot_count() {
    let mesh = Mesh::generate_grid(12, 12, 1.0, 1.0).unwrap();
    for s in [1, 7, 32] {
        let c = color_edges(mesh.edges(), mesh.num_points(), s, 255).unwrap();
        for t in [1, 2, 4] {
            let mut slots = 0;
            for groups in &c.color_groups {
                let mut per_thread = vec![0; t];
                for k in 0..groups.len() {
                    per_thread[k % t] += 1;
                }
                slots += per_thread.iter().max().unwrap() * t * s;
            }
            let e = mesh.num_edges() as f64 / slots as f64;
            assert!((coloring_efficiency(&c, t) - e).abs() < 1e-15);
            assert!(e <= 1.0);
        }
    }
}

#[test]
fn bisection_matches_linear_scan() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..50 {
        let max = rng.gen_range(1..=2048);
        let threshold = rng.gen_range(0..=max);
        let mut calls = 0;
        let b = bisect_largest(max, |s| {
            calls += 1;
            s <= threshold
        });
        let scan = (1..=max).rev().find(|&s| s <= threshold);
        assert_eq!(b.best, scan, "max={max} t={threshold}");
        assert_eq!(calls, b.probes);
        assert!(b.probes <= 2 + (max as f64).log2().ceil() as usize);
    }
}

#[test]
fn adaptive_choice_is_admissible() {
    let mesh = Mesh::generate_grid(40, 40, 1.0, 1.0).unwrap();
    for threads in [1, 2, 4, 8] {
        match adaptive_group_size(mesh.edges(), mesh.num_points(), 512, threads, 0.875, 255) {
            GroupSizeChoice::Colored { size, coloring, probes } => {
                assert!(size <= 512 && probes >= 1);
                assert_eq!(coloring.group_size, size);
                assert!(coloring_efficiency(&coloring, threads) >= 0.875);
                assert!(brute_force_valid(&coloring, mesh.edges(), mesh.num_points()));
            }
            GroupSizeChoice::Fallback { probes } => assert!(probes >= 1),
        }
    }
    // An impossible threshold always falls back.
    assert!(matches!(
        adaptive_group_size(mesh.edges(), mesh.num_points(), 512, 4, 1.1, 255),
        GroupSizeChoice::Fallback { .. }
    ));
}

#[test]
fn gather_telescopes() {
    let mesh = Mesh::generate_grid(8, 5, 1.0, 1.0).unwrap();
    let g = gather_structure(mesh.edges(), mesh.num_points());
    let flux: Vec<f64> = (0..mesh.num_edges()).map(|e| (e as f64 * 0.37).sin()).collect();
    let total: f64 = g.iter().flatten().map(|&(e, s)| s * flux[e]).sum();
    assert!(total.abs() < 1e-12);
    assert_eq!(g.iter().map(Vec::len).sum::<usize>(), 2 * mesh.num_edges());
}
