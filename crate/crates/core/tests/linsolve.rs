use partape::linsolve::{solve, CsrMatrix, LinearSolverSettings};
use partape::{ActiveScalar, Ad, AdConfig, AdContext, AdError};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Gaussian elimination with partial pivoting.
fn dense_solve(a: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
    let n = b.len();
    let mut m: Vec<Vec<f64>> = a.iter().zip(b).map(|(r, &bi)| {
        let mut r = r.clone();
        r.push(bi);
        r
    }).collect();
    for k in 0..n {
        let p = (k..n).max_by(|&i, &j| m[i][k].abs().total_cmp(&m[j][k].abs())).unwrap();
        m.swap(k, p);
        for i in k + 1..n {
            let f = m[i][k] / m[k][k];
            for j in k..=n {
                m[i][j] -= f * m[k][j];
            }
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|j| m[i][j] * x[j]).sum();
        x[i] = (m[i][n] - s) / m[i][i];
    }
    x
}

fn transpose(a: &[Vec<f64>]) -> Vec<Vec<f64>> {
    (0..a.len()).map(|i| a.iter().map(|r| r[i]).collect()).collect()
}

fn rel_inf(a: &[f64], b: &[f64]) -> f64 {
    let scale = b.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
    a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs())) / scale
}

/// Diagonally dominant matrix with a symmetric pattern and nonsymmetric values.
fn random_system(rng: &mut ChaCha8Rng, n: usize, spd: bool) -> Vec<Vec<f64>> {
    let mut a = vec![vec![0.0f64; n]; n];
    for i in 0..n {
        for j in 0..i {
            if rng.gen_bool(0.4) {
                let v = rng.gen_range(-1.0..1.0);
                a[i][j] = v;
                a[j][i] = if spd { v } else { rng.gen_range(-1.0..1.0) };
            }
        }
    }
    for i in 0..n {
        let off: f64 = (0..n).filter(|&j| j != i).map(|j| a[i][j].abs() + a[j][i].abs()).sum();
        a[i][i] = off + rng.gen_range(0.5..2.0);
    }
    a
}

fn ctx() -> AdContext {
    AdContext::new(AdConfig {
        threads: 2,
        ..AdConfig::default()
    })
}

fn inputs(ad: &Ad, vals: &[f64]) -> Vec<ActiveScalar> {
    vals.iter()
        .map(|&v| {
            let mut x = ActiveScalar::new(v);
            ad.register_input(&mut x).unwrap();
            x
        })
        .collect()
}

/// Records `x = A^{-1} b`, seeds `x̄` and returns `b̄`.
fn solve_adjoint(a: &CsrMatrix, b: &[f64], xbar: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let c = ctx();
    let ad = c.bind().unwrap();
    ad.start_recording();
    let bs = inputs(&ad, b);
    let (x, _) = solve(a, &bs, &LinearSolverSettings::default()).unwrap();
    ad.stop_recording().unwrap();
    ad.ensure_adjoints().unwrap();
    for (xi, &s) in x.iter().zip(xbar) {
        ad.set_derivative(xi.identifier(), s);
    }
    ad.evaluate_all().unwrap();
    let g = bs.iter().map(|v| ad.get_derivative(v.identifier())).collect();
    (x.iter().map(ActiveScalar::value).collect(), g)
}

#[test]
fn identity_system() {
    let (x, g) = solve_adjoint(&CsrMatrix::identity(2), &[1.0, 2.0], &[1.0, 0.0]);
    assert!(rel_inf(&x, &[1.0, 2.0]) < 1e-14);
    assert!(rel_inf(&g, &[1.0, 0.0]) < 1e-14);
}

#[test]
fn upper_triangular_system() {
    let a = CsrMatrix::from_dense(&[vec![2.0, 1.0], vec![0.0, 3.0]]).unwrap();
    let (x, g) = solve_adjoint(&a, &[3.0, 3.0], &[1.0, 1.0]);
    assert!(rel_inf(&x, &[1.0, 1.0]) < 1e-12);
    assert!(rel_inf(&g, &[0.5, 1.0 / 6.0]) < 1e-12);
}

#[test]
fn diagonal_system() {
    let a = CsrMatrix::from_dense(&[vec![2.0, 0.0], vec![0.0, 4.0]]).unwrap();
    let (_, g) = solve_adjoint(&a, &[1.0, 1.0], &[2.0, 4.0]);
    assert!(rel_inf(&g, &[1.0, 1.0]) < 1e-14);
}

#[test]
fn zero_seed_skips_reverse_solve() {
    let c = ctx();
    let ad = c.bind().unwrap();
    ad.start_recording();
    let b = inputs(&ad, &[1.0, 2.0]);
    let a = CsrMatrix::from_dense(&[vec![2.0, 1.0], vec![1.0, 3.0]]).unwrap();
    let (_x, _) = solve(&a, &b, &LinearSolverSettings::default()).unwrap();
    ad.stop_recording().unwrap();
    ad.ensure_adjoints().unwrap();
    ad.set_derivative(b[0].identifier(), 7.0);
    ad.evaluate_all().unwrap();
    assert_eq!(ad.get_derivative(b[0].identifier()), 7.0);
    assert_eq!(ad.get_derivative(b[1].identifier()), 0.0);
    let ext = ad.externals();
    assert_eq!(ext.len(), 1);
    assert_eq!(ext[0].reverse_iterations(), Some(0));
}

#[test]
fn passive_rhs_records_nothing() {
    let c = ctx();
    let ad = c.bind().unwrap();
    ad.start_recording();
    let b = vec![ActiveScalar::new(1.0), ActiveScalar::new(2.0)];
    let (x, _) = solve(&CsrMatrix::identity(2), &b, &LinearSolverSettings::default()).unwrap();
    assert!(x.iter().all(|v| !v.is_active()));
    assert!(ad.externals().is_empty());
}

#[test]
fn solve_in_region_is_unsupported() {
    let c = ctx();
    let ad = c.bind().unwrap();
    ad.start_recording();
    let b = inputs(&ad, &[1.0]);
    let a = CsrMatrix::identity(1);
    let errs = std::sync::Mutex::new(Vec::new());
    ad.parallel_region(2, |_| {
        let r = solve(&a, &b, &LinearSolverSettings::default());
        errs.lock().unwrap().push(r.err());
    })
    .unwrap();
    for e in errs.into_inner().unwrap() {
        assert!(matches!(e, Some(AdError::Unsupported(_))));
    }
}

#[test]
fn random_spd_matches_dense_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let a = random_system(&mut rng, 10, true);
    let b: Vec<f64> = (0..10).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let w: Vec<f64> = (0..10).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let (x, g) = solve_adjoint(&CsrMatrix::from_dense(&a).unwrap(), &b, &w);
    assert!(rel_inf(&x, &dense_solve(&a, &b)) <= 1e-8);
    assert!(rel_inf(&g, &dense_solve(&transpose(&a), &w)) <= 1e-8);
}

#[test]
fn random_nonsymmetric_systems_match_dense_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..50 {
        let n = rng.gen_range(1..=20);
        let a = random_system(&mut rng, n, false);
        let b: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let w: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let (_, g) = solve_adjoint(&CsrMatrix::from_dense(&a).unwrap(), &b, &w);
        assert!(rel_inf(&g, &dense_solve(&transpose(&a), &w)) <= 1e-8);
    }
}

#[test]
fn transpose_is_an_involution() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..20 {
        let n = rng.gen_range(1..=20);
        let a = CsrMatrix::from_dense(&random_system(&mut rng, n, false)).unwrap();
        let mut t = a.clone();
        t.transpose_in_place().unwrap();
        t.transpose_in_place().unwrap();
        let bits = |m: &CsrMatrix| m.values().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&t), bits(&a));
    }
    let s = CsrMatrix::from_dense(&random_system(&mut rng, 8, true)).unwrap();
    let mut t = s.clone();
    t.transpose_in_place().unwrap();
    assert_eq!(t.to_dense(), s.to_dense());
}

#[test]
fn matches_black_box_jacobi_iteration() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let n = 8;
    let a = random_system(&mut rng, n, false);
    let b: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let w: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let (_, g) = solve_adjoint(&CsrMatrix::from_dense(&a).unwrap(), &b, &w);

    let c = ctx();
    let ad = c.bind().unwrap();
    ad.start_recording();
    let bs = inputs(&ad, &b);
    let mut x: Vec<ActiveScalar> = (0..n).map(|_| ActiveScalar::new(0.0)).collect();
    for _ in 0..200 {
        x = (0..n)
            .map(|i| {
                let mut r = bs[i].clone();
                for j in (0..n).filter(|&j| j != i && a[i][j] != 0.0) {
                    r -= &x[j] * a[i][j];
                }
                r / a[i][i]
            })
            .collect();
    }
    let f: ActiveScalar = x.iter().zip(&w).map(|(xi, &wi)| xi * wi).sum();
    ad.stop_recording().unwrap();
    ad.ensure_adjoints().unwrap();
    ad.set_derivative(f.identifier(), 1.0);
    ad.evaluate_all().unwrap();
    let bb: Vec<f64> = bs.iter().map(|v| ad.get_derivative(v.identifier())).collect();
    assert!(rel_inf(&g, &bb) <= 1e-6);
}
