//! Restarted, right-preconditioned GMRES with modified Gram-Schmidt.

use super::SolverError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GmresSettings {
    /// Relative residual target `|b - Ax| / |b|`.
    pub tol: f64,
    /// Absolute residual target; iteration also stops once `|b - Ax|` is below it.
    pub abs_tol: f64,
    pub max_iters: usize,
    pub restart: usize,
}

impl Default for GmresSettings {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            abs_tol: 0.0,
            max_iters: 1000,
            restart: 20,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct GmresStats {
    pub iterations: usize,
    /// Final relative residual.
    pub residual: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Solves `A x = b` for the operator `apply(v, out) : out = A v`.
///
/// `x` holds the initial guess on entry. `inv_diag`, if given, is the Jacobi
/// preconditioner `M^{-1}` applied from the right.
pub fn gmres<E, F>(
    mut apply: F,
    inv_diag: Option<&[f64]>,
    b: &[f64],
    x: &mut [f64],
    settings: &GmresSettings,
) -> Result<GmresStats, E>
where
    E: From<SolverError>,
    F: FnMut(&[f64], &mut [f64]) -> Result<(), E>,
{
    let n = b.len();
    if x.len() != n {
        return Err(SolverError::Structure(format!("solution length {} != {n}", x.len())).into());
    }
    let bnorm = norm(b);
    if bnorm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok(GmresStats::default());
    }
    let m = settings.restart.max(1);
    let precond = |v: &[f64], out: &mut [f64]| match inv_diag {
        Some(d) => out.iter_mut().zip(v.iter().zip(d)).for_each(|(o, (a, b))| *o = a * b),
        None => out.copy_from_slice(v),
    };
    let converged = |r: f64| r / bnorm <= settings.tol || r <= settings.abs_tol;

    let mut r = vec![0.0; n];
    let mut w = vec![0.0; n];
    let mut z = vec![0.0; n];
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(m + 1);
    let mut h = vec![vec![0.0; m]; m + 1];
    let mut cs = vec![0.0; m];
    let mut sn = vec![0.0; m];
    let mut g = vec![0.0; m + 1];
    let mut iterations = 0usize;

    loop {
        apply(x, &mut r)?;
        r.iter_mut().zip(b).for_each(|(ri, bi)| *ri = bi - *ri);
        let beta = norm(&r);
        if converged(beta) {
            return Ok(GmresStats {
                iterations,
                residual: beta / bnorm,
            });
        }
        if iterations >= settings.max_iters {
            return Err(SolverError::NotConverged {
                residual: beta / bnorm,
                iterations,
            }
            .into());
        }
        basis.clear();
        basis.push(r.iter().map(|v| v / beta).collect());
        g.iter_mut().for_each(|v| *v = 0.0);
        g[0] = beta;
        let mut k = 0;
        let mut breakdown = false;
        for j in 0..m {
            precond(&basis[j], &mut z);
            apply(&z, &mut w)?;
            for (i, v) in basis.iter().enumerate() {
                let hij = dot(&w, v);
                h[i][j] = hij;
                w.iter_mut().zip(v).for_each(|(wk, vk)| *wk -= hij * vk);
            }
            let hnext = norm(&w);
            h[j + 1][j] = hnext;
            for i in 0..j {
                let t = cs[i] * h[i][j] + sn[i] * h[i + 1][j];
                h[i + 1][j] = -sn[i] * h[i][j] + cs[i] * h[i + 1][j];
                h[i][j] = t;
            }
            let d = h[j][j].hypot(h[j + 1][j]);
            if d == 0.0 {
                breakdown = true;
                k = j;
                break;
            }
            cs[j] = h[j][j] / d;
            sn[j] = h[j + 1][j] / d;
            h[j][j] = d;
            h[j + 1][j] = 0.0;
            g[j + 1] = -sn[j] * g[j];
            g[j] *= cs[j];
            iterations += 1;
            k = j + 1;
            let est = g[j + 1].abs();
            if converged(est) || iterations >= settings.max_iters {
                break;
            }
            if hnext <= 1e-14 * beta {
                breakdown = true;
                break;
            }
            basis.push(w.iter().map(|v| v / hnext).collect());
        }
        // back substitution for the k x k upper triangle
        let mut y = vec![0.0; k];
        for i in (0..k).rev() {
            let mut s = g[i];
            for l in i + 1..k {
                s -= h[i][l] * y[l];
            }
            y[i] = s / h[i][i];
        }
        w.iter_mut().for_each(|v| *v = 0.0);
        for (yi, v) in y.iter().zip(&basis) {
            w.iter_mut().zip(v).for_each(|(wk, vk)| *wk += yi * vk);
        }
        precond(&w, &mut z);
        x.iter_mut().zip(&z).for_each(|(xi, zi)| *xi += zi);
        if breakdown {
            apply(x, &mut r)?;
            r.iter_mut().zip(b).for_each(|(ri, bi)| *ri = bi - *ri);
            let res = norm(&r);
            if converged(res) {
                return Ok(GmresStats {
                    iterations,
                    residual: res / bnorm,
                });
            }
            if k == 0 {
                return Err(SolverError::Breakdown {
                    residual: res / bnorm,
                    iterations,
                }
                .into());
            }
        }
    }
}
