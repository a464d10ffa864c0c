//! Restarted GMRES for complex, matrix-free linear systems.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::grid::dot;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GmresConfig {
    /// Stop once ‖b − Ax‖ ≤ tol · ‖b‖.
    pub tol: f64,
    pub restart: usize,
    /// Total Arnoldi steps over all cycles.
    pub max_iter: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GmresOutcome {
    pub iterations: usize,
    pub relative_residual: f64,
    pub converged: bool,
}

const MIN_PAR_LEN: usize = 4096;

fn norm(v: &[Complex64]) -> f64 {
    dot(v, v).re.sqrt()
}

fn axpy(alpha: Complex64, x: &[Complex64], y: &mut [Complex64]) {
    y.par_iter_mut()
        .with_min_len(MIN_PAR_LEN)
        .zip(x.par_iter().with_min_len(MIN_PAR_LEN))
        .for_each(|(yi, xi)| *yi += alpha * xi);
}

fn scale_into(alpha: f64, x: &[Complex64], y: &mut [Complex64]) {
    y.par_iter_mut()
        .with_min_len(MIN_PAR_LEN)
        .zip(x.par_iter().with_min_len(MIN_PAR_LEN))
        .for_each(|(yi, xi)| *yi = xi * alpha);
}

/// Givens rotation zeroing `b` against `a`: returns (c, s) with
/// [c s; −s̄ c]·[a; b] = [r; 0].
fn givens(a: Complex64, b: Complex64) -> (f64, Complex64) {
    let na = a.norm();
    if na == 0.0 {
        return (0.0, Complex64::new(1.0, 0.0));
    }
    let r = a.norm().hypot(b.norm());
    (na / r, (a / na) * b.conj() / r)
}

/// Solves `A x = b`, starting from the incoming `x`. `apply(v, out)` must
/// overwrite `out` with `A v`.
pub fn gmres<F>(apply: F, b: &[Complex64], x: &mut [Complex64], cfg: &GmresConfig) -> GmresOutcome
where
    F: Fn(&[Complex64], &mut [Complex64]),
{
    let n = b.len();
    assert_eq!(x.len(), n);
    let zero = Complex64::new(0.0, 0.0);
    let b_norm = norm(b);
    if b_norm == 0.0 {
        x.iter_mut().for_each(|v| *v = zero);
        return GmresOutcome {
            iterations: 0,
            relative_residual: 0.0,
            converged: true,
        };
    }
    let m = cfg.restart.max(1);
    let mut basis: Vec<Vec<Complex64>> = Vec::with_capacity(m + 1);
    let mut w = vec![zero; n];
    let mut r = vec![zero; n];
    let mut iterations = 0;

    loop {
        apply(x, &mut r);
        r.par_iter_mut()
            .with_min_len(MIN_PAR_LEN)
            .zip(b.par_iter().with_min_len(MIN_PAR_LEN))
            .for_each(|(ri, bi)| *ri = bi - *ri);
        let beta = norm(&r);
        let rel = beta / b_norm;
        if rel <= cfg.tol || iterations >= cfg.max_iter {
            return GmresOutcome {
                iterations,
                relative_residual: rel,
                converged: rel <= cfg.tol,
            };
        }

        basis.clear();
        let mut v0 = vec![zero; n];
        scale_into(1.0 / beta, &r, &mut v0);
        basis.push(v0);
        // Column-major Hessenberg, h[i] holds column i (length i + 2).
        let mut h: Vec<Vec<Complex64>> = Vec::with_capacity(m);
        let mut cs: Vec<(f64, Complex64)> = Vec::with_capacity(m);
        let mut g = vec![zero; m + 1];
        g[0] = Complex64::new(beta, 0.0);
        let mut k_used = 0;

        for i in 0..m {
            apply(&basis[i], &mut w);
            let mut col = vec![zero; i + 2];
            for (jj, v) in basis.iter().enumerate() {
                let hij = dot(&w, v);
                col[jj] = hij;
                axpy(-hij, v, &mut w);
            }
            let h_next = norm(&w);
            col[i + 1] = Complex64::new(h_next, 0.0);
            for (jj, &(c, s)) in cs.iter().enumerate() {
                let a = col[jj];
                let bb = col[jj + 1];
                col[jj] = a * c + s * bb;
                col[jj + 1] = -s.conj() * a + bb * c;
            }
            let (c, s) = givens(col[i], col[i + 1]);
            col[i] = col[i] * c + s * col[i + 1];
            col[i + 1] = zero;
            let gi = g[i];
            g[i] = gi * c;
            g[i + 1] = -s.conj() * gi;
            cs.push((c, s));
            h.push(col);
            iterations += 1;
            k_used = i + 1;

            let est = g[i + 1].norm() / b_norm;
            if est <= cfg.tol || iterations >= cfg.max_iter || h_next == 0.0 {
                break;
            }
            let mut v = vec![zero; n];
            scale_into(1.0 / h_next, &w, &mut v);
            basis.push(v);
        }

        // Back substitution on the k_used × k_used triangle.
        let mut y = vec![zero; k_used];
        for i in (0..k_used).rev() {
            let mut acc = g[i];
            for jj in (i + 1)..k_used {
                acc -= h[jj][i] * y[jj];
            }
            y[i] = acc / h[i][i];
        }
        for (yi, v) in y.iter().zip(&basis) {
            axpy(*yi, v, x);
        }
    }
}
