//! Restarted GMRES for matrix-free real operators.

use crate::error::Result;

#[derive(Debug, Clone)]
pub struct GmresOutcome {
    pub x: Vec<f64>,
    /// `||b - A x|| / ||b||`, as tracked by the Arnoldi recurrence.
    pub relative_residual: f64,
    /// Operator applications.
    pub iterations: usize,
    pub converged: bool,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Solves `A x = b` from `x = 0` with restart length `restart`, stopping at
/// relative residual `rel_tol` or after `max_restarts` cycles.
pub fn gmres(
    mut apply: impl FnMut(&[f64]) -> Result<Vec<f64>>,
    b: &[f64],
    restart: usize,
    max_restarts: usize,
    rel_tol: f64,
) -> Result<GmresOutcome> {
    let n = b.len();
    let b_norm = norm(b);
    let mut x = vec![0.0; n];
    if b_norm == 0.0 {
        return Ok(GmresOutcome {
            x,
            relative_residual: 0.0,
            iterations: 0,
            converged: true,
        });
    }
    let restart = restart.max(1).min(n.max(1));
    let mut iterations = 0;
    let mut rel = 1.0;

    for cycle in 0..max_restarts.max(1) {
        let mut r = b.to_vec();
        if cycle > 0 {
            let ax = apply(&x)?;
            iterations += 1;
            for (ri, ai) in r.iter_mut().zip(&ax) {
                *ri -= ai;
            }
        }
        let beta = norm(&r);
        rel = beta / b_norm;
        if rel <= rel_tol {
            return Ok(GmresOutcome {
                x,
                relative_residual: rel,
                iterations,
                converged: true,
            });
        }

        let mut basis: Vec<Vec<f64>> = Vec::with_capacity(restart + 1);
        basis.push(r.iter().map(|v| v / beta).collect());
        // h[j] is column j of the Hessenberg matrix (length j + 2)
        let mut h: Vec<Vec<f64>> = Vec::with_capacity(restart);
        let mut cs: Vec<f64> = Vec::with_capacity(restart);
        let mut sn: Vec<f64> = Vec::with_capacity(restart);
        let mut g = vec![0.0; restart + 1];
        g[0] = beta;
        let mut used = 0;

        for j in 0..restart {
            let mut w = apply(&basis[j])?;
            iterations += 1;
            let mut col = vec![0.0; j + 2];
            for (i, v) in basis.iter().enumerate() {
                let hij = dot(&w, v);
                col[i] = hij;
                for (wk, vk) in w.iter_mut().zip(v) {
                    *wk -= hij * vk;
                }
            }
            let w_norm = norm(&w);
            col[j + 1] = w_norm;

            for i in 0..j {
                let t = cs[i] * col[i] + sn[i] * col[i + 1];
                col[i + 1] = -sn[i] * col[i] + cs[i] * col[i + 1];
                col[i] = t;
            }
            let denom = col[j].hypot(col[j + 1]);
            let (c, s) = if denom == 0.0 {
                (1.0, 0.0)
            } else {
                (col[j] / denom, col[j + 1] / denom)
            };
            col[j] = denom;
            col[j + 1] = 0.0;
            g[j + 1] = -s * g[j];
            g[j] *= c;
            cs.push(c);
            sn.push(s);
            h.push(col);
            used = j + 1;

            rel = g[j + 1].abs() / b_norm;
            if rel <= rel_tol || w_norm <= 1e-14 * beta {
                break;
            }
            basis.push(w.iter().map(|v| v / w_norm).collect());
        }

        // back substitution on the triangular system
        let mut y = vec![0.0; used];
        for i in (0..used).rev() {
            let mut s = g[i];
            for k in i + 1..used {
                s -= h[k][i] * y[k];
            }
            y[i] = if h[i][i] != 0.0 { s / h[i][i] } else { 0.0 };
        }
        for (k, yk) in y.iter().enumerate() {
            for (xi, vi) in x.iter_mut().zip(&basis[k]) {
                *xi += yk * vi;
            }
        }
        if rel <= rel_tol {
            return Ok(GmresOutcome {
                x,
                relative_residual: rel,
                iterations,
                converged: true,
            });
        }
    }
    Ok(GmresOutcome {
        x,
        relative_residual: rel,
        iterations,
        converged: false,
    })
}
