//! Min-norm element of `q0 + cone(columns)`: the nonnegative least squares
//! problem `min_{nu >= 0} || q0 + M nu ||`, solved by the Lawson-Hanson
//! active-set scheme on tiny dense systems.

use crate::linalg::{dot, norm2, solve_square, Mat};
use crate::Tolerances;
use crate::{Error, Result};

/// Returns `(nu, value)` with `nu >= 0` minimizing `|| q0 + cols * nu ||_2`.
/// `cols` is `s x t`; `t = 0` yields `|| q0 ||`.
pub fn nnls_min_norm(cols: &Mat, q0: &[f64], tol: &Tolerances) -> Result<(Vec<f64>, f64)> {
    let s = cols.rows;
    let t = cols.cols;
    if q0.len() != s && t > 0 {
        return Err(Error::DimensionMismatch(format!(
            "nnls: q0 of length {} against {} matrix rows",
            q0.len(),
            s
        )));
    }
    if t == 0 {
        return Ok((Vec::new(), norm2(q0)));
    }

    // Lawson-Hanson on min || A nu - b || with A = cols, b = -q0
    let b: Vec<f64> = q0.iter().map(|x| -x).collect();
    let mut nu = vec![0.0; t];
    let mut passive = vec![false; t];
    let w_scale = 1.0 + norm2(&b) * (1.0 + cols.max_abs());
    let cap = 30 * t + 60;

    let column = |j: usize| -> Vec<f64> { (0..s).map(|i| cols.at(i, j)).collect() };

    for _ in 0..cap {
        // residual and dual
        let mut resid = b.clone();
        for j in 0..t {
            if nu[j] != 0.0 {
                let cj = column(j);
                for i in 0..s {
                    resid[i] -= nu[j] * cj[i];
                }
            }
        }
        let mut best: Option<(usize, f64)> = None;
        for j in 0..t {
            if !passive[j] {
                let w = dot(&column(j), &resid);
                if w > tol.nnls * w_scale && best.map_or(true, |(_, bw)| w > bw) {
                    best = Some((j, w));
                }
            }
        }
        let Some((enter, _)) = best else {
            let value = norm2(&resid);
            return Ok((nu, value));
        };
        passive[enter] = true;

        // inner loop: unconstrained least squares on the passive set,
        // clipping until every passive coefficient is positive
        loop {
            let idx: Vec<usize> = (0..t).filter(|&j| passive[j]).collect();
            let k = idx.len();
            let mut gram = Mat::zeros(k, k);
            let mut rhs = vec![0.0; k];
            for (a, &ja) in idx.iter().enumerate() {
                let ca = column(ja);
                rhs[a] = dot(&ca, &b);
                for (c, &jc) in idx.iter().enumerate() {
                    gram.set(a, c, dot(&ca, &column(jc)));
                }
            }
            // ridge fallback for rank-deficient passive sets
            let z = solve_square(&gram, &rhs).or_else(|| {
                let mut g = gram.clone();
                let bump = 1e-12 * (1.0 + g.max_abs());
                for i in 0..k {
                    let v = g.at(i, i) + bump;
                    g.set(i, i, v);
                }
                solve_square(&g, &rhs)
            });
            let Some(z) = z else {
                return Err(Error::IterationLimit("nnls normal equations"));
            };
            if z.iter().all(|&v| v > tol.nnls) {
                for (a, &ja) in idx.iter().enumerate() {
                    nu[ja] = z[a];
                }
                break;
            }
            // step from nu toward z, stopping at the first zero crossing
            let mut alpha = 1.0f64;
            for (a, &ja) in idx.iter().enumerate() {
                if z[a] <= tol.nnls {
                    let cur = nu[ja];
                    if cur - z[a] > 0.0 {
                        alpha = alpha.min(cur / (cur - z[a]));
                    }
                }
            }
            for (a, &ja) in idx.iter().enumerate() {
                nu[ja] += alpha * (z[a] - nu[ja]);
                if nu[ja] <= tol.nnls {
                    nu[ja] = 0.0;
                    passive[ja] = false;
                }
            }
        }
    }
    Err(Error::IterationLimit("nnls"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tol() -> Tolerances {
        Tolerances::default()
    }

    #[test]
    fn componentwise_clipping() {
        let cols = Mat::identity(2);
        let (nu, value) = nnls_min_norm(&cols, &[1.0, -1.0], &tol()).unwrap();
        assert!((value - 1.0).abs() < 1e-9);
        assert!(nu[0].abs() < 1e-9);
        assert!((nu[1] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn empty_cone_plain_norm() {
        let cols = Mat::zeros(2, 0);
        let (nu, value) = nnls_min_norm(&cols, &[3.0, 4.0], &tol()).unwrap();
        assert!(nu.is_empty());
        assert!((value - 5.0).abs() < 1e-12);
    }

    #[test]
    fn exact_cancellation() {
        let cols = Mat::from_rows(&[vec![-1.0], vec![0.0]]).unwrap();
        let (nu, value) = nnls_min_norm(&cols, &[2.0, 0.0], &tol()).unwrap();
        assert!(value < 1e-9);
        assert!((nu[0] - 2.0).abs() < 1e-8);
    }

    #[test]
    fn cone_cannot_help() {
        // both columns point away from -q0
        let cols = Mat::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let (nu, value) = nnls_min_norm(&cols, &[1.0, 1.0], &tol()).unwrap();
        assert!(nu.iter().all(|&v| v.abs() < 1e-9));
        assert!((value - 2.0f64.sqrt()).abs() < 1e-9);
    }

    #[test]
    fn two_column_mix() {
        // q0 = (1, 1), cone spanned by (-1, 0) and (0, -1): reaches zero
        let cols = Mat::from_rows(&[vec![-1.0, 0.0], vec![0.0, -1.0]]).unwrap();
        let (nu, value) = nnls_min_norm(&cols, &[1.0, 1.0], &tol()).unwrap();
        assert!(value < 1e-9);
        assert!((nu[0] - 1.0).abs() < 1e-8);
        assert!((nu[1] - 1.0).abs() < 1e-8);
    }
}
