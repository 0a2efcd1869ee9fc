//! Euclidean projections: onto convex hulls of points (a convex quadratic
//! over the coefficient simplex, solved by projected gradient with a
//! Frank-Wolfe gap certificate) and onto inequality-described polyhedra
//! (Hildreth's dual coordinate scheme).

use crate::linalg::{dist2, dot, norm2, sub};
use crate::polyhedra::{Polyhedron, VPolytope};
use crate::Tolerances;
use crate::{Error, Result};

const PGD_CAP: usize = 200_000;

/// Projects `p` onto `conv(V)`. Returns the projection and its distance.
pub fn project_vpolytope(
    p: &[f64],
    v: &VPolytope,
    tol: &Tolerances,
) -> Result<(Vec<f64>, f64)> {
    let s = v.dim();
    if p.len() != s {
        return Err(Error::DimensionMismatch(format!(
            "projecting a point of length {} onto a polytope in dimension {s}",
            p.len()
        )));
    }
    let t = v.vertices.len();
    if t == 1 {
        let d = dist2(p, &v.vertices[0]);
        return Ok((v.vertices[0].clone(), d));
    }

    // residual columns r_j = v_j - p; minimize f(theta) = 0.5 || R theta ||^2
    let res: Vec<Vec<f64>> = v.vertices.iter().map(|vj| sub(vj, p)).collect();

    // nearest-vertex start
    let mut theta = vec![0.0; t];
    let start = (0..t)
        .min_by(|&a, &b| {
            dot(&res[a], &res[a])
                .partial_cmp(&dot(&res[b], &res[b]))
                .unwrap()
        })
        .unwrap();
    theta[start] = 1.0;

    // Lipschitz constant of the gradient: lambda_max(R^T R) <= trace
    let lip: f64 = res.iter().map(|r| dot(r, r)).sum::<f64>().max(1e-300);
    let step = 1.0 / lip;
    let scale: f64 = 1.0 + res.iter().map(|r| dot(r, r)).fold(0.0, f64::max);
    // absolute target covers distance ~ 0; relative target covers the rest
    let gap_abs = 0.5 * tol.proj * tol.proj;

    let mut img = vec![0.0; s]; // R theta
    let mut grad = vec![0.0; t];
    let mut best_f = f64::INFINITY;
    let mut stall = 0usize;
    for it in 0..PGD_CAP {
        for i in 0..s {
            img[i] = 0.0;
        }
        for (j, r) in res.iter().enumerate() {
            let th = theta[j];
            if th != 0.0 {
                for i in 0..s {
                    img[i] += th * r[i];
                }
            }
        }
        for (j, r) in res.iter().enumerate() {
            grad[j] = dot(r, &img);
        }
        let f = 0.5 * dot(&img, &img);
        // Frank-Wolfe gap bounds the suboptimality of f
        let gmin = grad.iter().cloned().fold(f64::INFINITY, f64::min);
        let gap = dot(&grad, &theta) - gmin;
        if gap <= gap_abs.max(1e-14 * f) || it == PGD_CAP - 1 {
            break;
        }
        // numerical floor: monotone scheme that stops improving has converged
        if f >= best_f - 1e-18 * scale {
            stall += 1;
            if stall > 64 {
                break;
            }
        } else {
            best_f = f;
            stall = 0;
        }
        for j in 0..t {
            theta[j] -= step * grad[j];
        }
        project_simplex(&mut theta);
    }

    let proj: Vec<f64> = (0..s).map(|i| p[i] + img[i]).collect();
    Ok((proj, norm2(&img)))
}

/// Euclidean projection of a vector onto the probability simplex.
fn project_simplex(v: &mut [f64]) {
    let n = v.len();
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let mut css = 0.0;
    let mut rho = 0;
    let mut theta = 0.0;
    for (i, &ui) in u.iter().enumerate() {
        css += ui;
        let t = (css - 1.0) / (i + 1) as f64;
        if ui - t > 0.0 {
            rho = i;
            theta = t;
        }
    }
    let _ = rho;
    for x in v.iter_mut().take(n) {
        *x = (*x - theta).max(0.0);
    }
}

const HILDRETH_CAP: usize = 50_000;

/// Projects `p` onto `{z : M z <= b}` by Hildreth's cyclic dual updates.
/// Works for unbounded polyhedra; errors on infeasible input only when the
/// iteration fails to settle.
pub fn project_polyhedron(
    p: &[f64],
    poly: &Polyhedron,
    tol: &Tolerances,
) -> Result<(Vec<f64>, f64)> {
    let s = poly.dim();
    if p.len() != s {
        return Err(Error::DimensionMismatch(
            "project_polyhedron point dimension".to_string(),
        ));
    }
    if poly.contains(p, tol.feas) {
        return Ok((p.to_vec(), 0.0));
    }
    let r = poly.num_rows();
    let row_sq: Vec<f64> = (0..r).map(|i| dot(poly.row(i), poly.row(i))).collect();
    let mut z = p.to_vec();
    let mut lambda = vec![0.0; r];
    let viol_tol = tol.feas * (1.0 + p.iter().fold(0.0f64, |a, &x| a.max(x.abs())));
    for _ in 0..HILDRETH_CAP {
        let mut moved = 0.0f64;
        for i in 0..r {
            if row_sq[i] <= 1e-30 {
                continue; // zero row carries no geometry
            }
            let resid = dot(poly.row(i), &z) - poly.rhs[i];
            let delta = (lambda[i] + resid / row_sq[i]).max(0.0) - lambda[i];
            if delta != 0.0 {
                lambda[i] += delta;
                for j in 0..s {
                    z[j] -= delta * poly.mat.at(i, j);
                }
                moved = moved.max(delta.abs() * row_sq[i].sqrt());
            }
        }
        let max_viol = poly
            .residuals(&z)
            .iter()
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max);
        if max_viol <= viol_tol && moved <= tol.proj * 1e-3 {
            return Ok((z.clone(), dist2(p, &z)));
        }
    }
    Err(Error::IterationLimit("polyhedron projection"))
}

impl Polyhedron {
    fn row(&self, i: usize) -> &[f64] {
        self.mat.row(i)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tol() -> Tolerances {
        Tolerances::default()
    }

    #[test]
    fn nearest_endpoint() {
        let v = VPolytope::new(vec![vec![1.0, 2.0], vec![1.0, 3.0]]).unwrap();
        let (proj, d) = project_vpolytope(&[0.0, 0.0], &v, &tol()).unwrap();
        assert!(dist2(&proj, &[1.0, 2.0]) < 1e-8);
        assert!((d - 5.0f64.sqrt()).abs() < 1e-8);
    }

    #[test]
    fn interior_of_segment() {
        let v = VPolytope::new(vec![vec![1.0, 2.0], vec![1.0, 3.0]]).unwrap();
        let (proj, d) = project_vpolytope(&[1.0, 2.5], &v, &tol()).unwrap();
        assert!(dist2(&proj, &[1.0, 2.5]) < 1e-8);
        assert!(d < 1e-8);
    }

    #[test]
    fn singleton_identity() {
        let v = VPolytope::new(vec![vec![2.0, 2.0]]).unwrap();
        let (_, d) = project_vpolytope(&[2.0, 2.0], &v, &tol()).unwrap();
        assert_eq!(d, 0.0);
    }

    #[test]
    fn offset_segment_projection() {
        let v = VPolytope::new(vec![vec![0.0, 0.0], vec![2.0, 0.0]]).unwrap();
        let (proj, d) = project_vpolytope(&[1.0, 1.0], &v, &tol()).unwrap();
        assert!(dist2(&proj, &[1.0, 0.0]) < 1e-7);
        assert!((d - 1.0).abs() < 1e-9);
    }

    #[test]
    fn triangle_interior() {
        let v = VPolytope::new(vec![vec![0.0, 0.0], vec![4.0, 0.0], vec![0.0, 4.0]]).unwrap();
        let (_, d) = project_vpolytope(&[1.0, 1.0], &v, &tol()).unwrap();
        assert!(d < 1e-7);
    }

    #[test]
    fn polyhedron_projection_matches_box() {
        let p = Polyhedron::from_box(&[0.0, 0.0], &[1.0, 1.0]).unwrap();
        let (z, d) = project_polyhedron(&[2.0, 0.5], &p, &tol()).unwrap();
        assert!(dist2(&z, &[1.0, 0.5]) < 1e-6);
        assert!((d - 1.0).abs() < 1e-6);
    }

    #[test]
    fn polyhedron_projection_inside_is_identity() {
        let p = Polyhedron::from_box(&[0.0, 0.0], &[1.0, 1.0]).unwrap();
        let (z, d) = project_polyhedron(&[0.25, 0.75], &p, &tol()).unwrap();
        assert_eq!(z, vec![0.25, 0.75]);
        assert_eq!(d, 0.0);
    }

    #[test]
    fn polyhedron_projection_unbounded_set() {
        // half-space x1 >= 2
        let p = Polyhedron::new(
            crate::linalg::Mat::from_rows(&[vec![-1.0, 0.0]]).unwrap(),
            vec![-2.0],
        )
        .unwrap();
        let (z, d) = project_polyhedron(&[0.0, 3.0], &p, &tol()).unwrap();
        assert!(dist2(&z, &[2.0, 3.0]) < 1e-6);
        assert!((d - 2.0).abs() < 1e-6);
    }
}
