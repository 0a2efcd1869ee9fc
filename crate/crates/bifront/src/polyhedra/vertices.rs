//! Combinatorial vertex enumeration, boundedness tests, and optimal faces.
//!
//! Enumeration brute-forces all `s`-subsets of rows behind explicit size
//! guards; the verification problems never exceed a handful of variables.

use crate::linalg::{dot, norm_inf, solve_square, Mat};
use crate::polyhedra::{lp_solve, LpOutcome, Polyhedron, VPolytope};
use crate::Tolerances;
use crate::{Error, Result};

const MAX_DIM: usize = 6;
const MAX_ROWS: usize = 24;

/// Enumerates every vertex of a bounded polyhedron exactly once (vertices
/// within `tol.vert` of each other are merged). Output is sorted
/// lexicographically for determinism.
pub fn vertex_enumerate(p: &Polyhedron, tol: &Tolerances) -> Result<Vec<Vec<f64>>> {
    let s = p.dim();
    let r = p.num_rows();
    if s > MAX_DIM || r > MAX_ROWS {
        return Err(Error::GuardExceeded(format!(
            "vertex enumeration limited to dim <= {MAX_DIM}, rows <= {MAX_ROWS} (got {s}, {r})"
        )));
    }
    match lp_solve(&vec![0.0; s], p, tol)? {
        LpOutcome::Infeasible { .. } => return Err(Error::Infeasible),
        LpOutcome::Optimal { .. } => {}
        LpOutcome::Unbounded { .. } => unreachable!("zero objective cannot be unbounded"),
    }
    // fewer rows than dimensions cannot pin down a vertex
    if r < s || !is_bounded(p, tol)? {
        return Err(Error::Unbounded);
    }

    let feas_scale = 1.0 + norm_inf(&p.rhs);
    let mut vertices: Vec<Vec<f64>> = Vec::new();
    let mut subset: Vec<usize> = (0..s).collect();
    loop {
        let rows: Vec<Vec<f64>> = subset.iter().map(|&i| p.mat.row(i).to_vec()).collect();
        let sub = Mat::from_rows(&rows)?;
        let rhs: Vec<f64> = subset.iter().map(|&i| p.rhs[i]).collect();
        if let Some(v) = solve_square(&sub, &rhs) {
            if p.contains(&v, tol.feas * feas_scale)
                && !vertices
                    .iter()
                    .any(|u| u.iter().zip(&v).all(|(a, b)| (a - b).abs() <= tol.vert))
            {
                vertices.push(v);
            }
        }
        if !next_subset(&mut subset, r) {
            break;
        }
    }
    vertices.sort_by(|a, b| {
        a.iter()
            .zip(b)
            .find_map(|(x, y)| {
                let c = x.partial_cmp(y).unwrap();
                (c != std::cmp::Ordering::Equal).then_some(c)
            })
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    Ok(vertices)
}

fn next_subset(subset: &mut [usize], n: usize) -> bool {
    let k = subset.len();
    let mut i = k;
    while i > 0 {
        i -= 1;
        if subset[i] < n - (k - i) {
            subset[i] += 1;
            for j in i + 1..k {
                subset[j] = subset[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// True iff the recession cone `{z : M z <= 0}` is `{0}`, decided by `2s`
/// LPs over the cone intersected with the unit box. The polyhedron must be
/// nonempty (checked first; infeasibility is reported distinctly).
pub fn is_bounded(p: &Polyhedron, tol: &Tolerances) -> Result<bool> {
    let s = p.dim();
    match lp_solve(&vec![0.0; s], p, tol)? {
        LpOutcome::Infeasible { .. } => return Err(Error::Infeasible),
        _ => {}
    }
    // recession cone rows plus the unit box
    let cone_rows = Mat {
        rows: p.mat.rows,
        cols: s,
        data: p.mat.data.clone(),
    };
    let boxed = Polyhedron::new(cone_rows, vec![0.0; p.mat.rows])?;
    let bx = Polyhedron::from_box(&vec![-1.0; s], &vec![1.0; s])?;
    let clipped = Polyhedron::new(boxed.mat.vstack(&bx.mat)?, {
        let mut rhs = boxed.rhs.clone();
        rhs.extend_from_slice(&bx.rhs);
        rhs
    })?;
    for i in 0..s {
        for sgn in [1.0, -1.0] {
            let mut c = vec![0.0; s];
            c[i] = -sgn; // maximize sgn * z_i
            match lp_solve(&c, &clipped, tol)? {
                LpOutcome::Optimal { value, .. } => {
                    // a nonzero normalized ray reaches magnitude 1
                    if -value > 0.5 {
                        return Ok(false);
                    }
                }
                LpOutcome::Unbounded { .. } | LpOutcome::Infeasible { .. } => {
                    unreachable!("clipped cone is a nonempty compact set")
                }
            }
        }
    }
    Ok(true)
}

/// The optimal face of `min c^T z` over a bounded polyhedron: all vertices
/// within `tol.face` of the optimal value.
pub fn optimal_face(c: &[f64], p: &Polyhedron, tol: &Tolerances) -> Result<VPolytope> {
    let value = match lp_solve(c, p, tol)? {
        LpOutcome::Optimal { value, .. } => value,
        LpOutcome::Infeasible { .. } => return Err(Error::Infeasible),
        LpOutcome::Unbounded { .. } => return Err(Error::Unbounded),
    };
    let vertices = vertex_enumerate(p, tol)?;
    let cut = value + tol.face * (1.0 + value.abs());
    let face: Vec<Vec<f64>> = vertices
        .into_iter()
        .filter(|v| dot(c, v) <= cut)
        .collect();
    VPolytope::new(face)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_square() -> Polyhedron {
        Polyhedron::from_box(&[0.0, 0.0], &[1.0, 1.0]).unwrap()
    }

    #[test]
    fn unit_square_vertices() {
        let v = vertex_enumerate(&unit_square(), &Tolerances::default()).unwrap();
        assert_eq!(
            v,
            vec![
                vec![0.0, 0.0],
                vec![0.0, 1.0],
                vec![1.0, 0.0],
                vec![1.0, 1.0]
            ]
        );
    }

    #[test]
    fn empty_polyhedron_reports_infeasible() {
        let p = Polyhedron::new(
            Mat::from_rows(&[vec![1.0], vec![-1.0]]).unwrap(),
            vec![-1.0, 0.0],
        )
        .unwrap();
        assert_eq!(
            vertex_enumerate(&p, &Tolerances::default()),
            Err(Error::Infeasible)
        );
    }

    #[test]
    fn halfline_unbounded() {
        let p = Polyhedron::new(Mat::from_rows(&[vec![-1.0]]).unwrap(), vec![0.0]).unwrap();
        assert!(!is_bounded(&p, &Tolerances::default()).unwrap());
        assert_eq!(
            vertex_enumerate(&p, &Tolerances::default()),
            Err(Error::Unbounded)
        );
    }

    #[test]
    fn bounded_box() {
        assert!(is_bounded(&unit_square(), &Tolerances::default()).unwrap());
    }

    #[test]
    fn guard_limits() {
        let p = Polyhedron::from_box(&vec![0.0; 7], &vec![1.0; 7]).unwrap();
        assert!(matches!(
            vertex_enumerate(&p, &Tolerances::default()),
            Err(Error::GuardExceeded(_))
        ));
    }

    #[test]
    fn top_edge_face() {
        let face = optimal_face(&[0.0, -1.0], &unit_square(), &Tolerances::default()).unwrap();
        assert_eq!(face.vertices, vec![vec![0.0, 1.0], vec![1.0, 1.0]]);
    }

    #[test]
    fn unique_vertex_face() {
        let face = optimal_face(&[-1.0, -1.0], &unit_square(), &Tolerances::default()).unwrap();
        assert_eq!(face.vertices, vec![vec![1.0, 1.0]]);
    }
}
