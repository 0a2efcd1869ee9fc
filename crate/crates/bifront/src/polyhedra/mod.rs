//! Polyhedral geometry kernel: LP solving with certificates, brute-force
//! vertex enumeration, projections, nonnegative least squares, and
//! boundedness tests. Everything is dense and desk scale by design.

mod lp;
mod nnls;
mod project;
mod vertices;

pub use lp::{lp_solve, verify_farkas, BasicVar, LpOutcome};
pub use nnls::nnls_min_norm;
pub use project::{project_polyhedron, project_vpolytope};
pub use vertices::{is_bounded, optimal_face, vertex_enumerate};

use serde::{Deserialize, Serialize};

use crate::linalg::Mat;
use crate::{Error, Result};

/// Inequality-described set `{z : M z <= b}`. Rows may be redundant;
/// emptiness is a queryable state, not a construction error.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polyhedron {
    pub mat: Mat,
    pub rhs: Vec<f64>,
}

impl Polyhedron {
    pub fn new(mat: Mat, rhs: Vec<f64>) -> Result<Self> {
        if mat.rows != rhs.len() {
            return Err(Error::DimensionMismatch(format!(
                "polyhedron with {} rows but rhs of length {}",
                mat.rows,
                rhs.len()
            )));
        }
        if mat.cols == 0 {
            return Err(Error::DimensionMismatch(
                "polyhedron in zero-dimensional space".to_string(),
            ));
        }
        Ok(Polyhedron { mat, rhs })
    }

    /// Axis-aligned box `lo <= z <= hi`.
    pub fn from_box(lo: &[f64], hi: &[f64]) -> Result<Self> {
        if lo.len() != hi.len() {
            return Err(Error::DimensionMismatch("box bounds mismatch".to_string()));
        }
        let s = lo.len();
        let mut mat = Mat::zeros(2 * s, s);
        let mut rhs = vec![0.0; 2 * s];
        for i in 0..s {
            mat.set(2 * i, i, 1.0);
            rhs[2 * i] = hi[i];
            mat.set(2 * i + 1, i, -1.0);
            rhs[2 * i + 1] = -lo[i];
        }
        Polyhedron::new(mat, rhs)
    }

    pub fn dim(&self) -> usize {
        self.mat.cols
    }

    pub fn num_rows(&self) -> usize {
        self.mat.rows
    }

    /// Signed constraint residuals `M z - b` (positive means violated).
    pub fn residuals(&self, z: &[f64]) -> Vec<f64> {
        self.mat
            .mul_vec(z)
            .iter()
            .zip(&self.rhs)
            .map(|(lhs, b)| lhs - b)
            .collect()
    }

    pub fn contains(&self, z: &[f64], tol: f64) -> bool {
        self.residuals(z).iter().all(|&r| r <= tol)
    }
}

/// Convex hull of a finite, nonempty vertex list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VPolytope {
    pub vertices: Vec<Vec<f64>>,
}

impl VPolytope {
    pub fn new(vertices: Vec<Vec<f64>>) -> Result<Self> {
        if vertices.is_empty() {
            return Err(Error::EmptyInput("VPolytope with no vertices".to_string()));
        }
        let s = vertices[0].len();
        if vertices.iter().any(|v| v.len() != s) {
            return Err(Error::DimensionMismatch(
                "VPolytope vertices of unequal length".to_string(),
            ));
        }
        Ok(VPolytope { vertices })
    }

    pub fn dim(&self) -> usize {
        self.vertices[0].len()
    }

    /// Image of every vertex under an affine map `v -> M v + shift`.
    pub fn map(&self, m: &Mat, shift: &[f64]) -> VPolytope {
        let vertices = self
            .vertices
            .iter()
            .map(|v| {
                let mut w = m.mul_vec(v);
                for (wi, si) in w.iter_mut().zip(shift) {
                    *wi += si;
                }
                w
            })
            .collect();
        VPolytope { vertices }
    }
}
