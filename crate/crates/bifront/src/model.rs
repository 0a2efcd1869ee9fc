//! Domain types for bilevel problem instances, the orthant order on
//! objective space, and finite efficiency filters.
//!
//! The order cone is fixed to the nonnegative orthant throughout; both
//! dominance kinds are stated relative to it.

use serde::{Deserialize, Serialize};

use crate::linalg::{dot, Mat};
use crate::{Error, Result};

/// Pareto vs. weak Pareto efficiency.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EfficiencyKind {
    /// Componentwise `<=` with at least one strict inequality.
    Pareto,
    /// Strict componentwise `<`.
    WeakPareto,
}

/// A scalarization weight: nonnegative with components summing to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Weight {
    pub alpha: Vec<f64>,
}

impl Weight {
    pub fn new(alpha: Vec<f64>) -> Result<Self> {
        if alpha.is_empty() {
            return Err(Error::EmptyInput("weight vector".to_string()));
        }
        if alpha.iter().any(|&a| a < -1e-12) {
            return Err(Error::DimensionMismatch(
                "weight has negative component".to_string(),
            ));
        }
        let s: f64 = alpha.iter().sum();
        if (s - 1.0).abs() > 1e-9 {
            return Err(Error::DimensionMismatch(format!(
                "weight components sum to {s}, expected 1"
            )));
        }
        Ok(Weight { alpha })
    }

    /// Uniform weight on a `q`-simplex.
    pub fn uniform(q: usize) -> Self {
        Weight {
            alpha: vec![1.0 / q as f64; q],
        }
    }
}

/// Affine inequality system `mat * x <= rhs`, i.e. `G(x) = mat*x - rhs <= 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AffineSystem {
    pub mat: Mat,
    pub rhs: Vec<f64>,
}

impl AffineSystem {
    pub fn residuals(&self, x: &[f64]) -> Vec<f64> {
        self.mat
            .mul_vec(x)
            .iter()
            .zip(&self.rhs)
            .map(|(lhs, r)| lhs - r)
            .collect()
    }

    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        self.residuals(x).iter().all(|&r| r <= tol)
    }
}

/// One quadratic component of the upper objective:
/// `F_k(z) = 0.5 z^T Q z + c^T z + b` with `z = (x, y)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadraticComponent {
    pub quad: Mat,
    pub lin: Vec<f64>,
    pub constant: f64,
}

impl QuadraticComponent {
    /// Purely affine component `c^T z + b`.
    pub fn affine(lin: Vec<f64>, constant: f64) -> Self {
        let n = lin.len();
        QuadraticComponent {
            quad: Mat::zeros(n, n),
            lin,
            constant,
        }
    }

    pub fn value(&self, z: &[f64]) -> f64 {
        0.5 * dot(&self.quad.mul_vec(z), z) + dot(&self.lin, z) + self.constant
    }

    pub fn gradient(&self, z: &[f64]) -> Vec<f64> {
        let mut g = self.quad.mul_vec(z);
        for (gi, ci) in g.iter_mut().zip(&self.lin) {
            *gi += ci;
        }
        g
    }
}

/// Upper-level vector objective, one quadratic form per component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UpperObjective {
    pub components: Vec<QuadraticComponent>,
}

impl UpperObjective {
    pub fn value(&self, z: &[f64]) -> Vec<f64> {
        self.components.iter().map(|c| c.value(z)).collect()
    }

    /// Jacobian as a `p x (n+m)` matrix of component gradients.
    pub fn jacobian(&self, z: &[f64]) -> Mat {
        let rows: Vec<Vec<f64>> = self.components.iter().map(|c| c.gradient(z)).collect();
        Mat::from_rows(&rows).expect("component gradients share a length")
    }
}

/// Parametric linear multiobjective lower level:
/// objective `f(x,y) = C y + D x + e`, feasible set `{y : A x + B y <= d}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearLowerLevel {
    /// `C`: q x m objective matrix acting on `y`.
    pub c: Mat,
    /// `D`: q x n objective matrix acting on `x` (zero in the pure form).
    pub d_obj: Mat,
    /// `e`: constant objective offset.
    pub e: Vec<f64>,
    /// `A`: k x n constraint matrix acting on `x`.
    pub a: Mat,
    /// `B`: k x m constraint matrix acting on `y`.
    pub b: Mat,
    /// `d`: constraint right-hand side.
    pub d: Vec<f64>,
}

impl LinearLowerLevel {
    /// Pure form `f = C y`, `A x + B y <= d`.
    pub fn pure(c: Mat, a: Mat, b: Mat, d: Vec<f64>) -> Self {
        let q = c.rows;
        let n = a.cols;
        LinearLowerLevel {
            d_obj: Mat::zeros(q, n),
            e: vec![0.0; q],
            c,
            a,
            b,
            d,
        }
    }

    pub fn dims(&self) -> (usize, usize, usize, usize) {
        (self.a.cols, self.c.cols, self.c.rows, self.a.rows)
    }

    /// Objective value `f(x, y)`.
    pub fn objective(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        let mut f = self.c.mul_vec(y);
        let fx = self.d_obj.mul_vec(x);
        for i in 0..f.len() {
            f[i] += fx[i] + self.e[i];
        }
        f
    }

    /// The shift `D x + e` applied on top of the `y`-image `C y`.
    pub fn shift(&self, x: &[f64]) -> Vec<f64> {
        let mut s = self.d_obj.mul_vec(x);
        for i in 0..s.len() {
            s[i] += self.e[i];
        }
        s
    }

    pub fn validate(&self) -> Result<()> {
        let (n, m, q, k) = self.dims();
        if self.b.rows != k {
            return Err(Error::DimensionMismatch(format!(
                "B has {} rows but A has {k}",
                self.b.rows
            )));
        }
        if self.b.cols != m {
            return Err(Error::DimensionMismatch(format!(
                "B has {} columns but C has {m}",
                self.b.cols
            )));
        }
        if self.d.len() != k {
            return Err(Error::DimensionMismatch(format!(
                "d has {} entries but A has {k} rows",
                self.d.len()
            )));
        }
        if self.d_obj.rows != q || self.d_obj.cols != n {
            return Err(Error::DimensionMismatch("D must be q x n".to_string()));
        }
        if self.e.len() != q {
            return Err(Error::DimensionMismatch("e must have q entries".to_string()));
        }
        Ok(())
    }
}

/// A full bilevel instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BilevelProblem {
    pub n: usize,
    pub m: usize,
    pub p: usize,
    pub q: usize,
    pub upper_objective: UpperObjective,
    /// `X = {x : G(x) <= 0}` with `G(x) = mat*x - rhs`.
    pub upper_set: AffineSystem,
    pub lower: LinearLowerLevel,
}

impl BilevelProblem {
    pub fn validate(&self) -> Result<()> {
        if self.p < 1 || self.q < 1 || self.n < 1 || self.m < 1 {
            return Err(Error::DimensionMismatch(
                "all dimensions must be positive".to_string(),
            ));
        }
        self.lower.validate()?;
        let (n, m, q, _) = self.lower.dims();
        if n != self.n || m != self.m || q != self.q {
            return Err(Error::DimensionMismatch(
                "lower-level matrices inconsistent with declared dims".to_string(),
            ));
        }
        if self.upper_set.mat.cols != self.n {
            return Err(Error::DimensionMismatch(format!(
                "upper-set matrix has {} columns, expected n = {}",
                self.upper_set.mat.cols, self.n
            )));
        }
        if self.upper_set.mat.rows != self.upper_set.rhs.len() {
            return Err(Error::DimensionMismatch(
                "upper-set matrix/rhs row mismatch".to_string(),
            ));
        }
        if self.upper_objective.components.len() != self.p {
            return Err(Error::DimensionMismatch(format!(
                "upper objective has {} components, expected p = {}",
                self.upper_objective.components.len(),
                self.p
            )));
        }
        for (k, comp) in self.upper_objective.components.iter().enumerate() {
            let dim = self.n + self.m;
            if comp.quad.rows != dim || comp.quad.cols != dim || comp.lin.len() != dim {
                return Err(Error::DimensionMismatch(format!(
                    "upper objective component {k} is not over (x, y) of size {dim}"
                )));
            }
            for i in 0..dim {
                for j in 0..i {
                    if (comp.quad.at(i, j) - comp.quad.at(j, i)).abs() > 1e-9 {
                        return Err(Error::DimensionMismatch(format!(
                            "upper objective component {k} has a non-symmetric Q"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn upper_value(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        let mut z = x.to_vec();
        z.extend_from_slice(y);
        self.upper_objective.value(&z)
    }
}

/// Does `u` dominate `v` under `kind`? Values within `tau_dom` are treated
/// as equal. Irreflexive for both kinds.
pub fn dominates(u: &[f64], v: &[f64], kind: EfficiencyKind, tau_dom: f64) -> Result<bool> {
    if u.len() != v.len() {
        return Err(Error::DimensionMismatch(format!(
            "dominance between vectors of length {} and {}",
            u.len(),
            v.len()
        )));
    }
    Ok(match kind {
        EfficiencyKind::Pareto => {
            u.iter().zip(v).all(|(a, b)| *a <= b + tau_dom)
                && u.iter().zip(v).any(|(a, b)| *a < b - tau_dom)
        }
        EfficiencyKind::WeakPareto => u.iter().zip(v).all(|(a, b)| *a < b - tau_dom),
    })
}

/// Extracts the efficient subset of a finite list of objective vectors,
/// preserving input order. Duplicates of an efficient value are all kept.
pub fn eff_filter(points: &[Vec<f64>], kind: EfficiencyKind, tau_dom: f64) -> Result<Vec<Vec<f64>>> {
    Ok(eff_filter_indices(points, kind, tau_dom)?
        .into_iter()
        .map(|i| points[i].clone())
        .collect())
}

/// Index version of [`eff_filter`]; indices come back sorted ascending.
pub fn eff_filter_indices(
    points: &[Vec<f64>],
    kind: EfficiencyKind,
    tau_dom: f64,
) -> Result<Vec<usize>> {
    if points.is_empty() {
        return Err(Error::EmptyInput("eff_filter on empty list".to_string()));
    }
    let q = points[0].len();
    if points.iter().any(|p| p.len() != q) {
        return Err(Error::DimensionMismatch(
            "eff_filter points of unequal length".to_string(),
        ));
    }
    if q == 2 && tau_dom == 0.0 && points.len() > 64 {
        return Ok(biobjective_sweep(points, kind));
    }
    let mut kept = Vec::new();
    'outer: for (i, p) in points.iter().enumerate() {
        for (j, u) in points.iter().enumerate() {
            if i != j && dominates(u, p, kind, tau_dom)? {
                continue 'outer;
            }
        }
        kept.push(i);
    }
    Ok(kept)
}

/// O(N log N) sweep for bi-objective exact filtering. Sorts by the first
/// coordinate and tracks prefix minima of the second.
fn biobjective_sweep(points: &[Vec<f64>], kind: EfficiencyKind) -> Vec<usize> {
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&a, &b| {
        points[a][0]
            .partial_cmp(&points[b][0])
            .unwrap()
            .then(points[a][1].partial_cmp(&points[b][1]).unwrap())
    });
    let mut kept = Vec::new();
    let mut strict_prefix_min = f64::INFINITY; // min y over x strictly smaller
    let mut i = 0;
    while i < order.len() {
        // group of equal first coordinate
        let x0 = points[order[i]][0];
        let mut j = i;
        while j < order.len() && points[order[j]][0] == x0 {
            j += 1;
        }
        let group_min_y = points[order[i]][1];
        for &idx in &order[i..j] {
            let y = points[idx][1];
            let dominated = match kind {
                EfficiencyKind::Pareto => y > group_min_y || strict_prefix_min <= y,
                EfficiencyKind::WeakPareto => strict_prefix_min < y,
            };
            if !dominated {
                kept.push(idx);
            }
        }
        strict_prefix_min = strict_prefix_min.min(group_min_y);
        i = j;
    }
    kept.sort_unstable();
    kept
}
