//! Two-phase tableau simplex for `min c^T z  s.t.  M z <= b` with free
//! variables, using Bland's anti-cycling rule throughout. Every outcome
//! carries a certificate: a minimizer with its basis, a recession ray, or a
//! Farkas vector proving infeasibility. Deterministic for identical input.

use serde::{Deserialize, Serialize};

use crate::linalg::{dot, norm_inf};
use crate::polyhedra::Polyhedron;
use crate::Tolerances;
use crate::{Error, Result};

/// Identity of a basic variable in the standard-form tableau.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BasicVar {
    /// Positive part of structural variable `z_j`.
    Pos(usize),
    /// Negative part of structural variable `z_j`.
    Neg(usize),
    /// Slack of row `i`.
    Slack(usize),
    /// Phase-one artificial of row `i`.
    Artificial(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum LpOutcome {
    Optimal {
        point: Vec<f64>,
        value: f64,
        basis: Vec<BasicVar>,
    },
    Unbounded {
        /// Recession ray `r` with `M r <= 0` and `c^T r < 0`.
        ray: Vec<f64>,
    },
    Infeasible {
        /// Farkas vector `lambda >= 0` with `lambda^T M = 0`, `lambda^T b < 0`.
        farkas: Vec<f64>,
    },
}

const PIVOT_EPS: f64 = 1e-9;

struct Tableau {
    rows: usize,
    cols: usize, // number of variable columns (rhs stored separately)
    t: Vec<f64>, // rows x cols
    rhs: Vec<f64>,
    basis: Vec<usize>, // column index basic in each row
    n_struct: usize,   // structural variables (before split)
    n_rows: usize,     // original constraint rows
    iter_cap: usize,
}

impl Tableau {
    fn col_split_pos(&self, j: usize) -> usize {
        j
    }
    fn col_split_neg(&self, j: usize) -> usize {
        self.n_struct + j
    }
    fn col_slack(&self, i: usize) -> usize {
        2 * self.n_struct + i
    }
    fn col_artificial(&self, i: usize) -> usize {
        2 * self.n_struct + self.n_rows + i
    }

    fn pivot(&mut self, row: usize, col: usize, obj: &mut [f64]) {
        let cols = self.cols;
        let piv = self.t[row * cols + col];
        let inv = 1.0 / piv;
        for j in 0..cols {
            self.t[row * cols + j] *= inv;
        }
        self.rhs[row] *= inv;
        for r in 0..self.rows {
            if r == row {
                continue;
            }
            let f = self.t[r * cols + col];
            if f == 0.0 {
                continue;
            }
            for j in 0..cols {
                self.t[r * cols + j] -= f * self.t[row * cols + j];
            }
            self.rhs[r] -= f * self.rhs[row];
        }
        let f = obj[col];
        if f != 0.0 {
            for j in 0..cols {
                obj[j] -= f * self.t[row * cols + j];
            }
        }
        self.basis[row] = col;
    }

    /// Bland's rule iteration on the given reduced-cost row, restricted to
    /// columns `allowed`. Returns `Ok(None)` at optimality, `Ok(Some(col))`
    /// when an unbounded entering column is found.
    fn run<F>(&mut self, obj: &mut [f64], allowed: F) -> Result<Option<usize>>
    where
        F: Fn(usize) -> bool,
    {
        for _ in 0..self.iter_cap {
            let mut entering = None;
            for j in 0..self.cols {
                if allowed(j) && obj[j] < -PIVOT_EPS {
                    entering = Some(j);
                    break;
                }
            }
            let Some(col) = entering else {
                return Ok(None);
            };
            // ratio test; ties broken by smallest basic-variable index
            let mut leave: Option<(usize, f64)> = None;
            for r in 0..self.rows {
                let a = self.t[r * self.cols + col];
                if a > PIVOT_EPS {
                    let ratio = self.rhs[r] / a;
                    match leave {
                        None => leave = Some((r, ratio)),
                        Some((lr, lratio)) => {
                            if ratio < lratio - PIVOT_EPS
                                || (ratio < lratio + PIVOT_EPS
                                    && self.basis[r] < self.basis[lr])
                            {
                                leave = Some((r, ratio));
                            }
                        }
                    }
                }
            }
            match leave {
                Some((row, _)) => self.pivot(row, col, obj),
                None => return Ok(Some(col)),
            }
        }
        Err(Error::IterationLimit("simplex"))
    }
}

/// Solves `min c^T z  s.t.  M z <= b` over free `z`.
pub fn lp_solve(c: &[f64], p: &Polyhedron, tol: &Tolerances) -> Result<LpOutcome> {
    let s = p.dim();
    let r = p.num_rows();
    if c.len() != s {
        return Err(Error::DimensionMismatch(format!(
            "objective of length {} on polyhedron of dimension {s}",
            c.len()
        )));
    }

    // standard form: columns = [z+ (s) | z- (s) | slack (r) | artificial (r)]
    let cols = 2 * s + 2 * r;
    let mut tab = Tableau {
        rows: r,
        cols,
        t: vec![0.0; r * cols],
        rhs: vec![0.0; r],
        basis: vec![0; r],
        n_struct: s,
        n_rows: r,
        iter_cap: 20_000 + 200 * (r + s),
    };
    // row signs making rhs nonnegative
    let mut sign = vec![1.0; r];
    for i in 0..r {
        if p.rhs[i] < 0.0 {
            sign[i] = -1.0;
        }
        for j in 0..s {
            let a = sign[i] * p.mat.at(i, j);
            let (cp, cn) = (tab.col_split_pos(j), tab.col_split_neg(j));
            tab.t[i * cols + cp] = a;
            tab.t[i * cols + cn] = -a;
        }
        let (cs, ca) = (tab.col_slack(i), tab.col_artificial(i));
        tab.t[i * cols + cs] = sign[i];
        tab.t[i * cols + ca] = 1.0;
        tab.rhs[i] = sign[i] * p.rhs[i];
        tab.basis[i] = ca;
    }

    // phase 1: minimize the sum of artificials
    let mut obj1 = vec![0.0; cols];
    for j in 0..cols {
        if !is_artificial(j, s, r) {
            let mut acc = 0.0;
            for i in 0..r {
                acc += tab.t[i * cols + j];
            }
            obj1[j] = -acc;
        }
    }
    if tab.run(&mut obj1, |_| true)?.is_some() {
        // phase-1 objective is bounded below by zero
        return Err(Error::IterationLimit("simplex phase 1"));
    }
    let phase1_value: f64 = (0..r)
        .filter(|&i| is_artificial(tab.basis[i], s, r))
        .map(|i| tab.rhs[i])
        .sum();
    let infeas_tol = 1e-9 * (1.0 + norm_inf(&p.rhs));
    if phase1_value > infeas_tol {
        // dual multipliers from reduced costs of the artificial columns:
        // rc_j = 1 - y_j, lambda_i = -sign_i * y_i
        let mut farkas = vec![0.0; r];
        for i in 0..r {
            let y = 1.0 - obj1[tab.col_artificial(i)];
            farkas[i] = (-sign[i] * y).max(0.0);
        }
        let peak = norm_inf(&farkas);
        if peak > 0.0 {
            for l in farkas.iter_mut() {
                *l /= peak;
            }
        }
        debug_assert!(verify_farkas(&farkas, p, tol.cert));
        return Ok(LpOutcome::Infeasible { farkas });
    }

    // drive remaining basic artificials (at value zero) out of the basis
    for row in 0..r {
        if !is_artificial(tab.basis[row], s, r) {
            continue;
        }
        let mut dummy = vec![0.0; cols];
        if let Some(col) = (0..2 * s + r).find(|&j| tab.t[row * cols + j].abs() > PIVOT_EPS) {
            tab.pivot(row, col, &mut dummy);
        }
        // a fully zero row is redundant; its artificial stays basic at zero
    }

    // phase 2 over the original objective
    let mut cost = vec![0.0; cols];
    for j in 0..s {
        cost[tab.col_split_pos(j)] = c[j];
        cost[tab.col_split_neg(j)] = -c[j];
    }
    let mut obj2 = cost.clone();
    for row in 0..r {
        let cb = cost[tab.basis[row]];
        if cb != 0.0 {
            for j in 0..cols {
                obj2[j] -= cb * tab.t[row * cols + j];
            }
        }
    }
    let allowed = |j: usize| !is_artificial(j, s, r);
    match tab.run(&mut obj2, allowed)? {
        None => {
            let mut z = vec![0.0; s];
            for row in 0..r {
                let b = tab.basis[row];
                if b < s {
                    z[b] += tab.rhs[row];
                } else if b < 2 * s {
                    z[b - s] -= tab.rhs[row];
                }
            }
            let basis = tab
                .basis
                .iter()
                .map(|&b| decode(b, s, r))
                .collect::<Vec<_>>();
            Ok(LpOutcome::Optimal {
                value: dot(c, &z),
                point: z,
                basis,
            })
        }
        Some(col) => {
            // unbounded: entering column with no blocking row
            let mut dir = vec![0.0; cols];
            dir[col] = 1.0;
            for row in 0..r {
                dir[tab.basis[row]] = -tab.t[row * cols + col];
            }
            let mut ray = vec![0.0; s];
            for j in 0..s {
                ray[j] = dir[j] - dir[s + j];
            }
            let peak = norm_inf(&ray);
            if peak > 0.0 {
                for v in ray.iter_mut() {
                    *v /= peak;
                }
            }
            debug_assert!({
                let mr = p.mat.mul_vec(&ray);
                mr.iter().all(|&v| v <= tol.cert) && dot(c, &ray) < 0.0
            });
            Ok(LpOutcome::Unbounded { ray })
        }
    }
}

fn is_artificial(j: usize, s: usize, r: usize) -> bool {
    j >= 2 * s + r
}

fn decode(j: usize, s: usize, r: usize) -> BasicVar {
    if j < s {
        BasicVar::Pos(j)
    } else if j < 2 * s {
        BasicVar::Neg(j - s)
    } else if j < 2 * s + r {
        BasicVar::Slack(j - 2 * s)
    } else {
        BasicVar::Artificial(j - 2 * s - r)
    }
}

/// Checks a Farkas vector against the polyhedron data.
pub fn verify_farkas(lambda: &[f64], p: &Polyhedron, tol_cert: f64) -> bool {
    if lambda.len() != p.num_rows() || lambda.iter().any(|&l| l < -tol_cert) {
        return false;
    }
    let combo = p.mat.tr_mul_vec(lambda);
    norm_inf(&combo) <= tol_cert * (1.0 + p.mat.max_abs()) && dot(lambda, &p.rhs) < 0.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Mat;

    fn unit_square() -> Polyhedron {
        Polyhedron::from_box(&[0.0, 0.0], &[1.0, 1.0]).unwrap()
    }

    #[test]
    fn box_extremum() {
        let out = lp_solve(&[-1.0, -1.0], &unit_square(), &Tolerances::default()).unwrap();
        match out {
            LpOutcome::Optimal { point, value, .. } => {
                assert!((point[0] - 1.0).abs() < 1e-9);
                assert!((point[1] - 1.0).abs() < 1e-9);
                assert!((value + 2.0).abs() < 1e-9);
            }
            other => panic!("expected optimal, got {other:?}"),
        }
    }

    #[test]
    fn contradictory_bounds_infeasible() {
        // z1 <= -1, -z1 <= 0
        let p = Polyhedron::new(
            Mat::from_rows(&[vec![1.0], vec![-1.0]]).unwrap(),
            vec![-1.0, 0.0],
        )
        .unwrap();
        let out = lp_solve(&[1.0], &p, &Tolerances::default()).unwrap();
        match out {
            LpOutcome::Infeasible { farkas } => {
                assert!(verify_farkas(&farkas, &p, 1e-8));
                assert!((farkas[0] - 1.0).abs() < 1e-9);
                assert!((farkas[1] - 1.0).abs() < 1e-9);
            }
            other => panic!("expected infeasible, got {other:?}"),
        }
    }

    #[test]
    fn free_descent_unbounded() {
        // -z1 <= 0 in R^2, minimize -z1
        let p = Polyhedron::new(Mat::from_rows(&[vec![-1.0, 0.0]]).unwrap(), vec![0.0]).unwrap();
        let out = lp_solve(&[-1.0, 0.0], &p, &Tolerances::default()).unwrap();
        match out {
            LpOutcome::Unbounded { ray } => {
                assert!((ray[0] - 1.0).abs() < 1e-9);
                assert!(ray[1].abs() < 1e-9);
            }
            other => panic!("expected unbounded, got {other:?}"),
        }
    }

    #[test]
    fn negative_rhs_feasible() {
        // -z1 <= -2 (z1 >= 2), z1 <= 5
        let p = Polyhedron::new(
            Mat::from_rows(&[vec![-1.0], vec![1.0]]).unwrap(),
            vec![-2.0, 5.0],
        )
        .unwrap();
        match lp_solve(&[1.0], &p, &Tolerances::default()).unwrap() {
            LpOutcome::Optimal { point, value, .. } => {
                assert!((point[0] - 2.0).abs() < 1e-9);
                assert!((value - 2.0).abs() < 1e-9);
            }
            other => panic!("expected optimal, got {other:?}"),
        }
    }

    #[test]
    fn deterministic_across_runs() {
        let p = Polyhedron::from_box(&[0.0, 0.0, 0.0], &[1.0, 2.0, 3.0]).unwrap();
        let a = lp_solve(&[1.0, -2.0, 0.5], &p, &Tolerances::default()).unwrap();
        let b = lp_solve(&[1.0, -2.0, 0.5], &p, &Tolerances::default()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn degenerate_face_objective() {
        // minimizing 0 over a feasible set stays feasible
        let p = unit_square();
        match lp_solve(&[0.0, 0.0], &p, &Tolerances::default()).unwrap() {
            LpOutcome::Optimal { point, .. } => assert!(p.contains(&point, 1e-9)),
            other => panic!("expected optimal, got {other:?}"),
        }
    }
}
