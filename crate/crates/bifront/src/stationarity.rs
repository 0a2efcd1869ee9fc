//! KKT-type stationarity certificates at candidate points.
//!
//! At a feasible candidate, the necessary-condition system couples a
//! normalized upper multiplier `w*`, a free image multiplier `v*`, and
//! nonnegative constraint multipliers `u` (upper set), `v`, `w` (two
//! passes over the lower-level rows). Complementarity is handled by
//! active-set elimination at the fixed candidate: multipliers of slack
//! rows are identically zero, which makes the system a plain linear
//! feasibility problem. Infeasibility comes back as a verified Farkas
//! vector, not as an exception.

use serde::{Deserialize, Serialize};

use crate::cq::{check_lower_mfcq, check_upper_mfcq};
use crate::linalg::{norm_inf, Mat};
use crate::model::BilevelProblem;
use crate::pareto::feasible_set;
use crate::polyhedra::{lp_solve, verify_farkas, LpOutcome, Polyhedron};
use crate::Tolerances;
use crate::{Error, Result};

/// Active inequality rows at a candidate, with the residuals that
/// produced them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActiveSets {
    /// Indices of upper-set rows with residual within the activity
    /// tolerance of zero.
    pub upper: Vec<usize>,
    /// Indices of lower-level rows likewise active at (x, y).
    pub lower: Vec<usize>,
    pub upper_residuals: Vec<f64>,
    pub lower_residuals: Vec<f64>,
    /// Rows in the near-active band (within 10x the activity tolerance but
    /// not flagged active); their presence makes the active set fragile.
    pub warnings: Vec<String>,
}

/// Certification status of the candidate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Status {
    Stationary,
    NotStationary,
}

/// A multiplier certificate (on `Stationary`) or a Farkas refutation of
/// the assembled system (on `NotStationary`). Multipliers are reported at
/// full length; entries of non-active rows are exactly zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationarityCertificate {
    pub status: Status,
    pub w_star: Vec<f64>,
    pub v_star: Vec<f64>,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub w: Vec<f64>,
    pub farkas: Option<Vec<f64>>,
    pub notes: Vec<String>,
}

/// Independent residual evaluation of a Stationary certificate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemResiduals {
    /// Inf-norm of the image-multiplier balance equation.
    pub image_balance: f64,
    /// Inf-norm of the joint gradient-sum equation over (x, y).
    pub gradient_sum: f64,
    pub complementarity_u: f64,
    pub complementarity_v: f64,
    pub complementarity_w: f64,
    pub normalization: f64,
}

impl SystemResiduals {
    pub fn max(&self) -> f64 {
        self.image_balance
            .max(self.gradient_sum)
            .max(self.complementarity_u)
            .max(self.complementarity_v)
            .max(self.complementarity_w)
            .max(self.normalization)
    }
}

/// Flags rows of `resid` as active (`|r| <= act`), collecting near-active
/// rows (within `10 * act`) into `warnings`.
fn classify(resid: &[f64], act: f64, label: &str, warnings: &mut Vec<String>) -> Vec<usize> {
    let mut active = Vec::new();
    for (i, &r) in resid.iter().enumerate() {
        if r.abs() <= act {
            active.push(i);
        } else if r.abs() <= 10.0 * act {
            warnings.push(format!(
                "{label} row {i} is near-active (residual {r:.3e}); the active set is sensitive to the activity tolerance"
            ));
        }
    }
    active
}

/// Detects active rows at `(x, y)`, erroring with the violated rows if the
/// candidate is infeasible.
pub fn detect_active_sets(
    prob: &BilevelProblem,
    x: &[f64],
    y: &[f64],
    tol: &Tolerances,
) -> Result<ActiveSets> {
    let gu = prob.upper_set.residuals(x);
    let fs = feasible_set(&prob.lower, x)?;
    let gl = fs.residuals(y);
    let feas_u = tol.feas + tol.act * (1.0 + norm_inf(&prob.upper_set.rhs));
    let feas_l = tol.feas + tol.act * (1.0 + norm_inf(&prob.lower.d));
    let bad_u: Vec<usize> = (0..gu.len()).filter(|&i| gu[i] > feas_u).collect();
    let bad_l: Vec<usize> = (0..gl.len()).filter(|&i| gl[i] > feas_l).collect();
    if !bad_u.is_empty() || !bad_l.is_empty() {
        return Err(Error::InfeasibleCandidate(format!(
            "violated upper-set rows {bad_u:?}, lower-level rows {bad_l:?}"
        )));
    }
    let mut warnings = Vec::new();
    let upper = classify(&gu, tol.act, "upper-set", &mut warnings);
    let lower = classify(&gl, tol.act, "lower-level", &mut warnings);
    Ok(ActiveSets {
        upper,
        lower,
        upper_residuals: gu,
        lower_residuals: gl,
        warnings,
    })
}

/// The assembled linear feasibility system `eq * z = rhs`, `z_i >= 0` for
/// flagged variables, over `z = (w*, v*, u_act, v_act, w_act)`.
#[derive(Debug, Clone, PartialEq)]
pub struct KktSystem {
    pub eq: Mat,
    pub rhs: Vec<f64>,
    pub nonneg: Vec<bool>,
    pub p: usize,
    pub q: usize,
    pub n_u: usize,
    pub n_vw: usize,
}

impl KktSystem {
    pub fn num_vars(&self) -> usize {
        self.p + self.q + self.n_u + 2 * self.n_vw
    }
}

struct Blocks {
    fx: Mat, // p x n
    fy: Mat, // p x m
}

fn gradient_blocks(prob: &BilevelProblem, x: &[f64], y: &[f64]) -> Blocks {
    let mut z = x.to_vec();
    z.extend_from_slice(y);
    let jac = prob.upper_objective.jacobian(&z);
    let (n, p) = (prob.n, prob.p);
    let m = prob.m;
    let mut fx = Mat::zeros(p, n);
    let mut fy = Mat::zeros(p, m);
    for k in 0..p {
        for j in 0..n {
            fx.set(k, j, jac.at(k, j));
        }
        for j in 0..m {
            fy.set(k, j, jac.at(k, n + j));
        }
    }
    Blocks { fx, fy }
}

/// Assembles the necessary-condition system at a candidate after
/// active-set elimination. Equation blocks, in row order: the
/// image-multiplier balance over y (m rows), the x-part of the gradient
/// sum (n rows), the y-part (m rows), and the multiplier normalization
/// `sum w* = 1` (1 row).
pub fn assemble_kkt(
    prob: &BilevelProblem,
    x: &[f64],
    y: &[f64],
    active: &ActiveSets,
) -> Result<KktSystem> {
    let (n, m, p, q) = (prob.n, prob.m, prob.p, prob.q);
    let blocks = gradient_blocks(prob, x, y);
    let ll = &prob.lower;
    let n_u = active.upper.len();
    let n_vw = active.lower.len();
    let vars = p + q + n_u + 2 * n_vw;
    let col_w_star = 0;
    let col_v_star = p;
    let col_u = p + q;
    let col_v = p + q + n_u;
    let col_w = p + q + n_u + n_vw;

    let rows = m + n + m + 1;
    let mut eq = Mat::zeros(rows, vars);
    let mut rhs = vec![0.0; rows];

    // image balance: -C^T v* + B_act^T v = 0
    for j in 0..m {
        for i in 0..q {
            eq.set(j, col_v_star + i, -ll.c.at(i, j));
        }
        for (t, &r) in active.lower.iter().enumerate() {
            eq.set(j, col_v + t, ll.b.at(r, j));
        }
    }
    // gradient sum, x part: Fx^T w* + G_act^T u + A_act^T (v + w) = 0
    for j in 0..n {
        let row = m + j;
        for k in 0..p {
            eq.set(row, col_w_star + k, blocks.fx.at(k, j));
        }
        for (t, &r) in active.upper.iter().enumerate() {
            eq.set(row, col_u + t, prob.upper_set.mat.at(r, j));
        }
        for (t, &r) in active.lower.iter().enumerate() {
            eq.set(row, col_v + t, ll.a.at(r, j));
            eq.set(row, col_w + t, ll.a.at(r, j));
        }
    }
    // gradient sum, y part: Fy^T w* + B_act^T (v + w) = 0
    for j in 0..m {
        let row = m + n + j;
        for k in 0..p {
            eq.set(row, col_w_star + k, blocks.fy.at(k, j));
        }
        for (t, &r) in active.lower.iter().enumerate() {
            let existing = eq.at(row, col_v + t);
            eq.set(row, col_v + t, existing + ll.b.at(r, j));
            eq.set(row, col_w + t, ll.b.at(r, j));
        }
    }
    // normalization
    for k in 0..p {
        eq.set(m + n + m, col_w_star + k, 1.0);
    }
    rhs[m + n + m] = 1.0;

    let mut nonneg = vec![true; vars];
    for i in 0..q {
        nonneg[col_v_star + i] = false;
    }
    Ok(KktSystem {
        eq,
        rhs,
        nonneg,
        p,
        q,
        n_u,
        n_vw,
    })
}

/// Encodes the system as inequalities `M z <= b` (each equality as a pair,
/// sign constraints appended) so one LP call settles feasibility.
pub fn system_polyhedron(sys: &KktSystem) -> Result<Polyhedron> {
    let vars = sys.num_vars();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut rhs: Vec<f64> = Vec::new();
    for i in 0..sys.eq.rows {
        let r = sys.eq.row(i).to_vec();
        rows.push(r.clone());
        rhs.push(sys.rhs[i]);
        rows.push(r.iter().map(|v| -v).collect());
        rhs.push(-sys.rhs[i]);
    }
    for (j, &nn) in sys.nonneg.iter().enumerate() {
        if nn {
            let mut r = vec![0.0; vars];
            r[j] = -1.0;
            rows.push(r);
            rhs.push(0.0);
        }
    }
    Polyhedron::new(Mat::from_rows(&rows)?, rhs)
}

fn expand_certificate(
    prob: &BilevelProblem,
    active: &ActiveSets,
    sys: &KktSystem,
    z: &[f64],
    notes: Vec<String>,
) -> StationarityCertificate {
    let (p, q) = (sys.p, sys.q);
    let col_u = p + q;
    let col_v = col_u + sys.n_u;
    let col_w = col_v + sys.n_vw;
    let r = prob.upper_set.mat.rows;
    let k = prob.lower.b.rows;
    let mut u = vec![0.0; r];
    let mut v = vec![0.0; k];
    let mut w = vec![0.0; k];
    for (t, &row) in active.upper.iter().enumerate() {
        u[row] = z[col_u + t];
    }
    for (t, &row) in active.lower.iter().enumerate() {
        v[row] = z[col_v + t];
        w[row] = z[col_w + t];
    }
    StationarityCertificate {
        status: Status::Stationary,
        w_star: z[..p].to_vec(),
        v_star: z[p..p + q].to_vec(),
        u,
        v,
        w,
        farkas: None,
        notes,
    }
}

/// Certifies or refutes stationarity of the candidate. Deterministic: the
/// returned multipliers come from one phase-1/phase-2 simplex run.
pub fn certify(
    prob: &BilevelProblem,
    x: &[f64],
    y: &[f64],
    tol: &Tolerances,
) -> Result<StationarityCertificate> {
    let active = detect_active_sets(prob, x, y, tol)?;
    let sys = assemble_kkt(prob, x, y, &active)?;
    certify_system(prob, &active, &sys, tol)
}

fn certify_system(
    prob: &BilevelProblem,
    active: &ActiveSets,
    sys: &KktSystem,
    tol: &Tolerances,
) -> Result<StationarityCertificate> {
    let poly = system_polyhedron(sys)?;
    match lp_solve(&vec![0.0; sys.num_vars()], &poly, tol)? {
        LpOutcome::Optimal { point, .. } => Ok(expand_certificate(
            prob,
            active,
            sys,
            &point,
            active.warnings.clone(),
        )),
        LpOutcome::Infeasible { farkas } => {
            let mut notes = active.warnings.clone();
            if !verify_farkas(&farkas, &poly, tol.cert) {
                notes.push("Farkas vector failed independent verification".to_string());
            }
            Ok(StationarityCertificate {
                status: Status::NotStationary,
                w_star: Vec::new(),
                v_star: Vec::new(),
                u: Vec::new(),
                v: Vec::new(),
                w: Vec::new(),
                farkas: Some(farkas),
                notes,
            })
        }
        LpOutcome::Unbounded { .. } => {
            unreachable!("zero objective cannot be unbounded")
        }
    }
}

/// Re-evaluates a Stationary certificate against the problem data,
/// independently of the assembly that produced it.
pub fn residuals(
    prob: &BilevelProblem,
    x: &[f64],
    y: &[f64],
    cert: &StationarityCertificate,
) -> Result<SystemResiduals> {
    if cert.status != Status::Stationary {
        return Err(Error::EmptyInput(
            "residuals are defined for Stationary certificates".to_string(),
        ));
    }
    let ll = &prob.lower;
    let (n, m) = (prob.n, prob.m);
    let blocks = gradient_blocks(prob, x, y);
    let gu = prob.upper_set.residuals(x);
    let gl = feasible_set(ll, x)?.residuals(y);

    // image balance over y
    let cv = ll.c.tr_mul_vec(&cert.v_star);
    let bv = ll.b.tr_mul_vec(&cert.v);
    let image_balance = (0..m)
        .map(|j| (bv[j] - cv[j]).abs())
        .fold(0.0f64, f64::max);

    // joint gradient sum over (x, y)
    let vw: Vec<f64> = cert.v.iter().zip(&cert.w).map(|(a, b)| a + b).collect();
    let fxw = blocks.fx.tr_mul_vec(&cert.w_star);
    let fyw = blocks.fy.tr_mul_vec(&cert.w_star);
    let gu_t = prob.upper_set.mat.tr_mul_vec(&cert.u);
    let avw = ll.a.tr_mul_vec(&vw);
    let bvw = ll.b.tr_mul_vec(&vw);
    let gx = (0..n)
        .map(|j| (fxw[j] + gu_t[j] + avw[j]).abs())
        .fold(0.0f64, f64::max);
    let gy = (0..m)
        .map(|j| (fyw[j] + bvw[j]).abs())
        .fold(0.0f64, f64::max);

    let comp = |mult: &[f64], resid: &[f64]| -> f64 {
        mult.iter()
            .zip(resid)
            .map(|(a, b)| (a * b).abs())
            .fold(0.0f64, f64::max)
    };
    Ok(SystemResiduals {
        image_balance,
        gradient_sum: gx.max(gy),
        complementarity_u: comp(&cert.u, &gu),
        complementarity_v: comp(&cert.v, &gl),
        complementarity_w: comp(&cert.w, &gl),
        normalization: (cert.w_star.iter().sum::<f64>() - 1.0).abs(),
    })
}

/// Membership outcome for the graphical-derivative query.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoderivativeMembership {
    pub member: bool,
    /// Multiplier on the active rows witnessing membership (full length,
    /// zeros off the active set).
    pub witness: Option<Vec<f64>>,
    /// False when lower-level regularity fails at the candidate, in which
    /// case the polyhedral formula is not guaranteed to describe the set.
    pub formula_guaranteed: bool,
}

/// Decides `x_star_query in D*Y(x, y)(y_star)` through the polyhedral
/// multiplier description `{A^T v : B^T v = -y_star, v >= 0, v
/// supported on the active rows}`.
pub fn coderivative_y_member(
    prob: &BilevelProblem,
    x: &[f64],
    y: &[f64],
    y_star: &[f64],
    x_star_query: &[f64],
    tol: &Tolerances,
) -> Result<CoderivativeMembership> {
    let ll = &prob.lower;
    let (n, m) = (prob.n, prob.m);
    if y_star.len() != m || x_star_query.len() != n {
        return Err(Error::DimensionMismatch(
            "coderivative query dimensions".to_string(),
        ));
    }
    let active = detect_active_sets(prob, x, y, tol)?;
    let formula_guaranteed = check_lower_mfcq(prob, x, y, tol)?;
    let t = active.lower.len();

    // equalities: B_act^T v = -y_star (m rows), A_act^T v = query (n rows)
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut rhs: Vec<f64> = Vec::new();
    let push_eq = |row: Vec<f64>, b: f64, rows: &mut Vec<Vec<f64>>, rhs: &mut Vec<f64>| {
        rows.push(row.iter().map(|v| -v).collect());
        rhs.push(-b);
        rows.push(row);
        rhs.push(b);
    };
    for j in 0..m {
        let row: Vec<f64> = active.lower.iter().map(|&r| ll.b.at(r, j)).collect();
        push_eq(row, -y_star[j], &mut rows, &mut rhs);
    }
    for j in 0..n {
        let row: Vec<f64> = active.lower.iter().map(|&r| ll.a.at(r, j)).collect();
        push_eq(row, x_star_query[j], &mut rows, &mut rhs);
    }
    for jt in 0..t {
        let mut r = vec![0.0; t];
        r[jt] = -1.0;
        rows.push(r);
        rhs.push(0.0);
    }
    if t == 0 {
        // empty active set: the cone is {0}; membership iff both sides zero
        let member = norm_inf(y_star) <= tol.cert && norm_inf(x_star_query) <= tol.cert;
        return Ok(CoderivativeMembership {
            member,
            witness: member.then(|| vec![0.0; ll.b.rows]),
            formula_guaranteed,
        });
    }
    let p = Polyhedron::new(Mat::from_rows(&rows)?, rhs)?;
    match lp_solve(&vec![0.0; t], &p, tol)? {
        LpOutcome::Optimal { point, .. } => {
            let mut v = vec![0.0; ll.b.rows];
            for (jt, &r) in active.lower.iter().enumerate() {
                v[r] = point[jt];
            }
            Ok(CoderivativeMembership {
                member: true,
                witness: Some(v),
                formula_guaranteed,
            })
        }
        _ => Ok(CoderivativeMembership {
            member: false,
            witness: None,
            formula_guaranteed,
        }),
    }
}

/// Certifies the candidate through the coderivative-inclusion form,
/// expanding both coderivative terms by their polyhedral multiplier
/// descriptions. Assembled independently of [`assemble_kkt`]; the two
/// agree in status wherever both regularity conditions hold.
pub fn check_coderivative_form(
    prob: &BilevelProblem,
    x: &[f64],
    y: &[f64],
    tol: &Tolerances,
) -> Result<StationarityCertificate> {
    let active = detect_active_sets(prob, x, y, tol)?;
    let (n, m, p, q) = (prob.n, prob.m, prob.p, prob.q);
    let ll = &prob.lower;
    let blocks = gradient_blocks(prob, x, y);
    let n_u = active.upper.len();
    let n_vw = active.lower.len();
    let vars = p + q + n_u + 2 * n_vw;
    let col_v_star = p;
    let col_u = p + q;
    let col_v = col_u + n_u;
    let col_w = col_v + n_vw;

    // row order differs deliberately from the direct assembly: x-block
    // first, then the two coderivative argument equations, then the
    // normalization
    let rows = n + m + m + 1;
    let mut eq = Mat::zeros(rows, vars);
    let mut rhs = vec![0.0; rows];

    // x block: Fx^T w* + A_act^T (v + w) + G_act^T u = 0
    for j in 0..n {
        for k in 0..p {
            eq.set(j, k, blocks.fx.at(k, j));
        }
        for (t, &r) in active.lower.iter().enumerate() {
            eq.set(j, col_v + t, ll.a.at(r, j));
            eq.set(j, col_w + t, ll.a.at(r, j));
        }
        for (t, &r) in active.upper.iter().enumerate() {
            eq.set(j, col_u + t, prob.upper_set.mat.at(r, j));
        }
    }
    // first coderivative argument: B_act^T v - C^T v* = 0
    for j in 0..m {
        let row = n + j;
        for (t, &r) in active.lower.iter().enumerate() {
            eq.set(row, col_v + t, ll.b.at(r, j));
        }
        for i in 0..q {
            eq.set(row, col_v_star + i, -ll.c.at(i, j));
        }
    }
    // second coderivative argument: B_act^T w + Fy^T w* + C^T v* = 0
    for j in 0..m {
        let row = n + m + j;
        for (t, &r) in active.lower.iter().enumerate() {
            eq.set(row, col_w + t, ll.b.at(r, j));
        }
        for k in 0..p {
            eq.set(row, k, blocks.fy.at(k, j));
        }
        for i in 0..q {
            eq.set(row, col_v_star + i, ll.c.at(i, j));
        }
    }
    for k in 0..p {
        eq.set(n + 2 * m, k, 1.0);
    }
    rhs[n + 2 * m] = 1.0;

    let mut nonneg = vec![true; vars];
    for i in 0..q {
        nonneg[col_v_star + i] = false;
    }
    let sys = KktSystem {
        eq,
        rhs,
        nonneg,
        p,
        q,
        n_u,
        n_vw,
    };
    let mut cert = certify_system(prob, &active, &sys, tol)?;
    if !check_upper_mfcq(prob, x, tol)? || !check_lower_mfcq(prob, x, y, tol)? {
        cert.notes
            .push("regularity fails at the candidate; formula not guaranteed".to_string());
    }
    Ok(cert)
}
