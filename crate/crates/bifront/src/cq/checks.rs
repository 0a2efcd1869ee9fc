//! Direct condition checks: the exact linear sufficient condition for the
//! sharp minimum, the strong domination property, the nonlinear normal-cone
//! criterion, and the two MFCQ-style regularity conditions.

use crate::cq::{CqReport, Verdict, Witness};
use crate::linalg::{norm2, norm_inf, Mat};
use crate::model::{BilevelProblem, EfficiencyKind};
use crate::pareto::{efficient_set, feasible_set, frontier_map, ParetoFront};
use crate::polyhedra::{is_bounded, lp_solve, nnls_min_norm, vertex_enumerate, LpOutcome, Polyhedron};
use crate::Tolerances;
use crate::{Error, Result};

/// Exact check of the linear sufficient condition on a finite x sample:
/// delta_hat = min over sampled x, vertices y of S(x), and unit weights e_i
/// of (C y)_i; k_hat = the largest vertex norm of S(x). Restricting the
/// weight simplex to its vertices is exact because the scalarized value is
/// linear in the weight.
pub fn check_linear_uwsm(
    prob: &BilevelProblem,
    xs: &[Vec<f64>],
    tol: &Tolerances,
) -> Result<CqReport> {
    if xs.is_empty() {
        return Err(Error::EmptyInput("linear check needs an x sample".to_string()));
    }
    let ll = &prob.lower;
    let (_, _, q, _) = ll.dims();
    let mut delta = f64::INFINITY;
    let mut k_hat = 0.0f64;
    let mut witness: Option<Witness> = None;
    for x in xs {
        let sset = efficient_set(ll, x, tol)?;
        for v in sset.vertices() {
            k_hat = k_hat.max(norm2(&v));
            let cy = ll.c.mul_vec(&v);
            for i in 0..q {
                if cy[i] < delta {
                    delta = cy[i];
                    witness = Some(Witness {
                        x: x.clone(),
                        y: v.clone(),
                        value: cy[i],
                    });
                }
            }
        }
    }
    let mut report = CqReport::new(
        "linear sufficient condition for the uniform sharp minimum",
        if delta > tol.pos {
            Verdict::CertifiedSufficient
        } else {
            Verdict::Violated
        },
    );
    report.estimates.push(("delta_hat".to_string(), delta));
    report.estimates.push(("k_hat".to_string(), k_hat));
    report.witness = witness;
    report.chain = vec!["Linear CQ".to_string()];
    report
        .notes
        .push(format!("verified on a sample of {} x points", xs.len()));
    let x_poly = Polyhedron::new(prob.upper_set.mat.clone(), prob.upper_set.rhs.clone())?;
    match is_bounded(&x_poly, tol) {
        Ok(false) => report
            .notes
            .push("sampled X: the upper-level set is unbounded".to_string()),
        Ok(true) => {}
        Err(_) => report
            .notes
            .push("sampled X: upper-level set emptiness/boundedness unresolved".to_string()),
    }
    Ok(report)
}

/// Is image vertex `v` dominated from below by the front, i.e. does some
/// point of a front face satisfy `u <= v + slack` componentwise? Convexity
/// of each face makes a per-face feasibility LP over hull coefficients
/// exact.
fn dominated_from_below(
    v: &[f64],
    front: &ParetoFront,
    slack: f64,
    tol: &Tolerances,
) -> Result<bool> {
    let q = v.len();
    for face in &front.faces {
        let verts = &face.polytope.vertices;
        if verts.len() == 1 {
            if verts[0].iter().zip(v).all(|(u, vi)| *u <= vi + slack) {
                return Ok(true);
            }
            continue;
        }
        let t = verts.len();
        // theta >= 0, sum theta = 1, sum_j theta_j u_j[i] <= v[i] + slack
        let mut rows: Vec<Vec<f64>> = Vec::new();
        let mut rhs: Vec<f64> = Vec::new();
        for i in 0..q {
            rows.push((0..t).map(|j| verts[j][i]).collect());
            rhs.push(v[i] + slack);
        }
        rows.push(vec![1.0; t]);
        rhs.push(1.0);
        rows.push(vec![-1.0; t]);
        rhs.push(-1.0);
        for j in 0..t {
            let mut r = vec![0.0; t];
            r[j] = -1.0;
            rows.push(r);
            rhs.push(0.0);
        }
        let p = Polyhedron::new(Mat::from_rows(&rows)?, rhs)?;
        if let LpOutcome::Optimal { .. } = lp_solve(&vec![0.0; t], &p, tol)? {
            return Ok(true);
        }
    }
    Ok(false)
}

/// Checks the strong domination property at `x`: every vertex of the image
/// `f(x, Y(x))` lies above some front point. Vertices suffice because the
/// dominated region `front + R^q_+` is convex.
pub fn check_strong_domination(
    prob: &BilevelProblem,
    x: &[f64],
    tol: &Tolerances,
) -> Result<CqReport> {
    let ll = &prob.lower;
    let fs = feasible_set(ll, x)?;
    match lp_solve(&vec![0.0; fs.dim()], &fs, tol)? {
        LpOutcome::Infeasible { .. } => return Err(Error::Infeasible),
        _ => {}
    }
    if !is_bounded(&fs, tol)? {
        let mut report = CqReport::new("strong domination property", Verdict::NotCertified);
        report
            .notes
            .push("premise failed: Y(x) is unbounded".to_string());
        return Ok(report);
    }
    let (_, _, q, _) = ll.dims();
    if q == 1 {
        let mut report =
            CqReport::new("strong domination property", Verdict::CertifiedSufficient);
        report
            .notes
            .push("scalar objective: the optimal value dominates the image".to_string());
        return Ok(report);
    }
    let front = frontier_map(ll, x, EfficiencyKind::Pareto, tol)?;
    let verts = vertex_enumerate(&fs, tol)?;
    for y in &verts {
        let v = ll.objective(x, y);
        let slack = tol.dom + tol.cert * (1.0 + norm_inf(&v));
        if !dominated_from_below(&v, &front, slack, tol)? {
            let mut report = CqReport::new("strong domination property", Verdict::Violated);
            report.witness = Some(Witness {
                x: x.to_vec(),
                y: y.clone(),
                value: 0.0,
            });
            report
                .notes
                .push(format!("image vertex {v:?} not dominated by the front"));
            return Ok(report);
        }
    }
    let mut report = CqReport::new("strong domination property", Verdict::CertifiedSufficient);
    report.notes.push(format!(
        "all {} image vertices dominated from below",
        verts.len()
    ));
    Ok(report)
}

/// All points of the `(dim-1)`-simplex with `points_per_axis` levels per
/// coordinate; a single level degenerates to the barycenter.
fn simplex_grid(dim: usize, points_per_axis: usize) -> Vec<Vec<f64>> {
    if dim == 0 {
        return Vec::new();
    }
    if points_per_axis <= 1 {
        return vec![vec![1.0 / dim as f64; dim]];
    }
    let steps = points_per_axis - 1;
    let mut out = Vec::new();
    let mut current = vec![0usize; dim];
    fn rec(current: &mut Vec<usize>, pos: usize, left: usize, steps: usize, out: &mut Vec<Vec<f64>>) {
        if pos + 1 == current.len() {
            current[pos] = left;
            out.push(current.iter().map(|&k| k as f64 / steps as f64).collect());
            return;
        }
        for k in 0..=left {
            current[pos] = k;
            rec(current, pos + 1, left - k, steps, out);
        }
    }
    rec(&mut current, 0, steps, steps, &mut out);
    out
}

/// Samples the nonlinear normal-cone criterion at a non-efficient feasible
/// `y`: over normal directions on the simplex grid (restricted to the
/// objective components active against each front vertex), the min-norm
/// element of `C^T y* + cone(active B rows)` must stay `>= 1/lambda`.
pub fn check_nonlinear_cq(
    prob: &BilevelProblem,
    x: &[f64],
    y: &[f64],
    lambda: f64,
    weight_grid: usize,
    tol: &Tolerances,
) -> Result<CqReport> {
    if !(lambda > 0.0) {
        return Err(Error::EmptyInput(
            "criterion needs a positive lambda".to_string(),
        ));
    }
    let ll = &prob.lower;
    let (_, m, q, _) = ll.dims();
    let fs = feasible_set(ll, x)?;
    let feas_tol = tol.feas * (1.0 + norm_inf(&fs.rhs));
    if !fs.contains(y, feas_tol) {
        return Err(Error::InfeasibleCandidate(format!(
            "y = {y:?} violates the lower-level constraints at x = {x:?}"
        )));
    }
    let sset = efficient_set(ll, x, tol)?;
    if sset.distance(y, tol)? <= 10.0 * tol.proj {
        return Err(Error::VacuousSample(
            "criterion vacuous at efficient points".to_string(),
        ));
    }
    let front = frontier_map(ll, x, EfficiencyKind::Pareto, tol)?;
    let fxy = ll.objective(x, y);

    // cone generators: transposes of the B rows active at y
    let resid = fs.residuals(y);
    let active_rows: Vec<usize> = (0..fs.num_rows())
        .filter(|&i| resid[i] >= -tol.act * (1.0 + norm_inf(&fs.rhs)))
        .collect();
    let mut cols = Mat::zeros(m, active_rows.len());
    for (j, &row) in active_rows.iter().enumerate() {
        for i in 0..m {
            cols.set(i, j, ll.b.at(row, i));
        }
    }

    let bound = 1.0 / lambda;
    let mut min_norm = f64::INFINITY;
    let mut violation: Option<(Vec<f64>, f64)> = None;
    let mut sampled = 0usize;
    for z in front.vertices() {
        let act: Vec<usize> = (0..q)
            .filter(|&i| fxy[i] >= z[i] - tol.act * (1.0 + z[i].abs()))
            .collect();
        if act.is_empty() {
            continue;
        }
        for mu in simplex_grid(act.len(), weight_grid) {
            let mut y_star = vec![0.0; q];
            for (k, &i) in act.iter().enumerate() {
                y_star[i] = mu[k];
            }
            let q0 = ll.c.tr_mul_vec(&y_star);
            let (_, value) = nnls_min_norm(&cols, &q0, tol)?;
            sampled += 1;
            min_norm = min_norm.min(value);
            if value < bound - tol.pos && violation.is_none() {
                violation = Some((y_star.clone(), value));
            }
        }
    }
    if sampled == 0 {
        return Err(Error::VacuousSample(
            "no objective component active against any front vertex".to_string(),
        ));
    }
    let mut report = CqReport::new(
        "nonlinear normal-cone criterion",
        if violation.is_some() {
            Verdict::Violated
        } else {
            Verdict::SampleConsistent
        },
    );
    report.estimates.push(("min_sigma_norm".to_string(), min_norm));
    report.estimates.push(("lambda_inv".to_string(), bound));
    if let Some((y_star, value)) = violation {
        report.witness = Some(Witness {
            x: x.to_vec(),
            y: y.to_vec(),
            value,
        });
        report
            .notes
            .push(format!("violating normal direction {y_star:?}"));
    }
    report.chain = vec!["NonLinear CQ".to_string()];
    report
        .notes
        .push(format!("{sampled} sampled normal directions"));
    Ok(report)
}

/// Does a strict descent direction exist for the given active gradient
/// rows? Rows are normalized first so the answer is invariant under
/// positive row rescaling. Vacuously true with no active rows.
fn strict_descent_exists(rows: &[Vec<f64>], tol: &Tolerances) -> Result<bool> {
    if rows.is_empty() {
        return Ok(true);
    }
    let dim = rows[0].len();
    let mut normalized: Vec<Vec<f64>> = Vec::with_capacity(rows.len());
    for r in rows {
        let nrm = norm2(r);
        if nrm <= 1e-14 {
            // an active constraint with zero gradient admits no strict
            // descent direction
            return Ok(false);
        }
        normalized.push(r.iter().map(|v| v / nrm).collect());
    }
    // variables (dvec, t): maximize t with g_i . dvec + t <= 0,
    // |dvec|_inf <= 1, t <= 1
    let mut mrows: Vec<Vec<f64>> = Vec::new();
    let mut rhs: Vec<f64> = Vec::new();
    for g in &normalized {
        let mut row = g.clone();
        row.push(1.0);
        mrows.push(row);
        rhs.push(0.0);
    }
    for j in 0..dim {
        for sgn in [1.0, -1.0] {
            let mut row = vec![0.0; dim + 1];
            row[j] = sgn;
            mrows.push(row);
            rhs.push(1.0);
        }
    }
    let mut top = vec![0.0; dim + 1];
    top[dim] = 1.0;
    mrows.push(top);
    rhs.push(1.0);
    let p = Polyhedron::new(Mat::from_rows(&mrows)?, rhs)?;
    let mut c = vec![0.0; dim + 1];
    c[dim] = -1.0;
    match lp_solve(&c, &p, tol)? {
        LpOutcome::Optimal { value, .. } => Ok(-value > tol.pos),
        _ => unreachable!("descent LP is feasible (d = 0, t = 0) and bounded"),
    }
}

/// Upper-level regularity: a strict descent direction for the G rows
/// active at `x`.
pub fn check_upper_mfcq(prob: &BilevelProblem, x: &[f64], tol: &Tolerances) -> Result<bool> {
    let resid = prob.upper_set.residuals(x);
    let scale = 1.0 + norm_inf(&prob.upper_set.rhs);
    let rows: Vec<Vec<f64>> = (0..prob.upper_set.mat.rows)
        .filter(|&i| resid[i].abs() <= tol.act * scale)
        .map(|i| prob.upper_set.mat.row(i).to_vec())
        .collect();
    strict_descent_exists(&rows, tol)
}

/// Lower-level regularity: a strict descent direction in (x, y) for the
/// joint constraint rows `[A | B]` active at `(x, y)`.
pub fn check_lower_mfcq(
    prob: &BilevelProblem,
    x: &[f64],
    y: &[f64],
    tol: &Tolerances,
) -> Result<bool> {
    let ll = &prob.lower;
    let fs = feasible_set(ll, x)?;
    let resid = fs.residuals(y);
    let scale = 1.0 + norm_inf(&ll.d);
    let rows: Vec<Vec<f64>> = (0..fs.num_rows())
        .filter(|&i| resid[i].abs() <= tol.act * scale)
        .map(|i| {
            let mut row = ll.a.row(i).to_vec();
            row.extend_from_slice(ll.b.row(i));
            row
        })
        .collect();
    strict_descent_exists(&rows, tol)
}
