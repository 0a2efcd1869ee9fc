//! Problem-file ingestion, command dispatch, and report emission.
//!
//! Problems arrive as JSON documents (matrices as row-major arrays of
//! arrays); parse failures name the offending key path. Every command
//! produces a [`RunReport`] whose JSON form carries the same fields for
//! every command (inapplicable ones are null), so downstream tooling can
//! rely on a stable schema.

use std::fmt::Write as _;
use std::path::Path;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::cq::{self, CqContext, CqReport, SampledRegion, Verdict};
use crate::linalg::Mat;
use crate::model::{
    AffineSystem, BilevelProblem, EfficiencyKind, LinearLowerLevel, QuadraticComponent,
    UpperObjective,
};
use crate::oracle::{grid_bilevel_efficient, grid_front, GridSpec};
use crate::pareto::{efficient_set, frontier_map, EfficientSet, ParetoFront};
use crate::polyhedra::{is_bounded, Polyhedron};
use crate::stationarity::{certify, check_coderivative_form, residuals, StationarityCertificate, Status};
use crate::Tolerances;
use crate::{Error, Result};

/// A fully parsed problem file.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedProblem {
    pub problem: BilevelProblem,
    pub sampling: Option<Sampling>,
    pub candidates: Vec<(Vec<f64>, Vec<f64>)>,
}

/// The optional sampling block: boxes for x and y plus a common step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sampling {
    pub x_lower: Vec<f64>,
    pub x_upper: Vec<f64>,
    pub y_lower: Vec<f64>,
    pub y_upper: Vec<f64>,
    pub h: f64,
}

impl Sampling {
    pub fn region(&self) -> Result<SampledRegion> {
        SampledRegion::new(
            self.x_lower.clone(),
            self.x_upper.clone(),
            self.y_lower.clone(),
            self.y_upper.clone(),
            self.h,
        )
    }

    pub fn y_grid(&self, h: f64) -> Result<GridSpec> {
        GridSpec::new(self.y_lower.clone(), self.y_upper.clone(), h)
    }

    pub fn x_grid(&self, h: f64) -> Result<GridSpec> {
        GridSpec::new(self.x_lower.clone(), self.x_upper.clone(), h)
    }
}

fn file_err(path: &str, message: impl Into<String>) -> Error {
    Error::ProblemFile {
        path: path.to_string(),
        message: message.into(),
    }
}

fn get<'v>(v: &'v Value, path: &str, key: &str) -> Result<&'v Value> {
    v.get(key)
        .ok_or_else(|| file_err(&join(path, key), "missing key"))
}

fn join(path: &str, key: &str) -> String {
    if path.is_empty() {
        key.to_string()
    } else {
        format!("{path}.{key}")
    }
}

fn as_f64(v: &Value, path: &str) -> Result<f64> {
    v.as_f64()
        .ok_or_else(|| file_err(path, "expected a number"))
}

fn as_usize(v: &Value, path: &str) -> Result<usize> {
    v.as_u64()
        .map(|u| u as usize)
        .ok_or_else(|| file_err(path, "expected a nonnegative integer"))
}

fn as_vec(v: &Value, path: &str) -> Result<Vec<f64>> {
    let arr = v
        .as_array()
        .ok_or_else(|| file_err(path, "expected an array of numbers"))?;
    arr.iter()
        .enumerate()
        .map(|(i, x)| as_f64(x, &format!("{path}[{i}]")))
        .collect()
}

fn as_mat(v: &Value, path: &str, rows: usize, cols: usize) -> Result<Mat> {
    let arr = v
        .as_array()
        .ok_or_else(|| file_err(path, "expected an array of rows"))?;
    if arr.len() != rows {
        return Err(file_err(
            path,
            format!("expected {rows} rows, found {}", arr.len()),
        ));
    }
    let mut data = Vec::with_capacity(rows * cols);
    for (i, row) in arr.iter().enumerate() {
        let r = as_vec(row, &format!("{path}[{i}]"))?;
        if r.len() != cols {
            return Err(file_err(
                &format!("{path}[{i}]"),
                format!("expected {cols} entries, found {}", r.len()),
            ));
        }
        data.extend(r);
    }
    Ok(Mat { rows, cols, data })
}

fn parse_box(v: &Value, path: &str, dim: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let lower = as_vec(get(v, path, "lower")?, &join(path, "lower"))?;
    let upper = as_vec(get(v, path, "upper")?, &join(path, "upper"))?;
    if lower.len() != dim || upper.len() != dim {
        return Err(file_err(path, format!("box must have {dim} entries per bound")));
    }
    Ok((lower, upper))
}

/// Parses a problem document, reporting the offending key path on failure.
pub fn parse_problem(text: &str) -> Result<LoadedProblem> {
    let root: Value = serde_json::from_str(text)
        .map_err(|e| file_err("", format!("not valid JSON: {e}")))?;

    let dims = get(&root, "", "dims")?;
    let n = as_usize(get(dims, "dims", "n")?, "dims.n")?;
    let m = as_usize(get(dims, "dims", "m")?, "dims.m")?;
    let p = as_usize(get(dims, "dims", "p")?, "dims.p")?;
    let q = as_usize(get(dims, "dims", "q")?, "dims.q")?;

    let upper = get(&root, "", "upper")?;
    let f_list = get(upper, "upper", "F")?
        .as_array()
        .ok_or_else(|| file_err("upper.F", "expected an array of components"))?;
    if f_list.len() != p {
        return Err(file_err(
            "upper.F",
            format!("expected p = {p} components, found {}", f_list.len()),
        ));
    }
    let dim_z = n + m;
    let mut components = Vec::with_capacity(p);
    for (k, comp) in f_list.iter().enumerate() {
        let base = format!("upper.F[{k}]");
        let lin = as_vec(get(comp, &base, "c")?, &join(&base, "c"))?;
        if lin.len() != dim_z {
            return Err(file_err(
                &join(&base, "c"),
                format!("expected {dim_z} entries over (x, y)"),
            ));
        }
        let constant = match comp.get("b") {
            Some(b) => as_f64(b, &join(&base, "b"))?,
            None => 0.0,
        };
        let quad = match comp.get("Q") {
            Some(qv) => as_mat(qv, &join(&base, "Q"), dim_z, dim_z)?,
            None => Mat::zeros(dim_z, dim_z),
        };
        components.push(QuadraticComponent {
            quad,
            lin,
            constant,
        });
    }

    let xset = get(&root, "", "X")?;
    let g_rows = get(xset, "X", "G")?
        .as_array()
        .ok_or_else(|| file_err("X.G", "expected an array of rows"))?
        .len();
    let g = as_mat(get(xset, "X", "G")?, "X.G", g_rows, n)?;
    let h = as_vec(get(xset, "X", "h")?, "X.h")?;
    if h.len() != g_rows {
        return Err(file_err("X.h", format!("expected {g_rows} entries matching X.G")));
    }

    let lower = get(&root, "", "lower")?;
    let k_rows = get(lower, "lower", "A")?
        .as_array()
        .ok_or_else(|| file_err("lower.A", "expected an array of rows"))?
        .len();
    let c = as_mat(get(lower, "lower", "C")?, "lower.C", q, m)?;
    let a = as_mat(get(lower, "lower", "A")?, "lower.A", k_rows, n)?;
    let b = as_mat(get(lower, "lower", "B")?, "lower.B", k_rows, m)?;
    let d = as_vec(get(lower, "lower", "d")?, "lower.d")?;
    if d.len() != k_rows {
        return Err(file_err(
            "lower.d",
            format!("expected {k_rows} entries matching lower.A"),
        ));
    }
    let d_obj = match lower.get("D") {
        Some(v) => as_mat(v, "lower.D", q, n)?,
        None => Mat::zeros(q, n),
    };
    let e = match lower.get("e") {
        Some(v) => {
            let e = as_vec(v, "lower.e")?;
            if e.len() != q {
                return Err(file_err("lower.e", format!("expected {q} entries")));
            }
            e
        }
        None => vec![0.0; q],
    };

    let problem = BilevelProblem {
        n,
        m,
        p,
        q,
        upper_objective: UpperObjective { components },
        upper_set: AffineSystem { mat: g, rhs: h },
        lower: LinearLowerLevel {
            c,
            d_obj,
            e,
            a,
            b,
            d,
        },
    };
    problem.validate()?;

    let sampling = match root.get("sampling") {
        Some(s) => {
            let (x_lower, x_upper) = parse_box(get(s, "sampling", "x_box")?, "sampling.x_box", n)?;
            let (y_lower, y_upper) = parse_box(get(s, "sampling", "y_box")?, "sampling.y_box", m)?;
            let h = as_f64(get(s, "sampling", "h")?, "sampling.h")?;
            Some(Sampling {
                x_lower,
                x_upper,
                y_lower,
                y_upper,
                h,
            })
        }
        None => None,
    };

    let mut candidates = Vec::new();
    if let Some(list) = root.get("candidates") {
        let arr = list
            .as_array()
            .ok_or_else(|| file_err("candidates", "expected an array"))?;
        for (i, cand) in arr.iter().enumerate() {
            let base = format!("candidates[{i}]");
            let x = as_vec(get(cand, &base, "x")?, &join(&base, "x"))?;
            let y = as_vec(get(cand, &base, "y")?, &join(&base, "y"))?;
            if x.len() != n || y.len() != m {
                return Err(file_err(&base, format!("expected x of {n} and y of {m}")));
            }
            candidates.push((x, y));
        }
    }

    Ok(LoadedProblem {
        problem,
        sampling,
        candidates,
    })
}

/// Serializes a loaded problem back into the document format.
pub fn serialize_problem(lp: &LoadedProblem) -> Value {
    let prob = &lp.problem;
    let mat_rows = |m: &Mat| -> Value {
        Value::Array(
            (0..m.rows)
                .map(|i| serde_json::json!(m.row(i)))
                .collect(),
        )
    };
    let mut root = serde_json::json!({
        "dims": {"n": prob.n, "m": prob.m, "p": prob.p, "q": prob.q},
        "upper": {"F": prob.upper_objective.components.iter().map(|c| serde_json::json!({
            "Q": (0..c.quad.rows).map(|i| c.quad.row(i).to_vec()).collect::<Vec<_>>(),
            "c": c.lin,
            "b": c.constant,
        })).collect::<Vec<_>>()},
        "X": {"G": mat_rows(&prob.upper_set.mat), "h": prob.upper_set.rhs},
        "lower": {
            "C": mat_rows(&prob.lower.c),
            "D": mat_rows(&prob.lower.d_obj),
            "e": prob.lower.e,
            "A": mat_rows(&prob.lower.a),
            "B": mat_rows(&prob.lower.b),
            "d": prob.lower.d,
        },
    });
    if let Some(s) = &lp.sampling {
        root["sampling"] = serde_json::json!({
            "x_box": {"lower": s.x_lower, "upper": s.x_upper},
            "y_box": {"lower": s.y_lower, "upper": s.y_upper},
            "h": s.h,
        });
    }
    if !lp.candidates.is_empty() {
        root["candidates"] = Value::Array(
            lp.candidates
                .iter()
                .map(|(x, y)| serde_json::json!({"x": x, "y": y}))
                .collect(),
        );
    }
    root
}

/// Command-line interface.
#[derive(Debug, Parser)]
#[command(
    name = "bifront",
    version,
    about = "Frontier maps, constraint-qualification checks, and stationarity \
             certificates for bilevel problems with linear multiobjective lower levels"
)]
pub struct Cli {
    /// Path to the JSON problem file
    #[arg(long, global = true, default_value = "problem.json")]
    pub problem: String,
    /// Emit the machine-readable report instead of text
    #[arg(long, global = true)]
    pub json: bool,
    /// Override a named tolerance, e.g. --tol feas=1e-8 (repeatable)
    #[arg(long, global = true, value_name = "NAME=VALUE")]
    pub tol: Vec<String>,
    /// Seed echoed into the report (randomized suites only)
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

/// Comma-separated vector argument (e.g. `4,3`).
#[derive(Debug, Clone, PartialEq)]
pub struct VectorArg(pub Vec<f64>);

impl std::str::FromStr for VectorArg {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        parse_vector(s).map(VectorArg)
    }
}

#[derive(Debug, Clone, Args)]
pub struct PointArgs {
    /// Parameter vector, comma-separated (e.g. 4,3)
    #[arg(long)]
    pub x: VectorArg,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compute the lower-level front at x
    Front {
        #[command(flatten)]
        point: PointArgs,
        /// eff (Pareto) or weff (weak Pareto)
        #[arg(long, default_value = "eff")]
        kind: String,
    },
    /// Compute the efficient-solution set at x
    Solset {
        #[command(flatten)]
        point: PointArgs,
    },
    /// Estimate the sharp-minimum modulus over the sampling block
    Uwsm,
    /// Estimate the R-regularity modulus over the sampling block
    Rreg,
    /// Check the strong domination property at x
    Domination {
        #[command(flatten)]
        point: PointArgs,
    },
    /// Check regularity (MFCQ): upper level at x, lower level when y given
    Mfcq {
        #[command(flatten)]
        point: PointArgs,
        #[arg(long)]
        y: Option<VectorArg>,
    },
    /// Compose the value-function CQ verdict at (x, y)
    Gvfcq {
        #[command(flatten)]
        point: PointArgs,
        #[arg(long)]
        y: VectorArg,
    },
    /// Certify or refute the stationarity system at (x, y)
    Stationarity {
        #[command(flatten)]
        point: PointArgs,
        #[arg(long)]
        y: VectorArg,
        /// Use the coderivative-inclusion assembly instead of the direct one
        #[arg(long)]
        coderivative_form: bool,
    },
    /// Brute-force grid front at x (independent of the exact path)
    OracleFront {
        #[command(flatten)]
        point: PointArgs,
        /// Grid step override (defaults to the sampling block's h)
        #[arg(long)]
        h: Option<f64>,
    },
    /// Enumerate grid-approximate bilevel efficient pairs
    OracleBilevel {
        #[arg(long)]
        h: Option<f64>,
    },
    /// Validate the problem file and probe basic solvability
    Validate,
}

fn parse_vector(s: &str) -> std::result::Result<Vec<f64>, String> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|e| format!("bad number `{t}`: {e}"))
        })
        .collect()
}

/// Machine-readable run outcome. Every field is present for every
/// command; inapplicable ones are null.
#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub command: String,
    pub version: String,
    pub problem: String,
    pub x: Option<Vec<f64>>,
    pub y: Option<Vec<f64>>,
    pub kind: Option<String>,
    pub seed: Option<u64>,
    pub tolerances: Vec<(String, f64)>,
    pub front: Option<ParetoFront>,
    pub solution_set: Option<EfficientSet>,
    pub cq_reports: Option<Vec<CqReport>>,
    pub certificate: Option<StationarityCertificate>,
    pub residuals: Option<crate::stationarity::SystemResiduals>,
    pub oracle_front: Option<Vec<Vec<f64>>>,
    pub oracle_pairs: Option<Vec<(Vec<f64>, Vec<f64>)>>,
    pub mfcq: Option<Vec<(String, bool)>>,
    pub diagnostics: Vec<String>,
    pub exit_code: i32,
}

impl RunReport {
    fn new(command: &str, problem: &str, seed: Option<u64>, tol: &Tolerances) -> Self {
        RunReport {
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            problem: problem.to_string(),
            x: None,
            y: None,
            kind: None,
            seed,
            tolerances: tol.named(),
            front: None,
            solution_set: None,
            cq_reports: None,
            certificate: None,
            residuals: None,
            oracle_front: None,
            oracle_pairs: None,
            mfcq: None,
            diagnostics: Vec::new(),
            exit_code: 0,
        }
    }
}

fn exit_code_for(err: &Error) -> i32 {
    match err {
        Error::IterationLimit(_) | Error::GuardExceeded(_) => 3,
        _ => 2,
    }
}

fn verdict_exit(v: Verdict) -> i32 {
    if v == Verdict::Violated {
        1
    } else {
        0
    }
}

fn parse_kind(s: &str) -> Result<EfficiencyKind> {
    match s {
        "eff" => Ok(EfficiencyKind::Pareto),
        "weff" => Ok(EfficiencyKind::WeakPareto),
        other => Err(Error::EmptyInput(format!(
            "unknown efficiency kind `{other}` (use eff or weff)"
        ))),
    }
}

fn apply_tol_overrides(tol: &mut Tolerances, overrides: &[String]) -> Result<()> {
    for o in overrides {
        let Some((name, value)) = o.split_once('=') else {
            return Err(Error::UnknownTolerance(format!(
                "{o} (expected NAME=VALUE)"
            )));
        };
        let v: f64 = value
            .parse()
            .map_err(|_| Error::UnknownTolerance(format!("{o} (bad value)")))?;
        tol.set(name.trim(), v)?;
    }
    Ok(())
}

fn sampling_required(lp: &LoadedProblem) -> Result<&Sampling> {
    lp.sampling.as_ref().ok_or_else(|| {
        Error::EmptyInput("this command needs a `sampling` block in the problem file".to_string())
    })
}

/// Executes one command against a loaded problem, filling the report and
/// choosing the exit code. Infallible inputs aside, errors are mapped to
/// exit codes 2 (input) and 3 (numerical) by the caller.
fn dispatch(
    cmd: &Command,
    lp: &LoadedProblem,
    report: &mut RunReport,
    tol: &Tolerances,
) -> Result<()> {
    let prob = &lp.problem;
    match cmd {
        Command::Front { point, kind } => {
            report.x = Some(point.x.0.clone());
            report.kind = Some(kind.clone());
            let k = parse_kind(kind)?;
            if prob.q > 2 {
                // approximate route: grid front over the sampling box
                let s = sampling_required(lp)?;
                let gf = grid_front(&prob.lower, &point.x.0, &s.y_grid(s.h)?, k, tol)?;
                report.oracle_front = Some(gf.points);
                report
                    .diagnostics
                    .push("approximate: grid front (exact path supports q <= 2)".to_string());
                if let Some(w) = gf.warning {
                    report.diagnostics.push(w);
                }
            } else {
                report.front = Some(frontier_map(&prob.lower, &point.x.0, k, tol)?);
            }
        }
        Command::Solset { point } => {
            report.x = Some(point.x.0.clone());
            report.solution_set = Some(efficient_set(&prob.lower, &point.x.0, tol)?);
        }
        Command::Uwsm => {
            let s = sampling_required(lp)?;
            let region = s.region()?;
            let est = cq::estimate_uwsm_lambda(prob, &region, tol)?;
            let mut reports = vec![est];
            // exact linear route over the box corners and center
            let xs = corner_sample(&s.x_lower, &s.x_upper);
            match cq::check_linear_uwsm(prob, &xs, tol) {
                Ok(r) => reports.push(r),
                Err(e) => report.diagnostics.push(format!("linear route: {e}")),
            }
            report.exit_code = verdict_exit(reports[0].verdict);
            report.cq_reports = Some(reports);
        }
        Command::Rreg => {
            let s = sampling_required(lp)?;
            let est = cq::estimate_rreg_sigma(prob, &s.region()?, tol)?;
            report.exit_code = verdict_exit(est.verdict);
            report.cq_reports = Some(vec![est]);
        }
        Command::Domination { point } => {
            report.x = Some(point.x.0.clone());
            let r = cq::check_strong_domination(prob, &point.x.0, tol)?;
            report.exit_code = verdict_exit(r.verdict);
            report.cq_reports = Some(vec![r]);
        }
        Command::Mfcq { point, y } => {
            report.x = Some(point.x.0.clone());
            report.y = y.clone().map(|v| v.0);
            let mut outcomes = vec![(
                "upper".to_string(),
                cq::check_upper_mfcq(prob, &point.x.0, tol)?,
            )];
            if let Some(y) = y {
                outcomes.push((
                    "lower".to_string(),
                    cq::check_lower_mfcq(prob, &point.x.0, &y.0, tol)?,
                ));
            }
            report.exit_code = if outcomes.iter().all(|(_, ok)| *ok) {
                0
            } else {
                1
            };
            report.mfcq = Some(outcomes);
        }
        Command::Gvfcq { point, y } => {
            report.x = Some(point.x.0.clone());
            report.y = Some(y.0.clone());
            let ctx = CqContext {
                x: Some(point.x.0.clone()),
                y: Some(y.0.clone()),
                xs: vec![point.x.0.clone()],
                region: lp.sampling.as_ref().and_then(|s| s.region().ok()),
                lambda: 1.0,
                weight_grid: 2,
            };
            let r = cq::gvfcq_verdict(prob, &ctx, tol)?;
            report.exit_code = verdict_exit(r.verdict);
            report.cq_reports = Some(vec![r]);
        }
        Command::Stationarity {
            point,
            y,
            coderivative_form,
        } => {
            report.x = Some(point.x.0.clone());
            report.y = Some(y.0.clone());
            let cert = if *coderivative_form {
                check_coderivative_form(prob, &point.x.0, &y.0, tol)?
            } else {
                certify(prob, &point.x.0, &y.0, tol)?
            };
            if cert.status == Status::Stationary {
                report.residuals = Some(residuals(prob, &point.x.0, &y.0, &cert)?);
            } else {
                report.exit_code = 1;
            }
            report.certificate = Some(cert);
        }
        Command::OracleFront { point, h } => {
            report.x = Some(point.x.0.clone());
            let s = sampling_required(lp)?;
            let step = h.unwrap_or(s.h);
            let gf = grid_front(
                &prob.lower,
                &point.x.0,
                &s.y_grid(step)?,
                EfficiencyKind::Pareto,
                tol,
            )?;
            if let Some(w) = gf.warning {
                report.diagnostics.push(w);
            }
            report.oracle_front = Some(gf.points);
        }
        Command::OracleBilevel { h } => {
            let s = sampling_required(lp)?;
            let step = h.unwrap_or(s.h);
            let pairs = grid_bilevel_efficient(
                prob,
                &s.x_grid(step)?,
                &s.y_grid(step)?,
                EfficiencyKind::Pareto,
                step,
                tol,
            )?;
            report.oracle_pairs = Some(pairs);
        }
        Command::Validate => {
            let diags = validate_probe(lp, tol);
            report.diagnostics.extend(diags);
        }
    }
    Ok(())
}

fn corner_sample(lower: &[f64], upper: &[f64]) -> Vec<Vec<f64>> {
    let n = lower.len();
    let mut out = Vec::new();
    let corners = 1usize << n.min(6);
    for mask in 0..corners {
        let x: Vec<f64> = (0..n)
            .map(|i| {
                if i < 6 && (mask >> i) & 1 == 1 {
                    upper[i]
                } else {
                    lower[i]
                }
            })
            .collect();
        out.push(x);
    }
    out.push(
        lower
            .iter()
            .zip(upper)
            .map(|(l, u)| 0.5 * (l + u))
            .collect(),
    );
    out
}

/// Validation probes: dimension checks already ran during parsing; here we
/// probe solvability at a sample x, regularity, and exact-path coverage.
fn validate_probe(lp: &LoadedProblem, tol: &Tolerances) -> Vec<String> {
    let prob = &lp.problem;
    let mut diags = vec![format!(
        "valid: dims n={} m={} p={} q={}, {} upper-set rows, {} lower-level rows",
        prob.n,
        prob.m,
        prob.p,
        prob.q,
        prob.upper_set.mat.rows,
        prob.lower.b.rows
    )];
    let sample_x: Vec<f64> = lp
        .candidates
        .first()
        .map(|(x, _)| x.clone())
        .or_else(|| {
            lp.sampling.as_ref().map(|s| {
                s.x_lower
                    .iter()
                    .zip(&s.x_upper)
                    .map(|(l, u)| 0.5 * (l + u))
                    .collect()
            })
        })
        .unwrap_or_else(|| vec![0.0; prob.n]);
    match crate::pareto::feasible_set(&prob.lower, &sample_x) {
        Ok(fs) => match is_bounded(&fs, tol) {
            Ok(true) => diags.push(format!("Y(x) nonempty and bounded at x = {sample_x:?}")),
            Ok(false) => diags.push(format!(
                "warning: Y(x) unbounded at x = {sample_x:?}; exact path unavailable there"
            )),
            Err(Error::Infeasible) => diags.push(format!(
                "warning: Y(x) empty at x = {sample_x:?}"
            )),
            Err(e) => diags.push(format!("warning: boundedness probe failed: {e}")),
        },
        Err(e) => diags.push(format!("warning: feasible-set assembly failed: {e}")),
    }
    match cq::check_upper_mfcq(prob, &sample_x, tol) {
        Ok(true) => diags.push("upper-level regularity holds at the sample x".to_string()),
        Ok(false) => diags.push("warning: upper-level regularity fails at the sample x".to_string()),
        Err(e) => diags.push(format!("warning: regularity probe failed: {e}")),
    }
    if prob.q <= 2 {
        diags.push(format!("q = {}: exact front path available", prob.q));
    } else {
        diags.push(format!(
            "warning: q = {} exceeds the exact path (q <= 2); front queries use the grid oracle",
            prob.q
        ));
    }
    let x_poly = Polyhedron::new(prob.upper_set.mat.clone(), prob.upper_set.rhs.clone());
    if let Ok(xp) = x_poly {
        if let Ok(false) = is_bounded(&xp, tol) {
            diags.push(
                "note: X is unbounded; sampled claims cannot cover all of X".to_string(),
            );
        }
    }
    diags
}

/// Renders a human-readable summary of the report.
pub fn render_text(report: &RunReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "command: {}", report.command);
    if let Some(front) = &report.front {
        let _ = writeln!(out, "front ({:?}):", front.kind);
        for face in &front.faces {
            let _ = writeln!(
                out,
                "  face {:?}  weight {:?}",
                face.polytope.vertices, face.weight.alpha
            );
        }
    }
    if let Some(set) = &report.solution_set {
        let _ = writeln!(out, "efficient set:");
        for face in &set.faces {
            let _ = writeln!(
                out,
                "  face {:?}  weight {:?}",
                face.polytope.vertices, face.weight.alpha
            );
        }
    }
    if let Some(reports) = &report.cq_reports {
        for r in reports {
            let _ = writeln!(out, "{}: {:?}", r.condition, r.verdict);
            for (name, value) in &r.estimates {
                let _ = writeln!(out, "  {name} = {value}");
            }
            if let Some(w) = &r.witness {
                let _ = writeln!(out, "  witness x={:?} y={:?} value={}", w.x, w.y, w.value);
            }
            if !r.chain.is_empty() {
                let _ = writeln!(out, "  chain: {}", r.chain.join(" -> "));
            }
            for nline in &r.notes {
                let _ = writeln!(out, "  note: {nline}");
            }
        }
    }
    if let Some(cert) = &report.certificate {
        let _ = writeln!(out, "status: {:?}", cert.status);
        if cert.status == Status::Stationary {
            let _ = writeln!(out, "  w* = {:?}", cert.w_star);
            let _ = writeln!(out, "  v* = {:?}", cert.v_star);
            let _ = writeln!(out, "  u  = {:?}", cert.u);
            let _ = writeln!(out, "  v  = {:?}", cert.v);
            let _ = writeln!(out, "  w  = {:?}", cert.w);
        } else if let Some(f) = &cert.farkas {
            let _ = writeln!(out, "  Farkas vector: {f:?}");
        }
        for nline in &cert.notes {
            let _ = writeln!(out, "  note: {nline}");
        }
    }
    if let Some(res) = &report.residuals {
        let _ = writeln!(out, "residuals: max {:.3e}", res.max());
    }
    if let Some(points) = &report.oracle_front {
        let _ = writeln!(out, "grid front: {} points", points.len());
        for p in points.iter().take(20) {
            let _ = writeln!(out, "  {p:?}");
        }
        if points.len() > 20 {
            let _ = writeln!(out, "  ... ({} more)", points.len() - 20);
        }
    }
    if let Some(pairs) = &report.oracle_pairs {
        let _ = writeln!(out, "bilevel efficient pairs: {}", pairs.len());
        for (x, y) in pairs.iter().take(20) {
            let _ = writeln!(out, "  x={x:?} y={y:?}");
        }
    }
    if let Some(mf) = &report.mfcq {
        for (level, ok) in mf {
            let _ = writeln!(out, "{level}-level regularity: {ok}");
        }
    }
    for d in &report.diagnostics {
        let _ = writeln!(out, "{d}");
    }
    out
}

/// Full run: load, dispatch, report. Returns the report and the process
/// exit code; errors are folded into both.
pub fn run(cli: &Cli) -> (RunReport, i32) {
    let mut tol = Tolerances::default();
    let command_name = match &cli.command {
        Command::Front { .. } => "front",
        Command::Solset { .. } => "solset",
        Command::Uwsm => "uwsm",
        Command::Rreg => "rreg",
        Command::Domination { .. } => "domination",
        Command::Mfcq { .. } => "mfcq",
        Command::Gvfcq { .. } => "gvfcq",
        Command::Stationarity { .. } => "stationarity",
        Command::OracleFront { .. } => "oracle-front",
        Command::OracleBilevel { .. } => "oracle-bilevel",
        Command::Validate => "validate",
    };
    let mut report = RunReport::new(command_name, &cli.problem, cli.seed, &tol);
    if let Err(e) = apply_tol_overrides(&mut tol, &cli.tol) {
        report.diagnostics.push(e.to_string());
        report.exit_code = 2;
        return (report, 2);
    }
    report.tolerances = tol.named();

    let text = match std::fs::read_to_string(Path::new(&cli.problem)) {
        Ok(t) => t,
        Err(e) => {
            report
                .diagnostics
                .push(format!("cannot read `{}`: {e}", cli.problem));
            report.exit_code = 2;
            return (report, 2);
        }
    };
    let lp = match parse_problem(&text) {
        Ok(lp) => lp,
        Err(e) => {
            report.diagnostics.push(e.to_string());
            report.exit_code = 2;
            return (report, 2);
        }
    };
    match dispatch(&cli.command, &lp, &mut report, &tol) {
        Ok(()) => {}
        Err(e) => {
            let code = exit_code_for(&e);
            report.diagnostics.push(e.to_string());
            report.exit_code = code;
        }
    }
    let code = report.exit_code;
    (report, code)
}

/// Entry point used by the binary.
pub fn main_entry() -> i32 {
    let cli = Cli::parse();
    let (report, code) = run(&cli);
    if cli.json {
        println!(
            "{}",
            serde_json::to_string_pretty(&report).expect("report serializes")
        );
    } else {
        print!("{}", render_text(&report));
    }
    code
}

#[cfg(test)]
mod tests {
    use super::*;

    const WORKED_EXAMPLE: &str = include_str!("../../../problems/worked_example.json");

    #[test]
    fn parse_worked_example() {
        let lp = parse_problem(WORKED_EXAMPLE).unwrap();
        assert_eq!(lp.problem.n, 2);
        assert_eq!(lp.problem.lower.b.rows, 6);
        assert!(lp.sampling.is_some());
        assert_eq!(lp.candidates.len(), 2);
    }

    #[test]
    fn round_trip_parse_serialize_parse() {
        let lp = parse_problem(WORKED_EXAMPLE).unwrap();
        let text = serde_json::to_string_pretty(&serialize_problem(&lp)).unwrap();
        let again = parse_problem(&text).unwrap();
        assert_eq!(lp, again);
    }

    #[test]
    fn missing_key_paths_are_reported() {
        let mut v: Value = serde_json::from_str(WORKED_EXAMPLE).unwrap();
        v.as_object_mut().unwrap().get_mut("upper").unwrap()
            .as_object_mut().unwrap().remove("F");
        let err = parse_problem(&v.to_string()).unwrap_err();
        match err {
            Error::ProblemFile { path, .. } => assert_eq!(path, "upper.F"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn wrong_matrix_shape_names_the_key() {
        let mut v: Value = serde_json::from_str(WORKED_EXAMPLE).unwrap();
        // drop one row of B so it no longer matches A
        let b = v["lower"]["B"].as_array_mut().unwrap();
        b.pop();
        let err = parse_problem(&v.to_string()).unwrap_err();
        match err {
            Error::ProblemFile { path, .. } => assert!(path.starts_with("lower.B"), "{path}"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn vector_parsing() {
        assert_eq!(parse_vector("4,3").unwrap(), vec![4.0, 3.0]);
        assert_eq!(parse_vector("1.5, -2").unwrap(), vec![1.5, -2.0]);
        assert!(parse_vector("a,b").is_err());
    }

    #[test]
    fn tolerance_overrides() {
        let mut tol = Tolerances::default();
        apply_tol_overrides(&mut tol, &["feas=1e-6".to_string()]).unwrap();
        assert_eq!(tol.feas, 1e-6);
        assert!(apply_tol_overrides(&mut tol, &["nope=1".to_string()]).is_err());
        assert!(apply_tol_overrides(&mut tol, &["feas".to_string()]).is_err());
    }

    #[test]
    fn corner_sample_covers_box() {
        let xs = corner_sample(&[0.0, 0.0], &[1.0, 1.0]);
        assert_eq!(xs.len(), 5);
        assert!(xs.contains(&vec![0.0, 0.0]));
        assert!(xs.contains(&vec![1.0, 1.0]));
        assert!(xs.contains(&vec![0.5, 0.5]));
    }
}
