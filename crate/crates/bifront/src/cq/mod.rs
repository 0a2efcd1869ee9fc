//! Constraint-qualification checkers and estimators, composed into a
//! verdict for the generalized value-function CQ (GVFCQ).
//!
//! GVFCQ itself (a calmness property) is never tested directly; verdicts
//! are derived through its sufficient conditions and their implication
//! graph: Linear CQ -> UWSM -> LUWSM -> GVFCQ, Nonlinear CQ -> UWSM, and
//! R-regularity -> LUWSM. Each checker lives behind a common trait and is
//! registered by name, so callers select strategies at runtime.

mod checks;
mod estimates;

pub use checks::{
    check_linear_uwsm, check_lower_mfcq, check_nonlinear_cq, check_strong_domination,
    check_upper_mfcq,
};
pub use estimates::{estimate_rreg_sigma, estimate_uwsm_lambda, rreg_ratio, uwsm_ratio};

use serde::{Deserialize, Serialize};

use crate::model::BilevelProblem;
use crate::oracle::GridSpec;
use crate::Tolerances;
use crate::{Error, Result};

/// Verdict strength for a condition check.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    /// A sufficient condition verified exactly (possibly on a sample of x,
    /// flagged in the notes when the sample cannot cover X).
    CertifiedSufficient,
    /// No violation found on the sample; no exact sufficiency available.
    SampleConsistent,
    /// A concrete witness violates the condition.
    Violated,
    /// A premise of the check failed (named in the notes); no statement
    /// about the condition itself.
    NotCertified,
}

/// A concrete point (pair) attaining an extremal or violating value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub value: f64,
}

/// Outcome of a CQ check: verdict plus named estimates, the witness that
/// attains them, and the implication chain justifying any GVFCQ claim.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CqReport {
    pub condition: String,
    pub verdict: Verdict,
    pub estimates: Vec<(String, f64)>,
    pub witness: Option<Witness>,
    pub chain: Vec<String>,
    pub notes: Vec<String>,
}

impl CqReport {
    pub fn new(condition: &str, verdict: Verdict) -> Self {
        CqReport {
            condition: condition.to_string(),
            verdict,
            estimates: Vec::new(),
            witness: None,
            chain: Vec::new(),
            notes: Vec::new(),
        }
    }

    pub fn estimate(&self, name: &str) -> Option<f64> {
        self.estimates
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, v)| *v)
    }
}

/// The sampled neighborhood over which LUWSM-style conditions are checked:
/// a box in (x, y)-space with a common grid step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampledRegion {
    pub x: GridSpec,
    pub y: GridSpec,
}

impl SampledRegion {
    pub fn new(
        x_lower: Vec<f64>,
        x_upper: Vec<f64>,
        y_lower: Vec<f64>,
        y_upper: Vec<f64>,
        h: f64,
    ) -> Result<Self> {
        Ok(SampledRegion {
            x: GridSpec::new(x_lower, x_upper, h)?,
            y: GridSpec::new(y_lower, y_upper, h)?,
        })
    }
}

/// Everything a registered checker may need; individual checkers use the
/// fields relevant to them and report missing ones as input errors.
#[derive(Debug, Clone, Default)]
pub struct CqContext {
    pub x: Option<Vec<f64>>,
    pub y: Option<Vec<f64>>,
    pub xs: Vec<Vec<f64>>,
    pub region: Option<SampledRegion>,
    pub lambda: f64,
    pub weight_grid: usize,
}

impl CqContext {
    fn need_x(&self) -> Result<&Vec<f64>> {
        self.x
            .as_ref()
            .ok_or_else(|| Error::EmptyInput("checker requires an x point".to_string()))
    }

    fn need_y(&self) -> Result<&Vec<f64>> {
        self.y
            .as_ref()
            .ok_or_else(|| Error::EmptyInput("checker requires a y point".to_string()))
    }

    fn need_region(&self) -> Result<&SampledRegion> {
        self.region
            .as_ref()
            .ok_or_else(|| Error::EmptyInput("checker requires a sampling region".to_string()))
    }
}

/// A named condition checker selectable at runtime.
pub trait CqChecker: Sync {
    fn name(&self) -> &'static str;
    fn run(&self, prob: &BilevelProblem, ctx: &CqContext, tol: &Tolerances) -> Result<CqReport>;
}

struct UwsmLambda;
struct LinearUwsm;
struct StrongDomination;
struct NonlinearCq;
struct RregSigma;
struct UpperMfcq;
struct LowerMfcq;
struct Gvfcq;

impl CqChecker for UwsmLambda {
    fn name(&self) -> &'static str {
        "uwsm-lambda"
    }
    fn run(&self, prob: &BilevelProblem, ctx: &CqContext, tol: &Tolerances) -> Result<CqReport> {
        estimate_uwsm_lambda(prob, ctx.need_region()?, tol)
    }
}

impl CqChecker for LinearUwsm {
    fn name(&self) -> &'static str {
        "linear-uwsm"
    }
    fn run(&self, prob: &BilevelProblem, ctx: &CqContext, tol: &Tolerances) -> Result<CqReport> {
        check_linear_uwsm(prob, &ctx.xs, tol)
    }
}

impl CqChecker for StrongDomination {
    fn name(&self) -> &'static str {
        "strong-domination"
    }
    fn run(&self, prob: &BilevelProblem, ctx: &CqContext, tol: &Tolerances) -> Result<CqReport> {
        check_strong_domination(prob, ctx.need_x()?, tol)
    }
}

impl CqChecker for NonlinearCq {
    fn name(&self) -> &'static str {
        "nonlinear-cq"
    }
    fn run(&self, prob: &BilevelProblem, ctx: &CqContext, tol: &Tolerances) -> Result<CqReport> {
        check_nonlinear_cq(
            prob,
            ctx.need_x()?,
            ctx.need_y()?,
            ctx.lambda,
            ctx.weight_grid.max(1),
            tol,
        )
    }
}

impl CqChecker for RregSigma {
    fn name(&self) -> &'static str {
        "rreg-sigma"
    }
    fn run(&self, prob: &BilevelProblem, ctx: &CqContext, tol: &Tolerances) -> Result<CqReport> {
        estimate_rreg_sigma(prob, ctx.need_region()?, tol)
    }
}

impl CqChecker for UpperMfcq {
    fn name(&self) -> &'static str {
        "upper-mfcq"
    }
    fn run(&self, prob: &BilevelProblem, ctx: &CqContext, tol: &Tolerances) -> Result<CqReport> {
        let ok = check_upper_mfcq(prob, ctx.need_x()?, tol)?;
        Ok(CqReport::new(
            "upper-level regularity (MFCQ)",
            if ok {
                Verdict::CertifiedSufficient
            } else {
                Verdict::Violated
            },
        ))
    }
}

impl CqChecker for LowerMfcq {
    fn name(&self) -> &'static str {
        "lower-mfcq"
    }
    fn run(&self, prob: &BilevelProblem, ctx: &CqContext, tol: &Tolerances) -> Result<CqReport> {
        let ok = check_lower_mfcq(prob, ctx.need_x()?, ctx.need_y()?, tol)?;
        Ok(CqReport::new(
            "lower-level regularity (MFCQ)",
            if ok {
                Verdict::CertifiedSufficient
            } else {
                Verdict::Violated
            },
        ))
    }
}

impl CqChecker for Gvfcq {
    fn name(&self) -> &'static str {
        "gvfcq"
    }
    fn run(&self, prob: &BilevelProblem, ctx: &CqContext, tol: &Tolerances) -> Result<CqReport> {
        gvfcq_verdict(prob, ctx, tol)
    }
}

/// All registered checkers.
pub fn registry() -> Vec<Box<dyn CqChecker>> {
    vec![
        Box::new(UwsmLambda),
        Box::new(LinearUwsm),
        Box::new(StrongDomination),
        Box::new(NonlinearCq),
        Box::new(RregSigma),
        Box::new(UpperMfcq),
        Box::new(LowerMfcq),
        Box::new(Gvfcq),
    ]
}

/// Looks a checker up by its registered name.
pub fn checker(name: &str) -> Option<Box<dyn CqChecker>> {
    registry().into_iter().find(|c| c.name() == name)
}

/// Composes the sufficient-condition checks into a GVFCQ verdict with the
/// implication chain that produced it. Sub-checker errors (vacuous samples,
/// guards) degrade to notes, never to failures of the composition.
pub fn gvfcq_verdict(
    prob: &BilevelProblem,
    ctx: &CqContext,
    tol: &Tolerances,
) -> Result<CqReport> {
    let mut report = CqReport::new("GVFCQ", Verdict::SampleConsistent);

    // exact route first: the linear sufficient condition
    let xs: Vec<Vec<f64>> = if !ctx.xs.is_empty() {
        ctx.xs.clone()
    } else if let Some(x) = &ctx.x {
        vec![x.clone()]
    } else {
        Vec::new()
    };
    let mut violated: Option<(String, Witness)> = None;
    let mut consistent: Option<Vec<String>> = None;

    if xs.is_empty() {
        report.notes.push("no x sample for the linear route".to_string());
    } else {
        match check_linear_uwsm(prob, &xs, tol) {
            Ok(linear) => {
                for (name, v) in &linear.estimates {
                    report.estimates.push((name.clone(), *v));
                }
                report.notes.extend(linear.notes.iter().cloned());
                if linear.verdict == Verdict::CertifiedSufficient {
                    report.verdict = Verdict::CertifiedSufficient;
                    report.chain = vec![
                        "Linear CQ".to_string(),
                        "UWSM".to_string(),
                        "LUWSM".to_string(),
                        "GVFCQ".to_string(),
                    ];
                    return Ok(report);
                }
                report
                    .notes
                    .push("linear sufficient condition not certified".to_string());
            }
            Err(e) => report.notes.push(format!("linear route unavailable: {e}")),
        }
    }

    if let Some(region) = &ctx.region {
        match estimate_uwsm_lambda(prob, region, tol) {
            Ok(r) => {
                for (name, v) in &r.estimates {
                    report.estimates.push((name.clone(), *v));
                }
                match r.verdict {
                    Verdict::Violated => {
                        violated = Some((
                            "UWSM".to_string(),
                            r.witness.clone().expect("violation carries a witness"),
                        ));
                    }
                    _ => {
                        consistent.get_or_insert(vec![
                            "UWSM".to_string(),
                            "LUWSM".to_string(),
                            "GVFCQ".to_string(),
                        ]);
                    }
                }
            }
            Err(e) => report.notes.push(format!("UWSM sampling vacuous: {e}")),
        }
        match estimate_rreg_sigma(prob, region, tol) {
            Ok(r) => {
                for (name, v) in &r.estimates {
                    report.estimates.push((name.clone(), *v));
                }
                match r.verdict {
                    Verdict::Violated => {
                        if violated.is_none() {
                            violated = Some((
                                "R-regularity".to_string(),
                                r.witness.clone().expect("violation carries a witness"),
                            ));
                        }
                    }
                    _ => {
                        if consistent.is_none() {
                            consistent = Some(vec![
                                "R-regularity".to_string(),
                                "LUWSM".to_string(),
                                "GVFCQ".to_string(),
                            ]);
                        }
                    }
                }
            }
            Err(e) => report
                .notes
                .push(format!("R-regularity sampling vacuous: {e}")),
        }
    } else {
        report
            .notes
            .push("no sampling region; sampled routes skipped".to_string());
    }

    match (violated, consistent) {
        (Some((route, w)), _) => {
            report.verdict = Verdict::Violated;
            report.chain = vec![route, "GVFCQ".to_string()];
            report.witness = Some(w);
        }
        (None, Some(chain)) => {
            report.verdict = Verdict::SampleConsistent;
            report.chain = chain;
        }
        (None, None) => {
            report.verdict = Verdict::SampleConsistent;
            report
                .notes
                .push("all routes vacuous; no counterexample found".to_string());
        }
    }
    Ok(report)
}
