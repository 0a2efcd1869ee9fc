//! Sampled estimators for the sharp-minimum modulus (lambda) and the
//! R-regularity modulus (sigma) over a boxed region of (x, y)-space.
//!
//! Both estimators sweep the x-grid in parallel, computing the front and
//! the efficient set once per x and reusing them across the y-grid.

use rayon::prelude::*;

use crate::cq::{CqReport, SampledRegion, Verdict, Witness};
use crate::linalg::{norm_inf, Mat};
use crate::model::{BilevelProblem, EfficiencyKind};
use crate::pareto::{efficient_set, feasible_set, frontier_map};
use crate::polyhedra::{project_polyhedron, Polyhedron};
use crate::Tolerances;
use crate::{Error, Result};

/// Threshold below which a distance counts as zero for sample
/// classification (membership in S(x), graph residuals).
fn zero_tol(tol: &Tolerances) -> f64 {
    tol.proj * 10.0
}

struct XSlice {
    min_ratio: f64,
    min_witness: Option<(Vec<f64>, Vec<f64>)>,
    max_ratio: f64,
    max_witness: Option<(Vec<f64>, Vec<f64>)>,
    zero_denominator: Option<(Vec<f64>, Vec<f64>, f64)>,
    samples: usize,
}

impl XSlice {
    fn empty() -> Self {
        XSlice {
            min_ratio: f64::INFINITY,
            min_witness: None,
            max_ratio: f64::NEG_INFINITY,
            max_witness: None,
            zero_denominator: None,
            samples: 0,
        }
    }
}

/// The mapping whose sharpness is being estimated, evaluated at one
/// sample: `(d(f(x,y), front), d(y, S(x)), d((x,y), gph Y))`.
fn sample_distances(
    prob: &BilevelProblem,
    x: &[f64],
    y: &[f64],
    front: &crate::pareto::ParetoFront,
    sset: &crate::pareto::EfficientSet,
    graph: &Polyhedron,
    y_feasible: bool,
    tol: &Tolerances,
) -> Result<(f64, f64, f64)> {
    let z = prob.lower.objective(x, y);
    let d_front = front.distance(&z, tol)?;
    let d_set = sset.distance(y, tol)?;
    let d_graph = if y_feasible {
        0.0
    } else {
        let mut xy = x.to_vec();
        xy.extend_from_slice(y);
        project_polyhedron(&xy, graph, tol)?.1
    };
    Ok((d_front, d_set, d_graph))
}

/// `{(x, y) : A x + B y <= d}` as one polyhedron over (x, y).
fn graph_polyhedron(prob: &BilevelProblem) -> Result<Polyhedron> {
    let ll = &prob.lower;
    let (n, m, _, k) = ll.dims();
    let rows: Vec<Vec<f64>> = (0..k)
        .map(|i| {
            let mut row = Vec::with_capacity(n + m);
            row.extend_from_slice(ll.a.row(i));
            row.extend_from_slice(ll.b.row(i));
            row
        })
        .collect();
    Polyhedron::new(Mat::from_rows(&rows)?, ll.d.clone())
}

fn sweep(prob: &BilevelProblem, region: &SampledRegion, tol: &Tolerances) -> Result<Vec<XSlice>> {
    let (n, m, _, _) = prob.lower.dims();
    if region.x.lower.len() != n || region.y.lower.len() != m {
        return Err(Error::DimensionMismatch(
            "sampling region must match (n, m)".to_string(),
        ));
    }
    region.x.point_count()?;
    region.y.point_count()?;
    let x_axes = region.x.axes();
    let y_axes = region.y.axes();
    let x_total: usize = x_axes.iter().map(|a| a.len()).product();
    let y_total: usize = y_axes.iter().map(|a| a.len()).product();
    let graph = graph_polyhedron(prob)?;
    let ztol = zero_tol(tol);

    (0..x_total)
        .into_par_iter()
        .map(|ix| -> Result<XSlice> {
            let x = region.x.point(&x_axes, ix);
            let front = match frontier_map(&prob.lower, &x, EfficiencyKind::Pareto, tol) {
                Ok(f) => f,
                Err(Error::Infeasible) => return Ok(XSlice::empty()), // x outside dom S
                Err(e) => return Err(e),
            };
            let sset = efficient_set(&prob.lower, &x, tol)?;
            let fs = feasible_set(&prob.lower, &x)?;
            let feas_tol = tol.feas * (1.0 + norm_inf(&fs.rhs));

            let mut slice = XSlice::empty();
            for iy in 0..y_total {
                let y = region.y.point(&y_axes, iy);
                let y_feasible = fs.contains(&y, feas_tol);
                let (d_front, d_set, d_graph) =
                    sample_distances(prob, &x, &y, &front, &sset, &graph, y_feasible, tol)?;
                if d_set <= ztol {
                    continue; // y in S(x): zero-over-zero sample
                }
                let den = d_front.max(d_graph);
                if den <= ztol {
                    // positive numerator over a zero denominator: direct
                    // violation of the R-regularity bound
                    if slice.zero_denominator.is_none() {
                        slice.zero_denominator = Some((x.clone(), y.clone(), d_set));
                    }
                    continue;
                }
                slice.samples += 1;
                if y_feasible {
                    // sharpness ratio only meaningful on the graph
                    let ratio = d_front / d_set;
                    if ratio < slice.min_ratio {
                        slice.min_ratio = ratio;
                        slice.min_witness = Some((x.clone(), y.clone()));
                    }
                }
                let inv = d_set / den;
                if inv > slice.max_ratio {
                    slice.max_ratio = inv;
                    slice.max_witness = Some((x.clone(), y.clone()));
                }
            }
            Ok(slice)
        })
        .collect()
}

/// Estimates the uniform weak sharp minimum modulus: the infimum of
/// `d(f(x,y), front(x)) / d(y, S(x))` over sampled feasible pairs with
/// `y` outside `S(x)`.
pub fn estimate_uwsm_lambda(
    prob: &BilevelProblem,
    region: &SampledRegion,
    tol: &Tolerances,
) -> Result<CqReport> {
    let slices = sweep(prob, region, tol)?;
    let mut lambda = f64::INFINITY;
    let mut witness: Option<(Vec<f64>, Vec<f64>)> = None;
    for s in slices {
        if s.min_ratio < lambda && s.min_witness.is_some() {
            lambda = s.min_ratio;
            witness = s.min_witness;
        }
    }
    let Some((wx, wy)) = witness else {
        return Err(Error::VacuousSample(
            "no sampled y in Y(x) outside S(x)".to_string(),
        ));
    };
    let mut report = CqReport::new(
        "uniform weak sharp minimum (sampled modulus)",
        if lambda > tol.pos {
            Verdict::SampleConsistent
        } else {
            Verdict::Violated
        },
    );
    report.estimates.push(("lambda_hat".to_string(), lambda));
    report.witness = Some(Witness {
        x: wx,
        y: wy,
        value: lambda,
    });
    report.chain = vec!["UWSM".to_string()];
    Ok(report)
}

/// Estimates the R-regularity modulus: the supremum of
/// `d(y, S(x)) / max(d(f(x,y), front(x)), d((x,y), gph Y))` over sampled
/// pairs with `x` in dom S. Zero-over-zero samples are skipped; a positive
/// numerator over a zero denominator is a violation with witness.
pub fn estimate_rreg_sigma(
    prob: &BilevelProblem,
    region: &SampledRegion,
    tol: &Tolerances,
) -> Result<CqReport> {
    let slices = sweep(prob, region, tol)?;
    let mut sigma = f64::NEG_INFINITY;
    let mut witness: Option<(Vec<f64>, Vec<f64>)> = None;
    let mut violation: Option<(Vec<f64>, Vec<f64>, f64)> = None;
    for s in slices {
        if s.max_ratio > sigma {
            sigma = s.max_ratio;
            witness = s.max_witness;
        }
        if violation.is_none() {
            violation = s.zero_denominator;
        }
    }
    if let Some((x, y, num)) = violation {
        let mut report = CqReport::new("R-regularity (sampled modulus)", Verdict::Violated);
        report.witness = Some(Witness { x, y, value: num });
        report
            .notes
            .push("positive distance to S(x) with zero residuals".to_string());
        report.chain = vec!["R-regularity".to_string()];
        return Ok(report);
    }
    let Some((wx, wy)) = witness else {
        return Err(Error::VacuousSample(
            "no sampled pair with a positive residual".to_string(),
        ));
    };
    let mut report = CqReport::new("R-regularity (sampled modulus)", Verdict::SampleConsistent);
    report.estimates.push(("sigma_hat".to_string(), sigma));
    report.witness = Some(Witness {
        x: wx,
        y: wy,
        value: sigma,
    });
    report.chain = vec!["R-regularity".to_string()];
    Ok(report)
}

/// Recomputes the sharpness ratio at a stored witness.
pub fn uwsm_ratio(prob: &BilevelProblem, x: &[f64], y: &[f64], tol: &Tolerances) -> Result<f64> {
    let front = frontier_map(&prob.lower, x, EfficiencyKind::Pareto, tol)?;
    let sset = efficient_set(&prob.lower, x, tol)?;
    let z = prob.lower.objective(x, y);
    let num = front.distance(&z, tol)?;
    let den = sset.distance(y, tol)?;
    if den <= zero_tol(tol) {
        return Err(Error::VacuousSample("witness lies in S(x)".to_string()));
    }
    Ok(num / den)
}

/// Recomputes the R-regularity ratio at a stored witness.
pub fn rreg_ratio(prob: &BilevelProblem, x: &[f64], y: &[f64], tol: &Tolerances) -> Result<f64> {
    let front = frontier_map(&prob.lower, x, EfficiencyKind::Pareto, tol)?;
    let sset = efficient_set(&prob.lower, x, tol)?;
    let fs = feasible_set(&prob.lower, x)?;
    let graph = graph_polyhedron(prob)?;
    let feas_tol = tol.feas * (1.0 + norm_inf(&fs.rhs));
    let y_feasible = fs.contains(y, feas_tol);
    let (d_front, d_set, d_graph) =
        sample_distances(prob, x, y, &front, &sset, &graph, y_feasible, tol)?;
    let den = d_front.max(d_graph);
    if den <= zero_tol(tol) {
        return Err(Error::VacuousSample(
            "witness has zero residuals".to_string(),
        ));
    }
    Ok(d_set / den)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{AffineSystem, QuadraticComponent, UpperObjective};

    fn tol() -> Tolerances {
        Tolerances::default()
    }

    pub fn boxed_problem() -> BilevelProblem {
        let c = Mat::from_rows(&[vec![2.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let a = Mat::from_rows(&[
            vec![0.0, 0.0],
            vec![0.0, 0.0],
            vec![0.0, 0.0],
            vec![0.0, 0.0],
            vec![-1.0, 0.0],
            vec![0.0, -1.0],
        ])
        .unwrap();
        let b = Mat::from_rows(&[
            vec![1.0, 0.0],
            vec![-1.0, 0.0],
            vec![0.0, 2.0],
            vec![0.0, -1.0],
            vec![1.0, 0.0],
            vec![0.0, 1.0],
        ])
        .unwrap();
        let lower = crate::model::LinearLowerLevel::pure(
            c,
            a,
            b,
            vec![4.0, -1.0, 6.0, -2.0, 0.0, 0.0],
        );
        BilevelProblem {
            n: 2,
            m: 2,
            p: 2,
            q: 2,
            upper_objective: UpperObjective {
                components: vec![
                    QuadraticComponent::affine(vec![1.0, 0.0, 1.0, 0.0], 0.0),
                    QuadraticComponent::affine(vec![0.0, 1.0, 0.0, 1.0], 0.0),
                ],
            },
            upper_set: AffineSystem {
                mat: Mat::from_rows(&[
                    vec![-1.0, 0.0],
                    vec![0.0, -1.0],
                    vec![1.0, 0.0],
                    vec![0.0, 1.0],
                ])
                .unwrap(),
                rhs: vec![-4.0, -3.0, 6.0, 5.0],
            },
            lower,
        }
    }

    fn region(h: f64) -> SampledRegion {
        SampledRegion::new(
            vec![4.0, 3.0],
            vec![6.0, 5.0],
            vec![1.0, 2.0],
            vec![4.0, 3.0],
            h,
        )
        .unwrap()
    }

    #[test]
    fn lambda_hat_on_boxed_problem() {
        let prob = boxed_problem();
        let report = estimate_uwsm_lambda(&prob, &region(0.25), &tol()).unwrap();
        assert_eq!(report.verdict, Verdict::SampleConsistent);
        let lam = report.estimate("lambda_hat").unwrap();
        // closed-form infimum is 1, attained along y1 = 1
        assert!((0.95..=1.0 + 1e-9).contains(&lam), "lambda_hat = {lam}");
        // witness reproduces the estimate
        let w = report.witness.unwrap();
        let again = uwsm_ratio(&prob, &w.x, &w.y, &tol()).unwrap();
        assert!((again - lam).abs() < 1e-12);
    }

    #[test]
    fn sigma_hat_reciprocal_of_lambda() {
        let prob = boxed_problem();
        let report = estimate_rreg_sigma(&prob, &region(0.25), &tol()).unwrap();
        assert_eq!(report.verdict, Verdict::SampleConsistent);
        let sig = report.estimate("sigma_hat").unwrap();
        assert!((1.0 - 1e-9..=1.06).contains(&sig), "sigma_hat = {sig}");
        let w = report.witness.unwrap();
        let again = rreg_ratio(&prob, &w.x, &w.y, &tol()).unwrap();
        assert!((again - sig).abs() < 1e-12);
    }

    #[test]
    fn refining_never_raises_lambda_or_lowers_sigma() {
        let prob = boxed_problem();
        let coarse_l = estimate_uwsm_lambda(&prob, &region(0.5), &tol())
            .unwrap()
            .estimate("lambda_hat")
            .unwrap();
        let fine_l = estimate_uwsm_lambda(&prob, &region(0.25), &tol())
            .unwrap()
            .estimate("lambda_hat")
            .unwrap();
        assert!(fine_l <= coarse_l + 1e-12);
        let coarse_s = estimate_rreg_sigma(&prob, &region(0.5), &tol())
            .unwrap()
            .estimate("sigma_hat")
            .unwrap();
        let fine_s = estimate_rreg_sigma(&prob, &region(0.25), &tol())
            .unwrap()
            .estimate("sigma_hat")
            .unwrap();
        assert!(fine_s >= coarse_s - 1e-12);
    }

    #[test]
    fn zero_objective_sample_is_vacuous() {
        // C = 0: every feasible point is efficient, so no sample qualifies
        let mut prob = boxed_problem();
        prob.lower.c = Mat::zeros(2, 2);
        let err = estimate_uwsm_lambda(&prob, &region(0.5), &tol());
        assert!(matches!(err, Err(Error::VacuousSample(_))));
    }

    #[test]
    fn scalar_ratio_is_one() {
        // q = 1, f = y over Y = [0, 1]: value-gap equals distance exactly
        let lower = crate::model::LinearLowerLevel::pure(
            Mat::from_rows(&[vec![1.0]]).unwrap(),
            Mat::zeros(2, 1),
            Mat::from_rows(&[vec![1.0], vec![-1.0]]).unwrap(),
            vec![1.0, 0.0],
        );
        let prob = BilevelProblem {
            n: 1,
            m: 1,
            p: 1,
            q: 1,
            upper_objective: UpperObjective {
                components: vec![QuadraticComponent::affine(vec![1.0, 0.0], 0.0)],
            },
            upper_set: AffineSystem {
                mat: Mat::from_rows(&[vec![1.0]]).unwrap(),
                rhs: vec![10.0],
            },
            lower,
        };
        let region = SampledRegion::new(vec![0.0], vec![1.0], vec![0.0], vec![1.0], 0.25).unwrap();
        let report = estimate_uwsm_lambda(&prob, &region, &tol()).unwrap();
        let lam = report.estimate("lambda_hat").unwrap();
        assert!((lam - 1.0).abs() < 1e-9);
    }

    #[test]
    fn infeasible_samples_use_graph_residual() {
        // y-box wider than Y(x): infeasible samples contribute via the
        // graph distance and stay finite
        let prob = boxed_problem();
        let region = SampledRegion::new(
            vec![4.0, 3.0],
            vec![4.5, 3.5],
            vec![0.0, 1.0],
            vec![5.0, 4.0],
            0.5,
        )
        .unwrap();
        let report = estimate_rreg_sigma(&prob, &region, &tol()).unwrap();
        assert_eq!(report.verdict, Verdict::SampleConsistent);
        assert!(report.estimate("sigma_hat").unwrap().is_finite());
    }
}
