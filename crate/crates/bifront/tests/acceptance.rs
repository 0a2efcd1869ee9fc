//! End-to-end acceptance suite for the worked example and the randomized
//! instance families. Reference values for the worked example were frozen
//! from independent by-hand derivations and the grid oracle before the
//! exact routines existed.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use bifront::cq::{
    check_linear_uwsm, check_lower_mfcq, check_strong_domination, check_upper_mfcq,
    estimate_rreg_sigma, estimate_uwsm_lambda, SampledRegion, Verdict,
};
use bifront::linalg::Mat;
use bifront::model::{dominates, eff_filter, EfficiencyKind, LinearLowerLevel};
use bifront::oracle::{grid_domination_check, grid_front, GridSpec};
use bifront::pareto::{
    distance_to_solution_set, efficient_set, frontier_map, is_efficient_point,
};
use bifront::polyhedra::{is_bounded, lp_solve, optimal_face, verify_farkas, LpOutcome, Polyhedron};
use bifront::stationarity::{
    assemble_kkt, certify, check_coderivative_form, detect_active_sets, residuals,
    system_polyhedron, Status,
};
use bifront::Tolerances;

const WORKED_EXAMPLE: &str = include_str!("../../../problems/worked_example.json");

fn worked_example() -> bifront::cli::LoadedProblem {
    bifront::cli::parse_problem(WORKED_EXAMPLE).expect("worked example parses")
}

fn estimate(report: &bifront::cq::CqReport, name: &str) -> f64 {
    report
        .estimates
        .iter()
        .find(|(n, _)| n == name)
        .unwrap_or_else(|| panic!("estimate {name} missing"))
        .1
}

/// The frontier map and the efficient-solution set are
/// constant across the parameter box, and both are singletons.
#[test]
fn worked_example_front_and_solution_set_over_25_parameters() {
    let lp = worked_example();
    let tol = Tolerances::default();
    let start = Instant::now();
    for i in 0..5 {
        for j in 0..5 {
            let x = vec![4.0 + 0.5 * i as f64, 3.0 + 0.5 * j as f64];
            let front = frontier_map(&lp.problem.lower, &x, EfficiencyKind::Pareto, &tol).unwrap();
            let verts = front.vertices();
            assert_eq!(verts.len(), 1, "front at {x:?} is a single point");
            assert!((verts[0][0] - 2.0).abs() <= 1e-9);
            assert!((verts[0][1] - 2.0).abs() <= 1e-9);

            let set = efficient_set(&lp.problem.lower, &x, &tol).unwrap();
            let sverts = set.vertices();
            assert_eq!(sverts.len(), 1, "solution set at {x:?} is a single point");
            assert!((sverts[0][0] - 1.0).abs() <= 1e-9);
            assert!((sverts[0][1] - 2.0).abs() <= 1e-9);
        }
    }
    assert!(
        start.elapsed().as_secs_f64() < 1.0,
        "25 exact evaluations stay under one second"
    );
}

/// The linear sufficient condition reports the hand-derived
/// moduli: delta_hat = 2 (from 2*mu*y1 + nu*y2 >= 2 over the weight
/// simplex) and k_hat = sqrt(5) (largest solution-vertex norm).
#[test]
fn worked_example_linear_condition_moduli() {
    let lp = worked_example();
    let tol = Tolerances::default();
    let xs: Vec<Vec<f64>> = vec![vec![4.0, 3.0], vec![5.0, 4.0], vec![6.0, 5.0]];
    let report = check_linear_uwsm(&lp.problem, &xs, &tol).unwrap();
    assert_eq!(report.verdict, Verdict::CertifiedSufficient);
    assert!((estimate(&report, "delta_hat") - 2.0).abs() <= 1e-9);
    assert!((estimate(&report, "k_hat") - 5f64.sqrt()).abs() <= 1e-9);
}

/// The sampled sharp-minimum modulus at grid step 0.01
/// brackets the closed-form infimum 1 from below.
#[test]
fn worked_example_sampled_modulus_at_fine_grid() {
    let lp = worked_example();
    let tol = Tolerances::default();
    // y-box inside the (constant) feasible region; x sampled coarsely
    // because the ratio field does not depend on x here.
    let region = SampledRegion {
        x: GridSpec::new(vec![4.0, 3.0], vec![6.0, 5.0], 1.0).unwrap(),
        y: GridSpec::new(vec![1.0, 2.0], vec![4.0, 3.0], 0.01).unwrap(),
    };
    let start = Instant::now();
    let report = estimate_uwsm_lambda(&lp.problem, &region, &tol).unwrap();
    assert!(start.elapsed().as_secs_f64() < 30.0);
    let lambda = estimate(&report, "lambda_hat");
    assert!(
        (0.95..=1.0 + 1e-12).contains(&lambda),
        "lambda_hat = {lambda}"
    );
    assert_ne!(report.verdict, Verdict::Violated);
}

/// Strong domination is certified at 10 parameters and the
/// grid check at step 0.1 agrees.
#[test]
fn worked_example_strong_domination_agrees_with_grid() {
    let lp = worked_example();
    let tol = Tolerances::default();
    for k in 0..10 {
        let t = k as f64 / 9.0;
        let x = vec![4.0 + 2.0 * t, 3.0 + 2.0 * t];
        let report = check_strong_domination(&lp.problem, &x, &tol).unwrap();
        assert_eq!(report.verdict, Verdict::CertifiedSufficient, "at {x:?}");

        let grid = GridSpec::new(vec![0.5, 1.5], vec![4.5, 3.5], 0.1).unwrap();
        let gd = grid_domination_check(&lp.problem.lower, &x, &grid, &tol).unwrap();
        assert!(gd.holds, "grid domination at {x:?}: {:?}", gd.witness);
    }
}

/// The two candidate points from the worked example. The
/// corner is stationary with residuals at solver precision; the interior
/// parameter refutes the system with a verified Farkas vector.
#[test]
fn worked_example_stationarity_positive_and_negative() {
    let lp = worked_example();
    let tol = Tolerances::default();

    let cert = certify(&lp.problem, &[4.0, 3.0], &[1.0, 2.0], &tol).unwrap();
    assert_eq!(cert.status, Status::Stationary);
    let res = residuals(&lp.problem, &[4.0, 3.0], &[1.0, 2.0], &cert).unwrap();
    assert!(res.max() <= 1e-8, "residuals {res:?}");

    let refuted = certify(&lp.problem, &[5.0, 4.0], &[1.0, 2.0], &tol).unwrap();
    assert_eq!(refuted.status, Status::NotStationary);
    let farkas = refuted.farkas.as_ref().expect("refutation carries Farkas");
    let active = detect_active_sets(&lp.problem, &[5.0, 4.0], &[1.0, 2.0], &tol).unwrap();
    let sys = assemble_kkt(&lp.problem, &[5.0, 4.0], &[1.0, 2.0], &active).unwrap();
    let poly = system_polyhedron(&sys).unwrap();
    assert!(verify_farkas(farkas, &poly, 1e-8));
}

/// The direct and the coderivative-inclusion assemblies agree
/// in status on randomized candidates where both regularity checks pass.
#[test]
fn direct_and_coderivative_assemblies_agree() {
    let lp = worked_example();
    let tol = Tolerances::default();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut tested = 0;
    while tested < 50 {
        let x = vec![rng.gen_range(4.0..6.0), rng.gen_range(3.0..5.0)];
        // feasible for the constraints, not necessarily efficient
        let y = vec![rng.gen_range(1.0..4.0), rng.gen_range(2.0..3.0)];
        if !check_upper_mfcq(&lp.problem, &x, &tol).unwrap()
            || !check_lower_mfcq(&lp.problem, &x, &y, &tol).unwrap()
        {
            continue;
        }
        let a = certify(&lp.problem, &x, &y, &tol).unwrap();
        let b = check_coderivative_form(&lp.problem, &x, &y, &tol).unwrap();
        assert_eq!(a.status, b.status, "at x={x:?} y={y:?}");
        tested += 1;
    }
    // the two named candidates as anchors
    let a = certify(&lp.problem, &[4.0, 3.0], &[1.0, 2.0], &tol).unwrap();
    let b = check_coderivative_form(&lp.problem, &[4.0, 3.0], &[1.0, 2.0], &tol).unwrap();
    assert_eq!(a.status, b.status);
}

/// Random bounded bi-objective lower level with no parameter coupling.
/// Box rows keep the feasible set bounded; extra random rows cut it.
fn random_instance(rng: &mut ChaCha8Rng, m: usize) -> (LinearLowerLevel, Vec<f64>, Vec<f64>) {
    let q = 2;
    let mut c = Mat::zeros(q, m);
    for i in 0..q {
        for j in 0..m {
            c.set(i, j, rng.gen_range(-3.0..3.0));
        }
    }
    let mut lower = vec![0.0; m];
    let mut upper = vec![0.0; m];
    for j in 0..m {
        let l: f64 = rng.gen_range(-1.5..0.0);
        lower[j] = l;
        upper[j] = l + rng.gen_range(0.5..2.0);
    }
    let extra = rng.gen_range(0..=(8 - 2 * m).min(2));
    let rows = 2 * m + extra;
    let mut b = Mat::zeros(rows, m);
    let mut d = vec![0.0; rows];
    for j in 0..m {
        b.set(2 * j, j, 1.0);
        d[2 * j] = upper[j];
        b.set(2 * j + 1, j, -1.0);
        d[2 * j + 1] = -lower[j];
    }
    // anchor point that stays feasible for the extra rows
    let anchor: Vec<f64> = (0..m)
        .map(|j| lower[j] + rng.gen_range(0.1..0.9) * (upper[j] - lower[j]))
        .collect();
    for r in 2 * m..rows {
        let mut row = vec![0.0; m];
        let mut lhs = 0.0;
        for j in 0..m {
            row[j] = rng.gen_range(-3.0..3.0);
            lhs += row[j] * anchor[j];
        }
        for j in 0..m {
            b.set(r, j, row[j]);
        }
        d[r] = lhs + rng.gen_range(0.2..1.5);
    }
    let a = Mat::zeros(rows, 1);
    (LinearLowerLevel::pure(c, a, b, d), lower, upper)
}

fn densify_front(front: &bifront::pareto::ParetoFront, step: f64) -> Vec<Vec<f64>> {
    let mut out = Vec::new();
    for face in &front.faces {
        match face.polytope.vertices.as_slice() {
            [v] => out.push(v.clone()),
            [a, b] => {
                let len: f64 = a
                    .iter()
                    .zip(b)
                    .map(|(ai, bi)| (ai - bi).powi(2))
                    .sum::<f64>()
                    .sqrt();
                let segments = (len / step).ceil().max(1.0) as usize;
                for s in 0..=segments {
                    let t = s as f64 / segments as f64;
                    out.push(
                        a.iter()
                            .zip(b)
                            .map(|(ai, bi)| ai + t * (bi - ai))
                            .collect(),
                    );
                }
            }
            other => panic!("face with {} vertices", other.len()),
        }
    }
    out
}

/// Directed domination gap: how far `from`-points are from being
/// dominated (componentwise, from below) by some `to`-point.
fn domination_gap(from: &[Vec<f64>], to: &[Vec<f64>]) -> f64 {
    let mut worst: f64 = 0.0;
    for z in from {
        let gap = to
            .iter()
            .map(|w| {
                w.iter()
                    .zip(z)
                    .map(|(wi, zi)| (wi - zi).max(0.0))
                    .fold(0.0_f64, f64::max)
            })
            .fold(f64::INFINITY, f64::min);
        worst = worst.max(gap);
    }
    worst
}

/// Exact fronts match the grid oracle in the domination-gap metric,
/// every reported face is scalarization-optimal, and every positive-weight
/// optimal face lands inside the reported efficient set.
#[test]
fn random_biobjective_instances_match_the_grid_oracle() {
    let tol = Tolerances::default();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut accepted = 0;
    while accepted < 100 {
        let m = if rng.gen_bool(0.5) { 2 } else { 3 };
        let (ll, lower, upper) = random_instance(&mut rng, m);
        let x = vec![0.0];
        let front = match frontier_map(&ll, &x, EfficiencyKind::Pareto, &tol) {
            Ok(f) => f,
            Err(bifront::Error::Infeasible) | Err(bifront::Error::Unbounded) => continue,
            Err(e) => panic!("unexpected {e}"),
        };
        accepted += 1;

        // Exact-vs-grid agreement in the domination-gap metric: each side
        // must dominate the other up to the image-space discretization,
        // which scales with the objective matrix (slack 0.04 (1+||C||)).
        // Euclidean Hausdorff is not used because the argmin along a
        // near-flat boundary is ill-conditioned: at any fixed step the
        // discrete corner can drift arbitrarily far along the flat
        // direction while staying within resolution in value.
        let grid = GridSpec::new(lower.clone(), upper.clone(), 0.02).unwrap();
        let gf = grid_front(&ll, &x, &grid, EfficiencyKind::Pareto, &tol).unwrap();
        assert!(!gf.points.is_empty(), "grid misses a nonempty feasible set");
        let dense = densify_front(&front, 0.01);
        let bound = 0.04 * (1.0 + ll.c.max_abs());
        let g1 = domination_gap(&gf.points, &dense);
        let g2 = domination_gap(&dense, &gf.points);
        assert!(g1 <= bound, "grid point undominated by {g1} > {bound} on instance {accepted}");
        assert!(g2 <= bound, "front point undominated by {g2} > {bound} on instance {accepted}");

        // scalarization soundness: each face weight attains the LP minimum
        let set = efficient_set(&ll, &x, &tol).unwrap();
        let feas = bifront::pareto::feasible_set(&ll, &x).unwrap();
        for face in &set.faces {
            let alpha = &face.weight.alpha;
            let obj: Vec<f64> = (0..m)
                .map(|j| (0..2).map(|i| alpha[i] * ll.c.at(i, j)).sum())
                .collect();
            let opt = match lp_solve(&obj, &feas, &tol).unwrap() {
                LpOutcome::Optimal { value, .. } => value,
                other => panic!("unexpected {other:?}"),
            };
            for v in &face.polytope.vertices {
                let val: f64 = obj.iter().zip(v).map(|(o, vi)| o * vi).sum();
                assert!(val <= opt + 1e-6 * (1.0 + opt.abs()), "face not optimal");
            }
        }

        // union completeness: strictly positive weights stay in the set
        for &t in &[0.25, 0.5, 0.75] {
            let alpha = [t, 1.0 - t];
            let obj: Vec<f64> = (0..m)
                .map(|j| (0..2).map(|i| alpha[i] * ll.c.at(i, j)).sum())
                .collect();
            let face = optimal_face(&obj, &feas, &tol).unwrap();
            for v in &face.vertices {
                let d = set.distance(v, &tol).unwrap();
                assert!(d <= 1e-6, "optimal vertex {v:?} misses the set by {d}");
            }
        }
    }
}

/// With a single objective the front collapses to the LP
/// optimal value.
#[test]
fn scalar_instances_reduce_to_the_optimal_value_function() {
    let tol = Tolerances::default();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut accepted = 0;
    while accepted < 50 {
        let m = rng.gen_range(1..=3);
        let (ll2, lower, upper) = random_instance(&mut rng, m);
        let _ = (lower, upper);
        // reuse the bi-objective scaffolding, keep only the first row
        let mut c = Mat::zeros(1, m);
        for j in 0..m {
            c.set(0, j, ll2.c.at(0, j));
        }
        let ll = LinearLowerLevel::pure(c.clone(), ll2.a.clone(), ll2.b.clone(), ll2.d.clone());
        let x = vec![0.0];
        let front = match frontier_map(&ll, &x, EfficiencyKind::Pareto, &tol) {
            Ok(f) => f,
            Err(bifront::Error::Infeasible) | Err(bifront::Error::Unbounded) => continue,
            Err(e) => panic!("unexpected {e}"),
        };
        accepted += 1;
        let feas = bifront::pareto::feasible_set(&ll, &x).unwrap();
        let opt = match lp_solve(&c.row(0).to_vec(), &feas, &tol).unwrap() {
            LpOutcome::Optimal { value, .. } => value,
            other => panic!("unexpected {other:?}"),
        };
        let verts = front.vertices();
        assert_eq!(verts.len(), 1);
        assert!((verts[0][0] - opt).abs() <= 1e-9 * (1.0 + opt.abs()));
    }
}

/// Dominance laws on random point clouds.
#[test]
fn dominance_laws() {
    let tol = Tolerances::default();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..50 {
        let pts: Vec<Vec<f64>> = (0..30)
            .map(|_| (0..2).map(|_| rng.gen_range(-2.0..2.0)).collect())
            .collect();
        for p in &pts {
            assert!(!dominates(p, p, EfficiencyKind::Pareto, tol.dom).unwrap());
        }
        let eff = eff_filter(&pts, EfficiencyKind::Pareto, tol.dom).unwrap();
        let weff = eff_filter(&pts, EfficiencyKind::WeakPareto, tol.dom).unwrap();
        for z in &eff {
            assert!(weff.contains(z), "Pareto point {z:?} missing from weak front");
        }
        let twice = eff_filter(&eff, EfficiencyKind::Pareto, tol.dom).unwrap();
        assert_eq!(twice.len(), eff.len(), "filtering is idempotent");
    }
}

/// The efficient set is invariant under positive rescaling
/// of objective rows and under constant objective shifts.
#[test]
fn efficient_set_invariances() {
    let tol = Tolerances::default();
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut accepted = 0;
    while accepted < 20 {
        let (ll, _, _) = random_instance(&mut rng, 2);
        let x = vec![0.0];
        let base = match efficient_set(&ll, &x, &tol) {
            Ok(s) => s,
            Err(_) => continue,
        };
        accepted += 1;

        let mut scaled = ll.clone();
        let s0 = rng.gen_range(0.5..3.0);
        let s1 = rng.gen_range(0.5..3.0);
        for j in 0..scaled.c.cols {
            let v0 = scaled.c.at(0, j) * s0;
            scaled.c.set(0, j, v0);
            let v1 = scaled.c.at(1, j) * s1;
            scaled.c.set(1, j, v1);
        }
        scaled.e = vec![rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)];
        let transformed = efficient_set(&scaled, &x, &tol).unwrap();

        for v in base.vertices() {
            let d = transformed.distance(&v, &tol).unwrap();
            assert!(d <= 1e-6, "vertex {v:?} lost under rescaling (d = {d})");
        }
        for v in transformed.vertices() {
            let d = base.distance(&v, &tol).unwrap();
            assert!(d <= 1e-6, "vertex {v:?} gained under rescaling (d = {d})");
        }
    }
}

/// Zero distance to the efficient set characterizes
/// efficient points.
#[test]
fn solution_set_distance_characterizes_efficiency() {
    let tol = Tolerances::default();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut accepted = 0;
    while accepted < 20 {
        let (ll, lower, upper) = random_instance(&mut rng, 2);
        let x = vec![0.0];
        if frontier_map(&ll, &x, EfficiencyKind::Pareto, &tol).is_err() {
            continue;
        }
        accepted += 1;
        let feas = bifront::pareto::feasible_set(&ll, &x).unwrap();
        for _ in 0..20 {
            let y: Vec<f64> = lower
                .iter()
                .zip(&upper)
                .map(|(l, u)| rng.gen_range(*l..*u))
                .collect();
            if !feas.contains(&y, tol.feas) {
                continue;
            }
            let d = distance_to_solution_set(&ll, &x, &y, &tol).unwrap();
            let eff =
                is_efficient_point(&ll, &x, &y, EfficiencyKind::Pareto, 1e-9, &tol).unwrap();
            if eff {
                assert!(d <= 1e-6, "efficient {y:?} at distance {d}");
            } else {
                assert!(d > 1e-8, "non-efficient {y:?} at distance {d}");
            }
        }
    }
}

/// Certificate soundness on both statuses, re-verified
/// through independent residual and Farkas checks.
#[test]
fn certificates_are_sound_on_random_candidates() {
    let lp = worked_example();
    let tol = Tolerances::default();
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..30 {
        let x = vec![rng.gen_range(4.0..6.0), rng.gen_range(3.0..5.0)];
        let y = vec![rng.gen_range(1.0..4.0), rng.gen_range(2.0..3.0)];
        let cert = certify(&lp.problem, &x, &y, &tol).unwrap();
        match cert.status {
            Status::Stationary => {
                let res = residuals(&lp.problem, &x, &y, &cert).unwrap();
                assert!(res.max() <= 1e-8, "residuals {res:?} at x={x:?} y={y:?}");
            }
            Status::NotStationary => {
                let farkas = cert.farkas.as_ref().expect("Farkas refutation present");
                let active = detect_active_sets(&lp.problem, &x, &y, &tol).unwrap();
                let sys = assemble_kkt(&lp.problem, &x, &y, &active).unwrap();
                let poly = system_polyhedron(&sys).unwrap();
                assert!(verify_farkas(farkas, &poly, 1e-8));
            }
        }
    }
}

/// Refining the sample grid can only tighten the sampled
/// moduli — the infimum estimate decreases, the supremum increases.
#[test]
fn sampled_moduli_are_monotone_under_grid_refinement() {
    let lp = worked_example();
    let tol = Tolerances::default();
    let region_at = |h: f64| SampledRegion {
        x: GridSpec::new(vec![4.0, 3.0], vec![6.0, 5.0], 1.0).unwrap(),
        y: GridSpec::new(vec![1.0, 2.0], vec![4.0, 3.0], h).unwrap(),
    };
    let coarse = estimate_uwsm_lambda(&lp.problem, &region_at(0.5), &tol).unwrap();
    let fine = estimate_uwsm_lambda(&lp.problem, &region_at(0.25), &tol).unwrap();
    assert!(
        estimate(&fine, "lambda_hat") <= estimate(&coarse, "lambda_hat") + 1e-12,
        "lambda_hat grows under refinement"
    );
    let coarse_s = estimate_rreg_sigma(&lp.problem, &region_at(0.5), &tol).unwrap();
    let fine_s = estimate_rreg_sigma(&lp.problem, &region_at(0.25), &tol).unwrap();
    assert!(
        estimate(&fine_s, "sigma_hat") >= estimate(&coarse_s, "sigma_hat") - 1e-12,
        "sigma_hat shrinks under refinement"
    );
}

/// The feasible sets of the randomized family really are bounded; this
/// pins the sampling assumptions the oracle comparisons rely on.
#[test]
fn random_instance_family_is_bounded() {
    let tol = Tolerances::default();
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for _ in 0..20 {
        let (ll, _, _) = random_instance(&mut rng, 2);
        let feas = bifront::pareto::feasible_set(&ll, &[0.0]).unwrap();
        let p = Polyhedron::new(feas.mat.clone(), feas.rhs.clone()).unwrap();
        assert!(is_bounded(&p, &tol).unwrap());
    }
}
