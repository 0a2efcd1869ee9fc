//! Exact frontier map and efficient-solution mapping for the parametric
//! linear lower level.
//!
//! For `q = 1` the front is the optimal value of a single LP. For `q = 2`
//! supported extreme points are found by dichotomic (chord-normal) weight
//! search: solve the two lexicographic extremes, then recursively probe the
//! weight normal to each chord until no chord can be improved. Linear
//! problems only have supported efficient points, so this is exact. The
//! objective's `D x + e` shift is applied after front computation.

use serde::{Deserialize, Serialize};

use crate::linalg::{add, dot, norm_inf, sub};
use crate::model::{EfficiencyKind, LinearLowerLevel, Weight};
use crate::polyhedra::{
    is_bounded, lp_solve, optimal_face, project_vpolytope, LpOutcome, Polyhedron, VPolytope,
};
use crate::Tolerances;
use crate::{Error, Result};

/// One face of a front or efficient set, with the weight that generates it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Face {
    pub polytope: VPolytope,
    pub weight: Weight,
}

/// The frontier map value at a fixed parameter: an ordered union of faces
/// (vertices and segments for `q = 2`) in objective space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParetoFront {
    pub kind: EfficiencyKind,
    pub faces: Vec<Face>,
}

impl ParetoFront {
    /// Ordered distinct vertices of the face chain.
    pub fn vertices(&self) -> Vec<Vec<f64>> {
        let mut out: Vec<Vec<f64>> = Vec::new();
        for face in &self.faces {
            for v in &face.polytope.vertices {
                if !out
                    .iter()
                    .any(|u| u.iter().zip(v).all(|(a, b)| (a - b).abs() <= 1e-9))
                {
                    out.push(v.clone());
                }
            }
        }
        out
    }

    /// Distance from `z` to the union of faces.
    pub fn distance(&self, z: &[f64], tol: &Tolerances) -> Result<f64> {
        let mut best = f64::INFINITY;
        for face in &self.faces {
            let (_, d) = project_vpolytope(z, &face.polytope, tol)?;
            best = best.min(d);
        }
        Ok(best)
    }
}

/// The efficient-solution set at a fixed parameter, as a union of optimal
/// faces of scalarized LPs in decision space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EfficientSet {
    pub faces: Vec<Face>,
}

impl EfficientSet {
    pub fn distance(&self, y: &[f64], tol: &Tolerances) -> Result<f64> {
        let mut best = f64::INFINITY;
        for face in &self.faces {
            let (_, d) = project_vpolytope(y, &face.polytope, tol)?;
            best = best.min(d);
        }
        Ok(best)
    }

    /// All face vertices (with duplicates across faces removed).
    pub fn vertices(&self) -> Vec<Vec<f64>> {
        let mut out: Vec<Vec<f64>> = Vec::new();
        for face in &self.faces {
            for v in &face.polytope.vertices {
                if !out
                    .iter()
                    .any(|u| u.iter().zip(v).all(|(a, b)| (a - b).abs() <= 1e-9))
                {
                    out.push(v.clone());
                }
            }
        }
        out
    }
}

/// The lower-level feasible set `Y(x) = {y : B y <= d - A x}`. Emptiness is
/// a state of the result, not an error.
pub fn feasible_set(ll: &LinearLowerLevel, x: &[f64]) -> Result<Polyhedron> {
    let (n, _, _, _) = ll.dims();
    if x.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "parameter of length {} for lower level with n = {n}",
            x.len()
        )));
    }
    let rhs = sub(&ll.d, &ll.a.mul_vec(x));
    Polyhedron::new(ll.b.clone(), rhs)
}

/// Image of a decision vector under the `y`-part of the objective, `C y`.
fn image(ll: &LinearLowerLevel, y: &[f64]) -> Vec<f64> {
    ll.c.mul_vec(y)
}

/// Lexicographic minimum in image space: minimize objective row `first`,
/// then row `second` over the optimal face. Returns the image point and the
/// decision-space face attaining it.
fn lex_corner(
    ll: &LinearLowerLevel,
    p: &Polyhedron,
    first: usize,
    second: usize,
    tol: &Tolerances,
) -> Result<(Vec<f64>, VPolytope)> {
    let c1 = ll.c.row(first).to_vec();
    let stage1 = optimal_face(&c1, p, tol)?;
    let c2 = ll.c.row(second).to_vec();
    let best = stage1
        .vertices
        .iter()
        .map(|v| dot(&c2, v))
        .fold(f64::INFINITY, f64::min);
    let cut = best + tol.face * (1.0 + best.abs());
    let verts: Vec<Vec<f64>> = stage1
        .vertices
        .iter()
        .filter(|v| dot(&c2, v) <= cut)
        .cloned()
        .collect();
    let face = VPolytope::new(verts)?;
    let y = &face.vertices[0];
    Ok((image(ll, y), face))
}

fn require_exact_regime(ll: &LinearLowerLevel, p: &Polyhedron, tol: &Tolerances) -> Result<()> {
    let (_, _, q, _) = ll.dims();
    if q > 2 {
        return Err(Error::Unsupported(format!(
            "exact front computation supports q <= 2 (got q = {q}); use the grid oracle"
        )));
    }
    match lp_solve(&vec![0.0; p.dim()], p, tol)? {
        LpOutcome::Infeasible { .. } => return Err(Error::Infeasible),
        _ => {}
    }
    if !is_bounded(p, tol)? {
        return Err(Error::Unbounded);
    }
    Ok(())
}

/// The frontier map at `x`: the set of (weakly) efficient objective values
/// of the lower level.
pub fn frontier_map(
    ll: &LinearLowerLevel,
    x: &[f64],
    kind: EfficiencyKind,
    tol: &Tolerances,
) -> Result<ParetoFront> {
    let p = feasible_set(ll, x)?;
    require_exact_regime(ll, &p, tol)?;
    let (_, _, q, _) = ll.dims();
    let shift = ll.shift(x);

    if q == 1 {
        let c = ll.c.row(0).to_vec();
        let value = match lp_solve(&c, &p, tol)? {
            LpOutcome::Optimal { value, .. } => value,
            _ => unreachable!("bounded nonempty LP is optimal"),
        };
        let face = Face {
            polytope: VPolytope::new(vec![vec![value + shift[0]]])?,
            weight: Weight::new(vec![1.0])?,
        };
        return Ok(ParetoFront { kind, faces: vec![face] });
    }

    // q = 2: dichotomic search over the y-image, shift applied at the end
    let (z_left, _) = lex_corner(ll, &p, 0, 1, tol)?;
    let (z_right, _) = lex_corner(ll, &p, 1, 0, tol)?;

    let merge_tol = tol.vert * (1.0 + norm_inf(&z_left).max(norm_inf(&z_right)));
    let mut faces: Vec<Face> = Vec::new();
    if sub(&z_left, &z_right).iter().all(|v| v.abs() <= merge_tol) {
        faces.push(Face {
            polytope: VPolytope::new(vec![z_left.clone()])?,
            weight: Weight::uniform(2),
        });
    } else {
        let mut segments: Vec<(Vec<f64>, Vec<f64>, Weight)> = Vec::new();
        let mut stack = vec![(z_left.clone(), z_right.clone())];
        while let Some((za, zb)) = stack.pop() {
            let raw = [za[1] - zb[1], zb[0] - za[0]];
            let s = raw[0] + raw[1];
            let alpha = [raw[0] / s, raw[1] / s];
            let c_alpha = add(
                &ll.c.row(0).iter().map(|v| v * alpha[0]).collect::<Vec<_>>(),
                &ll.c.row(1).iter().map(|v| v * alpha[1]).collect::<Vec<_>>(),
            );
            let value = match lp_solve(&c_alpha, &p, tol)? {
                LpOutcome::Optimal { value, .. } => value,
                _ => unreachable!("bounded nonempty LP is optimal"),
            };
            let chord = (alpha[0] * za[0] + alpha[1] * za[1])
                .min(alpha[0] * zb[0] + alpha[1] * zb[1]);
            let weight = Weight::new(alpha.to_vec())?;
            if value >= chord - tol.opt * (1.0 + chord.abs()) {
                segments.push((za, zb, weight));
                continue;
            }
            // new supported extreme points: image endpoints of the face
            let fy = optimal_face(&c_alpha, &p, tol)?;
            let images: Vec<Vec<f64>> = fy.vertices.iter().map(|v| image(ll, v)).collect();
            let lo = images
                .iter()
                .cloned()
                .min_by(|a, b| a[0].partial_cmp(&b[0]).unwrap())
                .unwrap();
            let hi = images
                .iter()
                .cloned()
                .max_by(|a, b| a[0].partial_cmp(&b[0]).unwrap())
                .unwrap();
            let gap_tol = merge_tol;
            if lo[0] - za[0] > gap_tol {
                stack.push((za.clone(), lo.clone()));
            }
            if hi[0] - lo[0] > gap_tol {
                segments.push((lo.clone(), hi.clone(), weight));
            }
            if zb[0] - hi[0] > gap_tol {
                stack.push((hi, zb));
            }
        }
        segments.sort_by(|a, b| a.0[0].partial_cmp(&b.0[0]).unwrap());
        for (a, b, w) in segments {
            faces.push(Face {
                polytope: VPolytope::new(vec![a, b])?,
                weight: w,
            });
        }
    }

    if kind == EfficiencyKind::WeakPareto {
        // flat extensions: single-objective optimal faces at the two ends
        let mut extended: Vec<Face> = Vec::new();
        let vert = flat_extension(ll, &p, 0, tol)?;
        if let Some(seg) = vert {
            extended.push(Face {
                polytope: seg,
                weight: Weight::new(vec![1.0, 0.0])?,
            });
        }
        extended.extend(faces);
        if let Some(seg) = flat_extension(ll, &p, 1, tol)? {
            extended.push(Face {
                polytope: seg,
                weight: Weight::new(vec![0.0, 1.0])?,
            });
        }
        faces = extended;
    }

    for face in faces.iter_mut() {
        for v in face.polytope.vertices.iter_mut() {
            for (vi, si) in v.iter_mut().zip(&shift) {
                *vi += si;
            }
        }
    }
    Ok(ParetoFront { kind, faces })
}

/// Weak-front extension along objective `row`: the image of the
/// single-objective optimal face when it is not a single point.
fn flat_extension(
    ll: &LinearLowerLevel,
    p: &Polyhedron,
    row: usize,
    tol: &Tolerances,
) -> Result<Option<VPolytope>> {
    let c = ll.c.row(row).to_vec();
    let fy = optimal_face(&c, p, tol)?;
    let images: Vec<Vec<f64>> = fy.vertices.iter().map(|v| image(ll, v)).collect();
    let other = 1 - row;
    let lo = images
        .iter()
        .cloned()
        .min_by(|a, b| a[other].partial_cmp(&b[other]).unwrap())
        .unwrap();
    let hi = images
        .iter()
        .cloned()
        .max_by(|a, b| a[other].partial_cmp(&b[other]).unwrap())
        .unwrap();
    let span = hi[other] - lo[other];
    if span > tol.vert * (1.0 + norm_inf(&hi)) {
        Ok(Some(VPolytope::new(vec![lo, hi])?))
    } else {
        Ok(None)
    }
}

/// The efficient-solution set `S(x)` as a union of optimal faces of the
/// scalarized LPs: the dichotomic weights plus the lexicographic corners
/// (reported as inward perturbations).
pub fn efficient_set(ll: &LinearLowerLevel, x: &[f64], tol: &Tolerances) -> Result<EfficientSet> {
    let p = feasible_set(ll, x)?;
    require_exact_regime(ll, &p, tol)?;
    let (_, _, q, _) = ll.dims();

    if q == 1 {
        let face = optimal_face(&ll.c.row(0).to_vec(), &p, tol)?;
        return Ok(EfficientSet {
            faces: vec![Face {
                polytope: face,
                weight: Weight::new(vec![1.0])?,
            }],
        });
    }

    let front = frontier_map(ll, x, EfficiencyKind::Pareto, tol)?;
    let mut faces: Vec<Face> = Vec::new();

    // lexicographic corner faces, exact via the two-stage LP
    let (_, corner_left) = lex_corner(ll, &p, 0, 1, tol)?;
    let (_, corner_right) = lex_corner(ll, &p, 1, 0, tol)?;
    let e = tol.eps_lex;
    faces.push(Face {
        polytope: corner_left,
        weight: Weight::new(vec![1.0 - e, e])?,
    });
    faces.push(Face {
        polytope: corner_right,
        weight: Weight::new(vec![e, 1.0 - e])?,
    });

    // interior dichotomic weights
    for face in &front.faces {
        if face.polytope.vertices.len() < 2 {
            continue;
        }
        let alpha = &face.weight.alpha;
        let c_alpha: Vec<f64> = (0..ll.c.cols)
            .map(|j| alpha[0] * ll.c.at(0, j) + alpha[1] * ll.c.at(1, j))
            .collect();
        faces.push(Face {
            polytope: optimal_face(&c_alpha, &p, tol)?,
            weight: face.weight.clone(),
        });
    }

    // drop faces wholly contained in another face's vertex set
    let contained = |small: &VPolytope, big: &VPolytope| -> bool {
        small.vertices.iter().all(|v| {
            big.vertices
                .iter()
                .any(|u| u.iter().zip(v).all(|(a, b)| (a - b).abs() <= tol.vert))
        })
    };
    let mut keep = vec![true; faces.len()];
    for i in 0..faces.len() {
        for j in 0..faces.len() {
            if i != j
                && keep[i]
                && keep[j]
                && contained(&faces[i].polytope, &faces[j].polytope)
                && (!contained(&faces[j].polytope, &faces[i].polytope) || j < i)
            {
                keep[i] = false;
            }
        }
    }
    let faces = faces
        .into_iter()
        .zip(keep)
        .filter_map(|(f, k)| k.then_some(f))
        .collect();
    Ok(EfficientSet { faces })
}

/// Is `y` feasible and efficient at `x`, up to `tol_eff` in image distance?
pub fn is_efficient_point(
    ll: &LinearLowerLevel,
    x: &[f64],
    y: &[f64],
    kind: EfficiencyKind,
    tol_eff: f64,
    tol: &Tolerances,
) -> Result<bool> {
    let p = feasible_set(ll, x)?;
    let feas_scale = 1.0 + norm_inf(&p.rhs);
    if !p.contains(y, tol.feas * feas_scale) {
        return Ok(false);
    }
    let d = distance_to_front(ll, x, &ll.objective(x, y), kind, tol)?;
    Ok(d <= tol_eff)
}

/// Distance from an objective-space point to the front at `x`.
pub fn distance_to_front(
    ll: &LinearLowerLevel,
    x: &[f64],
    z: &[f64],
    kind: EfficiencyKind,
    tol: &Tolerances,
) -> Result<f64> {
    let front = frontier_map(ll, x, kind, tol)?;
    front.distance(z, tol)
}

/// Distance from a decision-space point to the efficient set at `x`.
pub fn distance_to_solution_set(
    ll: &LinearLowerLevel,
    x: &[f64],
    y: &[f64],
    tol: &Tolerances,
) -> Result<f64> {
    let set = efficient_set(ll, x, tol)?;
    set.distance(y, tol)
}
