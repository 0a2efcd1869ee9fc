//! Independent brute-force ground truth at desk scale: grid-based fronts,
//! domination checks, and bilevel efficient-point enumeration.
//!
//! Deliberately does not call the exact front computation; the only shared
//! code is the finite efficiency filter, which has its own independent
//! pairwise test. Used by the verification suites and as the approximate
//! path for `q >= 3`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::linalg::{dist2, norm_inf};
use crate::model::{eff_filter, eff_filter_indices, BilevelProblem, EfficiencyKind, LinearLowerLevel};
use crate::pareto::feasible_set;
use crate::polyhedra::{lp_solve, LpOutcome};
use crate::Tolerances;
use crate::{Error, Result};

/// Default limit on the number of grid points.
pub const DEFAULT_GRID_CAP: usize = 10_000_000;

/// A uniform rectangular grid: per-variable bounds and a common step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub h: f64,
    #[serde(default = "default_cap")]
    pub cap: usize,
}

fn default_cap() -> usize {
    DEFAULT_GRID_CAP
}

impl GridSpec {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>, h: f64) -> Result<Self> {
        let g = GridSpec {
            lower,
            upper,
            h,
            cap: DEFAULT_GRID_CAP,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if self.lower.len() != self.upper.len() {
            return Err(Error::DimensionMismatch(
                "grid bounds of unequal length".to_string(),
            ));
        }
        if self.lower.is_empty() {
            return Err(Error::EmptyInput("grid with no variables".to_string()));
        }
        if !(self.h > 0.0) || !self.h.is_finite() {
            return Err(Error::DimensionMismatch(format!(
                "grid step must be a positive finite number, got {}",
                self.h
            )));
        }
        for (l, u) in self.lower.iter().zip(&self.upper) {
            if !l.is_finite() || !u.is_finite() || l > u {
                return Err(Error::DimensionMismatch(format!(
                    "grid bounds must be finite with lower <= upper, got [{l}, {u}]"
                )));
            }
        }
        self.point_count()?;
        Ok(())
    }

    /// Values along axis `i`: `l, l+h, ...` up to and including `u` (within
    /// a half-step slack so exact upper bounds are kept).
    pub fn axis(&self, i: usize) -> Vec<f64> {
        let (l, u) = (self.lower[i], self.upper[i]);
        // generous count first, then trim: keeps an upper bound that lands
        // on the grid despite floating-point drift in (u - l) / h
        let count = (((u - l) / self.h) * (1.0 + 1e-12) + 1e-9).floor() as usize + 1;
        (0..count)
            .map(|k| l + k as f64 * self.h)
            .filter(|&v| v <= u + 1e-9 * (1.0 + u.abs()))
            .collect()
    }

    pub fn point_count(&self) -> Result<usize> {
        let mut total: usize = 1;
        for i in 0..self.lower.len() {
            let n = self.axis(i).len();
            total = total
                .checked_mul(n)
                .filter(|&t| t <= self.cap)
                .ok_or_else(|| {
                    Error::GuardExceeded(format!(
                        "grid exceeds the {}-point cap",
                        self.cap
                    ))
                })?;
        }
        Ok(total)
    }

    /// The grid point at flat index `idx` (row-major over axes).
    pub fn point(&self, axes: &[Vec<f64>], mut idx: usize) -> Vec<f64> {
        let mut p = vec![0.0; axes.len()];
        for i in (0..axes.len()).rev() {
            let n = axes[i].len();
            p[i] = axes[i][idx % n];
            idx /= n;
        }
        p
    }

    pub fn axes(&self) -> Vec<Vec<f64>> {
        (0..self.lower.len()).map(|i| self.axis(i)).collect()
    }
}

/// Grid-front result: the nondominated image points plus any sampling
/// caveat (clipped bounding box, empty feasible grid).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridFront {
    pub points: Vec<Vec<f64>>,
    pub warning: Option<String>,
}

/// All grid points of `grid` feasible for `Y(x)`, with their images.
fn feasible_images(
    ll: &LinearLowerLevel,
    x: &[f64],
    grid: &GridSpec,
    tol: &Tolerances,
) -> Result<(Vec<Vec<f64>>, Vec<Vec<f64>>)> {
    let p = feasible_set(ll, x)?;
    let (_, m, _, _) = ll.dims();
    if grid.lower.len() != m {
        return Err(Error::DimensionMismatch(format!(
            "grid over {} variables for a lower level with m = {m}",
            grid.lower.len()
        )));
    }
    let total = grid.point_count()?;
    let axes = grid.axes();
    let feas_tol = tol.feas * (1.0 + norm_inf(&p.rhs));
    let pairs: Vec<(Vec<f64>, Vec<f64>)> = (0..total)
        .into_par_iter()
        .filter_map(|idx| {
            let y = grid.point(&axes, idx);
            if p.contains(&y, feas_tol) {
                let z = ll.objective(x, &y);
                Some((y, z))
            } else {
                None
            }
        })
        .collect();
    let mut ys = Vec::with_capacity(pairs.len());
    let mut zs = Vec::with_capacity(pairs.len());
    for (y, z) in pairs {
        ys.push(y);
        zs.push(z);
    }
    Ok((ys, zs))
}

/// Does the grid's bounding box clip the feasible set? Checked with one
/// pair of LPs per variable; unbounded sets always count as clipped.
fn box_clips(
    ll: &LinearLowerLevel,
    x: &[f64],
    grid: &GridSpec,
    tol: &Tolerances,
) -> Result<bool> {
    let p = feasible_set(ll, x)?;
    let m = p.dim();
    let slack = 0.5 * grid.h;
    for i in 0..m {
        for sgn in [1.0, -1.0] {
            let mut c = vec![0.0; m];
            c[i] = sgn;
            match lp_solve(&c, &p, tol)? {
                LpOutcome::Optimal { value, .. } => {
                    let extreme = sgn * value; // min (sgn=1) or -max (sgn=-1)
                    if sgn > 0.0 && extreme < grid.lower[i] - slack {
                        return Ok(true);
                    }
                    if sgn < 0.0 && -value > grid.upper[i] + slack {
                        return Ok(true);
                    }
                }
                LpOutcome::Unbounded { .. } => return Ok(true),
                LpOutcome::Infeasible { .. } => return Ok(false),
            }
        }
    }
    Ok(false)
}

/// Brute-force front of `f(x, Y(x))` over a grid on `y`.
pub fn grid_front(
    ll: &LinearLowerLevel,
    x: &[f64],
    grid: &GridSpec,
    kind: EfficiencyKind,
    tol: &Tolerances,
) -> Result<GridFront> {
    let (_, images) = feasible_images(ll, x, grid, tol)?;
    if images.is_empty() {
        return Ok(GridFront {
            points: Vec::new(),
            warning: Some("no feasible grid point; grid may miss the feasible set".to_string()),
        });
    }
    let warning = if box_clips(ll, x, grid, tol)? {
        Some("grid bounding box clips the feasible set; front is partial".to_string())
    } else {
        None
    };
    let points = eff_filter(&images, kind, tol.dom)?;
    Ok(GridFront { points, warning })
}

/// Outcome of a domination check: either every image point is covered, or
/// a witness image point lies outside `front + R^q_+` (within `slack`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DominationReport {
    pub holds: bool,
    pub witness: Option<Vec<f64>>,
    pub slack: f64,
}

/// Core comparison: is every point of `images` componentwise `>=` some
/// point of `front`, up to `slack`?
pub fn domination_witness(
    images: &[Vec<f64>],
    front: &[Vec<f64>],
    slack: f64,
) -> Option<Vec<f64>> {
    images
        .iter()
        .find(|z| {
            !front
                .iter()
                .any(|w| w.iter().zip(z.iter()).all(|(wi, zi)| *wi <= zi + slack))
        })
        .cloned()
}

/// Checks the image-domination property on the grid: every feasible image
/// lies above the grid front, with slack `2h (1 + ||C||_inf)` absorbing
/// discretization on both sides. `q = 1` holds trivially.
pub fn grid_domination_check(
    ll: &LinearLowerLevel,
    x: &[f64],
    grid: &GridSpec,
    tol: &Tolerances,
) -> Result<DominationReport> {
    let (_, _, q, _) = ll.dims();
    let slack = 2.0 * grid.h * (1.0 + ll.c.max_abs());
    if q == 1 {
        return Ok(DominationReport {
            holds: true,
            witness: None,
            slack,
        });
    }
    let (_, images) = feasible_images(ll, x, grid, tol)?;
    if images.is_empty() {
        return Err(Error::VacuousSample(
            "domination check over an empty feasible grid".to_string(),
        ));
    }
    let front = eff_filter(&images, EfficiencyKind::Pareto, tol.dom)?;
    let witness = domination_witness(&images, &front, slack);
    Ok(DominationReport {
        holds: witness.is_none(),
        witness,
        slack,
    })
}

/// Enumerates grid-approximate bilevel efficient pairs: `x` in the upper
/// set, `y` feasible and grid-efficient at `x` (image within `tol_eff` of
/// the grid front), then a final efficiency filter on upper objective
/// values. Pairs come back in image-filter order.
pub fn grid_bilevel_efficient(
    prob: &BilevelProblem,
    x_grid: &GridSpec,
    y_grid: &GridSpec,
    kind: EfficiencyKind,
    tol_eff: f64,
    tol: &Tolerances,
) -> Result<Vec<(Vec<f64>, Vec<f64>)>> {
    if x_grid.lower.len() != prob.n || y_grid.lower.len() != prob.m {
        return Err(Error::DimensionMismatch(
            "bilevel grids must match (n, m)".to_string(),
        ));
    }
    x_grid.point_count()?;
    y_grid.point_count()?;
    let x_axes = x_grid.axes();
    let x_total: usize = x_axes.iter().map(|a| a.len()).product();
    let g_tol = tol.feas * (1.0 + norm_inf(&prob.upper_set.rhs));

    let per_x: Vec<Vec<(Vec<f64>, Vec<f64>)>> = (0..x_total)
        .into_par_iter()
        .map(|ix| -> Result<Vec<(Vec<f64>, Vec<f64>)>> {
            let x = x_grid.point(&x_axes, ix);
            if !prob.upper_set.contains(&x, g_tol) {
                return Ok(Vec::new());
            }
            let (ys, images) = feasible_images(&prob.lower, &x, y_grid, tol)?;
            if ys.is_empty() {
                return Ok(Vec::new());
            }
            let front = eff_filter(&images, EfficiencyKind::Pareto, tol.dom)?;
            let mut pairs = Vec::new();
            for (y, z) in ys.into_iter().zip(images) {
                let near = front
                    .iter()
                    .map(|w| dist2(w, &z))
                    .fold(f64::INFINITY, f64::min);
                if near <= tol_eff {
                    pairs.push((x.clone(), y));
                }
            }
            Ok(pairs)
        })
        .collect::<Result<Vec<_>>>()?;

    let pairs: Vec<(Vec<f64>, Vec<f64>)> = per_x.into_iter().flatten().collect();
    if pairs.is_empty() {
        return Ok(pairs);
    }
    let upper_values: Vec<Vec<f64>> = pairs
        .iter()
        .map(|(x, y)| prob.upper_value(x, y))
        .collect();
    let keep = eff_filter_indices(&upper_values, kind, tol.dom)?;
    Ok(keep.into_iter().map(|i| pairs[i].clone()).collect())
}

/// Hausdorff distance between two finite point sets.
pub fn hausdorff(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    let one_sided = |from: &[Vec<f64>], to: &[Vec<f64>]| -> f64 {
        from.iter()
            .map(|p| {
                to.iter()
                    .map(|q| dist2(p, q))
                    .fold(f64::INFINITY, f64::min)
            })
            .fold(0.0f64, f64::max)
    };
    one_sided(a, b).max(one_sided(b, a))
}
