//! The level-set test: is the family the set of level hypersurfaces of a
//! critical-point-free harmonic function?
//!
//! For each parameter point the checker evaluates
//!
//! ```text
//! lambda = d(density)/ds + (n - 1) * H * density
//! ```
//!
//! where `s` is arc length along the family normal and `H` is the mean
//! curvature of the leaf with respect to that normal (the signed curvature in
//! the plane). The family is the level-set family of a harmonic function with
//! nonvanishing gradient exactly when `lambda` is constant on every leaf; the
//! constant may still vary from leaf to leaf. The checker samples `lambda` on
//! a grid, aggregates per-leaf statistics, and accepts when the worst
//! per-leaf spread is below tolerance relative to the typical `lambda` size.

use crate::error::{Error, Result};
use crate::family::{FamilySpec, ParamPoint};
use crate::flow::dphi_ds;
use crate::geometry::{frame_at, mean_curvature_at, signed_curvature_2d};
use crate::scalar::Scalar;
use serde::Serialize;
use std::fmt::Write as _;

/// Everything the leaf condition needs at one parameter point.
#[derive(Debug, Clone)]
pub struct ConditionSample<F> {
    pub param: ParamPoint<F>,
    pub density: F,
    /// Signed curvature for plane families, mean curvature otherwise.
    pub curvature: F,
    pub dphi_ds: F,
    /// `(n - 1) * curvature * density`.
    pub curvature_term: F,
    pub lambda: F,
}

/// Per-leaf aggregate of the sampled `lambda` values.
#[derive(Debug, Clone, Serialize)]
pub struct SliceStats<F> {
    pub t: F,
    pub mean: F,
    pub min: F,
    pub max: F,
    /// `max - min` over the slice.
    pub spread: F,
}

/// The most non-constant leaf, with the sigma points attaining the extremes.
#[derive(Debug, Clone, Serialize)]
pub struct Witness<F> {
    pub t: F,
    pub spread: F,
    pub min_lambda: F,
    pub min_sigma: Vec<F>,
    pub max_lambda: F,
    pub max_sigma: Vec<F>,
}

/// Outcome of a grid check of the leaf condition.
#[derive(Debug, Clone, Serialize)]
pub struct CheckReport<F> {
    pub family: String,
    pub ambient_dim: usize,
    /// Interior sample counts per axis, sigma axes first, then t.
    pub grid: Vec<usize>,
    /// Acceptance threshold on the scaled residual.
    pub tol: F,
    pub slices: Vec<SliceStats<F>>,
    /// Worst per-leaf spread divided by `max(1, median |lambda|)`.
    pub global_residual: F,
    pub median_abs_lambda: F,
    pub accepted: bool,
    /// Present when rejected: the leaf that broke constancy.
    pub witness: Option<Witness<F>>,
}

impl<F: Scalar + Serialize> CheckReport<F> {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

impl<F: Scalar> CheckReport<F> {
    /// The tabulated leaf constants: `(t, mean lambda)` per slice.
    pub fn lambda_of_t(&self) -> (Vec<F>, Vec<F>) {
        let t = self.slices.iter().map(|s| s.t).collect();
        let lam = self.slices.iter().map(|s| s.mean).collect();
        (t, lam)
    }
}

/// Evaluate the leaf condition at one parameter point.
pub fn lambda_at<F: Scalar>(spec: &FamilySpec<F>, q: &ParamPoint<F>) -> Result<ConditionSample<F>> {
    let n = spec.ambient_dim();
    let frame = frame_at(spec, q)?;
    let curvature = if n == 2 {
        signed_curvature_2d(spec, q)?
    } else {
        mean_curvature_at(spec, q)?
    };
    let slope = dphi_ds(spec, q)?;
    let curvature_term = F::from_usize(n - 1).unwrap() * curvature * frame.density;
    Ok(ConditionSample {
        param: q.clone(),
        density: frame.density,
        curvature,
        dphi_ds: slope,
        curvature_term,
        lambda: slope + curvature_term,
    })
}

/// Interior grid of parameter points, t slowest, sigma axes lexicographic.
fn grid_points<F: Scalar>(spec: &FamilySpec<F>, grid: &[usize]) -> Vec<ParamPoint<F>> {
    let n = spec.ambient_dim();
    let m = n - 1;
    let sigma_nodes: Vec<Vec<F>> = (0..m).map(|k| spec.sigma_axis_nodes(k, grid[k])).collect();
    let t_nodes = spec.t_axis_nodes(grid[m]);
    let slice_len: usize = sigma_nodes.iter().map(Vec::len).product();
    let mut points = Vec::with_capacity(t_nodes.len() * slice_len);
    for &t in &t_nodes {
        let mut index = vec![0usize; m];
        loop {
            let sigma: Vec<F> = (0..m).map(|k| sigma_nodes[k][index[k]]).collect();
            points.push(ParamPoint::new(sigma, t));
            // odometer increment, first axis fastest
            let mut axis = 0;
            loop {
                if axis == m {
                    break;
                }
                index[axis] += 1;
                if index[axis] < sigma_nodes[axis].len() {
                    break;
                }
                index[axis] = 0;
                axis += 1;
            }
            if axis == m {
                break;
            }
        }
    }
    points
}

/// Sample the leaf condition on an interior grid.
///
/// `grid` gives interior sample counts per axis, sigma axes first, then t.
/// Sample order is deterministic: t ascending, sigma lexicographic.
pub fn sample_grid<F: Scalar>(
    spec: &FamilySpec<F>,
    grid: &[usize],
) -> Result<Vec<ConditionSample<F>>> {
    assert_eq!(
        grid.len(),
        spec.ambient_dim(),
        "one grid count per parameter axis"
    );
    assert!(grid.iter().all(|&c| c >= 1), "grid counts must be positive");
    grid_points(spec, grid)
        .iter()
        .map(|q| lambda_at(spec, q).map_err(|e| e.at_sample(q.describe())))
        .collect()
}

/// CSV rows `s1..s(n-1), t, density, curvature, dphi_ds, lambda`.
pub fn samples_to_csv<F: Scalar>(samples: &[ConditionSample<F>]) -> String {
    let m = samples.first().map(|s| s.param.sigma.len()).unwrap_or(0);
    let mut out = String::new();
    for i in 1..=m {
        let _ = write!(out, "s{i},");
    }
    out.push_str("t,density,curvature,dphi_ds,lambda\n");
    for s in samples {
        for c in &s.param.sigma {
            let _ = write!(out, "{c},");
        }
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            s.param.t, s.density, s.curvature, s.dphi_ds, s.lambda
        );
    }
    out
}

/// Run the full grid check and aggregate the verdict.
pub fn check_family<F: Scalar>(spec: &FamilySpec<F>, grid: &[usize]) -> Result<CheckReport<F>> {
    let samples = sample_grid(spec, grid)?;
    let m = spec.ambient_dim() - 1;
    let slice_len: usize = grid[..m]
        .iter()
        .map(|&c| c)
        .product();

    let mut slices = Vec::with_capacity(grid[m]);
    let mut witness: Option<Witness<F>> = None;
    for chunk in samples.chunks(slice_len) {
        let t = chunk[0].param.t;
        let mut sum = F::zero();
        let mut min = chunk[0].lambda;
        let mut max = chunk[0].lambda;
        let mut min_at = &chunk[0].param;
        let mut max_at = &chunk[0].param;
        for s in chunk {
            sum = sum + s.lambda;
            if s.lambda < min {
                min = s.lambda;
                min_at = &s.param;
            }
            if s.lambda > max {
                max = s.lambda;
                max_at = &s.param;
            }
        }
        let spread = max - min;
        if witness.as_ref().map_or(true, |w| spread > w.spread) {
            witness = Some(Witness {
                t,
                spread,
                min_lambda: min,
                min_sigma: min_at.sigma.clone(),
                max_lambda: max,
                max_sigma: max_at.sigma.clone(),
            });
        }
        slices.push(SliceStats {
            t,
            mean: sum / F::from_usize(chunk.len()).unwrap(),
            min,
            max,
            spread,
        });
    }

    let mut abs: Vec<F> = samples.iter().map(|s| s.lambda.abs()).collect();
    abs.sort_by(|a, b| a.partial_cmp(b).expect("lambda values are finite"));
    let median_abs_lambda = if abs.len() % 2 == 1 {
        abs[abs.len() / 2]
    } else {
        (abs[abs.len() / 2 - 1] + abs[abs.len() / 2]) / F::of(2.0)
    };

    let worst_spread = slices
        .iter()
        .map(|s| s.spread)
        .fold(F::zero(), F::max);
    let global_residual = worst_spread / F::one().max(median_abs_lambda);
    let tol = spec.tolerances().check_tol;
    let accepted = global_residual < tol;

    Ok(CheckReport {
        family: spec.name().to_string(),
        ambient_dim: spec.ambient_dim(),
        grid: grid.to_vec(),
        tol,
        slices,
        global_residual,
        median_abs_lambda,
        accepted,
        witness: if accepted { None } else { witness },
    })
}

/// Reject with a readable message unless the report accepted the family.
pub fn require_accepted<F: Scalar>(report: &CheckReport<F>) -> Result<()> {
    if report.accepted {
        return Ok(());
    }
    let detail = match &report.witness {
        Some(w) => format!(
            "leaf t = {} has lambda spread {} (residual {} vs tol {})",
            w.t.lossy_f64(),
            w.spread.lossy_f64(),
            report.global_residual.lossy_f64(),
            report.tol.lossy_f64()
        ),
        None => format!(
            "residual {} vs tol {}",
            report.global_residual.lossy_f64(),
            report.tol.lossy_f64()
        ),
    };
    Err(Error::Rejected(format!(
        "family '{}' is not a harmonic level-set family: {detail}",
        report.family
    )))
}
