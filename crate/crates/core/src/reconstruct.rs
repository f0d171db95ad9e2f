//! Rebuilding the harmonic function from an accepted family.
//!
//! Once the checker has confirmed that `lambda` is constant on every leaf,
//! the function is determined up to an affine gauge by the profile ODE
//!
//! ```text
//! u''(t) = lambda(t) * u'(t),     u(0) = u0,  u'(0) = du0 > 0
//! ```
//!
//! whose solution is `u'(t) = du0 * exp(integral of lambda from 0 to t)`.
//! The harmonic function itself is `U = u(t(y))`, with gradient
//! `(u'(t) / density) * N` along the family normal. The module integrates the
//! profile on an anchored quadrature grid, tabulates `u` and `u'` with their
//! exact slopes, and offers two independent ways to evaluate `U`: through the
//! table, and by integrating the gradient law along a normal flow line.

use crate::checker::{require_accepted, CheckReport};
use crate::error::{Error, Result};
use crate::family::{AmbientPoint, FamilySpec, ParamPoint};
use crate::flow::{dphi_ds, integrate_normal_flow, require_complete};
use crate::geometry::{frame_at, mean_curvature_at, signed_curvature_2d};
use crate::linalg;
use crate::numerics::{cumulative_integral, AnchoredGrid, HermiteTable};
use crate::scalar::Scalar;
use serde::Serialize;
use std::fmt::Write as _;

/// Normalization of the reconstructed function: `u(0) = u0`, `u'(0) = du0`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Gauge<F> {
    pub u0: F,
    pub du0: F,
}

impl<F: Scalar> Gauge<F> {
    pub fn new(u0: F, du0: F) -> Result<Self> {
        if !(du0 > F::zero()) || !du0.is_finite() || !u0.is_finite() {
            return Err(Error::Config(format!(
                "gauge needs finite u0 and du0 > 0, got u0 = {u0}, du0 = {du0}"
            )));
        }
        Ok(Gauge { u0, du0 })
    }

    /// The neutral gauge `u(0) = 0`, `u'(0) = 1`.
    pub fn neutral() -> Self {
        Gauge {
            u0: F::zero(),
            du0: F::one(),
        }
    }
}

/// Tabulated profile of the reconstructed harmonic function.
#[derive(Debug, Clone)]
pub struct ReconstructionResult<F> {
    family: String,
    gauge: Gauge<F>,
    t_grid: Vec<F>,
    u_values: Vec<F>,
    du_values: Vec<F>,
    lambda_values: Vec<F>,
    u_table: HermiteTable<F>,
    du_table: HermiteTable<F>,
}

impl<F: Scalar> ReconstructionResult<F> {
    pub fn family(&self) -> &str {
        &self.family
    }

    pub fn gauge(&self) -> Gauge<F> {
        self.gauge
    }

    /// Leaf parameters of the tabulated profile (ascending, contains 0).
    pub fn t_grid(&self) -> &[F] {
        &self.t_grid
    }

    pub fn u_values(&self) -> &[F] {
        &self.u_values
    }

    pub fn du_values(&self) -> &[F] {
        &self.du_values
    }

    /// Tabulated range of the leaf parameter.
    pub fn t_range(&self) -> (F, F) {
        self.u_table.range()
    }

    /// Profile value `u(t)`.
    pub fn value_at(&self, t: F) -> Result<F> {
        self.u_table.eval(t)
    }

    /// Profile slope `u'(t)`.
    pub fn slope_at(&self, t: F) -> Result<F> {
        self.du_table.eval(t)
    }

    /// CSV rows `t, u, du, lambda`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,u,du,lambda\n");
        for k in 0..self.t_grid.len() {
            let _ = writeln!(
                out,
                "{},{},{},{}",
                self.t_grid[k], self.u_values[k], self.du_values[k], self.lambda_values[k]
            );
        }
        out
    }
}

/// Integrate the profile ODE for an accepted family.
///
/// The leaf constants come from the report's per-leaf means, interpolated
/// over the tabulated leaf range; the quadrature grid is anchored at `t = 0`
/// where the gauge applies. Rejected reports refuse reconstruction.
pub fn reconstruct_u<F: Scalar>(
    spec: &FamilySpec<F>,
    report: &CheckReport<F>,
    gauge: Gauge<F>,
) -> Result<ReconstructionResult<F>> {
    require_accepted(report)?;
    let (t_nodes, means) = report.lambda_of_t();
    if t_nodes.len() < 3 {
        return Err(Error::DegenerateSamples(format!(
            "need at least 3 leaf slices to tabulate the leaf constant, got {}",
            t_nodes.len()
        )));
    }
    let lambda_table = HermiteTable::with_estimated_slopes(t_nodes.clone(), means);

    let grid = AnchoredGrid::build(
        t_nodes[0],
        *t_nodes.last().unwrap(),
        spec.tolerances().quad_points,
    )?;
    let fine = grid.fine_nodes();
    let lam_fine = fine
        .iter()
        .map(|&t| lambda_table.eval(t))
        .collect::<Result<Vec<F>>>()?;

    // u'(t) = du0 * exp(C(t)), C anchored at the zero node
    let c = cumulative_integral(&fine, &lam_fine);
    let zf = 2 * grid.zero_index;
    let c0 = c[zf];
    let du_fine: Vec<F> = c.iter().map(|&ci| gauge.du0 * (ci - c0).exp()).collect();

    // u(t) = u0 + integral of u' from 0 to t
    let d = cumulative_integral(&fine, &du_fine);
    let d0 = d[zf];

    let t_grid = grid.nodes.clone();
    let u_values: Vec<F> = (0..t_grid.len())
        .map(|k| gauge.u0 + d[2 * k] - d0)
        .collect();
    let du_values: Vec<F> = (0..t_grid.len()).map(|k| du_fine[2 * k]).collect();
    let lambda_values: Vec<F> = (0..t_grid.len()).map(|k| lam_fine[2 * k]).collect();

    for w in u_values.windows(2) {
        if !(w[1] > w[0]) {
            return Err(Error::Quadrature(
                "profile integration lost strict monotonicity".into(),
            ));
        }
    }

    // exact slopes: u' = du, (u')' = lambda * u'
    let u_table = HermiteTable::with_slopes(t_grid.clone(), u_values.clone(), du_values.clone());
    let du_slopes: Vec<F> = (0..t_grid.len())
        .map(|k| lambda_values[k] * du_values[k])
        .collect();
    let du_table = HermiteTable::with_slopes(t_grid.clone(), du_values.clone(), du_slopes);

    Ok(ReconstructionResult {
        family: spec.name().to_string(),
        gauge,
        t_grid,
        u_values,
        du_values,
        lambda_values,
        u_table,
        du_table,
    })
}

/// Value of the reconstructed function at an ambient point.
pub fn evaluate_harmonic<F: Scalar>(
    spec: &FamilySpec<F>,
    recon: &ReconstructionResult<F>,
    y: &AmbientPoint<F>,
) -> Result<F> {
    let q = spec.phi_invert_global(y)?;
    recon.value_at(q.t)
}

/// Gradient of the reconstructed function at a parameter point:
/// `(u'(t) / density) * N`.
pub fn harmonic_gradient<F: Scalar>(
    spec: &FamilySpec<F>,
    recon: &ReconstructionResult<F>,
    q: &ParamPoint<F>,
) -> Result<Vec<F>> {
    let frame = frame_at(spec, q)?;
    let scale = recon.slope_at(q.t)? / frame.density;
    Ok(linalg::scaled(&frame.unit_normal, scale))
}

fn curvature_for<F: Scalar>(spec: &FamilySpec<F>, q: &ParamPoint<F>) -> Result<F> {
    if spec.ambient_dim() == 2 {
        signed_curvature_2d(spec, q)
    } else {
        mean_curvature_at(spec, q)
    }
}

/// Value of the harmonic function on the leaf `t = target`, computed without
/// the profile table.
///
/// Marches the normal flow from the chart center of the `t = 0` leaf and
/// integrates the gradient-law form of the derivative:
///
/// ```text
/// U(leaf T) = u0 + (du0 / density(start)) *
///             integral_0^S exp((n-1) * integral_0^s H) ds
/// ```
///
/// where `S` is the (signed) arc length at which the flow reaches the target
/// leaf, found by bisection inside the final step.
pub fn u_via_line_integral<F: Scalar>(
    spec: &FamilySpec<F>,
    target_t: F,
    gauge: Gauge<F>,
    step: F,
) -> Result<F> {
    assert!(step > F::zero(), "step must be positive");
    let [t_lo, t_hi] = spec.t_interval();
    if target_t < t_lo || target_t > t_hi {
        return Err(Error::OutOfDomain(format!(
            "target leaf t = {target_t} outside [{t_lo}, {t_hi}]"
        )));
    }
    if !(t_lo < F::zero() && F::zero() < t_hi) {
        return Err(Error::Config(
            "line-integral route needs t = 0 in the leaf range".into(),
        ));
    }
    let two = F::of(2.0);
    let start = ParamPoint::new(
        spec.sigma_box().iter().map(|&[lo, hi]| (lo + hi) / two).collect(),
        F::zero(),
    );
    let base_frame = frame_at(spec, &start)?;
    let base = gauge.du0 / base_frame.density;
    if target_t == F::zero() {
        return Ok(gauge.u0);
    }
    let dir = if target_t < F::zero() { -F::one() } else { F::one() };
    let order = F::from_usize(spec.ambient_dim() - 1).unwrap();

    // RK4 stage on the ambient point, seeded inversions, no window clamping
    let advance = |y: &[F], seed: &ParamPoint<F>, h: F| -> Result<(Vec<F>, ParamPoint<F>)> {
        let stage = |point: &[F], seed: &ParamPoint<F>| -> Result<(Vec<F>, ParamPoint<F>)> {
            let q = spec.newton_invert(&AmbientPoint::new(point.to_vec()), seed)?;
            Ok((frame_at(spec, &q)?.unit_normal, q))
        };
        let (k1, q1) = stage(y, seed)?;
        let half = h / two;
        let y2: Vec<F> = y.iter().zip(&k1).map(|(a, k)| *a + half * *k).collect();
        let (k2, q2) = stage(&y2, &q1)?;
        let y3: Vec<F> = y.iter().zip(&k2).map(|(a, k)| *a + half * *k).collect();
        let (k3, q3) = stage(&y3, &q2)?;
        drop(q2);
        let y4: Vec<F> = y.iter().zip(&k3).map(|(a, k)| *a + h * *k).collect();
        let (k4, q4) = stage(&y4, &q3)?;
        drop(q3);
        let sixth = h / F::of(6.0);
        let y_next: Vec<F> = (0..y.len())
            .map(|i| y[i] + sixth * (k1[i] + two * k2[i] + two * k3[i] + k4[i]))
            .collect();
        let q_next = spec.newton_invert(&AmbientPoint::new(y_next.clone()), &q4)?;
        Ok((y_next, q_next))
    };

    let mut y = spec.phi_eval(&start)?.coords;
    let mut q = start;
    let mut curv = curvature_for(spec, &q)?;
    let mut inner = F::zero(); // integral of H along the flow
    let mut weight = F::one(); // exp((n-1) * inner)
    let mut outer = F::zero(); // integral of the weight
    let max_steps = 4_000_000usize;

    for _ in 0..max_steps {
        let crossed = (q.t - target_t) * dir >= F::zero();
        if crossed {
            return Ok(gauge.u0 + base * outer);
        }
        let (y_full, q_full) = advance(&y, &q, step * dir)?;
        let (y_next, q_next, h_used) = if (q_full.t - target_t) * dir >= F::zero() {
            // bisect the step fraction so the step lands on the target leaf
            let mut lo = F::zero();
            let mut hi = step;
            let mut landing = (y_full, q_full);
            for _ in 0..80 {
                let mid = (lo + hi) / two;
                let (ym, qm) = advance(&y, &q, mid * dir)?;
                if (qm.t - target_t) * dir >= F::zero() {
                    hi = mid;
                    landing = (ym, qm);
                } else {
                    lo = mid;
                }
                if hi - lo <= F::epsilon() * step {
                    break;
                }
            }
            (landing.0, landing.1, hi)
        } else {
            (y_full, q_full, step)
        };

        let curv_next = curvature_for(spec, &q_next)?;
        let ds = h_used * dir;
        inner = inner + ds * (curv + curv_next) / two;
        let weight_next = (order * inner).exp();
        outer = outer + ds * (weight + weight_next) / two;
        y = y_next;
        q = q_next;
        curv = curv_next;
        weight = weight_next;
    }
    Err(Error::NonConvergence {
        iterations: max_steps,
        residual: (q.t - target_t).abs().lossy_f64(),
    })
}

/// One comparison row of the gradient law along a normal flow.
#[derive(Debug, Clone, Serialize)]
pub struct GradientLawRow<F> {
    /// Signed arc length from the start of the flow.
    pub s: F,
    /// Leaf parameter at this point.
    pub t: F,
    /// Measured gradient magnitude `u'(t) / density`.
    pub measured: F,
    /// Law prediction `measured(0) * exp((n-1) * integral of H)`.
    pub predicted: F,
    pub rel_error: F,
}

/// Gradient law check along one normal flow line.
#[derive(Debug, Clone, Serialize)]
pub struct GradientLawReport<F> {
    pub family: String,
    pub start_sigma: Vec<F>,
    pub start_t: F,
    pub s_max: F,
    pub step: F,
    pub rows: Vec<GradientLawRow<F>>,
    pub max_rel_error: F,
}

impl<F: Scalar + Serialize> GradientLawReport<F> {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Verify `|grad U| = |grad U|(0) * exp((n-1) * integral of H ds)` along the
/// normal flow from `start`.
///
/// The left side is measured pointwise from the reconstructed profile and the
/// family density; the right side integrates the leaf mean curvature along
/// the flow with the trapezoid rule. The flow must reach `s_max` inside the
/// leaf range.
pub fn verify_gradient_law<F: Scalar>(
    spec: &FamilySpec<F>,
    recon: &ReconstructionResult<F>,
    start: &ParamPoint<F>,
    s_max: F,
) -> Result<GradientLawReport<F>> {
    let step = spec.tolerances().flow_step;
    let trace = integrate_normal_flow(spec, start, s_max, step)?;
    require_complete(&trace)?;

    let order = F::from_usize(spec.ambient_dim() - 1).unwrap();
    let two = F::of(2.0);
    let mut rows = Vec::with_capacity(trace.points.len());
    let mut max_rel_error = F::zero();
    let mut inner = F::zero();
    let mut prev_s = F::zero();
    let mut prev_curv = F::zero();
    let mut measured0 = F::zero();

    for (k, p) in trace.points.iter().enumerate() {
        let frame = frame_at(spec, &p.param)?;
        let measured = recon.slope_at(p.param.t)? / frame.density;
        let curv = curvature_for(spec, &p.param)?;
        if k == 0 {
            measured0 = measured;
        } else {
            inner = inner + (p.s - prev_s) * (curv + prev_curv) / two;
        }
        let predicted = measured0 * (order * inner).exp();
        let rel_error = (measured - predicted).abs() / predicted.abs();
        max_rel_error = max_rel_error.max(rel_error);
        rows.push(GradientLawRow {
            s: p.s,
            t: p.param.t,
            measured,
            predicted,
            rel_error,
        });
        prev_s = p.s;
        prev_curv = curv;
    }

    Ok(GradientLawReport {
        family: spec.name().to_string(),
        start_sigma: start.sigma.clone(),
        start_t: start.t,
        s_max,
        step,
        rows,
        max_rel_error,
    })
}

/// Density slope consistency: `d(density)/ds` recomputed at a point must
/// match `lambda - (n-1) H density` from the checker decomposition.
///
/// Useful as a cross-check of the two derivative routes; returns the pair.
pub fn density_slope_decomposition<F: Scalar>(
    spec: &FamilySpec<F>,
    q: &ParamPoint<F>,
    lambda: F,
) -> Result<(F, F)> {
    let frame = frame_at(spec, q)?;
    let curv = curvature_for(spec, q)?;
    let order = F::from_usize(spec.ambient_dim() - 1).unwrap();
    let direct = dphi_ds(spec, q)?;
    let implied = lambda - order * curv * frame.density;
    Ok((direct, implied))
}
