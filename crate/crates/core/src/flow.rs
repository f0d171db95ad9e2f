//! Normal flow: integrate `dy/ds = N(y)` through the family of leaves.
//!
//! The right-hand side is the unit normal field induced by the family, so the
//! flow crosses leaves at unit speed and the leaf parameter advances at rate
//! `dt/ds = 1 / density`. Each evaluation inverts the chart at the current
//! ambient point, which keeps the trajectory consistent with the family
//! rather than with an accumulating parameter estimate.

use crate::error::{Error, Result};
use crate::family::{AmbientPoint, FamilySpec, ParamPoint};
use crate::geometry::{frame_at, FrameData};
use crate::scalar::Scalar;
use std::fmt::Write as _;

/// One sample along a normal-flow trajectory.
#[derive(Debug, Clone)]
pub struct FlowPoint<F> {
    /// Arc length from the start (signed: negative for backward flows).
    pub s: F,
    pub ambient: AmbientPoint<F>,
    pub param: ParamPoint<F>,
}

/// A normal-flow trajectory.
#[derive(Debug, Clone)]
pub struct FlowTrace<F> {
    pub points: Vec<FlowPoint<F>>,
    pub step_size: F,
    /// True when integration stopped early because the trajectory left the
    /// family's leaf range.
    pub truncated: bool,
}

impl<F: Scalar> FlowTrace<F> {
    /// Signed arc length of the last accepted point.
    pub fn reached(&self) -> F {
        self.points.last().map(|p| p.s).unwrap_or_else(F::zero)
    }

    /// CSV rows `s, y1..yn, s1..s(n-1), t`.
    pub fn to_csv(&self) -> String {
        let n = self
            .points
            .first()
            .map(|p| p.ambient.coords.len())
            .unwrap_or(0);
        let m = self
            .points
            .first()
            .map(|p| p.param.sigma.len())
            .unwrap_or(0);
        let mut out = String::from("s");
        for i in 1..=n {
            let _ = write!(out, ",y{i}");
        }
        for i in 1..=m {
            let _ = write!(out, ",s{i}");
        }
        out.push_str(",t\n");
        for p in &self.points {
            let _ = write!(out, "{}", p.s);
            for c in &p.ambient.coords {
                let _ = write!(out, ",{c}");
            }
            for c in &p.param.sigma {
                let _ = write!(out, ",{c}");
            }
            let _ = writeln!(out, ",{}", p.param.t);
        }
        out
    }
}

/// Error when a truncated trace is unacceptable for the caller.
pub fn require_complete<F: Scalar>(trace: &FlowTrace<F>) -> Result<()> {
    if trace.truncated {
        Err(Error::FlowTruncated {
            reached: trace.reached().lossy_f64(),
        })
    } else {
        Ok(())
    }
}

/// Unit normal at an ambient point, found by inverting the chart near `seed`.
///
/// Returns the frame and the inverted parameter point.
pub fn normal_at_ambient<F: Scalar>(
    spec: &FamilySpec<F>,
    y: &AmbientPoint<F>,
    seed: &ParamPoint<F>,
) -> Result<(FrameData<F>, ParamPoint<F>)> {
    let q = spec.phi_invert(y, seed)?;
    let frame = frame_at(spec, &q)?;
    Ok((frame, q))
}

/// Invert for internal flow use: `Ok(None)` signals that the point has left
/// the leaf range (truncation), chart-window violations stay hard errors.
fn invert_in_range<F: Scalar>(
    spec: &FamilySpec<F>,
    y: &[F],
    seed: &ParamPoint<F>,
) -> Result<Option<ParamPoint<F>>> {
    let q = spec.newton_invert(&AmbientPoint::new(y.to_vec()), seed)?;
    spec.sigma_containment(&q)?;
    if spec.t_containment(&q).is_err() {
        return Ok(None);
    }
    Ok(Some(q))
}

/// Integrate the normal flow from `start` for arc length `s_max` (signed).
///
/// Classical fourth-order Runge-Kutta with fixed step `step`; the final step
/// is shortened to land exactly at `s_max`. If the trajectory leaves the leaf
/// range, the partial point is dropped and the trace is marked truncated.
pub fn integrate_normal_flow<F: Scalar>(
    spec: &FamilySpec<F>,
    start: &ParamPoint<F>,
    s_max: F,
    step: F,
) -> Result<FlowTrace<F>> {
    assert!(step > F::zero(), "step must be positive");
    let dir = if s_max < F::zero() { -F::one() } else { F::one() };
    let total = s_max.abs();
    let y0 = spec.phi_eval(start)?;
    let mut points = vec![FlowPoint {
        s: F::zero(),
        ambient: y0.clone(),
        param: start.clone(),
    }];

    let mut y = y0.coords;
    let mut seed = start.clone();
    let mut s = F::zero();
    let mut truncated = false;

    let stage = |point: &[F], seed: &ParamPoint<F>| -> Result<Option<(Vec<F>, ParamPoint<F>)>> {
        match invert_in_range(spec, point, seed)? {
            Some(q) => {
                let frame = frame_at(spec, &q)?;
                Ok(Some((frame.unit_normal, q)))
            }
            None => Ok(None),
        }
    };

    while s < total {
        let remaining = total - s;
        let h_mag = step.min(remaining);
        let h = h_mag * dir;
        let advanced = (|| -> Result<Option<(Vec<F>, ParamPoint<F>)>> {
            let Some((k1, q1)) = stage(&y, &seed)? else {
                return Ok(None);
            };
            let half = h / F::of(2.0);
            let y2: Vec<F> = y.iter().zip(&k1).map(|(a, k)| *a + half * *k).collect();
            let Some((k2, q2)) = stage(&y2, &q1)? else {
                return Ok(None);
            };
            let y3: Vec<F> = y.iter().zip(&k2).map(|(a, k)| *a + half * *k).collect();
            let Some((k3, q3)) = stage(&y3, &q2)? else {
                return Ok(None);
            };
            let y4: Vec<F> = y.iter().zip(&k3).map(|(a, k)| *a + h * *k).collect();
            let Some((k4, q4)) = stage(&y4, &q3)? else {
                return Ok(None);
            };
            let sixth = h / F::of(6.0);
            let two = F::of(2.0);
            let y_next: Vec<F> = (0..y.len())
                .map(|i| y[i] + sixth * (k1[i] + two * k2[i] + two * k3[i] + k4[i]))
                .collect();
            // re-invert at the accepted point so param and ambient stay in sync
            let Some(q_next) = invert_in_range(spec, &y_next, &q4)? else {
                return Ok(None);
            };
            Ok(Some((y_next, q_next)))
        })();

        match advanced? {
            Some((y_next, q_next)) => {
                s = if h_mag >= remaining { total } else { s + h_mag };
                y = y_next;
                seed = q_next.clone();
                points.push(FlowPoint {
                    s: s * dir,
                    ambient: AmbientPoint::new(y.clone()),
                    param: q_next,
                });
            }
            None => {
                truncated = true;
                break;
            }
        }
    }

    Ok(FlowTrace {
        points,
        step_size: step,
        truncated,
    })
}

/// Central-difference derivative of the density along the normal direction.
///
/// Evaluates the density at the chart inversions of `y ± h N` and divides by
/// `2h`, with `h` taken from the family's tolerance set. The inversions skip
/// the containment check so grid points on the boundary of the parameter box
/// still work.
pub fn dphi_ds<F: Scalar>(spec: &FamilySpec<F>, q: &ParamPoint<F>) -> Result<F> {
    let h = spec.tolerances().dphi_step;
    let y = spec.phi_eval(q)?;
    let frame = frame_at(spec, q)?;
    let plus: Vec<F> = y
        .coords
        .iter()
        .zip(&frame.unit_normal)
        .map(|(a, n)| *a + h * *n)
        .collect();
    let minus: Vec<F> = y
        .coords
        .iter()
        .zip(&frame.unit_normal)
        .map(|(a, n)| *a - h * *n)
        .collect();
    let q_plus = spec.newton_invert(&AmbientPoint::new(plus), q)?;
    let q_minus = spec.newton_invert(&AmbientPoint::new(minus), q)?;
    let f_plus = frame_at(spec, &q_plus)?.density;
    let f_minus = frame_at(spec, &q_minus)?.density;
    Ok((f_plus - f_minus) / (h + h))
}
