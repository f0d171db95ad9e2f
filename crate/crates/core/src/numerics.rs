//! Grids, quadrature and interpolation shared by the pipeline stages.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// `count` evenly spaced nodes covering `[lo, hi]` inclusive.
pub fn linspace<F: Scalar>(lo: F, hi: F, count: usize) -> Vec<F> {
    assert!(count >= 2, "linspace needs at least two nodes");
    let step = (hi - lo) / F::from_usize(count - 1).unwrap();
    (0..count)
        .map(|k| {
            if k == count - 1 {
                hi
            } else {
                lo + step * F::from_usize(k).unwrap()
            }
        })
        .collect()
}

/// `count` nodes strictly inside `(lo, hi)`: the interior nodes of a uniform
/// subdivision into `count + 1` cells.
///
/// Sampling grids use these so that difference stencils taken at grid points
/// stay inside the closed parameter box.
pub fn interior_nodes<F: Scalar>(lo: F, hi: F, count: usize) -> Vec<F> {
    assert!(count >= 1);
    let step = (hi - lo) / F::from_usize(count + 1).unwrap();
    (1..=count).map(|k| lo + step * F::from_usize(k).unwrap()).collect()
}

/// Quadrature grid for the leaf-parameter axis.
///
/// Piecewise-uniform with `t = 0` guaranteed to be a node: `k_neg` cells on
/// `[a, 0]` and `k_pos` cells on `[0, b]`, both even so that composite
/// Simpson pairs never straddle the anchor or the spacing break.
#[derive(Debug, Clone)]
pub struct AnchoredGrid<F> {
    /// Coarse nodes, ascending; `nodes[zero_index] == 0`.
    pub nodes: Vec<F>,
    pub zero_index: usize,
}

impl<F: Scalar> AnchoredGrid<F> {
    pub fn build(a: F, b: F, requested: usize) -> Result<AnchoredGrid<F>> {
        if !(a < F::zero() && F::zero() < b) {
            return Err(Error::Config(format!(
                "quadrature interval [{a}, {b}] must contain t = 0 in its interior"
            )));
        }
        let requested = requested.max(5);
        let frac = (-a) / (b - a);
        let cells = requested - 1;
        let even_at_least_two = |x: f64| -> usize {
            let k = (x.round() as usize).max(2);
            if k % 2 == 0 {
                k
            } else {
                k + 1
            }
        };
        let k_neg = even_at_least_two(frac.lossy_f64() * cells as f64);
        let k_pos = even_at_least_two((F::one() - frac).lossy_f64() * cells as f64);
        let mut nodes = Vec::with_capacity(k_neg + k_pos + 1);
        let neg_step = -a / F::from_usize(k_neg).unwrap();
        for k in 0..k_neg {
            nodes.push(a + neg_step * F::from_usize(k).unwrap());
        }
        nodes.push(F::zero());
        let pos_step = b / F::from_usize(k_pos).unwrap();
        for k in 1..=k_pos {
            if k == k_pos {
                nodes.push(b);
            } else {
                nodes.push(pos_step * F::from_usize(k).unwrap());
            }
        }
        Ok(AnchoredGrid {
            nodes,
            zero_index: k_neg,
        })
    }

    /// Nodes of the twice-refined grid (each coarse cell halved). Coarse node
    /// `k` sits at fine index `2k`.
    pub fn fine_nodes(&self) -> Vec<F> {
        let half = F::of(0.5);
        let mut fine = Vec::with_capacity(2 * self.nodes.len() - 1);
        for w in self.nodes.windows(2) {
            fine.push(w[0]);
            fine.push((w[0] + w[1]) * half);
        }
        fine.push(*self.nodes.last().unwrap());
        fine
    }
}

/// Cumulative integral of samples on a pairwise-uniform grid.
///
/// Node spacing must be constant within each Simpson pair
/// `(x[2j], x[2j+1], x[2j+2])`; pairs chain with composite Simpson and the
/// mid-pair nodes get the integral of the local quadratic, so errors at pair
/// boundaries never accumulate through the lower-order rule.
pub fn cumulative_integral<F: Scalar>(x: &[F], f: &[F]) -> Vec<F> {
    assert_eq!(x.len(), f.len());
    assert!(x.len() >= 3 && x.len() % 2 == 1, "need an odd node count >= 3");
    let mut c = vec![F::zero(); x.len()];
    let three = F::of(3.0);
    let four = F::of(4.0);
    let five = F::of(5.0);
    let eight = F::of(8.0);
    let twelve = F::of(12.0);
    for j in (0..x.len() - 2).step_by(2) {
        let h = x[j + 1] - x[j];
        let (f0, f1, f2) = (f[j], f[j + 1], f[j + 2]);
        c[j + 1] = c[j] + h * (five * f0 + eight * f1 - f2) / twelve;
        c[j + 2] = c[j] + h * (f0 + four * f1 + f2) / three;
    }
    c
}

/// Cubic Hermite table on strictly increasing nodes with prescribed slopes.
///
/// With exact slopes the interpolant is fourth-order accurate; constructors
/// that lack exact slopes fall back to centered differences.
#[derive(Debug, Clone)]
pub struct HermiteTable<F> {
    x: Vec<F>,
    y: Vec<F>,
    m: Vec<F>,
}

impl<F: Scalar> HermiteTable<F> {
    pub fn with_slopes(x: Vec<F>, y: Vec<F>, m: Vec<F>) -> Self {
        assert!(x.len() >= 2 && x.len() == y.len() && x.len() == m.len());
        debug_assert!(x.windows(2).all(|w| w[0] < w[1]));
        HermiteTable { x, y, m }
    }

    /// Slopes from centered differences (one-sided at the ends).
    pub fn with_estimated_slopes(x: Vec<F>, y: Vec<F>) -> Self {
        let n = x.len();
        assert!(n >= 2 && n == y.len());
        let mut m = vec![F::zero(); n];
        for k in 0..n {
            let (i, j) = if k == 0 {
                (0, 1)
            } else if k == n - 1 {
                (n - 2, n - 1)
            } else {
                (k - 1, k + 1)
            };
            m[k] = (y[j] - y[i]) / (x[j] - x[i]);
        }
        HermiteTable { x, y, m }
    }

    /// Clamp slopes so the interpolant is monotone wherever the data is
    /// (Fritsch-Carlson limiting). A no-op for smooth well-resolved tables.
    pub fn limit_monotone(&mut self) {
        let n = self.x.len();
        for k in 0..n - 1 {
            let secant = (self.y[k + 1] - self.y[k]) / (self.x[k + 1] - self.x[k]);
            if secant == F::zero() {
                self.m[k] = F::zero();
                self.m[k + 1] = F::zero();
                continue;
            }
            let three = F::of(3.0);
            for idx in [k, k + 1] {
                let ratio = self.m[idx] / secant;
                if ratio < F::zero() {
                    self.m[idx] = F::zero();
                } else if ratio > three {
                    self.m[idx] = three * secant;
                }
            }
        }
    }

    pub fn range(&self) -> (F, F) {
        (self.x[0], *self.x.last().unwrap())
    }

    pub fn contains(&self, xq: F) -> bool {
        let (lo, hi) = self.range();
        xq >= lo && xq <= hi
    }

    /// Evaluate at `xq`, which must lie within the table range.
    pub fn eval(&self, xq: F) -> Result<F> {
        let (lo, hi) = self.range();
        if xq < lo || xq > hi {
            return Err(Error::OutsideTable {
                t: xq.lossy_f64(),
                lo: lo.lossy_f64(),
                hi: hi.lossy_f64(),
            });
        }
        // binary search for the segment
        let mut left = 0;
        let mut right = self.x.len() - 1;
        while right - left > 1 {
            let mid = (left + right) / 2;
            if self.x[mid] <= xq {
                left = mid;
            } else {
                right = mid;
            }
        }
        let h = self.x[right] - self.x[left];
        let s = (xq - self.x[left]) / h;
        let s2 = s * s;
        let s3 = s2 * s;
        let two = F::of(2.0);
        let three = F::of(3.0);
        let h00 = two * s3 - three * s2 + F::one();
        let h10 = s3 - two * s2 + s;
        let h01 = -two * s3 + three * s2;
        let h11 = s3 - s2;
        Ok(h00 * self.y[left]
            + h10 * h * self.m[left]
            + h01 * self.y[right]
            + h11 * h * self.m[right])
    }
}
