//! Families of curves and hypersurfaces given as one map.
//!
//! A family is an orientation-preserving diffeomorphism
//! `Phi : sigma_box x t_interval -> R^n` whose `t`-slices are the leaves.
//! This module owns evaluation, first and second derivatives of the map
//! (symbolic or finite-difference), and the seeded Newton inversion that the
//! rest of the pipeline leans on.

use crate::config::{DerivativeMode, FamilyConfig, Tolerances};
use crate::error::{Error, Result};
use crate::expr::{parse_expression, Expression};
use crate::linalg::{self, Matrix};
use crate::numerics;
use crate::scalar::Scalar;

/// Point in parameter space: surface coordinates plus the leaf parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamPoint<F> {
    pub sigma: Vec<F>,
    pub t: F,
}

impl<F: Scalar> ParamPoint<F> {
    pub fn new(sigma: Vec<F>, t: F) -> Self {
        ParamPoint { sigma, t }
    }

    /// Flat view `[sigma.., t]` in expression-variable order.
    pub fn as_env(&self) -> Vec<F> {
        let mut env = self.sigma.clone();
        env.push(self.t);
        env
    }

    pub fn dim(&self) -> usize {
        self.sigma.len() + 1
    }

    pub(crate) fn describe(&self) -> String {
        let sigmas: Vec<String> = self.sigma.iter().map(|s| format!("{s}")).collect();
        format!("(sigma = [{}], t = {})", sigmas.join(", "), self.t)
    }
}

/// Point in ambient space.
#[derive(Debug, Clone, PartialEq)]
pub struct AmbientPoint<F> {
    pub coords: Vec<F>,
}

impl<F: Scalar> AmbientPoint<F> {
    pub fn new(coords: Vec<F>) -> Self {
        AmbientPoint { coords }
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }
}

/// A loaded, validated family.
///
/// Construction checks shape (component count, box count, interval order)
/// and orientation (`det dPhi > 0` on a coarse validation grid); instances
/// are immutable afterwards apart from the numeric settings builders.
#[derive(Debug, Clone)]
pub struct FamilySpec<F> {
    name: String,
    ambient_dim: usize,
    components: Vec<Expression<F>>,
    sigma_box: Vec<[F; 2]>,
    t_interval: [F; 2],
    derivative_mode: DerivativeMode,
    tolerances: Tolerances<F>,
    // symbolic partials, present in symbolic mode: first[i][k] is
    // d components[i] / d var_k, second[p][i] is the pair-p second partial
    // of component i (pairs over sigma variables, i <= j lexicographic)
    first_partials: Option<Vec<Vec<Expression<F>>>>,
    second_partials: Option<Vec<Vec<Expression<F>>>>,
    ambient_diameter: F,
}

/// Index of the unordered sigma pair `(i, j)`, `i <= j`, among `m` variables.
pub fn sigma_pair_index(i: usize, j: usize, m: usize) -> usize {
    assert!(i <= j && j < m);
    i * m - i * (i + 1) / 2 + j
}

/// Number of unordered sigma pairs among `m` variables.
pub fn sigma_pair_count(m: usize) -> usize {
    m * (m + 1) / 2
}

/// Build a family from a parsed config document.
pub fn load_family<F: Scalar>(config: &FamilyConfig) -> Result<FamilySpec<F>> {
    let texts: Vec<&str> = config.components.iter().map(String::as_str).collect();
    let sigma_box: Vec<[F; 2]> = config
        .sigma_box
        .iter()
        .map(|&[lo, hi]| [F::of(lo), F::of(hi)])
        .collect();
    let t_interval = [F::of(config.t_interval[0]), F::of(config.t_interval[1])];
    let mut tolerances = Tolerances::defaults(config.derivative_mode);
    if let Some(over) = &config.tolerances {
        tolerances.apply_overrides(over);
    }
    FamilySpec::new(
        &config.name,
        config.ambient_dim,
        &texts,
        sigma_box,
        t_interval,
        config.derivative_mode,
        tolerances,
    )
}

impl<F: Scalar> FamilySpec<F> {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        name: &str,
        ambient_dim: usize,
        component_texts: &[&str],
        sigma_box: Vec<[F; 2]>,
        t_interval: [F; 2],
        derivative_mode: DerivativeMode,
        tolerances: Tolerances<F>,
    ) -> Result<Self> {
        let n = ambient_dim;
        if n < 2 {
            return Err(Error::Config(format!(
                "ambient_dim must be at least 2, got {n}"
            )));
        }
        if component_texts.len() != n {
            return Err(Error::Config(format!(
                "expected {n} components for ambient_dim {n}, got {}",
                component_texts.len()
            )));
        }
        if sigma_box.len() != n - 1 {
            return Err(Error::Config(format!(
                "expected {} sigma intervals, got {}",
                n - 1,
                sigma_box.len()
            )));
        }
        for (k, &[lo, hi]) in sigma_box.iter().enumerate() {
            if !(lo < hi) {
                return Err(Error::Config(format!(
                    "sigma_box[{k}] = [{lo}, {hi}] is not an increasing interval"
                )));
            }
        }
        if !(t_interval[0] < t_interval[1]) {
            return Err(Error::Config(format!(
                "t_interval = [{}, {}] is not an increasing interval",
                t_interval[0], t_interval[1]
            )));
        }

        let var_names = variable_names(n);
        let var_refs: Vec<&str> = var_names.iter().map(String::as_str).collect();
        let components: Vec<Expression<F>> = component_texts
            .iter()
            .map(|text| parse_expression(text, &var_refs))
            .collect::<Result<_>>()?;

        let (first_partials, second_partials) = match derivative_mode {
            DerivativeMode::Symbolic => {
                let first: Vec<Vec<Expression<F>>> = components
                    .iter()
                    .map(|c| {
                        var_refs
                            .iter()
                            .map(|v| c.differentiate(v).simplify())
                            .collect()
                    })
                    .collect();
                let m = n - 1;
                let mut second = vec![Vec::new(); sigma_pair_count(m)];
                for i in 0..m {
                    for j in i..m {
                        let p = sigma_pair_index(i, j, m);
                        second[p] = first
                            .iter()
                            .map(|row| row[i].differentiate(&var_names[j]).simplify())
                            .collect();
                    }
                }
                (Some(first), Some(second))
            }
            DerivativeMode::FiniteDifference => (None, None),
        };

        let mut spec = FamilySpec {
            name: name.to_string(),
            ambient_dim: n,
            components,
            sigma_box,
            t_interval,
            derivative_mode,
            tolerances,
            first_partials,
            second_partials,
            ambient_diameter: F::zero(),
        };
        spec.validate_orientation()?;
        spec.tolerances.flow_step = spec
            .tolerances
            .flow_step
            .min(F::of(1e-2) * F::one().min(spec.ambient_diameter).max(F::of(1e-3)));
        Ok(spec)
    }

    /// Checks `det dPhi > 0` over a coarse closed grid and records the ambient
    /// bounding-box diameter seen along the way.
    fn validate_orientation(&mut self) -> Result<()> {
        const NODES_PER_AXIS: usize = 9;
        let n = self.ambient_dim;
        let mut axes: Vec<Vec<F>> = self
            .sigma_box
            .iter()
            .map(|&[lo, hi]| numerics::linspace(lo, hi, NODES_PER_AXIS))
            .collect();
        axes.push(numerics::linspace(
            self.t_interval[0],
            self.t_interval[1],
            NODES_PER_AXIS,
        ));

        let mut lo = vec![F::infinity(); n];
        let mut hi = vec![F::neg_infinity(); n];
        let mut index = vec![0usize; n];
        loop {
            let q = ParamPoint::new(
                (0..n - 1).map(|k| axes[k][index[k]]).collect(),
                axes[n - 1][index[n - 1]],
            );
            let y = self.phi_eval(&q)?;
            for (k, &c) in y.coords.iter().enumerate() {
                lo[k] = lo[k].min(c);
                hi[k] = hi[k].max(c);
            }
            let det = self.phi_jacobian(&q)?.det();
            if det <= F::zero() {
                return Err(Error::OrientationViolation {
                    location: q.describe(),
                    det: det.lossy_f64(),
                });
            }
            // odometer increment over the grid
            let mut axis = 0;
            loop {
                index[axis] += 1;
                if index[axis] < axes[axis].len() {
                    break;
                }
                index[axis] = 0;
                axis += 1;
                if axis == n {
                    let diag: F = lo
                        .iter()
                        .zip(&hi)
                        .fold(F::zero(), |acc, (&a, &b)| acc + (b - a) * (b - a));
                    self.ambient_diameter = diag.sqrt();
                    return Ok(());
                }
            }
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    pub fn sigma_box(&self) -> &[[F; 2]] {
        &self.sigma_box
    }

    pub fn t_interval(&self) -> [F; 2] {
        self.t_interval
    }

    pub fn derivative_mode(&self) -> DerivativeMode {
        self.derivative_mode
    }

    pub fn tolerances(&self) -> &Tolerances<F> {
        &self.tolerances
    }

    pub fn ambient_diameter(&self) -> F {
        self.ambient_diameter
    }

    pub fn with_flow_step(mut self, step: F) -> Self {
        self.tolerances.flow_step = step;
        self
    }

    pub fn with_check_tol(mut self, tol: F) -> Self {
        self.tolerances.check_tol = tol;
        self
    }

    pub fn with_quad_points(mut self, count: usize) -> Self {
        self.tolerances.quad_points = count;
        self
    }

    /// Evaluate the map at a parameter point.
    pub fn phi_eval(&self, q: &ParamPoint<F>) -> Result<AmbientPoint<F>> {
        debug_assert_eq!(q.dim(), self.ambient_dim);
        let env = q.as_env();
        let coords = self
            .components
            .iter()
            .map(|c| c.eval_slice(&env))
            .collect::<Result<_>>()?;
        Ok(AmbientPoint::new(coords))
    }

    /// Jacobian of the map, column order `d/d sigma_1 .. d/d sigma_(n-1), d/dt`.
    pub fn phi_jacobian(&self, q: &ParamPoint<F>) -> Result<Matrix<F>> {
        let n = self.ambient_dim;
        let env = q.as_env();
        let mut jac = Matrix::zeros(n, n);
        match &self.first_partials {
            Some(first) => {
                for (i, row) in first.iter().enumerate() {
                    for (k, d) in row.iter().enumerate() {
                        jac.set(i, k, d.eval_slice(&env)?);
                    }
                }
            }
            None => {
                let h = self.tolerances.fd_step;
                for k in 0..n {
                    let mut env_p = env.clone();
                    let mut env_m = env.clone();
                    env_p[k] = env_p[k] + h;
                    env_m[k] = env_m[k] - h;
                    for (i, c) in self.components.iter().enumerate() {
                        let fp = c.eval_slice(&env_p)?;
                        let fm = c.eval_slice(&env_m)?;
                        jac.set(i, k, (fp - fm) / (h + h));
                    }
                }
            }
        }
        Ok(jac)
    }

    /// Second partials of the map in the sigma variables only.
    ///
    /// Returns one ambient vector per unordered pair `(i, j)` with `i <= j`,
    /// ordered by [`sigma_pair_index`].
    pub fn phi_second_derivatives(&self, q: &ParamPoint<F>) -> Result<Vec<Vec<F>>> {
        let n = self.ambient_dim;
        let m = n - 1;
        let env = q.as_env();
        let mut out = Vec::with_capacity(sigma_pair_count(m));
        match &self.second_partials {
            Some(second) => {
                for exprs in second {
                    let v = exprs
                        .iter()
                        .map(|e| e.eval_slice(&env))
                        .collect::<Result<Vec<F>>>()?;
                    out.push(v);
                }
            }
            None => {
                let h = self.tolerances.second_fd_step;
                let two = F::of(2.0);
                let four = F::of(4.0);
                for i in 0..m {
                    for j in i..m {
                        let mut v = Vec::with_capacity(n);
                        if i == j {
                            let mut env_p = env.clone();
                            let mut env_m = env.clone();
                            env_p[i] = env_p[i] + h;
                            env_m[i] = env_m[i] - h;
                            for c in &self.components {
                                let fp = c.eval_slice(&env_p)?;
                                let f0 = c.eval_slice(&env)?;
                                let fm = c.eval_slice(&env_m)?;
                                v.push((fp - two * f0 + fm) / (h * h));
                            }
                        } else {
                            let mut pp = env.clone();
                            let mut pm = env.clone();
                            let mut mp = env.clone();
                            let mut mm = env.clone();
                            pp[i] = pp[i] + h;
                            pp[j] = pp[j] + h;
                            pm[i] = pm[i] + h;
                            pm[j] = pm[j] - h;
                            mp[i] = mp[i] - h;
                            mp[j] = mp[j] + h;
                            mm[i] = mm[i] - h;
                            mm[j] = mm[j] - h;
                            for c in &self.components {
                                let a = c.eval_slice(&pp)?;
                                let b = c.eval_slice(&pm)?;
                                let d = c.eval_slice(&mp)?;
                                let e = c.eval_slice(&mm)?;
                                v.push((a - b - d + e) / (four * h * h));
                            }
                        }
                        out.push(v);
                    }
                }
            }
        }
        Ok(out)
    }

    /// Seeded Newton inversion of the map, with a containment check on the
    /// result: the preimage must land inside the parameter box (up to a tiny
    /// relative slack).
    pub fn phi_invert(&self, y: &AmbientPoint<F>, seed: &ParamPoint<F>) -> Result<ParamPoint<F>> {
        let q = self.newton_invert(y, seed)?;
        self.check_containment(&q)?;
        Ok(q)
    }

    /// Newton inversion without the containment check. Internal flows and
    /// difference stencils use this so that points microscopically outside
    /// the closed box do not fail.
    pub(crate) fn newton_invert(
        &self,
        y: &AmbientPoint<F>,
        seed: &ParamPoint<F>,
    ) -> Result<ParamPoint<F>> {
        debug_assert_eq!(y.dim(), self.ambient_dim);
        let tol = self.tolerances.newton_tol;
        let mut q = seed.clone();
        let mut residual = linalg::sub(&y.coords, &self.phi_eval(&q)?.coords);
        let mut rnorm = linalg::norm(&residual);
        if rnorm < tol {
            return Ok(q);
        }
        for _ in 0..self.tolerances.max_newton_iters {
            let jac = self.phi_jacobian(&q)?;
            let delta = jac.solve(&residual)?;
            // damped update: halve the step until the residual decreases
            let mut scale = F::one();
            let mut improved = false;
            for _ in 0..20 {
                let candidate = offset_param(&q, &delta, scale);
                match self.phi_eval(&candidate) {
                    Ok(yc) => {
                        let r = linalg::sub(&y.coords, &yc.coords);
                        let rn = linalg::norm(&r);
                        if rn < rnorm {
                            q = candidate;
                            residual = r;
                            rnorm = rn;
                            improved = true;
                            break;
                        }
                    }
                    Err(_) => {}
                }
                scale = scale * F::of(0.5);
            }
            if !improved {
                return Err(Error::NonConvergence {
                    iterations: self.tolerances.max_newton_iters,
                    residual: rnorm.lossy_f64(),
                });
            }
            if rnorm < tol {
                return Ok(q);
            }
        }
        Err(Error::NonConvergence {
            iterations: self.tolerances.max_newton_iters,
            residual: rnorm.lossy_f64(),
        })
    }

    fn check_containment(&self, q: &ParamPoint<F>) -> Result<()> {
        self.sigma_containment(q)?;
        self.t_containment(q)
    }

    /// Whether the sigma part of `q` is inside the chart window (with slack).
    pub(crate) fn sigma_containment(&self, q: &ParamPoint<F>) -> Result<()> {
        for (k, &[lo, hi]) in self.sigma_box.iter().enumerate() {
            let slack = containment_slack(lo, hi);
            if q.sigma[k] < lo - slack || q.sigma[k] > hi + slack {
                return Err(Error::OutOfDomain(format!(
                    "sigma_{} = {} outside [{lo}, {hi}]",
                    k + 1,
                    q.sigma[k]
                )));
            }
        }
        Ok(())
    }

    /// Whether the leaf parameter of `q` is inside the family range (with slack).
    pub(crate) fn t_containment(&self, q: &ParamPoint<F>) -> Result<()> {
        let [lo, hi] = self.t_interval;
        let slack = containment_slack(lo, hi);
        if q.t < lo - slack || q.t > hi + slack {
            return Err(Error::OutOfDomain(format!(
                "t = {} outside [{lo}, {hi}]",
                q.t
            )));
        }
        Ok(())
    }

    /// Invert without a caller-provided seed.
    ///
    /// Newton from the chart center first; if that fails (wrong basin, or the
    /// preimage lands outside the window), rescan from the best of a coarse
    /// seed grid. Deterministic for a given family and point.
    pub fn phi_invert_global(&self, y: &AmbientPoint<F>) -> Result<ParamPoint<F>> {
        let two = F::of(2.0);
        let center = ParamPoint::new(
            self.sigma_box
                .iter()
                .map(|&[lo, hi]| (lo + hi) / two)
                .collect(),
            (self.t_interval[0] + self.t_interval[1]) / two,
        );
        if let Ok(q) = self.phi_invert(y, &center) {
            return Ok(q);
        }
        let mut axes: Vec<Vec<F>> = (0..self.ambient_dim - 1)
            .map(|k| {
                let [lo, hi] = self.sigma_box[k];
                numerics::interior_nodes(lo, hi, 7)
            })
            .collect();
        axes.push({
            let [lo, hi] = self.t_interval;
            numerics::interior_nodes(lo, hi, 7)
        });
        let total: usize = axes.iter().map(Vec::len).product();
        let mut best: Option<(F, ParamPoint<F>)> = None;
        for flat in 0..total {
            let mut rem = flat;
            let mut coords = Vec::with_capacity(axes.len());
            for ax in &axes {
                coords.push(ax[rem % ax.len()]);
                rem /= ax.len();
            }
            let t = coords.pop().unwrap();
            let q = ParamPoint::new(coords, t);
            let r = linalg::norm(&linalg::sub(&y.coords, &self.phi_eval(&q)?.coords));
            if best.as_ref().map_or(true, |(br, _)| r < *br) {
                best = Some((r, q));
            }
        }
        let (_, seed) = best.expect("seed grid is nonempty");
        self.phi_invert(y, &seed)
    }

    /// Interior grid nodes for one sigma axis.
    pub(crate) fn sigma_axis_nodes(&self, axis: usize, count: usize) -> Vec<F> {
        let [lo, hi] = self.sigma_box[axis];
        numerics::interior_nodes(lo, hi, count)
    }

    /// Interior grid nodes for the t axis.
    pub(crate) fn t_axis_nodes(&self, count: usize) -> Vec<F> {
        let [lo, hi] = self.t_interval;
        numerics::interior_nodes(lo, hi, count)
    }
}

fn containment_slack<F: Scalar>(lo: F, hi: F) -> F {
    (hi - lo).max(F::one()) * F::of(1e-9)
}

fn offset_param<F: Scalar>(q: &ParamPoint<F>, delta: &[F], scale: F) -> ParamPoint<F> {
    let m = q.sigma.len();
    let sigma = (0..m).map(|k| q.sigma[k] + scale * delta[k]).collect();
    ParamPoint::new(sigma, q.t + scale * delta[m])
}

/// Expression variable names for ambient dimension `n`: `s1 .. s(n-1), t`.
pub fn variable_names(n: usize) -> Vec<String> {
    let mut names: Vec<String> = (1..n).map(|k| format!("s{k}")).collect();
    names.push("t".to_string());
    names
}

/// Variable names for scalar fields on the ambient space: `y1 .. yn`.
pub fn ambient_variable_names(n: usize) -> Vec<String> {
    (1..=n).map(|k| format!("y{k}")).collect()
}
