//! Function-side reference machinery: closed-form fields, their differential
//! operators, curvature of their level sets, and the bundled family catalog.
//!
//! The rest of the crate works from a parametrized family; this module works
//! from scalar functions of the ambient point, which gives an independent
//! route to every quantity the family pipeline produces. Tests lean on it to
//! confirm the two sides agree, and the catalog feeds the CLI.

use crate::config::FamilyConfig;
use crate::error::{Error, Result};
use crate::expr::{parse_expression, Expression};
use crate::family::ambient_variable_names;
use crate::linalg::{self, Matrix};
use crate::scalar::Scalar;
use serde::Serialize;

/// A scalar function of the ambient point with symbolic derivatives.
#[derive(Debug, Clone)]
pub struct ScalarField<F> {
    dim: usize,
    expr: Expression<F>,
    gradient: Vec<Expression<F>>,
    hessian: Vec<Vec<Expression<F>>>,
}

impl<F: Scalar> ScalarField<F> {
    /// Parse an expression in the ambient variables `y1 .. yn`.
    pub fn parse(text: &str, dim: usize) -> Result<Self> {
        assert!(dim >= 1);
        let names = ambient_variable_names(dim);
        let name_refs: Vec<&str> = names.iter().map(String::as_str).collect();
        let expr = parse_expression(text, &name_refs)?;
        let gradient: Vec<Expression<F>> = names
            .iter()
            .map(|v| expr.differentiate(v).simplify())
            .collect();
        let hessian = gradient
            .iter()
            .map(|g| {
                names
                    .iter()
                    .map(|v| g.differentiate(v).simplify())
                    .collect()
            })
            .collect();
        Ok(ScalarField {
            dim,
            expr,
            gradient,
            hessian,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn eval(&self, y: &[F]) -> Result<F> {
        debug_assert_eq!(y.len(), self.dim);
        self.expr.eval_slice(y)
    }

    pub fn gradient(&self, y: &[F]) -> Result<Vec<F>> {
        self.gradient.iter().map(|g| g.eval_slice(y)).collect()
    }

    pub fn hessian(&self, y: &[F]) -> Result<Matrix<F>> {
        let mut h = Matrix::zeros(self.dim, self.dim);
        for i in 0..self.dim {
            for j in 0..self.dim {
                h.set(i, j, self.hessian[i][j].eval_slice(y)?);
            }
        }
        Ok(h)
    }

    pub fn laplacian(&self, y: &[F]) -> Result<F> {
        let mut sum = F::zero();
        for i in 0..self.dim {
            sum = sum + self.hessian[i][i].eval_slice(y)?;
        }
        Ok(sum)
    }
}

/// Finite-difference Laplacian of a black-box function.
///
/// Standard central second differences with step `h` on each axis; the
/// function may fail (out of range, inversion trouble) and the error passes
/// through.
pub fn fd_laplacian<F: Scalar>(
    f: impl Fn(&[F]) -> Result<F>,
    y: &[F],
    h: F,
) -> Result<F> {
    let center = f(y)?;
    let two = F::of(2.0);
    let mut sum = F::zero();
    let mut point = y.to_vec();
    for i in 0..y.len() {
        point[i] = y[i] + h;
        let plus = f(&point)?;
        point[i] = y[i] - h;
        let minus = f(&point)?;
        point[i] = y[i];
        sum = sum + (plus - two * center + minus) / (h * h);
    }
    Ok(sum)
}

fn unit_gradient<F: Scalar>(field: &ScalarField<F>, y: &[F]) -> Result<(Vec<F>, F)> {
    let grad = field.gradient(y)?;
    let len = linalg::norm(&grad);
    if len <= F::epsilon() * F::of(64.0) {
        return Err(Error::Degenerate(
            "level-set normal undefined where the gradient vanishes".into(),
        ));
    }
    Ok((linalg::scaled(&grad, F::one() / len), len))
}

/// Signed curvature of the level curve of `field` through `y` (plane only),
/// oriented by the gradient: `-(T' Hess T) / |grad|`.
pub fn level_curvature_from_function<F: Scalar>(
    field: &ScalarField<F>,
    y: &[F],
) -> Result<F> {
    assert_eq!(field.dim(), 2, "signed curvature is planar only");
    let (normal, len) = unit_gradient(field, y)?;
    // tangent such that (tangent, normal) is positively oriented
    let tangent = vec![normal[1], -normal[0]];
    let hess = field.hessian(y)?;
    let mut quad = F::zero();
    for i in 0..2 {
        for j in 0..2 {
            quad = quad + tangent[i] * hess.at(i, j) * tangent[j];
        }
    }
    Ok(-quad / len)
}

/// Mean curvature of the level hypersurface of `field` through `y`, oriented
/// by the gradient: `(N' Hess N - laplacian) / ((n-1) |grad|)`.
pub fn mean_curvature_from_function<F: Scalar>(
    field: &ScalarField<F>,
    y: &[F],
) -> Result<F> {
    let n = field.dim();
    let (normal, len) = unit_gradient(field, y)?;
    let hess = field.hessian(y)?;
    let mut quad = F::zero();
    for i in 0..n {
        for j in 0..n {
            quad = quad + normal[i] * hess.at(i, j) * normal[j];
        }
    }
    let lap = field.laplacian(y)?;
    Ok((quad - lap) / (F::from_usize(n - 1).unwrap() * len))
}

/// Least-squares affine calibration of one sample set against another.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct AffineFit<F> {
    /// `reference ~ scale * candidate + offset`.
    pub scale: F,
    pub offset: F,
    pub max_abs_residual: F,
}

/// Fit `reference ~ scale * candidate + offset` by least squares.
///
/// Reconstruction is only determined up to this affine gauge, so comparisons
/// against a closed form go through the fit first. Fails when the candidate
/// samples are (nearly) constant.
pub fn affine_match<F: Scalar>(reference: &[F], candidate: &[F]) -> Result<AffineFit<F>> {
    assert_eq!(reference.len(), candidate.len());
    if reference.len() < 2 {
        return Err(Error::DegenerateSamples(
            "affine fit needs at least two samples".into(),
        ));
    }
    let count = F::from_usize(candidate.len()).unwrap();
    let mean = |v: &[F]| v.iter().fold(F::zero(), |a, &b| a + b) / count;
    let mc = mean(candidate);
    let mr = mean(reference);
    let mut var = F::zero();
    let mut cov = F::zero();
    for (&c, &r) in candidate.iter().zip(reference) {
        var = var + (c - mc) * (c - mc);
        cov = cov + (c - mc) * (r - mr);
    }
    let scale_ref = candidate
        .iter()
        .fold(F::zero(), |a, &b| a.max(b.abs()))
        .max(F::one());
    if var <= count * (scale_ref * F::of(1e-12)).powi(2) {
        return Err(Error::DegenerateSamples(
            "candidate samples are constant; affine fit is underdetermined".into(),
        ));
    }
    let scale = cov / var;
    let offset = mr - scale * mc;
    let mut max_abs_residual = F::zero();
    for (&c, &r) in candidate.iter().zip(reference) {
        max_abs_residual = max_abs_residual.max((r - (scale * c + offset)).abs());
    }
    Ok(AffineFit {
        scale,
        offset,
        max_abs_residual,
    })
}

/// A bundled family definition with its closed-form references.
#[derive(Debug, Clone)]
pub struct ReferenceEntry {
    pub config: FamilyConfig,
    /// Harmonic function whose level sets are the leaves, when one exists.
    pub harmonic: Option<&'static str>,
    /// Some function with the same level sets (used for curvature checks).
    pub level_function: Option<&'static str>,
    pub notes: &'static str,
}

fn entry(
    name: &str,
    ambient_dim: usize,
    components: &[&str],
    sigma_box: Vec<[f64; 2]>,
    t_interval: [f64; 2],
    harmonic: Option<&'static str>,
    level_function: Option<&'static str>,
    notes: &'static str,
) -> ReferenceEntry {
    ReferenceEntry {
        config: FamilyConfig {
            name: name.to_string(),
            ambient_dim,
            components: components.iter().map(|c| c.to_string()).collect(),
            sigma_box,
            t_interval,
            derivative_mode: Default::default(),
            grid: None,
            tolerances: None,
            gauge: None,
        },
        harmonic,
        level_function,
        notes,
    }
}

/// The built-in family catalog.
///
/// Four families that pass the leaf test (with their harmonic functions) and
/// one that fails it, exercising the rejection path.
pub fn catalog() -> Vec<ReferenceEntry> {
    vec![
        entry(
            "parallel_lines",
            2,
            &["s1", "t"],
            vec![[-1.0, 1.0]],
            [-0.75, 0.75],
            Some("y2"),
            Some("y2"),
            "horizontal lines, the level sets of the height function",
        ),
        entry(
            "concentric_circles",
            2,
            &["exp(t)*cos(s1)", "-exp(t)*sin(s1)"],
            vec![[-3.141592653589793, 3.141592653589793]],
            [-0.8, 0.8],
            Some("log(sqrt(y1^2+y2^2))"),
            Some("sqrt(y1^2+y2^2)"),
            "circles of radius exp(t), the level sets of log |y|",
        ),
        entry(
            "hyperbolas",
            2,
            &["exp(s1)", "t*exp(-s1)"],
            vec![[-0.8, 0.8]],
            [-0.75, 0.75],
            Some("y1*y2"),
            Some("y1*y2"),
            "right-half-plane hyperbolas y1*y2 = t",
        ),
        entry(
            "spheres_chart",
            3,
            &[
                "2*exp(t)*s1/(1+s1^2+s2^2)",
                "2*exp(t)*s2/(1+s1^2+s2^2)",
                "exp(t)*(1-s1^2-s2^2)/(1+s1^2+s2^2)",
            ],
            vec![[-1.0, 1.0], [-1.0, 1.0]],
            [-0.75, 0.75],
            Some("-1/sqrt(y1^2+y2^2+y3^2)"),
            Some("sqrt(y1^2+y2^2+y3^2)"),
            "spheres of radius exp(t) in a stereographic chart, level sets of -1/|y|",
        ),
        entry(
            "parabolas_counterexample",
            2,
            &["s1", "t+s1^2"],
            vec![[-0.1, 1.1]],
            [-0.5, 0.5],
            None,
            Some("y2-y1^2"),
            "translated parabolas; no harmonic function has these level sets",
        ),
    ]
}

/// Look up a catalog entry by family name.
pub fn catalog_entry(name: &str) -> Option<ReferenceEntry> {
    catalog().into_iter().find(|e| e.config.name == name)
}
