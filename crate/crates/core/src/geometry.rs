//! Frames, normals and curvature along the leaves of a family.
//!
//! The normal used throughout is the Hodge-dual of the tangent columns: for
//! tangents `T_1 .. T_(n-1)` it is the vector `n` with
//! `<n, v> = (-1)^(n-1) det [v | T_1 | .. | T_(n-1)]` for every `v`, i.e. the
//! formal cofactor expansion of the determinant whose first column is the
//! standard basis. In the plane this is `(-y', x')` for a leaf tangent
//! `(x', y')`; in 3-space it is the cross product of the two tangents. The
//! sign convention makes `<n, dPhi/dt> = det dPhi`, so positive density means
//! positive orientation.
//!
//! Curvature signs follow the same normal: the unit circle traversed so the
//! normal points outward has signed curvature -1, and the sphere of radius r
//! with outward normal has mean curvature -1/r.

use crate::error::{Error, Result};
use crate::family::{sigma_pair_index, FamilySpec, ParamPoint};
use crate::linalg::{self, Matrix};
use crate::scalar::Scalar;

/// First-order data of the family at one parameter point.
#[derive(Debug, Clone)]
pub struct FrameData<F> {
    /// Full Jacobian, columns `d/d sigma_1 .. d/d sigma_(n-1), d/dt`.
    pub jacobian: Matrix<F>,
    /// Hodge-dual normal of the tangent columns (not normalized).
    pub hodge_normal: Vec<F>,
    /// `hodge_normal / |hodge_normal|`.
    pub unit_normal: Vec<F>,
    /// Jacobian determinant divided by the normal length.
    ///
    /// Positive for orientation-preserving families; this is the factor by
    /// which the leaf parameter advances per unit of normal arc length
    /// (`dt/ds = 1 / density`).
    pub density: F,
    /// Norm of the single tangent column when n = 2.
    pub tangent_norm: Option<F>,
}

/// Hodge-dual normal of the first `n - 1` columns of `jac`.
pub fn hodge_normal<F: Scalar>(jac: &Matrix<F>) -> Result<Vec<F>> {
    let n = jac.rows();
    assert!(jac.cols() >= n - 1, "need the tangent columns");
    let tangents = if jac.cols() == n - 1 {
        jac.clone()
    } else {
        jac.drop_column(n - 1)
    };
    let mut normal = Vec::with_capacity(n);
    // (-1)^(n-1) times the cofactor expansion along the basis column
    let lead = if (n - 1) % 2 == 0 { F::one() } else { -F::one() };
    let mut sign = lead;
    for i in 0..n {
        let minor = tangents.drop_row(i).det();
        normal.push(sign * minor);
        sign = -sign;
    }
    let len = linalg::norm(&normal);
    let col_scale = (0..n - 1)
        .map(|j| linalg::norm(&tangents.column(j)))
        .fold(F::one(), F::max);
    if len <= col_scale.powi(n as i32 - 1) * F::epsilon() * F::of(64.0) {
        return Err(Error::Degenerate(
            "tangent columns are rank deficient (zero normal)".into(),
        ));
    }
    Ok(normal)
}

/// Jacobian, normal and density at a parameter point.
pub fn frame_at<F: Scalar>(spec: &FamilySpec<F>, q: &ParamPoint<F>) -> Result<FrameData<F>> {
    let n = spec.ambient_dim();
    let jacobian = spec.phi_jacobian(q)?;
    let hodge = hodge_normal(&jacobian)?;
    let len = linalg::norm(&hodge);
    // <n, dPhi/dt> is the Laplace expansion of det dPhi along the t column
    let det = linalg::dot(&hodge, &jacobian.column(n - 1));
    if det <= F::zero() {
        return Err(Error::OrientationViolation {
            location: q.describe(),
            det: det.lossy_f64(),
        });
    }
    let unit_normal = linalg::scaled(&hodge, F::one() / len);
    let tangent_norm = if n == 2 {
        Some(linalg::norm(&jacobian.column(0)))
    } else {
        None
    };
    Ok(FrameData {
        jacobian,
        hodge_normal: hodge,
        unit_normal,
        density: det / len,
        tangent_norm,
    })
}

/// Signed curvature of the leaf through `q` of a plane family,
/// `(x'y'' - y'x'') / |gamma'|^3` with primes in the leaf coordinate.
pub fn signed_curvature_2d<F: Scalar>(spec: &FamilySpec<F>, q: &ParamPoint<F>) -> Result<F> {
    assert_eq!(spec.ambient_dim(), 2, "signed curvature is planar only");
    let jac = spec.phi_jacobian(q)?;
    let (xp, yp) = (jac.at(0, 0), jac.at(1, 0));
    let seconds = spec.phi_second_derivatives(q)?;
    let (xpp, ypp) = (seconds[0][0], seconds[0][1]);
    let speed2 = xp * xp + yp * yp;
    let speed = speed2.sqrt();
    if speed <= F::epsilon() * F::of(64.0) {
        return Err(Error::Degenerate(format!(
            "leaf tangent vanishes at {}",
            q.describe()
        )));
    }
    Ok((xp * ypp - yp * xpp) / (speed2 * speed))
}

/// Mean curvature of the leaf through `q` with respect to the family normal:
/// `trace(I^-1 II) / (n - 1)`.
pub fn mean_curvature_at<F: Scalar>(spec: &FamilySpec<F>, q: &ParamPoint<F>) -> Result<F> {
    let n = spec.ambient_dim();
    let m = n - 1;
    let frame = frame_at(spec, q)?;
    let seconds = spec.phi_second_derivatives(q)?;

    let mut first = Matrix::zeros(m, m);
    for i in 0..m {
        let ti = frame.jacobian.column(i);
        for j in i..m {
            let tj = frame.jacobian.column(j);
            let v = linalg::dot(&ti, &tj);
            first.set(i, j, v);
            first.set(j, i, v);
        }
    }
    let cond = first.condition_inf()?;
    if cond > F::of(1e12) {
        return Err(Error::Degenerate(format!(
            "first fundamental form ill-conditioned (cond = {:e}) at {}",
            cond.lossy_f64(),
            q.describe()
        )));
    }

    let mut second = Matrix::zeros(m, m);
    for i in 0..m {
        for j in i..m {
            let v = linalg::dot(&seconds[sigma_pair_index(i, j, m)], &frame.unit_normal);
            second.set(i, j, v);
            second.set(j, i, v);
        }
    }

    // trace(I^-1 II) without forming the inverse: solve I x = II e_k
    let mut trace = F::zero();
    for k in 0..m {
        let x = first.solve(&second.column(k))?;
        trace = trace + x[k];
    }
    Ok(trace / F::from_usize(m).unwrap())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{DerivativeMode, Tolerances};

    fn family(
        name: &str,
        dim: usize,
        comps: &[&str],
        sigma_box: Vec<[f64; 2]>,
        t_interval: [f64; 2],
    ) -> FamilySpec<f64> {
        FamilySpec::new(
            name,
            dim,
            comps,
            sigma_box,
            t_interval,
            DerivativeMode::Symbolic,
            Tolerances::defaults(DerivativeMode::Symbolic),
        )
        .unwrap()
    }

    fn circles() -> FamilySpec<f64> {
        family(
            "circles",
            2,
            &["exp(t)*cos(s1)", "-exp(t)*sin(s1)"],
            vec![[-std::f64::consts::PI, std::f64::consts::PI]],
            [-0.8, 0.8],
        )
    }

    fn spheres() -> FamilySpec<f64> {
        family(
            "spheres",
            3,
            &[
                "2*exp(t)*s1/(1+s1^2+s2^2)",
                "2*exp(t)*s2/(1+s1^2+s2^2)",
                "exp(t)*(1-s1^2-s2^2)/(1+s1^2+s2^2)",
            ],
            vec![[-1.0, 1.0], [-1.0, 1.0]],
            [-0.75, 0.75],
        )
    }

    #[test]
    fn planar_hodge_normal_rotates_the_tangent() {
        // tangent (0, -1) -> normal (1, 0)
        let jac = Matrix::from_rows(vec![vec![0.0, 1.0], vec![-1.0, 0.0]]);
        let n = hodge_normal(&jac).unwrap();
        assert_eq!(n, vec![1.0, 0.0]);
    }

    #[test]
    fn spatial_hodge_normal_is_the_cross_product() {
        let jac = Matrix::from_rows(vec![
            vec![1.0, 0.0, 0.0],
            vec![0.0, 1.0, 0.0],
            vec![0.0, 0.0, 1.0],
        ]);
        let n = hodge_normal(&jac).unwrap();
        assert_eq!(n, vec![0.0, 0.0, 1.0]);
    }

    #[test]
    fn degenerate_tangents_are_rejected() {
        let jac = Matrix::from_rows(vec![vec![0.0, 1.0], vec![0.0, 0.0]]);
        assert!(matches!(hodge_normal(&jac), Err(Error::Degenerate(_))));
    }

    #[test]
    fn circle_frame_at_the_base_point() {
        let fam = circles();
        let q = ParamPoint::new(vec![0.0], 0.0);
        let f = frame_at(&fam, &q).unwrap();
        assert!((f.density - 1.0).abs() < 1e-14);
        assert!((f.unit_normal[0] - 1.0).abs() < 1e-14);
        assert!(f.unit_normal[1].abs() < 1e-14);
    }

    #[test]
    fn hyperbola_frame_matches_hand_values() {
        let fam = family(
            "hyperbolas",
            2,
            &["exp(s1)", "t*exp(-s1)"],
            vec![[-0.8, 0.8]],
            [-0.75, 0.75],
        );
        let q = ParamPoint::new(vec![0.0], 0.5);
        let f = frame_at(&fam, &q).unwrap();
        let expected = 1.0 / 1.25f64.sqrt();
        assert!((f.density - expected).abs() < 1e-12);
        assert!((f.unit_normal[0] - 0.4472135954999579).abs() < 1e-12);
        assert!((f.unit_normal[1] - 0.8944271909999159).abs() < 1e-12);
    }

    #[test]
    fn normal_is_orthogonal_to_the_tangents() {
        let fam = spheres();
        for &(a, b, t) in &[(0.3, -0.4, 0.2), (-0.7, 0.6, -0.5), (0.05, 0.9, 0.6)] {
            let q = ParamPoint::new(vec![a, b], t);
            let f = frame_at(&fam, &q).unwrap();
            for j in 0..2 {
                let tangent = f.jacobian.column(j);
                let dot = linalg::dot(&f.hodge_normal, &tangent).abs();
                let scale = linalg::norm(&f.hodge_normal) * linalg::norm(&tangent);
                assert!(dot <= 1e-10 * scale.max(1.0));
            }
            let unit = linalg::norm(&f.unit_normal);
            assert!((unit - 1.0).abs() < 1e-12);
            assert!(f.density > 0.0);
        }
    }

    #[test]
    fn sphere_density_is_the_radial_scale() {
        let fam = spheres();
        for &(a, b, t) in &[(0.0, 0.0, 0.0), (0.3, -0.2, 0.4), (-0.6, 0.5, -0.3)] {
            let q = ParamPoint::new(vec![a, b], t);
            let f = frame_at(&fam, &q).unwrap();
            assert!((f.density - t.exp()).abs() < 1e-10 * t.exp());
        }
    }

    #[test]
    fn circle_curvature_is_minus_inverse_radius() {
        let fam = circles();
        let q = ParamPoint::new(vec![0.0], 0.0);
        assert!((signed_curvature_2d(&fam, &q).unwrap() + 1.0).abs() < 1e-12);
        let q = ParamPoint::new(vec![1.2], 0.5);
        let want = -(-0.5f64).exp();
        let got = signed_curvature_2d(&fam, &q).unwrap();
        assert!((got - want).abs() < 1e-12);
    }

    #[test]
    fn parabola_vertex_curvature() {
        let fam = family("parabolas", 2, &["s1", "t+s1^2"], vec![[-0.1, 1.1]], [-0.5, 0.5]);
        let q = ParamPoint::new(vec![0.0], 0.3);
        assert!((signed_curvature_2d(&fam, &q).unwrap() - 2.0).abs() < 1e-12);
        // general point: 2 / (1 + 4 s^2)^(3/2)
        let q = ParamPoint::new(vec![0.8], -0.2);
        let want = 2.0 / (1.0 + 4.0 * 0.64f64).powf(1.5);
        assert!((signed_curvature_2d(&fam, &q).unwrap() - want).abs() < 1e-12);
    }

    #[test]
    fn line_curvature_vanishes() {
        let fam = family("lines", 2, &["s1", "t"], vec![[-1.0, 1.0]], [-0.75, 0.75]);
        let q = ParamPoint::new(vec![0.4], -0.1);
        assert!(signed_curvature_2d(&fam, &q).unwrap().abs() < 1e-14);
    }

    #[test]
    fn unit_sphere_mean_curvature_is_minus_one() {
        let fam = spheres();
        let q = ParamPoint::new(vec![0.0, 0.0], 0.0);
        assert!((mean_curvature_at(&fam, &q).unwrap() + 1.0).abs() < 1e-10);
        // radius e^t sphere: H = -e^(-t), away from the chart center too
        let q = ParamPoint::new(vec![0.4, -0.3], 0.5);
        let want = -(-0.5f64).exp();
        let got = mean_curvature_at(&fam, &q).unwrap();
        assert!((got - want).abs() < 1e-10);
    }

    #[test]
    fn plane_family_mean_curvature_vanishes() {
        let fam = family(
            "planes",
            3,
            &["s1", "s2", "t"],
            vec![[-1.0, 1.0], [-1.0, 1.0]],
            [-0.5, 0.5],
        );
        let q = ParamPoint::new(vec![0.3, -0.6], 0.2);
        assert!(mean_curvature_at(&fam, &q).unwrap().abs() < 1e-12);
    }

    #[test]
    fn planar_mean_curvature_reduces_to_signed_curvature() {
        let fam = circles();
        for &(s, t) in &[(0.0, 0.0), (0.9, 0.4), (-2.1, -0.6)] {
            let q = ParamPoint::new(vec![s], t);
            let a = signed_curvature_2d(&fam, &q).unwrap();
            let b = mean_curvature_at(&fam, &q).unwrap();
            assert!((a - b).abs() < 1e-10);
        }
    }
}
