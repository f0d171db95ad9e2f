//! On-disk family definitions and resolved numeric settings.
//!
//! A family is described by a small JSON document; everything numeric that
//! the pipeline needs beyond the defaults can be overridden per family.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// How the map derivatives are obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DerivativeMode {
    #[default]
    Symbolic,
    FiniteDifference,
}

/// JSON schema for a family definition.
///
/// `components` are expressions in `s1 .. s(n-1), t`; `sigma_box` gives one
/// closed interval per sigma variable and `t_interval` the leaf parameter
/// range.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilyConfig {
    pub name: String,
    pub ambient_dim: usize,
    pub components: Vec<String>,
    pub sigma_box: Vec<[f64; 2]>,
    pub t_interval: [f64; 2],
    #[serde(default)]
    pub derivative_mode: DerivativeMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerances: Option<ToleranceOverrides>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gauge: Option<GaugeConfig>,
}

impl FamilyConfig {
    pub fn from_json(text: &str) -> Result<FamilyConfig> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialization")
    }

    /// Grid counts per axis (`sigma` axes then `t`), falling back to defaults
    /// of 41x21 for curves and 21 per sigma axis x 11 for higher dimensions.
    pub fn grid_counts(&self) -> Vec<usize> {
        if let Some(grid) = &self.grid {
            return grid.clone();
        }
        let n = self.ambient_dim;
        if n == 2 {
            vec![41, 21]
        } else {
            let mut counts = vec![21; n - 1];
            counts.push(11);
            counts
        }
    }
}

/// Optional numeric overrides in a config file.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToleranceOverrides {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub check_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub newton_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fd_step: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flow_step: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quad_points: Option<usize>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaugeConfig {
    pub u0: f64,
    pub du0: f64,
}

/// Resolved numeric settings carried by a loaded family.
#[derive(Debug, Clone)]
pub struct Tolerances<F> {
    /// Acceptance threshold for the leafwise-constancy residual.
    pub check_tol: F,
    /// Ambient-space residual at which Newton inversion stops.
    pub newton_tol: F,
    pub max_newton_iters: usize,
    /// Central-difference step for first derivatives of the map.
    pub fd_step: F,
    /// Step for finite-difference second derivatives of the map.
    pub second_fd_step: F,
    /// Ambient step used when differentiating the density along the normal.
    pub dphi_step: F,
    /// Arc-length step for normal flows.
    pub flow_step: F,
    /// Node count for the reconstruction quadrature grid (odd, >= 5).
    pub quad_points: usize,
}

impl<F: Scalar> Tolerances<F> {
    /// Defaults for the given derivative mode; the check tolerance is looser
    /// in finite-difference mode.
    pub fn defaults(mode: DerivativeMode) -> Self {
        let check_tol = match mode {
            DerivativeMode::Symbolic => F::of(1e-6),
            DerivativeMode::FiniteDifference => F::of(1e-4),
        };
        Tolerances {
            check_tol,
            newton_tol: F::of(1e-12),
            max_newton_iters: 50,
            fd_step: F::of(1e-5),
            second_fd_step: F::of(1e-4),
            dphi_step: F::of(1e-4),
            flow_step: F::of(1e-2),
            quad_points: 161,
        }
    }

    pub fn apply_overrides(&mut self, over: &ToleranceOverrides) {
        if let Some(v) = over.check_tol {
            self.check_tol = F::of(v);
        }
        if let Some(v) = over.newton_tol {
            self.newton_tol = F::of(v);
        }
        if let Some(v) = over.fd_step {
            self.fd_step = F::of(v);
        }
        if let Some(v) = over.flow_step {
            self.flow_step = F::of(v);
        }
        if let Some(v) = over.quad_points {
            self.quad_points = v;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_minimal_config() {
        let text = r#"{
            "name": "lines",
            "ambient_dim": 2,
            "components": ["s1", "t"],
            "sigma_box": [[-1.0, 1.0]],
            "t_interval": [-0.75, 0.75]
        }"#;
        let cfg = FamilyConfig::from_json(text).unwrap();
        assert_eq!(cfg.derivative_mode, DerivativeMode::Symbolic);
        assert_eq!(cfg.grid_counts(), vec![41, 21]);
    }

    #[test]
    fn rejects_unknown_fields() {
        let text = r#"{
            "name": "lines",
            "ambient_dim": 2,
            "components": ["s1", "t"],
            "sigma_box": [[-1.0, 1.0]],
            "t_interval": [-0.75, 0.75],
            "extra": 1
        }"#;
        assert!(matches!(
            FamilyConfig::from_json(text),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn config_round_trips_through_json() {
        let text = r#"{
            "name": "lines",
            "ambient_dim": 2,
            "components": ["s1", "t"],
            "sigma_box": [[-1.0, 1.0]],
            "t_interval": [-0.75, 0.75],
            "derivative_mode": "finite-difference",
            "tolerances": {"check_tol": 0.001}
        }"#;
        let cfg = FamilyConfig::from_json(text).unwrap();
        let again = FamilyConfig::from_json(&cfg.to_json()).unwrap();
        assert_eq!(again.derivative_mode, DerivativeMode::FiniteDifference);
        assert_eq!(again.tolerances.unwrap().check_tol, Some(0.001));
    }
}
