//! Experiment manifests: a TOML file with `[regime]`, `[domain]`, `[sweep]`
//! and `[output]` sections. Every field can be overridden from the command
//! line; validation happens once everything is merged.

use crate::CliError;
use bubblelab::experiments::{zeta_reference, BoundaryRegime, RegimeInputs, ZetaRegime};
use bubblelab::solver::ProjectionKind;
use serde::Deserialize;
use std::path::{Path, PathBuf};

#[derive(Clone, Debug, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub regime: RegimeSection,
    #[serde(default)]
    pub domain: DomainSection,
    #[serde(default)]
    pub sweep: SweepSection,
    #[serde(default)]
    pub output: OutputSection,
}

/// Either a full `label` or the individual fields.
#[derive(Clone, Debug, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RegimeSection {
    pub label: Option<String>,
    pub n: Option<usize>,
    pub nu: Option<usize>,
    /// `"zero"` or `"positive"`.
    pub u0: Option<String>,
    /// `"interior"` or `"boundary"`.
    pub boundary: Option<String>,
    pub kind: Option<String>,
}

#[derive(Clone, Debug, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct DomainSection {
    /// Only `"ball"` (the unit ball) is supported by the sweeps.
    pub shape: Option<String>,
    pub lambda_fraction: Option<f64>,
    pub radial_cells: Option<usize>,
    pub angular_cells: Option<usize>,
}

#[derive(Clone, Debug, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub deltas: Option<Vec<f64>>,
    pub seed: Option<u64>,
    /// Boundary schedule `d = coef·δ^power`.
    pub schedule_coef: Option<f64>,
    pub schedule_power: Option<f64>,
    pub with_distance: Option<bool>,
    pub newton_tolerance: Option<f64>,
    pub fit_tolerance: Option<f64>,
}

#[derive(Clone, Debug, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub dir: Option<PathBuf>,
    pub name: Option<String>,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::config(format!("bad config: {e}")))
    }

    /// Regime tuple from the label or the individual fields.
    pub fn regime_inputs(&self) -> Result<RegimeInputs, CliError> {
        let r = &self.regime;
        if let Some(label) = &r.label {
            return label.parse().map_err(CliError::from);
        }
        let n = r.n.ok_or_else(|| CliError::config("regime needs a label or n"))?;
        let u0_positive = match r.u0.as_deref().unwrap_or("zero") {
            "zero" => false,
            "positive" => true,
            other => return Err(CliError::config(format!("u0 must be 'zero' or 'positive', got '{other}'"))),
        };
        let boundary = match r.boundary.as_deref().unwrap_or("interior") {
            "interior" => BoundaryRegime::Interior,
            "boundary" | "near-boundary" => BoundaryRegime::NearBoundary,
            other => return Err(CliError::config(format!("boundary must be 'interior' or 'boundary', got '{other}'"))),
        };
        let kind: ProjectionKind = r.kind.as_deref().ok_or_else(|| CliError::config("regime needs a projection kind"))?.parse()?;
        Ok(RegimeInputs { n, nu: r.nu.unwrap_or(1), u0_positive, boundary, kind })
    }

    /// Regime row plus the checks that need no solve.
    pub fn validated_regime(&self) -> Result<ZetaRegime, CliError> {
        let regime = zeta_reference(&self.regime_inputs()?)?;
        let shape = self.domain.shape.as_deref().unwrap_or("ball");
        if shape != "ball" {
            return Err(CliError::config(format!("sweeps run on the unit ball, got shape '{shape}'")));
        }
        self.lambda_fraction()?;
        Ok(regime)
    }

    pub fn lambda_fraction(&self) -> Result<f64, CliError> {
        let f = self.domain.lambda_fraction.unwrap_or(0.5);
        if !(f > 0.0 && f < 1.0) {
            return Err(CliError::config(format!("lambda_fraction must lie in (0, 1), got {f}")));
        }
        Ok(f)
    }

    pub fn deltas(&self) -> Result<Vec<f64>, CliError> {
        let ds = self.sweep.deltas.clone().ok_or_else(|| CliError::config("sweep needs a list of deltas"))?;
        if ds.len() < 3 || ds.iter().any(|d| !(*d > 0.0 && *d < 1.0)) {
            return Err(CliError::config("sweep needs at least three deltas in (0, 1)"));
        }
        Ok(ds)
    }

    pub fn output_dir(&self) -> PathBuf {
        self.output.dir.clone().unwrap_or_else(|| PathBuf::from("."))
    }

    pub fn output_name(&self, regime: &ZetaRegime) -> String {
        self.output.name.clone().unwrap_or_else(|| regime.label())
    }
}
