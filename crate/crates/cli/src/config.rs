//! Run configuration files.
//!
//! A configuration is a JSON document. Every section is optional except the
//! problem itself (`dims`, `epsilon`); missing values take the defaults of the
//! selected mode. Unknown keys are rejected at every level.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use soliton_core::integrate::IntegrationControls;
use soliton_core::model::{validate_config, ModelConfig, RawConfig};
use soliton_core::shoot::{ChartScaling, Mode, ShootingParams};

use crate::exit::{CliError, CliResult};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShootSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coeffs: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scaling: Option<ChartScaling>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegrateSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rtol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub atol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_steps: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stop_radius: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub record_every: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub formats: Option<Vec<Format>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfigFile {
    pub dims: Vec<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambdas: Option<Vec<f64>>,
    pub epsilon: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<Mode>,
    #[serde(default)]
    pub shoot: ShootSection,
    #[serde(default)]
    pub integrate: IntegrateSection,
    #[serde(default)]
    pub output: OutputSection,
}

impl RunConfigFile {
    pub fn parse(text: &str) -> CliResult<Self> {
        serde_json::from_str(text)
            .map_err(|e| CliError::config(format!("malformed configuration: {e}")))
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn model(&self) -> CliResult<ModelConfig> {
        Ok(validate_config(&RawConfig {
            dims: self.dims.clone(),
            lambdas: self.lambdas.clone(),
            epsilon: self.epsilon,
        })?)
    }

    /// Validates the file for `mode` and fills in every default.
    pub fn resolve(&self, mode: Mode) -> CliResult<Run> {
        if let Some(m) = self.mode {
            if m != mode {
                return Err(CliError::config(format!(
                    "configuration is for {} mode; use the matching subcommand",
                    mode_name(m)
                )));
            }
        }
        let cfg = self.model()?;

        let mut params = match mode {
            Mode::Soliton => ShootingParams::soliton_default(&cfg),
            Mode::Einstein => ShootingParams::einstein_default(&cfg),
        };
        let sh = &self.shoot;
        if let Some(c) = &sh.coeffs {
            params.coeffs = c.clone();
        }
        params.h = sh.h.unwrap_or(params.h);
        params.s0 = sh.s0.unwrap_or(params.s0);
        params.scaling = sh.scaling.unwrap_or(params.scaling);
        // Normalising is not idempotent in floating point, so the resolved
        // file keeps the coefficients as given.
        let given = params.coeffs.clone();
        let params = params.validated(&cfg, mode)?;

        let mut controls = match mode {
            Mode::Soliton => IntegrationControls::soliton_defaults(&cfg),
            Mode::Einstein => IntegrationControls::einstein_defaults(&cfg),
        };
        let it = &self.integrate;
        controls.rtol = it.rtol.unwrap_or(controls.rtol);
        controls.atol = it.atol.unwrap_or(controls.atol);
        controls.s_max = it.s_max.unwrap_or(controls.s_max);
        controls.max_steps = it.max_steps.unwrap_or(controls.max_steps);
        controls.stop_radius = it.stop_radius.unwrap_or(controls.stop_radius);
        controls.record_every = it.record_every.unwrap_or(controls.record_every);
        controls.validate()?;

        let formats = self
            .output
            .formats
            .clone()
            .unwrap_or_else(|| vec![Format::Csv, Format::Json]);
        let resolved = RunConfigFile {
            dims: self.dims.clone(),
            lambdas: Some(cfg.lambdas().to_vec()),
            epsilon: self.epsilon,
            mode: Some(mode),
            shoot: ShootSection {
                h: Some(params.h),
                coeffs: Some(given),
                s0: Some(params.s0),
                scaling: Some(params.scaling),
            },
            integrate: IntegrateSection {
                rtol: Some(controls.rtol),
                atol: Some(controls.atol),
                s_max: Some(controls.s_max),
                max_steps: Some(controls.max_steps),
                stop_radius: Some(controls.stop_radius),
                record_every: Some(controls.record_every),
            },
            output: OutputSection {
                dir: None,
                formats: Some(formats.clone()),
            },
        };
        Ok(Run {
            cfg,
            mode,
            params,
            controls,
            formats,
            resolved,
        })
    }
}

/// A fully validated run.
#[derive(Clone, Debug)]
pub struct Run {
    pub cfg: ModelConfig,
    pub mode: Mode,
    pub params: ShootingParams,
    pub controls: IntegrationControls,
    pub formats: Vec<Format>,
    /// The configuration with every default written out. The output
    /// directory is dropped so that summaries do not depend on it.
    pub resolved: RunConfigFile,
}

impl Run {
    pub fn wants(&self, f: Format) -> bool {
        self.formats.contains(&f)
    }
}

pub fn mode_name(m: Mode) -> &'static str {
    match m {
        Mode::Soliton => "soliton",
        Mode::Einstein => "einstein",
    }
}
