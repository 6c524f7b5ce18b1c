//! Config-file schema, validation and the named parameter presets.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::controllers::{AqmConfig, PiAlphaConfig, RedConfig};
use crate::error::{Error, Result};
use crate::feedback::MixedModelConfig;

/// Which model(s) an experiment runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelChoice {
    Diffusion,
    Des,
    Both,
}

impl ModelChoice {
    pub fn runs_diffusion(self) -> bool {
        matches!(self, ModelChoice::Diffusion | ModelChoice::Both)
    }

    pub fn runs_des(self) -> bool {
        matches!(self, ModelChoice::Des | ModelChoice::Both)
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "diffusion" => Ok(ModelChoice::Diffusion),
            "des" => Ok(ModelChoice::Des),
            "both" => Ok(ModelChoice::Both),
            other => Err(Error::ConfigValidation {
                field: "model".into(),
                reason: format!("expected diffusion|des|both, got \"{other}\""),
            }),
        }
    }
}

/// Fully validated experiment description.
#[derive(Debug, Clone, Serialize)]
pub struct ExperimentSpec {
    pub model: ModelChoice,
    pub replications: usize,
    pub preset: Option<String>,
    /// Model parameters with the mixed-model flavor of the controller.
    pub mixed: MixedModelConfig,
    /// Controller variant consulted by the DES (RED may smooth differently).
    pub des_controller: AqmConfig,
}

impl ExperimentSpec {
    /// The same parameters with the DES flavor of the controller.
    pub fn des_config(&self) -> MixedModelConfig {
        MixedModelConfig {
            controller: self.des_controller.clone(),
            ..self.mixed.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.replications < 1 {
            return Err(Error::ConfigValidation {
                field: "replications".into(),
                reason: "replications must be >= 1".into(),
            });
        }
        self.mixed.validate()?;
        self.des_controller.validate()?;
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Raw TOML schema
// ---------------------------------------------------------------------------

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    experiment: ExperimentSection,
    queue: Option<QueueSection>,
    source: Option<SourceSection>,
    controller: Option<ControllerSection>,
    diffusion: Option<DiffusionSection>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ExperimentSection {
    #[serde(default = "default_model")]
    model: String,
    #[serde(default = "default_replications")]
    replications: usize,
    #[serde(default)]
    seed: u64,
    horizon: Option<f64>,
    warmup_fraction: Option<f64>,
    report_dt: Option<f64>,
    preset: Option<String>,
}

fn default_model() -> String {
    "both".into()
}

fn default_replications() -> usize {
    100
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct QueueSection {
    capacity: Option<usize>,
    mu: Option<f64>,
    c2_service: Option<f64>,
    c2_arrival: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SourceSection {
    lambda0: Option<f64>,
    zeta: Option<f64>,
    lambda_min: Option<f64>,
    lambda_max: Option<f64>,
    feedback_delay: Option<f64>,
    overflow_halves: Option<bool>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ControllerSection {
    kind: String,
    red: Option<RedSection>,
    pi_alpha: Option<PiAlphaSection>,
    constant: Option<ConstantSection>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RedSection {
    min_th: f64,
    max_th: f64,
    p_max: Option<f64>,
    ewma_weight: Option<f64>,
    des_ewma_weight: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct PiAlphaSection {
    k_p: f64,
    k_i: f64,
    order: f64,
    setpoint: f64,
    window: Option<usize>,
    literal_sign: Option<bool>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConstantSection {
    p: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct DiffusionSection {
    time_step: Option<f64>,
    x_resolution: Option<usize>,
    series_cutoff: Option<usize>,
}

// ---------------------------------------------------------------------------
// Presets
// ---------------------------------------------------------------------------

/// Reference experiment: RED with thresholds 10/20 on a 30-packet queue
/// with unit exponential service, plus the three fractional-PI rows.
pub const PRESET_NAMES: [&str; 4] = ["red-sec5", "pia-1", "pia-2", "pia-3"];

/// Default EWMA weight for RED in both models: classic per-decision
/// smoothing. At the normalized packet rates used here an instantaneous
/// average makes RED far more aggressive than the reference behavior.
pub const DEFAULT_RED_EWMA: f64 = 0.002;

/// Default bounded history of the fractional-order controller.
pub const DEFAULT_GL_WINDOW: usize = 64;

fn pia_preset(k_i: f64, order: f64) -> AqmConfig {
    AqmConfig::PiAlpha(PiAlphaConfig {
        k_p: 0.0001,
        k_i,
        order,
        setpoint: 10.0,
        window: DEFAULT_GL_WINDOW,
        literal_sign: false,
    })
}

/// Expands a preset into its controller pair (mixed flavor, DES flavor).
/// Queue parameters are the reference ones for every preset: N = 30,
/// mu = 1, Poisson arrivals, exponential service.
pub fn preset_controllers(name: &str) -> Result<(AqmConfig, AqmConfig)> {
    match name {
        "red-sec5" => {
            let red = AqmConfig::Red(RedConfig {
                min_th: 10.0,
                max_th: 20.0,
                p_max: 0.1,
                ewma_weight: DEFAULT_RED_EWMA,
            });
            Ok((red.clone(), red))
        }
        "pia-1" => Ok((pia_preset(0.0004, -1.2), pia_preset(0.0004, -1.2))),
        "pia-2" => Ok((pia_preset(0.0014, -0.8), pia_preset(0.0014, -0.8))),
        "pia-3" => Ok((pia_preset(0.0040, -0.4), pia_preset(0.0040, -0.4))),
        other => Err(Error::UnknownPreset(other.to_string())),
    }
}

/// One line per preset for `preset list`.
pub fn preset_descriptions() -> Vec<(String, String)> {
    vec![
        (
            "red-sec5".into(),
            "RED min_th=10 max_th=20 p_max=0.1 ewma=0.002; N=30 mu=1".into(),
        ),
        (
            "pia-1".into(),
            "PI^a K_p=0.0001 K_i=0.0004 order=-1.2 setpoint=10; N=30 mu=1".into(),
        ),
        (
            "pia-2".into(),
            "PI^a K_p=0.0001 K_i=0.0014 order=-0.8 setpoint=10; N=30 mu=1".into(),
        ),
        (
            "pia-3".into(),
            "PI^a K_p=0.0001 K_i=0.0040 order=-0.4 setpoint=10; N=30 mu=1".into(),
        ),
    ]
}

// ---------------------------------------------------------------------------
// Loading
// ---------------------------------------------------------------------------

/// Parses and validates a config file. Unknown keys are rejected; a preset
/// replaces the `[queue]` and `[controller]` sections and conflicts with
/// them.
pub fn load_config(path: &Path) -> Result<ExperimentSpec> {
    let text = std::fs::read_to_string(path)?;
    load_config_str(&text)
}

pub fn load_config_str(text: &str) -> Result<ExperimentSpec> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| Error::ConfigParse(e.to_string()))?;
    let model = ModelChoice::parse(&raw.experiment.model)?;

    let (mut mixed_controller, mut des_controller) = (None, None);
    if let Some(name) = &raw.experiment.preset {
        if raw.controller.is_some() {
            return Err(Error::ConfigValidation {
                field: "controller".into(),
                reason: format!("preset \"{name}\" already fixes the controller"),
            });
        }
        if raw.queue.is_some() {
            return Err(Error::ConfigValidation {
                field: "queue".into(),
                reason: format!("preset \"{name}\" already fixes the queue parameters"),
            });
        }
        let (m, d) = preset_controllers(name)?;
        mixed_controller = Some(m);
        des_controller = Some(d);
    } else if let Some(section) = &raw.controller {
        let (m, d) = build_controller(section)?;
        mixed_controller = Some(m);
        des_controller = Some(d);
    }

    let mixed_controller = mixed_controller.unwrap_or(AqmConfig::Constant(0.0));
    let des_controller = des_controller.unwrap_or_else(|| mixed_controller.clone());

    let mut mixed = MixedModelConfig::new(mixed_controller);
    mixed.seed = raw.experiment.seed;
    if let Some(v) = raw.experiment.horizon {
        mixed.horizon = v;
    }
    if let Some(v) = raw.experiment.warmup_fraction {
        mixed.warmup_fraction = v;
    }
    if let Some(v) = raw.experiment.report_dt {
        mixed.report_dt = v;
    }
    if let Some(q) = &raw.queue {
        if let Some(v) = q.capacity {
            mixed.capacity = v;
        }
        if let Some(v) = q.mu {
            mixed.mu = v;
        }
        if let Some(v) = q.c2_service {
            mixed.c2_service = v;
        }
        if let Some(v) = q.c2_arrival {
            mixed.c2_arrival = v;
        }
    }
    if let Some(s) = &raw.source {
        if let Some(v) = s.lambda0 {
            mixed.lambda0 = v;
        }
        if let Some(v) = s.zeta {
            mixed.zeta = v;
        }
        if let Some(v) = s.lambda_min {
            mixed.lambda_min = v;
        }
        if let Some(v) = s.lambda_max {
            mixed.lambda_max = v;
        }
        if let Some(v) = s.feedback_delay {
            mixed.feedback_delay = v;
        }
        if let Some(v) = s.overflow_halves {
            mixed.overflow_halves = v;
        }
    }
    if let Some(d) = &raw.diffusion {
        if let Some(v) = d.time_step {
            mixed.time_step_cap = v;
        }
        if let Some(v) = d.x_resolution {
            mixed.x_resolution = v;
        }
        if let Some(v) = d.series_cutoff {
            mixed.series_cutoff = v;
        }
    }

    let spec = ExperimentSpec {
        model,
        replications: raw.experiment.replications,
        preset: raw.experiment.preset.clone(),
        mixed,
        des_controller,
    };
    spec.validate()?;
    Ok(spec)
}

fn build_controller(section: &ControllerSection) -> Result<(AqmConfig, AqmConfig)> {
    match section.kind.as_str() {
        "red" => {
            let red = section.red.as_ref().ok_or_else(|| Error::ConfigValidation {
                field: "controller.red".into(),
                reason: "kind = \"red\" needs a [controller.red] table".into(),
            })?;
            let base = RedConfig {
                min_th: red.min_th,
                max_th: red.max_th,
                p_max: red.p_max.unwrap_or(0.1),
                ewma_weight: red.ewma_weight.unwrap_or(DEFAULT_RED_EWMA),
            };
            let des = RedConfig {
                ewma_weight: red
                    .des_ewma_weight
                    .or(red.ewma_weight)
                    .unwrap_or(DEFAULT_RED_EWMA),
                ..base.clone()
            };
            Ok((AqmConfig::Red(base), AqmConfig::Red(des)))
        }
        "pi-alpha" => {
            let pi = section
                .pi_alpha
                .as_ref()
                .ok_or_else(|| Error::ConfigValidation {
                    field: "controller.pi_alpha".into(),
                    reason: "kind = \"pi-alpha\" needs a [controller.pi_alpha] table".into(),
                })?;
            let config = AqmConfig::PiAlpha(PiAlphaConfig {
                k_p: pi.k_p,
                k_i: pi.k_i,
                order: pi.order,
                setpoint: pi.setpoint,
                window: pi.window.unwrap_or(DEFAULT_GL_WINDOW),
                literal_sign: pi.literal_sign.unwrap_or(false),
            });
            Ok((config.clone(), config))
        }
        "constant" => {
            let c = section
                .constant
                .as_ref()
                .ok_or_else(|| Error::ConfigValidation {
                    field: "controller.constant".into(),
                    reason: "kind = \"constant\" needs a [controller.constant] table".into(),
                })?;
            Ok((AqmConfig::Constant(c.p), AqmConfig::Constant(c.p)))
        }
        "off" => Ok((AqmConfig::Constant(0.0), AqmConfig::Constant(0.0))),
        other => Err(Error::ConfigValidation {
            field: "controller.kind".into(),
            reason: format!("expected red|pi-alpha|constant|off, got \"{other}\""),
        }),
    }
}

/// Applies one sweep override to a spec.
pub fn apply_sweep_param(spec: &mut ExperimentSpec, param: &str, value: f64) -> Result<()> {
    match param {
        "c2_arrival" => spec.mixed.c2_arrival = value,
        "c2_service" => spec.mixed.c2_service = value,
        "zeta" => spec.mixed.zeta = value,
        "lambda0" => spec.mixed.lambda0 = value,
        "lambda_max" => spec.mixed.lambda_max = value,
        "feedback_delay" => spec.mixed.feedback_delay = value,
        "horizon" => spec.mixed.horizon = value,
        _ => return Err(Error::UnknownSweepParam(param.to_string())),
    }
    spec.validate()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preset_pia2_expands_to_table_row() {
        let spec = load_config_str(
            "[experiment]\npreset = \"pia-2\"\nreplications = 3\nseed = 5\n",
        )
        .unwrap();
        match &spec.mixed.controller {
            AqmConfig::PiAlpha(c) => {
                assert_eq!(c.k_p, 0.0001);
                assert_eq!(c.k_i, 0.0014);
                assert_eq!(c.order, -0.8);
                assert_eq!(c.setpoint, 10.0);
            }
            other => panic!("unexpected controller {other:?}"),
        }
        assert_eq!(spec.mixed.capacity, 30);
        assert_eq!(spec.mixed.mu, 1.0);
        assert_eq!(spec.replications, 3);
    }

    #[test]
    fn empty_file_is_a_parse_error() {
        assert!(matches!(load_config_str(""), Err(Error::ConfigParse(_))));
    }

    #[test]
    fn zero_replications_fail_validation() {
        let err = load_config_str("[experiment]\npreset = \"pia-1\"\nreplications = 0\n")
            .unwrap_err();
        match err {
            Error::ConfigValidation { reason, .. } => {
                assert!(reason.contains(">= 1"), "{reason}")
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn unknown_keys_and_presets_are_rejected() {
        assert!(matches!(
            load_config_str("[experiment]\nbogus = 1\n"),
            Err(Error::ConfigParse(_))
        ));
        assert!(matches!(
            load_config_str("[experiment]\npreset = \"nope\"\n"),
            Err(Error::UnknownPreset(_))
        ));
    }

    #[test]
    fn preset_conflicts_with_explicit_controller() {
        let err = load_config_str(
            "[experiment]\npreset = \"pia-1\"\n[controller]\nkind = \"off\"\n",
        )
        .unwrap_err();
        assert!(matches!(err, Error::ConfigValidation { .. }));
    }

    #[test]
    fn explicit_red_controller_with_separate_des_weight() {
        let spec = load_config_str(
            r#"
[experiment]
model = "both"

[controller]
kind = "red"

[controller.red]
min_th = 5.0
max_th = 15.0
ewma_weight = 1.0
des_ewma_weight = 0.01
"#,
        )
        .unwrap();
        match (&spec.mixed.controller, &spec.des_controller) {
            (AqmConfig::Red(m), AqmConfig::Red(d)) => {
                assert_eq!(m.ewma_weight, 1.0);
                assert_eq!(d.ewma_weight, 0.01);
                assert_eq!(d.min_th, 5.0);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn sweep_param_rejects_unknown_names() {
        let mut spec = load_config_str("[experiment]\npreset = \"pia-1\"\n").unwrap();
        assert!(apply_sweep_param(&mut spec, "c2_arrival", 4.0).is_ok());
        assert_eq!(spec.mixed.c2_arrival, 4.0);
        assert!(matches!(
            apply_sweep_param(&mut spec, "coffee", 1.0),
            Err(Error::UnknownSweepParam(_))
        ));
    }
}
