//! Drop-probability controllers: classic RED and a fractional-order PI
//! controller built on the discrete Grunwald-Letnikov differintegral.
//!
//! Everything here is a pure function over explicit state values, so
//! concurrent replications can each own their controller state. The
//! `*Controller` wrappers bundle config, cached weights and state for the
//! common sequential use.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

// ---------------------------------------------------------------------------
// Grunwald-Letnikov differintegral
// ---------------------------------------------------------------------------

/// Weight sequence `w_0..w_K` of the discrete differintegral of a given
/// fractional order.
///
/// `w_0 = 1` and `w_j = w_{j-1} (j - 1 - order) / j`, which equals
/// `(-1)^j binom(order, j)`. For order 1 the weights reduce to the first
/// difference `(1, -1, 0, ...)`; for order -1 they are all 1 (a plain sum).
#[derive(Debug, Clone, PartialEq)]
pub struct GlWeights {
    order: f64,
    weights: Vec<f64>,
}

impl GlWeights {
    pub fn order(&self) -> f64 {
        self.order
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

/// Computes the first `count` differintegral weights for `order`.
///
/// Deterministic: repeated calls produce bit-identical tables.
pub fn gl_weights(order: f64, count: usize) -> GlWeights {
    assert!(count >= 1, "weight count must be at least 1");
    let mut weights = Vec::with_capacity(count);
    weights.push(1.0);
    for j in 1..count {
        let j_f = j as f64;
        let next = weights[j - 1] * (j_f - 1.0 - order) / j_f;
        weights.push(next);
    }
    GlWeights { order, weights }
}

/// Applies the differintegral to a sample history (newest sample last):
/// `sum_j w_j x_{k-j}`, i.e. `w_0` weights the newest sample.
pub fn gl_apply(weights: &GlWeights, samples: &[f64]) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::NoSamples);
    }
    if weights.len() < samples.len() {
        return Err(Error::WeightsTooShort {
            weights: weights.len(),
            samples: samples.len(),
        });
    }
    Ok(samples
        .iter()
        .rev()
        .zip(weights.weights.iter())
        .map(|(x, w)| w * x)
        .sum())
}

// ---------------------------------------------------------------------------
// Fractional-order PI controller
// ---------------------------------------------------------------------------

/// Gains and shape of the PI^alpha drop-probability controller.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PiAlphaConfig {
    /// Proportional gain.
    pub k_p: f64,
    /// Integral gain.
    pub k_i: f64,
    /// Fractional order of the integral term; negative for integral action.
    pub order: f64,
    /// Desired queue length (packets).
    pub setpoint: f64,
    /// Maximum number of retained error samples. The underlying formula sums
    /// the entire history; the window truncates it, which matters because
    /// the weights do not decay for negative orders.
    #[serde(default = "default_window")]
    pub window: usize,
    /// Use the printed sign convention `max{0, -(K_P e + K_I d^a e)}` instead
    /// of the positive-excess convention (drop when the queue exceeds the
    /// setpoint). Off by default.
    #[serde(default)]
    pub literal_sign: bool,
}

fn default_window() -> usize {
    64
}

impl PiAlphaConfig {
    pub fn validate(&self) -> Result<()> {
        if self.window < 1 {
            return Err(Error::InvalidParameter {
                field: "window",
                reason: "must be at least 1".into(),
            });
        }
        if self.setpoint < 0.0 {
            return Err(Error::InvalidParameter {
                field: "setpoint",
                reason: "must be nonnegative".into(),
            });
        }
        Ok(())
    }
}

/// Bounded history of queue-length errors, newest last.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PiAlphaState {
    errors: VecDeque<f64>,
}

impl PiAlphaState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn errors(&self) -> impl Iterator<Item = f64> + '_ {
        self.errors.iter().copied()
    }

    pub fn len(&self) -> usize {
        self.errors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.errors.is_empty()
    }

    fn push(&mut self, error: f64, window: usize) {
        self.errors.push_back(error);
        while self.errors.len() > window {
            self.errors.pop_front();
        }
    }

    fn response(&self, config: &PiAlphaConfig, weights: &GlWeights) -> f64 {
        let newest = *self.errors.back().expect("response on empty history");
        let differintegral: f64 = self
            .errors
            .iter()
            .rev()
            .zip(weights.weights())
            .map(|(e, w)| w * e)
            .sum();
        config.k_p * newest + config.k_i * differintegral
    }
}

/// One controller step: appends `current_queue - setpoint` to the history and
/// returns the drop probability together with the updated state.
///
/// `weights` must hold at least `config.window` entries of the configured
/// order; compute them once with [`gl_weights`] and reuse.
pub fn pi_alpha_drop_prob(
    config: &PiAlphaConfig,
    weights: &GlWeights,
    state: &PiAlphaState,
    current_queue: f64,
) -> (f64, PiAlphaState) {
    let mut next = state.clone();
    next.push(current_queue - config.setpoint, config.window);
    let raw = next.response(config, weights);
    let p = if config.literal_sign { -raw } else { raw };
    (p.clamp(0.0, 1.0), next)
}

/// Stateful convenience wrapper around [`pi_alpha_drop_prob`].
#[derive(Debug, Clone)]
pub struct PiAlphaController {
    config: PiAlphaConfig,
    weights: GlWeights,
    state: PiAlphaState,
}

impl PiAlphaController {
    pub fn new(config: PiAlphaConfig) -> Self {
        let weights = gl_weights(config.order, config.window.max(1));
        Self {
            config,
            weights,
            state: PiAlphaState::new(),
        }
    }

    pub fn config(&self) -> &PiAlphaConfig {
        &self.config
    }

    pub fn drop_prob(&mut self, current_queue: f64) -> f64 {
        self.state
            .push(current_queue - self.config.setpoint, self.config.window);
        let raw = self.state.response(&self.config, &self.weights);
        let p = if self.config.literal_sign { -raw } else { raw };
        p.clamp(0.0, 1.0)
    }
}

// ---------------------------------------------------------------------------
// RED
// ---------------------------------------------------------------------------

/// Classic RED parameters. The drop probability ramps linearly from 0 at
/// `min_th` to `p_max` just below `max_th` and is 1 at or above `max_th`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RedConfig {
    pub min_th: f64,
    pub max_th: f64,
    /// Ramp ceiling, default 0.1.
    #[serde(default = "default_p_max")]
    pub p_max: f64,
    /// Weight of the newest sample in the moving average; 1.0 tracks the
    /// input exactly, the classic default 0.002 averages over roughly the
    /// last 500 samples.
    #[serde(default = "default_ewma_weight")]
    pub ewma_weight: f64,
}

fn default_p_max() -> f64 {
    0.1
}

fn default_ewma_weight() -> f64 {
    0.002
}

impl RedConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.min_th >= 0.0 && self.min_th < self.max_th) {
            return Err(Error::InvalidParameter {
                field: "min_th/max_th",
                reason: format!("need 0 <= min_th < max_th, got {} / {}", self.min_th, self.max_th),
            });
        }
        if !(0.0..=1.0).contains(&self.p_max) {
            return Err(Error::InvalidParameter {
                field: "p_max",
                reason: "must be within [0, 1]".into(),
            });
        }
        if !(self.ewma_weight > 0.0 && self.ewma_weight <= 1.0) {
            return Err(Error::InvalidParameter {
                field: "ewma_weight",
                reason: "must be within (0, 1]".into(),
            });
        }
        Ok(())
    }
}

/// Weighted moving average of the observed queue length.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RedState {
    pub avg: f64,
}

/// One RED step: updates the average and maps it through the drop ramp.
pub fn red_drop_prob(config: &RedConfig, state: &RedState, current_queue: f64) -> (f64, RedState) {
    let avg = (1.0 - config.ewma_weight) * state.avg + config.ewma_weight * current_queue;
    let p = if avg < config.min_th {
        0.0
    } else if avg < config.max_th {
        config.p_max * (avg - config.min_th) / (config.max_th - config.min_th)
    } else {
        1.0
    };
    (p, RedState { avg })
}

/// Stateful convenience wrapper around [`red_drop_prob`].
#[derive(Debug, Clone)]
pub struct RedController {
    config: RedConfig,
    state: RedState,
}

impl RedController {
    pub fn new(config: RedConfig) -> Self {
        Self {
            config,
            state: RedState::default(),
        }
    }

    pub fn config(&self) -> &RedConfig {
        &self.config
    }

    pub fn avg(&self) -> f64 {
        self.state.avg
    }

    pub fn drop_prob(&mut self, current_queue: f64) -> f64 {
        let (p, next) = red_drop_prob(&self.config, &self.state, current_queue);
        self.state = next;
        p
    }
}

// ---------------------------------------------------------------------------
// Controller selection
// ---------------------------------------------------------------------------

/// Which AQM policy a model run consults, with its parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum AqmConfig {
    Red(RedConfig),
    PiAlpha(PiAlphaConfig),
    /// Fixed drop probability; `Constant(0.0)` disables dropping entirely.
    Constant(f64),
}

impl AqmConfig {
    pub fn validate(&self) -> Result<()> {
        match self {
            AqmConfig::Red(c) => c.validate(),
            AqmConfig::PiAlpha(c) => c.validate(),
            AqmConfig::Constant(p) => {
                if (0.0..=1.0).contains(p) {
                    Ok(())
                } else {
                    Err(Error::InvalidParameter {
                        field: "constant drop probability",
                        reason: "must be within [0, 1]".into(),
                    })
                }
            }
        }
    }

    pub fn build(&self) -> AqmController {
        match self {
            AqmConfig::Red(c) => AqmController::Red(RedController::new(c.clone())),
            AqmConfig::PiAlpha(c) => AqmController::PiAlpha(PiAlphaController::new(c.clone())),
            AqmConfig::Constant(p) => AqmController::Constant(*p),
        }
    }
}

/// Runtime controller owning its state.
#[derive(Debug, Clone)]
pub enum AqmController {
    Red(RedController),
    PiAlpha(PiAlphaController),
    Constant(f64),
}

impl AqmController {
    /// Consults the controller with the observed queue length and returns
    /// the drop probability for the current decision.
    pub fn drop_prob(&mut self, current_queue: f64) -> f64 {
        match self {
            AqmController::Red(c) => c.drop_prob(current_queue),
            AqmController::PiAlpha(c) => c.drop_prob(current_queue),
            AqmController::Constant(p) => *p,
        }
    }
}
