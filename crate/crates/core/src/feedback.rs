//! The mixed diffusion/decision model of a TCP-fed AQM router queue.
//!
//! Each step advances the finite-queue diffusion by one mean interarrival
//! time under frozen coefficients, reads the mean queue off the evolved
//! density, consults the AQM controller, draws the loss decision, and
//! updates the source intensity: additive increase without a loss, halving
//! on a loss (a stripped-down TCP NewReno window rule applied to the rate).

use std::collections::VecDeque;

use rand::Rng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::controllers::AqmConfig;
use crate::diffusion::gg1n::{default_time_step, evolve_last, TwoBarrierModel};
use crate::diffusion::{InitialCondition, TrafficMoments};
use crate::ensemble::{self, Ensemble, ReplicationOutput};
use crate::error::{Error, Result};

/// Traffic source with additive-increase/halve-on-loss dynamics and an
/// optional feedback delay before decisions take effect.
#[derive(Debug, Clone)]
pub struct SourceState {
    pub lambda: f64,
    pub zeta: f64,
    pub lambda_min: f64,
    pub lambda_max: f64,
    pending: VecDeque<(f64, bool)>,
}

impl SourceState {
    pub fn new(lambda0: f64, zeta: f64, lambda_min: f64, lambda_max: f64) -> Self {
        Self {
            lambda: lambda0.clamp(lambda_min, lambda_max),
            zeta,
            lambda_min,
            lambda_max,
            pending: VecDeque::new(),
        }
    }

    /// Applies one decision immediately: halve on loss, add `zeta` otherwise.
    pub fn apply_decision(&mut self, loss: bool) {
        self.lambda = if loss {
            (self.lambda / 2.0).max(self.lambda_min)
        } else {
            (self.lambda + self.zeta).min(self.lambda_max)
        };
    }

    /// Queues a decision that becomes effective at `due`.
    pub fn record_decision(&mut self, due: f64, loss: bool) {
        self.pending.push_back((due, loss));
    }

    /// Applies every queued decision whose due time has arrived, in order.
    pub fn apply_due(&mut self, now: f64) {
        while let Some(&(due, loss)) = self.pending.front() {
            if due > now {
                break;
            }
            self.pending.pop_front();
            self.apply_decision(loss);
        }
    }
}

/// One step of either model: the time series behind the transient plots.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub t: f64,
    /// Diffusion mean queue, or the observed queue length in the DES.
    pub mean_queue: f64,
    /// Source intensity in effect during the step.
    pub lambda: f64,
    pub drop_prob: f64,
    pub loss: bool,
    pub p0: f64,
    pub p_n: f64,
}

/// Full configuration of one model run (shared by the mixed model and the
/// DES; the diffusion-only fields are ignored by the DES).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MixedModelConfig {
    pub capacity: usize,
    pub mu: f64,
    pub c2_service: f64,
    pub c2_arrival: f64,
    pub controller: AqmConfig,
    pub lambda0: f64,
    /// Additive increase per no-loss decision.
    pub zeta: f64,
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub feedback_delay: f64,
    /// Whether a tail drop at a full buffer halves the source like an AQM
    /// drop (DES only; the diffusion path has no per-packet overflow event,
    /// its source reacts to AQM decisions alone).
    pub overflow_halves: bool,
    pub horizon: f64,
    /// Fraction of the horizon excluded from long-run averages.
    pub warmup_fraction: f64,
    /// Common grid spacing for ensemble averaging and CSV output.
    pub report_dt: f64,
    /// Master seed; replication i uses stream i of the seeded generator.
    pub seed: u64,
    /// Upper bound on the Volterra time step.
    pub time_step_cap: f64,
    pub x_resolution: usize,
    pub series_cutoff: usize,
}

impl MixedModelConfig {
    /// Queue and source defaults of the reference experiments: capacity 30,
    /// unit exponential service, Poisson arrivals, lambda starting at 0.5
    /// with increase 0.01 per decision, capped at twice the service rate.
    pub fn new(controller: AqmConfig) -> Self {
        Self {
            capacity: 30,
            mu: 1.0,
            c2_service: 1.0,
            c2_arrival: 1.0,
            controller,
            lambda0: 0.5,
            zeta: 0.01,
            lambda_min: 0.05,
            lambda_max: 2.0,
            feedback_delay: 0.0,
            overflow_halves: false,
            horizon: 400.0,
            warmup_fraction: 0.2,
            report_dt: 1.0,
            seed: 0,
            time_step_cap: 0.05,
            x_resolution: 10,
            series_cutoff: 40,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.controller.validate()?;
        let positive: [(&'static str, f64); 6] = [
            ("mu", self.mu),
            ("lambda0", self.lambda0),
            ("lambda_min", self.lambda_min),
            ("horizon", self.horizon),
            ("report_dt", self.report_dt),
            ("time_step_cap", self.time_step_cap),
        ];
        for (field, value) in positive {
            if !(value > 0.0 && value.is_finite()) {
                return Err(Error::InvalidParameter {
                    field,
                    reason: format!("must be positive, got {value}"),
                });
            }
        }
        if self.capacity < 2 {
            return Err(Error::InvalidParameter {
                field: "capacity",
                reason: "must be at least 2".into(),
            });
        }
        if self.lambda_min > self.lambda_max || self.lambda0 > self.lambda_max {
            return Err(Error::InvalidParameter {
                field: "lambda bounds",
                reason: "need lambda_min <= lambda0 <= lambda_max".into(),
            });
        }
        // zeta = 0 turns the source static, which the DES oracle checks
        // against closed-form queue results.
        if self.zeta < 0.0 {
            return Err(Error::InvalidParameter {
                field: "zeta",
                reason: "additive increase must be nonnegative".into(),
            });
        }
        if !(0.0..1.0).contains(&self.warmup_fraction) {
            return Err(Error::InvalidParameter {
                field: "warmup_fraction",
                reason: "must be within [0, 1)".into(),
            });
        }
        if self.c2_arrival < 0.0 || self.c2_service < 0.0 {
            return Err(Error::InvalidParameter {
                field: "c2",
                reason: "squared coefficients of variation must be nonnegative".into(),
            });
        }
        if self.feedback_delay < 0.0 {
            return Err(Error::InvalidParameter {
                field: "feedback_delay",
                reason: "must be nonnegative".into(),
            });
        }
        Ok(())
    }

    fn source(&self) -> SourceState {
        SourceState::new(self.lambda0, self.zeta, self.lambda_min, self.lambda_max)
    }
}

/// Runs one mixed-model replication with the config's own seed.
///
/// Starts from an empty queue. Per step: the step length is the mean
/// interarrival time `1/lambda`; the diffusion coefficients are recomputed
/// from the current moments; the two-barrier density evolves from the
/// previous end state; the controller sees the resulting mean queue; a
/// uniform draw against the drop probability decides the loss; the decision
/// reaches the source after the configured delay. Deterministic per seed.
pub fn run_replication(config: &MixedModelConfig) -> Result<Vec<StepRecord>> {
    let mut rng = ensemble::replication_rng(config.seed, 0);
    run_replication_with_rng(config, &mut rng)
}

#[doc(hidden)]
pub fn run_replication_with_rng(
    config: &MixedModelConfig,
    rng: &mut ChaCha12Rng,
) -> Result<Vec<StepRecord>> {
    config.validate()?;
    let mut controller = config.controller.build();
    let mut source = config.source();
    let mut state = InitialCondition::empty();
    let mut records = Vec::new();
    records.push(StepRecord {
        t: 0.0,
        mean_queue: 0.0,
        lambda: source.lambda,
        drop_prob: 0.0,
        loss: false,
        p0: 1.0,
        p_n: 0.0,
    });

    let mut t = 0.0;
    while t < config.horizon - 1e-9 {
        let lambda = source.lambda;
        let dt = (1.0 / lambda).min(config.horizon - t);
        let moments = TrafficMoments::new(lambda, config.mu, config.c2_arrival, config.c2_service)?;
        let model = TwoBarrierModel {
            series_cutoff: config.series_cutoff,
            ..TwoBarrierModel::new(config.capacity, &moments)
        }
        .with_time_step(default_time_step(&moments, config.time_step_cap))
        .with_resolution(config.x_resolution);

        let density = evolve_last(&model, &state, dt)?;
        let mean_queue = density.mean_queue();
        let drop_prob = controller.drop_prob(mean_queue);
        let loss = rng.random::<f64>() < drop_prob;
        source.record_decision(t + config.feedback_delay, loss);
        source.apply_due(t);

        records.push(StepRecord {
            t: t + dt,
            mean_queue,
            lambda,
            drop_prob,
            loss,
            p0: density.p0,
            p_n: density.p_n,
        });
        state = InitialCondition::from_density(&density);
        t += dt;
    }
    Ok(records)
}

/// Runs `replications` independently seeded replications and averages them
/// on the common report grid.
pub fn run_ensemble(config: &MixedModelConfig, replications: usize) -> Result<Ensemble> {
    if replications < 1 {
        return Err(Error::InvalidParameter {
            field: "replications",
            reason: "must be at least 1".into(),
        });
    }
    config.validate()?;
    ensemble::run(replications, config.horizon, config.report_dt, |index| {
        let mut rng = ensemble::replication_rng(config.seed, index);
        let records = run_replication_with_rng(config, &mut rng)?;
        Ok(ReplicationOutput::from_records(
            records,
            config.horizon,
            config.warmup_fraction,
        ))
    })
}
