//! Discrete-event simulation of the same queue/AQM/source system, used to
//! cross-validate the diffusion path.
//!
//! Single exponential-stage server, finite room for `capacity` packets in
//! the system, AQM consulted on every arrival, tail drop when the buffer is
//! full (both count as loss signals to the source). Interarrival and service
//! times come from two-moment-matched samplers.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, VecDeque};

use rand::Rng;
use rand_chacha::ChaCha12Rng;

use crate::ensemble::{self, Ensemble, ReplicationOutput};
use crate::error::{Error, Result};
use crate::feedback::{MixedModelConfig, SourceState, StepRecord};

// ---------------------------------------------------------------------------
// Moment-matched samplers
// ---------------------------------------------------------------------------

/// Distribution family fitted to a mean and squared coefficient of
/// variation. The shape depends only on c2; the rate scales every draw, so
/// the same process serves a source whose intensity changes over time.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Family {
    /// c2 = 0.
    Deterministic,
    /// c2 = 1.
    Exponential,
    /// c2 < 1: mixture of Erlang(k-1) and Erlang(k) with common stage rate
    /// (k - mix) * rate, taking the shorter branch with probability `mix`.
    ErlangMix { stages: u32, mix: f64 },
    /// c2 > 1: balanced-means two-phase hyperexponential.
    Hyper2 { p1: f64 },
}

/// Positive random variates with mean `1/rate` and the configured squared
/// coefficient of variation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArrivalProcess {
    c2: f64,
    family: Family,
}

impl ArrivalProcess {
    /// Fits the family to the squared coefficient of variation.
    pub fn fit(c2: f64) -> Result<Self> {
        if !(c2.is_finite() && c2 >= 0.0) {
            return Err(Error::InvalidParameter {
                field: "c2",
                reason: format!("must be finite and nonnegative, got {c2}"),
            });
        }
        let family = if c2 < 1e-9 {
            Family::Deterministic
        } else if (c2 - 1.0).abs() < 1e-9 {
            Family::Exponential
        } else if c2 < 1.0 {
            let stages = (1.0 / c2).ceil() as u32;
            let k = stages as f64;
            let mix = (k * c2 - (k * (1.0 + c2) - k * k * c2).sqrt()) / (1.0 + c2);
            Family::ErlangMix { stages, mix }
        } else {
            let p1 = 0.5 * (1.0 + ((c2 - 1.0) / (c2 + 1.0)).sqrt());
            Family::Hyper2 { p1 }
        };
        Ok(Self { c2, family })
    }

    pub fn c2(&self) -> f64 {
        self.c2
    }

    /// Draws one variate with mean `1/rate`.
    pub fn sample<R: Rng>(&self, rate: f64, rng: &mut R) -> f64 {
        debug_assert!(rate > 0.0);
        match self.family {
            Family::Deterministic => 1.0 / rate,
            Family::Exponential => exp_draw(rate, rng),
            Family::ErlangMix { stages, mix } => {
                let branch: f64 = rng.random();
                let k = if branch < mix { stages - 1 } else { stages };
                let stage_rate = (stages as f64 - mix) * rate;
                (0..k).map(|_| exp_draw(stage_rate, rng)).sum()
            }
            Family::Hyper2 { p1 } => {
                let branch: f64 = rng.random();
                if branch < p1 {
                    exp_draw(2.0 * p1 * rate, rng)
                } else {
                    exp_draw(2.0 * (1.0 - p1) * rate, rng)
                }
            }
        }
    }
}

fn exp_draw<R: Rng>(rate: f64, rng: &mut R) -> f64 {
    let u: f64 = rng.random();
    -(1.0 - u).ln() / rate
}

/// Draws one interarrival time with mean `1/rate` from the fitted family.
pub fn sample_interarrival<R: Rng>(process: &ArrivalProcess, rate: f64, rng: &mut R) -> f64 {
    process.sample(rate, rng)
}

// ---------------------------------------------------------------------------
// Event queue
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum EventKind {
    Departure,
    Arrival,
    Feedback { loss: bool },
}

impl EventKind {
    /// Tie-break rank at equal times: departures first, feedback last.
    fn rank(self) -> u8 {
        match self {
            EventKind::Departure => 0,
            EventKind::Arrival => 1,
            EventKind::Feedback { .. } => 2,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Event {
    time: f64,
    kind: EventKind,
    seq: u64,
}

impl PartialEq for Event {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Event {}
impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Event {
    // Reversed so the max-heap pops the earliest event.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .time
            .total_cmp(&self.time)
            .then_with(|| other.kind.rank().cmp(&self.kind.rank()))
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

// ---------------------------------------------------------------------------
// Simulation
// ---------------------------------------------------------------------------

/// Aggregate statistics of one simulation run.
#[derive(Debug, Clone, PartialEq)]
pub struct QueueStats {
    /// Time-weighted mean number in system over the whole horizon.
    pub mean_queue: f64,
    /// Time-weighted mean over the post-warmup window.
    pub window_mean: f64,
    pub aqm_drops: u64,
    pub overflow_drops: u64,
    pub departures: u64,
    pub arrivals: u64,
    /// Departures per unit time.
    pub throughput: f64,
    /// Mean sojourn time of departed packets.
    pub mean_response: f64,
}

/// Runs one DES replication with the config's own seed. Returns the
/// per-arrival decision records and the time-weighted statistics.
pub fn run_des(config: &MixedModelConfig) -> Result<(Vec<StepRecord>, QueueStats)> {
    let mut rng = ensemble::replication_rng(config.seed, 0);
    run_des_with_rng(config, &mut rng)
}

fn run_des_with_rng(
    config: &MixedModelConfig,
    rng: &mut ChaCha12Rng,
) -> Result<(Vec<StepRecord>, QueueStats)> {
    config.validate()?;
    let arrivals_dist = ArrivalProcess::fit(config.c2_arrival)?;
    let service_dist = ArrivalProcess::fit(config.c2_service)?;
    let mut controller = config.controller.build();
    let mut source = SourceState::new(
        config.lambda0,
        config.zeta,
        config.lambda_min,
        config.lambda_max,
    );

    let horizon = config.horizon;
    let window_start = config.warmup_fraction * horizon;
    let capacity = config.capacity;

    let mut heap = BinaryHeap::new();
    let mut seq = 0u64;
    let push = |heap: &mut BinaryHeap<Event>, seq: &mut u64, time: f64, kind: EventKind| {
        *seq += 1;
        heap.push(Event {
            time,
            kind,
            seq: *seq,
        });
    };

    let mut t = 0.0;
    let mut n: usize = 0;
    let mut area = 0.0;
    let mut window_area = 0.0;
    let mut in_system: VecDeque<f64> = VecDeque::new();
    let mut aqm_drops = 0u64;
    let mut overflow_drops = 0u64;
    let mut departures = 0u64;
    let mut arrivals = 0u64;
    let mut response_sum = 0.0;
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

    let first = arrivals_dist.sample(source.lambda, rng);
    push(&mut heap, &mut seq, first, EventKind::Arrival);

    while let Some(event) = heap.pop() {
        if event.time > horizon {
            break;
        }
        debug_assert!(event.time >= t, "event causality violated");
        // Time-weighted integration, split at the warmup boundary.
        let lo = t;
        let hi = event.time;
        area += n as f64 * (hi - lo);
        if hi > window_start {
            window_area += n as f64 * (hi - lo.max(window_start));
        }
        t = event.time;

        match event.kind {
            EventKind::Departure => {
                debug_assert!(n > 0, "departure from an empty system");
                n -= 1;
                departures += 1;
                if let Some(arrived) = in_system.pop_front() {
                    response_sum += t - arrived;
                }
                if n > 0 {
                    let service = service_dist.sample(config.mu, rng);
                    push(&mut heap, &mut seq, t + service, EventKind::Departure);
                }
            }
            EventKind::Arrival => {
                arrivals += 1;
                let n_before = n;
                let drop_prob = controller.drop_prob(n_before as f64);
                let u: f64 = rng.random();
                let aqm_loss = u < drop_prob;
                let loss = if aqm_loss {
                    aqm_drops += 1;
                    true
                } else if n_before >= capacity {
                    overflow_drops += 1;
                    true
                } else {
                    n += 1;
                    in_system.push_back(t);
                    if n == 1 {
                        let service = service_dist.sample(config.mu, rng);
                        push(&mut heap, &mut seq, t + service, EventKind::Departure);
                    }
                    false
                };
                // The source reacts to the AQM decision; whether a tail drop
                // also halves it is configurable.
                let fed_back = if config.overflow_halves { loss } else { aqm_loss };
                push(
                    &mut heap,
                    &mut seq,
                    t + config.feedback_delay,
                    EventKind::Feedback { loss: fed_back },
                );
                records.push(StepRecord {
                    t,
                    mean_queue: n_before as f64,
                    lambda: source.lambda,
                    drop_prob,
                    loss,
                    p0: f64::from(n_before == 0),
                    p_n: f64::from(n_before == capacity),
                });
                // The next interarrival uses the intensity before any
                // feedback scheduled at this same instant lands.
                let gap = arrivals_dist.sample(source.lambda, rng);
                push(&mut heap, &mut seq, t + gap, EventKind::Arrival);
            }
            EventKind::Feedback { loss } => source.apply_decision(loss),
        }
    }

    area += n as f64 * (horizon - t);
    if horizon > window_start {
        window_area += n as f64 * (horizon - t.max(window_start));
    }

    let stats = QueueStats {
        mean_queue: area / horizon,
        window_mean: window_area / (horizon - window_start),
        aqm_drops,
        overflow_drops,
        departures,
        arrivals,
        throughput: departures as f64 / horizon,
        mean_response: if departures > 0 {
            response_sum / departures as f64
        } else {
            0.0
        },
    };
    Ok((records, stats))
}

/// Ensemble of DES replications on the common report grid. The long-run
/// mean of each replication is its exact time-weighted window mean.
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
        let (records, stats) = run_des_with_rng(config, &mut rng)?;
        let total_losses = stats.aqm_drops + stats.overflow_drops;
        let final_lambda = records.last().map(|r| r.lambda).unwrap_or(0.0);
        Ok(ReplicationOutput {
            records,
            long_run_mean: stats.window_mean,
            total_losses,
            final_lambda,
        })
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::controllers::AqmConfig;

    fn batch_moments(samples: &[f64], batches: usize) -> (Vec<f64>, Vec<f64>) {
        let per = samples.len() / batches;
        let mut means = Vec::new();
        let mut c2s = Vec::new();
        for b in 0..batches {
            let chunk = &samples[b * per..(b + 1) * per];
            let m = chunk.iter().sum::<f64>() / per as f64;
            let v = chunk.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (per - 1) as f64;
            means.push(m);
            c2s.push(v / (m * m));
        }
        (means, c2s)
    }

    fn assert_within_3_sigma(estimates: &[f64], target: f64, what: &str) {
        let (mean, stderr) = crate::ensemble::mean_and_stderr(estimates);
        assert!(
            (mean - target).abs() <= 3.0 * stderr.max(1e-6),
            "{what}: {mean} vs {target} (stderr {stderr})"
        );
    }

    #[test]
    fn samplers_match_requested_moments() {
        let mut rng = ensemble::replication_rng(42, 0);
        for (c2, rate) in [(1.0, 0.7), (0.5, 1.3), (0.3, 1.0), (4.0, 0.9)] {
            let process = ArrivalProcess::fit(c2).unwrap();
            let samples: Vec<f64> = (0..100_000).map(|_| process.sample(rate, &mut rng)).collect();
            let (means, c2s) = batch_moments(&samples, 20);
            assert_within_3_sigma(&means, 1.0 / rate, &format!("mean at c2={c2}"));
            assert_within_3_sigma(&c2s, c2, &format!("c2={c2}"));
            assert!(samples.iter().all(|&x| x > 0.0));
        }
    }

    #[test]
    fn erlang_two_fit_for_half_variance() {
        // c2 = 0.5 reduces to a pure Erlang-2 with stage rate 2 lambda.
        let process = ArrivalProcess::fit(0.5).unwrap();
        assert_eq!(
            process.family,
            Family::ErlangMix { stages: 2, mix: 0.0 }
        );
    }

    #[test]
    fn deterministic_c2_zero() {
        let process = ArrivalProcess::fit(0.0).unwrap();
        let mut rng = ensemble::replication_rng(1, 0);
        assert_eq!(process.sample(4.0, &mut rng), 0.25);
    }

    fn static_mm1_config(lambda0: f64, horizon: f64) -> MixedModelConfig {
        // Constant-rate source: zero drop probability and zero increase.
        let mut config = MixedModelConfig::new(AqmConfig::Constant(0.0));
        config.lambda0 = lambda0;
        config.zeta = 0.0;
        config.horizon = horizon;
        config
    }

    #[test]
    fn matches_mm1n_closed_form_without_aqm() {
        let mut config = static_mm1_config(0.5, 400.0);
        let mut means = Vec::new();
        for seed in 0..20 {
            config.seed = seed;
            let (_, stats) = run_des(&config).unwrap();
            means.push(stats.window_mean);
        }
        // M/M/1/30 stationary mean at rho = 0.5 (the finite-N correction is
        // far below the statistical noise).
        let rho: f64 = 0.5;
        let n = 30;
        let denom = 1.0 - rho.powi(n + 1);
        let exact = rho / (1.0 - rho) - (n + 1) as f64 * rho.powi(n + 1) / denom;
        assert_within_3_sigma(&means, exact, "M/M/1/30 mean");
    }

    #[test]
    fn littles_law_holds_in_steady_state() {
        // Long horizon keeps the end-of-run truncation bias (packets still
        // in system contribute queue area but no response time) below noise.
        let mut config = static_mm1_config(0.7, 6000.0);
        let mut gaps = Vec::new();
        for seed in 100..120 {
            config.seed = seed;
            let (_, stats) = run_des(&config).unwrap();
            gaps.push(stats.mean_queue - stats.throughput * stats.mean_response);
        }
        assert_within_3_sigma(&gaps, 0.0, "Little's law gap");
    }

    #[test]
    fn constant_full_drop_collapses_the_source() {
        let config = MixedModelConfig {
            horizon: 300.0,
            ..MixedModelConfig::new(AqmConfig::Constant(1.0))
        };
        let (records, stats) = run_des(&config).unwrap();
        assert_eq!(stats.departures, 0);
        assert_eq!(stats.mean_queue, 0.0);
        assert_eq!(stats.aqm_drops, stats.arrivals);
        let last = records.last().unwrap();
        assert_eq!(last.lambda, config.lambda_min);
    }

    #[test]
    fn identical_seed_gives_identical_trace() {
        let config = MixedModelConfig {
            horizon: 80.0,
            seed: 9,
            ..MixedModelConfig::new(AqmConfig::Red(crate::controllers::RedConfig {
                min_th: 2.0,
                max_th: 6.0,
                p_max: 0.2,
                ewma_weight: 0.002,
            }))
        };
        let (ra, sa) = run_des(&config).unwrap();
        let (rb, sb) = run_des(&config).unwrap();
        assert_eq!(ra, rb);
        assert_eq!(sa, sb);
    }

    #[test]
    fn event_times_are_nondecreasing_in_records() {
        let config = MixedModelConfig {
            horizon: 60.0,
            seed: 3,
            ..MixedModelConfig::new(AqmConfig::Constant(0.2))
        };
        let (records, _) = run_des(&config).unwrap();
        for pair in records.windows(2) {
            assert!(pair[1].t >= pair[0].t);
        }
    }

    #[test]
    fn ensemble_extension_keeps_prefix() {
        let config = MixedModelConfig {
            horizon: 50.0,
            seed: 11,
            ..MixedModelConfig::new(AqmConfig::Constant(0.1))
        };
        let a = run_ensemble(&config, 3).unwrap();
        let b = run_ensemble(&config, 6).unwrap();
        assert_eq!(&b.long_run_means[..3], &a.long_run_means[..]);
    }
}
