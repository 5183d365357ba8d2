//! Kinetic Monte Carlo photon streams and the detection chain.
//!
//! [`simulate_emissions`] runs an exact event-driven simulation of the
//! three-level continuous-time Markov chain (competing exponential clocks)
//! and records a time tag at every radiative 2→1 transition. The run is
//! split into fixed 1 ms windows, each driven by its own derived RNG
//! substream and started from a steady-state draw, so windows can be
//! simulated concurrently and the merged stream is bit-identical to the
//! sequential run for any worker count.
//!
//! [`detect`] models the optics and electronics: Bernoulli thinning at the
//! detection efficiency, superposed Poisson background and APD dark counts,
//! Gaussian timing jitter, and a final stable re-sort.

use crate::emitter::{steady_state, EmitterError, EmitterParams};
use crate::par;
use crate::rng::{substream, Domain};
use rand::Rng;
use rand_distr::{Distribution, Exp, Normal, Poisson};
use thiserror::Error;

/// Both APD dark-count streams end up in the combined pre-splitter record.
const DETECTOR_COUNT: f64 = 2.0;

/// Fixed simulation window; independent of thread count by construction.
pub const SEGMENT_NS: f64 = 1.0e6;

/// Resource guard on duration × total rate.
const MAX_EXPECTED_EVENTS: f64 = 1e10;

#[derive(Debug, Error, PartialEq)]
pub enum StreamError {
    #[error(transparent)]
    Emitter(#[from] EmitterError),
    #[error("invalid stream config: {0}")]
    InvalidConfig(&'static str),
    #[error("duration x total rate = {0:.3e} exceeds the 1e10 event guard")]
    TooManyEvents(f64),
    #[error("input stream is not sorted")]
    UnsortedInput,
}

/// Detection-chain parameters.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct StreamConfig {
    /// Acquisition window (ns).
    pub duration_ns: f64,
    /// Photon detection efficiency η ∈ [0, 1].
    pub detection_efficiency: f64,
    /// Stray-light background rate on the combined record (1/ns).
    pub background_rate: f64,
    /// Dark-count rate per detector (1/ns).
    pub dark_rate: f64,
    /// Gaussian timing jitter σ (ns).
    pub jitter_sigma_ns: f64,
    pub rng_seed: u64,
}

impl StreamConfig {
    pub fn validate(&self) -> Result<(), StreamError> {
        if !(self.duration_ns > 0.0) || !self.duration_ns.is_finite() {
            return Err(StreamError::InvalidConfig("duration_ns must be positive"));
        }
        if !(0.0..=1.0).contains(&self.detection_efficiency) {
            return Err(StreamError::InvalidConfig(
                "detection_efficiency must lie in [0, 1]",
            ));
        }
        for (ok, msg) in [
            (
                self.background_rate >= 0.0 && self.background_rate.is_finite(),
                "background_rate must be non-negative",
            ),
            (
                self.dark_rate >= 0.0 && self.dark_rate.is_finite(),
                "dark_rate must be non-negative",
            ),
            (
                self.jitter_sigma_ns >= 0.0 && self.jitter_sigma_ns.is_finite(),
                "jitter_sigma_ns must be non-negative",
            ),
        ] {
            if !ok {
                return Err(StreamError::InvalidConfig(msg));
            }
        }
        Ok(())
    }
}

/// Monotone photon-detection timestamps on one logical channel.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeTagStream {
    /// Sorted ascending, all within [0, duration].
    pub timestamps_ns: Vec<f64>,
    pub channel: u16,
    pub duration_ns: f64,
}

impl TimeTagStream {
    pub fn len(&self) -> usize {
        self.timestamps_ns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps_ns.is_empty()
    }

    pub fn is_sorted(&self) -> bool {
        self.timestamps_ns.windows(2).all(|w| w[0] <= w[1])
    }

    /// Mean detected rate (1/ns).
    pub fn mean_rate(&self) -> f64 {
        self.len() as f64 / self.duration_ns
    }
}

#[derive(Clone, Copy, PartialEq)]
enum Level {
    Ground,
    Excited,
    Shelf,
}

/// Simulate one window [t0, t1) from a steady-state initial draw, recording
/// radiative transitions.
fn simulate_window(
    params: &EmitterParams,
    t0: f64,
    t1: f64,
    rng: &mut rand_chacha::ChaCha8Rng,
) -> Vec<f64> {
    let (r, g, k23, k31) = (
        params.pump_rate,
        params.radiative_rate,
        params.shelving_rate,
        params.deshelving_rate,
    );
    let ss = steady_state(params).expect("validated params");
    let mut tags = Vec::new();
    let u: f64 = rng.random();
    let mut state = if u < ss.ground {
        Level::Ground
    } else if u < ss.ground + ss.excited {
        Level::Excited
    } else {
        Level::Shelf
    };
    let mut t = t0;
    loop {
        match state {
            Level::Ground => {
                if r == 0.0 {
                    return tags;
                }
                t += Exp::new(r).unwrap().sample(rng);
                state = Level::Excited;
            }
            Level::Excited => {
                let total = g + k23;
                t += Exp::new(total).unwrap().sample(rng);
                if t >= t1 {
                    return tags;
                }
                if rng.random::<f64>() < g / total {
                    tags.push(t);
                    state = Level::Ground;
                } else {
                    state = Level::Shelf;
                }
            }
            Level::Shelf => {
                if k31 == 0.0 {
                    return tags;
                }
                t += Exp::new(k31).unwrap().sample(rng);
                state = Level::Ground;
            }
        }
        if t >= t1 {
            return tags;
        }
    }
}

/// Exact stochastic simulation of the emitter; a tag per radiative 2→1
/// transition. Deterministic under `config.rng_seed` for any worker count.
pub fn simulate_emissions(
    params: &EmitterParams,
    config: &StreamConfig,
) -> Result<TimeTagStream, StreamError> {
    params.validate()?;
    config.validate()?;
    let total_rate = params.pump_rate
        + params.radiative_rate
        + params.shelving_rate
        + params.deshelving_rate;
    let expected = config.duration_ns * total_rate;
    if expected > MAX_EXPECTED_EVENTS {
        return Err(StreamError::TooManyEvents(expected));
    }
    let n_seg = (config.duration_ns / SEGMENT_NS).ceil().max(1.0) as usize;
    let seed = config.rng_seed;
    let duration = config.duration_ns;
    let windows = par::map_indices(n_seg, |i| {
        let t0 = i as f64 * SEGMENT_NS;
        let t1 = ((i + 1) as f64 * SEGMENT_NS).min(duration);
        let mut rng = substream(seed, Domain::Emission, i as u64);
        simulate_window(params, t0, t1, &mut rng)
    });
    let mut timestamps_ns = Vec::with_capacity(windows.iter().map(Vec::len).sum());
    for w in windows {
        timestamps_ns.extend(w);
    }
    Ok(TimeTagStream {
        timestamps_ns,
        channel: 0,
        duration_ns: duration,
    })
}

/// Detection chain: η-thinning, background + dark superposition, jitter,
/// stable re-sort. Tags jittered outside [0, duration] are dropped.
pub fn detect(emissions: &TimeTagStream, config: &StreamConfig) -> Result<TimeTagStream, StreamError> {
    config.validate()?;
    if !emissions.is_sorted() {
        return Err(StreamError::UnsortedInput);
    }
    let mut rng = substream(config.rng_seed, Domain::Detection, 0);
    let eta = config.detection_efficiency;
    let mut tags: Vec<f64> = if eta >= 1.0 {
        emissions.timestamps_ns.clone()
    } else if eta <= 0.0 {
        Vec::new()
    } else {
        emissions
            .timestamps_ns
            .iter()
            .copied()
            .filter(|_| rng.random::<f64>() < eta)
            .collect()
    };

    let noise_rate = config.background_rate + DETECTOR_COUNT * config.dark_rate;
    if noise_rate > 0.0 {
        let mean = noise_rate * config.duration_ns;
        let n = Poisson::new(mean)
            .map_err(|_| StreamError::InvalidConfig("noise rate overflow"))?
            .sample(&mut rng) as usize;
        tags.reserve(n);
        for _ in 0..n {
            tags.push(rng.random::<f64>() * config.duration_ns);
        }
    }

    if config.jitter_sigma_ns > 0.0 {
        let normal = Normal::new(0.0, config.jitter_sigma_ns).unwrap();
        for t in tags.iter_mut() {
            *t += normal.sample(&mut rng);
        }
        tags.retain(|t| (0.0..=config.duration_ns).contains(t));
    }

    tags.sort_by(f64::total_cmp);
    Ok(TimeTagStream {
        timestamps_ns: tags,
        channel: emissions.channel,
        duration_ns: config.duration_ns,
    })
}
