//! Hanbury Brown–Twiss measurement chain.
//!
//! A 50-50 (configurable) beamsplitter routes the detected stream onto two
//! APD channels, each with its own dead time. Coincidences are histogrammed
//! with a two-pointer sweep over all ordered pairs inside the correlation
//! window — O(N·k) rather than O(N²) — and normalized into a g²(τ) estimate
//! with raw Poisson error bars. A start-stop variant mirrors classic TAC
//! electronics.

use crate::par;
use crate::rng::{substream, Domain};
use crate::stream::TimeTagStream;
use rand::Rng;
use thiserror::Error;

/// Tags per parallel histogramming chunk; fixed so the merge order is
/// independent of the worker count (u64 addition is exact anyway).
const CORRELATE_CHUNK: usize = 1 << 16;

#[derive(Debug, Error, PartialEq)]
pub enum HbtError {
    #[error("split ratio must lie strictly inside (0, 1), got {0}")]
    InvalidSplitRatio(f64),
    #[error("dead time must be finite and non-negative, got {0}")]
    InvalidDeadTime(f64),
    #[error("bin width must be positive, got {0}")]
    NonPositiveBinWidth(f64),
    #[error("correlation window [{tau_min}, {tau_max}) is empty or non-finite")]
    BadWindow { tau_min: f64, tau_max: f64 },
    #[error("(tau_max - tau_min)/bin_width = {0} is not an integer bin count")]
    NonIntegralBinCount(f64),
    #[error("input stream is not sorted")]
    UnsortedInput,
    #[error("zero singles on channel {0}: cannot normalize")]
    ZeroSingles(u16),
    #[error("acquisition time must be positive")]
    ZeroAcquisition,
}

/// Beamsplitter plus per-APD dead time.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct DetectorModel {
    pub dead_time_ns: f64,
    /// Probability that a tag lands on channel 1.
    pub split_ratio: f64,
}

impl DetectorModel {
    pub fn validate(&self) -> Result<(), HbtError> {
        if !(self.split_ratio > 0.0 && self.split_ratio < 1.0) {
            return Err(HbtError::InvalidSplitRatio(self.split_ratio));
        }
        if !self.dead_time_ns.is_finite() || self.dead_time_ns < 0.0 {
            return Err(HbtError::InvalidDeadTime(self.dead_time_ns));
        }
        Ok(())
    }
}

/// Binned coincidence counts with the normalization metadata needed to turn
/// them into a g² estimate.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct CorrelationHistogram {
    pub bin_width_ns: f64,
    pub tau_min_ns: f64,
    pub tau_max_ns: f64,
    pub counts: Vec<u64>,
    /// Singles counts on each channel.
    pub n1: u64,
    pub n2: u64,
    pub acquisition_time_ns: f64,
}

impl CorrelationHistogram {
    pub fn n_bins(&self) -> usize {
        self.counts.len()
    }

    pub fn bin_centers(&self) -> Vec<f64> {
        (0..self.counts.len())
            .map(|k| self.tau_min_ns + (k as f64 + 0.5) * self.bin_width_ns)
            .collect()
    }

    /// Expected per-bin count for uncorrelated channels: n1·n2·w/T.
    pub fn uncorrelated_level(&self) -> f64 {
        self.n1 as f64 * self.n2 as f64 * self.bin_width_ns / self.acquisition_time_ns
    }
}

/// Normalized g²(τ) estimate with per-bin Poisson error bars.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct G2Estimate {
    pub tau_ns: Vec<f64>,
    pub g2: Vec<f64>,
    pub g2_err: Vec<f64>,
}

/// Assign each tag to channel 1 with probability `split_ratio`.
/// Deterministic under `seed`.
pub fn split(
    stream: &TimeTagStream,
    model: &DetectorModel,
    seed: u64,
) -> Result<(TimeTagStream, TimeTagStream), HbtError> {
    model.validate()?;
    if !stream.is_sorted() {
        return Err(HbtError::UnsortedInput);
    }
    let mut rng = substream(seed, Domain::Beamsplitter, 0);
    let mut ch1 = Vec::new();
    let mut ch2 = Vec::new();
    for &t in &stream.timestamps_ns {
        if rng.random::<f64>() < model.split_ratio {
            ch1.push(t);
        } else {
            ch2.push(t);
        }
    }
    Ok((
        TimeTagStream {
            timestamps_ns: ch1,
            channel: 1,
            duration_ns: stream.duration_ns,
        },
        TimeTagStream {
            timestamps_ns: ch2,
            channel: 2,
            duration_ns: stream.duration_ns,
        },
    ))
}

/// Greedy dead-time filter: an event is kept iff it falls at least
/// `dead_time_ns` after the last kept event.
pub fn apply_dead_time(stream: &TimeTagStream, dead_time_ns: f64) -> Result<TimeTagStream, HbtError> {
    if !dead_time_ns.is_finite() || dead_time_ns < 0.0 {
        return Err(HbtError::InvalidDeadTime(dead_time_ns));
    }
    if !stream.is_sorted() {
        return Err(HbtError::UnsortedInput);
    }
    if dead_time_ns == 0.0 {
        return Ok(stream.clone());
    }
    let mut kept = Vec::with_capacity(stream.len());
    let mut last = f64::NEG_INFINITY;
    for &t in &stream.timestamps_ns {
        if t - last >= dead_time_ns {
            kept.push(t);
            last = t;
        }
    }
    Ok(TimeTagStream {
        timestamps_ns: kept,
        channel: stream.channel,
        duration_ns: stream.duration_ns,
    })
}

fn window_params(
    bin_width_ns: f64,
    tau_min_ns: f64,
    tau_max_ns: f64,
) -> Result<usize, HbtError> {
    if !(bin_width_ns > 0.0) || !bin_width_ns.is_finite() {
        return Err(HbtError::NonPositiveBinWidth(bin_width_ns));
    }
    if !(tau_min_ns < tau_max_ns) || !tau_min_ns.is_finite() || !tau_max_ns.is_finite() {
        return Err(HbtError::BadWindow {
            tau_min: tau_min_ns,
            tau_max: tau_max_ns,
        });
    }
    let ratio = (tau_max_ns - tau_min_ns) / bin_width_ns;
    if (ratio - ratio.round()).abs() > 1e-9 * ratio.max(1.0) {
        return Err(HbtError::NonIntegralBinCount(ratio));
    }
    Ok(ratio.round() as usize)
}

/// Histogram t2 − t1 over all ordered pairs with the delay inside
/// [tau_min, tau_max), via a two-pointer sweep per chunk of channel 1.
pub fn cross_correlate(
    ch1: &TimeTagStream,
    ch2: &TimeTagStream,
    bin_width_ns: f64,
    tau_min_ns: f64,
    tau_max_ns: f64,
) -> Result<CorrelationHistogram, HbtError> {
    let n_bins = window_params(bin_width_ns, tau_min_ns, tau_max_ns)?;
    if !ch1.is_sorted() || !ch2.is_sorted() {
        return Err(HbtError::UnsortedInput);
    }
    let t2 = &ch2.timestamps_ns;
    let n_chunks = ch1.len().div_ceil(CORRELATE_CHUNK).max(1);
    let partials = par::map_indices(n_chunks, |c| {
        let chunk = &ch1.timestamps_ns[c * CORRELATE_CHUNK..((c + 1) * CORRELATE_CHUNK).min(ch1.len())];
        let mut hist = vec![0u64; n_bins];
        // First partner index for this chunk, then advance monotonically.
        let mut lo = t2.partition_point(|&t| t < chunk.first().copied().unwrap_or(0.0) + tau_min_ns);
        for &t1 in chunk {
            let window_start = t1 + tau_min_ns;
            let window_end = t1 + tau_max_ns;
            while lo < t2.len() && t2[lo] < window_start {
                lo += 1;
            }
            let mut j = lo;
            while j < t2.len() && t2[j] < window_end {
                let bin = ((t2[j] - t1 - tau_min_ns) / bin_width_ns) as usize;
                hist[bin.min(n_bins - 1)] += 1;
                j += 1;
            }
        }
        hist
    });
    let mut counts = vec![0u64; n_bins];
    for partial in partials {
        for (acc, v) in counts.iter_mut().zip(partial) {
            *acc += v;
        }
    }
    Ok(CorrelationHistogram {
        bin_width_ns,
        tau_min_ns,
        tau_max_ns,
        counts,
        n1: ch1.len() as u64,
        n2: ch2.len() as u64,
        acquisition_time_ns: ch1.duration_ns,
    })
}

/// Start-stop variant: each channel-1 tag is paired only with the first
/// channel-2 tag that follows it. Fidelity mode for classic HBT
/// electronics; biased at high rates, unlike [`cross_correlate`].
pub fn cross_correlate_start_stop(
    ch1: &TimeTagStream,
    ch2: &TimeTagStream,
    bin_width_ns: f64,
    tau_min_ns: f64,
    tau_max_ns: f64,
) -> Result<CorrelationHistogram, HbtError> {
    let n_bins = window_params(bin_width_ns, tau_min_ns, tau_max_ns)?;
    if !ch1.is_sorted() || !ch2.is_sorted() {
        return Err(HbtError::UnsortedInput);
    }
    let t2 = &ch2.timestamps_ns;
    let mut counts = vec![0u64; n_bins];
    let mut lo = 0usize;
    for &t1 in &ch1.timestamps_ns {
        while lo < t2.len() && t2[lo] <= t1 {
            lo += 1;
        }
        if lo == t2.len() {
            break;
        }
        let dt = t2[lo] - t1;
        if dt >= tau_min_ns && dt < tau_max_ns {
            let bin = ((dt - tau_min_ns) / bin_width_ns) as usize;
            counts[bin.min(n_bins - 1)] += 1;
        }
    }
    Ok(CorrelationHistogram {
        bin_width_ns,
        tau_min_ns,
        tau_max_ns,
        counts,
        n1: ch1.len() as u64,
        n2: ch2.len() as u64,
        acquisition_time_ns: ch1.duration_ns,
    })
}

/// g²_k = C_k·T/(n1·n2·w) with error bars √C_k scaled identically.
pub fn normalize(hist: &CorrelationHistogram) -> Result<G2Estimate, HbtError> {
    if hist.n1 == 0 {
        return Err(HbtError::ZeroSingles(1));
    }
    if hist.n2 == 0 {
        return Err(HbtError::ZeroSingles(2));
    }
    if !(hist.acquisition_time_ns > 0.0) {
        return Err(HbtError::ZeroAcquisition);
    }
    let scale = hist.acquisition_time_ns
        / (hist.n1 as f64 * hist.n2 as f64 * hist.bin_width_ns);
    let g2 = hist.counts.iter().map(|&c| c as f64 * scale).collect();
    let g2_err = hist
        .counts
        .iter()
        .map(|&c| (c as f64).sqrt() * scale)
        .collect();
    Ok(G2Estimate {
        tau_ns: hist.bin_centers(),
        g2,
        g2_err,
    })
}
