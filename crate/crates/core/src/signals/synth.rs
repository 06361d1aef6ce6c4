//! Synthetic guided-wave surrogates.
//!
//! Tone bursts are delayed, attenuated and overlaid with a scattered echo
//! whose gain stands in for damage magnitude. All randomness comes from a
//! ChaCha8 generator seeded with the user seed; each record draws from its
//! own stream, derived from (state index, realization index), so records can
//! be produced in any order with identical results.

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{SignalEnsemble, SignalRecord};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum WindowKind {
    #[default]
    Hamming,
    Hann,
}

impl WindowKind {
    /// Window value at normalized position `u` in [0, 1].
    pub fn at(self, u: f64) -> f64 {
        let c = (2.0 * PI * u).cos();
        match self {
            WindowKind::Hamming => 0.54 - 0.46 * c,
            WindowKind::Hann => 0.5 - 0.5 * c,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToneBurstSpec {
    pub cycles: u32,
    /// Hz.
    pub center_frequency: f64,
    /// Volts peak.
    pub amplitude: f64,
    #[serde(default)]
    pub window: WindowKind,
}

impl Default for ToneBurstSpec {
    fn default() -> Self {
        Self {
            cycles: 5,
            center_frequency: 250.0e3,
            amplitude: 45.0,
            window: WindowKind::Hamming,
        }
    }
}

impl ToneBurstSpec {
    fn validate(&self, sample_rate: f64) -> Result<()> {
        if self.cycles == 0 {
            return Err(Error::InvalidArgument("tone burst needs at least one cycle".into()));
        }
        if !(self.center_frequency > 0.0) {
            return Err(Error::InvalidArgument("center_frequency must be positive".into()));
        }
        if !(sample_rate >= 10.0 * self.center_frequency) {
            return Err(Error::InvalidArgument(format!(
                "sample_rate {sample_rate} Hz is below 10 × center_frequency ({} Hz)",
                self.center_frequency
            )));
        }
        Ok(())
    }

    /// Number of samples in the burst at `sample_rate`.
    pub fn len_at(&self, sample_rate: f64) -> usize {
        (self.cycles as f64 * sample_rate / self.center_frequency).round() as usize
    }

    /// Burst value at time `t` seconds after its first sample; zero outside
    /// the burst support.
    fn value_at(&self, t: f64, duration: f64) -> f64 {
        if t < 0.0 || t > duration {
            return 0.0;
        }
        self.amplitude * self.window.at(t / duration) * (2.0 * PI * self.center_frequency * t).sin()
    }
}

/// Windowed sine of `spec.cycles` periods sampled at `sample_rate`.
pub fn tone_burst(spec: &ToneBurstSpec, sample_rate: f64) -> Result<Vec<f64>> {
    spec.validate(sample_rate)?;
    let len = spec.len_at(sample_rate);
    let denom = (len - 1) as f64;
    Ok((0..len)
        .map(|n| {
            let w = spec.window.at(n as f64 / denom);
            spec.amplitude * w * (2.0 * PI * spec.center_frequency * n as f64 / sample_rate).sin()
        })
        .collect())
}

/// Propagation and damage surrogate for one structural state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticStateSpec {
    pub state_label: String,
    /// Arrival time of the direct wave, seconds.
    pub delay_s: f64,
    /// Amplitude factor of the direct wave, in (0, 1].
    pub attenuation: f64,
    /// Gain of the scattered echo; 0 for a pristine structure.
    pub scatter_gain: f64,
    /// Echo lag behind the direct wave, seconds.
    pub scatter_delay_s: f64,
    /// Standard deviation of additive white measurement noise, volts.
    pub noise_std: f64,
    /// Optional slower, lower-frequency packet (a dispersive mode) following
    /// the direct wave. It is scattered by the damage like the direct wave,
    /// with the echo gain scaled by `secondary.attenuation / attenuation`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub secondary: Option<SecondaryPacket>,
}

/// Second wave packet of a synthetic signal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SecondaryPacket {
    /// Hz.
    pub center_frequency: f64,
    /// Arrival time, seconds.
    pub delay_s: f64,
    pub attenuation: f64,
}

impl SyntheticStateSpec {
    /// The packets of this state as (burst, delay, direct gain, echo gain).
    fn packets(&self, burst: &ToneBurstSpec) -> Vec<(ToneBurstSpec, f64, f64, f64)> {
        let mut v = vec![(burst.clone(), self.delay_s, self.attenuation, self.scatter_gain)];
        if let Some(p) = self.secondary {
            let b = ToneBurstSpec {
                center_frequency: p.center_frequency,
                ..burst.clone()
            };
            v.push((b, p.delay_s, p.attenuation, self.scatter_gain * p.attenuation / self.attenuation));
        }
        v
    }

    fn validate(&self) -> Result<()> {
        if let Some(p) = self.secondary {
            if !(p.center_frequency > 0.0 && p.delay_s >= 0.0 && p.attenuation > 0.0 && p.attenuation <= 1.0) {
                return Err(Error::InvalidArgument(format!(
                    "state {}: invalid secondary packet",
                    self.state_label
                )));
            }
        }
        if !(self.attenuation > 0.0 && self.attenuation <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "state {}: attenuation must lie in (0, 1]",
                self.state_label
            )));
        }
        if !(self.noise_std >= 0.0) || !(self.scatter_gain >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "state {}: noise_std and scatter_gain must be non-negative",
                self.state_label
            )));
        }
        if self.delay_s < 0.0 || self.scatter_delay_s < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "state {}: delays must be non-negative",
                self.state_label
            )));
        }
        Ok(())
    }
}

fn record_rng(seed: u64, state_index: usize, realization: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((state_index as u64) << 32) | realization as u64);
    rng
}

fn add_noise(samples: &mut [f64], std: f64, rng: &mut ChaCha8Rng) -> Result<()> {
    if std == 0.0 {
        return Ok(());
    }
    let normal = Normal::new(0.0, std).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    for v in samples.iter_mut() {
        *v += normal.sample(rng);
    }
    Ok(())
}

/// Builds `states.len() × realizations` records of the tone-burst surrogate.
pub fn synthesize_ensemble(
    path_id: &str,
    burst: &ToneBurstSpec,
    states: &[SyntheticStateSpec],
    realizations: usize,
    length: usize,
    sample_rate: f64,
    seed: u64,
) -> Result<SignalEnsemble> {
    if realizations == 0 {
        return Err(Error::InvalidArgument("need at least one realization".into()));
    }
    if states.is_empty() {
        return Err(Error::InvalidArgument("need at least one state".into()));
    }
    for s in states {
        s.validate()?;
        for (b, delay, _, _) in s.packets(burst) {
            b.validate(sample_rate)?;
            let needed = b.len_at(sample_rate) + ((delay + s.scatter_delay_s) * sample_rate).ceil() as usize;
            if length < needed {
                return Err(Error::InvalidArgument(format!(
                    "length {length} is too short for state {} (needs {needed} samples)",
                    s.state_label
                )));
            }
        }
    }

    let mut records = Vec::with_capacity(states.len() * realizations);
    for (si, s) in states.iter().enumerate() {
        let mut clean = vec![0.0; length];
        for (b, delay, gain, echo_gain) in s.packets(burst) {
            let duration = (b.len_at(sample_rate) - 1) as f64 / sample_rate;
            for (n, v) in clean.iter_mut().enumerate() {
                let t = n as f64 / sample_rate;
                *v += gain * b.value_at(t - delay, duration);
                if echo_gain > 0.0 {
                    *v += echo_gain * b.value_at(t - delay - s.scatter_delay_s, duration);
                }
            }
        }
        for r in 0..realizations {
            let mut samples = clean.clone();
            let mut rng = record_rng(seed, si, r);
            add_noise(&mut samples, s.noise_std, &mut rng)?;
            records.push(SignalRecord::new(
                samples,
                sample_rate,
                path_id,
                s.state_label.clone(),
                r,
            )?);
        }
    }
    SignalEnsemble::new(records)
}

/// Runs the AR recursion `y[t] = −Σ a_i·y[t−i] + e[t]` from zero initial
/// conditions.
pub fn simulate_ar(theta: &[f64], innovations: &[f64]) -> Vec<f64> {
    let mut y = Vec::with_capacity(innovations.len());
    for (t, &e) in innovations.iter().enumerate() {
        let mut v = e;
        for (i, a) in theta.iter().enumerate() {
            if t > i {
                v -= a * y[t - 1 - i];
            }
        }
        y.push(v);
    }
    y
}

/// A stationary AR process standing in for one structural state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArStateSpec {
    pub state_label: String,
    pub theta: Vec<f64>,
    /// Innovation standard deviation.
    pub innovation_std: f64,
}

/// Number of leading samples discarded so the recursion forgets its zero
/// initial conditions.
const AR_BURN_IN: usize = 500;

/// Builds an ensemble of AR-process realizations, one stream per
/// (state, realization), discarding a burn-in prefix.
pub fn synthesize_ar_ensemble(
    path_id: &str,
    states: &[ArStateSpec],
    realizations: usize,
    length: usize,
    sample_rate: f64,
    seed: u64,
) -> Result<SignalEnsemble> {
    if realizations == 0 || states.is_empty() {
        return Err(Error::InvalidArgument(
            "need at least one state and one realization".into(),
        ));
    }
    let mut records = Vec::with_capacity(states.len() * realizations);
    for (si, s) in states.iter().enumerate() {
        if !(s.innovation_std > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "state {}: innovation_std must be positive",
                s.state_label
            )));
        }
        let normal = Normal::new(0.0, s.innovation_std)
            .map_err(|e| Error::InvalidArgument(e.to_string()))?;
        for r in 0..realizations {
            let mut rng = record_rng(seed, si, r);
            let e: Vec<f64> = (0..length + AR_BURN_IN)
                .map(|_| normal.sample(&mut rng))
                .collect();
            let y = simulate_ar(&s.theta, &e);
            records.push(SignalRecord::new(
                y[AR_BURN_IN..].to_vec(),
                sample_rate,
                path_id,
                s.state_label.clone(),
                r,
            )?);
        }
    }
    SignalEnsemble::new(records)
}
