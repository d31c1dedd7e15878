//! The five pitch trackers under evaluation, behind one dispatch function.
//!
//! All trackers share the frame grid ([`crate::signal::FrameGrid::cover`]),
//! produce one [`Frame`](crate::contour::Frame) per grid point, and read
//! their tuning from a common [`TrackerConfig`]; fields a given tracker has
//! no use for are simply ignored by it.

mod acf;
mod nccf;
mod srh;
mod yin;

use serde::{Deserialize, Serialize};

use crate::contour::PitchContour;
use crate::error::{Error, Result};
use crate::signal::{FrameGrid, Signal};

/// Which tracker to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrackerId {
    /// Cumulative-mean-normalized difference function with an absolute
    /// dip threshold.
    Yin,
    /// Windowed autocorrelation normalized by the window's own
    /// autocorrelation, best-peak picking.
    Acf,
    /// Normalized cross-correlation with dynamic-programming selection
    /// over per-frame candidates.
    Nccf,
    /// Summation of residual harmonics: harmonic scoring of the spectrum
    /// of the linear-prediction residual.
    Srh,
    /// Summation of spectral harmonics: the same scoring on the plain
    /// signal spectrum (no residual).
    Ssh,
}

impl TrackerId {
    pub fn all() -> [TrackerId; 5] {
        [
            TrackerId::Yin,
            TrackerId::Acf,
            TrackerId::Nccf,
            TrackerId::Srh,
            TrackerId::Ssh,
        ]
    }

    pub fn name(self) -> &'static str {
        match self {
            TrackerId::Yin => "yin",
            TrackerId::Acf => "acf",
            TrackerId::Nccf => "nccf",
            TrackerId::Srh => "srh",
            TrackerId::Ssh => "ssh",
        }
    }

    pub fn from_name(name: &str) -> Result<TrackerId> {
        match name.to_ascii_lowercase().as_str() {
            "yin" => Ok(TrackerId::Yin),
            "acf" => Ok(TrackerId::Acf),
            "nccf" => Ok(TrackerId::Nccf),
            "srh" => Ok(TrackerId::Srh),
            "ssh" => Ok(TrackerId::Ssh),
            other => Err(Error::Config(format!(
                "unknown tracker '{other}' (expected yin, acf, nccf, srh, or ssh)"
            ))),
        }
    }

    /// Stock configuration: the tracker's customary analysis window and
    /// voicing threshold, shared search range and hop.
    pub fn default_config(self) -> TrackerConfig {
        let (window_length, voicing_threshold) = match self {
            TrackerId::Yin => (0.016, 0.1),
            TrackerId::Acf => (0.040, 0.45),
            TrackerId::Nccf => (0.040, 0.30),
            TrackerId::Srh => (0.100, 0.07),
            TrackerId::Ssh => (0.100, 0.07),
        };
        TrackerConfig {
            window_length,
            voicing_threshold,
            ..TrackerConfig::base()
        }
    }

    /// Configuration after per-tracker parameter search on the synthetic
    /// singing corpus (window length and voicing threshold only; everything
    /// else stays stock).
    pub fn optimized_config(self) -> TrackerConfig {
        let (window_length, voicing_threshold) = match self {
            TrackerId::Yin => (0.010, 0.1),
            TrackerId::Acf => (0.040, 0.25),
            TrackerId::Nccf => (0.040, 0.30),
            TrackerId::Srh => (0.125, 0.065),
            TrackerId::Ssh => (0.100, 0.095),
        };
        TrackerConfig {
            window_length,
            voicing_threshold,
            ..TrackerConfig::base()
        }
    }
}

impl std::fmt::Display for TrackerId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for TrackerId {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        TrackerId::from_name(s)
    }
}

/// Shared tracker tuning. The search range, hop, window and voicing
/// threshold apply to every tracker; the remaining fields are specific to
/// one family (`lpc_order`, `n_harmonics` to the harmonic-summation pair,
/// the cost and candidate fields to the dynamic-programming tracker).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackerConfig {
    /// Lowest F0 searched, Hz.
    pub f0_min: f64,
    /// Highest F0 searched, Hz.
    pub f0_max: f64,
    /// Frame hop, seconds.
    pub hop: f64,
    /// Analysis window length, seconds.
    pub window_length: f64,
    /// Voicing decision threshold; its meaning is per-tracker (difference
    /// dip depth, correlation peak height, or harmonic score).
    pub voicing_threshold: f64,
    /// Harmonics summed by the harmonic-summation trackers.
    pub n_harmonics: usize,
    /// Linear-prediction order for the residual tracker; `None` picks
    /// `2 + round(sample_rate / 1000)`. Order 0 leaves the signal as is.
    pub lpc_order: Option<usize>,
    /// Dynamic-programming cost per octave of pitch movement between
    /// consecutive voiced frames.
    pub octave_jump_cost: f64,
    /// Dynamic-programming cost of switching between voiced and unvoiced.
    pub voicing_switch_cost: f64,
    /// Candidate peaks kept per frame for the dynamic programming.
    pub max_candidates: usize,
}

impl TrackerConfig {
    /// Field values shared by every preset.
    fn base() -> TrackerConfig {
        TrackerConfig {
            f0_min: 60.0,
            f0_max: 1500.0,
            hop: 0.010,
            window_length: 0.040,
            voicing_threshold: 0.3,
            n_harmonics: 5,
            lpc_order: None,
            octave_jump_cost: 0.4,
            voicing_switch_cost: 0.2,
            max_candidates: 8,
        }
    }

    pub fn validate(&self, sample_rate: u32) -> Result<()> {
        if !(self.f0_min > 0.0) {
            return Err(Error::Config(format!(
                "f0_min must be positive, got {}",
                self.f0_min
            )));
        }
        if !(self.f0_max > self.f0_min) {
            return Err(Error::Config(format!(
                "f0_max ({}) must exceed f0_min ({})",
                self.f0_max, self.f0_min
            )));
        }
        let nyquist = sample_rate as f64 / 2.0;
        if self.f0_max > nyquist {
            return Err(Error::Config(format!(
                "f0_max {} Hz is above the Nyquist frequency {} Hz",
                self.f0_max, nyquist
            )));
        }
        if !(self.hop > 0.0) || !(self.window_length > 0.0) {
            return Err(Error::Config(format!(
                "hop ({}) and window_length ({}) must be positive",
                self.hop, self.window_length
            )));
        }
        if !(0.0..=1.5).contains(&self.voicing_threshold) {
            return Err(Error::Config(format!(
                "voicing_threshold {} outside [0, 1.5]",
                self.voicing_threshold
            )));
        }
        if self.n_harmonics == 0 || self.max_candidates == 0 {
            return Err(Error::Config(
                "n_harmonics and max_candidates must be at least 1".into(),
            ));
        }
        Ok(())
    }

    /// Longest searched lag in samples (the period of `f0_min`, rounded up).
    pub(crate) fn max_lag(&self, sample_rate: u32) -> usize {
        (sample_rate as f64 / self.f0_min).ceil() as usize
    }

    /// Shortest searched lag in samples, never below 2.
    pub(crate) fn min_lag(&self, sample_rate: u32) -> usize {
        ((sample_rate as f64 / self.f0_max).floor() as usize).max(2)
    }
}

/// Strength of the lag-domain candidate-ranking octave preference, per
/// octave of pitch. Correlation trackers tie at every multiple of the
/// true period; preferring the higher frequency breaks those ties without
/// overriding any honest score difference larger than a percent per
/// octave.
pub(crate) const OCTAVE_BIAS: f64 = 0.01;

/// The harmonic-summation counterpart, pointing the other way: summation
/// scores tie at pitch multiples (a whitened comb scores the same at the
/// pitch and at its odd multiples), so the preference runs downward. It
/// must stay below the sub-octave margin of a soft high voice — under a
/// percent of the spectrum norm — which is why the fundamental-support
/// term below carries most of the disambiguation.
pub(crate) const SUMMATION_BIAS: f64 = 0.001;

/// Weight of the fundamental-bin amplitude in the summation trackers'
/// argmax ranking. Both degenerate competitors of a true pitch — its
/// sub-octave and, on a flat comb, its odd multiples — have an empty or
/// shared fundamental bin, so a small reward for genuine energy at the
/// candidate frequency itself resolves near-ties the raw score cannot.
pub(crate) const FUNDAMENTAL_WEIGHT: f64 = 0.05;

/// Amplitude below which a frame cannot be voiced: 100 dB under the
/// take's peak. Periodicity scores are normalized and therefore
/// scale-free, so without an absolute floor the ring-out of a filter — a
/// decaying exponential, which correlates perfectly with itself at every
/// lag — would keep scoring as strongly periodic long after it faded
/// below any noise floor.
pub(super) fn silence_floor(signal: &Signal) -> f64 {
    1e-5 * signal.samples.iter().fold(0.0f64, |m, &x| m.max(x.abs()))
}

pub(super) fn inaudible(buffer: &[f64], floor: f64) -> bool {
    buffer.iter().all(|x| x.abs() <= floor)
}

/// Run `tracker` over `signal` and return one frame per grid point of
/// the hop/window grid covering the whole signal.
pub fn track(signal: &Signal, tracker: TrackerId, config: &TrackerConfig) -> Result<PitchContour> {
    config.validate(signal.sample_rate)?;
    if signal.is_empty() {
        return Err(Error::Domain("cannot track an empty signal".into()));
    }
    let grid = FrameGrid::cover(signal.duration(), config.hop, config.window_length);
    match tracker {
        TrackerId::Yin => yin::track(signal, config, &grid),
        TrackerId::Acf => acf::track(signal, config, &grid),
        TrackerId::Nccf => nccf::track(signal, config, &grid),
        TrackerId::Srh => srh::track(signal, config, &grid, true),
        TrackerId::Ssh => srh::track(signal, config, &grid, false),
    }
}
