//! Synthetic singing voice with sample-exact ground truth.
//!
//! A phase-accumulated glottal source (open-phase sine pulse, closed phase
//! silent) drives a cascade of four formant resonators; the same phase
//! clock produces a matching electroglottograph channel (contact bump on
//! the closed phase). Pitch follows a segment score (sustains, exponential
//! glissandi, vibrato) times a small deterministic micro-wobble whose
//! depth depends on voice register and laryngeal mechanism — low modal
//! voices waver more than high breathy ones, which is what gives the
//! corpus its graded difficulty. The ground-truth contour samples the
//! identical instantaneous-frequency formula the synthesis integrates, so
//! the reference is exact by construction, not measured.

use serde::{Deserialize, Serialize};

use crate::contour::{Frame, PitchContour};
use crate::error::{Error, Result};
use crate::signal::{FrameGrid, Signal};

/// Voice register: sets the admissible pitch range, the formant layout,
/// and (with [`Mechanism`]) the micro-wobble depth.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Register {
    Baritone,
    Countertenor,
    Soprano,
}

/// Laryngeal mechanism: M1 (modal; long closed phase, rich spectrum) or
/// M2 (light/falsetto-like; long open phase, steep rolloff).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mechanism {
    M1,
    M2,
}

impl Register {
    pub fn name(self) -> &'static str {
        match self {
            Register::Baritone => "baritone",
            Register::Countertenor => "countertenor",
            Register::Soprano => "soprano",
        }
    }

    /// Admissible nominal pitch range (Hz). Micro-modulation may exceed it
    /// by a few cents; segment targets may not.
    pub fn f0_range(self) -> (f64, f64) {
        match self {
            Register::Baritone => (87.31, 349.23),       // F2..F4
            Register::Countertenor => (174.61, 698.46),  // F3..F5
            Register::Soprano => (261.63, 1046.50),      // C4..C6
        }
    }

    /// Formant frequencies and bandwidths, Hz. The first formant sits
    /// outside the doubled-pitch span of the register's exercises, so the
    /// second harmonic never rides a resonance while the fundamental sits
    /// in a valley — a layout that would defeat any period detector.
    fn formants(self) -> [(f64, f64); 4] {
        match self {
            Register::Baritone => {
                [(650.0, 80.0), (1080.0, 90.0), (2650.0, 120.0), (3250.0, 130.0)]
            }
            Register::Countertenor => {
                [(350.0, 85.0), (1120.0, 95.0), (2750.0, 125.0), (3400.0, 135.0)]
            }
            Register::Soprano => {
                [(450.0, 90.0), (1150.0, 100.0), (2900.0, 130.0), (3900.0, 150.0)]
            }
        }
    }
}

impl Mechanism {
    pub fn name(self) -> &'static str {
        match self {
            Mechanism::M1 => "m1",
            Mechanism::M2 => "m2",
        }
    }

    /// Open quotient of the glottal cycle.
    fn open_quotient(self) -> f64 {
        match self {
            Mechanism::M1 => 0.55,
            Mechanism::M2 => 0.85,
        }
    }
}

/// Depth (cents) of the deterministic pitch micro-wobble. Heavier voices
/// and the heavier mechanism waver more; this is the main dial that
/// grades tracker difficulty across the corpus.
fn wobble_depth_cents(register: Register, mechanism: Mechanism) -> f64 {
    match (register, mechanism) {
        (Register::Baritone, Mechanism::M1) => 18.0,
        (Register::Baritone, Mechanism::M2) => 13.0,
        (Register::Countertenor, Mechanism::M1) => 9.0,
        (Register::Countertenor, Mechanism::M2) => 6.0,
        (Register::Soprano, Mechanism::M1) => 3.0,
        (Register::Soprano, Mechanism::M2) => 2.0,
    }
}

/// Four incommensurate sinusoids, unit depth, evaluated in cents. The
/// slow pair drifts within any analysis window and every tracker follows
/// it; the fast pair reverses faster than a window can resolve, so it
/// opens a genuine gap between the instantaneous truth and the windowed
/// estimate — the component that actually costs fine pitch accuracy.
fn wobble_cents(t: f64) -> f64 {
    let tau = 2.0 * std::f64::consts::PI * t;
    let slow = (9.1 * tau + 0.7).sin() + 0.6 * (13.7 * tau + 2.1).sin();
    let fast = (23.7 * tau + 1.3).sin() + 0.7 * (31.9 * tau + 4.2).sin();
    (0.8 * slow + fast) / 3.0
}

/// One score segment. Glissandi are exponential (straight lines in log
/// frequency), which is how trained voices actually slide.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Segment {
    Silence { duration: f64 },
    Sustain { duration: f64, f0: f64 },
    Glissando { duration: f64, f0_start: f64, f0_end: f64 },
    Vibrato { duration: f64, f0: f64, extent_cents: f64, rate_hz: f64 },
}

impl Segment {
    pub fn duration(&self) -> f64 {
        match *self {
            Segment::Silence { duration }
            | Segment::Sustain { duration, .. }
            | Segment::Glissando { duration, .. }
            | Segment::Vibrato { duration, .. } => duration,
        }
    }

    fn is_voiced(&self) -> bool {
        !matches!(self, Segment::Silence { .. })
    }

    /// Nominal frequency `local` seconds into the segment (no wobble).
    fn frequency(&self, local: f64) -> Option<f64> {
        match *self {
            Segment::Silence { .. } => None,
            Segment::Sustain { f0, .. } => Some(f0),
            Segment::Glissando { duration, f0_start, f0_end } => {
                Some(f0_start * (f0_end / f0_start).powf(local / duration))
            }
            Segment::Vibrato { f0, extent_cents, rate_hz, .. } => {
                let cents =
                    extent_cents * (2.0 * std::f64::consts::PI * rate_hz * local).sin();
                Some(f0 * 2f64.powf(cents / 1200.0))
            }
        }
    }
}

/// A complete voice part: who sings (register/mechanism) and what
/// (segments, optional amplitude envelope).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VoiceSpec {
    pub register: Register,
    pub mechanism: Mechanism,
    pub segments: Vec<Segment>,
    /// Piecewise-linear gain breakpoints `[time_s, gain]`; empty = unity.
    #[serde(default)]
    pub amplitude: Vec<(f64, f64)>,
    /// Scale on the micro-wobble depth (1 = the register's natural depth,
    /// 0 = mathematically exact pitch; useful for oracle tests).
    #[serde(default = "default_wobble_scale")]
    pub wobble_scale: f64,
}

fn default_wobble_scale() -> f64 {
    1.0
}

/// Audio, the matching electroglottograph channel, and the exact contour.
#[derive(Debug, Clone)]
pub struct SynthesisResult {
    pub audio: Signal,
    pub egg: Signal,
    pub truth: PitchContour,
}

const RAMP_SECONDS: f64 = 0.005;
const TRUTH_HOP: f64 = 0.010;

impl VoiceSpec {
    pub fn duration(&self) -> f64 {
        self.segments.iter().map(|s| s.duration()).sum()
    }

    pub fn validate(&self) -> Result<()> {
        if self.segments.is_empty() {
            return Err(Error::Config("voice has no segments".into()));
        }
        let (lo, hi) = self.register.f0_range();
        let check = |f0: f64| -> Result<()> {
            if !(lo..=hi).contains(&f0) {
                return Err(Error::Config(format!(
                    "pitch target {f0:.2} Hz outside the {} range {lo:.2}..{hi:.2} Hz",
                    self.register.name()
                )));
            }
            Ok(())
        };
        for seg in &self.segments {
            if !(seg.duration() > 0.0) {
                return Err(Error::Config("segment duration must be positive".into()));
            }
            match *seg {
                Segment::Silence { .. } => {}
                Segment::Sustain { f0, .. } => check(f0)?,
                Segment::Glissando { f0_start, f0_end, .. } => {
                    check(f0_start)?;
                    check(f0_end)?;
                }
                Segment::Vibrato { f0, extent_cents, rate_hz, .. } => {
                    check(f0)?;
                    if !(extent_cents >= 0.0) || !(rate_hz > 0.0) {
                        return Err(Error::Config(
                            "vibrato needs nonnegative extent and positive rate".into(),
                        ));
                    }
                }
            }
        }
        if !(self.wobble_scale >= 0.0) {
            return Err(Error::Config("wobble_scale must be nonnegative".into()));
        }
        let mut last = f64::NEG_INFINITY;
        for &(t, g) in &self.amplitude {
            if t < last {
                return Err(Error::Config("amplitude breakpoints must be sorted".into()));
            }
            if !(g >= 0.0) {
                return Err(Error::Config("amplitude gains must be nonnegative".into()));
            }
            last = t;
        }
        Ok(())
    }

    /// Segment start times plus the total duration as a final sentinel.
    fn boundaries(&self) -> Vec<f64> {
        let mut t = 0.0;
        let mut out = Vec::with_capacity(self.segments.len() + 1);
        for seg in &self.segments {
            out.push(t);
            t += seg.duration();
        }
        out.push(t);
        out
    }

    /// Exact instantaneous frequency at absolute time `t`, including the
    /// micro-wobble — the single formula both the synthesis loop and the
    /// ground-truth sampler evaluate. On an exact boundary the earlier
    /// segment wins (closed intervals, first match), so the final frame of
    /// a piece ending voiced is voiced.
    pub fn instantaneous_f0(&self, t: f64) -> Option<f64> {
        let starts = self.boundaries();
        let idx = (0..self.segments.len())
            .find(|&i| t >= starts[i] && t <= starts[i] + self.segments[i].duration())?;
        let local = t - starts[idx];
        let nominal = self.segments[idx].frequency(local)?;
        let depth =
            self.wobble_scale * wobble_depth_cents(self.register, self.mechanism);
        Some(nominal * 2f64.powf(depth * wobble_cents(t) / 1200.0))
    }

    /// Merged voiced time intervals (legato runs of non-silence segments).
    fn voiced_intervals(&self) -> Vec<(f64, f64)> {
        let starts = self.boundaries();
        let mut out: Vec<(f64, f64)> = Vec::new();
        for (i, seg) in self.segments.iter().enumerate() {
            if !seg.is_voiced() {
                continue;
            }
            let (a, b) = (starts[i], starts[i + 1]);
            match out.last_mut() {
                Some((_, e)) if (*e - a).abs() < 1e-12 => *e = b,
                _ => out.push((a, b)),
            }
        }
        out
    }

    fn envelope(&self, t: f64) -> f64 {
        if self.amplitude.is_empty() {
            return 1.0;
        }
        let first = self.amplitude[0];
        if t <= first.0 {
            return first.1;
        }
        for pair in self.amplitude.windows(2) {
            let (t0, g0) = pair[0];
            let (t1, g1) = pair[1];
            if t <= t1 {
                if t1 - t0 <= 0.0 {
                    return g1;
                }
                let w = (t - t0) / (t1 - t0);
                return g0 * (1.0 - w) + g1 * w;
            }
        }
        self.amplitude.last().unwrap().1
    }
}

/// Raised-cosine onset/offset gate over the voiced intervals.
fn gate(intervals: &[(f64, f64)], t: f64) -> f64 {
    for &(a, b) in intervals {
        if t < a || t > b {
            continue;
        }
        let ramp = RAMP_SECONDS.min((b - a) / 2.0);
        let edge = (t - a).min(b - t);
        if edge >= ramp {
            return 1.0;
        }
        let x = (edge / ramp).clamp(0.0, 1.0);
        return 0.5 * (1.0 - (std::f64::consts::PI * x).cos());
    }
    0.0
}

/// Two-pole resonator applied in place (unnormalized gain; the synthesis
/// output is peak-normalized at the end).
fn resonate(samples: &mut [f64], frequency: f64, bandwidth: f64, sample_rate: f64) {
    let r = (-std::f64::consts::PI * bandwidth / sample_rate).exp();
    let a1 = 2.0 * r * (2.0 * std::f64::consts::PI * frequency / sample_rate).cos();
    let a2 = -r * r;
    let (mut y1, mut y2) = (0.0f64, 0.0f64);
    for x in samples.iter_mut() {
        let y = *x + a1 * y1 + a2 * y2;
        y2 = y1;
        y1 = y;
        *x = y;
    }
}

fn dc_block(samples: &mut [f64]) {
    let (mut x1, mut y1) = (0.0f64, 0.0f64);
    for x in samples.iter_mut() {
        let y = *x - x1 + 0.995 * y1;
        x1 = *x;
        y1 = y;
        *x = y;
    }
}

fn normalize_peak(samples: &mut [f64], target: f64) {
    let peak = samples.iter().fold(0.0f64, |m, &x| m.max(x.abs()));
    if peak > 0.0 {
        let g = target / peak;
        for x in samples.iter_mut() {
            *x *= g;
        }
    }
}

/// Render a voice part to audio + electroglottograph + exact contour.
pub fn synthesize(spec: &VoiceSpec, sample_rate: u32) -> Result<SynthesisResult> {
    spec.validate()?;
    let sr = sample_rate as f64;
    let duration = spec.duration();
    let n = (duration * sr).round() as usize;
    let intervals = spec.voiced_intervals();
    let oq = spec.mechanism.open_quotient();

    let mut source = vec![0.0f64; n];
    let mut egg = vec![0.0f64; n];
    let mut phase = 0.0f64; // cycles, wrapped to [0, 1)
    let mut was_voiced = false;
    for i in 0..n {
        let t = i as f64 / sr;
        match spec.instantaneous_f0(t) {
            Some(f0) => {
                if !was_voiced {
                    phase = 0.0; // each phrase starts at glottal closure
                }
                was_voiced = true;
                let g = gate(&intervals, t) * spec.envelope(t);
                // open phase: one full sine cycle of glottal flow
                if phase < oq {
                    source[i] =
                        g * (2.0 * std::f64::consts::PI * phase / oq).sin();
                } else {
                    // closed phase: folds in contact — the EGG bump
                    let q = (phase - oq) / (1.0 - oq);
                    egg[i] = gate(&intervals, t)
                        * (std::f64::consts::PI * q).sin().powi(2);
                }
                phase += f0 / sr;
                phase -= phase.floor();
            }
            None => {
                was_voiced = false;
            }
        }
    }

    let mut audio = source;
    for (f, bw) in spec.register.formants() {
        resonate(&mut audio, f, bw, sr);
    }
    dc_block(&mut audio);
    normalize_peak(&mut audio, 0.85);

    // a light smoothing pass stands in for the EGG amplifier's bandwidth
    let mut y = 0.0f64;
    for x in egg.iter_mut() {
        y += 0.25 * (*x - y);
        *x = y;
    }
    dc_block(&mut egg);
    normalize_peak(&mut egg, 0.85);

    let grid = FrameGrid::cover(duration, TRUTH_HOP, 0.025);
    let frames = (0..grid.n_frames)
        .map(|k| match spec.instantaneous_f0(grid.frame_time(k)) {
            Some(f0) => Frame::Voiced { f0, score: 1.0 },
            None => Frame::Unvoiced,
        })
        .collect();

    Ok(SynthesisResult {
        audio: Signal::new(audio, sample_rate),
        egg: Signal::new(egg, sample_rate),
        truth: PitchContour::new(TRUTH_HOP, frames),
    })
}

/// One item of the built-in corpus: a voice part plus its catalog labels
/// (the exercise kind tag and a free-text description).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusItem {
    pub id: String,
    pub kind: String,
    pub exercise: String,
    #[serde(flatten)]
    pub voice: VoiceSpec,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct CorpusFile {
    sample_rate: u32,
    items: Vec<CorpusItem>,
}

/// The built-in 30-item corpus (3 registers x 2 mechanisms x 5 exercise
/// categories) and its sample rate.
pub fn standard_corpus() -> (u32, Vec<CorpusItem>) {
    let parsed: CorpusFile = serde_json::from_str(include_str!("../data/corpus.json"))
        .expect("embedded corpus is well-formed");
    (parsed.sample_rate, parsed.items)
}
