//! Harmonic-summation trackers. Each frame's amplitude spectrum (of the
//! linear-prediction residual, or of the plain signal) is scored over a
//! 10-cent grid of candidate pitches: harmonics add evidence, the points
//! midway between harmonics subtract it, so a candidate an octave off
//! loses the evidence its missing harmonics would have carried.

use super::{TrackerConfig, FUNDAMENTAL_WEIGHT, SUMMATION_BIAS};
use crate::contour::{Frame, PitchContour};
use crate::dsp::{amplitude_spectrum, lpc_residual, next_pow2, parabolic_offset};
use crate::error::Result;
use crate::signal::{extract_centered, FrameGrid, Signal};

/// Candidate pitch grid step, cents.
const GRID_STEP_CENTS: f64 = 10.0;

pub(super) fn track(
    signal: &Signal,
    config: &TrackerConfig,
    grid: &FrameGrid,
    use_residual: bool,
) -> Result<PitchContour> {
    let sr = signal.sample_rate;
    let n = grid.frame_samples(sr);
    let order = if use_residual {
        config
            .lpc_order
            .unwrap_or_else(|| 2 + (sr as f64 / 1000.0).round() as usize)
    } else {
        0
    };
    let n_bins = next_pow2(2 * n).max(8192);
    let half = n_bins / 2;

    let n_steps =
        (1200.0 * (config.f0_max / config.f0_min).log2() / GRID_STEP_CENTS).floor() as usize + 1;
    let freqs: Vec<f64> = (0..n_steps)
        .map(|i| config.f0_min * 2f64.powf(i as f64 * GRID_STEP_CENTS / 1200.0))
        .collect();

    let floor = super::silence_floor(signal);
    let mut frames = Vec::with_capacity(grid.n_frames);
    for k in 0..grid.n_frames {
        let center = (grid.frame_time(k) * sr as f64).round() as i64;
        let mut frame = extract_centered(signal, center, n);
        if super::inaudible(&frame, floor) {
            frames.push(Frame::Unvoiced);
            continue;
        }
        let mean = frame.iter().sum::<f64>() / n as f64;
        for x in &mut frame {
            *x -= mean;
        }
        let analysis = if order > 0 {
            lpc_residual(&frame, order).residual
        } else {
            frame
        };
        let spectrum = amplitude_spectrum(&analysis, n_bins)?;
        // normalize by the energy of the whole spectrum (both halves), so
        // the score scale is independent of level and frame length
        let l2 = spectrum.iter().map(|v| v * v).sum::<f64>().sqrt();
        frames.push(analyze(&spectrum[..half], l2, &freqs, config, sr));
    }
    Ok(PitchContour::new(grid.hop, frames))
}

fn analyze(
    half_spectrum: &[f64],
    l2: f64,
    freqs: &[f64],
    config: &TrackerConfig,
    sr: u32,
) -> Frame {
    if l2 <= 0.0 {
        return Frame::Unvoiced;
    }
    let half = half_spectrum.len();
    let n_bins = half * 2;
    // amplitude at frequency f, unit-energy normalized, linear between bins
    let e = |f: f64| -> f64 {
        let bin = f * n_bins as f64 / sr as f64;
        if !(bin >= 0.0) || bin >= (half - 1) as f64 {
            return 0.0;
        }
        let i = bin.floor() as usize;
        let frac = bin - i as f64;
        (half_spectrum[i] * (1.0 - frac) + half_spectrum[i + 1] * frac) / l2
    };

    let scores: Vec<f64> = freqs
        .iter()
        .map(|&f| {
            let mut s = e(f);
            for k in 2..=config.n_harmonics {
                s += e(k as f64 * f) - e((k as f64 - 0.5) * f);
            }
            s
        })
        .collect();

    // The argmax needs a tiebreak: summation scores degenerate in both
    // directions. A sub-octave candidate under a tone with faint upper
    // harmonics scores within a fraction of a percent of the pitch itself
    // (its even harmonics are the true ones, its inter-harmonic penalties
    // land on empty spectrum), and on a flat comb every odd multiple of
    // the pitch collects full harmonic evidence too. Near-degenerate
    // maxima therefore resolve toward the candidate with the stronger
    // fundamental bin — zero for both impostors above — and what still
    // ties after that (equal comb lines) falls to the lower frequency.
    let best = scores
        .iter()
        .enumerate()
        .max_by(|(i, a), (j, b)| {
            let ra = *a + FUNDAMENTAL_WEIGHT * e(freqs[*i])
                - SUMMATION_BIAS * (freqs[*i] / config.f0_min).log2();
            let rb = *b + FUNDAMENTAL_WEIGHT * e(freqs[*j])
                - SUMMATION_BIAS * (freqs[*j] / config.f0_min).log2();
            ra.partial_cmp(&rb).unwrap()
        })
        .map(|(i, _)| i)
        .unwrap();
    if scores[best] <= config.voicing_threshold {
        return Frame::Unvoiced;
    }
    let delta = if best > 0 && best + 1 < freqs.len() {
        parabolic_offset(scores[best - 1], scores[best], scores[best + 1])
    } else {
        0.0
    };
    let f0 = (freqs[best] * 2f64.powf(delta * GRID_STEP_CENTS / 1200.0))
        .clamp(config.f0_min, config.f0_max);
    Frame::Voiced {
        f0,
        score: scores[best].clamp(0.0, 1.0),
    }
}

#[cfg(test)]
mod tests {
    use super::super::tests::{median_f0, pulse_train};
    use super::super::{track as dispatch, TrackerId};
    use crate::signal::Signal;

    #[test]
    fn plain_spectrum_variant_equals_residual_variant_at_order_zero() {
        let s = pulse_train(220.0, 6000.0, 0.5, 22050);
        let mut cfg = TrackerId::Srh.default_config();
        cfg.lpc_order = Some(0);
        let srh0 = dispatch(&s, TrackerId::Srh, &cfg).unwrap();
        let ssh = dispatch(&s, TrackerId::Ssh, &TrackerId::Ssh.default_config()).unwrap();
        assert_eq!(srh0.frames, ssh.frames);
    }

    #[test]
    fn follows_pulse_trains_across_the_singing_range() {
        for f0 in [110.0, 220.0, 523.25] {
            for id in [TrackerId::Srh, TrackerId::Ssh] {
                let s = pulse_train(f0, 8000.0, 0.6, 22050);
                let c = dispatch(&s, id, &id.default_config()).unwrap();
                let med = median_f0(&c);
                let cents = 1200.0 * (med / f0).log2();
                assert!(
                    cents.abs() < 8.0,
                    "{id} at {f0} Hz: median {med} ({cents:+.1} cents)"
                );
            }
        }
    }

    #[test]
    fn strong_second_harmonic_does_not_pull_the_octave() {
        // the inter-harmonic subtraction is what penalizes reading this as
        // a tone at 2f with energy mysteriously present at 1.5f gaps
        let sr = 22050u32;
        let f = 240.0;
        let samples: Vec<f64> = (0..sr as usize)
            .map(|i| {
                let t = i as f64 / sr as f64;
                let w = 2.0 * std::f64::consts::PI * f * t;
                0.25 * w.sin() + 0.45 * (2.0 * w).sin() + 0.1 * (3.0 * w).sin()
            })
            .collect();
        let s = Signal::new(samples, sr);
        for id in [TrackerId::Srh, TrackerId::Ssh] {
            let c = dispatch(&s, id, &id.default_config()).unwrap();
            let med = median_f0(&c);
            assert!(
                (1200.0 * (med / f).log2()).abs() < 20.0,
                "{id}: median {med} Hz"
            );
        }
    }

    #[test]
    fn voiced_scores_sit_well_above_the_default_threshold() {
        // the unit-energy spectrum normalization fixes the score scale;
        // clean voiced frames must clear 0.07 with a wide margin while
        // the noise tests elsewhere stay below it
        let s = pulse_train(196.0, 8000.0, 0.5, 22050);
        let c = dispatch(&s, TrackerId::Srh, &TrackerId::Srh.default_config()).unwrap();
        let mid = &c.frames[10..c.frames.len() - 10];
        let mean_score: f64 =
            mid.iter().map(|f| f.score()).sum::<f64>() / mid.len() as f64;
        assert!(mean_score > 0.15, "mean voiced score {mean_score}");
    }

    #[test]
    fn top_of_range_pitch_stays_inside_the_grid() {
        let s = pulse_train(1480.0, 9000.0, 0.4, 22050);
        let cfg = TrackerId::Ssh.default_config();
        let c = dispatch(&s, TrackerId::Ssh, &cfg).unwrap();
        for f0 in c.frames.iter().filter_map(|f| f.f0()) {
            assert!((60.0..=1500.0).contains(&f0));
        }
    }
}
