//! Autocorrelation tracker: each frame is windowed, autocorrelated, and
//! the correlation is divided by the window's own autocorrelation to undo
//! the taper's damping of long lags. The best normalized peak above the
//! voicing threshold becomes the estimate.

use super::{TrackerConfig, OCTAVE_BIAS};
use crate::contour::{Frame, PitchContour};
use crate::dsp::{autocorrelation, parabolic_offset, Window};
use crate::error::Result;
use crate::signal::{extract_centered, FrameGrid, Signal};

pub(super) fn track(
    signal: &Signal,
    config: &TrackerConfig,
    grid: &FrameGrid,
) -> Result<PitchContour> {
    let sr = signal.sample_rate;
    let n = grid.frame_samples(sr);
    let window = Window::Hanning.samples(n);
    let window_acf = autocorrelation(&window);

    // correlation past half the window rests on too few samples to trust
    let max_lag = config.max_lag(sr).min(n / 2);
    let min_lag = config.min_lag(sr).min(max_lag);
    if max_lag < config.max_lag(sr) {
        log::warn!(
            "{} s window searches down to {:.1} Hz, not the requested {:.1} Hz",
            grid.window_length,
            sr as f64 / max_lag as f64,
            config.f0_min
        );
    }

    let floor = super::silence_floor(signal);
    let frames = (0..grid.n_frames)
        .map(|k| {
            let center = (grid.frame_time(k) * sr as f64).round() as i64;
            let mut frame = extract_centered(signal, center, n);
            if super::inaudible(&frame, floor) {
                return Frame::Unvoiced;
            }
            let mean = frame.iter().sum::<f64>() / n as f64;
            for x in &mut frame {
                *x -= mean;
            }
            for (x, w) in frame.iter_mut().zip(&window) {
                *x *= w;
            }
            let r = autocorrelation(&frame);
            analyze(&r, &window_acf, min_lag, max_lag, config, sr)
        })
        .collect();
    Ok(PitchContour::new(grid.hop, frames))
}

fn analyze(
    r: &[f64],
    window_acf: &[f64],
    min_lag: usize,
    max_lag: usize,
    config: &TrackerConfig,
    sr: u32,
) -> Frame {
    if r[0] <= 0.0 {
        return Frame::Unvoiced;
    }
    let norm: Vec<f64> = (0..=max_lag)
        .map(|tau| {
            if window_acf[tau] > 0.0 {
                (r[tau] / r[0]) / (window_acf[tau] / window_acf[0])
            } else {
                0.0
            }
        })
        .collect();

    // best local maximum, with a slight preference for the higher octave so
    // that the exact tie a perfectly periodic signal produces at the period
    // and its multiples resolves to the fundamental
    let mut best: Option<(f64, f64, f64)> = None; // (adjusted, value, lag)
    for tau in min_lag..=max_lag {
        let left = norm[tau - 1];
        let right = if tau + 1 <= max_lag { norm[tau + 1] } else { f64::NEG_INFINITY };
        if norm[tau] <= 0.0 || norm[tau] < left || norm[tau] < right {
            continue;
        }
        let (lag, value) = if tau + 1 <= max_lag {
            let delta = parabolic_offset(left, norm[tau], right);
            // height of the fitted parabola at its vertex
            let v = norm[tau] + 0.25 * delta * (right - left);
            (tau as f64 + delta, v.min(1.0))
        } else {
            (tau as f64, norm[tau].min(1.0))
        };
        let f0 = sr as f64 / lag;
        let adjusted = value + OCTAVE_BIAS * (f0 / config.f0_min).log2();
        if best.map_or(true, |(a, _, _)| adjusted > a) {
            best = Some((adjusted, value, lag));
        }
    }
    match best {
        Some((_, value, lag)) if value > config.voicing_threshold => {
            let f0 = (sr as f64 / lag).clamp(config.f0_min, config.f0_max);
            Frame::Voiced {
                f0,
                score: value.clamp(0.0, 1.0),
            }
        }
        _ => Frame::Unvoiced,
    }
}

#[cfg(test)]
mod tests {
    use super::super::tests::{median_f0, pulse_train, sine};
    use super::super::{track as dispatch, TrackerId};

    #[test]
    fn normalized_peak_of_a_sine_is_near_unity() {
        // the window-autocorrelation division is what keeps the peak near 1
        // at long lags; an unnormalized peak at 100 Hz under a Hanning
        // window would sag well below the 0.45 threshold
        let s = sine(100.0, 0.6, 22050);
        let c = dispatch(&s, TrackerId::Acf, &TrackerId::Acf.default_config()).unwrap();
        let scores: Vec<f64> = c
            .frames
            .iter()
            .skip(5)
            .take(c.frames.len() - 10)
            .map(|f| f.score())
            .collect();
        assert!(!scores.is_empty());
        for (i, sc) in scores.iter().enumerate() {
            assert!(*sc > 0.9, "frame {}: score {sc}", i + 5);
        }
        let med = median_f0(&c);
        assert!((1200.0 * (med / 100.0).log2()).abs() < 2.0, "median {med}");
    }

    #[test]
    fn picks_the_period_not_its_double() {
        // a pure tone correlates perfectly at every multiple of the period;
        // the octave preference must settle the tie downward in lag
        let s = sine(220.0, 0.5, 22050);
        let c = dispatch(&s, TrackerId::Acf, &TrackerId::Acf.default_config()).unwrap();
        let med = median_f0(&c);
        assert!((med - 220.0).abs() < 2.0, "median {med} Hz");
    }

    #[test]
    fn follows_a_harmonic_rich_tone_closely() {
        let s = pulse_train(155.56, 6000.0, 0.8, 22050);
        let c = dispatch(&s, TrackerId::Acf, &TrackerId::Acf.default_config()).unwrap();
        for (k, f) in c.frames.iter().enumerate().skip(4).take(c.frames.len() - 8) {
            let f0 = f.f0().unwrap_or_else(|| panic!("frame {k} unvoiced"));
            let cents = 1200.0 * (f0 / 155.56).log2();
            assert!(cents.abs() < 5.0, "frame {k}: {f0} Hz ({cents:+.1} cents)");
        }
    }

    #[test]
    fn dc_offset_does_not_fool_the_tracker() {
        let mut s = sine(330.0, 0.4, 22050);
        for x in &mut s.samples {
            *x = *x * 0.3 + 0.4; // strong DC pedestal
        }
        let c = dispatch(&s, TrackerId::Acf, &TrackerId::Acf.default_config()).unwrap();
        let med = median_f0(&c);
        assert!((1200.0 * (med / 330.0).log2()).abs() < 5.0, "median {med}");
    }

    #[test]
    fn raised_threshold_rejects_what_it_should() {
        // at threshold just above 1 nothing can pass
        let s = sine(220.0, 0.3, 22050);
        let mut cfg = TrackerId::Acf.default_config();
        cfg.voicing_threshold = 1.01;
        let c = dispatch(&s, TrackerId::Acf, &cfg).unwrap();
        assert_eq!(c.n_voiced(), 0);
    }
}
