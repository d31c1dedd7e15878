//! Difference-function tracker: per frame, the cumulative-mean-normalized
//! difference over an integration window, searched for the first dip below
//! an absolute threshold.

use super::TrackerConfig;
use crate::contour::{Frame, PitchContour};
use crate::dsp::{cmnd, parabolic_offset};
use crate::error::Result;
use crate::signal::{extract_range, FrameGrid, Signal};

/// The analysis buffer per frame is the integration window plus the longest
/// searched lag, so a short window still reaches the low end of the search
/// range: the difference at lag `tau` always compares two full windows.
pub(super) fn track(
    signal: &Signal,
    config: &TrackerConfig,
    grid: &FrameGrid,
) -> Result<PitchContour> {
    let sr = signal.sample_rate;
    let w = grid.frame_samples(sr);
    let max_lag = config.max_lag(sr);
    let min_lag = config.min_lag(sr).min(max_lag);
    let floor = super::silence_floor(signal);

    let frames = (0..grid.n_frames)
        .map(|k| {
            let center = (grid.frame_time(k) * sr as f64).round() as i64;
            // integration window centered on the frame time, lags extend right
            let buffer = extract_range(signal, center - (w / 2) as i64, w + max_lag);
            if super::inaudible(&buffer, floor) {
                return Frame::Unvoiced;
            }
            let d = cmnd(&buffer, w, max_lag);
            analyze(&d, min_lag, max_lag, config, sr)
        })
        .collect();
    Ok(PitchContour::new(grid.hop, frames))
}

fn analyze(d: &[f64], min_lag: usize, max_lag: usize, config: &TrackerConfig, sr: u32) -> Frame {
    // first lag dipping below the threshold, then ride the dip to its local
    // minimum; taking the first dip keeps subharmonics (deeper dips at
    // multiples of the period) from capturing the estimate
    let mut tau = None;
    for t in min_lag..=max_lag {
        if d[t] < config.voicing_threshold {
            let mut t_best = t;
            while t_best + 1 <= max_lag && d[t_best + 1] < d[t_best] {
                t_best += 1;
            }
            tau = Some(t_best);
            break;
        }
    }
    let Some(tau) = tau else {
        return Frame::Unvoiced;
    };
    let delta = if tau > 1 && tau < max_lag {
        parabolic_offset(d[tau - 1], d[tau], d[tau + 1])
    } else {
        0.0
    };
    let f0 = (sr as f64 / (tau as f64 + delta)).clamp(config.f0_min, config.f0_max);
    Frame::Voiced {
        f0,
        score: (1.0 - d[tau]).clamp(0.0, 1.0),
    }
}
