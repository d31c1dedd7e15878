//! Mono audio buffers and the analysis frame grid.

use crate::error::{Error, Result};

/// A mono signal with its sample rate. Samples are `f64` in [-1, 1] by
/// convention (nothing enforces the range; synthesis normalizes to it).
#[derive(Debug, Clone, PartialEq)]
pub struct Signal {
    pub samples: Vec<f64>,
    pub sample_rate: u32,
}

impl Signal {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Self {
        Signal {
            samples,
            sample_rate,
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Duration in seconds.
    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    /// Largest absolute sample value (0 for an empty signal).
    pub fn peak(&self) -> f64 {
        self.samples.iter().fold(0.0, |m, &x| m.max(x.abs()))
    }
}

/// Uniform grid of analysis frames: frame `k` is centered at
/// `origin + k * hop` seconds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameGrid {
    /// Hop between frame centers, seconds.
    pub hop: f64,
    /// Nominal analysis window length, seconds.
    pub window_length: f64,
    /// Number of frames on the grid.
    pub n_frames: usize,
    /// Time of frame 0, seconds.
    pub origin: f64,
}

impl FrameGrid {
    /// Grid covering a whole signal starting at t = 0.
    ///
    /// The frame count is `floor(duration / hop) + 1`, so a 1 s signal at a
    /// 10 ms hop gets 101 frames (both endpoints included). A small epsilon
    /// guards the floor against `duration / hop` landing just under an
    /// integer in floating point.
    pub fn cover(duration: f64, hop: f64, window_length: f64) -> FrameGrid {
        // The slack absorbs division error when the duration is an exact
        // multiple of the hop (1.0 / 0.01 lands just below 100.0 in f64).
        let n_frames = (duration / hop + 1e-6).floor() as usize + 1;
        FrameGrid {
            hop,
            window_length,
            n_frames,
            origin: 0.0,
        }
    }

    /// Center time of frame `k`, seconds.
    pub fn frame_time(&self, k: usize) -> f64 {
        self.origin + k as f64 * self.hop
    }

    /// Frame length in samples at `sample_rate`: `round(window_length * sr)`
    /// forced odd (by +1) so every frame has an exact center sample.
    pub fn frame_samples(&self, sample_rate: u32) -> usize {
        let n = (self.window_length * sample_rate as f64).round() as usize;
        if n % 2 == 0 {
            n + 1
        } else {
            n
        }
    }
}

/// Extract frame `frame_index` of `grid` from `signal`, zero-padding
/// symmetrically where the window extends past either end of the signal.
pub fn frame_signal(signal: &Signal, grid: &FrameGrid, frame_index: usize) -> Result<Vec<f64>> {
    if frame_index >= grid.n_frames {
        return Err(Error::Domain(format!(
            "frame index {} out of range (grid has {} frames)",
            frame_index, grid.n_frames
        )));
    }
    let len = grid.frame_samples(signal.sample_rate);
    let center = (grid.frame_time(frame_index) * signal.sample_rate as f64).round() as i64;
    Ok(extract_centered(signal, center, len))
}

/// Length-`len` slice of `signal` centered on `center` (a sample index,
/// possibly out of range), zero-padded outside the signal. `len` should be
/// odd so the center is exact.
pub(crate) fn extract_centered(signal: &Signal, center: i64, len: usize) -> Vec<f64> {
    extract_range(signal, center - (len / 2) as i64, len)
}

/// Length-`len` slice of `signal` starting at sample `start` (possibly
/// negative or past the end), zero-padded outside the signal.
pub(crate) fn extract_range(signal: &Signal, start: i64, len: usize) -> Vec<f64> {
    let mut out = vec![0.0; len];
    let n = signal.samples.len() as i64;
    for (i, slot) in out.iter_mut().enumerate() {
        let idx = start + i as i64;
        if idx >= 0 && idx < n {
            *slot = signal.samples[idx as usize];
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cover_includes_both_endpoints() {
        let g = FrameGrid::cover(1.0, 0.010, 0.030);
        assert_eq!(g.n_frames, 101);
        // 2.5 s: floor(250) + 1
        assert_eq!(FrameGrid::cover(2.5, 0.010, 0.030).n_frames, 251);
        // just under a multiple of the hop
        assert_eq!(FrameGrid::cover(0.9999999999, 0.010, 0.030).n_frames, 101);
    }

    #[test]
    fn frame_length_is_odd() {
        let g = FrameGrid::cover(1.0, 0.010, 0.030);
        assert_eq!(g.frame_samples(1000), 31);
        let g = FrameGrid::cover(1.0, 0.010, 0.040);
        assert_eq!(g.frame_samples(22050), 883);
    }

    #[test]
    fn interior_frame_is_centered() {
        // 1 s ramp at 1 kHz, 30 ms window: frame 50 is samples 485..=515.
        let samples: Vec<f64> = (0..1000).map(|i| i as f64).collect();
        let s = Signal::new(samples, 1000);
        let g = FrameGrid::cover(1.0, 0.010, 0.030);
        let f = frame_signal(&s, &g, 50).unwrap();
        assert_eq!(f.len(), 31);
        assert_eq!(f[0], 485.0);
        assert_eq!(f[15], 500.0);
        assert_eq!(f[30], 515.0);
    }

    #[test]
    fn edge_frames_are_zero_padded() {
        let samples: Vec<f64> = (0..1000).map(|i| 1.0 + i as f64).collect();
        let s = Signal::new(samples, 1000);
        let g = FrameGrid::cover(1.0, 0.010, 0.030);
        let f = frame_signal(&s, &g, 0).unwrap();
        // centered on sample 0: 15 left-padded zeros, then samples 0..=15
        assert!(f[..15].iter().all(|&x| x == 0.0));
        assert_eq!(f[15], 1.0);
        assert_eq!(f[16], 2.0);
        // last frame: centered on sample 1000 (one past the end)
        let f = frame_signal(&s, &g, 100).unwrap();
        assert_eq!(f[14], 1000.0);
        assert!(f[15..].iter().all(|&x| x == 0.0));
    }

    #[test]
    fn frame_sums_match_brute_force() {
        // Sum of all frames of a constant signal, edge padding included,
        // computed independently from the window/padding arithmetic.
        let c = 0.731;
        let n = 500;
        let sr = 1000u32;
        let s = Signal::new(vec![c; n], sr);
        let g = FrameGrid::cover(n as f64 / sr as f64, 0.010, 0.030);
        let w = g.frame_samples(sr) as i64;
        let half = w / 2;
        let mut expected = 0.0;
        for k in 0..g.n_frames {
            let center = (g.frame_time(k) * sr as f64).round() as i64;
            let lo = (center - half).max(0);
            let hi = (center + half).min(n as i64 - 1);
            expected += c * (hi - lo + 1).max(0) as f64;
        }
        let total: f64 = (0..g.n_frames)
            .map(|k| frame_signal(&s, &g, k).unwrap().iter().sum::<f64>())
            .sum();
        assert!((total - expected).abs() < 1e-9 * expected.abs());
        // interior frames each sum to window * c exactly
        let f = frame_signal(&s, &g, 25).unwrap();
        assert!((f.iter().sum::<f64>() - w as f64 * c).abs() < 1e-12 * w as f64);
    }

    #[test]
    fn out_of_range_frame_errors() {
        let s = Signal::new(vec![0.0; 100], 1000);
        let g = FrameGrid::cover(0.1, 0.010, 0.030);
        assert!(frame_signal(&s, &g, g.n_frames).is_err());
    }
}
