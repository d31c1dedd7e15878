//! Contour post-filter: repairs octave spikes, register-shifted runs, and
//! stray outliers in a voiced contour without ever touching the voicing
//! decisions.
//!
//! Three passes, all in the log-frequency domain:
//! 1. within each voiced run, short excursions that jump away and return
//!    are snapped back by whole octaves when they are octave errors, or
//!    bridged by log-linear interpolation when they are not;
//! 2. whole runs sitting an octave or more from the contour's global
//!    median register are shifted back by whole octaves;
//! 3. a guarded median: a frame replaced by its run-local window median
//!    only when it deviates grossly, so ordinary vibrato passes through
//!    bit-identical and the filter is idempotent.

use crate::contour::{Frame, PitchContour};

#[derive(Debug, Clone, PartialEq)]
pub struct PostFilterConfig {
    /// Deviation, in cents, treated as a gross jump (spike entry/exit in
    /// pass 1, outlier guard in pass 3).
    pub jump_threshold_cents: f64,
    /// Longest excursion, in frames, still considered a spike.
    pub max_spike_frames: usize,
    /// Residual tolerance, in cents, for accepting a whole-octave snap;
    /// spikes further than this from any octave of their surroundings are
    /// interpolated instead.
    pub snap_tolerance_cents: f64,
    /// Distance from the global median register, in cents, beyond which a
    /// whole run is snapped by octaves (pass 2).
    pub register_threshold_cents: f64,
    /// Window length of the guarded median (pass 3), made odd by rounding
    /// down; windows shrink at run edges.
    pub median_window: usize,
}

impl Default for PostFilterConfig {
    fn default() -> Self {
        PostFilterConfig {
            jump_threshold_cents: 600.0,
            max_spike_frames: 10,
            snap_tolerance_cents: 200.0,
            register_threshold_cents: 1150.0,
            median_window: 5,
        }
    }
}

/// [`postprocess_with`] under the default configuration.
pub fn postprocess(contour: &PitchContour) -> PitchContour {
    postprocess_with(contour, &PostFilterConfig::default())
}

pub fn postprocess_with(contour: &PitchContour, config: &PostFilterConfig) -> PitchContour {
    let mut out = contour.clone();
    let runs = out.voiced_runs();

    for run in &runs {
        repair_spikes(&mut out.frames[run.clone()], config);
    }
    snap_register(&mut out, &runs, config);
    for run in &runs {
        guarded_median(&mut out.frames[run.clone()], config);
    }
    out
}

fn log2_f0(frame: &Frame) -> f64 {
    frame.f0().expect("voiced frame").log2()
}

fn set_f0(frame: &mut Frame, log2_value: f64) {
    if let Frame::Voiced { f0, .. } = frame {
        *f0 = log2_value.exp2();
    }
}

/// Median as the `floor(n/2)`-th order statistic — always a value that
/// actually occurs in the window.
fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    v[v.len() / 2]
}

/// Pass 1. `frames` is one contiguous voiced run.
fn repair_spikes(frames: &mut [Frame], config: &PostFilterConfig) {
    let thr = config.jump_threshold_cents / 1200.0;
    let snap_tol = config.snap_tolerance_cents / 1200.0;
    let n = frames.len();
    let mut l: Vec<f64> = frames.iter().map(log2_f0).collect();
    // untouched frames must come through bit-identical, so only repaired
    // ones take the log-domain round trip
    let mut changed = vec![false; n];

    let mut i = 1;
    while i < n {
        if (l[i] - l[i - 1]).abs() < thr {
            i += 1;
            continue;
        }
        // a jump enters at i; a spike must come back near the left flank
        // within the length budget, leaving a right flank to lean on
        let limit = (i + config.max_spike_frames).min(n - 1);
        let ret = (i + 1..=limit).find(|&j| (l[j] - l[i - 1]).abs() < thr);
        let Some(j) = ret else {
            // sustained level change (or a run-final excursion): not a
            // spike; later passes own anything still out of register
            i += 1;
            continue;
        };
        let flank_mid = (l[i - 1] + l[j]) / 2.0;
        let spike_med = median(&l[i..j]);
        let octaves = (flank_mid - spike_med).round();
        if octaves != 0.0 && (spike_med + octaves - flank_mid).abs() < snap_tol {
            for v in &mut l[i..j] {
                *v += octaves;
            }
        } else {
            // not an octave family member: bridge the flanks
            let (left, right) = (l[i - 1], l[j]);
            let span = (j - (i - 1)) as f64;
            for (off, v) in l[i..j].iter_mut().enumerate() {
                let w = (off + 1) as f64 / span;
                *v = left * (1.0 - w) + right * w;
            }
        }
        for c in &mut changed[i..j] {
            *c = true;
        }
        i = j;
    }
    for ((frame, &v), &c) in frames.iter_mut().zip(&l).zip(&changed) {
        if c {
            set_f0(frame, v);
        }
    }
}

/// Pass 2: octave-shift whole runs back toward the global median register.
fn snap_register(
    contour: &mut PitchContour,
    runs: &[std::ops::Range<usize>],
    config: &PostFilterConfig,
) {
    let all: Vec<f64> = contour
        .frames
        .iter()
        .filter(|f| f.is_voiced())
        .map(log2_f0)
        .collect();
    if all.is_empty() {
        return;
    }
    let global = median(&all);
    let thr = config.register_threshold_cents / 1200.0;
    for run in runs {
        let run_l: Vec<f64> = contour.frames[run.clone()].iter().map(log2_f0).collect();
        let run_med = median(&run_l);
        let distance = run_med - global;
        if distance.abs() < thr {
            continue;
        }
        let octaves = distance.round();
        if octaves == 0.0 {
            continue;
        }
        for frame in &mut contour.frames[run.clone()] {
            let v = log2_f0(frame) - octaves;
            set_f0(frame, v);
        }
    }
}

/// Pass 3. `frames` is one contiguous voiced run.
fn guarded_median(frames: &mut [Frame], config: &PostFilterConfig) {
    let n = frames.len();
    if n < 3 {
        return;
    }
    let thr = config.jump_threshold_cents / 1200.0;
    let half = (config.median_window.max(3) - 1) / 2;
    let l: Vec<f64> = frames.iter().map(log2_f0).collect();
    for i in 0..n {
        let lo = i.saturating_sub(half);
        let hi = (i + half + 1).min(n);
        if hi - lo < 3 {
            continue;
        }
        let med = median(&l[lo..hi]);
        if (l[i] - med).abs() >= thr {
            set_f0(&mut frames[i], med);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::compare;

    fn voiced(f0: f64) -> Frame {
        Frame::Voiced { f0, score: 0.9 }
    }

    fn hz(contour: &PitchContour) -> Vec<Option<f64>> {
        contour.frames.iter().map(|f| f.f0()).collect()
    }

    fn max_cents_change(a: &PitchContour, b: &PitchContour) -> f64 {
        a.frames
            .iter()
            .zip(&b.frames)
            .filter_map(|(x, y)| Some((x.f0()?, y.f0()?)))
            .map(|(x, y)| (1200.0 * (y / x).log2()).abs())
            .fold(0.0, f64::max)
    }

    /// 220 Hz with +-80 cents of 6 Hz vibrato at a 10 ms hop.
    fn vibrato_contour(n: usize) -> PitchContour {
        let frames = (0..n)
            .map(|k| {
                let t = k as f64 * 0.01;
                let cents = 80.0 * (2.0 * std::f64::consts::PI * 6.0 * t).sin();
                voiced(220.0 * 2f64.powf(cents / 1200.0))
            })
            .collect();
        PitchContour::new(0.01, frames)
    }

    #[test]
    fn lone_octave_spike_is_snapped_back() {
        let c = PitchContour::new(
            0.01,
            vec![voiced(200.0), voiced(200.0), voiced(400.0), voiced(200.0), voiced(200.0)],
        );
        let p = postprocess(&c);
        for f in &p.frames {
            assert!((f.f0().unwrap() - 200.0).abs() < 1e-9);
        }
    }

    #[test]
    fn non_octave_spike_is_interpolated() {
        // 330 is 866 cents off 200: a gross jump, but 334 cents from the
        // nearest octave family member, so bridging wins over snapping
        let c = PitchContour::new(
            0.01,
            vec![voiced(200.0), voiced(200.0), voiced(330.0), voiced(200.0), voiced(200.0)],
        );
        let p = postprocess(&c);
        assert!((p.frames[2].f0().unwrap() - 200.0).abs() < 1e-9);
    }

    #[test]
    fn multi_frame_spike_is_repaired_whole() {
        let mut f = vec![voiced(150.0); 12];
        for k in 5..8 {
            f[k] = voiced(300.0 * (1.0 + 0.001 * k as f64));
        }
        let p = postprocess(&PitchContour::new(0.01, f));
        for (k, fr) in p.frames.iter().enumerate() {
            let cents = (1200.0 * (fr.f0().unwrap() / 150.0).log2()).abs();
            assert!(cents < 50.0, "frame {k}: {:?}", fr.f0());
        }
    }

    #[test]
    fn vibrato_passes_through_untouched() {
        let c = vibrato_contour(200);
        let p = postprocess(&c);
        assert!(max_cents_change(&c, &p) < 1.0);
        assert_eq!(hz(&c), hz(&p));
    }

    #[test]
    fn filter_is_idempotent() {
        let mut c = vibrato_contour(300);
        // octave spikes: isolated, clustered, and at a run edge
        for k in [40, 41, 90, 160, 161, 162, 0] {
            if let Frame::Voiced { f0, .. } = &mut c.frames[k] {
                *f0 *= 2.0;
            }
        }
        let once = postprocess(&c);
        let twice = postprocess(&once);
        assert!(max_cents_change(&once, &twice) < 1e-9);
    }

    #[test]
    fn voicing_decisions_are_never_altered() {
        let mut frames = Vec::new();
        for k in 0..120 {
            if (20..30).contains(&k) || k % 17 == 0 {
                frames.push(Frame::Unvoiced);
            } else {
                frames.push(voiced(if k % 23 == 0 { 880.0 } else { 220.0 }));
            }
        }
        let c = PitchContour::new(0.01, frames);
        let p = postprocess(&c);
        let flags: Vec<bool> = c.frames.iter().map(|f| f.is_voiced()).collect();
        let pflags: Vec<bool> = p.frames.iter().map(|f| f.is_voiced()).collect();
        assert_eq!(flags, pflags);
        let r = compare(&p, &c, 100.0).unwrap();
        assert_eq!(r.n_voicing_errors, 0);
    }

    #[test]
    fn off_register_run_is_shifted_back() {
        // a short run a clean octave below the dominant register
        let mut frames = vec![voiced(440.0); 60];
        frames.push(Frame::Unvoiced);
        frames.extend(vec![voiced(220.0); 8]);
        let c = PitchContour::new(0.01, frames);
        let p = postprocess(&c);
        for f in p.frames.iter().filter(|f| f.is_voiced()) {
            assert!((f.f0().unwrap() - 440.0).abs() < 1.0);
        }
    }

    #[test]
    fn nearby_registers_are_left_alone() {
        // a fifth apart (700 cents) is ordinary melody, not an error
        let mut frames = vec![voiced(220.0); 40];
        frames.push(Frame::Unvoiced);
        frames.extend(vec![voiced(330.0); 40]);
        let c = PitchContour::new(0.01, frames);
        let p = postprocess(&c);
        assert_eq!(hz(&c), hz(&p));
    }

    #[test]
    fn run_edge_spike_is_caught_by_the_median_guard() {
        let mut c = vibrato_contour(30);
        if let Frame::Voiced { f0, .. } = &mut c.frames[0] {
            *f0 *= 2.0;
        }
        let p = postprocess(&c);
        let cents = (1200.0 * (p.frames[0].f0().unwrap() / 220.0).log2()).abs();
        assert!(cents < 120.0, "edge frame left at {cents:.0} cents");
    }

    #[test]
    fn injected_octave_errors_mostly_disappear() {
        let reference = vibrato_contour(400);
        let mut corrupted = reference.clone();
        let spots = [13, 14, 55, 101, 102, 103, 180, 240, 241, 313, 360];
        for &k in &spots {
            if let Frame::Voiced { f0, .. } = &mut corrupted.frames[k] {
                *f0 *= if k % 2 == 0 { 2.0 } else { 0.5 };
            }
        }
        let before = compare(&corrupted, &reference, 100.0).unwrap();
        let after = compare(&postprocess(&corrupted), &reference, 100.0).unwrap();
        assert_eq!(before.n_gross, spots.len() as u64);
        assert!(
            (after.n_gross as f64) <= 0.4 * before.n_gross as f64,
            "gross errors {} -> {}",
            before.n_gross,
            after.n_gross
        );
    }

    #[test]
    fn degenerate_contours_survive() {
        let empty = PitchContour::new(0.01, vec![]);
        assert_eq!(postprocess(&empty).frames.len(), 0);
        let unvoiced = PitchContour::new(0.01, vec![Frame::Unvoiced; 10]);
        assert_eq!(postprocess(&unvoiced).frames, vec![Frame::Unvoiced; 10]);
        let single = PitchContour::new(0.01, vec![voiced(220.0)]);
        assert_eq!(hz(&postprocess(&single)), vec![Some(220.0)]);
        let pair = PitchContour::new(0.01, vec![voiced(220.0), voiced(440.0)]);
        postprocess(&pair); // two-frame run: nothing to lean on, no panic
    }
}
