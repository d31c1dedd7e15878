//! Reference contours from an electroglottograph channel.
//!
//! The EGG signal measures vocal-fold contact directly, so tracking it
//! gives a far cleaner pitch reference than tracking the microphone. To
//! guard against sensor trouble (electrode slip, mains buzz) the same
//! tracker also runs on the differentiated channel, whose closure spikes
//! fail in different ways than the raw contact curve: wherever the two
//! contours disagree the reference is suspect, and a recording whose
//! disagreement rate is too high gets flagged for exclusion.

use crate::contour::PitchContour;
use crate::error::{Error, Result};
use crate::signal::Signal;
use crate::trackers::{track, TrackerId};

/// Frames whose two channel readings differ by at least this much (in
/// cents) count as disagreements, as does any voicing mismatch.
pub const DISAGREEMENT_CENTS: f64 = 50.0;

/// A recording is flagged for exclusion when more than this share of its
/// frames disagree between the two channels.
pub const EXCLUSION_RATE: f64 = 0.05;

/// First difference scaled to a rate (units per second). The first sample
/// is zero so the output aligns with the input.
pub fn differentiate(signal: &Signal) -> Signal {
    let sr = signal.sample_rate as f64;
    let mut out = vec![0.0; signal.len()];
    for i in 1..signal.len() {
        out[i] = (signal.samples[i] - signal.samples[i - 1]) * sr;
    }
    Signal::new(out, signal.sample_rate)
}

/// A reference contour with its cross-channel consistency verdict.
#[derive(Debug, Clone)]
pub struct GroundTruth {
    /// The reference: tracked from the raw contact signal.
    pub contour: PitchContour,
    /// The independent check: tracked from the differentiated signal.
    pub check: PitchContour,
    /// Per-frame disagreement between the two contours.
    pub disagreement: Vec<bool>,
    /// Share of frames that disagree.
    pub disagreement_rate: f64,
    /// True when the recording should be excluded from evaluation.
    pub flagged: bool,
}

/// Extract a reference contour from an EGG recording and cross-check it
/// against the differentiated channel.
pub fn extract_reference(egg: &Signal) -> Result<GroundTruth> {
    if egg.is_empty() {
        return Err(Error::Domain("cannot extract a reference from an empty signal".into()));
    }
    let config = TrackerId::Nccf.default_config();
    let contour = track(egg, TrackerId::Nccf, &config)?;
    let check = track(&differentiate(egg), TrackerId::Nccf, &config)?;

    let n = contour.frames.len().min(check.frames.len());
    let mut disagreement = vec![false; n];
    let mut count = 0usize;
    for i in 0..n {
        let bad = match (contour.frames[i].f0(), check.frames[i].f0()) {
            (Some(a), Some(b)) => {
                (1200.0 * (a / b).log2()).abs() >= DISAGREEMENT_CENTS
            }
            (None, None) => false,
            _ => true,
        };
        if bad {
            count += 1;
        }
        disagreement[i] = bad;
    }
    let disagreement_rate = if n == 0 { 0.0 } else { count as f64 / n as f64 };
    Ok(GroundTruth {
        contour,
        check,
        disagreement,
        disagreement_rate,
        flagged: disagreement_rate > EXCLUSION_RATE,
    })
}
