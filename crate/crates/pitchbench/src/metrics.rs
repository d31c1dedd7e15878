//! Error metrics for estimated-vs-reference contour pairs, with pooling
//! across files by sufficient statistics.

use serde::{Deserialize, Serialize};

use crate::contour::{Frame, PitchContour};
use crate::error::{Error, Result};

/// Signed pitch deviation of `f_est` against `f_ref` in cents
/// (1200 * log2(f_est / f_ref)). Both frequencies must be positive.
pub fn cents_error(f_est: f64, f_ref: f64) -> Result<f64> {
    if !(f_est > 0.0) || !(f_ref > 0.0) {
        return Err(Error::Domain(format!(
            "cents_error needs positive frequencies, got {f_est} and {f_ref}"
        )));
    }
    Ok(1200.0 * (f_est / f_ref).log2())
}

/// Comparison counts for one contour pair, plus the sufficient statistics
/// (count, sum, sum of squares of cents deviations over the fine frames)
/// that make frame-weighted pooling across files exact.
///
/// The rate accessors derive the four headline numbers:
/// * `vde` — voicing decisions that differ, over all frames;
/// * `gpe` — both-voiced frames off by at least the gross threshold, over
///   both-voiced frames (undefined when there are none);
/// * `fpe` — population standard deviation of the cents deviation over
///   both-voiced frames that are not gross (undefined when there are none);
/// * `ffe` — voicing errors plus gross errors, over all frames.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ErrorReport {
    pub n_frames: u64,
    pub n_both_voiced: u64,
    pub n_gross: u64,
    pub n_voicing_errors: u64,
    pub n_fine: u64,
    pub fine_sum_cents: f64,
    pub fine_sum_sq_cents: f64,
}

impl ErrorReport {
    pub fn gpe(&self) -> Option<f64> {
        if self.n_both_voiced == 0 {
            None
        } else {
            Some(self.n_gross as f64 / self.n_both_voiced as f64)
        }
    }

    pub fn fpe(&self) -> Option<f64> {
        if self.n_fine == 0 {
            return None;
        }
        let n = self.n_fine as f64;
        let mean = self.fine_sum_cents / n;
        let var = (self.fine_sum_sq_cents / n - mean * mean).max(0.0);
        Some(var.sqrt())
    }

    pub fn vde(&self) -> f64 {
        if self.n_frames == 0 {
            0.0
        } else {
            self.n_voicing_errors as f64 / self.n_frames as f64
        }
    }

    pub fn ffe(&self) -> f64 {
        if self.n_frames == 0 {
            0.0
        } else {
            (self.n_voicing_errors + self.n_gross) as f64 / self.n_frames as f64
        }
    }

    /// One CSV row: `gpe,fpe,vde,ffe,n_frames,n_both_voiced,n_gross,
    /// n_voicing_errors`, undefined rates as `NA`, rates with six decimals.
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{:.6},{:.6},{},{},{},{}",
            fmt_opt(self.gpe()),
            fmt_opt(self.fpe()),
            self.vde(),
            self.ffe(),
            self.n_frames,
            self.n_both_voiced,
            self.n_gross,
            self.n_voicing_errors
        )
    }

    pub const CSV_HEADER: &'static str =
        "gpe,fpe,vde,ffe,n_frames,n_both_voiced,n_gross,n_voicing_errors";

    /// JSON-ready record: the four rates plus all counts and statistics.
    pub fn record(&self) -> ReportRecord {
        ReportRecord {
            gpe: self.gpe(),
            fpe: self.fpe(),
            vde: self.vde(),
            ffe: self.ffe(),
            n_frames: self.n_frames,
            n_both_voiced: self.n_both_voiced,
            n_gross: self.n_gross,
            n_voicing_errors: self.n_voicing_errors,
            n_fine: self.n_fine,
            fine_sum_cents: self.fine_sum_cents,
            fine_sum_sq_cents: self.fine_sum_sq_cents,
        }
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    match v {
        Some(x) => format!("{:.6}", x),
        None => "NA".to_string(),
    }
}

/// Serialized form of [`ErrorReport`]: headline rates (null when
/// undefined) plus the exact counts they were derived from.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReportRecord {
    pub gpe: Option<f64>,
    pub fpe: Option<f64>,
    pub vde: f64,
    pub ffe: f64,
    pub n_frames: u64,
    pub n_both_voiced: u64,
    pub n_gross: u64,
    pub n_voicing_errors: u64,
    pub n_fine: u64,
    pub fine_sum_cents: f64,
    pub fine_sum_sq_cents: f64,
}

/// Score an estimated contour against a reference.
///
/// Both contours must share the hop; when lengths differ the trailing
/// surplus of the longer one is dropped with a warning. A both-voiced frame
/// is gross when its absolute cents deviation is at least
/// `gross_threshold_cents` (100 = one semitone).
pub fn compare(
    est: &PitchContour,
    reference: &PitchContour,
    gross_threshold_cents: f64,
) -> Result<ErrorReport> {
    if (est.hop - reference.hop).abs() > 1e-9 {
        return Err(Error::Alignment(format!(
            "hop mismatch: estimate {} vs reference {}",
            est.hop, reference.hop
        )));
    }
    let n = est.len().min(reference.len());
    if est.len() != reference.len() {
        log::warn!(
            "length mismatch: estimate {} vs reference {} frames; comparing the first {}",
            est.len(),
            reference.len(),
            n
        );
    }
    let mut report = ErrorReport {
        n_frames: n as u64,
        ..Default::default()
    };
    for (e, r) in est.frames[..n].iter().zip(&reference.frames[..n]) {
        match (e, r) {
            (Frame::Voiced { f0: fe, .. }, Frame::Voiced { f0: fr, .. }) => {
                report.n_both_voiced += 1;
                let cents = cents_error(*fe, *fr)?;
                if cents.abs() >= gross_threshold_cents {
                    report.n_gross += 1;
                } else {
                    report.n_fine += 1;
                    report.fine_sum_cents += cents;
                    report.fine_sum_sq_cents += cents * cents;
                }
            }
            (Frame::Voiced { .. }, Frame::Unvoiced) | (Frame::Unvoiced, Frame::Voiced { .. }) => {
                report.n_voicing_errors += 1;
            }
            (Frame::Unvoiced, Frame::Unvoiced) => {}
        }
    }
    Ok(report)
}

/// Frame-weighted pooling: sums the counts and sufficient statistics of
/// per-file reports, so pooled rates are exactly the rates of the
/// concatenated corpus.
pub fn pool(reports: &[ErrorReport]) -> Result<ErrorReport> {
    if reports.is_empty() {
        return Err(Error::Domain("pool of zero reports".into()));
    }
    let mut out = ErrorReport::default();
    for r in reports {
        out.n_frames += r.n_frames;
        out.n_both_voiced += r.n_both_voiced;
        out.n_gross += r.n_gross;
        out.n_voicing_errors += r.n_voicing_errors;
        out.n_fine += r.n_fine;
        out.fine_sum_cents += r.fine_sum_cents;
        out.fine_sum_sq_cents += r.fine_sum_sq_cents;
    }
    Ok(out)
}

/// Unweighted per-file averages of the headline rates (files where a rate
/// is undefined are skipped for that rate). The frame-weighted [`pool`] is
/// the default reporting mode; this is the alternative view.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanRates {
    pub gpe: Option<f64>,
    pub fpe: Option<f64>,
    pub vde: f64,
    pub ffe: f64,
}

pub fn mean_rates(reports: &[ErrorReport]) -> Result<MeanRates> {
    if reports.is_empty() {
        return Err(Error::Domain("mean over zero reports".into()));
    }
    let mean_of = |vals: Vec<f64>| {
        if vals.is_empty() {
            None
        } else {
            Some(vals.iter().sum::<f64>() / vals.len() as f64)
        }
    };
    Ok(MeanRates {
        gpe: mean_of(reports.iter().filter_map(|r| r.gpe()).collect()),
        fpe: mean_of(reports.iter().filter_map(|r| r.fpe()).collect()),
        vde: reports.iter().map(|r| r.vde()).sum::<f64>() / reports.len() as f64,
        ffe: reports.iter().map(|r| r.ffe()).sum::<f64>() / reports.len() as f64,
    })
}

/// A contour whose voicing decisions were replaced by a donor's, plus a
/// mask of the frames whose F0 had to be filled in.
#[derive(Debug, Clone, PartialEq)]
pub struct VuvSubstitution {
    pub contour: PitchContour,
    /// True where the donor voiced a frame the target left unvoiced, so the
    /// F0 was filled from the target's nearest voiced frame.
    pub filled: Vec<bool>,
}

/// Replace the target's voicing decisions with the donor's, keeping the
/// target's F0 wherever it has one.
///
/// Frames the donor voices but the target does not get the F0 of the
/// target's nearest voiced frame (ties go left) and are flagged as filled;
/// if the target has no voiced frame at all, the donor's own F0 steps in.
/// Frames the donor leaves unvoiced are unvoiced, whatever the target said.
pub fn substitute_vuv(target: &PitchContour, donor: &PitchContour) -> Result<VuvSubstitution> {
    if (target.hop - donor.hop).abs() > 1e-9 {
        return Err(Error::Alignment(format!(
            "hop mismatch: target {} vs donor {}",
            target.hop, donor.hop
        )));
    }
    let n = target.len().min(donor.len());
    if target.len() != donor.len() {
        log::warn!(
            "length mismatch: target {} vs donor {} frames; substituting the first {}",
            target.len(),
            donor.len(),
            n
        );
    }
    let voiced_idx: Vec<usize> = (0..n).filter(|&i| target.frames[i].is_voiced()).collect();
    let nearest_voiced = |i: usize| -> Option<usize> {
        if voiced_idx.is_empty() {
            return None;
        }
        // first index at or after i
        let pos = voiced_idx.partition_point(|&v| v < i);
        let right = voiced_idx.get(pos).copied();
        let left = if pos > 0 { Some(voiced_idx[pos - 1]) } else { None };
        match (left, right) {
            (Some(l), Some(r)) => {
                // tie goes left
                if i - l <= r - i {
                    Some(l)
                } else {
                    Some(r)
                }
            }
            (Some(l), None) => Some(l),
            (None, Some(r)) => Some(r),
            (None, None) => None,
        }
    };

    let mut frames = Vec::with_capacity(n);
    let mut filled = vec![false; n];
    for i in 0..n {
        let out = match (&donor.frames[i], &target.frames[i]) {
            (Frame::Unvoiced, _) => Frame::Unvoiced,
            (Frame::Voiced { .. }, Frame::Voiced { f0, score }) => {
                Frame::Voiced { f0: *f0, score: *score }
            }
            (Frame::Voiced { f0: donor_f0, .. }, Frame::Unvoiced) => {
                filled[i] = true;
                match nearest_voiced(i) {
                    Some(j) => Frame::Voiced {
                        f0: target.frames[j].f0().unwrap(),
                        score: 0.0,
                    },
                    None => Frame::Voiced { f0: *donor_f0, score: 0.0 },
                }
            }
        };
        frames.push(out);
    }
    Ok(VuvSubstitution {
        contour: PitchContour::new(target.hop, frames),
        filled,
    })
}
