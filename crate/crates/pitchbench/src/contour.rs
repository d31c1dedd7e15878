//! Pitch contours: the shared currency between trackers, metrics, the
//! post-filter, and file import/export.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::wav::read_to_string;

/// One analysis frame of a contour. Unvoiced frames carry no F0 and no
/// score — consumers get a hard contract instead of sentinel values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Frame {
    Voiced { f0: f64, score: f64 },
    Unvoiced,
}

impl Frame {
    pub fn is_voiced(&self) -> bool {
        matches!(self, Frame::Voiced { .. })
    }

    /// F0 in Hz for voiced frames.
    pub fn f0(&self) -> Option<f64> {
        match self {
            Frame::Voiced { f0, .. } => Some(*f0),
            Frame::Unvoiced => None,
        }
    }

    /// Tracker confidence; unvoiced frames read as 0.
    pub fn score(&self) -> f64 {
        match self {
            Frame::Voiced { score, .. } => *score,
            Frame::Unvoiced => 0.0,
        }
    }
}

/// A fixed-hop sequence of pitch frames. Frame `k` describes time
/// `k * hop` seconds.
#[derive(Debug, Clone, PartialEq)]
pub struct PitchContour {
    /// Hop between frames, seconds.
    pub hop: f64,
    pub frames: Vec<Frame>,
}

impl PitchContour {
    pub fn new(hop: f64, frames: Vec<Frame>) -> Self {
        PitchContour { hop, frames }
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn n_voiced(&self) -> usize {
        self.frames.iter().filter(|f| f.is_voiced()).count()
    }

    /// Maximal runs of consecutive voiced frames as `start..end` index
    /// ranges.
    pub fn voiced_runs(&self) -> Vec<std::ops::Range<usize>> {
        let mut runs = Vec::new();
        let mut start = None;
        for (i, f) in self.frames.iter().enumerate() {
            match (f.is_voiced(), start) {
                (true, None) => start = Some(i),
                (false, Some(s)) => {
                    runs.push(s..i);
                    start = None;
                }
                _ => {}
            }
        }
        if let Some(s) = start {
            runs.push(s..self.frames.len());
        }
        runs
    }

    /// Serialize to the contour CSV format:
    /// `time_s,f0_hz,voiced,score`, one row per frame, unvoiced rows with
    /// `f0_hz` and `score` 0. Values carry six decimal digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(32 * (self.frames.len() + 1));
        out.push_str("time_s,f0_hz,voiced,score\n");
        for (k, f) in self.frames.iter().enumerate() {
            let t = k as f64 * self.hop;
            match f {
                Frame::Voiced { f0, score } => {
                    let _ = writeln!(out, "{:.6},{:.6},1,{:.6}", t, f0, score);
                }
                Frame::Unvoiced => {
                    let _ = writeln!(out, "{:.6},0.000000,0,0.000000", t);
                }
            }
        }
        out
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }
}

/// Parse a contour CSV at its native hop (no resampling). The hop is
/// inferred from the first two rows' times; a single-row file gets hop 0.01.
pub fn load_contour(path: impl AsRef<Path>) -> Result<PitchContour> {
    let path = path.as_ref();
    let text = read_to_string(path)?;
    let (times, frames) = parse_rows(path, &text)?;
    let hop = match times.len() {
        0 => 0.01,
        1 => 0.01,
        _ => times[1] - times[0],
    };
    if hop <= 0.0 {
        return Err(Error::CsvParse {
            path: path.to_path_buf(),
            line: 3,
            detail: format!("non-increasing time column (inferred hop {hop})"),
        });
    }
    Ok(PitchContour::new(hop, frames))
}

/// Import a contour produced by an external tracker onto the target hop.
///
/// The source hop (inferred from the time column) must equal the target hop
/// or divide it; finer contours are decimated by taking every N-th frame.
/// Rows with zero F0 are unvoiced regardless of their flag.
pub fn import_external_contour(path: impl AsRef<Path>, hop: f64) -> Result<PitchContour> {
    let path = path.as_ref();
    let native = load_contour(path)?;
    if native.is_empty() {
        return Ok(PitchContour::new(hop, Vec::new()));
    }
    let ratio = hop / native.hop;
    let step = ratio.round();
    if step < 1.0 || (ratio - step).abs() > 1e-6 * step {
        return Err(Error::Alignment(format!(
            "{}: source hop {} does not divide target hop {}",
            path.display(),
            native.hop,
            hop
        )));
    }
    let step = step as usize;
    let frames = native.frames.iter().step_by(step).copied().collect();
    Ok(PitchContour::new(hop, frames))
}

fn parse_rows(path: &Path, text: &str) -> Result<(Vec<f64>, Vec<Frame>)> {
    let err = |line: u64, detail: String| Error::CsvParse {
        path: path.to_path_buf(),
        line,
        detail,
    };
    let mut lines = text.lines().enumerate();
    let header = loop {
        match lines.next() {
            Some((_, l)) if l.trim().is_empty() || l.starts_with('#') => continue,
            Some((i, l)) => break (i, l),
            None => return Err(err(1, "empty file".into())),
        }
    };
    let cols: Vec<&str> = header.1.split(',').map(str::trim).collect();
    if cols != ["time_s", "f0_hz", "voiced", "score"] {
        return Err(err(
            header.0 as u64 + 1,
            format!("expected header time_s,f0_hz,voiced,score, got '{}'", header.1.trim()),
        ));
    }

    let mut times = Vec::new();
    let mut frames = Vec::new();
    for (i, line) in lines {
        let lineno = i as u64 + 1;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 4 {
            return Err(err(lineno, format!("expected 4 fields, got {}", fields.len())));
        }
        let num = |s: &str, what: &str| {
            s.parse::<f64>()
                .map_err(|_| err(lineno, format!("bad {what} '{s}'")))
        };
        let t = num(fields[0], "time")?;
        let f0 = num(fields[1], "f0")?;
        let voiced = match fields[2] {
            "0" => false,
            "1" => true,
            other => return Err(err(lineno, format!("bad voiced flag '{other}'"))),
        };
        let score = num(fields[3], "score")?;
        if voiced && !(f0 > 0.0) {
            // tools that mark voicing but emit no F0: treat as unvoiced
            frames.push(Frame::Unvoiced);
        } else if voiced {
            frames.push(Frame::Voiced { f0, score });
        } else {
            frames.push(Frame::Unvoiced);
        }
        times.push(t);
    }
    Ok((times, frames))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn demo() -> PitchContour {
        PitchContour::new(
            0.01,
            vec![
                Frame::Voiced { f0: 220.0, score: 0.9 },
                Frame::Unvoiced,
                Frame::Voiced { f0: 220.123456789, score: 0.5 },
            ],
        )
    }

    #[test]
    fn roundtrip_preserves_flags_and_f0() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.csv");
        let c = demo();
        c.save_csv(&p).unwrap();
        let back = load_contour(&p).unwrap();
        assert_eq!(back.len(), 3);
        assert!((back.hop - 0.01).abs() < 1e-9);
        for (a, b) in c.frames.iter().zip(&back.frames) {
            assert_eq!(a.is_voiced(), b.is_voiced());
            if let (Some(fa), Some(fb)) = (a.f0(), b.f0()) {
                // six decimal digits survive the trip
                assert!((fa - fb).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn import_decimates_finer_hops() {
        // 1 ms source onto a 10 ms target: every 10th row survives
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("fine.csv");
        let frames: Vec<Frame> = (0..1000)
            .map(|i| Frame::Voiced { f0: 100.0 + i as f64, score: 1.0 })
            .collect();
        PitchContour::new(0.001, frames).save_csv(&p).unwrap();
        let c = import_external_contour(&p, 0.010).unwrap();
        assert_eq!(c.len(), 100);
        assert_eq!(c.frames[1].f0(), Some(110.0));
    }

    #[test]
    fn import_rejects_incompatible_hop() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("odd.csv");
        let frames = vec![Frame::Unvoiced; 10];
        PitchContour::new(0.003, frames).save_csv(&p).unwrap();
        assert!(import_external_contour(&p, 0.010).is_err());
    }

    #[test]
    fn zero_f0_rows_are_unvoiced() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("z.csv");
        std::fs::write(
            &p,
            "time_s,f0_hz,voiced,score\n0.0,0.0,1,0.5\n0.01,0.0,0,0.0\n",
        )
        .unwrap();
        let c = import_external_contour(&p, 0.01).unwrap();
        assert!(c.frames.iter().all(|f| !f.is_voiced()));
    }

    #[test]
    fn malformed_rows_name_the_line() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.csv");
        std::fs::write(&p, "time_s,f0_hz,voiced,score\n0.0,oops,1,0.5\n").unwrap();
        match load_contour(&p).unwrap_err() {
            Error::CsvParse { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected: {other:?}"),
        }
    }

    #[test]
    fn voiced_runs_are_maximal() {
        let v = |f0| Frame::Voiced { f0, score: 1.0 };
        let c = PitchContour::new(
            0.01,
            vec![v(100.0), v(101.0), Frame::Unvoiced, v(102.0), Frame::Unvoiced],
        );
        assert_eq!(c.voiced_runs(), vec![0..2, 3..4]);
    }
}
