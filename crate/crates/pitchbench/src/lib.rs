//! Benchmarking toolkit for pitch trackers on singing voice.
//!
//! The crate bundles five classic F0 trackers (difference-function,
//! normalized autocorrelation, cross-correlation with dynamic programming,
//! and two spectral harmonic-summation variants), the standard error
//! metrics used to score them (gross pitch error, fine pitch error, voicing
//! decision error, F0 frame error), a contour post-filter, electroglottograph
//! reference extraction, a synthetic singing-voice generator with exact
//! ground truth, image-source room reverberation, a two-stage parameter
//! optimizer, and a batch evaluation harness with CSV/JSON/SVG outputs.
//!
//! All numeric paths are deterministic: the same inputs produce
//! byte-identical report files.

pub mod contour;
pub mod dsp;
pub mod error;
pub mod groundtruth;
pub mod harness;
pub mod manifest;
pub mod metrics;
pub mod optimizer;
pub mod postfilter;
pub mod reverb;
pub mod signal;
pub mod svg;
pub mod synthvoice;
pub mod trackers;
pub mod wav;

pub use contour::{Frame, PitchContour};
pub use error::{Error, Result};
pub use metrics::ErrorReport;
pub use signal::{FrameGrid, Signal};
pub use trackers::{track, TrackerConfig, TrackerId};
