//! The corpus catalog: one CSV row per recording, naming the audio, its
//! reference contour, and the labels the evaluation groups by.
//!
//! Labels come from closed vocabularies so a typo in a hand-edited
//! catalog fails at load time with a line number, not as a silently
//! empty group in the results.

use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

pub const CSV_HEADER: &str = "audio_path,reference_path,singer_id,category,mechanism,exercise";

/// Singer categories the evaluation can group by.
pub const CATEGORIES: [&str; 4] = ["baritone", "countertenor", "soprano", "other"];

/// Laryngeal-mechanism labels.
pub const MECHANISMS: [&str; 3] = ["m1", "m2", "unknown"];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub audio_path: PathBuf,
    pub reference_path: PathBuf,
    pub singer_id: String,
    pub category: String,
    pub mechanism: String,
    pub exercise: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Manifest {
    pub entries: Vec<ManifestEntry>,
}

impl Manifest {
    /// Parse catalog text. `origin` only labels error messages.
    pub fn parse(text: &str, origin: &Path) -> Result<Manifest> {
        let fail = |line: u64, detail: String| Error::CsvParse {
            path: origin.to_path_buf(),
            line,
            detail,
        };
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, header)) if header.trim() == CSV_HEADER => {}
            Some((_, header)) => {
                return Err(fail(
                    1,
                    format!("expected header '{CSV_HEADER}', found '{}'", header.trim()),
                ))
            }
            None => return Err(fail(1, "empty catalog".into())),
        }

        let mut entries = Vec::new();
        for (idx, raw) in lines {
            let line_no = idx as u64 + 1;
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 6 {
                return Err(fail(
                    line_no,
                    format!("expected 6 fields, found {}", fields.len()),
                ));
            }
            let [audio, reference, singer, category, mechanism, exercise] =
                <[&str; 6]>::try_from(fields).unwrap();
            for (name, value) in [
                ("audio_path", audio),
                ("reference_path", reference),
                ("singer_id", singer),
            ] {
                if value.is_empty() {
                    return Err(fail(line_no, format!("{name} must not be empty")));
                }
            }
            if !CATEGORIES.contains(&category) {
                return Err(fail(
                    line_no,
                    format!("unknown category '{category}' (expected one of {CATEGORIES:?})"),
                ));
            }
            if !MECHANISMS.contains(&mechanism) {
                return Err(fail(
                    line_no,
                    format!("unknown mechanism '{mechanism}' (expected one of {MECHANISMS:?})"),
                ));
            }
            entries.push(ManifestEntry {
                audio_path: PathBuf::from(audio),
                reference_path: PathBuf::from(reference),
                singer_id: singer.to_string(),
                category: category.to_string(),
                mechanism: mechanism.to_string(),
                exercise: exercise.to_string(),
            });
        }
        Ok(Manifest { entries })
    }

    /// Load a catalog file; relative audio/reference paths are resolved
    /// against the catalog's own directory.
    pub fn load(path: &Path) -> Result<Manifest> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut manifest = Self::parse(&text, path)?;
        if let Some(dir) = path.parent() {
            for entry in &mut manifest.entries {
                for p in [&mut entry.audio_path, &mut entry.reference_path] {
                    if p.is_relative() {
                        *p = dir.join(&p);
                    }
                }
            }
        }
        Ok(manifest)
    }

    /// Render back to catalog CSV. Fields containing commas or newlines
    /// are rejected rather than quoted; the format stays trivially
    /// machine-splittable.
    pub fn to_csv(&self) -> Result<String> {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for (i, e) in self.entries.iter().enumerate() {
            let fields = [
                e.audio_path.to_string_lossy().into_owned(),
                e.reference_path.to_string_lossy().into_owned(),
                e.singer_id.clone(),
                e.category.clone(),
                e.mechanism.clone(),
                e.exercise.clone(),
            ];
            for f in &fields {
                if f.contains(',') || f.contains('\n') {
                    return Err(Error::Config(format!(
                        "catalog entry {i}: field '{f}' contains a comma or newline"
                    )));
                }
            }
            out.push_str(&fields.join(","));
            out.push('\n');
        }
        Ok(out)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()?).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })
    }
}
