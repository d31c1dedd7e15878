//! Batch evaluation over a recording catalog: every requested tracker and
//! variant runs on every file under every acoustic condition, per-file
//! scores are pooled into grouped rows, and the run is written out as
//! versioned CSV/JSON plus plot projections with static SVG renderings.
//!
//! Files written to the output directory:
//! * `results.csv` — `# schema=1` comment, then one row per
//!   tracker x variant x condition x group with all count and rate columns;
//! * `results.json` — the same cells with per-file detail records;
//! * `gpe_by_category.csv`/`.svg`, `fpe_by_mechanism.csv`/`.svg`,
//!   `gpe_by_t60.csv`/`.svg` — plot data (GPE in percent, FPE in cents)
//!   for the best variant of each tracker, plus bar/line renderings;
//! * `skipped.txt` — one line per skipped file or failed work item
//!   (always written, empty when nothing went wrong).
//!
//! Labels compose from the tracker name: a `u` suffix marks the stock
//! parameters, the bare name marks the tuned parameters, `*` marks the
//! post-filtered tuned contour, and a `v` is inserted after the name when
//! the voicing decisions were replaced by the donor tracker's.
//!
//! Two design rules keep the comparison honest. Reverberant conditions
//! reuse the clean reference contours — the room perturbs the estimate,
//! never the truth. And external contours (imported from
//! `<import_dir>/<audio stem>.csv`) are evaluated in the clean condition
//! only, since a contour computed elsewhere cannot be re-run on
//! conditioned audio; for the same reason they carry the single variant
//! `imported` (plus `postfiltered` when requested) instead of the
//! default/optimized pair.

use std::collections::{BTreeSet, HashMap};
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use crate::contour::{import_external_contour, load_contour, PitchContour};
use crate::error::{Error, Result};
use crate::manifest::{Manifest, ManifestEntry, CATEGORIES, MECHANISMS};
use crate::metrics::{compare, pool, substitute_vuv, ErrorReport, ReportRecord};
use crate::postfilter::postprocess;
use crate::reverb::{convolve, simulate_rir, RoomSpec};
use crate::signal::Signal;
use crate::svg::{grouped_bar_chart, line_chart, Series};
use crate::trackers::{track, TrackerConfig, TrackerId};
use crate::wav::load_audio;

/// A tracker selected for a run: one of the built-in five, or a named
/// import of contours computed by some outside system.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TrackerChoice {
    Builtin(TrackerId),
    External { name: String, import_dir: PathBuf },
}

impl TrackerChoice {
    pub fn name(&self) -> &str {
        match self {
            TrackerChoice::Builtin(id) => id.name(),
            TrackerChoice::External { name, .. } => name,
        }
    }

    /// Donor voicing substitution applies to the difference-function
    /// tracker (whose own aperiodicity gate is its weak point) and to
    /// imported contours; the other built-ins keep their own decisions.
    fn accepts_donor(&self) -> bool {
        matches!(
            self,
            TrackerChoice::External { .. } | TrackerChoice::Builtin(TrackerId::Yin)
        )
    }
}

/// Parameter/post-processing variants of one tracker run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Variant {
    Default,
    Optimized,
    Postfiltered,
}

impl Variant {
    pub fn all() -> [Variant; 3] {
        [Variant::Default, Variant::Optimized, Variant::Postfiltered]
    }

    pub fn name(self) -> &'static str {
        match self {
            Variant::Default => "default",
            Variant::Optimized => "optimized",
            Variant::Postfiltered => "postfiltered",
        }
    }

    pub fn from_name(name: &str) -> Result<Variant> {
        match name.to_ascii_lowercase().as_str() {
            "default" => Ok(Variant::Default),
            "optimized" => Ok(Variant::Optimized),
            "postfiltered" => Ok(Variant::Postfiltered),
            other => Err(Error::Config(format!(
                "unknown variant '{other}' (expected default, optimized, or postfiltered)"
            ))),
        }
    }
}

/// Extra row dimensions the report can break out beyond the always-present
/// pooled `all` group.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GroupKey {
    Category,
    Mechanism,
    T60,
}

impl GroupKey {
    pub fn name(self) -> &'static str {
        match self {
            GroupKey::Category => "category",
            GroupKey::Mechanism => "mechanism",
            GroupKey::T60 => "t60",
        }
    }

    pub fn from_name(name: &str) -> Result<GroupKey> {
        match name.to_ascii_lowercase().as_str() {
            "category" => Ok(GroupKey::Category),
            "mechanism" => Ok(GroupKey::Mechanism),
            "t60" => Ok(GroupKey::T60),
            other => Err(Error::Config(format!(
                "unknown group key '{other}' (expected category, mechanism, or t60)"
            ))),
        }
    }
}

/// Everything a batch run needs besides the catalog itself.
#[derive(Debug, Clone)]
pub struct RunPlan {
    pub trackers: Vec<TrackerChoice>,
    pub variants: Vec<Variant>,
    /// Tracker whose voicing decisions replace those of the trackers that
    /// accept a donor (see [`TrackerChoice`]); run with stock parameters.
    pub vuv_donor: Option<TrackerId>,
    /// Reverberation times to evaluate in addition to the clean condition.
    pub reverb_t60s: Vec<f64>,
    pub group_by: Vec<GroupKey>,
    pub gross_threshold_cents: f64,
    pub room: RoomSpec,
}

impl Default for RunPlan {
    fn default() -> Self {
        RunPlan {
            trackers: TrackerId::all()
                .iter()
                .map(|&id| TrackerChoice::Builtin(id))
                .collect(),
            variants: Variant::all().to_vec(),
            vuv_donor: None,
            reverb_t60s: Vec::new(),
            group_by: vec![GroupKey::Category, GroupKey::Mechanism, GroupKey::T60],
            gross_threshold_cents: 100.0,
            room: RoomSpec::default(),
        }
    }
}

impl RunPlan {
    fn validate(&self) -> Result<()> {
        if self.trackers.is_empty() {
            return Err(Error::Config("run plan has no trackers".into()));
        }
        if self.variants.is_empty() {
            return Err(Error::Config("run plan has no variants".into()));
        }
        let mut names: Vec<&str> = self.trackers.iter().map(|t| t.name()).collect();
        names.sort_unstable();
        if let Some(w) = names.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::Config(format!(
                "tracker '{}' appears twice in the run plan",
                w[0]
            )));
        }
        for &t in &self.reverb_t60s {
            if !(t.is_finite() && t > 0.0) {
                return Err(Error::Config(format!(
                    "reverberation time must be positive and finite, got {t}"
                )));
            }
        }
        if !(self.gross_threshold_cents > 0.0) {
            return Err(Error::Config(format!(
                "gross threshold must be positive, got {} cents",
                self.gross_threshold_cents
            )));
        }
        self.room.validate()
    }

    /// Deduplicated, canonically ordered variants; requesting the
    /// post-filtered variant pulls in the optimized one it derives from.
    fn normalized(&self) -> RunPlan {
        let mut plan = self.clone();
        plan.variants.sort_unstable();
        plan.variants.dedup();
        if plan.variants.contains(&Variant::Postfiltered)
            && !plan.variants.contains(&Variant::Optimized)
        {
            plan.variants.push(Variant::Optimized);
            plan.variants.sort_unstable();
        }
        plan
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Condition {
    Clean,
    Reverb(f64),
}

impl Condition {
    fn label(self) -> String {
        match self {
            Condition::Clean => "clean".into(),
            Condition::Reverb(t60) => format!("t60={t60:.3}"),
        }
    }
}

/// Concrete per-tracker work units: built-in trackers expand the requested
/// variants, imports collapse the parameterized pair into `Imported`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum Slot {
    Default,
    Optimized,
    Postfiltered,
    Imported,
    ImportedPost,
}

impl Slot {
    fn variant_name(self) -> &'static str {
        match self {
            Slot::Default => "default",
            Slot::Optimized => "optimized",
            Slot::Postfiltered | Slot::ImportedPost => "postfiltered",
            Slot::Imported => "imported",
        }
    }

    fn mark(self) -> &'static str {
        match self {
            Slot::Default => "u",
            Slot::Optimized | Slot::Imported => "",
            Slot::Postfiltered | Slot::ImportedPost => "*",
        }
    }
}

fn slots_for(choice: &TrackerChoice, variants: &[Variant]) -> Vec<Slot> {
    match choice {
        TrackerChoice::Builtin(_) => variants
            .iter()
            .map(|v| match v {
                Variant::Default => Slot::Default,
                Variant::Optimized => Slot::Optimized,
                Variant::Postfiltered => Slot::Postfiltered,
            })
            .collect(),
        TrackerChoice::External { .. } => {
            let mut slots = vec![Slot::Imported];
            if variants.contains(&Variant::Postfiltered) {
                slots.push(Slot::ImportedPost);
            }
            slots
        }
    }
}

fn label_of(choice: &TrackerChoice, donor: Option<TrackerId>, slot: Slot) -> String {
    let v = if donor.is_some() && choice.accepts_donor() {
        "v"
    } else {
        ""
    };
    format!("{}{v}{}", choice.name(), slot.mark())
}

/// What a finished run produced, beyond the files on disk.
#[derive(Debug, Clone)]
pub struct RunSummary {
    /// Data rows written to `results.csv`.
    pub rows: usize,
    /// tracker x variant x condition cells evaluated.
    pub cells: usize,
    /// Catalog entries whose audio and reference both loaded.
    pub files_evaluated: usize,
    /// The `skipped.txt` lines: skipped files and failed work items.
    pub skipped: Vec<String>,
}

impl RunSummary {
    /// True when every catalog entry was evaluated everywhere it should be.
    pub fn is_complete(&self) -> bool {
        self.skipped.is_empty()
    }
}

#[derive(Serialize)]
struct FileDetail {
    audio: String,
    singer_id: String,
    category: String,
    mechanism: String,
    exercise: String,
    report: ReportRecord,
}

#[derive(Serialize)]
struct GroupRow {
    group: String,
    report: ReportRecord,
}

#[derive(Serialize)]
struct CellJson {
    tracker: String,
    variant: String,
    label: String,
    condition: String,
    groups: Vec<GroupRow>,
    files: Vec<FileDetail>,
}

#[derive(Serialize)]
struct ResultsJson {
    schema: u32,
    gross_threshold_cents: f64,
    conditions: Vec<String>,
    cells: Vec<CellJson>,
    skipped: Vec<String>,
}

struct LoadedEntry {
    audio: Signal,
    reference: PitchContour,
}

type ItemResult = std::result::Result<ErrorReport, String>;
type ItemMap = HashMap<(usize, Slot), ItemResult>;

struct CellOut {
    tracker: String,
    variant: &'static str,
    label: String,
    condition: String,
    /// (group name, pooled report) in fixed order, `all` first.
    groups: Vec<(String, ErrorReport)>,
    files: Vec<FileDetail>,
}

/// Run the full evaluation described by `plan` over `manifest`, writing
/// all report files into `out_dir` (created if missing).
///
/// Per-file problems (unreadable audio, missing reference, a tracker
/// failing on one input) never abort the run; they are recorded in
/// `skipped.txt` and reflected in the summary. Errors returned from here
/// are setup-level: an invalid plan, an empty catalog, or an unwritable
/// output directory.
pub fn run(manifest: &Manifest, plan: &RunPlan, out_dir: &Path) -> Result<RunSummary> {
    plan.validate()?;
    let plan = plan.normalized();
    if manifest.entries.is_empty() {
        return Err(Error::Domain("the catalog has no entries".into()));
    }
    fs::create_dir_all(out_dir).map_err(|source| Error::Io {
        path: out_dir.to_path_buf(),
        source,
    })?;

    let conditions: Vec<Condition> = std::iter::once(Condition::Clean)
        .chain(plan.reverb_t60s.iter().map(|&t| Condition::Reverb(t)))
        .collect();

    // Load every entry's audio and reference up front; a failure here
    // removes the file from the whole run with one skipped line.
    let loaded: Vec<std::result::Result<LoadedEntry, String>> = manifest
        .entries
        .par_iter()
        .map(|entry| {
            let audio = load_audio(&entry.audio_path)
                .map_err(|e| format!("{}: {e}", entry.audio_path.display()))?;
            let reference = load_contour(&entry.reference_path)
                .map_err(|e| format!("{}: {e}", entry.reference_path.display()))?;
            Ok(LoadedEntry { audio, reference })
        })
        .collect();

    let mut skipped: Vec<String> = loaded
        .iter()
        .filter_map(|r| r.as_err_ref().cloned())
        .collect();
    let files_evaluated = loaded.iter().filter(|r| r.is_ok()).count();

    // One impulse response per (sample rate, decay time) pair, shared by
    // every file at that rate.
    let rir_keys: Vec<(u32, f64)> = {
        let rates: BTreeSet<u32> = loaded
            .iter()
            .filter_map(|r| r.as_ref().ok())
            .map(|l| l.audio.sample_rate)
            .collect();
        rates
            .iter()
            .flat_map(|&sr| plan.reverb_t60s.iter().map(move |&t| (sr, t)))
            .collect()
    };
    let rirs: HashMap<(u32, u64), Signal> = rir_keys
        .par_iter()
        .map(|&(sr, t60)| {
            simulate_rir(&plan.room, t60, sr).map(|rir| ((sr, t60.to_bits()), rir))
        })
        .collect::<Result<_>>()?;

    // Evaluate (file, condition) items in parallel; each item covers every
    // tracker and variant so conditioning and donor tracking happen once.
    let items: Vec<(usize, usize)> = (0..manifest.entries.len())
        .filter(|&ei| loaded[ei].is_ok())
        .flat_map(|ei| (0..conditions.len()).map(move |ci| (ei, ci)))
        .collect();
    let item_outputs: Vec<((usize, usize), ItemMap)> = items
        .par_iter()
        .map(|&(ei, ci)| {
            let le = loaded[ei].as_ref().expect("items cover loaded entries");
            let cond = conditions[ci];
            let rir = match cond {
                Condition::Clean => None,
                Condition::Reverb(t60) => {
                    rirs.get(&(le.audio.sample_rate, t60.to_bits()))
                }
            };
            ((ei, ci), eval_item(&manifest.entries[ei], le, cond, rir, &plan))
        })
        .collect();
    let item_maps: HashMap<(usize, usize), ItemMap> = item_outputs.into_iter().collect();

    // Group definitions from the catalog labels (closed vocabulary order),
    // independent of which files survived loading.
    let mut group_defs: Vec<(String, Vec<usize>)> =
        vec![("all".into(), (0..manifest.entries.len()).collect())];
    if plan.group_by.contains(&GroupKey::Category) {
        for cat in CATEGORIES {
            let idxs: Vec<usize> = manifest
                .entries
                .iter()
                .enumerate()
                .filter(|(_, e)| e.category == cat)
                .map(|(i, _)| i)
                .collect();
            if !idxs.is_empty() {
                group_defs.push((format!("category={cat}"), idxs));
            }
        }
    }
    if plan.group_by.contains(&GroupKey::Mechanism) {
        for mech in MECHANISMS {
            let idxs: Vec<usize> = manifest
                .entries
                .iter()
                .enumerate()
                .filter(|(_, e)| e.mechanism == mech)
                .map(|(i, _)| i)
                .collect();
            if !idxs.is_empty() {
                group_defs.push((format!("mechanism={mech}"), idxs));
            }
        }
    }

    // Serial assembly in plan order keeps every output deterministic.
    let mut cells: Vec<CellOut> = Vec::new();
    for (ti, choice) in plan.trackers.iter().enumerate() {
        let n_conds = match choice {
            TrackerChoice::Builtin(_) => conditions.len(),
            TrackerChoice::External { .. } => 1,
        };
        for slot in slots_for(choice, &plan.variants) {
            for (ci, cond) in conditions.iter().enumerate().take(n_conds) {
                let label = label_of(choice, plan.vuv_donor, slot);
                let mut per_file: Vec<Option<ErrorReport>> =
                    vec![None; manifest.entries.len()];
                let mut files = Vec::new();
                for (ei, entry) in manifest.entries.iter().enumerate() {
                    if loaded[ei].is_err() {
                        continue;
                    }
                    match item_maps[&(ei, ci)]
                        .get(&(ti, slot))
                        .expect("every slot of a loaded item is recorded")
                    {
                        Ok(report) => {
                            per_file[ei] = Some(*report);
                            files.push(FileDetail {
                                audio: entry.audio_path.display().to_string(),
                                singer_id: entry.singer_id.clone(),
                                category: entry.category.clone(),
                                mechanism: entry.mechanism.clone(),
                                exercise: entry.exercise.clone(),
                                report: report.record(),
                            });
                        }
                        Err(msg) => skipped.push(format!(
                            "{} [{}, {label}]: {msg}",
                            entry.audio_path.display(),
                            cond.label()
                        )),
                    }
                }
                let groups = group_defs
                    .iter()
                    .map(|(name, idxs)| {
                        let reports: Vec<ErrorReport> =
                            idxs.iter().filter_map(|&ei| per_file[ei]).collect();
                        let pooled = if reports.is_empty() {
                            // all members failed or were skipped; the zero
                            // counts make that visible in the row itself
                            ErrorReport::default()
                        } else {
                            pool(&reports).expect("non-empty report set pools")
                        };
                        (name.clone(), pooled)
                    })
                    .collect();
                cells.push(CellOut {
                    tracker: choice.name().to_string(),
                    variant: slot.variant_name(),
                    label,
                    condition: cond.label(),
                    groups,
                    files,
                });
            }
        }
    }

    let rows = write_outputs(&plan, &conditions, &cells, &skipped, out_dir)?;
    Ok(RunSummary {
        rows,
        cells: cells.len(),
        files_evaluated,
        skipped,
    })
}

trait AsErrRef<E> {
    fn as_err_ref(&self) -> Option<&E>;
}

impl<T, E> AsErrRef<E> for std::result::Result<T, E> {
    fn as_err_ref(&self) -> Option<&E> {
        match self {
            Ok(_) => None,
            Err(e) => Some(e),
        }
    }
}

/// Evaluate one (file, condition) pair for every tracker and variant of
/// the plan, sharing the conditioned audio and the donor contour.
fn eval_item(
    entry: &ManifestEntry,
    le: &LoadedEntry,
    cond: Condition,
    rir: Option<&Signal>,
    plan: &RunPlan,
) -> ItemMap {
    let mut out = ItemMap::new();
    let conditioned = match cond {
        Condition::Clean => le.audio.clone(),
        Condition::Reverb(_) => {
            match convolve(&le.audio, rir.expect("impulse responses precomputed")) {
                Ok(s) => s,
                Err(e) => {
                    let msg = format!("convolution failed: {e}");
                    for (ti, choice) in plan.trackers.iter().enumerate() {
                        if matches!(choice, TrackerChoice::External { .. }) {
                            continue;
                        }
                        for slot in slots_for(choice, &plan.variants) {
                            out.insert((ti, slot), Err(msg.clone()));
                        }
                    }
                    return out;
                }
            }
        }
    };

    let donor_wanted = plan.vuv_donor.is_some()
        && plan.trackers.iter().any(|c| {
            c.accepts_donor()
                && (cond == Condition::Clean || matches!(c, TrackerChoice::Builtin(_)))
        });
    let donor: Option<std::result::Result<PitchContour, String>> = match plan.vuv_donor {
        Some(id) if donor_wanted => Some(
            track(&conditioned, id, &id.default_config())
                .map_err(|e| format!("voicing donor {id} failed: {e}")),
        ),
        _ => None,
    };
    let with_donor = |c: PitchContour| -> std::result::Result<PitchContour, String> {
        match &donor {
            Some(Ok(d)) => substitute_vuv(&c, d)
                .map(|s| s.contour)
                .map_err(|e| e.to_string()),
            Some(Err(msg)) => Err(msg.clone()),
            None => Ok(c),
        }
    };
    let score = |c: &PitchContour| -> ItemResult {
        compare(c, &le.reference, plan.gross_threshold_cents).map_err(|e| e.to_string())
    };

    for (ti, choice) in plan.trackers.iter().enumerate() {
        match choice {
            TrackerChoice::Builtin(id) => {
                let donor_applies = plan.vuv_donor.is_some() && choice.accepts_donor();
                let base = |cfg: &TrackerConfig| -> std::result::Result<PitchContour, String> {
                    let c = track(&conditioned, *id, cfg).map_err(|e| e.to_string())?;
                    if donor_applies {
                        with_donor(c)
                    } else {
                        Ok(c)
                    }
                };
                let mut tuned: Option<std::result::Result<PitchContour, String>> = None;
                for &variant in &plan.variants {
                    let est = match variant {
                        Variant::Default => base(&id.default_config()),
                        Variant::Optimized => tuned
                            .get_or_insert_with(|| base(&id.optimized_config()))
                            .clone(),
                        Variant::Postfiltered => tuned
                            .get_or_insert_with(|| base(&id.optimized_config()))
                            .clone()
                            .map(|c| postprocess(&c)),
                    };
                    let slot = slots_for(choice, &[variant])[0];
                    out.insert((ti, slot), est.and_then(|c| score(&c)));
                }
            }
            TrackerChoice::External { import_dir, .. } => {
                if cond != Condition::Clean {
                    continue;
                }
                let mut path = import_dir
                    .join(entry.audio_path.file_stem().unwrap_or_default());
                path.set_extension("csv");
                let imported = import_external_contour(&path, le.reference.hop)
                    .map_err(|e| e.to_string())
                    .and_then(&with_donor);
                out.insert(
                    (ti, Slot::Imported),
                    imported.clone().and_then(|c| score(&c)),
                );
                if plan.variants.contains(&Variant::Postfiltered) {
                    out.insert(
                        (ti, Slot::ImportedPost),
                        imported.map(|c| postprocess(&c)).and_then(|c| score(&c)),
                    );
                }
            }
        }
    }
    out
}

fn write_text(dir: &Path, name: &str, text: &str) -> Result<()> {
    let path = dir.join(name);
    fs::write(&path, text).map_err(|source| Error::Io { path, source })
}

fn fmt_pct(v: Option<f64>) -> String {
    match v {
        Some(x) => format!("{:.3}", 100.0 * x),
        None => "NA".into(),
    }
}

fn fmt_cents(v: Option<f64>) -> String {
    match v {
        Some(x) => format!("{x:.3}"),
        None => "NA".into(),
    }
}

fn nan_if_missing(v: Option<f64>) -> f64 {
    v.unwrap_or(f64::NAN)
}

/// The variant whose numbers feed the plots: the most refined one the
/// plan produced for that tracker.
fn best_slot(choice: &TrackerChoice, variants: &[Variant]) -> Slot {
    match choice {
        TrackerChoice::Builtin(_) => {
            if variants.contains(&Variant::Postfiltered) {
                Slot::Postfiltered
            } else if variants.contains(&Variant::Optimized) {
                Slot::Optimized
            } else {
                Slot::Default
            }
        }
        TrackerChoice::External { .. } => {
            if variants.contains(&Variant::Postfiltered) {
                Slot::ImportedPost
            } else {
                Slot::Imported
            }
        }
    }
}

fn write_outputs(
    plan: &RunPlan,
    conditions: &[Condition],
    cells: &[CellOut],
    skipped: &[String],
    out_dir: &Path,
) -> Result<usize> {
    // results.csv
    let mut csv = String::from("# schema=1\n");
    csv.push_str("tracker,variant,label,condition,group,");
    csv.push_str(ErrorReport::CSV_HEADER);
    csv.push('\n');
    let mut rows = 0;
    for cell in cells {
        for (group, report) in &cell.groups {
            csv.push_str(&format!(
                "{},{},{},{},{},{}\n",
                cell.tracker,
                cell.variant,
                cell.label,
                cell.condition,
                group,
                report.csv_row()
            ));
            rows += 1;
        }
    }
    write_text(out_dir, "results.csv", &csv)?;

    // results.json
    let json = ResultsJson {
        schema: 1,
        gross_threshold_cents: plan.gross_threshold_cents,
        conditions: conditions.iter().map(|c| c.label()).collect(),
        cells: cells
            .iter()
            .map(|c| CellJson {
                tracker: c.tracker.clone(),
                variant: c.variant.into(),
                label: c.label.clone(),
                condition: c.condition.clone(),
                groups: c
                    .groups
                    .iter()
                    .map(|(group, report)| GroupRow {
                        group: group.clone(),
                        report: report.record(),
                    })
                    .collect(),
                files: c
                    .files
                    .iter()
                    .map(|f| FileDetail {
                        audio: f.audio.clone(),
                        singer_id: f.singer_id.clone(),
                        category: f.category.clone(),
                        mechanism: f.mechanism.clone(),
                        exercise: f.exercise.clone(),
                        report: f.report.clone(),
                    })
                    .collect(),
            })
            .collect(),
        skipped: skipped.to_vec(),
    };
    let mut json_text = serde_json::to_string_pretty(&json)
        .map_err(|e| Error::Config(format!("serializing results: {e}")))?;
    json_text.push('\n');
    write_text(out_dir, "results.json", &json_text)?;

    // skipped.txt (always, so its absence never means "did not run")
    let mut skip_text = String::new();
    for line in skipped {
        skip_text.push_str(line);
        skip_text.push('\n');
    }
    write_text(out_dir, "skipped.txt", &skip_text)?;

    // Plot projections use the best variant of each tracker.
    let find = |tracker: &str, slot_variant: &str, condition: &str| {
        cells.iter().find(|c| {
            c.tracker == tracker && c.variant == slot_variant && c.condition == condition
        })
    };
    let group_value = |cell: &CellOut, group: &str| -> Option<ErrorReport> {
        cell.groups
            .iter()
            .find(|(g, _)| g == group)
            .map(|(_, r)| *r)
    };

    if plan.group_by.contains(&GroupKey::Category) {
        let cats: Vec<String> = {
            let mut seen = Vec::new();
            for cat in CATEGORIES {
                if cells
                    .iter()
                    .any(|c| c.groups.iter().any(|(g, _)| g == &format!("category={cat}")))
                {
                    seen.push(cat.to_string());
                }
            }
            seen
        };
        if !cats.is_empty() {
            let mut table = format!("label,{}\n", cats.join(","));
            let mut series = Vec::new();
            for choice in &plan.trackers {
                let slot = best_slot(choice, &plan.variants);
                let Some(cell) = find(choice.name(), slot.variant_name(), "clean")
                else {
                    continue;
                };
                let gpes: Vec<Option<f64>> = cats
                    .iter()
                    .map(|cat| {
                        group_value(cell, &format!("category={cat}")).and_then(|r| r.gpe())
                    })
                    .collect();
                table.push_str(&cell.label);
                for g in &gpes {
                    table.push(',');
                    table.push_str(&fmt_pct(*g));
                }
                table.push('\n');
                series.push(Series {
                    label: cell.label.clone(),
                    values: gpes.iter().map(|g| nan_if_missing(g.map(|x| 100.0 * x))).collect(),
                });
            }
            write_text(out_dir, "gpe_by_category.csv", &table)?;
            let chart = grouped_bar_chart(
                "Gross pitch error by singer category (clean)",
                &cats,
                &series,
                "GPE (%)",
            )?;
            write_text(out_dir, "gpe_by_category.svg", &chart)?;
        }
    }

    if plan.group_by.contains(&GroupKey::Mechanism) {
        let mechs: Vec<String> = {
            let mut seen = Vec::new();
            for mech in MECHANISMS {
                if cells.iter().any(|c| {
                    c.groups.iter().any(|(g, _)| g == &format!("mechanism={mech}"))
                }) {
                    seen.push(mech.to_string());
                }
            }
            seen
        };
        if !mechs.is_empty() {
            let mut table = format!("label,{}\n", mechs.join(","));
            let mut series = Vec::new();
            for choice in &plan.trackers {
                let slot = best_slot(choice, &plan.variants);
                let Some(cell) = find(choice.name(), slot.variant_name(), "clean")
                else {
                    continue;
                };
                let fpes: Vec<Option<f64>> = mechs
                    .iter()
                    .map(|mech| {
                        group_value(cell, &format!("mechanism={mech}")).and_then(|r| r.fpe())
                    })
                    .collect();
                table.push_str(&cell.label);
                for f in &fpes {
                    table.push(',');
                    table.push_str(&fmt_cents(*f));
                }
                table.push('\n');
                series.push(Series {
                    label: cell.label.clone(),
                    values: fpes.iter().map(|f| nan_if_missing(*f)).collect(),
                });
            }
            write_text(out_dir, "fpe_by_mechanism.csv", &table)?;
            let chart = grouped_bar_chart(
                "Fine pitch error by laryngeal mechanism (clean)",
                &mechs,
                &series,
                "FPE (cents)",
            )?;
            write_text(out_dir, "fpe_by_mechanism.svg", &chart)?;
        }
    }

    if plan.group_by.contains(&GroupKey::T60) && !plan.reverb_t60s.is_empty() {
        let reverb_labels: Vec<String> = conditions
            .iter()
            .filter(|c| **c != Condition::Clean)
            .map(|c| c.label())
            .collect();
        let mut table = format!("label,{}\n", reverb_labels.join(","));
        let mut series = Vec::new();
        for choice in &plan.trackers {
            if matches!(choice, TrackerChoice::External { .. }) {
                continue; // imports are clean-only
            }
            let slot = best_slot(choice, &plan.variants);
            let gpes: Vec<Option<f64>> = reverb_labels
                .iter()
                .map(|cond| {
                    find(choice.name(), slot.variant_name(), cond)
                        .and_then(|cell| group_value(cell, "all"))
                        .and_then(|r| r.gpe())
                })
                .collect();
            let label = label_of(choice, plan.vuv_donor, slot);
            table.push_str(&label);
            for g in &gpes {
                table.push(',');
                table.push_str(&fmt_pct(*g));
            }
            table.push('\n');
            series.push(Series {
                label,
                values: gpes.iter().map(|g| nan_if_missing(g.map(|x| 100.0 * x))).collect(),
            });
        }
        write_text(out_dir, "gpe_by_t60.csv", &table)?;
        if !series.is_empty() {
            let chart = line_chart(
                "Gross pitch error vs reverberation time",
                &plan.reverb_t60s,
                &series,
                "T60 (s)",
                "GPE (%)",
            )?;
            write_text(out_dir, "gpe_by_t60.svg", &chart)?;
        }
    }

    Ok(rows)
}
