//! Command-line front end: batch evaluation over a catalog, parameter
//! search, reference extraction from contact signals, synthetic-corpus
//! rendering, and impulse-response generation.

use std::collections::HashMap;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::Serialize;

use pitchbench::contour::load_contour;
use pitchbench::groundtruth::extract_reference;
use pitchbench::harness::{self, GroupKey, RunPlan, TrackerChoice, Variant};
use pitchbench::manifest::{Manifest, ManifestEntry};
use pitchbench::metrics::ReportRecord;
use pitchbench::optimizer::{optimize, optimize_exhaustive, trials_to_csv, OptimizationGrid};
use pitchbench::reverb::{schroeder_t60, simulate_rir, RoomSpec};
use pitchbench::signal::Signal;
use pitchbench::synthvoice::{standard_corpus, synthesize};
use pitchbench::wav::{load_audio, load_audio_channel, save_audio};
use pitchbench::{Error, PitchContour, Result, TrackerConfig, TrackerId};

#[derive(Parser)]
#[command(
    name = "pitchbench",
    version,
    about = "Pitch tracking and evaluation for singing voice",
    after_help = "The PITCHBENCH_SEED environment variable is reserved for future \
                  stochastic features; every current code path is deterministic."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate trackers over a catalog and write grouped reports
    Eval(EvalArgs),
    /// Search voicing thresholds and window lengths on a catalog
    Optimize(OptimizeArgs),
    /// Extract a reference contour from an electroglottograph recording
    Groundtruth(GroundtruthArgs),
    /// Render the built-in synthetic corpus to WAV/CSV plus a catalog
    Synth(SynthArgs),
    /// Render room impulse responses for a list of decay times
    Rir(RirArgs),
}

#[derive(Args)]
struct EvalArgs {
    /// Catalog CSV (audio_path,reference_path,singer_id,category,mechanism,exercise)
    #[arg(long)]
    manifest: PathBuf,
    /// Output directory for results.csv, results.json, plots, skipped.txt
    #[arg(long)]
    out: PathBuf,
    /// Comma-separated trackers: yin,acf,nccf,srh,ssh and/or external:<name>
    #[arg(long, default_value = "yin,acf,nccf,srh,ssh")]
    trackers: String,
    /// Contour directory for an external tracker, as <name>=<dir>; repeatable
    #[arg(long = "import", value_name = "NAME=DIR")]
    imports: Vec<String>,
    /// Comma-separated variants: default,optimized,postfiltered
    #[arg(long, default_value = "default,optimized,postfiltered")]
    variants: String,
    /// Tracker donating voicing decisions to yin and imported contours
    #[arg(long)]
    vuv_donor: Option<TrackerId>,
    /// Comma-separated reverberation times in seconds (empty = clean only)
    #[arg(long, default_value = "")]
    t60: String,
    /// Comma-separated grouping keys: category,mechanism,t60
    #[arg(long, default_value = "category,mechanism,t60")]
    group_by: String,
    /// Gross-error threshold in cents
    #[arg(long, default_value_t = 100.0)]
    gross_cents: f64,
    /// Worker threads (default: all cores)
    #[arg(long, short)]
    jobs: Option<usize>,
}

#[derive(Args)]
struct OptimizeArgs {
    /// Catalog CSV naming the tuning recordings and references
    #[arg(long)]
    manifest: PathBuf,
    /// Output directory for per-tracker trial logs and optimized.json
    #[arg(long)]
    out: PathBuf,
    /// Comma-separated built-in trackers to tune
    #[arg(long, default_value = "yin,acf,nccf,srh,ssh")]
    trackers: String,
    /// Override the threshold candidates (comma-separated)
    #[arg(long)]
    thresholds: Option<String>,
    /// Override the window-length candidates in seconds (comma-separated)
    #[arg(long)]
    windows: Option<String>,
    /// Search the full threshold x window product instead of two stages
    #[arg(long)]
    exhaustive: bool,
    /// Gross-error threshold in cents
    #[arg(long, default_value_t = 100.0)]
    gross_cents: f64,
    /// Worker threads (default: all cores)
    #[arg(long, short)]
    jobs: Option<usize>,
}

#[derive(Args)]
struct GroundtruthArgs {
    /// Electroglottograph WAV recording
    #[arg(long)]
    egg: PathBuf,
    /// Channel to read from a multichannel file, 0-based (default: mixdown)
    #[arg(long)]
    channel: Option<usize>,
    /// Output contour CSV
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SynthArgs {
    /// Output directory (audio, contact signals, references, manifest.csv)
    #[arg(long)]
    out: PathBuf,
    /// Sample rate override in Hz
    #[arg(long)]
    sample_rate: Option<u32>,
    /// Scale on the pitch micro-wobble (0 = mathematically exact pitch)
    #[arg(long, default_value_t = 1.0)]
    wobble_scale: f64,
    /// Worker threads (default: all cores)
    #[arg(long, short)]
    jobs: Option<usize>,
}

#[derive(Args)]
struct RirArgs {
    /// Comma-separated decay times in seconds
    #[arg(long)]
    t60: String,
    /// Sample rate in Hz
    #[arg(long, default_value_t = 22050)]
    sample_rate: u32,
    /// Output directory
    #[arg(long)]
    out: PathBuf,
    /// Room interior dimensions in meters, e.g. 3.0,4.0,5.0
    #[arg(long)]
    room: Option<String>,
    /// Source position in meters, e.g. 1.0,1.5,1.5
    #[arg(long)]
    source: Option<String>,
    /// Microphone position in meters, e.g. 2.0,2.5,1.5
    #[arg(long)]
    mic: Option<String>,
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Eval(args) => cmd_eval(args),
        Command::Optimize(args) => cmd_optimize(args),
        Command::Groundtruth(args) => cmd_groundtruth(args),
        Command::Synth(args) => cmd_synth(args),
        Command::Rir(args) => cmd_rir(args),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn split_list(s: &str) -> Vec<&str> {
    s.split(',')
        .map(str::trim)
        .filter(|x| !x.is_empty())
        .collect()
}

fn parse_f64_list(s: &str, what: &str) -> Result<Vec<f64>> {
    split_list(s)
        .iter()
        .map(|x| {
            x.parse::<f64>()
                .map_err(|_| Error::Config(format!("bad {what} value '{x}'")))
        })
        .collect()
}

fn parse_position(s: &str, what: &str) -> Result<[f64; 3]> {
    let v = parse_f64_list(s, what)?;
    v.try_into()
        .map_err(|_| Error::Config(format!("{what} needs exactly three numbers, got '{s}'")))
}

fn parse_trackers(spec: &str, imports: &[String]) -> Result<Vec<TrackerChoice>> {
    let mut import_dirs: HashMap<String, PathBuf> = HashMap::new();
    for item in imports {
        let (name, dir) = item.split_once('=').ok_or_else(|| {
            Error::Config(format!("--import takes <name>=<dir>, got '{item}'"))
        })?;
        import_dirs.insert(name.trim().to_string(), PathBuf::from(dir.trim()));
    }
    let mut trackers = Vec::new();
    for item in split_list(spec) {
        if let Some(name) = item.strip_prefix("external:") {
            let import_dir = import_dirs.remove(name).ok_or_else(|| {
                Error::Config(format!(
                    "external tracker '{name}' needs a matching --import {name}=<dir>"
                ))
            })?;
            trackers.push(TrackerChoice::External {
                name: name.to_string(),
                import_dir,
            });
        } else {
            trackers.push(TrackerChoice::Builtin(TrackerId::from_name(item)?));
        }
    }
    if let Some(name) = import_dirs.keys().next() {
        return Err(Error::Config(format!(
            "--import {name}=... has no external:{name} in --trackers"
        )));
    }
    Ok(trackers)
}

fn init_jobs(jobs: Option<usize>) -> Result<()> {
    if let Some(n) = jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(format!("cannot size the thread pool: {e}")))?;
    }
    Ok(())
}

fn load_dataset(manifest: &Manifest) -> Result<Vec<(Signal, PitchContour)>> {
    manifest
        .entries
        .par_iter()
        .map(|entry| {
            let audio = load_audio(&entry.audio_path)?;
            let reference = load_contour(&entry.reference_path)?;
            Ok((audio, reference))
        })
        .collect()
}

fn cmd_eval(args: EvalArgs) -> Result<ExitCode> {
    init_jobs(args.jobs)?;
    let manifest = Manifest::load(&args.manifest)?;
    let plan = RunPlan {
        trackers: parse_trackers(&args.trackers, &args.imports)?,
        variants: split_list(&args.variants)
            .iter()
            .map(|v| Variant::from_name(v))
            .collect::<Result<_>>()?,
        vuv_donor: args.vuv_donor,
        reverb_t60s: parse_f64_list(&args.t60, "t60")?,
        group_by: split_list(&args.group_by)
            .iter()
            .map(|g| GroupKey::from_name(g))
            .collect::<Result<_>>()?,
        gross_threshold_cents: args.gross_cents,
        room: RoomSpec::default(),
    };
    let summary = harness::run(&manifest, &plan, &args.out)?;
    println!(
        "evaluated {} files across {} cells ({} rows) -> {}",
        summary.files_evaluated,
        summary.cells,
        summary.rows,
        args.out.display()
    );
    if summary.is_complete() {
        Ok(ExitCode::SUCCESS)
    } else {
        eprintln!("{} work items skipped or failed:", summary.skipped.len());
        for line in &summary.skipped {
            eprintln!("  {line}");
        }
        Ok(ExitCode::from(1))
    }
}

#[derive(Serialize)]
struct OptimizedEntry {
    tracker: String,
    mode: &'static str,
    config: TrackerConfig,
    report: ReportRecord,
}

fn cmd_optimize(args: OptimizeArgs) -> Result<ExitCode> {
    init_jobs(args.jobs)?;
    let manifest = Manifest::load(&args.manifest)?;
    let dataset = load_dataset(&manifest)?;
    std::fs::create_dir_all(&args.out).map_err(|source| Error::Io {
        path: args.out.clone(),
        source,
    })?;
    let thresholds = args
        .thresholds
        .as_deref()
        .map(|s| parse_f64_list(s, "threshold"))
        .transpose()?;
    let windows = args
        .windows
        .as_deref()
        .map(|s| parse_f64_list(s, "window"))
        .transpose()?;
    let mode = if args.exhaustive { "exhaustive" } else { "two-stage" };

    let mut chosen = Vec::new();
    for name in split_list(&args.trackers) {
        let tracker = TrackerId::from_name(name)?;
        let mut grid = OptimizationGrid::default_for(tracker);
        if let Some(t) = &thresholds {
            grid.thresholds = t.clone();
        }
        if let Some(w) = &windows {
            grid.windows = w.clone();
        }
        let result = if args.exhaustive {
            optimize_exhaustive(tracker, &dataset, &grid, args.gross_cents)?
        } else {
            optimize(tracker, &dataset, &grid, args.gross_cents)?
        };
        let trials_path = args.out.join(format!("{tracker}_trials.csv"));
        std::fs::write(&trials_path, trials_to_csv(&result.trials)).map_err(|source| {
            Error::Io {
                path: trials_path,
                source,
            }
        })?;
        println!(
            "{tracker}: threshold {:.3}, window {:.3} s, FFE {:.3}%, VDE {:.3}% ({} trials)",
            result.config.voicing_threshold,
            result.config.window_length,
            100.0 * result.report.ffe(),
            100.0 * result.report.vde(),
            result.trials.len()
        );
        chosen.push(OptimizedEntry {
            tracker: tracker.name().to_string(),
            mode,
            config: result.config,
            report: result.report.record(),
        });
    }
    let mut json = serde_json::to_string_pretty(&chosen)
        .map_err(|e| Error::Config(format!("serializing optimized configs: {e}")))?;
    json.push('\n');
    let json_path = args.out.join("optimized.json");
    std::fs::write(&json_path, json).map_err(|source| Error::Io {
        path: json_path,
        source,
    })?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_groundtruth(args: GroundtruthArgs) -> Result<ExitCode> {
    let egg = load_audio_channel(&args.egg, args.channel)?;
    let truth = extract_reference(&egg)?;
    truth.contour.save_csv(&args.out)?;
    println!(
        "{} -> {} ({} frames, {:.2}% disagreement between contact and derivative)",
        args.egg.display(),
        args.out.display(),
        truth.contour.len(),
        100.0 * truth.disagreement_rate
    );
    if truth.flagged {
        eprintln!(
            "warning: the two extractions disagree on more than 5% of frames; \
             inspect this recording before trusting the reference"
        );
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_synth(args: SynthArgs) -> Result<ExitCode> {
    init_jobs(args.jobs)?;
    if !(args.wobble_scale.is_finite() && args.wobble_scale >= 0.0) {
        return Err(Error::Config(format!(
            "wobble scale must be non-negative, got {}",
            args.wobble_scale
        )));
    }
    let (corpus_rate, items) = standard_corpus();
    let sample_rate = args.sample_rate.unwrap_or(corpus_rate);
    std::fs::create_dir_all(&args.out).map_err(|source| Error::Io {
        path: args.out.clone(),
        source,
    })?;
    let entries: Vec<ManifestEntry> = items
        .par_iter()
        .map(|item| {
            let mut voice = item.voice.clone();
            voice.wobble_scale *= args.wobble_scale;
            let rendered = synthesize(&voice, sample_rate)?;
            let audio_name = format!("{}.wav", item.id);
            let egg_name = format!("{}_egg.wav", item.id);
            let ref_name = format!("{}_ref.csv", item.id);
            save_audio(args.out.join(&audio_name), &rendered.audio)?;
            save_audio(args.out.join(&egg_name), &rendered.egg)?;
            rendered.truth.save_csv(args.out.join(&ref_name))?;
            Ok(ManifestEntry {
                audio_path: PathBuf::from(audio_name),
                reference_path: PathBuf::from(ref_name),
                singer_id: format!("{}-synth", item.voice.register.name()),
                category: item.voice.register.name().to_string(),
                mechanism: item.voice.mechanism.name().to_string(),
                exercise: item.exercise.clone(),
            })
        })
        .collect::<Result<_>>()?;
    let manifest = Manifest { entries };
    manifest.save(&args.out.join("manifest.csv"))?;
    println!(
        "wrote {} items at {} Hz plus manifest.csv to {}",
        manifest.entries.len(),
        sample_rate,
        args.out.display()
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_rir(args: RirArgs) -> Result<ExitCode> {
    let t60s = parse_f64_list(&args.t60, "t60")?;
    if t60s.is_empty() {
        return Err(Error::Config("no decay times given".into()));
    }
    let mut room = RoomSpec::default();
    if let Some(s) = &args.room {
        room.dimensions = parse_position(s, "room")?;
    }
    if let Some(s) = &args.source {
        room.source = parse_position(s, "source")?;
    }
    if let Some(s) = &args.mic {
        room.microphone = parse_position(s, "mic")?;
    }
    std::fs::create_dir_all(&args.out).map_err(|source| Error::Io {
        path: args.out.clone(),
        source,
    })?;
    for t60 in t60s {
        let rir = simulate_rir(&room, t60, args.sample_rate)?;
        let measured = schroeder_t60(&rir)?;
        let name = format!("rir_t60_{t60:.3}.wav");
        save_audio(args.out.join(&name), &rir)?;
        println!("{name}: measured T60 {measured:.3} s (target {t60:.3} s)");
    }
    Ok(ExitCode::SUCCESS)
}
