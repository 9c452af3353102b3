//! Command line front end for the papillae pipeline.
//!
//! Every subcommand reads the same TOML config (`--config`), derives all
//! randomness from one seed (`--seed` overrides the config), and writes
//! fixed-name artifacts into `--out`. Identical inputs and seed give
//! byte-identical artifacts.
//!
//! Exit codes: 0 success, 2 usage, 3 data error, 4 numeric failure.

mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use papillae::features::{featurize_batch, feature_names, FeatureConfig};
use papillae::learn::{
    self, best_random_split, logo_eval, permutation_importance, pca_project, random_split_eval,
    train, ClassifierModel, FeatureTable, ImportanceEntry, RowMeta,
};
use papillae::map::{map_surface, match_detections, overlay_svg};
use papillae::mesh::{load_surface, ply, TriangleMesh};
use papillae::rng;
use papillae::segment::{scan_segments, Segment};
use papillae::synth::gen::{gen_corpus, gen_sheet, save_corpus, SheetTruth};
use papillae::{Error, Result};

use config::{PipelineConfig, Protocol};

#[derive(Parser)]
#[command(
    name = "papillae",
    version,
    about = "Detect, featurize, and classify papillae-scale surface protrusions"
)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct Global {
    /// Master seed; overrides the config file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// TOML pipeline configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads (default: one per core).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output directory for artifacts.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a labeled synthetic corpus, or a populated sheet with
    /// ground truth (--sheet).
    Synth {
        /// Segments per class.
        #[arg(long, default_value_t = 100)]
        per_class: usize,
        /// Synthetic participants to spread segments over.
        #[arg(long, default_value_t = 5)]
        participants: usize,
        /// Generate a WIDTHxDEPTH µm sheet instead of a corpus.
        #[arg(long, value_name = "WxD")]
        sheet: Option<String>,
    },
    /// Scan a surface for candidate protrusions and cut segments.
    Extract {
        /// Surface mesh (.ply or .obj).
        #[arg(long)]
        surface: PathBuf,
        /// Stop after this many accepted segments.
        #[arg(long, default_value_t = 64)]
        max_segments: usize,
    },
    /// Compute the feature table of a segment directory.
    Featurize {
        /// Directory of segment .ply/.json pairs.
        #[arg(long)]
        segments: PathBuf,
    },
    /// Fit a classifier on a feature CSV and write model + eval report.
    Train {
        #[arg(long)]
        features: PathBuf,
    },
    /// Run the configured evaluation protocol and write its report.
    Evaluate {
        #[arg(long)]
        features: PathBuf,
    },
    /// Rank features by permutation importance.
    Importance {
        #[arg(long)]
        features: PathBuf,
        /// Trained model JSON (omit with --best-split).
        #[arg(long)]
        model: Option<PathBuf>,
        /// Train on the best of the configured random splits and rank
        /// importance on that split's held-out rows.
        #[arg(long)]
        best_split: bool,
        /// Shuffles per feature.
        #[arg(long, default_value_t = 30)]
        n_perm: usize,
    },
    /// Sweep a surface, classify every candidate, and write the map.
    Map {
        #[arg(long)]
        surface: PathBuf,
        #[arg(long)]
        model: PathBuf,
        /// Also write an overhead SVG overlay.
        #[arg(long)]
        svg: bool,
        /// Ground-truth placements JSON; adds a match report.
        #[arg(long)]
        truth: Option<PathBuf>,
    },
    /// Project a feature CSV onto its top principal components.
    Pca {
        #[arg(long)]
        features: PathBuf,
        #[arg(long, default_value_t = 2)]
        dims: usize,
    },
}

/// Command failures split by exit code: flag misuse is 2, everything
/// from the pipeline keeps the library's data/numeric distinction.
enum CliError {
    Usage(String),
    Core(Error),
}

impl<E: Into<Error>> From<E> for CliError {
    fn from(e: E) -> Self {
        CliError::Core(e.into())
    }
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

type CliResult<T> = std::result::Result<T, CliError>;

fn main() -> ExitCode {
    env_logger::init();
    let cli = Cli::parse();
    if let Some(n) = cli.global.threads {
        if rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .is_err()
        {
            return fail(2, "thread pool already initialized");
        }
    }
    let cfg = match &cli.global.config {
        Some(path) => match PipelineConfig::load(path) {
            Ok(c) => c,
            Err(e) => return fail(3, &e.to_string()),
        },
        None => PipelineConfig::default(),
    };
    let seed = cli.global.seed.unwrap_or(cfg.seed);
    match run(cli.cmd, &cli.global.out, &cfg, seed) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => fail(2, &msg),
        Err(CliError::Core(e)) => {
            let code = match e {
                Error::Numeric(_) => 4,
                _ => 3,
            };
            fail(code, &e.to_string())
        }
    }
}

/// Single-line machine-readable error on stderr.
fn fail(code: u8, message: &str) -> ExitCode {
    eprintln!(
        "{}",
        serde_json::json!({ "error": message, "code": code })
    );
    ExitCode::from(code)
}

fn emit(value: serde_json::Value) {
    println!("{value}");
}

fn run(cmd: Cmd, out: &Path, cfg: &PipelineConfig, seed: u64) -> CliResult<()> {
    std::fs::create_dir_all(out)?;
    match cmd {
        Cmd::Synth {
            per_class,
            participants,
            sheet,
        } => cmd_synth(out, cfg, seed, per_class, participants, sheet),
        Cmd::Extract {
            surface,
            max_segments,
        } => cmd_extract(out, cfg, seed, &surface, max_segments),
        Cmd::Featurize { segments } => cmd_featurize(out, cfg, seed, &segments),
        Cmd::Train { features } => cmd_train(out, cfg, seed, &features),
        Cmd::Evaluate { features } => cmd_evaluate(out, cfg, seed, &features),
        Cmd::Importance {
            features,
            model,
            best_split,
            n_perm,
        } => cmd_importance(out, cfg, seed, &features, model.as_deref(), best_split, n_perm),
        Cmd::Map {
            surface,
            model,
            svg,
            truth,
        } => cmd_map(out, cfg, seed, &surface, &model, svg, truth.as_deref()),
        Cmd::Pca { features, dims } => cmd_pca(out, &features, dims),
    }
}

fn cmd_synth(
    out: &Path,
    cfg: &PipelineConfig,
    seed: u64,
    per_class: usize,
    participants: usize,
    sheet: Option<String>,
) -> CliResult<()> {
    if let Some(dims) = sheet {
        let (w, d) = parse_dims(&dims)?;
        let (mesh, placements) = gen_sheet(&cfg.synth, w, d, seed)?;
        let mesh_path = out.join("sheet.ply");
        ply::save(&mesh, &mesh_path, ply::PlyFormat::BinaryLittleEndian)?;
        let truth_path = out.join("placements.json");
        SheetTruth::new(placements.clone()).save(&truth_path)?;
        emit(serde_json::json!({
            "sheet": mesh_path, "placements": placements.len(), "truth": truth_path,
        }));
        return Ok(());
    }
    let entries = gen_corpus(&cfg.synth, per_class, participants, seed)?;
    save_corpus(&entries, out)?;
    emit(serde_json::json!({
        "segments": entries.len(), "manifest": out.join("manifest.csv"),
    }));
    Ok(())
}

fn parse_dims(s: &str) -> CliResult<(f64, f64)> {
    let bad = || usage(format!("--sheet expects WIDTHxDEPTH in µm, got `{s}`"));
    let (w, d) = s.split_once(['x', 'X']).ok_or_else(bad)?;
    let w: f64 = w.trim().parse().map_err(|_| bad())?;
    let d: f64 = d.trim().parse().map_err(|_| bad())?;
    if !(w > 0.0 && d > 0.0) {
        return Err(bad());
    }
    Ok((w, d))
}

fn cmd_extract(
    out: &Path,
    cfg: &PipelineConfig,
    seed: u64,
    surface: &Path,
    max_segments: usize,
) -> CliResult<()> {
    let mesh: TriangleMesh<f64> = load_surface(surface)?;
    let mut ex = cfg.features.extraction.clone();
    ex.seed = seed;
    let segments = scan_segments(&mesh, &ex, max_segments);
    for (i, s) in segments.iter().enumerate() {
        papillae::segment::save_segment(s, out, &format!("seg-{i:04}"))?;
    }
    emit(serde_json::json!({ "segments": segments.len(), "dir": out }));
    Ok(())
}

/// Segment ids in a directory: every `.json` sidecar with a mesh next to
/// it, sorted for deterministic table order.
fn segment_ids(dir: &Path) -> Result<Vec<String>> {
    let mut ids = Vec::new();
    for entry in std::fs::read_dir(dir)? {
        let path = entry?.path();
        if path.extension().is_some_and(|e| e == "json") {
            if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                if path.with_extension("ply").exists() {
                    ids.push(stem.to_string());
                }
            }
        }
    }
    ids.sort();
    if ids.is_empty() {
        return Err(Error::invalid(format!(
            "no segments (.ply + .json pairs) in {}",
            dir.display()
        )));
    }
    Ok(ids)
}

fn cmd_featurize(out: &Path, cfg: &PipelineConfig, seed: u64, dir: &Path) -> CliResult<()> {
    let ids = segment_ids(dir)?;
    let items: Vec<(String, Segment<f64>)> = ids
        .iter()
        .map(|id| Ok((id.clone(), papillae::segment::load_segment(dir, id)?)))
        .collect::<Result<_>>()?;
    let feature_cfg: FeatureConfig<f64> = cfg.features.clone();
    let rows = featurize_batch(&items, &feature_cfg, seed)?;

    let names: Vec<String> = feature_names().iter().map(|s| s.to_string()).collect();
    let mut table = FeatureTable::new(names);
    for ((id, segment), row) in items.iter().zip(rows) {
        let attr = |k: &str| segment.group_attrs.get(k).cloned().unwrap_or_default();
        table.push_row(
            RowMeta {
                id: id.clone(),
                participant: segment.participant.clone(),
                label_type: segment.label.as_str().to_string(),
                label_gender: attr("gender"),
                label_age_group: attr("age_group"),
            },
            row,
        )?;
    }
    let csv_path = out.join("features.csv");
    table.write_csv(&csv_path)?;
    emit(serde_json::json!({ "rows": table.len(), "csv": csv_path }));
    Ok(())
}

/// Apply the configured column subset and correlation filter.
fn prepare_table(cfg: &PipelineConfig, path: &Path) -> Result<FeatureTable> {
    let mut table = FeatureTable::read_csv(path)?;
    if !cfg.train.features.is_empty() {
        let names: Vec<&str> = cfg.train.features.iter().map(|s| s.as_str()).collect();
        table = table.select_features(&names)?;
    }
    if let Some(threshold) = cfg.train.correlation_threshold {
        table = learn::correlation_filter(&table, threshold)?;
    }
    Ok(table)
}

fn write_report(out: &Path, report: &learn::EvalReport) -> Result<PathBuf> {
    let path = out.join("report.json");
    report.save(&path)?;
    Ok(path)
}

fn evaluate_table(cfg: &PipelineConfig, table: &FeatureTable, seed: u64) -> Result<learn::EvalReport> {
    match cfg.train.protocol {
        Protocol::RandomSplit => {
            random_split_eval(table, &cfg.train.label, &cfg.eval_config(seed))
        }
        Protocol::Logo => logo_eval(
            table,
            &cfg.train.label,
            &cfg.train.group,
            &cfg.model,
            seed,
        ),
    }
}

fn cmd_train(out: &Path, cfg: &PipelineConfig, seed: u64, features: &Path) -> CliResult<()> {
    let table = prepare_table(cfg, features)?;
    let report = evaluate_table(cfg, &table, seed)?;
    let report_path = write_report(out, &report)?;
    let final_cfg = cfg.model.with_seed(rng::derive(seed, "final-model"));
    let model = train(&table, &cfg.train.label, &final_cfg)?;
    let model_path = out.join("model.json");
    model.save(&model_path)?;
    emit(serde_json::json!({
        "model": model_path, "report": report_path,
        "protocol": report.protocol, "mean": report.mean, "stdev": report.stdev,
    }));
    Ok(())
}

fn cmd_evaluate(out: &Path, cfg: &PipelineConfig, seed: u64, features: &Path) -> CliResult<()> {
    let table = prepare_table(cfg, features)?;
    let report = evaluate_table(cfg, &table, seed)?;
    let report_path = write_report(out, &report)?;
    emit(serde_json::json!({
        "report": report_path, "protocol": report.protocol,
        "mean": report.mean, "stdev": report.stdev, "folds": report.folds,
    }));
    Ok(())
}

fn write_importance_csv(path: &Path, ranked: &[ImportanceEntry]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["feature", "importance", "stdev"])?;
    for e in ranked {
        w.write_record(&[
            e.feature.clone(),
            learn::format_float(e.importance),
            learn::format_float(e.stdev),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn cmd_importance(
    out: &Path,
    cfg: &PipelineConfig,
    seed: u64,
    features: &Path,
    model: Option<&Path>,
    best_split: bool,
    n_perm: usize,
) -> CliResult<()> {
    if model.is_some() == best_split {
        return Err(usage(
            "importance needs exactly one of --model or --best-split",
        ));
    }
    let table = prepare_table(cfg, features)?;
    let (model, rows): (ClassifierModel, FeatureTable) = match model {
        Some(path) => {
            let model = ClassifierModel::load(path)?;
            let names: Vec<&str> = model.feature_names.iter().map(|s| s.as_str()).collect();
            let rows = table.select_features(&names)?;
            (model, rows)
        }
        None => {
            let (model, test_idx, _) =
                best_random_split(&table, &cfg.train.label, &cfg.eval_config(seed))?;
            let held_out = table.subset_rows(&test_idx);
            (model, held_out)
        }
    };
    let ranked = permutation_importance(
        &model,
        &rows,
        &cfg.train.label,
        n_perm,
        rng::derive(seed, "importance"),
    )?;
    let csv_path = out.join("importance.csv");
    write_importance_csv(&csv_path, &ranked)?;
    emit(serde_json::json!({
        "csv": csv_path, "top": ranked[0].feature, "importance": ranked[0].importance,
    }));
    Ok(())
}

fn cmd_map(
    out: &Path,
    cfg: &PipelineConfig,
    seed: u64,
    surface: &Path,
    model: &Path,
    svg: bool,
    truth: Option<&Path>,
) -> CliResult<()> {
    let mesh: TriangleMesh<f64> = load_surface(surface)?;
    let model = ClassifierModel::load(model)?;
    let map = map_surface(&mesh, &model, &cfg.map_config(seed))?;
    let map_path = out.join("map.json");
    map.save(&map_path)?;
    let mut summary = serde_json::json!({
        "map": map_path, "detections": map.detections.len(),
    });

    let truths = match truth {
        Some(path) => SheetTruth::<f64>::load(path)?.placements,
        None => Vec::new(),
    };
    if truth.is_some() {
        let report = match_detections(&map.detections, &truths, 50.0);
        let match_path = out.join("match.json");
        let mut text = serde_json::to_string_pretty(&report)?;
        text.push('\n');
        std::fs::write(&match_path, text)?;
        summary["match"] = serde_json::json!({
            "path": match_path, "truths": report.truths,
            "correct": report.correct, "spurious": report.spurious,
        });
    }
    if svg {
        let Some((lo, hi)) = mesh.bounding_box() else {
            return Err(Error::invalid("cannot plot an empty mesh").into());
        };
        let svg_path = out.join("map.svg");
        std::fs::write(
            &svg_path,
            overlay_svg(&map.detections, &truths, hi.x - lo.x, hi.y - lo.y),
        )?;
        summary["svg"] = serde_json::json!(svg_path);
    }
    emit(summary);
    Ok(())
}

fn cmd_pca(out: &Path, features: &Path, dims: usize) -> CliResult<()> {
    let table = FeatureTable::read_csv(features)?;
    let proj = pca_project(&table, dims)?;

    let csv_path = out.join("pca.csv");
    let mut w = csv::Writer::from_path(&csv_path)?;
    let mut header = vec!["id".to_string(), "participant".to_string(), "label_type".to_string()];
    header.extend((1..=dims).map(|k| format!("pc{k}")));
    w.write_record(&header)?;
    for (i, coords) in proj.coords.iter().enumerate() {
        let mut rec = vec![
            table.ids[i].clone(),
            table.participants[i].clone(),
            table.label_type[i].clone(),
        ];
        rec.extend(coords.iter().map(|&v| learn::format_float(v)));
        w.write_record(&rec)?;
    }
    w.flush()?;

    let json_path = out.join("pca.json");
    let mut text = serde_json::to_string_pretty(&serde_json::json!({
        "explained": proj.explained,
        "components": proj.components,
        "feature_names": proj.feature_names,
    }))?;
    text.push('\n');
    std::fs::write(&json_path, text)?;
    emit(serde_json::json!({
        "csv": csv_path, "json": json_path, "explained": proj.explained,
    }));
    Ok(())
}
