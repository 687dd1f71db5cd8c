//! Command-line front end: synth, train, predict, eval, gradcheck, ablate.
//!
//! Settings layer as built-in defaults, then a JSON `--config` file whose
//! keys mirror the long flag names, then explicit flags.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use crate::data::{self, MotionDataset, SampleWindow, SynthKind, DEFAULT_FPS};
use crate::error::{MotionError, Result};
use crate::eval::{self, AblationSetup, Baseline, HorizonTable, DEFAULT_HORIZONS_MS};
use crate::gradcheck;
use crate::predictor::{AblationSpec, Model, ModelConfig};
use crate::skeleton::Skeleton;
use crate::training::{self, TrainConfig};

#[derive(Debug, Parser)]
#[command(name = "phasemotion", version, about = "Joint-trajectory human motion prediction")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write synthetic motion sequences as CSV.
    Synth(SynthArgs),
    /// Train a model and write a checkpoint and loss log.
    Train(TrainArgs),
    /// Predict future frames for every window of a dataset.
    Predict(PredictArgs),
    /// MPJPE per horizon for a checkpoint, a baseline or saved predictions.
    Eval(EvalArgs),
    /// Finite-difference gradient verification.
    Gradcheck(GradcheckArgs),
    /// Train and evaluate ablated variants under identical seeds.
    Ablate(TrainArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// constant_velocity, sinusoid_limbs or circle.
    #[arg(long)]
    pub kind: String,
    #[arg(long, default_value_t = 100)]
    pub frames: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Number of sequences, seeded `seed`, `seed + 1`, ...
    #[arg(long, default_value_t = 1)]
    pub count: usize,
    /// Skeleton JSON path, or `toy7` / `h36m22`.
    #[arg(long, default_value = "h36m22")]
    pub skeleton: String,
    #[arg(long)]
    pub out: PathBuf,
}

/// Flags shared by `train` and `ablate`.
#[derive(Debug, Args, Default)]
pub struct TrainArgs {
    /// JSON file with any of the long flag names as keys.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub skeleton: Option<String>,
    /// CSV file or directory of CSV files.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Validation data; defaults to the last tenth of the windows.
    #[arg(long)]
    pub val: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub batch: Option<usize>,
    #[arg(long)]
    pub dropout: Option<f64>,
    #[arg(long)]
    pub clip: Option<f64>,
    #[arg(long)]
    pub hidden: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    pub dilations: Option<Vec<usize>>,
    #[arg(long)]
    pub kernel: Option<usize>,
    /// Conv output channels per branch.
    #[arg(long)]
    pub channels: Option<usize>,
    /// Observed frames per window (`N + 1`).
    #[arg(long)]
    pub observed: Option<usize>,
    /// Predicted frames (`n`).
    #[arg(long)]
    pub horizon: Option<usize>,
    #[arg(long)]
    pub stride: Option<usize>,
    #[arg(long)]
    pub fps: Option<f64>,
    #[arg(long)]
    pub temporal_decay: Option<f64>,
    #[arg(long)]
    pub motion_emphasis: Option<f64>,
    #[arg(long)]
    pub teacher_forcing: bool,
    #[arg(long)]
    pub no_explicit: bool,
    #[arg(long)]
    pub no_implicit: bool,
    #[arg(long)]
    pub no_displacement: bool,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// CSV file or directory; must use the checkpoint's skeleton.
    #[arg(long)]
    pub data: PathBuf,
    /// Directory receiving one CSV per window.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 1)]
    pub stride: usize,
    /// Also write each window's affinity matrix as text.
    #[arg(long)]
    pub dump_affinity: bool,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long, conflicts_with = "baseline")]
    pub checkpoint: Option<PathBuf>,
    /// zero_velocity or constant_velocity.
    #[arg(long)]
    pub baseline: Option<String>,
    /// Directory of predictions written by `predict`, scored instead of
    /// running a model.
    #[arg(long, conflicts_with_all = ["checkpoint", "baseline"])]
    pub pred: Option<PathBuf>,
    /// Ground-truth CSV file or directory.
    #[arg(long)]
    pub data: PathBuf,
    /// Skeleton for `--baseline` / `--pred` runs.
    #[arg(long, default_value = "h36m22")]
    pub skeleton: String,
    #[arg(long, default_value_t = 10)]
    pub observed: usize,
    #[arg(long, default_value_t = 25)]
    pub horizon: usize,
    #[arg(long, default_value_t = 1)]
    pub stride: usize,
    #[arg(long, default_value_t = DEFAULT_FPS)]
    pub fps: f64,
    #[arg(long, value_delimiter = ',')]
    pub horizons: Option<Vec<f64>>,
    /// Writes `report.txt` and `report.json` here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Number of consecutive seeds.
    #[arg(long, default_value_t = 1)]
    pub seeds: u64,
}

/// JSON config file; every key is optional.
#[derive(Debug, Default, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
struct ConfigFile {
    skeleton: Option<String>,
    data: Option<PathBuf>,
    val: Option<PathBuf>,
    out: Option<PathBuf>,
    seed: Option<u64>,
    epochs: Option<usize>,
    lr: Option<f64>,
    batch: Option<usize>,
    dropout: Option<f64>,
    clip: Option<f64>,
    hidden: Option<usize>,
    dilations: Option<Vec<usize>>,
    kernel: Option<usize>,
    channels: Option<usize>,
    observed: Option<usize>,
    horizon: Option<usize>,
    stride: Option<usize>,
    fps: Option<f64>,
    temporal_decay: Option<f64>,
    motion_emphasis: Option<f64>,
    teacher_forcing: Option<bool>,
    no_explicit: Option<bool>,
    no_implicit: Option<bool>,
    no_displacement: Option<bool>,
}

/// Fully resolved settings of a training run.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub skeleton: Skeleton,
    pub data: Option<PathBuf>,
    pub val: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub stride: usize,
    pub fps: f64,
    /// True when any `--no-*` flag was given.
    pub ablation_requested: bool,
}

pub fn resolve_skeleton(spec: &str) -> Result<Skeleton> {
    match spec {
        "toy7" => Ok(Skeleton::toy()),
        "h36m22" => Ok(Skeleton::default_eval()),
        path => {
            require_exists(Path::new(path), "skeleton")?;
            Skeleton::load(Path::new(path))
        }
    }
}

fn require_exists(path: &Path, what: &str) -> Result<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(MotionError::Usage(format!("{what} {} does not exist", path.display())))
    }
}

impl RunConfig {
    pub fn resolve(args: &TrainArgs) -> Result<RunConfig> {
        let file = match &args.config {
            Some(p) => {
                require_exists(p, "config file")?;
                let text = fs::read_to_string(p).map_err(|e| MotionError::io(p, e))?;
                serde_json::from_str::<ConfigFile>(&text)
                    .map_err(|e| MotionError::Config(format!("{}: {e}", p.display())))?
            }
            None => ConfigFile::default(),
        };
        macro_rules! pick {
            ($flag:ident) => {
                args.$flag.clone().or(file.$flag.clone())
            };
        }
        let switch = |flag: bool, file: Option<bool>| flag || file.unwrap_or(false);

        let defaults = ModelConfig::default();
        let tdefaults = TrainConfig::default();
        let observed = pick!(observed).unwrap_or(defaults.history + 1);
        if observed < 2 {
            return Err(MotionError::Config(format!("observed frames {observed} must be at least 2")));
        }
        let ablation = AblationSpec {
            use_explicit: !switch(args.no_explicit, file.no_explicit),
            use_implicit: !switch(args.no_implicit, file.no_implicit),
            use_displacement: !switch(args.no_displacement, file.no_displacement),
        };
        let model = ModelConfig {
            channels: pick!(channels).unwrap_or(defaults.channels),
            dilations: pick!(dilations).unwrap_or(defaults.dilations.clone()),
            kernel_size: pick!(kernel).unwrap_or(defaults.kernel_size),
            hidden: pick!(hidden).unwrap_or(defaults.hidden),
            history: observed - 1,
            horizon: pick!(horizon).unwrap_or(defaults.horizon),
            ablation,
            ..defaults
        };
        ablation.validate()?;
        model.validate()?;
        let train = TrainConfig {
            batch_size: pick!(batch).unwrap_or(tdefaults.batch_size),
            learning_rate: pick!(lr).unwrap_or(tdefaults.learning_rate),
            dropout: pick!(dropout).unwrap_or(tdefaults.dropout),
            clip_threshold: pick!(clip).unwrap_or(tdefaults.clip_threshold),
            epochs: pick!(epochs).unwrap_or(tdefaults.epochs),
            temporal_decay: pick!(temporal_decay).unwrap_or(tdefaults.temporal_decay),
            motion_emphasis: pick!(motion_emphasis).unwrap_or(tdefaults.motion_emphasis),
            seed: pick!(seed).unwrap_or(tdefaults.seed),
            teacher_forcing: switch(args.teacher_forcing, file.teacher_forcing),
        };
        train.validate()?;
        let stride = pick!(stride).unwrap_or(1);
        if stride == 0 {
            return Err(MotionError::Config("stride must be positive".into()));
        }
        let fps = pick!(fps).unwrap_or(DEFAULT_FPS);
        if fps.is_nan() || fps <= 0.0 {
            return Err(MotionError::Config(format!("fps {fps} must be positive")));
        }
        let skeleton = resolve_skeleton(&pick!(skeleton).unwrap_or_else(|| "h36m22".into()))?;
        Ok(RunConfig {
            model,
            train,
            skeleton,
            data: pick!(data),
            val: pick!(val),
            out: pick!(out),
            stride,
            fps,
            ablation_requested: ablation != AblationSpec::FULL,
        })
    }

    fn required<'a>(&self, p: &'a Option<PathBuf>, flag: &str) -> Result<&'a PathBuf> {
        p.as_ref()
            .ok_or_else(|| MotionError::Usage(format!("--{flag} is required (flag or config key)")))
    }
}

/// CSV file or directory of CSV files.
pub fn load_data(path: &Path, skeleton: &Skeleton, fps: f64) -> Result<MotionDataset> {
    require_exists(path, "data path")?;
    let mut ds = if path.is_dir() {
        data::load_dir(path, skeleton)?
    } else {
        data::load_csv(path, skeleton)?
    };
    ds.fps = fps;
    if ds.sequences.is_empty() {
        return Err(MotionError::EmptyDataset(format!("no CSV files in {}", path.display())));
    }
    Ok(ds)
}

/// Training and validation windows: `--val` if given, else the last tenth.
fn split_windows(rc: &RunConfig) -> Result<(Vec<SampleWindow>, Vec<SampleWindow>)> {
    let data_path = rc.required(&rc.data, "data")?;
    let ds = load_data(data_path, &rc.skeleton, rc.fps)?;
    let mut windows = data::make_windows(&ds, rc.model.history, rc.model.horizon, rc.stride)?;
    match &rc.val {
        Some(v) => {
            let vds = load_data(v, &rc.skeleton, rc.fps)?;
            let val = data::make_windows(&vds, rc.model.history, rc.model.horizon, rc.stride)?;
            Ok((windows, val))
        }
        None => {
            let held = if windows.len() >= 2 { (windows.len() / 10).max(1) } else { 0 };
            let val = windows.split_off(windows.len() - held);
            Ok((windows, val))
        }
    }
}

fn horizons_within(fps: f64, horizon: usize) -> Vec<f64> {
    DEFAULT_HORIZONS_MS
        .iter()
        .copied()
        .filter(|ms| {
            let f = (ms * fps / 1000.0).round();
            f >= 1.0 && f <= horizon as f64
        })
        .collect()
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| MotionError::io(path, e))
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| MotionError::io(path, e))
}

pub fn cmd_synth(a: &SynthArgs, out: &mut dyn Write) -> Result<()> {
    let kind: SynthKind = a.kind.parse()?;
    let skel = resolve_skeleton(&a.skeleton)?;
    create_dir(&a.out)?;
    for s in 0..a.count as u64 {
        let seed = a.seed + s;
        let seq = data::synth(kind, &skel, a.frames, seed)?;
        let path = a.out.join(format!("{kind}_{seed}.csv"));
        data::save_csv(&path, &seq, &skel, 0)?;
        writeln!(out, "{}\t{} frames\t{} joints", path.display(), seq.frames(), seq.joints()).ok();
    }
    Ok(())
}

pub fn cmd_train(a: &TrainArgs, out: &mut dyn Write) -> Result<()> {
    let rc = RunConfig::resolve(a)?;
    let out_dir = rc.required(&rc.out, "out")?.clone();
    let (train_w, val_w) = split_windows(&rc)?;
    let mut model = Model::new(rc.model.clone(), rc.skeleton.clone(), rc.train.seed)?;
    writeln!(
        out,
        "training {} windows ({} validation), {} parameters, {} epochs",
        train_w.len(),
        val_w.len(),
        model.params().scalar_count(),
        rc.train.epochs
    )
    .ok();
    let outcome = training::train(&mut model, &train_w, &val_w, rc.fps, &rc.train, None, |_| {})?;
    create_dir(&out_dir)?;
    write_file(&out_dir.join("loss.log"), &outcome.log_text())?;
    model.save(&out_dir.join("checkpoint.json"), Some(outcome.optimizer.state(model.params())))?;
    if let Some(last) = outcome.log.last() {
        writeln!(out, "final epoch: {}", last.log_line()).ok();
    }
    if !val_w.is_empty() {
        let hs = horizons_within(rc.fps, rc.model.horizon);
        if !hs.is_empty() {
            let table = eval::horizon_report(&model, &val_w, &hs, rc.fps)?;
            writeln!(out, "validation MPJPE (mm)\n{}", table.to_text()).ok();
        }
    }
    Ok(())
}

fn load_checkpoint(path: &Path) -> Result<Model> {
    require_exists(path, "checkpoint")?;
    Ok(Model::load(path)?.0)
}

fn window_file_name(ds: &MotionDataset, w: &SampleWindow) -> String {
    format!("{}_w{:05}.csv", ds.sequences[w.source].id, w.start)
}

pub fn cmd_predict(a: &PredictArgs, out: &mut dyn Write) -> Result<()> {
    let model = load_checkpoint(&a.checkpoint)?;
    let cfg = model.config();
    let ds = load_data(&a.data, model.skeleton(), DEFAULT_FPS)?;
    let windows = data::make_windows(&ds, cfg.history, cfg.horizon, a.stride)?;
    create_dir(&a.out)?;
    for w in &windows {
        let pred = model.predict(&w.observed)?;
        let name = window_file_name(&ds, w);
        let first = w.start + w.observed.frames();
        data::save_csv(&a.out.join(&name), &pred.poses, model.skeleton(), first)?;
        if a.dump_affinity {
            if let Some(aff) = &pred.affinity {
                aff.write_text(&a.out.join(name.replace(".csv", ".affinity.txt")))?;
            }
        }
    }
    writeln!(out, "wrote {} predictions to {}", windows.len(), a.out.display()).ok();
    Ok(())
}

pub fn cmd_eval(a: &EvalArgs, out: &mut dyn Write) -> Result<()> {
    let horizons = a.horizons.clone().unwrap_or_else(|| DEFAULT_HORIZONS_MS.to_vec());
    let table = match (&a.checkpoint, &a.baseline, &a.pred) {
        (Some(ck), None, None) => {
            let model = load_checkpoint(ck)?;
            let cfg = model.config();
            let ds = load_data(&a.data, model.skeleton(), a.fps)?;
            let windows = data::make_windows(&ds, cfg.history, cfg.horizon, a.stride)?;
            eval::horizon_report(&model, &windows, &horizons, a.fps)?
        }
        (None, Some(b), None) => {
            let kind: Baseline = b.parse()?;
            let skel = resolve_skeleton(&a.skeleton)?;
            let ds = load_data(&a.data, &skel, a.fps)?;
            let windows = eval_windows(&ds, a)?;
            eval::horizon_report(&kind, &windows, &horizons, a.fps)?
        }
        (None, None, Some(pred_dir)) => {
            require_exists(pred_dir, "prediction directory")?;
            let skel = resolve_skeleton(&a.skeleton)?;
            let ds = load_data(&a.data, &skel, a.fps)?;
            let windows = eval_windows(&ds, a)?;
            let preds = windows
                .iter()
                .map(|w| data::read_pose_csv(&pred_dir.join(window_file_name(&ds, w)), &skel))
                .collect::<Result<Vec<_>>>()?;
            let frames = eval::horizon_frames(&horizons, a.fps, a.horizon)?;
            eval::table_from_predictions(&preds, &windows, &horizons, &frames)?
        }
        _ => {
            return Err(MotionError::Usage(
                "eval needs exactly one of --checkpoint, --baseline or --pred".into(),
            ))
        }
    };
    emit_table(&table, a.out.as_deref(), "report", out)
}

fn eval_windows(ds: &MotionDataset, a: &EvalArgs) -> Result<Vec<SampleWindow>> {
    if a.observed < 2 {
        return Err(MotionError::Config("--observed must be at least 2".into()));
    }
    data::make_windows(ds, a.observed - 1, a.horizon, a.stride)
}

fn emit_table(table: &HorizonTable, dir: Option<&Path>, stem: &str, out: &mut dyn Write) -> Result<()> {
    let text = table.to_text();
    write!(out, "{text}").ok();
    if let Some(dir) = dir {
        create_dir(dir)?;
        write_file(&dir.join(format!("{stem}.txt")), &text)?;
        let json = serde_json::to_string_pretty(&table.to_json())?;
        write_file(&dir.join(format!("{stem}.json")), &json)?;
    }
    Ok(())
}

/// Returns whether every check passed.
pub fn cmd_gradcheck(a: &GradcheckArgs, out: &mut dyn Write) -> Result<bool> {
    let mut ok = true;
    for seed in a.seed..a.seed + a.seeds.max(1) {
        for r in gradcheck::check_all(seed)? {
            let verdict = if r.passed() { "ok" } else { "FAIL" };
            writeln!(
                out,
                "seed {seed:<3} {:<18} max_rel {:.3e}  max_abs {:.3e}  n={:<6} {verdict}",
                r.name, r.max_rel_error, r.max_abs_error, r.checked
            )
            .ok();
            ok &= r.passed();
        }
    }
    Ok(ok)
}

pub fn cmd_ablate(a: &TrainArgs, out: &mut dyn Write) -> Result<()> {
    let rc = RunConfig::resolve(a)?;
    let (train_w, test_w) = split_windows(&rc)?;
    if test_w.is_empty() {
        return Err(MotionError::EmptyDataset("ablation needs held-out windows".into()));
    }
    let specs: Vec<(String, AblationSpec)> = if rc.ablation_requested {
        vec![(rc.model.ablation.label(), rc.model.ablation)]
    } else {
        eval::standard_variants()
            .into_iter()
            .map(|(n, s)| (n.to_string(), s))
            .collect()
    };
    let horizons = horizons_within(rc.fps, rc.model.horizon);
    let setup = AblationSetup {
        skeleton: &rc.skeleton,
        model: &rc.model,
        train: &rc.train,
        train_windows: &train_w,
        test_windows: &test_w,
        horizons_ms: &horizons,
        fps: rc.fps,
    };
    let only: Vec<AblationSpec> = specs.iter().map(|(_, s)| *s).collect();
    let results = eval::ablate(&only, &setup)?;
    let mut summary = String::new();
    let mut json = serde_json::Map::new();
    for ((name, spec), (_, table)) in specs.iter().zip(&results) {
        summary.push_str(&format!("== {name} ({})\n{}\n", spec.label(), table.to_text()));
        json.insert(name.clone(), table.to_json());
    }
    write!(out, "{summary}").ok();
    if let Some(dir) = &rc.out {
        create_dir(dir)?;
        write_file(&dir.join("ablation.txt"), &summary)?;
        write_file(
            &dir.join("ablation.json"),
            &serde_json::to_string_pretty(&serde_json::Value::Object(json))?,
        )?;
    }
    Ok(())
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code: 0 success, 1 runtime failure, 2 usage or config error.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let rendered = e.render().to_string();
            if code == 0 {
                write!(out, "{rendered}").ok();
            } else {
                write!(err, "{rendered}").ok();
            }
            return code;
        }
    };
    let result = match &cli.command {
        Command::Synth(a) => cmd_synth(a, out),
        Command::Train(a) => cmd_train(a, out),
        Command::Predict(a) => cmd_predict(a, out),
        Command::Eval(a) => cmd_eval(a, out),
        Command::Gradcheck(a) => match cmd_gradcheck(a, out) {
            Ok(true) => Ok(()),
            Ok(false) => {
                writeln!(err, "error: gradient check failed").ok();
                return 1;
            }
            Err(e) => Err(e),
        },
        Command::Ablate(a) => cmd_ablate(a, out),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            writeln!(err, "error: {e}").ok();
            if e.is_usage() {
                2
            } else {
                1
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_reference_settings() {
        let rc = RunConfig::resolve(&TrainArgs::default()).unwrap();
        assert_eq!(rc.train.batch_size, 16);
        assert_eq!(rc.train.learning_rate, 0.001);
        assert_eq!(rc.train.dropout, 0.05);
        assert_eq!(rc.train.clip_threshold, 5.0);
        assert_eq!(rc.model.hidden, 128);
        assert_eq!(rc.model.history, 9);
        assert_eq!(rc.model.horizon, 25);
    }

    #[test]
    fn flags_override_config_file() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("run.json");
        fs::write(&cfg, r#"{"hidden": 32, "lr": 0.01, "no-implicit": true}"#).unwrap();
        let args = TrainArgs {
            config: Some(cfg),
            hidden: Some(16),
            ..TrainArgs::default()
        };
        let rc = RunConfig::resolve(&args).unwrap();
        assert_eq!(rc.model.hidden, 16);
        assert_eq!(rc.train.learning_rate, 0.01);
        assert!(!rc.model.ablation.use_implicit);
        assert!(rc.ablation_requested);
    }

    #[test]
    fn unknown_config_key_is_config_error() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("run.json");
        fs::write(&cfg, r#"{"hiden": 32}"#).unwrap();
        let args = TrainArgs {
            config: Some(cfg),
            ..TrainArgs::default()
        };
        assert!(matches!(RunConfig::resolve(&args), Err(MotionError::Config(_))));
    }

    #[test]
    fn all_pathways_off_is_usage_error() {
        let args = TrainArgs {
            no_explicit: true,
            no_implicit: true,
            no_displacement: true,
            ..TrainArgs::default()
        };
        assert!(matches!(RunConfig::resolve(&args), Err(MotionError::Usage(_))));
    }
}
