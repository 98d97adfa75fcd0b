//! `im2struct`: data generation, training, decoding, evaluation and
//! geometry utilities from the command line.
//!
//! Exit codes: 0 success, 1 usage error, 2 data or validation error,
//! 3 numerical divergence.

use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use im2struct::datagen::{build_dataset, Category, Dataset, DatasetConfig, Split, DEFAULT_ELEVATIONS, MANIFEST_FILE};
use im2struct::encoder::MaskImage;
use im2struct::fsutil::write_atomic;
use im2struct::geometry::{boxes_to_obj, refine_volume, VoxelGrid};
use im2struct::nn::{read_checkpoint, GradCheckConfig};
use im2struct::rvnn::RvnnConfig;
use im2struct::structure::{deserialize, flatten_with_groups, serialize, StructureTree};
use im2struct::train::{
    evaluate, gradient_check_case, train_loop, Model, Predictor, TrainConfig, TrainError, EVAL_THRESHOLDS,
};

const THREADS_VAR: &str = "IM2STRUCT_THREADS";

#[derive(Parser, Debug)]
#[command(name = "im2struct", version, about = "Recover recursive cuboid structures from object masks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic mask/structure dataset
    GenData(GenData),
    /// Train the mask encoder and structure decoders
    Train(Train),
    /// Decode one mask into a structure file
    Decode(Decode),
    /// Score a checkpoint (or the ground-truth oracle) on a dataset split
    Eval(Eval),
    /// Write the flattened boxes of a structure as a Wavefront OBJ mesh
    ExportObj(ExportObj),
    /// Complete a voxel grid using the symmetries of a structure
    RefineVolume(RefineVolume),
    /// Compare analytic gradients with finite differences on random trees
    GradCheck(GradCheck),
}

#[derive(Args, Debug)]
struct GenData {
    /// Number of shapes
    #[arg(long)]
    shapes: usize,
    /// Views rendered per shape
    #[arg(long, default_value_t = 6)]
    views: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory
    #[arg(long)]
    out: PathBuf,
    /// Comma-separated categories (chair, table, airplane)
    #[arg(long, value_delimiter = ',', value_parser = parse_category)]
    categories: Vec<Category>,
    /// Comma-separated camera elevations in degrees
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    elevations: Vec<f64>,
    /// Part deformation magnitude in [0, 1)
    #[arg(long, default_value_t = 0.15)]
    deform: f64,
    /// Fraction of shapes assigned to the training split
    #[arg(long, default_value_t = 0.7)]
    train_fraction: f64,
    /// Also emit a left-right mirrored copy of every view
    #[arg(long)]
    flip: bool,
    /// Overwrite an existing dataset
    #[arg(long)]
    force: bool,
}

#[derive(Args, Debug)]
struct Train {
    /// TOML run configuration; flags below override its fields
    #[arg(long)]
    config: Option<PathBuf>,
    /// Dataset directory
    #[arg(long)]
    data: Option<PathBuf>,
    /// Output checkpoint
    #[arg(long)]
    ckpt: Option<PathBuf>,
    /// Loss log (TSV)
    #[arg(long)]
    log: Option<PathBuf>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    batch_size: Option<usize>,
    /// Mask encoder learning rate
    #[arg(long)]
    lr_encoder: Option<f64>,
    /// Decoder learning rate
    #[arg(long)]
    lr_decoder: Option<f64>,
    /// Node classifier learning rate
    #[arg(long)]
    lr_classifier: Option<f64>,
    /// Divide rates by this factor every decay period
    #[arg(long)]
    decay_factor: Option<f64>,
    /// Epochs per decay step
    #[arg(long)]
    decay_period: Option<usize>,
    /// Also write the checkpoint every N epochs
    #[arg(long)]
    checkpoint_interval: Option<usize>,
    /// Overwrite existing checkpoint and log
    #[arg(long)]
    force: bool,
}

#[derive(Args, Debug)]
struct Decode {
    /// Model checkpoint
    #[arg(long)]
    ckpt: PathBuf,
    /// Input mask (binary or text form)
    #[arg(long)]
    mask: PathBuf,
    /// Output structure file
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    force: bool,
}

#[derive(Args, Debug)]
struct Eval {
    /// Model checkpoint, or `oracle` to score the ground truth itself
    #[arg(long)]
    ckpt: String,
    /// Dataset directory
    #[arg(long)]
    data: PathBuf,
    /// Split to score: train or test
    #[arg(long, default_value = "test", value_parser = parse_split)]
    split: Split,
    /// Comma-separated accuracy thresholds
    #[arg(long, value_delimiter = ',', default_values_t = EVAL_THRESHOLDS.to_vec())]
    thresholds: Vec<f64>,
    /// Report file (TSV); printed to standard output when absent
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    force: bool,
}

#[derive(Args, Debug)]
struct ExportObj {
    /// Input structure file
    input: PathBuf,
    /// Output OBJ file; printed to standard output when absent
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    force: bool,
}

#[derive(Args, Debug)]
struct RefineVolume {
    /// Input voxel grid (.imvg)
    #[arg(long)]
    voxels: PathBuf,
    /// Structure whose symmetry groups drive the completion
    #[arg(long)]
    structure: PathBuf,
    /// Output voxel grid
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    force: bool,
}

#[derive(Args, Debug)]
struct GradCheck {
    /// Number of random cases (seeds 0..N)
    #[arg(long, default_value_t = 20)]
    seeds: u64,
    /// Maximum depth of the random trees
    #[arg(long, default_value_t = 4)]
    max_depth: usize,
    /// Largest acceptable relative error
    #[arg(long, default_value_t = 1e-4)]
    tolerance: f64,
    /// Coordinates sampled per tensor (0 checks every coordinate)
    #[arg(long, default_value_t = 6)]
    per_tensor: usize,
    #[arg(long, default_value_t = im2struct::rvnn::CODE_DIM)]
    code_dim: usize,
    #[arg(long, default_value_t = im2struct::rvnn::HIDDEN_DIM)]
    hidden: usize,
}

fn parse_category(s: &str) -> Result<Category, String> {
    s.parse::<Category>().map_err(|e| e.to_string())
}

fn parse_split(s: &str) -> Result<Split, String> {
    Split::parse(s).ok_or_else(|| format!("unknown split {s:?} (expected train or test)"))
}

/// Errors that map to exit code 1 although they are found after parsing.
#[derive(Debug)]
struct UsageError(String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

fn exit_code(e: &anyhow::Error) -> u8 {
    for cause in e.chain() {
        if cause.downcast_ref::<UsageError>().is_some() {
            return 1;
        }
        if let Some(TrainError::Divergence { .. }) = cause.downcast_ref::<TrainError>() {
            return 3;
        }
    }
    2
}

fn threads() -> Result<usize> {
    match std::env::var(THREADS_VAR) {
        Err(_) => Ok(0),
        Ok(v) if v.trim().is_empty() => Ok(0),
        Ok(v) => v.trim().parse().map_err(|_| usage(format!("{THREADS_VAR} must be a non-negative integer, got {v:?}"))),
    }
}

fn refuse_existing(paths: &[&Path], force: bool) -> Result<()> {
    if force {
        return Ok(());
    }
    for p in paths {
        if p.exists() {
            bail!("{} already exists (use --force to overwrite)", p.display());
        }
    }
    Ok(())
}

fn write_output(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    write_atomic(path, bytes).with_context(|| format!("writing {}", path.display()))
}

fn read_structure(path: &Path) -> Result<StructureTree> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    deserialize(&text).with_context(|| format!("parsing {}", path.display()))
}

fn load_model(path: &Path) -> Result<(Model, im2struct::nn::ParamStore)> {
    let file = std::fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let params = read_checkpoint(std::io::BufReader::new(file)).with_context(|| format!("reading {}", path.display()))?;
    let (model, _) = Model::from_params(&params).with_context(|| format!("checkpoint {}", path.display()))?;
    Ok((model, params))
}

fn gen_data(a: GenData) -> Result<()> {
    let config = DatasetConfig {
        shapes: a.shapes,
        views: a.views,
        seed: a.seed,
        categories: if a.categories.is_empty() { Category::ALL.to_vec() } else { a.categories },
        elevations: if a.elevations.is_empty() { DEFAULT_ELEVATIONS.to_vec() } else { a.elevations },
        deform_magnitude: a.deform,
        train_fraction: a.train_fraction,
        flip: a.flip,
    };
    config.validate()?;
    refuse_existing(&[&a.out.join(MANIFEST_FILE)], a.force)?;
    let entries = build_dataset(&config, &a.out)?;
    let train = entries.iter().filter(|e| e.split == Split::Train).count();
    eprintln!(
        "wrote {} samples ({} train, {} test) to {}",
        entries.len(),
        train,
        entries.len() - train,
        a.out.display()
    );
    Ok(())
}

fn train(a: Train) -> Result<()> {
    let mut cfg = match &a.config {
        Some(p) => TrainConfig::load(p)?,
        None => {
            let (Some(data), Some(ckpt), Some(epochs)) = (&a.data, &a.ckpt, a.epochs) else {
                return Err(usage("without --config, --data, --ckpt and --epochs are required"));
            };
            TrainConfig::new(data, ckpt, epochs)
        }
    };
    if let Some(v) = a.data {
        cfg.dataset = v;
    }
    if let Some(v) = a.ckpt {
        cfg.checkpoint = v;
    }
    if let Some(v) = a.log {
        cfg.loss_log = Some(v);
    }
    if let Some(v) = a.epochs {
        cfg.epochs = v;
    }
    if let Some(v) = a.seed {
        cfg.seed = v;
    }
    if let Some(v) = a.batch_size {
        cfg.batch_size = v;
    }
    if let Some(v) = a.lr_encoder {
        cfg.rates.encoder = v;
    }
    if let Some(v) = a.lr_decoder {
        cfg.rates.decoder = v;
    }
    if let Some(v) = a.lr_classifier {
        cfg.rates.classifier = v;
    }
    if let Some(v) = a.decay_factor {
        cfg.decay.factor = v;
    }
    if let Some(v) = a.decay_period {
        cfg.decay.period = v;
    }
    if let Some(v) = a.checkpoint_interval {
        cfg.checkpoint_interval = v;
    }
    cfg.validate()?;
    let threads = threads()?;
    let mut outputs = vec![cfg.checkpoint.as_path()];
    if let Some(l) = &cfg.loss_log {
        outputs.push(l);
    }
    refuse_existing(&outputs, a.force)?;
    let out = train_loop(&cfg, threads, |s| {
        eprintln!(
            "epoch {:>4}  box_se {:.6}  sym_se {:.6}  ce {:.6}  lr {}  node_acc {:.4}",
            s.epoch,
            s.box_se,
            s.sym_se,
            s.ce,
            s.lr,
            s.class_accuracy()
        );
    })?;
    eprintln!("trained {} epochs; checkpoint {}", out.history.len(), cfg.checkpoint.display());
    Ok(())
}

fn decode(a: Decode) -> Result<()> {
    refuse_existing(&[&a.out], a.force)?;
    let (model, params) = load_model(&a.ckpt)?;
    let bytes = std::fs::read(&a.mask).with_context(|| format!("reading {}", a.mask.display()))?;
    let mask = MaskImage::read_any(&bytes).with_context(|| format!("parsing {}", a.mask.display()))?;
    let tree = model.predict(&params, &mask)?;
    write_output(&a.out, serialize(&tree)?.as_bytes())?;
    eprintln!("decoded {} boxes ({} nodes) to {}", tree.root.box_count(), tree.root.node_count(), a.out.display());
    Ok(())
}

fn eval(a: Eval) -> Result<()> {
    if let Some(out) = &a.out {
        refuse_existing(&[out], a.force)?;
    }
    let data = Dataset::open(&a.data)?;
    let samples = data.load_split(a.split)?;
    let loaded = if a.ckpt == "oracle" { None } else { Some(load_model(Path::new(&a.ckpt))?) };
    let predictor = match &loaded {
        None => Predictor::Oracle,
        Some((model, params)) => Predictor::Model { model, params },
    };
    let report = evaluate(predictor, &samples, &a.thresholds)?;
    let text = report.to_tsv();
    match &a.out {
        Some(p) => write_output(p, text.as_bytes())?,
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    let accs: Vec<String> = report.thresholds.iter().zip(&report.accuracy).map(|(t, a)| format!("acc@{t} {a:.4}")).collect();
    eprintln!("{} samples  hausdorff {:.6}  {}", report.rows.len(), report.hausdorff, accs.join("  "));
    Ok(())
}

fn export_obj(a: ExportObj) -> Result<()> {
    if let Some(out) = &a.out {
        refuse_existing(&[out], a.force)?;
    }
    let tree = read_structure(&a.input)?;
    let obj = boxes_to_obj(&tree.flatten()?);
    match &a.out {
        Some(p) => write_output(p, obj.as_bytes()),
        None => Ok(std::io::stdout().write_all(obj.as_bytes())?),
    }
}

fn refine(a: RefineVolume) -> Result<()> {
    refuse_existing(&[&a.out], a.force)?;
    let file = std::fs::File::open(&a.voxels).with_context(|| format!("opening {}", a.voxels.display()))?;
    let grid = VoxelGrid::read_from(std::io::BufReader::new(file)).with_context(|| format!("reading {}", a.voxels.display()))?;
    let tree = read_structure(&a.structure)?;
    let flat = flatten_with_groups(&tree)?;
    let out = refine_volume(&grid, &flat.boxes, &flat.groups)?;
    write_output(&a.out, &out.to_bytes())?;
    eprintln!("{} occupied cells, {} filled", out.occupied_count(), out.occupied_count() - grid.occupied_count());
    Ok(())
}

fn grad_check(a: GradCheck) -> Result<()> {
    if !(a.tolerance > 0.0) {
        return Err(usage("--tolerance must be positive"));
    }
    let rvnn = RvnnConfig { code_dim: a.code_dim, hidden: a.hidden, ..Default::default() };
    let check = GradCheckConfig { max_per_tensor: (a.per_tensor > 0).then_some(a.per_tensor), ..Default::default() };
    let mut worst: f64 = 0.0;
    for seed in 0..a.seeds {
        let r = gradient_check_case(seed, a.max_depth, &rvnn, &check)?;
        println!(
            "seed {seed:>3}  checked {:>6}  max_rel_error {:.3e}  worst {}[{}]",
            r.checked, r.max_rel_error, r.worst_param, r.worst_index
        );
        worst = worst.max(r.max_rel_error);
    }
    if worst >= a.tolerance {
        return Err(anyhow!("max relative error {worst:.3e} exceeds tolerance {:e}", a.tolerance));
    }
    println!("ok: max relative error {worst:.3e} < {:e}", a.tolerance);
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::GenData(a) => gen_data(a),
        Command::Train(a) => train(a),
        Command::Decode(a) => decode(a),
        Command::Eval(a) => eval(a),
        Command::ExportObj(a) => export_obj(a),
        Command::RefineVolume(a) => refine(a),
        Command::GradCheck(a) => grad_check(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
