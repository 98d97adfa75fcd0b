use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::datagen::{mix_seed, Dataset, Sample, Split};
use crate::fsutil::write_atomic;
use crate::nn::{checkpoint_bytes, init_params, Gradients, ParamStore, Tape};
use crate::rvnn::{check_target, Decoders, LossBreakdown, RvnnConfig, StructureEncoder};
use crate::structure::StructureTree;

use super::{Decay, Model, Rates, TrainConfig, TrainError};

pub const LOSS_LOG_COLUMNS: [&str; 5] = ["epoch", "box_se", "sym_se", "ce", "lr"];

/// A per-sample loss above this counts as divergence even when finite
/// (saturated tanh units keep huge losses representable).
pub const DIVERGENCE_LOSS: f64 = 1e30;

/// Optimization schedule shared by every training entry point.
#[derive(Clone, Debug, PartialEq)]
pub struct Schedule {
    pub epochs: usize,
    pub batch_size: usize,
    /// Seeds the per-epoch shuffles.
    pub seed: u64,
    /// Base learning rate per parameter group.
    pub rates: BTreeMap<String, f64>,
    pub decay: Decay,
    /// Group whose current rate goes into [`EpochStats::lr`].
    pub logged_group: String,
}

/// Loss breakdown of one pass over the training set, measured on the fly
/// (each sample's loss is taken before its batch's update).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpochStats {
    /// 1-based count of completed epochs.
    pub epoch: usize,
    /// Per-sample means of the three loss terms.
    pub box_se: f64,
    pub sym_se: f64,
    pub ce: f64,
    pub lr: f64,
    /// Sums over the epoch.
    pub totals: LossBreakdown,
}

impl EpochStats {
    pub fn mean_box_se(&self) -> f64 {
        self.totals.mean_box_se()
    }

    pub fn class_accuracy(&self) -> f64 {
        self.totals.class_accuracy()
    }
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub params: ParamStore,
    pub history: Vec<EpochStats>,
}

pub fn loss_log_text(history: &[EpochStats]) -> String {
    let mut s = LOSS_LOG_COLUMNS.join("\t");
    s.push('\n');
    for h in history {
        writeln!(s, "{}\t{}\t{}\t{}\t{}", h.epoch, h.box_se, h.sym_se, h.ce, h.lr).expect("string write");
    }
    s
}

fn check_loss(br: &LossBreakdown) -> Result<(), String> {
    if br.total <= DIVERGENCE_LOSS {
        Ok(())
    } else {
        Err(format!("sample loss {} is not finite or exceeds {DIVERGENCE_LOSS:e}", br.total))
    }
}

fn pool(threads: usize) -> Result<Option<rayon::ThreadPool>, TrainError> {
    if threads <= 1 {
        return Ok(None);
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map(Some)
        .map_err(|e| TrainError::Config(format!("thread pool: {e}")))
}

/// Mini-batch SGD over `samples`.
///
/// Every epoch visits the samples in a seeded shuffle, cut into batches of
/// `batch_size` (the last may be shorter). Each sample's gradient goes into
/// its own zeroed buffer and the buffers are summed in sample order, so
/// `threads > 1` yields bit-identical parameters to the single-threaded
/// run. The batch gradient is averaged before the step. `on_epoch` runs
/// after every epoch; a non-finite gradient or a sample loss that is
/// non-finite or above [`DIVERGENCE_LOSS`] aborts with
/// [`TrainError::Divergence`].
pub fn fit<S, L, E>(
    params: &mut ParamStore,
    samples: &[S],
    schedule: &Schedule,
    threads: usize,
    loss: L,
    mut on_epoch: E,
) -> Result<Vec<EpochStats>, TrainError>
where
    S: Sync,
    L: Fn(&ParamStore, &S, &mut Gradients) -> Result<LossBreakdown, TrainError> + Sync,
    E: FnMut(&EpochStats, &ParamStore) -> Result<(), TrainError>,
{
    if schedule.batch_size == 0 {
        return Err(TrainError::Config("batch size must be positive".into()));
    }
    if schedule.epochs > 0 && samples.is_empty() {
        return Err(TrainError::Config("no training samples".into()));
    }
    for g in params.groups() {
        if !schedule.rates.contains_key(&g) {
            return Err(TrainError::Config(format!("no learning rate for parameter group {g:?}")));
        }
    }
    let pool = pool(threads)?;
    params.zero_grads();
    let mut scratch = params.zeros_like();
    let mut batch_grad = params.zeros_like();
    let mut history = Vec::with_capacity(schedule.epochs);

    for epoch in 0..schedule.epochs {
        let mult = schedule.decay.multiplier(epoch);
        let rates: BTreeMap<String, f64> = schedule.rates.iter().map(|(k, v)| (k.clone(), v * mult)).collect();
        let mut order: Vec<usize> = (0..samples.len()).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(mix_seed(schedule.seed, epoch as u64)));
        let mut totals = LossBreakdown::default();
        let diverged = |message: String| TrainError::Divergence { epoch: epoch + 1, message };

        for batch in order.chunks(schedule.batch_size) {
            batch_grad.zero();
            match &pool {
                None => {
                    for &i in batch {
                        scratch.zero();
                        let br = loss(params, &samples[i], &mut scratch)?;
                        check_loss(&br).map_err(&diverged)?;
                        totals.add(&br);
                        batch_grad.add(&scratch);
                    }
                }
                Some(pool) => {
                    let frozen = &*params;
                    let results: Vec<Result<(Gradients, LossBreakdown), TrainError>> = pool.install(|| {
                        batch
                            .par_iter()
                            .map(|&i| {
                                let mut g = frozen.zeros_like();
                                let br = loss(frozen, &samples[i], &mut g)?;
                                Ok((g, br))
                            })
                            .collect()
                    });
                    for r in results {
                        let (g, br) = r?;
                        check_loss(&br).map_err(&diverged)?;
                        totals.add(&br);
                        batch_grad.add(&g);
                    }
                }
            }
            if !batch_grad.is_finite() {
                return Err(diverged("gradient is not finite".into()));
            }
            params.accumulate(&batch_grad);
            params.scale_grads(1.0 / batch.len() as f64);
            params.sgd_step(&rates)?;
        }

        let n = samples.len() as f64;
        let stats = EpochStats {
            epoch: epoch + 1,
            box_se: totals.box_se / n,
            sym_se: totals.sym_se / n,
            ce: totals.ce / n,
            lr: rates.get(&schedule.logged_group).copied().unwrap_or(0.0),
            totals,
        };
        if !params.iter().all(|(_, p)| p.value.iter().all(|v| v.is_finite())) {
            return Err(diverged("parameters are not finite".into()));
        }
        on_epoch(&stats, params)?;
        history.push(stats);
    }
    Ok(history)
}

fn model_schedule(cfg: &TrainConfig) -> Schedule {
    let rates = [("mask", cfg.rates.encoder), ("dec", cfg.rates.decoder), ("cls", cfg.rates.classifier)]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect();
    Schedule {
        epochs: cfg.epochs,
        batch_size: cfg.batch_size,
        seed: mix_seed(cfg.seed, 0x5348_5546),
        rates,
        decay: cfg.decay,
        logged_group: "dec".into(),
    }
}

fn check_samples(samples: &[Sample], rvnn: &RvnnConfig) -> Result<(), TrainError> {
    for s in samples {
        check_target(&s.tree, rvnn)
            .map_err(|e| TrainError::Sample { sample: s.entry.sample.clone(), message: e.to_string() })?;
    }
    Ok(())
}

/// Trains mask encoder and decoders jointly from a fresh initialization
/// seeded by `cfg.seed`. Nothing is written to disk.
pub fn train_samples<E>(
    cfg: &TrainConfig,
    samples: &[Sample],
    threads: usize,
    mut on_epoch: E,
) -> Result<TrainOutcome, TrainError>
where
    E: FnMut(&EpochStats, &ParamStore) -> Result<(), TrainError>,
{
    cfg.validate()?;
    let rvnn = cfg.rvnn();
    check_samples(samples, &rvnn)?;
    let mut params = Model::init(&rvnn, cfg.seed)?;
    let model = Model::bind(&params, &rvnn)?;
    let history = fit(
        &mut params,
        samples,
        &model_schedule(cfg),
        threads,
        |p, s, g| model.sample_loss(p, &s.mask, &s.tree.root, Some(g)),
        &mut on_epoch,
    )?;
    Ok(TrainOutcome { params, history })
}

fn write(path: &Path, bytes: &[u8]) -> Result<(), TrainError> {
    let io = |source| TrainError::Io { path: path.to_path_buf(), source };
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(io)?;
    }
    write_atomic(path, bytes).map_err(|source| TrainError::Io { path: path.to_path_buf(), source })
}

/// Full run from a config: loads the training split, trains, and writes
/// the checkpoint (also every `checkpoint_interval` epochs) and, if
/// configured, the loss log. With 0 epochs only the initial checkpoint is
/// written.
pub fn train_loop<P>(cfg: &TrainConfig, threads: usize, mut progress: P) -> Result<TrainOutcome, TrainError>
where
    P: FnMut(&EpochStats),
{
    cfg.validate()?;
    let data = Dataset::open(&cfg.dataset)?;
    let samples = data.load_split(Split::Train)?;
    let mut log = Vec::new();
    let outcome = train_samples(cfg, &samples, threads, |stats, params| {
        progress(stats);
        log.push(*stats);
        if cfg.checkpoint_interval > 0 && stats.epoch % cfg.checkpoint_interval == 0 && stats.epoch < cfg.epochs {
            write(&cfg.checkpoint, &checkpoint_bytes(params))?;
            if let Some(l) = &cfg.loss_log {
                write(l, loss_log_text(&log).as_bytes())?;
            }
        }
        Ok(())
    })?;
    write(&cfg.checkpoint, &checkpoint_bytes(&outcome.params))?;
    if let Some(l) = &cfg.loss_log {
        write(l, loss_log_text(&outcome.history).as_bytes())?;
    }
    Ok(outcome)
}

/// Structure autoencoder run: the tree encoder (`aenc`) feeds the decoders
/// (`dec`, `cls`) and all are trained on self-reconstruction.
#[derive(Clone, Debug, PartialEq)]
pub struct AutoencoderConfig {
    pub rvnn: RvnnConfig,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    /// `encoder` applies to the tree encoder.
    pub rates: Rates,
    pub decay: Decay,
}

impl Default for AutoencoderConfig {
    fn default() -> Self {
        Self {
            rvnn: RvnnConfig::default(),
            epochs: 100,
            batch_size: 8,
            seed: 0,
            rates: Rates::default(),
            decay: Decay::default(),
        }
    }
}

pub fn train_autoencoder<E>(
    trees: &[StructureTree],
    cfg: &AutoencoderConfig,
    threads: usize,
    on_epoch: E,
) -> Result<TrainOutcome, TrainError>
where
    E: FnMut(&EpochStats, &ParamStore) -> Result<(), TrainError>,
{
    for t in trees {
        check_target(t, &cfg.rvnn)?;
    }
    let specs = [StructureEncoder::specs(&cfg.rvnn), Decoders::specs(&cfg.rvnn)].concat();
    let mut params = init_params(&specs, cfg.seed)?;
    let enc = StructureEncoder::bind(&params, &cfg.rvnn)?;
    let dec = Decoders::bind(&params, &cfg.rvnn)?;
    let rates = [("aenc", cfg.rates.encoder), ("dec", cfg.rates.decoder), ("cls", cfg.rates.classifier)]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect();
    let schedule = Schedule {
        epochs: cfg.epochs,
        batch_size: cfg.batch_size,
        seed: mix_seed(cfg.seed, 0x5348_5546),
        rates,
        decay: cfg.decay,
        logged_group: "dec".into(),
    };
    let history = fit(
        &mut params,
        trees,
        &schedule,
        threads,
        |p, t, g| {
            let mut tape = Tape::new(p);
            let code = enc.encode(&mut tape, &t.root)?;
            let (loss, br) = dec.teacher_forced(&mut tape, code, &t.root)?;
            tape.backward(loss, g)?;
            Ok(br)
        },
        on_epoch,
    )?;
    Ok(TrainOutcome { params, history })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::{build_dataset, sample_template, Category, DatasetConfig, LegLayout, TemplateSpec};
    use crate::nn::read_checkpoint;

    fn small_rvnn() -> RvnnConfig {
        RvnnConfig { code_dim: 8, hidden: 12, ..Default::default() }
    }

    fn tiny_dataset(dir: &Path) -> Dataset {
        let cfg = DatasetConfig { shapes: 3, views: 2, seed: 4, ..Default::default() };
        build_dataset(&cfg, dir).unwrap();
        Dataset::open(dir).unwrap()
    }

    fn run_cfg(dir: &Path, epochs: usize) -> TrainConfig {
        let mut c = TrainConfig::new(dir.join("data"), dir.join("out/m.imck"), epochs);
        c.code_dim = 8;
        c.hidden = 12;
        c.batch_size = 3;
        c.loss_log = Some(dir.join("out/loss.tsv"));
        c
    }

    #[test]
    fn zero_epochs_writes_initial_checkpoint_only() {
        let dir = tempfile::tempdir().unwrap();
        tiny_dataset(&dir.path().join("data"));
        let cfg = run_cfg(dir.path(), 0);
        let out = train_loop(&cfg, 0, |_| {}).unwrap();
        assert!(out.history.is_empty());
        let ck = read_checkpoint(std::fs::File::open(&cfg.checkpoint).unwrap()).unwrap();
        assert_eq!(ck, Model::init(&cfg.rvnn(), cfg.seed).unwrap());
        assert_eq!(std::fs::read_to_string(dir.path().join("out/loss.tsv")).unwrap(), "epoch\tbox_se\tsym_se\tce\tlr\n");
    }

    #[test]
    fn runs_are_reproducible_and_threads_do_not_change_results() {
        let dir = tempfile::tempdir().unwrap();
        tiny_dataset(&dir.path().join("data"));
        let cfg = run_cfg(dir.path(), 3);
        let a = train_loop(&cfg, 0, |_| {}).unwrap();
        let ck_a = std::fs::read(&cfg.checkpoint).unwrap();
        let log_a = std::fs::read(dir.path().join("out/loss.tsv")).unwrap();
        let b = train_loop(&cfg, 0, |_| {}).unwrap();
        assert_eq!(a.params, b.params);
        assert_eq!(std::fs::read(&cfg.checkpoint).unwrap(), ck_a);
        assert_eq!(std::fs::read(dir.path().join("out/loss.tsv")).unwrap(), log_a);
        let c = train_loop(&cfg, 3, |_| {}).unwrap();
        assert_eq!(a.params, c.params);
        assert_eq!(a.history, c.history);
    }

    #[test]
    fn log_has_three_nonnegative_series_and_decayed_rates() {
        let dir = tempfile::tempdir().unwrap();
        let data = tiny_dataset(&dir.path().join("data"));
        let mut cfg = run_cfg(dir.path(), 5);
        cfg.decay = Decay { factor: 10.0, period: 2 };
        let samples = data.load_split(Split::Train).unwrap();
        let out = train_samples(&cfg, &samples, 0, |_, _| Ok(())).unwrap();
        let text = loss_log_text(&out.history);
        let rows: Vec<Vec<f64>> =
            text.lines().skip(1).map(|l| l.split('\t').map(|f| f.parse().unwrap()).collect()).collect();
        assert_eq!(rows.len(), 5);
        for (i, r) in rows.iter().enumerate() {
            assert_eq!(r.len(), 5);
            assert_eq!(r[0], (i + 1) as f64);
            assert!(r[1..4].iter().all(|v| *v >= 0.0 && v.is_finite()));
            let want = 0.2 / 10f64.powi((i / 2) as i32);
            assert!((r[4] - want).abs() < 1e-15, "{r:?}");
        }
    }

    #[test]
    fn loss_decreases_on_a_tiny_set() {
        let dir = tempfile::tempdir().unwrap();
        let data = tiny_dataset(&dir.path().join("data"));
        let mut cfg = run_cfg(dir.path(), 30);
        cfg.decay.period = 1000;
        let samples = data.load_split(Split::Train).unwrap();
        let out = train_samples(&cfg, &samples, 0, |_, _| Ok(())).unwrap();
        let first = out.history[0].totals.total;
        let last = out.history.last().unwrap().totals.total;
        assert!(last < 0.5 * first, "{first} -> {last}");
    }

    #[test]
    fn non_finite_loss_is_reported_as_divergence() {
        let mut params = init_params(&[crate::nn::ParamSpec::bias("w.b", 2)], 0).unwrap();
        let schedule = Schedule {
            epochs: 3,
            batch_size: 1,
            seed: 0,
            rates: [("w".to_string(), 1.0)].into_iter().collect(),
            decay: Decay::default(),
            logged_group: "w".into(),
        };
        let id = params.id("w.b").unwrap();
        let r = fit(&mut params, &[1.0f64, f64::INFINITY], &schedule, 0, |_, &x, g| {
            g.get_mut(id)[0] = x;
            Ok(LossBreakdown { total: x, ..Default::default() })
        }, |_, _| Ok(()));
        assert!(matches!(r, Err(TrainError::Divergence { epoch: 1, .. })), "{r:?}");
    }

    #[test]
    fn missing_dataset_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = run_cfg(dir.path(), 1);
        assert!(matches!(train_loop(&cfg, 0, |_| {}), Err(TrainError::Data(_))));
    }

    #[test]
    fn autoencoder_fits_two_trees() {
        let trees: Vec<StructureTree> = [Category::Chair, Category::Table]
            .iter()
            .map(|&c| sample_template(&TemplateSpec::with_legs(c, LegLayout::Rotational), 3).unwrap())
            .collect();
        let cfg = AutoencoderConfig {
            rvnn: small_rvnn(),
            epochs: 200,
            batch_size: 2,
            decay: Decay { factor: 10.0, period: 10_000 },
            ..Default::default()
        };
        let out = train_autoencoder(&trees, &cfg, 0, |_, _| Ok(())).unwrap();
        let (first, last) = (out.history[0], *out.history.last().unwrap());
        assert!(last.totals.total < 0.2 * first.totals.total, "{:?} -> {:?}", first.totals, last.totals);
        assert_eq!(last.class_accuracy(), 1.0);
    }
}
