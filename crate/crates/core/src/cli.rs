//! Command-line front end.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use crate::compose::{compose_many, compose_ml_only, ComposeContext, Indices, StarvationCounter};
use crate::config::{AppConfig, ConfigError};
use crate::domain::{load_dir, DataError, Dataset, Timestamp};
use crate::evalharness::{
    classification_report, format_table, majority_baseline, simulate_ctr, split_candidates,
    train_feedforward_baseline, cap_candidates, CtrReport, EvalError, FeedforwardParams, PreferenceOracle,
};
use crate::featurize::{FeatureError, Featurizer};
use crate::seqnet::{
    build_sequence_examples_for, predict_examples, random_gradient_checks, train, ProgressionEncoder,
    ProgressionModel, SeqError, TrainingHistory,
};
use crate::synthgen::{generate, write_generated, GenError, GroundTruth, Scale, GROUND_TRUTH_FILE};

pub const EXIT_OK: i32 = 0;
pub const EXIT_OTHER: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_CHECK: i32 = 4;

const FEATURIZER_NAME: &str = "featurizer.json";
const MODEL_NAME: &str = "model.jrsq";

#[derive(Debug, Parser)]
#[command(name = "jobrec", version, about = "Job recommendations from career progression and similarity")]
struct Cli {
    /// TOML or JSON config file; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the configured seed everywhere.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Machine-readable output.
    #[arg(long, global = true)]
    json: bool,
    /// Compose candidates on all available cores.
    #[arg(long, global = true)]
    parallel: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a synthetic dataset with known preferences.
    Generate {
        #[arg(long, value_enum, default_value_t = ScaleArg::Small)]
        scale: ScaleArg,
        #[arg(long, default_value = "data")]
        out: PathBuf,
    },
    /// Build the skill embedding, competency groups and vector layout.
    Featurize {
        #[arg(long, default_value = "data")]
        data: PathBuf,
        /// [default: <DATA>/featurizer.json]
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        embed_dim: Option<usize>,
        #[arg(long)]
        competency_k: Option<usize>,
        #[arg(long)]
        expand_m: Option<usize>,
    },
    /// Train the sequence model on the training candidates.
    Train {
        #[command(flatten)]
        inputs: Inputs,
        /// [default: <DATA>/model.jrsq]
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also train the feedforward baseline and write it here.
        #[arg(long)]
        baseline_out: Option<PathBuf>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        lr: Option<f64>,
        #[arg(long)]
        batch: Option<usize>,
        /// Cap on interactions used to build examples.
        #[arg(long)]
        max_interactions: Option<usize>,
    },
    /// Compare analytic and finite-difference gradients on random small networks.
    GradCheck {
        #[arg(long, default_value_t = 20)]
        configs: usize,
        #[arg(long, default_value_t = 1e-5)]
        h: f64,
        #[arg(long, default_value_t = 1e-4)]
        tolerance: f64,
    },
    /// Compose recommendation slates.
    Recommend {
        #[command(flatten)]
        inputs: Inputs,
        /// [default: <DATA>/model.jrsq when present]
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long, conflicts_with = "all", required_unless_present = "all")]
        candidate: Option<String>,
        #[arg(long)]
        all: bool,
        #[arg(long)]
        top: Option<usize>,
        /// Starvation counter file, read before and written after.
        #[arg(long)]
        counters: Option<PathBuf>,
        /// Composition time [default: latest timestamp in the data].
        #[arg(long)]
        now: Option<Timestamp>,
    },
    /// Report held-out classification metrics.
    Evaluate {
        #[command(flatten)]
        inputs: Inputs,
        /// [default: <DATA>/model.jrsq]
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        baseline: Option<PathBuf>,
        #[arg(long)]
        max_interactions: Option<usize>,
    },
    /// Simulate clicks on blended and model-only slates.
    SimulateCtr {
        #[command(flatten)]
        inputs: Inputs,
        /// [default: <DATA>/model.jrsq]
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long, default_value = "blended,ml")]
        arms: String,
        #[arg(long, default_value_t = 1)]
        seeds: usize,
        #[arg(long, default_value_t = 20)]
        top: usize,
        /// Click preferences: the generator's ground truth, or the same value for every job.
        #[arg(long, value_enum, default_value_t = PreferenceArg::Truth)]
        preference: PreferenceArg,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum PreferenceArg {
    Truth,
    Flat,
}

/// Preference given to every job under `--preference flat`.
pub const FLAT_PREFERENCE: f64 = 0.5;

#[derive(Debug, Args)]
struct Inputs {
    #[arg(long, default_value = "data")]
    data: PathBuf,
    /// [default: <DATA>/featurizer.json]
    #[arg(long)]
    featurizer: Option<PathBuf>,
}

impl Inputs {
    fn featurizer_path(&self) -> PathBuf {
        self.featurizer.clone().unwrap_or_else(|| self.data.join(FEATURIZER_NAME))
    }

    fn load(&self) -> Result<(Dataset, Featurizer), CliError> {
        let ds = load_dir(&self.data)?;
        let f = Featurizer::load(&self.featurizer_path())?;
        Ok((ds, f))
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ScaleArg {
    Small,
    Paper,
}

#[derive(Debug)]
enum CliError {
    Config(String),
    Data(String),
    Check(String),
    Other(String),
}

impl CliError {
    fn code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Data(_) => EXIT_DATA,
            CliError::Check(_) => EXIT_CHECK,
            CliError::Other(_) => EXIT_OTHER,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Data(_) => "data",
            CliError::Check(_) => "check",
            CliError::Other(_) => "other",
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Config(m) | CliError::Data(m) | CliError::Check(m) | CliError::Other(m) => m,
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<DataError> for CliError {
    fn from(e: DataError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<FeatureError> for CliError {
    fn from(e: FeatureError) -> Self {
        match e {
            FeatureError::DimensionTooLarge { .. } | FeatureError::DimensionTooSmall(_) | FeatureError::KTooLarge { .. } => {
                CliError::Config(e.to_string())
            }
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<GenError> for CliError {
    fn from(e: GenError) -> Self {
        match e {
            GenError::ConfigInvalid(_) => CliError::Config(e.to_string()),
            GenError::Data(d) => d.into(),
        }
    }
}

impl From<SeqError> for CliError {
    fn from(e: SeqError) -> Self {
        match e {
            SeqError::InvalidConfig(_) => CliError::Config(e.to_string()),
            SeqError::Checkpoint(_)
            | SeqError::Data(_)
            | SeqError::EmptyDataset
            | SeqError::SingleClassDataset
            | SeqError::ShapeMismatch { .. } => CliError::Data(e.to_string()),
            _ => CliError::Other(e.to_string()),
        }
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        CliError::Other(e.to_string())
    }
}

/// Parses `argv` (program name first), runs the subcommand and returns the
/// process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).try_init();
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let json = cli.json;
    match execute(cli) {
        Ok(out) => {
            print!("{out}");
            EXIT_OK
        }
        Err(e) => {
            if json {
                eprintln!("{}", json!({"error": e.kind(), "message": e.message()}));
            } else {
                eprintln!("error ({}): {}", e.kind(), e.message());
            }
            e.code()
        }
    }
}

fn load_config(cli: &Cli) -> Result<AppConfig, CliError> {
    let mut cfg = match &cli.config {
        Some(p) => AppConfig::load(p)?,
        None => AppConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn echo(cfg: &AppConfig) {
    eprintln!("# effective config");
    eprint!("{}", cfg.to_toml());
}

fn threads(parallel: bool) -> usize {
    if parallel {
        std::thread::available_parallelism().map_or(1, |n| n.get())
    } else {
        1
    }
}

fn execute(cli: Cli) -> Result<String, CliError> {
    let mut cfg = load_config(&cli)?;
    let threads = threads(cli.parallel);
    match cli.command {
        Command::Generate { scale, out } => {
            echo(&cfg);
            let scale = match scale {
                ScaleArg::Small => Scale::Small,
                ScaleArg::Paper => Scale::Paper,
            };
            cmd_generate(&cfg, scale, &out, cli.json)
        }
        Command::Featurize {
            data,
            out,
            embed_dim,
            competency_k,
            expand_m,
        } => {
            cfg.embed_dim = embed_dim.unwrap_or(cfg.embed_dim);
            cfg.competency_k = competency_k.unwrap_or(cfg.competency_k);
            cfg.expand_m = expand_m.unwrap_or(cfg.expand_m);
            cfg.validate()?;
            echo(&cfg);
            let out = out.unwrap_or_else(|| data.join(FEATURIZER_NAME));
            cmd_featurize(&cfg, &data, &out, cli.json)
        }
        Command::Train {
            inputs,
            out,
            baseline_out,
            epochs,
            lr,
            batch,
            max_interactions,
        } => {
            cfg.epochs = epochs.unwrap_or(cfg.epochs);
            cfg.learning_rate = lr.unwrap_or(cfg.learning_rate);
            cfg.batch_size = batch.unwrap_or(cfg.batch_size);
            cfg.max_training_interactions = max_interactions.unwrap_or(cfg.max_training_interactions);
            cfg.validate()?;
            echo(&cfg);
            let out = out.unwrap_or_else(|| inputs.data.join(MODEL_NAME));
            cmd_train(&cfg, &inputs, &out, baseline_out.as_deref(), cli.json)
        }
        Command::GradCheck { configs, h, tolerance } => {
            echo(&cfg);
            cmd_grad_check(&cfg, configs, h, tolerance, cli.json)
        }
        Command::Recommend {
            inputs,
            model,
            candidate,
            all,
            top,
            counters,
            now,
        } => {
            cfg.validate()?;
            echo(&cfg);
            let model = model.or_else(|| Some(inputs.data.join(MODEL_NAME)).filter(|p| p.exists()));
            let req = RecommendRequest {
                model,
                candidate: if all { None } else { candidate },
                top,
                counters,
                now,
                threads,
            };
            cmd_recommend(&cfg, &inputs, req, cli.json)
        }
        Command::Evaluate {
            inputs,
            model,
            baseline,
            max_interactions,
        } => {
            cfg.max_training_interactions = max_interactions.unwrap_or(cfg.max_training_interactions);
            cfg.validate()?;
            echo(&cfg);
            let model = model.unwrap_or_else(|| inputs.data.join(MODEL_NAME));
            cmd_evaluate(&cfg, &inputs, &model, baseline.as_deref(), cli.json)
        }
        Command::SimulateCtr {
            inputs,
            model,
            arms,
            seeds,
            top,
            preference,
        } => {
            let mut names: Vec<&str> = arms.split(',').map(str::trim).collect();
            names.sort_unstable();
            if names != ["blended", "ml"] {
                return Err(CliError::Config(format!("--arms must name blended and ml, got {arms:?}")));
            }
            if seeds == 0 {
                return Err(CliError::Config("--seeds must be positive".into()));
            }
            cfg.validate()?;
            echo(&cfg);
            let model = model.unwrap_or_else(|| inputs.data.join(MODEL_NAME));
            cmd_simulate_ctr(&cfg, &inputs, &model, (seeds, top, preference), threads, cli.json)
        }
    }
}

fn cmd_generate(cfg: &AppConfig, scale: Scale, out: &Path, json: bool) -> Result<String, CliError> {
    let gcfg = cfg.generator_config(scale);
    let (ds, truth) = generate(&gcfg)?;
    write_generated(&ds, &truth, out)?;
    let (c, j, i) = ds.counts();
    let positives = ds.interactions.iter().filter(|x| x.is_positive()).count();
    Ok(if json {
        format!(
            "{}\n",
            json!({"out": out.display().to_string(), "candidates": c, "jobs": j, "interactions": i, "positive": positives})
        )
    } else {
        format!(
            "wrote {}\ncandidates {c}\njobs {j}\ninteractions {i}\npositive {positives}\n",
            out.display()
        )
    })
}

fn cmd_featurize(cfg: &AppConfig, data: &Path, out: &Path, json: bool) -> Result<String, CliError> {
    let ds = load_dir(data)?;
    let f = Featurizer::build(&ds, &cfg.featurizer_config())?;
    f.save(out)?;
    Ok(if json {
        format!(
            "{}\n",
            json!({"out": out.display().to_string(), "vocabulary": f.vocabulary.len(), "dim": f.dim()})
        )
    } else {
        format!(
            "wrote {}\nvocabulary {}\nvector width {}\n",
            out.display(),
            f.vocabulary.len(),
            f.dim()
        )
    })
}

/// Candidates whose interactions feed training and testing. The split is
/// redrawn from the seed, so `evaluate` sees the same test side as `train`.
fn split_sides(ds: &Dataset, cfg: &AppConfig, seed: u64) -> (Vec<String>, Vec<String>) {
    let split = split_candidates(ds, cfg.test_fraction, seed);
    let train = cap_candidates(ds, &split.train, cfg.max_training_interactions, seed);
    let test_cap = (cfg.max_training_interactions as f64 * cfg.test_fraction / (1.0 - cfg.test_fraction).max(1e-9))
        .ceil() as usize;
    let test = cap_candidates(ds, &split.test, test_cap.max(1), seed);
    (train, test)
}

fn history_summary(h: &TrainingHistory) -> String {
    let mut s = String::new();
    for e in &h.epochs {
        let _ = writeln!(
            s,
            "epoch {:>3}  loss {:.4}  validation accuracy {:.4}",
            e.epoch, e.train_loss, e.validation.accuracy
        );
    }
    s
}

fn cmd_train(
    cfg: &AppConfig,
    inputs: &Inputs,
    out: &Path,
    baseline_out: Option<&Path>,
    json: bool,
) -> Result<String, CliError> {
    let (ds, f) = inputs.load()?;
    let encoder = ProgressionEncoder::new(&f, cfg.append_competency);
    let (train_ids, _) = split_sides(&ds, cfg, cfg.seed);
    let ex = build_sequence_examples_for(&ds, &encoder, train_ids.iter().map(String::as_str));
    let tcfg = cfg.train_config();
    let (params, history) = train(&ex.examples, &tcfg)?;
    eprint!("{}", history_summary(&history));
    let model = ProgressionModel {
        params,
        append_competency: cfg.append_competency,
        seed: cfg.seed,
        train_config: tcfg.clone(),
    };
    model.save(out)?;
    let mut baseline_epochs = None;
    if let Some(path) = baseline_out {
        let (ff, h) = train_feedforward_baseline(&ex.examples, &tcfg)?;
        ff.save(path)?;
        baseline_epochs = Some(h.epochs.len());
    }
    Ok(if json {
        format!(
            "{}\n",
            json!({
                "out": out.display().to_string(),
                "training_candidates": train_ids.len(),
                "examples": ex.examples.len(),
                "skipped_no_prior_positive": ex.skipped_no_prior_positive,
                "epochs_run": history.epochs.len(),
                "best_epoch": history.best_epoch,
                "baseline_epochs_run": baseline_epochs,
            })
        )
    } else {
        let mut s = format!(
            "wrote {}\ntraining candidates {}\nexamples {}\nepochs run {}\n",
            out.display(),
            train_ids.len(),
            ex.examples.len(),
            history.epochs.len()
        );
        if let Some(b) = history.best_epoch {
            let _ = writeln!(s, "best epoch {b}");
        }
        if let Some(path) = baseline_out {
            let _ = writeln!(s, "wrote {}", path.display());
        }
        s
    })
}

fn cmd_grad_check(cfg: &AppConfig, configs: usize, h: f64, tolerance: f64, json: bool) -> Result<String, CliError> {
    if configs == 0 || h <= 0.0 {
        return Err(CliError::Config("--configs and --h must be positive".into()));
    }
    let checks = random_gradient_checks(configs, h, cfg.seed);
    let worst = checks
        .iter()
        .map(|c| c.report.max_relative_error)
        .fold(0.0, f64::max);
    let out = if json {
        let rows: Vec<_> = checks
            .iter()
            .map(|c| {
                json!({
                    "input": c.dims.input, "hidden1": c.dims.hidden1, "hidden2": c.dims.hidden2,
                    "parameters": c.report.parameters_checked,
                    "max_relative_error": c.report.max_relative_error,
                    "tensor": c.report.tensor,
                })
            })
            .collect();
        format!("{}\n", json!({"configs": rows, "max_relative_error": worst, "tolerance": tolerance}))
    } else {
        let mut s = String::new();
        for c in &checks {
            let _ = writeln!(
                s,
                "input {} hidden {}/{}  params {:>4}  max rel error {:.3e} ({})",
                c.dims.input,
                c.dims.hidden1,
                c.dims.hidden2,
                c.report.parameters_checked,
                c.report.max_relative_error,
                c.report.tensor
            );
        }
        let _ = writeln!(s, "max relative error {worst:.3e}");
        s
    };
    if worst < tolerance {
        Ok(out)
    } else {
        print!("{out}");
        Err(CliError::Check(format!("max relative error {worst:.3e} >= {tolerance:e}")))
    }
}

struct RecommendRequest {
    model: Option<PathBuf>,
    candidate: Option<String>,
    top: Option<usize>,
    counters: Option<PathBuf>,
    now: Option<Timestamp>,
    threads: usize,
}

/// Latest timestamp anywhere in the data.
fn latest(ds: &Dataset) -> Timestamp {
    let a = ds.interactions.iter().map(|i| i.timestamp).max();
    let b = ds.snapshots.values().flatten().map(|s| s.as_of).max();
    a.max(b).unwrap_or(0)
}

fn cmd_recommend(cfg: &AppConfig, inputs: &Inputs, req: RecommendRequest, json: bool) -> Result<String, CliError> {
    let (ds, f) = inputs.load()?;
    let model = req.model.as_deref().map(ProgressionModel::load).transpose()?;
    let indices = Indices::build(&ds, &f);
    let ccfg = cfg.compose_config(req.top);
    let ctx = ComposeContext {
        dataset: &ds,
        featurizer: &f,
        model: model.as_ref().map(|m| &m.params),
        append_competency: model.as_ref().map_or(cfg.append_competency, |m| m.append_competency),
        indices: &indices,
        config: &ccfg,
    };
    let ids: Vec<String> = match &req.candidate {
        Some(c) => {
            ds.candidate(c)?;
            vec![c.clone()]
        }
        None => ds.candidates.keys().cloned().collect(),
    };
    let mut counters = match &req.counters {
        Some(p) => StarvationCounter::load(p, cfg.starvation_threshold)?,
        None => StarvationCounter::new(cfg.starvation_threshold),
    };
    let now = req.now.unwrap_or_else(|| latest(&ds));
    let outcomes = compose_many(&ids, &ctx, &mut counters, cfg.seed, req.threads, now)?;
    if let Some(p) = &req.counters {
        counters.save(p)?;
    }
    let mut s = String::new();
    for o in &outcomes {
        if json {
            let _ = writeln!(s, "{}", serde_json::to_string(o).expect("outcome serializes"));
            continue;
        }
        if let Some(r) = &o.report.reason {
            eprintln!("{}: empty slate ({r})", o.slate.candidate_id);
        }
        for e in &o.slate.entries {
            if req.candidate.is_some() {
                let _ = writeln!(s, "{}\t{}", e.job_id, e.source.as_str());
            } else {
                let _ = writeln!(s, "{}\t{}\t{}", o.slate.candidate_id, e.job_id, e.source.as_str());
            }
        }
    }
    Ok(s)
}

fn cmd_evaluate(
    cfg: &AppConfig,
    inputs: &Inputs,
    model_path: &Path,
    baseline: Option<&Path>,
    json: bool,
) -> Result<String, CliError> {
    let (ds, f) = inputs.load()?;
    let model = ProgressionModel::load(model_path)?;
    let encoder = ProgressionEncoder::new(&f, model.append_competency);
    let (_, test_ids) = split_sides(&ds, cfg, model.seed);
    let ex = build_sequence_examples_for(&ds, &encoder, test_ids.iter().map(String::as_str));
    if ex.examples.is_empty() {
        return Err(CliError::Data("no test examples".into()));
    }
    let labels: Vec<u8> = ex.examples.iter().map(|e| e.label).collect();
    let threshold = |p: Vec<f64>| p.into_iter().map(|p| u8::from(p >= 0.5)).collect::<Vec<u8>>();
    let batch = model.train_config.batch_size;
    let lstm = classification_report(&threshold(predict_examples(&model.params, &ex.examples, batch)), &labels)?;
    let ff = match baseline {
        Some(p) => {
            let ff = FeedforwardParams::load(p)?;
            Some(classification_report(&threshold(predict_examples(&ff, &ex.examples, batch)), &labels)?)
        }
        None => None,
    };
    let majority = majority_baseline(&labels)?;
    if json {
        return Ok(format!(
            "{}\n",
            json!({"test_candidates": test_ids.len(), "examples": labels.len(),
                   "bilstm_attention": lstm, "feedforward": ff, "majority": majority})
        ));
    }
    let mut rows = vec![("Bi-LSTM + attention", &lstm)];
    if let Some(r) = &ff {
        rows.push(("Feedforward", r));
    }
    rows.push(("Majority class", &majority));
    Ok(format!(
        "test candidates {}, examples {}\n{}",
        test_ids.len(),
        labels.len(),
        format_table(&rows)
    ))
}

fn cmd_simulate_ctr(
    cfg: &AppConfig,
    inputs: &Inputs,
    model_path: &Path,
    (seeds, top, preference): (usize, usize, PreferenceArg),
    threads: usize,
    json: bool,
) -> Result<String, CliError> {
    let (ds, f) = inputs.load()?;
    let truth = match preference {
        PreferenceArg::Truth => Some(GroundTruth::load(&inputs.data.join(GROUND_TRUTH_FILE))?),
        PreferenceArg::Flat => None,
    };
    let flat = |_: &str, _: &str| FLAT_PREFERENCE;
    let oracle: &dyn PreferenceOracle = match &truth {
        Some(t) => t,
        None => &flat,
    };
    let model = ProgressionModel::load(model_path)?;
    let indices = Indices::build(&ds, &f);
    let ccfg = cfg.compose_config(Some(top));
    let ctx = ComposeContext {
        dataset: &ds,
        featurizer: &f,
        model: Some(&model.params),
        append_competency: model.append_competency,
        indices: &indices,
        config: &ccfg,
    };
    let ids: Vec<String> = ds
        .candidates
        .keys()
        .filter(|c| ds.last_positive(c).is_some())
        .cloned()
        .collect();
    let now = latest(&ds);
    let mut counters = StarvationCounter::new(cfg.starvation_threshold);
    let blended: Vec<_> = compose_many(&ids, &ctx, &mut counters, cfg.seed, threads, now)?
        .into_iter()
        .map(|o| o.slate)
        .collect();
    let ml = ids
        .iter()
        .map(|c| compose_ml_only(c, &ctx, now))
        .collect::<Result<Vec<_>, _>>()?;
    let click = cfg.click_model();
    let reports: Vec<(u64, CtrReport)> = (0..seeds as u64)
        .map(|i| {
            let s = cfg.seed.wrapping_add(i);
            let r = simulate_ctr(&blended, &ml, oracle, &click, &mut ChaCha8Rng::seed_from_u64(s))?;
            Ok((s, r))
        })
        .collect::<Result<_, CliError>>()?;
    let significant = reports.iter().filter(|(_, r)| r.significant_at_01).count();
    if json {
        let rows: Vec<_> = reports.iter().map(|(s, r)| json!({"seed": s, "report": r})).collect();
        return Ok(format!(
            "{}\n",
            json!({"candidates": ids.len(), "runs": rows, "significant_at_01": significant})
        ));
    }
    let mut s = String::new();
    for (seed, r) in &reports {
        let _ = writeln!(s, "{}", json!({"seed": seed, "report": r}));
    }
    let _ = writeln!(
        s,
        "{:>8}  {:>10}  {:>10}  {:>10}  {:>10}  {:>10}  {:>9}  {}",
        "seed", "blend imp", "blend ctr", "ml imp", "ml ctr", "increase", "chi2", "p<.01"
    );
    for (seed, r) in &reports {
        let inc = r
            .relative_increase
            .map_or("-".to_string(), |v| format!("{:.2}%", 100.0 * v));
        let _ = writeln!(
            s,
            "{seed:>8}  {:>10}  {:>10.4}  {:>10}  {:>10.4}  {inc:>10}  {:>9.2}  {}",
            r.blended.impressions,
            r.blended.ctr,
            r.ml_only.impressions,
            r.ml_only.ctr,
            r.chi_square,
            if r.significant_at_01 { "yes" } else { "no" }
        );
    }
    let _ = writeln!(s, "significant in {significant} of {} runs", reports.len());
    Ok(s)
}
