//! The subcommands, as library functions writing into an output directory.

use std::io::BufWriter;
use std::path::Path;

use dalloc_core::environment::{action_counts, engagement_rates, ReplayReport};
use dalloc_core::simulator::{
    elasticity_study, log_training_rows, run_experiment_with, run_ulcc_with, uncertainty_study, CurveRecord,
    ElasticityReport, LearningCurve, PolicySummary, Comparison, Setup, UncertaintyReport, UncertaintyStudy,
};
use dalloc_core::stats::{chi_square_uniform_p, TTest};
use dalloc_core::{
    composed_dim, derive_seed, generate_log, read_log, replay_evaluate, solve, train_embedding_model, write_log,
    AllocationProblem, Agent, DiscountDepth, EmbeddingModel, LogHeader, PosteriorState, ReplayEvent, ScoreMatrix,
    SyntheticWorld,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::{create_dir, open_input, CliError, Result};
use crate::manifest::RunManifest;
use crate::report::render_reports;

const STREAM_DATA: u64 = 11;
const STREAM_REPLAY: u64 = 12;

pub const LOG_FILE: &str = "log.jsonl";
pub const EMBEDDING_FILE: &str = "embedding.json";
pub const CURVES_FILE: &str = "curves.csv";
pub const ULCC_FILE: &str = "ulcc.csv";
pub const ELASTICITY_FILE: &str = "elasticity.csv";
pub const UNCERTAINTY_FILE: &str = "uncertainty.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const REPLAY_FILE: &str = "replay.json";
pub const REPLAY_BATCHES_FILE: &str = "replay_batches.csv";
pub const ASSIGNMENT_FILE: &str = "assignment.csv";
pub const ALLOCATION_FILE: &str = "allocation.json";

/// Runs `f` on a dedicated pool of `workers` threads (rayon's default when `None`).
pub fn with_workers<T: Send>(workers: Option<usize>, f: impl FnOnce() -> Result<T> + Send) -> Result<T> {
    match workers {
        None => f(),
        Some(0) => Err(CliError::validation("--workers must be >= 1")),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::Runtime(format!("thread pool: {e}")))?
            .install(f),
    }
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<()> {
    let path = dir.join(name);
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::write(&path, e))?;
    std::fs::write(&path, text + "\n").map_err(|e| CliError::write(&path, e))
}

pub(crate) fn write_csv<T: Serialize>(dir: &Path, name: &str, rows: &[T]) -> Result<()> {
    let path = dir.join(name);
    let mut w = csv::Writer::from_path(&path).map_err(|e| CliError::write(&path, e))?;
    for r in rows {
        w.serialize(r).map_err(|e| CliError::write(&path, e))?;
    }
    w.flush().map_err(|e| CliError::write(&path, e))
}

pub(crate) fn read_csv<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| CliError::input(path, e))?;
    r.deserialize()
        .enumerate()
        .map(|(i, row)| row.map_err(|e| CliError::input(path, format!("row {}: {e}", i + 1))))
        .collect()
}

fn read_replay_log(path: &Path) -> Result<(LogHeader, Vec<ReplayEvent>)> {
    read_log(open_input(path)?).map_err(|e| CliError::input(path, e))
}

/// Generates a uniformly randomised campaign log from the synthetic world.
pub fn gen_data(cfg: &RunConfig, out: &Path) -> Result<RunManifest> {
    let out = create_dir(out)?;
    let mut manifest = RunManifest::new("gen-data", cfg);
    let exp = &cfg.experiment;
    let seed = derive_seed(exp.seed, &[STREAM_DATA]);
    manifest.seeds.insert("data".into(), seed);
    let (world, log) = manifest.time("generate", || {
        let world = SyntheticWorld::generate(exp.world.clone())?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let log = generate_log(&world, cfg.data.customers, &exp.depths()?, &mut rng)?;
        Ok((world, log))
    })?;
    let header = LogHeader::new(world.n_features(), &exp.depths()?, log.len(), Some(seed));
    let path = out.join(LOG_FILE);
    let file = std::fs::File::create(&path).map_err(|e| CliError::write(&path, e))?;
    write_log(BufWriter::new(file), &header, &log).map_err(|e| CliError::write(&path, e))?;
    manifest.add_output(&out, LOG_FILE)?;
    manifest.write(&out)?;
    Ok(manifest)
}

/// Trains the context embedding network on the engaged rows of a log.
pub fn train_embeddings(cfg: &RunConfig, data: &Path, out: &Path) -> Result<RunManifest> {
    let (header, log) = read_replay_log(data)?;
    let arch = &cfg.experiment.architecture;
    if header.n_features != arch.n_features {
        return Err(CliError::validation(format!(
            "{}: log has {} features but the architecture expects {}",
            data.display(),
            header.n_features,
            arch.n_features
        )));
    }
    let out = create_dir(out)?;
    let mut manifest = RunManifest::new("train-embeddings", cfg);
    let rows = log_training_rows(&log);
    let trained = manifest.time("train", || Ok(train_embedding_model(&rows, arch, &cfg.experiment.training)?))?;
    let path = out.join(EMBEDDING_FILE);
    trained.model.save(&path).map_err(|e| CliError::write(&path, e))?;
    manifest.training_losses = Some(trained.epoch_losses);
    manifest.add_output(&out, EMBEDDING_FILE)?;
    manifest.write(&out)?;
    Ok(manifest)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UlccSummary {
    pub mean_ts_ip: f64,
    pub mean_ulcc: f64,
    pub degradation_pct: f64,
    pub per_batch_degradation: Vec<f64>,
    pub halves: TTest,
    pub overall: TTest,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UncertaintySummary {
    pub mean_sd_below_cutoff: f64,
    pub mean_sd_above_cutoff: f64,
    pub report: UncertaintyReport,
}

/// Contents of `summary.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationSummary {
    pub batch_size: usize,
    pub n_batches: usize,
    pub mc_iterations: usize,
    pub final_window: usize,
    pub policies: Vec<PolicySummary>,
    pub comparisons: Vec<Comparison>,
    pub engagement: Vec<f64>,
    pub embedding_final_loss: Option<f64>,
    pub ulcc: Option<UlccSummary>,
    pub elasticity: Option<ElasticityReport>,
    pub uncertainty: Option<UncertaintySummary>,
}

fn curve_records(curves: &[&LearningCurve]) -> Vec<CurveRecord> {
    let Some(first) = curves.first() else { return Vec::new() };
    let mut out = Vec::new();
    for m in 0..first.raw.len() {
        for b in 0..first.n_batches() {
            for c in curves {
                out.push(CurveRecord {
                    iteration: m,
                    batch: b,
                    policy: c.policy.clone(),
                    raw_abv: c.raw[m][b],
                    scaled_abv: c.scaled[m][b],
                });
            }
        }
    }
    out
}

#[derive(Serialize)]
struct ElasticityRow {
    depth: f64,
    predicted: f64,
    truth: f64,
}

#[derive(Serialize)]
struct UncertaintyRow {
    depth: f64,
    sd: f64,
    sd_more_data: f64,
}

/// Learning curves for every configured policy plus the optional studies,
/// then the charts.
pub fn simulate(cfg: &RunConfig, out: &Path) -> Result<RunManifest> {
    let out = create_dir(out)?;
    let exp = &cfg.experiment;
    let mut manifest = RunManifest::new("simulate", cfg);
    let setup = manifest.time("setup", || Ok(Setup::build(exp)?))?;
    let result = manifest.time("policies", || Ok(run_experiment_with(&setup, exp)?))?;
    write_csv(&out, CURVES_FILE, &result.records())?;
    manifest.add_output(&out, CURVES_FILE)?;

    let ulcc = if cfg.simulate.ulcc {
        let u = manifest.time("ulcc", || Ok(run_ulcc_with(&setup, exp)?))?;
        write_csv(&out, ULCC_FILE, &curve_records(&[&u.ts_ip, &u.ulcc, &u.random]))?;
        manifest.add_output(&out, ULCC_FILE)?;
        Some(UlccSummary {
            mean_ts_ip: u.mean_ts_ip,
            mean_ulcc: u.mean_ulcc,
            degradation_pct: u.degradation_pct(),
            per_batch_degradation: u.per_batch_degradation.clone(),
            halves: u.halves,
            overall: u.overall,
        })
    } else {
        None
    };

    let elasticity = if cfg.simulate.elasticity {
        let e = manifest.time("elasticity", || {
            Ok(elasticity_study(
                &setup,
                exp,
                cfg.simulate.elasticity_train_customers,
                cfg.simulate.eval_customers,
                cfg.simulate.grid_points,
            )?)
        })?;
        let rows: Vec<ElasticityRow> = e
            .grid
            .iter()
            .zip(e.predicted.iter().zip(&e.truth))
            .map(|(&depth, (&predicted, &truth))| ElasticityRow { depth, predicted, truth })
            .collect();
        write_csv(&out, ELASTICITY_FILE, &rows)?;
        manifest.add_output(&out, ELASTICITY_FILE)?;
        Some(e)
    } else {
        None
    };

    let uncertainty = if cfg.simulate.uncertainty {
        let study = UncertaintyStudy {
            eval_customers: cfg.simulate.eval_customers,
            grid_points: cfg.simulate.grid_points,
            ..UncertaintyStudy::default()
        };
        let u = manifest.time("uncertainty", || Ok(uncertainty_study(&setup, exp, &study)?))?;
        let rows: Vec<UncertaintyRow> = u
            .grid
            .iter()
            .zip(u.sd_small.iter().zip(&u.sd_large))
            .map(|(&depth, (&sd, &sd_more_data))| UncertaintyRow { depth, sd, sd_more_data })
            .collect();
        write_csv(&out, UNCERTAINTY_FILE, &rows)?;
        manifest.add_output(&out, UNCERTAINTY_FILE)?;
        let (below, above) = u.region_means();
        Some(UncertaintySummary {
            mean_sd_below_cutoff: below,
            mean_sd_above_cutoff: above,
            report: u,
        })
    } else {
        None
    };

    let summary = SimulationSummary {
        batch_size: exp.batch_size,
        n_batches: exp.n_batches,
        mc_iterations: exp.mc_iterations,
        final_window: result.final_window,
        policies: result.summary.clone(),
        comparisons: result.comparisons.clone(),
        engagement: result.engagement.clone(),
        embedding_final_loss: result.embedding_losses.last().copied(),
        ulcc,
        elasticity,
        uncertainty,
    };
    write_json(&out, SUMMARY_FILE, &summary)?;
    manifest.add_output(&out, SUMMARY_FILE)?;

    let hash = manifest.config_hash.clone();
    let charts = manifest.time("charts", || render_reports(&out, &hash))?;
    for name in charts {
        manifest.add_output(&out, &name)?;
    }
    manifest.write(&out)?;
    Ok(manifest)
}

/// Contents of `replay.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplaySummary {
    pub policy: String,
    pub action_counts: Vec<usize>,
    pub uniformity_p: f64,
    pub n_events: usize,
    pub n_retained: usize,
    pub mean_value: f64,
    pub standard_error: f64,
    pub log_mean_value: f64,
    /// `|mean_value - log_mean_value| <= 2 standard_error`.
    pub within_two_se: bool,
}

#[derive(Serialize)]
struct ReplayBatchRow {
    batch: usize,
    candidates: usize,
    retained: usize,
    retained_fraction: f64,
    engaged: usize,
    mean_value: f64,
    abv: f64,
    empty: bool,
}

/// Offline evaluation of the configured policy on a randomised log.
pub fn replay(cfg: &RunConfig, log_path: &Path, out: &Path) -> Result<(RunManifest, ReplayReport)> {
    let exp = &cfg.experiment;
    let (header, log) = read_replay_log(log_path)?;
    let actions = header.depths()?;
    if header.actions != exp.actions {
        return Err(CliError::validation(format!(
            "{}: log actions {:?} differ from configured actions {:?}",
            log_path.display(),
            header.actions,
            exp.actions
        )));
    }
    let counts = action_counts(&log, &actions)?;
    let p = chi_square_uniform_p(&counts);
    if p < cfg.replay.min_uniformity_p {
        return Err(CliError::validation(format!(
            "{}: logged actions are not uniformly randomised (chi-square p = {p:.3e}, counts {counts:?})",
            log_path.display()
        )));
    }
    let out = create_dir(out)?;
    let mut manifest = RunManifest::new("replay", cfg);
    let embedding = match &cfg.replay.embedding {
        Some(path) => EmbeddingModel::load(path).map_err(|e| CliError::input(path, e))?,
        None => {
            let rows = log_training_rows(&log);
            manifest
                .time("train", || Ok(train_embedding_model(&rows, &exp.architecture, &exp.training)?))?
                .model
        }
    };
    if embedding.n_features() != header.n_features {
        return Err(CliError::validation(format!(
            "embedding expects {} features, log has {}",
            embedding.n_features(),
            header.n_features
        )));
    }
    let dim = composed_dim(embedding.embedding_dim(), exp.rbf.dim());
    let mut agent = Agent {
        embedding,
        rbf: exp.rbf.clone(),
        engagement: engagement_rates(&log, &actions)?,
        actions,
        capacity_profile: exp.capacity_profile.clone(),
        w: exp.w,
        policy: cfg.replay.policy,
        posterior: PosteriorState::new(dim, exp.prior_scale, exp.beta)?.with_safeguards(exp.safeguards),
        solver: exp.solver,
    };
    let seed = derive_seed(exp.seed, &[STREAM_REPLAY]);
    manifest.seeds.insert("replay".into(), seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let report = manifest.time("replay", || Ok(replay_evaluate(&mut agent, &log, cfg.replay.batch_size, &mut rng)?))?;

    let summary = ReplaySummary {
        policy: cfg.replay.policy.label().to_string(),
        action_counts: counts,
        uniformity_p: p,
        n_events: report.n_events,
        n_retained: report.n_retained,
        mean_value: report.mean_value,
        standard_error: report.standard_error,
        log_mean_value: report.log_mean_value,
        within_two_se: (report.mean_value - report.log_mean_value).abs() <= 2.0 * report.standard_error,
    };
    write_json(&out, REPLAY_FILE, &summary)?;
    manifest.add_output(&out, REPLAY_FILE)?;
    let rows: Vec<ReplayBatchRow> = report
        .batches
        .iter()
        .map(|b| ReplayBatchRow {
            batch: b.index,
            candidates: b.candidates,
            retained: b.retained.len(),
            retained_fraction: b.retained_fraction(),
            engaged: b.engaged,
            mean_value: b.mean_value,
            abv: b.abv,
            empty: b.empty,
        })
        .collect();
    write_csv(&out, REPLAY_BATCHES_FILE, &rows)?;
    manifest.add_output(&out, REPLAY_BATCHES_FILE)?;
    manifest.write(&out)?;
    Ok((manifest, report))
}

/// `allocate` constraints file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AllocationConstraints {
    /// Importance of revenue relative to markdown cost.
    pub w: f64,
    /// Engagement probability per depth column.
    pub engagement: Vec<f64>,
    /// Maximum customers per depth column.
    pub capacities: Vec<i64>,
}

/// Contents of `allocation.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllocationSummary {
    pub objective: f64,
    pub n_customers: usize,
    pub n_assigned: usize,
    pub depths: Vec<f64>,
    pub capacities: Vec<usize>,
    pub usage: Vec<usize>,
}

/// Reads a scores CSV: a `customer` column, then one column per depth.
pub fn read_scores(path: &Path) -> Result<ScoreMatrix> {
    let mut r = csv::Reader::from_reader(open_input(path)?);
    let headers = r.headers().map_err(|e| CliError::input(path, e))?.clone();
    if headers.get(0) != Some("customer") || headers.len() < 2 {
        return Err(CliError::input(path, "header must be `customer` followed by one column per depth"));
    }
    let actions: Vec<DiscountDepth> = headers
        .iter()
        .skip(1)
        .map(|h| {
            let v: f64 = h.trim().parse().map_err(|_| CliError::input(path, format!("bad depth column {h:?}")))?;
            DiscountDepth::new(v).map_err(|e| CliError::input(path, e))
        })
        .collect::<Result<_>>()?;
    let mut customers = Vec::new();
    let mut values = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| CliError::input(path, e))?;
        let bad = |what: &str| CliError::input(path, format!("row {}: {what}", i + 1));
        if rec.len() != headers.len() {
            return Err(bad("wrong number of fields"));
        }
        customers.push(rec[0].trim().parse::<u64>().map_err(|_| bad("customer id must be a non-negative integer"))?);
        for field in rec.iter().skip(1) {
            let v: f64 = field.trim().parse().map_err(|_| bad(&format!("bad score {field:?}")))?;
            if !v.is_finite() {
                return Err(bad("scores must be finite"));
            }
            values.push(v);
        }
    }
    ScoreMatrix::new(values, customers, actions).map_err(|e| CliError::input(path, e))
}

#[derive(Serialize)]
struct AssignmentRow {
    customer: u64,
    depth: Option<f64>,
}

/// Solves one allocation problem from files.
pub fn allocate(scores: &Path, constraints: &Path, out: &Path) -> Result<(RunManifest, AllocationSummary)> {
    let matrix = read_scores(scores)?;
    let text = std::fs::read_to_string(constraints).map_err(|e| CliError::input(constraints, e))?;
    let c: AllocationConstraints = serde_json::from_str(&text).map_err(|e| CliError::input(constraints, e))?;
    let customers = matrix.customers().to_vec();
    let depths: Vec<f64> = matrix.actions().iter().map(|a| a.value()).collect();
    let problem = AllocationProblem::with_signed_capacities(matrix, c.w, c.engagement.clone(), &c.capacities)
        .map_err(|e| CliError::input(constraints, e))?;
    let out = create_dir(out)?;
    let mut manifest = RunManifest::new("allocate", &RunConfig::default());
    manifest.config = serde_json::to_value(&c).expect("constraints serialise");
    manifest.config_hash = crate::config::sha256_hex(crate::config::canonical_json(&manifest.config).as_bytes());
    manifest.seeds.clear();
    let assignment = manifest.time("solve", || Ok(solve(&problem)))?;
    let rows: Vec<AssignmentRow> = customers
        .iter()
        .enumerate()
        .map(|(i, &customer)| AssignmentRow {
            customer,
            depth: assignment.depth(i).map(|a| a.value()),
        })
        .collect();
    write_csv(&out, ASSIGNMENT_FILE, &rows)?;
    manifest.add_output(&out, ASSIGNMENT_FILE)?;
    let summary = AllocationSummary {
        objective: assignment.objective,
        n_customers: customers.len(),
        n_assigned: assignment.n_assigned(),
        depths,
        capacities: problem.capacities().to_vec(),
        usage: assignment.usage(),
    };
    write_json(&out, ALLOCATION_FILE, &summary)?;
    manifest.add_output(&out, ALLOCATION_FILE)?;
    manifest.write(&out)?;
    Ok((manifest, summary))
}

/// Regenerates the charts of a results directory.
pub fn report(results: &Path) -> Result<RunManifest> {
    if !results.is_dir() {
        return Err(CliError::validation(format!("{}: not a directory", results.display())));
    }
    let source = results.join(RunManifest::file_name("simulate"));
    let (config, hash) = if source.exists() {
        let m = RunManifest::read(&source)?;
        let cfg: RunConfig = serde_json::from_value(m.config).map_err(|e| CliError::input(&source, e))?;
        (cfg, m.config_hash)
    } else {
        (RunConfig::default(), "unknown".to_string())
    };
    let mut manifest = RunManifest::new("report", &config);
    manifest.config_hash = hash;
    let hash = manifest.config_hash.clone();
    let charts = manifest.time("charts", || render_reports(results, &hash))?;
    for name in charts {
        manifest.add_output(results, &name)?;
    }
    manifest.write(results)?;
    Ok(manifest)
}
