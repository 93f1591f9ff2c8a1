//! Experiment runner: executes a scenario config (or the canonical property
//! matrix), caches results by content hash, and emits reports.

use crate::config::{ConfigError, ScenarioConfig};
use crate::reports::{
    emit_reports, render_matrix, CurvePoint, InterimOut, MatrixOut, MatrixRowOut, RunOutputs,
};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use tfm_core::checkers::{
    check_constant_revenue, check_miner_simplicity, check_off_chain_influence,
    check_strong_collusion, check_trustless_collusion, check_user_simplicity, check_weak_collusion,
    CheckerError, PropertyVerdict,
};
use tfm_core::engine::estimate_miner_revenue;
use tfm_core::interim::{check_payment_identity, interim_rules, revenue_equals_virtual_welfare};
use tfm_core::matrix::{property_matrix, table1_rows, MatrixReport, GOLDEN_CELLS, ROW_LABELS};
use tfm_core::rng::Substreams;

/// The golden matrix shipped with the tool; `run` exits 1 when a matrix run
/// disagrees with it.
pub const TABLE1_GOLDEN: &str = include_str!("../goldens/table1_matrix.txt");

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Checker(#[from] CheckerError),
    #[error("engine: {0}")]
    Engine(#[from] tfm_core::engine::EngineError),
    #[error("interim: {0}")]
    Interim(#[from] tfm_core::interim::InterimError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("cache: {0}")]
    Cache(String),
}

impl CliError {
    /// Process exit code: 2 for configuration problems, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            _ => 1,
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    pub out_dir: PathBuf,
    pub reps_override: Option<u64>,
    pub seed_override: Option<u64>,
    pub jobs: Option<usize>,
    pub no_cache: bool,
    pub cache_dir: Option<PathBuf>,
}

/// One cached run: the canonical config, tool version, wall-clock timestamp,
/// and every report-feeding output. Identical hashes replay identical
/// reports without Monte Carlo work.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ResultRecord {
    pub scenario_hash: String,
    pub config_canonical: String,
    pub tool_version: String,
    pub timestamp_unix: u64,
    pub outputs: RunOutputs,
}

fn cache_dir(opts: &RunOptions) -> PathBuf {
    if let Some(dir) = &opts.cache_dir {
        return dir.clone();
    }
    if let Ok(dir) = std::env::var("TFMLAB_CACHE_DIR") {
        return PathBuf::from(dir);
    }
    opts.out_dir.join(".cache")
}

fn load_cached(opts: &RunOptions, hash: &str, canonical: &str) -> Option<ResultRecord> {
    if opts.no_cache {
        return None;
    }
    let path = cache_dir(opts).join(format!("{hash}.json"));
    let text = std::fs::read_to_string(path).ok()?;
    let record: ResultRecord = serde_json::from_str(&text).ok()?;
    // hashes are short; equal canonical configs are the real key
    (record.config_canonical == canonical).then_some(record)
}

fn store_cached(opts: &RunOptions, record: &ResultRecord) -> Result<(), CliError> {
    if opts.no_cache {
        return Ok(());
    }
    let dir = cache_dir(opts);
    std::fs::create_dir_all(&dir)?;
    let path = dir.join(format!("{}.json", record.scenario_hash));
    let body = serde_json::to_string(record).map_err(|e| CliError::Cache(e.to_string()))?;
    std::fs::write(path, body)?;
    Ok(())
}

fn now_unix() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

fn to_value(v: &PropertyVerdict) -> serde_json::Value {
    serde_json::to_value(v).expect("verdict serializes")
}

/// Runs a config and emits reports. Returns the process exit code:
/// 0 on success, 1 when a golden expectation mismatches.
pub fn run(config_path: &Path, opts: &RunOptions) -> Result<i32, CliError> {
    let mut config = ScenarioConfig::load(config_path)?;
    if let Some(reps) = opts.reps_override {
        config.reps = reps;
    }
    if let Some(seed) = opts.seed_override {
        config.seed = seed;
    }
    config.validate()?;
    let canonical = config.canonical_json();
    let hash = config.scenario_hash();

    if let Some(record) = load_cached(opts, &hash, &canonical) {
        emit_reports(&record.outputs, &opts.out_dir)?;
        return Ok(golden_exit_code(&record.outputs));
    }

    let outputs = match opts.jobs {
        Some(jobs) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(jobs.max(1))
                .build()
                .map_err(|e| CliError::Cache(e.to_string()))?;
            pool.install(|| execute(&config))?
        }
        None => execute(&config)?,
    };

    let record = ResultRecord {
        scenario_hash: hash,
        config_canonical: canonical,
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        timestamp_unix: now_unix(),
        outputs,
    };
    store_cached(opts, &record)?;
    emit_reports(&record.outputs, &opts.out_dir)?;
    Ok(golden_exit_code(&record.outputs))
}

fn golden_exit_code(outputs: &RunOutputs) -> i32 {
    match &outputs.matrix {
        Some(matrix) if render_matrix(matrix) != TABLE1_GOLDEN => 1,
        _ => 0,
    }
}

fn matrix_out(report: &MatrixReport) -> MatrixOut {
    MatrixOut {
        rows: report
            .rows
            .iter()
            .map(|r| MatrixRowOut {
                id: r.id.clone(),
                label: r.label.clone(),
                off_chain_influence_proof: r.cells.off_chain_influence_proof,
                user_simple: r.cells.user_simple,
                miner_simple: r.cells.miner_simple,
            })
            .collect(),
    }
}

/// Executes the work a config asks for. Deterministic given the config.
pub fn execute(config: &ScenarioConfig) -> Result<RunOutputs, CliError> {
    if config.is_table1() {
        let rows = table1_rows(&config.table1_overrides());
        let cfg = config.check_cfg();
        let report = property_matrix(&rows, &cfg)?;
        let verdicts = report
            .rows
            .iter()
            .flat_map(|r| r.verdicts.iter().map(to_value))
            .collect();
        return Ok(RunOutputs {
            verdicts,
            revenue_curve: Vec::new(),
            interim: Vec::new(),
            matrix: Some(matrix_out(&report)),
        });
    }

    let cfg = config.check_cfg();
    let dist = config.build_dist()?;
    let profile = config.build_profile()?;
    let mech = config.build_mechanism()?;
    let n0 = config.n_list[0];
    let scenario = config.build_scenario(n0)?;
    let mut verdicts: Vec<serde_json::Value> = Vec::new();
    let mut interim_out: Vec<InterimOut> = Vec::new();

    for checker in &config.checkers {
        match checker.as_str() {
            "user_simplicity" => verdicts.push(to_value(&check_user_simplicity(&scenario, &cfg)?)),
            "miner_simplicity" => {
                verdicts.push(to_value(&check_miner_simplicity(&scenario, &cfg)?))
            }
            "strong_collusion" => {
                verdicts.push(to_value(&check_strong_collusion(&scenario, &cfg, 0)?))
            }
            "off_chain_influence" => {
                verdicts.push(to_value(&check_off_chain_influence(&scenario, &cfg)?))
            }
            "weak_collusion" => verdicts.push(to_value(&check_weak_collusion(&scenario, &cfg, 0)?)),
            "trustless_collusion" => {
                verdicts.push(to_value(&check_trustless_collusion(&scenario, &cfg, None)?))
            }
            "constant_revenue" => verdicts.push(to_value(&check_constant_revenue(
                &scenario,
                &cfg,
                &config.n_list,
            )?)),
            "payment_identity" => {
                let streams = Substreams::new(config.seed)
                    .labeled(&config.name)
                    .labeled("payment_identity");
                let grid = dist.inclusive_grid(cfg.budget.value_grid);
                let rules =
                    interim_rules(&mech, &profile, &dist, n0, 0, &grid, config.reps, &streams)?;
                let report = check_payment_identity(&rules, 0.01)?;
                interim_out.push(InterimOut {
                    user: rules.user,
                    grid: rules.grid.clone(),
                    x: rules.x.clone(),
                    p: rules.p.clone(),
                    se_x: rules.se_x.clone(),
                    se_p: rules.se_p.clone(),
                });
                verdicts.push(serde_json::json!({
                    "scenario": config.name,
                    "property": "payment_identity",
                    "verdict": if report.pass { "NO_VIOLATION_FOUND" } else { "VIOLATION" },
                    "max_gap": report.max_gap,
                    "tol": report.tol,
                    "seed": config.seed,
                }));
            }
            "revenue_virtual_welfare" => {
                let streams = Substreams::new(config.seed)
                    .labeled(&config.name)
                    .labeled("revenue_virtual_welfare");
                let report = revenue_equals_virtual_welfare(
                    &mech,
                    &profile,
                    &dist,
                    n0,
                    config.reps,
                    &streams,
                )?;
                verdicts.push(serde_json::json!({
                    "scenario": config.name,
                    "property": "revenue_equals_virtual_welfare",
                    "verdict": if report.pass { "NO_VIOLATION_FOUND" } else { "VIOLATION" },
                    "lhs": report.lhs,
                    "rhs": report.rhs,
                    "diff": report.diff,
                    "std_err": report.std_err,
                    "seed": config.seed,
                }));
            }
            "revenue_estimate" => {} // covered by the revenue curve below
            other => {
                return Err(ConfigError::Invalid(format!("unknown checker '{other}'")).into());
            }
        }
    }

    // revenue curve over the configured market sizes
    let mut revenue_curve = Vec::with_capacity(config.n_list.len());
    for &n in &config.n_list {
        let streams = Substreams::new(config.seed)
            .labeled(&config.name)
            .labeled(&format!("revenue/n{n}"));
        let est = estimate_miner_revenue(&mech, &profile, &dist, n, config.reps, &streams)?;
        revenue_curve.push(CurvePoint {
            scenario: config.name.clone(),
            n,
            mean: est.mean,
            stderr: est.std_err,
            reps: est.reps,
            seed: est.seed,
        });
    }

    Ok(RunOutputs {
        verdicts,
        revenue_curve,
        interim: interim_out,
        matrix: None,
    })
}

/// Runs a single named checker from a config and renders its verdicts as
/// pretty JSON.
pub fn verify(config_path: &Path, checker: &str) -> Result<String, CliError> {
    let mut config = ScenarioConfig::load(config_path)?;
    config.checkers = vec![checker.to_string()];
    config.validate()?;
    let outputs = execute(&config)?;
    let rendered: Vec<String> = outputs
        .verdicts
        .iter()
        .map(|v| serde_json::to_string_pretty(v).expect("verdict serializes"))
        .collect();
    Ok(rendered.join("\n"))
}

/// Library inventory: mechanisms, strategies, attacks, and checkers with
/// their configuration names.
pub fn library_inventory() -> String {
    let mut out = String::new();
    out.push_str("mechanisms:\n");
    out.push_str("  eip1559           params: price\n");
    out.push_str("  c_k1_pa           params: k (gatekeeper crypto)\n");
    out.push_str("  p_k1_pa           params: k (plaintext crypto)\n");
    out.push_str("  wpb               params: k, crypto_model (plaintext|gatekeeper)\n");
    out.push_str("  posted_plain      params: none (price is the miner advice)\n");
    out.push_str("  posted_crypto     params: none (price is the miner advice)\n");
    out.push_str("  bomb              params: reserve\n");
    out.push_str("  sr2pa             params: none (reserve is the miner advice)\n");
    out.push_str("  dra               params: reserve, p_conceal\n");
    out.push_str("distributions:\n");
    out.push_str("  uniform           params: lo, hi\n");
    out.push_str("  exponential       params: rate\n");
    out.push_str("  truncated_exponential  params: rate, hi\n");
    out.push_str("  piecewise_linear_cdf   params: knots\n");
    out.push_str("user strategies:\n");
    out.push_str("  truthful\n");
    out.push_str("  shade_wpb         params: reserve, below_reserve (bid_value|bid_zero)\n");
    out.push_str("  threshold         params: reserve\n");
    out.push_str("  fixed             params: bid\n");
    out.push_str("  dra_truthful_reveal\n");
    out.push_str("miner strategies:\n");
    out.push_str("  compliant         params: advice\n");
    out.push_str("  censor_lowest     params: advice, drop_lowest\n");
    out.push_str("  fabricate         params: advice, amounts\n");
    out.push_str("  reserve_at_max_bid\n");
    out.push_str("  p2pa_revenue_reserve\n");
    out.push_str("  dra_selective_reveal  params: grid_points\n");
    out.push_str("off-chain attacks:\n");
    out.push_str("  off_chain_posted_price   (eip1559)\n");
    out.push_str("  entry_fee_censor         (eip1559)\n");
    out.push_str("  off_chain_second_price   (sr2pa)\n");
    out.push_str("  steer_to_posted_price    (bomb)\n");
    out.push_str("checkers:\n");
    for name in crate::config::CHECKER_NAMES {
        out.push_str("  ");
        out.push_str(name);
        out.push('\n');
    }
    out.push_str("  table1 (golden property matrix)\n");
    out
}

/// Renders the golden matrix text from the expected cells; the shipped
/// golden file is exactly this rendering.
pub fn golden_matrix_text() -> String {
    let rows = ROW_LABELS
        .iter()
        .zip(GOLDEN_CELLS)
        .enumerate()
        .map(|(i, (label, (o, u, m)))| MatrixRowOut {
            id: tfm_core::matrix::ROW_IDS[i].to_string(),
            label: label.to_string(),
            off_chain_influence_proof: o,
            user_simple: u,
            miner_simple: m,
        })
        .collect();
    render_matrix(&MatrixOut { rows })
}
