//! Batch pipeline: simulate, classify, estimate, invert, screen,
//! counterfactual, verify, report.
//!
//! Every stage reads its inputs from the artifact directory and writes plain
//! files there, so stages compose through the filesystem and re-running a
//! stage from cached upstream artifacts reproduces identical bytes. All
//! parallelism runs inside a sized thread pool with order-fixed reductions;
//! worker count never changes output bytes. The manifest records the config
//! hash and row counts, never timestamps.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::counterfactual::{rent_report, PricingMode, RentReport, RingHypothesis};
use crate::gpv::{invert_dataset, write_pseudo_costs_csv, PseudoCost, PseudoCostFlags};
use crate::lpe::{FittedLpe, LpeConfig};
use crate::market::{classify_bidders, load_dataset, write_enriched_csv, Dataset};
use crate::mechanism::{verify_theorem_with_rule, PriceRule, TheoremReport};
use crate::screens::{run_screens, ScreenConfig, ScreenReport};
use crate::synth::{generate_dataset, write_bids_csv, write_truth_csv, MarketConfig};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("input path `{0}` does not exist")]
    MissingInput(PathBuf),
    #[error("config error: {0}")]
    Config(String),
    #[error("stage `{stage}` failed: {message}")]
    Stage { stage: &'static str, message: String },
    #[error("i/o error on `{path}`: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

fn stage_err<E: std::fmt::Display>(stage: &'static str) -> impl FnOnce(E) -> PipelineError {
    move |e| PipelineError::Stage { stage, message: e.to_string() }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> PipelineError + '_ {
    move |source| PipelineError::Io { path: path.to_path_buf(), source }
}

/// Bidder classification thresholds.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct ClassifyConfig {
    pub rev_threshold: f64,
    pub part_threshold: f64,
}

impl Default for ClassifyConfig {
    fn default() -> Self {
        Self { rev_threshold: 0.01, part_threshold: 0.03 }
    }
}

/// Counterfactual stage configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct CounterfactualConfig {
    pub meb: f64,
    pub pricing_mode: PricingMode,
    /// Which flagged rings to evaluate: any of `broad`, `tight`, `custom`.
    pub rings: Vec<String>,
    /// Members of the `custom` ring, if used.
    pub custom_ring: Vec<String>,
}

impl Default for CounterfactualConfig {
    fn default() -> Self {
        Self {
            meb: 0.3,
            pricing_mode: PricingMode::MechanismConsistent,
            rings: vec!["broad".to_string(), "tight".to_string()],
            custom_ring: Vec::new(),
        }
    }
}

/// Mechanism verification configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct VerifyCmConfig {
    pub n: u32,
    pub grid: Vec<f64>,
    pub t: f64,
}

impl Default for VerifyCmConfig {
    fn default() -> Self {
        Self { n: 3, grid: vec![1.0, 2.0, 3.0, 4.0, 5.0], t: 1.0 }
    }
}

/// Full pipeline configuration, read from a TOML file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub seed: u64,
    /// 0 means the default thread count.
    pub workers: usize,
    pub out_dir: PathBuf,
    /// When set, `bids.csv` is copied from this path instead of simulated.
    pub input_bids: Option<PathBuf>,
    pub simulate: MarketConfig,
    pub classify: ClassifyConfig,
    pub estimate: LpeConfig,
    pub screens: ScreenConfig,
    pub counterfactual: CounterfactualConfig,
    pub verify_cm: VerifyCmConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            workers: 0,
            out_dir: PathBuf::from("artifacts"),
            input_bids: None,
            simulate: MarketConfig::example(),
            classify: ClassifyConfig::default(),
            estimate: LpeConfig::default(),
            screens: ScreenConfig::default(),
            counterfactual: CounterfactualConfig::default(),
            verify_cm: VerifyCmConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml_file(path: &Path) -> Result<Self, PipelineError> {
        if !path.exists() {
            return Err(PipelineError::MissingInput(path.to_path_buf()));
        }
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        toml::from_str(&text).map_err(|e| PipelineError::Config(e.to_string()))
    }

    /// Hash of the canonical serialized config; embedded in every manifest.
    ///
    /// The output directory and worker count are normalized away first:
    /// neither may affect artifact bytes, so runs that differ only in where
    /// they write or how many threads they use share a hash.
    pub fn config_hash(&self) -> String {
        let mut canonical = self.clone();
        canonical.out_dir = PathBuf::new();
        canonical.workers = 0;
        let text = toml::to_string(&canonical).expect("config serializes");
        let mut hasher = Sha256::new();
        hasher.update(text.as_bytes());
        hex_string(&hasher.finalize())
    }
}

fn hex_string(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), PipelineError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(io_err(path))?;
    }
    fs::write(path, bytes).map_err(io_err(path))
}

/// Serialize a JSON artifact with the config hash embedded at the top level.
/// Readers deserialize the payload type directly; the extra key is ignored.
fn write_json_artifact<T: serde::Serialize>(
    path: &Path,
    stage: &'static str,
    config_hash: &str,
    payload: &T,
) -> Result<(), PipelineError> {
    let mut value = serde_json::to_value(payload).map_err(stage_err(stage))?;
    if let serde_json::Value::Object(map) = &mut value {
        map.insert(
            "config_hash".to_string(),
            serde_json::Value::String(config_hash.to_string()),
        );
    }
    let json = serde_json::to_vec_pretty(&value).map_err(stage_err(stage))?;
    write_atomic(path, &json)
}

/// Artifact file names, in pipeline order.
pub const ARTIFACTS: [&str; 8] = [
    "bids.csv",
    "truth.csv",
    "enriched.csv",
    "lpe_dump.csv",
    "pseudo_costs.csv",
    "screens.json",
    "rent_report.json",
    "cm_verification.json",
];

/// Simulate a market and write `bids.csv` (+ `truth.csv`), or copy the
/// user-supplied bids file into the artifact directory.
pub fn stage_simulate(cfg: &RunConfig) -> Result<(), PipelineError> {
    let out = cfg.out_dir.as_path();
    if let Some(input) = &cfg.input_bids {
        if !input.exists() {
            return Err(PipelineError::MissingInput(input.clone()));
        }
        let bytes = fs::read(input).map_err(io_err(input))?;
        write_atomic(&out.join("bids.csv"), &bytes)?;
        return Ok(());
    }
    let mut sim = cfg.simulate.clone();
    sim.seed = cfg.seed;
    let market = generate_dataset(&sim).map_err(stage_err("simulate"))?;
    let mut bids = Vec::new();
    write_bids_csv(&market.dataset, &mut bids).map_err(stage_err("simulate"))?;
    write_atomic(&out.join("bids.csv"), &bids)?;
    let mut truth = Vec::new();
    write_truth_csv(&market.truth, &mut truth).map_err(stage_err("simulate"))?;
    write_atomic(&out.join("truth.csv"), &truth)?;
    Ok(())
}

fn load_classified(cfg: &RunConfig) -> Result<Dataset, PipelineError> {
    let path = cfg.out_dir.join("bids.csv");
    if !path.exists() {
        return Err(PipelineError::MissingInput(path));
    }
    let report = load_dataset(&path).map_err(stage_err("classify"))?;
    classify_bidders(report.dataset, cfg.classify.rev_threshold, cfg.classify.part_threshold)
        .map_err(stage_err("classify"))
}

/// Classify bidders and write the enriched CSV.
pub fn stage_classify(cfg: &RunConfig) -> Result<(), PipelineError> {
    let d = load_classified(cfg)?;
    let mut buf = Vec::new();
    write_enriched_csv(&d, &mut buf).map_err(stage_err("classify"))?;
    write_atomic(&cfg.out_dir.join("enriched.csv"), &buf)
}

/// Fit the local polynomial estimator and write the audit dump.
pub fn stage_estimate(cfg: &RunConfig) -> Result<(), PipelineError> {
    let d = load_classified(cfg)?;
    let fitted = FittedLpe::fit(&d, &cfg.estimate).map_err(stage_err("estimate"))?;
    let mut buf = Vec::new();
    fitted.dump_csv(&mut buf).map_err(stage_err("estimate"))?;
    write_atomic(&cfg.out_dir.join("lpe_dump.csv"), &buf)
}

/// Invert every bid into a pseudo-cost and write the CSV.
pub fn stage_invert(cfg: &RunConfig) -> Result<Vec<PseudoCost>, PipelineError> {
    let d = load_classified(cfg)?;
    let fitted = FittedLpe::fit(&d, &cfg.estimate).map_err(stage_err("invert"))?;
    let rows = invert_dataset(&d, &fitted);
    let mut buf = Vec::new();
    write_pseudo_costs_csv(&rows, &mut buf).map_err(stage_err("invert"))?;
    write_atomic(&cfg.out_dir.join("pseudo_costs.csv"), &buf)?;
    Ok(rows)
}

/// Run the collusion screens and write `screens.json`.
pub fn stage_screen(cfg: &RunConfig) -> Result<ScreenReport, PipelineError> {
    let d = load_classified(cfg)?;
    let report = run_screens(&d, &cfg.screens).map_err(stage_err("screen"))?;
    write_json_artifact(
        &cfg.out_dir.join("screens.json"),
        "screen",
        &cfg.config_hash(),
        &report,
    )?;
    Ok(report)
}

fn read_pseudo_costs(path: &Path) -> Result<Vec<PseudoCost>, PipelineError> {
    if !path.exists() {
        return Err(PipelineError::MissingInput(path.to_path_buf()));
    }
    let mut rdr = csv::Reader::from_path(path)
        .map_err(|e| PipelineError::Stage { stage: "counterfactual", message: e.to_string() })?;
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(stage_err("counterfactual"))?;
        let flags_str = rec.get(5).unwrap_or("");
        let flags = PseudoCostFlags {
            negative_cost: flags_str.contains("negative_cost"),
            extrapolated: flags_str.contains("extrapolated"),
            clamped_hazard: flags_str.contains("clamped_hazard"),
            non_monotone: flags_str.contains("non_monotone"),
            inversion_error: flags_str.contains("inversion_error"),
        };
        out.push(PseudoCost {
            auction_id: rec.get(0).unwrap_or_default().to_string(),
            bidder_id: rec.get(1).unwrap_or_default().to_string(),
            bid: rec.get(2).unwrap_or_default().parse().unwrap_or(f64::NAN),
            type_k: 0,
            c_hat: rec.get(3).unwrap_or_default().parse().unwrap_or(f64::NAN),
            markup: rec.get(4).unwrap_or_default().parse().unwrap_or(f64::NAN),
            flags,
        });
    }
    Ok(out)
}

fn read_screens(path: &Path) -> Result<ScreenReport, PipelineError> {
    if !path.exists() {
        return Err(PipelineError::MissingInput(path.to_path_buf()));
    }
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(stage_err("counterfactual"))
}

/// Compute rent reports for the configured ring hypotheses.
pub fn stage_counterfactual(cfg: &RunConfig) -> Result<RentReport, PipelineError> {
    let d = load_classified(cfg)?;
    let pseudo = read_pseudo_costs(&cfg.out_dir.join("pseudo_costs.csv"))?;
    let screens = read_screens(&cfg.out_dir.join("screens.json"))?;
    let mut rings = Vec::new();
    for label in &cfg.counterfactual.rings {
        let members = match label.as_str() {
            "broad" => screens.broad_ring.clone(),
            "tight" => screens.tight_ring.clone(),
            "custom" => cfg.counterfactual.custom_ring.iter().cloned().collect(),
            other => {
                return Err(PipelineError::Config(format!(
                    "unknown ring label `{other}` (expected broad, tight or custom)"
                )))
            }
        };
        rings.push(RingHypothesis { label: label.clone(), members });
    }
    let report = rent_report(
        &d,
        &pseudo,
        &rings,
        cfg.counterfactual.meb,
        cfg.counterfactual.pricing_mode,
    )
    .map_err(stage_err("counterfactual"))?;
    write_json_artifact(
        &cfg.out_dir.join("rent_report.json"),
        "counterfactual",
        &cfg.config_hash(),
        &report,
    )?;
    Ok(report)
}

/// Run the mechanism verifier and write `cm_verification.json`.
pub fn stage_verify_cm(cfg: &RunConfig) -> Result<TheoremReport, PipelineError> {
    let report = verify_theorem_with_rule(
        &cfg.verify_cm.grid,
        cfg.verify_cm.n,
        cfg.verify_cm.t,
        PriceRule::LowestOutside,
    )
    .map_err(stage_err("verify-cm"))?;
    write_json_artifact(
        &cfg.out_dir.join("cm_verification.json"),
        "verify-cm",
        &cfg.config_hash(),
        &report,
    )?;
    Ok(report)
}

/// Counters recorded in the manifest.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub config_hash: String,
    pub crate_version: String,
    pub seed: u64,
    pub counts: BTreeMap<String, u64>,
    pub artifacts: Vec<String>,
}

/// Collate the manifest from whatever artifacts exist.
pub fn stage_report(cfg: &RunConfig) -> Result<Manifest, PipelineError> {
    let out = cfg.out_dir.as_path();
    let mut counts = BTreeMap::new();
    let mut artifacts = Vec::new();
    for name in ARTIFACTS {
        let path = out.join(name);
        if !path.exists() {
            continue;
        }
        artifacts.push(name.to_string());
        if name.ends_with(".csv") {
            let text = fs::read_to_string(&path).map_err(io_err(&path))?;
            let rows = text.lines().count().saturating_sub(1) as u64;
            counts.insert(format!("{name}:rows"), rows);
        }
    }
    if let Ok(screens) = read_screens(&out.join("screens.json")) {
        counts.insert("screens:pairs".to_string(), screens.pairs.len() as u64);
        counts.insert("screens:broad_ring".to_string(), screens.broad_ring.len() as u64);
        counts.insert("screens:tight_ring".to_string(), screens.tight_ring.len() as u64);
    }
    if let Ok(pseudo) = read_pseudo_costs(&out.join("pseudo_costs.csv")) {
        counts.insert(
            "pseudo_costs:flagged".to_string(),
            pseudo.iter().filter(|p| p.flags.any()).count() as u64,
        );
    }
    let manifest = Manifest {
        config_hash: cfg.config_hash(),
        crate_version: env!("CARGO_PKG_VERSION").to_string(),
        seed: cfg.seed,
        counts,
        artifacts,
    };
    let json = serde_json::to_vec_pretty(&manifest).map_err(stage_err("report"))?;
    write_atomic(&out.join("manifest.json"), &json)?;
    Ok(manifest)
}

/// Run every stage in order inside a thread pool of `cfg.workers` threads.
///
/// The artifact directory afterward contains every stage output plus the
/// manifest; bytes are identical for identical config and seed regardless
/// of the worker count.
pub fn run_pipeline(cfg: &RunConfig) -> Result<Manifest, PipelineError> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if cfg.workers > 0 {
        builder = builder.num_threads(cfg.workers);
    }
    let pool = builder.build().map_err(|e| PipelineError::Config(e.to_string()))?;
    pool.install(|| {
        stage_simulate(cfg)?;
        stage_classify(cfg)?;
        stage_estimate(cfg)?;
        stage_invert(cfg)?;
        stage_screen(cfg)?;
        stage_counterfactual(cfg)?;
        stage_verify_cm(cfg)?;
        stage_report(cfg)
    })
}
