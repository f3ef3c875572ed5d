use std::fs::File;
use std::io::BufReader;

use rayon::prelude::*;
use serde::Serialize;
use xtalk_core::io::{
    config_hash, ingest_trial_log, read_reports, save_trial_log, summarize, write_atomic, write_reports,
    CampaignLabels, LogHeader, Provenance, ReportHeader, DEFAULT_BIN_WIDTH, FORMAT_VERSION,
};
use xtalk_core::pbr::{PbrReport, Protocol, ProtocolConfig, Regularize};
use xtalk_core::sim::{sample_campaign, CampaignPlan, Circuit, NoiseModel, NoiseParams};
use xtalk_core::{Dims, Error, HypothesisId, Result, Scenario};

use crate::config::FileConfig;
use crate::{AnalyzeArgs, ReportArgs, SimulateArgs};

const DEFAULT_SEED: u64 = 0;

fn require_file(path: &std::path::Path, what: &str) -> Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(Error::InvalidConfig(format!("{what} '{}' does not exist", path.display())))
    }
}

/// Effective configuration of `simulate`, echoed into the log header.
#[derive(Serialize)]
struct SimulateConfig {
    seed: u64,
    circuit: Circuit,
    n_trials: u64,
    n_tests: u64,
    input_dist: Vec<f64>,
    independent_inputs: bool,
    noise: NoiseModel,
}

fn parse_floats(s: &str, what: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .map(|p| p.parse::<f64>().map_err(|_| Error::InvalidConfig(format!("{what}: '{p}' is not a number"))))
        .collect()
}

pub fn simulate(args: &SimulateArgs, file: &FileConfig, seed: Option<u64>) -> Result<()> {
    let sec = &file.simulate;
    let seed = seed.or(file.seed).unwrap_or(DEFAULT_SEED);
    let circuit: Circuit = args.circuit.as_deref().or(sec.circuit.as_deref()).unwrap_or("cnl").parse()?;
    let n_trials = args.n.or(sec.n).unwrap_or(1800);
    let n_tests = args.m.or(sec.m).unwrap_or(100);
    let input_dist = match &args.input_dist {
        Some(s) => parse_floats(s, "--input-dist")?,
        None => sec.input_dist.clone().unwrap_or_else(|| vec![0.25; 4]),
    };
    let scenario = Scenario::new(Dims::CHSH, input_dist.clone())?;
    let base = NoiseParams {
        crosstalk_b_to_a: args.crosstalk_ba.or(sec.crosstalk_ba).unwrap_or(0.0),
        crosstalk_a_to_b: args.crosstalk_ab.or(sec.crosstalk_ab).unwrap_or(0.0),
        depolarizing: args.depolarizing.or(sec.depolarizing).unwrap_or(0.0),
    };
    let noise = match args.drift_at {
        Some(at) => {
            let after = NoiseParams {
                crosstalk_b_to_a: args.drift_crosstalk_ba.unwrap_or(base.crosstalk_b_to_a),
                crosstalk_a_to_b: args.drift_crosstalk_ab.unwrap_or(base.crosstalk_a_to_b),
                depolarizing: args.drift_depolarizing.unwrap_or(base.depolarizing),
            };
            NoiseModel::switching(base, after, at, n_trials)
        }
        None => NoiseModel { base, drift: sec.drift.clone().unwrap_or_default() },
    };
    let independent_inputs = args.independent_inputs || sec.independent_inputs.unwrap_or(false);
    let plan = if independent_inputs {
        CampaignPlan::with_independent_inputs(n_trials, n_tests, seed, scenario.clone())
    } else {
        CampaignPlan::new(n_trials, n_tests, seed, scenario.clone())
    };
    let log = sample_campaign(circuit, &noise, &plan)?;
    let effective = SimulateConfig { seed, circuit, n_trials, n_tests, input_dist, independent_inputs, noise };
    let provenance = Provenance { seed, config_hash: config_hash(&effective)? };
    let mut header = LogHeader::new(scenario, Some(provenance));
    header.config = Some(serde_json::to_value(&effective)?);
    save_trial_log(&args.out, &log, &header)
}

/// Effective configuration of `analyze`, echoed into the report header.
#[derive(Serialize)]
struct AnalyzeConfig {
    seed: u64,
    protocol: ProtocolConfig,
    sort_trials: bool,
    scenario: Scenario,
    /// Configuration recorded in the trial log, if any.
    source: Option<serde_json::Value>,
}

pub fn analyze(args: &AnalyzeArgs, file: &FileConfig, seed: Option<u64>) -> Result<()> {
    let sec = &file.analyze;
    require_file(&args.log, "trial log")?;
    let (header, log) = ingest_trial_log(&args.log)?;
    let defaults = ProtocolConfig::default();
    let hypotheses = match (&args.hypotheses, &sec.hypotheses) {
        (Some(s), _) => HypothesisId::parse_list(s)?,
        (None, Some(list)) => HypothesisId::parse_list(&list.join(","))?,
        (None, None) => defaults.hypotheses.clone(),
    };
    let regularize: Regularize = match args.regularize.as_deref().or(sec.regularize.as_deref()) {
        Some(s) => s.parse()?,
        None => defaults.regularize,
    };
    let protocol = ProtocolConfig {
        n_est: args.n_est.or(sec.n_est).unwrap_or(defaults.n_est),
        alpha: args.alpha.or(sec.alpha).unwrap_or(defaults.alpha),
        regularize,
        hypotheses,
        tol: args.tol.or(sec.tol),
        max_iterations: args.max_iterations.or(sec.max_iterations).unwrap_or(defaults.max_iterations),
    };
    let sort_trials = args.sort_trials || sec.sort_trials.unwrap_or(false);
    let upstream_seed = header.as_ref().and_then(|h| h.provenance.as_ref()).map(|p| p.seed);
    let seed = seed.or(file.seed).or(upstream_seed).unwrap_or(DEFAULT_SEED);
    let scenario = header.as_ref().map(|h| h.scenario.clone()).unwrap_or_else(Scenario::chsh);
    let engine = Protocol::new(scenario.clone(), protocol.clone())?;

    let mut tests = log.tests();
    if sort_trials {
        tests.iter_mut().for_each(|t| t.trials.sort_by_key(|r| r.trial_index));
    }
    let run = || -> Vec<Result<PbrReport>> { tests.par_iter().map(|t| engine.run(t)).collect() };
    let results = match args.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::InvalidConfig(format!("--threads: {e}")))?
            .install(run),
        None => run(),
    };
    // Tests come out in test-id order; the first failure in that order wins.
    let reports: Vec<PbrReport> = results.into_iter().collect::<Result<_>>()?;

    let effective = AnalyzeConfig {
        seed,
        protocol,
        sort_trials,
        scenario,
        source: header.and_then(|h| h.config),
    };
    let report_header = ReportHeader {
        format_version: FORMAT_VERSION,
        provenance: Provenance { seed, config_hash: config_hash(&effective)? },
        config: serde_json::to_value(&effective)?,
    };
    write_atomic(&args.out, |f| write_reports(f, &report_header, &reports))
}

#[derive(Serialize)]
struct ReportConfig {
    seed: u64,
    alphas: Vec<f64>,
    bin_width: f64,
    labels: CampaignLabels,
    analysis_hash: String,
}

pub fn report(args: &ReportArgs, file: &FileConfig, seed: Option<u64>) -> Result<()> {
    let sec = &file.report;
    require_file(&args.reports, "report file")?;
    let (header, reports) = read_reports(BufReader::new(File::open(&args.reports)?))?;
    let alphas = match &args.alphas {
        Some(s) => parse_floats(s, "--alphas")?,
        None => sec.alphas.clone().unwrap_or_else(|| vec![0.05, 0.01]),
    };
    if alphas.is_empty() {
        return Err(Error::InvalidConfig("at least one alpha is required".into()));
    }
    let bin_width = args.bin_width.or(sec.bin_width).unwrap_or(DEFAULT_BIN_WIDTH);
    let upstream_circuit = header
        .config
        .pointer("/source/circuit")
        .and_then(|v| v.as_str())
        .map(str::to_string);
    let labels = CampaignLabels {
        device: args.device.clone().or_else(|| sec.device.clone()).unwrap_or_else(|| "simulator".into()),
        qubit_pair: args.qubit_pair.clone().or_else(|| sec.qubit_pair.clone()).unwrap_or_else(|| "0-1".into()),
        circuit: args
            .circuit
            .clone()
            .or_else(|| sec.circuit.clone())
            .or(upstream_circuit)
            .unwrap_or_else(|| "unknown".into()),
    };
    let seed = seed.or(file.seed).unwrap_or(header.provenance.seed);
    let effective = ReportConfig {
        seed,
        alphas: alphas.clone(),
        bin_width,
        labels: labels.clone(),
        analysis_hash: header.provenance.config_hash.clone(),
    };
    let provenance = Provenance { seed, config_hash: config_hash(&effective)? };
    let mut summary = summarize(&reports, &alphas, bin_width, labels, provenance)?;
    summary.histogram.config = Some(serde_json::to_value(&effective)?);
    std::fs::create_dir_all(&args.out_dir)?;
    summary.write_files(&args.out_dir)
}
