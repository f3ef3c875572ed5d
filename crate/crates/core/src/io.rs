//! File formats: JSON-lines trial logs and reports, summary CSV, and
//! p-value histogram JSON. Every file carries `format_version` together
//! with the seed and config hash of the run that produced it.

use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::hypothesis::HypothesisId;
use crate::pbr::PbrReport;
use crate::scenario::{Dims, Scenario, TrialLog, TrialRecord};

pub const FORMAT_VERSION: u32 = 1;
pub const DEFAULT_BIN_WIDTH: f64 = 0.025;

/// Where an output came from.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub seed: u64,
    pub config_hash: String,
}

/// Hex SHA-256 of a value's JSON encoding.
///
/// Struct fields serialize in declaration order and maps are ordered, so the
/// encoding and therefore the hash are stable.
pub fn config_hash<T: Serialize>(config: &T) -> Result<String> {
    let bytes = serde_json::to_vec(config)?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// First line of a trial log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogHeader {
    pub format_version: u32,
    pub scenario: Scenario,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<Provenance>,
    /// Effective configuration of the producing run.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<serde_json::Value>,
}

impl LogHeader {
    pub fn new(scenario: Scenario, provenance: Option<Provenance>) -> Self {
        LogHeader { format_version: FORMAT_VERSION, scenario, provenance, config: None }
    }
}

pub fn write_trial_log<W: Write>(out: W, log: &TrialLog, header: &LogHeader) -> Result<()> {
    let mut out = BufWriter::new(out);
    serde_json::to_writer(&mut out, header)?;
    out.write_all(b"\n")?;
    for r in &log.records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRecord {
    test_id: u64,
    trial_index: u64,
    x: u64,
    y: u64,
    a: u64,
    b: u64,
}

/// Parses and validates a trial log. Line numbers in errors are 1-based.
///
/// Without a header the CHSH scenario with uniform inputs is assumed.
/// Record order is preserved.
pub fn read_trial_log<R: BufRead>(input: R) -> Result<(Option<LogHeader>, TrialLog)> {
    let mut header: Option<LogHeader> = None;
    let mut dims = Dims::CHSH;
    let mut records = Vec::new();
    let mut seen = HashSet::new();
    for (i, line) in input.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        let text = line.trim();
        if text.is_empty() {
            continue;
        }
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| Error::Parse { line: line_no, message: e.to_string() })?;
        if value.get("format_version").is_some() {
            if !records.is_empty() || header.is_some() {
                return Err(Error::Parse { line: line_no, message: "header must be the first line".into() });
            }
            let h = parse_header(value, line_no)?;
            dims = h.scenario.dims();
            header = Some(h);
            continue;
        }
        let raw: RawRecord =
            serde_json::from_value(value).map_err(|e| Error::Parse { line: line_no, message: e.to_string() })?;
        let in_range = raw.x < dims.n_x as u64 && raw.y < dims.n_y as u64 && raw.a < dims.n_a as u64 && raw.b < dims.n_b as u64;
        if !in_range {
            return Err(Error::Range {
                line: line_no,
                message: format!(
                    "labels (a={}, b={}, x={}, y={}) outside a {}x{} inputs / {}x{} outputs scenario",
                    raw.a, raw.b, raw.x, raw.y, dims.n_x, dims.n_y, dims.n_a, dims.n_b
                ),
            });
        }
        if !seen.insert((raw.test_id, raw.trial_index)) {
            return Err(Error::DuplicateTrial { test_id: raw.test_id, trial_index: raw.trial_index });
        }
        records.push(TrialRecord {
            test_id: raw.test_id,
            trial_index: raw.trial_index,
            x: raw.x as usize,
            y: raw.y as usize,
            a: raw.a as usize,
            b: raw.b as usize,
        });
    }
    Ok((header, TrialLog::new(records)))
}

fn parse_header(value: serde_json::Value, line: usize) -> Result<LogHeader> {
    let h: LogHeader = serde_json::from_value(value).map_err(|e| Error::Parse { line, message: e.to_string() })?;
    if h.format_version != FORMAT_VERSION {
        return Err(Error::Parse { line, message: format!("unsupported format_version {}", h.format_version) });
    }
    // Re-run the constructors' checks, which deserialization bypasses.
    let d = h.scenario.dims();
    let dims = Dims::new(d.n_x, d.n_y, d.n_a, d.n_b).map_err(|e| Error::Parse { line, message: e.to_string() })?;
    Scenario::new(dims, h.scenario.input_dist().to_vec()).map_err(|e| Error::Parse { line, message: e.to_string() })?;
    Ok(h)
}

pub fn ingest_trial_log(path: &Path) -> Result<(Option<LogHeader>, TrialLog)> {
    read_trial_log(BufReader::new(File::open(path)?))
}

pub fn save_trial_log(path: &Path, log: &TrialLog, header: &LogHeader) -> Result<()> {
    write_atomic(path, |w| write_trial_log(w, log, header))
}

/// Writes through a sibling temporary file and renames it into place.
pub fn write_atomic(path: &Path, body: impl FnOnce(&mut File) -> Result<()>) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = std::path::PathBuf::from(tmp);
    {
        let mut f = File::create(&tmp)?;
        body(&mut f)?;
        f.sync_all()?;
    }
    std::fs::rename(&tmp, path)?;
    Ok(())
}

/// First line of a report file; `config` is the effective run configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportHeader {
    pub format_version: u32,
    pub provenance: Provenance,
    pub config: serde_json::Value,
}

pub fn write_reports<W: Write>(out: W, header: &ReportHeader, reports: &[PbrReport]) -> Result<()> {
    let mut out = BufWriter::new(out);
    serde_json::to_writer(&mut out, header)?;
    out.write_all(b"\n")?;
    for r in reports {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_reports<R: BufRead>(input: R) -> Result<(ReportHeader, Vec<PbrReport>)> {
    let mut header = None;
    let mut reports = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let parse_err = |e: serde_json::Error| Error::Parse { line: line_no, message: e.to_string() };
        if header.is_none() {
            let h: ReportHeader = serde_json::from_str(&line).map_err(parse_err)?;
            if h.format_version != FORMAT_VERSION {
                return Err(Error::Parse { line: line_no, message: format!("unsupported format_version {}", h.format_version) });
            }
            header = Some(h);
        } else {
            reports.push(serde_json::from_str(&line).map_err(parse_err)?);
        }
    }
    let header = header.ok_or(Error::Parse { line: 1, message: "empty report file".into() })?;
    Ok((header, reports))
}

/// Labels identifying a campaign in summary tables.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CampaignLabels {
    pub device: String,
    pub qubit_pair: String,
    pub circuit: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub hypothesis: HypothesisId,
    pub tests: usize,
    /// Direct rejections, one count per alpha.
    pub rejected: Vec<usize>,
    /// Rejections of this hypothesis or of any tested superset, per alpha.
    pub indirect: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub format_version: u32,
    pub provenance: Provenance,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<serde_json::Value>,
    pub labels: CampaignLabels,
    pub bin_width: f64,
    /// Left edges are `k * bin_width`; `p = 1` falls in the last bin.
    pub bins: BTreeMap<HypothesisId, Vec<usize>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CampaignSummary {
    pub labels: CampaignLabels,
    pub provenance: Provenance,
    pub alphas: Vec<f64>,
    pub rows: Vec<SummaryRow>,
    pub histogram: Histogram,
}

fn bin_count(bin_width: f64) -> usize {
    (1.0 / bin_width - 1e-9).ceil() as usize
}

fn bin_of(p: f64, n_bins: usize, bin_width: f64) -> usize {
    ((p / bin_width).floor().max(0.0) as usize).min(n_bins - 1)
}

/// Tallies rejections at each alpha and bins the p-value bounds.
///
/// Verdicts are recomputed from `p_upper < alpha`, so the alphas need not
/// match the one used during analysis. Rows follow the order in which
/// hypotheses first appear. The result does not depend on report order.
pub fn summarize(
    reports: &[PbrReport],
    alphas: &[f64],
    bin_width: f64,
    labels: CampaignLabels,
    provenance: Provenance,
) -> Result<CampaignSummary> {
    if alphas.iter().any(|a| !(*a > 0.0 && *a < 1.0)) {
        return Err(Error::InvalidConfig("every alpha must lie in (0, 1)".into()));
    }
    if !(bin_width > 0.0 && bin_width <= 1.0) {
        return Err(Error::InvalidConfig(format!("bin width {bin_width} must lie in (0, 1]")));
    }
    let mut hypotheses: Vec<HypothesisId> = Vec::new();
    for r in reports {
        for o in &r.outcomes {
            if !hypotheses.contains(&o.hypothesis) {
                hypotheses.push(o.hypothesis);
            }
        }
    }
    let n_bins = bin_count(bin_width);
    let mut rows: Vec<SummaryRow> = hypotheses
        .iter()
        .map(|h| SummaryRow {
            hypothesis: *h,
            tests: 0,
            rejected: vec![0; alphas.len()],
            indirect: vec![0; alphas.len()],
        })
        .collect();
    let mut bins: BTreeMap<HypothesisId, Vec<usize>> = hypotheses.iter().map(|h| (*h, vec![0; n_bins])).collect();
    for r in reports {
        for (row, h) in rows.iter_mut().zip(&hypotheses) {
            let Some(o) = r.outcome(*h) else { continue };
            row.tests += 1;
            bins.get_mut(h).expect("initialized")[bin_of(o.p_upper, n_bins, bin_width)] += 1;
            for (k, alpha) in alphas.iter().enumerate() {
                if o.p_upper < *alpha {
                    row.rejected[k] += 1;
                }
                let via_superset = r.outcomes.iter().any(|g| g.p_upper < *alpha && h.is_subset_of(g.hypothesis));
                if via_superset {
                    row.indirect[k] += 1;
                }
            }
        }
    }
    let histogram = Histogram {
        format_version: FORMAT_VERSION,
        provenance: provenance.clone(),
        config: None,
        labels: labels.clone(),
        bin_width,
        bins,
    };
    Ok(CampaignSummary { labels, provenance, alphas: alphas.to_vec(), rows, histogram })
}

impl CampaignSummary {
    /// CSV with one row per hypothesis and a pair of count columns per alpha.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("format_version,device,qubit_pair,circuit,hypothesis,tests");
        for a in &self.alphas {
            write!(s, ",rejected@{a},indirect@{a}").unwrap();
        }
        s.push_str(",seed,config_hash\n");
        for row in &self.rows {
            write!(
                s,
                "{FORMAT_VERSION},{},{},{},{},{}",
                csv_field(&self.labels.device),
                csv_field(&self.labels.qubit_pair),
                csv_field(&self.labels.circuit),
                row.hypothesis,
                row.tests
            )
            .unwrap();
            for (r, i) in row.rejected.iter().zip(&row.indirect) {
                write!(s, ",{r},{i}").unwrap();
            }
            writeln!(s, ",{},{}", self.provenance.seed, self.provenance.config_hash).unwrap();
        }
        s
    }

    pub fn histogram_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(&self.histogram)?;
        s.push('\n');
        Ok(s)
    }

    /// Writes `summary.csv` and `histogram.json` into `dir`.
    pub fn write_files(&self, dir: &Path) -> Result<()> {
        let csv = self.to_csv();
        write_atomic(&dir.join("summary.csv"), |f| Ok(f.write_all(csv.as_bytes())?))?;
        let json = self.histogram_json()?;
        write_atomic(&dir.join("histogram.json"), |f| Ok(f.write_all(json.as_bytes())?))
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}
