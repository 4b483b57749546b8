//! Stream runners behind `kzstream run`.

use std::fs;
use std::path::{Path, PathBuf};

use kzstream_core::dynamic::{DynamicConfig, DynamicMode, PassOne, PassTwo};
use kzstream_core::insert::{cost_only_pipeline, CostOnlyConfig, InsertConfig, InsertPipeline};
use kzstream_core::merge_reduce::DEFAULT_REDUCE_CONSTANT;
use kzstream_core::solve::solve_approx;
use kzstream_core::{prf, ClusterParams, Coreset, Error as CoreError, WeightedPoint};
use num_rational::Ratio;
use serde::Serialize;
use serde_json::json;

use crate::coreset_file::write_coreset;
use crate::error::{CliError, CliResult};
use crate::manifest::{content_hash, PhaseRecord, RunManifest};
use crate::sketch_file::{decode_summary, encode_summary};
use crate::stream::StreamFile;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunMode {
    InsertOnly,
    Dynamic2Pass,
    CostOnly,
}

impl RunMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            RunMode::InsertOnly => "insert-only",
            RunMode::Dynamic2Pass => "dynamic-2pass",
            RunMode::CostOnly => "cost-only",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "insert-only" => Some(RunMode::InsertOnly),
            "dynamic-2pass" => Some(RunMode::Dynamic2Pass),
            "cost-only" => Some(RunMode::CostOnly),
            _ => None,
        }
    }
}

/// Command-line overrides; unset values come from the stream header.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub mode: RunMode,
    pub k: Option<usize>,
    pub z: Option<u32>,
    pub eps: Option<f64>,
    pub delta: Option<u64>,
    pub seed: u64,
    pub gamma_constant: f64,
    pub reduce_constant: f64,
    pub dynamic: DynamicConfig,
}

impl RunConfig {
    pub fn new(mode: RunMode, seed: u64) -> Self {
        RunConfig {
            mode,
            k: None,
            z: None,
            eps: None,
            delta: None,
            seed,
            gamma_constant: 1.0,
            reduce_constant: DEFAULT_REDUCE_CONSTANT,
            dynamic: DynamicConfig::default(),
        }
    }

    fn params(&self, f: &StreamFile) -> CliResult<ClusterParams> {
        let h = &f.header;
        let delta = self.delta.unwrap_or(h.delta);
        if delta < h.delta {
            return Err(CliError::Usage(format!("--delta {delta} is below the stream's delta {}", h.delta)));
        }
        Ok(ClusterParams::new(self.k.unwrap_or(h.k), self.z.unwrap_or(h.z), self.eps.unwrap_or(h.eps), h.d, delta, self.seed)?)
    }

    fn echo(&self, p: &ClusterParams) -> serde_json::Value {
        let dc = &self.dynamic;
        json!({
            "mode": self.mode.as_str(),
            "k": p.k, "z": p.z, "eps": p.eps, "d": p.d, "delta": p.delta,
            "gamma_constant": self.gamma_constant,
            "reduce_constant": self.reduce_constant,
            "dynamic": {
                "shifts": dc.shift_count(p),
                "cauchy_reps": dc.cauchy_reps,
                "coarse_capacity": dc.coarse_cap(p),
                "max_gamma": dc.max_gamma,
                "search_budget": dc.search_budget,
                "hash_independence": dc.hash_independence,
                "sample_constant": dc.sample_constant,
                "recovery_cap": dc.recovery_cap,
            }
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct RunReport {
    pub mode: String,
    pub records: usize,
    pub coreset_len: usize,
    pub total_weight: f64,
    pub final_cost: Option<f64>,
    pub centers: Vec<Vec<f64>>,
    pub peak_words: u64,
    pub word_bits: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sampled: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma_sum: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub overflow: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub z_tilde: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub expected_samples: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub code_bits: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub jl_dim: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub report: RunReport,
    pub manifest: RunManifest,
    pub coreset: Option<Coreset>,
    pub out_dir: PathBuf,
}

fn write(dir: &Path, name: &str, bytes: &[u8], m: &mut RunManifest) -> CliResult<()> {
    let path = dir.join(name);
    fs::write(&path, bytes).map_err(|e| CliError::io(&path, e))?;
    m.record_output(name, bytes);
    Ok(())
}

fn finish(dir: &Path, report: RunReport, mut manifest: RunManifest, coreset: Option<Coreset>) -> CliResult<RunOutcome> {
    if let Some(c) = &coreset {
        write(dir, "coreset.txt", write_coreset(c).as_bytes(), &mut manifest)?;
    }
    let rj = serde_json::to_string_pretty(&report).map_err(|e| CliError::Format(e.to_string()))? + "\n";
    write(dir, "report.json", rj.as_bytes(), &mut manifest)?;
    let path = dir.join("manifest.json");
    fs::write(&path, manifest.to_json()).map_err(|e| CliError::io(&path, e))?;
    Ok(RunOutcome { report, manifest, coreset, out_dir: dir.to_path_buf() })
}

fn final_solution(c: &Coreset, p: &ClusterParams) -> CliResult<(Option<f64>, Vec<Vec<f64>>)> {
    if c.items.is_empty() {
        return Ok((None, Vec::new()));
    }
    let sol = solve_approx(&c.items, p.k, p.z, p.eps, prf::derive(p.seed, 0x736f))?;
    Ok((Some(sol.cost), sol.centers.centers))
}

fn read_input(input: &Path) -> CliResult<(StreamFile, String)> {
    let bytes = fs::read(input).map_err(|e| CliError::io(input, e))?;
    let text = String::from_utf8(bytes).map_err(|_| CliError::parse(1, "input is not UTF-8"))?;
    let hash = content_hash(text.as_bytes());
    Ok((StreamFile::parse(&text)?, hash))
}

pub fn run(input: &Path, cfg: &RunConfig, out_dir: &Path) -> CliResult<RunOutcome> {
    fs::create_dir_all(out_dir).map_err(|e| CliError::io(out_dir, e))?;
    match cfg.mode {
        RunMode::InsertOnly => run_insert_only(input, cfg, out_dir),
        RunMode::Dynamic2Pass => run_dynamic_two_pass(input, cfg, out_dir),
        RunMode::CostOnly => run_cost_only(input, cfg, out_dir),
    }
}

fn insertion_points(f: &StreamFile) -> CliResult<Vec<WeightedPoint>> {
    f.records
        .iter()
        .enumerate()
        .map(|(i, r)| {
            if !r.insert {
                return Err(CliError::Usage(format!("record {} is a deletion; insertion-only modes reject `-`", i + 1)));
            }
            Ok(WeightedPoint::new(r.point.to_f64(), Ratio::from_integer(r.weight as u128)))
        })
        .collect()
}

pub fn run_insert_only(input: &Path, cfg: &RunConfig, out_dir: &Path) -> CliResult<RunOutcome> {
    let (file, hash) = read_input(input)?;
    let params = cfg.params(&file)?;
    let points = insertion_points(&file)?;
    let n = points.len() as u64;
    let icfg = InsertConfig::tuned(&params, n.max(1), cfg.gamma_constant, cfg.reduce_constant, None);
    let mut pipe = InsertPipeline::new(&params, n.max(1), icfg);
    for p in &points {
        pipe.insert(p)?;
    }
    let coreset = pipe.query();
    let (final_cost, centers) = final_solution(&coreset, &params)?;
    let mut manifest = RunManifest::new("run", cfg.echo(&params));
    manifest.seeds.insert("master".into(), params.seed);
    manifest.input_hash = Some(hash);
    manifest.word_bits = pipe.meter.word_bits();
    manifest.phases.push(PhaseRecord { name: "insert".into(), peak_words: pipe.meter.peak() });
    let report = RunReport {
        mode: cfg.mode.as_str().into(),
        records: file.records.len(),
        coreset_len: coreset.len(),
        total_weight: coreset.total_weight(),
        final_cost,
        centers,
        peak_words: pipe.meter.peak(),
        word_bits: pipe.meter.word_bits(),
        sampled: Some(pipe.tree.inserted),
        sigma_sum: Some(pipe.sigma_sum),
        ..RunReport::default()
    };
    finish(out_dir, report, manifest, Some(coreset))
}

pub fn run_dynamic_two_pass(input: &Path, cfg: &RunConfig, out_dir: &Path) -> CliResult<RunOutcome> {
    let (first, hash) = read_input(input)?;
    let params = cfg.params(&first)?;
    let mode = if params.z == 1 { DynamicMode::KMedian } else { DynamicMode::Kz };
    let n = first.records.len() as u64;
    let mut p1 = PassOne::new(params, mode, cfg.dynamic.clone(), n.max(1))?;
    for r in &first.records {
        p1.update(&r.update())?;
    }
    drop(first);
    let summary = p1.finish()?;
    let mut manifest = RunManifest::new("run", cfg.echo(&params));
    manifest.seeds.insert("master".into(), params.seed);
    manifest.input_hash = Some(hash.clone());
    manifest.word_bits = summary.word_bits;
    manifest.phases.push(PhaseRecord { name: "pass-one".into(), peak_words: summary.peak_words });
    let sketch_bytes = encode_summary(&summary);
    write(out_dir, "summary.kzsketch", &sketch_bytes, &mut manifest)?;
    // the second pass works from the persisted summary and a fresh read
    let summary = decode_summary(&fs::read(out_dir.join("summary.kzsketch")).map_err(|e| CliError::io(out_dir, e))?)?;
    let (second, hash2) = read_input(input)?;
    if hash2 != hash {
        return Err(CliError::Usage("input changed between passes".into()));
    }
    let mut p2 = PassTwo::new(&summary, cfg.dynamic.clone(), n.max(1))?;
    for r in &second.records {
        p2.update(&r.update())?;
    }
    let p2_peak = p2.meter().peak();
    let mut report = RunReport {
        mode: cfg.mode.as_str().into(),
        records: second.records.len(),
        peak_words: summary.peak_words.max(p2_peak),
        word_bits: summary.word_bits,
        z_tilde: Some(summary.z_tilde),
        gamma: Some(summary.gamma),
        ..RunReport::default()
    };
    manifest.phases.push(PhaseRecord { name: "pass-two".into(), peak_words: p2_peak });
    match p2.finish() {
        Ok((coreset, rep)) => {
            let (final_cost, centers) = final_solution(&coreset, &params)?;
            report.coreset_len = coreset.len();
            report.total_weight = coreset.total_weight();
            report.final_cost = final_cost;
            report.centers = centers;
            report.sampled = Some(rep.sampled_updates);
            report.expected_samples = Some(rep.expected_samples);
            report.code_bits = Some(rep.code_bits);
            report.overflow = Some(false);
            finish(out_dir, report, manifest, Some(coreset))
        }
        Err(e @ CoreError::RecoveryOverflow { .. }) => {
            report.overflow = Some(true);
            finish(out_dir, report, manifest, None)?;
            Err(e.into())
        }
        Err(e) => Err(e.into()),
    }
}

pub fn run_cost_only(input: &Path, cfg: &RunConfig, out_dir: &Path) -> CliResult<RunOutcome> {
    let (file, hash) = read_input(input)?;
    let params = cfg.params(&file)?;
    let points = insertion_points(&file)?;
    let cc = CostOnlyConfig { gamma_constant: cfg.gamma_constant, reduce_constant: cfg.reduce_constant, ..CostOnlyConfig::default() };
    let mut manifest = RunManifest::new("run", cfg.echo(&params));
    manifest.seeds.insert("master".into(), params.seed);
    manifest.input_hash = Some(hash);
    let mut report = RunReport { mode: cfg.mode.as_str().into(), records: file.records.len(), ..RunReport::default() };
    if !points.is_empty() {
        let r = cost_only_pipeline(&points, &params, &cc)?;
        report.final_cost = Some(r.estimate);
        report.coreset_len = r.coreset_len;
        report.peak_words = r.peak_words;
        report.jl_dim = Some(r.m);
        manifest.phases.push(PhaseRecord { name: "cost-only".into(), peak_words: r.peak_words });
    }
    finish(out_dir, report, manifest, None)
}
