//! Experiment drivers behind `kzstream experiment`.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use kzstream_core::grid::{adjacent_pair_distortion, EmbeddingMode, MassVector, ShiftedGridEmbedding};
use kzstream_core::insert::{total_sensitivity_bound, InsertConfig, InsertPipeline, PlainMergeReduce};
use kzstream_core::merge_reduce::MergeReduceConfig;
use kzstream_core::meter::words_per_point;
use kzstream_core::sensitivity::{online_sample, SensitivityMode};
use kzstream_core::transport::emd_exact;
use kzstream_core::{prf, ClusterParams, Result as CoreResult, WeightedPoint};
use rayon::prelude::*;

use crate::error::{CliError, CliResult};

pub const EXPERIMENTS: [&str; 4] = ["fig1-space", "appendixA-distortion", "emd-distortion", "sens-sum"];

/// Point i of a k-cluster stream: cluster centers and offsets come from the
/// seeded PRF, so any prefix can be regenerated without storing it.
pub fn cluster_point(i: u64, k: usize, d: usize, delta: u64, seed: u64) -> WeightedPoint {
    let cluster = prf::hash2(seed ^ 0x636c, i) % k as u64;
    let spread = (delta / 32).max(1);
    let coords = (0..d as u64)
        .map(|a| {
            let c = 1 + prf::hash3(seed ^ 0x6365, cluster, a) % delta;
            let off = prf::hash3(seed ^ 0x6f66, i, a) % (2 * spread + 1);
            (c + off).saturating_sub(spread).clamp(1, delta) as f64
        })
        .collect();
    WeightedPoint::unit(coords)
}

pub fn cluster_stream(n: u64, k: usize, d: usize, delta: u64, seed: u64) -> impl Iterator<Item = WeightedPoint> {
    (0..n).map(move |i| cluster_point(i, k, d, delta, seed))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Fig1Config {
    pub ns: Vec<u64>,
    pub params: ClusterParams,
    pub gamma_constant: f64,
    pub hybrid_reduce_constant: f64,
    pub hybrid_block: Option<usize>,
    pub plain_reduce_constant: f64,
    pub plain_block: Option<usize>,
    /// Independent streams per n; peaks are averaged.
    pub trials: u64,
}

impl Default for Fig1Config {
    fn default() -> Self {
        Fig1Config {
            ns: vec![1_000, 10_000, 100_000, 1_000_000],
            params: ClusterParams::new(2, 1, 0.5, 2, 1024, 1).expect("valid"),
            gamma_constant: 0.01,
            hybrid_reduce_constant: 0.01,
            hybrid_block: Some(16),
            plain_reduce_constant: 0.01,
            plain_block: Some(16),
            trials: 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Fig1Row {
    pub n: u64,
    pub pipeline: &'static str,
    pub peak_words: f64,
    pub tree_inputs: f64,
    pub raw_words: u64,
}

pub fn fig1_space(cfg: &Fig1Config) -> CoreResult<Vec<Fig1Row>> {
    let p = cfg.params;
    let jobs: Vec<(u64, u64)> = cfg.ns.iter().flat_map(|&n| (0..cfg.trials).map(move |t| (n, t))).collect();
    let runs: Vec<CoreResult<(u64, [u64; 4])>> = jobs
        .par_iter()
        .map(|&(n, t)| {
            let p = p.with_seed(prf::derive(p.seed, t));
            let icfg = InsertConfig::tuned(&p, n, cfg.gamma_constant, cfg.hybrid_reduce_constant, cfg.hybrid_block);
            let mut hybrid = InsertPipeline::new(&p, n, icfg);
            let tree = MergeReduceConfig::with_constant(&p, n, cfg.plain_reduce_constant, cfg.plain_block);
            let mut plain = PlainMergeReduce::new(&p, n, tree);
            for x in cluster_stream(n, p.k, p.d, p.delta, p.seed) {
                hybrid.insert(&x)?;
                plain.insert(&x)?;
            }
            Ok((n, [hybrid.meter.peak(), hybrid.tree.inserted, plain.meter.peak(), plain.tree.inserted]))
        })
        .collect();
    let mut sums: BTreeMap<u64, [f64; 4]> = BTreeMap::new();
    for r in runs {
        let (n, v) = r?;
        let e = sums.entry(n).or_insert([0.0; 4]);
        for i in 0..4 {
            e[i] += v[i] as f64 / cfg.trials as f64;
        }
    }
    let mut out = Vec::new();
    for &n in &cfg.ns {
        let v = sums[&n];
        let raw = n * words_per_point(p.d);
        out.push(Fig1Row { n, pipeline: "hybrid", peak_words: v[0], tree_inputs: v[1], raw_words: raw });
        out.push(Fig1Row { n, pipeline: "plain", peak_words: v[2], tree_inputs: v[3], raw_words: raw });
    }
    Ok(out)
}

/// Least squares y = c0 + c1 x; returns (c0, c1, residual sum of squares).
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let c1 = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let c0 = my - c1 * mx;
    let rss = x.iter().zip(y).map(|(a, b)| (b - c0 - c1 * a).powi(2)).sum();
    (c0, c1, rss)
}

fn aic(n: usize, rss: f64, params: usize) -> f64 {
    let n = n as f64;
    n * (rss.max(1e-300) / n).ln() + 2.0 * params as f64
}

#[derive(Debug, Clone, PartialEq)]
pub struct GrowthFit {
    pub a: f64,
    pub aic_loglog: f64,
    pub aic_log: f64,
}

/// Fit y = c0 + c1 (ln ln n)^a over a in (0, 3] against y = c0 + c1 ln n.
pub fn growth_fit(ns: &[u64], y: &[f64]) -> GrowthFit {
    let ln: Vec<f64> = ns.iter().map(|&n| (n as f64).ln()).collect();
    let lnln: Vec<f64> = ln.iter().map(|v| v.ln()).collect();
    let mut best = (f64::INFINITY, 0.0);
    for step in 1..=300 {
        let a = step as f64 / 100.0;
        let x: Vec<f64> = lnln.iter().map(|v| v.powf(a)).collect();
        let (_, _, rss) = linear_fit(&x, y);
        if rss < best.0 {
            best = (rss, a);
        }
    }
    let (_, _, rss_log) = linear_fit(&ln, y);
    GrowthFit { a: best.1, aic_loglog: aic(ns.len(), best.0, 3), aic_log: aic(ns.len(), rss_log, 2) }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DistortionRow {
    pub n: usize,
    pub mean_distortion: f64,
}

pub fn appendix_a(ns: &[usize], delta: u64, trials: usize, seed: u64) -> CoreResult<Vec<DistortionRow>> {
    ns.par_iter()
        .map(|&n| Ok(DistortionRow { n, mean_distortion: adjacent_pair_distortion(n, delta, trials, prf::derive(seed, n as u64))? }))
        .collect()
}

/// Slope of ln(distortion) against ln(n).
pub fn loglog_slope(rows: &[DistortionRow]) -> f64 {
    let x: Vec<f64> = rows.iter().map(|r| (r.n as f64).ln()).collect();
    let y: Vec<f64> = rows.iter().map(|r| r.mean_distortion.ln()).collect();
    linear_fit(&x, &y).1
}

/// A k-sparse measure and a measure on `m` points drawn around its support.
pub fn sparse_instance(k: usize, m: usize, d: usize, delta: u64, seed: u64) -> (MassVector, MassVector) {
    let h = |a: u64, b: u64| prf::hash3(seed, a, b);
    let centers: Vec<Vec<f64>> = (0..k as u64).map(|j| (0..d as u64).map(|a| (1 + h(j, a) % delta) as f64).collect()).collect();
    let spread = (delta / 16).max(1);
    let pts: Vec<Vec<f64>> = (0..m as u64)
        .map(|i| {
            let c = &centers[(h(1000 + i, 99) % k as u64) as usize];
            (0..d as u64)
                .map(|a| {
                    let off = (h(2000 + i, a) % (2 * spread + 1)) as f64 - spread as f64;
                    (c[a as usize] + off).clamp(1.0, delta as f64)
                })
                .collect()
        })
        .collect();
    (MassVector::uniform(&centers), MassVector::uniform(&pts))
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmdRow {
    pub trial: usize,
    pub k: usize,
    pub d: usize,
    pub delta: u64,
    pub emd: f64,
    pub q95_ratio: f64,
    pub bound: f64,
    pub contraction_violations: usize,
}

pub fn emd_distortion(trials: usize, shifts: usize, seed: u64) -> CoreResult<Vec<EmdRow>> {
    (0..trials)
        .into_par_iter()
        .map(|t| {
            let ts = prf::derive(seed, t as u64);
            let k = [1usize, 2, 4][t % 3];
            let d = 1 + t % 3;
            let delta = [64u64, 256, 1024][(t / 3) % 3];
            let (mu, nu) = sparse_instance(k, 24, d, delta, ts);
            let emd = emd_exact(&mu, &nu, 1, delta, d)?;
            let mut ratios = Vec::with_capacity(shifts);
            let mut violations = 0;
            for s in 0..shifts {
                let emb = ShiftedGridEmbedding::random(d, delta, EmbeddingMode::Emd, prf::derive(ts, s as u64))?;
                let g = emb.norm_of_difference(&mu, &nu)?;
                if emd > (d as f64).sqrt() / 2.0 * g * (1.0 + 1e-12) {
                    violations += 1;
                }
                ratios.push(g / emd);
            }
            ratios.sort_by(f64::total_cmp);
            let q95 = quantile(&ratios, 0.95);
            let lg = |v: f64| v.log2();
            let bound = d as f64 * (lg(k as f64) + lg(lg(delta as f64)));
            Ok(EmdRow { trial: t, k, d, delta, emd, q95_ratio: q95, bound, contraction_violations: violations })
        })
        .collect()
}

/// Lower empirical quantile of sorted data.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let idx = ((q * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len()) - 1;
    sorted[idx]
}

#[derive(Debug, Clone, PartialEq)]
pub struct SensSumRow {
    pub seed: u64,
    pub k: usize,
    pub z: u32,
    pub n: u64,
    pub sigma_sum: f64,
    pub bound: f64,
}

/// 8 2^(2z) k log2^2(n d delta).
pub fn sens_sum_bound(n: u64, k: usize, z: u32, d: usize, delta: u64) -> f64 {
    total_sensitivity_bound(n, k, z, d, delta)
}

/// Gamma for the sampler that feeds the estimator's reclustering.
pub const SENS_SUM_GAMMA: f64 = 4.0;

pub fn sens_sum(seeds: &[u64], ks: &[usize], zs: &[u32], n: u64, d: usize, delta: u64) -> CoreResult<Vec<SensSumRow>> {
    let mut jobs = Vec::new();
    for &k in ks {
        for &z in zs {
            for &s in seeds {
                jobs.push((k, z, s));
            }
        }
    }
    jobs.par_iter()
        .map(|&(k, z, seed)| {
            let pts: Vec<WeightedPoint> = cluster_stream(n, k.max(2), d, delta, seed).collect();
            let run = online_sample(&pts, k, z, 0.25, SENS_SUM_GAMMA, 2.0, SensitivityMode::Estimate, seed)?;
            Ok(SensSumRow { seed, k, z, n, sigma_sum: run.sigma_sum, bound: sens_sum_bound(n, k, z, d, delta) })
        })
        .collect()
}

/// Max over rows of q95_ratio / bound: the smallest C covering every row.
pub fn emd_fitted_constant(rows: &[EmdRow]) -> f64 {
    rows.iter().map(|r| r.q95_ratio / r.bound).fold(0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ExperimentOutput {
    pub csv: String,
    /// Fitted constants and other headline numbers for the manifest.
    pub summary: BTreeMap<String, f64>,
}

/// Run a named experiment with its default sizes (or reduced ones when
/// `quick`).
pub fn run_named(name: &str, seed: u64, quick: bool) -> CliResult<ExperimentOutput> {
    let mut out = String::new();
    let mut summary = BTreeMap::new();
    match name {
        "fig1-space" => {
            let mut cfg = Fig1Config::default();
            cfg.params = cfg.params.with_seed(seed);
            if quick {
                cfg.ns = vec![1_000, 10_000];
            }
            out.push_str("n,pipeline,peak_words,tree_inputs,bound\n");
            let rows = fig1_space(&cfg)?;
            for r in &rows {
                let _ = writeln!(out, "{},{},{},{},{}", r.n, r.pipeline, r.peak_words, r.tree_inputs, r.raw_words);
            }
            let hy: Vec<f64> = rows.iter().filter(|r| r.pipeline == "hybrid").map(|r| r.peak_words).collect();
            let fit = growth_fit(&cfg.ns, &hy);
            summary.insert("loglog_exponent".into(), fit.a);
            summary.insert("aic_loglog".into(), fit.aic_loglog);
            summary.insert("aic_log".into(), fit.aic_log);
        }
        "appendixA-distortion" => {
            let ns: Vec<usize> = if quick { vec![64, 128, 256] } else { (6..=12).map(|e| 1usize << e).collect() };
            out.push_str("n,mean_distortion,bound\n");
            let rows = appendix_a(&ns, 1 << 30, if quick { 50 } else { 400 }, seed)?;
            for r in &rows {
                let _ = writeln!(out, "{},{},{}", r.n, r.mean_distortion, r.n);
            }
            summary.insert("loglog_slope".into(), loglog_slope(&rows));
        }
        "emd-distortion" => {
            out.push_str("trial,k,d,delta,emd,q95_ratio,bound,contraction_violations\n");
            let rows = emd_distortion(if quick { 9 } else { 27 }, if quick { 40 } else { 200 }, seed)?;
            for r in &rows {
                let _ = writeln!(out, "{},{},{},{},{},{},{},{}", r.trial, r.k, r.d, r.delta, r.emd, r.q95_ratio, r.bound, r.contraction_violations);
            }
            summary.insert("fitted_c".into(), emd_fitted_constant(&rows));
        }
        "sens-sum" => {
            let seeds: Vec<u64> = (0..if quick { 2 } else { 20 }).map(|s| seed + s).collect();
            let n = if quick { 2_000 } else { 10_000 };
            out.push_str("seed,k,z,n,sigma_sum,bound\n");
            let rows = sens_sum(&seeds, &[1, 2, 4], &[1, 2], n, 2, 1024)?;
            for r in &rows {
                let _ = writeln!(out, "{},{},{},{},{},{}", r.seed, r.k, r.z, r.n, r.sigma_sum, r.bound);
            }
            summary.insert("max_sum_over_bound".into(), rows.iter().map(|r| r.sigma_sum / r.bound).fold(0.0, f64::max));
        }
        _ => return Err(CliError::Usage(format!("unknown experiment {name}; expected one of {}", EXPERIMENTS.join(", ")))),
    }
    Ok(ExperimentOutput { csv: out, summary })
}
