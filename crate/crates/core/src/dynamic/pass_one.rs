//! First pass: linear sketches of the shifted-grid embeddings, then a
//! search for the candidate measure closest to the stream in sketch norm.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use super::{DynamicConfig, DynamicMode, DynamicUpdate};
use crate::bicriteria::phi_map;
use crate::error::{Error, Result};
use crate::geometry::{pow_z, sq_dist, CenterSet};
use crate::grid::{EmbeddingMode, ShiftedGridEmbedding};
use crate::meter::{Component, MemoryMeter};
use crate::net::binom;
use crate::params::ClusterParams;
use crate::prf;
use crate::sketch::cauchy::{median_abs, CauchySketch};
use crate::sketch::SparseRecoverySketch;

/// Serialized size of one fixed-point accumulator and one recovery bucket.
const ACC_BITS: u64 = 128;
const BUCKET_BITS: u64 = 384;
/// Centers of the bicriteria set are snapped to this grid.
const SNAP: f64 = 256.0;

pub(crate) fn words_for(bits: u64, word_bits: u32) -> u64 {
    bits.div_ceil(word_bits as u64)
}

#[derive(Debug, Clone)]
pub struct PassOneSummary {
    pub params: ClusterParams,
    pub mode: DynamicMode,
    /// Net multiplicity of the stream is zero.
    pub empty: bool,
    pub total_mass: i64,
    pub updates: u64,
    pub embeddings: Vec<ShiftedGridEmbedding>,
    pub sketches: Vec<CauchySketch>,
    /// Best k centers S with the coarse mass assigned to each.
    pub centers: CenterSet,
    pub weights: Vec<u64>,
    pub z_tilde: f64,
    pub best_shift: usize,
    pub gamma: f64,
    /// Bicriteria centers C' (KZ mode); equals `centers` otherwise.
    pub cprime: CenterSet,
    pub coarse_level: u32,
    pub coarse_cells: Vec<(Vec<i64>, u64)>,
    pub peak_words: u64,
    pub word_bits: u32,
}

pub struct PassOne {
    params: ClusterParams,
    mode: DynamicMode,
    cfg: DynamicConfig,
    embeddings: Vec<ShiftedGridEmbedding>,
    sketches: Vec<CauchySketch>,
    coarse_levels: Vec<u32>,
    coarse: Vec<SparseRecoverySketch>,
    total_mass: i64,
    updates: u64,
    /// Per-point multiplicities, kept only to reject malformed streams.
    shadow: BTreeMap<u128, i64>,
    meter: MemoryMeter,
}

impl PassOne {
    pub fn new(params: ClusterParams, mode: DynamicMode, cfg: DynamicConfig, expected_len: u64) -> Result<Self> {
        params.validate()?;
        let emb_mode = match mode {
            DynamicMode::KMedian => EmbeddingMode::Emd,
            DynamicMode::Kz => EmbeddingMode::Wass { z: params.z },
        };
        let m = cfg.shift_count(&params);
        let mut embeddings = Vec::with_capacity(m);
        let mut sketches = Vec::with_capacity(m);
        for i in 0..m as u64 {
            embeddings.push(ShiftedGridEmbedding::random(params.d, params.delta, emb_mode, prf::derive(params.seed, 0x5e_0000 + i))?);
            sketches.push(CauchySketch::new(cfg.cauchy_reps, prf::derive(params.seed, 0xca_0000 + i)));
        }
        let ell = params.ell();
        let coarse_levels: Vec<u32> = (ell.div_ceil(2)..=ell).collect();
        let cap = cfg.coarse_cap(&params);
        let coarse = coarse_levels
            .iter()
            .map(|&l| SparseRecoverySketch::new(cap, prf::derive(params.seed, 0xc0_0000 + l as u64)))
            .collect::<Vec<_>>();
        let mut meter = MemoryMeter::new(expected_len.max(1), params.d, params.delta);
        meter.begin_phase("pass-one");
        let wb = meter.word_bits();
        meter.set(Component::SketchAccumulators, words_for((m * cfg.cauchy_reps) as u64 * ACC_BITS, wb));
        let buckets: u64 = coarse.iter().map(|c| c.buckets().len() as u64).sum();
        meter.add(Component::SketchAccumulators, words_for(buckets * BUCKET_BITS, wb));
        meter.set(Component::HashCoefficients, (m * params.d) as u64 + (m + coarse.len()) as u64);
        Ok(PassOne { params, mode, cfg, embeddings, sketches, coarse_levels, coarse, total_mass: 0, updates: 0, shadow: BTreeMap::new(), meter })
    }

    pub fn meter(&self) -> &MemoryMeter {
        &self.meter
    }

    pub fn update(&mut self, u: &DynamicUpdate) -> Result<()> {
        let p = &self.params;
        u.point.validate(p.d, p.delta)?;
        let id = u.point.id(p.delta)?;
        let entry = self.shadow.entry(id).or_insert(0);
        let next = *entry + u.delta;
        if next < 0 {
            return Err(Error::NegativeMultiplicity { index: self.updates });
        }
        *entry = next;
        if next == 0 {
            self.shadow.remove(&id);
        }
        self.updates += 1;
        self.total_mass += u.delta;
        let x = u.point.to_f64();
        for (emb, sk) in self.embeddings.iter().zip(self.sketches.iter_mut()) {
            for t in 0..=emb.ell {
                sk.update(emb.cell_key(t, &emb.cell(&x, t)), u.delta as i128 * emb.level_weight(t));
            }
        }
        for (&l, sk) in self.coarse_levels.iter().zip(self.coarse.iter_mut()) {
            sk.update(coarse_id(u.point.coords(), l, p.delta), u.delta, 0)?;
        }
        Ok(())
    }

    pub fn finish(self) -> Result<PassOneSummary> {
        let p = self.params;
        let mut summary = PassOneSummary {
            params: p,
            mode: self.mode,
            empty: self.total_mass == 0,
            total_mass: self.total_mass,
            updates: self.updates,
            embeddings: self.embeddings,
            sketches: self.sketches,
            centers: CenterSet::new(Vec::new()),
            weights: Vec::new(),
            z_tilde: 0.0,
            best_shift: 0,
            gamma: 1.0,
            cprime: CenterSet::new(Vec::new()),
            coarse_level: p.ell(),
            coarse_cells: Vec::new(),
            peak_words: self.meter.peak(),
            word_bits: self.meter.word_bits(),
        };
        if summary.empty {
            return Ok(summary);
        }
        let (level, cells) = self
            .coarse_levels
            .iter()
            .zip(&self.coarse)
            .find_map(|(&l, sk)| sk.decode().ok().map(|m| (l, m)))
            .ok_or(Error::RecoveryOverflow { recovered: 0, budget: self.cfg.coarse_cap(&p) })?;
        let per_axis = p.delta >> level;
        let cells: Vec<(Vec<i64>, u64)> = cells
            .into_iter()
            .filter(|(_, r)| r.count > 0)
            .map(|(id, r)| {
                let mut rest = id;
                let idx = (0..p.d)
                    .map(|_| {
                        let v = (rest % per_axis as u128) as i64;
                        rest /= per_axis as u128;
                        v
                    })
                    .collect();
                (idx, r.count as u64)
            })
            .collect();
        summary.coarse_level = level;
        summary.coarse_cells = cells;

        let mut search = Search::new(&summary, &self.cfg);
        let (centers, score, shift) = search.run()?;
        summary.weights = search.assign(&centers.centers);
        summary.z_tilde = score;
        summary.best_shift = shift;
        let lb = box_lower_bound(&summary, &centers);
        summary.gamma = if score <= 0.0 {
            1.0
        } else if lb <= 0.0 {
            self.cfg.max_gamma
        } else {
            (score / lb).clamp(1.0, self.cfg.max_gamma)
        };
        summary.cprime = match self.mode {
            DynamicMode::KMedian => centers.clone(),
            DynamicMode::Kz => {
                let map = phi_map(&summary.embeddings[shift], &centers)?;
                snap(&map.flat)
            }
        };
        summary.centers = centers;
        Ok(summary)
    }
}

/// Mixed-radix id of the unshifted level-l cell containing a lattice point.
fn coarse_id(coords: &[u32], level: u32, delta: u64) -> u128 {
    let radix = (delta >> level) as u128;
    let mut id = 0u128;
    let mut scale = 1u128;
    for &c in coords {
        id += scale * ((c as u128 - 1) >> level);
        scale *= radix;
    }
    id
}

fn cell_representative(cell: &[i64], level: u32, delta: u64) -> Vec<f64> {
    let side = 1i64 << level;
    cell.iter().map(|&j| ((1 + j * side + side / 2) as f64).min(delta as f64)).collect()
}

fn snap(c: &CenterSet) -> CenterSet {
    let mut out: Vec<Vec<f64>> = Vec::new();
    for p in &c.centers {
        let q: Vec<f64> = p.iter().map(|v| libm::round(v * SNAP) / SNAP).collect();
        if !out.contains(&q) {
            out.push(q);
        }
    }
    CenterSet::new(out)
}

/// Sum over coarse cells of count times the z-th power of the distance from
/// the cell box to its nearest center; never above the true cost.
fn box_lower_bound(s: &PassOneSummary, centers: &CenterSet) -> f64 {
    let side = (1u64 << s.coarse_level) as f64;
    let z = s.params.z;
    s.coarse_cells
        .iter()
        .map(|(cell, count)| {
            let best = centers
                .centers
                .iter()
                .map(|c| {
                    let sq: f64 = cell
                        .iter()
                        .zip(c)
                        .map(|(&j, &ci)| {
                            let lo = 1.0 + j as f64 * side;
                            let hi = lo + side - 1.0;
                            let g = (lo - ci).max(ci - hi).max(0.0);
                            g * g
                        })
                        .sum();
                    pow_z(sq, z)
                })
                .fold(f64::INFINITY, f64::min);
            *count as f64 * best
        })
        .sum()
}

/// Calls f on every r-subset of 0..n in lexicographic order.
pub(crate) fn for_each_combination(n: usize, r: usize, mut f: impl FnMut(&[usize])) {
    if r > n {
        return;
    }
    let mut idx: Vec<usize> = (0..r).collect();
    loop {
        f(&idx);
        let mut i = r;
        loop {
            if i == 0 {
                return;
            }
            i -= 1;
            if idx[i] != i + n - r {
                break;
            }
            if i == 0 {
                return;
            }
        }
        idx[i] += 1;
        for j in i + 1..r {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

struct Search<'a> {
    s: &'a PassOneSummary,
    cfg: &'a DynamicConfig,
    reps: Vec<Vec<f64>>,
    cache: Vec<BTreeMap<u64, Vec<i128>>>,
}

impl<'a> Search<'a> {
    fn new(s: &'a PassOneSummary, cfg: &'a DynamicConfig) -> Self {
        let reps = s.coarse_cells.iter().map(|(c, _)| cell_representative(c, s.coarse_level, s.params.delta)).collect();
        Search { s, cfg, reps, cache: vec![BTreeMap::new(); s.embeddings.len()] }
    }

    /// Coarse mass of each center, cells going to their nearest center.
    fn assign(&self, centers: &[Vec<f64>]) -> Vec<u64> {
        let mut w = vec![0u64; centers.len()];
        for (rep, (_, count)) in self.reps.iter().zip(&self.s.coarse_cells) {
            let mut best = 0;
            let mut bd = f64::INFINITY;
            for (i, c) in centers.iter().enumerate() {
                let dd = sq_dist(rep, c);
                if dd < bd {
                    bd = dd;
                    best = i;
                }
            }
            w[best] += count;
        }
        w
    }

    /// Scaled sketch estimate of the distance between the stream and the
    /// measure placing the assigned mass on `centers`, for one shift.
    fn shift_score(&mut self, shift: usize, centers: &[Vec<f64>]) -> Result<f64> {
        let emb = &self.s.embeddings[shift];
        let support: Vec<Vec<f64>> = match self.s.mode {
            DynamicMode::KMedian => centers.to_vec(),
            DynamicMode::Kz => phi_map(emb, &CenterSet::new(centers.to_vec()))?.flat.centers,
        };
        let w = self.assign(&support);
        let sk = &self.s.sketches[shift];
        let mut resid: Vec<i128> = sk.raw().to_vec();
        let cache = &mut self.cache[shift];
        for (c, &wc) in support.iter().zip(&w) {
            if wc == 0 {
                continue;
            }
            for t in 0..=emb.ell {
                let key = emb.cell_key(t, &emb.cell(c, t));
                let col = cache.entry(key).or_insert_with(|| sk.column(key));
                let mult = (wc as i128).wrapping_mul(emb.level_weight(t));
                for (r, v) in resid.iter_mut().zip(col.iter()) {
                    *r = r.wrapping_sub(mult.wrapping_mul(*v));
                }
            }
        }
        let est = median_abs(&resid) * emb.common_factor();
        Ok(match self.s.mode {
            DynamicMode::KMedian => libm::sqrt(self.s.params.d as f64) / 2.0 * est,
            DynamicMode::Kz => (1u64 << (self.s.params.z - 1)) as f64 * est,
        })
    }

    fn score(&mut self, centers: &[Vec<f64>]) -> Result<(f64, usize)> {
        let mut best = (f64::INFINITY, 0);
        for s in 0..self.s.embeddings.len() {
            let v = self.shift_score(s, centers)?;
            if v < best.0 {
                best = (v, s);
            }
        }
        Ok(best)
    }

    fn run(&mut self) -> Result<(CenterSet, f64, usize)> {
        let n = self.reps.len();
        let k = self.s.params.k.min(n);
        let mut best: Option<(Vec<Vec<f64>>, f64, usize)> = None;
        if binom(n, k) <= self.cfg.search_budget as u128 {
            let reps = self.reps.clone();
            let mut err = None;
            for_each_combination(n, k, |idx| {
                if err.is_some() {
                    return;
                }
                let cs: Vec<Vec<f64>> = idx.iter().map(|&i| reps[i].clone()).collect();
                match self.score(&cs) {
                    Ok((v, s)) => {
                        if best.as_ref().map_or(true, |b| v < b.1) {
                            best = Some((cs, v, s));
                        }
                    }
                    Err(e) => err = Some(e),
                }
            });
            if let Some(e) = err {
                return Err(e);
            }
        } else {
            let mut order: Vec<usize> = (0..n).collect();
            order.sort_by(|&a, &b| self.s.coarse_cells[b].1.cmp(&self.s.coarse_cells[a].1));
            let cs: Vec<Vec<f64>> = order[..k].iter().map(|&i| self.reps[i].clone()).collect();
            let (v, s) = self.score(&cs)?;
            best = Some((cs, v, s));
        }
        let (mut cs, mut v, mut s) = best.expect("at least one occupied cell");
        let delta = self.s.params.delta as f64;
        let mut step = (1u64 << self.s.coarse_level) as f64 / 2.0;
        while step >= 1.0 {
            for _ in 0..100 {
                let mut improved = false;
                for i in 0..cs.len() {
                    for axis in 0..self.s.params.d {
                        for dir in [-1.0, 1.0] {
                            let moved = (cs[i][axis] + dir * step).clamp(1.0, delta);
                            if moved == cs[i][axis] {
                                continue;
                            }
                            let mut trial = cs.clone();
                            trial[i][axis] = moved;
                            let (tv, ts) = self.score(&trial)?;
                            if tv < v * (1.0 - 1e-12) {
                                cs = trial;
                                v = tv;
                                s = ts;
                                improved = true;
                            }
                        }
                    }
                }
                if !improved {
                    break;
                }
            }
            step /= 2.0;
        }
        Ok((CenterSet::new(cs), v, s))
    }
}

/// Run the first pass over an in-memory stream.
pub fn pass_one<'a>(
    updates: impl IntoIterator<Item = &'a DynamicUpdate>,
    params: &ClusterParams,
    mode: DynamicMode,
    cfg: &DynamicConfig,
    expected_len: u64,
) -> Result<PassOneSummary> {
    let mut p1 = PassOne::new(*params, mode, cfg.clone(), expected_len)?;
    for u in updates {
        p1.update(u)?;
    }
    p1.finish()
}
