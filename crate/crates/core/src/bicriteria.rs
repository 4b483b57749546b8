//! Bad-level center copies (phi) and the transport reassignment (psi) that
//! make W_s usable for k-sparse measures.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use num_traits::Zero;

use crate::error::{Error, Result};
use crate::geometry::CenterSet;
use crate::grid::{EmbeddingMode, Mass, MassVector, ShiftedGridEmbedding};
use crate::transport::transport_plan;

#[derive(Debug, Clone, PartialEq)]
pub struct CenterCopy {
    pub center: usize,
    pub level: u32,
    pub axis: usize,
    /// Hyperplane position in the shifted frame (a multiple of 2^level).
    pub hyperplane: f64,
    pub point: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BicriteriaCenterMap {
    pub original: CenterSet,
    pub copies: Vec<CenterCopy>,
    /// Originals first, then distinct copy locations.
    pub flat: CenterSet,
}

/// A center closer than 2^i / (d log2 delta) to a level-i hyperplane is bad there.
pub fn bad_level_threshold(level: u32, d: usize, delta: u64) -> f64 {
    let ell = delta.trailing_zeros().max(1) as f64;
    (1u64 << level) as f64 / (d as f64 * ell)
}

fn bits(p: &[f64]) -> Vec<u64> {
    p.iter().map(|c| c.to_bits()).collect()
}

/// Copies are the exact projections of each original center onto every
/// nearby hyperplane, scanning levels from the top down.
pub fn phi_map(emb: &ShiftedGridEmbedding, centers: &CenterSet) -> Result<BicriteriaCenterMap> {
    if !matches!(emb.mode, EmbeddingMode::Wass { .. }) {
        return Err(Error::param("phi_map needs a Wasserstein embedding"));
    }
    let mut seen: BTreeMap<Vec<u64>, ()> = BTreeMap::new();
    let mut flat: Vec<Vec<f64>> = Vec::new();
    for c in &centers.centers {
        if c.len() != emb.d {
            return Err(Error::DimensionMismatch { expected: emb.d, got: c.len() });
        }
        if seen.insert(bits(c), ()).is_none() {
            flat.push(c.clone());
        }
    }
    let mut copies = Vec::new();
    for level in (0..=emb.ell).rev() {
        let side = (1u64 << level) as f64;
        let tau = bad_level_threshold(level, emb.d, emb.delta);
        for (ci, c) in centers.centers.iter().enumerate() {
            for axis in 0..emb.d {
                let u = emb.frame(axis, c[axis]);
                let lower = libm::floor(u / side) * side;
                for h in [lower, lower + side] {
                    if (u - h).abs() < tau {
                        let mut point = c.clone();
                        point[axis] = h + 1.0 - emb.shift[axis] as f64;
                        if seen.insert(bits(&point), ()).is_none() {
                            flat.push(point.clone());
                        }
                        copies.push(CenterCopy { center: ci, level, axis, hyperplane: h, point });
                    }
                }
            }
        }
    }
    Ok(BicriteriaCenterMap { original: centers.clone(), copies, flat: CenterSet::new(flat) })
}

/// Move each transported unit to the copy on the coarsest hyperplane that
/// separates its source from its center, if such a copy exists.
pub fn psi_with_map(
    emb: &ShiftedGridEmbedding,
    mu: &MassVector,
    nu: &MassVector,
    map: &BicriteriaCenterMap,
    z: u32,
) -> Result<MassVector> {
    if map.original.len() != nu.support.len() {
        return Err(Error::DimensionMismatch { expected: nu.support.len(), got: map.original.len() });
    }
    let plan = transport_plan(mu, nu, z, emb.delta, emb.d)?;
    let mut remaining: Vec<Mass> = nu.support.iter().map(|(_, m)| *m).collect();
    let mut out: Vec<(Vec<f64>, Mass)> = Vec::new();
    for &(i, j, m) in &plan.flows {
        remaining[j] -= m;
        let x = &mu.support[i].0;
        let c = &nu.support[j].0;
        let mut best: Option<&CenterCopy> = None;
        for cp in map.copies.iter().filter(|cp| cp.center == j) {
            let ux = emb.frame(cp.axis, x[cp.axis]);
            let uc = emb.frame(cp.axis, c[cp.axis]);
            if (ux >= cp.hyperplane) != (uc >= cp.hyperplane) && best.map_or(true, |b| cp.level > b.level) {
                best = Some(cp);
            }
        }
        out.push((best.map_or_else(|| c.clone(), |cp| cp.point.clone()), m));
    }
    for (j, r) in remaining.into_iter().enumerate() {
        if !r.is_zero() {
            out.push((nu.support[j].0.clone(), r));
        }
    }
    Ok(MassVector::new(out).canonical())
}

/// psi with phi computed from the support of nu.
pub fn psi_transport(emb: &ShiftedGridEmbedding, mu: &MassVector, nu: &MassVector) -> Result<MassVector> {
    let z = match emb.mode {
        EmbeddingMode::Wass { z } => z,
        EmbeddingMode::Emd => 1,
    };
    let centers = CenterSet::new(nu.support.iter().map(|(p, _)| p.clone()).collect());
    let map = phi_map(emb, &centers)?;
    psi_with_map(emb, mu, nu, &map, z)
}
