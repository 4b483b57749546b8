//! KZSKETCH: little-endian binary container for a pass-one summary.
//!
//! Layout: magic `KZSKETCH`, u32 version, then the fields of the summary in
//! declaration order. Vectors are prefixed by a u32 length, floats are
//! stored as their IEEE bits, accumulators as i128.

use kzstream_core::dynamic::{DynamicMode, PassOneSummary};
use kzstream_core::grid::{EmbeddingMode, ShiftedGridEmbedding};
use kzstream_core::sketch::CauchySketch;
use kzstream_core::{CenterSet, ClusterParams};

use crate::error::{CliError, CliResult};

pub const MAGIC: &[u8; 8] = b"KZSKETCH";
pub const VERSION: u32 = 1;

#[derive(Default)]
struct Writer(Vec<u8>);

impl Writer {
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }
    fn u32(&mut self, v: u32) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn i64(&mut self, v: i64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn i128(&mut self, v: i128) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn f64(&mut self, v: f64) {
        self.u64(v.to_bits());
    }
    fn len(&mut self, n: usize) {
        self.u32(n as u32);
    }
    fn points(&mut self, c: &CenterSet) {
        self.len(c.centers.len());
        for p in &c.centers {
            self.len(p.len());
            p.iter().for_each(|&x| self.f64(x));
        }
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take<const N: usize>(&mut self) -> CliResult<[u8; N]> {
        let end = self.pos + N;
        let s = self.buf.get(self.pos..end).ok_or_else(|| CliError::Format("truncated KZSKETCH".into()))?;
        self.pos = end;
        Ok(s.try_into().expect("length checked"))
    }
    fn u8(&mut self) -> CliResult<u8> {
        Ok(self.take::<1>()?[0])
    }
    fn u32(&mut self) -> CliResult<u32> {
        Ok(u32::from_le_bytes(self.take()?))
    }
    fn u64(&mut self) -> CliResult<u64> {
        Ok(u64::from_le_bytes(self.take()?))
    }
    fn i64(&mut self) -> CliResult<i64> {
        Ok(i64::from_le_bytes(self.take()?))
    }
    fn i128(&mut self) -> CliResult<i128> {
        Ok(i128::from_le_bytes(self.take()?))
    }
    fn f64(&mut self) -> CliResult<f64> {
        Ok(f64::from_bits(self.u64()?))
    }
    fn len(&mut self) -> CliResult<usize> {
        let n = self.u32()? as usize;
        if n > self.buf.len() {
            return Err(CliError::Format("implausible length in KZSKETCH".into()));
        }
        Ok(n)
    }
    fn points(&mut self) -> CliResult<CenterSet> {
        let n = self.len()?;
        let mut out = Vec::with_capacity(n);
        for _ in 0..n {
            let d = self.len()?;
            out.push((0..d).map(|_| self.f64()).collect::<CliResult<Vec<_>>>()?);
        }
        Ok(CenterSet::new(out))
    }
}

pub fn encode_summary(s: &PassOneSummary) -> Vec<u8> {
    let mut w = Writer::default();
    w.0.extend_from_slice(MAGIC);
    w.u32(VERSION);
    let p = &s.params;
    w.u64(p.k as u64);
    w.u32(p.z);
    w.f64(p.eps);
    w.u64(p.d as u64);
    w.u64(p.delta);
    w.u64(p.seed);
    w.u8(match s.mode {
        DynamicMode::KMedian => 0,
        DynamicMode::Kz => 1,
    });
    w.u8(s.empty as u8);
    w.i64(s.total_mass);
    w.u64(s.updates);
    w.len(s.embeddings.len());
    for (e, sk) in s.embeddings.iter().zip(&s.sketches) {
        match e.mode {
            EmbeddingMode::Emd => w.u32(0),
            EmbeddingMode::Wass { z } => w.u32(z),
        }
        w.len(e.shift.len());
        e.shift.iter().for_each(|&v| w.u64(v));
        w.u64(sk.seed());
        w.len(sk.ell());
        sk.raw().iter().for_each(|&a| w.i128(a));
    }
    w.points(&s.centers);
    w.len(s.weights.len());
    s.weights.iter().for_each(|&v| w.u64(v));
    w.f64(s.z_tilde);
    w.u32(s.best_shift as u32);
    w.f64(s.gamma);
    w.points(&s.cprime);
    w.u32(s.coarse_level);
    w.len(s.coarse_cells.len());
    for (cell, count) in &s.coarse_cells {
        w.len(cell.len());
        cell.iter().for_each(|&c| w.i64(c));
        w.u64(*count);
    }
    w.u64(s.peak_words);
    w.u32(s.word_bits);
    w.0
}

pub fn decode_summary(buf: &[u8]) -> CliResult<PassOneSummary> {
    let mut r = Reader { buf, pos: 0 };
    if &r.take::<8>()? != MAGIC {
        return Err(CliError::Format("not a KZSKETCH file".into()));
    }
    if r.u32()? != VERSION {
        return Err(CliError::Format("unsupported KZSKETCH version".into()));
    }
    let k = r.u64()? as usize;
    let z = r.u32()?;
    let eps = r.f64()?;
    let d = r.u64()? as usize;
    let delta = r.u64()?;
    let seed = r.u64()?;
    let params = ClusterParams::new(k, z, eps, d, delta, seed)?;
    let mode = match r.u8()? {
        0 => DynamicMode::KMedian,
        1 => DynamicMode::Kz,
        m => return Err(CliError::Format(format!("unknown mode tag {m}"))),
    };
    let empty = r.u8()? != 0;
    let total_mass = r.i64()?;
    let updates = r.u64()?;
    let m = r.len()?;
    let mut embeddings = Vec::with_capacity(m);
    let mut sketches = Vec::with_capacity(m);
    for _ in 0..m {
        let emode = match r.u32()? {
            0 => EmbeddingMode::Emd,
            z => EmbeddingMode::Wass { z },
        };
        let sd = r.len()?;
        let shift = (0..sd).map(|_| r.u64()).collect::<CliResult<Vec<_>>>()?;
        embeddings.push(ShiftedGridEmbedding::new(d, delta, shift, emode)?);
        let sseed = r.u64()?;
        let ell = r.len()?;
        let acc = (0..ell).map(|_| r.i128()).collect::<CliResult<Vec<_>>>()?;
        sketches.push(CauchySketch::from_raw(sseed, acc));
    }
    let centers = r.points()?;
    let nw = r.len()?;
    let weights = (0..nw).map(|_| r.u64()).collect::<CliResult<Vec<_>>>()?;
    let z_tilde = r.f64()?;
    let best_shift = r.u32()? as usize;
    let gamma = r.f64()?;
    let cprime = r.points()?;
    let coarse_level = r.u32()?;
    let nc = r.len()?;
    let mut coarse_cells = Vec::with_capacity(nc);
    for _ in 0..nc {
        let cd = r.len()?;
        let cell = (0..cd).map(|_| r.i64()).collect::<CliResult<Vec<_>>>()?;
        coarse_cells.push((cell, r.u64()?));
    }
    let peak_words = r.u64()?;
    let word_bits = r.u32()?;
    if r.pos != buf.len() {
        return Err(CliError::Format("trailing bytes after KZSKETCH payload".into()));
    }
    Ok(PassOneSummary {
        params,
        mode,
        empty,
        total_mass,
        updates,
        embeddings,
        sketches,
        centers,
        weights,
        z_tilde,
        best_shift,
        gamma,
        cprime,
        coarse_level,
        coarse_cells,
        peak_words,
        word_bits,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use kzstream_core::dynamic::{pass_one, DynamicConfig, DynamicUpdate};
    use kzstream_core::Point;

    #[test]
    fn container_is_bit_exact() {
        let params = ClusterParams::new(2, 2, 0.25, 2, 16, 3).unwrap();
        let ups: Vec<DynamicUpdate> = (1..=12u32).map(|i| DynamicUpdate::insert(Point::new(vec![i, 17 - i]))).collect();
        let cfg = DynamicConfig { cauchy_reps: 16, ..DynamicConfig::default() };
        let s = pass_one(&ups, &params, DynamicMode::Kz, &cfg, 12).unwrap();
        let bytes = encode_summary(&s);
        let back = decode_summary(&bytes).unwrap();
        assert_eq!(encode_summary(&back), bytes);
        assert_eq!(back.sketches, s.sketches);
        assert_eq!(back.cprime, s.cprime);
        assert!(decode_summary(&bytes[..bytes.len() - 1]).is_err());
    }
}
