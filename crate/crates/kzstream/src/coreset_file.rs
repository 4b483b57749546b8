//! Text coreset format: a header line, then `num/den c1 .. cd` per item.

use std::fmt::Write as _;

use kzstream_core::{ClusterParams, Coreset, Provenance, WeightedPoint};
use num_rational::Ratio;

use crate::error::{CliError, CliResult};

pub fn write_coreset(c: &Coreset) -> String {
    let p = &c.params;
    let mut out = format!(
        "KZCORESET v1 d={} delta={} k={} z={} eps={} seed={} provenance={} eps_contract={} n={}\n",
        p.d,
        p.delta,
        p.k,
        p.z,
        p.eps,
        p.seed,
        c.provenance.as_str(),
        c.eps_contract,
        c.items.len()
    );
    for it in &c.items {
        let _ = write!(out, "{}/{}", it.weight.numer(), it.weight.denom());
        for x in &it.coords {
            let _ = write!(out, " {x}");
        }
        out.push('\n');
    }
    out
}

pub fn parse_coreset(text: &str) -> CliResult<Coreset> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, head) = lines.next().ok_or_else(|| CliError::parse(1, "missing KZCORESET header"))?;
    let mut toks = head.split_whitespace();
    if toks.next() != Some("KZCORESET") || toks.next() != Some("v1") {
        return Err(CliError::parse(1, "expected `KZCORESET v1`"));
    }
    let fields: Vec<(&str, &str)> = toks.filter_map(|t| t.split_once('=')).collect();
    let get = |name: &str| -> CliResult<&str> {
        fields.iter().find(|(k, _)| *k == name).map(|(_, v)| *v).ok_or_else(|| CliError::parse(1, format!("header is missing {name}=")))
    };
    fn num<T: std::str::FromStr>(s: &str, name: &str) -> CliResult<T> {
        s.parse().map_err(|_| CliError::parse(1, format!("bad header value {name}={s}")))
    }
    let params = ClusterParams::new(
        num(get("k")?, "k")?,
        num(get("z")?, "z")?,
        num(get("eps")?, "eps")?,
        num(get("d")?, "d")?,
        num(get("delta")?, "delta")?,
        num(get("seed")?, "seed")?,
    )?;
    let provenance = Provenance::parse(get("provenance")?).ok_or_else(|| CliError::parse(1, "unknown provenance"))?;
    let eps_contract: f64 = num(get("eps_contract")?, "eps_contract")?;
    let mut items = Vec::new();
    for (i, line) in lines {
        let ln = i + 1;
        let mut t = line.split_whitespace();
        let w = t.next().ok_or_else(|| CliError::parse(ln, "empty item"))?;
        let (a, b) = w.split_once('/').ok_or_else(|| CliError::parse(ln, "weight must be num/den"))?;
        let (a, b): (u128, u128) = match (a.parse(), b.parse()) {
            (Ok(a), Ok(b)) if b > 0 => (a, b),
            _ => return Err(CliError::parse(ln, format!("bad weight {w}"))),
        };
        let coords: Vec<f64> = t.map(|v| v.parse().map_err(|_| CliError::parse(ln, format!("bad coordinate {v}")))).collect::<CliResult<_>>()?;
        if coords.len() != params.d {
            return Err(CliError::parse(ln, format!("expected {} coordinates", params.d)));
        }
        items.push(WeightedPoint::new(coords, Ratio::new(a, b)));
    }
    Ok(Coreset { items, eps_contract, params, provenance })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_is_exact() {
        let params = ClusterParams::new(2, 2, 0.25, 2, 64, 9).unwrap();
        let c = Coreset {
            items: vec![
                WeightedPoint::new(vec![1.0, 64.0], Ratio::new(3, 1)),
                WeightedPoint::new(vec![0.1 + 0.2, 7.5], Ratio::new(5, 4)),
            ],
            eps_contract: 0.25,
            params,
            provenance: Provenance::MergeReduce,
        };
        let text = write_coreset(&c);
        let back = parse_coreset(&text).unwrap();
        assert_eq!(back, c);
        assert_eq!(write_coreset(&back), text);
    }
}
