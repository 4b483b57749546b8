//! Exact optimal transport on small supports by min-cost flow.

use alloc::collections::VecDeque;
use alloc::vec;
use alloc::vec::Vec;

use num_integer::Integer;
use num_traits::{Signed, Zero};

use crate::error::{Error, Result};
use crate::geometry::{powi, pow_z, sq_dist};
use crate::grid::{Mass, MassVector};

pub const SUPPORT_LIMIT: usize = 64;

#[derive(Debug, Clone, Copy)]
struct Edge {
    to: usize,
    cap: i128,
    cost: f64,
}

struct Graph {
    edges: Vec<Edge>,
    adj: Vec<Vec<usize>>,
}

impl Graph {
    fn new(n: usize) -> Self {
        Graph { edges: Vec::new(), adj: vec![Vec::new(); n] }
    }

    fn add(&mut self, from: usize, to: usize, cap: i128, cost: f64) -> usize {
        let id = self.edges.len();
        self.edges.push(Edge { to, cap, cost });
        self.adj[from].push(id);
        self.edges.push(Edge { to: from, cap: 0, cost: -cost });
        self.adj[to].push(id + 1);
        id
    }

    /// Successive shortest paths with SPFA; returns total cost.
    fn min_cost_flow(&mut self, s: usize, t: usize) -> f64 {
        let n = self.adj.len();
        let mut total = 0.0;
        loop {
            let mut dist = vec![f64::INFINITY; n];
            let mut prev = vec![usize::MAX; n];
            let mut inq = vec![false; n];
            let mut q = VecDeque::new();
            dist[s] = 0.0;
            q.push_back(s);
            while let Some(u) = q.pop_front() {
                inq[u] = false;
                for &e in &self.adj[u] {
                    let ed = self.edges[e];
                    if ed.cap > 0 {
                        let nd = dist[u] + ed.cost;
                        if nd < dist[ed.to] - 1e-12 * (1.0 + nd.abs()) {
                            dist[ed.to] = nd;
                            prev[ed.to] = e;
                            if !inq[ed.to] {
                                inq[ed.to] = true;
                                q.push_back(ed.to);
                            }
                        }
                    }
                }
            }
            if dist[t].is_infinite() {
                return total;
            }
            let mut push = i128::MAX;
            let mut v = t;
            while v != s {
                let e = prev[v];
                push = push.min(self.edges[e].cap);
                v = self.edges[e ^ 1].to;
            }
            let mut v = t;
            while v != s {
                let e = prev[v];
                self.edges[e].cap -= push;
                self.edges[e ^ 1].cap += push;
                total += push as f64 * self.edges[e].cost;
                v = self.edges[e ^ 1].to;
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransportPlan {
    pub cost: f64,
    /// (source atom, target atom, mass moved).
    pub flows: Vec<(usize, usize, Mass)>,
}

/// Per-unit cost of discarding unmatched mass: (d delta)^z.
pub fn imbalance_penalty(z: u32, delta: u64, d: usize) -> f64 {
    powi(d as f64 * delta as f64, z)
}

fn check_side(m: &MassVector) -> Result<()> {
    if m.support.len() > SUPPORT_LIMIT {
        return Err(Error::SupportTooLarge { size: m.support.len(), limit: SUPPORT_LIMIT });
    }
    if m.support.iter().any(|(_, w)| w.is_negative()) {
        return Err(Error::param("transport masses must be nonnegative"));
    }
    Ok(())
}

/// Optimal plan moving mu onto nu with edge cost |x-y|^z. Unequal totals
/// pay the imbalance penalty per unit of unmatched mass.
pub fn transport_plan(mu: &MassVector, nu: &MassVector, z: u32, delta: u64, d: usize) -> Result<TransportPlan> {
    check_side(mu)?;
    check_side(nu)?;
    let mut lcm: i128 = 1;
    for (_, m) in mu.support.iter().chain(&nu.support) {
        lcm = lcm.lcm(m.denom());
        if lcm > (1i128 << 80) {
            return Err(Error::Overflow("transport mass denominators"));
        }
    }
    let scale = |m: &Mass| -> i128 { m.numer() * (lcm / m.denom()) };
    let a = mu.support.len();
    let b = nu.support.len();
    let (s, dummy, t) = (0, a + b + 1, a + b + 2);
    let mut g = Graph::new(a + b + 3);
    let supply: i128 = mu.support.iter().map(|(_, m)| scale(m)).sum();
    let demand: i128 = nu.support.iter().map(|(_, m)| scale(m)).sum();
    let penalty = imbalance_penalty(z, delta, d);
    for (i, (_, m)) in mu.support.iter().enumerate() {
        g.add(s, 1 + i, scale(m), 0.0);
    }
    for (j, (_, m)) in nu.support.iter().enumerate() {
        g.add(1 + a + j, t, scale(m), 0.0);
    }
    let mut pair_edges = Vec::with_capacity(a * b);
    for (i, (x, _)) in mu.support.iter().enumerate() {
        for (j, (y, _)) in nu.support.iter().enumerate() {
            if x.len() != y.len() {
                return Err(Error::DimensionMismatch { expected: x.len(), got: y.len() });
            }
            let id = g.add(1 + i, 1 + a + j, i128::MAX / 4, pow_z(sq_dist(x, y), z));
            pair_edges.push((i, j, id));
        }
    }
    if supply > demand {
        for i in 0..a {
            g.add(1 + i, dummy, i128::MAX / 4, penalty);
        }
        g.add(dummy, t, supply - demand, 0.0);
    } else if demand > supply {
        g.add(s, dummy, demand - supply, 0.0);
        for j in 0..b {
            g.add(dummy, 1 + a + j, i128::MAX / 4, penalty);
        }
    }
    let raw = g.min_cost_flow(s, t);
    let mut flows = Vec::new();
    for (i, j, id) in pair_edges {
        let f = g.edges[id ^ 1].cap;
        if f > 0 {
            flows.push((i, j, Mass::new(f, lcm)));
        }
    }
    Ok(TransportPlan { cost: raw / lcm as f64, flows })
}

/// Exact EMD (z = 1) or Wass_z^z between two nonnegative measures.
pub fn emd_exact(mu: &MassVector, nu: &MassVector, z: u32, delta: u64, d: usize) -> Result<f64> {
    if mu.support.iter().all(|(_, m)| m.is_zero()) && nu.support.iter().all(|(_, m)| m.is_zero()) {
        return Ok(0.0);
    }
    Ok(transport_plan(mu, nu, z, delta, d)?.cost)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Brute force over permutations for uniform measures of equal size.
    fn perm_oracle(x: &[f64], y: &[f64], z: u32) -> f64 {
        fn rec(i: usize, x: &[f64], y: &[f64], used: &mut Vec<bool>, z: u32) -> f64 {
            if i == x.len() {
                return 0.0;
            }
            let mut best = f64::INFINITY;
            for j in 0..y.len() {
                if !used[j] {
                    used[j] = true;
                    best = best.min((x[i] - y[j]).abs().powi(z as i32) + rec(i + 1, x, y, used, z));
                    used[j] = false;
                }
            }
            best
        }
        rec(0, x, y, &mut vec![false; y.len()], z) / x.len() as f64
    }

    #[test]
    fn examples() {
        let mu = MassVector::uniform(&[vec![3.0], vec![7.0]]);
        assert_eq!(emd_exact(&mu, &mu, 1, 16, 1).unwrap(), 0.0);
        let a = MassVector::point_mass(vec![0.0]);
        let b = MassVector::point_mass(vec![10.0]);
        assert_eq!(emd_exact(&a, &b, 1, 16, 1).unwrap(), 10.0);
        let u = MassVector::uniform(&[vec![0.0], vec![2.0]]);
        let p = MassVector::point_mass(vec![1.0]);
        assert!((emd_exact(&u, &p, 2, 16, 1).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn matches_permutation_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..50 {
            let n = rng.random_range(1..6);
            let x: Vec<f64> = (0..n).map(|_| rng.random_range(1..30) as f64).collect();
            let y: Vec<f64> = (0..n).map(|_| rng.random_range(1..30) as f64).collect();
            let mu = MassVector::uniform(&x.iter().map(|&v| vec![v]).collect::<Vec<_>>());
            let nu = MassVector::uniform(&y.iter().map(|&v| vec![v]).collect::<Vec<_>>());
            for z in 1..=2 {
                let got = emd_exact(&mu, &nu, z, 32, 1).unwrap();
                assert!((got - perm_oracle(&x, &y, z)).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn plan_moves_all_mass() {
        let mu = MassVector::uniform(&[vec![1.0, 1.0], vec![4.0, 5.0], vec![9.0, 2.0]]);
        let nu = MassVector::uniform(&[vec![2.0, 2.0], vec![8.0, 8.0]]);
        let plan = transport_plan(&mu, &nu, 2, 16, 2).unwrap();
        let moved = plan.flows.iter().fold(Mass::zero(), |a, f| a + f.2);
        assert_eq!(moved, Mass::from_integer(1));
    }

    #[test]
    fn imbalance_pays_penalty() {
        let mu = MassVector::new(vec![(vec![1.0], Mass::from_integer(2))]);
        let nu = MassVector::point_mass(vec![1.0]);
        assert_eq!(emd_exact(&mu, &nu, 1, 8, 1).unwrap(), 8.0);
    }

    #[test]
    fn refuses_large_support() {
        let big = MassVector::uniform(&(0..65).map(|i| vec![i as f64]).collect::<Vec<_>>());
        assert!(matches!(emd_exact(&big, &big, 1, 128, 1), Err(Error::SupportTooLarge { .. })));
    }
}
