//! Points, weights, center sets and the clustering cost.

use alloc::vec::Vec;
use num_rational::Ratio;
use num_traits::{ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::params::ClusterParams;

/// Exact nonnegative weight.
pub type Weight = Ratio<u128>;

pub fn unit_weight() -> Weight {
    Ratio::from_integer(1)
}

pub fn weight_to_f64(w: &Weight) -> f64 {
    let n = *w.numer() as f64;
    let d = *w.denom() as f64;
    n / d
}

/// Lattice point in [1, delta]^d.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Point {
    coords: Vec<u32>,
}

impl Point {
    pub fn new(coords: Vec<u32>) -> Self {
        Point { coords }
    }

    pub fn checked(coords: Vec<u32>, d: usize, delta: u64) -> Result<Self> {
        let p = Point { coords };
        p.validate(d, delta)?;
        Ok(p)
    }

    pub fn validate(&self, d: usize, delta: u64) -> Result<()> {
        if self.coords.len() != d {
            return Err(Error::DimensionMismatch { expected: d, got: self.coords.len() });
        }
        for &c in &self.coords {
            if c == 0 || c as u64 > delta {
                return Err(Error::OutOfRange { value: c as i64, delta });
            }
        }
        Ok(())
    }

    pub fn coords(&self) -> &[u32] {
        &self.coords
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.coords.iter().map(|&c| c as f64).collect()
    }

    /// Mixed-radix id: sum of (c_i - 1) * delta^(i-1).
    pub fn id(&self, delta: u64) -> Result<u128> {
        let mut id: u128 = 0;
        let mut radix: u128 = 1;
        for &c in &self.coords {
            let term = radix
                .checked_mul((c as u128).saturating_sub(1))
                .ok_or(Error::Overflow("point id"))?;
            id = id.checked_add(term).ok_or(Error::Overflow("point id"))?;
            radix = radix.checked_mul(delta as u128).unwrap_or(u128::MAX);
        }
        Ok(id)
    }

    pub fn from_id(mut id: u128, d: usize, delta: u64) -> Self {
        let mut coords = Vec::with_capacity(d);
        for _ in 0..d {
            coords.push((id % delta as u128) as u32 + 1);
            id /= delta as u128;
        }
        Point { coords }
    }
}

/// A point with real coordinates and an exact positive weight.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedPoint {
    pub coords: Vec<f64>,
    pub weight: Weight,
}

impl WeightedPoint {
    pub fn new(coords: Vec<f64>, weight: Weight) -> Self {
        WeightedPoint { coords, weight }
    }

    pub fn unit(coords: Vec<f64>) -> Self {
        WeightedPoint { coords, weight: unit_weight() }
    }

    pub fn from_point(p: &Point) -> Self {
        WeightedPoint::unit(p.to_f64())
    }

    pub fn w(&self) -> f64 {
        weight_to_f64(&self.weight)
    }
}

pub fn unit_points(coords: &[Vec<f64>]) -> Vec<WeightedPoint> {
    coords.iter().map(|c| WeightedPoint::unit(c.clone())).collect()
}

/// Ordered weighted points with their parameters.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub points: Vec<WeightedPoint>,
    pub params: ClusterParams,
}

impl Dataset {
    pub fn new(points: Vec<WeightedPoint>, params: ClusterParams) -> Result<Self> {
        params.validate()?;
        for p in &points {
            if p.coords.len() != params.d {
                return Err(Error::DimensionMismatch { expected: params.d, got: p.coords.len() });
            }
            for &c in &p.coords {
                if !(c >= 1.0 && c <= params.delta as f64) || libm::trunc(c) != c {
                    return Err(Error::OutOfRange { value: c as i64, delta: params.delta });
                }
            }
        }
        let points = points.into_iter().filter(|p| !p.weight.is_zero()).collect();
        Ok(Dataset { points, params })
    }

    pub fn from_lattice(points: &[Point], params: ClusterParams) -> Result<Self> {
        for p in points {
            p.validate(params.d, params.delta)?;
        }
        Ok(Dataset { points: points.iter().map(WeightedPoint::from_point).collect(), params })
    }

    pub fn total_weight(&self) -> f64 {
        self.points.iter().map(|p| p.w()).sum()
    }
}

/// Centers with real coordinates.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CenterSet {
    pub centers: Vec<Vec<f64>>,
}

impl CenterSet {
    pub fn new(centers: Vec<Vec<f64>>) -> Self {
        CenterSet { centers }
    }

    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    /// Nearest center index and its dist_z; ties go to the lowest index.
    pub fn nearest(&self, x: &[f64], z: u32) -> (usize, f64) {
        let mut best = (0usize, f64::INFINITY);
        for (j, c) in self.centers.iter().enumerate() {
            let v = pow_z(sq_dist(x, c), z);
            if v < best.1 {
                best = (j, v);
            }
        }
        best
    }
}

pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for (x, y) in a.iter().zip(b) {
        let t = x - y;
        s += t * t;
    }
    s
}

pub(crate) fn powi(x: f64, e: u32) -> f64 {
    let mut r = 1.0;
    let mut b = x;
    let mut e = e;
    while e > 0 {
        if e & 1 == 1 {
            r *= b;
        }
        b *= b;
        e >>= 1;
    }
    r
}

/// Raise a squared distance to the z/2 power.
pub(crate) fn pow_z(sq: f64, z: u32) -> f64 {
    match z {
        1 => libm::sqrt(sq),
        2 => sq,
        _ if z % 2 == 0 => powi(sq, z / 2),
        _ => powi(libm::sqrt(sq), z),
    }
}

/// Euclidean distance raised to the power z.
pub fn dist_z(a: &[f64], b: &[f64], z: u32) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch { expected: a.len(), got: b.len() });
    }
    Ok(pow_z(sq_dist(a, b), z))
}

/// Compensated summation.
#[derive(Debug, Clone, Copy, Default)]
pub struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CostResult {
    pub cost: f64,
    pub assignment: Vec<usize>,
}

/// Weighted clustering cost with the nearest-center assignment.
pub fn cost(points: &[WeightedPoint], centers: &CenterSet, z: u32) -> Result<CostResult> {
    if points.is_empty() {
        return Ok(CostResult { cost: 0.0, assignment: Vec::new() });
    }
    if centers.is_empty() {
        return Err(Error::EmptyCenters);
    }
    let d = centers.centers[0].len();
    for c in &centers.centers {
        if c.len() != d {
            return Err(Error::DimensionMismatch { expected: d, got: c.len() });
        }
    }
    let mut total = KahanSum::default();
    let mut assignment = Vec::with_capacity(points.len());
    for p in points {
        if p.coords.len() != d {
            return Err(Error::DimensionMismatch { expected: d, got: p.coords.len() });
        }
        let (j, v) = centers.nearest(&p.coords, z);
        total.add(p.w() * v);
        assignment.push(j);
    }
    Ok(CostResult { cost: total.value(), assignment })
}

pub fn cost_value(points: &[WeightedPoint], centers: &CenterSet, z: u32) -> Result<f64> {
    cost(points, centers, z).map(|r| r.cost)
}

pub fn total_weight(points: &[WeightedPoint]) -> f64 {
    let mut s = KahanSum::default();
    for p in points {
        s.add(p.w());
    }
    s.value()
}

pub fn ratio_to_f64(r: &Ratio<i128>) -> f64 {
    r.numer().to_f64().unwrap_or(f64::NAN) / r.denom().to_f64().unwrap_or(f64::NAN)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;

    fn pts(xs: &[f64]) -> Vec<WeightedPoint> {
        xs.iter().map(|&x| WeightedPoint::unit(vec![x])).collect()
    }

    #[test]
    fn dist_examples() {
        assert_eq!(dist_z(&[0.0, 0.0], &[3.0, 4.0], 1).unwrap(), 5.0);
        assert_eq!(dist_z(&[0.0, 0.0], &[3.0, 4.0], 2).unwrap(), 25.0);
        assert_eq!(dist_z(&[2.5, -1.0], &[2.5, -1.0], 3).unwrap(), 0.0);
        assert!(dist_z(&[0.0], &[0.0, 1.0], 1).is_err());
    }

    #[test]
    fn cost_examples() {
        let x = vec![WeightedPoint::unit(vec![0.0, 0.0]), WeightedPoint::unit(vec![3.0, 4.0])];
        let c = CenterSet::new(vec![vec![0.0, 0.0]]);
        assert_eq!(cost_value(&x, &c, 1).unwrap(), 5.0);
        let c2 = CenterSet::new(vec![vec![0.0, 0.0], vec![3.0, 4.0]]);
        for z in 1..5 {
            assert_eq!(cost_value(&x, &c2, z).unwrap(), 0.0);
        }
        let line = pts(&[0.0, 1.0, 10.0]);
        assert_eq!(cost_value(&line, &CenterSet::new(vec![vec![0.5]]), 1).unwrap(), 10.5);
    }

    #[test]
    fn cost_errors_and_empty() {
        assert_eq!(cost(&pts(&[1.0]), &CenterSet::default(), 1), Err(Error::EmptyCenters));
        assert_eq!(cost_value(&[], &CenterSet::default(), 1).unwrap(), 0.0);
    }

    #[test]
    fn assignment_ties_go_to_lowest_index() {
        let c = CenterSet::new(vec![vec![0.0], vec![2.0]]);
        let r = cost(&pts(&[1.0]), &c, 2).unwrap();
        assert_eq!(r.assignment, vec![0]);
    }

    #[test]
    fn point_id_roundtrip() {
        let p = Point::checked(vec![3, 64, 1], 3, 64).unwrap();
        let id = p.id(64).unwrap();
        assert_eq!(id, 2 + 63 * 64);
        assert_eq!(Point::from_id(id, 3, 64), p);
        assert!(Point::checked(vec![0, 1], 2, 64).is_err());
        assert!(Point::checked(vec![65, 1], 2, 64).is_err());
    }

    #[test]
    fn fact_5_6_holds_on_random_samples() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..10_000 {
            let a: f64 = rng.random_range(0.0..10.0);
            let b: f64 = rng.random_range(0.0..10.0);
            let eps: f64 = rng.random_range(0.01..1.0);
            let p: f64 = rng.random_range(1.0..4.0);
            let lhs = libm::pow(a + b, p);
            let rhs = (1.0 + eps) * libm::pow(a, p) + libm::pow(1.0 + 2.0 * p / eps, p) * libm::pow(b, p);
            assert!(lhs <= rhs * (1.0 + 1e-12), "a={a} b={b} eps={eps} p={p}");
        }
    }

    proptest! {
        #[test]
        fn generalized_triangle(x in prop::collection::vec(-50i32..50, 3), y in prop::collection::vec(-50i32..50, 3),
                                w in prop::collection::vec(-50i32..50, 3), z in 1u32..=4) {
            // integer coordinates and even powers keep the check exact in f64
            let f = |v: &Vec<i32>| v.iter().map(|&c| c as f64).collect::<Vec<f64>>();
            let (x, y, w) = (f(&x), f(&y), f(&w));
            let lhs = dist_z(&x, &y, z).unwrap();
            let rhs = libm::pow(2.0, (z - 1) as f64) * (dist_z(&x, &w, z).unwrap() + dist_z(&w, &y, z).unwrap());
            prop_assert!(lhs <= rhs * (1.0 + 1e-12));
        }

        #[test]
        fn cost_monotone_in_centers(xs in prop::collection::vec(0.0f64..100.0, 1..30),
                                    cs in prop::collection::vec(0.0f64..100.0, 1..5), extra in 0.0f64..100.0, z in 1u32..=3) {
            let p = pts(&xs);
            let c = CenterSet::new(cs.iter().map(|&c| vec![c]).collect());
            let mut c2 = c.clone();
            c2.centers.push(vec![extra]);
            prop_assert!(cost_value(&p, &c2, z).unwrap() <= cost_value(&p, &c, z).unwrap());
        }

        #[test]
        fn cost_linear_in_weights(xs in prop::collection::vec(0.0f64..100.0, 1..30), c in 0.0f64..100.0, z in 1u32..=3) {
            let p = pts(&xs);
            let doubled: Vec<WeightedPoint> = p.iter().map(|q| WeightedPoint::new(q.coords.clone(), q.weight * 2)).collect();
            let cs = CenterSet::new(vec![vec![c]]);
            let a = cost_value(&p, &cs, z).unwrap();
            let b = cost_value(&doubled, &cs, z).unwrap();
            prop_assert!((b - 2.0 * a).abs() <= 1e-9 * a.max(1.0));
        }
    }
}
