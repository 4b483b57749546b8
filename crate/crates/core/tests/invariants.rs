use std::collections::BTreeMap;

use kzstream_core::dynamic::{OffsetLayout, Rounder};
use kzstream_core::grid::{EmbeddingMode, Mass, MassVector, ShiftedGridEmbedding};
use kzstream_core::merge_reduce::{MergeReduceConfig, MergeReduceTree};
use kzstream_core::sampling::InclusionProb;
use kzstream_core::sketch::cauchy::CauchySketch;
use kzstream_core::sketch::sparse::SparseRecoverySketch;
use kzstream_core::transport::emd_exact;
use kzstream_core::{CenterSet, ClusterParams, Point, WeightedPoint};
use proptest::prelude::*;

fn measure(pts: &[(Vec<u32>, i128)]) -> MassVector {
    let total: i128 = pts.iter().map(|p| p.1).sum();
    MassVector::new(pts.iter().map(|(c, w)| (c.iter().map(|&v| v as f64).collect(), Mass::new(*w, total))).collect())
}

fn atoms(d: usize, delta: u32) -> impl Strategy<Value = Vec<(Vec<u32>, i128)>> {
    prop::collection::vec((prop::collection::vec(1..=delta, d), 1..6i128), 1..8)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn cauchy_state_is_linear(ups in prop::collection::vec((0..50u64, -1000..1000i128), 0..60), split in 0..60usize, seed in any::<u64>()) {
        let mut whole = CauchySketch::new(32, seed);
        let (mut a, mut b) = (CauchySketch::new(32, seed), CauchySketch::new(32, seed));
        for (i, &(k, v)) in ups.iter().enumerate() {
            whole.update(k, v);
            if i < split { a.update(k, v) } else { b.update(k, v) }
        }
        a.merge(&b).unwrap();
        prop_assert_eq!(&a, &whole);
        for &(k, v) in &ups {
            whole.update(k, -v);
        }
        prop_assert_eq!(whole, CauchySketch::new(32, seed));
    }

    #[test]
    fn sparse_recovery_returns_the_net_vector(ups in prop::collection::vec((0..20u128, -5..6i64), 0..80), seed in any::<u64>()) {
        let mut sk = SparseRecoverySketch::new(24, seed);
        let mut net: BTreeMap<u128, i64> = BTreeMap::new();
        for &(k, v) in &ups {
            sk.update(k << 90 | k, v, 0).unwrap();
            *net.entry(k << 90 | k).or_insert(0) += v;
        }
        net.retain(|_, v| *v != 0);
        let got: BTreeMap<u128, i64> = sk.decode().unwrap().into_iter().map(|(k, r)| (k, r.count)).collect();
        prop_assert_eq!(got, net);
    }

    #[test]
    fn grid_norm_never_undercuts_emd(mu in atoms(2, 32), nu in atoms(2, 32), seed in any::<u64>()) {
        let (mu, nu) = (measure(&mu), measure(&nu));
        let emd = emd_exact(&mu, &nu, 1, 32, 2).unwrap();
        let emb = ShiftedGridEmbedding::random(2, 32, EmbeddingMode::Emd, seed).unwrap();
        let g = emb.norm_of_difference(&mu, &nu).unwrap();
        prop_assert!(emd <= 2f64.sqrt() / 2.0 * g * (1.0 + 1e-12));
    }

    #[test]
    fn identical_measures_embed_to_zero(mu in atoms(3, 16), seed in any::<u64>()) {
        let mu = measure(&mu);
        let emb = ShiftedGridEmbedding::random(3, 16, EmbeddingMode::Wass { z: 2 }, seed).unwrap();
        prop_assert_eq!(emb.norm_of_difference(&mu, &mu).unwrap(), 0.0);
    }

    #[test]
    fn point_ids_round_trip(coords in prop::collection::vec(1..=1024u32, 1..5)) {
        let d = coords.len();
        let p = Point::new(coords);
        prop_assert_eq!(Point::from_id(p.id(1024).unwrap(), d, 1024), p);
    }

    #[test]
    fn inclusion_prob_never_rounds_down(p in 1e-9..1.0f64) {
        let q = InclusionProb::at_least(p);
        prop_assert!(q.prob() >= p);
        prop_assert!(q.denom() >= 1);
    }

    #[test]
    fn offset_codes_pack_and_unpack(x in prop::collection::vec(1..=64u32, 2), c in prop::collection::vec(prop::collection::vec(1..=64u32, 2), 1..4)) {
        let centers = CenterSet::new(c.iter().map(|v| v.iter().map(|&a| a as f64).collect()).collect());
        let r = Rounder::from_base(1.05).unwrap();
        let layout = OffsetLayout::new(2, centers.len(), &r, 1.0, 192.0).unwrap();
        let code = r.encode(&[x[0] as f64, x[1] as f64], &centers).unwrap();
        prop_assert_eq!(layout.unpack(layout.pack(&code).unwrap()), code);
    }

    #[test]
    fn merge_reduce_keeps_weight_when_nothing_is_dropped(n in 1..120usize, seed in any::<u64>()) {
        let params = ClusterParams::new(1, 2, 0.5, 1, 64, seed).unwrap();
        let mut t = MergeReduceTree::new(MergeReduceConfig::with_constant(&params, n as u64, 40.0, Some(8)));
        for i in 0..n {
            t.insert(WeightedPoint::unit(vec![1.0 + (i % 64) as f64])).unwrap();
        }
        // reduce size exceeds every merged buffer, so nothing is dropped
        prop_assert_eq!(t.query().total_weight(), n as f64);
    }
}
