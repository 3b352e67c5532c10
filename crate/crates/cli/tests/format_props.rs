//! Property tests for the on-disk formats: arbitrary finite data survives
//! write -> read -> write byte-identically, and the in-memory value
//! round-trips exactly.

use actpred::format;
use actpred_core::{ActivationStore, CategoryId, PhiModel, PhiVariant};
use proptest::prelude::*;
use tempfile::TempDir;

fn finite_f32() -> impl Strategy<Value = f32> {
    // Includes subnormals and signed zero; excludes NaN and infinities,
    // whose payloads are not format concerns.
    any::<f32>().prop_filter("finite", |x| x.is_finite())
}

fn store_strategy() -> impl Strategy<Value = ActivationStore> {
    (1usize..=5).prop_flat_map(|dim| {
        proptest::collection::vec(
            (any::<CategoryId>(), proptest::collection::vec(finite_f32(), dim)),
            1..20,
        )
        .prop_map(move |rows| {
            let samples = rows
                .into_iter()
                .map(|(c, v)| (c, v.into_iter().map(|x| x as f64).collect()))
                .collect();
            ActivationStore::from_samples(dim, samples).unwrap()
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn store_roundtrip_is_exact(store in store_strategy()) {
        let tmp = TempDir::new().unwrap();
        let p1 = tmp.path().join("a.actv");
        let p2 = tmp.path().join("b.actv");
        format::write_store(&p1, &store).unwrap();
        let back = format::read_store_binary(&p1).unwrap();
        prop_assert_eq!(&back, &store);
        format::write_store(&p2, &back).unwrap();
        prop_assert_eq!(std::fs::read(&p1).unwrap(), std::fs::read(&p2).unwrap());
    }

    #[test]
    fn checkpoint_roundtrip_is_exact(
        dim in 1usize..5,
        two_layer in any::<bool>(),
        seed in any::<u64>(),
    ) {
        let variant = if two_layer { PhiVariant::TwoLayer } else { PhiVariant::Linear };
        // Parameters from raw bits, filtered to finite values.
        let mut state = seed;
        let params: Vec<f64> = (0..variant.param_count(dim))
            .map(|_| {
                state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                let x = f64::from_bits(state);
                if x.is_finite() { x } else { (state >> 11) as f64 * 1e-6 }
            })
            .collect();
        let model = PhiModel::from_params(dim, variant, params).unwrap();

        let tmp = TempDir::new().unwrap();
        let p1 = tmp.path().join("a.phim");
        let p2 = tmp.path().join("b.phim");
        format::write_checkpoint(&p1, &model).unwrap();
        let back = format::read_checkpoint(&p1).unwrap();
        prop_assert_eq!(&back, &model);
        format::write_checkpoint(&p2, &back).unwrap();
        prop_assert_eq!(std::fs::read(&p1).unwrap(), std::fs::read(&p2).unwrap());
    }
}
