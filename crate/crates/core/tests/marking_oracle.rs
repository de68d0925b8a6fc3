//! Greedy minimality against the brute-force subset oracle on small
//! partitions, across seeded partitions, parameter sets, and bulk
//! parameters.

use afemlab::axioms::RefinementPairGen;
use afemlab::marking::{
    dorfler_greedy, exhaustive_min_dorfler_cardinality, verify_optimal_dorfler,
};
use afemlab::{EstimatorParams, Partition};
use num_bigint::BigUint;
use num_traits::ToPrimitive;

#[test]
fn greedy_cardinality_matches_exhaustive_oracle_below_13_leaves() {
    let params = [
        EstimatorParams::new(0.0625, 1.0, 2.496969745179243, 3).unwrap(),
        EstimatorParams::new(0.4, 0.15, 1.7, 3).unwrap(),
        EstimatorParams::new(1.3, 1.9, 6.0, 2).unwrap(),
    ];
    let gen = RefinementPairGen::new(0x04AC1E);
    let mut checked = 0u32;
    for p in &params {
        for index in 0..400u64 {
            let t = gen.chain(index, p.m, 2).pop().unwrap();
            if t.cardinality() > BigUint::from(12u32) {
                continue;
            }
            // Low-discrepancy thetas, away from subset-sum boundaries by
            // construction of the golden-ratio sequence.
            let theta = 0.05 + 0.9 * ((index as f64) * 0.618_033_988_749_894_9).fract();
            let greedy = dorfler_greedy(p, &t, theta).unwrap();
            let oracle = exhaustive_min_dorfler_cardinality(p, &t, theta).unwrap();
            assert_eq!(
                greedy.count(&t).unwrap().to_u64().unwrap(),
                oracle,
                "params {p:?}, index {index}, theta {theta}"
            );
            let verdict = verify_optimal_dorfler(p, &t, &greedy, theta).unwrap();
            assert!(verdict.satisfies && verdict.minimal);
            checked += 1;
        }
    }
    assert!(checked >= 600, "only {checked} small partitions sampled");
}

#[test]
fn exhaustive_oracle_rejects_oversized_partitions() {
    let p = EstimatorParams::new(0.1, 1.0, 2.0, 8).unwrap();
    let mut t = Partition::initial(8).unwrap();
    for _ in 0..13 {
        t = t
            .refine(&afemlab::MarkedSet::singleton(t.zero_element()))
            .unwrap();
    }
    assert!(exhaustive_min_dorfler_cardinality(&p, &t, 0.5).is_err());
}
