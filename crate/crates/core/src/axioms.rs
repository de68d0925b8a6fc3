//! Executable checkers for the adaptivity axioms with this construction's
//! exact constants, plus a seeded generator of nested partition pairs and
//! chains to drive them over.
//!
//! Every checker evaluates the squared quantities natively (the unsquared
//! stability bound follows from `|a-b| <= sqrt(|a^2-b^2|)`), and reports a
//! relative slack: the margin `1 - lhs/rhs` of the inequality, negative when
//! violated. Equality axioms report `-|lhs/rhs - 1|`.

use crate::error::{Error, Result};
use crate::estimator::{delta_sq, indicator_sq, nested_class_sums, total_sq, EstimatorParams};
use crate::logscalar::LogScalar;
use crate::mesh::{Element, MarkedSet, Partition};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

/// Relative slack allowed on inequality checks.
pub const INEQUALITY_TOL: f64 = 1e-9;
/// Relative deviation allowed for the orthogonality identity.
pub const ORTHOGONALITY_TOL: f64 = 1e-12;
/// Relative deviation allowed for the efficiency identity.
pub const EFFICIENCY_TOL: f64 = 1e-13;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum AxiomId {
    #[serde(rename = "A1")]
    Stability,
    #[serde(rename = "A2")]
    Reduction,
    #[serde(rename = "A3")]
    DiscreteReliability,
    #[serde(rename = "A4")]
    QuasiOrthogonality,
    #[serde(rename = "A1'")]
    Efficiency,
    #[serde(rename = "A4'")]
    Orthogonality,
    #[serde(rename = "monotonicity")]
    LocalMonotonicity,
}

/// Outcome of one or more checks of a single axiom under fixed parameters.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct AxiomReport {
    pub schema: u32,
    pub axiom: AxiomId,
    pub params: EstimatorParams,
    /// Instances checked.
    pub pairs: u64,
    /// The published constant of the axiom as checked.
    pub constant: f64,
    pub tolerance: f64,
    /// Most negative relative margin observed.
    pub worst_slack: f64,
    /// Instances in which the element containing zero was refined.
    pub t0_refined: u64,
    pub t0_unrefined: u64,
    pub pass: bool,
}

impl AxiomReport {
    fn single(
        axiom: AxiomId,
        params: EstimatorParams,
        constant: f64,
        tolerance: f64,
        slack: f64,
        t0_refined: bool,
    ) -> AxiomReport {
        AxiomReport {
            schema: 1,
            axiom,
            params,
            pairs: 1,
            constant,
            tolerance,
            worst_slack: slack,
            t0_refined: u64::from(t0_refined),
            t0_unrefined: u64::from(!t0_refined),
            pass: slack >= -tolerance,
        }
    }

    /// Fold another report of the same axiom and parameters into this one.
    pub fn merge(&mut self, other: &AxiomReport) {
        debug_assert_eq!(self.axiom, other.axiom);
        self.pairs += other.pairs;
        self.worst_slack = self.worst_slack.min(other.worst_slack);
        self.t0_refined += other.t0_refined;
        self.t0_unrefined += other.t0_unrefined;
        self.pass = self.pass && other.pass;
    }
}

/// Margin of `lhs <= rhs`, relative to `rhs`.
fn inequality_slack(lhs: LogScalar, rhs: LogScalar) -> f64 {
    match (lhs.is_zero(), rhs.is_zero()) {
        (true, true) => 0.0,
        (true, false) => 1.0,
        (false, true) => f64::NEG_INFINITY,
        (false, false) => 1.0 - lhs.ratio(rhs),
    }
}

/// Margin of `lhs = rhs`, as `-|lhs/rhs - 1|`.
fn equality_slack(lhs: LogScalar, rhs: LogScalar) -> f64 {
    match (lhs.is_zero(), rhs.is_zero()) {
        (true, true) => 0.0,
        (true, false) | (false, true) => f64::NEG_INFINITY,
        (false, false) => -(lhs.ratio(rhs) - 1.0).abs(),
    }
}

/// Stability: `|eta_t(common) - eta_t*(common)| <= delta(t, t*)`, checked in
/// the squared form `eta_t^2(common) - eta_t*^2(common) <= delta^2`.
pub fn check_stability(
    p: &EstimatorParams,
    t: &Partition,
    t_star: &Partition,
) -> Result<AxiomReport> {
    let sums = nested_class_sums(p, t, t_star)?;
    let (lhs, _) = sums.common_coarse().sub_ge(sums.common_fine());
    let rhs = sums.delta_sq(p);
    Ok(AxiomReport::single(
        AxiomId::Stability,
        *p,
        1.0,
        INEQUALITY_TOL,
        inequality_slack(lhs, rhs),
        !sums.t0_common,
    ))
}

/// Reduction: `eta_t*^2(t* \ t) <= rho^2 eta_t^2(t \ t*)` with
/// `rho = 2^(-min(alpha, beta)/2)`.
pub fn check_reduction(
    p: &EstimatorParams,
    t: &Partition,
    t_star: &Partition,
) -> Result<AxiomReport> {
    if t == t_star {
        return Err(Error::InvalidParameter(
            "reduction requires a strict refinement".into(),
        ));
    }
    let sums = nested_class_sums(p, t, t_star)?;
    let rho_sq_log2 = -p.alpha.min(p.beta);
    let lhs = sums.only_fine();
    let rhs = sums.only_coarse().scale_exp2(rho_sq_log2);
    Ok(AxiomReport::single(
        AxiomId::Reduction,
        *p,
        (rho_sq_log2 / 2.0).exp2(),
        INEQUALITY_TOL,
        inequality_slack(lhs, rhs),
        !sums.t0_common,
    ))
}

/// Discrete reliability: `delta(t, t*)^2 <= K eta_t^2(t \ t*)`.
pub fn check_discrete_reliability(
    p: &EstimatorParams,
    t: &Partition,
    t_star: &Partition,
) -> Result<AxiomReport> {
    let sums = nested_class_sums(p, t, t_star)?;
    let lhs = sums.delta_sq(p);
    let rhs = sums.only_coarse().scale_exp2(p.k.log2());
    Ok(AxiomReport::single(
        AxiomId::DiscreteReliability,
        *p,
        p.k,
        INEQUALITY_TOL,
        inequality_slack(lhs, rhs),
        !sums.t0_common,
    ))
}

/// Quasi-orthogonality: for a nested chain,
/// `sum_k delta(t_{k+1}, t_k)^2 <= eta_{t_1}^2(t_1)`.
pub fn check_quasi_orthogonality(p: &EstimatorParams, chain: &[Partition]) -> Result<AxiomReport> {
    if chain.is_empty() {
        return Err(Error::InvalidParameter("empty chain".into()));
    }
    let mut deltas = Vec::with_capacity(chain.len());
    for pair in chain.windows(2) {
        deltas.push(delta_sq(p, &pair[0], &pair[1])?);
    }
    let lhs = LogScalar::sum(deltas);
    let rhs = total_sq(p, &chain[0])?;
    let refined = chain[0].g0() != chain[chain.len() - 1].g0();
    Ok(AxiomReport::single(
        AxiomId::QuasiOrthogonality,
        *p,
        1.0,
        INEQUALITY_TOL,
        inequality_slack(lhs, rhs),
        refined,
    ))
}

/// Efficiency: `delta(t) = eta_t(t)` with constant one. The distance to the
/// finest partition is re-derived through an auxiliary uniform refinement
/// (`delta(t, t')^2 + eta_{t'}^2(t')` telescopes to `delta(t)^2`), so the
/// identity is checked across two genuinely different evaluation routes.
pub fn check_efficiency(p: &EstimatorParams, t: &Partition) -> Result<AxiomReport> {
    let mut all = MarkedSet::new();
    for m in 0..=p.m {
        all.push_unit_cell(m);
    }
    let mut fine = t.clone();
    for _ in 0..3 {
        fine = fine.refine(&all)?;
    }
    let lhs = delta_sq(p, t, &fine)? + total_sq(p, &fine)?;
    let rhs = total_sq(p, t)?;
    Ok(AxiomReport::single(
        AxiomId::Efficiency,
        *p,
        1.0,
        EFFICIENCY_TOL,
        equality_slack(lhs, rhs),
        t.g0() > 0,
    ))
}

/// Orthogonality: for `t <= t* <= t°`,
/// `delta(t°, t*)^2 + delta(t*, t)^2 = delta(t°, t)^2`.
pub fn check_orthogonality(
    p: &EstimatorParams,
    t: &Partition,
    t_star: &Partition,
    t_circ: &Partition,
) -> Result<AxiomReport> {
    let lhs = delta_sq(p, t_star, t_circ)? + delta_sq(p, t, t_star)?;
    let rhs = delta_sq(p, t, t_circ)?;
    Ok(AxiomReport::single(
        AxiomId::Orthogonality,
        *p,
        1.0,
        ORTHOGONALITY_TOL,
        equality_slack(lhs, rhs),
        t.g0() != t_circ.g0(),
    ))
}

/// Local monotonicity: the squared indicators of the two children of one
/// bisected leaf sum to at most the parent's.
pub fn check_local_monotonicity(
    p: &EstimatorParams,
    t: &Partition,
    leaf: &Element,
) -> Result<AxiomReport> {
    let parent = indicator_sq(p, t, leaf)?;
    let fine = t.refine(&MarkedSet::singleton(*leaf))?;
    let (c1, c2) = leaf.bisect();
    let children = indicator_sq(p, &fine, &c1)? + indicator_sq(p, &fine, &c2)?;
    Ok(AxiomReport::single(
        AxiomId::LocalMonotonicity,
        *p,
        1.0,
        INEQUALITY_TOL,
        inequality_slack(children, parent),
        leaf.contains_zero(),
    ))
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seeded generator of nested partition pairs and chains. Instance rngs are
/// derived per index, so results do not depend on evaluation order or worker
/// count.
#[derive(Clone, Copy, Debug)]
pub struct RefinementPairGen {
    pub seed: u64,
    /// Largest number of marking rounds between the two ends of a pair.
    pub max_extra_rounds: u32,
    /// Probability of marking each leaf in one round.
    pub density: f64,
}

impl RefinementPairGen {
    pub fn new(seed: u64) -> RefinementPairGen {
        RefinementPairGen {
            seed,
            max_extra_rounds: 4,
            density: 0.3,
        }
    }

    fn rng(&self, index: u64, stream: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(splitmix64(
            self.seed ^ splitmix64(index) ^ stream.wrapping_mul(0xA076_1D64_78BD_642F),
        ))
    }

    fn random_marked(&self, rng: &mut ChaCha8Rng, t: &Partition) -> MarkedSet {
        let leaves = t.leaves().expect("generated partitions stay small");
        let mut chosen: Vec<Element> = leaves
            .iter()
            .copied()
            .filter(|_| rng.gen::<f64>() < self.density)
            .collect();
        if chosen.is_empty() {
            chosen.push(leaves[rng.gen_range(0..leaves.len())]);
        }
        MarkedSet::from_elements(chosen)
    }

    /// A nested chain `t_1 <= ... <= t_len`, each link one marking round,
    /// grown from a randomly pre-refined base.
    pub fn chain(&self, index: u64, m: u32, len: u32) -> Vec<Partition> {
        let mut rng = self.rng(index, 0);
        let mut t = Partition::initial(m).expect("m >= 1");
        for _ in 0..rng.gen_range(0..=3u32) {
            let marked = self.random_marked(&mut rng, &t);
            t = t.refine(&marked).expect("marked leaves are leaves");
        }
        let mut chain = vec![t];
        for _ in 1..len.max(1) {
            let marked = self.random_marked(&mut rng, chain.last().unwrap());
            chain.push(
                chain
                    .last()
                    .unwrap()
                    .refine(&marked)
                    .expect("marked leaves are leaves"),
            );
        }
        chain
    }

    /// A nested pair `(t, t*)`, `t* > t`, with a random number of rounds
    /// between them.
    pub fn pair(&self, index: u64, m: u32) -> (Partition, Partition) {
        let rounds = 1 + (splitmix64(self.seed ^ index) % u64::from(self.max_extra_rounds)) as u32;
        let chain = self.chain(index, m, rounds + 1);
        let last = chain.len() - 1;
        (chain[0].clone(), chain[last].clone())
    }
}

/// Configuration of the full property suite.
#[derive(Clone, Copy, Debug)]
pub struct SuiteConfig {
    pub seed: u64,
    /// Instances per axiom per parameter set.
    pub instances: u32,
    /// Random parameter sets checked in addition to the reference one.
    pub random_sets: u32,
}

impl Default for SuiteConfig {
    fn default() -> SuiteConfig {
        SuiteConfig {
            seed: 0,
            instances: 1000,
            random_sets: 5,
        }
    }
}

/// The reference parameter set plus `random_sets` draws with
/// `alpha, beta in [0.05, 2]`, `K in (1, 10]`, `M in 1..=8`.
pub fn parameter_sets(cfg: &SuiteConfig) -> Vec<EstimatorParams> {
    let reference = crate::params::solve_params(0.5, 1.0, 0.1)
        .expect("reference parameters solve")
        .estimator_params();
    let mut sets = vec![reference];
    let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(cfg.seed ^ 0x5E17_AB1E));
    for _ in 0..cfg.random_sets {
        let alpha = rng.gen_range(0.05..=2.0);
        let beta = rng.gen_range(0.05..=2.0);
        let k = 10.0 - rng.gen::<f64>() * 9.0;
        let m = rng.gen_range(1..=8u32);
        sets.push(EstimatorParams::new(alpha, beta, k, m).expect("drawn parameters are valid"));
    }
    sets
}

/// Run every checker over seeded corpora for each parameter set. The first
/// two instances of every corpus are the canonical sharp cases (a lone
/// bisection of the zero element, and of one unit-cell leaf), which witness
/// the reduction factor exactly.
pub fn run_suite(cfg: &SuiteConfig) -> Result<Vec<AxiomReport>> {
    let mut out = Vec::new();
    for (set_index, p) in parameter_sets(cfg).iter().enumerate() {
        out.extend(run_suite_for_params(cfg, p, set_index as u64)?);
    }
    Ok(out)
}

/// Run every checker on one parameter set.
pub fn run_suite_for_params(
    cfg: &SuiteConfig,
    p: &EstimatorParams,
    set_index: u64,
) -> Result<Vec<AxiomReport>> {
    let gen = RefinementPairGen::new(splitmix64(cfg.seed ^ splitmix64(set_index)));
    let mut reports: Vec<Option<AxiomReport>> = vec![None; 7];
    let mut merge = |slot: usize, report: AxiomReport| match &mut reports[slot] {
        Some(existing) => existing.merge(&report),
        none => *none = Some(report),
    };

    for index in 0..u64::from(cfg.instances.max(2)) {
        let (chain, leaf) = instance(&gen, p, index);
        let first = &chain[0];
        let last = &chain[chain.len() - 1];
        let mid = &chain[chain.len() / 2];

        merge(0, check_stability(p, first, last)?);
        merge(1, check_reduction(p, first, last)?);
        merge(2, check_discrete_reliability(p, first, last)?);
        merge(3, check_quasi_orthogonality(p, &chain)?);
        merge(4, check_efficiency(p, first)?);
        merge(5, check_orthogonality(p, first, mid, last)?);
        merge(6, check_local_monotonicity(p, first, &leaf)?);
    }
    Ok(reports
        .into_iter()
        .map(|r| r.expect("instances >= 2"))
        .collect())
}

/// One corpus instance: a nested chain plus a leaf of its first partition.
/// Instances 0 and 1 are the canonical sharp reduction witnesses.
fn instance(gen: &RefinementPairGen, p: &EstimatorParams, index: u64) -> (Vec<Partition>, Element) {
    let t0 = Partition::initial(p.m).expect("m >= 1");
    match index {
        0 => {
            let leaf = t0.zero_element();
            let fine = t0.refine(&MarkedSet::singleton(leaf)).expect("leaf");
            (vec![t0, fine], leaf)
        }
        1 => {
            let leaf = Element::new(1, 0, 0).expect("valid");
            let fine = t0.refine(&MarkedSet::singleton(leaf)).expect("leaf");
            (vec![t0, fine], leaf)
        }
        _ => {
            let mut rng = gen.rng(index, 1);
            let len = rng.gen_range(2..=6u32);
            let chain = gen.chain(index, p.m, len);
            // Bias towards the zero element so its branch of the
            // monotonicity proof is exercised well.
            let leaf = if rng.gen::<f64>() < 0.2 {
                chain[0].zero_element()
            } else {
                let leaves = chain[0].leaves().expect("generated partitions stay small");
                leaves[rng.gen_range(0..leaves.len())]
            };
            (chain, leaf)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::MarkedSet;

    fn reference_params() -> EstimatorParams {
        EstimatorParams::new(0.0625, 1.0, 2.496969745179243, 8).unwrap()
    }

    fn el(m: u32, g: u32, o: u64) -> Element {
        Element::new(m, g, o).unwrap()
    }

    fn ideal_step(t: &Partition) -> Partition {
        t.refine(&MarkedSet::singleton(t.zero_element())).unwrap()
    }

    #[test]
    fn stability_on_identical_partitions_is_zero_vs_zero() {
        let p = reference_params();
        let t = Partition::initial(8).unwrap();
        let r = check_stability(&p, &t, &t).unwrap();
        assert!(r.pass);
        assert_eq!(r.worst_slack, 0.0);
        assert_eq!(r.t0_unrefined, 1);
    }

    #[test]
    fn stability_holds_strictly_on_an_ideal_step() {
        let p = reference_params();
        let t = Partition::initial(8).unwrap();
        let r = check_stability(&p, &t, &ideal_step(&t)).unwrap();
        assert!(r.pass);
        assert!(r.worst_slack > 0.0);
        assert_eq!(r.t0_refined, 1);
    }

    #[test]
    fn reduction_factors_by_case() {
        let p = reference_params();
        let t = Partition::initial(8).unwrap();

        // Zero element refined alone: eta ratio is exactly 2^-alpha = rho^2
        // (alpha < beta here), the sharp witness.
        let r = check_reduction(&p, &t, &ideal_step(&t)).unwrap();
        assert!(r.pass);
        assert!(r.worst_slack.abs() <= 1e-12, "slack {}", r.worst_slack);

        // A single cell leaf refined: ratio 2^-beta against rho^2 = 2^-alpha.
        let fine = t.refine(&MarkedSet::singleton(el(1, 0, 0))).unwrap();
        let r = check_reduction(&p, &t, &fine).unwrap();
        assert!(r.pass);
        let expected = 1.0 - 2f64.powf(-p.beta + p.alpha);
        assert!((r.worst_slack - expected).abs() < 1e-12);
        assert_eq!(r.t0_unrefined, 1);

        assert!(check_reduction(&p, &t, &t).is_err());
    }

    #[test]
    fn discrete_reliability_cases() {
        let p = reference_params();
        let t = Partition::initial(8).unwrap();
        let r = check_discrete_reliability(&p, &t, &t).unwrap();
        assert!(r.pass);
        assert_eq!(r.worst_slack, 0.0);

        // Zero element refined: delta^2 = (1 - 2^-alpha) eta^2 against
        // K eta^2(T0) = eta^2, slack = 2^-alpha.
        let r = check_discrete_reliability(&p, &t, &ideal_step(&t)).unwrap();
        assert!(r.pass);
        assert!((r.worst_slack - 2f64.powf(-p.alpha)).abs() < 1e-12);

        // Unrefined zero element, one shallow cell bisection: constant 1
        // suffices there.
        let fine = t.refine(&MarkedSet::singleton(el(1, 0, 0))).unwrap();
        let sums = nested_class_sums(&p, &t, &fine).unwrap();
        assert!(sums.delta_sq(&p) <= sums.only_coarse());
        let r = check_discrete_reliability(&p, &t, &fine).unwrap();
        assert!(r.pass);
    }

    #[test]
    fn discrete_reliability_constant_requires_k_at_least_two() {
        // For K < 2 the bound with constant K is genuinely violated by deep
        // refinements away from zero: delta^2 approaches K/(K-1) times the
        // refined mass. The checker must report that honestly.
        let p = EstimatorParams::new(1.0, 2.0, 1.1, 1).unwrap();
        let t = Partition::initial(1).unwrap();
        let fine = t.refine(&MarkedSet::singleton(el(1, 0, 0))).unwrap();
        let r = check_discrete_reliability(&p, &t, &fine).unwrap();
        assert!(!r.pass);
        assert!(r.worst_slack < -INEQUALITY_TOL);
        // The honest constant max(K, K/(K-1)) does hold.
        let sums = nested_class_sums(&p, &t, &fine).unwrap();
        let honest = sums
            .only_coarse()
            .scale_exp2((p.k / (p.k - 1.0)).max(p.k).log2());
        assert!(sums.delta_sq(&p) <= honest);
    }

    #[test]
    fn quasi_orthogonality_telescopes() {
        let p = reference_params();
        let t = Partition::initial(8).unwrap();

        let r = check_quasi_orthogonality(&p, std::slice::from_ref(&t)).unwrap();
        assert_eq!(r.worst_slack, 1.0); // empty sum against a positive total

        // Ideal chain of length 11: the sum is (1 - 2^-10 alpha) eta0^2.
        let mut chain = vec![t];
        for _ in 0..10 {
            chain.push(ideal_step(chain.last().unwrap()));
        }
        let r = check_quasi_orthogonality(&p, &chain).unwrap();
        assert!(r.pass);
        let expected = 2f64.powf(-10.0 * p.alpha);
        assert!((r.worst_slack - expected).abs() < 1e-10);

        // Telescoping is exact: partial sums plus the final total equal the
        // initial total.
        let mut deltas = Vec::new();
        for pair in chain.windows(2) {
            deltas.push(delta_sq(&p, &pair[0], &pair[1]).unwrap());
        }
        let lhs = LogScalar::sum(deltas) + total_sq(&p, &chain[10]).unwrap();
        let rhs = total_sq(&p, &chain[0]).unwrap();
        assert!((lhs.ratio(rhs) - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn efficiency_identity_across_routes() {
        let p = reference_params();
        let mut t = Partition::initial(8).unwrap();
        let r = check_efficiency(&p, &t).unwrap();
        assert!(r.pass, "slack {}", r.worst_slack);

        for _ in 0..5 {
            t = ideal_step(&t);
        }
        assert!(check_efficiency(&p, &t).unwrap().pass);

        let t = t
            .refine(&MarkedSet::from_elements([el(2, 0, 0), el(7, 0, 0)]))
            .unwrap();
        assert!(check_efficiency(&p, &t).unwrap().pass);
    }

    #[test]
    fn orthogonality_degenerate_and_strict_triples() {
        let p = reference_params();
        let t = Partition::initial(8).unwrap();
        let r = check_orthogonality(&p, &t, &t, &t).unwrap();
        assert!(r.pass);
        assert_eq!(r.worst_slack, 0.0);

        let ts = ideal_step(&t);
        let tc = ts.refine(&MarkedSet::from_elements([el(3, 0, 0)])).unwrap();
        let r = check_orthogonality(&p, &t, &t, &tc).unwrap();
        assert!(r.pass);
        let r = check_orthogonality(&p, &t, &ts, &tc).unwrap();
        assert!(r.pass, "slack {}", r.worst_slack);
    }

    #[test]
    fn local_monotonicity_cases() {
        let p = reference_params();
        let t = Partition::initial(8).unwrap();

        // Off macro 0 the children sum to exactly 2^-beta of the parent.
        let r = check_local_monotonicity(&p, &t, &el(4, 0, 0)).unwrap();
        assert!(r.pass);
        assert!((r.worst_slack - (1.0 - 2f64.powf(-p.beta))).abs() < 1e-12);
        assert_eq!(r.t0_unrefined, 1);

        // The zero element's children sum to exactly 2^-alpha of it.
        let r = check_local_monotonicity(&p, &t, &t.zero_element()).unwrap();
        assert!(r.pass);
        assert!((r.worst_slack - (1.0 - 2f64.powf(-p.alpha))).abs() < 1e-12);
        assert_eq!(r.t0_refined, 1);

        assert!(check_local_monotonicity(&p, &t, &el(4, 2, 1)).is_err());
    }

    #[test]
    fn generator_is_deterministic_per_index() {
        let gen = RefinementPairGen::new(7);
        let (a1, b1) = gen.pair(42, 4);
        let (a2, b2) = gen.pair(42, 4);
        assert_eq!(a1, a2);
        assert_eq!(b1, b2);
        assert!(b1.is_refinement_of(&a1).unwrap());
        assert_ne!(a1, b1);

        let chain = gen.chain(3, 4, 5);
        assert_eq!(chain.len(), 5);
        for pair in chain.windows(2) {
            assert!(pair[1].is_refinement_of(&pair[0]).unwrap());
            assert_ne!(pair[0], pair[1]);
        }
    }

    #[test]
    fn suite_smoke_run_on_reference_params() {
        let cfg = SuiteConfig {
            seed: 0,
            instances: 60,
            random_sets: 0,
        };
        let reports = run_suite(&cfg).unwrap();
        assert_eq!(reports.len(), 7);
        for r in &reports {
            assert_eq!(r.pairs, 60);
            assert!(r.pass, "{:?} slack {}", r.axiom, r.worst_slack);
            assert!(r.t0_refined >= 1 && r.t0_unrefined >= 1);
        }
        // Sharpness witness: the reduction bound is attained.
        let reduction = reports
            .iter()
            .find(|r| r.axiom == AxiomId::Reduction)
            .unwrap();
        assert!(reduction.worst_slack <= 0.01);
    }
}
