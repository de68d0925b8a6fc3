//! Marking strategies: greedy optimal Dörfler selection, the cyclic
//! prescribed marking, the maximum strategy, ideal (zero-element-only)
//! marking, and a Dörfler-optimality verifier.
//!
//! All markers operate on leaf runs, so they stay exact and cheap on
//! partitions whose cells are uniformly refined, no matter how many leaves
//! those cells hold.

use crate::error::{Error, Result};
use crate::estimator::{self, indicator_sq, subset_sq, total_sq, EstimatorParams};
use crate::logscalar::LogScalar;
use crate::mesh::{Element, MarkedSet, Partition};
use num_bigint::BigUint;
use serde::{Deserialize, Serialize};

/// Relative slack treated as a tie when the greedy accumulator compares
/// against the bulk target. The cyclic trajectory satisfies the Dörfler
/// property with exact equality, so threshold comparisons must absorb
/// rounding of that equality.
const TIE_REL_LOG2: f64 = 1.5e-12;

/// Relative slack of the verifier's satisfaction test.
const VERIFY_REL: f64 = 1e-9;

/// Largest marked set the markers will materialize element by element.
const MAX_MATERIALIZE: u64 = 1 << 22;

/// Which marker drives the adaptive loop.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum MarkerConfig {
    #[serde(rename = "dorfler-greedy")]
    DorflerGreedy { theta: f64 },
    #[serde(rename = "dorfler-prescribed")]
    DorflerPrescribed,
    #[serde(rename = "maximum")]
    Maximum { mu: f64 },
    #[serde(rename = "ideal")]
    Ideal,
}

impl MarkerConfig {
    pub fn validate(&self) -> Result<()> {
        match self {
            MarkerConfig::DorflerGreedy { theta } => check_theta(*theta),
            MarkerConfig::Maximum { mu } => check_mu(*mu),
            _ => Ok(()),
        }
    }
}

fn check_theta(theta: f64) -> Result<()> {
    if theta > 0.0 && theta < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "theta must lie in (0, 1), got {theta}"
        )))
    }
}

fn check_mu(mu: f64) -> Result<()> {
    if mu > 0.0 && mu <= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "mu must lie in (0, 1], got {mu}"
        )))
    }
}

/// A run of equal-value leaves: the indivisible unit the markers work with.
struct ValueRun {
    /// Squared indicator of each single leaf in the run.
    value: LogScalar,
    macro_cell: u32,
    gen: u32,
    count_log2: u32,
    first_offset: u64,
    /// True iff the run covers every leaf of its macro cell.
    whole_cell: bool,
}

impl ValueRun {
    fn count_f64(&self) -> f64 {
        f64::from(self.count_log2).exp2()
    }

    fn subtotal(&self) -> LogScalar {
        self.value.scale_exp2(f64::from(self.count_log2))
    }
}

/// All positive-indicator leaves as runs: the zero element plus the unit
/// cells. Zero-valued macro-0 leaves never enter a marked set.
fn positive_value_runs(p: &EstimatorParams, t: &Partition) -> Result<Vec<ValueRun>> {
    let g0 = t.g0();
    let zero = t.zero_element();
    let mut runs = vec![ValueRun {
        value: indicator_sq(p, t, &zero)?,
        macro_cell: 0,
        gen: zero.gen,
        count_log2: 0,
        first_offset: 0,
        whole_cell: false,
    }];
    for m in 1..=p.m {
        let uniform = t.cell_is_uniform(m);
        t.cell_leaf_runs_offsets(m, &mut |run| {
            runs.push(ValueRun {
                value: LogScalar::from_log2(estimator::leaf_value_log2(p, g0, m, run.gen)),
                macro_cell: m,
                gen: run.gen,
                count_log2: run.count_log2,
                first_offset: run.first_offset,
                whole_cell: uniform,
            });
        })?;
    }
    Ok(runs)
}

/// Append `take` leaves of a run (`None` = the entire run) to a marked set.
/// Whole uniform cells stay compact; anything else is materialized, bounded
/// by `MAX_MATERIALIZE`.
fn push_run(out: &mut MarkedSet, run: &ValueRun, take: Option<u64>) -> Result<()> {
    let take = match take {
        None if run.whole_cell => {
            out.push_unit_cell(run.macro_cell);
            return Ok(());
        }
        None => {
            if run.count_log2 >= 63 {
                return Err(Error::TooManyLeaves {
                    count_log2_bound: run.count_log2,
                });
            }
            1u64 << run.count_log2
        }
        Some(j) => j,
    };
    if take > MAX_MATERIALIZE {
        return Err(Error::TooManyLeaves {
            count_log2_bound: run.count_log2,
        });
    }
    for i in 0..take {
        out.push_element(Element {
            macro_cell: run.macro_cell,
            gen: run.gen,
            offset: run.first_offset + i,
        });
    }
    Ok(())
}

/// Greedy optimal Dörfler marking: leaves sorted by indicator descending
/// (ties by `(macro, gen, offset)` ascending), shortest prefix whose squared
/// indicator mass reaches `theta` times the total. The prefix has minimal
/// cardinality among all sets satisfying the bulk property.
pub fn dorfler_greedy(p: &EstimatorParams, t: &Partition, theta: f64) -> Result<MarkedSet> {
    check_theta(theta)?;
    let total = total_sq(p, t)?;
    if total.is_zero() {
        return Err(Error::ZeroTotalIndicator);
    }
    let target = LogScalar::from_linear(theta) * total;
    let reached = |acc: LogScalar| acc.log2() >= target.log2() - TIE_REL_LOG2;

    let mut runs = positive_value_runs(p, t)?;
    runs.sort_by(|a, b| {
        b.value
            .cmp(&a.value)
            .then(a.macro_cell.cmp(&b.macro_cell))
            .then(a.gen.cmp(&b.gen))
            .then(a.first_offset.cmp(&b.first_offset))
    });

    let mut out = MarkedSet::new();
    let mut acc = LogScalar::ZERO;
    for run in &runs {
        if reached(acc) {
            break;
        }
        let with_run = acc + run.subtotal();
        if !reached(with_run) {
            push_run(&mut out, run, None)?;
            acc = with_run;
            continue;
        }
        // The target falls inside this run: take the minimal prefix. A
        // prefix within relative 1e-9 of the full run is a tie below
        // floating resolution (single leaves of a `2^g`-leaf cell stop being
        // resolvable against the total); ties resolve to the whole run,
        // which is what exact arithmetic selects on the cyclic trajectory.
        let (rem, _) = target.sub_ge(acc);
        let mut take = (rem.log2() - run.value.log2()).exp2().floor().max(1.0);
        while take < run.count_f64() && !reached(acc + run.value.scale_exp2(take.log2())) {
            take += 1.0;
        }
        if take >= run.count_f64() * (1.0 - 1e-9) {
            push_run(&mut out, run, None)?;
            acc = with_run;
        } else {
            if take > MAX_MATERIALIZE as f64 {
                return Err(Error::TooManyLeaves {
                    count_log2_bound: run.count_log2,
                });
            }
            let take = take as u64;
            push_run(&mut out, run, Some(take))?;
            acc += run.value.scale_exp2((take as f64).log2());
        }
    }
    Ok(out)
}

/// The cyclic prescribed marking at step `k`: the zero element together with
/// every leaf of the unit cell with macro index `(k mod M) + 1`.
pub fn dorfler_prescribed(t: &Partition, k: u64) -> MarkedSet {
    let cell = (k % u64::from(t.m())) as u32 + 1;
    let mut set = MarkedSet::singleton(t.zero_element());
    set.push_unit_cell(cell);
    set
}

/// The maximum strategy: every leaf whose squared indicator is at least
/// `mu` times the largest one.
pub fn maximum_strategy(p: &EstimatorParams, t: &Partition, mu: f64) -> Result<MarkedSet> {
    check_mu(mu)?;
    let total = total_sq(p, t)?;
    if total.is_zero() {
        return Err(Error::ZeroTotalIndicator);
    }
    let runs = positive_value_runs(p, t)?;
    let max_value = runs
        .iter()
        .map(|r| r.value)
        .fold(LogScalar::ZERO, LogScalar::max);
    let threshold = LogScalar::from_linear(mu) * max_value;
    let mut out = MarkedSet::new();
    for run in &runs {
        if run.value >= threshold {
            push_run(&mut out, run, None)?;
        }
    }
    Ok(out)
}

/// Ideal marking: exactly the element containing zero.
pub fn ideal_mark(t: &Partition) -> MarkedSet {
    MarkedSet::singleton(t.zero_element())
}

/// Outcome of checking a candidate set against optimal Dörfler marking.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct DorflerVerdict {
    /// Bulk property `eta^2(set) >= theta eta^2(t)` up to relative slack.
    pub satisfies: bool,
    /// `eta^2(set)/eta^2(t) - theta`.
    pub equality_gap: f64,
    /// Cardinality equals the minimal one (exhaustive oracle below 13
    /// leaves, greedy cardinality otherwise).
    pub minimal: bool,
}

pub fn verify_optimal_dorfler(
    p: &EstimatorParams,
    t: &Partition,
    set: &MarkedSet,
    theta: f64,
) -> Result<DorflerVerdict> {
    check_theta(theta)?;
    let total = total_sq(p, t)?;
    let set_sq = subset_sq(p, t, set)?;
    let share = set_sq.ratio(total);
    let satisfies = share >= theta - VERIFY_REL;
    let equality_gap = share - theta;

    let minimal_count = if t.cardinality() <= BigUint::from(12u32) {
        BigUint::from(exhaustive_min_dorfler_cardinality(p, t, theta)?)
    } else {
        dorfler_greedy(p, t, theta)?.count(t)?
    };
    let minimal = set.count(t)? == minimal_count;
    Ok(DorflerVerdict {
        satisfies,
        equality_gap,
        minimal,
    })
}

/// Brute-force minimal cardinality over all leaf subsets satisfying the bulk
/// property. Intended for small partitions; refuses more than 20 leaves.
pub fn exhaustive_min_dorfler_cardinality(
    p: &EstimatorParams,
    t: &Partition,
    theta: f64,
) -> Result<u64> {
    check_theta(theta)?;
    let leaves = t.leaves()?;
    let n = leaves.len();
    if n > 20 {
        return Err(Error::InvalidParameter(format!(
            "exhaustive Dörfler oracle supports at most 20 leaves, got {n}"
        )));
    }
    // Independent linear-domain evaluation.
    let values: Vec<f64> = leaves
        .iter()
        .map(|e| indicator_sq(p, t, e).map(|v| v.to_linear()))
        .collect::<Result<_>>()?;
    let total: f64 = values.iter().sum();
    let threshold = theta * total * (1.0 - VERIFY_REL);

    let mut best = n as u32;
    for mask in 1u32..(1u32 << n) {
        let size = mask.count_ones();
        if size >= best {
            continue;
        }
        let sum: f64 = (0..n)
            .filter(|i| mask & (1 << i) != 0)
            .map(|i| values[i])
            .sum();
        if sum >= threshold {
            best = size;
        }
    }
    Ok(u64::from(best))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::MarkItem;

    fn reference_params() -> EstimatorParams {
        EstimatorParams::new(0.0625, 1.0, 2.496969745179243, 8).unwrap()
    }

    fn el(m: u32, g: u32, o: u64) -> Element {
        Element::new(m, g, o).unwrap()
    }

    #[test]
    fn greedy_takes_single_largest_for_tiny_theta() {
        let p = reference_params();
        let t = Partition::initial(8).unwrap();
        let set = dorfler_greedy(&p, &t, 1e-9).unwrap();
        assert_eq!(set.items(), &[MarkItem::Element(t.zero_element())]);
    }

    #[test]
    fn greedy_takes_all_positive_leaves_for_near_one_theta() {
        let p = reference_params();
        let t = Partition::initial(8).unwrap();
        let set = dorfler_greedy(&p, &t, 1.0 - 1e-12).unwrap();
        assert_eq!(set.count(&t).unwrap(), BigUint::from(9u32));
    }

    #[test]
    fn greedy_at_reference_marks_t0_and_first_cell() {
        let p = reference_params();
        let t = Partition::initial(8).unwrap();
        let set = dorfler_greedy(&p, &t, 0.5).unwrap();
        let total = total_sq(&p, &t).unwrap();
        let share = subset_sq(&p, &t, &set).unwrap().ratio(total);
        assert!((share - 0.5).abs() <= 1e-12, "share {share}");
        assert_eq!(set.to_json(&t).unwrap(), "[[0,0,0],[1,0,0]]");
        assert_eq!(exhaustive_min_dorfler_cardinality(&p, &t, 0.5).unwrap(), 2);
    }

    #[test]
    fn greedy_equals_prescribed_on_initial_partition() {
        let p = reference_params();
        let t = Partition::initial(8).unwrap();
        let greedy = dorfler_greedy(&p, &t, 0.5).unwrap();
        let prescribed = dorfler_prescribed(&t, 0);
        assert_eq!(greedy.triples(&t).unwrap(), prescribed.triples(&t).unwrap());
    }

    #[test]
    fn prescribed_cycles_through_cells() {
        let t = Partition::initial(8).unwrap();
        let set = dorfler_prescribed(&t, 0);
        assert_eq!(
            set.items(),
            &[MarkItem::Element(el(0, 0, 0)), MarkItem::UnitCell(1)]
        );
        assert_eq!(dorfler_prescribed(&t, 3).items()[1], MarkItem::UnitCell(4));
        assert_eq!(dorfler_prescribed(&t, 8).items()[1], MarkItem::UnitCell(1));
    }

    #[test]
    fn maximum_marks_argmax_only_at_mu_one() {
        let p = reference_params();
        let t = Partition::initial(8).unwrap();
        let set = maximum_strategy(&p, &t, 1.0).unwrap();
        assert_eq!(set.items(), &[MarkItem::Element(t.zero_element())]);
    }

    #[test]
    fn maximum_marks_all_positive_for_tiny_mu() {
        let p = reference_params();
        let t = Partition::initial(8).unwrap();
        let set = maximum_strategy(&p, &t, 1e-9).unwrap();
        assert_eq!(set.count(&t).unwrap(), BigUint::from(9u32));
    }

    #[test]
    fn maximum_with_ties_takes_all_maximizers() {
        // With K=2 the zero element carries the same value as the total mass
        // of the rest; choose M=1 so T0 and the single cell leaf tie at
        // eta^2 = 1.
        let p = EstimatorParams::new(0.5, 1.0, 2.0, 1).unwrap();
        let t = Partition::initial(1).unwrap();
        let set = maximum_strategy(&p, &t, 1.0).unwrap();
        assert_eq!(set.count(&t).unwrap(), BigUint::from(2u32));
    }

    #[test]
    fn parameter_ranges_are_validated() {
        let p = reference_params();
        let t = Partition::initial(8).unwrap();
        assert!(dorfler_greedy(&p, &t, 0.0).is_err());
        assert!(dorfler_greedy(&p, &t, 1.0).is_err());
        assert!(maximum_strategy(&p, &t, 0.0).is_err());
        assert!(maximum_strategy(&p, &t, 1.5).is_err());
    }

    #[test]
    fn verifier_on_greedy_and_full_sets() {
        let p = reference_params();
        let t = Partition::initial(8).unwrap();
        let greedy = dorfler_greedy(&p, &t, 0.5).unwrap();
        let v = verify_optimal_dorfler(&p, &t, &greedy, 0.5).unwrap();
        assert!(v.satisfies && v.minimal);
        assert!(v.equality_gap.abs() <= 1e-12);

        let full = MarkedSet::from_elements(t.leaves().unwrap());
        let v = verify_optimal_dorfler(&p, &t, &full, 0.5).unwrap();
        assert!(v.satisfies && !v.minimal);

        let small = MarkedSet::singleton(el(5, 0, 0));
        let v = verify_optimal_dorfler(&p, &t, &small, 0.5).unwrap();
        assert!(!v.satisfies);
    }

    #[test]
    fn scale_invariance_of_markers() {
        // Doubling alpha multiplies every indicator by the common factor
        // 2^(-alpha g0); marked sets must not move.
        let base = reference_params();
        let scaled = EstimatorParams::new(0.125, 1.0, base.k, 8).unwrap();
        let mut t = Partition::initial(8).unwrap();
        for k in 0..5u64 {
            t = t.refine(&dorfler_prescribed(&t, k)).unwrap();
        }
        assert!(t.g0() > 0);
        let g = dorfler_greedy(&base, &t, 0.5).unwrap();
        let g2 = dorfler_greedy(&scaled, &t, 0.5).unwrap();
        assert_eq!(g.triples(&t).unwrap(), g2.triples(&t).unwrap());
        for mu in [0.25, 0.5, 1.0] {
            let a = maximum_strategy(&base, &t, mu).unwrap();
            let b = maximum_strategy(&scaled, &t, mu).unwrap();
            assert_eq!(a.triples(&t).unwrap(), b.triples(&t).unwrap());
        }
    }

    #[test]
    fn greedy_splits_a_uniform_run_when_needed() {
        // Cell 1 refined twice holds four equal leaves, which sort last
        // among the positive indicators. A theta asking for everything but
        // 1.5 of those leaves forces a strict prefix of the run.
        let p = reference_params();
        let t0 = Partition::initial(8).unwrap();
        let mut cell = MarkedSet::new();
        cell.push_unit_cell(1);
        let t = t0.refine(&cell).unwrap().refine(&cell).unwrap();
        let total = total_sq(&p, &t).unwrap();
        let leaf = indicator_sq(&p, &t, &el(1, 2, 0)).unwrap();
        let (short, _) = total.sub_ge(leaf.scale_exp2(1.5f64.log2()));
        let theta = short.ratio(total);
        let set = dorfler_greedy(&p, &t, theta).unwrap();
        let triples = set.triples(&t).unwrap();
        // T0, the seven unrefined cells, and 3 of the 4 equal leaves.
        assert_eq!(triples.len(), 11);
        assert_eq!(&triples[..4], &[[0, 0, 0], [1, 2, 0], [1, 2, 1], [1, 2, 2]]);
        let v = verify_optimal_dorfler(&p, &t, &set, theta).unwrap();
        assert!(v.satisfies && v.minimal);
    }
}
