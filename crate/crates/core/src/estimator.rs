//! The synthetic squared indicator, the distance between nested partitions,
//! and underflow-safe aggregation.
//!
//! For a leaf `T` of `t` inside a unit cell `[m, m+1]`, `m >= 1`,
//!
//! ```text
//! eta_t^2(T) = 2^(-alpha g0(t) - beta (g(T) + (m-1)/M)) * |T|,   |T| = 2^(-g(T)),
//! ```
//!
//! the leaf containing zero carries `1/(K-1)` times the squared indicator
//! mass of `t` restricted to `[1, M+1]`, and every other leaf of macro cell 0
//! carries zero. All sums are computed per leaf run in closed form, so
//! uniformly refined cells with `2^g` leaves cost O(1).

use crate::error::{Error, Result};
use crate::logscalar::LogScalar;
use crate::mesh::{Element, MarkItem, MarkedSet, Partition, RunClass};
use serde::{Deserialize, Serialize};

/// Parameters `(alpha, beta, K, M)` of the indicator. `K` is at once the
/// reliability constant and, with `C_1 = 1`, the reciprocal of the sharp
/// marking threshold.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimatorParams {
    pub alpha: f64,
    pub beta: f64,
    pub k: f64,
    pub m: u32,
}

impl EstimatorParams {
    pub fn new(alpha: f64, beta: f64, k: f64, m: u32) -> Result<EstimatorParams> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "alpha must be > 0, got {alpha}"
            )));
        }
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "beta must be > 0, got {beta}"
            )));
        }
        if !(k > 1.0 && k.is_finite()) {
            return Err(Error::InvalidParameter(format!("K must be > 1, got {k}")));
        }
        if m == 0 {
            return Err(Error::ZeroMacroCount);
        }
        Ok(EstimatorParams { alpha, beta, k, m })
    }

    /// Exponent of a single leaf indicator off macro cell 0, without the
    /// `-alpha g0` factor.
    fn leaf_base_log2(&self, macro_cell: u32, gen: u32) -> f64 {
        let g = f64::from(gen);
        -(self.beta * (g + f64::from(macro_cell - 1) / f64::from(self.m))) - g
    }

    /// Exponent of a run of `2^count_log2` equal leaves, without `-alpha g0`.
    fn run_base_log2(&self, macro_cell: u32, gen: u32, count_log2: u32) -> f64 {
        f64::from(count_log2) + self.leaf_base_log2(macro_cell, gen)
    }

    fn check_partition(&self, t: &Partition) -> Result<()> {
        if t.m() != self.m {
            return Err(Error::MacroCountMismatch(self.m, t.m()));
        }
        Ok(())
    }

    fn log2_k_over_km1(&self) -> f64 {
        (self.k / (self.k - 1.0)).log2()
    }

    fn log2_km1(&self) -> f64 {
        (self.k - 1.0).log2()
    }
}

/// Exponent of a single leaf indicator in cell `[m, m+1]`, `m >= 1`.
pub(crate) fn leaf_value_log2(p: &EstimatorParams, g0: u32, macro_cell: u32, gen: u32) -> f64 {
    p.leaf_base_log2(macro_cell, gen) - p.alpha * f64::from(g0)
}

/// Sum of one unit cell `[m, m+1]`, `m >= 1`, without the `-alpha g0` factor.
fn cell_base_sum(p: &EstimatorParams, t: &Partition, macro_cell: u32) -> LogScalar {
    let mut terms = Vec::new();
    t.cell_leaf_runs(macro_cell, &mut |gen, count_log2| {
        terms.push(LogScalar::from_log2(
            p.run_base_log2(macro_cell, gen, count_log2),
        ));
    });
    LogScalar::sum(terms)
}

/// Sum over all unit cells without the `-alpha g0` factor.
fn tail_base_sum(p: &EstimatorParams, t: &Partition) -> Result<LogScalar> {
    p.check_partition(t)?;
    Ok(LogScalar::sum((1..=p.m).map(|m| cell_base_sum(p, t, m))))
}

/// The step-dependent `-alpha g0` factor is applied as the final operation,
/// so refinements of the zero element shift every aggregate by one single
/// rounding of the same exact exponent.
fn g0_shift(p: &EstimatorParams, t: &Partition) -> f64 {
    -(p.alpha * f64::from(t.g0()))
}

/// `eta_t^2(t|_[1,M+1])`: the squared indicator mass off macro cell 0.
pub fn unit_cells_sq(p: &EstimatorParams, t: &Partition) -> Result<LogScalar> {
    Ok(tail_base_sum(p, t)?.scale_exp2(g0_shift(p, t)))
}

/// `eta_t^2(t) = K/(K-1) eta_t^2(t|_[1,M+1])`.
pub fn total_sq(p: &EstimatorParams, t: &Partition) -> Result<LogScalar> {
    Ok(tail_base_sum(p, t)?
        .scale_exp2(p.log2_k_over_km1())
        .scale_exp2(g0_shift(p, t)))
}

/// `delta(t)^2`, the squared distance to the finest partition, which for
/// this indicator equals `eta_t^2(t)`.
pub fn delta_to_finest_sq(p: &EstimatorParams, t: &Partition) -> Result<LogScalar> {
    total_sq(p, t)
}

/// Squared indicator of one leaf.
pub fn indicator_sq(p: &EstimatorParams, t: &Partition, e: &Element) -> Result<LogScalar> {
    p.check_partition(t)?;
    if !t.is_leaf(e) {
        return Err(Error::NotALeaf(*e));
    }
    if e.macro_cell == 0 {
        if e.contains_zero() {
            Ok(tail_base_sum(p, t)?
                .scale_exp2(-p.log2_km1())
                .scale_exp2(g0_shift(p, t)))
        } else {
            Ok(LogScalar::ZERO)
        }
    } else {
        let base = p.leaf_base_log2(e.macro_cell, e.gen);
        Ok(LogScalar::from_log2(base - p.alpha * f64::from(t.g0())))
    }
}

/// Sum of squared indicators over a subset of leaves.
pub fn subset_sq(p: &EstimatorParams, t: &Partition, s: &MarkedSet) -> Result<LogScalar> {
    p.check_partition(t)?;
    let shift = g0_shift(p, t);
    let mut terms = Vec::with_capacity(s.items().len());
    for item in s.items() {
        match item {
            MarkItem::Element(e) => terms.push(indicator_sq(p, t, e)?),
            MarkItem::UnitCell(0) => {
                // T0 plus zero-valued leaves.
                terms.push(
                    tail_base_sum(p, t)?
                        .scale_exp2(-p.log2_km1())
                        .scale_exp2(g0_shift(p, t)),
                );
            }
            MarkItem::UnitCell(m) => {
                if *m > p.m {
                    return Err(Error::MacroIndexOutOfRange {
                        index: *m,
                        max: p.m,
                    });
                }
                terms.push(cell_base_sum(p, t, *m).scale_exp2(shift));
            }
        }
    }
    Ok(LogScalar::sum(terms))
}

/// Squared distance `eta_coarse^2(coarse) - eta_fine^2(fine) >= 0` between
/// nested partitions.
///
/// The difference is taken directly after factoring the larger exponent;
/// when the two totals agree to within relative 1e-10 and the zero element
/// is unrefined, the value is recomputed from the element-wise decomposition
/// over refined leaves only, which does not cancel.
pub fn delta_sq(p: &EstimatorParams, coarse: &Partition, fine: &Partition) -> Result<LogScalar> {
    p.check_partition(coarse)?;
    if !fine.is_refinement_of(coarse)? {
        return Err(Error::NotNested);
    }
    let a = total_sq(p, coarse)?;
    let b = total_sq(p, fine)?;
    let (direct, cancellation) = a.sub_ge(b);
    if 1.0 - cancellation >= 1e-10 {
        return Ok(direct);
    }
    if coarse.g0() == fine.g0() {
        let sums = nested_class_sums(p, coarse, fine)?;
        let (diff, _) = sums.only_coarse_off0.sub_ge(sums.only_fine_off0);
        Ok(diff.scale_exp2(p.log2_k_over_km1()))
    } else {
        Ok(direct)
    }
}

/// Per-class squared indicator sums of a nested pair, split by membership of
/// the zero element and with macro cell 0 (always zero mass off the zero
/// element) kept apart.
#[derive(Clone, Copy, Debug)]
pub(crate) struct NestedClassSums {
    /// True iff the zero element is unrefined (common to both partitions).
    pub t0_common: bool,
    pub t0_coarse_sq: LogScalar,
    pub t0_fine_sq: LogScalar,
    /// Sums over unit cells `[1, M+1]` only.
    pub common_coarse_off0: LogScalar,
    pub common_fine_off0: LogScalar,
    pub only_coarse_off0: LogScalar,
    pub only_fine_off0: LogScalar,
}

impl NestedClassSums {
    /// `eta_coarse^2(t ∩ t*)`.
    pub fn common_coarse(&self) -> LogScalar {
        if self.t0_common {
            self.common_coarse_off0 + self.t0_coarse_sq
        } else {
            self.common_coarse_off0
        }
    }

    /// `eta_fine^2(t ∩ t*)`.
    pub fn common_fine(&self) -> LogScalar {
        if self.t0_common {
            self.common_fine_off0 + self.t0_fine_sq
        } else {
            self.common_fine_off0
        }
    }

    /// `eta_coarse^2(t \ t*)`: the coarse leaves refined in the fine partition.
    pub fn only_coarse(&self) -> LogScalar {
        if self.t0_common {
            self.only_coarse_off0
        } else {
            self.only_coarse_off0 + self.t0_coarse_sq
        }
    }

    /// `eta_fine^2(t* \ t)`.
    pub fn only_fine(&self) -> LogScalar {
        if self.t0_common {
            self.only_fine_off0
        } else {
            self.only_fine_off0 + self.t0_fine_sq
        }
    }

    /// `delta^2` assembled from per-class differences. Each bracket pairs
    /// quantities whose ratio is bounded away from one, so this form stays
    /// accurate when the two totals nearly coincide.
    pub fn delta_sq(&self, p: &EstimatorParams) -> LogScalar {
        let (d_common, _) = self.common_coarse_off0.sub_ge(self.common_fine_off0);
        let (d_only, _) = self.only_coarse_off0.sub_ge(self.only_fine_off0);
        let d_off0 = d_common + d_only;
        // t0 difference = (R_coarse - R_fine) / (K - 1).
        d_off0 + d_off0.scale_exp2(-p.log2_km1())
    }
}

/// Classify and sum the leaves of a nested pair. Errors if `fine` does not
/// refine `coarse` or the macro counts disagree.
pub(crate) fn nested_class_sums(
    p: &EstimatorParams,
    coarse: &Partition,
    fine: &Partition,
) -> Result<NestedClassSums> {
    p.check_partition(coarse)?;
    p.check_partition(fine)?;
    let g0c = -(p.alpha * f64::from(coarse.g0()));
    let g0f = -(p.alpha * f64::from(fine.g0()));

    let mut common = Vec::new();
    let mut only_coarse = Vec::new();
    let mut only_fine = Vec::new();
    for m in 1..=p.m {
        coarse.cell_diff_runs(fine, m, &mut |class, gen, count_log2| {
            let term = LogScalar::from_log2(p.run_base_log2(m, gen, count_log2));
            match class {
                RunClass::Common => common.push(term),
                RunClass::OnlyCoarse => only_coarse.push(term),
                RunClass::OnlyFine => only_fine.push(term),
            }
        })?;
    }
    // Macro cell 0 carries no off-zero mass but must still be nested.
    coarse.cell_diff_runs(fine, 0, &mut |_, _, _| {})?;

    let common_base = LogScalar::sum(common);
    let only_coarse_base = LogScalar::sum(only_coarse);
    let only_fine_base = LogScalar::sum(only_fine);

    let common_coarse_off0 = common_base.scale_exp2(g0c);
    let common_fine_off0 = common_base.scale_exp2(g0f);
    let only_coarse_off0 = only_coarse_base.scale_exp2(g0c);
    let only_fine_off0 = only_fine_base.scale_exp2(g0f);

    let r_coarse = common_coarse_off0 + only_coarse_off0;
    let r_fine = common_fine_off0 + only_fine_off0;

    Ok(NestedClassSums {
        t0_common: coarse.g0() == fine.g0(),
        t0_coarse_sq: r_coarse.scale_exp2(-p.log2_km1()),
        t0_fine_sq: r_fine.scale_exp2(-p.log2_km1()),
        common_coarse_off0,
        common_fine_off0,
        only_coarse_off0,
        only_fine_off0,
    })
}
