//! The adaptive loop (estimate, mark, refine) with trajectory recording,
//! the rate functional, and divergence summaries.

use crate::error::{Error, Result};
use crate::estimator::{delta_to_finest_sq, total_sq, EstimatorParams};
use crate::marking::{
    dorfler_greedy, dorfler_prescribed, ideal_mark, maximum_strategy, verify_optimal_dorfler,
    MarkerConfig,
};
use crate::mesh::{MarkItem, MarkedSet, Partition, DEFAULT_MAX_GEN};
use num_bigint::BigUint;
use num_traits::ToPrimitive;
use serde::Serialize;
use std::io::{self, Write};

/// Configuration of one adaptive run.
#[derive(Clone, Debug)]
pub struct RunConfig {
    pub params: EstimatorParams,
    pub marker: MarkerConfig,
    /// Number of refinement steps; the trajectory records states
    /// `t_0 ..= t_max_iterations`.
    pub max_iterations: u32,
    /// Exponent `s` of the recorded rate functional.
    pub rate_exponent: f64,
    /// Stop when `log2` of the squared total indicator falls below this.
    pub stop_log2_eta: f64,
    pub max_gen: u32,
    /// When set, every step's marked set is checked against optimal Dörfler
    /// marking with this parameter.
    pub verify_theta: Option<f64>,
}

impl RunConfig {
    /// Defaults: `100 M` iterations, rate exponent `beta`, stop threshold
    /// `-4000` (log2), generation cap 4096, no optimality verification.
    pub fn new(params: EstimatorParams, marker: MarkerConfig) -> RunConfig {
        RunConfig {
            params,
            marker,
            max_iterations: 100 * params.m,
            rate_exponent: params.beta,
            stop_log2_eta: -4000.0,
            max_gen: DEFAULT_MAX_GEN,
            verify_theta: None,
        }
    }
}

/// Per-iteration record of the adaptive loop.
#[derive(Clone, Debug)]
pub struct TrajectoryRecord {
    pub k: u32,
    pub cardinality: BigUint,
    /// `#t_k - #t_0`.
    pub added: BigUint,
    pub eta_sq_log2: f64,
    /// Squared distance to the finest partition; equals `eta_sq_log2` by
    /// efficiency of this indicator.
    pub delta_sq_log2: f64,
    /// `s log2(added) + eta_sq_log2 / 2`; undefined while `added = 0`.
    pub rate_log2: Option<f64>,
    pub g0: u32,
    pub marked: MarkedSet,
    pub marked_count: BigUint,
}

impl TrajectoryRecord {
    /// True iff exactly the element containing zero was marked.
    pub fn marks_exactly_zero_element(&self) -> bool {
        match self.marked.items() {
            [MarkItem::Element(e)] => e.macro_cell == 0 && e.offset == 0 && e.gen == self.g0,
            _ => false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Termination {
    MaxIterations,
    EtaThreshold,
    MarkerFailed(String),
}

/// Counters from per-step optimality verification.
#[derive(Clone, Copy, Debug, Default, Serialize)]
pub struct OptimalityStats {
    pub checked: u64,
    pub satisfied: u64,
    pub minimal: u64,
    pub max_abs_equality_gap: f64,
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub records: Vec<TrajectoryRecord>,
    pub termination: Termination,
    pub final_partition: Partition,
    pub optimality: Option<OptimalityStats>,
}

fn mark(marker: &MarkerConfig, p: &EstimatorParams, t: &Partition, k: u32) -> Result<MarkedSet> {
    match marker {
        MarkerConfig::Ideal => Ok(ideal_mark(t)),
        MarkerConfig::DorflerPrescribed => Ok(dorfler_prescribed(t, u64::from(k))),
        MarkerConfig::DorflerGreedy { theta } => dorfler_greedy(p, t, *theta),
        MarkerConfig::Maximum { mu } => maximum_strategy(p, t, *mu),
    }
}

/// Run the adaptive loop from the initial partition.
///
/// Records one entry per state `t_0 ..= t_K`, each carrying the marked set
/// chosen there; the final state's set is recorded but not applied. A marker
/// failure terminates the run with a typed termination record instead of an
/// error.
pub fn run(config: &RunConfig) -> Result<Trajectory> {
    config.marker.validate()?;
    let p = &config.params;
    let initial_count = BigUint::from(p.m + 1);
    let mut t = Partition::initial(p.m)?;
    let mut cardinality = initial_count.clone();
    let mut records = Vec::with_capacity(config.max_iterations as usize + 1);
    let mut termination = Termination::MaxIterations;
    let mut optimality = config.verify_theta.map(|_| OptimalityStats::default());

    for k in 0..=config.max_iterations {
        let eta = total_sq(p, &t)?;
        let delta = delta_to_finest_sq(p, &t)?;
        let added = &cardinality - &initial_count;
        let g0 = t.g0();
        let rate_log2 = rate_functional_log2(&added, eta.log2(), config.rate_exponent);

        if eta.log2() < config.stop_log2_eta {
            records.push(TrajectoryRecord {
                k,
                cardinality: cardinality.clone(),
                added,
                eta_sq_log2: eta.log2(),
                delta_sq_log2: delta.log2(),
                rate_log2,
                g0,
                marked: MarkedSet::new(),
                marked_count: BigUint::from(0u32),
            });
            termination = Termination::EtaThreshold;
            break;
        }

        let marked = match mark(&config.marker, p, &t, k) {
            Ok(set) => set,
            Err(err) => {
                records.push(TrajectoryRecord {
                    k,
                    cardinality: cardinality.clone(),
                    added,
                    eta_sq_log2: eta.log2(),
                    delta_sq_log2: delta.log2(),
                    rate_log2,
                    g0,
                    marked: MarkedSet::new(),
                    marked_count: BigUint::from(0u32),
                });
                termination = Termination::MarkerFailed(err.to_string());
                break;
            }
        };

        if let (Some(stats), Some(theta)) = (optimality.as_mut(), config.verify_theta) {
            let verdict = verify_optimal_dorfler(p, &t, &marked, theta)?;
            stats.checked += 1;
            stats.satisfied += u64::from(verdict.satisfies);
            stats.minimal += u64::from(verdict.minimal);
            stats.max_abs_equality_gap = stats.max_abs_equality_gap.max(verdict.equality_gap.abs());
        }

        let marked_count = marked.count(&t)?;
        let refine_next = k < config.max_iterations;
        if refine_next {
            let next = t.refine_with_limit(&marked, config.max_gen)?;
            records.push(TrajectoryRecord {
                k,
                cardinality: cardinality.clone(),
                added,
                eta_sq_log2: eta.log2(),
                delta_sq_log2: delta.log2(),
                rate_log2,
                g0,
                marked,
                marked_count: marked_count.clone(),
            });
            cardinality += marked_count;
            t = next;
        } else {
            records.push(TrajectoryRecord {
                k,
                cardinality: cardinality.clone(),
                added,
                eta_sq_log2: eta.log2(),
                delta_sq_log2: delta.log2(),
                rate_log2,
                g0,
                marked,
                marked_count,
            });
        }
    }

    Ok(Trajectory {
        records,
        termination,
        final_partition: t,
        optimality,
    })
}

/// `log2` of a positive big integer, `None` for zero.
pub fn biguint_log2(x: &BigUint) -> Option<f64> {
    let bits = x.bits();
    if bits == 0 {
        return None;
    }
    let shift = bits.saturating_sub(53);
    let top = (x >> shift).to_u64().expect("53 bits fit in u64");
    Some((top as f64).log2() + shift as f64)
}

/// `log2` of the rate functional `added^s * eta`, i.e.
/// `s log2(added) + eta_sq_log2 / 2`.
pub fn rate_functional_log2(added: &BigUint, eta_sq_log2: f64, s: f64) -> Option<f64> {
    biguint_log2(added).map(|l| s * l + 0.5 * eta_sq_log2)
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct DivergenceReport {
    pub diverges: bool,
    /// Least-squares slope of the rate functional (log2) over cycles.
    pub growth_exponent_per_cycle: f64,
    /// Fraction of positive per-cycle increments.
    pub positive_increment_fraction: f64,
}

/// Fit the rate functional with exponent `s` at cycle boundaries `k = l M`,
/// discarding the first two cycles as transient. Divergence means a positive
/// fitted slope with at least 95% of the cycle increments positive.
pub fn divergence_report(records: &[TrajectoryRecord], m: u32, s: f64) -> Result<DivergenceReport> {
    let samples: Vec<(BigUint, f64)> = records
        .iter()
        .map(|r| (r.added.clone(), r.eta_sq_log2))
        .collect();
    divergence_report_samples(&samples, m, s)
}

/// As [`divergence_report`], over bare `(added, eta_sq_log2)` samples indexed
/// by iteration (sample `i` is state `t_i`).
pub fn divergence_report_samples(
    samples: &[(BigUint, f64)],
    m: u32,
    s: f64,
) -> Result<DivergenceReport> {
    let cycles = samples.len().saturating_sub(1) / m as usize;
    if cycles < 3 {
        return Err(Error::TrajectoryTooShort {
            need: 3 * m as usize + 1,
            got: samples.len(),
        });
    }
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for cycle in 2..=cycles {
        let (added, eta_sq_log2) = &samples[cycle * m as usize];
        if let Some(rate) = rate_functional_log2(added, *eta_sq_log2, s) {
            xs.push(cycle as f64);
            ys.push(rate);
        }
    }
    let n = xs.len() as f64;
    let mean_x = xs.iter().sum::<f64>() / n;
    let mean_y = ys.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut var = 0.0;
    for (x, y) in xs.iter().zip(&ys) {
        cov += (x - mean_x) * (y - mean_y);
        var += (x - mean_x) * (x - mean_x);
    }
    let slope = cov / var;
    let increments = ys.windows(2).filter(|w| w[1] > w[0]).count();
    let fraction = increments as f64 / (ys.len() - 1).max(1) as f64;
    Ok(DivergenceReport {
        diverges: slope > 0.0 && fraction >= 0.95,
        growth_exponent_per_cycle: slope,
        positive_increment_fraction: fraction,
    })
}

/// First step index from which `window` consecutive records mark exactly the
/// element containing zero.
pub fn first_zero_only_step(records: &[TrajectoryRecord], window: usize) -> Option<u32> {
    if records.len() < window {
        return None;
    }
    'outer: for start in 0..=(records.len() - window) {
        for record in &records[start..start + window] {
            if !record.marks_exactly_zero_element() {
                continue 'outer;
            }
        }
        return Some(records[start].k);
    }
    None
}

/// Burn-in bound for the maximum strategy: unit cells stop qualifying once
/// their generation exceeds `log2((K-1)/mu)`, so at most
/// `M (floor(log2((K-1)/mu)) + 1)` steps can mark anything besides the zero
/// element.
pub fn max_strategy_burn_in_bound(p: &EstimatorParams, mu: f64) -> u64 {
    let g = ((p.k - 1.0) / mu).log2().floor();
    let per_cell = if g < 0.0 { 0 } else { g as u64 + 1 };
    u64::from(p.m) * per_cell
}

/// Base-2 logarithmic quantities print with 15 significant digits.
pub fn fmt_log2(x: f64) -> String {
    format!("{x:.14e}")
}

/// Trajectory CSV: `k,cardinality,added,eta_sq_log2,delta_sq_log2,rate_log2,g0,marked_count`,
/// one row per iteration, byte-deterministic for a fixed configuration.
pub fn write_csv<W: Write>(records: &[TrajectoryRecord], w: &mut W) -> io::Result<()> {
    writeln!(
        w,
        "k,cardinality,added,eta_sq_log2,delta_sq_log2,rate_log2,g0,marked_count"
    )?;
    for r in records {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{}",
            r.k,
            r.cardinality,
            r.added,
            fmt_log2(r.eta_sq_log2),
            fmt_log2(r.delta_sq_log2),
            r.rate_log2.map(fmt_log2).unwrap_or_default(),
            r.g0,
            r.marked_count
        )?;
    }
    Ok(())
}

pub fn csv_string(records: &[TrajectoryRecord]) -> String {
    let mut buf = Vec::new();
    write_csv(records, &mut buf).expect("write to Vec cannot fail");
    String::from_utf8(buf).expect("CSV is ASCII")
}
