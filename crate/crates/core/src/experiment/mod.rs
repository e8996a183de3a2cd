//! Monte Carlo harness: single trials, parameter sweeps and batch estimates.

mod stats;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::atomic::{AtomicBool, Ordering};
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::damage::{assess_damage, check_probability, NoiseParams, Scheme};
use crate::decoder::{lattice_verdict, sample_measurement_errors, Backend, FailureClass, TrialOutcome};
use crate::error::{Error, Result};
use crate::lattice::{build_lattice, LatticeGeometry, LatticeKind};
use crate::rng::derive_seed;

pub use stats::{
    estimate_threshold, estimate_threshold_with, fit_threshold_curve, pairwise_crossings, percolation_crossover,
    percolation_limit_analytic, wilson_interval, FitMethod, QuadraticFit, ThresholdEstimate, ThresholdOptions,
    ThresholdStatus, PERCOLATION_BOND_FRACTION, Z95,
};

/// Runs one full trial: damage on both lattices, then measurement errors and
/// decoding on each.
pub fn run_trial(g: &LatticeGeometry, scheme: Scheme, n: &NoiseParams) -> TrialOutcome {
    run_trial_with(g, scheme, n, Backend::Auto)
}

pub fn run_trial_with(g: &LatticeGeometry, scheme: Scheme, n: &NoiseParams, backend: Backend) -> TrialOutcome {
    let damage = assess_damage(g, scheme, n);
    if damage.percolated() {
        return TrialOutcome::from_class(FailureClass::Percolation);
    }
    for kind in [LatticeKind::Primal, LatticeKind::Dual] {
        let ld = damage.lattice(kind);
        let surface = ld.surface.as_ref().expect("checked for percolation");
        let flipped = sample_measurement_errors(g, &damage.removed, kind, n);
        if !lattice_verdict(g, &ld.partition, &damage.removed, &flipped, surface, n.p_comp, backend) {
            return TrialOutcome::from_class(match kind {
                LatticeKind::Primal => FailureClass::LogicalPrimal,
                LatticeKind::Dual => FailureClass::LogicalDual,
            });
        }
    }
    TrialOutcome::from_class(FailureClass::None)
}

/// Whether the bond failures of a trial percolate on either lattice. No decoding.
pub fn percolation_trial(g: &LatticeGeometry, scheme: Scheme, n: &NoiseParams) -> bool {
    assess_damage(g, scheme, n).percolated()
}

/// What each trial of a sweep does.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum TrialMode {
    /// Damage, measurement errors and decoding.
    #[default]
    Full,
    /// Damage only; a trial fails iff it percolates.
    PercolationOnly,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub scheme: Scheme,
    pub distances: Vec<usize>,
    pub p_bonds: Vec<f64>,
    pub p_comps: Vec<f64>,
    pub trials: u64,
    pub seed: u64,
    /// Worker threads; 0 lets the thread pool decide.
    pub workers: usize,
    pub mode: TrialMode,
    pub backend: Backend,
    /// Stop early and report the points finished so far.
    pub time_budget: Option<Duration>,
}

impl SweepSpec {
    pub fn new(scheme: Scheme, distances: Vec<usize>, p_bonds: Vec<f64>, p_comps: Vec<f64>, trials: u64, seed: u64) -> Self {
        Self {
            scheme,
            distances,
            p_bonds,
            p_comps,
            trials,
            seed,
            workers: 0,
            mode: TrialMode::Full,
            backend: Backend::Auto,
            time_budget: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::InvalidSweep("trials must be at least 1".into()));
        }
        if self.distances.is_empty() || self.p_bonds.is_empty() || self.p_comps.is_empty() {
            return Err(Error::InvalidSweep("empty parameter grid".into()));
        }
        for &d in &self.distances {
            if d < 2 {
                return Err(Error::DistanceTooSmall(d));
            }
        }
        for &p in &self.p_bonds {
            check_probability("p_bond", p)?;
        }
        for &p in &self.p_comps {
            check_probability("p_comp", p)?;
        }
        Ok(())
    }

    /// Grid points in output order: distance, then p_bond, then p_comp.
    pub fn points(&self) -> Vec<(usize, f64, f64)> {
        let mut out = Vec::new();
        for &d in &self.distances {
            for &pb in &self.p_bonds {
                for &pc in &self.p_comps {
                    out.push((d, pb, pc));
                }
            }
        }
        out
    }
}

/// Seed of the random streams of one grid point.
pub fn point_seed(master: u64, scheme: Scheme, d: usize, p_bond: f64, p_comp: f64) -> u64 {
    let s = match scheme {
        Scheme::NonAdaptive => 0,
        Scheme::Adaptive => 1,
    };
    derive_seed(master, &[s, d as u64, p_bond.to_bits(), p_comp.to_bits()])
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointEstimate {
    pub scheme: Scheme,
    pub d: usize,
    pub p_bond: f64,
    pub p_comp: f64,
    pub trials: u64,
    pub failures: u64,
    pub percolation_failures: u64,
    pub rate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    /// Master seed of the sweep.
    pub seed: u64,
}

impl PointEstimate {
    pub fn from_counts(
        scheme: Scheme,
        d: usize,
        p_bond: f64,
        p_comp: f64,
        counts: Counts,
        seed: u64,
    ) -> Self {
        let rate = counts.failures as f64 / counts.trials as f64;
        let (ci_low, ci_high) = wilson_interval(counts.failures, counts.trials, Z95);
        Self {
            scheme,
            d,
            p_bond,
            p_comp,
            trials: counts.trials,
            failures: counts.failures,
            percolation_failures: counts.percolation_failures,
            rate,
            ci_low,
            ci_high,
            seed,
        }
    }
}

/// Tallies of a range of trials. Merging is plain addition.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub trials: u64,
    pub failures: u64,
    pub percolation_failures: u64,
    pub logical_primal: u64,
    pub logical_dual: u64,
}

impl Counts {
    pub fn record(&mut self, outcome: TrialOutcome) {
        self.trials += 1;
        match outcome.failure_class {
            FailureClass::None => {}
            FailureClass::Percolation => {
                self.failures += 1;
                self.percolation_failures += 1;
            }
            FailureClass::LogicalPrimal => {
                self.failures += 1;
                self.logical_primal += 1;
            }
            FailureClass::LogicalDual => {
                self.failures += 1;
                self.logical_dual += 1;
            }
        }
    }

    pub fn merge(self, o: Self) -> Self {
        Self {
            trials: self.trials + o.trials,
            failures: self.failures + o.failures,
            percolation_failures: self.percolation_failures + o.percolation_failures,
            logical_primal: self.logical_primal + o.logical_primal,
            logical_dual: self.logical_dual + o.logical_dual,
        }
    }
}

/// Runs trials `range` of one grid point.
pub fn run_range(
    g: &LatticeGeometry,
    scheme: Scheme,
    p_bond: f64,
    p_comp: f64,
    seed: u64,
    range: std::ops::Range<u64>,
    mode: TrialMode,
    backend: Backend,
) -> Counts {
    let mut counts = Counts::default();
    for t in range {
        let n = NoiseParams { p_bond, p_comp, seed, trial_index: t };
        let outcome = match mode {
            TrialMode::Full => run_trial_with(g, scheme, &n, backend),
            TrialMode::PercolationOnly => TrialOutcome::from_class(if percolation_trial(g, scheme, &n) {
                FailureClass::Percolation
            } else {
                FailureClass::None
            }),
        };
        counts.record(outcome);
    }
    counts
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum BatchError {
    #[error(transparent)]
    Invalid(#[from] Error),
    /// Only some grid points finished; `points` holds those, in grid order.
    #[error("batch stopped after {} of {requested} points: {reason}", points.len())]
    Partial { points: Vec<PointEstimate>, requested: usize, reason: String },
}

const CHUNK: u64 = 250;

/// Runs every grid point of the sweep. Results do not depend on the worker
/// count or scheduling: each trial draws from its own stream and chunk counts
/// are summed.
pub fn run_batch(spec: &SweepSpec) -> std::result::Result<Vec<PointEstimate>, BatchError> {
    spec.validate()?;
    let mut geometries = Vec::new();
    for &d in &spec.distances {
        geometries.push((d, build_lattice(d)?));
    }
    let points = spec.points();
    let jobs: Vec<(usize, u64)> = (0..points.len())
        .flat_map(|i| (0..spec.trials.div_ceil(CHUNK)).map(move |c| (i, c)))
        .collect();

    let start = Instant::now();
    let stop = AtomicBool::new(false);
    let run = || {
        jobs.par_iter()
            .map(|&(i, c)| {
                if stop.load(Ordering::Relaxed) {
                    return None;
                }
                if spec.time_budget.is_some_and(|b| start.elapsed() > b) {
                    stop.store(true, Ordering::Relaxed);
                    return None;
                }
                let (d, pb, pc) = points[i];
                let g = &geometries.iter().find(|(gd, _)| *gd == d).expect("geometry").1;
                let seed = point_seed(spec.seed, spec.scheme, d, pb, pc);
                let range = c * CHUNK..((c + 1) * CHUNK).min(spec.trials);
                let result = catch_unwind(AssertUnwindSafe(|| {
                    run_range(g, spec.scheme, pb, pc, seed, range, spec.mode, spec.backend)
                }));
                match result {
                    Ok(counts) => Some(Ok(counts)),
                    Err(panic) => {
                        stop.store(true, Ordering::Relaxed);
                        let msg = panic
                            .downcast_ref::<String>()
                            .cloned()
                            .or_else(|| panic.downcast_ref::<&str>().map(|s| s.to_string()))
                            .unwrap_or_else(|| "worker panicked".into());
                        Some(Err(format!("point d={d} p_bond={pb} p_comp={pc}: {msg}")))
                    }
                }
            })
            .collect::<Vec<_>>()
    };
    let results = if spec.workers == 0 {
        run()
    } else {
        rayon::ThreadPoolBuilder::new()
            .num_threads(spec.workers)
            .build()
            .map_err(|e| BatchError::Partial { points: Vec::new(), requested: points.len(), reason: e.to_string() })?
            .install(run)
    };

    let mut per_point: Vec<Option<Counts>> = vec![Some(Counts::default()); points.len()];
    let mut reason = None;
    for (&(i, _), r) in jobs.iter().zip(results) {
        match r {
            Some(Ok(c)) => {
                if let Some(acc) = per_point[i].as_mut() {
                    *acc = acc.merge(c);
                }
            }
            Some(Err(msg)) => {
                per_point[i] = None;
                reason.get_or_insert(msg);
            }
            None => {
                per_point[i] = None;
                reason.get_or_insert_with(|| "time budget exhausted".to_string());
            }
        }
    }
    let estimates: Vec<PointEstimate> = points
        .iter()
        .zip(&per_point)
        .filter_map(|(&(d, pb, pc), c)| c.map(|c| PointEstimate::from_counts(spec.scheme, d, pb, pc, c, spec.seed)))
        .collect();
    match reason {
        None => Ok(estimates),
        Some(reason) => Err(BatchError::Partial { points: estimates, requested: points.len(), reason }),
    }
}
