//! Brute-force references for checking the matcher and the decoding pipeline
//! on instances small enough to enumerate.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::damage::{lattice_damage, RemovedSites, Scheme};
use crate::decoder::{decode_lattice, is_eligible, MeasurementErrors};
use crate::error::{Error, Result};
use crate::experiment::{run_batch, SweepSpec};
use crate::lattice::{build_lattice, LatticeGeometry, LatticeKind};
use crate::matching::{mwpm, DistanceTable, Mate, Matching};
use crate::num::Real;
use crate::rng::derive_seed;

/// Enumeration caps.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OracleConfig {
    /// Largest matching instance, boundary twins included.
    pub max_nodes: usize,
    /// Largest number of independently flippable faces per lattice.
    pub max_flips: usize,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self { max_nodes: 16, max_flips: 24 }
    }
}

/// Minimum-weight perfect matching by trying every pairing.
///
/// With a boundary, the instance counts as `2n` nodes, one twin per node.
pub fn exhaustive_mwpm<T: Real>(table: &DistanceTable<T>, config: &OracleConfig) -> Result<Matching<T>> {
    let n = table.len();
    let size = if table.has_boundary() { 2 * n } else { n };
    if size > config.max_nodes {
        return Err(Error::OracleCapExceeded { size, cap: config.max_nodes });
    }
    if !table.has_boundary() && n % 2 == 1 {
        return Err(Error::OddNodeCount(n));
    }

    struct Search<'a, T> {
        table: &'a DistanceTable<T>,
        mates: Vec<Option<Mate>>,
        best: Option<(T, Vec<Mate>)>,
    }

    impl<T: Real> Search<'_, T> {
        fn go(&mut self, acc: T) {
            let Some(i) = self.mates.iter().position(Option::is_none) else {
                if self.best.as_ref().is_none_or(|(w, _)| acc < *w) {
                    self.best = Some((acc, self.mates.iter().map(|m| m.expect("complete")).collect()));
                }
                return;
            };
            if let Some(b) = self.table.boundary(i) {
                self.mates[i] = Some(Mate::Boundary);
                self.go(acc + b);
            }
            for j in i + 1..self.mates.len() {
                if self.mates[j].is_some() {
                    continue;
                }
                if let Some(w) = self.table.pair(i, j) {
                    self.mates[i] = Some(Mate::Node(j));
                    self.mates[j] = Some(Mate::Node(i));
                    self.go(acc + w);
                    self.mates[j] = None;
                }
            }
            self.mates[i] = None;
        }
    }

    let mut s = Search { table, mates: vec![None; n], best: None };
    s.go(T::zero());
    let (weight, mates) = s.best.ok_or(Error::NoPerfectMatching)?;
    Ok(Matching { mates, weight })
}

/// Failure counts of one lattice by number of flipped faces, over all `2^m`
/// flip sets of its `m` eligible faces. `None` if the damage percolates.
fn failures_by_weight(
    g: &LatticeGeometry,
    removed: &RemovedSites,
    kind: LatticeKind,
    p_comp: f64,
    config: &OracleConfig,
) -> Result<Option<Vec<u64>>> {
    let ld = lattice_damage(g, removed, kind);
    let Ok(surface) = ld.surface else { return Ok(None) };
    let lattice = g.lattice(kind);
    let faces: Vec<usize> = (0..lattice.face_count()).filter(|&f| is_eligible(lattice, removed, f)).collect();
    let m = faces.len();
    if m > config.max_flips {
        return Err(Error::OracleCapExceeded { size: m, cap: config.max_flips });
    }
    let counts = (0..1u64 << m)
        .into_par_iter()
        .fold(
            || vec![0u64; m + 1],
            |mut acc, mask| {
                let flips = MeasurementErrors::from_faces((0..m).filter(|&i| mask >> i & 1 == 1).map(|i| faces[i]));
                if !decode_lattice(g, &ld.partition, removed, &flips, &surface, p_comp) {
                    acc[mask.count_ones() as usize] += 1;
                }
                acc
            },
        )
        .reduce(|| vec![0u64; m + 1], |a, b| a.iter().zip(&b).map(|(x, y)| x + y).collect());
    Ok(Some(counts))
}

/// Exact probability that a trial fails on the given damage, with every
/// eligible face flipped independently at `p_comp`. Percolated damage fails
/// with certainty.
pub fn exact_small_logical_rate<T: Real>(g: &LatticeGeometry, removed: &RemovedSites, p_comp: T, config: &OracleConfig) -> Result<T> {
    let p = p_comp.as_f64();
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::ProbabilityOutOfRange { name: "p_comp", value: p });
    }
    let mut success = 1.0;
    for kind in [LatticeKind::Primal, LatticeKind::Dual] {
        let Some(counts) = failures_by_weight(g, removed, kind, p, config)? else {
            return Ok(T::one());
        };
        let m = counts.len() as i32 - 1;
        let fail: f64 = counts
            .iter()
            .enumerate()
            .map(|(k, &c)| c as f64 * p.powi(k as i32) * (1.0 - p).powi(m - k as i32))
            .sum();
        success *= 1.0 - fail;
    }
    Ok(T::of(1.0 - success))
}

/// Multiplies the boundary weight of every even-indexed node before the
/// matcher sees the table. Used to check that verification catches errors.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightFault {
    pub scale: f64,
}

impl WeightFault {
    pub fn apply<T: Real>(&self, table: &DistanceTable<T>) -> DistanceTable<T> {
        let mut t = table.clone();
        if t.has_boundary() {
            for i in (0..t.len()).step_by(2) {
                let w = t.boundary(i).map(|w| w * T::of(self.scale));
                t.set_boundary(i, w);
            }
        }
        t
    }
}

/// Outcome of one verification check.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub name: String,
    pub passed: bool,
    pub detail: String,
    /// Seeds of the instances that disagreed.
    pub failing_seeds: Vec<u64>,
}

/// Random distance table with at most 8 nodes: complete, integer or real
/// weights, with or without a boundary.
pub fn random_table(seed: u64) -> DistanceTable<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let with_boundary = rng.gen_bool(0.5);
    let n = if with_boundary { rng.gen_range(1..=8) } else { 2 * rng.gen_range(1..=4) };
    let integer = rng.gen_bool(0.5);
    let draw = |rng: &mut ChaCha8Rng| if integer { rng.gen_range(0..8) as f64 } else { rng.gen_range(0.0..10.0) };
    let mut t = if with_boundary { DistanceTable::with_boundary(n) } else { DistanceTable::new(n) };
    for i in 0..n {
        for j in i + 1..n {
            let w = draw(&mut rng);
            t.set_pair(i, j, Some(w));
        }
        if with_boundary {
            let w = draw(&mut rng);
            t.set_boundary(i, Some(w));
        }
    }
    t
}

/// Compares [`mwpm`] with [`exhaustive_mwpm`] on `instances` random tables.
pub fn verify_matching(instances: usize, seed: u64, fault: Option<WeightFault>, config: &OracleConfig) -> CheckReport {
    let failing_seeds: Vec<u64> = (0..instances as u64)
        .into_par_iter()
        .map(|i| derive_seed(seed, &[i]))
        .filter(|&s| {
            let table = random_table(s);
            let input = fault.map_or_else(|| table.clone(), |f| f.apply(&table));
            let fast = mwpm(&input).map(|m| table.weight_of(&m.mates));
            let slow = exhaustive_mwpm(&table, config).map(|m| m.weight);
            match (fast, slow) {
                (Ok(Some(a)), Ok(b)) => (a - b).abs() > 1e-9 * b.abs().max(1.0),
                (Err(a), Err(b)) => a != b,
                _ => true,
            }
        })
        .collect();
    CheckReport {
        name: "matching".into(),
        passed: failing_seeds.is_empty(),
        detail: format!("{} of {instances} instances disagree", failing_seeds.len()),
        failing_seeds,
    }
}

/// Compares the Monte Carlo logical rate on an undamaged d=2 lattice with the
/// exact value, one check per `p_comp`, passing within `sigmas` standard errors.
pub fn verify_small_lattice(p_comps: &[f64], trials: u64, seed: u64, sigmas: f64, config: &OracleConfig) -> Result<Vec<CheckReport>> {
    let g = build_lattice(2)?;
    let none = RemovedSites::none(&g);
    let spec = SweepSpec::new(Scheme::NonAdaptive, vec![2], vec![0.0], p_comps.to_vec(), trials, seed);
    let points = run_batch(&spec).map_err(|e| Error::InvalidSweep(e.to_string()))?;
    let mut out = Vec::new();
    for pt in points {
        let exact: f64 = exact_small_logical_rate(&g, &none, pt.p_comp, config)?;
        let sigma = (exact * (1.0 - exact) / pt.trials as f64).sqrt();
        let dev = (pt.rate - exact).abs();
        let passed = if sigma > 0.0 { dev <= sigmas * sigma } else { pt.failures == 0 };
        out.push(CheckReport {
            name: format!("small-lattice p_comp={}", pt.p_comp),
            passed,
            detail: format!(
                "monte carlo {:.6} exact {:.6} deviation {:.2} sigma",
                pt.rate,
                exact,
                if sigma > 0.0 { dev / sigma } else { 0.0 }
            ),
            failing_seeds: if passed { Vec::new() } else { vec![pt.seed] },
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_nodes_have_one_matching() {
        let mut t = DistanceTable::new(2);
        t.set_pair(0, 1, Some(4.0));
        let m = exhaustive_mwpm(&t, &OracleConfig::default()).unwrap();
        assert_eq!(m.mates, vec![Mate::Node(1), Mate::Node(0)]);
        assert_eq!(m.weight, 4.0);
    }

    #[test]
    fn four_nodes_enumerate_three_matchings() {
        let mut t = DistanceTable::new(4);
        t.set_pair(0, 1, Some(1.0));
        t.set_pair(2, 3, Some(1.0));
        t.set_pair(0, 2, Some(3.0));
        t.set_pair(1, 3, Some(3.0));
        t.set_pair(0, 3, Some(10.0));
        t.set_pair(1, 2, Some(10.0));
        let m = exhaustive_mwpm(&t, &OracleConfig::default()).unwrap();
        assert_eq!(m.pairs(), vec![(0, 1), (2, 3)]);
        assert_eq!(m.weight, 2.0);
    }

    #[test]
    fn cap_counts_boundary_twins() {
        let cfg = OracleConfig { max_nodes: 8, max_flips: 4 };
        assert!(exhaustive_mwpm(&DistanceTable::<f64>::new(8), &cfg).is_err_and(|e| e == Error::NoPerfectMatching));
        assert_eq!(
            exhaustive_mwpm(&DistanceTable::<f64>::with_boundary(5), &cfg),
            Err(Error::OracleCapExceeded { size: 10, cap: 8 })
        );
        assert_eq!(exhaustive_mwpm(&DistanceTable::<f64>::new(3), &cfg), Err(Error::OddNodeCount(3)));
    }

    #[test]
    fn six_node_tables_agree_with_blossom() {
        let report = verify_matching(500, 11, None, &OracleConfig::default());
        assert!(report.passed, "{}: {:?}", report.detail, report.failing_seeds);
    }

    #[test]
    fn injected_fault_is_caught_with_seeds() {
        let report = verify_matching(200, 11, Some(WeightFault { scale: 3.0 }), &OracleConfig::default());
        assert!(!report.passed);
        assert!(!report.failing_seeds.is_empty());
        let s = report.failing_seeds[0];
        let t = random_table(s);
        let faulty = mwpm(&WeightFault { scale: 3.0 }.apply(&t)).unwrap();
        assert!(t.weight_of(&faulty.mates).unwrap() > exhaustive_mwpm(&t, &OracleConfig::default()).unwrap().weight);
    }

    #[test]
    fn exact_rate_endpoints() {
        let g = build_lattice(2).unwrap();
        let none = RemovedSites::none(&g);
        let cfg = OracleConfig::default();
        assert_eq!(exact_small_logical_rate(&g, &none, 0.0f64, &cfg).unwrap(), 0.0);
        // Uniform flips make each lattice's readout a fair coin.
        let half: f64 = exact_small_logical_rate(&g, &none, 0.5, &cfg).unwrap();
        assert!((half - 0.75).abs() < 1e-12, "{half}");
        let tight = OracleConfig { max_nodes: 16, max_flips: 3 };
        assert!(matches!(exact_small_logical_rate(&g, &none, 0.1f64, &tight), Err(Error::OracleCapExceeded { .. })));
    }

    #[test]
    fn exact_rate_grows_with_p_comp() {
        let g = build_lattice(2).unwrap();
        let none = RemovedSites::none(&g);
        let cfg = OracleConfig::default();
        let rates: Vec<f64> = [0.02, 0.2].iter().map(|&p| exact_small_logical_rate(&g, &none, p, &cfg).unwrap()).collect();
        assert!(rates.windows(2).all(|w| w[0] < w[1]), "{rates:?}");
    }

    #[test]
    fn monte_carlo_agrees_with_enumeration() {
        let reports = verify_small_lattice(&[0.1], 20_000, 5, 4.0, &OracleConfig::default()).unwrap();
        for r in reports {
            assert!(r.passed, "{}: {}", r.name, r.detail);
        }
    }
}
