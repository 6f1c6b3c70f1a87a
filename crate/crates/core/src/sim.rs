//! Monte Carlo cross-check of barrier rules. Each path owns an RNG stream
//! derived from `(seed, path index)`, so results are bit-identical for a
//! fixed seed no matter how many workers run the paths.

use crate::barriers::{propagate_exact, BarrierFamily, Propagation};
use crate::error::Error;
use crate::lattice::{build_model_raw, State, StateKind};
use crate::measures::DiscreteMeasure;
use crate::scalar::Scalar;
use rayon::prelude::*;
use std::collections::BTreeMap;

/// SplitMix64: a stateless-seedable 64-bit generator; the finalizer is a
/// bijection, so distinct (seed, path) pairs give independent-looking
/// streams.
#[derive(Clone, Debug)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        SplitMix64 { state: seed }
    }

    /// Stream for one path of one run.
    pub fn for_path(seed: u64, path: u64) -> Self {
        let mut s = SplitMix64::new(seed ^ path.wrapping_mul(0x9E3779B97F4A7C15));
        s.next_u64(); // decouple nearby path indices
        s
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E3779B97F4A7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
        z ^ (z >> 31)
    }

    /// Uniform in `[0, 1)` with 53 random bits.
    #[inline]
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Fair coin: `true` steps up.
    #[inline]
    pub fn next_step_up(&mut self) -> bool {
        self.next_u64() & 1 == 1
    }
}

#[derive(Clone, Debug, Default)]
struct PathOutcome {
    /// Per colour: stop time, position, and running max at the stop.
    stops: Vec<Option<(u32, i64, i64)>>,
    objective: f64,
}

/// Empirical marginals and objective from `n_paths` walks.
#[derive(Clone, Debug)]
pub struct SimulationResult {
    pub n_paths: usize,
    pub seed: u64,
    pub counts: Vec<BTreeMap<i64, u64>>,
    pub empirical: Vec<BTreeMap<i64, f64>>,
    /// Paths whose colour never stopped (horizon or wall residue).
    pub residual_paths: Vec<u64>,
    /// Mean of the family objective in reporting sign, with standard error.
    pub objective_mean: f64,
    pub objective_se: f64,
    pub expected_time: Vec<f64>,
}

impl SimulationResult {
    /// z-scores of empirical atom masses against an exact propagation.
    pub fn z_scores<S: Scalar>(&self, exact: &Propagation<S>) -> Vec<BTreeMap<i64, f64>> {
        let n = self.n_paths as f64;
        exact
            .embedded
            .iter()
            .enumerate()
            .map(|(colour, marg)| {
                let mut zs = BTreeMap::new();
                let mut atoms: Vec<i64> = marg.keys().copied().collect();
                atoms.extend(self.empirical[colour].keys().copied());
                atoms.sort_unstable();
                atoms.dedup();
                for x in atoms {
                    let p = marg.get(&x).map(|v| v.to_f64()).unwrap_or(0.0);
                    let emp = self.empirical[colour].get(&x).copied().unwrap_or(0.0);
                    let se = (p * (1.0 - p) / n).sqrt();
                    let z = if se > 0.0 {
                        (emp - p) / se
                    } else if (emp - p).abs() <= 2.0 / n {
                        0.0
                    } else {
                        f64::INFINITY
                    };
                    zs.insert(x, z);
                }
                zs
            })
            .collect()
    }

    pub fn max_abs_z<S: Scalar>(&self, exact: &Propagation<S>) -> f64 {
        self.z_scores(exact)
            .iter()
            .flat_map(|m| m.values())
            .fold(0.0, |acc, z| acc.max(z.abs()))
    }
}

/// Runs `n_paths` +-1 walks under the barrier family's per-state stop
/// probabilities (from one exact propagation pass). Reproducible for fixed
/// `(seed, n_paths)` independent of the worker count.
pub fn simulate<S: Scalar>(
    bf: &BarrierFamily<S>,
    mu0: &DiscreteMeasure<S>,
    n_paths: usize,
    seed: u64,
) -> Result<SimulationResult, Error> {
    if n_paths == 0 {
        return Err(Error::Precondition("n_paths must be at least 1".into()));
    }
    let start_atoms: Vec<i64> = mu0.positions().collect();
    let model = build_model_raw(bf.kind, bf.horizon, bf.l_box, bf.pad, &start_atoms)?;
    let prop = propagate_exact(&model, bf, mu0)?;
    let n_colours = bf.n_colours;

    // Inverse-CDF table for the starting law.
    let mut cdf: Vec<(f64, i64)> = Vec::with_capacity(mu0.atoms().len());
    let mut acc = 0.0;
    for (x, w) in mu0.atoms() {
        acc += w.to_f64();
        cdf.push((acc, *x));
    }
    let report_sign = bf.objective.report_sign().to_f64();

    let outcomes: Vec<PathOutcome> = (0..n_paths)
        .into_par_iter()
        .map(|pid| {
            let mut rng = SplitMix64::for_path(seed, pid as u64);
            let u = rng.next_f64();
            let x0 = cdf
                .iter()
                .find(|(c, _)| u < *c)
                .map(|(_, x)| *x)
                .unwrap_or(cdf.last().expect("nonempty measure").1);
            let mut st = State {
                t: 0,
                x: x0,
                aux: match bf.kind {
                    StateKind::Plain => 0,
                    _ => x0,
                },
            };
            let mut colour = 0usize;
            let mut stops: Vec<Option<(u32, i64, i64)>> = vec![None; n_colours];
            let mut objective = 0.0f64;
            'walk: loop {
                let sid = match model.id_of(&st) {
                    Some(id) => id,
                    None => break 'walk,
                };
                // A stop promotes the walk to the next colour in place.
                while colour < n_colours {
                    let p = prop.stop_prob[colour][sid];
                    let stop_here = p >= 1.0 || (p > 0.0 && rng.next_f64() < p);
                    if !stop_here {
                        break;
                    }
                    stops[colour] = Some((st.t, st.x, st.aux));
                    objective += bf
                        .objective
                        .coefficient(colour, &st)
                        .map(|c| c.to_f64())
                        .unwrap_or(0.0);
                    colour += 1;
                }
                if colour >= n_colours || model.is_forced_stop(sid) {
                    break 'walk;
                }
                let up = rng.next_step_up();
                let dx = if up { 1 } else { -1 };
                let x = st.x + dx;
                st = State {
                    t: st.t + 1,
                    x,
                    aux: match bf.kind {
                        StateKind::Plain => 0,
                        StateKind::MaxAugmented => st.aux.max(x),
                        StateKind::StartAugmented => st.aux,
                    },
                };
            }
            PathOutcome {
                stops,
                objective: report_sign * objective,
            }
        })
        .collect();

    // Deterministic reduction in path order.
    let mut counts: Vec<BTreeMap<i64, u64>> = vec![BTreeMap::new(); n_colours];
    let mut residual_paths = vec![0u64; n_colours];
    let mut time_sum = vec![0.0f64; n_colours];
    let mut obj_sum = 0.0;
    let mut obj_sq = 0.0;
    for out in &outcomes {
        for colour in 0..n_colours {
            match out.stops[colour] {
                Some((t, x, _)) => {
                    *counts[colour].entry(x).or_insert(0) += 1;
                    time_sum[colour] += t as f64;
                }
                None => residual_paths[colour] += 1,
            }
        }
        obj_sum += out.objective;
        obj_sq += out.objective * out.objective;
    }
    let n = n_paths as f64;
    let empirical = counts
        .iter()
        .map(|m| m.iter().map(|(x, c)| (*x, *c as f64 / n)).collect())
        .collect();
    let mean = obj_sum / n;
    let var = (obj_sq / n - mean * mean).max(0.0);
    Ok(SimulationResult {
        n_paths,
        seed,
        counts,
        empirical,
        residual_paths,
        objective_mean: mean,
        objective_se: (var / n).sqrt(),
        expected_time: time_sum.iter().map(|s| s / n).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::barriers::extract_barriers;
    use crate::lp::{solve_embedding, SolveParams};
    use crate::measures::MarginalSequence;
    use crate::objective::Objective;

    fn first_hit_setup() -> (
        MarginalSequence<f64>,
        BarrierFamily<f64>,
        crate::lp::EmbeddingSolution<f64>,
    ) {
        let seq = MarginalSequence::new(vec![
            DiscreteMeasure::dirac(0),
            DiscreteMeasure::new(vec![(-1, 0.5), (1, 0.5)]).unwrap(),
        ])
        .unwrap();
        let obj = Objective::root(1);
        let solved = solve_embedding(&seq, &obj, &SolveParams::default()).unwrap();
        let bf = extract_barriers(&solved.outcome.rule, &obj).unwrap();
        (seq, bf, solved)
    }

    #[test]
    fn first_hit_mean_time_within_three_se() {
        let (seq, bf, _) = first_hit_setup();
        let sim = simulate(&bf, seq.initial(), 100_000, 42).unwrap();
        // E[tau] = 1 exactly (the walk stops on its first step).
        assert!((sim.expected_time[0] - 1.0).abs() < 1e-12);
        assert!((sim.empirical[0][&1] - 0.5).abs() < 3.0 * (0.25f64 / 100_000.0).sqrt());
    }

    #[test]
    fn pm2_second_moment_within_three_se() {
        let seq = MarginalSequence::new(vec![
            DiscreteMeasure::dirac(0),
            DiscreteMeasure::new(vec![(-2, 0.5), (2, 0.5)]).unwrap(),
        ])
        .unwrap();
        let obj = Objective::root(1);
        let solved = solve_embedding(
            &seq,
            &obj,
            &SolveParams {
                horizon: Some(64),
                ..SolveParams::default()
            },
        )
        .unwrap();
        let bf = extract_barriers(&solved.outcome.rule, &obj).unwrap();
        let sim = simulate(&bf, seq.initial(), 100_000, 42).unwrap();
        assert!(
            (sim.objective_mean - 24.0).abs() <= 3.0 * sim.objective_se,
            "mean {} se {}",
            sim.objective_mean,
            sim.objective_se
        );
    }

    #[test]
    fn zero_paths_rejected() {
        let (seq, bf, _) = first_hit_setup();
        assert!(matches!(
            simulate(&bf, seq.initial(), 0, 1),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn identical_across_worker_counts() {
        let (seq, bf, _) = first_hit_setup();
        let run = |threads: usize| {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap();
            pool.install(|| simulate(&bf, seq.initial(), 20_000, 7).unwrap())
        };
        let a = run(1);
        let b = run(4);
        assert_eq!(a.counts, b.counts);
        assert_eq!(a.objective_mean.to_bits(), b.objective_mean.to_bits());
    }

    #[test]
    fn z_scores_small_on_matching_model() {
        let (seq, bf, solved) = first_hit_setup();
        let prop = propagate_exact(&solved.model, &bf, seq.initial()).unwrap();
        let sim = simulate(&bf, seq.initial(), 100_000, 42).unwrap();
        assert!(sim.max_abs_z(&prop) <= 4.0);
    }
}
