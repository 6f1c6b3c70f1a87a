//! Geometric certification of optimizers: no position may carry running
//! mass strictly beyond stopped mass in the family's barrier order
//! (otherwise swapping the two continuations would improve the objective),
//! plus an exhaustive finite-depth oracle for the raw swap inequality.

use crate::barriers::{barrier_coord, barrier_level};
use crate::error::Error;
use crate::objective::Family;
use crate::rule::StoppingRule;
use crate::scalar::Scalar;
use num_bigint::BigInt;
use num_rational::BigRational;
use serde::Serialize;

/// One violating pair on a fiber, with the extremal witnesses.
#[derive(Clone, Debug, Serialize)]
pub struct BadPair {
    pub colour: usize,
    pub fiber: i64,
    /// Family coordinate (time / max / displacement) of the running state.
    pub running_coord: i64,
    pub stopped_coord: i64,
    pub running_mass: f64,
    pub stopped_mass: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct BadPairReport {
    pub family: String,
    pub violations: Vec<BadPair>,
}

impl BadPairReport {
    pub fn pass(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialises")
    }
}

/// Checks the family's stop-go superset on the rule's support sets: per
/// colour and fiber, the largest running barrier level must not exceed the
/// smallest stopped level. Hobson-Pedersen stops at the running maximum are
/// exempt (only off-diagonal stopped states constrain the left barrier).
pub fn check_no_bad_pairs<S: Scalar>(
    rule: &StoppingRule<S>,
    family: Family,
) -> Result<BadPairReport, Error> {
    let required = family.required_kind();
    if rule.model.kind != required {
        return Err(Error::IncompatibleStateKind {
            family: family.name().into(),
            required: required.to_string(),
            actual: rule.model.kind.to_string(),
        });
    }
    let mut violations = Vec::new();
    for colour in 0..rule.n_colours {
        // fiber -> (max running level, min stopped level) with witnesses.
        use std::collections::BTreeMap;
        let mut run_max: BTreeMap<i64, (i64, S)> = BTreeMap::new();
        let mut stop_min: BTreeMap<i64, (i64, S)> = BTreeMap::new();
        for sid in 0..rule.model.n_states() {
            let st = rule.model.state(sid);
            let level = barrier_level(family, &st);
            if rule.in_run_support(colour, sid) {
                let e = run_max.entry(st.x);
                match e {
                    std::collections::btree_map::Entry::Vacant(v) => {
                        v.insert((level, rule.cont[colour][sid].clone()));
                    }
                    std::collections::btree_map::Entry::Occupied(mut o) => {
                        if level > o.get().0 {
                            o.insert((level, rule.cont[colour][sid].clone()));
                        }
                    }
                }
            }
            let hp_diag = family == Family::HobsonPedersen && st.x == st.aux;
            if !hp_diag && rule.in_stop_support(colour, sid) {
                let e = stop_min.entry(st.x);
                match e {
                    std::collections::btree_map::Entry::Vacant(v) => {
                        v.insert((level, rule.stop[colour][sid].clone()));
                    }
                    std::collections::btree_map::Entry::Occupied(mut o) => {
                        if level < o.get().0 {
                            o.insert((level, rule.stop[colour][sid].clone()));
                        }
                    }
                }
            }
        }
        for (x, (run_level, run_mass)) in &run_max {
            if let Some((stop_level, stop_mass)) = stop_min.get(x) {
                if run_level > stop_level {
                    violations.push(BadPair {
                        colour: colour + 1,
                        fiber: *x,
                        running_coord: level_coord(family, *run_level),
                        stopped_coord: level_coord(family, *stop_level),
                        running_mass: run_mass.to_f64(),
                        stopped_mass: stop_mass.to_f64(),
                    });
                }
            }
        }
    }
    Ok(BadPairReport {
        family: family.name().into(),
        violations,
    })
}

fn level_coord(family: Family, level: i64) -> i64 {
    match family {
        Family::Root | Family::AzemaYor | Family::MonotoneTransport => level,
        Family::Rost | Family::HobsonPedersen => -level,
    }
}

// --- exhaustive swap oracle ------------------------------------------------

/// Payoffs the finite-depth oracle can evaluate exactly.
#[derive(Clone, Debug)]
pub enum SgPayoff {
    /// `sum_j t_j^kappa` (minimised).
    RootConvexTime(u32),
    /// `-sum_j t_j^kappa` (Rost in minimisation convention).
    RostConvexTime(u32),
    /// `-sum_j max_j` (Azema-Yor in minimisation convention).
    AzemaYorMax,
    /// `sum_j (x_j - x_0)^3` (monotone transport with the cubic cost).
    MonotoneCubic,
}

impl SgPayoff {
    pub fn for_family(family: Family, kappa: u32) -> Result<Self, Error> {
        match family {
            Family::Root => Ok(SgPayoff::RootConvexTime(kappa)),
            Family::Rost => Ok(SgPayoff::RostConvexTime(kappa)),
            Family::AzemaYor => Ok(SgPayoff::AzemaYorMax),
            Family::MonotoneTransport => Ok(SgPayoff::MonotoneCubic),
            Family::HobsonPedersen => Err(Error::UnsupportedFamily(
                "hobson_pedersen (stop-at-max component has no finite-tree form)".into(),
            )),
        }
    }
}

/// A finished path prefix: start value, +-1 steps, and the times of earlier
/// stops along it. The prefix end is the pending stop decision.
#[derive(Clone, Debug)]
pub struct PathPrefix {
    pub start: i64,
    pub steps: Vec<i64>,
    pub stop_times: Vec<usize>,
}

impl PathPrefix {
    pub fn end_time(&self) -> usize {
        self.steps.len()
    }

    pub fn end_value(&self) -> i64 {
        self.start + self.steps.iter().sum::<i64>()
    }

    fn validate(&self) -> Result<(), Error> {
        if self.steps.iter().any(|s| s.abs() != 1) {
            return Err(Error::Precondition("prefix steps must be +-1".into()));
        }
        let mut last = 0usize;
        for &s in &self.stop_times {
            if s < last || s > self.steps.len() {
                return Err(Error::Precondition(
                    "prefix stop times must be increasing within the prefix".into(),
                ));
            }
            last = s;
        }
        Ok(())
    }

    /// Path value at integer time `u <= end_time`.
    fn value_at(&self, u: usize) -> i64 {
        self.start + self.steps[..u].iter().sum::<i64>()
    }

    fn running_max_at(&self, u: usize) -> i64 {
        let mut m = self.start;
        let mut v = self.start;
        for &s in &self.steps[..u] {
            v += s;
            m = m.max(v);
        }
        m
    }
}

/// One enumerated pair of stopping-time families with both sides of the
/// swap inequality. Times are tabulated per leaf of the depth-`d` tree.
#[derive(Clone, Debug)]
pub struct SgPairOutcome {
    pub sigma_leaf_times: Vec<Vec<u8>>,
    pub tau_leaf_times: Vec<Vec<u8>>,
    pub lhs: BigRational,
    pub rhs: BigRational,
}

#[derive(Clone, Debug)]
pub struct SgOracleReport {
    pub depth: usize,
    pub colours: usize,
    pub n_single_stopping_times: usize,
    pub pairs: Vec<SgPairOutcome>,
    pub weak_all: bool,
    pub strict_all: bool,
}

/// Number of deterministic stopping times on the depth-`d` binary tree:
/// `N(0) = 1`, `N(d) = 1 + N(d-1)^2`.
pub fn count_stopping_times(depth: usize) -> usize {
    let mut n = 1usize;
    for _ in 0..depth {
        n = 1 + n * n;
    }
    n
}

/// Stopping times tabulated as the stop time of each of the `2^depth` leaf
/// paths (bit k of the leaf index = 1 means step k goes up).
fn enumerate_stopping_times(depth: usize) -> Vec<Vec<u8>> {
    fn build(depth_left: usize) -> Vec<Vec<u8>> {
        if depth_left == 0 {
            return vec![vec![0]];
        }
        let subs = build(depth_left - 1);
        let mut out = Vec::with_capacity(1 + subs.len() * subs.len());
        let leaves = 1usize << depth_left;
        out.push(vec![0u8; leaves]);
        for down in &subs {
            for up in &subs {
                // Bit 0 of the leaf index is the first step.
                let mut table = vec![0u8; leaves];
                for (leaf, slot) in table.iter_mut().enumerate() {
                    let first_up = leaf & 1 == 1;
                    let rest = leaf >> 1;
                    let sub = if first_up { up } else { down };
                    *slot = 1 + sub[rest];
                }
                out.push(table);
            }
        }
        out
    }
    build(depth)
}

/// Increasing chains of `k` stopping times (pointwise `<=` on every leaf).
fn chains(tables: &[Vec<u8>], k: usize, first_fixed_zero: bool) -> Vec<Vec<usize>> {
    let le = |a: &[u8], b: &[u8]| a.iter().zip(b).all(|(x, y)| x <= y);
    let zero_idx = tables
        .iter()
        .position(|t| t.iter().all(|&v| v == 0))
        .expect("zero time present");
    let firsts: Vec<usize> = if first_fixed_zero {
        vec![zero_idx]
    } else {
        (0..tables.len()).filter(|&i| i != zero_idx).collect()
    };
    let mut out: Vec<Vec<usize>> = firsts.into_iter().map(|f| vec![f]).collect();
    for _ in 1..k {
        let mut next = Vec::new();
        for chain in &out {
            let last = &tables[*chain.last().unwrap()];
            for (j, t) in tables.iter().enumerate() {
                if le(last, t) {
                    let mut c = chain.clone();
                    c.push(j);
                    next.push(c);
                }
            }
        }
        out = next;
    }
    out
}

struct Continuation {
    /// Cumulative walk values per leaf and time (offsets from 0).
    values: Vec<Vec<i64>>,
    maxes: Vec<Vec<i64>>,
}

impl Continuation {
    fn new(depth: usize) -> Self {
        let leaves = 1usize << depth.max(0);
        let mut values = Vec::with_capacity(leaves);
        let mut maxes = Vec::with_capacity(leaves);
        for leaf in 0..leaves {
            let mut v = vec![0i64; depth + 1];
            let mut m = vec![0i64; depth + 1];
            for step in 0..depth {
                let dx = if (leaf >> step) & 1 == 1 { 1 } else { -1 };
                v[step + 1] = v[step] + dx;
                m[step + 1] = m[step].max(v[step + 1]);
            }
            values.push(v);
            maxes.push(m);
        }
        Continuation { values, maxes }
    }
}

/// Payoff of the branch started from `prefix`, whose pending and later
/// stops happen at continuation times `offsets` (in tree steps).
fn branch_payoff(
    payoff: &SgPayoff,
    prefix: &PathPrefix,
    cont: &Continuation,
    leaf: usize,
    offsets: &[u8],
) -> BigRational {
    let base_time = prefix.end_time() as i64;
    let base_value = prefix.end_value();
    let int = |v: i64| BigRational::from_integer(BigInt::from(v));
    let mut total = BigRational::from_integer(BigInt::from(0));
    match payoff {
        SgPayoff::RootConvexTime(kappa) | SgPayoff::RostConvexTime(kappa) => {
            let sign = if matches!(payoff, SgPayoff::RostConvexTime(_)) {
                -1
            } else {
                1
            };
            for &s in &prefix.stop_times {
                total += int(sign * (s as i64).pow(*kappa));
            }
            for &o in offsets {
                total += int(sign * (base_time + o as i64).pow(*kappa));
            }
        }
        SgPayoff::AzemaYorMax => {
            for &s in &prefix.stop_times {
                total += int(-prefix.running_max_at(s));
            }
            let prefix_max = prefix.running_max_at(prefix.end_time());
            for &o in offsets {
                let m = prefix_max.max(base_value + cont.maxes[leaf][o as usize]);
                total += int(-m);
            }
        }
        SgPayoff::MonotoneCubic => {
            let cost = |v: i64| {
                let d = v - prefix.start;
                int(d * d * d)
            };
            for &s in &prefix.stop_times {
                total += cost(prefix.value_at(s));
            }
            for &o in offsets {
                total += cost(base_value + cont.values[leaf][o as usize]);
            }
        }
    }
    total
}

/// Exhaustively verifies the swap inequality: for every pair of increasing
/// stopping-time families `(sigma_j)` (all nondegenerate) and `(tau_j)`
/// (with `tau_i = 0`), compares keeping the running prefix `f` going and
/// the stopped prefix `g` stopped against the swapped families.
pub fn sg_oracle(
    payoff: &SgPayoff,
    depth: usize,
    colours: usize,
    f: &PathPrefix,
    g: &PathPrefix,
) -> Result<SgOracleReport, Error> {
    if depth > 4 {
        return Err(Error::DepthTooLarge(depth));
    }
    if !(1..=2).contains(&colours) {
        return Err(Error::Precondition(
            "the oracle enumerates 1 or 2 remaining colours".into(),
        ));
    }
    f.validate()?;
    g.validate()?;
    if f.end_value() != g.end_value() {
        return Err(Error::Precondition(
            "prefixes must share their endpoint value".into(),
        ));
    }
    if f.stop_times.len() != g.stop_times.len() {
        return Err(Error::Precondition(
            "prefixes must carry the same number of earlier stops".into(),
        ));
    }

    let tables = enumerate_stopping_times(depth);
    let cont = Continuation::new(depth);
    let leaves = 1usize << depth;
    let prob = BigRational::new(BigInt::from(1), BigInt::from(leaves as i64));

    let sigma_chains = chains(&tables, colours, false);
    let tau_chains = chains(&tables, colours, true);

    let mut pairs = Vec::new();
    let mut weak_all = true;
    let mut strict_all = true;
    for sc in &sigma_chains {
        for tc in &tau_chains {
            let mut lhs = BigRational::from_integer(BigInt::from(0));
            let mut rhs = BigRational::from_integer(BigInt::from(0));
            for leaf in 0..leaves {
                let sigma: Vec<u8> = sc.iter().map(|&i| tables[i][leaf]).collect();
                let tau: Vec<u8> = tc.iter().map(|&i| tables[i][leaf]).collect();
                // k = first j with tau_{j+1} >= sigma_j (the swap stops
                // there); everything up to k is exchanged.
                let mut k = colours - 1;
                for j in 0..colours - 1 {
                    if tau[j + 1] >= sigma[j] {
                        k = j;
                        break;
                    }
                }
                let sigma_tilde: Vec<u8> = (0..colours)
                    .map(|j| if j <= k { tau[j] } else { sigma[j] })
                    .collect();
                let tau_tilde: Vec<u8> = (0..colours)
                    .map(|j| if j <= k { sigma[j] } else { tau[j] })
                    .collect();

                // Left side: f keeps running with sigma; g stays stopped
                // now (tau_i = 0) with its later stops.
                lhs += prob.clone()
                    * (branch_payoff(payoff, f, &cont, leaf, &sigma)
                        + branch_payoff(payoff, g, &cont, leaf, &tau));
                // Right side: f stops now (sigma~_i = tau_i = 0), g resumes.
                rhs += prob.clone()
                    * (branch_payoff(payoff, f, &cont, leaf, &sigma_tilde)
                        + branch_payoff(payoff, g, &cont, leaf, &tau_tilde));
            }
            if lhs < rhs {
                weak_all = false;
            }
            if lhs <= rhs {
                strict_all = false;
            }
            pairs.push(SgPairOutcome {
                sigma_leaf_times: sc.iter().map(|&i| tables[i].clone()).collect(),
                tau_leaf_times: tc.iter().map(|&i| tables[i].clone()).collect(),
                lhs,
                rhs,
            });
        }
    }
    Ok(SgOracleReport {
        depth,
        colours,
        n_single_stopping_times: tables.len(),
        pairs,
        weak_all,
        strict_all,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lp::{solve_embedding, SolveParams};
    use crate::measures::{DiscreteMeasure, MarginalSequence};
    use crate::objective::Objective;

    #[test]
    fn stopping_time_counts_follow_the_recursion() {
        assert_eq!(count_stopping_times(0), 1);
        assert_eq!(count_stopping_times(1), 2);
        assert_eq!(count_stopping_times(2), 5);
        assert_eq!(count_stopping_times(3), 26);
        assert_eq!(enumerate_stopping_times(2).len(), 5);
        assert_eq!(enumerate_stopping_times(3).len(), 26);
    }

    #[test]
    fn optimal_root_rule_has_no_bad_pairs() {
        let seq = MarginalSequence::new(vec![
            DiscreteMeasure::dirac(0),
            DiscreteMeasure::new(vec![(-1, 0.5), (1, 0.5)]).unwrap(),
            DiscreteMeasure::new(vec![(-2, 0.4), (0, 0.2), (2, 0.4)]).unwrap(),
        ])
        .unwrap();
        let solved = solve_embedding(&seq, &Objective::root(2), &SolveParams::default()).unwrap();
        let report = check_no_bad_pairs(&solved.outcome.rule, Family::Root).unwrap();
        assert!(report.pass(), "{}", report.to_json());
    }

    #[test]
    fn constructed_same_colour_violation_is_reported() {
        let seq = MarginalSequence::new(vec![
            DiscreteMeasure::dirac(0),
            DiscreteMeasure::new(vec![(-2, 0.5), (2, 0.5)]).unwrap(),
        ])
        .unwrap();
        let solved = solve_embedding(
            &seq,
            &Objective::root(1),
            &SolveParams {
                horizon: Some(64),
                ..SolveParams::default()
            },
        )
        .unwrap();
        let mut rule = solved.outcome.rule.clone();
        // Stop some mass early at (1, 1) while mass keeps running through
        // (3, 1): a same-colour stop-go pair.
        let early = rule
            .model
            .id_of(&crate::lattice::State { t: 1, x: 1, aux: 0 })
            .unwrap();
        let late = rule
            .model
            .id_of(&crate::lattice::State { t: 3, x: 1, aux: 0 })
            .unwrap();
        rule.stop[0][early] += 1e-3;
        rule.cont[0][early] -= 1e-3;
        let _ = late; // running support at (3,1) already positive
        let report = check_no_bad_pairs(&rule, Family::Root).unwrap();
        assert!(!report.pass());
        assert_eq!(report.violations[0].fiber, 1);
        assert_eq!(report.violations[0].stopped_coord, 1);
    }

    #[test]
    fn first_hit_rule_passes() {
        let seq = MarginalSequence::new(vec![
            DiscreteMeasure::dirac(0),
            DiscreteMeasure::new(vec![(-1, 0.5), (1, 0.5)]).unwrap(),
        ])
        .unwrap();
        let solved = solve_embedding(&seq, &Objective::root(1), &SolveParams::default()).unwrap();
        let report = check_no_bad_pairs(&solved.outcome.rule, Family::Root).unwrap();
        assert!(report.pass());
    }

    #[test]
    fn oracle_strict_for_root_when_running_prefix_is_older() {
        // f has run 2 steps (0 -> 1 -> 0), g is freshly started at 0.
        let f = PathPrefix {
            start: 0,
            steps: vec![1, -1],
            stop_times: vec![],
        };
        let g = PathPrefix {
            start: 0,
            steps: vec![],
            stop_times: vec![],
        };
        let report = sg_oracle(&SgPayoff::RootConvexTime(2), 2, 1, &f, &g).unwrap();
        assert_eq!(report.n_single_stopping_times, 5);
        assert!(report.weak_all);
        assert!(report.strict_all);
    }

    #[test]
    fn oracle_equal_prefixes_not_strict() {
        let f = PathPrefix {
            start: 0,
            steps: vec![1, -1],
            stop_times: vec![],
        };
        let report = sg_oracle(&SgPayoff::RootConvexTime(2), 2, 1, &f, &f.clone()).unwrap();
        assert!(report.weak_all);
        assert!(!report.strict_all);
    }

    #[test]
    fn oracle_depth_limit() {
        let f = PathPrefix {
            start: 0,
            steps: vec![],
            stop_times: vec![],
        };
        assert!(matches!(
            sg_oracle(&SgPayoff::RootConvexTime(2), 5, 1, &f, &f.clone()),
            Err(Error::DepthTooLarge(5))
        ));
    }

    #[test]
    fn oracle_rejects_hobson_pedersen() {
        assert!(matches!(
            SgPayoff::for_family(Family::HobsonPedersen, 2),
            Err(Error::UnsupportedFamily(_))
        ));
    }

    #[test]
    fn oracle_two_colour_chains_are_increasing() {
        let f = PathPrefix {
            start: 0,
            steps: vec![1, -1],
            stop_times: vec![],
        };
        let g = PathPrefix {
            start: 0,
            steps: vec![],
            stop_times: vec![],
        };
        let report = sg_oracle(&SgPayoff::RootConvexTime(2), 2, 2, &f, &g).unwrap();
        assert!(report.weak_all);
        for pair in &report.pairs {
            for (a, b) in pair
                .sigma_leaf_times
                .iter()
                .zip(pair.sigma_leaf_times.iter().skip(1))
            {
                assert!(a.iter().zip(b).all(|(x, y)| x <= y));
            }
            assert!(pair.tau_leaf_times[0].iter().all(|&v| v == 0));
        }
    }
}
