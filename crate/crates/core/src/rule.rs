//! The discrete randomized multi-stopping time extracted from an LP
//! solution: per-colour stop/continue mass on every lattice state.

use crate::lattice::{LatticeModel, State, StateId};
use crate::scalar::Scalar;
use std::collections::BTreeMap;
use std::sync::Arc;

/// Per-colour stopping data on a lattice model.
///
/// `stop[i][s]` / `cont[i][s]` are the mass of colour `i` stopping /
/// continuing at state `s`; `arrive = stop + cont`. Stop fractions are
/// `stop / arrive` wherever arrival mass is positive. Support sets use the
/// scalar's mass tolerance (1e-9 in float mode, exact positivity in
/// rational mode).
#[derive(Clone, Debug)]
pub struct StoppingRule<S: Scalar> {
    pub model: Arc<LatticeModel>,
    pub n_colours: usize,
    pub stop: Vec<Vec<S>>,
    pub cont: Vec<Vec<S>>,
    /// Marginal shortfall per colour and atom (the LP's def variables).
    pub shortfall: Vec<BTreeMap<i64, S>>,
    /// Marginal overshoot per colour and atom (the LP's excess variables).
    pub overshoot: Vec<BTreeMap<i64, S>>,
    /// Mass stopped at positions outside the colour's target support.
    pub off_support: Vec<S>,
}

impl<S: Scalar> StoppingRule<S> {
    pub fn arrive(&self, colour: usize, s: StateId) -> S {
        self.stop[colour][s].clone() + self.cont[colour][s].clone()
    }

    /// Stop fraction at a state, `None` where no mass arrives.
    pub fn fraction(&self, colour: usize, s: StateId) -> Option<S> {
        let a = self.arrive(colour, s);
        if a > S::mass_tol() {
            Some(self.stop[colour][s].clone() / a)
        } else {
            None
        }
    }

    pub fn in_stop_support(&self, colour: usize, s: StateId) -> bool {
        self.stop[colour][s] > S::mass_tol()
    }

    pub fn in_run_support(&self, colour: usize, s: StateId) -> bool {
        self.cont[colour][s] > S::mass_tol()
    }

    /// States with positive stop mass for a colour.
    pub fn stop_states(&self, colour: usize) -> impl Iterator<Item = StateId> + '_ {
        (0..self.model.n_states()).filter(move |&s| self.in_stop_support(colour, s))
    }

    pub fn run_states(&self, colour: usize) -> impl Iterator<Item = StateId> + '_ {
        (0..self.model.n_states()).filter(move |&s| self.in_run_support(colour, s))
    }

    /// Stopped position law of a colour.
    pub fn embedded_marginal(&self, colour: usize) -> BTreeMap<i64, S> {
        let mut out: BTreeMap<i64, S> = BTreeMap::new();
        for (sid, mass) in self.stop[colour].iter().enumerate() {
            if !mass.is_zero() {
                let x = self.model.state(sid).x;
                let e = out.entry(x).or_insert_with(S::zero);
                *e += mass.clone();
            }
        }
        out
    }

    /// Total stopped mass of a colour (1 up to solver tolerance; flow
    /// conservation forces every particle to stop by the horizon).
    pub fn total_stopped(&self, colour: usize) -> S {
        let mut acc = S::zero();
        for v in &self.stop[colour] {
            acc += v.clone();
        }
        acc
    }

    /// Unstopped mass, `1 - total_stopped`.
    pub fn deficiency(&self, colour: usize) -> S {
        S::one() - self.total_stopped(colour)
    }

    /// Total marginal shortfall of a colour (sum of def variables).
    pub fn marginal_shortfall(&self, colour: usize) -> S {
        let mut acc = S::zero();
        for v in self.shortfall[colour].values() {
            acc += v.clone();
        }
        acc
    }

    pub fn marginal_overshoot(&self, colour: usize) -> S {
        let mut acc = S::zero();
        for v in self.overshoot[colour].values() {
            acc += v.clone();
        }
        acc
    }

    /// `E[tau_i]` under the rule.
    pub fn expected_time(&self, colour: usize) -> S {
        let mut acc = S::zero();
        for (sid, mass) in self.stop[colour].iter().enumerate() {
            if !mass.is_zero() {
                acc += S::from_i64(self.model.state(sid).t as i64) * mass.clone();
            }
        }
        acc
    }

    /// Mean of the embedded marginal (martingale check).
    pub fn embedded_mean(&self, colour: usize) -> S {
        let mut acc = S::zero();
        for (sid, mass) in self.stop[colour].iter().enumerate() {
            if !mass.is_zero() {
                acc += S::from_i64(self.model.state(sid).x) * mass.clone();
            }
        }
        acc
    }

    /// Stop mass forced by the horizon at interior positions, per colour.
    /// Nonzero values quantify time truncation; escalation drives them
    /// below the mass tolerance in float mode.
    pub fn horizon_interior_stop(&self, colour: usize) -> S {
        let mut acc = S::zero();
        for (sid, mass) in self.stop[colour].iter().enumerate() {
            if !mass.is_zero() {
                let st = self.model.state(sid);
                if st.t == self.model.horizon && st.x.abs() < self.model.l_box {
                    acc += mass.clone();
                }
            }
        }
        acc
    }

    /// Largest truncation artefact over colours: marginal mismatch plus
    /// off-support and horizon-forced stop mass.
    pub fn max_truncation_stray(&self) -> f64 {
        (0..self.n_colours)
            .map(|i| {
                self.marginal_shortfall(i).to_f64()
                    + self.marginal_overshoot(i).to_f64()
                    + self.off_support[i].to_f64()
                    + self.horizon_interior_stop(i).to_f64()
            })
            .fold(0.0, f64::max)
    }

    pub fn state(&self, sid: StateId) -> State {
        self.model.state(sid)
    }

    /// Moves `mass` from the stop account of `from` to `to` for a colour,
    /// adjusting continuation mass so arrivals stay fixed. Used by tests to
    /// manufacture structure violations; the result is generally not a
    /// feasible flow.
    pub fn perturb_stop(&mut self, colour: usize, from: StateId, to: StateId, mass: S) {
        self.stop[colour][from] -= mass.clone();
        self.cont[colour][from] += mass.clone();
        self.stop[colour][to] += mass.clone();
        self.cont[colour][to] -= mass;
    }
}
