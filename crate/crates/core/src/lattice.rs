//! Finite time-space state graph of the simple +-1 random walk, optionally
//! augmented by the running maximum or the starting point.

use crate::error::Error;
use crate::measures::MarginalSequence;
use crate::scalar::Scalar;
use std::collections::HashMap;

/// Coordinate system of a lattice state.
///
/// `Plain` carries `(t, x)`, `MaxAugmented` adds the running maximum,
/// `StartAugmented` adds the starting atom. Time-based barriers (Root,
/// Rost) live on `Plain`; maximum barriers (Azema-Yor, Hobson-Pedersen) on
/// `MaxAugmented`; displacement barriers (monotone transport) on
/// `StartAugmented`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StateKind {
    Plain,
    MaxAugmented,
    StartAugmented,
}

impl std::fmt::Display for StateKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            StateKind::Plain => write!(f, "plain"),
            StateKind::MaxAugmented => write!(f, "max-augmented"),
            StateKind::StartAugmented => write!(f, "start-augmented"),
        }
    }
}

/// One walk state. `aux` is the running maximum (MaxAugmented), the
/// starting atom (StartAugmented), or 0 (Plain).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct State {
    pub t: u32,
    pub x: i64,
    pub aux: i64,
}

pub type StateId = usize;

/// Immutable state graph: states sorted by `(t, x, aux)`, two successors per
/// interior state with probability 1/2 each, no transitions out of `t = T`
/// or off the wall `|x| = l_box` (mass arriving there is forced to stop).
#[derive(Clone, Debug)]
pub struct LatticeModel {
    pub kind: StateKind,
    pub horizon: u32,
    pub l_box: i64,
    pub pad: u32,
    states: Vec<State>,
    index: HashMap<State, StateId>,
    /// Successors (up, down) of each state; `None` where movement is forced
    /// to stop (horizon or wall).
    succs: Vec<Option<(StateId, StateId)>>,
    preds: Vec<Vec<StateId>>,
    /// State of each starting atom, aligned with the order of `mu0` atoms.
    initial: Vec<StateId>,
}

impl LatticeModel {
    pub fn states(&self) -> &[State] {
        &self.states
    }

    pub fn n_states(&self) -> usize {
        self.states.len()
    }

    pub fn state(&self, id: StateId) -> State {
        self.states[id]
    }

    pub fn id_of(&self, s: &State) -> Option<StateId> {
        self.index.get(s).copied()
    }

    pub fn succs(&self, id: StateId) -> Option<(StateId, StateId)> {
        self.succs[id]
    }

    pub fn preds(&self, id: StateId) -> &[StateId] {
        &self.preds[id]
    }

    /// True when continuation out of this state is impossible.
    pub fn is_forced_stop(&self, id: StateId) -> bool {
        self.succs[id].is_none()
    }

    pub fn is_wall(&self, id: StateId) -> bool {
        self.states[id].x.abs() == self.l_box
    }

    pub fn is_horizon(&self, id: StateId) -> bool {
        self.states[id].t == self.horizon
    }

    pub fn initial_states(&self) -> &[StateId] {
        &self.initial
    }

    /// Successor state of `s` after stepping to `x + dx`.
    fn step(kind: StateKind, s: State, dx: i64) -> State {
        let x = s.x + dx;
        let aux = match kind {
            StateKind::Plain => 0,
            StateKind::MaxAugmented => s.aux.max(x),
            StateKind::StartAugmented => s.aux,
        };
        State { t: s.t + 1, x, aux }
    }
}

/// Heuristic horizon `8 n L^2`; the Phase-0 feasibility check escalates when
/// it falls short. Clamped to at least 1 so degenerate sequences still build.
pub fn default_horizon<S: Scalar>(seq: &MarginalSequence<S>) -> u32 {
    let n = seq.n_colours() as u32;
    let l = seq.max_abs_support() as u32;
    (8 * n * l * l).max(1)
}

/// Builds the reachable state graph for `seq` within the box
/// `|x| <= max |support| + pad` up to time `T`.
pub fn build_model<S: Scalar>(
    seq: &MarginalSequence<S>,
    kind: StateKind,
    horizon: u32,
    pad: u32,
) -> Result<LatticeModel, Error> {
    let l_box = (seq.max_abs_support() + pad as i64).max(1);
    let start_atoms: Vec<i64> = seq.initial().positions().collect();
    build_model_raw(kind, horizon, l_box, pad, &start_atoms)
}

/// State-graph construction from explicit box and start atoms; used when a
/// model must be rebuilt from recorded parameters rather than a sequence.
pub fn build_model_raw(
    kind: StateKind,
    horizon: u32,
    l_box: i64,
    pad: u32,
    start_atoms: &[i64],
) -> Result<LatticeModel, Error> {
    if start_atoms.iter().all(|x| x.abs() > l_box) {
        return Err(Error::EmptyReachableSet);
    }

    // Breadth-first sweep by time slice. Slices are generated in sorted
    // order so the final state list is (t, x, aux)-lexicographic.
    let mut states: Vec<State> = Vec::new();
    let mut index: HashMap<State, StateId> = HashMap::new();
    let mut frontier: Vec<State> = start_atoms
        .iter()
        .filter(|x0| x0.abs() <= l_box)
        .map(|&x0| State {
            t: 0,
            x: x0,
            aux: match kind {
                StateKind::Plain => 0,
                StateKind::MaxAugmented | StateKind::StartAugmented => x0,
            },
        })
        .collect();
    frontier.sort();
    frontier.dedup();

    let mut push = |states: &mut Vec<State>, index: &mut HashMap<State, StateId>, s: State| {
        index.entry(s).or_insert_with(|| {
            states.push(s);
            states.len() - 1
        });
    };
    for s in &frontier {
        push(&mut states, &mut index, *s);
    }

    for _t in 0..horizon {
        let mut next: Vec<State> = Vec::new();
        for s in &frontier {
            if s.x.abs() == l_box {
                continue; // wall: forced stop
            }
            for dx in [-1i64, 1] {
                let nx = LatticeModel::step(kind, *s, dx);
                if nx.x.abs() <= l_box {
                    next.push(nx);
                }
            }
        }
        next.sort();
        next.dedup();
        for s in &next {
            push(&mut states, &mut index, *s);
        }
        frontier = next;
        if frontier.is_empty() {
            break;
        }
    }

    // Re-sort states lexicographically and rebuild the index.
    states.sort();
    index.clear();
    for (i, s) in states.iter().enumerate() {
        index.insert(*s, i);
    }

    let mut succs: Vec<Option<(StateId, StateId)>> = vec![None; states.len()];
    let mut preds: Vec<Vec<StateId>> = vec![Vec::new(); states.len()];
    for (id, s) in states.iter().enumerate() {
        if s.t == horizon || s.x.abs() == l_box {
            continue;
        }
        let up = index[&LatticeModel::step(kind, *s, 1)];
        let down = index[&LatticeModel::step(kind, *s, -1)];
        succs[id] = Some((up, down));
        preds[up].push(id);
        preds[down].push(id);
    }

    let initial = start_atoms
        .iter()
        .map(|&x0| {
            let s = State {
                t: 0,
                x: x0,
                aux: match kind {
                    StateKind::Plain => 0,
                    StateKind::MaxAugmented | StateKind::StartAugmented => x0,
                },
            };
            index.get(&s).copied().ok_or(Error::EmptyReachableSet)
        })
        .collect::<Result<Vec<_>, _>>()?;

    Ok(LatticeModel {
        kind,
        horizon,
        l_box,
        pad,
        states,
        index,
        succs,
        preds,
        initial,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::{DiscreteMeasure, MarginalSequence};

    fn seq_d0_coin() -> MarginalSequence<f64> {
        MarginalSequence::new(vec![
            DiscreteMeasure::dirac(0),
            DiscreteMeasure::new(vec![(-1, 0.5), (1, 0.5)]).unwrap(),
        ])
        .unwrap()
    }

    #[test]
    fn plain_t2_box2_has_six_states() {
        let m = build_model(&seq_d0_coin(), StateKind::Plain, 2, 1).unwrap();
        assert_eq!(m.l_box, 2);
        let got: Vec<(u32, i64)> = m.states().iter().map(|s| (s.t, s.x)).collect();
        assert_eq!(
            got,
            vec![(0, 0), (1, -1), (1, 1), (2, -2), (2, 0), (2, 2)]
        );
    }

    #[test]
    fn max_augmented_splits_by_running_max() {
        let m = build_model(&seq_d0_coin(), StateKind::MaxAugmented, 2, 1).unwrap();
        // Both (2,0,0) (down-up) and (2,0,1) (up-down) are reachable.
        assert!(m.id_of(&State { t: 2, x: 0, aux: 0 }).is_some());
        assert!(m.id_of(&State { t: 2, x: 0, aux: 1 }).is_some());
        for (id, s) in m.states().iter().enumerate() {
            if let Some((up, down)) = m.succs(id) {
                assert!(m.state(up).aux >= s.aux);
                assert!(m.state(down).aux >= s.aux);
            }
        }
    }

    #[test]
    fn horizon_zero_has_single_state() {
        let m = build_model(&seq_d0_coin(), StateKind::Plain, 0, 1).unwrap();
        assert_eq!(m.n_states(), 1);
    }

    #[test]
    fn default_horizon_formula() {
        let seq = seq_d0_coin();
        assert_eq!(default_horizon(&seq), 8);
        let seq2 = MarginalSequence::<f64>::new(vec![
            DiscreteMeasure::dirac(0),
            DiscreteMeasure::new(vec![(-2, 0.5), (2, 0.5)]).unwrap(),
        ])
        .unwrap();
        assert_eq!(default_horizon(&seq2), 32);
        let seq3 = MarginalSequence::<f64>::new(vec![
            DiscreteMeasure::dirac(0),
            DiscreteMeasure::new(vec![(-1, 0.5), (1, 0.5)]).unwrap(),
            DiscreteMeasure::new(vec![(-2, 0.5), (2, 0.5)]).unwrap(),
        ])
        .unwrap();
        assert_eq!(default_horizon(&seq3), 64);
    }

    #[test]
    fn plain_state_count_matches_closed_form() {
        // Within a wide box the count at time t is t+1 (parity thins the
        // slice); with a wall it saturates.
        for horizon in 0..=10u32 {
            let m = build_model(&seq_d0_coin(), StateKind::Plain, horizon, 4).unwrap();
            let l = m.l_box;
            let mut expect = 0usize;
            for t in 0..=horizon as i64 {
                let mut cnt = 0usize;
                for x in -l..=l {
                    if (x - t).rem_euclid(2) == 0 && x.abs() <= t {
                        cnt += 1;
                    }
                }
                expect += cnt;
            }
            assert_eq!(m.n_states(), expect, "horizon {horizon}");
        }
    }

    #[test]
    fn transition_probabilities_sum_to_one_off_the_boundary() {
        let m = build_model(&seq_d0_coin(), StateKind::Plain, 6, 2).unwrap();
        for id in 0..m.n_states() {
            let s = m.state(id);
            if s.t < m.horizon && s.x.abs() < m.l_box {
                assert!(m.succs(id).is_some());
            } else {
                assert!(m.is_forced_stop(id));
            }
        }
    }

    #[test]
    fn start_augmented_keeps_start_atom() {
        let seq = MarginalSequence::<f64>::new(vec![
            DiscreteMeasure::new(vec![(-1, 0.5), (1, 0.5)]).unwrap(),
            DiscreteMeasure::new(vec![(-2, 0.5), (2, 0.5)]).unwrap(),
        ])
        .unwrap();
        let m = build_model(&seq, StateKind::StartAugmented, 3, 0).unwrap();
        for (id, s) in m.states().iter().enumerate() {
            assert!(s.aux == -1 || s.aux == 1);
            if let Some((up, down)) = m.succs(id) {
                assert_eq!(m.state(up).aux, s.aux);
                assert_eq!(m.state(down).aux, s.aux);
            }
        }
        assert_eq!(m.initial_states().len(), 2);
    }
}
