//! The occupation-measure LP over randomized multi-stopping times: flow
//! conservation with colour promotion, marginal rows with mismatch
//! accounting, and the staged solve (feasibility, primary objective,
//! lexicographic secondary, canonical vertex).

use crate::error::Error;
use crate::lattice::{build_model, default_horizon, LatticeModel, StateId, StateKind};
use crate::measures::{DiscreteMeasure, MarginalSequence};
use crate::objective::{max_tiebreak_coefficient, Family, Objective};
use crate::rule::StoppingRule;
use crate::scalar::Scalar;
use crate::simplex::Simplex;
use std::collections::BTreeMap;
use std::io::Write;
use std::sync::Arc;

/// Variable and row layout of one stopping LP.
///
/// Columns are colour-major, inside a colour state-lexicographic with the
/// stop variable directly before the continue variable of the same state;
/// mismatch variables (def, excess per target atom, one off-support
/// collector per colour) follow all flow variables.
pub struct StoppingLp<S: Scalar> {
    pub model: Arc<LatticeModel>,
    pub targets: Vec<DiscreteMeasure<S>>,
    pub objective: Objective<S>,
    /// Starting mass per state (colour 1 source).
    initial: Vec<(StateId, S)>,
    stop_col: Vec<Vec<usize>>,
    cont_col: Vec<Vec<Option<usize>>>,
    def_col: Vec<Vec<usize>>,
    excess_col: Vec<Vec<usize>>,
    off_col: Vec<usize>,
    n_vars: usize,
    rows: Vec<Vec<(usize, S)>>,
    rhs: Vec<S>,
    basis: Vec<usize>,
}

/// Values attained by the staged solve.
#[derive(Clone, Debug)]
pub struct SolveOutcome<S: Scalar> {
    pub rule: StoppingRule<S>,
    /// Minimal total marginal mismatch at this horizon (Phase-0 value).
    pub infeasibility: S,
    /// Primary optimum in minimisation convention.
    pub primary_value: S,
    /// Primary optimum with the family's reporting sign applied.
    pub primary_report: S,
    pub secondary_value: Option<S>,
    pub iterations: usize,
}

impl<S: Scalar> StoppingLp<S> {
    /// Builds the LP for a marginal sequence, rejecting sequences out of
    /// convex order.
    pub fn build(
        model: Arc<LatticeModel>,
        seq: &MarginalSequence<S>,
        objective: Objective<S>,
    ) -> Result<Self, Error> {
        if let Some(w) = seq.convex_order_witness() {
            return Err(Error::NotConvexOrder {
                pair_index: w.pair_index,
                position: w.position,
            });
        }
        Self::build_relaxed(model, seq, objective)
    }

    /// Same construction without the convex-order gate, so infeasible
    /// sequences can still be quantified through Phase-0.
    pub fn build_relaxed(
        model: Arc<LatticeModel>,
        seq: &MarginalSequence<S>,
        objective: Objective<S>,
    ) -> Result<Self, Error> {
        let initial: Vec<(StateId, S)> = model
            .initial_states()
            .iter()
            .zip(seq.initial().atoms())
            .map(|(&sid, (_, w))| (sid, w.clone()))
            .collect();
        let targets: Vec<DiscreteMeasure<S>> = seq.measures()[1..].to_vec();
        Self::build_inner(model, targets, initial, objective)
    }

    /// Single-colour LP started from an arbitrary state-mass distribution
    /// (the pasting construction feeds each stage the previous stage's
    /// stopped mass).
    pub fn build_stage(
        model: Arc<LatticeModel>,
        target: DiscreteMeasure<S>,
        initial: Vec<(StateId, S)>,
        objective: Objective<S>,
    ) -> Result<Self, Error> {
        Self::build_inner(model, vec![target], initial, objective)
    }

    fn build_inner(
        model: Arc<LatticeModel>,
        targets: Vec<DiscreteMeasure<S>>,
        initial: Vec<(StateId, S)>,
        objective: Objective<S>,
    ) -> Result<Self, Error> {
        let n = targets.len();
        let x0_atoms: Vec<i64> = {
            let mut v: Vec<i64> = initial.iter().map(|(sid, _)| model.state(*sid).aux).collect();
            v.sort_unstable();
            v.dedup();
            v
        };
        objective.validate(model.kind, n, &x0_atoms, model.l_box)?;

        let n_states = model.n_states();
        let mut stop_col = vec![vec![0usize; n_states]; n];
        let mut cont_col = vec![vec![None; n_states]; n];
        let mut next = 0usize;
        for i in 0..n {
            for sid in 0..n_states {
                stop_col[i][sid] = next;
                next += 1;
                if !model.is_forced_stop(sid) {
                    cont_col[i][sid] = Some(next);
                    next += 1;
                }
            }
        }
        let mut def_col = vec![Vec::new(); n];
        let mut excess_col = vec![Vec::new(); n];
        for i in 0..n {
            for _ in targets[i].atoms() {
                def_col[i].push(next);
                next += 1;
                excess_col[i].push(next);
                next += 1;
            }
        }
        let mut off_col = Vec::with_capacity(n);
        for _ in 0..n {
            off_col.push(next);
            next += 1;
        }
        let n_vars = next;

        let mut initial_mass_at = vec![S::zero(); n_states];
        for (sid, w) in &initial {
            initial_mass_at[*sid] += w.clone();
        }

        // Flow rows: stop + cont - (1/2) sum cont(pred) - stop_{prev colour} = source.
        let mut rows: Vec<Vec<(usize, S)>> = Vec::new();
        let mut rhs: Vec<S> = Vec::new();
        let mut basis: Vec<usize> = Vec::new();
        let half = S::from_ratio(1, 2);
        for i in 0..n {
            for sid in 0..n_states {
                let mut row: Vec<(usize, S)> = Vec::new();
                row.push((stop_col[i][sid], S::one()));
                if let Some(c) = cont_col[i][sid] {
                    row.push((c, S::one()));
                }
                for &p in model.preds(sid) {
                    let c = cont_col[i][p].expect("predecessor has a continue variable");
                    row.push((c, -half.clone()));
                }
                if i > 0 {
                    row.push((stop_col[i - 1][sid], -S::one()));
                }
                rows.push(row);
                rhs.push(if i == 0 {
                    initial_mass_at[sid].clone()
                } else {
                    S::zero()
                });
                basis.push(stop_col[i][sid]);
            }
        }

        // Carried mass per position under the all-stop-immediately basis.
        let mut carried: BTreeMap<i64, S> = BTreeMap::new();
        for (sid, w) in &initial {
            let x = model.state(*sid).x;
            let e = carried.entry(x).or_insert_with(S::zero);
            *e += w.clone();
        }

        for i in 0..n {
            for (k, (x, w)) in targets[i].atoms().iter().enumerate() {
                let mut row: Vec<(usize, S)> = Vec::new();
                for sid in 0..n_states {
                    if model.state(sid).x == *x {
                        row.push((stop_col[i][sid], S::one()));
                    }
                }
                row.push((def_col[i][k], S::one()));
                row.push((excess_col[i][k], -S::one()));
                rows.push(row);
                rhs.push(w.clone());
                let have = carried.get(x).cloned().unwrap_or_else(S::zero);
                basis.push(if *w >= have {
                    def_col[i][k]
                } else {
                    excess_col[i][k]
                });
            }
        }

        for i in 0..n {
            let mut row: Vec<(usize, S)> = Vec::new();
            for sid in 0..n_states {
                if !targets[i].supports(model.state(sid).x) {
                    row.push((stop_col[i][sid], S::one()));
                }
            }
            row.push((off_col[i], -S::one()));
            rows.push(row);
            rhs.push(S::zero());
            basis.push(off_col[i]);
        }

        Ok(StoppingLp {
            model,
            targets,
            objective,
            initial,
            stop_col,
            cont_col,
            def_col,
            excess_col,
            off_col,
            n_vars,
            rows,
            rhs,
            basis,
        })
    }

    pub fn n_colours(&self) -> usize {
        self.targets.len()
    }

    pub fn n_variables(&self) -> usize {
        self.n_vars
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_stop_vars(&self) -> usize {
        self.n_colours() * self.model.n_states()
    }

    pub fn n_cont_vars(&self) -> usize {
        self.cont_col
            .iter()
            .map(|v| v.iter().filter(|c| c.is_some()).count())
            .sum()
    }

    fn phase0_costs(&self) -> Vec<(usize, S)> {
        let mut costs = Vec::new();
        for i in 0..self.n_colours() {
            for k in 0..self.targets[i].atoms().len() {
                costs.push((self.def_col[i][k], S::one()));
                costs.push((self.excess_col[i][k], S::one()));
            }
        }
        costs
    }

    fn objective_costs(&self, objective: &Objective<S>) -> Result<Vec<(usize, S)>, Error> {
        let mut costs = Vec::new();
        for i in 0..self.n_colours() {
            for sid in 0..self.model.n_states() {
                let c = objective.coefficient(i, &self.model.state(sid))?;
                if !c.is_zero() {
                    costs.push((self.stop_col[i][sid], c));
                }
            }
        }
        Ok(costs)
    }

    fn tiebreak_costs(&self) -> Vec<(usize, S)> {
        let mut costs = Vec::new();
        for i in 0..self.n_colours() {
            let w = self.objective.weights[i].clone();
            for sid in 0..self.model.n_states() {
                let c: S = max_tiebreak_coefficient(&self.model.state(sid), self.model.l_box);
                if !c.is_zero() {
                    costs.push((self.stop_col[i][sid], w.clone() * c));
                }
            }
        }
        costs
    }

    fn time_costs(&self) -> Vec<(usize, S)> {
        let mut costs = Vec::new();
        for i in 0..self.n_colours() {
            for sid in 0..self.model.n_states() {
                let t = self.model.state(sid).t;
                if t > 0 {
                    costs.push((self.stop_col[i][sid], S::from_i64(t as i64)));
                }
            }
        }
        costs
    }

    fn pin_gap() -> S {
        if S::EXACT {
            S::zero()
        } else {
            S::from_f64(1e-9)
        }
    }

    /// Minimises total marginal mismatch; quantifies horizon truncation.
    pub fn solve_phase0(&self) -> Result<S, Error> {
        let mut sx = Simplex::new(&self.rows, &self.rhs, self.n_vars, self.basis.clone(), 4)?;
        sx.minimize(&self.phase0_costs())
    }

    /// Full staged solve: Phase-0, pin, primary, pin, then the secondary
    /// when one is attached (maximum families fall back to the
    /// `x^2/(1+l+max)` tie break), and finally an expected-time
    /// regulariser that selects a canonical optimal vertex.
    pub fn solve(&self, eps_horizon: f64) -> Result<SolveOutcome<S>, Error> {
        let gap = Self::pin_gap();
        let mut sx = Simplex::new(&self.rows, &self.rhs, self.n_vars, self.basis.clone(), 4)?;
        let infeasibility = sx.minimize(&self.phase0_costs())?;
        if infeasibility.to_f64() > eps_horizon {
            return Err(Error::HorizonTooShort {
                infeasibility: infeasibility.to_f64(),
                eps_horizon,
                horizon: self.model.horizon,
            });
        }
        sx.pin_current_objective(&gap)?;

        let primary_costs = self.objective_costs(&self.objective)?;
        let primary_value = sx.minimize(&primary_costs)?;
        sx.pin_current_objective(&gap)?;

        let secondary_value = if let Some(sec) = &self.objective.secondary {
            let v = sx.minimize(&self.objective_costs(sec)?)?;
            sx.pin_current_objective(&gap)?;
            Some(v)
        } else {
            if matches!(
                self.objective.family,
                Family::AzemaYor | Family::HobsonPedersen
            ) {
                sx.minimize(&self.tiebreak_costs())?;
                sx.pin_current_objective(&gap)?;
            }
            None
        };

        sx.minimize(&self.time_costs())?;

        let rule = self.extract_rule(&sx);
        let primary_report = self.objective.report_sign() * primary_value.clone();
        Ok(SolveOutcome {
            rule,
            infeasibility,
            primary_value,
            primary_report,
            secondary_value,
            iterations: sx.iterations,
        })
    }

    /// Staged solve requiring an attached secondary; returns both values.
    pub fn solve_lexicographic(&self, eps_horizon: f64) -> Result<SolveOutcome<S>, Error> {
        if self.objective.secondary.is_none() {
            return Err(Error::InvalidObjective(
                "lexicographic solve needs a secondary objective".into(),
            ));
        }
        self.solve(eps_horizon)
    }

    fn extract_rule(&self, sx: &Simplex<S>) -> StoppingRule<S> {
        let n = self.n_colours();
        let n_states = self.model.n_states();
        let mut stop = vec![vec![S::zero(); n_states]; n];
        let mut cont = vec![vec![S::zero(); n_states]; n];
        let mut shortfall = vec![BTreeMap::new(); n];
        let mut overshoot = vec![BTreeMap::new(); n];
        let mut off_support = vec![S::zero(); n];
        for i in 0..n {
            for sid in 0..n_states {
                let sv = sx.col_value(self.stop_col[i][sid]);
                if !sv.is_zero() {
                    stop[i][sid] = sv;
                }
                if let Some(c) = self.cont_col[i][sid] {
                    let cv = sx.col_value(c);
                    if !cv.is_zero() {
                        cont[i][sid] = cv;
                    }
                }
            }
            for (k, (x, _)) in self.targets[i].atoms().iter().enumerate() {
                let d = sx.col_value(self.def_col[i][k]);
                if !d.is_zero() {
                    shortfall[i].insert(*x, d);
                }
                let e = sx.col_value(self.excess_col[i][k]);
                if !e.is_zero() {
                    overshoot[i].insert(*x, e);
                }
            }
            off_support[i] = sx.col_value(self.off_col[i]);
        }
        StoppingRule {
            model: Arc::clone(&self.model),
            n_colours: n,
            stop,
            cont,
            shortfall,
            overshoot,
            off_support,
        }
    }

    fn col_name(&self, col: usize) -> String {
        for i in 0..self.n_colours() {
            for sid in 0..self.model.n_states() {
                let s = self.model.state(sid);
                if self.stop_col[i][sid] == col {
                    return format!("stop c{} t{} x{} a{}", i + 1, s.t, s.x, s.aux);
                }
                if self.cont_col[i][sid] == Some(col) {
                    return format!("cont c{} t{} x{} a{}", i + 1, s.t, s.x, s.aux);
                }
            }
            for (k, (x, _)) in self.targets[i].atoms().iter().enumerate() {
                if self.def_col[i][k] == col {
                    return format!("def c{} x{}", i + 1, x);
                }
                if self.excess_col[i][k] == col {
                    return format!("excess c{} x{}", i + 1, x);
                }
            }
            if self.off_col[i] == col {
                return format!("off c{}", i + 1);
            }
        }
        format!("var {col}")
    }

    fn row_name(&self, row: usize) -> String {
        let n_states = self.model.n_states();
        let n = self.n_colours();
        if row < n * n_states {
            let i = row / n_states;
            let s = self.model.state(row % n_states);
            return format!("flow c{} t{} x{} a{}", i + 1, s.t, s.x, s.aux);
        }
        let mut r = row - n * n_states;
        for i in 0..n {
            let atoms = self.targets[i].atoms().len();
            if r < atoms {
                return format!("marginal c{} x{}", i + 1, self.targets[i].atoms()[r].0);
            }
            r -= atoms;
        }
        format!("offsupport c{}", r + 1)
    }

    /// Writes the constraint matrix as `row col value` triplets plus a JSON
    /// header naming every row and column, for external cross-checking.
    pub fn export(
        &self,
        triplets: &mut dyn Write,
        header: &mut dyn Write,
    ) -> Result<(), Error> {
        for (r, row) in self.rows.iter().enumerate() {
            let mut cells: Vec<(usize, S)> = row.clone();
            cells.sort_by_key(|(c, _)| *c);
            for (c, v) in cells {
                writeln!(triplets, "{} {} {}", r, c, v)?;
            }
        }
        let head = serde_json::json!({
            "n_rows": self.rows.len(),
            "n_cols": self.n_vars,
            "rows": (0..self.rows.len()).map(|r| self.row_name(r)).collect::<Vec<_>>(),
            "cols": (0..self.n_vars).map(|c| self.col_name(c)).collect::<Vec<_>>(),
            "rhs": self.rhs.iter().map(|v| v.to_string()).collect::<Vec<_>>(),
            "objective_family": self.objective.family.name(),
        });
        header.write_all(
            serde_json::to_string_pretty(&head)
                .map_err(|e| Error::InvalidObjective(e.to_string()))?
                .as_bytes(),
        )?;
        Ok(())
    }
}

/// Solver parameters shared by the orchestrated entry points.
#[derive(Clone, Debug)]
pub struct SolveParams {
    /// Starting horizon; the sequence's default when absent.
    pub horizon: Option<u32>,
    pub pad: u32,
    pub eps_horizon: f64,
    /// Escalations double the horizon and widen the box by 2.
    pub max_escalations: u32,
}

impl Default for SolveParams {
    fn default() -> Self {
        SolveParams {
            horizon: None,
            pad: 0,
            eps_horizon: 1e-6,
            max_escalations: 3,
        }
    }
}

/// A completed solve, together with the model it ended on.
pub struct EmbeddingSolution<S: Scalar> {
    pub model: Arc<LatticeModel>,
    pub outcome: SolveOutcome<S>,
    pub escalations: u32,
    /// False when truncation artefacts above the mass tolerance survived
    /// all permitted escalations (float mode only).
    pub truncation_clean: bool,
}

/// Builds the model for `seq` and solves, escalating `(T, pad)` while the
/// embedding is infeasible at tolerance `eps_horizon` or, in float mode,
/// while truncation artefacts would pollute the rule's support sets.
pub fn solve_embedding<S: Scalar>(
    seq: &MarginalSequence<S>,
    objective: &Objective<S>,
    params: &SolveParams,
) -> Result<EmbeddingSolution<S>, Error> {
    if let Some(w) = seq.convex_order_witness() {
        return Err(Error::NotConvexOrder {
            pair_index: w.pair_index,
            position: w.position,
        });
    }
    let kind = objective.family.required_kind();
    let mut horizon = params.horizon.unwrap_or_else(|| default_horizon(seq));
    let mut pad = params.pad;
    let mut last_err: Option<Error> = None;
    for esc in 0..=params.max_escalations {
        let model = Arc::new(build_model(seq, kind, horizon, pad)?);
        let lp = StoppingLp::build(Arc::clone(&model), seq, objective.clone())?;
        match lp.solve(params.eps_horizon) {
            Ok(outcome) => {
                let stray = outcome.rule.max_truncation_stray();
                let clean = S::EXACT || stray <= 1e-9;
                if !clean && esc < params.max_escalations {
                    horizon *= 2;
                    pad += 2;
                    continue;
                }
                return Ok(EmbeddingSolution {
                    model,
                    outcome,
                    escalations: esc,
                    truncation_clean: clean,
                });
            }
            Err(e @ Error::HorizonTooShort { .. }) => {
                if esc < params.max_escalations {
                    horizon *= 2;
                    pad += 2;
                    last_err = Some(e);
                    continue;
                }
                return Err(e);
            }
            Err(e) => return Err(e),
        }
    }
    Err(last_err.unwrap_or_else(|| Error::SolverFailure("escalation exhausted".into())))
}

/// Re-solves with each permuted weight vector; barrier invariance across
/// the returned rules certifies that the weighting does not matter.
pub fn permuted_weight_resolve<S: Scalar>(
    seq: &MarginalSequence<S>,
    objective: &Objective<S>,
    perms: &[Vec<usize>],
    params: &SolveParams,
) -> Result<Vec<SolveOutcome<S>>, Error> {
    if !matches!(objective.family, Family::Root | Family::Rost) {
        return Err(Error::InvalidObjective(
            "weight permutation resolve applies to convex-time families".into(),
        ));
    }
    let n = objective.weights.len();
    let mut out = Vec::with_capacity(perms.len());
    for perm in perms {
        if perm.len() != n {
            return Err(Error::InvalidObjective(format!(
                "permutation length {} for {} colours",
                perm.len(),
                n
            )));
        }
        let mut seen = vec![false; n];
        for &p in perm {
            if p >= n || seen[p] {
                return Err(Error::InvalidObjective(format!("bad permutation {perm:?}")));
            }
            seen[p] = true;
        }
        let weights: Vec<S> = perm.iter().map(|&p| objective.weights[p].clone()).collect();
        let permuted = objective.clone().with_weights(weights);
        let solved = solve_embedding(seq, &permuted, params)?;
        out.push(solved.outcome);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::{DiscreteMeasure, MarginalSequence};

    fn seq(measures: Vec<Vec<(i64, f64)>>) -> MarginalSequence<f64> {
        MarginalSequence::new(
            measures
                .into_iter()
                .map(|a| DiscreteMeasure::new(a).unwrap())
                .collect(),
        )
        .unwrap()
    }

    fn d0() -> Vec<(i64, f64)> {
        vec![(0, 1.0)]
    }

    fn coin(l: i64) -> Vec<(i64, f64)> {
        vec![(-l, 0.5), (l, 0.5)]
    }

    fn paper_mu2() -> Vec<(i64, f64)> {
        vec![(-2, 0.4), (0, 0.2), (2, 0.4)]
    }

    #[test]
    fn variable_counts_match_enumeration() {
        // T=2, box +-2: 6 states, 3 of them free to continue.
        let s = seq(vec![d0(), coin(1)]);
        let model = Arc::new(build_model(&s, StateKind::Plain, 2, 1).unwrap());
        let lp = StoppingLp::build(model, &s, Objective::root(1)).unwrap();
        assert_eq!(lp.n_stop_vars(), 6);
        assert_eq!(lp.n_cont_vars(), 3);
        // 2 def + 2 excess + 1 off collector.
        assert_eq!(lp.n_variables(), 6 + 3 + 2 + 2 + 1);
        // 6 flow rows + 2 marginal rows + 1 off-support row.
        assert_eq!(lp.n_rows(), 9);
    }

    #[test]
    fn equal_marginals_build_and_stop_instantly() {
        let s = seq(vec![d0(), d0()]);
        let model = Arc::new(build_model(&s, StateKind::Plain, 1, 0).unwrap());
        let lp = StoppingLp::build(model, &s, Objective::root(1)).unwrap();
        let out = lp.solve(1e-6).unwrap();
        assert!(out.primary_value.abs() < 1e-12);
        assert!((out.rule.stop[0][0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn non_convex_order_rejected() {
        let s = seq(vec![coin(1), d0()]);
        let model = Arc::new(build_model(&s, StateKind::Plain, 4, 0).unwrap());
        match StoppingLp::build(model, &s, Objective::root(1)) {
            Err(Error::NotConvexOrder { .. }) => {}
            other => panic!("expected NotConvexOrder, got {other:?}"),
        }
    }

    #[test]
    fn paper_triple_builds() {
        let s = seq(vec![d0(), coin(1), paper_mu2()]);
        let model = Arc::new(build_model(&s, StateKind::Plain, 8, 0).unwrap());
        assert!(StoppingLp::build(model, &s, Objective::root(2)).is_ok());
    }

    #[test]
    fn phase0_values() {
        // Exact embedding at t=1.
        let s1 = seq(vec![d0(), coin(1)]);
        let m1 = Arc::new(build_model(&s1, StateKind::Plain, 2, 0).unwrap());
        let lp1 = StoppingLp::build(m1, &s1, Objective::root(1)).unwrap();
        assert!(lp1.solve_phase0().unwrap().abs() < 1e-12);

        // Depth-2 enumeration caps mass at +-2 by 1/2.
        let s2 = seq(vec![d0(), coin(2)]);
        let m2 = Arc::new(build_model(&s2, StateKind::Plain, 2, 0).unwrap());
        let lp2 = StoppingLp::build(m2, &s2, Objective::root(1)).unwrap();
        assert!((lp2.solve_phase0().unwrap() - 0.5).abs() < 1e-9);

        // Geometric tail: survival inside (-2,2) halves every two steps.
        let m3 = Arc::new(build_model(&s2, StateKind::Plain, 32, 0).unwrap());
        let lp3 = StoppingLp::build(m3, &s2, Objective::root(1)).unwrap();
        let v = lp3.solve_phase0().unwrap();
        assert!((v - (0.5f64).powi(16)).abs() < 1e-12);
        let m4 = Arc::new(build_model(&s2, StateKind::Plain, 48, 0).unwrap());
        let lp4 = StoppingLp::build(m4, &s2, Objective::root(1)).unwrap();
        assert!(lp4.solve_phase0().unwrap() <= 1e-6);
    }

    #[test]
    fn horizon_too_short_reported() {
        let s = seq(vec![d0(), coin(2)]);
        let m = Arc::new(build_model(&s, StateKind::Plain, 2, 0).unwrap());
        let lp = StoppingLp::build(m, &s, Objective::root(1)).unwrap();
        match lp.solve(1e-6) {
            Err(Error::HorizonTooShort { infeasibility, .. }) => {
                assert!((infeasibility - 0.5).abs() < 1e-9);
            }
            other => panic!("expected HorizonTooShort, got {other:?}"),
        }
    }

    #[test]
    fn forced_single_step_embedding() {
        let s = seq(vec![d0(), coin(1)]);
        let m = Arc::new(build_model(&s, StateKind::Plain, 2, 0).unwrap());
        let lp = StoppingLp::build(m, &s, Objective::root(1)).unwrap();
        let out = lp.solve(1e-6).unwrap();
        assert!((out.primary_value - 1.0).abs() < 1e-9);
        let rule = &out.rule;
        for sid in 0..rule.model.n_states() {
            let st = rule.model.state(sid);
            let expect = if st.t == 1 { 0.5 } else { 0.0 };
            assert!((rule.stop[0][sid] - expect).abs() < 1e-9, "state {st:?}");
        }
    }

    #[test]
    fn root_second_moment_of_pm2_hit() {
        // First-step recursion gives E[tau^2] = 24 for the hitting time of
        // +-2 from 0; truncation at T=64 perturbs it below 1e-6.
        let s = seq(vec![d0(), coin(2)]);
        let m = Arc::new(build_model(&s, StateKind::Plain, 64, 0).unwrap());
        let lp = StoppingLp::build(m, &s, Objective::root(1)).unwrap();
        let out = lp.solve(1e-6).unwrap();
        assert!(
            (out.primary_value - 24.0).abs() < 1e-6 * 64.0 * 64.0,
            "value {}",
            out.primary_value
        );
    }

    #[test]
    fn paper_triple_colour1_is_first_hitting_time() {
        let s = seq(vec![d0(), coin(1), paper_mu2()]);
        let solved = solve_embedding(&s, &Objective::root(2), &SolveParams {
            horizon: Some(64),
            ..SolveParams::default()
        })
        .unwrap();
        let rule = &solved.outcome.rule;
        for sid in 0..rule.model.n_states() {
            let st = rule.model.state(sid);
            let expect = if st.t == 1 && st.x.abs() == 1 { 0.5 } else { 0.0 };
            assert!(
                (rule.stop[0][sid] - expect).abs() < 1e-8,
                "colour 1 stop at {st:?} = {}",
                rule.stop[0][sid]
            );
        }
    }

    #[test]
    fn lexicographic_requires_secondary() {
        let s = seq(vec![d0(), coin(1)]);
        let m = Arc::new(build_model(&s, StateKind::Plain, 2, 0).unwrap());
        let lp = StoppingLp::build(m, &s, Objective::root(1)).unwrap();
        assert!(lp.solve_lexicographic(1e-6).is_err());
    }

    #[test]
    fn degenerate_zero_secondary_matches_plain_solve() {
        let s = seq(vec![d0(), coin(1), paper_mu2()]);
        let base = Objective::root(2);
        let plain = solve_embedding(&s, &base, &SolveParams::default()).unwrap();
        // A secondary with epsilon weights on the same family changes
        // nothing the primary left undetermined.
        let with_sec = base.clone().with_secondary(Objective::root(2));
        let lex = solve_embedding(&s, &with_sec, &SolveParams::default()).unwrap();
        // Primary and secondary share the functional, so both values agree.
        let sec = lex.outcome.secondary_value.clone().unwrap();
        assert!((sec - lex.outcome.primary_value).abs() < 1e-9);
        assert!((lex.outcome.primary_value - plain.outcome.primary_value).abs() < 1e-9);
        for i in 0..2 {
            for sid in 0..plain.outcome.rule.model.n_states() {
                assert!(
                    (plain.outcome.rule.stop[i][sid] - lex.outcome.rule.stop[i][sid]).abs()
                        < 1e-9
                );
            }
        }
    }

    #[test]
    fn weight_permutation_validation() {
        let s = seq(vec![d0(), coin(1), paper_mu2()]);
        let obj = Objective::root(2).with_weights(vec![1.0, 2.0]);
        assert!(permuted_weight_resolve(&s, &obj, &[vec![0, 0]], &SolveParams::default()).is_err());
        let zero_weight = Objective::<f64>::new(Family::Root, 2, vec![1.0, 0.0]);
        assert!(zero_weight.is_err());
    }

    #[test]
    fn lp_export_writes_triplets_and_header() {
        let s = seq(vec![d0(), coin(1)]);
        let m = Arc::new(build_model(&s, StateKind::Plain, 2, 1).unwrap());
        let lp = StoppingLp::build(m, &s, Objective::root(1)).unwrap();
        let mut trip = Vec::new();
        let mut head = Vec::new();
        lp.export(&mut trip, &mut head).unwrap();
        let trip = String::from_utf8(trip).unwrap();
        assert!(trip.lines().count() > 10);
        let head: serde_json::Value = serde_json::from_slice(&head).unwrap();
        assert_eq!(head["n_rows"], 9);
        assert_eq!(head["cols"].as_array().unwrap().len(), 14);
    }
}
