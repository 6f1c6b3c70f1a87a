//! Barrier families: the per-colour threshold rules optimal multi-stopping
//! times collapse to, with extraction from LP solutions, exact forward
//! propagation, the sequential pasted baseline, and a CSV form.
//!
//! Every family orders states along a level so the stop region is an upper
//! set: time for Root, reversed time for Rost, running maximum for
//! Azema-Yor (reversed for Hobson-Pedersen, which additionally stops at the
//! maximum itself), displacement from the start for monotone transport. The
//! boundary level holds a stop quota rather than a per-visit probability:
//! boundary visits stop in time order until the quota is spent, which is
//! exactly the vertex the solver's expected-time regulariser selects, so
//! extraction followed by propagation reproduces the LP solution.

use crate::error::Error;
use crate::lattice::{LatticeModel, State, StateId, StateKind};
use crate::lp::{SolveOutcome, SolveParams, StoppingLp};
use crate::measures::{DiscreteMeasure, MarginalSequence};
use crate::objective::{Family, Objective};
use crate::rule::StoppingRule;
use crate::scalar::Scalar;
use std::collections::BTreeMap;
use std::sync::Arc;

/// Barrier ordering level of a state: the stop region of an optimal rule is
/// `{level >= threshold}`.
pub fn barrier_level(family: Family, s: &State) -> i64 {
    match family {
        Family::Root => s.t as i64,
        Family::Rost => -(s.t as i64),
        Family::AzemaYor => s.aux,
        Family::HobsonPedersen => -s.aux,
        Family::MonotoneTransport => s.x - s.aux,
    }
}

/// Family coordinate shown in reports (time, maximum, or displacement).
pub fn barrier_coord(family: Family, s: &State) -> i64 {
    match family {
        Family::Root | Family::Rost => s.t as i64,
        Family::AzemaYor | Family::HobsonPedersen => s.aux,
        Family::MonotoneTransport => s.x - s.aux,
    }
}

fn level_to_coord(family: Family, level: i64) -> i64 {
    match family {
        Family::Root | Family::AzemaYor | Family::MonotoneTransport => level,
        Family::Rost | Family::HobsonPedersen => -level,
    }
}

fn coord_to_level(family: Family, coord: i64) -> i64 {
    level_to_coord(family, coord)
}

/// Hobson-Pedersen stops at the running maximum are kept apart from the
/// left-barrier fibers.
fn is_hp_diagonal(family: Family, s: &State) -> bool {
    family == Family::HobsonPedersen && s.x == s.aux
}

/// Threshold rule of one fiber: full stop strictly beyond the threshold
/// level, a mass quota at the threshold, nothing before.
#[derive(Clone, Debug, PartialEq)]
pub struct FiberRule<S: Scalar> {
    /// Family coordinate of the boundary (time / maximum / displacement).
    pub threshold: i64,
    /// Stop mass at the boundary level, consumed in time order.
    pub boundary_mass: S,
    /// Boundary mass over total boundary arrivals (reported fraction).
    pub boundary_fraction: S,
}

/// Stop-at-maximum component of Hobson-Pedersen rules, one per max level.
#[derive(Clone, Debug, PartialEq)]
pub struct DiagRule<S: Scalar> {
    pub quota: S,
    /// Quota over total arrivals at the level (the stop-at-max rate).
    pub rate: S,
}

/// Extracted barrier family plus the model geometry needed to re-propagate.
#[derive(Clone, Debug)]
pub struct BarrierFamily<S: Scalar> {
    pub objective: Objective<S>,
    pub kind: StateKind,
    pub horizon: u32,
    pub l_box: i64,
    pub pad: u32,
    pub n_colours: usize,
    /// Per colour: fiber position -> threshold rule.
    pub fibers: Vec<BTreeMap<i64, FiberRule<S>>>,
    /// Per colour: max level -> stop-at-max rule (Hobson-Pedersen only).
    pub diag: Vec<BTreeMap<i64, DiagRule<S>>>,
    /// Structure violations tolerated in advisory mode (monotone transport
    /// with an atomic starting law).
    pub warnings: Vec<String>,
}

impl<S: Scalar> BarrierFamily<S> {
    pub fn family(&self) -> Family {
        self.objective.family
    }
}

/// Reads the barrier family off an optimal stopping rule.
///
/// Fails with `NotBarrierShaped` when some fiber has running mass strictly
/// beyond a stopped level or fractional stopping away from its boundary;
/// for monotone transport (atomic starting laws) such defects are reported
/// as warnings instead.
pub fn extract_barriers<S: Scalar>(
    rule: &StoppingRule<S>,
    objective: &Objective<S>,
) -> Result<BarrierFamily<S>, Error> {
    let family = objective.family;
    let model = &rule.model;
    let advisory = family == Family::MonotoneTransport;
    let mut fibers = Vec::with_capacity(rule.n_colours);
    let mut diag = Vec::with_capacity(rule.n_colours);
    let mut warnings = Vec::new();

    for colour in 0..rule.n_colours {
        // Aggregate stop/continue mass per fiber and level.
        let mut agg: BTreeMap<i64, BTreeMap<i64, (S, S)>> = BTreeMap::new();
        let mut diag_agg: BTreeMap<i64, (S, S)> = BTreeMap::new();
        for sid in 0..model.n_states() {
            let st = model.state(sid);
            let stop = rule.stop[colour][sid].clone();
            let cont = rule.cont[colour][sid].clone();
            if stop <= S::mass_tol() && cont <= S::mass_tol() {
                continue;
            }
            if is_hp_diagonal(family, &st) {
                let e = diag_agg
                    .entry(st.aux)
                    .or_insert_with(|| (S::zero(), S::zero()));
                e.0 += stop;
                e.1 += cont;
                continue;
            }
            let e = agg
                .entry(st.x)
                .or_default()
                .entry(barrier_level(family, &st))
                .or_insert_with(|| (S::zero(), S::zero()));
            e.0 += stop;
            e.1 += cont;
        }

        let mut colour_fibers: BTreeMap<i64, FiberRule<S>> = BTreeMap::new();
        for (x, levels) in &agg {
            let stopped: Vec<i64> = levels
                .iter()
                .filter(|(_, (stop, _))| *stop > S::mass_tol())
                .map(|(l, _)| *l)
                .collect();
            let Some(&theta) = stopped.first() else {
                continue; // never-stopped fiber: threshold absent
            };
            // Shape: no running mass strictly beyond the least stopped
            // level, fractional stopping only at that level.
            for (&level, (stop, cont)) in levels {
                if level > theta && *cont > S::mass_tol() {
                    let detail = format!(
                        "fiber {x}: running mass {} at {} {} beyond stopped {} {}",
                        cont.to_f64(),
                        coord_name(family),
                        level_to_coord(family, level),
                        coord_name(family),
                        level_to_coord(family, theta),
                    );
                    if advisory {
                        warnings.push(format!("colour {}: {detail}", colour + 1));
                    } else {
                        return Err(Error::NotBarrierShaped {
                            colour: colour + 1,
                            detail,
                        });
                    }
                }
                if level != theta && *stop > S::mass_tol() && *cont > S::mass_tol() {
                    let detail = format!(
                        "fiber {x}: fractional stopping off the boundary at {} {}",
                        coord_name(family),
                        level_to_coord(family, level),
                    );
                    if advisory {
                        warnings.push(format!("colour {}: {detail}", colour + 1));
                    } else {
                        return Err(Error::NotBarrierShaped {
                            colour: colour + 1,
                            detail,
                        });
                    }
                }
            }
            let (bstop, bcont) = levels.get(&theta).cloned().unwrap();
            let barrive = bstop.clone() + bcont;
            colour_fibers.insert(
                *x,
                FiberRule {
                    threshold: level_to_coord(family, theta),
                    boundary_mass: bstop.clone(),
                    boundary_fraction: bstop / barrive,
                },
            );
        }

        let mut colour_diag: BTreeMap<i64, DiagRule<S>> = BTreeMap::new();
        for (m, (stop, cont)) in diag_agg {
            if stop > S::mass_tol() {
                let arrive = stop.clone() + cont;
                colour_diag.insert(
                    m,
                    DiagRule {
                        quota: stop.clone(),
                        rate: stop / arrive,
                    },
                );
            }
        }

        fibers.push(colour_fibers);
        diag.push(colour_diag);
    }

    Ok(BarrierFamily {
        objective: objective.clone(),
        kind: model.kind,
        horizon: model.horizon,
        l_box: model.l_box,
        pad: model.pad,
        n_colours: rule.n_colours,
        fibers,
        diag,
        warnings,
    })
}

fn coord_name(family: Family) -> &'static str {
    match family {
        Family::Root | Family::Rost => "time",
        Family::AzemaYor | Family::HobsonPedersen => "max",
        Family::MonotoneTransport => "displacement",
    }
}

/// Result of pushing the starting law through a barrier family.
#[derive(Clone, Debug)]
pub struct Propagation<S: Scalar> {
    pub embedded: Vec<BTreeMap<i64, S>>,
    pub expected_time: Vec<S>,
    /// Family objective in minimisation convention.
    pub value: S,
    /// Sign-corrected (user-facing) objective value.
    pub report_value: S,
    /// Mass per colour left running at the horizon or stuck on the wall.
    pub residual: Vec<S>,
    /// Effective per-state stop probabilities, for simulation.
    pub stop_prob: Vec<Vec<f64>>,
    pub stop_mass: Vec<Vec<S>>,
}

impl<S: Scalar> Propagation<S> {
    /// Per-colour contribution to the family objective (minimised sign).
    pub fn colour_value(&self, model: &LatticeModel, objective: &Objective<S>, colour: usize) -> S {
        let mut acc = S::zero();
        for (sid, mass) in self.stop_mass[colour].iter().enumerate() {
            if !mass.is_zero() {
                let c = objective
                    .coefficient(colour, &model.state(sid))
                    .unwrap_or_else(|_| S::zero());
                acc += c * mass.clone();
            }
        }
        acc
    }
}

/// Pushes `mu0` through the lattice applying the barrier rules colour by
/// colour (a stop promotes the mass to the next colour at the same state).
/// Unstoppable mass (horizon or wall without a stop rule) is reported as
/// residual, never an error.
pub fn propagate_exact<S: Scalar>(
    model: &LatticeModel,
    bf: &BarrierFamily<S>,
    mu0: &DiscreteMeasure<S>,
) -> Result<Propagation<S>, Error> {
    let family = bf.family();
    if model.kind != bf.kind {
        return Err(Error::IncompatibleStateKind {
            family: family.name().into(),
            required: bf.kind.to_string(),
            actual: model.kind.to_string(),
        });
    }
    let n = bf.n_colours;
    let n_states = model.n_states();
    let mut mass = vec![vec![S::zero(); n_states]; n];
    let mut stop_mass = vec![vec![S::zero(); n_states]; n];
    let mut stop_prob = vec![vec![0.0f64; n_states]; n];
    let mut residual = vec![S::zero(); n];

    for (x0, w) in mu0.atoms() {
        let aux = match model.kind {
            StateKind::Plain => 0,
            _ => *x0,
        };
        let sid = model
            .id_of(&State { t: 0, x: *x0, aux })
            .ok_or(Error::EmptyReachableSet)?;
        mass[0][sid] += w.clone();
    }

    // Remaining boundary quotas, consumed in state order (time-ascending).
    let mut quota: Vec<BTreeMap<i64, S>> = (0..n)
        .map(|i| {
            bf.fibers[i]
                .iter()
                .map(|(x, r)| (*x, r.boundary_mass.clone()))
                .collect()
        })
        .collect();
    let mut diag_quota: Vec<BTreeMap<i64, S>> = (0..n)
        .map(|i| {
            bf.diag[i]
                .iter()
                .map(|(m, r)| (*m, r.quota.clone()))
                .collect()
        })
        .collect();

    for sid in 0..n_states {
        let st = model.state(sid);
        for colour in 0..n {
            let arriving = mass[colour][sid].clone();
            if arriving.is_zero() {
                continue;
            }
            let stopped: S = if is_hp_diagonal(family, &st) {
                match diag_quota[colour].get_mut(&st.aux) {
                    Some(q) => {
                        let take = if *q < arriving { q.clone() } else { arriving.clone() };
                        *q -= take.clone();
                        take
                    }
                    None => S::zero(),
                }
            } else {
                match bf.fibers[colour].get(&st.x) {
                    None => S::zero(),
                    Some(rule) => {
                        let level = barrier_level(family, &st);
                        let theta = coord_to_level(family, rule.threshold);
                        if level > theta {
                            arriving.clone()
                        } else if level == theta {
                            let q = quota[colour].get_mut(&st.x).expect("quota entry");
                            let take = if *q < arriving { q.clone() } else { arriving.clone() };
                            *q -= take.clone();
                            take
                        } else {
                            S::zero()
                        }
                    }
                }
            };
            let continuing = arriving.clone() - stopped.clone();
            if !stopped.is_zero() {
                stop_mass[colour][sid] += stopped.clone();
                if colour + 1 < n {
                    mass[colour + 1][sid] += stopped.clone();
                }
            }
            stop_prob[colour][sid] = if arriving.is_zero() {
                0.0
            } else {
                (stopped.clone() / arriving.clone()).to_f64()
            };
            if continuing.is_zero() {
                mass[colour][sid] = S::zero();
                continue;
            }
            match model.succs(sid) {
                Some((up, down)) => {
                    let half = continuing.half();
                    mass[colour][up] += half.clone();
                    mass[colour][down] += half;
                }
                None => {
                    residual[colour] += continuing;
                }
            }
            mass[colour][sid] = S::zero();
        }
    }

    let mut embedded = Vec::with_capacity(n);
    let mut expected_time = Vec::with_capacity(n);
    let mut value = S::zero();
    for colour in 0..n {
        let mut marg: BTreeMap<i64, S> = BTreeMap::new();
        let mut et = S::zero();
        for (sid, m) in stop_mass[colour].iter().enumerate() {
            if !m.is_zero() {
                let st = model.state(sid);
                *marg.entry(st.x).or_insert_with(S::zero) += m.clone();
                et += S::from_i64(st.t as i64) * m.clone();
                value += bf.objective.coefficient(colour, &st)? * m.clone();
            }
        }
        embedded.push(marg);
        expected_time.push(et);
    }
    let report_value = bf.objective.report_sign() * value.clone();
    Ok(Propagation {
        embedded,
        expected_time,
        value,
        report_value,
        residual,
        stop_prob,
        stop_mass,
    })
}

/// Sequential baseline: solve each marginal on its own, starting stage `i`
/// from the stopped space-time mass of stage `i-1`, and compose the stages
/// into one multi-colour rule.
pub struct PastedOutcome<S: Scalar> {
    pub rule: StoppingRule<S>,
    /// Total objective value (minimisation convention).
    pub value: S,
    pub report_value: S,
    pub stage_values: Vec<S>,
    pub stage_infeasibility: Vec<S>,
}

pub fn pasted_baseline<S: Scalar>(
    model: Arc<LatticeModel>,
    seq: &MarginalSequence<S>,
    objective: &Objective<S>,
    eps_horizon: f64,
) -> Result<PastedOutcome<S>, Error> {
    let n = seq.n_colours();
    let n_states = model.n_states();
    let mut initial: Vec<(StateId, S)> = model
        .initial_states()
        .iter()
        .zip(seq.initial().atoms())
        .map(|(&sid, (_, w))| (sid, w.clone()))
        .collect();

    let mut stop = Vec::with_capacity(n);
    let mut cont = Vec::with_capacity(n);
    let mut shortfall = Vec::with_capacity(n);
    let mut overshoot = Vec::with_capacity(n);
    let mut off_support = Vec::with_capacity(n);
    let mut stage_values = Vec::with_capacity(n);
    let mut stage_infeasibility = Vec::with_capacity(n);
    let mut value = S::zero();

    for i in 0..n {
        let mut stage_obj = Objective {
            family: objective.family,
            kappa: objective.kappa,
            weights: vec![objective.weights[i].clone()],
            cost: objective.cost.clone(),
            secondary: None,
        };
        if let Some(sec) = &objective.secondary {
            stage_obj.secondary = Some(Box::new(Objective {
                family: sec.family,
                kappa: sec.kappa,
                weights: vec![sec.weights[i].clone()],
                cost: sec.cost.clone(),
                secondary: None,
            }));
        }
        let lp = StoppingLp::build_stage(
            Arc::clone(&model),
            seq.target(i + 1).clone(),
            initial.clone(),
            stage_obj,
        )?;
        let out = lp.solve(eps_horizon)?;
        value += out.primary_value.clone();
        stage_values.push(out.primary_value.clone());
        stage_infeasibility.push(out.infeasibility.clone());

        initial = (0..n_states)
            .filter(|&sid| !out.rule.stop[0][sid].is_zero())
            .map(|sid| (sid, out.rule.stop[0][sid].clone()))
            .collect();

        stop.push(out.rule.stop[0].clone());
        cont.push(out.rule.cont[0].clone());
        shortfall.push(out.rule.shortfall[0].clone());
        overshoot.push(out.rule.overshoot[0].clone());
        off_support.push(out.rule.off_support[0].clone());
    }

    let rule = StoppingRule {
        model,
        n_colours: n,
        stop,
        cont,
        shortfall,
        overshoot,
        off_support,
    };
    let report_value = objective.report_sign() * value.clone();
    Ok(PastedOutcome {
        rule,
        value,
        report_value,
        stage_values,
        stage_infeasibility,
    })
}

/// Joint-vs-pasted certificate: the joint optimum can never lose to the
/// pasted baseline.
pub struct CompareOutcome<S: Scalar> {
    pub joint: SolveOutcome<S>,
    pub pasted: PastedOutcome<S>,
    pub joint_colour_values: Vec<S>,
    pub pasted_colour_values: Vec<S>,
    /// `pasted - joint` in minimisation convention; nonnegative when the
    /// solver is sound.
    pub gap: S,
    pub certified: bool,
}

pub fn colour_value<S: Scalar>(
    rule: &StoppingRule<S>,
    objective: &Objective<S>,
    colour: usize,
) -> S {
    let mut acc = S::zero();
    for (sid, mass) in rule.stop[colour].iter().enumerate() {
        if !mass.is_zero() {
            if let Ok(c) = objective.coefficient(colour, &rule.model.state(sid)) {
                acc += c * mass.clone();
            }
        }
    }
    acc
}

pub fn compare_joint_vs_pasted<S: Scalar>(
    seq: &MarginalSequence<S>,
    objective: &Objective<S>,
    params: &SolveParams,
) -> Result<CompareOutcome<S>, Error> {
    let joint = crate::lp::solve_embedding(seq, objective, params)?;
    let pasted = pasted_baseline(
        Arc::clone(&joint.model),
        seq,
        objective,
        params.eps_horizon,
    )?;
    let joint_colour_values = (0..seq.n_colours())
        .map(|i| colour_value(&joint.outcome.rule, objective, i))
        .collect();
    let pasted_colour_values = (0..seq.n_colours())
        .map(|i| colour_value(&pasted.rule, objective, i))
        .collect();
    let gap = pasted.value.clone() - joint.outcome.primary_value.clone();
    let certified = gap.to_f64() >= -1e-8;
    Ok(CompareOutcome {
        joint: joint.outcome,
        pasted,
        joint_colour_values,
        pasted_colour_values,
        gap,
        certified,
    })
}

// --- CSV form -------------------------------------------------------------

impl<S: Scalar> BarrierFamily<S> {
    /// Rows `colour,kind,fiber,threshold,boundary_fraction,boundary_mass`;
    /// diagonal (stop-at-max) rows reuse the fiber column for the max level.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("colour,kind,fiber,threshold,boundary_fraction,boundary_mass\n");
        for colour in 0..self.n_colours {
            for (x, rule) in &self.fibers[colour] {
                out.push_str(&format!(
                    "{},fiber,{},{},{},{}\n",
                    colour + 1,
                    x,
                    rule.threshold,
                    rule.boundary_fraction.to_repr(),
                    rule.boundary_mass.to_repr(),
                ));
            }
            for (m, rule) in &self.diag[colour] {
                out.push_str(&format!(
                    "{},diag,{},{},{},{}\n",
                    colour + 1,
                    m,
                    m,
                    rule.rate.to_repr(),
                    rule.quota.to_repr(),
                ));
            }
        }
        out
    }

    /// Rebuilds a family from its CSV form plus the recorded geometry.
    pub fn from_csv(
        text: &str,
        objective: Objective<S>,
        kind: StateKind,
        horizon: u32,
        l_box: i64,
        pad: u32,
        n_colours: usize,
    ) -> Result<Self, Error> {
        let mut fibers = vec![BTreeMap::new(); n_colours];
        let mut diag = vec![BTreeMap::new(); n_colours];
        let mut lines = text.lines();
        let header = lines.next().unwrap_or_default();
        if !header.starts_with("colour,kind,fiber,threshold") {
            return Err(Error::Precondition("unrecognised barrier CSV header".into()));
        }
        for (lineno, line) in lines.enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let cells: Vec<&str> = line.split(',').collect();
            let bad = || Error::Precondition(format!("bad barrier CSV line {}", lineno + 2));
            if cells.len() != 6 {
                return Err(bad());
            }
            let colour: usize = cells[0].parse().map_err(|_| bad())?;
            if colour == 0 || colour > n_colours {
                return Err(bad());
            }
            let fiber: i64 = cells[2].parse().map_err(|_| bad())?;
            let threshold: i64 = cells[3].parse().map_err(|_| bad())?;
            let fraction = S::parse_repr(cells[4]).ok_or_else(bad)?;
            let mass = S::parse_repr(cells[5]).ok_or_else(bad)?;
            match cells[1] {
                "fiber" => {
                    fibers[colour - 1].insert(
                        fiber,
                        FiberRule {
                            threshold,
                            boundary_mass: mass,
                            boundary_fraction: fraction,
                        },
                    );
                }
                "diag" => {
                    diag[colour - 1].insert(
                        fiber,
                        DiagRule {
                            quota: mass,
                            rate: fraction,
                        },
                    );
                }
                _ => return Err(bad()),
            }
        }
        Ok(BarrierFamily {
            objective,
            kind,
            horizon,
            l_box,
            pad,
            n_colours,
            fibers,
            diag,
            warnings: Vec::new(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::build_model;
    use crate::lp::solve_embedding;

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

    #[test]
    fn first_hit_barrier_roundtrip() {
        let s = seq(vec![d0(), vec![(-1, 0.5), (1, 0.5)]]);
        let solved = solve_embedding(&s, &Objective::root(1), &SolveParams::default()).unwrap();
        let bf = extract_barriers(&solved.outcome.rule, &Objective::root(1)).unwrap();
        assert_eq!(bf.fibers[0].get(&1).unwrap().threshold, 1);
        assert_eq!(bf.fibers[0].get(&-1).unwrap().threshold, 1);
        assert!((bf.fibers[0][&1].boundary_fraction - 1.0).abs() < 1e-12);

        let prop = propagate_exact(&solved.model, &bf, s.initial()).unwrap();
        assert!((prop.embedded[0][&1] - 0.5).abs() < 1e-12);
        assert!((prop.expected_time[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn root_pm2_barrier_and_expected_time() {
        let s = seq(vec![d0(), vec![(-2, 0.5), (2, 0.5)]]);
        let params = SolveParams {
            horizon: Some(64),
            ..SolveParams::default()
        };
        let solved = solve_embedding(&s, &Objective::root(1), &params).unwrap();
        let bf = extract_barriers(&solved.outcome.rule, &Objective::root(1)).unwrap();
        assert_eq!(bf.fibers[0].get(&2).unwrap().threshold, 2);
        assert!((bf.fibers[0][&2].boundary_fraction - 1.0).abs() < 1e-9);
        assert!(bf.fibers[0].get(&0).is_none());

        let prop = propagate_exact(&solved.model, &bf, s.initial()).unwrap();
        // Optional stopping: E[tau] = V1 - V0 = 4 up to horizon truncation.
        assert!((prop.expected_time[0] - 4.0).abs() < 1e-6);
        for (x, w) in s.target(1).atoms() {
            assert!((prop.embedded[0][x] - w).abs() < 1e-6);
        }
    }

    #[test]
    fn constructed_split_stopping_is_rejected() {
        let s = seq(vec![d0(), vec![(-2, 0.5), (2, 0.5)]]);
        let params = SolveParams {
            horizon: Some(64),
            ..SolveParams::default()
        };
        let solved = solve_embedding(&s, &Objective::root(1), &params).unwrap();
        let mut rule = solved.outcome.rule.clone();
        // Move stop mass from (2, 2) to (4, 2) leaving both fractional.
        let from = rule.model.id_of(&State { t: 2, x: 2, aux: 0 }).unwrap();
        let to = rule.model.id_of(&State { t: 4, x: 2, aux: 0 }).unwrap();
        rule.perturb_stop(0, from, to, 0.1);
        match extract_barriers(&rule, &Objective::root(1)) {
            Err(Error::NotBarrierShaped { colour: 1, .. }) => {}
            other => panic!("expected NotBarrierShaped, got {other:?}"),
        }
    }

    #[test]
    fn paper_triple_expected_times() {
        let s = seq(vec![
            d0(),
            vec![(-1, 0.5), (1, 0.5)],
            vec![(-2, 0.4), (0, 0.2), (2, 0.4)],
        ]);
        let params = SolveParams {
            horizon: Some(64),
            ..SolveParams::default()
        };
        let obj = Objective::root(2);
        let solved = solve_embedding(&s, &obj, &params).unwrap();
        let bf = extract_barriers(&solved.outcome.rule, &obj).unwrap();
        assert_eq!(bf.fibers[0].get(&1).unwrap().threshold, 1);
        assert_eq!(bf.fibers[0].get(&-1).unwrap().threshold, 1);
        let prop = propagate_exact(&solved.model, &bf, s.initial()).unwrap();
        assert!((prop.expected_time[0] - 1.0).abs() < 1e-6);
        assert!((prop.expected_time[1] - 3.2).abs() < 1e-4);
    }

    #[test]
    fn roundtrip_reproduces_lp_marginals() {
        let s = seq(vec![
            d0(),
            vec![(-1, 0.5), (1, 0.5)],
            vec![(-2, 0.4), (0, 0.2), (2, 0.4)],
        ]);
        let obj = Objective::root(2);
        let solved = solve_embedding(&s, &obj, &SolveParams::default()).unwrap();
        let bf = extract_barriers(&solved.outcome.rule, &obj).unwrap();
        let prop = propagate_exact(&solved.model, &bf, s.initial()).unwrap();
        for colour in 0..2 {
            let lp_marg = solved.outcome.rule.embedded_marginal(colour);
            for (x, w) in &lp_marg {
                let p = prop.embedded[colour].get(x).cloned().unwrap_or(0.0);
                assert!(
                    (p - w).abs() < 1e-8,
                    "colour {colour} atom {x}: prop {p} lp {w}"
                );
            }
            let v_lp = colour_value(&solved.outcome.rule, &obj, colour);
            let v_prop = prop.colour_value(&solved.model, &obj, colour);
            assert!((v_lp - v_prop).abs() < 1e-8);
        }
    }

    #[test]
    fn pasted_single_marginal_equals_joint() {
        let s = seq(vec![d0(), vec![(-1, 0.5), (1, 0.5)]]);
        let obj = Objective::root(1);
        let solved = solve_embedding(&s, &obj, &SolveParams::default()).unwrap();
        let pasted =
            pasted_baseline(Arc::clone(&solved.model), &s, &obj, 1e-6).unwrap();
        assert!((pasted.value - solved.outcome.primary_value).abs() < 1e-9);
    }

    #[test]
    fn pasted_never_beats_joint() {
        let s = seq(vec![
            d0(),
            vec![(-1, 0.5), (1, 0.5)],
            vec![(-2, 0.4), (0, 0.2), (2, 0.4)],
        ]);
        for obj in [Objective::root(2), Objective::azema_yor(2)] {
            let cmp = compare_joint_vs_pasted(&s, &obj, &SolveParams::default()).unwrap();
            assert!(cmp.certified, "family {:?} gap {}", obj.family, cmp.gap);
        }
    }

    #[test]
    fn csv_roundtrip() {
        let s = seq(vec![
            d0(),
            vec![(-1, 0.5), (1, 0.5)],
            vec![(-2, 0.4), (0, 0.2), (2, 0.4)],
        ]);
        let obj = Objective::root(2);
        let solved = solve_embedding(&s, &obj, &SolveParams::default()).unwrap();
        let bf = extract_barriers(&solved.outcome.rule, &obj).unwrap();
        let csv = bf.to_csv();
        let back = BarrierFamily::from_csv(
            &csv,
            obj.clone(),
            bf.kind,
            bf.horizon,
            bf.l_box,
            bf.pad,
            bf.n_colours,
        )
        .unwrap();
        assert_eq!(bf.fibers, back.fibers);
        let model = Arc::new(
            build_model(&s, StateKind::Plain, bf.horizon, bf.pad).unwrap(),
        );
        let p1 = propagate_exact(&model, &bf, s.initial()).unwrap();
        let p2 = propagate_exact(&model, &back, s.initial()).unwrap();
        assert_eq!(p1.embedded, p2.embedded);
    }
}
