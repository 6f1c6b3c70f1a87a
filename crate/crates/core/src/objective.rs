//! Objective families over stopped mass: convex-time barriers (minimised or
//! maximised), running-maximum functionals, and start-conditional transport
//! costs.

use crate::error::Error;
use crate::lattice::{State, StateKind};
use crate::scalar::Scalar;
use std::collections::BTreeMap;

/// The five supported optimisation families.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Family {
    /// Minimise `sum_i w_i E[tau_i^kappa]`; optimal rules hit right barriers
    /// in `(t, x)`.
    Root,
    /// Maximise the same functional; optimal rules hit inverse barriers.
    Rost,
    /// Maximise `sum_i w_i E[max]`; barriers in `(max, x)`.
    AzemaYor,
    /// Minimise `sum_i w_i E[max]`; left barriers in `(max, x)` plus
    /// stopping at the running maximum.
    HobsonPedersen,
    /// Minimise `sum_i w_i E[c(B_0, B_tau_i)]`; barriers in `(x - x_0, x)`.
    MonotoneTransport,
}

impl Family {
    pub fn required_kind(&self) -> StateKind {
        match self {
            Family::Root | Family::Rost => StateKind::Plain,
            Family::AzemaYor | Family::HobsonPedersen => StateKind::MaxAugmented,
            Family::MonotoneTransport => StateKind::StartAugmented,
        }
    }

    /// True when the user-facing problem is a maximisation (internally every
    /// solve minimises; reported values are sign corrected).
    pub fn is_maximization(&self) -> bool {
        matches!(self, Family::Rost | Family::AzemaYor)
    }

    pub fn name(&self) -> &'static str {
        match self {
            Family::Root => "root",
            Family::Rost => "rost",
            Family::AzemaYor => "azema_yor",
            Family::HobsonPedersen => "hobson_pedersen",
            Family::MonotoneTransport => "monotone_transport",
        }
    }

    pub fn parse(s: &str) -> Result<Self, Error> {
        match s {
            "root" => Ok(Family::Root),
            "rost" => Ok(Family::Rost),
            "azema_yor" => Ok(Family::AzemaYor),
            "hobson_pedersen" => Ok(Family::HobsonPedersen),
            "monotone_transport" => Ok(Family::MonotoneTransport),
            other => Err(Error::InvalidObjective(format!("unknown family {other:?}"))),
        }
    }
}

/// Start-conditional cost grid `c(x0, x)`.
#[derive(Clone, Debug)]
pub struct CostTable<S: Scalar> {
    entries: BTreeMap<(i64, i64), S>,
}

impl<S: Scalar> CostTable<S> {
    pub fn new(entries: BTreeMap<(i64, i64), S>) -> Self {
        CostTable { entries }
    }

    /// Built-in generator `c(x0, x) = (x - x0)^3`, the canonical cost whose
    /// discrete mixed difference `D_{x0} D^2_x c = -6` is strictly negative.
    pub fn cubic(x0_atoms: &[i64], l_box: i64) -> Self {
        let mut entries = BTreeMap::new();
        for &x0 in x0_atoms {
            for x in -l_box..=l_box {
                let d = x - x0;
                entries.insert((x0, x), S::from_i64(d * d * d));
            }
        }
        CostTable { entries }
    }

    pub fn get(&self, x0: i64, x: i64) -> Result<S, Error> {
        self.entries.get(&(x0, x)).cloned().ok_or_else(|| {
            Error::InvalidObjective(format!("cost table missing entry c({x0}, {x})"))
        })
    }

    pub fn entries(&self) -> &BTreeMap<(i64, i64), S> {
        &self.entries
    }

    /// Checks `c(x0+, x+1) - 2 c(x0+, x) + c(x0+, x-1) <
    /// c(x0, x+1) - 2 c(x0, x) + c(x0, x-1)` for consecutive start atoms
    /// `x0 < x0+` and every interior grid position. Vacuous with a single
    /// start atom.
    pub fn validate_mixed_difference(&self, x0_atoms: &[i64], l_box: i64) -> Result<(), Error> {
        for pair in x0_atoms.windows(2) {
            let (a, b) = (pair[0], pair[1]);
            for x in (-l_box + 1)..l_box {
                let da =
                    self.get(a, x + 1)? - S::from_i64(2) * self.get(a, x)? + self.get(a, x - 1)?;
                let db =
                    self.get(b, x + 1)? - S::from_i64(2) * self.get(b, x)? + self.get(b, x - 1)?;
                if !(db < da) {
                    return Err(Error::InvalidObjective(format!(
                        "cost mixed difference not strictly negative at x0 {a}->{b}, x={x}"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// A weighted objective over colours, optionally with a lexicographic
/// secondary.
#[derive(Clone, Debug)]
pub struct Objective<S: Scalar> {
    pub family: Family,
    /// Convex-time exponent for Root/Rost, in `2..=4`.
    pub kappa: u32,
    /// Strictly positive per-colour weights.
    pub weights: Vec<S>,
    pub cost: Option<CostTable<S>>,
    pub secondary: Option<Box<Objective<S>>>,
}

impl<S: Scalar> Objective<S> {
    pub fn new(family: Family, kappa: u32, weights: Vec<S>) -> Result<Self, Error> {
        let obj = Objective {
            family,
            kappa,
            weights,
            cost: None,
            secondary: None,
        };
        obj.validate_flat()?;
        Ok(obj)
    }

    /// Root with `kappa = 2` and unit weights, the workhorse objective.
    pub fn root(n_colours: usize) -> Self {
        Objective {
            family: Family::Root,
            kappa: 2,
            weights: vec![S::one(); n_colours],
            cost: None,
            secondary: None,
        }
    }

    pub fn rost(n_colours: usize) -> Self {
        Objective {
            family: Family::Rost,
            ..Objective::root(n_colours)
        }
    }

    pub fn azema_yor(n_colours: usize) -> Self {
        Objective {
            family: Family::AzemaYor,
            ..Objective::root(n_colours)
        }
    }

    pub fn hobson_pedersen(n_colours: usize) -> Self {
        Objective {
            family: Family::HobsonPedersen,
            ..Objective::root(n_colours)
        }
    }

    pub fn monotone_transport(n_colours: usize, cost: CostTable<S>) -> Self {
        Objective {
            family: Family::MonotoneTransport,
            kappa: 2,
            weights: vec![S::one(); n_colours],
            cost: Some(cost),
            secondary: None,
        }
    }

    pub fn with_weights(mut self, weights: Vec<S>) -> Self {
        self.weights = weights;
        self
    }

    pub fn with_secondary(mut self, secondary: Objective<S>) -> Self {
        self.secondary = Some(Box::new(secondary));
        self
    }

    fn validate_flat(&self) -> Result<(), Error> {
        if self.weights.is_empty() {
            return Err(Error::InvalidObjective("empty weight vector".into()));
        }
        for w in &self.weights {
            if !(*w > S::zero()) {
                return Err(Error::InvalidObjective(
                    "weights must be strictly positive".into(),
                ));
            }
        }
        if matches!(self.family, Family::Root | Family::Rost)
            && !(2..=4).contains(&self.kappa)
        {
            return Err(Error::InvalidObjective(format!(
                "kappa {} outside the supported range 2..=4",
                self.kappa
            )));
        }
        if self.family == Family::MonotoneTransport && self.cost.is_none() {
            return Err(Error::InvalidObjective(
                "monotone transport requires a cost table".into(),
            ));
        }
        Ok(())
    }

    /// Full validation against a model: weights length, kind compatibility,
    /// cost grid coverage and curvature, and the same for the secondary.
    pub fn validate(&self, kind: StateKind, n_colours: usize, x0_atoms: &[i64], l_box: i64) -> Result<(), Error> {
        self.validate_flat()?;
        if self.weights.len() != n_colours {
            return Err(Error::InvalidObjective(format!(
                "{} weights for {} colours",
                self.weights.len(),
                n_colours
            )));
        }
        let required = self.family.required_kind();
        if required != kind {
            return Err(Error::IncompatibleStateKind {
                family: self.family.name().into(),
                required: required.to_string(),
                actual: kind.to_string(),
            });
        }
        if let Some(cost) = &self.cost {
            cost.validate_mixed_difference(x0_atoms, l_box)?;
        }
        if let Some(sec) = &self.secondary {
            // The secondary must read the same state coordinates.
            if sec.family.required_kind() != kind {
                return Err(Error::IncompatibleStateKind {
                    family: sec.family.name().into(),
                    required: sec.family.required_kind().to_string(),
                    actual: kind.to_string(),
                });
            }
            sec.validate_flat()?;
            if sec.weights.len() != n_colours {
                return Err(Error::InvalidObjective(
                    "secondary weight vector length mismatch".into(),
                ));
            }
            if let Some(cost) = &sec.cost {
                cost.validate_mixed_difference(x0_atoms, l_box)?;
            }
        }
        Ok(())
    }

    /// Minimised coefficient placed on the stop variable of `colour`
    /// (0-based) at `state`. Maximising families carry negated coefficients.
    pub fn coefficient(&self, colour: usize, state: &State) -> Result<S, Error> {
        let w = self.weights[colour].clone();
        Ok(match self.family {
            Family::Root => w * S::from_i64(state.t as i64).powi(self.kappa),
            Family::Rost => -(w * S::from_i64(state.t as i64).powi(self.kappa)),
            Family::AzemaYor => -(w * S::from_i64(state.aux)),
            Family::HobsonPedersen => w * S::from_i64(state.aux),
            Family::MonotoneTransport => {
                let cost = self.cost.as_ref().expect("validated");
                w * cost.get(state.aux, state.x)?
            }
        })
    }

    /// Sign applied to the internal minimum to report a user-facing value.
    pub fn report_sign(&self) -> S {
        if self.family.is_maximization() {
            -S::one()
        } else {
            S::one()
        }
    }
}

/// Tie-break coefficient `x^2 / (1 + l_box + max)` used to canonicalise
/// maximum-family optima; positive and decreasing in the running maximum,
/// defined for every reachable (possibly negative) maximum.
pub fn max_tiebreak_coefficient<S: Scalar>(state: &State, l_box: i64) -> S {
    let num = S::from_i64(state.x * state.x);
    let den = S::from_i64(1 + l_box + state.aux);
    num / den
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cubic_cost_has_negative_mixed_difference() {
        let atoms = vec![-1, 1];
        let cost = CostTable::<f64>::cubic(&atoms, 3);
        cost.validate_mixed_difference(&atoms, 3).unwrap();
    }

    #[test]
    fn reversed_cubic_cost_rejected() {
        let atoms = vec![-1, 1];
        let mut entries = BTreeMap::new();
        for &x0 in &atoms {
            for x in -3i64..=3 {
                let d = x - x0;
                entries.insert((x0, x), -((d * d * d) as f64));
            }
        }
        let cost = CostTable::new(entries);
        assert!(cost.validate_mixed_difference(&atoms, 3).is_err());
    }

    #[test]
    fn weights_must_be_positive() {
        assert!(Objective::<f64>::new(Family::Root, 2, vec![1.0, 0.0]).is_err());
        assert!(Objective::<f64>::new(Family::Root, 2, vec![1.0, 2.0]).is_ok());
    }

    #[test]
    fn kappa_capped() {
        assert!(Objective::<f64>::new(Family::Root, 5, vec![1.0]).is_err());
        assert!(Objective::<f64>::new(Family::Root, 1, vec![1.0]).is_err());
    }

    #[test]
    fn coefficient_signs() {
        let s = State { t: 3, x: 1, aux: 2 };
        let root = Objective::<f64>::root(1);
        assert_eq!(root.coefficient(0, &s).unwrap(), 9.0);
        let rost = Objective::<f64>::rost(1);
        assert_eq!(rost.coefficient(0, &s).unwrap(), -9.0);
        let ay = Objective::<f64>::azema_yor(1);
        assert_eq!(ay.coefficient(0, &s).unwrap(), -2.0);
        let hp = Objective::<f64>::hobson_pedersen(1);
        assert_eq!(hp.coefficient(0, &s).unwrap(), 2.0);
    }
}
