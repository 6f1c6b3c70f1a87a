//! Finitely supported probability measures on the integer lattice and the
//! potential-function machinery that decides convex order.

use crate::error::Error;
use crate::scalar::{Scalar, Weight};
use serde::Deserialize;

/// A probability measure with finitely many atoms at integer positions.
///
/// Atoms are kept sorted by position, zero-weight atoms are dropped on
/// construction, and the total mass must be 1 (within 1e-12 in float mode,
/// exactly in rational mode).
#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteMeasure<S: Scalar> {
    atoms: Vec<(i64, S)>,
}

impl<S: Scalar> DiscreteMeasure<S> {
    pub fn new(mut atoms: Vec<(i64, S)>) -> Result<Self, Error> {
        atoms.retain(|(_, w)| !w.is_zero());
        atoms.sort_by_key(|(x, _)| *x);
        for win in atoms.windows(2) {
            if win[0].0 == win[1].0 {
                return Err(Error::InvalidMeasure(format!(
                    "duplicate atom at position {}",
                    win[0].0
                )));
            }
        }
        if atoms.is_empty() {
            return Err(Error::InvalidMeasure("measure has no mass".into()));
        }
        let mut total = S::zero();
        for (_, w) in &atoms {
            if *w < S::zero() {
                return Err(Error::InvalidMeasure("negative weight".into()));
            }
            total += w.clone();
        }
        let gap = (total - S::one()).abs();
        let tol = if S::EXACT {
            S::zero()
        } else {
            S::from_f64(1e-12)
        };
        if gap > tol {
            return Err(Error::InvalidMeasure(format!(
                "weights sum to 1 {:+e} instead of 1",
                gap.to_f64()
            )));
        }
        Ok(DiscreteMeasure { atoms })
    }

    /// Point mass at `x`.
    pub fn dirac(x: i64) -> Self {
        DiscreteMeasure {
            atoms: vec![(x, S::one())],
        }
    }

    pub fn atoms(&self) -> &[(i64, S)] {
        &self.atoms
    }

    pub fn positions(&self) -> impl Iterator<Item = i64> + '_ {
        self.atoms.iter().map(|(x, _)| *x)
    }

    pub fn weight_at(&self, x: i64) -> S {
        self.atoms
            .iter()
            .find(|(p, _)| *p == x)
            .map(|(_, w)| w.clone())
            .unwrap_or_else(S::zero)
    }

    pub fn supports(&self, x: i64) -> bool {
        self.atoms.binary_search_by_key(&x, |(p, _)| *p).is_ok()
    }

    pub fn max_abs_position(&self) -> i64 {
        self.atoms.iter().map(|(x, _)| x.abs()).max().unwrap_or(0)
    }

    pub fn mean(&self) -> S {
        let mut acc = S::zero();
        for (x, w) in &self.atoms {
            acc += S::from_i64(*x) * w.clone();
        }
        acc
    }

    pub fn second_moment(&self) -> S {
        let mut acc = S::zero();
        for (x, w) in &self.atoms {
            acc += S::from_i64(x * x) * w.clone();
        }
        acc
    }

    pub fn variance(&self) -> S {
        let m = self.mean();
        self.second_moment() - m.clone() * m
    }

    /// Potential `u(x) = -sum |x - y| w(y)`: concave, piecewise linear with
    /// kinks exactly at the atoms and asymptotic slopes +-1.
    pub fn potential(&self, x: S) -> S {
        let mut acc = S::zero();
        for (y, w) in &self.atoms {
            acc += (x.clone() - S::from_i64(*y)).abs() * w.clone();
        }
        -acc
    }
}

/// Parse form of a measure: `{"atoms": [[x, "2/5"], [x, 0.5], ...]}`.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasureSpec {
    pub atoms: Vec<(i64, WeightSpec)>,
}

/// A weight is a JSON number or a string holding a decimal or `p/q`.
#[derive(Debug, Deserialize)]
#[serde(untagged)]
pub enum WeightSpec {
    Number(f64),
    Text(String),
}

impl MeasureSpec {
    pub fn parse_json(v: &serde_json::Value) -> Result<Self, Error> {
        serde_json::from_value(v.clone())
            .map_err(|e| Error::InvalidMeasure(format!("bad measure JSON: {e}")))
    }

    pub fn weights(&self) -> Result<Vec<(i64, Weight)>, Error> {
        self.atoms
            .iter()
            .map(|(x, w)| {
                let w = match w {
                    WeightSpec::Number(v) => {
                        if !v.is_finite() {
                            return Err(Error::InvalidMeasure("non-finite weight".into()));
                        }
                        Weight::from_float(*v)
                    }
                    WeightSpec::Text(s) => Weight::parse(s).map_err(Error::InvalidMeasure)?,
                };
                Ok((*x, w))
            })
            .collect()
    }

    /// True iff every weight is written in exact `p/q` form.
    pub fn all_exact(&self) -> Result<bool, Error> {
        Ok(self.weights()?.iter().all(|(_, w)| w.exact_input))
    }

    pub fn to_measure<S: Scalar>(&self) -> Result<DiscreteMeasure<S>, Error> {
        let atoms = self
            .weights()?
            .into_iter()
            .map(|(x, w)| (x, w.to_scalar::<S>()))
            .collect();
        DiscreteMeasure::new(atoms)
    }
}

/// Ordered marginals `mu_0, ..., mu_n` (index 0 is the starting law).
///
/// Construction checks equal means; convex order is a separate query so a
/// failing sequence can still be reported with its witness.
#[derive(Clone, Debug)]
pub struct MarginalSequence<S: Scalar> {
    measures: Vec<DiscreteMeasure<S>>,
}

/// First point where convex order fails: potentials cross at position `x`
/// between marginals `pair_index` and `pair_index + 1` (or means differ,
/// reported at the first atom).
#[derive(Clone, Debug, PartialEq)]
pub struct ConvexOrderWitness {
    pub pair_index: usize,
    pub position: i64,
}

impl<S: Scalar> MarginalSequence<S> {
    pub fn new(measures: Vec<DiscreteMeasure<S>>) -> Result<Self, Error> {
        if measures.is_empty() {
            return Err(Error::InvalidMeasure("empty marginal sequence".into()));
        }
        let tol = if S::EXACT {
            S::zero()
        } else {
            S::from_f64(1e-9)
        };
        let m0 = measures[0].mean();
        for m in &measures[1..] {
            if (m.mean() - m0.clone()).abs() > tol {
                return Err(Error::InvalidMeasure(
                    "marginals do not share a common mean".into(),
                ));
            }
        }
        Ok(MarginalSequence { measures })
    }

    pub fn measures(&self) -> &[DiscreteMeasure<S>] {
        &self.measures
    }

    /// Number of target marginals (colours); the sequence holds n + 1 laws.
    pub fn n_colours(&self) -> usize {
        self.measures.len() - 1
    }

    pub fn initial(&self) -> &DiscreteMeasure<S> {
        &self.measures[0]
    }

    /// Target law of colour `i` (1-based).
    pub fn target(&self, colour: usize) -> &DiscreteMeasure<S> {
        &self.measures[colour]
    }

    pub fn max_abs_support(&self) -> i64 {
        self.measures
            .iter()
            .map(|m| m.max_abs_position())
            .max()
            .unwrap_or(0)
    }

    /// Checks pairwise convex order through potentials evaluated at the
    /// union of atoms of each consecutive pair. Piecewise-linear potentials
    /// with equal asymptotes are ordered everywhere iff ordered at kinks.
    pub fn convex_order_witness(&self) -> Option<ConvexOrderWitness> {
        let tol = if S::EXACT {
            S::zero()
        } else {
            S::from_f64(1e-9)
        };
        for i in 0..self.measures.len() - 1 {
            let a = &self.measures[i];
            let b = &self.measures[i + 1];
            let mut kinks: Vec<i64> = a.positions().chain(b.positions()).collect();
            kinks.sort_unstable();
            kinks.dedup();
            for x in kinks {
                let ua = a.potential(S::from_i64(x));
                let ub = b.potential(S::from_i64(x));
                if ub > ua.clone() + tol.clone() {
                    return Some(ConvexOrderWitness {
                        pair_index: i,
                        position: x,
                    });
                }
            }
        }
        None
    }

    pub fn is_convex_order(&self) -> bool {
        self.convex_order_witness().is_none()
    }
}
