//! Dense-tableau primal simplex over an abstract scalar, built for staged
//! lexicographic solves: minimise an objective, pin its value with an
//! equality row, swap in the next objective, and continue from the same
//! basis.
//!
//! Determinism: entering variables are priced by most-negative reduced cost
//! with lowest-index tie break, falling back to Bland's rule after a run of
//! degenerate pivots; the leaving row always takes the lowest basic index
//! among ratio ties. Identical input yields an identical pivot path in both
//! float and exact arithmetic.

use crate::error::Error;
use crate::scalar::Scalar;

/// Consecutive zero-progress pivots before switching to Bland's rule.
const DEGENERATE_SWITCH: usize = 60;

pub struct Simplex<S: Scalar> {
    /// Structural column count (excludes pin slacks).
    n_struct: usize,
    /// Current logical column count.
    n: usize,
    /// Column capacity; the rhs lives at index `cap`.
    cap: usize,
    width: usize,
    m: usize,
    /// Row-major tableau, `m` rows of `width`; holds `B^{-1} A | B^{-1} b`.
    a: Vec<S>,
    /// Basic column of each row.
    basis: Vec<usize>,
    /// Row of each basic column.
    row_of: Vec<Option<usize>>,
    /// Reduced costs of the objective currently being minimised.
    d: Vec<S>,
    /// Dense copy of the current objective (for value queries and pinning).
    cost: Vec<S>,
    pub iterations: usize,
    max_iterations: usize,
}

impl<S: Scalar> Simplex<S> {
    /// Builds the tableau from sparse rows and a starting basis whose matrix
    /// is triangular when rows are processed top to bottom (each basic
    /// column appears in its own row and only in later rows).
    pub fn new(
        rows: &[Vec<(usize, S)>],
        rhs: &[S],
        n_cols: usize,
        basis: Vec<usize>,
        max_pins: usize,
    ) -> Result<Self, Error> {
        let m = rows.len();
        assert_eq!(rhs.len(), m);
        assert_eq!(basis.len(), m);
        let cap = n_cols + max_pins;
        let width = cap + 1;
        let mut a = vec![S::zero(); m * width];
        for (r, row) in rows.iter().enumerate() {
            for (c, v) in row {
                a[r * width + c] = v.clone();
            }
            a[r * width + cap] = rhs[r].clone();
        }

        let mut row_of: Vec<Option<usize>> = vec![None; cap];
        for (r, &b) in basis.iter().enumerate() {
            if row_of[b].is_some() {
                return Err(Error::SolverFailure(format!(
                    "column {b} basic in two rows"
                )));
            }
            row_of[b] = Some(r);
        }

        let mut sx = Simplex {
            n_struct: n_cols,
            n: n_cols,
            cap,
            width,
            m,
            a,
            basis,
            row_of,
            d: vec![S::zero(); cap],
            cost: vec![S::zero(); cap],
            iterations: 0,
            max_iterations: 0,
        };
        sx.max_iterations = 50_000 + 50 * (m + n_cols);

        // Forward elimination in row order brings the triangular basis to
        // identity form.
        for r in 0..m {
            let j = sx.basis[r];
            let piv = sx.at(r, j).clone();
            if piv.is_zero() {
                return Err(Error::SolverFailure(format!(
                    "basis column {j} vanishes in its row {r}"
                )));
            }
            if piv != S::one() {
                let inv = S::one() / piv;
                sx.scale_row(r, &inv);
            }
            for r2 in (r + 1)..m {
                let f = sx.at(r2, j).clone();
                if !f.is_zero() {
                    sx.axpy_row(r2, r, &f);
                }
            }
        }
        // Basic solution must be feasible by construction.
        for r in 0..m {
            let v = sx.at(r, sx.cap);
            if *v < -S::feas_tol() {
                return Err(Error::SolverFailure(format!(
                    "starting basis infeasible in row {r}: {}",
                    v.to_f64()
                )));
            }
        }
        Ok(sx)
    }

    #[inline]
    fn at(&self, r: usize, c: usize) -> &S {
        &self.a[r * self.width + c]
    }

    fn scale_row(&mut self, r: usize, f: &S) {
        let base = r * self.width;
        for c in 0..=self.cap {
            let v = &mut self.a[base + c];
            if !v.is_zero() {
                *v = v.clone() * f.clone();
            }
        }
    }

    /// `row[r2] -= f * row[r]`, snapping float dust to zero.
    fn axpy_row(&mut self, r2: usize, r: usize, f: &S) {
        let (lo, hi) = if r2 < r { (r2, r) } else { (r, r2) };
        let (head, tail) = self.a.split_at_mut(hi * self.width);
        let (dst, src) = if r2 < r {
            (
                &mut head[r2 * self.width..r2 * self.width + self.width],
                &tail[..self.width],
            )
        } else {
            let s = &head[lo * self.width..lo * self.width + self.width];
            (&mut tail[..self.width], s)
        };
        for c in 0..self.width {
            if !src[c].is_zero() {
                dst[c] -= f.clone() * src[c].clone();
                if !S::EXACT && dst[c].abs() < S::from_f64(1e-13) {
                    dst[c] = S::zero();
                }
            }
        }
    }

    pub fn n_rows(&self) -> usize {
        self.m
    }

    pub fn n_cols(&self) -> usize {
        self.n
    }

    /// Value of column `c` in the current basic solution.
    pub fn col_value(&self, c: usize) -> S {
        match self.row_of[c] {
            Some(r) => self.at(r, self.cap).clone(),
            None => S::zero(),
        }
    }

    pub fn solution(&self) -> Vec<S> {
        (0..self.n_struct).map(|c| self.col_value(c)).collect()
    }

    pub fn objective_value(&self) -> S {
        let mut acc = S::zero();
        for r in 0..self.m {
            let cb = &self.cost[self.basis[r]];
            if !cb.is_zero() {
                acc += cb.clone() * self.at(r, self.cap).clone();
            }
        }
        acc
    }

    pub fn value_of(&self, costs: &[(usize, S)]) -> S {
        let mut acc = S::zero();
        for (c, v) in costs {
            let x = self.col_value(*c);
            if !x.is_zero() {
                acc += v.clone() * x;
            }
        }
        acc
    }

    fn set_costs(&mut self, costs: &[(usize, S)]) {
        for v in self.cost.iter_mut() {
            *v = S::zero();
        }
        for (c, v) in costs {
            self.cost[*c] = v.clone();
        }
        // d_j = c_j - c_B^T T[., j]
        self.d = self.cost.clone();
        for r in 0..self.m {
            let cb = self.cost[self.basis[r]].clone();
            if cb.is_zero() {
                continue;
            }
            let base = r * self.width;
            for j in 0..self.n {
                let t = &self.a[base + j];
                if !t.is_zero() {
                    self.d[j] -= cb.clone() * t.clone();
                }
            }
        }
        for r in 0..self.m {
            self.d[self.basis[r]] = S::zero();
        }
    }

    /// Minimises `costs` (sparse) from the current basis.
    pub fn minimize(&mut self, costs: &[(usize, S)]) -> Result<S, Error> {
        self.set_costs(costs);
        let tol = S::feas_tol();
        let mut degenerate_run = 0usize;
        loop {
            self.iterations += 1;
            if self.iterations > self.max_iterations {
                return Err(Error::SolverFailure(format!(
                    "no optimum after {} pivots",
                    self.iterations
                )));
            }
            let bland = degenerate_run >= DEGENERATE_SWITCH;
            let entering = self.pick_entering(&tol, bland);
            let q = match entering {
                Some(q) => q,
                None => return Ok(self.objective_value()),
            };
            let r = match self.pick_leaving(q, &tol) {
                Some(r) => r,
                None => {
                    return Err(Error::SolverFailure(format!(
                        "objective unbounded along column {q}"
                    )))
                }
            };
            let step_zero = self.at(r, self.cap).is_zero()
                || (!S::EXACT && self.at(r, self.cap).abs() <= tol);
            if step_zero {
                degenerate_run += 1;
            } else {
                degenerate_run = 0;
            }
            self.pivot(r, q);
        }
    }

    fn pick_entering(&self, tol: &S, bland: bool) -> Option<usize> {
        if bland {
            (0..self.n).find(|&j| self.d[j] < -tol.clone())
        } else {
            let mut best: Option<(usize, S)> = None;
            for j in 0..self.n {
                let dj = &self.d[j];
                if *dj < -tol.clone() {
                    match &best {
                        Some((_, b)) if !(dj < b) => {}
                        _ => best = Some((j, dj.clone())),
                    }
                }
            }
            best.map(|(j, _)| j)
        }
    }

    fn pick_leaving(&self, q: usize, tol: &S) -> Option<usize> {
        let mut best: Option<(usize, S)> = None; // (row, ratio)
        for r in 0..self.m {
            let a_rq = self.at(r, q);
            if *a_rq > tol.clone() {
                let ratio = self.at(r, self.cap).clone() / a_rq.clone();
                match &best {
                    None => best = Some((r, ratio)),
                    Some((br, bratio)) => {
                        if ratio < *bratio
                            || (ratio == *bratio && self.basis[r] < self.basis[*br])
                        {
                            best = Some((r, ratio));
                        }
                    }
                }
            }
        }
        best.map(|(r, _)| r)
    }

    fn pivot(&mut self, r: usize, q: usize) {
        let leaving = self.basis[r];
        let piv = self.at(r, q).clone();
        if piv != S::one() {
            let inv = S::one() / piv;
            self.scale_row(r, &inv);
        }
        self.a[r * self.width + q] = S::one();
        for r2 in 0..self.m {
            if r2 == r {
                continue;
            }
            let f = self.at(r2, q).clone();
            if !f.is_zero() {
                self.axpy_row(r2, r, &f);
                self.a[r2 * self.width + q] = S::zero();
            }
        }
        // Reduced-cost row update.
        let dq = self.d[q].clone();
        if !dq.is_zero() {
            let base = r * self.width;
            for j in 0..self.n {
                let t = self.a[base + j].clone();
                if !t.is_zero() {
                    self.d[j] -= dq.clone() * t;
                    if !S::EXACT && self.d[j].abs() < S::from_f64(1e-13) {
                        self.d[j] = S::zero();
                    }
                }
            }
        }
        self.d[q] = S::zero();
        self.row_of[leaving] = None;
        self.row_of[q] = Some(r);
        self.basis[r] = q;
    }

    /// Pins the objective minimised last at its attained value: appends the
    /// row `c^T x + slack = value + slack_gap` (the slack is forced to
    /// `slack_gap` by optimality of `value`) and makes the slack basic.
    /// `slack_gap` is 0 in exact mode and a small tolerance in float mode.
    pub fn pin_current_objective(&mut self, slack_gap: &S) -> Result<(), Error> {
        if self.n >= self.cap {
            return Err(Error::SolverFailure("pin capacity exhausted".into()));
        }
        let slack_col = self.n;
        self.n += 1;
        // In reduced form the new row is exactly the reduced-cost row with
        // rhs equal to the allowed slack.
        let mut row = vec![S::zero(); self.width];
        for j in 0..self.n - 1 {
            row[j] = self.d[j].clone();
        }
        row[slack_col] = S::one();
        row[self.cap] = slack_gap.clone();
        self.a.extend(row);
        self.basis.push(slack_col);
        self.row_of[slack_col] = Some(self.m);
        self.m += 1;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_rational::BigRational;

    /// min -x0 - 2 x1 st x0 + x1 + s0 = 4, 2 x0 + x1 + s1 = 5, x >= 0.
    fn toy<S: Scalar>() -> Simplex<S> {
        let rows = vec![
            vec![(0, S::one()), (1, S::one()), (2, S::one())],
            vec![(0, S::from_i64(2)), (1, S::one()), (3, S::one())],
        ];
        let rhs = vec![S::from_i64(4), S::from_i64(5)];
        Simplex::new(&rows, &rhs, 4, vec![2, 3], 2).unwrap()
    }

    #[test]
    fn solves_toy_lp_float() {
        let mut sx = toy::<f64>();
        let v = sx
            .minimize(&[(0, -1.0), (1, -2.0)])
            .unwrap();
        assert!((v + 8.0).abs() < 1e-12);
        let x = sx.solution();
        assert!((x[0] - 0.0).abs() < 1e-12);
        assert!((x[1] - 4.0).abs() < 1e-12);
    }

    #[test]
    fn solves_toy_lp_exact() {
        let mut sx = toy::<BigRational>();
        let v = sx
            .minimize(&[
                (0, BigRational::from_i64(-1)),
                (1, BigRational::from_i64(-2)),
            ])
            .unwrap();
        assert_eq!(v, BigRational::from_i64(-8));
    }

    #[test]
    fn lexicographic_pin_keeps_first_optimum() {
        // Ties on the first objective: min x0 + x1 st x0 + x1 - s = 2.
        let rows = vec![vec![(0, BigRational::one()), (1, BigRational::one())]];
        let rhs = vec![BigRational::from_i64(2)];
        // x0 basic initially.
        let mut sx = Simplex::new(&rows, &rhs, 2, vec![0], 2).unwrap();
        let v1 = sx
            .minimize(&[
                (0, BigRational::one()),
                (1, BigRational::one()),
            ])
            .unwrap();
        assert_eq!(v1, BigRational::from_i64(2));
        sx.pin_current_objective(&BigRational::zero()).unwrap();
        // Secondary: prefer x1.
        let v2 = sx.minimize(&[(0, BigRational::from_i64(1))]).unwrap();
        assert_eq!(v2, BigRational::zero());
        let primary_again = sx.value_of(&[
            (0, BigRational::one()),
            (1, BigRational::one()),
        ]);
        assert_eq!(primary_again, BigRational::from_i64(2));
    }

    #[test]
    fn reports_unbounded() {
        // min -x0 with a single free growth direction.
        let rows = vec![vec![(0, 1.0), (1, -1.0)]];
        let rhs = vec![0.0];
        let mut sx = Simplex::new(&rows, &rhs, 2, vec![0], 1).unwrap();
        assert!(sx.minimize(&[(1, -1.0)]).is_err());
    }
}
