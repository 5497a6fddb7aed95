//! Small dense two-phase simplex.
//!
//! Generic over the scalar field: the exact path instantiates it with
//! [`Rational`], the search screens instantiate it with `f64` (zero tests use
//! an absolute tolerance there). Bland's rule is used for both entering and
//! leaving variables, so the exact solver never cycles.

use std::fmt::Debug;

use num_traits::{One, Signed, Zero};

use crate::rational::Rational;

pub trait Field: Clone + Debug + Send + Sync {
    fn zero() -> Self;
    fn one() -> Self;
    fn is_zero(&self) -> bool;
    fn is_positive(&self) -> bool;
    fn is_negative(&self) -> bool;
    fn add(&self, other: &Self) -> Self;
    fn sub(&self, other: &Self) -> Self;
    fn mul(&self, other: &Self) -> Self;
    fn div(&self, other: &Self) -> Self;
    fn neg(&self) -> Self;
    fn lt(&self, other: &Self) -> bool;
}

impl Field for Rational {
    fn zero() -> Self {
        Zero::zero()
    }
    fn one() -> Self {
        One::one()
    }
    fn is_zero(&self) -> bool {
        Zero::is_zero(self)
    }
    fn is_positive(&self) -> bool {
        Signed::is_positive(self)
    }
    fn is_negative(&self) -> bool {
        Signed::is_negative(self)
    }
    fn add(&self, o: &Self) -> Self {
        self + o
    }
    fn sub(&self, o: &Self) -> Self {
        self - o
    }
    fn mul(&self, o: &Self) -> Self {
        self * o
    }
    fn div(&self, o: &Self) -> Self {
        self / o
    }
    fn neg(&self) -> Self {
        -self
    }
    fn lt(&self, o: &Self) -> bool {
        self < o
    }
}

/// Absolute zero tolerance of the floating instantiation.
pub const F64_EPS: f64 = 1e-10;

impl Field for f64 {
    fn zero() -> Self {
        0.0
    }
    fn one() -> Self {
        1.0
    }
    fn is_zero(&self) -> bool {
        self.abs() <= F64_EPS
    }
    fn is_positive(&self) -> bool {
        *self > F64_EPS
    }
    fn is_negative(&self) -> bool {
        *self < -F64_EPS
    }
    fn add(&self, o: &Self) -> Self {
        self + o
    }
    fn sub(&self, o: &Self) -> Self {
        self - o
    }
    fn mul(&self, o: &Self) -> Self {
        self * o
    }
    fn div(&self, o: &Self) -> Self {
        self / o
    }
    fn neg(&self) -> Self {
        -self
    }
    fn lt(&self, o: &Self) -> bool {
        self < o
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone)]
pub struct Constraint<F> {
    pub coeffs: Vec<F>,
    pub relation: Relation,
    pub rhs: F,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome<F> {
    Optimal { x: Vec<F>, value: F },
    Infeasible,
    Unbounded,
}

impl<F> LpOutcome<F> {
    pub fn is_feasible(&self) -> bool {
        !matches!(self, LpOutcome::Infeasible)
    }

    pub fn point(&self) -> Option<&[F]> {
        match self {
            LpOutcome::Optimal { x, .. } => Some(x),
            _ => None,
        }
    }
}

/// `maximize objective·x` subject to the constraints. Variables are
/// nonnegative unless marked free.
#[derive(Debug, Clone)]
pub struct LinearProgram<F> {
    num_vars: usize,
    free: Vec<bool>,
    constraints: Vec<Constraint<F>>,
    objective: Vec<F>,
}

impl<F: Field> LinearProgram<F> {
    pub fn new(num_vars: usize) -> Self {
        LinearProgram {
            num_vars,
            free: vec![false; num_vars],
            constraints: Vec::new(),
            objective: vec![F::zero(); num_vars],
        }
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn set_free(&mut self, var: usize) -> &mut Self {
        self.free[var] = true;
        self
    }

    pub fn set_all_free(&mut self) -> &mut Self {
        self.free.iter_mut().for_each(|f| *f = true);
        self
    }

    pub fn maximize(&mut self, objective: Vec<F>) -> &mut Self {
        assert_eq!(objective.len(), self.num_vars);
        self.objective = objective;
        self
    }

    pub fn add(&mut self, coeffs: Vec<F>, relation: Relation, rhs: F) -> &mut Self {
        assert_eq!(coeffs.len(), self.num_vars, "constraint width");
        self.constraints.push(Constraint { coeffs, relation, rhs });
        self
    }

    pub fn solve(&self) -> LpOutcome<F> {
        Tableau::build(self).run(self)
    }

    pub fn is_feasible(&self) -> bool {
        let mut probe = self.clone();
        probe.objective = vec![F::zero(); self.num_vars];
        probe.solve().is_feasible()
    }
}

struct Tableau<F> {
    rows: Vec<Vec<F>>,
    obj: Vec<F>,
    basis: Vec<usize>,
    ncols: usize,
    first_artificial: usize,
    pos_col: Vec<usize>,
    neg_col: Vec<Option<usize>>,
}

impl<F: Field> Tableau<F> {
    fn build(lp: &LinearProgram<F>) -> Self {
        let mut pos_col = Vec::with_capacity(lp.num_vars);
        let mut neg_col = Vec::with_capacity(lp.num_vars);
        let mut ncols = 0;
        for &free in &lp.free {
            pos_col.push(ncols);
            ncols += 1;
            if free {
                neg_col.push(Some(ncols));
                ncols += 1;
            } else {
                neg_col.push(None);
            }
        }
        let structural = ncols;
        let m = lp.constraints.len();

        // normalize to rhs >= 0
        let mut normalized = Vec::with_capacity(m);
        for c in &lp.constraints {
            if c.rhs.is_negative() {
                let rel = match c.relation {
                    Relation::Le => Relation::Ge,
                    Relation::Ge => Relation::Le,
                    Relation::Eq => Relation::Eq,
                };
                normalized.push((c.coeffs.iter().map(F::neg).collect::<Vec<_>>(), rel, c.rhs.neg()));
            } else {
                normalized.push((c.coeffs.clone(), c.relation, c.rhs.clone()));
            }
        }
        let slack_count = normalized.iter().filter(|c| c.1 != Relation::Eq).count();
        let art_count = normalized.iter().filter(|c| c.1 != Relation::Le).count();
        let first_artificial = structural + slack_count;
        let total = first_artificial + art_count;

        let mut rows = Vec::with_capacity(m);
        let mut basis = Vec::with_capacity(m);
        let mut slack = structural;
        let mut art = first_artificial;
        for (coeffs, rel, rhs) in normalized {
            let mut row = vec![F::zero(); total + 1];
            for (j, a) in coeffs.iter().enumerate() {
                if a.is_zero() {
                    continue;
                }
                row[pos_col[j]] = a.clone();
                if let Some(nc) = neg_col[j] {
                    row[nc] = a.neg();
                }
            }
            row[total] = rhs;
            match rel {
                Relation::Le => {
                    row[slack] = F::one();
                    basis.push(slack);
                    slack += 1;
                }
                Relation::Ge => {
                    row[slack] = F::one().neg();
                    slack += 1;
                    row[art] = F::one();
                    basis.push(art);
                    art += 1;
                }
                Relation::Eq => {
                    row[art] = F::one();
                    basis.push(art);
                    art += 1;
                }
            }
            rows.push(row);
        }
        Tableau {
            rows,
            obj: vec![F::zero(); total + 1],
            basis,
            ncols: total,
            first_artificial,
            pos_col,
            neg_col,
        }
    }

    fn pivot(&mut self, r: usize, j: usize) {
        let piv = self.rows[r][j].clone();
        if !(piv.sub(&F::one())).is_zero() {
            for v in self.rows[r].iter_mut() {
                if !v.is_zero() {
                    *v = v.div(&piv);
                }
            }
        }
        self.rows[r][j] = F::one();
        let prow = self.rows[r].clone();
        let eliminate = |row: &mut Vec<F>| {
            let f = row[j].clone();
            if f.is_zero() {
                return;
            }
            for (v, p) in row.iter_mut().zip(&prow) {
                if !p.is_zero() {
                    *v = v.sub(&f.mul(p));
                }
            }
            row[j] = F::zero();
        };
        for (i, row) in self.rows.iter_mut().enumerate() {
            if i != r {
                eliminate(row);
            }
        }
        eliminate(&mut self.obj);
        self.basis[r] = j;
    }

    /// Bland-rule primal simplex on the current objective row. Returns false
    /// when unbounded.
    fn optimize(&mut self, allowed: usize) -> bool {
        let rhs = self.ncols;
        loop {
            let Some(j) = (0..allowed).find(|&j| self.obj[j].is_negative()) else {
                return true;
            };
            let mut best: Option<(usize, F)> = None;
            for (r, row) in self.rows.iter().enumerate() {
                if !row[j].is_positive() {
                    continue;
                }
                let ratio = row[rhs].div(&row[j]);
                let better = match &best {
                    None => true,
                    Some((br, bv)) => {
                        ratio.lt(bv) || (!bv.lt(&ratio) && self.basis[r] < self.basis[*br])
                    }
                };
                if better {
                    best = Some((r, ratio));
                }
            }
            match best {
                Some((r, _)) => self.pivot(r, j),
                None => return false,
            }
        }
    }

    fn set_objective(&mut self, costs: &[F]) {
        // obj row encodes z - c·x = 0, then basic columns are eliminated
        self.obj = vec![F::zero(); self.ncols + 1];
        for (j, c) in costs.iter().enumerate() {
            self.obj[j] = c.neg();
        }
        for r in 0..self.rows.len() {
            let b = self.basis[r];
            let f = self.obj[b].clone();
            if f.is_zero() {
                continue;
            }
            for (v, p) in self.obj.iter_mut().zip(&self.rows[r]) {
                if !p.is_zero() {
                    *v = v.sub(&f.mul(p));
                }
            }
            self.obj[b] = F::zero();
        }
    }

    fn run(mut self, lp: &LinearProgram<F>) -> LpOutcome<F> {
        let rhs = self.ncols;
        if self.first_artificial < self.ncols {
            let mut phase1 = vec![F::zero(); self.ncols];
            for c in phase1.iter_mut().skip(self.first_artificial) {
                *c = F::one().neg();
            }
            self.set_objective(&phase1);
            self.optimize(self.ncols);
            if self.obj[rhs].is_negative() {
                return LpOutcome::Infeasible;
            }
            // drive zero-level artificials out of the basis
            let mut r = 0;
            while r < self.rows.len() {
                if self.basis[r] >= self.first_artificial {
                    match (0..self.first_artificial).find(|&j| !self.rows[r][j].is_zero()) {
                        Some(j) => {
                            self.pivot(r, j);
                            r += 1;
                        }
                        None => {
                            self.rows.remove(r);
                            self.basis.remove(r);
                        }
                    }
                } else {
                    r += 1;
                }
            }
        }

        let mut costs = vec![F::zero(); self.ncols];
        for (j, c) in lp.objective.iter().enumerate() {
            costs[self.pos_col[j]] = c.clone();
            if let Some(nc) = self.neg_col[j] {
                costs[nc] = c.neg();
            }
        }
        self.set_objective(&costs);
        if !self.optimize(self.first_artificial) {
            return LpOutcome::Unbounded;
        }

        let mut col_values = vec![F::zero(); self.ncols];
        for (r, &b) in self.basis.iter().enumerate() {
            col_values[b] = self.rows[r][rhs].clone();
        }
        let x = (0..lp.num_vars)
            .map(|j| {
                let v = col_values[self.pos_col[j]].clone();
                match self.neg_col[j] {
                    Some(nc) => v.sub(&col_values[nc]),
                    None => v,
                }
            })
            .collect();
        LpOutcome::Optimal { x, value: self.obj[rhs].clone() }
    }
}
