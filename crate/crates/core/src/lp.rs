//! Exact rational linear programming with verified certificates.
//!
//! A dense two-phase simplex over arbitrary-precision rationals. Bland's rule
//! guarantees termination, and every solve returns primal and dual solutions
//! that are checked for feasibility and complementary slackness before being
//! handed back.

use crate::rational::Rational;
use num_traits::{Signed, Zero};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

/// maximize objective · x subject to rows (coeffs REL rhs) and x >= 0.
#[derive(Debug, Clone)]
pub struct LinearProgram {
    pub num_vars: usize,
    pub objective: Vec<Rational>,
    pub rows: Vec<(Vec<Rational>, Relation, Rational)>,
}

impl LinearProgram {
    pub fn new(num_vars: usize, objective: Vec<Rational>) -> Self {
        assert_eq!(num_vars, objective.len());
        LinearProgram {
            num_vars,
            objective,
            rows: Vec::new(),
        }
    }

    pub fn add_row(&mut self, coeffs: Vec<Rational>, rel: Relation, rhs: Rational) {
        assert_eq!(coeffs.len(), self.num_vars);
        self.rows.push((coeffs, rel, rhs));
    }
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub value: Rational,
    pub primal: Vec<Rational>,
    /// One dual multiplier per row, in the row order of the input program.
    pub duals: Vec<Rational>,
}

#[derive(Debug, Clone)]
pub enum LpOutcome {
    Optimal(LpSolution),
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, thiserror::Error)]
pub enum LpError {
    #[error("lp certificate check failed: {0}")]
    Certificate(String),
}

struct Tableau {
    cols: usize,
    rows: Vec<Vec<Rational>>, // each row has cols + 1 entries (rhs last)
    obj: Vec<Rational>,       // obj[j] = z_j - c_j; obj[cols] = objective value
    basis: Vec<usize>,
    banned: Vec<bool>,
}

impl Tableau {
    fn pivot(&mut self, row: usize, col: usize) {
        let piv = self.rows[row][col].clone();
        debug_assert!(!piv.is_zero());
        for x in self.rows[row].iter_mut() {
            *x /= &piv;
        }
        let pivot_row = self.rows[row].clone();
        for (r, data) in self.rows.iter_mut().enumerate() {
            if r == row {
                continue;
            }
            let factor = data[col].clone();
            if factor.is_zero() {
                continue;
            }
            for (x, p) in data.iter_mut().zip(&pivot_row) {
                *x -= &factor * p;
            }
        }
        let factor = self.obj[col].clone();
        if !factor.is_zero() {
            for (x, p) in self.obj.iter_mut().zip(&pivot_row) {
                *x -= &factor * p;
            }
        }
        self.basis[row] = col;
    }

    /// Prices the objective row out over the current basis.
    fn reset_objective(&mut self, costs: &[Rational]) {
        self.obj = vec![Rational::zero(); self.cols + 1];
        for (j, c) in costs.iter().enumerate() {
            self.obj[j] = -c.clone();
        }
        for (r, &b) in self.basis.iter().enumerate() {
            let factor = self.obj[b].clone();
            if factor.is_zero() {
                continue;
            }
            let row = self.rows[r].clone();
            for (x, p) in self.obj.iter_mut().zip(&row) {
                *x -= &factor * p;
            }
        }
    }

    /// Runs simplex to optimality with Bland's rule. Returns false when the
    /// objective is unbounded.
    fn optimize(&mut self) -> bool {
        loop {
            // Entering: smallest index with negative reduced entry.
            let mut entering = None;
            for j in 0..self.cols {
                if !self.banned[j] && self.obj[j].is_negative() {
                    entering = Some(j);
                    break;
                }
            }
            let Some(col) = entering else {
                return true;
            };
            // Leaving: minimum ratio, ties by smallest basic variable index.
            let mut leave: Option<(usize, Rational)> = None;
            for r in 0..self.rows.len() {
                let a = &self.rows[r][col];
                if !a.is_positive() {
                    continue;
                }
                let ratio = &self.rows[r][self.cols] / a;
                match &leave {
                    None => leave = Some((r, ratio)),
                    Some((best_r, best)) => {
                        if ratio < *best
                            || (ratio == *best && self.basis[r] < self.basis[*best_r])
                        {
                            leave = Some((r, ratio));
                        }
                    }
                }
            }
            match leave {
                None => return false,
                Some((row, _)) => self.pivot(row, col),
            }
        }
    }
}

/// Solves the program exactly, verifying the optimality certificates of any
/// optimal outcome before returning it.
pub fn lp_solve(lp: &LinearProgram) -> Result<LpOutcome, LpError> {
    let outcome = solve_inner(lp);
    if let LpOutcome::Optimal(sol) = &outcome {
        verify_certificates(lp, sol)?;
    }
    Ok(outcome)
}

fn solve_inner(lp: &LinearProgram) -> LpOutcome {
    let n = lp.num_vars;
    let m = lp.rows.len();

    // Normalize to non-negative right-hand sides, remembering flips.
    let mut rows: Vec<(Vec<Rational>, Relation, Rational)> = Vec::with_capacity(m);
    let mut flipped = vec![false; m];
    for (i, (coeffs, rel, rhs)) in lp.rows.iter().enumerate() {
        if rhs.is_negative() {
            flipped[i] = true;
            let c: Vec<Rational> = coeffs.iter().map(|x| -x.clone()).collect();
            let r = match rel {
                Relation::Le => Relation::Ge,
                Relation::Eq => Relation::Eq,
                Relation::Ge => Relation::Le,
            };
            rows.push((c, r, -rhs.clone()));
        } else {
            rows.push((coeffs.clone(), *rel, rhs.clone()));
        }
    }

    // Column layout: structural, then slack/surplus, then artificials.
    let mut n_slack = 0;
    for (_, rel, _) in &rows {
        if !matches!(rel, Relation::Eq) {
            n_slack += 1;
        }
    }
    let mut n_art = 0;
    for (_, rel, _) in &rows {
        if !matches!(rel, Relation::Le) {
            n_art += 1;
        }
    }
    let cols = n + n_slack + n_art;

    let mut t = Tableau {
        cols,
        rows: Vec::with_capacity(m),
        obj: vec![Rational::zero(); cols + 1],
        basis: vec![0; m],
        banned: vec![false; cols],
    };

    let mut slack_col = vec![usize::MAX; m];
    let mut art_col = vec![usize::MAX; m];
    let mut next_slack = n;
    let mut next_art = n + n_slack;
    for (i, (coeffs, rel, rhs)) in rows.iter().enumerate() {
        let mut data = vec![Rational::zero(); cols + 1];
        data[..n].clone_from_slice(coeffs);
        data[cols] = rhs.clone();
        match rel {
            Relation::Le => {
                data[next_slack] = Rational::from_integer(1.into());
                slack_col[i] = next_slack;
                t.basis[i] = next_slack;
                next_slack += 1;
            }
            Relation::Ge => {
                data[next_slack] = Rational::from_integer((-1).into());
                slack_col[i] = next_slack;
                next_slack += 1;
                data[next_art] = Rational::from_integer(1.into());
                art_col[i] = next_art;
                t.basis[i] = next_art;
                next_art += 1;
            }
            Relation::Eq => {
                data[next_art] = Rational::from_integer(1.into());
                art_col[i] = next_art;
                t.basis[i] = next_art;
                next_art += 1;
            }
        }
        t.rows.push(data);
    }

    // Phase 1: maximize minus the sum of artificials.
    if n_art > 0 {
        let mut costs = vec![Rational::zero(); cols];
        for &a in art_col.iter().filter(|&&a| a != usize::MAX) {
            costs[a] = -Rational::from_integer(1.into());
        }
        t.reset_objective(&costs);
        let bounded = t.optimize();
        debug_assert!(bounded);
        if t.obj[cols].is_negative() {
            return LpOutcome::Infeasible;
        }
        // Remove artificials from the basis where possible; rows that keep a
        // basic artificial at level zero are redundant and stay inert.
        for r in 0..m {
            let b = t.basis[r];
            if b >= n + n_slack {
                let col = (0..n + n_slack).find(|&j| !t.rows[r][j].is_zero());
                if let Some(col) = col {
                    t.pivot(r, col);
                }
            }
        }
        for j in n + n_slack..cols {
            t.banned[j] = true;
        }
    }

    // Phase 2: the real objective.
    let mut costs = vec![Rational::zero(); cols];
    costs[..n].clone_from_slice(&lp.objective);
    t.reset_objective(&costs);
    if !t.optimize() {
        return LpOutcome::Unbounded;
    }

    let mut primal = vec![Rational::zero(); n];
    for (r, &b) in t.basis.iter().enumerate() {
        if b < n {
            primal[b] = t.rows[r][cols].clone();
        }
    }
    // Duals sit in the objective row under each row's initial identity
    // column (slack for <=, artificial otherwise); row flips negate them.
    let mut duals = Vec::with_capacity(m);
    for i in 0..m {
        let col = match rows[i].1 {
            Relation::Le => slack_col[i],
            _ => art_col[i],
        };
        let mut y = t.obj[col].clone();
        if flipped[i] {
            y = -y;
        }
        duals.push(y);
    }
    LpOutcome::Optimal(LpSolution {
        value: t.obj[cols].clone(),
        primal,
        duals,
    })
}

/// Exact primal/dual feasibility, complementary slackness and strong duality.
pub fn verify_certificates(lp: &LinearProgram, sol: &LpSolution) -> Result<(), LpError> {
    let fail = |msg: String| Err(LpError::Certificate(msg));
    if sol.primal.len() != lp.num_vars || sol.duals.len() != lp.rows.len() {
        return fail("solution dimensions".into());
    }
    for (j, x) in sol.primal.iter().enumerate() {
        if x.is_negative() {
            return fail(format!("primal x[{j}] < 0"));
        }
    }
    for (i, (coeffs, rel, rhs)) in lp.rows.iter().enumerate() {
        let act: Rational = coeffs.iter().zip(&sol.primal).map(|(a, x)| a * x).sum();
        let ok = match rel {
            Relation::Le => act <= *rhs,
            Relation::Eq => act == *rhs,
            Relation::Ge => act >= *rhs,
        };
        if !ok {
            return fail(format!("primal row {i} violated"));
        }
        let y = &sol.duals[i];
        let sign_ok = match rel {
            Relation::Le => !y.is_negative(),
            Relation::Eq => true,
            Relation::Ge => !y.is_positive(),
        };
        if !sign_ok {
            return fail(format!("dual sign on row {i}"));
        }
        if !y.is_zero() && act != *rhs {
            return fail(format!("complementary slackness on row {i}"));
        }
    }
    for j in 0..lp.num_vars {
        let mut reduced = lp.objective[j].clone();
        for (i, (coeffs, _, _)) in lp.rows.iter().enumerate() {
            reduced -= &sol.duals[i] * &coeffs[j];
        }
        if reduced.is_positive() {
            return fail(format!("dual feasibility on column {j}"));
        }
        if !sol.primal[j].is_zero() && !reduced.is_zero() {
            return fail(format!("complementary slackness on column {j}"));
        }
    }
    let primal_value: Rational = lp
        .objective
        .iter()
        .zip(&sol.primal)
        .map(|(c, x)| c * x)
        .sum();
    if primal_value != sol.value {
        return fail("stored objective value".into());
    }
    let dual_value: Rational = lp
        .rows
        .iter()
        .zip(&sol.duals)
        .map(|((_, _, rhs), y)| rhs * y)
        .sum();
    if dual_value != sol.value {
        return fail("strong duality".into());
    }
    Ok(())
}
