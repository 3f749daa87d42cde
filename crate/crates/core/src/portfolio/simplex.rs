//! Dense tableau simplex with bounded variables.
//!
//! Maximizes `c'x` subject to row constraints and `0 ≤ x_j ≤ ub_j`. Upper
//! bounds live on the variables, so the tableau only has one row per
//! constraint. Two phases; Dantzig pricing that falls back to Bland's rule
//! after a run of degenerate pivots.

use crate::error::{Error, Result};

const EPS: f64 = 1e-10;
const DEGENERATE_RUN: usize = 30;
const MAX_PIVOTS: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone)]
pub struct Constraint {
    pub coefs: Vec<f64>,
    pub relation: Relation,
    pub rhs: f64,
}

#[derive(Debug, Clone)]
pub struct LinearProgram {
    pub objective: Vec<f64>,
    pub upper: Vec<f64>,
    pub constraints: Vec<Constraint>,
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub x: Vec<f64>,
    pub objective: f64,
    pub pivots: usize,
}

struct Tableau {
    /// `m × n` rows of `B⁻¹A`, then `B⁻¹b` in the last column.
    t: Vec<Vec<f64>>,
    basis: Vec<usize>,
    at_upper: Vec<bool>,
    upper: Vec<f64>,
    n: usize,
    pivots: usize,
}

impl Tableau {
    fn rhs(&self, i: usize) -> f64 {
        self.t[i][self.n]
    }

    /// Value of each basic variable given the nonbasic bound states.
    fn basic_values(&self) -> Vec<f64> {
        let flipped: Vec<usize> = (0..self.n).filter(|&j| self.at_upper[j]).collect();
        (0..self.t.len())
            .map(|i| self.rhs(i) - flipped.iter().map(|&j| self.t[i][j] * self.upper[j]).sum::<f64>())
            .collect()
    }

    fn values(&self) -> Vec<f64> {
        let mut x: Vec<f64> = (0..self.n).map(|j| if self.at_upper[j] { self.upper[j] } else { 0.0 }).collect();
        for (i, v) in self.basic_values().into_iter().enumerate() {
            x[self.basis[i]] = v;
        }
        x
    }

    fn pivot(&mut self, r: usize, col: usize) {
        let p = self.t[r][col];
        for v in self.t[r].iter_mut() {
            *v /= p;
        }
        let row = self.t[r].clone();
        for (i, other) in self.t.iter_mut().enumerate() {
            if i == r {
                continue;
            }
            let f = other[col];
            if f != 0.0 {
                for (a, b) in other.iter_mut().zip(&row) {
                    *a -= f * b;
                }
            }
        }
        self.basis[r] = col;
        self.at_upper[col] = false;
        self.pivots += 1;
    }

    /// Runs simplex iterations for `cost` over the columns allowed to enter.
    fn optimize(&mut self, cost: &[f64], allowed: &dyn Fn(usize) -> bool) -> Result<()> {
        let m = self.t.len();
        let mut degenerate = 0;
        loop {
            if self.pivots > MAX_PIVOTS {
                return Err(Error::validation("simplex pivot limit reached"));
            }
            let mut is_basic = vec![false; self.n];
            for &b in &self.basis {
                is_basic[b] = true;
            }
            let reduced = |j: usize| cost[j] - (0..m).map(|i| cost[self.basis[i]] * self.t[i][j]).sum::<f64>();
            let bland = degenerate >= DEGENERATE_RUN;
            let mut entering: Option<(usize, f64)> = None;
            for j in (0..self.n).filter(|&j| !is_basic[j] && allowed(j) && self.upper[j] > 0.0) {
                let d = reduced(j);
                let improving = if self.at_upper[j] { d < -EPS } else { d > EPS };
                if !improving {
                    continue;
                }
                if bland {
                    entering = Some((j, d));
                    break;
                }
                if entering.map_or(true, |(_, best)| d.abs() > best.abs()) {
                    entering = Some((j, d));
                }
            }
            let Some((j, _)) = entering else { return Ok(()) };

            // Moving x_j by θ in direction s changes basic i by −s·θ·t_ij.
            let s = if self.at_upper[j] { -1.0 } else { 1.0 };
            let beta = self.basic_values();
            let mut theta = self.upper[j];
            let mut leave: Option<(usize, bool)> = None;
            for i in 0..m {
                let a = s * self.t[i][j];
                let ub = self.upper[self.basis[i]];
                let (limit, to_upper) = if a > EPS {
                    (beta[i].max(0.0) / a, false)
                } else if a < -EPS && ub.is_finite() {
                    ((ub - beta[i]).max(0.0) / -a, true)
                } else {
                    continue;
                };
                let take = limit < theta - EPS
                    || (bland && limit <= theta + EPS && leave.is_some_and(|(r, _)| self.basis[i] < self.basis[r]));
                if take {
                    theta = limit;
                    leave = Some((i, to_upper));
                }
            }
            if theta.is_infinite() {
                return Err(Error::Unbounded);
            }
            degenerate = if theta <= EPS { degenerate + 1 } else { 0 };
            match leave {
                None => {
                    self.at_upper[j] = !self.at_upper[j];
                }
                Some((r, to_upper)) => {
                    let leaving = self.basis[r];
                    self.pivot(r, j);
                    self.at_upper[leaving] = to_upper;
                }
            }
        }
    }
}

impl LinearProgram {
    pub fn solve(&self) -> Result<Solution> {
        let nv = self.objective.len();
        let m = self.constraints.len();
        if self.upper.len() != nv || self.constraints.iter().any(|c| c.coefs.len() != nv) {
            return Err(Error::validation("linear program dimensions disagree"));
        }
        // Columns: structural, one slack per inequality, one artificial per row.
        let n_slack = self.constraints.iter().filter(|c| c.relation != Relation::Eq).count();
        let n = nv + n_slack + m;
        let mut t = vec![vec![0.0; n + 1]; m];
        let mut upper = self.upper.clone();
        upper.extend(std::iter::repeat(f64::INFINITY).take(n_slack + m));
        let mut slack = nv;
        for (i, c) in self.constraints.iter().enumerate() {
            let sign = if c.rhs < 0.0 { -1.0 } else { 1.0 };
            for j in 0..nv {
                t[i][j] = sign * c.coefs[j];
            }
            match c.relation {
                Relation::Le => {
                    t[i][slack] = sign;
                    slack += 1;
                }
                Relation::Ge => {
                    t[i][slack] = -sign;
                    slack += 1;
                }
                Relation::Eq => {}
            }
            t[i][nv + n_slack + i] = 1.0;
            t[i][n] = sign * c.rhs;
        }
        let art0 = nv + n_slack;
        let mut tab = Tableau {
            t,
            basis: (art0..n).collect(),
            at_upper: vec![false; n],
            upper,
            n,
            pivots: 0,
        };

        let phase1: Vec<f64> = (0..n).map(|j| if j >= art0 { -1.0 } else { 0.0 }).collect();
        tab.optimize(&phase1, &|_| true)?;
        let x = tab.values();
        let infeas: f64 = x[art0..].iter().sum();
        let scale = 1.0 + self.constraints.iter().map(|c| c.rhs.abs()).fold(0.0, f64::max);
        if infeas > 1e-9 * scale {
            return Err(Error::Infeasible);
        }
        // Drive zero-valued artificials out of the basis where possible.
        for r in 0..m {
            if tab.basis[r] >= art0 {
                if let Some(j) = (0..art0).find(|&j| !tab.basis.contains(&j) && tab.t[r][j].abs() > 1e-9) {
                    if !tab.at_upper[j] {
                        tab.pivot(r, j);
                    }
                }
            }
        }
        for j in art0..n {
            tab.upper[j] = 0.0;
        }

        let mut cost = self.objective.clone();
        cost.resize(n, 0.0);
        tab.optimize(&cost, &|j| j < art0)?;
        let x = tab.values();
        let x: Vec<f64> = x[..nv].iter().zip(&self.upper).map(|(v, u)| v.clamp(0.0, *u)).collect();
        let objective = x.iter().zip(&self.objective).map(|(a, b)| a * b).sum();
        Ok(Solution { x, objective, pivots: tab.pivots })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(coefs: &[f64], relation: Relation, rhs: f64) -> Constraint {
        Constraint { coefs: coefs.to_vec(), relation, rhs }
    }

    #[test]
    fn textbook_problem() {
        // max 3x + 5y, x ≤ 4, 2y ≤ 12, 3x + 2y ≤ 18 → (2, 6), 36.
        let lp = LinearProgram {
            objective: vec![3.0, 5.0],
            upper: vec![f64::INFINITY; 2],
            constraints: vec![
                row(&[1.0, 0.0], Relation::Le, 4.0),
                row(&[0.0, 2.0], Relation::Le, 12.0),
                row(&[3.0, 2.0], Relation::Le, 18.0),
            ],
        };
        let s = lp.solve().unwrap();
        assert!((s.objective - 36.0).abs() < 1e-9);
        assert!((s.x[0] - 2.0).abs() < 1e-9 && (s.x[1] - 6.0).abs() < 1e-9);
    }

    #[test]
    fn variable_bounds_act_as_constraints() {
        let lp = LinearProgram {
            objective: vec![3.0, 5.0],
            upper: vec![4.0, 6.0],
            constraints: vec![row(&[3.0, 2.0], Relation::Le, 18.0)],
        };
        let s = lp.solve().unwrap();
        assert!((s.objective - 36.0).abs() < 1e-9);
    }

    #[test]
    fn equality_and_ge_rows() {
        // min x + y (as max −x − y), x + y ≥ 2, x − y = 1 → (1.5, 0.5).
        let lp = LinearProgram {
            objective: vec![-1.0, -1.0],
            upper: vec![f64::INFINITY; 2],
            constraints: vec![row(&[1.0, 1.0], Relation::Ge, 2.0), row(&[1.0, -1.0], Relation::Eq, 1.0)],
        };
        let s = lp.solve().unwrap();
        assert!((s.x[0] - 1.5).abs() < 1e-9 && (s.x[1] - 0.5).abs() < 1e-9);
    }

    #[test]
    fn infeasible_and_unbounded() {
        let lp = LinearProgram {
            objective: vec![1.0],
            upper: vec![1.0],
            constraints: vec![row(&[1.0], Relation::Ge, 2.0)],
        };
        assert!(matches!(lp.solve(), Err(Error::Infeasible)));
        let lp = LinearProgram {
            objective: vec![1.0, 0.0],
            upper: vec![f64::INFINITY; 2],
            constraints: vec![row(&[1.0, -1.0], Relation::Le, 1.0)],
        };
        assert!(matches!(lp.solve(), Err(Error::Unbounded)));
    }

    #[test]
    fn negative_rhs_rows() {
        // max x, x − y ≤ −1, y ≤ 3 → x = 2.
        let lp = LinearProgram {
            objective: vec![1.0, 0.0],
            upper: vec![f64::INFINITY, 3.0],
            constraints: vec![row(&[1.0, -1.0], Relation::Le, -1.0)],
        };
        assert!((lp.solve().unwrap().objective - 2.0).abs() < 1e-9);
    }

    #[test]
    fn degenerate_cycling_example() {
        // Beale's example cycles under naive pricing; optimum 1/20.
        let lp = LinearProgram {
            objective: vec![0.75, -150.0, 0.02, -6.0],
            upper: vec![f64::INFINITY; 4],
            constraints: vec![
                row(&[0.25, -60.0, -0.04, 9.0], Relation::Le, 0.0),
                row(&[0.5, -90.0, -0.02, 3.0], Relation::Le, 0.0),
                row(&[0.0, 0.0, 1.0, 0.0], Relation::Le, 1.0),
            ],
        };
        assert!((lp.solve().unwrap().objective - 0.05).abs() < 1e-9);
    }
}
