//! Dense two-phase tableau simplex for small bounded linear programs.
//!
//! Problems here have a handful of structural variables and a few dozen rows,
//! so the solver favours simplicity: rows are equilibrated, entering and
//! leaving variables follow Bland's rule (no cycling), and artificial
//! variables are driven out of the basis between phases.

use std::fmt;

const PIVOT_TOL: f64 = 1e-11;
const COST_TOL: f64 = 1e-11;
const FEAS_TOL: f64 = 1e-8;
const MAX_PIVOTS: usize = 50_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpError {
    Infeasible,
    Unbounded,
    PivotLimit,
}

impl fmt::Display for LpError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LpError::Infeasible => write!(f, "linear program is infeasible"),
            LpError::Unbounded => write!(f, "linear program is unbounded"),
            LpError::PivotLimit => write!(f, "simplex pivot limit reached"),
        }
    }
}

impl std::error::Error for LpError {}

#[derive(Debug, Clone)]
struct Row {
    coeffs: Vec<f64>,
    relation: Relation,
    rhs: f64,
}

/// `min c^T x` subject to linear rows and `lower <= x <= upper` (finite lower bounds).
#[derive(Debug, Clone)]
pub struct LinearProgram {
    objective: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    rows: Vec<Row>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
}

impl LinearProgram {
    /// `n_vars` variables with bounds `[0, +inf)` and a zero objective.
    pub fn new(n_vars: usize) -> Self {
        LinearProgram {
            objective: vec![0.0; n_vars],
            lower: vec![0.0; n_vars],
            upper: vec![f64::INFINITY; n_vars],
            rows: Vec::new(),
        }
    }

    pub fn n_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn set_objective(&mut self, objective: Vec<f64>) {
        assert_eq!(objective.len(), self.n_vars());
        self.objective = objective;
    }

    pub fn set_bounds(&mut self, var: usize, lower: f64, upper: f64) {
        assert!(lower.is_finite(), "lower bounds must be finite");
        self.lower[var] = lower;
        self.upper[var] = upper;
    }

    pub fn add_constraint(&mut self, coeffs: Vec<f64>, relation: Relation, rhs: f64) {
        assert_eq!(coeffs.len(), self.n_vars());
        self.rows.push(Row {
            coeffs,
            relation,
            rhs,
        });
    }

    pub fn solve(&self) -> Result<LpSolution, LpError> {
        let n = self.n_vars();
        // Shift to y = x - lower >= 0 and turn finite upper bounds into rows.
        let mut rows: Vec<Row> = Vec::with_capacity(self.rows.len() + n);
        for row in &self.rows {
            let shift: f64 = row.coeffs.iter().zip(&self.lower).map(|(a, l)| a * l).sum();
            rows.push(Row {
                coeffs: row.coeffs.clone(),
                relation: row.relation,
                rhs: row.rhs - shift,
            });
        }
        for k in 0..n {
            if self.upper[k].is_finite() {
                let width = self.upper[k] - self.lower[k];
                if width < -FEAS_TOL {
                    return Err(LpError::Infeasible);
                }
                let mut coeffs = vec![0.0; n];
                coeffs[k] = 1.0;
                rows.push(Row {
                    coeffs,
                    relation: Relation::Le,
                    rhs: width.max(0.0),
                });
            }
        }
        // Equilibrate rows, drop empty ones, make right-hand sides nonnegative.
        let mut kept = Vec::with_capacity(rows.len());
        for mut row in rows {
            let scale = row.coeffs.iter().fold(0.0f64, |m, a| m.max(a.abs()));
            if scale == 0.0 {
                let ok = match row.relation {
                    Relation::Le => row.rhs >= -FEAS_TOL,
                    Relation::Ge => row.rhs <= FEAS_TOL,
                    Relation::Eq => row.rhs.abs() <= FEAS_TOL,
                };
                if !ok {
                    return Err(LpError::Infeasible);
                }
                continue;
            }
            row.coeffs.iter_mut().for_each(|a| *a /= scale);
            row.rhs /= scale;
            if row.rhs < 0.0 {
                row.coeffs.iter_mut().for_each(|a| *a = -*a);
                row.rhs = -row.rhs;
                row.relation = match row.relation {
                    Relation::Le => Relation::Ge,
                    Relation::Ge => Relation::Le,
                    Relation::Eq => Relation::Eq,
                };
            }
            kept.push(row);
        }

        let mut tableau = Tableau::build(n, &kept);
        tableau.phase_one()?;
        let cost: Vec<f64> = (0..tableau.n_cols)
            .map(|j| if j < n { self.objective[j] } else { 0.0 })
            .collect();
        tableau.optimize(&cost, tableau.first_artificial)?;

        let mut y = vec![0.0; n];
        for (r, &b) in tableau.basis.iter().enumerate() {
            if b < n {
                y[b] = tableau.rhs(r).max(0.0);
            }
        }
        let x: Vec<f64> = y
            .iter()
            .zip(&self.lower)
            .zip(&self.upper)
            .map(|((y, l), u)| (l + y).min(*u))
            .collect();
        let objective = x.iter().zip(&self.objective).map(|(a, b)| a * b).sum();
        Ok(LpSolution { x, objective })
    }
}

struct Tableau {
    /// `rows x (n_cols + 1)`, last column is the right-hand side.
    data: Vec<Vec<f64>>,
    basis: Vec<usize>,
    n_cols: usize,
    first_artificial: usize,
}

impl Tableau {
    fn build(n: usize, rows: &[Row]) -> Self {
        let n_slack = rows.iter().filter(|r| r.relation != Relation::Eq).count();
        let n_art = rows.iter().filter(|r| r.relation != Relation::Le).count();
        let first_artificial = n + n_slack;
        let n_cols = first_artificial + n_art;
        let mut data = Vec::with_capacity(rows.len());
        let mut basis = Vec::with_capacity(rows.len());
        let mut slack = n;
        let mut art = first_artificial;
        for row in rows {
            let mut line = vec![0.0; n_cols + 1];
            line[..n].copy_from_slice(&row.coeffs);
            line[n_cols] = row.rhs;
            match row.relation {
                Relation::Le => {
                    line[slack] = 1.0;
                    basis.push(slack);
                    slack += 1;
                }
                Relation::Ge => {
                    line[slack] = -1.0;
                    slack += 1;
                    line[art] = 1.0;
                    basis.push(art);
                    art += 1;
                }
                Relation::Eq => {
                    line[art] = 1.0;
                    basis.push(art);
                    art += 1;
                }
            }
            data.push(line);
        }
        Tableau {
            data,
            basis,
            n_cols,
            first_artificial,
        }
    }

    fn rhs(&self, r: usize) -> f64 {
        self.data[r][self.n_cols]
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let p = self.data[r][c];
        self.data[r].iter_mut().for_each(|v| *v /= p);
        let pivot_row = self.data[r].clone();
        for (i, line) in self.data.iter_mut().enumerate() {
            if i == r {
                continue;
            }
            let f = line[c];
            if f != 0.0 {
                for (v, pv) in line.iter_mut().zip(&pivot_row) {
                    *v -= f * pv;
                }
                line[c] = 0.0;
            }
        }
        self.basis[r] = c;
    }

    /// Minimizes `cost` over columns `< allowed`, starting from the current basis.
    fn optimize(&mut self, cost: &[f64], allowed: usize) -> Result<(), LpError> {
        for _ in 0..MAX_PIVOTS {
            let entering = (0..allowed).find(|&j| {
                if self.basis.contains(&j) {
                    return false;
                }
                let reduced = cost[j]
                    - self
                        .data
                        .iter()
                        .zip(&self.basis)
                        .map(|(line, &b)| cost[b] * line[j])
                        .sum::<f64>();
                reduced < -COST_TOL
            });
            let Some(c) = entering else {
                return Ok(());
            };
            let mut leave: Option<(usize, f64)> = None;
            for (r, line) in self.data.iter().enumerate() {
                let a = line[c];
                if a > PIVOT_TOL {
                    let ratio = line[self.n_cols] / a;
                    leave = match leave {
                        None => Some((r, ratio)),
                        Some((best, best_ratio)) => {
                            if ratio < best_ratio - 1e-12
                                || (ratio <= best_ratio + 1e-12 && self.basis[r] < self.basis[best])
                            {
                                Some((r, ratio))
                            } else {
                                Some((best, best_ratio))
                            }
                        }
                    };
                }
            }
            let Some((r, _)) = leave else {
                return Err(LpError::Unbounded);
            };
            self.pivot(r, c);
        }
        Err(LpError::PivotLimit)
    }

    fn phase_one(&mut self) -> Result<(), LpError> {
        if self.first_artificial == self.n_cols {
            return Ok(());
        }
        let cost: Vec<f64> = (0..self.n_cols)
            .map(|j| if j >= self.first_artificial { 1.0 } else { 0.0 })
            .collect();
        self.optimize(&cost, self.n_cols)?;
        let infeasibility: f64 = self
            .basis
            .iter()
            .enumerate()
            .filter(|(_, &b)| b >= self.first_artificial)
            .map(|(r, _)| self.rhs(r))
            .sum();
        if infeasibility > FEAS_TOL {
            return Err(LpError::Infeasible);
        }
        // Drive zero-level artificials out; rows with no other support are redundant.
        let mut r = 0;
        while r < self.data.len() {
            if self.basis[r] >= self.first_artificial {
                let col = (0..self.first_artificial).find(|&j| self.data[r][j].abs() > 1e-9);
                match col {
                    Some(c) => self.pivot(r, c),
                    None => {
                        self.data.remove(r);
                        self.basis.remove(r);
                        continue;
                    }
                }
            }
            r += 1;
        }
        Ok(())
    }
}
