//! Outer-space branch-and-bound for sums of linear ratios.
//!
//! Nodes are boxes over the denominator values `alpha_j = F_j(p)`. On a node
//! the objective `sum_j G_j(p) / alpha_j` is bounded below by an LP in
//! `(p, alpha, t)`: `alpha_j = F_j(p)`, `alpha_j` restricted to the node,
//! `t_j alpha_j = G_j(p)` replaced by its McCormick envelope, and
//! `sum_j t_j` minimized. When the node collapses to a point the envelope is
//! exact, so the bound converges to the objective. Every relaxation solution
//! yields a feasible `p` whose true objective updates the incumbent.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::Serialize;

use super::lp::{LinearProgram, LpError, Relation};
use super::{FractionalProgram, LinearRatio};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct BnbOptions {
    pub epsilon: f64,
    /// Hard cap on branched nodes; reaching it returns an uncertified result.
    pub max_iterations: u64,
    /// Bound each node's numerator ranges by LP before building the envelope.
    pub tighten_numerators: bool,
    /// Shrink each node's denominator box to the part that can still beat the
    /// incumbent before branching.
    pub shrink_nodes: bool,
}

impl BnbOptions {
    pub fn new(epsilon: f64) -> Self {
        BnbOptions {
            epsilon,
            max_iterations: 200_000,
            tighten_numerators: true,
            shrink_nodes: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    /// Incumbent and global lower bound within epsilon.
    GapClosed,
    /// Every node was pruned or found empty.
    NodesExhausted,
    IterationCap,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BnbResult {
    pub p_star: Vec<f64>,
    pub objective: f64,
    pub lower_bound: f64,
    pub gap: f64,
    pub iterations: u64,
    pub nodes_explored: u64,
    pub certified: bool,
    pub termination: Termination,
    /// Global lower bound before each iteration.
    #[serde(skip)]
    pub lower_bound_trace: Vec<f64>,
}

/// Clamps an LP coordinate into `[0, 1]`, absorbing pivoting noise at the faces.
fn snap_to_box(v: f64) -> f64 {
    const SNAP: f64 = 1e-9;
    if v <= SNAP {
        0.0
    } else if v >= 1.0 - SNAP {
        1.0
    } else {
        v
    }
}

/// Lower and upper corners of a denominator box.
type BoxBounds = (Vec<f64>, Vec<f64>);

#[derive(Debug, Clone)]
struct Node {
    lo: Vec<f64>,
    hi: Vec<f64>,
    bound: f64,
    id: u64,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Node {}

impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Node {
    // BinaryHeap is a max-heap: the smallest bound, then the oldest node, ranks highest.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .bound
            .total_cmp(&self.bound)
            .then_with(|| other.id.cmp(&self.id))
    }
}

/// Ratios rescaled so every denominator's box maximum is one. The ratio
/// values are unchanged; the LPs see coefficients of comparable size.
struct Scaled {
    n: usize,
    ratios: Vec<LinearRatio>,
    num_range: Vec<(f64, f64)>,
}

impl Scaled {
    fn new(fp: &FractionalProgram) -> Self {
        let ratios: Vec<LinearRatio> = fp
            .ratios
            .iter()
            .map(|r| {
                let (_, den_hi) = r.denominator_range();
                LinearRatio {
                    g0: r.g0 / den_hi,
                    g: r.g.iter().map(|v| v / den_hi).collect(),
                    f0: r.f0 / den_hi,
                    f: r.f.iter().map(|v| v / den_hi).collect(),
                }
            })
            .collect();
        let num_range = ratios.iter().map(LinearRatio::numerator_range).collect();
        Scaled {
            n: fp.n_vars,
            ratios,
            num_range,
        }
    }

    fn m(&self) -> usize {
        self.ratios.len()
    }

    fn p_var(&self, i: usize) -> usize {
        i
    }

    fn alpha_var(&self, j: usize) -> usize {
        self.n + j
    }

    fn t_var(&self, j: usize) -> usize {
        self.n + self.m() + j
    }

    /// `p` in the unit box, `alpha = F(p)` inside the node.
    fn base_lp(&self, lo: &[f64], hi: &[f64], with_t: bool) -> LinearProgram {
        let n_vars = if with_t {
            self.n + 2 * self.m()
        } else {
            self.n + self.m()
        };
        let mut lp = LinearProgram::new(n_vars);
        for i in 0..self.n {
            lp.set_bounds(self.p_var(i), 0.0, 1.0);
        }
        for (j, r) in self.ratios.iter().enumerate() {
            lp.set_bounds(self.alpha_var(j), lo[j], hi[j]);
            let mut row = vec![0.0; n_vars];
            for i in 0..self.n {
                row[self.p_var(i)] = r.f[i];
            }
            row[self.alpha_var(j)] = -1.0;
            lp.add_constraint(row, Relation::Eq, -r.f0);
        }
        lp
    }

    /// Numerator range over the part of the box that maps into the node.
    fn numerator_range_on(
        &self,
        lo: &[f64],
        hi: &[f64],
        j: usize,
    ) -> std::result::Result<(f64, f64), LpError> {
        let mut lp = self.base_lp(lo, hi, false);
        let mut c = vec![0.0; lp.n_vars()];
        for i in 0..self.n {
            c[self.p_var(i)] = self.ratios[j].g[i];
        }
        lp.set_objective(c.clone());
        let min = lp.solve()?.objective + self.ratios[j].g0;
        lp.set_objective(c.iter().map(|v| -v).collect());
        let max = -lp.solve()?.objective + self.ratios[j].g0;
        let (glo, ghi) = self.num_range[j];
        Ok((min.max(glo), max.min(ghi).max(min)))
    }

    /// LP relaxation over a node.
    fn relaxation(
        &self,
        lo: &[f64],
        hi: &[f64],
        tighten: bool,
        cutoff: Option<f64>,
    ) -> std::result::Result<LinearProgram, LpError> {
        let m = self.m();
        let mut lp = self.base_lp(lo, hi, true);
        let n_vars = lp.n_vars();
        let mut objective = vec![0.0; n_vars];
        for j in 0..m {
            let (glo, ghi) = if tighten {
                self.numerator_range_on(lo, hi, j)?
            } else {
                self.num_range[j]
            };
            let (al, au) = (lo[j], hi[j]);
            let t_lo = glo / au;
            let t_hi = ghi / al;
            let (a, t) = (self.alpha_var(j), self.t_var(j));
            lp.set_bounds(t, t_lo, t_hi);
            objective[t] = 1.0;
            let r = &self.ratios[j];
            // G(p) = g0 + g.p must lie between the under- and over-estimators of t * alpha.
            let envelope = |sign: f64, ta: f64, at: f64| {
                let mut row = vec![0.0; n_vars];
                for i in 0..self.n {
                    row[self.p_var(i)] = -sign * r.g[i];
                }
                row[a] = sign * ta;
                row[t] = sign * at;
                row
            };
            lp.add_constraint(envelope(1.0, t_lo, al), Relation::Le, r.g0 + t_lo * al);
            lp.add_constraint(envelope(1.0, t_hi, au), Relation::Le, r.g0 + t_hi * au);
            lp.add_constraint(envelope(-1.0, t_hi, al), Relation::Le, -r.g0 - t_hi * al);
            lp.add_constraint(envelope(-1.0, t_lo, au), Relation::Le, -r.g0 - t_lo * au);
        }
        if let Some(limit) = cutoff {
            lp.add_constraint(objective.clone(), Relation::Le, limit);
        }
        lp.set_objective(objective);
        Ok(lp)
    }

    /// Tightens the node to the denominators reachable with objective below
    /// `cutoff`. `Ok(None)` when no such point exists.
    fn shrink(
        &self,
        lo: &[f64],
        hi: &[f64],
        tighten: bool,
        cutoff: f64,
    ) -> std::result::Result<Option<BoxBounds>, LpError> {
        let mut lp = match self.relaxation(lo, hi, tighten, Some(cutoff)) {
            Ok(lp) => lp,
            Err(LpError::Infeasible) => return Ok(None),
            Err(e) => return Err(e),
        };
        let mut new_lo = lo.to_vec();
        let mut new_hi = hi.to_vec();
        for j in 0..self.m() {
            let mut c = vec![0.0; lp.n_vars()];
            c[self.alpha_var(j)] = 1.0;
            lp.set_objective(c.clone());
            let min = match lp.solve() {
                Ok(sol) => sol.objective,
                Err(LpError::Infeasible) => return Ok(None),
                Err(e) => return Err(e),
            };
            c[self.alpha_var(j)] = -1.0;
            lp.set_objective(c);
            let max = -lp.solve()?.objective;
            new_lo[j] = min.max(lo[j]);
            new_hi[j] = max.min(hi[j]).max(new_lo[j]);
        }
        Ok(Some((new_lo, new_hi)))
    }
}

struct Solved {
    bound: f64,
    p: Vec<f64>,
}

pub fn branch_and_bound(fp: &FractionalProgram, epsilon: f64) -> Result<BnbResult> {
    branch_and_bound_with(fp, &BnbOptions::new(epsilon))
}

pub fn branch_and_bound_with(fp: &FractionalProgram, options: &BnbOptions) -> Result<BnbResult> {
    let epsilon = options.epsilon;
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::InvalidEpsilon(epsilon));
    }
    fp.validate()?;
    let scaled = Scaled::new(fp);
    let n = fp.n_vars;
    let m = scaled.m();

    // Ok(None): the node holds no feasible point. Err: the LP failed numerically.
    let solve_node = |lo: &[f64], hi: &[f64]| -> std::result::Result<Option<Solved>, LpError> {
        let solved = scaled
            .relaxation(lo, hi, options.tighten_numerators, None)
            .and_then(|lp| lp.solve());
        match solved {
            Ok(sol) => Ok(Some(Solved {
                bound: sol.objective,
                p: sol.x[..n].iter().map(|&v| snap_to_box(v)).collect(),
            })),
            Err(LpError::Infeasible) => Ok(None),
            Err(e) => Err(e),
        }
    };

    let mut best_p = vec![1.0; n];
    let mut best = fp.eval(&best_p);
    let offer = |p: Vec<f64>, best: &mut f64, best_p: &mut Vec<f64>| {
        let value = fp.eval(&p);
        if value < *best {
            *best = value;
            *best_p = p;
        }
    };
    offer(vec![0.0; n], &mut best, &mut best_p);

    let root_lo: Vec<f64> = scaled
        .ratios
        .iter()
        .map(|r| r.denominator_range().0)
        .collect();
    let root_hi: Vec<f64> = scaled
        .ratios
        .iter()
        .map(|r| r.denominator_range().1)
        .collect();
    let root_width: Vec<f64> = root_lo.iter().zip(&root_hi).map(|(l, h)| h - l).collect();
    let root = solve_node(&root_lo, &root_hi)
        .ok()
        .flatten()
        .ok_or(Error::InfeasibleBox)?;
    let mut nodes_explored = 1u64;
    offer(root.p, &mut best, &mut best_p);

    let mut heap = BinaryHeap::new();
    let mut next_id = 1u64;
    // Smallest bound among nodes discarded by pruning.
    let mut pruned_floor = f64::INFINITY;
    if root.bound >= best - epsilon {
        pruned_floor = root.bound;
    } else {
        heap.push(Node {
            lo: root_lo,
            hi: root_hi,
            bound: root.bound,
            id: 0,
        });
    }

    let mut iterations = 0u64;
    let mut trace = Vec::new();
    let termination = loop {
        let open = heap.peek().map_or(f64::INFINITY, |node: &Node| node.bound);
        let global = open.min(pruned_floor).min(best);
        trace.push(global);
        if heap.is_empty() {
            break Termination::NodesExhausted;
        }
        if best - global <= epsilon {
            break Termination::GapClosed;
        }
        if iterations >= options.max_iterations {
            break Termination::IterationCap;
        }
        let node = heap.pop().expect("heap checked nonempty");
        iterations += 1;
        if node.bound >= best - epsilon {
            pruned_floor = pruned_floor.min(node.bound);
            continue;
        }

        let (lo, hi) = if options.shrink_nodes {
            nodes_explored += 2 * m as u64;
            match scaled.shrink(
                &node.lo,
                &node.hi,
                options.tighten_numerators,
                best - epsilon,
            ) {
                Ok(Some(bx)) => bx,
                // nothing in the node can improve on the incumbent by epsilon
                Ok(None) => {
                    pruned_floor = pruned_floor.min(best - epsilon);
                    continue;
                }
                Err(_) => (node.lo, node.hi),
            }
        } else {
            (node.lo, node.hi)
        };

        let (axis, rel) = (0..m)
            .map(|j| {
                let w = if root_width[j] > 0.0 {
                    (hi[j] - lo[j]) / root_width[j]
                } else {
                    0.0
                };
                (j, w)
            })
            .fold((0, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
        if rel <= 1e-14 {
            // degenerate point node: its relaxation is already exact
            pruned_floor = pruned_floor.min(node.bound);
            continue;
        }
        let mid = 0.5 * (lo[axis] + hi[axis]);
        let halves = [(lo[axis], mid), (mid, hi[axis])];
        for (a, b) in halves {
            let mut child_lo = lo.clone();
            let mut child_hi = hi.clone();
            child_lo[axis] = a;
            child_hi[axis] = b;
            nodes_explored += 1;
            let bound = match solve_node(&child_lo, &child_hi) {
                Ok(Some(solved)) => {
                    offer(solved.p, &mut best, &mut best_p);
                    solved.bound.max(node.bound)
                }
                Ok(None) => continue,
                // keep the child under its parent's bound and split it further
                Err(_) => node.bound,
            };
            if bound >= best - epsilon {
                pruned_floor = pruned_floor.min(bound);
            } else {
                heap.push(Node {
                    lo: child_lo,
                    hi: child_hi,
                    bound,
                    id: next_id,
                });
                next_id += 1;
            }
        }
    };

    let lower_bound = trace.last().copied().unwrap_or(best).min(best);
    let gap = (best - lower_bound).max(0.0);
    Ok(BnbResult {
        p_star: best_p,
        objective: best,
        lower_bound,
        gap,
        iterations,
        nodes_explored,
        certified: gap <= epsilon,
        termination,
        lower_bound_trace: trace,
    })
}
