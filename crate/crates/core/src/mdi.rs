//! Multilevel dimension iteration: a tensor-grid sum is evaluated by
//! symbolically summing out coordinates one level at a time, then summing
//! the remaining low-dimensional function directly.

use crate::expr::{BudgetExceeded, Expr, ExprStore, Tape};
use crate::par::det_block_sum;
use crate::transform::{improved_rule, AxisGridSet, ImprovedRule, NodeMap, TransformError};
use num_bigint::BigUint;
use std::time::Instant;

/// Default node budget for intermediate expressions.
pub const DEFAULT_BUDGET: usize = 200_000;
/// Default cap on the number of grid points a direct sweep may visit.
pub const DEFAULT_CAP: u128 = 100_000_000;

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum MdiError {
    #[error("dimension-reduction step m = {0} must be 1, 2 or 3")]
    Step(usize),
    #[error("expression budget must be positive")]
    Budget,
    #[error("direct sum over {points} grid points exceeds the cap of {cap}")]
    Infeasible { points: BigUint, cap: u128 },
    #[error("integrand uses x[{var}] but the grid has {dim} axes")]
    Dimension { var: u32, dim: usize },
    #[error("symbolic reduction failed and fallback is disabled: {0}")]
    NoFallback(BudgetExceeded),
    #[error(transparent)]
    Transform(#[from] TransformError),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum IterationOrder {
    /// Sum out the highest-index coordinate first.
    #[default]
    Forward,
    /// Sum out `y_1` first.
    Reverse,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MdiConfig {
    /// Coordinates removed per level.
    pub m: usize,
    /// Node budget for intermediate expressions.
    pub budget: usize,
    pub order: IterationOrder,
    /// Sum numerically over the whole grid when the budget is exceeded.
    pub fallback: bool,
    /// Largest grid a direct sweep may visit.
    pub cap: u128,
}

impl Default for MdiConfig {
    fn default() -> Self {
        MdiConfig {
            m: 1,
            budget: DEFAULT_BUDGET,
            order: IterationOrder::Forward,
            fallback: true,
            cap: DEFAULT_CAP,
        }
    }
}

impl MdiConfig {
    fn validate(&self) -> Result<(), MdiError> {
        if !(1..=3).contains(&self.m) {
            return Err(MdiError::Step(self.m));
        }
        if self.budget == 0 {
            return Err(MdiError::Budget);
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MdiReport {
    /// Unnormalized sum over the grid.
    pub value: f64,
    /// Symbolic levels completed.
    pub levels: usize,
    /// Node count of the expression after each level.
    pub level_nodes: Vec<usize>,
    pub level_seconds: Vec<f64>,
    pub fallback: bool,
    pub seconds: f64,
}

/// Number of symbolic levels for dimension `d` and step `m`.
pub fn level_count(d: usize, m: usize) -> usize {
    if d > 3 {
        (d - 3).div_ceil(m)
    } else {
        0
    }
}

fn check_vars(store: &ExprStore, g: Expr, dim: usize) -> Result<(), MdiError> {
    if let Some(&var) = store.free_vars(g).last() {
        if var as usize > dim {
            return Err(MdiError::Dimension { var, dim });
        }
    }
    Ok(())
}

/// Sum of a compiled expression over the product of the given axes.
/// `axes` pairs a 0-based coordinate with its nodes; other coordinates are
/// held at zero and must not occur in the tape.
fn tensor_sum(tape: &Tape, dim: usize, axes: &[(usize, &[f64])]) -> f64 {
    let dim = dim.max(tape.dim());
    let Some((&(inner_var, inner), outer)) = axes.split_last() else {
        return tape.eval(&vec![0.0; dim]);
    };
    let outer_count: u64 = outer.iter().map(|(_, a)| a.len() as u64).product();
    if inner.is_empty() || outer_count == 0 {
        return 0.0;
    }
    // Fixed block shape: about 2^14 evaluations per block.
    let size = (16_384 / inner.len() as u64).max(1);
    det_block_sum(outer_count, size, |lo, hi| {
        let mut x = vec![0.0; dim];
        let mut reg = tape.scratch();
        let mut acc = 0.0;
        for idx in lo..hi {
            let mut r = idx;
            for &(v, nodes) in outer.iter().rev() {
                let len = nodes.len() as u64;
                x[v] = nodes[(r % len) as usize];
                r /= len;
            }
            for &t in inner {
                x[inner_var] = t;
                acc += tape.eval_with(&x, &mut reg);
            }
        }
        acc
    })
}

/// Plain sum of `g` over every grid node.
pub fn direct_tensor_sum(
    store: &ExprStore,
    g: Expr,
    grids: &AxisGridSet,
    cap: u128,
) -> Result<f64, MdiError> {
    check_vars(store, g, grids.dim())?;
    match grids.total() {
        Some(t) if t <= cap => {}
        _ => return Err(MdiError::Infeasible { points: grids.total_big(), cap }),
    }
    let tape = store.compile(g);
    let axes: Vec<(usize, &[f64])> = grids.axes().iter().enumerate().map(|(i, a)| (i, &a[..])).collect();
    Ok(tensor_sum(&tape, grids.dim(), &axes))
}

/// Grid sum of `g` by multilevel dimension iteration.
pub fn mdi_sum(
    store: &mut ExprStore,
    g: Expr,
    grids: &AxisGridSet,
    cfg: &MdiConfig,
) -> Result<MdiReport, MdiError> {
    cfg.validate()?;
    let d = grids.dim();
    check_vars(store, g, d)?;
    let start = Instant::now();
    let order: Vec<usize> = match cfg.order {
        IterationOrder::Forward => (0..d).rev().collect(),
        IterationOrder::Reverse => (0..d).collect(),
    };
    let levels = level_count(d, cfg.m);
    let mut h = g;
    let mut level_nodes = Vec::with_capacity(levels);
    let mut level_seconds = Vec::with_capacity(levels);
    for level in 0..levels {
        let t = Instant::now();
        for &axis in &order[level * cfg.m..(level + 1) * cfg.m] {
            match store.partial_sum(h, axis as u32 + 1, grids.axis(axis), cfg.budget) {
                Ok(next) => h = next,
                Err(e) if cfg.fallback => {
                    log::info!("symbolic level {} stopped: {e}; summing directly", level + 1);
                    let value = direct_tensor_sum(store, g, grids, cfg.cap)?;
                    return Ok(MdiReport {
                        value,
                        levels: level,
                        level_nodes,
                        level_seconds,
                        fallback: true,
                        seconds: start.elapsed().as_secs_f64(),
                    });
                }
                Err(e) => return Err(MdiError::NoFallback(e)),
            }
        }
        level_nodes.push(store.node_count(h));
        level_seconds.push(t.elapsed().as_secs_f64());
    }
    let rest: Vec<usize> = {
        let mut r = order[levels * cfg.m..].to_vec();
        r.sort_unstable();
        r
    };
    let base: u128 = rest.iter().map(|&i| grids.axis(i).len() as u128).product();
    if base > cfg.cap {
        let points = rest.iter().map(|&i| BigUint::from(grids.axis(i).len())).product();
        return Err(MdiError::Infeasible { points, cap: cfg.cap });
    }
    let tape = store.compile(h);
    let axes: Vec<(usize, &[f64])> = rest.iter().map(|&i| (i, grids.axis(i))).collect();
    let value = tensor_sum(&tape, d, &axes);
    Ok(MdiReport {
        value,
        levels,
        level_nodes,
        level_seconds,
        fallback: false,
        seconds: start.elapsed().as_secs_f64(),
    })
}

#[derive(Clone, Debug)]
pub struct MdiLrResult {
    /// Equal-weight average over the completed grid.
    pub value: f64,
    pub report: MdiReport,
    pub rule: ImprovedRule,
}

/// Improved lattice rule for the Korobov vector with parameter `a` and `n`
/// points, evaluated by [`mdi_sum`].
pub fn mdi_lr(
    store: &mut ExprStore,
    f: Expr,
    d: usize,
    a: u64,
    n: &BigUint,
    map: NodeMap,
    cfg: &MdiConfig,
) -> Result<MdiLrResult, MdiError> {
    check_vars(store, f, d)?;
    let rule = improved_rule(store, f, d, a, n, map)?;
    let report = mdi_sum(store, rule.g, &rule.grids, cfg)?;
    let weight: f64 = rule.grids.counts().iter().map(|&c| c as f64).product();
    // An equal-weight rule integrates constants exactly; n c / n may not round back to c.
    let value = store.as_const(rule.g).unwrap_or(report.value / weight);
    Ok(MdiLrResult { value, report, rule })
}
