//! Reformulation of a rank-one lattice as a tensor-product grid.
//!
//! The forward map sends lattice point `j` to
//! `y_i = |floor(j z_{i+1}/n)/z_{i+1} - floor(j z_i/n)/z_i|` for `i < d` and
//! `y_d = (z_d/n) floor((j z_d mod n)/z_d)`. Axis `i < d` then carries the
//! progression `k / lcm(z_i, z_{i+1})` with `lcm(z_i, z_{i+1}) / min(z_i,
//! z_{i+1})` nodes and the last axis carries `k z_d / n` with `ceil(n/z_d)`
//! nodes. Completing the image to the full product of these axes adds
//! `n* = prod n_i - n` points.

use crate::expr::{Expr, ExprStore};
use crate::lattice::LatticeRule;
use num_bigint::BigUint;
use num_integer::Integer;
use num_rational::Ratio;
use num_traits::{One, ToPrimitive, Zero};
use std::collections::HashMap;
use std::collections::HashSet;

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum TransformError {
    #[error("non-Cartesian structure on axis {axis}: transformed points do not lie on a tensor grid")]
    NonCartesian { axis: usize },
    #[error("transformed points collide; the map is not injective")]
    NotInjective,
    #[error("Korobov parameter a = {0} must be at least 1")]
    Parameter(u64),
    #[error("dimension must be at least 1")]
    Dimension,
    #[error("point count must be positive")]
    ZeroPoints,
    #[error("last axis would need {0} nodes, more than 64 bits can index")]
    AxisTooLarge(BigUint),
    #[error("node map needs the point count and generating vector in 64 bits")]
    TooLargeForNodeMap,
}

/// Per-axis node lists of a tensor grid.
#[derive(Clone, Debug, PartialEq)]
pub struct AxisGridSet {
    nodes: Vec<Vec<f64>>,
}

impl AxisGridSet {
    pub fn new(nodes: Vec<Vec<f64>>) -> Self {
        AxisGridSet { nodes }
    }

    /// Midpoint nodes `(s + 1/2) / n_i`.
    pub fn centered(counts: &[u64]) -> Self {
        let nodes = counts
            .iter()
            .map(|&c| (0..c).map(|s| (s as f64 + 0.5) / c as f64).collect())
            .collect();
        AxisGridSet { nodes }
    }

    pub fn dim(&self) -> usize {
        self.nodes.len()
    }

    /// Nodes of axis `i` (0-based).
    pub fn axis(&self, i: usize) -> &[f64] {
        &self.nodes[i]
    }

    pub fn axes(&self) -> &[Vec<f64>] {
        &self.nodes
    }

    pub fn counts(&self) -> Vec<u64> {
        self.nodes.iter().map(|a| a.len() as u64).collect()
    }

    /// `prod n_i`, or `None` if it does not fit in 128 bits.
    pub fn total(&self) -> Option<u128> {
        self.nodes.iter().try_fold(1u128, |acc, a| acc.checked_mul(a.len() as u128))
    }

    pub fn total_big(&self) -> BigUint {
        self.nodes.iter().map(|a| BigUint::from(a.len())).product()
    }
}

type Q = Ratio<i128>;

/// Exact image of lattice point `j`.
pub fn forward_transform(rule: &LatticeRule, j: u64) -> Vec<Q> {
    let n = rule.n() as i128;
    let z: Vec<i128> = rule.z().iter().map(|&v| v as i128).collect();
    let d = z.len();
    let j = j as i128;
    let mut y = Vec::with_capacity(d);
    for i in 0..d - 1 {
        let a = Q::new((j * z[i + 1]).div_euclid(n), z[i + 1]);
        let b = Q::new((j * z[i]).div_euclid(n), z[i]);
        let v = a - b;
        y.push(if v < Q::zero() { -v } else { v });
    }
    let zd = z[d - 1];
    let r = (j * zd).rem_euclid(n);
    y.push(Q::new(zd * (r / zd), n));
    y
}

pub fn forward_transform_f64(rule: &LatticeRule, j: u64) -> Vec<f64> {
    forward_transform(rule, j).iter().map(ratio_to_f64).collect()
}

fn ratio_to_f64(q: &Q) -> f64 {
    *q.numer() as f64 / *q.denom() as f64
}

/// Node counts `n_i = lcm(z_i, z_{i+1}) / min(z_i, z_{i+1})`, `n_d = ceil(n / z_d)`.
pub fn axis_counts(rule: &LatticeRule) -> Vec<u64> {
    let z = rule.z();
    let d = z.len();
    let mut c: Vec<u64> = (0..d - 1).map(|i| z[i].lcm(&z[i + 1]) / z[i].min(z[i + 1])).collect();
    c.push(rule.n().div_ceil(z[d - 1]));
    c
}

/// Axis counts for the Korobov vector `(1, a, ..., a^{d-1})` with `n`
/// points, where `n` may be far beyond 64 bits.
pub fn korobov_axis_counts(a: u64, d: usize, n: &BigUint) -> Result<Vec<u64>, TransformError> {
    if a == 0 {
        return Err(TransformError::Parameter(a));
    }
    if d == 0 {
        return Err(TransformError::Dimension);
    }
    if n.is_zero() {
        return Err(TransformError::ZeroPoints);
    }
    let zd = BigUint::from(a).pow((d - 1) as u32);
    let last = n.div_ceil(&zd);
    let last = last.to_u64().ok_or(TransformError::AxisTooLarge(last.clone()))?;
    let mut c = vec![a; d - 1];
    c.push(last);
    Ok(c)
}

/// Progression step of each axis, as an exact fraction `(num, den)`.
fn axis_steps(rule: &LatticeRule) -> Vec<(i128, i128)> {
    let z = rule.z();
    let d = z.len();
    let mut s: Vec<(i128, i128)> = (0..d - 1).map(|i| (1, z[i].lcm(&z[i + 1]) as i128)).collect();
    s.push((z[d - 1] as i128, rule.n() as i128));
    s
}

/// Axis grids of the transformed lattice, validated against the images of
/// all lattice points.
pub fn build_axis_grids(rule: &LatticeRule) -> Result<AxisGridSet, TransformError> {
    let counts = axis_counts(rule);
    let steps = axis_steps(rule);
    for j in 0..rule.n() {
        let y = forward_transform(rule, j);
        for (i, v) in y.iter().enumerate() {
            let (num, den) = steps[i];
            let k = *v / Q::new(num, den);
            if !k.is_integer() || k.to_integer() < 0 || k.to_integer() >= counts[i] as i128 {
                return Err(TransformError::NonCartesian { axis: i + 1 });
            }
        }
    }
    let nodes = counts
        .iter()
        .zip(&steps)
        .map(|(&c, &(num, den))| (0..c).map(|k| (k as i128 * num) as f64 / den as f64).collect())
        .collect();
    Ok(AxisGridSet { nodes })
}

/// Completed grid and the number `n*` of points added to the lattice image.
#[derive(Clone, Debug, PartialEq)]
pub struct Completion {
    pub grids: AxisGridSet,
    pub n_star: u128,
}

pub fn grid_completion(rule: &LatticeRule) -> Result<Completion, TransformError> {
    let grids = build_axis_grids(rule)?;
    let mut seen = HashSet::with_capacity(rule.n() as usize);
    for j in 0..rule.n() {
        if !seen.insert(forward_transform(rule, j)) {
            return Err(TransformError::NotInjective);
        }
    }
    let total = grids.total().ok_or(TransformError::AxisTooLarge(grids.total_big()))?;
    Ok(Completion { grids, n_star: total - rule.n() as u128 })
}

/// Images of all lattice points, in index order.
pub fn transformed_points(rule: &LatticeRule) -> Vec<Vec<f64>> {
    (0..rule.n()).map(|j| forward_transform_f64(rule, j)).collect()
}

/// Substitutes `x_i = z_i (y_i + ... + y_{d-1}) + (z_i / z_d) y_d`, the
/// inverse of the forward map on grid nodes. Variable `i` names `y_i`.
pub fn telescoped_substitution(store: &mut ExprStore, f: Expr, z: &[f64]) -> Expr {
    let d = z.len();
    let y: Vec<Expr> = (1..=d as u32).map(|i| store.var(i)).collect();
    let mut map = HashMap::new();
    for i in 0..d {
        let mut items: Vec<(f64, Expr)> = (i..d - 1).map(|k| (z[i], y[k])).collect();
        items.push((z[i] / z[d - 1], y[d - 1]));
        let xi = store.linear_combination(0.0, items);
        map.insert(i as u32 + 1, xi);
    }
    store.substitute(f, &map)
}

/// Where the improved rule places its nodes.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum NodeMap {
    /// Midpoints of each axis cell; the integrand is used unchanged.
    #[default]
    Centered,
    /// Progression nodes of the transformed lattice, mapped back through the
    /// telescoped inverse. Requires `n` and `a^{d-1}` to fit in 64 bits.
    Telescoped,
}

/// Setup for the improved rule of a Korobov configuration.
#[derive(Clone, Debug)]
pub struct ImprovedRule {
    /// Integrand in grid variables.
    pub g: Expr,
    pub grids: AxisGridSet,
    pub n: BigUint,
    /// Points added to complete the grid.
    pub n_star: BigUint,
    /// `log10 |A|` with `|A| = prod_{i<d} 1/z_i`, reported for reference only;
    /// the rule itself uses equal weights `1 / prod n_i`.
    pub log10_abs_det_a: f64,
    pub map: NodeMap,
}

pub fn improved_rule(
    store: &mut ExprStore,
    f: Expr,
    d: usize,
    a: u64,
    n: &BigUint,
    map: NodeMap,
) -> Result<ImprovedRule, TransformError> {
    let counts = korobov_axis_counts(a, d, n)?;
    let total: BigUint = counts.iter().map(|&c| BigUint::from(c)).product();
    let n_star = if &total >= n { total - n } else { BigUint::zero() };
    let log10_abs_det_a = -(((d - 1) * d.saturating_sub(2)) as f64) / 2.0 * (a as f64).log10();
    let (g, grids) = match map {
        NodeMap::Centered => (f, AxisGridSet::centered(&counts)),
        NodeMap::Telescoped => {
            let nn = n.to_u64().ok_or(TransformError::TooLargeForNodeMap)?;
            let mut z = Vec::with_capacity(d);
            let mut p = 1u64;
            for i in 0..d {
                if i > 0 {
                    p = p.checked_mul(a).ok_or(TransformError::TooLargeForNodeMap)?;
                }
                z.push(p);
            }
            let mut nodes: Vec<Vec<f64>> = (0..d - 1)
                .map(|i| (0..counts[i]).map(|k| k as f64 / z[i + 1] as f64).collect())
                .collect();
            let zd = z[d - 1];
            nodes.push(
                (0..counts[d - 1])
                    .map(|k| (k as u128 * zd as u128) as f64 / nn as f64)
                    .collect(),
            );
            let zf: Vec<f64> = z.iter().map(|&v| v as f64).collect();
            (telescoped_substitution(store, f, &zf), AxisGridSet::new(nodes))
        }
    };
    Ok(ImprovedRule { g, grids, n: n.clone(), n_star, log10_abs_det_a, map })
}

/// `a^d`, the point count for which the Korobov grid needs no completion.
pub fn power_count(a: u64, d: usize) -> BigUint {
    BigUint::from(a).pow(d as u32)
}

/// `1 + a^d`.
pub fn power_count_plus_one(a: u64, d: usize) -> BigUint {
    power_count(a, d) + BigUint::one()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{korobov_vector, LatticeRule};

    fn q(a: i128, b: i128) -> Q {
        Q::new(a, b)
    }

    #[test]
    fn forward_examples() {
        let r = korobov_vector(3, 9, 2).unwrap();
        assert_eq!(forward_transform(&r, 0), vec![q(0, 1), q(0, 1)]);
        assert_eq!(forward_transform(&r, 4), vec![q(1, 3), q(1, 3)]);
    }

    #[test]
    fn counts() {
        let r = korobov_vector(4, 161, 3).unwrap();
        assert_eq!(axis_counts(&r), vec![4, 4, 11]);
        let r = LatticeRule::new(7, &[1]).unwrap();
        assert_eq!(axis_counts(&r), vec![7]);
        assert_eq!(korobov_axis_counts(10, 12, &power_count_plus_one(10, 12)).unwrap(), {
            let mut v = vec![10; 11];
            v.push(11);
            v
        });
        assert_eq!(korobov_axis_counts(8, 100, &power_count(8, 100)).unwrap(), vec![8; 100]);
    }

    #[test]
    fn closed_form_grids() {
        let r = korobov_vector(3, 9, 2).unwrap();
        let g = build_axis_grids(&r).unwrap();
        assert_eq!(g.axis(0), &[0.0, 1.0 / 3.0, 2.0 / 3.0]);
        assert_eq!(g.axis(1), &[0.0, 1.0 / 3.0, 2.0 / 3.0]);
        let r = korobov_vector(10, 101, 2).unwrap();
        let g = build_axis_grids(&r).unwrap();
        assert_eq!(g.counts(), vec![10, 11]);
        assert_eq!(g.axis(1)[10], 100.0 / 101.0);
    }

    #[test]
    fn completion_counts() {
        let r = LatticeRule::new(81, &[1, 7]).unwrap();
        let c = grid_completion(&r).unwrap();
        assert_eq!(c.grids.counts(), vec![7, 12]);
        assert_eq!(c.n_star, 3);
        let r = korobov_vector(4, 161, 3).unwrap();
        assert_eq!(grid_completion(&r).unwrap().n_star, 15);
    }

    #[test]
    fn one_dimensional_grid_is_the_lattice() {
        let r = LatticeRule::new(7, &[1]).unwrap();
        let g = build_axis_grids(&r).unwrap();
        let expected: Vec<f64> = (0..7).map(|k| k as f64 / 7.0).collect();
        assert_eq!(g.axis(0), &expected[..]);
    }

    #[test]
    fn telescoped_substitution_examples() {
        let mut s = ExprStore::new();
        let x1 = s.var(1);
        let x2 = s.var(2);
        let g = telescoped_substitution(&mut s, x1, &[1.0, 5.0]);
        let y1 = s.var(1);
        let y2 = s.var(2);
        let expected = s.linear_combination(0.0, [(1.0, y1), (0.2, y2)]);
        assert_eq!(g, expected);
        assert_eq!(telescoped_substitution(&mut s, x2, &[1.0, 5.0]), y2);
        let c = s.constant(3.5);
        assert_eq!(telescoped_substitution(&mut s, c, &[1.0, 5.0]), c);
    }
}
