//! Rank-one lattice rules: point generation, Fibonacci and Korobov
//! generating vectors, quality measures and CBC construction.

use crate::par::det_sum;
use num_integer::Integer;
use rayon::prelude::*;
use std::f64::consts::PI;

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum LatticeError {
    #[error("point count must be positive")]
    ZeroPoints,
    #[error("generating vector must have at least one component")]
    EmptyVector,
    #[error("component z[{index}] = {value} is not coprime to n = {n}")]
    NotCoprime { index: usize, value: u64, n: u64 },
    #[error("Fibonacci index {0} is out of range")]
    FibonacciIndex(u32),
    #[error("Korobov parameter a = {a} must lie in 1..n-1 for n = {n}")]
    KorobovParameter { a: u64, n: u64 },
    #[error("a^(d-1) overflows 64 bits for a = {a}, d = {d}")]
    Overflow { a: u64, d: usize },
    #[error("unsupported smoothness alpha = {0}; only 2 and 4 are available")]
    UnsupportedAlpha(u32),
    #[error("weight vector has {got} entries, dimension is {want}")]
    WeightLength { got: usize, want: usize },
}

/// Rank-one lattice `x_i = {i z / n}`, `i = 0..n-1`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LatticeRule {
    n: u64,
    z: Vec<u64>,
    grid_type: bool,
}

impl LatticeRule {
    /// General rule; components are reduced mod n and must be coprime to n.
    pub fn new(n: u64, z: &[u64]) -> Result<Self, LatticeError> {
        if n == 0 {
            return Err(LatticeError::ZeroPoints);
        }
        if z.is_empty() {
            return Err(LatticeError::EmptyVector);
        }
        let z: Vec<u64> = z.iter().map(|&v| if n == 1 { v } else { v % n }).collect();
        for (index, &value) in z.iter().enumerate() {
            if n > 1 && value.gcd(&n) != 1 {
                return Err(LatticeError::NotCoprime { index, value, n });
            }
        }
        Ok(LatticeRule { n, z, grid_type: false })
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn z(&self) -> &[u64] {
        &self.z
    }

    pub fn dim(&self) -> usize {
        self.z.len()
    }

    /// Korobov rule whose parameter shares a factor with n. Such rules are
    /// exact tensor grids after transformation, but the classical quality
    /// theory does not apply to them.
    pub fn is_grid_type(&self) -> bool {
        self.grid_type
    }

    /// `{i z_j / n}` for coordinate `j` (0-based).
    #[inline]
    pub fn coordinate(&self, i: u64, j: usize) -> f64 {
        ((i as u128 * self.z[j] as u128) % self.n as u128) as f64 / self.n as f64
    }

    /// Writes point `i` into `out`.
    #[inline]
    pub fn point_into(&self, i: u64, out: &mut [f64]) {
        for (j, o) in out.iter_mut().enumerate() {
            *o = self.coordinate(i, j);
        }
    }

    pub fn points(&self) -> Vec<Vec<f64>> {
        (0..self.n)
            .map(|i| {
                let mut p = vec![0.0; self.dim()];
                self.point_into(i, &mut p);
                p
            })
            .collect()
    }

    fn residues(&self, k: u64, j: usize) -> u64 {
        ((k as u128 * self.z[j] as u128) % self.n as u128) as u64
    }
}

/// `n = F_{k+1}`, `z = (1, F_k)`.
pub fn fibonacci_rule(k: u32) -> Result<LatticeRule, LatticeError> {
    if k < 2 {
        return Err(LatticeError::FibonacciIndex(k));
    }
    let (mut prev, mut cur) = (1u64, 1u64); // F_1, F_2
    for _ in 2..=k {
        let next = prev.checked_add(cur).ok_or(LatticeError::FibonacciIndex(k))?;
        prev = cur;
        cur = next;
    }
    // cur = F_{k+1}, prev = F_k
    LatticeRule::new(cur, &[1, prev])
}

/// Korobov rule `z = (1, a, ..., a^{d-1})`, stored without reduction.
/// A parameter sharing a factor with `n` yields a grid-type rule.
pub fn korobov_vector(a: u64, n: u64, d: usize) -> Result<LatticeRule, LatticeError> {
    if n == 0 {
        return Err(LatticeError::ZeroPoints);
    }
    if d == 0 {
        return Err(LatticeError::EmptyVector);
    }
    if a == 0 || (n > 1 && a >= n) {
        return Err(LatticeError::KorobovParameter { a, n });
    }
    let mut z = Vec::with_capacity(d);
    let mut p = 1u64;
    for j in 0..d {
        if j > 0 {
            p = p.checked_mul(a).ok_or(LatticeError::Overflow { a, d })?;
        }
        z.push(p);
    }
    let grid_type = n > 1 && a.gcd(&n) != 1;
    Ok(LatticeRule { n, z, grid_type })
}

/// Korobov rule with components reduced mod n, for parameters whose powers
/// do not fit in 64 bits.
pub fn korobov_reduced(a: u64, n: u64, d: usize) -> Result<LatticeRule, LatticeError> {
    if n == 0 {
        return Err(LatticeError::ZeroPoints);
    }
    if d == 0 {
        return Err(LatticeError::EmptyVector);
    }
    if a == 0 || (n > 1 && a >= n) {
        return Err(LatticeError::KorobovParameter { a, n });
    }
    let mut z = Vec::with_capacity(d);
    let mut p = 1u64 % n.max(2);
    for _ in 0..d {
        z.push(p);
        p = ((p as u128 * a as u128) % n as u128) as u64;
    }
    let grid_type = n > 1 && a.gcd(&n) != 1;
    Ok(LatticeRule { n, z, grid_type })
}

pub fn bernoulli2(x: f64) -> f64 {
    x * x - x + 1.0 / 6.0
}

pub fn bernoulli4(x: f64) -> f64 {
    let x2 = x * x;
    x2 * x2 - 2.0 * x2 * x + x2 - 1.0 / 30.0
}

/// Closed-form `P_alpha` for `alpha` in {2, 4}.
pub fn p_alpha(rule: &LatticeRule, alpha: u32) -> Result<f64, LatticeError> {
    let (coef, bern): (f64, fn(f64) -> f64) = match alpha {
        // (-1)^{alpha/2+1} (2 pi)^alpha / alpha!
        2 => ((2.0 * PI).powi(2) / 2.0, bernoulli2),
        4 => (-(2.0 * PI).powi(4) / 24.0, bernoulli4),
        a => return Err(LatticeError::UnsupportedAlpha(a)),
    };
    warn_grid_type(rule);
    let n = rule.n;
    let d = rule.dim();
    let s = det_sum(n, |k| {
        let mut prod = 1.0;
        for j in 0..d {
            let x = rule.residues(k, j) as f64 / n as f64;
            prod *= 1.0 + coef * bern(x);
        }
        prod
    });
    Ok(s / n as f64 - 1.0)
}

/// Product weights `gamma_j` and the space constant `beta`.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightModel {
    pub gamma: Vec<f64>,
    pub beta: f64,
}

impl WeightModel {
    /// Unanchored space with the default weights `gamma_j = 1/j^2`.
    pub fn unanchored(d: usize) -> Self {
        WeightModel { gamma: default_gammas(d), beta: 0.0 }
    }

    /// Anchored space at anchor `c` with default weights.
    pub fn anchored(d: usize, c: f64) -> Self {
        WeightModel { gamma: default_gammas(d), beta: c * c - c + 1.0 / 3.0 }
    }

    pub fn with_gammas(gamma: Vec<f64>, beta: f64) -> Self {
        WeightModel { gamma, beta }
    }

    fn check(&self, d: usize) -> Result<(), LatticeError> {
        if self.gamma.len() < d {
            return Err(LatticeError::WeightLength { got: self.gamma.len(), want: d });
        }
        Ok(())
    }
}

fn default_gammas(d: usize) -> Vec<f64> {
    (1..=d).map(|j| 1.0 / (j * j) as f64).collect()
}

/// Squared shift-averaged worst-case error for product weights.
pub fn shift_avg_wce_sq(rule: &LatticeRule, w: &WeightModel) -> Result<f64, LatticeError> {
    let d = rule.dim();
    w.check(d)?;
    warn_grid_type(rule);
    let n = rule.n;
    let s = det_sum(n, |k| {
        let mut prod = 1.0;
        for j in 0..d {
            let x = rule.residues(k, j) as f64 / n as f64;
            prod *= 1.0 + w.gamma[j] * (bernoulli2(x) + w.beta);
        }
        prod
    });
    let base: f64 = w.gamma[..d].iter().map(|g| 1.0 + g * w.beta).product();
    Ok(s / n as f64 - base)
}

fn warn_grid_type(rule: &LatticeRule) {
    if rule.grid_type {
        log::warn!(
            "Korobov rule with n = {} shares a factor with its parameter; quality measures assume coprime components",
            rule.n
        );
    }
}

/// Candidates `z` in `1..n` coprime to `n`.
pub fn coprime_candidates(n: u64) -> Vec<u64> {
    (1..n.max(2)).filter(|z| z.gcd(&n) == 1).collect()
}

/// Index of the minimum; values within a relative `1e-12` of the minimum
/// count as ties and resolve to the earliest entry.
pub fn argmin_with_ties(values: &[f64]) -> usize {
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let tol = 1e-12 * min.abs();
    values.iter().position(|&v| v <= min + tol).expect("argmin of empty candidate list")
}

/// Component-by-component construction minimizing the shift-averaged
/// worst-case error, with `z_1 = 1`.
pub fn cbc_construct(n: u64, d: usize, w: &WeightModel) -> Result<LatticeRule, LatticeError> {
    if n == 0 {
        return Err(LatticeError::ZeroPoints);
    }
    if d == 0 {
        return Err(LatticeError::EmptyVector);
    }
    w.check(d)?;
    let nn = n as usize;
    // prod[k] = prod over chosen components of (1 + gamma_j (B2({k z_j / n}) + beta)).
    let b2: Vec<f64> = (0..nn).map(|r| bernoulli2(r as f64 / n as f64)).collect();
    let mut prod: Vec<f64> = (0..nn).map(|k| 1.0 + w.gamma[0] * (b2[k] + w.beta)).collect();
    let mut z = vec![1u64];
    let candidates = coprime_candidates(n);
    for j in 1..d {
        let g = w.gamma[j];
        let values: Vec<f64> = candidates
            .par_iter()
            .map(|&c| {
                let mut s = 0.0;
                for (k, p) in prod.iter().enumerate() {
                    let r = ((k as u128 * c as u128) % n as u128) as usize;
                    s += p * (1.0 + g * (b2[r] + w.beta));
                }
                s
            })
            .collect();
        let best = candidates[argmin_with_ties(&values)];
        for (k, p) in prod.iter_mut().enumerate() {
            let r = ((k as u128 * best as u128) % n as u128) as usize;
            *p *= 1.0 + g * (b2[r] + w.beta);
        }
        z.push(best);
    }
    LatticeRule::new(n, &z)
}

/// Figure of merit used by [`korobov_search`].
#[derive(Clone, Debug, PartialEq)]
pub enum Criterion {
    ShiftAveraged(WeightModel),
    PAlpha(u32),
}

impl Criterion {
    pub fn evaluate(&self, rule: &LatticeRule) -> Result<f64, LatticeError> {
        match self {
            Criterion::ShiftAveraged(w) => shift_avg_wce_sq(rule, w),
            Criterion::PAlpha(alpha) => p_alpha(rule, *alpha),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct KorobovChoice {
    pub a: u64,
    pub value: f64,
    pub rule: LatticeRule,
}

/// Best Korobov parameter among those coprime to `n`.
pub fn korobov_search(n: u64, d: usize, criterion: &Criterion) -> Result<KorobovChoice, LatticeError> {
    if n < 2 {
        return Err(LatticeError::KorobovParameter { a: 1, n });
    }
    let candidates = coprime_candidates(n);
    let values: Vec<f64> = candidates
        .par_iter()
        .map(|&a| criterion.evaluate(&korobov_reduced(a, n, d)?))
        .collect::<Result<_, _>>()?;
    let i = argmin_with_ties(&values);
    let a = candidates[i];
    let rule = korobov_vector(a, n, d).or_else(|_| korobov_reduced(a, n, d))?;
    Ok(KorobovChoice { a, value: values[i], rule })
}
