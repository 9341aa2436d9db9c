//! Equal-weight quadrature rules over `[0,1]^d` and their result records.

use crate::expr::{Expr, ExprStore};
use crate::lattice::LatticeRule;
use crate::mdi::{direct_tensor_sum, mdi_lr, MdiConfig, MdiError, MdiReport};
use crate::par::{det_block_sum, BLOCK};
use crate::transform::{improved_rule, NodeMap};
use num_bigint::BigUint;
use num_traits::{One, ToPrimitive};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Method {
    Mc,
    Slr,
    Implr,
    Mdilr,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Mc, Method::Slr, Method::Implr, Method::Mdilr];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Mc => "mc",
            Method::Slr => "slr",
            Method::Implr => "implr",
            Method::Mdilr => "mdilr",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| format!("unknown method `{s}` (expected mc, slr, implr or mdilr)"))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct QuadratureResult {
    pub method: Method,
    pub integrand: String,
    pub d: usize,
    /// Requested point count.
    pub n: BigUint,
    pub a: Option<u64>,
    pub value: f64,
    /// Points actually evaluated (the completed grid for the improved rule).
    pub points: BigUint,
    pub reference: Option<f64>,
    pub rel_error: Option<f64>,
    pub seconds: f64,
    pub seed: Option<u64>,
    /// Set for MDI-LR runs.
    pub mdi: Option<MdiReport>,
}

impl QuadratureResult {
    fn new(method: Method, d: usize, n: BigUint, value: f64, points: BigUint, seconds: f64) -> Self {
        QuadratureResult {
            method,
            integrand: String::new(),
            d,
            n,
            a: None,
            value,
            points,
            reference: None,
            rel_error: None,
            seconds,
            seed: None,
            mdi: None,
        }
    }

    pub fn labelled(mut self, integrand: &str) -> Self {
        self.integrand = integrand.to_string();
        self
    }

    /// Records the exact value and the resulting relative error.
    pub fn with_reference(mut self, reference: Option<f64>) -> Self {
        self.reference = reference;
        self.rel_error = reference.map(|r| relative_error(self.value, r));
        self
    }

    pub fn row(&self) -> QuadRow {
        QuadRow {
            method: self.method.as_str(),
            integrand: self.integrand.clone(),
            d: self.d,
            n: self.n.to_string(),
            a: self.a,
            value: self.value,
            reference: self.reference,
            rel_error: self.rel_error,
            seconds: self.seconds,
            seed: self.seed,
        }
    }
}

/// One CSV row: `method,integrand,d,n,a,value,reference,rel_error,seconds,seed`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct QuadRow {
    pub method: &'static str,
    pub integrand: String,
    pub d: usize,
    pub n: String,
    pub a: Option<u64>,
    pub value: f64,
    pub reference: Option<f64>,
    pub rel_error: Option<f64>,
    pub seconds: f64,
    pub seed: Option<u64>,
}

pub fn write_csv(path: &Path, results: &[QuadratureResult]) -> Result<(), csv::Error> {
    if let Some(dir) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    let mut w = csv::Writer::from_path(path)?;
    for r in results {
        w.serialize(r.row())?;
    }
    w.flush()?;
    Ok(())
}

pub fn relative_error(value: f64, reference: f64) -> f64 {
    (value - reference).abs() / reference.abs()
}

/// Nearest integer to `n^{1/d}`.
pub fn nearest_root(n: &BigUint, d: usize) -> u64 {
    let d32 = d as u32;
    let mut a = n.nth_root(d32);
    // round: a + 1 when (a + 1/2)^d <= n, i.e. (2a + 1)^d <= 2^d n
    let two = BigUint::from(2u32);
    if (&a * &two + BigUint::one()).pow(d32) <= n * two.pow(d32) {
        a += BigUint::one();
    }
    a.to_u64().unwrap_or(u64::MAX)
}

/// Plain Monte Carlo with `n` uniform points. Block `b` of the sample
/// draws from ChaCha8 stream `b` of `seed`, so results do not depend on
/// the worker count.
pub fn mc_integrate(store: &ExprStore, f: Expr, d: usize, n: u64, seed: u64) -> QuadratureResult {
    let t = Instant::now();
    let tape = store.compile(f);
    let dim = d.max(tape.dim());
    let sum = det_block_sum(n, BLOCK, |lo, hi| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(lo / BLOCK);
        let mut x = vec![0.0; dim];
        let mut reg = tape.scratch();
        let mut acc = 0.0;
        for _ in lo..hi {
            for v in x.iter_mut().take(d) {
                *v = rng.random::<f64>();
            }
            acc += tape.eval_with(&x, &mut reg);
        }
        acc
    });
    let mut r = QuadratureResult::new(
        Method::Mc,
        d,
        BigUint::from(n),
        store.as_const(f).unwrap_or(sum / n as f64),
        BigUint::from(n),
        t.elapsed().as_secs_f64(),
    );
    r.seed = Some(seed);
    r
}

/// Standard lattice rule: the average of `f` over the lattice points.
pub fn slr_integrate(store: &ExprStore, f: Expr, rule: &LatticeRule) -> QuadratureResult {
    let t = Instant::now();
    let tape = store.compile(f);
    let d = rule.dim();
    let dim = d.max(tape.dim());
    let n = rule.n();
    let sum = det_block_sum(n, BLOCK, |lo, hi| {
        let mut x = vec![0.0; dim];
        let mut reg = tape.scratch();
        let mut acc = 0.0;
        for i in lo..hi {
            rule.point_into(i, &mut x[..d]);
            acc += tape.eval_with(&x, &mut reg);
        }
        acc
    });
    QuadratureResult::new(
        Method::Slr,
        d,
        BigUint::from(n),
        store.as_const(f).unwrap_or(sum / n as f64),
        BigUint::from(n),
        t.elapsed().as_secs_f64(),
    )
}

/// Improved lattice rule evaluated by a direct sweep over the completed grid.
pub fn implr_integrate(
    store: &mut ExprStore,
    f: Expr,
    d: usize,
    a: u64,
    n: &BigUint,
    map: NodeMap,
    cap: u128,
) -> Result<QuadratureResult, MdiError> {
    let t = Instant::now();
    let rule = improved_rule(store, f, d, a, n, map)?;
    let sum = direct_tensor_sum(store, rule.g, &rule.grids, cap)?;
    let total = rule.grids.total_big();
    let weight: f64 = rule.grids.counts().iter().map(|&c| c as f64).product();
    let value = store.as_const(rule.g).unwrap_or(sum / weight);
    let mut r = QuadratureResult::new(Method::Implr, d, n.clone(), value, total, t.elapsed().as_secs_f64());
    r.a = Some(a);
    Ok(r)
}

/// Improved lattice rule evaluated by multilevel dimension iteration.
pub fn mdilr_integrate(
    store: &mut ExprStore,
    f: Expr,
    d: usize,
    a: u64,
    n: &BigUint,
    map: NodeMap,
    cfg: &MdiConfig,
) -> Result<QuadratureResult, MdiError> {
    let t = Instant::now();
    let out = mdi_lr(store, f, d, a, n, map, cfg)?;
    let total = out.rule.grids.total_big();
    let mut r = QuadratureResult::new(Method::Mdilr, d, n.clone(), out.value, total, t.elapsed().as_secs_f64());
    r.a = Some(a);
    r.mdi = Some(out.report);
    Ok(r)
}
