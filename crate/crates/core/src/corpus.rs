//! Test integrands over `[0,1]^d` and their exact integrals.

use crate::expr::{parse, Expr, ExprStore, ParseError};
use std::f64::consts::{E, PI};

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum CorpusError {
    #[error("unknown integrand `{0}`")]
    Unknown(String),
    #[error("integrand `{id}` is only defined for d = {only}, not d = {d}")]
    Dimension { id: &'static str, only: usize, d: usize },
    #[error(transparent)]
    Parse(#[from] ParseError),
}

#[derive(Clone, Copy, Debug)]
pub struct CorpusEntry {
    pub id: &'static str,
    /// Alternative names, such as the `f1`..`f6` numbering of the scaling study.
    pub aliases: &'static [&'static str],
    /// Expression in the input grammar; `d` is the dimension.
    pub text: &'static str,
    /// The only dimension the integrand is defined for, if restricted.
    pub fixed_dim: Option<usize>,
    reference: fn(usize) -> f64,
}

impl CorpusEntry {
    pub fn supports(&self, d: usize) -> bool {
        d >= 1 && self.fixed_dim.is_none_or(|f| f == d)
    }

    pub fn parse(&self, store: &mut ExprStore, d: usize) -> Result<Expr, CorpusError> {
        if let Some(only) = self.fixed_dim.filter(|&f| f != d) {
            return Err(CorpusError::Dimension { id: self.id, only, d });
        }
        Ok(parse(store, self.text, d as u32)?)
    }

    /// Exact value of the integral over `[0,1]^d`.
    pub fn reference(&self, d: usize) -> Option<f64> {
        self.supports(d).then(|| (self.reference)(d))
    }
}

pub const CORPUS: &[CorpusEntry] = &[
    CorpusEntry {
        id: "test1",
        aliases: &[],
        text: "x[2]*exp(x[1]*x[2])/(e-2)",
        fixed_dim: Some(2),
        reference: |_| 1.0,
    },
    CorpusEntry {
        id: "expsum",
        aliases: &[],
        text: "exp(sum(i=1..d, x[i]))/(e-1)^d",
        fixed_dim: None,
        reference: |_| 1.0,
    },
    CorpusEntry {
        id: "sinsq",
        aliases: &[],
        text: "sin(2*pi + sum(i=1..d, x[i]^2))",
        fixed_dim: None,
        reference: sinsq_reference,
    },
    CorpusEntry {
        id: "gaussian",
        aliases: &["f3"],
        text: "exp(-0.5*sum(i=1..d, x[i]^2))/sqrt(2*pi)",
        fixed_dim: None,
        reference: gaussian_reference,
    },
    CorpusEntry {
        id: "altexp",
        aliases: &["f1"],
        text: "exp(sum(i=1..d, (-1)^(i+1)*x[i]))",
        fixed_dim: None,
        reference: altexp_reference,
    },
    CorpusEntry {
        id: "prodrecip",
        aliases: &["f2"],
        text: "prod(i=1..d, 1/(0.81 + (x[i] - 0.6)^2))",
        fixed_dim: None,
        reference: prodrecip_reference,
    },
    CorpusEntry {
        id: "cosine",
        aliases: &["f4"],
        text: "cos(2*pi + 2*sum(i=1..d, x[i]))",
        fixed_dim: None,
        reference: cosine_reference,
    },
    CorpusEntry {
        id: "altsqexp",
        aliases: &["f5"],
        text: "exp(sum(i=1..d, (-1)^(i+1)*x[i]^2))",
        fixed_dim: None,
        reference: altsqexp_reference,
    },
    CorpusEntry {
        id: "rational",
        aliases: &["f6"],
        text: "(1 + sum(i=1..d, x[i]))^(-(d+1))",
        fixed_dim: None,
        reference: rational_reference,
    },
    CorpusEntry { id: "one", aliases: &[], text: "1", fixed_dim: None, reference: |_| 1.0 },
];

pub fn lookup(id: &str) -> Result<&'static CorpusEntry, CorpusError> {
    CORPUS
        .iter()
        .find(|e| e.id == id || e.aliases.contains(&id))
        .ok_or_else(|| CorpusError::Unknown(id.to_string()))
}

/// `int_0^1 f` by Clenshaw-Curtis quadrature; every factor used here is
/// analytic on the interval.
fn quad1(f: impl Fn(f64) -> f64) -> f64 {
    quadrature::clenshaw_curtis::integrate(f, 0.0, 1.0, 1e-15).integral
}

fn complex_pow(re: f64, im: f64, d: usize) -> (f64, f64) {
    let r = re.hypot(im).powi(d as i32);
    let t = im.atan2(re) * d as f64;
    (r * t.cos(), r * t.sin())
}

/// `Im (int_0^1 e^{i t^2} dt)^d`; the `2 pi` shift is a full period.
fn sinsq_reference(d: usize) -> f64 {
    let c = quad1(|t| (t * t).cos());
    let s = quad1(|t| (t * t).sin());
    complex_pow(c, s, d).1
}

/// `Re (int_0^1 e^{2 i t} dt)^d`.
fn cosine_reference(d: usize) -> f64 {
    let re = 2f64.sin() / 2.0;
    let im = (1.0 - 2f64.cos()) / 2.0;
    complex_pow(re, im, d).0
}

fn gaussian_reference(d: usize) -> f64 {
    let one = quad1(|t| (-0.5 * t * t).exp());
    one.powi(d as i32) / (2.0 * PI).sqrt()
}

fn altexp_reference(d: usize) -> f64 {
    let odd = d.div_ceil(2) as i32;
    let even = (d / 2) as i32;
    (E - 1.0).powi(odd) * (1.0 - 1.0 / E).powi(even)
}

fn prodrecip_reference(d: usize) -> f64 {
    let one = ((0.4f64 / 0.9).atan() + (0.6f64 / 0.9).atan()) / 0.9;
    one.powi(d as i32)
}

fn altsqexp_reference(d: usize) -> f64 {
    let plus = quad1(|t| (t * t).exp());
    let minus = quad1(|t| (-t * t).exp());
    plus.powi(d.div_ceil(2) as i32) * minus.powi((d / 2) as i32)
}

/// Inclusion-exclusion over the cube corners collapses to `1/(d+1)!`.
fn rational_reference(d: usize) -> f64 {
    (1..=d + 1).map(|k| 1.0 / k as f64).product()
}
