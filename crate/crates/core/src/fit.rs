//! Least-squares power-law fits of run time against grid size and dimension.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum FitError {
    #[error("need at least 4 data points, got {0}")]
    TooFew(usize),
    #[error("times and regressors must be positive")]
    NonPositive,
    #[error("degenerate data: {0}")]
    Degenerate(&'static str),
    #[error("unknown model `{0}` (expected n-power, n2-d-power or n-d-power)")]
    UnknownModel(String),
    #[error("reading {path}: {msg}")]
    Read { path: String, msg: String },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Model {
    /// `t = c N^p`
    NPower,
    /// `t = c N^2 d^q`
    N2DPower,
    /// `t = c N d^q`
    NDPower,
}

impl Model {
    pub const ALL: [Model; 3] = [Model::NPower, Model::N2DPower, Model::NDPower];

    pub fn as_str(self) -> &'static str {
        match self {
            Model::NPower => "n-power",
            Model::N2DPower => "n2-d-power",
            Model::NDPower => "n-d-power",
        }
    }

    fn predict(self, c: f64, e: f64, p: &FitPoint) -> f64 {
        match self {
            Model::NPower => c * p.n.powf(e),
            Model::N2DPower => c * p.n * p.n * p.d.powf(e),
            Model::NDPower => c * p.n * p.d.powf(e),
        }
    }
}

impl FromStr for Model {
    type Err = FitError;
    fn from_str(s: &str) -> Result<Self, FitError> {
        Model::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| FitError::UnknownModel(s.to_string()))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FitPoint {
    /// Nodes per axis.
    pub n: f64,
    pub d: f64,
    pub seconds: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FitResult {
    pub model: Model,
    pub c: f64,
    pub exponent: f64,
    /// `1 - SS_res / SS_tot` in the original (not logarithmic) space.
    pub r_squared: f64,
}

/// Rounds to `digits` significant digits for display.
pub fn significant(x: f64, digits: usize) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let mag = x.abs().log10().floor() as i32;
    if !(-3..=5).contains(&mag) {
        format!("{:.*e}", digits - 1, x)
    } else {
        let decimals = (digits as i32 - 1 - mag).max(0) as usize;
        format!("{x:.decimals$}")
    }
}

impl fmt::Display for FitResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let c = significant(self.c, 4);
        let e = significant(self.exponent, 4);
        let r2 = significant(self.r_squared, 4);
        match self.model {
            Model::NPower => write!(f, "t = {c}*N^{e}  R^2 = {r2}"),
            Model::N2DPower => write!(f, "t = {c}*N^2*d^{e}  R^2 = {r2}"),
            Model::NDPower => write!(f, "t = {c}*N*d^{e}  R^2 = {r2}"),
        }
    }
}

/// Fits `model` by least squares on the logarithms.
pub fn fit_power_law(model: Model, points: &[FitPoint]) -> Result<FitResult, FitError> {
    if points.len() < 4 {
        return Err(FitError::TooFew(points.len()));
    }
    if points.iter().any(|p| !(p.n > 0.0 && p.d > 0.0 && p.seconds > 0.0)) {
        return Err(FitError::NonPositive);
    }
    let (xs, ys): (Vec<f64>, Vec<f64>) = points
        .iter()
        .map(|p| match model {
            Model::NPower => (p.n.ln(), p.seconds.ln()),
            Model::N2DPower => (p.d.ln(), (p.seconds / (p.n * p.n)).ln()),
            Model::NDPower => (p.d.ln(), (p.seconds / p.n).ln()),
        })
        .unzip();
    let k = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(FitError::Degenerate("regressor takes a single value"));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let exponent = sxy / sxx;
    let c = (my - exponent * mx).exp();
    let mt = points.iter().map(|p| p.seconds).sum::<f64>() / k;
    let ss_tot: f64 = points.iter().map(|p| (p.seconds - mt).powi(2)).sum();
    if ss_tot == 0.0 {
        return Err(FitError::Degenerate("all times are equal"));
    }
    let ss_res: f64 = points.iter().map(|p| (p.seconds - model.predict(c, exponent, p)).powi(2)).sum();
    Ok(FitResult { model, c, exponent, r_squared: 1.0 - ss_res / ss_tot })
}

/// Reads `a`, `d` and `seconds` columns from a suite or quadrature CSV,
/// keeping rows whose optional `status` column is `ok` and that match the
/// optional method and integrand filters.
pub fn points_from_csv(
    path: &Path,
    method: Option<&str>,
    integrand: Option<&str>,
) -> Result<Vec<FitPoint>, FitError> {
    let err = |msg: String| FitError::Read { path: path.display().to_string(), msg };
    let mut r = csv::Reader::from_path(path).map_err(|e| err(e.to_string()))?;
    let headers = r.headers().map_err(|e| err(e.to_string()))?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let (ia, id, is) = match (col("a"), col("d"), col("seconds")) {
        (Some(a), Some(d), Some(s)) => (a, d, s),
        _ => return Err(err("missing a, d or seconds column".into())),
    };
    let status = col("status");
    let im = col("method");
    let ii = col("integrand");
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| err(e.to_string()))?;
        if status.is_some_and(|i| &rec[i] != "ok") {
            continue;
        }
        if let (Some(want), Some(i)) = (method, im) {
            if &rec[i] != want {
                continue;
            }
        }
        if let (Some(want), Some(i)) = (integrand, ii) {
            if &rec[i] != want {
                continue;
            }
        }
        let num = |i: usize| rec[i].parse::<f64>().map_err(|e| err(format!("`{}`: {e}", &rec[i])));
        out.push(FitPoint { n: num(ia)?, d: num(id)?, seconds: num(is)? });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_power_law_is_recovered() {
        let pts: Vec<FitPoint> =
            (4..=16).step_by(2).map(|n| FitPoint { n: n as f64, d: 10.0, seconds: 2.0 * (n as f64).powi(3) }).collect();
        let f = fit_power_law(Model::NPower, &pts).unwrap();
        assert!((f.exponent - 3.0).abs() < 1e-6);
        assert!((f.c - 2.0).abs() < 1e-9);
        assert!((f.r_squared - 1.0).abs() < 1e-12);
        let pts: Vec<FitPoint> =
            (4..=16).step_by(2).map(|d| FitPoint { n: 8.0, d: d as f64, seconds: 1e-6 * 64.0 * (d as f64).powi(3) }).collect();
        let f = fit_power_law(Model::N2DPower, &pts).unwrap();
        assert!((f.exponent - 3.0).abs() < 1e-6);
        assert!((f.c - 1e-6).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_input() {
        let p = FitPoint { n: 2.0, d: 3.0, seconds: 1.0 };
        assert_eq!(fit_power_law(Model::NPower, &[p; 3]), Err(FitError::TooFew(3)));
        assert!(matches!(fit_power_law(Model::NPower, &[p; 5]), Err(FitError::Degenerate(_))));
        let mut q = [p; 4];
        q[0].seconds = 0.0;
        assert_eq!(fit_power_law(Model::NPower, &q), Err(FitError::NonPositive));
        let flat: Vec<FitPoint> = (1..=4).map(|n| FitPoint { n: n as f64, d: 1.0, seconds: 1.0 }).collect();
        assert!(matches!(fit_power_law(Model::NPower, &flat), Err(FitError::Degenerate(_))));
    }

    #[test]
    fn significant_digits() {
        assert_eq!(significant(7.334e-6, 4), "7.334e-6");
        assert_eq!(significant(2.99213, 4), "2.992");
        assert_eq!(significant(0.0021361, 4), "0.002136");
        assert_eq!(significant(0.99681, 4), "0.9968");
    }

    #[test]
    fn model_names() {
        for m in Model::ALL {
            assert_eq!(m.as_str().parse::<Model>().unwrap(), m);
        }
    }
}
