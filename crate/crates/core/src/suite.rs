//! Benchmark suites: fixed grids of (method, integrand, d, n, a)
//! configurations written as CSV rows.

use crate::corpus::{lookup, CorpusEntry};
use crate::expr::ExprStore;
use crate::lattice::korobov_vector;
use crate::mdi::{MdiConfig, MdiError, DEFAULT_CAP};
use crate::quad::{
    implr_integrate, mc_integrate, mdilr_integrate, nearest_root, slr_integrate, Method, QuadratureResult,
};
use crate::transform::{power_count, power_count_plus_one, NodeMap};
use num_bigint::BigUint;
use num_traits::ToPrimitive;
use serde::Serialize;
use std::path::Path;
use std::time::Instant;

pub const SUITES: [&str; 7] = ["test1", "test2", "test3", "test4", "test5", "test6", "test7"];

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum SuiteError {
    #[error("unknown suite `{0}` (expected one of test1..test7)")]
    Unknown(String),
    #[error(transparent)]
    Csv(#[from] CsvError),
}

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
#[error("{0}")]
pub struct CsvError(String);

/// How the point count of a configuration is derived from `a` and `d`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Count {
    Fixed(u64),
    /// `1 + base^d`
    PowerPlusOne(u64),
    /// `a^d`
    Power,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Config {
    pub method: Method,
    pub integrand: &'static str,
    pub d: usize,
    pub count: Count,
    /// Korobov parameter; `None` means the nearest integer to `n^{1/d}`.
    pub a: Option<u64>,
}

impl Config {
    pub fn n(&self) -> BigUint {
        match self.count {
            Count::Fixed(n) => BigUint::from(n),
            Count::PowerPlusOne(b) => power_count_plus_one(b, self.d),
            Count::Power => power_count(self.a.expect("power count needs a"), self.d),
        }
    }

    pub fn a(&self) -> u64 {
        self.a.unwrap_or_else(|| nearest_root(&self.n(), self.d))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SuiteOptions {
    /// Adds the very high dimensional rows of test4.
    pub unbounded: bool,
    pub cap: u128,
    pub mdi: MdiConfig,
    pub map: NodeMap,
    pub seed: u64,
}

impl Default for SuiteOptions {
    fn default() -> Self {
        SuiteOptions { unbounded: false, cap: DEFAULT_CAP, mdi: MdiConfig::default(), map: NodeMap::Centered, seed: 1 }
    }
}

fn grid(methods: &[Method], integrands: &[&'static str], dims: &[usize], counts: &[Count], a: Option<u64>) -> Vec<Config> {
    let mut out = Vec::new();
    for &integrand in integrands {
        for &d in dims {
            for &count in counts {
                for &method in methods {
                    out.push(Config { method, integrand, d, count, a });
                }
            }
        }
    }
    out
}

const LATTICE_METHODS: [Method; 3] = [Method::Slr, Method::Implr, Method::Mdilr];

/// Configurations of a suite, in output order.
pub fn configs(suite: &str, opts: &SuiteOptions) -> Result<Vec<Config>, SuiteError> {
    let fixed = |ns: &[u64]| ns.iter().map(|&n| Count::Fixed(n)).collect::<Vec<_>>();
    Ok(match suite {
        "test1" => grid(
            &LATTICE_METHODS,
            &["test1", "sinsq"],
            &[2],
            &fixed(&[101, 501, 1001, 5001, 10001, 40001]),
            None,
        ),
        "test2" => grid(
            &LATTICE_METHODS,
            &["expsum", "sinsq"],
            &[3],
            &fixed(&[101, 1001, 10001, 100001, 1000001, 10000001]),
            None,
        ),
        "test3" => {
            let mut v = grid(
                &LATTICE_METHODS,
                &["gaussian"],
                &[2, 4, 6, 8, 10, 11, 12],
                &[Count::PowerPlusOne(10)],
                Some(10),
            );
            // Equal point budgets for the standard and improved rules.
            for (d, k, a) in [(2, 3, 31), (6, 6, 10), (10, 6, 4), (14, 8, 4), (18, 9, 3), (22, 10, 3), (26, 11, 3), (30, 11, 3)] {
                for method in [Method::Slr, Method::Mdilr] {
                    v.push(Config {
                        method,
                        integrand: "gaussian",
                        d,
                        count: Count::Fixed(10u64.pow(k) + 1),
                        a: Some(a),
                    });
                }
            }
            v
        }
        "test4" => {
            let mut dims = vec![10, 100];
            if opts.unbounded {
                dims.extend([300, 500, 700, 900, 1000]);
            }
            let mut v = grid(&[Method::Mdilr], &["altexp"], &dims, &[Count::Power], Some(8));
            v.extend(grid(&[Method::Mdilr], &["prodrecip"], &dims, &[Count::Power], Some(20)));
            v
        }
        "test5" => {
            let mut v = Vec::new();
            for integrand in ["gaussian", "cosine", "prodrecip"] {
                for d in [5, 10] {
                    for a in (4..=16).step_by(2) {
                        v.push(Config { method: Method::Mdilr, integrand, d, count: Count::PowerPlusOne(10), a: Some(a) });
                    }
                }
            }
            v
        }
        "test6" => {
            let mut v = Vec::new();
            for integrand in ["gaussian", "cosine", "prodrecip"] {
                for d in [5, 10] {
                    for a in (4..=16).step_by(2) {
                        v.push(Config { method: Method::Mdilr, integrand, d, count: Count::PowerPlusOne(a), a: Some(a) });
                    }
                }
            }
            v
        }
        "test7" => {
            let mut v = Vec::new();
            for integrand in ["f1", "f2", "f3", "f4", "f5", "f6"] {
                for a in [8, 10] {
                    for d in (4..=16).step_by(2) {
                        v.push(Config { method: Method::Mdilr, integrand, d, count: Count::PowerPlusOne(a), a: Some(a) });
                    }
                }
            }
            v
        }
        other => return Err(SuiteError::Unknown(other.to_string())),
    })
}

/// One suite CSV row.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SuiteRow {
    pub suite: String,
    pub method: &'static str,
    pub integrand: String,
    pub d: usize,
    pub n: String,
    pub a: Option<u64>,
    pub value: Option<f64>,
    pub reference: Option<f64>,
    pub rel_error: Option<f64>,
    pub seconds: Option<f64>,
    pub seed: Option<u64>,
    pub points: Option<String>,
    pub status: String,
}

fn run_once(
    entry: &CorpusEntry,
    cfg: &Config,
    n: &BigUint,
    a: u64,
    opts: &SuiteOptions,
) -> Result<QuadratureResult, MdiError> {
    let mut store = ExprStore::new();
    let f = entry.parse(&mut store, cfg.d).expect("corpus entries parse for their suites");
    let too_big = || MdiError::Infeasible { points: n.clone(), cap: opts.cap };
    let fits = n.to_u128().is_some_and(|v| v <= opts.cap);
    match cfg.method {
        Method::Mc => {
            let nn = n.to_u64().filter(|_| fits).ok_or_else(too_big)?;
            Ok(mc_integrate(&store, f, cfg.d, nn, opts.seed))
        }
        Method::Slr => {
            let nn = n.to_u64().filter(|_| fits).ok_or_else(too_big)?;
            let rule = korobov_vector(a, nn, cfg.d)
                .or_else(|_| crate::lattice::korobov_reduced(a, nn, cfg.d))
                .map_err(|_| too_big())?;
            let mut r = slr_integrate(&store, f, &rule);
            r.a = Some(a);
            Ok(r)
        }
        Method::Implr => implr_integrate(&mut store, f, cfg.d, a, n, opts.map, opts.cap),
        Method::Mdilr => {
            let mdi = MdiConfig { cap: opts.cap, ..opts.mdi.clone() };
            mdilr_integrate(&mut store, f, cfg.d, a, n, opts.map, &mdi)
        }
    }
}

/// Runs one configuration. Rows faster than a second are repeated three
/// times and report the median time.
pub fn run_config(suite: &str, cfg: &Config, opts: &SuiteOptions) -> SuiteRow {
    let entry = lookup(cfg.integrand).expect("suite integrands are in the corpus");
    let n = cfg.n();
    let a = cfg.a();
    let mut row = SuiteRow {
        suite: suite.to_string(),
        method: cfg.method.as_str(),
        integrand: cfg.integrand.to_string(),
        d: cfg.d,
        n: n.to_string(),
        a: Some(a),
        value: None,
        reference: entry.reference(cfg.d),
        rel_error: None,
        seconds: None,
        seed: (cfg.method == Method::Mc).then_some(opts.seed),
        points: None,
        status: String::new(),
    };
    let t = Instant::now();
    let first = run_once(entry, cfg, &n, a, opts);
    let mut times = vec![t.elapsed().as_secs_f64()];
    match first {
        Ok(r) => {
            if times[0] < 1.0 {
                for _ in 0..2 {
                    let t = Instant::now();
                    let _ = run_once(entry, cfg, &n, a, opts);
                    times.push(t.elapsed().as_secs_f64());
                }
                times.sort_by(f64::total_cmp);
            }
            let r = r.with_reference(row.reference);
            row.value = Some(r.value);
            row.rel_error = r.rel_error;
            row.seconds = Some(times[times.len() / 2]);
            row.points = Some(r.points.to_string());
            if r.mdi.as_ref().is_some_and(|rep| rep.fallback) {
                log::info!("{} {} d={} fell back to the direct sweep", cfg.method, cfg.integrand, cfg.d);
            }
            row.status = "ok".into();
        }
        Err(MdiError::Infeasible { .. }) => row.status = "skipped(cap)".into(),
        Err(e) => row.status = format!("failed: {e}"),
    }
    row
}

pub fn run_suite(suite: &str, opts: &SuiteOptions) -> Result<Vec<SuiteRow>, SuiteError> {
    let cfgs = configs(suite, opts)?;
    Ok(cfgs
        .iter()
        .map(|c| {
            let row = run_config(suite, c, opts);
            log::info!("{suite} {} {} d={} n={} -> {}", row.method, row.integrand, row.d, row.n, row.status);
            row
        })
        .collect())
}

pub fn write_rows(path: &Path, rows: &[SuiteRow]) -> Result<(), SuiteError> {
    let err = |e: &dyn std::fmt::Display| SuiteError::Csv(CsvError(format!("{}: {e}", path.display())));
    if let Some(dir) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| err(&e))?;
    }
    let mut w = csv::Writer::from_path(path).map_err(|e| err(&e))?;
    for r in rows {
        w.serialize(r).map_err(|e| err(&e))?;
    }
    w.flush().map_err(|e| err(&e))?;
    Ok(())
}
