use clap::{Args, Parser, Subcommand, ValueEnum};
use mdilr_core::corpus::{lookup, CorpusError};
use mdilr_core::fit::{fit_power_law, points_from_csv, FitResult, Model};
use mdilr_core::lattice::{
    cbc_construct, fibonacci_rule, korobov_search, korobov_vector, p_alpha, shift_avg_wce_sq, Criterion,
    LatticeRule, WeightModel,
};
use mdilr_core::mdi::{DEFAULT_BUDGET, DEFAULT_CAP};
use mdilr_core::quad::{
    implr_integrate, mc_integrate, mdilr_integrate, nearest_root, slr_integrate, write_csv, Method,
};
use mdilr_core::suite::{run_suite, write_rows, SuiteOptions};
use mdilr_core::transform::{grid_completion, power_count_plus_one, transformed_points};
use mdilr_core::{parse, Error, ExprStore, MdiConfig, MdiError, NodeMap};
use num_bigint::BigUint;
use std::fmt::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "mdilr", version, about = "Lattice rules and multilevel dimension iteration for integrals over [0,1]^d")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate a corpus integrand or an expression over [0,1]^d.
    Integrate(IntegrateArgs),
    /// Generate and assess rank-one lattice rules.
    #[command(subcommand)]
    Lattice(LatticeCmd),
    /// Export the tensor-grid form of a lattice rule.
    #[command(subcommand)]
    Transform(TransformCmd),
    /// Run a benchmark suite and write its rows as CSV.
    Bench(BenchArgs),
    /// Fit run-time power laws to suite or integrate CSV output.
    Fit(FitArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum MapArg {
    Centered,
    Telescoped,
}

impl From<MapArg> for NodeMap {
    fn from(m: MapArg) -> Self {
        match m {
            MapArg::Centered => NodeMap::Centered,
            MapArg::Telescoped => NodeMap::Telescoped,
        }
    }
}

#[derive(Args)]
struct IntegrateArgs {
    /// Corpus id (see `--list`) or an expression such as `exp(-x[1]^2)`.
    #[arg(long, required_unless_present = "list")]
    integrand: Option<String>,
    #[arg(long, required_unless_present = "list")]
    dim: Option<usize>,
    /// Korobov parameter; defaults to the nearest integer to n^(1/d).
    #[arg(long)]
    a: Option<u64>,
    /// Number of lattice points; defaults to 1 + a^d.
    #[arg(long)]
    n: Option<BigUint>,
    #[arg(long, default_value = "mdilr")]
    method: Method,
    /// Coordinates removed per MDI level.
    #[arg(long, default_value_t = 1)]
    m: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Node budget for intermediate expressions.
    #[arg(long, default_value_t = DEFAULT_BUDGET)]
    budget: usize,
    /// Largest grid a direct sweep may visit.
    #[arg(long, default_value_t = DEFAULT_CAP)]
    cap: u128,
    #[arg(long, value_enum, default_value = "centered")]
    node_map: MapArg,
    /// Also write the result as a CSV row.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// List corpus integrands and exit.
    #[arg(long)]
    list: bool,
}

#[derive(Args)]
struct RuleArgs {
    #[arg(long)]
    n: Option<u64>,
    #[arg(long)]
    dim: Option<usize>,
    /// Korobov parameter.
    #[arg(long, conflicts_with_all = ["z", "fibonacci"])]
    a: Option<u64>,
    /// Generating vector, comma separated.
    #[arg(long, value_delimiter = ',', conflicts_with = "fibonacci")]
    z: Option<Vec<u64>>,
    /// Fibonacci rule with n = F(k+1), z = (1, F(k)).
    #[arg(long)]
    fibonacci: Option<u32>,
}

impl RuleArgs {
    fn rule(&self) -> Result<Option<LatticeRule>, Failure> {
        if let Some(k) = self.fibonacci {
            return Ok(Some(fibonacci_rule(k).map_err(Error::from)?));
        }
        let n = self.n.ok_or_else(|| Failure::usage("--n is required"))?;
        if let Some(z) = &self.z {
            return Ok(Some(LatticeRule::new(n, z).map_err(Error::from)?));
        }
        let d = self.dim.ok_or_else(|| Failure::usage("--dim is required"))?;
        match self.a {
            Some(a) => Ok(Some(korobov_vector(a, n, d).map_err(Error::from)?)),
            None => Ok(None),
        }
    }

    fn require(&self) -> Result<LatticeRule, Failure> {
        self.rule()?.ok_or_else(|| Failure::usage("give --a, --z or --fibonacci"))
    }
}

#[derive(Args)]
struct WeightArgs {
    /// Product weights gamma_j, comma separated; defaults to 1/j^2.
    #[arg(long, value_delimiter = ',')]
    weights: Option<Vec<f64>>,
    #[arg(long, default_value_t = 0.0)]
    beta: f64,
}

impl WeightArgs {
    fn model(&self, d: usize) -> WeightModel {
        match &self.weights {
            Some(g) => WeightModel::with_gammas(g.clone(), self.beta),
            None => {
                let mut w = WeightModel::unanchored(d);
                w.beta = self.beta;
                w
            }
        }
    }
}

#[derive(Subcommand)]
enum LatticeCmd {
    /// Print the lattice points, one per line.
    Gen {
        #[command(flatten)]
        rule: RuleArgs,
    },
    /// P_alpha (alpha 2 or 4) and, with --weights, the shift-averaged error.
    /// Without --a or --z the best Korobov rule for P_alpha is used.
    Quality {
        #[command(flatten)]
        rule: RuleArgs,
        #[arg(long, default_value_t = 2)]
        alpha: u32,
        #[command(flatten)]
        weights: WeightArgs,
    },
    /// Component-by-component construction.
    Cbc {
        #[arg(long)]
        n: u64,
        #[arg(long)]
        dim: usize,
        #[command(flatten)]
        weights: WeightArgs,
    },
    /// Best Korobov parameter, by P_alpha when --alpha is given, otherwise
    /// by the shift-averaged error.
    Search {
        #[arg(long)]
        n: u64,
        #[arg(long)]
        dim: usize,
        #[arg(long)]
        alpha: Option<u32>,
        #[command(flatten)]
        weights: WeightArgs,
    },
}

#[derive(Subcommand)]
enum TransformCmd {
    /// Transformed images of the lattice points as CSV.
    Points {
        #[command(flatten)]
        rule: RuleArgs,
    },
    /// Axis grids and the number of completion points.
    Grid {
        #[command(flatten)]
        rule: RuleArgs,
    },
}

#[derive(Args)]
struct BenchArgs {
    /// test1 .. test7
    #[arg(long)]
    suite: String,
    #[arg(long)]
    out: PathBuf,
    /// Include the very high dimensional rows.
    #[arg(long)]
    unbounded: bool,
    #[arg(long, default_value_t = DEFAULT_CAP)]
    cap: u128,
    #[arg(long, default_value_t = DEFAULT_BUDGET)]
    budget: usize,
    #[arg(long, value_enum, default_value = "centered")]
    node_map: MapArg,
}

#[derive(Args)]
struct FitArgs {
    #[arg(long = "in")]
    input: PathBuf,
    /// n-power, n2-d-power or n-d-power; all three when omitted.
    #[arg(long)]
    model: Option<Model>,
    #[arg(long)]
    method: Option<String>,
    #[arg(long)]
    integrand: Option<String>,
}

struct Failure {
    code: u8,
    msg: String,
}

impl Failure {
    fn usage(msg: impl Into<String>) -> Self {
        Failure { code: 1, msg: msg.into() }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::Mdi(MdiError::Infeasible { .. }) => 3,
            Error::Parse(_) | Error::Corpus(_) | Error::Suite(_) => 1,
            Error::Fit(mdilr_core::FitError::Read { .. } | mdilr_core::FitError::UnknownModel(_)) => 1,
            _ => 2,
        };
        Failure { code, msg: e.to_string() }
    }
}

impl From<MdiError> for Failure {
    fn from(e: MdiError) -> Self {
        Error::from(e).into()
    }
}

fn integrate(args: &IntegrateArgs) -> Result<String, Failure> {
    if args.list {
        let mut out = String::new();
        for e in mdilr_core::CORPUS {
            let names = std::iter::once(e.id).chain(e.aliases.iter().copied()).collect::<Vec<_>>().join(", ");
            writeln!(out, "{names}: {}", e.text).unwrap();
        }
        return Ok(out);
    }
    let text = args.integrand.as_deref().unwrap_or_default();
    let d = args.dim.unwrap_or_default();
    if d == 0 {
        return Err(Failure::usage("--dim must be at least 1"));
    }
    let mut store = ExprStore::new();
    let (f, label, reference) = match lookup(text) {
        Ok(entry) => (entry.parse(&mut store, d).map_err(Error::from)?, entry.id.to_string(), entry.reference(d)),
        Err(CorpusError::Unknown(_)) => (parse(&mut store, text, d as u32).map_err(Error::from)?, text.to_string(), None),
        Err(e) => return Err(Error::from(e).into()),
    };
    let (a, n) = match (args.a, &args.n) {
        (Some(a), Some(n)) => (a, n.clone()),
        (Some(a), None) => (a, power_count_plus_one(a, d)),
        (None, Some(n)) => (nearest_root(n, d), n.clone()),
        (None, None) => return Err(Failure::usage("give --a, --n or both")),
    };
    let small = || {
        u64::try_from(&n)
            .ok()
            .filter(|&v| u128::from(v) <= args.cap)
            .ok_or_else(|| Failure::from(MdiError::Infeasible { points: n.clone(), cap: args.cap }))
    };
    let result = match args.method {
        Method::Mc => mc_integrate(&store, f, d, small()?, args.seed),
        Method::Slr => {
            let nn = small()?;
            let mut r = slr_integrate(&store, f, &korobov_vector(a, nn, d).map_err(Error::from)?);
            r.a = Some(a);
            r
        }
        Method::Implr => implr_integrate(&mut store, f, d, a, &n, args.node_map.into(), args.cap)?,
        Method::Mdilr => {
            let cfg = MdiConfig { m: args.m, budget: args.budget, cap: args.cap, ..MdiConfig::default() };
            mdilr_integrate(&mut store, f, d, a, &n, args.node_map.into(), &cfg)?
        }
    };
    let result = result.labelled(&label).with_reference(reference);
    if let Some(path) = &args.csv {
        write_csv(path, std::slice::from_ref(&result))
            .map_err(|e| Failure { code: 2, msg: format!("{}: {e}", path.display()) })?;
    }
    let mut out = String::new();
    writeln!(out, "method    {}", result.method).unwrap();
    writeln!(out, "integrand {label}").unwrap();
    writeln!(out, "d         {d}").unwrap();
    writeln!(out, "n         {}", result.n).unwrap();
    if let Some(a) = result.a {
        writeln!(out, "a         {a}").unwrap();
    }
    writeln!(out, "points    {}", result.points).unwrap();
    writeln!(out, "value     {:.17e}", result.value).unwrap();
    if let (Some(r), Some(e)) = (result.reference, result.rel_error) {
        writeln!(out, "reference {r:.17e}").unwrap();
        writeln!(out, "rel_error {e:.4e}").unwrap();
    }
    if let Some(rep) = &result.mdi {
        writeln!(out, "levels    {}{}", rep.levels, if rep.fallback { " (fell back to direct sum)" } else { "" })
            .unwrap();
    }
    writeln!(out, "seconds   {:.6}", result.seconds).unwrap();
    Ok(out)
}

fn join(v: &[u64]) -> String {
    v.iter().map(u64::to_string).collect::<Vec<_>>().join(",")
}

fn lattice(cmd: &LatticeCmd) -> Result<String, Failure> {
    let mut out = String::new();
    match cmd {
        LatticeCmd::Gen { rule } => {
            let rule = rule.require()?;
            for p in rule.points() {
                let line = p.iter().map(|v| format!("{v}")).collect::<Vec<_>>().join(",");
                writeln!(out, "{line}").unwrap();
            }
        }
        LatticeCmd::Quality { rule, alpha, weights } => {
            let rule = match rule.rule()? {
                Some(r) => r,
                None => {
                    let (n, d) = (rule.n.unwrap_or_default(), rule.dim.unwrap_or_default());
                    let c = korobov_search(n, d, &Criterion::PAlpha(*alpha)).map_err(Error::from)?;
                    writeln!(out, "a = {}", c.a).unwrap();
                    c.rule
                }
            };
            writeln!(out, "n = {}", rule.n()).unwrap();
            writeln!(out, "z = {}", join(rule.z())).unwrap();
            let p = p_alpha(&rule, *alpha).map_err(Error::from)?;
            writeln!(out, "P{alpha} = {p:.17e}").unwrap();
            if weights.weights.is_some() {
                let e = shift_avg_wce_sq(&rule, &weights.model(rule.dim())).map_err(Error::from)?;
                writeln!(out, "shift-averaged error^2 = {e:.17e}").unwrap();
            }
        }
        LatticeCmd::Cbc { n, dim, weights } => {
            let w = weights.model(*dim);
            let rule = cbc_construct(*n, *dim, &w).map_err(Error::from)?;
            let e = shift_avg_wce_sq(&rule, &w).map_err(Error::from)?;
            writeln!(out, "z = {}", join(rule.z())).unwrap();
            writeln!(out, "shift-averaged error^2 = {e:.17e}").unwrap();
        }
        LatticeCmd::Search { n, dim, alpha, weights } => {
            let criterion = match alpha {
                Some(a) => Criterion::PAlpha(*a),
                None => Criterion::ShiftAveraged(weights.model(*dim)),
            };
            let c = korobov_search(*n, *dim, &criterion).map_err(Error::from)?;
            writeln!(out, "a = {}", c.a).unwrap();
            writeln!(out, "z = {}", join(c.rule.z())).unwrap();
            writeln!(out, "value = {:.17e}", c.value).unwrap();
        }
    }
    Ok(out)
}

fn transform(cmd: &TransformCmd) -> Result<String, Failure> {
    let mut out = String::new();
    match cmd {
        TransformCmd::Points { rule } => {
            let rule = rule.require()?;
            for p in transformed_points(&rule) {
                let line = p.iter().map(|v| format!("{v}")).collect::<Vec<_>>().join(",");
                writeln!(out, "{line}").unwrap();
            }
        }
        TransformCmd::Grid { rule } => {
            let rule = rule.require()?;
            let c = grid_completion(&rule).map_err(Error::from)?;
            writeln!(out, "counts = {}", join(&c.grids.counts())).unwrap();
            writeln!(out, "n* = {}", c.n_star).unwrap();
            for (i, axis) in c.grids.axes().iter().enumerate() {
                let line = axis.iter().map(|v| format!("{v}")).collect::<Vec<_>>().join(",");
                writeln!(out, "axis {}: {line}", i + 1).unwrap();
            }
        }
    }
    Ok(out)
}

fn bench(args: &BenchArgs) -> Result<String, Failure> {
    let opts = SuiteOptions {
        unbounded: args.unbounded,
        cap: args.cap,
        mdi: MdiConfig { budget: args.budget, cap: args.cap, ..MdiConfig::default() },
        map: args.node_map.into(),
        ..SuiteOptions::default()
    };
    let rows = run_suite(&args.suite, &opts).map_err(Error::from)?;
    write_rows(&args.out, &rows).map_err(Error::from)?;
    let skipped = rows.iter().filter(|r| r.status != "ok").count();
    Ok(format!("{} rows written to {} ({skipped} not run)\n", rows.len(), args.out.display()))
}

fn fit(args: &FitArgs) -> Result<String, Failure> {
    let points = points_from_csv(&args.input, args.method.as_deref(), args.integrand.as_deref()).map_err(Error::from)?;
    let models = match args.model {
        Some(m) => vec![m],
        None => Model::ALL.to_vec(),
    };
    let fits: Vec<FitResult> =
        models.iter().map(|&m| fit_power_law(m, &points)).collect::<Result<_, _>>().map_err(Error::from)?;
    let mut out = String::new();
    for f in &fits {
        writeln!(out, "{:<11} {f}", f.model.as_str()).unwrap();
    }
    if fits.len() > 1 {
        let best = fits.iter().max_by(|a, b| a.r_squared.total_cmp(&b.r_squared)).unwrap();
        writeln!(out, "best: {}", best.model.as_str()).unwrap();
    }
    Ok(out)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    if let Some(t) = std::env::var("MDILR_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            log::warn!("ignoring MDILR_THREADS: {e}");
        }
    }
    let result = match &cli.command {
        Command::Integrate(a) => integrate(a),
        Command::Lattice(c) => lattice(c),
        Command::Transform(c) => transform(c),
        Command::Bench(a) => bench(a),
        Command::Fit(a) => fit(a),
    };
    match result {
        Ok(out) => {
            print!("{out}");
            ExitCode::SUCCESS
        }
        Err(f) => {
            eprintln!("error: {}", f.msg);
            ExitCode::from(f.code)
        }
    }
}
