//! Command-line front end for `ctbounds`.
//!
//! Every subcommand reads one problem file and prints one report. Reports are
//! built as JSON values (maps are key-ordered), so identical arguments always
//! produce byte-identical output in every format.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Map, Value};

use ctbounds::correlate::attraction_report;
use ctbounds::dualopt::{count_bounds, g_value, solve_unweighted, solve_weighted, typical_table, SolverOptions};
use ctbounds::exact::{
    brute_force_count, ehrhart_volume_with_budget, exact_count_weighted_with_budget, exact_count_with_budget,
};
use ctbounds::polytope::{max_product_point, volume_bounds};
use ctbounds::scaling::{integral_count_bounds, mc_integral_phi};
use ctbounds::margins::parse_problem;
use ctbounds::{Error, ProblemSpec, WeightMatrix};

#[derive(Parser, Debug)]
#[command(name = "ctbounds", version, about = "Bounds and exact oracles for contingency tables and transportation polytopes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Upper and lower bounds on the number of tables (weighted when the problem has weights).
    Bounds(Common),
    /// Bounds on the volume of the transportation polytope.
    Volume(Common),
    /// Integer flows on a weight pattern: exact count for 0/1 patterns, dual bounds for positive weights.
    Flows {
        #[command(flatten)]
        common: Common,
        /// JSON file holding an m×n matrix that replaces the problem's weights.
        #[arg(long)]
        pattern: Option<PathBuf>,
    },
    /// Attraction between the row-sum and column-sum events under cloning.
    Attraction(Common),
    /// Exact oracles.
    Oracle {
        #[command(flatten)]
        common: Common,
        /// Exact number of tables.
        #[arg(long, conflicts_with = "volume", required_unless_present = "volume")]
        count: bool,
        /// Exact Euclidean volume from Ehrhart interpolation.
        #[arg(long)]
        volume: bool,
        /// 0/1 support pattern (JSON m×n matrix) for `--count`.
        #[arg(long)]
        pattern: Option<PathBuf>,
    },
    /// Check every bound against the exact oracles that fit within budget.
    Verify {
        #[command(flatten)]
        common: Common,
        /// Run the Monte-Carlo integral checks even when mn > 16.
        #[arg(long)]
        integral: bool,
    },
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// Problem file (JSON).
    problem: PathBuf,
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    #[arg(long, default_value_t = 200)]
    max_iter: usize,
    #[arg(long, default_value_t = 100_000)]
    samples: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Budget on the state-space estimate of the exact oracles.
    #[arg(long, default_value_t = 1e9)]
    budget: f64,
}

#[derive(Clone, Copy, Debug, ValueEnum, PartialEq, Eq)]
enum Format {
    Json,
    Csv,
    Text,
}

impl Common {
    fn solver(&self) -> SolverOptions {
        SolverOptions {
            tol: self.tol,
            max_iter: self.max_iter,
        }
    }
}

/// Failure of a subcommand, carrying its exit code.
#[derive(Debug)]
struct Failure {
    code: i32,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure {
            code: exit_code(&e),
            message: e.to_string(),
        }
    }
}

fn invalid(message: impl Into<String>) -> Failure {
    Failure {
        code: 2,
        message: message.into(),
    }
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::NoConvergence { .. } | Error::DivergenceDetected { .. } | Error::NotAttained => 3,
        Error::BudgetExceeded { .. } => 4,
        _ => 2,
    }
}

/// Runs the CLI on `argv` (including the program name), printing to stdout
/// and stderr. Returns the process exit code.
pub fn run_command<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run_with(argv, &mut stdout.lock(), &mut stderr.lock())
}

/// As [`run_command`] with explicit output streams.
pub fn run_with<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 2,
            };
            let rendered = e.render().to_string();
            if code == 0 {
                let _ = write!(out, "{rendered}");
            } else {
                let _ = write!(err, "{rendered}");
            }
            return code;
        }
    };
    let (format, result) = dispatch(&cli.command);
    match result {
        Ok((report, code)) => {
            let _ = out.write_all(render(&report, format).as_bytes());
            code
        }
        Err(f) => {
            let _ = writeln!(err, "error: {}", f.message);
            f.code
        }
    }
}

type Outcome = std::result::Result<(Value, i32), Failure>;

fn dispatch(command: &Command) -> (Format, Outcome) {
    match command {
        Command::Bounds(c) => (c.format, bounds(c)),
        Command::Volume(c) => (c.format, volume(c)),
        Command::Flows { common, pattern } => (common.format, flows(common, pattern.as_deref())),
        Command::Attraction(c) => (c.format, attraction(c)),
        Command::Oracle {
            common,
            count,
            volume,
            pattern,
        } => (common.format, oracle(common, *count, *volume, pattern.as_deref())),
        Command::Verify { common, integral } => (common.format, verify(common, *integral)),
    }
}

fn load(path: &Path) -> std::result::Result<ProblemSpec, Failure> {
    let bytes = fs::read(path).map_err(|e| invalid(format!("cannot read {}: {e}", path.display())))?;
    Ok(parse_problem(&bytes)?)
}

fn load_pattern(path: &Path) -> std::result::Result<WeightMatrix, Failure> {
    let bytes = fs::read(path).map_err(|e| invalid(format!("cannot read {}: {e}", path.display())))?;
    let rows: Vec<Vec<f64>> =
        serde_json::from_slice(&bytes).map_err(|e| invalid(format!("pattern {}: {e}", path.display())))?;
    Ok(WeightMatrix::from_rows(&rows)?)
}

fn to_value<T: serde::Serialize>(x: &T) -> Value {
    serde_json::to_value(x).expect("reports serialize")
}

fn header(problem: &ProblemSpec) -> Map<String, Value> {
    let mut map = Map::new();
    map.insert("m".into(), json!(problem.margins.m()));
    map.insert("n".into(), json!(problem.margins.n()));
    map.insert("total".into(), json!(problem.margins.total()));
    if let Some(label) = problem.metadata.get("label") {
        map.insert("label".into(), json!(label));
    }
    map
}

fn merge(mut base: Map<String, Value>, extra: Value) -> Value {
    if let Value::Object(extra) = extra {
        base.extend(extra);
    }
    Value::Object(base)
}

fn bounds(c: &Common) -> Outcome {
    let problem = load(&c.problem)?;
    let weights = problem.weights.as_ref();
    let sol = match weights {
        Some(w) => solve_weighted(&problem.margins, w, c.solver())?,
        None => solve_unweighted(&problem.margins, c.solver())?,
    };
    let report = count_bounds(&problem.margins, weights, &sol)?;
    let mut map = header(&problem);
    map.insert("weighted".into(), json!(weights.is_some()));
    map.insert(
        "solver".into(),
        json!({"iterations": sol.iterations, "grad_norm": sol.grad_norm, "attained": sol.attained}),
    );
    Ok((merge(map, to_value(&report)), 0))
}

fn linear(x: f64) -> Option<f64> {
    let v = x.exp();
    (v.is_normal()).then_some(v)
}

fn volume(c: &Common) -> Outcome {
    let problem = load(&c.problem)?;
    let mpp = max_product_point(&problem.margins, c.solver())?;
    let report = volume_bounds(&problem.margins, &mpp);
    let mut map = header(&problem);
    if let Some(v) = linear(report.log_lower) {
        map.insert("lower".into(), json!(v));
    }
    if let Some(v) = linear(report.log_upper) {
        map.insert("upper".into(), json!(v));
    }
    map.insert(
        "max_product".into(),
        json!({
            "iterations": mpp.iterations,
            "margin_residual": mpp.margin_residual,
            "duality_gap": mpp.duality_gap,
        }),
    );
    Ok((merge(map, to_value(&report)), 0))
}

fn flows(c: &Common, pattern: Option<&Path>) -> Outcome {
    let problem = load(&c.problem)?;
    let weights = match pattern {
        Some(p) => load_pattern(p)?,
        None => problem
            .weights
            .clone()
            .ok_or_else(|| invalid("flows needs weights in the problem file or --pattern"))?,
    };
    weights.check_dims(&problem.margins)?;
    let mut map = header(&problem);
    let zero_one = weights.is_zero_one();
    let positive = weights.strictly_positive();
    if !zero_one && !positive {
        return Err(invalid("weights must be a 0/1 pattern or strictly positive"));
    }
    if zero_one {
        match exact_count_weighted_with_budget(&problem.margins, &weights, c.budget) {
            Ok(count) => {
                map.insert("exact".into(), to_value(&count));
            }
            // without a dual bound there is nothing else to report
            Err(e @ Error::BudgetExceeded { .. }) if !positive => return Err(e.into()),
            Err(Error::BudgetExceeded { estimate, budget }) => {
                map.insert("exact".into(), json!({"status": "budget_exceeded", "estimate": estimate, "budget": budget}));
            }
            Err(e) => return Err(e.into()),
        }
    }
    if positive {
        let sol = solve_weighted(&problem.margins, &weights, c.solver())?;
        map.insert("bounds".into(), to_value(&count_bounds(&problem.margins, Some(&weights), &sol)?));
    }
    Ok((Value::Object(map), 0))
}

fn attraction(c: &Common) -> Outcome {
    let problem = load(&c.problem)?;
    let sol = solve_unweighted(&problem.margins, c.solver())?;
    let report = attraction_report(&problem.margins, &sol)?;
    Ok((merge(header(&problem), to_value(&report)), 0))
}

fn oracle(c: &Common, count: bool, volume: bool, pattern: Option<&Path>) -> Outcome {
    let problem = load(&c.problem)?;
    if count {
        let value = match pattern {
            Some(p) => exact_count_weighted_with_budget(&problem.margins, &load_pattern(p)?, c.budget)?,
            None => exact_count_with_budget(&problem.margins, c.budget)?,
        };
        return Ok((json!({"value": value.value.to_str_radix(10)}), 0));
    }
    debug_assert!(volume);
    if pattern.is_some() {
        return Err(invalid("--pattern applies to --count only"));
    }
    let v = ehrhart_volume_with_budget(&problem.margins, c.budget)?;
    Ok((to_value(&v), 0))
}

#[derive(Default)]
struct Checks {
    list: Vec<Value>,
    failed: bool,
}

impl Checks {
    fn record(&mut self, name: &str, passed: bool, detail: Value) {
        self.failed |= !passed;
        self.list.push(json!({
            "name": name,
            "status": if passed { "pass" } else { "fail" },
            "detail": detail,
        }));
    }

    fn skip(&mut self, name: &str, reason: String) {
        self.list.push(json!({"name": name, "status": "skipped", "detail": {"reason": reason}}));
    }
}

fn verify(c: &Common, force_integral: bool) -> Outcome {
    let problem = load(&c.problem)?;
    let margins = &problem.margins;
    let mut checks = Checks::default();
    let ones = WeightMatrix::ones(margins.m(), margins.n());

    let sol = solve_unweighted(margins, c.solver())?;
    let bounds = count_bounds(margins, None, &sol)?;
    let exact = match exact_count_with_budget(margins, c.budget) {
        Ok(v) => Some(v),
        Err(Error::BudgetExceeded { estimate, .. }) => {
            checks.skip("exact_count", format!("state estimate {estimate:e} exceeds budget"));
            None
        }
        Err(e) => return Err(e.into()),
    };

    let z = typical_table(&sol, margins, &ones)?.z;
    let g = g_value(&z, &ones)?;
    let gap = (sol.log_rho - g).abs();
    checks.record(
        "duality_identity",
        gap <= 1e-8 * (1.0 + sol.log_rho.abs()),
        json!({"log_rho": sol.log_rho, "g_of_z": g, "gap": gap}),
    );

    if let Some(e) = &exact {
        let ln_exact = e.ln_value();
        checks.record(
            "rho_upper_bound",
            ln_exact <= bounds.log_upper + 1e-9 * bounds.log_upper.abs().max(1.0),
            json!({"log_exact": ln_exact, "log_upper": bounds.log_upper}),
        );
        if bounds.certified_lower {
            checks.record(
                "certified_lower_bound",
                bounds.log_lower <= ln_exact,
                json!({"log_exact": ln_exact, "log_lower": bounds.log_lower}),
            );
        } else {
            checks.skip("certified_lower_bound", "lower bound is certified only for m + n ≥ 10".into());
        }
        match brute_force_count(margins, None) {
            Ok(b) => checks.record(
                "dp_matches_brute_force",
                b.value == e.value,
                json!({"dp": e.value.to_str_radix(10), "brute": b.value.to_str_radix(10)}),
            ),
            Err(Error::BudgetExceeded { estimate, .. }) => {
                checks.skip("dp_matches_brute_force", format!("search estimate {estimate:e} exceeds budget"))
            }
            Err(err) => return Err(err.into()),
        }
    }

    if let Some(w) = problem.weights.as_ref().filter(|w| w.is_zero_one()) {
        match (exact_count_weighted_with_budget(margins, w, c.budget), brute_force_count(margins, Some(w))) {
            (Ok(a), Ok(b)) => checks.record(
                "pattern_dp_matches_brute_force",
                a.value == b.value,
                json!({"dp": a.value.to_str_radix(10), "brute": b.value.to_str_radix(10)}),
            ),
            _ => checks.skip("pattern_dp_matches_brute_force", "oracle budget exceeded".into()),
        }
    }

    let mpp = max_product_point(margins, c.solver())?;
    let vol = volume_bounds(margins, &mpp);
    if margins.polytope_dim() == 0 {
        checks.skip("volume_sandwich", "polytope is a point".into());
    } else {
        match ehrhart_volume_with_budget(margins, c.budget) {
            Ok(ev) => {
                let ln_vol = ev.euclidean_volume.ln();
                checks.record(
                    "ehrhart_certificate",
                    ev.certified,
                    json!({"degree": ev.degree}),
                );
                checks.record(
                    "volume_sandwich",
                    vol.log_lower <= ln_vol && ln_vol <= vol.log_upper,
                    json!({"log_lower": vol.log_lower, "log_volume": ln_vol, "log_upper": vol.log_upper}),
                );
            }
            Err(Error::BudgetExceeded { estimate, .. }) => {
                checks.skip("volume_sandwich", format!("dilation estimate {estimate:e} exceeds budget"))
            }
            Err(e) => return Err(e.into()),
        }
    }

    let mn = margins.m() * margins.n();
    if mn <= 16 || force_integral {
        let est = mc_integral_phi(margins, &ones, c.samples, c.seed)?;
        let ib = integral_count_bounds(margins, &est);
        match &exact {
            Some(e) => {
                let ln_exact = e.ln_value();
                let slack = 3.0 * ib.log_uncertainty;
                checks.record(
                    "integral_sandwich",
                    ib.log_lower - slack <= ln_exact && ln_exact <= ib.log_upper + slack,
                    json!({
                        "log_lower": ib.log_lower,
                        "log_exact": ln_exact,
                        "log_upper": ib.log_upper,
                        "stderr_log": ib.log_uncertainty,
                        "samples": est.samples,
                        "seed": est.seed,
                    }),
                );
            }
            None => checks.skip("integral_sandwich", "no exact count available".into()),
        }
    } else {
        checks.skip("integral_sandwich", format!("mn = {mn} > 16; pass --integral to force"));
    }

    let att = attraction_report(margins, &sol)?;
    let residual = (att.attraction_coeff - att.g_gap - att.entropy_gap).abs();
    checks.record(
        "attraction_decomposition",
        residual <= 1e-6 && att.g_gap >= -1e-9 && att.entropy_gap >= -1e-9,
        json!({"residual": residual, "g_gap": att.g_gap, "entropy_gap": att.entropy_gap}),
    );

    let code = if checks.failed { 1 } else { 0 };
    let mut map = header(&problem);
    map.insert("passed".into(), json!(!checks.failed));
    map.insert("checks".into(), Value::Array(checks.list));
    Ok((Value::Object(map), code))
}

fn render(report: &Value, format: Format) -> String {
    match format {
        Format::Json => {
            let mut s = serde_json::to_string(report).expect("json");
            s.push('\n');
            s
        }
        Format::Csv => {
            let mut s = String::from("quantity,value\n");
            for (k, v) in flatten(report) {
                s.push_str(&csv_field(&k));
                s.push(',');
                s.push_str(&csv_field(&v));
                s.push('\n');
            }
            s
        }
        Format::Text => {
            let rows = flatten(report);
            let width = rows.iter().map(|(k, _)| k.chars().count()).max().unwrap_or(0);
            rows.into_iter()
                .map(|(k, v)| format!("{k:<width$}  {v}\n"))
                .collect()
        }
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// One `(dotted.key, value)` pair per scalar.
fn flatten(v: &Value) -> Vec<(String, String)> {
    fn go(prefix: &str, v: &Value, out: &mut Vec<(String, String)>) {
        let key = |k: &str| if prefix.is_empty() { k.to_string() } else { format!("{prefix}.{k}") };
        match v {
            Value::Object(map) => map.iter().for_each(|(k, x)| go(&key(k), x, out)),
            Value::Array(items) if items.iter().all(|x| !x.is_object() && !x.is_array()) => {
                let joined: Vec<String> = items.iter().map(scalar).collect();
                out.push((prefix.to_string(), joined.join(" ")));
            }
            Value::Array(items) => items.iter().enumerate().for_each(|(i, x)| go(&key(&i.to_string()), x, out)),
            other => out.push((prefix.to_string(), scalar(other))),
        }
    }
    let mut out = Vec::new();
    go("", v, &mut out);
    out
}

fn scalar(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}
