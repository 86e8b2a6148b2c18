//! `concentric` — fits K concentric ellipses to CSV point clouds with five
//! algebraic methods, reproduces the Monte Carlo benchmarks, and emits
//! theoretical bias scans.
//!
//! Exit codes: 0 success, 2 input error, 3 numerical failure.

mod input;
mod report;

use clap::{Args, Parser, Subcommand};
use concentric_core::error_analysis::bias_scan;
use concentric_core::estimators::{fit_selected, Method};
use concentric_core::simulation::{
    experiment_preset, monte_carlo, scan_family, true_scene, NoiseModel, Scenario,
};
use report::num;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "concentric", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit concentric ellipses to a `x,y,ring` CSV file.
    Fit(FitArgs),
    /// Run a seeded Monte Carlo benchmark and emit metrics as CSV.
    Simulate(SimulateArgs),
    /// Sweep the theoretical second-order bias over a scenario family.
    BiasScan(BiasScanArgs),
}

#[derive(Args)]
struct FitArgs {
    /// Input CSV with header `x,y,ring` (1-based contiguous ring indices).
    input: PathBuf,
    /// Coordinate scale factor.
    #[arg(long, default_value_t = 100.0)]
    f0: f64,
    /// Comma-separated methods (ls, oleary, taubin, semi-hyper, hyper).
    #[arg(long, value_delimiter = ',')]
    methods: Vec<String>,
    /// Print the JSON document instead of the human table.
    #[arg(long)]
    json: bool,
    /// Also write the JSON document to this path.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    /// Experiment preset: exp1 (long arcs) or exp2 (short arcs).
    #[arg(long)]
    preset: String,
    /// Noise levels; repeat the flag for a grid.
    #[arg(long)]
    sigma: Vec<f64>,
    /// Monte Carlo runs per noise level.
    #[arg(long)]
    runs: Option<usize>,
    /// Base seed; run b draws from seed + b.
    #[arg(long, default_value_t = 12345)]
    seed: u64,
    #[arg(long, value_delimiter = ',')]
    methods: Vec<String>,
    /// Coordinate scale override.
    #[arg(long)]
    f0: Option<f64>,
    /// Output CSV path (stdout when omitted).
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct BiasScanArgs {
    /// Scenario family: scenario1, scenario2, scenario3-high, scenario3-low.
    #[arg(long)]
    preset: String,
    #[arg(long, value_delimiter = ',')]
    methods: Vec<String>,
    /// Grid resolution over the family's sweep range.
    #[arg(long)]
    points: Option<usize>,
    /// Output CSV path (stdout when omitted).
    #[arg(long)]
    output: Option<PathBuf>,
}

enum CliError {
    Input(String),
    Numerical(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Input(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Input(m) | CliError::Numerical(m) => m,
        }
    }
}

fn parse_methods(raw: &[String]) -> Result<Vec<Method>, CliError> {
    if raw.is_empty() {
        return Ok(Method::ALL.to_vec());
    }
    raw.iter()
        .map(|s| Method::parse(s).ok_or_else(|| CliError::Input(format!("unknown method `{s}`"))))
        .collect()
}

fn write_text(path: Option<&PathBuf>, text: &str) -> Result<(), CliError> {
    match path {
        Some(p) => std::fs::write(p, text)
            .map_err(|e| CliError::Input(format!("cannot write {}: {e}", p.display()))),
        None => {
            std::io::stdout()
                .write_all(text.as_bytes())
                .map_err(|e| CliError::Input(format!("stdout: {e}")))?;
            Ok(())
        }
    }
}

fn cmd_fit(args: &FitArgs) -> Result<(), CliError> {
    if !(args.f0 > 0.0 && args.f0.is_finite()) {
        return Err(CliError::Input("f0 must be positive and finite".into()));
    }
    let methods = parse_methods(&args.methods)?;
    let data = input::read_point_file(&args.input, args.f0).map_err(|e| CliError::Input(e.0))?;
    let points = data.total_points();
    let results = fit_selected(&data, &methods).map_err(|e| CliError::Input(e.to_string()))?;
    if results.values().all(|r| r.is_err()) {
        let detail: Vec<String> = results
            .iter()
            .map(|(m, r)| format!("{m}: {}", r.as_ref().err().unwrap()))
            .collect();
        return Err(CliError::Numerical(format!(
            "every method failed — {}",
            detail.join("; ")
        )));
    }
    let json = report::fit_json(&results, args.f0, points);
    let json_text = format!("{:#}\n", json);
    if let Some(path) = &args.output {
        write_text(Some(path), &json_text)?;
    }
    if args.json {
        write_text(None, &json_text)?;
    } else {
        write_text(None, &report::fit_table(&results))?;
    }
    Ok(())
}

fn cmd_simulate(args: &SimulateArgs) -> Result<(), CliError> {
    let mut scenario = experiment_preset(&args.preset)
        .ok_or_else(|| CliError::Input(format!("unknown preset `{}`", args.preset)))?;
    if let Some(f0) = args.f0 {
        if !(f0 > 0.0 && f0.is_finite()) {
            return Err(CliError::Input("f0 must be positive and finite".into()));
        }
        scenario.f0 = f0;
    }
    if let Some(runs) = args.runs {
        if runs == 0 {
            return Err(CliError::Input("runs must be at least 1".into()));
        }
        scenario.runs = runs;
    }
    let sigmas = if args.sigma.is_empty() {
        vec![scenario.noise.sigma]
    } else {
        args.sigma.clone()
    };
    if sigmas.iter().any(|s| s.is_nan() || *s < 0.0) {
        return Err(CliError::Input("sigma must be non-negative".into()));
    }
    let methods = parse_methods(&args.methods)?;

    let scene = true_scene(&scenario).map_err(|e| CliError::Input(e.to_string()))?;
    let variance_trace = scene.leading_covariance().trace();

    let mut csv = String::from(
        "sigma,method,nmse,nb,art_seconds,convergence_rate_pct,leading_variance_trace\n",
    );
    for &sigma in &sigmas {
        let scenario = Scenario {
            noise: NoiseModel {
                sigma,
                seed: args.seed,
            },
            ..scenario.clone()
        };
        let reportage =
            monte_carlo(&scenario, &methods).map_err(|e| CliError::Numerical(e.to_string()))?;
        for (method, metrics) in &reportage.per_method {
            csv.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                num(sigma),
                method.name(),
                num(metrics.nmse),
                num(metrics.nb),
                num(metrics.art_seconds),
                num(metrics.convergence_rate),
                num(variance_trace),
            ));
        }
    }
    write_text(args.output.as_ref(), &csv)
}

fn cmd_bias_scan(args: &BiasScanArgs) -> Result<(), CliError> {
    let family = scan_family(&args.preset)
        .ok_or_else(|| CliError::Input(format!("unknown preset `{}`", args.preset)))?;
    let methods = parse_methods(&args.methods)?;
    let grid: Vec<f64> = match args.points {
        None => family.default_grid.clone(),
        Some(n) if n >= 2 => {
            let (lo, hi) = (family.default_grid[0], *family.default_grid.last().unwrap());
            (0..n)
                .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
                .collect()
        }
        Some(_) => return Err(CliError::Input("points must be at least 2".into())),
    };
    let scenes = family
        .scenes(&grid)
        .map_err(|e| CliError::Input(e.to_string()))?;
    let rows = bias_scan(&scenes, &methods);

    let mut csv = String::from("sweep_value");
    for m in &methods {
        csv.push_str(&format!(",bias_{}", m.name().replace('-', "_")));
    }
    csv.push('\n');
    for row in rows {
        csv.push_str(&num(row.value));
        for m in &methods {
            match row.norms[m] {
                Some(norm) => csv.push_str(&format!(",{}", num(norm))),
                None => {
                    eprintln!(
                        "warning: degenerate constraint for {m} at sweep value {}",
                        row.value
                    );
                    csv.push(',');
                }
            }
        }
        csv.push('\n');
    }
    write_text(args.output.as_ref(), &csv)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Fit(args) => cmd_fit(args),
        Command::Simulate(args) => cmd_simulate(args),
        Command::BiasScan(args) => cmd_bias_scan(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}
