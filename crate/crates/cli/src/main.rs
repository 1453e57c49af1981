//! Command-line front end: correlation generation, bound evaluation,
//! threshold searches, state-angle sweeps and reference-table reproduction.
//!
//! Exit codes: 0 on success, 2 when a reproduction target misses its
//! tolerance, 3 on input schema violations.

use std::fs;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use ccbound::ccattack::PreprocessingStrategy;
use ccbound::correlations::{
    apply_detection_efficiency, apply_visibility, chsh_optimal_strategy,
    correlation_from_qubit_strategy, Correlation,
};
use ccbound::localset::max_local_weight;
use ccbound::postselect::optimize_ps;
use ccbound::protocols::{
    any_preprocessing_threshold, named_threshold, two_way_threshold, NoiseKind,
    ScenarioTag, ThresholdStrategy,
};
use ccbound::thresholds::{sweep, SweepStrategy};
use ccbound::twoway::{binned_tripartite_lossy, two_way_bound, EvePostMap};
use ccbound::{Error, StochasticMap};

#[derive(Parser)]
#[command(name = "ccbound", version, about = "Upper bounds on DIQKD key rates from convex-combination eavesdropping")]
struct Cli {
    /// Seed for the heuristic searches; CC_BOUND_SEED overrides the default.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a correlation as JSON (stdout or --output).
    Gen(GenArgs),
    /// Evaluate the one-way (or two-way) bound at one noise point.
    Bound(BoundArgs),
    /// Root-find the critical noise of a named strategy.
    Threshold(ThresholdArgs),
    /// Critical detection efficiency across a grid of state angles (CSV).
    Sweep(SweepArgs),
    /// Reproduce the reference tables and curves (CSV, tolerance-checked).
    Reproduce(ReproduceArgs),
}

#[derive(Args)]
struct CorrelationArgs {
    /// Preset scenario: 2333, 2233, 2322, 2222 or 2422.
    #[arg(long)]
    scenario: Option<String>,
    /// State angle of the partially entangled family (default pi/2).
    #[arg(long)]
    theta: Option<f64>,
    /// Detection efficiency in [0, 1].
    #[arg(long, default_value_t = 1.0)]
    eta: f64,
    /// Visibility in [0, 1].
    #[arg(long, default_value_t = 1.0)]
    visibility: f64,
    /// Externally supplied correlation JSON instead of a preset.
    #[arg(long, conflicts_with = "scenario")]
    input: Option<String>,
}

struct PreparedCorrelation {
    observed: Correlation,
    anchor: Correlation,
}

impl CorrelationArgs {
    /// The noiseless base correlation: preset strategy, tied partial family,
    /// or external file.
    fn base(&self) -> anyhow::Result<Correlation> {
        if let Some(path) = &self.input {
            let text = fs::read_to_string(path)
                .map_err(|e| Error::SchemaViolation(format!("{path}: {e}")))?;
            return Ok(Correlation::from_json(&text)?);
        }
        let tag = ScenarioTag::parse(self.scenario.as_deref().unwrap_or("2333"))?;
        match self.theta {
            None => Ok(correlation_from_qubit_strategy(&tag.ideal_strategy())?),
            Some(theta) => {
                // the tied family re-optimizes the test measurements per eta
                let mut strategy = chsh_optimal_strategy(theta, self.eta)?;
                let want = tag.ideal_strategy().bob_angles.len();
                strategy.bob_angles.truncate(want.min(strategy.bob_angles.len()));
                if tag == ScenarioTag::V2422 {
                    strategy.bob_angles.push(std::f64::consts::FRAC_PI_2);
                }
                Ok(correlation_from_qubit_strategy(&strategy)?)
            }
        }
    }

    /// Observed correlation (noise applied) plus the matching anchor.
    fn prepare(&self) -> anyhow::Result<PreparedCorrelation> {
        let base = self.base()?;
        let noisy = apply_visibility(&base, self.visibility)?;
        if self.eta < 1.0 {
            Ok(PreparedCorrelation {
                observed: apply_detection_efficiency(&noisy, self.eta)?,
                anchor: apply_detection_efficiency(&base, 1.0)?,
            })
        } else {
            Ok(PreparedCorrelation { observed: noisy, anchor: base })
        }
    }
}

#[derive(Args)]
struct GenArgs {
    #[command(flatten)]
    correlation: CorrelationArgs,
    /// Write to a file instead of stdout.
    #[arg(long)]
    output: Option<String>,
}

#[derive(Args)]
struct BoundArgs {
    #[command(flatten)]
    correlation: CorrelationArgs,
    /// Preprocessing: none, det, det-np, rand, rand-np, announce or
    /// custom:FILE (a serialized strategy).
    #[arg(long, default_value = "det")]
    strategy: String,
    /// Bit-flip strength for the noisy strategies.
    #[arg(long, default_value_t = 0.3)]
    flip_p: f64,
    /// Alice's key setting.
    #[arg(long)]
    key_x: Option<usize>,
    /// Bob's key setting.
    #[arg(long)]
    key_y: Option<usize>,
    /// Evaluate the two-way bound instead of the one-way bound.
    #[arg(long)]
    two_way: bool,
    /// Eve post-map JSON ({"matrix": [[...]]}) for the two-way bound;
    /// defaults to the canonical map.
    #[arg(long)]
    eve_map: Option<String>,
    /// Machine-readable output.
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct ThresholdArgs {
    /// Strategy: none, det, det-np, rand, rand-np, announce or any.
    #[arg(long, default_value = "det")]
    strategy: String,
    /// Preset scenario tag.
    #[arg(long, default_value = "2333")]
    scenario: String,
    /// Noise parameter: eta or visibility (must match the scenario).
    #[arg(long, default_value = "eta")]
    noise: String,
    /// Search the two-way bound instead of the one-way bound.
    #[arg(long)]
    two_way: bool,
    /// Use the permuted Eve map (mixes the correlated symbols).
    #[arg(long)]
    permuted: bool,
    #[arg(long)]
    key_x: Option<usize>,
    #[arg(long)]
    key_y: Option<usize>,
    /// Bisection tolerance.
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    /// Restarts for the any-preprocessing search.
    #[arg(long, default_value_t = 256)]
    restarts: usize,
}

#[derive(Args)]
struct SweepArgs {
    /// Number of state angles between 1e-3 and pi/2.
    #[arg(long, default_value_t = 20)]
    theta_grid: usize,
    /// Comma-separated strategies: det, det-np.
    #[arg(long, default_value = "det,det-np")]
    strategies: String,
}

#[derive(Args)]
struct ReproduceArgs {
    /// Target: table1, fig2 or fig3.
    target: String,
    /// Number of state angles for fig2.
    #[arg(long, default_value_t = 20)]
    theta_grid: usize,
    /// Restarts per optimizer call.
    #[arg(long, default_value_t = 48)]
    restarts: usize,
    /// Efficiency grid for fig3 as lo:hi:step.
    #[arg(long, default_value = "0.67:0.80:0.01")]
    eta_grid: String,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let seed = cli
        .seed
        .or_else(|| std::env::var("CC_BOUND_SEED").ok().and_then(|v| v.parse().ok()))
        .unwrap_or(0);
    match run(cli.command, seed) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            if err.downcast_ref::<Error>().is_some_and(|e| matches!(e, Error::SchemaViolation(_)))
            {
                ExitCode::from(3)
            } else {
                ExitCode::from(1)
            }
        }
    }
}

fn run(command: Command, seed: u64) -> anyhow::Result<ExitCode> {
    match command {
        Command::Gen(args) => {
            let prepared = args.correlation.prepare()?;
            let text = prepared.observed.to_json();
            match args.output {
                Some(path) => fs::write(path, text)?,
                None => println!("{text}"),
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Bound(args) => cmd_bound(args),
        Command::Threshold(args) => cmd_threshold(args, seed),
        Command::Sweep(args) => cmd_sweep(args),
        Command::Reproduce(args) => cmd_reproduce(args, seed),
    }
}

fn parse_strategy(text: &str, flip: f64, alphabet: usize) -> anyhow::Result<PreprocessingStrategy> {
    if let Some(path) = text.strip_prefix("custom:") {
        let body = fs::read_to_string(path)
            .map_err(|e| Error::SchemaViolation(format!("{path}: {e}")))?;
        let strat: PreprocessingStrategy = serde_json::from_str(&body)
            .map_err(|e| Error::SchemaViolation(format!("{path}: {e}")))?;
        return Ok(strat);
    }
    Ok(match text {
        "none" => PreprocessingStrategy::none(alphabet),
        "det" => PreprocessingStrategy::det_bin(alphabet, 0)?,
        "det-np" => PreprocessingStrategy::det_bin_np(alphabet, 0, flip)?,
        "rand" => PreprocessingStrategy::rand_bin(alphabet)?,
        "rand-np" => PreprocessingStrategy::rand_bin_np(alphabet, flip)?,
        "announce" => PreprocessingStrategy::announce_noclick(alphabet)?,
        other => {
            return Err(Error::InvalidParameter(format!(
                "unknown strategy {other}; expected none, det, det-np, rand, rand-np, announce or custom:FILE"
            ))
            .into())
        }
    })
}

#[derive(Deserialize)]
struct EveMapFile {
    matrix: Vec<Vec<f64>>,
}

fn load_eve_map(path: &str) -> anyhow::Result<EvePostMap> {
    let body = fs::read_to_string(path)
        .map_err(|e| Error::SchemaViolation(format!("{path}: {e}")))?;
    let parsed: EveMapFile = serde_json::from_str(&body)
        .map_err(|e| Error::SchemaViolation(format!("{path}: {e}")))?;
    let map = StochasticMap::from_rows(&parsed.matrix)
        .map_err(|e| Error::SchemaViolation(format!("{path}: {e}")))?;
    Ok(EvePostMap(map))
}

fn cmd_bound(args: BoundArgs) -> anyhow::Result<ExitCode> {
    let prepared = args.correlation.prepare()?;
    let scenario = prepared.observed.scenario;
    // default key settings: dedicated pair when Bob has a spare setting
    let key_x = args.key_x.unwrap_or(0);
    let key_y = args
        .key_y
        .unwrap_or(if scenario.settings_b > 2 { 2 } else { 0 });
    let dec = max_local_weight(&prepared.observed, &[prepared.anchor])?;

    if args.two_way {
        let lossy = scenario.outcomes_a == 3 && scenario.outcomes_b == 3;
        let table = if lossy {
            binned_tripartite_lossy(&dec, key_x, key_y, 0, 0)?
        } else {
            ccbound::ccattack::build_tripartite(&dec, key_x, key_y)?.joint
        };
        let map = match &args.eve_map {
            Some(path) => load_eve_map(path)?,
            None => {
                let symbols = *table.shape().last().expect("tripartite table");
                if symbols == 5 {
                    EvePostMap::canonical()
                } else {
                    EvePostMap::identity(symbols)
                }
            }
        };
        let value = two_way_bound(&table, &map)?;
        if args.json {
            println!(
                "{}",
                serde_json::json!({
                    "local_weight": dec.local_weight,
                    "two_way_bound": value,
                    "key_settings": [key_x, key_y],
                })
            );
        } else {
            println!("local weight      {:.9}", dec.local_weight);
            println!("two-way bound     {:+.9}", value);
        }
        return Ok(ExitCode::SUCCESS);
    }

    let strat = parse_strategy(&args.strategy, args.flip_p, scenario.outcomes_a)?;
    let report = ccbound::protocols::report_from_decomposition(&dec, &strat, (key_x, key_y))?;
    if args.json {
        println!(
            "{}",
            serde_json::json!({
                "local_weight": report.local_weight,
                "ec": report.ec,
                "pa": report.pa,
                "bound": report.bound,
                "strategy": strat.name,
                "key_settings": [key_x, key_y],
                "feasible_at_tolerance": report.feasible_at_tolerance,
            })
        );
    } else {
        println!("strategy          {}", strat.name);
        println!("local weight      {:.9}", report.local_weight);
        println!("error correction  {:.9}", report.ec);
        println!("privacy budget    {:.9}", report.pa);
        println!("bound             {:+.9}", report.bound);
        if report.feasible_at_tolerance {
            println!("warning: decomposition feasible only at relaxed tolerance");
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_threshold(args: ThresholdArgs, seed: u64) -> anyhow::Result<ExitCode> {
    let tag = ScenarioTag::parse(&args.scenario)?;
    let expected_noise = match tag.noise_kind() {
        NoiseKind::Efficiency => "eta",
        NoiseKind::Visibility => "visibility",
    };
    if args.noise != expected_noise {
        return Err(Error::InvalidParameter(format!(
            "scenario {} sweeps {expected_noise}, not {}",
            args.scenario, args.noise
        ))
        .into());
    }
    let key = match (args.key_x, args.key_y) {
        (Some(x), Some(y)) => (x, y),
        _ => tag.default_key_settings(),
    };
    let value = if args.two_way {
        let map = if args.permuted { EvePostMap::permuted() } else { EvePostMap::canonical() };
        two_way_threshold(tag, key, &map, (0, 0), args.tol)?
    } else if args.strategy == "any" {
        any_preprocessing_threshold(tag, key, seed, args.restarts)?.threshold
    } else {
        named_threshold(tag, ThresholdStrategy::parse(&args.strategy)?, key, args.tol)?
    };
    println!("{value:.6}");
    Ok(ExitCode::SUCCESS)
}

fn parse_sweep_strategies(text: &str) -> anyhow::Result<Vec<SweepStrategy>> {
    text.split(',')
        .map(|s| match s.trim() {
            "det" => Ok(SweepStrategy::DetBin),
            "det-np" => Ok(SweepStrategy::DetBinNpLimit),
            other => Err(Error::InvalidParameter(format!(
                "unknown sweep strategy {other}; expected det or det-np"
            ))
            .into()),
        })
        .collect()
}

fn theta_grid(points: usize) -> Vec<f64> {
    let lo = 1e-3;
    let hi = std::f64::consts::FRAC_PI_2;
    (0..points)
        .map(|i| lo + (hi - lo) * (i as f64) / (points.max(2) - 1) as f64)
        .collect()
}

fn cmd_sweep(args: SweepArgs) -> anyhow::Result<ExitCode> {
    let strategies = parse_sweep_strategies(&args.strategies)?;
    let rows = sweep(&theta_grid(args.theta_grid), &strategies)?;
    println!("theta,strategy,eta_crit,phiA,bound_at_crit_plus_eps");
    for row in rows {
        println!(
            "{:.6},{},{:.6},{:.6},{:.3e}",
            row.theta, row.strategy, row.eta_crit, row.phi_a, row.bound_above
        );
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_reproduce(args: ReproduceArgs, seed: u64) -> anyhow::Result<ExitCode> {
    match args.target.as_str() {
        "table1" => reproduce_table1(seed, args.restarts),
        "fig2" => {
            let rows = sweep(
                &theta_grid(args.theta_grid),
                &[SweepStrategy::DetBin, SweepStrategy::DetBinNpLimit],
            )?;
            println!("theta,strategy,eta_crit,phiA,bound_at_crit_plus_eps");
            for row in rows {
                println!(
                    "{:.6},{},{:.6},{:.6},{:.3e}",
                    row.theta, row.strategy, row.eta_crit, row.phi_a, row.bound_above
                );
            }
            Ok(ExitCode::SUCCESS)
        }
        "fig3" => {
            let parts: Vec<f64> = args
                .eta_grid
                .split(':')
                .map(|v| v.parse::<f64>())
                .collect::<Result<_, _>>()
                .map_err(|e| Error::InvalidParameter(format!("bad eta grid: {e}")))?;
            let [lo, hi, step] = parts[..] else {
                return Err(Error::InvalidParameter("eta grid must be lo:hi:step".into()).into());
            };
            println!("eta,theta,q,bound");
            let mut eta = lo;
            while eta <= hi + 1e-12 {
                let best = optimize_ps(eta, seed, args.restarts)?;
                println!("{:.4},{:.6},{:.6},{:+.6e}", eta, best.theta, best.accept, best.bound);
                eta += step;
            }
            Ok(ExitCode::SUCCESS)
        }
        other => Err(Error::InvalidParameter(format!(
            "unknown reproduction target {other}; expected table1, fig2 or fig3"
        ))
        .into()),
    }
}

/// One tolerance-checked cell of the reference table.
struct Cell {
    label: &'static str,
    value: f64,
    target_pct: f64,
    tol_pct: f64,
}

fn reproduce_table1(seed: u64, restarts: usize) -> anyhow::Result<ExitCode> {
    let mut cells: Vec<Cell> = Vec::new();
    let tol = 1e-6;
    let mut push = |label: &'static str, value: f64, target: f64, tol_pct: f64| {
        cells.push(Cell { label, value, target_pct: target, tol_pct });
    };

    // visibility rows
    let v2322 = ScenarioTag::V2322;
    let tw = two_way_threshold(v2322, (0, 2), &EvePostMap::canonical(), (0, 0), tol)?;
    push("2322 two-way", tw, 74.45, 0.02);
    let any = any_preprocessing_threshold(v2322, (0, 2), seed, restarts)?.threshold;
    push("2322 any", any, 80.85, 0.05);
    let noisy = named_threshold(v2322, ThresholdStrategy::DetBinNpLimit, (0, 2), tol)?;
    push("2322 noisy", noisy, 80.85, 0.02);
    let none = named_threshold(v2322, ThresholdStrategy::None, (0, 2), tol)?;
    push("2322 none", none, 83.00, 0.02);
    let row_2322 = (tw, any, noisy, none);

    let v2222 = ScenarioTag::V2222;
    // table prints 78.40 while the closed form is 78.36; accept the formula
    let tw = two_way_threshold(v2222, (0, 0), &EvePostMap::canonical(), (0, 0), tol)?;
    push("2222 two-way", tw, 78.36, 0.10);
    let any = any_preprocessing_threshold(v2222, (0, 0), seed, restarts)?.threshold;
    push("2222 any", any, 88.52, 0.05);
    let noisy = named_threshold(v2222, ThresholdStrategy::DetBinNpLimit, (0, 0), tol)?;
    push("2222 noisy", noisy, 88.52, 0.02);
    let none = named_threshold(v2222, ThresholdStrategy::None, (0, 0), tol)?;
    push("2222 none", none, 90.61, 0.02);
    let row_2222 = (tw, any, noisy, none);

    // efficiency rows
    let l2333 = ScenarioTag::L2333;
    let tw = two_way_threshold(l2333, (0, 2), &EvePostMap::canonical(), (0, 0), tol)?;
    push("2333 two-way", tw, 85.36, 0.02);
    let any = any_preprocessing_threshold(l2333, (0, 2), seed, restarts)?.threshold;
    push("2333 any", any, 85.36, 0.05);
    let noisy = named_threshold(l2333, ThresholdStrategy::DetBinNpLimit, (0, 2), tol)?;
    push("2333 noisy", noisy, 88.52, 0.02);
    let none = named_threshold(l2333, ThresholdStrategy::DetBin, (0, 2), tol)?;
    push("2333 none", none, 89.16, 0.02);
    let row_2333 = (tw, any, noisy, none);

    let l2233 = ScenarioTag::L2233;
    let tw = two_way_threshold(l2233, (0, 0), &EvePostMap::canonical(), (0, 0), tol)?;
    push("2233 two-way", tw, 87.87, 0.02);
    let any = any_preprocessing_threshold(l2233, (0, 0), seed, restarts)?.threshold;
    push("2233 any", any, 92.64, 0.05);
    let noisy = named_threshold(l2233, ThresholdStrategy::DetBinNpLimit, (0, 0), tol)?;
    push("2233 noisy", noisy, 93.59, 0.02);
    let none = named_threshold(l2233, ThresholdStrategy::DetBin, (0, 0), tol)?;
    push("2233 none", none, 94.80, 0.02);
    let row_2233 = (tw, any, noisy, none);

    // literature reference columns (advantage distillation and one-way
    // Devetak-Winter thresholds from prior security analyses); static
    // values, never computed here
    println!("section,scenario,cc_two_way,lit_ad,cc_any,cc_noisy,lit_dw_noisy,cc_none,lit_dw_none");
    let pct = |v: f64| 100.0 * v;
    println!(
        "visibility,2322,{:.2},88.0,{:.2},{:.2},83.83,{:.2},85.70",
        pct(row_2322.0),
        pct(row_2322.1),
        pct(row_2322.2),
        pct(row_2322.3)
    );
    println!(
        "visibility,2222,{:.2},84.6,{:.2},{:.2},92.38,{:.2},93.76",
        pct(row_2222.0),
        pct(row_2222.1),
        pct(row_2222.2),
        pct(row_2222.3)
    );
    println!(
        "efficiency,2333,{:.2},93.7,{:.2},{:.2},90.30,{:.2},90.78",
        pct(row_2333.0),
        pct(row_2333.1),
        pct(row_2333.2),
        pct(row_2333.3)
    );
    println!(
        "efficiency,2233,{:.2},91.7,{:.2},{:.2},95.84,{:.2},96.62",
        pct(row_2233.0),
        pct(row_2233.1),
        pct(row_2233.2),
        pct(row_2233.3)
    );
    println!("# lossy 'none'/'noisy' columns assume deterministic no-click binning");
    println!("# 2222 two-way: closed form 78.36 vs rounded table value 78.40");

    let mut failed = false;
    for cell in &cells {
        let diff = (100.0 * cell.value - cell.target_pct).abs();
        if diff > cell.tol_pct {
            eprintln!(
                "tolerance failure: {} = {:.4}% vs {:.2}% (allowed {:.2})",
                cell.label,
                100.0 * cell.value,
                cell.target_pct,
                cell.tol_pct
            );
            failed = true;
        }
    }
    Ok(if failed { ExitCode::from(2) } else { ExitCode::SUCCESS })
}
