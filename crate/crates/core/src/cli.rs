//! Command-line front end.
//!
//! Exit status: 0 on success, 1 when a verification tolerance is exceeded,
//! 2 for configuration and resource errors, 3 for numerical failures.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::config::{self, ScenarioConfig};
use crate::error::{Error, Result};
use crate::experiments::{self, FigureId, FigureOptions};
use crate::market::ScenarioTree;
use crate::numeric::fmt_sci;
use crate::output;
use crate::pricing::{solve, SolutionMode};
use crate::verify::{verify_scenario, VerificationReport};

/// Overrides the default output directory.
pub const OUT_DIR_ENV: &str = "EQPRICE_OUT_DIR";

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "eqprice", version, about = "Equilibrium derivative prices on a regime-switching lattice")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve a scenario and write one node table per mode.
    Solve(ScenarioArgs),
    /// Run the oracle and identity checks on a scenario.
    Verify(ScenarioArgs),
    /// Generate the data behind a built-in figure.
    Figure(FigureArgs),
    /// Solve several scenarios and tabulate their root prices.
    Sweep(SweepArgs),
    /// Print a built-in scenario as a config file.
    Template {
        /// Figure id, e.g. fig6.
        figure: String,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Consistent,
    Inconsistent,
    Both,
}

impl ModeArg {
    fn modes(self) -> Vec<SolutionMode> {
        match self {
            ModeArg::Consistent => vec![SolutionMode::Consistent],
            ModeArg::Inconsistent => vec![SolutionMode::Inconsistent],
            ModeArg::Both => SolutionMode::BOTH.to_vec(),
        }
    }
}

#[derive(Debug, Args)]
pub struct Overrides {
    /// Regime risk aversions, comma separated, one per declared state.
    #[arg(long, value_delimiter = ',')]
    pub gamma: Option<Vec<f64>>,
    /// Transition matrix rows separated by `;`, entries by `,`.
    #[arg(long)]
    pub transition: Option<String>,
    /// Maximum number of path-nodes the lattice may hold.
    #[arg(long)]
    pub path_cap: Option<u64>,
}

#[derive(Debug, Args)]
pub struct ScenarioArgs {
    /// Scenario file or built-in figure id.
    pub target: Option<String>,
    #[arg(long, conflicts_with_all = ["target", "figure"])]
    pub scenario: Option<PathBuf>,
    #[arg(long, conflicts_with = "target")]
    pub figure: Option<String>,
    /// Defaults to the modes listed in the scenario.
    #[arg(long, value_enum)]
    pub mode: Option<ModeArg>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub overrides: Overrides,
}

#[derive(Debug, Args)]
pub struct FigureArgs {
    /// Figure id, e.g. fig9 or fig9_regime.
    pub target: Option<String>,
    #[arg(long, conflicts_with = "target")]
    pub figure: Option<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value_t = experiments::DEFAULT_SEED)]
    pub seed: u64,
    /// Relative risk-aversion increase of the second regime.
    #[arg(long, default_value_t = experiments::DEFAULT_GAMMA_SHIFT)]
    pub gamma_shift: f64,
    /// Replaces the risk-aversion sweep.
    #[arg(long, value_delimiter = ',')]
    pub gamma: Option<Vec<f64>>,
    #[arg(long)]
    pub transition: Option<String>,
    #[arg(long)]
    pub path_cap: Option<u64>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Scenario files or built-in figure ids.
    #[arg(required = true)]
    pub targets: Vec<String>,
    #[arg(long, value_enum)]
    pub mode: Option<ModeArg>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub path_cap: Option<u64>,
}

/// Parses `a,b;c,d` into matrix rows.
pub fn parse_matrix(text: &str) -> Result<Vec<Vec<f64>>> {
    text.split(';')
        .map(|row| {
            row.split(',')
                .map(|x| {
                    x.trim()
                        .parse::<f64>()
                        .map_err(|e| Error::Config(format!("bad transition entry `{x}`: {e}")))
                })
                .collect()
        })
        .collect()
}

/// Reads, validates and expands a scenario file, so that node-level guards
/// (step admissibility, positivity, path cap) surface here.
pub fn parse_config(path: &Path) -> Result<ScenarioConfig> {
    let cfg = config::load(path)?;
    ScenarioTree::build(&cfg)?;
    Ok(cfg)
}

fn resolve_target(target: &str) -> Result<ScenarioConfig> {
    let path = Path::new(target);
    if path.extension().is_some_and(|e| e == "toml") || path.exists() {
        config::load(path)
    } else {
        Ok(experiments::scenario(target.parse::<FigureId>()?))
    }
}

fn apply_overrides(cfg: &mut ScenarioConfig, o: &Overrides) -> Result<()> {
    if let Some(g) = &o.gamma {
        if g.len() != cfg.chain.states.len() {
            return Err(Error::Config(format!(
                "--gamma needs {} values, got {}",
                cfg.chain.states.len(),
                g.len()
            )));
        }
        cfg.chain.gamma = g.clone();
    }
    if let Some(t) = &o.transition {
        cfg.chain.transition = parse_matrix(t)?;
    }
    if o.path_cap.is_some() {
        cfg.grid.path_cap = o.path_cap;
    }
    Ok(())
}

fn scenario_from(args: &ScenarioArgs) -> Result<ScenarioConfig> {
    let mut cfg = match (&args.target, &args.scenario, &args.figure) {
        (_, Some(p), _) => config::load(p)?,
        (_, _, Some(f)) => experiments::scenario(f.parse::<FigureId>()?),
        (Some(t), _, _) => resolve_target(t)?,
        _ => {
            return Err(Error::Config(
                "give a scenario file or figure id (positional, --scenario or --figure)".into(),
            ))
        }
    };
    apply_overrides(&mut cfg, &args.overrides)?;
    if let Some(m) = args.mode {
        cfg.run.modes = m.modes();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn out_dir(flag: &Option<PathBuf>) -> PathBuf {
    flag.clone()
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."))
}

fn file_stem(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}

fn cmd_solve(args: &ScenarioArgs) -> Result<i32> {
    let cfg = scenario_from(args)?;
    let tree = ScenarioTree::build(&cfg)?;
    let dir = out_dir(&args.out);
    for mode in &cfg.run.modes {
        let sol = solve(&tree, *mode)?;
        let path = dir.join(format!("{}.{}.csv", file_stem(&cfg.name), mode));
        output::write_atomic(&path, &output::solution_csv(&tree, &sol)?)?;
        for root in tree.lattice().roots() {
            println!(
                "{} {} initial_regime={} price={} alpha={}",
                cfg.name,
                mode,
                tree.regime_string(*root),
                fmt_sci(sol.price(*root)),
                sol.alpha(*root).map(fmt_sci).unwrap_or_default()
            );
        }
        println!("wrote {}", path.display());
    }
    Ok(EXIT_OK)
}

fn report_status(report: &VerificationReport) -> i32 {
    if report.passes() {
        EXIT_OK
    } else {
        EXIT_CHECK_FAILED
    }
}

fn cmd_verify(args: &ScenarioArgs) -> Result<i32> {
    let cfg = scenario_from(args)?;
    let report = verify_scenario(&cfg)?;
    print!("{}", report.to_text());
    if let Some(dir) = args.out.clone().or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from)) {
        let path = dir.join(format!("{}.verify.csv", file_stem(&cfg.name)));
        output::write_atomic(&path, &output::report_csv(std::slice::from_ref(&report))?)?;
    }
    Ok(report_status(&report))
}

/// Scenarios a figure is checked on before its data is written.
fn figure_check_scenarios(id: FigureId, opts: &FigureOptions) -> Result<Vec<ScenarioConfig>> {
    let mut cfg = experiments::scenario(id);
    if opts.path_cap.is_some() {
        cfg.grid.path_cap = opts.path_cap;
    }
    if id != FigureId::Regime {
        return Ok(vec![cfg]);
    }
    let transition = opts.transition.clone().unwrap_or_else(|| cfg.chain.transition.clone());
    let base = cfg.chain.gamma[0];
    Ok(["bull", "bear"]
        .into_iter()
        .map(|start| {
            let mut c = cfg.clone();
            c.chain = experiments::regime_chain(base, opts.gamma_shift, &transition, start);
            c.name = format!("{}_{start}", cfg.name);
            c
        })
        .collect())
}

fn cmd_figure(args: &FigureArgs) -> Result<i32> {
    let name = args
        .figure
        .as_ref()
        .or(args.target.as_ref())
        .ok_or_else(|| Error::Config("give a figure id".into()))?;
    let id: FigureId = name.parse()?;
    let opts = FigureOptions {
        seed: args.seed,
        gamma_shift: args.gamma_shift,
        gammas: args.gamma.clone(),
        transition: args.transition.as_deref().map(parse_matrix).transpose()?,
        path_cap: args.path_cap,
    };
    if let Some(g) = &opts.gammas {
        if g.iter().any(|x| !(*x > 0.0 && x.is_finite())) {
            return Err(Error::Config("--gamma values must be positive".into()));
        }
    }
    for cfg in figure_check_scenarios(id, &opts)? {
        cfg.validate()?;
        let report = verify_scenario(&cfg)?;
        if !report.passes() {
            eprint!("{}", report.to_text());
            eprintln!("error[check-failed]: {} did not pass verification; no figure written", cfg.name);
            return Ok(EXIT_CHECK_FAILED);
        }
    }
    let dir = out_dir(&args.out);
    for table in experiments::run_figure(id, &opts)? {
        let csv_path = dir.join(format!("{}.csv", table.name));
        output::write_atomic(&csv_path, &output::figure_csv(&table)?)?;
        let prov_path = dir.join(format!("{}.provenance.txt", table.name));
        output::write_atomic(&prov_path, output::provenance_text(&table).as_bytes())?;
        println!("wrote {}", csv_path.display());
    }
    Ok(EXIT_OK)
}

fn cmd_sweep(args: &SweepArgs) -> Result<i32> {
    let mut rows = Vec::new();
    for target in &args.targets {
        let mut cfg = resolve_target(target)?;
        if args.path_cap.is_some() {
            cfg.grid.path_cap = args.path_cap;
        }
        if let Some(m) = args.mode {
            cfg.run.modes = m.modes();
        }
        cfg.validate()?;
        let tree = ScenarioTree::build(&cfg)?;
        for mode in &cfg.run.modes {
            let sol = solve(&tree, *mode)?;
            for root in tree.lattice().roots() {
                rows.push(vec![
                    cfg.name.clone(),
                    mode.to_string(),
                    tree.regime_string(*root),
                    fmt_sci(sol.price(*root)),
                    sol.alpha(*root).map(fmt_sci).unwrap_or_default(),
                ]);
            }
        }
    }
    let path = out_dir(&args.out).join("sweep.csv");
    let bytes = output::table_csv(&["scenario", "mode", "initial_regime", "price", "alpha"], rows)?;
    output::write_atomic(&path, &bytes)?;
    println!("wrote {}", path.display());
    Ok(EXIT_OK)
}

fn cmd_template(figure: &str) -> Result<i32> {
    let cfg = experiments::scenario(figure.parse()?);
    print!("{}", cfg.to_toml()?);
    Ok(EXIT_OK)
}

pub fn dispatch(cli: &Cli) -> Result<i32> {
    match &cli.command {
        Command::Solve(a) => cmd_solve(a),
        Command::Verify(a) => cmd_verify(a),
        Command::Figure(a) => cmd_figure(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Template { figure } => cmd_template(figure),
    }
}

/// Parses arguments, runs the command and returns the process exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    match dispatch(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error[{}]: {e}", e.code());
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matrix_rows_parse() {
        assert_eq!(
            parse_matrix("0.8,0.2;0.3, 0.7").unwrap(),
            vec![vec![0.8, 0.2], vec![0.3, 0.7]]
        );
        assert!(parse_matrix("0.8,x").is_err());
    }

    #[test]
    fn flags_parse() {
        let cli = Cli::try_parse_from([
            "eqprice", "figure", "fig9", "--gamma-shift", "0.3", "--transition", "0.9,0.1;0.2,0.8",
        ])
        .unwrap();
        match cli.command {
            Command::Figure(f) => {
                assert_eq!(f.gamma_shift, 0.3);
                assert_eq!(f.seed, 42);
                assert_eq!(f.target.as_deref(), Some("fig9"));
            }
            other => panic!("{other:?}"),
        }
        let cli = Cli::try_parse_from(["eqprice", "solve", "--figure", "fig8", "--mode", "both"]).unwrap();
        assert!(matches!(cli.command, Command::Solve(_)));
        assert!(Cli::try_parse_from(["eqprice", "solve", "x.toml", "--figure", "fig8"]).is_err());
    }

    #[test]
    fn gamma_override_must_match_states() {
        let mut cfg = experiments::scenario(FigureId::Regime);
        let o = Overrides {
            gamma: Some(vec![0.5]),
            transition: None,
            path_cap: None,
        };
        assert!(apply_overrides(&mut cfg, &o).is_err());
    }

    #[test]
    fn unknown_mode_is_a_usage_error() {
        assert_eq!(run(["eqprice", "solve", "fig6", "--mode", "sideways"]), EXIT_CONFIG);
    }
}
