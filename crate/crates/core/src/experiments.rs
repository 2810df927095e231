//! Built-in weather-derivative scenarios and figure-data generators.
//!
//! The base market: an energy price `C` (traded) and a normalized
//! temperature `S` (not traded), both starting at 10, with `h = 0.3`,
//! `ρ = 0.5`, `μᶜ = 0.1`, `σᶜ = 0.2`, `μˢ = 0.3`, `σˢ = 0.5`, a call on
//! temperature struck at 10, a three-factor walk and the arctan market
//! price of risk `r² = arctan(S) + π/2`.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::{ChainConfig, GridConfig, InitialLevels, InitialRegime, RunConfig, ScenarioConfig};
use crate::error::{Error, Result};
use crate::lattice::ShockVector;
use crate::market::{
    evolve_forward, Coefficient, CoefficientSpec, Dividend, ForwardState, IncomeSpec, IncomeTerm,
    MprTemplate, Payoff, RegimeCondition, ShockCondition, Underlying,
};
use crate::pricing::{indifference_price_at, solve, SolutionMode};
use crate::market::ScenarioTree;

pub const STEP_LENGTH: f64 = 0.3;
pub const STRIKE: f64 = 10.0;
pub const DIMENSION: usize = 3;
/// Risk aversion used by the single-period comparison figures.
pub const BASE_GAMMA: f64 = 0.7;
pub const DEFAULT_SEED: u64 = 42;
pub const PATH_STEPS: usize = 20;
/// Relative risk-aversion increase of the second regime in the regime figure.
pub const DEFAULT_GAMMA_SHIFT: f64 = 0.2;
pub const DEFAULT_TRANSITION: [[f64; 2]; 2] = [[0.8, 0.2], [0.3, 0.7]];
pub const REGIME_BASE_GAMMA: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FigureId {
    Paths,
    EquilibriumVsIndifference,
    GammaSweep,
    Unspanned,
    TwoPeriod,
    Regime,
}

impl FigureId {
    pub const ALL: [FigureId; 6] = [
        FigureId::Paths,
        FigureId::EquilibriumVsIndifference,
        FigureId::GammaSweep,
        FigureId::Unspanned,
        FigureId::TwoPeriod,
        FigureId::Regime,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            FigureId::Paths => "fig1_2_paths",
            FigureId::EquilibriumVsIndifference => "fig3_4_5_eq_vs_indiff",
            FigureId::GammaSweep => "fig6_gamma_sweep",
            FigureId::Unspanned => "fig7_unspanned",
            FigureId::TwoPeriod => "fig8_two_period",
            FigureId::Regime => "fig9_regime",
        }
    }

    fn aliases(&self) -> &'static [&'static str] {
        match self {
            FigureId::Paths => &["fig1_2", "fig1", "fig2"],
            FigureId::EquilibriumVsIndifference => &["fig3_4_5", "fig3", "fig4", "fig5"],
            FigureId::GammaSweep => &["fig6"],
            FigureId::Unspanned => &["fig7"],
            FigureId::TwoPeriod => &["fig8"],
            FigureId::Regime => &["fig9"],
        }
    }
}

impl fmt::Display for FigureId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FigureId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        FigureId::ALL
            .into_iter()
            .find(|id| id.name() == s || id.aliases().contains(&s))
            .ok_or_else(|| {
                let known: Vec<&str> = FigureId::ALL.iter().map(|f| f.name()).collect();
                Error::Config(format!("unknown figure `{s}` (known: {})", known.join(", ")))
            })
    }
}

fn base_coefficients() -> CoefficientSpec {
    CoefficientSpec {
        rho: 0.5,
        mu_c: Coefficient::constant(0.1),
        sigma_c: Coefficient::constant(0.2),
        mu_s: Coefficient::constant(0.3),
        sigma_s: Coefficient::constant(0.5),
        mpr_override: Some(MprTemplate::ArctanS),
    }
}

/// `7 exp(−0.5 (S_{t_k} − s) h)`.
pub fn spanned_income(s_index: usize) -> IncomeTerm {
    IncomeTerm::ExpAffineS {
        scale: 7.0,
        rate: -0.5,
        s_index,
    }
}

/// The four-indicator addition over `(Δb¹, Δb³)` at shock step `step`.
pub fn unspanned_income(step: usize) -> Vec<IncomeTerm> {
    [(5.0, 1, 1), (4.0, 1, -1), (2.0, -1, 1), (1.0, -1, -1)]
        .into_iter()
        .map(|(scale, s1, s3)| IncomeTerm::Indicator {
            scale,
            growth: 0.1,
            shocks: vec![
                ShockCondition {
                    step,
                    factor: 1,
                    sign: s1,
                },
                ShockCondition {
                    step,
                    factor: 3,
                    sign: s3,
                },
            ],
            regimes: vec![],
        })
        .collect()
}

/// The regime-keyed addition over `(J₀, Δb³_{t_1})`.
pub fn regime_income() -> Vec<IncomeTerm> {
    [(10.0, "bull", 1), (8.0, "bull", -1), (5.0, "bear", 1), (4.0, "bear", -1)]
        .into_iter()
        .map(|(scale, state, s3)| IncomeTerm::Indicator {
            scale,
            growth: 0.03,
            shocks: vec![ShockCondition {
                step: 1,
                factor: 3,
                sign: s3,
            }],
            regimes: vec![RegimeCondition {
                step: 0,
                state: state.to_string(),
            }],
        })
        .collect()
}

/// The base single-regime market with `steps` periods and no income.
pub fn base_scenario(name: &str, steps: usize, gamma: f64) -> ScenarioConfig {
    ScenarioConfig {
        name: name.to_string(),
        grid: GridConfig {
            steps,
            step_length: STEP_LENGTH,
            dimension: DIMENSION,
            path_cap: None,
        },
        initial: InitialLevels { c: 10.0, s: 10.0 },
        coefficients: base_coefficients(),
        chain: ChainConfig::single("calm", gamma),
        income: IncomeSpec::zero(),
        dividend: Dividend::Zero,
        payoff: Payoff::Call {
            strike: STRIKE,
            underlying: Underlying::S,
        },
        run: RunConfig::default(),
    }
}

/// Two-regime chain with `γ(bear) = (1 + shift) γ(bull)`.
pub fn regime_chain(
    base_gamma: f64,
    shift: f64,
    transition: &[Vec<f64>],
    initial: &str,
) -> ChainConfig {
    ChainConfig {
        states: vec!["bull".into(), "bear".into()],
        gamma: vec![base_gamma, base_gamma * (1.0 + shift)],
        transition: transition.to_vec(),
        initial: InitialRegime::State(initial.to_string()),
    }
}

/// The default configuration behind each figure.
pub fn scenario(id: FigureId) -> ScenarioConfig {
    match id {
        FigureId::Paths | FigureId::EquilibriumVsIndifference => {
            base_scenario(id.name(), 1, BASE_GAMMA)
        }
        FigureId::GammaSweep => {
            let mut cfg = base_scenario(id.name(), 1, BASE_GAMMA);
            cfg.income.terms = vec![spanned_income(1)];
            cfg
        }
        FigureId::Unspanned => {
            let mut cfg = base_scenario(id.name(), 1, BASE_GAMMA);
            cfg.income.terms = vec![spanned_income(1)];
            cfg.income.terms.extend(unspanned_income(0));
            cfg
        }
        FigureId::TwoPeriod => {
            let mut cfg = base_scenario(id.name(), 2, BASE_GAMMA);
            cfg.income.terms = vec![spanned_income(2)];
            cfg.income.terms.extend(unspanned_income(1));
            cfg.run.modes = vec![SolutionMode::Inconsistent];
            cfg
        }
        FigureId::Regime => {
            let mut cfg = base_scenario(id.name(), 2, REGIME_BASE_GAMMA);
            let transition: Vec<Vec<f64>> = DEFAULT_TRANSITION.iter().map(|r| r.to_vec()).collect();
            cfg.chain = regime_chain(REGIME_BASE_GAMMA, DEFAULT_GAMMA_SHIFT, &transition, "bull");
            cfg.income.terms = vec![spanned_income(1)];
            cfg.income.terms.extend(regime_income());
            cfg
        }
    }
}

/// Command-line adjustable knobs.
#[derive(Debug, Clone, PartialEq)]
pub struct FigureOptions {
    pub seed: u64,
    pub gamma_shift: f64,
    /// Replaces the default risk-aversion sweep.
    pub gammas: Option<Vec<f64>>,
    pub transition: Option<Vec<Vec<f64>>>,
    pub path_cap: Option<u64>,
}

impl Default for FigureOptions {
    fn default() -> Self {
        Self {
            seed: DEFAULT_SEED,
            gamma_shift: DEFAULT_GAMMA_SHIFT,
            gammas: None,
            transition: None,
            path_cap: None,
        }
    }
}

/// One CSV worth of figure data.
#[derive(Debug, Clone, PartialEq)]
pub struct FigureTable {
    /// File stem, e.g. `fig6`.
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    pub provenance: Vec<(String, String)>,
}

impl FigureTable {
    fn new(name: &str, columns: &[&str]) -> Self {
        Self {
            name: name.to_string(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
            provenance: Vec::new(),
        }
    }

    fn note(&mut self, key: &str, value: impl fmt::Display) {
        self.provenance.push((key.to_string(), value.to_string()));
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }
}

fn grid_points(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| {
            let x = lo + (hi - lo) * i as f64 / (n - 1) as f64;
            (x * 1e12).round() / 1e12
        })
        .collect()
}

fn default_gammas() -> Vec<f64> {
    (1..=9).map(|i| i as f64 / 10.0).collect()
}

fn root_price(cfg: &ScenarioConfig, mode: SolutionMode) -> Result<f64> {
    let tree = ScenarioTree::build(cfg)?;
    let sol = solve(&tree, mode)?;
    Ok(sol.price(tree.lattice().roots()[0]))
}

fn with_cap(mut cfg: ScenarioConfig, opts: &FigureOptions) -> ScenarioConfig {
    if opts.path_cap.is_some() {
        cfg.grid.path_cap = opts.path_cap;
    }
    cfg
}

fn stamp_base(table: &mut FigureTable, cfg: &ScenarioConfig) {
    table.note("scenario", &cfg.name);
    table.note("steps", cfg.grid.steps);
    table.note("step_length", cfg.grid.step_length);
    table.note("dimension", cfg.grid.dimension);
    table.note("initial_c", cfg.initial.c);
    table.note("initial_s", cfg.initial.s);
    table.note("rho", cfg.coefficients.rho);
    table.note("mu_c", "0.1 (redefined as r*sigma_c under the arctan override)");
    table.note("sigma_c", 0.2);
    table.note("mu_s", 0.3);
    table.note("sigma_s", 0.5);
    table.note("mpr", "r^2 = arctan(S) + pi/2");
    table.note("payoff", "(S_N - 10)^+");
    table.note("dividend", 0);
}

/// Generates every table belonging to a figure.
pub fn run_figure(id: FigureId, opts: &FigureOptions) -> Result<Vec<FigureTable>> {
    match id {
        FigureId::Paths => sample_paths(opts),
        FigureId::EquilibriumVsIndifference => comparison_sweeps(opts),
        FigureId::GammaSweep => gamma_sweep(opts),
        FigureId::Unspanned => unspanned(opts),
        FigureId::TwoPeriod => two_period(opts),
        FigureId::Regime => regime(opts),
    }
}

/// One simulated trajectory of `(C, S)` and the market price of risk.
fn sample_paths(opts: &FigureOptions) -> Result<Vec<FigureTable>> {
    let cfg = scenario(FigureId::Paths);
    let grid = crate::lattice::TimeGrid::new(PATH_STEPS, STEP_LENGTH)?;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut levels = FigureTable::new("fig1", &["step", "time", "C", "S"]);
    let mut mpr = FigureTable::new("fig2", &["step", "time", "S", "mpr"]);
    let mut state = ForwardState {
        c: cfg.initial.c,
        s: cfg.initial.s,
    };
    for n in 0..=PATH_STEPS {
        let location = || format!("simulated step {n}");
        let coeffs = cfg.coefficients.at(n, state, 0, &grid, &location)?;
        levels.rows.push(vec![n as f64, grid.time(n), state.c, state.s]);
        mpr.rows.push(vec![n as f64, grid.time(n), state.s, coeffs.mpr]);
        if n == PATH_STEPS {
            break;
        }
        let signs: Vec<i8> = (0..DIMENSION)
            .map(|_| if rng.gen::<bool>() { 1 } else { -1 })
            .collect();
        let shock = ShockVector::new(&signs)?;
        state = evolve_forward(state, &shock, &coeffs, &grid, &location)?;
    }
    for t in [&mut levels, &mut mpr] {
        stamp_base(t, &cfg);
        t.note("simulated_steps", PATH_STEPS);
        t.note("seed", opts.seed);
        t.note("rng", "ChaCha8, one fair coin per walk component per step");
    }
    Ok(vec![levels, mpr])
}

fn comparison_sweeps(opts: &FigureOptions) -> Result<Vec<FigureTable>> {
    let base = with_cap(scenario(FigureId::EquilibriumVsIndifference), opts);
    let columns = ["equilibrium", "indifference"];
    let point = |cfg: &ScenarioConfig| -> Result<(f64, f64)> {
        let tree = ScenarioTree::build(cfg)?;
        let root = tree.lattice().roots()[0];
        let eq = solve(&tree, SolutionMode::Consistent)?.price(root);
        let indiff = indifference_price_at(&tree, root, 1.0, 0.0)?;
        Ok((eq, indiff))
    };

    let mut fig3 = FigureTable::new("fig3", &["strike", columns[0], columns[1]]);
    for k in grid_points(6.0, 14.0, 17) {
        let mut cfg = base.clone();
        cfg.payoff = Payoff::Call {
            strike: k,
            underlying: Underlying::S,
        };
        let (e, i) = point(&cfg)?;
        fig3.rows.push(vec![k, e, i]);
    }
    let mut fig4 = FigureTable::new("fig4", &["gamma", columns[0], columns[1]]);
    for g in opts.gammas.clone().unwrap_or_else(default_gammas) {
        let mut cfg = base.clone();
        cfg.chain = ChainConfig::single("calm", g);
        let (e, i) = point(&cfg)?;
        fig4.rows.push(vec![g, e, i]);
    }
    let mut fig5 = FigureTable::new("fig5", &["rho", columns[0], columns[1]]);
    for rho in grid_points(-0.8, 0.8, 17) {
        let mut cfg = base.clone();
        cfg.coefficients.rho = rho;
        let (e, i) = point(&cfg)?;
        fig5.rows.push(vec![rho, e, i]);
    }
    for (t, swept) in [(&mut fig3, "strike in [6, 14]"), (&mut fig4, "gamma"), (&mut fig5, "rho in [-0.8, 0.8]")] {
        stamp_base(t, &base);
        t.note("gamma", "0.7 unless swept");
        t.note("income", "none");
        t.note("sweep", swept);
        t.note("sweep_note", "sweep variable chosen by this tool; see README");
        t.note("indifference", "buyer's exponential-utility price of one claim, primary asset only");
    }
    Ok(vec![fig3, fig4, fig5])
}

fn gamma_sweep(opts: &FigureOptions) -> Result<Vec<FigureTable>> {
    let base = with_cap(scenario(FigureId::GammaSweep), opts);
    let mut t = FigureTable::new("fig6", &["gamma", "price"]);
    for g in opts.gammas.clone().unwrap_or_else(default_gammas) {
        let mut cfg = base.clone();
        cfg.chain = ChainConfig::single("calm", g);
        t.rows.push(vec![g, root_price(&cfg, SolutionMode::Consistent)?]);
    }
    stamp_base(&mut t, &base);
    t.note("income", "7 exp(-0.5 (S_1 - s) h)");
    Ok(vec![t])
}

fn spanned_vs_unspanned(
    name: &str,
    base: &ScenarioConfig,
    spanned_terms: usize,
    mode: SolutionMode,
    opts: &FigureOptions,
) -> Result<FigureTable> {
    let mut t = FigureTable::new(name, &["gamma", "spanned", "unspanned"]);
    for g in opts.gammas.clone().unwrap_or_else(default_gammas) {
        let mut full = base.clone();
        full.chain = ChainConfig::single("calm", g);
        let mut spanned = full.clone();
        spanned.income.terms.truncate(spanned_terms);
        t.rows.push(vec![g, root_price(&spanned, mode)?, root_price(&full, mode)?]);
    }
    stamp_base(&mut t, base);
    t.note("mode", mode);
    Ok(t)
}

fn unspanned(opts: &FigureOptions) -> Result<Vec<FigureTable>> {
    let base = with_cap(scenario(FigureId::Unspanned), opts);
    let mut t = spanned_vs_unspanned("fig7", &base, 1, SolutionMode::Consistent, opts)?;
    t.note("income_spanned", "7 exp(-0.5 (S_1 - s) h)");
    t.note("income_unspanned", "spanned + (5, 4, 2, 1) exp(0.1 h) on (db1_0, db3_0) = (+,+), (+,-), (-,+), (-,-)");
    Ok(vec![t])
}

fn two_period(opts: &FigureOptions) -> Result<Vec<FigureTable>> {
    let base = with_cap(scenario(FigureId::TwoPeriod), opts);
    let mut t = spanned_vs_unspanned("fig8", &base, 1, SolutionMode::Inconsistent, opts)?;
    t.note("income_spanned", "7 exp(-0.5 (S_2 - s) h)");
    t.note("income_unspanned", "spanned + (5, 4, 2, 1) exp(0.1 h) on (db1_1, db3_1) = (+,+), (+,-), (-,+), (-,-)");
    Ok(vec![t])
}

fn regime(opts: &FigureOptions) -> Result<Vec<FigureTable>> {
    let base = with_cap(scenario(FigureId::Regime), opts);
    let transition = opts.transition.clone().unwrap_or_else(|| {
        DEFAULT_TRANSITION.iter().map(|r| r.to_vec()).collect()
    });
    let mut t = FigureTable::new(
        "fig9",
        &[
            "gamma_bull",
            "consistent_bull",
            "inconsistent_bull",
            "pct_change_bull",
            "consistent_bear",
            "inconsistent_bear",
            "pct_change_bear",
        ],
    );
    let gammas = opts.gammas.clone().unwrap_or_else(default_gammas);
    for g in &gammas {
        let mut row = vec![*g];
        for start in ["bull", "bear"] {
            let mut cfg = base.clone();
            cfg.chain = regime_chain(*g, opts.gamma_shift, &transition, start);
            cfg.validate()?;
            let consistent = root_price(&cfg, SolutionMode::Consistent)?;
            let inconsistent = root_price(&cfg, SolutionMode::Inconsistent)?;
            row.extend([
                consistent,
                inconsistent,
                100.0 * (consistent - inconsistent) / inconsistent,
            ]);
        }
        t.rows.push(row);
    }
    stamp_base(&mut t, &base);
    t.note("regimes", "bull, bear");
    t.note("gamma_bear", format!("gamma_bull * (1 + {})", opts.gamma_shift));
    t.note("gamma_shift", opts.gamma_shift);
    t.note(
        "transition",
        transition
            .iter()
            .map(|r| r.iter().map(|p| p.to_string()).collect::<Vec<_>>().join(","))
            .collect::<Vec<_>>()
            .join(";"),
    );
    t.note("transition_note", "default rows (0.8, 0.2), (0.3, 0.7) unless overridden");
    t.note("initial_regime", "one series per deterministic initial regime");
    t.note("income", "7 exp(-0.5 (S_1 - s) h) + (10, 8, 5, 4) exp(0.03 h) on (J_0, db3_1) = (bull,+), (bull,-), (bear,+), (bear,-)");
    t.note("pct_change", "100 (consistent - inconsistent) / inconsistent");
    Ok(vec![t])
}
