//! Exogenous model ingredients: the forward processes `C` (traded) and `S`
//! (non-traded), the regime chain driving risk aversion, the market price of
//! risk, the dividend stream, the terminal income and the claim payoff.
//!
//! Coefficients, incomes, dividends and payoffs are drawn from a small closed
//! vocabulary of formula templates so that scenarios stay declarative. The
//! exact semantics of every template are documented on its variant.

use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};

use crate::config::ScenarioConfig;
use crate::error::{Error, Result};
use crate::lattice::{Lattice, NodeId, ShockVector, TimeGrid};

/// Tolerance on transition-row and initial-law sums.
pub const STOCHASTIC_TOL: f64 = 1e-14;

/// Finite-state Markov chain for the market regime, with the risk aversion
/// attached to each state.
#[derive(Debug, Clone, PartialEq)]
pub struct RegimeChain {
    states: Vec<String>,
    transition: Vec<Vec<f64>>,
    initial: Vec<f64>,
    gamma: Vec<f64>,
}

fn check_stochastic(label: &str, row: &[f64], len: usize) -> Result<()> {
    if row.len() != len {
        return Err(Error::Config(format!(
            "{label} has {} entries, expected {len}",
            row.len()
        )));
    }
    if let Some(bad) = row.iter().find(|p| !(p.is_finite() && **p >= 0.0)) {
        return Err(Error::Config(format!(
            "{label} has an invalid probability {bad}"
        )));
    }
    let sum: f64 = row.iter().sum();
    if (sum - 1.0).abs() > STOCHASTIC_TOL {
        return Err(Error::Config(format!(
            "{label} is not stochastic: entries sum to {sum}"
        )));
    }
    Ok(())
}

impl RegimeChain {
    pub fn new(
        states: Vec<String>,
        transition: Vec<Vec<f64>>,
        initial: Vec<f64>,
        gamma: Vec<f64>,
    ) -> Result<Self> {
        let n = states.len();
        if n == 0 {
            return Err(Error::Config("regime chain needs at least one state".into()));
        }
        for (i, s) in states.iter().enumerate() {
            if states[..i].contains(s) {
                return Err(Error::Config(format!("duplicate regime label `{s}`")));
            }
        }
        if transition.len() != n {
            return Err(Error::Config(format!(
                "transition matrix has {} rows, expected {n}",
                transition.len()
            )));
        }
        for (i, row) in transition.iter().enumerate() {
            check_stochastic(&format!("transition row {i} ({})", states[i]), row, n)?;
        }
        check_stochastic("initial regime distribution", &initial, n)?;
        if gamma.len() != n {
            return Err(Error::Config(format!(
                "gamma has {} entries, expected {n}",
                gamma.len()
            )));
        }
        for (s, g) in states.iter().zip(&gamma) {
            if !(g.is_finite() && *g > 0.0) {
                return Err(Error::Config(format!(
                    "risk aversion of regime `{s}` must be positive, got {g}"
                )));
            }
        }
        Ok(Self {
            states,
            transition,
            initial,
            gamma,
        })
    }

    /// One absorbing regime with constant risk aversion.
    pub fn single(label: &str, gamma: f64) -> Result<Self> {
        Self::new(vec![label.to_string()], vec![vec![1.0]], vec![1.0], vec![gamma])
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn states(&self) -> &[String] {
        &self.states
    }

    pub fn label(&self, regime: usize) -> &str {
        &self.states[regime]
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.states.iter().position(|s| s == label)
    }

    pub fn row(&self, regime: usize) -> &[f64] {
        &self.transition[regime]
    }

    pub fn transition(&self) -> &[Vec<f64>] {
        &self.transition
    }

    pub fn initial(&self) -> &[f64] {
        &self.initial
    }

    pub fn gammas(&self) -> &[f64] {
        &self.gamma
    }

    pub fn gamma_of(&self, regime: usize) -> Result<f64> {
        self.gamma
            .get(regime)
            .copied()
            .ok_or_else(|| Error::Config(format!("unknown regime index {regime}")))
    }
}

/// Risk aversion `γ(J_{t_n})` in force at a node.
pub fn risk_aversion(regime_history: &[usize], chain: &RegimeChain) -> Result<f64> {
    let current = regime_history
        .last()
        .ok_or_else(|| Error::Config("empty regime history".into()))?;
    chain.gamma_of(*current)
}

/// Template for a drift or volatility coefficient, a function of
/// `(time index, C, S, regime)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Coefficient {
    /// `value`.
    Constant { value: f64 },
    /// `intercept + slope · S`.
    AffineS { intercept: f64, slope: f64 },
    /// `values[regime]`.
    ByRegime { values: Vec<f64> },
}

impl Coefficient {
    pub fn constant(value: f64) -> Self {
        Coefficient::Constant { value }
    }

    pub fn eval(&self, _time: usize, _c: f64, s: f64, regime: usize) -> f64 {
        match self {
            Coefficient::Constant { value } => *value,
            Coefficient::AffineS { intercept, slope } => intercept + slope * s,
            Coefficient::ByRegime { values } => values[regime],
        }
    }

    fn validate(&self, name: &str, regimes: usize) -> Result<()> {
        let finite = match self {
            Coefficient::Constant { value } => value.is_finite(),
            Coefficient::AffineS { intercept, slope } => intercept.is_finite() && slope.is_finite(),
            Coefficient::ByRegime { values } => {
                if values.len() != regimes {
                    return Err(Error::Config(format!(
                        "{name}: by_regime needs {regimes} values, got {}",
                        values.len()
                    )));
                }
                values.iter().all(|v| v.is_finite())
            }
        };
        if finite {
            Ok(())
        } else {
            Err(Error::Config(format!("{name}: non-finite template parameter")))
        }
    }
}

/// Template overriding the market price of risk.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MprTemplate {
    /// `r = sqrt(arctan(S) + π/2)`.
    ArctanS,
}

impl MprTemplate {
    pub fn eval(&self, _time: usize, s: f64) -> f64 {
        match self {
            MprTemplate::ArctanS => (s.atan() + FRAC_PI_2).sqrt(),
        }
    }
}

/// Dynamics of the forward processes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoefficientSpec {
    pub rho: f64,
    pub mu_c: Coefficient,
    pub sigma_c: Coefficient,
    pub mu_s: Coefficient,
    pub sigma_s: Coefficient,
    /// When present, authoritative for `r`; the drift of `C` becomes `r σ^c`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mpr_override: Option<MprTemplate>,
}

impl CoefficientSpec {
    pub fn validate(&self, regimes: usize) -> Result<()> {
        if !(self.rho.is_finite() && self.rho.abs() < 1.0) {
            return Err(Error::Config(format!(
                "correlation must satisfy |rho| < 1, got {}",
                self.rho
            )));
        }
        self.mu_c.validate("mu_c", regimes)?;
        self.sigma_c.validate("sigma_c", regimes)?;
        self.mu_s.validate("mu_s", regimes)?;
        self.sigma_s.validate("sigma_s", regimes)?;
        Ok(())
    }

    /// Coefficients in force on `[t_n, t_{n+1})` at a node.
    pub fn at(
        &self,
        time: usize,
        state: ForwardState,
        regime: usize,
        grid: &TimeGrid,
        location: &dyn Fn() -> String,
    ) -> Result<NodeCoefficients> {
        let sigma_c = self.sigma_c.eval(time, state.c, state.s, regime);
        let sigma_s = self.sigma_s.eval(time, state.c, state.s, regime);
        if sigma_c.is_nan() || sigma_c <= 0.0 {
            return Err(Error::Positivity {
                quantity: "sigma_c",
                value: sigma_c,
                location: location(),
            });
        }
        if sigma_s.is_nan() || sigma_s <= 0.0 {
            return Err(Error::Positivity {
                quantity: "sigma_s",
                value: sigma_s,
                location: location(),
            });
        }
        let (mpr, mu_c) = match &self.mpr_override {
            Some(t) => {
                let r = t.eval(time, state.s);
                (r, r * sigma_c)
            }
            None => {
                let mu = self.mu_c.eval(time, state.c, state.s, regime);
                (mu / sigma_c, mu)
            }
        };
        check_mpr(mpr, grid.sqrt_h(), location)?;
        Ok(NodeCoefficients {
            mu_c,
            sigma_c,
            mu_s: self.mu_s.eval(time, state.c, state.s, regime),
            sigma_s,
            rho: self.rho,
            mpr,
        })
    }
}

/// Admissibility of a market price of risk on a grid: `0 ≤ r` and `r √h < 1`.
pub fn check_mpr(mpr: f64, sqrt_h: f64, location: &dyn Fn() -> String) -> Result<()> {
    if !mpr.is_finite() || mpr < 0.0 {
        return Err(Error::Config(format!(
            "market price of risk must be finite and nonnegative, got {mpr} at {}",
            location()
        )));
    }
    let scaled = mpr * sqrt_h;
    if scaled >= 1.0 {
        return Err(Error::StepTooCoarse {
            mpr,
            scaled,
            location: location(),
        });
    }
    Ok(())
}

/// Coefficients evaluated at one node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NodeCoefficients {
    /// Effective drift of `C` (equals `mpr · sigma_c` under an override).
    pub mu_c: f64,
    pub sigma_c: f64,
    pub mu_s: f64,
    pub sigma_s: f64,
    pub rho: f64,
    pub mpr: f64,
}

impl NodeCoefficients {
    /// One-period return `μ^c h + σ^c √h Δb¹` of the traded asset.
    pub fn traded_return(&self, grid: &TimeGrid, first_shock: f64) -> f64 {
        self.mu_c * grid.h() + self.sigma_c * grid.sqrt_h() * first_shock
    }
}

/// Market price of risk at a node.
pub fn mpr(
    spec: &CoefficientSpec,
    time: usize,
    state: ForwardState,
    regime: usize,
    grid: &TimeGrid,
) -> Result<f64> {
    spec.at(time, state, regime, grid, &|| format!("t={time}"))
        .map(|c| c.mpr)
}

/// Levels of the forward processes at a node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForwardState {
    pub c: f64,
    pub s: f64,
}

/// One step of the difference equations for `C` and `S`.
pub fn evolve_forward(
    state: ForwardState,
    shock: &ShockVector,
    coeffs: &NodeCoefficients,
    grid: &TimeGrid,
    location: &dyn Fn() -> String,
) -> Result<ForwardState> {
    if shock.dim() < 2 {
        return Err(Error::Config(
            "the non-traded process needs a walk dimension d >= 2".into(),
        ));
    }
    let sh = grid.sqrt_h();
    let (b1, b2) = (shock.get(0), shock.get(1));
    let c = state.c * (1.0 + coeffs.mu_c * grid.h() + coeffs.sigma_c * sh * b1);
    let noise = coeffs.rho * b1 + (1.0 - coeffs.rho * coeffs.rho).sqrt() * b2;
    let s = state.s * (1.0 + coeffs.mu_s * grid.h() + coeffs.sigma_s * sh * noise);
    if c.is_nan() || c <= 0.0 {
        return Err(Error::Positivity {
            quantity: "C",
            value: c,
            location: location(),
        });
    }
    if s.is_nan() || s <= 0.0 {
        return Err(Error::Positivity {
            quantity: "S",
            value: s,
            location: location(),
        });
    }
    Ok(ForwardState { c, s })
}

/// Everything a path functional may look at on a terminal node.
#[derive(Debug, Clone, Copy)]
pub struct PathView<'a> {
    /// `S_{t_0} .. S_{t_N}`.
    pub s_path: &'a [f64],
    /// `C_{t_0} .. C_{t_N}`.
    pub c_path: &'a [f64],
    /// `Δb_{t_0} .. Δb_{t_{N-1}}`.
    pub shocks: &'a [ShockVector],
    /// `J_{t_0} .. J_{t_N}`.
    pub regimes: &'a [usize],
    pub h: f64,
}

/// `Δb^factor_{t_step} = sign`, with `factor` counted from 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShockCondition {
    pub step: usize,
    pub factor: usize,
    pub sign: i8,
}

/// `J_{t_step} = state`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegimeCondition {
    pub step: usize,
    pub state: String,
}

/// One additive term of the terminal income.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum IncomeTerm {
    /// `value`.
    Constant { value: f64 },
    /// `scale · exp(rate · (S_{t_s_index} − S_{t_0}) · h)`.
    ExpAffineS {
        scale: f64,
        rate: f64,
        s_index: usize,
    },
    /// `scale · exp(growth · h) · Π 1{shock conditions} · Π 1{regime conditions}`.
    Indicator {
        scale: f64,
        growth: f64,
        #[serde(default)]
        shocks: Vec<ShockCondition>,
        #[serde(default)]
        regimes: Vec<RegimeCondition>,
    },
}

impl IncomeTerm {
    fn eval(&self, path: &PathView<'_>, chain: &RegimeChain) -> f64 {
        match self {
            IncomeTerm::Constant { value } => *value,
            IncomeTerm::ExpAffineS {
                scale,
                rate,
                s_index,
            } => scale * (rate * (path.s_path[*s_index] - path.s_path[0]) * path.h).exp(),
            IncomeTerm::Indicator {
                scale,
                growth,
                shocks,
                regimes,
            } => {
                let shocks_hit = shocks
                    .iter()
                    .all(|c| path.shocks[c.step].get(c.factor - 1) == f64::from(c.sign));
                let regimes_hit = regimes
                    .iter()
                    .all(|c| chain.index_of(&c.state) == Some(path.regimes[c.step]));
                if shocks_hit && regimes_hit {
                    scale * (growth * path.h).exp()
                } else {
                    0.0
                }
            }
        }
    }

    fn validate(&self, steps: usize, dim: usize, chain: &RegimeChain) -> Result<()> {
        match self {
            IncomeTerm::Constant { value } if !value.is_finite() => {
                Err(Error::Config("income constant must be finite".into()))
            }
            IncomeTerm::Constant { .. } => Ok(()),
            IncomeTerm::ExpAffineS {
                scale,
                rate,
                s_index,
            } => {
                if !(scale.is_finite() && rate.is_finite()) {
                    return Err(Error::Config("income exp_affine_s: non-finite parameter".into()));
                }
                if *s_index > steps {
                    return Err(Error::Config(format!(
                        "income exp_affine_s: s_index {s_index} exceeds N = {steps}"
                    )));
                }
                Ok(())
            }
            IncomeTerm::Indicator {
                scale,
                growth,
                shocks,
                regimes,
            } => {
                if !(scale.is_finite() && growth.is_finite()) {
                    return Err(Error::Config("income indicator: non-finite parameter".into()));
                }
                for c in shocks {
                    if c.step >= steps {
                        return Err(Error::Config(format!(
                            "income indicator: shock step {} must be < N = {steps}",
                            c.step
                        )));
                    }
                    if c.factor == 0 || c.factor > dim {
                        return Err(Error::Config(format!(
                            "income indicator: factor {} outside 1..={dim} (raise grid.dimension)",
                            c.factor
                        )));
                    }
                    if c.sign != 1 && c.sign != -1 {
                        return Err(Error::Config(format!(
                            "income indicator: sign must be +1 or -1, got {}",
                            c.sign
                        )));
                    }
                }
                for c in regimes {
                    if c.step > steps {
                        return Err(Error::Config(format!(
                            "income indicator: regime step {} exceeds N = {steps}",
                            c.step
                        )));
                    }
                    if chain.index_of(&c.state).is_none() {
                        return Err(Error::Config(format!(
                            "income indicator: unknown regime label `{}`",
                            c.state
                        )));
                    }
                }
                Ok(())
            }
        }
    }
}

/// Terminal income, the sum of its terms (zero when empty).
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IncomeSpec {
    #[serde(default)]
    pub terms: Vec<IncomeTerm>,
}

impl IncomeSpec {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn validate(&self, steps: usize, dim: usize, chain: &RegimeChain) -> Result<()> {
        self.terms
            .iter()
            .try_for_each(|t| t.validate(steps, dim, chain))
    }

    pub fn eval(&self, path: &PathView<'_>, chain: &RegimeChain) -> f64 {
        self.terms.iter().map(|t| t.eval(path, chain)).sum()
    }
}

/// Dividend rate `φ(t_n, C, S)`; the period payment is `φ h`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Dividend {
    #[default]
    Zero,
    Constant {
        value: f64,
    },
    /// `intercept + slope · S`.
    AffineS {
        intercept: f64,
        slope: f64,
    },
}

impl Dividend {
    pub fn eval(&self, _time: usize, _c: f64, s: f64) -> f64 {
        match self {
            Dividend::Zero => 0.0,
            Dividend::Constant { value } => *value,
            Dividend::AffineS { intercept, slope } => intercept + slope * s,
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Dividend::Zero)
            || matches!(self, Dividend::Constant { value } if *value == 0.0)
            || matches!(self, Dividend::AffineS { intercept, slope } if *intercept == 0.0 && *slope == 0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Underlying {
    C,
    S,
}

/// Terminal payoff `D_{t_N}` of the claim.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Payoff {
    /// `value`.
    Constant { value: f64 },
    /// `(X_{t_N} − strike)^+`.
    Call { strike: f64, underlying: Underlying },
    /// `(strike − X_{t_N})^+`.
    Put { strike: f64, underlying: Underlying },
    /// `amount · 1{Δb¹_{t_{N-1}} = +1}`.
    Digital { amount: f64 },
}

impl Payoff {
    pub fn eval(&self, terminal: ForwardState, last_shock: &ShockVector) -> f64 {
        let level = |u: &Underlying| match u {
            Underlying::C => terminal.c,
            Underlying::S => terminal.s,
        };
        match self {
            Payoff::Constant { value } => *value,
            Payoff::Call { strike, underlying } => (level(underlying) - strike).max(0.0),
            Payoff::Put { strike, underlying } => (strike - level(underlying)).max(0.0),
            Payoff::Digital { amount } => {
                if last_shock.first() > 0.0 {
                    *amount
                } else {
                    0.0
                }
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match self {
            Payoff::Constant { value } => value.is_finite(),
            Payoff::Call { strike, .. } | Payoff::Put { strike, .. } => strike.is_finite(),
            Payoff::Digital { amount } => amount.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config("payoff parameters must be finite".into()))
        }
    }
}

/// A scenario expanded on its lattice: forward levels, node coefficients,
/// dividends, and the terminal payoff and income.
#[derive(Debug, Clone)]
pub struct ScenarioTree {
    lattice: Lattice,
    chain: RegimeChain,
    states: Vec<ForwardState>,
    coeffs: Vec<Option<NodeCoefficients>>,
    dividend: Vec<f64>,
    payoff: Vec<f64>,
    income: Vec<f64>,
}

impl ScenarioTree {
    /// Expands the scenario, checking positivity and `r √h < 1` at every node.
    pub fn build(config: &ScenarioConfig) -> Result<Self> {
        config.validate()?;
        let chain = config.regime_chain()?;
        let grid = config.time_grid()?;
        let lattice = Lattice::build(grid, config.grid.dimension, &chain, config.path_cap())?;

        let n = lattice.len();
        let mut states = vec![
            ForwardState {
                c: config.initial.c,
                s: config.initial.s
            };
            n
        ];
        let mut coeffs = vec![None; n];
        let mut dividend = vec![0.0; n];
        let describe = |id: NodeId| describe_node(&lattice, &chain, id);

        for t in 0..grid.steps() {
            for id in lattice.layer(t) {
                let state = states[id.index()];
                let here = || describe(id);
                let k = config
                    .coefficients
                    .at(t, state, lattice.regime(id), &grid, &here)?;
                coeffs[id.index()] = Some(k);
                let phi = config.dividend.eval(t, state.c, state.s);
                if !phi.is_finite() {
                    return Err(Error::NumericalRange(format!(
                        "non-finite dividend at {}",
                        here()
                    )));
                }
                dividend[id.index()] = phi;
                for (child, _) in lattice.children(id) {
                    let shock = lattice.shock(child).expect("child has shock");
                    let at_child = || describe(child);
                    states[child.index()] = evolve_forward(state, &shock, &k, &grid, &at_child)?;
                }
            }
        }

        let mut payoff = vec![f64::NAN; n];
        let mut income = vec![f64::NAN; n];
        for id in lattice.layer(grid.steps()) {
            let path = lattice.path_to(id);
            let s_path: Vec<f64> = path.iter().map(|p| states[p.index()].s).collect();
            let c_path: Vec<f64> = path.iter().map(|p| states[p.index()].c).collect();
            let shocks: Vec<ShockVector> = path.iter().filter_map(|p| lattice.shock(*p)).collect();
            let regimes: Vec<usize> = path.iter().map(|p| lattice.regime(*p)).collect();
            let view = PathView {
                s_path: &s_path,
                c_path: &c_path,
                shocks: &shocks,
                regimes: &regimes,
                h: grid.h(),
            };
            let last = shocks.last().expect("N >= 1");
            let d = config.payoff.eval(states[id.index()], last);
            let i = config.income.eval(&view, &chain);
            if !(d.is_finite() && i.is_finite()) {
                return Err(Error::NumericalRange(format!(
                    "non-finite payoff or income at {}",
                    describe(id)
                )));
            }
            payoff[id.index()] = d;
            income[id.index()] = i;
        }

        Ok(Self {
            lattice,
            chain,
            states,
            coeffs,
            dividend,
            payoff,
            income,
        })
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn chain(&self) -> &RegimeChain {
        &self.chain
    }

    pub fn grid(&self) -> &TimeGrid {
        self.lattice.grid()
    }

    pub fn state(&self, id: NodeId) -> ForwardState {
        self.states[id.index()]
    }

    /// Coefficients on the period starting at a non-terminal node.
    pub fn coefficients(&self, id: NodeId) -> Option<&NodeCoefficients> {
        self.coeffs[id.index()].as_ref()
    }

    /// Dividend rate `φ` at a non-terminal node (zero at terminals).
    pub fn dividend(&self, id: NodeId) -> f64 {
        self.dividend[id.index()]
    }

    pub fn has_zero_dividend(&self) -> bool {
        self.dividend.iter().all(|p| *p == 0.0)
    }

    /// Terminal payoff; NaN off the terminal layer.
    pub fn payoff(&self, id: NodeId) -> f64 {
        self.payoff[id.index()]
    }

    /// Terminal income; NaN off the terminal layer.
    pub fn income(&self, id: NodeId) -> f64 {
        self.income[id.index()]
    }

    /// Risk aversion of the node's current regime.
    pub fn gamma(&self, id: NodeId) -> f64 {
        self.chain.gammas()[self.lattice.regime(id)]
    }

    /// Risk aversion frozen at the root of the node's tree.
    pub fn root_gamma(&self, id: NodeId) -> f64 {
        self.gamma(self.lattice.root_of(id))
    }

    /// Replaces the terminal income by `f(node, old income)`.
    pub fn map_income(mut self, f: impl Fn(NodeId, f64) -> f64) -> Self {
        for id in self.lattice.layer(self.grid().steps()) {
            let i = id.index();
            self.income[i] = f(id, self.income[i]);
        }
        self
    }

    /// Replaces the terminal payoff by `f(node, old payoff)`.
    pub fn map_payoff(mut self, f: impl Fn(NodeId, f64) -> f64) -> Self {
        for id in self.lattice.layer(self.grid().steps()) {
            let i = id.index();
            self.payoff[i] = f(id, self.payoff[i]);
        }
        self
    }

    pub fn describe(&self, id: NodeId) -> String {
        describe_node(&self.lattice, &self.chain, id)
    }

    /// Shock history as `+-+|--+`.
    pub fn shock_string(&self, id: NodeId) -> String {
        self.lattice
            .node(id)
            .shocks
            .iter()
            .map(|s| s.to_string())
            .collect::<Vec<_>>()
            .join("|")
    }

    /// Regime history as `bull|bear`.
    pub fn regime_string(&self, id: NodeId) -> String {
        self.lattice
            .node(id)
            .regimes
            .iter()
            .map(|r| self.chain.label(*r).to_string())
            .collect::<Vec<_>>()
            .join("|")
    }
}

fn describe_node(lattice: &Lattice, chain: &RegimeChain, id: NodeId) -> String {
    let node = lattice.node(id);
    let shocks: Vec<String> = node.shocks.iter().map(|s| s.to_string()).collect();
    let regimes: Vec<&str> = node.regimes.iter().map(|r| chain.label(*r)).collect();
    format!(
        "node t={} shocks=[{}] regimes=[{}]",
        node.time_index,
        shocks.join(","),
        regimes.join(",")
    )
}
