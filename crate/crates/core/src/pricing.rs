//! Backward-induction equilibrium solver.
//!
//! Layer by layer from maturity, every non-terminal node gets, in order:
//! the optimal holding `α` in the traded asset (from the children's prices
//! and certainty equivalents), the one-step pricing kernel on each child
//! edge, the equilibrium price `D = E[Λ D_child] + φ h`, and finally its own
//! certainty equivalents for every requesting risk aversion. The derivative
//! holding is pinned to one unit (market clearing).
//!
//! Certainty equivalents are keyed by the *requesting* risk aversion: the
//! consistent strategy at a node is evaluated under the node's own `γ`, but
//! the node's parent looks at it through the parent's `γ`. The tower
//! property reduces this to the one-step recursion
//! `Y(n, γ) = −γ⁻¹ log E[exp(−γ (ΔX + Y(child, γ)))]`, so a table over the
//! finite set of regime risk aversions is enough.
//!
//! In inconsistent mode every strategy, kernel and certainty equivalent is
//! evaluated at the risk aversion frozen at the root.
//!
//! All expectations of the form `E[e^{−γZ}]` are computed as
//! `e^{−γz₀} E[e^{−γ(Z−z₀)}]` with `z₀` the minimum of `Z` over the
//! conditioning class, so no exponential ever exceeds one.

use serde::{Deserialize, Serialize};

use crate::config::ScenarioConfig;
use crate::error::{Error, Result};
use crate::lattice::{Event, NodeId, TimeGrid};
use crate::market::{check_mpr, ScenarioTree};
use crate::numeric::{csum, CompensatedSum};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolutionMode {
    /// Subgame-perfect strategies re-optimized under the current risk aversion.
    Consistent,
    /// Date-0 optimal strategies under the risk aversion frozen at the root.
    Inconsistent,
}

impl SolutionMode {
    pub const BOTH: [SolutionMode; 2] = [SolutionMode::Consistent, SolutionMode::Inconsistent];

    pub fn as_str(&self) -> &'static str {
        match self {
            SolutionMode::Consistent => "consistent",
            SolutionMode::Inconsistent => "inconsistent",
        }
    }
}

impl std::fmt::Display for SolutionMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for SolutionMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "consistent" => Ok(SolutionMode::Consistent),
            "inconsistent" => Ok(SolutionMode::Inconsistent),
            other => Err(Error::Config(format!("unknown solution mode `{other}`"))),
        }
    }
}

/// Risk aversion used for strategies and kernels at a node.
pub fn mode_gamma(tree: &ScenarioTree, mode: SolutionMode, id: NodeId) -> f64 {
    match mode {
        SolutionMode::Consistent => tree.gamma(id),
        SolutionMode::Inconsistent => tree.root_gamma(id),
    }
}

/// `λ`: `1 − r√h` on `A`, `1 + r√h` on `Aᶜ`.
pub fn one_step_lambda(event: Event, mpr: f64, grid: &TimeGrid) -> Result<f64> {
    check_mpr(mpr, grid.sqrt_h(), &|| "one-step kernel".to_string())?;
    let q = mpr * grid.sqrt_h();
    Ok(match event {
        Event::Up => 1.0 - q,
        Event::Down => 1.0 + q,
    })
}

/// `E[e^{−γ(Z − shift)} | class]` with `shift` the class minimum of `Z`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassMoment {
    pub shift: f64,
    pub mass: f64,
}

impl ClassMoment {
    /// `log E[e^{−γZ} | class]`.
    pub fn log_value(&self, gamma: f64) -> f64 {
        self.mass.ln() - gamma * self.shift
    }
}

/// Shifted exponential moments over `(event, weight, z)` triples, one per class.
pub fn class_moments(children: &[(Event, f64, f64)], gamma: f64) -> Result<[ClassMoment; 2]> {
    let mut out = [ClassMoment {
        shift: 0.0,
        mass: 0.0,
    }; 2];
    for (slot, event) in [Event::Up, Event::Down].into_iter().enumerate() {
        let members = || children.iter().filter(move |(e, _, _)| *e == event);
        let shift = members().map(|(_, _, z)| *z).fold(f64::INFINITY, f64::min);
        if !shift.is_finite() {
            return Err(Error::NumericalRange(format!(
                "empty or non-finite conditioning class {event:?}"
            )));
        }
        let weight = csum(members().map(|(_, w, _)| *w));
        let num = csum(members().map(|(_, w, z)| w * (-gamma * (z - shift)).exp()));
        let mass = num / weight;
        if !(mass > 0.0 && mass.is_finite()) {
            return Err(Error::NumericalRange(format!(
                "shifted exponential moment underflowed in class {event:?}"
            )));
        }
        out[slot] = ClassMoment { shift, mass };
    }
    Ok(out)
}

/// Optimal wealth in the traded asset given the class moments of `D + Y`.
pub fn alpha_from_moments(
    gamma: f64,
    sigma_c: f64,
    mpr: f64,
    grid: &TimeGrid,
    moments: &[ClassMoment; 2],
) -> f64 {
    let q = mpr * grid.sqrt_h();
    let scale = 1.0 / (2.0 * gamma * sigma_c * grid.sqrt_h());
    let premium = ((1.0 + q) / (1.0 - q)).ln();
    let hedge = moments[0].log_value(gamma) - moments[1].log_value(gamma);
    scale * premium + scale * hedge
}

fn slot(event: Event) -> usize {
    match event {
        Event::Up => 0,
        Event::Down => 1,
    }
}

/// Node → price, strategy, certainty equivalents and edge kernels.
#[derive(Debug, Clone)]
pub struct PricingSolution {
    mode: SolutionMode,
    gamma_keys: Vec<f64>,
    price: Vec<f64>,
    alpha: Vec<f64>,
    cert_equiv: Vec<f64>,
    kernel: Vec<f64>,
}

impl PricingSolution {
    /// A partial solution with only the terminal layer filled in.
    pub fn terminal(tree: &ScenarioTree, mode: SolutionMode) -> Self {
        let mut gamma_keys: Vec<f64> = Vec::new();
        for g in tree.chain().gammas() {
            if !gamma_keys.contains(g) {
                gamma_keys.push(*g);
            }
        }
        let n = tree.lattice().len();
        let k = gamma_keys.len();
        let mut sol = Self {
            mode,
            gamma_keys,
            price: vec![f64::NAN; n],
            alpha: vec![f64::NAN; n],
            cert_equiv: vec![f64::NAN; n * k],
            kernel: vec![f64::NAN; n],
        };
        for id in tree.lattice().layer(tree.grid().steps()) {
            sol.price[id.index()] = tree.payoff(id);
            let income = tree.income(id);
            sol.cert_equiv[id.index() * k..(id.index() + 1) * k].fill(income);
        }
        sol
    }

    pub fn mode(&self) -> SolutionMode {
        self.mode
    }

    /// The distinct risk-aversion values certainty equivalents are keyed by.
    pub fn gamma_keys(&self) -> &[f64] {
        &self.gamma_keys
    }

    pub fn key_of(&self, gamma: f64) -> Option<usize> {
        self.gamma_keys.iter().position(|g| *g == gamma)
    }

    /// Equilibrium price `D` at a node.
    pub fn price(&self, id: NodeId) -> f64 {
        self.price[id.index()]
    }

    /// Wealth held in the traded asset on the period starting at `id`.
    pub fn alpha(&self, id: NodeId) -> Option<f64> {
        let a = self.alpha[id.index()];
        (!a.is_nan()).then_some(a)
    }

    /// Derivative holding; one unit wherever a strategy exists.
    pub fn beta(&self, id: NodeId) -> Option<f64> {
        self.alpha(id).map(|_| 1.0)
    }

    /// `Y(node, γ)` for a requesting risk aversion `γ`.
    pub fn cert_equiv(&self, id: NodeId, gamma: f64) -> Option<f64> {
        let k = self.key_of(gamma)?;
        let y = self.cert_equiv[id.index() * self.gamma_keys.len() + k];
        (!y.is_nan()).then_some(y)
    }

    fn cert_equiv_by_key(&self, id: NodeId, key: usize) -> f64 {
        self.cert_equiv[id.index() * self.gamma_keys.len() + key]
    }

    /// One-step kernel on the edge into `child`.
    pub fn kernel(&self, child: NodeId) -> Option<f64> {
        let v = self.kernel[child.index()];
        (!v.is_nan()).then_some(v)
    }

    pub fn is_solved(&self, id: NodeId) -> bool {
        !self.price[id.index()].is_nan()
    }
}

/// Everything computed on the period starting at one node.
#[derive(Debug, Clone)]
pub struct NodeStep {
    pub gamma: f64,
    pub moments: [ClassMoment; 2],
    pub alpha: f64,
    /// `(child, weight, kernel)`.
    pub kernels: Vec<(NodeId, f64, f64)>,
    pub price: f64,
}

fn require_solved(tree: &ScenarioTree, partial: &PricingSolution, id: NodeId) -> Result<()> {
    if partial.is_solved(id) {
        Ok(())
    } else {
        Err(Error::Precondition(format!(
            "backward induction order violated: {} is not solved yet",
            tree.describe(id)
        )))
    }
}

/// Strategy, kernels and price at `id` from its already-solved children.
pub fn solve_step(tree: &ScenarioTree, partial: &PricingSolution, id: NodeId) -> Result<NodeStep> {
    let lattice = tree.lattice();
    let grid = tree.grid();
    let coeffs = tree.coefficients(id).ok_or(Error::NoChildren {
        time_index: lattice.time(id),
    })?;
    let gamma = mode_gamma(tree, partial.mode, id);
    let key = partial
        .key_of(gamma)
        .expect("every regime risk aversion is a key");

    let mut terms = Vec::with_capacity(lattice.child_count(id));
    for (child, w) in lattice.children(id) {
        require_solved(tree, partial, child)?;
        let event = Event::of(&lattice.shock(child).expect("child has shock"));
        let z = partial.price(child) + partial.cert_equiv_by_key(child, key);
        terms.push((event, w, z));
    }
    let moments = class_moments(&terms, gamma).map_err(|e| at_node(tree, id, e))?;
    let alpha = alpha_from_moments(gamma, coeffs.sigma_c, coeffs.mpr, grid, &moments);

    let mut kernels = Vec::with_capacity(terms.len());
    let mut value = CompensatedSum::new();
    for ((child, w), (event, _, z)) in lattice.children(id).zip(&terms) {
        let m = moments[slot(*event)];
        let lambda = one_step_lambda(*event, coeffs.mpr, grid)?;
        let kernel = lambda * (-gamma * (z - m.shift)).exp() / m.mass;
        value.add(w * kernel * partial.price(child));
        kernels.push((child, w, kernel));
    }
    let price = value.value() + tree.dividend(id) * grid.h();
    if !(price.is_finite() && alpha.is_finite()) {
        return Err(Error::NumericalRange(format!(
            "non-finite price or strategy at {}",
            tree.describe(id)
        )));
    }
    Ok(NodeStep {
        gamma,
        moments,
        alpha,
        kernels,
        price,
    })
}

fn at_node(tree: &ScenarioTree, id: NodeId, e: Error) -> Error {
    match e {
        Error::NumericalRange(m) => Error::NumericalRange(format!("{m} at {}", tree.describe(id))),
        other => other,
    }
}

/// Certainty equivalent at `id` requested under `gamma`, given the node's
/// strategy and price.
fn cert_equiv_step(
    tree: &ScenarioTree,
    partial: &PricingSolution,
    id: NodeId,
    alpha: f64,
    price: f64,
    key: usize,
) -> Result<f64> {
    let lattice = tree.lattice();
    let grid = tree.grid();
    let gamma = partial.gamma_keys[key];
    let coeffs = tree.coefficients(id).expect("non-terminal");
    let carry = tree.dividend(id) * grid.h();
    let values: Vec<(f64, f64)> = lattice
        .children(id)
        .map(|(child, w)| {
            let b1 = lattice.shock(child).expect("child has shock").first();
            let increment = alpha * coeffs.traded_return(grid, b1) + (partial.price(child) - price) + carry;
            (w, increment + partial.cert_equiv_by_key(child, key))
        })
        .collect();
    let shift = values.iter().map(|(_, v)| *v).fold(f64::INFINITY, f64::min);
    let mass = csum(values.iter().map(|(w, v)| w * (-gamma * (v - shift)).exp()));
    if !(mass > 0.0 && mass.is_finite() && shift.is_finite()) {
        return Err(Error::NumericalRange(format!(
            "certainty equivalent out of range at {}",
            tree.describe(id)
        )));
    }
    Ok(shift - mass.ln() / gamma)
}

/// `Y(id, γ)`; terminal nodes return the income.
pub fn certainty_equivalent(
    tree: &ScenarioTree,
    partial: &PricingSolution,
    id: NodeId,
    gamma: f64,
) -> Result<f64> {
    let key = partial
        .key_of(gamma)
        .ok_or_else(|| Error::Precondition(format!("gamma {gamma} is not a regime risk aversion")))?;
    if tree.lattice().is_terminal(id) {
        return Ok(tree.income(id));
    }
    if let Some(y) = partial.cert_equiv(id, gamma) {
        return Ok(y);
    }
    let step = solve_step(tree, partial, id)?;
    cert_equiv_step(tree, partial, id, step.alpha, step.price, key)
}

pub fn optimal_alpha(tree: &ScenarioTree, partial: &PricingSolution, id: NodeId) -> Result<f64> {
    solve_step(tree, partial, id).map(|s| s.alpha)
}

pub fn one_step_kernel(
    tree: &ScenarioTree,
    partial: &PricingSolution,
    parent: NodeId,
    child: NodeId,
) -> Result<f64> {
    let step = solve_step(tree, partial, parent)?;
    step.kernels
        .iter()
        .find(|(c, _, _)| *c == child)
        .map(|(_, _, k)| *k)
        .ok_or_else(|| Error::Precondition("child does not belong to parent".into()))
}

/// Price at a node one period before maturity, from payoff and income alone.
pub fn price_single_period(tree: &ScenarioTree, id: NodeId) -> Result<f64> {
    let steps = tree.grid().steps();
    if tree.lattice().time(id) + 1 != steps {
        return Err(Error::Precondition(format!(
            "single-period pricing needs a node at time index {}",
            steps - 1
        )));
    }
    let partial = PricingSolution::terminal(tree, SolutionMode::Consistent);
    solve_step(tree, &partial, id).map(|s| s.price)
}

/// Full backward induction on a built scenario tree.
pub fn solve(tree: &ScenarioTree, mode: SolutionMode) -> Result<PricingSolution> {
    let mut sol = PricingSolution::terminal(tree, mode);
    let keys = sol.gamma_keys.len();
    let lattice = tree.lattice();
    for t in (0..tree.grid().steps()).rev() {
        for id in lattice.layer(t) {
            let step = solve_step(tree, &sol, id)?;
            sol.price[id.index()] = step.price;
            sol.alpha[id.index()] = step.alpha;
            for (child, _, k) in &step.kernels {
                sol.kernel[child.index()] = *k;
            }
            for key in 0..keys {
                let y = cert_equiv_step(tree, &sol, id, step.alpha, step.price, key)?;
                sol.cert_equiv[id.index() * keys + key] = y;
            }
        }
    }
    Ok(sol)
}

/// Builds the scenario and solves it.
pub fn solve_equilibrium(config: &ScenarioConfig, mode: SolutionMode) -> Result<PricingSolution> {
    let tree = ScenarioTree::build(config)?;
    solve(&tree, mode)
}

/// `dQ/dℙ` restricted to each terminal path.
#[derive(Debug, Clone)]
pub struct MeasureDensity {
    pub path_density: Vec<(NodeId, f64)>,
}

impl MeasureDensity {
    /// `ℙ`-expectation of the density, one value per root.
    pub fn expectation(&self, tree: &ScenarioTree) -> Vec<(NodeId, f64)> {
        let lattice = tree.lattice();
        lattice
            .roots()
            .iter()
            .map(|root| {
                let leaves = lattice.descendants_at(*root, tree.grid().steps());
                let total = csum(
                    self.path_density
                        .iter()
                        .filter(|(id, _)| leaves.contains(&id.index()))
                        .map(|(id, d)| lattice.path_probability(*id) * d),
                );
                (*root, total)
            })
            .collect()
    }
}

pub fn measure_density(tree: &ScenarioTree, solution: &PricingSolution) -> Result<MeasureDensity> {
    let lattice = tree.lattice();
    let mut path_density = Vec::with_capacity(lattice.layer(tree.grid().steps()).len());
    for leaf in lattice.layer(tree.grid().steps()) {
        let mut density = 1.0;
        for id in lattice.path_to(leaf).into_iter().skip(1) {
            density *= solution.kernel(id).ok_or_else(|| {
                Error::Precondition(format!("missing kernel at {}", tree.describe(id)))
            })?;
        }
        path_density.push((leaf, density));
    }
    Ok(MeasureDensity { path_density })
}

/// Certainty equivalent at `root` of holding `claim` on top of the income,
/// trading only the primary asset, under the root's frozen risk aversion.
fn cert_equiv_without_derivative(tree: &ScenarioTree, root: NodeId, claim: f64) -> Result<f64> {
    let lattice = tree.lattice();
    let grid = tree.grid();
    let gamma = tree.gamma(root);
    let steps = grid.steps();
    let mut ce = vec![f64::NAN; lattice.len()];
    for leaf in lattice.descendants_at(root, steps) {
        let id = NodeId(leaf);
        ce[leaf] = tree.income(id) + claim * tree.payoff(id);
    }
    for t in (lattice.time(root)..steps).rev() {
        for idx in lattice.descendants_at(root, t) {
            let id = NodeId(idx);
            let coeffs = tree.coefficients(id).expect("non-terminal");
            let terms: Vec<(Event, f64, f64)> = lattice
                .children(id)
                .map(|(c, w)| (Event::of(&lattice.shock(c).unwrap()), w, ce[c.index()]))
                .collect();
            let moments = class_moments(&terms, gamma).map_err(|e| at_node(tree, id, e))?;
            let alpha = alpha_from_moments(gamma, coeffs.sigma_c, coeffs.mpr, grid, &moments);
            let values: Vec<(f64, f64)> = lattice
                .children(id)
                .map(|(c, w)| {
                    let b1 = lattice.shock(c).unwrap().first();
                    (w, alpha * coeffs.traded_return(grid, b1) + ce[c.index()])
                })
                .collect();
            let shift = values.iter().map(|(_, v)| *v).fold(f64::INFINITY, f64::min);
            let mass = csum(values.iter().map(|(w, v)| w * (-gamma * (v - shift)).exp()));
            ce[idx] = shift - mass.ln() / gamma;
        }
    }
    let y = ce[root.index()];
    if y.is_finite() {
        Ok(y)
    } else {
        Err(Error::NumericalRange("indifference value function out of range".into()))
    }
}

/// Bisection tolerance on the indifference price.
pub const INDIFFERENCE_TOL: f64 = 1e-12;

/// Buyer's exponential-utility indifference price of `quantity` claims at
/// `root`, for an agent with initial wealth `wealth`.
pub fn indifference_price_at(
    tree: &ScenarioTree,
    root: NodeId,
    quantity: f64,
    wealth: f64,
) -> Result<f64> {
    let gamma = tree.gamma(root);
    let without = cert_equiv_without_derivative(tree, root, 0.0)?;
    let with = cert_equiv_without_derivative(tree, root, quantity)?;
    let value = |x: f64, y: f64| -(-gamma * (x + y)).exp();
    let target = value(wealth, without);
    let gap = |p: f64| value(wealth - p, with) - target;

    let leaves = tree.lattice().descendants_at(root, tree.grid().steps());
    let (mut lo, mut hi) = leaves
        .map(|i| quantity * tree.payoff(NodeId(i)))
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if lo == hi {
        return Ok(lo);
    }
    let pad = 1e-9 * (1.0 + lo.abs().max(hi.abs()));
    lo -= pad;
    hi += pad;
    let (g_lo, g_hi) = (gap(lo), gap(hi));
    if !(g_lo >= 0.0 && g_hi <= 0.0) {
        return Err(Error::Bracket(format!(
            "indifference bracket [{lo}, {hi}] from payoff bounds does not change sign ({g_lo:e}, {g_hi:e})"
        )));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= INDIFFERENCE_TOL || mid == lo || mid == hi {
            return Ok(mid);
        }
        if gap(mid) >= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Err(Error::NonConvergence {
        iterations: 200,
        residual: hi - lo,
    })
}

/// Indifference price for a scenario with a single initial regime.
pub fn indifference_price(config: &ScenarioConfig, quantity: f64) -> Result<f64> {
    let tree = ScenarioTree::build(config)?;
    match tree.lattice().roots() {
        [root] => indifference_price_at(&tree, *root, quantity, 0.0),
        _ => Err(Error::Precondition(
            "indifference price needs a deterministic initial regime".into(),
        )),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lambda_values() {
        let grid = TimeGrid::new(1, 0.25).unwrap();
        assert_eq!(one_step_lambda(Event::Up, 1.0, &grid).unwrap(), 0.5);
        assert_eq!(one_step_lambda(Event::Down, 1.0, &grid).unwrap(), 1.5);
        assert_eq!(one_step_lambda(Event::Up, 0.0, &grid).unwrap(), 1.0);
        assert!(one_step_lambda(Event::Up, 2.0, &grid).is_err());
        let coarse = TimeGrid::new(1, 0.3).unwrap();
        let r = (10f64.atan() + std::f64::consts::FRAC_PI_2).sqrt();
        let l = one_step_lambda(Event::Up, r, &coarse).unwrap();
        assert!((l - 0.044710933628156).abs() < 1e-12);
    }

    #[test]
    fn alpha_is_merton_term_for_flat_continuation() {
        let grid = TimeGrid::new(1, 0.25).unwrap();
        let flat = [ClassMoment { shift: 3.0, mass: 1.0 }; 2];
        let a = alpha_from_moments(1.0, 0.2, 1.0, &grid, &flat);
        assert!((a - 3f64.ln() / 0.2).abs() < 1e-12);
        assert!((a - 5.49306).abs() < 1e-5);
        assert_eq!(alpha_from_moments(1.0, 0.2, 0.0, &grid, &flat), 0.0);
    }

    #[test]
    fn class_moments_shift_by_class_minimum() {
        let terms = [
            (Event::Up, 0.25, 2.0),
            (Event::Up, 0.25, 3.0),
            (Event::Down, 0.5, -1.0),
        ];
        let m = class_moments(&terms, 1.0).unwrap();
        assert_eq!(m[0].shift, 2.0);
        assert!((m[0].mass - 0.5 * (1.0 + (-1f64).exp())).abs() < 1e-15);
        assert_eq!(m[1], ClassMoment { shift: -1.0, mass: 1.0 });
        let direct = (0.5 * ((-2f64).exp() + (-3f64).exp())).ln();
        assert!((m[0].log_value(1.0) - direct).abs() < 1e-14);
    }

    use crate::config::ChainConfig;
    use crate::experiments::{base_scenario, scenario, FigureId};
    use crate::market::{Coefficient, IncomeTerm, Payoff, ShockCondition};

    /// One-regime market with `r = mu_c / 0.2`, no override and no income.
    fn toy(steps: usize, h: f64, mu_c: f64, payoff: Payoff) -> ScenarioConfig {
        let mut cfg = base_scenario("toy", steps, 1.0);
        cfg.grid.step_length = h;
        cfg.coefficients.mpr_override = None;
        cfg.coefficients.mu_c = Coefficient::constant(mu_c);
        cfg.coefficients.rho = 0.0;
        cfg.payoff = payoff;
        cfg
    }

    fn root_of(tree: &ScenarioTree) -> NodeId {
        tree.lattice().roots()[0]
    }

    #[test]
    fn certainty_equivalent_of_a_coin_flip() {
        let mut cfg = toy(1, 0.25, 0.0, Payoff::Constant { value: 0.0 });
        cfg.income.terms = vec![IncomeTerm::Indicator {
            scale: 1.0,
            growth: 0.0,
            shocks: vec![ShockCondition { step: 0, factor: 2, sign: 1 }],
            regimes: vec![],
        }];
        let tree = ScenarioTree::build(&cfg).unwrap();
        let sol = solve(&tree, SolutionMode::Consistent).unwrap();
        let root = root_of(&tree);
        let expected = -((1.0 + (-1f64).exp()) / 2.0).ln();
        assert!((sol.cert_equiv(root, 1.0).unwrap() - expected).abs() < 1e-15);
        assert!((expected - 0.379885).abs() < 1e-6);
        assert_eq!(sol.alpha(root), Some(0.0));
        let partial = PricingSolution::terminal(&tree, SolutionMode::Consistent);
        let direct = certainty_equivalent(&tree, &partial, root, 1.0).unwrap();
        assert_eq!(direct, sol.cert_equiv(root, 1.0).unwrap());
    }

    #[test]
    fn constant_income_is_its_own_certainty_equivalent() {
        let mut cfg = toy(2, 0.25, 0.0, Payoff::Constant { value: 0.0 });
        cfg.income.terms = vec![IncomeTerm::Constant { value: 3.5 }];
        let tree = ScenarioTree::build(&cfg).unwrap();
        let sol = solve(&tree, SolutionMode::Consistent).unwrap();
        for id in tree.lattice().ids() {
            assert!((sol.cert_equiv(id, 1.0).unwrap() - 3.5).abs() < 1e-15);
        }
    }

    #[test]
    fn merton_holding_with_flat_continuation() {
        let cfg = toy(1, 0.25, 0.2, Payoff::Constant { value: 1.0 });
        let tree = ScenarioTree::build(&cfg).unwrap();
        let partial = PricingSolution::terminal(&tree, SolutionMode::Consistent);
        let a = optimal_alpha(&tree, &partial, root_of(&tree)).unwrap();
        assert!((a - 5.493061443340549).abs() < 1e-12);
    }

    #[test]
    fn digital_prices_at_its_kernel_mass() {
        let cfg = toy(1, 0.25, 0.2, Payoff::Digital { amount: 1.0 });
        let tree = ScenarioTree::build(&cfg).unwrap();
        let root = root_of(&tree);
        assert!((price_single_period(&tree, root).unwrap() - 0.25).abs() < 1e-15);
        let sol = solve(&tree, SolutionMode::Consistent).unwrap();
        let partial = PricingSolution::terminal(&tree, SolutionMode::Consistent);
        for (child, _) in tree.lattice().children(root) {
            let up = tree.lattice().shock(child).unwrap().first() > 0.0;
            let expected = if up { 0.5 } else { 1.5 };
            assert!((sol.kernel(child).unwrap() - expected).abs() < 1e-15);
            assert_eq!(one_step_kernel(&tree, &partial, root, child).unwrap(), sol.kernel(child).unwrap());
        }
        let density = measure_density(&tree, &sol).unwrap();
        for (leaf, d) in &density.path_density {
            let up = tree.lattice().shock(*leaf).unwrap().first() > 0.0;
            assert!((d - if up { 0.5 } else { 1.5 }).abs() < 1e-15);
        }
        assert!((density.expectation(&tree)[0].1 - 1.0).abs() < 1e-15);
    }

    #[test]
    fn zero_mpr_leaves_the_measure_unchanged() {
        let cfg = toy(1, 0.25, 0.0, Payoff::Constant { value: 4.0 });
        let tree = ScenarioTree::build(&cfg).unwrap();
        let sol = solve(&tree, SolutionMode::Consistent).unwrap();
        let density = measure_density(&tree, &sol).unwrap();
        assert!(density.path_density.iter().all(|(_, d)| *d == 1.0));
    }

    #[test]
    fn constant_payoff_is_priced_at_par_everywhere() {
        let mut cfg = scenario(FigureId::Regime);
        cfg.payoff = Payoff::Constant { value: 3.0 };
        let tree = ScenarioTree::build(&cfg).unwrap();
        for mode in SolutionMode::BOTH {
            let sol = solve(&tree, mode).unwrap();
            for id in tree.lattice().ids() {
                assert!((sol.price(id) - 3.0).abs() < 1e-13, "{}", tree.describe(id));
            }
        }
    }

    #[test]
    fn one_period_solver_is_the_single_period_formula() {
        let tree = ScenarioTree::build(&scenario(FigureId::Unspanned)).unwrap();
        let root = root_of(&tree);
        let single = price_single_period(&tree, root).unwrap();
        for mode in SolutionMode::BOTH {
            assert_eq!(solve(&tree, mode).unwrap().price(root).to_bits(), single.to_bits());
        }
    }

    #[test]
    fn regime_switching_separates_the_modes() {
        let tree = ScenarioTree::build(&scenario(FigureId::Regime)).unwrap();
        let root = root_of(&tree);
        let c = solve(&tree, SolutionMode::Consistent).unwrap();
        let i = solve(&tree, SolutionMode::Inconsistent).unwrap();
        assert!((c.price(root) - i.price(root)).abs() > 1e-3);
        assert_eq!(c.gamma_keys(), &[0.5, 0.6]);
    }

    #[test]
    fn out_of_order_evaluation_is_refused() {
        let tree = ScenarioTree::build(&scenario(FigureId::TwoPeriod)).unwrap();
        let partial = PricingSolution::terminal(&tree, SolutionMode::Inconsistent);
        let err = optimal_alpha(&tree, &partial, root_of(&tree)).unwrap_err();
        assert!(matches!(err, Error::Precondition(_)));
    }

    #[test]
    fn indifference_price_of_riskless_claims() {
        let tree = ScenarioTree::build(&toy(1, 0.25, 0.2, Payoff::Constant { value: 2.0 })).unwrap();
        let root = root_of(&tree);
        assert_eq!(indifference_price_at(&tree, root, 1.0, 0.0).unwrap(), 2.0);
        assert_eq!(indifference_price_at(&tree, root, 0.0, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn indifference_price_ignores_wealth() {
        let tree = ScenarioTree::build(&scenario(FigureId::EquilibriumVsIndifference)).unwrap();
        let root = root_of(&tree);
        let base = indifference_price_at(&tree, root, 1.0, 0.0).unwrap();
        for x in [-10.0, 10.0] {
            assert!((indifference_price_at(&tree, root, 1.0, x).unwrap() - base).abs() < 1e-10);
        }
    }

    #[test]
    fn indifference_and_equilibrium_prices_differ() {
        let cfg = scenario(FigureId::EquilibriumVsIndifference);
        let eq = solve_equilibrium(&cfg, SolutionMode::Consistent).unwrap();
        let tree = ScenarioTree::build(&cfg).unwrap();
        let p = indifference_price(&cfg, 1.0).unwrap();
        assert!((p - eq.price(root_of(&tree))).abs() > 1e-6);
    }

    #[test]
    fn equilibrium_price_is_the_marginal_indifference_price() {
        // Holding one unit is optimal at the equilibrium price, so the
        // slope of the indifference price in the quantity at one unit is D.
        for (id, gamma) in [(FigureId::EquilibriumVsIndifference, 0.7), (FigureId::TwoPeriod, 0.4)] {
            let mut cfg = scenario(id);
            cfg.chain = ChainConfig::single("calm", gamma);
            let tree = ScenarioTree::build(&cfg).unwrap();
            let root = root_of(&tree);
            let d = solve(&tree, SolutionMode::Inconsistent).unwrap().price(root);
            let e = 1e-4;
            let up = indifference_price_at(&tree, root, 1.0 + e, 0.0).unwrap();
            let down = indifference_price_at(&tree, root, 1.0 - e, 0.0).unwrap();
            let slope = (up - down) / (2.0 * e);
            assert!((slope - d).abs() < 1e-6, "{id}: slope {slope} vs price {d}");
        }
    }

    #[test]
    fn forest_requires_explicit_root_for_indifference() {
        let mut cfg = scenario(FigureId::Regime);
        cfg.chain.initial = crate::config::InitialRegime::Distribution(vec![0.5, 0.5]);
        assert!(matches!(indifference_price(&cfg, 1.0), Err(Error::Precondition(_))));
    }

    #[test]
    fn mode_parsing() {
        assert_eq!("consistent".parse::<SolutionMode>().unwrap(), SolutionMode::Consistent);
        assert!("both".parse::<SolutionMode>().is_err());
    }
}
