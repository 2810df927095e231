//! Independent oracles and identity checks for solved scenarios.
//!
//! The brute-force oracle shares no numerics with the solver. It evaluates
//! the one-period objective
//!
//! ```text
//! g(α, β; D) = Σ_c w_c exp(−γ (x + α R_c + β (D_c − D + φh) + Y_c))
//! ```
//!
//! by plain enumeration and solves both first-order conditions by bisection:
//! for a candidate price `D`, the inner problem minimizes `g(·, 1; D)` by
//! bisecting on `∂g/∂α`; the outer loop bisects `D` until `∂g/∂β` vanishes.
//! Initial wealth `x` is threaded through so that its cancellation can be
//! observed.

use crate::config::ScenarioConfig;
use crate::error::{Error, Result};
use crate::lattice::NodeId;
use crate::market::{Coefficient, ScenarioTree};
use crate::pricing::{measure_density, mode_gamma, solve, PricingSolution, SolutionMode};

/// Maximum bisection steps for every oracle loop.
pub const MAX_BISECTIONS: usize = 200;
/// Acceptance threshold on the normalized `β` first-order condition.
pub const FOC_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleChild {
    pub weight: f64,
    /// `μᶜh + σᶜ√h Δb¹` on this edge.
    pub asset_return: f64,
    pub claim: f64,
    pub continuation: f64,
}

/// The one-period objective at a node.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectiveG {
    pub gamma: f64,
    pub wealth: f64,
    pub carry: f64,
    pub children: Vec<OracleChild>,
}

impl ObjectiveG {
    /// Objective at a node from explicit child claims and continuations.
    pub fn at_node(
        tree: &ScenarioTree,
        id: NodeId,
        gamma: f64,
        wealth: f64,
        claim: impl Fn(NodeId) -> f64,
        continuation: impl Fn(NodeId) -> f64,
    ) -> Result<Self> {
        let lattice = tree.lattice();
        let k = tree.coefficients(id).ok_or(Error::NoChildren {
            time_index: lattice.time(id),
        })?;
        let h = tree.grid().h();
        let children = lattice
            .children(id)
            .map(|(c, w)| {
                let b1 = lattice.shock(c).expect("child has shock").get(0);
                OracleChild {
                    weight: w,
                    asset_return: k.mu_c * h + k.sigma_c * h.sqrt() * b1,
                    claim: claim(c),
                    continuation: continuation(c),
                }
            })
            .collect();
        Ok(Self {
            gamma,
            wealth,
            carry: tree.dividend(id) * h,
            children,
        })
    }

    fn exponent(&self, c: &OracleChild, alpha: f64, beta: f64, price: f64) -> f64 {
        -self.gamma
            * (self.wealth
                + alpha * c.asset_return
                + beta * (c.claim - price + self.carry)
                + c.continuation)
    }

    pub fn value(&self, alpha: f64, beta: f64, price: f64) -> f64 {
        self.children
            .iter()
            .map(|c| c.weight * self.exponent(c, alpha, beta, price).exp())
            .sum()
    }

    pub fn d_alpha(&self, alpha: f64, beta: f64, price: f64) -> f64 {
        self.children
            .iter()
            .map(|c| -self.gamma * c.asset_return * c.weight * self.exponent(c, alpha, beta, price).exp())
            .sum()
    }

    pub fn d_beta(&self, alpha: f64, beta: f64, price: f64) -> f64 {
        self.children
            .iter()
            .map(|c| {
                -self.gamma * (c.claim - price + self.carry) * c.weight * self.exponent(c, alpha, beta, price).exp()
            })
            .sum()
    }

    /// Minimizer of `g(·, β; D)`.
    pub fn argmin_alpha(&self, beta: f64, price: f64) -> Result<f64> {
        let (mut lo, mut hi) = (-1.0, 1.0);
        let mut expansions = 0;
        while !(self.d_alpha(lo, beta, price) < 0.0 && self.d_alpha(hi, beta, price) > 0.0) {
            lo *= 2.0;
            hi *= 2.0;
            expansions += 1;
            if expansions > 60 {
                return Err(Error::Bracket(format!(
                    "no sign change of dg/dalpha on [{lo}, {hi}]"
                )));
            }
        }
        for _ in 0..MAX_BISECTIONS {
            let mid = 0.5 * (lo + hi);
            if resolved(lo, hi) {
                return Ok(mid);
            }
            let slope = self.d_alpha(mid, beta, price);
            if slope == 0.0 {
                return Ok(mid);
            }
            if slope > 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Err(Error::NonConvergence {
            iterations: MAX_BISECTIONS,
            residual: hi - lo,
        })
    }

    /// `|∂g/∂β| / (γ g)` at `β = 1`, in price units.
    fn beta_residual(&self, alpha: f64, price: f64) -> f64 {
        (self.d_beta(alpha, 1.0, price) / (self.gamma * self.value(alpha, 1.0, price))).abs()
    }

    /// Market-clearing price and holding by nested bisection.
    pub fn solve(&self) -> Result<OracleSolution> {
        let claims = self.children.iter().map(|c| c.claim + self.carry);
        let (mut lo, mut hi) = claims.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| {
            (a.min(v), b.max(v))
        });
        if lo == hi {
            let alpha = self.argmin_alpha(1.0, lo)?;
            return Ok(OracleSolution {
                alpha,
                price: lo,
                residual: self.beta_residual(alpha, lo),
            });
        }
        // The clearing condition reads E[(D_c + φh − D) e] = 0, which is
        // positive below the root and negative above it.
        let sign = |d: f64| -> Result<f64> {
            let a = self.argmin_alpha(1.0, d)?;
            Ok(-self.d_beta(a, 1.0, d))
        };
        if !(sign(lo)? >= 0.0 && sign(hi)? <= 0.0) {
            return Err(Error::Bracket(format!(
                "clearing condition does not change sign on payoff interval [{lo}, {hi}]"
            )));
        }
        let mut converged = false;
        for _ in 0..MAX_BISECTIONS {
            let mid = 0.5 * (lo + hi);
            if resolved(lo, hi) {
                converged = true;
                break;
            }
            if sign(mid)? > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let price = 0.5 * (lo + hi);
        let alpha = self.argmin_alpha(1.0, price)?;
        let residual = self.beta_residual(alpha, price);
        if !converged || residual > FOC_TOL {
            return Err(Error::NonConvergence {
                iterations: MAX_BISECTIONS,
                residual,
            });
        }
        Ok(OracleSolution {
            alpha,
            price,
            residual,
        })
    }
}

/// Bracket narrowed to a few ulps of its larger endpoint (or of one).
fn resolved(lo: f64, hi: f64) -> bool {
    let mid = 0.5 * (lo + hi);
    mid == lo || mid == hi || hi - lo <= 4.0 * f64::EPSILON * lo.abs().max(hi.abs()).max(1.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleSolution {
    pub alpha: f64,
    pub price: f64,
    /// Normalized `β` first-order-condition residual at the returned point.
    pub residual: f64,
}

/// Oracle at a node one period before maturity: payoff and income only.
pub fn brute_force_single_period(tree: &ScenarioTree, id: NodeId, wealth: f64) -> Result<OracleSolution> {
    if tree.lattice().time(id) + 1 != tree.grid().steps() {
        return Err(Error::Precondition(
            "single-period oracle needs a node one step before maturity".into(),
        ));
    }
    ObjectiveG::at_node(tree, id, tree.gamma(id), wealth, |c| tree.payoff(c), |c| tree.income(c))?
        .solve()
}

/// Oracle at any node, taking the solver's child prices and certainty
/// equivalents as given.
pub fn layer_oracle(
    tree: &ScenarioTree,
    solution: &PricingSolution,
    id: NodeId,
    wealth: f64,
) -> Result<OracleSolution> {
    let gamma = mode_gamma(tree, solution.mode(), id);
    ObjectiveG::at_node(
        tree,
        id,
        gamma,
        wealth,
        |c| solution.price(c),
        |c| solution.cert_equiv(c, gamma).expect("solved"),
    )?
    .solve()
}

/// Prices and holdings re-derived from scratch for small trees.
///
/// Continuations are certainty equivalents of the realized wealth
/// increments along every terminal path below a child, computed by direct
/// path enumeration with the oracle's own strategies and prices.
#[derive(Debug, Clone)]
pub struct FullTreeOracle {
    pub price: Vec<f64>,
    pub alpha: Vec<f64>,
}

pub const FULL_TREE_MAX_STEPS: usize = 3;

pub fn full_tree_oracle(tree: &ScenarioTree, mode: SolutionMode) -> Result<FullTreeOracle> {
    let lattice = tree.lattice();
    let steps = tree.grid().steps();
    if steps > FULL_TREE_MAX_STEPS {
        return Err(Error::Precondition(format!(
            "full-tree oracle is limited to N <= {FULL_TREE_MAX_STEPS}"
        )));
    }
    let h = tree.grid().h();
    let mut price = vec![f64::NAN; lattice.len()];
    let mut alpha = vec![f64::NAN; lattice.len()];
    for leaf in lattice.layer(steps) {
        price[leaf.index()] = tree.payoff(leaf);
    }
    for t in (0..steps).rev() {
        for id in lattice.layer(t) {
            let gamma = mode_gamma(tree, mode, id);
            let continuation = |child: NodeId| -> f64 {
                let leaves = lattice.descendants_at(child, steps);
                let mut acc = 0.0;
                for leaf in leaves.clone() {
                    let leaf = NodeId(leaf);
                    let path = lattice.path_to(leaf);
                    let below = &path[lattice.time(child)..];
                    let mut prob = 1.0;
                    let mut gain = tree.income(leaf);
                    for pair in below.windows(2) {
                        let (n, c) = (pair[0], pair[1]);
                        let k = tree.coefficients(n).expect("non-terminal");
                        let b1 = lattice.shock(c).unwrap().get(0);
                        prob *= lattice.weight(c);
                        gain += alpha[n.index()] * (k.mu_c * h + k.sigma_c * h.sqrt() * b1)
                            + price[c.index()]
                            - price[n.index()]
                            + tree.dividend(n) * h;
                    }
                    acc += prob * (-gamma * gain).exp();
                }
                -acc.ln() / gamma
            };
            let g = ObjectiveG::at_node(tree, id, gamma, 0.0, |c| price[c.index()], continuation)?;
            let s = g.solve()?;
            price[id.index()] = s.price;
            alpha[id.index()] = s.alpha;
        }
    }
    Ok(FullTreeOracle { price, alpha })
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MartingaleResidual {
    /// `max |E^Q[r√h + Δb¹ | F]|`.
    pub drift: f64,
    /// `max |E^Q[C_next | F] − C|`.
    pub primary: f64,
    /// `max |E^Q[D_next | F] − D|`.
    pub derivative: f64,
}

impl MartingaleResidual {
    pub fn max(&self) -> f64 {
        self.drift.max(self.primary).max(self.derivative)
    }
}

/// Martingale conditions under the equilibrium measure; requires `φ ≡ 0`.
pub fn check_martingale(tree: &ScenarioTree, solution: &PricingSolution) -> Result<MartingaleResidual> {
    if !tree.has_zero_dividend() {
        return Err(Error::Precondition(
            "martingale check needs a zero dividend (prices carry the dividend stream otherwise)".into(),
        ));
    }
    let lattice = tree.lattice();
    let sqrt_h = tree.grid().sqrt_h();
    let mut out = MartingaleResidual::default();
    for t in 0..tree.grid().steps() {
        for id in lattice.layer(t) {
            let k = tree.coefficients(id).expect("non-terminal");
            let q = |c: NodeId| solution.kernel(c).expect("kernel on every edge");
            let drift = lattice.expect(id, |c| q(c) * (k.mpr * sqrt_h + lattice.shock(c).unwrap().get(0)))?;
            let primary = lattice.expect(id, |c| q(c) * tree.state(c).c)? - tree.state(id).c;
            let derivative = lattice.expect(id, |c| q(c) * solution.price(c))? - solution.price(id);
            out.drift = out.drift.max(drift.abs());
            out.primary = out.primary.max(primary.abs());
            out.derivative = out.derivative.max(derivative.abs());
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelResidual {
    /// `max |E[Λ | F] − 1|` over parents.
    pub normalization: f64,
    pub min_kernel: f64,
    /// `|E_ℙ[dQ/dℙ] − 1|`, worst root.
    pub density: f64,
}

pub fn check_kernels(tree: &ScenarioTree, solution: &PricingSolution) -> Result<KernelResidual> {
    let lattice = tree.lattice();
    let mut normalization: f64 = 0.0;
    let mut min_kernel = f64::INFINITY;
    for t in 0..tree.grid().steps() {
        for id in lattice.layer(t) {
            let mass = lattice.expect(id, |c| solution.kernel(c).expect("kernel"))?;
            normalization = normalization.max((mass - 1.0).abs());
            for (c, _) in lattice.children(id) {
                min_kernel = min_kernel.min(solution.kernel(c).expect("kernel"));
            }
        }
    }
    let density = measure_density(tree, solution)?
        .expectation(tree)
        .into_iter()
        .map(|(_, e)| (e - 1.0).abs())
        .fold(0.0, f64::max);
    Ok(KernelResidual {
        normalization,
        min_kernel,
        density,
    })
}

/// Terminal wealth `Ŵ` along the path to `leaf`, starting from zero wealth.
fn terminal_wealth(tree: &ScenarioTree, solution: &PricingSolution, leaf: NodeId) -> f64 {
    let lattice = tree.lattice();
    let h = tree.grid().h();
    let path = lattice.path_to(leaf);
    let mut w = tree.income(leaf);
    for pair in path.windows(2) {
        let (n, c) = (pair[0], pair[1]);
        let k = tree.coefficients(n).expect("non-terminal");
        let b1 = lattice.shock(c).unwrap().get(0);
        w += solution.alpha(n).expect("strategy") * (k.mu_c * h + k.sigma_c * h.sqrt() * b1)
            + solution.price(c)
            - solution.price(n)
            + tree.dividend(n) * h;
    }
    w
}

/// `max |Λ̂ − E_{child}[U′(Ŵ)] / E_{parent}[U′(Ŵ)]|` over edges, by
/// enumeration of terminal wealth in inconsistent mode.
pub fn check_marginal_utility(tree: &ScenarioTree, solution: &PricingSolution) -> Result<f64> {
    if solution.mode() != SolutionMode::Inconsistent {
        return Err(Error::Precondition(
            "marginal-utility identity holds for the inconsistent solution".into(),
        ));
    }
    let lattice = tree.lattice();
    let steps = tree.grid().steps();
    let wealth: Vec<(usize, f64)> = lattice
        .layer(steps)
        .map(|leaf| (leaf.index(), terminal_wealth(tree, solution, leaf)))
        .collect();
    let first_leaf = lattice.layer_range(steps).start;
    let mut worst: f64 = 0.0;
    for t in 0..steps {
        for parent in lattice.layer(t) {
            let gamma = tree.root_gamma(parent);
            let range = lattice.descendants_at(parent, steps);
            let shift = wealth[range.start - first_leaf..range.end - first_leaf]
                .iter()
                .map(|(_, w)| *w)
                .fold(f64::INFINITY, f64::min);
            // U′(W) = γ e^{−γW}; the scale e^{γ·shift} cancels in the ratio.
            let marginal = |from: NodeId| -> f64 {
                let base = lattice.path_probability(from);
                lattice
                    .descendants_at(from, steps)
                    .map(|leaf| {
                        let (i, w) = wealth[leaf - first_leaf];
                        let id = NodeId(i);
                        (lattice.path_probability(id) / base) * gamma * (-gamma * (w - shift)).exp()
                    })
                    .sum()
            };
            let denominator = marginal(parent);
            for (child, _) in lattice.children(parent) {
                let ratio = marginal(child) / denominator;
                let kernel = solution.kernel(child).expect("kernel");
                worst = worst.max((kernel - ratio).abs());
            }
        }
    }
    Ok(worst)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DominanceReport {
    /// Number of date-1 nodes compared.
    pub nodes: usize,
    /// Nodes where the consistent strategy is strictly better.
    pub strict: usize,
    /// Nodes where it is worse by more than the tolerance.
    pub violations: usize,
    /// Largest shortfall of the consistent conditional utility.
    pub worst_shortfall: f64,
    /// Whether the date-0 holdings agree bit for bit.
    pub first_step_equal: bool,
}

pub const DOMINANCE_TOL: f64 = 1e-12;

/// Whether `check_dominance` accepts the configuration.
pub fn dominance_hypotheses(config: &ScenarioConfig) -> std::result::Result<(), String> {
    if config.grid.steps != 2 {
        return Err("dominance needs N = 2".into());
    }
    if !config.income.terms.is_empty() {
        return Err("dominance needs zero income".into());
    }
    if !config.dividend.is_zero() {
        return Err("dominance needs zero dividend".into());
    }
    let constant = |c: &Coefficient| matches!(c, Coefficient::Constant { .. });
    if !(constant(&config.coefficients.mu_c) && constant(&config.coefficients.sigma_c))
        || config.coefficients.mpr_override.is_some()
    {
        return Err("dominance needs constant drift and volatility of the traded asset".into());
    }
    Ok(())
}

/// Compares date-1 conditional expected utility of the consistent and the
/// inconsistent strategies when only the primary asset is traded.
pub fn check_dominance(config: &ScenarioConfig) -> Result<DominanceReport> {
    dominance_hypotheses(config).map_err(Error::Precondition)?;
    let tree = ScenarioTree::build(config)?.map_payoff(|_, _| 0.0);
    let consistent = solve(&tree, SolutionMode::Consistent)?;
    let inconsistent = solve(&tree, SolutionMode::Inconsistent)?;
    let lattice = tree.lattice();
    let h = tree.grid().h();
    let mut report = DominanceReport {
        nodes: 0,
        strict: 0,
        violations: 0,
        worst_shortfall: 0.0,
        first_step_equal: true,
    };
    for root in lattice.roots() {
        let a_star = consistent.alpha(*root).expect("strategy");
        let a_hat = inconsistent.alpha(*root).expect("strategy");
        report.first_step_equal &= a_star.to_bits() == a_hat.to_bits();
    }
    for n1 in lattice.layer(1) {
        let root = lattice.parent(n1).expect("date-1 node has a parent");
        let k0 = tree.coefficients(root).expect("non-terminal");
        let k1 = tree.coefficients(n1).expect("non-terminal");
        let b0 = lattice.shock(n1).unwrap().get(0);
        let r0 = k0.mu_c * h + k0.sigma_c * h.sqrt() * b0;
        let gamma1 = tree.gamma(n1);
        let utility = |sol: &PricingSolution| -> f64 {
            let w0 = sol.alpha(root).unwrap() * r0;
            let a1 = sol.alpha(n1).unwrap();
            lattice
                .children(n1)
                .map(|(c, w)| {
                    let b1 = lattice.shock(c).unwrap().get(0);
                    let wealth = w0 + a1 * (k1.mu_c * h + k1.sigma_c * h.sqrt() * b1);
                    -w * (-gamma1 * wealth).exp()
                })
                .sum()
        };
        let u_star = utility(&consistent);
        let u_hat = utility(&inconsistent);
        report.nodes += 1;
        let shortfall = u_hat - u_star;
        report.worst_shortfall = report.worst_shortfall.max(shortfall);
        if shortfall > DOMINANCE_TOL {
            report.violations += 1;
        } else if u_star - u_hat > DOMINANCE_TOL {
            report.strict += 1;
        }
    }
    Ok(report)
}

pub const WEALTHS: [f64; 3] = [-10.0, 0.0, 10.0];

/// Largest spread of the single-period oracle's `(α, D)` across initial
/// wealths, over all nodes one step before maturity.
pub fn check_wealth_invariance(tree: &ScenarioTree) -> Result<f64> {
    let lattice = tree.lattice();
    let mut worst: f64 = 0.0;
    for id in lattice.layer(tree.grid().steps() - 1) {
        let base = brute_force_single_period(tree, id, WEALTHS[1])?;
        for x in [WEALTHS[0], WEALTHS[2]] {
            let s = brute_force_single_period(tree, id, x)?;
            worst = worst.max((s.price - base.price).abs()).max((s.alpha - base.alpha).abs());
        }
    }
    Ok(worst)
}

/// Tolerances a report must meet.
pub mod tol {
    pub const MARTINGALE: f64 = 1e-10;
    pub const KERNEL_NORM: f64 = 1e-12;
    pub const DENSITY: f64 = 1e-11;
    pub const ORACLE: f64 = 1e-8;
    pub const MARGINAL_UTILITY: f64 = 1e-12;
    pub const WEALTH: f64 = 1e-10;
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerificationReport {
    pub scenario: String,
    pub martingale_residual_max: Option<f64>,
    pub kernel_norm_residual_max: f64,
    pub density_residual_max: f64,
    pub min_kernel: f64,
    pub oracle_gap_max: f64,
    pub marginal_utility_residual_max: Option<f64>,
    pub dominance_violations: Option<usize>,
    pub dominance_first_step_equal: Option<bool>,
    pub wealth_invariance_residual_max: f64,
    pub notes: Vec<String>,
}

impl VerificationReport {
    pub fn failures(&self) -> Vec<String> {
        let mut out = Vec::new();
        let mut over = |name: &str, value: f64, limit: f64| {
            if value.is_nan() || value > limit {
                out.push(format!("{name} = {value:e} exceeds {limit:e}"));
            }
        };
        if let Some(m) = self.martingale_residual_max {
            over("martingale_residual_max", m, tol::MARTINGALE);
        }
        over("kernel_norm_residual_max", self.kernel_norm_residual_max, tol::KERNEL_NORM);
        over("density_residual_max", self.density_residual_max, tol::DENSITY);
        over("oracle_gap_max", self.oracle_gap_max, tol::ORACLE);
        if let Some(m) = self.marginal_utility_residual_max {
            over("marginal_utility_residual_max", m, tol::MARGINAL_UTILITY);
        }
        over(
            "wealth_invariance_residual_max",
            self.wealth_invariance_residual_max,
            tol::WEALTH,
        );
        if self.min_kernel.is_nan() || self.min_kernel <= 0.0 {
            out.push(format!("min_kernel = {:e} is not positive", self.min_kernel));
        }
        if let Some(v) = self.dominance_violations.filter(|v| *v > 0) {
            out.push(format!("dominance_violations = {v}"));
        }
        if self.dominance_first_step_equal == Some(false) {
            out.push("dominance first-step holdings differ".into());
        }
        out
    }

    pub fn passes(&self) -> bool {
        self.failures().is_empty()
    }

    fn fields(&self) -> Vec<(&'static str, String)> {
        let opt = |v: Option<f64>| v.map(crate::numeric::fmt_sci).unwrap_or_else(|| "skipped".into());
        vec![
            ("scenario", self.scenario.clone()),
            ("martingale_residual_max", opt(self.martingale_residual_max)),
            ("kernel_norm_residual_max", crate::numeric::fmt_sci(self.kernel_norm_residual_max)),
            ("density_residual_max", crate::numeric::fmt_sci(self.density_residual_max)),
            ("min_kernel", crate::numeric::fmt_sci(self.min_kernel)),
            ("oracle_gap_max", crate::numeric::fmt_sci(self.oracle_gap_max)),
            ("marginal_utility_residual_max", opt(self.marginal_utility_residual_max)),
            (
                "dominance_violations",
                self.dominance_violations
                    .map(|v| v.to_string())
                    .unwrap_or_else(|| "skipped".into()),
            ),
            (
                "wealth_invariance_residual_max",
                crate::numeric::fmt_sci(self.wealth_invariance_residual_max),
            ),
            ("status", if self.passes() { "pass" } else { "fail" }.to_string()),
        ]
    }

    /// `key = value` lines, followed by notes.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (k, v) in self.fields() {
            s.push_str(&format!("{k} = {v}\n"));
        }
        for n in &self.notes {
            s.push_str(&format!("note = {n}\n"));
        }
        for f in self.failures() {
            s.push_str(&format!("failure = {f}\n"));
        }
        s
    }

    pub fn csv_header() -> Vec<&'static str> {
        let empty = VerificationReport {
            scenario: String::new(),
            martingale_residual_max: None,
            kernel_norm_residual_max: 0.0,
            density_residual_max: 0.0,
            min_kernel: 1.0,
            oracle_gap_max: 0.0,
            marginal_utility_residual_max: None,
            dominance_violations: None,
            dominance_first_step_equal: None,
            wealth_invariance_residual_max: 0.0,
            notes: vec![],
        };
        empty.fields().into_iter().map(|(k, _)| k).collect()
    }

    pub fn csv_row(&self) -> Vec<String> {
        self.fields().into_iter().map(|(_, v)| v).collect()
    }
}

/// Runs every applicable check on a scenario, in both solution modes.
pub fn verify_scenario(config: &ScenarioConfig) -> Result<VerificationReport> {
    let tree = ScenarioTree::build(config)?;
    let lattice = tree.lattice();
    let steps = tree.grid().steps();
    let mut report = VerificationReport {
        scenario: config.name.clone(),
        martingale_residual_max: None,
        kernel_norm_residual_max: 0.0,
        density_residual_max: 0.0,
        min_kernel: f64::INFINITY,
        oracle_gap_max: 0.0,
        marginal_utility_residual_max: None,
        dominance_violations: None,
        dominance_first_step_equal: None,
        wealth_invariance_residual_max: 0.0,
        notes: Vec::new(),
    };
    for mode in SolutionMode::BOTH {
        let sol = solve(&tree, mode)?;
        let k = check_kernels(&tree, &sol)?;
        report.kernel_norm_residual_max = report.kernel_norm_residual_max.max(k.normalization);
        report.density_residual_max = report.density_residual_max.max(k.density);
        report.min_kernel = report.min_kernel.min(k.min_kernel);

        match check_martingale(&tree, &sol) {
            Ok(m) => {
                let prev = report.martingale_residual_max.unwrap_or(0.0);
                report.martingale_residual_max = Some(prev.max(m.max()));
            }
            Err(Error::Precondition(_)) => {}
            Err(e) => return Err(e),
        }

        for t in 0..steps {
            for id in lattice.layer(t) {
                let o = layer_oracle(&tree, &sol, id, 0.0)?;
                let gap = (o.price - sol.price(id))
                    .abs()
                    .max((o.alpha - sol.alpha(id).unwrap()).abs());
                report.oracle_gap_max = report.oracle_gap_max.max(gap);
            }
        }
        if steps <= 2 {
            let full = full_tree_oracle(&tree, mode)?;
            for t in 0..steps {
                for id in lattice.layer(t) {
                    let i = id.index();
                    let gap = (full.price[i] - sol.price(id))
                        .abs()
                        .max((full.alpha[i] - sol.alpha(id).unwrap()).abs());
                    report.oracle_gap_max = report.oracle_gap_max.max(gap);
                }
            }
        }

        if mode == SolutionMode::Inconsistent {
            report.marginal_utility_residual_max = Some(check_marginal_utility(&tree, &sol)?);
        }
    }
    if report.martingale_residual_max.is_none() {
        report
            .notes
            .push("martingale check skipped: hypothesis not met (nonzero dividend)".into());
    }
    if steps > 2 {
        report
            .notes
            .push("full-tree oracle skipped: N > 2; layer oracle only".into());
    }
    match dominance_hypotheses(config) {
        Ok(()) => {
            let d = check_dominance(config)?;
            report.dominance_violations = Some(d.violations);
            report.dominance_first_step_equal = Some(d.first_step_equal);
            report.notes.push(format!(
                "dominance: {} date-1 nodes, {} strict",
                d.nodes, d.strict
            ));
        }
        Err(why) => report
            .notes
            .push(format!("dominance check skipped: hypothesis not met ({why})")),
    }
    report.wealth_invariance_residual_max = check_wealth_invariance(&tree)?;
    Ok(report)
}
