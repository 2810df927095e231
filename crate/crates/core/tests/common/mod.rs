#![allow(dead_code)]

use eqprice::config::{ChainConfig, InitialRegime};
use eqprice::experiments::{
    base_scenario, regime_chain, regime_income, scenario, spanned_income, unspanned_income, FigureId,
};
use eqprice::market::{Coefficient, Dividend, IncomeTerm, Payoff, Underlying};
use eqprice::ScenarioConfig;

pub fn call() -> Payoff {
    Payoff::Call {
        strike: 10.0,
        underlying: Underlying::S,
    }
}

/// Payoff × income × market-price-of-risk grid at one period.
pub fn single_period_corpus() -> Vec<ScenarioConfig> {
    let payoffs = [
        ("constant", Payoff::Constant { value: 2.0 }),
        ("digital", Payoff::Digital { amount: 1.0 }),
        ("call", call()),
    ];
    let incomes: [(&str, Vec<IncomeTerm>); 3] = [
        ("no_income", vec![]),
        ("spanned", vec![spanned_income(1)]),
        ("unspanned", {
            let mut v = vec![spanned_income(1)];
            v.extend(unspanned_income(0));
            v
        }),
    ];
    let mut out = Vec::new();
    for (pname, payoff) in &payoffs {
        for (iname, terms) in &incomes {
            for arctan in [false, true] {
                let name = format!("{pname}_{iname}_{}", if arctan { "arctan" } else { "flat_mpr" });
                let mut cfg = base_scenario(&name, 1, 0.7);
                cfg.payoff = payoff.clone();
                cfg.income.terms = terms.clone();
                if !arctan {
                    cfg.coefficients.mpr_override = None;
                }
                out.push(cfg);
            }
        }
    }
    out
}

pub fn transition() -> Vec<Vec<f64>> {
    vec![vec![0.8, 0.2], vec![0.3, 0.7]]
}

/// Three-period single-regime market with both income parts.
pub fn three_period() -> ScenarioConfig {
    let mut cfg = base_scenario("three_period", 3, 0.6);
    cfg.income.terms = vec![spanned_income(3)];
    cfg.income.terms.extend(unspanned_income(2));
    cfg
}

/// Three-period two-regime market.
pub fn three_period_regime() -> ScenarioConfig {
    let mut cfg = base_scenario("three_period_regime", 3, 0.5);
    cfg.chain = regime_chain(0.5, 0.2, &transition(), "bear");
    cfg.income.terms = vec![spanned_income(1)];
    cfg.income.terms.extend(regime_income());
    cfg
}

pub fn fig9_from(start: &str) -> ScenarioConfig {
    let mut cfg = scenario(FigureId::Regime);
    cfg.name = format!("fig9_{start}");
    cfg.chain = regime_chain(0.5, 0.2, &transition(), start);
    cfg
}

/// Random initial regime: one root per state.
pub fn fig9_forest() -> ScenarioConfig {
    let mut cfg = scenario(FigureId::Regime);
    cfg.name = "fig9_forest".into();
    cfg.chain.initial = InitialRegime::Distribution(vec![0.4, 0.6]);
    cfg
}

/// Two regimes sharing one risk aversion.
pub fn flat_regimes() -> ScenarioConfig {
    let mut cfg = fig9_from("bull");
    cfg.name = "flat_regimes".into();
    cfg.chain = ChainConfig {
        gamma: vec![0.6, 0.6],
        ..cfg.chain
    };
    cfg
}

/// Regime-dependent volatility and a state-dependent drift.
pub fn regime_coefficients() -> ScenarioConfig {
    let mut cfg = fig9_from("bull");
    cfg.name = "regime_coefficients".into();
    cfg.coefficients.mpr_override = None;
    cfg.coefficients.mu_c = Coefficient::AffineS {
        intercept: 0.05,
        slope: 0.005,
    };
    cfg.coefficients.sigma_c = Coefficient::ByRegime {
        values: vec![0.2, 0.3],
    };
    cfg
}

pub fn with_dividend() -> ScenarioConfig {
    let mut cfg = fig9_from("bull");
    cfg.name = "with_dividend".into();
    cfg.dividend = Dividend::Constant { value: 0.4 };
    cfg
}

/// Scenarios with zero dividend and at most three periods.
pub fn multi_period_corpus() -> Vec<ScenarioConfig> {
    let mut v: Vec<ScenarioConfig> = FigureId::ALL.iter().map(|id| scenario(*id)).collect();
    v.extend([
        fig9_from("bear"),
        fig9_forest(),
        flat_regimes(),
        regime_coefficients(),
        three_period(),
        three_period_regime(),
    ]);
    v
}

/// Scenarios with a single risk-aversion value.
pub fn constant_gamma_corpus() -> Vec<ScenarioConfig> {
    let mut v: Vec<ScenarioConfig> = [
        FigureId::EquilibriumVsIndifference,
        FigureId::GammaSweep,
        FigureId::Unspanned,
        FigureId::TwoPeriod,
    ]
    .iter()
    .map(|id| scenario(*id))
    .collect();
    v.extend([flat_regimes(), three_period()]);
    let mut div = three_period();
    div.name = "three_period_dividend".into();
    div.dividend = Dividend::AffineS {
        intercept: 0.1,
        slope: 0.02,
    };
    v.push(div);
    v
}
