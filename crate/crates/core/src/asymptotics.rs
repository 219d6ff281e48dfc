//! Closed-form limits for a single diffusion (`mu0 = mu1`, `sigma0 = sigma1`)
//! as opportunities become continuous (`eta -> inf`) or regime 0 becomes
//! instantaneous (`lambda0 -> inf`).

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::model::{Mode, Model, ModelError, ModelParams, Regime};
use crate::vi::{SolveError, ViSolution};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AsymptoticError {
    #[error("regimes differ (mu {mu0} vs {mu1}, sigma {sigma0} vs {sigma1}); limits need a single diffusion")]
    NotSingleDiffusion {
        mu0: f64,
        mu1: f64,
        sigma0: f64,
        sigma1: f64,
    },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error("unknown limit `{0}` (expected `eta` or `lambda0`)")]
    UnknownLimit(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Limit {
    Eta,
    Lambda0,
}

impl Limit {
    pub fn name(self) -> &'static str {
        match self {
            Limit::Eta => "eta",
            Limit::Lambda0 => "lambda0",
        }
    }
}

impl fmt::Display for Limit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Limit {
    type Err = AsymptoticError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "eta" => Ok(Limit::Eta),
            "lambda0" => Ok(Limit::Lambda0),
            other => Err(AsymptoticError::UnknownLimit(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SingleDiffusionParams {
    pub r: f64,
    pub mu: f64,
    pub sigma: f64,
    pub lambda0: f64,
    pub lambda1: f64,
    pub eta: f64,
    pub alpha: f64,
    pub big_k: f64,
    pub big_i: f64,
}

impl SingleDiffusionParams {
    /// `mu = -0.1, sigma = 0.2, r = 0.1, lambda0 = 2, lambda1 = 1, eta = 1`
    /// with `K~ = 1` (`alpha = 1, K = 0.9, I = 0.1`).
    pub fn test_set() -> Self {
        SingleDiffusionParams {
            r: 0.1,
            mu: -0.1,
            sigma: 0.2,
            lambda0: 2.0,
            lambda1: 1.0,
            eta: 1.0,
            alpha: 1.0,
            big_k: 0.9,
            big_i: 0.1,
        }
    }

    pub fn from_model(model: &Model) -> Result<Self, AsymptoticError> {
        let p = model.params();
        if p.mu0 != p.mu1 || p.sigma0 != p.sigma1 {
            return Err(AsymptoticError::NotSingleDiffusion {
                mu0: p.mu0,
                mu1: p.mu1,
                sigma0: p.sigma0,
                sigma1: p.sigma1,
            });
        }
        let s = SingleDiffusionParams {
            r: p.r,
            mu: p.mu0,
            sigma: p.sigma0,
            lambda0: p.lambda0,
            lambda1: p.lambda1,
            eta: p.eta,
            alpha: p.alpha,
            big_k: p.big_k,
            big_i: p.big_i,
        };
        s.model()?;
        Ok(s)
    }

    pub fn model_params(&self) -> ModelParams {
        ModelParams {
            r: self.r,
            mu0: self.mu,
            mu1: self.mu,
            sigma0: self.sigma,
            sigma1: self.sigma,
            lambda0: self.lambda0,
            lambda1: self.lambda1,
            eta: self.eta,
            alpha: self.alpha,
            big_k: self.big_k,
            big_i: self.big_i,
        }
    }

    /// The equivalent two-regime model, validated in strict mode.
    pub fn model(&self) -> Result<Model, ModelError> {
        self.model_params().validate(Mode::Strict)
    }

    pub fn k_tilde(&self) -> f64 {
        self.big_k + self.big_i / self.alpha
    }

    pub fn with_eta(self, eta: f64) -> Self {
        SingleDiffusionParams { eta, ..self }
    }

    pub fn with_lambda0(self, lambda0: f64) -> Self {
        SingleDiffusionParams { lambda0, ..self }
    }

    pub fn with_varied(self, limit: Limit, theta: f64) -> Self {
        match limit {
            Limit::Eta => self.with_eta(theta),
            Limit::Lambda0 => self.with_lambda0(theta),
        }
    }

    fn half_minus_drift(&self) -> f64 {
        0.5 - self.mu / (self.sigma * self.sigma)
    }

    /// `h +/- sqrt(h^2 + extra / sigma^2)` with `h = 1/2 - mu / sigma^2`.
    fn exponent(&self, extra: f64, sign: f64) -> f64 {
        let h = self.half_minus_drift();
        h + sign * (h * h + extra / (self.sigma * self.sigma)).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Exponents {
    pub beta_la: f64,
    pub beta_lb: f64,
    pub beta_ua: f64,
    pub beta_ub: f64,
}

pub fn closed_form_exponents(p: &SingleDiffusionParams) -> Exponents {
    let (l0, l1, eta, r) = (p.lambda0, p.lambda1, p.eta, p.r);
    let s = l0 + l1 + eta;
    let disc = (s * s - 4.0 * l0 * eta).sqrt();
    Exponents {
        beta_la: p.exponent(2.0 * (l0 + l1 + r), 1.0),
        beta_lb: p.exponent(2.0 * r, 1.0),
        beta_ua: p.exponent(s + 2.0 * r - disc, -1.0),
        beta_ub: p.exponent(s + 2.0 * r + disc, -1.0),
    }
}

/// `lim_{eta -> inf} beta^U_A`, the negative root of `G^L_0`.
pub fn zeta_l_minus_0(p: &SingleDiffusionParams) -> f64 {
    p.exponent(2.0 * (p.lambda0 + p.r), -1.0)
}

/// `lim_{lambda0 -> inf} beta^U_A`.
pub fn lambda0_limit_beta_ua(p: &SingleDiffusionParams) -> f64 {
    p.exponent(2.0 * (p.eta + p.r), -1.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct AsymptoticResult {
    pub limit: Limit,
    pub xstar: f64,
    pub lower_bound: f64,
    pub k_tilde: f64,
    /// Named exponents entering the limiting formulas.
    pub exponents: Vec<(&'static str, f64)>,
}

impl AsymptoticResult {
    pub fn above_lower_bound(&self) -> bool {
        self.xstar >= self.lower_bound * (1.0 - 1e-12)
    }

    pub fn above_k_tilde(&self) -> bool {
        self.xstar >= self.k_tilde * (1.0 - 1e-12)
    }

    pub fn bound_above_k_tilde(&self) -> bool {
        self.lower_bound >= self.k_tilde * (1.0 - 1e-12)
    }
}

pub fn threshold_eta_limit(p: &SingleDiffusionParams) -> AsymptoticResult {
    let e = closed_form_exponents(p);
    let (la, lb) = (e.beta_la, e.beta_lb);
    let z = zeta_l_minus_0(p);
    let (r, mu, l0, l1) = (p.r, p.mu, p.lambda0, p.lambda1);
    let kt = p.k_tilde();
    let num = (r - mu + l0)
        * ((l0 * (la - z) * lb + l1 * (lb - z) * la) * (r + l0) + z * (la - lb) * l0 * l1)
        * kt;
    let den = (r + l0)
        * ((l0 * (la - z) * (lb - 1.0) + l1 * (lb - z) * (la - 1.0)) * (r - mu + l0)
            + (z - 1.0) * (la - lb) * l0 * l1);
    AsymptoticResult {
        limit: Limit::Eta,
        xstar: num / den,
        lower_bound: la / (la - 1.0) * kt,
        k_tilde: kt,
        exponents: vec![("beta_la", la), ("beta_lb", lb), ("zeta_l_minus_0", z)],
    }
}

pub fn threshold_lambda0_limit(p: &SingleDiffusionParams) -> AsymptoticResult {
    let lb = closed_form_exponents(p).beta_lb;
    let ua = lambda0_limit_beta_ua(p);
    let (r, mu, eta) = (p.r, p.mu, p.eta);
    let kt = p.k_tilde();
    let xstar = (r - mu + eta) * ((r + eta) * lb - r * ua) * kt
        / ((r + eta) * ((r - mu + eta) * lb - (r - mu) * ua - eta));
    AsymptoticResult {
        limit: Limit::Lambda0,
        xstar,
        lower_bound: r * (r - mu + eta) * kt / ((r - mu) * (r + eta)),
        k_tilde: kt,
        exponents: vec![("beta_lb", lb), ("beta_ua", ua)],
    }
}

pub fn threshold_limit(p: &SingleDiffusionParams, limit: Limit) -> AsymptoticResult {
    match limit {
        Limit::Eta => threshold_eta_limit(p),
        Limit::Lambda0 => threshold_lambda0_limit(p),
    }
}

/// The limiting value functions in closed form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LimitValues {
    pub limit: Limit,
    pub xstar: f64,
    alpha: f64,
    k_tilde: f64,
    // left piece: c_a t^{e_a} + c_b t^{e_b} for regime 1, regime-0 A-term factor
    e_a: f64,
    e_b: f64,
    c_a: f64,
    c_b: f64,
    ratio_a0: f64,
    // right piece, t = x / x*: c_u t^{e_u} + slope x + intercept
    e_u: f64,
    c_u: [f64; 2],
    slope: [f64; 2],
    intercept: [f64; 2],
}

impl LimitValues {
    pub fn new(p: &SingleDiffusionParams, limit: Limit) -> Self {
        let res = threshold_limit(p, limit);
        let x = res.xstar;
        let (a, kt, r, mu, l0, l1, eta) =
            (p.alpha, p.k_tilde(), p.r, p.mu, p.lambda0, p.lambda1, p.eta);
        match limit {
            Limit::Eta => {
                let e = closed_form_exponents(p);
                let (la, lb) = (e.beta_la, e.beta_lb);
                let c_a = ((1.0 - lb) * a * x + lb * a * kt) / (la - lb);
                let c_b = ((la - 1.0) * a * x - la * a * kt) / (la - lb);
                let slope0 = a * l0 / (r - mu + l0);
                let intercept0 = -a * kt * l0 / (r + l0);
                let bar_a = -l0 / l1 * c_a + c_b - slope0 * x - intercept0;
                LimitValues {
                    limit,
                    xstar: x,
                    alpha: a,
                    k_tilde: kt,
                    e_a: la,
                    e_b: lb,
                    c_a,
                    c_b,
                    ratio_a0: -l0 / l1,
                    e_u: zeta_l_minus_0(p),
                    c_u: [bar_a, 0.0],
                    slope: [slope0, a],
                    intercept: [intercept0, -a * kt],
                }
            }
            Limit::Lambda0 => {
                let lb = closed_form_exponents(p).beta_lb;
                let c_u = (r - mu) * a * x / (r - mu + eta) - r * a * kt / (r + eta);
                let slope = a * eta / (r - mu + eta);
                let intercept = -a * kt * eta / (r + eta);
                LimitValues {
                    limit,
                    xstar: x,
                    alpha: a,
                    k_tilde: kt,
                    e_a: lb,
                    e_b: lb,
                    c_a: 0.0,
                    c_b: a * (x - kt),
                    ratio_a0: 0.0,
                    e_u: lambda0_limit_beta_ua(p),
                    c_u: [c_u, c_u],
                    slope: [slope, slope],
                    intercept: [intercept, intercept],
                }
            }
        }
    }

    pub fn left(&self, regime: Regime, x: f64) -> f64 {
        let t = x / self.xstar;
        let fa = match regime {
            Regime::Zero => self.ratio_a0,
            Regime::One => 1.0,
        };
        fa * self.c_a * t.powf(self.e_a) + self.c_b * t.powf(self.e_b)
    }

    pub fn right(&self, regime: Regime, x: f64) -> f64 {
        let i = regime.index();
        self.c_u[i] * (x / self.xstar).powf(self.e_u) + self.slope[i] * x + self.intercept[i]
    }

    pub fn value(&self, regime: Regime, x: f64) -> f64 {
        if x < self.xstar {
            self.left(regime, x)
        } else {
            self.right(regime, x)
        }
    }

    /// `alpha x - alpha K~`.
    pub fn linear_payoff(&self, x: f64) -> f64 {
        self.alpha * (x - self.k_tilde)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LimitRow {
    pub x: f64,
    pub v0: f64,
    pub v1: f64,
    pub pi: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LimitTable {
    pub limit: Limit,
    pub xstar: f64,
    pub rows: Vec<LimitRow>,
    /// Whether the limiting `v_1` dominates the payoff on the grid below
    /// `x*_inf`, which the limiting regime-0 form presumes.
    pub v1_dominates_payoff: bool,
}

pub fn limit_value_functions(p: &SingleDiffusionParams, limit: Limit, grid: &[f64]) -> LimitTable {
    let lv = LimitValues::new(p, limit);
    let payoff = |x: f64| p.alpha * (x - p.big_k).max(0.0) - p.big_i;
    let rows: Vec<LimitRow> = grid
        .iter()
        .map(|&x| LimitRow {
            x,
            v0: lv.value(Regime::Zero, x),
            v1: lv.value(Regime::One, x),
            pi: payoff(x),
        })
        .collect();
    let v1_dominates_payoff = rows
        .iter()
        .filter(|row| row.x < lv.xstar)
        .all(|row| row.v1 >= row.pi);
    LimitTable {
        limit,
        xstar: lv.xstar,
        rows,
        v1_dominates_payoff,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceRow {
    pub theta: f64,
    pub xstar: f64,
    pub rel_error: f64,
    /// Largest relative gap between the solver's `V_1` and the limiting
    /// `v_1` on `[x*_inf / 2, 2 x*_inf]`.
    pub value_gap: f64,
}

pub const CONVERGENCE_THETAS: [f64; 4] = [1e1, 1e2, 1e3, 1e4];

/// Solves the general problem with the varied parameter set to each `theta`.
pub fn convergence_table(
    p: &SingleDiffusionParams,
    limit: Limit,
    thetas: &[f64],
) -> Result<Vec<ConvergenceRow>, AsymptoticError> {
    let lv = LimitValues::new(p, limit);
    let x_inf = lv.xstar;
    let grid: Vec<f64> = (0..=200)
        .map(|k| x_inf * 0.5 * 4f64.powf(k as f64 / 200.0))
        .collect();
    thetas
        .iter()
        .map(|&theta| {
            let model = p.with_varied(limit, theta).model()?;
            let sol = ViSolution::solve(&model)?;
            let mut value_gap: f64 = 0.0;
            for &x in &grid {
                let v = sol.eval(Regime::One, x, 0).expect("grid is positive");
                let l = lv.value(Regime::One, x);
                value_gap = value_gap.max((v - l).abs() / l.abs());
            }
            Ok(ConvergenceRow {
                theta,
                xstar: sol.xstar,
                rel_error: (sol.xstar - x_inf).abs() / x_inf,
                value_gap,
            })
        })
        .collect()
}

/// True when `rel_error` strictly decreases along the table.
pub fn monotone_convergence(rows: &[ConvergenceRow]) -> bool {
    rows.windows(2).all(|w| w[1].rel_error < w[0].rel_error)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::roots::RootSet;
    use proptest::prelude::*;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    #[test]
    fn symmetric_exponents() {
        let p = SingleDiffusionParams {
            r: 2.0,
            mu: 0.0,
            sigma: 2f64.sqrt(),
            lambda0: 5.0,
            lambda1: 5.0,
            eta: 1.0,
            alpha: 1.0,
            big_k: 1.0,
            big_i: 0.0,
        };
        let e = closed_form_exponents(&p);
        assert!((e.beta_la - 4.0).abs() < 1e-14);
        assert!((e.beta_lb - 2.0).abs() < 1e-14);
    }

    #[test]
    fn exponents_match_quartic_roots() {
        let p = SingleDiffusionParams::test_set();
        let e = closed_form_exponents(&p);
        let roots = RootSet::compute(&p.model().unwrap()).unwrap();
        assert!(rel(e.beta_la, roots.beta_la) < 1e-10);
        assert!(rel(e.beta_lb, roots.beta_lb) < 1e-10);
        assert!(rel(e.beta_ua, roots.beta_ua) < 1e-10);
        assert!(rel(e.beta_ub, roots.beta_ub) < 1e-10);
    }

    #[test]
    fn exponents_spread_as_drift_falls() {
        let base = SingleDiffusionParams::test_set();
        let mut prev = closed_form_exponents(&base);
        for mu in [-0.5, -1.0, -2.0, -5.0] {
            let e = closed_form_exponents(&SingleDiffusionParams { mu, ..base });
            assert!(e.beta_la > prev.beta_la && e.beta_lb > prev.beta_lb);
            assert!(e.beta_ua > prev.beta_ua && e.beta_ub > prev.beta_ub);
            assert!(e.beta_ua < 0.0);
            prev = e;
        }
    }

    #[test]
    fn eta_limit_test_set() {
        let res = threshold_eta_limit(&SingleDiffusionParams::test_set());
        assert!(rel(res.xstar, 1.16182045) < 1e-7, "{res:?}");
        assert!(res.above_lower_bound() && res.bound_above_k_tilde());
    }

    #[test]
    fn lambda0_limit_test_set() {
        let res = threshold_lambda0_limit(&SingleDiffusionParams::test_set());
        assert!(rel(res.xstar, 1.0674234) < 1e-6, "{res:?}");
        assert!(res.above_lower_bound() && res.above_k_tilde());
        // with mu < 0 the bound r (r - mu + eta) / ((r - mu)(r + eta)) is below one
        assert!(!res.bound_above_k_tilde());
    }

    #[test]
    fn eta_convergence() {
        let rows = convergence_table(
            &SingleDiffusionParams::test_set(),
            Limit::Eta,
            &CONVERGENCE_THETAS,
        )
        .unwrap();
        assert!(monotone_convergence(&rows), "{rows:?}");
        assert!(rows[3].rel_error < 1e-2);
        assert!(
            rows.windows(2).all(|w| w[1].value_gap < w[0].value_gap),
            "{rows:?}"
        );
    }

    #[test]
    fn lambda0_convergence() {
        let rows = convergence_table(
            &SingleDiffusionParams::test_set(),
            Limit::Lambda0,
            &CONVERGENCE_THETAS,
        )
        .unwrap();
        assert!(monotone_convergence(&rows), "{rows:?}");
        assert!(rows[3].rel_error < 1e-4);
        assert!(
            rows.windows(2).all(|w| w[1].value_gap < w[0].value_gap),
            "{rows:?}"
        );
    }

    #[test]
    fn lambda0_limit_recovers_classical_threshold_for_fast_arrivals() {
        let p = SingleDiffusionParams::test_set();
        let lb = closed_form_exponents(&p).beta_lb;
        let classical = lb / (lb - 1.0) * p.k_tilde();
        let mut prev = f64::INFINITY;
        for eta in [1e2, 1e4, 1e6, 1e8] {
            let gap = rel(threshold_lambda0_limit(&p.with_eta(eta)).xstar, classical);
            assert!(gap < prev);
            prev = gap;
        }
        assert!(prev < 1e-3);
    }

    #[test]
    fn lambda0_limit_regimes_coincide() {
        let p = SingleDiffusionParams::test_set();
        let grid: Vec<f64> = (1..=60).map(|k| 0.05 * k as f64).collect();
        let table = limit_value_functions(&p, Limit::Lambda0, &grid);
        for row in &table.rows {
            assert_eq!(row.v0, row.v1);
        }
    }

    #[test]
    fn limits_paste_at_threshold() {
        let p = SingleDiffusionParams::test_set();
        for limit in [Limit::Eta, Limit::Lambda0] {
            let lv = LimitValues::new(&p, limit);
            let x = lv.xstar;
            let target = lv.linear_payoff(x);
            for regime in Regime::BOTH {
                let (l, r) = (lv.left(regime, x), lv.right(regime, x));
                assert!((l - r).abs() < 1e-12, "{limit} {regime}: {l} {r}");
            }
            assert!((lv.left(Regime::One, x) - target).abs() < 1e-12);
        }
    }

    #[test]
    fn eta_limit_flags_payoff_domination() {
        let p = SingleDiffusionParams::test_set();
        let grid: Vec<f64> = (1..=300).map(|k| 0.01 * k as f64).collect();
        let table = limit_value_functions(&p, Limit::Eta, &grid);
        assert!(table.v1_dominates_payoff);
    }

    #[test]
    fn unit_slope_zero_strike_snapshot() {
        let p = SingleDiffusionParams {
            alpha: 1.0,
            big_k: 0.0,
            big_i: 1.3,
            ..SingleDiffusionParams::test_set()
        };
        let res = threshold_eta_limit(&p);
        assert!(
            rel(res.xstar, ETA_LIMIT_UNIT_SNAPSHOT) < 1e-12,
            "{:.17e}",
            res.xstar
        );
        let unit = threshold_eta_limit(&SingleDiffusionParams::test_set()).xstar;
        assert!(rel(res.xstar, 1.3 * unit) < 1e-14);
    }

    const ETA_LIMIT_UNIT_SNAPSHOT: f64 = 1.5103665786136895;

    #[test]
    fn from_model_requires_single_diffusion() {
        let model = ModelParams::reference_example()
            .validate(Mode::Strict)
            .unwrap();
        assert!(matches!(
            SingleDiffusionParams::from_model(&model),
            Err(AsymptoticError::NotSingleDiffusion { .. })
        ));
        let p = SingleDiffusionParams::test_set();
        assert_eq!(
            SingleDiffusionParams::from_model(&p.model().unwrap()).unwrap(),
            p
        );
    }

    #[test]
    fn limit_names_parse() {
        assert_eq!("eta".parse::<Limit>().unwrap(), Limit::Eta);
        assert_eq!("lambda0".parse::<Limit>().unwrap(), Limit::Lambda0);
        assert!("lambda1".parse::<Limit>().is_err());
    }

    fn single_params() -> impl Strategy<Value = SingleDiffusionParams> {
        (
            0.01f64..0.5,
            0.01f64..3.0,
            0.05f64..1.0,
            0.05f64..5.0,
            0.05f64..5.0,
            0.05f64..5.0,
            0.5f64..2.0,
            0.0f64..2.0,
            0.01f64..1.0,
        )
            .prop_map(
                |(r, gap, sigma, lambda0, lambda1, eta, alpha, big_k, big_i)| {
                    SingleDiffusionParams {
                        r,
                        mu: r - gap,
                        sigma,
                        lambda0,
                        lambda1,
                        eta,
                        alpha,
                        big_k,
                        big_i,
                    }
                },
            )
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]

        #[test]
        fn closed_forms_agree_with_roots(p in single_params()) {
            let e = closed_form_exponents(&p);
            let roots = RootSet::compute(&p.model().unwrap()).unwrap();
            prop_assert!(rel(e.beta_la, roots.beta_la) < 1e-10);
            prop_assert!(rel(e.beta_lb, roots.beta_lb) < 1e-10);
            prop_assert!(rel(e.beta_ua, roots.beta_ua) < 1e-10);
            prop_assert!(rel(e.beta_ub, roots.beta_ub) < 1e-10);
        }

        #[test]
        fn lower_bounds_hold(p in single_params()) {
            let eta = threshold_eta_limit(&p);
            prop_assert!(eta.above_lower_bound() && eta.bound_above_k_tilde(), "{:?}", eta);
            let l0 = threshold_lambda0_limit(&p);
            prop_assert!(l0.above_lower_bound() && l0.above_k_tilde(), "{:?}", l0);
        }
    }
}
