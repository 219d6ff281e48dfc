//! Model parameters, validation and the payoff function.
//!
//! The cash flow follows `dX = X (mu_i dt + sigma_i dW)` where the regime
//! `i` is a two-state Markov chain with switching intensities `lambda_0`
//! (leave regime 0) and `lambda_1` (leave regime 1). Stopping is allowed
//! only at the jump times of an independent Poisson process of rate `eta`,
//! and only while the chain sits in regime 1. The payoff on stopping is
//! `alpha * (x - K)^+ - I`.

use std::fmt;

use thiserror::Error;

/// The two regimes of the switching chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Regime {
    /// Stopping is not allowed.
    Zero,
    /// Stopping is allowed at opportunity arrival times.
    One,
}

impl Regime {
    pub const BOTH: [Regime; 2] = [Regime::Zero, Regime::One];

    pub fn index(self) -> usize {
        match self {
            Regime::Zero => 0,
            Regime::One => 1,
        }
    }

    pub fn other(self) -> Regime {
        match self {
            Regime::Zero => Regime::One,
            Regime::One => Regime::Zero,
        }
    }

    pub fn from_index(i: usize) -> Option<Regime> {
        match i {
            0 => Some(Regime::Zero),
            1 => Some(Regime::One),
            _ => None,
        }
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.index())
    }
}

/// Whether `r > max(mu_0, mu_1)` is enforced or only reported.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Mode {
    #[default]
    Strict,
    Permissive,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("parameter `{field}` must be positive (got {value})")]
    NonPositiveParameter { field: &'static str, value: f64 },
    #[error("parameter `{field}` must be non-negative (got {value})")]
    NegativeParameter { field: &'static str, value: f64 },
    #[error("parameter `{field}` is not finite (got {value})")]
    NonFinite { field: &'static str, value: f64 },
    #[error("degenerate payoff: K and I are both zero")]
    DegeneratePayoff,
    #[error("assumption r > max(mu0, mu1) violated: r = {r}, max mu = {max_mu}")]
    AssumptionViolated { r: f64, max_mu: f64 },
}

impl ModelError {
    /// The offending parameter-file field, when a single one is to blame.
    pub fn field(&self) -> Option<&'static str> {
        match self {
            ModelError::NonPositiveParameter { field, .. }
            | ModelError::NegativeParameter { field, .. }
            | ModelError::NonFinite { field, .. } => Some(field),
            ModelError::DegeneratePayoff | ModelError::AssumptionViolated { .. } => None,
        }
    }
}

/// A non-fatal finding recorded during permissive validation.
#[derive(Debug, Clone, PartialEq)]
pub enum Warning {
    AssumptionViolated { r: f64, max_mu: f64 },
}

impl fmt::Display for Warning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Warning::AssumptionViolated { r, max_mu } => write!(
                f,
                "assumption r > max(mu0, mu1) violated (r = {r}, max mu = {max_mu}); \
                 results are reported without the guarantees that rely on it"
            ),
        }
    }
}

/// Raw model and payoff scalars.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    pub r: f64,
    pub mu0: f64,
    pub mu1: f64,
    pub sigma0: f64,
    pub sigma1: f64,
    pub lambda0: f64,
    pub lambda1: f64,
    pub eta: f64,
    pub alpha: f64,
    pub big_k: f64,
    pub big_i: f64,
}

impl ModelParams {
    /// Field names as they appear in parameter files, in canonical order.
    pub const FIELD_NAMES: [&'static str; 11] = [
        "r", "mu0", "mu1", "sigma0", "sigma1", "lambda0", "lambda1", "eta", "alpha", "bigK", "bigI",
    ];

    /// The first worked example: `r=0.1, mu=(-0.1, 0.05), sigma=(0.2, 0.1),
    /// lambda=(2, 1), eta=1`, payoff `(x - 0.9)^+ - 0.1`.
    pub fn reference_example() -> Self {
        ModelParams {
            r: 0.1,
            mu0: -0.1,
            mu1: 0.05,
            sigma0: 0.2,
            sigma1: 0.1,
            lambda0: 2.0,
            lambda1: 1.0,
            eta: 1.0,
            alpha: 1.0,
            big_k: 0.9,
            big_i: 0.1,
        }
    }

    /// Same as [`reference_example`](Self::reference_example) with the drifts
    /// swapped to `mu0 = 0.5, mu1 = -0.5`. Violates `r > max mu`.
    pub fn reversed_drift_example() -> Self {
        ModelParams {
            mu0: 0.5,
            mu1: -0.5,
            ..Self::reference_example()
        }
    }

    pub fn field(&self, name: &str) -> Option<f64> {
        Some(match name {
            "r" => self.r,
            "mu0" => self.mu0,
            "mu1" => self.mu1,
            "sigma0" => self.sigma0,
            "sigma1" => self.sigma1,
            "lambda0" => self.lambda0,
            "lambda1" => self.lambda1,
            "eta" => self.eta,
            "alpha" => self.alpha,
            "bigK" => self.big_k,
            "bigI" => self.big_i,
            _ => return None,
        })
    }

    pub fn field_mut(&mut self, name: &str) -> Option<&mut f64> {
        Some(match name {
            "r" => &mut self.r,
            "mu0" => &mut self.mu0,
            "mu1" => &mut self.mu1,
            "sigma0" => &mut self.sigma0,
            "sigma1" => &mut self.sigma1,
            "lambda0" => &mut self.lambda0,
            "lambda1" => &mut self.lambda1,
            "eta" => &mut self.eta,
            "alpha" => &mut self.alpha,
            "bigK" => &mut self.big_k,
            "bigI" => &mut self.big_i,
            _ => return None,
        })
    }

    pub fn validate(self, mode: Mode) -> Result<Model, ModelError> {
        Model::new(self, mode)
    }
}

/// Validated parameters together with the effective strike `K~ = K + I/alpha`.
///
/// Immutable once built; every downstream computation takes a `&Model`.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    params: ModelParams,
    mode: Mode,
    k_tilde: f64,
    warnings: Vec<Warning>,
}

impl Model {
    pub fn new(params: ModelParams, mode: Mode) -> Result<Self, ModelError> {
        for name in ModelParams::FIELD_NAMES {
            let value = params.field(name).expect("known field");
            if !value.is_finite() {
                return Err(ModelError::NonFinite { field: name, value });
            }
        }
        for (field, value) in [
            ("r", params.r),
            ("sigma0", params.sigma0),
            ("sigma1", params.sigma1),
            ("lambda0", params.lambda0),
            ("lambda1", params.lambda1),
            ("eta", params.eta),
            ("alpha", params.alpha),
        ] {
            if value <= 0.0 {
                return Err(ModelError::NonPositiveParameter { field, value });
            }
        }
        for (field, value) in [("bigK", params.big_k), ("bigI", params.big_i)] {
            if value < 0.0 {
                return Err(ModelError::NegativeParameter { field, value });
            }
        }
        if params.big_k == 0.0 && params.big_i == 0.0 {
            return Err(ModelError::DegeneratePayoff);
        }

        let k_tilde = params.big_k + params.big_i / params.alpha;
        if !k_tilde.is_finite() {
            return Err(ModelError::NonFinite {
                field: "bigI",
                value: params.big_i,
            });
        }

        let max_mu = params.mu0.max(params.mu1);
        let mut warnings = Vec::new();
        if params.r <= max_mu {
            match mode {
                Mode::Strict => {
                    return Err(ModelError::AssumptionViolated {
                        r: params.r,
                        max_mu,
                    })
                }
                Mode::Permissive => warnings.push(Warning::AssumptionViolated {
                    r: params.r,
                    max_mu,
                }),
            }
        }

        Ok(Model {
            params,
            mode,
            k_tilde,
            warnings,
        })
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    /// True when `r > max(mu_0, mu_1)` holds, regardless of the mode.
    pub fn discounting_dominates(&self) -> bool {
        self.params.r > self.max_mu()
    }

    pub fn warnings(&self) -> &[Warning] {
        &self.warnings
    }

    pub fn r(&self) -> f64 {
        self.params.r
    }

    pub fn eta(&self) -> f64 {
        self.params.eta
    }

    pub fn alpha(&self) -> f64 {
        self.params.alpha
    }

    pub fn k_tilde(&self) -> f64 {
        self.k_tilde
    }

    pub fn max_mu(&self) -> f64 {
        self.params.mu0.max(self.params.mu1)
    }

    pub fn mu(&self, regime: Regime) -> f64 {
        match regime {
            Regime::Zero => self.params.mu0,
            Regime::One => self.params.mu1,
        }
    }

    pub fn sigma(&self, regime: Regime) -> f64 {
        match regime {
            Regime::Zero => self.params.sigma0,
            Regime::One => self.params.sigma1,
        }
    }

    /// Intensity of leaving `regime`.
    pub fn lambda(&self, regime: Regime) -> f64 {
        match regime {
            Regime::Zero => self.params.lambda0,
            Regime::One => self.params.lambda1,
        }
    }

    /// `alpha * (x - K)^+ - I`.
    pub fn payoff(&self, x: f64) -> f64 {
        let p = &self.params;
        p.alpha * (x - p.big_k).max(0.0) - p.big_i
    }

    /// The linearised payoff `alpha * x - alpha * K~`, equal to the payoff for
    /// `x >= K`.
    pub fn linear_payoff(&self, x: f64) -> f64 {
        self.params.alpha * x - self.params.alpha * self.k_tilde
    }

    /// `E[ int_0^inf e^{-rt} X_t dt | theta_0 = i, X_0 = x ]`.
    pub fn perpetuity_value(&self, regime: Regime, x: f64) -> Result<f64, ModelError> {
        if !self.discounting_dominates() {
            return Err(ModelError::AssumptionViolated {
                r: self.params.r,
                max_mu: self.max_mu(),
            });
        }
        let r = self.params.r;
        let other = regime.other();
        let (mu_i, mu_o) = (self.mu(regime), self.mu(other));
        let (lam_i, lam_o) = (self.lambda(regime), self.lambda(other));
        let num = (r - mu_o + lam_i + lam_o) * x;
        let den = (r - mu_o) * (r - mu_i) + lam_i * (r - mu_o) + lam_o * (r - mu_i);
        Ok(num / den)
    }
}
