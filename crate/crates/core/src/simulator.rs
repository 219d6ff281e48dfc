//! Monte Carlo engine for the switching GBM with Poisson stopping opportunities.
//!
//! Paths are advanced exactly between event times (regime switches and
//! opportunity arrivals), so threshold-policy estimates carry no
//! discretization bias. Path `k` draws from its own ChaCha stream `k` under
//! the master seed, and partial sums are merged in a fixed chunk order, so an
//! estimate depends only on `(seed, paths)` and never on the thread count.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp1, StandardNormal};
use rayon::prelude::*;
use thiserror::Error;

use crate::model::{Mode, Model, Regime};

pub const DEFAULT_TAIL_TOL: f64 = 1e-4;
pub const DEFAULT_PATHS: usize = 100_000;
pub const DEFAULT_SEED: u64 = 20_240_601;
/// Largest trapezoid step for the discounted time integral.
pub const PERPETUITY_STEP: f64 = 0.01;

const CHUNK: usize = 1024;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),
    #[error("r = {r} does not exceed the drift {mu}")]
    AssumptionViolated { r: f64, mu: f64 },
    #[error("r does not exceed max mu, so an explicit horizon is required")]
    HorizonRequired,
    #[error("the perpetuity estimator needs a strict-mode model")]
    PermissiveModel,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    pub paths: usize,
    pub seed: u64,
    /// `None` derives the horizon from `tail_tol`.
    pub horizon: Option<f64>,
    pub tail_tol: f64,
    /// Stop at the first regime-1 arrival with `X >= threshold`.
    /// `f64::INFINITY` never stops.
    pub threshold: f64,
    pub regime: Regime,
    pub x0: f64,
}

impl SimConfig {
    pub fn new(regime: Regime, x0: f64, threshold: f64) -> Self {
        SimConfig {
            paths: DEFAULT_PATHS,
            seed: DEFAULT_SEED,
            horizon: None,
            tail_tol: DEFAULT_TAIL_TOL,
            threshold,
            regime,
            x0,
        }
    }

    pub fn with_paths(self, paths: usize) -> Self {
        SimConfig { paths, ..self }
    }

    pub fn with_seed(self, seed: u64) -> Self {
        SimConfig { seed, ..self }
    }

    pub fn with_horizon(self, horizon: f64) -> Self {
        SimConfig {
            horizon: Some(horizon),
            ..self
        }
    }

    fn check(&self) -> Result<(), SimError> {
        if self.paths == 0 {
            return Err(SimError::InvalidConfig("paths must be at least 1".into()));
        }
        if !(self.x0 > 0.0 && self.x0.is_finite()) {
            return Err(SimError::InvalidConfig(format!(
                "x0 = {} must be positive",
                self.x0
            )));
        }
        if !(self.tail_tol > 0.0 && self.tail_tol < 1.0) {
            return Err(SimError::InvalidConfig(format!(
                "tail tolerance {} must lie in (0, 1)",
                self.tail_tol
            )));
        }
        if self.threshold.is_nan() {
            return Err(SimError::InvalidConfig("threshold is NaN".into()));
        }
        if let Some(h) = self.horizon {
            if !(h > 0.0 && h.is_finite()) {
                return Err(SimError::InvalidConfig(format!(
                    "horizon {h} must be positive"
                )));
            }
        }
        Ok(())
    }

    /// The truncation horizon: the explicit one if given, else the smallest
    /// `T` with `exp(-(r - max mu) T) max(1, x0) <= tail_tol`.
    pub fn resolve_horizon(&self, model: &Model) -> Result<f64, SimError> {
        self.check()?;
        let auto = tail_horizon(model, self.x0, self.tail_tol);
        match (self.horizon, auto) {
            (Some(h), Some(min)) if model.mode() == Mode::Strict && h < min => {
                Err(SimError::InvalidConfig(format!(
                    "horizon {h} is shorter than {min}, the tail-tolerance bound"
                )))
            }
            (Some(h), _) => Ok(h),
            (None, Some(t)) => Ok(t),
            (None, None) => Err(SimError::HorizonRequired),
        }
    }
}

/// `ln(max(1, x0) / tol) / (r - max mu)`, or `None` when `r <= max mu`.
pub fn tail_horizon(model: &Model, x0: f64, tol: f64) -> Option<f64> {
    let gap = model.r() - model.max_mu();
    (gap > 0.0).then(|| (x0.max(1.0) / tol).ln() / gap)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathRecord {
    /// `None` when no feasible stop happened before the horizon.
    pub tau: Option<f64>,
    pub x_at_tau: Option<f64>,
    pub regime_at_tau: Option<Regime>,
    pub discounted_payoff: f64,
    pub segments: u32,
    pub arrivals: u32,
    /// State at the stopping time, or at the horizon if the path never stopped.
    pub final_x: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub paths: usize,
    pub seed: u64,
    pub horizon: f64,
    /// Paths that reached the horizon without stopping.
    pub unstopped: usize,
}

impl McEstimate {
    /// `(mean - reference) / std_error`; infinite when the error is zero and
    /// the values differ.
    pub fn z_score(&self, reference: f64) -> f64 {
        let d = self.mean - reference;
        if d == 0.0 {
            0.0
        } else {
            d / self.std_error
        }
    }

    pub fn within(&self, reference: f64, k: f64) -> bool {
        (self.mean - reference).abs() <= k * self.std_error
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct Moments {
    n: usize,
    mean: f64,
    m2: f64,
    flagged: usize,
}

impl Moments {
    fn push(&mut self, x: f64, flag: bool) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
        self.flagged += flag as usize;
    }

    fn merge(self, o: Moments) -> Moments {
        if self.n == 0 {
            return o;
        }
        if o.n == 0 {
            return self;
        }
        let n = self.n + o.n;
        let d = o.mean - self.mean;
        Moments {
            n,
            mean: self.mean + d * o.n as f64 / n as f64,
            m2: self.m2 + o.m2 + d * d * (self.n as f64 * o.n as f64) / n as f64,
            flagged: self.flagged + o.flagged,
        }
    }

    fn std_error(&self) -> f64 {
        if self.n < 2 {
            return 0.0;
        }
        (self.m2 / (self.n - 1) as f64).sqrt() / (self.n as f64).sqrt()
    }
}

fn path_rng(base: &ChaCha8Rng, index: u64) -> ChaCha8Rng {
    let mut rng = base.clone();
    rng.set_stream(index);
    rng
}

/// Runs `sample` on paths `0..paths` in fixed chunks and merges the chunk
/// moments in index order.
fn accumulate<F>(paths: usize, seed: u64, sample: F) -> Moments
where
    F: Fn(&mut ChaCha8Rng) -> (f64, bool) + Sync,
{
    let base = ChaCha8Rng::seed_from_u64(seed);
    let chunks = paths.div_ceil(CHUNK);
    let parts: Vec<Moments> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut m = Moments::default();
            for i in c * CHUNK..((c + 1) * CHUNK).min(paths) {
                let mut rng = path_rng(&base, i as u64);
                let (v, flag) = sample(&mut rng);
                m.push(v, flag);
            }
            m
        })
        .collect();
    parts.into_iter().fold(Moments::default(), Moments::merge)
}

#[derive(Debug, Clone, Copy)]
struct Dynamics {
    drift: [f64; 2],
    vol: [f64; 2],
    switch_rate: [f64; 2],
}

impl Dynamics {
    fn new(model: &Model) -> Self {
        let per = |f: &dyn Fn(Regime) -> f64| [f(Regime::Zero), f(Regime::One)];
        Dynamics {
            drift: per(&|i| model.mu(i) - 0.5 * model.sigma(i).powi(2)),
            vol: per(&|i| model.sigma(i)),
            switch_rate: per(&|i| model.lambda(i)),
        }
    }

    /// Exact increment of `ln X` over `dt` in `regime`.
    fn log_step(&self, rng: &mut ChaCha8Rng, regime: Regime, dt: f64) -> f64 {
        let z: f64 = rng.sample(StandardNormal);
        let i = regime.index();
        self.drift[i] * dt + self.vol[i] * dt.sqrt() * z
    }

    fn holding_time(&self, rng: &mut ChaCha8Rng, regime: Regime) -> f64 {
        let e: f64 = rng.sample(Exp1);
        e / self.switch_rate[regime.index()]
    }
}

/// A validated model, config and horizon, ready to generate paths.
#[derive(Debug, Clone)]
pub struct Simulation<'a> {
    model: &'a Model,
    config: SimConfig,
    horizon: f64,
    dynamics: Dynamics,
    base: ChaCha8Rng,
}

impl<'a> Simulation<'a> {
    pub fn new(model: &'a Model, config: SimConfig) -> Result<Self, SimError> {
        let horizon = config.resolve_horizon(model)?;
        Ok(Simulation {
            model,
            config,
            horizon,
            dynamics: Dynamics::new(model),
            base: ChaCha8Rng::seed_from_u64(config.seed),
        })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    pub fn path(&self, index: u64) -> PathRecord {
        self.run(&mut path_rng(&self.base, index))
    }

    fn run(&self, rng: &mut ChaCha8Rng) -> PathRecord {
        let dyn_ = &self.dynamics;
        let eta = self.model.eta();
        let x0 = self.config.x0;
        let threshold = self.config.threshold;
        let horizon = self.horizon;
        let next_gap = |rng: &mut ChaCha8Rng| {
            let e: f64 = rng.sample(Exp1);
            e / eta
        };

        let mut regime = self.config.regime;
        let mut t = 0.0;
        let mut log_y = 0.0;
        let mut next_arrival = next_gap(rng);
        let mut segments = 1;
        let mut arrivals = 0;
        loop {
            let seg_end = (t + dyn_.holding_time(rng, regime)).min(horizon);
            match regime {
                Regime::Zero => {
                    while next_arrival < seg_end {
                        arrivals += 1;
                        next_arrival += next_gap(rng);
                    }
                }
                Regime::One => {
                    while next_arrival < seg_end {
                        log_y += dyn_.log_step(rng, regime, next_arrival - t);
                        t = next_arrival;
                        arrivals += 1;
                        let x = x0 * log_y.exp();
                        if x >= threshold {
                            return PathRecord {
                                tau: Some(t),
                                x_at_tau: Some(x),
                                regime_at_tau: Some(Regime::One),
                                discounted_payoff: (-self.model.r() * t).exp()
                                    * self.model.payoff(x),
                                segments,
                                arrivals,
                                final_x: x,
                            };
                        }
                        next_arrival += next_gap(rng);
                    }
                }
            }
            log_y += dyn_.log_step(rng, regime, seg_end - t);
            t = seg_end;
            if t >= horizon {
                break;
            }
            regime = regime.other();
            segments += 1;
        }
        PathRecord {
            tau: None,
            x_at_tau: None,
            regime_at_tau: None,
            discounted_payoff: 0.0,
            segments,
            arrivals,
            final_x: x0 * log_y.exp(),
        }
    }

    pub fn estimate(&self) -> McEstimate {
        let m = accumulate(self.config.paths, self.config.seed, |rng| {
            let rec = self.run(rng);
            (rec.discounted_payoff, rec.tau.is_none())
        });
        self.wrap(m)
    }

    /// Mean of any per-path statistic, with the same seeding and merging
    /// as [`Simulation::estimate`].
    pub fn estimate_statistic<F>(&self, stat: F) -> McEstimate
    where
        F: Fn(&PathRecord) -> f64 + Sync,
    {
        let m = accumulate(self.config.paths, self.config.seed, |rng| {
            let rec = self.run(rng);
            (stat(&rec), rec.tau.is_none())
        });
        self.wrap(m)
    }

    fn wrap(&self, m: Moments) -> McEstimate {
        McEstimate {
            mean: m.mean,
            std_error: m.std_error(),
            paths: m.n,
            seed: self.config.seed,
            horizon: self.horizon,
            unstopped: m.flagged,
        }
    }
}

pub fn simulate_path(model: &Model, config: SimConfig, index: u64) -> Result<PathRecord, SimError> {
    Ok(Simulation::new(model, config)?.path(index))
}

/// Expected discounted payoff of the threshold policy in `config`.
pub fn estimate_value(model: &Model, config: SimConfig) -> Result<McEstimate, SimError> {
    Ok(Simulation::new(model, config)?.estimate())
}

/// Estimates `E[exp(-r U) Y_U]` for `U ~ Exp(lambda)` and `Y` a GBM with
/// drift `mu`, volatility `sigma`, `Y_0 = 1`. The exact value is
/// `lambda / (r - mu + lambda)`.
pub fn exp_horizon_identity_with(
    r: f64,
    mu: f64,
    sigma: f64,
    lambda: f64,
    paths: usize,
    seed: u64,
) -> Result<McEstimate, SimError> {
    if r <= mu {
        return Err(SimError::AssumptionViolated { r, mu });
    }
    if paths == 0 || !(lambda > 0.0) || !(sigma >= 0.0) {
        return Err(SimError::InvalidConfig(format!(
            "need paths >= 1, lambda > 0, sigma >= 0 (got {paths}, {lambda}, {sigma})"
        )));
    }
    let drift = mu - 0.5 * sigma * sigma;
    let m = accumulate(paths, seed, |rng| {
        let e: f64 = rng.sample(Exp1);
        let u = e / lambda;
        let z: f64 = rng.sample(StandardNormal);
        (((drift - r) * u + sigma * u.sqrt() * z).exp(), false)
    });
    Ok(McEstimate {
        mean: m.mean,
        std_error: m.std_error(),
        paths,
        seed,
        horizon: f64::INFINITY,
        unstopped: 0,
    })
}

/// The identity for regime `regime` of `model`: `U` is the regime's holding
/// time and `Y` the regime's GBM.
pub fn exp_horizon_identity(
    model: &Model,
    regime: Regime,
    paths: usize,
    seed: u64,
) -> Result<McEstimate, SimError> {
    exp_horizon_identity_with(
        model.r(),
        model.mu(regime),
        model.sigma(regime),
        model.lambda(regime),
        paths,
        seed,
    )
}

/// Estimates `E[int_0^T exp(-r t) X_t dt]` by the trapezoid rule on the
/// regime-switch times refined to steps of at most [`PERPETUITY_STEP`].
/// Every path is computed for `X_0 = 1` and scaled by `x0`, so the estimate
/// is exactly linear in `x0`.
pub fn estimate_perpetuity(
    model: &Model,
    regime: Regime,
    x0: f64,
    paths: usize,
    seed: u64,
    horizon: Option<f64>,
) -> Result<McEstimate, SimError> {
    if model.mode() != Mode::Strict {
        return Err(SimError::PermissiveModel);
    }
    let config = SimConfig {
        paths,
        seed,
        horizon,
        tail_tol: DEFAULT_TAIL_TOL,
        threshold: f64::INFINITY,
        regime,
        x0,
    };
    let horizon = config.resolve_horizon(model)?;
    let dynamics = Dynamics::new(model);
    let r = model.r();
    let m = accumulate(paths, seed, |rng| {
        let mut regime = regime;
        let mut t = 0.0;
        let mut log_y: f64 = 0.0;
        let mut f_prev = 1.0;
        let mut integral = 0.0;
        while t < horizon {
            let seg_end = (t + dynamics.holding_time(rng, regime)).min(horizon);
            let steps = ((seg_end - t) / PERPETUITY_STEP).ceil().max(1.0);
            let h = (seg_end - t) / steps;
            for k in 1..=steps as usize {
                log_y += dynamics.log_step(rng, regime, h);
                let f = (log_y - r * (t + k as f64 * h)).exp();
                integral += 0.5 * h * (f_prev + f);
                f_prev = f;
            }
            t = seg_end;
            regime = regime.other();
        }
        (x0 * integral, false)
    });
    Ok(McEstimate {
        mean: m.mean,
        std_error: m.std_error(),
        paths,
        seed,
        horizon,
        unstopped: 0,
    })
}

/// Mean of `X_T` started from `x0` in `regime`, advanced with the same exact
/// segment stepping as the policy simulator.
pub fn estimate_terminal_state(
    model: &Model,
    regime: Regime,
    x0: f64,
    t_end: f64,
    paths: usize,
    seed: u64,
) -> Result<McEstimate, SimError> {
    let config = SimConfig {
        paths,
        seed,
        horizon: Some(t_end),
        tail_tol: DEFAULT_TAIL_TOL,
        threshold: f64::INFINITY,
        regime,
        x0,
    };
    config.check()?;
    let sim = Simulation {
        model,
        config,
        horizon: t_end,
        dynamics: Dynamics::new(model),
        base: ChaCha8Rng::seed_from_u64(seed),
    };
    Ok(sim.estimate_statistic(|rec| rec.final_x))
}
