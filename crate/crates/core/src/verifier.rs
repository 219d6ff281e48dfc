//! Numerical checks of the full variational inequality.
//!
//! The closed-form solution is built from value matching, C^2 pasting and the
//! limit `0 < lim V_1 / pi < 1`. The strict inequalities `V_1 > pi` below the
//! threshold and `V_1 < pi` above it are not part of that construction and
//! are checked here on a grid, for single parameter sets and for a full
//! Cartesian sweep.

use std::time::{Duration, Instant};

use rayon::prelude::*;

use crate::model::{Mode, ModelParams, Regime};
use crate::vi::{ViSolution, PASTING_TOL};

/// Grid span below and above the threshold, as multiples of `x*`.
pub const DEFAULT_SPAN: (f64, f64) = (1e-3, 1e3);
pub const DEFAULT_GRID_POINTS: usize = 10_000;
/// Relative half-width of the window around `x*` excluded from the strict
/// inequality checks.
pub const DEFAULT_WINDOW: f64 = 1e-6;

/// `n` log-spaced points from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    assert!(n >= 2 && lo > 0.0 && hi > lo);
    let (a, b) = (lo.ln(), hi.ln());
    let step = (b - a) / (n - 1) as f64;
    (0..n)
        .map(|k| {
            if k == n - 1 {
                hi
            } else {
                (a + step * k as f64).exp()
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryReport {
    pub xstar: f64,
    pub grid_points: usize,
    pub span: (f64, f64),
    pub window: f64,
    /// `min (V_1 - pi)` over grid points in `(0, x*)` outside the window.
    pub lower_margin: f64,
    /// `max (V_1 - pi)` over grid points in `(x*, inf)` outside the window.
    pub upper_margin: f64,
    /// `V_1 / pi` at the right edge of the grid.
    pub tail_ratio: f64,
    /// `a_1 / alpha`, the exact limit of `V_1 / pi`.
    pub limit_ratio: f64,
    pub pass: bool,
}

impl BoundaryReport {
    pub fn lower_ok(&self) -> bool {
        self.lower_margin > 0.0
    }

    pub fn upper_ok(&self) -> bool {
        self.upper_margin < 0.0
    }

    pub fn tail_ok(&self) -> bool {
        self.tail_ratio > 0.0 && self.tail_ratio < 1.0
    }
}

/// Checks `V_1 > pi` on `(0, x*)` and `V_1 < pi` on `(x*, inf)` over `grid_points`
/// log-spaced points spanning `[1e-3 x*, 1e3 x*]`, skipping `|x/x* - 1| < window`.
pub fn check_boundary_conditions(
    sol: &ViSolution,
    grid_points: usize,
    window: f64,
) -> BoundaryReport {
    check_boundary_conditions_over(sol, DEFAULT_SPAN, grid_points, window)
}

/// [`check_boundary_conditions`] over `[span.0 x*, span.1 x*]`; the span must
/// straddle one.
pub fn check_boundary_conditions_over(
    sol: &ViSolution,
    span: (f64, f64),
    grid_points: usize,
    window: f64,
) -> BoundaryReport {
    assert!(grid_points >= 100, "grid needs at least 100 points");
    assert!(
        span.0 > 0.0 && span.0 < 1.0 && span.1 > 1.0,
        "span must straddle x*"
    );
    let xs = sol.xstar;
    let (lo, hi) = span;
    let m = &sol.model;

    let mut lower_margin = f64::INFINITY;
    let mut upper_margin = f64::NEG_INFINITY;
    for x in log_grid(lo * xs, hi * xs, grid_points) {
        if (x / xs - 1.0).abs() < window {
            continue;
        }
        let gap = sol.eval(Regime::One, x, 0).expect("grid is positive") - m.payoff(x);
        if x < xs {
            lower_margin = lower_margin.min(gap);
        } else {
            upper_margin = upper_margin.max(gap);
        }
    }

    let edge = hi * xs;
    let tail_ratio = sol.eval(Regime::One, edge, 0).expect("positive") / m.payoff(edge);
    let mut report = BoundaryReport {
        xstar: xs,
        grid_points,
        span,
        window,
        lower_margin,
        upper_margin,
        tail_ratio,
        limit_ratio: sol.part.a1 / m.alpha(),
        pass: false,
    };
    report.pass = report.lower_ok() && report.upper_ok() && report.tail_ok();
    report
}

/// Relative jumps of `V_i^{(d)}` across the threshold, `[regime][order]`.
///
/// Each gap is `|left - right|` divided by the larger of the two sums of
/// absolute term values, which is the rounding scale of the evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PastingReport {
    pub gaps: [[f64; 3]; 2],
}

impl PastingReport {
    pub fn max_gap(&self) -> f64 {
        self.gaps.iter().flatten().fold(0.0, |a, &b| a.max(b))
    }

    pub fn passes(&self, tol: f64) -> bool {
        self.gaps.iter().flatten().all(|g| *g < tol)
    }
}

pub fn pasting_check(sol: &ViSolution) -> PastingReport {
    let mut gaps = [[0.0; 3]; 2];
    for regime in Regime::BOTH {
        for order in 0..3u8 {
            let l = sol.left_piece(regime, sol.xstar, order);
            let r = sol.right_piece(regime, sol.xstar, order);
            let scale = l.magnitude.max(r.magnitude);
            gaps[regime.index()][order as usize] = if scale > 0.0 {
                (l.value - r.value).abs() / scale
            } else {
                0.0
            };
        }
    }
    PastingReport { gaps }
}

/// Cartesian parameter sweep with fixed discount rate and payoff.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub r: f64,
    pub alpha: f64,
    pub big_k: f64,
    pub big_i: f64,
    /// Values for `mu0` and `mu1`.
    pub mu_values: Vec<f64>,
    /// Values for `sigma0, sigma1, lambda0, lambda1, eta`.
    pub other_values: Vec<f64>,
    pub grid_points: usize,
    pub window: f64,
    pub pasting_tol: f64,
}

impl Default for SweepConfig {
    /// `r = 0.1`, payoff `(x - 0.9)^+ - 0.1`, drifts in
    /// `{-10, -5, -2, -1, -0.5, 0, 0.05, 0.099}` and the remaining five
    /// parameters in `{0.1, 1, 2, 5}`: 65536 sets.
    fn default() -> Self {
        SweepConfig {
            r: 0.1,
            alpha: 1.0,
            big_k: 0.9,
            big_i: 0.1,
            mu_values: vec![-10.0, -5.0, -2.0, -1.0, -0.5, 0.0, 0.05, 0.099],
            other_values: vec![0.1, 1.0, 2.0, 5.0],
            grid_points: DEFAULT_GRID_POINTS,
            window: DEFAULT_WINDOW,
            pasting_tol: PASTING_TOL,
        }
    }
}

impl SweepConfig {
    pub fn len(&self) -> usize {
        self.mu_values.len().pow(2) * self.other_values.len().pow(5)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// The `index`-th parameter set in lexicographic order of
    /// `(mu0, mu1, sigma0, sigma1, lambda0, lambda1, eta)`, last varying fastest.
    pub fn point(&self, index: usize) -> ModelParams {
        let no = self.other_values.len();
        let nm = self.mu_values.len();
        let mut k = index;
        let mut digit = |base: usize| {
            let d = k % base;
            k /= base;
            d
        };
        let eta = self.other_values[digit(no)];
        let lambda1 = self.other_values[digit(no)];
        let lambda0 = self.other_values[digit(no)];
        let sigma1 = self.other_values[digit(no)];
        let sigma0 = self.other_values[digit(no)];
        let mu1 = self.mu_values[digit(nm)];
        let mu0 = self.mu_values[digit(nm)];
        ModelParams {
            r: self.r,
            mu0,
            mu1,
            sigma0,
            sigma1,
            lambda0,
            lambda1,
            eta,
            alpha: self.alpha,
            big_k: self.big_k,
            big_i: self.big_i,
        }
    }

    pub fn points(&self) -> impl Iterator<Item = ModelParams> + '_ {
        (0..self.len()).map(|i| self.point(i))
    }
}

/// Outcome for one sweep point.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub params: ModelParams,
    pub outcome: Result<SweepPoint, String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub xstar: f64,
    pub boundary: BoundaryReport,
    pub max_pasting_gap: f64,
    /// `max_pasting_gap` below the sweep's pasting tolerance.
    pub pasting_ok: bool,
    /// Solve succeeded and the boundary conditions hold.
    pub pass: bool,
}

impl SweepRow {
    pub fn passed(&self) -> bool {
        matches!(&self.outcome, Ok(p) if p.pass)
    }
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    pub total: usize,
    pub passed: usize,
    /// Rows in canonical order.
    pub rows: Vec<SweepRow>,
    pub elapsed: Duration,
}

impl SweepResult {
    pub fn failures(&self) -> impl Iterator<Item = &SweepRow> {
        self.rows.iter().filter(|r| !r.passed())
    }

    pub fn summary(&self) -> String {
        format!("passed {} of {}", self.passed, self.total)
    }
}

/// Solves and checks one parameter set with the sweep settings.
pub fn sweep_point(config: &SweepConfig, params: ModelParams) -> SweepRow {
    let outcome = params
        .validate(Mode::Strict)
        .map_err(|e| e.to_string())
        .and_then(|m| ViSolution::solve(&m).map_err(|e| e.to_string()))
        .map(|sol| {
            let boundary = check_boundary_conditions(&sol, config.grid_points, config.window);
            let max_pasting_gap = pasting_check(&sol).max_gap();
            SweepPoint {
                xstar: sol.xstar,
                pass: boundary.pass,
                boundary,
                max_pasting_gap,
                pasting_ok: max_pasting_gap < config.pasting_tol,
            }
        });
    SweepRow { params, outcome }
}

/// Runs every parameter set of `config`. Per-point failures are recorded,
/// never raised; row order is canonical regardless of thread count.
pub fn parameter_sweep(config: &SweepConfig) -> SweepResult {
    let start = Instant::now();
    let rows: Vec<SweepRow> = (0..config.len())
        .into_par_iter()
        .map(|i| sweep_point(config, config.point(i)))
        .collect();
    let passed = rows.iter().filter(|r| r.passed()).count();
    SweepResult {
        total: rows.len(),
        passed,
        rows,
        elapsed: start.elapsed(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Model;

    fn reference() -> ViSolution {
        let m: Model = ModelParams::reference_example()
            .validate(Mode::Strict)
            .unwrap();
        ViSolution::solve(&m).unwrap()
    }

    #[test]
    fn grid_endpoints() {
        let g = log_grid(1e-3, 1e3, 7);
        assert_eq!(g.len(), 7);
        assert!((g[0] - 1e-3).abs() < 1e-18);
        assert_eq!(g[6], 1e3);
        assert!((g[3] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn reference_passes() {
        let report = check_boundary_conditions(&reference(), DEFAULT_GRID_POINTS, DEFAULT_WINDOW);
        assert!(report.pass, "{report:?}");
        assert!(report.limit_ratio > 0.0 && report.limit_ratio < 1.0);
        assert!((report.tail_ratio - report.limit_ratio).abs() < 1e-2);
    }

    #[test]
    fn perturbed_threshold_fails_below() {
        let sol = reference();
        let moved = sol.with_switch_point(sol.xstar * 1.05);
        let report = check_boundary_conditions(&moved, DEFAULT_GRID_POINTS, DEFAULT_WINDOW);
        assert!(!report.pass);
        assert!(report.lower_margin < 0.0, "{report:?}");
    }

    #[test]
    fn repasted_threshold_breaks_regime_zero_pasting() {
        let sol = reference();
        let bumped = sol.repasted(sol.xstar * 1.05);
        let report = pasting_check(&bumped);
        assert!(report.gaps[1].iter().all(|g| *g < 1e-8), "{report:?}");
        assert!(report.gaps[0][1] > 1e-2, "{report:?}");
    }

    #[test]
    fn margins_vanish_at_threshold() {
        let sol = reference();
        let gap = |w: f64| {
            let x = sol.xstar * (1.0 - w);
            sol.eval(Regime::One, x, 0).unwrap() - sol.model.payoff(x)
        };
        let mut prev = f64::INFINITY;
        for w in [1e-2, 1e-3, 1e-4, 1e-5] {
            let g = gap(w);
            assert!(g > 0.0 && g < prev);
            assert!(g / w < 1.0, "{w} {g}");
            prev = g;
        }
        assert!(gap(1e-9) < 1e-8);
    }

    #[test]
    fn reference_pasting() {
        let sol = reference();
        let report = pasting_check(&sol);
        assert!(report.passes(1e-8), "{report:?}");
        // order-0 gap for regime 1 is bounded by the jump relative to pi(x*)
        let l = sol.left_piece(Regime::One, sol.xstar, 0).value;
        let r = sol.right_piece(Regime::One, sol.xstar, 0).value;
        let plain = (l - r).abs() / sol.model.payoff(sol.xstar);
        assert!(report.gaps[1][0] <= plain + f64::EPSILON);
        assert!(plain < 1e-8);
    }

    #[test]
    fn corrupted_coefficient_breaks_second_order() {
        let mut sol = reference();
        sol.scaled.ub[1] *= 1.01;
        let report = pasting_check(&sol);
        assert!(report.gaps[1][2] > 1e-8, "{report:?}");
        assert!(!report.passes(1e-8));
    }

    #[test]
    fn sweep_size_and_order() {
        let cfg = SweepConfig::default();
        assert_eq!(cfg.len(), 65536);
        let first = cfg.point(0);
        assert_eq!((first.mu0, first.mu1, first.eta), (-10.0, -10.0, 0.1));
        let second = cfg.point(1);
        assert_eq!(second.eta, 1.0);
        let last = cfg.point(65535);
        assert_eq!(
            (last.mu0, last.mu1, last.sigma0, last.eta),
            (0.099, 0.099, 5.0, 5.0)
        );
    }

    #[test]
    fn small_sweep_is_clean() {
        let cfg = SweepConfig {
            mu_values: vec![-1.0, 0.05],
            other_values: vec![0.1, 2.0],
            grid_points: 500,
            ..SweepConfig::default()
        };
        let res = parameter_sweep(&cfg);
        assert_eq!(res.total, 128);
        assert_eq!(res.passed, 128, "{:?}", res.failures().next());
        assert_eq!(res.summary(), "passed 128 of 128");
    }
}
