//! Characteristic exponents.
//!
//! For each regime `i` and branch `k` the quadratic
//!
//! ```text
//! G^k_i(b) = sigma_i^2 / 2 * b (b - 1) + mu_i b - (lambda_i + r + eta 1{i = 1, k = U})
//! ```
//!
//! has one positive and one negative root (`zeta^{k,+}_i`, `zeta^{k,-}_i`).
//! The exponents of the value functions are roots of the quartic
//! `F^k = G^k_0 G^k_1 - lambda_0 lambda_1`. Only the two positive roots of
//! `F^L` and the two negative roots of `F^U` are needed, and the quadratic
//! roots bracket each of them:
//!
//! ```text
//! 1 < beta^L_B < zeta^{L,+}_i < beta^L_A
//! beta^U_B < zeta^{U,-}_i < beta^U_A < 0
//! ```

use thiserror::Error;

use crate::model::{Mode, Model, Regime};

/// Maximum bisection steps per root.
pub const MAX_BISECTION_STEPS: usize = 60;
/// Newton steps applied after bisection.
pub const NEWTON_POLISH_STEPS: usize = 3;
/// Left end of the `beta^L_B` bracket.
pub const LOWER_BRACKET_START: f64 = 1.0 + 1e-12;
/// Bracket expansion stops once the width exceeds this multiple of the
/// starting scale.
pub const MAX_EXPANSION: f64 = 1_099_511_627_776.0; // 2^40

/// Relative residual accepted for a quartic root.
pub const RESIDUAL_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Branch {
    /// Below the threshold: positive exponents.
    Lower,
    /// Above the threshold: negative exponents, `eta` enters regime 1.
    Upper,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RootError {
    #[error("bracket failure on {branch:?} branch: {detail}")]
    BracketFailure { branch: Branch, detail: String },
    #[error("root ordering violated: {0}")]
    OrderingViolated(String),
    #[error("quartic residual {residual:e} at {beta} exceeds tolerance (scale {scale:e})")]
    Residual {
        beta: f64,
        residual: f64,
        scale: f64,
    },
}

/// Coefficients `(a, b, c)` of `G(beta) = a beta^2 + b beta - c`.
fn quadratic_coefficients(model: &Model, regime: Regime, branch: Branch) -> (f64, f64, f64) {
    let half_var = 0.5 * model.sigma(regime).powi(2);
    let mut c = model.lambda(regime) + model.r();
    if regime == Regime::One && branch == Branch::Upper {
        c += model.eta();
    }
    (half_var, model.mu(regime) - half_var, c)
}

/// `G^k_i(beta)`.
pub fn g(model: &Model, regime: Regime, branch: Branch, beta: f64) -> f64 {
    let (a, b, c) = quadratic_coefficients(model, regime, branch);
    (a * beta + b) * beta - c
}

/// `dG^k_i / d beta`.
pub fn g_prime(model: &Model, regime: Regime, branch: Branch, beta: f64) -> f64 {
    let (a, b, _) = quadratic_coefficients(model, regime, branch);
    2.0 * a * beta + b
}

/// Sum of the absolute values of the terms of `G^k_i(beta)`.
fn g_magnitude(model: &Model, regime: Regime, branch: Branch, beta: f64) -> f64 {
    let (a, b, c) = quadratic_coefficients(model, regime, branch);
    a * beta * beta + (b * beta).abs() + c
}

/// `F^k(beta) = G^k_0(beta) G^k_1(beta) - lambda_0 lambda_1`.
pub fn quartic(model: &Model, branch: Branch, beta: f64) -> f64 {
    g(model, Regime::Zero, branch, beta) * g(model, Regime::One, branch, beta)
        - model.lambda(Regime::Zero) * model.lambda(Regime::One)
}

fn quartic_prime(model: &Model, branch: Branch, beta: f64) -> f64 {
    g_prime(model, Regime::Zero, branch, beta) * g(model, Regime::One, branch, beta)
        + g(model, Regime::Zero, branch, beta) * g_prime(model, Regime::One, branch, beta)
}

/// Rounding scale for evaluating `F^k` at `beta`.
pub fn quartic_scale(model: &Model, branch: Branch, beta: f64) -> f64 {
    g_magnitude(model, Regime::Zero, branch, beta) * g_magnitude(model, Regime::One, branch, beta)
        + model.lambda(Regime::Zero) * model.lambda(Regime::One)
}

/// Monic coefficients of `F^k`, highest degree first. Exposed for
/// independent root checks.
pub fn quartic_coefficients(model: &Model, branch: Branch) -> [f64; 5] {
    let (a0, b0, c0) = quadratic_coefficients(model, Regime::Zero, branch);
    let (a1, b1, c1) = quadratic_coefficients(model, Regime::One, branch);
    let lead = a0 * a1;
    [
        1.0,
        (a0 * b1 + b0 * a1) / lead,
        (b0 * b1 - a0 * c1 - c0 * a1) / lead,
        (-b0 * c1 - c0 * b1) / lead,
        (c0 * c1 - model.lambda(Regime::Zero) * model.lambda(Regime::One)) / lead,
    ]
}

/// The two real roots of one quadratic `G^k_i`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadraticRoots {
    pub regime: Regime,
    pub branch: Branch,
    pub zeta_plus: f64,
    pub zeta_minus: f64,
}

pub fn quadratic_roots(model: &Model, regime: Regime, branch: Branch) -> QuadraticRoots {
    let (a, b, c) = quadratic_coefficients(model, regime, branch);
    // a > 0 and c > 0, so the discriminant is positive and the roots have
    // opposite signs. Avoid cancellation by computing the larger-magnitude
    // root first.
    let disc = (b * b + 4.0 * a * c).sqrt();
    let q = if b >= 0.0 {
        -0.5 * (b + disc)
    } else {
        -0.5 * (b - disc)
    };
    let r1 = q / a;
    let r2 = -c / q;
    let (zeta_plus, zeta_minus) = if r1 > r2 { (r1, r2) } else { (r2, r1) };
    QuadraticRoots {
        regime,
        branch,
        zeta_plus,
        zeta_minus,
    }
}

/// Bisection on `[lo, hi]` where `f(lo)` and `f(hi)` have opposite signs,
/// followed by guarded Newton polishing.
fn bracketed_root<F, D>(f: F, df: D, mut lo: f64, mut hi: f64) -> f64
where
    F: Fn(f64) -> f64,
    D: Fn(f64) -> f64,
{
    let f_lo_positive = f(lo) > 0.0;
    for _ in 0..MAX_BISECTION_STEPS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let fm = f(mid);
        if fm == 0.0 {
            return mid;
        }
        if (fm > 0.0) == f_lo_positive {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut x = 0.5 * (lo + hi);
    let mut fx = f(x);
    for _ in 0..NEWTON_POLISH_STEPS {
        let d = df(x);
        if d == 0.0 || !d.is_finite() {
            break;
        }
        let next = x - fx / d;
        if !(next >= lo && next <= hi) {
            break;
        }
        let f_next = f(next);
        if f_next.abs() >= fx.abs() {
            break;
        }
        x = next;
        fx = f_next;
    }
    x
}

fn bracket_failure(branch: Branch, detail: impl Into<String>) -> RootError {
    RootError::BracketFailure {
        branch,
        detail: detail.into(),
    }
}

/// Walks away from `start` (where `F < 0`) in direction `dir` by doubling
/// steps until `F > 0`. Returns `(inner, outer)` with `F(inner) < 0 < F(outer)`.
fn expand_bracket(
    model: &Model,
    branch: Branch,
    start: f64,
    dir: f64,
) -> Result<(f64, f64), RootError> {
    let scale = start.abs().max(1.0);
    let mut inner = start;
    let mut step = scale;
    loop {
        let outer = start + dir * step;
        let fo = quartic(model, branch, outer);
        if !fo.is_finite() {
            return Err(bracket_failure(branch, format!("F overflowed at {outer}")));
        }
        if fo > 0.0 {
            return Ok((inner, outer));
        }
        inner = outer;
        step *= 2.0;
        if step > MAX_EXPANSION * scale {
            return Err(bracket_failure(
                branch,
                format!("no sign change within 2^40 x {scale} of {start}"),
            ));
        }
    }
}

/// The two required roots of `F^k`, ordered `(A, B)`.
///
/// For the lower branch `A > B > 1`; for the upper branch `B < A < 0`.
pub fn quartic_branch_roots(model: &Model, branch: Branch) -> Result<(f64, f64), RootError> {
    let q0 = quadratic_roots(model, Regime::Zero, branch);
    let q1 = quadratic_roots(model, Regime::One, branch);
    let f = |b: f64| quartic(model, branch, b);
    let df = |b: f64| quartic_prime(model, branch, b);

    match branch {
        Branch::Lower => {
            let z_min = q0.zeta_plus.min(q1.zeta_plus);
            let z_max = q0.zeta_plus.max(q1.zeta_plus);
            if !(f(z_min) < 0.0 && f(z_max) < 0.0) {
                return Err(bracket_failure(branch, "F(zeta+) is not negative"));
            }
            let mut left = LOWER_BRACKET_START;
            if !(f(left) > 0.0) {
                if model.mode() == Mode::Strict {
                    return Err(bracket_failure(branch, "F(1) is not positive"));
                }
                left = 0.0;
                if !(f(left) > 0.0) {
                    return Err(bracket_failure(branch, "F(0) is not positive"));
                }
            }
            if !(left < z_min) {
                return Err(bracket_failure(branch, "empty bracket below zeta+"));
            }
            let beta_b = bracketed_root(f, df, left, z_min);
            let (inner, outer) = expand_bracket(model, branch, z_max, 1.0)?;
            let beta_a = bracketed_root(f, df, inner, outer);
            Ok((beta_a, beta_b))
        }
        Branch::Upper => {
            let z_min = q0.zeta_minus.min(q1.zeta_minus);
            let z_max = q0.zeta_minus.max(q1.zeta_minus);
            if !(f(z_min) < 0.0 && f(z_max) < 0.0) {
                return Err(bracket_failure(branch, "F(zeta-) is not negative"));
            }
            if !(f(0.0) > 0.0) {
                return Err(bracket_failure(branch, "F(0) is not positive"));
            }
            let beta_a = bracketed_root(f, df, z_max, 0.0);
            let (inner, outer) = expand_bracket(model, branch, z_min, -1.0)?;
            let beta_b = bracketed_root(f, df, outer, inner);
            Ok((beta_a, beta_b))
        }
    }
}

/// The four characteristic exponents and their quadratic brackets.
#[derive(Debug, Clone, PartialEq)]
pub struct RootSet {
    pub beta_la: f64,
    pub beta_lb: f64,
    pub beta_ua: f64,
    pub beta_ub: f64,
    /// `G^L_0`, `G^L_1` roots.
    pub lower: [QuadraticRoots; 2],
    /// `G^U_0`, `G^U_1` roots.
    pub upper: [QuadraticRoots; 2],
}

impl RootSet {
    /// Computes all roots. In strict mode the ordering chain and the residual
    /// bound are enforced; permissive mode returns the roots and leaves the
    /// checks to [`chain_violations`](Self::chain_violations).
    pub fn compute(model: &Model) -> Result<RootSet, RootError> {
        let (beta_la, beta_lb) = quartic_branch_roots(model, Branch::Lower)?;
        let (beta_ua, beta_ub) = quartic_branch_roots(model, Branch::Upper)?;
        let set = RootSet {
            beta_la,
            beta_lb,
            beta_ua,
            beta_ub,
            lower: [
                quadratic_roots(model, Regime::Zero, Branch::Lower),
                quadratic_roots(model, Regime::One, Branch::Lower),
            ],
            upper: [
                quadratic_roots(model, Regime::Zero, Branch::Upper),
                quadratic_roots(model, Regime::One, Branch::Upper),
            ],
        };
        if model.mode() == Mode::Strict {
            if let Some(v) = set.chain_violations().into_iter().next() {
                return Err(RootError::OrderingViolated(v));
            }
        }
        for (branch, beta) in set.labelled() {
            let residual = quartic(model, branch, beta);
            let scale = quartic_scale(model, branch, beta);
            if !(residual.abs() <= RESIDUAL_TOL * scale) {
                return Err(RootError::Residual {
                    beta,
                    residual,
                    scale,
                });
            }
        }
        Ok(set)
    }

    fn labelled(&self) -> [(Branch, f64); 4] {
        [
            (Branch::Lower, self.beta_la),
            (Branch::Lower, self.beta_lb),
            (Branch::Upper, self.beta_ua),
            (Branch::Upper, self.beta_ub),
        ]
    }

    /// Describes every broken link of the ordering chain. Empty when the
    /// chain holds.
    pub fn chain_violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        let zl_min = self.lower[0].zeta_plus.min(self.lower[1].zeta_plus);
        let zl_max = self.lower[0].zeta_plus.max(self.lower[1].zeta_plus);
        let zu_min = self.upper[0].zeta_minus.min(self.upper[1].zeta_minus);
        let zu_max = self.upper[0].zeta_minus.max(self.upper[1].zeta_minus);
        let mut check = |ok: bool, what: String| {
            if !ok {
                out.push(what);
            }
        };
        check(
            1.0 < self.beta_lb,
            format!("beta_LB = {} <= 1", self.beta_lb),
        );
        check(
            self.beta_lb < zl_min,
            format!("beta_LB = {} >= min zeta_L+ = {}", self.beta_lb, zl_min),
        );
        check(
            zl_max < self.beta_la,
            format!("beta_LA = {} <= max zeta_L+ = {}", self.beta_la, zl_max),
        );
        check(
            self.beta_ub < zu_min,
            format!("beta_UB = {} >= min zeta_U- = {}", self.beta_ub, zu_min),
        );
        check(
            zu_max < self.beta_ua,
            format!("beta_UA = {} <= max zeta_U- = {}", self.beta_ua, zu_max),
        );
        check(
            self.beta_ua < 0.0,
            format!("beta_UA = {} >= 0", self.beta_ua),
        );
        out
    }

    pub fn chain_holds(&self) -> bool {
        self.chain_violations().is_empty()
    }
}
