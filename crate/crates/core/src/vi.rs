//! Closed-form solution of the variational inequality.
//!
//! Below the threshold both value functions are combinations of
//! `x^{beta^L_A}` and `x^{beta^L_B}`; above it they are combinations of
//! `x^{beta^U_A}` and `x^{beta^U_B}` plus a linear particular solution
//! `a_i x + b_i`. The regime-1 coefficients follow from C^2 pasting of `V_1`
//! at `x*` together with `V_1(x*) = alpha x* - alpha K~`; the regime-0
//! coefficients are fixed multiples of them, and `x*` itself is the root of
//! the linear condition left by continuity of `V_0` and `V_0'`.
//!
//! Internally every power term is stored as `c (x / x*)^beta` rather than
//! `A x^beta`. The two are the same function (`c = A x*^beta`), but the
//! scaled form stays finite when the exponents are large.

use thiserror::Error;

use crate::model::{Mode, Model, ModelError, Regime};
use crate::roots::{g, Branch, RootError, RootSet};

/// Default relative tolerance for algebraic identities.
pub const IDENTITY_TOL: f64 = 1e-9;
/// Default relative tolerance for C^2 pasting at the threshold.
pub const PASTING_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolveError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Roots(#[from] RootError),
    #[error("singular denominator in {0}")]
    SingularDenominator(&'static str),
    #[error("P/Q sign invariant violated: {0}")]
    SignInvariant(String),
    #[error("threshold is not positive: {0}")]
    NonPositiveThreshold(f64),
    #[error("threshold {xstar} lies below the effective strike {k_tilde}")]
    BelowEffectiveStrike { xstar: f64, k_tilde: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Error)]
#[error("value functions are defined for x > 0 (got {0})")]
pub struct DomainError(pub f64);

/// Linear particular solution `a_i x + b_i` above the threshold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParticularSolution {
    pub a0: f64,
    pub a1: f64,
    pub b0: f64,
    pub b1: f64,
}

impl ParticularSolution {
    pub fn compute(model: &Model) -> Result<Self, SolveError> {
        let p = model.params();
        let (r, eta, alpha, kt) = (p.r, p.eta, p.alpha, model.k_tilde());
        let (l0, l1) = (p.lambda0, p.lambda1);

        let den_a = (r - p.mu0 + l0) * (r - p.mu1 + l1 + eta) - l0 * l1;
        let den_b = l0 * l1 - (r + l0) * (r + l1 + eta);
        if den_a == 0.0 || !den_a.is_finite() {
            return Err(SolveError::SingularDenominator(
                "slope of the particular solution",
            ));
        }
        if den_b == 0.0 || !den_b.is_finite() {
            return Err(SolveError::SingularDenominator(
                "intercept of the particular solution",
            ));
        }
        Ok(ParticularSolution {
            a0: alpha * eta * l0 / den_a,
            a1: alpha * eta * (r - p.mu0 + l0) / den_a,
            b0: alpha * kt * eta * l0 / den_b,
            b1: alpha * kt * eta * (r + l0) / den_b,
        })
    }

    pub fn a(&self, regime: Regime) -> f64 {
        match regime {
            Regime::Zero => self.a0,
            Regime::One => self.a1,
        }
    }

    pub fn b(&self, regime: Regime) -> f64 {
        match regime {
            Regime::Zero => self.b0,
            Regime::One => self.b1,
        }
    }
}

/// The eight quotients giving the regime-1 coefficients as
/// `A^k_1 = x*^{-beta^k_A} (P^k_A x* + Q^k_A)` (same for `B`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PqOctet {
    pub p_la: f64,
    pub q_la: f64,
    pub p_lb: f64,
    pub q_lb: f64,
    pub p_ua: f64,
    pub q_ua: f64,
    pub p_ub: f64,
    pub q_ub: f64,
}

impl PqOctet {
    pub fn compute(
        roots: &RootSet,
        part: &ParticularSolution,
        model: &Model,
    ) -> Result<Self, SolveError> {
        let (la, lb, ua, ub) = (roots.beta_la, roots.beta_lb, roots.beta_ua, roots.beta_ub);
        let alpha = model.alpha();
        let akt = alpha * model.k_tilde();
        let (a1, b1) = (part.a1, part.b1);

        let spread = la + lb - ua - ub;
        let den_l = (la - lb) * spread;
        let den_u = (ua - ub) * spread;
        for (den, what) in [(den_l, "lower-branch P/Q"), (den_u, "upper-branch P/Q")] {
            if den == 0.0 || !den.is_finite() {
                return Err(SolveError::SingularDenominator(what));
            }
        }

        Ok(PqOctet {
            p_la: (alpha * (lb - ua) * (ub - lb) + a1 * (ua - 1.0) * (ub - 1.0)) / den_l,
            q_la: (-akt * (lb - ua) * (ub - lb) + b1 * ua * ub) / den_l,
            p_lb: (alpha * (la - ua) * (la - ub) - a1 * (ua - 1.0) * (ub - 1.0)) / den_l,
            q_lb: (-akt * (la - ua) * (la - ub) - b1 * ua * ub) / den_l,
            p_ua: (alpha * (la - ub) * (lb - ub) + a1 * (ub - 1.0) * (la + lb - ub - 1.0)) / den_u,
            q_ua: (-akt * (la - ub) * (lb - ub) + b1 * ub * (la + lb - ub)) / den_u,
            p_ub: (alpha * (la - ua) * (ua - lb) - a1 * (ua - 1.0) * (la + lb - ua - 1.0)) / den_u,
            q_ub: (-akt * (la - ua) * (ua - lb) - b1 * ua * (la + lb - ua)) / den_u,
        })
    }

    /// Names of the entries whose sign differs from
    /// `P_LA, P_UB < 0 < P_LB, P_UA` and `Q_LB, Q_UA < 0 < Q_LA, Q_UB`.
    pub fn sign_violations(&self) -> Vec<&'static str> {
        let checks = [
            ("P_LA < 0", self.p_la < 0.0),
            ("P_UB < 0", self.p_ub < 0.0),
            ("P_LB > 0", self.p_lb > 0.0),
            ("P_UA > 0", self.p_ua > 0.0),
            ("Q_LA > 0", self.q_la > 0.0),
            ("Q_UB > 0", self.q_ub > 0.0),
            ("Q_LB < 0", self.q_lb < 0.0),
            ("Q_UA < 0", self.q_ua < 0.0),
        ];
        checks
            .into_iter()
            .filter(|(_, ok)| !ok)
            .map(|(name, _)| name)
            .collect()
    }
}

/// `R^k = P^k K~ + Q^k` for each of the four terms, computed without the
/// cancellation of the direct sum (the `alpha` parts of `P K~` and `Q` cancel
/// exactly). The regime-1 scaled coefficients are then
/// `P^k (x* - K~) + R^k`, which stays accurate when `x*` is close to `K~`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShiftedIntercepts {
    pub la: f64,
    pub lb: f64,
    pub ua: f64,
    pub ub: f64,
}

impl ShiftedIntercepts {
    pub fn compute(roots: &RootSet, part: &ParticularSolution, model: &Model) -> Self {
        let (la, lb, ua, ub) = (roots.beta_la, roots.beta_lb, roots.beta_ua, roots.beta_ub);
        let akt = part.a1 * model.k_tilde();
        let b1 = part.b1;
        let spread = la + lb - ua - ub;
        let den_l = (la - lb) * spread;
        let den_u = (ua - ub) * spread;
        let lower = (akt * (ua - 1.0) * (ub - 1.0) + b1 * ua * ub) / den_l;
        ShiftedIntercepts {
            la: lower,
            lb: -lower,
            ua: (akt * (ub - 1.0) * (la + lb - ub - 1.0) + b1 * ub * (la + lb - ub)) / den_u,
            ub: -(akt * (ua - 1.0) * (la + lb - ua - 1.0) + b1 * ua * (la + lb - ua)) / den_u,
        }
    }
}

/// `-lambda_0 / G^k_0(beta)`, the factor turning a regime-1 coefficient into
/// its regime-0 partner. At a root of `F^k` this equals `-G^k_1(beta) / lambda_1`;
/// whichever quadratic is larger in magnitude is used, since the smaller one
/// is the difference of nearly equal terms when the exponent is large.
pub fn regime_zero_ratio(model: &Model, branch: Branch, beta: f64) -> f64 {
    let g0 = g(model, Regime::Zero, branch, beta);
    let g1 = g(model, Regime::One, branch, beta);
    if g1.abs() > g0.abs() {
        -g1 / model.lambda(Regime::One)
    } else {
        -model.lambda(Regime::Zero) / g0
    }
}

/// Weights `(1 - beta) / G^L_0(beta)` and `(beta - 1) / G^U_0(beta)` of the
/// threshold condition, ordered `LA, LB, UA, UB`.
fn threshold_weights(roots: &RootSet, model: &Model) -> [f64; 4] {
    let inv_g0 =
        |branch, beta| -regime_zero_ratio(model, branch, beta) / model.lambda(Regime::Zero);
    [
        (1.0 - roots.beta_la) * inv_g0(Branch::Lower, roots.beta_la),
        (1.0 - roots.beta_lb) * inv_g0(Branch::Lower, roots.beta_lb),
        (roots.beta_ua - 1.0) * inv_g0(Branch::Upper, roots.beta_ua),
        (roots.beta_ub - 1.0) * inv_g0(Branch::Upper, roots.beta_ub),
    ]
}

/// `x* - K~`, from the threshold condition rewritten around `K~`.
pub fn threshold_excess(
    roots: &RootSet,
    part: &ParticularSolution,
    pq: &PqOctet,
    model: &Model,
) -> f64 {
    let w = threshold_weights(roots, model);
    let rs = ShiftedIntercepts::compute(roots, part, model);
    let big_p = w[0] * pq.p_la + w[1] * pq.p_lb + w[2] * pq.p_ua + w[3] * pq.p_ub;
    let big_r = w[0] * rs.la
        + w[1] * rs.lb
        + w[2] * rs.ua
        + w[3] * rs.ub
        + part.b0 / model.lambda(Regime::Zero);
    -big_r / big_p
}

/// `x* = -Q / P` from the continuity of `V_0` and `V_0'` at the threshold.
pub fn optimal_threshold(
    roots: &RootSet,
    part: &ParticularSolution,
    pq: &PqOctet,
    model: &Model,
) -> Result<f64, SolveError> {
    let w = threshold_weights(roots, model);
    let big_p = w[0] * pq.p_la + w[1] * pq.p_lb + w[2] * pq.p_ua + w[3] * pq.p_ub;
    let big_q = w[0] * pq.q_la
        + w[1] * pq.q_lb
        + w[2] * pq.q_ua
        + w[3] * pq.q_ub
        + part.b0 / model.lambda(Regime::Zero);

    let xstar = -big_q / big_p;
    if !(xstar > 0.0 && xstar.is_finite()) {
        return Err(SolveError::NonPositiveThreshold(xstar));
    }
    Ok(xstar)
}

/// Raw piecewise coefficients `A^k_i`, `B^k_i`, indexed by regime.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryCoefficients {
    pub a_l: [f64; 2],
    pub b_l: [f64; 2],
    pub a_u: [f64; 2],
    pub b_u: [f64; 2],
}

/// Coefficients of `(x / x*)^beta` for each power term, indexed by regime.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaledCoefficients {
    pub la: [f64; 2],
    pub lb: [f64; 2],
    pub ua: [f64; 2],
    pub ub: [f64; 2],
}

impl ScaledCoefficients {
    /// Pastes `V_1` at `K~ + excess` and derives the regime-0 terms from the
    /// ratios `-lambda_0 / G^k_0(beta)`.
    pub fn paste(
        roots: &RootSet,
        pq: &PqOctet,
        shifted: &ShiftedIntercepts,
        excess: f64,
        model: &Model,
    ) -> Self {
        let ratio = |branch, beta| regime_zero_ratio(model, branch, beta);
        let la1 = pq.p_la * excess + shifted.la;
        let lb1 = pq.p_lb * excess + shifted.lb;
        let ua1 = pq.p_ua * excess + shifted.ua;
        let ub1 = pq.p_ub * excess + shifted.ub;
        ScaledCoefficients {
            la: [ratio(Branch::Lower, roots.beta_la) * la1, la1],
            lb: [ratio(Branch::Lower, roots.beta_lb) * lb1, lb1],
            ua: [ratio(Branch::Upper, roots.beta_ua) * ua1, ua1],
            ub: [ratio(Branch::Upper, roots.beta_ub) * ub1, ub1],
        }
    }

    /// Re-derives the term with the largest threshold weight from the
    /// threshold condition `sum_L (1 - beta) c_0 - sum_U (1 - beta) c_0 = b_0`.
    /// When `G^k_0(beta)` is tiny, `c_1` is below the rounding level of the
    /// pasting solve and the factor `-lambda_0 / G^k_0` would magnify that
    /// noise into `c_0`; the threshold condition has no such factor.
    pub fn balance(&mut self, roots: &RootSet, part: &ParticularSolution, model: &Model) {
        let betas = [roots.beta_la, roots.beta_lb, roots.beta_ua, roots.beta_ub];
        let branches = [Branch::Lower, Branch::Lower, Branch::Upper, Branch::Upper];
        let signs = [1.0, 1.0, -1.0, -1.0];
        let mut terms = [self.la, self.lb, self.ua, self.ub];
        let ratios: Vec<f64> = (0..4)
            .map(|k| regime_zero_ratio(model, branches[k], betas[k]))
            .collect();
        let k = (0..4)
            .max_by(|&i, &j| {
                let w = |n: usize| ((1.0 - betas[n]) * ratios[n]).abs();
                w(i).total_cmp(&w(j))
            })
            .expect("four terms");
        let rest: f64 = (0..4)
            .filter(|&j| j != k)
            .map(|j| signs[j] * (1.0 - betas[j]) * terms[j][0])
            .sum();
        let c0 = signs[k] * (part.b0 - rest) / (1.0 - betas[k]);
        terms[k] = [c0, c0 / ratios[k]];
        [self.la, self.lb, self.ua, self.ub] = terms;
    }

    pub fn unscale(&self, roots: &RootSet, threshold: f64) -> BoundaryCoefficients {
        let s = |c: [f64; 2], beta: f64| {
            let f = threshold.powf(-beta);
            [c[0] * f, c[1] * f]
        };
        BoundaryCoefficients {
            a_l: s(self.la, roots.beta_la),
            b_l: s(self.lb, roots.beta_lb),
            a_u: s(self.ua, roots.beta_ua),
            b_u: s(self.ub, roots.beta_ub),
        }
    }
}

/// `A^k_1 = x*^{-beta^k_A} (P^k_A x* + Q^k_A)` (same for `B`), and the
/// regime-0 coefficients `A^k_0 = -lambda_0 A^k_1 / G^k_0(beta^k_A)`.
pub fn boundary_coefficients(
    roots: &RootSet,
    pq: &PqOctet,
    xstar: f64,
    model: &Model,
) -> BoundaryCoefficients {
    let pair = |p: f64, q: f64, branch, beta: f64| {
        let c1 = xstar.powf(-beta) * (p * xstar + q);
        [regime_zero_ratio(model, branch, beta) * c1, c1]
    };
    BoundaryCoefficients {
        a_l: pair(pq.p_la, pq.q_la, Branch::Lower, roots.beta_la),
        b_l: pair(pq.p_lb, pq.q_lb, Branch::Lower, roots.beta_lb),
        a_u: pair(pq.p_ua, pq.q_ua, Branch::Upper, roots.beta_ua),
        b_u: pair(pq.p_ub, pq.q_ub, Branch::Upper, roots.beta_ub),
    }
}

/// A value (or derivative) together with the sum of the absolute values of
/// the terms that produced it, for relative error checks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluated {
    pub value: f64,
    pub magnitude: f64,
}

impl Evaluated {
    fn from_terms(terms: &[f64]) -> Self {
        Evaluated {
            value: terms.iter().sum(),
            magnitude: terms.iter().map(|t| t.abs()).sum(),
        }
    }
}

/// `beta (beta - 1) ... (beta - order + 1)`.
fn falling(beta: f64, order: u8) -> f64 {
    (0..order).fold(1.0, |acc, k| acc * (beta - k as f64))
}

/// Residual of the governing ODE at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdeResidual {
    pub residual: f64,
    /// Sum of absolute values of the ODE terms.
    pub scale: f64,
}

impl OdeResidual {
    pub fn relative(&self) -> f64 {
        if self.scale > 0.0 {
            self.residual.abs() / self.scale
        } else {
            self.residual.abs()
        }
    }
}

/// Complete solution: exponents, constants, threshold and coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct ViSolution {
    pub model: Model,
    pub roots: RootSet,
    pub part: ParticularSolution,
    pub pq: PqOctet,
    pub xstar: f64,
    pub scaled: ScaledCoefficients,
}

impl ViSolution {
    /// Solves for `(V_0, V_1, x*)`. Strict mode rejects any violated sign
    /// fact; permissive mode computes through them.
    pub fn solve(model: &Model) -> Result<Self, SolveError> {
        let roots = RootSet::compute(model)?;
        let part = ParticularSolution::compute(model)?;
        let pq = PqOctet::compute(&roots, &part, model)?;
        let strict = model.mode() == Mode::Strict;
        if strict {
            let bad = pq.sign_violations();
            if !bad.is_empty() {
                return Err(SolveError::SignInvariant(bad.join(", ")));
            }
        }
        let xstar = optimal_threshold(&roots, &part, &pq, model)?;
        // x* >= K~ >= K is what makes the linearised payoff equal the payoff
        // above the threshold.
        if strict && xstar < model.k_tilde() * (1.0 - 1e-12) {
            return Err(SolveError::BelowEffectiveStrike {
                xstar,
                k_tilde: model.k_tilde(),
            });
        }
        let shifted = ShiftedIntercepts::compute(&roots, &part, model);
        let excess = threshold_excess(&roots, &part, &pq, model);
        let mut scaled = ScaledCoefficients::paste(&roots, &pq, &shifted, excess, model);
        scaled.balance(&roots, &part, model);
        Ok(ViSolution {
            model: model.clone(),
            roots,
            part,
            pq,
            xstar,
            scaled,
        })
    }

    /// The same exponents and constants with `V_1` re-pasted at a different
    /// threshold. `V_0` is then generally discontinuous at `threshold`.
    pub fn repasted(&self, threshold: f64) -> ViSolution {
        let shifted = ShiftedIntercepts::compute(&self.roots, &self.part, &self.model);
        let excess = threshold - self.model.k_tilde();
        ViSolution {
            xstar: threshold,
            scaled: ScaledCoefficients::paste(&self.roots, &self.pq, &shifted, excess, &self.model),
            ..self.clone()
        }
    }

    /// Keeps every `A^k_i x^beta` term unchanged but switches from the left
    /// to the right formulas at `switch` instead of `x*`.
    pub fn with_switch_point(&self, switch: f64) -> ViSolution {
        let t = switch / self.xstar;
        let rescale = |c: [f64; 2], beta: f64| {
            let f = t.powf(beta);
            [c[0] * f, c[1] * f]
        };
        let s = &self.scaled;
        ViSolution {
            xstar: switch,
            scaled: ScaledCoefficients {
                la: rescale(s.la, self.roots.beta_la),
                lb: rescale(s.lb, self.roots.beta_lb),
                ua: rescale(s.ua, self.roots.beta_ua),
                ub: rescale(s.ub, self.roots.beta_ub),
            },
            ..self.clone()
        }
    }

    pub fn coefficients(&self) -> BoundaryCoefficients {
        self.scaled.unscale(&self.roots, self.xstar)
    }

    pub fn value_function(&self, regime: Regime) -> ValueFunction<'_> {
        ValueFunction { sol: self, regime }
    }

    /// Left-piece formula evaluated at any `x > 0`.
    pub fn left_piece(&self, regime: Regime, x: f64, order: u8) -> Evaluated {
        let i = regime.index();
        let t = x / self.xstar;
        let s = self.xstar.powi(order as i32);
        let term = |c: f64, beta: f64| c * falling(beta, order) * t.powf(beta - order as f64) / s;
        Evaluated::from_terms(&[
            term(self.scaled.la[i], self.roots.beta_la),
            term(self.scaled.lb[i], self.roots.beta_lb),
        ])
    }

    /// Right-piece formula evaluated at any `x > 0`.
    pub fn right_piece(&self, regime: Regime, x: f64, order: u8) -> Evaluated {
        let i = regime.index();
        let t = x / self.xstar;
        let s = self.xstar.powi(order as i32);
        let term = |c: f64, beta: f64| c * falling(beta, order) * t.powf(beta - order as f64) / s;
        let ua = term(self.scaled.ua[i], self.roots.beta_ua);
        let ub = term(self.scaled.ub[i], self.roots.beta_ub);
        let (a, b) = (self.part.a(regime), self.part.b(regime));
        match order {
            0 => Evaluated::from_terms(&[ua, ub, a * x, b]),
            1 => Evaluated::from_terms(&[ua, ub, a]),
            _ => Evaluated::from_terms(&[ua, ub]),
        }
    }

    /// `V_i^{(order)}(x)`; the left piece is used at `x = x*`.
    pub fn eval(&self, regime: Regime, x: f64, order: u8) -> Result<f64, DomainError> {
        Ok(self.eval_detailed(regime, x, order)?.value)
    }

    pub fn eval_detailed(
        &self,
        regime: Regime,
        x: f64,
        order: u8,
    ) -> Result<Evaluated, DomainError> {
        if !(x > 0.0 && x.is_finite()) {
            return Err(DomainError(x));
        }
        Ok(if x <= self.xstar {
            self.left_piece(regime, x, order)
        } else {
            self.right_piece(regime, x, order)
        })
    }

    /// Residual of the ODE for `V_i` at `x`, using analytic derivatives.
    /// Above the threshold the regime-1 equation carries the opportunity term
    /// `eta (alpha x - alpha K~ - V_1)`.
    pub fn ode_residual(&self, regime: Regime, x: f64) -> Result<OdeResidual, DomainError> {
        let m = &self.model;
        let v = self.eval_detailed(regime, x, 0)?;
        let d1 = self.eval_detailed(regime, x, 1)?;
        let d2 = self.eval_detailed(regime, x, 2)?;
        let other = self.eval_detailed(regime.other(), x, 0)?;
        let r = m.r();
        let mu = m.mu(regime);
        let half_var = 0.5 * m.sigma(regime).powi(2);
        let lam = m.lambda(regime);

        let mut residual = -r * v.value
            + mu * x * d1.value
            + half_var * x * x * d2.value
            + lam * (other.value - v.value);
        let mut scale = r * v.magnitude
            + (mu * x).abs() * d1.magnitude
            + half_var * x * x * d2.magnitude
            + lam * (other.magnitude + v.magnitude);
        if regime == Regime::One && x > self.xstar {
            let eta = m.eta();
            residual += eta * (m.linear_payoff(x) - v.value);
            scale += eta * (m.alpha() * (x + m.k_tilde()) + v.magnitude);
        }
        Ok(OdeResidual { residual, scale })
    }
}

/// `V_i` and its first two derivatives for a fixed regime.
#[derive(Debug, Clone, Copy)]
pub struct ValueFunction<'a> {
    sol: &'a ViSolution,
    regime: Regime,
}

impl ValueFunction<'_> {
    pub fn regime(&self) -> Regime {
        self.regime
    }

    pub fn value(&self, x: f64) -> Result<f64, DomainError> {
        self.sol.eval(self.regime, x, 0)
    }

    pub fn derivative(&self, x: f64) -> Result<f64, DomainError> {
        self.sol.eval(self.regime, x, 1)
    }

    pub fn second_derivative(&self, x: f64) -> Result<f64, DomainError> {
        self.sol.eval(self.regime, x, 2)
    }

    /// Slope of the linear asymptote `a_i x + b_i`.
    pub fn asymptotic_slope(&self) -> f64 {
        self.sol.part.a(self.regime)
    }

    pub fn asymptotic_intercept(&self) -> f64 {
        self.sol.part.b(self.regime)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelParams;

    fn reference() -> ViSolution {
        let m = ModelParams::reference_example()
            .validate(Mode::Strict)
            .unwrap();
        ViSolution::solve(&m).unwrap()
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
    }

    #[test]
    fn reference_threshold() {
        let sol = reference();
        assert!(rel(sol.xstar, 1.250142442232948) < 1e-9, "{}", sol.xstar);
    }

    #[test]
    fn reversed_drift_threshold() {
        let m = ModelParams::reversed_drift_example()
            .validate(Mode::Permissive)
            .unwrap();
        let sol = ViSolution::solve(&m).unwrap();
        assert!(rel(sol.xstar, 1.152507688970727) < 1e-9, "{}", sol.xstar);
    }

    #[test]
    fn particular_solution_reference() {
        let p = reference().part;
        assert!((p.a0 - 0.80).abs() < 0.01);
        assert!((p.b0 + 0.83).abs() < 0.01);
        assert!((p.a1 - 0.88).abs() < 0.01);
        assert!((p.b1 + 0.87).abs() < 0.01);
        // den_a = 2.2 * 2.05 - 2 = 2.51, den_b = 2 - 2.1 * 2.1 = -2.41
        assert!(rel(p.a0, 2.0 / 2.51) < 1e-12);
        assert!(rel(p.a1, 2.2 / 2.51) < 1e-12);
        assert!(rel(p.b0, -2.0 / 2.41) < 1e-12);
        assert!(rel(p.b1, -2.1 / 2.41) < 1e-12);
    }

    #[test]
    fn particular_solution_is_linear_in_alpha() {
        let base = ModelParams::reference_example();
        let small = ModelParams {
            alpha: 1e-6,
            big_i: base.big_i * 1e-6,
            ..base
        };
        let p0 = ParticularSolution::compute(&base.validate(Mode::Strict).unwrap()).unwrap();
        let p1 = ParticularSolution::compute(&small.validate(Mode::Strict).unwrap()).unwrap();
        for (a, b) in [
            (p0.a0, p1.a0),
            (p0.a1, p1.a1),
            (p0.b0, p1.b0),
            (p0.b1, p1.b1),
        ] {
            assert!(rel(b, a * 1e-6) < 1e-12);
        }
    }

    #[test]
    fn shifted_route_agrees_with_direct_threshold() {
        let sol = reference();
        let excess = threshold_excess(&sol.roots, &sol.part, &sol.pq, &sol.model);
        assert!(rel(sol.model.k_tilde() + excess, sol.xstar) < 1e-14);
        let direct = boundary_coefficients(&sol.roots, &sol.pq, sol.xstar, &sol.model);
        let stored = sol.coefficients();
        for (a, b) in [
            (direct.a_l, stored.a_l),
            (direct.b_l, stored.b_l),
            (direct.a_u, stored.a_u),
            (direct.b_u, stored.b_u),
        ] {
            assert!(
                rel(a[0], b[0]) < 1e-10 && rel(a[1], b[1]) < 1e-10,
                "{a:?} {b:?}"
            );
        }
    }

    #[test]
    fn reference_signs() {
        assert!(reference().pq.sign_violations().is_empty());
    }

    #[test]
    fn regime_zero_ratios() {
        let sol = reference();
        let c = sol.coefficients();
        let m = &sol.model;
        let l0 = m.lambda(Regime::Zero);
        let lhs = c.a_l[0] * g(m, Regime::Zero, Branch::Lower, sol.roots.beta_la) + l0 * c.a_l[1];
        assert!(lhs.abs() <= 1e-10 * (l0 * c.a_l[1]).abs());
    }

    #[test]
    fn value_matching_at_threshold() {
        let sol = reference();
        let v = sol.eval(Regime::One, sol.xstar, 0).unwrap();
        let pi = sol.model.payoff(sol.xstar);
        assert!(rel(v, pi) < 1e-10);
    }

    #[test]
    fn eval_rejects_nonpositive() {
        let sol = reference();
        assert_eq!(sol.eval(Regime::Zero, 0.0, 0), Err(DomainError(0.0)));
        assert!(sol.eval(Regime::Zero, -1.0, 1).is_err());
        assert!(sol.eval(Regime::One, f64::NAN, 0).is_err());
    }

    #[test]
    fn right_tail_is_linear() {
        let sol = reference();
        for regime in Regime::BOTH {
            let x = 1e6;
            let v = sol.eval(regime, x, 0).unwrap();
            let lin = sol.part.a(regime) * x + sol.part.b(regime);
            assert!(rel(v, lin) < 1e-12);
        }
    }

    #[test]
    fn value_at_two() {
        let sol = reference();
        let v = sol.eval(Regime::One, 2.0, 0).unwrap();
        // Printed two-digit right piece: 0.07 * 2^-5.28 + 0.88 * 2 - 0.87 = 0.892.
        // Rounding of a_1 and b_1 alone allows +-0.015 at x = 2.
        let printed = 0.07 * 2f64.powf(-5.28) + 0.88 * 2.0 - 0.87;
        assert!((printed - 0.892).abs() < 1e-3);
        assert!((v - printed).abs() < 0.015, "{v}");
        // Exact tail 2 a_1 + b_1 = 4.4 / 2.51 - 2.1 / 2.41; the power terms add
        // about 0.0019.
        let tail = 4.4 / 2.51 - 2.1 / 2.41;
        assert!(v - tail > 0.0 && v - tail < 0.003, "{v} {tail}");
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let sol = reference();
        for regime in Regime::BOTH {
            for x in [0.3, 0.9, 1.6, 4.0] {
                let h = 1e-5 * x;
                let f = |y| sol.eval(regime, y, 0).unwrap();
                let d1 = sol.eval(regime, x, 1).unwrap();
                let fd1 = (f(x + h) - f(x - h)) / (2.0 * h);
                assert!((d1 - fd1).abs() < 1e-6 * (1.0 + d1.abs()), "{d1} {fd1}");
                let fp = |y| sol.eval(regime, y, 1).unwrap();
                let d2 = sol.eval(regime, x, 2).unwrap();
                let fd2 = (fp(x + h) - fp(x - h)) / (2.0 * h);
                assert!((d2 - fd2).abs() < 1e-5 * (1.0 + d2.abs()), "{d2} {fd2}");
            }
        }
    }

    #[test]
    fn ode_holds_on_both_pieces() {
        let sol = reference();
        for regime in Regime::BOTH {
            for x in [0.05, sol.xstar / 2.0, 1.1, 2.0 * sol.xstar, 50.0] {
                let res = sol.ode_residual(regime, x).unwrap();
                assert!(res.relative() < 1e-9, "{regime} {x} {res:?}");
                let v = sol.eval(regime, x, 0).unwrap();
                assert!(res.residual.abs() < 1e-9 * (1.0 + (sol.model.r() * v).abs()));
            }
        }
    }

    #[test]
    fn pasting_at_threshold() {
        let sol = reference();
        for regime in Regime::BOTH {
            for order in 0..=2 {
                let l = sol.left_piece(regime, sol.xstar, order);
                let r = sol.right_piece(regime, sol.xstar, order);
                let scale = l.magnitude.max(r.magnitude);
                assert!((l.value - r.value).abs() < 1e-8 * scale);
            }
        }
    }

    #[test]
    fn repasting_keeps_value_matching() {
        let sol = reference().repasted(1.3);
        let v = sol.eval(Regime::One, 1.3, 0).unwrap();
        assert!(rel(v, sol.model.linear_payoff(1.3)) < 1e-10);
    }
}
