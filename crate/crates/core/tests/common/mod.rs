//! Independent reference computations shared by the integration tests.
//!
//! Nothing here calls the closed-form threshold or coefficient formulas of
//! the library: roots come from companion-matrix eigenvalues, the particular
//! solution and pasting coefficients from dense linear solves, and the
//! threshold from bisection on the regime-0 pasting residual.

#![allow(dead_code)]

use nalgebra::{Matrix2, Matrix4, Vector2, Vector4};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use regstop_core::roots::quartic_coefficients;
use regstop_core::{Branch, Mode, Model, ModelParams};

/// Real roots of the monic quartic `coeffs` (highest degree first).
pub fn companion_real_roots(coeffs: [f64; 5]) -> Vec<f64> {
    let mut m = Matrix4::<f64>::zeros();
    for j in 0..4 {
        m[(0, j)] = -coeffs[j + 1];
    }
    for i in 1..4 {
        m[(i, i - 1)] = 1.0;
    }
    let mut roots: Vec<f64> = m
        .complex_eigenvalues()
        .iter()
        .filter(|z| z.im.abs() <= 1e-9 * (1.0 + z.re.abs()))
        .map(|z| z.re)
        .collect();
    roots.sort_by(|a, b| a.partial_cmp(b).unwrap());
    roots
}

/// `(beta_A, beta_B)` per branch: the two roots above one for the lower
/// branch (larger first), the two negative roots for the upper branch
/// (larger first).
pub fn oracle_exponents(model: &Model) -> [f64; 4] {
    let lower: Vec<f64> = companion_real_roots(quartic_coefficients(model, Branch::Lower))
        .into_iter()
        .filter(|b| *b > 1.0)
        .collect();
    let upper: Vec<f64> = companion_real_roots(quartic_coefficients(model, Branch::Upper))
        .into_iter()
        .filter(|b| *b < 0.0)
        .collect();
    assert_eq!(lower.len(), 2, "lower roots {lower:?}");
    assert_eq!(upper.len(), 2, "upper roots {upper:?}");
    [lower[1], lower[0], upper[1], upper[0]]
}

/// Regime-0 quadratic; identical on both branches.
fn g0(model: &Model, beta: f64) -> f64 {
    let p = model.params();
    0.5 * p.sigma0 * p.sigma0 * beta * (beta - 1.0) + p.mu0 * beta - (p.lambda0 + p.r)
}

/// `(a0, a1, b0, b1)` from the 2x2 systems obtained by substituting
/// `V_i = a_i x + b_i` into the ODEs above the threshold.
pub fn oracle_particular(model: &Model) -> [f64; 4] {
    let p = model.params();
    let (r, l0, l1, eta, alpha) = (p.r, p.lambda0, p.lambda1, p.eta, p.alpha);
    let kt = model.k_tilde();
    let slope = Matrix2::new(p.mu0 - r - l0, l0, l1, p.mu1 - r - l1 - eta);
    let a = slope.lu().solve(&Vector2::new(0.0, -eta * alpha)).unwrap();
    let level = Matrix2::new(-(r + l0), l0, l1, -(r + l1 + eta));
    let b = level
        .lu()
        .solve(&Vector2::new(0.0, eta * alpha * kt))
        .unwrap();
    [a[0], a[1], b[0], b[1]]
}

/// Regime-1 coefficients of `(y/x)^beta` for `LA, LB, UA, UB` such that
/// `V_1` matches `alpha x - alpha K~` from both sides at `x` and is `C^2`.
pub fn oracle_pasting(beta: [f64; 4], part: [f64; 4], x: f64, alpha: f64, kt: f64) -> [f64; 4] {
    let [la, lb, ua, ub] = beta;
    let [_, a1, _, b1] = part;
    let target = alpha * x - alpha * kt;
    let m = Matrix4::new(
        1.0,
        1.0,
        0.0,
        0.0,
        0.0,
        0.0,
        1.0,
        1.0,
        la,
        lb,
        -ua,
        -ub,
        la * (la - 1.0),
        lb * (lb - 1.0),
        -ua * (ua - 1.0),
        -ub * (ub - 1.0),
    );
    let rhs = Vector4::new(target, target - a1 * x - b1, a1 * x, 0.0);
    let c = m.lu().solve(&rhs).expect("nonsingular pasting system");
    [c[0], c[1], c[2], c[3]]
}

/// `(V0L - V0U) - x (V0L' - V0U')` at a trial threshold `x`.
pub fn pasting_residual(model: &Model, beta: [f64; 4], part: [f64; 4], x: f64) -> f64 {
    let p = model.params();
    let c = oracle_pasting(beta, part, x, p.alpha, model.k_tilde());
    let ratio = |k: usize| -p.lambda0 / g0(model, beta[k]);
    let term = |k: usize| ratio(k) * c[k] * (1.0 - beta[k]);
    let b0 = part[2];
    term(0) + term(1) - term(2) - term(3) - b0
}

/// Threshold by bisection on [`pasting_residual`] over a log scan of
/// `[K~, 1e3 K~]`.
pub fn oracle_threshold(model: &Model) -> f64 {
    let beta = oracle_exponents(model);
    let part = oracle_particular(model);
    let kt = model.k_tilde();
    let f = |x: f64| pasting_residual(model, beta, part, x);
    let n = 4000;
    let xs: Vec<f64> = (0..=n)
        .map(|k| kt * (1.0 + 1e-13) * 1e3f64.powf(k as f64 / n as f64))
        .collect();
    let (mut lo, mut hi) = xs
        .windows(2)
        .find(|w| f(w[0]).signum() != f(w[1]).signum())
        .map(|w| (w[0], w[1]))
        .expect("sign change of the pasting residual");
    let f_lo = f(lo);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid).signum() == f_lo.signum() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Seeded strict-mode parameter sets with moderate magnitudes.
pub fn random_strict_params(seed: u64, count: usize) -> Vec<ModelParams> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let r = rng.random_range(0.02..0.3);
            ModelParams {
                r,
                mu0: r - rng.random_range(0.01..1.0),
                mu1: r - rng.random_range(0.01..1.0),
                sigma0: rng.random_range(0.05..0.8),
                sigma1: rng.random_range(0.05..0.8),
                lambda0: rng.random_range(0.1..5.0),
                lambda1: rng.random_range(0.1..5.0),
                eta: rng.random_range(0.1..5.0),
                alpha: rng.random_range(0.5..2.0),
                big_k: rng.random_range(0.0..1.5),
                big_i: rng.random_range(0.01..0.5),
            }
        })
        .collect()
}

pub fn strict(params: ModelParams) -> Model {
    params.validate(Mode::Strict).expect("valid strict params")
}

/// Seeded single-diffusion parameter sets.
pub fn random_single_diffusion(
    seed: u64,
    count: usize,
) -> Vec<regstop_core::SingleDiffusionParams> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let r = rng.random_range(0.02..0.3);
            regstop_core::SingleDiffusionParams {
                r,
                mu: r - rng.random_range(0.01..1.5),
                sigma: rng.random_range(0.05..0.8),
                lambda0: rng.random_range(0.1..5.0),
                lambda1: rng.random_range(0.1..5.0),
                eta: rng.random_range(0.1..5.0),
                alpha: rng.random_range(0.5..2.0),
                big_k: rng.random_range(0.0..1.5),
                big_i: rng.random_range(0.01..0.5),
            }
        })
        .collect()
}
