//! Standard-normal special functions and the standardized improvement
//! function `tau(c) = c Φ(c) + φ(c)`.
//!
//! Tails are evaluated through the complementary error function and the
//! Mills ratio so that relative accuracy survives far from the origin:
//! expected-improvement scores are routinely evaluated at standardized gaps
//! of -5 to -40.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use crate::error::{Error, Result};

/// `1 / sqrt(2π)`.
pub const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;
const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Below this argument `tau` switches to the Mills-ratio form.
const TAU_TAIL_SWITCH: f64 = -6.0;
/// Above this magnitude `1 - x R(x)` uses its asymptotic series.
const ASYMPTOTIC_SWITCH: f64 = 200.0;

pub fn std_normal_pdf(c: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * c * c).exp()
}

pub fn log_std_normal_pdf(c: f64) -> f64 {
    -0.5 * c * c - LN_SQRT_2PI
}

/// Φ(c), relative-accurate in the lower tail.
pub fn std_normal_cdf(c: f64) -> f64 {
    0.5 * libm::erfc(-c * FRAC_1_SQRT_2)
}

/// Upper tail `1 - Φ(c)`, relative-accurate for large `c`.
pub fn std_normal_sf(c: f64) -> f64 {
    0.5 * libm::erfc(c * FRAC_1_SQRT_2)
}

/// Mills ratio `R(x) = (1 - Φ(x)) / φ(x)` for `x >= 0`.
pub fn mills_ratio(x: f64) -> f64 {
    debug_assert!(x >= 0.0);
    if x < 6.0 {
        std_normal_sf(x) / std_normal_pdf(x)
    } else {
        // Laplace continued fraction R(x) = 1/(x + 1/(x + 2/(x + 3/(x + ...)))),
        // evaluated bottom-up; 120 levels converge to machine precision for x >= 6.
        let mut t = x;
        for k in (1..=120).rev() {
            t = x + f64::from(k) / t;
        }
        1.0 / t
    }
}

/// `1 - x R(x)` for `x > 6`, i.e. `τ(-x) / φ(x)`.
fn one_minus_x_mills(x: f64) -> f64 {
    if x > ASYMPTOTIC_SWITCH {
        let z = 1.0 / (x * x);
        // 1/x² - 3/x⁴ + 15/x⁶ - 105/x⁸ + 945/x¹⁰
        z * (1.0 - z * (3.0 - z * (15.0 - z * (105.0 - 945.0 * z))))
    } else {
        1.0 - x * mills_ratio(x)
    }
}

/// `ln Φ(c)` without underflow for very negative `c`.
pub fn log_std_normal_cdf(c: f64) -> f64 {
    if c > 0.0 {
        (-std_normal_sf(c)).ln_1p()
    } else if c > -30.0 {
        std_normal_cdf(c).ln()
    } else {
        log_std_normal_pdf(c) + mills_ratio(-c).ln()
    }
}

/// `τ(c) = c Φ(c) + φ(c)`.
///
/// Positive and strictly increasing; `τ(c) = c + τ(-c)`. The value
/// underflows to zero below roughly `c = -38.5`; use [`log_tau`] there.
pub fn tau(c: f64) -> f64 {
    if c >= TAU_TAIL_SWITCH {
        tau_direct(c)
    } else {
        log_tau(c).exp()
    }
}

/// Textbook evaluation `c Φ(c) + φ(c)` (loses relative accuracy for `c ≪ 0`).
pub fn tau_direct(c: f64) -> f64 {
    c * std_normal_cdf(c) + std_normal_pdf(c)
}

/// `ln τ(c)`, finite for every finite `c`.
pub fn log_tau(c: f64) -> f64 {
    if c >= TAU_TAIL_SWITCH {
        tau_direct(c).ln()
    } else {
        let x = -c;
        log_std_normal_pdf(x) + one_minus_x_mills(x).ln()
    }
}

/// Upper bound on the Gaussian Q-function,
/// `(1 / (√(2π) c)) (1 - exp(-√(π/2) c)) exp(-c²/2)`, valid for `c > 0`.
pub fn q_upper_bound(c: f64) -> Result<f64> {
    if !(c > 0.0) || !c.is_finite() {
        return Err(Error::Domain(format!(
            "Q-function bound needs a positive argument, got {c}"
        )));
    }
    Ok(INV_SQRT_2PI / c * (-(PI / 2.0).sqrt() * c).exp_m1().abs() * (-0.5 * c * c).exp())
}

/// Lower bound `exp(-√(π/2) √β) φ(√β)` on `τ(-√β)`.
pub fn tau_neg_root_lower_bound(beta: f64) -> f64 {
    let s = beta.sqrt();
    (-(PI / 2.0).sqrt() * s).exp() * std_normal_pdf(s)
}

/// Outcome of scanning an inequality `lhs <= rhs` over a grid of arguments.
#[derive(Clone, Debug, PartialEq)]
pub struct InequalityScan {
    pub cases: usize,
    pub violations: usize,
    /// Smallest relative slack `(rhs - lhs) / |rhs|` seen.
    pub worst_margin: f64,
}

impl InequalityScan {
    fn scan(points: impl Iterator<Item = (f64, f64)>) -> Self {
        let mut out = InequalityScan {
            cases: 0,
            violations: 0,
            worst_margin: f64::INFINITY,
        };
        for (lhs, rhs) in points {
            out.cases += 1;
            if !(lhs <= rhs) {
                out.violations += 1;
            }
            let margin = (rhs - lhs) / rhs.abs().max(f64::MIN_POSITIVE);
            out.worst_margin = out.worst_margin.min(margin);
        }
        out
    }
}

/// Checks `1 - Φ(c) <= q_upper_bound(c)` at `count` evenly spaced `c` in `(0, c_max]`.
pub fn scan_q_bound(c_max: f64, count: usize) -> InequalityScan {
    InequalityScan::scan((1..=count).map(|i| {
        let c = c_max * i as f64 / count as f64;
        (std_normal_sf(c), q_upper_bound(c).unwrap_or(f64::NAN))
    }))
}

/// Checks `τ(-√β) >= exp(-√(π/2)√β) φ(√β)` at `count` evenly spaced `β` in `(0, beta_max]`.
pub fn scan_tau_lower_bound(beta_max: f64, count: usize) -> InequalityScan {
    InequalityScan::scan((1..=count).map(|i| {
        let beta = beta_max * i as f64 / count as f64;
        (tau_neg_root_lower_bound(beta), tau(-beta.sqrt()))
    }))
}
