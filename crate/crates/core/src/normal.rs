//! Standard normal tail masses in the log domain and the truncated-normal p-value.

use crate::error::{Error, Result};
use crate::interval::{Interval, IntervalSet};
use crate::math;

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;
const CF_SWITCH: f64 = 5.0;
const MIN_LOG_MASS: f64 = -690.775_527_898_213_7; // ln 1e-300

/// `ln P(N(0,1) > x)`.
pub fn log_sf(x: f64) -> f64 {
    if x == f64::INFINITY {
        return f64::NEG_INFINITY;
    }
    if x == f64::NEG_INFINITY {
        return 0.0;
    }
    if x < CF_SWITCH {
        return math::ln(0.5 * math::erfc(x * core::f64::consts::FRAC_1_SQRT_2));
    }
    -0.5 * x * x - LN_SQRT_2PI + math::ln(mills_ratio(x))
}

// Continued fraction R(x) = 1/(x + 1/(x + 2/(x + 3/(x + ...)))) by modified Lentz.
fn mills_ratio(x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let mut f = x;
    let mut c = x;
    let mut d = 0.0;
    for k in 1..500 {
        let a = k as f64;
        d = x + a * d;
        if d == 0.0 {
            d = TINY;
        }
        c = x + a / c;
        if c == 0.0 {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = c * d;
        f *= delta;
        if math::abs(delta - 1.0) < 1e-16 {
            break;
        }
    }
    1.0 / f
}

/// `ln(1 − eˣ)` for `x ≤ 0`.
fn log1m_exp(x: f64) -> f64 {
    if x > -core::f64::consts::LN_2 {
        math::ln(-math::exp_m1(x))
    } else {
        math::ln_1p(-math::exp(x))
    }
}

/// `ln(eᵃ + eᵇ)`.
pub fn log_add(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if hi == f64::NEG_INFINITY {
        return hi;
    }
    hi + math::ln_1p(math::exp(lo - hi))
}

/// `ln P(lo ≤ N(0,1) ≤ hi)`, differencing survival functions on the side away from zero.
pub fn log_interval_mass(lo: f64, hi: f64) -> f64 {
    if !(lo < hi) {
        return f64::NEG_INFINITY;
    }
    if lo >= 0.0 {
        let a = log_sf(lo);
        a + log1m_exp(log_sf(hi) - a)
    } else if hi <= 0.0 {
        log_interval_mass(-hi, -lo)
    } else {
        let tails = log_add(log_sf(hi), log_sf(-lo));
        log1m_exp(tails)
    }
}

/// `ln` of the standard normal mass of a set.
pub fn log_set_mass(set: &IntervalSet) -> f64 {
    set.parts().iter().fold(f64::NEG_INFINITY, |acc, p| log_add(acc, log_interval_mass(p.lo, p.hi)))
}

/// Two-sided p-value of `t_obs` under `N(0, σ_T²)` truncated to `z`:
/// `P(|T| ≥ |t_obs| | T ∈ z)`.
pub fn tn_two_sided_p(t_obs: f64, sigma_t: f64, z: &IntervalSet) -> Result<f64> {
    if !(sigma_t > 0.0 && sigma_t.is_finite() && t_obs.is_finite()) {
        return Err(Error::InvalidParameter(alloc::format!("invalid statistic {t_obs} with scale {sigma_t}")));
    }
    let tolerance = 1e-9 * sigma_t.max(math::abs(t_obs));
    if z.is_empty() || z.distance(t_obs) > tolerance {
        return Err(Error::InvalidParameter(alloc::format!("statistic {t_obs} lies outside the truncation set")));
    }
    let scaled = IntervalSet::from_parts(
        z.parts().iter().map(|p| Interval { lo: p.lo / sigma_t, hi: p.hi / sigma_t }).collect(),
    );
    let log_total = log_set_mass(&scaled);
    if log_total < MIN_LOG_MASS {
        return Err(Error::DegenerateTruncation { log_mass: log_total });
    }
    let c = math::abs(t_obs) / sigma_t;
    let upper = scaled.intersect_interval(&Interval { lo: c, hi: f64::INFINITY });
    let lower = scaled.intersect_interval(&Interval { lo: f64::NEG_INFINITY, hi: -c });
    let log_tail = log_add(log_set_mass(&upper), log_set_mass(&lower));
    Ok(math::exp(log_tail - log_total).clamp(0.0, 1.0))
}

/// Two-sided z-test p-value without truncation.
pub fn two_sided_p(t_obs: f64, sigma_t: f64) -> f64 {
    let c = math::abs(t_obs) / sigma_t;
    math::exp(core::f64::consts::LN_2 + log_sf(c)).min(1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symmetric_center_is_one() {
        let p = tn_two_sided_p(0.0, 1.0, &IntervalSet::single(Interval::REAL_LINE)).unwrap();
        assert!((p - 1.0).abs() < 1e-15);
    }

    #[test]
    fn two_sided_five_percent() {
        let p = tn_two_sided_p(1.959964, 1.0, &IntervalSet::single(Interval::REAL_LINE)).unwrap();
        assert!((p - 0.05).abs() < 1e-6, "{p}");
    }

    #[test]
    fn log_sf_is_continuous_at_switch() {
        let below = log_sf(CF_SWITCH - 1e-9);
        let above = log_sf(CF_SWITCH);
        assert!((below - above).abs() < 1e-8);
    }

    #[test]
    fn far_tail_is_finite_and_positive() {
        let z = IntervalSet::from_parts(alloc::vec![
            Interval { lo: f64::NEG_INFINITY, hi: 1.0 },
            Interval { lo: 30.0, hi: 45.0 }
        ]);
        let p = tn_two_sided_p(38.0, 1.0, &z).unwrap();
        assert!(p > 0.0 && p < 1e-100);
    }

    #[test]
    fn tail_only_set_is_well_conditioned() {
        // Z = [30, ∞): the p-value at 30 is one and decreases beyond
        let z = IntervalSet::single(Interval { lo: 30.0, hi: f64::INFINITY });
        let p30 = tn_two_sided_p(30.0, 1.0, &z).unwrap();
        let p31 = tn_two_sided_p(31.0, 1.0, &z).unwrap();
        assert!((p30 - 1.0).abs() < 1e-12);
        // Mills-ratio asymptotics: P(T > 31 | T > 30) ≈ exp(-30.5) · 30/31
        assert!((p31.ln() - (-30.5 + (30.0f64 / 31.0).ln())).abs() < 1e-2);
    }

    #[test]
    fn empty_mass_is_degenerate() {
        let z = IntervalSet::single(Interval { lo: 50.0, hi: 51.0 });
        assert!(matches!(tn_two_sided_p(50.5, 1.0, &z), Err(Error::DegenerateTruncation { .. })));
    }
}
