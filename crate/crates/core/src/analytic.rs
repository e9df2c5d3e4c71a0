//! Closed-form reference curves for the standing Gaussian packet and a fixed
//! detector level.
//!
//! Everything here is expressed through the error function of the scaled
//! level `lambda / sqrt(1 + t^2)`. For large levels the plain difference of
//! two error functions loses all significant digits (both arguments sit deep
//! in the saturated tail), so the differences are evaluated through `erfc`
//! whenever both arguments share a sign.

use crate::error::Error;
use crate::quad;

pub use libm::{erf, erfc};

/// Spread factor of the packet at time `t`: `sqrt(1 + t^2)`.
pub fn spread(t: f64) -> f64 {
    (1.0 + t * t).sqrt()
}

/// `(erf(hi) - erf(lo)) / 2`, evaluated without cancellation.
///
/// For `lo <= hi` this is the probability mass of a unit Gaussian slice
/// between the two scaled bounds; callers may pass the bounds in either
/// order and get the signed result.
pub fn half_erf_diff(lo: f64, hi: f64) -> f64 {
    if lo >= 0.0 && hi >= 0.0 {
        0.5 * (erfc(lo) - erfc(hi))
    } else if lo <= 0.0 && hi <= 0.0 {
        0.5 * (erfc(-hi) - erfc(-lo))
    } else {
        // opposite signs: the two terms reinforce, no cancellation
        0.5 * (erf(hi) - erf(lo))
    }
}

/// Probability that the flow through a fixed level `lambda` carries a
/// trajectory across the detector during `[0, t]`, `t >= 0`:
///
/// ```text
/// delta_L(lambda, t) = ( erf(|lambda|) - erf(|lambda| / sqrt(1 + t^2)) ) / 2.
/// ```
pub fn delta_l(lambda: f64, t: f64) -> f64 {
    let l = lambda.abs();
    half_erf_diff(l / spread(t), l)
}

/// Detection probability for a level detector switched on at `t_on` and off
/// at `t_off` (any signs, `t_on <= t_off`), i.e. the mass of the initial
/// positions whose trajectories meet the level inside the window.
///
/// The trajectory through initial position `x0` sits at `x0 * sqrt(1 + t^2)`,
/// so the level is met exactly when `x0` lies in the image of
/// `lambda / sqrt(1 + t^2)` over the window.
pub fn level_window_probability(lambda: f64, t_on: f64, t_off: f64) -> f64 {
    let l = lambda.abs();
    if l == 0.0 {
        return 0.0;
    }
    let t_far = t_on.abs().max(t_off.abs());
    let t_near = if t_on <= 0.0 && t_off >= 0.0 {
        0.0
    } else {
        t_on.abs().min(t_off.abs())
    };
    half_erf_diff(l / spread(t_far), l / spread(t_near))
}

/// The three regimes of the detection probability when the detector at
/// `lambda` is switched on at `t_a <= 0` and read out at time `t`:
/// filling while the packet still contracts, a plateau while previously
/// counted trajectories recontract, and renewed growth once fresh
/// trajectories reach the level.
pub fn detector_curve_from(lambda: f64, t_a: f64, t: f64) -> Result<f64, Error> {
    if t_a > 0.0 {
        return Err(Error::invalid("activation time must satisfy t_a <= 0"));
    }
    let l = lambda.abs();
    Ok(if t < t_a {
        0.0
    } else if t < 0.0 {
        half_erf_diff(l / spread(t_a), l / spread(t))
    } else if t <= -t_a {
        half_erf_diff(l / spread(t_a), l)
    } else {
        half_erf_diff(l / spread(t), l)
    })
}

/// Cumulative current-integral count for the same configuration: the
/// integral of `|j|` through the level from `t_a` to `t`. Trajectories that
/// cross the level more than once are counted at every crossing, so for
/// `t > 0` this exceeds [`detector_curve_from`].
pub fn current_count_from(lambda: f64, t_a: f64, t: f64) -> Result<f64, Error> {
    if t_a > 0.0 {
        return Err(Error::invalid("activation time must satisfy t_a <= 0"));
    }
    let l = lambda.abs();
    Ok(if t < t_a {
        0.0
    } else if t < 0.0 {
        half_erf_diff(l / spread(t_a), l / spread(t))
    } else {
        // inflow over [t_a, 0) plus outflow over [0, t]
        half_erf_diff(l / spread(t_a), l) + half_erf_diff(l / spread(t), l)
    })
}

/// Integral of the absolute current through `lambda` over an arbitrary
/// window, splitting at the sign change of the flux at t = 0.
pub fn current_count_window(lambda: f64, t_on: f64, t_off: f64) -> f64 {
    let l = lambda.abs();
    let piece = |a: f64, b: f64| -> f64 {
        // |integral of j| over a window where j keeps one sign
        (half_erf_diff(l / spread(a), l / spread(b))).abs()
    };
    if t_on <= 0.0 && t_off >= 0.0 {
        piece(t_on, 0.0) + piece(0.0, t_off)
    } else {
        piece(t_on, t_off)
    }
}

/// Fraction of eventually detected trajectories already counted by time `t`
/// for a detector switched on at 0: `delta_L(lambda, t) / (erf(lambda)/2)`.
pub fn conditional_fraction(lambda: f64, t: f64) -> f64 {
    let l = lambda.abs();
    2.0 * delta_l(l, t) / erf(l)
}

/// Arrival-time density conditioned on detection (detector on from 0):
///
/// ```text
/// w(t) = 2 lambda / (sqrt(pi) erf(lambda)) * t / (1+t^2)^{3/2}
///        * exp(-lambda^2 / (1+t^2)),      t >= 0.
/// ```
pub fn arrival_density(lambda: f64, t: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    let l = lambda.abs();
    let s2 = 1.0 + t * t;
    mean_asymptote(l) * t / (s2 * s2.sqrt()) * (-l * l / s2).exp()
}

/// Limit of `t^2 * w(t)` as `t` grows: `2 lambda / (sqrt(pi) erf(lambda))`.
/// A finite nonzero limit means the expected arrival time diverges
/// logarithmically with the truncation.
pub fn mean_asymptote(lambda: f64) -> f64 {
    let l = lambda.abs();
    2.0 * l / (std::f64::consts::PI.sqrt() * erf(l))
}

/// Location of the single interior maximum of the arrival density: the
/// positive root of `2 t^4 - (2 lambda^2 - 1) t^2 - 1 = 0`.
pub fn arrival_density_peak(lambda: f64) -> f64 {
    let a = 2.0 * lambda * lambda - 1.0;
    (0.25 * (a + (a * a + 8.0).sqrt())).sqrt()
}

/// Expected arrival time truncated at `t_max`, by adaptive quadrature with
/// decade splitting (the integrand decays only like 1/t).
pub fn truncated_mean(lambda: f64, t_max: f64, abs_tol: f64) -> quad::QuadResult {
    let mut cuts = vec![1.0, lambda.abs().max(1.0)];
    let mut c = lambda.abs().max(1.0) * 10.0;
    while c < t_max {
        cuts.push(c);
        c *= 10.0;
    }
    quad::integrate_split(|t| t * arrival_density(lambda, t), 0.0, t_max, &cuts, abs_tol)
}

#[cfg(test)]
mod tests {
    use super::*;

    // reference values computed with 40-digit arithmetic
    const DELTA_L_1_1: f64 = 0.08000565040631448608537777190926670717;
    const DELTA_L_100_100: f64 = 0.07865998095313157183995218867484253802;
    const DELTA_L_10_5: f64 = 0.002772833657622029184785949965028702505;
    const PLATEAU_100: f64 = 0.207111979034494393812864327217234573714;
    const T_A_100: f64 = -173.2050807568877293527446341505872367;
    const CURVE_AT_M100: f64 = 0.1284519980813628219729121385423920357;
    const COUNT_AT_100: f64 = 0.2857719599876259656528165158920771117;
    const W_TILDE_100_100: f64 = 0.004150867415270900597324765354497170559;
    const W_TILDE_1_2: f64 = 0.1961091013229774358132942344731044326;
    const ASYMPTOTE_100: f64 = 112.8379167095512573896158903121545172;
    const PEAK_100: f64 = 99.99750021876796833475499434241756519;

    fn close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a:e} vs {b:e} (diff {:e})", (a - b).abs());
    }

    #[test]
    fn level_crossing_mass_small_and_large_levels() {
        close(delta_l(1.0, 1.0), DELTA_L_1_1, 1e-16);
        close(delta_l(100.0, 100.0), DELTA_L_100_100, 1e-15);
        close(delta_l(10.0, 5.0), DELTA_L_10_5, 1e-16);
        // symmetric detector on the left
        close(delta_l(-1.0, 1.0), DELTA_L_1_1, 1e-16);
        assert_eq!(delta_l(1.0, 0.0), 0.0);
    }

    #[test]
    fn saturated_tail_does_not_cancel() {
        // both erf arguments are ~1 in f64; the erfc path keeps full accuracy
        let v = delta_l(100.0, 1.0);
        assert!(v >= 0.0 && v < 1e-300);
        let w = half_erf_diff(26.0, 27.0);
        assert!(w > 0.0 && w < 1e-295);
    }

    #[test]
    fn detector_window_probability_matches_regimes() {
        // window straddling 0 reaches the widest spread at the far edge
        close(
            level_window_probability(100.0, T_A_100, 50.0),
            PLATEAU_100,
            1e-15,
        );
        // purely contracting window
        close(
            level_window_probability(100.0, T_A_100, -100.0),
            CURVE_AT_M100,
            1e-15,
        );
        // activation at 0
        close(level_window_probability(100.0, 0.0, 100.0), DELTA_L_100_100, 1e-15);
        assert_eq!(level_window_probability(0.0, -1.0, 1.0), 0.0);
    }

    #[test]
    fn staged_curve_and_current_count() {
        let f = |t| detector_curve_from(100.0, T_A_100, t).unwrap();
        assert_eq!(f(T_A_100 - 1.0), 0.0);
        close(f(-100.0), CURVE_AT_M100, 1e-15);
        close(f(1.0), PLATEAU_100, 1e-15);
        close(f(100.0), PLATEAU_100, 1e-15);
        // once fresh trajectories arrive the curve grows again
        close(f(-T_A_100), PLATEAU_100, 1e-15);
        assert!(f(300.0) > PLATEAU_100);

        let g = |t| current_count_from(100.0, T_A_100, t).unwrap();
        close(g(-100.0), f(-100.0), 1e-16);
        close(g(100.0), COUNT_AT_100, 1e-15);
        // on the plateau the count exceeds the transit probability by the
        // mass that has already re-crossed outward
        close(g(100.0) - f(100.0), DELTA_L_100_100, 1e-12);
        // window form agrees with the staged form
        close(current_count_window(100.0, T_A_100, 100.0), COUNT_AT_100, 1e-15);
        assert!(detector_curve_from(1.0, 0.5, 1.0).is_err());
    }

    #[test]
    fn arrival_density_closed_form() {
        close(arrival_density(100.0, 100.0), W_TILDE_100_100, 1e-17);
        close(arrival_density(1.0, 2.0), W_TILDE_1_2, 1e-16);
        assert_eq!(arrival_density(100.0, 0.0), 0.0);
        assert_eq!(arrival_density(100.0, -3.0), 0.0);
        close(mean_asymptote(100.0), ASYMPTOTE_100, 1e-12);
        close(arrival_density_peak(100.0), PEAK_100, 1e-10);
        // the quartic root is a genuine maximum
        let p = arrival_density_peak(100.0);
        assert!(arrival_density(100.0, p) > arrival_density(100.0, p - 0.5));
        assert!(arrival_density(100.0, p) > arrival_density(100.0, p + 0.5));
    }

    #[test]
    fn arrival_density_normalizes_and_mean_diverges_logarithmically() {
        let total = quad::integrate_split(
            |t| arrival_density(100.0, t),
            0.0,
            1e7,
            &[1.0, 10.0, 100.0, 1e3, 1e4, 1e5, 1e6],
            1e-9,
        );
        // the remaining tail mass is about asymptote/cutoff ~ 1e-5
        close(total.value + ASYMPTOTE_100 / 1e7, 1.0, 1e-5);

        let m3 = truncated_mean(100.0, 1e3, 1e-9).value;
        let m4 = truncated_mean(100.0, 1e4, 1e-9).value;
        let growth = (m4 - m3) / std::f64::consts::LN_10;
        close(growth, ASYMPTOTE_100, 0.05 * ASYMPTOTE_100);
    }

    #[test]
    fn conditional_fraction_saturates_at_one() {
        assert!(conditional_fraction(100.0, 0.0) == 0.0);
        let w = conditional_fraction(100.0, 100.0);
        close(w, 0.1573199619062631436799043773496850760, 1e-15);
        close(conditional_fraction(100.0, 1e15), 1.0, 1e-12);
    }
}
