//! Truncated-Gaussian moment matching: the v/w correction functions and
//! the single-factor EP update shared by the Interest and Novelty models.

use statrs::distribution::{ContinuousCDF, Normal};

use crate::skills::VARIANCE_FLOOR;

const SQRT_2PI: f64 = 2.5066282746310002;

/// Standard normal density.
pub fn pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / SQRT_2PI
}

/// Standard normal CDF via erfc, stable in both tails.
pub fn cdf(x: f64) -> f64 {
    0.5 * statrs::function::erf::erfc(-x / std::f64::consts::SQRT_2)
}

/// Standard normal quantile function.
pub fn inverse_cdf(p: f64) -> f64 {
    Normal::standard().inverse_cdf(p)
}

/// Additive correction v for a win truncation (t > 0 after shifting by
/// the margin). Falls back to the asymptote -t deep in the left tail.
pub fn v_win(t: f64) -> f64 {
    let denom = cdf(t);
    if denom < 1e-300 {
        -t
    } else {
        pdf(t) / denom
    }
}

/// Multiplicative correction w for a win truncation, in (0, 1).
pub fn w_win(t: f64) -> f64 {
    let v = v_win(t);
    (v * (v + t)).clamp(0.0, 1.0)
}

/// Additive correction for a draw truncation |t| <= margin.
pub fn v_draw(t: f64, margin: f64) -> f64 {
    let t_abs = t.abs();
    let denom = cdf(margin - t_abs) - cdf(-margin - t_abs);
    if denom < 1e-300 {
        // mass vanished: limit pulls straight to the nearest band edge
        return if t > 0.0 { margin - t } else { -margin - t };
    }
    let v = (pdf(-margin - t_abs) - pdf(margin - t_abs)) / denom;
    if t < 0.0 {
        -v
    } else {
        v
    }
}

/// Multiplicative correction for a draw truncation, in (0, 1).
pub fn w_draw(t: f64, margin: f64) -> f64 {
    let t_abs = t.abs();
    let denom = cdf(margin - t_abs) - cdf(-margin - t_abs);
    if denom < 1e-300 {
        return 1.0;
    }
    let v = v_draw(t, margin);
    let w = v * v
        + ((margin - t_abs) * pdf(margin - t_abs)
            + (margin + t_abs) * pdf(-margin - t_abs))
            / denom;
    w.clamp(0.0, 1.0)
}

/// Observed game outcome from the learner team's perspective.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Win,
    Loss,
    Draw,
}

/// Moment-matched posterior of a Gaussian update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncatedUpdate {
    pub mean: f64,
    pub variance: f64,
    /// Set when the truncation mass underflowed and the prior was kept.
    pub underflow: bool,
}

/// Posterior moments of N(prior_mean, prior_var) after observing that the
/// noisy performance t ~ N(prior_mean, prior_var + perf_var) satisfied
/// the outcome constraint: t > margin (win), t < -margin (loss) or
/// |t| <= margin (draw).
pub fn truncated_gaussian_update(
    prior_mean: f64,
    prior_var: f64,
    perf_var: f64,
    outcome: Outcome,
    margin: f64,
) -> TruncatedUpdate {
    assert!(prior_var > 0.0 && perf_var > 0.0);
    let c2 = prior_var + perf_var;
    let c = c2.sqrt();
    let (v, w, underflow) = outcome_corrections(prior_mean / c, margin / c, outcome);
    if underflow {
        return TruncatedUpdate {
            mean: prior_mean,
            variance: prior_var,
            underflow: true,
        };
    }
    TruncatedUpdate {
        mean: prior_mean + prior_var / c * v,
        variance: (prior_var * (1.0 - prior_var / c2 * w)).max(VARIANCE_FLOOR),
        underflow: false,
    }
}

/// The signed v and w corrections for an outcome, on the normalized scale
/// t = delta / c, margin = eps / c. Returns an underflow flag when the
/// constrained region has no numerical mass.
pub fn outcome_corrections(t: f64, margin: f64, outcome: Outcome) -> (f64, f64, bool) {
    match outcome {
        Outcome::Win => {
            let a = t - margin;
            let underflow = cdf(a) < 1e-300 && a < -37.0;
            (v_win(a), w_win(a), underflow)
        }
        Outcome::Loss => {
            let a = -t - margin;
            let underflow = cdf(a) < 1e-300 && a < -37.0;
            (-v_win(a), w_win(a), underflow)
        }
        Outcome::Draw => {
            let denom = cdf(margin - t.abs()) - cdf(-margin - t.abs());
            if denom < 1e-300 {
                (0.0, 0.0, true)
            } else {
                (v_draw(t, margin), w_draw(t, margin), false)
            }
        }
    }
}

/// Draw margin from the draw probability: eps = Phi^-1((p+1)/2) sqrt(n) beta,
/// where n counts the performances in the game.
pub fn draw_margin(draw_probability: f64, beta: f64, n_performances: usize) -> f64 {
    assert!((0.0..1.0).contains(&draw_probability));
    inverse_cdf((draw_probability + 1.0) / 2.0) * (n_performances as f64).sqrt() * beta
}

#[cfg(test)]
pub mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    /// Posterior moments by Simpson quadrature over the skill variable.
    /// Independent of the v/w path above.
    pub fn integration_oracle(
        prior_mean: f64,
        prior_var: f64,
        perf_var: f64,
        outcome: Outcome,
        margin: f64,
    ) -> (f64, f64) {
        let sigma = prior_var.sqrt();
        let perf_sd = perf_var.sqrt();
        let lo = prior_mean - 12.0 * sigma;
        let hi = prior_mean + 12.0 * sigma;
        let n = 40_000;
        let h = (hi - lo) / n as f64;
        let likelihood = |s: f64| -> f64 {
            match outcome {
                Outcome::Win => cdf((s - margin) / perf_sd),
                Outcome::Loss => cdf((-margin - s) / perf_sd),
                Outcome::Draw => {
                    cdf((margin - s) / perf_sd) - cdf((-margin - s) / perf_sd)
                }
            }
        };
        let f = |s: f64| -> f64 {
            let z = (s - prior_mean) / sigma;
            pdf(z) / sigma * likelihood(s)
        };
        let (mut z0, mut z1, mut z2) = (0.0, 0.0, 0.0);
        for i in 0..=n {
            let s = lo + i as f64 * h;
            let weight = if i == 0 || i == n {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            let fv = weight * f(s);
            z0 += fv;
            z1 += fv * s;
            z2 += fv * s * s;
        }
        let mean = z1 / z0;
        (mean, z2 / z0 - mean * mean)
    }

    #[test]
    fn win_update_golden() {
        let u = truncated_gaussian_update(0.0, 1.0, 1.0, Outcome::Win, 0.0);
        // 2 phi(0) / sqrt(2) and 1 - w/2 from the hand derivation
        assert_abs_diff_eq!(u.mean, 2.0 * pdf(0.0) / std::f64::consts::SQRT_2, epsilon = 1e-12);
        assert_abs_diff_eq!(u.mean, 0.5642, epsilon = 1e-4);
        assert_abs_diff_eq!(u.variance, 0.6817, epsilon = 1e-4);
        assert!(!u.underflow);
    }

    #[test]
    fn draw_update_symmetric_prior_keeps_mean() {
        let u = truncated_gaussian_update(0.0, 1.0, 0.5, Outcome::Draw, 0.4);
        assert_abs_diff_eq!(u.mean, 0.0, epsilon = 1e-12);
        assert!(u.variance < 1.0);
    }

    #[test]
    fn variance_contracts_under_consistent_evidence() {
        let mut mean = 0.0;
        let mut var = 1.0;
        for _ in 0..5 {
            let u = truncated_gaussian_update(mean, var, 1.0, Outcome::Win, 0.1);
            assert!(u.variance < var);
            mean = u.mean;
            var = u.variance;
        }
    }

    #[test]
    fn loss_mirrors_win() {
        let w = truncated_gaussian_update(0.3, 0.8, 1.0, Outcome::Win, 0.2);
        let l = truncated_gaussian_update(-0.3, 0.8, 1.0, Outcome::Loss, 0.2);
        assert_abs_diff_eq!(w.mean, -l.mean, epsilon = 1e-12);
        assert_abs_diff_eq!(w.variance, l.variance, epsilon = 1e-12);
    }

    #[test]
    fn matches_integration_oracle() {
        for &(mean, var, perf, outcome, margin) in &[
            (0.0, 1.0, 1.0, Outcome::Win, 0.0),
            (1.5, 0.25, 0.18, Outcome::Draw, 0.42),
            (-2.0, 3.0, 1.0, Outcome::Loss, 0.7),
            (0.5, 300.0, 78.0, Outcome::Win, 1.0),
        ] {
            let u = truncated_gaussian_update(mean, var, perf, outcome, margin);
            let (om, ov) = integration_oracle(mean, var, perf, outcome, margin);
            assert_abs_diff_eq!(u.mean, om, epsilon = 1e-3);
            assert_abs_diff_eq!(u.variance, ov, epsilon = 1e-3);
        }
    }

    #[test]
    fn extreme_tail_underflows_to_prior() {
        let u = truncated_gaussian_update(-100.0, 0.01, 0.01, Outcome::Draw, 0.001);
        assert!(u.underflow);
        assert_eq!((u.mean, u.variance), (-100.0, 0.01));
    }

    #[test]
    fn draw_margin_limits_and_monotonicity() {
        assert!(draw_margin(1e-12, 0.42, 2) < 1e-9);
        let base = draw_margin(0.52, 0.42, 2);
        assert!(draw_margin(0.6, 0.42, 2) > base);
        assert!(draw_margin(0.52, 0.5, 2) > base);
        assert!(draw_margin(0.52, 0.42, 4) > base);
    }

    #[test]
    fn draw_margin_matches_quantile() {
        let eps = draw_margin(0.52, 0.42, 2);
        let expected = inverse_cdf(0.76) * std::f64::consts::SQRT_2 * 0.42;
        assert_abs_diff_eq!(eps, expected, epsilon = 1e-12);
        // frozen golden value
        assert_abs_diff_eq!(eps, 0.419_515, epsilon = 1e-5);
    }
}
