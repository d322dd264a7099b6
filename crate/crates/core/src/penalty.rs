//! Composite L1/L2 decay applied to negative weights only.
//!
//! For a weight `w < 0` the penalty is `α₁·Γ(w, κ) + (α₂/2)·w²`, where Γ is a
//! Huber-style smoothing of `|w|`:
//!
//! ```text
//! Γ(w, κ) = |w|               if |w| > κ
//!         = w²/(2κ) + κ/2     otherwise
//! ```
//!
//! Nonnegative weights are never penalized. The derivative is
//! `α₁·Γ'(w, κ) + α₂·w` on the negative side and zero elsewhere, so it is
//! always ≤ 0 and gradient descent moves negative weights toward zero.
//!
//! Γ(0, κ) = κ/2, so the penalty itself steps from `α₁κ/2` to `0` as `w`
//! crosses zero from below. Its derivative is continuous there.

use crate::error::{Error, Result};
use crate::hyperparams::Hyperparams;
use crate::matrix::Matrix;

fn check_kappa(kappa: f64) -> Result<()> {
    if kappa > 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("kappa must be positive, got {kappa}")))
    }
}

#[inline]
fn gamma(w: f64, kappa: f64) -> f64 {
    let a = w.abs();
    if a > kappa {
        a
    } else {
        w * w / (2.0 * kappa) + kappa / 2.0
    }
}

#[inline]
fn gamma_grad(w: f64, kappa: f64) -> f64 {
    if w.abs() > kappa {
        w.signum()
    } else {
        w / kappa
    }
}

/// Smoothed absolute value Γ(w, κ).
pub fn smoothed_l1(w: f64, kappa: f64) -> Result<f64> {
    check_kappa(kappa)?;
    Ok(gamma(w, kappa))
}

/// dΓ/dw.
pub fn smoothed_l1_grad(w: f64, kappa: f64) -> Result<f64> {
    check_kappa(kappa)?;
    Ok(gamma_grad(w, kappa))
}

/// Penalty on a single weight; zero for `w >= 0`.
#[inline]
pub fn penalty(w: f64, hp: &Hyperparams) -> f64 {
    if w >= 0.0 {
        0.0
    } else {
        hp.alpha1 * gamma(w, hp.kappa) + 0.5 * hp.alpha2 * w * w
    }
}

#[inline]
pub fn penalty_grad(w: f64, hp: &Hyperparams) -> f64 {
    if w >= 0.0 {
        0.0
    } else {
        hp.alpha1 * gamma_grad(w, hp.kappa) + hp.alpha2 * w
    }
}

/// Sum of [`penalty`] over every entry of `w`.
pub fn penalty_sum(w: &Matrix, hp: &Hyperparams) -> f64 {
    if hp.alpha1 == 0.0 && hp.alpha2 == 0.0 {
        return 0.0;
    }
    w.as_slice().iter().map(|&v| penalty(v, hp)).sum()
}

/// `grad += penalty_grad(w)` elementwise.
pub(crate) fn add_penalty_grad(grad: &mut Matrix, w: &Matrix, hp: &Hyperparams) {
    debug_assert_eq!(grad.shape(), w.shape());
    if hp.alpha1 == 0.0 && hp.alpha2 == 0.0 {
        return;
    }
    for (g, &v) in grad.as_mut_slice().iter_mut().zip(w.as_slice()) {
        *g += penalty_grad(v, hp);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn hp() -> Hyperparams {
        Hyperparams::default()
    }

    #[test]
    fn smoothed_l1_examples() {
        assert_eq!(smoothed_l1(0.2, 0.1).unwrap(), 0.2);
        assert_eq!(smoothed_l1(0.0, 0.1).unwrap(), 0.05);
        // 0.05²/0.2 + 0.05
        assert!((smoothed_l1(0.05, 0.1).unwrap() - 0.0625).abs() < 1e-17);
        assert!(smoothed_l1(0.1, 0.0).is_err());
        assert!(smoothed_l1(0.1, -1.0).is_err());
    }

    #[test]
    fn smoothed_l1_grad_examples() {
        assert_eq!(smoothed_l1_grad(-0.2, 0.1).unwrap(), -1.0);
        assert_eq!(smoothed_l1_grad(0.0, 0.1).unwrap(), 0.0);
        assert!((smoothed_l1_grad(-0.05, 0.1).unwrap() + 0.5).abs() < 1e-16);
        assert!(smoothed_l1_grad(0.3, 0.0).is_err());
    }

    #[test]
    fn penalty_examples() {
        assert_eq!(penalty(0.5, &hp()), 0.0);
        // 0.0003·0.2 + 0.0015·0.04
        assert!((penalty(-0.2, &hp()) - 1.2e-4).abs() < 1e-18);
        // 0.0003·0.0625 + 0.0015·0.0025
        assert!((penalty(-0.05, &hp()) - 2.25e-5).abs() < 1e-18);
    }

    #[test]
    fn penalty_grad_examples() {
        assert_eq!(penalty_grad(0.3, &hp()), 0.0);
        // 0.0003·(−1) + 0.003·(−0.2)
        assert!((penalty_grad(-0.2, &hp()) + 9e-4).abs() < 1e-18);
        // 0.0003·(−0.5) + 0.003·(−0.05)
        assert!((penalty_grad(-0.05, &hp()) + 3e-4).abs() < 1e-18);
    }

    #[test]
    fn continuous_at_knee() {
        // one-sided limits by linear extrapolation from probes at ε and 2ε
        let eps = 1e-7;
        let h = hp();
        let near = |f: fn(f64, &Hyperparams) -> f64, x: f64| {
            let left = 2.0 * f(x - eps, &h) - f(x - 2.0 * eps, &h);
            let right = 2.0 * f(x + eps, &h) - f(x + 2.0 * eps, &h);
            (left - right).abs() < 1e-10
        };
        assert!(near(penalty, -h.kappa));
        assert!(near(penalty_grad, -h.kappa));
        assert!(near(penalty_grad, 0.0));
    }

    #[test]
    fn step_at_origin_is_alpha1_kappa_over_two() {
        let h = hp();
        let jump = penalty(-1e-300, &h) - penalty(0.0, &h);
        assert!((jump - h.alpha1 * h.kappa / 2.0).abs() < 1e-18);
    }

    proptest! {
        #[test]
        fn penalty_signs(w in -5.0f64..5.0, a1 in 0.0f64..0.1, a2 in 0.0f64..0.1, k in 0.01f64..1.0) {
            let h = Hyperparams { alpha1: a1, alpha2: a2, kappa: k, ..Default::default() };
            prop_assert!(penalty(w, &h) >= 0.0);
            prop_assert!(penalty_grad(w, &h) <= 0.0);
        }

        #[test]
        fn penalty_grad_is_derivative(w in -2.0f64..-1e-3) {
            let h = hp();
            // stay away from the C¹-only knee
            prop_assume!((w.abs() - h.kappa).abs() > 1e-4);
            let step = 1e-6;
            let fd = (penalty(w + step, &h) - penalty(w - step, &h)) / (2.0 * step);
            prop_assert!((fd - penalty_grad(w, &h)).abs() < 1e-9);
        }
    }
}
