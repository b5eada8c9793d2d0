//! C^∞ building blocks: the flat function `exp(-1/t)`, the compactly
//! supported bump `exp(-1/(1-t²))`, and the smooth step built from them.
//! All of them act on jets so analytic derivatives propagate through.

use crate::jet::Jet;
use crate::scalar::Scalar;

/// Below this argument `exp(-1/t)` and every derivative is under 1e-290.
fn flat_cutoff<T: Scalar>() -> T {
    T::lit(1.0 / 700.0)
}

/// `exp(-1/t)` for `t > 0`, zero otherwise.
pub fn flat<T: Scalar>(t: &Jet<T>) -> Jet<T> {
    if t.value() <= flat_cutoff() {
        return Jet::constant(t.shape(), T::zero());
    }
    (-t.recip()).exp()
}

/// Unnormalized bump `exp(-1/(1-t²))` on `(-1, 1)`.
pub fn bump<T: Scalar>(t: &Jet<T>) -> Jet<T> {
    let s = (t * t).scale(-T::one()).add_scalar(T::one());
    flat(&s)
}

/// Smooth step: `1` for `t ≤ 0`, `0` for `t ≥ 1`, monotone in between.
pub fn smooth_step<T: Scalar>(t: &Jet<T>) -> Jet<T> {
    let v = t.value();
    if v <= T::zero() {
        return Jet::constant(t.shape(), T::one());
    }
    if v >= T::one() {
        return Jet::constant(t.shape(), T::zero());
    }
    let a = flat(&t.scale(-T::one()).add_scalar(T::one()));
    let b = flat(t);
    &a / &(&a + &b)
}

pub fn bump_value<T: Scalar>(t: T) -> T {
    let s = T::one() - t * t;
    if s <= flat_cutoff() {
        T::zero()
    } else {
        (-T::one() / s).exp()
    }
}

pub fn smooth_step_value<T: Scalar>(t: T) -> T {
    if t <= T::zero() {
        return T::one();
    }
    if t >= T::one() {
        return T::zero();
    }
    let f = |s: T| {
        if s <= flat_cutoff() {
            T::zero()
        } else {
            (-T::one() / s).exp()
        }
    };
    let a = f(T::one() - t);
    a / (a + f(t))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bump_support_and_peak() {
        assert_eq!(bump_value(1.0f64), 0.0);
        assert_eq!(bump_value(-1.5f64), 0.0);
        assert!((bump_value(0.0f64) - (-1.0f64).exp()).abs() < 1e-16);
    }

    #[test]
    fn smooth_step_is_symmetric() {
        for &t in &[0.1, 0.25, 0.4, 0.5] {
            let a = smooth_step_value(t);
            let b = smooth_step_value(1.0 - t);
            assert!((a + b - 1.0f64).abs() < 1e-15);
        }
        assert_eq!(smooth_step_value(0.5f64), 0.5);
    }

    #[test]
    fn jet_values_match_scalar_versions() {
        for &t in &[-0.9, -0.3, 0.0, 0.7, 0.999] {
            let j = Jet::<f64>::seed(&[t], 3);
            assert_eq!(bump(&j[0]).value(), bump_value(t));
        }
        for &t in &[0.05, 0.3, 0.8] {
            let j = Jet::<f64>::seed(&[t], 3);
            assert!((smooth_step(&j[0]).value() - smooth_step_value(t)).abs() < 1e-15);
        }
    }

    #[test]
    fn bump_derivative_vs_finite_difference() {
        let t = 0.37;
        let j = Jet::<f64>::seed(&[t], 2);
        let d = bump(&j[0]).derivative(&[1]);
        let h = 1e-6;
        let fd = (bump_value(t + h) - bump_value(t - h)) / (2.0 * h);
        assert!((d - fd).abs() < 1e-8);
    }

    #[test]
    fn far_tail_has_no_nan() {
        let j = Jet::<f64>::seed(&[0.99999], 3);
        let b = bump(&j[0]);
        assert!(b.is_finite());
        let j = Jet::<f64>::seed(&[1e-9], 3);
        assert!(smooth_step(&j[0]).is_finite());
    }
}
