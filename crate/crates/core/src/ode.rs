//! Dormand–Prince 5(4) integrator with per-step error control and a
//! position-dependent step cap. Output is produced at requested abscissae by
//! landing steps on them exactly.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
// fifth order weights equal the last row of A (FSAL)
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

#[derive(Debug, Clone)]
pub struct DormandPrince<T: Scalar> {
    pub rtol: T,
    pub atol: T,
    pub h_min: T,
    pub max_steps: usize,
    /// States with any component above this magnitude count as blow-up.
    pub blow_up: T,
}

impl<T: Scalar> Default for DormandPrince<T> {
    fn default() -> Self {
        DormandPrince {
            rtol: T::lit(1e-11),
            atol: T::lit(1e-12),
            h_min: T::lit(1e-14),
            max_steps: 5_000_000,
            blow_up: T::lit(1e100),
        }
    }
}

/// Counters of a finished integration.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct OdeStats {
    pub accepted: usize,
    pub rejected: usize,
}

impl<T: Scalar> DormandPrince<T> {
    /// Integrate `y' = rhs(t, y)` from `(outputs[0], y0)` through every
    /// abscissa in `outputs` (monotone, either direction). `max_step(t)`
    /// caps the step taken from `t`.
    pub fn solve<F, M>(
        &self,
        mut rhs: F,
        y0: &[T],
        outputs: &[T],
        max_step: M,
    ) -> Result<(Vec<Vec<T>>, OdeStats)>
    where
        F: FnMut(T, &[T], &mut [T]),
        M: Fn(T) -> T,
    {
        let n = y0.len();
        let mut stats = OdeStats::default();
        let mut out = Vec::with_capacity(outputs.len());
        if outputs.is_empty() {
            return Ok((out, stats));
        }
        let dir = if outputs.len() > 1 && outputs[outputs.len() - 1] < outputs[0] {
            -T::one()
        } else {
            T::one()
        };
        let mut t = outputs[0];
        let mut y = y0.to_vec();
        out.push(y.clone());
        let mut k: Vec<Vec<T>> = vec![vec![T::zero(); n]; 7];
        let mut tmp = vec![T::zero(); n];
        let mut y5 = vec![T::zero(); n];
        rhs(t, &y, &mut k[0]);
        let mut h = max_step(t).min(T::lit(1e-3));

        for &target in &outputs[1..] {
            while (target - t) * dir > T::zero() {
                if stats.accepted + stats.rejected > self.max_steps {
                    return Err(Error::StepUnderflow { at: t.to_f64_lossy() });
                }
                let cap = max_step(t);
                let remaining = (target - t).abs();
                let mut step = h.min(cap).min(remaining);
                let landing = step >= remaining;
                if landing {
                    step = remaining;
                }
                let hs = step * dir;
                for s in 1..7 {
                    for i in 0..n {
                        let mut acc = y[i];
                        for (j, kj) in k.iter().enumerate().take(s) {
                            let a = A[s][j];
                            if a != 0.0 {
                                acc += hs * T::lit(a) * kj[i];
                            }
                        }
                        tmp[i] = acc;
                    }
                    let ts = t + hs * T::lit(C[s]);
                    rhs(ts, &tmp, &mut k[s]);
                }
                let mut err = T::zero();
                for i in 0..n {
                    let mut s5 = y[i];
                    let mut e = T::zero();
                    for (j, kj) in k.iter().enumerate() {
                        s5 += hs * T::lit(B5[j]) * kj[i];
                        e += hs * T::lit(B5[j] - B4[j]) * kj[i];
                    }
                    y5[i] = s5;
                    let sc = self.atol + self.rtol * y[i].abs().max(s5.abs());
                    let r = e / sc;
                    err += r * r;
                }
                err = (err / T::from_count(n.max(1))).sqrt();
                if !err.is_finite() {
                    return Err(Error::BlowUp { at: t.to_f64_lossy() });
                }
                if err <= T::one() {
                    t = if landing { target } else { t + hs };
                    std::mem::swap(&mut y, &mut y5);
                    let fsal = k[6].clone();
                    k[0] = fsal;
                    stats.accepted += 1;
                    if y.iter().any(|v| !v.is_finite() || v.abs() > self.blow_up) {
                        return Err(Error::BlowUp { at: t.to_f64_lossy() });
                    }
                } else {
                    stats.rejected += 1;
                }
                let factor = if err == T::zero() {
                    T::lit(5.0)
                } else {
                    (T::lit(0.9) * err.powf(T::lit(-0.2))).min(T::lit(5.0)).max(T::lit(0.2))
                };
                let proposed = step * factor;
                h = if landing && err <= T::one() { h.max(proposed) } else { proposed };
                if h < self.h_min {
                    return Err(Error::StepUnderflow { at: t.to_f64_lossy() });
                }
            }
            out.push(y.clone());
        }
        Ok((out, stats))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_decay() {
        let dp = DormandPrince::<f64>::default();
        let ts: Vec<f64> = (0..=10).map(|i| i as f64 * 0.1).collect();
        let (ys, stats) = dp
            .solve(|_, y, d| d[0] = -y[0], &[1.0], &ts, |_| 1.0)
            .unwrap();
        for (t, y) in ts.iter().zip(&ys) {
            assert!((y[0] - (-t).exp()).abs() < 1e-10);
        }
        assert!(stats.accepted > 0);
    }

    #[test]
    fn harmonic_oscillator_backwards() {
        let dp = DormandPrince::<f64>::default();
        let ts = [1.0, 0.0];
        let (ys, _) = dp
            .solve(
                |_, y, d| {
                    d[0] = y[1];
                    d[1] = -y[0];
                },
                &[1f64.cos(), -1f64.sin()],
                &ts,
                |_| 0.1,
            )
            .unwrap();
        assert!((ys[1][0] - 1.0).abs() < 1e-10);
        assert!(ys[1][1].abs() < 1e-10);
    }

    #[test]
    fn blow_up_detected() {
        let dp = DormandPrince::<f64>::default();
        let r = dp.solve(|_, y, d| d[0] = y[0] * y[0], &[1.0], &[0.0, 2.0], |_| 0.1);
        assert!(matches!(r, Err(Error::BlowUp { .. }) | Err(Error::StepUnderflow { .. })));
    }

    #[test]
    fn f32_solver() {
        let dp = DormandPrince::<f32> {
            rtol: 1e-5,
            atol: 1e-6,
            h_min: 1e-7,
            ..Default::default()
        };
        let (ys, _) = dp.solve(|_, y, d| d[0] = y[0], &[1.0], &[0.0, 1.0], |_| 1.0).unwrap();
        assert!((ys[1][0] - 1f32.exp()).abs() < 1e-4);
    }
}
