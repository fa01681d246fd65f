//! Small numeric helpers shared across modules.

use statrs::function::{erf, gamma};

/// `a * ln(b)` with the convention `0 * ln(0) = 0`.
pub fn xlogy(a: f64, b: f64) -> f64 {
    if a == 0.0 {
        0.0
    } else {
        a * b.ln()
    }
}

/// `ln C(n, k)`; exact integer arithmetic while it fits, log-gamma beyond.
pub fn ln_choose(n: u64, k: u64) -> f64 {
    if k > n {
        return f64::NEG_INFINITY;
    }
    let k = k.min(n - k);
    if n <= 60 {
        let mut c: u128 = 1;
        for i in 0..k {
            c = c * (n - i) as u128 / (i + 1) as u128;
        }
        return (c as f64).ln();
    }
    gamma::ln_gamma(n as f64 + 1.0) - gamma::ln_gamma(k as f64 + 1.0) - gamma::ln_gamma((n - k) as f64 + 1.0)
}

pub fn ln_beta(a: f64, b: f64) -> f64 {
    gamma::ln_gamma(a) + gamma::ln_gamma(b) - gamma::ln_gamma(a + b)
}

/// Standard normal CDF.
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * erf::erfc(-z / std::f64::consts::SQRT_2)
}

/// `P(|Z| >= z)` for standard normal `Z`, accurate in the far tail.
pub fn normal_two_sided_tail(z: f64) -> f64 {
    erf::erfc(z.abs() / std::f64::consts::SQRT_2)
}

/// Adaptive Simpson quadrature of `f` on `[a, b]`, relative tolerance `tol`.
pub fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn step(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) + step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
    // coarse pass fixes the absolute scale of the tolerance
    let n = 64;
    let h = (b - a) / n as f64;
    let coarse: f64 = (0..n)
        .map(|i| {
            let (l, r) = (a + i as f64 * h, a + (i + 1) as f64 * h);
            h / 6.0 * (f(l) + 4.0 * f(0.5 * (l + r)) + f(r))
        })
        .sum();
    let abs_tol = tol * coarse.abs().max(f64::MIN_POSITIVE);
    (0..n)
        .map(|i| {
            let (l, r) = (a + i as f64 * h, a + (i + 1) as f64 * h);
            let (fl, fm, fr) = (f(l), f(0.5 * (l + r)), f(r));
            let whole = h / 6.0 * (fl + 4.0 * fm + fr);
            step(f, l, r, fl, fm, fr, whole, abs_tol / n as f64, 40)
        })
        .sum()
}

/// Running sum kept as non-overlapping partials, so `value` is the correctly
/// rounded sum of everything added so far.
#[derive(Debug, Clone, Default)]
pub struct ExactSum {
    partials: Vec<f64>,
}

impl ExactSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, mut x: f64) {
        let mut i = 0;
        for j in 0..self.partials.len() {
            let mut y = self.partials[j];
            if x.abs() < y.abs() {
                std::mem::swap(&mut x, &mut y);
            }
            let hi = x + y;
            let lo = y - (hi - x);
            if lo != 0.0 {
                self.partials[i] = lo;
                i += 1;
            }
            x = hi;
        }
        self.partials.truncate(i);
        self.partials.push(x);
    }

    pub fn value(&self) -> f64 {
        let p = &self.partials;
        let mut n = p.len();
        if n == 0 {
            return 0.0;
        }
        n -= 1;
        let mut hi = p[n];
        let mut lo = 0.0;
        while n > 0 {
            let x = hi;
            n -= 1;
            let y = p[n];
            hi = x + y;
            lo = y - (hi - x);
            if lo != 0.0 {
                break;
            }
        }
        // round half-even across the remaining partials
        if n > 0 && ((lo < 0.0 && p[n - 1] < 0.0) || (lo > 0.0 && p[n - 1] > 0.0)) {
            let y = lo * 2.0;
            let x = hi + y;
            if y == x - hi {
                hi = x;
            }
        }
        hi
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn choose_matches_small_table() {
        assert_eq!(ln_choose(10, 3), 120f64.ln());
        assert_eq!(ln_choose(5, 0), 0.0);
        assert_eq!(ln_choose(3, 4), f64::NEG_INFINITY);
        let big = ln_choose(100, 50);
        // C(100, 50) = 100891344545564193334812497256
        assert!((big - 1.008_913_445_455_642e29f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn normal_tails() {
        assert!((normal_cdf(0.0) - 0.5).abs() < 1e-16);
        assert!((normal_two_sided_tail(1.959963984540054) - 0.05).abs() < 1e-11);
        assert!(normal_two_sided_tail(10.0) > 1e-23 && normal_two_sided_tail(10.0) < 2e-23);
        assert_eq!(xlogy(0.0, 0.0), 0.0);
        assert_eq!(xlogy(1.0, 0.0), f64::NEG_INFINITY);
    }

    #[test]
    fn simpson_beta_integral() {
        // B(4, 8) = 3! 7! / 11!
        let v = adaptive_simpson(&|t: f64| t.powi(3) * (1.0 - t).powi(7), 0.0, 1.0, 1e-12);
        assert!((v - 1.0 / 1320.0).abs() < 1e-15);
        assert!((ln_beta(4.0, 8.0) - (1.0f64 / 1320.0).ln()).abs() < 1e-12);
    }

    #[test]
    fn exact_sum_rounds_correctly() {
        let mut s = ExactSum::new();
        for _ in 0..980 {
            s.add(0.001);
        }
        assert_eq!(s.value(), 0.98);
        let mut t = ExactSum::new();
        for v in [1e16, 1.0, -1e16, 1e-16] {
            t.add(v);
        }
        assert_eq!(t.value(), 1.0 + 1e-16);
        let mut u = ExactSum::new();
        for _ in 0..10 {
            u.add(0.1);
        }
        assert_eq!(u.value(), 1.0);
    }
}
