//! Small numerical building blocks shared by the analysis modules.

use alloc::vec::Vec;
use core::f64::consts::PI;
#[allow(unused_imports)] // shadowed by std inherent methods when std is in the build graph
use num_traits::Float;

/// Γ(k/2) for a positive integer `k`, by the half-integer recurrence.
pub fn gamma_half(k: usize) -> f64 {
    assert!(k > 0, "gamma_half needs k >= 1");
    let (mut value, mut x) = if k % 2 == 0 { (1.0, 1.0) } else { (PI.sqrt(), 0.5) };
    let target = k as f64 / 2.0;
    while x < target - 0.25 {
        value *= x;
        x += 1.0;
    }
    value
}

/// Surface area of the unit sphere S^{dim-1} ⊂ R^dim.
pub fn sphere_area(dim: usize) -> f64 {
    2.0 * PI.powf(dim as f64 / 2.0) / gamma_half(dim)
}

/// Volume ω_n of the unit ball in R^n.
pub fn ball_volume(n: usize) -> f64 {
    sphere_area(n) / n as f64
}

/// Gauss–Legendre nodes and weights on [-1, 1].
pub fn gauss_legendre(count: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(count > 0);
    let mut nodes = alloc::vec![0.0; count];
    let mut weights = alloc::vec![0.0; count];
    let m = count.div_ceil(2);
    let nf = count as f64;
    for i in 0..m {
        let mut x = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(count, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(count, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[count - 1 - i] = x;
        weights[i] = w;
        weights[count - 1 - i] = w;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Integrates `f` over [a, b] with the given Gauss–Legendre rule.
pub fn gl_integrate(nodes: &[f64], weights: &[f64], a: f64, b: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let mut acc = 0.0;
    for (x, w) in nodes.iter().zip(weights) {
        acc += w * f(mid + half * x);
    }
    acc * half
}

/// `count` points log-spaced on [lo, hi], both ends included.
pub fn logspace(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    assert!(lo > 0.0 && hi >= lo);
    if count == 1 {
        return alloc::vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    let step = (b - a) / (count - 1) as f64;
    (0..count)
        .map(|i| {
            if i == 0 {
                lo
            } else if i == count - 1 {
                hi
            } else {
                (a + step * i as f64).exp()
            }
        })
        .collect()
}

/// Ordinary least-squares line through `(x, y)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

pub fn line_fit(xs: &[f64], ys: &[f64]) -> Option<LineFit> {
    let n = xs.len();
    if n < 2 || ys.len() != n {
        return None;
    }
    let nf = n as f64;
    let mx = xs.iter().sum::<f64>() / nf;
    let my = ys.iter().sum::<f64>() / nf;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        let dx = x - mx;
        let dy = y - my;
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r_squared = if syy == 0.0 { 1.0 } else { (sxy * sxy) / (sxx * syy) };
    Some(LineFit {
        slope,
        intercept,
        r_squared,
    })
}

/// Monotone piecewise-cubic (Fritsch–Carlson) interpolant on a uniform grid
/// starting at zero.
#[derive(Debug, Clone)]
pub struct MonotoneCubic<'a> {
    spacing: f64,
    values: &'a [f64],
    slopes: Vec<f64>,
}

impl<'a> MonotoneCubic<'a> {
    pub fn new(spacing: f64, values: &'a [f64]) -> Self {
        let n = values.len();
        let mut slopes = alloc::vec![0.0; n];
        if n >= 2 {
            let secant: Vec<f64> = values.windows(2).map(|w| (w[1] - w[0]) / spacing).collect();
            slopes[0] = secant[0];
            slopes[n - 1] = secant[n - 2];
            for i in 1..n - 1 {
                let (d0, d1) = (secant[i - 1], secant[i]);
                slopes[i] = if d0 * d1 <= 0.0 {
                    0.0
                } else {
                    // harmonic mean keeps the interpolant monotone between nodes
                    2.0 * d0 * d1 / (d0 + d1)
                };
            }
        }
        Self {
            spacing,
            values,
            slopes,
        }
    }

    /// Evaluates the interpolant; `None` outside `[0, r_max]`.
    pub fn eval(&self, x: f64) -> Option<f64> {
        let n = self.values.len();
        if x < 0.0 || n == 0 {
            return None;
        }
        let mut pos = x / self.spacing;
        // snap round-off so that node radii reproduce node values exactly
        if (pos - pos.round()).abs() < 1e-9 {
            pos = pos.round();
        }
        let last = (n - 1) as f64;
        if pos > last + 1e-9 {
            return None;
        }
        if n == 1 {
            return Some(self.values[0]);
        }
        let i = (pos.floor() as usize).min(n - 2);
        let tau = (pos - i as f64).clamp(0.0, 1.0);
        if tau == 0.0 {
            return Some(self.values[i]);
        }
        if tau == 1.0 {
            return Some(self.values[i + 1]);
        }
        let (y0, y1) = (self.values[i], self.values[i + 1]);
        let (m0, m1) = (self.slopes[i] * self.spacing, self.slopes[i + 1] * self.spacing);
        let t2 = tau * tau;
        let t3 = t2 * tau;
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + tau;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        Some(h00 * y0 + h10 * m0 + h01 * y1 + h11 * m1)
    }
}

/// `|u|^{p-1} u` with a multiplication fast path for integer exponents.
#[inline]
pub fn odd_power(u: f64, p: f64, integer_p: Option<i32>) -> f64 {
    match integer_p {
        Some(k) => u * u.abs().powi(k - 1),
        None => u * u.abs().powf(p - 1.0),
    }
}

/// Returns `Some(k)` when `p` is an integer small enough for `powi`.
pub fn integer_exponent(p: f64) -> Option<i32> {
    if p.fract() == 0.0 && (1.0..=64.0).contains(&p) {
        Some(p as i32)
    } else {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gamma_half_matches_known_values() {
        assert!((gamma_half(1) - PI.sqrt()).abs() < 1e-15);
        assert_eq!(gamma_half(2), 1.0);
        assert!((gamma_half(5) - 0.75 * PI.sqrt()).abs() < 1e-14);
        assert_eq!(gamma_half(8), 6.0);
    }

    #[test]
    fn ball_volumes() {
        assert!((ball_volume(3) - 4.0 * PI / 3.0).abs() < 1e-14);
        assert!((ball_volume(5) - 8.0 * PI * PI / 15.0).abs() < 1e-13);
        assert!((sphere_area(2) - 2.0 * PI).abs() < 1e-14);
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let (x, w) = gauss_legendre(5);
        let v = gl_integrate(&x, &w, 0.0, 2.0, |s| s.powi(9));
        assert!((v - 2f64.powi(10) / 10.0).abs() < 1e-10);
        let (x, w) = gauss_legendre(64);
        let v = gl_integrate(&x, &w, 0.0, PI, |s| s.sin());
        assert!((v - 2.0).abs() < 1e-14);
    }

    #[test]
    fn monotone_cubic_reproduces_nodes_and_lines() {
        let vals: Vec<f64> = (0..11).map(|i| 3.0 - 0.5 * i as f64).collect();
        let interp = MonotoneCubic::new(0.1, &vals);
        assert_eq!(interp.eval(0.3).unwrap(), vals[3]);
        assert!((interp.eval(0.35).unwrap() - 1.25).abs() < 1e-14);
        assert!(interp.eval(1.2).is_none());
    }

    #[test]
    fn line_fit_exact() {
        let xs = [0.0, 1.0, 2.0, 3.0];
        let ys = [1.0, 3.0, 5.0, 7.0];
        let fit = line_fit(&xs, &ys).unwrap();
        assert!((fit.slope - 2.0).abs() < 1e-14);
        assert!((fit.intercept - 1.0).abs() < 1e-14);
        assert!((fit.r_squared - 1.0).abs() < 1e-14);
    }
}
