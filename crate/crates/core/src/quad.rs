//! Quadrature building blocks shared by the kernel and energy modules.

use std::f64::consts::PI;
use std::sync::OnceLock;

use statrs::function::beta::{beta_reg, ln_beta};

/// Gauss-Legendre nodes and weights on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 1 { z } else { p1 };
            let pm = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (z * pn - pm) / (z * z - 1.0);
            let dz = pn / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

/// Cached rules used in hot loops.
pub fn gl(n: usize) -> &'static (Vec<f64>, Vec<f64>) {
    static RULES: OnceLock<Vec<(Vec<f64>, Vec<f64>)>> = OnceLock::new();
    let rules = RULES.get_or_init(|| (0..=32).map(|k| if k == 0 { (vec![], vec![]) } else { gauss_legendre(k) }).collect());
    &rules[n]
}

/// Fixed-order Gauss-Legendre on [a, b].
pub fn integrate(f: &impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let (x, w) = gl(n);
    let (c, r) = (0.5 * (a + b), 0.5 * (b - a));
    x.iter().zip(w).map(|(xi, wi)| wi * f(c + r * xi)).sum::<f64>() * r
}

/// Adaptive bisection comparing a 10-point rule with two 10-point halves.
pub fn integrate_adaptive(f: &impl Fn(f64) -> f64, a: f64, b: f64, tol: f64, depth: usize) -> f64 {
    let whole = integrate(f, a, b, 10);
    let m = 0.5 * (a + b);
    let left = integrate(f, a, m, 10);
    let right = integrate(f, m, b, 10);
    let floor = 32.0 * f64::EPSILON * (left.abs() + right.abs());
    if depth == 0 || (left + right - whole).abs() <= tol.max(floor) {
        left + right
    } else {
        integrate_adaptive(f, a, m, 0.5 * tol, depth - 1) + integrate_adaptive(f, m, b, 0.5 * tol, depth - 1)
    }
}

/// `∫_a^b r^{-1-2s} dr` for `0 < a <= b <= inf`.
#[inline]
pub fn radial_mass(a: f64, b: f64, s: f64) -> f64 {
    let fa = a.powf(-2.0 * s);
    let fb = if b.is_finite() { b.powf(-2.0 * s) } else { 0.0 };
    (fa - fb) / (2.0 * s)
}

/// Integrates `F(omega)` over the unit sphere in dimension `n` (2 or 3),
/// parametrizing directions through the faces of the cube `[-1,1]^n` and
/// refining adaptively around kinks and jumps of the integrand.
pub fn sphere_integral(n: usize, f: &(dyn Fn(&[f64]) -> f64 + Sync), tol: f64) -> f64 {
    let mut total = 0.0;
    for axis in 0..n {
        for sign in [-1.0, 1.0] {
            let face = |t: &[f64]| -> f64 {
                let mut p = [0.0; 3];
                let mut k = 0;
                for (a, pa) in p.iter_mut().enumerate().take(n) {
                    if a == axis {
                        *pa = sign;
                    } else {
                        *pa = t[k];
                        k += 1;
                    }
                }
                let norm = p[..n].iter().map(|v| v * v).sum::<f64>().sqrt();
                let mut omega = [0.0; 3];
                for a in 0..n {
                    omega[a] = p[a] / norm;
                }
                f(&omega[..n]) / norm.powi(n as i32)
            };
            total += if n == 2 {
                let g = |t: f64| face(&[t]);
                integrate_adaptive(&g, -1.0, 0.0, tol, 24) + integrate_adaptive(&g, 0.0, 1.0, tol, 24)
            } else {
                let mut acc = 0.0;
                for (x0, x1) in [(-1.0, 0.0), (0.0, 1.0)] {
                    for (y0, y1) in [(-1.0, 0.0), (0.0, 1.0)] {
                        acc += square_adaptive(&face, [x0, x1], [y0, y1], tol, 8);
                    }
                }
                acc
            };
        }
    }
    total
}

fn square_rule(f: &impl Fn(&[f64]) -> f64, xr: [f64; 2], yr: [f64; 2], n: usize) -> f64 {
    let (x, w) = gl(n);
    let (cx, rx) = (0.5 * (xr[0] + xr[1]), 0.5 * (xr[1] - xr[0]));
    let (cy, ry) = (0.5 * (yr[0] + yr[1]), 0.5 * (yr[1] - yr[0]));
    let mut acc = 0.0;
    for (xi, wi) in x.iter().zip(w) {
        for (yj, wj) in x.iter().zip(w) {
            acc += wi * wj * f(&[cx + rx * xi, cy + ry * yj]);
        }
    }
    acc * rx * ry
}

/// Adaptive quadtree Gauss rule on a rectangle.
pub fn square_adaptive(f: &impl Fn(&[f64]) -> f64, xr: [f64; 2], yr: [f64; 2], tol: f64, depth: usize) -> f64 {
    let whole = square_rule(f, xr, yr, 6);
    let xm = 0.5 * (xr[0] + xr[1]);
    let ym = 0.5 * (yr[0] + yr[1]);
    let quads = [
        ([xr[0], xm], [yr[0], ym]),
        ([xm, xr[1]], [yr[0], ym]),
        ([xr[0], xm], [ym, yr[1]]),
        ([xm, xr[1]], [ym, yr[1]]),
    ];
    let parts: Vec<f64> = quads.iter().map(|(a, b)| square_rule(f, *a, *b, 6)).collect();
    let sum: f64 = parts.iter().sum();
    if depth == 0 || (sum - whole).abs() <= tol {
        sum
    } else {
        quads
            .iter()
            .map(|(a, b)| square_adaptive(f, *a, *b, 0.25 * tol, depth - 1))
            .sum()
    }
}

/// Vertical column integral `G(a) = ∫_0^a (1 + t^2)^{-q} dt` and its
/// antiderivative, used to integrate subgraph indicators column by column.
#[derive(Debug, Clone)]
pub struct ColumnIntegral {
    q: f64,
    g_inf: f64,
    theta: Vec<f64>,
    table: Vec<f64>,
    slope: Vec<f64>,
}

impl ColumnIntegral {
    const SIZE: usize = 4096;

    /// Kernel exponent `n + 2s = 2q`.
    pub fn new(kernel_exponent: f64) -> Self {
        let q = 0.5 * kernel_exponent;
        let m = 2.0 * q - 2.0;
        let a = 0.5;
        let b = q - 0.5;
        let half_beta = 0.5 * ln_beta(a, b).exp();
        let theta: Vec<f64> = (0..=Self::SIZE)
            .map(|k| 0.5 * PI * k as f64 / Self::SIZE as f64)
            .collect();
        let table = theta
            .iter()
            .map(|&t| {
                let x = t.sin().powi(2).min(1.0);
                half_beta * beta_reg(a, b, x)
            })
            .collect();
        let slope = theta.iter().map(|t| t.cos().max(0.0).powf(m)).collect();
        Self {
            q,
            g_inf: half_beta,
            theta,
            table,
            slope,
        }
    }

    /// `G(inf)`.
    pub fn g_inf(&self) -> f64 {
        self.g_inf
    }

    /// `G'(a) = (1 + a^2)^{-q}`.
    #[inline]
    pub fn dg(&self, a: f64) -> f64 {
        (1.0 + a * a).powf(-self.q)
    }

    #[inline]
    pub fn g(&self, a: f64) -> f64 {
        if a.abs() < 1e-2 {
            // series in a; truncation error below 1e-16 |a|
            let q = self.q;
            let a2 = a * a;
            return a * (1.0 - q * a2 / 3.0 + q * (q + 1.0) * a2 * a2 / 10.0
                - q * (q + 1.0) * (q + 2.0) * a2 * a2 * a2 / 42.0);
        }
        let t = a.abs().atan();
        let step = 0.5 * PI / Self::SIZE as f64;
        let k = ((t / step) as usize).min(Self::SIZE - 1);
        let (t0, t1) = (self.theta[k], self.theta[k + 1]);
        let hh = t1 - t0;
        let u = (t - t0) / hh;
        let (y0, y1) = (self.table[k], self.table[k + 1]);
        let d0 = self.slope[k] * hh;
        let d1 = self.slope[k + 1] * hh;
        let u2 = u * u;
        let u3 = u2 * u;
        let v = (2.0 * u3 - 3.0 * u2 + 1.0) * y0
            + (u3 - 2.0 * u2 + u) * d0
            + (-2.0 * u3 + 3.0 * u2) * y1
            + (u3 - u2) * d1;
        v.copysign(a)
    }

    /// `H(a) = ∫_0^a G`, even and convex.
    #[inline]
    pub fn h(&self, a: f64) -> f64 {
        a * self.g(a) - ((1.0 + a * a).powf(1.0 - self.q) - 1.0) / (2.0 * (1.0 - self.q))
    }
}
