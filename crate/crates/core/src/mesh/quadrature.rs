//! Quadrature on the reference triangle and on [0, 1].
//!
//! Triangle rules are collapsed (Duffy) tensor products of Gauss–Legendre
//! rules: `x = s(1 − t)`, `y = t`, with Jacobian `1 − t`.

use crate::error::{Error, Result};

pub const MAX_DEGREE: usize = 8;

/// A rule on the reference triangle `(0,0), (1,0), (0,1)`.
///
/// Points are barycentric `(λ0, λ1, λ2)` with `(x, y) = (λ1, λ2)`; weights sum
/// to the reference area 1/2.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    pub degree: usize,
    pub points: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Integrates `f(x, y)` over the reference triangle.
    pub fn integrate(&self, f: impl Fn(f64, f64) -> f64) -> f64 {
        self.points
            .iter()
            .zip(&self.weights)
            .map(|(p, w)| w * f(p[1], p[2]))
            .sum()
    }
}

/// Gauss–Legendre nodes and weights mapped to `[0, 1]` (weights sum to 1).
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "gauss_legendre needs at least one node");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        // Chebyshev-like initial guess, then Newton on P_n.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        for _ in 0..100 {
            let (p, d) = legendre(n, x);
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, dp) = legendre(n, x);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    let nodes = nodes.into_iter().map(|x| 0.5 * (x + 1.0)).collect();
    let weights = weights.into_iter().map(|w| 0.5 * w).collect();
    (nodes, weights)
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let (p, pm1) = if n == 0 { (1.0, 0.0) } else { (p1, p0) };
    let d = n as f64 * (x * p - pm1) / (x * x - 1.0);
    (p, d)
}

/// Triangle rule exact for polynomials of total degree `degree` (1..=8).
pub fn quadrature(degree: usize) -> Result<QuadratureRule> {
    if degree == 0 || degree > MAX_DEGREE {
        return Err(Error::config(format!(
            "quadrature degree {degree} unsupported (allowed 1..={MAX_DEGREE})"
        )));
    }
    let ns = (degree + 2) / 2;
    let nt = (degree + 3) / 2;
    let (s, ws) = gauss_legendre(ns);
    let (t, wt) = gauss_legendre(nt);
    let mut points = Vec::with_capacity(ns * nt);
    let mut weights = Vec::with_capacity(ns * nt);
    for (tj, wj) in t.iter().zip(&wt) {
        for (si, wi) in s.iter().zip(&ws) {
            let x = si * (1.0 - tj);
            let y = *tj;
            points.push([1.0 - x - y, x, y]);
            weights.push(wi * wj * (1.0 - tj));
        }
    }
    Ok(QuadratureRule {
        degree,
        points,
        weights,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn factorial(n: u32) -> f64 {
        (1..=n).map(f64::from).product()
    }

    #[test]
    fn gauss_legendre_weights_sum_to_one() {
        for n in 1..=6 {
            let (x, w) = gauss_legendre(n);
            assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-14);
            assert!(x.windows(2).all(|p| p[0] < p[1]));
        }
    }

    #[test]
    fn gauss_legendre_exactness() {
        for n in 1..=6 {
            let (x, w) = gauss_legendre(n);
            for p in 0..(2 * n) as i32 {
                let q: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(p)).sum();
                assert!((q - 1.0 / (p as f64 + 1.0)).abs() < 1e-14, "n={n} p={p}");
            }
        }
    }

    #[test]
    fn reference_examples() {
        let r1 = quadrature(1).unwrap();
        assert!((r1.integrate(|_, _| 1.0) - 0.5).abs() < 1e-15);
        let r2 = quadrature(2).unwrap();
        assert!((r2.integrate(|x, y| x * y) - 1.0 / 24.0).abs() < 1e-15);
        let r4 = quadrature(4).unwrap();
        assert!((r4.integrate(|x, y| x * x * y * y) - 1.0 / 180.0).abs() < 1e-15);
    }

    #[test]
    fn monomials_exact_up_to_degree() {
        for d in 1..=MAX_DEGREE {
            let r = quadrature(d).unwrap();
            assert!((r.weights.iter().sum::<f64>() - 0.5).abs() < 1e-15);
            for a in 0..=d as u32 {
                for b in 0..=(d as u32 - a) {
                    let exact = factorial(a) * factorial(b) / factorial(a + b + 2);
                    let q = r.integrate(|x, y| x.powi(a as i32) * y.powi(b as i32));
                    assert!((q - exact).abs() < 1e-14, "d={d} a={a} b={b}");
                }
            }
        }
    }

    #[test]
    fn unsupported_degrees_rejected() {
        assert!(matches!(quadrature(0), Err(Error::Config(_))));
        assert!(matches!(quadrature(9), Err(Error::Config(_))));
    }
}
