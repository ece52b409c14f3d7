use std::fmt::Write as _;

use super::params::PhysicalParams;
use crate::error::{Error, Result};

pub type Mat3 = [[f64; 3]; 3];

/// Row/column labels of the change matrix: rows `(ϖ, τ, ς)`, columns `(p, T, q)`.
const ROW_P: usize = 0;
const ROW_T: usize = 1;
const ROW_Q: usize = 2;
const COL_VARPI: usize = 0;
const COL_TAU: usize = 1;
const COL_VARSIGMA: usize = 2;

/// Lamé constants and the coefficients of the inverse variable change
///
/// ```text
/// T =  γ1 τ + γ2 ϖ + γ3 ς
/// p =  γ4 τ + γ5 ϖ + γ2 ς
/// q = −γ6 τ + γ4 ϖ + γ1 ς
/// ```
///
/// The γ's are read off the numerically inverted change matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DerivedCoefficients {
    pub lambda: f64,
    pub mu: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    pub gamma3: f64,
    pub gamma4: f64,
    pub gamma5: f64,
    pub gamma6: f64,
    /// Normalizer of the closed-form γ expressions.
    pub m: f64,
    /// Maps `(p, T, q)` to `(ϖ, τ, ς)`.
    pub change: Mat3,
    pub inverse: Mat3,
}

impl DerivedCoefficients {
    pub fn derive(params: &PhysicalParams) -> Result<Self> {
        let (lambda, mu) = params.lame();
        let lm = lambda + mu;
        let PhysicalParams {
            a0, b0, c0, alpha, beta, ..
        } = *params;
        let change = [[c0, -b0, alpha], [alpha, beta, -lm], [-b0, a0, beta]];
        let inverse = invert3(&change).ok_or_else(|| {
            Error::Model(format!(
                "variable change is singular for c0={c0}, b0={b0}, a0={a0}, alpha={alpha}, beta={beta}, lambda+mu={lm}"
            ))
        })?;
        let ai = &inverse;
        let m = alpha * c0 * beta * beta
            + 2.0 * alpha * alpha * beta * b0
            + a0 * alpha.powi(3)
            + (c0 * a0 * alpha - b0 * b0 * alpha) * lm;
        Ok(DerivedCoefficients {
            lambda,
            mu,
            gamma1: ai[ROW_T][COL_TAU],
            gamma2: ai[ROW_T][COL_VARPI],
            gamma3: ai[ROW_T][COL_VARSIGMA],
            gamma4: ai[ROW_P][COL_TAU],
            gamma5: ai[ROW_P][COL_VARPI],
            gamma6: -ai[ROW_Q][COL_TAU],
            m,
            change,
            inverse,
        })
    }

    /// `(p, T, q) → (ϖ, τ, ς)` from the definitions.
    pub fn to_reformulated(&self, p: f64, t: f64, q: f64) -> (f64, f64, f64) {
        let a = &self.change;
        (
            a[0][0] * p + a[0][1] * t + a[0][2] * q,
            a[1][0] * p + a[1][1] * t + a[1][2] * q,
            a[2][0] * p + a[2][1] * t + a[2][2] * q,
        )
    }

    /// `(τ, ϖ, ς) → (p, T, q)` through the γ relations.
    pub fn recover(&self, tau: f64, varpi: f64, varsigma: f64) -> (f64, f64, f64) {
        (
            self.gamma4 * tau + self.gamma5 * varpi + self.gamma2 * varsigma,
            self.gamma1 * tau + self.gamma2 * varpi + self.gamma3 * varsigma,
            -self.gamma6 * tau + self.gamma4 * varpi + self.gamma1 * varsigma,
        )
    }

    /// Closed-form γ1..γ6 as printed alongside the inverse relations, with
    /// `α` in the γ2 numerator.
    pub fn closed_form_gammas(&self, params: &PhysicalParams) -> [f64; 6] {
        let lm = self.lambda + self.mu;
        let PhysicalParams {
            a0, b0, c0, alpha, beta, ..
        } = *params;
        let m = self.m;
        [
            (alpha * beta * c0 + alpha * alpha * b0) / m,
            (alpha * b0 * lm - alpha * alpha * beta) / m,
            (alpha.powi(3) + alpha * c0 * lm) / m,
            (a0 * alpha * alpha + alpha * beta * b0) / m,
            (a0 * alpha * lm + alpha * beta * beta) / m,
            (alpha * c0 * a0 - alpha * b0 * b0) / m,
        ]
    }

    pub fn gammas(&self) -> [f64; 6] {
        [self.gamma1, self.gamma2, self.gamma3, self.gamma4, self.gamma5, self.gamma6]
    }

    /// Entries of the inverse that the γ relations repeat; they must agree.
    pub fn symmetry_defect(&self) -> f64 {
        let ai = &self.inverse;
        let pairs = [
            (ai[ROW_P][COL_VARSIGMA], self.gamma2),
            (ai[ROW_Q][COL_VARPI], self.gamma4),
            (ai[ROW_Q][COL_VARSIGMA], self.gamma1),
        ];
        pairs
            .iter()
            .map(|(a, b)| (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE))
            .fold(0.0, f64::max)
    }

    /// Largest `|A·A⁻¹ − I|` entry, absolute and relative to `(|A||A⁻¹|)`.
    pub fn identity_residual(&self) -> (f64, f64) {
        let (a, ai) = (&self.change, &self.inverse);
        let mut abs_max: f64 = 0.0;
        let mut rel_max: f64 = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                let mut s = 0.0;
                let mut scale = 0.0;
                for k in 0..3 {
                    s += a[i][k] * ai[k][j];
                    scale += (a[i][k] * ai[k][j]).abs();
                }
                let d = (s - if i == j { 1.0 } else { 0.0 }).abs();
                abs_max = abs_max.max(d);
                rel_max = rel_max.max(d / scale.max(f64::MIN_POSITIVE));
            }
        }
        (abs_max, rel_max)
    }

    /// `γ5·γ3 − γ2²`, the determinant of the boundary translation system.
    pub fn boundary_determinant(&self) -> f64 {
        self.gamma5 * self.gamma3 - self.gamma2 * self.gamma2
    }

    /// Human-readable provenance block.
    pub fn report(&self, params: &PhysicalParams) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "lambda = {:.16e}", self.lambda);
        let _ = writeln!(s, "mu = {:.16e}", self.mu);
        let printed = self.closed_form_gammas(params);
        for (i, (g, c)) in self.gammas().iter().zip(printed).enumerate() {
            let _ = writeln!(s, "gamma{} = {:.16e} (closed form {:.16e})", i + 1, g, c);
        }
        let _ = writeln!(s, "M = {:.16e}", self.m);
        let (abs, rel) = self.identity_residual();
        let _ = writeln!(s, "identity residual = {abs:.3e} (relative {rel:.3e})");
        let _ = writeln!(s, "gamma5 - gamma2 = {:.16e}", self.gamma5 - self.gamma2);
        let _ = writeln!(s, "gamma3 - gamma2 = {:.16e}", self.gamma3 - self.gamma2);
        s
    }

    /// Soft conditions used by the error weights; violations are warnings.
    pub fn warnings(&self) -> Vec<String> {
        let mut w = Vec::new();
        if !(self.gamma5 - self.gamma2 > 0.0) {
            w.push(format!("gamma5 - gamma2 = {} is not positive", self.gamma5 - self.gamma2));
        }
        if !(self.gamma3 - self.gamma2 > 0.0) {
            w.push(format!("gamma3 - gamma2 = {} is not positive", self.gamma3 - self.gamma2));
        }
        w
    }

    /// Errors when the τ mass coefficient is not positive.
    pub fn require_positive_gamma6(&self) -> Result<()> {
        if self.gamma6 > 0.0 {
            Ok(())
        } else {
            Err(Error::config(format!(
                "gamma6 = {} must be positive; check the storage conditions c0 > b0, a0 > b0 and alpha > 0",
                self.gamma6
            )))
        }
    }
}

/// Inverse by Gaussian elimination with partial pivoting plus one step of
/// iterative refinement. `None` when numerically singular.
pub fn invert3(a: &Mat3) -> Option<Mat3> {
    let solve = |rhs: [f64; 3]| -> Option<[f64; 3]> {
        let mut m = *a;
        let mut b = rhs;
        for col in 0..3 {
            let piv = (col..3).max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))?;
            let row_scale = m[piv].iter().fold(0.0f64, |s, v| s.max(v.abs()));
            if m[piv][col].abs() <= 1e-14 * row_scale || row_scale == 0.0 {
                return None;
            }
            m.swap(col, piv);
            b.swap(col, piv);
            for i in col + 1..3 {
                let f = m[i][col] / m[col][col];
                for k in col..3 {
                    m[i][k] -= f * m[col][k];
                }
                b[i] -= f * b[col];
            }
        }
        let mut x = [0.0; 3];
        for i in (0..3).rev() {
            let s: f64 = (i + 1..3).map(|k| m[i][k] * x[k]).sum();
            x[i] = (b[i] - s) / m[i][i];
        }
        Some(x)
    };
    let mut inv = [[0.0; 3]; 3];
    for j in 0..3 {
        let e = std::array::from_fn(|i| if i == j { 1.0 } else { 0.0 });
        let x = solve(e)?;
        let r: [f64; 3] = std::array::from_fn(|i| e[i] - (0..3).map(|k| a[i][k] * x[k]).sum::<f64>());
        let dx = solve(r)?;
        for i in 0..3 {
            inv[i][j] = x[i] + dx[i];
        }
    }
    inv.iter().flatten().all(|v| v.is_finite()).then_some(inv)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lame_constants_test1() {
        let c = DerivedCoefficients::derive(&PhysicalParams::test1()).unwrap();
        // E ν / ((1+ν)(1−2ν)) = 2e4·0.4 / (1.4·0.2), E / (2·1.4).
        assert!((c.lambda - 8000.0 / 0.28).abs() < 1e-9);
        assert!((c.mu - 2e4 / 2.8).abs() < 1e-9);
        assert!((c.lambda - 28571.428571428572).abs() < 1e-8);
        assert!((c.mu - 7142.857142857143).abs() < 1e-9);
    }

    #[test]
    fn closed_form_agrees_with_inverse() {
        for (name, p) in PhysicalParams::catalogue() {
            let c = DerivedCoefficients::derive(&p).unwrap();
            for (g, cf) in c.gammas().iter().zip(c.closed_form_gammas(&p)) {
                assert!((g - cf).abs() <= 1e-8 * g.abs().max(cf.abs()), "{name}: {g} vs {cf}");
            }
            assert!(c.symmetry_defect() < 1e-8, "{name}");
        }
    }

    #[test]
    fn singular_change_rejected() {
        let p = PhysicalParams {
            a0: 0.0,
            b0: 0.0,
            c0: 0.0,
            alpha: 0.0,
            ..PhysicalParams::test1()
        };
        assert!(matches!(DerivedCoefficients::derive(&p), Err(Error::Model(_))));
    }

    #[test]
    fn gamma6_positive_on_catalogue() {
        for (_, p) in PhysicalParams::catalogue() {
            let c = DerivedCoefficients::derive(&p).unwrap();
            c.require_positive_gamma6().unwrap();
            assert!(c.boundary_determinant() != 0.0);
        }
    }

    #[test]
    fn test1_boundary_determinant_positive() {
        let c = DerivedCoefficients::derive(&PhysicalParams::test1()).unwrap();
        assert!(c.boundary_determinant() > 0.0);
    }
}
