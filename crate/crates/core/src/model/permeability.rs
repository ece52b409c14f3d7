use super::params::{PhysicalParams, Tensor2};
use crate::error::{Error, Result};

/// `k = a·k0·exp(b·τ)` with the exponential clamped to `[clamp_min, clamp_max]`.
///
/// In the original variables the exponent is `−b((λ+μ)q − αp − βT)`, which is
/// `b·τ`.
#[derive(Debug, Clone, PartialEq)]
pub struct PermeabilityLaw {
    pub a: f64,
    /// `None` is the constant law `k = a·k0`.
    pub b: Option<f64>,
    pub k0: Tensor2,
    pub clamp_min: f64,
    pub clamp_max: f64,
}

impl PermeabilityLaw {
    pub fn from_params(p: &PhysicalParams) -> Self {
        PermeabilityLaw {
            a: p.a,
            b: Some(p.b),
            k0: p.k0,
            clamp_min: 1e-14,
            clamp_max: 1e14,
        }
    }

    pub fn constant(p: &PhysicalParams) -> Self {
        PermeabilityLaw {
            b: None,
            ..Self::from_params(p)
        }
    }

    /// Scalar factor `s(τ)` with `k = s·k0`, and whether the clamp is active.
    pub fn factor_clamped(&self, tau: f64) -> Result<(f64, bool)> {
        let Some(b) = self.b else {
            return Ok((self.a, false));
        };
        let z = b * tau;
        if !z.is_finite() {
            return Err(Error::Model(format!("permeability exponent b*tau = {z} is not finite")));
        }
        let (lo, hi) = (self.clamp_min.ln(), self.clamp_max.ln());
        if z <= lo {
            Ok((self.a * self.clamp_min, true))
        } else if z >= hi {
            Ok((self.a * self.clamp_max, true))
        } else {
            Ok((self.a * z.exp(), false))
        }
    }

    pub fn factor(&self, tau: f64) -> Result<f64> {
        self.factor_clamped(tau).map(|(s, _)| s)
    }

    /// Full tensor `s(τ)·k0`.
    pub fn tensor(&self, tau: f64) -> Result<Tensor2> {
        let s = self.factor(tau)?;
        Ok(scale(&self.k0, s))
    }

    /// Factor from the original variables `(q, p, T)`.
    pub fn factor_original(&self, lam_mu: f64, alpha: f64, beta: f64, q: f64, p: f64, t: f64) -> Result<f64> {
        let Some(b) = self.b else {
            return Ok(self.a);
        };
        let z = -b * (lam_mu * q - alpha * p - beta * t);
        if !z.is_finite() {
            return Err(Error::Model(format!("permeability exponent {z} is not finite")));
        }
        let z = z.clamp(self.clamp_min.ln(), self.clamp_max.ln());
        Ok(self.a * z.exp())
    }
}

pub fn scale(t: &Tensor2, s: f64) -> Tensor2 {
    [[s * t[0][0], s * t[0][1]], [s * t[1][0], s * t[1][1]]]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_stress_gives_base_value() {
        let p = PhysicalParams::test1();
        let law = PermeabilityLaw::from_params(&p);
        assert_eq!(law.factor(0.0).unwrap(), p.a);
        assert_eq!(law.tensor(0.0).unwrap(), scale(&p.k0, p.a));
    }

    #[test]
    fn b_zero_is_constant() {
        let p = PhysicalParams {
            b: 0.0,
            a: 2.5,
            ..PhysicalParams::test1()
        };
        let law = PermeabilityLaw::from_params(&p);
        let constant = PermeabilityLaw::constant(&p);
        for tau in [-1e6, -3.0, 0.0, 7.5, 1e9] {
            assert_eq!(law.factor(tau).unwrap().to_bits(), constant.factor(tau).unwrap().to_bits());
        }
    }

    #[test]
    fn clamp_bounds_hold() {
        let law = PermeabilityLaw::from_params(&PhysicalParams::test1());
        let (hi, c1) = law.factor_clamped(1e6).unwrap();
        let (lo, c2) = law.factor_clamped(-1e6).unwrap();
        assert!(c1 && c2);
        assert_eq!(hi, 1e14);
        assert_eq!(lo, 1e-14);
        assert!(matches!(law.factor(f64::NAN), Err(Error::Model(_))));
        assert!(matches!(law.factor(f64::INFINITY), Err(Error::Model(_))));
    }

    #[test]
    fn monotone_in_tau() {
        let law = PermeabilityLaw::from_params(&PhysicalParams::barry_pressure());
        let vals: Vec<f64> = (-40..40).map(|i| law.factor(i as f64 * 0.7).unwrap()).collect();
        assert!(vals.windows(2).all(|w| w[1] > w[0]));
    }
}
