use crate::error::{Error, Result};

/// Symmetric 2×2 tensor stored densely.
pub type Tensor2 = [[f64; 2]; 2];

pub fn scalar_tensor(s: f64) -> Tensor2 {
    [[s, 0.0], [0.0, s]]
}

pub fn is_spd(t: &Tensor2) -> bool {
    t.iter().flatten().all(|v| v.is_finite())
        && (t[0][1] - t[1][0]).abs() <= 1e-14 * (t[0][1].abs() + t[1][0].abs() + f64::MIN_POSITIVE)
        && t[0][0] > 0.0
        && t[0][0] * t[1][1] - t[0][1] * t[1][0] > 0.0
}

/// Raw model constants.
#[derive(Debug, Clone, PartialEq)]
pub struct PhysicalParams {
    /// Effective thermal capacity.
    pub a0: f64,
    /// Thermal dilation coefficient.
    pub b0: f64,
    /// Specific storage coefficient.
    pub c0: f64,
    /// Biot–Willis constant.
    pub alpha: f64,
    /// Thermal stress coefficient.
    pub beta: f64,
    /// Mutation coefficient of the permeability.
    pub a: f64,
    /// Stress coupling coefficient of the permeability.
    pub b: f64,
    pub k0: Tensor2,
    /// Effective thermal conductivity.
    pub theta: Tensor2,
    pub young: f64,
    pub poisson: f64,
}

impl PhysicalParams {
    pub fn test1() -> Self {
        PhysicalParams {
            a0: 0.2,
            b0: 0.1,
            c0: 0.2,
            alpha: 0.01,
            beta: 0.01,
            a: 1.0,
            b: 1.0,
            k0: scalar_tensor(1e-5),
            theta: scalar_tensor(1e-5),
            young: 2e4,
            poisson: 0.4,
        }
    }

    pub fn test2() -> Self {
        PhysicalParams {
            a0: 2e5,
            b0: 1e5,
            c0: 2e5,
            alpha: 0.01,
            beta: 0.01,
            a: 1.0,
            b: 1.0,
            k0: scalar_tensor(0.1),
            theta: scalar_tensor(0.1),
            young: 2e7,
            poisson: 0.4,
        }
    }

    /// Benchmark set with vanishing storage (pressure oscillation variant).
    pub fn barry_pressure() -> Self {
        PhysicalParams {
            a0: 0.1,
            b0: 0.0,
            c0: 1e-10,
            alpha: 1.0,
            beta: 1.0,
            a: 1.0,
            b: 1.0,
            k0: scalar_tensor(0.1),
            theta: scalar_tensor(1e-8),
            young: 2.8e5,
            poisson: 0.42,
        }
    }

    /// Benchmark set with vanishing thermal capacity (temperature variant).
    pub fn barry_temperature() -> Self {
        PhysicalParams {
            a0: 1e-10,
            c0: 0.1,
            ..Self::barry_pressure()
        }
    }

    /// Every tabulated parameter set, with a label.
    pub fn catalogue() -> Vec<(&'static str, PhysicalParams)> {
        vec![
            ("test1", Self::test1()),
            ("test2", Self::test2()),
            ("barry-pressure", Self::barry_pressure()),
            ("barry-temperature", Self::barry_temperature()),
        ]
    }

    pub fn lame(&self) -> (f64, f64) {
        let (e, nu) = (self.young, self.poisson);
        (e * nu / ((1.0 + nu) * (1.0 - 2.0 * nu)), e / (2.0 * (1.0 + nu)))
    }

    /// Validates the parameter set.
    ///
    /// Returns hard errors; when `allow_storage_override` is set, violations of
    /// the storage dominance conditions `c0 > b0`, `a0 > b0` are returned as
    /// warnings instead.
    pub fn validate(&self, allow_storage_override: bool) -> (Vec<String>, Vec<String>) {
        let mut errors = Vec::new();
        let mut warnings = Vec::new();
        let named = [
            ("a0", self.a0),
            ("b0", self.b0),
            ("c0", self.c0),
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("a", self.a),
            ("b", self.b),
            ("young", self.young),
            ("poisson", self.poisson),
        ];
        for (n, v) in named {
            if !v.is_finite() {
                errors.push(format!("parameter {n} must be finite (got {v})"));
            }
        }
        for (n, v) in &named[..5] {
            if *v < 0.0 {
                errors.push(format!("parameter {n} must be nonnegative (got {v})"));
            }
        }
        if !(self.a > 0.0) {
            errors.push(format!("mutation coefficient a must be positive (got {})", self.a));
        }
        if !(self.young > 0.0) {
            errors.push(format!("Young's modulus must be positive (got {})", self.young));
        }
        if !(self.poisson > 0.0 && self.poisson < 0.5) {
            errors.push(format!("Poisson ratio must satisfy 0 < nu < 0.5 (got {})", self.poisson));
        }
        if !is_spd(&self.k0) {
            errors.push(format!("k0 must be symmetric positive definite (got {:?})", self.k0));
        }
        if !is_spd(&self.theta) {
            errors.push(format!(
                "thermal conductivity theta must be symmetric positive definite (got {:?})",
                self.theta
            ));
        }
        let mut storage = Vec::new();
        if !(self.c0 - self.b0 > 0.0) {
            storage.push(format!("storage condition c0 - b0 > 0 violated (c0={}, b0={})", self.c0, self.b0));
        }
        if !(self.a0 - self.b0 > 0.0) {
            storage.push(format!("storage condition a0 - b0 > 0 violated (a0={}, b0={})", self.a0, self.b0));
        }
        if allow_storage_override {
            warnings.extend(storage);
        } else {
            errors.extend(storage);
        }
        (errors, warnings)
    }

    pub fn check(&self, allow_storage_override: bool) -> Result<Vec<String>> {
        let (errors, warnings) = self.validate(allow_storage_override);
        if errors.is_empty() {
            Ok(warnings)
        } else {
            Err(Error::Config(errors))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn catalogue_sets_validate() {
        for (name, p) in PhysicalParams::catalogue() {
            let (e, w) = p.validate(false);
            assert!(e.is_empty(), "{name}: {e:?}");
            assert!(w.is_empty(), "{name}: {w:?}");
        }
    }

    #[test]
    fn poisson_bound_reported() {
        let p = PhysicalParams {
            poisson: 0.6,
            ..PhysicalParams::test1()
        };
        let (e, _) = p.validate(false);
        assert!(e.iter().any(|m| m.contains("Poisson")));
    }

    #[test]
    fn all_errors_collected() {
        let p = PhysicalParams {
            poisson: 0.6,
            young: -1.0,
            theta: [[1.0, 0.0], [0.0, -1.0]],
            ..PhysicalParams::test1()
        };
        assert_eq!(p.validate(false).0.len(), 3);
    }

    #[test]
    fn storage_override_downgrades() {
        let p = PhysicalParams {
            b0: 0.5,
            ..PhysicalParams::test1()
        };
        assert!(p.check(false).is_err());
        assert_eq!(p.check(true).unwrap().len(), 2);
    }
}
