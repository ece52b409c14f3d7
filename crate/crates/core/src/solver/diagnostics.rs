//! Per-step diagnostics: conserved means, the discrete energy functional and
//! the pressure undershoot metric.

use std::fmt::Write as _;
use std::path::Path;

use super::{Discretization, StepperState};
use crate::assembly::{assemble_load_with, boundary_points};
use crate::error::{Error, Result};
use crate::mesh::Segment;
use crate::spaces::{integrate_field, FieldVector};

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Means {
    pub varpi: f64,
    pub varsigma: f64,
    pub tau: f64,
    /// `⟨u·n, 1⟩`.
    pub u_flux: f64,
}

pub fn means(state: &StepperState) -> Means {
    let u = &state.u;
    let sp = &u.space;
    let u_flux = boundary_points(sp, &Segment::ALL, sp.degree + 1)
        .iter()
        .map(|qp| {
            let v = u.eval(qp.element, qp.bary).value;
            let n = qp.segment.normal();
            qp.weight * (v[0] * n[0] + v[1] * n[1])
        })
        .sum();
    Means {
        varpi: integrate_field(&state.varpi, 0),
        varsigma: integrate_field(&state.varsigma, 0),
        tau: integrate_field(&state.tau, 0),
        u_flux,
    }
}

/// Terms of the energy functional evaluated on one state.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Energy {
    /// `μ‖∇u‖²`.
    pub grad_u: f64,
    /// `γ6‖τ‖²`.
    pub tau: f64,
    /// `(γ5 + γ2)‖ϖ‖²`.
    pub varpi: f64,
    /// `(γ3 + γ2)‖ς‖²`.
    pub varsigma: f64,
    /// `(γ2/2)‖ς − ϖ‖²`.
    pub cross: f64,
    /// `(f, u)`.
    pub body_work: f64,
    /// `⟨f1, u⟩`.
    pub traction_work: f64,
}

impl Energy {
    /// Weighted-norm part, without the source pairings.
    pub fn norms(&self) -> f64 {
        0.5 * (self.grad_u + self.tau + self.varpi + self.varsigma - self.cross)
    }

    pub fn total(&self) -> f64 {
        self.norms() - self.body_work - self.traction_work
    }
}

pub fn energy(disc: &Discretization, state: &StepperState) -> Energy {
    let c = &disc.coeffs;
    let m = &disc.mass;
    let sq = |v: &[f64]| m.quadratic_form(v, v);
    let diff: Vec<f64> = state
        .varsigma
        .coeffs
        .iter()
        .zip(&state.varpi.coeffs)
        .map(|(a, b)| a - b)
        .collect();
    let t = state.t;
    let pr = &disc.problem;
    let body = assemble_load_with(&disc.u_space, &disc.rule, &|_, _, x| pr.body_force(x, t));
    let full = disc.momentum_load(t, Some((&state.p, &state.temp)));
    let u = &state.u.coeffs;
    let body_work: f64 = body.iter().zip(u).map(|(a, b)| a * b).sum();
    let all_work: f64 = full.iter().zip(u).map(|(a, b)| a * b).sum();
    Energy {
        grad_u: c.mu * disc.vector_laplacian.quadratic_form(u, u),
        tau: c.gamma6 * sq(&state.tau.coeffs),
        varpi: (c.gamma5 + c.gamma2) * sq(&state.varpi.coeffs),
        varsigma: (c.gamma3 + c.gamma2) * sq(&state.varsigma.coeffs),
        cross: 0.5 * c.gamma2 * sq(&diff),
        body_work,
        traction_work: all_work - body_work,
    }
}

/// Negative excursions of a pressure field.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Undershoot {
    /// `∫ max(0, −p_h)`.
    pub integral: f64,
    pub min_nodal: f64,
}

impl Undershoot {
    /// `∫ max(0, −p_h) + max(0, −min p_h)`: zero exactly when `p_h ≥ 0`.
    pub fn metric(&self) -> f64 {
        self.integral + (-self.min_nodal).max(0.0)
    }
}

pub fn undershoot(p: &FieldVector, rule: &crate::mesh::QuadratureRule) -> Undershoot {
    let sp = &p.space;
    let integral = (0..sp.num_elements())
        .map(|e| {
            let g = &sp.geometry[e];
            rule.points
                .iter()
                .zip(&rule.weights)
                .map(|(l, w)| 2.0 * g.area * w * (-p.eval(e, *l).value[0]).max(0.0))
                .sum::<f64>()
        })
        .sum();
    let min_nodal = p.coeffs.iter().copied().fold(f64::INFINITY, f64::min);
    Undershoot { integral, min_nodal }
}

/// One CSV row of the run log.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StepLog {
    pub n: usize,
    pub t: f64,
    pub means: Means,
    pub energy: f64,
    pub energy_norms: f64,
    pub picard_iterations: usize,
    pub undershoot: Undershoot,
}

/// Accumulated per-step log.
#[derive(Debug, Clone, Default)]
pub struct Diagnostics {
    pub rows: Vec<StepLog>,
}

pub const LOG_HEADER: &str =
    "n,t,mean_varpi,mean_varsigma,mean_tau,u_flux,energy,energy_norms,picard_iterations,undershoot_integral,min_p,undershoot";

impl Diagnostics {
    pub fn record(&mut self, disc: &Discretization, state: &StepperState) -> StepLog {
        let e = energy(disc, state);
        let row = StepLog {
            n: state.n,
            t: state.t,
            means: means(state),
            energy: e.total(),
            energy_norms: e.norms(),
            picard_iterations: state.picard_iterations,
            undershoot: undershoot(&state.p, &disc.rule),
        };
        self.rows.push(row);
        row
    }

    /// Largest undershoot metric over all recorded steps.
    pub fn max_undershoot(&self) -> f64 {
        self.rows.iter().map(|r| r.undershoot.metric()).fold(0.0, f64::max)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from(LOG_HEADER);
        s.push('\n');
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{},{:.16e},{:.16e},{:.16e}",
                r.n,
                r.t,
                r.means.varpi,
                r.means.varsigma,
                r.means.tau,
                r.means.u_flux,
                r.energy,
                r.energy_norms,
                r.picard_iterations,
                r.undershoot.integral,
                r.undershoot.min_nodal,
                r.undershoot.metric()
            );
        }
        s
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }
}
