//! Linear solves, the multiphysics time stepper, the classical three-field
//! stepper and run diagnostics.

pub mod classical;
pub mod diagnostics;
pub mod linear;
pub mod mafea;

use std::sync::Arc;

use crate::assembly::{
    assemble_boundary_load, assemble_divergence, assemble_load_with, assemble_mass, assemble_vector_laplacian,
    assemble_weighted_stiffness, dirichlet_nodes, BoundaryQp, CsrMatrix, DirichletSet,
};
use crate::error::{Error, Result};
use crate::mesh::{quadrature, Mesh, QuadratureRule, Segment};
use crate::model::{BoundaryPoint, DerivedCoefficients, PermeabilityLaw, PhysicalParams, Problem};
use crate::spaces::{FeSpace, FieldVector};

pub use classical::Classical;
pub use diagnostics::{Diagnostics, StepLog};
pub use mafea::Mafea;

/// Time stepping and nonlinear/linear solver controls.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverSettings {
    /// 0: decoupled (Stokes block, then transport). 1: monolithic with Picard.
    pub theta: u8,
    pub dt: f64,
    pub t_final: f64,
    pub linear_tol: f64,
    pub picard_tol: f64,
    pub picard_max: usize,
    /// `C` in the `Δt ≤ C·h²` check for `theta = 0`.
    pub dt_coupling: f64,
    /// Initialize `u, p, T` by L2 projection instead of interpolation.
    pub project_initial: bool,
}

impl Default for SolverSettings {
    fn default() -> Self {
        SolverSettings {
            theta: 0,
            dt: 1e-2,
            t_final: 1.0,
            linear_tol: linear::DEFAULT_TOLERANCE,
            picard_tol: 1e-10,
            picard_max: 50,
            dt_coupling: 1.0,
            project_initial: false,
        }
    }
}

impl SolverSettings {
    /// Number of steps `N` with `N·Δt = t_final`.
    pub fn num_steps(&self) -> usize {
        (self.t_final / self.dt).round() as usize
    }

    pub fn time(&self, n: usize) -> f64 {
        n as f64 * self.dt
    }

    /// Returns `(errors, warnings)` for a mesh size `h`.
    pub fn validate(&self, h: f64) -> (Vec<String>, Vec<String>) {
        let mut errors = Vec::new();
        let mut warnings = Vec::new();
        if self.theta > 1 {
            errors.push(format!("theta must be 0 or 1 (got {})", self.theta));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            errors.push(format!("time step must be positive (got {})", self.dt));
        }
        if !(self.t_final > 0.0 && self.t_final.is_finite()) {
            errors.push(format!("final time must be positive (got {})", self.t_final));
        } else if self.dt > 0.0 {
            let r = self.t_final / self.dt;
            if r < 0.5 || (r - r.round()).abs() > 1e-9 * r.max(1.0) {
                errors.push(format!(
                    "final time {} is not an integer multiple of the time step {}",
                    self.t_final, self.dt
                ));
            }
        }
        for (name, v) in [("linear tolerance", self.linear_tol), ("Picard tolerance", self.picard_tol)] {
            if !(v > 0.0 && v < 1.0) {
                errors.push(format!("{name} must lie in (0, 1) (got {v})"));
            }
        }
        if self.picard_max == 0 {
            errors.push("Picard iteration limit must be at least 1".into());
        }
        if self.theta == 0 && self.dt > self.dt_coupling * h * h {
            warnings.push(format!(
                "theta = 0 with dt = {:e} > {}·h² = {:e}; the decoupled scheme needs dt = O(h²)",
                self.dt,
                self.dt_coupling,
                self.dt_coupling * h * h
            ));
        }
        (errors, warnings)
    }

    pub fn check(&self, h: f64) -> Result<Vec<String>> {
        let (e, w) = self.validate(h);
        if e.is_empty() {
            Ok(w)
        } else {
            Err(Error::Config(e))
        }
    }
}

/// Discrete state at `t_n`.
#[derive(Debug, Clone)]
pub struct StepperState {
    pub n: usize,
    pub t: f64,
    pub u: FieldVector,
    pub tau: FieldVector,
    pub varpi: FieldVector,
    pub varsigma: FieldVector,
    pub p: FieldVector,
    pub temp: FieldVector,
    pub q: FieldVector,
    /// Picard iterations of the step that produced this state (1 for linear solves).
    pub picard_iterations: usize,
    /// Relative increments per Picard iteration.
    pub picard_history: Vec<f64>,
}

/// `(p, T, q)` from `(τ, ϖ, ς)` coefficientwise.
pub fn recover_fields(
    coeffs: &DerivedCoefficients,
    tau: &FieldVector,
    varpi: &FieldVector,
    varsigma: &FieldVector,
) -> Result<(FieldVector, FieldVector, FieldVector)> {
    let n = tau.coeffs.len();
    let (mut p, mut t, mut q) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    for i in 0..n {
        let r = coeffs.recover(tau.coeffs[i], varpi.coeffs[i], varsigma.coeffs[i]);
        p[i] = r.0;
        t[i] = r.1;
        q[i] = r.2;
    }
    let s = &tau.space;
    Ok((
        FieldVector::from_coeffs(s, p)?,
        FieldVector::from_coeffs(s, t)?,
        FieldVector::from_coeffs(s, q)?,
    ))
}

/// Spaces, constant matrices and data hooks shared by the steppers.
pub struct Discretization {
    pub problem: Arc<dyn Problem>,
    pub params: PhysicalParams,
    pub coeffs: DerivedCoefficients,
    pub law: PermeabilityLaw,
    pub mesh: Arc<Mesh>,
    /// Vector space for `u`.
    pub u_space: Arc<FeSpace>,
    /// Scalar space shared by `τ, ϖ, ς` (and `p, T, q`).
    pub s_space: Arc<FeSpace>,
    /// Rule for the nonlinear coefficient and loads (degree `2k+2`).
    pub rule: QuadratureRule,
    pub mass: CsrMatrix,
    pub vector_laplacian: CsrMatrix,
    /// `B[i][j] = (div ψ_j, φ_i)`.
    pub divergence: CsrMatrix,
    pub theta_stiffness: CsrMatrix,
    u_dirichlet: Vec<(usize, usize, usize)>,
}

impl Discretization {
    pub fn new(problem: Arc<dyn Problem>, mesh: Arc<Mesh>, u_degree: usize, s_degree: usize) -> Result<Self> {
        let params = problem.params().clone();
        let coeffs = DerivedCoefficients::derive(&params)?;
        let law = PermeabilityLaw::from_params(&params);
        let u_space = FeSpace::new(mesh.clone(), u_degree, 2)?;
        let s_space = FeSpace::new(mesh.clone(), s_degree, 1)?;
        let rule = quadrature(2 * u_degree.max(s_degree) + 2)?;
        let mass = assemble_mass(&s_space);
        let vector_laplacian = assemble_vector_laplacian(&u_space);
        let divergence = assemble_divergence(&u_space, &s_space)?;
        let theta = params.theta;
        let theta_stiffness = assemble_weighted_stiffness(&s_space, &rule, &|_, _, _| theta)?;
        let layout = *problem.layout();
        let mut u_dirichlet = Vec::new();
        for c in 0..2 {
            for (n, _) in dirichlet_nodes(&u_space, |s| layout.get(s).u_dirichlet[c]) {
                u_dirichlet.push((2 * n + c, n, c));
            }
        }
        u_dirichlet.sort_unstable();
        Ok(Discretization {
            problem,
            params,
            coeffs,
            law,
            mesh,
            u_space,
            s_space,
            rule,
            mass,
            vector_laplacian,
            divergence,
            theta_stiffness,
            u_dirichlet,
        })
    }

    /// Replaces the permeability law (used for constant-law control runs).
    pub fn with_law(mut self, law: PermeabilityLaw) -> Self {
        self.law = law;
        self
    }

    pub fn nu(&self) -> usize {
        self.u_space.dof_count()
    }

    pub fn ns(&self) -> usize {
        self.s_space.dof_count()
    }

    pub fn u_dirichlet(&self, t: f64) -> Result<DirichletSet> {
        let mut set = DirichletSet::new();
        for &(dof, n, c) in &self.u_dirichlet {
            set.insert(dof, self.problem.displacement(self.u_space.node_coords[n], t)[c])?;
        }
        Ok(set)
    }

    /// `(f, v) + ⟨f1, v⟩` with the traction evaluated from the given `p`/`T`
    /// traces when the problem needs them.
    pub fn momentum_load(&self, t: f64, traces: Option<(&FieldVector, &FieldVector)>) -> Vec<f64> {
        let pr = &self.problem;
        let mut rhs = assemble_load_with(&self.u_space, &self.rule, &|_, _, x| pr.body_force(x, t));
        let needs = pr.traction_needs_state();
        let trace = |qp: &BoundaryQp| match (needs, traces) {
            (true, Some((p, temp))) => (
                p.eval(qp.element, qp.bary).value[0],
                temp.eval(qp.element, qp.bary).value[0],
            ),
            _ => (0.0, 0.0),
        };
        let layout = *pr.layout();
        let segs: Vec<Segment> = Segment::ALL
            .into_iter()
            .filter(|&s| !layout.get(s).u_dirichlet.iter().all(|&d| d))
            .collect();
        let b = assemble_boundary_load(&self.u_space, &segs, &|qp| {
            let (p, temp) = trace(qp);
            let bp = BoundaryPoint {
                x: qp.x,
                segment: qp.segment,
                p,
                temp,
            };
            let mut f = pr.traction(&bp, t);
            let d = layout.get(qp.segment).u_dirichlet;
            for c in 0..2 {
                if d[c] {
                    f[c] = 0.0;
                }
            }
            f
        });
        rhs.iter_mut().zip(&b).for_each(|(r, v)| *r += v);
        rhs
    }

    /// `(g, y) + ⟨g1, y⟩` over flux segments.
    pub fn fluid_load(&self, t: f64) -> Vec<f64> {
        let pr = &self.problem;
        let layout = *pr.layout();
        let mut rhs = assemble_load_with(&self.s_space, &self.rule, &|_, _, x| [pr.fluid_source(x, t), 0.0]);
        let segs: Vec<Segment> = Segment::ALL.into_iter().filter(|&s| !layout.get(s).p_dirichlet).collect();
        if !segs.is_empty() {
            let b = assemble_boundary_load(&self.s_space, &segs, &|qp| [pr.fluid_flux(qp.x, t, qp.segment), 0.0]);
            rhs.iter_mut().zip(&b).for_each(|(r, v)| *r += v);
        }
        rhs
    }

    /// `(φ, z) + ⟨φ1, z⟩` over flux segments.
    pub fn heat_load(&self, t: f64) -> Vec<f64> {
        let pr = &self.problem;
        let layout = *pr.layout();
        let mut rhs = assemble_load_with(&self.s_space, &self.rule, &|_, _, x| [pr.heat_source(x, t), 0.0]);
        let segs: Vec<Segment> = Segment::ALL.into_iter().filter(|&s| !layout.get(s).t_dirichlet).collect();
        if !segs.is_empty() {
            let b = assemble_boundary_load(&self.s_space, &segs, &|qp| [pr.heat_flux(qp.x, t, qp.segment), 0.0]);
            rhs.iter_mut().zip(&b).for_each(|(r, v)| *r += v);
        }
        rhs
    }

    /// `(k(τ_h) ∇·, ∇·)` with `k` evaluated at quadrature points.
    pub fn permeability_stiffness(&self, tau: &FieldVector) -> Result<CsrMatrix> {
        let law = &self.law;
        // Errors inside the parallel closure surface as a non-finite tensor,
        // which the assembler rejects.
        assemble_weighted_stiffness(&self.s_space, &self.rule, &|e, l, _| {
            law.tensor(tau.eval(e, l).value[0]).unwrap_or([[f64::NAN; 2]; 2])
        })
    }

    /// Permeability from the original variables `(u, p, T)`.
    pub fn permeability_stiffness_original(
        &self,
        u: &FieldVector,
        p: &FieldVector,
        temp: &FieldVector,
    ) -> Result<CsrMatrix> {
        let law = &self.law;
        let lam_mu = self.coeffs.lambda + self.coeffs.mu;
        let (alpha, beta) = (self.params.alpha, self.params.beta);
        assemble_weighted_stiffness(&self.s_space, &self.rule, &|e, l, _| {
            let g = u.eval(e, l).grad;
            let q = g[0][0] + g[1][1];
            let s = law.factor_original(
                lam_mu,
                alpha,
                beta,
                q,
                p.eval(e, l).value[0],
                temp.eval(e, l).value[0],
            );
            match s {
                Ok(s) => crate::model::permeability::scale(&law.k0, s),
                Err(_) => [[f64::NAN; 2]; 2],
            }
        })
    }

    /// Initial `u⁰, p⁰, T⁰` by interpolation, `q⁰` as the L2 projection of
    /// the elementwise divergence of `u⁰`. With `project`, all fields are L2
    /// projections and `q⁰` projects `div u₀` itself when the problem knows it.
    pub fn initial_fields(&self, project: bool) -> Result<(FieldVector, FieldVector, FieldVector, FieldVector)> {
        let pr = &self.problem;
        let (u, p, temp) = if project {
            (
                crate::spaces::l2_project(&self.u_space, |_, _, x| pr.initial(x).0)?,
                crate::spaces::l2_project(&self.s_space, |_, _, x| [pr.initial(x).1, 0.0])?,
                crate::spaces::l2_project(&self.s_space, |_, _, x| [pr.initial(x).2, 0.0])?,
            )
        } else {
            (
                crate::spaces::interpolate_vector(&self.u_space, |x| pr.initial(x).0)?,
                crate::spaces::interpolate(&self.s_space, |x| pr.initial(x).1)?,
                crate::spaces::interpolate(&self.s_space, |x| pr.initial(x).2)?,
            )
        };
        let exact_div = project && pr.initial_divergence([0.0; 2]).is_some();
        let q = if exact_div {
            crate::spaces::l2_project(&self.s_space, |_, _, x| [pr.initial_divergence(x).unwrap_or(0.0), 0.0])?
        } else if u.coeffs.iter().all(|&v| v == 0.0) {
            FieldVector::zeros(&self.s_space)
        } else {
            crate::spaces::l2_project(&self.s_space, |e, l, _| {
                let g = u.eval(e, l).grad;
                [g[0][0] + g[1][1], 0.0]
            })?
        };
        Ok((u, p, temp, q))
    }
}

pub(crate) fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    y.iter_mut().zip(x).for_each(|(y, x)| *y += a * x);
}

pub(crate) fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}
