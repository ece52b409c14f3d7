//! Backward-Euler stepper for the original three-field form `(u, p, T)`,
//! with the permeability frozen at the previous step.

use log::warn;

use super::linear::{LuFactor, SymbolicCache};
use super::{axpy, Discretization, SolverSettings};
use crate::assembly::{apply_dirichlet, assemble_grad_div, pt_boundary_data, DirichletSet, TripletBuilder};
use crate::error::Result;
use crate::spaces::FieldVector;

#[derive(Debug, Clone)]
pub struct ClassicalState {
    pub n: usize,
    pub t: f64,
    pub u: FieldVector,
    pub p: FieldVector,
    pub temp: FieldVector,
}

pub struct Classical {
    pub disc: Discretization,
    pub settings: SolverSettings,
    elastic: crate::assembly::CsrMatrix,
    cache: SymbolicCache,
}

impl Classical {
    pub fn new(disc: Discretization, settings: SolverSettings) -> Result<Self> {
        for w in settings.check(disc.mesh.h)? {
            warn!("{w}");
        }
        let gd = assemble_grad_div(&disc.u_space)?;
        let c = &disc.coeffs;
        let elastic = disc.vector_laplacian.add(c.mu, &gd, c.lambda + c.mu);
        Ok(Classical {
            disc,
            settings,
            elastic,
            cache: SymbolicCache::new(),
        })
    }

    pub fn init(&self) -> Result<ClassicalState> {
        let (u, p, temp, _) = self.disc.initial_fields(self.settings.project_initial)?;
        Ok(ClassicalState { n: 0, t: 0.0, u, p, temp })
    }

    pub fn step(&mut self, s: &ClassicalState) -> Result<ClassicalState> {
        let d = &self.disc;
        let pr = &d.params;
        let (nu, ns) = (d.nu(), d.ns());
        let (op, ot) = (nu, nu + ns);
        let n1 = s.n + 1;
        let t1 = self.settings.time(n1);
        let dt = self.settings.dt;

        let kk = d.permeability_stiffness_original(&s.u, &s.p, &s.temp)?;
        let b = &d.divergence;
        let m = &d.mass;
        let mut tb = TripletBuilder::new(nu + 2 * ns, nu + 2 * ns);
        tb.add_block(0, 0, &self.elastic, 1.0);
        tb.add_block_transposed(0, op, b, -pr.alpha);
        tb.add_block_transposed(0, ot, b, -pr.beta);
        tb.add_block(op, 0, b, pr.alpha);
        tb.add_block(op, op, m, pr.c0);
        tb.add_block(op, op, &kk, dt);
        tb.add_block(op, ot, m, -pr.b0);
        tb.add_block(ot, 0, b, pr.beta);
        tb.add_block(ot, op, m, -pr.b0);
        tb.add_block(ot, ot, m, pr.a0);
        tb.add_block(ot, ot, &d.theta_stiffness, dt);
        let mut mat = tb.build();

        let mut rhs = d.momentum_load(t1, Some((&s.p, &s.temp)));
        let bu = b.matvec(&s.u.coeffs);
        let mp = m.matvec(&s.p.coeffs);
        let mt = m.matvec(&s.temp.coeffs);
        let mut top = d.fluid_load(t1);
        top.iter_mut().for_each(|v| *v *= dt);
        axpy(&mut top, pr.alpha, &bu);
        axpy(&mut top, pr.c0, &mp);
        axpy(&mut top, -pr.b0, &mt);
        let mut bot = d.heat_load(t1);
        bot.iter_mut().for_each(|v| *v *= dt);
        axpy(&mut bot, pr.beta, &bu);
        axpy(&mut bot, -pr.b0, &mp);
        axpy(&mut bot, pr.a0, &mt);
        rhs.extend(top);
        rhs.extend(bot);

        let data = pt_boundary_data(&d.s_space, d.problem.as_ref(), t1);
        let mut set = d.u_dirichlet(t1)?;
        let mut pset = DirichletSet::new();
        let mut tset = DirichletSet::new();
        for &(i, pd, td) in &data.both {
            pset.insert(i, pd)?;
            tset.insert(i, td)?;
        }
        for &(i, pd) in &data.p_only {
            pset.insert(i, pd)?;
        }
        for &(i, td) in &data.t_only {
            tset.insert(i, td)?;
        }
        set.extend(&pset.shifted(op))?;
        set.extend(&tset.shifted(ot))?;
        apply_dirichlet(&mut mat, &mut rhs, &set)?;
        let x = LuFactor::new(&mat, self.settings.linear_tol, Some(&mut self.cache))?.solve(&rhs)?;
        Ok(ClassicalState {
            n: n1,
            t: t1,
            u: FieldVector::from_coeffs(&d.u_space, x[..nu].to_vec())?,
            p: FieldVector::from_coeffs(&d.s_space, x[op..ot].to_vec())?,
            temp: FieldVector::from_coeffs(&d.s_space, x[ot..].to_vec())?,
        })
    }

    pub fn run(&mut self, mut observe: impl FnMut(&ClassicalState) -> Result<()>) -> Result<ClassicalState> {
        let mut s = self.init()?;
        observe(&s)?;
        for _ in 0..self.settings.num_steps() {
            s = self.step(&s)?;
            observe(&s)?;
        }
        Ok(s)
    }
}
