//! Backward-Euler stepper in the multiphysics variables `(u, τ, ϖ, ς)`.
//!
//! `theta = 0`: the generalized Stokes block for `(u, τ)` uses `ϖⁿ, ςⁿ`
//! and is factored once; the `(ϖ, ς)` transport system then uses
//! `k(τⁿ⁺¹)`. `theta = 1`: the four fields are solved together and the
//! permeability is resolved by Picard (frozen-coefficient) iteration.

use log::{debug, warn};

use super::linear::{LuFactor, SymbolicCache};
use super::{axpy, norm2, recover_fields, Discretization, SolverSettings, StepperState};
use crate::assembly::{apply_dirichlet, pt_boundary_data, replace_rows, translate_pt_dirichlet, CsrMatrix, TripletBuilder};
use crate::error::{Error, Result};
use crate::spaces::FieldVector;

type RowSpec = (usize, Vec<(usize, f64)>, f64);

/// Scales a constraint row so its largest coefficient is one.
fn normalized(row: usize, entries: Vec<(usize, f64)>, rhs: f64) -> RowSpec {
    let s = entries.iter().map(|e| e.1.abs()).fold(0.0, f64::max);
    let s = if s > 0.0 { s } else { 1.0 };
    (row, entries.into_iter().map(|(j, c)| (j, c / s)).collect(), rhs / s)
}

pub struct Mafea {
    pub disc: Discretization,
    pub settings: SolverSettings,
    stokes_raw: CsrMatrix,
    stokes_lu: Option<LuFactor>,
    transport_cache: SymbolicCache,
    mono_cache: SymbolicCache,
}

impl Mafea {
    pub fn new(disc: Discretization, settings: SolverSettings) -> Result<Self> {
        for w in settings.check(disc.mesh.h)? {
            warn!("{w}");
        }
        disc.coeffs.require_positive_gamma6()?;
        let (nu, ns) = (disc.nu(), disc.ns());
        let mut tb = TripletBuilder::new(nu + ns, nu + ns);
        tb.add_block(0, 0, &disc.vector_laplacian, disc.coeffs.mu);
        tb.add_block_transposed(0, nu, &disc.divergence, -1.0);
        tb.add_block(nu, 0, &disc.divergence, 1.0);
        tb.add_block(nu, nu, &disc.mass, disc.coeffs.gamma6);
        Ok(Mafea {
            stokes_raw: tb.build(),
            disc,
            settings,
            stokes_lu: None,
            transport_cache: SymbolicCache::new(),
            mono_cache: SymbolicCache::new(),
        })
    }

    /// Initial state: `u⁰, p⁰, T⁰, q⁰` and the variable change at the nodes.
    pub fn init(&self) -> Result<StepperState> {
        let d = &self.disc;
        let (u, p, temp, q) = d.initial_fields(self.settings.project_initial)?;
        let ns = d.ns();
        let (mut w, mut t, mut s) = (vec![0.0; ns], vec![0.0; ns], vec![0.0; ns]);
        for i in 0..ns {
            let r = d.coeffs.to_reformulated(p.coeffs[i], temp.coeffs[i], q.coeffs[i]);
            w[i] = r.0;
            t[i] = r.1;
            s[i] = r.2;
        }
        let sp = &d.s_space;
        Ok(StepperState {
            n: 0,
            t: 0.0,
            u,
            tau: FieldVector::from_coeffs(sp, t)?,
            varpi: FieldVector::from_coeffs(sp, w)?,
            varsigma: FieldVector::from_coeffs(sp, s)?,
            p,
            temp,
            q,
            picard_iterations: 0,
            picard_history: Vec::new(),
        })
    }

    pub fn step(&mut self, s: &StepperState) -> Result<StepperState> {
        match self.settings.theta {
            0 => self.step_decoupled(s),
            _ => self.step_coupled(s),
        }
    }

    /// Runs all steps, calling `observe` on the initial and every new state.
    pub fn run(&mut self, mut observe: impl FnMut(&StepperState) -> Result<()>) -> Result<StepperState> {
        let mut s = self.init()?;
        observe(&s)?;
        for _ in 0..self.settings.num_steps() {
            s = self.step(&s)?;
            observe(&s)?;
        }
        Ok(s)
    }

    fn step_decoupled(&mut self, s: &StepperState) -> Result<StepperState> {
        let d = &self.disc;
        let (nu, ns) = (d.nu(), d.ns());
        let n1 = s.n + 1;
        let t1 = self.settings.time(n1);
        let dt = self.settings.dt;
        let c = &d.coeffs;

        // Stokes block.
        let mut rhs = d.momentum_load(t1, Some((&s.p, &s.temp)));
        let mut src = vec![0.0; ns];
        axpy(&mut src, c.gamma4, &s.varpi.coeffs);
        axpy(&mut src, c.gamma1, &s.varsigma.coeffs);
        rhs.extend(d.mass.matvec(&src));
        let mut mat = self.stokes_raw.clone();
        apply_dirichlet(&mut mat, &mut rhs, &d.u_dirichlet(t1)?)?;
        if self.stokes_lu.is_none() {
            self.stokes_lu = Some(LuFactor::new(&mat, self.settings.linear_tol, None)?);
        }
        let x = self.stokes_lu.as_ref().expect("factored above").solve(&rhs)?;
        let u = FieldVector::from_coeffs(&d.u_space, x[..nu].to_vec())?;
        let tau = FieldVector::from_coeffs(&d.s_space, x[nu..].to_vec())?;

        // Transport block with k(τⁿ⁺¹).
        let kk = d.permeability_stiffness(&tau)?;
        let kt = &d.theta_stiffness;
        let mut tb = TripletBuilder::new(2 * ns, 2 * ns);
        tb.add_block(0, 0, &d.mass, 1.0);
        tb.add_block(0, 0, &kk, dt * c.gamma5);
        tb.add_block(0, ns, &kk, dt * c.gamma2);
        tb.add_block(ns, 0, kt, dt * c.gamma2);
        tb.add_block(ns, ns, &d.mass, 1.0);
        tb.add_block(ns, ns, kt, dt * c.gamma3);
        let mut mat = tb.build();
        let mut top = d.fluid_load(t1);
        top.iter_mut().for_each(|v| *v *= dt);
        axpy(&mut top, 1.0, &d.mass.matvec(&s.varpi.coeffs));
        axpy(&mut top, -dt * c.gamma4, &kk.matvec(&tau.coeffs));
        let mut bot = d.heat_load(t1);
        bot.iter_mut().for_each(|v| *v *= dt);
        axpy(&mut bot, 1.0, &d.mass.matvec(&s.varsigma.coeffs));
        axpy(&mut bot, -dt * c.gamma1, &kt.matvec(&tau.coeffs));
        let mut rhs = top;
        rhs.extend(bot);

        let data = pt_boundary_data(&d.s_space, d.problem.as_ref(), t1);
        let (wset, sset) = translate_pt_dirichlet(&tau, &data.both, c)?;
        let mut rows = Vec::new();
        for &(i, pd) in &data.p_only {
            rows.push(normalized(
                i,
                vec![(i, c.gamma5), (ns + i, c.gamma2)],
                pd - c.gamma4 * tau.coeffs[i],
            ));
        }
        for &(i, td) in &data.t_only {
            rows.push(normalized(
                ns + i,
                vec![(i, c.gamma2), (ns + i, c.gamma3)],
                td - c.gamma1 * tau.coeffs[i],
            ));
        }
        replace_rows(&mut mat, &mut rhs, &rows);
        let mut set = wset;
        set.extend(&sset.shifted(ns))?;
        apply_dirichlet(&mut mat, &mut rhs, &set)?;
        let y = LuFactor::new(&mat, self.settings.linear_tol, Some(&mut self.transport_cache))?.solve(&rhs)?;
        let varpi = FieldVector::from_coeffs(&d.s_space, y[..ns].to_vec())?;
        let varsigma = FieldVector::from_coeffs(&d.s_space, y[ns..].to_vec())?;

        // Recovery uses ϖⁿ, ςⁿ.
        let (p, temp, q) = recover_fields(c, &tau, &s.varpi, &s.varsigma)?;
        Ok(StepperState {
            n: n1,
            t: t1,
            u,
            tau,
            varpi,
            varsigma,
            p,
            temp,
            q,
            picard_iterations: 1,
            picard_history: Vec::new(),
        })
    }

    fn step_coupled(&mut self, s: &StepperState) -> Result<StepperState> {
        let d = &self.disc;
        let (nu, ns) = (d.nu(), d.ns());
        let n1 = s.n + 1;
        let t1 = self.settings.time(n1);
        let dt = self.settings.dt;
        let c = &d.coeffs;
        let (ot, ow, os) = (nu, nu + ns, nu + 2 * ns);
        let dim = nu + 3 * ns;

        let fluid = d.fluid_load(t1);
        let heat = d.heat_load(t1);
        let mw = d.mass.matvec(&s.varpi.coeffs);
        let ms = d.mass.matvec(&s.varsigma.coeffs);
        let uset = d.u_dirichlet(t1)?;
        let data = pt_boundary_data(&d.s_space, d.problem.as_ref(), t1);
        let mut rows = Vec::new();
        for &(i, pd, td) in &data.both {
            rows.push(normalized(
                ow + i,
                vec![(ot + i, c.gamma4), (ow + i, c.gamma5), (os + i, c.gamma2)],
                pd,
            ));
            rows.push(normalized(
                os + i,
                vec![(ot + i, c.gamma1), (ow + i, c.gamma2), (os + i, c.gamma3)],
                td,
            ));
        }
        for &(i, pd) in &data.p_only {
            rows.push(normalized(
                ow + i,
                vec![(ot + i, c.gamma4), (ow + i, c.gamma5), (os + i, c.gamma2)],
                pd,
            ));
        }
        for &(i, td) in &data.t_only {
            rows.push(normalized(
                os + i,
                vec![(ot + i, c.gamma1), (ow + i, c.gamma2), (os + i, c.gamma3)],
                td,
            ));
        }
        let needs_trace = d.problem.traction_needs_state();
        let static_u = if needs_trace { None } else { Some(d.momentum_load(t1, None)) };

        let mut tau = s.tau.clone();
        let mut varpi = s.varpi.clone();
        let mut varsigma = s.varsigma.clone();
        let (mut p, mut temp) = (s.p.clone(), s.temp.clone());
        let mut history = Vec::new();
        for it in 1..=self.settings.picard_max {
            let kk = d.permeability_stiffness(&tau)?;
            let kt = &d.theta_stiffness;
            let mut tb = TripletBuilder::new(dim, dim);
            tb.add_block(0, 0, &d.vector_laplacian, c.mu);
            tb.add_block_transposed(0, ot, &d.divergence, -1.0);
            tb.add_block(ot, 0, &d.divergence, 1.0);
            tb.add_block(ot, ot, &d.mass, c.gamma6);
            tb.add_block(ot, ow, &d.mass, -c.gamma4);
            tb.add_block(ot, os, &d.mass, -c.gamma1);
            tb.add_block(ow, ot, &kk, dt * c.gamma4);
            tb.add_block(ow, ow, &d.mass, 1.0);
            tb.add_block(ow, ow, &kk, dt * c.gamma5);
            tb.add_block(ow, os, &kk, dt * c.gamma2);
            tb.add_block(os, ot, kt, dt * c.gamma1);
            tb.add_block(os, ow, kt, dt * c.gamma2);
            tb.add_block(os, os, &d.mass, 1.0);
            tb.add_block(os, os, kt, dt * c.gamma3);
            let mut mat = tb.build();

            let mut rhs = match &static_u {
                Some(f) => f.clone(),
                None => d.momentum_load(t1, Some((&p, &temp))),
            };
            rhs.extend(std::iter::repeat(0.0).take(ns));
            rhs.extend(fluid.iter().zip(&mw).map(|(g, m)| dt * g + m));
            rhs.extend(heat.iter().zip(&ms).map(|(g, m)| dt * g + m));
            replace_rows(&mut mat, &mut rhs, &rows);
            apply_dirichlet(&mut mat, &mut rhs, &uset)?;
            let x = LuFactor::new(&mat, self.settings.linear_tol, Some(&mut self.mono_cache))?.solve(&rhs)?;

            let mut inc: f64 = 0.0;
            for (old, off) in [(&tau, ot), (&varpi, ow), (&varsigma, os)] {
                let new = &x[off..off + ns];
                let diff: Vec<f64> = new.iter().zip(&old.coeffs).map(|(a, b)| a - b).collect();
                let dn = norm2(&diff);
                if dn > 0.0 {
                    inc = inc.max(dn / norm2(new).max(f64::MIN_POSITIVE));
                }
            }
            history.push(inc);
            let u = FieldVector::from_coeffs(&d.u_space, x[..nu].to_vec())?;
            tau = FieldVector::from_coeffs(&d.s_space, x[ot..ow].to_vec())?;
            varpi = FieldVector::from_coeffs(&d.s_space, x[ow..os].to_vec())?;
            varsigma = FieldVector::from_coeffs(&d.s_space, x[os..].to_vec())?;
            let (pn, tn, qn) = recover_fields(c, &tau, &varpi, &varsigma)?;
            p = pn;
            temp = tn;
            debug!("step {n1} Picard iteration {it}: relative increment {inc:.3e}");
            if inc <= self.settings.picard_tol {
                return Ok(StepperState {
                    n: n1,
                    t: t1,
                    u,
                    tau,
                    varpi,
                    varsigma,
                    p,
                    temp,
                    q: qn,
                    picard_iterations: it,
                    picard_history: history,
                });
            }
        }
        Err(Error::Solver(format!(
            "Picard iteration did not converge at step {n1} (t = {t1}) within {} iterations; increments {:?}",
            self.settings.picard_max, history
        )))
    }
}
