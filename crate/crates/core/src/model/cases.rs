//! Test problems: manufactured solutions with derived sources, and the
//! boundary-pulse benchmark.

use std::f64::consts::PI;
use std::sync::Arc;

use super::coefficients::DerivedCoefficients;
use super::params::{PhysicalParams, Tensor2};
use super::permeability::PermeabilityLaw;
use crate::error::{Error, Result};
use crate::mesh::Segment;

/// Which conditions are essential on one boundary segment. Components of `u`
/// that are not Dirichlet get the traction; `p`/`T` that are not Dirichlet get
/// the flux data.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SegmentConditions {
    pub u_dirichlet: [bool; 2],
    pub p_dirichlet: bool,
    pub t_dirichlet: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BoundaryLayout {
    pub segments: [SegmentConditions; 4],
}

impl BoundaryLayout {
    pub fn get(&self, s: Segment) -> SegmentConditions {
        self.segments[s.number() - 1]
    }

    pub fn set(&mut self, s: Segment, c: SegmentConditions) {
        self.segments[s.number() - 1] = c;
    }

    /// `u2` fixed on bottom/top, `u1` fixed on left/right, `p`, `T` fixed everywhere.
    pub fn normal_displacement_fixed_sides() -> Self {
        let horiz = SegmentConditions {
            u_dirichlet: [false, true],
            p_dirichlet: true,
            t_dirichlet: true,
        };
        let vert = SegmentConditions {
            u_dirichlet: [true, false],
            ..horiz
        };
        BoundaryLayout {
            segments: [horiz, vert, horiz, vert],
        }
    }

    /// `u1` fixed on bottom/top, `u2` fixed on left/right, `p`, `T` fixed everywhere.
    pub fn tangential_displacement_fixed_sides() -> Self {
        let mut l = Self::normal_displacement_fixed_sides();
        for s in &mut l.segments {
            s.u_dirichlet = [s.u_dirichlet[1], s.u_dirichlet[0]];
        }
        l
    }

    /// Same displacement conditions with flux data for `p` and `T` everywhere.
    pub fn without_pt_dirichlet(mut self) -> Self {
        for s in &mut self.segments {
            s.p_dirichlet = false;
            s.t_dirichlet = false;
        }
        self
    }

    pub fn any_u_dirichlet(&self, c: usize) -> bool {
        self.segments.iter().any(|s| s.u_dirichlet[c])
    }

    pub fn any_p_dirichlet(&self) -> bool {
        self.segments.iter().any(|s| s.p_dirichlet)
    }

    pub fn any_t_dirichlet(&self) -> bool {
        self.segments.iter().any(|s| s.t_dirichlet)
    }
}

/// A point on the boundary together with the current discrete traces of `p`
/// and `T` there (zero when no state is available).
#[derive(Debug, Clone, Copy)]
pub struct BoundaryPoint {
    pub x: [f64; 2],
    pub segment: Segment,
    pub p: f64,
    pub temp: f64,
}

/// Data of an initial-boundary value problem for the original model.
pub trait Problem: Send + Sync {
    fn name(&self) -> &str;
    fn params(&self) -> &PhysicalParams;
    fn layout(&self) -> &BoundaryLayout;
    fn body_force(&self, x: [f64; 2], t: f64) -> [f64; 2];
    fn fluid_source(&self, x: [f64; 2], t: f64) -> f64;
    fn heat_source(&self, x: [f64; 2], t: f64) -> f64;
    /// Dirichlet displacement data.
    fn displacement(&self, x: [f64; 2], t: f64) -> [f64; 2];
    fn pressure(&self, x: [f64; 2], t: f64, s: Segment) -> f64;
    fn temperature(&self, x: [f64; 2], t: f64, s: Segment) -> f64;
    fn traction(&self, bp: &BoundaryPoint, t: f64) -> [f64; 2];
    /// Whether `traction` reads the `p`/`T` traces.
    fn traction_needs_state(&self) -> bool {
        false
    }
    fn fluid_flux(&self, x: [f64; 2], t: f64, s: Segment) -> f64;
    fn heat_flux(&self, x: [f64; 2], t: f64, s: Segment) -> f64;
    /// Initial `(u, p, T)`.
    fn initial(&self, x: [f64; 2]) -> ([f64; 2], f64, f64);
    /// `div u₀` when known in closed form.
    fn initial_divergence(&self, _x: [f64; 2]) -> Option<f64> {
        None
    }
    fn exact(&self) -> Option<&dyn ExactSolution> {
        None
    }
}

/// Exact fields with the derivatives needed by the strong operators.
///
/// Gradients: `grad_u[i][j] = ∂_j u_i`; Hessians: `hess_u[i][j][k] = ∂_j ∂_k u_i`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ExactState {
    pub u: [f64; 2],
    pub grad_u: [[f64; 2]; 2],
    pub hess_u: [[[f64; 2]; 2]; 2],
    pub grad_u_t: [[f64; 2]; 2],
    pub p: f64,
    pub grad_p: [f64; 2],
    pub hess_p: [[f64; 2]; 2],
    pub p_t: f64,
    pub temp: f64,
    pub grad_temp: [f64; 2],
    pub hess_temp: [[f64; 2]; 2],
    pub temp_t: f64,
}

pub trait ExactSolution: Send + Sync {
    fn state(&self, x: [f64; 2], t: f64) -> ExactState;
}

/// `u = (π e^t cos πx cos(πy/2), (π/2) e^t sin πx sin(πy/2))`, `p = T = e^t sin πx cos(πy/2)`.
#[derive(Debug, Clone, Copy, Default)]
pub struct TrigExact;

impl ExactSolution for TrigExact {
    fn state(&self, x: [f64; 2], t: f64) -> ExactState {
        let e = t.exp();
        let (sx, cx) = (PI * x[0]).sin_cos();
        let (sy, cy) = (0.5 * PI * x[1]).sin_cos();
        let (p2, p3) = (PI * PI, PI * PI * PI);
        let u = [PI * e * cx * cy, 0.5 * PI * e * sx * sy];
        let grad_u = [
            [-p2 * e * sx * cy, -0.5 * p2 * e * cx * sy],
            [0.5 * p2 * e * cx * sy, 0.25 * p2 * e * sx * cy],
        ];
        let hess_u = [
            [
                [-p3 * e * cx * cy, 0.5 * p3 * e * sx * sy],
                [0.5 * p3 * e * sx * sy, -0.25 * p3 * e * cx * cy],
            ],
            [
                [-0.5 * p3 * e * sx * sy, 0.25 * p3 * e * cx * cy],
                [0.25 * p3 * e * cx * cy, -0.125 * p3 * e * sx * sy],
            ],
        ];
        let p = e * sx * cy;
        let grad_p = [PI * e * cx * cy, -0.5 * PI * e * sx * sy];
        let hess_p = [
            [-p2 * e * sx * cy, -0.5 * p2 * e * cx * sy],
            [-0.5 * p2 * e * cx * sy, -0.25 * p2 * e * sx * cy],
        ];
        ExactState {
            u,
            grad_u,
            hess_u,
            grad_u_t: grad_u,
            p,
            grad_p,
            hess_p,
            p_t: p,
            temp: p,
            grad_temp: grad_p,
            hess_temp: hess_p,
            temp_t: p,
        }
    }
}

/// `u = (w, w)`, `p = T = w` with `w = t·x(1−x)y(1−y)`.
#[derive(Debug, Clone, Copy, Default)]
pub struct BubbleExact;

impl ExactSolution for BubbleExact {
    fn state(&self, x: [f64; 2], t: f64) -> ExactState {
        let (a, b) = (x[0] * (1.0 - x[0]), x[1] * (1.0 - x[1]));
        let (da, db) = (1.0 - 2.0 * x[0], 1.0 - 2.0 * x[1]);
        let w = t * a * b;
        let g = [t * da * b, t * a * db];
        let h = [[-2.0 * t * b, t * da * db], [t * da * db, -2.0 * t * a]];
        let g_t = [da * b, a * db];
        ExactState {
            u: [w, w],
            grad_u: [g, g],
            hess_u: [h, h],
            grad_u_t: [g_t, g_t],
            p: w,
            grad_p: g,
            hess_p: h,
            p_t: a * b,
            temp: w,
            grad_temp: g,
            hess_temp: h,
            temp_t: a * b,
        }
    }
}

/// Sources and derived quantities of an exact state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivedSources {
    pub f: [f64; 2],
    pub g: f64,
    pub phi: f64,
    pub q: f64,
    pub tau: f64,
    pub k: Tensor2,
}

fn contract(a: &Tensor2, h: &[[f64; 2]; 2]) -> f64 {
    a[0][0] * h[0][0] + a[0][1] * h[0][1] + a[1][0] * h[1][0] + a[1][1] * h[1][1]
}

fn apply(a: &Tensor2, v: [f64; 2]) -> [f64; 2] {
    [a[0][0] * v[0] + a[0][1] * v[1], a[1][0] * v[0] + a[1][1] * v[1]]
}

/// Applies the strong operators of the original model to an exact state.
///
/// The permeability gradient is `b·s·k0·∇τ` where the law is unclamped and
/// zero where the clamp is active.
pub fn derive_sources(
    st: &ExactState,
    params: &PhysicalParams,
    coeffs: &DerivedCoefficients,
    law: &PermeabilityLaw,
) -> Result<DerivedSources> {
    let lm = coeffs.lambda + coeffs.mu;
    let mu = coeffs.mu;
    let (alpha, beta) = (params.alpha, params.beta);
    let q = st.grad_u[0][0] + st.grad_u[1][1];
    let grad_q = [
        st.hess_u[0][0][0] + st.hess_u[1][1][0],
        st.hess_u[0][0][1] + st.hess_u[1][1][1],
    ];
    let lap_u = [
        st.hess_u[0][0][0] + st.hess_u[0][1][1],
        st.hess_u[1][0][0] + st.hess_u[1][1][1],
    ];
    let f = std::array::from_fn(|i| {
        -mu * lap_u[i] - lm * grad_q[i] + alpha * st.grad_p[i] + beta * st.grad_temp[i]
    });
    let tau = alpha * st.p - lm * q + beta * st.temp;
    let grad_tau: [f64; 2] =
        std::array::from_fn(|i| alpha * st.grad_p[i] - lm * grad_q[i] + beta * st.grad_temp[i]);
    let q_t = st.grad_u_t[0][0] + st.grad_u_t[1][1];
    let varpi_t = params.c0 * st.p_t - params.b0 * st.temp_t + alpha * q_t;
    let varsigma_t = params.a0 * st.temp_t - params.b0 * st.p_t + beta * q_t;
    let (s, clamped) = law.factor_clamped(tau)?;
    let ds = match (law.b, clamped) {
        (Some(b), false) => b * s,
        _ => 0.0,
    };
    let k0_grad_p = apply(&law.k0, st.grad_p);
    let div_flux = s * contract(&law.k0, &st.hess_p)
        + ds * (grad_tau[0] * k0_grad_p[0] + grad_tau[1] * k0_grad_p[1]);
    let g = varpi_t - div_flux;
    let phi = varsigma_t - contract(&params.theta, &st.hess_temp);
    Ok(DerivedSources {
        f,
        g,
        phi,
        q,
        tau,
        k: super::permeability::scale(&law.k0, s),
    })
}

/// A problem with a closed-form solution; all data are derived from it.
pub struct Manufactured {
    name: String,
    params: PhysicalParams,
    coeffs: DerivedCoefficients,
    law: PermeabilityLaw,
    layout: BoundaryLayout,
    exact: Arc<dyn ExactSolution>,
    frozen: Option<f64>,
}

impl Manufactured {
    pub fn new(
        name: impl Into<String>,
        params: PhysicalParams,
        layout: BoundaryLayout,
        exact: Arc<dyn ExactSolution>,
    ) -> Result<Self> {
        let coeffs = DerivedCoefficients::derive(&params)?;
        Ok(Manufactured {
            name: name.into(),
            law: PermeabilityLaw::from_params(&params),
            params,
            coeffs,
            layout,
            exact,
            frozen: None,
        })
    }

    pub fn test1(params: PhysicalParams) -> Result<Self> {
        Self::new(
            "test1",
            params,
            BoundaryLayout::normal_displacement_fixed_sides(),
            Arc::new(TrigExact),
        )
    }

    pub fn test2(params: PhysicalParams) -> Result<Self> {
        Self::new(
            "test2",
            params,
            BoundaryLayout::normal_displacement_fixed_sides(),
            Arc::new(BubbleExact),
        )
    }

    /// Evaluates sources and fluxes at the fixed time `t_star` regardless of
    /// the requested time. Dirichlet and initial data are unaffected.
    pub fn with_frozen_sources(mut self, t_star: f64) -> Self {
        self.frozen = Some(t_star);
        self
    }

    pub fn with_layout(mut self, layout: BoundaryLayout) -> Self {
        self.layout = layout;
        self
    }

    pub fn law(&self) -> &PermeabilityLaw {
        &self.law
    }

    fn source_time(&self, t: f64) -> f64 {
        self.frozen.unwrap_or(t)
    }

    fn sources(&self, x: [f64; 2], t: f64) -> DerivedSources {
        let st = self.exact.state(x, self.source_time(t));
        // Exponent overflow is clamped, so this only fails on non-finite input.
        derive_sources(&st, &self.params, &self.coeffs, &self.law).expect("finite exact state")
    }
}

impl Problem for Manufactured {
    fn name(&self) -> &str {
        &self.name
    }

    fn params(&self) -> &PhysicalParams {
        &self.params
    }

    fn layout(&self) -> &BoundaryLayout {
        &self.layout
    }

    fn body_force(&self, x: [f64; 2], t: f64) -> [f64; 2] {
        self.sources(x, t).f
    }

    fn fluid_source(&self, x: [f64; 2], t: f64) -> f64 {
        self.sources(x, t).g
    }

    fn heat_source(&self, x: [f64; 2], t: f64) -> f64 {
        self.sources(x, t).phi
    }

    fn displacement(&self, x: [f64; 2], t: f64) -> [f64; 2] {
        self.exact.state(x, t).u
    }

    fn pressure(&self, x: [f64; 2], t: f64, _: Segment) -> f64 {
        self.exact.state(x, t).p
    }

    fn temperature(&self, x: [f64; 2], t: f64, _: Segment) -> f64 {
        self.exact.state(x, t).temp
    }

    /// `(μ∇u − τI)n` of the exact solution.
    fn traction(&self, bp: &BoundaryPoint, t: f64) -> [f64; 2] {
        let ts = self.source_time(t);
        let st = self.exact.state(bp.x, ts);
        let tau = self.sources(bp.x, t).tau;
        let n = bp.segment.normal();
        let mu = self.coeffs.mu;
        std::array::from_fn(|i| mu * (st.grad_u[i][0] * n[0] + st.grad_u[i][1] * n[1]) - tau * n[i])
    }

    fn fluid_flux(&self, x: [f64; 2], t: f64, s: Segment) -> f64 {
        let st = self.exact.state(x, self.source_time(t));
        let k = self.sources(x, t).k;
        let n = s.normal();
        let kg = apply(&k, st.grad_p);
        kg[0] * n[0] + kg[1] * n[1]
    }

    fn heat_flux(&self, x: [f64; 2], t: f64, s: Segment) -> f64 {
        let st = self.exact.state(x, self.source_time(t));
        let n = s.normal();
        let tg = apply(&self.params.theta, st.grad_temp);
        tg[0] * n[0] + tg[1] * n[1]
    }

    fn initial(&self, x: [f64; 2]) -> ([f64; 2], f64, f64) {
        let st = self.exact.state(x, 0.0);
        (st.u, st.p, st.temp)
    }

    fn initial_divergence(&self, x: [f64; 2]) -> Option<f64> {
        let g = self.exact.state(x, 0.0).grad_u;
        Some(g[0][0] + g[1][1])
    }

    fn exact(&self) -> Option<&dyn ExactSolution> {
        Some(self.exact.as_ref())
    }
}

/// Source-free benchmark driven by a `sin t` pulse of `p` and `T` on part of
/// one segment. The pulse is active where the coordinate along that segment
/// lies in `[0.2, 0.8)`.
#[derive(Debug, Clone)]
pub struct BarryMercer {
    name: String,
    params: PhysicalParams,
    layout: BoundaryLayout,
    pub pulse_segment: Segment,
    pub amplitude: f64,
    pub window: (f64, f64),
}

impl BarryMercer {
    pub fn new(params: PhysicalParams, pulse_segment: Segment) -> Self {
        BarryMercer {
            name: format!("barry_mercer_{pulse_segment}"),
            params,
            layout: BoundaryLayout::tangential_displacement_fixed_sides(),
            pulse_segment,
            amplitude: 1.0,
            window: (0.2, 0.8),
        }
    }

    pub fn with_layout(mut self, layout: BoundaryLayout) -> Self {
        self.layout = layout;
        self
    }

    pub fn with_amplitude(mut self, a: f64) -> Self {
        self.amplitude = a;
        self
    }

    fn pulse(&self, x: [f64; 2], t: f64, s: Segment) -> f64 {
        if s != self.pulse_segment {
            return 0.0;
        }
        // Nodes like 18/90 may land an ulp below the window edge.
        let c = s.tangential_coordinate(x);
        let tol = 1e-12;
        if c >= self.window.0 - tol && c < self.window.1 - tol {
            self.amplitude * t.sin()
        } else {
            0.0
        }
    }
}

impl Problem for BarryMercer {
    fn name(&self) -> &str {
        &self.name
    }

    fn params(&self) -> &PhysicalParams {
        &self.params
    }

    fn layout(&self) -> &BoundaryLayout {
        &self.layout
    }

    fn body_force(&self, _: [f64; 2], _: f64) -> [f64; 2] {
        [0.0; 2]
    }

    fn fluid_source(&self, _: [f64; 2], _: f64) -> f64 {
        0.0
    }

    fn heat_source(&self, _: [f64; 2], _: f64) -> f64 {
        0.0
    }

    fn displacement(&self, _: [f64; 2], _: f64) -> [f64; 2] {
        [0.0; 2]
    }

    fn pressure(&self, x: [f64; 2], t: f64, s: Segment) -> f64 {
        self.pulse(x, t, s)
    }

    fn temperature(&self, x: [f64; 2], t: f64, s: Segment) -> f64 {
        self.pulse(x, t, s)
    }

    /// `(0, αp + βT)` from the current traces.
    fn traction(&self, bp: &BoundaryPoint, _: f64) -> [f64; 2] {
        [0.0, self.params.alpha * bp.p + self.params.beta * bp.temp]
    }

    fn traction_needs_state(&self) -> bool {
        true
    }

    fn fluid_flux(&self, _: [f64; 2], _: f64, _: Segment) -> f64 {
        0.0
    }

    fn heat_flux(&self, _: [f64; 2], _: f64, _: Segment) -> f64 {
        0.0
    }

    fn initial(&self, _: [f64; 2]) -> ([f64; 2], f64, f64) {
        ([0.0; 2], 0.0, 0.0)
    }
}

/// Builds a named problem: `test1`, `test2`, `barry_mercer` (pulse on the
/// left side) or `b_sweep` (pulse on the top side).
pub fn build_case(name: &str, params: PhysicalParams) -> Result<Arc<dyn Problem>> {
    Ok(match name {
        "test1" => Arc::new(Manufactured::test1(params)?),
        "test2" => Arc::new(Manufactured::test2(params)?),
        "barry_mercer" => Arc::new(BarryMercer::new(params, Segment::G4)),
        "b_sweep" => Arc::new(BarryMercer::new(params, Segment::G3)),
        other => {
            return Err(Error::config(format!(
                "unknown case '{other}' (expected test1, test2, barry_mercer or b_sweep)"
            )))
        }
    })
}

/// [`build_case`] with the boundary layout replaced when `layout` is given.
pub fn build_case_with_layout(
    name: &str,
    params: PhysicalParams,
    layout: Option<BoundaryLayout>,
) -> Result<Arc<dyn Problem>> {
    let Some(l) = layout else {
        return build_case(name, params);
    };
    Ok(match name {
        "test1" => Arc::new(Manufactured::test1(params)?.with_layout(l)),
        "test2" => Arc::new(Manufactured::test2(params)?.with_layout(l)),
        "barry_mercer" => Arc::new(BarryMercer::new(params, Segment::G4).with_layout(l)),
        "b_sweep" => Arc::new(BarryMercer::new(params, Segment::G3).with_layout(l)),
        _ => return build_case(name, params),
    })
}

/// Default boundary layout of a case.
pub fn default_layout(name: &str) -> Result<BoundaryLayout> {
    Ok(*build_case(name, default_params(name)?)?.layout())
}

/// Default parameter set for a case name.
pub fn default_params(name: &str) -> Result<PhysicalParams> {
    match name {
        "test1" => Ok(PhysicalParams::test1()),
        "test2" => Ok(PhysicalParams::test2()),
        "barry_mercer" | "b_sweep" => Ok(PhysicalParams::barry_pressure()),
        other => Err(Error::config(format!("unknown case '{other}'"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn test1_pressure_value() {
        let st = TrigExact.state([0.5, 0.0], 1.0);
        assert!((st.p - std::f64::consts::E).abs() < 1e-15);
    }

    #[test]
    fn test2_displacement_vanishes_at_corners() {
        for c in [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]] {
            for t in [0.0, 0.3, 1.0] {
                assert_eq!(BubbleExact.state(c, t).u, [0.0, 0.0]);
            }
        }
    }

    #[test]
    fn unknown_case_rejected() {
        assert!(matches!(build_case("test9", PhysicalParams::test1()), Err(Error::Config(_))));
        for n in ["test1", "test2", "barry_mercer", "b_sweep"] {
            let p = default_params(n).unwrap();
            assert!(build_case(n, p).is_ok());
        }
    }

    #[test]
    fn pulse_window_and_segment() {
        let b = BarryMercer::new(PhysicalParams::barry_pressure(), Segment::G4);
        let t = 0.5f64;
        assert_eq!(b.pressure([0.0, 0.5], t, Segment::G4), t.sin());
        assert_eq!(b.pressure([0.0, 18.0 * (1.0 / 90.0)], t, Segment::G4), t.sin());
        assert_eq!(b.pressure([0.0, 0.8], t, Segment::G4), 0.0);
        assert_eq!(b.pressure([0.0, 0.1], t, Segment::G4), 0.0);
        assert_eq!(b.pressure([0.5, 0.0], t, Segment::G1), 0.0);
        let z = b.clone().with_amplitude(0.0);
        assert_eq!(z.temperature([0.0, 0.5], t, Segment::G4), 0.0);
    }

    #[test]
    fn frozen_sources_ignore_time() {
        let m = Manufactured::test1(PhysicalParams::test1()).unwrap().with_frozen_sources(0.5);
        let x = [0.3, 0.4];
        assert_eq!(m.fluid_source(x, 0.1), m.fluid_source(x, 0.9));
        assert_ne!(m.displacement(x, 0.1), m.displacement(x, 0.9));
    }

    #[test]
    fn layouts() {
        let l = BoundaryLayout::normal_displacement_fixed_sides();
        assert_eq!(l.get(Segment::G1).u_dirichlet, [false, true]);
        assert_eq!(l.get(Segment::G2).u_dirichlet, [true, false]);
        let b = BoundaryLayout::tangential_displacement_fixed_sides();
        assert_eq!(b.get(Segment::G1).u_dirichlet, [true, false]);
        assert!(!l.without_pt_dirichlet().any_p_dirichlet());
    }
}
