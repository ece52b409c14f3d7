//! Matrices and load vectors of the discrete systems, and essential
//! boundary conditions.

pub mod dirichlet;
pub mod sparse;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::mesh::{gauss_legendre, quadrature, QuadratureRule, Segment, LOCAL_EDGES};
use crate::model::Tensor2;
use crate::spaces::{shape_functions, FeSpace, Shape};

pub use dirichlet::{
    apply_dirichlet, dirichlet_nodes, pt_boundary_data, replace_rows, translate_pt_dirichlet, DirichletSet,
    PtBoundaryData, SparseSystem,
};
pub use sparse::{CsrMatrix, TripletBuilder};

/// One local element contribution: rows, columns, dense row-major values.
struct Local {
    rows: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

fn scatter(nrows: usize, ncols: usize, locals: Vec<Local>) -> CsrMatrix {
    let mut tb = TripletBuilder::new(nrows, ncols);
    tb.entries.reserve(locals.iter().map(|l| l.vals.len()).sum());
    for l in locals {
        let nc = l.cols.len();
        for (a, &i) in l.rows.iter().enumerate() {
            for (b, &j) in l.cols.iter().enumerate() {
                tb.push(i, j, l.vals[a * nc + b]);
            }
        }
    }
    tb.build()
}

/// Quadrature points of element `e` with physical weights.
fn element_points<'a>(
    space: &'a FeSpace,
    e: usize,
    rule: &'a QuadratureRule,
) -> impl Iterator<Item = ([f64; 3], [f64; 2], f64)> + 'a {
    let g = &space.geometry[e];
    rule.points
        .iter()
        .zip(&rule.weights)
        .map(move |(l, w)| (*l, g.to_physical(*l), 2.0 * g.area * w))
}

fn shapes(space: &FeSpace, e: usize, l: [f64; 3]) -> Shape {
    shape_functions(space.degree, &space.geometry[e], l)
}

/// L2 Gram matrix; block diagonal per component for vector spaces.
pub fn assemble_mass(space: &FeSpace) -> CsrMatrix {
    let rule = quadrature(2 * space.degree).expect("supported degree");
    let d = space.value_dim;
    let locals = (0..space.num_elements())
        .into_par_iter()
        .map(|e| {
            let dofs = space.element_dofs(e);
            let n = dofs.len();
            let mut vals = vec![0.0; n * n];
            for (l, _, w) in element_points(space, e, &rule) {
                let sh = shapes(space, e, l);
                for (a, va) in sh.values.iter().enumerate() {
                    for (b, vb) in sh.values.iter().enumerate() {
                        for c in 0..d {
                            vals[(d * a + c) * n + d * b + c] += w * va * vb;
                        }
                    }
                }
            }
            Local {
                rows: dofs.clone(),
                cols: dofs,
                vals,
            }
        })
        .collect();
    scatter(space.dof_count(), space.dof_count(), locals)
}

/// `(c ∇u, ∇v)` on a scalar space with a tensor coefficient evaluated per
/// quadrature point as `coef(element, barycentric, x)`.
pub fn assemble_weighted_stiffness(
    space: &FeSpace,
    rule: &QuadratureRule,
    coef: &(dyn Fn(usize, [f64; 3], [f64; 2]) -> Tensor2 + Sync),
) -> Result<CsrMatrix> {
    if space.value_dim != 1 {
        return Err(Error::Contract("weighted stiffness needs a scalar space".into()));
    }
    let locals: Vec<Result<Local>> = (0..space.num_elements())
        .into_par_iter()
        .map(|e| {
            let nodes = space.element_nodes(e).to_vec();
            let n = nodes.len();
            let mut vals = vec![0.0; n * n];
            for (l, x, w) in element_points(space, e, rule) {
                let k = coef(e, l, x);
                let det = k[0][0] * k[1][1] - k[0][1] * k[1][0];
                if !(k[0][0] > 0.0 && det > 0.0 && det.is_finite()) {
                    return Err(Error::Model(format!(
                        "diffusion coefficient {k:?} at {x:?} is not positive definite"
                    )));
                }
                let sh = shapes(space, e, l);
                for (a, ga) in sh.grads.iter().enumerate() {
                    for (b, gb) in sh.grads.iter().enumerate() {
                        let kgb = [k[0][0] * gb[0] + k[0][1] * gb[1], k[1][0] * gb[0] + k[1][1] * gb[1]];
                        vals[a * n + b] += w * (ga[0] * kgb[0] + ga[1] * kgb[1]);
                    }
                }
            }
            Ok(Local {
                rows: nodes.clone(),
                cols: nodes,
                vals,
            })
        })
        .collect();
    let locals = locals.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(scatter(space.dof_count(), space.dof_count(), locals))
}

/// Unit-coefficient Laplacian `(∇u, ∇v)` on a scalar space.
pub fn assemble_stiffness(space: &FeSpace) -> CsrMatrix {
    let rule = quadrature(2 * space.degree.max(1)).expect("supported degree");
    assemble_weighted_stiffness(space, &rule, &|_, _, _| [[1.0, 0.0], [0.0, 1.0]])
        .expect("unit coefficient is positive")
}

/// `(∇u, ∇v)` summed over components of a vector space.
pub fn assemble_vector_laplacian(space: &FeSpace) -> CsrMatrix {
    let rule = quadrature(2 * space.degree.max(1)).expect("supported degree");
    let d = space.value_dim;
    let locals = (0..space.num_elements())
        .into_par_iter()
        .map(|e| {
            let dofs = space.element_dofs(e);
            let n = dofs.len();
            let mut vals = vec![0.0; n * n];
            for (l, _, w) in element_points(space, e, &rule) {
                let sh = shapes(space, e, l);
                for (a, ga) in sh.grads.iter().enumerate() {
                    for (b, gb) in sh.grads.iter().enumerate() {
                        let v = w * (ga[0] * gb[0] + ga[1] * gb[1]);
                        for c in 0..d {
                            vals[(d * a + c) * n + d * b + c] += v;
                        }
                    }
                }
            }
            Local {
                rows: dofs.clone(),
                cols: dofs,
                vals,
            }
        })
        .collect();
    scatter(space.dof_count(), space.dof_count(), locals)
}

fn require_vector(space: &FeSpace) -> Result<()> {
    if space.value_dim != 2 {
        return Err(Error::Contract("displacement space must be vector valued".into()));
    }
    Ok(())
}

/// `(div u, div v)` on a vector space.
pub fn assemble_grad_div(space: &FeSpace) -> Result<CsrMatrix> {
    require_vector(space)?;
    let rule = quadrature(2 * space.degree.max(1)).expect("supported degree");
    let locals = (0..space.num_elements())
        .into_par_iter()
        .map(|e| {
            let dofs = space.element_dofs(e);
            let n = dofs.len();
            let mut vals = vec![0.0; n * n];
            for (l, _, w) in element_points(space, e, &rule) {
                let sh = shapes(space, e, l);
                // div of basis (node a, component c) is ∂_c φ_a.
                for a in 0..sh.grads.len() {
                    for ca in 0..2 {
                        for b in 0..sh.grads.len() {
                            for cb in 0..2 {
                                vals[(2 * a + ca) * n + 2 * b + cb] += w * sh.grads[a][ca] * sh.grads[b][cb];
                            }
                        }
                    }
                }
            }
            Local {
                rows: dofs.clone(),
                cols: dofs,
                vals,
            }
        })
        .collect();
    Ok(scatter(space.dof_count(), space.dof_count(), locals))
}

/// `B` with `B[i][j] = (div ψ_j, φ_i)`, rows in the scalar space, columns in
/// the vector space.
pub fn assemble_divergence(u_space: &FeSpace, s_space: &FeSpace) -> Result<CsrMatrix> {
    require_vector(u_space)?;
    if s_space.value_dim != 1 || !std::sync::Arc::ptr_eq(&u_space.mesh, &s_space.mesh) {
        return Err(Error::Contract("divergence needs a scalar space on the same mesh".into()));
    }
    let rule = quadrature(u_space.degree + s_space.degree - 1).expect("supported degree");
    let locals = (0..u_space.num_elements())
        .into_par_iter()
        .map(|e| {
            let cols = u_space.element_dofs(e);
            let rows = s_space.element_nodes(e).to_vec();
            let nc = cols.len();
            let mut vals = vec![0.0; rows.len() * nc];
            for (l, _, w) in element_points(u_space, e, &rule) {
                let su = shapes(u_space, e, l);
                let ss = shapes(s_space, e, l);
                for (i, phi) in ss.values.iter().enumerate() {
                    for (b, g) in su.grads.iter().enumerate() {
                        vals[i * nc + 2 * b] += w * phi * g[0];
                        vals[i * nc + 2 * b + 1] += w * phi * g[1];
                    }
                }
            }
            Local { rows, cols, vals }
        })
        .collect();
    Ok(scatter(s_space.dof_count(), u_space.dof_count(), locals))
}

/// `(f, v)` with `f(element, barycentric, x)`; scalar spaces use component 0.
pub fn assemble_load(space: &FeSpace, f: &(dyn Fn(usize, [f64; 3], [f64; 2]) -> [f64; 2] + Sync)) -> Vec<f64> {
    let rule = space.default_quadrature();
    assemble_load_with(space, &rule, f)
}

pub fn assemble_load_with(
    space: &FeSpace,
    rule: &QuadratureRule,
    f: &(dyn Fn(usize, [f64; 3], [f64; 2]) -> [f64; 2] + Sync),
) -> Vec<f64> {
    let d = space.value_dim;
    let locals: Vec<(Vec<usize>, Vec<f64>)> = (0..space.num_elements())
        .into_par_iter()
        .map(|e| {
            let dofs = space.element_dofs(e);
            let mut vals = vec![0.0; dofs.len()];
            for (l, x, w) in element_points(space, e, rule) {
                let fx = f(e, l, x);
                let sh = shapes(space, e, l);
                for (a, v) in sh.values.iter().enumerate() {
                    for c in 0..d {
                        vals[d * a + c] += w * fx[c] * v;
                    }
                }
            }
            (dofs, vals)
        })
        .collect();
    let mut out = vec![0.0; space.dof_count()];
    for (dofs, vals) in locals {
        for (i, v) in dofs.into_iter().zip(vals) {
            out[i] += v;
        }
    }
    out
}

/// A quadrature point on a boundary edge.
#[derive(Debug, Clone, Copy)]
pub struct BoundaryQp {
    pub element: usize,
    pub bary: [f64; 3],
    pub x: [f64; 2],
    pub segment: Segment,
    pub weight: f64,
}

/// Gauss points on every boundary edge whose segment is in `segments`.
pub fn boundary_points(space: &FeSpace, segments: &[Segment], npts: usize) -> Vec<BoundaryQp> {
    let (s, w) = gauss_legendre(npts);
    let mesh = &space.mesh;
    let mut out = Vec::new();
    for be in mesh.boundary_edges.iter().filter(|b| segments.contains(&b.segment)) {
        let [i, j] = LOCAL_EDGES[be.local_edge];
        let (a, b) = (mesh.vertices[be.vertices[0]], mesh.vertices[be.vertices[1]]);
        let len = (b[0] - a[0]).hypot(b[1] - a[1]);
        for (sk, wk) in s.iter().zip(&w) {
            let mut l = [0.0; 3];
            l[i] = 1.0 - sk;
            l[j] = *sk;
            out.push(BoundaryQp {
                element: be.triangle,
                bary: l,
                x: [a[0] + sk * (b[0] - a[0]), a[1] + sk * (b[1] - a[1])],
                segment: be.segment,
                weight: wk * len,
            });
        }
    }
    out
}

/// `⟨data, v⟩` over the boundary edges of the given segments.
pub fn assemble_boundary_load(
    space: &FeSpace,
    segments: &[Segment],
    data: &(dyn Fn(&BoundaryQp) -> [f64; 2] + Sync),
) -> Vec<f64> {
    let d = space.value_dim;
    let mut out = vec![0.0; space.dof_count()];
    for qp in boundary_points(space, segments, space.degree + 3) {
        let g = data(&qp);
        let sh = shapes(space, qp.element, qp.bary);
        for (a, &n) in space.element_nodes(qp.element).iter().enumerate() {
            for c in 0..d {
                out[d * n + c] += qp.weight * g[c] * sh.values[a];
            }
        }
    }
    out
}
