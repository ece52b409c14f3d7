//! Continuous Lagrange spaces P1/P2, scalar or 2-vector valued.

use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::mesh::{quadrature, Mesh, PointLocator, QuadratureRule, Segment, LOCAL_EDGES};

/// Affine geometry of one triangle.
#[derive(Debug, Clone, Copy)]
pub struct ElementGeometry {
    pub vertices: [[f64; 2]; 3],
    pub area: f64,
    /// Constant gradients of the barycentric coordinates.
    pub grad_lambda: [[f64; 2]; 3],
}

impl ElementGeometry {
    pub fn new(v: [[f64; 2]; 3]) -> Self {
        let det = (v[1][0] - v[0][0]) * (v[2][1] - v[0][1]) - (v[2][0] - v[0][0]) * (v[1][1] - v[0][1]);
        let g = |a: [f64; 2], b: [f64; 2]| [(a[1] - b[1]) / det, (b[0] - a[0]) / det];
        ElementGeometry {
            vertices: v,
            area: 0.5 * det,
            grad_lambda: [g(v[1], v[2]), g(v[2], v[0]), g(v[0], v[1])],
        }
    }

    pub fn to_physical(&self, l: [f64; 3]) -> [f64; 2] {
        let v = &self.vertices;
        [
            l[0] * v[0][0] + l[1] * v[1][0] + l[2] * v[2][0],
            l[0] * v[0][1] + l[1] * v[1][1] + l[2] * v[2][1],
        ]
    }
}

/// Scalar shape functions of one element at one point.
#[derive(Debug, Clone)]
pub struct Shape {
    pub values: Vec<f64>,
    pub grads: Vec<[f64; 2]>,
}

/// Shape values and physical gradients for degree `k` at barycentric `l`.
pub fn shape_functions(k: usize, geom: &ElementGeometry, l: [f64; 3]) -> Shape {
    let gl = &geom.grad_lambda;
    match k {
        1 => Shape {
            values: l.to_vec(),
            grads: gl.to_vec(),
        },
        2 => {
            let mut values = Vec::with_capacity(6);
            let mut grads = Vec::with_capacity(6);
            for i in 0..3 {
                values.push(l[i] * (2.0 * l[i] - 1.0));
                let s = 4.0 * l[i] - 1.0;
                grads.push([s * gl[i][0], s * gl[i][1]]);
            }
            for &[i, j] in &LOCAL_EDGES {
                values.push(4.0 * l[i] * l[j]);
                grads.push([
                    4.0 * (l[j] * gl[i][0] + l[i] * gl[j][0]),
                    4.0 * (l[j] * gl[i][1] + l[i] * gl[j][1]),
                ]);
            }
            Shape { values, grads }
        }
        _ => unreachable!("degree validated at construction"),
    }
}

/// Continuous Pk Lagrange space on a mesh.
///
/// Nodes are vertices (mesh order) followed, for P2, by edge midpoints in
/// sorted vertex-pair order. Vector spaces interleave components per node:
/// DOF `2·node + c`.
#[derive(Debug)]
pub struct FeSpace {
    pub mesh: Arc<Mesh>,
    pub degree: usize,
    pub value_dim: usize,
    pub num_nodes: usize,
    elem_nodes: Vec<usize>,
    pub node_coords: Vec<[f64; 2]>,
    pub geometry: Vec<ElementGeometry>,
}

impl FeSpace {
    pub fn new(mesh: Arc<Mesh>, degree: usize, value_dim: usize) -> Result<Arc<FeSpace>> {
        let mut errs = Vec::new();
        if !(1..=2).contains(&degree) {
            errs.push(format!("element degree must be 1 or 2 (got {degree})"));
        }
        if !(1..=2).contains(&value_dim) {
            errs.push(format!("value dimension must be 1 or 2 (got {value_dim})"));
        }
        if !errs.is_empty() {
            return Err(Error::Config(errs));
        }
        let nv = mesh.num_vertices();
        let mut node_coords = mesh.vertices.clone();
        let nloc = if degree == 1 { 3 } else { 6 };
        let mut elem_nodes = Vec::with_capacity(nloc * mesh.num_triangles());
        if degree == 1 {
            for t in &mesh.triangles {
                elem_nodes.extend_from_slice(t);
            }
        } else {
            let edges = mesh.edges();
            for e in &edges {
                let (a, b) = (mesh.vertices[e[0]], mesh.vertices[e[1]]);
                node_coords.push([0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])]);
            }
            let edge_id = |a: usize, b: usize| {
                let key = [a.min(b), a.max(b)];
                nv + edges.binary_search(&key).expect("edge present")
            };
            for t in &mesh.triangles {
                elem_nodes.extend_from_slice(t);
                for &[i, j] in &LOCAL_EDGES {
                    elem_nodes.push(edge_id(t[i], t[j]));
                }
            }
        }
        let geometry = (0..mesh.num_triangles())
            .map(|t| ElementGeometry::new(mesh.triangle_coords(t)))
            .collect();
        Ok(Arc::new(FeSpace {
            num_nodes: node_coords.len(),
            mesh,
            degree,
            value_dim,
            elem_nodes,
            node_coords,
            geometry,
        }))
    }

    pub fn dof_count(&self) -> usize {
        self.num_nodes * self.value_dim
    }

    pub fn nodes_per_element(&self) -> usize {
        if self.degree == 1 {
            3
        } else {
            6
        }
    }

    pub fn num_elements(&self) -> usize {
        self.geometry.len()
    }

    /// Global node indices of element `e`, in local shape order.
    pub fn element_nodes(&self, e: usize) -> &[usize] {
        let n = self.nodes_per_element();
        &self.elem_nodes[e * n..(e + 1) * n]
    }

    /// Global DOF indices of element `e` (node-major, components interleaved).
    pub fn element_dofs(&self, e: usize) -> Vec<usize> {
        let d = self.value_dim;
        self.element_nodes(e)
            .iter()
            .flat_map(|&n| (0..d).map(move |c| d * n + c))
            .collect()
    }

    /// Local node indices (into `element_nodes`) lying on local edge `le`.
    pub fn edge_local_nodes(&self, le: usize) -> Vec<usize> {
        let [i, j] = LOCAL_EDGES[le];
        if self.degree == 1 {
            vec![i, j]
        } else {
            vec![i, j, 3 + le]
        }
    }

    /// Boundary nodes with the segments they lie on, ascending by node.
    pub fn boundary_nodes(&self) -> Vec<(usize, Vec<Segment>)> {
        let mut pairs: Vec<(usize, Segment)> = Vec::new();
        for be in &self.mesh.boundary_edges {
            let nodes = self.element_nodes(be.triangle);
            for ln in self.edge_local_nodes(be.local_edge) {
                pairs.push((nodes[ln], be.segment));
            }
        }
        pairs.sort();
        pairs.dedup();
        let mut out: Vec<(usize, Vec<Segment>)> = Vec::new();
        for (n, s) in pairs {
            match out.last_mut() {
                Some((m, segs)) if *m == n => segs.push(s),
                _ => out.push((n, vec![s])),
            }
        }
        out
    }

    /// Shape functions of element `e` at barycentric `l`.
    ///
    /// Values and gradients are per local node; in a vector space each node
    /// carries `value_dim` DOFs sharing the same scalar shape.
    pub fn eval_basis(&self, e: usize, l: [f64; 3]) -> Result<Shape> {
        if e >= self.num_elements() {
            return Err(Error::Contract(format!("element {e} out of range")));
        }
        let tol = 1e-12;
        let sum: f64 = l.iter().sum();
        if l.iter().any(|&v| !(-tol..=1.0 + tol).contains(&v)) || (sum - 1.0).abs() > tol {
            return Err(Error::Contract(format!("point {l:?} is not inside the reference element")));
        }
        Ok(shape_functions(self.degree, &self.geometry[e], l))
    }

    /// Same space type on another mesh.
    pub fn on_mesh(&self, mesh: Arc<Mesh>) -> Result<Arc<FeSpace>> {
        FeSpace::new(mesh, self.degree, self.value_dim)
    }

    /// Default quadrature degree 2k+2 for this space.
    pub fn default_quadrature(&self) -> QuadratureRule {
        quadrature(2 * self.degree + 2).expect("degree 6 supported")
    }
}

/// Value and gradient of a (scalar or vector) field at a point; component
/// `c` in `value[c]`, `grad[c]`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PointSample {
    pub value: [f64; 2],
    pub grad: [[f64; 2]; 2],
}

impl PointSample {
    pub fn scalar(value: f64, grad: [f64; 2]) -> Self {
        PointSample {
            value: [value, 0.0],
            grad: [grad, [0.0; 2]],
        }
    }
}

/// Coefficients of a discrete field in a space.
#[derive(Debug, Clone)]
pub struct FieldVector {
    pub space: Arc<FeSpace>,
    pub coeffs: Vec<f64>,
}

impl FieldVector {
    pub fn zeros(space: &Arc<FeSpace>) -> Self {
        FieldVector {
            space: space.clone(),
            coeffs: vec![0.0; space.dof_count()],
        }
    }

    pub fn from_coeffs(space: &Arc<FeSpace>, coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.len() != space.dof_count() {
            return Err(Error::Contract(format!(
                "field length {} does not match space dimension {}",
                coeffs.len(),
                space.dof_count()
            )));
        }
        if let Some(i) = coeffs.iter().position(|v| !v.is_finite()) {
            return Err(Error::Data(format!("non-finite coefficient at DOF {i}")));
        }
        Ok(FieldVector {
            space: space.clone(),
            coeffs,
        })
    }

    /// Evaluates value and gradient in element `e` at barycentric `l`.
    pub fn eval(&self, e: usize, l: [f64; 3]) -> PointSample {
        let sp = &self.space;
        let sh = shape_functions(sp.degree, &sp.geometry[e], l);
        self.combine(e, &sh)
    }

    /// Combines precomputed shape functions of element `e` with the coefficients.
    pub fn combine(&self, e: usize, sh: &Shape) -> PointSample {
        let d = self.space.value_dim;
        let mut out = PointSample::default();
        for (i, &n) in self.space.element_nodes(e).iter().enumerate() {
            for c in 0..d {
                let u = self.coeffs[d * n + c];
                out.value[c] += u * sh.values[i];
                out.grad[c][0] += u * sh.grads[i][0];
                out.grad[c][1] += u * sh.grads[i][1];
            }
        }
        out
    }

    /// Evaluates at a physical point, `None` outside the mesh.
    pub fn eval_point(&self, locator: &PointLocator, x: [f64; 2]) -> Option<PointSample> {
        locator
            .locate(&self.space.mesh, x)
            .map(|(e, l)| self.eval(e, l))
    }

    /// Nodal values of component `c` at the mesh vertices.
    pub fn vertex_values(&self, c: usize) -> Vec<f64> {
        let d = self.space.value_dim;
        (0..self.space.mesh.num_vertices())
            .map(|v| self.coeffs[d * v + c])
            .collect()
    }

    /// Writes `x,y,value...` per vertex.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mesh = &self.space.mesh;
        let d = self.space.value_dim;
        let mut s = String::from("x,y");
        for c in 0..d {
            let _ = write!(s, ",v{c}");
        }
        s.push('\n');
        for (v, p) in mesh.vertices.iter().enumerate() {
            let _ = write!(s, "{:.16e},{:.16e}", p[0], p[1]);
            for c in 0..d {
                let _ = write!(s, ",{:.16e}", self.coeffs[d * v + c]);
            }
            s.push('\n');
        }
        std::fs::write(path, s).map_err(|e| Error::io(path, e))
    }

    /// Legacy ASCII VTK unstructured grid with vertex data.
    pub fn write_vtk(&self, path: &Path, name: &str) -> Result<()> {
        let mesh = &self.space.mesh;
        let d = self.space.value_dim;
        let mut s = String::new();
        s.push_str("# vtk DataFile Version 3.0\nfield\nASCII\nDATASET UNSTRUCTURED_GRID\n");
        let _ = writeln!(s, "POINTS {} double", mesh.num_vertices());
        for p in &mesh.vertices {
            let _ = writeln!(s, "{:.16e} {:.16e} 0", p[0], p[1]);
        }
        let nt = mesh.num_triangles();
        let _ = writeln!(s, "CELLS {} {}", nt, 4 * nt);
        for t in &mesh.triangles {
            let _ = writeln!(s, "3 {} {} {}", t[0], t[1], t[2]);
        }
        let _ = writeln!(s, "CELL_TYPES {nt}");
        for _ in 0..nt {
            s.push_str("5\n");
        }
        let _ = writeln!(s, "POINT_DATA {}", mesh.num_vertices());
        if d == 1 {
            let _ = writeln!(s, "SCALARS {name} double 1\nLOOKUP_TABLE default");
            for v in 0..mesh.num_vertices() {
                let _ = writeln!(s, "{:.16e}", self.coeffs[v]);
            }
        } else {
            let _ = writeln!(s, "VECTORS {name} double");
            for v in 0..mesh.num_vertices() {
                let _ = writeln!(s, "{:.16e} {:.16e} 0", self.coeffs[2 * v], self.coeffs[2 * v + 1]);
            }
        }
        std::fs::write(path, s).map_err(|e| Error::io(path, e))
    }
}

/// Nodal interpolation of a scalar function.
pub fn interpolate(space: &Arc<FeSpace>, f: impl Fn([f64; 2]) -> f64) -> Result<FieldVector> {
    interpolate_vector(space, |x| [f(x), 0.0])
}

/// Nodal interpolation; only the first `value_dim` components are used.
pub fn interpolate_vector(space: &Arc<FeSpace>, f: impl Fn([f64; 2]) -> [f64; 2]) -> Result<FieldVector> {
    let d = space.value_dim;
    let mut coeffs = Vec::with_capacity(space.dof_count());
    for (n, &x) in space.node_coords.iter().enumerate() {
        let v = f(x);
        for (c, &vc) in v.iter().enumerate().take(d) {
            if !vc.is_finite() {
                return Err(Error::Data(format!("non-finite value at node {n} component {c}")));
            }
            coeffs.push(vc);
        }
    }
    FieldVector::from_coeffs(space, coeffs)
}

/// L2 projection of `f(e, l, x)` (evaluated per quadrature point, so
/// elementwise-discontinuous data is allowed).
pub fn l2_project(
    space: &Arc<FeSpace>,
    f: impl Fn(usize, [f64; 3], [f64; 2]) -> [f64; 2] + Sync,
) -> Result<FieldVector> {
    let mass = crate::assembly::assemble_mass(space);
    let rhs = crate::assembly::assemble_load(space, &f);
    let x = crate::solver::linear::solve_csr(&mass, &rhs, 1e-10)?;
    FieldVector::from_coeffs(space, x)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Norm {
    L2,
    H1,
}

/// Quadrature approximation of `‖fh − exact‖`; relative mode divides by `‖exact‖`.
///
/// The H1 norm is the full norm `(‖e‖² + ‖∇e‖²)^½`.
pub fn compute_error(
    fh: &FieldVector,
    exact: impl Fn([f64; 2]) -> PointSample + Sync,
    norm: Norm,
    relative: bool,
) -> Result<f64> {
    let sp = &fh.space;
    let q = sp.default_quadrature();
    let d = sp.value_dim;
    let (err2, ref2) = (0..sp.num_elements())
        .into_par_iter()
        .map(|e| {
            let g = &sp.geometry[e];
            let mut acc = (0.0, 0.0);
            for (l, w) in q.points.iter().zip(&q.weights) {
                let x = g.to_physical(*l);
                let h = fh.eval(e, *l);
                let ex = exact(x);
                let jw = 2.0 * g.area * w;
                for c in 0..d {
                    let dv = h.value[c] - ex.value[c];
                    acc.0 += jw * dv * dv;
                    acc.1 += jw * ex.value[c] * ex.value[c];
                    if norm == Norm::H1 {
                        for k in 0..2 {
                            let dg = h.grad[c][k] - ex.grad[c][k];
                            acc.0 += jw * dg * dg;
                            acc.1 += jw * ex.grad[c][k] * ex.grad[c][k];
                        }
                    }
                }
            }
            acc
        })
        .collect::<Vec<_>>()
        .into_iter()
        .fold((0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1));
    let err = err2.sqrt();
    if relative {
        if ref2 == 0.0 {
            return Err(Error::Data("relative error requested but the exact field has zero norm".into()));
        }
        Ok(err / ref2.sqrt())
    } else {
        Ok(err)
    }
}

/// Error of `fh` against a discrete reference field on another (finer) mesh,
/// integrated over the reference mesh.
pub fn compute_error_against(fh: &FieldVector, reference: &FieldVector, norm: Norm) -> Result<f64> {
    let loc = PointLocator::new(&fh.space.mesh);
    let coarse = |x: [f64; 2]| {
        fh.eval_point(&loc, x)
            .ok_or_else(|| Error::Data(format!("point {x:?} outside the coarse mesh")))
    };
    let rs = &reference.space;
    let q = rs.default_quadrature();
    let d = rs.value_dim;
    let parts: Vec<Result<f64>> = (0..rs.num_elements())
        .into_par_iter()
        .map(|e| {
            let g = &rs.geometry[e];
            let mut acc = 0.0;
            for (l, w) in q.points.iter().zip(&q.weights) {
                let x = g.to_physical(*l);
                let h = coarse(x)?;
                let r = reference.eval(e, *l);
                let jw = 2.0 * g.area * w;
                for c in 0..d {
                    acc += jw * (h.value[c] - r.value[c]).powi(2);
                    if norm == Norm::H1 {
                        for k in 0..2 {
                            acc += jw * (h.grad[c][k] - r.grad[c][k]).powi(2);
                        }
                    }
                }
            }
            Ok(acc)
        })
        .collect();
    let mut total = 0.0;
    for p in parts {
        total += p?;
    }
    Ok(total.sqrt())
}

/// Integral of component `c` over the domain.
pub fn integrate_field(fh: &FieldVector, c: usize) -> f64 {
    let sp = &fh.space;
    let q = quadrature(sp.degree.max(1)).expect("supported degree");
    (0..sp.num_elements())
        .map(|e| {
            let g = &sp.geometry[e];
            q.points
                .iter()
                .zip(&q.weights)
                .map(|(l, w)| 2.0 * g.area * w * fh.eval(e, *l).value[c])
                .sum::<f64>()
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_structured, Rect};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn mesh(n: usize) -> Arc<Mesh> {
        Arc::new(build_structured(n, n, Rect::UNIT).unwrap())
    }

    fn random_bary(rng: &mut ChaCha8Rng) -> [f64; 3] {
        let (mut a, mut b): (f64, f64) = (rng.random(), rng.random());
        if a + b > 1.0 {
            a = 1.0 - a;
            b = 1.0 - b;
        }
        [1.0 - a - b, a, b]
    }

    #[test]
    fn dof_counts() {
        let m = mesh(3);
        let p1 = FeSpace::new(m.clone(), 1, 1).unwrap();
        let p2v = FeSpace::new(m.clone(), 2, 2).unwrap();
        assert_eq!(p1.dof_count(), 16);
        assert_eq!(p2v.dof_count(), 2 * (16 + m.edges().len()));
        for e in 0..p2v.num_elements() {
            assert!(p2v.element_dofs(e).iter().all(|&d| d < p2v.dof_count()));
        }
        assert!(FeSpace::new(m, 3, 1).is_err());
    }

    #[test]
    fn lagrange_property_at_nodes() {
        let m = mesh(2);
        for k in 1..=2 {
            let sp = FeSpace::new(m.clone(), k, 1).unwrap();
            let pts: Vec<[f64; 3]> = vec![
                [1.0, 0.0, 0.0],
                [0.0, 1.0, 0.0],
                [0.0, 0.0, 1.0],
                [0.5, 0.5, 0.0],
                [0.0, 0.5, 0.5],
                [0.5, 0.0, 0.5],
            ];
            for (i, l) in pts.iter().take(sp.nodes_per_element()).enumerate() {
                let s = sp.eval_basis(3, *l).unwrap();
                for (j, v) in s.values.iter().enumerate() {
                    let expect = if i == j { 1.0 } else { 0.0 };
                    assert!((v - expect).abs() < 1e-15);
                }
            }
        }
    }

    #[test]
    fn p1_centroid_values() {
        let sp = FeSpace::new(mesh(1), 1, 1).unwrap();
        let s = sp.eval_basis(0, [1.0 / 3.0; 3]).unwrap();
        assert!(s.values.iter().all(|v| (v - 1.0 / 3.0).abs() < 1e-15));
    }

    #[test]
    fn eval_basis_rejects_outside_points() {
        let sp = FeSpace::new(mesh(1), 1, 1).unwrap();
        assert!(matches!(sp.eval_basis(0, [1.2, -0.2, 0.0]), Err(Error::Contract(_))));
        assert!(matches!(sp.eval_basis(5, [1.0, 0.0, 0.0]), Err(Error::Contract(_))));
    }

    #[test]
    fn partition_of_unity() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let m = mesh(2);
        for k in 1..=2 {
            let sp = FeSpace::new(m.clone(), k, 1).unwrap();
            for e in 0..sp.num_elements() {
                for _ in 0..20 {
                    let s = sp.eval_basis(e, random_bary(&mut rng)).unwrap();
                    assert!((s.values.iter().sum::<f64>() - 1.0).abs() < 1e-13);
                    let gx: f64 = s.grads.iter().map(|g| g[0]).sum();
                    let gy: f64 = s.grads.iter().map(|g| g[1]).sum();
                    assert!(gx.abs() < 1e-12 && gy.abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m = mesh(4);
        let sp = FeSpace::new(m.clone(), 2, 1).unwrap();
        let f = interpolate(&sp, |x| (2.0 * x[0]).sin() * x[1].exp()).unwrap();
        let loc = PointLocator::new(&m);
        let step = 1e-5 * m.h;
        for e in 0..sp.num_elements() {
            let l = random_bary(&mut rng);
            let l = [0.8 * l[0] + 0.2 / 3.0, 0.8 * l[1] + 0.2 / 3.0, 0.8 * l[2] + 0.2 / 3.0];
            let x = sp.geometry[e].to_physical(l);
            let s = f.eval(e, l);
            // Stay inside element e for the stencil.
            let at = |p: [f64; 2]| {
                let bl = crate::mesh::barycentric(sp.geometry[e].vertices, p);
                f.eval(e, bl).value[0]
            };
            let dx = (at([x[0] + step, x[1]]) - at([x[0] - step, x[1]])) / (2.0 * step);
            let dy = (at([x[0], x[1] + step]) - at([x[0], x[1] - step])) / (2.0 * step);
            assert!((dx - s.grad[0][0]).abs() < 1e-6);
            assert!((dy - s.grad[0][1]).abs() < 1e-6);
            assert!(f.eval_point(&loc, x).is_some());
        }
    }

    #[test]
    fn interpolation_of_constants_and_linears() {
        let m = mesh(3);
        let sp = FeSpace::new(m, 1, 1).unwrap();
        let c = interpolate(&sp, |_| 2.5).unwrap();
        assert!(c.coeffs.iter().all(|&v| v == 2.5));
        let lin = |x: [f64; 2]| 1.0 + 2.0 * x[0] - 3.0 * x[1];
        let f = interpolate(&sp, lin).unwrap();
        let q = sp.default_quadrature();
        for e in 0..sp.num_elements() {
            for l in &q.points {
                let x = sp.geometry[e].to_physical(*l);
                assert!((f.eval(e, *l).value[0] - lin(x)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn interpolation_rejects_non_finite() {
        let sp = FeSpace::new(mesh(1), 1, 1).unwrap();
        assert!(matches!(interpolate(&sp, |_| f64::NAN), Err(Error::Data(_))));
    }

    #[test]
    fn p2_interpolation_rate() {
        let f = |x: [f64; 2]| (std::f64::consts::PI * x[0]).sin() * (std::f64::consts::PI * x[1] / 2.0).cos();
        let exact = |x: [f64; 2]| PointSample::scalar(f(x), [0.0, 0.0]);
        let err = |n| {
            let sp = FeSpace::new(mesh(n), 2, 1).unwrap();
            compute_error(&interpolate(&sp, f).unwrap(), exact, Norm::L2, false).unwrap()
        };
        let ratio = err(16) / err(32);
        assert!((ratio - 8.0).abs() < 0.5, "ratio {ratio}");
    }

    #[test]
    fn l2_projection_properties() {
        let m = mesh(4);
        let sp = FeSpace::new(m, 2, 1).unwrap();
        let g = interpolate(&sp, |x| x[0] * x[1] + x[1] * x[1]).unwrap();
        let p = l2_project(&sp, |e, l, _| [g.eval(e, l).value[0], 0.0]).unwrap();
        for (a, b) in p.coeffs.iter().zip(&g.coeffs) {
            assert!((a - b).abs() < 1e-10);
        }
        let h = |x: [f64; 2]| (3.0 * x[0]).exp() * x[1];
        let q = l2_project(&sp, |_, _, x| [h(x), 0.0]).unwrap();
        let mean_exact = ((3f64).exp() - 1.0) / 3.0 * 0.5;
        let load: f64 = crate::assembly::assemble_load(&sp, &|_, _, x| [h(x), 0.0]).iter().sum();
        assert!((integrate_field(&q, 0) - load).abs() < 1e-10);
        assert!((integrate_field(&q, 0) - mean_exact).abs() < 1e-6);
        // Idempotent.
        let qq = l2_project(&sp, |e, l, _| [q.eval(e, l).value[0], 0.0]).unwrap();
        for (a, b) in q.coeffs.iter().zip(&qq.coeffs) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn l2_projection_rate_p1() {
        let f = |x: [f64; 2]| x[0] * x[0];
        let err = |n| {
            let sp = FeSpace::new(mesh(n), 1, 1).unwrap();
            let p = l2_project(&sp, |_, _, x| [f(x), 0.0]).unwrap();
            compute_error(&p, |x| PointSample::scalar(f(x), [2.0 * x[0], 0.0]), Norm::L2, false).unwrap()
        };
        let ratio = err(8) / err(16);
        assert!((ratio - 4.0).abs() < 0.3, "ratio {ratio}");
    }

    #[test]
    fn error_examples() {
        let sp = FeSpace::new(mesh(2), 1, 1).unwrap();
        let z = FieldVector::zeros(&sp);
        let one = |_: [f64; 2]| PointSample::scalar(1.0, [0.0, 0.0]);
        assert!((compute_error(&z, one, Norm::L2, false).unwrap() - 1.0).abs() < 1e-14);
        let lin = |x: [f64; 2]| PointSample::scalar(x[0] - x[1], [1.0, -1.0]);
        let f = interpolate(&sp, |x| x[0] - x[1]).unwrap();
        assert!(compute_error(&f, lin, Norm::H1, false).unwrap() < 1e-10);
        let zero = |_: [f64; 2]| PointSample::default();
        assert!(matches!(compute_error(&z, zero, Norm::L2, true), Err(Error::Data(_))));
    }

    #[test]
    fn error_against_reference_field() {
        let coarse = FeSpace::new(mesh(4), 1, 1).unwrap();
        let fine = FeSpace::new(mesh(9), 2, 1).unwrap();
        let f = |x: [f64; 2]| 1.0 + x[0] - 0.5 * x[1];
        let a = interpolate(&coarse, f).unwrap();
        let b = interpolate(&fine, f).unwrap();
        assert!(compute_error_against(&a, &b, Norm::H1).unwrap() < 1e-12);
        let c = interpolate(&fine, |x| f(x) + 1.0).unwrap();
        assert!((compute_error_against(&a, &c, Norm::L2).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn vector_interleaving() {
        let sp = FeSpace::new(mesh(2), 1, 2).unwrap();
        let f = interpolate_vector(&sp, |x| [x[0], 10.0 + x[1]]).unwrap();
        assert_eq!(f.coeffs[2 * 4], 0.5);
        assert_eq!(f.coeffs[2 * 4 + 1], 10.5);
        let s = f.eval(0, [1.0 / 3.0; 3]);
        assert!((s.grad[0][0] - 1.0).abs() < 1e-14 && (s.grad[1][1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn exports_write_files() {
        let dir = tempfile::tempdir().unwrap();
        let sp = FeSpace::new(mesh(2), 2, 2).unwrap();
        let f = interpolate_vector(&sp, |x| [x[0], x[1]]).unwrap();
        f.write_csv(&dir.path().join("u.csv")).unwrap();
        f.write_vtk(&dir.path().join("u.vtk"), "u").unwrap();
        let csv = std::fs::read_to_string(dir.path().join("u.csv")).unwrap();
        assert_eq!(csv.lines().count(), 10);
        assert!(csv.starts_with("x,y,v0,v1\n"));
    }
}
