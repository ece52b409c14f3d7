//! Essential boundary conditions.

use std::collections::BTreeMap;

use super::sparse::CsrMatrix;
use crate::error::{Error, Result};
use crate::mesh::Segment;
use crate::model::{DerivedCoefficients, Problem};
use crate::spaces::{FeSpace, FieldVector};

/// Matrix, right-hand side and block offsets of a linear system.
#[derive(Debug, Clone)]
pub struct SparseSystem {
    pub matrix: CsrMatrix,
    pub rhs: Vec<f64>,
    /// `(name, offset, len)` per field block.
    pub blocks: Vec<(&'static str, usize, usize)>,
}

impl SparseSystem {
    pub fn block(&self, name: &str) -> Option<(usize, usize)> {
        self.blocks.iter().find(|b| b.0 == name).map(|b| (b.1, b.2))
    }
}

/// Prescribed values per global DOF.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DirichletSet {
    values: BTreeMap<usize, f64>,
}

impl DirichletSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Inserts a constraint; re-inserting the same DOF with a different value
    /// is an error.
    pub fn insert(&mut self, dof: usize, value: f64) -> Result<()> {
        if !value.is_finite() {
            return Err(Error::Data(format!("non-finite Dirichlet value for DOF {dof}")));
        }
        match self.values.get(&dof) {
            Some(&v) if v != value => Err(Error::Data(format!(
                "conflicting Dirichlet values {v} and {value} for DOF {dof}"
            ))),
            _ => {
                self.values.insert(dof, value);
                Ok(())
            }
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.values.iter().map(|(&k, &v)| (k, v))
    }

    pub fn get(&self, dof: usize) -> Option<f64> {
        self.values.get(&dof).copied()
    }

    /// Shifts every DOF by `offset` (for placing a field block in a larger system).
    pub fn shifted(&self, offset: usize) -> Self {
        DirichletSet {
            values: self.values.iter().map(|(&k, &v)| (k + offset, v)).collect(),
        }
    }

    pub fn extend(&mut self, other: &DirichletSet) -> Result<()> {
        for (k, v) in other.iter() {
            self.insert(k, v)?;
        }
        Ok(())
    }
}

/// Symmetric elimination: constrained rows and columns are zeroed (the
/// entries stay in the pattern), the diagonal is set to one and known values
/// move to the right-hand side.
pub fn apply_dirichlet(matrix: &mut CsrMatrix, rhs: &mut [f64], set: &DirichletSet) -> Result<()> {
    if set.is_empty() {
        return Ok(());
    }
    let n = matrix.nrows;
    if matrix.ncols != n || rhs.len() != n {
        return Err(Error::Contract("Dirichlet elimination needs a square system".into()));
    }
    let mut value = vec![None; n];
    for (dof, v) in set.iter() {
        if dof >= n {
            return Err(Error::Contract(format!("Dirichlet DOF {dof} out of range {n}")));
        }
        value[dof] = Some(v);
    }
    let mut missing_diag = Vec::new();
    for i in 0..n {
        let (lo, hi) = (matrix.indptr[i], matrix.indptr[i + 1]);
        if value[i].is_some() {
            let mut has_diag = false;
            for k in lo..hi {
                if matrix.indices[k] == i {
                    matrix.data[k] = 1.0;
                    has_diag = true;
                } else {
                    matrix.data[k] = 0.0;
                }
            }
            if !has_diag {
                missing_diag.push(i);
            }
            continue;
        }
        for k in lo..hi {
            if let Some(g) = value[matrix.indices[k]] {
                rhs[i] -= matrix.data[k] * g;
                matrix.data[k] = 0.0;
            }
        }
    }
    if !missing_diag.is_empty() {
        let mut t = matrix.to_triplets();
        t.extend(missing_diag.iter().map(|&i| (i, i, 1.0)));
        *matrix = CsrMatrix::from_triplets(n, n, &t);
    }
    for (dof, v) in set.iter() {
        rhs[dof] = v;
    }
    Ok(())
}

/// Replaces whole rows: row `i` becomes `Σ c_j x_j = r`. The new entries must
/// already be in the pattern or the matrix is rebuilt.
pub fn replace_rows(matrix: &mut CsrMatrix, rhs: &mut [f64], rows: &[(usize, Vec<(usize, f64)>, f64)]) {
    let mut rebuild = false;
    for (i, entries, r) in rows {
        let (lo, hi) = (matrix.indptr[*i], matrix.indptr[*i + 1]);
        for k in lo..hi {
            matrix.data[k] = 0.0;
        }
        for &(j, c) in entries {
            match matrix.indices[lo..hi].binary_search(&j) {
                Ok(p) => matrix.data[lo + p] += c,
                Err(_) => rebuild = true,
            }
        }
        rhs[*i] = *r;
    }
    if rebuild {
        let mut t: Vec<(usize, usize, f64)> = Vec::new();
        let replaced: std::collections::BTreeSet<usize> = rows.iter().map(|r| r.0).collect();
        for (i, j, v) in matrix.to_triplets() {
            if !replaced.contains(&i) {
                t.push((i, j, v));
            }
        }
        for (i, entries, _) in rows {
            t.extend(entries.iter().map(|&(j, c)| (*i, j, c)));
        }
        *matrix = CsrMatrix::from_triplets(matrix.nrows, matrix.ncols, &t);
    }
}

/// Boundary nodes of `space` lying on a segment accepted by `has_data`, each
/// with the lowest-numbered such segment (which supplies the value).
pub fn dirichlet_nodes(space: &FeSpace, has_data: impl Fn(Segment) -> bool) -> Vec<(usize, Segment)> {
    space
        .boundary_nodes()
        .into_iter()
        .filter_map(|(n, segs)| segs.into_iter().find(|&s| has_data(s)).map(|s| (n, s)))
        .collect()
}

/// Dirichlet `p`/`T` data at the boundary nodes of a scalar space.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PtBoundaryData {
    /// `(node, p_D, T_D)` where both are prescribed.
    pub both: Vec<(usize, f64, f64)>,
    pub p_only: Vec<(usize, f64)>,
    pub t_only: Vec<(usize, f64)>,
}

pub fn pt_boundary_data(space: &FeSpace, problem: &dyn Problem, t: f64) -> PtBoundaryData {
    let layout = problem.layout();
    let p_nodes: BTreeMap<usize, Segment> = dirichlet_nodes(space, |s| layout.get(s).p_dirichlet)
        .into_iter()
        .collect();
    let t_nodes: BTreeMap<usize, Segment> = dirichlet_nodes(space, |s| layout.get(s).t_dirichlet)
        .into_iter()
        .collect();
    let mut out = PtBoundaryData::default();
    for (&n, &sp) in &p_nodes {
        let x = space.node_coords[n];
        let pd = problem.pressure(x, t, sp);
        match t_nodes.get(&n) {
            Some(&st) => out.both.push((n, pd, problem.temperature(x, t, st))),
            None => out.p_only.push((n, pd)),
        }
    }
    for (&n, &st) in &t_nodes {
        if !p_nodes.contains_key(&n) {
            out.t_only.push((n, problem.temperature(space.node_coords[n], t, st)));
        }
    }
    out
}

/// Converts nodal `p`/`T` data into `(ϖ, ς)` constraints given `τ` at the
/// same nodes, by solving
/// `γ5 ϖ + γ2 ς = p_D − γ4 τ`, `γ2 ϖ + γ3 ς = T_D − γ1 τ`.
pub fn translate_pt_dirichlet(
    tau: &FieldVector,
    nodes: &[(usize, f64, f64)],
    coeffs: &DerivedCoefficients,
) -> Result<(DirichletSet, DirichletSet)> {
    let (g1, g2, g3, g4, g5) = (coeffs.gamma1, coeffs.gamma2, coeffs.gamma3, coeffs.gamma4, coeffs.gamma5);
    let det = g5 * g3 - g2 * g2;
    let scale = (g5 * g3).abs().max(g2 * g2);
    if !(det.abs() >= 1e-14 * scale) || scale == 0.0 {
        return Err(Error::config(format!(
            "boundary translation is singular: gamma5*gamma3 - gamma2^2 = {det:e}"
        )));
    }
    let mut varpi = DirichletSet::new();
    let mut varsigma = DirichletSet::new();
    for &(n, pd, td) in nodes {
        let t = tau.coeffs[n];
        let r1 = pd - g4 * t;
        let r2 = td - g1 * t;
        varpi.insert(n, (g3 * r1 - g2 * r2) / det)?;
        varsigma.insert(n, (g5 * r2 - g2 * r1) / det)?;
    }
    Ok((varpi, varsigma))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::{assemble_stiffness, CsrMatrix};
    use crate::mesh::{build_structured, Rect};
    use crate::model::PhysicalParams;
    use crate::solver::linear::solve_csr;
    use crate::spaces::interpolate;
    use std::sync::Arc;

    #[test]
    fn empty_set_leaves_system() {
        let mut m = CsrMatrix::from_triplets(2, 2, &[(0, 0, 2.0), (0, 1, 1.0), (1, 0, 1.0), (1, 1, 2.0)]);
        let before = m.clone();
        let mut b = vec![1.0, 2.0];
        apply_dirichlet(&mut m, &mut b, &DirichletSet::new()).unwrap();
        assert_eq!(m, before);
        assert_eq!(b, vec![1.0, 2.0]);
    }

    #[test]
    fn all_constrained_to_zero() {
        let mut m = CsrMatrix::from_triplets(2, 2, &[(0, 0, 2.0), (0, 1, 1.0), (1, 0, 1.0), (1, 1, 2.0)]);
        let mut b = vec![1.0, 2.0];
        let mut set = DirichletSet::new();
        set.insert(0, 0.0).unwrap();
        set.insert(1, 0.0).unwrap();
        apply_dirichlet(&mut m, &mut b, &set).unwrap();
        assert_eq!(solve_csr(&m, &b, 1e-12).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn conflicting_values_rejected() {
        let mut set = DirichletSet::new();
        set.insert(3, 1.0).unwrap();
        set.insert(3, 1.0).unwrap();
        assert!(matches!(set.insert(3, 2.0), Err(Error::Data(_))));
    }

    #[test]
    fn elimination_keeps_symmetry_and_free_block() {
        let mesh = Arc::new(build_structured(3, 3, Rect::UNIT).unwrap());
        let sp = FeSpace::new(mesh, 1, 1).unwrap();
        let k0 = assemble_stiffness(&sp);
        let mut k = k0.clone();
        let mut b = vec![0.0; sp.dof_count()];
        let mut set = DirichletSet::new();
        for (n, _) in dirichlet_nodes(&sp, |s| s == Segment::G1) {
            set.insert(n, 1.0).unwrap();
        }
        apply_dirichlet(&mut k, &mut b, &set).unwrap();
        assert!(k.same_pattern(&k0));
        assert!(k.max_abs_diff(&k.transpose()) < 1e-15);
        for i in 0..sp.dof_count() {
            for j in 0..sp.dof_count() {
                if set.get(i).is_none() && set.get(j).is_none() {
                    assert_eq!(k.get(i, j), k0.get(i, j));
                }
            }
        }
    }

    #[test]
    fn poisson_patch_test() {
        let mesh = Arc::new(build_structured(5, 4, Rect::UNIT).unwrap());
        for deg in 1..=2 {
            let sp = FeSpace::new(mesh.clone(), deg, 1).unwrap();
            let exact = |x: [f64; 2]| 0.5 + 2.0 * x[0] - x[1];
            let mut k = assemble_stiffness(&sp);
            let mut b = vec![0.0; sp.dof_count()];
            let mut set = DirichletSet::new();
            for (n, _) in dirichlet_nodes(&sp, |_| true) {
                set.insert(n, exact(sp.node_coords[n])).unwrap();
            }
            apply_dirichlet(&mut k, &mut b, &set).unwrap();
            let x = solve_csr(&k, &b, 1e-12).unwrap();
            let ex = interpolate(&sp, exact).unwrap();
            for (a, e) in x.iter().zip(&ex.coeffs) {
                assert!((a - e).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn corner_nodes_take_lowest_segment() {
        let mesh = Arc::new(build_structured(2, 2, Rect::UNIT).unwrap());
        let sp = FeSpace::new(mesh, 2, 1).unwrap();
        let nodes = dirichlet_nodes(&sp, |s| s != Segment::G1);
        let corner = nodes.iter().find(|(n, _)| *n == 2).unwrap();
        assert_eq!(corner.1, Segment::G2);
        assert!(!nodes.iter().any(|(n, _)| *n == 1));
        // 16 boundary nodes on a 2x2 P2 mesh, minus the 3 interior ones of G1.
        assert_eq!(nodes.len(), 13);
    }

    #[test]
    fn zero_data_translates_to_zero() {
        let mesh = Arc::new(build_structured(1, 1, Rect::UNIT).unwrap());
        let sp = FeSpace::new(mesh, 1, 1).unwrap();
        let c = DerivedCoefficients::derive(&PhysicalParams::test1()).unwrap();
        let tau = FieldVector::zeros(&sp);
        let (w, s) = translate_pt_dirichlet(&tau, &[(0, 0.0, 0.0)], &c).unwrap();
        assert_eq!(w.get(0), Some(0.0));
        assert_eq!(s.get(0), Some(0.0));
    }

    #[test]
    fn row_replacement() {
        let mut m = CsrMatrix::from_triplets(2, 2, &[(0, 0, 2.0), (1, 0, 1.0), (1, 1, 2.0)]);
        let mut b = vec![1.0, 2.0];
        replace_rows(&mut m, &mut b, &[(0, vec![(0, 1.0), (1, 1.0)], 3.0)]);
        assert_eq!(m.get(0, 1), 1.0);
        assert_eq!(b[0], 3.0);
    }
}
