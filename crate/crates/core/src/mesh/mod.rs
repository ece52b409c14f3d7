//! Structured triangulations of axis-aligned rectangles.

pub mod quadrature;

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

pub use quadrature::{gauss_legendre, quadrature, QuadratureRule};

/// Axis-aligned rectangle `[x0, x1] × [y0, y1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl Rect {
    pub const UNIT: Rect = Rect {
        x0: 0.0,
        y0: 0.0,
        x1: 1.0,
        y1: 1.0,
    };

    pub fn width(&self) -> f64 {
        self.x1 - self.x0
    }

    pub fn height(&self) -> f64 {
        self.y1 - self.y0
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    fn scale(&self) -> f64 {
        self.width().abs().max(self.height().abs())
    }
}

/// Boundary segment tag: `G1` bottom, `G2` right, `G3` top, `G4` left.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Segment {
    G1,
    G2,
    G3,
    G4,
}

impl Segment {
    pub const ALL: [Segment; 4] = [Segment::G1, Segment::G2, Segment::G3, Segment::G4];

    /// 1-based segment number.
    pub fn number(self) -> usize {
        self as usize + 1
    }

    pub fn from_number(n: usize) -> Option<Segment> {
        Segment::ALL.get(n.wrapping_sub(1)).copied()
    }

    /// Outward unit normal.
    pub fn normal(self) -> [f64; 2] {
        match self {
            Segment::G1 => [0.0, -1.0],
            Segment::G2 => [1.0, 0.0],
            Segment::G3 => [0.0, 1.0],
            Segment::G4 => [-1.0, 0.0],
        }
    }

    /// Coordinate that varies along the segment (x on G1/G3, y on G2/G4).
    pub fn tangential_coordinate(self, p: [f64; 2]) -> f64 {
        match self {
            Segment::G1 | Segment::G3 => p[0],
            Segment::G2 | Segment::G4 => p[1],
        }
    }

    pub fn length(self, domain: &Rect) -> f64 {
        match self {
            Segment::G1 | Segment::G3 => domain.width(),
            Segment::G2 | Segment::G4 => domain.height(),
        }
    }
}

impl std::fmt::Display for Segment {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "G{}", self.number())
    }
}

/// A boundary edge with its owning triangle.
///
/// `local_edge` follows the convention edge 0 = (v0, v1), 1 = (v1, v2),
/// 2 = (v2, v0) of the owner's vertex list; `vertices` has the same
/// orientation (counterclockwise around the domain).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryEdge {
    pub vertices: [usize; 2],
    pub segment: Segment,
    pub triangle: usize,
    pub local_edge: usize,
}

/// Conforming triangulation with tagged boundary.
#[derive(Debug, Clone)]
pub struct Mesh {
    pub domain: Rect,
    pub vertices: Vec<[f64; 2]>,
    pub triangles: Vec<[usize; 3]>,
    pub boundary_edges: Vec<BoundaryEdge>,
    pub h: f64,
}

pub const LOCAL_EDGES: [[usize; 2]; 3] = [[0, 1], [1, 2], [2, 0]];

impl Mesh {
    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn triangle_coords(&self, t: usize) -> [[f64; 2]; 3] {
        let [a, b, c] = self.triangles[t];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    /// Signed area (positive for counterclockwise triangles).
    pub fn signed_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangle_coords(t);
        0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
    }

    /// Longest edge over all triangles.
    pub fn max_diameter(&self) -> f64 {
        (0..self.num_triangles())
            .map(|t| {
                let p = self.triangle_coords(t);
                LOCAL_EDGES
                    .iter()
                    .map(|&[i, j]| dist(p[i], p[j]))
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max)
    }

    /// Sorted list of unique edges as `(min, max)` vertex pairs.
    pub fn edges(&self) -> Vec<[usize; 2]> {
        let mut edges: Vec<[usize; 2]> = self
            .triangles
            .iter()
            .flat_map(|tri| {
                LOCAL_EDGES.iter().map(move |&[i, j]| {
                    let (a, b) = (tri[i], tri[j]);
                    [a.min(b), a.max(b)]
                })
            })
            .collect();
        edges.sort_unstable();
        edges.dedup();
        edges
    }

    /// Boundary segments touching vertex `v`, ascending.
    pub fn vertex_segments(&self, v: usize) -> Vec<Segment> {
        let mut segs: Vec<Segment> = self
            .boundary_edges
            .iter()
            .filter(|e| e.vertices.contains(&v))
            .map(|e| e.segment)
            .collect();
        segs.sort();
        segs.dedup();
        segs
    }

    /// Tag of a boundary vertex; corners go to the lower-numbered segment.
    pub fn vertex_tag(&self, v: usize) -> Option<Segment> {
        self.vertex_segments(v).first().copied()
    }

    /// Plain-text dump: `v x y`, `t a b c`, `e a b tag` records.
    pub fn dump(&self) -> String {
        let mut s = String::new();
        for (i, v) in self.vertices.iter().enumerate() {
            let _ = writeln!(s, "v {i} {:.16e} {:.16e}", v[0], v[1]);
        }
        for (i, t) in self.triangles.iter().enumerate() {
            let _ = writeln!(s, "t {i} {} {} {}", t[0], t[1], t[2]);
        }
        for e in &self.boundary_edges {
            let _ = writeln!(s, "e {} {} {}", e.vertices[0], e.vertices[1], e.segment);
        }
        s
    }

    pub fn write_dump(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.dump()).map_err(|e| Error::io(path, e))
    }
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// `nx × ny` cells, each split along its lower-left to upper-right diagonal.
pub fn build_structured(nx: usize, ny: usize, domain: Rect) -> Result<Mesh> {
    let mut errs = Vec::new();
    if nx == 0 || ny == 0 {
        errs.push(format!("mesh subdivisions must be positive (got nx={nx}, ny={ny})"));
    }
    if !(domain.width() > 0.0 && domain.height() > 0.0) {
        errs.push(format!("domain must have positive width and height (got {domain:?})"));
    }
    if !errs.is_empty() {
        return Err(Error::Config(errs));
    }
    let hx = domain.width() / nx as f64;
    let hy = domain.height() / ny as f64;
    let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        // Pin the far edge exactly so boundary tagging is exact.
        let y = if j == ny { domain.y1 } else { domain.y0 + j as f64 * hy };
        for i in 0..=nx {
            let x = if i == nx { domain.x1 } else { domain.x0 + i as f64 * hx };
            vertices.push([x, y]);
        }
    }
    let id = |i: usize, j: usize| j * (nx + 1) + i;
    let mut triangles = Vec::with_capacity(2 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let (v00, v10, v01, v11) = (id(i, j), id(i + 1, j), id(i, j + 1), id(i + 1, j + 1));
            triangles.push([v00, v10, v11]);
            triangles.push([v00, v11, v01]);
        }
    }
    let boundary_edges = find_boundary_edges(&vertices, &triangles, &domain, |_, _| None)?;
    Ok(Mesh {
        domain,
        vertices,
        triangles,
        boundary_edges,
        h: hx.hypot(hy),
    })
}

/// Splits every triangle into four by joining edge midpoints.
pub fn refine_uniform(mesh: &Mesh) -> Result<Mesh> {
    let edges = mesh.edges();
    let nv = mesh.num_vertices();
    let mut vertices = mesh.vertices.clone();
    let mut midpoint: HashMap<[usize; 2], usize> = HashMap::with_capacity(edges.len());
    for (k, e) in edges.iter().enumerate() {
        let (a, b) = (mesh.vertices[e[0]], mesh.vertices[e[1]]);
        vertices.push([0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])]);
        midpoint.insert(*e, nv + k);
    }
    let mid = |a: usize, b: usize| midpoint[&[a.min(b), a.max(b)]];
    let mut triangles = Vec::with_capacity(4 * mesh.num_triangles());
    for &[a, b, c] in &mesh.triangles {
        let (mab, mbc, mca) = (mid(a, b), mid(b, c), mid(c, a));
        triangles.push([a, mab, mca]);
        triangles.push([mab, b, mbc]);
        triangles.push([mca, mbc, c]);
        triangles.push([mab, mbc, mca]);
    }
    // Children inherit the parent's tag.
    let mut parent_tag: HashMap<[usize; 2], Segment> = HashMap::new();
    for e in &mesh.boundary_edges {
        let [a, b] = e.vertices;
        let m = mid(a, b);
        parent_tag.insert([a.min(m), a.max(m)], e.segment);
        parent_tag.insert([b.min(m), b.max(m)], e.segment);
    }
    let boundary_edges = find_boundary_edges(&vertices, &triangles, &mesh.domain, |a, b| {
        parent_tag.get(&[a.min(b), a.max(b)]).copied()
    })?;
    Ok(Mesh {
        domain: mesh.domain,
        vertices,
        triangles,
        boundary_edges,
        h: mesh.h / 2.0,
    })
}

fn find_boundary_edges(
    vertices: &[[f64; 2]],
    triangles: &[[usize; 3]],
    domain: &Rect,
    inherited: impl Fn(usize, usize) -> Option<Segment>,
) -> Result<Vec<BoundaryEdge>> {
    let mut count: BTreeMap<[usize; 2], u32> = BTreeMap::new();
    for tri in triangles {
        for &[i, j] in &LOCAL_EDGES {
            let (a, b) = (tri[i], tri[j]);
            *count.entry([a.min(b), a.max(b)]).or_default() += 1;
        }
    }
    let tol = 1e-12 * domain.scale();
    let mut out = Vec::new();
    for (t, tri) in triangles.iter().enumerate() {
        for (le, &[i, j]) in LOCAL_EDGES.iter().enumerate() {
            let (a, b) = (tri[i], tri[j]);
            if count[&[a.min(b), a.max(b)]] != 1 {
                continue;
            }
            let segment = match inherited(a, b) {
                Some(s) => s,
                None => geometric_tag(vertices[a], vertices[b], domain, tol).ok_or_else(|| {
                    Error::Data(format!("boundary edge ({a}, {b}) does not lie on the domain boundary"))
                })?,
            };
            out.push(BoundaryEdge {
                vertices: [a, b],
                segment,
                triangle: t,
                local_edge: le,
            });
        }
    }
    Ok(out)
}

fn geometric_tag(p: [f64; 2], q: [f64; 2], d: &Rect, tol: f64) -> Option<Segment> {
    let on = |u: f64, v: f64, c: f64| (u - c).abs() <= tol && (v - c).abs() <= tol;
    if on(p[1], q[1], d.y0) {
        Some(Segment::G1)
    } else if on(p[0], q[0], d.x1) {
        Some(Segment::G2)
    } else if on(p[1], q[1], d.y1) {
        Some(Segment::G3)
    } else if on(p[0], q[0], d.x0) {
        Some(Segment::G4)
    } else {
        None
    }
}

/// Bucket-grid point location for evaluating fields at arbitrary points.
#[derive(Debug, Clone)]
pub struct PointLocator {
    domain: Rect,
    nbx: usize,
    nby: usize,
    buckets: Vec<Vec<usize>>,
}

impl PointLocator {
    pub fn new(mesh: &Mesh) -> Self {
        let side = (mesh.num_triangles() as f64 / 2.0).sqrt().ceil().max(1.0) as usize;
        let (nbx, nby) = (side, side);
        let d = mesh.domain;
        let mut buckets = vec![Vec::new(); nbx * nby];
        let bx = |x: f64| (((x - d.x0) / d.width() * nbx as f64).floor().max(0.0) as usize).min(nbx - 1);
        let by = |y: f64| (((y - d.y0) / d.height() * nby as f64).floor().max(0.0) as usize).min(nby - 1);
        let pad = 1e-10 * d.scale();
        for t in 0..mesh.num_triangles() {
            let p = mesh.triangle_coords(t);
            let xmin = p.iter().map(|v| v[0]).fold(f64::INFINITY, f64::min) - pad;
            let xmax = p.iter().map(|v| v[0]).fold(f64::NEG_INFINITY, f64::max) + pad;
            let ymin = p.iter().map(|v| v[1]).fold(f64::INFINITY, f64::min) - pad;
            let ymax = p.iter().map(|v| v[1]).fold(f64::NEG_INFINITY, f64::max) + pad;
            for j in by(ymin)..=by(ymax) {
                for i in bx(xmin)..=bx(xmax) {
                    buckets[j * nbx + i].push(t);
                }
            }
        }
        PointLocator {
            domain: d,
            nbx,
            nby,
            buckets,
        }
    }

    /// Triangle containing `p` and the barycentric coordinates of `p` in it.
    pub fn locate(&self, mesh: &Mesh, p: [f64; 2]) -> Option<(usize, [f64; 3])> {
        let d = &self.domain;
        let fx = (p[0] - d.x0) / d.width();
        let fy = (p[1] - d.y0) / d.height();
        if !(-1e-10..=1.0 + 1e-10).contains(&fx) || !(-1e-10..=1.0 + 1e-10).contains(&fy) {
            return None;
        }
        let i = ((fx * self.nbx as f64).floor().max(0.0) as usize).min(self.nbx - 1);
        let j = ((fy * self.nby as f64).floor().max(0.0) as usize).min(self.nby - 1);
        let mut best: Option<(usize, [f64; 3], f64)> = None;
        for &t in &self.buckets[j * self.nbx + i] {
            let l = barycentric(mesh.triangle_coords(t), p);
            let worst = l.iter().copied().fold(f64::INFINITY, f64::min);
            if worst >= 0.0 {
                return Some((t, l));
            }
            if best.as_ref().is_none_or(|b| worst > b.2) {
                best = Some((t, l, worst));
            }
        }
        // Points on an edge may come out slightly negative in every candidate.
        best.filter(|b| b.2 > -1e-10).map(|(t, l, _)| {
            let c = l.map(|v| v.max(0.0));
            let s: f64 = c.iter().sum();
            (t, c.map(|v| v / s))
        })
    }
}

/// Barycentric coordinates of `p` with respect to triangle `v`.
pub fn barycentric(v: [[f64; 2]; 3], p: [f64; 2]) -> [f64; 3] {
    let det = (v[1][0] - v[0][0]) * (v[2][1] - v[0][1]) - (v[2][0] - v[0][0]) * (v[1][1] - v[0][1]);
    let l1 = ((p[0] - v[0][0]) * (v[2][1] - v[0][1]) - (v[2][0] - v[0][0]) * (p[1] - v[0][1])) / det;
    let l2 = ((v[1][0] - v[0][0]) * (p[1] - v[0][1]) - (p[0] - v[0][0]) * (v[1][1] - v[0][1])) / det;
    [1.0 - l1 - l2, l1, l2]
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    fn unit(nx: usize, ny: usize) -> Mesh {
        build_structured(nx, ny, Rect::UNIT).unwrap()
    }

    fn key(p: [f64; 2]) -> (i64, i64) {
        ((p[0] * 1e9).round() as i64, (p[1] * 1e9).round() as i64)
    }

    #[test]
    fn smallest_mesh() {
        let m = unit(1, 1);
        assert_eq!(m.num_vertices(), 4);
        assert_eq!(m.num_triangles(), 2);
        assert_eq!(m.boundary_edges.len(), 4);
        assert!((m.h - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn counts_for_four_by_four() {
        let m = unit(4, 4);
        assert_eq!(m.num_vertices(), 25);
        assert_eq!(m.num_triangles(), 32);
        assert_eq!(m.boundary_edges.len(), 16);
    }

    #[test]
    fn area_partition() {
        let m = unit(2, 3);
        let area: f64 = (0..m.num_triangles()).map(|t| m.signed_area(t)).sum();
        assert!((area - 1.0).abs() < 1e-12);
        assert!((0..m.num_triangles()).all(|t| m.signed_area(t) > 0.0));
    }

    #[test]
    fn zero_subdivisions_rejected() {
        assert!(matches!(build_structured(0, 2, Rect::UNIT), Err(Error::Config(_))));
        let flat = Rect { x0: 0.0, y0: 0.0, x1: 1.0, y1: 0.0 };
        assert!(matches!(build_structured(1, 1, flat), Err(Error::Config(_))));
    }

    #[test]
    fn boundary_lengths_per_tag() {
        let d = Rect { x0: -1.0, y0: 0.5, x1: 2.0, y1: 1.5 };
        let m = build_structured(6, 5, d).unwrap();
        for s in Segment::ALL {
            let len: f64 = m
                .boundary_edges
                .iter()
                .filter(|e| e.segment == s)
                .map(|e| dist(m.vertices[e.vertices[0]], m.vertices[e.vertices[1]]))
                .sum();
            assert!((len - s.length(&d)).abs() < 1e-12, "{s}");
        }
    }

    #[test]
    fn boundary_edges_match_owner() {
        let m = refine_uniform(&unit(3, 2)).unwrap();
        for e in &m.boundary_edges {
            let tri = m.triangles[e.triangle];
            let [i, j] = LOCAL_EDGES[e.local_edge];
            assert_eq!([tri[i], tri[j]], e.vertices);
        }
    }

    #[test]
    fn corner_tags_take_lower_segment() {
        let m = unit(2, 2);
        assert_eq!(m.vertex_tag(0), Some(Segment::G1));
        assert_eq!(m.vertex_tag(2), Some(Segment::G1));
        assert_eq!(m.vertex_tag(8), Some(Segment::G2));
        assert_eq!(m.vertex_tag(6), Some(Segment::G3));
        assert_eq!(m.vertex_tag(4), None);
    }

    #[test]
    fn refinement_counts_and_h() {
        let m = unit(1, 1);
        let r = refine_uniform(&m).unwrap();
        assert_eq!(r.num_triangles(), 8);
        assert_eq!(r.num_vertices(), 9);
        assert_eq!(r.h, m.h / 2.0);
        assert!((r.max_diameter() - r.h).abs() < 1e-15);
        assert!((0..r.num_triangles()).all(|t| r.signed_area(t) > 0.0));
    }

    #[test]
    fn double_refinement_matches_structured() {
        let (nx, ny) = (2, 3);
        let r = refine_uniform(&refine_uniform(&unit(nx, ny)).unwrap()).unwrap();
        let s = unit(4 * nx, 4 * ny);
        let a: BTreeSet<_> = r.vertices.iter().map(|&p| key(p)).collect();
        let b: BTreeSet<_> = s.vertices.iter().map(|&p| key(p)).collect();
        assert_eq!(a, b);
        assert_eq!(r.num_triangles(), s.num_triangles());
        assert_eq!(r.boundary_edges.len(), s.boundary_edges.len());
    }

    #[test]
    fn refinement_keeps_boundary_vertices() {
        let m = unit(2, 2);
        let r = refine_uniform(&m).unwrap();
        let bv = |m: &Mesh| -> BTreeSet<(i64, i64)> {
            m.boundary_edges
                .iter()
                .flat_map(|e| e.vertices)
                .map(|v| key(m.vertices[v]))
                .collect()
        };
        assert!(bv(&m).is_subset(&bv(&r)));
    }

    #[test]
    fn quadrature_areas_sum_to_domain() {
        let m = unit(5, 7);
        let q = quadrature(3).unwrap();
        let total: f64 = (0..m.num_triangles())
            .map(|t| 2.0 * m.signed_area(t) * q.weights.iter().sum::<f64>())
            .sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn locator_finds_points() {
        let m = unit(7, 5);
        let loc = PointLocator::new(&m);
        for &p in &[[0.0, 0.0], [1.0, 1.0], [0.31, 0.77], [0.5, 0.2], [1.0, 0.4]] {
            let (t, l) = loc.locate(&m, p).unwrap();
            let v = m.triangle_coords(t);
            let x = l[0] * v[0][0] + l[1] * v[1][0] + l[2] * v[2][0];
            let y = l[0] * v[0][1] + l[1] * v[1][1] + l[2] * v[2][1];
            assert!((x - p[0]).abs() < 1e-12 && (y - p[1]).abs() < 1e-12);
        }
        assert!(loc.locate(&m, [1.5, 0.5]).is_none());
    }

    #[test]
    fn dump_has_one_record_per_entity() {
        let m = unit(2, 1);
        let d = m.dump();
        assert_eq!(d.lines().count(), m.num_vertices() + m.num_triangles() + m.boundary_edges.len());
        assert!(d.lines().any(|l| l == "t 0 0 1 4"));
    }
}
