//! Piecewise linear finite element assembly on tetrahedral and prismatic
//! meshes: stiffness matrices with variable conductivity, volume / line /
//! Neumann right-hand sides, and Dirichlet elimination.

use crate::geometry::{IntensityProfile, Point3, Segment};
use crate::mesh::{clip_segment, CellShape, ElementKind, Mesh};
use crate::quadrature::{gauss_legendre_01, tet_rule, triangle_rule, QuadratureSpec};
use crate::solver::CsrMatrix;
use crate::util::par_map;
use crate::{Error, Result};

/// Nodal coefficients of a piecewise linear function on a mesh.
#[derive(Clone, Debug)]
pub struct FeFunction {
    values: Vec<f64>,
}

impl FeFunction {
    pub fn from_values(mesh: &Mesh, values: Vec<f64>) -> Result<FeFunction> {
        if values.len() != mesh.n_nodes() {
            return Err(Error::DimensionMismatch {
                expected: mesh.n_nodes(),
                got: values.len(),
            });
        }
        Ok(FeFunction { values })
    }

    /// Nodal interpolant of `f`.
    pub fn interpolate(mesh: &Mesh, f: impl Fn(Point3) -> f64) -> FeFunction {
        FeFunction {
            values: mesh.nodes().iter().map(|&p| f(p)).collect(),
        }
    }

    /// Nodal interpolant of a fallible function (kernel evaluations).
    pub fn try_interpolate(
        mesh: &Mesh,
        f: impl Fn(Point3) -> Result<f64>,
    ) -> Result<FeFunction> {
        let values: Result<Vec<f64>> = mesh.nodes().iter().map(|&p| f(p)).collect();
        Ok(FeFunction { values: values? })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Point evaluation; `None` outside the mesh.
    pub fn eval(&self, mesh: &Mesh, x: Point3) -> Option<f64> {
        let c = mesh.locate(x)?;
        let shape = CellShape::new(mesh, c);
        let mut vals = [0.0; 6];
        let ns = shape.values(x, &mut vals);
        let nodes = mesh.cell(c);
        Some((0..ns).map(|i| vals[i] * self.values[nodes[i]]).sum())
    }

    /// Gradient at a point (constant per cell for tetrahedra); `None`
    /// outside the mesh.
    pub fn grad(&self, mesh: &Mesh, x: Point3) -> Option<Point3> {
        let c = mesh.locate(x)?;
        let shape = CellShape::new(mesh, c);
        let mut grads = [Point3::ZERO; 6];
        let ns = shape.grads(x, &mut grads);
        let nodes = mesh.cell(c);
        let mut acc = Point3::ZERO;
        for i in 0..ns {
            acc = acc + grads[i] * self.values[nodes[i]];
        }
        Some(acc)
    }
}

/// Volume quadrature rules in reference coordinates, fixed per element kind.
pub struct CellQuadrature {
    tet: Vec<(f64, f64, f64, f64)>,
    tri: Vec<(f64, f64, f64)>,
    gl: Vec<(f64, f64)>,
}

impl CellQuadrature {
    pub fn new(kind: ElementKind, quad: &QuadratureSpec) -> CellQuadrature {
        match kind {
            ElementKind::Tet4 => CellQuadrature {
                tet: tet_rule(quad.volume_degree),
                tri: Vec::new(),
                gl: Vec::new(),
            },
            ElementKind::Prism6 => CellQuadrature {
                tet: Vec::new(),
                // Degree 2 in-plane and 2 Gauss points in z make the unit
                // conductivity stiffness and linear loads exact.
                tri: triangle_rule(quad.volume_degree.max(2)),
                gl: gauss_legendre_01((quad.volume_degree + 2).div_ceil(2).max(2)),
            },
        }
    }

    /// Appends the physical quadrature points and weights of cell `c` to
    /// `out`; weights include the Jacobian and sum to the cell volume.
    pub fn points(&self, mesh: &Mesh, c: usize, out: &mut Vec<(Point3, f64)>) {
        let n = mesh.cell(c);
        match mesh.kind() {
            ElementKind::Tet4 => {
                let v0 = mesh.nodes()[n[0]];
                let e1 = mesh.nodes()[n[1]] - v0;
                let e2 = mesh.nodes()[n[2]] - v0;
                let e3 = mesh.nodes()[n[3]] - v0;
                let det = e1.cross(e2).dot(e3);
                for &(a, b, c_, w) in &self.tet {
                    out.push((v0 + e1 * a + e2 * b + e3 * c_, w * det));
                }
            }
            ElementKind::Prism6 => {
                let p0 = mesh.nodes()[n[0]];
                let p1 = mesh.nodes()[n[1]];
                let p2 = mesh.nodes()[n[2]];
                let z0 = p0.z;
                let dz = mesh.nodes()[n[3]].z - z0;
                let two_a =
                    (p1.x - p0.x) * (p2.y - p0.y) - (p2.x - p0.x) * (p1.y - p0.y);
                for &(u, v, wt) in &self.tri {
                    let x = p0.x + (p1.x - p0.x) * u + (p2.x - p0.x) * v;
                    let y = p0.y + (p1.y - p0.y) * u + (p2.y - p0.y) * v;
                    for &(zq, wz) in &self.gl {
                        out.push((
                            Point3::new(x, y, z0 + dz * zq),
                            wt * two_a * wz * dz,
                        ));
                    }
                }
            }
        }
    }
}

/// Zero CSR matrix with the node-adjacency sparsity pattern of the mesh.
pub fn sparsity_pattern(mesh: &Mesh) -> CsrMatrix {
    let n = mesh.n_nodes();
    let (offsets, cells) = mesh.node_cell_adjacency();
    let mut row_ptr = Vec::with_capacity(n + 1);
    row_ptr.push(0usize);
    let mut col_idx: Vec<u32> = Vec::with_capacity(16 * n);
    let mut buf: Vec<u32> = Vec::with_capacity(64);
    for v in 0..n {
        buf.clear();
        for &c in &cells[offsets[v]..offsets[v + 1]] {
            for &w in mesh.cell(c as usize) {
                buf.push(w as u32);
            }
        }
        buf.sort_unstable();
        buf.dedup();
        col_idx.extend_from_slice(&buf);
        row_ptr.push(col_idx.len());
    }
    CsrMatrix::from_pattern(row_ptr, col_idx)
}

/// Assembles the stiffness matrix for `-div(kappa grad u)` with piecewise
/// linear elements.  `kappa` must be positive at every quadrature point.
pub fn assemble_stiffness(
    mesh: &Mesh,
    kappa: &(dyn Fn(Point3) -> f64 + Sync),
    quad: &QuadratureSpec,
) -> Result<CsrMatrix> {
    let mut a = sparsity_pattern(mesh);
    let cq = CellQuadrature::new(mesh.kind(), quad);
    let mut qbuf: Vec<(Point3, f64)> = Vec::new();
    let mut grads = [Point3::ZERO; 6];
    let mut elem = [[0.0f64; 6]; 6];
    for c in 0..mesh.n_cells() {
        qbuf.clear();
        cq.points(mesh, c, &mut qbuf);
        let shape = CellShape::new(mesh, c);
        let ns = shape.n_shapes();
        for row in elem.iter_mut() {
            row.fill(0.0);
        }
        for &(x, w) in &qbuf {
            let k = kappa(x);
            if !(k > 0.0) || !k.is_finite() {
                return Err(Error::NonPositiveKappa(x.x, x.y, x.z));
            }
            shape.grads(x, &mut grads);
            for i in 0..ns {
                for j in 0..=i {
                    elem[i][j] += w * k * grads[i].dot(grads[j]);
                }
            }
        }
        let nodes = mesh.cell(c);
        for i in 0..ns {
            for j in 0..=i {
                a.add(nodes[i], nodes[j], elem[i][j]);
                if i != j {
                    a.add(nodes[j], nodes[i], elem[i][j]);
                }
            }
        }
    }
    Ok(a)
}

/// Assembles the load vector `b_i = int f phi_i dx`.  Evaluation failures
/// and non-finite values are reported as [`Error::NonFiniteInCell`] for the
/// lowest offending cell.
pub fn rhs_volume(
    mesh: &Mesh,
    f: &(dyn Fn(Point3) -> Result<f64> + Sync),
    quad: &QuadratureSpec,
    threads: usize,
) -> Result<Vec<f64>> {
    let cq = CellQuadrature::new(mesh.kind(), quad);
    let n_cells = mesh.n_cells();
    let mut b = vec![0.0f64; mesh.n_nodes()];
    // Blocks bound the transient per-cell buffer while keeping the result
    // independent of the thread count.
    const BLOCK: usize = 32768;
    let mut start = 0;
    while start < n_cells {
        let count = BLOCK.min(n_cells - start);
        let locals: Vec<Result<[f64; 6]>> = par_map(count, threads, |k| {
            let c = start + k;
            let shape = CellShape::new(mesh, c);
            let mut qbuf: Vec<(Point3, f64)> = Vec::with_capacity(16);
            cq.points(mesh, c, &mut qbuf);
            let mut vals = [0.0f64; 6];
            let mut acc = [0.0f64; 6];
            for &(x, w) in &qbuf {
                let fv = f(x).map_err(|_| Error::NonFiniteInCell { cell: c })?;
                if !fv.is_finite() {
                    return Err(Error::NonFiniteInCell { cell: c });
                }
                let ns = shape.values(x, &mut vals);
                for i in 0..ns {
                    acc[i] += w * fv * vals[i];
                }
            }
            Ok(acc)
        });
        for (k, res) in locals.into_iter().enumerate() {
            let acc = res?;
            for (i, &node) in mesh.cell(start + k).iter().enumerate() {
                b[node] += acc[i];
            }
        }
        start += count;
    }
    Ok(b)
}

/// Assembles the line source load `b_i = int_seg f(t) phi_i dt` by clipping
/// the segment into cells and applying Gauss quadrature per piece.
pub fn rhs_line(
    mesh: &Mesh,
    seg: &Segment,
    profile: &IntensityProfile,
    quad: &QuadratureSpec,
) -> Result<Vec<f64>> {
    let subs = clip_segment(mesh, seg)?;
    let gl = gauss_legendre_01(quad.line_points.max(1));
    let mut b = vec![0.0f64; mesh.n_nodes()];
    let mut vals = [0.0f64; 6];
    for sub in subs {
        let shape = CellShape::new(mesh, sub.cell);
        let nodes = mesh.cell(sub.cell);
        let len = sub.t1 - sub.t0;
        for &(q, w) in &gl {
            let t = sub.t0 + q * len;
            let x = seg.point_at(t);
            let fv = profile.eval(t);
            let ns = shape.values(x, &mut vals);
            for i in 0..ns {
                b[nodes[i]] += w * len * fv * vals[i];
            }
        }
    }
    Ok(b)
}

/// Walks the surface quadrature of every boundary facet whose tag is in
/// `tags`, calling `visit(adjacent cell, point, outward normal, weight)`
/// with weights that sum to the facet area.
fn for_each_facet_point(
    mesh: &Mesh,
    tags: &[i32],
    quad: &QuadratureSpec,
    visit: &mut dyn FnMut(usize, Point3, Point3, f64) -> Result<()>,
) -> Result<()> {
    let tri = triangle_rule(quad.facet_degree);
    let gl = gauss_legendre_01((quad.facet_degree + 2).div_ceil(2).max(2));
    for (fi, facet) in mesh.facets().iter().enumerate() {
        if !tags.contains(&facet.tag) {
            continue;
        }
        let normal = mesh.facet_normal(fi);
        let cell = mesh.facet_cell(fi);
        let p: Vec<Point3> = facet.nodes.iter().map(|&n| mesh.nodes()[n]).collect();
        match p.len() {
            3 => {
                let jac = (p[1] - p[0]).cross(p[2] - p[0]).norm();
                for &(u, v, w) in &tri {
                    let x = p[0] + (p[1] - p[0]) * u + (p[2] - p[0]) * v;
                    visit(cell, x, normal, w * jac)?;
                }
            }
            4 => {
                // Bilinear map of a planar quad.
                for &(u, wu) in &gl {
                    for &(v, wv) in &gl {
                        let x = p[0] * ((1.0 - u) * (1.0 - v))
                            + p[1] * (u * (1.0 - v))
                            + p[2] * (u * v)
                            + p[3] * ((1.0 - u) * v);
                        let du = (p[1] - p[0]) * (1.0 - v) + (p[2] - p[3]) * v;
                        let dv = (p[3] - p[0]) * (1.0 - u) + (p[2] - p[1]) * u;
                        visit(cell, x, normal, wu * wv * du.cross(dv).norm())?;
                    }
                }
            }
            k => return Err(Error::invalid(format!("facet with {k} nodes"))),
        }
    }
    Ok(())
}

/// Assembles the Neumann load `b_i = int_Gamma g(x, n) phi_i ds` over all
/// boundary facets whose tag is in `tags`; `n` is the outward unit normal.
pub fn rhs_neumann(
    mesh: &Mesh,
    tags: &[i32],
    g: &(dyn Fn(Point3, Point3) -> Result<f64> + Sync),
    quad: &QuadratureSpec,
) -> Result<Vec<f64>> {
    let mut b = vec![0.0f64; mesh.n_nodes()];
    let mut vals = [0.0f64; 6];
    for_each_facet_point(mesh, tags, quad, &mut |cell, x, normal, w| {
        let gv = g(x, normal)?;
        if !gv.is_finite() {
            return Err(Error::NonFiniteInCell { cell });
        }
        let shape = CellShape::new(mesh, cell);
        let nodes = mesh.cell(cell);
        let ns = shape.values(x, &mut vals);
        for i in 0..ns {
            b[nodes[i]] += w * gv * vals[i];
        }
        Ok(())
    })?;
    Ok(b)
}

/// Surface quadrature of `f(x, n, adjacent cell)` over the boundary facets
/// with the given tags; useful for flux and trace diagnostics.
pub fn surface_integral(
    mesh: &Mesh,
    tags: &[i32],
    f: &(dyn Fn(Point3, Point3, usize) -> Result<f64> + Sync),
    quad: &QuadratureSpec,
) -> Result<f64> {
    let mut total = 0.0;
    for_each_facet_point(mesh, tags, quad, &mut |cell, x, normal, w| {
        let v = f(x, normal, cell)?;
        if !v.is_finite() {
            return Err(Error::NonFiniteInCell { cell });
        }
        total += w * v;
        Ok(())
    })?;
    Ok(total)
}

/// A set of constrained nodes with their boundary values.
#[derive(Clone, Debug)]
pub struct DirichletBc {
    nodes: Vec<usize>,
    values: Vec<f64>,
}

impl DirichletBc {
    /// Pairs must reference distinct nodes.
    pub fn new(mut pairs: Vec<(usize, f64)>) -> Result<DirichletBc> {
        pairs.sort_unstable_by_key(|p| p.0);
        if pairs.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::invalid("duplicate constrained node"));
        }
        Ok(DirichletBc {
            nodes: pairs.iter().map(|p| p.0).collect(),
            values: pairs.iter().map(|p| p.1).collect(),
        })
    }

    /// Constrains every node on facets tagged with one of `tags` to
    /// `u_d(node position)`.
    pub fn from_function(
        mesh: &Mesh,
        tags: &[i32],
        u_d: &dyn Fn(Point3) -> Result<f64>,
    ) -> Result<DirichletBc> {
        let nodes = mesh.boundary_nodes(tags);
        let values: Result<Vec<f64>> =
            nodes.iter().map(|&n| u_d(mesh.nodes()[n])).collect();
        Ok(DirichletBc {
            nodes,
            values: values?,
        })
    }

    pub fn nodes(&self) -> &[usize] {
        &self.nodes
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// Symmetric elimination of Dirichlet constraints, in place: constrained
/// rows and columns are zeroed with a unit diagonal, and `b` receives the
/// moved column contributions, so the reduced system stays symmetric
/// positive definite and constrained entries solve to their boundary value
/// exactly.
pub fn apply_dirichlet(a: &mut CsrMatrix, b: &mut [f64], bc: &DirichletBc) {
    let n = a.n();
    assert_eq!(b.len(), n);
    let mut constrained = vec![false; n];
    let mut gval = vec![0.0f64; n];
    for (&node, &v) in bc.nodes.iter().zip(&bc.values) {
        constrained[node] = true;
        gval[node] = v;
    }
    for i in 0..n {
        if constrained[i] {
            let (cols, vals) = a.row_mut(i);
            for (c, v) in cols.iter().zip(vals.iter_mut()) {
                *v = if *c as usize == i { 1.0 } else { 0.0 };
            }
            b[i] = gval[i];
        } else {
            let (cols, vals) = a.row_mut(i);
            let mut shift = 0.0;
            for (c, v) in cols.iter().zip(vals.iter_mut()) {
                if constrained[*c as usize] {
                    shift += *v * gval[*c as usize];
                    *v = 0.0;
                }
            }
            b[i] -= shift;
        }
    }
}

/// The right-hand-side part of [`apply_dirichlet`] against the original
/// (unconstrained) matrix, for re-eliminating further load vectors after
/// the matrix has already been reduced once: keep a copy of the original
/// `a` and pass it here.
pub fn eliminate_rhs(a_orig: &CsrMatrix, b: &mut [f64], bc: &DirichletBc) {
    let n = a_orig.n();
    assert_eq!(b.len(), n);
    let mut constrained = vec![false; n];
    let mut gval = vec![0.0f64; n];
    for (&node, &v) in bc.nodes.iter().zip(&bc.values) {
        constrained[node] = true;
        gval[node] = v;
    }
    for i in 0..n {
        if constrained[i] {
            b[i] = gval[i];
        } else {
            let (cols, vals) = a_orig.row(i);
            let mut shift = 0.0;
            for (c, v) in cols.iter().zip(vals) {
                if constrained[*c as usize] {
                    shift += v * gval[*c as usize];
                }
            }
            b[i] -= shift;
        }
    }
}
