//! Structured box meshes of tetrahedra or right prisms, an ASCII exchange
//! format, boundary facet bookkeeping, and segment clipping.
//!
//! Box meshes are lattices with `n_perp` subdivisions along x and y and
//! `n_par` along z.  Each lattice cube is split into six tetrahedra sharing
//! the cube's main diagonal (the Kuhn split), or each lattice square into two
//! triangles with the diagonal running from the low corner to the high
//! corner, extruded into prisms layer by layer.  Boundary facets carry the
//! face tags 0..5 for -x, +x, -y, +y, -z, +z.

mod clip;

pub use clip::{clip_segment, CellIndex, SubSegment};

use std::fmt::Write as _;
use std::path::Path;
use std::sync::OnceLock;

use crate::geometry::Point3;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ElementKind {
    Tet4,
    Prism6,
}

impl ElementKind {
    pub fn nodes_per_cell(self) -> usize {
        match self {
            ElementKind::Tet4 => 4,
            ElementKind::Prism6 => 6,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ElementKind::Tet4 => "tet",
            ElementKind::Prism6 => "prism",
        }
    }
}

/// Axis-aligned box.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoxBounds {
    pub min: Point3,
    pub max: Point3,
}

impl BoxBounds {
    pub fn new(min: Point3, max: Point3) -> BoxBounds {
        BoxBounds { min, max }
    }

    pub fn unit() -> BoxBounds {
        BoxBounds::new(Point3::ZERO, Point3::new(1.0, 1.0, 1.0))
    }

    pub fn extent(&self) -> Point3 {
        self.max - self.min
    }

    pub fn diameter(&self) -> f64 {
        self.extent().norm()
    }

    pub fn contains(&self, x: Point3, tol: f64) -> bool {
        x.x >= self.min.x - tol
            && x.x <= self.max.x + tol
            && x.y >= self.min.y - tol
            && x.y <= self.max.y + tol
            && x.z >= self.min.z - tol
            && x.z <= self.max.z + tol
    }
}

/// Structured mesh resolution: `n_perp` subdivisions along each horizontal
/// axis, `n_par` along the vertical axis.
#[derive(Clone, Copy, Debug)]
pub struct MeshParams {
    pub bounds: BoxBounds,
    pub n_perp: usize,
    pub n_par: usize,
}

impl MeshParams {
    pub fn unit(n_perp: usize, n_par: usize) -> MeshParams {
        MeshParams {
            bounds: BoxBounds::unit(),
            n_perp,
            n_par,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.n_perp == 0 || self.n_par == 0 {
            return Err(Error::invalid("mesh subdivisions must be at least 1"));
        }
        let e = self.bounds.extent();
        if !(e.x > 0.0 && e.y > 0.0 && e.z > 0.0) || !e.is_finite() {
            return Err(Error::invalid(format!(
                "box extents must be positive and finite, got ({}, {}, {})",
                e.x, e.y, e.z
            )));
        }
        Ok(())
    }
}

/// A boundary facet: a triangle (3 nodes) or planar quad (4 nodes) with an
/// integer tag.
#[derive(Clone, Debug)]
pub struct Facet {
    pub nodes: Vec<usize>,
    pub tag: i32,
}

/// A conforming mesh of one element kind.  Cell connectivity is stored flat
/// with a fixed stride per kind; every tetrahedron has positive signed
/// volume and every prism is a right prism over a positively oriented
/// triangle (both checked at construction).
pub struct Mesh {
    kind: ElementKind,
    nodes: Vec<Point3>,
    cell_nodes: Vec<usize>,
    facets: Vec<Facet>,
    facet_cells: Vec<usize>,
    index: OnceLock<CellIndex>,
}

impl Mesh {
    pub fn new(
        kind: ElementKind,
        nodes: Vec<Point3>,
        cell_nodes: Vec<usize>,
        facets: Vec<Facet>,
    ) -> Result<Mesh> {
        let stride = kind.nodes_per_cell();
        if cell_nodes.len() % stride != 0 {
            return Err(Error::invalid(format!(
                "cell connectivity length {} is not a multiple of {stride}",
                cell_nodes.len()
            )));
        }
        let mut mesh = Mesh {
            kind,
            nodes,
            cell_nodes,
            facets,
            facet_cells: Vec::new(),
            index: OnceLock::new(),
        };
        mesh.validate_cells()?;
        mesh.facet_cells = mesh.compute_facet_cells()?;
        Ok(mesh)
    }

    pub fn kind(&self) -> ElementKind {
        self.kind
    }

    pub fn nodes(&self) -> &[Point3] {
        &self.nodes
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_cells(&self) -> usize {
        self.cell_nodes.len() / self.kind.nodes_per_cell()
    }

    pub fn cell(&self, c: usize) -> &[usize] {
        let s = self.kind.nodes_per_cell();
        &self.cell_nodes[c * s..(c + 1) * s]
    }

    pub fn facets(&self) -> &[Facet] {
        &self.facets
    }

    /// The unique cell adjacent to boundary facet `f`.
    pub fn facet_cell(&self, f: usize) -> usize {
        self.facet_cells[f]
    }

    pub fn cell_centroid(&self, c: usize) -> Point3 {
        let nodes = self.cell(c);
        let mut acc = Point3::ZERO;
        for &n in nodes {
            acc = acc + self.nodes[n];
        }
        acc * (1.0 / nodes.len() as f64)
    }

    pub fn cell_volume(&self, c: usize) -> f64 {
        match self.kind {
            ElementKind::Tet4 => {
                let [a, b, cc, d] = [
                    self.nodes[self.cell(c)[0]],
                    self.nodes[self.cell(c)[1]],
                    self.nodes[self.cell(c)[2]],
                    self.nodes[self.cell(c)[3]],
                ];
                (b - a).cross(cc - a).dot(d - a) / 6.0
            }
            ElementKind::Prism6 => {
                let n = self.cell(c);
                let [p0, p1, p2] = [self.nodes[n[0]], self.nodes[n[1]], self.nodes[n[2]]];
                let area =
                    0.5 * ((p1.x - p0.x) * (p2.y - p0.y) - (p2.x - p0.x) * (p1.y - p0.y));
                let dz = self.nodes[n[3]].z - p0.z;
                area * dz
            }
        }
    }

    pub fn total_volume(&self) -> f64 {
        (0..self.n_cells()).map(|c| self.cell_volume(c)).sum()
    }

    pub fn bounds(&self) -> BoxBounds {
        let mut min = Point3::new(f64::INFINITY, f64::INFINITY, f64::INFINITY);
        let mut max = min * -1.0;
        for p in &self.nodes {
            min = Point3::new(min.x.min(p.x), min.y.min(p.y), min.z.min(p.z));
            max = Point3::new(max.x.max(p.x), max.y.max(p.y), max.z.max(p.z));
        }
        BoxBounds::new(min, max)
    }

    /// Lazily built spatial index shared by point location and clipping.
    pub fn index(&self) -> &CellIndex {
        self.index.get_or_init(|| CellIndex::build(self))
    }

    /// Cell containing `x`, lowest cell id first on shared faces.
    pub fn locate(&self, x: Point3) -> Option<usize> {
        self.index().locate(self, x)
    }

    /// Sorted unique node ids lying on facets with a tag in `tags`.
    pub fn boundary_nodes(&self, tags: &[i32]) -> Vec<usize> {
        let mut out: Vec<usize> = self
            .facets
            .iter()
            .filter(|f| tags.contains(&f.tag))
            .flat_map(|f| f.nodes.iter().copied())
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    /// Replaces every boundary facet tag by `f(centroid, old_tag)`.
    pub fn retag_facets(&mut self, f: impl Fn(Point3, i32) -> i32) {
        let nodes = std::mem::take(&mut self.nodes);
        for facet in &mut self.facets {
            let mut c = Point3::ZERO;
            for &n in &facet.nodes {
                c = c + nodes[n];
            }
            c = c * (1.0 / facet.nodes.len() as f64);
            facet.tag = f(c, facet.tag);
        }
        self.nodes = nodes;
    }

    /// Outward unit normal of boundary facet `f` (constant: facets are
    /// planar).
    pub fn facet_normal(&self, f: usize) -> Point3 {
        let facet = &self.facets[f];
        let p0 = self.nodes[facet.nodes[0]];
        let p1 = self.nodes[facet.nodes[1]];
        let p2 = self.nodes[facet.nodes[2]];
        let mut n = (p1 - p0).cross(p2 - p0).normalized().expect("degenerate facet");
        let inward = self.cell_centroid(self.facet_cells[f]) - p0;
        if n.dot(inward) > 0.0 {
            n = -n;
        }
        n
    }

    fn validate_cells(&self) -> Result<()> {
        let n_nodes = self.nodes.len();
        if let Some(&bad) = self.cell_nodes.iter().find(|&&n| n >= n_nodes) {
            return Err(Error::invalid(format!(
                "cell references node {bad} but the mesh has {n_nodes} nodes"
            )));
        }
        for c in 0..self.n_cells() {
            match self.kind {
                ElementKind::Tet4 => {
                    let v = self.cell_volume(c);
                    if !(v > 0.0) || !v.is_finite() {
                        return Err(Error::InvalidCell {
                            cell: c,
                            msg: format!("non-positive tetrahedron volume {v:.3e}"),
                        });
                    }
                }
                ElementKind::Prism6 => {
                    let n = self.cell(c);
                    let tol = 1e-9 * self.nodes[n[0]].dist(self.nodes[n[4]]).max(1e-30);
                    let dz = self.nodes[n[3]].z - self.nodes[n[0]].z;
                    if !(dz > 0.0) {
                        return Err(Error::InvalidCell {
                            cell: c,
                            msg: format!("non-positive prism height {dz:.3e}"),
                        });
                    }
                    for i in 0..3 {
                        let b = self.nodes[n[i]];
                        let t = self.nodes[n[i + 3]];
                        if (b.x - t.x).abs() > tol
                            || (b.y - t.y).abs() > tol
                            || (t.z - b.z - dz).abs() > tol
                        {
                            return Err(Error::InvalidCell {
                                cell: c,
                                msg: "prism is not a right prism over a horizontal triangle"
                                    .to_string(),
                            });
                        }
                    }
                    let v = self.cell_volume(c);
                    if !(v > 0.0) || !v.is_finite() {
                        return Err(Error::InvalidCell {
                            cell: c,
                            msg: format!("non-positive prism volume {v:.3e}"),
                        });
                    }
                }
            }
        }
        Ok(())
    }

    /// Node-to-cell adjacency in compressed form: `(offsets, cells)`.
    pub fn node_cell_adjacency(&self) -> (Vec<usize>, Vec<u32>) {
        let stride = self.kind.nodes_per_cell();
        let mut counts = vec![0usize; self.nodes.len() + 1];
        for &n in &self.cell_nodes {
            counts[n + 1] += 1;
        }
        for i in 1..counts.len() {
            counts[i] += counts[i - 1];
        }
        let mut data = vec![0u32; self.cell_nodes.len()];
        let mut cursor = counts.clone();
        for (k, &n) in self.cell_nodes.iter().enumerate() {
            data[cursor[n]] = (k / stride) as u32;
            cursor[n] += 1;
        }
        (counts, data)
    }

    fn compute_facet_cells(&self) -> Result<Vec<usize>> {
        let (offsets, data) = self.node_cell_adjacency();
        let mut out = Vec::with_capacity(self.facets.len());
        for (fi, facet) in self.facets.iter().enumerate() {
            if facet.nodes.len() < 3 || facet.nodes.iter().any(|&n| n >= self.nodes.len()) {
                return Err(Error::invalid(format!("facet {fi} is malformed")));
            }
            let n0 = facet.nodes[0];
            let mut found = None;
            for &c in &data[offsets[n0]..offsets[n0 + 1]] {
                let cell = self.cell(c as usize);
                if facet.nodes.iter().all(|n| cell.contains(n)) {
                    if found.is_some() {
                        return Err(Error::invalid(format!(
                            "facet {fi} is shared by two cells; boundary facets must be exterior"
                        )));
                    }
                    found = Some(c as usize);
                }
            }
            match found {
                Some(c) => out.push(c),
                None => {
                    return Err(Error::invalid(format!(
                        "facet {fi} does not lie on any cell"
                    )))
                }
            }
        }
        Ok(out)
    }

    /// Structured tetrahedral box mesh: six tetrahedra per lattice cube, all
    /// sharing the cube's main diagonal.
    pub fn build_box_tet(params: &MeshParams) -> Result<Mesh> {
        params.validate()?;
        let (nx, ny, nz) = (params.n_perp, params.n_perp, params.n_par);
        let nodes = lattice_nodes(params, nx, ny, nz);
        let id = |i: usize, j: usize, k: usize| (k * (ny + 1) + j) * (nx + 1) + i;

        // Axis orderings of the Kuhn split with their permutation parity; odd
        // ones get two vertices swapped to keep the signed volume positive.
        const PERMS: [([usize; 3], bool); 6] = [
            ([0, 1, 2], true),
            ([0, 2, 1], false),
            ([1, 0, 2], false),
            ([1, 2, 0], true),
            ([2, 0, 1], true),
            ([2, 1, 0], false),
        ];
        let mut cell_nodes = Vec::with_capacity(6 * nx * ny * nz * 4);
        for k in 0..nz {
            for j in 0..ny {
                for i in 0..nx {
                    let corner = |d: [usize; 3]| id(i + d[0], j + d[1], k + d[2]);
                    for (perm, even) in PERMS {
                        let mut d = [0usize; 3];
                        let w0 = corner(d);
                        d[perm[0]] = 1;
                        let w1 = corner(d);
                        d[perm[1]] = 1;
                        let w2 = corner(d);
                        let w3 = corner([1, 1, 1]);
                        if even {
                            cell_nodes.extend_from_slice(&[w0, w1, w2, w3]);
                        } else {
                            cell_nodes.extend_from_slice(&[w0, w2, w1, w3]);
                        }
                    }
                }
            }
        }

        // Boundary triangles: each box face splits its lattice squares along
        // the low-to-high diagonal of the two in-plane axes, matching the
        // faces of the Kuhn tetrahedra.
        let mut facets = Vec::new();
        let mut face = |tag: i32,
                        nu: usize,
                        nv: usize,
                        at: &dyn Fn(usize, usize) -> usize| {
            for v in 0..nv {
                for u in 0..nu {
                    let ll = at(u, v);
                    let hl = at(u + 1, v);
                    let hh = at(u + 1, v + 1);
                    let lh = at(u, v + 1);
                    facets.push(Facet {
                        nodes: vec![ll, hl, hh],
                        tag,
                    });
                    facets.push(Facet {
                        nodes: vec![ll, hh, lh],
                        tag,
                    });
                }
            }
        };
        face(0, ny, nz, &|u, v| id(0, u, v));
        face(1, ny, nz, &|u, v| id(nx, u, v));
        face(2, nx, nz, &|u, v| id(u, 0, v));
        face(3, nx, nz, &|u, v| id(u, ny, v));
        face(4, nx, ny, &|u, v| id(u, v, 0));
        face(5, nx, ny, &|u, v| id(u, v, nz));

        Mesh::new(ElementKind::Tet4, nodes, cell_nodes, facets)
    }

    /// Structured prism box mesh: the cross-section triangulation (two
    /// triangles per lattice square, low-to-high diagonal) extruded along z.
    pub fn build_box_prism(params: &MeshParams) -> Result<Mesh> {
        params.validate()?;
        let (nx, ny, nz) = (params.n_perp, params.n_perp, params.n_par);
        let nodes = lattice_nodes(params, nx, ny, nz);
        let id = |i: usize, j: usize, k: usize| (k * (ny + 1) + j) * (nx + 1) + i;

        let mut tris = Vec::with_capacity(2 * nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                tris.push([(i, j), (i + 1, j), (i + 1, j + 1)]);
                tris.push([(i, j), (i + 1, j + 1), (i, j + 1)]);
            }
        }

        let mut cell_nodes = Vec::with_capacity(tris.len() * nz * 6);
        for k in 0..nz {
            for t in &tris {
                for (i, j) in t.iter().copied() {
                    cell_nodes.push(id(i, j, k));
                }
                for (i, j) in t.iter().copied() {
                    cell_nodes.push(id(i, j, k + 1));
                }
            }
        }

        let mut facets = Vec::new();
        // Vertical side quads, tags 0..3.
        let mut side = |tag: i32, n_edge: usize, at: &dyn Fn(usize, usize) -> usize| {
            for k in 0..nz {
                for e in 0..n_edge {
                    facets.push(Facet {
                        nodes: vec![at(e, k), at(e + 1, k), at(e + 1, k + 1), at(e, k + 1)],
                        tag,
                    });
                }
            }
        };
        side(0, ny, &|e, k| id(0, e, k));
        side(1, ny, &|e, k| id(nx, e, k));
        side(2, nx, &|e, k| id(e, 0, k));
        side(3, nx, &|e, k| id(e, ny, k));
        // Bottom and top triangles, tags 4 and 5.
        for (tag, k) in [(4, 0), (5, nz)] {
            for t in &tris {
                facets.push(Facet {
                    nodes: t.iter().map(|&(i, j)| id(i, j, k)).collect(),
                    tag,
                });
            }
        }

        Mesh::new(ElementKind::Prism6, nodes, cell_nodes, facets)
    }

    /// Writes the mesh in the plain ASCII exchange format:
    ///
    /// ```text
    /// nodes N cells M facets K kind tet|prism
    /// x y z                (N lines)
    /// n0 n1 n2 n3 [n4 n5]  (M lines)
    /// tag n0 n1 n2 [n3]    (K lines)
    /// ```
    ///
    /// `#` starts a comment; blank lines are ignored.
    pub fn export_ascii(&self, path: &Path) -> Result<()> {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "nodes {} cells {} facets {} kind {}",
            self.n_nodes(),
            self.n_cells(),
            self.facets.len(),
            self.kind.name()
        );
        for p in &self.nodes {
            let _ = writeln!(s, "{} {} {}", p.x, p.y, p.z);
        }
        for c in 0..self.n_cells() {
            let ids: Vec<String> = self.cell(c).iter().map(|n| n.to_string()).collect();
            let _ = writeln!(s, "{}", ids.join(" "));
        }
        for f in &self.facets {
            let ids: Vec<String> = f.nodes.iter().map(|n| n.to_string()).collect();
            let _ = writeln!(s, "{} {}", f.tag, ids.join(" "));
        }
        crate::io::atomic_write(path, s.as_bytes())
    }

    /// Reads the ASCII exchange format written by [`Mesh::export_ascii`].
    pub fn import_ascii(path: &Path) -> Result<Mesh> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
            .filter(|(_, l)| !l.is_empty());

        let (hline, header) = lines
            .next()
            .ok_or_else(|| Error::parse(path, 1, "empty mesh file"))?;
        let tok: Vec<&str> = header.split_whitespace().collect();
        if tok.len() != 8 || tok[0] != "nodes" || tok[2] != "cells" || tok[4] != "facets" || tok[6] != "kind"
        {
            return Err(Error::parse(
                path,
                hline,
                "expected header `nodes N cells M facets K kind tet|prism`",
            ));
        }
        let parse_count = |s: &str, what: &str| -> Result<usize> {
            s.parse()
                .map_err(|_| Error::parse(path, hline, format!("bad {what} count `{s}`")))
        };
        let n_nodes = parse_count(tok[1], "node")?;
        let n_cells = parse_count(tok[3], "cell")?;
        let n_facets = parse_count(tok[5], "facet")?;
        let kind = match tok[7] {
            "tet" => ElementKind::Tet4,
            "prism" => ElementKind::Prism6,
            other => {
                return Err(Error::parse(
                    path,
                    hline,
                    format!("unknown element kind `{other}`"),
                ))
            }
        };

        let mut nodes = Vec::with_capacity(n_nodes);
        for _ in 0..n_nodes {
            let (ln, l) = lines
                .next()
                .ok_or_else(|| Error::parse(path, hline, "unexpected end of node list"))?;
            let vals: Vec<&str> = l.split_whitespace().collect();
            if vals.len() != 3 {
                return Err(Error::parse(path, ln, "expected `x y z`"));
            }
            let mut p = [0.0; 3];
            for (i, v) in vals.iter().enumerate() {
                p[i] = v
                    .parse()
                    .map_err(|_| Error::parse(path, ln, format!("bad coordinate `{v}`")))?;
            }
            nodes.push(Point3::new(p[0], p[1], p[2]));
        }

        let stride = kind.nodes_per_cell();
        let mut cell_nodes = Vec::with_capacity(n_cells * stride);
        for _ in 0..n_cells {
            let (ln, l) = lines
                .next()
                .ok_or_else(|| Error::parse(path, hline, "unexpected end of cell list"))?;
            let vals: Vec<&str> = l.split_whitespace().collect();
            if vals.len() != stride {
                return Err(Error::parse(
                    path,
                    ln,
                    format!("expected {stride} node ids for a {} cell", kind.name()),
                ));
            }
            for v in vals {
                cell_nodes.push(
                    v.parse()
                        .map_err(|_| Error::parse(path, ln, format!("bad node id `{v}`")))?,
                );
            }
        }

        let mut facets = Vec::with_capacity(n_facets);
        for _ in 0..n_facets {
            let (ln, l) = lines
                .next()
                .ok_or_else(|| Error::parse(path, hline, "unexpected end of facet list"))?;
            let vals: Vec<&str> = l.split_whitespace().collect();
            if !(vals.len() == 4 || vals.len() == 5) {
                return Err(Error::parse(path, ln, "expected `tag n0 n1 n2 [n3]`"));
            }
            let tag = vals[0]
                .parse()
                .map_err(|_| Error::parse(path, ln, format!("bad facet tag `{}`", vals[0])))?;
            let mut ids = Vec::with_capacity(vals.len() - 1);
            for v in &vals[1..] {
                ids.push(
                    v.parse()
                        .map_err(|_| Error::parse(path, ln, format!("bad node id `{v}`")))?,
                );
            }
            facets.push(Facet { nodes: ids, tag });
        }

        if let Some((ln, _)) = lines.next() {
            return Err(Error::parse(path, ln, "trailing content after facet list"));
        }
        Mesh::new(kind, nodes, cell_nodes, facets)
    }
}

fn lattice_nodes(params: &MeshParams, nx: usize, ny: usize, nz: usize) -> Vec<Point3> {
    let min = params.bounds.min;
    let e = params.bounds.extent();
    let (hx, hy, hz) = (e.x / nx as f64, e.y / ny as f64, e.z / nz as f64);
    let mut nodes = Vec::with_capacity((nx + 1) * (ny + 1) * (nz + 1));
    for k in 0..=nz {
        for j in 0..=ny {
            for i in 0..=nx {
                nodes.push(Point3::new(
                    min.x + hx * i as f64,
                    min.y + hy * j as f64,
                    min.z + hz * k as f64,
                ));
            }
        }
    }
    nodes
}

/// Linear shape functions of one cell, precomputed for repeated evaluation.
/// Tetrahedra carry the four affine barycentric forms; prisms the triangle
/// barycentric forms in (x, y) tensorized with the linear interval basis in
/// z.  Shape index order matches the cell's node order.
pub enum CellShape {
    Tet {
        // lambda_i(x) = d[i] + g[i] . x
        d: [f64; 4],
        g: [Point3; 4],
        volume: f64,
    },
    Prism {
        // lambda_i(x, y) = d[i] + gx[i] x + gy[i] y
        d: [f64; 3],
        gx: [f64; 3],
        gy: [f64; 3],
        z0: f64,
        z1: f64,
        area: f64,
    },
}

impl CellShape {
    pub fn new(mesh: &Mesh, c: usize) -> CellShape {
        let n = mesh.cell(c);
        match mesh.kind() {
            ElementKind::Tet4 => {
                let v0 = mesh.nodes()[n[0]];
                let e1 = mesh.nodes()[n[1]] - v0;
                let e2 = mesh.nodes()[n[2]] - v0;
                let e3 = mesh.nodes()[n[3]] - v0;
                let det = e1.cross(e2).dot(e3);
                // Rows of the inverse Jacobian are the gradients of the
                // barycentric coordinates lambda_1..3.
                let r1 = e2.cross(e3) * (1.0 / det);
                let r2 = e3.cross(e1) * (1.0 / det);
                let r3 = e1.cross(e2) * (1.0 / det);
                let g = [-(r1 + r2 + r3), r1, r2, r3];
                let mut d = [0.0; 4];
                for i in 0..4 {
                    d[i] = if i == 0 { 1.0 } else { 0.0 } - g[i].dot(v0);
                }
                CellShape::Tet {
                    d,
                    g,
                    volume: det / 6.0,
                }
            }
            ElementKind::Prism6 => {
                let p: Vec<Point3> = n.iter().map(|&i| mesh.nodes()[i]).collect();
                let two_a = (p[1].x - p[0].x) * (p[2].y - p[0].y)
                    - (p[2].x - p[0].x) * (p[1].y - p[0].y);
                let mut d = [0.0; 3];
                let mut gx = [0.0; 3];
                let mut gy = [0.0; 3];
                for i in 0..3 {
                    let (pa, pb) = (p[(i + 1) % 3], p[(i + 2) % 3]);
                    d[i] = (pa.x * pb.y - pb.x * pa.y) / two_a;
                    gx[i] = (pa.y - pb.y) / two_a;
                    gy[i] = (pb.x - pa.x) / two_a;
                }
                CellShape::Prism {
                    d,
                    gx,
                    gy,
                    z0: p[0].z,
                    z1: p[3].z,
                    area: 0.5 * two_a,
                }
            }
        }
    }

    pub fn n_shapes(&self) -> usize {
        match self {
            CellShape::Tet { .. } => 4,
            CellShape::Prism { .. } => 6,
        }
    }

    pub fn volume(&self) -> f64 {
        match self {
            CellShape::Tet { volume, .. } => *volume,
            CellShape::Prism { area, z0, z1, .. } => area * (z1 - z0),
        }
    }

    /// Shape function values at `x`; returns the number of shapes.
    pub fn values(&self, x: Point3, out: &mut [f64; 6]) -> usize {
        match self {
            CellShape::Tet { d, g, .. } => {
                for i in 0..4 {
                    out[i] = d[i] + g[i].dot(x);
                }
                4
            }
            CellShape::Prism {
                d,
                gx,
                gy,
                z0,
                z1,
                ..
            } => {
                let dz = z1 - z0;
                let lz1 = (x.z - z0) / dz;
                let lz0 = 1.0 - lz1;
                for i in 0..3 {
                    let lam = d[i] + gx[i] * x.x + gy[i] * x.y;
                    out[i] = lam * lz0;
                    out[i + 3] = lam * lz1;
                }
                6
            }
        }
    }

    /// Shape function gradients at `x`; returns the number of shapes.
    pub fn grads(&self, x: Point3, out: &mut [Point3; 6]) -> usize {
        match self {
            CellShape::Tet { g, .. } => {
                out[..4].copy_from_slice(g);
                4
            }
            CellShape::Prism {
                d,
                gx,
                gy,
                z0,
                z1,
                ..
            } => {
                let dz = z1 - z0;
                let lz1 = (x.z - z0) / dz;
                let lz0 = 1.0 - lz1;
                for i in 0..3 {
                    let lam = d[i] + gx[i] * x.x + gy[i] * x.y;
                    out[i] = Point3::new(gx[i] * lz0, gy[i] * lz0, -lam / dz);
                    out[i + 3] = Point3::new(gx[i] * lz1, gy[i] * lz1, lam / dz);
                }
                6
            }
        }
    }

    /// Whether `x` lies in the cell, with a relative tolerance on the local
    /// coordinates.
    pub fn contains(&self, x: Point3, tol: f64) -> bool {
        match self {
            CellShape::Tet { d, g, .. } => {
                (0..4).all(|i| d[i] + g[i].dot(x) >= -tol)
            }
            CellShape::Prism {
                d,
                gx,
                gy,
                z0,
                z1,
                ..
            } => {
                let dz = z1 - z0;
                if x.z < z0 - tol * dz || x.z > z1 + tol * dz {
                    return false;
                }
                (0..3).all(|i| d[i] + gx[i] * x.x + gy[i] * x.y >= -tol)
            }
        }
    }
}
