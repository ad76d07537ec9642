//! Structured-grid function spaces on a rectangle: nodal scalar/vector
//! fields, difference operators for first and second gradients evaluated at
//! cell centers, midpoint bulk quadrature, edge-midpoint boundary quadrature,
//! and Dirichlet/Neumann boundary tagging.
//!
//! Node (i, j) sits at (i hx, j hy), i < nx, j < ny, row-major index
//! j*nx + i.  Cells are the (nx-1)(ny-1) squares between nodes; cell (ci, cj)
//! has row-major index cj*(nx-1) + ci.
//!
//! Every field operator comes with its exact transpose (`*_t`), so energy
//! gradients assemble by scattering cell-level stress coefficients back to
//! nodes through the same stencils.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::tensor::{Mat2, Tens3};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
    Bottom,
    Top,
}

pub const ALL_SIDES: [Side; 4] = [Side::Left, Side::Right, Side::Bottom, Side::Top];

/// One boundary edge between adjacent boundary nodes.
#[derive(Debug, Clone, Copy)]
pub struct Edge {
    pub a: usize,
    pub b: usize,
    /// Midpoint coordinates.
    pub mid: [f64; 2],
    pub len: f64,
    pub side: Side,
    /// Outward unit normal.
    pub normal: [f64; 2],
}

#[derive(Debug, Clone)]
pub struct Grid {
    /// Node counts per axis.
    pub nx: usize,
    pub ny: usize,
    pub lx: f64,
    pub ly: f64,
    pub hx: f64,
    pub hy: f64,
    pub dirichlet: Vec<Side>,
    edges: Vec<Edge>,
    dirichlet_mask: Vec<bool>,
}

/// Which part of the boundary an integral runs over.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryPart {
    All,
    Neumann,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField(pub Vec<f64>);

#[derive(Debug, Clone, PartialEq)]
pub struct VectorField(pub Vec<[f64; 2]>);

impl ScalarField {
    pub fn zeros(g: &Grid) -> ScalarField {
        ScalarField(vec![0.0; g.nnodes()])
    }

    pub fn constant(g: &Grid, v: f64) -> ScalarField {
        ScalarField(vec![v; g.nnodes()])
    }

    pub fn from_fn(g: &Grid, f: impl Fn(f64, f64) -> f64) -> ScalarField {
        let mut out = Vec::with_capacity(g.nnodes());
        for j in 0..g.ny {
            for i in 0..g.nx {
                let (x, y) = g.node_pos(i, j);
                out.push(f(x, y));
            }
        }
        ScalarField(out)
    }

    pub fn min(&self) -> f64 {
        self.0.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.0.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

impl VectorField {
    pub fn zeros(g: &Grid) -> VectorField {
        VectorField(vec![[0.0; 2]; g.nnodes()])
    }

    pub fn from_fn(g: &Grid, f: impl Fn(f64, f64) -> [f64; 2]) -> VectorField {
        let mut out = Vec::with_capacity(g.nnodes());
        for j in 0..g.ny {
            for i in 0..g.nx {
                let (x, y) = g.node_pos(i, j);
                out.push(f(x, y));
            }
        }
        VectorField(out)
    }

    pub fn axpy(&mut self, a: f64, other: &VectorField) {
        for (u, v) in self.0.iter_mut().zip(&other.0) {
            u[0] += a * v[0];
            u[1] += a * v[1];
        }
    }

    pub fn sub(&self, other: &VectorField) -> VectorField {
        VectorField(
            self.0
                .iter()
                .zip(&other.0)
                .map(|(u, v)| [u[0] - v[0], u[1] - v[1]])
                .collect(),
        )
    }

    pub fn sup_norm(&self) -> f64 {
        self.0
            .iter()
            .flat_map(|v| v.iter())
            .fold(0.0f64, |m, x| m.max(x.abs()))
    }
}

impl Grid {
    pub fn new(nx: usize, ny: usize, lx: f64, ly: f64, dirichlet: Vec<Side>) -> Result<Grid> {
        if nx < 3 || ny < 3 {
            return Err(CoreError::GridTooSmall { nx, ny });
        }
        if !(lx > 0.0 && ly > 0.0) {
            return Err(CoreError::InvalidConfig(format!(
                "domain lengths must be positive, got Lx = {lx}, Ly = {ly}"
            )));
        }
        let mut seen = Vec::new();
        for s in &dirichlet {
            if seen.contains(s) {
                return Err(CoreError::InvalidConfig(format!(
                    "duplicate dirichlet edge {s:?}"
                )));
            }
            seen.push(*s);
        }
        if dirichlet.is_empty() || dirichlet.len() == 4 {
            return Err(CoreError::InvalidConfig(
                "boundary split needs nonempty Dirichlet and Neumann parts".into(),
            ));
        }
        let hx = lx / (nx - 1) as f64;
        let hy = ly / (ny - 1) as f64;
        let mut g = Grid {
            nx,
            ny,
            lx,
            ly,
            hx,
            hy,
            dirichlet,
            edges: Vec::new(),
            dirichlet_mask: Vec::new(),
        };
        g.edges = g.build_edges();
        g.dirichlet_mask = g.build_dirichlet_mask();
        Ok(g)
    }

    pub fn nnodes(&self) -> usize {
        self.nx * self.ny
    }

    pub fn ncells(&self) -> usize {
        (self.nx - 1) * (self.ny - 1)
    }

    pub fn node(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    pub fn node_pos(&self, i: usize, j: usize) -> (f64, f64) {
        (i as f64 * self.hx, j as f64 * self.hy)
    }

    pub fn cell_center(&self, ci: usize, cj: usize) -> (f64, f64) {
        ((ci as f64 + 0.5) * self.hx, (cj as f64 + 0.5) * self.hy)
    }

    /// The four node indices of cell (ci, cj): (i,j), (i+1,j), (i,j+1), (i+1,j+1).
    pub fn cell_nodes(&self, ci: usize, cj: usize) -> [usize; 4] {
        let n00 = self.node(ci, cj);
        [n00, n00 + 1, n00 + self.nx, n00 + self.nx + 1]
    }

    pub fn cell_weight(&self) -> f64 {
        self.hx * self.hy
    }

    pub fn identity_deformation(&self) -> VectorField {
        VectorField::from_fn(self, |x, y| [x, y])
    }

    fn build_edges(&self) -> Vec<Edge> {
        let mut edges = Vec::new();
        for j in 0..self.ny - 1 {
            let (x0, y0) = self.node_pos(0, j);
            edges.push(Edge {
                a: self.node(0, j),
                b: self.node(0, j + 1),
                mid: [x0, y0 + 0.5 * self.hy],
                len: self.hy,
                side: Side::Left,
                normal: [-1.0, 0.0],
            });
            let (x1, y1) = self.node_pos(self.nx - 1, j);
            edges.push(Edge {
                a: self.node(self.nx - 1, j),
                b: self.node(self.nx - 1, j + 1),
                mid: [x1, y1 + 0.5 * self.hy],
                len: self.hy,
                side: Side::Right,
                normal: [1.0, 0.0],
            });
        }
        for i in 0..self.nx - 1 {
            let (x0, y0) = self.node_pos(i, 0);
            edges.push(Edge {
                a: self.node(i, 0),
                b: self.node(i + 1, 0),
                mid: [x0 + 0.5 * self.hx, y0],
                len: self.hx,
                side: Side::Bottom,
                normal: [0.0, -1.0],
            });
            let (x1, y1) = self.node_pos(i, self.ny - 1);
            edges.push(Edge {
                a: self.node(i, self.ny - 1),
                b: self.node(i + 1, self.ny - 1),
                mid: [x1 + 0.5 * self.hx, y1],
                len: self.hx,
                side: Side::Top,
                normal: [0.0, 1.0],
            });
        }
        edges
    }

    fn build_dirichlet_mask(&self) -> Vec<bool> {
        let mut mask = vec![false; self.nnodes()];
        for s in &self.dirichlet {
            match s {
                Side::Left => (0..self.ny).for_each(|j| mask[self.node(0, j)] = true),
                Side::Right => (0..self.ny).for_each(|j| mask[self.node(self.nx - 1, j)] = true),
                Side::Bottom => (0..self.nx).for_each(|i| mask[self.node(i, 0)] = true),
                Side::Top => (0..self.nx).for_each(|i| mask[self.node(i, self.ny - 1)] = true),
            }
        }
        mask
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edges_of(&self, part: BoundaryPart) -> impl Iterator<Item = &Edge> {
        self.edges.iter().filter(move |e| match part {
            BoundaryPart::All => true,
            BoundaryPart::Neumann => !self.dirichlet.contains(&e.side),
        })
    }

    pub fn is_dirichlet_node(&self, n: usize) -> bool {
        self.dirichlet_mask[n]
    }

    pub fn dirichlet_mask(&self) -> &[bool] {
        &self.dirichlet_mask
    }

    // ---- first gradient at cell centers --------------------------------

    /// Cell-center gradient of a nodal scalar: bilinear interpolation stencil,
    /// exact for affine fields.
    pub fn gradient_scalar(&self, v: &[f64]) -> Vec<[f64; 2]> {
        let mut out = Vec::with_capacity(self.ncells());
        for cj in 0..self.ny - 1 {
            for ci in 0..self.nx - 1 {
                let [n00, n10, n01, n11] = self.cell_nodes(ci, cj);
                let gx = (v[n10] + v[n11] - v[n00] - v[n01]) / (2.0 * self.hx);
                let gy = (v[n01] + v[n11] - v[n00] - v[n10]) / (2.0 * self.hy);
                out.push([gx, gy]);
            }
        }
        out
    }

    /// Transpose of `gradient_scalar`: scatter per-cell gradient coefficients
    /// back to nodes, accumulating into `out`.
    pub fn gradient_scalar_t(&self, coef: &[[f64; 2]], out: &mut [f64]) {
        let mut c = 0;
        for cj in 0..self.ny - 1 {
            for ci in 0..self.nx - 1 {
                let [n00, n10, n01, n11] = self.cell_nodes(ci, cj);
                let ax = coef[c][0] / (2.0 * self.hx);
                let ay = coef[c][1] / (2.0 * self.hy);
                out[n00] += -ax - ay;
                out[n10] += ax - ay;
                out[n01] += -ax + ay;
                out[n11] += ax + ay;
                c += 1;
            }
        }
    }

    /// Per-cell deformation gradient F with F[i][j] = d y_i / d x_j.
    pub fn gradient_vector(&self, v: &VectorField) -> Vec<Mat2> {
        let mut out = Vec::with_capacity(self.ncells());
        for cj in 0..self.ny - 1 {
            for ci in 0..self.nx - 1 {
                let [n00, n10, n01, n11] = self.cell_nodes(ci, cj);
                let mut f = Mat2::ZERO;
                for comp in 0..2 {
                    let (a, b, c, d) = (
                        v.0[n00][comp],
                        v.0[n10][comp],
                        v.0[n01][comp],
                        v.0[n11][comp],
                    );
                    f.0[comp][0] = (b + d - a - c) / (2.0 * self.hx);
                    f.0[comp][1] = (c + d - a - b) / (2.0 * self.hy);
                }
                out.push(f);
            }
        }
        out
    }

    /// Transpose of `gradient_vector`: scatter per-cell stress coefficients
    /// P (same index convention as F) into a nodal vector field.
    pub fn gradient_vector_t(&self, coef: &[Mat2], out: &mut VectorField) {
        let mut c = 0;
        for cj in 0..self.ny - 1 {
            for ci in 0..self.nx - 1 {
                let [n00, n10, n01, n11] = self.cell_nodes(ci, cj);
                for comp in 0..2 {
                    let ax = coef[c].0[comp][0] / (2.0 * self.hx);
                    let ay = coef[c].0[comp][1] / (2.0 * self.hy);
                    out.0[n00][comp] += -ax - ay;
                    out.0[n10][comp] += ax - ay;
                    out.0[n01][comp] += -ax + ay;
                    out.0[n11][comp] += ax + ay;
                }
                c += 1;
            }
        }
    }

    // ---- nodal difference operators (building blocks) -------------------

    /// First x-derivative at every node: central interior, one-sided
    /// second-order at the two ends of each row.
    fn d1<const ALONG_X: bool>(&self, v: &[f64], out: &mut [f64]) {
        let (n, stride, h, lines) = if ALONG_X {
            (self.nx, 1usize, self.hx, self.ny)
        } else {
            (self.ny, self.nx, self.hy, self.nx)
        };
        for line in 0..lines {
            let base = if ALONG_X { line * self.nx } else { line };
            let at = |k: usize| v[base + k * stride];
            out[base] = (-3.0 * at(0) + 4.0 * at(1) - at(2)) / (2.0 * h);
            for k in 1..n - 1 {
                out[base + k * stride] = (at(k + 1) - at(k - 1)) / (2.0 * h);
            }
            out[base + (n - 1) * stride] =
                (3.0 * at(n - 1) - 4.0 * at(n - 2) + at(n - 3)) / (2.0 * h);
        }
    }

    /// Transpose of `d1`, accumulating.
    fn d1_t<const ALONG_X: bool>(&self, w: &[f64], out: &mut [f64]) {
        let (n, stride, h, lines) = if ALONG_X {
            (self.nx, 1usize, self.hx, self.ny)
        } else {
            (self.ny, self.nx, self.hy, self.nx)
        };
        for line in 0..lines {
            let base = if ALONG_X { line * self.nx } else { line };
            let idx = |k: usize| base + k * stride;
            let w0 = w[idx(0)] / (2.0 * h);
            out[idx(0)] += -3.0 * w0;
            out[idx(1)] += 4.0 * w0;
            out[idx(2)] += -w0;
            for k in 1..n - 1 {
                let wk = w[idx(k)] / (2.0 * h);
                out[idx(k + 1)] += wk;
                out[idx(k - 1)] -= wk;
            }
            let wn = w[idx(n - 1)] / (2.0 * h);
            out[idx(n - 1)] += 3.0 * wn;
            out[idx(n - 2)] += -4.0 * wn;
            out[idx(n - 3)] += wn;
        }
    }

    /// Second derivative at every node: central interior; end nodes reuse the
    /// neighbor-centered stencil, which stays exact on quadratics.
    fn d2<const ALONG_X: bool>(&self, v: &[f64], out: &mut [f64]) {
        let (n, stride, h, lines) = if ALONG_X {
            (self.nx, 1usize, self.hx, self.ny)
        } else {
            (self.ny, self.nx, self.hy, self.nx)
        };
        let h2 = h * h;
        for line in 0..lines {
            let base = if ALONG_X { line * self.nx } else { line };
            let at = |k: usize| v[base + k * stride];
            out[base] = (at(0) - 2.0 * at(1) + at(2)) / h2;
            for k in 1..n - 1 {
                out[base + k * stride] = (at(k - 1) - 2.0 * at(k) + at(k + 1)) / h2;
            }
            out[base + (n - 1) * stride] = (at(n - 3) - 2.0 * at(n - 2) + at(n - 1)) / h2;
        }
    }

    fn d2_t<const ALONG_X: bool>(&self, w: &[f64], out: &mut [f64]) {
        let (n, stride, h, lines) = if ALONG_X {
            (self.nx, 1usize, self.hx, self.ny)
        } else {
            (self.ny, self.nx, self.hy, self.nx)
        };
        let h2 = h * h;
        for line in 0..lines {
            let base = if ALONG_X { line * self.nx } else { line };
            let idx = |k: usize| base + k * stride;
            let w0 = w[idx(0)] / h2;
            out[idx(0)] += w0;
            out[idx(1)] += -2.0 * w0;
            out[idx(2)] += w0;
            for k in 1..n - 1 {
                let wk = w[idx(k)] / h2;
                out[idx(k - 1)] += wk;
                out[idx(k)] += -2.0 * wk;
                out[idx(k + 1)] += wk;
            }
            let wn = w[idx(n - 1)] / h2;
            out[idx(n - 3)] += wn;
            out[idx(n - 2)] += -2.0 * wn;
            out[idx(n - 1)] += wn;
        }
    }

    /// Averages nodal values to cell centers (mean of the 4 corners).
    fn corner_avg(&self, v: &[f64], out: &mut [f64]) {
        let mut c = 0;
        for cj in 0..self.ny - 1 {
            for ci in 0..self.nx - 1 {
                let [n00, n10, n01, n11] = self.cell_nodes(ci, cj);
                out[c] = 0.25 * (v[n00] + v[n10] + v[n01] + v[n11]);
                c += 1;
            }
        }
    }

    fn corner_avg_t(&self, w: &[f64], out: &mut [f64]) {
        let mut c = 0;
        for cj in 0..self.ny - 1 {
            for ci in 0..self.nx - 1 {
                let q = 0.25 * w[c];
                for n in self.cell_nodes(ci, cj) {
                    out[n] += q;
                }
                c += 1;
            }
        }
    }

    // ---- second gradient at cell centers --------------------------------

    /// Per-cell second gradient G with G[i][j][k] = d^2 y_i / dx_j dx_k,
    /// symmetric in (j, k) by construction: nodal second differences averaged
    /// over the cell corners; mixed part via composed first derivatives.
    pub fn second_gradient_vector(&self, v: &VectorField) -> Result<Vec<Tens3>> {
        if v.0.len() != self.nnodes() {
            return Err(CoreError::ShapeMismatch {
                expected: self.nnodes(),
                got: v.0.len(),
            });
        }
        let nn = self.nnodes();
        let nc = self.ncells();
        let mut comp = vec![0.0; nn];
        let mut nodal = vec![0.0; nn];
        let mut tmp = vec![0.0; nn];
        let mut cell_xx = vec![0.0; nc];
        let mut cell_yy = vec![0.0; nc];
        let mut cell_xy = vec![0.0; nc];
        let mut out = vec![Tens3::ZERO; nc];
        for comp_i in 0..2 {
            for (dst, src) in comp.iter_mut().zip(&v.0) {
                *dst = src[comp_i];
            }
            self.d2::<true>(&comp, &mut nodal);
            self.corner_avg(&nodal, &mut cell_xx);
            self.d2::<false>(&comp, &mut nodal);
            self.corner_avg(&nodal, &mut cell_yy);
            self.d1::<true>(&comp, &mut tmp);
            self.d1::<false>(&tmp, &mut nodal);
            self.corner_avg(&nodal, &mut cell_xy);
            for c in 0..nc {
                out[c].0[comp_i][0][0] = cell_xx[c];
                out[c].0[comp_i][1][1] = cell_yy[c];
                out[c].0[comp_i][0][1] = cell_xy[c];
                out[c].0[comp_i][1][0] = cell_xy[c];
            }
        }
        Ok(out)
    }

    /// Transpose of `second_gradient_vector`: scatter per-cell hyperstress
    /// coefficients S into a nodal vector field (accumulating).
    pub fn second_gradient_vector_t(&self, coef: &[Tens3], out: &mut VectorField) {
        let nn = self.nnodes();
        let nc = self.ncells();
        let mut cell = vec![0.0; nc];
        let mut nodal = vec![0.0; nn];
        let mut tmp = vec![0.0; nn];
        let mut acc = vec![0.0; nn];
        for comp_i in 0..2 {
            acc.iter_mut().for_each(|x| *x = 0.0);

            for (dst, s) in cell.iter_mut().zip(coef) {
                *dst = s.0[comp_i][0][0];
            }
            nodal.iter_mut().for_each(|x| *x = 0.0);
            self.corner_avg_t(&cell, &mut nodal);
            self.d2_t::<true>(&nodal, &mut acc);

            for (dst, s) in cell.iter_mut().zip(coef) {
                *dst = s.0[comp_i][1][1];
            }
            nodal.iter_mut().for_each(|x| *x = 0.0);
            self.corner_avg_t(&cell, &mut nodal);
            self.d2_t::<false>(&nodal, &mut acc);

            for (dst, s) in cell.iter_mut().zip(coef) {
                *dst = s.0[comp_i][0][1] + s.0[comp_i][1][0];
            }
            nodal.iter_mut().for_each(|x| *x = 0.0);
            self.corner_avg_t(&cell, &mut nodal);
            tmp.iter_mut().for_each(|x| *x = 0.0);
            self.d1_t::<false>(&nodal, &mut tmp);
            self.d1_t::<true>(&tmp, &mut acc);

            for (dst, a) in out.0.iter_mut().zip(&acc) {
                dst[comp_i] += a;
            }
        }
    }

    // ---- quadrature ------------------------------------------------------

    pub fn integrate_bulk(&self, cell_vals: &[f64]) -> Result<f64> {
        if cell_vals.len() != self.ncells() {
            return Err(CoreError::ShapeMismatch {
                expected: self.ncells(),
                got: cell_vals.len(),
            });
        }
        Ok(self.cell_weight() * cell_vals.iter().sum::<f64>())
    }

    /// Boundary integral via edge midpoints; `edge_vals` must follow
    /// `edges_of(part)` order.
    pub fn integrate_boundary(&self, edge_vals: &[f64], part: BoundaryPart) -> Result<f64> {
        let mut sum = 0.0;
        let mut n = 0;
        for e in self.edges_of(part) {
            let v = edge_vals.get(n).ok_or(CoreError::ShapeMismatch {
                expected: n + 1,
                got: edge_vals.len(),
            })?;
            sum += e.len * v;
            n += 1;
        }
        if n != edge_vals.len() {
            return Err(CoreError::ShapeMismatch {
                expected: n,
                got: edge_vals.len(),
            });
        }
        Ok(sum)
    }

    // ---- admissibility ---------------------------------------------------

    /// Builds the deformation id + eps * u0, pinning Dirichlet nodes to id.
    pub fn apply_dirichlet_deformation(
        &self,
        u0: &VectorField,
        eps: f64,
    ) -> Result<VectorField> {
        if u0.0.len() != self.nnodes() {
            return Err(CoreError::ShapeMismatch {
                expected: self.nnodes(),
                got: u0.0.len(),
            });
        }
        for (n, v) in u0.0.iter().enumerate() {
            if self.dirichlet_mask[n] && (v[0] != 0.0 || v[1] != 0.0) {
                return Err(CoreError::InvalidInitialDatum(format!(
                    "displacement datum nonzero at Dirichlet node {n}: {v:?}"
                )));
            }
        }
        let mut y = self.identity_deformation();
        y.axpy(eps, u0);
        Ok(y)
    }

    /// Zeroes the Dirichlet nodes of a vector field (projection onto the
    /// homogeneous test space).
    pub fn project_test_space(&self, v: &mut VectorField) {
        for (n, val) in v.0.iter_mut().enumerate() {
            if self.dirichlet_mask[n] {
                *val = [0.0, 0.0];
            }
        }
    }

    // ---- snapshots -------------------------------------------------------

    /// Renders nodal columns as CSV, header `i,j,x,y,<names...>`, row-major
    /// node order, 17-significant-digit decimals.
    pub fn snapshot_csv(&self, names: &[&str], columns: &[&[f64]]) -> Result<String> {
        if names.len() != columns.len() || columns.iter().any(|c| c.len() != self.nnodes()) {
            return Err(CoreError::ShapeMismatch {
                expected: self.nnodes(),
                got: columns.first().map_or(0, |c| c.len()),
            });
        }
        let mut out = String::new();
        out.push_str("i,j,x,y");
        for n in names {
            out.push(',');
            out.push_str(n);
        }
        out.push('\n');
        for j in 0..self.ny {
            for i in 0..self.nx {
                let (x, y) = self.node_pos(i, j);
                let n = self.node(i, j);
                let _ = write!(out, "{i},{j},{},{}", fmt17(x), fmt17(y));
                for col in columns {
                    let _ = write!(out, ",{}", fmt17(col[n]));
                }
                out.push('\n');
            }
        }
        Ok(out)
    }
}

/// Decimal rendering with 17 significant digits (shortest round-trippable
/// double precision).
pub fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;

    fn unit_grid(n: usize) -> Grid {
        Grid::new(n, n, 1.0, 1.0, vec![Side::Left]).unwrap()
    }

    fn rand_field(g: &Grid, rng: &mut impl Rng) -> Vec<f64> {
        (0..g.nnodes()).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    #[test]
    fn construction_invariants() {
        let g = unit_grid(5);
        assert_eq!(g.hx, 0.25);
        assert_eq!(g.ncells(), 16);
        assert!(Grid::new(2, 5, 1.0, 1.0, vec![Side::Left]).is_err());
        assert!(Grid::new(5, 5, 1.0, 1.0, vec![]).is_err());
        assert!(Grid::new(5, 5, 1.0, 1.0, ALL_SIDES.to_vec()).is_err());
        assert!(Grid::new(5, 5, 1.0, 1.0, vec![Side::Left, Side::Left]).is_err());
    }

    #[test]
    fn quadrature_weights() {
        let g = Grid::new(9, 5, 2.0, 1.0, vec![Side::Left, Side::Bottom]).unwrap();
        let bulk: f64 = (0..g.ncells()).map(|_| g.cell_weight()).sum();
        assert!((bulk - 2.0).abs() < 1e-12);
        let per: f64 = g.edges_of(BoundaryPart::All).map(|e| e.len).sum();
        assert!((per - 6.0).abs() < 1e-12);
        let neu: f64 = g.edges_of(BoundaryPart::Neumann).map(|e| e.len).sum();
        assert!((neu - 3.0).abs() < 1e-12);
        assert!(g.edges().iter().all(|e| e.len > 0.0));
    }

    #[test]
    fn integrate_examples() {
        let g = Grid::new(33, 33, 1.0, 1.0, vec![Side::Left]).unwrap();
        let ones = vec![1.0; g.ncells()];
        assert!((g.integrate_bulk(&ones).unwrap() - 1.0).abs() < 1e-14);
        let edge_ones: Vec<f64> = g.edges_of(BoundaryPart::All).map(|_| 1.0).collect();
        assert!((g.integrate_boundary(&edge_ones, BoundaryPart::All).unwrap() - 4.0).abs() < 1e-12);
        // midpoint rule exact for linear integrand x1
        let mut vals = Vec::new();
        for cj in 0..g.ny - 1 {
            for ci in 0..g.nx - 1 {
                vals.push(g.cell_center(ci, cj).0);
            }
        }
        assert!((g.integrate_bulk(&vals).unwrap() - 0.5).abs() < 1e-12);
        assert!(g.integrate_bulk(&vals[1..]).is_err());
    }

    #[test]
    fn gradient_exact_on_affine() {
        let g = unit_grid(7);
        let a = Mat2([[1.3, -0.4], [0.2, 0.9]]);
        let v = VectorField::from_fn(&g, |x, y| {
            [a.0[0][0] * x + a.0[0][1] * y + 0.3, a.0[1][0] * x + a.0[1][1] * y - 1.0]
        });
        for f in g.gradient_vector(&v) {
            assert!((f - a).norm() < 1e-13);
        }
        let id = g.identity_deformation();
        for f in g.gradient_vector(&id) {
            assert!((f - Mat2::ID).norm() < 1e-14);
        }
    }

    #[test]
    fn gradient_quadratic_hand_value() {
        // v = (x^2, 0) on h = 0.25: (1,1)-entry of the cell gradient is
        // 2 * cell-center x.
        let g = unit_grid(5);
        let v = VectorField::from_fn(&g, |x, _| [x * x, 0.0]);
        let grads = g.gradient_vector(&v);
        let mut c = 0;
        for cj in 0..g.ny - 1 {
            for ci in 0..g.nx - 1 {
                let (xc, _) = g.cell_center(ci, cj);
                assert!((grads[c].0[0][0] - 2.0 * xc).abs() < 1e-13);
                assert_eq!(grads[c].0[1][0], 0.0);
                c += 1;
            }
        }
    }

    #[test]
    fn second_gradient_annihilates_affine() {
        let g = unit_grid(6);
        let v = VectorField::from_fn(&g, |x, y| [2.0 * x - y + 1.0, 0.5 * x + 3.0 * y]);
        for t in g.second_gradient_vector(&v).unwrap() {
            assert!(t.norm_sq() < 1e-24);
        }
    }

    #[test]
    fn second_gradient_exact_on_quadratics() {
        // exactness everywhere, including boundary cells, on pure quadratics
        let g = unit_grid(6);
        let v = VectorField::from_fn(&g, |x, y| [x * x, x * y]);
        for t in g.second_gradient_vector(&v).unwrap() {
            assert!((t.0[0][0][0] - 2.0).abs() < 1e-12);
            assert!(t.0[0][0][1].abs() < 1e-12);
            assert!(t.0[0][1][1].abs() < 1e-12);
            assert!((t.0[1][0][1] - 1.0).abs() < 1e-12);
            assert!((t.0[1][1][0] - 1.0).abs() < 1e-12);
            assert!(t.0[1][0][0].abs() < 1e-12);
        }
    }

    #[test]
    fn second_gradient_symmetric_last_two() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let g = unit_grid(8);
        let v = VectorField(
            (0..g.nnodes())
                .map(|_| [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)])
                .collect(),
        );
        for t in g.second_gradient_vector(&v).unwrap() {
            for i in 0..2 {
                assert_eq!(t.0[i][0][1], t.0[i][1][0]);
            }
        }
    }

    #[test]
    fn gradient_transpose_is_adjoint() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let g = Grid::new(7, 5, 1.3, 0.8, vec![Side::Top]).unwrap();
        for _ in 0..20 {
            let v = rand_field(&g, &mut rng);
            let w: Vec<[f64; 2]> = (0..g.ncells())
                .map(|_| [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)])
                .collect();
            let av = g.gradient_scalar(&v);
            let lhs: f64 = av
                .iter()
                .zip(&w)
                .map(|(a, b)| a[0] * b[0] + a[1] * b[1])
                .sum();
            let mut atw = vec![0.0; g.nnodes()];
            g.gradient_scalar_t(&w, &mut atw);
            let rhs: f64 = atw.iter().zip(&v).map(|(a, b)| a * b).sum();
            assert!((lhs - rhs).abs() < 1e-12 * (1.0 + lhs.abs()));
        }
    }

    #[test]
    fn vector_gradient_transpose_is_adjoint() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(55);
        let g = Grid::new(6, 9, 0.9, 2.1, vec![Side::Right]).unwrap();
        for _ in 0..20 {
            let v = VectorField(
                (0..g.nnodes())
                    .map(|_| [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)])
                    .collect(),
            );
            let w: Vec<Mat2> = (0..g.ncells())
                .map(|_| {
                    Mat2([
                        [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)],
                        [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)],
                    ])
                })
                .collect();
            let av = g.gradient_vector(&v);
            let lhs: f64 = av.iter().zip(&w).map(|(a, b)| a.dot(b)).sum();
            let mut atw = VectorField::zeros(&g);
            g.gradient_vector_t(&w, &mut atw);
            let rhs: f64 = atw
                .0
                .iter()
                .zip(&v.0)
                .map(|(a, b)| a[0] * b[0] + a[1] * b[1])
                .sum();
            assert!((lhs - rhs).abs() < 1e-12 * (1.0 + lhs.abs()));
        }
    }

    #[test]
    fn second_gradient_transpose_is_adjoint() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(57);
        let g = Grid::new(8, 6, 1.0, 1.0, vec![Side::Bottom]).unwrap();
        for _ in 0..20 {
            let v = VectorField(
                (0..g.nnodes())
                    .map(|_| [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)])
                    .collect(),
            );
            let w: Vec<Tens3> = (0..g.ncells())
                .map(|_| {
                    let mut t = Tens3::ZERO;
                    for i in 0..2 {
                        for j in 0..2 {
                            for k in 0..2 {
                                t.0[i][j][k] = rng.random_range(-1.0..1.0);
                            }
                        }
                    }
                    t
                })
                .collect();
            let av = g.second_gradient_vector(&v).unwrap();
            let lhs: f64 = av.iter().zip(&w).map(|(a, b)| a.dot(b)).sum();
            let mut atw = VectorField::zeros(&g);
            g.second_gradient_vector_t(&w, &mut atw);
            let rhs: f64 = atw
                .0
                .iter()
                .zip(&v.0)
                .map(|(a, b)| a[0] * b[0] + a[1] * b[1])
                .sum();
            assert!((lhs - rhs).abs() < 1e-11 * (1.0 + lhs.abs()));
        }
    }

    #[test]
    fn dirichlet_ops() {
        let g = Grid::new(5, 5, 1.0, 1.0, vec![Side::Left, Side::Bottom]).unwrap();
        // pinned construction: u0 = 0 -> identity
        let y = g
            .apply_dirichlet_deformation(&VectorField::zeros(&g), 0.1)
            .unwrap();
        assert_eq!(y, g.identity_deformation());
        // nonzero datum on the Dirichlet part rejected
        let mut bad = VectorField::zeros(&g);
        bad.0[g.node(0, 2)] = [0.0, 0.1];
        assert!(matches!(
            g.apply_dirichlet_deformation(&bad, 1.0),
            Err(CoreError::InvalidInitialDatum(_))
        ));
        // projection idempotent, local
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let mut v = VectorField(
            (0..g.nnodes())
                .map(|_| [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)])
                .collect(),
        );
        let orig = v.clone();
        g.project_test_space(&mut v);
        let once = v.clone();
        g.project_test_space(&mut v);
        assert_eq!(v, once);
        for n in 0..g.nnodes() {
            if g.is_dirichlet_node(n) {
                assert_eq!(v.0[n], [0.0, 0.0]);
            } else {
                assert_eq!(v.0[n], orig.0[n]);
            }
        }
    }

    #[test]
    fn snapshot_format() {
        let g = Grid::new(3, 3, 1.0, 1.0, vec![Side::Left]).unwrap();
        let vals: Vec<f64> = (0..9).map(|k| k as f64 * 0.1).collect();
        let csv = g.snapshot_csv(&["theta"], &[&vals]).unwrap();
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), "i,j,x,y,theta");
        let first = lines.next().unwrap();
        assert!(first.starts_with("0,0,"));
        assert_eq!(csv.lines().count(), 10);
        // 17 significant digits round-trip
        for line in csv.lines().skip(1) {
            for tok in line.split(',').skip(2) {
                let parsed: f64 = tok.parse().unwrap();
                assert_eq!(fmt17(parsed), tok);
            }
        }
        assert!(g.snapshot_csv(&["a", "b"], &[&vals]).is_err());
    }
}
