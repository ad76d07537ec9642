//! Time-discrete linearized thermoviscoelasticity: each step is a pair of
//! symmetric positive-definite linear solves on the same spatial
//! discretization as the nonlinear scheme (cell-center strains, corner-rule
//! temperature coupling).  Both system matrices are constant in k, so they
//! are assembled and factored once per run.
//!
//! The rescaled displacement u vanishes on the Dirichlet part of the
//! boundary and the rescaled temperature mu is a free nodal field; neither
//! epsilon nor the nonlinear constitutive law enters, only the linearized
//! tensors of the material module.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{CoreError, Result};
use crate::grid::{BoundaryPart, Grid, ScalarField, VectorField};
use crate::loading::{LoadingProgram, SlabLoads};
use crate::material::{LinearizedTensors, MaterialModel};
use crate::scheme::SchemeConfig;
use crate::tensor::Mat2;

/// One row of the linear-run ledger.
#[derive(Debug, Clone, Copy)]
pub struct LinearLedgerRow {
    pub k: usize,
    pub t: f64,
    /// Quadratic strain energy 1/2 * integral C_W e(u):e(u).
    pub elin: f64,
    /// Per-step viscous dissipation tau * integral C_D e(du):e(du).
    pub diss_step: f64,
    /// Heat content integral c_V_bar * mu.
    pub mu_mass: f64,
    pub min_mu: f64,
    pub res_mech: f64,
    pub res_therm: f64,
}

#[derive(Debug, Clone)]
pub struct LinearStep {
    pub u: VectorField,
    pub mu: ScalarField,
}

#[derive(Debug, Clone)]
pub struct LinearRunResult {
    pub steps: Vec<LinearStep>,
    pub ledger: Vec<LinearLedgerRow>,
    pub tau: f64,
    pub t_end: f64,
}

impl LinearRunResult {
    /// Piecewise-affine time interpolant of the step sequence.
    pub fn evaluate_affine(&self, t: f64) -> Result<LinearStep> {
        if t < 0.0 || t > self.t_end + 1e-12 * self.t_end.max(1.0) {
            return Err(CoreError::TimeOutOfRange {
                t,
                t_end: self.t_end,
            });
        }
        let kmax = self.steps.len() - 1;
        let s = (t / self.tau).clamp(0.0, kmax as f64);
        let k_lo = s.floor() as usize;
        let frac = s - k_lo as f64;
        if frac == 0.0 || k_lo == kmax {
            return Ok(self.steps[k_lo.min(kmax)].clone());
        }
        let (a, b) = (&self.steps[k_lo], &self.steps[k_lo + 1]);
        let u = VectorField(
            a.u.0
                .iter()
                .zip(&b.u.0)
                .map(|(p, q)| {
                    [
                        (1.0 - frac) * p[0] + frac * q[0],
                        (1.0 - frac) * p[1] + frac * q[1],
                    ]
                })
                .collect(),
        );
        let mu = ScalarField(
            a.mu.0
                .iter()
                .zip(&b.mu.0)
                .map(|(p, q)| (1.0 - frac) * p + frac * q)
                .collect(),
        );
        Ok(LinearStep { u, mu })
    }
}

/// Assembled linearized scheme with both factorizations cached.
pub struct LinearScheme<'a> {
    pub grid: &'a Grid,
    pub tensors: LinearizedTensors,
    pub cfg: SchemeConfig,
    /// Free (non-Dirichlet) nodes in grid order.
    free: Vec<usize>,
    node_cells: Vec<f64>,
    /// Lumped corner-rule heat-capacity weight per node: c_V_bar * w/4
    /// times the number of adjacent cells.
    mass_diag: Vec<f64>,
    mech_mat: DMatrix<f64>,
    mech_chol: Cholesky<f64, Dyn>,
    therm_mat: DMatrix<f64>,
    therm_chol: Cholesky<f64, Dyn>,
}

/// Cell-center gradient stencil coefficients over the corner order
/// [n00, n10, n01, n11].
fn stencil(g: &Grid) -> ([f64; 4], [f64; 4]) {
    let gx = [
        -1.0 / (2.0 * g.hx),
        1.0 / (2.0 * g.hx),
        -1.0 / (2.0 * g.hx),
        1.0 / (2.0 * g.hx),
    ];
    let gy = [
        -1.0 / (2.0 * g.hy),
        -1.0 / (2.0 * g.hy),
        1.0 / (2.0 * g.hy),
        1.0 / (2.0 * g.hy),
    ];
    (gx, gy)
}

/// Gradient of the nodal basis function (node slot p, component i).
fn basis_grad(gx: &[f64; 4], gy: &[f64; 4], p: usize, comp: usize) -> Mat2 {
    let mut m = Mat2::ZERO;
    m.0[comp][0] = gx[p];
    m.0[comp][1] = gy[p];
    m
}

impl<'a> LinearScheme<'a> {
    pub fn new(grid: &'a Grid, model: &MaterialModel, cfg: SchemeConfig) -> Result<Self> {
        cfg.validate()?;
        let tensors = model.linearized_tensors(cfg.alpha)?;
        let nn = grid.nnodes();

        let mut free = Vec::new();
        let mut fidx = vec![None; nn];
        for n in 0..nn {
            if !grid.is_dirichlet_node(n) {
                fidx[n] = Some(free.len());
                free.push(n);
            }
        }
        let mut node_cells = vec![0.0; nn];
        for cj in 0..grid.ny - 1 {
            for ci in 0..grid.nx - 1 {
                for n in grid.cell_nodes(ci, cj) {
                    node_cells[n] += 1.0;
                }
            }
        }
        let w4 = grid.cell_weight() / 4.0;
        let mass_diag: Vec<f64> = node_cells
            .iter()
            .map(|&c| tensors.c_v_bar * w4 * c)
            .collect();

        let mech_mat = assemble_mech(grid, &tensors, cfg.tau, &fidx, free.len());
        let mech_chol = Cholesky::new(mech_mat.clone()).ok_or_else(|| {
            CoreError::SingularSystem("linear mechanical system not positive definite".into())
        })?;
        let therm_mat = assemble_therm(grid, &tensors, cfg.tau, cfg.kappa, &mass_diag);
        let therm_chol = Cholesky::new(therm_mat.clone()).ok_or_else(|| {
            CoreError::SingularSystem("linear thermal system not positive definite".into())
        })?;

        Ok(LinearScheme {
            grid,
            tensors,
            cfg,
            free,
            node_cells,
            mass_diag,
            mech_mat,
            mech_chol,
            therm_mat,
            therm_chol,
        })
    }

    pub fn mech_matrix(&self) -> &DMatrix<f64> {
        &self.mech_mat
    }

    pub fn therm_matrix(&self) -> &DMatrix<f64> {
        &self.therm_mat
    }

    /// Symmetrized cell-center strains e(u).
    fn strains(&self, u: &VectorField) -> Vec<Mat2> {
        self.grid
            .gradient_vector(u)
            .into_iter()
            .map(|f| f.sym())
            .collect()
    }

    /// 1/2 * integral C_W e(u):e(u).
    pub fn quadratic_energy(&self, u: &VectorField) -> f64 {
        let w = self.grid.cell_weight();
        self.strains(u)
            .iter()
            .map(|e| 0.5 * w * self.tensors.cw.apply(e).dot(e))
            .sum()
    }

    /// integral C_D e(v):e(v).
    pub fn viscous_quadratic(&self, v: &VectorField) -> f64 {
        let w = self.grid.cell_weight();
        self.strains(v)
            .iter()
            .map(|e| w * self.tensors.cd.apply(e).dot(e))
            .sum()
    }

    /// Corner-rule integral of mu_prev B^(alpha) : grad v.
    pub fn coupling_work(&self, mu: &ScalarField, v: &VectorField) -> f64 {
        if self.cfg.alpha != 1.0 {
            return 0.0;
        }
        let g = self.grid;
        let w4 = g.cell_weight() / 4.0;
        let grads = g.gradient_vector(v);
        let mut acc = 0.0;
        let mut c = 0;
        for cj in 0..g.ny - 1 {
            for ci in 0..g.nx - 1 {
                let mu_sum: f64 = g.cell_nodes(ci, cj).iter().map(|&n| mu.0[n]).sum();
                acc += w4 * mu_sum * self.tensors.b_alpha.dot(&grads[c]);
                c += 1;
            }
        }
        acc
    }

    /// <l^k, v> with corner-rule body weights and midpoint traction.
    pub fn load_pairing(&self, loads: &SlabLoads, v: &VectorField) -> f64 {
        let w4 = self.grid.cell_weight() / 4.0;
        let mut acc = 0.0;
        for n in 0..self.grid.nnodes() {
            let wt = w4 * self.node_cells[n];
            acc += wt * (loads.f.0[n][0] * v.0[n][0] + loads.f.0[n][1] * v.0[n][1]);
        }
        for (e, gv) in self.grid.edges_of(BoundaryPart::Neumann).zip(&loads.g) {
            let mid = [
                0.5 * (v.0[e.a][0] + v.0[e.b][0]),
                0.5 * (v.0[e.a][1] + v.0[e.b][1]),
            ];
            acc += e.len * (gv[0] * mid[0] + gv[1] * mid[1]);
        }
        acc
    }

    /// Heat content integral c_V_bar * mu (corner rule).
    pub fn mu_mass(&self, mu: &ScalarField) -> f64 {
        self.mass_diag
            .iter()
            .zip(&mu.0)
            .map(|(m, v)| m * v)
            .sum()
    }

    /// Solves the k-th mechanical step; returns u^k and the relative
    /// residual of the linear solve.
    pub fn mechanical_step(
        &self,
        u_prev: &VectorField,
        mu_prev: &ScalarField,
        loads: &SlabLoads,
    ) -> Result<(VectorField, f64)> {
        let g = self.grid;
        let w = g.cell_weight();
        let inv_tau = 1.0 / self.cfg.tau;
        let nf = self.free.len();

        // nodal covector of the right-hand side, then restricted to free dofs
        let mut rhs_nodes = VectorField::zeros(g);

        // (C_D / tau) e(u^{k-1}) : e(z), scattered through the adjoint
        // cell-gradient; C_D maps into symmetric matrices so e(z) may be
        // replaced by grad z.
        let coefs: Vec<Mat2> = self
            .strains(u_prev)
            .iter()
            .map(|e| self.tensors.cd.apply(e) * (w * inv_tau))
            .collect();
        g.gradient_vector_t(&coefs, &mut rhs_nodes);

        // - mu^{k-1} B^(alpha) : grad z (corner rule); skipped entirely when
        // the expansion matrix vanishes so the step provably never reads mu
        if self.cfg.alpha == 1.0 {
            let w4 = w / 4.0;
            let mut bcoefs = Vec::with_capacity(g.ncells());
            for cj in 0..g.ny - 1 {
                for ci in 0..g.nx - 1 {
                    let mu_sum: f64 = g.cell_nodes(ci, cj).iter().map(|&n| mu_prev.0[n]).sum();
                    bcoefs.push(self.tensors.b_alpha * (-w4 * mu_sum));
                }
            }
            g.gradient_vector_t(&bcoefs, &mut rhs_nodes);
        }

        // + <l^k, z>
        let w4 = w / 4.0;
        for n in 0..g.nnodes() {
            let wt = w4 * self.node_cells[n];
            rhs_nodes.0[n][0] += wt * loads.f.0[n][0];
            rhs_nodes.0[n][1] += wt * loads.f.0[n][1];
        }
        for (e, gv) in g.edges_of(BoundaryPart::Neumann).zip(&loads.g) {
            let half = 0.5 * e.len;
            for n in [e.a, e.b] {
                rhs_nodes.0[n][0] += half * gv[0];
                rhs_nodes.0[n][1] += half * gv[1];
            }
        }

        let mut b = DVector::zeros(2 * nf);
        for (fi, &n) in self.free.iter().enumerate() {
            b[2 * fi] = rhs_nodes.0[n][0];
            b[2 * fi + 1] = rhs_nodes.0[n][1];
        }
        let x = self.mech_chol.solve(&b);
        let res = relative_residual(&self.mech_mat, &x, &b);

        let mut u = VectorField::zeros(g);
        for (fi, &n) in self.free.iter().enumerate() {
            u.0[n] = [x[2 * fi], x[2 * fi + 1]];
        }
        Ok((u, res))
    }

    /// Solves the k-th thermal step; returns mu^k (not clamped), the
    /// relative residual, and min mu^k.
    pub fn thermal_step(
        &self,
        u_prev: &VectorField,
        u_new: &VectorField,
        mu_prev: &ScalarField,
        theta_b: f64,
    ) -> Result<(ScalarField, f64, f64)> {
        let g = self.grid;
        let nn = g.nnodes();
        let inv_tau = 1.0 / self.cfg.tau;

        let mut b = DVector::zeros(nn);
        for n in 0..nn {
            b[n] = self.mass_diag[n] * inv_tau * mu_prev.0[n];
        }
        // dissipative heating source; present only at alpha = 2 so the step
        // provably never reads u otherwise
        if self.cfg.alpha == 2.0 {
            let w4 = g.cell_weight() / 4.0;
            let mut c = 0;
            for cj in 0..g.ny - 1 {
                for ci in 0..g.nx - 1 {
                    let nodes = g.cell_nodes(ci, cj);
                    let mut dgrad = Mat2::ZERO;
                    let (gx, gy) = stencil(g);
                    for (p, &n) in nodes.iter().enumerate() {
                        for comp in 0..2 {
                            let d = (u_new.0[n][comp] - u_prev.0[n][comp]) * inv_tau;
                            dgrad.0[comp][0] += gx[p] * d;
                            dgrad.0[comp][1] += gy[p] * d;
                        }
                    }
                    let e = dgrad.sym();
                    let s = self.tensors.cd_alpha.apply(&e).dot(&e);
                    for &n in &nodes {
                        b[n] += w4 * s;
                    }
                    c += 1;
                }
            }
            let _ = c;
        }
        // Robin inflow kappa theta_b
        let kh = 0.5 * self.cfg.kappa * theta_b;
        for e in g.edges_of(BoundaryPart::All) {
            b[e.a] += kh * e.len;
            b[e.b] += kh * e.len;
        }

        let x = self.therm_chol.solve(&b);
        let res = relative_residual(&self.therm_mat, &x, &b);
        let mu = ScalarField(x.iter().copied().collect());
        let min_mu = mu.min();
        Ok((mu, res, min_mu))
    }

    /// Runs the full staggered linear scheme.
    pub fn run(
        &self,
        loads: &LoadingProgram,
        u0: &VectorField,
        mu0: &ScalarField,
    ) -> Result<LinearRunResult> {
        let g = self.grid;
        for n in 0..g.nnodes() {
            if g.is_dirichlet_node(n) && (u0.0[n][0] != 0.0 || u0.0[n][1] != 0.0) {
                return Err(CoreError::InvalidInitialDatum(
                    "initial displacement must vanish on the Dirichlet boundary".into(),
                ));
            }
        }
        if mu0.min() < 0.0 {
            return Err(CoreError::InvalidInitialDatum(format!(
                "initial rescaled temperature must be nonnegative, min = {}",
                mu0.min()
            )));
        }
        loads.validate(self.cfg.t_end)?;

        let tau = self.cfg.tau;
        let nsteps = self.cfg.nsteps();
        let mut steps = Vec::with_capacity(nsteps + 1);
        let mut ledger = Vec::with_capacity(nsteps + 1);
        steps.push(LinearStep {
            u: u0.clone(),
            mu: mu0.clone(),
        });
        ledger.push(LinearLedgerRow {
            k: 0,
            t: 0.0,
            elin: self.quadratic_energy(u0),
            diss_step: 0.0,
            mu_mass: self.mu_mass(mu0),
            min_mu: mu0.min(),
            res_mech: 0.0,
            res_therm: 0.0,
        });

        for k in 1..=nsteps {
            let slab = loads.slab_loads(g, k, tau);
            let prev = steps.last().unwrap();
            let (u, res_mech) = self.mechanical_step(&prev.u, &prev.mu, &slab)?;
            let (mu, res_therm, min_mu) =
                self.thermal_step(&prev.u, &u, &prev.mu, slab.theta_b)?;

            let du = u.sub(&prev.u);
            let diss_step = self.viscous_quadratic(&du) / tau;
            ledger.push(LinearLedgerRow {
                k,
                t: k as f64 * tau,
                elin: self.quadratic_energy(&u),
                diss_step,
                mu_mass: self.mu_mass(&mu),
                min_mu,
                res_mech,
                res_therm,
            });
            steps.push(LinearStep { u, mu });
        }
        Ok(LinearRunResult {
            steps,
            ledger,
            tau,
            t_end: self.cfg.t_end,
        })
    }
}

/// Mechanical bilinear form (C_W + C_D/tau) e(u):e(z) on free dofs, cell
/// rule, dof order [u_x, u_y] per free node.
fn assemble_mech(
    g: &Grid,
    tensors: &LinearizedTensors,
    tau: f64,
    fidx: &[Option<usize>],
    nf: usize,
) -> DMatrix<f64> {
    let w = g.cell_weight();
    let inv_tau = 1.0 / tau;
    let (gx, gy) = stencil(g);
    let mut a = DMatrix::zeros(2 * nf, 2 * nf);
    for cj in 0..g.ny - 1 {
        for ci in 0..g.nx - 1 {
            let nodes = g.cell_nodes(ci, cj);
            // precompute stresses of the 8 local basis strains
            let mut stress = [[Mat2::ZERO; 2]; 4];
            for p in 0..4 {
                for comp in 0..2 {
                    let e = basis_grad(&gx, &gy, p, comp).sym();
                    stress[p][comp] =
                        tensors.cw.apply(&e) + tensors.cd.apply(&e) * inv_tau;
                }
            }
            for (p, &np) in nodes.iter().enumerate() {
                let Some(fp) = fidx[np] else { continue };
                for (q, &nq) in nodes.iter().enumerate() {
                    let Some(fq) = fidx[nq] else { continue };
                    for ci_ in 0..2 {
                        for cj_ in 0..2 {
                            let gz = basis_grad(&gx, &gy, p, ci_);
                            a[(2 * fp + ci_, 2 * fq + cj_)] +=
                                w * stress[q][cj_].dot(&gz);
                        }
                    }
                }
            }
        }
    }
    a
}

/// Thermal system matrix: lumped c_V_bar/tau mass + K_0 conduction (cell
/// rule) + Robin boundary mass.
fn assemble_therm(
    g: &Grid,
    tensors: &LinearizedTensors,
    tau: f64,
    kappa: f64,
    mass_diag: &[f64],
) -> DMatrix<f64> {
    let nn = g.nnodes();
    let w = g.cell_weight();
    let inv_tau = 1.0 / tau;
    let (gx, gy) = stencil(g);
    let mut a = DMatrix::zeros(nn, nn);
    for n in 0..nn {
        a[(n, n)] += mass_diag[n] * inv_tau;
    }
    for cj in 0..g.ny - 1 {
        for ci in 0..g.nx - 1 {
            let nodes = g.cell_nodes(ci, cj);
            for (p, &np) in nodes.iter().enumerate() {
                for (q, &nq) in nodes.iter().enumerate() {
                    let flux = tensors.k0.apply([gx[q], gy[q]]);
                    a[(np, nq)] += w * (gx[p] * flux[0] + gy[p] * flux[1]);
                }
            }
        }
    }
    let kq = kappa * 0.25;
    for e in g.edges_of(BoundaryPart::All) {
        let m = kq * e.len;
        a[(e.a, e.a)] += m;
        a[(e.a, e.b)] += m;
        a[(e.b, e.a)] += m;
        a[(e.b, e.b)] += m;
    }
    a
}

fn relative_residual(a: &DMatrix<f64>, x: &DVector<f64>, b: &DVector<f64>) -> f64 {
    let bn = b.norm();
    if bn == 0.0 {
        return 0.0;
    }
    (a * x - b).norm() / bn
}
