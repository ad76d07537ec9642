//! The staggered time-incremental scheme: per step, a mechanical energy
//! minimization (quasi-Newton with a determinant feasibility barrier)
//! followed by a convex thermal step (damped Newton), plus the per-run
//! energy ledger and time interpolants.
//!
//! Quadrature convention: strain quantities (F, G) live at cell centers;
//! temperature-dependent bulk integrands are sampled per (cell, corner)
//! pair with weight w/4, which couples the nodal temperature to the cell
//! quadrature without leaving a checkerboard nullspace in the thermal
//! system.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::grid::{BoundaryPart, Grid, ScalarField, VectorField};
use crate::lbfgs::{self, LbfgsOptions};
use crate::loading::{LoadingProgram, SlabLoads};
use crate::material::{MaterialModel, StrainRateData};
use crate::tensor::Mat2;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SchemeConfig {
    /// Strain magnitude, in (0, 1].
    pub eps: f64,
    /// Temperature exponent, in [1, 2].
    pub alpha: f64,
    /// Time step; must evenly divide `t_end`.
    pub tau: f64,
    #[serde(alias = "T")]
    pub t_end: f64,
    /// Boundary heat-transfer coefficient.
    pub kappa: f64,
    /// Override for the dissipation-rate truncation; forced on when
    /// alpha < 2.
    pub use_regularized_xi: Option<bool>,
    pub tol_mech: f64,
    pub tol_therm: f64,
    pub max_iter_mech: usize,
    pub max_iter_therm: usize,
    pub ls_shrink: f64,
    pub ls_c1: f64,
}

impl Default for SchemeConfig {
    fn default() -> Self {
        SchemeConfig {
            eps: 1.0,
            alpha: 2.0,
            tau: 1.0 / 32.0,
            t_end: 0.5,
            kappa: 1.0,
            use_regularized_xi: None,
            tol_mech: 1e-8,
            tol_therm: 1e-8,
            max_iter_mech: 4000,
            max_iter_therm: 60,
            ls_shrink: 0.5,
            ls_c1: 1e-4,
        }
    }
}

impl SchemeConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.eps > 0.0 && self.eps <= 1.0) {
            return Err(CoreError::InvalidConfig(format!(
                "eps must lie in (0, 1], got {}",
                self.eps
            )));
        }
        if !(1.0..=2.0).contains(&self.alpha) {
            return Err(CoreError::AlphaOutOfRange { alpha: self.alpha });
        }
        if !(self.tau > 0.0 && self.t_end > 0.0) {
            return Err(CoreError::InvalidConfig(format!(
                "need tau > 0 and t_end > 0, got tau = {}, t_end = {}",
                self.tau, self.t_end
            )));
        }
        let ratio = self.t_end / self.tau;
        if (ratio - ratio.round()).abs() > 1e-9 * ratio.max(1.0) || ratio.round() < 1.0 {
            return Err(CoreError::InvalidConfig(format!(
                "tau must evenly divide t_end: t_end/tau = {ratio}"
            )));
        }
        if self.kappa < 0.0 {
            return Err(CoreError::InvalidConfig(format!(
                "kappa must be nonnegative, got {}",
                self.kappa
            )));
        }
        if !(self.tol_mech > 0.0 && self.tol_therm > 0.0) {
            return Err(CoreError::InvalidConfig(
                "solver tolerances must be positive".into(),
            ));
        }
        Ok(())
    }

    pub fn nsteps(&self) -> usize {
        (self.t_end / self.tau).round() as usize
    }

    /// Truncated dissipation rate is mandatory below alpha = 2.
    pub fn regularize_xi(&self) -> bool {
        if self.alpha < 2.0 {
            true
        } else {
            self.use_regularized_xi.unwrap_or(false)
        }
    }

    pub fn tol_neg(&self) -> f64 {
        1e-10 * self.eps.powf(self.alpha)
    }
}

/// One row of the per-run ledger.
#[derive(Debug, Clone, Copy)]
pub struct LedgerRow {
    pub k: usize,
    pub t: f64,
    /// Mechanical energy M(y^k).
    pub m: f64,
    /// Internal energy integral.
    pub win: f64,
    /// Total energy M + internal.
    pub e: f64,
    /// Rescaled total energy.
    pub eeps: f64,
    /// Total energy minus instantaneous load work.
    pub f_k: f64,
    /// Accumulated squared strain-rate dissipation.
    pub v_k: f64,
    /// Per-step heat production tau * integral of the (possibly truncated)
    /// dissipation rate.
    pub diss_step: f64,
    pub res_mech: f64,
    pub res_therm: f64,
    /// Minimum temperature before clamping.
    pub min_theta: f64,
    /// Assembled energy-balance residual of the step.
    pub ebal_res: f64,
    /// Boundary heat flux kappa * integral (theta - eps^alpha theta_b).
    pub flux: f64,
    /// Mechanical objective at the accepted minimizer.
    pub obj_new: f64,
    /// Mechanical objective at the competitor y^{k-1}.
    pub obj_competitor: f64,
    /// Set when min_theta dropped below -tol_neg.
    pub nonneg_violated: bool,
}

#[derive(Debug, Clone)]
pub struct Step {
    pub y: VectorField,
    pub theta: ScalarField,
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub steps: Vec<Step>,
    pub ledger: Vec<LedgerRow>,
    pub tau: f64,
    pub t_end: f64,
}

/// Mode of the piecewise time interpolants built on the step sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InterpMode {
    /// Value of the previous grid point on each open slab.
    Left,
    /// Value of the next grid point on each open slab.
    Right,
    /// Piecewise-affine blend.
    Affine,
}

impl RunResult {
    /// Evaluates the chosen interpolant at time t.
    pub fn evaluate(&self, mode: InterpMode, t: f64) -> Result<Step> {
        if t < 0.0 || t > self.t_end + 1e-12 * self.t_end.max(1.0) {
            return Err(CoreError::TimeOutOfRange {
                t,
                t_end: self.t_end,
            });
        }
        let tau = self.tau;
        let kmax = self.steps.len() - 1;
        let s = (t / tau).clamp(0.0, kmax as f64);
        let k_lo = s.floor() as usize;
        let frac = s - k_lo as f64;
        if frac == 0.0 || k_lo == kmax {
            return Ok(self.steps[k_lo.min(kmax)].clone());
        }
        match mode {
            InterpMode::Left => Ok(self.steps[k_lo].clone()),
            InterpMode::Right => Ok(self.steps[k_lo + 1].clone()),
            InterpMode::Affine => {
                let (a, b) = (&self.steps[k_lo], &self.steps[k_lo + 1]);
                let y = VectorField(
                    a.y.0
                        .iter()
                        .zip(&b.y.0)
                        .map(|(p, q)| {
                            [
                                (1.0 - frac) * p[0] + frac * q[0],
                                (1.0 - frac) * p[1] + frac * q[1],
                            ]
                        })
                        .collect(),
                );
                let theta = ScalarField(
                    a.theta
                        .0
                        .iter()
                        .zip(&b.theta.0)
                        .map(|(p, q)| (1.0 - frac) * p + frac * q)
                        .collect(),
                );
                Ok(Step { y, theta })
            }
        }
    }
}

/// Assembly context shared by both sub-steps.
pub struct Scheme<'a> {
    pub grid: &'a Grid,
    pub model: &'a MaterialModel,
    pub cfg: SchemeConfig,
    /// Per-node count of adjacent cells (lumped corner-rule weight is
    /// w/4 times this).
    node_cells: Vec<f64>,
}

fn flatten(v: &VectorField) -> Vec<f64> {
    let mut out = Vec::with_capacity(2 * v.0.len());
    for p in &v.0 {
        out.push(p[0]);
        out.push(p[1]);
    }
    out
}

fn unflatten(x: &[f64]) -> VectorField {
    VectorField(x.chunks_exact(2).map(|c| [c[0], c[1]]).collect())
}

/// Precomputed step data for the mechanical objective.
struct MechContext<'a> {
    f_prev: &'a [Mat2],
    /// Per-cell corner-summed coupling weight (w/4) sum_n w1(theta_prev_n).
    cpl_weight: Vec<f64>,
    /// Constant part of the coupling energy (w0 term).
    cpl_const: f64,
    /// Nodal load covector, includes eps and all quadrature weights.
    load: Vec<[f64; 2]>,
    mask: &'a [bool],
}

impl<'a> Scheme<'a> {
    pub fn new(grid: &'a Grid, model: &'a MaterialModel, cfg: SchemeConfig) -> Result<Scheme<'a>> {
        cfg.validate()?;
        let mut node_cells = vec![0.0; grid.nnodes()];
        for cj in 0..grid.ny - 1 {
            for ci in 0..grid.nx - 1 {
                for n in grid.cell_nodes(ci, cj) {
                    node_cells[n] += 1.0;
                }
            }
        }
        Ok(Scheme {
            grid,
            model,
            cfg,
            node_cells,
        })
    }

    // ---- energies --------------------------------------------------------

    /// Mechanical energy M(y) = integral of W_el + H; errors on det <= 0.
    pub fn mechanical_energy(&self, y: &VectorField) -> Result<f64> {
        let f = self.grid.gradient_vector(y);
        let g2 = self.grid.second_gradient_vector(y)?;
        let w = self.grid.cell_weight();
        let mut m = 0.0;
        for (fc, gc) in f.iter().zip(&g2) {
            m += w * (self.model.elastic_energy(fc)? + self.model.hyper_energy(gc));
        }
        Ok(m)
    }

    /// Internal energy integral with the corner rule.
    pub fn internal_energy_total(&self, f_cells: &[Mat2], theta: &ScalarField) -> f64 {
        let w4 = self.grid.cell_weight() / 4.0;
        let mut acc = 0.0;
        let mut c = 0;
        for cj in 0..self.grid.ny - 1 {
            for ci in 0..self.grid.nx - 1 {
                for n in self.grid.cell_nodes(ci, cj) {
                    acc += w4 * self.model.internal_energy_raw(&f_cells[c], theta.0[n]);
                }
                c += 1;
            }
        }
        acc
    }

    /// Rescaled total energy: M/eps^2 + alpha/(2 eps^2) * integral of
    /// W_in^(2/alpha).
    pub fn rescaled_energy(&self, m: f64, f_cells: &[Mat2], theta: &ScalarField) -> f64 {
        let cfg = &self.cfg;
        let w4 = self.grid.cell_weight() / 4.0;
        let mut acc = 0.0;
        let mut c = 0;
        for cj in 0..self.grid.ny - 1 {
            for ci in 0..self.grid.nx - 1 {
                for n in self.grid.cell_nodes(ci, cj) {
                    let win = self.model.internal_energy_raw(&f_cells[c], theta.0[n]).max(0.0);
                    acc += w4 * win.powf(2.0 / cfg.alpha);
                }
                c += 1;
            }
        }
        (m + 0.5 * cfg.alpha * acc) / (cfg.eps * cfg.eps)
    }

    /// Load pairing <l, v> for nodal loads f (bulk, corner rule) and edge
    /// tractions g (midpoint rule on the Neumann part).
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

    /// Nodal covector of the load pairing, scaled by `scale`.
    fn load_covector(&self, loads: &SlabLoads, scale: f64) -> Vec<[f64; 2]> {
        let w4 = self.grid.cell_weight() / 4.0;
        let mut out = vec![[0.0; 2]; self.grid.nnodes()];
        for n in 0..self.grid.nnodes() {
            let wt = scale * w4 * self.node_cells[n];
            out[n][0] = wt * loads.f.0[n][0];
            out[n][1] = wt * loads.f.0[n][1];
        }
        for (e, gv) in self.grid.edges_of(BoundaryPart::Neumann).zip(&loads.g) {
            let half = 0.5 * scale * e.len;
            for n in [e.a, e.b] {
                out[n][0] += half * gv[0];
                out[n][1] += half * gv[1];
            }
        }
        out
    }

    // ---- mechanical step -------------------------------------------------

    fn mech_context<'b>(
        &self,
        f_prev: &'b [Mat2],
        theta_prev: &ScalarField,
        loads: &SlabLoads,
        mask: &'b [bool],
    ) -> MechContext<'b> {
        let g = self.grid;
        let w4 = g.cell_weight() / 4.0;
        let mut cpl_weight = vec![0.0; g.ncells()];
        let mut cpl_const = 0.0;
        let mut c = 0;
        for cj in 0..g.ny - 1 {
            for ci in 0..g.nx - 1 {
                for n in g.cell_nodes(ci, cj) {
                    let th = theta_prev.0[n];
                    cpl_weight[c] += w4 * w1(self.model, th);
                    cpl_const += w4 * w0(self.model, th);
                }
                c += 1;
            }
        }
        MechContext {
            f_prev,
            cpl_weight,
            cpl_const,
            load: self.load_covector(loads, self.cfg.eps),
            mask,
        }
    }

    /// Objective value and nodal gradient (projected to the test space);
    /// `None` when det(F) <= 0 at some cell.
    fn mech_eval(&self, x: &[f64], ctx: &MechContext) -> Option<(f64, Vec<f64>)> {
        let g = self.grid;
        let w = g.cell_weight();
        let y = unflatten(x);
        let f_cells = g.gradient_vector(&y);
        if f_cells.iter().any(|f| f.det() <= 0.0) {
            return None;
        }
        let g_cells = g.second_gradient_vector(&y).ok()?;

        let mut value = ctx.cpl_const;
        let mut p_cells = Vec::with_capacity(g.ncells());
        let mut s_cells = Vec::with_capacity(g.ncells());
        let inv_tau = 1.0 / self.cfg.tau;
        for c in 0..g.ncells() {
            let fc = &f_cells[c];
            let gc = &g_cells[c];
            // elastic + strain gradient
            value += w * (self.model.elastic_energy(fc).ok()? + self.model.hyper_energy(gc));
            let mut p = self.model.elastic_stress(fc).ok()? * w;
            s_cells.push(self.model.hyper_stress(gc).scale(w));
            // coupling: weight already carries w/4 and the corner sum
            let tr_dev = fc.cauchy_green().trace() - 2.0;
            value += ctx.cpl_weight[c] * tr_dev;
            p = p + *fc * (2.0 * ctx.cpl_weight[c]);
            // viscous (1/tau) R(F_prev, F - F_prev)
            let s = StrainRateData::new(ctx.f_prev[c], *fc - ctx.f_prev[c]);
            value += w * inv_tau * self.model.dissipation_potential(&s, 0.0);
            p = p + self.model.viscous_stress(&s, 0.0) * (w * inv_tau);
            p_cells.push(p);
        }

        let mut grad = VectorField::zeros(g);
        g.gradient_vector_t(&p_cells, &mut grad);
        g.second_gradient_vector_t(&s_cells, &mut grad);
        for n in 0..g.nnodes() {
            value -= ctx.load[n][0] * y.0[n][0] + ctx.load[n][1] * y.0[n][1];
            grad.0[n][0] -= ctx.load[n][0];
            grad.0[n][1] -= ctx.load[n][1];
            if ctx.mask[n] {
                grad.0[n] = [0.0, 0.0];
            }
        }
        Some((value, flatten(&grad)))
    }

    /// Solves the k-th mechanical minimization, warm-started at `y_prev`.
    /// Returns the minimizer, the scaled residual, and the objective values
    /// at the minimizer and the competitor.
    pub fn mechanical_step(
        &self,
        y_prev: &VectorField,
        theta_prev: &ScalarField,
        loads: &SlabLoads,
        k: usize,
    ) -> Result<(VectorField, f64, f64, f64)> {
        self.mechanical_step_masked(y_prev, theta_prev, loads, k, self.grid.dirichlet_mask())
    }

    /// Same, with an explicit fixed-node mask (property tests pin a single
    /// node instead of the Dirichlet side).
    pub fn mechanical_step_masked(
        &self,
        y_prev: &VectorField,
        theta_prev: &ScalarField,
        loads: &SlabLoads,
        k: usize,
        mask: &[bool],
    ) -> Result<(VectorField, f64, f64, f64)> {
        let f_prev = self.grid.gradient_vector(y_prev);
        let ctx = self.mech_context(&f_prev, theta_prev, loads, mask);
        let opts = LbfgsOptions {
            memory: 10,
            max_iter: self.cfg.max_iter_mech,
            grad_tol: self.cfg.tol_mech * self.cfg.eps,
            c1: self.cfg.ls_c1,
            shrink: self.cfg.ls_shrink,
            max_backtracks: 60,
            ..Default::default()
        };
        let x0 = flatten(y_prev);
        let (obj_prev, _) = self
            .mech_eval(&x0, &ctx)
            .ok_or(CoreError::LineSearchFailed { step: k })?;
        let out = lbfgs::minimize(x0, |x| self.mech_eval(x, &ctx), &opts, k)?;
        let res = out.grad_sup / self.cfg.eps;
        Ok((unflatten(&out.x), res, out.value, obj_prev))
    }

    /// Mechanical objective value at an arbitrary admissible candidate
    /// (used by tests and the energy ledger).
    pub fn mech_objective(
        &self,
        y: &VectorField,
        y_prev: &VectorField,
        theta_prev: &ScalarField,
        loads: &SlabLoads,
    ) -> Option<f64> {
        let f_prev = self.grid.gradient_vector(y_prev);
        let ctx = self.mech_context(&f_prev, theta_prev, loads, self.grid.dirichlet_mask());
        self.mech_eval(&flatten(y), &ctx).map(|(v, _)| v)
    }

    /// Projected objective gradient at y (the mechanical EL residual vector).
    fn mech_residual_vec(
        &self,
        y: &VectorField,
        f_prev: &[Mat2],
        theta_prev: &ScalarField,
        loads: &SlabLoads,
    ) -> Option<Vec<f64>> {
        let ctx = self.mech_context(f_prev, theta_prev, loads, self.grid.dirichlet_mask());
        self.mech_eval(&flatten(y), &ctx).map(|(_, g)| g)
    }

    // ---- thermal step ----------------------------------------------------

    /// Per-cell dissipation rate xi (possibly truncated) for the step
    /// y_prev -> y_new.
    pub fn dissipation_rates(&self, f_prev: &[Mat2], f_new: &[Mat2]) -> Vec<f64> {
        let inv_tau = 1.0 / self.cfg.tau;
        f_prev
            .iter()
            .zip(f_new)
            .map(|(fp, fnw)| {
                let s = StrainRateData::new(*fp, (*fnw - *fp) * inv_tau);
                let xi = self.model.dissipation_rate(&s, 0.0);
                if self.cfg.regularize_xi() {
                    self.model
                        .regularized_dissipation_rate(xi, self.cfg.alpha)
                        .expect("alpha validated")
                } else {
                    xi
                }
            })
            .collect()
    }

    /// Constant part of the thermal system: conduction (cell rule, frozen
    /// coefficients) plus the Robin boundary matrix.
    fn thermal_matrix(&self, f_prev: &[Mat2], theta_prev: &ScalarField) -> Result<DMatrix<f64>> {
        let g = self.grid;
        let nn = g.nnodes();
        let w = g.cell_weight();
        let mut a = DMatrix::zeros(nn, nn);
        // conduction: per cell, grad coefficient vectors over the 4 corners
        let mut c = 0;
        for cj in 0..g.ny - 1 {
            for ci in 0..g.nx - 1 {
                let nodes = g.cell_nodes(ci, cj);
                // theta at corner sampling for K is the corner average
                let th = 0.25 * nodes.iter().map(|&n| theta_prev.0[n]).sum::<f64>();
                let kmat = self
                    .model
                    .pulled_back_conductivity(&f_prev[c], th.max(0.0))?;
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
                for (p, &np) in nodes.iter().enumerate() {
                    for (q, &nq) in nodes.iter().enumerate() {
                        let flux = kmat.apply([gx[q], gy[q]]);
                        a[(np, nq)] += w * (gx[p] * flux[0] + gy[p] * flux[1]);
                    }
                }
                c += 1;
            }
        }
        // Robin on the whole boundary
        let kq = self.cfg.kappa * 0.25;
        for e in g.edges_of(BoundaryPart::All) {
            let m = kq * e.len;
            a[(e.a, e.a)] += m;
            a[(e.a, e.b)] += m;
            a[(e.b, e.a)] += m;
            a[(e.b, e.b)] += m;
        }
        Ok(a)
    }

    /// Solves the k-th thermal step.  Returns the new temperature (clamped
    /// to be nonnegative), the scaled residual, and the pre-clamp minimum.
    pub fn thermal_step(
        &self,
        f_prev: &[Mat2],
        f_new: &[Mat2],
        theta_prev: &ScalarField,
        theta_b: f64,
        k: usize,
    ) -> Result<(ScalarField, f64, f64)> {
        let g = self.grid;
        let nn = g.nnodes();
        let w4 = g.cell_weight() / 4.0;
        let tau = self.cfg.tau;
        let eps_al = self.cfg.eps.powf(self.cfg.alpha);

        let xi = self.dissipation_rates(f_prev, f_new);
        let a_const = self.thermal_matrix(f_prev, theta_prev)?;

        // constant nodal right-hand side: previous internal energy, heat
        // source, Robin inflow
        let mut rhs = DVector::zeros(nn);
        let inv_tau = 1.0 / tau;
        let mut c = 0;
        for cj in 0..g.ny - 1 {
            for ci in 0..g.nx - 1 {
                let dtf = (f_new[c] - f_prev[c]) * inv_tau;
                let f_dot_df = f_prev[c].dot(&dtf);
                for n in g.cell_nodes(ci, cj) {
                    let th = theta_prev.0[n];
                    let win_prev = self.model.internal_energy_raw(&f_prev[c], th);
                    let h = 2.0 * w1(self.model, th) * f_dot_df + xi[c];
                    rhs[n] += w4 * (win_prev * inv_tau + h);
                }
                c += 1;
            }
        }
        for e in g.edges_of(BoundaryPart::All) {
            let inflow = 0.5 * self.cfg.kappa * e.len * eps_al * theta_b;
            rhs[e.a] += inflow;
            rhs[e.b] += inflow;
        }

        let residual = |theta: &DVector<f64>| -> DVector<f64> {
            let mut r = &a_const * theta - &rhs;
            let mut c = 0;
            for cj in 0..g.ny - 1 {
                for ci in 0..g.nx - 1 {
                    for n in g.cell_nodes(ci, cj) {
                        r[n] += w4 * inv_tau * self.model.internal_energy_raw(&f_new[c], theta[n]);
                    }
                    c += 1;
                }
            }
            r
        };

        let mut theta = DVector::from_iterator(nn, theta_prev.0.iter().copied());
        let tol_abs = self.cfg.tol_therm * eps_al;
        let mut res_norm = f64::INFINITY;
        let mut converged = false;
        for _ in 0..self.cfg.max_iter_therm {
            let r = residual(&theta);
            res_norm = r.amax();
            if res_norm <= tol_abs {
                converged = true;
                break;
            }
            // Jacobian: nonlinear diagonal + constant matrix
            let mut jac = a_const.clone();
            let mut c = 0;
            for cj in 0..g.ny - 1 {
                for ci in 0..g.nx - 1 {
                    for n in g.cell_nodes(ci, cj) {
                        jac[(n, n)] +=
                            w4 * inv_tau * self.model.internal_energy_dtheta_raw(&f_new[c], theta[n]);
                    }
                    c += 1;
                }
            }
            let chol = jac.cholesky().ok_or_else(|| CoreError::SingularSystem("thermal Jacobian not positive definite".into()))?;
            let delta = chol.solve(&(-&r));
            // damped acceptance on the residual norm
            let mut t = 1.0;
            let mut ok = false;
            for _ in 0..40 {
                let cand = &theta + t * &delta;
                if residual(&cand).amax() <= (1.0 - 0.25 * t) * res_norm {
                    theta = cand;
                    ok = true;
                    break;
                }
                t *= 0.5;
            }
            if !ok {
                return Err(CoreError::NewtonDiverged {
                    step: k,
                    residual: res_norm,
                });
            }
        }
        if !converged {
            let r = residual(&theta);
            res_norm = r.amax();
            if res_norm > tol_abs {
                return Err(CoreError::MaxIterExceeded {
                    step: k,
                    residual: res_norm / eps_al,
                    tol: self.cfg.tol_therm,
                });
            }
        }

        let min_theta = theta.min();
        let clamped = ScalarField(theta.iter().map(|&v| v.max(0.0)).collect());
        Ok((clamped, res_norm / eps_al, min_theta))
    }

    /// Sum of the thermal residual entries at theta (the EL identity tested
    /// with the constant function 1), for the energy-balance ledger column.
    fn thermal_residual_sum(
        &self,
        f_prev: &[Mat2],
        f_new: &[Mat2],
        theta_prev: &ScalarField,
        theta_new: &ScalarField,
        theta_b: f64,
    ) -> Result<f64> {
        let g = self.grid;
        let w4 = g.cell_weight() / 4.0;
        let tau = self.cfg.tau;
        let inv_tau = 1.0 / tau;
        let eps_al = self.cfg.eps.powf(self.cfg.alpha);
        let xi = self.dissipation_rates(f_prev, f_new);
        let mut acc = 0.0;
        let mut c = 0;
        for cj in 0..g.ny - 1 {
            for ci in 0..g.nx - 1 {
                let dtf = (f_new[c] - f_prev[c]) * inv_tau;
                let f_dot_df = f_prev[c].dot(&dtf);
                for n in g.cell_nodes(ci, cj) {
                    let th_old = theta_prev.0[n];
                    let win_new = self.model.internal_energy_raw(&f_new[c], theta_new.0[n]);
                    let win_prev = self.model.internal_energy_raw(&f_prev[c], th_old);
                    let h = 2.0 * w1(self.model, th_old) * f_dot_df + xi[c];
                    acc += w4 * ((win_new - win_prev) * inv_tau - h);
                }
                c += 1;
            }
        }
        // conduction term vanishes against the constant test function;
        // Robin term remains
        for e in g.edges_of(BoundaryPart::All) {
            let mid = 0.5 * (theta_new.0[e.a] + theta_new.0[e.b]);
            acc += self.cfg.kappa * e.len * (mid - eps_al * theta_b);
        }
        Ok(acc)
    }

    /// Boundary heat-flux ledger value kappa * integral (theta - eps^alpha
    /// theta_b) over the whole boundary.
    pub fn boundary_flux(&self, theta: &ScalarField, theta_b: f64) -> f64 {
        let eps_al = self.cfg.eps.powf(self.cfg.alpha);
        let mut acc = 0.0;
        for e in self.grid.edges_of(BoundaryPart::All) {
            let mid = 0.5 * (theta.0[e.a] + theta.0[e.b]);
            acc += self.cfg.kappa * e.len * (mid - eps_al * theta_b);
        }
        acc
    }

    // ---- full run --------------------------------------------------------

    pub fn init_state(&self, u0: &VectorField, mu0: &ScalarField) -> Result<Step> {
        if mu0.0.len() != self.grid.nnodes() {
            return Err(CoreError::ShapeMismatch {
                expected: self.grid.nnodes(),
                got: mu0.0.len(),
            });
        }
        if mu0.min() < 0.0 {
            return Err(CoreError::InvalidInitialDatum(format!(
                "initial rescaled temperature must be nonnegative, min = {}",
                mu0.min()
            )));
        }
        let y = self.grid.apply_dirichlet_deformation(u0, self.cfg.eps)?;
        for f in self.grid.gradient_vector(&y) {
            let det = f.det();
            if det <= 0.0 {
                return Err(CoreError::NonPositiveDeterminant { det });
            }
        }
        let eps_al = self.cfg.eps.powf(self.cfg.alpha);
        let theta = ScalarField(mu0.0.iter().map(|&m| eps_al * m).collect());
        Ok(Step { y, theta })
    }

    pub fn run(
        &self,
        loads: &LoadingProgram,
        u0: &VectorField,
        mu0: &ScalarField,
    ) -> Result<RunResult> {
        loads.validate(self.cfg.t_end)?;
        let init = self.init_state(u0, mu0)?;
        let id = self.grid.identity_deformation();
        let mut steps = vec![init];
        let mut ledger = Vec::new();
        let mut v_k = 0.0;

        // k = 0 row
        {
            let s = &steps[0];
            let f_cells = self.grid.gradient_vector(&s.y);
            let m = self.mechanical_energy(&s.y)?;
            let win = self.internal_energy_total(&f_cells, &s.theta);
            let l0 = loads.instant_loads(self.grid, 0.0);
            let f_k = m + win - self.cfg.eps * self.load_pairing(&l0, &s.y.sub(&id));
            ledger.push(LedgerRow {
                k: 0,
                t: 0.0,
                m,
                win,
                e: m + win,
                eeps: self.rescaled_energy(m, &f_cells, &s.theta),
                f_k,
                v_k: 0.0,
                diss_step: 0.0,
                res_mech: 0.0,
                res_therm: 0.0,
                min_theta: s.theta.min(),
                ebal_res: 0.0,
                flux: self.boundary_flux(&s.theta, l0.theta_b),
                obj_new: 0.0,
                obj_competitor: 0.0,
                nonneg_violated: false,
            });
        }

        let w = self.grid.cell_weight();
        for k in 1..=self.cfg.nsteps() {
            let slab = loads.slab_loads(self.grid, k, self.cfg.tau);
            let (y_prev, theta_prev) = {
                let s = steps.last().unwrap();
                (s.y.clone(), s.theta.clone())
            };
            let f_prev = self.grid.gradient_vector(&y_prev);

            let (y_new, res_mech, obj_new, obj_competitor) =
                self.mechanical_step(&y_prev, &theta_prev, &slab, k)?;
            let f_new = self.grid.gradient_vector(&y_new);

            let (theta_new, res_therm, min_theta) =
                self.thermal_step(&f_prev, &f_new, &theta_prev, slab.theta_b, k)?;

            // ledger quantities
            let m = self.mechanical_energy(&y_new)?;
            let win = self.internal_energy_total(&f_new, &theta_new);
            let inv_tau = 1.0 / self.cfg.tau;
            let mut rate_sq = 0.0;
            for (fp, fnw) in f_prev.iter().zip(&f_new) {
                let d = (*fnw - *fp) * inv_tau;
                rate_sq += w * d.norm_sq();
            }
            v_k += self.cfg.tau * rate_sq;
            let xi = self.dissipation_rates(&f_prev, &f_new);
            let diss_step = self.cfg.tau * w * xi.iter().sum::<f64>();

            // energy balance: mechanical EL tested with the velocity plus
            // thermal EL tested with 1, both scaled by tau
            let dt_y = VectorField(
                y_new
                    .0
                    .iter()
                    .zip(&y_prev.0)
                    .map(|(a, b)| [(a[0] - b[0]) * inv_tau, (a[1] - b[1]) * inv_tau])
                    .collect(),
            );
            let mech_r = self
                .mech_residual_vec(&y_new, &f_prev, &theta_prev, &slab)
                .ok_or(CoreError::NonPositiveDeterminant { det: 0.0 })?;
            let mech_pair: f64 = mech_r
                .chunks_exact(2)
                .zip(&dt_y.0)
                .map(|(r, v)| r[0] * v[0] + r[1] * v[1])
                .sum();
            let therm_sum = self.thermal_residual_sum(
                &f_prev,
                &f_new,
                &theta_prev,
                &theta_new,
                slab.theta_b,
            )?;
            let ebal_res = (self.cfg.tau * (mech_pair + therm_sum)).abs();

            let t = k as f64 * self.cfg.tau;
            let linst = loads.instant_loads(self.grid, t);
            let f_k = m + win - self.cfg.eps * self.load_pairing(&linst, &y_new.sub(&id));

            ledger.push(LedgerRow {
                k,
                t,
                m,
                win,
                e: m + win,
                eeps: self.rescaled_energy(m, &f_new, &theta_new),
                f_k,
                v_k,
                diss_step,
                res_mech,
                res_therm,
                min_theta,
                ebal_res,
                flux: self.boundary_flux(&theta_new, slab.theta_b),
                obj_new,
                obj_competitor,
                nonneg_violated: min_theta < -self.cfg.tol_neg(),
            });
            steps.push(Step {
                y: y_new,
                theta: theta_new,
            });
        }

        Ok(RunResult {
            steps,
            ledger,
            tau: self.cfg.tau,
            t_end: self.cfg.t_end,
        })
    }
}

fn w1(model: &MaterialModel, theta: f64) -> f64 {
    -model.params.beta * theta / (1.0 + theta)
}

fn w0(model: &MaterialModel, theta: f64) -> f64 {
    if theta <= 0.0 {
        0.0
    } else {
        -model.params.c_v * theta * (theta.ln() - 1.0)
    }
}
