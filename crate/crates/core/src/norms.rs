//! Norms for the convergence studies.  Spatial integrals reuse the assembly
//! quadrature (cell rule for gradients, corner rule for nodal values), so
//! norm differences of identical discrete trajectories vanish exactly.
//! Space-time norms act on field sequences sampled at uniform times; the
//! sequences are interpreted as piecewise-affine interpolants on that
//! sampling grid.

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::grid::{Grid, ScalarField, VectorField};
use crate::loading::GAUSS5;

/// Spatial norm selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpaceNorm {
    L1,
    L2,
    Linf,
    H1,
    W1r,
}

/// Temporal norm selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TimeNorm {
    Linf,
    L2,
    Lr,
}

/// Norm specification for a convergence study.  The exponent windows come
/// from the temperature convergence statements in two space dimensions:
/// r ∈ [1, 4/3) for the gradient norm and s ∈ [1, 2) for the space-time
/// Lebesgue norm.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct NormSpec {
    pub space: SpaceNorm,
    pub time: TimeNorm,
    pub r: f64,
    pub s: f64,
}

impl NormSpec {
    pub const R_MAX: f64 = 4.0 / 3.0;
    pub const S_MAX: f64 = 2.0;

    /// Default spec for displacement-type quantities.
    pub fn displacement() -> Self {
        NormSpec {
            space: SpaceNorm::H1,
            time: TimeNorm::Linf,
            r: 1.3,
            s: 1.9,
        }
    }

    /// Default spec for temperature-type quantities.
    pub fn temperature() -> Self {
        NormSpec {
            space: SpaceNorm::W1r,
            time: TimeNorm::Lr,
            r: 1.3,
            s: 1.9,
        }
    }

    /// Exponent windows are open at the top; used whenever the spec drives
    /// a temperature-convergence study.
    pub fn validate_for_temperature(&self) -> Result<()> {
        if !(1.0..Self::R_MAX).contains(&self.r) || !(1.0..Self::S_MAX).contains(&self.s) {
            return Err(CoreError::NormExponentOutOfRange(format!(
                "need r in [1, 4/3) and s in [1, 2), got r = {}, s = {}",
                self.r, self.s
            )));
        }
        Ok(())
    }
}

// ---- spatial norms ------------------------------------------------------

/// Corner-rule integral of a nodal function |v|^p.
fn nodal_lp_pow(g: &Grid, p: f64, vals: impl Fn(usize) -> f64) -> f64 {
    let w4 = g.cell_weight() / 4.0;
    let mut acc = 0.0;
    for cj in 0..g.ny - 1 {
        for ci in 0..g.nx - 1 {
            for n in g.cell_nodes(ci, cj) {
                acc += w4 * vals(n).abs().powf(p);
            }
        }
    }
    acc
}

pub fn l1_scalar(g: &Grid, v: &ScalarField) -> f64 {
    nodal_lp_pow(g, 1.0, |n| v.0[n])
}

pub fn l2_scalar(g: &Grid, v: &ScalarField) -> f64 {
    nodal_lp_pow(g, 2.0, |n| v.0[n]).sqrt()
}

pub fn ls_scalar(g: &Grid, v: &ScalarField, s: f64) -> f64 {
    nodal_lp_pow(g, s, |n| v.0[n]).powf(1.0 / s)
}

pub fn linf_scalar(v: &ScalarField) -> f64 {
    v.0.iter().fold(0.0, |m, x| m.max(x.abs()))
}

pub fn l2_vector(g: &Grid, v: &VectorField) -> f64 {
    nodal_lp_pow(g, 2.0, |n| (v.0[n][0].powi(2) + v.0[n][1].powi(2)).sqrt()).sqrt()
}

/// Squared H1 norm of a vector field: corner-rule L2 part plus cell-rule
/// gradient part.
pub fn h1_vector_sq(g: &Grid, v: &VectorField) -> f64 {
    let l2 = nodal_lp_pow(g, 2.0, |n| (v.0[n][0].powi(2) + v.0[n][1].powi(2)).sqrt());
    let w = g.cell_weight();
    let grad: f64 = g.gradient_vector(v).iter().map(|f| w * f.norm_sq()).sum();
    l2 + grad
}

pub fn h1_vector(g: &Grid, v: &VectorField) -> f64 {
    h1_vector_sq(g, v).sqrt()
}

/// W^{1,r} norm of a scalar field: corner-rule value part plus cell-rule
/// gradient part, combined as (∫|v|^r + ∫|∇v|^r)^{1/r}.
pub fn w1r_scalar(g: &Grid, v: &ScalarField, r: f64) -> f64 {
    let vals = nodal_lp_pow(g, r, |n| v.0[n]);
    let w = g.cell_weight();
    let grads: f64 = g
        .gradient_scalar(&v.0)
        .iter()
        .map(|gr| w * (gr[0].powi(2) + gr[1].powi(2)).sqrt().powf(r))
        .sum();
    (vals + grads).powf(1.0 / r)
}

/// Cell-rule squared L2 norm of the gradient of a vector field.
pub fn grad_l2_sq(g: &Grid, v: &VectorField) -> f64 {
    let w = g.cell_weight();
    g.gradient_vector(v).iter().map(|f| w * f.norm_sq()).sum()
}

// ---- sequence (space-time) norms ---------------------------------------

fn diff_vec(a: &VectorField, b: &VectorField) -> VectorField {
    a.sub(b)
}

fn diff_scalar(a: &ScalarField, b: &ScalarField) -> ScalarField {
    ScalarField(a.0.iter().zip(&b.0).map(|(x, y)| x - y).collect())
}

/// L^inf(I; H1) distance of two trajectories sampled at the same uniform
/// times.  Both interpolants are affine on each sampling slab, so the sup
/// is attained at a sampling node.
pub fn linf_time_h1(g: &Grid, a: &[VectorField], b: &[VectorField]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| h1_vector(g, &diff_vec(x, y)))
        .fold(0.0, f64::max)
}

/// L2(I; H1) norm of the difference of the time derivatives of two affine
/// interpolants on a shared uniform sampling grid with spacing dt.  The
/// derivatives are piecewise constant, so the time integral is exact.
pub fn l2_time_h1_rate(g: &Grid, a: &[VectorField], b: &[VectorField], dt: f64) -> f64 {
    assert_eq!(a.len(), b.len());
    let mut acc = 0.0;
    for k in 1..a.len() {
        let da = a[k].sub(&a[k - 1]);
        let db = b[k].sub(&b[k - 1]);
        let d = da.sub(&db);
        acc += h1_vector_sq(g, &d) / dt;
    }
    acc.sqrt()
}

/// Squared L2(I x Omega) norm of the gradient of the piecewise-constant
/// time derivative of a sampled trajectory; with the run's own sampling
/// this reproduces the ledger's accumulated dissipation quantity.
pub fn grad_rate_l2_sq(g: &Grid, a: &[VectorField], dt: f64) -> f64 {
    let mut acc = 0.0;
    for k in 1..a.len() {
        let d = a[k].sub(&a[k - 1]);
        acc += grad_l2_sq(g, &d) / dt;
    }
    acc
}

/// L^s(I x Omega) distance of two scalar trajectories sampled at the same
/// uniform times, integrating |diff|^s in time with 5-point Gauss per slab
/// (the integrand is piecewise smooth there).
pub fn ls_time_space(g: &Grid, a: &[ScalarField], b: &[ScalarField], dt: f64, s: f64) -> f64 {
    assert_eq!(a.len(), b.len());
    let mut acc = 0.0;
    for k in 1..a.len() {
        let lo = diff_scalar(&a[k - 1], &b[k - 1]);
        let hi = diff_scalar(&a[k], &b[k]);
        for &(xi, wq) in GAUSS5.iter() {
            // map the reference point xi in [-1, 1] to a blend weight
            let t = 0.5 * (xi + 1.0);
            let blend = ScalarField(
                lo.0.iter()
                    .zip(&hi.0)
                    .map(|(p, q)| (1.0 - t) * p + t * q)
                    .collect(),
            );
            acc += 0.5 * dt * wq * nodal_lp_pow(g, s, |n| blend.0[n]);
        }
    }
    acc.powf(1.0 / s)
}
