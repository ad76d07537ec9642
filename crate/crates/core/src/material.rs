//! Constitutive laws: stored elastic energy, strain-gradient term, thermal
//! coupling, Kelvin-Voigt dissipation, pulled-back Fourier conductivity, and
//! the small-strain tensors derived from them.
//!
//! The reference model is
//!   W_el(F)  = a1 |F^T F - Id|^2 + a2 (J - 1)^2 + a3 (J^-q + q J - (q+1)),
//!   H(G)     = c_h |G|^p,
//!   W_cpl(F, th) = w0(th) + w1(th) tr(F^T F - Id),
//!       w0(th) = -c_v th (log th - 1),  w1(th) = -beta th / (1 + th),
//!   R(F, Fdot, th) = (eta/4) |Cdot|^2,  K(x, th) = k0 Id,
//! which satisfies the constitutive assumption battery checked by
//! `assumption_report` (frame indifference, coercivity, growth and
//! eigenvalue bounds with constants c0 <= C0) on the declared validity
//! region near the identity.

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::tensor::{Mat2, Tens3, Tens4};

pub const DIM: f64 = 2.0;

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MaterialParams {
    /// Stiffness of the |C - Id|^2 term.
    pub a1: f64,
    /// Volumetric stiffness of the (J - 1)^2 term.
    pub a2: f64,
    /// Stiffness of the determinant barrier J^-q + qJ - (q+1).
    pub a3: f64,
    /// Barrier exponent, integer >= 4.
    pub q: u32,
    /// Strain-gradient stiffness.
    pub c_h: f64,
    /// Strain-gradient exponent, > 2.
    pub p: f64,
    /// Heat capacity at the natural state.
    pub c_v: f64,
    /// Thermo-mechanical coupling strength.
    pub beta: f64,
    /// Viscosity.
    pub eta: f64,
    /// Heat conductivity.
    pub k0: f64,
    /// Lower assumption constant.
    pub c0: f64,
    /// Upper assumption constant, >= c0 (d+1).
    #[serde(rename = "C0")]
    pub c0_upper: f64,
}

impl Default for MaterialParams {
    fn default() -> Self {
        MaterialParams {
            a1: 1.0,
            a2: 1.0,
            a3: 1.0,
            q: 4,
            c_h: 0.01,
            p: 4.0,
            c_v: 1.0,
            beta: 0.1,
            eta: 1.0,
            k0: 1.0,
            c0: 1e-3,
            c0_upper: 10.0,
        }
    }
}

/// Validity region for the coupling bounds; default near-identity box.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ValidityRegion {
    /// Max |F - Id| (Frobenius).
    pub strain_radius: f64,
    /// Max temperature.
    pub theta_max: f64,
}

impl Default for ValidityRegion {
    fn default() -> Self {
        ValidityRegion {
            strain_radius: 0.5,
            theta_max: 10.0,
        }
    }
}

/// Strain-rate bundle: old gradient F, difference quotient Fdot, and the
/// induced rate Cdot = Fdot^T F + F^T Fdot (exactly symmetric).
#[derive(Debug, Clone, Copy)]
pub struct StrainRateData {
    pub f: Mat2,
    pub fdot: Mat2,
    pub cdot: Mat2,
}

impl StrainRateData {
    pub fn new(f: Mat2, fdot: Mat2) -> StrainRateData {
        let a = &fdot.0;
        let b = &f.0;
        // entry (i,j): sum_k fdot[k][i] f[k][j] + f[k][i] fdot[k][j]
        let mut c = [[0.0; 2]; 2];
        for i in 0..2 {
            for j in i..2 {
                let mut s = 0.0;
                for k in 0..2 {
                    s += a[k][i] * b[k][j] + b[k][i] * a[k][j];
                }
                c[i][j] = s;
                c[j][i] = s;
            }
        }
        StrainRateData {
            f,
            fdot,
            cdot: Mat2(c),
        }
    }
}

/// Small-strain coefficient bundle obtained at the natural state.
#[derive(Debug, Clone, Copy)]
pub struct LinearizedTensors {
    /// Elasticity tensor (second derivative of W_el at the identity).
    pub cw: Tens4,
    /// Viscosity tensor 4 D(Id, 0).
    pub cd: Tens4,
    /// Thermal expansion matrix; nonzero only at alpha = 1.
    pub b_alpha: Mat2,
    /// Dissipative-heating tensor; equal to `cd` only at alpha = 2.
    pub cd_alpha: Tens4,
    /// Conductivity at the natural state.
    pub k0: Mat2,
    /// Heat capacity at the natural state.
    pub c_v_bar: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct MaterialModel {
    pub params: MaterialParams,
    pub validity: ValidityRegion,
}

fn check_det(f: &Mat2) -> Result<f64> {
    let det = f.det();
    if det <= 0.0 {
        return Err(CoreError::NonPositiveDeterminant { det });
    }
    Ok(det)
}

fn check_theta(theta: f64) -> Result<()> {
    if theta < 0.0 {
        return Err(CoreError::NegativeTemperature { theta });
    }
    Ok(())
}

impl MaterialModel {
    pub fn new(params: MaterialParams) -> Result<MaterialModel> {
        Self::with_validity(params, ValidityRegion::default())
    }

    pub fn with_validity(params: MaterialParams, validity: ValidityRegion) -> Result<MaterialModel> {
        let p = &params;
        let bad = |msg: String| Err(CoreError::InvalidMaterial(msg));
        if !(p.p > DIM) {
            return bad(format!("growth exponent p = {} must exceed d = 2 (assumption H.3/W.3)", p.p));
        }
        let q_min = p.p * DIM / (p.p - DIM);
        if (p.q as f64) < q_min {
            return bad(format!(
                "barrier exponent q = {} violates q >= p*d/(p-d) = {} (assumption W.3)",
                p.q, q_min
            ));
        }
        for (name, v) in [
            ("a1", p.a1),
            ("a2", p.a2),
            ("a3", p.a3),
            ("c_h", p.c_h),
            ("c_v", p.c_v),
            ("eta", p.eta),
            ("k0", p.k0),
        ] {
            if !(v > 0.0) {
                return bad(format!("parameter {name} = {v} must be positive"));
            }
        }
        if p.beta < 0.0 {
            return bad(format!("beta = {} must be nonnegative", p.beta));
        }
        if !(p.c0 > 0.0 && p.c0 < p.c0_upper) {
            return bad(format!("need 0 < c0 < C0, got c0 = {}, C0 = {}", p.c0, p.c0_upper));
        }
        if p.c0_upper < p.c0 * (DIM + 1.0) {
            return bad(format!(
                "need C0 >= c0 (d+1): C0 = {} < {}",
                p.c0_upper,
                p.c0 * (DIM + 1.0)
            ));
        }
        Ok(MaterialModel { params, validity })
    }

    // ---- elastic part -------------------------------------------------

    pub fn elastic_energy(&self, f: &Mat2) -> Result<f64> {
        let j = check_det(f)?;
        let p = &self.params;
        let c = f.cauchy_green();
        let dev = c - Mat2::ID;
        let q = p.q as f64;
        let barrier = j.powi(-(p.q as i32)) + q * j - (q + 1.0);
        Ok(p.a1 * dev.norm_sq() + p.a2 * (j - 1.0) * (j - 1.0) + p.a3 * barrier)
    }

    /// First Piola-Kirchhoff stress of the elastic part.
    pub fn elastic_stress(&self, f: &Mat2) -> Result<Mat2> {
        let j = check_det(f)?;
        let p = &self.params;
        let c = f.cauchy_green();
        let dev = c - Mat2::ID;
        let q = p.q as f64;
        // dJ/dF = J F^{-T}
        let cof = f.inverse().transpose() * j;
        let d_vol = 2.0 * p.a2 * (j - 1.0) + p.a3 * q * (1.0 - j.powi(-(p.q as i32) - 1));
        Ok(f.matmul(&dev) * (4.0 * p.a1) + cof * d_vol)
    }

    /// Second derivative of W_el at the identity as a fourth-order tensor.
    pub fn elastic_hessian_at_identity(&self) -> Tens4 {
        let p = &self.params;
        let q = p.q as f64;
        // E -> 8 a1 sym(E) + (2 a2 + a3 q (q+1)) tr(E) Id
        Tens4::isotropic(8.0 * p.a1, 2.0 * p.a2 + p.a3 * q * (q + 1.0))
    }

    // ---- strain-gradient part -----------------------------------------

    pub fn hyper_energy(&self, g: &Tens3) -> f64 {
        self.params.c_h * g.norm_sq().powf(self.params.p / 2.0)
    }

    pub fn hyper_stress(&self, g: &Tens3) -> Tens3 {
        let nsq = g.norm_sq();
        if nsq == 0.0 {
            return Tens3::ZERO;
        }
        let p = self.params.p;
        g.scale(self.params.c_h * p * nsq.powf(p / 2.0 - 1.0))
    }

    // ---- thermal coupling ---------------------------------------------

    fn w0(&self, theta: f64) -> f64 {
        if theta <= 0.0 {
            0.0
        } else {
            -self.params.c_v * theta * (theta.ln() - 1.0)
        }
    }

    fn w1(&self, theta: f64) -> f64 {
        -self.params.beta * theta / (1.0 + theta)
    }

    fn w1_prime(&self, theta: f64) -> f64 {
        let d = 1.0 + theta;
        -self.params.beta / (d * d)
    }

    pub fn coupling_energy(&self, f: &Mat2, theta: f64) -> Result<f64> {
        check_det(f)?;
        check_theta(theta)?;
        let t = (f.cauchy_green() - Mat2::ID).trace();
        Ok(self.w0(theta) + self.w1(theta) * t)
    }

    /// d/dF of the coupling energy: 2 w1(theta) F.
    pub fn coupling_stress(&self, f: &Mat2, theta: f64) -> Result<Mat2> {
        check_det(f)?;
        check_theta(theta)?;
        Ok(*f * (2.0 * self.w1(theta)))
    }

    /// d/dtheta of the coupling energy (interior temperatures only).
    pub fn coupling_dtheta(&self, f: &Mat2, theta: f64) -> Result<f64> {
        check_det(f)?;
        check_theta(theta)?;
        let t = (f.cauchy_green() - Mat2::ID).trace();
        Ok(-self.params.c_v * theta.ln() + self.w1_prime(theta) * t)
    }

    /// Mixed derivative d^2/dF dtheta: 2 w1'(theta) F.
    pub fn coupling_df_dtheta(&self, f: &Mat2, theta: f64) -> Result<Mat2> {
        check_det(f)?;
        check_theta(theta)?;
        Ok(*f * (2.0 * self.w1_prime(theta)))
    }

    /// Heat capacity -theta d^2_theta W_cpl, continuously extended to theta = 0.
    pub fn heat_capacity(&self, f: &Mat2, theta: f64) -> Result<f64> {
        check_det(f)?;
        check_theta(theta)?;
        let t = (f.cauchy_green() - Mat2::ID).trace();
        let d = 1.0 + theta;
        Ok(self.params.c_v - 2.0 * self.params.beta * theta / (d * d * d) * t)
    }

    /// Internal energy W_cpl - theta d_theta W_cpl in closed form.
    pub fn internal_energy(&self, f: &Mat2, theta: f64) -> Result<f64> {
        check_det(f)?;
        check_theta(theta)?;
        Ok(self.internal_energy_raw(f, theta))
    }

    /// Internal energy without admissibility checks; extended C^1-linearly
    /// (slope c_v) to negative temperatures for the thermal Newton solve.
    pub fn internal_energy_raw(&self, f: &Mat2, theta: f64) -> f64 {
        if theta < 0.0 {
            return self.params.c_v * theta;
        }
        let t = (f.cauchy_green() - Mat2::ID).trace();
        let d = 1.0 + theta;
        self.params.c_v * theta - self.params.beta * theta * theta / (d * d) * t
    }

    /// d/dtheta of the (extended) internal energy; equals the heat capacity
    /// for theta >= 0.
    pub fn internal_energy_dtheta_raw(&self, f: &Mat2, theta: f64) -> f64 {
        if theta < 0.0 {
            return self.params.c_v;
        }
        let t = (f.cauchy_green() - Mat2::ID).trace();
        let d = 1.0 + theta;
        self.params.c_v - 2.0 * self.params.beta * theta / (d * d * d) * t
    }

    /// True when (F, theta) lies in the declared validity region of the
    /// coupling bounds.
    pub fn in_validity_region(&self, f: &Mat2, theta: f64) -> bool {
        (*f - Mat2::ID).norm() <= self.validity.strain_radius
            && theta >= 0.0
            && theta <= self.validity.theta_max
    }

    // ---- dissipation ---------------------------------------------------

    /// R(F, Fdot, theta) = (eta/4) |Cdot|^2.
    pub fn dissipation_potential(&self, s: &StrainRateData, _theta: f64) -> f64 {
        0.25 * self.params.eta * s.cdot.norm_sq()
    }

    /// d/dFdot of R: 2 F (D Cdot) = eta F Cdot.
    pub fn viscous_stress(&self, s: &StrainRateData, _theta: f64) -> Mat2 {
        s.f.matmul(&s.cdot) * self.params.eta
    }

    /// Dissipation rate xi = 2 R = (eta/2) |Cdot|^2.
    pub fn dissipation_rate(&self, s: &StrainRateData, _theta: f64) -> f64 {
        0.5 * self.params.eta * s.cdot.norm_sq()
    }

    /// Truncated dissipation rate: xi below 1, xi^(alpha/2) above.
    pub fn regularized_dissipation_rate(&self, xi: f64, alpha: f64) -> Result<f64> {
        if !(1.0..=2.0).contains(&alpha) {
            return Err(CoreError::AlphaOutOfRange { alpha });
        }
        Ok(if xi <= 1.0 { xi } else { xi.powf(alpha / 2.0) })
    }

    // ---- conductivity ---------------------------------------------------

    /// det(F) F^{-1} K F^{-T} with K = k0 Id: k0 det(F) (F^T F)^{-1}.
    pub fn pulled_back_conductivity(&self, f: &Mat2, theta: f64) -> Result<Mat2> {
        let j = check_det(f)?;
        check_theta(theta)?;
        Ok(f.cauchy_green().inverse() * (self.params.k0 * j))
    }

    // ---- linearization ---------------------------------------------------

    pub fn linearized_tensors(&self, alpha: f64) -> Result<LinearizedTensors> {
        if !(1.0..=2.0).contains(&alpha) {
            return Err(CoreError::AlphaOutOfRange { alpha });
        }
        let cd = Tens4::isotropic(2.0 * self.params.eta, 0.0);
        let b_alpha = if alpha == 1.0 {
            self.coupling_df_dtheta(&Mat2::ID, 0.0)?
        } else {
            Mat2::ZERO
        };
        let cd_alpha = if alpha == 2.0 { cd } else { Tens4::ZERO };
        Ok(LinearizedTensors {
            cw: self.elastic_hessian_at_identity(),
            cd,
            b_alpha,
            cd_alpha,
            k0: self.pulled_back_conductivity(&Mat2::ID, 0.0)?,
            c_v_bar: self.heat_capacity(&Mat2::ID, 0.0)?,
        })
    }
}

/// One line of the constitutive assumption battery.
#[derive(Debug, Clone, Serialize)]
pub struct AssumptionCheck {
    pub label: &'static str,
    pub description: &'static str,
    pub passed: bool,
    pub detail: String,
}

/// Runs the sampled assumption battery and computes admissible (c0, C0)
/// for the chosen parameters on the validity region.
pub fn assumption_report(model: &MaterialModel) -> (Vec<AssumptionCheck>, f64, f64) {
    use rand::Rng;
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x5eed_ca11);
    let p = &model.params;
    let mut checks = Vec::new();

    let rand_f = |rng: &mut rand_chacha::ChaCha8Rng, lo: f64, hi: f64| loop {
        let f = Mat2([
            [1.0 + rng.random_range(-0.8..0.8), rng.random_range(-0.8..0.8)],
            [rng.random_range(-0.8..0.8), 1.0 + rng.random_range(-0.8..0.8)],
        ]);
        let d = f.det();
        if d >= lo && d <= hi {
            return f;
        }
    };

    // Frame indifference of W_el, H, W_cpl.
    let mut fi_max: f64 = 0.0;
    for _ in 0..200 {
        let f = rand_f(&mut rng, 0.3, 3.0);
        let q = Mat2::rotation(rng.random_range(-3.14..3.14));
        let theta = rng.random_range(0.0..model.validity.theta_max);
        let qf = q.matmul(&f);
        let wel = model.elastic_energy(&f).unwrap();
        fi_max = fi_max.max((model.elastic_energy(&qf).unwrap() - wel).abs() / (1.0 + wel.abs()));
        let mut g = Tens3::ZERO;
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..2 {
                    g.0[i][j][k] = rng.random_range(-1.0..1.0);
                }
            }
        }
        let h = model.hyper_energy(&g);
        fi_max = fi_max.max((model.hyper_energy(&g.rotate_first(&q)) - h).abs() / (1.0 + h.abs()));
        let wc = model.coupling_energy(&f, theta).unwrap();
        fi_max = fi_max
            .max((model.coupling_energy(&qf, theta).unwrap() - wc).abs() / (1.0 + wc.abs()));
    }
    checks.push(AssumptionCheck {
        label: "W.2/H.2/C.2",
        description: "frame indifference under rotations",
        passed: fi_max <= 1e-12,
        detail: format!("max relative defect {fi_max:.3e}"),
    });

    // Coercivity: W_el >= c0 dist^2(F, SO(2)), empirical constant.
    let mut coerc = f64::INFINITY;
    for _ in 0..2000 {
        let f = rand_f(&mut rng, 0.3, 3.0);
        let d2 = f.dist_sq_so2();
        if d2 > 1e-12 {
            coerc = coerc.min(model.elastic_energy(&f).unwrap() / d2);
        }
    }
    let c0_coercive = 0.9 * coerc;
    checks.push(AssumptionCheck {
        label: "W.4",
        description: "quadratic coercivity away from SO(2), zero on SO(2)",
        passed: coerc > 0.0 && model.elastic_energy(&Mat2::rotation(0.3)).unwrap() < 1e-14,
        detail: format!("empirical coercivity constant {c0_coercive:.4}"),
    });

    // Growth bound W.3 with the declared (c0, C0).
    let mut w3_ok = true;
    for _ in 0..2000 {
        let f = rand_f(&mut rng, 0.05, 5.0);
        let lower = p.c0 * (f.norm_sq() + f.det().powi(-(p.q as i32))) - p.c0_upper;
        if model.elastic_energy(&f).unwrap() < lower - 1e-12 {
            w3_ok = false;
        }
    }
    checks.push(AssumptionCheck {
        label: "W.3",
        description: "lower growth bound with declared c0, C0",
        passed: w3_ok,
        detail: format!("c0 = {}, C0 = {}, q = {}", p.c0, p.c0_upper, p.q),
    });

    // H bounds: c0 |G|^p <= H <= C0 (1 + |G|^p).
    let h_ok = p.c_h >= p.c0 && p.c_h <= p.c0_upper;
    checks.push(AssumptionCheck {
        label: "H.3/H.4",
        description: "p-growth bounds of the strain-gradient term, H(0) = 0",
        passed: h_ok && model.hyper_energy(&Tens3::ZERO) == 0.0,
        detail: format!("c0 <= c_h = {} <= C0", p.c_h),
    });

    // Heat capacity in [c0, C0] on the validity region.
    let mut cv_min = f64::INFINITY;
    let mut cv_max = f64::NEG_INFINITY;
    let mut win_ratio_min = f64::INFINITY;
    let mut win_ratio_max = f64::NEG_INFINITY;
    for _ in 0..2000 {
        let f = loop {
            let f = rand_f(&mut rng, 0.3, 3.0);
            if (f - Mat2::ID).norm() <= model.validity.strain_radius {
                break f;
            }
        };
        let theta = rng.random_range(1e-6..model.validity.theta_max);
        let cv = model.heat_capacity(&f, theta).unwrap();
        cv_min = cv_min.min(cv);
        cv_max = cv_max.max(cv);
        let win = model.internal_energy(&f, theta).unwrap();
        win_ratio_min = win_ratio_min.min(win / theta);
        win_ratio_max = win_ratio_max.max(win / theta);
    }
    let cv_ok = cv_min >= p.c0 && cv_max <= p.c0_upper;
    checks.push(AssumptionCheck {
        label: "C.5",
        description: "heat capacity within [c0, C0] on the validity region",
        passed: cv_ok,
        detail: format!("observed range [{cv_min:.4}, {cv_max:.4}]"),
    });
    checks.push(AssumptionCheck {
        label: "W_in",
        description: "internal energy controlled by temperature on the validity region",
        passed: win_ratio_min >= p.c0 && win_ratio_max <= p.c0_upper,
        detail: format!("W_in / theta in [{win_ratio_min:.4}, {win_ratio_max:.4}]"),
    });

    // Coupling zero at theta = 0.
    let f = rand_f(&mut rng, 0.3, 3.0);
    checks.push(AssumptionCheck {
        label: "C.3",
        description: "coupling energy vanishes at zero temperature",
        passed: model.coupling_energy(&f, 0.0).unwrap() == 0.0,
        detail: String::new(),
    });

    // Dissipation eigenvalue bounds: xi / |Cdot|^2 = eta / 2 in [c0, C0].
    let d_ok = p.eta / 2.0 >= p.c0 && p.eta / 2.0 <= p.c0_upper;
    checks.push(AssumptionCheck {
        label: "D.2",
        description: "dissipation rate bounded by |Cdot|^2 with c0, C0",
        passed: d_ok,
        detail: format!("eta/2 = {}", p.eta / 2.0),
    });

    // Conductivity spectrum.
    let k_ok = p.k0 >= p.c0 && p.k0 <= p.c0_upper;
    checks.push(AssumptionCheck {
        label: "K",
        description: "conductivity eigenvalues within [c0, C0]",
        passed: k_ok,
        detail: format!("k0 = {}", p.k0),
    });

    // Admissible constants implied by the model on the validity region.
    let c0_adm = [c0_coercive, p.eta / 2.0, p.k0, cv_min, p.c_h, win_ratio_min]
        .into_iter()
        .fold(f64::INFINITY, f64::min);
    let c0_big = [p.eta / 2.0, p.k0, cv_max, p.c_h, win_ratio_max]
        .into_iter()
        .fold(f64::NEG_INFINITY, f64::max);
    (checks, c0_adm.max(0.0), c0_big.max(c0_adm * (DIM + 1.0)))
}
