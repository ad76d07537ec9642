//! Acceptance suite: one test per quantitative acceptance criterion.
//! Each test prints a single `criterion NN <name>: PASS` line (visible with
//! `cargo test --test acceptance -- --nocapture`); a failing criterion fails
//! its test with a diagnostic message.

use std::time::Instant;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use thermovisco::analysis;
use thermovisco::grid::{Grid, ScalarField, Side, VectorField};
use thermovisco::linear::LinearScheme;
use thermovisco::loading::{BodyLoad, LoadingProgram, SpatialProfile, TimeSignal};
use thermovisco::material::{MaterialModel, MaterialParams, StrainRateData};
use thermovisco::norms::{self, NormSpec};
use thermovisco::scheme::{Scheme, SchemeConfig};
use thermovisco::tensor::{Mat2, Tens3};

fn model() -> MaterialModel {
    MaterialModel::new(MaterialParams::default()).unwrap()
}

fn grid(n: usize) -> Grid {
    Grid::new(n, n, 1.0, 1.0, vec![Side::Left]).unwrap()
}

fn ramp_body(slope: f64) -> BodyLoad {
    BodyLoad {
        direction: [0.0, -1.0],
        signal: TimeSignal::Ramp { slope },
        profile: SpatialProfile::Uniform,
    }
}

/// Ramp body load plus uniform external boundary temperature.
fn heated_ramp_loads(slope: f64, theta_b: f64) -> LoadingProgram {
    LoadingProgram {
        body: vec![ramp_body(slope)],
        traction: vec![],
        theta_flat: TimeSignal::Constant { value: theta_b },
    }
}

fn pass(line: &str, t0: Instant) {
    println!("{line}: PASS ({:.2} s)", t0.elapsed().as_secs_f64());
}

// ---------------------------------------------------------------------------
// 1. Material derivative oracles: central finite differences, frame
//    indifference, and the exact rate/potential identity.
// ---------------------------------------------------------------------------

const FD_H: f64 = 1e-5;

fn rel(d: f64, scale: f64) -> f64 {
    d.abs() / (1.0 + scale.abs())
}

#[test]
fn acceptance_01_material_derivative_oracles() {
    let t0 = Instant::now();
    let m = model();
    let mut rng = ChaCha8Rng::seed_from_u64(0xacce_0001);
    let mut max_fd = 0.0f64;
    let mut max_frame = 0.0f64;
    for _ in 0..100 {
        // random admissible state
        let (f, theta) = loop {
            let mut f = Mat2::ID;
            for i in 0..2 {
                for j in 0..2 {
                    f.0[i][j] += rng.random_range(-0.2..0.2);
                }
            }
            let theta = rng.random_range(0.05..5.0);
            if m.in_validity_region(&f, theta) && f.det() > 0.1 {
                break (f, theta);
            }
        };
        let mut fdot = Mat2::ZERO;
        let mut g3 = Tens3([[[0.0; 2]; 2]; 2]);
        for i in 0..2 {
            for j in 0..2 {
                fdot.0[i][j] = rng.random_range(-1.0..1.0);
                for k in 0..2 {
                    g3.0[i][j][k] = rng.random_range(-0.5..0.5);
                }
            }
        }

        // dW_el/dF vs central differences of W_el
        let stress = m.elastic_stress(&f).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                let mut fp = f;
                let mut fm = f;
                fp.0[i][j] += FD_H;
                fm.0[i][j] -= FD_H;
                let fd =
                    (m.elastic_energy(&fp).unwrap() - m.elastic_energy(&fm).unwrap()) / (2.0 * FD_H);
                max_fd = max_fd.max(rel(fd - stress.0[i][j], stress.0[i][j]));
            }
        }

        // dH/dG vs central differences of H
        let hs = m.hyper_stress(&g3);
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..2 {
                    let mut gp = g3;
                    let mut gm = g3;
                    gp.0[i][j][k] += FD_H;
                    gm.0[i][j][k] -= FD_H;
                    let fd = (m.hyper_energy(&gp) - m.hyper_energy(&gm)) / (2.0 * FD_H);
                    max_fd = max_fd.max(rel(fd - hs.0[i][j][k], hs.0[i][j][k]));
                }
            }
        }

        // coupling derivatives in F and theta
        let cs = m.coupling_stress(&f, theta).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                let mut fp = f;
                let mut fm = f;
                fp.0[i][j] += FD_H;
                fm.0[i][j] -= FD_H;
                let fd = (m.coupling_energy(&fp, theta).unwrap()
                    - m.coupling_energy(&fm, theta).unwrap())
                    / (2.0 * FD_H);
                max_fd = max_fd.max(rel(fd - cs.0[i][j], cs.0[i][j]));
            }
        }
        let cdt = m.coupling_dtheta(&f, theta).unwrap();
        let fd = (m.coupling_energy(&f, theta + FD_H).unwrap()
            - m.coupling_energy(&f, theta - FD_H).unwrap())
            / (2.0 * FD_H);
        max_fd = max_fd.max(rel(fd - cdt, cdt));

        // mixed derivative: d(coupling_stress)/dtheta
        let mixed = m.coupling_df_dtheta(&f, theta).unwrap();
        let sp = m.coupling_stress(&f, theta + FD_H).unwrap();
        let sm = m.coupling_stress(&f, theta - FD_H).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                let fd = (sp.0[i][j] - sm.0[i][j]) / (2.0 * FD_H);
                max_fd = max_fd.max(rel(fd - mixed.0[i][j], mixed.0[i][j]));
            }
        }

        // heat capacity = -theta d/dtheta (dW_cpl/dtheta)
        let cap = m.heat_capacity(&f, theta).unwrap();
        let fd = -theta
            * (m.coupling_dtheta(&f, theta + FD_H).unwrap()
                - m.coupling_dtheta(&f, theta - FD_H).unwrap())
            / (2.0 * FD_H);
        max_fd = max_fd.max(rel(fd - cap, cap));

        // internal-energy theta derivative
        let wdt = m.internal_energy_dtheta_raw(&f, theta);
        let fd = (m.internal_energy_raw(&f, theta + FD_H)
            - m.internal_energy_raw(&f, theta - FD_H))
            / (2.0 * FD_H);
        max_fd = max_fd.max(rel(fd - wdt, wdt));

        // viscous stress = dR/dFdot
        let s = StrainRateData::new(f, fdot);
        let vs = m.viscous_stress(&s, theta);
        for i in 0..2 {
            for j in 0..2 {
                let mut dp = fdot;
                let mut dm = fdot;
                dp.0[i][j] += FD_H;
                dm.0[i][j] -= FD_H;
                let fd = (m.dissipation_potential(&StrainRateData::new(f, dp), theta)
                    - m.dissipation_potential(&StrainRateData::new(f, dm), theta))
                    / (2.0 * FD_H);
                max_fd = max_fd.max(rel(fd - vs.0[i][j], vs.0[i][j]));
            }
        }

        // frame indifference: energies invariant under left rotation
        let a: f64 = rng.random_range(0.0..std::f64::consts::TAU);
        let (sn, cs_) = a.sin_cos();
        let rot = Mat2([[cs_, -sn], [sn, cs_]]);
        let rf = rot.matmul(&f);
        let wel = m.elastic_energy(&f).unwrap();
        max_frame = max_frame.max(rel(m.elastic_energy(&rf).unwrap() - wel, wel));
        let wc = m.coupling_energy(&f, theta).unwrap();
        max_frame = max_frame.max(rel(m.coupling_energy(&rf, theta).unwrap() - wc, wc));
        let r_rot = m.dissipation_potential(&StrainRateData::new(rf, rot.matmul(&fdot)), theta);
        let r_ref = m.dissipation_potential(&s, theta);
        max_frame = max_frame.max(rel(r_rot - r_ref, r_ref));

        // dissipation rate is exactly twice the potential, bit for bit
        let xi = m.dissipation_rate(&s, theta);
        assert_eq!(
            xi.to_bits(),
            (2.0 * r_ref).to_bits(),
            "criterion 01: dissipation rate differs from 2x potential"
        );
    }
    assert!(
        max_fd <= 1e-6,
        "criterion 01 material derivative oracles: FAIL — max FD relative error {max_fd:.3e} > 1e-6"
    );
    assert!(
        max_frame <= 1e-12,
        "criterion 01 material derivative oracles: FAIL — frame-indifference residual {max_frame:.3e} > 1e-12"
    );
    assert!(t0.elapsed().as_secs_f64() < 10.0, "criterion 01: over time budget");
    pass("criterion 01 material derivative oracles", t0);
}

// ---------------------------------------------------------------------------
// 2. Tiny-instance minimizer oracle: multistart descent on finite-difference
//    gradients of the public objective, Newton-polished with a
//    finite-difference Hessian, compared against mechanical_step.
// ---------------------------------------------------------------------------

struct OracleProblem<'a> {
    sch: &'a Scheme<'a>,
    y_prev: VectorField,
    theta_prev: ScalarField,
    loads: thermovisco::loading::SlabLoads,
    free: Vec<usize>, // flattened dof indices not fixed by Dirichlet data
}

impl OracleProblem<'_> {
    fn unpack(&self, x: &[f64]) -> VectorField {
        let mut y = self.y_prev.clone();
        for (v, &d) in x.iter().zip(&self.free) {
            y.0[d / 2][d % 2] = *v;
        }
        y
    }

    fn obj(&self, x: &[f64]) -> Option<f64> {
        self.sch
            .mech_objective(&self.unpack(x), &self.y_prev, &self.theta_prev, &self.loads)
    }

    fn fd_grad(&self, x: &[f64]) -> Option<Vec<f64>> {
        let mut g = vec![0.0; x.len()];
        let mut xp = x.to_vec();
        for i in 0..x.len() {
            xp[i] = x[i] + FD_H;
            let fp = self.obj(&xp)?;
            xp[i] = x[i] - FD_H;
            let fm = self.obj(&xp)?;
            xp[i] = x[i];
            g[i] = (fp - fm) / (2.0 * FD_H);
        }
        Some(g)
    }

    /// Damped Newton on finite-difference gradients with a finite-difference
    /// Hessian; returns the iterate and its gradient sup-norm.
    fn newton(&self, mut x: Vec<f64>) -> (Vec<f64>, f64) {
        let n = x.len();
        let mut sup = f64::INFINITY;
        for _ in 0..12 {
            let Some(g) = self.fd_grad(&x) else { break };
            sup = g.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            if sup <= 1e-10 {
                break;
            }
            let mut h = nalgebra::DMatrix::zeros(n, n);
            let mut xp = x.clone();
            for i in 0..n {
                xp[i] = x[i] + FD_H;
                let gp = self.fd_grad(&xp).expect("state near minimizer is admissible");
                xp[i] = x[i] - FD_H;
                let gm = self.fd_grad(&xp).expect("state near minimizer is admissible");
                xp[i] = x[i];
                for j in 0..n {
                    h[(i, j)] += 0.5 * (gp[j] - gm[j]) / (2.0 * FD_H);
                    h[(j, i)] += 0.5 * (gp[j] - gm[j]) / (2.0 * FD_H);
                }
            }
            let rhs = nalgebra::DVector::from_column_slice(&g);
            let Some(step) = h.lu().solve(&rhs) else { break };
            let f0 = self.obj(&x).unwrap();
            let mut damp = 1.0;
            loop {
                let cand: Vec<f64> = x
                    .iter()
                    .enumerate()
                    .map(|(i, v)| v - damp * step[i])
                    .collect();
                match self.obj(&cand) {
                    Some(fc) if fc <= f0 + 1e-14 * (1.0 + f0.abs()) => {
                        x = cand;
                        break;
                    }
                    _ => {
                        damp *= 0.5;
                        if damp < 1e-8 {
                            return (x, sup);
                        }
                    }
                }
            }
        }
        (x, sup)
    }
}

#[test]
fn acceptance_02_minimizer_oracle() {
    let t0 = Instant::now();
    let g = grid(5);
    let m = model();
    let cfg = SchemeConfig {
        eps: 0.5,
        alpha: 2.0,
        tau: 0.125,
        t_end: 0.125,
        tol_mech: 1e-11,
        ..Default::default()
    };
    let sch = Scheme::new(&g, &m, cfg).unwrap();
    let loads = heated_ramp_loads(0.4, 0.0);
    let sl = loads.slab_loads(&g, 1, 0.125);
    let y_prev = VectorField::from_fn(&g, |x, y| [x, y]);
    let theta_prev = ScalarField::zeros(&g);

    let (y_solver, res, obj_new, _) = sch
        .mechanical_step(&y_prev, &theta_prev, &sl, 1)
        .unwrap();
    assert!(res <= 1e-10, "criterion 02: solver residual {res:.3e}");

    let mask = g.dirichlet_mask();
    let free: Vec<usize> = (0..2 * g.nnodes()).filter(|d| !mask[d / 2]).collect();
    let prob = OracleProblem {
        sch: &sch,
        y_prev: y_prev.clone(),
        theta_prev,
        loads: sl,
        free: free.clone(),
    };

    // multistart: warm start plus two random interior perturbations
    let mut rng = ChaCha8Rng::seed_from_u64(0xacce_0002);
    let x0: Vec<f64> = free.iter().map(|&d| y_prev.0[d / 2][d % 2]).collect();
    let mut best: Option<(Vec<f64>, f64, f64)> = None;
    for start in 0..3 {
        let mut x = x0.clone();
        if start > 0 {
            for v in x.iter_mut() {
                *v += rng.random_range(-0.02..0.02);
            }
        }
        let (x, sup) = prob.newton(x);
        let f = prob.obj(&x).unwrap();
        if best.as_ref().is_none_or(|b| f < b.1) {
            best = Some((x, f, sup));
        }
    }
    let (x_best, f_best, sup_best) = best.unwrap();
    assert!(
        sup_best <= 1e-10,
        "criterion 02 minimizer oracle: FAIL — oracle gradient stalled at {sup_best:.3e}"
    );
    let y_oracle = prob.unpack(&x_best);
    let mut diff = 0.0f64;
    for (a, b) in y_solver.0.iter().zip(&y_oracle.0) {
        diff = diff.max((a[0] - b[0]).abs()).max((a[1] - b[1]).abs());
    }
    assert!(
        diff <= 1e-6,
        "criterion 02 minimizer oracle: FAIL — sup-norm gap {diff:.3e} > 1e-6 \
         (solver obj {obj_new:.12e}, oracle obj {f_best:.12e})"
    );
    assert!(t0.elapsed().as_secs_f64() < 60.0, "criterion 02: over time budget");
    pass("criterion 02 minimizer oracle", t0);
}

// ---------------------------------------------------------------------------
// 3. Regression run: 16x16, tau = 1/32, T = 0.5, boundary-heated + ramp load.
// ---------------------------------------------------------------------------

fn regression_cfg() -> SchemeConfig {
    SchemeConfig {
        eps: 1.0,
        alpha: 2.0,
        tau: 1.0 / 32.0,
        t_end: 0.5,
        ..Default::default()
    }
}

#[test]
fn acceptance_03_scheme_regression() {
    let t0 = Instant::now();
    let g = grid(16);
    let m = model();
    let cfg = regression_cfg();
    let loads = heated_ramp_loads(0.3, 0.5);
    let sch = Scheme::new(&g, &m, cfg).unwrap();
    let run = sch
        .run(&loads, &VectorField::zeros(&g), &ScalarField::zeros(&g))
        .unwrap();
    assert_eq!(run.steps.len(), 17, "criterion 03: expected 16 completed steps");
    let e_scale = run
        .ledger
        .iter()
        .fold(0.0f64, |a, r| a.max(r.e.abs()).max(r.m.abs()));
    for r in run.ledger.iter().skip(1) {
        assert!(
            r.res_mech <= 1e-8 && r.res_therm <= 1e-8,
            "criterion 03 regression: FAIL — step {} residuals ({:.3e}, {:.3e})",
            r.k,
            r.res_mech,
            r.res_therm
        );
        assert!(
            r.min_theta >= -1e-10,
            "criterion 03 regression: FAIL — step {} min theta {:.3e}",
            r.k,
            r.min_theta
        );
        assert!(
            r.obj_new <= r.obj_competitor + 1e-12 * (1.0 + r.obj_new.abs()),
            "criterion 03 regression: FAIL — step {} competitor inequality ({:.15e} > {:.15e})",
            r.k,
            r.obj_new,
            r.obj_competitor
        );
        assert!(
            r.ebal_res <= 1e-6 * e_scale.max(1e-30),
            "criterion 03 regression: FAIL — step {} balance residual {:.3e} > 1e-6 * {:.3e}",
            r.k,
            r.ebal_res,
            e_scale
        );
    }
    assert!(t0.elapsed().as_secs_f64() < 300.0, "criterion 03: over time budget");
    pass("criterion 03 scheme regression", t0);
}

// ---------------------------------------------------------------------------
// 4. Closed system: zero loads, no boundary exchange, nontrivial initial
//    data; total energy must be nonincreasing.
// ---------------------------------------------------------------------------

#[test]
fn acceptance_04_closed_system_monotonicity() {
    let t0 = Instant::now();
    let g = grid(12);
    let m = model();
    let cfg = SchemeConfig {
        eps: 1.0,
        alpha: 2.0,
        tau: 1.0 / 32.0,
        t_end: 0.25,
        kappa: 0.0,
        tol_mech: 1e-10,
        tol_therm: 1e-12,
        ..Default::default()
    };
    let sch = Scheme::new(&g, &m, cfg).unwrap();
    let loads = LoadingProgram::default();
    let u0 = VectorField::from_fn(&g, |x, y| {
        let b = (std::f64::consts::PI * x).sin() * (std::f64::consts::PI * y).sin();
        [0.0, 0.05 * b]
    });
    let mu0 = ScalarField::constant(&g, 0.2);
    let run = sch.run(&loads, &u0, &mu0).unwrap();
    for w in run.ledger.windows(2) {
        assert!(
            w[1].e <= w[0].e + 1e-8,
            "criterion 04 closed-system monotonicity: FAIL — energy rose {:.3e} at step {}",
            w[1].e - w[0].e,
            w[1].k
        );
    }
    let drop = run.ledger[0].e - run.ledger.last().unwrap().e;
    assert!(drop >= 0.0, "criterion 04: net energy change {drop:.3e}");
    pass("criterion 04 closed-system monotonicity", t0);
}

// ---------------------------------------------------------------------------
// 5. Time-step refinement ladder on the regression problem.
// ---------------------------------------------------------------------------

#[test]
fn acceptance_05_tau_refinement() {
    let t0 = Instant::now();
    let g = grid(16);
    let m = model();
    let base = regression_cfg();
    let loads = heated_ramp_loads(0.3, 0.5);
    let taus = [0.125, 0.0625, 0.03125, 0.015625];
    let spec = NormSpec::temperature();
    let report = analysis::tau_refinement_study(&g, &m, &base, &loads, &taus, &spec).unwrap();
    assert!(
        report.passed,
        "criterion 05 tau refinement: FAIL — {:?}",
        report.notes
    );
    assert!(t0.elapsed().as_secs_f64() < 1200.0, "criterion 05: over time budget");
    pass("criterion 05 tau refinement", t0);
}

// ---------------------------------------------------------------------------
// 6. Strain-scaling exponents over the eps ladder, both alpha endpoints.
// ---------------------------------------------------------------------------

#[test]
fn acceptance_06_eps_scaling() {
    let t0 = Instant::now();
    let g = grid(8);
    let m = model();
    let loads = heated_ramp_loads(0.4, 0.5);
    let epss = [0.2, 0.1, 0.05, 0.025];
    for alpha in [1.0, 2.0] {
        let base = SchemeConfig {
            eps: 0.2,
            alpha,
            tau: 1.0 / 16.0,
            t_end: 0.25,
            ..Default::default()
        };
        let report = analysis::check_apriori_scaling(&g, &m, &base, &loads, &epss).unwrap();
        assert!(
            report.passed,
            "criterion 06 eps scaling (alpha = {alpha}): FAIL — {:?} summary {:?}",
            report.notes, report.summary
        );
        println!(
            "criterion 06 eps scaling (alpha = {alpha}): slopes {:?}",
            report.summary
        );
    }
    assert!(t0.elapsed().as_secs_f64() < 1800.0, "criterion 06: over time budget");
    pass("criterion 06 eps scaling", t0);
}

// ---------------------------------------------------------------------------
// 7. Linearization limit: rescaled solutions approach the linear scheme.
// ---------------------------------------------------------------------------

#[test]
fn acceptance_07_linearization() {
    let t0 = Instant::now();
    let g = grid(8);
    let m = model();
    let loads = heated_ramp_loads(0.4, 0.5);
    let epss = [0.2, 0.1, 0.05, 0.025];
    for alpha in [1.0, 2.0] {
        let base = SchemeConfig {
            eps: 0.2,
            alpha,
            tau: 1.0 / 32.0,
            t_end: 0.25,
            ..Default::default()
        };
        let report =
            analysis::epsilon_linearization_study(&g, &m, &base, &loads, &epss).unwrap();
        assert!(
            report.passed,
            "criterion 07 linearization (alpha = {alpha}): FAIL — {:?} summary {:?}",
            report.notes, report.summary
        );
    }
    assert!(t0.elapsed().as_secs_f64() < 1800.0, "criterion 07: over time budget");
    pass("criterion 07 linearization", t0);
}

// ---------------------------------------------------------------------------
// 8. Alpha-dependent coupling activation in the linear scheme.
// ---------------------------------------------------------------------------

#[test]
fn acceptance_08_alpha_decoupling() {
    let t0 = Instant::now();
    let g = grid(8);
    let m = model();
    let mk_cfg = |alpha: f64, kappa: f64| SchemeConfig {
        eps: 0.5,
        alpha,
        tau: 1.0 / 16.0,
        t_end: 0.25,
        kappa,
        ..Default::default()
    };

    // (a) alpha strictly between the endpoints: full two-way decoupling,
    // checked bit for bit under data perturbations.
    let cfg = mk_cfg(1.5, 1.0);
    let u0 = VectorField::zeros(&g);
    let mu0 = ScalarField::constant(&g, 0.3);
    let loads_a = heated_ramp_loads(0.4, 0.5);
    let base = LinearScheme::new(&g, &m, cfg.clone())
        .unwrap()
        .run(&loads_a, &u0, &mu0)
        .unwrap();
    // perturb the mechanical data only: mu must not move
    let mut loads_b = loads_a.clone();
    loads_b.body[0].signal = TimeSignal::Ramp { slope: 1.1 };
    let u0_b = VectorField::from_fn(&g, |x, _| [0.0, 0.03 * x * (1.0 - x)]);
    let run_b = LinearScheme::new(&g, &m, cfg.clone())
        .unwrap()
        .run(&loads_b, &u0_b, &mu0)
        .unwrap();
    for (sa, sb) in base.steps.iter().zip(&run_b.steps) {
        assert_eq!(
            sa.mu.0, sb.mu.0,
            "criterion 08: FAIL — mu responded to mechanical data at alpha = 1.5"
        );
    }
    // perturb the thermal data only: u must not move
    let mut loads_c = loads_a.clone();
    loads_c.theta_flat = TimeSignal::Constant { value: 2.0 };
    let mu0_c = ScalarField::from_fn(&g, |x, y| 0.3 + 0.2 * x + 0.1 * y);
    let run_c = LinearScheme::new(&g, &m, cfg)
        .unwrap()
        .run(&loads_c, &u0, &mu0_c)
        .unwrap();
    for (sa, sc) in base.steps.iter().zip(&run_c.steps) {
        assert_eq!(
            sa.u.0, sc.u.0,
            "criterion 08: FAIL — u responded to thermal data at alpha = 1.5"
        );
    }

    // (b) alpha = 2, insulated, moving load: dissipative heating makes the
    // temperature mass strictly increase.
    let loads_mv = LoadingProgram {
        body: vec![BodyLoad {
            direction: [0.0, -1.0],
            signal: TimeSignal::Sinusoid {
                amp: 0.6,
                omega: 3.0,
                phase: 0.0,
            },
            profile: SpatialProfile::Uniform,
        }],
        traction: vec![],
        theta_flat: TimeSignal::Constant { value: 0.0 },
    };
    let run_h = LinearScheme::new(&g, &m, mk_cfg(2.0, 0.0))
        .unwrap()
        .run(&loads_mv, &u0, &ScalarField::zeros(&g))
        .unwrap();
    for w in run_h.ledger.windows(2) {
        assert!(
            w[1].mu_mass > w[0].mu_mass,
            "criterion 08: FAIL — mu mass not strictly increasing at alpha = 2 (step {})",
            w[1].k
        );
    }

    // (c) alpha = 1, pure boundary heating: thermal expansion must move u.
    let loads_heat = LoadingProgram {
        body: vec![],
        traction: vec![],
        theta_flat: TimeSignal::Constant { value: 0.8 },
    };
    let run_e = LinearScheme::new(&g, &m, mk_cfg(1.0, 1.0))
        .unwrap()
        .run(&loads_heat, &u0, &ScalarField::zeros(&g))
        .unwrap();
    let h1 = norms::h1_vector(&g, &run_e.steps.last().unwrap().u);
    assert!(
        h1 > 1e-10,
        "criterion 08: FAIL — no thermal-expansion response at alpha = 1 (H1 = {h1:.3e})"
    );
    pass("criterion 08 alpha decoupling", t0);
}

// ---------------------------------------------------------------------------
// 9. Limit commutativity on the default ladders.
// ---------------------------------------------------------------------------

#[test]
fn acceptance_09_commutativity() {
    let t0 = Instant::now();
    let g = grid(8);
    let m = model();
    let base = SchemeConfig {
        eps: 0.2,
        alpha: 2.0,
        tau: 0.125,
        t_end: 0.25,
        ..Default::default()
    };
    let loads = heated_ramp_loads(0.4, 0.5);
    let epss = [0.2, 0.1, 0.05, 0.025];
    let taus = [0.125, 0.0625, 0.03125, 0.015625];
    let spec = NormSpec::temperature();
    let report =
        analysis::commutativity_study(&g, &m, &base, &loads, &epss, &taus, &spec).unwrap();
    assert!(
        report.passed,
        "criterion 09 commutativity: FAIL — {:?} summary {:?}",
        report.notes, report.summary
    );
    println!("criterion 09 summary: {:?}", report.summary);
    assert!(t0.elapsed().as_secs_f64() < 2700.0, "criterion 09: over time budget");
    pass("criterion 09 commutativity", t0);
}

// ---------------------------------------------------------------------------
// 10. Truncated dissipation-rate contract: pointwise domination below
//     alpha = 2, bit-for-bit identity at alpha = 2.
// ---------------------------------------------------------------------------

#[test]
fn acceptance_10_regularized_dissipation_contract() {
    let t0 = Instant::now();
    let g = grid(8);
    let m = model();
    let loads = heated_ramp_loads(6.0, 0.0);
    let mut truncated = 0usize;
    for alpha in [1.5, 2.0] {
        let cfg = SchemeConfig {
            eps: 1.0,
            alpha,
            tau: 0.125,
            t_end: 0.5,
            ..Default::default()
        };
        let sch = Scheme::new(&g, &m, cfg).unwrap();
        let run = sch
            .run(&loads, &VectorField::zeros(&g), &ScalarField::zeros(&g))
            .unwrap();
        for w in run.steps.windows(2) {
            let fp = g.gradient_vector(&w[0].y);
            let fnw = g.gradient_vector(&w[1].y);
            let used = sch.dissipation_rates(&fp, &fnw);
            for (c, (a, b)) in fp.iter().zip(&fnw).enumerate() {
                let s = StrainRateData::new(*a, (*b - *a) * 8.0);
                let xi = m.dissipation_rate(&s, 0.0);
                if alpha < 2.0 {
                    assert!(
                        used[c] <= xi,
                        "criterion 10: FAIL — truncated rate {:.17e} above raw {:.17e}",
                        used[c],
                        xi
                    );
                    if xi > 1.0 {
                        truncated += 1;
                        assert!(used[c] < xi, "criterion 10: truncation inactive above 1");
                    }
                } else {
                    assert_eq!(
                        used[c].to_bits(),
                        xi.to_bits(),
                        "criterion 10: FAIL — rate altered at alpha = 2"
                    );
                    let reg = m.regularized_dissipation_rate(xi, 2.0).unwrap();
                    assert_eq!(
                        reg.to_bits(),
                        xi.to_bits(),
                        "criterion 10: FAIL — truncation map not the identity at alpha = 2"
                    );
                }
            }
        }
    }
    assert!(
        truncated > 0,
        "criterion 10: FAIL — test problem never exercised the truncation branch"
    );
    pass("criterion 10 regularized dissipation contract", t0);
}
