//! Semidiscrete Galerkin evolution on the coarse mesh.
//!
//! The spatial semidiscretization (skew convection, divergence constraint,
//! zero-mean pressure) is advanced with the trapezoidal rule, treating the
//! pressure as the step's implicit multiplier: with `F` the forcing load,
//!
//! ```text
//! M (u1 - u0)/dt + 1/2 [nu K u1 + N(u1) u1 - B^T p1]
//!                + 1/2 [nu K u0 + N(u0) u0 - B^T p0] = 1/2 (F0 + F1),
//! B u1 = 0,
//! ```
//!
//! solved by a full Newton iteration (the linearization of `N(u) u` is
//! `N(u) d + D(u) d`). The time derivative consumed by the postprocess is
//! recovered from the semidiscrete identity itself -- a constrained mass
//! solve -- rather than by finite differencing in time, so the postprocess
//! datum carries no O(dt) noise.

use std::io::Write;
use std::sync::Arc;

use crate::assembly::{
    assemble_convection, assemble_convection_derivative, assemble_load, assemble_operators,
    ConvectionMode, OperatorSet, Wind,
};
use crate::error::{Error, Result};
use crate::fe_space::{FEField, FESpacePair, FieldRole};
use crate::quadrature::{QuadRule, ASSEMBLY_DEGREE};
use crate::saddle::{SaddleSolver, SaddleSystem};
use crate::sparse::SparseMatrix;

/// Body force of the momentum equation.
#[derive(Clone)]
pub enum Forcing {
    Zero,
    Analytic(Arc<dyn Fn([f64; 2], f64) -> [f64; 2] + Send + Sync>),
}

impl std::fmt::Debug for Forcing {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Forcing::Zero => write!(f, "Forcing::Zero"),
            Forcing::Analytic(_) => write!(f, "Forcing::Analytic(..)"),
        }
    }
}

impl Forcing {
    pub fn analytic(f: impl Fn([f64; 2], f64) -> [f64; 2] + Send + Sync + 'static) -> Self {
        Forcing::Analytic(Arc::new(f))
    }

    fn load(&self, space: &Arc<FESpacePair>, t: f64, rule: &QuadRule) -> Result<Vec<f64>> {
        match self {
            Forcing::Zero => Ok(vec![0.0; space.n_u()]),
            Forcing::Analytic(f) => assemble_load(space, |p| Ok(f(p, t)), rule),
        }
    }
}

#[derive(Debug, Clone)]
pub struct EvolutionConfig {
    pub nu: f64,
    pub dt: f64,
    pub t_final: f64,
    pub newton_tol: f64,
    pub newton_max_iter: usize,
    pub forcing: Forcing,
    /// Drop the convective term entirely (linear Stokes evolution). Used by
    /// tests that compare a trapezoid step against a direct linear solve.
    pub stokes_only: bool,
}

impl EvolutionConfig {
    pub fn new(nu: f64, dt: f64, t_final: f64, forcing: Forcing) -> Self {
        Self {
            nu,
            dt,
            t_final,
            newton_tol: 1e-10,
            newton_max_iter: 25,
            forcing,
            stokes_only: false,
        }
    }

    pub fn n_steps(&self) -> usize {
        (self.t_final / self.dt).round() as usize
    }

    fn validate(&self) -> Result<()> {
        if !(self.nu > 0.0 && self.dt > 0.0 && self.t_final > 0.0) {
            return Err(Error::invalid("nu, dt and t_final must be positive"));
        }
        let ratio = self.t_final / self.dt;
        if (ratio - ratio.round()).abs() > 1e-12 * ratio.max(1.0) {
            return Err(Error::invalid(format!(
                "dt = {} does not divide t_final = {}",
                self.dt, self.t_final
            )));
        }
        Ok(())
    }
}

/// Coarse solution at one time instant.
#[derive(Debug, Clone)]
pub struct GalerkinState {
    pub time: f64,
    pub velocity: FEField,
    pub pressure: FEField,
    /// Recovered semidiscrete time derivative, present after `run` or an
    /// explicit recovery.
    pub udot: Option<FEField>,
}

/// Per-step record for the optional time-series dump.
#[derive(Debug, Clone, Copy)]
pub struct StepDiagnostics {
    pub time: f64,
    /// Kinetic energy `1/2 u^T M u` after the step.
    pub energy: f64,
    pub newton_iters: usize,
    /// `|B u|_inf` after the step.
    pub div_residual: f64,
}

pub struct Evolution {
    space: Arc<FESpacePair>,
    ops: OperatorSet,
    config: EvolutionConfig,
    rule: QuadRule,
    solver: SaddleSolver,
    load_cache: Option<(f64, Vec<f64>)>,
    diagnostics: Vec<StepDiagnostics>,
}

impl Evolution {
    pub fn new(space: Arc<FESpacePair>, config: EvolutionConfig) -> Result<Self> {
        config.validate()?;
        let ops = assemble_operators(&space);
        Ok(Self {
            space,
            ops,
            config,
            rule: QuadRule::for_degree(ASSEMBLY_DEGREE)?,
            solver: SaddleSolver::new(),
            load_cache: None,
            diagnostics: Vec::new(),
        })
    }

    pub fn space(&self) -> &Arc<FESpacePair> {
        &self.space
    }

    pub fn ops(&self) -> &OperatorSet {
        &self.ops
    }

    pub fn config(&self) -> &EvolutionConfig {
        &self.config
    }

    pub fn diagnostics(&self) -> &[StepDiagnostics] {
        &self.diagnostics
    }

    /// Writes the per-step time series as CSV.
    pub fn write_time_series(&self, w: &mut impl Write) -> std::io::Result<()> {
        writeln!(w, "t,energy,newton_iters,div_residual")?;
        for d in &self.diagnostics {
            writeln!(
                w,
                "{:e},{:e},{},{:e}",
                d.time, d.energy, d.newton_iters, d.div_residual
            )?;
        }
        Ok(())
    }

    fn load_at(&mut self, t: f64) -> Result<Vec<f64>> {
        if let Some((tc, load)) = &self.load_cache {
            if *tc == t {
                return Ok(load.clone());
            }
        }
        let load = self.config.forcing.load(&self.space, t, &self.rule)?;
        self.load_cache = Some((t, load.clone()));
        Ok(load)
    }

    fn convection(&self, u: &FEField) -> Result<Option<SparseMatrix>> {
        if self.config.stokes_only {
            return Ok(None);
        }
        Ok(Some(assemble_convection(
            &self.space,
            Wind::Field(u),
            ConvectionMode::Skew,
        )?))
    }

    /// Initial state: nodal interpolation of `u0` followed by a discrete
    /// Leray projection (so the evolution starts discretely divergence-free),
    /// with the instantaneous pressure recovered from the semidiscrete
    /// identity at `t = 0`.
    pub fn initial_state(&mut self, u0: impl Fn([f64; 2]) -> [f64; 2]) -> Result<GalerkinState> {
        let interp = FEField::interpolate_velocity(&self.space, u0)?;
        let velocity = crate::saddle::leray_project(&self.ops, &interp)?;
        let zero_p = FEField::zeros(&self.space, FieldRole::Pressure);
        let draft = GalerkinState {
            time: 0.0,
            velocity,
            pressure: zero_p,
            udot: None,
        };
        let (udot, pressure) = recover_time_derivative(&self.ops, &self.config, &draft)?;
        Ok(GalerkinState {
            pressure,
            udot: Some(udot),
            ..draft
        })
    }

    /// One trapezoid step from `state` to `state.time + dt`.
    pub fn step(&mut self, state: &GalerkinState) -> Result<GalerkinState> {
        let dt = self.config.dt;
        let nu = self.config.nu;
        let n_u = self.space.n_u();
        let t_new = state.time + dt;
        let step_index = self.diagnostics.len();

        let f_old = self.load_at(state.time)?;
        let f_new = self.load_at(t_new)?;
        let u_old = state.velocity.coeffs();

        // constant part of the residual: everything that does not involve
        // the unknowns, with the sign of the residual's "minus" side
        let n_old = self.convection(&state.velocity)?;
        let mut constant = vec![0.0; n_u];
        for i in 0..n_u {
            constant[i] = 0.5 * (f_old[i] + f_new[i]);
        }
        self.ops.mass.matvec_add(1.0 / dt, u_old, &mut constant);
        self.ops.stiffness.matvec_add(-0.5 * nu, u_old, &mut constant);
        if let Some(n) = &n_old {
            let mut nu_old = vec![0.0; n_u];
            n.matvec(u_old, &mut nu_old);
            for i in 0..n_u {
                constant[i] -= 0.5 * nu_old[i];
            }
        }
        self.ops
            .divergence
            .tr_matvec_add(0.5, state.pressure.coeffs(), &mut constant);
        let rhs_scale = constant.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let tol = self.config.newton_tol * (1.0 + rhs_scale);

        // residual of the momentum equation at (u, q) with q = p_new / 2:
        //   R(u) - B^T q,  R(u) = [M/dt + nu/2 K] u + 1/2 N(u) u - constant
        let mut u = state.velocity.clone();
        let mut q = FEField::from_coeffs(
            &self.space,
            FieldRole::Pressure,
            state.pressure.coeffs().iter().map(|p| 0.5 * p).collect(),
        );
        let mut iters = 0;
        let mut converged = false;
        let mut last_residual = f64::INFINITY;
        for k in 0..=self.config.newton_max_iter {
            let n_cur = self.convection(&u)?;
            let mut residual = vec![0.0; n_u];
            self.ops.mass.matvec_add(1.0 / dt, u.coeffs(), &mut residual);
            self.ops
                .stiffness
                .matvec_add(0.5 * nu, u.coeffs(), &mut residual);
            if let Some(n) = &n_cur {
                n.matvec_add(0.5, u.coeffs(), &mut residual);
            }
            for i in 0..n_u {
                residual[i] -= constant[i];
            }
            self.ops.divergence.tr_matvec_add(-1.0, q.coeffs(), &mut residual);
            let mut res_norm = residual.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let mut div = vec![0.0; self.space.n_p()];
            self.ops.divergence.matvec(u.coeffs(), &mut div);
            res_norm = res_norm.max(div.iter().fold(0.0f64, |m, v| m.max(v.abs())));
            last_residual = res_norm;
            if res_norm <= tol {
                iters = k;
                converged = true;
                break;
            }
            if k == self.config.newton_max_iter {
                break;
            }

            // Jacobian: M/dt + nu/2 K + 1/2 (N(u) + D(u))
            let jac = if let Some(n) = &n_cur {
                let d = assemble_convection_derivative(&self.space, &u)?;
                SparseMatrix::linear_combination(&[
                    (1.0 / dt, &self.ops.mass),
                    (0.5 * nu, &self.ops.stiffness),
                    (0.5, n),
                    (0.5, &d),
                ])
            } else {
                SparseMatrix::linear_combination(&[
                    (1.0 / dt, &self.ops.mass),
                    (0.5 * nu, &self.ops.stiffness),
                ])
            };
            // solve J du - B^T q_new = -(R(u_k)), B du = -B u_k
            let mut r_mom = vec![0.0; n_u];
            self.ops.mass.matvec_add(1.0 / dt, u.coeffs(), &mut r_mom);
            self.ops
                .stiffness
                .matvec_add(0.5 * nu, u.coeffs(), &mut r_mom);
            if let Some(n) = &n_cur {
                n.matvec_add(0.5, u.coeffs(), &mut r_mom);
            }
            for i in 0..n_u {
                r_mom[i] = constant[i] - r_mom[i];
            }
            let mut g = vec![0.0; self.space.n_p()];
            self.ops.divergence.matvec_add(-1.0, u.coeffs(), &mut g);
            let sys = SaddleSystem::new(
                &self.space,
                jac,
                self.ops.divergence.clone(),
                self.ops.pressure_mean.clone(),
                r_mom,
                g,
            );
            let sol = self.solver.solve(&sys).map_err(|e| annotate(e, step_index, t_new))?;
            for (ui, di) in u.coeffs_mut().iter_mut().zip(sol.velocity.coeffs()) {
                *ui += di;
            }
            q = sol.pressure;
        }
        if !converged {
            return Err(Error::NewtonDiverged {
                step: step_index,
                time: t_new,
                residual: last_residual,
                iters: self.config.newton_max_iter,
            });
        }

        let pressure = FEField::from_coeffs(
            &self.space,
            FieldRole::Pressure,
            q.coeffs().iter().map(|v| 2.0 * v).collect(),
        );
        let mut mu = vec![0.0; n_u];
        self.ops.mass.matvec(u.coeffs(), &mut mu);
        let energy = 0.5 * u.coeffs().iter().zip(&mu).map(|(a, b)| a * b).sum::<f64>();
        let mut div = vec![0.0; self.space.n_p()];
        self.ops.divergence.matvec(u.coeffs(), &mut div);
        let div_residual = div.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        self.diagnostics.push(StepDiagnostics {
            time: t_new,
            energy,
            newton_iters: iters,
            div_residual,
        });

        Ok(GalerkinState {
            time: t_new,
            velocity: u,
            pressure,
            udot: None,
        })
    }

    /// Full evolution: projected initial data, `t_final / dt` trapezoid
    /// steps, and the recovered time derivative at the final time.
    pub fn run(&mut self, u0: impl Fn([f64; 2]) -> [f64; 2]) -> Result<GalerkinState> {
        let mut state = self.initial_state(u0)?;
        for _ in 0..self.config.n_steps() {
            state = self.step(&state)?;
        }
        let (udot, _) = recover_time_derivative(&self.ops, &self.config, &state)?;
        state.udot = Some(udot);
        Ok(state)
    }
}

fn annotate(e: Error, step: usize, time: f64) -> Error {
    match e {
        Error::Solver(msg) => Error::Solver(format!("step {step} (t = {time}): {msg}")),
        other => other,
    }
}

/// Recovers the exact semidiscrete time derivative at a state: `udot`
/// solves the constrained mass system
///
/// ```text
/// M udot - B^T q = F(t) - nu K u - N(u) u + B^T p,   B udot = 0,
/// ```
///
/// so `udot` is the derivative implied by the spatial semidiscretization at
/// `(u, p)`. The second return value is the instantaneous semidiscrete
/// pressure `p + q` (useful at `t = 0`, where no pressure is known yet).
pub fn recover_time_derivative(
    ops: &OperatorSet,
    config: &EvolutionConfig,
    state: &GalerkinState,
) -> Result<(FEField, FEField)> {
    let space = ops.space();
    let rule = QuadRule::for_degree(ASSEMBLY_DEGREE)?;
    let mut rhs = config.forcing.load(space, state.time, &rule)?;
    ops.stiffness
        .matvec_add(-config.nu, state.velocity.coeffs(), &mut rhs);
    if !config.stokes_only {
        let n = assemble_convection(space, Wind::Field(&state.velocity), ConvectionMode::Skew)?;
        n.matvec_add(-1.0, state.velocity.coeffs(), &mut rhs);
    }
    ops.divergence
        .tr_matvec_add(1.0, state.pressure.coeffs(), &mut rhs);
    let sys = SaddleSystem::with_operators(ops, ops.mass.clone(), rhs);
    let sol = crate::saddle::solve_saddle(&sys)?;
    let mut p_inst = sol.pressure;
    for (pi, ps) in p_inst.coeffs_mut().iter_mut().zip(state.pressure.coeffs()) {
        *pi += ps;
    }
    Ok((sol.velocity, p_inst.normalize_pressure()))
}
