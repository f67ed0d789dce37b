//! Fine-mesh postprocessing of a coarse Galerkin state.
//!
//! Two one-shot corrections at a target time `t`:
//!
//! * `OseenNew` solves the fine Oseen problem with the coarse velocity as
//!   convecting wind in the operator and `f - du_H/dt` as data;
//! * `StokesStandard` solves a fine Stokes problem with the whole coarse
//!   convection moved into the data, `f - du_H/dt - (u_H . grad) u_H`.
//!
//! Coarse quantities are evaluated at fine quadrature points directly
//! through cross-grid field evaluation; nothing is projected onto the fine
//! space first.

use std::sync::Arc;

use crate::assembly::{assemble_convection, assemble_load, assemble_operators, ConvectionMode, Wind};
use crate::error::{Error, Result};
use crate::evolution::{Forcing, GalerkinState};
use crate::fe_space::{FEField, FESpacePair, Family};
use crate::quadrature::{QuadRule, ASSEMBLY_DEGREE};
use crate::saddle::{solve_saddle, SaddleSystem};
use crate::sparse::SparseMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PostprocessMethod {
    /// Fine Oseen solve with the coarse wind in the operator.
    OseenNew,
    /// Fine Stokes solve with the coarse convection in the data.
    StokesStandard,
}

pub struct PostprocessRequest<'a> {
    pub coarse: &'a GalerkinState,
    pub fine_space: Arc<FESpacePair>,
    pub nu: f64,
    pub forcing: Forcing,
    pub method: PostprocessMethod,
    /// Replace wind and derivative by their linear parts (mini only; the
    /// bubble components are a stabilization artifact, not approximation).
    pub use_linear_part: bool,
    /// Assemble the postprocess convection in skew form instead of the
    /// plain transport form. Off by default; exposed for experimentation.
    pub skew_convection: bool,
}

impl<'a> PostprocessRequest<'a> {
    pub fn new(
        coarse: &'a GalerkinState,
        fine_space: Arc<FESpacePair>,
        nu: f64,
        forcing: Forcing,
        method: PostprocessMethod,
    ) -> Self {
        let use_linear_part = coarse.velocity.space().family() == Family::Mini;
        Self {
            coarse,
            fine_space,
            nu,
            forcing,
            method,
            use_linear_part,
            skew_convection: false,
        }
    }
}

/// Runs the requested postprocess, returning the fine velocity and the
/// (zero-mean) fine pressure.
pub fn apply(req: &PostprocessRequest) -> Result<(FEField, FEField)> {
    let coarse_space = req.coarse.velocity.space();
    let udot = req.coarse.udot.as_ref().ok_or_else(|| {
        Error::invalid("postprocess needs the recovered time derivative in the coarse state")
    })?;

    let fine_h = req.fine_space.mesh().h();
    let coarse_h = coarse_space.mesh().h();
    if fine_h >= coarse_h && !Arc::ptr_eq(&req.fine_space, coarse_space) {
        log::warn!(
            "postprocess mesh (h = {fine_h}) is not finer than the coarse mesh (H = {coarse_h})"
        );
    }

    let take_linear = req.use_linear_part && coarse_space.family() == Family::Mini;
    let wind = if take_linear {
        req.coarse.velocity.linear_part()?
    } else {
        req.coarse.velocity.clone()
    };
    let wdot = if take_linear {
        udot.linear_part()?
    } else {
        udot.clone()
    };

    let ops = assemble_operators(&req.fine_space);
    let rule = QuadRule::for_degree(ASSEMBLY_DEGREE)?;
    let t = req.coarse.time;
    let forcing = req.forcing.clone();
    let f_at = move |p: [f64; 2]| -> [f64; 2] {
        match &forcing {
            Forcing::Zero => [0.0, 0.0],
            Forcing::Analytic(f) => f(p, t),
        }
    };

    let (a, load) = match req.method {
        PostprocessMethod::OseenNew => {
            let mode = if req.skew_convection {
                ConvectionMode::Skew
            } else {
                ConvectionMode::Plain
            };
            let n = assemble_convection(&req.fine_space, Wind::Field(&wind), mode)?;
            let a = SparseMatrix::linear_combination(&[(req.nu, &ops.stiffness), (1.0, &n)]);
            let load = assemble_load(
                &req.fine_space,
                |p| {
                    let f = f_at(p);
                    let wd = wdot.eval_velocity(p)?;
                    Ok([f[0] - wd[0], f[1] - wd[1]])
                },
                &rule,
            )?;
            (a, load)
        }
        PostprocessMethod::StokesStandard => {
            let a = SparseMatrix::linear_combination(&[(req.nu, &ops.stiffness)]);
            let load = assemble_load(
                &req.fine_space,
                |p| {
                    let f = f_at(p);
                    let wd = wdot.eval_velocity(p)?;
                    let (wv, wg) = wind.eval_velocity_grad(p)?;
                    let conv = [
                        wv[0] * wg[0][0] + wv[1] * wg[0][1],
                        wv[0] * wg[1][0] + wv[1] * wg[1][1],
                    ];
                    Ok([f[0] - wd[0] - conv[0], f[1] - wd[1] - conv[1]])
                },
                &rule,
            )?;
            (a, load)
        }
    };

    let sys = SaddleSystem::with_operators(&ops, a, load);
    let sol = solve_saddle(&sys).map_err(|e| match e {
        Error::Solver(msg) => Error::Solver(format!(
            "{:?} postprocess at t = {t}: {msg}",
            req.method
        )),
        other => other,
    })?;
    Ok((sol.velocity, sol.pressure))
}
