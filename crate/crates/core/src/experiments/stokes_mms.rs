//! Steady Stokes/Oseen convergence check against the manufactured solution.

use std::sync::Arc;

use crate::assembly::{assemble_convection, assemble_load, assemble_operators, ConvectionMode, Wind};
use crate::error::Result;
use crate::experiments::errors::{
    compute_errors, slope_fit, AnalyticReference, ErrorNorms, ErrorReport, SlopeTable,
};
use crate::experiments::mms;
use crate::fe_space::{FESpacePair, Family};
use crate::mesh::StructuredTriMesh;
use crate::quadrature::{QuadRule, ASSEMBLY_DEGREE, ERROR_DEGREE};
use crate::saddle::{solve_saddle, SaddleSystem};
use crate::sparse::SparseMatrix;

#[derive(Debug, Clone)]
pub struct StokesMmsConfig {
    pub family: Family,
    pub levels: Vec<usize>,
    pub nu: f64,
    /// Time at which the experiment-1 solution is frozen.
    pub t_sample: f64,
    /// Solve the Oseen problem (exact wind in the operator) instead of Stokes.
    pub oseen: bool,
}

impl StokesMmsConfig {
    pub fn new(family: Family, levels: Vec<usize>) -> Self {
        Self {
            family,
            levels,
            nu: mms::EXP1_NU,
            t_sample: 0.5,
            oseen: false,
        }
    }
}

#[derive(Debug)]
pub struct StokesMmsOutput {
    pub reports: Vec<ErrorReport>,
    pub slopes: SlopeTable,
}

pub fn run_stokes_mms(config: &StokesMmsConfig) -> Result<StokesMmsOutput> {
    let t = config.t_sample;
    let nu = config.nu;
    let rule = QuadRule::for_degree(ASSEMBLY_DEGREE)?;
    let mut reports = Vec::new();
    let mut points: Vec<(f64, ErrorNorms)> = Vec::new();

    for &n in &config.levels {
        let mesh = Arc::new(StructuredTriMesh::unit_square(n)?);
        let space = Arc::new(FESpacePair::build(mesh, config.family));
        let ops = assemble_operators(&space);

        let a = if config.oseen {
            let wind = move |p: [f64; 2]| mms::exp1_velocity(p, t);
            let conv = assemble_convection(&space, Wind::Analytic(&wind), ConvectionMode::Plain)?;
            SparseMatrix::linear_combination(&[(nu, &ops.stiffness), (1.0, &conv)])
        } else {
            SparseMatrix::linear_combination(&[(nu, &ops.stiffness)])
        };
        let load = if config.oseen {
            assemble_load(&space, |p| Ok(mms::steady_oseen_forcing(p, t, nu)), &rule)?
        } else {
            assemble_load(&space, |p| Ok(mms::steady_stokes_forcing(p, t, nu)), &rule)?
        };
        let sol = solve_saddle(&SaddleSystem::with_operators(&ops, a, load))?;

        // mini velocities are reported through their linear part; the bubble
        // is stabilization, not approximation
        let velocity = if config.family == Family::Mini {
            sol.velocity.linear_part()?
        } else {
            sol.velocity
        };
        let reference = AnalyticReference {
            velocity: |p| mms::exp1_velocity(p, t),
            velocity_grad: |p| mms::exp1_velocity_grad(p, t),
            pressure: |p| mms::exp1_pressure(p, t),
        };
        let norms = compute_errors(
            space.mesh(),
            ERROR_DEGREE,
            &velocity,
            Some(&sol.pressure),
            &reference,
        )?;
        let h = space.mesh().h();
        points.push((h, norms));
        reports.push(ErrorReport {
            method: if config.oseen { "oseen" } else { "stokes" }.into(),
            coarse_h: h,
            fine_h: h,
            nu,
            time: t,
            norms,
        });
    }

    let mut slopes = SlopeTable::default();
    let method = if config.oseen { "oseen" } else { "stokes" };
    let l2: Vec<_> = points.iter().map(|(h, n)| (*h, n.u_l2)).collect();
    let h1: Vec<_> = points.iter().map(|(h, n)| (*h, n.u_h1)).collect();
    let p: Vec<_> = points.iter().map(|(h, n)| (*h, n.p_l2)).collect();
    slopes.push(method, "u_L2", slope_fit(&l2)?);
    slopes.push(method, "u_H1", slope_fit(&h1)?);
    slopes.push(method, "p_L2", slope_fit(&p)?);
    Ok(StokesMmsOutput { reports, slopes })
}
