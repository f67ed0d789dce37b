//! Experiment 1: convergence of the Galerkin and postprocessed solutions
//! against the manufactured solution, over paired coarse/fine meshes.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::evolution::{Evolution, EvolutionConfig, Forcing};
use crate::experiments::errors::{
    compute_errors, slope_fit, AnalyticReference, ErrorReport, SlopeTable,
};
use crate::experiments::mms;
use crate::fe_space::{FESpacePair, Family};
use crate::mesh::StructuredTriMesh;
use crate::postprocess::{self, PostprocessMethod, PostprocessRequest};
use crate::quadrature::ERROR_DEGREE;

#[derive(Debug, Clone)]
pub struct Experiment1Config {
    /// `(coarse N, fine N)` pairs; mesh sizes are `1/N`.
    pub pairs: Vec<(usize, usize)>,
    pub nu: f64,
    pub t_final: f64,
    pub dt: f64,
}

impl Default for Experiment1Config {
    fn default() -> Self {
        Self {
            pairs: vec![(6, 20), (8, 26), (10, 32), (12, 36)],
            nu: mms::EXP1_NU,
            t_final: 0.5,
            dt: 0.01,
        }
    }
}

#[derive(Debug)]
pub struct Experiment1Output {
    /// Two rows per pair: `galerkin` then `postprocessed`.
    pub reports: Vec<ErrorReport>,
    pub slopes: SlopeTable,
}

pub fn run_experiment1(config: &Experiment1Config) -> Result<Experiment1Output> {
    let nu = config.nu;
    let t = config.t_final;
    let mut reports = Vec::new();

    for &(coarse_n, fine_n) in &config.pairs {
        let annotate = |e: Error| match e {
            Error::Solver(m) => {
                Error::Solver(format!("pair (1/{coarse_n}, 1/{fine_n}): {m}"))
            }
            other => other,
        };
        let coarse_mesh = Arc::new(StructuredTriMesh::unit_square(coarse_n)?);
        let coarse_space = Arc::new(FESpacePair::build(coarse_mesh, Family::Mini));
        let forcing = Forcing::analytic(move |p, s| mms::exp1_forcing(p, s, nu));
        let evo_config = EvolutionConfig::new(nu, config.dt, t, forcing.clone());
        let mut evolution =
            Evolution::new(Arc::clone(&coarse_space), evo_config).map_err(annotate)?;
        let state = evolution.run(|_| [0.0, 0.0]).map_err(annotate)?;

        let reference = AnalyticReference {
            velocity: |p| mms::exp1_velocity(p, t),
            velocity_grad: |p| mms::exp1_velocity_grad(p, t),
            pressure: |p| mms::exp1_pressure(p, t),
        };

        // Galerkin errors: linear part of the velocity, own mesh
        let galerkin_velocity = state.velocity.linear_part()?;
        let galerkin_norms = compute_errors(
            coarse_space.mesh(),
            ERROR_DEGREE,
            &galerkin_velocity,
            Some(&state.pressure),
            &reference,
        )?;
        reports.push(ErrorReport {
            method: "galerkin".into(),
            coarse_h: 1.0 / coarse_n as f64,
            fine_h: 1.0 / fine_n as f64,
            nu,
            time: t,
            norms: galerkin_norms,
        });

        // one Oseen postprocess on the fine mesh
        let fine_mesh = Arc::new(StructuredTriMesh::unit_square(fine_n)?);
        let fine_space = Arc::new(FESpacePair::build(fine_mesh, Family::Mini));
        let req = PostprocessRequest::new(
            &state,
            Arc::clone(&fine_space),
            nu,
            forcing,
            PostprocessMethod::OseenNew,
        );
        let (u_post, p_post) = postprocess::apply(&req).map_err(annotate)?;
        let post_velocity = u_post.linear_part()?;
        let post_norms = compute_errors(
            fine_space.mesh(),
            ERROR_DEGREE,
            &post_velocity,
            Some(&p_post),
            &reference,
        )?;
        reports.push(ErrorReport {
            method: "postprocessed".into(),
            coarse_h: 1.0 / coarse_n as f64,
            fine_h: 1.0 / fine_n as f64,
            nu,
            time: t,
            norms: post_norms,
        });
    }

    let mut slopes = SlopeTable::default();
    for method in ["galerkin", "postprocessed"] {
        let rows: Vec<&ErrorReport> =
            reports.iter().filter(|r| r.method == method).collect();
        for (norm, pick) in [
            ("u_L2", (|r: &ErrorReport| r.norms.u_l2) as fn(&ErrorReport) -> f64),
            ("u_H1", |r| r.norms.u_h1),
            ("p_L2", |r| r.norms.p_l2),
            ("u1_L2", |r| r.norms.u1_l2),
            ("u1_H1", |r| r.norms.u1_h1),
        ] {
            let pts: Vec<(f64, f64)> = rows.iter().map(|r| (r.coarse_h, pick(r))).collect();
            slopes.push(method, norm, slope_fit(&pts)?);
        }
    }
    Ok(Experiment1Output { reports, slopes })
}
