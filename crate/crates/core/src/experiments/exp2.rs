//! Experiment 2: free decay of a vortex at moderate Reynolds number, where
//! the three methods (coarse Galerkin, standard Stokes postprocess, new
//! Oseen postprocess) are compared against a fine reference evolution.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::evolution::{Evolution, EvolutionConfig, Forcing};
use crate::experiments::errors::{compute_errors, ErrorNorms, ErrorReport, FieldReference};
use crate::experiments::mms;
use crate::experiments::oracle::{reference_oracle, OracleConfig};
use crate::fe_space::{FEField, FESpacePair, Family};
use crate::mesh::StructuredTriMesh;
use crate::postprocess::{self, PostprocessMethod, PostprocessRequest};
use crate::quadrature::ERROR_DEGREE;

#[derive(Debug, Clone)]
pub struct Experiment2Config {
    pub nu: f64,
    pub coarse_n: usize,
    pub fine_n: usize,
    pub t_final: f64,
    pub dt: f64,
    /// Points per side of the grid sampling used for dumps and the
    /// oscillation metric.
    pub dump_grid: usize,
    pub oracle: OracleConfig,
    /// Companion mesh for the oracle adequacy check.
    pub adequacy_n: usize,
}

impl Experiment2Config {
    pub fn new(nu: f64, cache_dir: impl Into<std::path::PathBuf>) -> Self {
        Self {
            nu,
            coarse_n: 10,
            fine_n: 30,
            t_final: 0.5,
            dt: 1.0 / 200.0,
            dump_grid: 101,
            oracle: OracleConfig::new(cache_dir),
            adequacy_n: 32,
        }
    }
}

#[derive(Debug, Clone)]
pub struct MethodComparison {
    pub method: String,
    pub norms: ErrorNorms,
    /// Total variation of the sampled first velocity component along the
    /// horizontal midline; formalizes "oscillations".
    pub midline_tv: f64,
    /// Linear-part velocity, for grid dumps.
    pub velocity: FEField,
}

#[derive(Debug)]
pub struct Experiment2Output {
    pub comparisons: Vec<MethodComparison>,
    pub reports: Vec<ErrorReport>,
    /// `|G_adequacy - G_ref|_H1 / min(method H1 errors)`; the oracle is only
    /// trusted when this is below one half.
    pub adequacy_ratio: f64,
    /// Linear part of the reference velocity (for dumps).
    pub reference_velocity: FEField,
}

impl Experiment2Output {
    pub fn comparison(&self, method: &str) -> Option<&MethodComparison> {
        self.comparisons.iter().find(|c| c.method == method)
    }
}

pub fn run_experiment2(config: &Experiment2Config) -> Result<Experiment2Output> {
    let nu = config.nu;
    let t = config.t_final;

    // coarse Galerkin evolution
    let coarse_mesh = Arc::new(StructuredTriMesh::unit_square(config.coarse_n)?);
    let coarse_space = Arc::new(FESpacePair::build(coarse_mesh, Family::Mini));
    let evo_config = EvolutionConfig::new(nu, config.dt, t, Forcing::Zero);
    let mut evolution = Evolution::new(Arc::clone(&coarse_space), evo_config)?;
    let state = evolution.run(mms::exp2_initial)?;

    // fine reference and its adequacy companion
    let reference = reference_oracle(nu, t, config.oracle.n_ref, &config.oracle)?;
    let companion = reference_oracle(nu, t, config.adequacy_n, &config.oracle)?;
    let ref_velocity = reference.velocity.linear_part()?;
    let ref_space = ref_velocity.space().clone();
    let ref_mesh = ref_space.mesh();

    // both postprocesses on the fine mesh
    let fine_mesh = Arc::new(StructuredTriMesh::unit_square(config.fine_n)?);
    let fine_space = Arc::new(FESpacePair::build(fine_mesh, Family::Mini));
    let mut candidates: Vec<(String, FEField, FEField)> = Vec::new();
    candidates.push((
        "galerkin".into(),
        state.velocity.linear_part()?,
        state.pressure.clone(),
    ));
    for (name, method) in [
        ("stokes_standard", PostprocessMethod::StokesStandard),
        ("oseen_new", PostprocessMethod::OseenNew),
    ] {
        let req = PostprocessRequest::new(
            &state,
            Arc::clone(&fine_space),
            nu,
            Forcing::Zero,
            method,
        );
        let (u, p) = postprocess::apply(&req)?;
        candidates.push((name.into(), u.linear_part()?, p));
    }

    let mut comparisons = Vec::new();
    let mut reports = Vec::new();
    for (name, velocity, pressure) in candidates {
        let reference = FieldReference {
            velocity: &ref_velocity,
            pressure: Some(&reference.pressure),
        };
        let norms = compute_errors(ref_mesh, ERROR_DEGREE, &velocity, Some(&pressure), &reference)?;
        let midline_tv = midline_total_variation(&velocity, config.dump_grid)?;
        reports.push(ErrorReport {
            method: name.clone(),
            coarse_h: 1.0 / config.coarse_n as f64,
            fine_h: if name == "galerkin" {
                1.0 / config.coarse_n as f64
            } else {
                1.0 / config.fine_n as f64
            },
            nu,
            time: t,
            norms,
        });
        comparisons.push(MethodComparison {
            method: name,
            norms,
            midline_tv,
            velocity,
        });
    }

    // adequacy: distance between the two fine Galerkin runs, relative to
    // the smallest method error being measured
    let companion_velocity = companion.velocity.linear_part()?;
    let adequacy_norms = compute_errors(
        ref_mesh,
        ERROR_DEGREE,
        &companion_velocity,
        None,
        &FieldReference {
            velocity: &ref_velocity,
            pressure: None,
        },
    )?;
    let min_h1 = comparisons
        .iter()
        .map(|c| c.norms.u_h1)
        .fold(f64::INFINITY, f64::min);
    if min_h1 <= 0.0 {
        return Err(Error::NonFinite("vanishing method error in experiment 2".into()));
    }
    let adequacy_ratio = adequacy_norms.u_h1 / min_h1;

    Ok(Experiment2Output {
        comparisons,
        reports,
        adequacy_ratio,
        reference_velocity: ref_velocity,
    })
}

/// Total variation of the first velocity component sampled at `m` points
/// along the horizontal midline `y = 1/2`.
pub fn midline_total_variation(velocity: &FEField, m: usize) -> Result<f64> {
    if m < 2 {
        return Err(Error::invalid("midline sampling needs at least 2 points"));
    }
    let mut tv = 0.0;
    let mut prev = None;
    for i in 0..m {
        let x = i as f64 / (m - 1) as f64;
        let v = velocity.eval_velocity([x, 0.5])?[0];
        if let Some(p) = prev {
            tv += f64::abs(v - p);
        }
        prev = Some(v);
    }
    Ok(tv)
}
