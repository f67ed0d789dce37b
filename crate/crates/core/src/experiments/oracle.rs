//! Disk-cached fine-mesh reference solution for experiment 2.
//!
//! Experiment 2 has no closed-form solution, so methods are compared
//! against a mini-element Galerkin evolution on a finer mesh. The run is
//! deterministic, so the cache stores plain-text coefficients (`{:e}`
//! round-trips exactly) keyed by `(nu, t_final, N, dt)`; a corrupt or
//! mismatched file is silently recomputed.

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use crate::error::Result;
use crate::evolution::{Evolution, EvolutionConfig, Forcing, GalerkinState};
use crate::experiments::mms;
use crate::fe_space::{FEField, FESpacePair, Family, FieldRole};
use crate::mesh::StructuredTriMesh;

#[derive(Debug, Clone)]
pub struct OracleConfig {
    /// Reference mesh subdivisions (one refinement beyond every compared mesh).
    pub n_ref: usize,
    pub dt: f64,
    pub cache_dir: PathBuf,
}

impl OracleConfig {
    pub fn new(cache_dir: impl Into<PathBuf>) -> Self {
        Self {
            n_ref: 40,
            dt: 1.0 / 400.0,
            cache_dir: cache_dir.into(),
        }
    }

    fn cache_file(&self, nu: f64, t_final: f64, n: usize) -> PathBuf {
        self.cache_dir
            .join(format!("oracle_nu{:e}_T{:e}_N{}_dt{:e}.txt", nu, t_final, n, self.dt))
    }
}

/// Fine Galerkin evolution of the experiment-2 problem at mesh `1/n`,
/// cached on disk.
pub fn reference_oracle(
    nu: f64,
    t_final: f64,
    n: usize,
    config: &OracleConfig,
) -> Result<GalerkinState> {
    let mesh = Arc::new(StructuredTriMesh::unit_square(n)?);
    let space = Arc::new(FESpacePair::build(mesh, Family::Mini));
    let path = config.cache_file(nu, t_final, n);

    if let Some(state) = try_load(&path, nu, t_final, n, config.dt, &space) {
        return Ok(state);
    }

    let evo_config = EvolutionConfig::new(nu, config.dt, t_final, Forcing::Zero);
    let mut evolution = Evolution::new(Arc::clone(&space), evo_config)?;
    let state = evolution.run(mms::exp2_initial)?;

    // free decay: the energy should not grow step over step
    let mut prev = f64::INFINITY;
    for d in evolution.diagnostics() {
        if d.energy > prev + 1e-10 * prev.abs() {
            log::warn!(
                "oracle (nu = {nu}, N = {n}): energy grew at t = {} ({} -> {})",
                d.time,
                prev,
                d.energy
            );
        }
        prev = d.energy;
    }

    if let Err(e) = store(&path, nu, t_final, n, config.dt, &state) {
        log::warn!("could not write oracle cache {}: {e}", path.display());
    }
    Ok(state)
}

fn try_load(
    path: &Path,
    nu: f64,
    t_final: f64,
    n: usize,
    dt: f64,
    space: &Arc<FESpacePair>,
) -> Option<GalerkinState> {
    let file = fs::File::open(path).ok()?;
    let mut lines = BufReader::new(file).lines();
    let mut next = || lines.next()?.ok();
    if next()? != "twogrid-oracle v1" {
        return None;
    }
    let header = next()?;
    let expected = header_line(nu, t_final, n, dt);
    if header != expected {
        return None;
    }
    let counts = next()?;
    let mut parts = counts.split_whitespace();
    let n_u: usize = parts.next()?.parse().ok()?;
    let n_p: usize = parts.next()?.parse().ok()?;
    if n_u != space.n_u() || n_p != space.n_p() {
        return None;
    }
    let mut read_vec = |len: usize| -> Option<Vec<f64>> {
        let mut v = Vec::with_capacity(len);
        for _ in 0..len {
            v.push(next()?.parse().ok()?);
        }
        Some(v)
    };
    let u = read_vec(n_u)?;
    let p = read_vec(n_p)?;
    let udot = read_vec(n_u)?;
    Some(GalerkinState {
        time: t_final,
        velocity: FEField::from_coeffs(space, FieldRole::Velocity, u),
        pressure: FEField::from_coeffs(space, FieldRole::Pressure, p),
        udot: Some(FEField::from_coeffs(space, FieldRole::Velocity, udot)),
    })
}

fn header_line(nu: f64, t_final: f64, n: usize, dt: f64) -> String {
    format!("nu {:e} t_final {:e} n {} dt {:e}", nu, t_final, n, dt)
}

fn store(path: &Path, nu: f64, t_final: f64, n: usize, dt: f64, state: &GalerkinState) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let tmp = path.with_extension("tmp");
    {
        let mut w = std::io::BufWriter::new(fs::File::create(&tmp)?);
        writeln!(w, "twogrid-oracle v1")?;
        writeln!(w, "{}", header_line(nu, t_final, n, dt))?;
        writeln!(
            w,
            "{} {}",
            state.velocity.coeffs().len(),
            state.pressure.coeffs().len()
        )?;
        for v in state.velocity.coeffs() {
            writeln!(w, "{v:e}")?;
        }
        for v in state.pressure.coeffs() {
            writeln!(w, "{v:e}")?;
        }
        for v in state.udot.as_ref().expect("oracle state has udot").coeffs() {
            writeln!(w, "{v:e}")?;
        }
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_config(dir: &Path) -> OracleConfig {
        OracleConfig {
            n_ref: 6,
            dt: 0.05,
            cache_dir: dir.to_path_buf(),
        }
    }

    #[test]
    fn cache_round_trip_and_corruption_recovery() {
        let dir = std::env::temp_dir().join(format!("twogrid-oracle-test-{}", std::process::id()));
        let _ = fs::remove_dir_all(&dir);
        let config = tiny_config(&dir);

        let first = reference_oracle(0.05, 0.1, 6, &config).unwrap();
        let path = config.cache_file(0.05, 0.1, 6);
        assert!(path.exists());

        // second call must come from the cache, bit-identical
        let second = reference_oracle(0.05, 0.1, 6, &config).unwrap();
        assert_eq!(first.velocity.coeffs(), second.velocity.coeffs());
        assert_eq!(first.pressure.coeffs(), second.pressure.coeffs());
        assert_eq!(
            first.udot.as_ref().unwrap().coeffs(),
            second.udot.as_ref().unwrap().coeffs()
        );

        // corrupt the cache: the oracle must recompute, not fail
        fs::write(&path, "garbage").unwrap();
        let third = reference_oracle(0.05, 0.1, 6, &config).unwrap();
        for (a, b) in first.velocity.coeffs().iter().zip(third.velocity.coeffs()) {
            assert_eq!(a, b);
        }
        let _ = fs::remove_dir_all(&dir);
    }

    #[test]
    fn different_keys_use_different_files() {
        let config = tiny_config(Path::new("/tmp/unused"));
        let a = config.cache_file(0.01, 0.5, 40);
        let b = config.cache_file(0.005, 0.5, 40);
        let c = config.cache_file(0.01, 0.5, 32);
        assert_ne!(a, b);
        assert_ne!(a, c);
    }
}
