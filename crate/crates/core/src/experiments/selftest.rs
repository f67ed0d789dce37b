//! Fast structural invariant suite behind the `selftest` CLI subcommand.
//!
//! Each check either passes, fails with a detail string (threshold
//! violation), or errors out (numerical machinery broke). The whole battery
//! stays well under half a minute.

use std::sync::Arc;

use crate::assembly::{
    assemble_convection, assemble_operators, ConvectionMode, Wind,
};
use crate::error::Result;
use crate::evolution::{Evolution, EvolutionConfig, Forcing};
use crate::experiments::mms;
use crate::fe_basis::{self, ShapeKind, MAX_LOCAL};
use crate::fe_space::{FEField, FESpacePair, Family, FieldRole};
use crate::mesh::StructuredTriMesh;
use crate::quadrature::{reference_moment, QuadRule, MAX_DEGREE};
use crate::saddle::leray_project;

#[derive(Debug, Clone)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl CheckResult {
    fn new(name: &str, passed: bool, detail: String) -> Self {
        Self {
            name: name.to_string(),
            passed,
            detail,
        }
    }
}

/// Deterministic stream of floats in (-1, 1); keeps the core crate free of
/// an RNG dependency.
struct SplitMix(u64);

impl SplitMix {
    fn next(&mut self) -> f64 {
        self.0 = self.0.wrapping_add(0x9e3779b97f4a7c15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
        z ^= z >> 31;
        (z >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
    }
}

pub fn run_selftest() -> Result<Vec<CheckResult>> {
    let mut results = Vec::new();

    // quadrature moment exactness
    let mut worst = 0.0f64;
    for d in 1..=MAX_DEGREE {
        let rule = QuadRule::for_degree(d)?;
        for a in 0..=d {
            for b in 0..=(d - a) {
                for c in 0..=(d - a - b) {
                    let quad: f64 = rule
                        .points()
                        .iter()
                        .zip(rule.weights())
                        .map(|(l, &w)| {
                            w * l[0].powi(a as i32) * l[1].powi(b as i32) * l[2].powi(c as i32)
                        })
                        .sum::<f64>()
                        * 0.5;
                    let exact = reference_moment(a, b, c);
                    worst = worst.max((quad - exact).abs() / exact);
                }
            }
        }
    }
    results.push(CheckResult::new(
        "quadrature moment exactness (degrees 1..=10)",
        worst < 1e-13,
        format!("worst relative error {worst:.2e}"),
    ));

    // shape functions: Kronecker, partition of unity, bubble vanishing
    let mut ok = true;
    let mut detail = String::new();
    let p2_nodes = [
        [1.0, 0.0, 0.0],
        [0.0, 1.0, 0.0],
        [0.0, 0.0, 1.0],
        [0.0, 0.5, 0.5],
        [0.5, 0.0, 0.5],
        [0.5, 0.5, 0.0],
    ];
    for (k, &node) in p2_nodes.iter().enumerate() {
        let (v, _) = fe_basis::eval_p2(node);
        for (j, &vj) in v.iter().enumerate() {
            let expect = if j == k { 1.0 } else { 0.0 };
            if (vj - expect).abs() > 1e-14 {
                ok = false;
                detail = format!("P2 node {k} function {j}: {vj}");
            }
        }
    }
    let mut stream = SplitMix(1);
    for _ in 0..25 {
        let a = 0.5 * (stream.next() + 1.0) * 0.8 + 0.05;
        let b = (0.5 * (stream.next() + 1.0)) * (0.9 - a) + 0.05;
        let l = [1.0 - a - b, a, b];
        let (v1, _) = fe_basis::eval_p1(l);
        let (v2, _) = fe_basis::eval_p2(l);
        if (v1.iter().sum::<f64>() - 1.0).abs() > 1e-14
            || (v2.iter().sum::<f64>() - 1.0).abs() > 1e-14
        {
            ok = false;
            detail = format!("partition of unity violated at {l:?}");
        }
        let (bv, _) = fe_basis::eval_bubble([a, 1.0 - a, 0.0]);
        if bv.abs() > 1e-14 {
            ok = false;
            detail = format!("bubble does not vanish on the boundary: {bv:e}");
        }
    }
    // finite-difference gradients along the constraint surface
    let h = 1e-6;
    for kind in [ShapeKind::P1, ShapeKind::P2, ShapeKind::Bubble] {
        for trial in 0..10 {
            let a = 0.05 + 0.4 * (0.5 * (stream.next() + 1.0));
            let b = 0.05 + 0.4 * (0.5 * (stream.next() + 1.0));
            let l = [1.0 - a - b, a, b];
            let mut v = [0.0; MAX_LOCAL];
            let mut d = [[0.0; 3]; MAX_LOCAL];
            kind.eval(l, &mut v, &mut d);
            for dir in 0..2 {
                let mut lp = l;
                let mut lm = l;
                lp[dir] += h;
                lp[2] -= h;
                lm[dir] -= h;
                lm[2] += h;
                let mut vp = [0.0; MAX_LOCAL];
                let mut vm = [0.0; MAX_LOCAL];
                let mut scratch = [[0.0; 3]; MAX_LOCAL];
                kind.eval(lp, &mut vp, &mut scratch);
                kind.eval(lm, &mut vm, &mut scratch);
                for f in 0..kind.count() {
                    let fd = (vp[f] - vm[f]) / (2.0 * h);
                    let exact = d[f][dir] - d[f][2];
                    if (fd - exact).abs() / exact.abs().max(1.0) > 1e-6 {
                        ok = false;
                        detail =
                            format!("{kind:?} gradient mismatch (trial {trial}, fn {f})");
                    }
                }
            }
        }
    }
    results.push(CheckResult::new(
        "shape functions (Kronecker, unity, bubble, gradients)",
        ok,
        if ok { "all nodal identities hold".into() } else { detail },
    ));

    // point location round trip
    let mesh = StructuredTriMesh::unit_square(7)?;
    let mut worst = 0.0f64;
    for i in 0..=40 {
        for j in 0..=40 {
            let p = [i as f64 / 40.0, j as f64 / 40.0];
            let (t, l) = mesh.locate_point(p)?;
            let q = mesh.bary_to_point(t, l);
            worst = worst.max((q[0] - p[0]).abs().max((q[1] - p[1]).abs()));
        }
    }
    results.push(CheckResult::new(
        "point location round trip",
        worst < 1e-13,
        format!("worst reconstruction error {worst:.2e}"),
    ));

    // discrete structure: skew annihilation, constant-pressure annihilation
    let space4 = Arc::new(FESpacePair::build(
        Arc::new(StructuredTriMesh::unit_square(4)?),
        Family::Mini,
    ));
    let ops4 = assemble_operators(&space4);
    let mut wind = FEField::zeros(&space4, FieldRole::Velocity);
    let mut stream = SplitMix(2);
    for c in wind.coeffs_mut() {
        *c = stream.next();
    }
    let n = assemble_convection(&space4, Wind::Field(&wind), ConvectionMode::Skew)?;
    let scale = n.max_abs();
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let v: Vec<f64> = (0..space4.n_u()).map(|_| stream.next()).collect();
        let mut nv = vec![0.0; space4.n_u()];
        n.matvec(&v, &mut nv);
        let q: f64 = v.iter().zip(&nv).map(|(a, b)| a * b).sum();
        let norm2: f64 = v.iter().map(|a| a * a).sum();
        worst = worst.max(q.abs() / (norm2 * scale));
    }
    results.push(CheckResult::new(
        "skew convection annihilation (100 random vectors)",
        worst <= 1e-12,
        format!("worst |v^T N v| / (|v|^2 |N|) = {worst:.2e}"),
    ));

    let ones = vec![1.0; space4.n_p()];
    let mut bt1 = vec![0.0; space4.n_u()];
    ops4.divergence.tr_matvec_add(1.0, &ones, &mut bt1);
    let max = bt1.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    results.push(CheckResult::new(
        "divergence annihilates constant pressure",
        max < 1e-12,
        format!("|B^T 1|_inf = {max:.2e}"),
    ));

    // Leray projection: constraint satisfied, idempotent
    let raw: Vec<f64> = (0..space4.n_u()).map(|_| stream.next()).collect();
    let raw = FEField::from_coeffs(&space4, FieldRole::Velocity, raw);
    let w = leray_project(&ops4, &raw)?;
    let mut bw = vec![0.0; space4.n_p()];
    ops4.divergence.matvec(w.coeffs(), &mut bw);
    let div = bw.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let w2 = leray_project(&ops4, &w)?;
    let drift = w
        .coeffs()
        .iter()
        .zip(w2.coeffs())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    results.push(CheckResult::new(
        "Leray projection (constraint + idempotence)",
        div <= 1e-10 && drift <= 1e-10,
        format!("|Bw|_inf = {div:.2e}, reprojection drift {drift:.2e}"),
    ));

    // short forced evolution: divergence stays pinned, Newton stays quadratic
    let forcing = Forcing::analytic(|p, t| mms::exp1_forcing(p, t, mms::EXP1_NU));
    let config = EvolutionConfig::new(mms::EXP1_NU, 0.05, 0.2, forcing);
    let mut evolution = Evolution::new(Arc::clone(&space4), config)?;
    evolution.run(|_| [0.0, 0.0])?;
    let max_div = evolution
        .diagnostics()
        .iter()
        .map(|d| d.div_residual)
        .fold(0.0, f64::max);
    let max_iters = evolution
        .diagnostics()
        .iter()
        .map(|d| d.newton_iters)
        .max()
        .unwrap_or(0);
    results.push(CheckResult::new(
        "trapezoid evolution (divergence + Newton count)",
        max_div <= 1e-9 && max_iters <= 5,
        format!("max |Bu|_inf = {max_div:.2e}, max Newton iterations {max_iters}"),
    ));

    Ok(results)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_checks_pass() {
        let results = run_selftest().unwrap();
        assert!(!results.is_empty());
        for r in &results {
            assert!(r.passed, "{}: {}", r.name, r.detail);
        }
    }
}
