//! Manufactured solutions driving the experiments.
//!
//! Experiment 1 uses the forced vortex pair
//!
//! ```text
//! u1 = pi t sin^2(pi x) sin(2 pi y)
//! u2 = -pi t sin^2(pi y) sin(2 pi x)
//! p  = 20 t x^2 y
//! ```
//!
//! with the body force derived in closed form from
//! `f = u_t - nu Lap(u) + (u . grad) u + grad p`. Experiment 2 starts from a
//! divergence-free vortex with `f = 0`.

use std::f64::consts::PI;

/// Viscosity of the first experiment.
pub const EXP1_NU: f64 = 0.05;

/// Exact velocity of experiment 1.
pub fn exp1_velocity(p: [f64; 2], t: f64) -> [f64; 2] {
    let [x, y] = p;
    [
        PI * t * (PI * x).sin().powi(2) * (2.0 * PI * y).sin(),
        -PI * t * (PI * y).sin().powi(2) * (2.0 * PI * x).sin(),
    ]
}

/// Exact velocity gradient; `grad[c]` is the gradient of component `c`.
pub fn exp1_velocity_grad(p: [f64; 2], t: f64) -> [[f64; 2]; 2] {
    let [x, y] = p;
    let (sx, s2x, c2x) = ((PI * x).sin(), (2.0 * PI * x).sin(), (2.0 * PI * x).cos());
    let (sy, s2y, c2y) = ((PI * y).sin(), (2.0 * PI * y).sin(), (2.0 * PI * y).cos());
    let pi2t = PI * PI * t;
    [
        [pi2t * s2x * s2y, 2.0 * pi2t * sx * sx * c2y],
        [-2.0 * pi2t * sy * sy * c2x, -pi2t * s2y * s2x],
    ]
}

/// Exact pressure of experiment 1 (not mean-normalized).
pub fn exp1_pressure(p: [f64; 2], t: f64) -> f64 {
    20.0 * t * p[0] * p[0] * p[1]
}

/// Closed-form body force of experiment 1 at viscosity `nu`.
pub fn exp1_forcing(p: [f64; 2], t: f64, nu: f64) -> [f64; 2] {
    let [x, y] = p;
    let sx = (PI * x).sin();
    let sy = (PI * y).sin();
    let (s2x, c2x) = ((2.0 * PI * x).sin(), (2.0 * PI * x).cos());
    let (s2y, c2y) = ((2.0 * PI * y).sin(), (2.0 * PI * y).cos());
    let pi3 = PI * PI * PI;

    let ut1 = PI * sx * sx * s2y;
    let ut2 = -PI * sy * sy * s2x;
    let lap1 = 2.0 * pi3 * t * s2y * (c2x - 2.0 * sx * sx);
    let lap2 = -2.0 * pi3 * t * s2x * (c2y - 2.0 * sy * sy);
    let conv1 = pi3 * t * t * s2x * sx * sx * (s2y * s2y - 2.0 * sy * sy * c2y);
    let conv2 = pi3 * t * t * s2y * sy * sy * (s2x * s2x - 2.0 * sx * sx * c2x);
    let px = 40.0 * t * x * y;
    let py = 20.0 * t * x * x;

    [
        ut1 - nu * lap1 + conv1 + px,
        ut2 - nu * lap2 + conv2 + py,
    ]
}

/// Steady body force for the Stokes problem whose solution is the
/// experiment-1 field frozen at time `t`: `f = -nu Lap(u) + grad p`.
pub fn steady_stokes_forcing(p: [f64; 2], t: f64, nu: f64) -> [f64; 2] {
    let [x, y] = p;
    let sx = (PI * x).sin();
    let sy = (PI * y).sin();
    let (s2x, c2x) = ((2.0 * PI * x).sin(), (2.0 * PI * x).cos());
    let (s2y, c2y) = ((2.0 * PI * y).sin(), (2.0 * PI * y).cos());
    let pi3 = PI * PI * PI;
    let lap1 = 2.0 * pi3 * t * s2y * (c2x - 2.0 * sx * sx);
    let lap2 = -2.0 * pi3 * t * s2x * (c2y - 2.0 * sy * sy);
    [-nu * lap1 + 40.0 * t * x * y, -nu * lap2 + 20.0 * t * x * x]
}

/// Steady Oseen forcing with the exact velocity as wind:
/// `f = -nu Lap(u) + (u . grad) u + grad p`.
pub fn steady_oseen_forcing(p: [f64; 2], t: f64, nu: f64) -> [f64; 2] {
    let base = steady_stokes_forcing(p, t, nu);
    let u = exp1_velocity(p, t);
    let g = exp1_velocity_grad(p, t);
    [
        base[0] + u[0] * g[0][0] + u[1] * g[0][1],
        base[1] + u[0] * g[1][0] + u[1] * g[1][1],
    ]
}

/// Initial velocity of experiment 2 (`f = 0`).
pub fn exp2_initial(p: [f64; 2]) -> [f64; 2] {
    let [x, y] = p;
    let sx = (PI * x).sin();
    let sy = (PI * y).sin();
    [
        -6.0 * sx.powi(3) * sy * sy * (PI * y).cos(),
        6.0 * sx * sx * sy.powi(3) * (PI * x).cos(),
    ]
}
