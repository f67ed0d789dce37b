//! Reference-element shape functions: P1, P2 and the cubic bubble.
//!
//! Evaluators return values together with partial derivatives with respect
//! to the barycentric coordinates; physical gradients follow from
//! `grad phi = sum_i (d phi / d lambda_i) grad lambda_i`. Local ordering is
//! fixed: vertices in triangle order, then (P2) the edge midpoints opposite
//! vertex 1, 2, 3, then (mini) the bubble.

/// Maximum number of scalar shape functions per element (P2).
pub const MAX_LOCAL: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShapeKind {
    P1,
    P2,
    Bubble,
}

impl ShapeKind {
    pub fn count(self) -> usize {
        match self {
            ShapeKind::P1 => 3,
            ShapeKind::P2 => 6,
            ShapeKind::Bubble => 1,
        }
    }

    /// Values and barycentric partials of all functions in the set,
    /// written into the first `count()` slots of the output buffers.
    pub fn eval(self, l: [f64; 3], values: &mut [f64; MAX_LOCAL], partials: &mut [[f64; 3]; MAX_LOCAL]) {
        match self {
            ShapeKind::P1 => {
                let (v, d) = eval_p1(l);
                values[..3].copy_from_slice(&v);
                partials[..3].copy_from_slice(&d);
            }
            ShapeKind::P2 => {
                let (v, d) = eval_p2(l);
                *values = v;
                *partials = d;
            }
            ShapeKind::Bubble => {
                let (v, d) = eval_bubble(l);
                values[0] = v;
                partials[0] = d;
            }
        }
    }
}

/// P1: the barycentric coordinates themselves.
pub fn eval_p1(l: [f64; 3]) -> ([f64; 3], [[f64; 3]; 3]) {
    (
        l,
        [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
    )
}

/// P2: vertex functions `l_i (2 l_i - 1)`, edge functions `4 l_i l_j`
/// (ordered opposite vertex 1, 2, 3).
pub fn eval_p2(l: [f64; 3]) -> ([f64; 6], [[f64; 3]; 6]) {
    let [l1, l2, l3] = l;
    let values = [
        l1 * (2.0 * l1 - 1.0),
        l2 * (2.0 * l2 - 1.0),
        l3 * (2.0 * l3 - 1.0),
        4.0 * l2 * l3,
        4.0 * l3 * l1,
        4.0 * l1 * l2,
    ];
    let partials = [
        [4.0 * l1 - 1.0, 0.0, 0.0],
        [0.0, 4.0 * l2 - 1.0, 0.0],
        [0.0, 0.0, 4.0 * l3 - 1.0],
        [0.0, 4.0 * l3, 4.0 * l2],
        [4.0 * l3, 0.0, 4.0 * l1],
        [4.0 * l2, 4.0 * l1, 0.0],
    ];
    (values, partials)
}

/// Cubic bubble `27 l1 l2 l3`; value 1 at the barycenter, vanishes on the
/// triangle boundary.
pub fn eval_bubble(l: [f64; 3]) -> (f64, [f64; 3]) {
    let [l1, l2, l3] = l;
    (
        27.0 * l1 * l2 * l3,
        [27.0 * l2 * l3, 27.0 * l1 * l3, 27.0 * l1 * l2],
    )
}
