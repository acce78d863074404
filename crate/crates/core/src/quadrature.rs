//! Quadrature rules on the reference edge and reference triangle.
//!
//! Triangle rules are given in barycentric coordinates with weights that sum
//! to one; multiply by the element area to integrate.

/// Point on an edge parameterised by `t` in `[0, 1]` and its weight (sums to one).
#[derive(Debug, Clone, Copy)]
pub struct EdgePoint {
    pub t: f64,
    pub weight: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct TrianglePoint {
    pub bary: [f64; 3],
    pub weight: f64,
}

/// 3-point Gauss-Legendre on the unit interval, exact to degree 5.
pub fn edge_gauss3() -> [EdgePoint; 3] {
    let d = 0.5 * (3.0f64 / 5.0).sqrt();
    [
        EdgePoint {
            t: 0.5 - d,
            weight: 5.0 / 18.0,
        },
        EdgePoint {
            t: 0.5,
            weight: 8.0 / 18.0,
        },
        EdgePoint {
            t: 0.5 + d,
            weight: 5.0 / 18.0,
        },
    ]
}

/// Edge-midpoint rule, exact to degree 2.
pub fn triangle_midpoints() -> [TrianglePoint; 3] {
    let w = 1.0 / 3.0;
    [
        TrianglePoint {
            bary: [0.5, 0.5, 0.0],
            weight: w,
        },
        TrianglePoint {
            bary: [0.0, 0.5, 0.5],
            weight: w,
        },
        TrianglePoint {
            bary: [0.5, 0.0, 0.5],
            weight: w,
        },
    ]
}

/// 7-point Radon rule, exact to degree 5. Used for error norms against
/// smooth reference solutions.
pub fn triangle_degree5() -> [TrianglePoint; 7] {
    let s15 = 15.0f64.sqrt();
    let a = (6.0 - s15) / 21.0;
    let b = (6.0 + s15) / 21.0;
    let wa = (155.0 - s15) / 1200.0;
    let wb = (155.0 + s15) / 1200.0;
    let third = 1.0 / 3.0;
    [
        TrianglePoint {
            bary: [third, third, third],
            weight: 9.0 / 40.0,
        },
        TrianglePoint {
            bary: [a, a, 1.0 - 2.0 * a],
            weight: wa,
        },
        TrianglePoint {
            bary: [a, 1.0 - 2.0 * a, a],
            weight: wa,
        },
        TrianglePoint {
            bary: [1.0 - 2.0 * a, a, a],
            weight: wa,
        },
        TrianglePoint {
            bary: [b, b, 1.0 - 2.0 * b],
            weight: wb,
        },
        TrianglePoint {
            bary: [b, 1.0 - 2.0 * b, b],
            weight: wb,
        },
        TrianglePoint {
            bary: [1.0 - 2.0 * b, b, b],
            weight: wb,
        },
    ]
}
