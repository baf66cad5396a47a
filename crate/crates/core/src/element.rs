//! Six-node triangle and three-node edge interpolation with quadrature rules.

/// Local corner pairs and midside node of each triangle edge.
pub const TRI6_EDGES: [[usize; 3]; 3] = [[0, 1, 3], [1, 2, 4], [2, 0, 5]];

/// Shape function values at `(xi, eta)` in the reference triangle.
pub fn tri6_shape(xi: f64, eta: f64) -> [f64; 6] {
    let l1 = 1.0 - xi - eta;
    let (l2, l3) = (xi, eta);
    [
        l1 * (2.0 * l1 - 1.0),
        l2 * (2.0 * l2 - 1.0),
        l3 * (2.0 * l3 - 1.0),
        4.0 * l1 * l2,
        4.0 * l2 * l3,
        4.0 * l3 * l1,
    ]
}

/// Shape function derivatives `[dN/dxi, dN/deta]`.
pub fn tri6_grad(xi: f64, eta: f64) -> [[f64; 2]; 6] {
    let l1 = 1.0 - xi - eta;
    let (l2, l3) = (xi, eta);
    let d1 = 4.0 * l1 - 1.0;
    [
        [-d1, -d1],
        [4.0 * l2 - 1.0, 0.0],
        [0.0, 4.0 * l3 - 1.0],
        [4.0 * (l1 - l2), -4.0 * l2],
        [4.0 * l3, 4.0 * l2],
        [-4.0 * l3, 4.0 * (l1 - l3)],
    ]
}

/// Quadrature point on the reference triangle (weights sum to 1/2).
#[derive(Debug, Clone, Copy)]
pub struct TriPoint {
    pub xi: f64,
    pub eta: f64,
    pub w: f64,
}

/// Three-point interior rule, exact for quadratics.
pub fn tri_rule_3() -> Vec<TriPoint> {
    let (a, b, w) = (1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0);
    vec![
        TriPoint { xi: a, eta: a, w },
        TriPoint { xi: b, eta: a, w },
        TriPoint { xi: a, eta: b, w },
    ]
}

/// Six-point rule, exact for quartics.
pub fn tri_rule_6() -> Vec<TriPoint> {
    let a = 0.445_948_490_915_965;
    let wa = 0.223_381_589_678_011 / 2.0;
    let b = 0.091_576_213_509_771;
    let wb = 0.109_951_743_655_322 / 2.0;
    let mut v = Vec::with_capacity(6);
    for &(p, w) in &[(a, wa), (b, wb)] {
        let q = 1.0 - 2.0 * p;
        v.push(TriPoint { xi: p, eta: p, w });
        v.push(TriPoint { xi: q, eta: p, w });
        v.push(TriPoint { xi: p, eta: q, w });
    }
    v
}

pub fn tri_rule(order: usize) -> Vec<TriPoint> {
    if order >= 6 {
        tri_rule_6()
    } else {
        tri_rule_3()
    }
}

/// Three-point Gauss rule on `[-1, 1]` as `(abscissa, weight)`.
pub fn gauss_3() -> [(f64, f64); 3] {
    let a = (3.0f64 / 5.0).sqrt();
    [(-a, 5.0 / 9.0), (0.0, 8.0 / 9.0), (a, 5.0 / 9.0)]
}

/// Edge shape functions ordered (start, end, middle).
pub fn edge_shape(eta: f64) -> [f64; 3] {
    [0.5 * eta * (eta - 1.0), 0.5 * eta * (eta + 1.0), 1.0 - eta * eta]
}

pub fn edge_shape_deriv(eta: f64) -> [f64; 3] {
    [eta - 0.5, eta + 0.5, -2.0 * eta]
}

/// Jacobian `dX/d(xi, eta)` of a TRI6 element at a point, as `[[x_xi, x_eta], [y_xi, y_eta]]`.
pub fn tri6_jacobian(x: &[[f64; 2]; 6], dn: &[[f64; 2]; 6]) -> [[f64; 2]; 2] {
    let mut j = [[0.0; 2]; 2];
    for a in 0..6 {
        for r in 0..2 {
            for c in 0..2 {
                j[r][c] += x[a][r] * dn[a][c];
            }
        }
    }
    j
}
