//! Normal and tangential jumps across interfaces with first and second
//! derivatives with respect to the twelve nodal displacements.

use crate::element::{edge_shape, edge_shape_deriv};

/// Opening at one interface Gauss point.
///
/// Local DOFs are ordered `[A_start, A_end, A_mid, B_start, B_end, B_mid]`
/// with `(x, y)` per node.
#[derive(Debug, Clone)]
pub struct Opening {
    /// `(s1, s2)`: normal jump and mixity-scaled tangential jump.
    pub c: [f64; 2],
    pub jac: [[f64; 12]; 2],
    pub hess: [[[f64; 12]; 12]; 2],
}

/// `[[0, 1], [-1, 0]]`, mapping a tangent to the normal pointing from A to B.
const ROT: [[f64; 2]; 2] = [[0.0, 1.0], [-1.0, 0.0]];
const EYE: [[f64; 2]; 2] = [[1.0, 0.0], [0.0, 1.0]];

/// Local map coefficients `(J_j, J_t)` at abscissa `eta`: per local DOF,
/// the multiplier of the jump and of the mean tangent component.
fn maps(eta: f64) -> ([f64; 6], [f64; 6]) {
    let n = edge_shape(eta);
    let dn = edge_shape_deriv(eta);
    let mut jj = [0.0; 6];
    let mut jt = [0.0; 6];
    for k in 0..3 {
        jj[k] = -n[k];
        jj[k + 3] = n[k];
        jt[k] = 0.5 * dn[k];
        jt[k + 3] = 0.5 * dn[k];
    }
    (jj, jt)
}

/// Mean deformed tangent `dx/deta` and jump at `eta`.
pub fn jump_and_tangent(x: &[[f64; 2]; 6], eta: f64) -> ([f64; 2], [f64; 2]) {
    let (jj, jt) = maps(eta);
    let mut j = [0.0; 2];
    let mut t = [0.0; 2];
    for k in 0..6 {
        for i in 0..2 {
            j[i] += jj[k] * x[k][i];
            t[i] += jt[k] * x[k][i];
        }
    }
    (j, t)
}

/// Opening values only, or `None` when the mean tangent collapses below `tmin`.
pub fn opening_value(x: &[[f64; 2]; 6], eta: f64, beta: f64, tmin: f64) -> Option<[f64; 2]> {
    let (j, t) = jump_and_tangent(x, eta);
    let nt = (t[0] * t[0] + t[1] * t[1]).sqrt();
    if !(nt >= tmin) {
        return None;
    }
    let rt = [ROT[0][0] * t[0] + ROT[0][1] * t[1], ROT[1][0] * t[0] + ROT[1][1] * t[1]];
    Some([
        (j[0] * rt[0] + j[1] * rt[1]) / nt,
        beta * (j[0] * t[0] + j[1] * t[1]) / nt,
    ])
}

/// Opening with derivatives.
pub fn opening(x: &[[f64; 2]; 6], eta: f64, beta: f64, tmin: f64) -> Option<Opening> {
    let (jj, jt) = maps(eta);
    let (j, t) = jump_and_tangent(x, eta);
    let nt = (t[0] * t[0] + t[1] * t[1]).sqrt();
    if !(nt >= tmin) {
        return None;
    }
    let mut out = Opening {
        c: [0.0; 2],
        jac: [[0.0; 12]; 2],
        hess: [[[0.0; 12]; 12]; 2],
    };
    let nt3 = nt * nt * nt;
    let nt5 = nt3 * nt * nt;
    for (m, (a, scale)) in [(ROT, 1.0), (EYE, beta)].into_iter().enumerate() {
        let at = mv(&a, &t);
        let atj = [a[0][0] * j[0] + a[1][0] * j[1], a[0][1] * j[0] + a[1][1] * j[1]];
        let f = j[0] * at[0] + j[1] * at[1];
        let fj = [at[0] / nt, at[1] / nt];
        let ft = [atj[0] / nt - f * t[0] / nt3, atj[1] / nt - f * t[1] / nt3];
        let mut fjt = [[0.0; 2]; 2];
        let mut ftt = [[0.0; 2]; 2];
        for r in 0..2 {
            for c in 0..2 {
                fjt[r][c] = a[r][c] / nt - at[r] * t[c] / nt3;
                let id = if r == c { 1.0 } else { 0.0 };
                ftt[r][c] = -(atj[r] * t[c] + t[r] * atj[c]) / nt3
                    - f * (id / nt3 - 3.0 * t[r] * t[c] / nt5);
            }
        }
        out.c[m] = scale * f / nt;
        for k in 0..6 {
            for i in 0..2 {
                out.jac[m][2 * k + i] = scale * (jj[k] * fj[i] + jt[k] * ft[i]);
            }
        }
        for k in 0..6 {
            for i in 0..2 {
                for l in 0..6 {
                    for q in 0..2 {
                        out.hess[m][2 * k + i][2 * l + q] = scale
                            * (jj[k] * jt[l] * fjt[i][q]
                                + jt[k] * jj[l] * fjt[q][i]
                                + jt[k] * jt[l] * ftt[i][q]);
                    }
                }
            }
        }
    }
    Some(out)
}

fn mv(a: &[[f64; 2]; 2], v: &[f64; 2]) -> [f64; 2] {
    [a[0][0] * v[0] + a[0][1] * v[1], a[1][0] * v[0] + a[1][1] * v[1]]
}
