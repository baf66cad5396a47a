//! Bulk strain-energy densities and the cohesive interface law.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Published coefficient of the interface barrier weight `zeta = k G_c omega`.
pub const ZETA_SCALE: f64 = 1e4;

/// Coefficient used unless configured otherwise. The published value lets
/// the barrier break a closed interface well below `sigma_c` at the first
/// barrier parameter.
pub const DEFAULT_ZETA_SCALE: f64 = 1.0;
/// Coefficient of the quadratic interface regularization.
pub const REG_SCALE: f64 = 5e5;
/// Lower bound on the damage factor of the regularization.
pub const REG_FLOOR: f64 = 8e-6;

/// Bulk constitutive model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum BulkModel {
    /// Compressible neo-Hookean type energy of Knowles and Sternberg, plane stress.
    KnowlesSternberg { c1: f64, beta: f64 },
    /// Small-strain isotropic plane stress.
    Linear { e: f64, nu: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BulkParams {
    pub model: BulkModel,
    pub rho: f64,
}

impl BulkParams {
    /// Nonlinear model with `c1 = E/(4(1+nu))` and `beta = nu/(1-2nu)`.
    pub fn knowles_sternberg(e: f64, nu: f64, rho: f64) -> Result<Self> {
        check_elastic(e, nu, rho)?;
        Ok(BulkParams {
            model: BulkModel::KnowlesSternberg {
                c1: e / (4.0 * (1.0 + nu)),
                beta: nu / (1.0 - 2.0 * nu),
            },
            rho,
        })
    }

    pub fn linear(e: f64, nu: f64, rho: f64) -> Result<Self> {
        check_elastic(e, nu, rho)?;
        Ok(BulkParams {
            model: BulkModel::Linear { e, nu },
            rho,
        })
    }
}

fn check_elastic(e: f64, nu: f64, rho: f64) -> Result<()> {
    if !(e > 0.0) || !(nu > 0.0 && nu < 0.5) || !(rho > 0.0) {
        return Err(Error::Config(format!(
            "invalid elastic constants E={e}, nu={nu}, rho={rho}"
        )));
    }
    Ok(())
}

/// Deformation gradient flattened row-major: `[F11, F12, F21, F22]`.
pub type Mat2 = [f64; 4];

/// Energy density with first and second derivatives in flattened `F`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Density {
    pub psi: f64,
    pub dpsi: [f64; 4],
    pub d2psi: [[f64; 4]; 4],
}

pub fn det2(f: &Mat2) -> f64 {
    f[0] * f[3] - f[1] * f[2]
}

/// Bulk strain-energy density, shifted to vanish at `F = I`.
///
/// Fails with an inverted-element error when `det F <= 0`; the caller
/// replaces the element index.
pub fn bulk_energy_density(f: &Mat2, p: &BulkParams) -> Result<Density> {
    let j = det2(f);
    if !(j > 0.0) {
        return Err(Error::InvertedElement { element: usize::MAX });
    }
    match p.model {
        BulkModel::KnowlesSternberg { c1, beta } => {
            let k = 1.0 + 1.0 / beta;
            let q = -2.0 * beta / (1.0 + beta);
            let jq = j.powf(q);
            let psi_j = k * jq;
            let dpsi_j = k * q * jq / j;
            let d2psi_j = k * q * (q - 1.0) * jq / (j * j);
            let dj = [f[3], -f[2], -f[1], f[0]];
            let mut d2 = [[0.0; 4]; 4];
            for a in 0..4 {
                for b in 0..4 {
                    d2[a][b] = c1 * d2psi_j * dj[a] * dj[b];
                }
                d2[a][a] += 2.0 * c1;
            }
            d2[0][3] += c1 * dpsi_j;
            d2[3][0] += c1 * dpsi_j;
            d2[1][2] -= c1 * dpsi_j;
            d2[2][1] -= c1 * dpsi_j;
            let trc: f64 = f.iter().map(|v| v * v).sum();
            Ok(Density {
                psi: c1 * (trc + psi_j) - c1 * (2.0 + k),
                dpsi: std::array::from_fn(|a| c1 * (2.0 * f[a] + dpsi_j * dj[a])),
                d2psi: d2,
            })
        }
        BulkModel::Linear { e, nu } => {
            let c11 = e / (1.0 - nu * nu);
            let c12 = nu * c11;
            let g = e / (2.0 * (1.0 + nu));
            let e11 = f[0] - 1.0;
            let e22 = f[3] - 1.0;
            let e12 = 0.5 * (f[1] + f[2]);
            let psi = 0.5 * c11 * (e11 * e11 + e22 * e22) + c12 * e11 * e22 + 2.0 * g * e12 * e12;
            let mut d2 = [[0.0; 4]; 4];
            d2[0][0] = c11;
            d2[3][3] = c11;
            d2[0][3] = c12;
            d2[3][0] = c12;
            for a in 1..3 {
                for b in 1..3 {
                    d2[a][b] = g;
                }
            }
            Ok(Density {
                psi,
                dpsi: [
                    c11 * e11 + c12 * e22,
                    2.0 * g * e12,
                    2.0 * g * e12,
                    c11 * e22 + c12 * e11,
                ],
                d2psi: d2,
            })
        }
    }
}

/// Cohesive law constants; `delta_u = 2 G_c / sigma_c`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CohesiveParams {
    pub sigma_c: f64,
    pub g_c: f64,
    pub delta_u: f64,
    pub beta_mix: f64,
    /// Coefficient `k` of the barrier weight `zeta = k G_c omega`.
    pub zeta_scale: f64,
}

impl CohesiveParams {
    pub fn new(sigma_c: f64, g_c: f64, beta_mix: f64) -> Result<Self> {
        if !(sigma_c > 0.0) || !(g_c > 0.0) || !(beta_mix > 0.0) {
            return Err(Error::Config(format!(
                "invalid cohesive constants sigma_c={sigma_c}, G_c={g_c}, beta_mix={beta_mix}"
            )));
        }
        Ok(CohesiveParams {
            sigma_c,
            g_c,
            delta_u: 2.0 * g_c / sigma_c,
            beta_mix,
            zeta_scale: DEFAULT_ZETA_SCALE,
        })
    }

    pub fn with_zeta_scale(mut self, k: f64) -> Result<Self> {
        if !(k > 0.0) {
            return Err(Error::Config(format!("invalid barrier weight coefficient {k}")));
        }
        self.zeta_scale = k;
        Ok(self)
    }

    fn q(&self) -> f64 {
        -self.sigma_c / (2.0 * self.delta_u)
    }

    fn l(&self, d: f64) -> f64 {
        -2.0 * (self.delta_u - d) * self.q()
    }

    /// Barrier weight of an interface Gauss point with quadrature weight `omega`.
    pub fn zeta(&self, omega: f64) -> f64 {
        zeta(omega, self.g_c, self.zeta_scale)
    }
}

pub fn zeta(omega: f64, g_c: f64, k: f64) -> f64 {
    k * g_c * omega
}

/// Cohesive potential `g(delta; d)` and its first two derivatives in `delta`.
pub fn cohesive_g(delta: f64, d: f64, p: &CohesiveParams) -> (f64, f64, f64) {
    let q = p.q();
    let l = p.l(d);
    if delta <= d {
        (l * delta, l, 0.0)
    } else if delta <= p.delta_u {
        let r = delta - d;
        (l * delta + q * r * r, l + 2.0 * q * r, 2.0 * q)
    } else {
        let r = p.delta_u - d;
        (l * p.delta_u + q * r * r, 0.0, 0.0)
    }
}

/// Separable value, gradient and diagonal Hessian.
#[derive(Debug, Clone, PartialEq)]
pub struct Separable {
    pub value: f64,
    pub gradient: Vec<f64>,
    pub hessian_diag: Vec<f64>,
}

/// Interface potential `sum omega g(s0; d)`.
pub fn h(s0: &[f64], d: &[f64], omega: &[f64], p: &CohesiveParams) -> Separable {
    h_alpha(s0, d, 0.0, omega, p)
}

/// Regularized interface potential with extra terms
/// `REG_SCALE alpha omega max(1 - d/delta_u, REG_FLOOR) s0^2`.
pub fn h_alpha(s0: &[f64], d: &[f64], alpha: f64, omega: &[f64], p: &CohesiveParams) -> Separable {
    let n = s0.len();
    let mut out = Separable {
        value: 0.0,
        gradient: vec![0.0; n],
        hessian_diag: vec![0.0; n],
    };
    for i in 0..n {
        let (v, g1, g2) = h_alpha_point(s0[i], d[i], alpha, omega[i], p);
        out.value += v;
        out.gradient[i] = g1;
        out.hessian_diag[i] = g2;
    }
    out
}

/// Single Gauss point term of [`h_alpha`].
pub fn h_alpha_point(s0: f64, d: f64, alpha: f64, omega: f64, p: &CohesiveParams) -> (f64, f64, f64) {
    let (g, g1, g2) = cohesive_g(s0, d, p);
    let c = REG_SCALE * alpha * omega * (1.0 - d / p.delta_u).max(REG_FLOOR);
    (omega * g + c * s0 * s0, omega * g1 + 2.0 * c * s0, omega * g2 + 2.0 * c)
}

/// `min(delta_u, max(d_prev, delta_now))` elementwise.
pub fn update_damage(d_prev: &[f64], delta_now: &[f64], p: &CohesiveParams) -> Vec<f64> {
    d_prev
        .iter()
        .zip(delta_now)
        .map(|(&a, &b)| a.max(b).min(p.delta_u))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pmma() -> CohesiveParams {
        CohesiveParams::new(105e6, 352.0, 1.0).unwrap()
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(1e-300)
    }

    #[test]
    fn pmma_bulk_constants() {
        let p = BulkParams::knowles_sternberg(5.76e9, 0.42, 1180.0).unwrap();
        let BulkModel::KnowlesSternberg { c1, beta } = p.model else {
            unreachable!()
        };
        assert!(rel(c1, 1.0141e9) < 1e-4);
        assert!(rel(beta, 2.625) < 1e-12);
    }

    #[test]
    fn rest_state_is_stress_free() {
        let id = [1.0, 0.0, 0.0, 1.0];
        for p in [
            BulkParams::knowles_sternberg(5.76e9, 0.42, 1180.0).unwrap(),
            BulkParams::linear(200e9, 0.3, 7800.0).unwrap(),
        ] {
            let d = bulk_energy_density(&id, &p).unwrap();
            assert!(d.psi.abs() < 1e-3);
            for v in d.dpsi {
                assert!(v.abs() < 1e-3);
            }
        }
    }

    #[test]
    fn small_strain_limit_is_plane_stress() {
        let (e, nu) = (3.0e9, 0.3);
        let p = BulkParams::knowles_sternberg(e, nu, 1.0).unwrap();
        let d = bulk_energy_density(&[1.0, 0.0, 0.0, 1.0], &p).unwrap();
        let c11 = e / (1.0 - nu * nu);
        assert!(rel(d.d2psi[0][0], c11) < 1e-12);
        assert!(rel(d.d2psi[0][3], nu * c11) < 1e-12);
        let g = e / (2.0 * (1.0 + nu));
        assert!(rel(d.d2psi[1][1] + d.d2psi[1][2], 2.0 * g) < 1e-12);
    }

    #[test]
    fn inverted_deformation_is_rejected() {
        let p = BulkParams::linear(1.0, 0.3, 1.0).unwrap();
        assert!(matches!(
            bulk_energy_density(&[-1.0, 0.0, 0.0, 1.0], &p),
            Err(Error::InvertedElement { .. })
        ));
    }

    #[test]
    fn cohesive_examples() {
        let p = pmma();
        assert_eq!(cohesive_g(0.0, 0.0, &p).1, p.sigma_c);
        assert!(rel(cohesive_g(p.delta_u, 0.0, &p).0, p.g_c) < 1e-12);
        for delta in [0.0, 0.3 * p.delta_u, 2.0 * p.delta_u] {
            let (g, g1, _) = cohesive_g(delta, p.delta_u, &p);
            assert_eq!((g, g1), (0.0, 0.0));
        }
    }

    #[test]
    fn h_examples() {
        let p = pmma();
        assert_eq!(h(&[0.0], &[0.0], &[1.0], &p).value, 0.0);
        assert!(rel(h(&[p.delta_u], &[0.0], &[1.0], &p).value, p.g_c) < 1e-12);
        let two = h(&[1e-6, 3e-6], &[0.0, 1e-6], &[0.5, 2.0], &p).value;
        let one = h(&[1e-6], &[0.0], &[0.5], &p).value + h(&[3e-6], &[1e-6], &[2.0], &p).value;
        assert_eq!(two, one);
    }

    #[test]
    fn h_alpha_examples() {
        let p = pmma();
        let s = [3e-6];
        assert_eq!(h_alpha(&s, &[1e-6], 0.0, &[1.0], &p), h(&s, &[1e-6], &[1.0], &p));
        let extra = h_alpha(&[1.0], &[p.delta_u], 1.0, &[1.0], &p).value
            - h(&[1.0], &[p.delta_u], &[1.0], &p).value;
        assert!(rel(extra, 4.0) < 1e-12);
        let mu = 1e-6;
        let base = h(&s, &[0.0], &[1.0], &p).value;
        let extra = h_alpha(&s, &[0.0], mu, &[1.0], &p).value - base;
        assert!((extra - 5e5 * mu * s[0] * s[0]).abs() < 4.0 * f64::EPSILON * base);
    }

    #[test]
    fn damage_examples() {
        let p = pmma();
        let du = p.delta_u;
        assert_eq!(update_damage(&[0.0], &[0.0], &p), vec![0.0]);
        assert_eq!(update_damage(&[0.5 * du], &[0.2 * du], &p), vec![0.5 * du]);
        assert_eq!(update_damage(&[0.5 * du], &[2.0 * du], &p), vec![du]);
    }

    #[test]
    fn zeta_example() {
        assert!(rel(zeta(1e-3, 352.0, ZETA_SCALE), 3520.0) < 1e-12);
    }
}
