//! Barriers, Jordan algebra and centrality duals for the nonnegative
//! orthant and the second-order cone, in any dimension.

use crate::error::{Error, Result};

/// A single cone factor.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cone {
    /// Nonnegative orthant of the given dimension.
    Nno(usize),
    /// Second-order cone `{x : x1 >= |x(2:n)|}` of the given dimension.
    Soc(usize),
}

impl Cone {
    pub fn dim(&self) -> usize {
        match *self {
            Cone::Nno(n) | Cone::Soc(n) => n,
        }
    }
}

/// Ordered product of weighted cone factors.
#[derive(Debug, Clone, Default)]
pub struct ConeProduct {
    factors: Vec<(Cone, f64)>,
}

/// Value, gradient and dense Hessian of a barrier at an interior point.
#[derive(Debug, Clone, PartialEq)]
pub struct Barrier {
    pub value: f64,
    pub gradient: Vec<f64>,
    pub hessian: Vec<Vec<f64>>,
}

/// Barrier evaluation tagged with feasibility; an infeasible point has
/// value `+inf`.
#[derive(Debug, Clone, PartialEq)]
pub enum BarrierEval {
    Interior(Barrier),
    Infeasible,
}

impl BarrierEval {
    pub fn value(&self) -> f64 {
        match self {
            BarrierEval::Interior(b) => b.value,
            BarrierEval::Infeasible => f64::INFINITY,
        }
    }

    pub fn is_infeasible(&self) -> bool {
        matches!(self, BarrierEval::Infeasible)
    }

    pub fn interior(self) -> Option<Barrier> {
        match self {
            BarrierEval::Interior(b) => Some(b),
            BarrierEval::Infeasible => None,
        }
    }
}

/// `-sum(log v_i)`.
pub fn phi_nno(v: &[f64]) -> BarrierEval {
    if v.iter().any(|&x| !(x > 0.0)) {
        return BarrierEval::Infeasible;
    }
    let n = v.len();
    let mut hessian = vec![vec![0.0; n]; n];
    for (i, &x) in v.iter().enumerate() {
        hessian[i][i] = 1.0 / (x * x);
    }
    BarrierEval::Interior(Barrier {
        value: -v.iter().map(|x| x.ln()).sum::<f64>(),
        gradient: v.iter().map(|x| -1.0 / x).collect(),
        hessian,
    })
}

/// `x1^2 - |x(2:n)|^2`.
pub fn soc_det(x: &[f64]) -> f64 {
    x[0] * x[0] - x[1..].iter().map(|v| v * v).sum::<f64>()
}

/// `-1/2 log(x1^2 - |x(2:n)|^2)`.
pub fn phi_soc(x: &[f64]) -> BarrierEval {
    if !soc_interior(x, 0.0) {
        return BarrierEval::Infeasible;
    }
    let n = x.len();
    let d = soc_det(x);
    // Jx with J = diag(1, -1, ..., -1)
    let jx: Vec<f64> = x
        .iter()
        .enumerate()
        .map(|(i, &v)| if i == 0 { v } else { -v })
        .collect();
    let gradient = jx.iter().map(|v| -v / d).collect();
    let mut hessian = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            hessian[i][j] = 2.0 * jx[i] * jx[j] / (d * d);
        }
        hessian[i][i] += if i == 0 { -1.0 / d } else { 1.0 / d };
    }
    BarrierEval::Interior(Barrier {
        value: -0.5 * d.ln(),
        gradient,
        hessian,
    })
}

fn soc_interior(x: &[f64], margin: f64) -> bool {
    if x.is_empty() || !x.iter().all(|v| v.is_finite()) {
        return false;
    }
    let rest = x[1..].iter().map(|v| v * v).sum::<f64>().sqrt();
    x[0] - rest > margin
}

/// Jordan product of two vectors of the same cone factor.
pub fn jordan_product(x: &[f64], s: &[f64], cone: Cone) -> Vec<f64> {
    assert_eq!(x.len(), s.len());
    match cone {
        Cone::Nno(_) => x.iter().zip(s).map(|(a, b)| a * b).collect(),
        Cone::Soc(_) => {
            let mut out = Vec::with_capacity(x.len());
            out.push(x.iter().zip(s).map(|(a, b)| a * b).sum());
            for i in 1..x.len() {
                out.push(x[0] * s[i] + s[0] * x[i]);
            }
            out
        }
    }
}

/// Identity element of the Jordan algebra.
pub fn identity(cone: Cone) -> Vec<f64> {
    match cone {
        Cone::Nno(n) => vec![1.0; n],
        Cone::Soc(n) => {
            let mut e = vec![0.0; n];
            if n > 0 {
                e[0] = 1.0;
            }
            e
        }
    }
}

/// Dual point `s` with `x ∘ s = mu e`.
pub fn dual_from_primal(x: &[f64], mu: f64, cone: Cone) -> Result<Vec<f64>> {
    match cone {
        Cone::Nno(_) => {
            if x.iter().any(|&v| !(v > 0.0)) {
                return Err(Error::InfeasibleStart);
            }
            Ok(x.iter().map(|v| mu / v).collect())
        }
        Cone::Soc(_) => {
            if !soc_interior(x, 0.0) {
                return Err(Error::InfeasibleStart);
            }
            let d = soc_det(x);
            Ok(x.iter()
                .enumerate()
                .map(|(i, &v)| if i == 0 { mu * v / d } else { -mu * v / d })
                .collect())
        }
    }
}

impl ConeProduct {
    pub fn new() -> Self {
        ConeProduct::default()
    }

    pub fn with(mut self, cone: Cone, weight: f64) -> Self {
        self.push(cone, weight);
        self
    }

    pub fn push(&mut self, cone: Cone, weight: f64) {
        assert!(weight > 0.0, "cone weights must be positive");
        self.factors.push((cone, weight));
    }

    pub fn factors(&self) -> &[(Cone, f64)] {
        &self.factors
    }

    pub fn dim(&self) -> usize {
        self.factors.iter().map(|(c, _)| c.dim()).sum()
    }

    /// Weighted sum of factor barriers.
    pub fn barrier(&self, v: &[f64]) -> BarrierEval {
        assert_eq!(v.len(), self.dim());
        let n = v.len();
        let mut out = Barrier {
            value: 0.0,
            gradient: vec![0.0; n],
            hessian: vec![vec![0.0; n]; n],
        };
        let mut off = 0;
        for &(cone, w) in &self.factors {
            let m = cone.dim();
            let part = &v[off..off + m];
            let eval = match cone {
                Cone::Nno(_) => phi_nno(part),
                Cone::Soc(_) => phi_soc(part),
            };
            let Some(b) = eval.interior() else {
                return BarrierEval::Infeasible;
            };
            out.value += w * b.value;
            for i in 0..m {
                out.gradient[off + i] += w * b.gradient[i];
                for j in 0..m {
                    out.hessian[off + i][off + j] += w * b.hessian[i][j];
                }
            }
            off += m;
        }
        BarrierEval::Interior(out)
    }
}

/// True iff every factor of `v` has slack strictly above `margin`
/// (`v_i > margin` for orthants, `x1 - |x(2:n)| > margin` for cones).
pub fn is_strictly_feasible(v: &[f64], product: &ConeProduct, margin: f64) -> bool {
    if v.len() != product.dim() {
        return false;
    }
    let mut off = 0;
    for &(cone, _) in product.factors() {
        let m = cone.dim();
        let part = &v[off..off + m];
        let ok = match cone {
            Cone::Nno(_) => part.iter().all(|&x| x > margin),
            Cone::Soc(_) => soc_interior(part, margin),
        };
        if !ok {
            return false;
        }
        off += m;
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * (1.0 + b.abs())
    }

    #[test]
    fn nno_values() {
        let b = phi_nno(&[1.0, 1.0, 1.0]).interior().unwrap();
        assert_eq!(b.value, 0.0);
        assert_eq!(b.gradient, vec![-1.0; 3]);
        assert!(close(phi_nno(&[std::f64::consts::E]).value(), -1.0, 1e-15));
        assert!(close(phi_nno(&[2.0, 0.5]).value(), 0.0, 1e-15));
        assert!(phi_nno(&[1.0, 0.0]).is_infeasible());
        assert_eq!(phi_nno(&[-1.0]).value(), f64::INFINITY);
    }

    #[test]
    fn soc_values() {
        let b = phi_soc(&[1.0, 0.0, 0.0]).interior().unwrap();
        assert_eq!(b.value, 0.0);
        assert_eq!(b.gradient, vec![-1.0, 0.0, 0.0]);
        assert!(close(phi_soc(&[2.0, 1.0, 1.0]).value(), -0.5 * 2f64.ln(), 1e-15));
        assert!(phi_soc(&[1.0, 1.0, 0.0]).is_infeasible());
    }

    #[test]
    fn jordan_examples() {
        assert_eq!(jordan_product(&[2.0, 3.0], &[4.0, 5.0], Cone::Nno(2)), vec![8.0, 15.0]);
        assert_eq!(jordan_product(&[2.0, 1.0], &[3.0, 1.0], Cone::Soc(2)), vec![7.0, 5.0]);
        for cone in [Cone::Nno(3), Cone::Soc(3)] {
            let x = [0.3, -1.2, 2.5];
            assert_eq!(jordan_product(&x, &identity(cone), cone), x.to_vec());
        }
    }

    #[test]
    fn dual_examples() {
        assert_eq!(dual_from_primal(&[2.0, 4.0], 8.0, Cone::Nno(2)).unwrap(), vec![4.0, 2.0]);
        let s = dual_from_primal(&[2.0, 1.0, 1.0], 2.0, Cone::Soc(3)).unwrap();
        assert_eq!(s, vec![2.0, -1.0, -1.0]);
        assert_eq!(jordan_product(&[2.0, 1.0, 1.0], &s, Cone::Soc(3)), vec![2.0, 0.0, 0.0]);
        assert!(dual_from_primal(&[1.0, 1.0], 1.0, Cone::Soc(2)).is_err());
    }

    #[test]
    fn feasibility_margins() {
        let nno = ConeProduct::new().with(Cone::Nno(1), 1.0);
        assert!(is_strictly_feasible(&[1e-30], &nno, 0.0));
        assert!(!is_strictly_feasible(&[1e-30], &nno, 1e-12));
        let soc = ConeProduct::new().with(Cone::Soc(3), 1.0);
        assert!(!is_strictly_feasible(&[1.0, 1.0, 0.0], &soc, 0.0));
        assert!(is_strictly_feasible(&[2.0, 1.0, 1.0], &soc, 0.0));
    }

    #[test]
    fn product_barrier_is_weighted_sum() {
        let p = ConeProduct::new().with(Cone::Soc(3), 2.0).with(Cone::Nno(2), 3.0);
        let v = [2.0, 1.0, 1.0, 2.0, 0.5];
        let b = p.barrier(&v).interior().unwrap();
        let expect = 2.0 * phi_soc(&v[..3]).value() + 3.0 * phi_nno(&v[3..]).value();
        assert!(close(b.value, expect, 1e-15));
        assert!(p.barrier(&[1.0, 1.0, 0.0, 1.0, 1.0]).is_infeasible());
    }
}
