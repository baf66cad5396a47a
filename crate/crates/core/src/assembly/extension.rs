//! Univariate minimization of the decoupled variables `s0` and `t`.

use super::objective::{Layout, PhaseKind};
use super::{Model, StepContext};
use crate::error::{Error, Result};
use crate::material::{h_alpha_point, CohesiveParams};

const MAX_DOUBLINGS: usize = 2000;
const BISECTIONS: usize = 200;

/// Finds the smallest offset `delta > 0` where `fprime(base + delta)` turns
/// positive, given `fprime -> -inf` as `delta -> 0+`, then bisects.
fn first_root(fprime: impl Fn(f64) -> f64, scale: f64) -> Result<f64> {
    let mut lo = scale;
    let mut shrink = 0;
    while fprime(lo) >= 0.0 {
        lo *= 0.5;
        shrink += 1;
        if shrink > MAX_DOUBLINGS || lo == 0.0 {
            return Err(Error::Bracket("derivative never negative near the boundary".into()));
        }
    }
    let mut hi = lo;
    let mut k = 0;
    loop {
        hi *= 2.0;
        k += 1;
        let v = fprime(hi);
        if v > 0.0 {
            break;
        }
        if v.is_nan() || k > MAX_DOUBLINGS || !hi.is_finite() {
            return Err(Error::Bracket("no sign change of the derivative".into()));
        }
        lo = hi;
    }
    for _ in 0..BISECTIONS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if fprime(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Local minimizer of `h_alpha(s; d) - (k/2) log(s^2 - r^2)` nearest to the
/// cone boundary `s = r`, with `k = mu zeta`.
pub fn extend_s0(r: f64, d: f64, alpha: f64, k: f64, omega: f64, p: &CohesiveParams) -> Result<f64> {
    let r = r.abs();
    let fprime = |delta: f64| {
        let s = r + delta;
        let (_, h1, _) = h_alpha_point(s, d, alpha, omega, p);
        h1 - k * s / (delta * (2.0 * r + delta))
    };
    let scale = 1e-3 * r.max(p.delta_u);
    Ok(r + first_root(fprime, scale)?)
}

/// Minimizer over `t` of `M t - mu log t - mu sum w_k log(r_k + t)`.
pub fn extend_t(big_m: f64, mu: f64, rows: &[(f64, f64)]) -> Result<f64> {
    let lo = rows.iter().map(|&(r, _)| -r).fold(0.0f64, f64::max);
    let fprime = |delta: f64| {
        let t = lo + delta;
        big_m - mu / t - rows.iter().map(|&(r, w)| mu * w / (r + t)).sum::<f64>()
    };
    let weight: f64 = 1.0 + rows.iter().map(|&(_, w)| w).sum::<f64>();
    let scale = (mu * weight / big_m).max(1e-300);
    Ok(lo + first_root(fprime, scale)?)
}

/// Packs `u` with optimally extended `s0` (and `t` in phase one).
pub fn optimal_extension(
    model: &Model,
    step: &StepContext,
    layout: &Layout,
    u: &[f64],
    mu: f64,
    alpha: f64,
    big_m: f64,
) -> Result<Vec<f64>> {
    let openings = model.opening_maps(u)?;
    let omegas = model.omegas();
    let p = &model.cohesive;
    let mut s0 = Vec::with_capacity(openings.len());
    for (k, c) in openings.iter().enumerate() {
        let r = (c[0] * c[0] + c[1] * c[1]).sqrt();
        s0.push(extend_s0(r, step.d[k], alpha, mu * p.zeta(omegas[k]), omegas[k], p)?);
    }
    let t = match layout.kind {
        PhaseKind::Two => None,
        PhaseKind::One => {
            let mut rows: Vec<(f64, f64)> = Vec::new();
            for (k, c) in openings.iter().enumerate() {
                rows.push((c[0], p.zeta(omegas[k])));
            }
            for r in model.contact.slack(u) {
                rows.push((r, 1.0));
            }
            let ub = layout.bc().u_bc();
            for &c in layout.bc().constrained() {
                rows.push((u[c] - ub[c], 1.0));
                rows.push((ub[c] - u[c], 1.0));
            }
            Some(extend_t(big_m, mu, &rows)?)
        }
    };
    Ok(layout.pack(u, &s0, t))
}
