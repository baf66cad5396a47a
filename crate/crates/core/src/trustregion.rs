//! Trust-region Newton minimization in a scaled norm with a multiplier
//! root find for the subproblem and a gradient-ratio safeguard.

use std::sync::Arc;

use log::{debug, trace};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sparse::{dot, norm2, Cholesky, Factor, Pattern, SymMatrix};

/// Smooth objective with an extended-value domain.
pub trait Function {
    fn dim(&self) -> usize;
    /// `+inf` outside the domain.
    fn value(&self, x: &[f64]) -> f64;
    fn gradient(&self, x: &[f64]) -> Option<(f64, Vec<f64>)>;
    fn hessian(&self, x: &[f64]) -> Option<(f64, Vec<f64>, SymMatrix)>;
    /// Typical magnitude of the variables, used by the step-size stop test.
    fn typical_scale(&self) -> f64 {
        1.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrConfig {
    /// Multiplier threshold for termination.
    pub tol1: f64,
    /// Componentwise step threshold, relative to `|xi_i| + typical scale`.
    pub tol2: f64,
    /// Bracket collapse threshold, relative to `1 + lambda_low`.
    pub tol3: f64,
    /// Relative radius-match tolerance.
    pub tol4: f64,
    pub max_iter: usize,
    /// Radius below which persistent rejection is an error, relative to the initial radius.
    pub min_radius: f64,
    /// Maximum multiplier iterations per subproblem.
    pub max_sub_iter: usize,
}

impl Default for TrConfig {
    fn default() -> Self {
        TrConfig {
            tol1: 1e-8,
            tol2: 1e-8,
            tol3: 1e-12,
            tol4: 1e-3,
            max_iter: 200,
            min_radius: 1e-24,
            max_sub_iter: 200,
        }
    }
}

/// Scaling matrix `N = H_bar + 1e-3 nu I` with `nu = |H(xi0)|_1`; more
/// identity is added if the sum fails to factor.
pub fn scaling_matrix(h_bar: &SymMatrix, nu: f64) -> Result<SymMatrix> {
    let nu = if nu > 0.0 && nu.is_finite() { nu } else { 1.0 };
    let pattern = Arc::new(h_bar.pattern().union(&Pattern::diagonal(h_bar.dim())));
    let base = h_bar.expand_to(&pattern);
    let chol = Cholesky::new(pattern)?;
    let mut shift = 1e-3 * nu;
    for _ in 0..40 {
        let mut n = base.clone();
        n.add_diagonal(shift);
        if chol.factor_matrix(&n).is_some() {
            return Ok(n);
        }
        debug!("scaling matrix not positive definite, raising shift to {:e}", shift * 10.0);
        shift *= 10.0;
    }
    Err(Error::Factorization("scaling matrix is not positive definite".into()))
}

/// Reusable factorization workspace for `H + lambda N` on a fixed pattern.
pub struct Subproblem {
    chol: Cholesky,
    n: SymMatrix,
    n_union: Vec<f64>,
    h_union: Vec<f64>,
    h_pattern: Arc<Pattern>,
}

/// Outcome of one subproblem solve.
#[derive(Debug, Clone)]
pub struct Step {
    pub delta: Vec<f64>,
    pub lambda: f64,
    /// `|delta|_N`.
    pub norm: f64,
    pub hard_case: bool,
}

impl Subproblem {
    pub fn new(h: &SymMatrix, n: &SymMatrix) -> Result<Self> {
        let union = Arc::new(h.pattern().union(n.pattern()));
        let chol = Cholesky::new(union.clone())?;
        let n_union = n.expand_to(&union).values().to_vec();
        let h_union = h.expand_to(&union).values().to_vec();
        Ok(Subproblem {
            chol,
            n: n.clone(),
            n_union,
            h_union,
            h_pattern: h.pattern().clone(),
        })
    }

    /// Replaces `H`, rebuilding the workspace if its pattern changed.
    pub fn set_h(&mut self, h: &SymMatrix) -> Result<()> {
        if **h.pattern() != *self.h_pattern {
            *self = Subproblem::new(h, &self.n)?;
            return Ok(());
        }
        let union = self.chol.pattern().clone();
        self.h_union = h.expand_to(&union).values().to_vec();
        Ok(())
    }

    pub fn n(&self) -> &SymMatrix {
        &self.n
    }

    fn factor(&self, lambda: f64) -> Option<Factor> {
        let vals: Vec<f64> = self.h_union.iter().zip(&self.n_union).map(|(h, n)| h + lambda * n).collect();
        self.chol.factor(&vals)
    }

    fn n_norm(&self, v: &[f64]) -> f64 {
        dot(v, &self.n.mul_vec(v)).max(0.0).sqrt()
    }

    /// `q(lambda) = 1/R - 1/|p|_N` and its derivative, `p = -(H + lambda N)^-1 g`.
    pub fn q_and_derivative(&self, lambda: f64, g: &[f64], radius: f64) -> Result<(f64, f64)> {
        let f = self
            .factor(lambda)
            .ok_or_else(|| Error::Factorization("H + lambda N is not positive definite".into()))?;
        let p: Vec<f64> = f.solve(g).iter().map(|v| -v).collect();
        Ok(q_pair(&f, &self.n, &p, radius))
    }

    /// Solves the trust-region subproblem.
    pub fn solve(&self, g: &[f64], radius: f64, cfg: &TrConfig) -> Result<Step> {
        let n = g.len();
        if g.iter().all(|&v| v == 0.0) {
            return Ok(Step { delta: vec![0.0; n], lambda: 0.0, norm: 0.0, hard_case: false });
        }
        let mut lo = 0.0f64;
        let mut hi = f64::INFINITY;
        let mut lambda = 0.0f64;
        for it in 0..cfg.max_sub_iter {
            let mut next = None;
            match self.factor(lambda) {
                Some(f) => {
                    let p: Vec<f64> = f.solve(g).iter().map(|v| -v).collect();
                    let pn = self.n_norm(&p);
                    if lambda == 0.0 && pn <= radius {
                        return Ok(Step { delta: p, lambda, norm: pn, hard_case: false });
                    }
                    let delta = pn - radius;
                    if (delta / radius).abs() < cfg.tol4 {
                        return Ok(Step { delta: p, lambda, norm: pn, hard_case: false });
                    }
                    if delta > 0.0 {
                        lo = lambda;
                    } else {
                        hi = lambda;
                    }
                    let (q, dq) = q_pair(&f, &self.n, &p, radius);
                    let cand = lambda - q / dq;
                    if cand.is_finite() && cand > lo && cand < hi {
                        next = Some(cand);
                    }
                }
                None => lo = lambda,
            }
            trace!("subproblem it {it}: lambda {lambda:e} bracket [{lo:e}, {hi:e}]");
            if hi.is_finite() && hi - lo < cfg.tol3 * (1.0 + lo) {
                return self.hard_case(g, radius, hi);
            }
            lambda = next.unwrap_or(if hi.is_infinite() {
                if lo == 0.0 {
                    1.0
                } else {
                    2.0 * lo
                }
            } else {
                0.5 * (lo + hi)
            });
        }
        if hi.is_finite() {
            debug!("subproblem iteration cap; using the upper bracket");
            return self.hard_case(g, radius, hi);
        }
        Err(Error::IterationLimit(cfg.max_sub_iter))
    }

    /// Pads the step at `lambda_high` with an approximate null direction of
    /// `H + lambda N` so that its N-norm equals the radius.
    fn hard_case(&self, g: &[f64], radius: f64, lambda: f64) -> Result<Step> {
        let f = self
            .factor(lambda)
            .ok_or_else(|| Error::Factorization("H + lambda_high N is not positive definite".into()))?;
        let n = g.len();
        let p: Vec<f64> = f.solve(g).iter().map(|v| -v).collect();
        let pn = self.n_norm(&p);
        if pn >= radius {
            let s = radius / pn;
            return Ok(Step { delta: p.iter().map(|v| v * s).collect(), lambda, norm: radius, hard_case: true });
        }
        let mut z: Vec<f64> = (0..n).map(|i| 1.0 + (i as f64 * 0.618_033_988_7).fract()).collect();
        for _ in 0..50 {
            let mut w = f.solve(&self.n.mul_vec(&z));
            let wn = self.n_norm(&w);
            if !(wn > 0.0) || !wn.is_finite() {
                break;
            }
            w.iter_mut().for_each(|v| *v /= wn);
            z = w;
        }
        let nz = self.n.mul_vec(&z);
        let a = dot(&z, &nz);
        let b = dot(&p, &nz);
        let c = pn * pn - radius * radius;
        let disc = (b * b - a * c).max(0.0).sqrt();
        let model = |d: &[f64]| -> f64 {
            let hd: Vec<f64> = {
                let mut nd = self.n.mul_vec(d);
                // H d = (H + lambda N) d - lambda N d; evaluate H through the union values
                let full = self.matvec_union(&self.h_union, d);
                nd.iter_mut().zip(full).for_each(|(x, y)| *x = y);
                nd
            };
            dot(g, d) + 0.5 * dot(d, &hd)
        };
        let mut best: Option<(f64, Vec<f64>)> = None;
        for tau in [(-b + disc) / a, (-b - disc) / a] {
            let d: Vec<f64> = p.iter().zip(&z).map(|(pi, zi)| pi + tau * zi).collect();
            let m = model(&d);
            if best.as_ref().map_or(true, |(bm, _)| m < *bm) {
                best = Some((m, d));
            }
        }
        let (_, delta) = best.unwrap();
        let norm = self.n_norm(&delta);
        Ok(Step { delta, lambda, norm, hard_case: true })
    }

    fn matvec_union(&self, vals: &[f64], x: &[f64]) -> Vec<f64> {
        let p = self.chol.pattern();
        let mut y = vec![0.0; x.len()];
        for (r, c, k) in p.entries() {
            y[r] += vals[k] * x[c];
            if r != c {
                y[c] += vals[k] * x[r];
            }
        }
        y
    }
}

fn q_pair(f: &Factor, n: &SymMatrix, p: &[f64], radius: f64) -> (f64, f64) {
    let np = n.mul_vec(p);
    let pn = dot(p, &np).max(0.0).sqrt();
    let w = f.solve(&np);
    let q = 1.0 / radius - 1.0 / pn;
    let dq = -dot(&np, &w) / (pn * pn * pn);
    (q, dq)
}

/// Subproblem solve on standalone matrices.
pub fn compute_delta_xi(h: &SymMatrix, n: &SymMatrix, g: &[f64], radius: f64, cfg: &TrConfig) -> Result<Step> {
    Subproblem::new(h, n)?.solve(g, radius, cfg)
}

/// `q(lambda)` and `q'(lambda)` on standalone matrices.
pub fn q_and_derivative(lambda: f64, h: &SymMatrix, n: &SymMatrix, g: &[f64], radius: f64) -> Result<(f64, f64)> {
    Subproblem::new(h, n)?.q_and_derivative(lambda, g, radius)
}

/// Quadratic model decrease `-(g.d + d.H d / 2)`.
pub fn model_decrease(h: &SymMatrix, g: &[f64], d: &[f64]) -> f64 {
    -(dot(g, d) + 0.5 * dot(d, &h.mul_vec(d)))
}

/// Iteration log of one minimization.
#[derive(Debug, Clone, Default)]
pub struct Report {
    pub iterations: usize,
    pub accepted: usize,
    pub rejected_infeasible: usize,
    pub rejected_rho: usize,
    /// Rejections caused by the gradient ratio alone.
    pub rejected_rho_g: usize,
    /// Objective after each accepted step, starting with the initial value.
    pub values: Vec<f64>,
    pub final_lambda: f64,
    pub gradient_norm: f64,
}

/// Result of [`minimize`].
#[derive(Debug, Clone)]
pub struct Minimum {
    pub xi: Vec<f64>,
    pub radius: f64,
    pub value: f64,
    pub report: Report,
}

/// Trust-region minimization from a strictly feasible `xi0`.
pub fn minimize<F: Function + ?Sized>(
    f: &F,
    xi0: &[f64],
    h_bar: &SymMatrix,
    radius: f64,
    cfg: &TrConfig,
) -> Result<Minimum> {
    let (mut fx, mut g, mut h) = f.hessian(xi0).ok_or(Error::InfeasibleStart)?;
    let n_mat = scaling_matrix(h_bar, h.norm_1())?;
    let mut sub = Subproblem::new(&h, &n_mat)?;
    let mut xi = xi0.to_vec();
    let mut r = radius;
    let r_floor = cfg.min_radius * radius;
    let typ = f.typical_scale();
    let mut rep = Report { values: vec![fx], ..Default::default() };

    for it in 0..cfg.max_iter {
        rep.iterations = it + 1;
        let step = sub.solve(&g, r, cfg)?;
        let d = &step.delta;
        rep.final_lambda = step.lambda;
        let small = d.iter().zip(&xi).all(|(di, xi)| di.abs() <= cfg.tol2 * (xi.abs() + typ));
        let pred = model_decrease(&h, &g, d);
        let stagnant = pred <= 64.0 * f64::EPSILON * fx.abs().max(f64::MIN_POSITIVE);
        if (step.lambda <= cfg.tol1 && small) || (small && stagnant) {
            // take the final step when it still helps
            let test: Vec<f64> = xi.iter().zip(d).map(|(a, b)| a + b).collect();
            if let Some((ft, gt)) = f.gradient(&test) {
                if ft <= fx && norm2(&gt) <= norm2(&g) {
                    xi = test;
                    fx = ft;
                    g = gt;
                    rep.values.push(fx);
                }
            }
            rep.gradient_norm = norm2(&g);
            debug!("trust region converged in {} iterations, f = {fx:e}", it + 1);
            return Ok(Minimum { xi, radius: r, value: fx, report: rep });
        }
        let test: Vec<f64> = xi.iter().zip(d).map(|(a, b)| a + b).collect();
        let ft = f.value(&test);
        if !ft.is_finite() {
            rep.rejected_infeasible += 1;
            r /= 4.0;
            trace!("it {it}: infeasible trial, R = {r:e}");
        } else {
            let rho = if pred > 0.0 { (fx - ft) / pred } else { f64::NEG_INFINITY };
            let (_, gt) = f.gradient(&test).ok_or(Error::InfeasibleStart)?;
            let hd = h.mul_vec(d);
            let num: Vec<f64> = (0..g.len()).map(|i| gt[i] - g[i] - hd[i]).collect();
            let rho_g = norm2(&num) / (norm2(&g) + norm2(&gt));
            trace!("it {it}: rho {rho:.3e} rho_g {rho_g:.3e} lambda {:.3e} R {r:.3e}", step.lambda);
            if rho < 0.125 || rho_g > 1.0 {
                if rho >= 0.125 {
                    rep.rejected_rho_g += 1;
                    debug!("gradient ratio {rho_g:.3e} rejected a step with rho {rho:.3e}");
                } else {
                    rep.rejected_rho += 1;
                }
                r /= 4.0;
            } else {
                if rho < 0.25 {
                    r /= 2.0;
                } else if rho >= 0.75 && step.lambda > 0.0 && rho_g <= 0.125 {
                    r *= 2.0;
                }
                let (fv, gv, hv) = f.hessian(&test).ok_or(Error::InfeasibleStart)?;
                debug_assert!(fv < fx);
                xi = test;
                fx = fv;
                g = gv;
                h = hv;
                sub.set_h(&h)?;
                rep.accepted += 1;
                rep.values.push(fx);
            }
        }
        if r < r_floor {
            return Err(Error::RadiusUnderflow);
        }
    }
    Err(Error::IterationLimit(cfg.max_iter))
}
