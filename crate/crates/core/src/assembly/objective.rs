//! Composed barrier objectives of the main phase and the big-M phase.

use std::sync::Arc;

use super::opening::{opening, opening_value};
use super::{element_dofs, interface_dofs, Model, StepContext};
use crate::material::h_alpha_point;
use crate::mesh::BoundaryOperator;
use crate::sparse::{Pattern, PatternBuilder, SymMatrix};
use crate::trustregion::Function;

/// How much of the objective to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Level {
    Value,
    Gradient,
    Hessian,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhaseKind {
    /// Variables `(u, s0, t)` with relaxed constraints and the big-M penalty.
    One,
    /// Variables `(x, s0)` with boundary conditions eliminated.
    Two,
}

/// Variable layout and Hessian pattern of one phase.
#[derive(Debug, Clone)]
pub struct Layout {
    pub kind: PhaseKind,
    dof_var: Vec<Option<usize>>,
    bc: BoundaryOperator,
    eliminated: bool,
    pub n_u: usize,
    pub s0_off: usize,
    pub t_index: Option<usize>,
    pub n: usize,
    pattern: Arc<Pattern>,
    mass_slots: Vec<Option<usize>>,
}

impl Layout {
    /// `(x, s0)` with `u = R x + u_BC`.
    pub fn phase_two(model: &Model, bc: &BoundaryOperator) -> Self {
        let dof_var = (0..model.n_dof()).map(|i| bc.free_index(i)).collect();
        Layout::build(model, PhaseKind::Two, dof_var, bc.n_free(), bc.clone(), true)
    }

    /// `(u, s0, t)` over all DOFs.
    pub fn phase_one(model: &Model, bc: &BoundaryOperator) -> Self {
        let dof_var = (0..model.n_dof()).map(Some).collect();
        Layout::build(model, PhaseKind::One, dof_var, model.n_dof(), bc.clone(), false)
    }

    /// `(u, s0)` over all DOFs with main-phase terms, for reaction forces.
    pub fn full(model: &Model) -> Self {
        let dof_var = (0..model.n_dof()).map(Some).collect();
        let bc = BoundaryOperator::unconstrained(model.n_dof());
        Layout::build(model, PhaseKind::Two, dof_var, model.n_dof(), bc, false)
    }

    fn build(
        model: &Model,
        kind: PhaseKind,
        dof_var: Vec<Option<usize>>,
        n_u: usize,
        bc: BoundaryOperator,
        eliminated: bool,
    ) -> Self {
        let s0_off = n_u;
        let np = model.n_points();
        let t_index = (kind == PhaseKind::One).then_some(n_u + np);
        let n = n_u + np + usize::from(t_index.is_some());
        let mut pb = PatternBuilder::new(n);
        let map = |dofs: &[usize]| -> Vec<usize> { dofs.iter().filter_map(|&d| dof_var[d]).collect() };
        for conn in &model.fmesh.elements {
            pb.add_clique(&map(&element_dofs(conn)));
        }
        let ng = model.fmesh.n_g;
        for i in 0..model.fmesh.n_interfaces() {
            let mut vars = map(&interface_dofs(&model.fmesh, i));
            if let Some(t) = t_index {
                vars.push(t);
            }
            for g in 0..ng {
                vars.push(s0_off + i * ng + g);
                pb.add_clique(&vars);
                vars.pop();
            }
        }
        for row in &model.contact.rows {
            let mut vars = map(&[row.dof_a, row.dof_b]);
            vars.extend(t_index);
            pb.add_clique(&vars);
        }
        if let Some(t) = t_index {
            for &c in bc.constrained() {
                pb.add(dof_var[c].unwrap(), t);
            }
        }
        let pattern = Arc::new(pb.build());
        let mass_slots = model
            .mass
            .pattern()
            .entries()
            .map(|(r, c, _)| match (dof_var[r], dof_var[c]) {
                (Some(a), Some(b)) => pattern.find(a, b),
                _ => None,
            })
            .collect();
        Layout { kind, dof_var, bc, eliminated, n_u, s0_off, t_index, n, pattern, mass_slots }
    }

    pub fn pattern(&self) -> &Arc<Pattern> {
        &self.pattern
    }

    pub fn bc(&self) -> &BoundaryOperator {
        &self.bc
    }

    pub fn var(&self, dof: usize) -> Option<usize> {
        self.dof_var[dof]
    }

    /// Full displacement vector represented by `xi`.
    pub fn u_of(&self, xi: &[f64]) -> Vec<f64> {
        if self.eliminated {
            self.bc.expand(&xi[..self.n_u])
        } else {
            xi[..self.n_u].to_vec()
        }
    }

    pub fn s0<'a>(&self, xi: &'a [f64]) -> &'a [f64] {
        &xi[self.s0_off..self.s0_off + (self.n - self.s0_off - usize::from(self.t_index.is_some()))]
    }

    pub fn t(&self, xi: &[f64]) -> Option<f64> {
        self.t_index.map(|k| xi[k])
    }

    /// Packs `(u or x, s0, t)`; `u` is projected in the main phase.
    pub fn pack(&self, u: &[f64], s0: &[f64], t: Option<f64>) -> Vec<f64> {
        let mut xi = Vec::with_capacity(self.n);
        if self.eliminated {
            xi.extend(self.bc.project(u));
        } else {
            xi.extend_from_slice(u);
        }
        xi.extend_from_slice(s0);
        if self.t_index.is_some() {
            xi.push(t.expect("phase one needs t"));
        }
        xi
    }

    /// Rebinds the boundary operator (same constrained set, new `u_BC`).
    pub fn with_bc(&self, bc: &BoundaryOperator) -> Self {
        debug_assert_eq!(bc.constrained(), self.bc.constrained());
        let mut l = self.clone();
        l.bc = bc.clone();
        l
    }
}

/// Objective value with optional derivatives.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub value: f64,
    pub gradient: Vec<f64>,
    pub hessian: Option<SymMatrix>,
}

/// Barrier objective of one phase at fixed parameters.
#[derive(Clone, Copy)]
pub struct Objective<'a> {
    pub model: &'a Model,
    pub step: &'a StepContext,
    pub layout: &'a Layout,
    /// Barrier parameter.
    pub mu: f64,
    /// Regularization parameter of the interface potential.
    pub alpha: f64,
    /// Big-M penalty (phase one only).
    pub big_m: f64,
}

struct Acc {
    value: f64,
    grad: Vec<f64>,
    hess: Option<SymMatrix>,
}

impl Acc {
    fn g(&mut self, var: Option<usize>, v: f64) {
        if let (Some(k), false) = (var, self.grad.is_empty()) {
            self.grad[k] += v;
        }
    }

    /// Adds to the symmetric pair (a, b); call once per unordered pair.
    fn h(&mut self, a: Option<usize>, b: Option<usize>, v: f64) {
        if let (Some(a), Some(b), Some(h)) = (a, b, self.hess.as_mut()) {
            h.add(a, b, v);
        }
    }

    /// Adds a dense local block given in both triangles.
    fn block(&mut self, vars: &[Option<usize>], hl: impl Fn(usize, usize) -> f64) {
        if self.hess.is_none() {
            return;
        }
        for a in 0..vars.len() {
            for b in 0..vars.len() {
                if let (Some(va), Some(vb)) = (vars[a], vars[b]) {
                    if va <= vb {
                        self.h(Some(va), Some(vb), hl(a, b));
                    }
                }
            }
        }
    }
}

/// `mu * grad_u phi_NNO(E0 u - a0)`; `None` if a row is not interior.
pub fn contact_barrier_gradient(model: &Model, u: &[f64], mu: f64) -> Option<Vec<f64>> {
    let mut g = vec![0.0; u.len()];
    for (row, r) in model.contact.rows.iter().zip(model.contact.slack(u)) {
        if !(r > 0.0) {
            return None;
        }
        g[row.dof_b] -= mu / r;
        g[row.dof_a] += mu / r;
    }
    Some(g)
}

impl<'a> Objective<'a> {
    pub fn phase_two(model: &'a Model, step: &'a StepContext, layout: &'a Layout, mu: f64) -> Self {
        Objective { model, step, layout, mu, alpha: mu, big_m: 0.0 }
    }

    pub fn phase_one(model: &'a Model, step: &'a StepContext, layout: &'a Layout, mu_init: f64, big_m: f64) -> Self {
        Objective { model, step, layout, mu: mu_init, alpha: mu_init * big_m.sqrt(), big_m }
    }

    /// Evaluates at `xi`; `None` outside the barrier domain.
    pub fn eval(&self, xi: &[f64], level: Level) -> Option<Evaluation> {
        let lay = self.layout;
        let model = self.model;
        let step = self.step;
        let u = lay.u_of(xi);
        let s0 = lay.s0(xi);
        let t = lay.t(xi);
        let tv = lay.t_index;
        let mut acc = Acc {
            value: 0.0,
            grad: if level >= Level::Gradient { vec![0.0; lay.n] } else { Vec::new() },
            hess: (level == Level::Hessian).then(|| SymMatrix::zeros(lay.pattern.clone())),
        };
        let derivs = level >= Level::Gradient;

        // momentum
        let dt = step.dt;
        let w: Vec<f64> = (0..u.len()).map(|i| u[i] - step.u_prev[i] - 0.5 * dt * step.v_prev[i]).collect();
        let mw = model.mass.mul_vec(&w);
        let sc = 2.0 / (dt * dt);
        acc.value += sc * crate::sparse::dot(&w, &mw);
        if derivs {
            for (i, v) in mw.iter().enumerate() {
                acc.g(lay.var(i), 2.0 * sc * v);
            }
        }
        if let Some(h) = acc.hess.as_mut() {
            let vals = model.mass.values();
            let hv = h.values_mut();
            for (k, slot) in lay.mass_slots.iter().enumerate() {
                if let Some(s) = slot {
                    hv[*s] += 2.0 * sc * vals[k];
                }
            }
        }

        // load
        acc.value += crate::sparse::dot(&model.load, &u);
        if derivs {
            for (i, f) in model.load.iter().enumerate() {
                acc.g(lay.var(i), *f);
            }
        }

        // bulk
        for (e, conn) in model.fmesh.elements.iter().enumerate() {
            let (v, g, h) = model.element_energy(e, &u, derivs).ok()?;
            acc.value += v;
            if derivs {
                let vars: Vec<Option<usize>> = element_dofs(conn).iter().map(|&d| lay.var(d)).collect();
                for a in 0..12 {
                    acc.g(vars[a], g[a]);
                }
                acc.block(&vars, |a, b| h[a][b]);
            }
        }

        // interfaces
        let p = &model.cohesive;
        let ng = model.fmesh.n_g;
        for i in 0..model.fmesh.n_interfaces() {
            let x = model.interface_positions(i, &u);
            let tmin = model.tangent_floor(i);
            let mut vars: Vec<Option<usize>> = interface_dofs(&model.fmesh, i).iter().map(|&d| lay.var(d)).collect();
            for (g, pt) in model.quad.interface[i].iter().enumerate() {
                let k = i * ng + g;
                let sv = s0[k];
                let omega = pt.omega;
                let wz = self.mu * p.zeta(omega);
                let (hv, h1, h2) = h_alpha_point(sv, step.d[k], self.alpha, omega, p);
                acc.value += hv;
                let s_var = Some(lay.s0_off + k);
                acc.g(s_var, h1);
                acc.h(s_var, s_var, h2);

                let (c, op) = if derivs {
                    let o = opening(&x, pt.eta, p.beta_mix, tmin)?;
                    (o.c, Some(o))
                } else {
                    (opening_value(&x, pt.eta, p.beta_mix, tmin)?, None)
                };
                let det = sv * sv - c[0] * c[0] - c[1] * c[1];
                if !(sv > 0.0 && det > 0.0) {
                    return None;
                }
                let r = c[0] + t.unwrap_or(0.0);
                if !(r > 0.0) {
                    return None;
                }
                acc.value += wz * (-0.5 * det.ln() - r.ln());
                let Some(o) = op else { continue };

                // SOC barrier on (s0, c1, c2)
                let jx = [sv, -c[0], -c[1]];
                let gs = [-jx[0] / det, -jx[1] / det, -jx[2] / det];
                let mut hs = [[0.0; 3]; 3];
                for a in 0..3 {
                    for b in 0..3 {
                        hs[a][b] = 2.0 * jx[a] * jx[b] / (det * det);
                    }
                    hs[a][a] += if a == 0 { -1.0 / det } else { 1.0 / det };
                }
                // NNO barrier on c1 + t
                let n1 = -1.0 / r;
                let n2 = 1.0 / (r * r);

                acc.g(s_var, wz * gs[0]);
                for a in 0..12 {
                    let gu = gs[1] * o.jac[0][a] + gs[2] * o.jac[1][a] + n1 * o.jac[0][a];
                    acc.g(vars[a], wz * gu);
                }
                acc.g(tv, wz * n1);
                if acc.hess.is_none() {
                    continue;
                }
                vars.push(s_var);
                vars.push(tv);
                let js = |m: usize, a: usize| o.jac[m][a];
                acc.block(&vars, |a, b| {
                    let (ua, ub) = (a < 12, b < 12);
                    let (sa, sb) = (a == 12, b == 12);
                    let v = if ua && ub {
                        let mut s = 0.0;
                        for m in 0..2 {
                            for n in 0..2 {
                                s += js(m, a) * hs[m + 1][n + 1] * js(n, b);
                            }
                            s += gs[m + 1] * o.hess[m][a][b];
                        }
                        s + n2 * js(0, a) * js(0, b) + n1 * o.hess[0][a][b]
                    } else if ua && sb {
                        hs[0][1] * js(0, a) + hs[0][2] * js(1, a)
                    } else if sa && ub {
                        hs[0][1] * js(0, b) + hs[0][2] * js(1, b)
                    } else if sa && sb {
                        hs[0][0]
                    } else if ua {
                        n2 * js(0, a)
                    } else if ub {
                        n2 * js(0, b)
                    } else if a == 13 && b == 13 {
                        n2
                    } else {
                        0.0
                    };
                    wz * v
                });
                vars.truncate(12);
            }
        }

        // contact
        let mu = self.mu;
        for row in &model.contact.rows {
            let r = u[row.dof_b] - u[row.dof_a] - row.a0 + t.unwrap_or(0.0);
            if !(r > 0.0) {
                return None;
            }
            acc.value -= mu * r.ln();
            if derivs {
                let vars = [lay.var(row.dof_a), lay.var(row.dof_b), tv];
                let coef = [-1.0, 1.0, 1.0];
                for a in 0..3 {
                    acc.g(vars[a], -mu * coef[a] / r);
                }
                acc.block(&vars, |a, b| mu * coef[a] * coef[b] / (r * r));
            }
        }

        // big-M relaxation
        if let (Some(tval), Some(tk)) = (t, tv) {
            if !(tval > 0.0) {
                return None;
            }
            acc.value += self.big_m * tval - mu * tval.ln();
            acc.g(tv, self.big_m - mu / tval);
            acc.h(tv, tv, mu / (tval * tval));
            let ub = lay.bc.u_bc();
            for &c in lay.bc.constrained() {
                let diff = u[c] - ub[c];
                for sgn in [1.0, -1.0] {
                    let r = sgn * diff + tval;
                    if !(r > 0.0) {
                        return None;
                    }
                    acc.value -= mu * r.ln();
                    if derivs {
                        let vars = [lay.var(c), Some(tk)];
                        let coef = [sgn, 1.0];
                        for a in 0..2 {
                            acc.g(vars[a], -mu * coef[a] / r);
                        }
                        acc.block(&vars, |a, b| mu * coef[a] * coef[b] / (r * r));
                    }
                }
            }
        }

        if !acc.value.is_finite() {
            return None;
        }
        Some(Evaluation { value: acc.value, gradient: acc.grad, hessian: acc.hess })
    }
}

impl Function for Objective<'_> {
    fn dim(&self) -> usize {
        self.layout.n
    }

    fn value(&self, x: &[f64]) -> f64 {
        self.eval(x, Level::Value).map_or(f64::INFINITY, |e| e.value)
    }

    fn gradient(&self, x: &[f64]) -> Option<(f64, Vec<f64>)> {
        self.eval(x, Level::Gradient).map(|e| (e.value, e.gradient))
    }

    fn hessian(&self, x: &[f64]) -> Option<(f64, Vec<f64>, SymMatrix)> {
        self.eval(x, Level::Hessian).map(|e| (e.value, e.gradient, e.hessian.unwrap()))
    }

    fn typical_scale(&self) -> f64 {
        self.model.cohesive.delta_u
    }
}
