//! Time stepping: the big-M feasibility phase, barrier continuation in
//! `mu`, Hessian preprocessing and the implicit-midpoint updates.

use log::{debug, info, warn};
use serde::{Deserialize, Serialize};

use crate::assembly::{contact_barrier_gradient, optimal_extension, Layout, Model, Objective, StepContext};
use crate::error::{Error, Result};
use crate::material::update_damage;
use crate::mesh::BoundaryOperator;
use crate::sparse::SymMatrix;
use crate::trustregion::{minimize, Function, TrConfig};

/// Geometric barrier schedule `mu_i = mu_init rho^(i-1)`, `i = 1..=n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MuSchedule {
    pub mu_init: f64,
    pub rho: f64,
    pub n: usize,
}

impl Default for MuSchedule {
    fn default() -> Self {
        MuSchedule { mu_init: 5e-5, rho: 0.125, n: 6 }
    }
}

impl MuSchedule {
    pub fn values(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.mu_init * self.rho.powi(i as i32)).collect()
    }

    pub fn first(&self) -> f64 {
        self.mu_init
    }

    pub fn last(&self) -> f64 {
        self.mu_init * self.rho.powi(self.n as i32 - 1)
    }
}

/// Solver settings of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub mu: MuSchedule,
    pub trust_region: TrConfig,
    /// Initial trust radius of each step.
    pub radius: f64,
    pub big_m: f64,
    pub big_m_factor: f64,
    pub max_escalations: usize,
    /// Absolute positivity floor for the phase handoff.
    pub handoff_margin: f64,
    /// Refresh the preprocessing Hessians every this many steps.
    pub preprocess_every: usize,
    /// Build the preprocessing problem from the previous step instead of the initial state.
    pub preprocess_from_current: bool,
    /// Largest boundary projection jump of the phase-one point accepted at
    /// the handoff, relative to `delta_u`.
    pub handoff_jump: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            mu: MuSchedule::default(),
            trust_region: TrConfig::default(),
            radius: 1.0,
            big_m: 64.0,
            big_m_factor: 8.0,
            max_escalations: 10,
            handoff_margin: 1e-12,
            preprocess_every: 3,
            preprocess_from_current: false,
            handoff_jump: 1e-3,
        }
    }
}

/// Hessians of the preliminary problem, reused as `H_bar`.
#[derive(Debug, Clone, Default)]
pub struct PreprocessCache {
    pub h_phase1: Option<SymMatrix>,
    pub h_mu: Vec<Option<SymMatrix>>,
    pub refreshed_at: Option<usize>,
}

/// How a step solve is used.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepKind {
    Preprocess,
    Ordinary,
}

/// Diagnostics of one step solve.
#[derive(Debug, Clone, Default)]
pub struct SolveStats {
    pub escalations: usize,
    /// Converged `t` after every phase-one solve.
    pub t_history: Vec<f64>,
    pub big_m: f64,
    pub tr_iterations: usize,
    pub rejected_rho_g: usize,
    pub radius: f64,
}

/// Minimizer of the final barrier problem of one step.
#[derive(Debug, Clone)]
pub struct StepSolution {
    /// Midpoint displacement `R x + u_BC`.
    pub u_mid: Vec<f64>,
    pub s0: Vec<f64>,
    pub stats: SolveStats,
}

/// Everything reported about one step.
#[derive(Debug, Clone)]
pub struct StepRecord {
    pub tau: usize,
    /// End time `tau dt`.
    pub time: f64,
    pub u_mid: Vec<f64>,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    /// Velocity at the start of the step.
    pub v_prev: Vec<f64>,
    /// Damage used during the step.
    pub d_prev: Vec<f64>,
    /// Damage after the step.
    pub d: Vec<f64>,
    /// `(s1, s2)` at the midpoint.
    pub openings: Vec<[f64; 2]>,
    pub s0: Vec<f64>,
    /// `grad_u f` at the midpoint, full DOF vector.
    pub force: Vec<f64>,
    /// Force of the contact barrier on the nodes, full DOF vector.
    pub contact_force: Vec<f64>,
    pub stats: SolveStats,
}

impl StepRecord {
    pub fn effective_openings(&self) -> Vec<f64> {
        self.openings.iter().map(|c| c[0].hypot(c[1])).collect()
    }
}

/// `u_next = 2 u_mid - u_prev`, `v_next = 4 (u_mid - u_prev)/dt - v_prev`.
pub fn velocity_update(u_mid: &[f64], u_prev: &[f64], v_prev: &[f64], dt: f64) -> (Vec<f64>, Vec<f64>) {
    let u: Vec<f64> = u_mid.iter().zip(u_prev).map(|(m, p)| 2.0 * m - p).collect();
    let v: Vec<f64> = (0..u_mid.len())
        .map(|i| 4.0 * (u_mid[i] - u_prev[i]) / dt - v_prev[i])
        .collect();
    (u, v)
}

/// Projects a phase-one displacement onto the boundary conditions and
/// returns the main-phase start if no DOF moves by more than `max_jump`
/// and every barrier argument is interior.
pub fn feasibility_handoff(
    model: &Model,
    step: &StepContext,
    layout: &Layout,
    u_phase1: &[f64],
    mu: f64,
    margin: f64,
    max_jump: f64,
) -> Option<Vec<f64>> {
    let bc = layout.bc();
    let u = bc.expand(&bc.project(u_phase1));
    if u.iter().zip(u_phase1).any(|(a, b)| !((a - b).abs() <= max_jump)) {
        return None;
    }
    for e in 0..model.fmesh.elements.len() {
        model.element_energy(e, &u, false).ok()?;
    }
    let c = model.opening_maps(&u).ok()?;
    if c.iter().any(|c| !(c[0] > margin)) {
        return None;
    }
    if model.contact.slack(&u).iter().any(|&r| !(r > margin)) {
        return None;
    }
    let xi = optimal_extension(model, step, layout, &u, mu, mu, 0.0).ok()?;
    let obj = Objective::phase_two(model, step, layout, mu);
    obj.value(&xi).is_finite().then_some(xi)
}

fn hessian_at(f: &dyn Function, xi: &[f64]) -> Result<SymMatrix> {
    f.hessian(xi).map(|(_, _, h)| h).ok_or(Error::InfeasibleStart)
}

/// Solves one step from `step.u_prev`. In preprocessing mode the
/// interface regularization is frozen at the first `mu` and the Hessians
/// at every converged point are stored in `cache`.
pub fn solve_step(
    model: &Model,
    step: &StepContext,
    cfg: &SolverConfig,
    cache: &mut PreprocessCache,
    kind: StepKind,
) -> Result<StepSolution> {
    let mus = cfg.mu.values();
    let mu1 = mus[0];
    let pre = kind == StepKind::Preprocess;
    let mut radius = cfg.radius;
    let mut stats = SolveStats::default();
    let tr = &cfg.trust_region;

    // phase one
    let l1 = Layout::phase_one(model, &step.bc);
    let l2 = Layout::phase_two(model, &step.bc);
    let mut big_m = cfg.big_m;
    let mut u_start = step.u_prev.clone();
    let mut xi2 = None;
    let max_jump = cfg.handoff_jump * model.cohesive.delta_u;
    for k in 0..=cfg.max_escalations {
        let obj = Objective::phase_one(model, step, &l1, mu1, big_m);
        let xi0 = optimal_extension(model, step, &l1, &u_start, mu1, obj.alpha, big_m)?;
        let fresh;
        let h_bar = match (&cache.h_phase1, pre) {
            (Some(h), false) if h.pattern() == l1.pattern() => h,
            _ => {
                fresh = hessian_at(&obj, &xi0)?;
                if pre && k == 0 {
                    cache.h_phase1 = Some(fresh.clone());
                }
                &fresh
            }
        };
        let m = minimize(&obj, &xi0, h_bar, radius, tr)?;
        radius = m.radius;
        stats.tr_iterations += m.report.iterations;
        stats.rejected_rho_g += m.report.rejected_rho_g;
        let t = l1.t(&m.xi).unwrap_or(0.0);
        stats.t_history.push(t);
        let u1 = l1.u_of(&m.xi);
        debug!("phase one with M = {big_m:e}: t = {t:e}");
        if let Some(xi) = feasibility_handoff(model, step, &l2, &u1, mu1, cfg.handoff_margin, max_jump) {
            xi2 = Some(xi);
            stats.escalations = k;
            break;
        }
        big_m *= cfg.big_m_factor;
        u_start = u1;
    }
    stats.big_m = big_m;
    let mut xi = xi2.ok_or(Error::PhaseOne { escalations: cfg.max_escalations })?;

    // phase two
    if pre {
        cache.h_mu = vec![None; mus.len()];
    }
    for (i, &mu) in mus.iter().enumerate() {
        let alpha = if pre { mu1 } else { mu };
        let u = l2.u_of(&xi);
        xi = optimal_extension(model, step, &l2, &u, mu, alpha, 0.0)?;
        let obj = Objective { alpha, ..Objective::phase_two(model, step, &l2, mu) };
        let fresh;
        let h_bar = match cache.h_mu.get(i) {
            Some(Some(h)) if !pre && h.pattern() == l2.pattern() => h,
            _ => {
                fresh = hessian_at(&obj, &xi)?;
                &fresh
            }
        };
        let m = minimize(&obj, &xi, h_bar, radius, tr)?;
        radius = m.radius;
        stats.tr_iterations += m.report.iterations;
        stats.rejected_rho_g += m.report.rejected_rho_g;
        xi = m.xi;
        if pre {
            cache.h_mu[i] = Some(hessian_at(&obj, &xi)?);
        }
    }
    stats.radius = radius;
    let u_mid = l2.u_of(&xi);
    let s0 = l2.s0(&xi).to_vec();
    Ok(StepSolution { u_mid, s0, stats })
}

/// Kinematic state between steps.
#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub tau: usize,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub d: Vec<f64>,
}

/// A model with boundary conditions, time step and running state.
pub struct Simulation {
    pub model: Model,
    /// Constrained set and rates; `u_BC = time * rate`.
    pub bc: BoundaryOperator,
    pub dt: f64,
    pub solver: SolverConfig,
    pub initial: State,
    pub state: State,
    pub cache: PreprocessCache,
}

impl Simulation {
    /// Velocity-controlled DOFs start at their prescribed rate.
    pub fn new(model: Model, bc: BoundaryOperator, dt: f64, solver: SolverConfig, u0: Vec<f64>, mut v0: Vec<f64>) -> Result<Self> {
        if !(dt > 0.0) {
            return Err(Error::Config(format!("time step must be positive, got {dt}")));
        }
        let n = model.n_dof();
        if u0.len() != n || v0.len() != n || bc.n_dof() != n {
            return Err(Error::Config("initial state size mismatch".into()));
        }
        for &c in bc.constrained() {
            v0[c] = bc.rate()[c];
        }
        let initial = State { tau: 0, u: u0, v: v0, d: vec![0.0; model.n_points()] };
        Ok(Simulation { model, bc, dt, solver, state: initial.clone(), initial, cache: PreprocessCache::default() })
    }

    /// Boundary operator at the midpoint of step `tau`.
    pub fn midpoint_bc(&self, tau: usize) -> BoundaryOperator {
        self.bc.at_time((tau as f64 - 0.5) * self.dt)
    }

    fn context(&self, from: &State, tau: usize) -> StepContext {
        StepContext {
            u_prev: from.u.clone(),
            v_prev: from.v.clone(),
            dt: self.dt,
            d: from.d.clone(),
            bc: self.midpoint_bc(tau),
        }
    }

    fn preprocess(&mut self, tau: usize) {
        let from = if self.solver.preprocess_from_current { self.state.clone() } else { self.initial.clone() };
        let ctx = self.context(&from, tau);
        let mut cache = PreprocessCache::default();
        match solve_step(&self.model, &ctx, &self.solver, &mut cache, StepKind::Preprocess) {
            Ok(_) => {
                cache.refreshed_at = Some(tau);
                self.cache = cache;
            }
            Err(e) => {
                warn!("preprocessing at step {tau} failed ({e}); using current Hessians");
                self.cache = PreprocessCache::default();
            }
        }
    }

    /// Advances one step.
    pub fn step(&mut self) -> Result<StepRecord> {
        let tau = self.state.tau + 1;
        let every = self.solver.preprocess_every;
        if every > 0 && tau % every == 1 % every {
            self.preprocess(tau);
        }
        let ctx = self.context(&self.state, tau);
        let sol = solve_step(&self.model, &ctx, &self.solver, &mut self.cache, StepKind::Ordinary)?;
        let (u, v) = velocity_update(&sol.u_mid, &self.state.u, &self.state.v, self.dt);
        let openings = self.model.opening_maps(&sol.u_mid)?;
        let delta: Vec<f64> = openings.iter().map(|c| c[0].hypot(c[1])).collect();
        let d = update_damage(&self.state.d, &delta, &self.model.cohesive);
        let mu = self.solver.mu.last();
        let full = Layout::full(&self.model);
        let xi = full.pack(&sol.u_mid, &sol.s0, None);
        let force = Objective::phase_two(&self.model, &ctx, &full, mu)
            .gradient(&xi)
            .map(|(_, g)| g[..self.model.n_dof()].to_vec())
            .ok_or(Error::InfeasibleStart)?;
        let contact_force: Vec<f64> = contact_barrier_gradient(&self.model, &sol.u_mid, mu)
            .ok_or(Error::InfeasibleStart)?
            .iter()
            .map(|g| -g)
            .collect();
        info!(
            "step {tau}: {} trust-region iterations, {} escalations, max opening {:.3e}",
            sol.stats.tr_iterations,
            sol.stats.escalations,
            delta.iter().cloned().fold(0.0, f64::max)
        );
        let rec = StepRecord {
            tau,
            time: tau as f64 * self.dt,
            u_mid: sol.u_mid,
            u: u.clone(),
            v: v.clone(),
            v_prev: self.state.v.clone(),
            d_prev: self.state.d.clone(),
            d: d.clone(),
            openings,
            s0: sol.s0,
            force,
            contact_force,
            stats: sol.stats,
        };
        self.state = State { tau, u, v, d };
        Ok(rec)
    }

    /// Runs `n_step` steps.
    pub fn run(&mut self, n_step: usize) -> Result<Vec<StepRecord>> {
        (0..n_step).map(|_| self.step()).collect()
    }

    /// Pseudo-record of the initial state: midpoint quantities equal the
    /// initial ones and the force is the static part of the gradient.
    pub fn initial_record(&self) -> Result<StepRecord> {
        let s = &self.initial;
        let (_, mut force, _) = self.model.bulk_energy(&s.u)?;
        force.iter_mut().zip(&self.model.load).for_each(|(f, l)| *f += l);
        let openings = self.model.opening_maps(&s.u)?;
        Ok(StepRecord {
            tau: 0,
            time: 0.0,
            u_mid: s.u.clone(),
            u: s.u.clone(),
            v: s.v.clone(),
            v_prev: s.v.clone(),
            d_prev: s.d.clone(),
            d: s.d.clone(),
            s0: openings.iter().map(|c| c[0].hypot(c[1])).collect(),
            openings,
            force,
            contact_force: vec![0.0; self.model.n_dof()],
            stats: SolveStats::default(),
        })
    }
}
