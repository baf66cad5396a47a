mod common;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::OnceLock;
use std::thread;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use common::{dot, fd_errors, norm, rand_dir, verdict, MeshBuilder};
use conefrac_core::assembly::{optimal_extension, Layout, Model, Objective, StepContext};
use conefrac_core::cone::{dual_from_primal, identity, jordan_product, phi_nno, phi_soc, Cone};
use conefrac_core::config::{Problem, RunConfig};
use conefrac_core::energy::{balance_report, EnergyLedger};
use conefrac_core::material::{cohesive_g, h_alpha, BulkParams, CohesiveParams};
use conefrac_core::mesh::{insert_interfaces, Mesh};
use conefrac_core::output::{damage_csv, energies_csv};
use conefrac_core::sparse::SymMatrix;
use conefrac_core::stepper::StepRecord;
use conefrac_core::trustregion::{compute_delta_xi, minimize, model_decrease, Function, TrConfig};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

// ---------------------------------------------------------------- wrappers

struct BulkFn<'a>(&'a Model);

impl Function for BulkFn<'_> {
    fn dim(&self) -> usize {
        self.0.n_dof()
    }
    fn value(&self, u: &[f64]) -> f64 {
        self.0.bulk_energy(u).map_or(f64::INFINITY, |e| e.0)
    }
    fn gradient(&self, u: &[f64]) -> Option<(f64, Vec<f64>)> {
        self.0.bulk_energy(u).ok().map(|e| (e.0, e.1))
    }
    fn hessian(&self, u: &[f64]) -> Option<(f64, Vec<f64>, SymMatrix)> {
        self.0.bulk_energy(u).ok()
    }
}

struct InterfaceFn {
    d: Vec<f64>,
    omega: Vec<f64>,
    alpha: f64,
    p: CohesiveParams,
}

impl Function for InterfaceFn {
    fn dim(&self) -> usize {
        self.d.len()
    }
    fn value(&self, s: &[f64]) -> f64 {
        h_alpha(s, &self.d, self.alpha, &self.omega, &self.p).value
    }
    fn gradient(&self, s: &[f64]) -> Option<(f64, Vec<f64>)> {
        let e = h_alpha(s, &self.d, self.alpha, &self.omega, &self.p);
        Some((e.value, e.gradient))
    }
    fn hessian(&self, s: &[f64]) -> Option<(f64, Vec<f64>, SymMatrix)> {
        let e = h_alpha(s, &self.d, self.alpha, &self.omega, &self.p);
        let n = s.len();
        let dense: Vec<Vec<f64>> = (0..n)
            .map(|i| (0..n).map(|j| if i == j { e.hessian_diag[i] } else { 0.0 }).collect())
            .collect();
        Some((e.value, e.gradient, SymMatrix::from_dense(&dense)))
    }
}

struct ConeFn(Cone);

impl ConeFn {
    fn eval(&self, x: &[f64]) -> Option<conefrac_core::cone::Barrier> {
        match self.0 {
            Cone::Nno(_) => phi_nno(x),
            Cone::Soc(_) => phi_soc(x),
        }
        .interior()
    }
}

impl Function for ConeFn {
    fn dim(&self) -> usize {
        self.0.dim()
    }
    fn value(&self, x: &[f64]) -> f64 {
        self.eval(x).map_or(f64::INFINITY, |b| b.value)
    }
    fn gradient(&self, x: &[f64]) -> Option<(f64, Vec<f64>)> {
        self.eval(x).map(|b| (b.value, b.gradient))
    }
    fn hessian(&self, x: &[f64]) -> Option<(f64, Vec<f64>, SymMatrix)> {
        self.eval(x).map(|b| (b.value, b.gradient, SymMatrix::from_dense(&b.hessian)))
    }
}

/// Dense test function given by closures.
struct Dense<F> {
    n: usize,
    f: F,
}

impl<F> Function for Dense<F>
where
    F: Fn(&[f64]) -> Option<(f64, Vec<f64>, Vec<Vec<f64>>)>,
{
    fn dim(&self) -> usize {
        self.n
    }
    fn value(&self, x: &[f64]) -> f64 {
        (self.f)(x).map_or(f64::INFINITY, |e| e.0)
    }
    fn gradient(&self, x: &[f64]) -> Option<(f64, Vec<f64>)> {
        (self.f)(x).map(|e| (e.0, e.1))
    }
    fn hessian(&self, x: &[f64]) -> Option<(f64, Vec<f64>, SymMatrix)> {
        (self.f)(x).map(|e| (e.0, e.1, SymMatrix::from_dense(&e.2)))
    }
}

fn interior_soc(n: usize, rng: &mut StdRng) -> Vec<f64> {
    let rest: Vec<f64> = (0..n - 1).map(|_| rng.gen_range(-2.0..2.0)).collect();
    let mut x = vec![norm(&rest) * rng.gen_range(1.01..2.0) + rng.gen_range(1e-3..1.0)];
    x.extend(rest);
    x
}

// ---------------------------------------------------------------- shared runs

struct Run {
    problem: Problem,
    /// Initial pseudo-record followed by one record per step.
    records: Vec<StepRecord>,
    error: Option<String>,
}

impl Run {
    fn model(&self) -> &Model {
        &self.problem.simulation.model
    }

    fn steps(&self) -> &[StepRecord] {
        &self.records[1..]
    }

    fn ledger(&self) -> EnergyLedger {
        let sim = &self.problem.simulation;
        EnergyLedger::build(&sim.model, &self.records, sim.bc.constrained(), sim.dt, 1.0).unwrap()
    }
}

fn run_problem(mut problem: Problem, n_step: usize) -> Run {
    let mut records = vec![problem.simulation.initial_record().unwrap()];
    let mut error = None;
    for _ in 0..n_step {
        match problem.simulation.step() {
            Ok(r) => records.push(r),
            Err(e) => {
                error = Some(e.to_string());
                break;
            }
        }
    }
    Run { problem, records, error }
}

fn patch_problem() -> Problem {
    Problem::from_file(&fixture("patch.toml")).unwrap()
}

fn patch_run() -> &'static Run {
    static RUN: OnceLock<Run> = OnceLock::new();
    RUN.get_or_init(|| {
        let p = patch_problem();
        let n = p.config.n_step;
        run_problem(p, n)
    })
}

const MATERIAL_LINEAR: &str = r#"
[[material]]
model = "linear"
E = 5760.0
nu = 0.42
rho = 1.18e-9
"#;

const MATERIAL_KS: &str = r#"
[[material]]
model = "knowles_sternberg"
E = 5760.0
nu = 0.42
rho = 1.18e-9
"#;

const COHESIVE_NONE: &str = r#"
[cohesive]
sigma_c = 105.0
G_c = 0.352
interfaces = "none"
"#;

fn problem_from(mesh: &MeshBuilder, toml: &str) -> Problem {
    let cfg = RunConfig::parse(toml).unwrap();
    Problem::with_mesh(cfg, Mesh::parse(&mesh.text()).unwrap()).unwrap()
}

/// Two linear blocks, the left one driven into the right one across a
/// small gap.
fn impact_problem() -> Problem {
    let mesh = MeshBuilder::default()
        .block("a", 6, 2, [0.0, 0.0], [2.0, 1.0])
        .block("b", 6, 2, [2.02, 0.0], [2.0, 1.0]);
    let toml = format!(
        r#"
mesh = "impact.msh"
dt = 5e-8
n_step = 100
{MATERIAL_LINEAR}
{COHESIVE_NONE}
[[bc]]
node_set = "a_left"
components = ["x", "y"]
velocity = [1e4, 0.0]

[[contact]]
node_set_a = "a_right"
node_set_b = "b_left"
axis = "x"
gap = 0.0
tag = "impact"
"#
    );
    problem_from(&mesh, &toml)
}

fn impact_run() -> &'static Run {
    static RUN: OnceLock<Run> = OnceLock::new();
    RUN.get_or_init(|| run_problem(impact_problem(), 100))
}

/// Blocks with the previous displacement pushing the right one through
/// the contact gap.
fn contact_violation_problem() -> Problem {
    let mesh = MeshBuilder::default()
        .block("a", 2, 2, [0.0, 0.0], [1.0, 1.0])
        .block("b", 2, 2, [1.1, 0.0], [1.0, 1.0]);
    let toml = format!(
        r#"
mesh = "contact.msh"
dt = 1e-5
n_step = 1
{MATERIAL_LINEAR}
{COHESIVE_NONE}
[[bc]]
node_set = "a_left"
components = ["x"]

[[bc]]
node_set = "a_bottom"
components = ["y"]

[[bc]]
node_set = "b_bottom"
components = ["y"]

[[contact]]
node_set_a = "a_right"
node_set_b = "b_left"
axis = "x"
"#
    );
    let mut p = problem_from(&mesh, &toml);
    let sim = &mut p.simulation;
    let b = sim.model.fmesh.base.element_set("b").unwrap().to_vec();
    let mut u = vec![0.0; sim.model.n_dof()];
    for e in b {
        for &n in &sim.model.fmesh.elements[e] {
            u[2 * n] = -0.15;
        }
    }
    sim.state.u = u.clone();
    sim.initial.u = u;
    p
}

/// One square compressed by 45 percent at the step midpoint; moving only
/// the prescribed top nodes pushes the side midnodes out of the middle
/// half of their edges.
fn crushing_problem() -> Problem {
    let mesh = MeshBuilder::default().block("s", 1, 1, [0.0, 0.0], [1.0, 1.0]).point_set("origin", [0.0, 0.0]);
    let toml = format!(
        r#"
mesh = "crush.msh"
dt = 1.0
n_step = 1
{MATERIAL_KS}
{COHESIVE_NONE}
[[bc]]
node_set = "s_bottom"
components = ["y"]

[[bc]]
node_set = "origin"
components = ["x"]

[[bc]]
node_set = "s_top"
components = ["y"]
velocity = [0.0, -0.9]
"#
    );
    problem_from(&mesh, &toml)
}

fn phase_one_runs() -> &'static (Run, Run) {
    static RUNS: OnceLock<(Run, Run)> = OnceLock::new();
    RUNS.get_or_init(|| (run_problem(contact_violation_problem(), 1), run_problem(crushing_problem(), 1)))
}

// ---------------------------------------------------------------- criteria

fn derivatives() -> Outcome {
    let mut rng = StdRng::seed_from_u64(11);
    let tol = 1e-5;
    let mut worst: Vec<(&str, usize, f64)> = Vec::new();
    let mut record = |name: &'static str, errs: Vec<Option<(f64, f64)>>| {
        let e = errs.iter().map(|e| e.map_or(f64::INFINITY, |(a, b)| a.max(b))).fold(0.0, f64::max);
        worst.push((name, errs.len(), e));
    };

    // bulk energy on a small two-element square
    let fm = insert_interfaces(&Mesh::parse(&MeshBuilder::default().block("s", 1, 1, [0.0, 0.0], [1.0, 1.0]).text()).unwrap());
    let n_el = fm.elements.len();
    let ks = BulkParams::knowles_sternberg(5760.0, 0.42, 1.18e-9).unwrap();
    let cohesive = CohesiveParams::new(105.0, 0.352, 1.0).unwrap();
    let model = Model::new(fm, vec![ks; n_el], cohesive, Default::default(), None, 3).unwrap();
    let bulk = BulkFn(&model);
    let errs = (0..20)
        .map(|_| {
            let u: Vec<f64> = (0..model.n_dof()).map(|_| rng.gen_range(-0.05..0.05)).collect();
            fd_errors(&bulk, &u, 1e-6, 4, &mut rng)
        })
        .collect();
    record("bulk", errs);

    // interface potential with and without regularization
    let p = cohesive;
    for (name, with_alpha) in [("h", false), ("h_alpha", true)] {
        let errs = (0..20)
            .map(|_| {
                let n = 6;
                let d: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..0.9) * p.delta_u).collect();
                let h = 1e-7 * p.delta_u;
                let s: Vec<f64> = d
                    .iter()
                    .map(|&di| loop {
                        let s = rng.gen_range(0.0..1.3) * p.delta_u;
                        if (s - di).abs() > 1e3 * h && (s - p.delta_u).abs() > 1e3 * h {
                            break s;
                        }
                    })
                    .collect();
                let f = InterfaceFn {
                    d,
                    omega: (0..n).map(|_| rng.gen_range(0.1..0.6)).collect(),
                    alpha: if with_alpha { rng.gen_range(1e-9..5e-5) } else { 0.0 },
                    p,
                };
                fd_errors(&f, &s, h, 4, &mut rng)
            })
            .collect();
        record(name, errs);
    }

    // cone barriers
    for (name, cone) in [("phi_nno", Cone::Nno(3)), ("phi_soc", Cone::Soc(3))] {
        let errs = (0..20)
            .map(|_| {
                let x = match cone {
                    Cone::Nno(n) => (0..n).map(|_| rng.gen_range(0.05..2.0)).collect(),
                    Cone::Soc(n) => interior_soc(n, &mut rng),
                };
                fd_errors(&ConeFn(cone), &x, 1e-6, 4, &mut rng)
            })
            .collect();
        record(name, errs);
    }

    // composed objectives of both phases on the patch model
    let problem = patch_problem();
    let sim = &problem.simulation;
    let model = &sim.model;
    let du = model.cohesive.delta_u;
    let upper = model.fmesh.base.element_set("upper").unwrap().to_vec();
    for phase in ["phase_two", "phase_one"] {
        let mut errs = Vec::new();
        while errs.len() < 20 {
            let bc = sim.midpoint_bc(1);
            let n = model.n_dof();
            let ctx = StepContext {
                u_prev: vec![0.0; n],
                v_prev: (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect(),
                dt: sim.dt,
                d: (0..model.n_points()).map(|_| rng.gen_range(0.0..0.5) * du).collect(),
                bc: bc.clone(),
            };
            let shift = rng.gen_range(0.2..1.5) * du;
            let mut u: Vec<f64> = (0..n).map(|_| rng.gen_range(-0.02..0.02) * du).collect();
            for &e in &upper {
                for &nd in &model.fmesh.elements[e] {
                    u[2 * nd] -= shift;
                }
            }
            let layout = if phase == "phase_two" {
                u = bc.expand(&bc.project(&u));
                Layout::phase_two(model, &bc)
            } else {
                Layout::phase_one(model, &bc)
            };
            let obj = if phase == "phase_two" {
                Objective::phase_two(model, &ctx, &layout, 1e-6)
            } else {
                Objective::phase_one(model, &ctx, &layout, 5e-5, 64.0)
            };
            let c = model.opening_maps(&u).unwrap();
            if c.iter().any(|c| c[0] <= 0.05 * du) {
                continue;
            }
            let xi0 = optimal_extension(model, &ctx, &layout, &u, obj.mu, obj.alpha, obj.big_m).unwrap();
            let s0: Vec<f64> = c.iter().map(|c| c[0].hypot(c[1]) + rng.gen_range(0.01..0.1) * du).collect();
            let h = 1e-5 * du;
            if s0.iter().zip(&ctx.d).any(|(s, d)| (s - d).abs() < 1e3 * h || (s - du).abs() < 1e3 * h) {
                continue;
            }
            let t = layout.t(&xi0).map(|t| t + rng.gen_range(0.01..0.1) * du);
            let xi = layout.pack(&u, &s0, t);
            if !obj.value(&xi).is_finite() {
                continue;
            }
            errs.push(fd_errors(&obj, &xi, h, 4, &mut rng));
        }
        record(if phase == "phase_two" { "phase-II objective" } else { "phase-I objective" }, errs);
    }

    let pass = worst.iter().all(|&(_, n, e)| n >= 20 && e <= tol);
    let detail = worst.iter().map(|(name, n, e)| format!("{name} {e:.1e} ({n} pts)")).collect::<Vec<_>>().join(", ");
    outcome(pass, format!("worst relative error: {detail}"))
}

fn cone_identities() -> Outcome {
    let mut rng = StdRng::seed_from_u64(12);
    let mut worst = 0.0f64;
    let mut all_interior = true;
    for cone in [Cone::Soc(2), Cone::Soc(3), Cone::Soc(4), Cone::Nno(2), Cone::Nno(3), Cone::Nno(4)] {
        for _ in 0..1000 {
            let mu = 10f64.powf(rng.gen_range(-9.0..0.0));
            let x = match cone {
                Cone::Soc(n) => interior_soc(n, &mut rng),
                Cone::Nno(n) => (0..n).map(|_| rng.gen_range(1e-3..3.0)).collect(),
            };
            let s = dual_from_primal(&x, mu, cone).unwrap();
            let e = identity(cone);
            let xs = jordan_product(&x, &s, cone);
            let err: Vec<f64> = xs.iter().zip(&e).map(|(a, b)| a - mu * b).collect();
            worst = worst.max(norm(&err) / mu);
            let interior = match cone {
                Cone::Soc(_) => s[0] > norm(&s[1..]),
                Cone::Nno(_) => s.iter().all(|&v| v > 0.0),
            };
            all_interior &= interior;
        }
    }
    outcome(worst <= 1e-12 && all_interior, format!("max |x o s - mu e| / mu = {worst:.2e}, duals interior: {all_interior}"))
}

fn cohesive_exactness() -> Outcome {
    // critical traction (MPa) and fracture energy (N/mm) of the tabulated materials
    let sets = [("PMMA", 105e6, 352.0), ("concrete A", 3e6, 69.0), ("concrete B", 3e6, 2280.0)];
    let mut worst_exact = 0.0f64;
    let mut worst_c1 = 0.0f64;
    for (_, sigma_c, g_c) in sets {
        let p = CohesiveParams::new(sigma_c, g_c, 1.0).unwrap();
        worst_exact = worst_exact.max(rel(cohesive_g(0.0, 0.0, &p).1, sigma_c));
        worst_exact = worst_exact.max(rel(cohesive_g(p.delta_u, 0.0, &p).0, g_c));
        for d in [0.0, 0.25 * p.delta_u, 0.7 * p.delta_u] {
            for b in [d, p.delta_u] {
                if b == 0.0 {
                    continue;
                }
                let e = 1e-12 * p.delta_u;
                let (gl, sl, _) = cohesive_g(b - e, d, &p);
                let (gr, sr, _) = cohesive_g(b + e, d, &p);
                let (g0, s0, _) = cohesive_g(b, d, &p);
                worst_c1 = worst_c1.max((gl - g0).abs().max((gr - g0).abs()) / g_c);
                worst_c1 = worst_c1.max((sl - s0).abs().max((sr - s0).abs()) / sigma_c);
            }
        }
    }
    outcome(
        worst_exact <= 1e-12 && worst_c1 <= 1e-8,
        format!("g'(0;0), g(delta_u;0) relative error {worst_exact:.1e}; C1 jump {worst_c1:.1e}"),
    )
}

/// Mean normal traction on the diagonal interface of the patch, from the
/// reaction of the top edge.
fn patch_traction(model: &Model, rec: &StepRecord) -> f64 {
    let base = &model.fmesh.base;
    let top = model.fmesh.copies(base.node_set("top").unwrap(), Some(base.element_set("upper").unwrap()));
    let width = base.nodes.iter().map(|x| x[0]).fold(f64::NEG_INFINITY, f64::max)
        - base.nodes.iter().map(|x| x[0]).fold(f64::INFINITY, f64::min);
    let reaction: f64 = top.iter().map(|&n| rec.force[2 * n + 1]).sum();
    reaction / width / 2f64.sqrt()
}

fn patch_test() -> Outcome {
    let run = patch_run();
    if let Some(e) = &run.error {
        return outcome(false, format!("run failed after {} steps: {e}", run.steps().len()));
    }
    let model = run.model();
    let p = &model.cohesive;
    let du = p.delta_u;
    let mut closed_ok = true;
    let mut worst_closed = 0.0f64;
    let mut onset = None;
    let mut peak = (0usize, 0.0f64);
    for r in run.steps() {
        let t = patch_traction(model, r) / p.sigma_c;
        let open = r.effective_openings().iter().cloned().fold(0.0, f64::max);
        if onset.is_none() && open >= 1e-3 * du {
            onset = Some(r.tau);
        }
        if onset.is_none() {
            worst_closed = worst_closed.max(open / du);
            if t > peak.1 {
                peak = (r.tau, t);
            }
        }
        if t < 0.95 && onset.is_none() {
            closed_ok &= open < 1e-3 * du;
        }
    }
    let Some(onset) = onset else {
        return outcome(false, "interface never opened");
    };
    let onset_ok = (0.95..=1.05).contains(&peak.1) && onset == peak.0 + 1;
    let last = run.steps().last().unwrap();
    let separated = last.d.iter().all(|&d| d >= du);
    let fe = run.ledger().rows.last().unwrap().fe_dis;
    let target = p.g_c * model.omegas().iter().sum::<f64>();
    let fe_ok = separated && rel(fe, target) <= 0.02;
    outcome(
        closed_ok && onset_ok && fe_ok,
        format!(
            "closed opening <= {worst_closed:.1e} delta_u; peak traction {:.3} sigma_c at step {}, opened at step {onset}; FE_dis {fe:.4e} vs G_c L {target:.4e}",
            peak.1, peak.0
        ),
    )
}

fn equality_recovery() -> Outcome {
    let run = patch_run();
    let model = run.model();
    let du = model.cohesive.delta_u;
    // (lowest, highest, count) of (s0 - |c|)/delta_u inside and beyond the cohesive range
    let mut inside = (f64::INFINITY, f64::NEG_INFINITY, 0usize);
    let mut beyond = (f64::INFINITY, f64::NEG_INFINITY, 0usize);
    for r in run.steps() {
        for (s0, delta) in r.s0.iter().zip(r.effective_openings()) {
            let gap = (s0 - delta) / du;
            let slot = if delta < du { &mut inside } else { &mut beyond };
            *slot = (slot.0.min(gap), slot.1.max(gap), slot.2 + 1);
        }
    }
    let lowest = inside.0.min(beyond.0);
    let highest = inside.1.max(beyond.1);
    outcome(
        lowest >= 0.0 && highest <= 1e-6,
        format!(
            "mu = {:.3e}; (s0 - |c|)/delta_u in [{:.1e}, {:.1e}] at {} points with |c| < delta_u, [{:.1e}, {:.1e}] at {} points beyond delta_u",
            run.problem.simulation.solver.mu.last(),
            inside.0,
            inside.1,
            inside.2,
            beyond.0,
            beyond.1,
            beyond.2
        ),
    )
}

fn inverted(model: &Model, u: &[f64]) -> bool {
    (0..model.fmesh.elements.len()).any(|e| model.element_energy(e, u, false).is_err())
}

fn phase_one_robustness() -> Outcome {
    let (contact, crush) = phase_one_runs();
    let mut parts = Vec::new();
    let mut pass = true;

    let sim = &contact.problem.simulation;
    let bc = sim.midpoint_bc(1);
    let projected = bc.expand(&bc.project(&sim.initial.u));
    let violated = sim.model.contact.slack(&projected).iter().any(|&s| s < 0.0);
    match (&contact.error, contact.steps().first()) {
        (None, Some(r)) => {
            let slack = sim.model.contact.slack(&r.u_mid).iter().cloned().fold(f64::INFINITY, f64::min);
            let ok = violated && r.stats.escalations <= 5 && slack > 0.0 && !inverted(&sim.model, &r.u_mid);
            pass &= ok;
            parts.push(format!("contact start: {} escalations, min slack {slack:.2e}", r.stats.escalations));
        }
        (e, _) => {
            pass = false;
            parts.push(format!("contact start failed: {e:?}"));
        }
    }

    let sim = &crush.problem.simulation;
    let bc = sim.midpoint_bc(1);
    let projected = bc.expand(&bc.project(&sim.initial.u));
    let would_invert = inverted(&sim.model, &projected);
    match (&crush.error, crush.steps().first()) {
        (None, Some(r)) => {
            let ok = would_invert && r.stats.escalations <= 5 && !inverted(&sim.model, &r.u_mid);
            pass &= ok;
            parts.push(format!(
                "moving boundary: projection inverts {would_invert}, {} escalations (M = {:e})",
                r.stats.escalations, r.stats.big_m
            ));
        }
        (e, _) => {
            pass = false;
            parts.push(format!("moving boundary failed: {e:?}"));
        }
    }
    outcome(pass, parts.join("; "))
}

/// Double wells coupled in a chain inside an interior ball of radius 3.
fn wells(x: &[f64]) -> Option<(f64, Vec<f64>, Vec<Vec<f64>>)> {
    let n = x.len();
    let mu = 1e-2;
    let s = 9.0 - dot(x, x);
    if !(s > 0.0) {
        return None;
    }
    let mut f = -mu * s.ln();
    let mut g: Vec<f64> = x.iter().map(|v| 2.0 * mu * v / s).collect();
    let mut h = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            h[i][j] = 4.0 * mu * x[i] * x[j] / (s * s) + if i == j { 2.0 * mu / s } else { 0.0 };
        }
    }
    for i in 0..n {
        let a = 1.0 + 0.1 * i as f64;
        f += 0.25 * (x[i] * x[i] - a).powi(2) + 0.05 * x[i];
        g[i] += (x[i] * x[i] - a) * x[i] + 0.05;
        h[i][i] += 3.0 * x[i] * x[i] - a;
        if i + 1 < n {
            f += 0.1 * x[i] * x[i + 1];
            g[i] += 0.1 * x[i + 1];
            g[i + 1] += 0.1 * x[i];
            h[i][i + 1] += 0.1;
            h[i + 1][i] += 0.1;
        }
    }
    Some((f, g, h))
}

/// Negative curvature toward an oblique barrier `1 - x + 0.3 y > 0`.
fn oblique(v: &[f64]) -> Option<(f64, Vec<f64>, Vec<Vec<f64>>)> {
    let (x, y) = (v[0], v[1]);
    let mu = 0.05;
    let s = 1.0 - x + 0.3 * y;
    if !(s > 0.0) {
        return None;
    }
    let f = -x - 0.5 * x * x + 0.5 * y * y - mu * s.ln();
    let g = vec![-1.0 - x + mu / s, y - 0.3 * mu / s];
    let c = mu / (s * s);
    let h = vec![vec![-1.0 + c, -0.3 * c], vec![-0.3 * c, 1.0 + 0.09 * c]];
    Some((f, g, h))
}

fn trust_region_contract() -> Outcome {
    let cfg = TrConfig::default();
    let mut rng = StdRng::seed_from_u64(17);

    let f = Dense { n: 10, f: wells };
    let x0: Vec<f64> = (0..10).map(|_| rng.gen_range(-0.1..0.1)).collect();
    let (_, _, h0) = f.hessian(&x0).unwrap();
    let (nonconvex, decreasing, gnorm) = match minimize(&f, &x0, &h0, 1.0, &cfg) {
        Ok(m) => {
            let nonconvex = h0.to_dense().iter().enumerate().any(|(i, r)| r[i] < 0.0);
            let dec = m.report.values.windows(2).all(|w| w[1] < w[0]);
            (nonconvex, dec, m.report.gradient_norm)
        }
        Err(e) => return outcome(false, format!("double-well minimization failed: {e}")),
    };

    let f = Dense { n: 2, f: oblique };
    let x0 = [0.0, 0.0];
    let fired = minimize(&f, &x0, &SymMatrix::identity(2), 1.0 - 1e-4, &cfg).map(|m| m.report.rejected_rho_g);

    let mut worst_gap = 0.0f64;
    for k in 0..50 {
        let n = 2 + k % 2;
        let a: Vec<Vec<f64>> = (0..n).map(|_| (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
        let mut hd: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| 0.5 * (a[i][j] + a[j][i])).collect()).collect();
        // make sure one direction has negative curvature
        hd[0][0] = -rng.gen_range(0.2..1.0) - hd[0][1..].iter().map(|v| v.abs()).sum::<f64>();
        let h = SymMatrix::from_dense(&hd);
        let g: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let r = rng.gen_range(0.1..3.0);
        let s = compute_delta_xi(&h, &SymMatrix::identity(n), &g, r, &cfg).unwrap();
        let got = model_decrease(&h, &g, &s.delta);
        let mut best = 0.0f64;
        for _ in 0..100_000 {
            let d: Vec<f64> = rand_dir(n, &mut rng).iter().map(|v| v * r).collect();
            best = best.max(model_decrease(&h, &g, &d));
        }
        worst_gap = worst_gap.max((best - got) / best);
    }

    let fired_ok = matches!(fired, Ok(k) if k > 0);
    outcome(
        nonconvex && decreasing && gnorm <= 1e-6 && fired_ok && worst_gap <= 1e-3,
        format!(
            "10-DOF wells: indefinite start {nonconvex}, monotone {decreasing}, |grad f| {gnorm:.1e}; gradient-ratio rejections on the oblique barrier {fired:?}; worst shortfall vs sampling {:.3}%",
            100.0 * worst_gap.max(0.0)
        ),
    )
}

fn energy_balance() -> Outcome {
    let run = impact_run();
    if let Some(e) = &run.error {
        return outcome(false, format!("impact run failed after {} steps: {e}", run.steps().len()));
    }
    let ledger = run.ledger();
    let b = balance_report(&ledger);
    let contact = run.steps().iter().any(|r| r.contact_force.iter().any(|&f| f.abs() > 0.0));
    let max_ke = ledger.rows.iter().map(|r| r.ke).fold(0.0, f64::max);
    outcome(
        b.max_relative <= 0.03 && ledger.rows.len() == 100,
        format!(
            "{} elements, {} steps, contact active {contact}; max residual {:.2}% of peak work {:.3e} (peak KE {max_ke:.3e})",
            run.model().fmesh.elements.len(),
            ledger.rows.len(),
            100.0 * b.max_relative,
            b.peak_work
        ),
    )
}

fn interiority() -> Outcome {
    let (contact, crush) = phase_one_runs();
    let runs = [("patch", patch_run()), ("impact", impact_run()), ("contact start", contact), ("moving boundary", crush)];
    let mut min_s1 = f64::INFINITY;
    let mut min_slack = f64::INFINITY;
    let mut min_open = f64::INFINITY;
    let mut n = 0;
    for (_, run) in runs {
        let model = run.model();
        for r in run.steps() {
            n += 1;
            for c in model.opening_maps(&r.u_mid).unwrap() {
                min_s1 = min_s1.min(c[0]);
            }
            for s in model.contact.slack(&r.u_mid) {
                min_slack = min_slack.min(s);
            }
            for c in &r.openings {
                min_open = min_open.min(c[0]);
            }
        }
    }
    outcome(
        min_s1 > 0.0 && min_slack > 0.0 && min_open >= -1e-12,
        format!("{n} steps: min s1 {min_s1:.2e}, min contact slack {min_slack:.2e}, min reported opening {min_open:.2e}"),
    )
}

fn midpoint_conservation() -> Outcome {
    // one free DOF at the center of a clamped square
    let mesh = MeshBuilder::default().block("s", 1, 1, [0.0, 0.0], [1.0, 1.0]).point_set("center", [0.5, 0.5]);
    let mut toml = format!(
        r#"
mesh = "osc.msh"
dt = 1.0
n_step = 1000
{MATERIAL_LINEAR}
{COHESIVE_NONE}
[[initial]]
velocity = [1e3, 0.0]

[[bc]]
node_set = "center"
components = ["y"]
"#
    );
    for side in ["bottom", "top", "left", "right"] {
        toml.push_str(&format!("\n[[bc]]\nnode_set = \"s_{side}\"\ncomponents = [\"x\", \"y\"]\n"));
    }
    let mut p = problem_from(&mesh, &toml);
    let sim = &mut p.simulation;
    let free = sim.bc.free().to_vec();
    if free.len() != 1 {
        return outcome(false, format!("expected one free DOF, got {}", free.len()));
    }
    let i = free[0];
    let m = sim.model.mass.get(i, i);
    let k = sim.model.bulk_energy(&vec![0.0; sim.model.n_dof()]).unwrap().2.get(i, i);
    sim.dt = 2.0 * std::f64::consts::PI * (m / k).sqrt() / 20.0;
    let energy = |u: f64, v: f64| 0.5 * m * v * v + 0.5 * k * u * u;
    let e0 = energy(sim.state.u[i], sim.state.v[i]);
    let mut drift = 0.0f64;
    for _ in 0..1000 {
        match sim.step() {
            Ok(r) => drift = drift.max(rel(energy(r.u[i], r.v[i]), e0)),
            Err(e) => return outcome(false, format!("oscillator step failed: {e}")),
        }
    }

    let mesh = MeshBuilder::default().block("s", 1, 1, [0.0, 0.0], [1.0, 1.0]);
    let toml = format!(
        r#"
mesh = "flight.msh"
dt = 1e-6
n_step = 100
{MATERIAL_KS}
{COHESIVE_NONE}
[[initial]]
velocity = [300.0, -200.0]
"#
    );
    let mut p = problem_from(&mesh, &toml);
    let sim = &mut p.simulation;
    let v0 = [300.0, -200.0];
    let mut flight = 0.0f64;
    for _ in 0..100 {
        let r = match sim.step() {
            Ok(r) => r,
            Err(e) => return outcome(false, format!("free flight step failed: {e}")),
        };
        for (j, (u, v)) in r.u.iter().zip(&r.v).enumerate() {
            flight = flight.max(rel(*v, v0[j % 2])).max(rel(*u, v0[j % 2] * r.time));
        }
    }
    outcome(
        drift <= 1e-10 && flight <= 1e-12,
        format!("oscillator energy drift {drift:.1e} over 1000 steps; free flight deviation {flight:.1e}"),
    )
}

fn csv_outputs(n_step: usize) -> Vec<String> {
    let run = run_problem(patch_problem(), n_step);
    let ledger = run.ledger();
    let mut out = vec![energies_csv(&ledger)];
    out.extend(run.steps().iter().map(|r| damage_csv(run.model(), r)));
    out
}

fn determinism() -> Outcome {
    let (a, b) = thread::scope(|s| {
        let a = s.spawn(|| csv_outputs(32));
        let b = s.spawn(|| csv_outputs(32));
        (a.join().unwrap(), b.join().unwrap())
    });
    let same = a.len() == b.len() && a.iter().zip(&b).all(|(x, y)| x.as_bytes() == y.as_bytes());
    outcome(same, format!("{} CSV files compared, identical: {same}", a.len()))
}

fn main() -> ExitCode {
    let criteria: [(usize, &str, fn() -> Outcome); 11] = [
        (1, "derivative correctness", derivatives),
        (2, "cone identities", cone_identities),
        (3, "cohesive-law exactness", cohesive_exactness),
        (4, "rigid patch test", patch_test),
        (5, "equality recovery", equality_recovery),
        (6, "phase-one robustness", phase_one_robustness),
        (7, "trust-region contract", trust_region_contract),
        (8, "energy balance", energy_balance),
        (9, "non-interpenetration", interiority),
        (10, "midpoint conservation", midpoint_conservation),
        (11, "determinism", determinism),
    ];
    let filter: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let results: Vec<(usize, &str, Outcome)> = thread::scope(|s| {
        let handles: Vec<_> = criteria
            .iter()
            .filter(|(id, _, _)| filter.is_empty() || filter.contains(id))
            .map(|&(id, name, f)| {
                (id, name, thread::Builder::new().stack_size(64 << 20).spawn_scoped(s, f).unwrap())
            })
            .collect();
        handles
            .into_iter()
            .map(|(id, name, h)| (id, name, h.join().unwrap_or_else(|_| outcome(false, "panicked"))))
            .collect()
    });
    let mut failed = 0;
    for (id, name, o) in &results {
        if !verdict(*id, name, o.pass, &o.detail) {
            failed += 1;
        }
    }
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
