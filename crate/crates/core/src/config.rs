//! Run configuration and assembly of a [`Simulation`] from it.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::assembly::Model;
use crate::element::{tri6_grad, tri6_jacobian, tri6_shape, tri_rule_6};
use crate::error::{Error, Result};
use crate::material::{BulkParams, CohesiveParams};
use crate::mesh::{build_bc, build_contact, insert_interfaces_where, load_mesh, BcEntry, ContactPair, FracturedMesh, Mesh};
use crate::stepper::{Simulation, SolverConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaterialKind {
    KnowlesSternberg,
    Linear,
}

/// Bulk material of one part.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialConfig {
    /// Element set of the part; omitted means every element not claimed by another block.
    pub element_set: Option<String>,
    pub model: MaterialKind,
    #[serde(rename = "E")]
    pub e: f64,
    pub nu: f64,
    pub rho: f64,
}

/// Where interfaces are inserted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InterfaceSelection {
    All,
    None,
    /// Only edges between two elements of this element set.
    Within(String),
}

impl Default for InterfaceSelection {
    fn default() -> Self {
        InterfaceSelection::All
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CohesiveConfig {
    pub sigma_c: f64,
    #[serde(rename = "G_c")]
    pub g_c: f64,
    #[serde(default = "one")]
    pub beta_mix: f64,
    /// Coefficient `k` of the barrier weight `k G_c omega`.
    #[serde(default = "default_zeta_scale")]
    pub zeta_scale: f64,
    #[serde(default)]
    pub interfaces: InterfaceSelection,
}

fn default_zeta_scale() -> f64 {
    crate::material::DEFAULT_ZETA_SCALE
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Component {
    X,
    Y,
}

impl Component {
    pub fn index(self) -> usize {
        match self {
            Component::X => 0,
            Component::Y => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BcConfig {
    pub node_set: String,
    pub element_set: Option<String>,
    pub components: Vec<Component>,
    /// Prescribed rate; zero or omitted means fixed.
    #[serde(default)]
    pub velocity: [f64; 2],
}

/// Node-to-node contact between two node sets matched by position.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContactConfig {
    pub node_set_a: String,
    pub node_set_b: String,
    /// Normal direction; side B lies on the positive side of side A.
    pub axis: Component,
    #[serde(default)]
    pub gap: f64,
    #[serde(default)]
    pub tag: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialVelocity {
    /// Element set receiving the velocity; omitted means all nodes.
    pub element_set: Option<String>,
    pub velocity: [f64; 2],
}

/// Reaction and deflection monitors for a load-deflection curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MonitorConfig {
    /// Restricts both node sets to the copies owned by this element set.
    pub element_set: Option<String>,
    pub reaction_set: String,
    pub reaction_component: Component,
    pub deflection_set: String,
    pub deflection_component: Component,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_dir")]
    pub dir: PathBuf,
    /// Write damage maps and snapshots every this many steps (0 disables).
    #[serde(default = "one_usize")]
    pub every: usize,
    /// Out-of-plane thickness multiplying reported energies.
    #[serde(default = "one")]
    pub thickness: f64,
    /// Joules per model energy unit (1e-3 for mm, N).
    #[serde(default = "one")]
    pub energy_unit: f64,
}

impl OutputConfig {
    /// Factor from model energies to reported joules.
    pub fn energy_scale(&self) -> f64 {
        self.thickness * self.energy_unit
    }
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { dir: default_dir(), every: 1, thickness: 1.0, energy_unit: 1.0 }
    }
}

fn default_dir() -> PathBuf {
    PathBuf::from("output")
}

fn one_usize() -> usize {
    1
}

fn three() -> usize {
    3
}

/// Complete run description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Mesh path, relative to the config file.
    pub mesh: PathBuf,
    pub dt: f64,
    pub n_step: usize,
    #[serde(default = "three")]
    pub bulk_order: usize,
    /// Body force per unit volume.
    #[serde(default)]
    pub body_force: [f64; 2],
    pub material: Vec<MaterialConfig>,
    pub cohesive: CohesiveConfig,
    #[serde(default)]
    pub bc: Vec<BcConfig>,
    #[serde(default)]
    pub contact: Vec<ContactConfig>,
    #[serde(default)]
    pub initial: Vec<InitialVelocity>,
    pub monitor: Option<MonitorConfig>,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Reads a config file; relative paths inside it resolve against its directory.
    pub fn load(path: &Path) -> Result<(Self, PathBuf)> {
        let text = std::fs::read_to_string(path)?;
        let cfg = RunConfig::parse(&text)?;
        let dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok((cfg, dir))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Checks values that do not need the mesh.
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) {
            return Err(Error::Config(format!("dt must be positive, got {}", self.dt)));
        }
        if self.material.is_empty() {
            return Err(Error::Config("at least one material block is required".into()));
        }
        if self.bulk_order != 3 && self.bulk_order != 6 {
            return Err(Error::Config(format!("bulk_order must be 3 or 6, got {}", self.bulk_order)));
        }
        let s = &self.solver;
        if s.mu.n == 0 || !(s.mu.mu_init > 0.0) || !(s.mu.rho > 0.0 && s.mu.rho < 1.0) {
            return Err(Error::Config("invalid barrier schedule".into()));
        }
        let t = &s.trust_region;
        if [t.tol1, t.tol2, t.tol3, t.tol4].iter().any(|v| !(*v > 0.0)) || !(s.radius > 0.0) {
            return Err(Error::Config("tolerances and radius must be positive".into()));
        }
        let o = &self.output;
        if !(o.thickness > 0.0 && o.energy_unit > 0.0) {
            return Err(Error::Config("output thickness and energy unit must be positive".into()));
        }
        Ok(())
    }
}

/// Mesh, model and simulation built from a config.
pub struct Problem {
    pub config: RunConfig,
    pub simulation: Simulation,
}

impl Problem {
    pub fn from_file(path: &Path) -> Result<Self> {
        let (cfg, dir) = RunConfig::load(path)?;
        Problem::build(cfg, &dir)
    }

    pub fn build(cfg: RunConfig, base_dir: &Path) -> Result<Self> {
        cfg.validate()?;
        let mesh = load_mesh(&base_dir.join(&cfg.mesh))?;
        Problem::with_mesh(cfg, mesh)
    }

    pub fn with_mesh(cfg: RunConfig, mesh: Mesh) -> Result<Self> {
        cfg.validate()?;
        let part = element_parts(&mesh, &cfg.material)?;
        let fmesh = match &cfg.cohesive.interfaces {
            InterfaceSelection::All => insert_interfaces_where(&mesh, |_, _| true),
            InterfaceSelection::None => insert_interfaces_where(&mesh, |_, _| false),
            InterfaceSelection::Within(set) => {
                let els: BTreeSet<usize> = mesh.element_set(set)?.iter().copied().collect();
                insert_interfaces_where(&mesh, |a, b| els.contains(&a) && els.contains(&b))
            }
        };
        let bulk = part
            .iter()
            .map(|&k| {
                let m = &cfg.material[k];
                match m.model {
                    MaterialKind::KnowlesSternberg => BulkParams::knowles_sternberg(m.e, m.nu, m.rho),
                    MaterialKind::Linear => BulkParams::linear(m.e, m.nu, m.rho),
                }
            })
            .collect::<Result<Vec<_>>>()?;
        let c = &cfg.cohesive;
        let cohesive = CohesiveParams::new(c.sigma_c, c.g_c, c.beta_mix)?.with_zeta_scale(c.zeta_scale)?;
        let pairs = contact_pairs(&mesh, &cfg.contact)?;
        let contact = build_contact(&fmesh, &pairs)?;
        let load = (cfg.body_force != [0.0, 0.0]).then(|| body_load(&fmesh, cfg.body_force));
        let model = Model::new(fmesh, bulk, cohesive, contact, load, cfg.bulk_order)?;

        let entries = bc_entries(&cfg.bc);
        let bc = build_bc(&model.fmesh, &entries, 0, cfg.dt)?;
        let n = model.n_dof();
        let mut v0 = vec![0.0; n];
        for iv in &cfg.initial {
            let nodes: Vec<usize> = match &iv.element_set {
                Some(set) => {
                    let els = model.fmesh.base.element_set(set)?;
                    let mut s: BTreeSet<usize> = BTreeSet::new();
                    for &e in els {
                        s.extend(model.fmesh.elements[e].iter().copied());
                    }
                    s.into_iter().collect()
                }
                None => (0..model.fmesh.n_nodes()).collect(),
            };
            for nd in nodes {
                v0[2 * nd] = iv.velocity[0];
                v0[2 * nd + 1] = iv.velocity[1];
            }
        }
        if let Some(m) = &cfg.monitor {
            mesh_check_set(&model.fmesh, &m.reaction_set)?;
            mesh_check_set(&model.fmesh, &m.deflection_set)?;
            if let Some(set) = &m.element_set {
                model.fmesh.base.element_set(set)?;
            }
        }
        let simulation = Simulation::new(model, bc, cfg.dt, cfg.solver.clone(), vec![0.0; n], v0)?;
        Ok(Problem { config: cfg, simulation })
    }
}

fn mesh_check_set(fmesh: &FracturedMesh, name: &str) -> Result<()> {
    fmesh.base.node_set(name).map(|_| ())
}

pub fn bc_entries(bc: &[BcConfig]) -> Vec<BcEntry> {
    bc.iter()
        .map(|b| BcEntry {
            node_set: b.node_set.clone(),
            element_set: b.element_set.clone(),
            components: b.components.iter().map(|c| c.index()).collect(),
            velocity: b.velocity,
        })
        .collect()
}

/// Material block index per element.
fn element_parts(mesh: &Mesh, materials: &[MaterialConfig]) -> Result<Vec<usize>> {
    let mut part: Vec<Option<usize>> = vec![None; mesh.elements.len()];
    for (k, m) in materials.iter().enumerate() {
        if let Some(set) = &m.element_set {
            for &e in mesh.element_set(set)? {
                part[e] = Some(k);
            }
        }
    }
    let default = materials.iter().position(|m| m.element_set.is_none());
    part.iter()
        .enumerate()
        .map(|(e, p)| {
            p.or(default)
                .ok_or_else(|| Error::Config(format!("element {} has no material", mesh.element_ids[e])))
        })
        .collect()
}

/// Matches the two node sets of each contact block by their coordinate
/// transverse to the contact axis.
fn contact_pairs(mesh: &Mesh, contact: &[ContactConfig]) -> Result<Vec<ContactPair>> {
    let mut pairs = Vec::new();
    for c in contact {
        let axis = c.axis.index();
        let other = 1 - axis;
        let a = mesh.node_set(&c.node_set_a)?;
        let b = mesh.node_set(&c.node_set_b)?;
        if a.len() != b.len() {
            return Err(Error::Config(format!(
                "contact sets `{}` and `{}` differ in size",
                c.node_set_a, c.node_set_b
            )));
        }
        let span = a.iter().chain(b).map(|&n| mesh.nodes[n][other]).fold(0.0f64, |m, v| m.max(v.abs()));
        let tol = 1e-9 * span.max(f64::MIN_POSITIVE);
        for &na in a {
            let ya = mesh.nodes[na][other];
            let nb = b
                .iter()
                .copied()
                .find(|&nb| (mesh.nodes[nb][other] - ya).abs() <= tol)
                .ok_or_else(|| Error::Config(format!("no contact partner for node {}", mesh.node_ids[na])))?;
            pairs.push(ContactPair { a: na, b: nb, axis, gap: c.gap, tag: c.tag.clone() });
        }
    }
    Ok(pairs)
}

/// `f = -int N_a b dA` so that the objective term `f . u` is the
/// potential of the body force.
fn body_load(fmesh: &FracturedMesh, b: [f64; 2]) -> Vec<f64> {
    let mut f = vec![0.0; fmesh.n_dof()];
    for conn in &fmesh.elements {
        let x: [[f64; 2]; 6] = std::array::from_fn(|a| fmesh.nodes[conn[a]]);
        for p in tri_rule_6() {
            let j = tri6_jacobian(&x, &tri6_grad(p.xi, p.eta));
            let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
            let n = tri6_shape(p.xi, p.eta);
            for a in 0..6 {
                for i in 0..2 {
                    f[2 * conn[a] + i] -= p.w * det * n[a] * b[i];
                }
            }
        }
    }
    f
}
