//! Mesh ingestion, node duplication with interface insertion, boundary
//! selection operators and contact inequalities.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use crate::element::{tri6_grad, tri6_jacobian, tri_rule_6, TRI6_EDGES};
use crate::error::{Error, Result};

/// Input mesh of six-node triangles.
#[derive(Debug, Clone, Default)]
pub struct Mesh {
    pub node_ids: Vec<i64>,
    pub nodes: Vec<[f64; 2]>,
    pub element_ids: Vec<i64>,
    pub elements: Vec<[usize; 6]>,
    /// Named node sets, stored as node indices.
    pub node_sets: BTreeMap<String, Vec<usize>>,
    /// Named element sets, stored as element indices.
    pub element_sets: BTreeMap<String, Vec<usize>>,
}

impl Mesh {
    /// Builds a mesh with sequential ids and validates it.
    pub fn new(nodes: Vec<[f64; 2]>, elements: Vec<[usize; 6]>) -> Result<Self> {
        let mesh = Mesh {
            node_ids: (1..=nodes.len() as i64).collect(),
            element_ids: (1..=elements.len() as i64).collect(),
            nodes,
            elements,
            ..Default::default()
        };
        mesh.validate()?;
        Ok(mesh)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut tokens = Tokens::new(text);
        tokens.expect_word("nodes")?;
        let n = tokens.usize()?;
        tokens.expect_word("elements")?;
        let m = tokens.usize()?;

        let mut mesh = Mesh::default();
        let mut node_index = HashMap::new();
        for _ in 0..n {
            let (id, line) = tokens.int()?;
            let x = tokens.float()?;
            let y = tokens.float()?;
            if node_index.insert(id, mesh.nodes.len()).is_some() {
                return Err(Error::Parse { line, msg: format!("duplicate node id {id}") });
            }
            mesh.node_ids.push(id);
            mesh.nodes.push([x, y]);
        }
        let mut elem_index = HashMap::new();
        for _ in 0..m {
            let (id, line) = tokens.int()?;
            let mut conn = [0usize; 6];
            for c in conn.iter_mut() {
                let (nid, line) = tokens.int()?;
                *c = *node_index.get(&nid).ok_or_else(|| Error::Parse {
                    line,
                    msg: format!("element {id} references unknown node {nid}"),
                })?;
            }
            if elem_index.insert(id, mesh.elements.len()).is_some() {
                return Err(Error::Parse { line, msg: format!("duplicate element id {id}") });
            }
            mesh.element_ids.push(id);
            mesh.elements.push(conn);
        }
        while let Some((word, line)) = tokens.next() {
            let is_node_set = match word {
                "nodeset" => true,
                "elemset" => false,
                other => {
                    return Err(Error::Parse { line, msg: format!("unexpected token `{other}`") })
                }
            };
            let (name, _) = tokens
                .next()
                .ok_or(Error::Parse { line, msg: "missing set name".into() })?;
            let name = name.to_string();
            let k = tokens.usize()?;
            let mut ids = Vec::with_capacity(k);
            for _ in 0..k {
                let (id, line) = tokens.int()?;
                let table = if is_node_set { &node_index } else { &elem_index };
                ids.push(*table.get(&id).ok_or_else(|| Error::Parse {
                    line,
                    msg: format!("set `{name}` references unknown id {id}"),
                })?);
            }
            if is_node_set {
                mesh.node_sets.insert(name, ids);
            } else {
                mesh.element_sets.insert(name, ids);
            }
        }
        mesh.validate()?;
        Ok(mesh)
    }

    /// Checks positive orientation and edge conformity.
    pub fn validate(&self) -> Result<()> {
        let rule = tri_rule_6();
        for (e, conn) in self.elements.iter().enumerate() {
            let x: [[f64; 2]; 6] = std::array::from_fn(|a| self.nodes[conn[a]]);
            let mut pts: Vec<(f64, f64)> = rule.iter().map(|p| (p.xi, p.eta)).collect();
            pts.extend([(0.0, 0.0), (1.0, 0.0), (0.0, 1.0), (1.0 / 3.0, 1.0 / 3.0)]);
            for (xi, eta) in pts {
                let j = tri6_jacobian(&x, &tri6_grad(xi, eta));
                if !(j[0][0] * j[1][1] - j[0][1] * j[1][0] > 0.0) {
                    return Err(Error::InvertedElement { element: e });
                }
            }
        }
        let mut edges: HashMap<(usize, usize), Vec<(usize, usize)>> = HashMap::new();
        for (e, conn) in self.elements.iter().enumerate() {
            for (l, ed) in TRI6_EDGES.iter().enumerate() {
                let (p, q) = (conn[ed[0]], conn[ed[1]]);
                edges.entry((p.min(q), p.max(q))).or_default().push((e, l));
            }
        }
        for (key, users) in &edges {
            if users.len() > 2 {
                return Err(Error::InvalidMesh(format!(
                    "edge {key:?} is shared by {} elements",
                    users.len()
                )));
            }
            if users.len() == 2 {
                let mid = |(e, l): (usize, usize)| self.elements[e][TRI6_EDGES[l][2]];
                if mid(users[0]) != mid(users[1]) {
                    return Err(Error::InvalidMesh(format!(
                        "elements {} and {} disagree on a midside node",
                        users[0].0, users[1].0
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn node_set(&self, name: &str) -> Result<&[usize]> {
        self.node_sets
            .get(name)
            .map(|v| v.as_slice())
            .ok_or_else(|| Error::UnknownNodeSet(name.to_string()))
    }

    pub fn element_set(&self, name: &str) -> Result<&[usize]> {
        self.element_sets
            .get(name)
            .map(|v| v.as_slice())
            .ok_or_else(|| Error::UnknownElementSet(name.to_string()))
    }

    pub fn node_by_id(&self, id: i64) -> Option<usize> {
        self.node_ids.iter().position(|&v| v == id)
    }

    pub fn area(&self, e: usize) -> f64 {
        let c = self.elements[e];
        let (a, b, d) = (self.nodes[c[0]], self.nodes[c[1]], self.nodes[c[2]]);
        0.5 * ((b[0] - a[0]) * (d[1] - a[1]) - (d[0] - a[0]) * (b[1] - a[1]))
    }
}

pub fn load_mesh(path: &Path) -> Result<Mesh> {
    let text = std::fs::read_to_string(path)?;
    Mesh::parse(&text)
}

struct Tokens<'a> {
    items: Vec<(&'a str, usize)>,
    pos: usize,
}

impl<'a> Tokens<'a> {
    fn new(text: &'a str) -> Self {
        let items = text
            .lines()
            .enumerate()
            .flat_map(|(i, l)| {
                let l = l.split('#').next().unwrap_or("");
                l.split_whitespace().map(move |t| (t, i + 1))
            })
            .collect();
        Tokens { items, pos: 0 }
    }

    fn next(&mut self) -> Option<(&'a str, usize)> {
        let t = self.items.get(self.pos).copied();
        self.pos += 1;
        t
    }

    fn last_line(&self) -> usize {
        self.items.last().map_or(1, |t| t.1)
    }

    fn take(&mut self, what: &str) -> Result<(&'a str, usize)> {
        let line = self.last_line();
        self.next().ok_or(Error::Parse { line, msg: format!("unexpected end of file, expected {what}") })
    }

    fn expect_word(&mut self, w: &str) -> Result<()> {
        let (t, line) = self.take(w)?;
        if t != w {
            return Err(Error::Parse { line, msg: format!("expected `{w}`, found `{t}`") });
        }
        Ok(())
    }

    fn int(&mut self) -> Result<(i64, usize)> {
        let (t, line) = self.take("an integer")?;
        t.parse()
            .map(|v| (v, line))
            .map_err(|_| Error::Parse { line, msg: format!("expected an integer, found `{t}`") })
    }

    fn usize(&mut self) -> Result<usize> {
        let (t, line) = self.take("a count")?;
        t.parse()
            .map_err(|_| Error::Parse { line, msg: format!("expected a count, found `{t}`") })
    }

    fn float(&mut self) -> Result<f64> {
        let (t, line) = self.take("a number")?;
        t.parse()
            .map_err(|_| Error::Parse { line, msg: format!("expected a number, found `{t}`") })
    }
}

/// Interface element joining matching edges of two bulk elements.
///
/// Node triples are ordered (start, end, middle) along the edge as traversed
/// by element A; `side_b[k]` coincides with `side_a[k]` in the reference
/// configuration. The normal points from A toward B.
#[derive(Debug, Clone, PartialEq)]
pub struct Interface {
    pub elements: [usize; 2],
    pub side_a: [usize; 3],
    pub side_b: [usize; 3],
    pub ref_length: f64,
}

/// Mesh with per-element node copies and inserted interfaces.
#[derive(Debug, Clone)]
pub struct FracturedMesh {
    pub base: Mesh,
    pub nodes: Vec<[f64; 2]>,
    /// Base-mesh node of every node copy.
    pub parent: Vec<usize>,
    pub elements: Vec<[usize; 6]>,
    pub interfaces: Vec<Interface>,
    /// Gauss points per interface.
    pub n_g: usize,
}

impl FracturedMesh {
    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_dof(&self) -> usize {
        2 * self.nodes.len()
    }

    pub fn n_interfaces(&self) -> usize {
        self.interfaces.len()
    }

    /// Total interface Gauss points.
    pub fn n_points(&self) -> usize {
        self.interfaces.len() * self.n_g
    }

    /// Copies of the listed base nodes, optionally restricted to elements.
    pub fn copies(&self, base_nodes: &[usize], elements: Option<&[usize]>) -> Vec<usize> {
        let wanted: std::collections::HashSet<usize> = base_nodes.iter().copied().collect();
        let mut allowed = vec![elements.is_none(); self.nodes.len()];
        if let Some(els) = elements {
            for &e in els {
                for &n in &self.elements[e] {
                    allowed[n] = true;
                }
            }
        }
        (0..self.nodes.len())
            .filter(|&n| allowed[n] && wanted.contains(&self.parent[n]))
            .collect()
    }
}

/// Duplicates nodes per element and inserts an interface on every interior edge.
pub fn insert_interfaces(mesh: &Mesh) -> FracturedMesh {
    insert_interfaces_where(mesh, |_, _| true)
}

/// As [`insert_interfaces`], but an interior edge between elements `a` and
/// `b` is cut only when `cut(a, b)`; uncut edges keep shared nodes.
pub fn insert_interfaces_where(mesh: &Mesh, cut: impl Fn(usize, usize) -> bool) -> FracturedMesh {
    let ne = mesh.elements.len();
    let mut edges: BTreeMap<(usize, usize), Vec<(usize, usize)>> = BTreeMap::new();
    for (e, conn) in mesh.elements.iter().enumerate() {
        for (l, ed) in TRI6_EDGES.iter().enumerate() {
            let (p, q) = (conn[ed[0]], conn[ed[1]]);
            edges.entry((p.min(q), p.max(q))).or_default().push((e, l));
        }
    }

    let mut uf: Vec<usize> = (0..6 * ne).collect();
    fn find(uf: &mut [usize], mut i: usize) -> usize {
        while uf[i] != i {
            uf[i] = uf[uf[i]];
            i = uf[i];
        }
        i
    }
    let copy_in = |e: usize, base: usize| -> usize {
        let a = mesh.elements[e].iter().position(|&n| n == base).unwrap();
        6 * e + a
    };

    let mut cuts = Vec::new();
    for users in edges.values() {
        if users.len() != 2 {
            continue;
        }
        let (ea, la) = users[0];
        let (eb, _) = users[1];
        let ed = TRI6_EDGES[la];
        let base = [
            mesh.elements[ea][ed[0]],
            mesh.elements[ea][ed[1]],
            mesh.elements[ea][ed[2]],
        ];
        if cut(ea, eb) {
            cuts.push((ea, eb, base));
        } else {
            for &b in &base {
                let (i, j) = (find(&mut uf, copy_in(ea, b)), find(&mut uf, copy_in(eb, b)));
                uf[i.max(j)] = i.min(j);
            }
        }
    }

    let mut index = vec![usize::MAX; 6 * ne];
    let mut nodes = Vec::new();
    let mut parent = Vec::new();
    for k in 0..6 * ne {
        let r = find(&mut uf, k);
        if index[r] == usize::MAX {
            index[r] = nodes.len();
            let b = mesh.elements[k / 6][k % 6];
            nodes.push(mesh.nodes[b]);
            parent.push(b);
        }
        index[k] = index[r];
    }
    let elements = (0..ne)
        .map(|e| std::array::from_fn(|a| index[6 * e + a]))
        .collect();
    let interfaces = cuts
        .into_iter()
        .map(|(ea, eb, base)| {
            let (p, q) = (mesh.nodes[base[0]], mesh.nodes[base[1]]);
            Interface {
                elements: [ea, eb],
                side_a: base.map(|b| index[copy_in(ea, b)]),
                side_b: base.map(|b| index[copy_in(eb, b)]),
                ref_length: ((q[0] - p[0]).powi(2) + (q[1] - p[1]).powi(2)).sqrt(),
            }
        })
        .collect();
    FracturedMesh {
        base: mesh.clone(),
        nodes,
        parent,
        elements,
        interfaces,
        n_g: 3,
    }
}

/// One boundary-condition block.
#[derive(Debug, Clone, PartialEq)]
pub struct BcEntry {
    pub node_set: String,
    /// Restricts the copies to those belonging to these elements.
    pub element_set: Option<String>,
    /// Constrained components (0 = x, 1 = y).
    pub components: Vec<usize>,
    /// Prescribed rate per component (m/s); zero means fixed.
    pub velocity: [f64; 2],
}

/// Selection form `u = R x + u_BC` of the boundary conditions.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryOperator {
    n_dof: usize,
    free: Vec<usize>,
    constrained: Vec<usize>,
    free_index: Vec<Option<usize>>,
    rate: Vec<f64>,
    u_bc: Vec<f64>,
}

/// Builds the selection operator with `u_BC = tau dt v` on prescribed DOFs.
pub fn build_bc(fmesh: &FracturedMesh, entries: &[BcEntry], tau: usize, dt: f64) -> Result<BoundaryOperator> {
    let n_dof = fmesh.n_dof();
    let mut fixed = vec![false; n_dof];
    let mut rate = vec![0.0; n_dof];
    for entry in entries {
        let base = fmesh.base.node_set(&entry.node_set)?;
        let els = match &entry.element_set {
            Some(name) => Some(fmesh.base.element_set(name)?),
            None => None,
        };
        for n in fmesh.copies(base, els) {
            for &c in &entry.components {
                if c > 1 {
                    return Err(Error::Config(format!("invalid component {c}")));
                }
                fixed[2 * n + c] = true;
                rate[2 * n + c] = entry.velocity[c];
            }
        }
    }
    let mut op = BoundaryOperator::from_mask(&fixed, rate);
    op.set_time(tau as f64 * dt);
    Ok(op)
}

impl BoundaryOperator {
    /// Operator with the given constrained mask and rates at time zero.
    pub fn from_mask(fixed: &[bool], rate: Vec<f64>) -> Self {
        let n_dof = fixed.len();
        let mut free = Vec::new();
        let mut constrained = Vec::new();
        let mut free_index = vec![None; n_dof];
        for (i, &f) in fixed.iter().enumerate() {
            if f {
                constrained.push(i);
            } else {
                free_index[i] = Some(free.len());
                free.push(i);
            }
        }
        BoundaryOperator {
            n_dof,
            free,
            constrained,
            free_index,
            rate,
            u_bc: vec![0.0; n_dof],
        }
    }

    pub fn unconstrained(n_dof: usize) -> Self {
        BoundaryOperator::from_mask(&vec![false; n_dof], vec![0.0; n_dof])
    }

    /// Sets `u_BC = time * rate` on constrained DOFs.
    pub fn set_time(&mut self, time: f64) {
        self.u_bc.iter_mut().for_each(|v| *v = 0.0);
        for &i in &self.constrained {
            self.u_bc[i] = time * self.rate[i];
        }
    }

    pub fn at_time(&self, time: f64) -> Self {
        let mut op = self.clone();
        op.set_time(time);
        op
    }

    pub fn n_dof(&self) -> usize {
        self.n_dof
    }

    pub fn n_free(&self) -> usize {
        self.free.len()
    }

    pub fn free(&self) -> &[usize] {
        &self.free
    }

    pub fn constrained(&self) -> &[usize] {
        &self.constrained
    }

    pub fn free_index(&self, dof: usize) -> Option<usize> {
        self.free_index[dof]
    }

    pub fn u_bc(&self) -> &[f64] {
        &self.u_bc
    }

    pub fn rate(&self) -> &[f64] {
        &self.rate
    }

    /// `R x + u_BC`.
    pub fn expand(&self, x: &[f64]) -> Vec<f64> {
        let mut u = self.u_bc.clone();
        for (k, &i) in self.free.iter().enumerate() {
            u[i] = x[k];
        }
        u
    }

    /// `R^T (u - u_BC)`.
    pub fn project(&self, u: &[f64]) -> Vec<f64> {
        self.free.iter().map(|&i| u[i] - self.u_bc[i]).collect()
    }

    /// Right-hand side `b` of `B u = b`.
    pub fn b(&self) -> Vec<f64> {
        self.constrained.iter().map(|&i| self.u_bc[i]).collect()
    }

    /// `B u`.
    pub fn apply_b(&self, u: &[f64]) -> Vec<f64> {
        self.constrained.iter().map(|&i| u[i]).collect()
    }
}

/// A matched node pair `X_b + u_b - (X_a + u_a) >= gap` along `axis`.
#[derive(Debug, Clone, PartialEq)]
pub struct ContactPair {
    /// Base-mesh node on side 1.
    pub a: usize,
    /// Base-mesh node on side 2.
    pub b: usize,
    pub axis: usize,
    pub gap: f64,
    pub tag: String,
}

/// Row `u[dof_b] - u[dof_a] >= a0` in full displacement coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct ContactRow {
    pub dof_a: usize,
    pub dof_b: usize,
    pub a0: f64,
    pub tag: String,
}

/// Linear inequalities `E0 u >= a0`; in free coordinates `E x >= a` with
/// `E = E0 R` and `a = a0 - E0 u_BC`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LinearInequalities {
    pub rows: Vec<ContactRow>,
}

impl LinearInequalities {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// `E0 u - a0`.
    pub fn slack(&self, u: &[f64]) -> Vec<f64> {
        self.rows.iter().map(|r| u[r.dof_b] - u[r.dof_a] - r.a0).collect()
    }

    /// Sparse rows of `E` (as `(free index, coefficient)`) and the vector `a`.
    pub fn free_form(&self, bc: &BoundaryOperator) -> (Vec<Vec<(usize, f64)>>, Vec<f64>) {
        let ub = bc.u_bc();
        let mut e = Vec::with_capacity(self.rows.len());
        let mut a = Vec::with_capacity(self.rows.len());
        for r in &self.rows {
            let mut row = Vec::new();
            if let Some(k) = bc.free_index(r.dof_a) {
                row.push((k, -1.0));
            }
            if let Some(k) = bc.free_index(r.dof_b) {
                row.push((k, 1.0));
            }
            e.push(row);
            a.push(r.a0 - (ub[r.dof_b] - ub[r.dof_a]));
        }
        (e, a)
    }

    pub fn tags(&self) -> Vec<&str> {
        let mut t: Vec<&str> = self.rows.iter().map(|r| r.tag.as_str()).collect();
        t.dedup();
        t
    }
}

/// One row per combination of node copies of each pair.
pub fn build_contact(fmesh: &FracturedMesh, pairs: &[ContactPair]) -> Result<LinearInequalities> {
    let mut rows = Vec::new();
    for p in pairs {
        let shared = fmesh
            .base
            .elements
            .iter()
            .any(|c| c.contains(&p.a) && c.contains(&p.b));
        if p.a == p.b || shared || p.axis > 1 {
            return Err(Error::ContactSameSide { a: p.a, b: p.b });
        }
        let (xa, xb) = (fmesh.base.nodes[p.a][p.axis], fmesh.base.nodes[p.b][p.axis]);
        for ca in fmesh.copies(&[p.a], None) {
            for cb in fmesh.copies(&[p.b], None) {
                rows.push(ContactRow {
                    dof_a: 2 * ca + p.axis,
                    dof_b: 2 * cb + p.axis,
                    a0: p.gap - (xb - xa),
                    tag: p.tag.clone(),
                });
            }
        }
    }
    Ok(LinearInequalities { rows })
}
