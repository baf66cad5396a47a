//! Discrete energy pieces: quadrature tables, bulk energy, mass and
//! momentum terms, interface openings and the composed barrier objectives.

mod extension;
mod objective;
pub mod opening;

use std::sync::Arc;

pub use extension::{extend_s0, extend_t, optimal_extension};
pub use objective::{contact_barrier_gradient, Evaluation, Layout, Level, Objective, PhaseKind};

use crate::element::{gauss_3, edge_shape_deriv, tri6_grad, tri6_jacobian, tri6_shape, tri_rule, tri_rule_6};
use crate::error::{Error, Result};
use crate::material::{bulk_energy_density, BulkParams, CohesiveParams};
use crate::mesh::{FracturedMesh, LinearInequalities};
use crate::sparse::{dot, Cholesky, Pattern, PatternBuilder, SymMatrix};

/// Bulk quadrature point with physical shape gradients.
#[derive(Debug, Clone)]
pub struct BulkPoint {
    pub dndx: [[f64; 2]; 6],
    /// Weight including the area Jacobian (m²).
    pub w: f64,
}

/// Interface Gauss point.
#[derive(Debug, Clone, Copy)]
pub struct InterfacePoint {
    pub eta: f64,
    /// Length-scaled weight (m).
    pub omega: f64,
}

/// Quadrature data fixed at model creation.
#[derive(Debug, Clone)]
pub struct QuadratureTable {
    pub bulk: Vec<Vec<BulkPoint>>,
    pub interface: Vec<Vec<InterfacePoint>>,
}

/// Everything that stays fixed over a run.
#[derive(Debug, Clone)]
pub struct Model {
    pub fmesh: FracturedMesh,
    /// Bulk parameters per element.
    pub bulk: Vec<BulkParams>,
    pub cohesive: CohesiveParams,
    pub quad: QuadratureTable,
    pub mass: SymMatrix,
    /// Linear load coefficient `f0` in full DOF coordinates (J/m).
    pub load: Vec<f64>,
    pub contact: LinearInequalities,
    /// Full-DOF pattern of element blocks.
    pub dof_pattern: Arc<Pattern>,
}

/// Per-step data shared by the objectives.
#[derive(Debug, Clone)]
pub struct StepContext {
    pub u_prev: Vec<f64>,
    pub v_prev: Vec<f64>,
    pub dt: f64,
    /// Damage per interface Gauss point.
    pub d: Vec<f64>,
    /// Boundary operator at the time the minimizer represents.
    pub bc: crate::mesh::BoundaryOperator,
}

/// Element DOF indices `[2n, 2n+1]` for the six nodes.
pub fn element_dofs(conn: &[usize; 6]) -> [usize; 12] {
    std::array::from_fn(|k| 2 * conn[k / 2] + k % 2)
}

/// Interface DOFs ordered `[A_start, A_end, A_mid, B_start, B_end, B_mid]`.
pub fn interface_dofs(fmesh: &FracturedMesh, i: usize) -> [usize; 12] {
    let it = &fmesh.interfaces[i];
    let nodes = [it.side_a[0], it.side_a[1], it.side_a[2], it.side_b[0], it.side_b[1], it.side_b[2]];
    std::array::from_fn(|k| 2 * nodes[k / 2] + k % 2)
}

impl Model {
    /// Builds quadrature tables and the consistent mass matrix.
    ///
    /// `bulk_order` selects the bulk rule (3 or 6 points); mass always uses
    /// the six-point rule.
    pub fn new(
        fmesh: FracturedMesh,
        bulk: Vec<BulkParams>,
        cohesive: CohesiveParams,
        contact: LinearInequalities,
        load: Option<Vec<f64>>,
        bulk_order: usize,
    ) -> Result<Self> {
        if bulk.len() != fmesh.elements.len() {
            return Err(Error::Config("one bulk parameter set per element required".into()));
        }
        let rule = tri_rule(bulk_order);
        let mut bulk_pts = Vec::with_capacity(fmesh.elements.len());
        for (e, conn) in fmesh.elements.iter().enumerate() {
            let x: [[f64; 2]; 6] = std::array::from_fn(|a| fmesh.nodes[conn[a]]);
            let mut pts = Vec::with_capacity(rule.len());
            for p in &rule {
                let dn = tri6_grad(p.xi, p.eta);
                let j = tri6_jacobian(&x, &dn);
                let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
                if !(det > 0.0) {
                    return Err(Error::InvertedElement { element: e });
                }
                let inv = [[j[1][1] / det, -j[0][1] / det], [-j[1][0] / det, j[0][0] / det]];
                let dndx = std::array::from_fn(|a| {
                    [
                        dn[a][0] * inv[0][0] + dn[a][1] * inv[1][0],
                        dn[a][0] * inv[0][1] + dn[a][1] * inv[1][1],
                    ]
                });
                pts.push(BulkPoint { dndx, w: p.w * det });
            }
            bulk_pts.push(pts);
        }
        let mut iface_pts = Vec::with_capacity(fmesh.interfaces.len());
        for it in &fmesh.interfaces {
            let xa: [[f64; 2]; 3] = std::array::from_fn(|k| fmesh.nodes[it.side_a[k]]);
            let pts = gauss_3()
                .iter()
                .map(|&(eta, w)| {
                    let dn = edge_shape_deriv(eta);
                    let t: [f64; 2] = std::array::from_fn(|i| (0..3).map(|k| dn[k] * xa[k][i]).sum());
                    InterfacePoint { eta, omega: w * (t[0] * t[0] + t[1] * t[1]).sqrt() }
                })
                .collect();
            iface_pts.push(pts);
        }

        let n_dof = fmesh.n_dof();
        let mut pb = PatternBuilder::new(n_dof);
        for conn in &fmesh.elements {
            pb.add_clique(&element_dofs(conn));
        }
        let dof_pattern = Arc::new(pb.build());
        let mass = mass_matrix(&fmesh, &bulk, &dof_pattern)?;
        let load = load.unwrap_or_else(|| vec![0.0; n_dof]);
        if load.len() != n_dof {
            return Err(Error::Config("load vector length mismatch".into()));
        }
        Ok(Model {
            fmesh,
            bulk,
            cohesive,
            quad: QuadratureTable { bulk: bulk_pts, interface: iface_pts },
            mass,
            load,
            contact,
            dof_pattern,
        })
    }

    pub fn n_dof(&self) -> usize {
        self.fmesh.n_dof()
    }

    pub fn n_points(&self) -> usize {
        self.fmesh.n_points()
    }

    /// Quadrature weights of all interface Gauss points, interface-major.
    pub fn omegas(&self) -> Vec<f64> {
        self.quad.interface.iter().flatten().map(|p| p.omega).collect()
    }

    /// Smallest admissible mean tangent norm of interface `i`.
    pub fn tangent_floor(&self, i: usize) -> f64 {
        1e-12 * self.fmesh.interfaces[i].ref_length
    }

    /// Current nodal positions of interface `i`.
    pub fn interface_positions(&self, i: usize, u: &[f64]) -> [[f64; 2]; 6] {
        let dofs = interface_dofs(&self.fmesh, i);
        std::array::from_fn(|k| {
            let n = dofs[2 * k] / 2;
            let x = self.fmesh.nodes[n];
            [x[0] + u[dofs[2 * k]], x[1] + u[dofs[2 * k + 1]]]
        })
    }

    /// Openings `(s1, s2)` at all interface Gauss points.
    pub fn opening_maps(&self, u: &[f64]) -> Result<Vec<[f64; 2]>> {
        let beta = self.cohesive.beta_mix;
        let mut out = Vec::with_capacity(self.n_points());
        for (i, pts) in self.quad.interface.iter().enumerate() {
            let x = self.interface_positions(i, u);
            for p in pts {
                out.push(
                    opening::opening_value(&x, p.eta, beta, self.tangent_floor(i))
                        .ok_or(Error::DegenerateInterface { interface: i })?,
                );
            }
        }
        Ok(out)
    }

    /// Effective openings `|(s1, s2)|` at all interface Gauss points.
    pub fn effective_openings(&self, u: &[f64]) -> Result<Vec<f64>> {
        Ok(self
            .opening_maps(u)?
            .iter()
            .map(|c| (c[0] * c[0] + c[1] * c[1]).sqrt())
            .collect())
    }

    /// Deformation gradient at a bulk point.
    fn deformation(&self, e: usize, p: &BulkPoint, u: &[f64]) -> [f64; 4] {
        let conn = &self.fmesh.elements[e];
        // differences to the first node keep rigid translations exact
        let mut grad = [0.0; 4];
        for a in 1..6 {
            for i in 0..2 {
                let ua = u[2 * conn[a] + i] - u[2 * conn[0] + i];
                grad[2 * i] += ua * p.dndx[a][0];
                grad[2 * i + 1] += ua * p.dndx[a][1];
            }
        }
        [1.0 + grad[0], grad[1], grad[2], 1.0 + grad[3]]
    }

    /// Bulk energy of one element with local gradient and Hessian.
    pub fn element_energy(&self, e: usize, u: &[f64], derivs: bool) -> Result<(f64, [f64; 12], Box<[[f64; 12]; 12]>)> {
        let mut val = 0.0;
        let mut g = [0.0; 12];
        let mut h = Box::new([[0.0; 12]; 12]);
        for p in &self.quad.bulk[e] {
            let f = self.deformation(e, p, u);
            let dens = bulk_energy_density(&f, &self.bulk[e])
                .map_err(|_| Error::InvertedElement { element: e })?;
            val += p.w * dens.psi;
            if !derivs {
                continue;
            }
            // d F_(2i+j) / d u_(a,i) = dN_a/dX_j
            for a in 0..6 {
                for i in 0..2 {
                    let r = 2 * a + i;
                    g[r] += p.w * (dens.dpsi[2 * i] * p.dndx[a][0] + dens.dpsi[2 * i + 1] * p.dndx[a][1]);
                    for b in 0..6 {
                        for k in 0..2 {
                            let mut s = 0.0;
                            for j in 0..2 {
                                for l in 0..2 {
                                    s += dens.d2psi[2 * i + j][2 * k + l] * p.dndx[a][j] * p.dndx[b][l];
                                }
                            }
                            h[r][2 * b + k] += p.w * s;
                        }
                    }
                }
            }
        }
        Ok((val, g, h))
    }

    /// `b0(u)` with gradient and Hessian on the full DOF pattern.
    pub fn bulk_energy(&self, u: &[f64]) -> Result<(f64, Vec<f64>, SymMatrix)> {
        let mut val = 0.0;
        let mut grad = vec![0.0; self.n_dof()];
        let mut hess = SymMatrix::zeros(self.dof_pattern.clone());
        for (e, conn) in self.fmesh.elements.iter().enumerate() {
            let (v, g, h) = self.element_energy(e, u, true)?;
            val += v;
            let dofs = element_dofs(conn);
            for a in 0..12 {
                grad[dofs[a]] += g[a];
                for b in 0..12 {
                    if dofs[a] <= dofs[b] {
                        hess.add(dofs[a], dofs[b], h[a][b]);
                    }
                }
            }
        }
        Ok((val, grad, hess))
    }

    /// Total mass per coordinate direction.
    pub fn total_mass(&self) -> f64 {
        let ones: Vec<f64> = (0..self.n_dof()).map(|i| if i % 2 == 0 { 1.0 } else { 0.0 }).collect();
        dot(&ones, &self.mass.mul_vec(&ones))
    }
}

/// Consistent mass matrix `int rho N_a N_b` per direction, six-point rule.
pub fn mass_matrix(fmesh: &FracturedMesh, bulk: &[BulkParams], pattern: &Arc<Pattern>) -> Result<SymMatrix> {
    let mut m = SymMatrix::zeros(pattern.clone());
    let rule = tri_rule_6();
    for (e, conn) in fmesh.elements.iter().enumerate() {
        let x: [[f64; 2]; 6] = std::array::from_fn(|a| fmesh.nodes[conn[a]]);
        let rho = bulk[e].rho;
        for p in &rule {
            let j = tri6_jacobian(&x, &tri6_grad(p.xi, p.eta));
            let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
            let n = tri6_shape(p.xi, p.eta);
            for a in 0..6 {
                for b in 0..6 {
                    let v = rho * p.w * det * n[a] * n[b];
                    for i in 0..2 {
                        let (r, c) = (2 * conn[a] + i, 2 * conn[b] + i);
                        if r <= c {
                            m.add(r, c, v);
                        }
                    }
                }
            }
        }
    }
    let chol = Cholesky::new(pattern.clone())?;
    if chol.factor_matrix(&m).is_none() {
        return Err(Error::Factorization("mass matrix is not positive definite".into()));
    }
    Ok(m)
}

/// `m0(u) = (2/dt^2) w^T M w` with `w = u - u_prev - v_prev dt/2`;
/// returns value and gradient (the Hessian is `(4/dt^2) M`).
pub fn momentum_energy(u: &[f64], u_prev: &[f64], v_prev: &[f64], dt: f64, mass: &SymMatrix) -> (f64, Vec<f64>) {
    let w: Vec<f64> = (0..u.len()).map(|i| u[i] - u_prev[i] - 0.5 * dt * v_prev[i]).collect();
    let mw = mass.mul_vec(&w);
    let s = 2.0 / (dt * dt);
    (s * dot(&w, &mw), mw.iter().map(|v| 2.0 * s * v).collect())
}
