//! Energy bookkeeping at half-steps: kinetic, strain, recoverable and
//! dissipated cohesive energy, boundary work and contact work.

use serde::Serialize;

use crate::assembly::Model;
use crate::error::Result;
use crate::material::{cohesive_g, CohesiveParams};
use crate::sparse::{dot, SymMatrix};
use crate::stepper::StepRecord;

/// `v_mid^T M v_mid / 2` with `v_mid = (v_a + v_b)/2`.
pub fn kinetic_energy(v_a: &[f64], v_b: &[f64], mass: &SymMatrix) -> f64 {
    let v: Vec<f64> = v_a.iter().zip(v_b).map(|(a, b)| 0.5 * (a + b)).collect();
    0.5 * dot(&v, &mass.mul_vec(&v))
}

/// Recoverable `omega g(delta; d)` and dissipated `omega sigma_c d^2 / (2 delta_u)`
/// cohesive energy summed over Gauss points.
pub fn cohesive_split(delta: &[f64], d: &[f64], p: &CohesiveParams, omega: &[f64]) -> (f64, f64) {
    let mut rec = 0.0;
    let mut dis = 0.0;
    for i in 0..delta.len() {
        rec += omega[i] * cohesive_g(delta[i], d[i], p).0;
        dis += omega[i] * p.sigma_c * d[i] * d[i] / (2.0 * p.delta_u);
    }
    (rec, dis)
}

/// Work of time-averaged forces over a displacement increment, restricted to `dofs`.
pub fn average_force_work(f_a: &[f64], f_b: &[f64], u_a: &[f64], u_b: &[f64], dofs: &[usize]) -> f64 {
    dofs.iter().map(|&i| 0.5 * (f_a[i] + f_b[i]) * (u_b[i] - u_a[i])).sum()
}

/// Boundary work increment on the constrained DOFs.
pub fn boundary_work(f_a: &[f64], f_b: &[f64], u_a: &[f64], u_b: &[f64], constrained: &[usize]) -> f64 {
    average_force_work(f_a, f_b, u_a, u_b, constrained)
}

/// Work increment of contact-barrier forces over all DOFs.
pub fn contact_work(f_a: &[f64], f_b: &[f64], u_a: &[f64], u_b: &[f64]) -> f64 {
    let all: Vec<usize> = (0..f_a.len()).collect();
    average_force_work(f_a, f_b, u_a, u_b, &all)
}

/// One half-step row of the ledger.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LedgerRow {
    pub step: usize,
    /// Midpoint time (s).
    pub time: f64,
    pub ke: f64,
    pub se: f64,
    pub fe_rec: f64,
    pub fe_dis: f64,
    pub w_bc: f64,
    pub w_contact: f64,
    pub w_ext: f64,
    pub residual: f64,
}

impl LedgerRow {
    pub fn work(&self) -> f64 {
        self.w_bc + self.w_contact + self.w_ext
    }
}

/// Energy series over a run.
#[derive(Debug, Clone, Default)]
pub struct EnergyLedger {
    pub rows: Vec<LedgerRow>,
}

impl EnergyLedger {
    /// Builds the ledger from a reference record followed by the step
    /// records; the reference itself gets no row.
    ///
    /// `constrained` lists the displacement-controlled DOFs; `scale`
    /// multiplies every energy (e.g. an out-of-plane thickness).
    pub fn build(model: &Model, records: &[StepRecord], constrained: &[usize], dt: f64, scale: f64) -> Result<Self> {
        let omega = model.omegas();
        let p = &model.cohesive;
        let mut rows = Vec::with_capacity(records.len());
        let (mut w_bc, mut w_c, mut w_e) = (0.0, 0.0, 0.0);
        let mut base: Option<(f64, f64)> = None;
        for (k, r) in records.iter().enumerate() {
            if k > 0 {
                let q = &records[k - 1];
                w_bc += boundary_work(&q.force, &r.force, &q.u_mid, &r.u_mid, constrained);
                w_c += contact_work(&q.contact_force, &r.contact_force, &q.u_mid, &r.u_mid);
                w_e -= dot(&model.load, &r.u_mid) - dot(&model.load, &q.u_mid);
            }
            let ke = kinetic_energy(&r.v_prev, &r.v, &model.mass);
            let se = model.bulk_energy(&r.u_mid)?.0;
            let (rec, dis) = cohesive_split(&r.effective_openings(), &r.d_prev, p, &omega);
            let (ke0, se0) = *base.get_or_insert((ke, se));
            let residual = (w_bc + w_c + w_e) - (ke - ke0 + se - se0 + rec + dis);
            if k == 0 {
                continue;
            }
            let time = (r.tau as f64 - 0.5) * dt;
            rows.push(LedgerRow {
                step: r.tau,
                time,
                ke: scale * ke,
                se: scale * se,
                fe_rec: scale * rec,
                fe_dis: scale * dis,
                w_bc: scale * w_bc,
                w_contact: scale * w_c,
                w_ext: scale * w_e,
                residual: scale * residual,
            });
        }
        Ok(EnergyLedger { rows })
    }

    /// Largest absolute cumulative work.
    pub fn peak_work(&self) -> f64 {
        self.rows.iter().map(|r| r.work().abs()).fold(0.0, f64::max)
    }
}

/// Residual series in absolute terms and relative to the peak work.
#[derive(Debug, Clone)]
pub struct BalanceReport {
    pub residual: Vec<f64>,
    pub relative: Vec<f64>,
    pub peak_work: f64,
    pub max_relative: f64,
}

pub fn balance_report(ledger: &EnergyLedger) -> BalanceReport {
    let peak = ledger.peak_work();
    let residual: Vec<f64> = ledger.rows.iter().map(|r| r.residual).collect();
    let relative: Vec<f64> = residual
        .iter()
        .map(|r| if peak > 0.0 { r.abs() / peak } else { r.abs() })
        .collect();
    let max_relative = relative.iter().cloned().fold(0.0, f64::max);
    BalanceReport { residual, relative, peak_work: peak, max_relative }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pmma() -> CohesiveParams {
        CohesiveParams::new(105e6, 352.0, 1.0).unwrap()
    }

    #[test]
    fn kinetic_examples() {
        let m = SymMatrix::from_dense(&[vec![2.0]]);
        assert_eq!(kinetic_energy(&[0.0], &[0.0], &m), 0.0);
        assert!((kinetic_energy(&[3.0], &[3.0], &m) - 9.0).abs() < 1e-15);
    }

    #[test]
    fn undamaged_is_recoverable() {
        let p = pmma();
        let (rec, dis) = cohesive_split(&[1e-6], &[0.0], &p, &[0.5]);
        assert_eq!(dis, 0.0);
        assert_eq!(rec, 0.5 * cohesive_g(1e-6, 0.0, &p).0);
    }

    #[test]
    fn fully_failed_dissipates_gc() {
        let p = pmma();
        let (rec, dis) = cohesive_split(&[2.0 * p.delta_u], &[p.delta_u], &p, &[1.0]);
        assert!(rec.abs() <= 1e-10 * p.g_c);
        assert!((dis - p.g_c).abs() <= 1e-10 * p.g_c);
    }

    /// Areas under the traction curves by the trapezoid rule on a fine
    /// grid: the dissipated part is the area between the undamaged
    /// envelope and the damaged branch up to `d`; the recoverable part
    /// is the area under the damaged branch up to `delta`.
    #[test]
    fn split_matches_trapezoid_areas() {
        use rand::{Rng, SeedableRng};
        let p = pmma();
        let mut rng = rand::rngs::StdRng::seed_from_u64(1);
        let area = |f: &dyn Fn(f64) -> f64, a: f64, b: f64| {
            let n = 2000;
            let h = (b - a) / n as f64;
            (0..n).map(|i| 0.5 * h * (f(a + i as f64 * h) + f(a + (i + 1) as f64 * h))).sum::<f64>()
        };
        for _ in 0..100 {
            let d = rng.gen_range(0.0..p.delta_u);
            let delta = rng.gen_range(0.0..1.5 * p.delta_u);
            let (rec, dis) = cohesive_split(&[delta], &[d], &p, &[1.0]);
            let damaged = |x: f64| cohesive_g(x, d, &p).1;
            let envelope = |x: f64| cohesive_g(x, 0.0, &p).1;
            // integrate piecewise so the kinks land on grid ends
            let up_to = |f: &dyn Fn(f64) -> f64, x: f64| {
                let k1 = d.min(x);
                let k2 = p.delta_u.min(x);
                area(f, 0.0, k1) + area(f, k1, k2) + area(f, k2, x.max(k2))
            };
            let rec_oracle = up_to(&damaged, delta);
            let dis_oracle = area(&envelope, 0.0, d) - area(&damaged, 0.0, d);
            let scale = p.g_c;
            assert!((rec - rec_oracle).abs() <= 1e-10 * scale, "rec {rec} vs {rec_oracle}");
            assert!((dis - dis_oracle).abs() <= 1e-10 * scale, "dis {dis} vs {dis_oracle}");
        }
    }

    #[test]
    fn boundary_work_examples() {
        assert_eq!(boundary_work(&[5.0], &[5.0], &[1.0], &[1.0], &[0]), 0.0);
        assert!((boundary_work(&[5.0], &[5.0], &[0.0], &[0.2], &[0]) - 1.0).abs() < 1e-15);
        assert_eq!(boundary_work(&[5.0], &[5.0], &[0.0], &[0.2], &[]), 0.0);
    }

    #[test]
    fn rigid_transmission_work() {
        // upstream DOF 0 pushes downstream DOF 1 with force F; both move s
        let (f, s) = (3.0, 0.4);
        let force = [-f, f];
        let w_down = average_force_work(&force, &force, &[0.0, 0.0], &[s, s], &[1]);
        assert!((w_down - f * s).abs() < 1e-15);
        assert!(contact_work(&force, &force, &[0.0, 0.0], &[s, s]).abs() < 1e-15);
    }
}
