//! Writers for energy ledgers, damage maps, VTK snapshots, load-deflection
//! curves, the run manifest and gnuplot scripts.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::assembly::Model;
use crate::config::{MonitorConfig, RunConfig};
use crate::energy::EnergyLedger;
use crate::error::Result;
use crate::stepper::StepRecord;

fn num(v: f64) -> String {
    format!("{v:.12e}")
}

pub fn energies_csv(ledger: &EnergyLedger) -> String {
    let mut s = String::from("step,time_s,KE_J,SE_J,FE_rec_J,FE_dis_J,W_bc_J,W_contact_J,W_ext_J,residual_J\n");
    for r in &ledger.rows {
        let vals = [r.time, r.ke, r.se, r.fe_rec, r.fe_dis, r.w_bc, r.w_contact, r.w_ext, r.residual];
        let _ = writeln!(s, "{},{}", r.step, vals.map(num).join(","));
    }
    s
}

/// Per Gauss point: interface id, gauss index, damage after the step,
/// effective opening and the two opening components at the midpoint.
pub fn damage_csv(model: &Model, rec: &StepRecord) -> String {
    let ng = model.fmesh.n_g;
    let mut s = String::from("interface,gauss,d,delta,s1,s2\n");
    for (k, c) in rec.openings.iter().enumerate() {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{}",
            k / ng,
            k % ng,
            num(rec.d[k]),
            num(c[0].hypot(c[1])),
            num(c[0]),
            num(c[1])
        );
    }
    s
}

/// Legacy ASCII VTK of the fractured mesh with displacement, velocity and
/// per-element maximum damage of adjacent interfaces.
pub fn snapshot_vtk(model: &Model, rec: &StepRecord) -> String {
    let fm = &model.fmesh;
    let mut s = String::new();
    let _ = writeln!(s, "# vtk DataFile Version 3.0\nstep {} t = {}\nASCII\nDATASET UNSTRUCTURED_GRID", rec.tau, num(rec.time));
    let _ = writeln!(s, "POINTS {} double", fm.n_nodes());
    for x in &fm.nodes {
        let _ = writeln!(s, "{} {} 0", num(x[0]), num(x[1]));
    }
    let ne = fm.elements.len();
    let _ = writeln!(s, "CELLS {} {}", ne, 7 * ne);
    for c in &fm.elements {
        let _ = writeln!(s, "6 {} {} {} {} {} {}", c[0], c[1], c[2], c[3], c[4], c[5]);
    }
    let _ = writeln!(s, "CELL_TYPES {ne}");
    for _ in 0..ne {
        s.push_str("22\n");
    }
    let _ = writeln!(s, "POINT_DATA {}", fm.n_nodes());
    for (name, v) in [("displacement", &rec.u), ("velocity", &rec.v)] {
        let _ = writeln!(s, "VECTORS {name} double");
        for n in 0..fm.n_nodes() {
            let _ = writeln!(s, "{} {} 0", num(v[2 * n]), num(v[2 * n + 1]));
        }
    }
    let mut dmax = vec![0.0f64; ne];
    for (i, it) in fm.interfaces.iter().enumerate() {
        for g in 0..fm.n_g {
            let d = rec.d[i * fm.n_g + g] / model.cohesive.delta_u;
            for &e in &it.elements {
                dmax[e] = dmax[e].max(d);
            }
        }
    }
    let _ = writeln!(s, "CELL_DATA {ne}\nSCALARS damage_ratio double 1\nLOOKUP_TABLE default");
    for d in dmax {
        let _ = writeln!(s, "{}", num(d));
    }
    s
}

/// Monitored deflection (mean displacement) and reaction (summed force).
pub fn monitor_point(model: &Model, m: &MonitorConfig, rec: &StepRecord) -> Result<(f64, f64)> {
    let base = &model.fmesh.base;
    let rc = m.reaction_component.index();
    let dc = m.deflection_component.index();
    let owner = m.element_set.as_deref().map(|s| base.element_set(s)).transpose()?;
    let rnodes = model.fmesh.copies(base.node_set(&m.reaction_set)?, owner);
    let dnodes = model.fmesh.copies(base.node_set(&m.deflection_set)?, owner);
    let reaction: f64 = rnodes.iter().map(|&n| rec.force[2 * n + rc]).sum();
    let deflection = dnodes.iter().map(|&n| rec.u_mid[2 * n + dc]).sum::<f64>() / dnodes.len().max(1) as f64;
    Ok((deflection, reaction))
}

pub fn load_deflection_csv(model: &Model, m: &MonitorConfig, records: &[StepRecord]) -> Result<String> {
    let mut s = String::from("step,time_s,deflection,reaction\n");
    for r in records {
        let (d, f) = monitor_point(model, m, r)?;
        let _ = writeln!(s, "{},{},{},{}", r.tau, num(r.time), num(d), num(f));
    }
    Ok(s)
}

const ENERGY_PLOT: &str = "set datafile separator ','
set key autotitle columnhead
set xlabel 'time (s)'
set ylabel 'energy (J)'
set terminal pngcairo size 900,600
set output 'energies.png'
plot 'energies.csv' using 2:3 with lines title 'kinetic', \\
     '' using 2:4 with lines title 'strain', \\
     '' using 2:5 with lines title 'cohesive recoverable', \\
     '' using 2:($5+$6) with lines title 'cohesive total', \\
     '' using 2:($7+$8+$9) with lines title 'work', \\
     '' using 2:($3+$4+$5+$6) with lines title 'stored + dissipated'
";

const LOAD_PLOT: &str = "set datafile separator ','
set key autotitle columnhead
set xlabel 'deflection'
set ylabel 'reaction'
set terminal pngcairo size 900,600
set output 'load_deflection.png'
plot 'load_deflection.csv' using 3:4 with linespoints title 'reaction'
";

/// Output directory writer.
pub struct OutputWriter {
    pub dir: PathBuf,
}

impl OutputWriter {
    pub fn create(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(OutputWriter { dir: dir.to_path_buf() })
    }

    fn put(&self, name: &str, text: &str) -> Result<PathBuf> {
        let p = self.dir.join(name);
        fs::write(&p, text)?;
        Ok(p)
    }

    pub fn manifest(&self, cfg: &RunConfig) -> Result<PathBuf> {
        self.put("run_manifest.toml", &cfg.to_toml())
    }

    pub fn step(&self, model: &Model, rec: &StepRecord) -> Result<()> {
        self.put(&format!("damage_{:05}.csv", rec.tau), &damage_csv(model, rec))?;
        self.put(&format!("snapshot_{:05}.vtk", rec.tau), &snapshot_vtk(model, rec))?;
        Ok(())
    }

    pub fn energies(&self, ledger: &EnergyLedger) -> Result<()> {
        self.put("energies.csv", &energies_csv(ledger))?;
        self.put("energies.gp", ENERGY_PLOT)?;
        Ok(())
    }

    pub fn load_deflection(&self, model: &Model, m: &MonitorConfig, records: &[StepRecord]) -> Result<()> {
        self.put("load_deflection.csv", &load_deflection_csv(model, m, records)?)?;
        self.put("load_deflection.gp", LOAD_PLOT)?;
        Ok(())
    }
}
