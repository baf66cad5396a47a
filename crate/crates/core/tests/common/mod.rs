#![allow(dead_code)]

use std::fmt::Write as _;

use rand::rngs::StdRng;
use rand::Rng;

use conefrac_core::trustregion::Function;

/// Structured TRI6 meshes assembled block by block, written in the
/// native mesh format.
#[derive(Default)]
pub struct MeshBuilder {
    nodes: Vec<[f64; 2]>,
    elements: Vec<[usize; 6]>,
    node_sets: Vec<(String, Vec<usize>)>,
    element_sets: Vec<(String, Vec<usize>)>,
}

impl MeshBuilder {
    /// Adds an `nx` by `ny` cell rectangle with each cell split along its
    /// rising diagonal. Registers node sets `{name}_bottom`, `_top`,
    /// `_left`, `_right` and the element set `{name}`.
    pub fn block(mut self, name: &str, nx: usize, ny: usize, origin: [f64; 2], size: [f64; 2]) -> Self {
        let (mx, my) = (2 * nx + 1, 2 * ny + 1);
        let base = self.nodes.len();
        for j in 0..my {
            for i in 0..mx {
                let x = origin[0] + size[0] * i as f64 / (mx - 1) as f64;
                let y = origin[1] + size[1] * j as f64 / (my - 1) as f64;
                self.nodes.push([x, y]);
            }
        }
        let id = |i: usize, j: usize| base + j * mx + i;
        let first = self.elements.len();
        for cy in 0..ny {
            for cx in 0..nx {
                let (i, j) = (2 * cx, 2 * cy);
                self.elements.push([
                    id(i, j),
                    id(i + 2, j),
                    id(i + 2, j + 2),
                    id(i + 1, j),
                    id(i + 2, j + 1),
                    id(i + 1, j + 1),
                ]);
                self.elements.push([
                    id(i, j),
                    id(i + 2, j + 2),
                    id(i, j + 2),
                    id(i + 1, j + 1),
                    id(i + 1, j + 2),
                    id(i, j + 1),
                ]);
            }
        }
        let sets = [
            ("bottom", (0..mx).map(|i| id(i, 0)).collect::<Vec<_>>()),
            ("top", (0..mx).map(|i| id(i, my - 1)).collect()),
            ("left", (0..my).map(|j| id(0, j)).collect()),
            ("right", (0..my).map(|j| id(mx - 1, j)).collect()),
        ];
        for (side, ids) in sets {
            self.node_sets.push((format!("{name}_{side}"), ids));
        }
        self.element_sets.push((name.to_string(), (first..self.elements.len()).collect()));
        self
    }

    /// Adds a node set holding the node nearest to `p`.
    pub fn point_set(mut self, name: &str, p: [f64; 2]) -> Self {
        let k = (0..self.nodes.len())
            .min_by(|&a, &b| dist2(self.nodes[a], p).total_cmp(&dist2(self.nodes[b], p)))
            .expect("mesh has nodes");
        self.node_sets.push((name.to_string(), vec![k]));
        self
    }

    pub fn text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "nodes {} elements {}", self.nodes.len(), self.elements.len());
        for (k, x) in self.nodes.iter().enumerate() {
            let _ = writeln!(s, "{} {:e} {:e}", k + 1, x[0], x[1]);
        }
        for (k, c) in self.elements.iter().enumerate() {
            let ids: Vec<String> = c.iter().map(|n| (n + 1).to_string()).collect();
            let _ = writeln!(s, "{} {}", k + 1, ids.join(" "));
        }
        for (name, ids) in &self.node_sets {
            let ids: Vec<String> = ids.iter().map(|n| (n + 1).to_string()).collect();
            let _ = writeln!(s, "nodeset {name} {} {}", ids.len(), ids.join(" "));
        }
        for (name, ids) in &self.element_sets {
            let ids: Vec<String> = ids.iter().map(|n| (n + 1).to_string()).collect();
            let _ = writeln!(s, "elemset {name} {} {}", ids.len(), ids.join(" "));
        }
        s
    }
}

fn dist2(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn rand_dir(n: usize, rng: &mut StdRng) -> Vec<f64> {
    let v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let s = norm(&v);
    v.iter().map(|x| x / s).collect()
}

/// Worst relative central-difference errors of the directional
/// derivative and of the Hessian-vector product along `dirs` random
/// directions, with step `h` in each direction.
pub fn fd_errors(f: &dyn Function, xi: &[f64], h: f64, dirs: usize, rng: &mut StdRng) -> Option<(f64, f64)> {
    let (_, g, hm) = f.hessian(xi)?;
    let mut worst = (0.0f64, 0.0f64);
    for _ in 0..dirs {
        let v = rand_dir(xi.len(), rng);
        let xp: Vec<f64> = xi.iter().zip(&v).map(|(a, b)| a + h * b).collect();
        let xm: Vec<f64> = xi.iter().zip(&v).map(|(a, b)| a - h * b).collect();
        let (fp, gp) = f.gradient(&xp)?;
        let (fm, gm) = f.gradient(&xm)?;
        let fd = (fp - fm) / (2.0 * h);
        let gv = dot(&g, &v);
        worst.0 = worst.0.max((fd - gv).abs() / norm(&g).max(f64::MIN_POSITIVE));
        let hv = hm.mul_vec(&v);
        let fdh: Vec<f64> = gp.iter().zip(&gm).map(|(a, b)| (a - b) / (2.0 * h)).collect();
        let err: Vec<f64> = fdh.iter().zip(&hv).map(|(a, b)| a - b).collect();
        worst.1 = worst.1.max(norm(&err) / norm(&hv).max(norm(&fdh)).max(f64::MIN_POSITIVE));
    }
    Some(worst)
}

/// Prints the criterion verdict line and returns whether it passed.
pub fn verdict(id: usize, name: &str, pass: bool, detail: &str) -> bool {
    println!("criterion {id:>2} {:<4} {name}: {detail}", if pass { "PASS" } else { "FAIL" });
    pass
}
