//! Triangle meshes with named groups, OBJ output and discrete mean curvature.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::surface::patches::PartKind;

pub type V3 = [f64; 3];

pub fn sub(a: V3, b: V3) -> V3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub fn add(a: V3, b: V3) -> V3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

pub fn scale(a: V3, s: f64) -> V3 {
    [a[0] * s, a[1] * s, a[2] * s]
}

pub fn dot(a: V3, b: V3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub fn cross(a: V3, b: V3) -> V3 {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

pub fn norm(a: V3) -> f64 {
    dot(a, a).sqrt()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Group {
    pub name: String,
    pub kind: PartKind,
    pub faces: Vec<[usize; 3]>,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct Mesh {
    pub positions: Vec<V3>,
    pub normals: Vec<V3>,
    pub groups: Vec<Group>,
}

/// Nine significant digits.
fn num(x: f64) -> String {
    if x == 0.0 {
        "0".to_string()
    } else {
        format!("{x:.8e}")
    }
}

impl Mesh {
    pub fn n_faces(&self) -> usize {
        self.groups.iter().map(|g| g.faces.len()).sum()
    }

    pub fn group(&self, name: &str) -> Option<&Group> {
        self.groups.iter().find(|g| g.name == name)
    }

    /// Wavefront OBJ with per-vertex normals and one `g` line per group.
    pub fn to_obj(&self) -> String {
        let mut s = String::new();
        for p in &self.positions {
            let _ = writeln!(s, "v {} {} {}", num(p[0]), num(p[1]), num(p[2]));
        }
        for n in &self.normals {
            let _ = writeln!(s, "vn {} {} {}", num(n[0]), num(n[1]), num(n[2]));
        }
        for g in &self.groups {
            let _ = writeln!(s, "g {}", g.name);
            for f in &g.faces {
                let (a, b, c) = (f[0] + 1, f[1] + 1, f[2] + 1);
                let _ = writeln!(s, "f {a}//{a} {b}//{b} {c}//{c}");
            }
        }
        s
    }

    /// Cotangent-Laplacian mean curvature |Δf|/2 at every vertex whose one-ring
    /// (taken over all groups) is closed; None elsewhere.
    pub fn mean_curvature(&self) -> Vec<Option<f64>> {
        let n = self.positions.len();
        let mut lap = vec![[0.0; 3]; n];
        let mut area = vec![0.0; n];
        // Edge balance: +1 per oriented half-edge, −1 per opposite one; zero sum means interior.
        let mut boundary: Vec<std::collections::HashMap<usize, i32>> = vec![Default::default(); n];
        for g in &self.groups {
            for f in &g.faces {
                let p: Vec<V3> = f.iter().map(|&i| self.positions[i]).collect();
                let a = norm(cross(sub(p[1], p[0]), sub(p[2], p[0]))) / 2.0;
                for c in 0..3 {
                    let (i, j, k) = (f[c], f[(c + 1) % 3], f[(c + 2) % 3]);
                    // angle at i opposite the edge j–k
                    let (u, v) = (sub(self.positions[j], self.positions[i]), sub(self.positions[k], self.positions[i]));
                    let cot = dot(u, v) / norm(cross(u, v)).max(1e-300);
                    let d = sub(self.positions[k], self.positions[j]);
                    lap[j] = add(lap[j], scale(d, cot / 2.0));
                    lap[k] = add(lap[k], scale(d, -cot / 2.0));
                    area[i] += a / 3.0;
                    *boundary[j].entry(k).or_insert(0) += 1;
                    *boundary[k].entry(j).or_insert(0) -= 1;
                }
            }
        }
        (0..n)
            .map(|i| {
                let closed = !boundary[i].is_empty() && boundary[i].values().all(|&b| b == 0);
                (closed && area[i] > 0.0).then(|| norm(lap[i]) / (2.0 * area[i]))
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tetra() -> Mesh {
        let positions = vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
        let faces = vec![[0, 2, 1], [0, 1, 3], [0, 3, 2], [1, 2, 3]];
        Mesh { normals: positions.clone(), positions, groups: vec![Group { name: "t".into(), kind: PartKind::Sphere, faces }] }
    }

    #[test]
    fn obj_has_groups_and_one_based_faces() {
        let obj = tetra().to_obj();
        assert_eq!(obj.lines().filter(|l| l.starts_with("v ")).count(), 4);
        assert!(obj.contains("g t\n"));
        assert!(obj.contains("f 1//1 3//3 2//2"));
        assert!(obj.contains("1.00000000e0"));
    }

    #[test]
    fn closed_mesh_has_curvature_everywhere() {
        assert!(tetra().mean_curvature().iter().all(|h| h.is_some()));
    }

    #[test]
    fn flat_grid_has_zero_curvature() {
        let n = 5;
        let positions: Vec<V3> = (0..n * n).map(|i| [(i % n) as f64, (i / n) as f64, 0.0]).collect();
        let mut faces = Vec::new();
        for i in 0..n - 1 {
            for j in 0..n - 1 {
                let a = i * n + j;
                faces.push([a, a + 1, a + n + 1]);
                faces.push([a, a + n + 1, a + n]);
            }
        }
        let m = Mesh { normals: positions.clone(), positions, groups: vec![Group { name: "p".into(), kind: PartKind::Sphere, faces }] };
        let h = m.mean_curvature();
        assert!(h[12].unwrap() < 1e-12);
        assert!(h[0].is_none());
    }
}
