//! E³ meshes of immersion grids, finite-difference fundamental forms and
//! curvature, and OBJ/CSV export.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::immersion::ImmersionGrid;
use crate::liealg::AlgebraBasis;
use crate::report::{Sci, SCHEMA_VERSION};
use crate::spectral::GridSpec;

/// Nodes whose immersion value is farther than this from the algebra are masked.
pub const ALGEBRA_TOLERANCE: f64 = 1e-4;
/// Nodes with `det g` below this are reported as degenerate.
pub const DEGENERATE_METRIC: f64 = 1e-12;
/// Default floor on `det g/(g₁₁g₂₂)`, the squared sine of the angle between
/// the tangents, for nodes entering the summary statistics.
pub const CONDITIONING_FLOOR: f64 = 1e-2;

/// Grid of E³ points with a validity mask.
#[derive(Clone, Debug, PartialEq)]
pub struct SurfaceMesh {
    pub spec: GridSpec,
    points: Vec<[f64; 3]>,
    valid: Vec<bool>,
}

impl SurfaceMesh {
    /// Samples `f(x1, x2)` on every node.
    pub fn from_fn(spec: &GridSpec, f: impl Fn(f64, f64) -> [f64; 3] + Sync) -> Self {
        let points = (0..spec.len())
            .into_par_iter()
            .map(|k| {
                let (i, j) = spec.node(k);
                f(spec.x1(i), spec.x2(j))
            })
            .collect();
        SurfaceMesh::new(spec.clone(), points, vec![true; spec.len()]).expect("sizes match")
    }

    pub fn new(spec: GridSpec, points: Vec<[f64; 3]>, valid: Vec<bool>) -> Result<Self> {
        if points.len() != spec.len() || valid.len() != spec.len() {
            return Err(Error::Grid("mesh arrays do not match the grid".into()));
        }
        let valid = valid
            .iter()
            .zip(&points)
            .map(|(v, p)| *v && p.iter().all(|c| c.is_finite()))
            .collect();
        Ok(SurfaceMesh {
            spec,
            points,
            valid,
        })
    }

    pub fn point(&self, i: usize, j: usize) -> [f64; 3] {
        self.points[self.spec.index(i, j)]
    }

    pub fn points(&self) -> &[[f64; 3]] {
        &self.points
    }

    pub fn is_valid(&self, i: usize, j: usize) -> bool {
        self.valid[self.spec.index(i, j)]
    }

    pub fn mask(&self) -> &[bool] {
        &self.valid
    }

    pub fn invalidate(&mut self, i: usize, j: usize) {
        let k = self.spec.index(i, j);
        self.valid[k] = false;
    }

    /// Applies `p ↦ Rp + t` to every point.
    pub fn transformed(&self, r: &[[f64; 3]; 3], t: [f64; 3]) -> Self {
        let points = self
            .points
            .iter()
            .map(|p| {
                std::array::from_fn(|a| r[a][0] * p[0] + r[a][1] * p[1] + r[a][2] * p[2] + t[a])
            })
            .collect();
        SurfaceMesh {
            spec: self.spec.clone(),
            points,
            valid: self.valid.clone(),
        }
    }
}

/// E³ projection `F ↦ (⟨F, e_j⟩)_j`; nodes farther than 1e−4 from the
/// algebra are masked.
pub fn to_mesh(f: &ImmersionGrid) -> SurfaceMesh {
    let spec = f.spec.clone();
    if f.values()[0].dim() != 2 {
        log::warn!("E³ projection needs 2x2 immersion values; every node is masked");
        return SurfaceMesh {
            points: vec![[0.0; 3]; spec.len()],
            valid: vec![false; spec.len()],
            spec,
        };
    }
    let basis = AlgebraBasis::su2();
    let (points, valid): (Vec<[f64; 3]>, Vec<bool>) = f
        .values()
        .par_iter()
        .map(|x| {
            let (c, defect) = basis.coordinates(x);
            ([c[0], c[1], c[2]], defect <= ALGEBRA_TOLERANCE)
        })
        .unzip();
    SurfaceMesh::new(spec, points, valid).expect("sizes match")
}

/// Fundamental forms and curvatures at one node.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct NodeCurvature {
    pub i: usize,
    pub j: usize,
    pub g11: Sci,
    pub g12: Sci,
    pub g22: Sci,
    pub b11: Sci,
    pub b12: Sci,
    pub b22: Sci,
    #[serde(rename = "K")]
    pub k: Sci,
    #[serde(rename = "H")]
    pub h: Sci,
}

#[derive(Clone, Debug, Serialize)]
pub struct CurvatureSummary {
    pub conditioning_floor: Sci,
    /// Nodes entering the statistics.
    pub nodes: usize,
    /// Reported nodes left out for falling below the conditioning floor.
    pub ill_conditioned: usize,
    pub mean_k: Sci,
    pub std_k: Sci,
    pub mean_h: Sci,
    pub std_h: Sci,
    pub min_k: Sci,
    pub max_k: Sci,
}

/// Curvature on interior nodes whose stencil is fully valid.
#[derive(Clone, Debug, Serialize)]
pub struct CurvatureReport {
    pub schema: u32,
    pub summary: CurvatureSummary,
    /// Nodes with `det g < 1e−12`.
    pub degenerate: Vec<[usize; 2]>,
    pub nodes: Vec<NodeCurvature>,
}

impl NodeCurvature {
    /// `det g/(g₁₁g₂₂)`; 1 for orthogonal tangents, 0 for parallel ones.
    pub fn conditioning(&self) -> f64 {
        let (g11, g12, g22) = (self.g11.0, self.g12.0, self.g22.0);
        (g11 * g22 - g12 * g12) / (g11 * g22)
    }
}

impl CurvatureReport {
    pub fn node(&self, i: usize, j: usize) -> Option<&NodeCurvature> {
        self.nodes.iter().find(|n| n.i == i && n.j == j)
    }

    pub fn to_json(&self) -> String {
        crate::report::to_json(self)
    }
}

fn sub(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn scaled(a: [f64; 3], s: f64) -> [f64; 3] {
    [a[0] * s, a[1] * s, a[2] * s]
}

enum NodeResult {
    Skipped,
    Degenerate,
    Ok(NodeCurvature),
}

fn node_curvature(mesh: &SurfaceMesh, i: usize, j: usize) -> NodeResult {
    let spec = &mesh.spec;
    for di in 0..3 {
        for dj in 0..3 {
            if !mesh.is_valid(i + di - 1, j + dj - 1) {
                return NodeResult::Skipped;
            }
        }
    }
    let (h1, h2) = (spec.h1(), spec.h2());
    let p =
        |di: isize, dj: isize| mesh.point((i as isize + di) as usize, (j as isize + dj) as usize);
    let c = p(0, 0);
    let xu = scaled(sub(p(1, 0), p(-1, 0)), 0.5 / h1);
    let xv = scaled(sub(p(0, 1), p(0, -1)), 0.5 / h2);
    let xuu = scaled(sub(sub(p(1, 0), c), sub(c, p(-1, 0))), 1.0 / (h1 * h1));
    let xvv = scaled(sub(sub(p(0, 1), c), sub(c, p(0, -1))), 1.0 / (h2 * h2));
    let xuv = scaled(
        sub(sub(p(1, 1), p(1, -1)), sub(p(-1, 1), p(-1, -1))),
        0.25 / (h1 * h2),
    );
    let (g11, g12, g22) = (dot(xu, xu), dot(xu, xv), dot(xv, xv));
    let det_g = g11 * g22 - g12 * g12;
    if det_g.is_nan() || det_g < DEGENERATE_METRIC {
        return NodeResult::Degenerate;
    }
    let n = cross(xu, xv);
    let n = scaled(n, 1.0 / dot(n, n).sqrt());
    let (b11, b12, b22) = (dot(xuu, n), dot(xuv, n), dot(xvv, n));
    let k = (b11 * b22 - b12 * b12) / det_g;
    let h = (g22 * b11 - 2.0 * g12 * b12 + g11 * b22) / (2.0 * det_g);
    if !(k.is_finite() && h.is_finite()) {
        return NodeResult::Degenerate;
    }
    NodeResult::Ok(NodeCurvature {
        i,
        j,
        g11: Sci(g11),
        g12: Sci(g12),
        g22: Sci(g22),
        b11: Sci(b11),
        b12: Sci(b12),
        b22: Sci(b22),
        k: Sci(k),
        h: Sci(h),
    })
}

fn mean_std(xs: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = xs.clone().count();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.clone().sum::<f64>() / n as f64;
    let var = xs.map(|x| (x - mean) * (x - mean)).sum::<f64>() / n as f64;
    (mean, var.sqrt())
}

/// Gaussian and mean curvature by central differences. The normal is
/// `t₁ × t₂` normalized, so `H` is signed by the grid orientation. Summary
/// statistics use nodes at or above [`CONDITIONING_FLOOR`].
pub fn curvature(mesh: &SurfaceMesh) -> Result<CurvatureReport> {
    curvature_with_floor(mesh, CONDITIONING_FLOOR)
}

/// [`curvature`] with an explicit conditioning floor; 0 keeps every node with
/// a nondegenerate metric in the statistics.
pub fn curvature_with_floor(mesh: &SurfaceMesh, floor: f64) -> Result<CurvatureReport> {
    let spec = &mesh.spec;
    if spec.n1 < 7 || spec.n2 < 7 {
        return Err(Error::Grid(format!(
            "curvature needs at least 5x5 interior nodes, got {}x{} nodes",
            spec.n1, spec.n2
        )));
    }
    let results: Vec<NodeResult> = (0..spec.len())
        .into_par_iter()
        .map(|k| {
            let (i, j) = spec.node(k);
            if spec.is_boundary(i, j) {
                NodeResult::Skipped
            } else {
                node_curvature(mesh, i, j)
            }
        })
        .collect();
    let mut nodes = Vec::new();
    let mut degenerate = Vec::new();
    for (k, r) in results.into_iter().enumerate() {
        match r {
            NodeResult::Ok(n) => nodes.push(n),
            NodeResult::Degenerate => {
                let (i, j) = spec.node(k);
                degenerate.push([i, j]);
            }
            NodeResult::Skipped => {}
        }
    }
    let kept = nodes.iter().filter(|n| n.conditioning() >= floor);
    let (mean_k, std_k) = mean_std(kept.clone().map(|n| n.k.0));
    let (mean_h, std_h) = mean_std(kept.clone().map(|n| n.h.0));
    let min_k = kept.clone().map(|n| n.k.0).fold(f64::INFINITY, f64::min);
    let max_k = kept
        .clone()
        .map(|n| n.k.0)
        .fold(f64::NEG_INFINITY, f64::max);
    let count = kept.count();
    Ok(CurvatureReport {
        schema: SCHEMA_VERSION,
        summary: CurvatureSummary {
            conditioning_floor: Sci(floor),
            nodes: count,
            ill_conditioned: nodes.len() - count,
            mean_k: Sci(mean_k),
            std_k: Sci(std_k),
            mean_h: Sci(mean_h),
            std_h: Sci(std_h),
            min_k: Sci(min_k),
            max_k: Sci(max_k),
        },
        degenerate,
        nodes,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MeshFormat {
    Obj,
    Csv,
}

impl std::str::FromStr for MeshFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "obj" => Ok(MeshFormat::Obj),
            "csv" => Ok(MeshFormat::Csv),
            _ => Err(Error::Config(format!(
                "unknown mesh format `{s}` (expected obj or csv)"
            ))),
        }
    }
}

impl MeshFormat {
    pub fn extension(self) -> &'static str {
        match self {
            MeshFormat::Obj => "obj",
            MeshFormat::Csv => "csv",
        }
    }
}

/// `v x y z` records for valid nodes and quad faces over cells whose four
/// corners are valid (1-based indices).
pub fn mesh_to_obj(mesh: &SurfaceMesh) -> String {
    let spec = &mesh.spec;
    let mut out = String::new();
    let mut index = vec![0usize; spec.len()];
    let mut next = 1;
    for (k, p) in mesh.points.iter().enumerate() {
        if mesh.valid[k] {
            writeln!(out, "v {:.12e} {:.12e} {:.12e}", p[0], p[1], p[2]).unwrap();
            index[k] = next;
            next += 1;
        }
    }
    for i in 0..spec.n1 - 1 {
        for j in 0..spec.n2 - 1 {
            let corners = [
                spec.index(i, j),
                spec.index(i + 1, j),
                spec.index(i + 1, j + 1),
                spec.index(i, j + 1),
            ];
            if corners.iter().all(|&k| mesh.valid[k]) {
                let [a, b, c, d] = corners.map(|k| index[k]);
                writeln!(out, "f {a} {b} {c} {d}").unwrap();
            }
        }
    }
    out
}

/// Header `i,j,x1,x2,X,Y,Z` and one row per valid node.
pub fn mesh_to_csv(mesh: &SurfaceMesh) -> String {
    let spec = &mesh.spec;
    let mut out = String::from("i,j,x1,x2,X,Y,Z\n");
    for (k, p) in mesh.points.iter().enumerate() {
        if mesh.valid[k] {
            let (i, j) = spec.node(k);
            writeln!(
                out,
                "{i},{j},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e}",
                spec.x1(i),
                spec.x2(j),
                p[0],
                p[1],
                p[2]
            )
            .unwrap();
        }
    }
    out
}

/// Writes `contents` to `path` through a temporary file in the same directory.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let dir = path
        .parent()
        .filter(|d| !d.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    let mut builder = tempfile::Builder::new();
    #[cfg(unix)]
    {
        use std::os::unix::fs::PermissionsExt;
        builder.permissions(std::fs::Permissions::from_mode(0o644));
    }
    let mut tmp = builder.tempfile_in(dir)?;
    tmp.write_all(contents.as_bytes())?;
    tmp.flush()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

pub fn export_mesh(mesh: &SurfaceMesh, format: MeshFormat, path: &Path) -> Result<()> {
    let text = match format {
        MeshFormat::Obj => mesh_to_obj(mesh),
        MeshFormat::Csv => mesh_to_csv(mesh),
    };
    write_atomic(path, &text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::liealg::NumericMatrix;
    use num_complex::Complex64;

    fn grid(lo: f64, hi: f64, n: usize) -> GridSpec {
        GridSpec::new((lo, hi), n, (lo, hi), n).unwrap()
    }

    #[test]
    fn plane_is_flat() {
        let mesh = SurfaceMesh::from_fn(&grid(-1.0, 1.0, 21), |u, v| [u, v, 0.0]);
        let r = curvature(&mesh).unwrap();
        assert_eq!(r.summary.nodes, 19 * 19);
        assert_eq!(r.summary.ill_conditioned, 0);
        assert!(r
            .nodes
            .iter()
            .all(|n| n.k.0.abs() < 1e-8 && n.h.0.abs() < 1e-8));
    }

    #[test]
    fn sphere_and_cylinder() {
        let rho = 2.0;
        let sphere = SurfaceMesh::from_fn(
            &GridSpec::new((0.5, 2.5), 201, (0.0, 2.0), 201).unwrap(),
            |t, p| {
                [
                    rho * t.sin() * p.cos(),
                    rho * t.sin() * p.sin(),
                    rho * t.cos(),
                ]
            },
        );
        let r = curvature(&sphere).unwrap();
        for n in &r.nodes {
            assert!((n.k.0 - 0.25).abs() < 1e-3, "K = {}", n.k.0);
            assert!((n.h.0.abs() - 0.5).abs() < 1e-3, "H = {}", n.h.0);
        }
        let cyl = SurfaceMesh::from_fn(&grid(0.0, 2.0, 201), |t, z| [t.cos(), t.sin(), z]);
        let r = curvature(&cyl).unwrap();
        for n in &r.nodes {
            assert!(n.k.0.abs() < 1e-6);
            assert!((n.h.0.abs() - 0.5).abs() < 1e-3);
        }
    }

    #[test]
    fn oblique_tangents_leave_the_statistics() {
        // t₂ = t₁ + 0.05·e₂: conditioning ≈ 0.0025
        let mesh = SurfaceMesh::from_fn(&grid(-1.0, 1.0, 11), |u, v| [u + v, 0.05 * v, 0.0]);
        let r = curvature(&mesh).unwrap();
        assert_eq!(
            (r.summary.nodes, r.summary.ill_conditioned, r.nodes.len()),
            (0, 81, 81)
        );
        assert_eq!(curvature_with_floor(&mesh, 0.0).unwrap().summary.nodes, 81);
    }

    #[test]
    fn too_small_for_curvature() {
        let mesh = SurfaceMesh::from_fn(&grid(0.0, 1.0, 6), |u, v| [u, v, 0.0]);
        assert!(matches!(curvature(&mesh), Err(Error::Grid(_))));
    }

    #[test]
    fn degenerate_metric_is_reported() {
        let mesh = SurfaceMesh::from_fn(&grid(-1.0, 1.0, 9), |u, _| [u, 0.0, 0.0]);
        let r = curvature(&mesh).unwrap();
        assert_eq!(r.summary.nodes, 0);
        assert_eq!(r.degenerate.len(), 49);
    }

    fn immersion(spec: &GridSpec, f: impl Fn(f64, f64) -> [f64; 3]) -> ImmersionGrid {
        let basis = AlgebraBasis::su2();
        let raw = (0..spec.len())
            .map(|k| {
                let (i, j) = spec.node(k);
                basis.combine(&f(spec.x1(i), spec.x2(j)))
            })
            .collect();
        ImmersionGrid::from_raw(spec, Complex64::new(1.0, 0.0), "test", raw).unwrap()
    }

    #[test]
    fn projection_examples() {
        let spec = grid(0.0, 1.0, 3);
        let zero = to_mesh(&immersion(&spec, |_, _| [0.0; 3]));
        assert!(zero.points().iter().all(|p| *p == [0.0; 3]));
        let plane = to_mesh(&immersion(&spec, |u, v| [u, v, 0.0]));
        assert!(plane.points().iter().all(|p| p[2] == 0.0));

        let f = immersion(&spec, |u, v| [u * v, u, v * v]);
        let c = [0.3, -1.2, 2.0];
        let moved = to_mesh(&f.translated(&AlgebraBasis::su2().combine(&c)));
        for (a, b) in to_mesh(&f).points().iter().zip(moved.points()) {
            for k in 0..3 {
                assert!((b[k] - a[k] - c[k]).abs() < 1e-14);
            }
        }

        let mut bad = f.clone();
        bad = bad.translated(&NumericMatrix::identity(2));
        assert!(to_mesh(&bad).mask().iter().all(|v| !v));
    }

    #[test]
    fn obj_and_csv() {
        let spec = grid(0.0, 1.0, 2);
        let mesh = SurfaceMesh::from_fn(&spec, |u, v| [u, v, 0.0]);
        let obj = mesh_to_obj(&mesh);
        assert_eq!(obj.lines().filter(|l| l.starts_with("v ")).count(), 4);
        assert_eq!(
            obj.lines()
                .filter(|l| l.starts_with("f "))
                .collect::<Vec<_>>(),
            ["f 1 3 4 2"]
        );

        let spec = grid(0.0, 1.0, 3);
        let mut mesh = SurfaceMesh::from_fn(&spec, |u, v| [u, v, 0.0]);
        mesh.invalidate(1, 1);
        let obj = mesh_to_obj(&mesh);
        assert_eq!(obj.lines().filter(|l| l.starts_with("v ")).count(), 8);
        assert_eq!(obj.lines().filter(|l| l.starts_with("f ")).count(), 0);
        let csv = mesh_to_csv(&mesh);
        assert_eq!(csv.lines().count(), 1 + 8);
        assert!(csv.starts_with("i,j,x1,x2,X,Y,Z\n"));
    }

    #[test]
    fn export_is_atomic_and_complete() {
        let dir = tempfile::tempdir().unwrap();
        let mesh = SurfaceMesh::from_fn(&grid(0.0, 1.0, 4), |u, v| [u, v, u * v]);
        let path = dir.path().join("m.obj");
        export_mesh(&mesh, MeshFormat::Obj, &path).unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap(), mesh_to_obj(&mesh));
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
        assert!(export_mesh(&mesh, MeshFormat::Csv, &dir.path().join("missing/m.csv")).is_err());
    }
}
