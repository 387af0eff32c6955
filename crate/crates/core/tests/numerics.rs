use num_complex::Complex64;
use proptest::prelude::*;
use solsurf_core::geometry::curvature;
use solsurf_core::spectral::{integrate_wavefunction_with, IntegrationOptions};
use solsurf_core::*;

fn lam() -> Complex64 {
    Complex64::new(1.0, 0.0)
}

fn square(r: f64, n: usize) -> GridSpec {
    GridSpec::new((-r, r), n, (-r, r), n).unwrap()
}

fn sphere(n: usize) -> SurfaceMesh {
    let spec = GridSpec::new((0.6, 2.4), n, (0.0, 1.8), n).unwrap();
    SurfaceMesh::from_fn(&spec, |t, p| {
        [
            2.0 * t.sin() * p.cos(),
            2.0 * t.sin() * p.sin(),
            2.0 * t.cos(),
        ]
    })
}

/// Rotation about a unit axis (Rodrigues).
fn rotation(axis: [f64; 3], angle: f64) -> [[f64; 3]; 3] {
    let n = (axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2]).sqrt();
    let [x, y, z] = axis.map(|a| a / n);
    let (s, c) = angle.sin_cos();
    let t = 1.0 - c;
    [
        [c + x * x * t, x * y * t - z * s, x * z * t + y * s],
        [y * x * t + z * s, c + y * y * t, y * z * t - x * s],
        [z * x * t - y * s, z * y * t + x * s, c + z * z * t],
    ]
}

#[test]
fn curvature_error_is_second_order() {
    let err = |n| {
        let r = curvature(&sphere(n)).unwrap();
        r.nodes
            .iter()
            .map(|c| (c.k.0 - 0.25).abs())
            .fold(0.0, f64::max)
    };
    // Same parameter box, so h halves from n to 2n − 1.
    let ratio = err(41) / err(81);
    assert!((3.0..5.3).contains(&ratio), "ratio {ratio}");
}

#[test]
fn rk4_error_is_fourth_order() {
    let m = builtin("sine-gordon").unwrap();
    let family = m.family("kink").unwrap();
    let spec = square(2.0, 11);
    let corner = |substeps| {
        let opts = IntegrationOptions {
            substeps,
            ..IntegrationOptions::default()
        };
        let w = integrate_wavefunction_with(&m, family, &[1.0, 0.3], lam(), &spec, &opts).unwrap();
        let (i, j) = spec.far_corner();
        w.phi(i, j).clone()
    };
    let (a, b, c) = (corner(2), corner(4), corner(8));
    let ratio = (&a - &b).frobenius_norm() / (&b - &c).frobenius_norm();
    assert!((12.0..21.0).contains(&ratio), "Richardson ratio {ratio}");
}

#[test]
fn constant_gauge_rotates_the_surface_rigidly() {
    // C⁻¹FC for constant C ∈ SU(2) is a rotation of the E³ image.
    let m = builtin("sine-gordon").unwrap();
    let family = m.family("kink").unwrap();
    let spec = square(2.0, 81);
    let opts = IntegrationOptions::default();
    let f = immersion_symtafel(
        &m,
        family,
        &[1.0, 0.0],
        lam(),
        &spec,
        &ScalarExpr::one(),
        None,
        &opts,
    )
    .unwrap();
    let c = AlgebraBasis::su2().combine(&[0.3, -0.7, 0.5]).exp_su2();
    let rotated: Vec<NumericMatrix> = f
        .values()
        .iter()
        .map(|x| x.conjugate_by(&c).unwrap())
        .collect();
    let g = ImmersionGrid::from_raw(&spec, lam(), "rotated", rotated).unwrap();
    let (a, b) = (
        curvature(&to_mesh(&f)).unwrap(),
        curvature(&to_mesh(&g)).unwrap(),
    );
    assert_eq!(a.nodes.len(), b.nodes.len());
    for (p, q) in a.nodes.iter().zip(&b.nodes) {
        assert!(
            (p.k.0 - q.k.0).abs() < 1e-8 * (1.0 + p.k.0.abs()),
            "K at ({}, {})",
            p.i,
            p.j
        );
        assert!(
            (p.h.0 - q.h.0).abs() < 1e-8 * (1.0 + p.h.0.abs()),
            "H at ({}, {})",
            p.i,
            p.j
        );
    }
}

trait ExpSu2 {
    fn exp_su2(&self) -> NumericMatrix;
}

impl ExpSu2 for NumericMatrix {
    /// exp(X) for traceless anti-Hermitian 2×2 X: cos|w| I + sin|w|/|w| X,
    /// where |w|² = det X.
    fn exp_su2(&self) -> NumericMatrix {
        let w = self.determinant().re.sqrt();
        NumericMatrix::identity(2)
            .scale_re(w.cos())
            .axpy(w.sin() / w, self)
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn curvature_is_invariant_under_rigid_motions(
        axis in prop::array::uniform3(-1.0f64..1.0),
        angle in 0.0f64..std::f64::consts::TAU,
        t in prop::array::uniform3(-5.0f64..5.0),
    ) {
        prop_assume!(axis.iter().map(|a| a * a).sum::<f64>() > 1e-2);
        let mesh = sphere(31);
        let moved = mesh.transformed(&rotation(axis, angle), t);
        let (a, b) = (curvature(&mesh).unwrap(), curvature(&moved).unwrap());
        for (p, q) in a.nodes.iter().zip(&b.nodes) {
            prop_assert!((p.k.0 - q.k.0).abs() < 1e-8);
            prop_assert!((p.h.0 - q.h.0).abs() < 1e-8);
        }
    }

    #[test]
    fn kink_is_flat_across_the_family(a in 0.5f64..2.0, d in -1.0f64..1.0) {
        let m = builtin("sine-gordon").unwrap();
        let r = zcc_residual_on(&m, m.family("kink").unwrap(), &[a, d], &square(3.0, 31)).unwrap();
        prop_assert!(r.max() < 1e-10, "a={a} d={d}: {}", r.max());
    }
}
