//! `pr w_R Φ` as a derivative along the parameter direction a characteristic
//! is bound to.

use num_complex::Complex64;
use serde::Serialize;

use super::wavefunction::{integrate_grid, path_on, Potentials};
use super::{GridSpec, IntegrationOptions, PathOrder, WavefunctionGrid};
use crate::error::{Error, Result};
use crate::liealg::{AlgebraBasis, NumericMatrix};
use crate::models::{ModelDefinition, SolutionFamily};
use crate::report::Sci;

/// Three-step refinement of the parameter difference quotient at one node.
#[derive(Clone, Debug, Serialize)]
pub struct HalvingDiagnostic {
    pub node: [usize; 2],
    pub step: Sci,
    /// `‖D(4ε) − D(2ε)‖` and `‖D(2ε) − D(ε)‖`.
    pub differences: [Sci; 2],
    /// Ratio of the two differences; 4 for a second-order quotient.
    pub ratio: Sci,
    pub converged: bool,
}

impl HalvingDiagnostic {
    /// Second-order if the ratio is in [2.5, 6], or if the coarse difference
    /// is already below `1e−10·max(1, ‖D‖)` (nothing left to resolve).
    pub(crate) fn from_estimates(
        node: (usize, usize),
        step: f64,
        d: [&NumericMatrix; 3],
        label: &str,
    ) -> Self {
        let coarse = (d[0] - d[1]).frobenius_norm();
        let fine = (d[1] - d[2]).frobenius_norm();
        let ratio = coarse / fine;
        let floor = 1e-10 * d[2].frobenius_norm().max(1.0);
        let converged = coarse < floor || (2.5..=6.0).contains(&ratio);
        if !converged {
            log::warn!(
                "{label}: difference quotient is not second order at node {node:?} (step {step:e}): \
                 differences {coarse:e}, {fine:e}, ratio {ratio:.3}"
            );
        }
        HalvingDiagnostic {
            node: [node.0, node.1],
            step: Sci(step),
            differences: [Sci(coarse), Sci(fine)],
            ratio: Sci(ratio),
            converged,
        }
    }
}

/// Samples of `V = pr w_R Φ` on the grid of a wavefunction.
#[derive(Clone, Debug)]
pub struct VariationGrid {
    pub spec: GridSpec,
    pub lambda: Complex64,
    pub solution: String,
    pub params: Vec<f64>,
    pub characteristic: String,
    pub epsilon: f64,
    pub diagnostic: Option<HalvingDiagnostic>,
    v: Vec<NumericMatrix>,
}

impl VariationGrid {
    /// A variation with given samples, aligned with `wave`.
    pub fn from_values(
        wave: &WavefunctionGrid,
        characteristic: &str,
        v: Vec<NumericMatrix>,
    ) -> Result<Self> {
        if v.len() != wave.spec.len() {
            return Err(Error::Grid(format!(
                "{} samples for a grid of {}",
                v.len(),
                wave.spec.len()
            )));
        }
        Ok(VariationGrid {
            spec: wave.spec.clone(),
            lambda: wave.lambda,
            solution: wave.solution.clone(),
            params: wave.params.clone(),
            characteristic: characteristic.to_owned(),
            epsilon: 0.0,
            diagnostic: None,
            v,
        })
    }

    /// `V ≡ 0`, the variation of the zero characteristic.
    pub fn zero(wave: &WavefunctionGrid, characteristic: &str) -> Self {
        let z = NumericMatrix::zeros(wave.dim());
        Self::from_values(wave, characteristic, vec![z; wave.spec.len()]).expect("sizes match")
    }

    pub fn v(&self, i: usize, j: usize) -> &NumericMatrix {
        &self.v[self.spec.index(i, j)]
    }

    pub fn values(&self) -> &[NumericMatrix] {
        &self.v
    }
}

/// `V = scale·(Φ_{p+ε} − Φ_{p−ε})/(2ε)` where `p` is the parameter the
/// characteristic is bound to; both wavefunctions are re-integrated with
/// `Φ(base) = I`. The default `ε` is `1e−4·max(1, |p|)`.
#[allow(clippy::too_many_arguments)]
pub fn variation_wavefunction(
    m: &ModelDefinition,
    family: &SolutionFamily,
    params: &[f64],
    characteristic: &str,
    lambda: Complex64,
    spec: &GridSpec,
    epsilon: Option<f64>,
    opts: &IntegrationOptions,
) -> Result<VariationGrid> {
    m.check_lambda(lambda)?;
    m.characteristic(characteristic)?;
    let binding = family
        .binding(characteristic)
        .ok_or_else(|| Error::MissingBinding {
            characteristic: characteristic.to_owned(),
            solution: family.name().to_owned(),
        })?;
    let k = family
        .param_index(&binding.param)
        .expect("validated at load");
    let eps = epsilon.unwrap_or(1e-4 * params[k].abs().max(1.0));
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::Config(format!(
            "variation step must be positive, got {eps}"
        )));
    }
    let scale = family.binding_scale(binding, params)?;
    let shifted = |delta: f64| -> Result<Potentials> {
        let mut p = params.to_vec();
        p[k] += delta;
        Potentials::new(m, family, &p)
    };
    let quotient = |plus: &NumericMatrix, minus: &NumericMatrix, step: f64| {
        (plus - minus).scale_re(scale / (2.0 * step))
    };

    let (pp, pm) = (shifted(eps)?, shifted(-eps)?);
    let (plus, minus) = rayon::join(
        || integrate_grid(&pp, spec, lambda, opts),
        || integrate_grid(&pm, spec, lambda, opts),
    );
    let (plus, minus) = (plus?, minus?);
    let v: Vec<NumericMatrix> = plus
        .iter()
        .zip(&minus)
        .map(|(a, b)| quotient(a, b, eps))
        .collect();

    let node = spec.far_corner();
    let at = |step: f64| -> Result<NumericMatrix> {
        let a = path_on(
            &shifted(step)?,
            spec,
            lambda,
            PathOrder::RowFirst,
            node,
            opts,
        )?;
        let b = path_on(
            &shifted(-step)?,
            spec,
            lambda,
            PathOrder::RowFirst,
            node,
            opts,
        )?;
        Ok(quotient(&a, &b, step))
    };
    let d4 = at(4.0 * eps)?;
    let d2 = at(2.0 * eps)?;
    let d1 = &v[spec.index(node.0, node.1)];
    let diagnostic = HalvingDiagnostic::from_estimates(node, eps, [&d4, &d2, d1], characteristic);

    Ok(VariationGrid {
        spec: spec.clone(),
        lambda,
        solution: family.name().to_owned(),
        params: params.to_vec(),
        characteristic: characteristic.to_owned(),
        epsilon: eps,
        diagnostic: Some(diagnostic),
        v,
    })
}

/// Coordinates of `V·Φ⁻¹` in the orthonormal algebra basis.
#[derive(Clone, Debug, Serialize)]
pub struct GroupDirection {
    pub q: Vec<Sci>,
    /// `‖VΦ⁻¹ − Σ q_j e_j‖_F`.
    pub defect: Sci,
}

impl GroupDirection {
    pub fn coords(&self) -> Vec<f64> {
        self.q.iter().map(|s| s.0).collect()
    }
}

pub fn extract_group_direction(
    wave: &WavefunctionGrid,
    var: &VariationGrid,
    node: (usize, usize),
) -> Result<GroupDirection> {
    let x = var
        .v(node.0, node.1)
        .try_mul(&wave.phi(node.0, node.1).inverse()?)?;
    let (q, defect) = AlgebraBasis::su(x.dim()).coordinates(&x);
    Ok(GroupDirection {
        q: q.into_iter().map(Sci).collect(),
        defect: Sci(defect),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::liealg::to_e3;
    use crate::models::builtin;
    use crate::spectral::{integrate_wavefunction, lsp_symmetry_residual, MatrixEvaluator};
    use crate::symexpr::Characteristic;

    fn one() -> Complex64 {
        Complex64::new(1.0, 0.0)
    }

    fn grid(n: usize) -> GridSpec {
        GridSpec::new((-1.0, 1.0), n, (-1.0, 1.0), n).unwrap()
    }

    #[test]
    fn translation_variation_identity() {
        let m = builtin("sine-gordon").unwrap();
        let family = m.family("kink").unwrap();
        let p = [1.0, 0.0];
        let spec = grid(41);
        let w = integrate_wavefunction(&m, family, &p, one(), &spec).unwrap();
        let v = variation_wavefunction(
            &m,
            family,
            &p,
            "trans1",
            one(),
            &spec,
            None,
            &Default::default(),
        )
        .unwrap();
        assert!(v.v(0, 0).frobenius_norm() < 1e-12);
        assert!(v.diagnostic.as_ref().unwrap().converged);

        // Φ(base) = I pins V = U¹Φ − ΦU¹(base)
        let u1 = MatrixEvaluator::new(m.u(1), family, &p).unwrap();
        let c = u1.eval(spec.x1(0), spec.x2(0), one()).unwrap();
        for k in 0..spec.len() {
            let (i, j) = spec.node(k);
            let u = u1.eval(spec.x1(i), spec.x2(j), one()).unwrap();
            let expected = &(&u * w.phi(i, j)) - &(w.phi(i, j) * &c);
            assert!((v.v(i, j) - &expected).frobenius_norm() < 5e-4);
        }

        let base = extract_group_direction(&w, &v, (0, 0)).unwrap();
        assert!(base.coords().iter().all(|q| q.abs() < 1e-12));
        let node = (30, 17);
        let q = extract_group_direction(&w, &v, node).unwrap();
        let phi = w.phi(node.0, node.1);
        let expected = to_e3(
            &(&u1.eval(spec.x1(node.0), spec.x2(node.1), one()).unwrap()
                - &(&(phi * &c) * &phi.inverse().unwrap())),
        )
        .unwrap();
        for (a, b) in q.coords().iter().zip(expected) {
            assert!((a - b).abs() < 5e-4);
        }
        assert!(q.defect.0 < 1e-6);
    }

    #[test]
    fn flow3_is_scaled_translation() {
        let m = builtin("sine-gordon").unwrap();
        let family = m.family("kink").unwrap();
        let p = [1.3, 0.2];
        let spec = grid(21);
        let opts = IntegrationOptions::default();
        let t =
            variation_wavefunction(&m, family, &p, "trans1", one(), &spec, None, &opts).unwrap();
        let f = variation_wavefunction(&m, family, &p, "flow3", one(), &spec, None, &opts).unwrap();
        let scale = 1.3f64 * 1.3;
        let worst = t
            .values()
            .iter()
            .map(|v| v.frobenius_norm())
            .fold(0.0, f64::max);
        for (a, b) in t.values().iter().zip(f.values()) {
            assert!((&a.scale_re(scale) - b).frobenius_norm() < 5e-4 * scale * worst);
        }
    }

    #[test]
    fn zero_and_corrupted_variations() {
        let m = builtin("sine-gordon").unwrap();
        let family = m.family("kink").unwrap();
        let p = [1.0, 0.0];
        let spec = grid(21);
        let w = integrate_wavefunction(&m, family, &p, one(), &spec).unwrap();
        let zero = Characteristic::zero(1);
        let z = VariationGrid::zero(&w, "zero");
        assert_eq!(lsp_symmetry_residual(&m, &zero, &w, &z).unwrap().max(), 0.0);
        assert!(extract_group_direction(&w, &z, (5, 5))
            .unwrap()
            .coords()
            .iter()
            .all(|q| *q == 0.0));

        let c = AlgebraBasis::su2().elements()[0].clone();
        let bad = VariationGrid::from_values(&w, "zero", vec![c; spec.len()]).unwrap();
        let r = lsp_symmetry_residual(&m, &zero, &w, &bad).unwrap();
        assert!(r.max() > 0.1, "{}", r.max());
    }

    #[test]
    fn unbound_and_invalid_requests() {
        let m = builtin("sine-gordon").unwrap();
        let family = m.family("kink").unwrap();
        let spec = grid(5);
        let opts = IntegrationOptions::default();
        assert!(matches!(
            variation_wavefunction(&m, family, &[1.0, 0.0], "bogus", one(), &spec, None, &opts),
            Err(Error::MissingBinding { .. })
        ));
        assert!(variation_wavefunction(
            &m,
            family,
            &[1.0, 0.0],
            "trans1",
            one(),
            &spec,
            Some(0.0),
            &opts
        )
        .is_err());
        assert!(variation_wavefunction(
            &m,
            family,
            &[1.0, 0.0],
            "trans1",
            Complex64::new(0.0, 0.0),
            &spec,
            None,
            &opts
        )
        .is_err());
    }

    #[test]
    fn halving_verdicts() {
        let m = |x: f64| NumericMatrix::from_fn(1, |_, _| Complex64::new(x, 0.0));
        assert!(
            HalvingDiagnostic::from_estimates(
                (0, 0),
                1e-4,
                [&m(1.0 + 16e-8), &m(1.0 + 4e-8), &m(1.0 + 1e-8)],
                "t"
            )
            .converged
        );
        assert!(
            !HalvingDiagnostic::from_estimates(
                (0, 0),
                1e-4,
                [&m(1.0 + 4e-6), &m(1.0 + 2e-6), &m(1.0 + 1e-6)],
                "t"
            )
            .converged
        );
        assert!(
            HalvingDiagnostic::from_estimates((0, 0), 1e-4, [&m(1.0), &m(1.0), &m(1.0)], "t")
                .converged
        );
    }
}
