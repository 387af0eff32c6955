//! Zero-curvature, symmetry-criterion and LSP-symmetry residuals.

use num_complex::Complex64;
use rayon::prelude::*;

use super::{
    grid_derivative, param_map, GridSpec, MatrixEvaluator, ResidualReport, VariationGrid,
    WavefunctionGrid,
};
use crate::error::{Error, Result};
use crate::liealg::{MatrixExpr, NumericMatrix};
use crate::models::{ModelDefinition, SolutionFamily};
use crate::symexpr::Characteristic;

/// `D₂U¹ − D₁U² + [U¹, U²]`.
pub fn zcc_residual_expr(m: &ModelDefinition) -> Result<MatrixExpr> {
    m.zcc_matrix()
}

/// A nonsingular λ at which to evaluate λ-independent expressions.
fn probe_lambda(m: &ModelDefinition) -> Complex64 {
    [1.0, 2.0, 0.5, 3.0]
        .into_iter()
        .map(|x| Complex64::new(x, 0.0))
        .find(|&l| !m.is_singular(l))
        .expect("a model has finitely many singular λ")
}

fn norm_on_grid(
    expr: &MatrixExpr,
    family: &SolutionFamily,
    params: &[f64],
    spec: &GridSpec,
    lambda: Complex64,
) -> Result<ResidualReport> {
    let values: Vec<f64> = MatrixEvaluator::new(expr, family, params)?
        .on_grid(spec, lambda)?
        .iter()
        .map(NumericMatrix::frobenius_norm)
        .collect();
    Ok(ResidualReport::from_nodes(spec, &values, false).with_params(param_map(family, params)))
}

/// Frobenius norm of the ZCC residual over the grid (all nodes count).
pub fn zcc_residual_on(
    m: &ModelDefinition,
    family: &SolutionFamily,
    params: &[f64],
    spec: &GridSpec,
) -> Result<ResidualReport> {
    norm_on_grid(&m.zcc_matrix()?, family, params, spec, probe_lambda(m))
}

/// `pr w_R` applied to the ZCC matrix, evaluated on the solution over the grid.
pub fn zcc_symmetry_residual(
    m: &ModelDefinition,
    r: &Characteristic,
    family: &SolutionFamily,
    params: &[f64],
    spec: &GridSpec,
) -> Result<ResidualReport> {
    check_fields(m, r)?;
    norm_on_grid(
        &m.zcc_matrix()?.prolong(r)?,
        family,
        params,
        spec,
        probe_lambda(m),
    )
}

fn check_fields(m: &ModelDefinition, r: &Characteristic) -> Result<()> {
    if r.field_count() != m.field_count {
        return Err(Error::InvalidCharacteristic(format!(
            "{} components for a model with {} field(s)",
            r.field_count(),
            m.field_count
        )));
    }
    Ok(())
}

/// `D_αV − (pr w_R U^α)Φ − U^αV` for α = 1, 2 (terms `alpha1`, `alpha2`).
/// Thresholded statistics cover interior nodes; boundary nodes use one-sided
/// differences and are reported in `boundary_max_abs`.
pub fn lsp_symmetry_residual(
    m: &ModelDefinition,
    r: &Characteristic,
    wave: &WavefunctionGrid,
    var: &VariationGrid,
) -> Result<ResidualReport> {
    check_fields(m, r)?;
    let spec = &wave.spec;
    if var.spec != *spec
        || var.lambda != wave.lambda
        || var.solution != wave.solution
        || var.params != wave.params
    {
        return Err(Error::Grid(
            "wavefunction and variation grids are not aligned".into(),
        ));
    }
    spec.require_stencil()?;
    let family = m.family(&wave.solution)?;
    let mut terms = Vec::with_capacity(2);
    for axis in [1u8, 2] {
        let u = MatrixEvaluator::new(m.u(axis), family, &wave.params)?;
        let pu = MatrixEvaluator::new(&m.u(axis).prolong(r)?, family, &wave.params)?;
        let values = (0..spec.len())
            .into_par_iter()
            .map(|k| {
                let (i, j) = spec.node(k);
                let (x1, x2) = (spec.x1(i), spec.x2(j));
                let phi = &wave.values()[k];
                let v = &var.values()[k];
                let dv = grid_derivative(spec, var.values(), i, j, axis);
                let res = &(&dv - &(&pu.eval(x1, x2, wave.lambda)? * phi))
                    - &(&u.eval(x1, x2, wave.lambda)? * v);
                Ok(res.frobenius_norm())
            })
            .collect::<Result<Vec<f64>>>()?;
        terms.push((format!("alpha{axis}"), values));
    }
    Ok(ResidualReport::combine(spec, terms, true).with_params(param_map(family, &wave.params)))
}
