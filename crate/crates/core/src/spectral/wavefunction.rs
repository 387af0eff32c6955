//! RK4 integration of `D_αΦ = U^αΦ` with `Φ(base) = I`: along the base row
//! first, then up and down every column.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use super::{GridSpec, MatrixEvaluator};
use crate::error::{Error, Result};
use crate::liealg::NumericMatrix;
use crate::models::{ModelDefinition, SolutionFamily};
use crate::report::{complex, Sci};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IntegrationOptions {
    /// RK4 steps per grid cell.
    pub substeps: usize,
    /// A step is rejected when `‖Φ‖_F` exceeds this.
    pub blowup: f64,
}

impl Default for IntegrationOptions {
    fn default() -> Self {
        IntegrationOptions {
            substeps: 1,
            blowup: 1e6,
        }
    }
}

/// Φ on every node of a grid at fixed λ, for one member of a solution family.
#[derive(Clone, Debug)]
pub struct WavefunctionGrid {
    pub spec: GridSpec,
    pub lambda: Complex64,
    pub solution: String,
    pub params: Vec<f64>,
    phi: Vec<NumericMatrix>,
}

impl WavefunctionGrid {
    pub fn phi(&self, i: usize, j: usize) -> &NumericMatrix {
        &self.phi[self.spec.index(i, j)]
    }

    /// All samples, indexed by [`GridSpec::index`].
    pub fn values(&self) -> &[NumericMatrix] {
        &self.phi
    }

    pub fn dim(&self) -> usize {
        self.phi[0].dim()
    }

    /// `max |det Φ − 1|`.
    pub fn max_det_defect(&self) -> f64 {
        self.phi
            .par_iter()
            .map(|p| (p.determinant() - 1.0).norm())
            .reduce(|| 0.0, f64::max)
    }

    /// `max ‖Φ†Φ − I‖_F`.
    pub fn max_unitarity_defect(&self) -> f64 {
        self.phi
            .par_iter()
            .map(NumericMatrix::unitarity_defect)
            .reduce(|| 0.0, f64::max)
    }
}

/// The two Lax potentials compiled on one solution.
#[derive(Clone, Debug)]
pub(crate) struct Potentials {
    u: [MatrixEvaluator; 2],
}

impl Potentials {
    pub(crate) fn new(
        m: &ModelDefinition,
        family: &SolutionFamily,
        params: &[f64],
    ) -> Result<Self> {
        Ok(Potentials {
            u: [
                MatrixEvaluator::new(&m.u1, family, params)?,
                MatrixEvaluator::new(&m.u2, family, params)?,
            ],
        })
    }

    pub(crate) fn u(&self, axis: u8) -> &MatrixEvaluator {
        &self.u[axis as usize - 1]
    }
}

/// RK4 from `t` to `t + h` (with `substeps` equal sub-steps) of `Φ' = U(t)Φ`.
fn march(
    u_at: &dyn Fn(f64) -> Result<NumericMatrix>,
    t: f64,
    h: f64,
    phi: &NumericMatrix,
    substeps: usize,
) -> Result<NumericMatrix> {
    let dt = h / substeps as f64;
    let mut phi = phi.clone();
    for s in 0..substeps {
        let t0 = t + s as f64 * dt;
        let (u0, um, u1) = (u_at(t0)?, u_at(t0 + 0.5 * dt)?, u_at(t0 + dt)?);
        let k1 = &u0 * &phi;
        let k2 = &um * &phi.axpy(0.5 * dt, &k1);
        let k3 = &um * &phi.axpy(0.5 * dt, &k2);
        let k4 = &u1 * &phi.axpy(dt, &k3);
        let incr = &(&k1 + &k4) + &(&k2 + &k3).scale_re(2.0);
        phi = phi.axpy(dt / 6.0, &incr);
    }
    Ok(phi)
}

fn guard(phi: &NumericMatrix, opts: &IntegrationOptions, i: usize, j: usize) -> Result<()> {
    if !phi.is_finite() || phi.frobenius_norm() > opts.blowup {
        return Err(Error::BlowUp(i, j));
    }
    Ok(())
}

/// Fills `out[k]` for `k` in `0..n` along one grid line starting from `out[start]`.
fn sweep(
    n: usize,
    start: usize,
    coord: &dyn Fn(usize) -> f64,
    u_at: &dyn Fn(f64) -> Result<NumericMatrix>,
    out: &mut [NumericMatrix],
    opts: &IntegrationOptions,
    node: &dyn Fn(usize) -> (usize, usize),
) -> Result<()> {
    for k in start + 1..n {
        let h = coord(k) - coord(k - 1);
        out[k] = march(u_at, coord(k - 1), h, &out[k - 1], opts.substeps)?;
        let (i, j) = node(k);
        guard(&out[k], opts, i, j)?;
    }
    for k in (0..start).rev() {
        let h = coord(k) - coord(k + 1);
        out[k] = march(u_at, coord(k + 1), h, &out[k + 1], opts.substeps)?;
        let (i, j) = node(k);
        guard(&out[k], opts, i, j)?;
    }
    Ok(())
}

pub(crate) fn integrate_grid(
    pot: &Potentials,
    spec: &GridSpec,
    lambda: Complex64,
    opts: &IntegrationOptions,
) -> Result<Vec<NumericMatrix>> {
    let dim = pot.u(1).eval(spec.x1(0), spec.x2(0), lambda)?.dim();
    let (i0, j0) = spec.base;
    let x2b = spec.x2(j0);
    let mut row = vec![NumericMatrix::zeros(dim); spec.n1];
    row[i0] = NumericMatrix::identity(dim);
    sweep(
        spec.n1,
        i0,
        &|i| spec.x1(i),
        &|t| pot.u(1).eval(t, x2b, lambda),
        &mut row,
        opts,
        &|i| (i, j0),
    )?;
    let columns: Vec<Vec<NumericMatrix>> = row
        .into_par_iter()
        .enumerate()
        .map(|(i, start)| {
            let x1 = spec.x1(i);
            let mut col = vec![NumericMatrix::zeros(dim); spec.n2];
            col[j0] = start;
            sweep(
                spec.n2,
                j0,
                &|j| spec.x2(j),
                &|t| pot.u(2).eval(x1, t, lambda),
                &mut col,
                opts,
                &|j| (i, j),
            )?;
            Ok(col)
        })
        .collect::<Result<_>>()?;
    Ok(columns.into_iter().flatten().collect())
}

/// Which axis the path to a target node follows first.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PathOrder {
    RowFirst,
    ColumnFirst,
}

pub(crate) fn path_on(
    pot: &Potentials,
    spec: &GridSpec,
    lambda: Complex64,
    order: PathOrder,
    target: (usize, usize),
    opts: &IntegrationOptions,
) -> Result<NumericMatrix> {
    let (i0, j0) = spec.base;
    let mut phi = NumericMatrix::identity(pot.u(1).eval(spec.x1(i0), spec.x2(j0), lambda)?.dim());
    let leg =
        |axis: u8, from: usize, to: usize, fixed: usize, phi: &mut NumericMatrix| -> Result<()> {
            let mut k = from;
            while k != to {
                let next = if to > k { k + 1 } else { k - 1 };
                *phi = if axis == 1 {
                    let x2 = spec.x2(fixed);
                    march(
                        &|t| pot.u(1).eval(t, x2, lambda),
                        spec.x1(k),
                        spec.x1(next) - spec.x1(k),
                        phi,
                        opts.substeps,
                    )?
                } else {
                    let x1 = spec.x1(fixed);
                    march(
                        &|t| pot.u(2).eval(x1, t, lambda),
                        spec.x2(k),
                        spec.x2(next) - spec.x2(k),
                        phi,
                        opts.substeps,
                    )?
                };
                let node = if axis == 1 {
                    (next, fixed)
                } else {
                    (fixed, next)
                };
                guard(phi, opts, node.0, node.1)?;
                k = next;
            }
            Ok(())
        };
    match order {
        PathOrder::RowFirst => {
            leg(1, i0, target.0, j0, &mut phi)?;
            leg(2, j0, target.1, target.0, &mut phi)?;
        }
        PathOrder::ColumnFirst => {
            leg(2, j0, target.1, i0, &mut phi)?;
            leg(1, i0, target.0, target.1, &mut phi)?;
        }
    }
    Ok(phi)
}

fn resolve(
    m: &ModelDefinition,
    family: &SolutionFamily,
    params: &[f64],
    lambda: Complex64,
) -> Result<Potentials> {
    m.check_lambda(lambda)?;
    Potentials::new(m, family, params)
}

pub fn integrate_wavefunction(
    m: &ModelDefinition,
    family: &SolutionFamily,
    params: &[f64],
    lambda: Complex64,
    spec: &GridSpec,
) -> Result<WavefunctionGrid> {
    integrate_wavefunction_with(
        m,
        family,
        params,
        lambda,
        spec,
        &IntegrationOptions::default(),
    )
}

pub fn integrate_wavefunction_with(
    m: &ModelDefinition,
    family: &SolutionFamily,
    params: &[f64],
    lambda: Complex64,
    spec: &GridSpec,
    opts: &IntegrationOptions,
) -> Result<WavefunctionGrid> {
    let pot = resolve(m, family, params, lambda)?;
    let phi = integrate_grid(&pot, spec, lambda, opts)?;
    Ok(WavefunctionGrid {
        spec: spec.clone(),
        lambda,
        solution: family.name().to_owned(),
        params: params.to_vec(),
        phi,
    })
}

/// Φ at one node, integrated along a single two-leg path from the base.
#[allow(clippy::too_many_arguments)]
pub fn integrate_path(
    m: &ModelDefinition,
    family: &SolutionFamily,
    params: &[f64],
    lambda: Complex64,
    spec: &GridSpec,
    order: PathOrder,
    target: (usize, usize),
    opts: &IntegrationOptions,
) -> Result<NumericMatrix> {
    let pot = resolve(m, family, params, lambda)?;
    path_on(&pot, spec, lambda, order, target, opts)
}

/// Integrity of an integrated wavefunction.
#[derive(Clone, Debug, Serialize)]
pub struct LspAudit {
    pub lambda: [Sci; 2],
    pub far_corner: [usize; 2],
    /// `‖Φ_row-first − Φ_column-first‖_F` at the far corner.
    pub path_discrepancy: Sci,
    pub det_max_defect: Sci,
    /// Only for real λ, where Φ is unitary.
    pub unitarity_max_defect: Option<Sci>,
}

pub fn lsp_audit(
    m: &ModelDefinition,
    wave: &WavefunctionGrid,
    opts: &IntegrationOptions,
) -> Result<LspAudit> {
    let family = m.family(&wave.solution)?;
    let pot = resolve(m, family, &wave.params, wave.lambda)?;
    let corner = wave.spec.far_corner();
    let other = path_on(
        &pot,
        &wave.spec,
        wave.lambda,
        PathOrder::ColumnFirst,
        corner,
        opts,
    )?;
    let path = (&other - wave.phi(corner.0, corner.1)).frobenius_norm();
    Ok(LspAudit {
        lambda: complex(wave.lambda),
        far_corner: [corner.0, corner.1],
        path_discrepancy: Sci(path),
        det_max_defect: Sci(wave.max_det_defect()),
        unitarity_max_defect: (wave.lambda.im == 0.0).then(|| Sci(wave.max_unitarity_defect())),
    })
}
