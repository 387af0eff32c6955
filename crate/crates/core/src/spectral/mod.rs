//! Numeric wavefunctions of the linear spectral problem on rectangular grids
//! and the residuals of the zero-curvature and symmetry conditions.

mod residuals;
mod variation;
mod wavefunction;

use std::collections::{BTreeMap, BTreeSet};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::liealg::{MatrixExpr, NumericMatrix};
use crate::models::{JetTable, OnShellEvaluator, SolutionFamily};
use crate::report::Sci;
use crate::symexpr::{EvalContext, JetIndex};

pub use residuals::{
    lsp_symmetry_residual, zcc_residual_expr, zcc_residual_on, zcc_symmetry_residual,
};
pub use variation::{
    extract_group_direction, variation_wavefunction, GroupDirection, HalvingDiagnostic,
    VariationGrid,
};
pub(crate) use wavefunction::{integrate_grid, path_on, Potentials};
pub use wavefunction::{
    integrate_path, integrate_wavefunction, integrate_wavefunction_with, lsp_audit,
    IntegrationOptions, LspAudit, PathOrder, WavefunctionGrid,
};

/// Uniform rectangular grid over `(x¹, x²)`. Node `(i, j)` sits at
/// `(x1_range.0 + i·h₁, x2_range.0 + j·h₂)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GridSpec {
    pub x1_range: (f64, f64),
    pub x2_range: (f64, f64),
    pub n1: usize,
    pub n2: usize,
    pub base: (usize, usize),
}

impl GridSpec {
    pub fn new(x1_range: (f64, f64), n1: usize, x2_range: (f64, f64), n2: usize) -> Result<Self> {
        let spec = GridSpec {
            x1_range,
            x2_range,
            n1,
            n2,
            base: (0, 0),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_base(mut self, base: (usize, usize)) -> Result<Self> {
        self.base = base;
        self.validate()?;
        Ok(self)
    }

    /// Parses `x1min,x1max,n1,x2min,x2max,n2`.
    pub fn parse(text: &str) -> Result<Self> {
        let parts: Vec<&str> = text.split(',').map(str::trim).collect();
        if parts.len() != 6 {
            return Err(Error::Grid(format!(
                "expected x1min,x1max,n1,x2min,x2max,n2, got `{text}`"
            )));
        }
        let float = |s: &str| {
            s.parse::<f64>()
                .map_err(|_| Error::Grid(format!("`{s}` is not a number")))
        };
        let count = |s: &str| {
            s.parse::<usize>()
                .map_err(|_| Error::Grid(format!("`{s}` is not a node count")))
        };
        GridSpec::new(
            (float(parts[0])?, float(parts[1])?),
            count(parts[2])?,
            (float(parts[3])?, float(parts[4])?),
            count(parts[5])?,
        )
    }

    fn validate(&self) -> Result<()> {
        if self.n1 < 2 || self.n2 < 2 {
            return Err(Error::Grid(format!(
                "need at least 2 nodes per axis, got {}x{}",
                self.n1, self.n2
            )));
        }
        for (lo, hi) in [self.x1_range, self.x2_range] {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::Grid(format!("range [{lo}, {hi}] is not increasing")));
            }
        }
        if self.base.0 >= self.n1 || self.base.1 >= self.n2 {
            return Err(Error::Grid(format!(
                "base node {:?} outside {}x{} grid",
                self.base, self.n1, self.n2
            )));
        }
        Ok(())
    }

    pub fn h1(&self) -> f64 {
        (self.x1_range.1 - self.x1_range.0) / (self.n1 - 1) as f64
    }

    pub fn h2(&self) -> f64 {
        (self.x2_range.1 - self.x2_range.0) / (self.n2 - 1) as f64
    }

    pub fn h(&self, axis: u8) -> f64 {
        if axis == 1 {
            self.h1()
        } else {
            self.h2()
        }
    }

    pub fn x1(&self, i: usize) -> f64 {
        self.x1_range.0 + i as f64 * self.h1()
    }

    pub fn x2(&self, j: usize) -> f64 {
        self.x2_range.0 + j as f64 * self.h2()
    }

    pub fn len(&self) -> usize {
        self.n1 * self.n2
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        i * self.n2 + j
    }

    pub fn node(&self, k: usize) -> (usize, usize) {
        (k / self.n2, k % self.n2)
    }

    pub fn is_boundary(&self, i: usize, j: usize) -> bool {
        i == 0 || j == 0 || i + 1 == self.n1 || j + 1 == self.n2
    }

    /// Same rectangle with spacing halved (`2n − 1` nodes per axis); the base
    /// node keeps its position.
    pub fn refined(&self) -> GridSpec {
        GridSpec {
            n1: 2 * self.n1 - 1,
            n2: 2 * self.n2 - 1,
            base: (2 * self.base.0, 2 * self.base.1),
            ..self.clone()
        }
    }

    /// The corner farthest (in index distance) from the base node.
    pub fn far_corner(&self) -> (usize, usize) {
        let i = if self.base.0 * 2 < self.n1 {
            self.n1 - 1
        } else {
            0
        };
        let j = if self.base.1 * 2 < self.n2 {
            self.n2 - 1
        } else {
            0
        };
        (i, j)
    }

    /// Requires at least three nodes per axis for central differences.
    pub(crate) fn require_stencil(&self) -> Result<()> {
        if self.n1 < 3 || self.n2 < 3 {
            return Err(Error::Grid(format!(
                "central differences need at least 3 nodes per axis, got {}x{}",
                self.n1, self.n2
            )));
        }
        Ok(())
    }
}

/// Derivative of a gridded quantity along `axis` at node `(i, j)`: central
/// difference in the interior, second-order one-sided at the boundary.
pub(crate) fn grid_derivative(
    spec: &GridSpec,
    values: &[NumericMatrix],
    i: usize,
    j: usize,
    axis: u8,
) -> NumericMatrix {
    let (n, pos) = if axis == 1 {
        (spec.n1, i)
    } else {
        (spec.n2, j)
    };
    let at = |p: usize| {
        if axis == 1 {
            &values[spec.index(p, j)]
        } else {
            &values[spec.index(i, p)]
        }
    };
    let h = spec.h(axis);
    if pos == 0 {
        (&at(1).scale_re(4.0) - &at(0).scale_re(3.0))
            .axpy(-1.0, at(2))
            .scale_re(1.0 / (2.0 * h))
    } else if pos + 1 == n {
        (&at(pos).scale_re(3.0) - &at(pos - 1).scale_re(4.0))
            .axpy(1.0, at(pos - 2))
            .scale_re(1.0 / (2.0 * h))
    } else {
        (at(pos + 1) - at(pos - 1)).scale_re(1.0 / (2.0 * h))
    }
}

/// Max/mean of a nonnegative per-node quantity. `max_abs`, `mean_abs` and
/// `argmax` cover the nodes that count toward thresholds; `boundary_max_abs`
/// covers the boundary ring separately.
#[derive(Clone, Debug, Serialize)]
pub struct ResidualReport {
    pub max_abs: Sci,
    pub mean_abs: Sci,
    pub argmax: [usize; 2],
    pub boundary_max_abs: Sci,
    pub params: BTreeMap<String, Sci>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub terms: Vec<NamedReport>,
}

#[derive(Clone, Debug, Serialize)]
pub struct NamedReport {
    pub name: String,
    pub report: ResidualReport,
}

impl ResidualReport {
    /// Summarizes per-node values (indexed like [`GridSpec::index`]). With
    /// `interior_only`, boundary nodes are excluded from `max_abs`/`mean_abs`.
    pub fn from_nodes(spec: &GridSpec, values: &[f64], interior_only: bool) -> Self {
        let mut max_abs: f64 = 0.0;
        let mut sum = 0.0;
        let mut count = 0usize;
        let mut argmax = [0, 0];
        let mut boundary_max: f64 = 0.0;
        for (k, &v) in values.iter().enumerate() {
            let (i, j) = spec.node(k);
            let boundary = spec.is_boundary(i, j);
            if boundary {
                boundary_max = boundary_max.max(v);
            }
            if interior_only && boundary {
                continue;
            }
            // NaN propagates into max so a failed node cannot hide.
            if v > max_abs || v.is_nan() && !max_abs.is_nan() {
                max_abs = v;
                argmax = [i, j];
            }
            sum += v;
            count += 1;
        }
        ResidualReport {
            max_abs: Sci(max_abs),
            mean_abs: Sci(if count > 0 { sum / count as f64 } else { 0.0 }),
            argmax,
            boundary_max_abs: Sci(boundary_max),
            params: BTreeMap::new(),
            terms: Vec::new(),
        }
    }

    pub fn with_params(mut self, params: BTreeMap<String, Sci>) -> Self {
        self.params = params;
        self
    }

    pub fn max(&self) -> f64 {
        self.max_abs.0
    }

    pub fn mean(&self) -> f64 {
        self.mean_abs.0
    }

    pub fn term(&self, name: &str) -> Option<&ResidualReport> {
        self.terms
            .iter()
            .find(|t| t.name == name)
            .map(|t| &t.report)
    }

    /// Combines per-term reports by taking the worst of each statistic.
    pub fn combine(spec: &GridSpec, terms: Vec<(String, Vec<f64>)>, interior_only: bool) -> Self {
        let len = spec.len();
        let worst: Vec<f64> = (0..len)
            .map(|k| terms.iter().map(|(_, v)| v[k]).fold(0.0, f64::max))
            .collect();
        let mut report = ResidualReport::from_nodes(spec, &worst, interior_only);
        report.terms = terms
            .into_iter()
            .map(|(name, v)| NamedReport {
                name,
                report: ResidualReport::from_nodes(spec, &v, interior_only),
            })
            .collect();
        report
    }
}

/// A matrix of jet expressions compiled for evaluation on one solution.
#[derive(Clone, Debug)]
pub struct MatrixEvaluator {
    dim: usize,
    eval: OnShellEvaluator,
}

impl MatrixEvaluator {
    pub fn new(m: &MatrixExpr, family: &SolutionFamily, params: &[f64]) -> Result<Self> {
        Ok(MatrixEvaluator {
            dim: m.dim(),
            eval: OnShellEvaluator::new(family, params, m.entries())?,
        })
    }

    pub fn eval(&self, x1: f64, x2: f64, lambda: Complex64) -> Result<NumericMatrix> {
        let mut out = vec![Complex64::default(); self.dim * self.dim];
        self.eval.eval(x1, x2, lambda, &mut out)?;
        NumericMatrix::new(self.dim, out)
    }

    /// Values at every grid node, in parallel.
    pub fn on_grid(&self, spec: &GridSpec, lambda: Complex64) -> Result<Vec<NumericMatrix>> {
        (0..spec.len())
            .into_par_iter()
            .map(|k| {
                let (i, j) = spec.node(k);
                self.eval(spec.x1(i), spec.x2(j), lambda)
            })
            .collect()
    }
}

/// Jet values of a family member at a point, together with `x1`, `x2`.
pub fn eval_jets(
    family: &SolutionFamily,
    params: &[f64],
    point: (f64, f64),
    needed: &BTreeSet<JetIndex>,
) -> Result<EvalContext> {
    JetTable::new(family, params, needed)?.context(point.0, point.1)
}

pub(crate) fn param_map(family: &SolutionFamily, params: &[f64]) -> BTreeMap<String, Sci> {
    family
        .params()
        .iter()
        .zip(params)
        .map(|(p, v)| (p.name.clone(), Sci(*v)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::builtin;
    use crate::symexpr::Symbol;

    #[test]
    fn grid_geometry() {
        let g = GridSpec::parse("-1, 1, 5, 0, 2, 3").unwrap();
        assert_eq!((g.h1(), g.h2()), (0.5, 1.0));
        assert_eq!((g.x1(4), g.x2(1)), (1.0, 1.0));
        assert_eq!(g.node(g.index(3, 2)), (3, 2));
        assert_eq!(g.far_corner(), (4, 2));
        let r = g.refined();
        assert_eq!((r.n1, r.n2, r.h1()), (9, 5, 0.25));
        assert!(GridSpec::parse("0,1,1,0,1,3").is_err());
        assert!(GridSpec::parse("1,0,3,0,1,3").is_err());
        assert!(GridSpec::parse("0,1,3").is_err());
    }

    #[test]
    fn kink_jets() {
        let m = builtin("sine-gordon").unwrap();
        let f = m.family("kink").unwrap();
        let j1 = JetIndex::new(1, &[1]).unwrap();
        let needed = [JetIndex::field_var(1), j1].into_iter().collect();
        let ctx = eval_jets(f, &[1.0, 0.0], (0.0, 0.0), &needed).unwrap();
        assert!(
            (ctx.get(&Symbol::Jet(JetIndex::field_var(1))).unwrap().re - std::f64::consts::PI)
                .abs()
                < 1e-14
        );
        assert!((ctx.get(&Symbol::Jet(j1)).unwrap().re - 2.0).abs() < 1e-14);
        let bad = [JetIndex::new(2, &[1]).unwrap()].into_iter().collect();
        assert!(matches!(
            eval_jets(f, &[1.0, 0.0], (0.0, 0.0), &bad),
            Err(Error::InvalidJet(_))
        ));
    }

    #[test]
    fn report_statistics() {
        let g = GridSpec::new((0.0, 1.0), 3, (0.0, 1.0), 3).unwrap();
        let mut v = vec![1.0; 9];
        v[g.index(1, 1)] = 0.5;
        let r = ResidualReport::from_nodes(&g, &v, true);
        assert_eq!(
            (r.max(), r.mean(), r.argmax, r.boundary_max_abs.0),
            (0.5, 0.5, [1, 1], 1.0)
        );
        let r = ResidualReport::from_nodes(&g, &v, false);
        assert!(r.max() >= r.mean() && r.mean() >= 0.0);
        assert_eq!(r.max(), 1.0);
    }
}
