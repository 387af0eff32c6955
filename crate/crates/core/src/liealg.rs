//! Matrices over the Lie algebra: symbolic (`MatrixExpr`) and numeric
//! (`NumericMatrix`), the orthonormal su(n) basis and the E³ identification.
//!
//! The basis is fixed to `e_j = σ_j / (2i)` for su(2) with metric
//! `⟨X, Y⟩ = −2 Re tr(XY)`, which makes `{e_j}` orthonormal so that the E³
//! projection is a coordinate read-off.

use std::fmt;
use std::ops::{Add, Mul, Sub};

use nalgebra::DMatrix;
use num_complex::Complex64;
use num_traits::Zero;
use smallvec::SmallVec;

use crate::error::{Error, Result};
use crate::symexpr::{
    simplify, total_derivative, Characteristic, EvalContext, Prolongation, ScalarExpr, Symbol,
};

/// Square matrix of scalar expressions, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct MatrixExpr {
    dim: usize,
    entries: Vec<ScalarExpr>,
}

impl MatrixExpr {
    pub fn new(dim: usize, entries: Vec<ScalarExpr>) -> Result<Self> {
        if entries.len() != dim * dim {
            return Err(Error::DimensionMismatch(format!(
                "{} entries for a {dim}x{dim} matrix",
                entries.len()
            )));
        }
        Ok(MatrixExpr { dim, entries })
    }

    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> ScalarExpr) -> Self {
        let mut entries = Vec::with_capacity(dim * dim);
        for r in 0..dim {
            for c in 0..dim {
                entries.push(f(r, c));
            }
        }
        MatrixExpr { dim, entries }
    }

    pub fn zeros(dim: usize) -> Self {
        Self::from_fn(dim, |_, _| ScalarExpr::zero())
    }

    /// Constant matrix with the given numeric entries (real and imaginary parts
    /// become float literals unless they are exactly representable small integers).
    pub fn constant(m: &NumericMatrix) -> Self {
        Self::from_fn(m.dim(), |r, c| {
            let z = m.get(r, c);
            let re = literal(z.re);
            let im = literal(z.im);
            simplify(&(re + im * ScalarExpr::imag()))
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, r: usize, c: usize) -> &ScalarExpr {
        &self.entries[r * self.dim + c]
    }

    pub fn entries(&self) -> &[ScalarExpr] {
        &self.entries
    }

    pub fn map(&self, f: impl FnMut(&ScalarExpr) -> ScalarExpr) -> Self {
        MatrixExpr {
            dim: self.dim,
            entries: self.entries.iter().map(f).collect(),
        }
    }

    pub fn try_map(&self, f: impl FnMut(&ScalarExpr) -> Result<ScalarExpr>) -> Result<Self> {
        Ok(MatrixExpr {
            dim: self.dim,
            entries: self.entries.iter().map(f).collect::<Result<_>>()?,
        })
    }

    fn same_dim(&self, other: &MatrixExpr) -> Result<()> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch(format!(
                "{0}x{0} vs {1}x{1}",
                self.dim, other.dim
            )));
        }
        Ok(())
    }

    pub fn add(&self, other: &MatrixExpr) -> Result<Self> {
        self.same_dim(other)?;
        Ok(Self::from_fn(self.dim, |r, c| {
            simplify(&(self.get(r, c).clone() + other.get(r, c).clone()))
        }))
    }

    pub fn sub(&self, other: &MatrixExpr) -> Result<Self> {
        self.same_dim(other)?;
        Ok(Self::from_fn(self.dim, |r, c| {
            simplify(&(self.get(r, c).clone() - other.get(r, c).clone()))
        }))
    }

    pub fn matmul(&self, other: &MatrixExpr) -> Result<Self> {
        self.same_dim(other)?;
        let n = self.dim;
        Ok(Self::from_fn(n, |r, c| {
            let terms = (0..n)
                .map(|k| self.get(r, k).clone() * other.get(k, c).clone())
                .collect();
            simplify(&ScalarExpr::sum(terms))
        }))
    }

    pub fn scale(&self, s: &ScalarExpr) -> Self {
        self.map(|e| simplify(&(s.clone() * e.clone())))
    }

    /// `AB − BA`.
    pub fn commutator(&self, other: &MatrixExpr) -> Result<Self> {
        self.matmul(other)?.sub(&other.matmul(self)?)
    }

    /// Entrywise total derivative `D_axis`.
    pub fn total_derivative(&self, axis: u8) -> Result<Self> {
        self.try_map(|e| total_derivative(e, axis))
    }

    /// Entrywise `pr w_R`.
    pub fn prolong(&self, r: &Characteristic) -> Result<Self> {
        let mut pr = Prolongation::new(r);
        self.try_map(|e| pr.apply(e))
    }

    pub fn partial(&self, s: &Symbol) -> Self {
        self.map(|e| crate::symexpr::partial(e, s))
    }

    pub fn simplify(&self) -> Self {
        self.map(simplify)
    }

    pub fn free_symbols(&self) -> std::collections::BTreeSet<Symbol> {
        self.entries.iter().flat_map(|e| e.free_symbols()).collect()
    }

    pub fn contains_param(&self) -> bool {
        self.entries.iter().any(ScalarExpr::contains_param)
    }

    pub fn evaluate(&self, ctx: &EvalContext) -> Result<NumericMatrix> {
        let data = self
            .entries
            .iter()
            .map(|e| crate::symexpr::evaluate(e, ctx))
            .collect::<std::result::Result<SmallVec<_>, _>>()?;
        Ok(NumericMatrix {
            dim: self.dim,
            data,
        })
    }
}

fn literal(x: f64) -> ScalarExpr {
    if x.fract() == 0.0 && x.abs() < 1e15 {
        ScalarExpr::int(x as i64)
    } else {
        ScalarExpr::float(x)
    }
}

/// Square complex matrix, row-major. Entries are finite.
#[derive(Clone, PartialEq)]
pub struct NumericMatrix {
    dim: usize,
    data: SmallVec<[Complex64; 4]>,
}

impl fmt::Debug for NumericMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("[")?;
        for r in 0..self.dim {
            if r > 0 {
                f.write_str("; ")?;
            }
            for c in 0..self.dim {
                if c > 0 {
                    f.write_str(", ")?;
                }
                let z = self.get(r, c);
                write!(f, "{:.6}{:+.6}i", z.re, z.im)?;
            }
        }
        f.write_str("]")
    }
}

impl NumericMatrix {
    pub fn new(dim: usize, data: Vec<Complex64>) -> Result<Self> {
        if data.len() != dim * dim {
            return Err(Error::DimensionMismatch(format!(
                "{} entries for a {dim}x{dim} matrix",
                data.len()
            )));
        }
        if data.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::DimensionMismatch("non-finite matrix entry".into()));
        }
        Ok(NumericMatrix {
            dim,
            data: data.into(),
        })
    }

    pub(crate) fn from_slice(dim: usize, data: &[Complex64]) -> Self {
        debug_assert_eq!(data.len(), dim * dim);
        NumericMatrix {
            dim,
            data: SmallVec::from_slice(data),
        }
    }

    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut data = SmallVec::with_capacity(dim * dim);
        for r in 0..dim {
            for c in 0..dim {
                data.push(f(r, c));
            }
        }
        NumericMatrix { dim, data }
    }

    pub fn zeros(dim: usize) -> Self {
        Self::from_fn(dim, |_, _| Complex64::zero())
    }

    pub fn identity(dim: usize) -> Self {
        Self::from_fn(dim, |r, c| {
            if r == c {
                Complex64::new(1.0, 0.0)
            } else {
                Complex64::zero()
            }
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, r: usize, c: usize) -> Complex64 {
        self.data[r * self.dim + c]
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data
            .iter()
            .all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn scale(&self, s: Complex64) -> Self {
        NumericMatrix {
            dim: self.dim,
            data: self.data.iter().map(|z| z * s).collect(),
        }
    }

    pub fn scale_re(&self, s: f64) -> Self {
        NumericMatrix {
            dim: self.dim,
            data: self.data.iter().map(|z| z * s).collect(),
        }
    }

    /// `self + s·other`.
    pub fn axpy(&self, s: f64, other: &NumericMatrix) -> Self {
        debug_assert_eq!(self.dim, other.dim);
        NumericMatrix {
            dim: self.dim,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a + b * s)
                .collect(),
        }
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.dim, |r, c| self.get(c, r).conj())
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.dim).map(|k| self.get(k, k)).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// `‖X + X†‖_F`.
    pub fn anti_hermitian_defect(&self) -> f64 {
        let mut acc = 0.0;
        for r in 0..self.dim {
            for c in 0..self.dim {
                acc += (self.get(r, c) + self.get(c, r).conj()).norm_sqr();
            }
        }
        acc.sqrt()
    }

    /// `‖Φ†Φ − I‖_F`.
    pub fn unitarity_defect(&self) -> f64 {
        (&(&self.adjoint() * self) - &NumericMatrix::identity(self.dim)).frobenius_norm()
    }

    fn check_dim(&self, other: &NumericMatrix) -> Result<()> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch(format!(
                "{0}x{0} vs {1}x{1}",
                self.dim, other.dim
            )));
        }
        Ok(())
    }

    pub fn try_mul(&self, other: &NumericMatrix) -> Result<Self> {
        self.check_dim(other)?;
        Ok(self * other)
    }

    /// `AB − BA`.
    pub fn commutator(&self, other: &NumericMatrix) -> Result<Self> {
        self.check_dim(other)?;
        Ok(&(self * other) - &(other * self))
    }

    fn to_dmatrix(&self) -> DMatrix<Complex64> {
        DMatrix::from_row_slice(self.dim, self.dim, &self.data)
    }

    pub fn determinant(&self) -> Complex64 {
        match self.dim {
            1 => self.data[0],
            2 => self.data[0] * self.data[3] - self.data[1] * self.data[2],
            _ => self.to_dmatrix().determinant(),
        }
    }

    /// Inverse; fails when `|det| ≤ 1e−12`.
    pub fn inverse(&self) -> Result<Self> {
        let det = self.determinant();
        if det.norm() <= 1e-12 {
            return Err(Error::SingularMatrix { det: det.norm() });
        }
        match self.dim {
            1 => Ok(Self::from_fn(1, |_, _| Complex64::new(1.0, 0.0) / det)),
            2 => {
                let d = &self.data;
                Ok(NumericMatrix::from_slice(
                    2,
                    &[d[3] / det, -d[1] / det, -d[2] / det, d[0] / det],
                ))
            }
            _ => {
                let inv = self
                    .to_dmatrix()
                    .try_inverse()
                    .ok_or(Error::SingularMatrix { det: det.norm() })?;
                Ok(Self::from_fn(self.dim, |r, c| inv[(r, c)]))
            }
        }
    }

    /// `Φ⁻¹ X Φ`.
    pub fn conjugate_by(&self, phi: &NumericMatrix) -> Result<Self> {
        Ok(&(&phi.inverse()? * self) * phi)
    }
}

impl Mul for &NumericMatrix {
    type Output = NumericMatrix;

    fn mul(self, rhs: &NumericMatrix) -> NumericMatrix {
        assert_eq!(self.dim, rhs.dim, "matrix dimension mismatch");
        let n = self.dim;
        if n == 2 {
            let (a, b) = (&self.data, &rhs.data);
            return NumericMatrix::from_slice(
                2,
                &[
                    a[0] * b[0] + a[1] * b[2],
                    a[0] * b[1] + a[1] * b[3],
                    a[2] * b[0] + a[3] * b[2],
                    a[2] * b[1] + a[3] * b[3],
                ],
            );
        }
        NumericMatrix::from_fn(n, |r, c| {
            (0..n).map(|k| self.get(r, k) * rhs.get(k, c)).sum()
        })
    }
}

impl Add for &NumericMatrix {
    type Output = NumericMatrix;

    fn add(self, rhs: &NumericMatrix) -> NumericMatrix {
        assert_eq!(self.dim, rhs.dim, "matrix dimension mismatch");
        NumericMatrix {
            dim: self.dim,
            data: self
                .data
                .iter()
                .zip(&rhs.data)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }
}

impl Sub for &NumericMatrix {
    type Output = NumericMatrix;

    fn sub(self, rhs: &NumericMatrix) -> NumericMatrix {
        assert_eq!(self.dim, rhs.dim, "matrix dimension mismatch");
        NumericMatrix {
            dim: self.dim,
            data: self
                .data
                .iter()
                .zip(&rhs.data)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }
}

/// The Pauli matrices σ₁, σ₂, σ₃.
pub fn pauli() -> [NumericMatrix; 3] {
    let o = Complex64::zero();
    let l = Complex64::new(1.0, 0.0);
    let i = Complex64::i();
    [
        NumericMatrix::from_slice(2, &[o, l, l, o]),
        NumericMatrix::from_slice(2, &[o, -i, i, o]),
        NumericMatrix::from_slice(2, &[l, o, o, -l]),
    ]
}

/// Orthonormal basis of su(n) for the metric `−2 Re tr(XY)`.
#[derive(Clone, Debug)]
pub struct AlgebraBasis {
    dim: usize,
    elements: Vec<NumericMatrix>,
}

impl AlgebraBasis {
    /// `e_j = σ_j / (2i)`.
    pub fn su2() -> Self {
        let half_over_i = Complex64::new(0.0, -0.5);
        AlgebraBasis {
            dim: 2,
            elements: pauli().iter().map(|s| s.scale(half_over_i)).collect(),
        }
    }

    /// Generalized Gell-Mann basis divided by `2i`; reduces to [`AlgebraBasis::su2`] for n = 2.
    pub fn su(n: usize) -> Self {
        assert!(n >= 2, "su(n) needs n >= 2");
        if n == 2 {
            return Self::su2();
        }
        let half_over_i = Complex64::new(0.0, -0.5);
        let mut elements = Vec::with_capacity(n * n - 1);
        for j in 0..n {
            for k in (j + 1)..n {
                let sym = NumericMatrix::from_fn(n, |r, c| {
                    if (r, c) == (j, k) || (r, c) == (k, j) {
                        Complex64::new(1.0, 0.0)
                    } else {
                        Complex64::zero()
                    }
                });
                let asym = NumericMatrix::from_fn(n, |r, c| {
                    if (r, c) == (j, k) {
                        -Complex64::i()
                    } else if (r, c) == (k, j) {
                        Complex64::i()
                    } else {
                        Complex64::zero()
                    }
                });
                elements.push(sym.scale(half_over_i));
                elements.push(asym.scale(half_over_i));
            }
        }
        for l in 1..n {
            let norm = (2.0 / (l * (l + 1)) as f64).sqrt();
            let diag = NumericMatrix::from_fn(n, |r, c| {
                if r != c {
                    Complex64::zero()
                } else if r < l {
                    Complex64::new(norm, 0.0)
                } else if r == l {
                    Complex64::new(-(l as f64) * norm, 0.0)
                } else {
                    Complex64::zero()
                }
            });
            elements.push(diag.scale(half_over_i));
        }
        AlgebraBasis { dim: n, elements }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn elements(&self) -> &[NumericMatrix] {
        &self.elements
    }

    /// `Σ x_j e_j`.
    pub fn combine(&self, coords: &[f64]) -> NumericMatrix {
        assert_eq!(coords.len(), self.elements.len());
        coords
            .iter()
            .zip(&self.elements)
            .fold(NumericMatrix::zeros(self.dim), |acc, (x, e)| {
                acc.axpy(*x, e)
            })
    }

    /// Coordinates `x_j = ⟨X, e_j⟩` and the off-algebra defect `‖X − Σ x_j e_j‖_F`.
    pub fn coordinates(&self, x: &NumericMatrix) -> (Vec<f64>, f64) {
        let coords: Vec<f64> = self
            .elements
            .iter()
            .map(|e| inner_product_unchecked(x, e))
            .collect();
        let defect = (x - &self.combine(&coords)).frobenius_norm();
        (coords, defect)
    }
}

fn inner_product_unchecked(x: &NumericMatrix, y: &NumericMatrix) -> f64 {
    -2.0 * (x * y).trace().re
}

/// `⟨X, Y⟩ = −2 Re tr(XY)`; positive definite on su(n).
pub fn inner_product(x: &NumericMatrix, y: &NumericMatrix) -> Result<f64> {
    x.check_dim(y)?;
    for m in [x, y] {
        if m.trace().norm() > 1e-8 || m.anti_hermitian_defect() > 1e-8 {
            log::warn!("inner product argument is outside the algebra: {m:?}");
        }
    }
    Ok(inner_product_unchecked(x, y))
}

/// E³ coordinates of an su(2) element with respect to `e_j = σ_j/(2i)`.
pub fn to_e3(x: &NumericMatrix) -> Result<[f64; 3]> {
    if x.dim() != 2 {
        return Err(Error::DimensionMismatch(format!(
            "E³ identification needs 2x2, got {0}x{0}",
            x.dim()
        )));
    }
    let (c, defect) = AlgebraBasis::su2().coordinates(x);
    if defect > 1e-6 {
        return Err(Error::NotInAlgebra(defect));
    }
    Ok([c[0], c[1], c[2]])
}
