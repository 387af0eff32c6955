//! Immutable symbolic expressions over the jet space.
//!
//! The independent variables are `x1`, `x2`, the spectral parameter `lambda`,
//! jet coordinates `θ^k_J` and named family parameters. Expressions are
//! reference counted trees; every operation returns a new tree.

mod calculus;
mod eval;
mod parse;
mod print;
mod simplify;

use std::cmp::Ordering;
use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

use num_rational::Rational64;
use num_traits::{CheckedAdd, CheckedMul, One, Signed, Zero};

pub use calculus::{partial, prolong_scalar, total_derivative, Prolongation};
pub use eval::{evaluate, Compiled, EvalContext, EvalError};
pub use parse::{parse_expr, ParseError, ParseErrorKind};
pub use simplify::simplify;

use crate::error::Error;

/// A jet coordinate `θ^k_J`. The multi-index `J` over `{1, 2}` is stored as a
/// multiset (number of 1s and number of 2s), so `θ_{12}` and `θ_{21}` are the
/// same coordinate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct JetIndex {
    field: usize,
    d1: u32,
    d2: u32,
}

impl JetIndex {
    /// The undifferentiated field `θ^k` (fields are numbered from 1).
    pub fn field_var(field: usize) -> Self {
        assert!(field >= 1, "jet fields are numbered from 1");
        JetIndex {
            field,
            d1: 0,
            d2: 0,
        }
    }

    /// `θ^k_J` for a multi-index given as a sequence of axes (each 1 or 2).
    pub fn new(field: usize, derivs: &[u8]) -> Result<Self, Error> {
        if field == 0 {
            return Err(Error::InvalidJet(format!("field index 0 in θ^{field}")));
        }
        let mut jet = JetIndex::field_var(field);
        for &d in derivs {
            jet = match d {
                1 | 2 => jet.raised(d),
                _ => {
                    return Err(Error::InvalidJet(format!(
                        "derivative axis {d} (must be 1 or 2)"
                    )))
                }
            };
        }
        Ok(jet)
    }

    pub fn field(&self) -> usize {
        self.field
    }

    /// Number of derivatives along `axis`.
    pub fn count(&self, axis: u8) -> u32 {
        match axis {
            1 => self.d1,
            2 => self.d2,
            _ => 0,
        }
    }

    /// |J|.
    pub fn order(&self) -> u32 {
        self.d1 + self.d2
    }

    /// `θ^k_{J,axis}`.
    pub fn raised(&self, axis: u8) -> Self {
        let mut next = *self;
        match axis {
            1 => next.d1 += 1,
            2 => next.d2 += 1,
            _ => panic!("axis must be 1 or 2, got {axis}"),
        }
        next
    }

    /// The multi-index in canonical (ascending) order.
    pub fn derivs(&self) -> Vec<u8> {
        let mut out = vec![1u8; self.d1 as usize];
        out.extend(std::iter::repeat_n(2u8, self.d2 as usize));
        out
    }
}

impl fmt::Display for JetIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "theta{}", self.field)?;
        if self.order() > 0 {
            f.write_str("_")?;
            for d in self.derivs() {
                write!(f, "{d}")?;
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Symbol {
    X1,
    X2,
    Lambda,
    Jet(JetIndex),
    Param(String),
}

impl Symbol {
    pub fn coordinate(axis: u8) -> Self {
        match axis {
            1 => Symbol::X1,
            2 => Symbol::X2,
            _ => panic!("axis must be 1 or 2, got {axis}"),
        }
    }

    pub fn is_param(&self) -> bool {
        matches!(self, Symbol::Param(_))
    }
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Symbol::X1 => f.write_str("x1"),
            Symbol::X2 => f.write_str("x2"),
            Symbol::Lambda => f.write_str("lambda"),
            Symbol::Jet(j) => j.fmt(f),
            Symbol::Param(p) => f.write_str(p),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Func {
    Sin,
    Cos,
    Tan,
    Atan,
    Exp,
    Log,
    Sinh,
    Cosh,
    Tanh,
    Sqrt,
}

impl Func {
    pub const ALL: [Func; 10] = [
        Func::Sin,
        Func::Cos,
        Func::Tan,
        Func::Atan,
        Func::Exp,
        Func::Log,
        Func::Sinh,
        Func::Cosh,
        Func::Tanh,
        Func::Sqrt,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Tan => "tan",
            Func::Atan => "atan",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sinh => "sinh",
            Func::Cosh => "cosh",
            Func::Tanh => "tanh",
            Func::Sqrt => "sqrt",
        }
    }

    pub fn from_name(name: &str) -> Option<Func> {
        Func::ALL.iter().copied().find(|f| f.name() == name)
    }
}

#[derive(Debug, PartialEq)]
pub enum Node {
    Rational(Rational64),
    Float(f64),
    /// The imaginary unit.
    I,
    Sym(Symbol),
    Sum(Vec<ScalarExpr>),
    Product(Vec<ScalarExpr>),
    Pow(ScalarExpr, ScalarExpr),
    Neg(ScalarExpr),
    Func(Func, ScalarExpr),
}

/// A scalar expression. Cloning is cheap.
#[derive(Clone)]
pub struct ScalarExpr(Arc<Node>);

impl PartialEq for ScalarExpr {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.0, &other.0) || self.0 == other.0
    }
}

impl fmt::Debug for ScalarExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ScalarExpr({self})")
    }
}

impl ScalarExpr {
    fn from_node(node: Node) -> Self {
        ScalarExpr(Arc::new(node))
    }

    pub fn node(&self) -> &Node {
        &self.0
    }

    pub fn int(n: i64) -> Self {
        Self::from_node(Node::Rational(Rational64::from_integer(n)))
    }

    pub fn zero() -> Self {
        Self::int(0)
    }

    pub fn one() -> Self {
        Self::int(1)
    }

    pub fn rational(r: Rational64) -> Self {
        Self::from_node(Node::Rational(r))
    }

    pub fn float(x: f64) -> Self {
        assert!(x.is_finite(), "float constants must be finite");
        Self::from_node(Node::Float(x))
    }

    pub fn imag() -> Self {
        Self::from_node(Node::I)
    }

    pub fn symbol(s: Symbol) -> Self {
        Self::from_node(Node::Sym(s))
    }

    pub fn x(axis: u8) -> Self {
        Self::symbol(Symbol::coordinate(axis))
    }

    pub fn lambda() -> Self {
        Self::symbol(Symbol::Lambda)
    }

    pub fn jet(j: JetIndex) -> Self {
        Self::symbol(Symbol::Jet(j))
    }

    pub fn param(name: &str) -> Self {
        Self::symbol(Symbol::Param(name.to_string()))
    }

    /// Sum node; nested sums are flattened, nothing else is rewritten.
    pub fn sum(terms: Vec<ScalarExpr>) -> Self {
        let mut flat = Vec::with_capacity(terms.len());
        for t in terms {
            match t.node() {
                Node::Sum(inner) => flat.extend(inner.iter().cloned()),
                _ => flat.push(t),
            }
        }
        match flat.len() {
            0 => Self::zero(),
            1 => flat.pop().unwrap(),
            _ => Self::from_node(Node::Sum(flat)),
        }
    }

    /// Product node; nested products are flattened, nothing else is rewritten.
    pub fn product(factors: Vec<ScalarExpr>) -> Self {
        let mut flat = Vec::with_capacity(factors.len());
        for t in factors {
            match t.node() {
                Node::Product(inner) => flat.extend(inner.iter().cloned()),
                _ => flat.push(t),
            }
        }
        match flat.len() {
            0 => Self::one(),
            1 => flat.pop().unwrap(),
            _ => Self::from_node(Node::Product(flat)),
        }
    }

    pub fn pow(base: ScalarExpr, exponent: ScalarExpr) -> Self {
        Self::from_node(Node::Pow(base, exponent))
    }

    /// Negation. Numeric literals absorb the sign and double negation cancels.
    #[allow(clippy::should_implement_trait)]
    pub fn neg(inner: ScalarExpr) -> Self {
        match inner.node() {
            Node::Rational(r) => Self::rational(-r),
            Node::Float(x) => Self::from_node(Node::Float(-x)),
            Node::Neg(x) => x.clone(),
            _ => Self::from_node(Node::Neg(inner)),
        }
    }

    pub fn func(f: Func, arg: ScalarExpr) -> Self {
        Self::from_node(Node::Func(f, arg))
    }

    pub fn as_rational(&self) -> Option<Rational64> {
        match self.node() {
            Node::Rational(r) => Some(*r),
            _ => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        match self.node() {
            Node::Rational(r) => r.is_zero(),
            Node::Float(x) => *x == 0.0,
            _ => false,
        }
    }

    pub fn is_one(&self) -> bool {
        match self.node() {
            Node::Rational(r) => r.is_one(),
            Node::Float(x) => *x == 1.0,
            _ => false,
        }
    }

    /// Rational or float literal.
    pub fn is_number(&self) -> bool {
        matches!(self.node(), Node::Rational(_) | Node::Float(_))
    }

    /// Number literal with the sign bit set.
    pub(crate) fn is_negative_number(&self) -> bool {
        match self.node() {
            Node::Rational(r) => r.is_negative(),
            Node::Float(x) => x.is_sign_negative(),
            _ => false,
        }
    }

    /// Every symbol occurring in the tree.
    pub fn free_symbols(&self) -> BTreeSet<Symbol> {
        let mut out = BTreeSet::new();
        self.collect_symbols(&mut out);
        out
    }

    fn collect_symbols(&self, out: &mut BTreeSet<Symbol>) {
        match self.node() {
            Node::Sym(s) => {
                out.insert(s.clone());
            }
            Node::Sum(xs) | Node::Product(xs) => xs.iter().for_each(|x| x.collect_symbols(out)),
            Node::Pow(b, e) => {
                b.collect_symbols(out);
                e.collect_symbols(out);
            }
            Node::Neg(x) | Node::Func(_, x) => x.collect_symbols(out),
            Node::Rational(_) | Node::Float(_) | Node::I => {}
        }
    }

    pub fn jets(&self) -> BTreeSet<JetIndex> {
        self.free_symbols()
            .into_iter()
            .filter_map(|s| match s {
                Symbol::Jet(j) => Some(j),
                _ => None,
            })
            .collect()
    }

    pub fn contains_param(&self) -> bool {
        self.free_symbols().iter().any(Symbol::is_param)
    }

    pub fn depends_on(&self, s: &Symbol) -> bool {
        match self.node() {
            Node::Sym(t) => t == s,
            Node::Sum(xs) | Node::Product(xs) => xs.iter().any(|x| x.depends_on(s)),
            Node::Pow(b, e) => b.depends_on(s) || e.depends_on(s),
            Node::Neg(x) | Node::Func(_, x) => x.depends_on(s),
            Node::Rational(_) | Node::Float(_) | Node::I => false,
        }
    }

    /// Replace every occurrence of `s` by `with`.
    pub fn substitute(&self, s: &Symbol, with: &ScalarExpr) -> ScalarExpr {
        if !self.depends_on(s) {
            return self.clone();
        }
        match self.node() {
            Node::Sym(_) => with.clone(),
            Node::Sum(xs) => Self::sum(xs.iter().map(|x| x.substitute(s, with)).collect()),
            Node::Product(xs) => Self::product(xs.iter().map(|x| x.substitute(s, with)).collect()),
            Node::Pow(b, e) => Self::pow(b.substitute(s, with), e.substitute(s, with)),
            Node::Neg(x) => Self::neg(x.substitute(s, with)),
            Node::Func(f, x) => Self::func(*f, x.substitute(s, with)),
            Node::Rational(_) | Node::Float(_) | Node::I => self.clone(),
        }
    }

    pub fn node_count(&self) -> usize {
        1 + match self.node() {
            Node::Sum(xs) | Node::Product(xs) => xs.iter().map(|x| x.node_count()).sum(),
            Node::Pow(b, e) => b.node_count() + e.node_count(),
            Node::Neg(x) | Node::Func(_, x) => x.node_count(),
            Node::Rational(_) | Node::Float(_) | Node::I | Node::Sym(_) => 0,
        }
    }
}

/// Total order used to canonicalize sums and products.
pub(crate) fn cmp_expr(a: &ScalarExpr, b: &ScalarExpr) -> Ordering {
    fn rank(n: &Node) -> u8 {
        match n {
            Node::Rational(_) => 0,
            Node::Float(_) => 1,
            Node::I => 2,
            Node::Sym(_) => 3,
            Node::Func(..) => 4,
            Node::Pow(..) => 5,
            Node::Product(_) => 6,
            Node::Sum(_) => 7,
            Node::Neg(_) => 8,
        }
    }
    fn cmp_list(a: &[ScalarExpr], b: &[ScalarExpr]) -> Ordering {
        for (x, y) in a.iter().zip(b) {
            let c = cmp_expr(x, y);
            if c != Ordering::Equal {
                return c;
            }
        }
        a.len().cmp(&b.len())
    }
    if Arc::ptr_eq(&a.0, &b.0) {
        return Ordering::Equal;
    }
    match (a.node(), b.node()) {
        (Node::Rational(x), Node::Rational(y)) => x.cmp(y),
        (Node::Float(x), Node::Float(y)) => x.total_cmp(y),
        (Node::I, Node::I) => Ordering::Equal,
        (Node::Sym(x), Node::Sym(y)) => x.cmp(y),
        (Node::Func(f, x), Node::Func(g, y)) => f.cmp(g).then_with(|| cmp_expr(x, y)),
        (Node::Pow(b1, e1), Node::Pow(b2, e2)) => cmp_expr(b1, b2).then_with(|| cmp_expr(e1, e2)),
        (Node::Product(x), Node::Product(y)) | (Node::Sum(x), Node::Sum(y)) => cmp_list(x, y),
        (Node::Neg(x), Node::Neg(y)) => cmp_expr(x, y),
        (x, y) => rank(x).cmp(&rank(y)),
    }
}

/// Builders with local 0/1 absorption and rational constant folding, used by
/// the calculus routines to keep derivative trees small.
pub(crate) mod build {
    use super::*;

    pub fn add(a: ScalarExpr, b: ScalarExpr) -> ScalarExpr {
        if a.is_zero() {
            return b;
        }
        if b.is_zero() {
            return a;
        }
        if let (Some(x), Some(y)) = (a.as_rational(), b.as_rational()) {
            if let Some(s) = x.checked_add(&y) {
                return ScalarExpr::rational(s);
            }
        }
        ScalarExpr::sum(vec![a, b])
    }

    pub fn sub(a: ScalarExpr, b: ScalarExpr) -> ScalarExpr {
        add(a, neg(b))
    }

    pub fn neg(a: ScalarExpr) -> ScalarExpr {
        if a.is_zero() {
            return ScalarExpr::zero();
        }
        ScalarExpr::neg(a)
    }

    pub fn mul(a: ScalarExpr, b: ScalarExpr) -> ScalarExpr {
        if a.is_zero() || b.is_zero() {
            return ScalarExpr::zero();
        }
        if a.is_one() {
            return b;
        }
        if b.is_one() {
            return a;
        }
        if let (Some(x), Some(y)) = (a.as_rational(), b.as_rational()) {
            if let Some(p) = x.checked_mul(&y) {
                return ScalarExpr::rational(p);
            }
        }
        if a.as_rational() == Some(-Rational64::one()) {
            return neg(b);
        }
        if b.as_rational() == Some(-Rational64::one()) {
            return neg(a);
        }
        ScalarExpr::product(vec![a, b])
    }

    pub fn pow(b: ScalarExpr, e: ScalarExpr) -> ScalarExpr {
        if e.is_zero() {
            return ScalarExpr::one();
        }
        if e.is_one() {
            return b;
        }
        if b.is_one() {
            return ScalarExpr::one();
        }
        ScalarExpr::pow(b, e)
    }

    pub fn rat(p: i64, q: i64) -> ScalarExpr {
        ScalarExpr::rational(Rational64::new(p, q))
    }
}

impl std::ops::Add for ScalarExpr {
    type Output = ScalarExpr;
    fn add(self, rhs: ScalarExpr) -> ScalarExpr {
        build::add(self, rhs)
    }
}

impl std::ops::Sub for ScalarExpr {
    type Output = ScalarExpr;
    fn sub(self, rhs: ScalarExpr) -> ScalarExpr {
        build::sub(self, rhs)
    }
}

impl std::ops::Mul for ScalarExpr {
    type Output = ScalarExpr;
    fn mul(self, rhs: ScalarExpr) -> ScalarExpr {
        build::mul(self, rhs)
    }
}

impl std::ops::Neg for ScalarExpr {
    type Output = ScalarExpr;
    fn neg(self) -> ScalarExpr {
        build::neg(self)
    }
}

/// An evolutionary characteristic `R = (R_1, …, R_N)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Characteristic {
    components: Vec<ScalarExpr>,
}

impl Characteristic {
    /// Components may depend on `x1`, `x2` and jet variables only.
    pub fn new(components: Vec<ScalarExpr>) -> Result<Self, Error> {
        for (k, c) in components.iter().enumerate() {
            for s in c.free_symbols() {
                match s {
                    Symbol::Lambda | Symbol::Param(_) => {
                        return Err(Error::InvalidCharacteristic(format!(
                            "component R{} depends on `{s}`",
                            k + 1
                        )))
                    }
                    Symbol::Jet(j) if j.field() > components.len() => {
                        return Err(Error::InvalidCharacteristic(format!(
                            "component R{} references `{j}` but there are only {} fields",
                            k + 1,
                            components.len()
                        )))
                    }
                    _ => {}
                }
            }
        }
        Ok(Characteristic { components })
    }

    pub fn zero(fields: usize) -> Self {
        Characteristic {
            components: vec![ScalarExpr::zero(); fields],
        }
    }

    pub fn components(&self) -> &[ScalarExpr] {
        &self.components
    }

    pub fn field_count(&self) -> usize {
        self.components.len()
    }

    pub fn component(&self, field: usize) -> Option<&ScalarExpr> {
        field.checked_sub(1).and_then(|k| self.components.get(k))
    }

    pub fn is_zero(&self) -> bool {
        self.components.iter().all(ScalarExpr::is_zero)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jet_index_is_order_insensitive() {
        let a = JetIndex::new(1, &[1, 2]).unwrap();
        let b = JetIndex::new(1, &[2, 1]).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.to_string(), "theta1_12");
        assert_eq!(JetIndex::field_var(2).to_string(), "theta2");
        assert_eq!(
            JetIndex::new(2, &[2, 1, 1]).unwrap().derivs(),
            vec![1, 1, 2]
        );
        assert!(JetIndex::new(1, &[3]).is_err());
    }

    #[test]
    fn free_symbols_of_product() {
        let e = parse_expr("cos(theta1_1)*theta1_12").unwrap();
        let syms: Vec<String> = e.free_symbols().iter().map(|s| s.to_string()).collect();
        assert_eq!(syms, vec!["theta1_1", "theta1_12"]);
    }

    #[test]
    fn characteristic_rejects_lambda_and_params() {
        assert!(Characteristic::new(vec![parse_expr("lambda*theta1").unwrap()]).is_err());
        assert!(Characteristic::new(vec![parse_expr("a*theta1").unwrap()]).is_err());
        assert!(Characteristic::new(vec![parse_expr("theta2").unwrap()]).is_err());
        assert!(Characteristic::new(vec![parse_expr("x1*theta1_1").unwrap()]).is_ok());
    }

    #[test]
    fn neg_folds_literals() {
        assert_eq!(ScalarExpr::neg(ScalarExpr::int(2)), ScalarExpr::int(-2));
        let x = ScalarExpr::x(1);
        assert_eq!(ScalarExpr::neg(ScalarExpr::neg(x.clone())), x);
    }
}
