//! Partial derivatives, total derivatives and prolongation of evolutionary
//! vector fields. Jet coordinates are mutually independent symbols.

use std::collections::HashMap;

use num_traits::One;

use super::build::{add, mul, neg, pow, rat, sub};
use super::{simplify, Characteristic, Func, JetIndex, Node, ScalarExpr, Symbol};
use crate::error::Error;

/// Exact partial derivative `∂e/∂s`.
pub fn partial(e: &ScalarExpr, s: &Symbol) -> ScalarExpr {
    simplify(&diff(e, s))
}

fn diff(e: &ScalarExpr, s: &Symbol) -> ScalarExpr {
    if !e.depends_on(s) {
        return ScalarExpr::zero();
    }
    match e.node() {
        Node::Sym(_) => ScalarExpr::one(),
        Node::Rational(_) | Node::Float(_) | Node::I => ScalarExpr::zero(),
        Node::Sum(ts) => ts
            .iter()
            .fold(ScalarExpr::zero(), |acc, t| add(acc, diff(t, s))),
        Node::Product(fs) => {
            let mut acc = ScalarExpr::zero();
            for (k, f) in fs.iter().enumerate() {
                if !f.depends_on(s) {
                    continue;
                }
                let mut term = diff(f, s);
                for (m, g) in fs.iter().enumerate() {
                    if m != k {
                        term = mul(term, g.clone());
                    }
                }
                acc = add(acc, term);
            }
            acc
        }
        Node::Neg(x) => neg(diff(x, s)),
        Node::Pow(b, ex) => {
            if !ex.depends_on(s) {
                // e · b^(e-1) · b'
                let lowered = match ex.as_rational() {
                    Some(r) => ScalarExpr::rational(r - num_rational::Rational64::one()),
                    None => sub(ex.clone(), ScalarExpr::one()),
                };
                mul(mul(ex.clone(), pow(b.clone(), lowered)), diff(b, s))
            } else {
                // b^e · (e' log b + e b'/b)
                let log_term = mul(diff(ex, s), ScalarExpr::func(Func::Log, b.clone()));
                let base_term = mul(
                    mul(ex.clone(), diff(b, s)),
                    ScalarExpr::pow(b.clone(), ScalarExpr::int(-1)),
                );
                mul(e.clone(), add(log_term, base_term))
            }
        }
        Node::Func(f, x) => {
            let inner = diff(x, s);
            let outer = match f {
                Func::Sin => ScalarExpr::func(Func::Cos, x.clone()),
                Func::Cos => neg(ScalarExpr::func(Func::Sin, x.clone())),
                Func::Tan => {
                    ScalarExpr::pow(ScalarExpr::func(Func::Cos, x.clone()), ScalarExpr::int(-2))
                }
                Func::Atan => ScalarExpr::pow(
                    add(
                        ScalarExpr::one(),
                        ScalarExpr::pow(x.clone(), ScalarExpr::int(2)),
                    ),
                    ScalarExpr::int(-1),
                ),
                Func::Exp => e.clone(),
                Func::Log => ScalarExpr::pow(x.clone(), ScalarExpr::int(-1)),
                Func::Sinh => ScalarExpr::func(Func::Cosh, x.clone()),
                Func::Cosh => ScalarExpr::func(Func::Sinh, x.clone()),
                Func::Tanh => sub(
                    ScalarExpr::one(),
                    ScalarExpr::pow(ScalarExpr::func(Func::Tanh, x.clone()), ScalarExpr::int(2)),
                ),
                Func::Sqrt => mul(rat(1, 2), ScalarExpr::pow(e.clone(), ScalarExpr::int(-1))),
            };
            mul(outer, inner)
        }
    }
}

fn check_axis(axis: u8) {
    assert!(axis == 1 || axis == 2, "axis must be 1 or 2, got {axis}");
}

fn reject_params(e: &ScalarExpr) -> Result<(), Error> {
    if let Some(p) = e.free_symbols().into_iter().find(Symbol::is_param) {
        return Err(Error::ParameterInJetCalculus(p.to_string()));
    }
    Ok(())
}

/// `D_axis e = ∂e/∂x^axis + Σ θ^k_{J,axis} ∂e/∂θ^k_J`, summed over the jet
/// variables present in `e`.
pub fn total_derivative(e: &ScalarExpr, axis: u8) -> Result<ScalarExpr, Error> {
    check_axis(axis);
    reject_params(e)?;
    Ok(total_derivative_unchecked(e, axis))
}

fn total_derivative_unchecked(e: &ScalarExpr, axis: u8) -> ScalarExpr {
    let mut acc = diff(e, &Symbol::coordinate(axis));
    for j in e.jets() {
        let d = diff(e, &Symbol::Jet(j));
        acc = add(acc, mul(ScalarExpr::jet(j.raised(axis)), d));
    }
    simplify(&acc)
}

/// Prolongation `pr w_R` of the evolutionary vector field with characteristic
/// `R`. Caches the total derivatives `D_J R^k` across applications.
pub struct Prolongation<'a> {
    r: &'a Characteristic,
    cache: HashMap<JetIndex, ScalarExpr>,
}

impl<'a> Prolongation<'a> {
    pub fn new(r: &'a Characteristic) -> Self {
        Prolongation {
            r,
            cache: HashMap::new(),
        }
    }

    /// `D_J R^k` for the jet coordinate `θ^k_J`.
    pub fn coefficient(&mut self, j: JetIndex) -> ScalarExpr {
        if let Some(c) = self.cache.get(&j) {
            return c.clone();
        }
        let c = if j.order() == 0 {
            self.r
                .component(j.field())
                .cloned()
                .unwrap_or_else(ScalarExpr::zero)
        } else {
            // D_J is order independent, so peel one axis off whichever count is nonzero.
            let (axis, lower) = if j.count(2) > 0 {
                (
                    2,
                    JetIndex {
                        d2: j.count(2) - 1,
                        ..j
                    },
                )
            } else {
                (
                    1,
                    JetIndex {
                        d1: j.count(1) - 1,
                        ..j
                    },
                )
            };
            let below = self.coefficient(lower);
            total_derivative_unchecked(&below, axis)
        };
        self.cache.insert(j, c.clone());
        c
    }

    /// `pr w_R (e) = Σ_{θ^k_J in e} (D_J R^k) ∂e/∂θ^k_J`.
    pub fn apply(&mut self, e: &ScalarExpr) -> Result<ScalarExpr, Error> {
        reject_params(e)?;
        let mut acc = ScalarExpr::zero();
        for j in e.jets() {
            let coeff = self.coefficient(j);
            if coeff.is_zero() {
                continue;
            }
            acc = add(acc, mul(coeff, diff(e, &Symbol::Jet(j))));
        }
        Ok(simplify(&acc))
    }
}

pub fn prolong_scalar(r: &Characteristic, e: &ScalarExpr) -> Result<ScalarExpr, Error> {
    Prolongation::new(r).apply(e)
}
