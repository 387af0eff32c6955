//! Numeric evaluation in complex arithmetic.
//!
//! Expressions are compiled into a postfix program whose symbol loads refer to
//! slots of a caller-provided value array; grid code binds the slots once and
//! evaluates the same program at every node.

use std::collections::HashMap;

use num_complex::Complex64;
use num_traits::{ToPrimitive, Zero};
use smallvec::SmallVec;

use super::{Func, Node, ScalarExpr, Symbol};

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum EvalError {
    #[error("unbound symbol `{0}`")]
    Unbound(Symbol),
    #[error("domain error in `{node}`: {reason}")]
    Domain { node: String, reason: &'static str },
}

/// Symbol bindings for [`evaluate`].
#[derive(Clone, Debug, Default)]
pub struct EvalContext {
    values: HashMap<Symbol, Complex64>,
}

impl EvalContext {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn bind(&mut self, s: Symbol, v: Complex64) -> &mut Self {
        self.values.insert(s, v);
        self
    }

    pub fn with(mut self, s: Symbol, v: Complex64) -> Self {
        self.values.insert(s, v);
        self
    }

    pub fn get(&self, s: &Symbol) -> Option<Complex64> {
        self.values.get(s).copied()
    }

    pub fn symbols(&self) -> impl Iterator<Item = &Symbol> {
        self.values.keys()
    }
}

/// Evaluate `e` with every free symbol bound in `ctx`.
pub fn evaluate(e: &ScalarExpr, ctx: &EvalContext) -> Result<Complex64, EvalError> {
    let slots: Vec<Symbol> = e.free_symbols().into_iter().collect();
    let values = slots
        .iter()
        .map(|s| ctx.get(s).ok_or_else(|| EvalError::Unbound(s.clone())))
        .collect::<Result<Vec<_>, _>>()?;
    Compiled::new(e, &slots)?.eval(&values)
}

#[derive(Clone, Debug)]
enum Op {
    Const(Complex64),
    Load(usize),
    Add(usize),
    Mul(usize),
    Neg,
    /// Integer power; the node is kept for error reporting.
    PowInt(i32, ScalarExpr),
    PowReal(f64, ScalarExpr),
    Pow(ScalarExpr),
    Func(Func, ScalarExpr),
}

/// An expression compiled against a fixed slot layout.
#[derive(Clone, Debug)]
pub struct Compiled {
    ops: Vec<Op>,
    depth: usize,
}

impl Compiled {
    /// Fails with [`EvalError::Unbound`] if `e` mentions a symbol not in `slots`.
    pub fn new(e: &ScalarExpr, slots: &[Symbol]) -> Result<Self, EvalError> {
        let mut ops = Vec::new();
        emit(e, slots, &mut ops)?;
        let mut depth = 0usize;
        let mut max = 0usize;
        for op in &ops {
            match op {
                Op::Const(_) | Op::Load(_) => depth += 1,
                Op::Add(n) | Op::Mul(n) => depth -= n - 1,
                Op::Pow(_) => depth -= 1,
                _ => {}
            }
            max = max.max(depth);
        }
        Ok(Compiled { ops, depth: max })
    }

    pub fn eval(&self, values: &[Complex64]) -> Result<Complex64, EvalError> {
        let mut stack: SmallVec<[Complex64; 16]> = SmallVec::with_capacity(self.depth);
        for op in &self.ops {
            match op {
                Op::Const(c) => stack.push(*c),
                Op::Load(k) => stack.push(values[*k]),
                Op::Add(n) => {
                    let at = stack.len() - n;
                    let s = stack[at..].iter().fold(Complex64::zero(), |a, b| a + b);
                    stack.truncate(at);
                    stack.push(s);
                }
                Op::Mul(n) => {
                    let at = stack.len() - n;
                    let s = stack[at..]
                        .iter()
                        .fold(Complex64::new(1.0, 0.0), |a, b| a * b);
                    stack.truncate(at);
                    stack.push(s);
                }
                Op::Neg => {
                    let top = stack.last_mut().unwrap();
                    *top = -*top;
                }
                Op::PowInt(n, node) => {
                    let top = stack.last_mut().unwrap();
                    if *n < 0 && top.is_zero() {
                        return Err(domain(node, "division by zero"));
                    }
                    *top = top.powi(*n);
                    check(*top, node)?;
                }
                Op::PowReal(p, node) => {
                    let top = stack.last_mut().unwrap();
                    *top = real_pow(*top, *p)
                        .ok_or_else(|| domain(node, "zero to a non-positive power"))?;
                    check(*top, node)?;
                }
                Op::Pow(node) => {
                    let ex = stack.pop().unwrap();
                    let top = stack.last_mut().unwrap();
                    if top.is_zero() {
                        if ex.re > 0.0 {
                            *top = Complex64::zero();
                            continue;
                        }
                        return Err(domain(node, "zero to a non-positive power"));
                    }
                    *top = top.powc(ex);
                    check(*top, node)?;
                }
                Op::Func(f, node) => {
                    let top = stack.last_mut().unwrap();
                    *top = apply(*f, *top, node)?;
                    check(*top, node)?;
                }
            }
        }
        let out = stack.pop().unwrap();
        if !(out.re.is_finite() && out.im.is_finite()) {
            return Err(EvalError::Domain {
                node: "<result>".into(),
                reason: "non-finite value",
            });
        }
        Ok(out)
    }
}

fn domain(node: &ScalarExpr, reason: &'static str) -> EvalError {
    EvalError::Domain {
        node: node.to_string(),
        reason,
    }
}

fn check(v: Complex64, node: &ScalarExpr) -> Result<(), EvalError> {
    if v.re.is_finite() && v.im.is_finite() {
        Ok(())
    } else {
        Err(domain(node, "non-finite value"))
    }
}

fn real_pow(z: Complex64, p: f64) -> Option<Complex64> {
    if z.is_zero() {
        return (p > 0.0).then(Complex64::zero);
    }
    if p == 0.5 {
        return Some(z.sqrt());
    }
    Some(z.powf(p))
}

fn apply(f: Func, z: Complex64, node: &ScalarExpr) -> Result<Complex64, EvalError> {
    Ok(match f {
        Func::Sin => z.sin(),
        Func::Cos => z.cos(),
        Func::Tan => {
            let c = z.cos();
            if c.norm() < 1e-300 {
                return Err(domain(node, "tangent pole"));
            }
            z.sin() / c
        }
        Func::Atan => {
            // poles at ±i
            if (z - Complex64::i()).norm() == 0.0 || (z + Complex64::i()).norm() == 0.0 {
                return Err(domain(node, "arctangent branch point"));
            }
            if z.im == 0.0 {
                Complex64::new(z.re.atan(), 0.0)
            } else {
                z.atan()
            }
        }
        Func::Exp => z.exp(),
        Func::Log => {
            if z.is_zero() {
                return Err(domain(node, "logarithm of zero"));
            }
            z.ln()
        }
        Func::Sinh => z.sinh(),
        Func::Cosh => z.cosh(),
        Func::Tanh => z.tanh(),
        Func::Sqrt => z.sqrt(),
    })
}

fn emit(e: &ScalarExpr, slots: &[Symbol], ops: &mut Vec<Op>) -> Result<(), EvalError> {
    match e.node() {
        Node::Rational(r) => ops.push(Op::Const(Complex64::new(
            r.to_f64().unwrap_or(f64::NAN),
            0.0,
        ))),
        Node::Float(x) => ops.push(Op::Const(Complex64::new(*x, 0.0))),
        Node::I => ops.push(Op::Const(Complex64::i())),
        Node::Sym(s) => {
            let k = slots
                .iter()
                .position(|t| t == s)
                .ok_or_else(|| EvalError::Unbound(s.clone()))?;
            ops.push(Op::Load(k));
        }
        Node::Sum(ts) => {
            for t in ts {
                emit(t, slots, ops)?;
            }
            ops.push(Op::Add(ts.len()));
        }
        Node::Product(fs) => {
            for f in fs {
                emit(f, slots, ops)?;
            }
            ops.push(Op::Mul(fs.len()));
        }
        Node::Neg(x) => {
            emit(x, slots, ops)?;
            ops.push(Op::Neg);
        }
        Node::Pow(b, ex) => {
            emit(b, slots, ops)?;
            match ex.as_rational() {
                Some(r) if r.is_integer() && r.to_integer().abs() <= i32::MAX as i64 => {
                    ops.push(Op::PowInt(r.to_integer() as i32, e.clone()))
                }
                Some(r) => ops.push(Op::PowReal(r.to_f64().unwrap_or(f64::NAN), e.clone())),
                None => {
                    emit(ex, slots, ops)?;
                    ops.push(Op::Pow(e.clone()));
                }
            }
        }
        Node::Func(f, x) => {
            emit(x, slots, ops)?;
            ops.push(Op::Func(*f, e.clone()));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::super::{parse_expr, JetIndex};
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    fn jet1() -> Symbol {
        Symbol::Jet(JetIndex::field_var(1))
    }

    #[test]
    fn examples() {
        let ctx = EvalContext::new().with(jet1(), Complex64::new(FRAC_PI_2, 0.0));
        let v = evaluate(&parse_expr("sin(theta1)").unwrap(), &ctx).unwrap();
        assert!((v - Complex64::new(1.0, 0.0)).norm() < 1e-15);

        let ctx = EvalContext::new().with(Symbol::Lambda, Complex64::i());
        let v = evaluate(&parse_expr("lambda^2").unwrap(), &ctx).unwrap();
        assert!((v + Complex64::new(1.0, 0.0)).norm() < 1e-15);

        let err = evaluate(&parse_expr("theta1_1").unwrap(), &EvalContext::new()).unwrap_err();
        assert_eq!(
            err,
            EvalError::Unbound(Symbol::Jet(JetIndex::new(1, &[1]).unwrap()))
        );
        assert!(err.to_string().contains("theta1_1"));
    }

    #[test]
    fn domain_errors_name_the_node() {
        let ctx = EvalContext::new().with(Symbol::X1, Complex64::zero());
        let err = evaluate(&parse_expr("2 + log(x1)").unwrap(), &ctx).unwrap_err();
        assert!(matches!(&err, EvalError::Domain { node, .. } if node == "log(x1)"));
        let err = evaluate(&parse_expr("1/x1").unwrap(), &ctx).unwrap_err();
        assert!(matches!(&err, EvalError::Domain { node, .. } if node == "x1^(-1)"));
        let err = evaluate(&parse_expr("x1^(-1/2)").unwrap(), &ctx).unwrap_err();
        assert!(matches!(err, EvalError::Domain { .. }));
        assert_eq!(
            evaluate(&parse_expr("x1^(1/2)").unwrap(), &ctx).unwrap(),
            Complex64::zero()
        );
    }

    #[test]
    fn compiled_matches_slot_order() {
        let e = parse_expr("x1 - 2*x2 + i*lambda").unwrap();
        let slots = [Symbol::Lambda, Symbol::X2, Symbol::X1];
        let c = Compiled::new(&e, &slots).unwrap();
        let v = c
            .eval(&[
                Complex64::new(2.0, 0.0),
                Complex64::new(1.0, 0.0),
                Complex64::new(5.0, 0.0),
            ])
            .unwrap();
        assert_eq!(v, Complex64::new(3.0, 2.0));
        assert!(Compiled::new(&e, &slots[..2]).is_err());
    }
}
