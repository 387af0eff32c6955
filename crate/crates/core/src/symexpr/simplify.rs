//! Local, sound rewrites only: 0/1 absorption, constant folding, flattening of
//! nested sums and products, and collection of identical terms and factors.
//! No trigonometric or logarithmic identities are applied.

use std::cmp::Ordering;

use num_rational::Rational64;
use num_traits::{CheckedAdd, CheckedMul, One, ToPrimitive, Zero};

use super::{cmp_expr, Func, Node, ScalarExpr};

#[derive(Clone, Copy, Debug, PartialEq)]
enum Num {
    R(Rational64),
    F(f64),
}

impl Num {
    fn of(e: &ScalarExpr) -> Option<Num> {
        match e.node() {
            Node::Rational(r) => Some(Num::R(*r)),
            Node::Float(x) => Some(Num::F(*x)),
            _ => None,
        }
    }

    fn to_f64(self) -> f64 {
        match self {
            Num::R(r) => r.to_f64().unwrap_or(f64::NAN),
            Num::F(x) => x,
        }
    }

    fn add(self, o: Num) -> Num {
        match (self, o) {
            (Num::R(a), Num::R(b)) => a
                .checked_add(&b)
                .map_or(Num::F(self.to_f64() + o.to_f64()), Num::R),
            _ => Num::F(self.to_f64() + o.to_f64()),
        }
    }

    fn mul(self, o: Num) -> Num {
        match (self, o) {
            (Num::R(a), Num::R(b)) => a
                .checked_mul(&b)
                .map_or(Num::F(self.to_f64() * o.to_f64()), Num::R),
            _ => Num::F(self.to_f64() * o.to_f64()),
        }
    }

    fn is_zero(self) -> bool {
        match self {
            Num::R(r) => r.is_zero(),
            Num::F(x) => x == 0.0,
        }
    }

    fn is_one(self) -> bool {
        match self {
            Num::R(r) => r.is_one(),
            Num::F(x) => x == 1.0,
        }
    }

    fn is_minus_one(self) -> bool {
        match self {
            Num::R(r) => r == -Rational64::one(),
            Num::F(x) => x == -1.0,
        }
    }

    fn expr(self) -> ScalarExpr {
        match self {
            Num::R(r) => ScalarExpr::rational(r),
            Num::F(x) if x.is_finite() => ScalarExpr::float(x),
            // overflowed folding; keep something evaluable that reports the problem
            Num::F(_) => ScalarExpr::pow(ScalarExpr::zero(), ScalarExpr::int(-1)),
        }
    }
}

fn one() -> Num {
    Num::R(Rational64::one())
}

/// Apply the local rewrite rules bottom-up.
pub fn simplify(e: &ScalarExpr) -> ScalarExpr {
    match e.node() {
        Node::Rational(_) | Node::Float(_) | Node::I | Node::Sym(_) => e.clone(),
        Node::Neg(x) => {
            let s = simplify(x);
            scaled(Num::R(-Rational64::one()), s)
        }
        Node::Sum(ts) => simplify_sum(ts.iter().map(simplify).collect()),
        Node::Product(fs) => simplify_product(fs.iter().map(simplify).collect()),
        Node::Pow(b, ex) => simplify_pow(simplify(b), simplify(ex)),
        Node::Func(f, x) => simplify_func(*f, simplify(x)),
    }
}

/// `c · e` for an already simplified `e`.
fn scaled(c: Num, e: ScalarExpr) -> ScalarExpr {
    if c.is_one() {
        return e;
    }
    simplify_product(vec![c.expr(), e])
}

/// Split a simplified term into numeric coefficient and remainder.
fn split_term(t: &ScalarExpr) -> (Num, Option<ScalarExpr>) {
    if let Some(n) = Num::of(t) {
        return (n, None);
    }
    match t.node() {
        Node::Neg(x) => {
            let (c, rest) = split_term(x);
            (c.mul(Num::R(-Rational64::one())), rest)
        }
        Node::Product(fs) => match Num::of(&fs[0]) {
            Some(c) => (c, Some(ScalarExpr::product(fs[1..].to_vec()))),
            None => (one(), Some(t.clone())),
        },
        _ => (one(), Some(t.clone())),
    }
}

fn rebuild_term(c: Num, rest: ScalarExpr) -> ScalarExpr {
    if c.is_one() {
        rest
    } else if c.is_minus_one() {
        ScalarExpr::neg(rest)
    } else {
        ScalarExpr::product(vec![c.expr(), rest])
    }
}

fn simplify_sum(terms: Vec<ScalarExpr>) -> ScalarExpr {
    let mut constant = Num::R(Rational64::zero());
    let mut parts: Vec<(ScalarExpr, Num)> = Vec::new();
    let mut stack = terms;
    while let Some(t) = stack.pop() {
        if let Node::Sum(inner) = t.node() {
            stack.extend(inner.iter().cloned());
            continue;
        }
        match split_term(&t) {
            (c, None) => constant = constant.add(c),
            (c, Some(rest)) => parts.push((rest, c)),
        }
    }
    parts.sort_by(|a, b| cmp_expr(&a.0, &b.0));
    let mut merged: Vec<(ScalarExpr, Num)> = Vec::with_capacity(parts.len());
    for (rest, c) in parts {
        match merged.last_mut() {
            Some((prev, acc)) if cmp_expr(prev, &rest) == Ordering::Equal => *acc = acc.add(c),
            _ => merged.push((rest, c)),
        }
    }
    let mut out: Vec<ScalarExpr> = merged
        .into_iter()
        .filter(|(_, c)| !c.is_zero())
        .map(|(rest, c)| rebuild_term(c, rest))
        .collect();
    if !constant.is_zero() {
        out.push(constant.expr());
    }
    ScalarExpr::sum(out)
}

fn simplify_product(factors: Vec<ScalarExpr>) -> ScalarExpr {
    let mut coeff = one();
    let mut i_power: i64 = 0;
    let mut parts: Vec<(ScalarExpr, ScalarExpr)> = Vec::new();
    let mut stack = factors;
    while let Some(f) = stack.pop() {
        if let Some(n) = Num::of(&f) {
            coeff = coeff.mul(n);
            continue;
        }
        match f.node() {
            Node::Product(inner) => stack.extend(inner.iter().cloned()),
            Node::Neg(x) => {
                coeff = coeff.mul(Num::R(-Rational64::one()));
                stack.push(x.clone());
            }
            Node::I => i_power += 1,
            Node::Pow(b, ex) => match (b.node(), ex.as_rational()) {
                (Node::I, Some(r)) if r.is_integer() => i_power += r.to_integer(),
                _ => parts.push((b.clone(), ex.clone())),
            },
            _ => parts.push((f.clone(), ScalarExpr::one())),
        }
    }
    if coeff.is_zero() {
        return ScalarExpr::zero();
    }
    match i_power.rem_euclid(4) {
        1 => parts.push((ScalarExpr::imag(), ScalarExpr::one())),
        2 => coeff = coeff.mul(Num::R(-Rational64::one())),
        3 => {
            coeff = coeff.mul(Num::R(-Rational64::one()));
            parts.push((ScalarExpr::imag(), ScalarExpr::one()));
        }
        _ => {}
    }
    parts.sort_by(|a, b| cmp_expr(&a.0, &b.0));
    let mut merged: Vec<(ScalarExpr, ScalarExpr)> = Vec::with_capacity(parts.len());
    for (base, ex) in parts {
        match merged.last_mut() {
            Some((prev, acc)) if cmp_expr(prev, &base) == Ordering::Equal => {
                *acc = simplify_sum(vec![acc.clone(), ex]);
            }
            _ => merged.push((base, ex)),
        }
    }
    let mut out = Vec::with_capacity(merged.len());
    for (base, ex) in merged {
        let f = simplify_pow(base, ex);
        if let Some(n) = Num::of(&f) {
            coeff = coeff.mul(n);
        } else if f.is_one() {
            continue;
        } else if let Node::Neg(x) = f.node() {
            coeff = coeff.mul(Num::R(-Rational64::one()));
            out.push(x.clone());
        } else {
            out.push(f);
        }
    }
    if coeff.is_zero() {
        return ScalarExpr::zero();
    }
    out.sort_by(cmp_expr);
    let rest = ScalarExpr::product(out);
    if rest.is_one() {
        return coeff.expr();
    }
    rebuild_term(coeff, rest)
}

fn simplify_pow(b: ScalarExpr, ex: ScalarExpr) -> ScalarExpr {
    if ex.is_zero() {
        return ScalarExpr::one();
    }
    if ex.is_one() {
        return b;
    }
    if b.is_one() {
        return ScalarExpr::one();
    }
    let int_exp = ex
        .as_rational()
        .filter(|r| r.is_integer())
        .map(|r| r.to_integer());
    if b.is_zero() {
        if let Some(r) = ex.as_rational() {
            if r > Rational64::zero() {
                return ScalarExpr::zero();
            }
        }
        return ScalarExpr::pow(b, ex);
    }
    if let Some(n) = int_exp {
        match b.node() {
            Node::Rational(r) if n.abs() <= 64 => {
                let folded = if n >= 0 {
                    checked_pow(*r, n as u32)
                } else {
                    checked_pow(r.recip(), (-n) as u32)
                };
                if let Some(v) = folded {
                    return ScalarExpr::rational(v);
                }
            }
            Node::Float(x) if n.abs() <= 1024 => {
                let v = x.powi(n as i32);
                if v.is_finite() && v != 0.0 {
                    return ScalarExpr::float(v);
                }
            }
            Node::I => {
                return match n.rem_euclid(4) {
                    0 => ScalarExpr::one(),
                    1 => ScalarExpr::imag(),
                    2 => ScalarExpr::int(-1),
                    _ => ScalarExpr::neg(ScalarExpr::imag()),
                };
            }
            // (b^e)^n = b^(e·n) holds for integer n
            Node::Pow(inner_b, inner_e) => {
                let combined = simplify_product(vec![inner_e.clone(), ex.clone()]);
                return simplify_pow(inner_b.clone(), combined);
            }
            // (-x)^n = (-1)^n x^n
            Node::Neg(x) => {
                let p = simplify_pow(x.clone(), ex);
                return if n % 2 == 0 {
                    p
                } else {
                    scaled(Num::R(-Rational64::one()), p)
                };
            }
            _ => {}
        }
    }
    ScalarExpr::pow(b, ex)
}

fn checked_pow(r: Rational64, n: u32) -> Option<Rational64> {
    let mut acc = Rational64::one();
    for _ in 0..n {
        acc = acc.checked_mul(&r)?;
    }
    Some(acc)
}

fn simplify_func(f: Func, x: ScalarExpr) -> ScalarExpr {
    if x.is_zero() {
        match f {
            Func::Sin | Func::Tan | Func::Atan | Func::Sinh | Func::Tanh | Func::Sqrt => {
                return ScalarExpr::zero()
            }
            Func::Cos | Func::Cosh | Func::Exp => return ScalarExpr::one(),
            Func::Log => {}
        }
    }
    if x.is_one() {
        match f {
            Func::Log => return ScalarExpr::zero(),
            Func::Sqrt => return ScalarExpr::one(),
            _ => {}
        }
    }
    ScalarExpr::func(f, x)
}

#[cfg(test)]
mod tests {
    use super::super::parse_expr;
    use super::*;

    fn s(text: &str) -> String {
        simplify(&parse_expr(text).unwrap()).to_string()
    }

    #[test]
    fn absorption_and_folding() {
        assert_eq!(s("0*theta1 + 1*lambda"), "lambda");
        assert_eq!(s("2 + 3*4 - 1/2"), "(27/2)");
        assert_eq!(s("x1 + x1 + 2*x1"), "4*x1");
        assert_eq!(s("x1*x1*x2/x1"), "x1*x2");
        assert_eq!(s("i*i"), "(-1)");
        assert_eq!(s("i^3*x1"), "-(i*x1)");
        assert_eq!(s("(x1^2)^3"), "x1^6");
        assert_eq!(s("x1 - x1"), "0");
        assert_eq!(s("-(-x1)"), "x1");
        assert_eq!(s("cos(0) + sin(0)*x2"), "1");
        assert_eq!(s("(-x1)^2"), "x1^2");
    }

    #[test]
    fn no_trig_identities() {
        let e = parse_expr("sin(theta1)^2 + cos(theta1)^2").unwrap();
        assert_eq!(simplify(&e), e);
    }

    #[test]
    fn rational_exponents_are_not_collapsed() {
        // (x^2)^(1/2) is not x for negative x
        assert_eq!(s("(x1^2)^(1/2)"), "(x1^2)^(1/2)");
    }

    #[test]
    fn idempotent_on_samples() {
        for t in [
            "theta1_111 + theta1_1^3/2",
            "-i*lambda*x1 + 2*i*lambda*x1",
            "(i/(4*lambda))*cos(theta1) - theta1_1*sin(theta1)/2",
        ] {
            let once = simplify(&parse_expr(t).unwrap());
            assert_eq!(simplify(&once), once, "{t}");
        }
    }
}
