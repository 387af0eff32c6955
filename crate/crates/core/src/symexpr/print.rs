//! DSL printer. The output re-parses to the same tree.

use std::fmt::{self, Write};

use num_rational::Rational64;
use num_traits::Signed;

use super::{Node, ScalarExpr};

const SUM: u8 = 1;
const PRODUCT: u8 = 2;
const NEG: u8 = 3;
const POW: u8 = 4;
const ATOM: u8 = 5;

fn prec(e: &ScalarExpr) -> u8 {
    match e.node() {
        Node::Sum(_) => SUM,
        Node::Product(_) => PRODUCT,
        Node::Neg(_) => NEG,
        Node::Pow(..) => POW,
        // negative and fractional literals are always parenthesized by `literal`
        _ => ATOM,
    }
}

fn write_rational(out: &mut String, r: &Rational64) {
    if r.is_integer() && !r.is_negative() {
        write!(out, "{}", r.numer()).unwrap();
    } else if r.is_integer() {
        write!(out, "({})", r.numer()).unwrap();
    } else {
        write!(out, "({}/{})", r.numer(), r.denom()).unwrap();
    }
}

fn write_float(out: &mut String, x: f64) {
    // `{:?}` is the shortest representation that round-trips and always
    // carries a `.` or an exponent, so it re-lexes as a float.
    if x.is_sign_negative() {
        write!(out, "({x:?})").unwrap();
    } else {
        write!(out, "{x:?}").unwrap();
    }
}

fn write_at(out: &mut String, e: &ScalarExpr, min_prec: u8) {
    if prec(e) < min_prec {
        out.push('(');
        write_expr(out, e);
        out.push(')');
    } else {
        write_expr(out, e);
    }
}

fn is_reciprocal(e: &ScalarExpr) -> Option<&ScalarExpr> {
    match e.node() {
        Node::Pow(b, ex)
            if ex.as_rational() == Some(Rational64::from_integer(-1)) && !b.is_number() =>
        {
            Some(b)
        }
        _ => None,
    }
}

fn write_expr(out: &mut String, e: &ScalarExpr) {
    match e.node() {
        Node::Rational(r) => write_rational(out, r),
        Node::Float(x) => write_float(out, *x),
        Node::I => out.push('i'),
        Node::Sym(s) => write!(out, "{s}").unwrap(),
        Node::Func(f, arg) => {
            out.push_str(f.name());
            out.push('(');
            write_expr(out, arg);
            out.push(')');
        }
        Node::Neg(x) => {
            out.push('-');
            write_at(out, x, POW);
        }
        Node::Pow(b, ex) => {
            write_at(out, b, ATOM);
            out.push('^');
            write_at(out, ex, POW);
        }
        Node::Product(fs) => {
            for (k, f) in fs.iter().enumerate() {
                if k == 0 {
                    write_at(out, f, NEG);
                } else if let Some(den) = is_reciprocal(f) {
                    out.push('/');
                    write_at(out, den, POW);
                } else {
                    out.push('*');
                    write_at(out, f, POW);
                }
            }
        }
        Node::Sum(ts) => {
            for (k, t) in ts.iter().enumerate() {
                if k == 0 {
                    write_at(out, t, PRODUCT.min(NEG));
                    continue;
                }
                match t.node() {
                    Node::Neg(x) => {
                        out.push_str(" - ");
                        write_at(out, x, PRODUCT);
                    }
                    _ if t.is_negative_number() => {
                        out.push_str(" - ");
                        write_expr(out, &ScalarExpr::neg(t.clone()));
                    }
                    _ => {
                        out.push_str(" + ");
                        write_at(out, t, PRODUCT);
                    }
                }
            }
        }
    }
}

impl fmt::Display for ScalarExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut s = String::new();
        write_expr(&mut s, self);
        f.write_str(&s)
    }
}
