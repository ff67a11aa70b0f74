//! Symbolic differentiation with light algebraic cleanup.
//!
//! The derivative tree is simplified by constant folding and the usual
//! neutral-element identities so that, for example, the derivative of
//! `x^2` prints as `2 * x` rather than `1 * (2 * x^1) + 0`.

use super::ast::{Builtin, Expr};

fn num(n: f64) -> Expr {
    Expr::Number(n)
}

fn is_number(e: &Expr, v: f64) -> bool {
    matches!(e, Expr::Number(n) if *n == v)
}

fn add(a: Expr, b: Expr) -> Expr {
    Expr::Add(Box::new(a), Box::new(b))
}

fn sub(a: Expr, b: Expr) -> Expr {
    Expr::Sub(Box::new(a), Box::new(b))
}

fn mul(a: Expr, b: Expr) -> Expr {
    Expr::Mul(Box::new(a), Box::new(b))
}

fn div(a: Expr, b: Expr) -> Expr {
    Expr::Div(Box::new(a), Box::new(b))
}

fn pow(a: Expr, b: Expr) -> Expr {
    Expr::Pow(Box::new(a), Box::new(b))
}

fn neg(a: Expr) -> Expr {
    Expr::Neg(Box::new(a))
}

fn call(f: Builtin, a: Expr) -> Expr {
    Expr::Call(f, Box::new(a))
}

/// Derivative with respect to the free variable, in simplified form.
pub fn differentiate(e: &Expr) -> Expr {
    simplify(&raw_derivative(e))
}

fn raw_derivative(e: &Expr) -> Expr {
    match e {
        Expr::Number(_) | Expr::Const(_) => num(0.0),
        Expr::Var => num(1.0),
        Expr::Neg(a) => neg(raw_derivative(a)),
        Expr::Add(a, b) => add(raw_derivative(a), raw_derivative(b)),
        Expr::Sub(a, b) => sub(raw_derivative(a), raw_derivative(b)),
        Expr::Mul(a, b) => add(
            mul(raw_derivative(a), (**b).clone()),
            mul((**a).clone(), raw_derivative(b)),
        ),
        Expr::Div(a, b) => div(
            sub(
                mul(raw_derivative(a), (**b).clone()),
                mul((**a).clone(), raw_derivative(b)),
            ),
            pow((**b).clone(), num(2.0)),
        ),
        Expr::Pow(a, b) => match (&**a, &**b) {
            // Constant exponent: n * a^(n-1) * a'.
            (_, Expr::Number(n)) => mul(
                mul(num(*n), pow((**a).clone(), num(n - 1.0))),
                raw_derivative(a),
            ),
            // Constant base: a^b * ln(a) * b'.
            (Expr::Number(_) | Expr::Const(_), _) => mul(
                mul((*e).clone(), call(Builtin::Ln, (**a).clone())),
                raw_derivative(b),
            ),
            // General case: a^b * (b' * ln a + b * a' / a).
            _ => mul(
                (*e).clone(),
                add(
                    mul(raw_derivative(b), call(Builtin::Ln, (**a).clone())),
                    div(mul((**b).clone(), raw_derivative(a)), (**a).clone()),
                ),
            ),
        },
        Expr::Call(f, a) => {
            let inner = raw_derivative(a);
            let outer = match f {
                Builtin::Exp => call(Builtin::Exp, (**a).clone()),
                Builtin::Ln => return div(inner, (**a).clone()),
                Builtin::Sin => call(Builtin::Cos, (**a).clone()),
                Builtin::Cos => neg(call(Builtin::Sin, (**a).clone())),
                Builtin::Sqrt => {
                    return div(inner, mul(num(2.0), call(Builtin::Sqrt, (**a).clone())))
                }
                // abs'(u) = u / abs(u); undefined at u = 0, which evaluation
                // reports as a domain fault through the division.
                Builtin::Abs => div((**a).clone(), call(Builtin::Abs, (**a).clone())),
            };
            mul(outer, inner)
        }
    }
}

/// Constant folding and neutral-element cleanup.  Folding only happens when
/// the folded value is finite, so domain faults stay visible at evaluation
/// time instead of being baked into the tree as `inf`/`NaN` literals.
pub fn simplify(e: &Expr) -> Expr {
    match e {
        Expr::Number(_) | Expr::Var | Expr::Const(_) => e.clone(),
        Expr::Neg(a) => {
            let a = simplify(a);
            match a {
                Expr::Number(n) => num(-n),
                Expr::Neg(inner) => *inner,
                other => neg(other),
            }
        }
        Expr::Add(a, b) => {
            let (a, b) = (simplify(a), simplify(b));
            if let (Expr::Number(x), Expr::Number(y)) = (&a, &b) {
                if (x + y).is_finite() {
                    return num(x + y);
                }
            }
            if is_number(&a, 0.0) {
                return b;
            }
            if is_number(&b, 0.0) {
                return a;
            }
            add(a, b)
        }
        Expr::Sub(a, b) => {
            let (a, b) = (simplify(a), simplify(b));
            if let (Expr::Number(x), Expr::Number(y)) = (&a, &b) {
                if (x - y).is_finite() {
                    return num(x - y);
                }
            }
            if is_number(&b, 0.0) {
                return a;
            }
            if is_number(&a, 0.0) {
                return simplify(&neg(b));
            }
            sub(a, b)
        }
        Expr::Mul(a, b) => {
            let (a, b) = (simplify(a), simplify(b));
            if let (Expr::Number(x), Expr::Number(y)) = (&a, &b) {
                if (x * y).is_finite() {
                    return num(x * y);
                }
            }
            if is_number(&a, 0.0) || is_number(&b, 0.0) {
                return num(0.0);
            }
            if is_number(&a, 1.0) {
                return b;
            }
            if is_number(&b, 1.0) {
                return a;
            }
            if is_number(&a, -1.0) {
                return simplify(&neg(b));
            }
            if is_number(&b, -1.0) {
                return simplify(&neg(a));
            }
            mul(a, b)
        }
        Expr::Div(a, b) => {
            let (a, b) = (simplify(a), simplify(b));
            if let (Expr::Number(x), Expr::Number(y)) = (&a, &b) {
                if *y != 0.0 && (x / y).is_finite() {
                    return num(x / y);
                }
            }
            if is_number(&b, 1.0) {
                return a;
            }
            div(a, b)
        }
        Expr::Pow(a, b) => {
            let (a, b) = (simplify(a), simplify(b));
            if let (Expr::Number(x), Expr::Number(y)) = (&a, &b) {
                let v = x.powf(*y);
                if v.is_finite() {
                    return num(v);
                }
            }
            if is_number(&b, 1.0) {
                return a;
            }
            if is_number(&b, 0.0) {
                return num(1.0);
            }
            pow(a, b)
        }
        Expr::Call(f, a) => {
            let a = simplify(a);
            if let Expr::Number(x) = &a {
                let x = *x;
                let v = match f {
                    Builtin::Exp => x.exp(),
                    Builtin::Ln => x.ln(),
                    Builtin::Sin => x.sin(),
                    Builtin::Cos => x.cos(),
                    Builtin::Sqrt => x.sqrt(),
                    Builtin::Abs => x.abs(),
                };
                if v.is_finite() {
                    return num(v);
                }
            }
            call(*f, a)
        }
    }
}
