//! Expression tree and its printer.
//!
//! The printer emits the minimal parenthesisation that reparses to the same
//! tree under the grammar in [`super::parser`]: `^` binds tightest and is
//! right-associative with a unary base, unary minus sits above the
//! multiplicative level, and `pow(a, b)` is normalised to the `^` node at
//! parse time.

/// Named constants recognised by the parser.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Constant {
    Pi,
    E,
}

impl Constant {
    pub fn value(self) -> f64 {
        match self {
            Constant::Pi => std::f64::consts::PI,
            Constant::E => std::f64::consts::E,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Constant::Pi => "pi",
            Constant::E => "e",
        }
    }
}

/// Single-argument built-in functions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Builtin {
    Exp,
    Ln,
    Sin,
    Cos,
    Sqrt,
    Abs,
}

impl Builtin {
    pub fn name(self) -> &'static str {
        match self {
            Builtin::Exp => "exp",
            Builtin::Ln => "ln",
            Builtin::Sin => "sin",
            Builtin::Cos => "cos",
            Builtin::Sqrt => "sqrt",
            Builtin::Abs => "abs",
        }
    }

    pub fn from_name(name: &str) -> Option<Builtin> {
        match name {
            "exp" => Some(Builtin::Exp),
            "ln" => Some(Builtin::Ln),
            "sin" => Some(Builtin::Sin),
            "cos" => Some(Builtin::Cos),
            "sqrt" => Some(Builtin::Sqrt),
            "abs" => Some(Builtin::Abs),
            _ => None,
        }
    }
}

/// Expression over one free variable `x`.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Number(f64),
    Var,
    Const(Constant),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Box<Expr>),
    Call(Builtin, Box<Expr>),
}

/// Replace every occurrence of the free variable in `e` with `replacement`,
/// producing the composition `e ∘ replacement` as a tree.
pub fn substitute_var(e: &Expr, replacement: &Expr) -> Expr {
    let rec = |a: &Expr| Box::new(substitute_var(a, replacement));
    match e {
        Expr::Var => replacement.clone(),
        Expr::Number(_) | Expr::Const(_) => e.clone(),
        Expr::Neg(a) => Expr::Neg(rec(a)),
        Expr::Add(a, b) => Expr::Add(rec(a), rec(b)),
        Expr::Sub(a, b) => Expr::Sub(rec(a), rec(b)),
        Expr::Mul(a, b) => Expr::Mul(rec(a), rec(b)),
        Expr::Div(a, b) => Expr::Div(rec(a), rec(b)),
        Expr::Pow(a, b) => Expr::Pow(rec(a), rec(b)),
        Expr::Call(f, a) => Expr::Call(*f, rec(a)),
    }
}

// Precedence levels mirroring the grammar: additive 1, multiplicative 2,
// unary/power 3, atoms 4.  Negative literals print with a leading minus, so
// they behave like a unary.
fn precedence(e: &Expr) -> u8 {
    match e {
        Expr::Add(..) | Expr::Sub(..) => 1,
        Expr::Mul(..) | Expr::Div(..) => 2,
        Expr::Neg(..) | Expr::Pow(..) => 3,
        Expr::Number(n) if *n < 0.0 => 3,
        _ => 4,
    }
}

// Whether `e` prints as a `unary` in the grammar sense (a chain of minus
// signs over an atom).  Only such shapes may stand unparenthesised as the
// operand of unary minus or the base of `^`.
fn is_unary_shape(e: &Expr) -> bool {
    match e {
        Expr::Neg(inner) => is_unary_shape(inner),
        Expr::Number(_) | Expr::Var | Expr::Const(_) | Expr::Call(..) => true,
        _ => false,
    }
}

fn write_parenthesised(e: &Expr, out: &mut String) {
    out.push('(');
    write_prec(e, 0, out);
    out.push(')');
}

fn write_unary_operand(e: &Expr, out: &mut String) {
    if is_unary_shape(e) {
        write_prec(e, 0, out);
    } else {
        write_parenthesised(e, out);
    }
}

fn write_prec(e: &Expr, min: u8, out: &mut String) {
    let p = precedence(e);
    if p < min {
        write_parenthesised(e, out);
        return;
    }
    match e {
        Expr::Number(n) => out.push_str(&format!("{n}")),
        Expr::Var => out.push('x'),
        Expr::Const(c) => out.push_str(c.name()),
        Expr::Neg(a) => {
            // Fold a whole chain of negations over a literal so the output
            // never contains a double minus; the parser folds such chains
            // the same way on the way back in, so printing anything less
            // collapsed would not survive a round trip.
            let mut inner: &Expr = a;
            let mut negated = true;
            while let Expr::Neg(next) = inner {
                inner = next;
                negated = !negated;
            }
            if let Expr::Number(n) = inner {
                let signed = if negated { -*n } else { *n };
                write_prec(&Expr::Number(signed), min, out);
                return;
            }
            out.push('-');
            write_unary_operand(a, out);
        }
        Expr::Add(a, b) => {
            write_prec(a, 1, out);
            out.push_str(" + ");
            write_prec(b, 2, out);
        }
        Expr::Sub(a, b) => {
            write_prec(a, 1, out);
            out.push_str(" - ");
            write_prec(b, 2, out);
        }
        Expr::Mul(a, b) => {
            write_prec(a, 2, out);
            out.push_str(" * ");
            write_prec(b, 3, out);
        }
        Expr::Div(a, b) => {
            write_prec(a, 2, out);
            out.push_str(" / ");
            write_prec(b, 3, out);
        }
        Expr::Pow(a, b) => {
            write_unary_operand(a, out);
            out.push_str(" ^ ");
            // The exponent is a factor, so a further power or unary stands
            // without parentheses (right associativity).
            write_prec(b, 3, out);
        }
        Expr::Call(f, a) => {
            out.push_str(f.name());
            out.push('(');
            write_prec(a, 0, out);
            out.push(')');
        }
    }
}

impl std::fmt::Display for Expr {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let mut s = String::new();
        write_prec(self, 0, &mut s);
        f.write_str(&s)
    }
}
