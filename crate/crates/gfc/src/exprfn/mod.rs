//! User-supplied scalar functions of one variable.
//!
//! A [`FunctionHandle`] wraps one of three sources behind a cheap-to-clone
//! shared pointer:
//!
//! * a parsed expression in a small arithmetic language (with symbolic
//!   differentiation),
//! * a table of samples interpolated by a shape-preserving cubic,
//! * an arbitrary closure, optionally paired with its derivative.
//!
//! Handles can also carry *edge exponents*: annotations stating that the
//! function behaves like `(u - lo)^p` near the left end of the working
//! interval (or `(hi - u)^q` near the right end).  Integral operators use
//! these to route the singular part of an integrand into weighted
//! quadrature instead of resolving it by brute force.

pub mod ast;
pub mod deriv;
pub mod interp;
pub mod parser;

pub use ast::{substitute_var, Builtin, Constant, Expr};
pub use interp::{InterpError, Pchip};
pub use parser::{parse, ParseError};

use std::sync::Arc;

/// Failure while evaluating a function at a point.
#[derive(Debug, Clone, PartialEq)]
pub enum EvalError {
    /// The operation is undefined at this input (log of a non-positive
    /// number, division by zero, fractional power of a negative base, ...).
    DomainFault { what: String, x: f64 },
    /// A tabulated function was queried outside its sampled range.
    OutOfDomain { x: f64, lo: f64, hi: f64 },
    /// The result overflowed or was otherwise not a finite number.
    NonFinite { what: String, x: f64 },
}

impl std::fmt::Display for EvalError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            EvalError::DomainFault { what, x } => write!(f, "domain fault at x = {x}: {what}"),
            EvalError::OutOfDomain { x, lo, hi } => {
                write!(f, "x = {x} is outside the tabulated range [{lo}, {hi}]")
            }
            EvalError::NonFinite { what, x } => write!(f, "non-finite result at x = {x}: {what}"),
        }
    }
}

impl std::error::Error for EvalError {}

/// Failure to construct a derived handle.
#[derive(Debug, Clone, PartialEq)]
pub enum HandleError {
    /// The source cannot produce a derivative (closure registered without
    /// one, or a second derivative of tabulated data).
    NoDerivative { label: String },
}

impl std::fmt::Display for HandleError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            HandleError::NoDerivative { label } => {
                write!(f, "no derivative is available for `{label}`")
            }
        }
    }
}

impl std::error::Error for HandleError {}

type SharedFn = Arc<dyn Fn(f64) -> Result<f64, EvalError> + Send + Sync>;

fn wrap_infallible(
    label: String,
    f: impl Fn(f64) -> f64 + Send + Sync + 'static,
) -> SharedFn {
    Arc::new(move |x| {
        let v = f(x);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(EvalError::NonFinite {
                what: format!("closure `{label}` returned {v}"),
                x,
            })
        }
    })
}

#[derive(Clone)]
enum Source {
    Expression { expr: Expr, derivative: Expr },
    Table(Arc<Pchip>),
    TableDerivative(Arc<Pchip>),
    Closure { f: SharedFn, derivative: Option<SharedFn> },
}

struct HandleInner {
    label: String,
    source: Source,
    left_exponent: Option<f64>,
    right_exponent: Option<f64>,
}

/// A scalar function of one variable, cheap to clone and safe to share
/// across threads.
#[derive(Clone)]
pub struct FunctionHandle {
    inner: Arc<HandleInner>,
}

impl std::fmt::Debug for FunctionHandle {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FunctionHandle")
            .field("label", &self.inner.label)
            .field("left_exponent", &self.inner.left_exponent)
            .field("right_exponent", &self.inner.right_exponent)
            .finish_non_exhaustive()
    }
}

impl FunctionHandle {
    fn from_source(label: String, source: Source) -> Self {
        FunctionHandle {
            inner: Arc::new(HandleInner {
                label,
                source,
                left_exponent: None,
                right_exponent: None,
            }),
        }
    }

    /// Parse an expression such as `2*x + sin(x)^2`; the label is the
    /// canonical printed form.
    pub fn parse(src: &str) -> Result<Self, ParseError> {
        let expr = parser::parse(src)?;
        Ok(Self::from_expr(expr))
    }

    pub fn from_expr(expr: Expr) -> Self {
        let derivative = deriv::differentiate(&expr);
        let label = expr.to_string();
        Self::from_source(label, Source::Expression { expr, derivative })
    }

    /// The constant function `x ↦ c`.
    pub fn constant(c: f64) -> Self {
        Self::from_expr(Expr::Number(c))
    }

    /// Interpolate samples `(xs[i], ys[i])` by a shape-preserving cubic.
    pub fn tabulated(label: &str, xs: Vec<f64>, ys: Vec<f64>) -> Result<Self, InterpError> {
        let pchip = Pchip::new(xs, ys)?;
        Ok(Self::from_source(label.to_owned(), Source::Table(Arc::new(pchip))))
    }

    /// Wrap a closure.  Non-finite outputs surface as evaluation errors;
    /// the handle has no derivative.
    pub fn from_closure(
        label: &str,
        f: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self::from_source(
            label.to_owned(),
            Source::Closure {
                f: wrap_infallible(label.to_owned(), f),
                derivative: None,
            },
        )
    }

    /// Wrap a closure together with its derivative.
    pub fn from_closure_with_derivative(
        label: &str,
        f: impl Fn(f64) -> f64 + Send + Sync + 'static,
        df: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self::from_source(
            label.to_owned(),
            Source::Closure {
                f: wrap_infallible(label.to_owned(), f),
                derivative: Some(wrap_infallible(format!("d/dx[{label}]"), df)),
            },
        )
    }

    /// Wrap a closure that reports its own evaluation errors.
    pub fn from_fallible_closure(
        label: &str,
        f: impl Fn(f64) -> Result<f64, EvalError> + Send + Sync + 'static,
    ) -> Self {
        Self::from_source(
            label.to_owned(),
            Source::Closure {
                f: Arc::new(f),
                derivative: None,
            },
        )
    }

    /// Wrap a fallible closure together with its (fallible) derivative.
    pub fn from_fallible_closure_with_derivative(
        label: &str,
        f: impl Fn(f64) -> Result<f64, EvalError> + Send + Sync + 'static,
        df: impl Fn(f64) -> Result<f64, EvalError> + Send + Sync + 'static,
    ) -> Self {
        Self::from_source(
            label.to_owned(),
            Source::Closure {
                f: Arc::new(f),
                derivative: Some(Arc::new(df)),
            },
        )
    }

    pub fn label(&self) -> &str {
        &self.inner.label
    }

    /// Annotate the handle with endpoint exponents: near the left end of
    /// the working interval the function behaves like `(u - lo)^p` with
    /// `p` = `left`, and analogously at the right end.  `None` means
    /// "smooth up to the boundary".
    pub fn with_edge_exponents(&self, left: Option<f64>, right: Option<f64>) -> Self {
        FunctionHandle {
            inner: Arc::new(HandleInner {
                label: self.inner.label.clone(),
                source: self.inner.source.clone(),
                left_exponent: left,
                right_exponent: right,
            }),
        }
    }

    pub fn left_exponent(&self) -> Option<f64> {
        self.inner.left_exponent
    }

    pub fn right_exponent(&self) -> Option<f64> {
        self.inner.right_exponent
    }

    pub fn eval(&self, x: f64) -> Result<f64, EvalError> {
        match &self.inner.source {
            Source::Expression { expr, .. } => eval_expr(expr, x),
            Source::Table(p) => p.value(x).map_err(|e| map_interp_error(e, x)),
            Source::TableDerivative(p) => p.derivative(x).map_err(|e| map_interp_error(e, x)),
            Source::Closure { f, .. } => {
                let v = f(x)?;
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(EvalError::NonFinite {
                        what: format!("closure `{}` returned {v}", self.inner.label),
                        x,
                    })
                }
            }
        }
    }

    /// The derivative as a new handle.  Edge exponents do not carry over:
    /// differentiation changes the endpoint behaviour, and the annotation
    /// describes the function itself, not its source.
    pub fn derivative(&self) -> Result<FunctionHandle, HandleError> {
        match &self.inner.source {
            Source::Expression { derivative, .. } => Ok(Self::from_expr(derivative.clone())),
            Source::Table(p) => Ok(Self::from_source(
                format!("d/dx[{}]", self.inner.label),
                Source::TableDerivative(Arc::clone(p)),
            )),
            Source::TableDerivative(_) => Err(HandleError::NoDerivative {
                label: self.inner.label.clone(),
            }),
            Source::Closure { derivative, .. } => match derivative {
                Some(df) => Ok(Self::from_source(
                    format!("d/dx[{}]", self.inner.label),
                    Source::Closure {
                        f: Arc::clone(df),
                        derivative: None,
                    },
                )),
                None => Err(HandleError::NoDerivative {
                    label: self.inner.label.clone(),
                }),
            },
        }
    }

    /// Whether [`FunctionHandle::derivative`] will succeed.
    pub fn has_derivative(&self) -> bool {
        !matches!(
            &self.inner.source,
            Source::TableDerivative(_) | Source::Closure { derivative: None, .. }
        )
    }

    /// Short description of the underlying source, used in report
    /// fingerprints.
    pub fn source_kind(&self) -> &'static str {
        match &self.inner.source {
            Source::Expression { .. } => "expression",
            Source::Table(_) => "table",
            Source::TableDerivative(_) => "table-derivative",
            Source::Closure { .. } => "closure",
        }
    }
}

fn map_interp_error(e: InterpError, x: f64) -> EvalError {
    match e {
        InterpError::OutOfDomain { x, lo, hi } => EvalError::OutOfDomain { x, lo, hi },
        InterpError::BadData(msg) => EvalError::DomainFault { what: msg, x },
    }
}

/// Evaluate an expression tree at `x`, reporting domain faults instead of
/// propagating NaN.
pub fn eval_expr(e: &Expr, x: f64) -> Result<f64, EvalError> {
    let v = eval_inner(e, x)?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(EvalError::NonFinite {
            what: format!("`{e}` evaluated to {v}"),
            x,
        })
    }
}

fn eval_inner(e: &Expr, x: f64) -> Result<f64, EvalError> {
    match e {
        Expr::Number(n) => Ok(*n),
        Expr::Var => Ok(x),
        Expr::Const(c) => Ok(c.value()),
        Expr::Neg(a) => Ok(-eval_inner(a, x)?),
        Expr::Add(a, b) => Ok(eval_inner(a, x)? + eval_inner(b, x)?),
        Expr::Sub(a, b) => Ok(eval_inner(a, x)? - eval_inner(b, x)?),
        Expr::Mul(a, b) => Ok(eval_inner(a, x)? * eval_inner(b, x)?),
        Expr::Div(a, b) => {
            let d = eval_inner(b, x)?;
            if d == 0.0 {
                return Err(EvalError::DomainFault {
                    what: format!("division by zero in `{e}`"),
                    x,
                });
            }
            Ok(eval_inner(a, x)? / d)
        }
        Expr::Pow(a, b) => {
            let base = eval_inner(a, x)?;
            let exponent = eval_inner(b, x)?;
            if base < 0.0 && exponent.fract() != 0.0 {
                return Err(EvalError::DomainFault {
                    what: format!("fractional power of negative base in `{e}`"),
                    x,
                });
            }
            if base == 0.0 && exponent < 0.0 {
                return Err(EvalError::DomainFault {
                    what: format!("zero raised to a negative power in `{e}`"),
                    x,
                });
            }
            Ok(base.powf(exponent))
        }
        Expr::Call(f, a) => {
            let v = eval_inner(a, x)?;
            match f {
                Builtin::Exp => Ok(v.exp()),
                Builtin::Ln => {
                    if v <= 0.0 {
                        Err(EvalError::DomainFault {
                            what: format!("logarithm of {v} in `{e}`"),
                            x,
                        })
                    } else {
                        Ok(v.ln())
                    }
                }
                Builtin::Sin => Ok(v.sin()),
                Builtin::Cos => Ok(v.cos()),
                Builtin::Sqrt => {
                    if v < 0.0 {
                        Err(EvalError::DomainFault {
                            what: format!("square root of {v} in `{e}`"),
                            x,
                        })
                    } else {
                        Ok(v.sqrt())
                    }
                }
                Builtin::Abs => Ok(v.abs()),
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn eval_str(src: &str, x: f64) -> f64 {
        FunctionHandle::parse(src).expect("parses").eval(x).expect("evaluates")
    }

    #[test]
    fn parses_and_evaluates_reference_expression() {
        // 2*1 + sin(1)^2, sin(1) = 0.8414709848078965.
        assert_eq!(eval_str("2*x + sin(x)^2", 1.0), 2.708_073_418_273_571_2);
    }

    #[test]
    fn precedence_follows_the_grammar() {
        // Unary minus binds tighter than `^`: -x^2 is (-x)^2.
        assert_eq!(eval_str("-x^2", 3.0), 9.0);
        // `^` is right-associative.
        assert_eq!(eval_str("2^3^2", 0.0), 512.0);
        // Division and subtraction are left-associative.
        assert_eq!(eval_str("6/3/2", 0.0), 1.0);
        assert_eq!(eval_str("1-2-3", 0.0), -4.0);
        // Multiplication binds tighter than addition.
        assert_eq!(eval_str("1+2*3", 0.0), 7.0);
        // Named constants.
        assert_relative_eq!(eval_str("e^x", 1.0), std::f64::consts::E, max_relative = 1e-15);
        assert_relative_eq!(eval_str("sin(pi/2)", 0.0), 1.0, max_relative = 1e-15);
    }

    #[test]
    fn pow_function_matches_caret() {
        assert_eq!(parse("pow(x, 3)").unwrap(), parse("x^3").unwrap());
        assert_eq!(parse("pow(x+1, 2*x)").unwrap(), parse("(x+1)^(2*x)").unwrap());
    }

    #[test]
    fn scientific_notation_literals() {
        assert_eq!(eval_str("2.5e2", 0.0), 250.0);
        assert_eq!(eval_str("1e-3", 0.0), 1e-3);
        assert_eq!(eval_str("1.5E+1", 0.0), 15.0);
    }

    #[test]
    fn parse_errors_carry_byte_offsets() {
        let e = parse("2*/x").unwrap_err();
        assert_eq!(e.offset, 2);

        let e = parse("sin(x, 3)").unwrap_err();
        assert_eq!(e.offset, 5);
        assert!(e.expected.contains("one argument"), "{}", e.expected);

        let e = parse("foo(x)").unwrap_err();
        assert_eq!(e.offset, 0);
        assert!(e.found.contains("foo"));

        let e = parse("2 +").unwrap_err();
        assert_eq!(e.offset, 3);

        let e = parse("2 $ 3").unwrap_err();
        assert_eq!(e.offset, 2);

        let e = parse("1 + 2) * 3").unwrap_err();
        assert_eq!(e.offset, 5);
    }

    #[test]
    fn evaluation_reports_domain_faults() {
        let h = FunctionHandle::parse("ln(x)").unwrap();
        assert!(matches!(h.eval(-1.0), Err(EvalError::DomainFault { .. })));
        assert!(matches!(h.eval(0.0), Err(EvalError::DomainFault { .. })));
        assert!(h.eval(2.0).is_ok());

        let h = FunctionHandle::parse("sqrt(x)").unwrap();
        assert!(matches!(h.eval(-0.5), Err(EvalError::DomainFault { .. })));

        let h = FunctionHandle::parse("1/x").unwrap();
        assert!(matches!(h.eval(0.0), Err(EvalError::DomainFault { .. })));

        let h = FunctionHandle::parse("x^0.5").unwrap();
        assert!(matches!(h.eval(-1.0), Err(EvalError::DomainFault { .. })));

        // Overflow is reported as non-finite, not silently returned.
        let h = FunctionHandle::parse("exp(x)").unwrap();
        assert!(matches!(h.eval(1000.0), Err(EvalError::NonFinite { .. })));
    }

    #[test]
    fn symbolic_derivatives_match_known_forms() {
        let d = |src: &str| {
            FunctionHandle::parse(src).unwrap().derivative().unwrap().label().to_owned()
        };
        assert_eq!(d("x^2"), "2 * x");
        assert_eq!(d("sin(x)"), "cos(x)");
        assert_eq!(d("exp(2*x)"), "exp(2 * x) * 2");
        assert_eq!(d("ln(x)"), "1 / x");
        assert_eq!(d("3"), "0");
    }

    #[test]
    fn derivative_of_abs_uses_sign_quotient() {
        let h = FunctionHandle::parse("abs(x)").unwrap().derivative().unwrap();
        assert_eq!(h.eval(2.5).unwrap(), 1.0);
        assert_eq!(h.eval(-2.5).unwrap(), -1.0);
        // Undefined at zero: the quotient x/abs(x) divides by zero.
        assert!(matches!(h.eval(0.0), Err(EvalError::DomainFault { .. })));
    }

    #[test]
    fn general_power_derivative() {
        // d/dx x^x = x^x (ln x + 1); at x = 2: 4 (ln 2 + 1).
        let h = FunctionHandle::parse("x^x").unwrap().derivative().unwrap();
        assert_relative_eq!(
            h.eval(2.0).unwrap(),
            4.0 * (std::f64::consts::LN_2 + 1.0),
            max_relative = 1e-14
        );
    }

    #[test]
    fn tabulated_handle_reproduces_nodes_and_rejects_outside_queries() {
        let xs: Vec<f64> = (0..=16).map(|i| i as f64 / 4.0).collect();
        let ys: Vec<f64> = xs.iter().map(|&x| (x * 0.7).sin() + 2.0).collect();
        let h = FunctionHandle::tabulated("samples", xs.clone(), ys.clone()).unwrap();
        for (x, y) in xs.iter().zip(&ys) {
            assert_relative_eq!(h.eval(*x).unwrap(), *y, max_relative = 1e-15);
        }
        assert!(matches!(h.eval(-0.1), Err(EvalError::OutOfDomain { .. })));
        assert!(matches!(h.eval(4.1), Err(EvalError::OutOfDomain { .. })));
    }

    #[test]
    fn tabulated_linear_data_is_reproduced_exactly_between_nodes() {
        let xs = vec![0.0, 0.5, 1.25, 2.0, 3.0];
        let ys: Vec<f64> = xs.iter().map(|&x| 3.0 * x + 1.0).collect();
        let h = FunctionHandle::tabulated("line", xs, ys).unwrap();
        for i in 0..=30 {
            let x = 3.0 * i as f64 / 30.0;
            assert_relative_eq!(h.eval(x).unwrap(), 3.0 * x + 1.0, max_relative = 1e-14);
        }
        let dh = h.derivative().unwrap();
        assert_relative_eq!(dh.eval(1.7).unwrap(), 3.0, max_relative = 1e-13);
    }

    #[test]
    fn tabulated_interpolation_of_monotone_data_is_monotone() {
        // Data with strongly varying secants; the interpolant must not
        // overshoot between nodes.
        let xs = vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0];
        let ys = vec![0.0, 0.01, 0.02, 1.0, 1.01, 1.02];
        let h = FunctionHandle::tabulated("step-like", xs, ys).unwrap();
        let mut prev = h.eval(0.0).unwrap();
        for i in 1..=500 {
            let x = 5.0 * i as f64 / 500.0;
            let v = h.eval(x).unwrap();
            assert!(
                v >= prev - 1e-14,
                "interpolant decreased from {prev} to {v} at x = {x}"
            );
            prev = v;
        }
    }

    #[test]
    fn tabulated_derivative_matches_finite_differences() {
        let xs: Vec<f64> = (0..=32).map(|i| i as f64 / 8.0).collect();
        let ys: Vec<f64> = xs.iter().map(|&x| (1.0 + x).ln()).collect();
        let h = FunctionHandle::tabulated("log-samples", xs, ys).unwrap();
        let dh = h.derivative().unwrap();
        for i in 0..40 {
            let x = 0.05 + i as f64 * 0.097;
            let fd = (h.eval(x + 1e-6).unwrap() - h.eval(x - 1e-6).unwrap()) / 2e-6;
            assert_relative_eq!(dh.eval(x).unwrap(), fd, max_relative = 1e-6, epsilon = 1e-8);
        }
        // No second derivative of a table.
        assert!(matches!(
            dh.derivative(),
            Err(HandleError::NoDerivative { .. })
        ));
    }

    #[test]
    fn closure_handles_and_their_derivatives() {
        let h = FunctionHandle::from_closure_with_derivative("sin", f64::sin, f64::cos);
        assert_eq!(h.eval(0.3).unwrap(), 0.3f64.sin());
        let dh = h.derivative().unwrap();
        assert_eq!(dh.eval(0.3).unwrap(), 0.3f64.cos());
        assert!(!dh.has_derivative());

        let bare = FunctionHandle::from_closure("nan-at-zero", |x: f64| 1.0 / x);
        assert!(matches!(bare.eval(0.0), Err(EvalError::NonFinite { .. })));
        assert!(matches!(
            bare.derivative(),
            Err(HandleError::NoDerivative { .. })
        ));
    }

    #[test]
    fn edge_exponent_annotations_round_trip() {
        let h = FunctionHandle::parse("x^0.3").unwrap();
        assert_eq!(h.left_exponent(), None);
        let annotated = h.with_edge_exponents(Some(0.3), None);
        assert_eq!(annotated.left_exponent(), Some(0.3));
        assert_eq!(annotated.right_exponent(), None);
        assert_eq!(annotated.label(), h.label());
        // Derivative handles do not inherit the annotation.
        assert_eq!(annotated.derivative().unwrap().left_exponent(), None);
    }

    #[test]
    fn printing_is_minimal_and_reparses() {
        let cases = [
            ("2*x + sin(x)^2", "2 * x + sin(x) ^ 2"),
            ("-(x^2)", "-(x ^ 2)"),
            ("-x^2", "-x ^ 2"),
            ("(x+1)*(x-1)", "(x + 1) * (x - 1)"),
            ("x/(2*x)", "x / (2 * x)"),
            ("pow(x, 1/3)", "x ^ (1 / 3)"),
            ("2^3^2", "2 ^ 3 ^ 2"),
            ("(2^3)^2", "(2 ^ 3) ^ 2"),
        ];
        for (input, printed) in cases {
            let ast = parse(input).unwrap();
            assert_eq!(ast.to_string(), printed, "printing `{input}`");
            assert_eq!(parse(printed).unwrap(), ast, "reparsing `{printed}`");
        }
    }

    mod properties {
        use super::super::*;
        use proptest::prelude::*;

        fn arb_expr() -> impl Strategy<Value = Expr> {
            let leaf = prop_oneof![
                (-48i32..=48).prop_map(|n| Expr::Number(n as f64 / 4.0)),
                Just(Expr::Var),
                Just(Expr::Const(Constant::Pi)),
                Just(Expr::Const(Constant::E)),
            ];
            leaf.prop_recursive(4, 40, 3, |inner| {
                prop_oneof![
                    (inner.clone(), inner.clone())
                        .prop_map(|(a, b)| Expr::Add(a.into(), b.into())),
                    (inner.clone(), inner.clone())
                        .prop_map(|(a, b)| Expr::Sub(a.into(), b.into())),
                    (inner.clone(), inner.clone())
                        .prop_map(|(a, b)| Expr::Mul(a.into(), b.into())),
                    (inner.clone(), inner.clone())
                        .prop_map(|(a, b)| Expr::Div(a.into(), b.into())),
                    (inner.clone(), inner.clone())
                        .prop_map(|(a, b)| Expr::Pow(a.into(), b.into())),
                    inner.clone().prop_map(|a| Expr::Neg(a.into())),
                    (0usize..6, inner).prop_map(|(k, a)| {
                        let f = [
                            Builtin::Exp,
                            Builtin::Ln,
                            Builtin::Sin,
                            Builtin::Cos,
                            Builtin::Sqrt,
                            Builtin::Abs,
                        ][k];
                        Expr::Call(f, a.into())
                    }),
                ]
            })
        }

        // Expressions built only from operations that are smooth on all of
        // the real line, so finite-difference checks are meaningful.
        fn arb_smooth_expr() -> impl Strategy<Value = Expr> {
            let leaf = prop_oneof![
                (-12i32..=12).prop_map(|n| Expr::Number(n as f64 / 4.0)),
                Just(Expr::Var),
            ];
            leaf.prop_recursive(3, 24, 2, |inner| {
                prop_oneof![
                    (inner.clone(), inner.clone())
                        .prop_map(|(a, b)| Expr::Add(a.into(), b.into())),
                    (inner.clone(), inner.clone())
                        .prop_map(|(a, b)| Expr::Sub(a.into(), b.into())),
                    (inner.clone(), inner.clone())
                        .prop_map(|(a, b)| Expr::Mul(a.into(), b.into())),
                    (inner.clone(), 0u32..=3).prop_map(|(a, k)| Expr::Pow(
                        a.into(),
                        Box::new(Expr::Number(k as f64))
                    )),
                    inner.clone().prop_map(|a| Expr::Neg(a.into())),
                    (0usize..3, inner).prop_map(|(k, a)| {
                        let f = [Builtin::Exp, Builtin::Sin, Builtin::Cos][k];
                        Expr::Call(f, a.into())
                    }),
                ]
            })
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(96))]

            // The printed form is canonical: printing, reparsing, and
            // printing again yields the same string.
            #[test]
            fn printing_is_idempotent(e in arb_expr()) {
                let printed = e.to_string();
                let reparsed = parse(&printed).expect("printed form must reparse");
                prop_assert_eq!(reparsed.to_string(), printed);
            }

            // Symbolic derivatives agree with central finite differences on
            // globally smooth expressions.
            #[test]
            fn symbolic_derivative_matches_finite_difference(
                e in arb_smooth_expr(),
                xi in -200i32..=200,
            ) {
                let x = xi as f64 / 100.0;
                let d = deriv::differentiate(&e);
                let h = 1e-6 * x.abs().max(1.0);
                let (fm, fp, fx, sym) = match (
                    eval_expr(&e, x - h),
                    eval_expr(&e, x + h),
                    eval_expr(&e, x),
                    eval_expr(&d, x),
                ) {
                    (Ok(a), Ok(b), Ok(c), Ok(d)) => (a, b, c, d),
                    // Overflow in a nested exponential: nothing to compare.
                    _ => return Ok(()),
                };
                prop_assume!(fm.abs().max(fp.abs()).max(fx.abs()) < 1e7);
                prop_assume!(sym.abs() < 1e7);
                let fd = (fp - fm) / (2.0 * h);
                let scale = 1.0 + sym.abs() + fx.abs();
                prop_assert!(
                    (fd - sym).abs() <= 5e-4 * scale,
                    "finite difference {} vs symbolic {} (scale {})",
                    fd, sym, scale
                );
            }

            // Shape preservation: monotone samples produce a monotone
            // interpolant everywhere, not only at the nodes.
            #[test]
            fn pchip_preserves_monotone_data(
                mut steps in proptest::collection::vec(0.0f64..3.0, 4..24),
                increments in proptest::collection::vec(0.0f64..2.0, 4..24),
            ) {
                let n = steps.len().min(increments.len());
                steps.truncate(n);
                let mut xs = vec![0.0];
                let mut ys = vec![0.0];
                for i in 0..n {
                    xs.push(xs[i] + 0.05 + steps[i]);
                    ys.push(ys[i] + increments[i]);
                }
                let p = Pchip::new(xs.clone(), ys).expect("valid data");
                let (lo, hi) = p.domain();
                let mut prev = p.value(lo).unwrap();
                for k in 1..=400 {
                    let x = (lo + (hi - lo) * k as f64 / 400.0).min(hi);
                    let v = p.value(x).unwrap();
                    prop_assert!(v >= prev - 1e-12 * (1.0 + prev.abs()));
                    prev = v;
                }
            }
        }
    }
}
