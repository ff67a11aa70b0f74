//! Strictly increasing change-of-variable maps and the substitution
//! operators they induce.
//!
//! A [`MonotoneMap`] packages a function `g` with a continuous positive
//! derivative on a finite interval `[a, b]`, a numeric inverse, and cached
//! endpoint values.  Monotonicity is established by dense sampling of `g'`
//! at construction time, so downstream integral operators can rely on it.
//! The induced substitution operators send `f` to `f ∘ g` (forward) or
//! `f ∘ g⁻¹` (inverse); forward-then-inverse is the identity on the range
//! of `g` up to the map's inverse tolerance.
//!
//! Built-in maps cover the classical specialisations: the identity,
//! the shift `x - a`, the logarithmic map `ln(x/a)` (requiring `a > 0`),
//! and the power map `x^σ` with `σ > 0`.

use crate::exprfn::{self, EvalError, Expr, FunctionHandle, ParseError};

/// Default number of interior samples used to validate that `g' > 0`.
pub const DEFAULT_VALIDATION_SAMPLES: usize = 1024;

/// Default tolerance for the numeric inverse: `|g(x) - y| ≤ tol·(1+|y|)`.
pub const DEFAULT_INVERSE_TOLERANCE: f64 = 1e-12;

const NEWTON_ITERATION_CAP: usize = 50;

#[derive(Debug, Clone, PartialEq)]
pub enum MapError {
    /// The working interval is empty, reversed, or non-finite.
    BadInterval { a: f64, b: f64 },
    /// `g'` was non-positive at a validation sample.
    MonotonicityViolation { x: f64, gprime: f64 },
    /// A map parameter lies outside its admissible range.
    BadParameter { what: String },
    /// The supplied function cannot produce the derivative the map needs.
    MissingDerivative { label: String },
    /// Inversion target outside `[g(a), g(b)]` beyond tolerance.
    OutOfRange { y: f64, lo: f64, hi: f64 },
    /// Root refinement exhausted its budget without meeting tolerance.
    InverseStalled { y: f64, residual: f64 },
    /// Evaluating `g` or `g'` failed.
    Eval(EvalError),
    /// The map expression did not parse.
    Parse(ParseError),
}

impl std::fmt::Display for MapError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            MapError::BadInterval { a, b } => {
                write!(f, "invalid interval [{a}, {b}]: need finite a < b")
            }
            MapError::MonotonicityViolation { x, gprime } => {
                write!(f, "map is not strictly increasing: g'({x}) = {gprime} ≤ 0")
            }
            MapError::BadParameter { what } => write!(f, "invalid map parameter: {what}"),
            MapError::MissingDerivative { label } => {
                write!(f, "map function `{label}` has no derivative")
            }
            MapError::OutOfRange { y, lo, hi } => {
                write!(f, "inversion target {y} lies outside the range [{lo}, {hi}]")
            }
            MapError::InverseStalled { y, residual } => {
                write!(f, "inverse refinement stalled at residual {residual} for target {y}")
            }
            MapError::Eval(e) => write!(f, "map evaluation failed: {e}"),
            MapError::Parse(e) => write!(f, "map expression rejected: {e}"),
        }
    }
}

impl std::error::Error for MapError {}

impl From<EvalError> for MapError {
    fn from(e: EvalError) -> Self {
        MapError::Eval(e)
    }
}

impl From<ParseError> for MapError {
    fn from(e: ParseError) -> Self {
        MapError::Parse(e)
    }
}

/// A strictly increasing map `g` on a finite interval, with derivative,
/// cached endpoint values, and a certified numeric inverse.  Maps with a
/// known closed-form inverse can attach it to bypass the iterative solve.
#[derive(Debug, Clone)]
pub struct MonotoneMap {
    g: FunctionHandle,
    gprime: FunctionHandle,
    a: f64,
    b: f64,
    g_a: f64,
    g_b: f64,
    inverse_tolerance: f64,
    analytic_inverse: Option<FunctionHandle>,
}

impl MonotoneMap {
    /// Validate `g` on `[a, b]` and build the map.  `samples` interior
    /// points of `g'` are checked for strict positivity, and the endpoint
    /// values of `g` are cached.
    pub fn new(
        g: FunctionHandle,
        a: f64,
        b: f64,
        samples: usize,
    ) -> Result<MonotoneMap, MapError> {
        if !(a.is_finite() && b.is_finite() && a < b) {
            return Err(MapError::BadInterval { a, b });
        }
        let gprime = g
            .derivative()
            .map_err(|_| MapError::MissingDerivative {
                label: g.label().to_owned(),
            })?;
        let n = samples.max(2);
        // Midpoints of a uniform partition: strictly interior, so maps like
        // x^2 on [0, 1] (whose derivative vanishes exactly at the endpoint)
        // are accepted while any interior sign defect is caught.
        for i in 0..n {
            let x = a + (b - a) * (i as f64 + 0.5) / n as f64;
            let d = gprime.eval(x)?;
            if d <= 0.0 {
                return Err(MapError::MonotonicityViolation { x, gprime: d });
            }
        }
        let g_a = g.eval(a)?;
        let g_b = g.eval(b)?;
        if g_a >= g_b {
            return Err(MapError::MonotonicityViolation {
                x: b,
                gprime: (g_b - g_a) / (b - a),
            });
        }
        Ok(MonotoneMap {
            g,
            gprime,
            a,
            b,
            g_a,
            g_b,
            inverse_tolerance: DEFAULT_INVERSE_TOLERANCE,
            analytic_inverse: None,
        })
    }

    pub fn with_inverse_tolerance(mut self, tol: f64) -> Self {
        self.inverse_tolerance = tol.abs().max(f64::EPSILON);
        self
    }

    /// Attach a closed-form inverse.  The handle is spot-checked against
    /// `g` on interior samples before being trusted; a handle that does
    /// not actually invert `g` is rejected.
    pub fn with_analytic_inverse(
        mut self,
        inverse: FunctionHandle,
    ) -> Result<Self, MapError> {
        let checks = 9;
        for i in 1..=checks {
            let y = self.g_a + (self.g_b - self.g_a) * i as f64 / (checks + 1) as f64;
            let x = inverse.eval(y)?;
            let back = self.g.eval(x)?;
            let tol = self.inverse_tolerance * (1.0 + y.abs());
            if (back - y).abs() > tol.max(1e-9 * (1.0 + y.abs())) {
                return Err(MapError::InverseStalled {
                    y,
                    residual: (back - y).abs(),
                });
            }
        }
        self.analytic_inverse = Some(inverse);
        Ok(self)
    }

    pub fn g(&self) -> &FunctionHandle {
        &self.g
    }

    pub fn gprime(&self) -> &FunctionHandle {
        &self.gprime
    }

    pub fn interval(&self) -> (f64, f64) {
        (self.a, self.b)
    }

    /// Cached `(g(a), g(b))`.
    pub fn range(&self) -> (f64, f64) {
        (self.g_a, self.g_b)
    }

    pub fn inverse_tolerance(&self) -> f64 {
        self.inverse_tolerance
    }

    pub fn g_at(&self, x: f64) -> Result<f64, MapError> {
        Ok(self.g.eval(x)?)
    }

    pub fn gprime_at(&self, x: f64) -> Result<f64, MapError> {
        Ok(self.gprime.eval(x)?)
    }

    /// Solve `g(x) = y` by bracketed bisection refined with Newton steps.
    /// The result satisfies `|g(x) - y| ≤ tol·(1 + |y|)`.
    pub fn inverse_at(&self, y: f64) -> Result<f64, MapError> {
        let tol = self.inverse_tolerance * (1.0 + y.abs());
        if y < self.g_a - tol || y > self.g_b + tol {
            return Err(MapError::OutOfRange {
                y,
                lo: self.g_a,
                hi: self.g_b,
            });
        }
        let y = y.clamp(self.g_a, self.g_b);
        if y == self.g_a {
            return Ok(self.a);
        }
        if y == self.g_b {
            return Ok(self.b);
        }
        if let Some(inv) = &self.analytic_inverse {
            let x = inv.eval(y)?;
            return Ok(x.clamp(self.a, self.b));
        }

        let (mut lo, mut hi) = (self.a, self.b);
        let mut x = 0.5 * (lo + hi);
        let mut best = (x, f64::INFINITY);
        for _ in 0..NEWTON_ITERATION_CAP {
            let r = self.g.eval(x)? - y;
            if r.abs() < best.1 {
                best = (x, r.abs());
            }
            if r.abs() <= tol {
                return Ok(x);
            }
            if r > 0.0 {
                hi = x;
            } else {
                lo = x;
            }
            // Newton candidate; fall back to bisection when the slope is
            // unusable or the step escapes the bracket.
            let mut next = f64::NAN;
            if let Ok(d) = self.gprime.eval(x) {
                if d > 0.0 {
                    let candidate = x - r / d;
                    if candidate > lo && candidate < hi {
                        next = candidate;
                    }
                }
            }
            if !next.is_finite() {
                next = 0.5 * (lo + hi);
            }
            if next == x {
                break;
            }
            x = next;
        }
        // Polish with pure bisection down to floating-point resolution.
        for _ in 0..128 {
            let mid = 0.5 * (lo + hi);
            if mid == lo || mid == hi {
                break;
            }
            let r = self.g.eval(mid)? - y;
            if r.abs() < best.1 {
                best = (mid, r.abs());
            }
            if r.abs() <= tol {
                return Ok(mid);
            }
            if r > 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        if best.1 <= tol {
            Ok(best.0)
        } else {
            Err(MapError::InverseStalled { y, residual: best.1 })
        }
    }
}

/// Parse `g_src` and build a validated map on `[a, b]`.
pub fn make_monotone_map(
    g_src: &str,
    a: f64,
    b: f64,
    samples: usize,
) -> Result<MonotoneMap, MapError> {
    let g = FunctionHandle::parse(g_src)?;
    MonotoneMap::new(g, a, b, samples)
}

/// The named standard maps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BuiltinMap {
    /// `g(x) = x`.
    Identity,
    /// `g(x) = x - a`, the left endpoint moved to zero.
    Shift,
    /// `g(x) = ln(x/a)`; requires `a > 0`.
    Hadamard,
    /// `g(x) = x^σ` with `σ > 0`; requires `a ≥ 0`.
    Power { sigma: f64 },
}

/// Construct one of the standard maps on `[a, b]`.
pub fn builtin_map(kind: BuiltinMap, a: f64, b: f64) -> Result<MonotoneMap, MapError> {
    if !(a.is_finite() && b.is_finite() && a < b) {
        return Err(MapError::BadInterval { a, b });
    }
    let var = || Box::new(Expr::Var);
    let expr = match kind {
        BuiltinMap::Identity => Expr::Var,
        BuiltinMap::Shift => Expr::Sub(var(), Box::new(Expr::Number(a))),
        BuiltinMap::Hadamard => {
            if a <= 0.0 {
                return Err(MapError::BadParameter {
                    what: format!("logarithmic map needs a > 0, got a = {a}"),
                });
            }
            Expr::Call(
                exprfn::Builtin::Ln,
                Box::new(Expr::Div(var(), Box::new(Expr::Number(a)))),
            )
        }
        BuiltinMap::Power { sigma } => {
            if !(sigma > 0.0) {
                return Err(MapError::BadParameter {
                    what: format!("power map needs σ > 0, got σ = {sigma}"),
                });
            }
            if a < 0.0 {
                return Err(MapError::BadParameter {
                    what: format!("power map needs a ≥ 0, got a = {a}"),
                });
            }
            Expr::Pow(var(), Box::new(Expr::Number(sigma)))
        }
    };
    let g = FunctionHandle::from_expr(crate::exprfn::deriv::simplify(&expr));
    let map = MonotoneMap::new(g, a, b, DEFAULT_VALIDATION_SAMPLES)?;
    // Every builtin has a closed-form inverse; attaching it spares the
    // iterative solve on hot paths.
    let inverse = match kind {
        BuiltinMap::Identity => FunctionHandle::from_closure("inv:y", |y| y),
        BuiltinMap::Shift => FunctionHandle::from_closure("inv:y+a", move |y| y + a),
        BuiltinMap::Hadamard => FunctionHandle::from_closure("inv:a*exp(y)", move |y| a * y.exp()),
        BuiltinMap::Power { sigma } => {
            FunctionHandle::from_closure("inv:y^(1/sigma)", move |y| y.powf(1.0 / sigma))
        }
    };
    map.with_analytic_inverse(inverse)
}

/// Direction of a substitution operator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// `f ↦ f ∘ g`.
    Forward,
    /// `f ↦ f ∘ g⁻¹`.
    Inverse,
}

/// The substitution operator induced by a map.
#[derive(Debug, Clone)]
pub struct Substitution {
    map: MonotoneMap,
    direction: Direction,
}

impl Substitution {
    pub fn new(map: MonotoneMap, direction: Direction) -> Self {
        Substitution { map, direction }
    }

    pub fn map(&self) -> &MonotoneMap {
        &self.map
    }

    pub fn direction(&self) -> Direction {
        self.direction
    }

    /// Apply the operator, producing the composed function as a handle.
    /// When `f` has a derivative the composition's derivative is attached
    /// (chain rule through `g` or `g⁻¹`).
    pub fn apply(&self, f: &FunctionHandle) -> FunctionHandle {
        let map = self.map.clone();
        let fc = f.clone();
        match self.direction {
            Direction::Forward => {
                let label = format!("{}∘g[{}]", f.label(), map.g().label());
                let value = {
                    let (map, fc) = (map.clone(), fc.clone());
                    move |x: f64| fc.eval(map.g_at(x).map_err(map_to_eval)?)
                };
                if let Ok(df) = f.derivative() {
                    let deriv = {
                        let map = map.clone();
                        move |x: f64| {
                            let gx = map.g_at(x).map_err(map_to_eval)?;
                            let gp = map.gprime_at(x).map_err(map_to_eval)?;
                            Ok(df.eval(gx)? * gp)
                        }
                    };
                    FunctionHandle::from_fallible_closure_with_derivative(&label, value, deriv)
                } else {
                    FunctionHandle::from_fallible_closure(&label, value)
                }
            }
            Direction::Inverse => {
                let label = format!("{}∘g⁻¹[{}]", f.label(), map.g().label());
                let value = {
                    let (map, fc) = (map.clone(), fc.clone());
                    move |x: f64| fc.eval(map.inverse_at(x).map_err(map_to_eval)?)
                };
                if let Ok(df) = f.derivative() {
                    let deriv = {
                        let map = map.clone();
                        move |x: f64| {
                            let u = map.inverse_at(x).map_err(map_to_eval)?;
                            let gp = map.gprime_at(u).map_err(map_to_eval)?;
                            if gp == 0.0 {
                                return Err(EvalError::DomainFault {
                                    what: "inverse substitution derivative at a point where g' vanishes"
                                        .into(),
                                    x,
                                });
                            }
                            Ok(df.eval(u)? / gp)
                        }
                    };
                    FunctionHandle::from_fallible_closure_with_derivative(&label, value, deriv)
                } else {
                    FunctionHandle::from_fallible_closure(&label, value)
                }
            }
        }
    }
}

pub(crate) fn map_to_eval(e: MapError) -> EvalError {
    match e {
        MapError::Eval(inner) => inner,
        MapError::OutOfRange { y, lo, hi } => EvalError::OutOfDomain { x: y, lo, hi },
        other => EvalError::DomainFault {
            what: other.to_string(),
            x: f64::NAN,
        },
    }
}
