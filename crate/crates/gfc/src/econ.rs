//! Memory-aware marginal analysis of sampled economic processes.
//!
//! The input is a time series of observations `(t_i, X_i, Y_i)` where `X`
//! is a cumulative factor (labour, capital, accumulated spend — anything
//! strictly increasing in time) and `Y` is the produced output.  The
//! classical marginal value is the derivative of output with respect to
//! the factor,
//!
//! ```text
//! MY(t) = Y'(t) / X'(t),
//! ```
//!
//! which is memoryless: it reacts only to the instantaneous rates.  The
//! memory-aware variants replace the plain derivative with a derivative of
//! Caputo type taken *with respect to the factor itself*: past increments
//! of `X` are weighted by a singular kernel `K`, so the history of the
//! process influences today's marginal value.  Because the factor serves
//! as the monotone substitution map, every quantity here depends on the
//! path `(X, Y)` only — re-clocking the observations (sampling the same
//! path on a different time scale) leaves the results unchanged.
//!
//! Three marginal modes are offered:
//!
//! * [`MarginalMode::Standard`] — the memoryless ratio of rates;
//! * [`MarginalMode::Fractional`] — power-law memory of order
//!   `alpha ∈ (0, 1]`, the kernel being `x^(-alpha) / Γ(1-alpha)`;
//! * [`MarginalMode::General`] — any certified kernel pair from the
//!   catalog.
//!
//! A [`Normalization::Ratio`] option divides the memory-weighted marginal
//! of `Y` by the one of `X`, restoring the scale-free reading "output per
//! unit factor" (identically `1` when `Y` tracks `X`).  Finally,
//! [`gf_elasticity`] computes the kernel-weighted elasticity: the same
//! derivative applied to `ln Y` with respect to `ln X`, which for a
//! power relation `Y ∝ X^k` recovers the exponent `k` as the memory
//! fades (`alpha → 1`).

use std::fmt;
use std::io::Read;
use std::path::Path;

use serde::Serialize;

use crate::exprfn::{EvalError, FunctionHandle, InterpError};
use crate::kernels::{power_law_pair, KernelError, KernelPair};
use crate::monotone::{MapError, MonotoneMap};
use crate::operators::{
    evaluate, EvalPath, OperatorError, OperatorKind, OperatorRequest, PointFlag, Side,
};
use crate::quadrature::QuadBudget;

/// Fewest observations a series may hold; below this the monotone
/// interpolant is not meaningful.
pub const MIN_SAMPLES: usize = 3;

/// Absolute guard against division by a vanishing factor rate or a
/// vanishing denominator in ratio normalization.
const DIVISION_GUARD: f64 = 1e-12;

/// Memory windows containing fewer samples than this get a warning note:
/// the interpolant between observations then carries most of the signal.
const COARSE_WINDOW_SAMPLES: usize = 8;

/// Midpoint samples used to validate monotonicity when the factor is
/// promoted to a substitution map.
const MAP_VALIDATION_SAMPLES: usize = 64;

/// Relative slack when comparing a kernel pair's reach against the factor
/// span it must cover.
const REACH_SLACK: f64 = 1e-9;

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

/// Failure modes of the economic layer.
///
/// Row positions are reported as 1-based CSV line numbers with the header
/// on line 1, so the first observation lives on line 2.  The programmatic
/// constructor uses the same convention to identify rows.
#[derive(Debug)]
pub enum EconError {
    /// The CSV input (or the row data handed to the constructor) is
    /// malformed at the given line: unreadable record, wrong arity,
    /// non-numeric or non-finite field, or a timestamp that fails to
    /// increase over its predecessor.
    Csv { line: usize, detail: String },
    /// The factor series is not strictly increasing at the given row.
    Monotonicity { line: usize, detail: String },
    /// The series as a whole is unusable (too short, mismatched column
    /// lengths, unreadable file, interpolation rejected the data).
    Data { what: String },
    /// A request parameter lies outside its admissible range.
    Domain { what: String },
    /// The operator could not certify a value at the given time.
    Uncertified { t: f64, detail: String },
    /// Operator-layer failure (grid, parameters, missing derivative).
    Operator(OperatorError),
    /// The factor could not be promoted to a substitution map.
    Map(MapError),
    /// Kernel construction or certification failed.
    Kernel(KernelError),
    /// Evaluating an interpolant or derived handle failed.
    Eval(EvalError),
}

impl fmt::Display for EconError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EconError::Csv { line, detail } => write!(f, "line {line}: {detail}"),
            EconError::Monotonicity { line, detail } => {
                write!(f, "line {line}: factor not strictly increasing: {detail}")
            }
            EconError::Data { what } => write!(f, "unusable series: {what}"),
            EconError::Domain { what } => write!(f, "invalid request: {what}"),
            EconError::Uncertified { t, detail } => {
                write!(f, "no certified value at t = {t}: {detail}")
            }
            EconError::Operator(e) => write!(f, "operator failure: {e}"),
            EconError::Map(e) => write!(f, "factor map failure: {e}"),
            EconError::Kernel(e) => write!(f, "kernel failure: {e}"),
            EconError::Eval(e) => write!(f, "evaluation failure: {e}"),
        }
    }
}

impl std::error::Error for EconError {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            EconError::Operator(e) => Some(e),
            EconError::Map(e) => Some(e),
            EconError::Kernel(e) => Some(e),
            EconError::Eval(e) => Some(e),
            _ => None,
        }
    }
}

impl From<OperatorError> for EconError {
    fn from(e: OperatorError) -> Self {
        EconError::Operator(e)
    }
}

impl From<MapError> for EconError {
    fn from(e: MapError) -> Self {
        EconError::Map(e)
    }
}

impl From<KernelError> for EconError {
    fn from(e: KernelError) -> Self {
        EconError::Kernel(e)
    }
}

impl From<EvalError> for EconError {
    fn from(e: EvalError) -> Self {
        EconError::Eval(e)
    }
}

fn interp_to_data(e: InterpError) -> EconError {
    EconError::Data {
        what: e.to_string(),
    }
}

// ---------------------------------------------------------------------------
// Time series
// ---------------------------------------------------------------------------

/// A validated observation triple `(t, X, Y)` with monotone interpolants.
///
/// Construction guarantees: at least [`MIN_SAMPLES`] observations, all
/// values finite, timestamps strictly increasing, the factor strictly
/// increasing both at the samples and through the interpolated slope at
/// every observation point.
#[derive(Debug, Clone)]
pub struct TimeSeries {
    t: Vec<f64>,
    x: Vec<f64>,
    y: Vec<f64>,
    x_interp: FunctionHandle,
    y_interp: FunctionHandle,
    x_prime: FunctionHandle,
    y_prime: FunctionHandle,
}

impl TimeSeries {
    /// Build a series from parallel columns.  Row positions in errors
    /// follow the CSV convention (first data row = line 2).
    pub fn new(t: Vec<f64>, x: Vec<f64>, y: Vec<f64>) -> Result<Self, EconError> {
        if t.len() != x.len() || t.len() != y.len() {
            return Err(EconError::Data {
                what: format!(
                    "column lengths differ: {} timestamps, {} factor values, {} output values",
                    t.len(),
                    x.len(),
                    y.len()
                ),
            });
        }
        if t.len() < MIN_SAMPLES {
            return Err(EconError::Data {
                what: format!("{} observations; at least {MIN_SAMPLES} required", t.len()),
            });
        }
        for (i, ((&ti, &xi), &yi)) in t.iter().zip(&x).zip(&y).enumerate() {
            if !(ti.is_finite() && xi.is_finite() && yi.is_finite()) {
                return Err(EconError::Csv {
                    line: i + 2,
                    detail: format!("non-finite observation (t = {ti}, X = {xi}, Y = {yi})"),
                });
            }
        }
        for i in 1..t.len() {
            if !(t[i] > t[i - 1]) {
                let kind = if t[i] == t[i - 1] {
                    "duplicate timestamp"
                } else {
                    "out-of-order timestamp"
                };
                return Err(EconError::Csv {
                    line: i + 2,
                    detail: format!("{kind} {} (previous row has {})", t[i], t[i - 1]),
                });
            }
            if !(x[i] > x[i - 1]) {
                return Err(EconError::Monotonicity {
                    line: i + 2,
                    detail: format!(
                        "X = {} does not exceed the previous value {}",
                        x[i],
                        x[i - 1]
                    ),
                });
            }
        }
        let x_interp =
            FunctionHandle::tabulated("X(t)", t.clone(), x.clone()).map_err(interp_to_data)?;
        let y_interp =
            FunctionHandle::tabulated("Y(t)", t.clone(), y.clone()).map_err(interp_to_data)?;
        let x_prime = x_interp.derivative().map_err(|e| EconError::Data {
            what: e.to_string(),
        })?;
        let y_prime = y_interp.derivative().map_err(|e| EconError::Data {
            what: e.to_string(),
        })?;
        // Strictly increasing samples guarantee non-negative interpolated
        // slopes, but the shape-preserving endpoint formula may still
        // clamp to zero on sharply convex data; such a series cannot act
        // as a substitution map, so reject it here with the row named.
        for (i, &ti) in t.iter().enumerate() {
            let slope = x_prime.eval(ti)?;
            if !(slope > 0.0) {
                return Err(EconError::Monotonicity {
                    line: i + 2,
                    detail: format!("interpolated factor slope {slope:e} at t = {ti}"),
                });
            }
        }
        Ok(TimeSeries {
            t,
            x,
            y,
            x_interp,
            y_interp,
            x_prime,
            y_prime,
        })
    }

    /// Parse `t,X,Y` rows from any reader.  The header must be exactly
    /// `t,X,Y` (surrounding whitespace ignored).
    pub fn from_reader<R: Read>(reader: R) -> Result<Self, EconError> {
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(reader);
        let headers = rdr
            .headers()
            .map_err(|e| EconError::Csv {
                line: 1,
                detail: format!("cannot read header: {e}"),
            })?
            .clone();
        let expected = ["t", "X", "Y"];
        if headers.len() != expected.len()
            || headers.iter().zip(expected).any(|(got, want)| got != want)
        {
            return Err(EconError::Csv {
                line: 1,
                detail: format!(
                    "expected header `t,X,Y`, found `{}`",
                    headers.iter().collect::<Vec<_>>().join(",")
                ),
            });
        }
        let mut t = Vec::new();
        let mut x = Vec::new();
        let mut y = Vec::new();
        for (i, record) in rdr.records().enumerate() {
            let fallback_line = i + 2;
            let record = record.map_err(|e| {
                let line = e
                    .position()
                    .map(|p| p.line() as usize)
                    .unwrap_or(fallback_line);
                EconError::Csv {
                    line,
                    detail: e.to_string(),
                }
            })?;
            let line = record
                .position()
                .map(|p| p.line() as usize)
                .unwrap_or(fallback_line);
            if record.len() != 3 {
                return Err(EconError::Csv {
                    line,
                    detail: format!("expected 3 fields `t,X,Y`, found {}", record.len()),
                });
            }
            let field = |idx: usize, name: &str| -> Result<f64, EconError> {
                let raw = record.get(idx).unwrap_or("");
                let v: f64 = raw.parse().map_err(|_| EconError::Csv {
                    line,
                    detail: format!("field `{name}` is not a number: `{raw}`"),
                })?;
                if !v.is_finite() {
                    return Err(EconError::Csv {
                        line,
                        detail: format!("field `{name}` is not finite: `{raw}`"),
                    });
                }
                Ok(v)
            };
            t.push(field(0, "t")?);
            x.push(field(1, "X")?);
            y.push(field(2, "Y")?);
        }
        TimeSeries::new(t, x, y)
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn timestamps(&self) -> &[f64] {
        &self.t
    }

    pub fn factor(&self) -> &[f64] {
        &self.x
    }

    pub fn indicator(&self) -> &[f64] {
        &self.y
    }

    /// First and last observation times.
    pub fn time_range(&self) -> (f64, f64) {
        (self.t[0], self.t[self.t.len() - 1])
    }

    /// The interpolated factor `X(t)`.
    pub fn factor_handle(&self) -> &FunctionHandle {
        &self.x_interp
    }

    /// The interpolated output `Y(t)`.
    pub fn indicator_handle(&self) -> &FunctionHandle {
        &self.y_interp
    }

    fn samples_within(&self, lo: f64, hi: f64) -> usize {
        self.t.iter().filter(|&&v| v >= lo && v <= hi).count()
    }
}

/// Read a series from a CSV file at `path`.
pub fn load_series(path: impl AsRef<Path>) -> Result<TimeSeries, EconError> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| EconError::Data {
        what: format!("cannot open `{}`: {e}", path.display()),
    })?;
    TimeSeries::from_reader(std::io::BufReader::new(file))
}

// ---------------------------------------------------------------------------
// Request types
// ---------------------------------------------------------------------------

/// How the marginal value weights the history of the factor.
#[derive(Debug, Clone)]
pub enum MarginalMode {
    /// Memoryless ratio of instantaneous rates `Y'(t) / X'(t)`.
    Standard,
    /// Power-law memory of order `alpha ∈ (0, 1]`.  At `alpha = 1` the
    /// kernel formula degenerates (its normalizing constant diverges) and
    /// the operator's limit is the plain first derivative with respect to
    /// the factor, which is then computed exactly.
    Fractional { alpha: f64 },
    /// Memory shaped by an arbitrary certified kernel pair; the `K`
    /// member weights past factor increments.
    General { pair: KernelPair },
}

impl MarginalMode {
    /// Stable one-line description for reports.
    pub fn label(&self) -> String {
        match self {
            MarginalMode::Standard => "standard".into(),
            MarginalMode::Fractional { alpha } => format!("fractional(alpha={alpha})"),
            MarginalMode::General { pair } => format!("general({})", pair.params().family),
        }
    }
}

/// Whether to report the kernel-weighted marginal of `Y` alone or its
/// ratio against the kernel-weighted marginal of `X`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Normalization {
    /// The memory-weighted marginal of `Y` as-is.
    Raw,
    /// Divide by the same operator applied to `X` itself; an output that
    /// tracks the factor then scores exactly `1`.
    Ratio,
}

impl Normalization {
    pub fn label(&self) -> &'static str {
        match self {
            Normalization::Raw => "raw",
            Normalization::Ratio => "ratio",
        }
    }
}

/// A complete marginal-value request.
#[derive(Debug, Clone)]
pub struct MarginalSpec {
    pub mode: MarginalMode,
    pub normalization: Normalization,
    /// Where the memory window opens; `None` means the first observation.
    pub window_start: Option<f64>,
}

impl MarginalSpec {
    pub fn standard() -> Self {
        MarginalSpec {
            mode: MarginalMode::Standard,
            normalization: Normalization::Raw,
            window_start: None,
        }
    }

    pub fn fractional(alpha: f64) -> Self {
        MarginalSpec {
            mode: MarginalMode::Fractional { alpha },
            normalization: Normalization::Raw,
            window_start: None,
        }
    }

    pub fn general(pair: KernelPair) -> Self {
        MarginalSpec {
            mode: MarginalMode::General { pair },
            normalization: Normalization::Raw,
            window_start: None,
        }
    }

    pub fn with_normalization(mut self, normalization: Normalization) -> Self {
        self.normalization = normalization;
        self
    }

    pub fn with_window_start(mut self, t: f64) -> Self {
        self.window_start = Some(t);
        self
    }

    fn validate(&self) -> Result<(), EconError> {
        match &self.mode {
            MarginalMode::Standard => Ok(()),
            MarginalMode::Fractional { alpha } => {
                if alpha.is_finite() && *alpha > 0.0 && *alpha <= 1.0 {
                    Ok(())
                } else {
                    Err(EconError::Domain {
                        what: format!("memory order alpha = {alpha} must lie in (0, 1]"),
                    })
                }
            }
            MarginalMode::General { pair } => {
                let certified = pair.certification().map(|r| r.passed()).unwrap_or(false);
                if certified {
                    Ok(())
                } else {
                    Err(EconError::Domain {
                        what: format!(
                            "general mode requires a pair with a passing certification; \
                             `{}` reports variant `{}`",
                            pair.provenance(),
                            pair.certified_variant()
                        ),
                    })
                }
            }
        }
    }
}

/// One computed marginal (or elasticity) value.
#[derive(Debug, Clone, Serialize)]
pub struct MarginalOutcome {
    /// Evaluation time.
    pub t: f64,
    pub value: f64,
    /// Self-reported numerical error bound; `0` for closed-form routes.
    pub err_estimate: f64,
    /// Data-quality warnings (set when the memory window is coarsely
    /// sampled).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

// ---------------------------------------------------------------------------
// Marginal values
// ---------------------------------------------------------------------------

/// Memoryless marginal `Y'(t) / X'(t)` from the interpolated rates.
pub fn standard_marginal(series: &TimeSeries, t: f64) -> Result<f64, EconError> {
    let (lo, hi) = series.time_range();
    if !(t >= lo && t <= hi) {
        return Err(EconError::Domain {
            what: format!("t = {t} outside the observed range [{lo}, {hi}]"),
        });
    }
    let xp = series.x_prime.eval(t)?;
    if xp.abs() < DIVISION_GUARD {
        return Err(EconError::Domain {
            what: format!(
                "factor rate {xp:e} at t = {t} is below the division guard {DIVISION_GUARD:e}"
            ),
        });
    }
    Ok(series.y_prime.eval(t)? / xp)
}

/// Memory-weighted marginal value at a single time.
pub fn memory_marginal(
    series: &TimeSeries,
    spec: &MarginalSpec,
    t: f64,
    budget: &QuadBudget,
) -> Result<MarginalOutcome, EconError> {
    let mut out = memory_marginal_grid(series, spec, &[t], budget)?;
    Ok(out.pop().expect("one requested time yields one outcome"))
}

/// Memory-weighted marginal values on a strictly increasing grid of
/// times.  Every grid point must lie inside the window `(a, t_last]`
/// where `a` is the window start.
pub fn memory_marginal_grid(
    series: &TimeSeries,
    spec: &MarginalSpec,
    ts: &[f64],
    budget: &QuadBudget,
) -> Result<Vec<MarginalOutcome>, EconError> {
    spec.validate()?;
    let (a, t_end) = resolve_window(series, spec.window_start)?;
    if ts.is_empty() {
        return Err(EconError::Domain {
            what: "no evaluation times given".into(),
        });
    }
    for &t in ts {
        if !(t > a && t <= t_end) {
            return Err(EconError::Domain {
                what: format!("evaluation time {t} outside the admissible window ({a}, {t_end}]"),
            });
        }
    }
    // alpha = 1 carries no memory: the operator collapses to the first
    // derivative with respect to the factor, identical to the standard
    // marginal.  The ratio denominator is then dX/dX ≡ 1, so
    // normalization changes nothing on this route.
    let exact_route = || -> Result<Vec<MarginalOutcome>, EconError> {
        ts.iter()
            .map(|&t| {
                Ok(MarginalOutcome {
                    t,
                    value: standard_marginal(series, t)?,
                    err_estimate: 0.0,
                    note: coarse_note(series, a, t),
                })
            })
            .collect()
    };
    match &spec.mode {
        MarginalMode::Standard => exact_route(),
        MarginalMode::Fractional { alpha } if *alpha == 1.0 => exact_route(),
        MarginalMode::Fractional { alpha } => {
            let reach = factor_span(series, a, t_end)?;
            let pair = power_law_pair(*alpha, 1.0, reach)?;
            kernel_route(series, spec, &pair, ts, a, t_end, budget)
        }
        MarginalMode::General { pair } => {
            let reach = factor_span(series, a, t_end)?;
            ensure_reach(pair, reach, "factor span")?;
            kernel_route(series, spec, pair, ts, a, t_end, budget)
        }
    }
}

/// The ratio-normalized memory marginal: `1` whenever `Y` tracks `X`.
pub fn normalized_marginal(
    series: &TimeSeries,
    spec: &MarginalSpec,
    t: f64,
    budget: &QuadBudget,
) -> Result<MarginalOutcome, EconError> {
    let forced = MarginalSpec {
        normalization: Normalization::Ratio,
        ..spec.clone()
    };
    memory_marginal(series, &forced, t, budget)
}

/// Resolve the memory window `[a, t_end]`.
fn resolve_window(series: &TimeSeries, window_start: Option<f64>) -> Result<(f64, f64), EconError> {
    let (t0, t_end) = series.time_range();
    let a = window_start.unwrap_or(t0);
    if !(a.is_finite() && a >= t0 && a < t_end) {
        return Err(EconError::Domain {
            what: format!("window start {a} must lie in [{t0}, {t_end})"),
        });
    }
    Ok((a, t_end))
}

/// Total factor increment over `[a, b]` — the reach a kernel must cover.
fn factor_span(series: &TimeSeries, a: f64, b: f64) -> Result<f64, EconError> {
    Ok(series.x_interp.eval(b)? - series.x_interp.eval(a)?)
}

fn ensure_reach(pair: &KernelPair, span: f64, span_name: &str) -> Result<(), EconError> {
    if pair.length() * (1.0 + REACH_SLACK) < span {
        return Err(EconError::Domain {
            what: format!(
                "kernel pair `{}` reaches {} but the {span_name} over the window is {span}",
                pair.provenance(),
                pair.length()
            ),
        });
    }
    Ok(())
}

/// Shared engine: the Caputo-type derivative of `f` with respect to the
/// map, pointwise over `ts`, with errors surfaced per point.
fn run_operator(
    pair: &KernelPair,
    map: &MonotoneMap,
    f: FunctionHandle,
    ts: &[f64],
    budget: &QuadBudget,
) -> Result<Vec<(f64, f64)>, EconError> {
    let req = OperatorRequest {
        kind: OperatorKind::GfdCaputo,
        side: Side::Left,
        pair: pair.clone(),
        map: map.clone(),
        f,
        eval_grid: ts.to_vec(),
        budget: budget.clone(),
        path: EvalPath::Direct,
    };
    let out = evaluate(&req)?;
    out.points
        .into_iter()
        .map(|p| match p.flag {
            PointFlag::Ok => Ok((
                p.value.expect("Ok point carries a value"),
                p.err_estimate.unwrap_or(0.0),
            )),
            _ => Err(EconError::Uncertified {
                t: p.x,
                detail: p.note.unwrap_or_else(|| format!("{:?}", p.flag)),
            }),
        })
        .collect()
}

fn kernel_route(
    series: &TimeSeries,
    spec: &MarginalSpec,
    pair: &KernelPair,
    ts: &[f64],
    a: f64,
    t_end: f64,
    budget: &QuadBudget,
) -> Result<Vec<MarginalOutcome>, EconError> {
    let map = MonotoneMap::new(series.x_interp.clone(), a, t_end, MAP_VALIDATION_SAMPLES)?;
    let numerator = run_operator(pair, &map, series.y_interp.clone(), ts, budget)?;
    let combined: Vec<(f64, f64)> = match spec.normalization {
        Normalization::Raw => numerator,
        Normalization::Ratio => {
            let denominator = run_operator(pair, &map, series.x_interp.clone(), ts, budget)?;
            numerator
                .into_iter()
                .zip(denominator)
                .zip(ts)
                .map(|(((nv, ne), (dv, de)), &t)| {
                    if dv.abs() < DIVISION_GUARD {
                        return Err(EconError::Domain {
                            what: format!(
                                "normalization denominator {dv:e} at t = {t} is below the \
                                 division guard {DIVISION_GUARD:e}"
                            ),
                        });
                    }
                    let ratio = nv / dv;
                    let err = (ne + ratio.abs() * de) / dv.abs();
                    Ok((ratio, err))
                })
                .collect::<Result<_, _>>()?
        }
    };
    Ok(combined
        .into_iter()
        .zip(ts)
        .map(|((value, err_estimate), &t)| MarginalOutcome {
            t,
            value,
            err_estimate,
            note: coarse_note(series, a, t),
        })
        .collect())
}

fn coarse_note(series: &TimeSeries, a: f64, t: f64) -> Option<String> {
    let n = series.samples_within(a, t);
    (n < COARSE_WINDOW_SAMPLES).then(|| {
        format!(
            "only {n} observations fall inside the memory window [{a}, {t}]; \
             interpolation error may dominate the result"
        )
    })
}

// ---------------------------------------------------------------------------
// Elasticity
// ---------------------------------------------------------------------------

/// Kernel-weighted elasticity of `Y` with respect to `X` at a single
/// time: the Caputo-type derivative of `ln Y` taken with respect to
/// `ln X` over the window starting at `window_start` (default: the first
/// observation).  Both series must be strictly positive on the window.
///
/// For `Y = C · X^k` the power-law version of this quantity equals
/// `k · (ln X(t) - ln X(a))^(1-alpha) / Γ(2-alpha)`, which tends to the
/// classical elasticity `k` as `alpha → 1`.
pub fn gf_elasticity(
    series: &TimeSeries,
    pair: &KernelPair,
    window_start: Option<f64>,
    t: f64,
    budget: &QuadBudget,
) -> Result<MarginalOutcome, EconError> {
    let mut out = gf_elasticity_grid(series, pair, window_start, &[t], budget)?;
    Ok(out.pop().expect("one requested time yields one outcome"))
}

/// Grid variant of [`gf_elasticity`].
pub fn gf_elasticity_grid(
    series: &TimeSeries,
    pair: &KernelPair,
    window_start: Option<f64>,
    ts: &[f64],
    budget: &QuadBudget,
) -> Result<Vec<MarginalOutcome>, EconError> {
    let (a, t_end) = resolve_window(series, window_start)?;
    if ts.is_empty() {
        return Err(EconError::Domain {
            what: "no evaluation times given".into(),
        });
    }
    for &t in ts {
        if !(t > a && t <= t_end) {
            return Err(EconError::Domain {
                what: format!("evaluation time {t} outside the admissible window ({a}, {t_end}]"),
            });
        }
    }
    for (i, &ti) in series.t.iter().enumerate() {
        if ti < a || ti > t_end {
            continue;
        }
        if series.x[i] <= 0.0 {
            return Err(EconError::Domain {
                what: format!(
                    "factor X = {} at row {} (t = {ti}) is not positive; \
                     the log scale is undefined",
                    series.x[i],
                    i + 2
                ),
            });
        }
        if series.y[i] <= 0.0 {
            return Err(EconError::Domain {
                what: format!(
                    "output Y = {} at row {} (t = {ti}) is not positive; \
                     the log scale is undefined",
                    series.y[i],
                    i + 2
                ),
            });
        }
    }
    let log_span = {
        let xa = series.x_interp.eval(a)?;
        let xb = series.x_interp.eval(t_end)?;
        if !(xa > 0.0 && xb > 0.0) {
            return Err(EconError::Domain {
                what: "interpolated factor is not positive at the window ends".into(),
            });
        }
        xb.ln() - xa.ln()
    };
    ensure_reach(pair, log_span, "log-factor span")?;
    let ln_x = log_scale_handle("ln X(t)", &series.x_interp, &series.x_prime, "factor");
    let ln_y = log_scale_handle("ln Y(t)", &series.y_interp, &series.y_prime, "output");
    let map = MonotoneMap::new(ln_x, a, t_end, MAP_VALIDATION_SAMPLES)?;
    let points = run_operator(pair, &map, ln_y, ts, budget)?;
    Ok(points
        .into_iter()
        .zip(ts)
        .map(|((value, err_estimate), &t)| MarginalOutcome {
            t,
            value,
            err_estimate,
            note: coarse_note(series, a, t),
        })
        .collect())
}

/// Compose `ln` with an interpolated positive series, carrying the exact
/// derivative `f'(t) / f(t)`.
fn log_scale_handle(
    label: &str,
    value: &FunctionHandle,
    rate: &FunctionHandle,
    role: &'static str,
) -> FunctionHandle {
    let v_handle = value.clone();
    let dv_value = value.clone();
    let dv_rate = rate.clone();
    FunctionHandle::from_fallible_closure_with_derivative(
        label,
        move |u| {
            let v = v_handle.eval(u)?;
            if v > 0.0 {
                Ok(v.ln())
            } else {
                Err(EvalError::DomainFault {
                    what: format!("{role} is not positive; log scale undefined"),
                    x: u,
                })
            }
        },
        move |u| {
            let v = dv_value.eval(u)?;
            if v > 0.0 {
                Ok(dv_rate.eval(u)? / v)
            } else {
                Err(EvalError::DomainFault {
                    what: format!("{role} is not positive; log scale undefined"),
                    x: u,
                })
            }
        },
    )
}

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct MarginalReport<'a> {
    mode: String,
    normalization: &'static str,
    window_start: Option<f64>,
    points: &'a [MarginalOutcome],
}

/// JSON report of a marginal-value run with the request echoed.
pub fn marginal_report_json(
    spec: &MarginalSpec,
    points: &[MarginalOutcome],
) -> Result<String, serde_json::Error> {
    serde_json::to_string_pretty(&MarginalReport {
        mode: spec.mode.label(),
        normalization: spec.normalization.label(),
        window_start: spec.window_start,
        points,
    })
}

/// JSON report of an elasticity run with the kernel echoed.
pub fn elasticity_report_json(
    pair: &KernelPair,
    window_start: Option<f64>,
    points: &[MarginalOutcome],
) -> Result<String, serde_json::Error> {
    serde_json::to_string_pretty(&MarginalReport {
        mode: format!("elasticity({})", pair.params().family),
        normalization: "raw",
        window_start,
        points,
    })
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{mittag_leffler_pair, standard_catalog};
    use crate::specialfns::gamma;
    use std::io::Cursor;

    fn budget() -> QuadBudget {
        QuadBudget::default()
    }

    /// Uniform sampling of `(t, X(t), Y(t))` on `[0, hi]`.
    fn sampled(
        n: usize,
        hi: f64,
        x_of: impl Fn(f64) -> f64,
        y_of: impl Fn(f64) -> f64,
    ) -> TimeSeries {
        let t: Vec<f64> = (0..n).map(|i| hi * i as f64 / (n - 1) as f64).collect();
        let x: Vec<f64> = t.iter().map(|&v| x_of(v)).collect();
        let y: Vec<f64> = t.iter().map(|&v| y_of(v)).collect();
        TimeSeries::new(t, x, y).expect("sampled series is valid")
    }

    #[test]
    fn loader_accepts_well_formed_csv() {
        let csv = "t,X,Y\n0,1.0,1\n1, 2 ,4\n2,3,9\n";
        let s = TimeSeries::from_reader(Cursor::new(csv)).unwrap();
        assert_eq!(s.len(), 3);
        assert_eq!(s.time_range(), (0.0, 2.0));
        assert_eq!(s.factor(), &[1.0, 2.0, 3.0]);
        assert_eq!(s.indicator(), &[1.0, 4.0, 9.0]);
    }

    #[test]
    fn loader_rejects_malformed_input() {
        let wrong_header = "time,X,Y\n0,1,1\n1,2,2\n2,3,3\n";
        match TimeSeries::from_reader(Cursor::new(wrong_header)) {
            Err(EconError::Csv { line: 1, detail }) => assert!(detail.contains("t,X,Y")),
            other => panic!("expected header rejection, got {other:?}"),
        }

        let bad_number = "t,X,Y\n0,abc,1\n1,2,2\n2,3,3\n";
        match TimeSeries::from_reader(Cursor::new(bad_number)) {
            Err(EconError::Csv { line: 2, detail }) => assert!(detail.contains('X')),
            other => panic!("expected numeric rejection, got {other:?}"),
        }

        let non_finite = "t,X,Y\n0,1,1\n1,NaN,2\n2,3,3\n";
        match TimeSeries::from_reader(Cursor::new(non_finite)) {
            Err(EconError::Csv { line: 3, detail }) => assert!(detail.contains("finite")),
            other => panic!("expected finiteness rejection, got {other:?}"),
        }

        let wrong_arity = "t,X,Y\n0,1,1\n1,2\n2,3,3\n";
        match TimeSeries::from_reader(Cursor::new(wrong_arity)) {
            Err(EconError::Csv { line: 3, .. }) => {}
            other => panic!("expected arity rejection, got {other:?}"),
        }

        let duplicate_t = "t,X,Y\n0,1,1\n1,2,2\n1,3,3\n";
        match TimeSeries::from_reader(Cursor::new(duplicate_t)) {
            Err(EconError::Csv { line: 4, detail }) => assert!(detail.contains("duplicate")),
            other => panic!("expected duplicate-timestamp rejection, got {other:?}"),
        }

        let decreasing_x = "t,X,Y\n0,1,1\n1,3,2\n2,2,3\n";
        match TimeSeries::from_reader(Cursor::new(decreasing_x)) {
            Err(EconError::Monotonicity { line: 4, .. }) => {}
            other => panic!("expected monotonicity rejection, got {other:?}"),
        }

        let too_short = "t,X,Y\n0,1,1\n1,2,2\n";
        match TimeSeries::from_reader(Cursor::new(too_short)) {
            Err(EconError::Data { what }) => assert!(what.contains("at least")),
            other => panic!("expected short-series rejection, got {other:?}"),
        }
    }

    #[test]
    fn programmatic_series_validation() {
        match TimeSeries::new(vec![0.0, 1.0, 2.0], vec![1.0, 2.0], vec![1.0, 2.0, 3.0]) {
            Err(EconError::Data { what }) => assert!(what.contains("lengths")),
            other => panic!("expected length mismatch, got {other:?}"),
        }

        // A factor that creeps upward below the division guard passes
        // construction (it is strictly increasing) but the memoryless
        // marginal must refuse to divide by its rate.
        let s = TimeSeries::new(
            vec![0.0, 1.0, 2.0],
            vec![0.0, 1e-13, 2e-13],
            vec![0.0, 1.0, 2.0],
        )
        .unwrap();
        match standard_marginal(&s, 1.0) {
            Err(EconError::Domain { what }) => assert!(what.contains("division guard")),
            other => panic!("expected division guard, got {other:?}"),
        }
    }

    #[test]
    fn standard_marginal_matches_chain_rule() {
        // Y = X^3 with X = 1 + t/2: dY/dX = 3 X^2 regardless of the clock.
        let s = sampled(801, 2.0, |t| 1.0 + 0.5 * t, |t| (1.0 + 0.5 * t).powi(3));
        for &t in &[0.4, 1.0, 1.6] {
            let x = 1.0 + 0.5 * t;
            let got = standard_marginal(&s, t).unwrap();
            let want = 3.0 * x * x;
            assert!(
                (got - want).abs() < 2e-4 * want,
                "t = {t}: got {got}, want {want}"
            );
        }
    }

    #[test]
    fn power_function_rule_on_sampled_data() {
        // X = 1 + t, Y = (X - X(0))^beta: the power-law memory marginal of
        // order alpha has the closed form
        //     Γ(beta+1) / Γ(beta-alpha+1) · (X - X(0))^(beta-alpha).
        let alpha = 0.5;
        let check = |beta: f64, tol: f64| {
            let s = sampled(801, 2.0, |t| 1.0 + t, |t| t.powf(beta));
            let spec = MarginalSpec::fractional(alpha);
            for &t in &[0.9, 1.5] {
                let out = memory_marginal(&s, &spec, t, &budget()).unwrap();
                let want = gamma(beta + 1.0).unwrap() / gamma(beta - alpha + 1.0).unwrap()
                    * t.powf(beta - alpha);
                assert!(
                    (out.value - want).abs() < tol,
                    "beta = {beta}, t = {t}: got {}, want {want}, diff {:.2e}",
                    out.value,
                    (out.value - want).abs()
                );
            }
        };
        // A smooth indicator and one with a singular slope at the window
        // edge; the second leans harder on the interpolant near zero.
        check(2.0, 1e-3);
        check(1.5, 5e-3);
    }

    #[test]
    fn linear_indicator_closed_form() {
        // Y = X - X(0) is exactly representable by the interpolant, so the
        // only error left is the quadrature itself:
        //     D^alpha (X - X(0)) = (X - X(0))^(1-alpha) / Γ(2-alpha).
        let alpha = 0.5;
        let s = sampled(401, 2.0, |t| 1.0 + t, |t| t);
        let spec = MarginalSpec::fractional(alpha);
        for &t in &[0.7, 1.5, 2.0] {
            let out = memory_marginal(&s, &spec, t, &budget()).unwrap();
            let want = t.powf(1.0 - alpha) / gamma(2.0 - alpha).unwrap();
            assert!(
                (out.value - want).abs() < 1e-6,
                "t = {t}: got {}, want {want}, diff {:.2e}",
                out.value,
                (out.value - want).abs()
            );
        }
    }

    #[test]
    fn window_shift_annihilates_constants() {
        // Opening the window at a > t0 means memory starts there; the
        // constant X(a) - X(0) carried into the indicator is annihilated
        // by the Caputo construction, leaving
        //     (X - X(a))^(1-alpha) / Γ(2-alpha).
        let alpha = 0.5;
        let s = sampled(401, 2.0, |t| 1.0 + t, |t| t);
        let spec = MarginalSpec::fractional(alpha).with_window_start(0.5);
        let t = 1.5;
        let out = memory_marginal(&s, &spec, t, &budget()).unwrap();
        let want = (t - 0.5f64).powf(1.0 - alpha) / gamma(2.0 - alpha).unwrap();
        assert!(
            (out.value - want).abs() < 1e-6,
            "got {}, want {want}, diff {:.2e}",
            out.value,
            (out.value - want).abs()
        );
    }

    #[test]
    fn full_memory_limit_matches_standard_marginal() {
        let s = sampled(401, 2.0, |t| 1.0 + t, |t| t);
        let t = 1.5;

        // alpha = 1 is the exact memoryless limit: same closed route.
        let exact = memory_marginal(&s, &MarginalSpec::fractional(1.0), t, &budget()).unwrap();
        let std = standard_marginal(&s, t).unwrap();
        assert!(
            (exact.value - std).abs() <= 1e-12,
            "alpha = 1: {} vs {std}",
            exact.value
        );
        assert_eq!(exact.err_estimate, 0.0);

        // Slightly below 1 the kernel route must approach the same value.
        let near = memory_marginal(&s, &MarginalSpec::fractional(0.999), t, &budget()).unwrap();
        assert!(
            (near.value - std).abs() < 0.01 * std.abs().max(1.0),
            "alpha = 0.999: {} vs {std}",
            near.value
        );
    }

    #[test]
    fn fractional_and_general_power_modes_agree() {
        let alpha = 0.4;
        let s = sampled(401, 2.0, |t| 1.0 + t, |t| t * t);
        let reach = 2.2; // comfortably above X(2) - X(0) = 2
        let pair = power_law_pair(alpha, 1.0, reach).unwrap();
        let frac = MarginalSpec::fractional(alpha);
        let gen = MarginalSpec::general(pair);
        for &t in &[0.8, 1.7] {
            let a = memory_marginal(&s, &frac, t, &budget()).unwrap();
            let b = memory_marginal(&s, &gen, t, &budget()).unwrap();
            assert!(
                (a.value - b.value).abs() < 1e-8,
                "t = {t}: fractional {} vs general {}",
                a.value,
                b.value
            );
        }
    }

    #[test]
    fn normalized_marginal_is_one_when_output_tracks_factor() {
        let s = sampled(301, 2.0, |t| 1.0 + t, |t| 1.0 + t);
        let t = 1.3;
        let reach = 2.05;
        for pair in standard_catalog(reach).unwrap() {
            let label = pair.provenance().to_string();
            let spec = MarginalSpec::general(pair);
            let out = normalized_marginal(&s, &spec, t, &budget()).unwrap();
            assert!(
                (out.value - 1.0).abs() < 1e-10,
                "{label}: normalized marginal {} should be 1",
                out.value
            );
        }
        let spec = MarginalSpec::fractional(1.0);
        let out = normalized_marginal(&s, &spec, t, &budget()).unwrap();
        assert!((out.value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn normalized_marginal_scales_linearly() {
        let s = sampled(301, 2.0, |t| 1.0 + t, |t| 2.0 + 2.0 * t);
        let spec = MarginalSpec::fractional(0.5);
        let out = normalized_marginal(&s, &spec, 1.3, &budget()).unwrap();
        assert!(
            (out.value - 2.0).abs() < 1e-9,
            "Y = 2X should normalize to 2, got {}",
            out.value
        );
    }

    #[test]
    fn memory_marginal_annihilates_constant_output() {
        let s = sampled(301, 2.0, |t| 1.0 + t, |_| 7.0);
        let frac = MarginalSpec::fractional(0.5);
        let out = memory_marginal(&s, &frac, 1.3, &budget()).unwrap();
        assert!(out.value.abs() <= 1e-12, "constant output: {}", out.value);

        let ml = mittag_leffler_pair(0.5, 0.5, 1.0, 2.05).unwrap();
        let gen = MarginalSpec::general(ml);
        let out = memory_marginal(&s, &gen, 1.3, &budget()).unwrap();
        assert!(out.value.abs() <= 1e-12, "constant output: {}", out.value);
    }

    #[test]
    fn marginal_is_invariant_under_time_reparametrization() {
        use proptest::prelude::*;

        // One path (X, Y), two clocks.  Series 1 samples it uniformly in
        // u; series 2 re-clocks via s = u + c u^2 / 4 and samples
        // uniformly in s, so the observation points differ as well.  The
        // memory marginal must agree at matching path positions up to
        // interpolation error.
        let x_of = |u: f64| 1.0 + u + 0.25 * u * u;
        let y_of = |u: f64| x_of(u).powf(1.5);
        let u_star = 1.4;
        let n = 401;

        let mut runner = proptest::test_runner::TestRunner::new(proptest::test_runner::Config {
            cases: 6,
            ..proptest::test_runner::Config::default()
        });
        runner
            .run(&(0.1f64..2.0), |c| {
                let s1 = sampled(n, 2.0, x_of, y_of);
                let s_end = 2.0 + c;
                let u_of_s = |s: f64| 2.0 * ((1.0 + c * s).sqrt() - 1.0) / c;
                let t2: Vec<f64> = (0..n)
                    .map(|i| s_end * i as f64 / (n - 1) as f64)
                    .collect();
                let x2: Vec<f64> = t2.iter().map(|&s| x_of(u_of_s(s))).collect();
                let y2: Vec<f64> = t2.iter().map(|&s| y_of(u_of_s(s))).collect();
                let s2 = TimeSeries::new(t2, x2, y2).expect("re-clocked series is valid");

                let spec = MarginalSpec::fractional(0.5);
                let v1 = memory_marginal(&s1, &spec, u_star, &budget())
                    .expect("clock 1 evaluates")
                    .value;
                let s_star = u_star + 0.25 * c * u_star * u_star;
                let v2 = memory_marginal(&s2, &spec, s_star, &budget())
                    .expect("clock 2 evaluates")
                    .value;
                prop_assert!(
                    (v1 - v2).abs() < 5e-4,
                    "c = {c}: clock 1 gives {v1}, clock 2 gives {v2}"
                );
                Ok(())
            })
            .unwrap();
    }

    #[test]
    fn elasticity_recovers_power_law_exponent() {
        let k = 0.7;
        let s = sampled(401, 2.0, |t| 1.0 + t, |t| 2.0 * (1.0 + t).powf(k));
        let t = 1.5;
        let log_reach = 3.0f64.ln() * 1.05;

        // Near alpha = 1 the memory fades and the classical elasticity
        // (the exponent itself) must emerge.
        let pair = power_law_pair(0.999, 1.0, log_reach).unwrap();
        let out = gf_elasticity(&s, &pair, None, t, &budget()).unwrap();
        assert!(
            (out.value - k).abs() < 0.01 * k,
            "alpha near 1: elasticity {} should approximate {k}",
            out.value
        );

        // At alpha = 0.5 the closed form is k (ln X - ln X(0))^(1/2) / Γ(3/2).
        let pair = power_law_pair(0.5, 1.0, log_reach).unwrap();
        let out = gf_elasticity(&s, &pair, None, t, &budget()).unwrap();
        let w = (1.0 + t).ln();
        let want = k * w.sqrt() / gamma(1.5).unwrap();
        assert!(
            (out.value - want).abs() < 1e-4,
            "alpha = 0.5: got {}, want {want}, diff {:.2e}",
            out.value,
            (out.value - want).abs()
        );
    }

    #[test]
    fn elasticity_of_constant_output_is_zero() {
        let s = sampled(301, 2.0, |t| 1.0 + t, |_| 3.0);
        let pair = power_law_pair(0.5, 1.0, 1.2).unwrap();
        let out = gf_elasticity(&s, &pair, None, 1.3, &budget()).unwrap();
        assert!(out.value.abs() <= 1e-12, "got {}", out.value);
    }

    #[test]
    fn elasticity_requires_positive_series() {
        // X strictly increasing but negative at the start.
        let s = sampled(301, 2.0, |t| t - 0.5, |_| 3.0);
        let pair = power_law_pair(0.5, 1.0, 5.0).unwrap();
        match gf_elasticity(&s, &pair, None, 1.3, &budget()) {
            Err(EconError::Domain { what }) => {
                assert!(what.contains("not positive") && what.contains("row 2"), "{what}");
            }
            other => panic!("expected positivity rejection, got {other:?}"),
        }

        let s = sampled(301, 2.0, |t| 1.0 + t, |t| t - 0.5);
        match gf_elasticity(&s, &pair, None, 1.3, &budget()) {
            Err(EconError::Domain { what }) => {
                assert!(what.contains("output") && what.contains("not positive"), "{what}");
            }
            other => panic!("expected positivity rejection, got {other:?}"),
        }
    }

    #[test]
    fn coarse_window_is_flagged() {
        let s = sampled(10, 2.0, |t| 1.0 + t, |t| t);
        let spec = MarginalSpec::fractional(0.5);
        let out = memory_marginal(&s, &spec, 0.9, &budget()).unwrap();
        let note = out.note.expect("coarse window must carry a note");
        assert!(note.contains("observations"), "{note}");

        let dense = sampled(301, 2.0, |t| 1.0 + t, |t| t);
        let out = memory_marginal(&dense, &spec, 0.9, &budget()).unwrap();
        assert!(out.note.is_none(), "dense window should not warn");
    }

    #[test]
    fn uncertified_pairs_are_rejected_in_general_mode() {
        let certified = power_law_pair(0.5, 1.0, 2.0).unwrap();
        let stripped = KernelPair::from_parts_uncertified(
            certified.m().clone(),
            certified.k().clone(),
            certified.params().clone(),
            "stripped",
        );
        let s = sampled(301, 1.5, |t| 1.0 + t, |t| t);
        let spec = MarginalSpec::general(stripped);
        match memory_marginal(&s, &spec, 1.0, &budget()) {
            Err(EconError::Domain { what }) => assert!(what.contains("certification"), "{what}"),
            other => panic!("expected certification rejection, got {other:?}"),
        }
    }

    #[test]
    fn kernel_reach_must_cover_factor_span() {
        let s = sampled(301, 2.0, |t| 1.0 + t, |t| t);
        let short = power_law_pair(0.5, 1.0, 0.5).unwrap();
        let spec = MarginalSpec::general(short);
        match memory_marginal(&s, &spec, 1.5, &budget()) {
            Err(EconError::Domain { what }) => assert!(what.contains("reaches"), "{what}"),
            other => panic!("expected reach rejection, got {other:?}"),
        }
    }

    #[test]
    fn json_report_echoes_request() {
        let spec = MarginalSpec::fractional(0.5).with_normalization(Normalization::Ratio);
        let points = vec![
            MarginalOutcome {
                t: 1.0,
                value: 2.5,
                err_estimate: 1e-9,
                note: None,
            },
            MarginalOutcome {
                t: 1.5,
                value: 2.75,
                err_estimate: 2e-9,
                note: Some("coarse".into()),
            },
        ];
        let json = marginal_report_json(&spec, &points).unwrap();
        let v: serde_json::Value = serde_json::from_str(&json).unwrap();
        assert_eq!(v["mode"], "fractional(alpha=0.5)");
        assert_eq!(v["normalization"], "ratio");
        assert!(v["window_start"].is_null());
        assert_eq!(v["points"].as_array().unwrap().len(), 2);
        assert_eq!(v["points"][0]["t"], 1.0);
        assert!(v["points"][0].get("note").is_none());
        assert_eq!(v["points"][1]["note"], "coarse");
    }
}
