//! Kernel pairs for general fractional integrals and derivatives.
//!
//! A pair `(M, K)` qualifies when the Sonin condition holds on the working
//! interval: `∫₀ˣ M(x−z) K(z) dz = 1` for all `x` in `(0, L]`.  Every
//! kernel is stored in factored form `k(x) = x^p · G(x)` with `p > −1` and
//! `G` continuous on `[0, L]`, which is exactly what the weighted
//! quadrature in [`crate::quadrature`] needs.
//!
//! The catalog ships three families — power-law, tempered power-law, and
//! Mittag-Leffler — plus the swap `(M, K) ↦ (λ⁻¹K, λM)`.  Where printed
//! sources give internally inconsistent formulas for `K`, construction
//! *adjudicates*: each candidate reading is run through the Sonin
//! certifier and the first one that passes is kept, with the choice
//! recorded in the pair's provenance and report notes.  The defining
//! condition, not the formula, is the arbiter.

use crate::exprfn::{EvalError, FunctionHandle};
use crate::quadrature::{singular_convolution, QuadBudget};
use crate::specialfns::{
    beta as beta_function, gamma, lower_incomplete_gamma, mittag_leffler, CompiledMlNegAxis,
    MLParams, SpecialFnError,
};
use crate::verify::{ResidualPoint, ResidualReport};
use serde::Serialize;
use std::collections::HashMap;
use std::sync::{Arc, RwLock};

/// Absolute quadrature tolerance used for each Sonin integral; both halves
/// of the split share it evenly.
pub const SONIN_QUAD_TOL: f64 = 1e-10;

/// Grid size used for construction-time adjudication of kernel readings.
const ADJUDICATION_GRID_SIZE: usize = 12;

/// Certification tolerance used at construction time.
const ADJUDICATION_TOLERANCE: f64 = 1e-7;

/// Physical dimension as an integer power of length.  Catalog `M` kernels
/// are dimensionless (power 0) and `K` kernels carry inverse length
/// (power −1); Laplace convolution adds the powers plus one for the
/// integration measure.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Dimension(i32);

impl Dimension {
    pub const DIMENSIONLESS: Dimension = Dimension(0);
    pub const INVERSE_LENGTH: Dimension = Dimension(-1);

    pub fn length_power(self) -> i32 {
        self.0
    }

    /// Dimension of the Laplace convolution of two kernels.
    pub fn convolved(self, other: Dimension) -> Dimension {
        Dimension(self.0 + other.0 + 1)
    }

    /// Dimension after multiplying by the rate λ (inverse length).
    pub fn times_rate(self) -> Dimension {
        Dimension(self.0 - 1)
    }

    /// Dimension after dividing by the rate λ.
    pub fn over_rate(self) -> Dimension {
        Dimension(self.0 + 1)
    }
}

impl std::fmt::Display for Dimension {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.0 {
            0 => f.write_str("dimensionless"),
            -1 => f.write_str("inverse-length"),
            k => write!(f, "length^{k}"),
        }
    }
}

#[derive(Debug, Clone)]
pub enum KernelError {
    BadParameter { what: String },
    /// No candidate reading satisfied the Sonin condition; each attempt is
    /// listed with its certification summary.
    CertificationFailure {
        label: String,
        attempts: Vec<(String, String)>,
    },
    Special(SpecialFnError),
    Eval(EvalError),
}

impl std::fmt::Display for KernelError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            KernelError::BadParameter { what } => write!(f, "invalid kernel parameter: {what}"),
            KernelError::CertificationFailure { label, attempts } => {
                write!(f, "no reading of `{label}` satisfied the Sonin condition:")?;
                for (variant, outcome) in attempts {
                    write!(f, "\n  [{variant}] {outcome}")?;
                }
                Ok(())
            }
            KernelError::Special(e) => write!(f, "special-function failure: {e}"),
            KernelError::Eval(e) => write!(f, "kernel evaluation failure: {e}"),
        }
    }
}

impl std::error::Error for KernelError {}

impl From<SpecialFnError> for KernelError {
    fn from(e: SpecialFnError) -> Self {
        KernelError::Special(e)
    }
}

impl From<EvalError> for KernelError {
    fn from(e: EvalError) -> Self {
        KernelError::Eval(e)
    }
}

fn special_to_eval(e: SpecialFnError, x: f64) -> EvalError {
    EvalError::DomainFault {
        what: e.to_string(),
        x,
    }
}

/// A kernel in the factored form `k(x) = x^p · G(x)` on `(0, L]`, with
/// `p > −1` and `G` continuous up to `x = 0`.
#[derive(Debug, Clone)]
pub struct SingularKernel {
    exponent: f64,
    regular: FunctionHandle,
    length: f64,
    dimension: Dimension,
    rough_regular: bool,
}

impl SingularKernel {
    pub fn new(
        exponent: f64,
        regular: FunctionHandle,
        length: f64,
        dimension: Dimension,
    ) -> Result<Self, KernelError> {
        if !(exponent > -1.0) || !exponent.is_finite() {
            return Err(KernelError::BadParameter {
                what: format!("kernel exponent must satisfy p > -1, got {exponent}"),
            });
        }
        if !(length > 0.0) || !length.is_finite() {
            return Err(KernelError::BadParameter {
                what: format!("kernel length must be positive and finite, got {length}"),
            });
        }
        Ok(SingularKernel {
            exponent,
            regular,
            length,
            dimension,
            rough_regular: false,
        })
    }

    /// Declare that `G` is continuous but not smooth at `0` (it carries
    /// fractional powers of `x` beyond the `x^p` factor, as the
    /// Mittag-Leffler kernels do).  Quadratures over such a kernel must
    /// not rely on polynomial convergence of `G` and switch to the
    /// double-exponential route.
    pub fn mark_rough_regular(mut self) -> Self {
        self.rough_regular = true;
        self
    }

    /// Whether `G` may be treated as smooth at `0` by polynomial rules.
    pub fn regular_is_smooth(&self) -> bool {
        !self.rough_regular
    }

    pub fn exponent(&self) -> f64 {
        self.exponent
    }

    pub fn regular(&self) -> &FunctionHandle {
        &self.regular
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn dimension(&self) -> Dimension {
        self.dimension
    }

    /// Full kernel value `x^p · G(x)`.
    pub fn eval(&self, x: f64) -> Result<f64, EvalError> {
        if x < 0.0 {
            return Err(EvalError::DomainFault {
                what: "kernel argument must be non-negative".into(),
                x,
            });
        }
        if x == 0.0 && self.exponent < 0.0 {
            return Err(EvalError::DomainFault {
                what: format!("kernel is singular at 0 (exponent {})", self.exponent),
                x,
            });
        }
        Ok(x.powf(self.exponent) * self.regular.eval(x)?)
    }

    /// The kernel multiplied by a constant, with an explicitly supplied
    /// dimension for the result (scaling by a dimensionful rate changes
    /// the bookkeeping).
    pub fn scaled(&self, factor: f64, dimension: Dimension) -> SingularKernel {
        let inner = self.regular.clone();
        let label = format!("{factor} * {}", self.regular.label());
        SingularKernel {
            exponent: self.exponent,
            regular: FunctionHandle::from_fallible_closure(&label, move |x| {
                Ok(factor * inner.eval(x)?)
            }),
            length: self.length,
            dimension,
            rough_regular: self.rough_regular,
        }
    }
}

/// Parameter record for a catalog pair.
#[derive(Debug, Clone, Serialize)]
pub struct KernelParams {
    pub family: String,
    pub alpha: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    pub lambda: f64,
}

/// A certified Sonin pair `(M, K)`.
#[derive(Debug, Clone)]
pub struct KernelPair {
    m: SingularKernel,
    k: SingularKernel,
    params: KernelParams,
    provenance: String,
    certified_variant: String,
    certification: Option<ResidualReport>,
}

impl KernelPair {
    pub fn m(&self) -> &SingularKernel {
        &self.m
    }

    pub fn k(&self) -> &SingularKernel {
        &self.k
    }

    pub fn params(&self) -> &KernelParams {
        &self.params
    }

    pub fn provenance(&self) -> &str {
        &self.provenance
    }

    /// Which reading of the kernel formula passed certification.
    pub fn certified_variant(&self) -> &str {
        &self.certified_variant
    }

    /// The construction-time certification report, if any.
    pub fn certification(&self) -> Option<&ResidualReport> {
        self.certification.as_ref()
    }

    pub fn length(&self) -> f64 {
        self.m.length.min(self.k.length)
    }

    /// Assemble a pair without running the certifier.  Intended for
    /// negative controls in tests and for callers that certify separately;
    /// such a pair reports variant `"uncertified"`.
    pub fn from_parts_uncertified(
        m: SingularKernel,
        k: SingularKernel,
        params: KernelParams,
        provenance: impl Into<String>,
    ) -> KernelPair {
        KernelPair {
            m,
            k,
            params,
            provenance: provenance.into(),
            certified_variant: "uncertified".into(),
            certification: None,
        }
    }

    /// Catalog row for JSON export.
    pub fn describe(&self) -> CatalogEntry {
        CatalogEntry {
            name: self.params.family.clone(),
            parameters: self.params.clone(),
            exponent_m: self.m.exponent,
            exponent_k: self.k.exponent,
            dimension_m: self.m.dimension.to_string(),
            dimension_k: self.k.dimension.to_string(),
            certified_variant: self.certified_variant.clone(),
            residual: self.certification.as_ref().and_then(|r| r.sup_residual),
        }
    }
}

/// JSON-exportable catalog row.
#[derive(Debug, Clone, Serialize)]
pub struct CatalogEntry {
    pub name: String,
    pub parameters: KernelParams,
    pub exponent_m: f64,
    pub exponent_k: f64,
    pub dimension_m: String,
    pub dimension_k: String,
    pub certified_variant: String,
    pub residual: Option<f64>,
}

/// Geometric grid of `n` points in `(0, L]`, reaching down to `L·2⁻³⁰` so
/// small-argument behaviour is always stressed.
pub fn geometric_grid(length: f64, n: usize) -> Vec<f64> {
    if n <= 1 {
        return vec![length];
    }
    (1..=n)
        .map(|j| length * 2f64.powf(-30.0 * (n - j) as f64 / (n - 1) as f64))
        .collect()
}

/// The Sonin integral `∫₀ˣ M(x−z) K(z) dz` minus one.  The integral is
/// split at `x/2` so each half carries exactly one endpoint singularity,
/// and each half is sampled by the distance to its own singular point,
/// which the weighted quadrature resolves to arbitrary depth.
fn sonin_residual_at(m: &SingularKernel, k: &SingularKernel, x: f64) -> Result<f64, String> {
    let budget = QuadBudget {
        tolerance: 0.5 * SONIN_QUAD_TOL,
        ..QuadBudget::default()
    };
    let half = 0.5 * x;
    // z ∈ [0, x/2]: weight z^{p_K} in the rule, distance d = z.
    let left_integrand = |d: f64| -> Result<f64, String> {
        let u = x - d; // ∈ [x/2, x]: the M factor is regular here
        let gk = k.regular.eval(d).map_err(|e| e.to_string())?;
        let gm = m.regular.eval(u).map_err(|e| e.to_string())?;
        Ok(gk * u.powf(m.exponent) * gm)
    };
    let left = singular_convolution(&left_integrand, k.exponent, half, &budget)
        .map_err(|e| format!("lower half: {e}"))?;
    // z ∈ [x/2, x]: weight (x−z)^{p_M} in the rule, distance d = x − z.
    let right_integrand = |d: f64| -> Result<f64, String> {
        let z = x - d; // ∈ [x/2, x]: the K factor is regular here
        let gm = m.regular.eval(d).map_err(|e| e.to_string())?;
        let gk = k.regular.eval(z).map_err(|e| e.to_string())?;
        Ok(gm * z.powf(k.exponent) * gk)
    };
    let right = singular_convolution(&right_integrand, m.exponent, x - half, &budget)
        .map_err(|e| format!("upper half: {e}"))?;
    Ok(left.value + right.value - 1.0)
}

fn certify_kernels(
    m: &SingularKernel,
    k: &SingularKernel,
    grid_size: usize,
    tol: f64,
    fingerprint: String,
    notes: Vec<String>,
) -> ResidualReport {
    let grid = geometric_grid(m.length.min(k.length), grid_size);
    let points = grid
        .iter()
        .map(|&x| match sonin_residual_at(m, k, x) {
            Ok(r) => ResidualPoint::evaluated(x, r),
            Err(e) => ResidualPoint::inconclusive(x, e),
        })
        .collect();
    ResidualReport::from_points("sonin-condition", fingerprint, tol, points, notes)
}

/// Certify an assembled pair on a geometric grid.
pub fn sonin_certify(pair: &KernelPair, grid_size: usize, tol: f64) -> ResidualReport {
    certify_kernels(
        &pair.m,
        &pair.k,
        grid_size,
        tol,
        format!(
            "pair={}; L={}; grid={grid_size}; quad-tol={SONIN_QUAD_TOL:.0e}",
            pair.provenance,
            pair.length()
        ),
        vec![format!("certified variant: {}", pair.certified_variant)],
    )
}

/// Try candidate `K` kernels in order; keep the first that certifies.
fn adjudicate(
    m: &SingularKernel,
    candidates: Vec<(String, SingularKernel)>,
    provenance: &str,
) -> Result<(SingularKernel, String, ResidualReport), KernelError> {
    let mut attempts = Vec::new();
    for (variant, k) in candidates {
        let mut report = certify_kernels(
            m,
            &k,
            ADJUDICATION_GRID_SIZE,
            ADJUDICATION_TOLERANCE,
            format!("pair={provenance}; variant={variant}; grid={ADJUDICATION_GRID_SIZE}"),
            vec![],
        );
        if report.passed() {
            report.push_note(format!("certified variant: {variant}"));
            return Ok((k, variant, report));
        }
        attempts.push((variant, report.summary_line()));
    }
    Err(KernelError::CertificationFailure {
        label: provenance.to_owned(),
        attempts,
    })
}

fn check_alpha_lambda(alpha: f64, lambda: f64) -> Result<(), KernelError> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(KernelError::BadParameter {
            what: format!("order must satisfy 0 < α < 1, got α = {alpha}"),
        });
    }
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(KernelError::BadParameter {
            what: format!("rate must satisfy λ > 0, got λ = {lambda}"),
        });
    }
    Ok(())
}

/// Power-law pair: `M(x) = (λx)^{α−1}/Γ(α)`, `K(x) = λ(λx)^{−α}/Γ(1−α)`.
pub fn power_law_pair(alpha: f64, lambda: f64, length: f64) -> Result<KernelPair, KernelError> {
    check_alpha_lambda(alpha, lambda)?;
    let cm = lambda.powf(alpha - 1.0) / gamma(alpha)?;
    let ck = lambda.powf(1.0 - alpha) / gamma(1.0 - alpha)?;
    let m = SingularKernel::new(
        alpha - 1.0,
        FunctionHandle::from_closure(
            &format!("G[M power-law α={alpha} λ={lambda}]"),
            move |_| cm,
        ),
        length,
        Dimension::DIMENSIONLESS,
    )?;
    let k = SingularKernel::new(
        -alpha,
        FunctionHandle::from_closure(
            &format!("G[K power-law α={alpha} λ={lambda}]"),
            move |_| ck,
        ),
        length,
        Dimension::INVERSE_LENGTH,
    )?;
    let provenance = format!("power-law(α={alpha}, λ={lambda})");
    let (k, variant, report) = adjudicate(
        &m,
        vec![("closed form (λx)^{-α}/Γ(1-α) scaled by λ".to_owned(), k)],
        &provenance,
    )?;
    Ok(KernelPair {
        m,
        k,
        params: KernelParams {
            family: "power-law".into(),
            alpha,
            beta: None,
            lambda,
        },
        provenance,
        certified_variant: variant,
        certification: Some(report),
    })
}

/// Tempered power-law pair: `M(x) = (λx)^{α−1}e^{−λx}/Γ(α)` with the
/// companion kernel adjudicated among three readings of the printed
/// formula (they differ in the leading term's tempering and scale; all
/// coincide at λ = 1):
///
/// 1. *printed*: leading term `λ(λx)^{−α}e^{−λ·λx}/Γ(1−α)`;
/// 2. *unscaled variant*: leading term `x^{−α}e^{−λx}/Γ(1−α)`;
/// 3. *exponential-argument correction*: leading term
///    `λ(λx)^{−α}e^{−λx}/Γ(1−α)`;
///
/// each plus the common completion term `λ·γ(1−α, λx)/Γ(1−α)`.
pub fn tempered_pair(alpha: f64, lambda: f64, length: f64) -> Result<KernelPair, KernelError> {
    check_alpha_lambda(alpha, lambda)?;
    let g_alpha = gamma(alpha)?;
    let g_one_minus = gamma(1.0 - alpha)?;
    let cm = lambda.powf(alpha - 1.0) / g_alpha;
    let m = SingularKernel::new(
        alpha - 1.0,
        FunctionHandle::from_closure(
            &format!("G[M tempered α={alpha} λ={lambda}]"),
            move |x: f64| cm * (-lambda * x).exp(),
        ),
        length,
        Dimension::DIMENSIONLESS,
    )?;

    // Completion term shared by every candidate: λ·x^α·γ(1−α, λx)/Γ(1−α)
    // as a regular-part contribution (the x^α cancels the factored x^{−α}).
    let c_gamma = lambda / g_one_minus;
    let completion = move |x: f64| -> Result<f64, EvalError> {
        if x == 0.0 {
            return Ok(0.0);
        }
        let g = lower_incomplete_gamma(1.0 - alpha, lambda * x)
            .map_err(|e| special_to_eval(e, x))?;
        Ok(c_gamma * x.powf(alpha) * g)
    };

    let c_lead = lambda.powf(1.0 - alpha) / g_one_minus;
    let c_unscaled = 1.0 / g_one_minus;
    let mk = |variant: &str, lead: Box<dyn Fn(f64) -> f64 + Send + Sync>| -> Result<(String, SingularKernel), KernelError> {
        let kernel = SingularKernel::new(
            -alpha,
            FunctionHandle::from_fallible_closure(
                &format!("G[K tempered α={alpha} λ={lambda}; {variant}]"),
                move |x| Ok(lead(x) + completion(x)?),
            ),
            length,
            Dimension::INVERSE_LENGTH,
        )?;
        Ok((variant.to_owned(), kernel))
    };
    let candidates = vec![
        mk(
            "printed reading (tempering factor exp(-λ²x))",
            Box::new(move |x| c_lead * (-lambda * lambda * x).exp()),
        )?,
        mk(
            "unscaled variant (leading term x^{-α}e^{-λx}/Γ(1-α))",
            Box::new(move |x| c_unscaled * (-lambda * x).exp()),
        )?,
        mk(
            "exponential-argument correction (tempering factor exp(-λx))",
            Box::new(move |x| c_lead * (-lambda * x).exp()),
        )?,
    ];

    let provenance = format!("tempered(α={alpha}, λ={lambda})");
    let (k, variant, report) = adjudicate(&m, candidates, &provenance)?;
    Ok(KernelPair {
        m,
        k,
        params: KernelParams {
            family: "tempered".into(),
            alpha,
            beta: None,
            lambda,
        },
        provenance: format!("{provenance}; {variant}"),
        certified_variant: variant,
        certification: Some(report),
    })
}

/// Mittag-Leffler pair: `M(x) = (λx)^{β−1} E_{α,β}(−(λx)^α)` with
/// `0 < α ≤ β < 1`, companion
/// `K(x) = λ(λx)^{α−β}/Γ(α−β+1) + λ(λx)^{−β}/Γ(d)` where the printed
/// denominator is ambiguous; `d = 2−β` is tried first and `d = 1−β`
/// second, keeping whichever certifies.
pub fn mittag_leffler_pair(
    alpha: f64,
    beta: f64,
    lambda: f64,
    length: f64,
) -> Result<KernelPair, KernelError> {
    if !(alpha > 0.0 && alpha <= beta && beta < 1.0) {
        return Err(KernelError::BadParameter {
            what: format!("orders must satisfy 0 < α ≤ β < 1, got α = {alpha}, β = {beta}"),
        });
    }
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(KernelError::BadParameter {
            what: format!("rate must satisfy λ > 0, got λ = {lambda}"),
        });
    }
    let params = MLParams::new(alpha, beta)?;
    let cm = lambda.powf(beta - 1.0);
    let m_label = format!("G[M mittag-leffler α={alpha} β={beta} λ={lambda}]");
    // The regular factor runs at every node of nested quadratures, so the
    // entire function s ↦ E_{α,β}(−s) is compiled once over the kernel's
    // reach; if the table does not certify, each call falls back to the
    // regime evaluator, which is slower but always self-assessed.
    let m_regular = match CompiledMlNegAxis::new(params, (lambda * length).powf(alpha)) {
        Ok(table) => FunctionHandle::from_fallible_closure(&m_label, move |x: f64| {
            let s = (lambda * x).powf(alpha);
            let e = table.eval(s).map_err(|e| special_to_eval(e, x))?;
            Ok(cm * e)
        }),
        Err(_) => FunctionHandle::from_fallible_closure(&m_label, move |x: f64| {
            let z = -(lambda * x).powf(alpha);
            let e = mittag_leffler(params, z).map_err(|e| special_to_eval(e, x))?;
            Ok(cm * e)
        }),
    };
    // G is a series in (λx)^α: continuous at 0 but with unbounded
    // derivatives for α < 1, so polynomial rules must not assume
    // smoothness beyond the factored x^{β−1}.
    let m = SingularKernel::new(beta - 1.0, m_regular, length, Dimension::DIMENSIONLESS)?
        .mark_rough_regular();

    let a1 = lambda.powf(1.0 + alpha - beta) / gamma(alpha - beta + 1.0)?;
    let mk = |variant: &str, denom: f64| -> Result<(String, SingularKernel), KernelError> {
        let a0 = lambda.powf(1.0 - beta) / denom;
        // The x^α term makes G rough at 0 for the same reason as in M.
        let kernel = SingularKernel::new(
            -beta,
            FunctionHandle::from_closure(
                &format!("G[K mittag-leffler α={alpha} β={beta} λ={lambda}; {variant}]"),
                move |x: f64| a1 * x.powf(alpha) + a0,
            ),
            length,
            Dimension::INVERSE_LENGTH,
        )?
        .mark_rough_regular();
        Ok((variant.to_owned(), kernel))
    };
    let candidates = vec![
        mk("printed reading (denominator Γ(2-β))", gamma(2.0 - beta)?)?,
        mk("corrected reading (denominator Γ(1-β))", gamma(1.0 - beta)?)?,
    ];

    let provenance = format!("mittag-leffler(α={alpha}, β={beta}, λ={lambda})");
    let (k, variant, report) = adjudicate(&m, candidates, &provenance)?;
    Ok(KernelPair {
        m,
        k,
        params: KernelParams {
            family: "mittag-leffler".into(),
            alpha,
            beta: Some(beta),
            lambda,
        },
        provenance: format!("{provenance}; {variant}"),
        certified_variant: variant,
        certification: Some(report),
    })
}

/// The swapped pair `(λ⁻¹K, λM)`.  Because Laplace convolution commutes,
/// the swap preserves the Sonin condition; it is re-certified anyway.
pub fn swapped_pair(pair: &KernelPair, lambda: f64) -> Result<KernelPair, KernelError> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(KernelError::BadParameter {
            what: format!("rate must satisfy λ > 0, got λ = {lambda}"),
        });
    }
    let m = pair
        .k
        .scaled(1.0 / lambda, pair.k.dimension.over_rate());
    let k = pair.m.scaled(lambda, pair.m.dimension.times_rate());
    let provenance = format!("swapped(λ={lambda})[{}]", pair.provenance);
    let (k, variant, report) = adjudicate(
        &m,
        vec![(format!("swap of certified {}", pair.certified_variant), k)],
        &provenance,
    )?;
    Ok(KernelPair {
        m,
        k,
        params: KernelParams {
            family: format!("swapped-{}", pair.params.family),
            alpha: pair.params.alpha,
            beta: pair.params.beta,
            lambda,
        },
        provenance,
        certified_variant: variant,
        certification: Some(report),
    })
}

/// Laplace convolution of two factored kernels.  With `kᵢ = x^{pᵢ}Gᵢ`,
/// the product integrates to `x^{p₁+p₂+1} · G(x)` where
/// `G(x) = ∫₀¹ (1−t)^{p₁} t^{p₂} G₁(x(1−t)) G₂(xt) dt`; the normalised
/// form keeps the regular part well-scaled down to `x = 0`, where it
/// equals `B(p₁+1, p₂+1)·G₁(0)·G₂(0)`.  Regular-part values are memoized
/// under a read-write lock because semigroup checks revisit the same
/// abscissae.
pub fn convolve_kernels(
    k1: &SingularKernel,
    k2: &SingularKernel,
) -> Result<SingularKernel, KernelError> {
    let p1 = k1.exponent;
    let p2 = k2.exponent;
    let g1 = k1.regular.clone();
    let g2 = k2.regular.clone();
    let length = k1.length.min(k2.length);
    let dimension = k1.dimension.convolved(k2.dimension);
    let at_zero = beta_function(p1 + 1.0, p2 + 1.0)? * g1.eval(0.0)? * g2.eval(0.0)?;
    let label = format!("conv[{} ⊛ {}]", k1.regular.label(), k2.regular.label());
    let memo: Arc<RwLock<HashMap<u64, f64>>> = Arc::new(RwLock::new(HashMap::new()));

    let regular = FunctionHandle::from_fallible_closure(&label, move |x: f64| {
        if x < 0.0 {
            return Err(EvalError::DomainFault {
                what: "convolution argument must be non-negative".into(),
                x,
            });
        }
        if x == 0.0 {
            return Ok(at_zero);
        }
        if let Some(v) = memo.read().expect("memo lock").get(&x.to_bits()) {
            return Ok(*v);
        }
        let budget = QuadBudget {
            tolerance: 0.5 * SONIN_QUAD_TOL,
            ..QuadBudget::default()
        };
        // t ∈ [0, 1/2]: weight t^{p2} in the rule, distance d = t.
        let left_integrand = |d: f64| -> Result<f64, String> {
            let a = g1.eval(x * (1.0 - d)).map_err(|e| e.to_string())?;
            let b = g2.eval(x * d).map_err(|e| e.to_string())?;
            Ok((1.0 - d).powf(p1) * a * b)
        };
        let left = singular_convolution(&left_integrand, p2, 0.5, &budget)
            .map_err(|e| EvalError::DomainFault {
                what: format!("convolution quadrature (lower half): {e}"),
                x,
            })?;
        // t ∈ [1/2, 1]: weight (1−t)^{p1} in the rule, distance d = 1 − t.
        let right_integrand = |d: f64| -> Result<f64, String> {
            let a = g1.eval(x * d).map_err(|e| e.to_string())?;
            let b = g2.eval(x * (1.0 - d)).map_err(|e| e.to_string())?;
            Ok((1.0 - d).powf(p2) * a * b)
        };
        let right = singular_convolution(&right_integrand, p1, 0.5, &budget)
            .map_err(|e| EvalError::DomainFault {
                what: format!("convolution quadrature (upper half): {e}"),
                x,
            })?;
        let value = left.value + right.value;
        memo.write().expect("memo lock").insert(x.to_bits(), value);
        Ok(value)
    });

    SingularKernel::new(p1 + p2 + 1.0, regular, length, dimension)
}

/// Representative certified pairs, one per family plus one swap, all on
/// `(0, length]`.
pub fn standard_catalog(length: f64) -> Result<Vec<KernelPair>, KernelError> {
    Ok(vec![
        power_law_pair(0.5, 1.0, length)?,
        tempered_pair(0.5, 1.0, length)?,
        mittag_leffler_pair(0.5, 0.5, 1.0, length)?,
        swapped_pair(&power_law_pair(0.3, 1.0, length)?, 1.0)?,
    ])
}

/// JSON catalog listing.
pub fn catalog_json(pairs: &[KernelPair]) -> Result<String, serde_json::Error> {
    let entries: Vec<CatalogEntry> = pairs.iter().map(|p| p.describe()).collect();
    serde_json::to_string_pretty(&entries)
}
