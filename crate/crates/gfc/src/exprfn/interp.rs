//! Shape-preserving cubic interpolation of sampled data.
//!
//! Node slopes follow the Fritsch–Carlson construction: a weighted harmonic
//! mean of neighbouring secants, forced to zero where the secants change
//! sign or vanish.  The resulting piecewise-cubic Hermite interpolant is
//! monotone on every interval where the data are monotone, and it is C^1,
//! so its analytic derivative is available for quotient-style formulas that
//! divide by it.

#[derive(Debug, Clone, PartialEq)]
pub enum InterpError {
    /// Query outside the sampled range `[lo, hi]`.
    OutOfDomain { x: f64, lo: f64, hi: f64 },
    /// Rejected input data (message explains which requirement failed).
    BadData(String),
}

impl std::fmt::Display for InterpError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            InterpError::OutOfDomain { x, lo, hi } => {
                write!(f, "query {x} lies outside the sampled range [{lo}, {hi}]")
            }
            InterpError::BadData(msg) => write!(f, "invalid interpolation data: {msg}"),
        }
    }
}

impl std::error::Error for InterpError {}

/// Piecewise-cubic Hermite interpolant with Fritsch–Carlson slopes.
#[derive(Debug, Clone)]
pub struct Pchip {
    xs: Vec<f64>,
    ys: Vec<f64>,
    slopes: Vec<f64>,
}

impl Pchip {
    pub fn new(xs: Vec<f64>, ys: Vec<f64>) -> Result<Self, InterpError> {
        if xs.len() != ys.len() {
            return Err(InterpError::BadData(format!(
                "{} abscissae but {} ordinates",
                xs.len(),
                ys.len()
            )));
        }
        if xs.len() < 2 {
            return Err(InterpError::BadData(
                "at least two sample points are required".into(),
            ));
        }
        for (i, v) in xs.iter().chain(ys.iter()).enumerate() {
            if !v.is_finite() {
                return Err(InterpError::BadData(format!(
                    "non-finite sample value at flattened index {i}"
                )));
            }
        }
        for w in xs.windows(2) {
            if w[1] <= w[0] {
                return Err(InterpError::BadData(format!(
                    "abscissae must be strictly increasing, got {} then {}",
                    w[0], w[1]
                )));
            }
        }
        let slopes = fritsch_carlson_slopes(&xs, &ys);
        Ok(Pchip { xs, ys, slopes })
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.xs[0], *self.xs.last().expect("validated non-empty"))
    }

    pub fn nodes(&self) -> (&[f64], &[f64]) {
        (&self.xs, &self.ys)
    }

    fn locate(&self, x: f64) -> Result<usize, InterpError> {
        let (lo, hi) = self.domain();
        if !(x >= lo && x <= hi) {
            return Err(InterpError::OutOfDomain { x, lo, hi });
        }
        // Index of the interval [xs[i], xs[i+1]] containing x.
        let i = self.xs.partition_point(|&v| v <= x);
        Ok(i.saturating_sub(1).min(self.xs.len() - 2))
    }

    pub fn value(&self, x: f64) -> Result<f64, InterpError> {
        let i = self.locate(x)?;
        let h = self.xs[i + 1] - self.xs[i];
        let t = (x - self.xs[i]) / h;
        let (h00, h10, h01, h11) = hermite_basis(t);
        Ok(self.ys[i] * h00
            + h * self.slopes[i] * h10
            + self.ys[i + 1] * h01
            + h * self.slopes[i + 1] * h11)
    }

    pub fn derivative(&self, x: f64) -> Result<f64, InterpError> {
        let i = self.locate(x)?;
        let h = self.xs[i + 1] - self.xs[i];
        let t = (x - self.xs[i]) / h;
        let (d00, d10, d01, d11) = hermite_basis_deriv(t);
        Ok((self.ys[i] * d00
            + h * self.slopes[i] * d10
            + self.ys[i + 1] * d01
            + h * self.slopes[i + 1] * d11)
            / h)
    }
}

fn hermite_basis(t: f64) -> (f64, f64, f64, f64) {
    let t2 = t * t;
    let t3 = t2 * t;
    (
        2.0 * t3 - 3.0 * t2 + 1.0,
        t3 - 2.0 * t2 + t,
        -2.0 * t3 + 3.0 * t2,
        t3 - t2,
    )
}

fn hermite_basis_deriv(t: f64) -> (f64, f64, f64, f64) {
    let t2 = t * t;
    (
        6.0 * t2 - 6.0 * t,
        3.0 * t2 - 4.0 * t + 1.0,
        -6.0 * t2 + 6.0 * t,
        3.0 * t2 - 2.0 * t,
    )
}

fn fritsch_carlson_slopes(xs: &[f64], ys: &[f64]) -> Vec<f64> {
    let n = xs.len();
    let h: Vec<f64> = xs.windows(2).map(|w| w[1] - w[0]).collect();
    let secant: Vec<f64> = (0..n - 1).map(|i| (ys[i + 1] - ys[i]) / h[i]).collect();
    if n == 2 {
        return vec![secant[0], secant[0]];
    }
    let mut d = vec![0.0; n];
    for i in 1..n - 1 {
        let (s0, s1) = (secant[i - 1], secant[i]);
        if s0 == 0.0 || s1 == 0.0 || (s0 > 0.0) != (s1 > 0.0) {
            d[i] = 0.0;
        } else {
            // Weighted harmonic mean of the two secants; weights favour the
            // shorter interval so the slope stays within both secants.
            let w1 = 2.0 * h[i] + h[i - 1];
            let w2 = h[i] + 2.0 * h[i - 1];
            d[i] = (w1 + w2) / (w1 / s0 + w2 / s1);
        }
    }
    d[0] = endpoint_slope(h[0], h[1], secant[0], secant[1]);
    d[n - 1] = endpoint_slope(h[n - 2], h[n - 3], secant[n - 2], secant[n - 3]);
    d
}

// Shape-preserving one-sided three-point estimate at a boundary node, where
// `h0`/`s0` belong to the interval touching the boundary.
fn endpoint_slope(h0: f64, h1: f64, s0: f64, s1: f64) -> f64 {
    let d = ((2.0 * h0 + h1) * s0 - h0 * s1) / (h0 + h1);
    if d.signum() != s0.signum() || s0 == 0.0 {
        0.0
    } else if (s0 > 0.0) != (s1 > 0.0) && d.abs() > 3.0 * s0.abs() {
        3.0 * s0
    } else {
        d
    }
}
