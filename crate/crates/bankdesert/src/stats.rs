//! Self-contained statistics kernels.
//!
//! Everything downstream keys off these exact definitions, so they are pinned
//! here rather than pulled from a stats crate:
//!
//! * `quantile` — sort ascending, linear interpolation at rank `h = (n-1)p`
//!   (the common "type 7" estimator). `p = 0` is the minimum, `p = 1` the
//!   maximum.
//! * `pct_zero` — share of exact zeros, in percent.
//! * `ols_fit` — bivariate least squares with the slope standard error from
//!   the residual variance on `n - 2` degrees of freedom.
//! * `spearman` — Pearson correlation of average ranks (ties share the mean
//!   rank of their run).
//! * `welch_t` — unequal-variance two-sample t with the Welch–Satterthwaite
//!   degrees of freedom and a two-sided p from the Student-t CDF.
//!
//! The t CDF is computed through the regularized incomplete beta function
//! (continued fraction, Lentz's method), accurate to well below 1e-10 over
//! the df range that matters here.

use crate::error::{Error, Result};

// ── special functions ──

/// Lanczos coefficients (g = 7, 9 terms), kept at published precision.
#[allow(clippy::excessive_precision)]
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

/// Natural log of the gamma function for x > 0.
fn ln_gamma(x: f64) -> f64 {
    debug_assert!(x > 0.0, "ln_gamma domain");
    if x < 0.5 {
        // reflection: Γ(x) Γ(1-x) = π / sin(πx)
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = LANCZOS[0];
    for (i, c) in LANCZOS.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    let t = x + 7.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

/// Continued fraction for the incomplete beta function (Lentz's method).
fn betacf(a: f64, b: f64, x: f64) -> f64 {
    const MAX_ITER: usize = 300;
    const EPS: f64 = 3e-16;
    const FPMIN: f64 = 1e-300;

    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < FPMIN {
        d = FPMIN;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=MAX_ITER {
        let mf = m as f64;
        let m2 = 2.0 * mf;
        // even step
        let aa = mf * (b - mf) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < FPMIN {
            d = FPMIN;
        }
        c = 1.0 + aa / c;
        if c.abs() < FPMIN {
            c = FPMIN;
        }
        d = 1.0 / d;
        h *= d * c;
        // odd step
        let aa = -(a + mf) * (qab + mf) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < FPMIN {
            d = FPMIN;
        }
        c = 1.0 + aa / c;
        if c.abs() < FPMIN {
            c = FPMIN;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() <= EPS {
            break;
        }
    }
    h
}

/// Regularized incomplete beta function I_x(a, b).
pub(crate) fn betai(a: f64, b: f64, x: f64) -> f64 {
    debug_assert!(a > 0.0 && b > 0.0, "betai parameters must be positive");
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_bt =
        ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln();
    let bt = ln_bt.exp();
    if x < (a + 1.0) / (a + b + 2.0) {
        bt * betacf(a, b, x) / a
    } else {
        1.0 - bt * betacf(b, a, 1.0 - x) / b
    }
}

/// CDF of Student's t distribution with `df` degrees of freedom.
///
/// Uses `P(|T| > t) = I_x(df/2, 1/2)` with `x = df / (df + t^2)`, so the
/// value at `t = 0` is exactly 0.5 for every df.
pub fn student_t_cdf(t: f64, df: f64) -> f64 {
    assert!(df > 0.0, "student_t_cdf needs df > 0");
    if t.is_nan() {
        return f64::NAN;
    }
    let x = df / (df + t * t);
    let half_tail = 0.5 * betai(0.5 * df, 0.5, x);
    if t >= 0.0 {
        1.0 - half_tail
    } else {
        half_tail
    }
}

// ── kernels ──

fn ensure_finite(values: &[f64], context: &'static str) -> Result<()> {
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite(context));
    }
    Ok(())
}

/// Quantile of `values` at probability `p` in [0, 1]: sort ascending and
/// interpolate linearly at rank `h = (n - 1) p`.
pub fn quantile(values: &[f64], p: f64) -> Result<f64> {
    assert!((0.0..=1.0).contains(&p), "quantile probability out of [0, 1]");
    if values.is_empty() {
        return Err(Error::EmptyInput("quantile"));
    }
    ensure_finite(values, "quantile")?;
    let mut v = values.to_vec();
    v.sort_unstable_by(f64::total_cmp);
    let h = p * (v.len() - 1) as f64;
    let lo = h.floor() as usize;
    let frac = h - lo as f64;
    if frac == 0.0 {
        Ok(v[lo])
    } else {
        Ok(v[lo] + frac * (v[lo + 1] - v[lo]))
    }
}

/// Percentage of values that are exactly zero.
pub fn pct_zero(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::EmptyInput("pct_zero"));
    }
    ensure_finite(values, "pct_zero")?;
    let zeros = values.iter().filter(|&&v| v == 0.0).count();
    Ok(100.0 * zeros as f64 / values.len() as f64)
}

/// Bivariate least-squares fit of `y` on `x`.
#[derive(Debug, Clone)]
pub struct OlsFit {
    pub intercept: f64,
    pub slope: f64,
    /// Standard error of the slope from the residual variance (n - 2 dof).
    pub slope_se: f64,
    /// slope / slope_se; infinite on an exact fit with nonzero slope.
    pub slope_t: f64,
    pub residuals: Vec<f64>,
    pub n: usize,
}

impl OlsFit {
    /// Two-sided p-value for the slope against zero (n - 2 dof).
    pub fn slope_p(&self) -> f64 {
        let df = (self.n - 2) as f64;
        betai(0.5 * df, 0.5, df / (df + self.slope_t * self.slope_t))
    }
}

/// Fit `y = intercept + slope * x` by least squares.
///
/// Needs at least 3 observations and a non-constant `x`.
pub fn ols_fit(x: &[f64], y: &[f64]) -> Result<OlsFit> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch {
            left: x.len(),
            right: y.len(),
            context: "ols_fit",
        });
    }
    if x.len() < 3 {
        return Err(Error::InsufficientData {
            need: 3,
            have: x.len(),
            context: "ols_fit",
        });
    }
    ensure_finite(x, "ols_fit x")?;
    ensure_finite(y, "ols_fit y")?;
    // exact-equality check: rounding in the accumulated mean must not turn
    // a constant regressor into a tiny nonzero sxx
    if x.iter().all(|&v| v == x[0]) {
        return Err(Error::DegenerateRegressor);
    }

    let n = x.len();
    let nf = n as f64;
    let mean_x = x.iter().sum::<f64>() / nf;
    let mean_y = y.iter().sum::<f64>() / nf;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for i in 0..n {
        let dx = x[i] - mean_x;
        sxx += dx * dx;
        sxy += dx * (y[i] - mean_y);
    }
    if sxx == 0.0 {
        return Err(Error::DegenerateRegressor);
    }
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;
    let residuals: Vec<f64> = (0..n).map(|i| y[i] - (intercept + slope * x[i])).collect();
    let ssr: f64 = residuals.iter().map(|r| r * r).sum();
    let slope_se = (ssr / ((nf - 2.0) * sxx)).sqrt();
    let slope_t = slope / slope_se;
    Ok(OlsFit {
        intercept,
        slope,
        slope_se,
        slope_t,
        residuals,
        n,
    })
}

/// Average ranks (1-based); tied values share the mean rank of their run.
fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_unstable_by(|&i, &j| values[i].total_cmp(&values[j]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        // positions i..=j are 0-based; mean 1-based rank of the run
        let mean_rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = mean_rank;
        }
        i = j + 1;
    }
    ranks
}

fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    let n = x.len() as f64;
    let mean_x = x.iter().sum::<f64>() / n;
    let mean_y = y.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    let mut sxy = 0.0;
    for i in 0..x.len() {
        let dx = x[i] - mean_x;
        let dy = y[i] - mean_y;
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if sxx == 0.0 {
        return Err(Error::UndefinedCorrelation("x"));
    }
    if syy == 0.0 {
        return Err(Error::UndefinedCorrelation("y"));
    }
    Ok(sxy / (sxx.sqrt() * syy.sqrt()))
}

/// Spearman rank correlation: Pearson correlation of average ranks.
///
/// Errors if either vector has zero rank variance (all values tied).
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch {
            left: x.len(),
            right: y.len(),
            context: "spearman",
        });
    }
    if x.len() < 3 {
        return Err(Error::InsufficientData {
            need: 3,
            have: x.len(),
            context: "spearman",
        });
    }
    ensure_finite(x, "spearman x")?;
    ensure_finite(y, "spearman y")?;
    pearson(&average_ranks(x), &average_ranks(y))
}

/// Welch's unequal-variance t-test result.
#[derive(Debug, Clone, Copy)]
pub struct WelchResult {
    /// (mean_a - mean_b) / sqrt(s_a^2/n_a + s_b^2/n_b)
    pub t: f64,
    /// Welch–Satterthwaite degrees of freedom.
    pub df: f64,
    pub p_two_sided: f64,
    pub mean_a: f64,
    pub mean_b: f64,
}

fn mean_var(values: &[f64]) -> (f64, f64) {
    // a constant group has exactly zero variance; the accumulated mean of
    // identical values can round away from them and fake a tiny variance,
    // which would blow the t statistic up instead of flagging degeneracy
    if values.iter().all(|&v| v == values[0]) {
        return (values[0], 0.0);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    (mean, ss / (n - 1.0))
}

/// Welch's two-sample t-test of `a` against `b` (sign follows
/// `mean_a - mean_b`).
///
/// Each group needs at least 2 observations; errors if both groups have zero
/// variance.
pub fn welch_t(a: &[f64], b: &[f64]) -> Result<WelchResult> {
    let have = a.len().min(b.len());
    if have < 2 {
        return Err(Error::InsufficientData {
            need: 2,
            have,
            context: "welch_t group",
        });
    }
    ensure_finite(a, "welch_t a")?;
    ensure_finite(b, "welch_t b")?;
    let (mean_a, var_a) = mean_var(a);
    let (mean_b, var_b) = mean_var(b);
    if var_a + var_b == 0.0 {
        return Err(Error::ZeroVariance);
    }
    let sa = var_a / a.len() as f64;
    let sb = var_b / b.len() as f64;
    let se2 = sa + sb;
    let t = (mean_a - mean_b) / se2.sqrt();
    let df = se2 * se2
        / (sa * sa / (a.len() as f64 - 1.0) + sb * sb / (b.len() as f64 - 1.0));
    // two-sided p = P(|T| > |t|) = I_x(df/2, 1/2), x = df / (df + t^2)
    let p_two_sided = betai(0.5 * df, 0.5, df / (df + t * t));
    Ok(WelchResult {
        t,
        df,
        p_two_sided,
        mean_a,
        mean_b,
    })
}
