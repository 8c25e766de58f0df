//! Concordance and group-difference statistics: least-squares fit with R²,
//! Cohen's d, ICC(2,1), Bland–Altman limits and one-way ANOVA.

pub mod special;

use crate::error::{Error, Result};
use crate::num::{mean, sample_variance, Real};
use serde::{Deserialize, Serialize};

/// Multiplier for 95% limits of agreement.
pub const LOA_Z: f64 = 1.96;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitResult<T> {
    pub slope: T,
    pub intercept: T,
    pub r2: T,
    pub n: usize,
    /// False when `y` has zero variance; `r2` is then reported as 0.
    pub r2_defined: bool,
}

impl<T: Real> FitResult<T> {
    pub fn predict(&self, x: T) -> T {
        self.slope * x + self.intercept
    }
}

fn check_paired(x: usize, y: usize, min: usize) -> Result<()> {
    if x != y {
        return Err(Error::LengthMismatch(x, y));
    }
    if x < min {
        return Err(Error::InsufficientData { needed: min, got: x });
    }
    Ok(())
}

/// Ordinary least squares `y = slope·x + intercept`.
pub fn linear_fit<T: Real>(x: &[T], y: &[T]) -> Result<FitResult<T>> {
    check_paired(x.len(), y.len(), 2)?;
    let xm = mean(x);
    let ym = mean(y);
    let (mut sxx, mut sxy, mut syy) = (T::zero(), T::zero(), T::zero());
    for (&xi, &yi) in x.iter().zip(y) {
        let dx = xi - xm;
        let dy = yi - ym;
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    if !(sxx > T::zero()) {
        return Err(Error::DegenerateFit("x has zero variance"));
    }
    let slope = sxy / sxx;
    let intercept = ym - slope * xm;
    let (r2, r2_defined) = if syy > T::zero() {
        let ss_res: T = x
            .iter()
            .zip(y)
            .map(|(&xi, &yi)| {
                let r = yi - (slope * xi + intercept);
                r * r
            })
            .sum();
        ((T::one() - ss_res / syy).max(T::zero()).min(T::one()), true)
    } else {
        (T::zero(), false)
    };
    Ok(FitResult {
        slope,
        intercept,
        r2,
        n: x.len(),
        r2_defined,
    })
}

/// Standardized mean difference `(mean(b) - mean(a)) / pooled_sd`.
pub fn cohens_d<T: Real>(a: &[T], b: &[T]) -> Result<T> {
    for g in [a, b] {
        if g.len() < 2 {
            return Err(Error::InsufficientData { needed: 2, got: g.len() });
        }
    }
    let (na, nb) = (T::from_count(a.len()), T::from_count(b.len()));
    let one = T::one();
    let pooled_var = ((na - one) * sample_variance(a) + (nb - one) * sample_variance(b)) / (na + nb - T::lit(2.0));
    let pooled_sd = pooled_var.sqrt();
    if !(pooled_sd > T::zero()) {
        return Err(Error::ZeroPooledSd);
    }
    Ok((mean(b) - mean(a)) / pooled_sd)
}

/// ICC(2,1): two-way random effects, absolute agreement, single measurement,
/// for two paired raters.
pub fn icc<T: Real>(x: &[T], y: &[T]) -> Result<T> {
    check_paired(x.len(), y.len(), 3)?;
    let n = T::from_count(x.len());
    let k = T::lit(2.0);
    let one = T::one();
    let grand = (x.iter().copied().sum::<T>() + y.iter().copied().sum::<T>()) / (n * k);
    let (xm, ym) = (mean(x), mean(y));

    let ss_rows: T = x
        .iter()
        .zip(y)
        .map(|(&a, &b)| {
            let d = (a + b) / k - grand;
            d * d
        })
        .sum::<T>()
        * k;
    let ss_cols = n * ((xm - grand) * (xm - grand) + (ym - grand) * (ym - grand));
    let ss_total: T = x
        .iter()
        .chain(y)
        .map(|&v| (v - grand) * (v - grand))
        .sum();
    let ss_err = (ss_total - ss_rows - ss_cols).max(T::zero());

    let ms_rows = ss_rows / (n - one);
    let ms_cols = ss_cols / (k - one);
    let ms_err = ss_err / ((n - one) * (k - one));
    let denom = ms_rows + (k - one) * ms_err + k * (ms_cols - ms_err) / n;
    if !(denom.abs() > T::epsilon() * (ms_rows + ms_cols + ms_err + T::min_positive_value())) {
        return Err(Error::DegenerateAnova("all measurements identical"));
    }
    Ok((ms_rows - ms_err) / denom)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlandAltman<T> {
    /// Mean of `x - y`.
    pub bias: T,
    pub loa_low: T,
    pub loa_high: T,
    pub sd: T,
}

pub fn bland_altman<T: Real>(x: &[T], y: &[T]) -> Result<BlandAltman<T>> {
    check_paired(x.len(), y.len(), 2)?;
    let diffs: Vec<T> = x.iter().zip(y).map(|(&a, &b)| a - b).collect();
    let bias = mean(&diffs);
    let sd = sample_variance(&diffs).max(T::zero()).sqrt();
    let half = T::lit(LOA_Z) * sd;
    Ok(BlandAltman {
        bias,
        loa_low: bias - half,
        loa_high: bias + half,
        sd,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgreementResult<T> {
    pub icc: T,
    pub bias: T,
    pub loa_low: T,
    pub loa_high: T,
}

pub fn agreement<T: Real>(x: &[T], y: &[T]) -> Result<AgreementResult<T>> {
    let ba = bland_altman(x, y)?;
    Ok(AgreementResult {
        icc: icc(x, y)?,
        bias: ba.bias,
        loa_low: ba.loa_low,
        loa_high: ba.loa_high,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnovaResult<T> {
    pub f: T,
    pub p: T,
    pub df_between: usize,
    pub df_within: usize,
}

/// Classic one-way ANOVA F test.
pub fn anova_oneway<T: Real>(groups: &[Vec<T>]) -> Result<AnovaResult<T>> {
    if groups.len() < 2 {
        return Err(Error::DegenerateAnova("need at least two groups"));
    }
    if let Some(g) = groups.iter().find(|g| g.len() < 2) {
        return Err(Error::InsufficientData { needed: 2, got: g.len() });
    }
    let total: usize = groups.iter().map(Vec::len).sum();
    let grand = groups.iter().flatten().copied().sum::<T>() / T::from_count(total);
    let mut ss_between = T::zero();
    let mut ss_within = T::zero();
    for g in groups {
        let m = mean(g);
        ss_between += T::from_count(g.len()) * (m - grand) * (m - grand);
        ss_within += g.iter().map(|&v| (v - m) * (v - m)).sum::<T>();
    }
    if !(ss_within > T::zero()) {
        return Err(Error::DegenerateAnova("zero within-group variance"));
    }
    let df_between = groups.len() - 1;
    let df_within = total - groups.len();
    let f = (ss_between / T::from_count(df_between)) / (ss_within / T::from_count(df_within));
    let p = special::f_survival(f, T::from_count(df_between), T::from_count(df_within));
    Ok(AnovaResult {
        f,
        p,
        df_between,
        df_within,
    })
}
