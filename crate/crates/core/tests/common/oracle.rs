//! Independent reference implementations used to cross-check the library.

#![allow(clippy::needless_range_loop)]

/// OLS via the normal equations `(XᵀX) β = Xᵀy`, solved by Gaussian
/// elimination with partial pivoting. Returns (intercept, slope, r2).
pub fn ols(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len();
    let design: Vec<[f64; 2]> = x.iter().map(|&v| [1.0, v]).collect();
    let mut a = [[0.0f64; 3]; 2];
    for i in 0..2 {
        for j in 0..2 {
            a[i][j] = (0..n).map(|k| design[k][i] * design[k][j]).sum();
        }
        a[i][2] = (0..n).map(|k| design[k][i] * y[k]).sum();
    }
    if a[1][0].abs() > a[0][0].abs() {
        a.swap(0, 1);
    }
    let f = a[1][0] / a[0][0];
    for j in 0..3 {
        a[1][j] -= f * a[0][j];
    }
    let b1 = a[1][2] / a[1][1];
    let b0 = (a[0][2] - a[0][1] * b1) / a[0][0];
    let my = y.iter().sum::<f64>() / n as f64;
    let ss_tot: f64 = y.iter().map(|v| (v - my).powi(2)).sum();
    let ss_res: f64 = x.iter().zip(y).map(|(xi, yi)| (yi - b0 - b1 * xi).powi(2)).sum();
    let r2 = if ss_tot == 0.0 { 0.0 } else { 1.0 - ss_res / ss_tot };
    (b0, b1, r2)
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn var(v: &[f64]) -> f64 {
    let m = mean(v);
    v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (v.len() - 1) as f64
}

pub fn cohens_d(a: &[f64], b: &[f64]) -> f64 {
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let pooled = (((na - 1.0) * var(a) + (nb - 1.0) * var(b)) / (na + nb - 2.0)).sqrt();
    (mean(b) - mean(a)) / pooled
}

/// ICC(2,1) from an explicit n×2 two-way ANOVA table.
pub fn icc21(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len();
    let k = 2usize;
    let table: Vec<[f64; 2]> = x.iter().zip(y).map(|(&a, &b)| [a, b]).collect();
    let grand = table.iter().flatten().sum::<f64>() / (n * k) as f64;
    let row_means: Vec<f64> = table.iter().map(|r| (r[0] + r[1]) / 2.0).collect();
    let col_means: Vec<f64> = (0..k).map(|j| table.iter().map(|r| r[j]).sum::<f64>() / n as f64).collect();
    let mut ss_err = 0.0;
    for i in 0..n {
        for j in 0..k {
            let e = table[i][j] - row_means[i] - col_means[j] + grand;
            ss_err += e * e;
        }
    }
    let ms_r = k as f64 * row_means.iter().map(|m| (m - grand).powi(2)).sum::<f64>() / (n - 1) as f64;
    let ms_c = n as f64 * col_means.iter().map(|m| (m - grand).powi(2)).sum::<f64>() / (k - 1) as f64;
    let ms_e = ss_err / ((n - 1) * (k - 1)) as f64;
    (ms_r - ms_e) / (ms_r + (k as f64 - 1.0) * ms_e + k as f64 * (ms_c - ms_e) / n as f64)
}

/// One-way ANOVA F and its upper-tail p from statrs.
pub fn anova(groups: &[Vec<f64>]) -> (f64, f64) {
    use statrs::distribution::{ContinuousCDF, FisherSnedecor};
    let all: Vec<f64> = groups.iter().flatten().copied().collect();
    let grand = mean(&all);
    let ssb: f64 = groups.iter().map(|g| g.len() as f64 * (mean(g) - grand).powi(2)).sum();
    let ssw: f64 = groups.iter().map(|g| var(g) * (g.len() - 1) as f64).sum();
    let d1 = (groups.len() - 1) as f64;
    let d2 = (all.len() - groups.len()) as f64;
    let f = (ssb / d1) / (ssw / d2);
    let p = FisherSnedecor::new(d1, d2).unwrap().sf(f);
    (f, p)
}

/// Relative-or-absolute closeness.
pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}
