//! Straight-from-formula meta-features: direct DFT, normal-equation OLS,
//! and a hand-rolled normal CDF. Slow and obvious on purpose.

use std::f64::consts::PI;

pub struct OracleAdf {
    pub statistic: f64,
    pub p_value: f64,
    pub lag: usize,
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

fn pop_var(x: &[f64]) -> f64 {
    let m = mean(x);
    x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / x.len() as f64
}

fn constant(x: &[f64]) -> bool {
    x.iter().all(|&v| v == x[0])
}

pub fn moments(x: &[f64]) -> [f64; 6] {
    let min = x.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if constant(x) {
        return [x[0], 0.0, min, max, 0.0, 0.0];
    }
    let m = mean(x);
    let s = pop_var(x).sqrt();
    let n = x.len() as f64;
    let skew = x.iter().map(|v| ((v - m) / s).powi(3)).sum::<f64>() / n;
    let kurt = x.iter().map(|v| ((v - m) / s).powi(4)).sum::<f64>() / n - 3.0;
    [m, s, min, max, skew, kurt]
}

pub fn acf1(x: &[f64]) -> f64 {
    if constant(x) {
        return 0.0;
    }
    let m = mean(x);
    let mut num = 0.0;
    for t in 0..x.len() - 1 {
        num += (x[t] - m) * (x[t + 1] - m);
    }
    let den: f64 = x.iter().map(|v| (v - m) * (v - m)).sum();
    num / den
}

pub fn roc(x: &[f64]) -> (f64, f64) {
    let mut r = Vec::new();
    for t in 0..x.len() - 1 {
        if x[t].abs() > 1e-8 {
            r.push((x[t + 1] - x[t]) / x[t]);
        }
    }
    if r.is_empty() {
        return (0.0, 0.0);
    }
    (mean(&r), pop_var(&r).sqrt())
}

/// Solves `A b = y` by Gaussian elimination with partial pivoting.
/// OLS through modified Gram-Schmidt (two passes per column); returns
/// (coefficients, rss, diag of (XᵀX)⁻¹).
fn ols(x: &[Vec<f64>], y: &[f64]) -> Option<(Vec<f64>, f64, Vec<f64>)> {
    let (n, k) = (x.len(), x[0].len());
    let mut q: Vec<Vec<f64>> = (0..k).map(|j| (0..n).map(|i| x[i][j]).collect()).collect();
    let mut r = vec![vec![0.0; k]; k];
    for j in 0..k {
        let norm0 = q[j].iter().map(|v| v * v).sum::<f64>().sqrt();
        for _pass in 0..2 {
            for i in 0..j {
                let c: f64 = q[i].iter().zip(&q[j]).map(|(a, b)| a * b).sum();
                r[i][j] += c;
                for t in 0..n {
                    q[j][t] -= c * q[i][t];
                }
            }
        }
        let norm = q[j].iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 || norm <= 1e-13 * norm0 {
            return None;
        }
        r[j][j] = norm;
        q[j].iter_mut().for_each(|v| *v /= norm);
    }
    let qty: Vec<f64> = q.iter().map(|col| col.iter().zip(y).map(|(a, b)| a * b).sum()).collect();
    let back = |rhs: &[f64]| {
        let mut b = vec![0.0; k];
        for i in (0..k).rev() {
            let s: f64 = (i + 1..k).map(|m| r[i][m] * b[m]).sum();
            b[i] = (rhs[i] - s) / r[i][i];
        }
        b
    };
    let b = back(&qty);
    let rss: f64 = x
        .iter()
        .zip(y)
        .map(|(row, yi)| {
            let fit: f64 = row.iter().zip(&b).map(|(a, c)| a * c).sum();
            (yi - fit).powi(2)
        })
        .sum();
    // (XᵀX)⁻¹ = R⁻¹R⁻ᵀ, so its diagonal holds the squared row norms of R⁻¹
    let mut rinv = vec![vec![0.0; k]; k];
    for c in 0..k {
        let mut e = vec![0.0; k];
        e[c] = 1.0;
        for (i, v) in back(&e).into_iter().enumerate() {
            rinv[i][c] = v;
        }
    }
    let diag = rinv.iter().map(|row| row.iter().map(|v| v * v).sum()).collect();
    Some((b, rss, diag))
}

pub fn ar1(x: &[f64]) -> (f64, f64) {
    if constant(x) {
        return (0.0, 0.0);
    }
    let rows: Vec<Vec<f64>> = x[..x.len() - 1].iter().map(|&v| vec![1.0, v]).collect();
    let (b, rss, _) = ols(&rows, &x[1..]).expect("non-constant regressor");
    // OLS with intercept leaves mean-zero residuals
    (b[1], (rss / (x.len() - 1) as f64).sqrt())
}

fn erf_series(x: f64) -> f64 {
    let mut term = x;
    let mut sum = x;
    for n in 1..200 {
        term *= -x * x / n as f64;
        sum += term / (2 * n + 1) as f64;
        if term.abs() < 1e-18 * sum.abs() {
            break;
        }
    }
    2.0 / PI.sqrt() * sum
}

fn erfc(x: f64) -> f64 {
    if x < 0.0 {
        return 2.0 - erfc(-x);
    }
    if x < 2.5 {
        return 1.0 - erf_series(x);
    }
    // erfc(x) = e^{-x²}/√π · 1/(x + (1/2)/(x + 1/(x + (3/2)/(x + …))))
    let mut f = x;
    for n in (1..300).rev() {
        f = x + (n as f64 / 2.0) / f;
    }
    (-x * x).exp() / PI.sqrt() / f
}

fn normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / 2f64.sqrt())
}

pub fn mackinnon(t: f64) -> f64 {
    if t.is_nan() || t > 2.74 {
        return 1.0;
    }
    if t < -18.83 {
        return 0.0;
    }
    let z = if t <= -1.61 {
        2.1659 + 1.4412 * t + 0.038269 * t * t
    } else {
        1.7339 + 0.93202 * t - 0.12745 * t * t - 0.010368 * t * t * t
    };
    normal_cdf(z)
}

pub fn adf(x: &[f64]) -> OracleAdf {
    let n = x.len();
    if constant(x) {
        return OracleAdf {
            statistic: f64::NEG_INFINITY,
            p_value: 0.0,
            lag: 0,
        };
    }
    let dx: Vec<f64> = (1..n).map(|t| x[t] - x[t - 1]).collect();
    let p_max = ((12.0 * (n as f64 / 100.0).powf(0.25)).floor() as usize).min(n / 2 - 2);
    let design = |lag: usize, start: usize| {
        let mut rows = Vec::new();
        let mut y = Vec::new();
        for i in start..dx.len() {
            let mut row = vec![1.0, x[i]];
            for j in 1..=lag {
                row.push(dx[i - j]);
            }
            rows.push(row);
            y.push(dx[i]);
        }
        (rows, y)
    };
    let mut best = (f64::INFINITY, 0);
    for lag in 0..=p_max {
        let (rows, y) = design(lag, p_max);
        if let Some((_, rss, _)) = ols(&rows, &y) {
            let m = y.len() as f64;
            let aic = m * ((2.0 * PI).ln() + (rss / m).ln() + 1.0) + 2.0 * (lag + 2) as f64;
            if aic < best.0 {
                best = (aic, lag);
            }
        }
    }
    let lag = best.1;
    let (rows, y) = design(lag, lag);
    let (b, rss, diag) = ols(&rows, &y).expect("full rank");
    let s2 = rss / (y.len() - lag - 2) as f64;
    let statistic = b[1] / (s2 * diag[1]).sqrt();
    OracleAdf {
        statistic,
        p_value: mackinnon(statistic),
        lag,
    }
}

fn dft_amplitudes(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    (0..=n / 2)
        .map(|f| {
            let (mut re, mut im) = (0.0, 0.0);
            for (t, &v) in x.iter().enumerate() {
                let angle = 2.0 * PI * ((f * t) % n) as f64 / n as f64;
                re += v * angle.cos();
                im -= v * angle.sin();
            }
            (re * re + im * im).sqrt()
        })
        .collect()
}

pub fn spectral(x: &[f64]) -> [f64; 6] {
    if constant(x) {
        return [0.0; 6];
    }
    let n = x.len();
    let m = mean(x);
    let c: Vec<f64> = x.iter().map(|v| v - m).collect();
    let amp = dft_amplitudes(&c);
    let psd: Vec<f64> = amp.iter().map(|a| a * a / n as f64).collect();

    let freq_mean = mean(&psd);
    let mut peak = 1;
    for f in 1..psd.len() {
        if psd[f] > psd[peak] {
            peak = f;
        }
    }
    let total: f64 = psd[1..].iter().sum();
    let entropy = -psd[1..]
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|p| (p / total) * (p / total).ln())
        .sum::<f64>();

    let a = &amp[1..];
    let am = mean(a);
    let s2: f64 = a.iter().map(|v| (v - am).powi(2)).sum();
    let energy: f64 = a.iter().map(|v| v * v).sum();
    let (skew, kurt) = if s2 <= 1e-24 * energy {
        (0.0, 0.0)
    } else {
        (
            a.iter().map(|v| (v - am).powi(3)).sum::<f64>() / s2.powf(1.5),
            a.iter().map(|v| (v - am).powi(4)).sum::<f64>() / (s2 * s2),
        )
    };

    let w = (n / 4).max(8);
    let hop = w / 2;
    let mut frames = Vec::new();
    let mut start = 0;
    while start + w <= n {
        frames.push(
            dft_amplitudes(&c[start..start + w])
                .into_iter()
                .map(|v| v / w as f64)
                .collect::<Vec<_>>(),
        );
        start += hop;
    }
    let variation = if frames.len() < 2 {
        0.0
    } else {
        let mut sum = 0.0;
        for i in 1..frames.len() {
            sum += frames[i]
                .iter()
                .zip(&frames[i - 1])
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>()
                .sqrt();
        }
        sum / (frames.len() - 1) as f64
    };
    [freq_mean, peak as f64 / n as f64, entropy, skew, kurt, variation]
}

/// Columns are variables.
pub fn features(columns: &[Vec<f64>]) -> ([f64; 24], Vec<OracleAdf>) {
    let d = columns.len();
    let mut out = [0.0; 24];
    let mut tests = Vec::new();
    for x in columns {
        let mut row = [0.0; 18];
        row[..6].copy_from_slice(&moments(x));
        row[6] = acf1(x);
        let a = adf(x);
        row[7] = if a.p_value < 0.05 { 1.0 } else { 0.0 };
        tests.push(a);
        let (rm, rs) = roc(x);
        row[8] = rm;
        row[9] = rs;
        let (phi, res) = ar1(x);
        row[10] = phi;
        row[11] = res;
        row[12..18].copy_from_slice(&spectral(x));
        for i in 0..18 {
            out[i] += row[i] / d as f64;
        }
    }
    let t = columns[0].len() as f64;
    if d == 1 {
        let v = pop_var(&columns[0]);
        out[18..].copy_from_slice(&[v, v, v, 0.0, 1.0, 0.0]);
        return (out, tests);
    }
    let mut covs = Vec::new();
    let mut corrs = Vec::new();
    for i in 0..d {
        for j in i + 1..d {
            let (a, b) = (&columns[i], &columns[j]);
            let (ma, mb) = (mean(a), mean(b));
            let cov = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum::<f64>() / t;
            covs.push(cov);
            corrs.push(if constant(a) || constant(b) {
                0.0
            } else {
                cov / (pop_var(a).sqrt() * pop_var(b).sqrt())
            });
        }
    }
    out[18] = mean(&covs);
    out[19] = covs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    out[20] = covs.iter().cloned().fold(f64::INFINITY, f64::min);
    out[21] = pop_var(&covs).sqrt();
    out[22] = mean(&corrs);
    out[23] = pop_var(&corrs).sqrt();
    (out, tests)
}
