//! Time-series feature functions.
//!
//! Every function is pure and operates on a plain `&[f64]` series (packet
//! lengths or inter-arrival times). Features that are undefined for a given
//! series length or degenerate input return `None`; the extraction layer
//! imputes those to 0.0 so downstream consumers only ever see finite values.

use crate::numeric::{max_real_root, percentile, poly_eval, solve_linear};

/// Sum of all values.
pub fn sum_values(x: &[f64]) -> f64 {
    x.iter().sum()
}

/// Mean of the `min(n, len)` largest absolute values.
pub fn mean_n_absolute_max(x: &[f64], n: usize) -> Option<f64> {
    if x.is_empty() || n == 0 {
        return None;
    }
    let mut magnitudes: Vec<f64> = x.iter().map(|v| v.abs()).collect();
    magnitudes.sort_by(|a, b| b.total_cmp(a));
    let take = n.min(magnitudes.len());
    Some(magnitudes[..take].iter().sum::<f64>() / take as f64)
}

/// Third-order non-linearity statistic:
/// mean of `x[i + 2*lag] * x[i + lag] * x[i]`. Undefined when `len <= 2*lag`.
pub fn c3(x: &[f64], lag: usize) -> Option<f64> {
    let n = x.len();
    if lag == 0 || n <= 2 * lag {
        return None;
    }
    let count = n - 2 * lag;
    let total: f64 = (0..count).map(|i| x[i + 2 * lag] * x[i + lag] * x[i]).sum();
    Some(total / count as f64)
}

/// Shannon entropy (natural log) of an equal-width histogram of the series
/// over `[min, max]` with `max_bins` bins. A constant series has entropy 0.
pub fn binned_entropy(x: &[f64], max_bins: usize) -> Option<f64> {
    if x.is_empty() || max_bins == 0 {
        return None;
    }
    let lo = x.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut counts = vec![0usize; max_bins];
    if hi > lo {
        let width = (hi - lo) / max_bins as f64;
        for &v in x {
            let bin = (((v - lo) / width) as usize).min(max_bins - 1);
            counts[bin] += 1;
        }
    } else {
        counts[0] = x.len();
    }
    let n = x.len() as f64;
    Some(
        counts
            .iter()
            .filter(|&&c| c > 0)
            .map(|&c| {
                let p = c as f64 / n;
                -p * p.ln()
            })
            .sum(),
    )
}

/// Relative index at which the cumulative absolute mass first reaches a
/// fraction `q` of the total: `(i + 1) / len`. Undefined for an all-zero
/// series.
pub fn index_mass_quantile(x: &[f64], q: f64) -> Option<f64> {
    if x.is_empty() || !(0.0..1.0).contains(&q) || q == 0.0 {
        return None;
    }
    let total: f64 = x.iter().map(|v| v.abs()).sum();
    if total == 0.0 {
        return None;
    }
    let target = q * total;
    let mut cum = 0.0;
    for (i, v) in x.iter().enumerate() {
        cum += v.abs();
        if cum >= target {
            return Some((i + 1) as f64 / x.len() as f64);
        }
    }
    Some(1.0)
}

/// Ricker (Mexican-hat) wavelet sampled at offset `t` for width `w`.
fn ricker(t: f64, w: f64) -> f64 {
    let norm = 2.0 / ((3.0 * w).sqrt() * std::f64::consts::PI.powf(0.25));
    let arg = t / w;
    norm * (1.0 - arg * arg) * (-t * t / (2.0 * w * w)).exp()
}

/// One CWT row: zero-padded convolution of the series with the Ricker kernel
/// of the given width, sampled at integer offsets `-5w..=5w`.
fn cwt_row(x: &[f64], width: usize) -> Vec<f64> {
    let h = 5 * width as i64;
    let n = x.len() as i64;
    (0..n)
        .map(|i| {
            let mut acc = 0.0;
            for t in -h..=h {
                let j = i - t;
                if j >= 0 && j < n {
                    acc += ricker(t as f64, width as f64) * x[j as usize];
                }
            }
            acc
        })
        .collect()
}

/// Strict interior local maxima of a row (first and last index excluded).
fn local_maxima(row: &[f64]) -> Vec<usize> {
    (1..row.len().saturating_sub(1))
        .filter(|&i| row[i] > row[i - 1] && row[i] > row[i + 1])
        .collect()
}

/// Count of multi-scale peaks in the series.
///
/// Rule: compute Ricker CWT rows for widths `1..=max_width`. Candidates are
/// the strict interior local maxima of the width-1 row. A candidate counts as
/// a peak when (a) a ridge of local maxima within ±1 index persists across at
/// least `ceil(max_width / 4)` consecutive widths starting at width 1 (at
/// each step the nearest maximum is followed, ties toward the lower index),
/// and (b) its width-1 coefficient exceeds the 10th percentile of the
/// absolute values of that row. Undefined for series shorter than 3.
pub fn number_cwt_peaks(x: &[f64], max_width: usize) -> Option<f64> {
    if x.len() < 3 || max_width == 0 {
        return None;
    }
    let rows: Vec<Vec<f64>> = (1..=max_width).map(|w| cwt_row(x, w)).collect();
    let candidates = local_maxima(&rows[0]);
    if candidates.is_empty() {
        return Some(0.0);
    }
    let abs_row: Vec<f64> = rows[0].iter().map(|v| v.abs()).collect();
    let floor = percentile(&abs_row, 10.0);
    let required = max_width.div_ceil(4);

    let maxima_per_row: Vec<Vec<usize>> = rows.iter().map(|r| local_maxima(r)).collect();
    let count = candidates
        .iter()
        .filter(|&&start| {
            if rows[0][start] <= floor {
                return false;
            }
            let mut pos = start;
            let mut ridge = 1usize;
            for maxima in maxima_per_row.iter().skip(1) {
                let next = maxima
                    .iter()
                    .filter(|&&j| j.abs_diff(pos) <= 1)
                    .min_by_key(|&&j| (j.abs_diff(pos), j));
                match next {
                    Some(&j) => {
                        pos = j;
                        ridge += 1;
                    }
                    None => break,
                }
            }
            ridge >= required
        })
        .count();
    Some(count as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FftAttr {
    Real,
    Imag,
    Abs,
    Angle,
}

/// Attribute of the k-th discrete Fourier coefficient
/// `X_k = sum_n x[n] * exp(-2*pi*i*k*n/N)`. The angle is reported in degrees
/// in `(-180, 180]`. Undefined for `k > floor(N / 2)`.
pub fn fft_coefficient(x: &[f64], k: usize, attr: FftAttr) -> Option<f64> {
    let n = x.len();
    if n == 0 || k > n / 2 {
        return None;
    }
    let mut re = 0.0;
    let mut im = 0.0;
    for (idx, &v) in x.iter().enumerate() {
        let phase = -2.0 * std::f64::consts::PI * (k * idx) as f64 / n as f64;
        re += v * phase.cos();
        im += v * phase.sin();
    }
    Some(match attr {
        FftAttr::Real => re,
        FftAttr::Imag => im,
        FftAttr::Abs => re.hypot(im),
        FftAttr::Angle => {
            let mut deg = im.atan2(re).to_degrees();
            if deg <= -180.0 {
                deg += 360.0;
            }
            deg
        }
    })
}

/// Autocorrelation at the given lag with population mean and variance over
/// the whole series. Lag 0 is 1 by definition; a constant series (at lag > 0)
/// is undefined.
pub fn autocorrelation(x: &[f64], lag: usize) -> Option<f64> {
    let n = x.len();
    if n == 0 || lag >= n {
        return None;
    }
    if lag == 0 {
        return Some(1.0);
    }
    let mean = x.iter().sum::<f64>() / n as f64;
    let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
    if var == 0.0 {
        return None;
    }
    let cov: f64 = (0..n - lag).map(|i| (x[i] - mean) * (x[i + lag] - mean)).sum();
    Some(cov / ((n - lag) as f64 * var))
}

/// Coefficient `k` of an autoregressive model of the given order fitted by
/// ordinary least squares (`k = 0` is the intercept). Undefined when the
/// series is too short (`len < order + 2`) or the design is singular.
pub fn ar_coefficient(x: &[f64], k: usize, order: usize) -> Option<f64> {
    let n = x.len();
    if order == 0 || k > order || n < order + 2 {
        return None;
    }
    let rows = n - order;
    let dim = order + 1;
    // Normal equations for design [1, x[t-1], ..., x[t-order]] -> x[t].
    let mut xtx = vec![vec![0.0; dim]; dim];
    let mut xty = vec![0.0; dim];
    for t in order..n {
        let mut row = Vec::with_capacity(dim);
        row.push(1.0);
        for i in 1..=order {
            row.push(x[t - i]);
        }
        for a in 0..dim {
            for b in 0..dim {
                xtx[a][b] += row[a] * row[b];
            }
            xty[a] += row[a] * x[t];
        }
    }
    if rows < dim {
        return None; // under-determined
    }
    solve_linear(&xtx, &xty).map(|phi| phi[k])
}

/// Drift polynomial of the series: quantile-bin the `(x[i], x[i+1] - x[i])`
/// pairs into `r` bins by signal value, drop empty bins, and least-squares
/// fit a degree-`m` polynomial through the per-bin `(mean signal, mean
/// increment)` points. Returns ascending-power coefficients in the raw
/// signal variable, or `None` when fewer than `m + 1` bins are populated.
///
/// The fit itself runs on standardized signal values and is expanded back
/// afterwards; raw packet-scale powers would make the normal equations
/// useless in f64. The polynomial is identical in exact arithmetic.
pub fn friedrich_coefficients(x: &[f64], m: usize, r: usize) -> Option<Vec<f64>> {
    let n = x.len();
    if n < 3 || r == 0 {
        return None;
    }
    let signals: Vec<f64> = x[..n - 1].to_vec();
    let deltas: Vec<f64> = x.windows(2).map(|p| p[1] - p[0]).collect();

    let edges: Vec<f64> = (0..=r)
        .map(|j| percentile(&signals, 100.0 * j as f64 / r as f64))
        .collect();
    let mut sums = vec![(0.0f64, 0.0f64, 0usize); r];
    for (&s, &d) in signals.iter().zip(&deltas) {
        // Last bin is closed on the right; duplicates collapse leftward.
        let mut bin = r - 1;
        for j in 0..r {
            if s >= edges[j] && (s < edges[j + 1] || j == r - 1) {
                bin = j;
                break;
            }
        }
        sums[bin].0 += s;
        sums[bin].1 += d;
        sums[bin].2 += 1;
    }
    let points: Vec<(f64, f64)> = sums
        .iter()
        .filter(|(_, _, c)| *c > 0)
        .map(|&(s, d, c)| (s / c as f64, d / c as f64))
        .collect();
    if points.len() < m + 1 {
        return None;
    }

    // Standardize the abscissae. Populated bins hold disjoint value ranges,
    // so with m + 1 of them the spread is non-zero.
    let count = points.len() as f64;
    let center = points.iter().map(|p| p.0).sum::<f64>() / count;
    let spread =
        (points.iter().map(|p| (p.0 - center) * (p.0 - center)).sum::<f64>() / count).sqrt();
    if spread == 0.0 {
        return None;
    }

    // Least squares in the standardized variable u = (s - center) / spread.
    let dim = m + 1;
    let mut xtx = vec![vec![0.0; dim]; dim];
    let mut xty = vec![0.0; dim];
    for &(s, d) in &points {
        let u = (s - center) / spread;
        let mut basis = Vec::with_capacity(dim);
        let mut pow = 1.0;
        for _ in 0..dim {
            basis.push(pow);
            pow *= u;
        }
        for a in 0..dim {
            for b in 0..dim {
                xtx[a][b] += basis[a] * basis[b];
            }
            xty[a] += basis[a] * d;
        }
    }
    let scaled = solve_linear(&xtx, &xty)?;
    Some(expand_standardized_poly(&scaled, center, spread))
}

/// Rewrite `sum a_k u^k` with `u = (s - center) / spread` as ascending-power
/// coefficients in `s`.
fn expand_standardized_poly(scaled: &[f64], center: f64, spread: f64) -> Vec<f64> {
    let mut out = vec![0.0; scaled.len()];
    // basis = ((s - center) / spread)^k, expanded incrementally.
    let mut basis = vec![0.0; scaled.len()];
    basis[0] = 1.0;
    let mut degree = 0usize;
    for (k, &a) in scaled.iter().enumerate() {
        if k > 0 {
            // Multiply basis by (s - center) / spread.
            let mut next = vec![0.0; scaled.len()];
            for i in 0..=degree {
                next[i + 1] += basis[i] / spread;
                next[i] -= basis[i] * center / spread;
            }
            basis = next;
            degree += 1;
        }
        for i in 0..=degree {
            out[i] += a * basis[i];
        }
    }
    out
}

/// Largest real fixed point of the fitted drift polynomial
/// (see [`friedrich_coefficients`]).
pub fn max_langevin_fixed_point(x: &[f64], m: usize, r: usize) -> Option<f64> {
    let coeffs = friedrich_coefficients(x, m, r)?;
    max_real_root(&coeffs)
}

/// Evaluate a drift polynomial produced by [`friedrich_coefficients`].
pub fn drift_value(coeffs: &[f64], v: f64) -> f64 {
    poly_eval(coeffs, v)
}

/// The eight basic summary statistics of a series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BasicStats {
    pub mean: f64,
    /// Population standard deviation (0 for a single sample).
    pub std: f64,
    pub min: f64,
    pub max: f64,
    pub median: f64,
    /// Population variance.
    pub variance: f64,
    /// Sum of squares.
    pub abs_energy: f64,
    /// Mean absolute first difference; `None` for a single sample.
    pub mean_abs_change: Option<f64>,
}

pub fn basic_stats(x: &[f64]) -> Option<BasicStats> {
    let n = x.len();
    if n == 0 {
        return None;
    }
    let mean = x.iter().sum::<f64>() / n as f64;
    let variance = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
    let min = x.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut sorted = x.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let median = if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    };
    let abs_energy = x.iter().map(|v| v * v).sum();
    let mean_abs_change = if n >= 2 {
        Some(x.windows(2).map(|p| (p[1] - p[0]).abs()).sum::<f64>() / (n - 1) as f64)
    } else {
        None
    };
    Some(BasicStats {
        mean,
        std: variance.sqrt(),
        min,
        max,
        median,
        variance,
        abs_energy,
        mean_abs_change,
    })
}

/// Windowed statistics: the last `w`-point moving average and the maximum
/// over all `w`-point sliding (population) standard deviations. Undefined
/// when the series is shorter than `w`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RollingStats {
    pub moving_average_last: f64,
    pub sliding_std_max: f64,
}

pub fn rolling_stats(x: &[f64], w: usize) -> Option<RollingStats> {
    let n = x.len();
    if w == 0 || n < w {
        return None;
    }
    let moving_average_last = x[n - w..].iter().sum::<f64>() / w as f64;
    let sliding_std_max = x
        .windows(w)
        .map(|win| {
            let mean = win.iter().sum::<f64>() / w as f64;
            (win.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / w as f64).sqrt()
        })
        .fold(0.0f64, f64::max);
    Some(RollingStats {
        moving_average_last,
        sliding_std_max,
    })
}
