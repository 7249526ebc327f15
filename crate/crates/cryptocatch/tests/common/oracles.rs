//! Independent direct-from-definition reference implementations used by the
//! acceptance suite. Everything here is written from the definitions alone
//! and deliberately avoids the library's code paths: different loop
//! structures, different solvers (Cramer instead of elimination), different
//! root finding (sign-change scan instead of fixed-point iteration).

#![allow(dead_code)]

pub fn sum(x: &[f64]) -> f64 {
    let mut total = 0.0;
    for &v in x {
        total += v;
    }
    total
}

pub fn mean(x: &[f64]) -> f64 {
    sum(x) / x.len() as f64
}

pub fn variance(x: &[f64]) -> f64 {
    let m = mean(x);
    let mut acc = 0.0;
    for &v in x {
        acc += (v - m) * (v - m);
    }
    acc / x.len() as f64
}

pub fn median(x: &[f64]) -> f64 {
    let mut sorted = x.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

pub fn abs_energy(x: &[f64]) -> f64 {
    let mut acc = 0.0;
    for &v in x {
        acc += v * v;
    }
    acc
}

pub fn mean_abs_change(x: &[f64]) -> Option<f64> {
    if x.len() < 2 {
        return None;
    }
    let mut acc = 0.0;
    for i in 1..x.len() {
        acc += (x[i] - x[i - 1]).abs();
    }
    Some(acc / (x.len() - 1) as f64)
}

pub fn moving_average_last(x: &[f64], w: usize) -> Option<f64> {
    if x.len() < w {
        return None;
    }
    Some(mean(&x[x.len() - w..]))
}

pub fn sliding_std_max(x: &[f64], w: usize) -> Option<f64> {
    if x.len() < w {
        return None;
    }
    let mut best: f64 = 0.0;
    for start in 0..=(x.len() - w) {
        best = best.max(variance(&x[start..start + w]).sqrt());
    }
    Some(best)
}

pub fn mean_n_abs_max(x: &[f64], n: usize) -> Option<f64> {
    if x.is_empty() {
        return None;
    }
    let mut mags: Vec<f64> = x.iter().map(|v| v.abs()).collect();
    mags.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let take = n.min(mags.len());
    Some(mean(&mags[..take]))
}

pub fn c3(x: &[f64], lag: usize) -> Option<f64> {
    let n = x.len();
    if n <= 2 * lag {
        return None;
    }
    let mut acc = 0.0;
    let mut count = 0usize;
    let mut i = 0;
    while i + 2 * lag < n {
        acc += x[i + 2 * lag] * x[i + lag] * x[i];
        count += 1;
        i += 1;
    }
    Some(acc / count as f64)
}

pub fn binned_entropy(x: &[f64], bins: usize) -> f64 {
    let lo = x.iter().fold(f64::INFINITY, |a, &b| a.min(b));
    let hi = x.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    let mut counts = vec![0usize; bins];
    for &v in x {
        let idx = if hi == lo {
            0
        } else {
            let raw = ((v - lo) / (hi - lo) * bins as f64).floor() as usize;
            raw.min(bins - 1)
        };
        counts[idx] += 1;
    }
    let mut entropy = 0.0;
    for &c in &counts {
        if c > 0 {
            let p = c as f64 / x.len() as f64;
            entropy -= p * p.ln();
        }
    }
    entropy
}

pub fn index_mass_quantile(x: &[f64], q: f64) -> Option<f64> {
    let total: f64 = x.iter().map(|v| v.abs()).sum();
    if total == 0.0 {
        return None;
    }
    let mut running = 0.0;
    for (i, v) in x.iter().enumerate() {
        running += v.abs();
        if running / total >= q {
            return Some((i + 1) as f64 / x.len() as f64);
        }
    }
    Some(1.0)
}

pub fn autocorrelation(x: &[f64], lag: usize) -> Option<f64> {
    let n = x.len();
    if lag >= n {
        return None;
    }
    if lag == 0 {
        return Some(1.0);
    }
    let m = mean(x);
    let var = variance(x);
    if var == 0.0 {
        return None;
    }
    let mut cov = 0.0;
    for i in lag..n {
        cov += (x[i - lag] - m) * (x[i] - m);
    }
    Some(cov / ((n - lag) as f64 * var))
}

/// DFT coefficient via a complex Horner chain: evaluates the polynomial
/// `sum x[n] z^n` at `z = exp(-2 pi i k / N)`.
pub fn dft_coefficient(x: &[f64], k: usize) -> (f64, f64) {
    let n = x.len();
    let theta = -2.0 * std::f64::consts::PI * k as f64 / n as f64;
    let (zr, zi) = (theta.cos(), theta.sin());
    // Horner from the highest index down.
    let (mut ar, mut ai) = (0.0f64, 0.0f64);
    for &coeff in x.iter().rev() {
        let nr = ar * zr - ai * zi + coeff;
        let ni = ar * zi + ai * zr;
        ar = nr;
        ai = ni;
    }
    (ar, ai)
}

pub fn dft_angle_degrees(re: f64, im: f64) -> f64 {
    let mut deg = im.atan2(re) * 180.0 / std::f64::consts::PI;
    if deg <= -180.0 {
        deg += 360.0;
    }
    deg
}

// --- Small Cramer solvers ---------------------------------------------------

fn det(m: &[Vec<f64>]) -> f64 {
    let n = m.len();
    match n {
        1 => m[0][0],
        2 => m[0][0] * m[1][1] - m[0][1] * m[1][0],
        _ => {
            let mut acc = 0.0;
            for col in 0..n {
                let minor: Vec<Vec<f64>> = (1..n)
                    .map(|r| {
                        (0..n)
                            .filter(|&c| c != col)
                            .map(|c| m[r][c])
                            .collect()
                    })
                    .collect();
                let sign = if col % 2 == 0 { 1.0 } else { -1.0 };
                acc += sign * m[0][col] * det(&minor);
            }
            acc
        }
    }
}

/// Solve a small dense system by Cramer's rule; `None` when the determinant
/// is negligible relative to its Hadamard bound (the product of row norms).
pub fn solve_cramer(a: &[Vec<f64>], b: &[f64]) -> Option<Vec<f64>> {
    let n = b.len();
    let hadamard: f64 = a
        .iter()
        .map(|row| row.iter().map(|v| v * v).sum::<f64>().sqrt())
        .product::<f64>()
        .max(1e-300);
    let d = det(a);
    if d.abs() <= 1e-10 * hadamard {
        return None;
    }
    let mut out = Vec::with_capacity(n);
    for col in 0..n {
        let mut replaced = a.to_vec();
        for (row, rep) in replaced.iter_mut().enumerate() {
            rep[col] = b[row];
        }
        out.push(det(&replaced) / d);
    }
    Some(out)
}

/// AR(order) coefficient k via ordinary least squares, normal equations
/// solved with Cramer's rule.
pub fn ar_coefficient(x: &[f64], k: usize, order: usize) -> Option<f64> {
    let n = x.len();
    if n < order + 2 || n - order < order + 1 {
        return None;
    }
    let dim = order + 1;
    let mut xtx = vec![vec![0.0; dim]; dim];
    let mut xty = vec![0.0; dim];
    for t in order..n {
        let mut row = vec![1.0];
        for lag in 1..=order {
            row.push(x[t - lag]);
        }
        for a in 0..dim {
            for b in 0..dim {
                xtx[a][b] += row[a] * row[b];
            }
            xty[a] += row[a] * x[t];
        }
    }
    solve_cramer(&xtx, &xty).map(|phi| phi[k])
}

fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] * (1.0 - frac) + sorted[hi] * frac
}

/// Drift polynomial per the definition: quantile bins over the signal
/// values, per-bin means, degree-m least squares on standardized abscissae
/// (solved with Cramer), expanded back to raw-signal coefficients.
pub fn friedrich(x: &[f64], m: usize, r: usize) -> Option<Vec<f64>> {
    let n = x.len();
    if n < 3 {
        return None;
    }
    let signals = &x[..n - 1];
    let mut sorted = signals.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let edges: Vec<f64> = (0..=r).map(|j| quantile_sorted(&sorted, j as f64 / r as f64)).collect();

    let mut bins: Vec<Vec<(f64, f64)>> = vec![Vec::new(); r];
    for i in 0..n - 1 {
        let s = x[i];
        let d = x[i + 1] - x[i];
        let mut assigned = r - 1;
        for j in 0..r {
            if s >= edges[j] && (j == r - 1 || s < edges[j + 1]) {
                assigned = j;
                break;
            }
        }
        bins[assigned].push((s, d));
    }
    let points: Vec<(f64, f64)> = bins
        .iter()
        .filter(|b| !b.is_empty())
        .map(|b| {
            let s = b.iter().map(|p| p.0).sum::<f64>() / b.len() as f64;
            let d = b.iter().map(|p| p.1).sum::<f64>() / b.len() as f64;
            (s, d)
        })
        .collect();
    if points.len() < m + 1 {
        return None;
    }

    let count = points.len() as f64;
    let center = points.iter().map(|p| p.0).sum::<f64>() / count;
    let spread =
        (points.iter().map(|p| (p.0 - center) * (p.0 - center)).sum::<f64>() / count).sqrt();
    if spread == 0.0 {
        return None;
    }

    let dim = m + 1;
    let mut xtx = vec![vec![0.0; dim]; dim];
    let mut xty = vec![0.0; dim];
    for &(s, d) in &points {
        let u = (s - center) / spread;
        let mut basis = vec![1.0];
        for _ in 1..dim {
            basis.push(basis.last().unwrap() * u);
        }
        for a in 0..dim {
            for b in 0..dim {
                xtx[a][b] += basis[a] * basis[b];
            }
            xty[a] += basis[a] * d;
        }
    }
    let scaled = solve_cramer(&xtx, &xty)?;

    // Expand sum a_k ((s - center)/spread)^k into ascending powers of s by
    // repeated synthetic multiplication.
    let mut out = vec![0.0; dim];
    let mut basis = vec![0.0; dim];
    basis[0] = 1.0;
    for (k, &a) in scaled.iter().enumerate() {
        if k > 0 {
            let mut next = vec![0.0; dim];
            for i in 0..k {
                next[i + 1] += basis[i] / spread;
                next[i] -= basis[i] * center / spread;
            }
            basis = next;
        }
        for i in 0..=k {
            out[i] += a * basis[i];
        }
    }
    Some(out)
}

pub fn poly_value(coeffs: &[f64], v: f64) -> f64 {
    let mut acc = 0.0;
    let mut pow = 1.0;
    for &c in coeffs {
        acc += c * pow;
        pow *= v;
    }
    acc
}

/// Largest real root via the closed-form solutions for degrees 1 to 3
/// (quadratic formula; depressed cubic with the trigonometric method for
/// three real roots and Cardano's formula for one).
pub fn max_real_root_analytic(coeffs: &[f64]) -> Option<f64> {
    let max_abs = coeffs.iter().fold(0.0f64, |a, c| a.max(c.abs()));
    if max_abs == 0.0 {
        return None;
    }
    let mut c = coeffs.to_vec();
    while c.len() > 1 && c.last().unwrap().abs() <= 1e-12 * max_abs {
        c.pop();
    }
    match c.len() {
        0 | 1 => None,
        2 => Some(-c[0] / c[1]),
        3 => {
            let (a, b, cc) = (c[2], c[1], c[0]);
            let disc = b * b - 4.0 * a * cc;
            if disc < 0.0 {
                return None;
            }
            let r1 = (-b + disc.sqrt()) / (2.0 * a);
            let r2 = (-b - disc.sqrt()) / (2.0 * a);
            Some(r1.max(r2))
        }
        4 => {
            // Normalize to t^3 + p t + q via x = t - b/(3a).
            let (a, b, cc, d) = (c[3], c[2], c[1], c[0]);
            let shift = b / (3.0 * a);
            let p = cc / a - shift * shift * 3.0;
            let q = 2.0 * shift.powi(3) - shift * cc / a + d / a;
            let discriminant = -4.0 * p.powi(3) - 27.0 * q * q;
            let t_max = if discriminant > 0.0 {
                // Three real roots; k = 0 gives the largest.
                let m = 2.0 * (-p / 3.0).sqrt();
                let arg = (3.0 * q / (p * m)).clamp(-1.0, 1.0);
                let theta = arg.acos();
                m * (theta / 3.0).cos()
            } else {
                // One real root (Cardano).
                let inner = (q * q / 4.0 + p.powi(3) / 27.0).max(0.0).sqrt();
                (-q / 2.0 + inner).cbrt() + (-q / 2.0 - inner).cbrt()
            };
            Some(t_max - shift)
        }
        _ => unreachable!("drift polynomials stop at degree 3"),
    }
}

// --- Multi-scale peak counting ----------------------------------------------
// Independent implementation of the documented rule: Ricker rows for widths
// 1..=max_width sampled at integer offsets -5w..=5w, zero-padded convolution,
// candidates are strict interior maxima of the width-1 row, ridges must
// persist across ceil(max_width/4) consecutive widths within +-1 index
// (nearest maximum, lower index on ties), and the width-1 coefficient must
// exceed the 10th percentile of that row's absolute values.

fn ricker_wavelet(t: f64, width: f64) -> f64 {
    let a = 2.0 / ((3.0 * width).sqrt() * std::f64::consts::PI.powf(0.25));
    let q = t / width;
    a * (1.0 - q * q) * (-0.5 * q * q).exp()
}

fn cwt_row_by_signal(x: &[f64], width: usize) -> Vec<f64> {
    let h = 5 * width as i64;
    let n = x.len();
    let mut out = vec![0.0; n];
    // Iterate over signal samples (not kernel offsets) on purpose.
    for (j, &value) in x.iter().enumerate() {
        for (i, slot) in out.iter_mut().enumerate() {
            let t = i as i64 - j as i64;
            if t.abs() <= h {
                *slot += ricker_wavelet(t as f64, width as f64) * value;
            }
        }
    }
    out
}

fn strict_maxima(row: &[f64]) -> Vec<usize> {
    let mut out = Vec::new();
    for i in 1..row.len().saturating_sub(1) {
        if row[i] > row[i - 1] && row[i] > row[i + 1] {
            out.push(i);
        }
    }
    out
}

fn percentile_10_abs(row: &[f64]) -> f64 {
    let mut mags: Vec<f64> = row.iter().map(|v| v.abs()).collect();
    mags.sort_by(|a, b| a.partial_cmp(b).unwrap());
    quantile_sorted(&mags, 0.10)
}

pub fn cwt_peaks(x: &[f64], max_width: usize) -> Option<f64> {
    if x.len() < 3 {
        return None;
    }
    let rows: Vec<Vec<f64>> = (1..=max_width).map(|w| cwt_row_by_signal(x, w)).collect();
    let maxima: Vec<Vec<usize>> = rows.iter().map(|r| strict_maxima(r)).collect();
    let threshold = percentile_10_abs(&rows[0]);
    let needed = max_width.div_ceil(4);

    let mut count = 0usize;
    for &start in &maxima[0] {
        if rows[0][start] <= threshold {
            continue;
        }
        let mut length = 1usize;
        let mut position = start;
        for row_maxima in maxima.iter().skip(1) {
            let mut chosen: Option<usize> = None;
            for &candidate in row_maxima {
                if candidate.abs_diff(position) <= 1 {
                    chosen = match chosen {
                        None => Some(candidate),
                        Some(current) => {
                            let better = candidate.abs_diff(position) < current.abs_diff(position)
                                || (candidate.abs_diff(position) == current.abs_diff(position)
                                    && candidate < current);
                            Some(if better { candidate } else { current })
                        }
                    };
                }
            }
            match chosen {
                Some(next) => {
                    position = next;
                    length += 1;
                }
                None => break,
            }
        }
        if length >= needed {
            count += 1;
        }
    }
    Some(count as f64)
}
