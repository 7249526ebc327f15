//! Small numerical helpers shared by the feature catalog and the selector.

/// Solve `a * x = b` for a small dense system via Gaussian elimination with
/// partial pivoting. Returns `None` when the matrix is (numerically) singular.
pub(crate) fn solve_linear(a: &[Vec<f64>], b: &[f64]) -> Option<Vec<f64>> {
    let n = b.len();
    debug_assert!(a.len() == n && a.iter().all(|row| row.len() == n));
    let mut m: Vec<Vec<f64>> = a
        .iter()
        .zip(b)
        .map(|(row, &rhs)| {
            let mut r = row.clone();
            r.push(rhs);
            r
        })
        .collect();

    let scale: f64 = m
        .iter()
        .flat_map(|row| row[..n].iter())
        .fold(0.0f64, |acc, v| acc.max(v.abs()))
        .max(1.0);

    for col in 0..n {
        let pivot_row = (col..n)
            .max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))
            .unwrap();
        if m[pivot_row][col].abs() <= 1e-12 * scale {
            return None;
        }
        m.swap(col, pivot_row);
        for row in col + 1..n {
            let factor = m[row][col] / m[col][col];
            for k in col..=n {
                m[row][k] -= factor * m[col][k];
            }
        }
    }

    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut acc = m[row][n];
        for k in row + 1..n {
            acc -= m[row][k] * x[k];
        }
        x[row] = acc / m[row][row];
    }
    Some(x)
}

/// Evaluate a polynomial with ascending-power coefficients at `x`.
pub(crate) fn poly_eval(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
}

/// Largest real root of a polynomial given ascending-power coefficients.
///
/// Leading coefficients that are negligible relative to the largest one are
/// trimmed first so near-degenerate fits collapse to their true degree. Roots
/// are found with Durand-Kerner iteration; a root counts as real when its
/// imaginary part is below `1e-7 * max(1, |root|)`.
pub(crate) fn max_real_root(coeffs: &[f64]) -> Option<f64> {
    let max_abs = coeffs.iter().fold(0.0f64, |acc, c| acc.max(c.abs()));
    if max_abs == 0.0 || !max_abs.is_finite() {
        return None;
    }
    let mut c: Vec<f64> = coeffs.to_vec();
    while c.len() > 1 && c.last().unwrap().abs() <= 1e-12 * max_abs {
        c.pop();
    }
    let degree = c.len() - 1;
    if degree == 0 {
        return None;
    }
    if degree == 1 {
        return Some(-c[0] / c[1]);
    }

    // Durand-Kerner on the monic polynomial.
    let lead = c[degree];
    let monic: Vec<f64> = c.iter().map(|v| v / lead).collect();
    let eval = |re: f64, im: f64| -> (f64, f64) {
        let mut pr = 0.0;
        let mut pi = 0.0;
        for &coef in monic.iter().rev() {
            let nr = pr * re - pi * im + coef;
            let ni = pr * im + pi * re;
            pr = nr;
            pi = ni;
        }
        (pr, pi)
    };

    let radius = 1.0
        + monic[..degree]
            .iter()
            .fold(0.0f64, |acc, v| acc.max(v.abs()));
    let mut roots: Vec<(f64, f64)> = (0..degree)
        .map(|k| {
            // Non-symmetric start angles avoid stalling on symmetric root sets.
            let theta = 2.0 * std::f64::consts::PI * k as f64 / degree as f64 + 0.4;
            (radius * theta.cos(), radius * theta.sin())
        })
        .collect();

    for _ in 0..200 {
        let mut max_step = 0.0f64;
        for i in 0..degree {
            let (pr, pi) = eval(roots[i].0, roots[i].1);
            let mut dr = 1.0;
            let mut di = 0.0;
            for j in 0..degree {
                if i == j {
                    continue;
                }
                let fr = roots[i].0 - roots[j].0;
                let fi = roots[i].1 - roots[j].1;
                let nr = dr * fr - di * fi;
                let ni = dr * fi + di * fr;
                dr = nr;
                di = ni;
            }
            let denom = dr * dr + di * di;
            if denom == 0.0 {
                continue;
            }
            let sr = (pr * dr + pi * di) / denom;
            let si = (pi * dr - pr * di) / denom;
            roots[i].0 -= sr;
            roots[i].1 -= si;
            max_step = max_step.max(sr.hypot(si));
        }
        if max_step < 1e-12 {
            break;
        }
    }

    roots
        .iter()
        .filter(|(re, im)| im.abs() <= 1e-7 * re.abs().max(1.0))
        .map(|&(re, _)| re)
        .max_by(|a, b| a.total_cmp(b))
}

/// Percentile with linear interpolation between order statistics.
/// `p` is in [0, 100]; the input need not be sorted.
pub(crate) fn percentile(values: &[f64], p: f64) -> f64 {
    debug_assert!(!values.is_empty());
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let pos = (p / 100.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    if lo == hi {
        sorted[lo]
    } else {
        let frac = pos - lo as f64;
        sorted[lo] * (1.0 - frac) + sorted[hi] * frac
    }
}
