//! Slow, self-contained reference computations for cross-checking the
//! library. Nothing here calls into `smlsafe` or a special-function crate.

use std::f64::consts::PI;

/// Standard normal density.
pub fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

fn simpson(a: f64, b: f64, fa: f64, fm: f64, fb: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

#[allow(clippy::too_many_arguments)]
fn adaptive(
    f: &dyn Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = simpson(a, m, fa, flm, fm);
    let right = simpson(m, b, fm, frm, fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    adaptive(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
        + adaptive(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
}

/// Adaptive Simpson quadrature of `f` over `[a, b]`.
pub fn integrate(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    // split into unit pieces so narrow peaks are never skipped
    let pieces = ((b - a).ceil() as usize).clamp(1, 10_000);
    let h = (b - a) / pieces as f64;
    (0..pieces)
        .map(|i| {
            let (x0, x1) = (a + i as f64 * h, a + (i + 1) as f64 * h);
            let (f0, f1, fm) = (f(x0), f(x1), f(0.5 * (x0 + x1)));
            adaptive(
                f,
                x0,
                x1,
                f0,
                fm,
                f1,
                simpson(x0, x1, f0, fm, f1),
                tol / pieces as f64,
                50,
            )
        })
        .sum()
}

/// Standard normal mass on `[lo, hi]` by quadrature of the density.
pub fn normal_mass(lo: f64, hi: f64) -> f64 {
    integrate(&normal_pdf, lo.max(-40.0), hi.min(40.0), 1e-14)
}

/// Standard normal upper tail beyond `x >= 0` by quadrature.
pub fn normal_upper_tail(x: f64) -> f64 {
    integrate(&normal_pdf, x, x + 40.0, 1e-14 * normal_pdf(x).max(1e-300))
}

/// `P(X >= k)` for `X ~ Binomial(n, p)` by direct summation of the mass function.
pub fn binomial_upper_tail(k: u64, n: u64, p: f64) -> f64 {
    if k == 0 {
        return 1.0;
    }
    if p <= 0.0 {
        return 0.0;
    }
    if p >= 1.0 {
        return 1.0;
    }
    let mut ln_fact = vec![0.0; n as usize + 1];
    for i in 1..=n as usize {
        ln_fact[i] = ln_fact[i - 1] + (i as f64).ln();
    }
    let (lp, lq) = (p.ln(), (-p).ln_1p());
    let mut terms: Vec<f64> = (k..=n)
        .map(|i| {
            let i = i as usize;
            (ln_fact[n as usize] - ln_fact[i] - ln_fact[n as usize - i] + i as f64 * lp + (n as usize - i) as f64 * lq)
                .exp()
        })
        .collect();
    terms.sort_by(|a, b| a.total_cmp(b));
    terms.iter().sum()
}

/// One-sided lower confidence bound on a binomial proportion: the `p` at
/// which observing `k` or more successes out of `n` has probability `1 - c`.
pub fn clopper_pearson_lower(k: u64, n: u64, confidence: f64) -> f64 {
    if k == 0 {
        return 0.0;
    }
    let alpha = 1.0 - confidence;
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if binomial_upper_tail(k, n, mid) < alpha {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// `P(N <= f)` for `N ~ Poisson(mean)`.
pub fn poisson_cdf(f: u64, mean: f64) -> f64 {
    let mut term = (-mean).exp();
    let mut sum = term;
    for i in 1..=f {
        term *= mean / i as f64;
        sum += term;
    }
    sum
}

/// Smallest mean for which at most `f` events has probability `1 - c`.
pub fn poisson_upper_mean(f: u64, confidence: f64) -> f64 {
    let alpha = 1.0 - confidence;
    let (mut lo, mut hi) = (0.0f64, 10.0 * (f as f64 + 10.0));
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if poisson_cdf(f, mid) > alpha {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Channel state in the explicit enumeration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChannelState {
    Correct,
    Silent,
    Wrong,
}

/// Dangerous / safe-state / correct probabilities for `n` identical channels
/// by listing every joint state, materialising concrete outputs and voting
/// on exact equality. Wrong outputs all equal 1.0 when `concordant`,
/// otherwise channel `j` emits `1 + j`. The true value is 0.
pub fn enumerate_identical(n: usize, p_wrong: f64, p_silent: f64, k: usize, concordant: bool) -> (f64, f64, f64) {
    let mut out = (0.0, 0.0, 0.0);
    let states = [ChannelState::Correct, ChannelState::Silent, ChannelState::Wrong];
    for code in 0..3usize.pow(n as u32) {
        let mut c = code;
        let mut prob = 1.0;
        let mut values = Vec::new();
        for j in 0..n {
            let s = states[c % 3];
            c /= 3;
            match s {
                ChannelState::Correct => {
                    prob *= 1.0 - p_wrong - p_silent;
                    values.push(0.0);
                }
                ChannelState::Silent => prob *= p_silent,
                ChannelState::Wrong => {
                    prob *= p_wrong;
                    values.push(if concordant { 1.0 } else { 1.0 + j as f64 });
                }
            }
        }
        let mut groups: Vec<(f64, usize)> = Vec::new();
        for v in &values {
            match groups.iter_mut().find(|(g, _)| g == v) {
                Some(g) => g.1 += 1,
                None => groups.push((*v, 1)),
            }
        }
        let best = groups.iter().map(|g| g.1).max().unwrap_or(0);
        let winners: Vec<f64> = groups.iter().filter(|g| g.1 == best).map(|g| g.0).collect();
        if best >= k && winners.len() == 1 {
            if winners[0] == 0.0 {
                out.2 += prob;
            } else {
                out.0 += prob;
            }
        } else {
            out.1 += prob;
        }
    }
    out
}

/// Weighted sum of integer scores.
pub fn weighted_total(scores: &[u8], weights: &[f64]) -> f64 {
    scores.iter().zip(weights).map(|(s, w)| *s as f64 * w).sum()
}
