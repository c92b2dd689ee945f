//! Numerically robust statistical utilities shared by all subsystems:
//! shift-stable log-sum-exp, one- and two-sample Kolmogorov–Smirnov
//! tests (optionally weighted), effective sample size of importance
//! weights, and digamma/trigamma evaluations used as moment oracles.

use serde::Serialize;

use crate::error::{Error, Result};

/// Outcome of a statistical verdict.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
}

/// A Kolmogorov–Smirnov comparison: statistic, sample sizes, an
/// asymptotic p-approximation when one is available, and a pass/fail
/// verdict against the declared statistic threshold.
#[derive(Debug, Clone, Serialize)]
pub struct KsReport {
    pub statistic: f64,
    pub n1: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n2: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_approx: Option<f64>,
    pub threshold: f64,
    pub verdict: Verdict,
}

impl KsReport {
    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }
}

/// `log(sum_i e^{v_i})`, computed shift-stably. All-`-inf` input gives
/// `-inf`; an empty list is a domain error.
pub fn log_sum_exp(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::domain("log_sum_exp of an empty list"));
    }
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return Ok(f64::NEG_INFINITY);
    }
    let sum: f64 = values.iter().map(|&v| (v - max).exp()).sum();
    Ok(max + sum.ln())
}

/// Two-argument log-sum-exp, infallible; the workhorse of the
/// partition-function recursions.
#[inline]
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// Effective sample size `(Σw)² / Σw²` of importance weights given in
/// natural-log scale, evaluated without leaving log space.
pub fn ess(log_weights: &[f64]) -> Result<f64> {
    let lse1 = log_sum_exp(log_weights)?;
    if lse1 == f64::NEG_INFINITY {
        return Err(Error::DegenerateSample);
    }
    let doubled: Vec<f64> = log_weights.iter().map(|&w| 2.0 * w).collect();
    let lse2 = log_sum_exp(&doubled)?;
    Ok((2.0 * lse1 - lse2).exp())
}

/// Critical value of the two-sample KS statistic at significance
/// `alpha`, by the asymptotic Kolmogorov distribution.
pub fn ks_two_sample_critical(alpha: f64, n1: usize, n2: usize) -> f64 {
    let c = (-0.5 * (alpha / 2.0).ln()).sqrt();
    c * ((n1 + n2) as f64 / (n1 as f64 * n2 as f64)).sqrt()
}

/// One-sample analogue of [`ks_two_sample_critical`].
pub fn ks_one_sample_critical(alpha: f64, n: usize) -> f64 {
    let c = (-0.5 * (alpha / 2.0).ln()).sqrt();
    c / (n as f64).sqrt()
}

/// Asymptotic survival function of the Kolmogorov distribution with the
/// Stephens effective-size correction.
fn kolmogorov_p(statistic: f64, n_eff: f64) -> f64 {
    let sqrt_ne = n_eff.sqrt();
    let lambda = statistic * (sqrt_ne + 0.12 + 0.11 / sqrt_ne);
    if lambda < 1e-3 {
        return 1.0;
    }
    let mut p = 0.0;
    for k in 1..=100 {
        let term = (-2.0 * (k as f64) * (k as f64) * lambda * lambda).exp();
        p += if k % 2 == 1 { 2.0 * term } else { -2.0 * term };
        if term < 1e-16 {
            break;
        }
    }
    p.clamp(0.0, 1.0)
}

fn sorted_copy(xs: &[f64]) -> Vec<f64> {
    let mut v = xs.to_vec();
    v.sort_unstable_by(|a, b| a.partial_cmp(b).expect("NaN in KS sample"));
    v
}

/// Weighted empirical CDF evaluation over a sorted pooled grid. Returns
/// for each chain of values the running normalized mass.
struct Ecdf {
    values: Vec<f64>,
    cum: Vec<f64>,
}

impl Ecdf {
    fn new(xs: &[f64], weights: Option<&[f64]>) -> Result<Self> {
        if xs.is_empty() {
            return Err(Error::domain("KS sample is empty"));
        }
        let mut idx: Vec<usize> = (0..xs.len()).collect();
        idx.sort_unstable_by(|&a, &b| xs[a].partial_cmp(&xs[b]).expect("NaN in KS sample"));
        let mut values = Vec::with_capacity(xs.len());
        let mut cum = Vec::with_capacity(xs.len());
        let mut total = 0.0;
        if let Some(w) = weights {
            if w.len() != xs.len() {
                return Err(Error::contract("weights length mismatch"));
            }
            if w.iter().any(|&wi| !(wi >= 0.0)) {
                return Err(Error::domain("KS weights must be nonnegative"));
            }
            let sum: f64 = w.iter().sum();
            if !(sum > 0.0) {
                return Err(Error::domain("KS weights must not all be zero"));
            }
            for &i in &idx {
                total += w[i] / sum;
                values.push(xs[i]);
                cum.push(total);
            }
        } else {
            let n = xs.len() as f64;
            for (rank, &i) in idx.iter().enumerate() {
                values.push(xs[i]);
                cum.push((rank + 1) as f64 / n);
            }
        }
        Ok(Ecdf { values, cum })
    }

    /// F(t) = mass at values <= t.
    fn eval(&self, t: f64) -> f64 {
        // partition_point: first index with value > t
        let k = self.values.partition_point(|&v| v <= t);
        if k == 0 {
            0.0
        } else {
            self.cum[k - 1]
        }
    }
}

fn ks_sup_distance(fx: &Ecdf, fy: &Ecdf) -> (f64, f64) {
    // sup over the pooled jump points of (Fx - Fy) and (Fy - Fx)
    let mut d_plus: f64 = 0.0;
    let mut d_minus: f64 = 0.0;
    for &t in fx.values.iter().chain(fy.values.iter()) {
        let diff = fx.eval(t) - fy.eval(t);
        d_plus = d_plus.max(diff);
        d_minus = d_minus.max(-diff);
    }
    (d_plus, d_minus)
}

/// Two-sample KS test. Without weights the asymptotic p-value is
/// reported; with weights only the statistic is compared against the
/// declared `threshold` (there is no standard weighted asymptotic).
pub fn ks_two_sample(
    xs: &[f64],
    ys: &[f64],
    weights_x: Option<&[f64]>,
    weights_y: Option<&[f64]>,
    threshold: f64,
) -> Result<KsReport> {
    let fx = Ecdf::new(xs, weights_x)?;
    let fy = Ecdf::new(ys, weights_y)?;
    let (d_plus, d_minus) = ks_sup_distance(&fx, &fy);
    let statistic = d_plus.max(d_minus);
    let weighted = weights_x.is_some() || weights_y.is_some();
    let p_approx = if weighted {
        None
    } else {
        let n1 = xs.len() as f64;
        let n2 = ys.len() as f64;
        Some(kolmogorov_p(statistic, n1 * n2 / (n1 + n2)))
    };
    let verdict = if statistic <= threshold {
        Verdict::Pass
    } else {
        Verdict::Fail
    };
    Ok(KsReport {
        statistic,
        n1: xs.len(),
        n2: Some(ys.len()),
        p_approx,
        threshold,
        verdict,
    })
}

/// One-sided two-sample statistic `sup_t (F_x(t) - F_y(t))`, used for
/// stochastic-dominance checks (x dominated by y gives a small value).
pub fn ks_two_sample_one_sided(
    xs: &[f64],
    ys: &[f64],
    weights_x: Option<&[f64]>,
    weights_y: Option<&[f64]>,
) -> Result<f64> {
    let fx = Ecdf::new(xs, weights_x)?;
    let fy = Ecdf::new(ys, weights_y)?;
    Ok(ks_sup_distance(&fx, &fy).0)
}

/// One-sample KS test of `xs` against a reference CDF. Both one-sided
/// gaps at every sample point are taken.
pub fn ks_one_sample<F>(xs: &[f64], cdf: F, threshold: f64) -> Result<KsReport>
where
    F: Fn(f64) -> f64,
{
    if xs.is_empty() {
        return Err(Error::domain("KS sample is empty"));
    }
    let sorted = sorted_copy(xs);
    let n = sorted.len() as f64;
    let mut statistic: f64 = 0.0;
    for (i, &x) in sorted.iter().enumerate() {
        let c = cdf(x);
        if !(-1e-12..=1.0 + 1e-12).contains(&c) {
            return Err(Error::contract(format!(
                "reference CDF out of [0,1] at {x}: {c}"
            )));
        }
        let hi = (i as f64 + 1.0) / n - c;
        // the lower gap compares the ECDF just below x with the CDF's
        // left limit, so reference atoms at sample points do not count
        let c_left = cdf(x - 1e-9 * (1.0 + x.abs()));
        let lo = c_left - i as f64 / n;
        statistic = statistic.max(hi).max(lo);
    }
    let p_approx = Some(kolmogorov_p(statistic, n));
    let verdict = if statistic <= threshold {
        Verdict::Pass
    } else {
        Verdict::Fail
    };
    Ok(KsReport {
        statistic,
        n1: sorted.len(),
        n2: None,
        p_approx,
        threshold,
        verdict,
    })
}

// Asymptotic tail coefficients: Bernoulli numbers B_2..B_16 over their
// expansion denominators.
const PSI_TAIL: [f64; 7] = [
    -1.0 / 12.0,
    1.0 / 120.0,
    -1.0 / 252.0,
    1.0 / 240.0,
    -1.0 / 132.0,
    691.0 / 32760.0,
    -1.0 / 12.0,
];

/// Digamma ψ(x) for `x > 0`, by upward recurrence into the asymptotic
/// regime; accurate to better than 1e-12 relative there.
pub fn digamma(x: f64) -> Result<f64> {
    if !(x > 0.0) {
        return Err(Error::domain(format!("digamma requires x > 0, got {x}")));
    }
    let mut x = x;
    let mut acc = 0.0;
    while x < 10.0 {
        acc -= 1.0 / x;
        x += 1.0;
    }
    let inv2 = 1.0 / (x * x);
    let mut tail = 0.0;
    let mut pow = inv2;
    for c in PSI_TAIL {
        tail += c * pow;
        pow *= inv2;
    }
    Ok(acc + x.ln() - 0.5 / x + tail)
}

const PSI1_TAIL: [f64; 7] = [
    1.0 / 6.0,
    -1.0 / 30.0,
    1.0 / 42.0,
    -1.0 / 30.0,
    5.0 / 66.0,
    -691.0 / 2730.0,
    7.0 / 6.0,
];

/// Trigamma ψ′(x) for `x > 0`.
pub fn trigamma(x: f64) -> Result<f64> {
    if !(x > 0.0) {
        return Err(Error::domain(format!("trigamma requires x > 0, got {x}")));
    }
    let mut x = x;
    let mut acc = 0.0;
    while x < 10.0 {
        acc += 1.0 / (x * x);
        x += 1.0;
    }
    let inv2 = 1.0 / (x * x);
    let mut tail = 0.0;
    let mut pow = inv2 / x; // 1/x^3
    for c in PSI1_TAIL {
        tail += c * pow;
        pow *= inv2;
    }
    Ok(acc + 1.0 / x + 0.5 * inv2 + tail)
}

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * statrs::function::erf::erfc(-x / std::f64::consts::SQRT_2)
}
