//! Closed-form kernels and densities (heat, Robin, Brownian meander,
//! conditioned bridge) and exact samplers for the limiting objects of
//! the one-sided Gibbs measures: the positive-conditioned bridge, the
//! pinned pair built from its sum/difference representation, rejection
//! samplers for interlacing families, and the Monte Carlo drivers that
//! compare Gibbs-measure samples against these limits.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::gibbs::{metropolis_chain, Boundary, ContinuumGibbsSpec, MetropolisConfig};
use crate::quad;
use crate::rng::RngState;
use crate::stats::{ks_one_sample, ks_two_sample, ks_two_sample_critical, KsReport};

/// Standard heat kernel `p_t(x) = exp(-x^2/2t) / sqrt(2 pi t)`.
pub fn heat_kernel(t: f64, x: f64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::domain(format!("heat kernel needs t > 0, got {t}")));
    }
    Ok((-x * x / (2.0 * t)).exp() / (2.0 * std::f64::consts::PI * t).sqrt())
}

/// Robin heat kernel on the half line:
/// `p_t(x+y) + p_t(x-y) - 2(alpha - 1/2) int_0^inf p_t(x+y+z) e^{-(alpha-1/2)z} dz`,
/// the integral evaluated by adaptive quadrature truncated where the
/// integrand falls below 1e-16 of its peak.
pub fn robin_kernel(t: f64, alpha: f64, x: f64, y: f64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::domain(format!("robin kernel needs t > 0, got {t}")));
    }
    let c = alpha - 0.5;
    let base = heat_kernel(t, x + y)? + heat_kernel(t, x - y)?;
    if c == 0.0 {
        return Ok(base); // alpha = 1/2 degeneracy: the integral drops out
    }
    let w = x + y;
    let log_g = |z: f64| -(w + z) * (w + z) / (2.0 * t) - c * z;
    // peak of the integrand over z >= 0
    let z_peak = (-w - c * t).max(0.0);
    let peak = log_g(z_peak);
    // scan right from the peak until 1e-16 of the peak value
    let cutoff = peak + (1e-16f64).ln();
    let step = t.sqrt().max(1e-3);
    let mut z_hi = z_peak + step;
    while log_g(z_hi) > cutoff && z_hi < z_peak + 1e6 * step {
        z_hi += step;
    }
    let norm = (2.0 * std::f64::consts::PI * t).sqrt();
    let integral = quad::integrate(|z| (log_g(z)).exp() / norm, 0.0, z_hi, 1e-12);
    Ok(base - 2.0 * c * integral)
}

/// `Psi(x) = sqrt(2/pi) int_0^x e^{-u^2/2} du = erf(x / sqrt 2)`.
pub fn meander_psi(x: f64) -> f64 {
    statrs::function::erf::erf(x / std::f64::consts::SQRT_2)
}

/// Entrance density of the standard Brownian meander on [0, 1]:
/// `p(0,0; x1,y1) = sqrt(2 pi) (y1/x1) p_{x1}(y1) Psi(y1 / sqrt(1-x1))`.
pub fn meander_start(x1: f64, y1: f64) -> Result<f64> {
    if !(x1 > 0.0 && x1 <= 1.0) || !(y1 > 0.0) {
        return Err(Error::domain(format!(
            "meander start needs 0 < x1 <= 1, y1 > 0; got ({x1}, {y1})"
        )));
    }
    let psi = if x1 == 1.0 {
        1.0
    } else {
        meander_psi(y1 / (1.0 - x1).sqrt())
    };
    Ok((2.0 * std::f64::consts::PI).sqrt() * (y1 / x1) * heat_kernel(x1, y1)? * psi)
}

/// Transition density of the standard Brownian meander:
/// `[p_{dx}(y1-y2) - p_{dx}(y1+y2)] Psi(y2/sqrt(1-x2)) / Psi(y1/sqrt(1-x1))`.
pub fn meander_transition(x1: f64, y1: f64, x2: f64, y2: f64) -> Result<f64> {
    if !(x1 > 0.0 && x1 < x2 && x2 <= 1.0) || !(y1 > 0.0) || !(y2 > 0.0) {
        return Err(Error::domain(format!(
            "meander transition needs 0 < x1 < x2 <= 1 and positive heights; got ({x1},{y1},{x2},{y2})"
        )));
    }
    let dx = x2 - x1;
    let diff = heat_kernel(dx, y1 - y2)? - heat_kernel(dx, y1 + y2)?;
    let psi2 = if x2 == 1.0 {
        1.0
    } else {
        meander_psi(y2 / (1.0 - x2).sqrt())
    };
    Ok(diff * psi2 / meander_psi(y1 / (1.0 - x1).sqrt()))
}

/// Joint density of the positive-conditioned bridge from `a` (at `A`)
/// to 0 (at 0), evaluated at interior times `A < x_1 < ... < x_k < 0`:
/// `(A/x_k)(y_k/a)(p_{-x_k}(y_k)/p_{-A}(a)) prod_i [p_{d_i}(y_i - y_{i-1}) - p_{d_i}(y_i + y_{i-1})]`.
pub fn lambda_plus_fdd_density(a_left: f64, a: f64, xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.is_empty() || xs.len() != ys.len() {
        return Err(Error::contract("xs and ys must be nonempty, same length"));
    }
    if !(a_left < 0.0) || !(a > 0.0) {
        return Err(Error::domain("need A < 0 and a > 0"));
    }
    let mut prev_x = a_left;
    for &x in xs {
        if !(x > prev_x) || !(x < 0.0) {
            return Err(Error::domain("xs must satisfy A < x_1 < ... < x_k < 0"));
        }
        prev_x = x;
    }
    if ys.iter().any(|&y| y < 0.0) {
        return Ok(0.0);
    }
    let k = xs.len();
    let xk = xs[k - 1];
    let yk = ys[k - 1];
    let mut density = (a_left / xk) * (yk / a) * heat_kernel(-xk, yk)? / heat_kernel(-a_left, a)?;
    let mut y_prev = a;
    let mut x_prev = a_left;
    for i in 0..k {
        let d = xs[i] - x_prev;
        density *= heat_kernel(d, ys[i] - y_prev)? - heat_kernel(d, ys[i] + y_prev)?;
        x_prev = xs[i];
        y_prev = ys[i];
    }
    Ok(density)
}

/// Space-time harmonic function of the conditioned bridge:
/// `h(x, y) = y p_{-x}(y) / (-x)` for `x < 0`.
fn h_transform(x: f64, y: f64) -> f64 {
    if y <= 0.0 {
        return 0.0;
    }
    y * (-y * y / (-2.0 * x)).exp() / ((2.0 * std::f64::consts::PI * (-x)).sqrt() * (-x))
}

/// One-step transition density of the conditioned bridge:
/// `q(x,y; x',y') = [p_d(y'-y) - p_d(y'+y)] h(x',y')/h(x,y)`.
pub fn lambda_plus_step_density(x: f64, y: f64, x2: f64, y2: f64) -> Result<f64> {
    if !(x < x2 && x2 < 0.0) || !(y > 0.0) {
        return Err(Error::domain("need x < x' < 0 and y > 0"));
    }
    if y2 <= 0.0 {
        return Ok(0.0);
    }
    let d = x2 - x;
    let diff = heat_kernel(d, y2 - y)? - heat_kernel(d, y2 + y)?;
    Ok(diff * h_transform(x2, y2) / h_transform(x, y))
}

/// Unnormalized log of the one-step kernel, in the stable form used by
/// the inverse-CDF sampler (constants in `y` dropped).
fn step_log_density(x: f64, y: f64, x2: f64, y2: f64) -> f64 {
    if y2 <= 0.0 {
        return f64::NEG_INFINITY;
    }
    let d = x2 - x;
    let gauss = -(y2 - y) * (y2 - y) / (2.0 * d);
    // p_d(y'-y) - p_d(y'+y) = p_d(y'-y) (1 - e^{-2 y y'/d})
    let mix = (-(-2.0 * y * y2 / d).exp()).ln_1p();
    gauss + mix + y2.ln() - y2 * y2 / (-2.0 * x2)
}

/// Exact marginal CDF of the conditioned bridge at one interior time,
/// built once by cumulative quadrature of the k = 1 joint density.
pub struct LambdaPlusMarginal {
    ys: Vec<f64>,
    cdf: Vec<f64>,
}

impl LambdaPlusMarginal {
    pub fn new(a_left: f64, a: f64, x: f64, diffusion: f64) -> Result<Self> {
        if !(diffusion > 0.0) {
            return Err(Error::domain("diffusion coefficient must be positive"));
        }
        let root = diffusion.sqrt();
        // diffusion-D marginal = sqrt(D) times the diffusion-1 marginal
        // of the bridge started from a / sqrt(D)
        let a_std = a / root;
        let y_hi = (a_std + 8.0 * (-a_left).sqrt()).max(8.0 * (-a_left).sqrt());
        let n = 4096;
        let mut ys = Vec::with_capacity(n + 1);
        let mut pdf = Vec::with_capacity(n + 1);
        for i in 0..=n {
            let y = y_hi * i as f64 / n as f64;
            ys.push(y * root);
            let f = if y == 0.0 {
                0.0
            } else {
                lambda_plus_fdd_density(a_left, a_std, &[x], &[y])?
            };
            pdf.push(f);
        }
        let mut cdf = vec![0.0; n + 1];
        for i in 1..=n {
            cdf[i] = cdf[i - 1] + 0.5 * (pdf[i] + pdf[i - 1]) * (ys[i] - ys[i - 1]) / root;
        }
        let total = cdf[n];
        if !(total > 0.0) {
            return Err(Error::Numeric("degenerate marginal table".into()));
        }
        for v in cdf.iter_mut() {
            *v /= total;
        }
        Ok(LambdaPlusMarginal { ys, cdf })
    }

    pub fn cdf(&self, y: f64) -> f64 {
        if y <= self.ys[0] {
            return 0.0;
        }
        if y >= *self.ys.last().unwrap() {
            return 1.0;
        }
        let k = self.ys.partition_point(|&g| g <= y);
        let (y0, y1) = (self.ys[k - 1], self.ys[k]);
        let (c0, c1) = (self.cdf[k - 1], self.cdf[k]);
        c0 + (c1 - c0) * (y - y0) / (y1 - y0)
    }
}

/// Number of nodes in the per-step inverse-CDF grid.
const INV_CDF_NODES: usize = 2048;

/// Samples the positive-conditioned bridge from `a` at `A` to 0 at 0 on
/// the given strictly increasing grid (`grid[0] = A`, last point 0), by
/// sequential inverse-CDF draws from the one-step kernels. Grid points
/// within `1e-3 |A|` of 0 are filled by the terminal pinning.
pub fn sample_lambda_plus(
    rng: &mut RngState,
    a_left: f64,
    a: f64,
    grid: &[f64],
    diffusion: f64,
) -> Result<Vec<f64>> {
    if grid.len() < 2 || (grid[0] - a_left).abs() > 1e-12 || grid.last().unwrap().abs() > 1e-12 {
        return Err(Error::contract(
            "grid must run from A to 0 with at least two points",
        ));
    }
    if grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::contract("grid must be strictly increasing"));
    }
    if a < 0.0 {
        return Err(Error::domain("start must satisfy a >= 0"));
    }
    let root = diffusion.sqrt();
    // excursion convention: the a = 0 start is approximated from below
    let mut y = if a == 0.0 {
        1e-3 * (-a_left).sqrt()
    } else {
        a / root
    };
    let stop = -1e-3 * (-a_left); // pin everything to the right of this
    let mut out = Vec::with_capacity(grid.len());
    out.push(y * root);
    let mut x = a_left;
    for &x2 in &grid[1..] {
        if x2 >= stop {
            // terminal pinning: linear ramp of the last sampled value to 0
            let frac = if x >= 0.0 { 0.0 } else { x2 / x };
            out.push(y * root * frac.clamp(0.0, 1.0));
            continue;
        }
        let d = x2 - x;
        let sigma = d.sqrt();
        // bridge-contracted location of the next value
        let pulled = y * x2 / x;
        let lo = (y.min(pulled) - 8.0 * sigma).max(0.0);
        let hi = y.max(pulled) + 8.0 * sigma;
        let n = INV_CDF_NODES;
        let dy = (hi - lo) / n as f64;
        // cumulative trapezoid of the unnormalized step kernel
        let mut max_log = f64::NEG_INFINITY;
        let mut logs = Vec::with_capacity(n + 1);
        for i in 0..=n {
            let cand = lo + dy * i as f64;
            let lg = step_log_density(x, y, x2, cand);
            max_log = max_log.max(lg);
            logs.push(lg);
        }
        if max_log == f64::NEG_INFINITY {
            return Err(Error::Numeric(format!(
                "inverse-CDF bracket failure at x = {x2:.6} (y = {y:.6})"
            )));
        }
        let mut cum = vec![0.0f64; n + 1];
        for i in 1..=n {
            let f0 = (logs[i - 1] - max_log).exp();
            let f1 = (logs[i] - max_log).exp();
            cum[i] = cum[i - 1] + 0.5 * (f0 + f1) * dy;
        }
        let total = cum[n];
        if !(total > 0.0) {
            return Err(Error::Numeric(format!(
                "inverse-CDF normalization failure at x = {x2:.6}"
            )));
        }
        let target = rng.uniform() * total;
        let j = cum.partition_point(|&c| c < target).max(1);
        let c0 = cum[j - 1];
        let c1 = cum[j];
        let frac = if c1 > c0 { (target - c0) / (c1 - c0) } else { 0.5 };
        y = lo + dy * ((j - 1) as f64 + frac);
        y = y.max(1e-300);
        out.push(y * root);
        x = x2;
    }
    // final point is exactly 0 by pinning
    *out.last_mut().unwrap() = 0.0;
    Ok(out)
}

/// A non-intersecting pinned pair: `B1 >= B2` everywhere with
/// `B1(0) = B2(0)`, built as `((U + V)/2, (U - V)/2)` from a diffusion-2
/// Brownian motion `U` and an independent diffusion-2 conditioned
/// bridge `V`.
#[derive(Clone, Debug)]
pub struct PinnedBm2 {
    pub b1: Vec<f64>,
    pub b2: Vec<f64>,
}

pub fn sample_pbm2(
    rng: &mut RngState,
    a_left: f64,
    a1: f64,
    a2: f64,
    grid: &[f64],
) -> Result<PinnedBm2> {
    if !(a1 > a2) {
        return Err(Error::domain(format!("need a1 > a2, got {a1} <= {a2}")));
    }
    let v = sample_lambda_plus(rng, a_left, a1 - a2, grid, 2.0)?;
    let mut u = Vec::with_capacity(grid.len());
    u.push(a1 + a2);
    for w in grid.windows(2) {
        let d = w[1] - w[0];
        let prev = *u.last().unwrap();
        u.push(prev + (2.0 * d).sqrt() * rng.standard_normal());
    }
    let b1: Vec<f64> = u.iter().zip(&v).map(|(&uu, &vv)| 0.5 * (uu + vv)).collect();
    let b2: Vec<f64> = u.iter().zip(&v).map(|(&uu, &vv)| 0.5 * (uu - vv)).collect();
    Ok(PinnedBm2 { b1, b2 })
}

/// Interlacing family of `m` pinned pairs above a hard floor, by
/// rejection: draw independent pairs, accept when consecutive pairs
/// stay strictly ordered and the bottom curve clears the floor.
pub struct Mpbm {
    pub curves: Vec<Vec<f64>>,
    pub attempts: u64,
}

pub fn sample_mpbm(
    rng: &mut RngState,
    a_left: f64,
    starts: &[f64],
    floor: Option<&[f64]>,
    grid: &[f64],
    max_rejects: u64,
) -> Result<Mpbm> {
    if starts.len() < 2 || starts.len() % 2 != 0 {
        return Err(Error::domain("starts must list 2m ordered values"));
    }
    if starts.windows(2).any(|w| w[0] <= w[1]) {
        return Err(Error::domain("starts must be strictly decreasing"));
    }
    if let Some(f) = floor {
        if f.len() != grid.len() {
            return Err(Error::contract("floor must live on the grid"));
        }
        if f[0] >= starts[starts.len() - 1] {
            return Err(Error::domain("floor must start below the lowest curve"));
        }
    }
    let m = starts.len() / 2;
    let mut attempts = 0u64;
    loop {
        attempts += 1;
        if attempts > max_rejects {
            return Err(Error::SamplingFailure {
                attempts: attempts - 1,
                rate: 0.0,
            });
        }
        let mut curves = Vec::with_capacity(2 * m);
        for p in 0..m {
            let pair = sample_pbm2(rng, a_left, starts[2 * p], starts[2 * p + 1], grid)?;
            curves.push(pair.b1);
            curves.push(pair.b2);
        }
        let mut ok = true;
        'outer: for p in 0..m - 1 {
            let upper = &curves[2 * p + 1];
            let lower = &curves[2 * p + 2];
            for (u, l) in upper.iter().zip(lower) {
                if u <= l {
                    ok = false;
                    break 'outer;
                }
            }
        }
        if ok {
            if let Some(f) = floor {
                let bottom = &curves[2 * m - 1];
                // the floor constraint is on the open interval; the
                // pinned endpoint at 0 is exempt
                for i in 0..grid.len() - 1 {
                    if bottom[i] <= f[i] {
                        ok = false;
                        break;
                    }
                }
            }
        }
        if ok {
            return Ok(Mpbm { curves, attempts });
        }
    }
}

/// Critical-regime limit: independent Brownian motions with drifts
/// `(-1)^i mu`, conditioned (by rejection) on strict ordering above the
/// floor on the whole grid.
pub fn sample_critical_ni_bm(
    rng: &mut RngState,
    starts: &[f64],
    mu: f64,
    floor: Option<&[f64]>,
    grid: &[f64],
    max_rejects: u64,
) -> Result<Mpbm> {
    if starts.is_empty() || starts.windows(2).any(|w| w[0] <= w[1]) {
        return Err(Error::domain("starts must be strictly decreasing"));
    }
    if let Some(f) = floor {
        if f.len() != grid.len() {
            return Err(Error::contract("floor must live on the grid"));
        }
        if f[0] >= starts[starts.len() - 1] {
            return Err(Error::domain("floor must start below the lowest curve"));
        }
    }
    let mut attempts = 0u64;
    loop {
        attempts += 1;
        if attempts > max_rejects {
            return Err(Error::SamplingFailure {
                attempts: attempts - 1,
                rate: 0.0,
            });
        }
        let mut curves = Vec::with_capacity(starts.len());
        for (c, &a) in starts.iter().enumerate() {
            let drift = if (c + 1) % 2 == 0 { mu } else { -mu };
            let mut path = Vec::with_capacity(grid.len());
            path.push(a);
            for w in grid.windows(2) {
                let d = w[1] - w[0];
                let prev = *path.last().unwrap();
                path.push(prev + drift * d + d.sqrt() * rng.standard_normal());
            }
            curves.push(path);
        }
        let mut ok = true;
        'outer: for c in 0..curves.len() - 1 {
            for (u, l) in curves[c].iter().zip(&curves[c + 1]) {
                if u <= l {
                    ok = false;
                    break 'outer;
                }
            }
        }
        if ok {
            if let Some(f) = floor {
                let bottom = curves.last().unwrap();
                for (b, ff) in bottom.iter().zip(f) {
                    if b <= ff {
                        ok = false;
                        break;
                    }
                }
            }
        }
        if ok {
            return Ok(Mpbm { curves, attempts });
        }
    }
}

/// Reflection-principle tail of a 0-to-0 bridge of length `T`:
/// the probability of dipping below `-M` is `exp(-2 M^2 / T)`.
pub fn bridge_min_tail(t_len: f64, m_depth: f64) -> f64 {
    if m_depth <= 0.0 {
        return 1.0;
    }
    (-2.0 * m_depth * m_depth / t_len).exp()
}

/// Monte Carlo frequency of a discretized 0-to-0 bridge dipping below
/// `-M`, for checking [`bridge_min_tail`] at the stated grid size.
pub fn bridge_min_frequency(
    rng: &mut RngState,
    t_len: f64,
    m_depth: f64,
    grid: usize,
    samples: usize,
) -> f64 {
    let d = t_len / grid as f64;
    let sd = d.sqrt();
    let mut hits = 0usize;
    let mut path = vec![0.0f64; grid + 1];
    for _ in 0..samples {
        path[0] = 0.0;
        for i in 1..=grid {
            path[i] = path[i - 1] + sd * rng.standard_normal();
        }
        let last = path[grid];
        let mut min = f64::INFINITY;
        for (i, v) in path.iter().enumerate() {
            let pinned = v - last * i as f64 / grid as f64;
            min = min.min(pinned);
        }
        if min < -m_depth {
            hits += 1;
        }
    }
    hits as f64 / samples as f64
}

// ---------------------------------------------------------------------------
// Statistical verification drivers
// ---------------------------------------------------------------------------

/// Configuration of the soft-barrier diffusive-limit check.
#[derive(Clone, Debug, Serialize)]
pub struct WconvConfig {
    pub a_left: f64,
    pub a: f64,
    pub alpha: f64,
    pub l_list: Vec<f64>,
    pub grid: usize,
    pub samples: usize,
    pub thin: usize,
    pub burn_in: usize,
}

impl Default for WconvConfig {
    fn default() -> Self {
        WconvConfig {
            a_left: -1.0,
            a: 1.0,
            alpha: 1.0,
            l_list: vec![25.0, 100.0, 400.0],
            grid: 512,
            samples: 10_000,
            thin: 2,
            burn_in: 2_000,
        }
    }
}

/// Per-scale outcome of the soft-barrier limit check.
#[derive(Clone, Debug, Serialize)]
pub struct WconvOutcome {
    pub l_scale: f64,
    pub ks: KsReport,
    pub mean_b0: f64,
    pub acceptance: f64,
}

/// Samples the soft-barrier law at each scale in `l_list` by path-space
/// Metropolis and KS-compares the midpoint marginal against the exact
/// conditioned-bridge marginal. The KS statistics should decrease along
/// increasing `L`, and `B(0)` should concentrate near 0.
pub fn verify_wconv(rng: &RngState, cfg: &WconvConfig, level: f64) -> Result<Vec<WconvOutcome>> {
    if !(cfg.a > 0.0) {
        return Err(Error::domain("soft-barrier start must satisfy a > 0"));
    }
    let x_mid = cfg.a_left / 2.0;
    let marginal = LambdaPlusMarginal::new(cfg.a_left, cfg.a, x_mid, 1.0)?;
    let mut out = Vec::with_capacity(cfg.l_list.len());
    for (li, &l_scale) in cfg.l_list.iter().enumerate() {
        let spec = ContinuumGibbsSpec {
            l_scale,
            interval: (cfg.a_left, 0.0),
            k: 1,
            l: 1,
            alpha: Some(cfg.alpha),
            ceiling: Boundary::PosInf,
            floor: Boundary::Curve(vec![0.0; cfg.grid + 1]),
            boundary_left: vec![cfg.a],
            boundary_right: None,
            grid: cfg.grid,
        };
        let mcfg = MetropolisConfig {
            samples: cfg.samples,
            thin: cfg.thin,
            burn_in: cfg.burn_in,
            ..Default::default()
        };
        let mut rng_l = rng.substream(1000 + li as u64);
        let set = metropolis_chain(&mut rng_l, &spec, &mcfg)?;
        let mid_idx = cfg.grid / 2;
        let mids: Vec<f64> = set.samples.iter().map(|s| s[0][mid_idx]).collect();
        let b0s: Vec<f64> = set.samples.iter().map(|s| s[0][cfg.grid]).collect();
        let mean_b0 = b0s.iter().sum::<f64>() / b0s.len() as f64;
        let ks = ks_one_sample(&mids, |y| marginal.cdf(y), level)?;
        out.push(WconvOutcome {
            l_scale,
            ks,
            mean_b0,
            acceptance: set.acceptance.unwrap_or(0.0),
        });
    }
    Ok(out)
}

/// Which diffusive regime a multipath comparison runs in.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    Supercritical,
    Critical,
}

/// Configuration of the multipath-limit check.
#[derive(Clone, Debug, Serialize)]
pub struct MultipathConfig {
    pub regime: Regime,
    pub a_left: f64,
    pub starts: Vec<f64>,
    /// Fixed `alpha` in the supercritical regime; `mu` in the critical
    /// regime (where the folded drift is `mu / sqrt(L)`).
    pub drift: f64,
    pub l_scale: f64,
    pub grid: usize,
    /// Grid of the exact limit sampler. The sequential samplers are
    /// exact in law at their grid points, so this can be much coarser
    /// than the Metropolis grid; it must be even so the interval
    /// midpoint is a grid point.
    pub limit_grid: usize,
    pub samples: usize,
    pub thin: usize,
    pub burn_in: usize,
    pub max_rejects: u64,
}

/// Outcome of one multipath comparison at a fixed scale.
#[derive(Clone, Debug, Serialize)]
pub struct MultipathOutcome {
    pub regime: Regime,
    pub l_scale: f64,
    /// KS of the top-curve marginal at the interval midpoint.
    pub ks_top: KsReport,
    /// KS of the top gap `B1 - B2` at the interval midpoint.
    pub ks_gap: KsReport,
    /// Median of the terminal gap `B1(0) - B2(0)` under the Gibbs chain.
    pub median_terminal_gap: f64,
    /// Median terminal gap under the limit sampler.
    pub median_terminal_gap_limit: f64,
    pub limit_acceptance_rate: f64,
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Samples the scale-L one-sided Gibbs measure with `2m` curves by
/// Metropolis and the corresponding limit law (pinned pairs in the
/// supercritical regime, drifted non-intersecting motions in the
/// critical regime), then compares the top-curve marginal and the top
/// gap at the interval midpoint by two-sample KS at `level`.
pub fn verify_multipath_limit(
    rng: &RngState,
    cfg: &MultipathConfig,
    level: f64,
) -> Result<MultipathOutcome> {
    if cfg.starts.len() % 2 != 0 || cfg.starts.is_empty() {
        return Err(Error::domain("need 2m strictly ordered starts"));
    }
    let two_m = cfg.starts.len();
    let alpha = match cfg.regime {
        Regime::Supercritical => cfg.drift,
        Regime::Critical => cfg.drift / cfg.l_scale.sqrt(),
    };
    let spec = ContinuumGibbsSpec {
        l_scale: cfg.l_scale,
        interval: (cfg.a_left, 0.0),
        k: 1,
        l: two_m,
        alpha: Some(alpha),
        ceiling: Boundary::PosInf,
        floor: Boundary::NegInf,
        boundary_left: cfg.starts.clone(),
        boundary_right: None,
        grid: cfg.grid,
    };
    let mcfg = MetropolisConfig {
        samples: cfg.samples,
        thin: cfg.thin,
        burn_in: cfg.burn_in,
        ..Default::default()
    };
    let mut rng_chain = rng.substream(1);
    let set = metropolis_chain(&mut rng_chain, &spec, &mcfg)?;
    let mid_idx = cfg.grid / 2;
    let top_chain: Vec<f64> = set.samples.iter().map(|s| s[0][mid_idx]).collect();
    let gap_chain: Vec<f64> = set
        .samples
        .iter()
        .map(|s| s[0][mid_idx] - s[1][mid_idx])
        .collect();
    let mut term_gap_chain: Vec<f64> = set
        .samples
        .iter()
        .map(|s| s[0][cfg.grid] - s[1][cfg.grid])
        .collect();

    // limit sampler on its own (coarse) grid; exact in law there
    if cfg.limit_grid % 2 != 0 || cfg.limit_grid < 2 {
        return Err(Error::contract("limit_grid must be even and >= 2"));
    }
    let lg = cfg.limit_grid;
    let xs: Vec<f64> = (0..=lg)
        .map(|i| cfg.a_left + (0.0 - cfg.a_left) * i as f64 / lg as f64)
        .collect();
    let lim_mid = lg / 2;
    let mut rng_limit = rng.substream(2);
    let mut top_limit = Vec::with_capacity(cfg.samples);
    let mut gap_limit = Vec::with_capacity(cfg.samples);
    let mut term_gap_limit = Vec::with_capacity(cfg.samples);
    let mut total_attempts = 0u64;
    for _ in 0..cfg.samples {
        let draw = match cfg.regime {
            Regime::Supercritical => {
                sample_mpbm(&mut rng_limit, cfg.a_left, &cfg.starts, None, &xs, cfg.max_rejects)?
            }
            Regime::Critical => sample_critical_ni_bm(
                &mut rng_limit,
                &cfg.starts,
                cfg.drift,
                None,
                &xs,
                cfg.max_rejects,
            )?,
        };
        total_attempts += draw.attempts;
        top_limit.push(draw.curves[0][lim_mid]);
        gap_limit.push(draw.curves[0][lim_mid] - draw.curves[1][lim_mid]);
        term_gap_limit.push(draw.curves[0][lg] - draw.curves[1][lg]);
    }
    let crit = ks_two_sample_critical(level, top_chain.len(), top_limit.len());
    let ks_top = ks_two_sample(&top_chain, &top_limit, None, None, crit)?;
    let ks_gap = ks_two_sample(&gap_chain, &gap_limit, None, None, crit)?;
    Ok(MultipathOutcome {
        regime: cfg.regime,
        l_scale: cfg.l_scale,
        ks_top,
        ks_gap,
        median_terminal_gap: median(&mut term_gap_chain),
        median_terminal_gap_limit: median(&mut term_gap_limit),
        limit_acceptance_rate: cfg.samples as f64 / total_attempts.max(1) as f64,
    })
}
