//! The HSLG line ensemble built from ratios of consecutive symmetrized
//! partition functions, its diffusively scaled form on the `1/sqrt(N)`
//! grid of nonpositive abscissae, and the 1:2:3 rescaling map.

use std::io::Write;

use crate::env::{symmetrize, EnvHalfSpace};
use crate::error::{Error, Result};
use crate::polymer::SymDp;

/// Discrete line ensemble: curve `i` is defined on `j = 1..=2n-2i+2`.
/// The multi-path dynamic program caps the curve index at 3.
#[derive(Clone, Debug)]
pub struct LineEnsemble {
    n: usize,
    curves: Vec<Vec<f64>>,
}

impl LineEnsemble {
    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of curves actually materialized (`<= min(n, 3)`).
    pub fn depth(&self) -> usize {
        self.curves.len()
    }

    /// `L_i(j)` with `1 <= i <= depth`, `1 <= j <= 2n - 2i + 2`.
    pub fn value(&self, i: usize, j: usize) -> Result<f64> {
        if i == 0 || i > self.curves.len() {
            return Err(Error::Range(format!("curve index {i} out of range")));
        }
        let row = &self.curves[i - 1];
        if j == 0 || j > row.len() {
            return Err(Error::Range(format!(
                "position {j} out of range for curve {i} (len {})",
                row.len()
            )));
        }
        Ok(row[j - 1])
    }

    /// CSV dump with header `i,j,value`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "i,j,value")?;
        for (i, row) in self.curves.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                writeln!(w, "{},{},{}", i + 1, j + 1, v)?;
            }
        }
        Ok(())
    }
}

/// Builds curves `1..=depth` of the HSLG line ensemble of size `n`:
/// `L_i(j) = ln 2 + log Z_sym^(i)(p,q) - log Z_sym^(i-1)(p,q)` with
/// `p = n + floor(j/2)`, `q = n - ceil(j/2) + 1`. The environment must
/// cover `p` up to `2n`.
pub fn hslg_line_ensemble(env: &EnvHalfSpace, n: usize, depth: usize) -> Result<LineEnsemble> {
    if n == 0 {
        return Err(Error::domain("ensemble size n must be at least 1"));
    }
    if depth == 0 || depth > n.min(3) {
        return Err(Error::Unsupported(format!(
            "curve depth must be in 1..=min(n,3), got {depth} at n={n}"
        )));
    }
    if env.n_max() < 2 * n {
        return Err(Error::domain(format!(
            "lattice too small: need n_max >= 2n = {}, got {}",
            2 * n,
            env.n_max()
        )));
    }
    let sym = symmetrize(env);
    // per-r prefix DPs, reused across all (p, q) queries
    let mut dps: Vec<SymDp> = (1..=depth)
        .map(|r| SymDp::new(sym, r))
        .collect::<Result<_>>()?;
    let mut curves = Vec::with_capacity(depth);
    for i in 1..=depth {
        let len = 2 * n - 2 * i + 2;
        let mut row = Vec::with_capacity(len);
        for j in 1..=len {
            let p = n + j / 2;
            let q = n - j.div_ceil(2) + 1;
            let hi = dps[i - 1].query(p, q)?;
            let lo = if i == 1 {
                0.0
            } else {
                dps[i - 2].query(p, q)?
            };
            row.push(std::f64::consts::LN_2 + hi - lo);
        }
        curves.push(row);
    }
    Ok(LineEnsemble { n, curves })
}

/// A continuous piecewise-linear curve over a sorted abscissa grid.
#[derive(Clone, Debug)]
pub struct PiecewiseLinear {
    xs: Vec<f64>,
    ys: Vec<f64>,
}

impl PiecewiseLinear {
    pub fn new(xs: Vec<f64>, ys: Vec<f64>) -> Result<Self> {
        if xs.len() != ys.len() || xs.is_empty() {
            return Err(Error::contract("grid and value lengths must match"));
        }
        if xs.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::contract("grid must be strictly increasing"));
        }
        Ok(PiecewiseLinear { xs, ys })
    }

    pub fn xs(&self) -> &[f64] {
        &self.xs
    }

    pub fn ys(&self) -> &[f64] {
        &self.ys
    }

    /// Linear interpolation; constant extension outside the grid.
    pub fn eval(&self, x: f64) -> f64 {
        let n = self.xs.len();
        if x <= self.xs[0] {
            return self.ys[0];
        }
        if x >= self.xs[n - 1] {
            return self.ys[n - 1];
        }
        let k = self.xs.partition_point(|&g| g <= x);
        let (x0, x1) = (self.xs[k - 1], self.xs[k]);
        let (y0, y1) = (self.ys[k - 1], self.ys[k]);
        y0 + (y1 - y0) * (x - x0) / (x1 - x0)
    }
}

/// Scaled HSLG line ensemble: curve `i` lives on the grid
/// `x = -k/sqrt(N)`, `k = 0..=2n-2i+1`, with
/// `H_i(x) = L_i(-x sqrt(N) + 1) + (2 floor(Nt/2) + i + 1 + odd(x sqrt N)) / 2 * ln N`.
#[derive(Clone, Debug)]
pub struct ScaledEnsemble {
    n_scale: usize,
    t: f64,
    curves: Vec<PiecewiseLinear>,
}

pub fn scaled_ensemble(ensemble: &LineEnsemble, n_scale: usize, t: f64) -> Result<ScaledEnsemble> {
    if !(t >= 1.0) {
        return Err(Error::contract(format!("need t >= 1, got {t}")));
    }
    let half = (n_scale as f64 * t / 2.0).floor() as usize;
    if ensemble.n() != half + 1 {
        return Err(Error::contract(format!(
            "ensemble size {} does not match floor(Nt/2)+1 = {}",
            ensemble.n(),
            half + 1
        )));
    }
    let sqrt_n = (n_scale as f64).sqrt();
    let log_n = (n_scale as f64).ln();
    let n = ensemble.n();
    let mut curves = Vec::with_capacity(ensemble.depth());
    for i in 1..=ensemble.depth() {
        let len = 2 * n - 2 * i + 2; // grid indices k = 0..len-1
        let mut xs = Vec::with_capacity(len);
        let mut ys = Vec::with_capacity(len);
        for k in (0..len).rev() {
            let parity = if k % 2 == 1 { 1.0 } else { 0.0 };
            let centering = (2.0 * half as f64 + i as f64 + 1.0 + parity) / 2.0 * log_n;
            xs.push(-(k as f64) / sqrt_n);
            ys.push(ensemble.value(i, k + 1)? + centering);
        }
        curves.push(PiecewiseLinear::new(xs, ys)?);
    }
    Ok(ScaledEnsemble {
        n_scale,
        t,
        curves,
    })
}

impl ScaledEnsemble {
    pub fn n_scale(&self) -> usize {
        self.n_scale
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn depth(&self) -> usize {
        self.curves.len()
    }

    pub fn curve(&self, i: usize) -> Result<&PiecewiseLinear> {
        self.curves
            .get(i - 1)
            .ok_or_else(|| Error::Range(format!("curve index {i} out of range")))
    }

    /// `H_i(x, t)` by linear interpolation.
    pub fn eval(&self, i: usize, x: f64) -> Result<f64> {
        Ok(self.curve(i)?.eval(x))
    }

    /// CSV dump with header `i,x,value`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "i,x,value")?;
        for (i, c) in self.curves.iter().enumerate() {
            for (x, y) in c.xs().iter().zip(c.ys()) {
                writeln!(w, "{},{},{}", i + 1, x, y)?;
            }
        }
        Ok(())
    }
}

/// 1:2:3 rescaling of a curve: `x -> (curve(x t^{2/3}) + t/24) / t^{1/3}`.
pub fn rescale_123(curve: &PiecewiseLinear, t: f64) -> PiecewiseLinear {
    let space = t.powf(2.0 / 3.0);
    let height = t.powf(1.0 / 3.0);
    let xs: Vec<f64> = curve.xs().iter().map(|&x| x / space).collect();
    let ys: Vec<f64> = curve.ys().iter().map(|&y| (y + t / 24.0) / height).collect();
    PiecewiseLinear { xs, ys }
}

/// Inverse of [`rescale_123`]: `x -> curve(x t^{-2/3}) t^{1/3} - t/24`.
pub fn rescale_123_inverse(curve: &PiecewiseLinear, t: f64) -> PiecewiseLinear {
    let space = t.powf(2.0 / 3.0);
    let height = t.powf(1.0 / 3.0);
    let xs: Vec<f64> = curve.xs().iter().map(|&x| x * space).collect();
    let ys: Vec<f64> = curve.ys().iter().map(|&y| y * height - t / 24.0).collect();
    PiecewiseLinear { xs, ys }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::enumerate;
    use crate::env::build_half_env;
    use crate::polymer::OctantTable;
    use crate::RngState;
    use approx::assert_abs_diff_eq;

    fn env(seed: u64, n_max: usize) -> EnvHalfSpace {
        let mut rng = RngState::new(seed, 0);
        build_half_env(&mut rng, n_max, 2.0, 0.5).unwrap()
    }

    // Odd positions of the top curve are exactly log Z along the
    // antidiagonal, by the symmetrization identity.
    #[test]
    fn top_curve_odd_positions_are_free_energy() {
        let n = 4;
        let e = env(7, 2 * n);
        let le = hslg_line_ensemble(&e, n, 1).unwrap();
        let table = OctantTable::new(&e).unwrap();
        for j in 1..=n {
            let lhs = le.value(1, 2 * j - 1).unwrap();
            let rhs = table.log_z(n + j - 1, n - j + 1).unwrap();
            assert_abs_diff_eq!(lhs, rhs, epsilon = 1e-10);
        }
        // j = 1 specialization: L_1(1) = log Z(n, n)
        assert_abs_diff_eq!(
            le.value(1, 1).unwrap(),
            table.log_z(n, n).unwrap(),
            epsilon = 1e-10
        );
    }

    #[test]
    fn second_curve_matches_enumerated_ratio() {
        let n = 3;
        let e = env(19, 2 * n);
        let sym = crate::env::symmetrize(&e);
        let le = hslg_line_ensemble(&e, n, 2).unwrap();
        for j in 1..=(2 * n - 2) {
            let p = n + j / 2;
            let q = n - j.div_ceil(2) + 1;
            let brute = std::f64::consts::LN_2
                + enumerate::log_z_sym_brute(&sym, 2, p, q).unwrap()
                - enumerate::log_z_sym_brute(&sym, 1, p, q).unwrap();
            assert_abs_diff_eq!(le.value(2, j).unwrap(), brute, epsilon = 1e-10);
        }
    }

    #[test]
    fn ensemble_lattice_too_small() {
        let e = env(3, 5);
        assert!(hslg_line_ensemble(&e, 3, 1).is_err());
    }

    #[test]
    fn scaled_centering_arithmetic() {
        // N = 4, t = 3: n = 7 and H_1(0) = L_1(1) + 7 log 4.
        let n = 7;
        let e = env(11, 2 * n);
        let le = hslg_line_ensemble(&e, n, 1).unwrap();
        let sc = scaled_ensemble(&le, 4, 3.0).unwrap();
        let want = le.value(1, 1).unwrap() + 7.0 * 4.0f64.ln();
        assert_abs_diff_eq!(sc.eval(1, 0.0).unwrap(), want, epsilon = 1e-12);
    }

    #[test]
    fn scaled_parity_centering_gap() {
        let n = 5;
        let e = env(13, 2 * n);
        let le = hslg_line_ensemble(&e, n, 1).unwrap();
        let sc = scaled_ensemble(&le, 4, 2.0).unwrap();
        let log_n = 4.0f64.ln();
        // centering difference between adjacent grid points is exactly
        // (1/2) log N on top of the raw ensemble difference
        let h0 = sc.eval(1, 0.0).unwrap();
        let h1 = sc.eval(1, -0.5).unwrap();
        let raw = le.value(1, 1).unwrap() - le.value(1, 2).unwrap();
        assert_abs_diff_eq!(h0 - h1, raw - 0.5 * log_n, epsilon = 1e-12);
    }

    #[test]
    fn scaled_contract_checks() {
        let n = 5;
        let e = env(13, 2 * n);
        let le = hslg_line_ensemble(&e, n, 1).unwrap();
        assert!(scaled_ensemble(&le, 4, 3.0).is_err()); // n mismatch
    }

    #[test]
    fn interpolation_midpoint_is_average() {
        let n = 5;
        let e = env(17, 2 * n);
        let le = hslg_line_ensemble(&e, n, 1).unwrap();
        let sc = scaled_ensemble(&le, 4, 2.0).unwrap();
        let mid = sc.eval(1, -0.25).unwrap();
        let avg = 0.5 * (sc.eval(1, 0.0).unwrap() + sc.eval(1, -0.5).unwrap());
        assert_abs_diff_eq!(mid, avg, epsilon = 1e-12);
    }

    #[test]
    fn rescale_identity_at_t1_shifts_by_one_24th() {
        let c = PiecewiseLinear::new(vec![-2.0, -1.0, 0.0], vec![0.5, 1.5, -0.25]).unwrap();
        let r = rescale_123(&c, 1.0);
        for (x, y) in c.xs().iter().zip(c.ys()) {
            assert_abs_diff_eq!(r.eval(*x), y + 1.0 / 24.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn rescale_constant_curve() {
        let t = 8.0;
        let c = PiecewiseLinear::new(vec![-1.0, 0.0], vec![3.0, 3.0]).unwrap();
        let r = rescale_123(&c, t);
        let want = (3.0 + t / 24.0) / t.powf(1.0 / 3.0);
        assert_abs_diff_eq!(r.eval(-0.3), want, epsilon = 1e-13);
    }

    #[test]
    fn rescale_composes_with_inverse() {
        let t = 5.0;
        let c = PiecewiseLinear::new(vec![-3.0, -1.2, 0.0], vec![0.1, -0.7, 2.0]).unwrap();
        let back = rescale_123_inverse(&rescale_123(&c, t), t);
        for (x, y) in c.xs().iter().zip(c.ys()) {
            assert_abs_diff_eq!(back.eval(*x), *y, epsilon = 1e-12);
        }
    }
}
