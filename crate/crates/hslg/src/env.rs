//! Polymer environments: lattices of independent inverse-gamma weights,
//! stored in natural-log scale from the moment they are drawn. Two
//! families exist: the half-space octant environment (diagonal weights
//! perturbed) and the full-quadrant environment with a perturbed first
//! row. Both are immutable after construction and safe to share
//! read-only across threads.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::rng::RngState;

/// Half-space environment on the octant `{(i,j) : 1 <= j <= i <= n_max}`.
/// Diagonal sites are drawn from inverse-gamma(alpha + theta), bulk
/// sites from inverse-gamma(2 theta).
#[derive(Clone, Debug, PartialEq)]
pub struct EnvHalfSpace {
    n_max: usize,
    theta: f64,
    alpha: f64,
    seed: u64,
    stream_id: u64,
    /// Row-major triangular storage: row i holds log weights for j = 1..=i.
    log_w: Vec<f64>,
}

fn check_params(theta: f64, alpha: f64) -> Result<()> {
    if !(theta > 0.0) {
        return Err(Error::domain(format!("theta must be positive, got {theta}")));
    }
    if !(alpha + theta > 0.0) {
        return Err(Error::domain(format!(
            "alpha + theta must be positive, got {alpha} + {theta}"
        )));
    }
    Ok(())
}

/// Fills the octant in row-major order so that the draw sequence, and
/// hence the environment, is a pure function of `(seed, stream_id)`.
pub fn build_half_env(
    rng: &mut RngState,
    n_max: usize,
    theta: f64,
    alpha: f64,
) -> Result<EnvHalfSpace> {
    if n_max == 0 {
        return Err(Error::domain("n_max must be at least 1"));
    }
    check_params(theta, alpha)?;
    let mut log_w = Vec::with_capacity(n_max * (n_max + 1) / 2);
    for i in 1..=n_max {
        for j in 1..=i {
            let beta = if i == j { alpha + theta } else { 2.0 * theta };
            log_w.push(rng.sample_log_inverse_gamma(beta)?);
        }
    }
    Ok(EnvHalfSpace {
        n_max,
        theta,
        alpha,
        seed: rng.seed(),
        stream_id: rng.stream_id(),
        log_w,
    })
}

impl EnvHalfSpace {
    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    fn index(&self, i: usize, j: usize) -> Result<usize> {
        if i == 0 || j == 0 || i > self.n_max || j > i {
            return Err(Error::Range(format!(
                "octant site ({i},{j}) outside lattice with n_max {}",
                self.n_max
            )));
        }
        Ok((i - 1) * i / 2 + (j - 1))
    }

    /// Natural-log weight at octant site `(i, j)`, `1 <= j <= i <= n_max`.
    pub fn log_w(&self, i: usize, j: usize) -> Result<f64> {
        Ok(self.log_w[self.index(i, j)?])
    }

    /// Test hook: perturb one site (used by the weight-monotonicity checks).
    pub fn with_bumped_weight(&self, i: usize, j: usize, delta: f64) -> Result<EnvHalfSpace> {
        let idx = self.index(i, j)?;
        let mut out = self.clone();
        out.log_w[idx] += delta;
        Ok(out)
    }

    /// Flat CSV dump with header `i,j,log_w`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "i,j,log_w")?;
        for i in 1..=self.n_max {
            for j in 1..=i {
                writeln!(w, "{},{},{}", i, j, self.log_w[(i - 1) * i / 2 + (j - 1)])?;
            }
        }
        Ok(())
    }

    /// Binary cache keyed by `(seed, stream_id, n_max, theta, alpha)`.
    pub fn save_cache(&self, path: &Path) -> Result<()> {
        let mut buf = Vec::with_capacity(48 + 8 * self.log_w.len());
        buf.extend_from_slice(b"HSLGENV1");
        buf.extend_from_slice(&self.seed.to_le_bytes());
        buf.extend_from_slice(&self.stream_id.to_le_bytes());
        buf.extend_from_slice(&(self.n_max as u64).to_le_bytes());
        buf.extend_from_slice(&self.theta.to_le_bytes());
        buf.extend_from_slice(&self.alpha.to_le_bytes());
        for v in &self.log_w {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        std::fs::write(path, buf).map_err(|e| Error::io(path.display().to_string(), e))
    }

    /// Loads a cache written by [`EnvHalfSpace::save_cache`], verifying
    /// that the key matches the requested parameters.
    pub fn load_cache(
        path: &Path,
        seed: u64,
        stream_id: u64,
        n_max: usize,
        theta: f64,
        alpha: f64,
    ) -> Result<EnvHalfSpace> {
        let mut file =
            std::fs::File::open(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        let mut buf = Vec::new();
        file.read_to_end(&mut buf)
            .map_err(|e| Error::io(path.display().to_string(), e))?;
        let expected_len = 48 + 8 * (n_max * (n_max + 1) / 2);
        if buf.len() != expected_len || &buf[..8] != b"HSLGENV1" {
            return Err(Error::Config(format!(
                "malformed environment cache {}",
                path.display()
            )));
        }
        let read_u64 = |off: usize| u64::from_le_bytes(buf[off..off + 8].try_into().unwrap());
        let read_f64 = |off: usize| f64::from_le_bytes(buf[off..off + 8].try_into().unwrap());
        if read_u64(8) != seed
            || read_u64(16) != stream_id
            || read_u64(24) != n_max as u64
            || read_f64(32) != theta
            || read_f64(40) != alpha
        {
            return Err(Error::Config(format!(
                "environment cache key mismatch in {}",
                path.display()
            )));
        }
        let log_w = buf[48..]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Ok(EnvHalfSpace {
            n_max,
            theta,
            alpha,
            seed,
            stream_id,
            log_w,
        })
    }
}

/// Full-quadrant environment with a perturbed first row: row 1 is drawn
/// from inverse-gamma(alpha + theta), rows i > 1 from inverse-gamma(2 theta).
#[derive(Clone, Debug, PartialEq)]
pub struct EnvFullPerturbed {
    m_max: usize,
    n_max: usize,
    theta: f64,
    alpha: f64,
    log_w: Vec<f64>,
}

pub fn build_full_perturbed_env(
    rng: &mut RngState,
    m_max: usize,
    n_max: usize,
    theta: f64,
    alpha: f64,
) -> Result<EnvFullPerturbed> {
    if m_max == 0 || n_max == 0 {
        return Err(Error::domain("lattice dimensions must be at least 1"));
    }
    check_params(theta, alpha)?;
    let mut log_w = Vec::with_capacity(m_max * n_max);
    for i in 1..=m_max {
        for _j in 1..=n_max {
            let beta = if i == 1 { alpha + theta } else { 2.0 * theta };
            log_w.push(rng.sample_log_inverse_gamma(beta)?);
        }
    }
    Ok(EnvFullPerturbed {
        m_max,
        n_max,
        theta,
        alpha,
        log_w,
    })
}

impl EnvFullPerturbed {
    pub fn m_max(&self) -> usize {
        self.m_max
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn log_w(&self, i: usize, j: usize) -> Result<f64> {
        if i == 0 || j == 0 || i > self.m_max || j > self.n_max {
            return Err(Error::Range(format!(
                "site ({i},{j}) outside {}x{} lattice",
                self.m_max, self.n_max
            )));
        }
        Ok(self.log_w[(i - 1) * self.n_max + (j - 1)])
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "i,j,log_w")?;
        for i in 1..=self.m_max {
            for j in 1..=self.n_max {
                writeln!(w, "{},{},{}", i, j, self.log_w[(i - 1) * self.n_max + (j - 1)])?;
            }
        }
        Ok(())
    }
}

/// Symmetrized full-quadrant lookup over a half-space environment:
/// half of the diagonal weight on the diagonal, mirrored octant values
/// elsewhere.
#[derive(Clone, Copy, Debug)]
pub struct SymWeights<'a> {
    env: &'a EnvHalfSpace,
}

/// `W~_{i,i} = W_{i,i}/2`, `W~_{i,j} = W_{j,i}` for `j > i`, `W~_{i,j} = W_{i,j}`
/// for `j < i` (all in log scale).
pub fn symmetrize(env: &EnvHalfSpace) -> SymWeights<'_> {
    SymWeights { env }
}

impl<'a> SymWeights<'a> {
    pub fn n_max(&self) -> usize {
        self.env.n_max()
    }

    pub fn log_w(&self, i: usize, j: usize) -> Result<f64> {
        if i == 0 || j == 0 || i > self.env.n_max() || j > self.env.n_max() {
            return Err(Error::Range(format!(
                "quadrant site ({i},{j}) outside symmetrized lattice with n_max {}",
                self.env.n_max()
            )));
        }
        if i == j {
            Ok(self.env.log_w(i, i)? - std::f64::consts::LN_2)
        } else if j > i {
            self.env.log_w(j, i)
        } else {
            self.env.log_w(i, j)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn single_site_env() {
        let mut rng = RngState::new(3, 0);
        let env = build_half_env(&mut rng, 1, 2.0, 0.5).unwrap();
        assert!(env.log_w(1, 1).unwrap().is_finite());
        assert!(env.log_w(1, 2).is_err());
        assert!(env.log_w(2, 1).is_err());
    }

    #[test]
    fn deterministic_given_seed() {
        let build = || {
            let mut rng = RngState::new(77, 5);
            build_half_env(&mut rng, 6, 2.0, 0.5).unwrap()
        };
        assert_eq!(build(), build());
    }

    #[test]
    fn full_env_deterministic() {
        let build = || {
            let mut rng = RngState::new(123, 9);
            build_full_perturbed_env(&mut rng, 4, 5, 2.0, 0.5).unwrap()
        };
        assert_eq!(build(), build());
    }

    #[test]
    fn invalid_params_rejected() {
        let mut rng = RngState::new(0, 0);
        assert!(build_half_env(&mut rng, 3, 2.0, -2.5).is_err());
        assert!(build_half_env(&mut rng, 0, 2.0, 0.5).is_err());
        assert!(build_full_perturbed_env(&mut rng, 3, 3, -1.0, 0.5).is_err());
    }

    // Off-diagonal sites are inverse-gamma(2 theta); the digamma value
    // -psi(4) at theta = 2 is the independent oracle for the mean log weight.
    #[test]
    fn off_diagonal_log_mean_matches_digamma() {
        let mut rng = RngState::new(2024, 1);
        let reps = 10_000;
        let mut sum = 0.0;
        for _ in 0..reps {
            let env = build_half_env(&mut rng, 6, 2.0, 0.5).unwrap();
            sum += env.log_w(5, 2).unwrap();
        }
        let mean = sum / reps as f64;
        let target = -crate::stats::digamma(4.0).unwrap();
        let se = (crate::stats::trigamma(4.0).unwrap() / reps as f64).sqrt();
        assert!(
            (mean - target).abs() < 4.0 * se,
            "mean {mean}, target {target}, se {se}"
        );
    }

    #[test]
    fn symmetrize_mirrors_and_halves() {
        let mut rng = RngState::new(11, 2);
        let env = build_half_env(&mut rng, 4, 2.0, 0.5).unwrap();
        let sym = symmetrize(&env);
        // W~_{2,3} = W_{3,2}
        assert_eq!(sym.log_w(2, 3).unwrap(), env.log_w(3, 2).unwrap());
        // log W~_{1,1} = log W_{1,1} - ln 2
        assert_abs_diff_eq!(
            sym.log_w(1, 1).unwrap(),
            env.log_w(1, 1).unwrap() - std::f64::consts::LN_2,
            epsilon = 1e-15
        );
        // symmetry by exhaustive scan
        for i in 1..=4 {
            for j in 1..=4 {
                assert_eq!(sym.log_w(i, j).unwrap(), sym.log_w(j, i).unwrap());
            }
        }
        assert!(sym.log_w(5, 1).is_err());
    }

    #[test]
    fn csv_roundtrip_shape() {
        let mut rng = RngState::new(8, 0);
        let env = build_half_env(&mut rng, 3, 2.0, 0.5).unwrap();
        let mut buf = Vec::new();
        env.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("i,j,log_w"));
        assert_eq!(lines.count(), 6);
    }

    #[test]
    fn binary_cache_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("env.bin");
        let mut rng = RngState::new(99, 4);
        let env = build_half_env(&mut rng, 5, 2.0, 0.5).unwrap();
        env.save_cache(&path).unwrap();
        let loaded = EnvHalfSpace::load_cache(&path, 99, 4, 5, 2.0, 0.5).unwrap();
        assert_eq!(env, loaded);
        // key mismatch rejected
        assert!(EnvHalfSpace::load_cache(&path, 99, 5, 5, 2.0, 0.5).is_err());
    }

    // alpha = theta makes the perturbed first row distributionally equal
    // to the bulk; a KS test across the two samplers should pass.
    #[test]
    fn alpha_equals_theta_first_row_indistinguishable() {
        let mut rng = RngState::new(31415, 0);
        let n = 10_000;
        let mut first_row = Vec::with_capacity(n);
        let mut bulk = Vec::with_capacity(n);
        for _ in 0..n {
            let env = build_full_perturbed_env(&mut rng, 2, 1, 2.0, 2.0).unwrap();
            first_row.push(env.log_w(1, 1).unwrap());
            bulk.push(env.log_w(2, 1).unwrap());
        }
        let crit = crate::stats::ks_two_sample_critical(0.01, n, n);
        let report = crate::stats::ks_two_sample(&first_row, &bulk, None, None, crit).unwrap();
        assert!(report.passed(), "KS statistic {}", report.statistic);
    }
}
