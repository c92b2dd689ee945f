//! Python bindings for the half-space log-gamma polymer laboratory.
//!
//! Exposes the seeded environments, log-scale partition functions, the
//! line ensemble, the closed-form kernels, and the exact limit samplers
//! so that desk analysis can be scripted from Python. Build with
//! `cargo build --release -p hslg-py` and import the produced cdylib as
//! `hslg_py` (see python/smoke_test.py).

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use hslg::ensemble::{hslg_line_ensemble, scaled_ensemble};
use hslg::env::{build_full_perturbed_env, build_half_env, symmetrize, EnvFullPerturbed, EnvHalfSpace};
use hslg::polymer;
use hslg::{limits, stats, RngState};

fn err<T>(r: hslg::Result<T>) -> PyResult<T> {
    r.map_err(|e| PyValueError::new_err(e.to_string()))
}

/// Seeded, stream-addressed random generator.
#[pyclass]
struct Rng {
    inner: RngState,
}

#[pymethods]
impl Rng {
    #[new]
    fn new(seed: u64, stream_id: u64) -> Self {
        Rng {
            inner: RngState::new(seed, stream_id),
        }
    }

    fn uniform(&mut self) -> f64 {
        self.inner.uniform()
    }

    fn inverse_gamma(&mut self, beta: f64) -> PyResult<f64> {
        err(self.inner.sample_inverse_gamma(beta))
    }

    fn log_gamma_variate(&mut self, beta: f64) -> PyResult<f64> {
        err(self.inner.sample_log_gamma(beta))
    }
}

/// Half-space octant environment with its partition functions.
#[pyclass]
struct HalfSpaceEnv {
    env: EnvHalfSpace,
}

#[pymethods]
impl HalfSpaceEnv {
    #[new]
    fn new(seed: u64, stream_id: u64, n_max: usize, theta: f64, alpha: f64) -> PyResult<Self> {
        let mut rng = RngState::new(seed, stream_id);
        Ok(HalfSpaceEnv {
            env: err(build_half_env(&mut rng, n_max, theta, alpha))?,
        })
    }

    fn log_w(&self, i: usize, j: usize) -> PyResult<f64> {
        err(self.env.log_w(i, j))
    }

    /// log Z(m, n) over octant paths.
    fn log_z(&self, m: usize, n: usize) -> PyResult<f64> {
        err(polymer::log_z_half(&self.env, m, n))
    }

    /// log Z_sym^(r)(m, n) under the symmetrized weights (r <= 3).
    fn log_z_sym(&self, r: usize, m: usize, n: usize) -> PyResult<f64> {
        let sym = symmetrize(&self.env);
        err(polymer::log_z_sym(&sym, r, m, n))
    }

    /// Curves of the line ensemble of size n (depth <= 3), as lists.
    fn line_ensemble(&self, n: usize, depth: usize) -> PyResult<Vec<Vec<f64>>> {
        let le = err(hslg_line_ensemble(&self.env, n, depth))?;
        let mut out = Vec::with_capacity(depth);
        for i in 1..=depth {
            let len = 2 * n - 2 * i + 2;
            let mut row = Vec::with_capacity(len);
            for j in 1..=len {
                row.push(err(le.value(i, j))?);
            }
            out.push(row);
        }
        Ok(out)
    }

    /// Scaled ensemble values: list of (curve, x, value) triples.
    fn scaled_curves(
        &self,
        n: usize,
        depth: usize,
        n_scale: usize,
        t: f64,
    ) -> PyResult<Vec<(usize, f64, f64)>> {
        let le = err(hslg_line_ensemble(&self.env, n, depth))?;
        let sc = err(scaled_ensemble(&le, n_scale, t))?;
        let mut out = Vec::new();
        for i in 1..=sc.depth() {
            let curve = err(sc.curve(i))?;
            for (x, y) in curve.xs().iter().zip(curve.ys()) {
                out.push((i, *x, *y));
            }
        }
        Ok(out)
    }

    /// Max |ln 2 + log Z_sym^(1) - log Z| over all octant points.
    fn sym_identity_discrepancy(&self) -> PyResult<f64> {
        let sym = symmetrize(&self.env);
        let table = err(polymer::OctantTable::new(&self.env))?;
        let mut dp = err(polymer::SymDp::new(sym, 1))?;
        let mut worst = 0.0f64;
        for p in 1..=self.env.n_max() {
            for q in 1..=p {
                let lhs = std::f64::consts::LN_2 + err(dp.query(p, q))?;
                let rhs = err(table.log_z(p, q))?;
                worst = worst.max((lhs - rhs).abs());
            }
        }
        Ok(worst)
    }
}

/// Full-quadrant environment with a perturbed first row.
#[pyclass]
struct FullPerturbedEnv {
    env: EnvFullPerturbed,
}

#[pymethods]
impl FullPerturbedEnv {
    #[new]
    fn new(
        seed: u64,
        stream_id: u64,
        m_max: usize,
        n_max: usize,
        theta: f64,
        alpha: f64,
    ) -> PyResult<Self> {
        let mut rng = RngState::new(seed, stream_id);
        Ok(FullPerturbedEnv {
            env: err(build_full_perturbed_env(&mut rng, m_max, n_max, theta, alpha))?,
        })
    }

    fn log_z(&self, m: usize, n: usize) -> PyResult<f64> {
        err(polymer::log_z_full_perturbed(&self.env, m, n))
    }

    fn log_z_from(&self, si: usize, sj: usize, m: usize, n: usize) -> PyResult<f64> {
        err(polymer::log_z_full_from(&self.env, (si, sj), (m, n)))
    }

    /// Exact first-row decomposition residual (machine precision).
    fn row_decomposition_discrepancy(&self, m: usize, n: usize) -> PyResult<f64> {
        err(polymer::verify_row_decomposition(&self.env, m, n))
    }
}

#[pyfunction]
fn log_sum_exp(values: Vec<f64>) -> PyResult<f64> {
    err(stats::log_sum_exp(&values))
}

#[pyfunction]
fn ess(log_weights: Vec<f64>) -> PyResult<f64> {
    err(stats::ess(&log_weights))
}

#[pyfunction]
fn digamma(x: f64) -> PyResult<f64> {
    err(stats::digamma(x))
}

#[pyfunction]
fn trigamma(x: f64) -> PyResult<f64> {
    err(stats::trigamma(x))
}

/// Two-sample KS statistic and asymptotic p-value.
#[pyfunction]
fn ks_two_sample(xs: Vec<f64>, ys: Vec<f64>) -> PyResult<(f64, f64)> {
    let crit = stats::ks_two_sample_critical(0.01, xs.len(), ys.len());
    let r = err(stats::ks_two_sample(&xs, &ys, None, None, crit))?;
    Ok((r.statistic, r.p_approx.unwrap_or(f64::NAN)))
}

#[pyfunction]
fn heat_kernel(t: f64, x: f64) -> PyResult<f64> {
    err(limits::heat_kernel(t, x))
}

#[pyfunction]
fn robin_kernel(t: f64, alpha: f64, x: f64, y: f64) -> PyResult<f64> {
    err(limits::robin_kernel(t, alpha, x, y))
}

#[pyfunction]
fn meander_start(x1: f64, y1: f64) -> PyResult<f64> {
    err(limits::meander_start(x1, y1))
}

#[pyfunction]
fn meander_transition(x1: f64, y1: f64, x2: f64, y2: f64) -> PyResult<f64> {
    err(limits::meander_transition(x1, y1, x2, y2))
}

/// Joint density of the positive-conditioned bridge at interior times.
#[pyfunction]
fn conditioned_bridge_density(a_left: f64, a: f64, xs: Vec<f64>, ys: Vec<f64>) -> PyResult<f64> {
    err(limits::lambda_plus_fdd_density(a_left, a, &xs, &ys))
}

/// Sample the positive-conditioned bridge on a grid from A to 0.
#[pyfunction]
#[pyo3(signature = (seed, stream_id, a_left, a, grid, diffusion = 1.0))]
fn sample_conditioned_bridge(
    seed: u64,
    stream_id: u64,
    a_left: f64,
    a: f64,
    grid: Vec<f64>,
    diffusion: f64,
) -> PyResult<Vec<f64>> {
    let mut rng = RngState::new(seed, stream_id);
    err(limits::sample_lambda_plus(&mut rng, a_left, a, &grid, diffusion))
}

/// Sample a non-intersecting pinned pair; returns (B1, B2).
#[pyfunction]
fn sample_pinned_pair(
    seed: u64,
    stream_id: u64,
    a_left: f64,
    a1: f64,
    a2: f64,
    grid: Vec<f64>,
) -> PyResult<(Vec<f64>, Vec<f64>)> {
    let mut rng = RngState::new(seed, stream_id);
    let pair = err(limits::sample_pbm2(&mut rng, a_left, a1, a2, &grid))?;
    Ok((pair.b1, pair.b2))
}

#[pyfunction]
fn bridge_min_tail(t_len: f64, m_depth: f64) -> f64 {
    limits::bridge_min_tail(t_len, m_depth)
}

#[pymodule]
fn hslg_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Rng>()?;
    m.add_class::<HalfSpaceEnv>()?;
    m.add_class::<FullPerturbedEnv>()?;
    m.add_function(wrap_pyfunction!(log_sum_exp, m)?)?;
    m.add_function(wrap_pyfunction!(ess, m)?)?;
    m.add_function(wrap_pyfunction!(digamma, m)?)?;
    m.add_function(wrap_pyfunction!(trigamma, m)?)?;
    m.add_function(wrap_pyfunction!(ks_two_sample, m)?)?;
    m.add_function(wrap_pyfunction!(heat_kernel, m)?)?;
    m.add_function(wrap_pyfunction!(robin_kernel, m)?)?;
    m.add_function(wrap_pyfunction!(meander_start, m)?)?;
    m.add_function(wrap_pyfunction!(meander_transition, m)?)?;
    m.add_function(wrap_pyfunction!(conditioned_bridge_density, m)?)?;
    m.add_function(wrap_pyfunction!(sample_conditioned_bridge, m)?)?;
    m.add_function(wrap_pyfunction!(sample_pinned_pair, m)?)?;
    m.add_function(wrap_pyfunction!(bridge_min_tail, m)?)?;
    Ok(())
}
