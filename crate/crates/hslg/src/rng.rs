//! Deterministic, splittable random-variate generation.
//!
//! Every stochastic routine in the crate draws from an [`RngState`]: a
//! counter-based ChaCha stream addressed by `(seed, stream_id)`. Fixing
//! that pair fixes the entire variate sequence, and distinct stream ids
//! give statistically independent streams, so replica loops can fan out
//! across threads without sharing mutable state.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};

use crate::error::{Error, Result};

/// A seeded, stream-addressed generator owned by exactly one worker.
#[derive(Clone, Debug)]
pub struct RngState {
    seed: u64,
    stream_id: u64,
    rng: ChaCha8Rng,
}

impl RngState {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream_id);
        RngState {
            seed,
            stream_id,
            rng,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// A fresh, independent stream derived from the same seed. Used to
    /// hand each replica its own generator.
    pub fn substream(&self, offset: u64) -> Self {
        RngState::new(self.seed, self.stream_id.wrapping_add(offset))
    }

    pub fn uniform(&mut self) -> f64 {
        self.rng.gen::<f64>()
    }

    /// Uniform element of `0..n`.
    pub fn below(&mut self, n: u64) -> u64 {
        self.rng.gen_range(0..n)
    }

    pub fn standard_normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.rng)
    }

    pub fn normal(&mut self, mean: f64, sd: f64) -> f64 {
        mean + sd * self.standard_normal()
    }

    /// Gamma(beta, 1) variate via Marsaglia–Tsang squeeze/accept on a
    /// transformed normal, with the `beta < 1` power boost.
    pub fn sample_gamma(&mut self, beta: f64) -> Result<f64> {
        if !(beta > 0.0) {
            return Err(Error::domain(format!(
                "gamma shape must be positive, got {beta}"
            )));
        }
        if beta == 1.0 {
            let e: f64 = Exp1.sample(&mut self.rng);
            return Ok(e);
        }
        let boost = if beta < 1.0 {
            // Gamma(b) = Gamma(b+1) * U^{1/b}
            let u: f64 = self.rng.gen_range(f64::MIN_POSITIVE..1.0);
            Some(u.powf(1.0 / beta))
        } else {
            None
        };
        let shape = if beta < 1.0 { beta + 1.0 } else { beta };
        let d = shape - 1.0 / 3.0;
        let c = 1.0 / (9.0 * d).sqrt();
        let sample = loop {
            let x: f64 = StandardNormal.sample(&mut self.rng);
            let v_cbrt = 1.0 + c * x;
            if v_cbrt <= 0.0 {
                continue;
            }
            let v = v_cbrt * v_cbrt * v_cbrt;
            let u: f64 = self.rng.gen_range(f64::MIN_POSITIVE..1.0);
            let x2 = x * x;
            if u < 1.0 - 0.0331 * x2 * x2 || u.ln() < 0.5 * x2 + d * (1.0 - v + v.ln()) {
                break d * v;
            }
        };
        Ok(match boost {
            Some(b) => sample * b,
            None => sample,
        })
    }

    /// Inverse-gamma(beta) variate: density `1_{x>0} Γ(beta)^{-1} x^{-beta-1} e^{-1/x}`,
    /// sampled as the reciprocal of a Gamma(beta, 1) variate.
    pub fn sample_inverse_gamma(&mut self, beta: f64) -> Result<f64> {
        Ok(1.0 / self.sample_gamma(beta)?)
    }

    /// Natural log of an inverse-gamma(beta) variate. Environments store
    /// weights in log scale, so this is the primitive they use.
    pub fn sample_log_inverse_gamma(&mut self, beta: f64) -> Result<f64> {
        Ok(-self.sample_gamma(beta)?.ln())
    }

    /// logGamma(beta) variate: `X` such that `e^X ~ Gamma(beta, 1)`.
    pub fn sample_log_gamma(&mut self, beta: f64) -> Result<f64> {
        Ok(self.sample_gamma(beta)?.ln())
    }
}
