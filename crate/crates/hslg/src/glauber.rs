//! Coupled Glauber dynamics for the discretized soft-barrier laws.
//!
//! The state space is simple random walk paths `S : [A_N, 0] -> Z` with
//! `S(A_N)` pinned and `|S(k+1) - S(k)| = 1`, reweighed by
//! `exp(-beta ((S(0)/sqrt(N) + eps) v 0) - (L/N) sum_{k<0} e^{-sqrt(L)(S(k)/sqrt(N) + kappa)})`.
//! Two chains driven by the same `(site, direction, uniform)` stream
//! stay ordered whenever their parameters are ordered in one of the
//! three monotonicity cases (start point, beta, kappa).

use crate::error::{Error, Result};
use crate::rng::RngState;

/// Parameters of one discretized soft-barrier law.
#[derive(Clone, Debug, PartialEq)]
pub struct SoftBarrierSpec {
    pub beta: f64,
    pub l_scale: f64,
    /// Truncation shift of the boundary term; `f64::INFINITY` selects
    /// the untruncated weight `exp(-beta S(0)/sqrt N - ...)`.
    pub epsilon: f64,
    pub kappa: f64,
    /// Starting value (continuum units) at the left edge.
    pub start: f64,
    /// Left edge of the interval, `A < 0`.
    pub interval_a: f64,
    /// Diffusion coefficient of the continuum law this discretizes.
    pub diffusion: f64,
    /// Random-walk discretization scale (grid step `1/N` in space-time,
    /// path values on `Z/sqrt(N)`).
    pub n_grid: usize,
}

impl SoftBarrierSpec {
    pub fn new(beta: f64, l_scale: f64, start: f64, interval_a: f64, n_grid: usize) -> Result<Self> {
        if !(interval_a < 0.0) {
            return Err(Error::domain("interval must have A < 0"));
        }
        if !(beta >= 0.0) || !(l_scale > 0.0) {
            return Err(Error::domain("need beta >= 0 and L > 0"));
        }
        Ok(SoftBarrierSpec {
            beta,
            l_scale,
            epsilon: f64::INFINITY,
            kappa: 0.0,
            start,
            interval_a,
            diffusion: 1.0,
            n_grid,
        })
    }
}

/// Which of the three monotonicity cases a spec pair falls into.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CouplingCase {
    /// Starts ordered `a1 >= a2`, everything else equal: the claim is
    /// the two-sided sandwich `S1 >= S2 >= S1 - (a1 - a2)`.
    Start,
    /// `beta1 <= beta2`, everything else equal: `S1 >= S2`.
    Beta,
    /// `kappa1 <= kappa2`, everything else equal: `S1 >= S2`.
    Kappa,
}

fn classify(spec1: &SoftBarrierSpec, spec2: &SoftBarrierSpec) -> Result<CouplingCase> {
    let same_shared = |a: &SoftBarrierSpec, b: &SoftBarrierSpec| {
        a.l_scale == b.l_scale
            && a.interval_a == b.interval_a
            && a.n_grid == b.n_grid
            && a.diffusion == b.diffusion
            && a.epsilon == b.epsilon
    };
    if !same_shared(spec1, spec2) {
        return Err(Error::contract(
            "coupled specs must share L, interval, grid, diffusion, and epsilon",
        ));
    }
    let start_differs = spec1.start != spec2.start;
    let beta_differs = spec1.beta != spec2.beta;
    let kappa_differs = spec1.kappa != spec2.kappa;
    match (start_differs, beta_differs, kappa_differs) {
        (true, false, false) if spec1.start >= spec2.start => Ok(CouplingCase::Start),
        (false, true, false) if spec1.beta <= spec2.beta => Ok(CouplingCase::Beta),
        (false, false, true) if spec1.kappa <= spec2.kappa => Ok(CouplingCase::Kappa),
        (false, false, false) => Ok(CouplingCase::Beta), // identical specs: trivially coupled
        _ => Err(Error::contract(
            "spec pair must differ in exactly one of start (a1 >= a2), beta (b1 <= b2), kappa (k1 <= k2)",
        )),
    }
}

struct Chain {
    /// Integer path values at grid sites `A_N ..= 0`.
    path: Vec<i64>,
    beta: f64,
    kappa: f64,
    epsilon: f64,
    l_scale: f64,
    n: f64,
}

impl Chain {
    /// Weight-exponent difference of flipping site index `idx` (which
    /// must not be the pinned left edge) by `2 sigma`, computed directly
    /// from the weight definition.
    fn flip_log_ratio(&self, idx: usize, sigma: i64) -> f64 {
        let len = self.path.len();
        let sqrt_n = self.n.sqrt();
        let old = self.path[idx] as f64 / sqrt_n;
        let new = (self.path[idx] + 2 * sigma) as f64 / sqrt_n;
        if idx == len - 1 {
            // boundary term only (the barrier sum runs over k < 0)
            let clip = |v: f64| {
                if self.epsilon.is_infinite() {
                    v
                } else {
                    (v + self.epsilon).max(0.0)
                }
            };
            -self.beta * (clip(new) - clip(old))
        } else {
            let sqrt_l = self.l_scale.sqrt();
            let coeff = self.l_scale / self.n;
            coeff * ((-sqrt_l * (old + self.kappa)).exp() - (-sqrt_l * (new + self.kappa)).exp())
        }
    }

    /// Whether flipping site `idx` by `2 sigma` keeps the path in the
    /// simple-random-walk state space.
    fn flip_valid(&self, idx: usize, sigma: i64) -> bool {
        let cand = self.path[idx] + 2 * sigma;
        if idx == 0 {
            return false; // pinned
        }
        if (cand - self.path[idx - 1]).abs() != 1 {
            return false;
        }
        if idx + 1 < self.path.len() && (cand - self.path[idx + 1]).abs() != 1 {
            return false;
        }
        true
    }
}

/// Result of a coupled run.
#[derive(Clone, Debug)]
pub struct CouplingReport {
    pub case: CouplingCase,
    pub steps: u64,
    /// Number of (step, site) pairs at which the claimed ordering failed.
    pub violations: u64,
    pub acceptance_rate: f64,
}

/// Runs the two coupled Glauber chains with shared site/direction/uniform
/// randomness for `steps` updates and counts ordering violations after
/// every update.
pub fn coupled_glauber_softbarrier(
    rng: &mut RngState,
    spec1: &SoftBarrierSpec,
    spec2: &SoftBarrierSpec,
    steps: u64,
) -> Result<CouplingReport> {
    let case = classify(spec1, spec2)?;
    let n = spec1.n_grid;
    let len = (-spec1.interval_a * n as f64).ceil() as usize + 1;
    if len < 3 {
        return Err(Error::domain("grid too coarse for Glauber dynamics"));
    }
    let sqrt_n = (n as f64).sqrt();
    // integer starting heights; in the start case force an even gap so
    // the two state spaces are vertical translates of one another
    let a1 = (spec1.start * sqrt_n).floor() as i64;
    let a2 = match case {
        CouplingCase::Start => {
            let raw = (spec2.start * sqrt_n).floor() as i64;
            if (a1 - raw).rem_euclid(2) == 0 {
                raw
            } else {
                raw - 1
            }
        }
        _ => a1,
    };
    let gap = a1 - a2;

    // shared zigzag initial shape
    let zigzag: Vec<i64> = (0..len).map(|i| (i % 2) as i64).collect();
    let path1: Vec<i64> = zigzag.iter().map(|z| a1 + z).collect();
    let path2: Vec<i64> = zigzag.iter().map(|z| a2 + z).collect();

    let mk_chain = |spec: &SoftBarrierSpec, path: Vec<i64>| Chain {
        path,
        beta: spec.beta,
        kappa: spec.kappa,
        epsilon: spec.epsilon,
        l_scale: spec.l_scale,
        n: n as f64,
    };
    let mut c1 = mk_chain(spec1, path1);
    let mut c2 = mk_chain(spec2, path2);

    let mut violations = 0u64;
    let mut accepted = 0u64;
    for _ in 0..steps {
        // shared proposal: site in [1, len-1], direction, uniform
        let idx = 1 + rng.below((len - 1) as u64) as usize;
        let sigma: i64 = if rng.uniform() < 0.5 { 1 } else { -1 };
        let u = rng.uniform();
        let log_u = u.ln();
        for chain in [&mut c1, &mut c2] {
            if chain.flip_valid(idx, sigma) && chain.flip_log_ratio(idx, sigma) >= log_u {
                chain.path[idx] += 2 * sigma;
                accepted += 1;
            }
        }
        for i in 0..len {
            let v1 = c1.path[i];
            let v2 = c2.path[i];
            let violated = match case {
                CouplingCase::Start => v1 < v2 || v2 < v1 - gap,
                _ => v1 < v2,
            };
            if violated {
                violations += 1;
            }
        }
    }
    Ok(CouplingReport {
        case,
        steps,
        violations,
        acceptance_rate: accepted as f64 / (2 * steps).max(1) as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base_spec() -> SoftBarrierSpec {
        SoftBarrierSpec::new(2.0, 25.0, 1.0, -1.0, 40).unwrap()
    }

    #[test]
    fn identical_specs_identical_chains() {
        let spec = base_spec();
        let mut rng = RngState::new(10, 0);
        let report = coupled_glauber_softbarrier(&mut rng, &spec, &spec, 20_000).unwrap();
        assert_eq!(report.violations, 0);
        assert!(report.acceptance_rate > 0.0);
    }

    #[test]
    fn kappa_case_monotone() {
        let mut spec1 = base_spec();
        let mut spec2 = base_spec();
        spec1.epsilon = 0.25;
        spec2.epsilon = 0.25;
        spec1.kappa = 0.0;
        spec2.kappa = 0.5;
        let mut rng = RngState::new(11, 0);
        let report = coupled_glauber_softbarrier(&mut rng, &spec1, &spec2, 50_000).unwrap();
        assert_eq!(report.case, CouplingCase::Kappa);
        assert_eq!(report.violations, 0);
    }

    #[test]
    fn beta_case_monotone() {
        let spec1 = base_spec();
        let mut spec2 = base_spec();
        spec2.beta = 6.0;
        let mut rng = RngState::new(12, 0);
        let report = coupled_glauber_softbarrier(&mut rng, &spec1, &spec2, 50_000).unwrap();
        assert_eq!(report.case, CouplingCase::Beta);
        assert_eq!(report.violations, 0);
    }

    #[test]
    fn start_case_sandwich() {
        let spec1 = base_spec();
        let mut spec2 = base_spec();
        spec2.start = 0.25;
        let mut rng = RngState::new(13, 0);
        let report = coupled_glauber_softbarrier(&mut rng, &spec1, &spec2, 50_000).unwrap();
        assert_eq!(report.case, CouplingCase::Start);
        assert_eq!(report.violations, 0);
    }

    #[test]
    fn invalid_pairs_rejected() {
        let spec1 = base_spec();
        let mut spec2 = base_spec();
        spec2.beta = 6.0;
        spec2.kappa = 1.0; // differs in two fields
        let mut rng = RngState::new(14, 0);
        assert!(coupled_glauber_softbarrier(&mut rng, &spec1, &spec2, 10).is_err());
        // wrong-direction ordering
        let mut spec3 = base_spec();
        spec3.beta = 0.5;
        assert!(coupled_glauber_softbarrier(&mut rng, &spec1, &spec3, 10).is_err());
    }
}
