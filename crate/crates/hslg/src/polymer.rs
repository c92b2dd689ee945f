//! Exact per-realization partition functions, computed entirely in log
//! scale by log-sum-exp recursions: the half-space octant polymer, the
//! multi-path symmetrized quadrant polymer (column-transfer dynamic
//! program over strictly decreasing height tuples, `r <= 3`), and the
//! full-quadrant first-row-perturbed polymer with its exact row
//! decomposition and the Baik–Wang distributional pairing.

use std::collections::HashMap;

use crate::env::{
    build_full_perturbed_env, build_half_env, EnvFullPerturbed, EnvHalfSpace, SymWeights,
};
use crate::error::{Error, Result};
use crate::rng::RngState;
use crate::stats::{log_add_exp, log_sum_exp};

/// log Z(m, n): sum over up-right octant paths `(1,1) -> (m,n)` confined
/// to `{j <= i}` of the product of environment weights.
pub fn log_z_half(env: &EnvHalfSpace, m: usize, n: usize) -> Result<f64> {
    let table = OctantTable::new(env)?;
    table.log_z(m, n)
}

/// Full table of octant log partition values; build once when scanning
/// many endpoints.
pub struct OctantTable {
    n_max: usize,
    values: Vec<f64>,
}

impl OctantTable {
    pub fn new(env: &EnvHalfSpace) -> Result<Self> {
        let n_max = env.n_max();
        let mut values = vec![f64::NEG_INFINITY; n_max * (n_max + 1) / 2];
        let idx = |i: usize, j: usize| (i - 1) * i / 2 + (j - 1);
        for i in 1..=n_max {
            for j in 1..=i {
                let w = env.log_w(i, j)?;
                let z = if i == 1 && j == 1 {
                    w
                } else {
                    let from_left = if i > j { values[idx(i - 1, j)] } else { f64::NEG_INFINITY };
                    let from_below = if j > 1 { values[idx(i, j - 1)] } else { f64::NEG_INFINITY };
                    w + log_add_exp(from_left, from_below)
                };
                values[idx(i, j)] = z;
            }
        }
        Ok(OctantTable { n_max, values })
    }

    pub fn log_z(&self, m: usize, n: usize) -> Result<f64> {
        if m == 0 || n == 0 || n > m || m > self.n_max {
            return Err(Error::domain(format!(
                "({m},{n}) is not an octant point of the lattice with n_max {}",
                self.n_max
            )));
        }
        Ok(self.values[(m - 1) * m / 2 + (n - 1)])
    }
}

/// Strictly decreasing height tuple; only the first `r` entries are used.
type State = [u16; 3];

/// Column-transfer dynamic program for `Z_sym^{(r)}`: the state after
/// column `x` is the tuple of heights at which the `r` vertex-disjoint
/// paths step rightward into column `x + 1`. Within a column each path
/// climbs from its entry height, and disjointness forces the run of
/// path `l+1` to end strictly below the entry of path `l`.
pub struct SymDp<'a> {
    sym: SymWeights<'a>,
    r: usize,
    /// Max height any path may occupy (ends are at most `n_max`).
    cap: usize,
    /// `entry[x]` = log-weight distribution over tuples entering column
    /// `x+1` (0-indexed: `entry[0]` is the starting tuple before column 1).
    entry: Vec<HashMap<State, f64>>,
}

impl<'a> SymDp<'a> {
    pub fn new(sym: SymWeights<'a>, r: usize) -> Result<Self> {
        if r == 0 || r > 3 {
            return Err(Error::Unsupported(format!(
                "column-transfer DP supports 1 <= r <= 3, got {r}"
            )));
        }
        let mut start: State = [0; 3];
        for l in 0..r {
            start[l] = (r - l) as u16;
        }
        let mut first = HashMap::new();
        first.insert(start, 0.0);
        Ok(SymDp {
            sym,
            r,
            cap: sym.n_max(),
            entry: vec![first],
        })
    }

    /// Enumerate exit tuples reachable from `e` within column `x`,
    /// accumulating column weights, and fold them into `out`.
    fn push_column(&self, x: usize, e: &State, base: f64, out: &mut HashMap<State, f64>) {
        let mut exit: State = [0; 3];
        self.climb(x, e, 0, base, &mut exit, out);
    }

    fn climb(
        &self,
        x: usize,
        e: &State,
        l: usize,
        acc: f64,
        exit: &mut State,
        out: &mut HashMap<State, f64>,
    ) {
        let r = self.r;
        if l == r {
            let slot = out.entry(*exit).or_insert(f64::NEG_INFINITY);
            *slot = log_add_exp(*slot, acc);
            return;
        }
        // path l climbs from e[l] to h; h bounded above by the cap and,
        // for l >= 1, strictly below the entry of the path above.
        let lo = e[l] as usize;
        let hi = if l == 0 {
            self.cap
        } else {
            (e[l - 1] as usize).saturating_sub(1).min(self.cap)
        };
        let mut w = acc;
        for h in lo..=hi {
            w += self.sym.log_w(x, h).unwrap();
            exit[l] = h as u16;
            self.climb(x, e, l + 1, w, exit, out);
        }
    }

    fn ensure_columns(&mut self, p: usize) {
        while self.entry.len() < p {
            let x = self.entry.len(); // about to process column x
            let prev = &self.entry[x - 1];
            let mut next: HashMap<State, f64> = HashMap::new();
            let prev_vec: Vec<(State, f64)> = prev.iter().map(|(s, w)| (*s, *w)).collect();
            for (e, base) in prev_vec {
                self.push_column(x, &e, base, &mut next);
            }
            self.entry.push(next);
        }
    }

    /// log Z_sym^{(r)}(p, q): absorb the entry distribution of column `p`
    /// into the forced endpoint heights `(q, q-1, ..., q-r+1)`.
    pub fn query(&mut self, p: usize, q: usize) -> Result<f64> {
        let r = self.r;
        if q < r {
            return Err(Error::domain(format!("need r <= n, got r={r}, n={q}")));
        }
        if p == 0 || p > self.sym.n_max() || q > self.sym.n_max() {
            return Err(Error::domain(format!(
                "({p},{q}) outside symmetrized lattice with n_max {}",
                self.sym.n_max()
            )));
        }
        self.ensure_columns(p);
        let mut acc = f64::NEG_INFINITY;
        for (e, base) in &self.entry[p - 1] {
            // paths above the bottom one must already sit at their
            // endpoint height when entering the final column
            let mut ok = true;
            for l in 0..r.saturating_sub(1) {
                if e[l] as usize != q - l {
                    ok = false;
                    break;
                }
            }
            let e_bot = e[r - 1] as usize;
            let end_bot = q - r + 1;
            if !ok || e_bot > end_bot {
                continue;
            }
            let mut w = *base;
            for l in 0..r - 1 {
                w += self.sym.log_w(p, q - l)?;
            }
            for y in e_bot..=end_bot {
                w += self.sym.log_w(p, y)?;
            }
            acc = log_add_exp(acc, w);
        }
        Ok(acc)
    }
}

/// log Z_sym^{(r)}(m, n) over `r`-tuples of vertex-disjoint up-right
/// quadrant paths under the symmetrized weights, with the convention
/// `Z_sym^{(0)} == 1`.
pub fn log_z_sym(sym: &SymWeights<'_>, r: usize, m: usize, n: usize) -> Result<f64> {
    if r == 0 {
        return Ok(0.0);
    }
    if r > 3 {
        return Err(Error::Unsupported(format!(
            "Z_sym^(r) capped at r <= 3, got {r}"
        )));
    }
    if n < r {
        return Err(Error::domain(format!("need r <= n, got r={r}, n={n}")));
    }
    SymDp::new(*sym, r)?.query(m, n)
}

/// log of the full-quadrant perturbed partition function.
pub fn log_z_full_perturbed(env: &EnvFullPerturbed, m: usize, n: usize) -> Result<f64> {
    log_z_full_from(env, (1, 1), (m, n))
}

/// log of the sum over up-right paths `start -> end` (both endpoint
/// weights included) in the full quadrant.
pub fn log_z_full_from(
    env: &EnvFullPerturbed,
    start: (usize, usize),
    end: (usize, usize),
) -> Result<f64> {
    let (si, sj) = start;
    let (m, n) = end;
    if si == 0 || sj == 0 {
        return Err(Error::domain("lattice sites are 1-based"));
    }
    if si > m || sj > n {
        return Err(Error::domain(format!(
            "start ({si},{sj}) must be componentwise <= end ({m},{n})"
        )));
    }
    if m > env.m_max() || n > env.n_max() {
        return Err(Error::domain(format!(
            "end ({m},{n}) outside {}x{} lattice",
            env.m_max(),
            env.n_max()
        )));
    }
    let w = n - sj + 1;
    let mut row = vec![f64::NEG_INFINITY; w];
    for i in si..=m {
        for jj in 0..w {
            let j = sj + jj;
            let up = row[jj]; // value from row i-1 at column j
            let left = if jj > 0 { row[jj - 1] } else { f64::NEG_INFINITY };
            row[jj] = if i == si && j == sj {
                env.log_w(i, j)?
            } else {
                env.log_w(i, j)? + log_add_exp(up, left)
            };
        }
    }
    Ok(row[w - 1])
}

/// Max absolute log discrepancy of the exact first-row decomposition
/// `Z(m,n) = sum_k (prod_{j<=k} W_{1,j}) Z((2,k) -> (m,n))`, which holds
/// pathwise on every realization. For `m = 1` the path never leaves the
/// first row and the discrepancy is 0 by convention.
pub fn verify_row_decomposition(env: &EnvFullPerturbed, m: usize, n: usize) -> Result<f64> {
    if m == 1 {
        return Ok(0.0);
    }
    let lhs = log_z_full_perturbed(env, m, n)?;
    let mut terms = Vec::with_capacity(n);
    let mut first_row_prefix = 0.0;
    for k in 1..=n {
        first_row_prefix += env.log_w(1, k)?;
        terms.push(first_row_prefix + log_z_full_from(env, (2, k), (m, n))?);
    }
    let rhs = log_sum_exp(&terms)?;
    Ok((lhs - rhs).abs())
}

/// One Monte Carlo replica of the Baik–Wang identity: draws an
/// independent perturbed full-space environment and an independent
/// half-space environment with the same `(theta, alpha)`, and returns
/// `(log Z_alpha^full(m,n), log sum_{r=m}^{m+n-1} Z(r, m+n-r))`. The two
/// coordinates are equal in distribution, not pathwise.
pub fn sample_bw_identity_pair(
    rng: &mut RngState,
    theta: f64,
    alpha: f64,
    m: usize,
    n: usize,
) -> Result<(f64, f64)> {
    if n > m {
        return Err(Error::domain(format!(
            "need m >= n so the antidiagonal stays in the octant, got m={m}, n={n}"
        )));
    }
    let full = build_full_perturbed_env(rng, m, n, theta, alpha)?;
    let left = log_z_full_perturbed(&full, m, n)?;
    let half = build_half_env(rng, m + n - 1, theta, alpha)?;
    let table = OctantTable::new(&half)?;
    let mut terms = Vec::with_capacity(n);
    for r in m..=(m + n - 1) {
        terms.push(table.log_z(r, m + n - r)?);
    }
    let right = log_sum_exp(&terms)?;
    Ok((left, right))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::enumerate;
    use crate::env::symmetrize;
    use approx::assert_abs_diff_eq;

    fn half_env(seed: u64, n_max: usize) -> EnvHalfSpace {
        let mut rng = RngState::new(seed, 0);
        build_half_env(&mut rng, n_max, 2.0, 0.5).unwrap()
    }

    fn full_env(seed: u64, m_max: usize, n_max: usize) -> EnvFullPerturbed {
        let mut rng = RngState::new(seed, 1);
        build_full_perturbed_env(&mut rng, m_max, n_max, 2.0, 0.5).unwrap()
    }

    #[test]
    fn single_site_partition() {
        let env = half_env(4, 3);
        assert_eq!(log_z_half(&env, 1, 1).unwrap(), env.log_w(1, 1).unwrap());
    }

    #[test]
    fn octant_dp_matches_enumeration() {
        let env = half_env(17, 4);
        for m in 1..=4 {
            for n in 1..=m {
                let dp = log_z_half(&env, m, n).unwrap();
                let brute = enumerate::log_z_half_brute(&env, m, n).unwrap();
                assert_abs_diff_eq!(dp, brute, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn octant_path_count_via_unit_weights() {
        // With all weights 1 the partition function counts paths.
        let mut env = half_env(1, 4);
        for i in 1..=4 {
            for j in 1..=i {
                let delta = -env.log_w(i, j).unwrap();
                env = env.with_bumped_weight(i, j, delta).unwrap();
            }
        }
        let count = enumerate::octant_paths(4, 4).len() as f64;
        assert_abs_diff_eq!(log_z_half(&env, 4, 4).unwrap(), count.ln(), epsilon = 1e-12);
    }

    #[test]
    fn octant_domain_errors() {
        let env = half_env(4, 3);
        assert!(log_z_half(&env, 2, 3).is_err()); // above diagonal
        assert!(log_z_half(&env, 4, 1).is_err()); // off lattice
        assert!(log_z_half(&env, 0, 0).is_err());
    }

    #[test]
    fn zsym_r0_is_log_one() {
        let env = half_env(9, 3);
        let sym = symmetrize(&env);
        assert_eq!(log_z_sym(&sym, 0, 2, 2).unwrap(), 0.0);
    }

    #[test]
    fn zsym_r_above_cap_unsupported() {
        let env = half_env(9, 6);
        let sym = symmetrize(&env);
        assert!(matches!(
            log_z_sym(&sym, 4, 5, 5),
            Err(Error::Unsupported(_))
        ));
        assert!(log_z_sym(&sym, 3, 3, 2).is_err()); // r > n
    }

    #[test]
    fn zsym_single_path_matches_brute() {
        let env = half_env(23, 5);
        let sym = symmetrize(&env);
        for m in 1..=5 {
            for n in 1..=5 {
                let dp = log_z_sym(&sym, 1, m, n).unwrap();
                let brute = enumerate::log_z_sym_brute(&sym, 1, m, n).unwrap();
                assert_abs_diff_eq!(dp, brute, epsilon = 1e-10);
            }
        }
    }

    // 2 Z_sym^(1)(p,q) = Z(p,q): exact, on every octant point.
    #[test]
    fn symmetrization_identity_exact() {
        let env = half_env(31, 8);
        let sym = symmetrize(&env);
        let table = OctantTable::new(&env).unwrap();
        let mut dp = SymDp::new(sym, 1).unwrap();
        for p in 1..=8 {
            for q in 1..=p {
                let lhs = std::f64::consts::LN_2 + dp.query(p, q).unwrap();
                let rhs = table.log_z(p, q).unwrap();
                assert_abs_diff_eq!(lhs, rhs, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn zsym_two_paths_matches_brute() {
        let env = half_env(47, 4);
        let sym = symmetrize(&env);
        for (m, n) in [(3, 3), (2, 2), (4, 3), (3, 2), (4, 4)] {
            let dp = log_z_sym(&sym, 2, m, n).unwrap();
            let brute = enumerate::log_z_sym_brute(&sym, 2, m, n).unwrap();
            assert_abs_diff_eq!(dp, brute, epsilon = 1e-10);
        }
    }

    #[test]
    fn zsym_three_paths_matches_brute() {
        let env = half_env(53, 4);
        let sym = symmetrize(&env);
        for (m, n) in [(3, 3), (4, 3), (4, 4)] {
            let dp = log_z_sym(&sym, 3, m, n).unwrap();
            let brute = enumerate::log_z_sym_brute(&sym, 3, m, n).unwrap();
            assert_abs_diff_eq!(dp, brute, epsilon = 1e-10);
        }
    }

    #[test]
    fn full_dp_matches_brute() {
        let env = full_env(61, 3, 3);
        let dp = log_z_full_perturbed(&env, 3, 3).unwrap();
        let brute = enumerate::log_z_full_brute(&env, 3, 3).unwrap();
        assert_abs_diff_eq!(dp, brute, epsilon = 1e-10);
        assert_eq!(
            log_z_full_perturbed(&env, 1, 1).unwrap(),
            env.log_w(1, 1).unwrap()
        );
    }

    #[test]
    fn full_unit_weights_binomial_count() {
        let mut rng = RngState::new(5, 0);
        let env = build_full_perturbed_env(&mut rng, 4, 5, 2.0, 0.5).unwrap();
        // neutralize weights through the generic start-end DP by checking
        // against enumeration with the actual weights instead; the pure
        // count identity is checked on the brute forcer itself.
        let dp = log_z_full_from(&env, (2, 2), (4, 4)).unwrap();
        let brute = enumerate::log_z_full_from_brute(&env, (2, 2), (4, 4)).unwrap();
        assert_abs_diff_eq!(dp, brute, epsilon = 1e-10);
    }

    #[test]
    fn full_from_degenerate_start() {
        let env = full_env(71, 3, 4);
        assert_eq!(
            log_z_full_from(&env, (2, 3), (2, 3)).unwrap(),
            env.log_w(2, 3).unwrap()
        );
        assert!(log_z_full_from(&env, (3, 2), (2, 3)).is_err());
    }

    #[test]
    fn row_decomposition_exact() {
        for seed in 0..20 {
            let env = full_env(100 + seed, 4, 4);
            let disc = verify_row_decomposition(&env, 4, 4).unwrap();
            assert!(disc < 1e-10, "seed {seed}: discrepancy {disc}");
        }
    }

    #[test]
    fn row_decomposition_single_row_convention() {
        let env = full_env(131, 3, 4);
        assert_eq!(verify_row_decomposition(&env, 1, 4).unwrap(), 0.0);
    }

    #[test]
    fn bw_pair_domain_check() {
        let mut rng = RngState::new(7, 0);
        assert!(sample_bw_identity_pair(&mut rng, 2.0, 0.5, 2, 3).is_err());
        let (a, b) = sample_bw_identity_pair(&mut rng, 2.0, 0.5, 4, 3).unwrap();
        assert!(a.is_finite() && b.is_finite());
    }

    // Raising one log weight strictly raises every partition value whose
    // admissible path set passes through that site.
    #[test]
    fn monotone_in_weights() {
        let env = half_env(83, 4);
        let bumped = env.with_bumped_weight(2, 2, 0.25).unwrap();
        let before = log_z_half(&env, 4, 3).unwrap();
        let after = log_z_half(&bumped, 4, 3).unwrap();
        assert!(after > before);
        // a site no octant path to (2,1) can use leaves the value unchanged
        let unaffected = log_z_half(&bumped, 2, 1).unwrap();
        assert_eq!(unaffected, log_z_half(&env, 2, 1).unwrap());
    }
}
