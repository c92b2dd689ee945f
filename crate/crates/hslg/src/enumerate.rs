//! Exhaustive path-enumeration reference implementations.
//!
//! These walk every admissible lattice path (or tuple of vertex-disjoint
//! paths) and accumulate weights in plain arithmetic, deliberately
//! avoiding the log-sum-exp recursions used by the production dynamic
//! programs. They are only viable on tiny lattices and exist so that
//! every partition-function routine can be checked against an
//! independent route.

use crate::env::{EnvFullPerturbed, EnvHalfSpace, SymWeights};
use crate::error::Result;

type Site = (usize, usize);

/// Every up-right path from `start` to `end` satisfying `admissible` at
/// each visited site.
fn collect_paths(
    start: Site,
    end: Site,
    admissible: &dyn Fn(Site) -> bool,
) -> Vec<Vec<Site>> {
    let mut out = Vec::new();
    if start.0 > end.0 || start.1 > end.1 || !admissible(start) {
        return out;
    }
    let mut prefix = vec![start];
    extend(&mut prefix, end, admissible, &mut out);
    out
}

fn extend(
    prefix: &mut Vec<Site>,
    end: Site,
    admissible: &dyn Fn(Site) -> bool,
    out: &mut Vec<Vec<Site>>,
) {
    let cur = *prefix.last().unwrap();
    if cur == end {
        out.push(prefix.clone());
        return;
    }
    for next in [(cur.0 + 1, cur.1), (cur.0, cur.1 + 1)] {
        if next.0 <= end.0 && next.1 <= end.1 && admissible(next) {
            prefix.push(next);
            extend(prefix, end, admissible, out);
            prefix.pop();
        }
    }
}

fn path_weight(path: &[Site], log_w: &dyn Fn(Site) -> f64) -> f64 {
    path.iter().map(|&s| log_w(s).exp()).product()
}

/// Octant paths `(1,1) -> (m,n)` confined to `{j <= i}`.
pub fn octant_paths(m: usize, n: usize) -> Vec<Vec<Site>> {
    collect_paths((1, 1), (m, n), &|(i, j)| j <= i)
}

/// log of the half-space partition function by exhaustive enumeration.
pub fn log_z_half_brute(env: &EnvHalfSpace, m: usize, n: usize) -> Result<f64> {
    let lookup = |s: Site| env.log_w(s.0, s.1).unwrap();
    let total: f64 = octant_paths(m, n)
        .iter()
        .map(|p| path_weight(p, &lookup))
        .sum();
    Ok(total.ln())
}

/// log of the full-quadrant perturbed partition function by enumeration.
pub fn log_z_full_brute(env: &EnvFullPerturbed, m: usize, n: usize) -> Result<f64> {
    let lookup = |s: Site| env.log_w(s.0, s.1).unwrap();
    let total: f64 = collect_paths((1, 1), (m, n), &|_| true)
        .iter()
        .map(|p| path_weight(p, &lookup))
        .sum();
    Ok(total.ln())
}

/// log of the restricted partition function from `start` to `end` in the
/// full quadrant, both endpoints' weights included.
pub fn log_z_full_from_brute(
    env: &EnvFullPerturbed,
    start: Site,
    end: Site,
) -> Result<f64> {
    let lookup = |s: Site| env.log_w(s.0, s.1).unwrap();
    let total: f64 = collect_paths(start, end, &|_| true)
        .iter()
        .map(|p| path_weight(p, &lookup))
        .sum();
    Ok(total.ln())
}

fn vertex_disjoint(paths: &[&Vec<Site>]) -> bool {
    let mut seen = std::collections::HashSet::new();
    for p in paths {
        for &s in p.iter() {
            if !seen.insert(s) {
                return false;
            }
        }
    }
    true
}

/// log of the multi-path symmetrized partition function by enumerating
/// all `r`-tuples of vertex-disjoint quadrant paths, path `l` running
/// `(1, r-l+1) -> (m, n-l+1)`.
pub fn log_z_sym_brute(sym: &SymWeights<'_>, r: usize, m: usize, n: usize) -> Result<f64> {
    if r == 0 {
        return Ok(0.0);
    }
    let lookup = |s: Site| sym.log_w(s.0, s.1).unwrap();
    let per_path: Vec<Vec<Vec<Site>>> = (1..=r)
        .map(|l| collect_paths((1, r - l + 1), (m, n - l + 1), &|_| true))
        .collect();
    let mut total = 0.0;
    let mut chosen: Vec<&Vec<Site>> = Vec::with_capacity(r);
    fn rec<'a>(
        level: usize,
        per_path: &'a [Vec<Vec<Site>>],
        chosen: &mut Vec<&'a Vec<Site>>,
        lookup: &dyn Fn(Site) -> f64,
        total: &mut f64,
    ) {
        if level == per_path.len() {
            if vertex_disjoint(chosen) {
                let w: f64 = chosen.iter().map(|p| path_weight(p, lookup)).product();
                *total += w;
            }
            return;
        }
        for p in &per_path[level] {
            chosen.push(p);
            // prune early: a tuple with a repeated vertex can never recover
            if vertex_disjoint(chosen) {
                rec(level + 1, per_path, chosen, lookup, total);
            }
            chosen.pop();
        }
    }
    rec(0, &per_path, &mut chosen, &lookup, &mut total);
    Ok(total.ln())
}
