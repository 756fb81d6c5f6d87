//! Distances between probability measures in five metrics.
//!
//! | metric | input | route |
//! |---|---|---|
//! | [`hellinger`] | grid densities | trapezoid of ½(√a−√b)² |
//! | [`total_variation`] | grid densities | trapezoid of ½\|a−b\| |
//! | [`kl_divergence`] | grid densities | trapezoid of a·log(a/b), +∞ on support escape |
//! | [`wasserstein_p`] | grid densities | 1D quantile formula (∫₀¹\|Qa−Qb\|ᵖ du)^(1/p) |
//! | [`prokhorov`] | atom measures | bisection over ε, Strassen feasibility by max-flow |
//!
//! Every fast route has an independent slow oracle: [`wasserstein_bruteforce`]
//! solves the transportation problem by basis enumeration (≤ 4 atoms a side)
//! or the explicit monotone merge, and [`prokhorov_bruteforce`] tests the
//! ball condition over all 2^k subsets of the supports. Closed forms for
//! Gaussian pairs ([`gaussian_hellinger`], [`gaussian_kl`]) back the
//! conjugate-posterior regression tests.

use thiserror::Error;

use crate::maxflow::FlowNetwork;
use crate::measures::{DiscreteMeasure, Gaussian1D, GridMeasure};

/// Default bisection width for the Prokhorov metric.
pub const DEFAULT_PROKHOROV_TOL: f64 = 1e-6;

/// Largest atom count accepted by the subset-enumeration Prokhorov oracle.
pub const PROKHOROV_BRUTEFORCE_MAX: usize = 15;

/// Largest atom count accepted by the transportation-problem oracle.
pub const WASSERSTEIN_BRUTEFORCE_MAX: usize = 7;

#[derive(Debug, Error)]
pub enum Error {
    #[error("measures live on different grids")]
    GridMismatch,
    #[error("{len} atoms exceed the brute-force limit of {max}")]
    TooLarge { len: usize, max: usize },
    #[error("wasserstein order must satisfy p >= 1, got {0}")]
    BadOrder(f64),
    #[error("bisection tolerance must be a positive finite number, got {0}")]
    BadTol(f64),
}

pub type Result<T> = std::result::Result<T, Error>;

fn check_same_grid(a: &GridMeasure, b: &GridMeasure) -> Result<()> {
    if a.grid() != b.grid() {
        return Err(Error::GridMismatch);
    }
    Ok(())
}

/// Hellinger distance sqrt(½∫(√a−√b)²) of two grid densities.
pub fn hellinger(a: &GridMeasure, b: &GridMeasure) -> Result<f64> {
    check_same_grid(a, b)?;
    let vals: Vec<f64> = a
        .density()
        .iter()
        .zip(b.density())
        .map(|(x, y)| {
            let d = x.sqrt() - y.sqrt();
            d * d
        })
        .collect();
    Ok((0.5 * a.grid().trapezoid(&vals)).max(0.0).sqrt().min(1.0))
}

/// Total variation distance ½∫|a−b| of two grid densities.
pub fn total_variation(a: &GridMeasure, b: &GridMeasure) -> Result<f64> {
    check_same_grid(a, b)?;
    let vals: Vec<f64> = a
        .density()
        .iter()
        .zip(b.density())
        .map(|(x, y)| (x - y).abs())
        .collect();
    Ok((0.5 * a.grid().trapezoid(&vals)).min(1.0))
}

/// Kullback–Leibler divergence ∫ a·log(a/b). Returns +∞ when `a` puts mass
/// where `b` vanishes; terms with a = 0 contribute nothing.
pub fn kl_divergence(a: &GridMeasure, b: &GridMeasure) -> Result<f64> {
    check_same_grid(a, b)?;
    let mut vals = Vec::with_capacity(a.density().len());
    for (&x, &y) in a.density().iter().zip(b.density()) {
        if x == 0.0 {
            vals.push(0.0);
        } else if y == 0.0 {
            return Ok(f64::INFINITY);
        } else {
            vals.push(x * (x / y).ln());
        }
    }
    Ok(a.grid().trapezoid(&vals))
}

/// Wasserstein-p distance of two grid densities via the one-dimensional
/// quantile representation, integrated by composite trapezoid on 4n+1
/// levels.
pub fn wasserstein_p(a: &GridMeasure, b: &GridMeasure, p: f64) -> Result<f64> {
    if !(p.is_finite() && p >= 1.0) {
        return Err(Error::BadOrder(p));
    }
    check_same_grid(a, b)?;
    let m = 4 * a.grid().n();
    let du = 1.0 / m as f64;
    let mut acc = 0.0;
    for j in 0..=m {
        let u = (j as f64 * du).min(1.0);
        let qa = a.quantile(u).expect("u in range");
        let qb = b.quantile(u).expect("u in range");
        let f = fpow((qa - qb).abs(), p);
        let w = if j == 0 || j == m { 0.5 } else { 1.0 };
        acc += w * f * du;
    }
    Ok(proot(acc, p))
}

/// x^p with exact fast paths at p = 1 and p = 2, so order-1 distances stay
/// bit-exact instead of round-tripping through `powf`.
fn fpow(x: f64, p: f64) -> f64 {
    if p == 1.0 {
        x
    } else if p == 2.0 {
        x * x
    } else {
        x.powf(p)
    }
}

fn proot(x: f64, p: f64) -> f64 {
    if p == 1.0 {
        x
    } else if p == 2.0 {
        x.sqrt()
    } else {
        x.powf(1.0 / p)
    }
}

/// Wasserstein-p distance of two atom measures, computed exactly from the
/// step quantile functions by merging the two cumulative-weight ladders.
pub fn wasserstein_discrete(a: &DiscreteMeasure, b: &DiscreteMeasure, p: f64) -> Result<f64> {
    if !(p.is_finite() && p >= 1.0) {
        return Err(Error::BadOrder(p));
    }
    let ca = cumulative(a.weights());
    let cb = cumulative(b.weights());
    let (xa, xb) = (a.locations(), b.locations());
    let mut cost = 0.0;
    let mut prev = 0.0;
    let (mut i, mut j) = (0usize, 0usize);
    while i < xa.len() && j < xb.len() {
        // The uncapped min keeps at least one advance guard true even when
        // rounding pushes a ladder's final entry a hair past 1; the cap is
        // applied to the mass bookkeeping only.
        let level = ca[i].min(cb[j]);
        let seg = (level.min(1.0) - prev).max(0.0);
        cost += seg * fpow((xa[i] - xb[j]).abs(), p);
        prev = level.min(1.0);
        if ca[i] <= level {
            i += 1;
        }
        if cb[j] <= level {
            j += 1;
        }
    }
    Ok(proot(cost, p))
}

fn cumulative(w: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    w.iter()
        .map(|x| {
            acc += x;
            acc
        })
        .collect()
}

/// Transportation-problem oracle for [`wasserstein_discrete`]. With at most
/// four atoms a side the optimum is found by enumerating every basis of the
/// transportation polytope; otherwise the monotone (north-west-corner on
/// sorted atoms) coupling is constructed explicitly, which is optimal in one
/// dimension. Rejects inputs with more than
/// [`WASSERSTEIN_BRUTEFORCE_MAX`] atoms.
pub fn wasserstein_bruteforce(a: &DiscreteMeasure, b: &DiscreteMeasure, p: f64) -> Result<f64> {
    if !(p.is_finite() && p >= 1.0) {
        return Err(Error::BadOrder(p));
    }
    for m in [a, b] {
        if m.len() > WASSERSTEIN_BRUTEFORCE_MAX {
            return Err(Error::TooLarge {
                len: m.len(),
                max: WASSERSTEIN_BRUTEFORCE_MAX,
            });
        }
    }
    let cost = if a.len() <= 4 && b.len() <= 4 {
        min_cost_by_basis_enumeration(a, b, p)
    } else {
        monotone_coupling_cost(a, b, p)
    };
    Ok(proot(cost, p))
}

fn monotone_coupling_cost(a: &DiscreteMeasure, b: &DiscreteMeasure, p: f64) -> f64 {
    let (xa, xb) = (a.locations(), b.locations());
    let mut ra = a.weights().to_vec();
    let mut rb = b.weights().to_vec();
    let (mut i, mut j) = (0usize, 0usize);
    let mut cost = 0.0;
    while i < ra.len() && j < rb.len() {
        let m = ra[i].min(rb[j]);
        cost += m * (xa[i] - xb[j]).abs().powf(p);
        ra[i] -= m;
        rb[j] -= m;
        if ra[i] <= 1e-15 {
            i += 1;
        }
        if rb[j] <= 1e-15 {
            j += 1;
        }
    }
    cost
}

/// Enumerates all bases (spanning subsets of na+nb−1 cells) of the small
/// transportation polytope, solves each for the basic solution, and keeps
/// the cheapest feasible vertex. An optimal vertex always exists because the
/// objective is linear and the polytope is bounded.
fn min_cost_by_basis_enumeration(a: &DiscreteMeasure, b: &DiscreteMeasure, p: f64) -> f64 {
    use nalgebra::{DMatrix, DVector};

    let (na, nb) = (a.len(), b.len());
    let cells = na * nb;
    let rank = na + nb - 1;
    let cost_of = |i: usize, j: usize| (a.locations()[i] - b.locations()[j]).abs().powf(p);

    // Right-hand side: row sums then column sums with the last column
    // constraint dropped (it is implied by total mass).
    let mut rhs = DVector::zeros(rank);
    for i in 0..na {
        rhs[i] = a.weights()[i];
    }
    for j in 0..nb - 1 {
        rhs[na + j] = b.weights()[j];
    }

    let mut best = f64::INFINITY;
    let mut selection: Vec<usize> = (0..rank).collect();
    loop {
        let mut m = DMatrix::zeros(rank, rank);
        for (col, &cell) in selection.iter().enumerate() {
            let (i, j) = (cell / nb, cell % nb);
            m[(i, col)] = 1.0;
            if j < nb - 1 {
                m[(na + j, col)] = 1.0;
            }
        }
        if let Some(z) = m.clone().lu().solve(&rhs) {
            let residual = (&m * &z - &rhs).amax();
            let feasible = residual < 1e-9 && z.iter().all(|&v| v >= -1e-10);
            if feasible {
                let c: f64 = selection
                    .iter()
                    .enumerate()
                    .map(|(col, &cell)| z[col].max(0.0) * cost_of(cell / nb, cell % nb))
                    .sum();
                best = best.min(c);
            }
        }
        // Next lexicographic combination of `rank` cells out of `cells`.
        let mut k = rank;
        loop {
            if k == 0 {
                return best;
            }
            k -= 1;
            if selection[k] + (rank - k) < cells {
                selection[k] += 1;
                for t in k + 1..rank {
                    selection[t] = selection[t - 1] + 1;
                }
                break;
            }
        }
    }
}

/// Prokhorov distance between atom measures: the smallest ε (within `tol`,
/// located by bisection on [0, diameter+1]) such that a coupling exists
/// keeping all but ε of the mass within distance ε — Strassen's condition,
/// decided by max-flow on the bipartite graph whose arcs join atoms at
/// distance ≤ ε. The returned value sits at the lower end of the final
/// bracket, so it never exceeds the true distance.
pub fn prokhorov(a: &DiscreteMeasure, b: &DiscreteMeasure, tol: f64) -> Result<f64> {
    if !(tol.is_finite() && tol > 0.0) {
        return Err(Error::BadTol(tol));
    }
    let feasible = |eps: f64| strassen_feasible(a, b, eps);
    if feasible(0.0) {
        return Ok(0.0);
    }
    Ok(bisect_smallest_feasible(feasible, diameter(a, b), tol))
}

fn diameter(a: &DiscreteMeasure, b: &DiscreteMeasure) -> f64 {
    let lo = a.locations()[0].min(b.locations()[0]);
    let hi = a.locations()[a.len() - 1].max(b.locations()[b.len() - 1]);
    hi - lo
}

fn bisect_smallest_feasible(feasible: impl Fn(f64) -> bool, diam: f64, tol: f64) -> f64 {
    let mut lo = 0.0;
    let mut hi = diam + 1.0;
    debug_assert!(feasible(hi), "feasibility must hold beyond the diameter");
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if feasible(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    lo
}

fn strassen_feasible(a: &DiscreteMeasure, b: &DiscreteMeasure, eps: f64) -> bool {
    let (na, nb) = (a.len(), b.len());
    let source = 0;
    let sink = 1 + na + nb;
    let mut net = FlowNetwork::new(2 + na + nb);
    for (i, &w) in a.weights().iter().enumerate() {
        net.add_edge(source, 1 + i, w);
    }
    for (j, &w) in b.weights().iter().enumerate() {
        net.add_edge(1 + na + j, sink, w);
    }
    for (i, &x) in a.locations().iter().enumerate() {
        for (j, &y) in b.locations().iter().enumerate() {
            if (x - y).abs() <= eps {
                net.add_edge(1 + i, 1 + na + j, 2.0);
            }
        }
    }
    net.max_flow(source, sink) + 1e-9 >= 1.0 - eps
}

/// Subset-enumeration oracle for [`prokhorov`]: tests the defining ball
/// condition μ(B) ≤ μ'(B^ε) + ε over every subset of either support, with
/// B^ε the open ε-neighbourhood. Exponential in the atom count; rejects
/// inputs beyond [`PROKHOROV_BRUTEFORCE_MAX`] atoms.
pub fn prokhorov_bruteforce(a: &DiscreteMeasure, b: &DiscreteMeasure, tol: f64) -> Result<f64> {
    if !(tol.is_finite() && tol > 0.0) {
        return Err(Error::BadTol(tol));
    }
    for m in [a, b] {
        if m.len() > PROKHOROV_BRUTEFORCE_MAX {
            return Err(Error::TooLarge {
                len: m.len(),
                max: PROKHOROV_BRUTEFORCE_MAX,
            });
        }
    }
    let cond = |eps: f64| ball_condition_holds(a, b, eps) && ball_condition_holds(b, a, eps);
    Ok(bisect_smallest_feasible(cond, diameter(a, b), tol))
}

fn ball_condition_holds(from: &DiscreteMeasure, to: &DiscreteMeasure, eps: f64) -> bool {
    let n = from.len();
    for mask in 1u32..(1 << n) {
        let mut mass_from = 0.0;
        for i in 0..n {
            if mask & (1 << i) != 0 {
                mass_from += from.weights()[i];
            }
        }
        let mut mass_ball = 0.0;
        for (j, &y) in to.locations().iter().enumerate() {
            let near = (0..n).any(|i| {
                mask & (1 << i) != 0 && (from.locations()[i] - y).abs() < eps
            });
            if near {
                mass_ball += to.weights()[j];
            }
        }
        if mass_from > mass_ball + eps + 1e-12 {
            return false;
        }
    }
    true
}

/// Closed-form Hellinger distance between two Gaussians (stddev
/// parameterization).
pub fn gaussian_hellinger(a: Gaussian1D, b: Gaussian1D) -> f64 {
    let (va, vb) = (a.stddev * a.stddev, b.stddev * b.stddev);
    let dm = a.mean - b.mean;
    let bc = (2.0 * a.stddev * b.stddev / (va + vb)).sqrt()
        * (-dm * dm / (4.0 * (va + vb))).exp();
    (1.0 - bc).max(0.0).sqrt()
}

/// Closed-form KL divergence D(a‖b) between two Gaussians.
pub fn gaussian_kl(a: Gaussian1D, b: Gaussian1D) -> f64 {
    let (va, vb) = (a.stddev * a.stddev, b.stddev * b.stddev);
    let dm = a.mean - b.mean;
    (b.stddev / a.stddev).ln() + (va + dm * dm) / (2.0 * vb) - 0.5
}

/// Which distances a caller asked for; drives sweep columns and the CLI
/// `--metrics` flag.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MetricKind {
    Hellinger,
    Tv,
    Prokhorov,
    Wasserstein,
    Kl,
}

impl MetricKind {
    pub const ALL: [MetricKind; 5] = [
        MetricKind::Hellinger,
        MetricKind::Tv,
        MetricKind::Prokhorov,
        MetricKind::Wasserstein,
        MetricKind::Kl,
    ];

    pub fn column_name(&self) -> &'static str {
        match self {
            MetricKind::Hellinger => "hellinger",
            MetricKind::Tv => "tv",
            MetricKind::Prokhorov => "prokhorov",
            MetricKind::Wasserstein => "wasserstein",
            MetricKind::Kl => "kl",
        }
    }

    pub fn parse(token: &str) -> std::result::Result<Self, String> {
        match token.trim() {
            "hellinger" => Ok(MetricKind::Hellinger),
            "tv" => Ok(MetricKind::Tv),
            "prokhorov" => Ok(MetricKind::Prokhorov),
            "wasserstein" => Ok(MetricKind::Wasserstein),
            "kl" => Ok(MetricKind::Kl),
            other => Err(format!(
                "unknown metric '{other}' (expected hellinger, tv, prokhorov, wasserstein, kl)"
            )),
        }
    }

    /// Parses a comma-separated metric list, preserving order and rejecting
    /// duplicates.
    pub fn parse_list(s: &str) -> std::result::Result<Vec<Self>, String> {
        let mut out = Vec::new();
        for tok in s.split(',') {
            let m = MetricKind::parse(tok)?;
            if out.contains(&m) {
                return Err(format!("metric '{}' listed twice", m.column_name()));
            }
            out.push(m);
        }
        if out.is_empty() {
            return Err("metric list is empty".into());
        }
        Ok(out)
    }
}

/// One row of pairwise distances; fields are present only when requested.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DistanceReport {
    pub hellinger: Option<f64>,
    pub tv: Option<f64>,
    pub prokhorov: Option<f64>,
    pub wasserstein: Option<f64>,
    /// Order of the Wasserstein entry, recorded alongside it.
    pub p: Option<f64>,
    pub kl: Option<f64>,
}

impl DistanceReport {
    pub const CSV_HEADER: &'static str = "hellinger,tv,prokhorov,wasserstein_p,p,kl";

    /// CSV row matching [`CSV_HEADER`]; absent fields stay empty, infinite
    /// KL prints as `inf`.
    ///
    /// [`CSV_HEADER`]: DistanceReport::CSV_HEADER
    pub fn csv_row(&self) -> String {
        let fmt = |v: &Option<f64>| match v {
            Some(x) => format!("{:.16e}", x),
            None => String::new(),
        };
        format!(
            "{},{},{},{},{},{}",
            fmt(&self.hellinger),
            fmt(&self.tv),
            fmt(&self.prokhorov),
            fmt(&self.wasserstein),
            fmt(&self.p),
            fmt(&self.kl)
        )
    }

    /// Checks the coarseness chain (prokhorov ≤ tv ≤ √2·hellinger and
    /// kl ≥ 2·hellinger²) across whichever fields are present.
    pub fn coarseness_consistent(&self, slack: f64) -> bool {
        if let (Some(p), Some(t)) = (self.prokhorov, self.tv) {
            if p > t + slack {
                return false;
            }
        }
        if let (Some(t), Some(h)) = (self.tv, self.hellinger) {
            if t > std::f64::consts::SQRT_2 * h + slack {
                return false;
            }
        }
        if let (Some(k), Some(h)) = (self.kl, self.hellinger) {
            if k < 2.0 * h * h - slack {
                return false;
            }
        }
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::{discretize, Grid1D};

    fn std_pair(n: usize) -> (GridMeasure, GridMeasure) {
        // N(0,1) and N(1,1) on a shared grid wide enough for both.
        let grid = Grid1D::new(-8.0, 9.0, n).unwrap();
        let a = discretize(Gaussian1D::new(0.0, 1.0).unwrap(), grid).unwrap();
        let b = discretize(Gaussian1D::new(1.0, 1.0).unwrap(), grid).unwrap();
        (a, b)
    }

    #[test]
    fn hellinger_matches_gaussian_closed_form() {
        let (a, b) = std_pair(2001);
        let want = (1.0 - (-0.125f64).exp()).sqrt();
        let got = hellinger(&a, &b).unwrap();
        assert!((got - want).abs() < 1e-6, "got {got}, want {want}");
        assert!(
            (gaussian_hellinger(
                Gaussian1D::new(0.0, 1.0).unwrap(),
                Gaussian1D::new(1.0, 1.0).unwrap()
            ) - want)
                .abs()
                < 1e-12
        );
    }

    #[test]
    fn tv_matches_two_phi_oracle() {
        use statrs::distribution::{ContinuousCDF, Normal};
        // TV of N(0,1) vs N(1,1) is 2Φ(1/2) − 1: the densities cross at 1/2.
        // The integrand has a kink there, so use a fine grid for the oracle.
        let (a, b) = std_pair(16001);
        let oracle = Normal::new(0.0, 1.0).unwrap();
        let want = 2.0 * oracle.cdf(0.5) - 1.0;
        let got = total_variation(&a, &b).unwrap();
        assert!((got - want).abs() < 1e-6, "got {got}, want {want}");
    }

    #[test]
    fn kl_matches_gaussian_closed_form() {
        let (a, b) = std_pair(2001);
        let got = kl_divergence(&a, &b).unwrap();
        assert!((got - 0.5).abs() < 1e-4, "got {got}, want 0.5");
        let ga = Gaussian1D::new(0.0, 2.0).unwrap();
        let gb = Gaussian1D::new(0.0, 1.0).unwrap();
        assert!((gaussian_kl(ga, gb) - 0.80685).abs() < 1e-5);
        assert!((gaussian_kl(gb, ga) - 0.318147).abs() < 1e-5, "KL is asymmetric");
    }

    #[test]
    fn kl_flags_support_escape_as_infinite() {
        let grid = Grid1D::new(0.0, 1.0, 101).unwrap();
        let full = GridMeasure::normalize(grid, vec![1.0; 101]).unwrap();
        let mut half_raw = vec![0.0; 101];
        for v in half_raw.iter_mut().take(101).skip(50) {
            *v = 1.0;
        }
        let half = GridMeasure::normalize(grid, half_raw).unwrap();
        assert!(kl_divergence(&full, &half).unwrap().is_infinite());
        assert!(kl_divergence(&half, &full).unwrap().is_finite());
    }

    #[test]
    fn identical_measures_have_zero_distance_exactly() {
        let (a, _) = std_pair(401);
        assert_eq!(hellinger(&a, &a).unwrap(), 0.0);
        assert_eq!(total_variation(&a, &a).unwrap(), 0.0);
        assert_eq!(kl_divergence(&a, &a).unwrap(), 0.0);
        assert_eq!(wasserstein_p(&a, &a, 2.0).unwrap(), 0.0);
        let d = a.to_discrete();
        assert_eq!(prokhorov(&d, &d, 1e-6).unwrap(), 0.0);
    }

    #[test]
    fn grid_mismatch_is_rejected() {
        let (a, _) = std_pair(401);
        let other_grid = Grid1D::new(-8.0, 9.0, 402).unwrap();
        let b = discretize(Gaussian1D::new(0.0, 1.0).unwrap(), other_grid).unwrap();
        assert!(matches!(hellinger(&a, &b), Err(Error::GridMismatch)));
        assert!(matches!(wasserstein_p(&a, &b, 1.0), Err(Error::GridMismatch)));
    }

    #[test]
    fn wasserstein_sees_the_translation() {
        let (a, b) = std_pair(2001);
        for p in [1.0, 2.0] {
            let d = wasserstein_p(&a, &b, p).unwrap();
            assert!((d - 1.0).abs() < 1e-3, "W_{p} = {d}, want 1");
        }
    }

    #[test]
    fn wasserstein_orders_are_monotone() {
        let (a, b) = std_pair(501);
        let w1 = wasserstein_p(&a, &b, 1.0).unwrap();
        let w2 = wasserstein_p(&a, &b, 2.0).unwrap();
        assert!(w1 <= w2 + 1e-9, "w1 = {w1} must not exceed w2 = {w2}");
    }

    #[test]
    fn discrete_wasserstein_agrees_with_basis_enumeration() {
        let a = DiscreteMeasure::new(vec![0.0, 1.0, 2.5], vec![0.2, 0.5, 0.3]).unwrap();
        let b = DiscreteMeasure::new(vec![-0.5, 0.8, 2.0, 4.0], vec![0.1, 0.4, 0.3, 0.2]).unwrap();
        for p in [1.0, 2.0, 3.0] {
            let fast = wasserstein_discrete(&a, &b, p).unwrap();
            let slow = wasserstein_bruteforce(&a, &b, p).unwrap();
            assert!((fast - slow).abs() < 1e-10, "p={p}: {fast} vs {slow}");
        }
    }

    #[test]
    fn discrete_wasserstein_agrees_with_monotone_merge_route() {
        // Six atoms a side: the oracle switches to the explicit coupling.
        let a = DiscreteMeasure::new(
            vec![-2.0, -1.0, 0.0, 1.0, 2.0, 3.0],
            vec![0.1, 0.2, 0.3, 0.2, 0.1, 0.1],
        )
        .unwrap();
        let b = DiscreteMeasure::new(
            vec![-1.5, -0.5, 0.5, 1.5, 2.5, 3.5],
            vec![0.15, 0.15, 0.3, 0.2, 0.1, 0.1],
        )
        .unwrap();
        for p in [1.0, 2.0] {
            let fast = wasserstein_discrete(&a, &b, p).unwrap();
            let slow = wasserstein_bruteforce(&a, &b, p).unwrap();
            assert!((fast - slow).abs() < 1e-10, "p={p}: {fast} vs {slow}");
        }
    }

    #[test]
    fn discrete_wasserstein_terminates_when_rounding_overshoots_unit_mass() {
        // Normalizing these weights leaves both cumulative ladders one ulp
        // above 1, which used to stall the merge loop at the last atoms.
        let w = vec![0.11, 0.89, 0.13];
        let a = DiscreteMeasure::new(vec![-1.0, 0.2, 0.9], w.clone()).unwrap();
        let b = DiscreteMeasure::new(vec![-0.4, 0.5, 1.7], w).unwrap();
        assert!(cumulative(a.weights()).last().unwrap() > &1.0);
        for p in [1.0, 2.0, 3.0] {
            let fast = wasserstein_discrete(&a, &b, p).unwrap();
            let slow = wasserstein_bruteforce(&a, &b, p).unwrap();
            assert!((fast - slow).abs() < 1e-10, "p={p}: {fast} vs {slow}");
        }
    }

    #[test]
    fn deltas_have_unit_prokhorov_distance() {
        let d0 = DiscreteMeasure::delta(0.0).unwrap();
        let d1 = DiscreteMeasure::delta(1.0).unwrap();
        let tol = 1e-6;
        let fast = prokhorov(&d0, &d1, tol).unwrap();
        let slow = prokhorov_bruteforce(&d0, &d1, tol).unwrap();
        assert!((fast - 1.0).abs() <= tol, "fast = {fast}");
        assert!((slow - 1.0).abs() <= tol, "slow = {slow}");
    }

    #[test]
    fn delta_against_even_mixture_gives_half() {
        let d0 = DiscreteMeasure::delta(0.0).unwrap();
        let mix = DiscreteMeasure::new(vec![0.0, 1.0], vec![0.5, 0.5]).unwrap();
        let tol = 1e-6;
        let got = prokhorov(&d0, &mix, tol).unwrap();
        assert!((got - 0.5).abs() <= tol, "got {got}");
    }

    #[test]
    fn prokhorov_is_symmetric_and_bounded_by_tv() {
        let grid = Grid1D::new(0.0, 1.0, 41).unwrap();
        let a = GridMeasure::normalize(grid, (0..41).map(|i| 1.0 + (i as f64 / 7.0).sin().abs()).collect()).unwrap();
        let b = GridMeasure::normalize(grid, (0..41).map(|i| 0.2 + ((i as f64) / 5.0).cos().abs()).collect()).unwrap();
        let (da, db) = (a.to_discrete(), b.to_discrete());
        let tol = 1e-6;
        let pab = prokhorov(&da, &db, tol).unwrap();
        let pba = prokhorov(&db, &da, tol).unwrap();
        assert!((pab - pba).abs() <= 1e-12, "{pab} vs {pba}");
        let tv = total_variation(&a, &b).unwrap();
        assert!(pab <= tv + 2.0 * tol, "prokhorov {pab} vs tv {tv}");
    }

    #[test]
    fn prokhorov_fast_route_matches_subset_oracle() {
        let a = DiscreteMeasure::new(vec![0.0, 0.3, 1.1, 2.0], vec![0.3, 0.2, 0.25, 0.25]).unwrap();
        let b = DiscreteMeasure::new(vec![0.1, 0.9, 1.4], vec![0.5, 0.2, 0.3]).unwrap();
        let tol = 1e-6;
        let fast = prokhorov(&a, &b, tol).unwrap();
        let slow = prokhorov_bruteforce(&a, &b, tol).unwrap();
        assert!((fast - slow).abs() <= 2.0 * tol, "{fast} vs {slow}");
    }

    #[test]
    fn bruteforce_guards_reject_large_inputs() {
        let locs: Vec<f64> = (0..20).map(|i| i as f64).collect();
        let w = vec![0.05; 20];
        let big = DiscreteMeasure::new(locs, w).unwrap();
        assert!(matches!(
            prokhorov_bruteforce(&big, &big, 1e-6),
            Err(Error::TooLarge { .. })
        ));
        assert!(matches!(
            wasserstein_bruteforce(&big, &big, 1.0),
            Err(Error::TooLarge { .. })
        ));
    }

    #[test]
    fn report_row_formats_missing_and_infinite_fields() {
        let r = DistanceReport {
            hellinger: Some(0.25),
            kl: Some(f64::INFINITY),
            ..Default::default()
        };
        let row = r.csv_row();
        assert_eq!(row, "2.5000000000000000e-1,,,,,inf");
        assert!(r.coarseness_consistent(1e-9));
    }

    #[test]
    fn metric_list_parsing_is_strict() {
        let ms = MetricKind::parse_list("hellinger,tv,kl").unwrap();
        assert_eq!(
            ms,
            vec![MetricKind::Hellinger, MetricKind::Tv, MetricKind::Kl]
        );
        assert!(MetricKind::parse_list("hellinger,hellinger").is_err());
        assert!(MetricKind::parse_list("helinger").is_err());
        assert!(MetricKind::parse_list("").is_err());
    }
}
