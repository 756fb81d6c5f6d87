//! One-dimensional probability measures on uniform grids.
//!
//! Two representations are used throughout the crate:
//!
//! * [`GridMeasure`] — a density sampled at the nodes of a uniform grid,
//!   normalized so that its trapezoid integral is 1. Between nodes the
//!   density is understood as linear, which makes the CDF piecewise
//!   quadratic and keeps `cdf`/`quantile`/`moment` mutually consistent
//!   with the same quadrature rule.
//! * [`DiscreteMeasure`] — finitely many weighted atoms, used by the
//!   Prokhorov and coupling-based Wasserstein routines.
//!
//! Conversions: [`discretize`] samples a Gaussian onto a grid,
//! [`GridMeasure::to_discrete`] turns a grid density into atoms carrying
//! the trapezoid weights (h/2 at the endpoints, h inside), so atom sums
//! reproduce trapezoid integrals of node-sampled functions exactly.

use std::fmt::Write as _;
use std::io::{Read as _, Write as _};
use std::path::Path;

use thiserror::Error;

/// Relative slack used when validating normalization.
pub const NORMALIZATION_TOL: f64 = 1e-10;

/// Relative slack (fraction of the grid span) for node uniformity checks
/// when reading CSV files.
const GRID_UNIFORMITY_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: need finite lower < upper and n >= 2 (got lower={lower}, upper={upper}, n={n})")]
    InvalidGrid { lower: f64, upper: f64, n: usize },
    #[error("density is zero everywhere; cannot normalize")]
    AllZero,
    #[error("density value at index {index} is not a finite nonnegative number")]
    NonFinite { index: usize },
    #[error("grid [{lower}, {upper}] does not cover mean ± 6·stddev = [{need_lo}, {need_hi}]")]
    InsufficientSupport {
        lower: f64,
        upper: f64,
        need_lo: f64,
        need_hi: f64,
    },
    #[error("quantile level must lie in [0, 1], got {0}")]
    QuantileRange(f64),
    #[error("standard deviation must be positive, got {0}")]
    BadStddev(f64),
    #[error("discrete measure needs at least one atom")]
    NoAtoms,
    #[error("atom locations must be finite and strictly increasing (violation at index {0})")]
    UnsortedAtoms(usize),
    #[error("csv line {line}: {msg}")]
    Csv { line: usize, msg: String },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

/// Uniform one-dimensional grid with `n` nodes spanning `[lower, upper]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid1D {
    lower: f64,
    upper: f64,
    n: usize,
}

impl Grid1D {
    pub fn new(lower: f64, upper: f64, n: usize) -> Result<Self> {
        if !(lower.is_finite() && upper.is_finite() && lower < upper && n >= 2) {
            return Err(Error::InvalidGrid { lower, upper, n });
        }
        Ok(Grid1D { lower, upper, n })
    }

    pub fn lower(&self) -> f64 {
        self.lower
    }

    pub fn upper(&self) -> f64 {
        self.upper
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Node spacing h = (upper − lower)/(n − 1).
    pub fn spacing(&self) -> f64 {
        (self.upper - self.lower) / (self.n - 1) as f64
    }

    /// Position of node `i`.
    pub fn node(&self, i: usize) -> f64 {
        debug_assert!(i < self.n);
        if i + 1 == self.n {
            self.upper
        } else {
            self.lower + i as f64 * self.spacing()
        }
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n).map(|i| self.node(i))
    }

    /// Grid with nodes at the centers of `n` equal cells of `(lower, upper)`,
    /// so the open endpoints are excluded (used for priors on open intervals
    /// whose forward map is singular at the boundary).
    pub fn cell_centered(lower: f64, upper: f64, n: usize) -> Result<Self> {
        if !(lower.is_finite() && upper.is_finite() && lower < upper && n >= 2) {
            return Err(Error::InvalidGrid { lower, upper, n });
        }
        let h = (upper - lower) / n as f64;
        Grid1D::new(lower + 0.5 * h, upper - 0.5 * h, n)
    }

    /// Trapezoid quadrature of node values `f` on this grid.
    pub fn trapezoid(&self, f: &[f64]) -> f64 {
        debug_assert_eq!(f.len(), self.n);
        let h = self.spacing();
        let mut acc = 0.0;
        for w in f.windows(2) {
            acc += 0.5 * h * (w[0] + w[1]);
        }
        acc
    }

    /// Trapezoid node weight: h/2 at the endpoints, h inside.
    pub fn trapezoid_weight(&self, i: usize) -> f64 {
        let h = self.spacing();
        if i == 0 || i + 1 == self.n {
            0.5 * h
        } else {
            h
        }
    }
}

/// Normal distribution on the line, parameterized by mean and standard
/// deviation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gaussian1D {
    pub mean: f64,
    pub stddev: f64,
}

impl Gaussian1D {
    pub fn new(mean: f64, stddev: f64) -> Result<Self> {
        if !(stddev.is_finite() && stddev > 0.0) || !mean.is_finite() {
            return Err(Error::BadStddev(stddev));
        }
        Ok(Gaussian1D { mean, stddev })
    }

    pub fn pdf(&self, x: f64) -> f64 {
        let z = (x - self.mean) / self.stddev;
        (-0.5 * z * z).exp() / (self.stddev * (2.0 * std::f64::consts::PI).sqrt())
    }

    /// Default truncation grid: mean ± 8·stddev with `n` nodes. Eight
    /// standard deviations leave less than 1e−15 of mass outside, well under
    /// every tolerance used by the quadrature routines.
    pub fn default_grid(&self, n: usize) -> Result<Grid1D> {
        Grid1D::new(self.mean - 8.0 * self.stddev, self.mean + 8.0 * self.stddev, n)
    }
}

/// Probability density sampled on a uniform grid, trapezoid-normalized.
#[derive(Debug, Clone, PartialEq)]
pub struct GridMeasure {
    grid: Grid1D,
    density: Vec<f64>,
    /// Cumulative trapezoid mass up to each node; cum[0] = 0.
    cum: Vec<f64>,
}

impl GridMeasure {
    /// Builds a measure by normalizing `raw` node values so the trapezoid
    /// integral is 1. Values must be finite and nonnegative, not all zero.
    pub fn normalize(grid: Grid1D, raw: Vec<f64>) -> Result<Self> {
        if raw.len() != grid.n() {
            return Err(Error::InvalidGrid {
                lower: grid.lower(),
                upper: grid.upper(),
                n: raw.len(),
            });
        }
        for (i, v) in raw.iter().enumerate() {
            if !v.is_finite() || *v < 0.0 {
                return Err(Error::NonFinite { index: i });
            }
        }
        let z = grid.trapezoid(&raw);
        if z <= 0.0 {
            return Err(Error::AllZero);
        }
        if !z.is_finite() {
            return Err(Error::NonFinite { index: 0 });
        }
        let density: Vec<f64> = raw.into_iter().map(|v| v / z).collect();
        Ok(Self::from_validated(grid, density))
    }

    /// Takes density values that are already normalized (or deliberately
    /// kept as-is) and only builds the cumulative table. Caller must have
    /// validated finiteness and sign.
    fn from_validated(grid: Grid1D, density: Vec<f64>) -> Self {
        let mut cum = Vec::with_capacity(grid.n());
        let h = grid.spacing();
        let mut acc = 0.0;
        cum.push(0.0);
        for w in density.windows(2) {
            acc += 0.5 * h * (w[0] + w[1]);
            cum.push(acc);
        }
        GridMeasure { grid, density, cum }
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    pub fn density(&self) -> &[f64] {
        &self.density
    }

    /// Total trapezoid mass (1 up to rounding; exposed for diagnostics).
    pub fn total_mass(&self) -> f64 {
        *self.cum.last().unwrap()
    }

    /// CDF of the piecewise-linear density, clamped to [0, 1]. Below the
    /// grid the value is 0, above it 1.
    pub fn cdf(&self, x: f64) -> f64 {
        let g = &self.grid;
        if x <= g.lower() {
            return 0.0;
        }
        if x >= g.upper() {
            return 1.0;
        }
        let h = g.spacing();
        let mut j = ((x - g.lower()) / h) as usize;
        if j > g.n() - 2 {
            j = g.n() - 2;
        }
        let t = x - g.node(j);
        let d0 = self.density[j];
        let d1 = self.density[j + 1];
        let v = self.cum[j] + d0 * t + (d1 - d0) * t * t / (2.0 * h);
        v.clamp(0.0, 1.0)
    }

    /// Generalized inverse CDF. For `u` strictly inside (0, 1) this solves
    /// the piecewise-quadratic CDF on the bracketing cell; `u = 0` returns
    /// the first node with mass to its right and `u = 1` the last node with
    /// mass to its left, i.e. the ends of the support.
    pub fn quantile(&self, u: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&u) {
            return Err(Error::QuantileRange(u));
        }
        let g = &self.grid;
        let n = g.n();
        if u == 0.0 {
            for j in 0..n - 1 {
                if self.density[j] + self.density[j + 1] > 0.0 {
                    return Ok(g.node(j));
                }
            }
            return Ok(g.lower());
        }
        let total = self.total_mass();
        let target = u * total;
        if target >= total {
            for j in (0..n - 1).rev() {
                if self.density[j] + self.density[j + 1] > 0.0 {
                    return Ok(g.node(j + 1));
                }
            }
            return Ok(g.upper());
        }
        // Smallest node index with cum >= target; the crossing lies in the
        // cell just before it.
        let i = match self
            .cum
            .binary_search_by(|c| c.partial_cmp(&target).unwrap())
        {
            Ok(i) => i,
            Err(i) => i,
        };
        let i = i.clamp(1, n - 1);
        let j = i - 1;
        let h = g.spacing();
        let r = target - self.cum[j];
        let b = self.density[j];
        let a = (self.density[j + 1] - b) / (2.0 * h);
        let disc = (b * b + 4.0 * a * r).max(0.0);
        let denom = b + disc.sqrt();
        let t = if denom > 0.0 { 2.0 * r / denom } else { 0.0 };
        Ok(g.node(j) + t.clamp(0.0, h))
    }

    /// Signed p-th raw moment ∫ x^p dμ by trapezoid quadrature.
    pub fn moment(&self, p: u32) -> f64 {
        let vals: Vec<f64> = self
            .grid
            .nodes()
            .zip(&self.density)
            .map(|(x, d)| x.powi(p as i32) * d)
            .collect();
        self.grid.trapezoid(&vals)
    }

    /// Absolute p-th moment ∫ |x|^p dμ by trapezoid quadrature (p ≥ 1).
    pub fn abs_moment(&self, p: f64) -> f64 {
        let vals: Vec<f64> = self
            .grid
            .nodes()
            .zip(&self.density)
            .map(|(x, d)| x.abs().powf(p) * d)
            .collect();
        self.grid.trapezoid(&vals)
    }

    pub fn mean(&self) -> f64 {
        self.moment(1)
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.moment(2) - m * m
    }

    /// Atomizes the measure: atoms at the grid nodes, weights equal to the
    /// trapezoid node weight times the density, renormalized to sum to 1.
    pub fn to_discrete(&self) -> DiscreteMeasure {
        let locations: Vec<f64> = self.grid.nodes().collect();
        let weights: Vec<f64> = self
            .density
            .iter()
            .enumerate()
            .map(|(i, d)| self.grid.trapezoid_weight(i) * d)
            .collect();
        DiscreteMeasure::new(locations, weights)
            .expect("normalized grid measure atomizes cleanly")
    }

    /// Writes the measure as CSV with header `x,density` and 17 significant
    /// digits, enough to round-trip every f64 exactly.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::with_capacity(self.grid.n() * 48 + 16);
        out.push_str("x,density\n");
        for (x, d) in self.grid.nodes().zip(&self.density) {
            let _ = writeln!(out, "{:.16e},{:.16e}", x, d);
        }
        out
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        f.write_all(self.to_csv_string().as_bytes())?;
        Ok(())
    }

    /// Parses the CSV format produced by [`to_csv_string`]: header
    /// `x,density`, one `x,density` pair per line, uniform x spacing.
    /// Comment lines starting with `#` are ignored. The density column is
    /// renormalized on load.
    ///
    /// [`to_csv_string`]: GridMeasure::to_csv_string
    pub fn from_csv_str(text: &str) -> Result<Self> {
        let mut xs: Vec<f64> = Vec::new();
        let mut ds: Vec<f64> = Vec::new();
        let mut saw_header = false;
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if !saw_header {
                if line != "x,density" {
                    return Err(Error::Csv {
                        line: lineno + 1,
                        msg: format!("expected header 'x,density', got '{line}'"),
                    });
                }
                saw_header = true;
                continue;
            }
            let mut parts = line.split(',');
            let (xs_raw, ds_raw) = match (parts.next(), parts.next(), parts.next()) {
                (Some(a), Some(b), None) => (a, b),
                _ => {
                    return Err(Error::Csv {
                        line: lineno + 1,
                        msg: "expected exactly two comma-separated fields".into(),
                    })
                }
            };
            let parse = |s: &str| -> Result<f64> {
                s.trim().parse::<f64>().map_err(|e| Error::Csv {
                    line: lineno + 1,
                    msg: format!("bad number '{s}': {e}"),
                })
            };
            xs.push(parse(xs_raw)?);
            ds.push(parse(ds_raw)?);
        }
        if !saw_header {
            return Err(Error::Csv {
                line: 1,
                msg: "missing 'x,density' header".into(),
            });
        }
        if xs.len() < 2 {
            return Err(Error::Csv {
                line: 1,
                msg: format!("need at least 2 rows, got {}", xs.len()),
            });
        }
        let n = xs.len();
        let (lo, hi) = (xs[0], xs[n - 1]);
        let grid = Grid1D::new(lo, hi, n)?;
        let span = hi - lo;
        for (i, &x) in xs.iter().enumerate() {
            if (x - grid.node(i)).abs() > GRID_UNIFORMITY_TOL * span {
                return Err(Error::Csv {
                    line: i + 2,
                    msg: format!("x values are not uniformly spaced near x={x}"),
                });
            }
        }
        // Files this library writes are normalized already; keep their
        // densities bit-for-bit so save/load round-trips exactly. Anything
        // with materially different mass is rescaled to 1.
        for (i, v) in ds.iter().enumerate() {
            if !v.is_finite() || *v < 0.0 {
                return Err(Error::NonFinite { index: i });
            }
        }
        let z = grid.trapezoid(&ds);
        if z <= 0.0 {
            return Err(Error::AllZero);
        }
        if (z - 1.0).abs() <= 1e-9 {
            Ok(GridMeasure::from_validated(grid, ds))
        } else {
            GridMeasure::normalize(grid, ds)
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut text = String::new();
        std::fs::File::open(path)?.read_to_string(&mut text)?;
        Self::from_csv_str(&text)
    }
}

/// Samples a Gaussian density onto `grid` and normalizes. The grid must
/// cover mean ± 6·stddev so that the truncated mass is negligible.
pub fn discretize(g: Gaussian1D, grid: Grid1D) -> Result<GridMeasure> {
    let need_lo = g.mean - 6.0 * g.stddev;
    let need_hi = g.mean + 6.0 * g.stddev;
    if grid.lower() > need_lo || grid.upper() < need_hi {
        return Err(Error::InsufficientSupport {
            lower: grid.lower(),
            upper: grid.upper(),
            need_lo,
            need_hi,
        });
    }
    let raw: Vec<f64> = grid.nodes().map(|x| g.pdf(x)).collect();
    GridMeasure::normalize(grid, raw)
}

/// Finitely many weighted atoms on the line, locations strictly increasing,
/// weights nonnegative and summing to 1.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteMeasure {
    locations: Vec<f64>,
    weights: Vec<f64>,
}

impl DiscreteMeasure {
    pub fn new(locations: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if locations.is_empty() || locations.len() != weights.len() {
            return Err(Error::NoAtoms);
        }
        for (i, &x) in locations.iter().enumerate() {
            if !x.is_finite() || (i > 0 && locations[i - 1] >= x) {
                return Err(Error::UnsortedAtoms(i));
            }
        }
        for (i, &w) in weights.iter().enumerate() {
            if !w.is_finite() || w < 0.0 {
                return Err(Error::NonFinite { index: i });
            }
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(Error::AllZero);
        }
        let weights = weights.into_iter().map(|w| w / total).collect();
        Ok(DiscreteMeasure { locations, weights })
    }

    /// Point mass at `loc`.
    pub fn delta(loc: f64) -> Result<Self> {
        DiscreteMeasure::new(vec![loc], vec![1.0])
    }

    pub fn locations(&self) -> &[f64] {
        &self.locations
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.locations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.locations.is_empty()
    }

    /// Absolute p-th moment Σ w_i |x_i|^p.
    pub fn abs_moment(&self, p: f64) -> f64 {
        self.locations
            .iter()
            .zip(&self.weights)
            .map(|(x, w)| x.abs().powf(p) * w)
            .sum()
    }

    /// Signed p-th moment Σ w_i x_i^p.
    pub fn moment(&self, p: u32) -> f64 {
        self.locations
            .iter()
            .zip(&self.weights)
            .map(|(x, w)| x.powi(p as i32) * w)
            .sum()
    }
}
