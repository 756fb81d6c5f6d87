//! Gaussian random fields on square pixel lattices.
//!
//! Supports the image-reconstruction stability experiment: an `n×n` image
//! is modelled as a Gaussian field with exponential covariance
//! `amplitude · exp(−dist/lengthscale)` between pixels, observed through a
//! subsampling operator under additive Gaussian noise. Because the model is
//! linear-Gaussian, the posterior is again Gaussian with a closed-form mean
//! and covariance ([`gp_posterior`]), and the Hellinger distance between
//! two posteriors sharing that covariance reduces to a quadratic form in
//! the mean difference ([`shared_cov_hellinger`]).
//!
//! Perturbation streams ([`white_noise_perturb`]) draw from ChaCha12 seeded
//! with a caller-provided integer, sampling standard normals pixel by pixel
//! in row-major order — a platform-stable, reproducible sequence.
//!
//! For images too large to materialize the n²×n² posterior covariance,
//! [`ObsSpaceRegression`] carries the same computation through
//! observation-space factors only (Woodbury identity), exactly matching the
//! explicit route.

use std::path::Path;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("covariance could not be factored even with jitter up to 1e-6 of its diagonal")]
    NotPD,
    #[error("reference image has zero Frobenius norm")]
    ZeroReference,
    #[error("observation operator selects no pixels inside the {n}x{n} lattice")]
    EmptyObservation { n: usize },
    #[error("observation index ({i}, {j}) lies outside the {n}x{n} lattice")]
    BadIndex { i: usize, j: usize, n: usize },
    #[error("noise variance must be positive and finite, got {0}")]
    BadNoise(f64),
    #[error("perturbation scale must be nonnegative and finite, got {0}")]
    BadSigma(f64),
    #[error("expected {want} data values (one per observed pixel), got {got}")]
    DataLen { got: usize, want: usize },
    #[error("image lattice needs n >= 1, got {0}")]
    BadLattice(usize),
    #[error("image csv line {line}: {msg}")]
    Csv { line: usize, msg: String },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

/// Square n×n pixel lattice; pixels are addressed `(row, col)` and
/// flattened row-major. A 1×1 lattice is allowed so the scalar conjugate
/// case stays expressible.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ImageGrid {
    n: usize,
}

impl ImageGrid {
    pub fn new(n: usize) -> Result<Self> {
        if n < 1 {
            return Err(Error::BadLattice(n));
        }
        Ok(ImageGrid { n })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn flat(&self, i: usize, j: usize) -> usize {
        i * self.n + j
    }

    pub fn unflat(&self, k: usize) -> (usize, usize) {
        (k / self.n, k % self.n)
    }
}

/// Euclidean pixel distance.
fn pixel_dist(a: (usize, usize), b: (usize, usize)) -> f64 {
    let di = a.0 as f64 - b.0 as f64;
    let dj = a.1 as f64 - b.1 as f64;
    (di * di + dj * dj).sqrt()
}

/// Exponential kernel value between two pixels.
pub fn exp_kernel(a: (usize, usize), b: (usize, usize), amplitude: f64, lengthscale: f64) -> f64 {
    amplitude * (-pixel_dist(a, b) / lengthscale).exp()
}

/// Cholesky factor of a field covariance, together with the jitter that was
/// added to the diagonal to make the factorization succeed (0 when none was
/// needed). The jitter never exceeds 1e−6 of the largest diagonal entry.
#[derive(Debug, Clone)]
pub struct FieldCovariance {
    grid: ImageGrid,
    factor: DMatrix<f64>,
    jitter: f64,
}

impl FieldCovariance {
    pub fn grid(&self) -> ImageGrid {
        self.grid
    }

    /// Lower-triangular Cholesky factor of the (jittered) covariance.
    pub fn factor(&self) -> &DMatrix<f64> {
        &self.factor
    }

    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    /// Materializes the covariance matrix L·Lᵀ.
    pub fn matrix(&self) -> DMatrix<f64> {
        &self.factor * self.factor.transpose()
    }
}

fn factor_with_jitter(grid: ImageGrid, m: DMatrix<f64>) -> Result<FieldCovariance> {
    let max_diag = m.diagonal().amax();
    if let Some(ch) = m.clone().cholesky() {
        return Ok(FieldCovariance {
            grid,
            factor: ch.l(),
            jitter: 0.0,
        });
    }
    let mut jitter = 1e-10 * max_diag;
    let cap = 1e-6 * max_diag;
    while jitter <= cap {
        let jm = &m + DMatrix::identity(m.nrows(), m.ncols()) * jitter;
        if let Some(ch) = jm.cholesky() {
            return Ok(FieldCovariance {
                grid,
                factor: ch.l(),
                jitter,
            });
        }
        jitter *= 10.0;
    }
    Err(Error::NotPD)
}

/// Builds and factors the exponential-kernel covariance over all pixel
/// pairs of `grid`.
pub fn exp_kernel_cov(grid: ImageGrid, amplitude: f64, lengthscale: f64) -> Result<FieldCovariance> {
    let n2 = grid.len();
    let m = DMatrix::from_fn(n2, n2, |r, c| {
        exp_kernel(grid.unflat(r), grid.unflat(c), amplitude, lengthscale)
    });
    factor_with_jitter(grid, m)
}

/// Gaussian field: an n×n mean image plus a factored covariance.
#[derive(Debug, Clone)]
pub struct GaussianField {
    pub mean: DMatrix<f64>,
    pub covariance: FieldCovariance,
}

impl GaussianField {
    /// Constant-mean field with exponential covariance.
    pub fn with_constant_mean(
        grid: ImageGrid,
        mean: f64,
        amplitude: f64,
        lengthscale: f64,
    ) -> Result<Self> {
        Ok(GaussianField {
            mean: DMatrix::from_element(grid.n(), grid.n(), mean),
            covariance: exp_kernel_cov(grid, amplitude, lengthscale)?,
        })
    }
}

/// Which pixels are observed: every `stride`-th pixel in both directions,
/// or an explicit pixel list.
#[derive(Debug, Clone)]
pub enum ObservationOp {
    Stride(usize),
    Mask(Vec<(usize, usize)>),
}

impl ObservationOp {
    /// Flat (row-major) indices of the observed pixels, sorted ascending.
    pub fn observed_flat(&self, grid: ImageGrid) -> Result<Vec<usize>> {
        let n = grid.n();
        let idx: Vec<usize> = match self {
            ObservationOp::Stride(s) => {
                if *s == 0 {
                    return Err(Error::EmptyObservation { n });
                }
                let mut v = Vec::new();
                for i in (0..n).step_by(*s) {
                    for j in (0..n).step_by(*s) {
                        v.push(grid.flat(i, j));
                    }
                }
                v
            }
            ObservationOp::Mask(pixels) => {
                let mut v = Vec::with_capacity(pixels.len());
                for &(i, j) in pixels {
                    if i >= n || j >= n {
                        return Err(Error::BadIndex { i, j, n });
                    }
                    v.push(grid.flat(i, j));
                }
                v.sort_unstable();
                v.dedup();
                v
            }
        };
        if idx.is_empty() {
            return Err(Error::EmptyObservation { n });
        }
        Ok(idx)
    }
}

/// Reads an image at the observed pixels, producing the data vector in the
/// same order as [`ObservationOp::observed_flat`].
pub fn observe(image: &DMatrix<f64>, op: &ObservationOp, grid: ImageGrid) -> Result<Vec<f64>> {
    let idx = op.observed_flat(grid)?;
    Ok(idx
        .iter()
        .map(|&k| {
            let (i, j) = grid.unflat(k);
            image[(i, j)]
        })
        .collect())
}

fn flatten(image: &DMatrix<f64>, grid: ImageGrid) -> DVector<f64> {
    DVector::from_fn(grid.len(), |k, _| {
        let (i, j) = grid.unflat(k);
        image[(i, j)]
    })
}

fn unflatten(v: &DVector<f64>, grid: ImageGrid) -> DMatrix<f64> {
    DMatrix::from_fn(grid.n(), grid.n(), |i, j| v[grid.flat(i, j)])
}

/// Linear-Gaussian update: with prior N(m, C), observation rows G and noise
/// N(0, σ²I), the posterior is N(m + CGᵀK⁻¹(y − Gm), C − CGᵀK⁻¹GC) with
/// K = GCGᵀ + σ²I. All solves go through Cholesky factors; the posterior
/// covariance is re-factored under the jitter policy.
pub fn gp_posterior(
    prior: &GaussianField,
    op: &ObservationOp,
    noise_variance: f64,
    data: &[f64],
) -> Result<GaussianField> {
    if !(noise_variance.is_finite() && noise_variance > 0.0) {
        return Err(Error::BadNoise(noise_variance));
    }
    let grid = prior.covariance.grid();
    let idx = op.observed_flat(grid)?;
    let n_obs = idx.len();
    if data.len() != n_obs {
        return Err(Error::DataLen {
            got: data.len(),
            want: n_obs,
        });
    }
    let c = prior.covariance.matrix();
    let gc = DMatrix::from_fn(n_obs, grid.len(), |r, col| c[(idx[r], col)]);
    let s = DMatrix::from_fn(n_obs, n_obs, |r, col| c[(idx[r], idx[col])]);
    let k = &s + DMatrix::identity(n_obs, n_obs) * noise_variance;
    let chol_k: Cholesky<f64, Dyn> = k.cholesky().ok_or(Error::NotPD)?;

    let mean_flat = flatten(&prior.mean, grid);
    let resid = DVector::from_fn(n_obs, |r, _| data[r] - mean_flat[idx[r]]);
    let alpha = chol_k.solve(&resid);
    let post_mean = &mean_flat + gc.transpose() * alpha;

    let kinv_gc = chol_k.solve(&gc);
    let c_post = &c - gc.transpose() * kinv_gc;
    let covariance = factor_with_jitter(grid, c_post)?;

    Ok(GaussianField {
        mean: unflatten(&post_mean, grid),
        covariance,
    })
}

/// Hellinger distance between two Gaussians that share the factored
/// covariance: sqrt(1 − exp(−⅛·ΔmᵀC⁻¹Δm)), with the quadratic form
/// evaluated by one triangular solve.
pub fn shared_cov_hellinger(
    m1: &DMatrix<f64>,
    m2: &DMatrix<f64>,
    cov: &FieldCovariance,
) -> f64 {
    let grid = cov.grid();
    assert_eq!(m1.nrows(), grid.n(), "mean image must match the lattice");
    assert_eq!(m2.nrows(), grid.n(), "mean image must match the lattice");
    let d = flatten(&(m1 - m2), grid);
    let z = cov
        .factor()
        .solve_lower_triangular(&d)
        .expect("Cholesky factor is nonsingular");
    let q = z.norm_squared();
    (1.0 - (-q / 8.0).exp()).max(0.0).sqrt()
}

/// Relative Frobenius discrepancy ‖perturbed − reference‖_F / ‖reference‖_F.
pub fn relative_frobenius(perturbed: &DMatrix<f64>, reference: &DMatrix<f64>) -> Result<f64> {
    let denom = reference.norm();
    if denom == 0.0 {
        return Err(Error::ZeroReference);
    }
    Ok((perturbed - reference).norm() / denom)
}

/// Adds `sigma`-scaled standard normal noise to every pixel. Draws come
/// from ChaCha12 seeded with `seed`, in row-major pixel order, so a given
/// (seed, sigma) pair always produces the same image, and sigma = 0 returns
/// the input exactly.
pub fn white_noise_perturb(image: &DMatrix<f64>, sigma: f64, seed: u64) -> Result<DMatrix<f64>> {
    if !(sigma.is_finite() && sigma >= 0.0) {
        return Err(Error::BadSigma(sigma));
    }
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut out = image.clone();
    for i in 0..image.nrows() {
        for j in 0..image.ncols() {
            let z: f64 = StandardNormal.sample(&mut rng);
            out[(i, j)] = image[(i, j)] + sigma * z;
        }
    }
    Ok(out)
}

/// Deterministic synthetic test image in [0, 255]: a smooth off-center
/// bump over a flat background, plus a checkerboard band in the lower
/// third to give the reconstruction both smooth and oscillatory content.
pub fn synthetic_image(n: usize) -> DMatrix<f64> {
    let tile = (n / 16).max(1);
    DMatrix::from_fn(n, n, |i, j| {
        let x = i as f64 / (n - 1).max(1) as f64;
        let y = j as f64 / (n - 1).max(1) as f64;
        let bump = 110.0
            * (-((x - 0.35) * (x - 0.35) + (y - 0.4) * (y - 0.4)) / (2.0 * 0.18 * 0.18)).exp();
        let band = if (0.65..0.85).contains(&x) {
            if (i / tile + j / tile) % 2 == 0 {
                48.0
            } else {
                -48.0
            }
        } else {
            0.0
        };
        (96.0 + bump + band).clamp(0.0, 255.0)
    })
}

/// Writes an image as plain-text PGM (P2), clamping and rounding pixel
/// values into 0..=255.
pub fn write_pgm(path: &Path, image: &DMatrix<f64>) -> Result<()> {
    use std::io::Write as _;
    let mut out = String::new();
    out.push_str(&format!("P2\n{} {}\n255\n", image.ncols(), image.nrows()));
    for i in 0..image.nrows() {
        let row: Vec<String> = (0..image.ncols())
            .map(|j| format!("{}", image[(i, j)].round().clamp(0.0, 255.0) as u8))
            .collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    std::fs::File::create(path)?.write_all(out.as_bytes())?;
    Ok(())
}

/// Serializes an image as a plain CSV matrix: one line per pixel row,
/// columns comma-separated, full-precision floats.
pub fn image_to_csv_string(image: &DMatrix<f64>) -> String {
    let mut out = String::new();
    for i in 0..image.nrows() {
        let row: Vec<String> = (0..image.ncols())
            .map(|j| format!("{:.16e}", image[(i, j)]))
            .collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// Parses a CSV matrix written by [`image_to_csv_string`]; `#` comment
/// lines and blank lines are skipped, and every row must have the same
/// number of columns.
pub fn image_from_csv_str(text: &str) -> Result<DMatrix<f64>> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut row = Vec::new();
        for field in line.split(',') {
            let v: f64 = field.trim().parse().map_err(|_| Error::Csv {
                line: lineno + 1,
                msg: format!("not a number: '{}'", field.trim()),
            })?;
            row.push(v);
        }
        if let Some(first) = rows.first() {
            if row.len() != first.len() {
                return Err(Error::Csv {
                    line: lineno + 1,
                    msg: format!("expected {} columns, got {}", first.len(), row.len()),
                });
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Csv {
            line: 0,
            msg: "no data rows".into(),
        });
    }
    let (nr, nc) = (rows.len(), rows[0].len());
    Ok(DMatrix::from_fn(nr, nc, |i, j| rows[i][j]))
}

/// Observation-space GP regression: everything needed to move posterior
/// means and Hellinger quadratic forms around without ever forming the
/// n²×n² posterior covariance. Algebraically identical to [`gp_posterior`]
/// plus [`shared_cov_hellinger`]:
/// ΔmᵀC_post⁻¹Δm = σ⁻²·ΔyᵀK⁻¹SΔy for Δm = CGᵀK⁻¹Δy.
pub struct ObsSpaceRegression {
    grid: ImageGrid,
    idx: Vec<usize>,
    s: DMatrix<f64>,
    chol_k: Cholesky<f64, Dyn>,
    cgt: DMatrix<f64>,
    noise_variance: f64,
    prior_mean_flat: DVector<f64>,
}

impl ObsSpaceRegression {
    /// Builds the observation-space factors directly from the kernel, so
    /// memory stays O(n²·n_obs) instead of O(n⁴).
    pub fn new(
        grid: ImageGrid,
        prior_mean: &DMatrix<f64>,
        amplitude: f64,
        lengthscale: f64,
        op: &ObservationOp,
        noise_variance: f64,
    ) -> Result<Self> {
        if !(noise_variance.is_finite() && noise_variance > 0.0) {
            return Err(Error::BadNoise(noise_variance));
        }
        let idx = op.observed_flat(grid)?;
        let n_obs = idx.len();
        let s = DMatrix::from_fn(n_obs, n_obs, |r, c| {
            exp_kernel(grid.unflat(idx[r]), grid.unflat(idx[c]), amplitude, lengthscale)
        });
        let k = &s + DMatrix::identity(n_obs, n_obs) * noise_variance;
        let chol_k = k.cholesky().ok_or(Error::NotPD)?;
        let cgt = DMatrix::from_fn(grid.len(), n_obs, |r, c| {
            exp_kernel(grid.unflat(r), grid.unflat(idx[c]), amplitude, lengthscale)
        });
        Ok(ObsSpaceRegression {
            grid,
            idx,
            s,
            chol_k,
            cgt,
            noise_variance,
            prior_mean_flat: flatten(prior_mean, grid),
        })
    }

    pub fn observed_flat(&self) -> &[usize] {
        &self.idx
    }

    /// Posterior mean image for a data vector.
    pub fn posterior_mean(&self, data: &[f64]) -> Result<DMatrix<f64>> {
        if data.len() != self.idx.len() {
            return Err(Error::DataLen {
                got: data.len(),
                want: self.idx.len(),
            });
        }
        let resid = DVector::from_fn(self.idx.len(), |r, _| {
            data[r] - self.prior_mean_flat[self.idx[r]]
        });
        let alpha = self.chol_k.solve(&resid);
        let mean = &self.prior_mean_flat + &self.cgt * alpha;
        Ok(unflatten(&mean, self.grid))
    }

    /// Norm of the posterior-mean shift CGᵀK⁻¹·Δy caused by a data
    /// perturbation (the posterior mean is affine in the data).
    pub fn mean_shift_norm(&self, dy: &[f64]) -> Result<f64> {
        if dy.len() != self.idx.len() {
            return Err(Error::DataLen {
                got: dy.len(),
                want: self.idx.len(),
            });
        }
        let dyv = DVector::from_column_slice(dy);
        let alpha = self.chol_k.solve(&dyv);
        Ok((&self.cgt * alpha).norm())
    }

    /// Squared shared-covariance Hellinger distance between the posteriors
    /// at `y` and `y + Δy`: 1 − exp(−q/8) with q = σ⁻²·ΔyᵀK⁻¹SΔy.
    pub fn sq_hellinger_of_shift(&self, dy: &[f64]) -> Result<f64> {
        if dy.len() != self.idx.len() {
            return Err(Error::DataLen {
                got: dy.len(),
                want: self.idx.len(),
            });
        }
        let dyv = DVector::from_column_slice(dy);
        let kinv_dy = self.chol_k.solve(&dyv);
        let q = (kinv_dy.transpose() * (&self.s * &dyv))[(0, 0)] / self.noise_variance;
        Ok(1.0 - (-q.max(0.0) / 8.0).exp())
    }
}
