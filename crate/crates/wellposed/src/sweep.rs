//! Stability sweeps: hold a Bayesian problem fixed, move the data through a
//! ladder of values, and record the distance from each perturbed posterior
//! back to a reference posterior. The resulting curves are the empirical
//! well-posedness evidence — a well-posed problem produces curves that fall
//! to zero continuously as the data approaches the reference, while a jump
//! that survives grid refinement marks a discontinuity.
//!
//! [`continuity_report`] turns a curve into a verdict per metric by comparing
//! the largest adjacent jump against a threshold (by default 50× the median
//! adjacent jump, so smooth curves with any slope pass while isolated steps
//! are flagged), and localizes the jump at the midpoint of the offending
//! parameter pair.
//!
//! [`gp_stability_sweep`] is the image-scale analogue: white-noise
//! perturbations of a source image propagate through Gaussian-process
//! regression, and the curve records mean squared Hellinger distance and
//! mean relative Frobenius mean-shift per noise scale, averaged over
//! replicates. Replicate r always draws its noise from seed `base_seed + r`,
//! so the same unit noise field is rescaled across sigma values and reruns
//! are byte-identical.

use nalgebra::DMatrix;
use thiserror::Error;

use crate::bayes::{self, delta_posterior, posterior, BayesianProblem};
use crate::gpfield::{
    self, gp_posterior, observe, relative_frobenius, shared_cov_hellinger, synthetic_image,
    white_noise_perturb, GaussianField, ImageGrid, ObservationOp, ObsSpaceRegression,
};
use crate::measures::{self, DiscreteMeasure};
use crate::metrics::{self, MetricKind};

#[derive(Debug, Error)]
pub enum Error {
    #[error("sweep needs at least one parameter value")]
    EmptyParams,
    #[error("sweep parameters must be finite and strictly increasing (violated at index {0})")]
    UnsortedParams(usize),
    #[error("sweep needs at least one metric")]
    NoMetrics,
    #[error("row {row} has {got} cells but {want} metrics are recorded")]
    RowShape { row: usize, got: usize, want: usize },
    #[error("sweep needs at least one replicate")]
    NoReplicates,
    #[error("perturbation scales must be finite and nonnegative, got {0}")]
    BadSigma(f64),
    #[error(transparent)]
    Bayes(#[from] bayes::Error),
    #[error(transparent)]
    Metric(#[from] metrics::Error),
    #[error(transparent)]
    Measure(#[from] measures::Error),
    #[error(transparent)]
    Field(#[from] gpfield::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

/// A distance-vs-parameter curve. `rows[i][k]` is the distance in metric
/// `metrics[k]` at `params[i]`, or `None` when the posterior at that
/// parameter does not exist (zero evidence).
#[derive(Debug, Clone)]
pub struct SweepCurve {
    pub reference: String,
    pub metrics: Vec<MetricKind>,
    /// Wasserstein order used for any `wasserstein` column.
    pub p: f64,
    pub params: Vec<f64>,
    pub rows: Vec<Vec<Option<f64>>>,
}

fn validate_params(params: &[f64]) -> Result<()> {
    if params.is_empty() {
        return Err(Error::EmptyParams);
    }
    for i in 0..params.len() {
        if !params[i].is_finite() {
            return Err(Error::UnsortedParams(i));
        }
        if i > 0 && params[i] <= params[i - 1] {
            return Err(Error::UnsortedParams(i));
        }
    }
    Ok(())
}

impl SweepCurve {
    pub fn new(
        reference: String,
        metrics: Vec<MetricKind>,
        p: f64,
        params: Vec<f64>,
        rows: Vec<Vec<Option<f64>>>,
    ) -> Result<Self> {
        if metrics.is_empty() {
            return Err(Error::NoMetrics);
        }
        validate_params(&params)?;
        if rows.len() != params.len() {
            return Err(Error::RowShape {
                row: rows.len(),
                got: rows.len(),
                want: params.len(),
            });
        }
        for (i, row) in rows.iter().enumerate() {
            if row.len() != metrics.len() {
                return Err(Error::RowShape {
                    row: i,
                    got: row.len(),
                    want: metrics.len(),
                });
            }
        }
        Ok(SweepCurve {
            reference,
            metrics,
            p,
            params,
            rows,
        })
    }

    /// Extracts one metric's column, if that metric was recorded.
    pub fn column(&self, kind: MetricKind) -> Option<Vec<Option<f64>>> {
        let k = self.metrics.iter().position(|m| *m == kind)?;
        Some(self.rows.iter().map(|r| r[k]).collect())
    }

    /// CSV with a `param,<metric>,...` header, one row per parameter, empty
    /// cells for missing posteriors, and the continuity report (when given)
    /// appended as `#`-prefixed comment lines.
    pub fn to_csv_string(&self, report: Option<&ContinuityReport>) -> String {
        let mut out = String::from("param");
        for m in &self.metrics {
            out.push(',');
            out.push_str(m.column_name());
        }
        out.push('\n');
        for (i, &x) in self.params.iter().enumerate() {
            out.push_str(&format!("{:.16e}", x));
            for cell in &self.rows[i] {
                out.push(',');
                if let Some(v) = cell {
                    out.push_str(&format!("{:.16e}", v));
                }
            }
            out.push('\n');
        }
        if let Some(rep) = report {
            out.push_str(&rep.to_comment_block());
        }
        out
    }
}

/// Distances from the posterior at `y_ref` to the posterior at every value
/// in `y_values` (which must be strictly increasing). A value exactly equal
/// to `y_ref` produces a row of exact zeros without recomputation; a value
/// whose evidence vanishes produces an empty row. KL rows are oriented as
/// D_KL(reference ‖ perturbed). `p` is the Wasserstein order and `tol` the
/// Prokhorov bisection tolerance; both are ignored unless the corresponding
/// metric is requested.
pub fn stability_sweep(
    problem: &BayesianProblem,
    y_ref: f64,
    y_values: &[f64],
    metrics: &[MetricKind],
    p: f64,
    tol: f64,
) -> Result<SweepCurve> {
    if metrics.is_empty() {
        return Err(Error::NoMetrics);
    }
    validate_params(y_values)?;
    let reference = posterior(problem, &[y_ref])?;
    let ref_discrete: Option<DiscreteMeasure> = if metrics.contains(&MetricKind::Prokhorov) {
        Some(reference.measure.to_discrete())
    } else {
        None
    };

    let mut rows = Vec::with_capacity(y_values.len());
    for &y in y_values {
        if y == y_ref {
            rows.push(vec![Some(0.0); metrics.len()]);
            continue;
        }
        match posterior(problem, &[y]) {
            Ok(post) => {
                let mut row = Vec::with_capacity(metrics.len());
                for m in metrics {
                    let d = match m {
                        MetricKind::Hellinger => {
                            metrics::hellinger(&reference.measure, &post.measure)?
                        }
                        MetricKind::Tv => {
                            metrics::total_variation(&reference.measure, &post.measure)?
                        }
                        MetricKind::Prokhorov => metrics::prokhorov(
                            ref_discrete.as_ref().expect("built when requested"),
                            &post.measure.to_discrete(),
                            tol,
                        )?,
                        MetricKind::Wasserstein => {
                            metrics::wasserstein_p(&reference.measure, &post.measure, p)?
                        }
                        MetricKind::Kl => {
                            metrics::kl_divergence(&reference.measure, &post.measure)?
                        }
                    };
                    row.push(Some(d));
                }
                rows.push(row);
            }
            Err(bayes::Error::ZeroEvidence) => rows.push(vec![None; metrics.len()]),
            Err(e) => return Err(e.into()),
        }
    }
    SweepCurve::new(
        format!("posterior at y = {:.16e}", y_ref),
        metrics.to_vec(),
        p,
        y_values.to_vec(),
        rows,
    )
}

/// Sweep for the noise-free invertible case, where the posterior at `y` is
/// the point mass at `g_inverse(y)`. Total variation is 0 or 1 exactly by
/// disjointness of distinct atoms, and Wasserstein-p is |Δ location|
/// (computed through the discrete transport routine, which is exact here).
pub fn delta_stability_sweep(
    g_inverse: impl Fn(f64) -> f64,
    y_ref: f64,
    y_values: &[f64],
    p: f64,
) -> Result<SweepCurve> {
    validate_params(y_values)?;
    let loc_ref = delta_posterior(&g_inverse, y_ref)?;
    let ref_atom = DiscreteMeasure::delta(loc_ref)?;
    let metric_list = vec![MetricKind::Tv, MetricKind::Wasserstein];
    let mut rows = Vec::with_capacity(y_values.len());
    for &y in y_values {
        let loc = delta_posterior(&g_inverse, y)?;
        let tv = if loc == loc_ref { 0.0 } else { 1.0 };
        let w = metrics::wasserstein_discrete(&ref_atom, &DiscreteMeasure::delta(loc)?, p)?;
        rows.push(vec![Some(tv), Some(w)]);
    }
    SweepCurve::new(
        format!("point mass at G^-1({:.16e})", y_ref),
        metric_list,
        p,
        y_values.to_vec(),
        rows,
    )
}

/// One metric's continuity diagnosis over a sweep curve.
#[derive(Debug, Clone)]
pub struct MetricContinuity {
    pub metric: MetricKind,
    /// Largest |Δdistance| between adjacent parameters (0 when fewer than
    /// two comparable rows exist).
    pub max_jump: f64,
    /// Midpoint of the adjacent parameter pair realizing `max_jump`; absent
    /// when the curve is constant or has no comparable pairs.
    pub location: Option<f64>,
    pub median_jump: f64,
    pub threshold: f64,
    pub jump_detected: bool,
}

#[derive(Debug, Clone)]
pub struct ContinuityReport {
    pub per_metric: Vec<MetricContinuity>,
    /// True when the threshold was derived as 50× the median jump rather
    /// than supplied by the caller.
    pub default_threshold: bool,
}

pub const JUMP_MEDIAN_FACTOR: f64 = 50.0;

/// Scans each metric column for discontinuities: a jump is flagged when the
/// largest adjacent difference exceeds `threshold` (or, when `threshold` is
/// `None`, 50× the median adjacent difference of that column). Rows with
/// missing cells are skipped pairwise; NaN differences (e.g. ∞ − ∞) are
/// ignored.
pub fn continuity_report(curve: &SweepCurve, threshold: Option<f64>) -> ContinuityReport {
    let mut per_metric = Vec::with_capacity(curve.metrics.len());
    for (k, metric) in curve.metrics.iter().enumerate() {
        let mut jumps: Vec<(f64, f64)> = Vec::new();
        for i in 0..curve.params.len().saturating_sub(1) {
            if let (Some(a), Some(b)) = (curve.rows[i][k], curve.rows[i + 1][k]) {
                let d = (b - a).abs();
                if d.is_nan() {
                    continue;
                }
                jumps.push(((curve.params[i] + curve.params[i + 1]) / 2.0, d));
            }
        }
        let (max_jump, location) = jumps
            .iter()
            .fold((0.0f64, None), |(mx, loc), &(at, d)| {
                if d > mx {
                    (d, Some(at))
                } else {
                    (mx, loc)
                }
            });
        let mut sorted: Vec<f64> = jumps.iter().map(|&(_, d)| d).collect();
        sorted.sort_by(|a, b| a.partial_cmp(b).expect("no NaN jumps"));
        let median_jump = if sorted.is_empty() {
            0.0
        } else if sorted.len() % 2 == 1 {
            sorted[sorted.len() / 2]
        } else {
            (sorted[sorted.len() / 2 - 1] + sorted[sorted.len() / 2]) / 2.0
        };
        let thr = threshold.unwrap_or(JUMP_MEDIAN_FACTOR * median_jump);
        per_metric.push(MetricContinuity {
            metric: *metric,
            max_jump,
            location,
            median_jump,
            threshold: thr,
            jump_detected: max_jump > thr && max_jump > 0.0,
        });
    }
    ContinuityReport {
        per_metric,
        default_threshold: threshold.is_none(),
    }
}

impl ContinuityReport {
    /// `#`-prefixed lines suitable for appending to a sweep CSV.
    pub fn to_comment_block(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "# continuity: threshold rule = {}\n",
            if self.default_threshold {
                "50x median adjacent jump"
            } else {
                "caller-specified"
            }
        ));
        for mc in &self.per_metric {
            let name = mc.metric.column_name();
            out.push_str(&format!("# {}.max_jump = {:.16e}\n", name, mc.max_jump));
            if let Some(loc) = mc.location {
                out.push_str(&format!("# {}.location = {:.16e}\n", name, loc));
            }
            out.push_str(&format!(
                "# {}.median_jump = {:.16e}\n",
                name, mc.median_jump
            ));
            out.push_str(&format!("# {}.threshold = {:.16e}\n", name, mc.threshold));
            out.push_str(&format!(
                "# {}.verdict = {}\n",
                name,
                if mc.jump_detected {
                    "jump detected"
                } else {
                    "no jump detected"
                }
            ));
        }
        out
    }

    pub fn metric(&self, kind: MetricKind) -> Option<&MetricContinuity> {
        self.per_metric.iter().find(|mc| mc.metric == kind)
    }
}

/// How the GP sweep computes distances: `Explicit` materializes the
/// posterior covariance factor (feasible up to roughly 64×64 images),
/// `ObsSpace` works entirely in observation space via the Woodbury
/// identity, and `Auto` picks by image size. Both routes compute the same
/// quantities.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GpRoute {
    #[default]
    Auto,
    Explicit,
    ObsSpace,
}

pub const GP_EXPLICIT_MAX_N: usize = 64;

#[derive(Debug, Clone)]
pub struct GpSweepSpec {
    pub image_n: usize,
    pub stride: usize,
    pub amplitude: f64,
    pub lengthscale: f64,
    pub prior_mean: f64,
    pub noise_variance: f64,
    /// Perturbation scales, in the order rows should appear.
    pub sigmas: Vec<f64>,
    pub replicates: usize,
    pub base_seed: u64,
    pub route: GpRoute,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GpSweepRow {
    pub sigma: f64,
    pub mean_sq_hellinger: f64,
    pub mean_rel_frobenius: f64,
    pub replicates: usize,
    pub mean_hellinger: f64,
}

pub struct GpSweepOutput {
    pub rows: Vec<GpSweepRow>,
    pub source: DMatrix<f64>,
    pub prior_mean: DMatrix<f64>,
    pub posterior_mean: DMatrix<f64>,
}

pub const GP_CSV_HEADER: &str = "sigma,mean_sq_hellinger,mean_rel_frobenius,replicates,mean_hellinger";

pub fn gp_rows_to_csv(rows: &[GpSweepRow]) -> String {
    let mut out = String::from(GP_CSV_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{:.16e},{:.16e},{:.16e},{},{:.16e}\n",
            r.sigma, r.mean_sq_hellinger, r.mean_rel_frobenius, r.replicates, r.mean_hellinger
        ));
    }
    out
}

/// Image-scale stability sweep. The synthetic source image is observed on a
/// stride lattice under the spec'd noise model; for each sigma, `replicates`
/// white-noise-perturbed copies of the source are pushed through the same
/// observation, and the perturbed posterior is compared with the reference
/// posterior in (squared) Hellinger distance — the posterior covariance does
/// not depend on the data, so the shared-covariance Gaussian formula is
/// exact — and in relative Frobenius distance between mean images. Sigma = 0
/// reproduces the reference data bit-for-bit, giving exact zeros.
pub fn gp_stability_sweep(spec: &GpSweepSpec) -> Result<GpSweepOutput> {
    if spec.replicates == 0 {
        return Err(Error::NoReplicates);
    }
    for (i, &s) in spec.sigmas.iter().enumerate() {
        if !(s.is_finite() && s >= 0.0) {
            return Err(Error::BadSigma(s));
        }
        if i > 0 && s <= spec.sigmas[i - 1] {
            return Err(Error::UnsortedParams(i));
        }
    }
    if spec.sigmas.is_empty() {
        return Err(Error::EmptyParams);
    }
    let grid = ImageGrid::new(spec.image_n)?;
    let op = ObservationOp::Stride(spec.stride);
    let source = synthetic_image(spec.image_n);
    let prior_mean = DMatrix::from_element(spec.image_n, spec.image_n, spec.prior_mean);
    let data = observe(&source, &op, grid)?;

    let obs = ObsSpaceRegression::new(
        grid,
        &prior_mean,
        spec.amplitude,
        spec.lengthscale,
        &op,
        spec.noise_variance,
    )?;
    let posterior_mean = obs.posterior_mean(&data)?;

    let explicit = match spec.route {
        GpRoute::Explicit => true,
        GpRoute::ObsSpace => false,
        GpRoute::Auto => spec.image_n <= GP_EXPLICIT_MAX_N,
    };
    // The explicit route materializes the posterior covariance once (it does
    // not depend on the data); means always come from the observation-space
    // regression, so a zero data shift gives bitwise-zero distances on both
    // routes.
    let explicit_post: Option<GaussianField> = if explicit {
        let prior = GaussianField {
            mean: prior_mean.clone(),
            covariance: gpfield::exp_kernel_cov(grid, spec.amplitude, spec.lengthscale)?,
        };
        Some(gp_posterior(&prior, &op, spec.noise_variance, &data)?)
    } else {
        None
    };

    let mut rows = Vec::with_capacity(spec.sigmas.len());
    for &sigma in &spec.sigmas {
        let mut sum_h2 = 0.0;
        let mut sum_h = 0.0;
        let mut sum_frob = 0.0;
        for r in 0..spec.replicates {
            let seed = spec.base_seed + r as u64;
            let perturbed = white_noise_perturb(&source, sigma, seed)?;
            let pdata = observe(&perturbed, &op, grid)?;
            let dy: Vec<f64> = pdata.iter().zip(&data).map(|(a, b)| a - b).collect();
            let (h, rel) = if let Some(post) = &explicit_post {
                let m_pert = obs.posterior_mean(&pdata)?;
                let h = shared_cov_hellinger(&m_pert, &posterior_mean, &post.covariance);
                let rel = relative_frobenius(&m_pert, &posterior_mean)?;
                (h, rel)
            } else {
                let h2 = obs.sq_hellinger_of_shift(&dy)?;
                let shift = obs.mean_shift_norm(&dy)?;
                let denom = posterior_mean.norm();
                if denom == 0.0 {
                    return Err(Error::Field(gpfield::Error::ZeroReference));
                }
                (h2.max(0.0).sqrt(), shift / denom)
            };
            sum_h2 += h * h;
            sum_h += h;
            sum_frob += rel;
        }
        let n = spec.replicates as f64;
        rows.push(GpSweepRow {
            sigma,
            mean_sq_hellinger: sum_h2 / n,
            mean_rel_frobenius: sum_frob / n,
            replicates: spec.replicates,
            mean_hellinger: sum_h / n,
        });
    }
    Ok(GpSweepOutput {
        rows,
        source,
        prior_mean,
        posterior_mean,
    })
}
