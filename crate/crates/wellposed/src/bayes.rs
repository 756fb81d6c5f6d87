//! Bayesian inverse problems on one-dimensional parameter grids.
//!
//! A problem couples a prior [`GridMeasure`] with a [`Likelihood`]
//! `L(y, θ)`. The posterior for observed data `y` has density proportional
//! to `L(y, ·) · prior` with normalizing constant (evidence)
//! `Z(y) = ∫ L(y, θ) dμ_prior(θ)`, both computed by the same trapezoid rule
//! that normalizes the measures, so posterior densities integrate to 1 by
//! construction. `Z(y) = 0` is reported as [`Error::ZeroEvidence`] — the
//! posterior is undefined there rather than silently garbage.
//!
//! [`check_assumptions`] runs falsification probes for the standard
//! well-posedness hypotheses (positivity, integrability, boundedness, data
//! continuity, moment bounds, log-integrability). A finite probe cannot
//! prove a hypothesis, only fail to refute it; the report records the raw
//! numbers next to each verdict.

use std::sync::Arc;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use thiserror::Error;

use crate::measures::{self, GridMeasure};

/// Modulus-of-continuity sequences that fail to drop by this factor from
/// their peak are labelled "discontinuity suspected".
pub const PLATEAU_FACTOR: f64 = 10.0;

#[derive(Debug, Error)]
pub enum Error {
    #[error("evidence is zero: likelihood vanishes on the whole prior grid")]
    ZeroEvidence,
    #[error("likelihood returned a non-finite or negative value at theta = {theta}")]
    NonFinite { theta: f64 },
    #[error("data has length {got} but the likelihood expects {want}")]
    DataDim { got: usize, want: usize },
    #[error("noise covariance is not symmetric positive definite")]
    NotPD,
    #[error("inverse forward map returned a non-finite location for y = {y}")]
    BadInverse { y: f64 },
    #[error("assumption probe schedule must be nonempty with positive h values")]
    BadSchedule,
    #[error("no candidate models supplied")]
    NoModels,
    #[error("model prior weights must be positive and finite")]
    BadModelWeights,
    #[error(transparent)]
    Measure(#[from] measures::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

type EvalFn = dyn Fn(&[f64], f64) -> f64 + Send + Sync;

/// Likelihood function `L(y, θ)`: nonnegative, finite, jointly evaluated at
/// a data vector and a scalar parameter.
#[derive(Clone)]
pub struct Likelihood {
    eval: Arc<EvalFn>,
    data_dim: usize,
    descriptor: String,
}

impl std::fmt::Debug for Likelihood {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Likelihood")
            .field("data_dim", &self.data_dim)
            .field("descriptor", &self.descriptor)
            .finish()
    }
}

impl Likelihood {
    pub fn new(
        data_dim: usize,
        descriptor: impl Into<String>,
        eval: impl Fn(&[f64], f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Likelihood {
            eval: Arc::new(eval),
            data_dim,
            descriptor: descriptor.into(),
        }
    }

    pub fn eval(&self, y: &[f64], theta: f64) -> f64 {
        (self.eval)(y, theta)
    }

    pub fn data_dim(&self) -> usize {
        self.data_dim
    }

    pub fn descriptor(&self) -> &str {
        &self.descriptor
    }
}

/// Additive Gaussian noise model `y = G(θ) + η`, `η ~ N(0, Γ)`.
pub struct GaussianNoiseSpec {
    pub forward: Arc<dyn Fn(f64) -> Vec<f64> + Send + Sync>,
    pub covariance: DMatrix<f64>,
}

/// Builds the density `det(2πΓ)^{-1/2} · exp(−½‖Γ^{-1/2}(G(θ)−y)‖²)` from a
/// noise spec, factoring Γ once by Cholesky.
pub fn gaussian_likelihood(
    spec: GaussianNoiseSpec,
    descriptor: impl Into<String>,
) -> Result<Likelihood> {
    let k = spec.covariance.nrows();
    if k == 0 || spec.covariance.ncols() != k {
        return Err(Error::NotPD);
    }
    let chol: Cholesky<f64, Dyn> = spec.covariance.clone().cholesky().ok_or(Error::NotPD)?;
    let l_factor = chol.l();
    let log_det_half: f64 = l_factor.diagonal().iter().map(|d| d.ln()).sum();
    let prefactor = (-(k as f64) * 0.5 * (2.0 * std::f64::consts::PI).ln() - log_det_half).exp();
    let forward = spec.forward;
    let eval = move |y: &[f64], theta: f64| -> f64 {
        let g = forward(theta);
        assert_eq!(g.len(), k, "forward map must produce data_dim components");
        assert_eq!(y.len(), k, "data must have data_dim components");
        let r = DVector::from_iterator(k, g.iter().zip(y).map(|(gi, yi)| gi - yi));
        let z = l_factor
            .solve_lower_triangular(&r)
            .expect("factor is nonsingular");
        prefactor * (-0.5 * z.norm_squared()).exp()
    };
    Ok(Likelihood::new(k, descriptor, eval))
}

/// Scalar-data shortcut for [`gaussian_likelihood`]: noise N(0, σ²) on
/// `t(y) = g(θ) + η`, where `t` transforms the raw data before comparison
/// (identity, cube root, floor, ...).
pub fn scalar_gaussian_likelihood(
    g: impl Fn(f64) -> f64 + Send + Sync + 'static,
    transform: impl Fn(f64) -> f64 + Send + Sync + 'static,
    noise_variance: f64,
    descriptor: impl Into<String>,
) -> Likelihood {
    assert!(
        noise_variance.is_finite() && noise_variance > 0.0,
        "noise variance must be positive"
    );
    let prefactor = 1.0 / (2.0 * std::f64::consts::PI * noise_variance).sqrt();
    let eval = move |y: &[f64], theta: f64| -> f64 {
        assert_eq!(y.len(), 1, "scalar likelihood expects one data component");
        let r = g(theta) - transform(y[0]);
        prefactor * (-0.5 * r * r / noise_variance).exp()
    };
    Likelihood::new(1, descriptor, eval)
}

/// Prior + likelihood pair; every posterior below refers to one of these.
#[derive(Debug, Clone)]
pub struct BayesianProblem {
    pub prior: GridMeasure,
    pub likelihood: Likelihood,
}

/// Normalized posterior together with the evidence that normalized it.
#[derive(Debug, Clone)]
pub struct Posterior {
    pub measure: GridMeasure,
    pub evidence: f64,
}

fn likelihood_values(problem: &BayesianProblem, y: &[f64]) -> Result<Vec<f64>> {
    if y.len() != problem.likelihood.data_dim() {
        return Err(Error::DataDim {
            got: y.len(),
            want: problem.likelihood.data_dim(),
        });
    }
    let mut vals = Vec::with_capacity(problem.prior.grid().n());
    for theta in problem.prior.grid().nodes() {
        let l = problem.likelihood.eval(y, theta);
        if !l.is_finite() || l < 0.0 {
            return Err(Error::NonFinite { theta });
        }
        vals.push(l);
    }
    Ok(vals)
}

/// Evidence `Z(y) = ∫ L(y, θ) dμ_prior(θ)` by trapezoid quadrature.
pub fn evidence(problem: &BayesianProblem, y: &[f64]) -> Result<f64> {
    let l = likelihood_values(problem, y)?;
    let vals: Vec<f64> = l
        .iter()
        .zip(problem.prior.density())
        .map(|(li, pi)| li * pi)
        .collect();
    Ok(problem.prior.grid().trapezoid(&vals))
}

/// Posterior measure for data `y`; errors with [`Error::ZeroEvidence`] when
/// the likelihood vanishes against the prior.
pub fn posterior(problem: &BayesianProblem, y: &[f64]) -> Result<Posterior> {
    let l = likelihood_values(problem, y)?;
    let raw: Vec<f64> = l
        .iter()
        .zip(problem.prior.density())
        .map(|(li, pi)| li * pi)
        .collect();
    let z = problem.prior.grid().trapezoid(&raw);
    if z <= 0.0 {
        return Err(Error::ZeroEvidence);
    }
    let measure = GridMeasure::normalize(*problem.prior.grid(), raw)?;
    Ok(Posterior {
        measure,
        evidence: z,
    })
}

/// One candidate forward model in a model-selection problem.
pub struct ModelCandidate {
    pub name: String,
    pub likelihood: Likelihood,
    pub prior_weight: f64,
}

/// Posterior model weights and per-model parameter posteriors.
pub struct ModelSelection {
    /// Normalized posterior weight per candidate, proportional to
    /// prior_weight · evidence.
    pub weights: Vec<f64>,
    /// Parameter posterior per candidate; `None` when that model's evidence
    /// is zero (its weight is then 0).
    pub posteriors: Vec<Option<Posterior>>,
}

/// Ranks finitely many forward models sharing one parameter prior: the
/// posterior weight of model k is prior_weight_k · Z_k, normalized across
/// candidates. Weights are invariant under rescaling all prior weights.
pub fn model_selection_posterior(
    candidates: &[ModelCandidate],
    prior: &GridMeasure,
    y: &[f64],
) -> Result<ModelSelection> {
    if candidates.is_empty() {
        return Err(Error::NoModels);
    }
    if candidates
        .iter()
        .any(|c| !c.prior_weight.is_finite() || c.prior_weight <= 0.0)
    {
        return Err(Error::BadModelWeights);
    }
    let mut unnorm = Vec::with_capacity(candidates.len());
    let mut posteriors = Vec::with_capacity(candidates.len());
    for c in candidates {
        let problem = BayesianProblem {
            prior: prior.clone(),
            likelihood: c.likelihood.clone(),
        };
        let z = evidence(&problem, y)?;
        unnorm.push(c.prior_weight * z);
        posteriors.push(match posterior(&problem, y) {
            Ok(p) => Some(p),
            Err(Error::ZeroEvidence) => None,
            Err(e) => return Err(e),
        });
    }
    let total: f64 = unnorm.iter().sum();
    if total <= 0.0 {
        return Err(Error::ZeroEvidence);
    }
    Ok(ModelSelection {
        weights: unnorm.into_iter().map(|w| w / total).collect(),
        posteriors,
    })
}

/// Degenerate (noise-free) posterior for an invertible forward map: all the
/// mass sits at `G⁻¹(y)`. Returns the atom location.
pub fn delta_posterior(g_inverse: impl Fn(f64) -> f64, y: f64) -> Result<f64> {
    let loc = g_inverse(y);
    if !loc.is_finite() {
        return Err(Error::BadInverse { y });
    }
    Ok(loc)
}

/// Verdict of the data-continuity probe (A4).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ContinuityVerdict {
    Continuous,
    DiscontinuitySuspected,
}

impl std::fmt::Display for ContinuityVerdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ContinuityVerdict::Continuous => write!(f, "continuous"),
            ContinuityVerdict::DiscontinuitySuspected => write!(f, "discontinuity suspected"),
        }
    }
}

/// Falsification-probe report for the well-posedness hypotheses. Flags mean
/// "not refuted by these probes", never "proved".
#[derive(Debug, Clone)]
pub struct AssumptionReport {
    /// Smallest likelihood value seen over probes × grid (A1), and whether
    /// it stayed strictly positive.
    pub a1_min_likelihood: f64,
    pub a1_positive: bool,
    /// Largest evidence over the probe data values (A2).
    pub a2_sup_evidence: f64,
    pub a2_integrable: bool,
    /// Largest node-wise likelihood value over probes × grid (A3).
    pub a3_sup_likelihood: f64,
    pub a3_bounded: bool,
    /// (h, max over probes × grid of |L(y+h,θ) − L(y,θ)|) per schedule step,
    /// h descending (A4).
    pub a4_modulus: Vec<(f64, f64)>,
    pub a4_verdict: ContinuityVerdict,
    /// Largest ∫|θ|^p L(y,θ) dμ_prior over probes (A5), with the p used.
    pub a5_sup_moment: f64,
    pub a5_p: f64,
    pub a5_bounded: bool,
    /// Largest ∫|log L(y', θ)| dμ_post(y)(θ) over probes y and data y' in a
    /// δ-ball around each probe (A6). Infinite when the likelihood vanishes
    /// on posterior mass.
    pub a6_sup_log_integral: f64,
    pub a6_bounded: bool,
}

impl AssumptionReport {
    /// Key-value text block, one `key = value` line per field.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        s.push_str(&format!("a1_min_likelihood = {:.6e}\n", self.a1_min_likelihood));
        s.push_str(&format!("a1_positive = {}\n", self.a1_positive));
        s.push_str(&format!("a2_sup_evidence = {:.6e}\n", self.a2_sup_evidence));
        s.push_str(&format!("a2_integrable = {}\n", self.a2_integrable));
        s.push_str(&format!("a3_sup_likelihood = {:.6e}\n", self.a3_sup_likelihood));
        s.push_str(&format!("a3_bounded = {}\n", self.a3_bounded));
        for (h, m) in &self.a4_modulus {
            s.push_str(&format!("a4_modulus[h={h:.3e}] = {m:.6e}\n"));
        }
        s.push_str(&format!("a4_verdict = {}\n", self.a4_verdict));
        s.push_str(&format!("a5_p = {}\n", self.a5_p));
        s.push_str(&format!("a5_sup_moment = {:.6e}\n", self.a5_sup_moment));
        s.push_str(&format!("a5_bounded = {}\n", self.a5_bounded));
        s.push_str(&format!("a6_sup_log_integral = {:.6e}\n", self.a6_sup_log_integral));
        s.push_str(&format!("a6_bounded = {}\n", self.a6_bounded));
        s
    }
}

/// Probes the well-posedness hypotheses of a scalar-data problem at the
/// given data values. `h_schedule` drives the continuity modulus (A4) and
/// its largest entry sets the δ-ball radius for the log-integrability probe
/// (A6); `p` is the moment order for A5.
pub fn check_assumptions(
    problem: &BayesianProblem,
    y_probe: &[f64],
    p: f64,
    h_schedule: &[f64],
) -> Result<AssumptionReport> {
    if problem.likelihood.data_dim() != 1 {
        return Err(Error::DataDim {
            got: problem.likelihood.data_dim(),
            want: 1,
        });
    }
    if y_probe.is_empty()
        || h_schedule.is_empty()
        || h_schedule.iter().any(|h| !h.is_finite() || *h <= 0.0)
    {
        return Err(Error::BadSchedule);
    }
    let mut schedule: Vec<f64> = h_schedule.to_vec();
    schedule.sort_by(|a, b| b.partial_cmp(a).unwrap());

    let grid = problem.prior.grid();
    let nodes: Vec<f64> = grid.nodes().collect();

    // A1/A3: extreme likelihood values over probes × grid.
    let mut min_l = f64::INFINITY;
    let mut max_l = f64::NEG_INFINITY;
    let mut all_finite = true;
    for &y in y_probe {
        for &theta in &nodes {
            let l = problem.likelihood.eval(&[y], theta);
            if !l.is_finite() {
                all_finite = false;
                continue;
            }
            min_l = min_l.min(l);
            max_l = max_l.max(l);
        }
    }

    // A2: evidence at each probe.
    let mut sup_z = 0.0f64;
    for &y in y_probe {
        let z = evidence(problem, &[y])?;
        sup_z = sup_z.max(z);
    }

    // A4: modulus of data continuity along the shrinking schedule.
    let mut modulus = Vec::with_capacity(schedule.len());
    for &h in &schedule {
        let mut m = 0.0f64;
        for &y in y_probe {
            for &theta in &nodes {
                let d = (problem.likelihood.eval(&[y + h], theta)
                    - problem.likelihood.eval(&[y], theta))
                .abs();
                if d.is_finite() {
                    m = m.max(d);
                }
            }
        }
        modulus.push((h, m));
    }
    let peak = modulus.iter().map(|(_, m)| *m).fold(0.0f64, f64::max);
    let last = modulus.last().map(|(_, m)| *m).unwrap_or(0.0);
    let scale = if max_l.is_finite() { max_l.max(1.0) } else { 1.0 };
    let a4_verdict = if peak <= 1e-12 * scale || last <= peak / PLATEAU_FACTOR {
        ContinuityVerdict::Continuous
    } else {
        ContinuityVerdict::DiscontinuitySuspected
    };

    // A5: absolute p-th moment of likelihood · prior.
    let mut sup_moment = 0.0f64;
    for &y in y_probe {
        let vals: Vec<f64> = nodes
            .iter()
            .zip(problem.prior.density())
            .map(|(&theta, &pd)| theta.abs().powf(p) * problem.likelihood.eval(&[y], theta) * pd)
            .collect();
        sup_moment = sup_moment.max(grid.trapezoid(&vals));
    }

    // A6: ∫ |log L| against the posterior at each probe, for data in a
    // δ-ball around the probe.
    let delta = schedule[0];
    let mut sup_log = 0.0f64;
    let mut a6_ok = true;
    for &y in y_probe {
        let post = match posterior(problem, &[y]) {
            Ok(p) => p,
            Err(Error::ZeroEvidence) => {
                a6_ok = false;
                continue;
            }
            Err(e) => return Err(e),
        };
        for shift in [-delta, -0.5 * delta, 0.5 * delta, delta] {
            let yp = y + shift;
            let mut vals = Vec::with_capacity(nodes.len());
            let mut infinite = false;
            for (&theta, &pd) in nodes.iter().zip(post.measure.density()) {
                let l = problem.likelihood.eval(&[yp], theta);
                if l > 0.0 {
                    vals.push(l.ln().abs() * pd);
                } else if pd > 0.0 {
                    infinite = true;
                    break;
                } else {
                    vals.push(0.0);
                }
            }
            if infinite {
                a6_ok = false;
                sup_log = f64::INFINITY;
            } else {
                sup_log = sup_log.max(grid.trapezoid(&vals));
            }
        }
    }
    if !sup_log.is_finite() {
        a6_ok = false;
    }

    Ok(AssumptionReport {
        a1_min_likelihood: if min_l.is_finite() { min_l } else { f64::NAN },
        a1_positive: all_finite && min_l > 0.0,
        a2_sup_evidence: sup_z,
        a2_integrable: sup_z.is_finite() && all_finite,
        a3_sup_likelihood: if max_l.is_finite() { max_l } else { f64::INFINITY },
        a3_bounded: all_finite && max_l.is_finite(),
        a4_modulus: modulus,
        a4_verdict,
        a5_sup_moment: sup_moment,
        a5_p: p,
        a5_bounded: sup_moment.is_finite(),
        a6_sup_log_integral: sup_log,
        a6_bounded: a6_ok,
    })
}
