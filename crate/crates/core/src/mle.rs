//! Exact likelihood of the Gaussian random-effect model and its maximizers.
//!
//! For one trajectory with statistics `(u, v)` and `φ ~ N(μ, σ₀²)`
//!
//! ```text
//! log λ = −½ log(1 + σ₀² v) + (μ u − μ² v / 2 + σ₀² u² / 2) / (1 + σ₀² v)
//! ```
//!
//! which is finite at `v = 0`. The score in `(μ, σ₀²)` is
//! `(Σ γ_i, ½ Σ (γ_i² − I_i))` with `γ_i = (u_i − μ v_i)/(1 + σ₀² v_i)`
//! and `I_i = v_i/(1 + σ₀² v_i)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::WeightedSeries;
use crate::numeric::compensated_sum;
use crate::statistics::{Provenance, StatsBatch, SufficientStats};

/// Population parameters `(μ, σ₀²)` of the random effect.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThetaParams {
    pub mu: f64,
    pub sigma0_sq: f64,
}

impl ThetaParams {
    pub fn new(mu: f64, sigma0_sq: f64) -> Result<Self> {
        if !mu.is_finite() || !(sigma0_sq >= 0.0 && sigma0_sq.is_finite()) {
            return Err(Error::domain(format!(
                "theta needs finite mu and sigma0_sq >= 0, got ({mu}, {sigma0_sq})"
            )));
        }
        Ok(ThetaParams { mu, sigma0_sq })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Score {
    pub d_mu: f64,
    pub d_sigma0_sq: f64,
}

impl Score {
    pub fn norm(&self) -> f64 {
        self.d_mu.hypot(self.d_sigma0_sq)
    }
}

fn check_stats(s: &SufficientStats) -> Result<()> {
    if s.v < 0.0 || !s.v.is_finite() || !s.u.is_finite() {
        return Err(Error::domain(format!(
            "trajectory {}: statistics (u, v) = ({}, {}) are invalid",
            s.trajectory_id, s.u, s.v
        )));
    }
    Ok(())
}

fn nonempty(batch: &StatsBatch) -> Result<()> {
    if batch.is_empty() {
        return Err(Error::domain("likelihood needs a nonempty batch"));
    }
    batch.stats.iter().try_for_each(check_stats)
}

#[inline]
fn log_lambda(u: f64, v: f64, theta: ThetaParams) -> f64 {
    let (mu, s) = (theta.mu, theta.sigma0_sq);
    let d = 1.0 + s * v;
    -0.5 * (s * v).ln_1p() + (mu * u - 0.5 * mu * mu * v + 0.5 * s * u * u) / d
}

/// `log λ_i(θ)` for one trajectory.
pub fn individual_log_lambda(stats: &SufficientStats, theta: ThetaParams) -> Result<f64> {
    check_stats(stats)?;
    Ok(log_lambda(stats.u, stats.v, theta))
}

/// `Σ_i log λ_i(θ)` in trajectory order.
pub fn total_log_likelihood(batch: &StatsBatch, theta: ThetaParams) -> Result<f64> {
    nonempty(batch)?;
    Ok(compensated_sum(batch.stats.iter().map(|s| log_lambda(s.u, s.v, theta))))
}

/// `log L(θ)` minus its θ-free part `Σ u²/(2v)`, which is the only part
/// that differs between candidate maxima. Stays accurate when some `v`
/// are so large that `u²/(2v)` swamps the θ-dependent terms.
fn centered_log_likelihood(batch: &StatsBatch, theta: ThetaParams) -> f64 {
    let (mu, s) = (theta.mu, theta.sigma0_sq);
    compensated_sum(batch.stats.iter().map(|st| {
        if st.v == 0.0 {
            mu * st.u
        } else {
            let r = st.u - mu * st.v;
            -0.5 * (s * st.v).ln_1p() - r * r / (2.0 * st.v * (1.0 + s * st.v))
        }
    }))
}

pub fn score(batch: &StatsBatch, theta: ThetaParams) -> Result<Score> {
    nonempty(batch)?;
    Ok(score_unchecked(batch, theta))
}

fn score_unchecked(batch: &StatsBatch, theta: ThetaParams) -> Score {
    let (mu, s) = (theta.mu, theta.sigma0_sq);
    let gamma = |st: &SufficientStats| (st.u - mu * st.v) / (1.0 + s * st.v);
    let info = |st: &SufficientStats| st.v / (1.0 + s * st.v);
    Score {
        d_mu: compensated_sum(batch.stats.iter().map(gamma)),
        d_sigma0_sq: 0.5 * compensated_sum(batch.stats.iter().map(|st| {
            let g = gamma(st);
            g * g - info(st)
        })),
    }
}

/// Maximizer in `μ` for a fixed `σ₀²`.
pub fn estimate_mu_fixed_sigma(batch: &StatsBatch, sigma0_sq: f64) -> Result<f64> {
    nonempty(batch)?;
    if !(sigma0_sq >= 0.0 && sigma0_sq.is_finite()) {
        return Err(Error::domain(format!("sigma0_sq must be >= 0, got {sigma0_sq}")));
    }
    let den = compensated_sum(batch.stats.iter().map(|s| s.v / (1.0 + sigma0_sq * s.v)));
    if den <= 0.0 {
        return Err(Error::Degenerate("every trajectory has v = 0".into()));
    }
    let num = compensated_sum(batch.stats.iter().map(|s| s.u / (1.0 + sigma0_sq * s.v)));
    Ok(num / den)
}

/// `Σ u / Σ v`, the estimator when every effect equals `μ`.
pub fn estimate_fixed_effect(batch: &StatsBatch) -> Result<f64> {
    nonempty(batch)?;
    let den = compensated_sum(batch.stats.iter().map(|s| s.v));
    if den <= 0.0 {
        return Err(Error::Degenerate("sum of v is zero".into()));
    }
    Ok(compensated_sum(batch.stats.iter().map(|s| s.u)) / den)
}

/// Explicit estimator for batches whose `v` is common to all paths, as
/// happens for constant drift proportional to a constant diffusion:
/// `μ = Ū / V̄`, `σ₀² = (S_U² − V̄) / V̄²` with `S_U²` the (1/N) sample
/// variance of `U`. The variance estimate is returned unclamped.
pub fn estimate_common_v_closed_form(batch: &StatsBatch) -> Result<(f64, f64)> {
    nonempty(batch)?;
    let n = batch.len() as f64;
    let u_bar = compensated_sum(batch.stats.iter().map(|s| s.u)) / n;
    let v_bar = compensated_sum(batch.stats.iter().map(|s| s.v)) / n;
    if v_bar <= 0.0 {
        return Err(Error::Degenerate("mean of v is zero".into()));
    }
    let su2 = compensated_sum(batch.stats.iter().map(|s| (s.u - u_bar) * (s.u - u_bar))) / n;
    Ok((u_bar / v_bar, (su2 - v_bar) / (v_bar * v_bar)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Score tolerance per trajectory; the absolute tolerance is this times N.
    pub score_tol_per_trajectory: f64,
    /// Relative bracket width at which the root search stops.
    pub param_tol: f64,
    pub max_iterations: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            score_tol_per_trajectory: 1e-8,
            param_tol: 1e-10,
            max_iterations: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectEstimate {
    pub theta_hat: ThetaParams,
    pub log_likelihood: f64,
    pub iterations: usize,
    /// `σ̂₀² = 0` with nonpositive variance score.
    pub boundary: bool,
    pub converged: bool,
    /// Norm of the score projected onto the feasible set `σ₀² >= 0`.
    pub gradient_norm: f64,
    pub score: Score,
}

impl EffectEstimate {
    pub fn to_report(&self, provenance: Option<Provenance>) -> EstimateReport {
        EstimateReport {
            theta_hat: self.theta_hat,
            log_likelihood: self.log_likelihood,
            converged: self.converged,
            boundary: self.boundary,
            iterations: self.iterations,
            gradient_norm: self.gradient_norm,
            provenance,
        }
    }
}

/// JSON form of an estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub theta_hat: ThetaParams,
    pub log_likelihood: f64,
    pub converged: bool,
    pub boundary: bool,
    pub iterations: usize,
    pub gradient_norm: f64,
    pub provenance: Option<Provenance>,
}

struct Profile<'a> {
    batch: &'a StatsBatch,
}

impl Profile<'_> {
    fn mu(&self, s: f64) -> f64 {
        let num = compensated_sum(self.batch.stats.iter().map(|st| st.u / (1.0 + s * st.v)));
        let den = compensated_sum(self.batch.stats.iter().map(|st| st.v / (1.0 + s * st.v)));
        num / den
    }

    fn theta(&self, s: f64) -> ThetaParams {
        ThetaParams {
            mu: self.mu(s),
            sigma0_sq: s,
        }
    }

    /// Derivative of the profile log-likelihood in `σ₀²`.
    fn slope(&self, s: f64) -> f64 {
        score_unchecked(self.batch, self.theta(s)).d_sigma0_sq
    }

    fn value(&self, s: f64) -> f64 {
        centered_log_likelihood(self.batch, self.theta(s))
    }
}

/// Scan resolution of the `σ₀²` ray, in points per decade.
const SCAN_PER_DECADE: f64 = 24.0;
/// Decades scanned below the upper end of the ray.
const SCAN_DECADES: f64 = 16.0;

/// Joint maximum-likelihood estimate of `(μ, σ₀²)`.
///
/// `μ` is profiled out exactly, leaving the variance score along the ray
/// `σ₀² >= 0`. The ray is scanned for sign changes from positive to
/// negative (local maxima of the profile), each is refined by Illinois
/// regula falsi, and the best candidate, including the boundary
/// `σ₀² = 0` when the score is nonpositive there, is returned.
pub fn estimate_joint(batch: &StatsBatch, config: &SolverConfig) -> Result<EffectEstimate> {
    nonempty(batch)?;
    if batch.len() < 2 {
        return Err(Error::Degenerate("joint estimation needs at least two trajectories".into()));
    }
    let informative: Vec<f64> = batch.stats.iter().filter(|s| s.v > 0.0).map(|s| s.u / s.v).collect();
    if informative.is_empty() {
        return Err(Error::Degenerate("every trajectory has v = 0".into()));
    }
    let profile = Profile { batch };
    let tol = config.score_tol_per_trajectory * batch.len() as f64;

    // Upper end of the ray: past the spread of the per-path ratios and the
    // largest per-path sampling variance 1/v the score is negative.
    let m = informative.len() as f64;
    let r_bar = informative.iter().sum::<f64>() / m;
    let spread = informative.iter().map(|r| (r - r_bar).powi(2)).sum::<f64>() / m;
    let max_inv_v = batch
        .stats
        .iter()
        .filter(|s| s.v > 0.0)
        .map(|s| 1.0 / s.v)
        .fold(0.0, f64::max);
    let mut upper = 4.0 * spread.max(max_inv_v).max(f64::MIN_POSITIVE);
    let mut upper_slope = profile.slope(upper);
    let mut doublings = 0;
    while upper_slope > 0.0 && doublings < 1000 {
        upper *= 2.0;
        upper_slope = profile.slope(upper);
        doublings += 1;
    }

    let points = (SCAN_DECADES * SCAN_PER_DECADE) as i32;
    let mut grid: Vec<f64> = vec![0.0];
    grid.extend((0..=points).rev().map(|j| upper * 10f64.powf(-(j as f64) / SCAN_PER_DECADE)));
    let slopes: Vec<f64> = grid.iter().map(|&s| profile.slope(s)).collect();

    struct Candidate {
        s: f64,
        value: f64,
        iterations: usize,
    }
    let mut candidates = Vec::new();
    if slopes[0] <= 0.0 {
        candidates.push(Candidate {
            s: 0.0,
            value: profile.value(0.0),
            iterations: 0,
        });
    }
    let mut iterations_total = 0;
    for j in 0..grid.len() - 1 {
        if slopes[j] > 0.0 && slopes[j + 1] <= 0.0 {
            let (s, it) = illinois(&profile, grid[j], grid[j + 1], slopes[j], slopes[j + 1], tol, config);
            iterations_total += it;
            candidates.push(Candidate {
                s,
                value: profile.value(s),
                iterations: it,
            });
        }
    }
    let best = candidates
        .into_iter()
        .reduce(|a, b| if b.value > a.value { b } else { a })
        .ok_or_else(|| Error::Experiment("variance score never turned negative on the scanned ray".into()))?;

    let theta_hat = profile.theta(best.s);
    let sc = score_unchecked(batch, theta_hat);
    let boundary = best.s == 0.0;
    let projected_var = if boundary { sc.d_sigma0_sq.max(0.0) } else { sc.d_sigma0_sq };
    let gradient_norm = sc.d_mu.hypot(projected_var);
    let converged = sc.d_mu.abs() < tol && projected_var.abs() < tol;
    let log_likelihood = total_log_likelihood(batch, theta_hat)?;
    log::debug!(
        "joint estimate {:?} after {} root-find iterations ({} overall)",
        theta_hat,
        best.iterations,
        iterations_total
    );
    Ok(EffectEstimate {
        theta_hat,
        log_likelihood,
        iterations: best.iterations,
        boundary,
        converged,
        gradient_norm,
        score: sc,
    })
}

fn illinois(
    profile: &Profile<'_>,
    mut a: f64,
    mut b: f64,
    mut fa: f64,
    mut fb: f64,
    tol: f64,
    config: &SolverConfig,
) -> (f64, usize) {
    // Invariant: fa > 0 >= fb.
    if fb == 0.0 {
        return (b, 0);
    }
    let mut side = 0i8;
    let mut x = b;
    for it in 1..=config.max_iterations {
        x = (a * fb - b * fa) / (fb - fa);
        if !(x > a && x < b) {
            x = 0.5 * (a + b);
        }
        let fx = profile.slope(x);
        if fx.abs() < tol {
            return (x, it);
        }
        if fx > 0.0 {
            a = x;
            fa = fx;
            if side == 1 {
                fb *= 0.5;
            }
            side = 1;
        } else {
            b = x;
            fb = fx;
            if side == -1 {
                fa *= 0.5;
            }
            side = -1;
        }
        if b - a <= config.param_tol * x.abs().max(f64::MIN_POSITIVE) {
            return (x, it);
        }
    }
    (x, config.max_iterations)
}

/// Conditional law `N(m, ω²)` of the effect given the path statistics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EffectPosterior {
    pub mean: f64,
    pub variance: f64,
}

pub fn effect_posterior(stats: &SufficientStats, theta: ThetaParams) -> Result<EffectPosterior> {
    check_stats(stats)?;
    if theta.sigma0_sq == 0.0 {
        return Err(Error::DegeneratePosterior { point: theta.mu });
    }
    let d = 1.0 + theta.sigma0_sq * stats.v;
    Ok(EffectPosterior {
        mean: (theta.mu + theta.sigma0_sq * stats.u) / d,
        variance: theta.sigma0_sq / d,
    })
}

/// Discrete `log Λ_H(T) = −Σ Q_k ΔM_k − ½ Σ Q_k² Δω_k`.
pub fn girsanov_log_density(qh: &[f64], martingale_increments: &[f64], omega_increments: &[f64]) -> Result<f64> {
    if qh.len() != martingale_increments.len() || qh.len() != omega_increments.len() {
        return Err(Error::contract(format!(
            "misaligned series: {} Q values, {} martingale increments, {} omega increments",
            qh.len(),
            martingale_increments.len(),
            omega_increments.len()
        )));
    }
    let linear = compensated_sum(qh.iter().zip(martingale_increments).map(|(q, dm)| q * dm));
    let quadratic = compensated_sum(qh.iter().zip(omega_increments).map(|(q, dw)| q * q * dw));
    Ok(-linear - 0.5 * quadratic)
}

/// [`girsanov_log_density`] from grid series, pairing `Q(t_k)` with the
/// forward increments over `[t_k, t_{k+1}]`.
pub fn girsanov_log_density_series(qh: &WeightedSeries, martingale: &WeightedSeries) -> Result<f64> {
    if qh.grid != martingale.grid || qh.values.len() != martingale.values.len() {
        return Err(Error::contract("Q and martingale series live on different grids"));
    }
    let n = qh.values.len() - 1;
    let d_omega: Vec<f64> = qh.weights.windows(2).map(|w| w[1] - w[0]).collect();
    girsanov_log_density(&qh.values[..n], &martingale.increments(), &d_omega)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn st(u: f64, v: f64) -> SufficientStats {
        SufficientStats::new(0, u, v, 0).unwrap()
    }

    fn th(mu: f64, s: f64) -> ThetaParams {
        ThetaParams::new(mu, s).unwrap()
    }

    #[test]
    fn log_lambda_examples() {
        let (u, v) = (1.3, 2.7);
        assert!((individual_log_lambda(&st(u, v), th(0.4, 0.0)).unwrap() - (0.4 * u - 0.08 * v)).abs() < 1e-15);
        let want = -0.5 * 2f64.ln() + 0.25;
        assert!((individual_log_lambda(&st(1.0, 1.0), th(0.0, 1.0)).unwrap() - want).abs() < 1e-15);
        let (mu, s) = (1.7, 0.6);
        let got = individual_log_lambda(&st(mu * v, v), th(mu, s)).unwrap();
        assert!((got - (-0.5 * (1.0 + s * v).ln() + 0.5 * mu * mu * v)).abs() < 1e-13);
        // v = 0 (which forces u = 0) is finite.
        assert_eq!(individual_log_lambda(&st(0.0, 0.0), th(3.0, 2.0)).unwrap(), 0.0);
        assert!(individual_log_lambda(&SufficientStats { trajectory_id: 0, u: 0.0, v: -1.0, n: 0 }, th(0.0, 1.0)).is_err());
    }

    #[test]
    fn matches_printed_form() {
        // −½log(1+σ²v) − v/(2(1+σ²v)) (μ − u/v)² + u²/(2v)
        for &(u, v, mu, s) in &[(1.2f64, 0.7f64, -0.3f64, 0.9f64), (-4.0, 11.0, 2.0, 0.1), (0.3, 0.05, 5.0, 3.0)] {
            let printed = -0.5 * (1.0 + s * v).ln() - v / (2.0 * (1.0 + s * v)) * (mu - u / v).powi(2) + u * u / (2.0 * v);
            let got = individual_log_lambda(&st(u, v), th(mu, s)).unwrap();
            assert!((got - printed).abs() < 1e-12 * printed.abs().max(1.0));
        }
    }

    #[test]
    fn totals_are_additive() {
        let one = StatsBatch::from_pairs(&[(0.8, 1.9)]).unwrap();
        let two = StatsBatch::from_pairs(&[(0.8, 1.9), (0.8, 1.9)]).unwrap();
        let t = th(0.5, 0.7);
        let single = individual_log_lambda(&one.stats[0], t).unwrap();
        assert_eq!(total_log_likelihood(&one, t).unwrap(), single);
        assert_eq!(total_log_likelihood(&two, t).unwrap(), 2.0 * single);
        assert!(total_log_likelihood(&StatsBatch::from_pairs(&[]).unwrap(), t).is_err());
    }

    #[test]
    fn score_zero_when_ratios_equal_mu() {
        let b = StatsBatch::from_pairs(&[(2.0 * 1.5, 1.5), (2.0 * 0.25, 0.25), (2.0 * 4.0, 4.0)]).unwrap();
        assert_eq!(score(&b, th(2.0, 0.8)).unwrap().d_mu, 0.0);
    }

    #[test]
    fn information_bounded_by_inverse_variance() {
        for &v in &[1e-6, 0.3, 5.0, 1e9] {
            for &s in &[0.01, 1.0, 100.0] {
                let info = v / (1.0 + s * v);
                assert!(info > 0.0 && info <= 1.0 / s);
            }
        }
        // Large σ₀²: the variance score is ½Σγ² − ½ΣI with both terms vanishing.
        let b = StatsBatch::from_pairs(&[(1.0, 1.0), (3.0, 1.0)]).unwrap();
        let sc = score(&b, th(2.0, 1e8)).unwrap();
        assert!(sc.d_sigma0_sq < 0.0 && sc.d_sigma0_sq.abs() < 1e-7);
    }

    #[test]
    fn fixed_sigma_estimator() {
        let b = StatsBatch::from_pairs(&[(3.0 * 0.5, 0.5), (3.0 * 2.0, 2.0), (3.0 * 7.0, 7.0)]).unwrap();
        for &s in &[0.0, 0.3, 10.0] {
            assert!((estimate_mu_fixed_sigma(&b, s).unwrap() - 3.0).abs() < 1e-14);
        }
        let b = StatsBatch::from_pairs(&[(1.1, 0.5), (-0.4, 2.0), (2.5, 7.0)]).unwrap();
        assert_eq!(estimate_mu_fixed_sigma(&b, 0.0).unwrap().to_bits(), estimate_fixed_effect(&b).unwrap().to_bits());
        let mu = estimate_mu_fixed_sigma(&b, 0.9).unwrap();
        assert!(score(&b, th(mu, 0.9)).unwrap().d_mu.abs() < 1e-14);
        let zero = StatsBatch::from_pairs(&[(0.0, 0.0), (0.0, 0.0)]).unwrap();
        assert!(matches!(estimate_mu_fixed_sigma(&zero, 1.0), Err(Error::Degenerate(_))));
        assert!(matches!(estimate_fixed_effect(&zero), Err(Error::Degenerate(_))));
        let single = StatsBatch::from_pairs(&[(1.75, 0.5)]).unwrap();
        assert_eq!(estimate_fixed_effect(&single).unwrap(), 3.5);
    }

    #[test]
    fn joint_boundary_for_dispersion_free_batch() {
        let b = StatsBatch::from_pairs(&[(1.5, 0.75), (4.0, 2.0), (0.5, 0.25), (8.0, 4.0)]).unwrap();
        let est = estimate_joint(&b, &SolverConfig::default()).unwrap();
        assert!(est.boundary);
        assert_eq!(est.theta_hat.sigma0_sq, 0.0);
        assert_eq!(est.theta_hat.mu, 2.0);
        assert!(est.score.d_sigma0_sq <= 0.0);
        assert!(est.converged);
    }

    #[test]
    fn joint_interior_solution_zeroes_score() {
        let b = StatsBatch::from_pairs(&[(5.0, 2.0), (-1.0, 1.5), (7.5, 3.0), (0.2, 0.5), (3.3, 1.0)]).unwrap();
        let cfg = SolverConfig::default();
        let est = estimate_joint(&b, &cfg).unwrap();
        assert!(!est.boundary && est.converged);
        assert!(est.score.d_mu.abs() < 1e-8 * 5.0);
        assert!(est.score.d_sigma0_sq.abs() < 1e-8 * 5.0);
        let fixed = estimate_fixed_effect(&b).unwrap();
        assert!(est.log_likelihood >= total_log_likelihood(&b, th(fixed, 0.0)).unwrap() - 1e-9);
    }

    #[test]
    fn joint_matches_common_v_closed_form() {
        let pairs: Vec<(f64, f64)> = [1.9, -0.3, 2.4, 0.7, 3.8, -1.2, 1.1].iter().map(|&u| (u, 1.3)).collect();
        let b = StatsBatch::from_pairs(&pairs).unwrap();
        let (mu, s) = estimate_common_v_closed_form(&b).unwrap();
        assert!(s > 0.0);
        let est = estimate_joint(&b, &SolverConfig::default()).unwrap();
        assert!((est.theta_hat.mu - mu).abs() < 1e-12);
        assert!((est.theta_hat.sigma0_sq - s).abs() < 1e-8);
    }

    #[test]
    fn joint_needs_two_trajectories() {
        let b = StatsBatch::from_pairs(&[(1.0, 1.0)]).unwrap();
        assert!(matches!(estimate_joint(&b, &SolverConfig::default()), Err(Error::Degenerate(_))));
    }

    #[test]
    fn posterior_examples() {
        let p = effect_posterior(&st(2.0, 1.0), th(0.0, 1.0)).unwrap();
        assert_eq!((p.mean, p.variance), (1.0, 0.5));
        let p = effect_posterior(&st(0.0, 0.0), th(1.5, 0.7)).unwrap();
        assert_eq!((p.mean, p.variance), (1.5, 0.7));
        let p = effect_posterior(&st(3e9, 1e9), th(0.0, 1e3)).unwrap();
        assert!((p.mean - 3.0).abs() < 1e-9 && (p.variance - 1e-9).abs() < 1e-18);
        assert!(matches!(
            effect_posterior(&st(1.0, 1.0), th(0.4, 0.0)),
            Err(Error::DegeneratePosterior { point }) if point == 0.4
        ));
    }

    #[test]
    fn girsanov_examples() {
        assert_eq!(girsanov_log_density(&[0.0; 4], &[0.3, -0.1, 0.2, 0.5], &[0.25; 4]).unwrap(), 0.0);
        let dm = [0.3, -0.1, 0.2, 0.5];
        let q = 0.7;
        let got = girsanov_log_density(&[q; 4], &dm, &[0.25; 4]).unwrap();
        let want = -q * dm.iter().sum::<f64>() - 0.5 * q * q * 1.0;
        assert!((got - want).abs() < 1e-15);
        assert!(girsanov_log_density(&[q; 3], &dm, &[0.25; 4]).is_err());
    }
}
