//! Bootstrap two-sample test of mm-space isomorphism.
//!
//! Observed statistic: `sqrt(n) * W1` between the two subsampled
//! DTM-signatures, each DTM taken against its full N-point measure. The
//! critical value is the upper-alpha quantile of pooled bootstrap
//! replicates: per replicate and per space, two independent n-resamples
//! drawn with replacement from the cached DTM values, pooled across the two
//! spaces to realize the half/half mixture of the resampling laws.

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::dtm::dtm_field;
use crate::error::{Error, Result};
use crate::seeding::{derive_seed, domain, stream_rng};
use crate::signature::signature_subsample;
use crate::space::{FiniteMeasureSpace, SubsampleIndex};
use crate::synth::{sample, GeneratorSpec};
use crate::wasserstein::{w1, Discrete1D};

/// Bootstrap distributions whose interquartile range falls below this are
/// flagged as degenerate (pragmatic threshold; the limit law loses its CDF
/// continuity in such cases and the test is unreliable).
pub const DEGENERATE_IQR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TestParams {
    pub m: f64,
    pub n: usize,
    pub n_mc: usize,
    pub alpha: f64,
    pub seed: u64,
    /// Optional exponent used by [`recommend_subsample`]; informational here.
    pub rho: Option<f64>,
}

impl Default for TestParams {
    fn default() -> Self {
        TestParams {
            m: 0.05,
            n: 20,
            n_mc: 1000,
            alpha: 0.05,
            seed: 0,
            rho: None,
        }
    }
}

impl TestParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.m > 0.0 && self.m <= 1.0) {
            return Err(Error::MassOutOfRange(self.m));
        }
        if self.n == 0 {
            return Err(Error::InvalidParams("subsample size n must be >= 1".into()));
        }
        if self.n_mc == 0 {
            return Err(Error::InvalidParams("N_MC must be >= 1".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::AlphaOutOfRange(self.alpha));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KsOutcome {
    pub statistic: f64,
    pub p_value: f64,
}

/// Full outcome of one test run. Serializes to the documented JSON schema;
/// the raw bootstrap sample is kept in memory but not emitted.
#[derive(Debug, Clone, Serialize)]
pub struct TestReport {
    pub statistic: f64,
    pub critical_value: f64,
    pub p_value: f64,
    pub reject: bool,
    pub alpha: f64,
    pub m: f64,
    pub n: usize,
    pub n_mc: usize,
    pub seed: u64,
    pub ks: KsOutcome,
    pub warnings: Vec<String>,
    #[serde(skip)]
    pub boot: Vec<f64>,
}

fn statistic_from_values(vals_p: &[f64], vals_q: &[f64]) -> Result<f64> {
    debug_assert_eq!(vals_p.len(), vals_q.len());
    let n = vals_p.len() as f64;
    let a = Discrete1D::from_uniform(vals_p)?;
    let b = Discrete1D::from_uniform(vals_q)?;
    Ok(n.sqrt() * w1(&a, &b))
}

/// Observed test statistic for explicit subsamples:
/// `sqrt(n) * W1(sig(P | sub_p), sig(Q | sub_q))`.
pub fn test_statistic(
    p: &FiniteMeasureSpace,
    q: &FiniteMeasureSpace,
    sub_p: &SubsampleIndex,
    sub_q: &SubsampleIndex,
    m: f64,
) -> Result<f64> {
    if sub_p.len() != sub_q.len() {
        return Err(Error::InvalidSubsample(format!(
            "subsample sizes differ: {} vs {}",
            sub_p.len(),
            sub_q.len()
        )));
    }
    let sig_p = signature_subsample(p, sub_p, m)?;
    let sig_q = signature_subsample(q, sub_q, m)?;
    Ok((sub_p.len() as f64).sqrt() * w1(sig_p.dist(), sig_q.dist()))
}

/// DTM values of a space against itself, sorted ascending.
///
/// Sorting makes every later rank-indexed draw invariant under relabelings
/// of the input points: a permuted space yields the identical cache, hence
/// bit-identical statistics and decisions.
fn sorted_dtm_cache(space: &FiniteMeasureSpace, m: f64) -> Result<Vec<f64>> {
    let mut values = dtm_field(space, m)?.into_values();
    values.sort_by(|a, b| a.total_cmp(b));
    Ok(values)
}

fn bootstrap_half(cache: &[f64], n: usize, n_mc: usize, seed: u64, dom: u64) -> Result<Vec<f64>> {
    (0..n_mc)
        .into_par_iter()
        .map(|j| {
            let mut rng = stream_rng(seed, dom, j as u64);
            let xs: Vec<f64> = (0..n)
                .map(|_| cache[rng.random_range(0..cache.len())])
                .collect();
            let ys: Vec<f64> = (0..n)
                .map(|_| cache[rng.random_range(0..cache.len())])
                .collect();
            statistic_from_values(&xs, &ys)
        })
        .collect()
}

fn bootstrap_from_caches(
    cache_p: &[f64],
    cache_q: &[f64],
    params: &TestParams,
) -> Result<Vec<f64>> {
    let mut boot = bootstrap_half(cache_p, params.n, params.n_mc, params.seed, domain::BOOT_P)?;
    boot.extend(bootstrap_half(
        cache_q,
        params.n,
        params.n_mc,
        params.seed,
        domain::BOOT_Q,
    )?);
    Ok(boot)
}

/// Pooled bootstrap replicates, `2 * N_MC` values: for each replicate and
/// each space, two independent with-replacement n-resamples of that space's
/// cached DTM values, mapped through `sqrt(n) * W1`.
///
/// Replicates run in parallel on per-replicate RNG streams; output is
/// bit-identical for a fixed seed regardless of worker count.
pub fn bootstrap_distribution(
    p: &FiniteMeasureSpace,
    q: &FiniteMeasureSpace,
    params: &TestParams,
) -> Result<Vec<f64>> {
    params.validate()?;
    let cache_p = sorted_dtm_cache(p, params.m)?;
    let cache_q = sorted_dtm_cache(q, params.m)?;
    bootstrap_from_caches(&cache_p, &cache_q, params)
}

/// Upper-alpha quantile (`inf { x : F(x) >= 1 - alpha }`) of a sorted sample.
fn sorted_upper_quantile(sorted: &[f64], alpha: f64) -> f64 {
    let l = sorted.len();
    let k = ((1.0 - alpha) * l as f64).ceil() as usize;
    sorted[k.clamp(1, l) - 1]
}

/// Run the full bootstrap test.
///
/// The two observed subsamples are drawn independently and without
/// replacement (realizing the independent `n` / `N - n` splits); bootstrap
/// resamples are drawn with replacement from the full caches. Draws index
/// ranks of the sorted caches, which for i.i.d. samples has exactly the law
/// of drawing points, while making the whole pipeline invariant under
/// relabelings of the inputs.
pub fn run_test(
    p: &FiniteMeasureSpace,
    q: &FiniteMeasureSpace,
    params: &TestParams,
) -> Result<TestReport> {
    params.validate()?;
    let (np, nq) = (p.len(), q.len());
    if params.n > np.min(nq) {
        return Err(Error::InvalidParams(format!(
            "subsample size {} exceeds sample sizes {np}, {nq}",
            params.n
        )));
    }

    let cache_p = sorted_dtm_cache(p, params.m)?;
    let cache_q = sorted_dtm_cache(q, params.m)?;

    let sub_p = SubsampleIndex::sample(
        params.n,
        np,
        &mut stream_rng(params.seed, domain::SUBSAMPLE, 0),
    )?;
    let sub_q = SubsampleIndex::sample(
        params.n,
        nq,
        &mut stream_rng(params.seed, domain::SUBSAMPLE, 1),
    )?;
    let vals_p: Vec<f64> = sub_p.indices().iter().map(|&i| cache_p[i]).collect();
    let vals_q: Vec<f64> = sub_q.indices().iter().map(|&i| cache_q[i]).collect();
    let statistic = statistic_from_values(&vals_p, &vals_q)?;

    let boot = bootstrap_from_caches(&cache_p, &cache_q, params)?;
    let mut sorted = boot.clone();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let critical_value = sorted_upper_quantile(&sorted, params.alpha);
    let exceed = sorted.iter().filter(|&&b| b >= statistic).count();
    let p_value = (1 + exceed) as f64 / (1 + sorted.len()) as f64;
    let reject = statistic >= critical_value;

    let mut warnings = Vec::new();
    let iqr = sorted_upper_quantile(&sorted, 0.25) - sorted_upper_quantile(&sorted, 0.75);
    if iqr < DEGENERATE_IQR {
        warnings.push(format!(
            "degenerate bootstrap distribution (interquartile range {iqr:e} < {DEGENERATE_IQR:e})"
        ));
    }

    let ks = ks_baseline(p, q, params.seed)?;

    Ok(TestReport {
        statistic,
        critical_value,
        p_value,
        reject,
        alpha: params.alpha,
        m: params.m,
        n: params.n,
        n_mc: params.n_mc,
        seed: params.seed,
        ks,
        warnings,
        boot,
    })
}

/// Two-sample Kolmogorov-Smirnov statistic `sup_t |F1(t) - F2(t)|`.
pub fn ks_statistic(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(|x, y| x.total_cmp(y));
    b.sort_by(|x, y| x.total_cmp(y));
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let mut i = 0;
    let mut j = 0;
    let mut sup: f64 = 0.0;
    while i < a.len() || j < b.len() {
        let t = match (a.get(i), b.get(j)) {
            (Some(&x), Some(&y)) => x.min(y),
            (Some(&x), None) => x,
            (None, Some(&y)) => y,
            (None, None) => unreachable!(),
        };
        while i < a.len() && a[i] == t {
            i += 1;
        }
        while j < b.len() && b[j] == t {
            j += 1;
        }
        sup = sup.max((i as f64 / na - j as f64 / nb).abs());
    }
    sup
}

/// Survival function of the Kolmogorov distribution,
/// `Q(z) = 2 sum_k (-1)^{k-1} exp(-2 k^2 z^2)`, with the theta-inversion
/// form for small `z`.
pub fn kolmogorov_survival(z: f64) -> f64 {
    if z < 0.2 {
        return 1.0;
    }
    if z < 0.755 {
        let v = 1.0 / (z * z);
        let w = (2.0 * std::f64::consts::PI).sqrt();
        let c1 = -std::f64::consts::PI * std::f64::consts::PI / 8.0;
        let p = w * ((c1 * v).exp() + (9.0 * c1 * v).exp() + (25.0 * c1 * v).exp()) / z;
        return (1.0 - p).clamp(0.0, 1.0);
    }
    if z >= 6.8116 {
        return 0.0;
    }
    let z2 = z * z;
    let s = (-2.0 * z2).exp() - (-8.0 * z2).exp() + (-18.0 * z2).exp() - (-32.0 * z2).exp();
    (2.0 * s).clamp(0.0, 1.0)
}

/// Asymptotic two-sample KS p-value for sample sizes `n1`, `n2`.
pub fn ks_asymptotic_pvalue(d: f64, n1: usize, n2: usize) -> f64 {
    let ne = (n1 as f64 * n2 as f64) / (n1 + n2) as f64;
    kolmogorov_survival(ne.sqrt() * d)
}

/// Baseline: KS test between the two intra-space distance distributions,
/// from `floor(N/2)` disjoint point pairs per space (seeded shuffle) so the
/// distance samples are independent.
pub fn ks_baseline(
    p: &FiniteMeasureSpace,
    q: &FiniteMeasureSpace,
    seed: u64,
) -> Result<KsOutcome> {
    let dp = paired_distances(p, seed, domain::KS_P)?;
    let dq = paired_distances(q, seed, domain::KS_Q)?;
    let statistic = ks_statistic(&dp, &dq);
    let p_value = ks_asymptotic_pvalue(statistic, dp.len(), dq.len());
    Ok(KsOutcome { statistic, p_value })
}

fn paired_distances(space: &FiniteMeasureSpace, seed: u64, dom: u64) -> Result<Vec<f64>> {
    let n = space.len();
    if n < 2 {
        return Err(Error::TooFewPoints { needed: 2, got: n });
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut stream_rng(seed, dom, 0));
    (0..n / 2)
        .map(|t| space.pairwise_distance(order[2 * t], order[2 * t + 1]))
        .collect()
}

/// Monte Carlo rejection-rate estimate.
#[derive(Debug, Clone, Serialize)]
pub struct LevelPowerReport {
    pub reps: usize,
    pub dtm_rejections: usize,
    pub dtm_rate: f64,
    /// 95% Wilson score interval for the DTM rejection rate.
    pub dtm_ci: (f64, f64),
    pub ks_rejections: usize,
    pub ks_rate: f64,
    pub ks_ci: (f64, f64),
}

fn wilson_ci(k: usize, n: usize) -> (f64, f64) {
    let z = 1.959963984540054_f64; // 97.5% normal quantile
    let nf = n as f64;
    let p = k as f64 / nf;
    let z2 = z * z;
    let denom = 1.0 + z2 / nf;
    let center = (p + z2 / (2.0 * nf)) / denom;
    let half = z * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt() / denom;
    // The score interval touches the boundary exactly at k = 0 and k = n;
    // pin those so rounding cannot push the bound past the estimate.
    let lo = if k == 0 { 0.0 } else { (center - half).max(0.0) };
    let hi = if k == n { 1.0 } else { (center + half).min(1.0) };
    (lo, hi)
}

/// Repeat the full pipeline on fresh data: per repetition, draw new samples
/// from both generators, run the DTM test and the KS baseline, and report
/// rejection rates with 95% binomial confidence intervals.
pub fn estimate_level_power(
    gen_p: &GeneratorSpec,
    gen_q: &GeneratorSpec,
    params: &TestParams,
    reps: usize,
) -> Result<LevelPowerReport> {
    if reps == 0 {
        return Err(Error::InvalidParams("reps must be >= 1".into()));
    }
    params.validate()?;
    let outcomes: Vec<(bool, bool)> = (0..reps)
        .into_par_iter()
        .map(|r| {
            let spec_p = GeneratorSpec {
                seed: derive_seed(params.seed, domain::MC_GEN_P, r as u64),
                ..gen_p.clone()
            };
            let spec_q = GeneratorSpec {
                seed: derive_seed(params.seed, domain::MC_GEN_Q, r as u64),
                ..gen_q.clone()
            };
            let rep_params = TestParams {
                seed: derive_seed(params.seed, domain::MC_TEST, r as u64),
                ..*params
            };
            let report = run_test(&sample(&spec_p)?, &sample(&spec_q)?, &rep_params)?;
            Ok((report.reject, report.ks.p_value < params.alpha))
        })
        .collect::<Result<_>>()?;
    let dtm_rejections = outcomes.iter().filter(|o| o.0).count();
    let ks_rejections = outcomes.iter().filter(|o| o.1).count();
    Ok(LevelPowerReport {
        reps,
        dtm_rejections,
        dtm_rate: dtm_rejections as f64 / reps as f64,
        dtm_ci: wilson_ci(dtm_rejections, reps),
        ks_rejections,
        ks_rate: ks_rejections as f64 / reps as f64,
        ks_ci: wilson_ci(ks_rejections, reps),
    })
}

/// Regularity assumption behind the subsample-size rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regularity {
    /// Compactly supported measures: requires `rho > max(d, 2) / 2`.
    General,
    /// (a,b)-standard measures: `rho > 1` suffices.
    Standard,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SubsampleRecommendation {
    pub n: usize,
    pub rho: f64,
}

/// Suggested subsample size `n = max(2, floor(N^{1/rho}))`, with `rho`
/// chosen half a unit inside the admissible region for the given
/// regularity class.
pub fn recommend_subsample(
    n_total: usize,
    d: usize,
    regularity: Regularity,
) -> Result<SubsampleRecommendation> {
    if n_total < 2 {
        return Err(Error::TooFewPoints {
            needed: 2,
            got: n_total,
        });
    }
    let rho = match regularity {
        Regularity::General => (d.max(2) as f64) / 2.0 + 0.5,
        Regularity::Standard => 1.5,
    };
    let n = ((n_total as f64).powf(1.0 / rho).floor() as usize).max(2);
    Ok(SubsampleRecommendation { n, rho })
}
