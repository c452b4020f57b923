//! Moments, normality, t, Welch, Mann-Whitney and correlation.

mod sample;
pub mod special;

pub use sample::{SampleMeta, SampleSet};
pub use special::{chi2_cdf, chi2_sf, normal_cdf, t_cdf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_ZETA: f64 = 0.05;

/// D'Agostino's transforms are unreliable below this sample size.
pub const NORMALITY_MIN_SAMPLES: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Alternative {
    TwoSided,
    Less,
    Greater,
}

impl Alternative {
    pub fn tag(&self) -> &'static str {
        match self {
            Alternative::TwoSided => "two_sided",
            Alternative::Less => "less",
            Alternative::Greater => "greater",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub statistic: f64,
    pub p_value: f64,
    pub alternative: Alternative,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dof: Option<f64>,
    pub zeta: f64,
    /// p ≤ ζ.
    pub reject: bool,
}

impl TestResult {
    fn new(statistic: f64, p: f64, alternative: Alternative, dof: Option<f64>, zeta: f64) -> Self {
        let p_value = p.clamp(0.0, 1.0);
        Self {
            statistic,
            p_value,
            alternative,
            dof,
            zeta,
            reject: p_value <= zeta,
        }
    }
}

fn check_zeta(zeta: f64) -> Result<()> {
    if zeta > 0.0 && zeta < 1.0 {
        Ok(())
    } else {
        Err(Error::Domain {
            name: "zeta",
            value: zeta,
            range: "(0, 1)",
        })
    }
}

fn need(xs: &[f64], n: usize) -> Result<()> {
    if xs.len() < n {
        Err(Error::TooSmall {
            needed: n,
            got: xs.len(),
        })
    } else {
        Ok(())
    }
}

pub fn mean(xs: &[f64]) -> Result<f64> {
    if xs.is_empty() {
        return Err(Error::Empty);
    }
    Ok(xs.iter().sum::<f64>() / xs.len() as f64)
}

/// i-th central moment with divisor M.
pub fn central_moment(xs: &[f64], i: i32) -> Result<f64> {
    need(xs, 2)?;
    let m = mean(xs)?;
    Ok(xs.iter().map(|x| (x - m).powi(i)).sum::<f64>() / xs.len() as f64)
}

fn moments_234(xs: &[f64]) -> Result<(f64, f64, f64)> {
    need(xs, 2)?;
    let m = mean(xs)?;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for &x in xs {
        let d = x - m;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    let n = xs.len() as f64;
    if m2 == 0.0 {
        return Err(Error::Degenerate("zero variance"));
    }
    Ok((m2 / n, m3 / n, m4 / n))
}

/// g₁ = m₃/m₂^{3/2}.
pub fn skewness(xs: &[f64]) -> Result<f64> {
    let (m2, m3, _) = moments_234(xs)?;
    Ok(m3 / m2.powf(1.5))
}

/// g₂ = m₄/m₂², equal to 3 for a normal population.
pub fn kurtosis(xs: &[f64]) -> Result<f64> {
    let (m2, _, m4) = moments_234(xs)?;
    Ok(m4 / (m2 * m2))
}

/// g₂ − 3.
pub fn excess_kurtosis(xs: &[f64]) -> Result<f64> {
    Ok(kurtosis(xs)? - 3.0)
}

/// Standard deviation with divisor M − 1.
pub fn sample_std(xs: &[f64]) -> Result<f64> {
    need(xs, 2)?;
    let m = mean(xs)?;
    let ss: f64 = xs.iter().map(|x| (x - m) * (x - m)).sum();
    Ok((ss / (xs.len() - 1) as f64).sqrt())
}

/// Z₁ for skewness and Z₂ for kurtosis, each approximately N(0, 1) under normality.
pub fn dagostino_components(xs: &[f64]) -> Result<(f64, f64)> {
    need(xs, NORMALITY_MIN_SAMPLES)?;
    let n = xs.len() as f64;
    let (m2, m3, m4) = moments_234(xs)?;
    let g1 = m3 / m2.powf(1.5);
    let g2_excess = m4 / (m2 * m2) - 3.0;

    let var_g1 = 6.0 * (n - 2.0) / ((n + 1.0) * (n + 3.0));
    let kurt_g1 = 36.0 * (n - 7.0) * (n * n + 2.0 * n - 5.0)
        / ((n - 2.0) * (n + 5.0) * (n + 7.0) * (n + 9.0));
    let w2 = (2.0 * kurt_g1 + 4.0).sqrt() - 1.0;
    let delta = 1.0 / (0.5 * w2.ln()).sqrt();
    let z1 = delta * (g1 * ((w2 - 1.0) / (2.0 * var_g1)).sqrt()).asinh();

    let mean_g2 = -6.0 / (n + 1.0);
    let var_g2 = 24.0 * n * (n - 2.0) * (n - 3.0) / ((n + 1.0).powi(2) * (n + 3.0) * (n + 5.0));
    let skew_g2 = 6.0 * (n * n - 5.0 * n + 2.0) / ((n + 7.0) * (n + 9.0))
        * (6.0 * (n + 3.0) * (n + 5.0) / (n * (n - 2.0) * (n - 3.0))).sqrt();
    let a = 6.0 + 8.0 / skew_g2 * (2.0 / skew_g2 + (1.0 + 4.0 / (skew_g2 * skew_g2)).sqrt());
    let x = (g2_excess - mean_g2) / var_g2.sqrt();
    let ratio = (1.0 - 2.0 / a) / (1.0 + x * (2.0 / (a - 4.0)).sqrt());
    let z2 = (4.5 * a).sqrt() * (1.0 - 2.0 / (9.0 * a) - ratio.cbrt());
    Ok((z1, z2))
}

/// k² = Z₁² + Z₂², p from the χ²(2) tail.
pub fn dagostino_k2(xs: &[f64], zeta: f64) -> Result<TestResult> {
    check_zeta(zeta)?;
    let (z1, z2) = dagostino_components(xs)?;
    let k2 = z1 * z1 + z2 * z2;
    Ok(TestResult::new(k2, chi2_sf(k2, 2.0)?, Alternative::TwoSided, Some(2.0), zeta))
}

fn p_from_t(t: f64, dof: f64, alternative: Alternative) -> Result<f64> {
    Ok(match alternative {
        Alternative::Less => t_cdf(t, dof)?,
        Alternative::Greater => t_cdf(-t, dof)?,
        Alternative::TwoSided => (2.0 * t_cdf(-t.abs(), dof)?).min(1.0),
    })
}

/// t = (X̄ − μ₀)√M/σ̂ with M − 1 degrees of freedom.
pub fn t_test_one_sample(xs: &[f64], mu0: f64, alternative: Alternative, zeta: f64) -> Result<TestResult> {
    check_zeta(zeta)?;
    need(xs, 2)?;
    let sd = sample_std(xs)?;
    if sd == 0.0 {
        return Err(Error::Degenerate("zero variance"));
    }
    let n = xs.len() as f64;
    let t = (mean(xs)? - mu0) * n.sqrt() / sd;
    let dof = n - 1.0;
    Ok(TestResult::new(t, p_from_t(t, dof, alternative)?, alternative, Some(dof), zeta))
}

/// Unequal-variance t with Welch–Satterthwaite degrees of freedom; `Less` means E[X] < E[Y].
pub fn welch_t_test(x: &[f64], y: &[f64], alternative: Alternative, zeta: f64) -> Result<TestResult> {
    check_zeta(zeta)?;
    need(x, 2)?;
    need(y, 2)?;
    let (nx, ny) = (x.len() as f64, y.len() as f64);
    let vx = sample_std(x)?.powi(2) / nx;
    let vy = sample_std(y)?.powi(2) / ny;
    if vx + vy == 0.0 {
        return Err(Error::Degenerate("both samples have zero variance"));
    }
    let t = (mean(x)? - mean(y)?) / (vx + vy).sqrt();
    let dof = (vx + vy).powi(2) / (vx * vx / (nx - 1.0) + vy * vy / (ny - 1.0));
    Ok(TestResult::new(t, p_from_t(t, dof, alternative)?, alternative, Some(dof), zeta))
}

/// (𝒰(X,Y), 𝒰(Y,X)) where 𝒰(X,Y) counts pairs with x > y and ties as ½.
pub fn u_statistics(x: &[f64], y: &[f64]) -> Result<(f64, f64)> {
    if x.is_empty() || y.is_empty() {
        return Err(Error::Empty);
    }
    let ranks = pooled_ranks(x, y);
    let n1 = x.len() as f64;
    let rank_sum_x: f64 = ranks.ranks[..x.len()].iter().sum();
    let u_xy = rank_sum_x - n1 * (n1 + 1.0) / 2.0;
    Ok((u_xy, n1 * y.len() as f64 - u_xy))
}

struct PooledRanks {
    /// Midranks of x followed by y.
    ranks: Vec<f64>,
    /// Σ (t³ − t) over tie groups.
    tie_term: f64,
}

fn pooled_ranks(x: &[f64], y: &[f64]) -> PooledRanks {
    let pooled: Vec<f64> = x.iter().chain(y).copied().collect();
    let mut order: Vec<usize> = (0..pooled.len()).collect();
    order.sort_by(|&a, &b| pooled[a].total_cmp(&pooled[b]));
    let mut ranks = vec![0.0; pooled.len()];
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && pooled[order[j]] == pooled[order[i]] {
            j += 1;
        }
        let mid = (i + j + 1) as f64 / 2.0;
        for &k in &order[i..j] {
            ranks[k] = mid;
        }
        let t = (j - i) as f64;
        tie_term += t * t * t - t;
        i = j;
    }
    PooledRanks { ranks, tie_term }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MannWhitney {
    pub u_xy: f64,
    pub u_yx: f64,
    /// Outcome with `statistic` = min(𝒰(X,Y), 𝒰(Y,X)).
    pub result: TestResult,
}

/// Normal approximation with tie and continuity corrections.
/// `Less` tests X stochastically smaller than Y.
pub fn mann_whitney_u(x: &[f64], y: &[f64], alternative: Alternative, zeta: f64) -> Result<MannWhitney> {
    check_zeta(zeta)?;
    if x.is_empty() || y.is_empty() {
        return Err(Error::Empty);
    }
    let ranks = pooled_ranks(x, y);
    let (n1, n2) = (x.len() as f64, y.len() as f64);
    let n = n1 + n2;
    let u_xy: f64 = ranks.ranks[..x.len()].iter().sum::<f64>() - n1 * (n1 + 1.0) / 2.0;
    let u_yx = n1 * n2 - u_xy;
    let centre = n1 * n2 / 2.0;
    let var = n1 * n2 / 12.0 * ((n + 1.0) - ranks.tie_term / (n * (n - 1.0)).max(1.0));
    let p = if var <= 0.0 {
        1.0
    } else {
        let sd = var.sqrt();
        match alternative {
            Alternative::Less => normal_cdf((u_xy - centre + 0.5) / sd),
            Alternative::Greater => normal_cdf(-(u_xy - centre - 0.5) / sd),
            Alternative::TwoSided => {
                let z = ((u_xy - centre).abs() - 0.5).max(0.0) / sd;
                2.0 * normal_cdf(-z)
            }
        }
    };
    Ok(MannWhitney {
        u_xy,
        u_yx,
        result: TestResult::new(u_xy.min(u_yx), p, alternative, None, zeta),
    })
}

/// Product-moment correlation.
pub fn pearson_correlation(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    need(x, 2)?;
    let (mx, my) = (mean(x)?, mean(y)?);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::Degenerate("zero variance"));
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Independent shuffles of both arrays: X uses stream 0, Y stream 1 of `shuffle_seed`.
pub fn shuffled_pair(x: &[f64], y: &[f64], shuffle_seed: u64) -> (Vec<f64>, Vec<f64>) {
    let mut xs = x.to_vec();
    let mut ys = y.to_vec();
    let mut rng = ChaCha8Rng::seed_from_u64(shuffle_seed);
    xs.shuffle(&mut rng);
    let mut rng = ChaCha8Rng::seed_from_u64(shuffle_seed);
    rng.set_stream(1);
    ys.shuffle(&mut rng);
    (xs, ys)
}

/// Element-wise X − Y after independent shuffles.
pub fn difference_distribution(x: &SampleSet, y: &SampleSet, shuffle_seed: u64) -> Result<SampleSet> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    let (xs, ys) = shuffled_pair(&x.values, &y.values, shuffle_seed);
    let values = xs.iter().zip(&ys).map(|(a, b)| a - b).collect();
    SampleSet::new(
        values,
        SampleMeta {
            label: format!("{} - {}", x.meta.label, y.meta.label),
            parents: vec![x.meta.label.clone(), y.meta.label.clone()],
            shuffle_seed: Some(shuffle_seed),
            metric: x.meta.metric,
            initial: x.meta.initial,
            seed: x.meta.seed,
            horizon: x.meta.horizon,
            ..SampleMeta::default()
        },
    )
}

/// Descriptive statistics in the layout of the empirical-distribution tables;
/// kurtosis is reported in excess form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub std: f64,
    pub min: f64,
    pub max: f64,
    pub skewness: f64,
    pub kurtosis: f64,
}

pub fn describe(xs: &[f64]) -> Result<Summary> {
    Ok(Summary {
        mean: mean(xs)?,
        std: sample_std(xs)?,
        min: xs.iter().copied().fold(f64::INFINITY, f64::min),
        max: xs.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        skewness: skewness(xs)?,
        kurtosis: excess_kurtosis(xs)?,
    })
}
