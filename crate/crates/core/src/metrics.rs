//! Scalar system-based performance metrics and the relations among them.

use serde::{Deserialize, Serialize};

use crate::chain::{self, classify_chain, stationary_distribution};
use crate::error::{check_discount, Error, Result};
use crate::linalg::Vector;
use crate::mdp::{apply_policy, MdpModel, Policy, PolicyModel};
use crate::solvers::{evaluate_average, evaluate_discounted};

/// Relative tolerance of the η^α = η/(1−α) check in [`metric_report`].
pub const LAURENT_RTOL: f64 = 1e-8;

const PROBABILITY_TOL: f64 = 1e-9;

fn check_probability(phi: &[f64]) -> Result<()> {
    let sum: f64 = phi.iter().sum();
    if phi.iter().any(|&p| !(p >= -PROBABILITY_TOL)) || (sum - 1.0).abs() > PROBABILITY_TOL {
        return Err(Error::Domain {
            name: "sum(phi)",
            value: sum,
            range: "probability vectors",
        });
    }
    Ok(())
}

/// Stationary metric φᵀJ.
pub fn eta(phi: &[f64], values: &[f64]) -> Result<f64> {
    if phi.len() != values.len() {
        return Err(Error::LengthMismatch {
            left: phi.len(),
            right: values.len(),
        });
    }
    Ok(phi.iter().zip(values).map(|(p, v)| p * v).sum())
}

/// Uniform metric: the mean of J.
pub fn nu(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::Empty);
    }
    Ok(values.iter().sum::<f64>() / values.len() as f64)
}

/// Hybrid metric θη + (1 − θ)ν.
pub fn xi(eta: f64, nu: f64, theta: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&theta) {
        return Err(Error::Domain {
            name: "theta",
            value: theta,
            range: "[0, 1]",
        });
    }
    Ok(theta * eta + (1.0 - theta) * nu)
}

/// η/(1 − α); valid for unichain policies.
pub fn eta_discounted_from_average(eta_avg_per_period: f64, alpha: f64) -> Result<f64> {
    check_discount(alpha)?;
    Ok(eta_avg_per_period / (1.0 - alpha))
}

/// φᵀ(I − αP + αP*)⁻¹C + α/(1 − α)·φᵀP*C for any chain and any probability vector φ.
pub fn eta_discounted_multichain(pm: &PolicyModel, phi: &[f64], alpha: f64) -> Result<f64> {
    check_discount(alpha)?;
    if phi.len() != pm.n_states() {
        return Err(Error::LengthMismatch {
            left: phi.len(),
            right: pm.n_states(),
        });
    }
    check_probability(phi)?;
    let star = chain::cesaro_limit(&pm.transition)?;
    let m = chain::fundamental_matrix_alpha_with(&pm.transition, &star, alpha)?;
    let phi = Vector::from_column_slice(phi);
    let first = phi.dot(&(m * &pm.cost));
    let second = phi.dot(&(star * &pm.cost));
    Ok(first + alpha / (1.0 - alpha) * second)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscountMetrics {
    pub alpha: f64,
    pub eta_disc: f64,
    pub nu_disc: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HybridMetric {
    pub theta: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub policy: Policy,
    pub eta_avg: f64,
    pub nu_avg: f64,
    pub per_alpha: Vec<DiscountMetrics>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub xi: Option<HybridMetric>,
}

pub fn metric_report(
    model: &MdpModel,
    policy: &Policy,
    alphas: &[f64],
    theta: Option<f64>,
) -> Result<MetricReport> {
    metric_report_with_phi(model, policy, alphas, theta, None)
}

/// As [`metric_report`]; multichain policies need an initial distribution `phi`.
pub fn metric_report_with_phi(
    model: &MdpModel,
    policy: &Policy,
    alphas: &[f64],
    theta: Option<f64>,
    phi: Option<&[f64]>,
) -> Result<MetricReport> {
    for &a in alphas {
        check_discount(a)?;
    }
    let pm = apply_policy(model, policy)?;
    let structure = classify_chain(&pm.transition);
    let mut per_alpha = Vec::with_capacity(alphas.len());

    let (eta_avg, nu_avg) = if structure.is_unichain {
        let gain = evaluate_average(&pm, 0)?.gain;
        let stationary = stationary_distribution(&pm.transition)?;
        for &alpha in alphas {
            let values = evaluate_discounted(&pm, alpha)?.values;
            let eta_disc = eta(stationary.as_slice(), values.as_slice())?;
            let expected = eta_discounted_from_average(gain, alpha)?;
            if (eta_disc - expected).abs() > LAURENT_RTOL * expected.abs().max(1.0) {
                return Err(Error::Invariant(format!(
                    "eta at alpha {alpha}: {eta_disc} differs from gain/(1-alpha) = {expected}"
                )));
            }
            per_alpha.push(DiscountMetrics {
                alpha,
                eta_disc,
                nu_disc: nu(values.as_slice())?,
            });
        }
        (gain, gain)
    } else {
        let phi = phi.ok_or(Error::NotUnichain)?;
        check_probability(phi)?;
        let star = chain::cesaro_limit(&pm.transition)?;
        let limit_cost = star * &pm.cost;
        for &alpha in alphas {
            let values = evaluate_discounted(&pm, alpha)?.values;
            per_alpha.push(DiscountMetrics {
                alpha,
                eta_disc: eta_discounted_multichain(&pm, phi, alpha)?,
                nu_disc: nu(values.as_slice())?,
            });
        }
        (eta(phi, limit_cost.as_slice())?, nu(limit_cost.as_slice())?)
    };

    let xi = theta
        .map(|t| xi(eta_avg, nu_avg, t).map(|value| HybridMetric { theta: t, value }))
        .transpose()?;
    Ok(MetricReport {
        policy: policy.clone(),
        eta_avg,
        nu_avg,
        per_alpha,
        xi,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MetricFamily {
    /// ν, ν^α, …
    Uniform,
    /// η, η^α, …
    Stationary,
}

/// One row per labelled report: the average metric followed by one column per discount.
pub fn metric_table_csv(rows: &[(String, MetricReport)], family: MetricFamily) -> String {
    let symbol = match family {
        MetricFamily::Uniform => "nu",
        MetricFamily::Stationary => "eta",
    };
    let mut out = format!("policy,{symbol}");
    if let Some((_, first)) = rows.first() {
        for d in &first.per_alpha {
            out.push_str(&format!(",{symbol}_alpha={:.6}", d.alpha));
        }
    }
    out.push('\n');
    for (label, r) in rows {
        let (avg, disc): (f64, Vec<f64>) = match family {
            MetricFamily::Uniform => (r.nu_avg, r.per_alpha.iter().map(|d| d.nu_disc).collect()),
            MetricFamily::Stationary => {
                (r.eta_avg, r.per_alpha.iter().map(|d| d.eta_disc).collect())
            }
        };
        out.push_str(&format!("{label},{avg:.6}"));
        for v in disc {
            out.push_str(&format!(",{v:.6}"));
        }
        out.push('\n');
    }
    out
}
