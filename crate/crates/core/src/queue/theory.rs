use super::{build_queue_mdp, check_beta, Initial, Metric, QueueCriterion, QueueParams};
use crate::chain::stationary_distribution;
use crate::error::{Error, Result};
use crate::mdp::{apply_policy, Policy};
use crate::metrics::{eta, eta_discounted_from_average, nu, DiscountMetrics, MetricReport, LAURENT_RTOL};
use crate::solvers::{evaluate_average, evaluate_discounted};

/// φ_π of the uniformised chain, clipped at zero and renormalised.
pub fn stationary_phi(params: &QueueParams, policy: &Policy) -> Result<Vec<f64>> {
    let q = build_queue_mdp(params, QueueCriterion::Average)?;
    let pm = apply_policy(&q.model, policy)?;
    let phi = stationary_distribution(&pm.transition)?;
    let clipped: Vec<f64> = phi.as_slice().iter().map(|p| p.max(0.0)).collect();
    let total: f64 = clipped.iter().sum();
    Ok(clipped.into_iter().map(|p| p / total).collect())
}

/// Metrics per unit time for the average columns and per uniformised period for the
/// discounted ones:
/// η = ν = γ·J^γ, η^α = J^γ/(1−α), ν^α = mean of J^α over 0..N−1.
pub fn queue_metric_report(params: &QueueParams, policy: &Policy, betas: &[f64]) -> Result<MetricReport> {
    let avg = build_queue_mdp(params, QueueCriterion::Average)?;
    let pm = apply_policy(&avg.model, policy)?;
    let gain_per_period = evaluate_average(&pm, 0)?.gain;
    let phi = stationary_distribution(&pm.transition)?;
    let n = params.n;

    let mut per_alpha = Vec::with_capacity(betas.len());
    for &beta in betas {
        check_beta(beta)?;
        let disc = build_queue_mdp(&params.with_beta(beta), QueueCriterion::Discounted)?;
        let alpha = disc.alpha.expect("discounted model carries alpha");
        let dpm = apply_policy(&disc.model, policy)?;
        let values = evaluate_discounted(&dpm, alpha)?.values;

        let lhs = eta(phi.as_slice(), values.as_slice())?;
        let rhs = eta_discounted_from_average(eta(phi.as_slice(), dpm.cost.as_slice())?, alpha)?;
        if (lhs - rhs).abs() > LAURENT_RTOL * rhs.abs().max(1.0) {
            return Err(Error::Invariant(format!(
                "beta {beta}: phi'J = {lhs} but gain/(1-alpha) = {rhs}"
            )));
        }

        per_alpha.push(DiscountMetrics {
            alpha,
            eta_disc: eta_discounted_from_average(gain_per_period, alpha)?,
            nu_disc: nu(&values.as_slice()[..n])?,
        });
    }
    let rate = gain_per_period * avg.gamma;
    Ok(MetricReport {
        policy: policy.clone(),
        eta_avg: rate,
        nu_avg: rate,
        per_alpha,
        xi: None,
    })
}

/// Exact expectation of one simulated trajectory cost, ignoring horizon truncation
/// and the transient of uniform starts in average runs.
pub fn expected_sample_mean(
    params: &QueueParams,
    policy: &Policy,
    metric: Metric,
    initial: Initial,
) -> Result<f64> {
    match metric {
        Metric::Average => {
            let q = build_queue_mdp(params, QueueCriterion::Average)?;
            let pm = apply_policy(&q.model, policy)?;
            Ok(evaluate_average(&pm, 0)?.gain * q.gamma)
        }
        Metric::Discounted { beta } => {
            let disc = build_queue_mdp(&params.with_beta(beta), QueueCriterion::Discounted)?;
            let alpha = disc.alpha.expect("discounted model carries alpha");
            let dpm = apply_policy(&disc.model, policy)?;
            let values = evaluate_discounted(&dpm, alpha)?.values;
            match initial {
                Initial::Stationary => eta(&stationary_phi(params, policy)?, values.as_slice()),
                Initial::Uniform => nu(&values.as_slice()[..params.n]),
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::queue::threshold_policy;

    #[test]
    fn phi_support_is_below_threshold() {
        let params = QueueParams::default();
        let phi = stationary_phi(&params, &threshold_policy(17, 30).unwrap()).unwrap();
        assert!((phi.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(phi[..=17].iter().all(|&p| p > 0.0));
        assert!(phi[18..].iter().all(|&p| p == 0.0));
    }

    #[test]
    fn report_average_columns_match() {
        let params = QueueParams::default();
        let r = queue_metric_report(&params, &threshold_policy(17, 30).unwrap(), &[2e-3]).unwrap();
        assert_eq!(r.eta_avg, r.nu_avg);
        assert!((r.eta_avg - 26.451004).abs() < 1e-3);
        assert!((r.per_alpha[0].nu_disc - 14111.497973).abs() < 1e-3);
    }
}
