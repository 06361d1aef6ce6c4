use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::{build_regression, estimate_ols, residuals};
use crate::error::{Error, Result};

/// Relative RSS/SSS improvement below which the plateau rule stops.
pub const PLATEAU_TOLERANCE: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SelectionRule {
    /// Smallest order whose RSS/SSS improves by less than 1 % at the next order.
    Plateau,
    MinBic,
    MinAic,
}

/// Criteria for each candidate order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderScan {
    pub candidate_orders: Vec<usize>,
    pub log_likelihood: Vec<f64>,
    pub aic: Vec<f64>,
    pub bic: Vec<f64>,
    pub rss_sss: Vec<f64>,
    pub selected_order: usize,
    pub selection_rule: SelectionRule,
    /// Final order imposed by the user, if any.
    pub override_order: Option<usize>,
}

impl OrderScan {
    /// Order to use downstream: the override when present, else the selection.
    pub fn final_order(&self) -> usize {
        self.override_order.unwrap_or(self.selected_order)
    }

    pub fn with_override(mut self, order: Option<usize>) -> Self {
        self.override_order = order;
        self
    }

    fn select(&self, rule: SelectionRule) -> usize {
        let argmin = |v: &[f64]| {
            let mut best = 0;
            for (i, x) in v.iter().enumerate() {
                if *x < v[best] {
                    best = i;
                }
            }
            self.candidate_orders[best]
        };
        match rule {
            SelectionRule::MinBic => argmin(&self.bic),
            SelectionRule::MinAic => argmin(&self.aic),
            SelectionRule::Plateau => {
                let r = &self.rss_sss;
                for i in 0..r.len().saturating_sub(1) {
                    if r[i] <= 0.0 || (r[i] - r[i + 1]) / r[i] < PLATEAU_TOLERANCE {
                        return self.candidate_orders[i];
                    }
                }
                *self.candidate_orders.last().unwrap()
            }
        }
    }
}

fn validate_orders(orders: &[usize]) -> Result<()> {
    if orders.is_empty() {
        return Err(Error::InvalidArgument("empty order range".into()));
    }
    if orders[0] == 0 || orders.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument(
            "candidate orders must be positive and strictly increasing".into(),
        ));
    }
    Ok(())
}

/// Fits OLS models of each candidate order and evaluates
/// `ln L = −(N′/2)(ln 2π + ln σ̂²_e + 1)`, `AIC = −2 ln L + 2d`,
/// `BIC = −ln L + (ln N′ / 2)·d` with `N′ = N − na`, `d = na + 1`, and
/// `RSS/SSS = Σe² / Σy²`.
pub fn scan_orders(y: &[f64], orders: &[usize], rule: SelectionRule) -> Result<OrderScan> {
    validate_orders(orders)?;
    let max = *orders.last().unwrap();
    if 2 * max >= y.len() {
        return Err(Error::InvalidArgument(format!(
            "maximum order {max} needs more than {} samples",
            2 * max
        )));
    }
    let sss: f64 = y.iter().map(|v| v * v).sum();
    let mut scan = OrderScan {
        candidate_orders: orders.to_vec(),
        log_likelihood: Vec::with_capacity(orders.len()),
        aic: Vec::with_capacity(orders.len()),
        bic: Vec::with_capacity(orders.len()),
        rss_sss: Vec::with_capacity(orders.len()),
        selected_order: orders[0],
        selection_rule: rule,
        override_order: None,
    };
    for &na in orders {
        let model = estimate_ols(&build_regression(y, na)?)?;
        let e = residuals(&model, y)?;
        let rss: f64 = e.iter().map(|v| v * v).sum();
        let n_eff = model.n_samples_used as f64;
        let d = (na + 1) as f64;
        let ll = log_likelihood(n_eff, model.sigma2_e);
        scan.log_likelihood.push(ll);
        scan.aic.push(-2.0 * ll + 2.0 * d);
        scan.bic.push(-ll + 0.5 * n_eff.ln() * d);
        scan.rss_sss.push(rss / sss);
    }
    scan.selected_order = scan.select(rule);
    Ok(scan)
}

/// Gaussian conditional log-likelihood with plug-in variance.
pub fn log_likelihood(n_eff: f64, sigma2: f64) -> f64 {
    -0.5 * n_eff * ((2.0 * PI).ln() + sigma2.ln() + 1.0)
}

/// Averages criteria of scans over several realizations (same candidate
/// orders) and re-applies `rule` to the averages.
pub fn combine_scans(scans: &[OrderScan], rule: SelectionRule) -> Result<OrderScan> {
    let first = scans
        .first()
        .ok_or_else(|| Error::InvalidArgument("no scans to combine".into()))?;
    if scans.iter().any(|s| s.candidate_orders != first.candidate_orders) {
        return Err(Error::InvalidArgument("scans use different candidate orders".into()));
    }
    let k = scans.len() as f64;
    let mean = |f: fn(&OrderScan) -> &Vec<f64>| -> Vec<f64> {
        (0..first.candidate_orders.len())
            .map(|i| scans.iter().map(|s| f(s)[i]).sum::<f64>() / k)
            .collect()
    };
    let mut out = OrderScan {
        candidate_orders: first.candidate_orders.clone(),
        log_likelihood: mean(|s| &s.log_likelihood),
        aic: mean(|s| &s.aic),
        bic: mean(|s| &s.bic),
        rss_sss: mean(|s| &s.rss_sss),
        selected_order: first.candidate_orders[0],
        selection_rule: rule,
        override_order: None,
    };
    out.selected_order = out.select(rule);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signals::simulate_ar;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn ar_series(theta: &[f64], n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = Normal::new(0.0, 1.0).unwrap();
        let e: Vec<f64> = (0..n + 300).map(|_| d.sample(&mut rng)).collect();
        simulate_ar(theta, &e)[300..].to_vec()
    }

    fn scan_from_rss(rss: &[f64]) -> OrderScan {
        OrderScan {
            candidate_orders: (2..2 + rss.len()).collect(),
            log_likelihood: vec![0.0; rss.len()],
            aic: vec![0.0; rss.len()],
            bic: vec![0.0; rss.len()],
            rss_sss: rss.to_vec(),
            selected_order: 2,
            selection_rule: SelectionRule::Plateau,
            override_order: None,
        }
    }

    #[test]
    fn plateau_rule_on_constructed_curve() {
        let s = scan_from_rss(&[0.5, 0.2, 0.1, 0.0995, 0.0994, 0.0993]);
        assert_eq!(s.select(SelectionRule::Plateau), 4);
        let never = scan_from_rss(&[0.5, 0.4, 0.3]);
        assert_eq!(never.select(SelectionRule::Plateau), 4);
    }

    #[test]
    fn plateau_rule_finds_well_conditioned_ar4() {
        // poles 0.9∠±0.6 and 0.8∠±1.7: every lag up to four matters
        let theta = [-1.27945292, 1.14374094, -0.78380416, 0.5184];
        let y = ar_series(&theta, 4000, 1);
        let s = scan_orders(&y, &(2..=15).collect::<Vec<_>>(), SelectionRule::Plateau).unwrap();
        assert_eq!(s.selected_order, 4, "{:?}", s.rss_sss);
    }

    #[test]
    fn bic_penalty_grows_with_order() {
        let y = ar_series(&[-0.5], 500, 2);
        let s = scan_orders(&y, &[1, 2, 3], SelectionRule::MinBic).unwrap();
        assert_eq!(s.aic.len(), 3);
        // equal RSS would make the BIC differ only by the penalty, which is
        // strictly positive per added parameter
        let pen = |na: usize, n: f64| 0.5 * n.ln() * (na + 1) as f64;
        assert!(pen(3, 497.0) > pen(2, 498.0));
    }

    #[test]
    fn likelihood_decreases_with_variance() {
        assert!(log_likelihood(100.0, 1.0) > log_likelihood(100.0, 2.0));
    }

    #[test]
    fn empty_and_oversized_ranges_rejected() {
        let y = ar_series(&[-0.5], 40, 3);
        assert!(scan_orders(&y, &[], SelectionRule::MinBic).is_err());
        assert!(scan_orders(&y, &[2, 20], SelectionRule::MinBic).is_err());
        assert!(scan_orders(&y, &[3, 2], SelectionRule::MinBic).is_err());
    }

    #[test]
    fn override_takes_precedence() {
        let y = ar_series(&[-0.5], 400, 4);
        let s = scan_orders(&y, &[1, 2, 3, 4], SelectionRule::MinBic)
            .unwrap()
            .with_override(Some(6));
        assert_eq!(s.final_order(), 6);
        assert_ne!(s.selected_order, 6);
    }

    #[test]
    fn combined_scan_averages() {
        let a = scan_from_rss(&[0.5, 0.3]);
        let b = scan_from_rss(&[0.3, 0.1]);
        let c = combine_scans(&[a, b], SelectionRule::Plateau).unwrap();
        assert_eq!(c.rss_sss, vec![0.4, 0.2]);
    }
}
