use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Threshold grid `min, min + step, …, ≤ max`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sweep {
    pub min: f64,
    pub max: f64,
    pub step: f64,
}

impl Default for Sweep {
    fn default() -> Self {
        Self {
            min: -100.0,
            max: 1e5,
            step: 1.0,
        }
    }
}

impl Sweep {
    pub fn len(&self) -> usize {
        ((self.max - self.min) / self.step + 1e-9).floor() as usize + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    fn validate(&self) -> Result<()> {
        if !(self.step > 0.0 && self.min.is_finite() && self.max.is_finite() && self.max >= self.min) {
            return Err(Error::InvalidArgument(format!(
                "invalid sweep {} → {} step {}",
                self.min, self.max, self.step
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    pub thresholds: Vec<f64>,
    pub fpr: Vec<f64>,
    pub tpr: Vec<f64>,
    pub auc: f64,
}

/// Fraction of `sorted` strictly above `t`.
fn exceed_fraction(sorted: &[f64], t: f64) -> f64 {
    let at_or_below = sorted.partition_point(|&q| q <= t);
    (sorted.len() - at_or_below) as f64 / sorted.len() as f64
}

/// Sweeps a decision threshold τ over `sweep`: `fpr(τ) = P(Q_healthy > τ)`,
/// `tpr(τ) = P(Q_damaged > τ)`. The AUC is the trapezoid area of the swept
/// points, completed with the (0,0) and (1,1) corners.
pub fn roc(q_healthy: &[f64], q_damaged: &[f64], sweep: Sweep) -> Result<RocCurve> {
    if q_healthy.is_empty() || q_damaged.is_empty() {
        return Err(Error::InvalidArgument("ROC needs healthy and damaged Q values".into()));
    }
    sweep.validate()?;
    let mut h = q_healthy.to_vec();
    let mut d = q_damaged.to_vec();
    h.sort_by(f64::total_cmp);
    d.sort_by(f64::total_cmp);
    let count = sweep.len();
    let mut thresholds = Vec::with_capacity(count);
    let mut fpr = Vec::with_capacity(count);
    let mut tpr = Vec::with_capacity(count);
    for i in 0..count {
        let t = sweep.min + i as f64 * sweep.step;
        thresholds.push(t);
        fpr.push(exceed_fraction(&h, t));
        tpr.push(exceed_fraction(&d, t));
    }
    let mut pts: Vec<(f64, f64)> = fpr.iter().copied().zip(tpr.iter().copied()).collect();
    pts.push((0.0, 0.0));
    pts.push((1.0, 1.0));
    pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    pts.dedup();
    let auc = pts
        .windows(2)
        .map(|w| (w[1].0 - w[0].0) * 0.5 * (w[0].1 + w[1].1))
        .sum();
    Ok(RocCurve {
        thresholds,
        fpr,
        tpr,
        auc,
    })
}

/// CSV with columns `threshold,fpr,tpr`.
pub fn write_roc_csv<W: Write>(curve: &RocCurve, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["threshold", "fpr", "tpr"])?;
    for i in 0..curve.thresholds.len() {
        w.write_record([
            format!("{:?}", curve.thresholds[i]),
            format!("{:?}", curve.fpr[i]),
            format!("{:?}", curve.tpr[i]),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<csv writer>", e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn small() -> Sweep {
        Sweep {
            min: -1.0,
            max: 100.0,
            step: 0.5,
        }
    }

    #[test]
    fn separated_sets() {
        let c = roc(&[0.5, 1.0, 2.0], &[30.0, 40.0, 90.0], small()).unwrap();
        assert_eq!(c.auc, 1.0);
    }

    #[test]
    fn identical_distributions_near_half() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let h: Vec<f64> = (0..1000).map(|_| rng.random::<f64>() * 90.0).collect();
        let d: Vec<f64> = (0..1000).map(|_| rng.random::<f64>() * 90.0).collect();
        let c = roc(&h, &d, small()).unwrap();
        assert!((c.auc - 0.5).abs() <= 0.05, "auc {}", c.auc);
    }

    #[test]
    fn rates_are_monotone_in_threshold() {
        let c = roc(&[1.0, 3.0, 3.0, 8.0], &[2.0, 9.0, 20.0], small()).unwrap();
        assert!(c.fpr.windows(2).all(|w| w[1] <= w[0]));
        assert!(c.tpr.windows(2).all(|w| w[1] <= w[0]));
        assert!(c.fpr.iter().chain(&c.tpr).all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn dominated_samples_keep_tpr_above_fpr() {
        let h: Vec<f64> = (0..50).map(|i| i as f64).collect();
        let d: Vec<f64> = h.iter().map(|v| v + 7.0).collect();
        let c = roc(&h, &d, small()).unwrap();
        assert!(c.tpr.iter().zip(&c.fpr).all(|(t, f)| t >= f));
    }

    #[test]
    fn default_sweep_size() {
        assert_eq!(Sweep::default().len(), 100_101);
        let c = roc(&[1.0], &[2e5], Sweep::default()).unwrap();
        assert_eq!(c.thresholds.len(), 100_101);
        assert_eq!(c.auc, 1.0);
    }

    #[test]
    fn empty_inputs_rejected() {
        assert!(roc(&[], &[1.0], small()).is_err());
        assert!(roc(&[1.0], &[], small()).is_err());
    }
}
