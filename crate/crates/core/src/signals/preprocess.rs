use super::SignalRecord;
use crate::error::{Error, Result};

/// Decimates `record` by `factor` after a zero-phase moving-average low-pass.
///
/// The smoothing kernel spans `factor` samples and is centered on each output
/// sample; for even factors the two end taps carry half weight so the kernel
/// stays symmetric. Near the record edges the kernel is truncated and
/// renormalized. Output length is `floor(N / factor)`.
pub fn downsample(record: &SignalRecord, factor: usize) -> Result<SignalRecord> {
    if factor == 0 {
        return Err(Error::InvalidArgument("downsample factor must be ≥ 1".into()));
    }
    if factor == 1 {
        return Ok(record.clone());
    }
    let kernel = smoothing_kernel(factor);
    let half = (kernel.len() / 2) as isize;
    let x = &record.samples;
    let n = x.len();
    let out_len = n / factor;
    let mut out = Vec::with_capacity(out_len);
    for k in 0..out_len {
        let centre = (k * factor) as isize;
        let mut acc = 0.0;
        let mut weight = 0.0;
        for (j, w) in kernel.iter().enumerate() {
            let idx = centre + j as isize - half;
            if idx >= 0 && (idx as usize) < n {
                acc += w * x[idx as usize];
                weight += w;
            }
        }
        out.push(acc / weight);
    }
    let mut down = record.clone();
    down.samples = out;
    down.sample_rate = record.sample_rate / factor as f64;
    down.validate()?;
    Ok(down)
}

fn smoothing_kernel(factor: usize) -> Vec<f64> {
    if factor % 2 == 1 {
        vec![1.0; factor]
    } else {
        let mut k = vec![1.0; factor + 1];
        k[0] = 0.5;
        k[factor] = 0.5;
        k
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(n: usize, fs: f64) -> SignalRecord {
        let samples = (0..n).map(|i| (i as f64 * 0.01).sin()).collect();
        SignalRecord::new(samples, fs, "2-6", "healthy", 0).unwrap()
    }

    #[test]
    fn factor_one_is_identity() {
        let r = record(50, 1.0e3);
        assert_eq!(downsample(&r, 1).unwrap(), r);
    }

    #[test]
    fn factor_zero_rejected() {
        assert!(downsample(&record(10, 1.0), 0).is_err());
    }

    #[test]
    fn twenty_four_to_two_megahertz() {
        let r = record(7344, 24.0e6);
        let d = downsample(&r, 12).unwrap();
        assert_eq!(d.sample_rate, 2.0e6);
        assert_eq!(d.len(), 612);
    }

    #[test]
    fn constant_signal_preserved() {
        let r = SignalRecord::new(vec![3.5; 37], 10.0, "p", "s", 0).unwrap();
        for f in [2, 3, 4, 7] {
            let d = downsample(&r, f).unwrap();
            assert_eq!(d.len(), 37 / f);
            assert!(d.samples.iter().all(|v| (v - 3.5).abs() < 1e-12));
        }
    }

    #[test]
    fn kernel_is_symmetric_with_unit_gain() {
        for f in 1..10 {
            let k = smoothing_kernel(f);
            let rev: Vec<f64> = k.iter().rev().copied().collect();
            assert_eq!(k, rev);
            assert!((k.iter().sum::<f64>() - f as f64).abs() < 1e-12);
        }
    }

    #[test]
    fn linear_ramp_is_not_shifted() {
        // a zero-phase filter maps an interior ramp sample onto itself
        let samples: Vec<f64> = (0..120).map(|i| i as f64).collect();
        let r = SignalRecord::new(samples, 1.0, "p", "s", 0).unwrap();
        for f in [2, 3, 4, 6] {
            let d = downsample(&r, f).unwrap();
            for (k, v) in d.samples.iter().enumerate().skip(1).take(d.len() - 2) {
                assert!((v - (k * f) as f64).abs() < 1e-9, "factor {f} k {k}");
            }
        }
    }
}
