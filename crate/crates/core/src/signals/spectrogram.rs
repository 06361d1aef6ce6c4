use std::io::Write;

use rustfft::{num_complex::Complex, FftPlanner};

use super::{SignalRecord, WindowKind};
use crate::error::{Error, Result};

/// Short-time Fourier magnitudes, one row per frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram {
    /// `frames × (nfft/2 + 1)` one-sided magnitudes.
    pub magnitudes: Vec<Vec<f64>>,
    /// Bin frequencies, Hz.
    pub frequencies: Vec<f64>,
    /// Frame center times, seconds.
    pub times: Vec<f64>,
    pub hop: usize,
}

/// Hamming-windowed STFT magnitude with zero padding to `nfft` points.
pub fn spectrogram(
    record: &SignalRecord,
    window_len: usize,
    overlap_fraction: f64,
    nfft: usize,
) -> Result<Spectrogram> {
    let n = record.len();
    if window_len < 2 || window_len > n {
        return Err(Error::InvalidArgument(format!(
            "window_len {window_len} must lie in [2, {n}]"
        )));
    }
    if !(0.0..1.0).contains(&overlap_fraction) {
        return Err(Error::InvalidArgument("overlap_fraction must lie in [0, 1)".into()));
    }
    if nfft < window_len {
        return Err(Error::InvalidArgument("nfft must be ≥ window_len".into()));
    }
    let hop = ((window_len as f64 * (1.0 - overlap_fraction)).round() as usize).max(1);
    let frames = (n - window_len) / hop + 1;
    let window: Vec<f64> = (0..window_len)
        .map(|i| WindowKind::Hamming.at(i as f64 / (window_len - 1) as f64))
        .collect();

    let fft = FftPlanner::<f64>::new().plan_fft_forward(nfft);
    let bins = nfft / 2 + 1;
    let mut buf = vec![Complex::new(0.0, 0.0); nfft];
    let mut magnitudes = Vec::with_capacity(frames);
    let mut times = Vec::with_capacity(frames);
    for f in 0..frames {
        let start = f * hop;
        buf.iter_mut().for_each(|c| *c = Complex::new(0.0, 0.0));
        for (i, w) in window.iter().enumerate() {
            buf[i].re = record.samples[start + i] * w;
        }
        fft.process(&mut buf);
        magnitudes.push(buf[..bins].iter().map(|c| c.norm()).collect());
        times.push((start as f64 + (window_len - 1) as f64 / 2.0) / record.sample_rate);
    }
    let frequencies = (0..bins)
        .map(|k| k as f64 * record.sample_rate / nfft as f64)
        .collect();
    Ok(Spectrogram {
        magnitudes,
        frequencies,
        times,
        hop,
    })
}

/// CSV matrix: header `time_s,<f0>,<f1>,...`, then one row per frame.
pub fn write_spectrogram_csv<W: Write>(s: &Spectrogram, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["time_s".to_string()];
    header.extend(s.frequencies.iter().map(|f| format!("{f:?}")));
    w.write_record(&header)?;
    for (t, row) in s.times.iter().zip(&s.magnitudes) {
        let mut rec = vec![format!("{t:?}")];
        rec.extend(row.iter().map(|v| format!("{v:?}")));
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io("<csv writer>", e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn sine(n: usize, fs: f64, f0: f64, amp: f64) -> SignalRecord {
        let s = (0..n).map(|i| amp * (2.0 * PI * f0 * i as f64 / fs).sin()).collect();
        SignalRecord::new(s, fs, "p", "s", 0).unwrap()
    }

    fn argmax(v: &[f64]) -> usize {
        v.iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap()
            .0
    }

    #[test]
    fn frame_count_and_sine_peak() {
        let fs = 1000.0;
        for (f0, nfft) in [(125.0, 256), (200.0, 300)] {
            let r = sine(500, fs, f0, 1.0);
            let s = spectrogram(&r, 64, 0.5, nfft).unwrap();
            assert_eq!(s.hop, 32);
            assert_eq!(s.magnitudes.len(), (500 - 64) / 32 + 1);
            let expected = (f0 * nfft as f64 / fs).round() as usize;
            for row in &s.magnitudes {
                assert_eq!(argmax(row), expected);
            }
        }
    }

    #[test]
    fn zero_signal_zero_matrix() {
        let r = SignalRecord::new(vec![0.0; 100], 10.0, "p", "s", 0).unwrap();
        let s = spectrogram(&r, 20, 0.9, 64).unwrap();
        assert!(s.magnitudes.iter().flatten().all(|&v| v == 0.0));
    }

    #[test]
    fn homogeneous_in_amplitude() {
        let a = spectrogram(&sine(200, 100.0, 7.0, 1.0), 30, 0.5, 64).unwrap();
        let b = spectrogram(&sine(200, 100.0, 7.0, 3.0), 30, 0.5, 64).unwrap();
        for (ra, rb) in a.magnitudes.iter().zip(&b.magnitudes) {
            for (x, y) in ra.iter().zip(rb) {
                assert!((3.0 * x - y).abs() <= 1e-12 * (1.0 + y.abs()));
            }
        }
    }

    #[test]
    fn reference_setting_accepted() {
        let r = sine(612, 2.0e6, 250.0e3, 1.0);
        let s = spectrogram(&r, 30, 0.98, 30000).unwrap();
        assert_eq!(s.hop, 1);
        assert_eq!(s.magnitudes.len(), 612 - 30 + 1);
        assert_eq!(s.frequencies.len(), 15001);
        assert!((s.frequencies[1] - 66.666_666_666_7).abs() < 1e-6);
    }

    #[test]
    fn degenerate_window_rejected() {
        let r = sine(50, 10.0, 1.0, 1.0);
        assert!(spectrogram(&r, 0, 0.5, 64).is_err());
        assert!(spectrogram(&r, 51, 0.5, 64).is_err());
        assert!(spectrogram(&r, 10, 1.0, 64).is_err());
        assert!(spectrogram(&r, 10, 0.5, 8).is_err());
    }

    #[test]
    fn csv_has_frequency_header() {
        let s = spectrogram(&sine(40, 10.0, 1.0, 1.0), 10, 0.0, 10).unwrap();
        let mut buf = Vec::new();
        write_spectrogram_csv(&s, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let first = text.lines().next().unwrap();
        assert!(first.starts_with("time_s,0.0,1.0,"));
        assert_eq!(text.lines().count(), 1 + s.times.len());
    }
}
