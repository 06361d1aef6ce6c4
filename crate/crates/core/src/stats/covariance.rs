use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

fn check_vectors(thetas: &[Vec<f64>], min: usize) -> Result<usize> {
    if thetas.len() < min {
        return Err(Error::InvalidArgument(format!(
            "need at least {min} parameter vectors, got {}",
            thetas.len()
        )));
    }
    let n = thetas[0].len();
    if n == 0 || thetas.iter().any(|t| t.len() != n) {
        return Err(Error::DimensionMismatch(
            "parameter vectors must share a non-zero dimension".into(),
        ));
    }
    Ok(n)
}

pub fn mean_vector(thetas: &[Vec<f64>]) -> Result<Vec<f64>> {
    let n = check_vectors(thetas, 1)?;
    let k = thetas.len() as f64;
    Ok((0..n).map(|i| thetas.iter().map(|t| t[i]).sum::<f64>() / k).collect())
}

/// Unbiased sample covariance (divisor K−1) about the sample mean.
pub fn experimental_covariance(thetas: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let n = check_vectors(thetas, 2)?;
    let mean = DVector::from_vec(mean_vector(thetas)?);
    let mut cov = DMatrix::zeros(n, n);
    for t in thetas {
        let d = DVector::from_column_slice(t) - &mean;
        cov += &d * d.transpose();
    }
    cov /= (thetas.len() - 1) as f64;
    crate::ar::symmetrize(&mut cov);
    Ok(cov)
}
