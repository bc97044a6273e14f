//! Dense circulant reference for the spectral inner loop.

use crate::error::{MvfifError, Result};
use crate::filter::FilterKernel;
use crate::scalar::Scalar;
use crate::signal::MultivariateSignal;

/// Largest signal length the dense path accepts.
pub const DENSE_LIMIT: usize = 512;

/// Explicit `m x m` circulant matrix, `W[r][c] = col[(r - c) mod m]`.
pub fn dense_circulant<T: Scalar>(kernel: &FilterKernel<T>, m: usize) -> Result<Vec<Vec<T>>> {
    if m > DENSE_LIMIT {
        return Err(MvfifError::TooLarge { m, limit: DENSE_LIMIT });
    }
    let col = kernel.circulant_column(m)?;
    Ok((0..m)
        .map(|r| (0..m).map(|c| col[(r + m - c) % m]).collect())
        .collect())
}

/// `(I - W)^n0 u_i` for every channel by repeated dense products.
pub fn dense_oracle_imf<T: Scalar>(
    channels: &MultivariateSignal<T>,
    kernel: &FilterKernel<T>,
    n0: usize,
) -> Result<MultivariateSignal<T>> {
    let m = channels.samples();
    let w = dense_circulant(kernel, m)?;
    let mut out = channels.clone();
    for c in 0..channels.channels() {
        let mut u = channels.channel(c).to_vec();
        for _ in 0..n0 {
            let wu: Vec<T> = w
                .iter()
                .map(|row| row.iter().zip(&u).map(|(&a, &b)| a * b).sum())
                .collect();
            for (x, y) in u.iter_mut().zip(wu) {
                *x -= y;
            }
        }
        out.channel_mut(c).copy_from_slice(&u);
    }
    Ok(out)
}
