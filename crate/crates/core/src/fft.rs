//! In-place radix-2 FFT over `Complex<f64>`.
//!
//! Only power-of-two lengths are supported; the circulant embedding in
//! [`crate::fbm`] pads its first row to the next power of two.

use alloc::vec::Vec;
use core::f64::consts::PI;
use num_complex::Complex64;
#[allow(unused_imports)]
use num_traits::Float;

/// Precomputed twiddles and bit-reversal table for one transform length.
#[derive(Debug, Clone)]
pub struct FftPlan {
    len: usize,
    twiddles: Vec<Complex64>,
    rev: Vec<u32>,
}

impl FftPlan {
    /// Panics if `len` is not a power of two.
    pub fn new(len: usize) -> Self {
        assert!(len.is_power_of_two(), "FFT length must be a power of two, got {len}");
        let bits = len.trailing_zeros();
        let rev = (0..len as u32)
            .map(|i| if bits == 0 { 0 } else { i.reverse_bits() >> (32 - bits) })
            .collect();
        let twiddles = (0..len / 2)
            .map(|k| {
                let angle = -2.0 * PI * k as f64 / len as f64;
                Complex64::new(angle.cos(), angle.sin())
            })
            .collect();
        FftPlan { len, twiddles, rev }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Forward transform `X_k = Σ_j x_j e^{-2πi jk/n}`, unnormalized.
    pub fn forward(&self, data: &mut [Complex64]) {
        assert_eq!(data.len(), self.len);
        let n = self.len;
        for i in 0..n {
            let j = self.rev[i] as usize;
            if i < j {
                data.swap(i, j);
            }
        }
        let mut size = 2;
        while size <= n {
            let half = size / 2;
            let stride = n / size;
            for start in (0..n).step_by(size) {
                for k in 0..half {
                    let w = self.twiddles[k * stride];
                    let a = data[start + k];
                    let b = data[start + k + half] * w;
                    data[start + k] = a + b;
                    data[start + k + half] = a - b;
                }
            }
            size *= 2;
        }
    }
}
