//! Linear convolution of grid data with a fixed stencil, by zero-padded FFT.

use num_complex::Complex64;
use rustfft::FftPlanner;

/// Precomputed kernel spectrum on a padded grid large enough that the
/// circular convolution equals the linear one on the original nodes.
pub(crate) struct Convolver {
    dims: [usize; 3],
    padded: [usize; 3],
    kernel_hat: Vec<Complex64>,
}

/// Smallest integer `>= n` whose prime factors are 2, 3 and 5.
fn smooth_size(n: usize) -> usize {
    (n..)
        .find(|&m| {
            let mut r = m;
            for p in [2, 3, 5] {
                while r % p == 0 {
                    r /= p;
                }
            }
            r == 1
        })
        .expect("smooth numbers are unbounded")
}

impl Convolver {
    /// `out[i] = Σ_o taps[o] · in[i − o]`, with `in` zero outside the grid.
    pub fn new(dims: [usize; 3], taps: &[([isize; 3], Complex64)]) -> Self {
        let reach = [0, 1, 2].map(|d| taps.iter().map(|t| t.0[d].unsigned_abs()).max().unwrap_or(0));
        let padded = [0, 1, 2].map(|d| smooth_size(dims[d] + reach[d]));
        let mut kernel = vec![Complex64::new(0.0, 0.0); padded.iter().product()];
        for (off, w) in taps {
            let idx = [0, 1, 2].map(|d| off[d].rem_euclid(padded[d] as isize) as usize);
            kernel[idx[0] + padded[0] * (idx[1] + padded[1] * idx[2])] += w;
        }
        fft3(&mut kernel, padded, false);
        Self {
            dims,
            padded,
            kernel_hat: kernel,
        }
    }

    pub fn apply(&self, values: &[Complex64]) -> Vec<Complex64> {
        let [nx, ny, nz] = self.dims;
        let [px, py, _] = self.padded;
        let mut buf = vec![Complex64::new(0.0, 0.0); self.kernel_hat.len()];
        for k in 0..nz {
            for j in 0..ny {
                let src = nx * (j + ny * k);
                let dst = px * (j + py * k);
                buf[dst..dst + nx].copy_from_slice(&values[src..src + nx]);
            }
        }
        fft3(&mut buf, self.padded, false);
        for (b, k) in buf.iter_mut().zip(&self.kernel_hat) {
            *b *= k;
        }
        fft3(&mut buf, self.padded, true);
        let scale = 1.0 / buf.len() as f64;
        let mut out = Vec::with_capacity(values.len());
        for k in 0..nz {
            for j in 0..ny {
                let src = px * (j + py * k);
                out.extend(buf[src..src + nx].iter().map(|v| v * scale));
            }
        }
        out
    }
}

/// Unnormalized 3-D FFT over an x-fastest array.
pub(crate) fn fft3(buf: &mut [Complex64], dims: [usize; 3], inverse: bool) {
    let mut planner = FftPlanner::new();
    let strides = [1, dims[0], dims[0] * dims[1]];
    for axis in 0..3 {
        let n = dims[axis];
        let fft = if inverse {
            planner.plan_fft_inverse(n)
        } else {
            planner.plan_fft_forward(n)
        };
        if axis == 0 {
            fft.process(buf);
            continue;
        }
        let mut line = vec![Complex64::new(0.0, 0.0); n];
        let others: Vec<usize> = (0..3).filter(|&d| d != axis).collect();
        for b in 0..dims[others[1]] {
            for a in 0..dims[others[0]] {
                let base = a * strides[others[0]] + b * strides[others[1]];
                for t in 0..n {
                    line[t] = buf[base + t * strides[axis]];
                }
                fft.process(&mut line);
                for t in 0..n {
                    buf[base + t * strides[axis]] = line[t];
                }
            }
        }
    }
}
