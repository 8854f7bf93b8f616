//! Separable d-dimensional complex FFT on a cubic row-major grid.

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use std::sync::Arc;

const BATCH: usize = 64;

/// In-place transform of `buf`, a cube of side `m` in `d` dimensions.
/// The inverse is unnormalised; callers divide by `m^d`.
pub fn fft_nd(buf: &mut [Complex64], m: usize, d: usize, inverse: bool) {
    assert_eq!(buf.len(), m.pow(d as u32));
    if m == 1 {
        return;
    }
    let mut planner = FftPlanner::new();
    let plan: Arc<dyn Fft<f64>> = if inverse {
        planner.plan_fft_inverse(m)
    } else {
        planner.plan_fft_forward(m)
    };
    for axis in 0..d {
        let stride = m.pow((d - 1 - axis) as u32);
        if stride == 1 {
            buf.par_chunks_mut(m * BATCH.max(1))
                .for_each(|chunk| plan.process(chunk));
            continue;
        }
        let block = m * stride;
        let nblocks = buf.len() / block;
        if nblocks > 1 {
            buf.par_chunks_mut(block)
                .for_each(|blk| transform_block(blk, m, stride, &plan));
        } else {
            transform_block(buf, m, stride, &plan);
        }
    }
}

fn transform_block(blk: &mut [Complex64], m: usize, stride: usize, plan: &Arc<dyn Fft<f64>>) {
    let mut scratch = vec![Complex64::new(0.0, 0.0); m * BATCH];
    let mut start = 0;
    while start < stride {
        let count = BATCH.min(stride - start);
        for b in 0..count {
            let i = start + b;
            for k in 0..m {
                scratch[b * m + k] = blk[k * stride + i];
            }
        }
        plan.process(&mut scratch[..count * m]);
        for b in 0..count {
            let i = start + b;
            for k in 0..m {
                blk[k * stride + i] = scratch[b * m + k];
            }
        }
        start += count;
    }
}
