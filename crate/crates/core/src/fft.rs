//! Thin complex FFT layer over rustfft: plan reuse, 5-smooth size selection,
//! and an in-place d-dimensional transform on cubic grids.
//!
//! Grid layout convention everywhere in this crate: index = x0 + m*x1 + m^2*x2,
//! so axis 0 is the fastest-varying one.

use std::cell::RefCell;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn plan(len: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        if inverse {
            p.plan_fft_inverse(len)
        } else {
            p.plan_fft_forward(len)
        }
    })
}

/// Smallest length >= n whose prime factors are all in {2, 3, 5}.
pub fn next_fast_len(n: usize) -> usize {
    assert!(n > 0, "next_fast_len of 0");
    if n <= 2 {
        return n;
    }
    let mut best = n.next_power_of_two();
    let mut p5 = 1usize;
    while p5 < best {
        let mut p35 = p5;
        while p35 < best {
            let mut v = p35;
            while v < n {
                v *= 2;
            }
            if v < best {
                best = v;
            }
            match p35.checked_mul(3) {
                Some(next) => p35 = next,
                None => break,
            }
        }
        match p5.checked_mul(5) {
            Some(next) => p5 = next,
            None => break,
        }
    }
    best
}

/// In-place unnormalized FFT over a d-dimensional cube of side m.
///
/// Forward uses kernel exp(-2*pi*i*k*x/m); inverse exp(+2*pi*i*k*x/m) without
/// the 1/m^d factor, so forward followed by inverse scales by m^d.
pub fn fft_nd(data: &mut [Complex64], m: usize, d: usize, inverse: bool) {
    debug_assert_eq!(data.len(), m.pow(d as u32));
    let fft = plan(m, inverse);
    let mut scratch = vec![Complex64::default(); fft.get_inplace_scratch_len()];

    // Axis 0 lines are contiguous.
    for chunk in data.chunks_exact_mut(m) {
        fft.process_with_scratch(chunk, &mut scratch);
    }

    // Higher axes go through a gather/scatter buffer.
    let mut line = vec![Complex64::default(); m];
    for axis in 1..d {
        let stride = m.pow(axis as u32);
        let block = stride * m;
        let nblocks = data.len() / block;
        for b in 0..nblocks {
            let base0 = b * block;
            for off in 0..stride {
                let base = base0 + off;
                for (j, slot) in line.iter_mut().enumerate() {
                    *slot = data[base + j * stride];
                }
                fft.process_with_scratch(&mut line, &mut scratch);
                for (j, v) in line.iter().enumerate() {
                    data[base + j * stride] = *v;
                }
            }
        }
    }
}
