//! Unitary 2D DFT on row-major complex planes, wrapping rustfft.

use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::imagecore::Dims;

#[derive(Clone)]
pub(crate) struct Fft2 {
    dims: Dims,
    row_fwd: Arc<dyn Fft<f64>>,
    row_inv: Arc<dyn Fft<f64>>,
    col_fwd: Arc<dyn Fft<f64>>,
    col_inv: Arc<dyn Fft<f64>>,
    norm: f64,
}

impl std::fmt::Debug for Fft2 {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Fft2").field("dims", &self.dims).finish()
    }
}

impl Fft2 {
    pub(crate) fn new(dims: Dims) -> Self {
        let mut planner = FftPlanner::new();
        Fft2 {
            dims,
            row_fwd: planner.plan_fft_forward(dims.width),
            row_inv: planner.plan_fft_inverse(dims.width),
            col_fwd: planner.plan_fft_forward(dims.height),
            col_inv: planner.plan_fft_inverse(dims.height),
            norm: 1.0 / (dims.len() as f64).sqrt(),
        }
    }

    pub(crate) fn forward(&self, buf: &mut [Complex64]) {
        self.run(buf, &self.row_fwd, &self.col_fwd);
    }

    pub(crate) fn inverse(&self, buf: &mut [Complex64]) {
        self.run(buf, &self.row_inv, &self.col_inv);
    }

    pub(crate) fn forward_real(&self, data: &[f64]) -> Vec<Complex64> {
        let mut buf: Vec<Complex64> = data.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.forward(&mut buf);
        buf
    }

    fn run(&self, buf: &mut [Complex64], rows: &Arc<dyn Fft<f64>>, cols: &Arc<dyn Fft<f64>>) {
        let Dims { height, width } = self.dims;
        assert_eq!(buf.len(), height * width);
        rows.process(buf);
        let mut column = vec![Complex64::default(); height];
        for c in 0..width {
            for r in 0..height {
                column[r] = buf[r * width + c];
            }
            cols.process(&mut column);
            for r in 0..height {
                buf[r * width + c] = column[r];
            }
        }
        buf.iter_mut().for_each(|v| *v *= self.norm);
    }
}
