//! Minimal dense tensors for the two-layer fusion network.

use crate::error::{Error, Result};

/// H x W x C tensor, row-major with interleaved channels.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(height: usize, width: usize, channels: usize) -> Self {
        Self {
            height,
            width,
            channels,
            data: vec![0.0; height * width * channels],
        }
    }

    pub fn from_data(height: usize, width: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != height * width * channels {
            return Err(Error::ShapeMismatch {
                reason: format!(
                    "expected {} values for {height}x{width}x{channels}, got {}",
                    height * width * channels,
                    data.len()
                ),
            });
        }
        Ok(Self {
            height,
            width,
            channels,
            data,
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize, c: usize) -> f64 {
        self.data[(y * self.width + x) * self.channels + c]
    }

    #[inline]
    pub fn set(&mut self, y: usize, x: usize, c: usize, v: f64) {
        self.data[(y * self.width + x) * self.channels + c] = v;
    }
}

/// Convolution weights laid out (ky, kx, c_in, c_out), row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvKernel {
    kh: usize,
    kw: usize,
    cin: usize,
    cout: usize,
    data: Vec<f64>,
}

impl ConvKernel {
    pub fn zeros(kh: usize, kw: usize, cin: usize, cout: usize) -> Self {
        Self {
            kh,
            kw,
            cin,
            cout,
            data: vec![0.0; kh * kw * cin * cout],
        }
    }

    pub fn from_data(
        kh: usize,
        kw: usize,
        cin: usize,
        cout: usize,
        data: Vec<f64>,
    ) -> Result<Self> {
        if data.len() != kh * kw * cin * cout {
            return Err(Error::ShapeMismatch {
                reason: format!(
                    "expected {} weights for {kh}x{kw}x{cin}x{cout}, got {}",
                    kh * kw * cin * cout,
                    data.len()
                ),
            });
        }
        Ok(Self {
            kh,
            kw,
            cin,
            cout,
            data,
        })
    }

    pub fn kh(&self) -> usize {
        self.kh
    }

    pub fn kw(&self) -> usize {
        self.kw
    }

    pub fn cin(&self) -> usize {
        self.cin
    }

    pub fn cout(&self) -> usize {
        self.cout
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    #[inline]
    pub fn get(&self, ky: usize, kx: usize, ci: usize, co: usize) -> f64 {
        self.data[((ky * self.kw + kx) * self.cin + ci) * self.cout + co]
    }

    /// Offset of the contiguous c_out run for a (ky, kx, ci) triple.
    #[inline]
    pub(crate) fn run_offset(&self, ky: usize, kx: usize, ci: usize) -> usize {
        ((ky * self.kw + kx) * self.cin + ci) * self.cout
    }
}
