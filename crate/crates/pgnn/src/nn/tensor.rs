//! Dense rank-4 tensor in NCHW layout.

use super::Scalar;
use crate::error::{Error, Result};

/// `(batch, channels, height, width)` tensor, row-major with batch outermost.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor4<S> {
    dims: [usize; 4],
    data: Vec<S>,
}

impl<S: Scalar> Tensor4<S> {
    pub fn new(dims: [usize; 4], data: Vec<S>) -> Result<Self> {
        if dims.contains(&0) {
            return Err(Error::dim(format!(
                "tensor dims must be positive: {dims:?}"
            )));
        }
        let expect: usize = dims.iter().product();
        if data.len() != expect {
            return Err(Error::dim(format!(
                "tensor data length {} does not match dims {dims:?}",
                data.len()
            )));
        }
        Ok(Tensor4 { dims, data })
    }

    pub fn zeros(dims: [usize; 4]) -> Self {
        Tensor4 {
            dims,
            data: vec![S::ZERO; dims.iter().product()],
        }
    }

    pub fn from_fn(dims: [usize; 4], mut f: impl FnMut(usize, usize, usize, usize) -> S) -> Self {
        let mut data = Vec::with_capacity(dims.iter().product());
        for n in 0..dims[0] {
            for c in 0..dims[1] {
                for h in 0..dims[2] {
                    for w in 0..dims[3] {
                        data.push(f(n, c, h, w));
                    }
                }
            }
        }
        Tensor4 { dims, data }
    }

    pub fn dims(&self) -> [usize; 4] {
        self.dims
    }

    pub fn batch(&self) -> usize {
        self.dims[0]
    }

    pub fn channels(&self) -> usize {
        self.dims[1]
    }

    pub fn height(&self) -> usize {
        self.dims[2]
    }

    pub fn width(&self) -> usize {
        self.dims[3]
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Elements of one sample (all channels).
    pub fn sample_len(&self) -> usize {
        self.dims[1] * self.dims[2] * self.dims[3]
    }

    #[inline]
    pub fn idx(&self, n: usize, c: usize, h: usize, w: usize) -> usize {
        ((n * self.dims[1] + c) * self.dims[2] + h) * self.dims[3] + w
    }

    #[inline]
    pub fn at(&self, n: usize, c: usize, h: usize, w: usize) -> S {
        self.data[self.idx(n, c, h, w)]
    }

    #[inline]
    pub fn set(&mut self, n: usize, c: usize, h: usize, w: usize, v: S) {
        let i = self.idx(n, c, h, w);
        self.data[i] = v;
    }

    pub fn data(&self) -> &[S] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [S] {
        &mut self.data
    }

    /// Contiguous slice of one sample.
    pub fn sample(&self, n: usize) -> &[S] {
        let len = self.sample_len();
        &self.data[n * len..(n + 1) * len]
    }

    pub fn sample_mut(&mut self, n: usize) -> &mut [S] {
        let len = self.sample_len();
        &mut self.data[n * len..(n + 1) * len]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.to_f64().is_finite())
    }

    /// Element-type conversion (f32 <-> f64).
    pub fn cast<T: Scalar>(&self) -> Tensor4<T> {
        Tensor4 {
            dims: self.dims,
            data: self.data.iter().map(|v| T::from_f64(v.to_f64())).collect(),
        }
    }

    /// Interprets a `[n, f, 1, 1]` tensor as per-sample scalars; requires
    /// single-feature rows.
    pub fn as_scalars(&self) -> Result<Vec<S>> {
        if self.dims[1] != 1 || self.dims[2] != 1 || self.dims[3] != 1 {
            return Err(Error::dim(format!(
                "expected [n,1,1,1] tensor, got {:?}",
                self.dims
            )));
        }
        Ok(self.data.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_zero_dims_and_length_mismatch() {
        assert!(Tensor4::<f32>::new([0, 1, 2, 2], vec![]).is_err());
        assert!(Tensor4::<f32>::new([1, 1, 2, 2], vec![0.0; 3]).is_err());
    }

    #[test]
    fn indexing_is_row_major_nchw() {
        let t = Tensor4::<f32>::from_fn([2, 3, 4, 5], |n, c, h, w| {
            (n * 1000 + c * 100 + h * 10 + w) as f32
        });
        assert_eq!(t.at(1, 2, 3, 4), 1234.0);
        assert_eq!(t.sample(1)[0], 1000.0);
        assert_eq!(t.sample_len(), 60);
    }
}
