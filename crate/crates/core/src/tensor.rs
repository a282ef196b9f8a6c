//! Minimal dense 2-D tensor (channels x time) used for SCADA windows and all
//! network activations. Row-major by channel so the time axis is contiguous,
//! which keeps the convolution inner loops on sequential memory.

use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Tensor<S> {
    ch: usize,
    len: usize,
    data: Vec<S>,
}

impl<S: Scalar> Tensor<S> {
    pub fn zeros(ch: usize, len: usize) -> Self {
        Self {
            ch,
            len,
            data: vec![S::zero(); ch * len],
        }
    }

    pub fn from_vec(ch: usize, len: usize, data: Vec<S>) -> Self {
        assert_eq!(data.len(), ch * len, "tensor data length mismatch");
        Self { ch, len, data }
    }

    pub fn from_fn(ch: usize, len: usize, mut f: impl FnMut(usize, usize) -> S) -> Self {
        let mut data = Vec::with_capacity(ch * len);
        for c in 0..ch {
            for t in 0..len {
                data.push(f(c, t));
            }
        }
        Self { ch, len, data }
    }

    #[inline]
    pub fn ch(&self) -> usize {
        self.ch
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn numel(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn row(&self, c: usize) -> &[S] {
        &self.data[c * self.len..(c + 1) * self.len]
    }

    #[inline]
    pub fn row_mut(&mut self, c: usize) -> &mut [S] {
        &mut self.data[c * self.len..(c + 1) * self.len]
    }

    #[inline]
    pub fn get(&self, c: usize, t: usize) -> S {
        self.data[c * self.len + t]
    }

    #[inline]
    pub fn set(&mut self, c: usize, t: usize, v: S) {
        self.data[c * self.len + t] = v;
    }

    pub fn data(&self) -> &[S] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [S] {
        &mut self.data
    }

    /// Reinterpret as a different (ch, len) factorization of the same buffer.
    pub fn reshaped(&self, ch: usize, len: usize) -> Self {
        assert_eq!(ch * len, self.data.len(), "reshape must preserve size");
        Self {
            ch,
            len,
            data: self.data.clone(),
        }
    }

    pub fn map(&self, f: impl Fn(S) -> S) -> Self {
        Self {
            ch: self.ch,
            len: self.len,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn add_assign(&mut self, other: &Self) {
        assert_eq!(self.data.len(), other.data.len());
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += *b;
        }
    }

    pub fn scale(&mut self, k: S) {
        for v in &mut self.data {
            *v *= k;
        }
    }

    pub fn convert<T: Scalar>(&self) -> Tensor<T> {
        Tensor {
            ch: self.ch,
            len: self.len,
            data: self.data.iter().map(|v| T::from_f64_c(v.to_f64_c())).collect(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// Mean absolute error over all entries of two equally shaped tensors.
pub fn mae<S: Scalar>(a: &Tensor<S>, b: &Tensor<S>) -> S {
    assert_eq!(a.ch, b.ch, "mae shape mismatch");
    assert_eq!(a.len, b.len, "mae shape mismatch");
    let mut acc = S::zero();
    for (x, y) in a.data.iter().zip(&b.data) {
        acc += (*x - *y).abs();
    }
    acc / sc_usize(a.data.len())
}

/// Mean squared error over all entries of two equally shaped tensors.
pub fn mse<S: Scalar>(a: &Tensor<S>, b: &Tensor<S>) -> S {
    assert_eq!(a.ch, b.ch, "mse shape mismatch");
    assert_eq!(a.len, b.len, "mse shape mismatch");
    let mut acc = S::zero();
    for (x, y) in a.data.iter().zip(&b.data) {
        let d = *x - *y;
        acc += d * d;
    }
    acc / sc_usize(a.data.len())
}

/// Euclidean distance between two tensors flattened to vectors.
pub fn euclidean<S: Scalar>(a: &Tensor<S>, b: &Tensor<S>) -> S {
    assert_eq!(a.data.len(), b.data.len(), "distance shape mismatch");
    let mut acc = S::zero();
    for (x, y) in a.data.iter().zip(&b.data) {
        let d = *x - *y;
        acc += d * d;
    }
    acc.sqrt()
}

#[inline]
fn sc_usize<S: Scalar>(n: usize) -> S {
    S::from_usize(n).expect("usize fits scalar")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rows_are_contiguous() {
        let t = Tensor::from_fn(3, 4, |c, i| (c * 10 + i) as f64);
        assert_eq!(t.row(1), &[10.0, 11.0, 12.0, 13.0]);
        assert_eq!(t.get(2, 3), 23.0);
    }

    #[test]
    fn mae_and_mse_basics() {
        let a = Tensor::from_vec(1, 4, vec![0.0f64, 1.0, 2.0, 3.0]);
        let b = Tensor::from_vec(1, 4, vec![0.5f64, 1.5, 2.5, 3.5]);
        assert!((mae(&a, &b) - 0.5).abs() < 1e-12);
        assert!((mse(&a, &b) - 0.25).abs() < 1e-12);
    }

    #[test]
    fn euclidean_matches_hand_value() {
        let a = Tensor::from_vec(1, 2, vec![0.0f64, 0.0]);
        let b = Tensor::from_vec(1, 2, vec![3.0f64, 4.0]);
        assert!((euclidean(&a, &b) - 5.0).abs() < 1e-12);
    }
}
