//! Convolution layers on channel-major tensors, lowered to GEMM through a
//! column matrix.

use num_traits::Float;
use serde::{Deserialize, Serialize};

/// Floating-point type the network can run in.
pub trait Scalar: Float + Default + Send + Sync + std::fmt::Debug + std::iter::Sum + 'static {
    /// `c = a * b + beta * c` with arbitrary strides.
    #[allow(clippy::too_many_arguments)]
    fn gemm(
        m: usize,
        k: usize,
        n: usize,
        a: &[Self],
        a_strides: (isize, isize),
        b: &[Self],
        b_strides: (isize, isize),
        beta: Self,
        c: &mut [Self],
        c_strides: (isize, isize),
    );

    fn of(x: f64) -> Self;

    fn as_f64(self) -> f64;
}

fn span(rows: usize, cols: usize, rs: isize, cs: isize) -> usize {
    if rows == 0 || cols == 0 {
        0
    } else {
        ((rows - 1) as isize * rs + (cols - 1) as isize * cs) as usize + 1
    }
}

macro_rules! impl_scalar {
    ($t:ty, $f:path) => {
        impl Scalar for $t {
            fn gemm(
                m: usize,
                k: usize,
                n: usize,
                a: &[Self],
                (rsa, csa): (isize, isize),
                b: &[Self],
                (rsb, csb): (isize, isize),
                beta: Self,
                c: &mut [Self],
                (rsc, csc): (isize, isize),
            ) {
                assert!(rsa >= 0 && csa >= 0 && rsb >= 0 && csb >= 0 && rsc >= 0 && csc >= 0);
                assert!(a.len() >= span(m, k, rsa, csa), "gemm: a too short");
                assert!(b.len() >= span(k, n, rsb, csb), "gemm: b too short");
                assert!(c.len() >= span(m, n, rsc, csc), "gemm: c too short");
                if m == 0 || n == 0 {
                    return;
                }
                // SAFETY: the assertions above keep every strided access in
                // bounds, and `c` is borrowed mutably so it cannot alias.
                unsafe {
                    $f(m, k, n, 1.0, a.as_ptr(), rsa, csa, b.as_ptr(), rsb, csb, beta, c.as_mut_ptr(), rsc, csc);
                }
            }

            fn of(x: f64) -> Self {
                x as $t
            }

            fn as_f64(self) -> f64 {
                self as f64
            }
        }
    };
}

impl_scalar!(f64, matrixmultiply::dgemm);
impl_scalar!(f32, matrixmultiply::sgemm);

/// Boundary handling of the kernel-p convolutions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Padding {
    /// Extends the signal by its edge values.
    #[default]
    Replicate,
    Periodic,
}

impl Padding {
    #[inline]
    fn index(self, i: isize, len: usize) -> usize {
        match self {
            Padding::Replicate => i.clamp(0, len as isize - 1) as usize,
            Padding::Periodic => i.rem_euclid(len as isize) as usize,
        }
    }
}

/// Channel-major 2D array (`data[c * len + i]`).
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<T> {
    pub channels: usize,
    pub len: usize,
    pub data: Vec<T>,
}

impl<T: Scalar> Tensor<T> {
    pub fn zeros(channels: usize, len: usize) -> Self {
        Tensor { channels, len, data: vec![T::zero(); channels * len] }
    }

    pub fn from_vec(channels: usize, len: usize, data: Vec<T>) -> Self {
        assert_eq!(data.len(), channels * len, "tensor data length");
        Tensor { channels, len, data }
    }

    pub fn channel(&self, c: usize) -> &[T] {
        &self.data[c * self.len..(c + 1) * self.len]
    }

    pub fn add_assign(&mut self, other: &Tensor<T>) {
        debug_assert_eq!(self.data.len(), other.data.len());
        self.data.iter_mut().zip(&other.data).for_each(|(a, &b)| *a = *a + b);
    }
}

/// Kind of a parameterized layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LayerKind {
    /// Same-length convolution with an odd kernel.
    Conv { kernel: usize },
    /// Kernel 2, stride 2.
    Down,
    /// Transposed convolution, kernel 2, stride 2.
    Up,
}

/// Weights and biases of one layer.
///
/// `Conv` and `Down` store weights as `[cout][cin][k]`; `Up` stores them as
/// `[cin][cout][2]`, which makes an `Up` layer with the weights of a `Down`
/// layer its adjoint.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer<T> {
    pub kind: LayerKind,
    pub cin: usize,
    pub cout: usize,
    pub w: Vec<T>,
    pub b: Vec<T>,
}

impl<T: Scalar> Layer<T> {
    pub fn zeros(kind: LayerKind, cin: usize, cout: usize) -> Self {
        Layer { kind, cin, cout, w: vec![T::zero(); Self::weight_len(kind, cin, cout)], b: vec![T::zero(); cout] }
    }

    pub fn weight_len(kind: LayerKind, cin: usize, cout: usize) -> usize {
        match kind {
            LayerKind::Conv { kernel } => cin * cout * kernel,
            LayerKind::Down | LayerKind::Up => cin * cout * 2,
        }
    }

    pub fn param_count(&self) -> usize {
        self.w.len() + self.b.len()
    }

    pub fn output_len(&self, len: usize) -> usize {
        match self.kind {
            LayerKind::Conv { .. } => len,
            LayerKind::Down => len / 2,
            LayerKind::Up => len * 2,
        }
    }

    /// Applies the layer.
    pub fn forward(&self, x: &Tensor<T>, pad: Padding) -> Tensor<T> {
        assert_eq!(x.channels, self.cin, "layer input channels");
        match self.kind {
            LayerKind::Conv { kernel } => {
                let col = im2col(x, kernel, pad);
                self.apply_columns(&col, x.len)
            }
            LayerKind::Down => {
                assert!(x.len % 2 == 0, "down-sampling needs an even length");
                let col = pairs2col(x);
                self.apply_columns(&col, x.len / 2)
            }
            LayerKind::Up => {
                let l = x.len;
                let r = self.cout * 2;
                let mut z = vec![T::zero(); r * l];
                // z[(co, t)][i] = sum_ci w[ci][(co, t)] x[ci][i]
                T::gemm(r, self.cin, l, &self.w, (1, r as isize), &x.data, (l as isize, 1), T::zero(), &mut z, (l as isize, 1));
                let mut y = Tensor::zeros(self.cout, 2 * l);
                for co in 0..self.cout {
                    let yc = &mut y.data[co * 2 * l..(co + 1) * 2 * l];
                    for t in 0..2 {
                        let zr = &z[(co * 2 + t) * l..(co * 2 + t + 1) * l];
                        for i in 0..l {
                            yc[2 * i + t] = zr[i] + self.b[co];
                        }
                    }
                }
                y
            }
        }
    }

    fn apply_columns(&self, col: &[T], lout: usize) -> Tensor<T> {
        let kk = col.len() / lout;
        let mut y = Tensor::zeros(self.cout, lout);
        for (co, row) in y.data.chunks_exact_mut(lout).enumerate() {
            row.fill(self.b[co]);
        }
        T::gemm(self.cout, kk, lout, &self.w, (kk as isize, 1), col, (lout as isize, 1), T::one(), &mut y.data, (lout as isize, 1));
        y
    }

    /// Accumulates parameter gradients into `grad` and returns the input
    /// gradient when `want_dx` is set.
    pub fn backward(&self, x: &Tensor<T>, dy: &Tensor<T>, pad: Padding, grad: &mut Layer<T>, want_dx: bool) -> Option<Tensor<T>> {
        let lout = dy.len;
        for (co, row) in dy.data.chunks_exact(lout).enumerate() {
            grad.b[co] = grad.b[co] + row.iter().copied().sum::<T>();
        }
        match self.kind {
            LayerKind::Conv { .. } | LayerKind::Down => {
                let col = match self.kind {
                    LayerKind::Conv { kernel } => im2col(x, kernel, pad),
                    _ => pairs2col(x),
                };
                let kk = col.len() / lout;
                // dW += dy col^T
                T::gemm(self.cout, lout, kk, &dy.data, (lout as isize, 1), &col, (1, lout as isize), T::one(), &mut grad.w, (kk as isize, 1));
                if !want_dx {
                    return None;
                }
                let mut dcol = vec![T::zero(); kk * lout];
                // dcol = W^T dy
                T::gemm(kk, self.cout, lout, &self.w, (1, kk as isize), &dy.data, (lout as isize, 1), T::zero(), &mut dcol, (lout as isize, 1));
                Some(match self.kind {
                    LayerKind::Conv { kernel } => col2im(&dcol, self.cin, x.len, kernel, pad),
                    _ => col2pairs(&dcol, self.cin, x.len),
                })
            }
            LayerKind::Up => {
                let l = x.len;
                let r = self.cout * 2;
                let mut dz = vec![T::zero(); r * l];
                for co in 0..self.cout {
                    let dyc = dy.channel(co);
                    for t in 0..2 {
                        let dzr = &mut dz[(co * 2 + t) * l..(co * 2 + t + 1) * l];
                        for i in 0..l {
                            dzr[i] = dyc[2 * i + t];
                        }
                    }
                }
                // dW[ci][r] += sum_i x[ci][i] dz[r][i]
                T::gemm(self.cin, l, r, &x.data, (l as isize, 1), &dz, (1, l as isize), T::one(), &mut grad.w, (r as isize, 1));
                if !want_dx {
                    return None;
                }
                let mut dx = Tensor::zeros(self.cin, l);
                T::gemm(self.cin, r, l, &self.w, (r as isize, 1), &dz, (l as isize, 1), T::zero(), &mut dx.data, (l as isize, 1));
                Some(dx)
            }
        }
    }
}

/// Column matrix `[cin * k][L]` of a same-length convolution.
fn im2col<T: Scalar>(x: &Tensor<T>, k: usize, pad: Padding) -> Vec<T> {
    let l = x.len;
    let half = (k / 2) as isize;
    let mut col = vec![T::zero(); x.channels * k * l];
    for ci in 0..x.channels {
        let src = x.channel(ci);
        for t in 0..k {
            let off = t as isize - half;
            let row = &mut col[(ci * k + t) * l..(ci * k + t + 1) * l];
            for (i, r) in row.iter_mut().enumerate() {
                *r = src[pad.index(i as isize + off, l)];
            }
        }
    }
    col
}

fn col2im<T: Scalar>(dcol: &[T], cin: usize, l: usize, k: usize, pad: Padding) -> Tensor<T> {
    let half = (k / 2) as isize;
    let mut dx = Tensor::zeros(cin, l);
    for ci in 0..cin {
        let dst = &mut dx.data[ci * l..(ci + 1) * l];
        for t in 0..k {
            let off = t as isize - half;
            let row = &dcol[(ci * k + t) * l..(ci * k + t + 1) * l];
            for (i, &g) in row.iter().enumerate() {
                let j = pad.index(i as isize + off, l);
                dst[j] = dst[j] + g;
            }
        }
    }
    dx
}

/// Column matrix `[cin * 2][L / 2]` of the stride-2 convolution.
fn pairs2col<T: Scalar>(x: &Tensor<T>) -> Vec<T> {
    let l = x.len;
    let h = l / 2;
    let mut col = vec![T::zero(); x.channels * 2 * h];
    for ci in 0..x.channels {
        let src = x.channel(ci);
        for t in 0..2 {
            let row = &mut col[(ci * 2 + t) * h..(ci * 2 + t + 1) * h];
            for i in 0..h {
                row[i] = src[2 * i + t];
            }
        }
    }
    col
}

fn col2pairs<T: Scalar>(dcol: &[T], cin: usize, l: usize) -> Tensor<T> {
    let h = l / 2;
    let mut dx = Tensor::zeros(cin, l);
    for ci in 0..cin {
        for t in 0..2 {
            let row = &dcol[(ci * 2 + t) * h..(ci * 2 + t + 1) * h];
            for i in 0..h {
                dx.data[ci * l + 2 * i + t] = row[i];
            }
        }
    }
    dx
}

/// `ln(1 + e^x)` without overflow.
#[inline]
pub fn softplus<T: Scalar>(x: T) -> T {
    x.max(T::zero()) + (-x.abs()).exp().ln_1p()
}

/// Derivative of [`softplus`]: the logistic function.
#[inline]
pub fn softplus_grad<T: Scalar>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{RngExt, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
        (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    fn random_layer(rng: &mut ChaCha8Rng, kind: LayerKind, cin: usize, cout: usize) -> Layer<f64> {
        let mut layer = Layer::zeros(kind, cin, cout);
        layer.w = random_vec(rng, layer.w.len());
        layer.b = random_vec(rng, cout);
        layer
    }

    /// Nested-loop reference: `y[k][i] = sum_j sum_d x~[j][i + d - h] K[k][j][d] + b[k]`.
    fn conv_oracle(layer: &Layer<f64>, x: &Tensor<f64>, pad: Padding) -> Tensor<f64> {
        let LayerKind::Conv { kernel } = layer.kind else { unreachable!() };
        let l = x.len;
        let h = (kernel / 2) as isize;
        let mut y = Tensor::zeros(layer.cout, l);
        for k in 0..layer.cout {
            for i in 0..l {
                let mut s = layer.b[k];
                for j in 0..layer.cin {
                    for d in 0..kernel {
                        let idx = i as isize + d as isize - h;
                        let v = match pad {
                            Padding::Replicate => x.data[j * l + idx.clamp(0, l as isize - 1) as usize],
                            Padding::Periodic => x.data[j * l + idx.rem_euclid(l as isize) as usize],
                        };
                        s += v * layer.w[(k * layer.cin + j) * kernel + d];
                    }
                }
                y.data[k * l + i] = s;
            }
        }
        y
    }

    #[test]
    fn conv_matches_loop_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for pad in [Padding::Replicate, Padding::Periodic] {
            for (l, cin, cout, k) in [(6, 2, 1, 3), (9, 3, 4, 5), (4, 1, 2, 7)] {
                let layer = random_layer(&mut rng, LayerKind::Conv { kernel: k }, cin, cout);
                let x = Tensor::from_vec(cin, l, random_vec(&mut rng, cin * l));
                let y = layer.forward(&x, pad);
                let o = conv_oracle(&layer, &x, pad);
                for (a, b) in y.data.iter().zip(&o.data) {
                    assert!((a - b).abs() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn centered_identity_kernel() {
        let mut layer = Layer::<f64>::zeros(LayerKind::Conv { kernel: 5 }, 3, 3);
        for j in 0..3 {
            layer.w[(j * 3 + j) * 5 + 2] = 1.0;
        }
        let x = Tensor::from_vec(3, 7, (0..21).map(|v| v as f64 * 0.3).collect());
        assert_eq!(layer.forward(&x, Padding::Replicate), x);
    }

    #[test]
    fn constants_stay_constant() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let layer = random_layer(&mut rng, LayerKind::Conv { kernel: 5 }, 2, 3);
        let x = Tensor::from_vec(2, 10, [vec![0.4; 10], vec![-1.2; 10]].concat());
        let y = layer.forward(&x, Padding::Replicate);
        for c in 0..3 {
            assert!(y.channel(c).iter().all(|v| (v - y.channel(c)[0]).abs() < 1e-15));
        }
    }

    #[test]
    fn down_sampling() {
        let mut avg = Layer::<f64>::zeros(LayerKind::Down, 2, 2);
        for c in 0..2 {
            avg.w[(c * 2 + c) * 2] = 0.5;
            avg.w[(c * 2 + c) * 2 + 1] = 0.5;
        }
        let x = Tensor::from_vec(2, 4, vec![1.0, 3.0, 5.0, 7.0, 0.0, 2.0, 4.0, 4.0]);
        assert_eq!(avg.forward(&x, Padding::Replicate).data, vec![2.0, 6.0, 1.0, 4.0]);

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let layer = random_layer(&mut rng, LayerKind::Down, 3, 6);
        let x = Tensor::from_vec(3, 8, random_vec(&mut rng, 24));
        let y = layer.forward(&x, Padding::Replicate);
        assert_eq!((y.channels, y.len), (6, 4));
        for k in 0..6 {
            for i in 0..4 {
                let mut s = layer.b[k];
                for j in 0..3 {
                    s += x.data[j * 8 + 2 * i] * layer.w[(k * 3 + j) * 2] + x.data[j * 8 + 2 * i + 1] * layer.w[(k * 3 + j) * 2 + 1];
                }
                assert!((y.data[k * 4 + i] - s).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn up_is_adjoint_of_down() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut down = random_layer(&mut rng, LayerKind::Down, 3, 6);
        down.b = vec![0.0; 6];
        let up = Layer { kind: LayerKind::Up, cin: 6, cout: 3, w: down.w.clone(), b: vec![0.0; 3] };
        let x = Tensor::from_vec(3, 10, random_vec(&mut rng, 30));
        let y = Tensor::from_vec(6, 5, random_vec(&mut rng, 30));
        let dx = down.forward(&x, Padding::Replicate);
        let uy = up.forward(&y, Padding::Replicate);
        assert_eq!((uy.channels, uy.len), (3, 10));
        let lhs: f64 = dx.data.iter().zip(&y.data).map(|(a, b)| a * b).sum();
        let rhs: f64 = x.data.iter().zip(&uy.data).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-13);
    }

    #[test]
    fn constant_up_kernel_has_no_checkerboard() {
        let mut up = Layer::<f64>::zeros(LayerKind::Up, 4, 2);
        up.w.fill(0.25);
        let x = Tensor::from_vec(4, 6, vec![1.5; 24]);
        let y = up.forward(&x, Padding::Replicate);
        assert!(y.data.iter().all(|&v| (v - 1.5).abs() < 1e-15));
    }

    fn fd_check(kind: LayerKind, cin: usize, cout: usize, l: usize, pad: Padding) {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let layer = random_layer(&mut rng, kind, cin, cout);
        let x = Tensor::from_vec(cin, l, random_vec(&mut rng, cin * l));
        let lout = layer.output_len(l);
        let g = Tensor::from_vec(cout, lout, random_vec(&mut rng, cout * lout));
        let loss = |layer: &Layer<f64>, x: &Tensor<f64>| -> f64 {
            layer.forward(x, pad).data.iter().zip(&g.data).map(|(a, b)| a * b).sum()
        };
        let mut grad = Layer::zeros(kind, cin, cout);
        let dx = layer.backward(&x, &g, pad, &mut grad, true).unwrap();
        let h = 1e-6;
        for i in 0..layer.w.len() {
            let (mut p, mut m) = (layer.clone(), layer.clone());
            p.w[i] += h;
            m.w[i] -= h;
            let fd = (loss(&p, &x) - loss(&m, &x)) / (2.0 * h);
            assert!((fd - grad.w[i]).abs() < 1e-8, "{kind:?} w[{i}]");
        }
        for i in 0..cout {
            let (mut p, mut m) = (layer.clone(), layer.clone());
            p.b[i] += h;
            m.b[i] -= h;
            let fd = (loss(&p, &x) - loss(&m, &x)) / (2.0 * h);
            assert!((fd - grad.b[i]).abs() < 1e-8);
        }
        for i in 0..x.data.len() {
            let (mut p, mut m) = (x.clone(), x.clone());
            p.data[i] += h;
            m.data[i] -= h;
            let fd = (loss(&layer, &p) - loss(&layer, &m)) / (2.0 * h);
            assert!((fd - dx.data[i]).abs() < 1e-8, "{kind:?} x[{i}]");
        }
    }

    #[test]
    fn layer_gradients_match_finite_differences() {
        for pad in [Padding::Replicate, Padding::Periodic] {
            fd_check(LayerKind::Conv { kernel: 3 }, 2, 3, 6, pad);
            fd_check(LayerKind::Conv { kernel: 5 }, 1, 2, 4, pad);
        }
        fd_check(LayerKind::Down, 2, 4, 8, Padding::Replicate);
        fd_check(LayerKind::Up, 4, 2, 5, Padding::Replicate);
        fd_check(LayerKind::Conv { kernel: 1 }, 3, 1, 7, Padding::Replicate);
    }

    #[test]
    fn softplus_values() {
        assert!((softplus(0.0f64) - 2f64.ln()).abs() < 1e-15);
        assert!((softplus(50.0f64) - 50.0).abs() < 1e-12);
        assert!(softplus(-800.0f64) >= 0.0);
        assert!(softplus(800.0f64).is_finite());
        for x in [-30.0, -2.0, -0.3, 0.0, 0.7, 4.0, 25.0] {
            let h = 1e-6;
            let fd = (softplus(x + h) - softplus(x - h)) / (2.0 * h);
            assert!((fd - softplus_grad(x)).abs() < 1e-8);
        }
    }
}
