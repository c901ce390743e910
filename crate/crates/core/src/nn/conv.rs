//! Stride-1, same-padded 1D convolution and its transpose.
//!
//! Both lower to im2col + GEMM per batch element. Batch elements run in
//! parallel; weight gradients are reduced in batch order afterwards so the
//! result does not depend on the thread count.

use rand::Rng;
use rayon::prelude::*;

use super::tensor::{NamedTensor, Param, Tensor3};
use crate::error::{Error, Result};

/// `c = a * b + beta * c` for strided row/column layouts.
#[allow(clippy::too_many_arguments)]
fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    a_strides: (usize, usize),
    b: &[f64],
    b_strides: (usize, usize),
    beta: f64,
    c: &mut [f64],
) {
    assert!(a.len() >= m * k && b.len() >= k * n && c.len() >= m * n);
    assert!(m == 0 || k == 0 || (m - 1) * a_strides.0 + (k - 1) * a_strides.1 < a.len());
    assert!(k == 0 || n == 0 || (k - 1) * b_strides.0 + (n - 1) * b_strides.1 < b.len());
    // SAFETY: the asserts above keep every strided access inside the slices,
    // and `c` is a dense row-major m x n block that does not alias `a` or `b`.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            a_strides.0 as isize,
            a_strides.1 as isize,
            b.as_ptr(),
            b_strides.0 as isize,
            b_strides.1 as isize,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

/// Geometry shared by the forward and transposed layers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Geometry {
    in_ch: usize,
    out_ch: usize,
    kernel: usize,
}

impl Geometry {
    fn pad(&self) -> usize {
        (self.kernel - 1) / 2
    }

    fn rows(&self) -> usize {
        self.in_ch * self.kernel
    }
}

/// `cols[(c*k + j), i] = x[c, i + j - pad]`, zero outside the signal.
fn im2col(x: &[f64], g: Geometry, len: usize, cols: &mut [f64]) {
    let pad = g.pad() as isize;
    for c in 0..g.in_ch {
        let xc = &x[c * len..(c + 1) * len];
        for j in 0..g.kernel {
            let row = &mut cols[(c * g.kernel + j) * len..(c * g.kernel + j + 1) * len];
            let shift = j as isize - pad;
            for (i, v) in row.iter_mut().enumerate() {
                let src = i as isize + shift;
                *v = if src >= 0 && (src as usize) < len {
                    xc[src as usize]
                } else {
                    0.0
                };
            }
        }
    }
}

fn col2im_add(gcols: &[f64], g: Geometry, len: usize, gx: &mut [f64]) {
    let pad = g.pad() as isize;
    for c in 0..g.in_ch {
        let gxc = &mut gx[c * len..(c + 1) * len];
        for j in 0..g.kernel {
            let row = &gcols[(c * g.kernel + j) * len..(c * g.kernel + j + 1) * len];
            let shift = j as isize - pad;
            let lo = (-shift).max(0) as usize;
            let hi = ((len as isize - shift).min(len as isize)).max(0) as usize;
            for i in lo..hi {
                gxc[(i as isize + shift) as usize] += row[i];
            }
        }
    }
}

fn conv_forward(x: &Tensor3, weight: &[f64], bias: &[f64], g: Geometry) -> Tensor3 {
    let (batch, _, len) = x.shape();
    let mut out = Tensor3::zeros(batch, g.out_ch, len);
    let out_len = g.out_ch * len;
    out.data_mut()
        .par_chunks_mut(out_len.max(1))
        .enumerate()
        .for_each(|(b, out_b)| {
            let mut cols = vec![0.0; g.rows() * len];
            im2col(x.sample(b), g, len, &mut cols);
            for (o, row) in out_b.chunks_mut(len).enumerate() {
                row.iter_mut().for_each(|v| *v = bias[o]);
            }
            gemm(
                g.out_ch,
                g.rows(),
                len,
                weight,
                (g.rows(), 1),
                &cols,
                (len, 1),
                1.0,
                out_b,
            );
        });
    out
}

/// Returns (grad input, grad weight, grad bias).
fn conv_backward(
    x: &Tensor3,
    weight: &[f64],
    gout: &Tensor3,
    g: Geometry,
) -> (Tensor3, Vec<f64>, Vec<f64>) {
    let (batch, _, len) = x.shape();
    let rows = g.rows();
    let per_sample: Vec<(Vec<f64>, Vec<f64>, Vec<f64>)> = (0..batch)
        .into_par_iter()
        .map(|b| {
            let mut cols = vec![0.0; rows * len];
            im2col(x.sample(b), g, len, &mut cols);
            let go = gout.sample(b);
            let mut gw = vec![0.0; g.out_ch * rows];
            // gw = gout * cols^T
            gemm(
                g.out_ch,
                len,
                rows,
                go,
                (len, 1),
                &cols,
                (1, len),
                0.0,
                &mut gw,
            );
            let gb: Vec<f64> = go.chunks(len).map(|r| r.iter().sum()).collect();
            // gcols = W^T * gout, reusing the cols buffer
            gemm(
                rows,
                g.out_ch,
                len,
                weight,
                (1, rows),
                go,
                (len, 1),
                0.0,
                &mut cols,
            );
            let mut gx = vec![0.0; g.in_ch * len];
            col2im_add(&cols, g, len, &mut gx);
            (gx, gw, gb)
        })
        .collect();

    let mut grad_in = Tensor3::zeros(batch, g.in_ch, len);
    let mut gw = vec![0.0; g.out_ch * rows];
    let mut gb = vec![0.0; g.out_ch];
    let n = g.in_ch * len;
    for (b, (gx, w, bb)) in per_sample.into_iter().enumerate() {
        grad_in.data_mut()[b * n..(b + 1) * n].copy_from_slice(&gx);
        gw.iter_mut().zip(&w).for_each(|(a, v)| *a += v);
        gb.iter_mut().zip(&bb).for_each(|(a, v)| *a += v);
    }
    (grad_in, gw, gb)
}

fn check_kernel(kernel: usize) -> Result<()> {
    if kernel == 0 || kernel.is_multiple_of(2) {
        Err(Error::UnsupportedKernel(kernel))
    } else {
        Ok(())
    }
}

fn fan_in_uniform<R: Rng + ?Sized>(n: usize, fan_in: usize, rng: &mut R) -> Vec<f64> {
    let bound = (1.0 / fan_in as f64).sqrt();
    (0..n).map(|_| rng.random_range(-bound..=bound)).collect()
}

/// 1D convolution, weights `(out_ch, in_ch, k)`, cross-correlation
/// convention (no kernel flip), zero "same" padding.
#[derive(Debug, Clone, PartialEq)]
pub struct Conv1d {
    geometry: Geometry,
    pub weight: Param,
    pub bias: Param,
    cache: Option<Tensor3>,
}

impl Conv1d {
    /// Fan-in uniform initialization for weights and bias.
    pub fn new<R: Rng + ?Sized>(
        name: &str,
        in_ch: usize,
        out_ch: usize,
        kernel: usize,
        rng: &mut R,
    ) -> Result<Self> {
        check_kernel(kernel)?;
        let fan_in = in_ch * kernel;
        let w = fan_in_uniform(out_ch * in_ch * kernel, fan_in, rng);
        let b = fan_in_uniform(out_ch, fan_in, rng);
        Self::from_parts(name, in_ch, out_ch, kernel, w, b)
    }

    pub fn from_parts(
        name: &str,
        in_ch: usize,
        out_ch: usize,
        kernel: usize,
        weight: Vec<f64>,
        bias: Vec<f64>,
    ) -> Result<Self> {
        check_kernel(kernel)?;
        if weight.len() != out_ch * in_ch * kernel || bias.len() != out_ch {
            return Err(Error::Shape(format!(
                "conv {name}: weight {} / bias {} do not match ({out_ch}, {in_ch}, {kernel})",
                weight.len(),
                bias.len()
            )));
        }
        Ok(Self {
            geometry: Geometry {
                in_ch,
                out_ch,
                kernel,
            },
            weight: Param::new(
                format!("{name}.weight"),
                vec![out_ch, in_ch, kernel],
                weight,
            ),
            bias: Param::new(format!("{name}.bias"), vec![out_ch], bias),
            cache: None,
        })
    }

    pub fn in_channels(&self) -> usize {
        self.geometry.in_ch
    }

    pub fn out_channels(&self) -> usize {
        self.geometry.out_ch
    }

    pub fn kernel(&self) -> usize {
        self.geometry.kernel
    }

    fn check_input(&self, x: &Tensor3) -> Result<()> {
        if x.channels() != self.geometry.in_ch {
            return Err(Error::Shape(format!(
                "{} expects {} input channels, got {}",
                self.weight.name,
                self.geometry.in_ch,
                x.channels()
            )));
        }
        Ok(())
    }

    pub fn eval(&self, x: &Tensor3) -> Result<Tensor3> {
        self.check_input(x)?;
        Ok(conv_forward(
            x,
            &self.weight.value,
            &self.bias.value,
            self.geometry,
        ))
    }

    pub fn forward(&mut self, x: &Tensor3) -> Result<Tensor3> {
        let y = self.eval(x)?;
        self.cache = Some(x.clone());
        Ok(y)
    }

    pub fn backward(&mut self, gout: &Tensor3) -> Result<Tensor3> {
        let x = self.cache.take().ok_or(Error::State)?;
        let (gx, gw, gb) = conv_backward(&x, &self.weight.value, gout, self.geometry);
        self.weight
            .grad
            .iter_mut()
            .zip(&gw)
            .for_each(|(a, v)| *a += v);
        self.bias
            .grad
            .iter_mut()
            .zip(&gb)
            .for_each(|(a, v)| *a += v);
        Ok(gx)
    }

    pub fn params_mut(&mut self) -> [&mut Param; 2] {
        [&mut self.weight, &mut self.bias]
    }

    pub fn params(&self) -> [&Param; 2] {
        [&self.weight, &self.bias]
    }
}

/// Stride-1 transposed convolution, weights `(in_ch, out_ch, k)`.
///
/// With odd `k` and padding `(k-1)/2` this is the adjoint of [`Conv1d`]
/// sharing the same weight tensor, and it is evaluated as a forward
/// convolution with a flipped, channel-swapped kernel.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvTranspose1d {
    geometry: Geometry,
    pub weight: Param,
    pub bias: Param,
    cache: Option<Tensor3>,
}

impl ConvTranspose1d {
    pub fn new<R: Rng + ?Sized>(
        name: &str,
        in_ch: usize,
        out_ch: usize,
        kernel: usize,
        rng: &mut R,
    ) -> Result<Self> {
        check_kernel(kernel)?;
        let fan_in = in_ch * kernel;
        let w = fan_in_uniform(in_ch * out_ch * kernel, fan_in, rng);
        let b = fan_in_uniform(out_ch, fan_in, rng);
        Self::from_parts(name, in_ch, out_ch, kernel, w, b)
    }

    pub fn from_parts(
        name: &str,
        in_ch: usize,
        out_ch: usize,
        kernel: usize,
        weight: Vec<f64>,
        bias: Vec<f64>,
    ) -> Result<Self> {
        check_kernel(kernel)?;
        if weight.len() != out_ch * in_ch * kernel || bias.len() != out_ch {
            return Err(Error::Shape(format!(
                "tconv {name}: weight {} / bias {} do not match ({in_ch}, {out_ch}, {kernel})",
                weight.len(),
                bias.len()
            )));
        }
        Ok(Self {
            geometry: Geometry {
                in_ch,
                out_ch,
                kernel,
            },
            weight: Param::new(
                format!("{name}.weight"),
                vec![in_ch, out_ch, kernel],
                weight,
            ),
            bias: Param::new(format!("{name}.bias"), vec![out_ch], bias),
            cache: None,
        })
    }

    pub fn in_channels(&self) -> usize {
        self.geometry.in_ch
    }

    pub fn out_channels(&self) -> usize {
        self.geometry.out_ch
    }

    pub fn kernel(&self) -> usize {
        self.geometry.kernel
    }

    /// Equivalent forward-convolution geometry and `(out, in, k)` weights.
    fn as_conv(&self) -> (Geometry, Vec<f64>) {
        let Geometry {
            in_ch,
            out_ch,
            kernel,
        } = self.geometry;
        let mut w = vec![0.0; out_ch * in_ch * kernel];
        for c in 0..in_ch {
            for o in 0..out_ch {
                for j in 0..kernel {
                    w[(o * in_ch + c) * kernel + (kernel - 1 - j)] =
                        self.weight.value[(c * out_ch + o) * kernel + j];
                }
            }
        }
        (self.geometry, w)
    }

    fn check_input(&self, x: &Tensor3) -> Result<()> {
        if x.channels() != self.geometry.in_ch {
            return Err(Error::Shape(format!(
                "{} expects {} input channels, got {}",
                self.weight.name,
                self.geometry.in_ch,
                x.channels()
            )));
        }
        Ok(())
    }

    pub fn eval(&self, x: &Tensor3) -> Result<Tensor3> {
        self.check_input(x)?;
        let (g, w) = self.as_conv();
        Ok(conv_forward(x, &w, &self.bias.value, g))
    }

    pub fn forward(&mut self, x: &Tensor3) -> Result<Tensor3> {
        let y = self.eval(x)?;
        self.cache = Some(x.clone());
        Ok(y)
    }

    pub fn backward(&mut self, gout: &Tensor3) -> Result<Tensor3> {
        let x = self.cache.take().ok_or(Error::State)?;
        let (g, w) = self.as_conv();
        let (gx, gw_conv, gb) = conv_backward(&x, &w, gout, g);
        let Geometry {
            in_ch,
            out_ch,
            kernel,
        } = g;
        for c in 0..in_ch {
            for o in 0..out_ch {
                for j in 0..kernel {
                    self.weight.grad[(c * out_ch + o) * kernel + j] +=
                        gw_conv[(o * in_ch + c) * kernel + (kernel - 1 - j)];
                }
            }
        }
        self.bias
            .grad
            .iter_mut()
            .zip(&gb)
            .for_each(|(a, v)| *a += v);
        Ok(gx)
    }

    pub fn params_mut(&mut self) -> [&mut Param; 2] {
        [&mut self.weight, &mut self.bias]
    }

    pub fn params(&self) -> [&Param; 2] {
        [&self.weight, &self.bias]
    }
}

pub(crate) fn conv_named<'a>(w: &'a Param, b: &'a Param) -> [NamedTensor<'a>; 2] {
    [
        NamedTensor {
            name: &w.name,
            shape: &w.shape,
            data: &w.value,
        },
        NamedTensor {
            name: &b.name,
            shape: &b.shape,
            data: &b.value,
        },
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Direct evaluation of the defining sum.
    fn brute_conv(
        x: &[f64],
        in_ch: usize,
        len: usize,
        w: &[f64],
        out_ch: usize,
        k: usize,
        b: &[f64],
    ) -> Vec<f64> {
        let pad = (k - 1) / 2;
        let mut y = vec![0.0; out_ch * len];
        for o in 0..out_ch {
            for i in 0..len {
                let mut acc = b[o];
                for c in 0..in_ch {
                    for j in 0..k {
                        let src = i as isize + j as isize - pad as isize;
                        if src >= 0 && (src as usize) < len {
                            acc += w[(o * in_ch + c) * k + j] * x[c * len + src as usize];
                        }
                    }
                }
                y[o * len + i] = acc;
            }
        }
        y
    }

    fn t(v: &[f64], c: usize) -> Tensor3 {
        Tensor3::from_vec(v.to_vec(), (1, c, v.len() / c)).unwrap()
    }

    #[test]
    fn difference_kernel_example() {
        let conv = Conv1d::from_parts("c", 1, 1, 3, vec![1.0, 0.0, -1.0], vec![0.0]).unwrap();
        let y = conv.eval(&t(&[1.0, 2.0, 3.0], 1)).unwrap();
        assert_eq!(y.data(), &[-2.0, -2.0, 2.0]);
    }

    #[test]
    fn delta_and_bias_kernels() {
        let x = t(&[0.5, -1.0, 2.0, 4.0, 3.0], 1);
        let conv =
            Conv1d::from_parts("c", 1, 1, 5, vec![0.0, 0.0, 1.0, 0.0, 0.0], vec![0.0]).unwrap();
        assert_eq!(conv.eval(&x).unwrap(), x);
        let tconv =
            ConvTranspose1d::from_parts("t", 1, 1, 5, vec![0.0, 0.0, 1.0, 0.0, 0.0], vec![0.0])
                .unwrap();
        assert_eq!(tconv.eval(&x).unwrap(), x);
        let conv = Conv1d::from_parts("c", 1, 1, 3, vec![0.0; 3], vec![5.0]).unwrap();
        assert!(conv.eval(&x).unwrap().data().iter().all(|&v| v == 5.0));
        let tconv =
            ConvTranspose1d::from_parts("t", 1, 2, 3, vec![0.3; 6], vec![1.5, -2.0]).unwrap();
        let y = tconv.eval(&Tensor3::zeros(1, 1, 4)).unwrap();
        assert_eq!(y.data(), &[1.5, 1.5, 1.5, 1.5, -2.0, -2.0, -2.0, -2.0]);
    }

    #[test]
    fn gemm_path_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for &(cin, cout, k, len) in &[(1, 4, 7, 20), (3, 2, 5, 9), (2, 3, 1, 4), (4, 4, 9, 5)] {
            let conv = Conv1d::new("c", cin, cout, k, &mut rng).unwrap();
            let x: Vec<f64> = (0..2 * cin * len)
                .map(|_| rng.random_range(-1.0..1.0))
                .collect();
            let xt = Tensor3::from_vec(x.clone(), (2, cin, len)).unwrap();
            let y = conv.eval(&xt).unwrap();
            for b in 0..2 {
                let expect = brute_conv(
                    &x[b * cin * len..(b + 1) * cin * len],
                    cin,
                    len,
                    &conv.weight.value,
                    cout,
                    k,
                    &conv.bias.value,
                );
                for (p, q) in y.sample(b).iter().zip(&expect) {
                    assert!((p - q).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn transpose_is_adjoint() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for trial in 0..50 {
            let cin = rng.random_range(1..4);
            let cout = rng.random_range(1..4);
            let len = rng.random_range(1..=16);
            let k = [1, 3, 5][trial % 3];
            let w: Vec<f64> = (0..cin * cout * k)
                .map(|_| rng.random_range(-1.0..1.0))
                .collect();
            let conv = Conv1d::from_parts("c", cin, cout, k, w.clone(), vec![0.0; cout]).unwrap();
            // Same tensor read as (in=cout, out=cin, k).
            let tconv = ConvTranspose1d::from_parts("t", cout, cin, k, w, vec![0.0; cin]).unwrap();
            let x: Vec<f64> = (0..cin * len)
                .map(|_| rng.random_range(-1.0..1.0))
                .collect();
            let y: Vec<f64> = (0..cout * len)
                .map(|_| rng.random_range(-1.0..1.0))
                .collect();
            let cx = conv
                .eval(&Tensor3::from_vec(x.clone(), (1, cin, len)).unwrap())
                .unwrap();
            let ty = tconv
                .eval(&Tensor3::from_vec(y.clone(), (1, cout, len)).unwrap())
                .unwrap();
            let lhs: f64 = cx.data().iter().zip(&y).map(|(a, b)| a * b).sum();
            let rhs: f64 = x.iter().zip(ty.data()).map(|(a, b)| a * b).sum();
            assert!((lhs - rhs).abs() < 1e-10, "{lhs} vs {rhs}");
        }
    }

    #[test]
    fn shape_and_kernel_errors() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(
            Conv1d::new("c", 1, 1, 4, &mut rng),
            Err(Error::UnsupportedKernel(4))
        ));
        assert!(ConvTranspose1d::new("t", 1, 1, 2, &mut rng).is_err());
        let conv = Conv1d::new("c", 2, 1, 3, &mut rng).unwrap();
        assert!(matches!(
            conv.eval(&Tensor3::zeros(1, 1, 5)),
            Err(Error::Shape(_))
        ));
        let mut conv = conv;
        assert!(matches!(
            conv.backward(&Tensor3::zeros(1, 1, 5)),
            Err(Error::State)
        ));
    }

    #[test]
    fn init_is_seeded_and_bounded() {
        let a = Conv1d::new("c", 4, 8, 45, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let b = Conv1d::new("c", 4, 8, 45, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert_eq!(a, b);
        let bound = (1.0 / 180.0f64).sqrt();
        assert!(a.weight.value.iter().all(|v| v.abs() <= bound));
    }
}
