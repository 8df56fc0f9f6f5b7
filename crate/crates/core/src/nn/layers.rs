//! Primitive layers. Weights follow the usual `(out, in, kh, kw)` /
//! `(out, in)` layouts; axis 2 is time and axis 3 is frequency.

use ndarray::linalg::general_mat_mul;
use ndarray::{s, Array2, Array4, ArrayView1, ArrayView2, ArrayView4, Axis, Zip};

use crate::error::{Error, Result};
use crate::nn::tensor::FeatureMap;

pub const NORM_EPS: f64 = 1e-5;

/// Target element count of one im2col tile.
const TILE_ELEMS: usize = 1 << 21;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvGeometry {
    pub stride: (usize, usize),
    pub dilation: (usize, usize),
    pub padding: (usize, usize),
}

impl Default for ConvGeometry {
    fn default() -> Self {
        Self {
            stride: (1, 1),
            dilation: (1, 1),
            padding: (0, 0),
        }
    }
}

fn out_len(len: usize, pad: usize, dilation: usize, kernel: usize, stride: usize) -> Option<usize> {
    let span = dilation * (kernel - 1) + 1;
    (len + 2 * pad).checked_sub(span).map(|v| v / stride + 1)
}

/// 2D cross-correlation.
pub fn conv2d(
    x: &FeatureMap,
    weight: ArrayView4<f32>,
    bias: ArrayView1<f32>,
    geom: ConvGeometry,
) -> Result<FeatureMap> {
    let (b, cin, t, f) = x.dim();
    let (cout, wcin, kh, kw) = weight.dim();
    if wcin != cin || bias.len() != cout || kh == 0 || kw == 0 {
        return Err(Error::shape(
            "conv2d weight",
            &[cout, cin, kh, kw],
            &[weight.shape(), bias.shape()].concat(),
        ));
    }
    let (sh, sw) = geom.stride;
    let (dh, dw) = geom.dilation;
    let (ph, pw) = geom.padding;
    let (tout, fout) = match (out_len(t, ph, dh, kh, sh), out_len(f, pw, dw, kw, sw)) {
        (Some(a), Some(b)) if a > 0 && b > 0 => (a, b),
        _ => {
            return Err(Error::InvalidArgument(format!(
                "conv2d kernel {kh}x{kw} does not fit input {t}x{f}"
            )))
        }
    };
    let k = cin * kh * kw;
    let w2 = weight
        .as_standard_layout()
        .into_owned()
        .into_shape_with_order((cout, k))
        .expect("contiguous weight");
    let rows_per_tile = (TILE_ELEMS / (k * fout)).clamp(1, tout);
    let input = x.view();

    let mut out = Array4::<f32>::zeros((b, cout, tout, fout));
    let mut cols = Array2::<f32>::zeros((k, rows_per_tile * fout));
    for bi in 0..b {
        let src = input.index_axis(Axis(0), bi);
        let mut dst = out
            .index_axis_mut(Axis(0), bi)
            .into_shape_with_order((cout, tout * fout))
            .expect("fresh output is contiguous");
        let mut row0 = 0;
        while row0 < tout {
            let rows = rows_per_tile.min(tout - row0);
            let width = rows * fout;
            let mut tile = cols.slice_mut(s![.., ..width]);
            for ci in 0..cin {
                let plane = src.index_axis(Axis(0), ci);
                for ki in 0..kh {
                    for kj in 0..kw {
                        let r = (ci * kh + ki) * kw + kj;
                        let mut line = tile.row_mut(r);
                        for dr in 0..rows {
                            let ti = ((row0 + dr) * sh + ki * dh) as isize - ph as isize;
                            let seg = &mut line.as_slice_mut().expect("row of standard array")
                                [dr * fout..(dr + 1) * fout];
                            if ti < 0 || ti >= t as isize {
                                seg.fill(0.0);
                                continue;
                            }
                            let srow = plane.row(ti as usize);
                            for (fo, v) in seg.iter_mut().enumerate() {
                                let fi = (fo * sw + kj * dw) as isize - pw as isize;
                                *v = if fi < 0 || fi >= f as isize {
                                    0.0
                                } else {
                                    srow[fi as usize]
                                };
                            }
                        }
                    }
                }
            }
            let mut target = dst.slice_mut(s![.., row0 * fout..row0 * fout + width]);
            for (mut row, &bv) in target.axis_iter_mut(Axis(0)).zip(bias.iter()) {
                row.fill(bv);
            }
            general_mat_mul(1.0, &w2, &cols.slice(s![.., ..width]), 1.0, &mut target);
            row0 += rows;
        }
    }
    Ok(FeatureMap::from_raw(out))
}

/// Normalizes each (item, channel) plane to zero mean and unit variance, then
/// applies a per-channel affine map.
pub fn instance_norm(
    x: &FeatureMap,
    weight: ArrayView1<f32>,
    bias: ArrayView1<f32>,
) -> Result<FeatureMap> {
    let (_, c, t, f) = x.dim();
    if weight.len() != c || bias.len() != c {
        return Err(Error::shape("instance norm affine", &[c], weight.shape()));
    }
    if t * f < 2 {
        return Err(Error::InvalidArgument(
            "instance norm needs at least two elements per plane".into(),
        ));
    }
    let mut out = x.data().clone();
    let n = (t * f) as f64;
    for mut item in out.axis_iter_mut(Axis(0)) {
        for (ci, mut plane) in item.axis_iter_mut(Axis(0)).enumerate() {
            let mean = plane.iter().map(|&v| v as f64).sum::<f64>() / n;
            let var = plane
                .iter()
                .map(|&v| (v as f64 - mean).powi(2))
                .sum::<f64>()
                / n;
            let scale = weight[ci] as f64 / (var + NORM_EPS).sqrt();
            let shift = bias[ci] as f64;
            plane.mapv_inplace(|v| ((v as f64 - mean) * scale + shift) as f32);
        }
    }
    Ok(FeatureMap::from_raw(out))
}

/// Per-channel parametric ReLU; a single slope is broadcast to every channel.
pub fn prelu(x: &FeatureMap, slope: ArrayView1<f32>) -> Result<FeatureMap> {
    let c = x.dim().1;
    if slope.len() != c && slope.len() != 1 {
        return Err(Error::shape("prelu slope", &[c], slope.shape()));
    }
    let mut out = x.data().clone();
    for (ci, mut ch) in out.axis_iter_mut(Axis(1)).enumerate() {
        let a = if slope.len() == 1 { slope[0] } else { slope[ci] };
        ch.mapv_inplace(|v| if v >= 0.0 { v } else { a * v });
    }
    Ok(FeatureMap::from_raw(out))
}

#[inline]
pub fn prelu_scalar(v: f32, slope: f32) -> f32 {
    if v >= 0.0 {
        v
    } else {
        slope * v
    }
}

/// Learnable sigmoid `β / (1 + e^{1 - α_f x})`, with `α` indexed by the last axis.
pub fn lsigmoid(x: &FeatureMap, alpha: ArrayView1<f32>, beta: f32) -> Result<FeatureMap> {
    let f = x.dim().3;
    if alpha.len() != f {
        return Err(Error::shape("lsigmoid alpha", &[f], alpha.shape()));
    }
    let mut out = x.data().clone();
    for mut lane in out.lanes_mut(Axis(3)) {
        Zip::from(&mut lane)
            .and(&alpha)
            .for_each(|v, &a| *v = beta / (1.0 + (1.0 - a * *v).exp()));
    }
    Ok(FeatureMap::from_raw(out))
}

/// Rearranges `(B, C·r, T, F)` into `(B, C, T, F·r)`; output bin `f·r + j`
/// comes from input channel `c·r + j`.
pub fn pixel_shuffle_freq(x: &FeatureMap, factor: usize) -> Result<FeatureMap> {
    let (b, cr, t, f) = x.dim();
    if factor == 0 || cr % factor != 0 {
        return Err(Error::InvalidArgument(format!(
            "{cr} channels not divisible by upsampling factor {factor}"
        )));
    }
    let c = cr / factor;
    let shuffled = x
        .data()
        .view()
        .into_shape_with_order((b, c, factor, t, f))
        .expect("contiguous feature map")
        .permuted_axes([0, 1, 3, 4, 2])
        .as_standard_layout()
        .into_owned()
        .into_shape_with_order((b, c, t, f * factor))
        .expect("standard layout");
    Ok(FeatureMap::from_raw(shuffled))
}

/// Keeps the first `bins` frequency bins.
pub fn crop_freq(x: &FeatureMap, bins: usize) -> Result<FeatureMap> {
    let f = x.dim().3;
    if bins > f {
        return Err(Error::InvalidArgument(format!("cannot crop {f} bins to {bins}")));
    }
    Ok(FeatureMap::from_raw(
        x.data().slice(s![.., .., .., ..bins]).to_owned(),
    ))
}

/// Row-wise affine map `x Wᵀ + b` for `x` of shape `(N, in)`.
pub fn linear(x: ArrayView2<f32>, weight: ArrayView2<f32>, bias: ArrayView1<f32>) -> Result<Array2<f32>> {
    let (n, din) = x.dim();
    let (dout, win) = weight.dim();
    if win != din || bias.len() != dout {
        return Err(Error::shape("linear weight", &[dout, din], weight.shape()));
    }
    let mut out = Array2::from_shape_fn((n, dout), |(_, j)| bias[j]);
    general_mat_mul(1.0, &x, &weight.t(), 1.0, &mut out);
    Ok(out)
}

/// Normalizes every row of `(N, D)` over its `D` features.
pub fn layer_norm(x: ArrayView2<f32>, weight: ArrayView1<f32>, bias: ArrayView1<f32>) -> Result<Array2<f32>> {
    let d = x.ncols();
    if weight.len() != d || bias.len() != d {
        return Err(Error::shape("layer norm affine", &[d], weight.shape()));
    }
    let mut out = x.to_owned();
    for mut row in out.axis_iter_mut(Axis(0)) {
        let mean = row.iter().map(|&v| v as f64).sum::<f64>() / d as f64;
        let var = row.iter().map(|&v| (v as f64 - mean).powi(2)).sum::<f64>() / d as f64;
        let inv = 1.0 / (var + NORM_EPS).sqrt();
        Zip::from(&mut row)
            .and(&weight)
            .and(&bias)
            .for_each(|v, &g, &b| *v = ((*v as f64 - mean) * inv) as f32 * g + b);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{arr1, Array1};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_map(rng: &mut ChaCha8Rng, shape: (usize, usize, usize, usize)) -> FeatureMap {
        FeatureMap::new(Array4::from_shape_fn(shape, |_| rng.random_range(-1.0..1.0))).unwrap()
    }

    /// Direct nested-loop convolution.
    fn conv_oracle(
        x: &Array4<f32>,
        w: &Array4<f32>,
        b: &Array1<f32>,
        g: ConvGeometry,
    ) -> Array4<f32> {
        let (bn, cin, t, f) = x.dim();
        let (cout, _, kh, kw) = w.dim();
        let tout = (t + 2 * g.padding.0 - g.dilation.0 * (kh - 1) - 1) / g.stride.0 + 1;
        let fout = (f + 2 * g.padding.1 - g.dilation.1 * (kw - 1) - 1) / g.stride.1 + 1;
        Array4::from_shape_fn((bn, cout, tout, fout), |(bi, co, to, fo)| {
            let mut acc = b[co] as f64;
            for ci in 0..cin {
                for ki in 0..kh {
                    for kj in 0..kw {
                        let ti = (to * g.stride.0 + ki * g.dilation.0) as isize - g.padding.0 as isize;
                        let fi = (fo * g.stride.1 + kj * g.dilation.1) as isize - g.padding.1 as isize;
                        if ti >= 0 && fi >= 0 && (ti as usize) < t && (fi as usize) < f {
                            acc += (w[[co, ci, ki, kj]] * x[[bi, ci, ti as usize, fi as usize]]) as f64;
                        }
                    }
                }
            }
            acc as f32
        })
    }

    #[test]
    fn conv_identity_kernel() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = random_map(&mut rng, (1, 3, 4, 5));
        let mut w = Array4::zeros((3, 3, 1, 1));
        for c in 0..3 {
            w[[c, c, 0, 0]] = 1.0;
        }
        let y = conv2d(&x, w.view(), Array1::zeros(3).view(), ConvGeometry::default()).unwrap();
        assert_eq!(y, x);
    }

    #[test]
    fn conv_ones_kernel_counts_neighbours() {
        let x = FeatureMap::new(Array4::ones((1, 1, 5, 6))).unwrap();
        let w = Array4::ones((1, 1, 3, 3));
        let g = ConvGeometry {
            padding: (1, 1),
            ..ConvGeometry::default()
        };
        let y = conv2d(&x, w.view(), arr1(&[0.0]).view(), g).unwrap();
        let d = y.data();
        assert_eq!(d.dim(), (1, 1, 5, 6));
        assert_eq!(d[[0, 0, 2, 2]], 9.0);
        assert_eq!(d[[0, 0, 0, 0]], 4.0);
        assert_eq!(d[[0, 0, 4, 5]], 4.0);
        assert_eq!(d[[0, 0, 0, 3]], 6.0);
    }

    #[test]
    fn conv_stride_halves_frequency() {
        let x = FeatureMap::zeros((1, 2, 3, 201));
        let g = ConvGeometry {
            stride: (1, 2),
            padding: (0, 1),
            ..ConvGeometry::default()
        };
        let y = conv2d(&x, Array4::zeros((4, 2, 1, 3)).view(), Array1::zeros(4).view(), g).unwrap();
        assert_eq!(y.dim(), (1, 4, 3, 101));
    }

    #[test]
    fn conv_matches_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let geoms = [
            ConvGeometry { stride: (1, 2), dilation: (1, 1), padding: (0, 1) },
            ConvGeometry { stride: (1, 1), dilation: (4, 1), padding: (4, 1) },
            ConvGeometry { stride: (2, 1), dilation: (1, 2), padding: (1, 2) },
        ];
        for g in geoms {
            let x = random_map(&mut rng, (2, 3, 9, 11));
            let w = Array4::from_shape_fn((4, 3, 3, 3), |_| rng.random_range(-1.0..1.0));
            let b = Array1::from_shape_fn(4, |_| rng.random_range(-1.0..1.0));
            let y = conv2d(&x, w.view(), b.view(), g).unwrap();
            let oracle = conv_oracle(x.data(), &w, &b, g);
            assert_eq!(y.dim(), oracle.dim());
            for (a, o) in y.data().iter().zip(oracle.iter()) {
                assert!((a - o).abs() < 1e-5);
            }
        }
    }

    #[test]
    fn conv_rejects_mismatch() {
        let x = FeatureMap::zeros((1, 2, 3, 3));
        assert!(conv2d(&x, Array4::zeros((1, 3, 1, 1)).view(), arr1(&[0.0]).view(), ConvGeometry::default()).is_err());
        assert!(conv2d(&x, Array4::zeros((1, 2, 5, 1)).view(), arr1(&[0.0]).view(), ConvGeometry::default()).is_err());
    }

    #[test]
    fn instance_norm_moments() {
        let one = arr1(&[1.0f32, 1.0]);
        let zero = arr1(&[0.0f32, 0.0]);
        let constant = FeatureMap::new(Array4::from_elem((1, 2, 3, 4), 3.5)).unwrap();
        let y = instance_norm(&constant, one.view(), zero.view()).unwrap();
        assert!(y.data().iter().all(|&v| v == 0.0));

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = random_map(&mut rng, (2, 2, 8, 9));
        let y = instance_norm(&x, one.view(), zero.view()).unwrap();
        for item in y.data().outer_iter() {
            for plane in item.outer_iter() {
                let n = plane.len() as f64;
                let mean = plane.iter().map(|&v| v as f64).sum::<f64>() / n;
                let var = plane.iter().map(|&v| (v as f64 - mean).powi(2)).sum::<f64>() / n;
                assert!(mean.abs() < 1e-6);
                assert!((var - 1.0).abs() < 1e-4);
            }
        }
        // a standardized input is a fixed point up to the eps shrinkage
        let again = instance_norm(&y, one.view(), zero.view()).unwrap();
        for (a, b) in again.data().iter().zip(y.data().iter()) {
            assert!((a - b).abs() < 1e-5 * (1.0 + b.abs()));
        }
        let affine = instance_norm(&x, arr1(&[2.0, 2.0]).view(), arr1(&[1.0, 1.0]).view()).unwrap();
        for (a, b) in affine.data().iter().zip(y.data().iter()) {
            assert!((a - (2.0 * b + 1.0)).abs() < 1e-5);
        }
    }

    #[test]
    fn prelu_values() {
        let x = FeatureMap::new(Array4::from_shape_vec((1, 1, 1, 3), vec![0.0, 2.0, -2.0]).unwrap())
            .unwrap();
        let y = prelu(&x, arr1(&[0.25]).view()).unwrap();
        assert_eq!(y.data().iter().copied().collect::<Vec<_>>(), vec![0.0, 2.0, -0.5]);
    }

    #[test]
    fn lsigmoid_values() {
        let x = FeatureMap::new(Array4::from_shape_vec((1, 1, 1, 3), vec![1.0, 0.0, 50.0]).unwrap())
            .unwrap();
        let y = lsigmoid(&x, arr1(&[1.0, 3.0, 1.0]).view(), 2.0).unwrap();
        let d = y.data();
        assert_eq!(d[[0, 0, 0, 0]], 1.0);
        // 2 / (1 + e) = 0.53788284273999024...
        assert!((d[[0, 0, 0, 1]] - 0.537_882_84).abs() < 1e-6);
        assert!((d[[0, 0, 0, 2]] - 2.0).abs() < 1e-6);
        assert!(lsigmoid(&x, arr1(&[1.0]).view(), 2.0).is_err());
    }

    #[test]
    fn pixel_shuffle_layout() {
        let x = FeatureMap::new(
            Array4::from_shape_vec((1, 4, 1, 2), (0..8).map(|v| v as f32).collect()).unwrap(),
        )
        .unwrap();
        let y = pixel_shuffle_freq(&x, 2).unwrap();
        assert_eq!(y.dim(), (1, 2, 1, 4));
        // channel 0 interleaves input channels 0 and 1
        assert_eq!(y.data().iter().copied().collect::<Vec<_>>(), vec![0., 2., 1., 3., 4., 6., 5., 7.]);

        let wide = FeatureMap::zeros((1, 128, 32, 101));
        let up = pixel_shuffle_freq(&wide, 2).unwrap();
        assert_eq!(up.dim(), (1, 64, 32, 202));
        assert_eq!(128 * 101, 64 * 202);
        assert_eq!(crop_freq(&up, 201).unwrap().dim(), (1, 64, 32, 201));
        assert!(pixel_shuffle_freq(&FeatureMap::zeros((1, 3, 1, 1)), 2).is_err());
    }

    #[test]
    fn linear_and_layer_norm() {
        let x = Array2::from_shape_vec((2, 3), vec![1.0, 2.0, 3.0, -1.0, 0.0, 1.0]).unwrap();
        let w = Array2::from_shape_vec((2, 3), vec![1.0, 0.0, 0.0, 1.0, 1.0, 1.0]).unwrap();
        let y = linear(x.view(), w.view(), arr1(&[0.5, -0.5]).view()).unwrap();
        assert_eq!(y, Array2::from_shape_vec((2, 2), vec![1.5, 5.5, -0.5, -0.5]).unwrap());

        let n = layer_norm(x.view(), arr1(&[1.0; 3]).view(), arr1(&[0.0; 3]).view()).unwrap();
        for row in n.outer_iter() {
            assert!(row.sum().abs() < 1e-6);
            assert!((row.iter().map(|v| v * v).sum::<f32>() / 3.0 - 1.0).abs() < 1e-4);
        }
    }
}
