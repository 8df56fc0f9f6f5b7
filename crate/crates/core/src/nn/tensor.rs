use ndarray::{Array3, Array4, ArrayView4, Axis};

use crate::error::{Error, Result};

/// Batch × channel × time × frequency activations, single precision.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap(Array4<f32>);

impl FeatureMap {
    pub fn new(data: Array4<f32>) -> Result<Self> {
        if data.shape().contains(&0) {
            return Err(Error::InvalidArgument(format!(
                "feature map axes must be non-empty, got {:?}",
                data.shape()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("feature map"));
        }
        Ok(Self(data))
    }

    pub(crate) fn from_raw(data: Array4<f32>) -> Self {
        Self(data)
    }

    pub fn zeros(shape: (usize, usize, usize, usize)) -> Self {
        Self(Array4::zeros(shape))
    }

    /// `(B, C, T, F)`.
    pub fn dim(&self) -> (usize, usize, usize, usize) {
        self.0.dim()
    }

    pub fn data(&self) -> &Array4<f32> {
        &self.0
    }

    pub fn view(&self) -> ArrayView4<'_, f32> {
        self.0.view()
    }

    pub fn into_data(self) -> Array4<f32> {
        self.0
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    /// Concatenates along the channel axis.
    pub fn concat_channels(maps: &[&FeatureMap]) -> Result<FeatureMap> {
        let views: Vec<_> = maps.iter().map(|m| m.0.view()).collect();
        ndarray::concatenate(Axis(1), &views)
            .map(FeatureMap)
            .map_err(|e| Error::InvalidArgument(format!("channel concat: {e}")))
    }

    /// Splits a batch into single-item maps.
    pub fn split_batch(&self) -> Vec<FeatureMap> {
        self.0
            .axis_iter(Axis(0))
            .map(|item| FeatureMap(item.insert_axis(Axis(0)).to_owned()))
            .collect()
    }

    /// `(B, C, T, F)` → `(B·F, T, C)`: one sequence per frequency bin.
    pub(crate) fn to_time_sequences(&self) -> Array3<f32> {
        let (b, c, t, f) = self.dim();
        let permuted = self.0.view().permuted_axes([0, 3, 2, 1]);
        permuted
            .as_standard_layout()
            .into_owned()
            .into_shape_with_order((b * f, t, c))
            .expect("contiguous after standard layout")
    }

    pub(crate) fn from_time_sequences(seq: Array3<f32>, b: usize, f: usize) -> Self {
        let (_, t, c) = seq.dim();
        let a = seq
            .into_shape_with_order((b, f, t, c))
            .expect("sequence count is b * f");
        Self(a.permuted_axes([0, 3, 2, 1]).as_standard_layout().into_owned())
    }

    /// `(B, C, T, F)` → `(B·T, F, C)`: one sequence per frame.
    pub(crate) fn to_freq_sequences(&self) -> Array3<f32> {
        let (b, c, t, f) = self.dim();
        let permuted = self.0.view().permuted_axes([0, 2, 3, 1]);
        permuted
            .as_standard_layout()
            .into_owned()
            .into_shape_with_order((b * t, f, c))
            .expect("contiguous after standard layout")
    }

    pub(crate) fn from_freq_sequences(seq: Array3<f32>, b: usize, t: usize) -> Self {
        let (_, f, c) = seq.dim();
        let a = seq
            .into_shape_with_order((b, t, f, c))
            .expect("sequence count is b * t");
        Self(a.permuted_axes([0, 3, 1, 2]).as_standard_layout().into_owned())
    }
}
