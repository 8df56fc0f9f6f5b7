//! Gated recurrent units over batches of equal-length sequences.
//!
//! Gate order in the stacked weights is reset, update, candidate:
//!
//! ```text
//! r  = σ(W_ir x + b_ir + W_hr h + b_hr)
//! z  = σ(W_iz x + b_iz + W_hz h + b_hz)
//! n  = tanh(W_in x + b_in + r ⊙ (W_hn h + b_hn))
//! h' = (1 - z) ⊙ n + z ⊙ h
//! ```

use ndarray::{s, Array2, Array3, ArrayView1, ArrayView2, ArrayView3, Axis};

use crate::error::{Error, Result};
use crate::nn::layers::linear;

#[derive(Debug, Clone, Copy)]
pub struct GruWeights<'a> {
    /// `(3H, D)`
    pub w_ih: ArrayView2<'a, f32>,
    /// `(3H, H)`
    pub w_hh: ArrayView2<'a, f32>,
    pub b_ih: ArrayView1<'a, f32>,
    pub b_hh: ArrayView1<'a, f32>,
}

impl GruWeights<'_> {
    pub fn hidden(&self) -> usize {
        self.w_hh.ncols()
    }

    fn check(&self, input_dim: usize) -> Result<()> {
        let h = self.hidden();
        let ok = self.w_ih.dim() == (3 * h, input_dim)
            && self.w_hh.dim() == (3 * h, h)
            && self.b_ih.len() == 3 * h
            && self.b_hh.len() == 3 * h;
        if ok {
            Ok(())
        } else {
            Err(Error::shape("gru weights", &[3 * h, input_dim], self.w_ih.shape()))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Backward,
}

#[inline]
fn sigmoid(v: f32) -> f32 {
    1.0 / (1.0 + (-v).exp())
}

/// Runs one direction over `(N, L, D)` from a zero state; output `(N, L, H)`.
/// A backward pass writes each state at its original time index.
pub fn gru(x: ArrayView3<f32>, w: GruWeights<'_>, direction: Direction) -> Result<Array3<f32>> {
    let (n, len, d) = x.dim();
    w.check(d)?;
    let h = w.hidden();
    let flat = x
        .as_standard_layout()
        .into_owned()
        .into_shape_with_order((n * len, d))
        .expect("standard layout");
    let gates_in = linear(flat.view(), w.w_ih, w.b_ih)?
        .into_shape_with_order((n, len, 3 * h))
        .expect("row count is n * len");

    let mut state = Array2::<f32>::zeros((n, h));
    let mut out = Array3::<f32>::zeros((n, len, h));
    let steps: Box<dyn Iterator<Item = usize>> = match direction {
        Direction::Forward => Box::new(0..len),
        Direction::Backward => Box::new((0..len).rev()),
    };
    for step in steps {
        let gates_h = linear(state.view(), w.w_hh, w.b_hh)?;
        let gi = gates_in.index_axis(Axis(1), step);
        for row in 0..n {
            let gi = gi.row(row);
            let gh = gates_h.row(row);
            let mut hrow = state.row_mut(row);
            for j in 0..h {
                let r = sigmoid(gi[j] + gh[j]);
                let z = sigmoid(gi[h + j] + gh[h + j]);
                let cand = (gi[2 * h + j] + r * gh[2 * h + j]).tanh();
                hrow[j] = (1.0 - z) * cand + z * hrow[j];
            }
        }
        out.slice_mut(s![.., step, ..]).assign(&state);
    }
    Ok(out)
}

/// Forward and backward passes concatenated on the feature axis: `(N, L, 2H)`.
pub fn bigru(
    x: ArrayView3<f32>,
    forward: GruWeights<'_>,
    backward: GruWeights<'_>,
) -> Result<Array3<f32>> {
    let f = gru(x, forward, Direction::Forward)?;
    let b = gru(x, backward, Direction::Backward)?;
    ndarray::concatenate(Axis(2), &[f.view(), b.view()])
        .map_err(|e| Error::InvalidArgument(format!("bigru concat: {e}")))
}
