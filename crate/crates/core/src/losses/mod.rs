//! Training objectives: spectral losses, metric-discriminator losses and the
//! weighted generator total, plus finite-difference gradient verification.

pub mod adversarial;
pub mod gradcheck;
pub mod spectral;

use std::fmt::Write as _;

use ndarray::{Array2, ArrayView2, Zip};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::spectral::{decompress, Stft, StftConfig};

pub use adversarial::{
    loss_discriminator, loss_metric, normalize_pesq, ConstantDiscriminator, Discriminator,
    QualityOracle,
};
pub use gradcheck::{central_differences, fd_gradient_check, max_relative_error};
pub use spectral::{
    loss_complex, loss_consistency, loss_magnitude, loss_phase, ComplexLoss, PhaseLoss,
};

/// Coefficients of the generator objective.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    pub mag: f64,
    pub pha: f64,
    pub com: f64,
    pub con: f64,
    pub metric: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            mag: 0.9,
            pha: 0.3,
            com: 0.1,
            con: 0.1,
            metric: 0.05,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        let all = [self.mag, self.pha, self.com, self.con, self.metric];
        if all.iter().all(|w| w.is_finite() && *w >= 0.0) {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!(
                "loss weights must be non-negative, got {all:?}"
            )))
        }
    }
}

/// Unweighted component losses.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ComponentLosses {
    pub mag: f64,
    pub ip: f64,
    pub gd: f64,
    pub iaf: f64,
    pub com: f64,
    pub con: f64,
    pub metric: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossReport {
    pub mag: f64,
    pub ip: f64,
    pub gd: f64,
    pub iaf: f64,
    pub pha: f64,
    pub com: f64,
    pub con: f64,
    pub metric: f64,
    pub total: f64,
    /// Gradient of the total w.r.t. the predicted compressed magnitude,
    /// excluding the consistency and metric terms.
    pub grad_mag_c: Option<Array2<f64>>,
    /// Gradient of the total w.r.t. the predicted phase, with the same exclusions.
    pub grad_phase: Option<Array2<f64>>,
}

const REPORT_KEYS: [&str; 9] = [
    "mag", "ip", "gd", "iaf", "pha", "com", "con", "metric", "total",
];

impl LossReport {
    pub fn from_components(c: ComponentLosses, w: &LossWeights) -> Self {
        let pha = c.ip + c.gd + c.iaf;
        let total = exact_sum(&[
            w.mag * c.mag,
            w.pha * pha,
            w.com * c.com,
            w.con * c.con,
            w.metric * c.metric,
        ]);
        Self {
            mag: c.mag,
            ip: c.ip,
            gd: c.gd,
            iaf: c.iaf,
            pha,
            com: c.com,
            con: c.con,
            metric: c.metric,
            total,
            grad_mag_c: None,
            grad_phase: None,
        }
    }

    fn values(&self) -> [f64; 9] {
        [
            self.mag, self.ip, self.gd, self.iaf, self.pha, self.com, self.con, self.metric,
            self.total,
        ]
    }

    /// One `name=value` line per scalar, 17 significant digits.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (k, v) in REPORT_KEYS.iter().zip(self.values()) {
            writeln!(out, "{k}={}", format_g17(v)).unwrap();
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut vals = [None; 9];
        for line in text.lines().map(str::trim).filter(|l| !l.is_empty()) {
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::InvalidArgument(format!("malformed report line {line:?}")))?;
            let idx = REPORT_KEYS
                .iter()
                .position(|key| *key == k.trim())
                .ok_or_else(|| Error::InvalidArgument(format!("unknown report key {k:?}")))?;
            let parsed: f64 = v
                .trim()
                .parse()
                .map_err(|_| Error::InvalidArgument(format!("bad value for {k}: {v:?}")))?;
            vals[idx] = Some(parsed);
        }
        let get = |i: usize| {
            vals[i].ok_or_else(|| Error::InvalidArgument(format!("missing key {}", REPORT_KEYS[i])))
        };
        Ok(Self {
            mag: get(0)?,
            ip: get(1)?,
            gd: get(2)?,
            iaf: get(3)?,
            pha: get(4)?,
            com: get(5)?,
            con: get(6)?,
            metric: get(7)?,
            total: get(8)?,
            grad_mag_c: None,
            grad_phase: None,
        })
    }
}

pub(crate) fn format_g17(v: f64) -> String {
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    format!("{v:.16e}")
}

/// Correctly rounded sum of a few terms (Shewchuk's partials).
fn exact_sum(terms: &[f64]) -> f64 {
    let mut partials: Vec<f64> = Vec::new();
    for &x in terms {
        let mut x = x;
        let mut kept = 0;
        for i in 0..partials.len() {
            let mut y = partials[i];
            if x.abs() < y.abs() {
                std::mem::swap(&mut x, &mut y);
            }
            let hi = x + y;
            let lo = y - (hi - x);
            if lo != 0.0 {
                partials[kept] = lo;
                kept += 1;
            }
            x = hi;
        }
        partials.truncate(kept);
        partials.push(x);
    }
    // Adding partials from the top is exact except for the final rounding,
    // which needs a half-way correction.
    let mut n = partials.len();
    if n == 0 {
        return 0.0;
    }
    n -= 1;
    let mut hi = partials[n];
    let mut lo = 0.0;
    while n > 0 {
        n -= 1;
        let x = hi;
        let y = partials[n];
        hi = x + y;
        lo = y - (hi - x);
        if lo != 0.0 {
            break;
        }
    }
    if n > 0 && ((lo < 0.0 && partials[n - 1] < 0.0) || (lo > 0.0 && partials[n - 1] > 0.0)) {
        let y = lo * 2.0;
        let x = hi + y;
        if y == x - hi {
            hi = x;
        }
    }
    hi
}

/// Clean-speech targets and model predictions for one utterance.
#[derive(Debug, Clone, Copy)]
pub struct GeneratorInputs<'a> {
    /// Compressed clean magnitude.
    pub target_mag_c: ArrayView2<'a, f64>,
    pub target_phase: ArrayView2<'a, f64>,
    /// Uncompressed clean complex spectrum.
    pub target_complex: ArrayView2<'a, Complex64>,
    pub pred_mag_c: ArrayView2<'a, f64>,
    pub pred_phase: ArrayView2<'a, f64>,
    /// Generator metric loss, computed by the caller with its discriminator.
    pub metric: f64,
}

/// Evaluates every component and the weighted total for one utterance.
pub fn loss_generator_total(
    inputs: &GeneratorInputs<'_>,
    stft: &StftConfig,
    weights: &LossWeights,
) -> Result<LossReport> {
    weights.validate()?;
    let engine = Stft::new(stft)?;
    evaluate(inputs, &engine, weights)
}

fn evaluate(inputs: &GeneratorInputs<'_>, engine: &Stft, weights: &LossWeights) -> Result<LossReport> {
    let c = engine.config().compression;
    let (mag, grad_mag) = loss_magnitude(inputs.target_mag_c, inputs.pred_mag_c)?;
    let phase = loss_phase(inputs.target_phase, inputs.pred_phase)?;
    let pred_mag = decompress(inputs.pred_mag_c, c)?;
    let complex = loss_complex(inputs.target_complex, pred_mag.view(), inputs.pred_phase)?;
    let pred_spec = crate::spectral::ComplexSpectrum::from_polar(pred_mag.view(), inputs.pred_phase)?;
    let con = spectral::consistency_with(engine, &pred_spec)?;

    let mut report = LossReport::from_components(
        ComponentLosses {
            mag,
            ip: phase.ip,
            gd: phase.gd,
            iaf: phase.iaf,
            com: complex.value,
            con,
            metric: inputs.metric,
        },
        weights,
    );

    // chain through m = m_c^(1/c)
    let mut grad_mag_c = grad_mag * weights.mag;
    Zip::from(&mut grad_mag_c)
        .and(&complex.grad_mag)
        .and(&inputs.pred_mag_c)
        .for_each(|g, &gm, &mc| {
            *g += weights.com * gm * mc.powf(1.0 / c - 1.0) / c;
        });
    let grad_phase = phase.grad * weights.pha + complex.grad_phase * weights.com;
    report.grad_mag_c = Some(grad_mag_c);
    report.grad_phase = Some(grad_phase);
    Ok(report)
}

/// Batch version: each component is averaged over items of identical shape,
/// which equals the full-grid mean over the batch. Gradients are omitted.
pub fn loss_generator_batch(
    items: &[GeneratorInputs<'_>],
    stft: &StftConfig,
    weights: &LossWeights,
) -> Result<LossReport> {
    weights.validate()?;
    let first = items
        .first()
        .ok_or_else(|| Error::InvalidArgument("empty batch".into()))?;
    let engine = Stft::new(stft)?;
    let mut sum = ComponentLosses::default();
    for item in items {
        if item.pred_mag_c.dim() != first.pred_mag_c.dim() {
            return Err(Error::shape(
                "batch item",
                first.pred_mag_c.shape(),
                item.pred_mag_c.shape(),
            ));
        }
        let r = evaluate(item, &engine, weights)?;
        sum.mag += r.mag;
        sum.ip += r.ip;
        sum.gd += r.gd;
        sum.iaf += r.iaf;
        sum.com += r.com;
        sum.con += r.con;
        sum.metric += r.metric;
    }
    let n = items.len() as f64;
    let mean = ComponentLosses {
        mag: sum.mag / n,
        ip: sum.ip / n,
        gd: sum.gd / n,
        iaf: sum.iaf / n,
        com: sum.com / n,
        con: sum.con / n,
        metric: sum.metric / n,
    };
    Ok(LossReport::from_components(mean, weights))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    use crate::spectral::{compress, mag_phase, stft};
    use crate::waveform::Waveform;

    #[test]
    fn default_weights_total() {
        let ones = ComponentLosses {
            mag: 1.0,
            ip: 0.5,
            gd: 0.25,
            iaf: 0.25,
            com: 1.0,
            con: 1.0,
            metric: 1.0,
        };
        let r = LossReport::from_components(ones, &LossWeights::default());
        assert_eq!(r.pha, 1.0);
        assert_eq!(r.total, 1.45);
        let zero = LossReport::from_components(ComponentLosses::default(), &LossWeights::default());
        assert_eq!(zero.total, 0.0);
    }

    #[test]
    fn total_is_dot_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let c = ComponentLosses {
                mag: rng.random(),
                ip: rng.random(),
                gd: rng.random(),
                iaf: rng.random(),
                com: rng.random(),
                con: rng.random(),
                metric: rng.random(),
            };
            let w = LossWeights {
                mag: rng.random(),
                pha: rng.random(),
                com: rng.random(),
                con: rng.random(),
                metric: rng.random(),
            };
            let r = LossReport::from_components(c, &w);
            let dot = w.mag * c.mag
                + w.pha * (c.ip + c.gd + c.iaf)
                + w.com * c.com
                + w.con * c.con
                + w.metric * c.metric;
            assert!((r.total - dot).abs() < 1e-14);
            assert_eq!(r.pha, r.ip + r.gd + r.iaf);
        }
    }

    #[test]
    fn exact_sum_is_correctly_rounded() {
        assert_eq!(exact_sum(&[0.9, 0.3, 0.1, 0.1, 0.05]), 1.45);
        assert_eq!(exact_sum(&[1e100, 1.0, -1e100]), 1.0);
        assert_eq!(exact_sum(&[]), 0.0);
        assert_eq!(exact_sum(&[0.1; 10]), 1.0);
    }

    #[test]
    fn text_roundtrip_is_exact() {
        let r = LossReport::from_components(
            ComponentLosses {
                mag: 0.1,
                ip: 1.0 / 3.0,
                gd: 2.0f64.sqrt(),
                iaf: 1e-300,
                com: 7.25,
                con: 0.0,
                metric: 0.0625,
            },
            &LossWeights::default(),
        );
        let text = r.to_text();
        assert_eq!(text.lines().count(), 9);
        assert!(text.starts_with("mag=1.0000000000000001e-1\n"));
        assert_eq!(LossReport::from_text(&text).unwrap(), r);
        assert!(LossReport::from_text("mag=1\n").is_err());
        assert!(LossReport::from_text("bogus=1\n").is_err());
    }

    #[test]
    fn negative_weights_rejected() {
        let w = LossWeights {
            con: -0.1,
            ..LossWeights::default()
        };
        assert!(w.validate().is_err());
    }

    fn fixture(seed: u64) -> (Array2<f64>, Array2<f64>, Array2<Complex64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w = Waveform::new((0..1200).map(|_| rng.random_range(-0.5..0.5)).collect(), 16000)
            .unwrap();
        let spec = stft(&w, &StftConfig::default()).unwrap();
        let (m, p) = mag_phase(&spec);
        (
            compress(m.view(), 0.3).unwrap(),
            p.into_values(),
            spec.into_values(),
        )
    }

    #[test]
    fn generator_total_zero_at_truth() {
        let (mc, p, x) = fixture(1);
        let inputs = GeneratorInputs {
            target_mag_c: mc.view(),
            target_phase: p.view(),
            target_complex: x.view(),
            pred_mag_c: mc.view(),
            pred_phase: p.view(),
            metric: 0.0,
        };
        let r = loss_generator_total(&inputs, &StftConfig::default(), &LossWeights::default())
            .unwrap();
        assert_eq!(r.mag, 0.0);
        assert_eq!(r.pha, 0.0);
        assert!(r.com < 1e-20);
        assert!(r.con < 1e-12);
        assert!(r.total < 1e-12);
    }

    #[test]
    fn generator_gradients_match_finite_differences() {
        let (mc, p, x) = fixture(2);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let pred_mc = mc.mapv(|v| v * rng.random_range(0.5..1.5) + 0.05);
        let pred_p = p.mapv(|v| v + rng.random_range(-1.0..1.0));
        let cfg = StftConfig::default();
        let w = LossWeights::default();
        let r = loss_generator_total(
            &GeneratorInputs {
                target_mag_c: mc.view(),
                target_phase: p.view(),
                target_complex: x.view(),
                pred_mag_c: pred_mc.view(),
                pred_phase: pred_p.view(),
                metric: 0.0,
            },
            &cfg,
            &w,
        )
        .unwrap();
        // the gradient covers the magnitude, phase and complex terms
        let smooth = |mc_pred: &Array2<f64>, p_pred: &Array2<f64>| {
            let m = decompress(mc_pred.view(), 0.3).unwrap();
            w.mag * loss_magnitude(mc.view(), mc_pred.view()).unwrap().0
                + w.pha * loss_phase(p.view(), p_pred.view()).unwrap().total()
                + w.com * loss_complex(x.view(), m.view(), p_pred.view()).unwrap().value
        };
        let grad_m = r.grad_mag_c.unwrap();
        let grad_p = r.grad_phase.unwrap();
        let h = 1e-6;
        let dim = mc.dim();
        for idx in [(0, 0), (3, 17), (7, 100), (dim.0 - 1, dim.1 - 1)] {
            let mut plus = pred_mc.clone();
            plus[idx] += h;
            let mut minus = pred_mc.clone();
            minus[idx] -= h;
            let fd = (smooth(&plus, &pred_p) - smooth(&minus, &pred_p)) / (2.0 * h);
            assert!(max_relative_error(&[grad_m[idx]], &[fd]) < 1e-4, "{idx:?}");

            let mut plus = pred_p.clone();
            plus[idx] += h;
            let mut minus = pred_p.clone();
            minus[idx] -= h;
            let fd = (smooth(&pred_mc, &plus) - smooth(&pred_mc, &minus)) / (2.0 * h);
            assert!(max_relative_error(&[grad_p[idx]], &[fd]) < 1e-4, "{idx:?}");
        }
    }

    #[test]
    fn batch_mean_is_order_invariant() {
        let a = fixture(4);
        let b = fixture(5);
        let item = |f: &(Array2<f64>, Array2<f64>, Array2<Complex64>), g: &(Array2<f64>, Array2<f64>, Array2<Complex64>)| {
            (f.0.clone(), f.1.clone(), f.2.clone(), g.0.clone(), g.1.mapv(|v| v + PI / 3.0))
        };
        let i1 = item(&a, &b);
        let i2 = item(&b, &a);
        type Item = (Array2<f64>, Array2<f64>, Array2<Complex64>, Array2<f64>, Array2<f64>);
        fn mk(i: &Item) -> GeneratorInputs<'_> {
            GeneratorInputs {
                target_mag_c: i.0.view(),
                target_phase: i.1.view(),
                target_complex: i.2.view(),
                pred_mag_c: i.3.view(),
                pred_phase: i.4.view(),
                metric: 0.25,
            }
        }
        let cfg = StftConfig::default();
        let w = LossWeights::default();
        let ab = loss_generator_batch(&[mk(&i1), mk(&i2)], &cfg, &w).unwrap();
        let ba = loss_generator_batch(&[mk(&i2), mk(&i1)], &cfg, &w).unwrap();
        assert_eq!(ab, ba);
        let single = loss_generator_total(&mk(&i1), &cfg, &w).unwrap();
        let solo = loss_generator_batch(&[mk(&i1)], &cfg, &w).unwrap();
        assert_eq!(single.total, solo.total);
        assert!(loss_generator_batch(&[], &cfg, &w).is_err());
    }
}
