//! Self-check suites: STFT roundtrip, gradient checks and numeric invariants.

use std::f64::consts::PI;
use std::fmt::Write as _;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::losses::{
    fd_gradient_check, gradcheck::kink_free_phase_pair, loss_complex, loss_consistency,
    loss_generator_total, loss_magnitude, loss_phase, ComponentLosses, GeneratorInputs, LossReport,
    LossWeights,
};
use crate::metrics::{lsd_with_floor, mix_at_snr, si_sdr, LSD_FLOOR};
use crate::phase::{anti_wrap, phase_distance};
use crate::spectral::{compress, decompress, mag_phase, Stft, StftConfig};
use crate::sweep::default_grid;
use crate::waveform::Waveform;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Roundtrip,
    Gradcheck,
    Invariants,
}

impl Suite {
    pub fn name(self) -> &'static str {
        match self {
            Suite::Roundtrip => "roundtrip",
            Suite::Gradcheck => "gradcheck",
            Suite::Invariants => "invariants",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub max_error: f64,
    pub tolerance: f64,
}

impl Check {
    fn new(name: &str, max_error: f64, tolerance: f64) -> Self {
        Self { name: name.to_string(), max_error, tolerance }
    }

    pub fn passed(&self) -> bool {
        self.max_error <= self.tolerance
    }
}

#[derive(Debug, Clone)]
pub struct SuiteReport {
    pub suite: Suite,
    pub checks: Vec<Check>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(Check::passed)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for c in &self.checks {
            writeln!(
                s,
                "{} {}: max error {:.3e} (tolerance {:.3e})",
                if c.passed() { "PASS" } else { "FAIL" },
                c.name,
                c.max_error,
                c.tolerance
            )
            .unwrap();
        }
        writeln!(
            s,
            "suite {}: {}",
            self.suite.name(),
            if self.passed() { "passed" } else { "FAILED" }
        )
        .unwrap();
        s
    }
}

/// Runs `suite`; `tolerance` replaces every check's own tolerance when given.
pub fn run_suite(suite: Suite, seed: u64, tolerance: Option<f64>) -> Result<SuiteReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut checks = match suite {
        Suite::Roundtrip => roundtrip(&mut rng)?,
        Suite::Gradcheck => gradcheck(&mut rng)?,
        Suite::Invariants => invariants(&mut rng)?,
    };
    if let Some(t) = tolerance {
        checks.iter_mut().for_each(|c| c.tolerance = t);
    }
    Ok(SuiteReport { suite, checks })
}

fn random_wave(rng: &mut ChaCha8Rng, len: usize) -> Waveform {
    Waveform::new((0..len).map(|_| rng.random_range(-1.0..1.0)).collect(), 16_000)
        .expect("finite samples")
}

fn roundtrip(rng: &mut ChaCha8Rng) -> Result<Vec<Check>> {
    let stft = Stft::new(&StftConfig::default())?;
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let len = rng.random_range(1600..16_000);
        let w = random_wave(rng, len);
        let back = stft.synthesize(&stft.analyze(w.samples())?, len)?;
        let err: f64 = back.iter().zip(w.samples()).map(|(a, b)| (a - b).powi(2)).sum();
        worst = worst.max((err / w.energy()).sqrt());
    }
    Ok(vec![Check::new("stft/istft relative L2 error, 100 waveforms", worst, 1e-10)])
}

const FD_STEP: f64 = 1e-6;
const GRAD_TOL: f64 = 1e-4;

fn grid(rng: &mut ChaCha8Rng, t: usize, f: usize, lo: f64, hi: f64) -> Array2<f64> {
    Array2::from_shape_fn((t, f), |_| rng.random_range(lo..hi))
}

fn as_grid(v: &[f64], t: usize, f: usize) -> Array2<f64> {
    Array2::from_shape_vec((t, f), v.to_vec()).expect("matching length")
}

fn gradcheck(rng: &mut ChaCha8Rng) -> Result<Vec<Check>> {
    let (t, f) = (4, 5);
    let points = 100;
    let (mut mag, mut pha, mut com) = (0.0f64, 0.0f64, 0.0f64);
    for _ in 0..points {
        let target = grid(rng, t, f, 0.0, 2.0);
        let pred = grid(rng, t, f, 0.0, 2.0);
        let e = fd_gradient_check(
            |p| {
                let (v, g) = loss_magnitude(target.view(), as_grid(p, t, f).view()).expect("shapes");
                (v, g.into_raw_vec_and_offset().0)
            },
            pred.as_slice().expect("standard"),
            FD_STEP,
        );
        mag = mag.max(e);

        let (tp, pp) = kink_free_phase_pair(rng, t, f, 100.0 * FD_STEP);
        let tp = as_grid(&tp, t, f);
        let e = fd_gradient_check(
            |p| {
                let l = loss_phase(tp.view(), as_grid(p, t, f).view()).expect("shapes");
                (l.total(), l.grad.into_raw_vec_and_offset().0)
            },
            &pp,
            FD_STEP,
        );
        pha = pha.max(e);

        let x = Array2::from_shape_fn((t, f), |_| {
            num_complex::Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        });
        let mut point: Vec<f64> = (0..t * f).map(|_| rng.random_range(0.1..2.0)).collect();
        point.extend((0..t * f).map(|_| rng.random_range(-PI..PI)));
        let n = t * f;
        let e = fd_gradient_check(
            |p| {
                let l = loss_complex(x.view(), as_grid(&p[..n], t, f).view(), as_grid(&p[n..], t, f).view())
                    .expect("shapes");
                let mut g = l.grad_mag.into_raw_vec_and_offset().0;
                g.extend(l.grad_phase.into_raw_vec_and_offset().0);
                (l.value, g)
            },
            &point,
            FD_STEP,
        );
        com = com.max(e);
    }

    let total = generator_gradcheck(rng, points)?;
    Ok(vec![
        Check::new("magnitude loss gradient", mag, GRAD_TOL),
        Check::new("phase loss gradient (ip + gd + iaf)", pha, GRAD_TOL),
        Check::new("complex loss gradient", com, GRAD_TOL),
        Check::new("generator total gradient (norm-wise)", total, GRAD_TOL),
    ])
}

/// STFT small enough that every loss term carries real weight in the
/// gradient; on a 201-bin grid the per-coordinate gradients are so small that
/// rounding in the difference quotient dominates.
pub fn small_stft() -> StftConfig {
    StftConfig {
        n_fft: 16,
        win_length: 16,
        hop_length: 4,
        ..StftConfig::default()
    }
}

/// Weighted generator objective without the consistency and metric terms,
/// which carry no analytic gradient.
fn smooth_total(
    target_mc: &Array2<f64>,
    target_p: &Array2<f64>,
    target: &Array2<num_complex::Complex64>,
    pred_mc: &Array2<f64>,
    pred_p: &Array2<f64>,
    c: f64,
    w: &LossWeights,
) -> f64 {
    let m = decompress(pred_mc.view(), c).expect("non-negative");
    w.mag * loss_magnitude(target_mc.view(), pred_mc.view()).expect("shapes").0
        + w.pha * loss_phase(target_p.view(), pred_p.view()).expect("shapes").total()
        + w.com * loss_complex(target.view(), m.view(), pred_p.view()).expect("shapes").value
}

fn generator_gradcheck(rng: &mut ChaCha8Rng, points: usize) -> Result<f64> {
    let cfg = small_stft();
    let stft = Stft::new(&cfg)?;
    let w = LossWeights::default();
    let c = cfg.compression;
    let mut worst: f64 = 0.0;
    for _ in 0..points {
        let clean = random_wave(rng, 40);
        let spec = stft.analyze(clean.samples())?;
        let (m, p) = mag_phase(&spec);
        let mc = compress(m.view(), c)?;
        let target_p = p.into_values();
        let (t, f) = mc.dim();
        let pred_p = loop {
            let cand: Vec<f64> = (0..t * f).map(|_| rng.random_range(-PI..PI)).collect();
            let tp = target_p.as_slice().expect("standard");
            if crate::losses::gradcheck::phase_kink_margin(tp, &cand, t, f) > 100.0 * FD_STEP {
                break cand;
            }
        };
        let mut point: Vec<f64> = (0..t * f).map(|_| rng.random_range(0.2..2.0)).collect();
        point.extend(pred_p);
        let n = t * f;
        let target = spec.values().clone();
        let eval = |q: &[f64]| {
            let (a, b) = (as_grid(&q[..n], t, f), as_grid(&q[n..], t, f));
            let report = loss_generator_total(
                &GeneratorInputs {
                    target_mag_c: mc.view(),
                    target_phase: target_p.view(),
                    target_complex: target.view(),
                    pred_mag_c: a.view(),
                    pred_phase: b.view(),
                    metric: 0.0,
                },
                &cfg,
                &w,
            )
            .expect("valid inputs");
            let mut g = report.grad_mag_c.expect("gradients").into_raw_vec_and_offset().0;
            g.extend(report.grad_phase.expect("gradients").into_raw_vec_and_offset().0);
            (smooth_total(&mc, &target_p, &target, &a, &b, c, &w), g)
        };
        let (_, analytic) = eval(&point);
        let numeric = crate::losses::central_differences(|q| eval(q).0, &point, FD_STEP);
        worst = worst.max(crate::losses::gradcheck::max_normwise_error(&analytic, &numeric));
    }
    Ok(worst)
}

fn invariants(rng: &mut ChaCha8Rng) -> Result<Vec<Check>> {
    let mut checks = Vec::new();

    let (mut period, mut even, mut range) = (0.0f64, 0.0f64, 0.0f64);
    for _ in 0..10_000 {
        let t = rng.random_range(-20.0..20.0);
        let k = rng.random_range(-5i32..=5) as f64;
        let v = anti_wrap(t);
        period = period.max((anti_wrap(t + 2.0 * PI * k) - v).abs());
        even = even.max((anti_wrap(-t) - v).abs());
        range = range.max((-v).max(v - PI).max(0.0));
    }
    checks.push(Check::new("anti-wrap periodicity", period, 1e-9));
    checks.push(Check::new("anti-wrap evenness", even, 1e-9));
    checks.push(Check::new("anti-wrap range [0, pi]", range, 0.0));

    let (t, f) = (6, 9);
    let m = grid(rng, t, f, 0.1, 2.0);
    let p = grid(rng, t, f, -PI / 2.0, PI / 2.0);
    let q = p.mapv(|v| v + PI / 2.0);
    checks.push(Check::new("pd(x, x) = 0", phase_distance(m.view(), p.view(), p.view())?, 0.0));
    let pd90 = phase_distance(m.view(), p.view(), q.view())?;
    checks.push(Check::new("pd of a quarter-turn error = 90 deg", (pd90 - 90.0).abs(), 1e-6));
    let mut rescale: f64 = 0.0;
    let est = grid(rng, t, f, -PI, PI);
    let base = phase_distance(m.view(), p.view(), est.view())?;
    for s in [1e-3, 0.5, 7.0, 1e4] {
        let v = phase_distance(m.mapv(|x| s * x).view(), p.view(), est.view())?;
        rescale = rescale.max((v - base).abs());
    }
    checks.push(Check::new("pd magnitude-rescale invariance", rescale, 1e-9));

    // losses at ground truth
    let cfg = StftConfig::default();
    let stft = Stft::new(&cfg)?;
    let w = random_wave(rng, 3200);
    let spec = stft.analyze(w.samples())?;
    let (mag, ph) = mag_phase(&spec);
    let mc = compress(mag.view(), cfg.compression)?;
    let zero = loss_generator_total(
        &GeneratorInputs {
            target_mag_c: mc.view(),
            target_phase: ph.view(),
            target_complex: spec.view(),
            pred_mag_c: mc.view(),
            pred_phase: ph.view(),
            metric: 0.0,
        },
        &cfg,
        &LossWeights::default(),
    )?;
    let worst = [zero.mag, zero.ip, zero.gd, zero.iaf, zero.com, zero.con]
        .into_iter()
        .fold(0.0f64, f64::max);
    checks.push(Check::new("every loss vanishes at ground truth", worst, 1e-12));

    let target = grid(rng, t, f, -PI, PI);
    let pred = grid(rng, t, f, -PI, PI);
    let base = loss_phase(target.view(), pred.view())?;
    let shifted = pred.mapv(|v| v + 2.0 * PI * rng.random_range(-5i32..=5) as f64);
    let s = loss_phase(target.view(), shifted.view())?;
    checks.push(Check::new("phase loss under 2 pi k shifts", (s.total() - base.total()).abs(), 1e-9));
    let offset = loss_phase(target.view(), pred.mapv(|v| v + 0.7).view())?;
    let gd_iaf = (offset.gd - base.gd).abs().max((offset.iaf - base.iaf).abs());
    checks.push(Check::new("gd and iaf under a global phase offset", gd_iaf, 1e-9));
    let ip_moved = if (offset.ip - base.ip).abs() > 1e-6 { 0.0 } else { 1.0 };
    checks.push(Check::new("ip responds to a global phase offset", ip_moved, 0.0));
    let con = loss_consistency(mag.view(), ph.view(), &cfg)?;
    checks.push(Check::new("consistency loss of a realizable spectrum", con, 1e-12));

    let ones = LossReport::from_components(
        ComponentLosses { mag: 1.0, ip: 1.0, gd: 0.0, iaf: 0.0, com: 1.0, con: 1.0, metric: 1.0 },
        &LossWeights::default(),
    );
    checks.push(Check::new("unit components give a total of 1.45", (ones.total - 1.45).abs(), 0.0));

    let clean = random_wave(rng, 8000);
    let noise = random_wave(rng, 3000);
    let mut snr_err: f64 = 0.0;
    for snr in default_grid() {
        let mix = mix_at_snr(&clean, &noise, snr)?;
        let n: f64 = mix.samples().iter().zip(clean.samples()).map(|(a, b)| (a - b).powi(2)).sum();
        snr_err = snr_err.max((10.0 * (clean.energy() / n).log10() - snr).abs());
    }
    checks.push(Check::new("mixer snr on the -5..15 dB grid", snr_err, 1e-6));

    let ten = m.mapv(|v| 10.0 * v);
    let l = lsd_with_floor(m.view(), ten.view(), LSD_FLOOR)?;
    checks.push(Check::new("lsd of a 10x magnitude ratio = 20 dB", (l - 20.0).abs(), 1e-9));
    let x = random_wave(rng, 1024);
    let raw = random_wave(rng, 1024);
    let k = raw.samples().iter().zip(x.samples()).map(|(a, b)| a * b).sum::<f64>() / x.energy();
    let orth: Vec<f64> = raw.samples().iter().zip(x.samples()).map(|(n, s)| n - k * s).collect();
    let g = (x.energy() / orth.iter().map(|v| v * v).sum::<f64>()).sqrt();
    let est = Waveform::new(x.samples().iter().zip(&orth).map(|(s, n)| s + g * n).collect(), 16_000)?;
    checks.push(Check::new("si-sdr of equal-energy orthogonal noise = 0 dB", si_sdr(&x, &est)?.abs(), 1e-9));
    Ok(checks)
}
