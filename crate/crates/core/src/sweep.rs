//! Re-noising sweeps: mix clean speech with noise over an SNR grid, enhance
//! each mixture and score it against the clean reference.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::metrics::{lsd, si_sdr};
use crate::phase::phase_distance;
use crate::spectral::{mag_phase, Stft};
use crate::waveform::Waveform;

pub const CSV_HEADER: &str = "snr_db,pd_deg,lsd_db,si_sdr_db";
pub const CSV_DIGITS: usize = 9;

#[derive(Debug, Clone, PartialEq)]
pub struct SnrSweepSpec {
    pub snr_points: Vec<f64>,
    pub clean: Waveform,
    pub noise: Waveform,
}

impl SnrSweepSpec {
    pub fn new(clean: Waveform, noise: Waveform, snr_points: Vec<f64>) -> Result<Self> {
        if snr_points.is_empty() || snr_points.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "snr grid must be non-empty and finite, got {snr_points:?}"
            )));
        }
        Ok(Self { snr_points, clean, noise })
    }
}

/// `start, start + step, ...` up to `stop` inclusive (with a half-step tolerance
/// so that rounding cannot drop the last point).
pub fn snr_grid(start: f64, stop: f64, step: f64) -> Result<Vec<f64>> {
    if !(start.is_finite() && stop.is_finite() && step.is_finite() && step > 0.0 && stop >= start) {
        return Err(Error::InvalidArgument(format!(
            "bad snr grid {start}:{stop}:{step}"
        )));
    }
    let n = ((stop - start) / step + 0.5).floor() as usize + 1;
    Ok((0..n).map(|i| start + i as f64 * step).collect())
}

/// −5 to 15 dB in 2.5 dB steps.
pub fn default_grid() -> Vec<f64> {
    snr_grid(-5.0, 15.0, 2.5).expect("constant grid is valid")
}

/// Parses `start:stop:step`.
pub fn parse_grid(s: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = s.split(':').collect();
    let [a, b, c] = parts[..] else {
        return Err(Error::InvalidArgument(format!("grid {s:?} is not start:stop:step")));
    };
    let num = |v: &str| {
        v.trim()
            .parse::<f64>()
            .map_err(|_| Error::InvalidArgument(format!("grid {s:?}: bad number {v:?}")))
    };
    snr_grid(num(a)?, num(b)?, num(c)?)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub snr_db: f64,
    pub pd_deg: f64,
    pub lsd_db: f64,
    pub si_sdr_db: f64,
}

/// PD, LSD and SI-SDR of `estimate` against `clean`.
pub fn score(clean: &Waveform, estimate: &Waveform, stft: &Stft) -> Result<(f64, f64, f64)> {
    let (cm, cp) = mag_phase(&stft.analyze(clean.samples())?);
    let (em, ep) = mag_phase(&stft.analyze(estimate.samples())?);
    let pd = phase_distance(cm.view(), cp.view(), ep.view())?;
    Ok((pd, lsd(&cm, &em)?, si_sdr(clean, estimate)?))
}

pub fn run_sweep<F>(spec: &SnrSweepSpec, stft: &Stft, mut enhance: F) -> Result<Vec<SweepRow>>
where
    F: FnMut(&Waveform) -> Result<Waveform>,
{
    spec.snr_points
        .iter()
        .map(|&snr| {
            let noisy = crate::metrics::mix_at_snr(&spec.clean, &spec.noise, snr)?;
            let est = enhance(&noisy)?;
            let (pd_deg, lsd_db, si_sdr_db) = score(&spec.clean, &est, stft)?;
            log::info!("snr {snr} dB: pd {pd_deg:.3} lsd {lsd_db:.3} si-sdr {si_sdr_db:.3}");
            Ok(SweepRow { snr_db: snr, pd_deg, lsd_db, si_sdr_db })
        })
        .collect()
}

/// `%g`-style formatting with `digits` significant digits; infinities print as `inf`.
pub fn format_sig(v: f64, digits: usize) -> String {
    if v.is_nan() {
        return "nan".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if v == 0.0 {
        return "0".into();
    }
    let digits = digits.max(1);
    let sci = format!("{:.*e}", digits - 1, v);
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    let trim = |s: &str| -> String {
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s.to_string()
        }
    };
    if exp < -4 || exp >= digits as i32 {
        format!("{}e{}{:02}", trim(mantissa), if exp < 0 { '-' } else { '+' }, exp.abs())
    } else {
        let decimals = (digits as i32 - 1 - exp).max(0) as usize;
        trim(&format!("{v:.decimals$}"))
    }
}

pub fn rows_to_csv(rows: &[SweepRow]) -> String {
    let mut s = String::from(CSV_HEADER);
    s.push('\n');
    for r in rows {
        let f = |v| format_sig(v, CSV_DIGITS);
        writeln!(s, "{},{},{},{}", f(r.snr_db), f(r.pd_deg), f(r.lsd_db), f(r.si_sdr_db)).unwrap();
    }
    s
}
