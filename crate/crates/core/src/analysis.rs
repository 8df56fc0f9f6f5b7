//! Pairwise comparison of a reference and an estimate: metrics plus every
//! spectral loss.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::losses::{loss_generator_total, GeneratorInputs, LossReport, LossWeights};
use crate::metrics::{lsd, si_sdr};
use crate::phase::phase_distance;
use crate::spectral::{mag_phase, StftConfig, Stft};
use crate::sweep::format_sig;
use crate::waveform::Waveform;

#[derive(Debug, Clone)]
pub struct AnalysisReport {
    pub pd_deg: f64,
    pub lsd_db: f64,
    pub si_sdr_db: f64,
    /// Losses with the estimate as prediction; the metric term is zero.
    pub losses: LossReport,
}

pub const ANALYSIS_FIELDS: [&str; 11] = [
    "pd_deg", "lsd_db", "si_sdr_db", "mag", "ip", "gd", "iaf", "pha", "com", "con", "total",
];

impl AnalysisReport {
    pub fn values(&self) -> [f64; 11] {
        let l = &self.losses;
        [
            self.pd_deg,
            self.lsd_db,
            self.si_sdr_db,
            l.mag,
            l.ip,
            l.gd,
            l.iaf,
            l.pha,
            l.com,
            l.con,
            l.total,
        ]
    }

    /// `key=value` lines, full precision.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (k, v) in ANALYSIS_FIELDS.iter().zip(self.values()) {
            writeln!(s, "{k}={}", format_sig(v, 17)).unwrap();
        }
        s
    }

    /// Header line and one data row.
    pub fn to_csv(&self) -> String {
        let row: Vec<String> = self.values().iter().map(|&v| format_sig(v, 17)).collect();
        format!("{}\n{}\n", ANALYSIS_FIELDS.join(","), row.join(","))
    }
}

pub fn analyze_pair(reference: &Waveform, estimate: &Waveform, cfg: &StftConfig) -> Result<AnalysisReport> {
    if reference.len() != estimate.len() {
        return Err(Error::shape("analysis inputs", &[reference.len()], &[estimate.len()]));
    }
    let engine = Stft::new(cfg)?;
    let ref_spec = engine.analyze(reference.samples())?;
    let (rm, rp) = mag_phase(&ref_spec);
    let (em, ep) = mag_phase(&engine.analyze(estimate.samples())?);
    let c = cfg.compression;
    let (rmc, emc) = (rm.compress(c)?, em.compress(c)?);
    let losses = loss_generator_total(
        &GeneratorInputs {
            target_mag_c: rmc.view(),
            target_phase: rp.view(),
            target_complex: ref_spec.view(),
            pred_mag_c: emc.view(),
            pred_phase: ep.view(),
            metric: 0.0,
        },
        cfg,
        &LossWeights::default(),
    )?;
    Ok(AnalysisReport {
        pd_deg: phase_distance(rm.view(), rp.view(), ep.view())?,
        lsd_db: lsd(&rm, &em)?,
        si_sdr_db: si_sdr(reference, estimate)?,
        losses,
    })
}
