//! Evaluation reports as JSON: one record per image plus the aggregates.
//! `psnr_db` is null when the MSE is exactly zero (infinite PSNR). Both
//! PSNR aggregations are reported: the mean of per-image PSNRs and the
//! PSNR of the mean MSE.

use std::path::Path;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ImageRecord {
    pub id: String,
    pub mse: f64,
    /// dB; None encodes +infinity (mse == 0).
    pub psnr_db: Option<f64>,
    pub ssim: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub airlight_abs_err: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub runtime_sec: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Aggregate {
    pub mse: f64,
    pub psnr_db: Option<f64>,
    pub psnr_db_of_mean_mse: Option<f64>,
    pub ssim: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub airlight_abs_err: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub airlight_accuracy: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub runtime_sec_per_image: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricsReport {
    pub images: Vec<ImageRecord>,
    pub aggregate: Aggregate,
}

fn finite_or_none(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

impl MetricsReport {
    /// Assemble aggregates from per-image records. `airlight_tol` bounds
    /// the accuracy count; airlight aggregates appear only when every
    /// record with metadata carried an error value.
    pub fn from_records(records: Vec<ImageRecord>, airlight_tol: f64) -> Self {
        let n = records.len() as f64;
        let mse = records.iter().map(|r| r.mse).sum::<f64>() / n;
        let mean_psnr = records
            .iter()
            .map(|r| r.psnr_db.unwrap_or(f64::INFINITY))
            .sum::<f64>()
            / n;
        let ssim = records.iter().map(|r| r.ssim).sum::<f64>() / n;
        let airlight_errs: Vec<f64> =
            records.iter().filter_map(|r| r.airlight_abs_err).collect();
        let (airlight_abs_err, airlight_accuracy) = if airlight_errs.is_empty() {
            (None, None)
        } else {
            let mean = airlight_errs.iter().sum::<f64>() / airlight_errs.len() as f64;
            let hits = airlight_errs.iter().filter(|e| **e <= airlight_tol).count();
            (
                Some(mean),
                Some(hits as f64 / airlight_errs.len() as f64),
            )
        };
        let runtimes: Vec<f64> = records.iter().filter_map(|r| r.runtime_sec).collect();
        let runtime_sec_per_image = if runtimes.len() == records.len() && !runtimes.is_empty() {
            Some(runtimes.iter().sum::<f64>() / runtimes.len() as f64)
        } else {
            None
        };
        let psnr_of_mean = dehaze_core::metrics::psnr(mse).unwrap_or(f64::NAN);
        MetricsReport {
            aggregate: Aggregate {
                mse,
                psnr_db: finite_or_none(mean_psnr),
                psnr_db_of_mean_mse: finite_or_none(psnr_of_mean),
                ssim,
                airlight_abs_err,
                airlight_accuracy,
                runtime_sec_per_image,
            },
            images: records,
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut bytes = serde_json::to_vec_pretty(self)?;
        bytes.push(b'\n');
        std::fs::write(path, bytes).with_context(|| format!("writing report {}", path.display()))
    }
}
