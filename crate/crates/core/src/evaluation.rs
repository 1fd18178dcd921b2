//! Accuracy metrics for an estimated disparity map against ground truth.
//!
//! * absolute accuracy: mean of `min(|d - d_g|, sigma)`
//! * systematic error: mean of `sign(d - d_g) * min(|d - d_g|, sigma)`
//! * completeness: `1 - N_invalid / N_valid` over the estimate
//! * histogram of the capped absolute errors
//!
//! Accuracy terms run over pixels valid in both maps. Completeness looks
//! only at the estimate.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{dim_err, Error, Result};
use crate::image_io::{DisparityMap, GrayImage};

/// Relative slack when assigning an error to a bin, so a value like `0.3`
/// lands in `[0.3, 0.4)` despite `0.3 / 0.1` evaluating to `2.9999999999999996`.
const BIN_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalConfig {
    /// Error cap, in disparity units.
    pub sigma: f64,
    pub bin_width: f64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            sigma: 10.0,
            bin_width: 0.1,
        }
    }
}

impl EvalConfig {
    /// Validates the config and returns the number of histogram bins.
    pub fn num_bins(&self) -> Result<usize> {
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::Param(format!(
                "sigma must be positive, got {}",
                self.sigma
            )));
        }
        if !(self.bin_width > 0.0 && self.bin_width.is_finite()) {
            return Err(Error::Param(format!(
                "bin width must be positive, got {}",
                self.bin_width
            )));
        }
        let ratio = self.sigma / self.bin_width;
        let bins = ratio.round();
        if (ratio - bins).abs() > 1e-9 * ratio.max(1.0) || bins < 1.0 {
            return Err(Error::Param(format!(
                "sigma {} is not an integer multiple of bin width {}",
                self.sigma, self.bin_width
            )));
        }
        if bins > 1e8 {
            return Err(Error::Param(format!("{bins} histogram bins is too many")));
        }
        Ok(bins as usize)
    }
}

/// Counts of capped absolute errors in half-open bins `[k·w, (k+1)·w)`; the
/// last bin also takes the cap value itself. The per-bin error sums are kept
/// so the mean can be recovered from the histogram alone.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorHistogram {
    pub bin_width: f64,
    pub counts: Vec<u64>,
    pub error_sums: Vec<f64>,
}

impl ErrorHistogram {
    fn new(bins: usize, bin_width: f64) -> Self {
        Self {
            bin_width,
            counts: vec![0; bins],
            error_sums: vec![0.0; bins],
        }
    }

    fn add(&mut self, capped: f64) {
        let q = capped / self.bin_width;
        let k = ((q + q * BIN_EPS).floor() as usize).min(self.counts.len() - 1);
        self.counts[k] += 1;
        self.error_sums[k] += capped;
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Mean capped error reconstructed from the per-bin sums.
    pub fn mean_error(&self) -> f64 {
        self.error_sums.iter().sum::<f64>() / self.total() as f64
    }

    /// Lower edge of bin `k`, rounded to nine decimals for display.
    pub fn bin_lower(&self, k: usize) -> f64 {
        (k as f64 * self.bin_width * 1e9).round() / 1e9
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub m_ab: f64,
    pub m_sys: f64,
    pub m_cpl: f64,
    pub histogram: ErrorHistogram,
    pub n_valid: usize,
    pub n_invalid: usize,
    /// Pixels valid in both maps; the population of the accuracy terms.
    pub n_evaluated: usize,
    pub sigma: f64,
}

/// All four metrics from a single pass over the pixels.
pub fn evaluate(d: &DisparityMap, truth: &DisparityMap, cfg: &EvalConfig) -> Result<EvalReport> {
    let acc = accumulate(d, truth, cfg)?;
    let m_cpl = completeness(d)?;
    Ok(EvalReport {
        m_ab: acc.abs_sum / acc.n as f64,
        m_sys: acc.signed_sum / acc.n as f64,
        m_cpl,
        histogram: acc.histogram,
        n_valid: d.count_valid(),
        n_invalid: d.count_invalid(),
        n_evaluated: acc.n,
        sigma: cfg.sigma,
    })
}

pub fn absolute_accuracy(d: &DisparityMap, truth: &DisparityMap, cfg: &EvalConfig) -> Result<f64> {
    let acc = accumulate(d, truth, cfg)?;
    Ok(acc.abs_sum / acc.n as f64)
}

pub fn systematic_error(d: &DisparityMap, truth: &DisparityMap, cfg: &EvalConfig) -> Result<f64> {
    let acc = accumulate(d, truth, cfg)?;
    Ok(acc.signed_sum / acc.n as f64)
}

pub fn error_histogram(
    d: &DisparityMap,
    truth: &DisparityMap,
    cfg: &EvalConfig,
) -> Result<ErrorHistogram> {
    Ok(accumulate(d, truth, cfg)?.histogram)
}

/// `1 - N_invalid / N_valid`. Negative when more than half the pixels are invalid.
pub fn completeness(d: &DisparityMap) -> Result<f64> {
    let valid = d.count_valid();
    if valid == 0 {
        return Err(Error::Evaluation(
            "no valid pixels in the disparity map".into(),
        ));
    }
    Ok(1.0 - d.count_invalid() as f64 / valid as f64)
}

/// Share of co-valid pixels whose absolute error is at most `tol`.
pub fn fraction_within(d: &DisparityMap, truth: &DisparityMap, tol: f64) -> Result<f64> {
    check_shapes(d, truth)?;
    let (mut hit, mut n) = (0usize, 0usize);
    for (e, g) in d.data().iter().zip(truth.data()) {
        if let (Some(e), Some(g)) = (e, g) {
            n += 1;
            if (f64::from(*e) - f64::from(*g)).abs() <= tol {
                hit += 1;
            }
        }
    }
    if n == 0 {
        return Err(Error::Evaluation("no pixel is valid in both maps".into()));
    }
    Ok(hit as f64 / n as f64)
}

/// Capped error magnitude scaled to `[0, 1]`; pixels not valid in both maps are black.
pub fn error_image(d: &DisparityMap, truth: &DisparityMap, cfg: &EvalConfig) -> Result<GrayImage> {
    check_shapes(d, truth)?;
    cfg.num_bins()?;
    let data = d
        .data()
        .iter()
        .zip(truth.data())
        .map(|(e, g)| match (e, g) {
            (Some(e), Some(g)) => {
                ((f64::from(*e) - f64::from(*g)).abs().min(cfg.sigma) / cfg.sigma) as f32
            }
            _ => 0.0,
        })
        .collect();
    GrayImage::new(d.width(), d.height(), data)
}

struct Accumulated {
    n: usize,
    abs_sum: f64,
    signed_sum: f64,
    histogram: ErrorHistogram,
}

fn check_shapes(d: &DisparityMap, truth: &DisparityMap) -> Result<()> {
    if d.same_shape(truth) {
        Ok(())
    } else {
        Err(dim_err(format!(
            "estimate is {}x{} but truth is {}x{}",
            d.width(),
            d.height(),
            truth.width(),
            truth.height()
        )))
    }
}

fn accumulate(d: &DisparityMap, truth: &DisparityMap, cfg: &EvalConfig) -> Result<Accumulated> {
    check_shapes(d, truth)?;
    let bins = cfg.num_bins()?;
    let mut acc = Accumulated {
        n: 0,
        abs_sum: 0.0,
        signed_sum: 0.0,
        histogram: ErrorHistogram::new(bins, cfg.bin_width),
    };
    for (e, g) in d.data().iter().zip(truth.data()) {
        let (Some(e), Some(g)) = (e, g) else { continue };
        let diff = f64::from(*e) - f64::from(*g);
        let capped = diff.abs().min(cfg.sigma);
        acc.n += 1;
        acc.abs_sum += capped;
        acc.signed_sum += if diff > 0.0 {
            capped
        } else if diff < 0.0 {
            -capped
        } else {
            0.0
        };
        acc.histogram.add(capped);
    }
    if acc.n == 0 {
        return Err(Error::Evaluation("no pixel is valid in both maps".into()));
    }
    Ok(acc)
}

/// The JSON half of a written report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportSummary {
    pub m_ab: f64,
    pub m_sys: f64,
    pub m_cpl: f64,
    pub n_valid: usize,
    pub n_invalid: usize,
    pub n_evaluated: usize,
    pub sigma: f64,
    pub bin_width: f64,
    pub bins: usize,
}

impl From<&EvalReport> for ReportSummary {
    fn from(r: &EvalReport) -> Self {
        Self {
            m_ab: r.m_ab,
            m_sys: r.m_sys,
            m_cpl: r.m_cpl,
            n_valid: r.n_valid,
            n_invalid: r.n_invalid,
            n_evaluated: r.n_evaluated,
            sigma: r.sigma,
            bin_width: r.histogram.bin_width,
            bins: r.histogram.counts.len(),
        }
    }
}

pub fn report_json(r: &EvalReport) -> String {
    let mut s =
        serde_json::to_string_pretty(&ReportSummary::from(r)).expect("plain data serializes");
    s.push('\n');
    s
}

pub fn histogram_csv(h: &ErrorHistogram) -> String {
    let mut s = String::from("bin_lower,count\n");
    for (k, c) in h.counts.iter().enumerate() {
        s.push_str(&format!("{},{}\n", h.bin_lower(k), c));
    }
    s
}

/// Where the histogram CSV goes for a given JSON path.
pub fn histogram_path(json_path: &Path) -> PathBuf {
    json_path.with_extension("csv")
}

/// Writes the JSON summary to `path` and the histogram next to it as CSV.
pub fn write_report(r: &EvalReport, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, report_json(r))?;
    fs::write(histogram_path(path), histogram_csv(&r.histogram))?;
    Ok(())
}

pub fn decode_report(json: &str) -> Result<ReportSummary> {
    serde_json::from_str(json).map_err(|e| Error::Data(format!("report JSON: {e}")))
}

pub fn read_report(path: impl AsRef<Path>) -> Result<ReportSummary> {
    decode_report(&fs::read_to_string(path)?)
}
