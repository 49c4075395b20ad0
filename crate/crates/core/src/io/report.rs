//! Fit report JSON and CSV traces.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::optim::{FitConfig, FitReport};

#[derive(Debug, Clone, Serialize)]
pub struct ConfigEcho {
    pub n_points: usize,
    pub iterations: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    pub seed: u64,
    pub init_half_extent: f64,
    pub init_center: [f64; 3],
    pub alpha: f64,
    pub beta: f64,
    pub theta: f64,
    pub mu_scales: Vec<f64>,
    pub mu_min: f64,
    pub normalize_inner_sum: bool,
    pub ablation_mode: String,
    pub views_used: usize,
    pub determinism: bool,
    pub pad: usize,
}

impl From<&FitConfig> for ConfigEcho {
    fn from(c: &FitConfig) -> Self {
        Self {
            n_points: c.n_points,
            iterations: c.iterations,
            learning_rate: c.learning_rate,
            beta1: c.beta1,
            beta2: c.beta2,
            adam_eps: c.adam_eps,
            seed: c.seed,
            init_half_extent: c.init_half_extent,
            init_center: c.init_center,
            alpha: c.loss.alpha,
            beta: c.loss.beta,
            theta: c.loss.theta,
            mu_scales: c.loss.mu_scales.clone(),
            mu_min: c.loss.mu_min,
            normalize_inner_sum: c.loss.normalize_inner_sum,
            ablation_mode: c.ablation_mode.to_string(),
            views_used: c.views_used,
            determinism: c.determinism,
            pad: c.pad,
        }
    }
}

/// Evaluation against a ground-truth cloud, when the scene has one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReportMetrics {
    pub chamfer_initial: f64,
    pub chamfer_final: f64,
    pub iou: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ReportDocument {
    pub config_text: String,
    pub config: ConfigEcho,
    pub iterations: usize,
    pub initial_loss: f64,
    pub final_loss: f64,
    pub final_coverage: f64,
    /// Absent under the determinism flag so that reports are reproducible.
    pub wall_time_s: Option<f64>,
    pub metrics: Option<ReportMetrics>,
    pub loss_trace: Vec<f64>,
    pub coverage_trace: Vec<f64>,
}

impl ReportDocument {
    pub fn new(report: &FitReport, config_text: &str, metrics: Option<ReportMetrics>) -> Self {
        Self {
            config_text: config_text.to_string(),
            config: ConfigEcho::from(&report.config),
            iterations: report.loss_trace.len(),
            initial_loss: report.loss_trace.first().copied().unwrap_or(report.final_loss),
            final_loss: report.final_loss,
            final_coverage: report.final_coverage,
            wall_time_s: (!report.config.determinism).then_some(report.wall_time_s),
            metrics,
            loss_trace: report.loss_trace.clone(),
            coverage_trace: report.coverage_trace.clone(),
        }
    }

    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("serializable report");
        text.push('\n');
        text
    }
}

/// `iteration,loss,coverage,best_loss`, one row per iteration.
pub fn trace_csv(report: &FitReport) -> String {
    let mut out = String::from("iteration,loss,coverage,best_loss\n");
    let best = report.best_so_far();
    for (i, ((l, c), b)) in report
        .loss_trace
        .iter()
        .zip(&report.coverage_trace)
        .zip(&best)
        .enumerate()
    {
        writeln!(out, "{i},{l:.17e},{c:.17e},{b:.17e}").unwrap();
    }
    out
}

/// `iteration,view,m1_mean,l2_mean,coverage`, one row per view per iteration.
pub fn view_trace_csv(report: &FitReport) -> String {
    let mut out = String::from("iteration,view,m1_mean,l2_mean,coverage\n");
    for r in &report.view_trace {
        writeln!(
            out,
            "{},{},{:.17e},{:.17e},{:.17e}",
            r.iteration, r.view, r.m1_mean, r.l2_mean, r.coverage
        )
        .unwrap();
    }
    out
}

pub fn write_text(text: &str, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, text).map_err(|e| Error::io(path, e))
}
