//! Random initialization, Adam, the fitting loop and the ablation harness.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use nalgebra::{Point3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geometry::PointCloud;
use crate::loss::{evaluate, EvalOptions, FirstTerm, LossParams, LossTerms, View};
use crate::metrics::{chamfer_distance, normalize_cloud};

/// Loss variants compared by the ablation harness.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AblationMode {
    Full,
    M1Only,
    L2Only,
    RawL1PlusL2,
    NoW,
    NoMu,
}

impl AblationMode {
    pub const ALL: [AblationMode; 6] = [
        AblationMode::Full,
        AblationMode::M1Only,
        AblationMode::L2Only,
        AblationMode::RawL1PlusL2,
        AblationMode::NoW,
        AblationMode::NoMu,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            AblationMode::Full => "full",
            AblationMode::M1Only => "m1_only",
            AblationMode::L2Only => "l2_only",
            AblationMode::RawL1PlusL2 => "raw_l1_plus_l2",
            AblationMode::NoW => "no_w",
            AblationMode::NoMu => "no_mu",
        }
    }

    /// Loss weights and term switches this mode evaluates with.
    pub fn apply(self, params: &LossParams) -> (LossParams, LossTerms) {
        let mut params = params.clone();
        let mut terms = LossTerms::default();
        match self {
            AblationMode::Full => {}
            AblationMode::M1Only => params.beta = 0.0,
            AblationMode::L2Only => params.alpha = 0.0,
            AblationMode::RawL1PlusL2 => terms.first_term = FirstTerm::RawL1,
            AblationMode::NoW => terms.indicator_weights = false,
            AblationMode::NoMu => terms.boundary_bias = false,
        }
        (params, terms)
    }
}

impl fmt::Display for AblationMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AblationMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        AblationMode::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::BadParams(format!("unknown ablation mode `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitConfig {
    pub n_points: usize,
    pub iterations: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    pub seed: u64,
    /// Half side of the initialization cube, in world units.
    pub init_half_extent: f64,
    /// Center of the initialization cube.
    pub init_center: [f64; 3],
    pub loss: LossParams,
    pub ablation_mode: AblationMode,
    /// Number of leading views of the scene used for fitting.
    pub views_used: usize,
    pub determinism: bool,
    /// Padding in pixels applied when building smoothed fields.
    pub pad: usize,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            n_points: 1000,
            iterations: 2000,
            learning_rate: 1e-2,
            beta1: 0.9,
            beta2: 0.999,
            adam_eps: 1e-8,
            seed: 0,
            init_half_extent: 0.3,
            init_center: [0.0; 3],
            loss: LossParams::default(),
            ablation_mode: AblationMode::Full,
            views_used: 4,
            determinism: true,
            pad: 32,
        }
    }
}

impl FitConfig {
    pub fn validate(&self, available_views: usize) -> Result<()> {
        let bad = |m: String| Err(Error::BadParams(m));
        if self.n_points == 0 {
            return bad("n_points must be >= 1".into());
        }
        if self.iterations == 0 {
            return bad("iterations must be >= 1".into());
        }
        if !(self.learning_rate > 0.0) {
            return bad("learning_rate must be > 0".into());
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return bad("beta1 and beta2 must lie in [0, 1)".into());
        }
        if !(self.adam_eps > 0.0) {
            return bad("adam_eps must be > 0".into());
        }
        if !(self.init_half_extent >= 0.0) {
            return bad("init_half_extent must be >= 0".into());
        }
        if self.views_used == 0 || self.views_used > available_views {
            return bad(format!(
                "views_used = {} but {available_views} views are available",
                self.views_used
            ));
        }
        self.loss.validate()
    }
}

/// Adam moments for a flat parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub step: u64,
}

impl AdamState {
    pub fn new(len: usize) -> Self {
        Self {
            m: vec![0.0; len],
            v: vec![0.0; len],
            step: 0,
        }
    }
}

/// One bias-corrected Adam update of `coords` in place.
pub fn adam_step(
    state: &mut AdamState,
    coords: &mut [f64],
    grads: &[f64],
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
) -> Result<()> {
    for len in [grads.len(), state.m.len(), state.v.len()] {
        if len != coords.len() {
            return Err(Error::ShapeMismatch {
                expected: coords.len(),
                actual: len,
            });
        }
    }
    state.step += 1;
    let t = state.step as i32;
    let c1 = 1.0 - beta1.powi(t);
    let c2 = 1.0 - beta2.powi(t);
    for i in 0..coords.len() {
        let g = grads[i];
        state.m[i] = beta1 * state.m[i] + (1.0 - beta1) * g;
        state.v[i] = beta2 * state.v[i] + (1.0 - beta2) * g * g;
        let m_hat = state.m[i] / c1;
        let v_hat = state.v[i] / c2;
        coords[i] -= lr * m_hat / (v_hat.sqrt() + eps);
    }
    Ok(())
}

/// `n` points uniform in the cube `[-half_extent, half_extent]^3`.
pub fn init_cloud(n: usize, half_extent: f64, seed: u64) -> Result<PointCloud> {
    if n == 0 {
        return Err(Error::BadParams("cannot initialize an empty cloud".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut coord = || (2.0 * rng.gen::<f64>() - 1.0) * half_extent;
    let points = (0..n).map(|_| Point3::new(coord(), coord(), coord())).collect();
    PointCloud::new(points)
}

/// Mean terms of one view at one iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct ViewTraceRow {
    pub iteration: usize,
    pub view: usize,
    pub m1_mean: f64,
    pub l2_mean: f64,
    pub coverage: f64,
}

#[derive(Debug, Clone)]
pub struct FitReport {
    pub config: FitConfig,
    /// Loss before each update.
    pub loss_trace: Vec<f64>,
    /// Coverage before each update.
    pub coverage_trace: Vec<f64>,
    pub view_trace: Vec<ViewTraceRow>,
    pub initial_cloud: PointCloud,
    pub final_cloud: PointCloud,
    pub final_loss: f64,
    pub final_coverage: f64,
    pub wall_time_s: f64,
}

impl FitReport {
    /// Running minimum of the loss trace.
    pub fn best_so_far(&self) -> Vec<f64> {
        self.loss_trace
            .iter()
            .scan(f64::INFINITY, |best, &l| {
                *best = best.min(l);
                Some(*best)
            })
            .collect()
    }
}

/// Optimizes point coordinates against the first `views_used` views.
pub fn fit(config: &FitConfig, views: &[View]) -> Result<FitReport> {
    config.validate(views.len())?;
    let views = &views[..config.views_used];
    let start = Instant::now();

    let center = Vector3::from(config.init_center);
    let mut cloud = init_cloud(config.n_points, config.init_half_extent, config.seed)?;
    for p in &mut cloud.points {
        *p += center;
    }
    let initial_cloud = cloud.clone();
    let (params, terms) = config.ablation_mode.apply(&config.loss);
    let options = EvalOptions {
        terms,
        frozen: None,
        gradient: true,
    };

    let mut coords = cloud.to_flat();
    let mut adam = AdamState::new(coords.len());
    let mut loss_trace = Vec::with_capacity(config.iterations);
    let mut coverage_trace = Vec::with_capacity(config.iterations);
    let mut view_trace = Vec::with_capacity(config.iterations * views.len());
    let n = config.n_points as f64;

    for iteration in 0..config.iterations {
        let eval = evaluate(&cloud, views, &params, &options)?;
        if !eval.value.is_finite() {
            return Err(Error::NonFinite { iteration });
        }
        loss_trace.push(eval.value);
        coverage_trace.push(eval.coverage());
        for v in &eval.views {
            view_trace.push(ViewTraceRow {
                iteration,
                view: v.view,
                m1_mean: v.m1.iter().sum::<f64>() / n,
                l2_mean: v.l2.iter().sum::<f64>() / n,
                coverage: v.coverage,
            });
        }
        let grad: Vec<f64> = eval
            .gradient
            .unwrap_or_default()
            .iter()
            .flat_map(|g| [g.x, g.y, g.z])
            .collect();
        adam_step(
            &mut adam,
            &mut coords,
            &grad,
            config.learning_rate,
            config.beta1,
            config.beta2,
            config.adam_eps,
        )?;
        cloud = PointCloud::from_flat(&coords);
    }

    let last = evaluate(
        &cloud,
        views,
        &params,
        &EvalOptions {
            terms,
            ..Default::default()
        },
    )?;
    if !last.value.is_finite() {
        return Err(Error::NonFinite {
            iteration: config.iterations,
        });
    }

    Ok(FitReport {
        config: config.clone(),
        loss_trace,
        coverage_trace,
        view_trace,
        initial_cloud,
        final_cloud: cloud,
        final_loss: last.value,
        final_coverage: last.coverage(),
        wall_time_s: start.elapsed().as_secs_f64(),
    })
}

/// Chamfer distance after normalizing both clouds. A prediction whose bounding
/// box collapsed is compared without normalization.
pub fn normalized_chamfer(pred: &PointCloud, gt: &PointCloud) -> Result<f64> {
    let gt = normalize_cloud(gt)?;
    let pred = match normalize_cloud(pred) {
        Ok(p) => p,
        Err(Error::DegenerateCloud) => pred.clone(),
        Err(e) => return Err(e),
    };
    chamfer_distance(&pred, &gt)
}

/// One row of the ablation table.
#[derive(Debug, Clone, PartialEq)]
pub struct AblationRow {
    pub label: String,
    pub mode: AblationMode,
    pub views_used: usize,
    /// Chamfer distance per seed, in seed order.
    pub chamfer: Vec<f64>,
    pub median: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AblationTable {
    pub seeds: Vec<u64>,
    pub rows: Vec<AblationRow>,
}

impl AblationTable {
    pub fn row(&self, label: &str) -> Option<&AblationRow> {
        self.rows.iter().find(|r| r.label == label)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("label,mode,views_used");
        for s in &self.seeds {
            out.push_str(&format!(",cd_seed_{s}"));
        }
        out.push_str(",cd_median\n");
        for r in &self.rows {
            out.push_str(&format!("{},{},{}", r.label, r.mode, r.views_used));
            for c in &r.chamfer {
                out.push_str(&format!(",{c:.9e}"));
            }
            out.push_str(&format!(",{:.9e}\n", r.median));
        }
        out
    }
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Runs every ablation mode on all `base.views_used` views and the full loss
/// on 2 and 3 leading views, once per seed, reporting normalized Chamfer distances.
pub fn run_ablation(
    base: &FitConfig,
    views: &[View],
    gt_cloud: &PointCloud,
    seeds: &[u64],
) -> Result<AblationTable> {
    if seeds.is_empty() {
        return Err(Error::BadParams("ablation needs at least one seed".into()));
    }
    base.validate(views.len())?;
    let mut plan: Vec<(String, AblationMode, usize)> = AblationMode::ALL
        .iter()
        .map(|&m| (m.as_str().to_string(), m, base.views_used))
        .collect();
    for k in [2usize, 3, 4] {
        if k <= views.len() {
            plan.push((format!("views_{k}"), AblationMode::Full, k));
        }
    }

    let mut rows: Vec<AblationRow> = Vec::with_capacity(plan.len());
    for (label, mode, views_used) in plan {
        // the full loss on the base view count has already been fitted
        if let Some(done) = rows
            .iter()
            .find(|r| r.mode == mode && r.views_used == views_used)
        {
            let chamfer = done.chamfer.clone();
            rows.push(AblationRow {
                label,
                mode,
                views_used,
                median: median(&chamfer),
                chamfer,
            });
            continue;
        }
        let mut chamfer = Vec::with_capacity(seeds.len());
        for &seed in seeds {
            let config = FitConfig {
                seed,
                ablation_mode: mode,
                views_used,
                ..base.clone()
            };
            let report = fit(&config, views)?;
            chamfer.push(normalized_chamfer(&report.final_cloud, gt_cloud)?);
        }
        rows.push(AblationRow {
            label,
            mode,
            views_used,
            median: median(&chamfer),
            chamfer,
        });
    }
    Ok(AblationTable {
        seeds: seeds.to_vec(),
        rows,
    })
}
