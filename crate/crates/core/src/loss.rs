//! The render-free silhouette coverage loss and its analytic gradient.
//!
//! Per view, every projected point contributes a coverage term (how far its
//! sample on the smoothed silhouette is from foreground) and a repulsion term
//! that pushes foreground projections apart:
//!
//! ```text
//! m1_j = 1 - S(uv_j)
//! l2_j = w_j * c * sum_{k != j} w_k * exp(-d(uv_j, uv_k) / theta + mu_j)
//! E    = sum_views sum_j (alpha * m1_j + beta * l2_j) / (views * points)
//! ```
//!
//! `w` is the binary mask sampled at the projection, `mu` a multi-scale local
//! foreground fraction, `d` the pixel distance divided by the padded image
//! diagonal and `c` is `1 / (N - 1)` when the inner sum is normalized.
//! `w` and `mu` are held constant when differentiating.

use nalgebra::{DMatrix, Point3, Vector2, Vector3};

use crate::error::{Error, Result};
use crate::field::{build_smoothed_field, gradient_with, sample_with, BinarySilhouette, Border, Grid, SmoothedField};
use crate::geometry::{project_cloud, projection_jacobian, CameraPose, PointCloud, Projection2};

/// Normalized distances below this have no defined direction and exert no force.
pub const COINCIDENT_DISTANCE: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct LossParams {
    /// Weight of the coverage term.
    pub alpha: f64,
    /// Weight of the repulsion term.
    pub beta: f64,
    /// Decay of the repulsion kernel, in normalized-distance units.
    pub theta: f64,
    /// Half-widths in pixels of the squares sampled for the boundary bias.
    pub mu_scales: Vec<f64>,
    pub mu_min: f64,
    /// Divide the repulsion inner sum by `N - 1`.
    pub normalize_inner_sum: bool,
}

impl Default for LossParams {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            beta: 1.0,
            theta: 0.05,
            mu_scales: vec![1.0, 2.0, 3.0],
            mu_min: 1e-3,
            normalize_inner_sum: true,
        }
    }
}

impl LossParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::BadParams(m.to_string()));
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return bad("alpha must be finite and >= 0");
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return bad("beta must be finite and >= 0");
        }
        if !(self.theta > 0.0 && self.theta.is_finite()) {
            return bad("theta must be > 0");
        }
        if !(self.mu_min > 0.0 && self.mu_min < 1.0) {
            return bad("mu_min must lie in (0, 1)");
        }
        if self.mu_scales.is_empty() {
            return bad("mu_scales must not be empty");
        }
        if self.mu_scales.iter().any(|s| !(s.is_finite() && *s >= 0.0))
            || self.mu_scales.windows(2).any(|p| p[1] <= p[0])
        {
            return bad("mu_scales must be finite, non-negative and strictly increasing");
        }
        Ok(())
    }
}

/// Which coverage term is used.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FirstTerm {
    /// `1 - S^G` on the smoothed field.
    #[default]
    Smoothed,
    /// `|1 - pi|` on the raw binary mask.
    RawL1,
}

/// Switches used by the ablation modes. The default is the full loss.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LossTerms {
    pub first_term: FirstTerm,
    /// When off, every indicator weight is 1.
    pub indicator_weights: bool,
    /// When off, every boundary bias is `mu_min`.
    pub boundary_bias: bool,
}

impl Default for LossTerms {
    fn default() -> Self {
        Self {
            first_term: FirstTerm::Smoothed,
            indicator_weights: true,
            boundary_bias: true,
        }
    }
}

/// One calibrated view: camera, ground-truth silhouette and its smoothed field.
#[derive(Debug, Clone)]
pub struct View {
    pose: CameraPose,
    silhouette: BinarySilhouette,
    field: SmoothedField,
    mask: Grid,
}

impl View {
    /// Builds the smoothed field for `silhouette` with `pad` pixels of padding.
    pub fn new(pose: CameraPose, silhouette: BinarySilhouette, pad: usize) -> Result<Self> {
        let field = build_smoothed_field(&silhouette, pad)?;
        Ok(Self::from_parts(pose, silhouette, field))
    }

    /// Assembles a view from a prebuilt field. Consistency is checked at evaluation.
    pub fn from_parts(pose: CameraPose, silhouette: BinarySilhouette, field: SmoothedField) -> Self {
        let mask = silhouette.to_grid();
        Self {
            pose,
            silhouette,
            field,
            mask,
        }
    }

    pub fn pose(&self) -> &CameraPose {
        &self.pose
    }

    pub fn silhouette(&self) -> &BinarySilhouette {
        &self.silhouette
    }

    pub fn field(&self) -> &SmoothedField {
        &self.field
    }

    /// Binary mask bilinearly sampled at an image coordinate, zero outside the frame.
    pub fn mask_sample(&self, uv: Vector2<f64>) -> f64 {
        sample_with(&self.mask, uv, Border::Zero)
    }

    fn check(&self, index: usize) -> Result<()> {
        let fail = |reason: String| Err(Error::InconsistentView { index, reason });
        let (sw, sh) = (self.silhouette.width, self.silhouette.height);
        if self.field.width != sw || self.field.height != sh {
            return fail(format!(
                "field is {}x{} but silhouette is {sw}x{sh}",
                self.field.width, self.field.height
            ));
        }
        let (pw, ph) = self.field.padded_size();
        if pw != sw + 2 * self.field.pad || ph != sh + 2 * self.field.pad {
            return fail(format!("padded field {pw}x{ph} does not match pad {}", self.field.pad));
        }
        if self.pose.width != sw || self.pose.height != sh {
            return fail(format!(
                "camera is {}x{} but silhouette is {sw}x{sh}",
                self.pose.width, self.pose.height
            ));
        }
        Ok(())
    }
}

/// Per-point weights and biases for one view, e.g. to hold them fixed.
#[derive(Debug, Clone, PartialEq)]
pub struct ViewWeights {
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

/// Everything computed for a single view. Invalid (behind-camera) points have
/// zero terms.
#[derive(Debug, Clone, PartialEq)]
pub struct PerViewEval {
    pub view: usize,
    pub valid: Vec<bool>,
    /// Value sampled by the coverage term (smoothed field or raw mask).
    pub sampled: Vec<f64>,
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
    pub m1: Vec<f64>,
    pub l2: Vec<f64>,
    /// `sum_j alpha * m1_j + beta * l2_j`, before averaging.
    pub total: f64,
    /// Fraction of all points whose binary mask sample is at least 0.5.
    pub coverage: f64,
}

impl PerViewEval {
    pub fn frozen(&self) -> ViewWeights {
        ViewWeights {
            weights: self.weights.clone(),
            biases: self.biases.clone(),
        }
    }
}

fn mask_at(mask: &Grid, uv: Vector2<f64>) -> f64 {
    sample_with(mask, uv, Border::Zero)
}

fn bias_at(mask: &Grid, uv: Vector2<f64>, scales: &[f64], mu_min: f64) -> f64 {
    let mut sum = 0.0;
    for &s in scales {
        for (du, dv) in [(-s, -s), (s, -s), (-s, s), (s, s)] {
            sum += mask_at(mask, uv + Vector2::new(du, dv));
        }
    }
    (sum / (4 * scales.len()) as f64).clamp(mu_min, 1.0)
}

/// Mean of `|1 - pi|` over valid projections, `pi` sampled on the binary mask.
pub fn raw_l1_loss(sil: &BinarySilhouette, projections: &[Option<Projection2>]) -> f64 {
    let mask = sil.to_grid();
    let values: Vec<f64> = projections
        .iter()
        .flatten()
        .map(|p| (1.0 - mask_at(&mask, p.uv)).abs())
        .collect();
    if values.is_empty() {
        0.0
    } else {
        values.iter().sum::<f64>() / values.len() as f64
    }
}

/// Gradient of the raw term `1 - pi` with respect to `uv`.
pub fn raw_l1_gradient(sil: &BinarySilhouette, uv: Vector2<f64>) -> Vector2<f64> {
    -gradient_with(&sil.to_grid(), uv, Border::Zero)
}

/// Per-point `1 - S^G(uv)` and their mean over valid projections.
pub fn m1_loss(field: &SmoothedField, projections: &[Option<Projection2>]) -> (f64, Vec<f64>) {
    let per_point: Vec<f64> = projections
        .iter()
        .map(|p| p.map_or(0.0, |p| 1.0 - field.sample(p.uv)))
        .collect();
    let valid = projections.iter().filter(|p| p.is_some()).count();
    let mean = if valid == 0 {
        0.0
    } else {
        per_point.iter().sum::<f64>() / valid as f64
    };
    (mean, per_point)
}

/// Indicator weights: the binary mask sampled at each projection (0 when invalid).
pub fn indicator_weights(sil: &BinarySilhouette, projections: &[Option<Projection2>]) -> Vec<f64> {
    let mask = sil.to_grid();
    projections
        .iter()
        .map(|p| p.map_or(0.0, |p| mask_at(&mask, p.uv)))
        .collect()
}

/// Boundary bias: mean of the mask sampled at the corners of squares of each
/// half-width around the projection, clamped to `[mu_min, 1]`.
pub fn boundary_bias(
    sil: &BinarySilhouette,
    projections: &[Option<Projection2>],
    mu_scales: &[f64],
    mu_min: f64,
) -> Vec<f64> {
    let mask = sil.to_grid();
    projections
        .iter()
        .map(|p| p.map_or(mu_min, |p| bias_at(&mask, p.uv, mu_scales, mu_min)))
        .collect()
}

/// Pixel distances between projections divided by `diagonal`. Rows and
/// columns of invalid projections are zero.
pub fn pairwise_distance(projections: &[Option<Projection2>], diagonal: f64) -> DMatrix<f64> {
    let n = projections.len();
    DMatrix::from_fn(n, n, |j, k| match (projections[j], projections[k]) {
        (Some(a), Some(b)) => (a.uv - b.uv).norm() / diagonal,
        _ => 0.0,
    })
}

/// Repulsion kernel over the projections of one view.
///
/// Returns per-point `l2_j` and, if `grad` is given, accumulates
/// `d (sum_j l2_j) / d uv_j` into it. Entries with `w == 0` are skipped.
fn repulsion(
    uvs: &[Vector2<f64>],
    weights: &[f64],
    biases: &[f64],
    theta: f64,
    scale: f64,
    diagonal: f64,
    mut grad: Option<&mut [Vector2<f64>]>,
) -> Vec<f64> {
    let n = uvs.len();
    let mut l2 = vec![0.0; n];
    let active: Vec<usize> = (0..n).filter(|&j| weights[j] > 0.0).collect();
    let exp_bias: Vec<f64> = biases.iter().map(|m| m.exp()).collect();
    let inv_theta = 1.0 / theta;
    let inv_diag = 1.0 / diagonal;
    for (a, &j) in active.iter().enumerate() {
        let (uj, wj, ej) = (uvs[j], weights[j], exp_bias[j]);
        for &k in &active[a + 1..] {
            let delta = uj - uvs[k];
            let px = delta.norm();
            let d = px * inv_diag;
            let kernel = (-d * inv_theta).exp();
            let ww = scale * wj * weights[k] * kernel;
            l2[j] += ww * ej;
            l2[k] += ww * exp_bias[k];
            if let Some(g) = grad.as_deref_mut() {
                if d >= COINCIDENT_DISTANCE {
                    let coeff = -ww * (ej + exp_bias[k]) * inv_theta * inv_diag / px;
                    let f = delta * coeff;
                    g[j] += f;
                    g[k] -= f;
                }
            }
        }
    }
    l2
}

/// Per-point repulsion terms and their sum for one view. `diagonal` is the
/// padded-frame diagonal the distances are normalized by.
pub fn l2_loss(
    projections: &[Option<Projection2>],
    weights: &[f64],
    biases: &[f64],
    theta: f64,
    normalize_inner_sum: bool,
    diagonal: f64,
) -> (f64, Vec<f64>) {
    let n = projections.len();
    let uvs: Vec<Vector2<f64>> = projections
        .iter()
        .map(|p| p.map_or(Vector2::zeros(), |p| p.uv))
        .collect();
    let w: Vec<f64> = weights
        .iter()
        .zip(projections)
        .map(|(w, p)| if p.is_some() { *w } else { 0.0 })
        .collect();
    let scale = inner_scale(n, normalize_inner_sum);
    let per_point = repulsion(&uvs, &w, biases, theta, scale, diagonal, None);
    (per_point.iter().sum(), per_point)
}

fn inner_scale(n: usize, normalize: bool) -> f64 {
    if normalize && n > 1 {
        1.0 / (n - 1) as f64
    } else {
        1.0
    }
}

/// Options for [`evaluate`].
#[derive(Debug, Clone, Copy, Default)]
pub struct EvalOptions<'a> {
    pub terms: LossTerms,
    /// Use these weights and biases instead of computing them.
    pub frozen: Option<&'a [ViewWeights]>,
    pub gradient: bool,
}

#[derive(Debug, Clone)]
pub struct LossEvaluation {
    pub value: f64,
    pub views: Vec<PerViewEval>,
    /// `dE / d point`, present when requested.
    pub gradient: Option<Vec<Vector3<f64>>>,
}

impl LossEvaluation {
    /// Coverage averaged over views.
    pub fn coverage(&self) -> f64 {
        if self.views.is_empty() {
            return 0.0;
        }
        self.views.iter().map(|v| v.coverage).sum::<f64>() / self.views.len() as f64
    }
}

/// Evaluates the loss (and optionally its gradient) over all views.
pub fn evaluate(
    cloud: &PointCloud,
    views: &[View],
    params: &LossParams,
    options: &EvalOptions<'_>,
) -> Result<LossEvaluation> {
    params.validate()?;
    if views.is_empty() {
        return Err(Error::BadParams("at least one view is required".into()));
    }
    if cloud.is_empty() {
        return Err(Error::EmptyCloud);
    }
    for (i, view) in views.iter().enumerate() {
        view.check(i)?;
    }
    if let Some(frozen) = options.frozen {
        if frozen.len() != views.len() {
            return Err(Error::ShapeMismatch {
                expected: views.len(),
                actual: frozen.len(),
            });
        }
        for f in frozen {
            if f.weights.len() != cloud.len() || f.biases.len() != cloud.len() {
                return Err(Error::ShapeMismatch {
                    expected: cloud.len(),
                    actual: f.weights.len().min(f.biases.len()),
                });
            }
        }
    }

    let n = cloud.len();
    let norm = 1.0 / (views.len() * n) as f64;
    let scale = inner_scale(n, params.normalize_inner_sum);
    let mut gradient = options.gradient.then(|| vec![Vector3::zeros(); n]);
    let mut value = 0.0;
    let mut evals = Vec::with_capacity(views.len());

    for (i, view) in views.iter().enumerate() {
        let projections = project_cloud(&view.pose, cloud);
        let valid: Vec<bool> = projections.iter().map(Option::is_some).collect();
        let uvs: Vec<Vector2<f64>> = projections
            .iter()
            .map(|p| p.map_or(Vector2::zeros(), |p| p.uv))
            .collect();

        let mask_samples: Vec<f64> = projections
            .iter()
            .map(|p| p.map_or(0.0, |p| view.mask_sample(p.uv)))
            .collect();
        let covered = mask_samples.iter().filter(|&&s| s >= 0.5).count();

        let (weights, biases) = match options.frozen {
            Some(frozen) => (frozen[i].weights.clone(), frozen[i].biases.clone()),
            None => {
                let weights = if options.terms.indicator_weights {
                    mask_samples.clone()
                } else {
                    vec![1.0; n]
                };
                let biases = if options.terms.boundary_bias {
                    uvs.iter()
                        .map(|&uv| bias_at(&view.mask, uv, &params.mu_scales, params.mu_min))
                        .collect()
                } else {
                    vec![params.mu_min; n]
                };
                (weights, biases)
            }
        };
        // invalid points take no part in either term
        let active_weights: Vec<f64> = weights
            .iter()
            .zip(&valid)
            .map(|(w, ok)| if *ok { *w } else { 0.0 })
            .collect();

        let sampled: Vec<f64> = match options.terms.first_term {
            FirstTerm::Smoothed => projections
                .iter()
                .map(|p| p.map_or(0.0, |p| view.field.sample(p.uv)))
                .collect(),
            FirstTerm::RawL1 => mask_samples.clone(),
        };
        let m1: Vec<f64> = sampled
            .iter()
            .zip(&valid)
            .map(|(s, ok)| if *ok { (1.0 - s).abs() } else { 0.0 })
            .collect();

        let mut uv_grad = options.gradient.then(|| vec![Vector2::zeros(); n]);
        let l2 = if params.beta > 0.0 {
            repulsion(
                &uvs,
                &active_weights,
                &biases,
                params.theta,
                scale,
                view.field.diagonal(),
                uv_grad.as_deref_mut(),
            )
        } else {
            vec![0.0; n]
        };

        let mut total = 0.0;
        for j in 0..n {
            total += params.alpha * m1[j] + params.beta * l2[j];
        }
        value += total;

        if let (Some(g_uv), Some(g)) = (uv_grad.as_mut(), gradient.as_mut()) {
            for j in 0..n {
                if !valid[j] {
                    continue;
                }
                let first = match options.terms.first_term {
                    FirstTerm::Smoothed => -view.field.gradient(uvs[j]),
                    FirstTerm::RawL1 => -gradient_with(&view.mask, uvs[j], Border::Zero),
                };
                let d_uv = first * params.alpha + g_uv[j] * params.beta;
                let jac = projection_jacobian(&view.pose, &cloud.points[j])?;
                g[j] += jac.transpose() * d_uv * norm;
            }
        }

        evals.push(PerViewEval {
            view: i,
            valid,
            sampled,
            weights,
            biases,
            m1,
            l2,
            total,
            coverage: covered as f64 / n as f64,
        });
    }

    Ok(LossEvaluation {
        value: value * norm,
        views: evals,
        gradient,
    })
}

/// Full loss value and the per-view breakdown.
pub fn effective_loss(
    cloud: &PointCloud,
    views: &[View],
    params: &LossParams,
) -> Result<(f64, Vec<PerViewEval>)> {
    let eval = evaluate(cloud, views, params, &EvalOptions::default())?;
    Ok((eval.value, eval.views))
}

/// Gradient of [`effective_loss`] with weights and biases held constant.
pub fn effective_loss_grad(
    cloud: &PointCloud,
    views: &[View],
    params: &LossParams,
) -> Result<Vec<Vector3<f64>>> {
    let options = EvalOptions {
        gradient: true,
        ..Default::default()
    };
    let eval = evaluate(cloud, views, params, &options)?;
    Ok(eval.gradient.unwrap_or_default())
}

/// Converts a gradient to a flat `[x0, y0, z0, ...]` buffer.
pub fn flatten_gradient(grad: &[Vector3<f64>]) -> Vec<f64> {
    grad.iter().flat_map(|g| [g.x, g.y, g.z]).collect()
}

/// Distance from `point`'s projection in each view to the nearest bilinear cell
/// edge, in pixels. `None` if the point is behind any camera.
pub fn cell_edge_margin(views: &[View], point: &Point3<f64>) -> Option<f64> {
    let mut margin = f64::INFINITY;
    for view in views {
        let p = crate::geometry::project_point(&view.pose, point).ok()?;
        for c in [p.uv.x, p.uv.y] {
            let frac = (c - 0.5) - (c - 0.5).floor();
            margin = margin.min(frac.min(1.0 - frac));
        }
    }
    Some(margin)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::look_at_camera;

    fn disk(width: usize, radius: f64) -> BinarySilhouette {
        let c = width as f64 / 2.0;
        BinarySilhouette::from_fn(width, width, |r, col| {
            let dr = r as f64 + 0.5 - c;
            let dc = col as f64 + 0.5 - c;
            dr * dr + dc * dc <= radius * radius
        })
    }

    fn front_view(sil: BinarySilhouette, pad: usize) -> View {
        let pose = look_at_camera(
            Point3::new(0.0, 0.0, 2.0),
            Point3::origin(),
            Vector3::y(),
            32.0,
            sil.width,
            sil.height,
        )
        .unwrap();
        View::new(pose, sil, pad).unwrap()
    }

    fn at(u: f64, v: f64) -> Option<Projection2> {
        Some(Projection2 {
            uv: Vector2::new(u, v),
            depth: 1.0,
        })
    }

    #[test]
    fn raw_l1_on_foreground_centers_is_zero() {
        let sil = disk(16, 5.0);
        let proj = vec![at(8.5, 8.5), at(7.5, 9.5)];
        assert_eq!(raw_l1_loss(&sil, &proj), 0.0);
    }

    #[test]
    fn raw_l1_background_is_flat() {
        let sil = disk(16, 3.0);
        let proj = vec![at(1.7, 2.2)];
        assert_eq!(raw_l1_loss(&sil, &proj), 1.0);
        assert_eq!(raw_l1_gradient(&sil, Vector2::new(1.7, 2.2)), Vector2::zeros());
    }

    #[test]
    fn raw_l1_midway_is_half() {
        let sil = BinarySilhouette::from_fn(6, 6, |_, c| c < 3);
        // between column 2 (fg) and column 3 (bg) centers
        assert!((raw_l1_loss(&sil, &[at(3.0, 3.5)]) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn m1_is_zero_on_foreground_and_pulls_in_background() {
        let sil = disk(32, 6.0);
        let view = front_view(sil, 8);
        let field = view.field();
        let (mean, per) = m1_loss(field, &[at(16.5, 16.5)]);
        assert_eq!(mean, 0.0);
        assert_eq!(per, vec![0.0]);

        // near the padded corner, the farthest pixel from the disk
        let far = Vector2::new(-7.2, -7.3);
        let (_, per) = m1_loss(field, &[at(far.x, far.y)]);
        assert!(per[0] > 0.95 && per[0] <= 1.0 - field.epsilon());
        let g = field.gradient(far);
        assert!(g.norm() > 0.0);
        // moving along +gradient raises the field, i.e. toward the disk
        assert!(g.x > 0.0 && g.y > 0.0);
    }

    #[test]
    fn m1_matches_direct_field_formula() {
        let sil = disk(32, 6.0);
        let view = front_view(sil, 4);
        let field = view.field();
        let uv = Vector2::new(9.37, 21.81);
        // direct four-term bilinear on the padded grid
        let x: f64 = uv.x + 4.0 - 0.5;
        let y: f64 = uv.y + 4.0 - 0.5;
        let (c0, r0) = (x.floor() as usize, y.floor() as usize);
        let (tx, ty) = (x - c0 as f64, y - r0 as f64);
        let g = &field.values;
        let s = g.at(r0, c0) * (1.0 - tx) * (1.0 - ty)
            + g.at(r0, c0 + 1) * tx * (1.0 - ty)
            + g.at(r0 + 1, c0) * (1.0 - tx) * ty
            + g.at(r0 + 1, c0 + 1) * tx * ty;
        let (_, per) = m1_loss(field, &[at(uv.x, uv.y)]);
        assert!((per[0] - (1.0 - s)).abs() < 1e-14);
    }

    #[test]
    fn indicator_weights_cases() {
        let sil = BinarySilhouette::from_fn(8, 8, |_, c| c < 4);
        let w = indicator_weights(&sil, &[at(1.5, 1.5), at(6.5, 6.5), at(4.2, 3.7), None]);
        assert_eq!(w[0], 1.0);
        assert_eq!(w[1], 0.0);
        // u = 4.2 lies between column 3 (fg) and column 4 (bg), 0.7 of the way
        assert!((w[2] - 0.3).abs() < 1e-12);
        assert_eq!(w[3], 0.0);
    }

    #[test]
    fn boundary_bias_cases() {
        let sil = BinarySilhouette::from_fn(20, 20, |_, c| c < 10);
        let scales = [1.0, 2.0, 3.0];
        let mu = boundary_bias(&sil, &[at(4.5, 10.5), at(17.5, 10.5), at(9.5, 10.5), None], &scales, 1e-3);
        assert_eq!(mu[0], 1.0);
        assert_eq!(mu[1], 1e-3);
        // straight edge between u=10 (fg center at 9.5) and bg; at u=9.5 the
        // square corners sit at u = 8.5, 10.5 / 7.5, 11.5 / 6.5, 12.5:
        // left corners are foreground, right corners background -> 12 of 24 -> 0.5
        assert!((mu[2] - 0.5).abs() < 1e-12);
        assert_eq!(mu[3], 1e-3);

        let mu = boundary_bias(&sil, &[at(10.7, 10.5)], &scales, 1e-3);
        // corner columns: 9.7 (blend of col 9 fg and col 10 bg -> 0.8), 11.7 (0);
        // 8.7 (1), 12.7 (0); 7.7 (1), 13.7 (0), each appearing twice
        let expected = (2.0 * 0.8 + 2.0 * 1.0 + 2.0 * 1.0) / 12.0;
        assert!((mu[0] - expected).abs() < 1e-12, "{} vs {expected}", mu[0]);
    }

    #[test]
    fn pairwise_distance_cases() {
        let proj = vec![at(0.0, 0.0), at(0.0, 0.0), at(64.0, 48.0), at(3.0, 4.0)];
        let diag = 80.0;
        let d = pairwise_distance(&proj, diag);
        assert_eq!(d[(0, 1)], 0.0);
        assert_eq!(d[(0, 2)], 1.0);
        assert!((d[(0, 3)] - 5.0 / 80.0).abs() < 1e-15);
        assert_eq!(d, d.transpose());
        assert!(d.diagonal().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn l2_single_point_is_zero() {
        let (sum, per) = l2_loss(&[at(3.0, 3.0)], &[1.0], &[0.5], 0.05, true, 10.0);
        assert_eq!(sum, 0.0);
        assert_eq!(per, vec![0.0]);
    }

    #[test]
    fn l2_coincident_pair() {
        let mu0 = 0.37;
        let (_, per) = l2_loss(&[at(3.0, 3.0), at(3.0, 3.0)], &[1.0, 1.0], &[mu0, mu0], 0.05, true, 10.0);
        assert!((per[0] - mu0.exp()).abs() < 1e-15);
        assert!((per[1] - mu0.exp()).abs() < 1e-15);
    }

    #[test]
    fn l2_fractional_weights_match_direct_sum() {
        let proj = vec![at(3.0, 3.0), at(4.0, 3.0), at(3.0, 5.0)];
        let w = [0.5, 0.8, 0.3];
        let mu = [0.2, 0.4, 0.9];
        let (theta, diag) = (0.07, 12.0);
        let (sum, per) = l2_loss(&proj, &w, &mu, theta, true, diag);
        let uv: Vec<_> = proj.iter().map(|p| p.unwrap().uv).collect();
        let mut expected_sum = 0.0;
        for j in 0..3 {
            let inner: f64 = (0..3)
                .filter(|&k| k != j)
                .map(|k| w[k] * (-(uv[j] - uv[k]).norm() / diag / theta + mu[j]).exp())
                .sum();
            let expected = w[j] * inner / 2.0;
            assert!((per[j] - expected).abs() < 1e-14, "{j}: {} vs {expected}", per[j]);
            expected_sum += expected;
        }
        assert!((sum - expected_sum).abs() < 1e-14);
    }

    #[test]
    fn l2_zero_weight_point_has_no_term() {
        let proj = vec![at(3.0, 3.0), at(4.0, 3.0), at(3.0, 5.0)];
        let (_, per) = l2_loss(&proj, &[0.0, 1.0, 0.7], &[0.2, 0.3, 0.4], 0.05, true, 10.0);
        assert_eq!(per[0], 0.0);
        assert!(per[1] > 0.0 && per[2] > 0.0);
    }

    #[test]
    fn l2_decreases_with_separation() {
        let mut last = f64::INFINITY;
        for sep in [0.0, 0.5, 1.0, 2.0, 5.0] {
            let (sum, _) = l2_loss(&[at(3.0, 3.0), at(3.0 + sep, 3.0)], &[1.0, 1.0], &[0.1, 0.1], 0.05, true, 10.0);
            assert!(sum < last);
            last = sum;
        }
    }

    #[test]
    fn inconsistent_view_is_reported() {
        let sil = disk(32, 6.0);
        let view = front_view(sil, 4);
        let other = build_smoothed_field(&disk(16, 3.0), 4).unwrap();
        let bad = View::from_parts(view.pose().clone(), view.silhouette().clone(), other);
        let cloud = PointCloud::new(vec![Point3::origin()]).unwrap();
        let err = effective_loss(&cloud, &[view, bad], &LossParams::default());
        assert!(matches!(err, Err(Error::InconsistentView { index: 1, .. })));
    }

    #[test]
    fn beta_zero_with_foreground_points_is_zero() {
        let view = front_view(disk(32, 10.0), 8);
        let cloud = PointCloud::new(vec![Point3::origin(), Point3::new(0.05, 0.02, 0.0)]).unwrap();
        let params = LossParams {
            beta: 0.0,
            ..Default::default()
        };
        let (e, _) = effective_loss(&cloud, &[view.clone()], &params).unwrap();
        assert_eq!(e, 0.0);
        let g = effective_loss_grad(&cloud, &[view], &params).unwrap();
        assert!(g.iter().all(|g| *g == Vector3::zeros()));
    }

    #[test]
    fn alpha_zero_single_point_is_zero() {
        let view = front_view(disk(32, 10.0), 8);
        let cloud = PointCloud::new(vec![Point3::new(0.3, 0.1, 0.0)]).unwrap();
        let params = LossParams {
            alpha: 0.0,
            ..Default::default()
        };
        let (e, _) = effective_loss(&cloud, &[view], &params).unwrap();
        assert_eq!(e, 0.0);
    }

    #[test]
    fn behind_camera_points_contribute_nothing() {
        let view = front_view(disk(32, 10.0), 8);
        let inside = PointCloud::new(vec![Point3::origin()]).unwrap();
        let with_behind = PointCloud::new(vec![Point3::origin(), Point3::new(0.0, 0.0, 4.0)]).unwrap();
        let params = LossParams::default();
        let (_, a) = effective_loss(&inside, &[view.clone()], &params).unwrap();
        let eval = evaluate(
            &with_behind,
            &[view],
            &params,
            &EvalOptions {
                gradient: true,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(eval.views[0].m1[1], 0.0);
        assert_eq!(eval.views[0].l2[1], 0.0);
        assert!(!eval.views[0].valid[1]);
        assert_eq!(eval.gradient.unwrap()[1], Vector3::zeros());
        assert_eq!(a[0].m1[0], 0.0);
    }

    #[test]
    fn symmetric_pair_forces_are_opposite() {
        let params = LossParams {
            alpha: 0.0,
            ..Default::default()
        };
        let cloud = PointCloud::new(vec![Point3::new(-0.1, 0.0, 0.0), Point3::new(0.1, 0.0, 0.0)]).unwrap();

        let view = front_view(disk(64, 30.0), 8);
        let g = effective_loss_grad(&cloud, &[view.clone()], &params).unwrap();
        // minimizing moves the points apart along x
        assert!(g[0].x > 0.0 && g[1].x < 0.0);
        assert!((g[0].x + g[1].x).abs() < 1e-12 * g[0].x.abs());
        assert!(g[0].y.abs() < 1e-15);
        // under perspective, moving both toward the camera also separates them
        assert!((g[0].z - g[1].z).abs() < 1e-12 * g[0].z.abs());

        let ortho = View::new(view.pose().clone().into_orthographic(), view.silhouette().clone(), 8).unwrap();
        let g = effective_loss_grad(&cloud, &[ortho], &params).unwrap();
        assert!((g[0] + g[1]).norm() < 1e-12 * g[0].norm());
        assert!(g[0].x > 0.0 && g[0].z == 0.0);
    }
}
