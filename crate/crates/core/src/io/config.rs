//! Flat `key = value` fit configuration.

use std::fs;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::optim::FitConfig;

/// Seeds used by `ablate` when the config does not set `ablation_seeds`.
pub const DEFAULT_ABLATION_SEEDS: usize = 5;

/// A parsed config file together with its original text.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub fit: FitConfig,
    /// `None` means every view of the scene.
    pub views_used: Option<usize>,
    pub ablation_seeds: usize,
    pub text: String,
}

pub const KEYS: &[&str] = &[
    "n_points",
    "iterations",
    "learning_rate",
    "beta1",
    "beta2",
    "adam_eps",
    "seed",
    "init_half_extent",
    "init_center",
    "alpha",
    "beta",
    "theta",
    "mu_scales",
    "mu_min",
    "normalize_inner_sum",
    "ablation_mode",
    "views_used",
    "determinism",
    "pad",
    "ablation_seeds",
];

fn value<T: FromStr>(key: &str, raw: &str, line: usize) -> Result<T> {
    raw.parse()
        .map_err(|_| Error::parse(format!("config line {line}"), format!("bad value {raw:?} for {key}")))
}

fn list(key: &str, raw: &str, line: usize) -> Result<Vec<f64>> {
    raw.split(',').map(|s| value(key, s.trim(), line)).collect()
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut fit = FitConfig::default();
        let mut views_used = None;
        let mut ablation_seeds = DEFAULT_ABLATION_SEEDS;
        let mut seen = Vec::new();
        for (i, raw_line) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw_line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, raw) = line.split_once('=').ok_or_else(|| {
                Error::parse(format!("config line {line_no}"), "expected key = value")
            })?;
            let (key, raw) = (key.trim(), raw.trim());
            if seen.contains(&key) {
                return Err(Error::parse(format!("config line {line_no}"), format!("duplicate key {key}")));
            }
            seen.push(key);
            let l = &mut fit.loss;
            match key {
                "n_points" => fit.n_points = value(key, raw, line_no)?,
                "iterations" => fit.iterations = value(key, raw, line_no)?,
                "learning_rate" => fit.learning_rate = value(key, raw, line_no)?,
                "beta1" => fit.beta1 = value(key, raw, line_no)?,
                "beta2" => fit.beta2 = value(key, raw, line_no)?,
                "adam_eps" => fit.adam_eps = value(key, raw, line_no)?,
                "seed" => fit.seed = value(key, raw, line_no)?,
                "init_half_extent" => fit.init_half_extent = value(key, raw, line_no)?,
                "init_center" => {
                    let c = list(key, raw, line_no)?;
                    fit.init_center = c.try_into().map_err(|_| {
                        Error::parse(format!("config line {line_no}"), "init_center needs 3 values")
                    })?;
                }
                "alpha" => l.alpha = value(key, raw, line_no)?,
                "beta" => l.beta = value(key, raw, line_no)?,
                "theta" => l.theta = value(key, raw, line_no)?,
                "mu_scales" => l.mu_scales = list(key, raw, line_no)?,
                "mu_min" => l.mu_min = value(key, raw, line_no)?,
                "normalize_inner_sum" => l.normalize_inner_sum = value(key, raw, line_no)?,
                "ablation_mode" => {
                    fit.ablation_mode = raw.parse().map_err(|_| {
                        Error::parse(format!("config line {line_no}"), format!("unknown ablation mode {raw:?}"))
                    })?
                }
                "views_used" => views_used = Some(value(key, raw, line_no)?),
                "determinism" => fit.determinism = value(key, raw, line_no)?,
                "pad" => fit.pad = value(key, raw, line_no)?,
                "ablation_seeds" => ablation_seeds = value(key, raw, line_no)?,
                _ => {
                    return Err(Error::parse(
                        format!("config line {line_no}"),
                        format!("unknown key {key}"),
                    ))
                }
            }
        }
        if ablation_seeds == 0 {
            return Err(Error::BadParams("ablation_seeds must be >= 1".into()));
        }
        Ok(Self {
            fit,
            views_used,
            ablation_seeds,
            text: text.to_string(),
        })
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    /// Fit settings for a scene with `available_views` views.
    pub fn resolve(&self, available_views: usize) -> Result<FitConfig> {
        let mut fit = self.fit.clone();
        fit.views_used = self.views_used.unwrap_or(available_views);
        fit.validate(available_views)?;
        Ok(fit)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optim::AblationMode;

    #[test]
    fn empty_config_is_all_defaults() {
        let cfg = RunConfig::parse("# nothing\n\n").unwrap();
        assert_eq!(cfg.fit, FitConfig::default());
        assert_eq!(cfg.views_used, None);
        assert_eq!(cfg.resolve(3).unwrap().views_used, 3);
    }

    #[test]
    fn every_key_parses() {
        let text = "n_points = 7\niterations=3\nlearning_rate = 0.5\nbeta1 = 0.8\nbeta2 = 0.99\nadam_eps = 1e-6\nseed = 42\ninit_half_extent = 0.1\ninit_center = 1, 2, 3\nalpha = 2\nbeta = 0.5\ntheta = 0.1\nmu_scales = 1, 4\nmu_min = 0.01\nnormalize_inner_sum = false\nablation_mode = no_mu\nviews_used = 2\ndeterminism = false\npad = 8   # trailing comment\nablation_seeds = 3\n";
        assert_eq!(text.lines().count(), KEYS.len());
        let cfg = RunConfig::parse(text).unwrap();
        let f = &cfg.fit;
        assert_eq!((f.n_points, f.iterations, f.seed, f.pad), (7, 3, 42, 8));
        assert_eq!((f.learning_rate, f.beta1, f.beta2, f.adam_eps), (0.5, 0.8, 0.99, 1e-6));
        assert_eq!((f.init_half_extent, f.init_center), (0.1, [1.0, 2.0, 3.0]));
        assert_eq!((f.loss.alpha, f.loss.beta, f.loss.theta, f.loss.mu_min), (2.0, 0.5, 0.1, 0.01));
        assert_eq!(f.loss.mu_scales, vec![1.0, 4.0]);
        assert!(!f.loss.normalize_inner_sum && !f.determinism);
        assert_eq!(f.ablation_mode, AblationMode::NoMu);
        assert_eq!((cfg.views_used, cfg.ablation_seeds), (Some(2), 3));
        assert_eq!(cfg.text, text);
    }

    #[test]
    fn malformed_lines_are_rejected() {
        for bad in ["iterations", "colour = red", "seed = -1", "seed = 1\nseed = 2", "init_center = 1,2"] {
            assert!(matches!(RunConfig::parse(bad), Err(Error::Parse { .. })), "{bad}");
        }
        assert!(RunConfig::parse("views_used = 5").unwrap().resolve(4).is_err());
    }
}
