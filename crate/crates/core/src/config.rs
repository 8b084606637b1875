//! Flat `key=value` run configuration shared by the command-line driver.
//!
//! Values are layered: built-in defaults, then a config file, then
//! environment variables named `BLOCKTRIFOCAL_<KEY>` (key upper-cased), then
//! explicit overrides from the command line. Unknown keys are rejected.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::robust::SubspaceConfig;
use crate::scene::{
    parse_noise, CorruptionConfig, LineExperimentConfig, MaskLaw, ScaleLaw, SceneConfig,
};
use crate::sync::SyncConfig;
use crate::tensor::SvdBackendConfig;

pub const ENV_PREFIX: &str = "BLOCKTRIFOCAL_";

/// Every accepted key with its default value and a one-line description.
pub const KEYS: &[(&str, &str, &str)] = &[
    ("seed", "0", "master seed; the corruption and sync seeds derive from it"),
    ("source", "exact", "exact | lines: exact blocks or blocks estimated from noisy lines"),
    ("n_cameras", "10", "number of cameras"),
    ("layout", "generic", "generic | inward | collinear | coincident"),
    ("calibrated", "true", "calibrated cameras (K = I)"),
    ("n_points", "0", "world points in the scene"),
    ("n_lines", "25", "world lines in the scene"),
    ("noise", "0", "relative image noise: a number, paper-low or paper-high"),
    ("scene_radius", "1", "radius of the ball holding the world geometry"),
    ("scale_law", "unit", "unit | log_uniform | random_rank1"),
    ("scale_lo", "0.1", "lower bound for random scales"),
    ("scale_hi", "10", "upper bound for random scales"),
    ("sign_flip_prob", "0", "probability of negating a block"),
    ("mask", "full", "full | bernoulli | per_slice_min"),
    ("p_observed", "0.7", "observation probability for the bernoulli mask"),
    ("min_slice_fraction", "0.5", "minimum observed fraction per slice"),
    ("outlier_block_prob", "0", "probability of replacing a block by noise"),
    ("projector", "hosvd_ht", "hosvd_ht | horste"),
    ("threshold_rule", "tertile", "tertile | explicit"),
    ("thresholds", "", "three comma-separated thresholds for the explicit rule"),
    ("scale_formula", "least_squares", "least_squares | paper_literal"),
    ("max_iters", "50", "synchronization iteration cap"),
    ("variance_jump_factor", "10", "stop when the scale variance jumps by this factor"),
    ("init_scale", "0.01", "relative size of the random initial imputation"),
    ("preserve_norm", "true", "keep the observed norm fixed across scale updates"),
    ("svd", "exact", "exact | randomized"),
    ("ranks", "6,4,4", "target multilinear rank for horste and camera extraction"),
    ("reg_alpha", "0.05", "regularization weight for robust subspace estimation"),
    ("ste_gamma", "0.9", "trailing-eigenvalue shrinkage for robust subspace estimation"),
];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Source {
    Exact,
    Lines,
}

/// Raw layered key/value pairs.
#[derive(Clone, Debug)]
pub struct RawConfig {
    values: BTreeMap<String, String>,
}

impl Default for RawConfig {
    fn default() -> Self {
        Self {
            values: KEYS
                .iter()
                .map(|(k, v, _)| (k.to_string(), v.to_string()))
                .collect(),
        }
    }
}

fn known(key: &str) -> bool {
    KEYS.iter().any(|(k, _, _)| *k == key)
}

impl RawConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        if !known(key) {
            return Err(Error::InvalidConfig(format!("unknown key '{key}'")));
        }
        self.values.insert(key.to_string(), value.trim().to_string());
        Ok(())
    }

    pub fn get(&self, key: &str) -> &str {
        self.values.get(key).map(String::as_str).unwrap_or("")
    }

    /// Applies `key = value` lines; `#` starts a comment.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (no, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
                line: no + 1,
                msg: format!("expected key=value, got '{line}'"),
            })?;
            self.set(k.trim(), v).map_err(|e| Error::Parse {
                line: no + 1,
                msg: e.to_string(),
            })?;
        }
        Ok(())
    }

    /// Applies `BLOCKTRIFOCAL_<KEY>` variables. Variables in `ignore` belong
    /// to the command-line parser and are skipped.
    pub fn apply_env<I>(&mut self, vars: I, ignore: &[&str]) -> Result<()>
    where
        I: IntoIterator<Item = (String, String)>,
    {
        for (name, value) in vars {
            let Some(rest) = name.strip_prefix(ENV_PREFIX) else {
                continue;
            };
            if ignore.contains(&rest) {
                continue;
            }
            self.set(&rest.to_ascii_lowercase(), &value)
                .map_err(|_| Error::InvalidConfig(format!("unknown environment variable {name}")))?;
        }
        Ok(())
    }

    /// Serializes every key in sorted order.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.values {
            let _ = writeln!(out, "{k}={v}");
        }
        out
    }

    fn parse<T: std::str::FromStr>(&self, key: &str) -> Result<T> {
        let v = self.get(key);
        v.parse::<T>()
            .map_err(|_| Error::InvalidConfig(format!("bad value '{v}' for {key}")))
    }

    fn parse_bool(&self, key: &str) -> Result<bool> {
        match self.get(key) {
            "true" | "1" | "yes" => Ok(true),
            "false" | "0" | "no" => Ok(false),
            v => Err(Error::InvalidConfig(format!("bad value '{v}' for {key}"))),
        }
    }

    fn parse_list<T: std::str::FromStr>(&self, key: &str) -> Result<Vec<T>> {
        self.get(key)
            .split(',')
            .map(|s| {
                s.trim()
                    .parse::<T>()
                    .map_err(|_| Error::InvalidConfig(format!("bad list '{}' for {key}", self.get(key))))
            })
            .collect()
    }

    pub fn resolve(&self) -> Result<RunConfig> {
        let seed: u64 = self.parse("seed")?;
        let source = match self.get("source") {
            "exact" => Source::Exact,
            "lines" => Source::Lines,
            v => return Err(Error::InvalidConfig(format!("bad value '{v}' for source"))),
        };
        let scene = SceneConfig {
            n_cameras: self.parse("n_cameras")?,
            layout: self.get("layout").parse()?,
            calibrated: self.parse_bool("calibrated")?,
            n_points: self.parse("n_points")?,
            n_lines: self.parse("n_lines")?,
            noise_rel: parse_noise(self.get("noise"))?,
            scene_radius: self.parse("scene_radius")?,
            seed,
        };
        scene.validate()?;

        let (lo, hi) = (self.parse("scale_lo")?, self.parse("scale_hi")?);
        let corruption = CorruptionConfig {
            scale_law: match self.get("scale_law") {
                "unit" => ScaleLaw::Unit,
                "log_uniform" => ScaleLaw::LogUniform { lo, hi },
                "random_rank1" => ScaleLaw::RandomRank1 { lo, hi },
                v => return Err(Error::InvalidConfig(format!("bad value '{v}' for scale_law"))),
            },
            sign_flip_prob: self.parse("sign_flip_prob")?,
            mask_law: match self.get("mask") {
                "full" => MaskLaw::Full,
                "bernoulli" => MaskLaw::Bernoulli {
                    p_observed: self.parse("p_observed")?,
                },
                "per_slice_min" => MaskLaw::PerSliceMin {
                    q: self.parse("min_slice_fraction")?,
                },
                v => return Err(Error::InvalidConfig(format!("bad value '{v}' for mask"))),
            },
            outlier_block_prob: self.parse("outlier_block_prob")?,
            seed: seed.wrapping_add(1),
        };
        corruption.validate()?;

        let thresholds = match self.get("thresholds") {
            "" => None,
            _ => {
                let l: Vec<f64> = self.parse_list("thresholds")?;
                let l: [f64; 3] = l
                    .try_into()
                    .map_err(|_| Error::InvalidConfig("thresholds needs three values".into()))?;
                Some(l)
            }
        };
        let ranks: [usize; 3] = self
            .parse_list::<usize>("ranks")?
            .try_into()
            .map_err(|_| Error::InvalidConfig("ranks needs three values".into()))?;
        let sync = SyncConfig {
            thresholds,
            threshold_rule: self.get("threshold_rule").parse()?,
            projector: self.get("projector").parse()?,
            scale_formula: self.get("scale_formula").parse()?,
            max_iters: self.parse("max_iters")?,
            variance_jump_factor: self.parse("variance_jump_factor")?,
            init_scale: self.parse("init_scale")?,
            seed: seed.wrapping_add(2),
            svd: match self.get("svd") {
                "exact" => SvdBackendConfig::exact(),
                "randomized" => SvdBackendConfig::randomized(seed.wrapping_add(3)),
                v => return Err(Error::InvalidConfig(format!("bad value '{v}' for svd"))),
            },
            subspace: SubspaceConfig {
                reg_alpha: self.parse("reg_alpha")?,
                ste_gamma: self.parse("ste_gamma")?,
                ..SubspaceConfig::default()
            },
            ranks,
            preserve_norm: self.parse_bool("preserve_norm")?,
        };
        sync.validate()?;

        Ok(RunConfig {
            source,
            scene,
            corruption,
            sync,
        })
    }
}

/// Typed configuration for one run.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub source: Source,
    pub scene: SceneConfig,
    pub corruption: CorruptionConfig,
    pub sync: SyncConfig,
}

impl RunConfig {
    pub fn line_experiment(&self) -> LineExperimentConfig {
        LineExperimentConfig {
            n_cameras: self.scene.n_cameras,
            n_lines: self.scene.n_lines,
            noise_rel: self.scene.noise_rel,
            scene_radius: self.scene.scene_radius,
            seed: self.scene.seed,
        }
    }
}
