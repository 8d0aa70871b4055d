//! Flat `key = value` pipeline configuration.
//!
//! One format serves config files, `--set` overrides, and `--print-config`
//! output: blank lines and `#` comments are ignored, every other line is
//! `section.key = value`. Printing then re-parsing a config reproduces it
//! exactly.

use crate::error::{Error, Result};
use crate::moments::HuTransform;
use crate::segmentation::SegmentationParams;
use crate::tracker::{DistanceMode, TrackerParams};

/// Split flat key/value text into `(line, key, value)` triples, skipping
/// blanks and `#` comments. Errors are `(line, message)` pairs so callers
/// can brand them as config or script problems.
pub(crate) fn parse_kv_lines(
    text: &str,
) -> std::result::Result<Vec<(usize, String, String)>, (usize, String)> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let Some((key, value)) = trimmed.split_once('=') else {
            return Err((line, format!("expected `key = value`, got `{trimmed}`")));
        };
        let key = key.trim();
        let value = value.trim();
        if key.is_empty() {
            return Err((line, "empty key".into()));
        }
        out.push((line, key.to_string(), value.to_string()));
    }
    Ok(out)
}

/// Mask cleanup settings.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MorphologyParams {
    /// 3x3 erosion passes applied after hole filling; at least 1.
    pub erode_iterations: u32,
    /// Minimum blob area, expressed at the 360x240 reference resolution and
    /// scaled to the actual frame area.
    pub min_area: u32,
}

impl Default for MorphologyParams {
    fn default() -> Self {
        MorphologyParams {
            erode_iterations: 1,
            min_area: 150,
        }
    }
}

/// Evaluation settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalParams {
    /// Overlap required for a box to count as observing an object; in (0, 1].
    pub iou_threshold: f64,
}

impl Default for EvalParams {
    fn default() -> Self {
        EvalParams { iou_threshold: 0.5 }
    }
}

/// Which artifacts a pipeline run writes next to its track CSV.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OutputToggles {
    pub annotated: bool,
    pub masks: bool,
    pub features: bool,
    pub associations: bool,
}

impl Default for OutputToggles {
    fn default() -> Self {
        OutputToggles {
            annotated: true,
            masks: false,
            features: false,
            associations: false,
        }
    }
}

/// Every knob of the batch pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PipelineConfig {
    pub segmentation: SegmentationParams,
    pub morphology: MorphologyParams,
    pub hu_transform: HuTransform,
    pub tracker: TrackerParams,
    pub eval: EvalParams,
    pub output: OutputToggles,
}

fn parse_f64(key: &str, value: &str) -> Result<f64> {
    let v: f64 = value
        .parse()
        .map_err(|_| Error::Config(format!("{key}: `{value}` is not a number")))?;
    if !v.is_finite() {
        return Err(Error::Config(format!("{key}: `{value}` is not finite")));
    }
    Ok(v)
}

fn parse_u32(key: &str, value: &str) -> Result<u32> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("{key}: `{value}` is not a non-negative integer")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" => Ok(true),
        "false" => Ok(false),
        other => Err(Error::Config(format!("{key}: `{other}` is not true/false"))),
    }
}

impl PipelineConfig {
    /// Apply one `key = value` override.
    pub fn apply(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "segmentation.threshold" => self.segmentation.threshold = parse_f64(key, value)?,
            "segmentation.epsilon" => self.segmentation.epsilon = parse_f64(key, value)?,
            "morphology.erode_iterations" => {
                self.morphology.erode_iterations = parse_u32(key, value)?
            }
            "morphology.min_area" => self.morphology.min_area = parse_u32(key, value)?,
            "features.hu_transform" => {
                self.hu_transform = match value {
                    "raw" => HuTransform::Raw,
                    "signed-log" => HuTransform::SignedLog,
                    other => {
                        return Err(Error::Config(format!(
                            "{key}: `{other}` is not one of raw|signed-log"
                        )))
                    }
                }
            }
            "tracker.distance_mode" => {
                self.tracker.distance_mode = match value {
                    "robust" => DistanceMode::Robust,
                    "strict" => DistanceMode::Strict,
                    other => {
                        return Err(Error::Config(format!(
                            "{key}: `{other}` is not one of robust|strict"
                        )))
                    }
                }
            }
            "tracker.epsilon" => self.tracker.epsilon = parse_f64(key, value)?,
            "tracker.tau_new" => self.tracker.tau_new = parse_f64(key, value)?,
            "tracker.k_miss" => self.tracker.k_miss = parse_u32(key, value)?,
            "tracker.normalize" => self.tracker.normalize = parse_bool(key, value)?,
            "eval.iou_threshold" => self.eval.iou_threshold = parse_f64(key, value)?,
            "output.annotated" => self.output.annotated = parse_bool(key, value)?,
            "output.masks" => self.output.masks = parse_bool(key, value)?,
            "output.features" => self.output.features = parse_bool(key, value)?,
            "output.associations" => self.output.associations = parse_bool(key, value)?,
            other => return Err(Error::Config(format!("unknown key `{other}`"))),
        }
        Ok(())
    }

    /// Apply a whole config file's worth of overrides.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        let kv =
            parse_kv_lines(text).map_err(|(line, message)| Error::Config(format!("line {line}: {message}")))?;
        for (line, key, value) in kv {
            self.apply(&key, &value)
                .map_err(|e| match e {
                    Error::Config(message) => Error::Config(format!("line {line}: {message}")),
                    other => other,
                })?;
        }
        Ok(())
    }

    /// Parse a complete config: defaults, then `text`, then validation.
    pub fn parse(text: &str) -> Result<PipelineConfig> {
        let mut config = PipelineConfig::default();
        config.apply_text(text)?;
        config.validate()?;
        Ok(config)
    }

    /// Apply a `KEY=VALUE` command-line override.
    pub fn apply_set(&mut self, spec: &str) -> Result<()> {
        let Some((key, value)) = spec.split_once('=') else {
            return Err(Error::Config(format!(
                "--set expects KEY=VALUE, got `{spec}`"
            )));
        };
        self.apply(key.trim(), value.trim())
    }

    /// Check every value constraint.
    pub fn validate(&self) -> Result<()> {
        let fail = |message: String| Err(Error::Config(message));
        if self.segmentation.threshold < 0.0 {
            return fail(format!(
                "segmentation.threshold must be >= 0, got {}",
                self.segmentation.threshold
            ));
        }
        if self.segmentation.epsilon <= 0.0 {
            return fail(format!(
                "segmentation.epsilon must be > 0, got {}",
                self.segmentation.epsilon
            ));
        }
        if self.morphology.erode_iterations < 1 {
            return fail("morphology.erode_iterations must be at least 1".into());
        }
        if self.morphology.min_area < 1 {
            return fail("morphology.min_area must be at least 1".into());
        }
        if self.tracker.epsilon <= 0.0 {
            return fail(format!(
                "tracker.epsilon must be > 0, got {}",
                self.tracker.epsilon
            ));
        }
        if self.tracker.tau_new <= 0.0 {
            return fail(format!(
                "tracker.tau_new must be > 0, got {}",
                self.tracker.tau_new
            ));
        }
        if !(self.eval.iou_threshold > 0.0 && self.eval.iou_threshold <= 1.0) {
            return fail(format!(
                "eval.iou_threshold must lie in (0, 1], got {}",
                self.eval.iou_threshold
            ));
        }
        Ok(())
    }

    /// Render the full configuration in the same format [`parse`] accepts;
    /// parsing the output reproduces `self` exactly.
    pub fn to_config_string(&self) -> String {
        let hu = match self.hu_transform {
            HuTransform::Raw => "raw",
            HuTransform::SignedLog => "signed-log",
        };
        let mode = match self.tracker.distance_mode {
            DistanceMode::Robust => "robust",
            DistanceMode::Strict => "strict",
        };
        format!(
            "segmentation.threshold = {}\n\
             segmentation.epsilon = {}\n\
             morphology.erode_iterations = {}\n\
             morphology.min_area = {}\n\
             features.hu_transform = {hu}\n\
             tracker.distance_mode = {mode}\n\
             tracker.epsilon = {}\n\
             tracker.tau_new = {}\n\
             tracker.k_miss = {}\n\
             tracker.normalize = {}\n\
             eval.iou_threshold = {}\n\
             output.annotated = {}\n\
             output.masks = {}\n\
             output.features = {}\n\
             output.associations = {}\n",
            self.segmentation.threshold,
            self.segmentation.epsilon,
            self.morphology.erode_iterations,
            self.morphology.min_area,
            self.tracker.epsilon,
            self.tracker.tau_new,
            self.tracker.k_miss,
            self.tracker.normalize,
            self.eval.iou_threshold,
            self.output.annotated,
            self.output.masks,
            self.output.features,
            self.output.associations,
        )
    }
}
