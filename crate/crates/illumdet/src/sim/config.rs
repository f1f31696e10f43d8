//! Scene and detector-noise configuration, plus the key-value config
//! file format that describes both.
//!
//! The file is line-oriented: `[section]` headers followed by
//! `key = value` pairs, with `#` comments. Sections are `[scene]`,
//! `[detector]`, and one `[profile <name>]` per defect profile.
//! Unknown sections and keys are rejected; omitted keys keep their
//! defaults.

use crate::model::{LightingCondition, CONDITION_COUNT};

use super::SimError;

/// Annotator-preference weighting over the 12 conditions when drawing
/// the source condition of an annotation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AnnotationWeighting {
    /// Uniform over the conditions where the defect is visible.
    #[default]
    Uniform,
    /// Weighted by the stored annotation-frequency shape prior.
    Profiled,
}

/// Per-condition annotation-frequency shape prior (digitized from a
/// frequency chart; approximate). Index order is condition index.
pub const ANNOTATION_SOURCE_PRIOR: [f64; CONDITION_COUNT] = [
    0.10, 0.05, 0.03, // C
    0.07, 0.09, 0.05, // UD
    0.06, 0.08, 0.05, // LR
    0.16, 0.15, 0.11, // UDLR
];

/// How likely a defect of this kind is visible under each modality;
/// exposure enters as a per-level multiplier from the scene config.
#[derive(Debug, Clone, PartialEq)]
pub struct DefectProfile {
    pub name: String,
    /// Mixture weight when sampling a profile per defect.
    pub weight: f64,
    /// Base visibility probability per modality (C, UD, LR, UDLR).
    pub modality_visibility: [f64; 4],
}

impl DefectProfile {
    /// Realized visibility probability for one condition.
    pub fn visibility(&self, condition: LightingCondition, exposure_multipliers: [f64; 3]) -> f64 {
        let p = self.modality_visibility[condition.modality.code()]
            * exposure_multipliers[condition.exposure.code()];
        p.clamp(0.0, 1.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneConfig {
    pub region_count: usize,
    pub regions_per_object: usize,
    pub image_width: f64,
    pub image_height: f64,
    pub min_defects: usize,
    pub max_defects: usize,
    pub min_defect_size: f64,
    pub max_defect_size: f64,
    /// Rate of regions whose defect is visible in none of the 12
    /// conditions (the annotator's "non-visible" flag).
    pub invisible_rate: f64,
    pub exposure_multipliers: [f64; 3],
    pub annotation_weighting: AnnotationWeighting,
    pub profiles: Vec<DefectProfile>,
}

impl Default for SceneConfig {
    fn default() -> Self {
        Self {
            region_count: 100,
            regions_per_object: 4,
            image_width: 256.0,
            image_height: 256.0,
            min_defects: 1,
            max_defects: 2,
            min_defect_size: 8.0,
            max_defect_size: 32.0,
            invisible_rate: 0.008,
            exposure_multipliers: [0.8, 1.0, 0.9],
            annotation_weighting: AnnotationWeighting::Uniform,
            profiles: vec![DefectProfile {
                name: "generic".into(),
                weight: 1.0,
                modality_visibility: [0.9, 0.8, 0.8, 0.95],
            }],
        }
    }
}

impl SceneConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        if self.region_count == 0 {
            return Err(SimError::Invalid("region_count must be >= 1".into()));
        }
        if self.regions_per_object == 0 {
            return Err(SimError::Invalid("regions_per_object must be >= 1".into()));
        }
        if !(self.image_width > 0.0 && self.image_height > 0.0) {
            return Err(SimError::Invalid("image size must be positive".into()));
        }
        if self.min_defects > self.max_defects {
            return Err(SimError::Invalid("min_defects > max_defects".into()));
        }
        if !(self.min_defect_size > 0.0 && self.min_defect_size <= self.max_defect_size) {
            return Err(SimError::Invalid("bad defect size range".into()));
        }
        if self.max_defect_size > self.image_width.min(self.image_height) {
            return Err(SimError::Unsatisfiable(format!(
                "max defect size {} exceeds image bounds {}x{}",
                self.max_defect_size, self.image_width, self.image_height
            )));
        }
        if !(0.0..=1.0).contains(&self.invisible_rate) {
            return Err(SimError::Invalid("invisible_rate outside [0, 1]".into()));
        }
        if self.exposure_multipliers.iter().any(|&m| m < 0.0) {
            return Err(SimError::Invalid("negative exposure multiplier".into()));
        }
        if self.profiles.is_empty() {
            return Err(SimError::Invalid("at least one defect profile required".into()));
        }
        for p in &self.profiles {
            if p.weight <= 0.0 {
                return Err(SimError::Invalid(format!(
                    "profile `{}` weight must be positive",
                    p.name
                )));
            }
            if p.modality_visibility.iter().any(|&v| !(0.0..=1.0).contains(&v)) {
                return Err(SimError::Invalid(format!(
                    "profile `{}` visibility outside [0, 1]",
                    p.name
                )));
            }
            if p.modality_visibility.iter().all(|&v| v == 0.0) {
                return Err(SimError::Invalid(format!(
                    "profile `{}` is never visible; model invisibility via invisible_rate",
                    p.name
                )));
            }
        }
        Ok(())
    }
}

/// Detector stand-in: per-image detection, localization, and clutter
/// noise. Confidences are Beta samples rescaled into a range, so a
/// degenerate range (min == max) gives constant confidences.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectorNoiseModel {
    /// Probability of emitting a detection for a visible defect.
    pub detect_probability: f64,
    /// Stddev in pixels of the Gaussian jitter added per box corner.
    pub jitter_std: f64,
    pub true_confidence_beta: (f64, f64),
    pub true_confidence_range: (f64, f64),
    /// Poisson mean of false-positive boxes per image.
    pub false_positive_rate: f64,
    pub false_confidence_beta: (f64, f64),
    pub false_confidence_range: (f64, f64),
}

impl Default for DetectorNoiseModel {
    fn default() -> Self {
        Self {
            detect_probability: 0.9,
            jitter_std: 1.0,
            true_confidence_beta: (6.0, 2.0),
            true_confidence_range: (0.2, 1.0),
            false_positive_rate: 0.2,
            false_confidence_beta: (2.0, 5.0),
            false_confidence_range: (0.0, 0.8),
        }
    }
}

impl DetectorNoiseModel {
    pub fn validate(&self) -> Result<(), SimError> {
        if !(0.0..=1.0).contains(&self.detect_probability) {
            return Err(SimError::Invalid("detect_probability outside [0, 1]".into()));
        }
        if self.jitter_std < 0.0 {
            return Err(SimError::Invalid("jitter_std must be >= 0".into()));
        }
        if self.false_positive_rate < 0.0 {
            return Err(SimError::Invalid("false_positive_rate must be >= 0".into()));
        }
        for (lo, hi) in [self.true_confidence_range, self.false_confidence_range] {
            if !(0.0 <= lo && lo <= hi && hi <= 1.0) {
                return Err(SimError::Invalid("confidence range must satisfy 0 <= lo <= hi <= 1".into()));
            }
        }
        for (a, b) in [self.true_confidence_beta, self.false_confidence_beta] {
            if !(a > 0.0 && b > 0.0) {
                return Err(SimError::Invalid("beta parameters must be positive".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SimConfig {
    pub scene: SceneConfig,
    pub detector: DetectorNoiseModel,
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        self.scene.validate()?;
        self.detector.validate()
    }
}

/// Canonical text of the default configuration, suitable both as
/// documentation and as a valid input file.
pub fn default_config_text() -> String {
    let scene = SceneConfig::default();
    let det = DetectorNoiseModel::default();
    let profile = &scene.profiles[0];
    format!(
        "[scene]\n\
         regions = {}\n\
         regions_per_object = {}\n\
         image_width = {}\n\
         image_height = {}\n\
         min_defects = {}\n\
         max_defects = {}\n\
         min_defect_size = {}\n\
         max_defect_size = {}\n\
         invisible_rate = {}\n\
         exposure_multipliers = {},{},{}\n\
         annotation_weighting = uniform\n\
         \n\
         [profile {}]\n\
         weight = {}\n\
         visibility = {},{},{},{}\n\
         \n\
         [detector]\n\
         detect_probability = {}\n\
         jitter_std = {}\n\
         true_confidence_beta = {},{}\n\
         true_confidence_range = {},{}\n\
         false_positive_rate = {}\n\
         false_confidence_beta = {},{}\n\
         false_confidence_range = {},{}\n",
        scene.region_count,
        scene.regions_per_object,
        scene.image_width,
        scene.image_height,
        scene.min_defects,
        scene.max_defects,
        scene.min_defect_size,
        scene.max_defect_size,
        scene.invisible_rate,
        scene.exposure_multipliers[0],
        scene.exposure_multipliers[1],
        scene.exposure_multipliers[2],
        profile.name,
        profile.weight,
        profile.modality_visibility[0],
        profile.modality_visibility[1],
        profile.modality_visibility[2],
        profile.modality_visibility[3],
        det.detect_probability,
        det.jitter_std,
        det.true_confidence_beta.0,
        det.true_confidence_beta.1,
        det.true_confidence_range.0,
        det.true_confidence_range.1,
        det.false_positive_rate,
        det.false_confidence_beta.0,
        det.false_confidence_beta.1,
        det.false_confidence_range.0,
        det.false_confidence_range.1,
    )
}

enum Section {
    None,
    Scene,
    Detector,
    Profile(usize),
}

/// Parses a config file. A config that declares any `[profile ...]`
/// section replaces the default profile list entirely.
pub fn parse_config(text: &str) -> Result<SimConfig, SimError> {
    let mut cfg = SimConfig::default();
    let mut profiles: Vec<DefectProfile> = Vec::new();
    let mut section = Section::None;

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = match raw.find('#') {
            Some(pos) => &raw[..pos],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        if let Some(inner) = line.strip_prefix('[') {
            let inner = inner
                .strip_suffix(']')
                .ok_or_else(|| SimError::format(line_no, "unterminated section header"))?
                .trim();
            section = match inner {
                "scene" => Section::Scene,
                "detector" => Section::Detector,
                _ => match inner.strip_prefix("profile ") {
                    Some(name) if !name.trim().is_empty() => {
                        profiles.push(DefectProfile {
                            name: name.trim().to_string(),
                            weight: 1.0,
                            modality_visibility: [0.5; 4],
                        });
                        Section::Profile(profiles.len() - 1)
                    }
                    _ => {
                        return Err(SimError::format(
                            line_no,
                            format!("unknown section `[{inner}]`"),
                        ))
                    }
                },
            };
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| SimError::format(line_no, "expected `key = value`"))?;
        let key = key.trim();
        let value = value.trim();
        match &section {
            Section::None => {
                return Err(SimError::format(line_no, "key before any section header"))
            }
            Section::Scene => apply_scene_key(&mut cfg.scene, key, value, line_no)?,
            Section::Detector => apply_detector_key(&mut cfg.detector, key, value, line_no)?,
            Section::Profile(i) => apply_profile_key(&mut profiles[*i], key, value, line_no)?,
        }
    }
    if !profiles.is_empty() {
        cfg.scene.profiles = profiles;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn parse_num<T: std::str::FromStr>(value: &str, key: &str, line: usize) -> Result<T, SimError> {
    value
        .parse::<T>()
        .map_err(|_| SimError::format(line, format!("bad value `{value}` for `{key}`")))
}

fn parse_list<const N: usize>(value: &str, key: &str, line: usize) -> Result<[f64; N], SimError> {
    let parts: Vec<&str> = value.split(',').map(str::trim).collect();
    if parts.len() != N {
        return Err(SimError::format(
            line,
            format!("`{key}` needs {N} comma-separated values"),
        ));
    }
    let mut out = [0.0; N];
    for (o, p) in out.iter_mut().zip(parts) {
        *o = parse_num::<f64>(p, key, line)?;
    }
    Ok(out)
}

fn apply_scene_key(
    scene: &mut SceneConfig,
    key: &str,
    value: &str,
    line: usize,
) -> Result<(), SimError> {
    match key {
        "regions" => scene.region_count = parse_num(value, key, line)?,
        "regions_per_object" => scene.regions_per_object = parse_num(value, key, line)?,
        "image_width" => scene.image_width = parse_num(value, key, line)?,
        "image_height" => scene.image_height = parse_num(value, key, line)?,
        "min_defects" => scene.min_defects = parse_num(value, key, line)?,
        "max_defects" => scene.max_defects = parse_num(value, key, line)?,
        "min_defect_size" => scene.min_defect_size = parse_num(value, key, line)?,
        "max_defect_size" => scene.max_defect_size = parse_num(value, key, line)?,
        "invisible_rate" => scene.invisible_rate = parse_num(value, key, line)?,
        "exposure_multipliers" => scene.exposure_multipliers = parse_list::<3>(value, key, line)?,
        "annotation_weighting" => {
            scene.annotation_weighting = match value {
                "uniform" => AnnotationWeighting::Uniform,
                "profiled" => AnnotationWeighting::Profiled,
                other => {
                    return Err(SimError::format(
                        line,
                        format!("unknown annotation_weighting `{other}`"),
                    ))
                }
            }
        }
        other => return Err(SimError::format(line, format!("unknown scene key `{other}`"))),
    }
    Ok(())
}

fn apply_detector_key(
    det: &mut DetectorNoiseModel,
    key: &str,
    value: &str,
    line: usize,
) -> Result<(), SimError> {
    match key {
        "detect_probability" => det.detect_probability = parse_num(value, key, line)?,
        "jitter_std" => det.jitter_std = parse_num(value, key, line)?,
        "true_confidence_beta" => {
            let [a, b] = parse_list::<2>(value, key, line)?;
            det.true_confidence_beta = (a, b);
        }
        "true_confidence_range" => {
            let [lo, hi] = parse_list::<2>(value, key, line)?;
            det.true_confidence_range = (lo, hi);
        }
        "false_positive_rate" => det.false_positive_rate = parse_num(value, key, line)?,
        "false_confidence_beta" => {
            let [a, b] = parse_list::<2>(value, key, line)?;
            det.false_confidence_beta = (a, b);
        }
        "false_confidence_range" => {
            let [lo, hi] = parse_list::<2>(value, key, line)?;
            det.false_confidence_range = (lo, hi);
        }
        other => {
            return Err(SimError::format(
                line,
                format!("unknown detector key `{other}`"),
            ))
        }
    }
    Ok(())
}

fn apply_profile_key(
    profile: &mut DefectProfile,
    key: &str,
    value: &str,
    line: usize,
) -> Result<(), SimError> {
    match key {
        "weight" => profile.weight = parse_num(value, key, line)?,
        "visibility" => profile.modality_visibility = parse_list::<4>(value, key, line)?,
        other => {
            return Err(SimError::format(
                line,
                format!("unknown profile key `{other}`"),
            ))
        }
    }
    Ok(())
}
