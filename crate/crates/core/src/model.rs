//! Stream domain types and scenario configuration.
//!
//! A [`StreamConfig`] is the declarative description of one synthetic stream:
//! the classes with their ratios and example-type mix, the drifts applied to
//! them, the generator variant and the RNG seed. [`validate_config`] checks
//! every invariant at once and returns a [`ValidatedConfig`] that the rest of
//! the crate consumes.

use std::fmt;
use std::ops::Deref;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Number of numeric attributes of every generated example.
pub const N_ATTRIBUTES: usize = 5;

/// A point in attribute space.
pub type Point = [f64; N_ATTRIBUTES];

/// Default first example of the drift window.
pub const DEFAULT_DRIFT_START: u64 = 70_000;
/// Default last example of the drift window.
pub const DEFAULT_DRIFT_END: u64 = 100_000;
/// Default length of a stationary stream.
pub const DEFAULT_STATIONARY_LENGTH: u64 = 200_000;
/// Default length of a stream with at least one drift.
pub const DEFAULT_DRIFTING_LENGTH: u64 = 250_000;

const SUM_TOLERANCE: f64 = 1e-9;

/// How the generator placed an example.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExampleType {
    Safe,
    Borderline,
    Rare,
}

impl ExampleType {
    pub const ALL: [ExampleType; 3] = [ExampleType::Safe, ExampleType::Borderline, ExampleType::Rare];

    pub fn as_str(self) -> &'static str {
        match self {
            ExampleType::Safe => "safe",
            ExampleType::Borderline => "borderline",
            ExampleType::Rare => "rare",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "safe" => Some(ExampleType::Safe),
            "borderline" => Some(ExampleType::Borderline),
            "rare" => Some(ExampleType::Rare),
            _ => None,
        }
    }
}

/// One stream element.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledExample {
    /// 1-based position in the stream.
    pub t: u64,
    pub x: Point,
    /// Index into the configured class list.
    pub y: usize,
    pub gen_type: Option<ExampleType>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassRole {
    Majority,
    Minority,
}

/// Categorical distribution over the generated example types.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TypeProportions {
    pub safe: f64,
    pub borderline: f64,
    pub rare: f64,
}

impl Default for TypeProportions {
    fn default() -> Self {
        Self::safe_only()
    }
}

impl TypeProportions {
    pub fn new(safe: f64, borderline: f64, rare: f64) -> Self {
        Self { safe, borderline, rare }
    }

    pub fn safe_only() -> Self {
        Self::new(1.0, 0.0, 0.0)
    }

    /// `share` borderline examples, the rest safe.
    pub fn borderline(share: f64) -> Self {
        Self::new(1.0 - share, share, 0.0)
    }

    /// `share` rare examples, the rest safe.
    pub fn rare(share: f64) -> Self {
        Self::new(1.0 - share, 0.0, share)
    }

    pub fn get(&self, kind: ExampleType) -> f64 {
        match kind {
            ExampleType::Safe => self.safe,
            ExampleType::Borderline => self.borderline,
            ExampleType::Rare => self.rare,
        }
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.safe, self.borderline, self.rare]
    }

    pub fn sum(&self) -> f64 {
        self.safe + self.borderline + self.rare
    }

    /// Componentwise `(1 - p) * self + p * other`. Exact at `p = 0` and `p = 1`.
    pub fn lerp(&self, other: &Self, p: f64) -> Self {
        Self::new(
            lerp(self.safe, other.safe, p),
            lerp(self.borderline, other.borderline, p),
            lerp(self.rare, other.rare, p),
        )
    }

    pub(crate) fn renormalized(self) -> Self {
        let s = self.sum();
        if s > 0.0 && (s - 1.0).abs() > 1e-12 {
            Self::new(self.safe / s, self.borderline / s, self.rare / s)
        } else {
            self
        }
    }
}

/// Linear interpolation written so that both endpoints are reproduced bit for bit.
pub(crate) fn lerp(a: f64, b: f64, p: f64) -> f64 {
    if p <= 0.0 {
        a
    } else if p >= 1.0 {
        b
    } else {
        (1.0 - p) * a + p * b
    }
}

fn default_subclusters() -> usize {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassSpec {
    pub name: String,
    pub role: ClassRole,
    /// Fraction of the stream, in (0, 1].
    pub ratio: f64,
    #[serde(default)]
    pub type_proportions: TypeProportions,
    #[serde(default = "default_subclusters")]
    pub n_subclusters: usize,
}

impl ClassSpec {
    pub fn majority(name: impl Into<String>, ratio: f64) -> Self {
        Self {
            name: name.into(),
            role: ClassRole::Majority,
            ratio,
            type_proportions: TypeProportions::safe_only(),
            n_subclusters: 1,
        }
    }

    pub fn minority(name: impl Into<String>, ratio: f64) -> Self {
        Self {
            name: name.into(),
            role: ClassRole::Minority,
            ratio,
            type_proportions: TypeProportions::safe_only(),
            n_subclusters: 1,
        }
    }

    pub fn with_types(mut self, types: TypeProportions) -> Self {
        self.type_proportions = types;
        self
    }

    pub fn with_subclusters(mut self, n: usize) -> Self {
        self.n_subclusters = n;
        self
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DriftKind {
    ImbalanceRatio,
    TypeProportion,
    Split,
    Move,
    /// Reserved; rejected by validation.
    Merge,
    /// Reserved; rejected by validation.
    ClassSwap,
}

impl DriftKind {
    fn affects_geometry(self) -> bool {
        matches!(self, DriftKind::Split | DriftKind::Move | DriftKind::Merge)
    }
}

/// Which classes a drift applies to. Serialized as a class name or `"all_minority"`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(from = "String", into = "String")]
pub enum DriftTarget {
    AllMinority,
    Class(String),
}

impl From<String> for DriftTarget {
    fn from(s: String) -> Self {
        if s == "all_minority" {
            DriftTarget::AllMinority
        } else {
            DriftTarget::Class(s)
        }
    }
}

impl From<DriftTarget> for String {
    fn from(t: DriftTarget) -> Self {
        match t {
            DriftTarget::AllMinority => "all_minority".to_string(),
            DriftTarget::Class(name) => name,
        }
    }
}

impl fmt::Display for DriftTarget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DriftTarget::AllMinority => f.write_str("all_minority"),
            DriftTarget::Class(name) => f.write_str(name),
        }
    }
}

/// Kind-specific drift parameter: a ratio, a sub-cluster count, or a type mix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DriftValue {
    Number(f64),
    Types(TypeProportions),
}

fn default_drift_start() -> u64 {
    DEFAULT_DRIFT_START
}

fn default_drift_end() -> u64 {
    DEFAULT_DRIFT_END
}

/// One incremental drift.
///
/// * `imbalance_ratio`: `to_value` is the final ratio of every targeted minority class;
///   the majority class absorbs the difference.
/// * `type_proportion`: `to_value` is the final type mix of every targeted class.
/// * `split`: `to_value` is the number of sub-clusters a single-cluster class splits into.
/// * `move`: relocates the existing sub-clusters; takes no values.
///
/// `from_value`, when given, must agree with the class configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DriftSpec {
    pub kind: DriftKind,
    pub target: DriftTarget,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub from_value: Option<DriftValue>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub to_value: Option<DriftValue>,
    #[serde(default = "default_drift_start")]
    pub t_start: u64,
    #[serde(default = "default_drift_end")]
    pub t_end: u64,
}

impl DriftSpec {
    pub fn new(kind: DriftKind, target: DriftTarget, to_value: Option<DriftValue>) -> Self {
        Self {
            kind,
            target,
            from_value: None,
            to_value,
            t_start: DEFAULT_DRIFT_START,
            t_end: DEFAULT_DRIFT_END,
        }
    }

    pub fn imbalance_ratio(target: DriftTarget, to: f64) -> Self {
        Self::new(DriftKind::ImbalanceRatio, target, Some(DriftValue::Number(to)))
    }

    pub fn type_proportion(target: DriftTarget, to: TypeProportions) -> Self {
        Self::new(DriftKind::TypeProportion, target, Some(DriftValue::Types(to)))
    }

    pub fn split(target: DriftTarget, into: usize) -> Self {
        Self::new(DriftKind::Split, target, Some(DriftValue::Number(into as f64)))
    }

    pub fn moving(target: DriftTarget) -> Self {
        Self::new(DriftKind::Move, target, None)
    }

    pub fn window(mut self, t_start: u64, t_end: u64) -> Self {
        self.t_start = t_start;
        self.t_end = t_end;
        self
    }

    pub(crate) fn to_number(&self) -> Option<f64> {
        match self.to_value {
            Some(DriftValue::Number(v)) => Some(v),
            _ => None,
        }
    }

    pub(crate) fn to_types(&self) -> Option<TypeProportions> {
        match self.to_value {
            Some(DriftValue::Types(t)) => Some(t),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GeneratorKind {
    /// Minority ellipsoids inside a uniformly populated majority region.
    #[default]
    Old,
    /// Every class is an ellipsoid; minority ellipsoids overlap the majority one.
    New,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Distribution {
    #[default]
    Uniform,
    Gaussian,
}

/// Geometry constants of the generators. All distances are in attribute units.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GeometryParams {
    /// Per-axis radius of a single-cluster minority ellipsoid.
    pub minority_radius: f64,
    /// Per-axis radius of the majority ellipsoid (new generator).
    pub majority_radius: f64,
    /// Borderline band half-width as a fraction of the radius.
    pub border_width: f64,
    /// Share of majority examples placed in the shells around minority
    /// sub-clusters (old generator); the rest fill the attribute space.
    pub surround_share: f64,
    /// Inner radius of those shells as a fraction of the sub-cluster radius.
    /// Values below 1 make the majority reach into the borderline band.
    pub surround_inner: f64,
    /// Thickness of the shells; they span `[surround_inner, surround_inner + surround_width]`.
    pub surround_width: f64,
    /// Radius of a rare island.
    pub rare_radius: f64,
    /// Largest number of examples sharing one rare island.
    pub rare_group_max: usize,
    /// Rare anchors keep `rare_distance_factor * max own radius` from own sub-clusters.
    pub rare_distance_factor: f64,
    /// Rejection budget for cluster placement and point sampling.
    pub max_attempts: usize,
}

impl Default for GeometryParams {
    fn default() -> Self {
        Self {
            minority_radius: 0.15,
            majority_radius: 0.35,
            border_width: 0.3,
            surround_share: 0.3,
            surround_inner: 0.85,
            surround_width: 0.5,
            rare_radius: 0.02,
            rare_group_max: 3,
            rare_distance_factor: 1.5,
            max_attempts: 10_000,
        }
    }
}

/// Declarative description of one synthetic stream.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StreamConfig {
    /// Scenario identifier used in result files.
    #[serde(default)]
    pub id: String,
    pub classes: Vec<ClassSpec>,
    #[serde(default)]
    pub drifts: Vec<DriftSpec>,
    #[serde(default)]
    pub generator: GeneratorKind,
    #[serde(default)]
    pub distribution: Distribution,
    /// Number of examples; defaults depend on whether the stream drifts.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub length: Option<u64>,
    pub seed: u64,
    #[serde(default)]
    pub geometry: GeometryParams,
}

impl StreamConfig {
    pub fn new(id: impl Into<String>, classes: Vec<ClassSpec>, seed: u64) -> Self {
        Self {
            id: id.into(),
            classes,
            drifts: Vec::new(),
            generator: GeneratorKind::Old,
            distribution: Distribution::Uniform,
            length: None,
            seed,
            geometry: GeometryParams::default(),
        }
    }

    pub fn from_json(s: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(s)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn class_index(&self, name: &str) -> Option<usize> {
        self.classes.iter().position(|c| c.name == name)
    }

    pub fn minority_indices(&self) -> Vec<usize> {
        self.classes
            .iter()
            .enumerate()
            .filter(|(_, c)| c.role == ClassRole::Minority)
            .map(|(i, _)| i)
            .collect()
    }
}

/// A single violated invariant.
#[derive(Clone, Debug, PartialEq, Error)]
pub enum ConfigError {
    #[error("at least two classes are required, got {0}")]
    TooFewClasses(usize),
    #[error("class 0 must be the majority class")]
    MajorityNotFirst,
    #[error("exactly one majority class is required, got {0}")]
    MajorityCount(usize),
    #[error("zero minority classes")]
    NoMinority,
    #[error("class {index} has an empty name")]
    EmptyName { index: usize },
    #[error("duplicate class name `{0}`")]
    DuplicateName(String),
    #[error("class `{class}` ratio {ratio} outside (0, 1]")]
    RatioRange { class: String, ratio: f64 },
    #[error("ratios sum to {0}")]
    RatioSum(f64),
    #[error("class `{class}` type proportions invalid: {reason}")]
    TypeProportions { class: String, reason: String },
    #[error("majority class `{0}` must be all safe")]
    MajorityNotSafe(String),
    #[error("class `{0}` needs at least one sub-cluster")]
    NoSubclusters(String),
    #[error("gaussian distribution is unsupported with the old generator")]
    GaussianWithOld,
    #[error("stream length must be positive")]
    EmptyStream,
    #[error("geometry parameter `{name}` invalid: {value}")]
    Geometry { name: &'static str, value: f64 },
    #[error("drift {index}: drift window exceeds stream ({t_end} > {length})")]
    DriftWindowExceedsStream { index: usize, t_end: u64, length: u64 },
    #[error("drift {index}: empty drift window (t_start {t_start} >= t_end {t_end})")]
    DriftWindowEmpty { index: usize, t_start: u64, t_end: u64 },
    #[error("drift {index}: {kind:?} drift is unsupported")]
    UnsupportedDrift { index: usize, kind: DriftKind },
    #[error("drift {index}: unknown target class `{name}`")]
    UnknownTarget { index: usize, name: String },
    #[error("drift {index}: target `{name}` must be a minority class")]
    TargetNotMinority { index: usize, name: String },
    #[error("drift {index}: {reason}")]
    DriftValue { index: usize, reason: String },
    #[error("drifts {first} and {second} both change {what} of class `{class}`")]
    DriftConflict { first: usize, second: usize, what: &'static str, class: String },
    #[error("final minority ratios sum to {0}, leaving no majority")]
    FinalRatioSum(f64),
}

/// Every violation found in a config.
#[derive(Clone, Debug, PartialEq, Error)]
pub struct ConfigErrors(pub Vec<ConfigError>);

impl fmt::Display for ConfigErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, e) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str("; ")?;
            }
            write!(f, "{e}")?;
        }
        Ok(())
    }
}

impl ConfigErrors {
    pub fn contains(&self, needle: &str) -> bool {
        self.0.iter().any(|e| e.to_string().contains(needle))
    }
}

/// A config whose invariants have been checked. Drift targets are resolved to class indices.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(transparent)]
pub struct ValidatedConfig {
    config: StreamConfig,
    #[serde(skip)]
    targets: Vec<Vec<usize>>,
}

impl Deref for ValidatedConfig {
    type Target = StreamConfig;
    fn deref(&self) -> &StreamConfig {
        &self.config
    }
}

impl ValidatedConfig {
    pub fn config(&self) -> &StreamConfig {
        &self.config
    }

    pub fn into_inner(self) -> StreamConfig {
        self.config
    }

    pub fn length(&self) -> u64 {
        self.config.length.expect("validated config has a length")
    }

    pub fn n_classes(&self) -> usize {
        self.config.classes.len()
    }

    pub fn class_names(&self) -> Vec<String> {
        self.config.classes.iter().map(|c| c.name.clone()).collect()
    }

    /// Class indices targeted by drift `index`.
    pub fn drift_targets(&self, index: usize) -> &[usize] {
        &self.targets[index]
    }
}

/// Checks every invariant of `config` and returns a normalized copy, or all violations.
///
/// Normalization fills in the default length and rescales ratios and type
/// proportions so that they sum to exactly one.
pub fn validate_config(config: &StreamConfig) -> Result<ValidatedConfig, ConfigErrors> {
    let mut errors = Vec::new();
    let mut cfg = config.clone();

    check_classes(&cfg, &mut errors);
    check_geometry(&cfg.geometry, &mut errors);

    if cfg.generator == GeneratorKind::Old && cfg.distribution == Distribution::Gaussian {
        errors.push(ConfigError::GaussianWithOld);
    }

    let length = cfg.length.unwrap_or(if cfg.drifts.is_empty() {
        DEFAULT_STATIONARY_LENGTH
    } else {
        DEFAULT_DRIFTING_LENGTH
    });
    if length == 0 {
        errors.push(ConfigError::EmptyStream);
    }
    cfg.length = Some(length);

    let targets = check_drifts(&cfg, length, &mut errors);

    if !errors.is_empty() {
        return Err(ConfigErrors(errors));
    }

    let sum: f64 = cfg.classes.iter().map(|c| c.ratio).sum();
    if sum != 1.0 {
        for c in &mut cfg.classes {
            c.ratio /= sum;
        }
    }
    for c in &mut cfg.classes {
        c.type_proportions = c.type_proportions.renormalized();
    }

    Ok(ValidatedConfig { config: cfg, targets })
}

fn check_classes(cfg: &StreamConfig, errors: &mut Vec<ConfigError>) {
    let classes = &cfg.classes;
    if classes.len() < 2 {
        errors.push(ConfigError::TooFewClasses(classes.len()));
    }
    let n_major = classes.iter().filter(|c| c.role == ClassRole::Majority).count();
    if n_major != 1 {
        errors.push(ConfigError::MajorityCount(n_major));
    }
    if let Some(first) = classes.first() {
        if first.role != ClassRole::Majority {
            errors.push(ConfigError::MajorityNotFirst);
        }
    }
    if !classes.is_empty() && classes.iter().all(|c| c.role != ClassRole::Minority) {
        errors.push(ConfigError::NoMinority);
    }

    for (i, c) in classes.iter().enumerate() {
        if c.name.is_empty() {
            errors.push(ConfigError::EmptyName { index: i });
        }
        if classes[..i].iter().any(|o| o.name == c.name) {
            errors.push(ConfigError::DuplicateName(c.name.clone()));
        }
        if !(c.ratio > 0.0 && c.ratio <= 1.0) {
            errors.push(ConfigError::RatioRange { class: c.name.clone(), ratio: c.ratio });
        }
        if let Err(reason) = check_types(&c.type_proportions) {
            errors.push(ConfigError::TypeProportions { class: c.name.clone(), reason });
        }
        if c.role == ClassRole::Majority && c.type_proportions.safe != 1.0 {
            errors.push(ConfigError::MajorityNotSafe(c.name.clone()));
        }
        if c.n_subclusters == 0 {
            errors.push(ConfigError::NoSubclusters(c.name.clone()));
        }
    }

    let sum: f64 = classes.iter().map(|c| c.ratio).sum();
    if !classes.is_empty() && (sum - 1.0).abs() > SUM_TOLERANCE {
        errors.push(ConfigError::RatioSum(sum));
    }
}

fn check_types(t: &TypeProportions) -> Result<(), String> {
    let parts = t.as_array();
    if parts.iter().any(|p| !p.is_finite() || *p < 0.0) {
        return Err("entries must be finite and nonnegative".into());
    }
    let s = t.sum();
    if (s - 1.0).abs() > SUM_TOLERANCE {
        return Err(format!("entries sum to {s}"));
    }
    Ok(())
}

fn check_geometry(g: &GeometryParams, errors: &mut Vec<ConfigError>) {
    let positive = [
        ("minority_radius", g.minority_radius),
        ("majority_radius", g.majority_radius),
        ("rare_radius", g.rare_radius),
        ("rare_distance_factor", g.rare_distance_factor),
        ("surround_inner", g.surround_inner),
        ("surround_width", g.surround_width),
    ];
    for (name, value) in positive {
        if !(value.is_finite() && value > 0.0) {
            errors.push(ConfigError::Geometry { name, value });
        }
    }
    if !(g.border_width >= 0.0 && g.border_width < 1.0) {
        errors.push(ConfigError::Geometry { name: "border_width", value: g.border_width });
    }
    if !(0.0..=1.0).contains(&g.surround_share) {
        errors.push(ConfigError::Geometry { name: "surround_share", value: g.surround_share });
    }
    if g.rare_group_max == 0 {
        errors.push(ConfigError::Geometry { name: "rare_group_max", value: 0.0 });
    }
    if g.max_attempts == 0 {
        errors.push(ConfigError::Geometry { name: "max_attempts", value: 0.0 });
    }
}

fn check_drifts(cfg: &StreamConfig, length: u64, errors: &mut Vec<ConfigError>) -> Vec<Vec<usize>> {
    let mut targets = Vec::with_capacity(cfg.drifts.len());
    // (class, parameter group) -> first drift index touching it
    let mut owners: Vec<(usize, &'static str, usize)> = Vec::new();

    for (index, d) in cfg.drifts.iter().enumerate() {
        if d.t_start >= d.t_end {
            errors.push(ConfigError::DriftWindowEmpty { index, t_start: d.t_start, t_end: d.t_end });
        } else if d.t_end > length {
            errors.push(ConfigError::DriftWindowExceedsStream { index, t_end: d.t_end, length });
        }
        if matches!(d.kind, DriftKind::Merge | DriftKind::ClassSwap) {
            errors.push(ConfigError::UnsupportedDrift { index, kind: d.kind });
            targets.push(Vec::new());
            continue;
        }

        let resolved: Vec<usize> = match &d.target {
            DriftTarget::AllMinority => cfg.minority_indices(),
            DriftTarget::Class(name) => match cfg.class_index(name) {
                Some(i) if cfg.classes[i].role == ClassRole::Minority => vec![i],
                Some(_) => {
                    errors.push(ConfigError::TargetNotMinority { index, name: name.clone() });
                    Vec::new()
                }
                None => {
                    errors.push(ConfigError::UnknownTarget { index, name: name.clone() });
                    Vec::new()
                }
            },
        };

        let group = if d.kind.affects_geometry() { "geometry" } else if d.kind == DriftKind::ImbalanceRatio { "ratio" } else { "type proportions" };
        for &c in &resolved {
            if let Some(&(_, _, first)) = owners.iter().find(|(oc, og, _)| *oc == c && *og == group) {
                errors.push(ConfigError::DriftConflict {
                    first,
                    second: index,
                    what: group,
                    class: cfg.classes[c].name.clone(),
                });
            } else {
                owners.push((c, group, index));
            }
        }

        check_drift_values(cfg, index, d, &resolved, errors);
        targets.push(resolved);
    }

    // Final ratios must leave room for the majority class.
    let mut final_minority = 0.0;
    for (i, c) in cfg.classes.iter().enumerate() {
        if c.role != ClassRole::Minority {
            continue;
        }
        let drifted = cfg
            .drifts
            .iter()
            .zip(&targets)
            .find(|(d, t)| d.kind == DriftKind::ImbalanceRatio && t.contains(&i))
            .and_then(|(d, _)| d.to_number());
        final_minority += drifted.unwrap_or(c.ratio);
    }
    if cfg.drifts.iter().any(|d| d.kind == DriftKind::ImbalanceRatio) && final_minority >= 1.0 {
        errors.push(ConfigError::FinalRatioSum(final_minority));
    }

    targets
}

fn check_drift_values(
    cfg: &StreamConfig,
    index: usize,
    d: &DriftSpec,
    targets: &[usize],
    errors: &mut Vec<ConfigError>,
) {
    let mut bad = |reason: String| errors.push(ConfigError::DriftValue { index, reason });
    match d.kind {
        DriftKind::ImbalanceRatio => {
            match d.to_number() {
                Some(v) if v > 0.0 && v < 1.0 => {}
                Some(v) => bad(format!("final ratio {v} outside (0, 1)")),
                None => bad("imbalance_ratio drift needs a numeric to_value".into()),
            }
            match &d.from_value {
                None => {}
                Some(DriftValue::Number(v)) => {
                    for &c in targets {
                        if (cfg.classes[c].ratio - v).abs() > SUM_TOLERANCE {
                            bad(format!("from_value {v} differs from class `{}` ratio {}", cfg.classes[c].name, cfg.classes[c].ratio));
                        }
                    }
                }
                Some(_) => bad("imbalance_ratio from_value must be a number".into()),
            }
        }
        DriftKind::TypeProportion => {
            match d.to_types() {
                Some(t) => {
                    if let Err(reason) = check_types(&t) {
                        bad(format!("to_value {reason}"));
                    }
                }
                None => bad("type_proportion drift needs a type mix to_value".into()),
            }
            match &d.from_value {
                None => {}
                Some(DriftValue::Types(t)) => {
                    for &c in targets {
                        if cfg.classes[c].type_proportions != *t {
                            bad(format!("from_value differs from class `{}` type proportions", cfg.classes[c].name));
                        }
                    }
                }
                Some(_) => bad("type_proportion from_value must be a type mix".into()),
            }
        }
        DriftKind::Split => {
            match d.to_number() {
                Some(v) if v >= 2.0 && v.fract() == 0.0 => {}
                Some(v) => bad(format!("split needs an integer sub-cluster count >= 2, got {v}")),
                None => bad("split drift needs a numeric to_value".into()),
            }
            for &c in targets {
                if cfg.classes[c].n_subclusters != 1 {
                    bad(format!("split starts from a single cluster but class `{}` has {}", cfg.classes[c].name, cfg.classes[c].n_subclusters));
                }
            }
            if let Some(v) = &d.from_value {
                if *v != DriftValue::Number(1.0) {
                    bad("split from_value must be 1".into());
                }
            }
        }
        DriftKind::Move => {
            if d.from_value.is_some() || d.to_value.is_some() {
                bad("move drift takes no values".into());
            }
        }
        DriftKind::Merge | DriftKind::ClassSwap => {}
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn three_class(maj: f64, a: f64, b: f64) -> StreamConfig {
        StreamConfig::new(
            "t",
            vec![ClassSpec::majority("c0", maj), ClassSpec::minority("c1", a), ClassSpec::minority("c2", b)],
            7,
        )
    }

    #[test]
    fn paper_imbalance_is_valid() {
        let v = validate_config(&three_class(0.8, 0.1, 0.1)).unwrap();
        assert_eq!(v.length(), DEFAULT_STATIONARY_LENGTH);
        assert_eq!(v.n_classes(), 3);
    }

    #[test]
    fn ratio_sum_is_reported() {
        let cfg = StreamConfig::new(
            "t",
            vec![ClassSpec::majority("a", 0.5), ClassSpec::minority("b", 0.6)],
            1,
        );
        let err = validate_config(&cfg).unwrap_err();
        assert!(err.contains("ratios sum to 1.1"), "{err}");
    }

    #[test]
    fn drift_window_outside_stream() {
        let mut cfg = three_class(0.8, 0.1, 0.1);
        cfg.length = Some(250_000);
        cfg.drifts.push(DriftSpec::imbalance_ratio(DriftTarget::AllMinority, 0.01).window(190_000, 260_000));
        let err = validate_config(&cfg).unwrap_err();
        assert!(err.contains("drift window exceeds stream"), "{err}");
    }

    #[test]
    fn all_violations_are_collected() {
        let mut cfg = StreamConfig::new(
            "t",
            vec![ClassSpec::majority("a", 0.5), ClassSpec::majority("b", 0.6)],
            1,
        );
        cfg.distribution = Distribution::Gaussian;
        cfg.length = Some(100);
        cfg.drifts.push(DriftSpec::moving(DriftTarget::Class("zzz".into())));
        let err = validate_config(&cfg).unwrap_err();
        assert!(err.contains("ratios sum to"));
        assert!(err.contains("zero minority classes"));
        assert!(err.contains("gaussian"));
        assert!(err.contains("drift window exceeds stream"));
        assert!(err.contains("unknown target"));
        assert!(err.0.len() >= 5, "{err}");
    }

    #[test]
    fn reserved_drifts_are_unsupported() {
        for kind in [DriftKind::Merge, DriftKind::ClassSwap] {
            let mut cfg = three_class(0.8, 0.1, 0.1);
            cfg.drifts.push(DriftSpec::new(kind, DriftTarget::AllMinority, None));
            let err = validate_config(&cfg).unwrap_err();
            assert!(err.contains("unsupported"), "{err}");
        }
    }

    #[test]
    fn drifting_stream_gets_longer_default() {
        let mut cfg = three_class(0.4, 0.3, 0.3);
        cfg.drifts.push(DriftSpec::split(DriftTarget::AllMinority, 5));
        assert_eq!(validate_config(&cfg).unwrap().length(), DEFAULT_DRIFTING_LENGTH);
    }

    #[test]
    fn majority_must_stay_safe() {
        let mut cfg = three_class(0.8, 0.1, 0.1);
        cfg.classes[0].type_proportions = TypeProportions::borderline(0.2);
        assert!(validate_config(&cfg).unwrap_err().contains("must be all safe"));
    }

    #[test]
    fn conflicting_drifts_rejected() {
        let mut cfg = three_class(0.4, 0.3, 0.3);
        cfg.drifts.push(DriftSpec::split(DriftTarget::AllMinority, 5));
        cfg.drifts.push(DriftSpec::moving(DriftTarget::Class("c1".into())));
        assert!(validate_config(&cfg).unwrap_err().contains("both change geometry"));
    }

    #[test]
    fn combined_drifts_share_a_window() {
        let mut cfg = three_class(0.4, 0.3, 0.3);
        cfg.drifts.push(DriftSpec::split(DriftTarget::AllMinority, 5));
        cfg.drifts.push(DriftSpec::imbalance_ratio(DriftTarget::AllMinority, 0.01));
        cfg.drifts.push(DriftSpec::type_proportion(DriftTarget::AllMinority, TypeProportions::rare(0.6)));
        let v = validate_config(&cfg).unwrap();
        assert_eq!(v.drift_targets(0), &[1, 2]);
    }

    #[test]
    fn gaussian_new_generator_allowed() {
        let mut cfg = three_class(0.8, 0.1, 0.1);
        cfg.generator = GeneratorKind::New;
        cfg.distribution = Distribution::Gaussian;
        assert!(validate_config(&cfg).is_ok());
    }

    #[test]
    fn target_serializes_as_string() {
        let d = DriftSpec::moving(DriftTarget::AllMinority);
        let json = serde_json::to_string(&d).unwrap();
        assert!(json.contains("\"target\":\"all_minority\""), "{json}");
        let back: DriftSpec = serde_json::from_str(&json).unwrap();
        assert_eq!(back, d);
    }

    #[test]
    fn lerp_hits_endpoints_exactly() {
        let (a, b) = (0.3, 0.01);
        assert_eq!(lerp(a, b, 0.0), a);
        assert_eq!(lerp(a, b, 1.0), b);
        assert!((lerp(a, b, 0.5) - 0.155).abs() < 1e-15);
    }
}
