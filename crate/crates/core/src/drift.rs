//! Time-varying stream parameters.
//!
//! Every drift is incremental: between `t_start` and `t_end` its parameters
//! are interpolated linearly from the source to the target concept. A
//! [`DriftPlan`] fixes all random geometry (split and move targets) once, so
//! the state at any `t` is a pure function of the config.

use serde::{Deserialize, Serialize};

use crate::geometry::Ellipsoid;
use crate::layout::{layout_rng, place_around, place_base, place_in_cube, subcluster_radius, ClassLayout, ClassRegion, LayoutError, SubCluster};
use crate::model::{lerp, DriftKind, DriftSpec, GeneratorKind, Point, TypeProportions, ValidatedConfig, N_ATTRIBUTES};

/// Fraction of the drift window elapsed at example `t`.
pub fn progress(spec: &DriftSpec, t: u64) -> f64 {
    if t <= spec.t_start {
        0.0
    } else if t >= spec.t_end {
        1.0
    } else {
        (t - spec.t_start) as f64 / (spec.t_end - spec.t_start) as f64
    }
}

/// Generator parameters in force at one example index.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EffectiveState {
    pub t: u64,
    pub ratios: Vec<f64>,
    pub type_proportions: Vec<TypeProportions>,
    pub layout: ClassLayout,
}

/// A sub-cluster moving along a straight line while its weight changes.
#[derive(Clone, Debug, PartialEq)]
struct Track {
    class: usize,
    from: Point,
    to: Point,
    radii: Point,
    weight_from: f64,
    weight_to: f64,
    /// Geometry drift driving this track.
    drift: Option<usize>,
    /// Children of one split share a sibling id; their paths start at the same point.
    siblings: Option<usize>,
}

impl Track {
    fn stationary(class: usize, s: &SubCluster) -> Self {
        Track {
            class,
            from: s.ellipsoid.center,
            to: s.ellipsoid.center,
            radii: s.ellipsoid.radii,
            weight_from: s.weight,
            weight_to: s.weight,
            drift: None,
            siblings: None,
        }
    }

    fn at(&self, p: f64) -> SubCluster {
        let mut center = [0.0; N_ATTRIBUTES];
        for d in 0..N_ATTRIBUTES {
            center[d] = lerp(self.from[d], self.to[d], p);
        }
        SubCluster {
            ellipsoid: Ellipsoid::new(center, self.radii),
            weight: lerp(self.weight_from, self.weight_to, p),
        }
    }
}

/// Fresh attempts at placing one drifting class before giving up.
const PLACEMENT_RESTARTS: usize = 20;

/// Precomputed geometry and parameter schedule of a validated config.
#[derive(Clone, Debug)]
pub struct DriftPlan {
    config: ValidatedConfig,
    base: ClassLayout,
    tracks: Vec<Track>,
    has_ratio_drift: bool,
}

impl DriftPlan {
    pub fn new(config: &ValidatedConfig) -> Result<Self, LayoutError> {
        let mut rng = layout_rng(config);
        let base = place_base(config, &mut rng)?;
        let g = &config.geometry;

        // Which geometry drift (if any) owns each class.
        let mut owner: Vec<Option<usize>> = vec![None; config.n_classes()];
        for (i, d) in config.drifts.iter().enumerate() {
            if matches!(d.kind, DriftKind::Split | DriftKind::Move) {
                for &c in config.drift_targets(i) {
                    owner[c] = Some(i);
                }
            }
        }

        let mut tracks: Vec<Track> = Vec::new();
        for (c, region) in base.layout.classes.iter().enumerate() {
            if owner[c].is_none() {
                tracks.extend(region.subclusters.iter().map(|s| Track::stationary(c, s)));
            }
        }

        let check_times = check_times(config);
        let cross_class = config.generator == GeneratorKind::Old;
        let mut sibling_id = 0;

        for (c, region) in base.layout.classes.iter().enumerate() {
            let Some(di) = owner[c] else { continue };
            let drift = &config.drifts[di];
            let name = &config.classes[c].name;
            // greedy placement can box in its last targets; start the class over when it does
            let mark = tracks.len();
            let mut restarts = 0;
            loop {
                let placed = (|| -> Result<(), LayoutError> {
                    match drift.kind {
                        DriftKind::Split => {
                            let n = drift.to_number().expect("validated split count") as usize;
                            let parent = &region.subclusters[0];
                            let origin = parent.ellipsoid.center;
                            let r = subcluster_radius(parent.ellipsoid.max_radius(), n);
                            let mut parent_track = Track::stationary(c, parent);
                            parent_track.weight_to = 0.0;
                            parent_track.drift = Some(di);
                            tracks.push(parent_track);
                            for k in 0..n {
                                let accepted = place_around(origin, r, &mut rng, g.max_attempts, |e| {
                                    let cand = Track {
                                        class: c,
                                        from: origin,
                                        to: e.center,
                                        radii: e.radii,
                                        weight_from: 0.0,
                                        weight_to: 1.0 / n as f64,
                                        drift: Some(di),
                                        siblings: Some(sibling_id),
                                    };
                                    path_clear(config, &cand, &tracks, &check_times, cross_class)
                                })
                                .ok_or_else(|| LayoutError::Placement {
                                    what: format!("split target {k} of class `{name}`"),
                                    attempts: g.max_attempts,
                                })?;
                                tracks.push(Track {
                                    class: c,
                                    from: origin,
                                    to: accepted.center,
                                    radii: accepted.radii,
                                    weight_from: 0.0,
                                    weight_to: 1.0 / n as f64,
                                    drift: Some(di),
                                    siblings: Some(sibling_id),
                                });
                            }
                            sibling_id += 1;
                        }
                        DriftKind::Move => {
                            let anchor = base.anchors[c];
                            for (k, s) in region.subclusters.iter().enumerate() {
                                let r = s.ellipsoid.max_radius();
                                let make = |e: &Ellipsoid| Track {
                                    class: c,
                                    from: s.ellipsoid.center,
                                    to: e.center,
                                    radii: s.ellipsoid.radii,
                                    weight_from: s.weight,
                                    weight_to: s.weight,
                                    drift: Some(di),
                                    siblings: None,
                                };
                                let ok = |e: &Ellipsoid| path_clear(config, &make(e), &tracks, &check_times, cross_class);
                                let target = match config.generator {
                                    GeneratorKind::Old => place_in_cube(r, &mut rng, g.max_attempts, ok),
                                    GeneratorKind::New => place_around(anchor, r, &mut rng, g.max_attempts, ok),
                                }
                                .ok_or_else(|| LayoutError::Placement {
                                    what: format!("move target {k} of class `{name}`"),
                                    attempts: g.max_attempts,
                                })?;
                                tracks.push(make(&target));
                            }
                        }
                        _ => unreachable!("only geometry drifts own classes"),
                    }
                    Ok(())
                })();
                match placed {
                    Ok(()) => break,
                    Err(e) if restarts + 1 >= PLACEMENT_RESTARTS => return Err(e),
                    Err(_) => {
                        tracks.truncate(mark);
                        restarts += 1;
                    }
                }
            }
        }

        tracks.sort_by_key(|t| t.class);
        let has_ratio_drift = config.drifts.iter().any(|d| d.kind == DriftKind::ImbalanceRatio);
        Ok(Self { config: config.clone(), base: base.layout, tracks, has_ratio_drift })
    }

    pub fn config(&self) -> &ValidatedConfig {
        &self.config
    }

    /// The stationary layout before any drift starts.
    pub fn base_layout(&self) -> &ClassLayout {
        &self.base
    }

    /// Identifies stretches of the stream where the state cannot change.
    ///
    /// `None` while any drift window is open; otherwise the number of completed
    /// drifts, which is constant between windows.
    pub fn segment(&self, t: u64) -> Option<usize> {
        let drifts = &self.config.drifts;
        if drifts.iter().any(|d| t > d.t_start && t < d.t_end) {
            None
        } else {
            Some(drifts.iter().filter(|d| t >= d.t_end).count())
        }
    }

    pub fn state_at(&self, t: u64) -> EffectiveState {
        let cfg = &self.config;
        let drifts = &cfg.drifts;
        let n = cfg.n_classes();

        let mut ratios: Vec<f64> = cfg.classes.iter().map(|c| c.ratio).collect();
        let mut types: Vec<TypeProportions> = cfg.classes.iter().map(|c| c.type_proportions).collect();

        for (i, d) in drifts.iter().enumerate() {
            let p = progress(d, t);
            match d.kind {
                DriftKind::ImbalanceRatio => {
                    let to = d.to_number().expect("validated ratio");
                    for &c in cfg.drift_targets(i) {
                        ratios[c] = lerp(cfg.classes[c].ratio, to, p);
                    }
                }
                DriftKind::TypeProportion => {
                    let to = d.to_types().expect("validated types");
                    for &c in cfg.drift_targets(i) {
                        types[c] = cfg.classes[c].type_proportions.lerp(&to, p).renormalized();
                    }
                }
                _ => {}
            }
        }

        if self.has_ratio_drift {
            let major = self.base.majority_class;
            let minority: f64 = (0..n).filter(|&c| c != major).map(|c| ratios[c]).sum();
            ratios[major] = 1.0 - minority;
            let s: f64 = ratios.iter().sum();
            if (s - 1.0).abs() > 1e-12 {
                for r in &mut ratios {
                    *r /= s;
                }
            }
        }

        let mut classes = vec![ClassRegion::default(); n];
        for track in &self.tracks {
            let p = track.drift.map_or(0.0, |di| progress(&drifts[di], t));
            let s = track.at(p);
            if s.weight > 0.0 {
                classes[track.class].subclusters.push(s);
            }
        }

        EffectiveState {
            t,
            ratios,
            type_proportions: types,
            layout: ClassLayout { classes, ..self.base.clone() },
        }
    }
}

/// Effective parameters of `config` at example `t`.
///
/// Builds a fresh [`DriftPlan`]; callers evaluating many indices should keep the plan.
pub fn effective_state(config: &ValidatedConfig, t: u64) -> Result<EffectiveState, LayoutError> {
    Ok(DriftPlan::new(config)?.state_at(t))
}

/// Example indices at which trajectories are checked: each geometry drift's window at 1% steps.
fn check_times(config: &ValidatedConfig) -> Vec<u64> {
    let mut times = vec![1];
    for d in &config.drifts {
        if matches!(d.kind, DriftKind::Split | DriftKind::Move) {
            let span = (d.t_end - d.t_start) as f64;
            times.extend((0..=100).map(|k| d.t_start + (span * k as f64 / 100.0).round() as u64));
        }
    }
    times.sort_unstable();
    times.dedup();
    times
}

fn position(config: &ValidatedConfig, track: &Track, t: u64) -> Option<Ellipsoid> {
    let p = track.drift.map_or(0.0, |di| progress(&config.drifts[di], t));
    let s = track.at(p);
    (s.weight > 0.0).then_some(s.ellipsoid)
}

/// Whether `cand` stays clear of every accepted track at every check time.
///
/// Split siblings start from one point, so they are only required to be
/// disjoint at their final positions; a split parent overlaps its children by
/// construction. Across classes the check only applies to the old generator.
fn path_clear(config: &ValidatedConfig, cand: &Track, accepted: &[Track], times: &[u64], cross_class: bool) -> bool {
    for other in accepted {
        let same_class = other.class == cand.class;
        if !same_class && !cross_class {
            continue;
        }
        if same_class && cand.siblings.is_some() {
            if other.siblings == cand.siblings
                && !Ellipsoid::new(cand.to, cand.radii).clearly_disjoint(&Ellipsoid::new(other.to, other.radii))
            {
                return false;
            }
            // the split parent fades out as the children move away
            continue;
        }
        for &t in times {
            if let (Some(a), Some(b)) = (position(config, cand, t), position(config, other, t)) {
                if !a.clearly_disjoint(&b) {
                    return false;
                }
            }
        }
    }
    true
}
