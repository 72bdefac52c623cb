//! Geometric placement of class regions.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{unit_direction, Ellipsoid};
use crate::model::{ClassRole, GeneratorKind, Point, ValidatedConfig, N_ATTRIBUTES};

/// Stream id of the layout RNG; example sampling uses a different stream.
pub(crate) const LAYOUT_STREAM: u64 = 0x6c61796f7574;

#[derive(Clone, Debug, PartialEq, Error)]
pub enum LayoutError {
    #[error("could not place {what} after {attempts} attempts")]
    Placement { what: String, attempts: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubCluster {
    pub ellipsoid: Ellipsoid,
    /// Sampling weight within the class.
    pub weight: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ClassRegion {
    pub subclusters: Vec<SubCluster>,
}

impl ClassRegion {
    /// Picks a sub-cluster with probability proportional to its weight; `u` is uniform in [0, 1).
    pub fn pick(&self, u: f64) -> &SubCluster {
        let total: f64 = self.subclusters.iter().map(|s| s.weight).sum();
        let mut acc = 0.0;
        let target = u * total;
        for s in &self.subclusters {
            acc += s.weight;
            if target < acc {
                return s;
            }
        }
        self.subclusters.last().expect("class region has sub-clusters")
    }

    pub fn max_radius(&self) -> f64 {
        self.subclusters.iter().map(|s| s.ellipsoid.max_radius()).fold(0.0, f64::max)
    }
}

/// Class regions at one point in time.
///
/// Minority classes own one or more sub-cluster ellipsoids. With the old
/// generator the majority class has no ellipsoid and fills the rest of the
/// unit hypercube; with the new generator it is the `majority` ellipsoid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassLayout {
    pub generator: GeneratorKind,
    /// Borderline band half-width, as a fraction of the radius.
    pub border_width: f64,
    pub classes: Vec<ClassRegion>,
    pub majority_class: usize,
    pub majority: Option<Ellipsoid>,
}

impl ClassLayout {
    /// The safe core of a sub-cluster: its ellipsoid shrunk by `1 - β`.
    pub fn core(&self, s: &SubCluster) -> Ellipsoid {
        s.ellipsoid.scaled(1.0 - self.border_width)
    }

    pub fn in_core_of(&self, class: usize, p: &Point) -> bool {
        self.classes[class]
            .subclusters
            .iter()
            .any(|s| s.ellipsoid.scaled_distance_sq(p) <= (1.0 - self.border_width).powi(2))
    }

    /// Whether `p` lies in the core of any class other than `class`.
    pub fn in_foreign_core(&self, class: usize, p: &Point) -> bool {
        (0..self.classes.len()).any(|c| c != class && self.in_core_of(c, p))
    }

    pub fn in_any_core(&self, p: &Point) -> bool {
        (0..self.classes.len()).any(|c| self.in_core_of(c, p))
    }

    pub fn minority_classes(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.classes.len()).filter(move |c| *c != self.majority_class)
    }

    /// All minority sub-cluster ellipsoids, tagged with their class.
    pub fn minority_ellipsoids(&self) -> Vec<(usize, &Ellipsoid)> {
        self.minority_classes()
            .flat_map(|c| self.classes[c].subclusters.iter().map(move |s| (c, &s.ellipsoid)))
            .collect()
    }
}

/// Radius of one of `n` sub-clusters holding the volume of a single cluster of radius `base`.
pub fn subcluster_radius(base: f64, n: usize) -> f64 {
    base * (1.0 / n as f64).powf(1.0 / N_ATTRIBUTES as f64)
}

/// The stationary layout a config starts from. A pure function of the config and its seed.
pub fn build_layout(config: &ValidatedConfig) -> Result<ClassLayout, LayoutError> {
    let mut rng = layout_rng(config);
    let base = place_base(config, &mut rng)?;
    Ok(base.layout)
}

pub(crate) fn layout_rng(config: &ValidatedConfig) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(LAYOUT_STREAM);
    rng
}

pub(crate) struct BaseLayout {
    pub layout: ClassLayout,
    /// Per class, the point sub-clusters of that class are arranged around (new generator).
    pub anchors: Vec<Point>,
}

pub(crate) fn place_base(config: &ValidatedConfig, rng: &mut ChaCha8Rng) -> Result<BaseLayout, LayoutError> {
    let g = &config.geometry;
    let n_classes = config.n_classes();
    let majority_class = config
        .classes
        .iter()
        .position(|c| c.role == ClassRole::Majority)
        .expect("validated config has a majority class");
    let mut classes = vec![ClassRegion::default(); n_classes];
    let mut anchors = vec![[0.5; N_ATTRIBUTES]; n_classes];
    let mut majority = None;

    match config.generator {
        GeneratorKind::Old => {
            let mut placed: Vec<Ellipsoid> = Vec::new();
            for (c, spec) in config.classes.iter().enumerate() {
                if c == majority_class {
                    continue;
                }
                let n = spec.n_subclusters;
                let r = subcluster_radius(g.minority_radius, n);
                for k in 0..n {
                    let e = place_in_cube(r, rng, g.max_attempts, |e| placed.iter().all(|o| o.clearly_disjoint(e)))
                        .ok_or_else(|| LayoutError::Placement {
                            what: format!("sub-cluster {k} of class `{}`", spec.name),
                            attempts: g.max_attempts,
                        })?;
                    placed.push(e.clone());
                    classes[c].subclusters.push(SubCluster { ellipsoid: e, weight: 1.0 / n as f64 });
                }
                anchors[c] = classes[c].subclusters[0].ellipsoid.center;
            }
        }
        GeneratorKind::New => {
            let center = [0.5; N_ATTRIBUTES];
            let big = g.majority_radius;
            majority = Some(Ellipsoid::sphere(center, big));
            let minority: Vec<usize> = config.minority_indices();
            let m = minority.len();
            // Minority anchors sit on the majority surface along an arc, adjacent
            // anchors 1.6 minority radii apart: cores disjoint, bands overlapping.
            let u = unit_direction(rng);
            let v = orthogonal_direction(&u, rng);
            let step = 2.0 * (0.8 * g.minority_radius / big).min(1.0).asin();
            for (j, &c) in minority.iter().enumerate() {
                let angle = (j as f64 - (m as f64 - 1.0) / 2.0) * step;
                let mut a = center;
                for d in 0..N_ATTRIBUTES {
                    a[d] += big * (angle.cos() * u[d] + angle.sin() * v[d]);
                }
                anchors[c] = a;
                let n = config.classes[c].n_subclusters;
                if n == 1 {
                    classes[c].subclusters.push(SubCluster {
                        ellipsoid: Ellipsoid::sphere(a, g.minority_radius),
                        weight: 1.0,
                    });
                } else {
                    let r = subcluster_radius(g.minority_radius, n);
                    let mut own: Vec<Ellipsoid> = Vec::new();
                    for k in 0..n {
                        let e = place_around(a, r, rng, g.max_attempts, |e| own.iter().all(|o| o.clearly_disjoint(e)))
                            .ok_or_else(|| LayoutError::Placement {
                                what: format!("sub-cluster {k} of class `{}`", config.classes[c].name),
                                attempts: g.max_attempts,
                            })?;
                        own.push(e.clone());
                        classes[c].subclusters.push(SubCluster { ellipsoid: e, weight: 1.0 / n as f64 });
                    }
                }
            }
        }
    }

    Ok(BaseLayout {
        layout: ClassLayout {
            generator: config.generator,
            border_width: g.border_width,
            classes,
            majority_class,
            majority,
        },
        anchors,
    })
}

fn orthogonal_direction(u: &Point, rng: &mut ChaCha8Rng) -> Point {
    loop {
        let mut v = unit_direction(rng);
        let dot: f64 = (0..N_ATTRIBUTES).map(|d| u[d] * v[d]).sum();
        for d in 0..N_ATTRIBUTES {
            v[d] -= dot * u[d];
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-6 {
            for x in &mut v {
                *x /= norm;
            }
            return v;
        }
    }
}

/// Random sphere of radius `r` whose center lies in `[r, 1 - r]^5`, accepted by `ok`.
pub(crate) fn place_in_cube(
    r: f64,
    rng: &mut ChaCha8Rng,
    attempts: usize,
    ok: impl Fn(&Ellipsoid) -> bool,
) -> Option<Ellipsoid> {
    let lo = r.min(0.5);
    let hi = (1.0 - r).max(0.5);
    for _ in 0..attempts {
        let mut c = [0.0; N_ATTRIBUTES];
        for v in &mut c {
            *v = lo + rng.random::<f64>() * (hi - lo);
        }
        let e = Ellipsoid::sphere(c, r);
        if ok(&e) {
            return Some(e);
        }
    }
    None
}

/// Random sphere of radius `r` whose center is 2–4 radii from `origin` and inside `[r, 1 - r]^5`.
pub(crate) fn place_around(
    origin: Point,
    r: f64,
    rng: &mut ChaCha8Rng,
    attempts: usize,
    ok: impl Fn(&Ellipsoid) -> bool,
) -> Option<Ellipsoid> {
    for _ in 0..attempts {
        let dir = unit_direction(rng);
        let dist = r * (2.0 + 2.0 * rng.random::<f64>());
        let mut c = origin;
        for d in 0..N_ATTRIBUTES {
            c[d] += dir[d] * dist;
        }
        if c.iter().any(|v| *v < r.min(0.5) || *v > (1.0 - r).max(0.5)) {
            continue;
        }
        let e = Ellipsoid::sphere(c, r);
        if ok(&e) {
            return Some(e);
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::euclidean;
    use crate::model::{validate_config, ClassSpec, StreamConfig};

    fn config(generator: GeneratorKind, n_minority: usize, subclusters: usize) -> ValidatedConfig {
        let ratio = 0.1;
        let mut classes = vec![ClassSpec::majority("c0", 1.0 - ratio * n_minority as f64)];
        for i in 0..n_minority {
            classes.push(ClassSpec::minority(format!("c{}", i + 1), ratio).with_subclusters(subclusters));
        }
        let mut cfg = StreamConfig::new("layout", classes, 11);
        cfg.generator = generator;
        validate_config(&cfg).unwrap()
    }

    /// Exact test for spheres: disjoint iff center distance exceeds the radius sum.
    fn spheres_intersect(a: &Ellipsoid, b: &Ellipsoid) -> bool {
        euclidean(&a.center, &b.center) <= a.radii[0] + b.radii[0]
    }

    #[test]
    fn old_two_minority_classes_are_disjoint_and_inside() {
        let layout = build_layout(&config(GeneratorKind::Old, 2, 1)).unwrap();
        let ells = layout.minority_ellipsoids();
        assert_eq!(ells.len(), 2);
        assert!(layout.majority.is_none());
        assert!(!spheres_intersect(ells[0].1, ells[1].1));
        for (_, e) in ells {
            for d in 0..N_ATTRIBUTES {
                assert!(e.center[d] - e.radii[d] >= 0.0 && e.center[d] + e.radii[d] <= 1.0);
            }
        }
    }

    #[test]
    fn seven_subclusters_each_are_pairwise_disjoint() {
        let layout = build_layout(&config(GeneratorKind::Old, 2, 7)).unwrap();
        let ells = layout.minority_ellipsoids();
        assert_eq!(ells.len(), 14);
        for i in 0..ells.len() {
            for j in i + 1..ells.len() {
                assert!(!spheres_intersect(ells[i].1, ells[j].1), "{i} {j}");
            }
        }
        for c in 1..3 {
            let w: f64 = layout.classes[c].subclusters.iter().map(|s| s.weight).sum();
            assert!((w - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn split_radius_preserves_volume() {
        let r = subcluster_radius(0.15, 5);
        assert!((5.0 * r.powi(5) - 0.15f64.powi(5)).abs() < 1e-15);
    }

    #[test]
    fn new_generator_minorities_overlap_majority_and_each_other() {
        let layout = build_layout(&config(GeneratorKind::New, 2, 1)).unwrap();
        let major = layout.majority.clone().unwrap();
        let ells = layout.minority_ellipsoids();
        for (_, e) in &ells {
            assert!(spheres_intersect(&major, e));
            // not swallowed either
            assert!(euclidean(&major.center, &e.center) + e.radii[0] > major.radii[0]);
        }
        assert!(spheres_intersect(ells[0].1, ells[1].1));
        // cores stay apart so safe examples remain safe
        let core = |e: &Ellipsoid| e.scaled(1.0 - layout.border_width);
        assert!(!spheres_intersect(&core(ells[0].1), &core(ells[1].1)));
    }

    #[test]
    fn layout_is_a_pure_function_of_config() {
        let cfg = config(GeneratorKind::Old, 3, 3);
        assert_eq!(build_layout(&cfg).unwrap(), build_layout(&cfg).unwrap());
    }

    #[test]
    fn impossible_packing_reports_budget() {
        let mut cfg = config(GeneratorKind::Old, 2, 1).into_inner();
        cfg.geometry.minority_radius = 0.45;
        cfg.geometry.max_attempts = 50;
        let err = build_layout(&validate_config(&cfg).unwrap()).unwrap_err();
        assert!(err.to_string().contains("after 50 attempts"), "{err}");
    }

    #[test]
    fn pick_respects_weights() {
        let region = ClassRegion {
            subclusters: vec![
                SubCluster { ellipsoid: Ellipsoid::sphere([0.1; 5], 0.1), weight: 0.25 },
                SubCluster { ellipsoid: Ellipsoid::sphere([0.9; 5], 0.1), weight: 0.75 },
            ],
        };
        assert_eq!(region.pick(0.2).ellipsoid.center[0], 0.1);
        assert_eq!(region.pick(0.3).ellipsoid.center[0], 0.9);
        assert_eq!(region.pick(0.999).ellipsoid.center[0], 0.9);
    }
}
