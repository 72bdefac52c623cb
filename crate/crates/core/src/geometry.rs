//! Axis-aligned ellipsoids and the point samplers used by the generators.

use rand::Rng;
use rand_distr::{Distribution as _, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::model::{Distribution, Point, N_ATTRIBUTES};

/// Gaussian samples are redrawn at most this many times before falling back to the center.
pub const GAUSSIAN_MAX_ATTEMPTS: usize = 1000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ellipsoid {
    pub center: Point,
    pub radii: Point,
}

impl Ellipsoid {
    pub fn new(center: Point, radii: Point) -> Self {
        debug_assert!(radii.iter().all(|r| *r > 0.0), "radii must be positive");
        Self { center, radii }
    }

    pub fn sphere(center: Point, radius: f64) -> Self {
        Self::new(center, [radius; N_ATTRIBUTES])
    }

    /// `Σ ((p_d - c_d) / r_d)²`; the point is inside iff this is at most 1.
    pub fn scaled_distance_sq(&self, p: &Point) -> f64 {
        let mut s = 0.0;
        for d in 0..N_ATTRIBUTES {
            let z = (p[d] - self.center[d]) / self.radii[d];
            s += z * z;
        }
        s
    }

    pub fn contains(&self, p: &Point) -> bool {
        self.scaled_distance_sq(p) <= 1.0
    }

    /// Same center, radii multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        let mut radii = self.radii;
        for r in &mut radii {
            *r *= factor;
        }
        Self { center: self.center, radii }
    }

    pub fn max_radius(&self) -> f64 {
        self.radii.iter().copied().fold(0.0, f64::max)
    }

    /// Lower bound of the Euclidean distance from `p` to this ellipsoid
    /// (zero when `p` is within the bounding sphere).
    pub fn surface_distance_lower_bound(&self, p: &Point) -> f64 {
        (euclidean(&self.center, p) - self.max_radius()).max(0.0)
    }

    /// Conservative disjointness test via bounding spheres.
    pub fn clearly_disjoint(&self, other: &Ellipsoid) -> bool {
        euclidean(&self.center, &other.center) > self.max_radius() + other.max_radius()
    }
}

pub fn euclidean(a: &Point, b: &Point) -> f64 {
    euclidean_sq(a, b).sqrt()
}

pub fn euclidean_sq(a: &Point, b: &Point) -> f64 {
    let mut s = 0.0;
    for d in 0..N_ATTRIBUTES {
        let diff = a[d] - b[d];
        s += diff * diff;
    }
    s
}

pub fn in_unit_cube(p: &Point) -> bool {
    p.iter().all(|v| (0.0..=1.0).contains(v))
}

/// Uniformly distributed unit vector.
pub fn unit_direction<R: Rng + ?Sized>(rng: &mut R) -> Point {
    loop {
        let mut v = [0.0; N_ATTRIBUTES];
        let mut norm = 0.0f64;
        for x in &mut v {
            *x = StandardNormal.sample(rng);
            norm += *x * *x;
        }
        if norm > 1e-24 {
            let norm = norm.sqrt();
            for x in &mut v {
                *x /= norm;
            }
            return v;
        }
    }
}

/// Counters of sampling events worth surfacing to callers.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SamplingStats {
    /// Gaussian draws that exhausted their attempts and returned the center.
    pub gaussian_fallbacks: u64,
}

/// Uniform or truncated-Gaussian point inside `e`.
///
/// Uniform draws pick a direction and a radius `u^(1/5)` in the unit ball and
/// map it onto the ellipsoid. Gaussian draws use `mean = center`,
/// `sd = radii / 3` and are redrawn until they fall inside.
pub fn sample_in_ellipsoid<R: Rng + ?Sized>(
    e: &Ellipsoid,
    dist: Distribution,
    rng: &mut R,
    stats: &mut SamplingStats,
) -> Point {
    match dist {
        Distribution::Uniform => sample_in_shell(e, 0.0, 1.0, rng),
        Distribution::Gaussian => {
            for _ in 0..GAUSSIAN_MAX_ATTEMPTS {
                let mut p = [0.0; N_ATTRIBUTES];
                for d in 0..N_ATTRIBUTES {
                    let sd = e.radii[d] / 3.0;
                    p[d] = Normal::new(e.center[d], sd).map(|n| n.sample(rng)).unwrap_or(e.center[d]);
                }
                if e.contains(&p) {
                    return p;
                }
            }
            stats.gaussian_fallbacks += 1;
            e.center
        }
    }
}

/// Uniform point in the shell between the `inner`- and `outer`-scaled copies of `e`.
pub fn sample_in_shell<R: Rng + ?Sized>(e: &Ellipsoid, inner: f64, outer: f64, rng: &mut R) -> Point {
    let dir = unit_direction(rng);
    let n = N_ATTRIBUTES as i32;
    let lo = inner.powi(n);
    let hi = outer.powi(n);
    let u: f64 = rng.random();
    let rho = (lo + u * (hi - lo)).powf(1.0 / N_ATTRIBUTES as f64);
    let mut p = e.center;
    for d in 0..N_ATTRIBUTES {
        p[d] += dir[d] * rho * e.radii[d];
    }
    p
}

/// Uniform point in the unit hypercube.
pub fn sample_in_cube<R: Rng + ?Sized>(rng: &mut R) -> Point {
    let mut p = [0.0; N_ATTRIBUTES];
    for v in &mut p {
        *v = rng.random();
    }
    p
}
