//! Per-example sampling and the stream iterator.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::drift::{DriftPlan, EffectiveState};
use crate::geometry::{in_unit_cube, sample_in_cube, sample_in_ellipsoid, sample_in_shell, Ellipsoid, SamplingStats};
use crate::layout::{ClassLayout, LayoutError};
use crate::model::{Distribution, ExampleType, GeometryParams, LabeledExample, Point, TypeProportions, ValidatedConfig};

const SAMPLE_STREAM: u64 = 0x73616d706c65;

#[derive(Clone, Debug, PartialEq, Error)]
pub enum GenerateError {
    #[error(transparent)]
    Layout(#[from] LayoutError),
    #[error("example {t}: no {kind} point for class {class} after {attempts} attempts")]
    Rejection { t: u64, class: usize, kind: &'static str, attempts: usize },
}

#[derive(Clone, Debug)]
struct RareIsland {
    anchor: Point,
    remaining: usize,
}

/// Places single examples into a [`ClassLayout`]. Holds the rare-island registry.
#[derive(Clone, Debug)]
pub struct ExampleSampler {
    params: GeometryParams,
    distribution: Distribution,
    islands: Vec<Option<RareIsland>>,
    pub stats: SamplingStats,
}

impl ExampleSampler {
    pub fn new(params: GeometryParams, distribution: Distribution, n_classes: usize) -> Self {
        Self { params, distribution, islands: vec![None; n_classes], stats: SamplingStats::default() }
    }

    /// Minimum distance between a rare anchor and the class's own sub-clusters.
    pub fn rare_min_distance(&self, layout: &ClassLayout, class: usize) -> f64 {
        self.params.rare_distance_factor * layout.classes[class].max_radius()
    }

    fn fail(&self, class: usize, kind: &'static str) -> GenerateError {
        GenerateError::Rejection { t: 0, class, kind, attempts: self.params.max_attempts }
    }

    /// Draws a point of `class` with the given type.
    pub fn sample<R: Rng + ?Sized>(
        &mut self,
        layout: &ClassLayout,
        class: usize,
        gen_type: ExampleType,
        rng: &mut R,
    ) -> Result<Point, GenerateError> {
        if class == layout.majority_class {
            return self.sample_majority(layout, rng);
        }
        match gen_type {
            ExampleType::Safe => self.sample_safe(layout, class, rng),
            ExampleType::Borderline => self.sample_borderline(layout, class, rng),
            ExampleType::Rare => self.sample_rare(layout, class, rng),
        }
    }

    fn sample_majority<R: Rng + ?Sized>(&mut self, layout: &ClassLayout, rng: &mut R) -> Result<Point, GenerateError> {
        let major = layout.majority_class;
        let attempts = self.params.max_attempts;
        match (&layout.majority, layout.generator) {
            (Some(e), _) => {
                for _ in 0..attempts {
                    let p = sample_in_ellipsoid(e, self.distribution, rng, &mut self.stats);
                    if in_unit_cube(&p) && !layout.in_foreign_core(major, &p) {
                        return Ok(p);
                    }
                }
                Err(self.fail(major, "majority"))
            }
            (None, _) => {
                let minority: Vec<usize> = layout.minority_classes().collect();
                let surround = !minority.is_empty() && rng.random::<f64>() < self.params.surround_share;
                let (inner, outer) = (self.params.surround_inner, self.params.surround_inner + self.params.surround_width);
                for _ in 0..attempts {
                    let p = if surround {
                        let c = minority[rng.random_range(0..minority.len())];
                        let s = layout.classes[c].pick(rng.random());
                        sample_in_shell(&s.ellipsoid, inner, outer, rng)
                    } else {
                        sample_in_cube(rng)
                    };
                    if in_unit_cube(&p) && !layout.in_foreign_core(major, &p) {
                        return Ok(p);
                    }
                }
                Err(self.fail(major, "majority"))
            }
        }
    }

    fn sample_safe<R: Rng + ?Sized>(&mut self, layout: &ClassLayout, class: usize, rng: &mut R) -> Result<Point, GenerateError> {
        for _ in 0..self.params.max_attempts {
            let s = layout.classes[class].pick(rng.random());
            let core = layout.core(s);
            let p = sample_in_ellipsoid(&core, self.distribution, rng, &mut self.stats);
            if in_unit_cube(&p) && !layout.in_foreign_core(class, &p) {
                return Ok(p);
            }
        }
        Err(self.fail(class, "safe"))
    }

    fn sample_borderline<R: Rng + ?Sized>(&mut self, layout: &ClassLayout, class: usize, rng: &mut R) -> Result<Point, GenerateError> {
        let b = layout.border_width;
        for _ in 0..self.params.max_attempts {
            let s = layout.classes[class].pick(rng.random());
            let p = sample_in_shell(&s.ellipsoid, 1.0 - b, 1.0 + b, rng);
            if in_unit_cube(&p) && !layout.in_foreign_core(class, &p) {
                return Ok(p);
            }
        }
        Err(self.fail(class, "borderline"))
    }

    fn sample_rare<R: Rng + ?Sized>(&mut self, layout: &ClassLayout, class: usize, rng: &mut R) -> Result<Point, GenerateError> {
        let rho = self.params.rare_radius;
        let needs_anchor = self.islands[class].as_ref().is_none_or(|i| i.remaining == 0);
        if needs_anchor {
            let anchor = self.rare_anchor(layout, class, rng)?;
            let size = rng.random_range(1..=self.params.rare_group_max);
            self.islands[class] = Some(RareIsland { anchor, remaining: size });
        }
        let island = self.islands[class].as_mut().expect("island present");
        island.remaining -= 1;
        let ball = Ellipsoid::sphere(island.anchor, rho);
        for _ in 0..self.params.max_attempts {
            let p = sample_in_shell(&ball, 0.0, 1.0, rng);
            if in_unit_cube(&p) && !layout.in_foreign_core(class, &p) {
                return Ok(p);
            }
        }
        Err(self.fail(class, "rare"))
    }

    /// Anchor inside the majority region, away from every core and far from own sub-clusters.
    fn rare_anchor<R: Rng + ?Sized>(&mut self, layout: &ClassLayout, class: usize, rng: &mut R) -> Result<Point, GenerateError> {
        let d_min = self.rare_min_distance(layout, class) + self.params.rare_radius;
        let own = &layout.classes[class].subclusters;
        for _ in 0..self.params.max_attempts {
            let p = match &layout.majority {
                Some(e) => sample_in_shell(e, 0.0, 1.0, rng),
                None => sample_in_cube(rng),
            };
            if !in_unit_cube(&p) || layout.in_any_core(&p) {
                continue;
            }
            if own.iter().all(|s| s.ellipsoid.surface_distance_lower_bound(&p) > d_min) {
                return Ok(p);
            }
        }
        Err(self.fail(class, "rare anchor"))
    }
}

/// Draws one example of `class` and `gen_type` at index `t`.
pub fn generate_example<R: Rng + ?Sized>(
    sampler: &mut ExampleSampler,
    layout: &ClassLayout,
    t: u64,
    class: usize,
    gen_type: ExampleType,
    rng: &mut R,
) -> Result<LabeledExample, GenerateError> {
    let x = sampler.sample(layout, class, gen_type, rng).map_err(|e| match e {
        GenerateError::Rejection { class, kind, attempts, .. } => GenerateError::Rejection { t, class, kind, attempts },
        other => other,
    })?;
    Ok(LabeledExample { t, x, y: class, gen_type: Some(gen_type) })
}

fn categorical<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> usize {
    let total: f64 = weights.iter().sum();
    let u = rng.random::<f64>() * total;
    let mut acc = 0.0;
    for (i, w) in weights.iter().enumerate() {
        acc += w;
        if u < acc {
            return i;
        }
    }
    weights.iter().rposition(|w| *w > 0.0).unwrap_or(0)
}

fn draw_type<R: Rng + ?Sized>(types: &TypeProportions, rng: &mut R) -> ExampleType {
    ExampleType::ALL[categorical(&types.as_array(), rng)]
}

/// Single-pass, deterministic stream of a validated config.
pub struct StreamGenerator {
    plan: DriftPlan,
    sampler: ExampleSampler,
    rng: ChaCha8Rng,
    t: u64,
    length: u64,
    state: EffectiveState,
    state_segment: Option<usize>,
}

impl StreamGenerator {
    pub fn new(config: &ValidatedConfig) -> Result<Self, LayoutError> {
        let plan = DriftPlan::new(config)?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        rng.set_stream(SAMPLE_STREAM);
        let state = plan.state_at(1);
        Ok(Self {
            sampler: ExampleSampler::new(config.geometry.clone(), config.distribution, config.n_classes()),
            state_segment: plan.segment(1),
            plan,
            rng,
            t: 0,
            length: config.length(),
            state,
        })
    }

    pub fn plan(&self) -> &DriftPlan {
        &self.plan
    }

    pub fn stats(&self) -> SamplingStats {
        self.sampler.stats
    }

    pub fn remaining(&self) -> u64 {
        self.length - self.t
    }

    fn refresh_state(&mut self, t: u64) {
        let seg = self.plan.segment(t);
        if seg.is_none() || seg != self.state_segment {
            self.state = self.plan.state_at(t);
            self.state_segment = seg;
        }
    }

    pub fn next_example(&mut self) -> Option<Result<LabeledExample, GenerateError>> {
        if self.t >= self.length {
            return None;
        }
        self.t += 1;
        let t = self.t;
        self.refresh_state(t);
        let class = categorical(&self.state.ratios, &mut self.rng);
        let gen_type = draw_type(&self.state.type_proportions[class], &mut self.rng);
        Some(generate_example(&mut self.sampler, &self.state.layout, t, class, gen_type, &mut self.rng))
    }
}

impl Iterator for StreamGenerator {
    type Item = Result<LabeledExample, GenerateError>;

    fn next(&mut self) -> Option<Self::Item> {
        self.next_example()
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let n = self.remaining() as usize;
        (n, Some(n))
    }
}

/// Iterator over the examples of `config`.
pub fn generate_stream(config: &ValidatedConfig) -> Result<StreamGenerator, GenerateError> {
    Ok(StreamGenerator::new(config)?)
}

/// Materializes the whole stream.
pub fn collect_stream(config: &ValidatedConfig) -> Result<Vec<LabeledExample>, GenerateError> {
    generate_stream(config)?.collect()
}
