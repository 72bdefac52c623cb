//! Synthetic multi-class imbalanced data streams with concept drift, online
//! classifiers, and prequential G-mean evaluation.

pub mod classifier;
pub mod drift;
pub mod eval;
pub mod generator;
pub mod geometry;
pub mod io;
pub mod labeler;
pub mod layout;
pub mod model;

pub use classifier::{Classifier, ClassifierKind, OnlineClassifier};
pub use drift::{effective_state, progress, DriftPlan, EffectiveState};
pub use eval::{gmean, prequential_run, EvalSeries, SeriesPoint, SnapshotPoints, Snapshots};
pub use generator::{collect_stream, generate_stream, GenerateError, StreamGenerator};
pub use labeler::{label_types, label_windows, NeighborhoodType, TypeHistogram};
pub use layout::{build_layout, ClassLayout, LayoutError};
pub use model::{
    validate_config, ClassRole, ClassSpec, ConfigError, ConfigErrors, Distribution, DriftKind, DriftSpec, DriftTarget,
    DriftValue, ExampleType, GeneratorKind, GeometryParams, LabeledExample, Point, StreamConfig, TypeProportions,
    ValidatedConfig, N_ATTRIBUTES,
};
