use criterion::{criterion_group, criterion_main, BatchSize, Criterion, Throughput};
use imbstream::classifier::{Classifier, ClassifierKind};
use imbstream::labeler::label_types;
use imbstream::{collect_stream, prequential_run};
use imbstream_bench::{fixture_config, fixture_stream};

const N: u64 = 20_000;

fn generation(c: &mut Criterion) {
    let cfg = fixture_config(N);
    let mut g = c.benchmark_group("generate");
    g.throughput(Throughput::Elements(N));
    g.bench_function("old_borderline", |b| b.iter(|| collect_stream(&cfg).unwrap()));
    g.finish();
}

fn classifiers(c: &mut Criterion) {
    let stream = fixture_stream(N);
    let mut g = c.benchmark_group("prequential");
    g.sample_size(10);
    g.throughput(Throughput::Elements(N));
    for kind in ClassifierKind::ALL {
        g.bench_function(kind.as_str(), |b| {
            b.iter_batched(
                || Classifier::new(kind, 3, 1),
                |mut clf| prequential_run(stream.iter().cloned(), &mut clf, 3, 1000),
                BatchSize::LargeInput,
            )
        });
    }
    g.finish();
}

fn labeling(c: &mut Criterion) {
    let stream = fixture_stream(1000);
    let mut g = c.benchmark_group("label");
    g.throughput(Throughput::Elements(1000));
    g.bench_function("window_1000_k5", |b| b.iter(|| label_types(&stream, 5).unwrap()));
    g.finish();
}

criterion_group!(benches, generation, classifiers, labeling);
criterion_main!(benches);
