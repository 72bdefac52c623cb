//! Full-scale acceptance run: one PASS/FAIL line per criterion, nonzero exit
//! if any criterion fails. Streams have their full default lengths.

use std::collections::BTreeMap;
use std::process::ExitCode;
use std::time::Instant;

use imbstream::classifier::{bagging_lambda, hoeffding_bound, BaggingVariant, ClassSizeTracker, DEFAULT_LAMBDA_MAX};
use imbstream::eval::{gmean_present, recall_from_counts, WindowedConfusion, DEFAULT_WARMUP};
use imbstream::labeler::{knn, label_windows};
use imbstream::{
    collect_stream, effective_state, gmean, progress, validate_config, ClassSpec, ClassifierKind, EvalSeries,
    ExampleType, LabeledExample, SnapshotPoints, StreamConfig, ValidatedConfig,
};
use imbstream_cli::experiment::{run_grid, RunOptions};
use imbstream_cli::scenario::scenario_config;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ClassifierKind::{Ob, Oob, Uob, Vfdt};

const SEED: u64 = 1;
const CELL_BUDGET_SECS: f64 = 120.0;
const BALANCED: &str = "balanced_3";

struct Grid {
    series: BTreeMap<(String, ClassifierKind), EvalSeries>,
}

impl Grid {
    fn series(&self, id: &str, k: ClassifierKind) -> &EvalSeries {
        &self.series[&(id.to_string(), k)]
    }

    fn mean(&self, id: &str, k: ClassifierKind) -> f64 {
        self.series(id, k).mean_gmean(DEFAULT_WARMUP)
    }

    fn snap(&self, id: &str, k: ClassifierKind) -> imbstream::Snapshots {
        self.series(id, k).snapshots(SnapshotPoints::default())
    }
}

struct Verdict {
    ok: bool,
    detail: String,
}

fn verdict(ok: bool, detail: impl Into<String>) -> Verdict {
    Verdict { ok, detail: detail.into() }
}

fn balanced_config() -> StreamConfig {
    let third = 1.0 / 3.0;
    StreamConfig::new(
        BALANCED,
        vec![ClassSpec::majority("c0", third), ClassSpec::minority("c1", third), ClassSpec::minority("c2", third)],
        SEED,
    )
}

fn fmt4(ks: &[ClassifierKind], f: impl Fn(ClassifierKind) -> f64) -> String {
    ks.iter().map(|k| format!("{k}={:.4}", f(*k))).collect::<Vec<_>>().join(" ")
}

fn a1(g: &Grid) -> Verdict {
    let all = ClassifierKind::ALL;
    let ok = all.iter().all(|k| g.mean(BALANCED, *k) >= 0.95);
    verdict(ok, fmt4(&all, |k| g.mean(BALANCED, k)))
}

fn a2(g: &Grid) -> Verdict {
    let id = "imb_0.03_0.03";
    let m = |k| g.mean(id, k);
    let floor = m(Uob) >= 0.90 && m(Oob) >= 0.90;
    let order = [Uob, Oob].iter().all(|s| m(*s) >= m(Ob) && m(*s) >= m(Vfdt));
    verdict(floor && order, format!("{} floor={floor} order={order}", fmt4(&ClassifierKind::ALL, m)))
}

fn a3(g: &Grid) -> Verdict {
    let ids: Vec<String> = [20, 40, 60, 80, 100].iter().map(|l| format!("bord_{l}_{l}")).collect();
    let vfdt: Vec<f64> = ids.iter().map(|id| g.mean(id, Vfdt)).collect();
    let oob: Vec<f64> = ids.iter().map(|id| g.mean(id, Oob)).collect();
    let decreasing = vfdt.windows(2).all(|w| w[1] < w[0]);
    let flat = oob.iter().all(|v| (v - oob[0]).abs() <= 0.15);
    let show = |v: &[f64]| v.iter().map(|x| format!("{x:.3}")).collect::<Vec<_>>().join(" > ");
    verdict(decreasing && flat, format!("vfdt {} | oob {}", show(&vfdt), show(&oob)))
}

fn a4(g: &Grid) -> Verdict {
    let mut ok = true;
    let mut worst = f64::INFINITY;
    for l in [40, 60, 80] {
        for k in ClassifierKind::ALL {
            let gap = g.mean(&format!("bord_{l}_{l}"), k) - g.mean(&format!("rare_{l}_{l}"), k);
            worst = worst.min(gap);
            ok &= gap > 0.0;
        }
    }
    verdict(ok, format!("smallest bord-rare gap {worst:.3}"))
}

fn a5(g: &Grid) -> Verdict {
    let id = "rare_100_100";
    let m = |k| g.mean(id, k);
    verdict(m(Ob) < 0.10 && m(Vfdt) < 0.10 && m(Uob) > 0.20, fmt4(&[Vfdt, Ob, Uob], m))
}

fn a6(g: &Grid) -> Verdict {
    let mv = g.snap("move_5_5", Oob);
    let (pre, end) = (mv.pre.unwrap_or(f64::NAN), mv.end.unwrap_or(f64::NAN));
    let recovers = end >= pre - 0.05;
    let mut detail = format!("move oob pre={pre:.4} end={end:.4}");
    let mut stays_down = true;
    for k in [Vfdt, Ob] {
        let s = g.snap("split_5_5", k);
        let (start, end) = (s.start.unwrap_or(f64::NAN), s.end.unwrap_or(f64::NAN));
        stays_down &= end <= start - 0.05;
        detail += &format!(" | split {k} start={start:.4} end={end:.4}");
    }
    verdict(recovers && stays_down, detail)
}

fn a7(g: &Grid) -> Verdict {
    let post = |id: &str, k| g.snap(id, k).post.unwrap_or(f64::NAN);
    let (combined, rare) = ("split_5_5_rared_60_60", "rared_60_60");
    let degrades = ClassifierKind::ALL.iter().all(|k| post(combined, *k) <= post(rare, *k) - 0.02);
    let best_plain = post(combined, Ob).max(post(combined, Vfdt));
    let worst_special = post(combined, Oob).min(post(combined, Uob));
    let separated = worst_special >= best_plain + 0.10;
    verdict(
        degrades && separated,
        format!(
            "combined post {} | rare-only post {} | degrades={degrades} separated={separated}",
            fmt4(&ClassifierKind::ALL, |k| post(combined, k)),
            fmt4(&ClassifierKind::ALL, |k| post(rare, k)),
        ),
    )
}

fn shortened(id: &str, length: u64) -> ValidatedConfig {
    let mut cfg = scenario_config(id, SEED).expect("scenario");
    cfg.length = Some(length);
    validate_config(&cfg).expect("valid")
}

fn brute_knn(window: &[LabeledExample], q: usize, k: usize) -> Vec<usize> {
    let d = |i: usize| -> f64 { window[i].x.iter().zip(&window[q].x).map(|(a, b)| (a - b) * (a - b)).sum() };
    let mut idx: Vec<usize> = (0..window.len()).filter(|i| *i != q).collect();
    idx.sort_by(|a, b| d(*a).total_cmp(&d(*b)).then(a.cmp(b)));
    idx.truncate(k);
    idx
}

/// Property checks that do not depend on learning quality.
fn a8() -> Verdict {
    let mut failures = Vec::new();
    let mut check = |name: &str, ok: bool| {
        if !ok {
            failures.push(name.to_string());
        }
    };

    let cfg = shortened("bord_40_40", 20_000);
    let a = collect_stream(&cfg).unwrap();
    check("determinism", a == collect_stream(&cfg).unwrap());

    let full = validate_config(&scenario_config("imb_0.10_0.10", SEED).unwrap()).unwrap();
    let s = collect_stream(&full).unwrap();
    let n = s.len() as f64;
    let counts = (0..3).map(|c| s.iter().filter(|e| e.y == c).count() as f64).collect::<Vec<_>>();
    for (c, p) in [0.8, 0.1, 0.1].iter().enumerate() {
        let sigma = (n * p * (1.0 - p)).sqrt();
        check("ratio fidelity", (counts[c] - n * p).abs() <= 5.0 * sigma);
    }
    check("ratio band", (19_000.0..=21_000.0).contains(&counts[1]));

    let hist = label_windows(&a, 3, 5, 1000).unwrap();
    for c in 1..3 {
        let (mut unsafe_sum, mut windows) = (0.0, 0.0);
        for h in &hist {
            if let Some(p) = h.proportions(c) {
                unsafe_sum += p[1] + p[2];
                windows += 1.0;
            }
        }
        check("type fidelity", (unsafe_sum / windows - 0.4).abs() <= 0.10);
    }
    let gen_border = a.iter().filter(|e| e.y == 1 && e.gen_type == Some(ExampleType::Borderline)).count() as f64
        / a.iter().filter(|e| e.y == 1).count() as f64;
    check("generated type share", (gen_border - 0.4).abs() < 0.03);

    let drifting = validate_config(&scenario_config("dimb_0.01_0.01", SEED).unwrap()).unwrap();
    let spec = &drifting.config().drifts[0];
    let from = effective_state(&drifting, 0).unwrap();
    check("drift start boundary", effective_state(&drifting, spec.t_start).unwrap().ratios == from.ratios);
    let to = effective_state(&drifting, spec.t_end).unwrap();
    check("drift end boundary", (to.ratios[1] - 0.01).abs() < 1e-12 && (to.ratios[0] - 0.98).abs() < 1e-12);
    let mut last = from.ratios[1];
    for t in (spec.t_start..=spec.t_end).step_by(1000) {
        let r = effective_state(&drifting, t).unwrap().ratios[1];
        check("monotone interpolation", r <= last + 1e-15);
        last = r;
    }
    check("progress midpoint", (progress(spec, 85_000) - 0.5).abs() < 1e-12);

    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let window: Vec<LabeledExample> = (0..1000)
        .map(|t| LabeledExample {
            t,
            x: std::array::from_fn(|_| rng.random()),
            y: rng.random_range(0..3),
            gen_type: None,
        })
        .collect();
    check("labeler vs brute force", (0..window.len()).all(|q| knn(&window, q, 5).unwrap() == brute_knn(&window, q, 5)));

    for (r, d, n) in [(1.0f64, 1e-7f64, 1000u64), (1.585, 1e-7, 200), (2.0, 0.05, 50)] {
        let oracle = (r * r * (1.0 / d).ln() / (2.0 * n as f64)).sqrt();
        check("hoeffding bound", (hoeffding_bound(r, d, n as f64).unwrap() - oracle).abs() < 1e-12);
    }

    for _ in 0..200 {
        let r: Vec<f64> = (0..4).map(|_| rng.random()).collect();
        let am = r.iter().sum::<f64>() / 4.0;
        check("am-gm", gmean(&r) <= am + 1e-12);
        let mut p = r.clone();
        p.reverse();
        check("gmean permutation", (gmean(&p) - gmean(&r)).abs() < 1e-12);
    }

    let mut conf = WindowedConfusion::new(3, 100);
    let mut log = Vec::new();
    for _ in 0..1000 {
        let (y, yh) = (rng.random_range(0..3), rng.random_range(0..3));
        conf.record(y, yh);
        log.push((y, yh));
        let tail = &log[log.len().saturating_sub(100)..];
        let batch: Vec<Option<f64>> = (0..3)
            .map(|c| {
                let sup = tail.iter().filter(|(t, _)| *t == c).count();
                (sup > 0).then(|| tail.iter().filter(|(t, p)| *t == c && *p == c).count() as f64 / sup as f64)
            })
            .collect();
        let windowed = recall_from_counts(conf.true_positives(), conf.support());
        check("windowed recall", windowed == batch);
        check("windowed gmean", gmean_present(&windowed) == gmean_present(&batch));
    }

    let uniform = ClassSizeTracker::from_sizes(&[1.0, 1.0, 1.0], 0.9);
    for v in [BaggingVariant::Oob, BaggingVariant::Uob] {
        check("uniform lambda", (0..3).all(|y| bagging_lambda(v, &uniform, y, DEFAULT_LAMBDA_MAX) == 1.0));
    }

    failures.dedup();
    let ok = failures.is_empty();
    verdict(ok, if ok { "all property checks hold".into() } else { format!("failed: {}", failures.join(", ")) })
}

fn main() -> ExitCode {
    let mut streams = vec![balanced_config()];
    let ids = [
        "imb_0.03_0.03",
        "bord_20_20",
        "bord_40_40",
        "bord_60_60",
        "bord_80_80",
        "bord_100_100",
        "rare_40_40",
        "rare_60_60",
        "rare_80_80",
        "rare_100_100",
        "move_5_5",
        "split_5_5",
        "rared_60_60",
        "split_5_5_rared_60_60",
    ];
    streams.extend(ids.iter().map(|id| scenario_config(id, SEED).expect("scenario id")));

    let started = Instant::now();
    let opts = RunOptions { cache_dir: None, ..RunOptions::default() };
    let out = run_grid(&streams, &opts).expect("grid");
    let slowest = out.manifest.cells.iter().map(|c| c.seconds).fold(0.0, f64::max);
    let failed: Vec<String> =
        out.manifest.cells.iter().filter_map(|c| c.error.as_ref().map(|e| format!("{} {}: {e}", c.stream_id, c.classifier))).collect();
    let grid = Grid { series: out.series };

    let mut all_ok = failed.is_empty();
    for f in &failed {
        println!("cell error: {f}");
    }
    let grid_criteria: [(&str, fn(&Grid) -> Verdict); 7] =
        [("A1", a1), ("A2", a2), ("A3", a3), ("A4", a4), ("A5", a5), ("A6", a6), ("A7", a7)];
    for (name, f) in grid_criteria {
        if !failed.is_empty() {
            println!("{name} FAIL grid incomplete");
            continue;
        }
        let v = f(&grid);
        all_ok &= v.ok;
        println!("{name} {} {}", if v.ok { "PASS" } else { "FAIL" }, v.detail);
    }
    let v = a8();
    all_ok &= v.ok;
    println!("A8 {} {}", if v.ok { "PASS" } else { "FAIL" }, v.detail);

    let fast = slowest < CELL_BUDGET_SECS;
    all_ok &= fast;
    println!(
        "timing {} slowest cell {slowest:.1}s of {} cells, total {:.0}s",
        if fast { "PASS" } else { "FAIL" },
        out.manifest.cells.len(),
        started.elapsed().as_secs_f64()
    );
    if all_ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
