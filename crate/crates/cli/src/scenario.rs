//! Scenario identifiers in the paper's naming scheme, e.g. `imb_0.10_0.10`,
//! `bord_40_40`, `split_5_5_rared_60_60` or `dimb_0.01_0.01_N`.
//!
//! An identifier is a sequence of factor groups, each a keyword followed by one
//! value per minority class. Values containing a dot are fractions; bare
//! integers are percentages (`bordd_60_60` means 60%) except for `split` and
//! `move`, whose values are sub-cluster counts. A trailing `O` or `N` selects the
//! generator (old by default).

use imbstream::{ClassSpec, DriftSpec, DriftTarget, GeneratorKind, StreamConfig, TypeProportions};
use thiserror::Error;

/// Minority share used when an identifier does not fix the class ratios.
pub const DEFAULT_MINORITY_RATIO: f64 = 0.10;
/// Starting minority share of imbalance-drift scenarios.
pub const DRIFT_FROM_RATIO: f64 = 0.30;

#[derive(Debug, Error, PartialEq)]
pub enum ScenarioError {
    #[error("scenario {id:?}: {message}")]
    Invalid { id: String, message: String },
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Factor {
    Imb,
    ImbDrift,
    Bord,
    BordDrift,
    Rare,
    RareDrift,
    Split,
    Move,
}

impl Factor {
    fn parse(tok: &str) -> Option<Self> {
        Some(match tok.to_ascii_lowercase().as_str() {
            "imb" => Self::Imb,
            "dimb" | "imbd" => Self::ImbDrift,
            "bord" => Self::Bord,
            "bordd" | "dbord" => Self::BordDrift,
            "rare" => Self::Rare,
            "rared" | "drare" => Self::RareDrift,
            "split" => Self::Split,
            "move" => Self::Move,
            _ => return None,
        })
    }

    fn is_count(self) -> bool {
        matches!(self, Self::Split | Self::Move)
    }
}

fn parse_share(tok: &str) -> Option<f64> {
    let v: f64 = tok.parse().ok()?;
    let v = if tok.contains('.') { v } else { v / 100.0 };
    (0.0..=1.0).contains(&v).then_some(v)
}

fn parse_count(tok: &str) -> Option<usize> {
    tok.parse().ok().filter(|n| *n >= 1)
}

/// Builds the stream configuration named by `id`.
pub fn scenario_config(id: &str, seed: u64) -> Result<StreamConfig, ScenarioError> {
    let fail = |message: String| ScenarioError::Invalid { id: id.to_string(), message };
    let mut tokens: Vec<&str> = id.split('_').filter(|t| !t.is_empty()).collect();
    let mut generator = GeneratorKind::Old;
    match tokens.last().copied() {
        Some("O") | Some("o") => {
            tokens.pop();
        }
        Some("N") | Some("n") => {
            generator = GeneratorKind::New;
            tokens.pop();
        }
        _ => {}
    }

    let mut groups: Vec<(Factor, Vec<&str>)> = Vec::new();
    for tok in tokens {
        if let Some(f) = Factor::parse(tok) {
            if groups.iter().any(|(g, _)| *g == f) {
                return Err(fail(format!("factor {tok:?} given twice")));
            }
            groups.push((f, Vec::new()));
        } else if let Some((_, values)) = groups.last_mut() {
            values.push(tok);
        } else {
            return Err(fail(format!("unknown factor {tok:?}")));
        }
    }
    if groups.is_empty() {
        return Err(fail("no factors".into()));
    }
    let n_minority = groups[0].1.len();
    if n_minority == 0 {
        return Err(fail("factor without values".into()));
    }
    for (f, values) in &groups {
        if values.len() != n_minority {
            return Err(fail(format!(
                "factor {f:?} has {} values but {n_minority} minority classes are implied",
                values.len()
            )));
        }
    }

    let mut ratios = vec![DEFAULT_MINORITY_RATIO; n_minority];
    let mut types = vec![TypeProportions::safe_only(); n_minority];
    let mut subclusters = vec![1usize; n_minority];
    let mut drifts: Vec<(usize, DriftSpec)> = Vec::new();
    let mut ratio_fixed = false;

    for (f, values) in &groups {
        for (i, tok) in values.iter().enumerate() {
            let class = DriftTarget::Class(format!("c{}", i + 1));
            if f.is_count() {
                let n = parse_count(tok).ok_or_else(|| fail(format!("bad sub-cluster count {tok:?}")))?;
                match f {
                    Factor::Split => drifts.push((i, DriftSpec::split(class, n))),
                    _ => {
                        subclusters[i] = n;
                        drifts.push((i, DriftSpec::moving(class)));
                    }
                }
                continue;
            }
            let v = parse_share(tok).ok_or_else(|| fail(format!("bad share {tok:?}")))?;
            match f {
                Factor::Imb => {
                    ratios[i] = v;
                    ratio_fixed = true;
                }
                Factor::ImbDrift => {
                    if !ratio_fixed {
                        ratios[i] = DRIFT_FROM_RATIO;
                    }
                    drifts.push((i, DriftSpec::imbalance_ratio(class, v)));
                }
                Factor::Bord => types[i] = TypeProportions::borderline(v),
                Factor::Rare => types[i] = TypeProportions::rare(v),
                Factor::BordDrift => drifts.push((i, DriftSpec::type_proportion(class, TypeProportions::borderline(v)))),
                Factor::RareDrift => drifts.push((i, DriftSpec::type_proportion(class, TypeProportions::rare(v)))),
                Factor::Split | Factor::Move => unreachable!(),
            }
        }
    }
    if groups.iter().any(|(f, _)| *f == Factor::Imb) && groups.iter().any(|(f, _)| *f == Factor::ImbDrift) {
        return Err(fail("static and drifting imbalance cannot be combined".into()));
    }

    let majority = 1.0 - ratios.iter().sum::<f64>();
    if majority <= 0.0 {
        return Err(fail(format!("minority ratios leave no room for the majority class ({majority:.3})")));
    }
    let mut classes = vec![ClassSpec::majority("c0", majority)];
    for i in 0..n_minority {
        classes.push(
            ClassSpec::minority(format!("c{}", i + 1), ratios[i])
                .with_types(types[i])
                .with_subclusters(subclusters[i]),
        );
    }
    let mut cfg = StreamConfig::new(id, classes, seed);
    cfg.generator = generator;
    drifts.sort_by_key(|(i, _)| *i);
    cfg.drifts = drifts.into_iter().map(|(_, d)| d).collect();
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use imbstream::{validate_config, DriftKind};

    fn cfg(id: &str) -> StreamConfig {
        scenario_config(id, 1).unwrap()
    }

    #[test]
    fn static_imbalance() {
        let c = cfg("imb_0.10_0.10");
        let r: Vec<f64> = c.classes.iter().map(|c| c.ratio).collect();
        assert!((r[0] - 0.8).abs() < 1e-12 && r[1] == 0.1 && r[2] == 0.1);
        assert!(c.drifts.is_empty());
        assert_eq!(validate_config(&c).unwrap().length(), 200_000);
        assert_eq!(cfg("imb_3_3").classes[1].ratio, 0.03);
        assert_eq!(cfg("imb_0.05_0.05_0.05").classes.len(), 4);
    }

    #[test]
    fn imbalance_drift_starts_balanced() {
        let c = cfg("dimb_0.01_0.01");
        assert_eq!(c.classes[1].ratio, 0.3);
        assert_eq!(c.drifts.len(), 2);
        assert_eq!(validate_config(&c).unwrap().length(), 250_000);
    }

    #[test]
    fn type_factors() {
        let c = cfg("bord_40_40");
        assert_eq!(c.classes[1].type_proportions, TypeProportions::borderline(0.4));
        let c = cfg("rared_60_60");
        assert_eq!(c.classes[1].type_proportions, TypeProportions::safe_only());
        assert_eq!(c.drifts[0].kind, DriftKind::TypeProportion);
    }

    #[test]
    fn combined_scenarios_validate() {
        for id in [
            "split_5_5",
            "move_5_5",
            "split_5_5_bordd_60_60",
            "split_5_5_rared_60_60",
            "split_5_5_imbd_1_1_rared_60_60",
            "split_5_5_rared_60_60_N",
        ] {
            let c = cfg(id);
            validate_config(&c).unwrap_or_else(|e| panic!("{id}: {e}"));
        }
        assert_eq!(cfg("move_5_5").classes[1].n_subclusters, 5);
        assert_eq!(cfg("split_5_5_rared_60_60_N").generator, GeneratorKind::New);
    }

    #[test]
    fn rejects_malformed_ids() {
        for id in ["", "foo_1_1", "imb_10_10_bord_20", "imb_0.6_0.6", "bord_150_10", "split_0_0", "imb_1_1_imb_2_2"] {
            assert!(scenario_config(id, 1).is_err(), "{id}");
        }
    }
}
