//! Module Set Assembly Strategy Matrix.
//!
//! Each module set is scored 1 (optimal) to 5 (poor) per criterion. Scores
//! aggregate into a total, a mean and a colour band; the worst sets rank
//! first as bottlenecks.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Criterion, CriterionKind, ModuleSet, OrdinalScore, Project, Scale};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MsasmError {
    #[error("score {0} is outside 1..=5")]
    OutOfRange(i64),
    #[error("no score proposals given")]
    EmptyProposals,
    #[error("{set}: criterion {criterion:?} is not configured")]
    UnknownCriterion { set: ModuleSet, criterion: String },
    #[error("{set}: criterion {criterion:?} is scored more than once")]
    DuplicateScore { set: ModuleSet, criterion: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Consensus,
    ConservativeDefault,
    #[default]
    Imported,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MsasmRecord {
    pub set: ModuleSet,
    pub criterion: String,
    pub score: OrdinalScore,
    #[serde(default)]
    pub provenance: Provenance,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

/// Turns the scores proposed by a group into one record. Agreement is
/// recorded as consensus; disagreement falls back to the worst proposal.
pub fn record_score(set: ModuleSet, criterion: impl Into<String>, proposals: &[i64]) -> Result<MsasmRecord, MsasmError> {
    if proposals.is_empty() {
        return Err(MsasmError::EmptyProposals);
    }
    let mut scores = Vec::with_capacity(proposals.len());
    for &p in proposals {
        let score = u8::try_from(p).ok().and_then(OrdinalScore::new).ok_or(MsasmError::OutOfRange(p))?;
        scores.push(score);
    }
    let min = *scores.iter().min().unwrap();
    let max = *scores.iter().max().unwrap();
    let (provenance, note) = if min == max {
        (Provenance::Consensus, None)
    } else {
        (
            Provenance::ConservativeDefault,
            Some(format!("proposals ranged {}-{}; worst case kept", min.value(), max.value())),
        )
    };
    Ok(MsasmRecord {
        set,
        criterion: criterion.into(),
        score: max,
        provenance,
        note,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Band {
    Optimal,
    Revise,
    Critical,
}

impl Band {
    pub fn as_str(self) -> &'static str {
        match self {
            Band::Optimal => "optimal",
            Band::Revise => "revise",
            Band::Critical => "critical",
        }
    }
}

impl fmt::Display for Band {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Colour {
    Green,
    Yellow,
    Red,
}

impl Colour {
    pub fn as_str(self) -> &'static str {
        match self {
            Colour::Green => "green",
            Colour::Yellow => "yellow",
            Colour::Red => "red",
        }
    }
}

impl fmt::Display for Colour {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

pub fn band_colour(band: Band) -> Colour {
    match band {
        Band::Optimal => Colour::Green,
        Band::Revise => Colour::Yellow,
        Band::Critical => Colour::Red,
    }
}

/// Lower bounds on the mean score for the revise and critical bands.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BandThresholds {
    pub revise: f64,
    pub critical: f64,
}

impl Default for BandThresholds {
    fn default() -> Self {
        BandThresholds {
            revise: 2.0,
            critical: 3.5,
        }
    }
}

impl BandThresholds {
    pub fn check(&self) -> Result<(), String> {
        let ok = self.revise.is_finite()
            && self.critical.is_finite()
            && 1.0 < self.revise
            && self.revise <= self.critical
            && self.critical <= 5.0;
        if ok {
            Ok(())
        } else {
            Err(format!(
                "thresholds must satisfy 1 < revise <= critical <= 5; got revise {} critical {}",
                self.revise, self.critical
            ))
        }
    }

    pub fn band(&self, mean: f64) -> Band {
        if mean >= self.critical {
            Band::Critical
        } else if mean >= self.revise {
            Band::Revise
        } else {
            Band::Optimal
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MsasmAggregate {
    pub set: ModuleSet,
    /// Present scores by criterion id.
    pub scores: BTreeMap<String, u8>,
    pub total: u32,
    pub mean: f64,
    pub band: Band,
    pub colour: Colour,
    /// Configured criteria without a score, in configured order.
    pub missing_criteria: Vec<String>,
}

/// Aggregates with the default band thresholds.
pub fn aggregate_msasm(records: &[MsasmRecord], criteria: &[String]) -> Result<Vec<MsasmAggregate>, MsasmError> {
    aggregate_msasm_with(records, criteria, &BandThresholds::default())
}

/// One aggregate per scored module set, in canonical set order. Totals and
/// means run over present scores only.
pub fn aggregate_msasm_with(
    records: &[MsasmRecord],
    criteria: &[String],
    thresholds: &BandThresholds,
) -> Result<Vec<MsasmAggregate>, MsasmError> {
    let configured: BTreeSet<&str> = criteria.iter().map(String::as_str).collect();
    let mut by_set: BTreeMap<&ModuleSet, BTreeMap<String, u8>> = BTreeMap::new();
    for r in records {
        if !configured.contains(r.criterion.as_str()) {
            return Err(MsasmError::UnknownCriterion {
                set: r.set.clone(),
                criterion: r.criterion.clone(),
            });
        }
        let scores = by_set.entry(&r.set).or_default();
        if scores.insert(r.criterion.clone(), r.score.value()).is_some() {
            return Err(MsasmError::DuplicateScore {
                set: r.set.clone(),
                criterion: r.criterion.clone(),
            });
        }
    }
    Ok(by_set
        .into_iter()
        .map(|(set, scores)| {
            let total: u32 = scores.values().map(|&s| u32::from(s)).sum();
            let mean = f64::from(total) / scores.len() as f64;
            let band = thresholds.band(mean);
            let missing_criteria = criteria.iter().filter(|c| !scores.contains_key(*c)).cloned().collect();
            MsasmAggregate {
                set: set.clone(),
                scores,
                total,
                mean,
                band,
                colour: band_colour(band),
                missing_criteria,
            }
        })
        .collect())
}

/// Worst band first, then higher mean, then higher total, then set id.
pub fn rank_bottlenecks(aggregates: &[MsasmAggregate]) -> Vec<MsasmAggregate> {
    let mut ranked = aggregates.to_vec();
    ranked.sort_by(|x, y| {
        y.band
            .cmp(&x.band)
            .then(y.mean.total_cmp(&x.mean))
            .then(y.total.cmp(&x.total))
            .then(x.set.cmp(&y.set))
    });
    ranked
}

/// The six default criteria: three interface-level criteria with 1/3/5
/// anchors followed by three carried over from the concept catalog.
pub fn default_msasm_criteria() -> Vec<Criterion> {
    vec![
        Criterion::new(
            "attachment_interface_connections",
            "Attachment interface connections",
            CriterionKind::Both,
            Scale::Ordinal1To5,
        )
        .with_anchors(
            "a handful of simple joints such as snap fits",
            "several joints that are still manageable",
            "many or tangled joints needing tools or cable routing",
        ),
        Criterion::new("assembly_direction", "Assembly direction", CriterionKind::Dfa, Scale::Ordinal1To5).with_anchors(
            "top-down insertion helped by gravity",
            "mixed directions, the module must be reoriented",
            "many directions with turning or awkward handling",
        ),
        Criterion::new("accessibility", "Accessibility", CriterionKind::Both, Scale::Ordinal1To5).with_anchors(
            "everything visible and reachable at a normal workstation",
            "partly obstructed, reaching into the housing",
            "unreachable without disassembly or special tools",
        ),
        Criterion::new("tool_requirements", "Tool requirements", CriterionKind::Both, Scale::Ordinal1To5),
        Criterion::new("force_intensity", "Force intensity", CriterionKind::Dfd, Scale::Ordinal1To5),
        Criterion::new("connector_destruction", "Connector destruction", CriterionKind::Dfd, Scale::Ordinal1To5),
    ]
}

/// Everything a client needs to render the MSASM grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MsasmReport {
    pub criteria: Vec<String>,
    pub thresholds: BandThresholds,
    pub aggregates: Vec<MsasmAggregate>,
    /// Scored sets in bottleneck order.
    pub bottlenecks: Vec<ModuleSet>,
    /// Sets present in the project without any score.
    pub unscored: Vec<ModuleSet>,
}

impl Project {
    pub fn msasm_aggregates(&self) -> Result<Vec<MsasmAggregate>, MsasmError> {
        aggregate_msasm_with(&self.msasm, &self.msasm_criteria(), &self.config.band_thresholds)
    }

    pub fn msasm_report(&self) -> Result<MsasmReport, MsasmError> {
        let aggregates = self.msasm_aggregates()?;
        let bottlenecks = rank_bottlenecks(&aggregates).into_iter().map(|a| a.set).collect();
        let scored: BTreeSet<&ModuleSet> = aggregates.iter().map(|a| &a.set).collect();
        let unscored = self.module_sets().into_iter().filter(|s| !scored.contains(s)).collect();
        Ok(MsasmReport {
            criteria: self.msasm_criteria(),
            thresholds: self.config.band_thresholds,
            aggregates,
            bottlenecks,
            unscored,
        })
    }

    /// Inserts or replaces the record for its (set, criterion).
    pub fn upsert_msasm(&mut self, record: MsasmRecord) {
        match self.msasm.iter_mut().find(|r| r.set == record.set && r.criterion == record.criterion) {
            Some(existing) => *existing = record,
            None => self.msasm.push(record),
        }
        self.msasm.sort_by(|x, y| (&x.set, &x.criterion).cmp(&(&y.set, &y.criterion)));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn set(a: &str, b: &str) -> ModuleSet {
        ModuleSet::new(a, b).unwrap()
    }

    fn six() -> Vec<String> {
        default_msasm_criteria().into_iter().map(|c| c.id).collect()
    }

    fn records(s: &ModuleSet, criteria: &[String], scores: &[u8]) -> Vec<MsasmRecord> {
        criteria
            .iter()
            .zip(scores)
            .map(|(c, &v)| MsasmRecord {
                set: s.clone(),
                criterion: c.clone(),
                score: OrdinalScore::new(v).unwrap(),
                provenance: Provenance::Consensus,
                note: None,
            })
            .collect()
    }

    #[test]
    fn record_score_rules() {
        let s = set("M01", "M02");
        let r = record_score(s.clone(), "accessibility", &[3, 3]).unwrap();
        assert_eq!((r.score.value(), r.provenance), (3, Provenance::Consensus));
        assert!(r.note.is_none());
        let r = record_score(s.clone(), "accessibility", &[2, 4]).unwrap();
        assert_eq!((r.score.value(), r.provenance), (4, Provenance::ConservativeDefault));
        assert!(r.note.unwrap().contains("2-4"));
        let r = record_score(s.clone(), "accessibility", &[5]).unwrap();
        assert_eq!((r.score.value(), r.provenance), (5, Provenance::Consensus));
        assert_eq!(record_score(s.clone(), "x", &[]), Err(MsasmError::EmptyProposals));
        assert_eq!(record_score(s.clone(), "x", &[3, 6]), Err(MsasmError::OutOfRange(6)));
        assert_eq!(record_score(s, "x", &[0]), Err(MsasmError::OutOfRange(0)));
    }

    #[test]
    fn three_criterion_example() {
        let s = set("housing", "motor");
        let criteria: Vec<String> = ["accessibility", "assembly_direction", "attachment_interface_connections"]
            .map(String::from)
            .to_vec();
        let aggs = aggregate_msasm(&records(&s, &criteria, &[3, 2, 3]), &criteria).unwrap();
        assert_eq!(aggs.len(), 1);
        assert_eq!(aggs[0].total, 8);
        assert!((aggs[0].mean - 2.67).abs() < 0.01);
        assert_eq!(aggs[0].band, Band::Revise);
        assert_eq!(aggs[0].colour, Colour::Yellow);
        assert!(aggs[0].missing_criteria.is_empty());
    }

    #[test]
    fn six_criterion_examples() {
        let worst = set("housing", "motor");
        let light = set("M03", "M08");
        let mut recs = records(&worst, &six(), &[5; 6]);
        recs.extend(records(&light, &six(), &[1, 2, 2, 2, 2, 2]));
        let aggs = aggregate_msasm(&recs, &six()).unwrap();
        let by_set: BTreeMap<_, _> = aggs.iter().map(|a| (a.set.clone(), a)).collect();
        assert_eq!(by_set[&worst].total, 30);
        assert_eq!(by_set[&worst].band, Band::Critical);
        assert_eq!(by_set[&light].total, 11);
        assert!((by_set[&light].mean - 11.0 / 6.0).abs() < 1e-12);
        assert_eq!(by_set[&light].band, Band::Optimal);
        assert_eq!(rank_bottlenecks(&aggs)[0].set, worst);
    }

    #[test]
    fn missing_and_unknown() {
        let s = set("A", "B");
        let aggs = aggregate_msasm(&records(&s, &six()[..2], &[4, 4]), &six()).unwrap();
        assert_eq!(aggs[0].total, 8);
        assert_eq!(aggs[0].mean, 4.0);
        assert_eq!(aggs[0].missing_criteria, six()[2..].to_vec());

        let bogus = records(&s, &["bogus".to_string()], &[1]);
        assert!(matches!(aggregate_msasm(&bogus, &six()), Err(MsasmError::UnknownCriterion { .. })));
        let mut dup = records(&s, &six()[..1], &[1]);
        dup.extend(records(&s, &six()[..1], &[2]));
        assert!(matches!(aggregate_msasm(&dup, &six()), Err(MsasmError::DuplicateScore { .. })));
        assert!(aggregate_msasm(&[], &six()).unwrap().is_empty());
    }

    #[test]
    fn ranking_order() {
        let c = six();
        let mut recs = records(&set("A", "B"), &c, &[2, 2, 2, 2, 2, 2]);
        recs.extend(records(&set("C", "D"), &c, &[5; 6]));
        recs.extend(records(&set("E", "F"), &c, &[1, 1, 2, 2, 2, 3]));
        recs.extend(records(&set("G", "H"), &c, &[2, 2, 2, 2, 2, 2]));
        let ranked = rank_bottlenecks(&aggregate_msasm(&recs, &c).unwrap());
        let order: Vec<_> = ranked.iter().map(|a| a.set.to_string()).collect();
        assert_eq!(order, vec!["C–D", "A–B", "G–H", "E–F"]);
        assert_eq!(ranked.iter().map(|a| a.band).collect::<Vec<_>>(), vec![Band::Critical, Band::Revise, Band::Revise, Band::Optimal]);

        let single = aggregate_msasm(&records(&set("A", "B"), &c, &[3; 6]), &c).unwrap();
        assert_eq!(rank_bottlenecks(&single), single);
    }

    #[test]
    fn colours_and_thresholds() {
        assert_eq!(band_colour(Band::Optimal), Colour::Green);
        assert_eq!(band_colour(Band::Revise), Colour::Yellow);
        assert_eq!(band_colour(Band::Critical), Colour::Red);
        let t = BandThresholds::default();
        assert_eq!(t.band(1.0), Band::Optimal);
        assert_eq!(t.band(1.99), Band::Optimal);
        assert_eq!(t.band(2.0), Band::Revise);
        assert_eq!(t.band(3.49), Band::Revise);
        assert_eq!(t.band(3.5), Band::Critical);
        assert_eq!(t.band(5.0), Band::Critical);
        assert!(t.check().is_ok());
        assert!(BandThresholds { revise: 4.0, critical: 3.0 }.check().is_err());
        assert!(BandThresholds { revise: f64::NAN, critical: 3.0 }.check().is_err());
    }

    #[test]
    fn default_criteria_shape() {
        let c = default_msasm_criteria();
        assert_eq!(c.len(), 6);
        assert!(c.iter().all(|c| c.scale == Scale::Ordinal1To5));
        assert_eq!(c.iter().filter(|c| c.anchors.len() == 3).count(), 3);
    }

    #[test]
    fn upsert_replaces() {
        let mut p = Project::new("p");
        let s = set("A", "B");
        p.upsert_msasm(record_score(s.clone(), "accessibility", &[3]).unwrap());
        p.upsert_msasm(record_score(s.clone(), "accessibility", &[5]).unwrap());
        assert_eq!(p.msasm.len(), 1);
        assert_eq!(p.msasm[0].score.value(), 5);
    }

    proptest! {
        #[test]
        fn record_score_is_order_invariant_max(mut proposals in prop::collection::vec(1i64..=5, 1..8), seed in any::<u64>()) {
            let s = set("A", "B");
            let r = record_score(s.clone(), "c", &proposals).unwrap();
            prop_assert_eq!(i64::from(r.score.value()), *proposals.iter().max().unwrap());
            let n = proposals.len();
            proposals.rotate_left((seed as usize) % n);
            proposals.reverse();
            let again = record_score(s, "c", &proposals).unwrap();
            prop_assert_eq!(r, again);
        }

        #[test]
        fn raising_a_score_never_improves_band(scores in prop::collection::vec(1u8..=5, 6), idx in 0usize..6, bump in 1u8..=4) {
            let c = six();
            let s = set("A", "B");
            let before = aggregate_msasm(&records(&s, &c, &scores), &c).unwrap()[0].band;
            let mut raised = scores.clone();
            raised[idx] = (raised[idx] + bump).min(5);
            let after = aggregate_msasm(&records(&s, &c, &raised), &c).unwrap()[0].band;
            prop_assert!(after >= before);
        }

        #[test]
        fn uniform_scores_band_ignores_criteria_count(v in 1u8..=5, n in 1usize..=6) {
            let c: Vec<String> = six().into_iter().take(n).collect();
            let agg = &aggregate_msasm(&records(&set("A", "B"), &c, &vec![v; n]), &c).unwrap()[0];
            prop_assert_eq!(agg.band, BandThresholds::default().band(f64::from(v)));
            if v == 3 {
                prop_assert_eq!(agg.band, Band::Revise);
            }
        }

        #[test]
        fn totals_are_bounded(scores in prop::collection::vec(1u8..=5, 6)) {
            let c = six();
            let agg = &aggregate_msasm(&records(&set("A", "B"), &c, &scores), &c).unwrap()[0];
            prop_assert!((6..=30).contains(&agg.total));
        }
    }
}
