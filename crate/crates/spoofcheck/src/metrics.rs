//! Evaluation over verdict logs: cell match ratios, attack success and
//! detection rates, and a wall-clock benchmark of the check pipeline.
//!
//! Rate conventions: a rate with a zero denominator reports 0.0, and the
//! detection success rate additionally carries a `degenerate` flag so a run
//! with no successful injections is never mistaken for one where every
//! injection was caught.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::align::{Provenance, Region};
use crate::bev::ObjectClass;
use crate::cmcs::{class_compatible, CmcsConfig, Decision};
use crate::error::{Error, Result};
use crate::framelog::FrameRecord;
use crate::pipeline::{run_check, CheckSettings, FrameVerdicts};

/// Formats `matched/total` with a percentage, e.g. `9721/11500(84.53%)`.
/// A zero denominator renders as `n/a`.
pub fn ratio_cell(matched: u64, total: u64) -> String {
    if total == 0 {
        return "n/a".into();
    }
    format!(
        "{matched}/{total}({:.2}%)",
        matched as f64 / total as f64 * 100.0
    )
}

fn rate(numerator: u64, denominator: u64) -> f64 {
    if denominator == 0 {
        0.0
    } else {
        numerator as f64 / denominator as f64
    }
}

/// Attack ground truth pulled out of a log's attack records, keyed by
/// (scene, frame).
#[derive(Debug, Clone, Default)]
pub struct AttackBookkeeping {
    frames: BTreeMap<(String, u64), FrameAttack>,
}

#[derive(Debug, Clone)]
pub struct FrameAttack {
    pub target_class: ObjectClass,
    pub attempted: u64,
    pub injected_ids: BTreeSet<String>,
}

impl AttackBookkeeping {
    pub fn from_log(records: &[FrameRecord]) -> Self {
        let mut frames = BTreeMap::new();
        for r in records {
            if let Some(attack) = &r.attack {
                frames.insert(
                    (r.scene_id.clone(), r.frame_index),
                    FrameAttack {
                        target_class: attack.target_class,
                        attempted: u64::from(attack.attempted),
                        injected_ids: attack.injected_ids.iter().cloned().collect(),
                    },
                );
            }
        }
        AttackBookkeeping { frames }
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn frame(&self, scene: &str, frame_index: u64) -> Option<&FrameAttack> {
        self.frames.get(&(scene.to_string(), frame_index))
    }

    pub fn is_ghost(&self, scene: &str, frame_index: u64, detection_id: &str) -> bool {
        self.frame(scene, frame_index)
            .is_some_and(|f| f.injected_ids.contains(detection_id))
    }

    fn iter(&self) -> impl Iterator<Item = (&(String, u64), &FrameAttack)> {
        self.frames.iter()
    }
}

/// Cell agreement between detections and the predicted map for one
/// (class, region) bucket, over genuine verifiable detections only.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MatchRatioRow {
    pub class: ObjectClass,
    pub region: Region,
    pub matched_cells: u64,
    pub total_cells: u64,
    pub match_ratio: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MatchRatioReport {
    pub rows: Vec<MatchRatioRow>,
}

impl MatchRatioReport {
    pub fn row(&self, class: ObjectClass, region: Region) -> Option<&MatchRatioRow> {
        self.rows
            .iter()
            .find(|r| r.class == class && r.region == region)
    }

    /// One line per class, one `matched/total(pct)` cell per region.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("class,front_near,front_far,other\n");
        let classes: BTreeSet<ObjectClass> = self.rows.iter().map(|r| r.class).collect();
        for class in classes {
            out.push_str(class.as_str());
            for region in [Region::FrontNear, Region::FrontFar, Region::Other] {
                out.push(',');
                match self.row(class, region) {
                    Some(r) => out.push_str(&ratio_cell(r.matched_cells, r.total_cells)),
                    None => out.push_str("n/a"),
                }
            }
            out.push('\n');
        }
        out
    }
}

/// Tallies per-cell class agreement for genuine, verifiable detections,
/// bucketed by (class, region). Injected ghosts and `Unverifiable` verdicts
/// are excluded: ghosts would poison the genuine-consistency statistic and
/// unverifiable detections contribute no cells.
pub fn match_ratio(
    frames: &[FrameVerdicts],
    book: &AttackBookkeeping,
    cmcs: &CmcsConfig,
) -> MatchRatioReport {
    let mut buckets: BTreeMap<(ObjectClass, Region), (u64, u64)> = BTreeMap::new();
    for frame in frames {
        for v in &frame.verdicts {
            let ghost = v.provenance == Provenance::Injected
                || book.is_ghost(&frame.scene_id, frame.frame_index, &v.detection_id);
            if ghost || v.decision == Decision::Unverifiable {
                continue;
            }
            let mut matched = 0u64;
            let mut total = 0u64;
            for (&predicted, &count) in &v.class_counts {
                total += count as u64;
                if class_compatible(v.class, predicted, cmcs.others_is_wildcard) {
                    matched += count as u64;
                }
            }
            let entry = buckets.entry((v.class, v.region)).or_insert((0, 0));
            entry.0 += matched;
            entry.1 += total;
        }
    }
    MatchRatioReport {
        rows: buckets
            .into_iter()
            .map(|((class, region), (matched, total))| MatchRatioRow {
                class,
                region,
                matched_cells: matched,
                total_cells: total,
                match_ratio: rate(matched, total),
            })
            .collect(),
    }
}

/// Attack outcome counts and rates for one class bucket (or `overall`).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AttackEvalRow {
    pub label: String,
    /// Injection attempts made by the modeled attacker.
    pub ghosts_attempted: u64,
    /// Attempts that produced a ghost detection.
    pub ghosts_injected: u64,
    /// Attack success rate: injected / attempted.
    pub asr: f64,
    /// Injected ghosts the checker flagged as spoofed.
    pub ghosts_identified: u64,
    /// Detection success rate: identified / injected.
    pub dsr: f64,
    /// True when no injection succeeded, so the DSR denominator is zero.
    pub dsr_degenerate: bool,
    /// Injected ghosts the checker could not judge (no history or empty
    /// footprint); excluded from `recall_spoofed`.
    pub ghosts_unverifiable: u64,
    /// Genuine detections that received a benign-or-spoofed verdict.
    pub genuine_verifiable: u64,
    pub genuine_benign: u64,
    /// Genuine detections wrongly flagged as spoofed.
    pub false_alarms: u64,
    pub genuine_unverifiable: u64,
    /// identified / (injected - unverifiable ghosts).
    pub recall_spoofed: f64,
    /// benign / verifiable genuine.
    pub recall_benign: f64,
    /// Mean of the two recalls.
    pub macro_recall: f64,
    /// identified / all spoofed verdicts (ghost or genuine).
    pub precision_spoofed: f64,
    /// false alarms / verifiable genuine.
    pub false_alarm_rate: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AttackEvalReport {
    pub rows: Vec<AttackEvalRow>,
}

impl AttackEvalReport {
    pub fn row(&self, label: &str) -> Option<&AttackEvalRow> {
        self.rows.iter().find(|r| r.label == label)
    }

    pub fn overall(&self) -> &AttackEvalRow {
        self.row("overall")
            .expect("report always has an overall row")
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "label,ghosts_attempted,ghosts_injected,asr,ghosts_identified,dsr,\
             ghosts_unverifiable,genuine_verifiable,genuine_benign,false_alarms,\
             genuine_unverifiable,recall_spoofed,recall_benign,macro_recall,\
             precision_spoofed,false_alarm_rate\n",
        );
        for r in &self.rows {
            let dsr = if r.dsr_degenerate {
                "n/a".to_string()
            } else {
                ratio_cell(r.ghosts_identified, r.ghosts_injected)
            };
            let verifiable_ghosts = r.ghosts_injected - r.ghosts_unverifiable;
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{},{},{},{},{:.4},{},{}\n",
                r.label,
                r.ghosts_attempted,
                r.ghosts_injected,
                ratio_cell(r.ghosts_injected, r.ghosts_attempted),
                r.ghosts_identified,
                dsr,
                r.ghosts_unverifiable,
                r.genuine_verifiable,
                r.genuine_benign,
                r.false_alarms,
                r.genuine_unverifiable,
                ratio_cell(r.ghosts_identified, verifiable_ghosts),
                ratio_cell(r.genuine_benign, r.genuine_verifiable),
                r.macro_recall,
                ratio_cell(r.ghosts_identified, r.ghosts_identified + r.false_alarms),
                ratio_cell(r.false_alarms, r.genuine_verifiable),
            ));
        }
        out
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct EvalAcc {
    attempted: u64,
    injected: u64,
    identified: u64,
    ghost_unverifiable: u64,
    genuine_verifiable: u64,
    genuine_benign: u64,
    false_alarms: u64,
    genuine_unverifiable: u64,
}

impl EvalAcc {
    fn add(&mut self, other: &EvalAcc) {
        self.attempted += other.attempted;
        self.injected += other.injected;
        self.identified += other.identified;
        self.ghost_unverifiable += other.ghost_unverifiable;
        self.genuine_verifiable += other.genuine_verifiable;
        self.genuine_benign += other.genuine_benign;
        self.false_alarms += other.false_alarms;
        self.genuine_unverifiable += other.genuine_unverifiable;
    }

    fn into_row(self, label: String) -> AttackEvalRow {
        let verifiable_ghosts = self.injected - self.ghost_unverifiable;
        let recall_spoofed = rate(self.identified, verifiable_ghosts);
        let recall_benign = rate(self.genuine_benign, self.genuine_verifiable);
        AttackEvalRow {
            label,
            ghosts_attempted: self.attempted,
            ghosts_injected: self.injected,
            asr: rate(self.injected, self.attempted),
            ghosts_identified: self.identified,
            dsr: rate(self.identified, self.injected),
            dsr_degenerate: self.injected == 0,
            ghosts_unverifiable: self.ghost_unverifiable,
            genuine_verifiable: self.genuine_verifiable,
            genuine_benign: self.genuine_benign,
            false_alarms: self.false_alarms,
            genuine_unverifiable: self.genuine_unverifiable,
            recall_spoofed,
            recall_benign,
            macro_recall: (recall_spoofed + recall_benign) / 2.0,
            precision_spoofed: rate(self.identified, self.identified + self.false_alarms),
            false_alarm_rate: rate(self.false_alarms, self.genuine_verifiable),
        }
    }
}

/// Scores a verdict log against attack ground truth. Produces one row per
/// class that appears (as attack target or detection class) plus an
/// `overall` row.
///
/// Fails loudly if the two logs disagree: an attacked frame with no verdict
/// line, a ghost id with no verdict row, or an injected-provenance verdict
/// the attack records know nothing about all mean the verdicts were not
/// produced from this log.
pub fn attack_eval(frames: &[FrameVerdicts], book: &AttackBookkeeping) -> Result<AttackEvalReport> {
    let mut frame_map: BTreeMap<(&str, u64), &FrameVerdicts> = BTreeMap::new();
    for f in frames {
        frame_map.insert((f.scene_id.as_str(), f.frame_index), f);
    }

    for ((scene, frame_index), attack) in book.iter() {
        let Some(verdicts) = frame_map.get(&(scene.as_str(), *frame_index)) else {
            return Err(Error::Data(format!(
                "attacked frame {frame_index} of scene '{scene}' has no verdicts; \
                 was the check run on different frames?"
            )));
        };
        for id in &attack.injected_ids {
            if !verdicts.verdicts.iter().any(|v| &v.detection_id == id) {
                return Err(Error::Data(format!(
                    "ghost '{id}' in frame {frame_index} of scene '{scene}' has no verdict row"
                )));
            }
        }
    }

    let mut per_class: BTreeMap<ObjectClass, EvalAcc> = BTreeMap::new();
    for &(scene, frame_index) in frame_map.keys() {
        if let Some(attack) = book.frame(scene, frame_index) {
            let acc = per_class.entry(attack.target_class).or_default();
            acc.attempted += attack.attempted;
            acc.injected += attack.injected_ids.len() as u64;
        }
    }

    for frame in frames {
        for v in &frame.verdicts {
            let in_book = book.is_ghost(&frame.scene_id, frame.frame_index, &v.detection_id);
            if v.provenance == Provenance::Injected && !in_book {
                return Err(Error::Data(format!(
                    "verdict for '{}' in frame {} of scene '{}' has injected provenance \
                     but no matching attack record",
                    v.detection_id, frame.frame_index, frame.scene_id
                )));
            }
            let acc = per_class.entry(v.class).or_default();
            if in_book {
                match v.decision {
                    Decision::Spoofed => acc.identified += 1,
                    Decision::Unverifiable => acc.ghost_unverifiable += 1,
                    Decision::Benign => {}
                }
            } else {
                match v.decision {
                    Decision::Benign => {
                        acc.genuine_verifiable += 1;
                        acc.genuine_benign += 1;
                    }
                    Decision::Spoofed => {
                        acc.genuine_verifiable += 1;
                        acc.false_alarms += 1;
                    }
                    Decision::Unverifiable => acc.genuine_unverifiable += 1,
                }
            }
        }
    }

    let mut overall = EvalAcc::default();
    let mut rows = Vec::new();
    for (class, acc) in &per_class {
        overall.add(acc);
        rows.push(acc.into_row(class.as_str().to_string()));
    }
    rows.push(overall.into_row("overall".to_string()));
    Ok(AttackEvalReport { rows })
}

/// Mean and population standard deviation, seconds.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Stat {
    pub mean_s: f64,
    pub std_s: f64,
}

impl Stat {
    fn from_samples(samples: &[f64]) -> Stat {
        let n = samples.len() as f64;
        let mean = samples.iter().sum::<f64>() / n;
        let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        Stat {
            mean_s: mean,
            std_s: var.sqrt(),
        }
    }
}

/// Wall-clock profile of the check pipeline over repeated runs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RuntimeReport {
    pub prediction: Stat,
    pub alignment: Stat,
    pub detection: Stat,
    pub total: Stat,
    /// 1 / mean total per-frame cost.
    pub frames_per_second: f64,
    /// Measured repetitions (after warm-up).
    pub repetitions: usize,
    /// Warm-up repetitions discarded before measuring.
    pub warmup: usize,
    /// Fully processed frames contributing samples, per repetition.
    pub frames_per_repetition: usize,
}

impl RuntimeReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("stage,mean_ms,std_ms,fps\n");
        for (name, stat, fps) in [
            ("prediction", self.prediction, None),
            ("alignment", self.alignment, None),
            ("detection", self.detection, None),
            ("total", self.total, Some(self.frames_per_second)),
        ] {
            out.push_str(&format!(
                "{name},{:.4},{:.4},{}\n",
                stat.mean_s * 1e3,
                stat.std_s * 1e3,
                fps.map(|f| format!("{f:.1}")).unwrap_or_default(),
            ));
        }
        out
    }
}

/// Warm-up repetitions discarded by [`benchmark`].
pub const BENCH_WARMUP: usize = 3;

/// Runs the checker `repetitions` times over `records` (sequentially, so
/// thread scheduling cannot pollute per-frame numbers) and aggregates stage
/// timings across all fully processed frames of the measured repetitions.
pub fn benchmark(
    records: &[FrameRecord],
    settings: &CheckSettings,
    repetitions: usize,
) -> Result<RuntimeReport> {
    if repetitions < 10 {
        return Err(Error::Config(format!(
            "benchmark needs at least 10 repetitions for stable statistics, got {repetitions}"
        )));
    }
    let mut prediction = Vec::new();
    let mut alignment = Vec::new();
    let mut detection = Vec::new();
    let mut total = Vec::new();
    for rep in 0..repetitions {
        let results = run_check(records, settings, 1)?;
        if rep < BENCH_WARMUP {
            continue;
        }
        for scene in &results {
            for t in &scene.timings {
                prediction.push(t.prediction_s);
                alignment.push(t.alignment_s);
                detection.push(t.detection_s);
                total.push(t.total_s);
            }
        }
    }
    if total.is_empty() {
        return Err(Error::Data(
            "no frame reached the full pipeline; the log is shorter than the history depth".into(),
        ));
    }
    let measured = repetitions - BENCH_WARMUP;
    let total_stat = Stat::from_samples(&total);
    Ok(RuntimeReport {
        prediction: Stat::from_samples(&prediction),
        alignment: Stat::from_samples(&alignment),
        detection: Stat::from_samples(&detection),
        total: total_stat,
        frames_per_second: 1.0 / total_stat.mean_s,
        repetitions: measured,
        warmup: BENCH_WARMUP,
        frames_per_repetition: total.len() / measured,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::framelog::AttackRecord;
    use crate::pipeline::{collect_verdicts, VerdictRecord};
    use crate::sim::{
        generate_scene, inject_attack, AttackConfig, DetectorStubConfig, SceneConfig,
    };
    use crate::tracks::TrackStoreConfig;

    fn scene_config() -> SceneConfig {
        SceneConfig {
            scene_id: "m".into(),
            seed: 11,
            duration_s: 15.0,
            history_k: 4,
            // Every object visible from frame 0: objects entering detection
            // range mid-scene have no history yet and land on background
            // cells, which is correct checker behavior but would make exact
            // agreement impossible to assert here.
            detection_range_m: 1000.0,
            detector: DetectorStubConfig {
                position_noise_m: 0.0,
                yaw_noise_rad: 0.0,
                drop_probability: 0.0,
            },
            ..SceneConfig::default()
        }
    }

    fn settings() -> CheckSettings {
        CheckSettings {
            tracking: TrackStoreConfig {
                history_k: 4,
                ..TrackStoreConfig::default()
            },
            ..CheckSettings::default()
        }
    }

    fn checked(records: &[FrameRecord]) -> Vec<FrameVerdicts> {
        collect_verdicts(&run_check(records, &settings(), 1).unwrap())
    }

    #[test]
    fn ratio_cell_formats_paper_style() {
        assert_eq!(ratio_cell(9721, 11500), "9721/11500(84.53%)");
        assert_eq!(ratio_cell(353, 362), "353/362(97.51%)");
        assert_eq!(ratio_cell(348, 353), "348/353(98.58%)");
        assert_eq!(ratio_cell(0, 0), "n/a");
        assert_eq!(ratio_cell(3, 3), "3/3(100.00%)");
    }

    #[test]
    fn noiseless_scene_has_perfect_vehicle_match_ratio() {
        let records = generate_scene(&scene_config()).unwrap();
        let frames = checked(&records);
        let report = match_ratio(
            &frames,
            &AttackBookkeeping::default(),
            &CmcsConfig::default(),
        );
        let row = report
            .row(ObjectClass::Vehicle, Region::Other)
            .expect("vehicles flow past the ego, so the other region is populated");
        assert!(row.total_cells > 1000, "only {} cells", row.total_cells);
        assert_eq!(
            row.matched_cells, row.total_cells,
            "noiseless constant-velocity prediction must agree exactly"
        );
    }

    #[test]
    fn ghosts_and_unverifiable_are_excluded_from_match_ratio() {
        let records = generate_scene(&scene_config()).unwrap();
        let attacked = inject_attack(&records, &AttackConfig::default(), 5).unwrap();
        let frames = checked(&attacked);
        let book = AttackBookkeeping::from_log(&attacked);
        assert!(!book.is_empty());
        let report = match_ratio(&frames, &book, &CmcsConfig::default());
        for row in &report.rows {
            assert_eq!(
                row.matched_cells, row.total_cells,
                "ghost cells leaked into the {}/{} bucket",
                row.class, row.region
            );
        }
    }

    #[test]
    fn attack_eval_scores_attacked_scene() {
        let records = generate_scene(&scene_config()).unwrap();
        let attacked = inject_attack(&records, &AttackConfig::default(), 5).unwrap();
        let frames = checked(&attacked);
        let book = AttackBookkeeping::from_log(&attacked);
        let report = attack_eval(&frames, &book).unwrap();

        let vehicle = report.row("vehicle").unwrap();
        assert!(vehicle.ghosts_attempted > 0);
        assert_eq!(vehicle.ghosts_identified, vehicle.ghosts_injected);
        assert!(!vehicle.dsr_degenerate);
        assert_eq!(vehicle.dsr, 1.0);
        assert_eq!(vehicle.recall_spoofed, 1.0);
        assert_eq!(vehicle.false_alarms, 0);
        assert_eq!(vehicle.recall_benign, 1.0);

        let overall = report.overall();
        assert_eq!(overall.ghosts_attempted, vehicle.ghosts_attempted);
        assert_eq!(overall.macro_recall, 1.0);
    }

    #[test]
    fn eval_rejects_verdicts_missing_an_attacked_frame() {
        let records = generate_scene(&scene_config()).unwrap();
        let attacked = inject_attack(&records, &AttackConfig::default(), 5).unwrap();
        let mut frames = checked(&attacked);
        let book = AttackBookkeeping::from_log(&attacked);
        let victim = frames
            .iter()
            .position(|f| book.frame(&f.scene_id, f.frame_index).is_some())
            .unwrap();
        frames.remove(victim);
        let err = attack_eval(&frames, &book).unwrap_err();
        assert!(matches!(err, Error::Data(_)));
    }

    #[test]
    fn eval_rejects_injected_provenance_unknown_to_the_book() {
        let records = generate_scene(&scene_config()).unwrap();
        let attacked = inject_attack(&records, &AttackConfig::default(), 5).unwrap();
        let frames = checked(&attacked);
        let err = attack_eval(&frames, &AttackBookkeeping::default()).unwrap_err();
        assert!(matches!(err, Error::Data(_)));
    }

    #[test]
    fn synthetic_counts_produce_pinned_rate_strings() {
        // 362 attempts, 353 successful, 348 identified, 5 missed.
        let mut frames = Vec::new();
        let mut book_records = Vec::new();
        for i in 0..362u64 {
            let success = i < 353;
            let identified = i < 348;
            let id = format!("ghost-x-{i:05}");
            let injected_ids = if success { vec![id.clone()] } else { vec![] };
            book_records.push(FrameRecord {
                schema_version: crate::framelog::SCHEMA_VERSION,
                scene_id: "s".into(),
                frame_index: i,
                is_key_frame: true,
                timestamp: i as f64 * 0.5,
                ego: crate::framelog::PoseRecord {
                    x: 0.0,
                    y: 0.0,
                    yaw: 0.0,
                },
                ground_truth: vec![],
                detections: vec![],
                attack: Some(AttackRecord {
                    target_class: ObjectClass::Vehicle,
                    attempted: 1,
                    injected_ids,
                    point_budget: 200,
                    extra: Default::default(),
                }),
                extra: Default::default(),
            });

            let verdicts = if success {
                vec![VerdictRecord {
                    detection_id: id,
                    class: ObjectClass::Vehicle,
                    region: Region::FrontNear,
                    provenance: Provenance::Injected,
                    decision: if identified {
                        Decision::Spoofed
                    } else {
                        Decision::Benign
                    },
                    plurality_class: ObjectClass::Background,
                    class_counts: Default::default(),
                    match_fraction: 0.0,
                }]
            } else {
                vec![]
            };
            frames.push(FrameVerdicts {
                schema_version: crate::framelog::SCHEMA_VERSION,
                scene_id: "s".into(),
                frame_index: i,
                timestamp: i as f64 * 0.5,
                verdicts,
            });
        }
        let book = AttackBookkeeping::from_log(&book_records);
        let report = attack_eval(&frames, &book).unwrap();
        let overall = report.overall();
        assert_eq!(overall.ghosts_attempted, 362);
        assert_eq!(overall.ghosts_injected, 353);
        assert_eq!(overall.ghosts_identified, 348);
        let csv = report.to_csv();
        assert!(csv.contains("353/362(97.51%)"), "csv was:\n{csv}");
        assert!(csv.contains("348/353(98.58%)"), "csv was:\n{csv}");
    }

    #[test]
    fn benchmark_rejects_too_few_repetitions() {
        let records = generate_scene(&scene_config()).unwrap();
        let err = benchmark(&records, &settings(), 9).unwrap_err();
        assert!(err.is_config());
    }

    #[test]
    fn benchmark_reports_all_stages() {
        let records = generate_scene(&scene_config()).unwrap();
        let report = benchmark(&records, &settings(), 10).unwrap();
        assert_eq!(report.repetitions, 10 - BENCH_WARMUP);
        assert!(report.frames_per_repetition > 0);
        assert!(report.total.mean_s > 0.0);
        assert!(report.frames_per_second > 0.0);
        assert!(
            report.prediction.mean_s + report.alignment.mean_s + report.detection.mean_s
                <= report.total.mean_s * 1.001
        );
        let csv = report.to_csv();
        assert!(csv.starts_with("stage,mean_ms,std_ms,fps\n"));
        assert_eq!(csv.lines().count(), 5);
    }
}
