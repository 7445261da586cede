//! Cell-match counting: decides whether a detection is consistent with the
//! predicted scene by tallying predicted class labels under its footprint.
//!
//! The default rule asks only that the plurality label be compatible with
//! the detected class. Strict-majority mode additionally requires more than
//! half of the footprint cells to match.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::align::AlignedDetection;
use crate::bev::ObjectClass;
use crate::predict::PredictedCellMap;

/// Outcome for one detection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    Benign,
    Spoofed,
    /// No basis for a decision: empty footprint or insufficient history.
    Unverifiable,
}

impl Decision {
    pub fn as_str(&self) -> &'static str {
        match self {
            Decision::Benign => "benign",
            Decision::Spoofed => "spoofed",
            Decision::Unverifiable => "unverifiable",
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CmcsConfig {
    /// Require a strict majority of matching cells instead of a compatible
    /// plurality.
    pub strict_majority: bool,
    /// Treat a predicted `Others` label as compatible with any detected
    /// class.
    pub others_is_wildcard: bool,
}

/// The verdict for one detection, with the evidence that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct Verdict {
    pub detection_id: String,
    pub decision: Decision,
    /// Winning class among the footprint's predicted labels.
    pub plurality_class: ObjectClass,
    /// Tally of predicted labels under the footprint; zero-count classes are
    /// omitted. Counts always sum to the footprint size.
    pub class_counts: BTreeMap<ObjectClass, usize>,
    /// Fraction of footprint cells whose label is compatible with the
    /// detected class; 0 for an empty footprint.
    pub match_fraction: f64,
}

/// Tie precedence for the plurality label, most-preferred first. On equal
/// counts the earlier class wins, so ambiguous evidence errs toward
/// "nothing was predicted here".
const TIE_PRECEDENCE: [ObjectClass; 5] = [
    ObjectClass::Background,
    ObjectClass::Others,
    ObjectClass::Vehicle,
    ObjectClass::Pedestrian,
    ObjectClass::Bike,
];

/// Whether a predicted cell label supports a detection of `detected` class.
/// Exact match always does; `others_is_wildcard` additionally lets a
/// predicted `Others` support anything.
pub fn class_compatible(
    detected: ObjectClass,
    predicted: ObjectClass,
    others_is_wildcard: bool,
) -> bool {
    if predicted == detected {
        return true;
    }
    others_is_wildcard && predicted == ObjectClass::Others
}

/// Tallies predicted labels under the detection's footprint and decides.
///
/// An empty footprint yields `Unverifiable` with an empty tally. Otherwise
/// the decision is `Benign` when the plurality label is compatible with the
/// detected class (plus, in strict mode, `match_fraction > 0.5`) and
/// `Spoofed` when it is not.
pub fn cmcs(aligned: &AlignedDetection, map: &PredictedCellMap, config: &CmcsConfig) -> Verdict {
    let mut class_counts: BTreeMap<ObjectClass, usize> = BTreeMap::new();
    for idx in &aligned.footprint {
        *class_counts.entry(map.label(*idx)).or_insert(0) += 1;
    }

    let total = aligned.footprint.len();
    if total == 0 {
        return Verdict {
            detection_id: aligned.detection.detection_id.clone(),
            decision: Decision::Unverifiable,
            plurality_class: ObjectClass::Background,
            class_counts,
            match_fraction: 0.0,
        };
    }

    // First strictly-greater count wins, so on ties the class listed
    // earlier in TIE_PRECEDENCE prevails.
    let mut plurality_class = TIE_PRECEDENCE[0];
    let mut plurality_count = class_counts.get(&plurality_class).copied().unwrap_or(0);
    for c in &TIE_PRECEDENCE[1..] {
        let count = class_counts.get(c).copied().unwrap_or(0);
        if count > plurality_count {
            plurality_class = *c;
            plurality_count = count;
        }
    }

    let matched: usize = class_counts
        .iter()
        .filter(|(class, _)| {
            class_compatible(aligned.detection.class, **class, config.others_is_wildcard)
        })
        .map(|(_, n)| n)
        .sum();
    let match_fraction = matched as f64 / total as f64;

    let plurality_ok = class_compatible(
        aligned.detection.class,
        plurality_class,
        config.others_is_wildcard,
    );
    let benign = if config.strict_majority {
        plurality_ok && match_fraction > 0.5
    } else {
        plurality_ok
    };

    Verdict {
        detection_id: aligned.detection.detection_id.clone(),
        decision: if benign {
            Decision::Benign
        } else {
            Decision::Spoofed
        },
        plurality_class,
        class_counts,
        match_fraction,
    }
}

/// Runs [`cmcs`] over every aligned detection, preserving order.
pub fn check_frame(
    aligned: &[AlignedDetection],
    map: &PredictedCellMap,
    config: &CmcsConfig,
) -> Vec<Verdict> {
    aligned.iter().map(|a| cmcs(a, map, config)).collect()
}
