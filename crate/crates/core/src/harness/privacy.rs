//! Does Alice's view depend on Bob's choices?
//!
//! For each choice vector the protocol runs `trials_per_choice` times against
//! independent randomness. Features of the announced removal list and subset
//! family, as read from Alice's side of the transcript, are histogrammed and
//! every pair of choice vectors is compared with a chi-square homogeneity test.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::stats::{chi_square_homogeneity, total_variation};
use super::verdict::ALPHA;
use super::HarnessError;
use crate::adversary::LexicographicBob;
use crate::params::ProtocolParams;
use crate::protocol::{BobStrategy, ChoiceVector, HonestBob, InputBits, Message, Party, Session, Transcript, TrialRng};

/// Largest number of distinct announcements for which the whole family is
/// used as a feature.
pub const MAX_FAMILY_CATEGORIES: f64 = 2000.0;

/// How Bob fills the chosen subsets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyRule {
    /// Uniformly random, as the protocol prescribes.
    Uniform,
    /// Lowest-numbered known slots first; leaks the choice.
    Lexicographic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairTest {
    pub feature: String,
    pub choices_a: Vec<usize>,
    pub choices_b: Vec<usize>,
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
    pub total_variation: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrivacyReport {
    pub n: usize,
    pub m: usize,
    #[serde(rename = "N")]
    pub slots: usize,
    pub trials_per_choice: u64,
    pub seed: u64,
    pub rule: FamilyRule,
    pub features: Vec<String>,
    pub alpha: f64,
    pub corrected_alpha: f64,
    pub tests: Vec<PairTest>,
    pub min_p_value: f64,
    pub max_total_variation: f64,
    pub pass: bool,
}

/// Number of distinct (removal set, labelled family) announcements.
pub fn announcement_count(params: &ProtocolParams) -> f64 {
    let slots = params.slot_count();
    let x = params.removal_count();
    let s = params.subset_size();
    let ln_fact = |k: usize| (1..=k).map(|i| (i as f64).ln()).sum::<f64>();
    let ln = ln_fact(slots) - ln_fact(x) - params.bit_count() as f64 * ln_fact(s);
    ln.exp()
}

/// Alice-visible features of one run.
fn features(transcript: &Transcript, with_family: bool) -> Vec<String> {
    let mut removed = Vec::new();
    let mut family = None;
    for r in transcript.view_of(Party::Alice) {
        match &r.message {
            Message::Removal { index } => removed.push(*index),
            Message::Subsets { subsets } => family = Some(subsets.clone()),
            _ => {}
        }
    }
    // either side's abort is visible to Alice
    let aborted = transcript
        .records()
        .iter()
        .any(|r| matches!(r.message, Message::Abort { .. }));
    let slot0 = if aborted {
        "abort".to_string()
    } else if removed.contains(&0) {
        "removed".to_string()
    } else {
        family
            .as_ref()
            .and_then(|f| f.iter().position(|s| s.contains(&0)))
            .map_or("none".to_string(), |k| (k + 1).to_string())
    };
    let mut out = vec![slot0];
    if with_family {
        out.push(match family {
            Some(f) if !aborted => format!("{removed:?}|{f:?}"),
            _ => "abort".to_string(),
        });
    }
    out
}

/// Runs the test over every choice vector of `params`.
pub fn privacy_independence_test(
    params: &ProtocolParams,
    trials_per_choice: u64,
    seed: u64,
    rule: FamilyRule,
) -> Result<PrivacyReport, HarnessError> {
    if trials_per_choice == 0 {
        return Err(HarnessError::Config("trials per choice must be at least 1".into()));
    }
    let bob: &dyn BobStrategy = match rule {
        FamilyRule::Uniform => &HonestBob,
        FamilyRule::Lexicographic => &LexicographicBob,
    };
    let with_family = announcement_count(params) <= MAX_FAMILY_CATEGORIES;
    let mut feature_names = vec!["slot0_label".to_string()];
    if with_family {
        feature_names.push("announced_family".to_string());
    }
    let all = ChoiceVector::all(params);

    // histograms[choice][feature]: category -> count
    let mut histograms: Vec<Vec<BTreeMap<String, u64>>> = Vec::with_capacity(all.len());
    for (ci, choices) in all.iter().enumerate() {
        let offset = ci as u64 * trials_per_choice;
        let rows: Vec<Vec<String>> = (0..trials_per_choice)
            .into_par_iter()
            .map(|t| {
                let mut rngs = TrialRng::new(seed, offset + t);
                let inputs = InputBits::random(params, &mut rngs.inputs);
                let exec = Session::new(params, &inputs, choices, bob).run(rngs)?;
                Ok(features(&exec.outcome.transcript, with_family))
            })
            .collect::<Result<_, HarnessError>>()?;
        let mut per_feature = vec![BTreeMap::new(); feature_names.len()];
        for row in rows {
            for (f, value) in row.into_iter().enumerate() {
                *per_feature[f].entry(value).or_insert(0u64) += 1;
            }
        }
        histograms.push(per_feature);
    }

    let pairs = all.len() * (all.len() - 1) / 2;
    let corrected_alpha = ALPHA / (pairs * feature_names.len()).max(1) as f64;
    let mut tests = Vec::new();
    for a in 0..all.len() {
        for b in a + 1..all.len() {
            for (f, name) in feature_names.iter().enumerate() {
                let (ha, hb) = (&histograms[a][f], &histograms[b][f]);
                let keys: BTreeSet<&String> = ha.keys().chain(hb.keys()).collect();
                let ca: Vec<u64> = keys.iter().map(|k| ha.get(*k).copied().unwrap_or(0)).collect();
                let cb: Vec<u64> = keys.iter().map(|k| hb.get(*k).copied().unwrap_or(0)).collect();
                let chi = chi_square_homogeneity(&ca, &cb);
                tests.push(PairTest {
                    feature: name.clone(),
                    choices_a: all[a].as_slice().to_vec(),
                    choices_b: all[b].as_slice().to_vec(),
                    statistic: chi.statistic,
                    dof: chi.dof,
                    p_value: chi.p_value,
                    total_variation: total_variation(&ca, &cb),
                    pass: chi.p_value > corrected_alpha,
                });
            }
        }
    }
    let min_p_value = tests.iter().map(|t| t.p_value).fold(1.0, f64::min);
    let max_total_variation = tests.iter().map(|t| t.total_variation).fold(0.0, f64::max);
    Ok(PrivacyReport {
        n: params.bit_count(),
        m: params.choice_count(),
        slots: params.slot_count(),
        trials_per_choice,
        seed,
        rule,
        features: feature_names,
        alpha: ALPHA,
        corrected_alpha,
        pass: tests.iter().all(|t| t.pass),
        tests,
        min_p_value,
        max_total_variation,
    })
}
