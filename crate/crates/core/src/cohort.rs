//! Cohort labeling: locals, staying migrants, leaving migrants, and
//! exclusions, from birthplace and per-week activity patterns.

use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::model::{day_index, CallRecord, CohortLabel, TimeWindow, UserId, UserProfile};

/// Windowing of the observation period: a warm-up prefix that screens
/// out users already present, three labeled weeks, and an excluded tail.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CohortConfig {
    pub warmup_days: u32,
    pub week1: TimeWindow,
    pub week2: TimeWindow,
    pub week3: TimeWindow,
    pub tail_excluded_days: u32,
}

impl Default for CohortConfig {
    fn default() -> Self {
        CohortConfig {
            warmup_days: 4,
            week1: TimeWindow::new(4, 11),
            week2: TimeWindow::new(11, 18),
            week3: TimeWindow::new(18, 25),
            tail_excluded_days: 5,
        }
    }
}

impl CohortConfig {
    /// Windows must be disjoint, ordered, and after the warm-up.
    pub fn validate(&self) -> Result<(), String> {
        if self.week1.start_day < self.warmup_days {
            return Err("week1 starts inside the warm-up period".into());
        }
        if self.week2.start_day < self.week1.end_day || self.week3.start_day < self.week2.end_day {
            return Err("cohort weeks must be ordered and disjoint".into());
        }
        Ok(())
    }

    /// Last day index (exclusive) covered by labeling.
    pub fn labeled_end_day(&self) -> u32 {
        self.week3.end_day
    }
}

/// Days (as day indices) on which each user appears as caller or callee.
pub fn activity_days(records: &[CallRecord], epoch: i64) -> HashMap<UserId, BTreeSet<u32>> {
    let mut days: HashMap<UserId, BTreeSet<u32>> = HashMap::new();
    for r in records {
        if let Ok(d) = day_index(r.start, epoch) {
            days.entry(r.caller).or_default().insert(d);
            days.entry(r.callee).or_default().insert(d);
        }
    }
    days
}

/// Activity days of a single user.
pub fn activity_days_of(records: &[CallRecord], v: UserId, epoch: i64) -> BTreeSet<u32> {
    let mut days = BTreeSet::new();
    for r in records {
        if r.caller == v || r.callee == v {
            if let Ok(d) = day_index(r.start, epoch) {
                days.insert(d);
            }
        }
    }
    days
}

/// Outcome of a labeling pass.
#[derive(Debug, Clone)]
pub struct LabelResult {
    pub labels: HashMap<UserId, CohortLabel>,
    /// Users with call activity but no profile row.
    pub unprofiled_active: usize,
}

fn active_in(days: &BTreeSet<u32>, w: TimeWindow) -> bool {
    days.range(w.start_day..w.end_day).next().is_some()
}

/// Labels one activity pattern given locality. The rules:
/// locals always get `Local`; non-locals active during warm-up are
/// `Excluded` (not new arrivals); new migrants active in all three weeks
/// are `StayingMigrant`; active in weeks 1-2 and silent through week 3
/// are `LeavingMigrant`; everything else is `Excluded`.
pub fn label_activity(is_local: bool, days: &BTreeSet<u32>, cfg: &CohortConfig) -> CohortLabel {
    if is_local {
        return CohortLabel::Local;
    }
    if days.range(0..cfg.warmup_days).next().is_some() {
        return CohortLabel::Excluded;
    }
    let w1 = active_in(days, cfg.week1);
    let w2 = active_in(days, cfg.week2);
    let w3 = active_in(days, cfg.week3);
    match (w1, w2, w3) {
        (true, true, true) => CohortLabel::StayingMigrant,
        (true, true, false) => CohortLabel::LeavingMigrant,
        _ => CohortLabel::Excluded,
    }
}

/// Assigns every profiled user exactly one cohort label.
pub fn label_users(
    records: &[CallRecord],
    profiles: &HashMap<UserId, UserProfile>,
    cfg: &CohortConfig,
    epoch: i64,
) -> LabelResult {
    let days = activity_days(records, epoch);
    let empty = BTreeSet::new();
    let mut labels = HashMap::with_capacity(profiles.len());
    for (user, profile) in profiles {
        let user_days = days.get(user).unwrap_or(&empty);
        labels.insert(*user, label_activity(profile.is_local, user_days, cfg));
    }
    let unprofiled_active = days.keys().filter(|u| !profiles.contains_key(u)).count();
    LabelResult {
        labels,
        unprofiled_active,
    }
}
