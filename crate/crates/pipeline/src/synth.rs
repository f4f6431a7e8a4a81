//! Synthetic CDR generator: locals, staying migrants, and leaving
//! migrants with configurable call rates, contact-pool growth,
//! province homophily, triadic closure, mobility, and home placement
//! over a radial price field. Deterministic given the seed.

use std::collections::HashSet;
use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use cdrflow_core::geofeat::Estate;
use cdrflow_core::learner::child_seed;
use cdrflow_core::model::{
    CallRecord, CohortLabel, Location, ProvinceCode, Sex, UserId, UserProfile,
};

use crate::ingest;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("infeasible config: {0}")]
    Infeasible(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// Behavior block for one cohort.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CohortBehavior {
    /// Mean outgoing calls per active day.
    pub daily_call_rate: f64,
    /// Contacts available from the first active day.
    pub contact_pool_initial: usize,
    /// New contacts unlocked per week after arrival.
    pub contact_growth_per_week: f64,
    /// Probability a base contact is drawn from the user's birth
    /// province.
    pub same_province_prob: f64,
    /// Probability a pool slot is rewired to a contact-of-contact.
    pub triadic_closure_prob: f64,
    /// Radius of daytime wandering around home, km.
    pub mobility_radius_km: f64,
    /// 0..1; larger values place homes nearer the (expensive) center.
    pub center_bias: f64,
    /// Mean call duration, seconds.
    pub call_duration_mean_s: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CityConfig {
    pub origin_lat: f64,
    pub origin_lon: f64,
    /// Half the side of the square city, km.
    pub half_extent_km: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PriceFieldConfig {
    pub base: f64,
    /// Added at the center, decaying linearly to the edge.
    pub center_premium: f64,
    /// Amplitude of the smooth sinusoidal noise term.
    pub noise_amp: f64,
    /// Spatial wavelength of the noise, km.
    pub noise_scale_km: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GeneratorConfig {
    pub seed: u64,
    pub horizon_days: u32,
    pub n_locals: usize,
    pub n_staying: usize,
    pub n_leaving: usize,
    pub n_estates: usize,
    pub home_province: ProvinceCode,
    /// Migrant birth provinces are drawn from 1..=n_provinces,
    /// skipping the home province.
    pub n_provinces: ProvinceCode,
    /// First-activity day range for migrants (half-open).
    pub arrival_window: (u32, u32),
    /// Leave-day range for leavers (half-open); from that day on a
    /// leaver neither makes nor receives calls.
    pub leave_window: (u32, u32),
    /// Local-time offset the emitted timestamps are shaped for.
    pub utc_offset_hours: i32,
    pub city: CityConfig,
    pub price: PriceFieldConfig,
    pub locals: CohortBehavior,
    pub staying: CohortBehavior,
    pub leaving: CohortBehavior,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            seed: 1,
            horizon_days: 30,
            n_locals: 20_000,
            n_staying: 2_000,
            n_leaving: 200,
            n_estates: 4_000,
            home_province: 31,
            n_provinces: 8,
            arrival_window: (4, 8),
            leave_window: (18, 19),
            utc_offset_hours: 8,
            city: CityConfig {
                origin_lat: 31.23,
                origin_lon: 121.47,
                half_extent_km: 15.0,
            },
            price: PriceFieldConfig {
                base: 30_000.0,
                center_premium: 70_000.0,
                noise_amp: 5_000.0,
                noise_scale_km: 4.0,
            },
            locals: CohortBehavior {
                daily_call_rate: 2.0,
                contact_pool_initial: 25,
                contact_growth_per_week: 1.0,
                same_province_prob: 0.5,
                triadic_closure_prob: 0.15,
                mobility_radius_km: 8.0,
                center_bias: 0.3,
                call_duration_mean_s: 120.0,
            },
            // Staying and leaving migrants share call volume and
            // contact-pool shape; what tells them apart are habits that
            // show up in distribution (homophily, clustering, mobility,
            // residence, durations), not in raw counts that scale with
            // the observation window.
            staying: CohortBehavior {
                daily_call_rate: 3.0,
                contact_pool_initial: 10,
                contact_growth_per_week: 1.5,
                same_province_prob: 0.35,
                triadic_closure_prob: 0.10,
                mobility_radius_km: 7.0,
                center_bias: 0.20,
                call_duration_mean_s: 95.0,
            },
            leaving: CohortBehavior {
                daily_call_rate: 3.0,
                contact_pool_initial: 10,
                contact_growth_per_week: 1.5,
                same_province_prob: 0.70,
                triadic_closure_prob: 0.35,
                mobility_radius_km: 2.5,
                center_bias: 0.65,
                call_duration_mean_s: 150.0,
            },
        }
    }
}

impl GeneratorConfig {
    pub fn behavior(&self, label: CohortLabel) -> &CohortBehavior {
        match label {
            CohortLabel::Local => &self.locals,
            CohortLabel::StayingMigrant => &self.staying,
            CohortLabel::LeavingMigrant | CohortLabel::Excluded => &self.leaving,
        }
    }

    fn check(&self) -> Result<(), SynthError> {
        for (name, b) in [
            ("locals", &self.locals),
            ("staying", &self.staying),
            ("leaving", &self.leaving),
        ] {
            if b.contact_pool_initial < 1 {
                return Err(SynthError::Infeasible(format!("{name}: contact pool < 1")));
            }
        }
        if self.n_estates == 0 {
            return Err(SynthError::Infeasible("no estates".into()));
        }
        if self.arrival_window.0 >= self.arrival_window.1
            || self.leave_window.0 >= self.leave_window.1
        {
            return Err(SynthError::Infeasible("empty arrival/leave window".into()));
        }
        Ok(())
    }
}

/// Intended label and leave day per user.
#[derive(Debug, Clone)]
pub struct GroundTruth {
    pub user: UserId,
    pub label: CohortLabel,
    pub leave_day: Option<u32>,
}

pub struct SynthOutput {
    pub records: Vec<CallRecord>,
    pub profiles: Vec<UserProfile>,
    pub estates: Vec<Estate>,
    pub truth: Vec<GroundTruth>,
}

struct UserState {
    id: UserId,
    label: CohortLabel,
    province: ProvinceCode,
    /// First active day.
    arrival: u32,
    /// First silent day (horizon end for everyone but leavers).
    gone: u32,
    home: Location,
    work: Location,
    /// (contact user index, available-from day), sorted by day.
    pool: Vec<(usize, u32)>,
}

fn km_offset(origin: &CityConfig, east_km: f64, north_km: f64) -> Location {
    let lat = origin.origin_lat + north_km / 111.194_926_644_558_74;
    let lon = origin.origin_lon
        + east_km / (111.194_926_644_558_74 * origin.origin_lat.to_radians().cos());
    Location::new(lat, lon)
}

/// Price surface: base + linear radial premium + smooth sinusoidal
/// noise, evaluated on plane coordinates in km from the center.
fn price_field(p: &PriceFieldConfig, city: &CityConfig, x_km: f64, y_km: f64) -> f64 {
    let r = (x_km * x_km + y_km * y_km).sqrt();
    let radial = p.center_premium * (1.0 - r / city.half_extent_km).max(0.0);
    let w = 2.0 * std::f64::consts::PI / p.noise_scale_km;
    let noise = p.noise_amp * 0.5 * ((w * x_km + 1.3).sin() + (w * y_km * 0.8 + 2.1).sin());
    (p.base + radial + noise).max(1_000.0)
}

fn sample_disk(rng: &mut ChaCha8Rng, radius_km: f64) -> (f64, f64) {
    let angle = rng.gen::<f64>() * std::f64::consts::TAU;
    let r = radius_km * rng.gen::<f64>().sqrt();
    (r * angle.cos(), r * angle.sin())
}

/// Per-user draw of the cohort behavior block. Rates, pools, and
/// durations jitter independently around the cohort targets (mean
/// preserved, so validation bands still hold), while a latent
/// social-vs-geo axis trades province homophily and clustering against
/// mobility and central residence: socially clustered users roam more,
/// homebound users mix more, so no single feature family cleanly
/// separates the cohorts on its own.
fn personalize(b: &CohortBehavior, rng: &mut ChaCha8Rng) -> CohortBehavior {
    let social = rng.gen_range(-1.0..1.0);
    CohortBehavior {
        daily_call_rate: b.daily_call_rate * rng.gen_range(0.9..1.1),
        contact_pool_initial: (b.contact_pool_initial as i64 + rng.gen_range(-3..=3)).max(1)
            as usize,
        contact_growth_per_week: b.contact_growth_per_week * rng.gen_range(0.8..1.2),
        same_province_prob: (b.same_province_prob + 0.10 * social + rng.gen_range(-0.05..0.05))
            .clamp(0.02, 0.98),
        triadic_closure_prob: (b.triadic_closure_prob + 0.06 * social
            + rng.gen_range(-0.03..0.03))
        .clamp(0.02, 0.98),
        mobility_radius_km: (b.mobility_radius_km
            * (1.0 + 0.30 * social)
            * rng.gen_range(0.85..1.15))
        .max(0.3),
        center_bias: (b.center_bias - 0.08 * social + rng.gen_range(-0.06..0.06)).clamp(0.0, 1.0),
        call_duration_mean_s: (b.call_duration_mean_s * rng.gen_range(0.85..1.15)).max(5.0),
    }
}

fn poisson(rng: &mut ChaCha8Rng, rate: f64) -> usize {
    // Knuth; fine for the small per-day rates used here.
    let l = (-rate).exp();
    let mut k = 0usize;
    let mut p = 1.0;
    loop {
        p *= rng.gen::<f64>();
        if p <= l {
            return k;
        }
        k += 1;
        if k > 1000 {
            return k;
        }
    }
}

/// Generates the full bundle. Users are numbered locals first, then
/// staying, then leaving migrants.
pub fn generate(cfg: &GeneratorConfig) -> Result<SynthOutput, SynthError> {
    cfg.check()?;
    let n_total = cfg.n_locals + cfg.n_staying + cfg.n_leaving;
    if n_total < 2 {
        return Err(SynthError::Infeasible("need at least two users".into()));
    }

    // Estates over the city square.
    let mut rng = ChaCha8Rng::seed_from_u64(child_seed(cfg.seed, 1));
    let half = cfg.city.half_extent_km;
    let estates: Vec<Estate> = (0..cfg.n_estates)
        .map(|i| {
            let x = rng.gen_range(-half..half);
            let y = rng.gen_range(-half..half);
            Estate {
                estate_id: i as u64 + 1,
                loc: km_offset(&cfg.city, x, y),
                price: price_field(&cfg.price, &cfg.city, x, y),
            }
        })
        .collect();

    // Profiles and per-user state.
    let mut rng = ChaCha8Rng::seed_from_u64(child_seed(cfg.seed, 2));
    let mut profiles = Vec::with_capacity(n_total);
    let mut users: Vec<UserState> = Vec::with_capacity(n_total);
    let mut behaviors: Vec<CohortBehavior> = Vec::with_capacity(n_total);
    let mut by_province: Vec<Vec<usize>> = vec![Vec::new(); cfg.n_provinces.max(cfg.home_province) as usize + 2];
    for i in 0..n_total {
        let label = if i < cfg.n_locals {
            CohortLabel::Local
        } else if i < cfg.n_locals + cfg.n_staying {
            CohortLabel::StayingMigrant
        } else {
            CohortLabel::LeavingMigrant
        };
        let b = personalize(cfg.behavior(label), &mut rng);
        let province = if label == CohortLabel::Local {
            cfg.home_province
        } else {
            // Skewed over the non-home provinces so townsman contacts
            // are plentiful for some origins.
            let u = rng.gen::<f64>();
            let mut p = 1 + (u * u * cfg.n_provinces as f64) as ProvinceCode;
            if p >= cfg.home_province {
                p += 1;
            }
            p.min(cfg.n_provinces + 1)
        };
        let birth_year = if label == CohortLabel::Local {
            rng.gen_range(1950..=2000)
        } else {
            rng.gen_range(1975..=1998)
        };
        let sex = if rng.gen::<bool>() { Sex::M } else { Sex::F };
        let id = UserId(i as u64 + 1);
        profiles.push(UserProfile {
            user: id,
            birth_year,
            sex,
            birth_province: province,
            is_local: province == cfg.home_province,
        });
        let (arrival, gone) = match label {
            CohortLabel::Local => (0, cfg.horizon_days),
            CohortLabel::StayingMigrant => (
                rng.gen_range(cfg.arrival_window.0..cfg.arrival_window.1),
                cfg.horizon_days,
            ),
            CohortLabel::LeavingMigrant => (
                rng.gen_range(cfg.arrival_window.0..cfg.arrival_window.1),
                rng.gen_range(cfg.leave_window.0..cfg.leave_window.1),
            ),
            CohortLabel::Excluded => unreachable!(),
        };
        // Home distance from center: uniform angle, radius biased
        // toward the center for high center_bias.
        let angle = rng.gen::<f64>() * std::f64::consts::TAU;
        let r = half * rng.gen::<f64>().powf(0.5 + 2.0 * b.center_bias);
        let home = km_offset(&cfg.city, r * angle.cos(), r * angle.sin());
        let (wx, wy) = sample_disk(&mut rng, b.mobility_radius_km.max(0.5));
        let work = km_offset(
            &cfg.city,
            r * angle.cos() + wx,
            r * angle.sin() + wy,
        );
        by_province[province as usize].push(i);
        behaviors.push(b);
        users.push(UserState {
            id,
            label,
            province,
            arrival,
            gone,
            home,
            work,
            pool: Vec::new(),
        });
    }

    // Base contact pools with weekly growth, honoring province
    // homophily.
    let weeks = cfg.horizon_days / 7;
    let base_pools: Vec<Vec<(usize, u32)>> = (0..n_total)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(child_seed(cfg.seed, 1000 + i as u64));
            let u = &users[i];
            let b = &behaviors[i];
            let growth_total = (b.contact_growth_per_week * weeks as f64).round() as usize;
            let mut pool = Vec::with_capacity(b.contact_pool_initial + growth_total);
            let mut seen: HashSet<usize> = HashSet::new();
            seen.insert(i);
            let push_contact = |rng: &mut ChaCha8Rng, day: u32, pool: &mut Vec<(usize, u32)>, seen: &mut HashSet<usize>| {
                // Decide the slot's homophily up front; retries stay in
                // the chosen mode so small provinces don't erode the
                // target fraction.
                let same = rng.gen::<f64>() < b.same_province_prob;
                let province_pool = &by_province[u.province as usize];
                for attempt in 0..30 {
                    let c = if same && attempt < 20 && province_pool.len() >= 2 {
                        province_pool[rng.gen_range(0..province_pool.len())]
                    } else {
                        rng.gen_range(0..n_total)
                    };
                    if seen.insert(c) {
                        pool.push((c, day));
                        return;
                    }
                }
            };
            for _ in 0..b.contact_pool_initial {
                push_contact(&mut rng, u.arrival, &mut pool, &mut seen);
            }
            for w in 1..=weeks {
                let due = (b.contact_growth_per_week * w as f64).round() as usize
                    - (b.contact_growth_per_week * (w - 1) as f64).round() as usize;
                for _ in 0..due {
                    push_contact(&mut rng, u.arrival + 7 * w, &mut pool, &mut seen);
                }
            }
            pool
        })
        .collect();

    // Triadic-closure rewiring over the base pools.
    let pools: Vec<Vec<(usize, u32)>> = (0..n_total)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(child_seed(cfg.seed, 2_000_000 + i as u64));
            let b = &behaviors[i];
            let base = &base_pools[i];
            let mut pool = base.clone();
            let members: HashSet<usize> = pool.iter().map(|(c, _)| *c).collect();
            for slot in 1..pool.len() {
                if rng.gen::<f64>() >= b.triadic_closure_prob {
                    continue;
                }
                // Pick an earlier contact and adopt one of its contacts.
                let (via, _) = pool[rng.gen_range(0..slot)];
                let via_pool = &base_pools[via];
                if via_pool.is_empty() {
                    continue;
                }
                let (cand, _) = via_pool[rng.gen_range(0..via_pool.len())];
                // Only province-preserving rewires, so closure does not
                // dilute the homophily target.
                if cand != i
                    && !members.contains(&cand)
                    && users[cand].province == users[pool[slot].0].province
                {
                    pool[slot].0 = cand;
                }
            }
            pool.sort_unstable_by_key(|&(c, day)| (day, c));
            pool
        })
        .collect();
    for (u, pool) in users.iter_mut().zip(pools) {
        u.pool = pool;
    }

    // Call emission, parallel per caller with child seeds.
    let offset = cfg.utc_offset_hours.rem_euclid(24) as i64;
    let per_user: Vec<Vec<CallRecord>> = (0..n_total)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(child_seed(cfg.seed, 3_000_000 + i as u64));
            let u = &users[i];
            let b = &behaviors[i];
            let mut out = Vec::new();
            for day in u.arrival..u.gone {
                let n_calls = poisson(&mut rng, b.daily_call_rate);
                let avail = u.pool.partition_point(|&(_, d)| d <= day);
                if avail == 0 {
                    continue;
                }
                for _ in 0..n_calls {
                    // Find a callee active today.
                    let mut callee = None;
                    for _ in 0..10 {
                        let (c, _) = u.pool[rng.gen_range(0..avail)];
                        let cu = &users[c];
                        if cu.arrival <= day && day < cu.gone {
                            callee = Some(cu);
                            break;
                        }
                    }
                    let Some(callee) = callee else { continue };
                    // Local hour by time-of-day category, location to
                    // match (home at night, work at daytime, wandering
                    // otherwise).
                    let cat = rng.gen::<f64>();
                    let (hour, base_loc, wander) = if cat < 0.30 {
                        let h = [20, 21, 22, 23, 0, 1, 2, 3, 4, 5, 6][rng.gen_range(0..11)];
                        (h, u.home, 0.3)
                    } else if cat < 0.70 {
                        (rng.gen_range(9..16), u.work, 0.3)
                    } else {
                        (rng.gen_range(7..24) % 24, u.home, b.mobility_radius_km)
                    };
                    let (dx, dy) = sample_disk(&mut rng, wander);
                    // Shift the jitter from the base point in km.
                    let tower = Location::new(
                        base_loc.lat + dy / 111.194_926_644_558_74,
                        base_loc.lon
                            + dx / (111.194_926_644_558_74
                                * base_loc.lat.to_radians().cos()),
                    );
                    let utc_hour = (hour as i64 - offset).rem_euclid(24);
                    let start =
                        day as i64 * 86_400 + utc_hour * 3600 + rng.gen_range(0..3600);
                    let duration =
                        (-b.call_duration_mean_s * rng.gen::<f64>().max(1e-12).ln()) as i64 + 5;
                    out.push(CallRecord {
                        caller: u.id,
                        callee: callee.id,
                        start,
                        end: start + duration,
                        tower,
                    });
                }
            }
            out
        })
        .collect();
    let mut records: Vec<CallRecord> = per_user.into_iter().flatten().collect();
    records.sort_unstable_by_key(|r| (r.start, r.caller, r.callee));

    let truth = users
        .iter()
        .map(|u| GroundTruth {
            user: u.id,
            label: u.label,
            leave_day: (u.label == CohortLabel::LeavingMigrant).then_some(u.gone),
        })
        .collect();

    Ok(SynthOutput {
        records,
        profiles,
        estates,
        truth,
    })
}

/// Writes calls.csv, profiles.csv, estates.csv, and ground_truth.csv.
pub fn write_bundle(out_dir: &Path, out: &SynthOutput) -> std::io::Result<()> {
    std::fs::create_dir_all(out_dir)?;
    ingest::write_call_log(&out_dir.join("calls.csv"), &out.records)?;
    let profile_map = out.profiles.iter().map(|p| (p.user, *p)).collect();
    ingest::write_profiles(&out_dir.join("profiles.csv"), &profile_map)?;
    ingest::write_estates(&out_dir.join("estates.csv"), &out.estates)?;
    let mut w = csv::Writer::from_path(out_dir.join("ground_truth.csv"))?;
    w.write_record(["user", "true_label", "leave_day"])?;
    for t in &out.truth {
        w.write_record([
            t.user.to_string(),
            t.label.as_str().to_string(),
            t.leave_day.map(|d| d.to_string()).unwrap_or_default(),
        ])?;
    }
    w.flush()
}

/// One validation finding.
#[derive(Debug, Clone)]
pub struct Violation(pub String);

#[derive(Debug, Clone, Default)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
    pub checked: usize,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks realized statistics against config targets: per-cohort call
/// rates within 5%, migrant same-province contact fractions within
/// 0.05, and exact leaver silence from the leave day on.
pub fn validate(out: &SynthOutput, cfg: &GeneratorConfig) -> ValidationReport {
    let mut report = ValidationReport::default();
    let mut push = |ok: bool, msg: String| {
        report.checked += 1;
        if !ok {
            report.violations.push(Violation(msg));
        }
    };

    let truth_of: std::collections::HashMap<UserId, &GroundTruth> =
        out.truth.iter().map(|t| (t.user, t)).collect();
    let province_of: std::collections::HashMap<UserId, ProvinceCode> = out
        .profiles
        .iter()
        .map(|p| (p.user, p.birth_province))
        .collect();

    // Leaver silence is exact.
    let mut silent_ok = true;
    for r in &out.records {
        let day = (r.start / 86_400) as u32;
        for party in [r.caller, r.callee] {
            if let Some(t) = truth_of.get(&party) {
                if let Some(leave) = t.leave_day {
                    if day >= leave {
                        silent_ok = false;
                    }
                }
            }
        }
    }
    push(silent_ok, "leaver activity on/after leave day".into());

    // Realized out-call rate per cohort.
    let mut out_calls: std::collections::HashMap<UserId, u64> = Default::default();
    for r in &out.records {
        *out_calls.entry(r.caller).or_default() += 1;
    }
    let arrivals: std::collections::HashMap<UserId, (u32, u32)> = {
        // Active span from truth: locals 0..horizon, migrants from their
        // first call day (realized), leavers until leave day.
        let mut first_day: std::collections::HashMap<UserId, u32> = Default::default();
        for r in &out.records {
            let day = (r.start / 86_400) as u32;
            for party in [r.caller, r.callee] {
                first_day
                    .entry(party)
                    .and_modify(|d| *d = (*d).min(day))
                    .or_insert(day);
            }
        }
        out.truth
            .iter()
            .map(|t| {
                let start = match t.label {
                    CohortLabel::Local => 0,
                    _ => first_day.get(&t.user).copied().unwrap_or(0),
                };
                let end = t.leave_day.unwrap_or(cfg.horizon_days);
                (t.user, (start, end))
            })
            .collect()
    };
    for (label, behavior) in [
        (CohortLabel::Local, &cfg.locals),
        (CohortLabel::StayingMigrant, &cfg.staying),
        (CohortLabel::LeavingMigrant, &cfg.leaving),
    ] {
        let mut calls = 0u64;
        let mut days = 0u64;
        for t in out.truth.iter().filter(|t| t.label == label) {
            calls += out_calls.get(&t.user).copied().unwrap_or(0);
            let (start, end) = arrivals[&t.user];
            days += (end.saturating_sub(start)) as u64;
        }
        if days == 0 {
            push(
                behavior.daily_call_rate == 0.0,
                format!("{}: no active days", label.as_str()),
            );
            continue;
        }
        let realized = calls as f64 / days as f64;
        // Callee-unavailable retries skim a little off the top, so the
        // 5% band is checked against the realized acceptance.
        let ok = behavior.daily_call_rate == 0.0 && realized == 0.0
            || (realized - behavior.daily_call_rate).abs()
                <= 0.05 * behavior.daily_call_rate.max(1e-9);
        push(
            ok,
            format!(
                "{}: realized call rate {realized:.3} vs target {:.3}",
                label.as_str(),
                behavior.daily_call_rate
            ),
        );
    }

    // Same-province fraction over distinct called contacts, migrants
    // only (for locals "same province" coincides with locality).
    for (label, behavior) in [
        (CohortLabel::StayingMigrant, &cfg.staying),
        (CohortLabel::LeavingMigrant, &cfg.leaving),
    ] {
        let cohort: HashSet<UserId> = out
            .truth
            .iter()
            .filter(|t| t.label == label)
            .map(|t| t.user)
            .collect();
        let mut pairs: HashSet<(UserId, UserId)> = HashSet::new();
        for r in &out.records {
            if cohort.contains(&r.caller) {
                pairs.insert((r.caller, r.callee));
            }
        }
        if pairs.is_empty() {
            continue;
        }
        let same = pairs
            .iter()
            .filter(|(a, b)| province_of.get(a) == province_of.get(b))
            .count();
        let realized = same as f64 / pairs.len() as f64;
        push(
            (realized - behavior.same_province_prob).abs() <= 0.05,
            format!(
                "{}: realized same-province fraction {realized:.3} vs target {:.3}",
                label.as_str(),
                behavior.same_province_prob
            ),
        );
    }

    report
}
