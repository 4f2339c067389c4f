//! Day-resolved load and irradiance scenarios.
//!
//! A scenario set holds `n_days` days of `snapshots_per_day` snapshots each.
//! Every snapshot carries an irradiance factor per candidate node (`alpha`,
//! in `[0, 1]`) and real/reactive load per load node (`d`, `e`). On disk a
//! set is a directory of `day_<id>.csv` files with columns
//! `alpha_1..alpha_L, d_1..d_V, e_1..e_V` plus a `scenarios_meta.json`
//! recording the dimensions.

use crate::fsutil::atomic_write;
use crate::network::Network;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::Path;
use thiserror::Error;

/// One day of scenario data. Each of `alpha`, `d`, `e` has one row per
/// snapshot; `alpha` rows run over candidate nodes, `d` and `e` rows over
/// load nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct DayScenario {
    pub day_id: usize,
    pub alpha: Vec<Vec<f64>>,
    pub d: Vec<Vec<f64>>,
    pub e: Vec<Vec<f64>>,
}

/// A collection of days with a common snapshot count.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSet {
    pub days: Vec<DayScenario>,
    pub snapshots_per_day: usize,
}

impl ScenarioSet {
    pub fn n_days(&self) -> usize {
        self.days.len()
    }

    /// Number of candidate columns, taken from the first day.
    pub fn n_candidates(&self) -> usize {
        self.days
            .first()
            .map_or(0, |day| day.alpha.first().map_or(0, |row| row.len()))
    }

    /// Number of load columns, taken from the first day.
    pub fn n_loads(&self) -> usize {
        self.days
            .first()
            .map_or(0, |day| day.d.first().map_or(0, |row| row.len()))
    }
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Meta { path: String, message: String },
    #[error("{file}, row {row}: {message}")]
    Row {
        file: String,
        row: usize,
        message: String,
    },
    #[error("{file}: {message}")]
    File { file: String, message: String },
    #[error("invalid profile parameters: {0}")]
    Params(String),
}

#[derive(Serialize, Deserialize)]
struct Meta {
    n_days: usize,
    #[serde(rename = "T")]
    t: usize,
    #[serde(rename = "L")]
    l: usize,
    #[serde(rename = "V")]
    v: usize,
}

const META_FILE: &str = "scenarios_meta.json";

fn day_file(id: usize) -> String {
    format!("day_{id}.csv")
}

fn header(n_candidates: usize, n_loads: usize) -> Vec<String> {
    let mut names = Vec::with_capacity(n_candidates + 2 * n_loads);
    names.extend((1..=n_candidates).map(|k| format!("alpha_{k}")));
    names.extend((1..=n_loads).map(|j| format!("d_{j}")));
    names.extend((1..=n_loads).map(|j| format!("e_{j}")));
    names
}

/// Writes `set` into `dir` as one CSV per day plus the metadata file.
/// Floats are written in shortest round-trip form, so a following
/// [`load_scenarios`] restores the set exactly. Files are written via a
/// temporary and renamed into place.
pub fn write_scenarios(set: &ScenarioSet, dir: &Path) -> Result<(), ScenarioError> {
    let first = set.days.first().ok_or_else(|| ScenarioError::Meta {
        path: dir.display().to_string(),
        message: "cannot write an empty scenario set".to_string(),
    })?;
    let n_candidates = first.alpha.first().map_or(0, Vec::len);
    let n_loads = first.d.first().map_or(0, Vec::len);

    fs::create_dir_all(dir).map_err(|source| ScenarioError::Io {
        path: dir.display().to_string(),
        source,
    })?;

    let meta = Meta {
        n_days: set.days.len(),
        t: set.snapshots_per_day,
        l: n_candidates,
        v: n_loads,
    };
    let meta_path = dir.join(META_FILE);
    let meta_json = serde_json::to_string_pretty(&meta).expect("meta serialization cannot fail");
    atomic_write(&meta_path, meta_json.as_bytes()).map_err(|source| ScenarioError::Io {
        path: meta_path.display().to_string(),
        source,
    })?;

    for (index, day) in set.days.iter().enumerate() {
        let path = dir.join(day_file(index));
        let mut writer = csv::Writer::from_writer(Vec::new());
        writer
            .write_record(header(n_candidates, n_loads))
            .expect("in-memory csv write cannot fail");
        for t in 0..set.snapshots_per_day {
            let mut record: Vec<String> = Vec::with_capacity(n_candidates + 2 * n_loads);
            record.extend(day.alpha[t].iter().map(f64::to_string));
            record.extend(day.d[t].iter().map(f64::to_string));
            record.extend(day.e[t].iter().map(f64::to_string));
            writer
                .write_record(&record)
                .expect("in-memory csv write cannot fail");
        }
        let bytes = writer
            .into_inner()
            .expect("in-memory csv flush cannot fail");
        atomic_write(&path, &bytes).map_err(|source| ScenarioError::Io {
            path: path.display().to_string(),
            source,
        })?;
    }
    Ok(())
}

/// Loads a scenario directory written by [`write_scenarios`] and checks it
/// against the network dimensions. Every defect is reported with the file
/// (and row, where applicable) it was found in.
pub fn load_scenarios(dir: &Path, network: &Network) -> Result<ScenarioSet, ScenarioError> {
    let meta_path = dir.join(META_FILE);
    let meta_text = fs::read_to_string(&meta_path).map_err(|source| ScenarioError::Io {
        path: meta_path.display().to_string(),
        source,
    })?;
    let meta: Meta = serde_json::from_str(&meta_text).map_err(|err| ScenarioError::Meta {
        path: meta_path.display().to_string(),
        message: err.to_string(),
    })?;

    if meta.l != network.n_candidates() {
        return Err(ScenarioError::Meta {
            path: meta_path.display().to_string(),
            message: format!(
                "scenario set has L={} candidate columns but the network has {} candidates",
                meta.l,
                network.n_candidates()
            ),
        });
    }
    if meta.v != network.n_loads() {
        return Err(ScenarioError::Meta {
            path: meta_path.display().to_string(),
            message: format!(
                "scenario set has V={} load columns but the network has {} load nodes",
                meta.v,
                network.n_loads()
            ),
        });
    }
    if meta.n_days == 0 {
        return Err(ScenarioError::Meta {
            path: meta_path.display().to_string(),
            message: "scenario set has no days".to_string(),
        });
    }

    let expected_cols = meta.l + 2 * meta.v;
    let mut days = Vec::with_capacity(meta.n_days);
    for id in 0..meta.n_days {
        let path = dir.join(day_file(id));
        let file_name = path.display().to_string();
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            // Ragged rows are caught below with a message that names the
            // expected L and V, not just the raw field count.
            .flexible(true)
            .from_path(&path)
            .map_err(|err| ScenarioError::File {
                file: file_name.clone(),
                message: err.to_string(),
            })?;

        let got_header: Vec<String> = reader
            .headers()
            .map_err(|err| ScenarioError::File {
                file: file_name.clone(),
                message: err.to_string(),
            })?
            .iter()
            .map(str::to_string)
            .collect();
        if got_header != header(meta.l, meta.v) {
            return Err(ScenarioError::File {
                file: file_name,
                message: format!(
                    "unexpected header: want alpha_1..alpha_{}, d_1..d_{}, e_1..e_{}",
                    meta.l, meta.v, meta.v
                ),
            });
        }

        let mut alpha = Vec::with_capacity(meta.t);
        let mut d = Vec::with_capacity(meta.t);
        let mut e = Vec::with_capacity(meta.t);
        for (row_index, record) in reader.records().enumerate() {
            // Row numbers in messages count the header as row 1.
            let row = row_index + 2;
            let record = record.map_err(|err| ScenarioError::Row {
                file: file_name.clone(),
                row,
                message: err.to_string(),
            })?;
            if record.len() != expected_cols {
                return Err(ScenarioError::Row {
                    file: file_name,
                    row,
                    message: format!(
                        "expected {} columns (L={} + 2*V={}), got {}",
                        expected_cols,
                        meta.l,
                        meta.v,
                        record.len()
                    ),
                });
            }
            let mut values = Vec::with_capacity(expected_cols);
            for (col, raw) in record.iter().enumerate() {
                let value: f64 = raw.parse().map_err(|_| ScenarioError::Row {
                    file: file_name.clone(),
                    row,
                    message: format!("column {} ({:?}) is not a number", col + 1, raw),
                })?;
                if !value.is_finite() {
                    return Err(ScenarioError::Row {
                        file: file_name,
                        row,
                        message: format!("column {} is not finite", col + 1),
                    });
                }
                values.push(value);
            }
            let alpha_row = values[..meta.l].to_vec();
            if let Some(bad) = alpha_row.iter().position(|a| !(0.0..=1.0).contains(a)) {
                return Err(ScenarioError::Row {
                    file: file_name,
                    row,
                    message: format!("alpha_{} = {} outside [0, 1]", bad + 1, alpha_row[bad]),
                });
            }
            alpha.push(alpha_row);
            d.push(values[meta.l..meta.l + meta.v].to_vec());
            e.push(values[meta.l + meta.v..].to_vec());
        }
        if alpha.len() != meta.t {
            return Err(ScenarioError::File {
                file: file_name,
                message: format!("expected {} snapshot rows, got {}", meta.t, alpha.len()),
            });
        }
        days.push(DayScenario {
            day_id: id,
            alpha,
            d,
            e,
        });
    }

    Ok(ScenarioSet {
        days,
        snapshots_per_day: meta.t,
    })
}

/// Shape parameters of the synthetic profiles. Defaults give a summer-ish
/// irradiance bell over half the day and a residential double-peak load.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProfileParams {
    /// Mean of the per-day irradiance amplitude.
    pub amp_mean: f64,
    /// Truncated-Gaussian spread of the per-day amplitude.
    pub amp_sd: f64,
    /// Truncation bounds of the amplitude; also bound alpha itself.
    pub amp_min: f64,
    pub amp_max: f64,
    /// Start and end of generation as fractions of the day.
    pub sunrise: f64,
    pub sunset: f64,
    /// Base real load per node (p.u.).
    pub load_base: f64,
    /// Extra load at the morning and evening peaks (p.u.).
    pub load_peak: f64,
    /// Truncated-Gaussian per-snapshot load noise, relative to the level.
    pub load_noise_sd: f64,
    /// Reactive load as a fraction of real load.
    pub reactive_ratio: f64,
}

impl Default for ProfileParams {
    fn default() -> Self {
        Self {
            amp_mean: 0.88,
            amp_sd: 0.08,
            amp_min: 0.7,
            amp_max: 1.0,
            sunrise: 0.25,
            sunset: 0.75,
            load_base: 0.01,
            load_peak: 0.02,
            load_noise_sd: 0.05,
            reactive_ratio: 0.33,
        }
    }
}

impl ProfileParams {
    fn validate(&self) -> Result<(), ScenarioError> {
        let bad = |message: String| Err(ScenarioError::Params(message));
        if !(self.amp_sd >= 0.0) {
            return bad(format!("amp_sd must be >= 0, got {}", self.amp_sd));
        }
        if !(self.load_noise_sd >= 0.0) {
            return bad(format!(
                "load_noise_sd must be >= 0, got {}",
                self.load_noise_sd
            ));
        }
        if !(0.0 <= self.amp_min && self.amp_min <= self.amp_max && self.amp_max <= 1.0) {
            return bad(format!(
                "amplitude bounds must satisfy 0 <= amp_min <= amp_max <= 1, got [{}, {}]",
                self.amp_min, self.amp_max
            ));
        }
        if !(0.0 <= self.sunrise && self.sunrise < self.sunset && self.sunset <= 1.0) {
            return bad(format!(
                "need 0 <= sunrise < sunset <= 1, got sunrise={} sunset={}",
                self.sunrise, self.sunset
            ));
        }
        if !(self.load_base >= 0.0 && self.load_peak >= 0.0) {
            return bad(format!(
                "load levels must be >= 0, got base={} peak={}",
                self.load_base, self.load_peak
            ));
        }
        if !self.reactive_ratio.is_finite() {
            return bad(format!(
                "reactive_ratio must be finite, got {}",
                self.reactive_ratio
            ));
        }
        Ok(())
    }
}

/// Gaussian draw truncated to `[lo, hi]` by rejection, with a clamp as a
/// fallback for pathological spreads.
fn truncated_normal(rng: &mut ChaCha8Rng, mean: f64, sd: f64, lo: f64, hi: f64) -> f64 {
    if sd == 0.0 {
        return mean.clamp(lo, hi);
    }
    for _ in 0..64 {
        // Box-Muller on explicit uniforms keeps the draw count per sample
        // fixed, so day streams stay aligned across parameter changes.
        let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
        let u2: f64 = rng.gen_range(0.0..1.0);
        let z = (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos();
        let value = mean + sd * z;
        if (lo..=hi).contains(&value) {
            return value;
        }
    }
    mean.clamp(lo, hi)
}

/// Morning and evening residential load peaks as day fractions.
const PEAK_MORNING: f64 = 0.33;
const PEAK_EVENING: f64 = 0.79;
const PEAK_WIDTH: f64 = 0.09;

/// Generates a synthetic scenario set. Each day is drawn from its own
/// ChaCha stream of `seed`, so day `i` has the same content regardless of
/// `n_days`, thread count, or the order days are consumed in.
pub fn generate_synthetic(
    n_days: usize,
    snapshots_per_day: usize,
    n_candidates: usize,
    n_loads: usize,
    seed: u64,
    params: &ProfileParams,
) -> Result<ScenarioSet, ScenarioError> {
    params.validate()?;
    if n_days == 0 || snapshots_per_day == 0 {
        return Err(ScenarioError::Params(format!(
            "need at least one day and one snapshot, got n_days={n_days}, T={snapshots_per_day}"
        )));
    }

    let days = (0..n_days)
        .map(|day_id| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(day_id as u64 + 1);
            generate_day(
                day_id,
                snapshots_per_day,
                n_candidates,
                n_loads,
                params,
                &mut rng,
            )
        })
        .collect();

    Ok(ScenarioSet {
        days,
        snapshots_per_day,
    })
}

fn generate_day(
    day_id: usize,
    snapshots: usize,
    n_candidates: usize,
    n_loads: usize,
    params: &ProfileParams,
    rng: &mut ChaCha8Rng,
) -> DayScenario {
    let amplitude = truncated_normal(
        rng,
        params.amp_mean,
        params.amp_sd,
        params.amp_min,
        params.amp_max,
    );
    // A mild day-wide load scale correlates the nodes, as weather does.
    let day_load_scale = truncated_normal(rng, 1.0, 0.1, 0.75, 1.25);

    let mut alpha = Vec::with_capacity(snapshots);
    let mut d = Vec::with_capacity(snapshots);
    let mut e = Vec::with_capacity(snapshots);
    for t in 0..snapshots {
        let frac = (t as f64 + 0.5) / snapshots as f64;

        let bell = if frac <= params.sunrise || frac >= params.sunset {
            0.0
        } else {
            let phase = (frac - params.sunrise) / (params.sunset - params.sunrise);
            (std::f64::consts::PI * phase).sin()
        };
        let alpha_row: Vec<f64> = (0..n_candidates)
            .map(|_| (amplitude * bell).clamp(0.0, 1.0))
            .collect();

        let level = params.load_base
            + params.load_peak
                * (gaussian_bump(frac, PEAK_MORNING) + gaussian_bump(frac, PEAK_EVENING));
        let d_row: Vec<f64> = (0..n_loads)
            .map(|_| {
                let noise = truncated_normal(rng, 1.0, params.load_noise_sd, 0.5, 1.5);
                (day_load_scale * level * noise).max(0.0)
            })
            .collect();
        let e_row: Vec<f64> = d_row.iter().map(|&dj| params.reactive_ratio * dj).collect();

        alpha.push(alpha_row);
        d.push(d_row);
        e.push(e_row);
    }

    DayScenario {
        day_id,
        alpha,
        d,
        e,
    }
}

fn gaussian_bump(frac: f64, center: f64) -> f64 {
    let z = (frac - center) / PEAK_WIDTH;
    (-z * z).exp()
}
