//! Trip logs to per-driver daily energy demand, fitted histograms, synthetic
//! fleets, and scenario sampling.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::Read;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use rand::distr::weighted::WeightedIndex;
use rand::distr::{Distribution, Uniform};
use rand::Rng;
use rand_distr::Normal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::rng_from;
use crate::scenario::ScenarioSet;

/// Miles per kWh assumed when converting mileage to energy.
pub const DEFAULT_EFFICIENCY_MI_PER_KWH: f64 = 3.0;
pub const DEFAULT_BIN_WIDTH_KWH: f64 = 2.0;

const TRIP_LOG_HEADER: [&str; 3] = ["driver_id", "date", "miles"];

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    MalformedRow { line: u64, message: String },
    #[error("line {line}: negative mileage {miles}")]
    NegativeMiles { line: u64, miles: f64 },
    #[error("expected header `driver_id,date,miles`, found `{0}`")]
    BadHeader(String),
    #[error("no demand samples for driver `{0}`")]
    EmptySeries(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Scenario(#[from] crate::scenario::ScenarioError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TripRecord {
    pub driver_id: String,
    pub date: NaiveDate,
    pub miles: f64,
}

/// Daily energy use of one driver, keyed by calendar date.
#[derive(Debug, Clone, PartialEq)]
pub struct DailyDemandSeries {
    pub driver_id: String,
    pub entries: BTreeMap<NaiveDate, f64>,
}

impl DailyDemandSeries {
    pub fn new(driver_id: impl Into<String>) -> Self {
        Self {
            driver_id: driver_id.into(),
            entries: BTreeMap::new(),
        }
    }

    /// Observed daily kWh values, optionally padded with a zero for every
    /// calendar day in the observed span that has no trips.
    pub fn samples(&self, include_zero_days: bool) -> Vec<f64> {
        let mut out: Vec<f64> = self.entries.values().copied().collect();
        if include_zero_days {
            if let (Some(first), Some(last)) =
                (self.entries.keys().next(), self.entries.keys().next_back())
            {
                let span = (*last - *first).num_days() as usize + 1;
                out.extend(std::iter::repeat_n(0.0, span - self.entries.len()));
            }
        }
        out
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> IngestError + '_ {
    move |source| IngestError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Reads a `driver_id,date,miles` CSV and converts it to daily kWh per
/// driver. Drivers come back sorted by id.
pub fn parse_trip_log(
    path: impl AsRef<Path>,
    efficiency_mi_per_kwh: f64,
) -> Result<Vec<DailyDemandSeries>, IngestError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(io_err(path))?;
    parse_trip_log_reader(file, efficiency_mi_per_kwh)
}

pub fn parse_trip_log_reader<R: Read>(
    reader: R,
    efficiency_mi_per_kwh: f64,
) -> Result<Vec<DailyDemandSeries>, IngestError> {
    let records = read_trip_records(reader)?;
    daily_demand(&records, efficiency_mi_per_kwh)
}

pub fn read_trip_records<R: Read>(reader: R) -> Result<Vec<TripRecord>, IngestError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut records = Vec::new();
    let mut header_seen = false;
    for row in rdr.records() {
        let row = row.map_err(|e| IngestError::MalformedRow {
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = row.position().map_or(0, |p| p.line());
        if !header_seen {
            header_seen = true;
            if row.iter().ne(TRIP_LOG_HEADER) {
                return Err(IngestError::BadHeader(
                    row.iter().collect::<Vec<_>>().join(","),
                ));
            }
            continue;
        }
        if row.len() != 3 {
            return Err(IngestError::MalformedRow {
                line,
                message: format!("expected 3 fields, found {}", row.len()),
            });
        }
        let driver_id = row[0].to_string();
        if driver_id.is_empty() {
            return Err(IngestError::MalformedRow {
                line,
                message: "empty driver_id".into(),
            });
        }
        let date = NaiveDate::parse_from_str(&row[1], "%Y-%m-%d").map_err(|e| {
            IngestError::MalformedRow {
                line,
                message: format!("bad date `{}`: {e}", &row[1]),
            }
        })?;
        let miles: f64 = row[2].parse().map_err(|_| IngestError::MalformedRow {
            line,
            message: format!("bad mileage `{}`", &row[2]),
        })?;
        if !miles.is_finite() {
            return Err(IngestError::MalformedRow {
                line,
                message: format!("bad mileage `{}`", &row[2]),
            });
        }
        if miles < 0.0 {
            return Err(IngestError::NegativeMiles { line, miles });
        }
        records.push(TripRecord {
            driver_id,
            date,
            miles,
        });
    }
    Ok(records)
}

/// Sums miles per (driver, date) and divides by the efficiency.
pub fn daily_demand(
    records: &[TripRecord],
    efficiency_mi_per_kwh: f64,
) -> Result<Vec<DailyDemandSeries>, IngestError> {
    if !(efficiency_mi_per_kwh > 0.0 && efficiency_mi_per_kwh.is_finite()) {
        return Err(IngestError::InvalidParameter(format!(
            "efficiency must be positive, got {efficiency_mi_per_kwh}"
        )));
    }
    let mut miles: BTreeMap<&str, BTreeMap<NaiveDate, f64>> = BTreeMap::new();
    for r in records {
        *miles
            .entry(&r.driver_id)
            .or_default()
            .entry(r.date)
            .or_insert(0.0) += r.miles;
    }
    Ok(miles
        .into_iter()
        .map(|(id, days)| DailyDemandSeries {
            driver_id: id.to_string(),
            entries: days
                .into_iter()
                .map(|(d, m)| (d, m / efficiency_mi_per_kwh))
                .collect(),
        })
        .collect())
}

/// Equal-width histogram of one driver's daily kWh.
///
/// Bins are `[k·w, (k+1)·w)` starting at zero; the last bin is closed so the
/// largest sample is always covered.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalDemandModel {
    pub driver_id: String,
    pub bin_edges: Vec<f64>,
    pub bin_probs: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub raw_samples: Vec<f64>,
}

impl EmpiricalDemandModel {
    pub fn from_samples(
        driver_id: impl Into<String>,
        samples: &[f64],
        bin_width_kwh: f64,
    ) -> Result<Self, IngestError> {
        let driver_id = driver_id.into();
        if samples.is_empty() {
            return Err(IngestError::EmptySeries(driver_id));
        }
        if !(bin_width_kwh > 0.0 && bin_width_kwh.is_finite()) {
            return Err(IngestError::InvalidParameter(format!(
                "bin width must be positive, got {bin_width_kwh}"
            )));
        }
        if samples.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
            return Err(IngestError::InvalidParameter(
                "demand samples must be finite and non-negative".into(),
            ));
        }
        let max = samples.iter().copied().fold(0.0, f64::max);
        let n_bins = ((max / bin_width_kwh).ceil() as usize).max(1);
        let bin_edges: Vec<f64> = (0..=n_bins).map(|k| k as f64 * bin_width_kwh).collect();
        let mut counts = vec![0usize; n_bins];
        for &x in samples {
            let k = ((x / bin_width_kwh).floor() as usize).min(n_bins - 1);
            counts[k] += 1;
        }
        let n = samples.len() as f64;
        let mut raw_samples = samples.to_vec();
        raw_samples.sort_by(f64::total_cmp);
        Ok(Self {
            driver_id,
            bin_edges,
            bin_probs: counts.into_iter().map(|c| c as f64 / n).collect(),
            raw_samples,
        })
    }

    pub fn bin_width(&self) -> f64 {
        self.bin_edges[1] - self.bin_edges[0]
    }

    /// Histogram CDF (piecewise linear inside bins).
    pub fn cdf(&self, x: f64) -> f64 {
        let mut acc = 0.0;
        for (k, &p) in self.bin_probs.iter().enumerate() {
            let (lo, hi) = (self.bin_edges[k], self.bin_edges[k + 1]);
            if x >= hi {
                acc += p;
            } else {
                if x > lo {
                    acc += p * (x - lo) / (hi - lo);
                }
                break;
            }
        }
        acc.min(1.0)
    }

    /// Empirical CDF of the retained raw samples.
    pub fn raw_cdf(&self, x: f64) -> f64 {
        let below = self.raw_samples.partition_point(|&v| v <= x);
        below as f64 / self.raw_samples.len().max(1) as f64
    }

    pub fn mean(&self) -> f64 {
        self.bin_probs
            .iter()
            .enumerate()
            .map(|(k, p)| p * 0.5 * (self.bin_edges[k] + self.bin_edges[k + 1]))
            .sum()
    }

    pub fn validate(&self) -> Result<(), IngestError> {
        let bad = |m: &str| {
            Err(IngestError::InvalidParameter(format!(
                "{}: {m}",
                self.driver_id
            )))
        };
        if self.bin_edges.len() < 2 || self.bin_probs.len() + 1 != self.bin_edges.len() {
            return bad("need one more edge than probabilities");
        }
        if self.bin_edges.windows(2).any(|w| !(w[1] > w[0])) {
            return bad("bin edges must be strictly increasing");
        }
        if self.bin_probs.iter().any(|p| !(*p >= 0.0)) {
            return bad("bin probabilities must be non-negative");
        }
        if (self.bin_probs.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return bad("bin probabilities must sum to one");
        }
        if self.bin_edges[0] < 0.0 {
            return bad("bin edges must be non-negative");
        }
        Ok(())
    }
}

/// Fits a histogram to one driver's daily series.
pub fn fit_histogram(
    series: &DailyDemandSeries,
    bin_width_kwh: f64,
    include_zero_days: bool,
) -> Result<EmpiricalDemandModel, IngestError> {
    EmpiricalDemandModel::from_samples(
        series.driver_id.clone(),
        &series.samples(include_zero_days),
        bin_width_kwh,
    )
}

/// Per-driver daily demand distribution used to draw scenarios.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DemandModel {
    /// Bin drawn by probability, then a uniform point inside the bin.
    Histogram(EmpiricalDemandModel),
    PointMass {
        driver_id: String,
        kwh: f64,
    },
    /// Normal demand clamped at zero.
    Gaussian {
        driver_id: String,
        mean: f64,
        std_dev: f64,
    },
}

impl From<EmpiricalDemandModel> for DemandModel {
    fn from(m: EmpiricalDemandModel) -> Self {
        DemandModel::Histogram(m)
    }
}

impl DemandModel {
    pub fn point_mass(driver_id: impl Into<String>, kwh: f64) -> Self {
        DemandModel::PointMass {
            driver_id: driver_id.into(),
            kwh,
        }
    }

    pub fn driver_id(&self) -> &str {
        match self {
            DemandModel::Histogram(h) => &h.driver_id,
            DemandModel::PointMass { driver_id, .. } | DemandModel::Gaussian { driver_id, .. } => {
                driver_id
            }
        }
    }

    pub fn validate(&self) -> Result<(), IngestError> {
        match self {
            DemandModel::Histogram(h) => h.validate(),
            DemandModel::PointMass { kwh, .. } if kwh.is_finite() && *kwh >= 0.0 => Ok(()),
            DemandModel::Gaussian { mean, std_dev, .. }
                if mean.is_finite() && std_dev.is_finite() && *std_dev >= 0.0 =>
            {
                Ok(())
            }
            other => Err(IngestError::InvalidParameter(format!(
                "invalid demand model for `{}`",
                other.driver_id()
            ))),
        }
    }
}

enum DriverSampler<'a> {
    Histogram {
        edges: &'a [f64],
        bins: WeightedIndex<f64>,
    },
    Constant(f64),
    Gaussian(Normal<f64>),
}

impl DriverSampler<'_> {
    fn draw<R: Rng>(&self, rng: &mut R) -> f64 {
        match self {
            DriverSampler::Histogram { edges, bins } => {
                let k = bins.sample(rng);
                let (lo, hi) = (edges[k], edges[k + 1]);
                lo + (hi - lo) * rng.random::<f64>()
            }
            DriverSampler::Constant(v) => *v,
            DriverSampler::Gaussian(n) => n.sample(rng).max(0.0),
        }
    }
}

fn samplers(models: &[DemandModel]) -> Result<Vec<DriverSampler<'_>>, IngestError> {
    models
        .iter()
        .map(|m| {
            m.validate()?;
            Ok(match m {
                DemandModel::Histogram(h) => DriverSampler::Histogram {
                    edges: &h.bin_edges,
                    bins: WeightedIndex::new(&h.bin_probs).map_err(|e| {
                        IngestError::InvalidParameter(format!("{}: {e}", h.driver_id))
                    })?,
                },
                DemandModel::PointMass { kwh, .. } => DriverSampler::Constant(*kwh),
                DemandModel::Gaussian { mean, std_dev, .. } => DriverSampler::Gaussian(
                    Normal::new(*mean, *std_dev)
                        .map_err(|e| IngestError::InvalidParameter(e.to_string()))?,
                ),
            })
        })
        .collect()
}

/// Draws `m` independent fleet-wide demand vectors.
///
/// Output is a pure function of `(models, m, seed)`.
pub fn sample_scenarios(
    models: &[DemandModel],
    m: usize,
    seed: u64,
) -> Result<ScenarioSet, IngestError> {
    if models.is_empty() || m == 0 {
        return Err(IngestError::InvalidParameter(
            "need at least one driver and one scenario".into(),
        ));
    }
    let samplers = samplers(models)?;
    let mut rng = rng_from(seed, &[]);
    let mut data = Vec::with_capacity(models.len() * m);
    for _ in 0..m {
        for s in &samplers {
            data.push(s.draw(&mut rng));
        }
    }
    Ok(ScenarioSet::from_column_major(
        models.len(),
        m,
        data,
        Some(seed),
    )?)
}

/// Parameters of the synthetic fleet generator.
///
/// Each driver has a lognormal everyday demand around a driver-specific
/// scale; with probability `tail_prob` a day adds a heavy lognormal long-trip
/// draw around `tail_scale`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticFleetSpec {
    pub n_drivers: usize,
    pub base_scale: f64,
    pub tail_prob: f64,
    pub tail_scale: f64,
    pub seed: u64,
    /// Log-scale spread of the per-driver scale around `base_scale`.
    pub driver_spread: f64,
    /// Log-scale day-to-day spread of everyday demand.
    pub day_spread: f64,
    pub history_days: usize,
    pub bin_width_kwh: f64,
}

impl Default for SyntheticFleetSpec {
    fn default() -> Self {
        Self {
            n_drivers: 100,
            base_scale: 6.0,
            tail_prob: 0.08,
            tail_scale: 20.0,
            seed: 0,
            driver_spread: 0.35,
            day_spread: 0.6,
            history_days: 365,
            bin_width_kwh: DEFAULT_BIN_WIDTH_KWH,
        }
    }
}

impl SyntheticFleetSpec {
    pub fn validate(&self) -> Result<(), IngestError> {
        let ok = self.n_drivers >= 1
            && (0.0..=1.0).contains(&self.tail_prob)
            && self.base_scale > 0.0
            && self.tail_scale > 0.0
            && self.driver_spread >= 0.0
            && self.day_spread >= 0.0
            && self.history_days >= 1
            && self.bin_width_kwh > 0.0;
        if ok {
            Ok(())
        } else {
            Err(IngestError::InvalidParameter(format!(
                "invalid synthetic fleet spec: {self:?}"
            )))
        }
    }

    /// Draws `history_days` of daily kWh for driver `index`.
    pub fn driver_history(&self, index: usize) -> Vec<f64> {
        let mut rng = rng_from(self.seed, &[index as u64]);
        let std = Normal::new(0.0, 1.0).expect("unit normal");
        let unit = Uniform::new(0.0, 1.0).expect("unit interval");
        let scale = self.base_scale * (self.driver_spread * std.sample(&mut rng)).exp();
        (0..self.history_days)
            .map(|_| {
                let mut kwh = scale * (self.day_spread * std.sample(&mut rng)).exp();
                if unit.sample(&mut rng) < self.tail_prob {
                    kwh += self.tail_scale * (0.5 * std.sample(&mut rng)).exp();
                }
                kwh
            })
            .collect()
    }
}

/// Generates a calibrated stand-in fleet: each driver's history is drawn
/// from the generator and fitted to a histogram.
pub fn generate_synthetic_fleet(
    spec: &SyntheticFleetSpec,
) -> Result<Vec<EmpiricalDemandModel>, IngestError> {
    spec.validate()?;
    (0..spec.n_drivers)
        .map(|i| {
            EmpiricalDemandModel::from_samples(
                format!("synthetic-{i:04}"),
                &spec.driver_history(i),
                spec.bin_width_kwh,
            )
        })
        .collect()
}
