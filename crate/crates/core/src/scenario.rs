use std::io::{Read, Write};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("scenario matrix must have at least one driver and one scenario")]
    Empty,
    #[error(
        "scenario entries must be finite and non-negative (driver {driver}, scenario {scenario})"
    )]
    InvalidEntry { driver: usize, scenario: usize },
    #[error("row {row} has {got} scenarios, expected {expected}")]
    Ragged {
        row: usize,
        got: usize,
        expected: usize,
    },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("line {line}: bad number `{value}`")]
    BadNumber { line: u64, value: String },
}

/// An `N × M` matrix of daily energy requirements in kWh. Column `j` is one
/// sampled demand vector across the whole fleet.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSet {
    n_drivers: usize,
    n_scenarios: usize,
    /// Column-major.
    data: Vec<f64>,
    pub seed: Option<u64>,
}

impl ScenarioSet {
    /// Builds a set from scenario columns (one demand vector each).
    pub fn from_columns(columns: Vec<Vec<f64>>) -> Result<Self, ScenarioError> {
        let n = columns.first().map_or(0, Vec::len);
        if n == 0 || columns.is_empty() {
            return Err(ScenarioError::Empty);
        }
        let m = columns.len();
        let mut data = Vec::with_capacity(n * m);
        for (j, col) in columns.into_iter().enumerate() {
            if col.len() != n {
                return Err(ScenarioError::Ragged {
                    row: j,
                    got: col.len(),
                    expected: n,
                });
            }
            data.extend(col);
        }
        Self::from_column_major(n, m, data, None)
    }

    /// Builds a set from per-driver rows.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, ScenarioError> {
        let m = rows.first().map_or(0, Vec::len);
        if m == 0 {
            return Err(ScenarioError::Empty);
        }
        for (i, r) in rows.iter().enumerate() {
            if r.len() != m {
                return Err(ScenarioError::Ragged {
                    row: i,
                    got: r.len(),
                    expected: m,
                });
            }
        }
        let n = rows.len();
        let mut data = vec![0.0; n * m];
        for (i, r) in rows.iter().enumerate() {
            for (j, &v) in r.iter().enumerate() {
                data[j * n + i] = v;
            }
        }
        Self::from_column_major(n, m, data, None)
    }

    pub(crate) fn from_column_major(
        n_drivers: usize,
        n_scenarios: usize,
        data: Vec<f64>,
        seed: Option<u64>,
    ) -> Result<Self, ScenarioError> {
        if n_drivers == 0 || n_scenarios == 0 {
            return Err(ScenarioError::Empty);
        }
        debug_assert_eq!(data.len(), n_drivers * n_scenarios);
        if let Some(k) = data.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(ScenarioError::InvalidEntry {
                driver: k % n_drivers,
                scenario: k / n_drivers,
            });
        }
        Ok(Self {
            n_drivers,
            n_scenarios,
            data,
            seed,
        })
    }

    pub fn n_drivers(&self) -> usize {
        self.n_drivers
    }

    pub fn n_scenarios(&self) -> usize {
        self.n_scenarios
    }

    pub fn get(&self, driver: usize, scenario: usize) -> f64 {
        self.data[scenario * self.n_drivers + driver]
    }

    /// Demand vector of scenario `j`.
    pub fn column(&self, j: usize) -> &[f64] {
        &self.data[j * self.n_drivers..(j + 1) * self.n_drivers]
    }

    pub fn columns(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.n_drivers)
    }

    /// All sampled demands of one driver.
    pub fn driver_samples(&self, driver: usize) -> Vec<f64> {
        self.columns().map(|c| c[driver]).collect()
    }

    /// The first `m` scenarios (clamped to the available count, at least one).
    pub fn prefix(&self, m: usize) -> ScenarioSet {
        let m = m.clamp(1, self.n_scenarios);
        ScenarioSet {
            n_drivers: self.n_drivers,
            n_scenarios: m,
            data: self.data[..m * self.n_drivers].to_vec(),
            seed: self.seed,
        }
    }

    /// Restricts the matrix to the given drivers, in the given order.
    pub fn select_drivers(&self, drivers: &[usize]) -> ScenarioSet {
        let mut data = Vec::with_capacity(drivers.len() * self.n_scenarios);
        for col in self.columns() {
            data.extend(drivers.iter().map(|&i| col[i]));
        }
        ScenarioSet {
            n_drivers: drivers.len(),
            n_scenarios: self.n_scenarios,
            data,
            seed: self.seed,
        }
    }

    /// Largest sampled demand per driver.
    pub fn driver_maxima(&self) -> Vec<f64> {
        let mut max = vec![0.0f64; self.n_drivers];
        for col in self.columns() {
            for (m, &v) in max.iter_mut().zip(col) {
                *m = m.max(v);
            }
        }
        max
    }

    /// Writes one CSV row per driver, one column per scenario, no header.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), ScenarioError> {
        let mut w = csv::WriterBuilder::new()
            .has_headers(false)
            .from_writer(writer);
        for i in 0..self.n_drivers {
            w.write_record(self.columns().map(|c| c[i].to_string()))?;
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self, ScenarioError> {
        let mut r = csv::ReaderBuilder::new()
            .has_headers(false)
            .from_reader(reader);
        let mut rows = Vec::new();
        for record in r.records() {
            let record = record?;
            let line = record.position().map_or(0, |p| p.line());
            let row = record
                .iter()
                .map(|v| {
                    v.trim()
                        .parse::<f64>()
                        .map_err(|_| ScenarioError::BadNumber {
                            line,
                            value: v.to_string(),
                        })
                })
                .collect::<Result<Vec<_>, _>>()?;
            rows.push(row);
        }
        Self::from_rows(&rows)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rows_and_columns_agree() {
        let s = ScenarioSet::from_rows(&[vec![1.0, 3.0], vec![1.0, 0.0]]).unwrap();
        assert_eq!(s.column(0), &[1.0, 1.0]);
        assert_eq!(s.column(1), &[3.0, 0.0]);
        assert_eq!(s.driver_samples(0), vec![1.0, 3.0]);
        assert_eq!(s.driver_maxima(), vec![3.0, 1.0]);
        assert_eq!(s.prefix(1).n_scenarios(), 1);
        assert_eq!(s.select_drivers(&[1]).column(1), &[0.0]);
    }

    #[test]
    fn rejects_negative_and_ragged() {
        assert!(matches!(
            ScenarioSet::from_rows(&[vec![1.0, -1.0]]),
            Err(ScenarioError::InvalidEntry {
                driver: 0,
                scenario: 1
            })
        ));
        assert!(matches!(
            ScenarioSet::from_rows(&[vec![1.0, 1.0], vec![1.0]]),
            Err(ScenarioError::Ragged { .. })
        ));
        assert!(matches!(
            ScenarioSet::from_rows(&[]),
            Err(ScenarioError::Empty)
        ));
    }

    #[test]
    fn csv_round_trip() {
        let s = ScenarioSet::from_rows(&[vec![1.5, 0.1], vec![2.0, 7.25]]).unwrap();
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf.clone()).unwrap(), "1.5,0.1\n2,7.25\n");
        assert_eq!(ScenarioSet::read_csv(&buf[..]).unwrap(), s);
    }
}
