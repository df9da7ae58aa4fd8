//! Seeded synthetic data with known ground truth.

use chrono::{Duration, NaiveDate, NaiveDateTime};
use nalgebra::DMatrix;
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::dataset::{Pir, SensorRecord};
use crate::timeseries::SENSOR_SERIES;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum SynthError {
    #[error("size must be at least {min}, got {got}")]
    Size { min: usize, got: usize },
    #[error("VAR system is not stable: spectral radius {0} >= 1")]
    Unstable(f64),
    #[error("invalid VAR system: {0}")]
    Shape(String),
    #[error("generated value left the valid sensor range: {0}")]
    Range(String),
}

pub type Result<T> = std::result::Result<T, SynthError>;

pub const MIN_SIZE: usize = 10;

/// Six classes; the last is the no-detection label.
pub const PERSONS: [&str; 6] = ["Alex", "Blake", "Casey", "Drew", "Emery", "No person"];

/// Sampling cadence of every generated file.
pub const CADENCE_SECONDS: i64 = 4;

pub fn start_time() -> NaiveDateTime {
    NaiveDate::from_ymd_opt(2018, 9, 13).unwrap().and_hms_opt(8, 0, 0).unwrap()
}

fn check_size(n: usize) -> Result<()> {
    if n < MIN_SIZE {
        return Err(SynthError::Size { min: MIN_SIZE, got: n });
    }
    Ok(())
}

fn timestamp(i: usize) -> NaiveDateTime {
    start_time() + Duration::seconds(i as i64 * CADENCE_SECONDS)
}

/// LDR range `[lo, hi)` of class `c` in the separable profile.
pub fn separable_ldr_range(c: usize) -> (f64, f64) {
    (50.0 + 200.0 * c as f64, 150.0 + 200.0 * c as f64)
}

/// Classes assigned round-robin; only LDR carries class information, and
/// Temp is constant.
pub fn separable(n: usize, seed: u64) -> Result<Vec<SensorRecord>> {
    check_size(n)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..n)
        .map(|i| {
            let c = i % PERSONS.len();
            let (lo, hi) = separable_ldr_range(c);
            SensorRecord {
                person: PERSONS[c].to_string(),
                temp_c: 26.0,
                ldr_lux: round3(rng.gen_range(lo..hi)),
                gas_ppm: round3(rng.gen_range(0.1..0.5)),
                pir: if rng.gen_bool(0.5) { Pir::Yes } else { Pir::No },
                hum_pct: round3(rng.gen_range(40.0..60.0)),
                timestamp: timestamp(i),
            }
        })
        .collect())
}

fn round3(v: f64) -> f64 {
    (v * 1000.0).round() / 1000.0
}

/// Block layout of the schedule profile.
#[derive(Debug, Clone, PartialEq)]
pub struct ScheduleBlock {
    pub person: String,
    pub start: NaiveDateTime,
    /// Exclusive.
    pub end: NaiveDateTime,
}

/// Times the schedule cycles through all persons.
pub const SCHEDULE_CYCLES: usize = 2;

pub fn schedule_blocks(n: usize) -> Vec<ScheduleBlock> {
    let n_blocks = PERSONS.len() * SCHEDULE_CYCLES;
    let rows_per_block = n.div_ceil(n_blocks).max(1);
    (0..n_blocks)
        .map(|b| ScheduleBlock {
            person: PERSONS[b % PERSONS.len()].to_string(),
            start: timestamp(b * rows_per_block),
            end: timestamp((b + 1) * rows_per_block),
        })
        .collect()
}

/// Readings every 4 s; the person is whoever owns the contiguous time block,
/// and each person owns several blocks spread across the day.
pub fn schedule(n: usize, seed: u64) -> Result<Vec<SensorRecord>> {
    check_size(n)?;
    let blocks = schedule_blocks(n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..n)
        .map(|i| {
            let ts = timestamp(i);
            let person = blocks.iter().find(|b| ts >= b.start && ts < b.end).map(|b| b.person.clone()).unwrap();
            SensorRecord {
                person,
                temp_c: round3(rng.gen_range(24.0..28.0)),
                ldr_lux: round3(rng.gen_range(100.0..900.0)),
                gas_ppm: round3(rng.gen_range(0.1..0.5)),
                pir: if rng.gen_bool(0.5) { Pir::Yes } else { Pir::No },
                hum_pct: round3(rng.gen_range(40.0..60.0)),
                timestamp: ts,
            }
        })
        .collect())
}

/// Ground truth of a generated VAR system, in frame column order
/// Temp, Hum, LDR, Gas.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarSystem {
    pub series: Vec<String>,
    pub intercept: Vec<f64>,
    /// `coefficients[l]` is the lag-`l+1` matrix, row = equation.
    pub coefficients: Vec<Vec<Vec<f64>>>,
    pub noise_sigma: Vec<f64>,
    /// Stationary mean implied by the intercept.
    pub mean: Vec<f64>,
    pub burn_in: usize,
}

impl VarSystem {
    pub fn order(&self) -> usize {
        self.coefficients.len()
    }

    /// Default order-2 system around typical sensor levels.
    pub fn default_system() -> Self {
        let a1 = vec![
            vec![0.5, 0.05, 0.0, 0.0],
            vec![0.1, 0.4, 0.0, 0.0],
            vec![0.0, 0.0, 0.5, 0.0],
            vec![0.0, 0.0, 0.002, 0.45],
        ];
        let a2 = vec![
            vec![0.3, 0.0, 0.0, 0.0],
            vec![0.0, 0.3, 0.0, 0.0],
            vec![0.0, 0.0, 0.25, 0.0],
            vec![0.0, 0.0, 0.0, 0.3],
        ];
        Self::with_mean(vec![a1, a2], vec![26.0, 50.0, 300.0, 5.0], vec![0.2, 1.0, 5.0, 0.05])
            .expect("default system is valid")
    }

    /// Builds the intercept so the process is stationary around `mean`.
    pub fn with_mean(coefficients: Vec<Vec<Vec<f64>>>, mean: Vec<f64>, noise_sigma: Vec<f64>) -> Result<Self> {
        let m = mean.len();
        if m != 4 || noise_sigma.len() != m {
            return Err(SynthError::Shape("four series with four noise scales required".into()));
        }
        if coefficients.is_empty() || coefficients.iter().any(|a| a.len() != m || a.iter().any(|r| r.len() != m)) {
            return Err(SynthError::Shape("coefficient matrices must be 4x4 and at least one".into()));
        }
        if noise_sigma.iter().any(|s| !(*s >= 0.0 && s.is_finite())) {
            return Err(SynthError::Shape("noise scales must be finite and non-negative".into()));
        }
        let intercept = (0..m)
            .map(|i| mean[i] - coefficients.iter().map(|a| (0..m).map(|j| a[i][j] * mean[j]).sum::<f64>()).sum::<f64>())
            .collect();
        let system = VarSystem {
            series: SENSOR_SERIES.iter().map(|s| s.to_string()).collect(),
            intercept,
            coefficients,
            noise_sigma,
            mean,
            burn_in: 500,
        };
        system.check_stable()?;
        Ok(system)
    }

    /// Largest eigenvalue modulus of the companion matrix.
    pub fn spectral_radius(&self) -> f64 {
        let m = self.series.len();
        let p = self.order();
        let mp = m * p;
        let companion = DMatrix::from_fn(mp, mp, |r, c| {
            if r < m {
                self.coefficients[c / m][r][c % m]
            } else if r - m == c {
                1.0
            } else {
                0.0
            }
        });
        companion.complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn check_stable(&self) -> Result<()> {
        let rho = self.spectral_radius();
        if !(rho < 1.0) {
            return Err(SynthError::Unstable(rho));
        }
        Ok(())
    }

    /// Multiplies every noise scale by `factor`.
    pub fn scaled_noise(mut self, factor: f64) -> Self {
        self.noise_sigma.iter_mut().for_each(|s| *s *= factor);
        self
    }

    /// `n × 4` observations. Noisy systems start at the mean and discard a
    /// burn-in; noiseless ones start from a seeded offset so the transient
    /// stays informative.
    pub fn simulate(&self, n: usize, seed: u64) -> Result<Array2<f64>> {
        check_size(n)?;
        self.check_stable()?;
        let m = self.series.len();
        let p = self.order();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noiseless = self.noise_sigma.iter().all(|&s| s == 0.0);
        let burn = if noiseless { 0 } else { self.burn_in };
        let mut history: Vec<Vec<f64>> = (0..p)
            .map(|_| {
                (0..m)
                    .map(|j| {
                        if noiseless {
                            self.mean[j] * (1.0 + rng.gen_range(-0.05..0.05))
                        } else {
                            self.mean[j]
                        }
                    })
                    .collect()
            })
            .collect();
        let noise: Vec<Normal<f64>> = self.noise_sigma.iter().map(|&s| Normal::new(0.0, s).unwrap()).collect();
        let mut out = Array2::zeros((n, m));
        for t in 0..burn + n {
            let len = history.len();
            let next: Vec<f64> = (0..m)
                .map(|i| {
                    let mut v = self.intercept[i];
                    for (l, a) in self.coefficients.iter().enumerate() {
                        for j in 0..m {
                            v += a[i][j] * history[len - 1 - l][j];
                        }
                    }
                    v + noise[i].sample(&mut rng)
                })
                .collect();
            if t >= burn {
                for j in 0..m {
                    out[(t - burn, j)] = next[j];
                }
            }
            history.push(next);
            if history.len() > p {
                history.remove(0);
            }
        }
        Ok(out)
    }

    /// Simulated series as sensor records at the 4 s cadence.
    pub fn records(&self, n: usize, seed: u64) -> Result<Vec<SensorRecord>> {
        let values = self.simulate(n, seed)?;
        values
            .rows()
            .into_iter()
            .enumerate()
            .map(|(i, row)| {
                let (temp, hum, ldr, gas) = (row[0], row[1], row[2], row[3]);
                if !(0.0..=100.0).contains(&hum) || ldr < 0.0 || gas < 0.0 {
                    return Err(SynthError::Range(format!("row {i}: Hum {hum}, LDR {ldr}, Gas {gas}")));
                }
                Ok(SensorRecord {
                    person: PERSONS[PERSONS.len() - 1].to_string(),
                    temp_c: temp,
                    ldr_lux: ldr,
                    gas_ppm: gas,
                    pir: Pir::No,
                    hum_pct: hum,
                    timestamp: timestamp(i),
                })
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{format_record, parse_records, write_records};
    use crate::timeseries::{fit_var, TimeSeriesFrame};

    #[test]
    fn size_checked() {
        assert_eq!(separable(9, 0).unwrap_err(), SynthError::Size { min: 10, got: 9 });
        assert!(schedule(5, 0).is_err());
    }

    #[test]
    fn separable_ldr_disjoint() {
        let rows = separable(600, 1).unwrap();
        for r in &rows {
            let c = PERSONS.iter().position(|p| *p == r.person).unwrap();
            let (lo, hi) = separable_ldr_range(c);
            assert!(r.ldr_lux >= lo && r.ldr_lux <= hi);
            assert_eq!(r.temp_c, 26.0);
        }
        assert_eq!(rows, separable(600, 1).unwrap());
        assert_ne!(rows, separable(600, 2).unwrap());
    }

    #[test]
    fn schedule_cadence_and_blocks() {
        let rows = schedule(1000, 3).unwrap();
        for w in rows.windows(2) {
            assert_eq!(w[1].timestamp - w[0].timestamp, Duration::seconds(4));
        }
        let blocks = schedule_blocks(1000);
        assert_eq!(blocks.len(), PERSONS.len() * SCHEDULE_CYCLES);
        for b in blocks.windows(2) {
            assert_eq!(b[0].end, b[1].start);
        }
        for r in &rows {
            let owner = blocks.iter().find(|b| r.timestamp >= b.start && r.timestamp < b.end).unwrap();
            assert_eq!(owner.person, r.person);
        }
        // every person owns several separate blocks
        for p in PERSONS {
            assert_eq!(blocks.iter().filter(|b| b.person == p).count(), SCHEDULE_CYCLES);
        }
    }

    #[test]
    fn stability_check() {
        let sys = VarSystem::default_system();
        let rho = sys.spectral_radius();
        assert!(rho > 0.5 && rho < 1.0, "{rho}");
        let explosive = vec![vec![vec![1.1, 0.0, 0.0, 0.0], vec![0.0, 0.5, 0.0, 0.0], vec![0.0, 0.0, 0.5, 0.0], vec![0.0, 0.0, 0.0, 0.5]]];
        match VarSystem::with_mean(explosive, vec![1.0; 4], vec![0.1; 4]) {
            Err(SynthError::Unstable(r)) => assert!((r - 1.1).abs() < 1e-9),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn companion_radius_of_scalar_ar2() {
        // z^2 - 0.5 z - 0.3 = 0 on every diagonal
        let diag = |v: f64| (0..4).map(|i| (0..4).map(|j| if i == j { v } else { 0.0 }).collect()).collect();
        let sys = VarSystem::with_mean(vec![diag(0.5), diag(0.3)], vec![1.0; 4], vec![0.0; 4]).unwrap();
        let expected = (0.5 + (0.25f64 + 1.2).sqrt()) / 2.0;
        assert!((sys.spectral_radius() - expected).abs() < 1e-12);
    }

    #[test]
    fn intercept_gives_requested_mean() {
        let sys = VarSystem::default_system();
        let values = sys.simulate(5000, 11).unwrap();
        for j in 0..4 {
            let mean = values.column(j).mean().unwrap();
            let tol = 10.0 * sys.noise_sigma[j];
            assert!((mean - sys.mean[j]).abs() < tol, "series {j}: {mean}");
        }
    }

    #[test]
    fn noiseless_records_round_trip_and_fit_exactly() {
        let sys = VarSystem::default_system().scaled_noise(0.0);
        let rows = sys.records(60, 5).unwrap();
        let mut buf = Vec::new();
        write_records(&mut buf, &rows).unwrap();
        let back = parse_records(buf.as_slice()).unwrap();
        assert_eq!(back, rows);
        let frame = TimeSeriesFrame::from_records(&back).unwrap();
        let model = fit_var(&frame, 2).unwrap();
        for (l, a) in model.coefficients.iter().enumerate() {
            for i in 0..4 {
                for j in 0..4 {
                    assert!((a[(i, j)] - sys.coefficients[l][i][j]).abs() < 1e-6, "lag {} ({i},{j})", l + 1);
                }
            }
        }
        assert!(format_record(&rows[0]).starts_with("No person,"));
    }
}
