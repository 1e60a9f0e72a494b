//! Benchmark reports: one `key=value` record per line, keys in the order of
//! [`BenchRecord::KEYS`]. Wall times are median seconds.

use std::fmt;
use std::str::FromStr;

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRecord {
    pub matrix_order: usize,
    pub iterations: usize,
    pub epsilon: f64,
    pub ns_wall_time: f64,
    pub oracle_wall_time: f64,
    /// Worst `‖W Σ_ε W - I‖_F` over the trials.
    pub ns_residual: f64,
    pub oracle_residual: f64,
    /// Worst `‖I - Σ_ε / ‖Σ_ε‖_F‖_2` over the trials.
    pub sigma_max_a: f64,
}

impl BenchRecord {
    pub const KEYS: [&'static str; 8] = [
        "matrix_order",
        "iterations",
        "epsilon",
        "ns_wall_time",
        "oracle_wall_time",
        "ns_residual",
        "oracle_residual",
        "sigma_max_a",
    ];
}

impl fmt::Display for BenchRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "matrix_order={} iterations={} epsilon={:e} ns_wall_time={:e} oracle_wall_time={:e} \
             ns_residual={:e} oracle_residual={:e} sigma_max_a={:e}",
            self.matrix_order,
            self.iterations,
            self.epsilon,
            self.ns_wall_time,
            self.oracle_wall_time,
            self.ns_residual,
            self.oracle_residual,
            self.sigma_max_a
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseRecordError(pub String);

impl fmt::Display for ParseRecordError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid bench record: {}", self.0)
    }
}

impl std::error::Error for ParseRecordError {}

impl FromStr for BenchRecord {
    type Err = ParseRecordError;

    fn from_str(line: &str) -> Result<Self, Self::Err> {
        let fields: Vec<(&str, &str)> = line
            .split_whitespace()
            .map(|kv| kv.split_once('=').ok_or_else(|| ParseRecordError(kv.to_string())))
            .collect::<Result<_, _>>()?;
        let keys: Vec<&str> = fields.iter().map(|(k, _)| *k).collect();
        if keys != Self::KEYS {
            return Err(ParseRecordError(format!("unexpected keys {keys:?}")));
        }
        let num = |i: usize| -> Result<f64, ParseRecordError> {
            fields[i]
                .1
                .parse()
                .map_err(|_| ParseRecordError(format!("{}={}", fields[i].0, fields[i].1)))
        };
        let int = |i: usize| -> Result<usize, ParseRecordError> {
            fields[i]
                .1
                .parse()
                .map_err(|_| ParseRecordError(format!("{}={}", fields[i].0, fields[i].1)))
        };
        Ok(Self {
            matrix_order: int(0)?,
            iterations: int(1)?,
            epsilon: num(2)?,
            ns_wall_time: num(3)?,
            oracle_wall_time: num(4)?,
            ns_residual: num(5)?,
            oracle_residual: num(6)?,
            sigma_max_a: num(7)?,
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct BenchReport {
    pub records: Vec<BenchRecord>,
}

impl fmt::Display for BenchReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for r in &self.records {
            writeln!(f, "{r}")?;
        }
        Ok(())
    }
}

impl FromStr for BenchReport {
    type Err = ParseRecordError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let records = s
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(str::parse)
            .collect::<Result<_, _>>()?;
        Ok(Self { records })
    }
}
