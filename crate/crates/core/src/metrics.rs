//! Torque density figures of merit and comparison tables.

use std::io::Read;

use thiserror::Error;

/// The comparison data shipped with the crate.
pub const BUNDLED_MOTORS_CSV: &str = include_str!("../data/comparison_motors.csv");

const MOTOR_COLUMNS: [&str; 5] = ["name", "volume_ml", "pm_volume_ml", "current_a", "mean_torque_nm"];

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("row {row}, column `{column}`: {reason}")]
    Field {
        row: usize,
        column: &'static str,
        reason: String,
    },
    #[error("invalid motor record `{name}`: {reason}")]
    InvalidRecord { name: String, reason: &'static str },
    #[error("motors file header must be {expected:?}, found {found:?}")]
    Header { expected: Vec<&'static str>, found: Vec<String> },
    #[error("baseline has zero torque density per ampere")]
    ZeroBaseline,
    #[error("no motor named `{0}`")]
    UnknownMotor(String),
    #[error("no motor records")]
    Empty,
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// Primitive data of one motor. Volumes in mL, current in A, torque in N·m.
#[derive(Debug, Clone, PartialEq)]
pub struct MotorRecord {
    pub name: String,
    pub motor_volume: f64,
    pub pm_volume: Option<f64>,
    pub current: f64,
    pub mean_torque: f64,
}

impl MotorRecord {
    pub fn validate(&self) -> Result<(), MetricsError> {
        let invalid = |reason| MetricsError::InvalidRecord {
            name: self.name.clone(),
            reason,
        };
        if !(self.motor_volume > 0.0 && self.motor_volume.is_finite()) {
            return Err(invalid("volume must be positive"));
        }
        if !(self.current > 0.0 && self.current.is_finite()) {
            return Err(invalid("current must be positive"));
        }
        if !(self.mean_torque >= 0.0 && self.mean_torque.is_finite()) {
            return Err(invalid("mean torque must be non-negative"));
        }
        if let Some(v) = self.pm_volume {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(invalid("magnet volume must be non-negative"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsRow {
    /// N·m/L
    pub torque_density: f64,
    /// N·m/A
    pub torque_per_ampere: f64,
    /// N·m/L/A
    pub torque_density_per_ampere: f64,
}

pub fn derive_metrics(rec: &MotorRecord) -> MetricsRow {
    let torque_density = rec.mean_torque / (rec.motor_volume / 1000.0);
    MetricsRow {
        torque_density,
        torque_per_ampere: rec.mean_torque / rec.current,
        torque_density_per_ampere: torque_density / rec.current,
    }
}

/// Percentage by which `a` exceeds `b` in torque density per ampere.
pub fn improvement_percent(a: &MetricsRow, b: &MetricsRow) -> Result<f64, MetricsError> {
    if b.torque_density_per_ampere == 0.0 {
        return Err(MetricsError::ZeroBaseline);
    }
    Ok(100.0 * (a.torque_density_per_ampere - b.torque_density_per_ampere) / b.torque_density_per_ampere)
}

/// Reads a motors CSV with header `name,volume_ml,pm_volume_ml,current_a,mean_torque_nm`.
/// An empty `pm_volume_ml` cell means the motor has no magnets.
pub fn read_motors<R: Read>(reader: R) -> Result<Vec<MotorRecord>, MetricsError> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(reader);
    let found: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
    if found != MOTOR_COLUMNS {
        return Err(MetricsError::Header {
            expected: MOTOR_COLUMNS.to_vec(),
            found,
        });
    }
    let mut records = Vec::new();
    for (k, rec) in rdr.records().enumerate() {
        let rec = rec?;
        // data rows start on line 2
        let row = k + 2;
        let cell = |c: usize| rec.get(c).unwrap_or("");
        let number = |c: usize| -> Result<f64, MetricsError> {
            let raw = cell(c);
            if raw.is_empty() {
                return Err(MetricsError::Field {
                    row,
                    column: MOTOR_COLUMNS[c],
                    reason: "missing value".into(),
                });
            }
            raw.parse::<f64>().map_err(|_| MetricsError::Field {
                row,
                column: MOTOR_COLUMNS[c],
                reason: format!("`{raw}` is not a number"),
            })
        };
        if rec.len() != MOTOR_COLUMNS.len() {
            return Err(MetricsError::Field {
                row,
                column: MOTOR_COLUMNS[rec.len().min(MOTOR_COLUMNS.len() - 1)],
                reason: format!("expected {} cells, found {}", MOTOR_COLUMNS.len(), rec.len()),
            });
        }
        if cell(0).is_empty() {
            return Err(MetricsError::Field {
                row,
                column: "name",
                reason: "missing value".into(),
            });
        }
        let record = MotorRecord {
            name: cell(0).to_owned(),
            motor_volume: number(1)?,
            pm_volume: if cell(2).is_empty() { None } else { Some(number(2)?) },
            current: number(3)?,
            mean_torque: number(4)?,
        };
        record.validate()?;
        records.push(record);
    }
    Ok(records)
}

pub fn bundled_motors() -> Vec<MotorRecord> {
    read_motors(BUNDLED_MOTORS_CSV.as_bytes()).expect("bundled motors file is valid")
}

/// Derived values print with three decimals, rounding exact ties to even;
/// `full_precision` prints the shortest representation that round-trips.
pub fn format_value(x: f64, full_precision: bool) -> String {
    if full_precision {
        format!("{x}")
    } else {
        format!("{x:.3}")
    }
}

/// Comparison table as CSV. With a baseline, a final column gives each
/// motor's improvement in torque density per ampere over that motor.
pub fn comparison_table(
    records: &[MotorRecord],
    baseline: Option<&str>,
    full_precision: bool,
) -> Result<String, MetricsError> {
    if records.is_empty() {
        return Err(MetricsError::Empty);
    }
    let base = match baseline {
        Some(name) => Some(derive_metrics(
            records
                .iter()
                .find(|r| r.name == name)
                .ok_or_else(|| MetricsError::UnknownMotor(name.to_owned()))?,
        )),
        None => None,
    };
    let mut wtr = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    let mut header = vec![
        "name",
        "volume_ml",
        "pm_volume_ml",
        "current_a",
        "mean_torque_nm",
        "torque_density_nm_per_l",
        "torque_per_ampere_nm_per_a",
        "torque_density_per_ampere_nm_per_l_per_a",
    ];
    if base.is_some() {
        header.push("improvement_over_baseline_pct");
    }
    wtr.write_record(&header)?;
    for r in records {
        let m = derive_metrics(r);
        let mut row = vec![
            r.name.clone(),
            format!("{}", r.motor_volume),
            r.pm_volume.map(|v| format!("{v}")).unwrap_or_default(),
            format!("{}", r.current),
            format!("{}", r.mean_torque),
            format_value(m.torque_density, full_precision),
            format_value(m.torque_per_ampere, full_precision),
            format_value(m.torque_density_per_ampere, full_precision),
        ];
        if let Some(b) = &base {
            row.push(format_value(improvement_percent(&m, b)?, full_precision));
        }
        wtr.write_record(&row)?;
    }
    let bytes = wtr.into_inner().map_err(|e| MetricsError::Csv(e.into_error().into()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}
