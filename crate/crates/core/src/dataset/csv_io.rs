use std::collections::HashSet;
use std::io::{Read, Write};
use std::path::Path;

use crate::catalog::{Variable, VARIABLE_COUNT};

use super::{Dataset, DatasetError, Features, Provenance, TrajectoryRecord};

/// Exact header row of the trajectory CSV.
pub const CSV_HEADER: [&str; VARIABLE_COUNT + 3] = [
    "trajectory_id",
    "vehicle_id",
    "l_f_col",
    "l_std_s",
    "l_fam",
    "s_f_col",
    "s_lane_d",
    "s_avg_s",
    "s_std_s",
    "lk_avg_s",
    "lk_std_s",
    "lk_max_s",
    "risk_label",
];

pub fn load_csv(path: impl AsRef<Path>) -> Result<Dataset, DatasetError> {
    let file = std::fs::File::open(path)?;
    read_csv(file)
}

pub fn read_csv<R: Read>(reader: R) -> Result<Dataset, DatasetError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    check_header(rdr.headers()?)?;

    let mut records = Vec::new();
    let mut seen = HashSet::new();
    for (i, row) in rdr.records().enumerate() {
        let row_no = i + 1;
        let row = row.map_err(|e| DatasetError::Row {
            row: row_no,
            message: e.to_string(),
        })?;
        let record = parse_row(&row, row_no)?;
        if !seen.insert(record.trajectory_id.clone()) {
            return Err(DatasetError::DuplicateId(record.trajectory_id));
        }
        records.push(record);
    }
    Dataset::new(records, Provenance::Ingested)
}

fn check_header(header: &csv::StringRecord) -> Result<(), DatasetError> {
    let got: Vec<&str> = header.iter().collect();
    let mut counted = HashSet::new();
    for col in &got {
        if !CSV_HEADER.contains(col) {
            return Err(DatasetError::Schema {
                column: col.to_string(),
                problem: "is not part of the schema",
            });
        }
        if !counted.insert(*col) {
            return Err(DatasetError::Schema {
                column: col.to_string(),
                problem: "appears more than once",
            });
        }
    }
    for col in CSV_HEADER {
        if !counted.contains(col) {
            return Err(DatasetError::Schema {
                column: col.to_string(),
                problem: "is missing",
            });
        }
    }
    if let Some((_, expected)) = got.iter().zip(CSV_HEADER).find(|(g, e)| *g != e) {
        return Err(DatasetError::Schema {
            column: expected.to_string(),
            problem: "is out of order",
        });
    }
    Ok(())
}

fn parse_row(row: &csv::StringRecord, row_no: usize) -> Result<TrajectoryRecord, DatasetError> {
    let row_err = |message: String| DatasetError::Row { row: row_no, message };
    let trajectory_id = row[0].to_string();
    if trajectory_id.is_empty() {
        return Err(row_err("empty trajectory_id".into()));
    }
    let mut features = Features::default();
    for v in Variable::ALL {
        let raw = &row[2 + v.index()];
        let x: f64 = raw
            .parse()
            .map_err(|_| row_err(format!("{v}: `{raw}` is not a number")))?;
        features[v] = x;
    }
    features.check().map_err(row_err)?;
    let risk_label = match &row[VARIABLE_COUNT + 2] {
        "0" => 0,
        "1" => 1,
        other => return Err(row_err(format!("risk_label `{other}` is not 0 or 1"))),
    };
    Ok(TrajectoryRecord {
        trajectory_id,
        vehicle_id: row[1].to_string(),
        features,
        risk_label,
    })
}

/// Writes the dataset in the canonical CSV layout. Floats use Rust's shortest
/// round-trip decimal representation, so `read_csv(write_csv(ds))` is lossless.
pub fn write_csv<W: Write>(ds: &Dataset, writer: W) -> Result<(), DatasetError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(CSV_HEADER)?;
    for r in ds.records() {
        let mut row = Vec::with_capacity(CSV_HEADER.len());
        row.push(r.trajectory_id.clone());
        row.push(r.vehicle_id.clone());
        row.extend(r.features.0.iter().map(|x| x.to_string()));
        row.push(r.risk_label.to_string());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}
