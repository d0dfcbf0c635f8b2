//! CSV import for user-supplied recordings: a header row of channel names,
//! then one row per sample with one column per channel.

use std::io::Read;
use std::path::Path;

use ndarray::Array2;

use super::recording::{EegRecording, TrialMeta};
use crate::error::{invalid, Result};

pub fn read_csv_recording(path: impl AsRef<Path>, sample_rate_hz: f64, meta: TrialMeta) -> Result<EegRecording> {
    let file = std::fs::File::open(path)?;
    parse_csv_recording(file, sample_rate_hz, meta)
}

pub fn parse_csv_recording<R: Read>(input: R, sample_rate_hz: f64, meta: TrialMeta) -> Result<EegRecording> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let names: Vec<String> = rdr
        .headers()
        .map_err(|e| invalid(format!("CSV header: {e}")))?
        .iter()
        .map(str::to_string)
        .collect();
    let n_ch = names.len();
    let mut columns: Vec<Vec<f32>> = vec![Vec::new(); n_ch];
    for (row_idx, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| invalid(format!("CSV row {}: {e}", row_idx + 2)))?;
        if record.len() != n_ch {
            return Err(invalid(format!(
                "CSV row {} has {} fields, header has {n_ch}",
                row_idx + 2,
                record.len()
            )));
        }
        for (col, field) in columns.iter_mut().zip(record.iter()) {
            let v: f32 = field
                .parse()
                .map_err(|_| invalid(format!("CSV row {}: bad number {field:?}", row_idx + 2)))?;
            col.push(v);
        }
    }
    let n = columns.first().map_or(0, Vec::len);
    let flat: Vec<f32> = columns.into_iter().flatten().collect();
    let samples = Array2::from_shape_vec((n_ch, n), flat).map_err(|e| invalid(e.to_string()))?;
    EegRecording::new(names, sample_rate_hz, samples, meta)
}
