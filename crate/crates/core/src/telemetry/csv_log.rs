use std::io::{Read, Write};

use super::{LatLon, TelemetryError, TelemetrySample, DOOR_COUNT};

pub const TELEMETRY_HEADER: [&str; 9] = [
    "t_ms", "lat", "lon", "s_m", "speed_mps", "door1", "door2", "door3", "door4",
];

/// Parses a telemetry log. The whole file is rejected on the first bad row;
/// reported line numbers are 1-based and count the header.
pub fn parse_telemetry<R: Read>(reader: R) -> Result<Vec<TelemetrySample>, TelemetryError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(reader);

    let mut records = rdr.records();
    match records.next() {
        None => return Ok(Vec::new()),
        Some(header) => {
            let header = header?;
            let fields: Vec<&str> = header.iter().map(str::trim).collect();
            if fields != TELEMETRY_HEADER {
                return Err(TelemetryError::BadHeader {
                    found: fields.join(","),
                });
            }
        }
    }

    let mut samples: Vec<TelemetrySample> = Vec::new();
    for record in records {
        let record = record?;
        let line = record.position().map(|p| p.line() as usize).unwrap_or(0);
        let sample = parse_row(&record, line)?;
        if let Some(prev) = samples.last() {
            if sample.t_ms <= prev.t_ms {
                return Err(TelemetryError::NonMonotonicTimestamp {
                    line,
                    t_ms: sample.t_ms,
                });
            }
        }
        samples.push(sample);
    }
    Ok(samples)
}

fn parse_row(record: &csv::StringRecord, line: usize) -> Result<TelemetrySample, TelemetryError> {
    let malformed = |reason: String| TelemetryError::MalformedRow { line, reason };
    if record.len() != TELEMETRY_HEADER.len() {
        return Err(malformed(format!(
            "expected {} fields, found {}",
            TELEMETRY_HEADER.len(),
            record.len()
        )));
    }
    let field = |i: usize| record[i].trim();

    let t_ms: i64 = field(0)
        .parse()
        .map_err(|_| malformed(format!("bad t_ms {:?}", field(0))))?;
    let lat = optional_f64(field(1), "lat").map_err(malformed)?;
    let lon = optional_f64(field(2), "lon").map_err(malformed)?;
    let s_m = optional_f64(field(3), "s_m").map_err(malformed)?;
    let speed_mps = optional_f64(field(4), "speed_mps")
        .map_err(malformed)?
        .ok_or_else(|| malformed("speed_mps is empty".into()))?;
    if speed_mps < 0.0 {
        return Err(malformed(format!("negative speed {speed_mps}")));
    }

    let lat_lon = match (lat, lon) {
        (Some(lat), Some(lon)) => Some(LatLon { lat, lon }),
        (None, None) => None,
        _ => return Err(malformed("lat and lon must be given together".into())),
    };
    if lat_lon.is_none() && s_m.is_none() {
        return Err(TelemetryError::MissingPosition { line });
    }

    let mut doors = [false; DOOR_COUNT];
    for (k, door) in doors.iter_mut().enumerate() {
        *door = match field(5 + k) {
            "0" => false,
            "1" => true,
            other => return Err(malformed(format!("door{} must be 0 or 1, got {other:?}", k + 1))),
        };
    }

    Ok(TelemetrySample {
        t_ms,
        lat_lon,
        s_m,
        speed_mps,
        doors,
    })
}

fn optional_f64(text: &str, name: &str) -> Result<Option<f64>, String> {
    if text.is_empty() {
        return Ok(None);
    }
    match text.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(Some(v)),
        _ => Err(format!("bad {name} {text:?}")),
    }
}

/// Writes samples in the log format; floats carry six decimals.
pub fn write_telemetry<W: Write>(
    writer: W,
    samples: &[TelemetrySample],
) -> Result<(), TelemetryError> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(TELEMETRY_HEADER)?;
    for s in samples {
        let (lat, lon) = match s.lat_lon {
            Some(p) => (format!("{:.6}", p.lat), format!("{:.6}", p.lon)),
            None => (String::new(), String::new()),
        };
        let s_m = s.s_m.map(|v| format!("{v:.6}")).unwrap_or_default();
        let door = |k: usize| if s.doors[k] { "1" } else { "0" };
        wtr.write_record([
            s.t_ms.to_string().as_str(),
            &lat,
            &lon,
            &s_m,
            &format!("{:.6}", s.speed_mps),
            door(0),
            door(1),
            door(2),
            door(3),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}
