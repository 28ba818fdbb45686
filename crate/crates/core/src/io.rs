//! WAV and CSV file formats.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::event::EventClass;
use crate::features::{EventRecord, FeatureVector, FEATURE_LEN};
use crate::sim::ManifestRow;
use crate::stats::{StatsVector, STATS_CSV_HEADER};

/// Reads a mono 32-bit float WAV file.
pub fn read_wav(path: &Path) -> Result<(Vec<f64>, u32)> {
    let wav_err = |source| Error::Wav {
        path: path.to_path_buf(),
        source,
    };
    let mut reader = hound::WavReader::open(path).map_err(wav_err)?;
    let spec = reader.spec();
    if spec.channels != 1 {
        return Err(Error::input(format!(
            "{}: expected mono audio, found {} channels",
            path.display(),
            spec.channels
        )));
    }
    if spec.sample_format != hound::SampleFormat::Float || spec.bits_per_sample != 32 {
        return Err(Error::input(format!(
            "{}: expected 32-bit float samples, found {}-bit {:?}",
            path.display(),
            spec.bits_per_sample,
            spec.sample_format
        )));
    }
    let samples = reader
        .samples::<f32>()
        .map(|s| s.map(f64::from))
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(wav_err)?;
    Ok((samples, spec.sample_rate))
}

/// Writes mono 32-bit float samples.
pub fn write_wav(path: &Path, samples: &[f64], sample_rate: u32) -> Result<()> {
    let wav_err = |source| Error::Wav {
        path: path.to_path_buf(),
        source,
    };
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate,
        bits_per_sample: 32,
        sample_format: hound::SampleFormat::Float,
    };
    let mut writer = hound::WavWriter::create(path, spec).map_err(wav_err)?;
    for &s in samples {
        writer.write_sample(s as f32).map_err(wav_err)?;
    }
    writer.finalize().map_err(wav_err)
}

fn csv_writer(path: &Path) -> Result<csv::Writer<BufWriter<File>>> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::Writer::from_writer(BufWriter::new(file)))
}

fn csv_reader(path: &Path) -> Result<csv::Reader<File>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::ReaderBuilder::new().from_reader(file))
}

fn write_err(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::io(path, std::io::Error::other(format!("{other:?}"))),
    }
}

fn parse_err(path: &Path, line: u64, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

fn csv_read_err(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line()).unwrap_or(0);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => parse_err(path, line, format!("{other:?}")),
    }
}

fn check_header(path: &Path, rdr: &mut csv::Reader<File>, expected: &[String]) -> Result<()> {
    let header = rdr.headers().map_err(|e| csv_read_err(path, e))?;
    if header.iter().ne(expected.iter().map(String::as_str)) {
        return Err(parse_err(
            path,
            1,
            format!("expected header {}", expected.join(",")),
        ));
    }
    Ok(())
}

fn field<T: std::str::FromStr>(path: &Path, rec: &csv::StringRecord, idx: usize, name: &str) -> Result<T> {
    let line = rec.position().map(|p| p.line()).unwrap_or(0);
    let raw = rec
        .get(idx)
        .ok_or_else(|| parse_err(path, line, format!("missing column {name}")))?;
    raw.trim()
        .parse()
        .map_err(|_| parse_err(path, line, format!("invalid {name} value '{raw}'")))
}

pub fn write_stats_csv(path: &Path, stats: &[StatsVector]) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(STATS_CSV_HEADER).map_err(|e| write_err(path, e))?;
    for s in stats {
        let mut row = vec![s.frame.to_string()];
        row.extend(s.to_array().iter().map(|v| v.to_string()));
        w.write_record(&row).map_err(|e| write_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_stats_csv(path: &Path) -> Result<Vec<StatsVector>> {
    let mut rdr = csv_reader(path)?;
    let header: Vec<String> = STATS_CSV_HEADER.iter().map(|s| s.to_string()).collect();
    check_header(path, &mut rdr, &header)?;
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_read_err(path, e))?;
        let frame = field(path, &rec, 0, "frame")?;
        let mut v = [0.0; 5];
        for (i, slot) in v.iter_mut().enumerate() {
            *slot = field(path, &rec, i + 1, STATS_CSV_HEADER[i + 1])?;
        }
        out.push(StatsVector::from_array(frame, v));
    }
    Ok(out)
}

pub fn features_header() -> Vec<String> {
    let mut h = vec!["label".to_string(), "seed".to_string()];
    h.extend((0..FEATURE_LEN).map(|i| format!("f{i}")));
    h
}

pub fn write_features_csv(path: &Path, records: &[EventRecord]) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(features_header()).map_err(|e| write_err(path, e))?;
    for r in records {
        let mut row = vec![r.label.to_string(), r.seed.to_string()];
        row.extend(r.features.values().iter().map(|v| v.to_string()));
        w.write_record(&row).map_err(|e| write_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_features_csv(path: &Path) -> Result<Vec<EventRecord>> {
    let mut rdr = csv_reader(path)?;
    check_header(path, &mut rdr, &features_header())?;
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_read_err(path, e))?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        let label: EventClass = rec
            .get(0)
            .unwrap_or("")
            .parse()
            .map_err(|e: Error| parse_err(path, line, e.to_string()))?;
        let seed = field(path, &rec, 1, "seed")?;
        let mut values = [0.0; FEATURE_LEN];
        for (i, slot) in values.iter_mut().enumerate() {
            *slot = field(path, &rec, i + 2, &format!("f{i}"))?;
        }
        out.push(EventRecord {
            label,
            features: FeatureVector::new(values),
            seed,
        });
    }
    Ok(out)
}

pub const MANIFEST_HEADER: [&str; 7] = [
    "id",
    "label",
    "seed",
    "path_ref",
    "path_mic",
    "event_start_s",
    "event_dur_s",
];

pub fn write_manifest(path: &Path, rows: &[ManifestRow]) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(MANIFEST_HEADER).map_err(|e| write_err(path, e))?;
    for r in rows {
        w.write_record([
            r.id.clone(),
            r.label.to_string(),
            r.seed.to_string(),
            r.path_ref.clone(),
            r.path_mic.clone(),
            r.event_start_s.to_string(),
            r.event_dur_s.to_string(),
        ])
        .map_err(|e| write_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_manifest(path: &Path) -> Result<Vec<ManifestRow>> {
    let mut rdr = csv_reader(path)?;
    let header: Vec<String> = MANIFEST_HEADER.iter().map(|s| s.to_string()).collect();
    check_header(path, &mut rdr, &header)?;
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_read_err(path, e))?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        let text = |i: usize| rec.get(i).unwrap_or("").to_string();
        out.push(ManifestRow {
            id: text(0),
            label: text(1)
                .parse()
                .map_err(|e: Error| parse_err(path, line, e.to_string()))?,
            seed: field(path, &rec, 2, "seed")?,
            path_ref: text(3),
            path_mic: text(4),
            event_start_s: field(path, &rec, 5, "event_start_s")?,
            event_dur_s: field(path, &rec, 6, "event_dur_s")?,
        });
    }
    Ok(out)
}

/// Writes `text` to `path`.
pub fn write_text(path: &Path, text: &str) -> Result<()> {
    let mut f = File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wav_round_trip_and_format_checks() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.wav");
        let x = vec![0.0, 0.5, -0.25, 1.0];
        write_wav(&p, &x, 48000).unwrap();
        let (y, sr) = read_wav(&p).unwrap();
        assert_eq!((y, sr), (x, 48000));

        let p16 = dir.path().join("b.wav");
        let spec = hound::WavSpec {
            channels: 1,
            sample_rate: 48000,
            bits_per_sample: 16,
            sample_format: hound::SampleFormat::Int,
        };
        let mut w = hound::WavWriter::create(&p16, spec).unwrap();
        w.write_sample(1i16).unwrap();
        w.finalize().unwrap();
        assert!(matches!(read_wav(&p16), Err(Error::Input(_))));
        assert!(matches!(
            read_wav(&dir.path().join("missing.wav")),
            Err(Error::Wav { .. })
        ));
    }

    #[test]
    fn stats_csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.csv");
        let stats = vec![
            StatsVector::from_array(469, [0.1 + 0.2, 0.4, 0.3, 1e-17, 0.0]),
            StatsVector::from_array(470, [1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0, 0.0, 0.02]),
        ];
        write_stats_csv(&p, &stats).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert!(text.starts_with("frame,P_m,P_s,P_d,U_m,U_s\n"));
        assert_eq!(read_stats_csv(&p).unwrap(), stats);
    }

    #[test]
    fn malformed_stats_report_line() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.csv");
        std::fs::write(&p, "frame,P_m,P_s,P_d,U_m,U_s\n0,1,0,0,0,0\n1,0.5,x,0.5,0,0\n").unwrap();
        match read_stats_csv(&p) {
            Err(Error::Parse { line: 3, message, .. }) => assert!(message.contains("P_s")),
            other => panic!("unexpected {other:?}"),
        }
        std::fs::write(&p, "frame,a\n").unwrap();
        assert!(matches!(read_stats_csv(&p), Err(Error::Parse { line: 1, .. })));
        std::fs::write(&p, "frame,P_m,P_s,P_d,U_m,U_s\n0,1,0\n").unwrap();
        assert!(matches!(read_stats_csv(&p), Err(Error::Parse { line: 2, .. })));
    }
}
