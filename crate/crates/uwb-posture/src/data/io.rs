//! JSONL dataset serialization.
//!
//! A dataset file is line-delimited JSON: one header record followed by one
//! record per frame. The header is `{"schema_version":1,"n_taps":128}`.
//! Frame records carry the owning sample's metadata inline so the format
//! stays streamable:
//!
//! ```text
//! {"sample_id":"...","subject_id":"...","label":"upright","scenario_tags":[],
//!  "timestamp_s":0.0,"ranging":{...},"rx1":{...,"cir_re":[...],"cir_im":[...]},
//!  "rx2":{...}}
//! ```
//!
//! Frames of one sample appear consecutively in timestamp order. Numbers are
//! written with enough precision that a save/load round trip reproduces every
//! value exactly.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{
    validate_frame, AntennaFrameMetrics, CirCapture, ComplexTap, DataError, Dataset,
    FrameValidationError, RangingRecord, RxId, Sample, SampleLabel, UwbFrame, Violation,
    NOMINAL_FRAME_INTERVAL_S, SCHEMA_VERSION,
};

#[derive(Serialize, Deserialize)]
struct HeaderWire {
    schema_version: u32,
    n_taps: u32,
}

#[derive(Serialize, Deserialize)]
struct RangingWire {
    distance_cm: f64,
    azimuth_deg: f64,
    elevation_deg: f64,
    aoa_fom: i64,
    pdoa_deg: f64,
}

#[derive(Serialize, Deserialize)]
struct RxWire {
    nlos: bool,
    first_path_index_ns: f64,
    main_path_index_ns: f64,
    snr_main_db: f64,
    snr_first_db: f64,
    snr_total_db: f64,
    rssi_db: f64,
    cir_main_power: u32,
    cir_first_path_power: u32,
    noise_variance: f64,
    cfo_ppm: f64,
    aoa_phase_deg: f64,
    cir_re: Vec<f64>,
    cir_im: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct FrameWire {
    sample_id: String,
    subject_id: String,
    label: String,
    scenario_tags: Vec<String>,
    timestamp_s: f64,
    ranging: RangingWire,
    rx1: RxWire,
    rx2: RxWire,
}

/// One parsed frame line together with its sample metadata.
#[derive(Debug, Clone)]
pub struct FrameRecord {
    pub sample_id: String,
    pub subject_id: String,
    pub label: SampleLabel,
    pub scenario_tags: Vec<String>,
    pub frame: UwbFrame,
}

/// Loader behaviour knobs.
#[derive(Debug, Clone)]
pub struct LoadOptions {
    /// Expected spacing between consecutive frames of a sample. Spacing may
    /// deviate by up to 50% before the file is rejected; `None` disables the
    /// spacing check entirely (timestamps must still strictly increase).
    pub nominal_interval_s: Option<f64>,
}

impl Default for LoadOptions {
    fn default() -> Self {
        Self {
            nominal_interval_s: Some(NOMINAL_FRAME_INTERVAL_S),
        }
    }
}

fn metrics_from_wire(w: &RxWire) -> AntennaFrameMetrics {
    AntennaFrameMetrics {
        nlos: w.nlos,
        first_path_index_ns: w.first_path_index_ns,
        main_path_index_ns: w.main_path_index_ns,
        snr_main_db: w.snr_main_db,
        snr_first_db: w.snr_first_db,
        snr_total_db: w.snr_total_db,
        rssi_db: w.rssi_db,
        cir_main_power: w.cir_main_power,
        cir_first_path_power: w.cir_first_path_power,
        noise_variance: w.noise_variance,
        cfo_ppm: w.cfo_ppm,
        aoa_phase_deg: w.aoa_phase_deg,
    }
}

fn taps_from_wire(w: &RxWire, rx: RxId) -> Result<CirCapture, String> {
    if w.cir_re.len() != w.cir_im.len() {
        return Err(format!(
            "{rx:?}: cir_re has {} entries but cir_im has {}",
            w.cir_re.len(),
            w.cir_im.len()
        ));
    }
    let taps = w
        .cir_re
        .iter()
        .zip(&w.cir_im)
        .map(|(&re, &im)| ComplexTap { re, im })
        .collect();
    Ok(CirCapture { rx, taps })
}

fn frame_from_wire(wire: FrameWire, line: usize) -> Result<FrameRecord, DataError> {
    let parse_err = |message: String| DataError::Parse { line, message };

    let label = SampleLabel::from_name(&wire.label)
        .ok_or_else(|| parse_err(format!("unknown label {:?}", wire.label)))?;

    // The figure of merit is range-checked before narrowing so an
    // out-of-range integer surfaces as a range violation, not a parse error.
    if !(0..=255).contains(&wire.ranging.aoa_fom) {
        return Err(DataError::InvalidFrame {
            line,
            source: FrameValidationError {
                violations: vec![Violation::RangeViolation {
                    field: "aoa_fom",
                    value: wire.ranging.aoa_fom as f64,
                    min: 0.0,
                    max: 100.0,
                }],
            },
        });
    }

    let frame = UwbFrame {
        timestamp_s: wire.timestamp_s,
        ranging: RangingRecord {
            distance_cm: wire.ranging.distance_cm,
            azimuth_deg: wire.ranging.azimuth_deg,
            elevation_deg: wire.ranging.elevation_deg,
            aoa_fom: wire.ranging.aoa_fom as u8,
            pdoa_deg: wire.ranging.pdoa_deg,
        },
        rx1: metrics_from_wire(&wire.rx1),
        rx2: metrics_from_wire(&wire.rx2),
        cir_rx1: taps_from_wire(&wire.rx1, RxId::Rx1).map_err(parse_err)?,
        cir_rx2: taps_from_wire(&wire.rx2, RxId::Rx2).map_err(parse_err)?,
    };

    let mut tags = wire.scenario_tags;
    tags.sort();
    tags.dedup();

    Ok(FrameRecord {
        sample_id: wire.sample_id,
        subject_id: wire.subject_id,
        label,
        scenario_tags: tags,
        frame,
    })
}

/// Parses one frame record line. The frame is validated for internal
/// consistency (its own tap count, metric ranges); `line` is only used to
/// label errors.
pub fn parse_frame_line(line: &str, line_number: usize) -> Result<FrameRecord, DataError> {
    let wire: FrameWire = serde_json::from_str(line).map_err(|e| DataError::Parse {
        line: line_number,
        message: e.to_string(),
    })?;
    let record = frame_from_wire(wire, line_number)?;
    let n_taps = record.frame.cir_rx1.taps.len();
    validate_frame(&record.frame, n_taps)
        .map_err(|source| DataError::InvalidFrame {
            line: line_number,
            source,
        })?;
    Ok(record)
}

struct SampleBuilder {
    sample_id: String,
    subject_id: String,
    label: SampleLabel,
    scenario_tags: Vec<String>,
    frames: Vec<UwbFrame>,
    first_line: usize,
}

/// Loads a dataset with default options.
pub fn load_dataset(path: impl AsRef<Path>) -> Result<Dataset, DataError> {
    load_dataset_with(path, &LoadOptions::default())
}

/// Loads a dataset, checking the header, every frame, and the per-sample
/// ordering invariants. An empty file yields an empty dataset with default
/// header values.
pub fn load_dataset_with(path: impl AsRef<Path>, opts: &LoadOptions) -> Result<Dataset, DataError> {
    let file = File::open(path)?;
    load_dataset_from(BufReader::new(file), opts)
}

fn load_dataset_from<R: Read>(reader: BufReader<R>, opts: &LoadOptions) -> Result<Dataset, DataError> {
    let mut lines = reader.lines().enumerate();

    let header = loop {
        match lines.next() {
            None => {
                return Ok(Dataset {
                    schema_version: SCHEMA_VERSION,
                    n_taps: super::DEFAULT_N_TAPS,
                    samples: Vec::new(),
                })
            }
            Some((idx, line)) => {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                let header: HeaderWire =
                    serde_json::from_str(&line).map_err(|e| DataError::Parse {
                        line: idx + 1,
                        message: format!("expected header record: {e}"),
                    })?;
                break header;
            }
        }
    };

    if header.schema_version != SCHEMA_VERSION {
        return Err(DataError::SchemaVersionMismatch {
            found: header.schema_version,
            supported: SCHEMA_VERSION,
        });
    }
    let n_taps = header.n_taps as usize;

    let mut order: Vec<String> = Vec::new();
    let mut builders: HashMap<String, SampleBuilder> = HashMap::new();

    for (idx, line) in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let lineno = idx + 1;
        let record = parse_frame_line(&line, lineno)?;
        validate_frame(&record.frame, n_taps).map_err(|source| DataError::InvalidFrame {
            line: lineno,
            source,
        })?;

        match builders.get_mut(&record.sample_id) {
            None => {
                order.push(record.sample_id.clone());
                builders.insert(
                    record.sample_id.clone(),
                    SampleBuilder {
                        sample_id: record.sample_id,
                        subject_id: record.subject_id,
                        label: record.label,
                        scenario_tags: record.scenario_tags,
                        frames: vec![record.frame],
                        first_line: lineno,
                    },
                );
            }
            Some(b) => {
                if b.subject_id != record.subject_id
                    || b.label != record.label
                    || b.scenario_tags != record.scenario_tags
                {
                    return Err(DataError::Invariant(format!(
                        "sample {:?} has inconsistent metadata between line {} and line {}",
                        b.sample_id, b.first_line, lineno
                    )));
                }
                b.frames.push(record.frame);
            }
        }
    }

    let mut samples = Vec::with_capacity(order.len());
    for id in order {
        let mut b = builders.remove(&id).unwrap();
        b.frames
            .sort_by(|a, z| a.timestamp_s.partial_cmp(&z.timestamp_s).unwrap());
        for pair in b.frames.windows(2) {
            let dt = pair[1].timestamp_s - pair[0].timestamp_s;
            if dt <= 0.0 {
                return Err(DataError::Invariant(format!(
                    "sample {id:?}: timestamps are not strictly increasing (dt = {dt})"
                )));
            }
            if let Some(nominal) = opts.nominal_interval_s {
                if dt < 0.5 * nominal || dt > 1.5 * nominal {
                    return Err(DataError::Invariant(format!(
                        "sample {id:?}: frame spacing {dt}s outside 50% of nominal {nominal}s"
                    )));
                }
            }
        }
        samples.push(Sample {
            sample_id: b.sample_id,
            subject_id: b.subject_id,
            label: b.label,
            scenario_tags: b.scenario_tags,
            frames: b.frames,
        });
    }

    Ok(Dataset {
        schema_version: header.schema_version,
        n_taps,
        samples,
    })
}

fn wire_from_metrics(m: &AntennaFrameMetrics, cir: &CirCapture) -> RxWire {
    RxWire {
        nlos: m.nlos,
        first_path_index_ns: m.first_path_index_ns,
        main_path_index_ns: m.main_path_index_ns,
        snr_main_db: m.snr_main_db,
        snr_first_db: m.snr_first_db,
        snr_total_db: m.snr_total_db,
        rssi_db: m.rssi_db,
        cir_main_power: m.cir_main_power,
        cir_first_path_power: m.cir_first_path_power,
        noise_variance: m.noise_variance,
        cfo_ppm: m.cfo_ppm,
        aoa_phase_deg: m.aoa_phase_deg,
        cir_re: cir.taps.iter().map(|t| t.re).collect(),
        cir_im: cir.taps.iter().map(|t| t.im).collect(),
    }
}

/// Serializes one frame record to its JSONL line (no trailing newline).
pub(crate) fn frame_line(sample: &Sample, frame: &UwbFrame) -> String {
    let wire = FrameWire {
        sample_id: sample.sample_id.clone(),
        subject_id: sample.subject_id.clone(),
        label: sample.label.name().to_string(),
        scenario_tags: sample.scenario_tags.clone(),
        timestamp_s: frame.timestamp_s,
        ranging: RangingWire {
            distance_cm: frame.ranging.distance_cm,
            azimuth_deg: frame.ranging.azimuth_deg,
            elevation_deg: frame.ranging.elevation_deg,
            aoa_fom: i64::from(frame.ranging.aoa_fom),
            pdoa_deg: frame.ranging.pdoa_deg,
        },
        rx1: wire_from_metrics(&frame.rx1, &frame.cir_rx1),
        rx2: wire_from_metrics(&frame.rx2, &frame.cir_rx2),
    };
    serde_json::to_string(&wire).expect("frame serialization cannot fail")
}

/// Writes a dataset to JSONL: header first, then samples in order, each
/// sample's frames in timestamp order.
pub fn save_dataset(dataset: &Dataset, path: impl AsRef<Path>) -> Result<(), DataError> {
    let file = File::create(path)?;
    let mut w = BufWriter::new(file);
    let header = HeaderWire {
        schema_version: dataset.schema_version,
        n_taps: dataset.n_taps as u32,
    };
    writeln!(w, "{}", serde_json::to_string(&header).unwrap())?;
    for sample in &dataset.samples {
        for frame in &sample.frames {
            writeln!(w, "{}", frame_line(sample, frame))?;
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::super::tests::test_frame;
    use super::*;

    fn tiny_dataset() -> Dataset {
        let mut frames = Vec::new();
        for i in 0..3 {
            let mut f = test_frame(16);
            f.timestamp_s = i as f64 * 0.2;
            f.cir_rx1.taps[3].re = 0.5 + i as f64 * 0.001;
            frames.push(f);
        }
        Dataset {
            schema_version: SCHEMA_VERSION,
            n_taps: 16,
            samples: vec![Sample {
                sample_id: "s01-upright-0001".into(),
                subject_id: "s01".into(),
                label: SampleLabel::Known(super::super::PostureLabel::Upright),
                scenario_tags: vec!["desk_a".into()],
                frames,
            }],
        }
    }

    fn load_str(text: &str) -> Result<Dataset, DataError> {
        load_dataset_from(BufReader::new(text.as_bytes()), &LoadOptions::default())
    }

    #[test]
    fn empty_file_is_an_empty_dataset() {
        let ds = load_str("").unwrap();
        assert_eq!(ds.samples.len(), 0);
        assert_eq!(ds.schema_version, SCHEMA_VERSION);
    }

    #[test]
    fn header_only_file_is_empty() {
        let ds = load_str("{\"schema_version\":1,\"n_taps\":64}\n").unwrap();
        assert_eq!(ds.samples.len(), 0);
        assert_eq!(ds.n_taps, 64);
    }

    #[test]
    fn unsupported_schema_version_is_rejected() {
        let err = load_str("{\"schema_version\":2,\"n_taps\":64}\n").unwrap_err();
        assert!(matches!(
            err,
            DataError::SchemaVersionMismatch { found: 2, .. }
        ));
    }

    #[test]
    fn single_sample_round_trip_is_exact() {
        let ds = tiny_dataset();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("tiny.jsonl");
        save_dataset(&ds, &path).unwrap();
        let loaded = load_dataset(&path).unwrap();
        assert_eq!(loaded, ds);

        // A second save of the loaded dataset reproduces the file bytes.
        let path2 = dir.path().join("tiny2.jsonl");
        save_dataset(&loaded, &path2).unwrap();
        assert_eq!(
            std::fs::read(&path).unwrap(),
            std::fs::read(&path2).unwrap()
        );
    }

    #[test]
    fn out_of_range_fom_reports_line_number() {
        let ds = tiny_dataset();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.jsonl");
        save_dataset(&ds, &path).unwrap();
        let text = std::fs::read_to_string(&path)
            .unwrap()
            .replace("\"aoa_fom\":100", "\"aoa_fom\":101");
        let err = load_str(&text).unwrap_err();
        match err {
            DataError::InvalidFrame { line, .. } => assert_eq!(line, 2),
            other => panic!("expected InvalidFrame, got {other:?}"),
        }
    }

    #[test]
    fn malformed_json_reports_line_number() {
        let text = "{\"schema_version\":1,\"n_taps\":16}\n{not json\n";
        match load_str(text).unwrap_err() {
            DataError::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("expected Parse, got {other:?}"),
        }
    }

    #[test]
    fn inconsistent_sample_metadata_is_rejected() {
        let ds = tiny_dataset();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("meta.jsonl");
        save_dataset(&ds, &path).unwrap();
        let mut lines: Vec<String> = std::fs::read_to_string(&path)
            .unwrap()
            .lines()
            .map(String::from)
            .collect();
        lines[3] = lines[3].replace("\"label\":\"upright\"", "\"label\":\"hunch\"");
        match load_str(&lines.join("\n")).unwrap_err() {
            DataError::Invariant(msg) => assert!(msg.contains("inconsistent")),
            other => panic!("expected Invariant, got {other:?}"),
        }
    }

    #[test]
    fn irregular_spacing_is_rejected_only_when_enforced() {
        let mut ds = tiny_dataset();
        ds.samples[0].frames[2].timestamp_s = 10.0;
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("gap.jsonl");
        save_dataset(&ds, &path).unwrap();
        assert!(matches!(
            load_dataset(&path).unwrap_err(),
            DataError::Invariant(_)
        ));
        let lenient = LoadOptions {
            nominal_interval_s: None,
        };
        assert!(load_dataset_with(&path, &lenient).is_ok());
    }

    #[test]
    fn duplicate_timestamps_are_rejected() {
        let mut ds = tiny_dataset();
        ds.samples[0].frames[1].timestamp_s = 0.0;
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("dup.jsonl");
        save_dataset(&ds, &path).unwrap();
        assert!(matches!(
            load_dataset(&path).unwrap_err(),
            DataError::Invariant(_)
        ));
    }

    #[test]
    fn parse_frame_line_round_trips() {
        let ds = tiny_dataset();
        let line = frame_line(&ds.samples[0], &ds.samples[0].frames[0]);
        let rec = parse_frame_line(&line, 7).unwrap();
        assert_eq!(rec.sample_id, "s01-upright-0001");
        assert_eq!(rec.frame, ds.samples[0].frames[0]);
    }
}
