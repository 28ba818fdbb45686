//! Batches of randomised scenarios written to disk with a CSV manifest.

use std::path::Path;

use rand::{Rng, RngCore};
use rayon::prelude::*;

use super::scenario::{render_scenario_with, Scenario, SAMPLE_RATE};
use super::{rng_for, Stream};
use crate::error::{Error, Result};
use crate::event::EventClass;
use crate::io::{write_manifest, write_wav};

pub const MANIFEST_FILE: &str = "manifest.csv";

#[derive(Debug, Clone, PartialEq)]
pub struct ManifestRow {
    pub id: String,
    pub label: EventClass,
    pub seed: u64,
    /// Relative to the manifest's directory.
    pub path_ref: String,
    pub path_mic: String,
    pub event_start_s: f64,
    pub event_dur_s: f64,
}

/// Deterministic scenario list: `n_per_class` of each class in `classes`.
///
/// Randomisation is drawn for every class regardless of the filter, so a
/// subset run reproduces the same clips as the full dataset.
pub fn dataset_scenarios(
    n_per_class: usize,
    base_seed: u64,
    classes: &[EventClass],
) -> Result<Vec<(String, Scenario)>> {
    if n_per_class < 2 {
        return Err(Error::config(format!(
            "at least 2 scenarios per class are required, got {n_per_class}"
        )));
    }
    let mut rng = rng_for(base_seed, Stream::Dataset);
    let mut out = Vec::new();
    for class in EventClass::ALL {
        for i in 0..n_per_class {
            let mut sc = Scenario::new(class, rng.next_u64());
            let snr_draw = rng.gen_range(-5.0..=10.0);
            let jitter = rng.gen_range(0.8..=1.2);
            match class {
                EventClass::DoubleTalk => sc.snr_db = snr_draw,
                EventClass::EchoPathChange => sc.severity = (sc.severity * jitter).min(1.0),
                EventClass::Repositioning => {
                    sc.severity = (sc.severity * jitter).min(1.0);
                    sc.snr_db += 0.2 * snr_draw;
                }
                EventClass::SteadyState => {}
            }
            if classes.contains(&class) {
                out.push((format!("{}_{:03}", class.as_str(), i), sc));
            }
        }
    }
    Ok(out)
}

/// Renders the dataset into `out_dir` as `<id>_ref.wav` / `<id>_mic.wav`
/// pairs plus `manifest.csv`.
pub fn make_dataset(
    n_per_class: usize,
    base_seed: u64,
    classes: &[EventClass],
    out_dir: &Path,
    interferer: Option<&[f64]>,
) -> Result<Vec<ManifestRow>> {
    let scenarios = dataset_scenarios(n_per_class, base_seed, classes)?;
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let rows = scenarios
        .par_iter()
        .map(|(id, sc)| {
            let scene = render_scenario_with(sc, interferer)?;
            let path_ref = format!("{id}_ref.wav");
            let path_mic = format!("{id}_mic.wav");
            write_wav(&out_dir.join(&path_ref), &scene.reference, SAMPLE_RATE as u32)?;
            write_wav(&out_dir.join(&path_mic), &scene.mic, SAMPLE_RATE as u32)?;
            Ok(ManifestRow {
                id: id.clone(),
                label: sc.label,
                seed: sc.seed,
                path_ref,
                path_mic,
                event_start_s: sc.event_start_s,
                event_dur_s: sc.event_duration_s,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    write_manifest(&out_dir.join(MANIFEST_FILE), &rows)?;
    Ok(rows)
}
