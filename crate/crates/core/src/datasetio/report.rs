//! Dataset-level analysis: distribution statistics and semantic correlation.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::campaign::{write_json, Manifest};
use super::raster::{read_pnm, read_raster};
use crate::analysis::{concept_mask, gain_statistics, point_biserial, summarize, Bimodality, Concept, Summary};
use crate::error::{Error, Result};
use crate::scenegen::SemanticClass;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrelationRow {
    pub archetype: String,
    pub concept: String,
    /// `None` when no sample had a defined correlation.
    pub summary: Option<Summary>,
    pub undefined: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub samples: usize,
    pub skipped: usize,
    pub bimodality: Option<Bimodality>,
    pub correlations: Vec<CorrelationRow>,
}

/// Reads every sample's path-gain and semantic rasters, writes
/// `samples.csv`, histogram CSVs and `summary.json` into `out`.
pub fn analyze_dataset(root: &Path, out: &Path) -> Result<AnalysisReport> {
    let manifest = Manifest::load(root)?;
    if manifest.samples.is_empty() {
        return Err(Error::EmptyInput("dataset has no samples".into()));
    }
    let mut maps = Vec::with_capacity(manifest.samples.len());
    let mut r_pb: BTreeMap<(String, &'static str), (Vec<f64>, usize)> = BTreeMap::new();
    for s in &manifest.samples {
        let dir = root.join(&s.dir);
        let pg = read_raster(&dir.join(&s.files.path_gain))?;
        let sem = read_pnm(&dir.join(&s.files.semantic))?;
        let classes: Vec<SemanticClass> = sem.data.iter().map(|&c| SemanticClass::from_id(c).unwrap_or(SemanticClass::Sky)).collect();
        let signal: Vec<f64> = pg.data.iter().map(|&v| v as f64).collect();
        let valid: Vec<bool> = pg.data.iter().map(|v| v.is_finite()).collect();
        for c in Concept::ALL {
            let entry = r_pb.entry((s.archetype.name().to_string(), c.name())).or_default();
            match point_biserial(&concept_mask(&classes, c), &signal, &valid) {
                Ok(r) => entry.0.push(r),
                Err(_) => entry.1 += 1,
            }
        }
        maps.push(pg.data);
    }
    let refs: Vec<&[f32]> = maps.iter().map(|m| m.as_slice()).collect();
    let stats = gain_statistics(&refs)?;

    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let mut table = String::from("sample_id,archetype,mean_db,max_db,std_db,finite\n");
    for (rec, st) in manifest.samples.iter().zip(&stats.samples) {
        match st {
            Some(st) => table.push_str(&format!(
                "{},{},{},{},{},{}\n",
                rec.sample_id,
                rec.archetype.name(),
                st.mean_db,
                st.max_db,
                st.std_db,
                st.finite
            )),
            None => table.push_str(&format!("{},{},,,,0\n", rec.sample_id, rec.archetype.name())),
        }
    }
    let write = |name: &str, text: &str| {
        let p = out.join(name);
        std::fs::write(&p, text).map_err(|e| Error::io(&p, e))
    };
    write("samples.csv", &table)?;
    write("hist_mean_db.csv", &stats.mean_hist.to_csv())?;
    write("hist_max_db.csv", &stats.max_hist.to_csv())?;
    write("hist_std_db.csv", &stats.std_hist.to_csv())?;
    write("hist_pixels_db.csv", &stats.pixel_hist.to_csv())?;
    let report = AnalysisReport {
        samples: manifest.samples.len(),
        skipped: stats.skipped,
        bimodality: stats.bimodality.clone(),
        correlations: r_pb
            .into_iter()
            .map(|((a, c), (vals, undefined))| CorrelationRow {
                archetype: a,
                concept: c.to_string(),
                summary: summarize(&vals),
                undefined,
            })
            .collect(),
    };
    write_json(&out.join("summary.json"), &report)?;
    Ok(report)
}
