//! Datasets on disk: RGB-D manifests, the procedural generator's file
//! output, synthesized sample directories, and their loaders.
//!
//! Layout written by `synth`:
//!   out/
//!     rgbd/<id>.ppm, <id>.pgm     procedural source images (when used)
//!     manifest.json               {"split", "seed", "entries": [...]}
//!     samples/<id>.hazy.ppm       8-bit render of the hazy image
//!     samples/<id>.clean.ppm      resized clean image (ground truth)
//!     samples/<id>.trans.pgm      16-bit transmission map
//!     samples/<id>.depth.pgm      16-bit normalized depth
//!     samples/<id>.json           {"id", "source_id", "beta", "airlight"}
//!     samples.json                index of all samples
//!
//! Loaders regenerate the hazy tensor from (clean, transmission, airlight)
//! so a loaded sample keeps the exact synthesis identity; the stored
//! hazy.ppm is the 8-bit rendering of the same data.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use dehaze_core::seed::subseed;
use dehaze_core::synth::{expand_image, procedural_scene, HazeSample, SampleRanges};

use crate::pnm;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    pub clean: String,
    pub depth: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub split: String,
    pub seed: u64,
    pub entries: Vec<ManifestEntry>,
}

impl DatasetManifest {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .with_context(|| format!("reading manifest {}", path.display()))?;
        let manifest: DatasetManifest = serde_json::from_str(&text)
            .with_context(|| format!("parsing manifest {}", path.display()))?;
        let mut seen = std::collections::BTreeSet::new();
        for entry in &manifest.entries {
            if !seen.insert(entry.id.clone()) {
                bail!("manifest {}: duplicate id {}", path.display(), entry.id);
            }
        }
        Ok(manifest)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, serde_json::to_vec_pretty(self)?)
            .with_context(|| format!("writing manifest {}", path.display()))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SampleMeta {
    pub id: String,
    pub source_id: String,
    pub beta: f64,
    pub airlight: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SampleIndex {
    pub split: String,
    pub seed: u64,
    pub width: usize,
    pub height: usize,
    pub samples: Vec<SampleMeta>,
}

/// Generate `count` procedural RGB-D images under `dir/rgbd` and return
/// the manifest (also written to `dir/manifest.json`).
pub fn procedural_rgbd(
    dir: &Path,
    count: usize,
    h: usize,
    w: usize,
    seed: u64,
    split: &str,
) -> Result<DatasetManifest> {
    if count == 0 {
        bail!("--procedural needs at least one image");
    }
    let rgbd = dir.join("rgbd");
    fs::create_dir_all(&rgbd).with_context(|| format!("creating {}", rgbd.display()))?;
    let ids: Vec<String> = (0..count).map(|i| format!("{split}_{i:04}")).collect();
    let results: Vec<Result<ManifestEntry>> = ids
        .par_iter()
        .map(|id| {
            let (clean, depth) = procedural_scene::<f32>(h, w, subseed(seed, &format!("scene:{id}"), 0));
            let clean_rel = format!("rgbd/{id}.ppm");
            let depth_rel = format!("rgbd/{id}.pgm");
            fs::write(dir.join(&clean_rel), pnm::encode_ppm(&clean)?)?;
            fs::write(dir.join(&depth_rel), pnm::encode_pgm16(&depth)?)?;
            Ok(ManifestEntry {
                id: id.clone(),
                clean: clean_rel,
                depth: depth_rel,
            })
        })
        .collect();
    let entries = results.into_iter().collect::<Result<Vec<_>>>()?;
    let manifest = DatasetManifest {
        split: split.to_string(),
        seed,
        entries,
    };
    manifest.save(&dir.join("manifest.json"))?;
    Ok(manifest)
}

pub struct SynthParams {
    pub per_image: usize,
    pub ranges: SampleRanges,
    pub width: usize,
    pub height: usize,
    pub seed: u64,
}

/// Expand every manifest entry into samples on disk under `dir/samples`,
/// returning the index (also written to `dir/samples.json`). `base` is the
/// directory manifest paths are relative to.
pub fn synth_dataset(
    dir: &Path,
    base: &Path,
    manifest: &DatasetManifest,
    params: &SynthParams,
) -> Result<SampleIndex> {
    let samples_dir = dir.join("samples");
    fs::create_dir_all(&samples_dir)
        .with_context(|| format!("creating {}", samples_dir.display()))?;
    let results: Vec<Result<Vec<SampleMeta>>> = manifest
        .entries
        .par_iter()
        .map(|entry| {
            let expanded = expand_entry(base, entry, params)
                .with_context(|| format!("synthesizing entry {}", entry.id))?;
            let mut metas = Vec::with_capacity(expanded.len());
            for sample in &expanded {
                write_sample(&samples_dir, sample, &entry.id)?;
                metas.push(SampleMeta {
                    id: sample.id.clone(),
                    source_id: entry.id.clone(),
                    beta: sample.beta,
                    airlight: sample.airlight,
                });
            }
            Ok(metas)
        })
        .collect();
    let mut samples = Vec::new();
    for r in results {
        samples.extend(r?);
    }
    let index = SampleIndex {
        split: manifest.split.clone(),
        seed: params.seed,
        width: params.width,
        height: params.height,
        samples,
    };
    fs::write(dir.join("samples.json"), serde_json::to_vec_pretty(&index)?)?;
    Ok(index)
}

fn expand_entry(
    base: &Path,
    entry: &ManifestEntry,
    params: &SynthParams,
) -> Result<Vec<HazeSample<f32>>> {
    let clean_bytes = fs::read(base.join(&entry.clean))
        .with_context(|| format!("reading {}", entry.clean))?;
    let depth_bytes = fs::read(base.join(&entry.depth))
        .with_context(|| format!("reading {}", entry.depth))?;
    let clean = pnm::decode_ppm(&clean_bytes).with_context(|| format!("decoding {}", entry.clean))?;
    let depth = pnm::decode_pgm16(&depth_bytes).with_context(|| format!("decoding {}", entry.depth))?;
    Ok(expand_image(
        &entry.id,
        &clean,
        &depth,
        params.per_image,
        &params.ranges,
        params.seed,
        params.height,
        params.width,
    )?)
}

fn write_sample(samples_dir: &Path, sample: &HazeSample<f32>, source_id: &str) -> Result<()> {
    let id = &sample.id;
    fs::write(samples_dir.join(format!("{id}.hazy.ppm")), pnm::encode_ppm(&sample.hazy)?)?;
    fs::write(samples_dir.join(format!("{id}.clean.ppm")), pnm::encode_ppm(&sample.clean)?)?;
    fs::write(
        samples_dir.join(format!("{id}.trans.pgm")),
        pnm::encode_pgm16(&sample.transmission)?,
    )?;
    fs::write(
        samples_dir.join(format!("{id}.depth.pgm")),
        pnm::encode_pgm16(&sample.depth)?,
    )?;
    let meta = SampleMeta {
        id: id.clone(),
        source_id: source_id.to_string(),
        beta: sample.beta,
        airlight: sample.airlight,
    };
    fs::write(
        samples_dir.join(format!("{id}.json")),
        serde_json::to_vec_pretty(&meta)?,
    )?;
    Ok(())
}

/// Load a synthesized sample directory back into memory. The hazy tensor
/// is regenerated from (clean, transmission, airlight).
pub fn load_samples(dir: &Path) -> Result<Vec<HazeSample<f32>>> {
    let index = load_index(dir)?;
    let samples_dir = dir.join("samples");
    index
        .samples
        .iter()
        .map(|meta| {
            let clean = pnm::decode_ppm(
                &fs::read(samples_dir.join(format!("{}.clean.ppm", meta.id)))
                    .with_context(|| format!("sample {}", meta.id))?,
            )?;
            let transmission = pnm::decode_pgm16(
                &fs::read(samples_dir.join(format!("{}.trans.pgm", meta.id)))
                    .with_context(|| format!("sample {}", meta.id))?,
            )?;
            let depth = pnm::decode_pgm16(
                &fs::read(samples_dir.join(format!("{}.depth.pgm", meta.id)))
                    .with_context(|| format!("sample {}", meta.id))?,
            )?;
            let hazy =
                dehaze_core::scattering::synthesize_hazy(&clean, &transmission, meta.airlight)?;
            Ok(HazeSample {
                id: meta.id.clone(),
                clean,
                depth,
                transmission,
                beta: meta.beta,
                airlight: meta.airlight,
                hazy,
            })
        })
        .collect()
}

pub fn load_index(dir: &Path) -> Result<SampleIndex> {
    let path = dir.join("samples.json");
    let text =
        fs::read_to_string(&path).with_context(|| format!("reading index {}", path.display()))?;
    Ok(serde_json::from_str(&text)?)
}

/// Ground-truth image lookup used by eval: `<id>.ppm`, falling back to the
/// synth layout's `<id>.clean.ppm`.
pub fn find_gt_image(gt_dir: &Path, id: &str) -> Option<PathBuf> {
    let direct = gt_dir.join(format!("{id}.ppm"));
    if direct.exists() {
        return Some(direct);
    }
    let clean = gt_dir.join(format!("{id}.clean.ppm"));
    if clean.exists() {
        return Some(clean);
    }
    let nested = gt_dir.join("samples").join(format!("{id}.clean.ppm"));
    if nested.exists() {
        return Some(nested);
    }
    None
}

/// Airlight metadata lookup for eval: a JSON sidecar with either an
/// "airlight" (ground truth) or "airlight_pred" (prediction) field.
pub fn read_airlight(path: &Path, field: &str) -> Option<f64> {
    let text = fs::read_to_string(path).ok()?;
    let value: serde_json::Value = serde_json::from_str(&text).ok()?;
    value.get(field)?.as_f64()
}

/// Luma-style deterministic listing of sample ids in a prediction dir
/// (every `*.ppm` stem), sorted.
pub fn list_prediction_ids(dir: &Path) -> Result<Vec<String>> {
    let mut ids = Vec::new();
    for entry in fs::read_dir(dir).with_context(|| format!("listing {}", dir.display()))? {
        let path = entry?.path();
        if path.extension().and_then(|e| e.to_str()) == Some("ppm") {
            if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                ids.push(stem.to_string());
            }
        }
    }
    ids.sort();
    Ok(ids)
}
