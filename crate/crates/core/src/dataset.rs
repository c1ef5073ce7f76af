//! Paired (corrupted reconstruction, clean reconstruction) dataset generation.
//!
//! Output layout under `out_dir`:
//!
//! ```text
//! manifest.jsonl          one ManifestRecord per line, sorted by id
//! <id>_input.mrt          |CG SENSE(corrupted k-space)| / target peak
//! <id>_target.mrt         |CG SENSE(static k-space)|    / target peak
//! ```
//!
//! Tensor paths in the manifest are relative to the manifest's directory.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cgsense::{cg_sense, CgConfig};
use crate::coils::gen_gaussian_maps;
use crate::encoding::SamplingPattern;
use crate::error::{Error, Result};
use crate::metrics::MetricReport;
use crate::motion::{corrupt, make_trajectory};
use crate::tensor::{load_tensor, save_tensor, RealImage, Tensor};

pub const MANIFEST_NAME: &str = "manifest.jsonl";
pub const TRAIN_FRACTION: f64 = 0.7;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

impl std::str::FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "test" => Ok(Split::Test),
            other => Err(Error::invalid(format!("unknown split {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestRecord {
    pub id: String,
    pub source: String,
    pub degree: f64,
    pub shots: usize,
    pub coils: usize,
    pub split: Split,
    /// Corrupted reconstruction tensor, relative to the manifest directory.
    pub input: String,
    pub target: String,
    pub seed: u64,
    /// Target peak both tensors were divided by.
    pub normalization: f64,
}

/// A motion-free image to push through the acquisition chain.
#[derive(Clone, Debug)]
pub struct SourceImage {
    pub label: String,
    pub image: RealImage,
}

#[derive(Clone, Debug)]
pub struct DatasetConfig {
    pub shots: usize,
    pub coils: usize,
    pub sigma_fraction: f64,
    pub cg: CgConfig,
    pub seed: u64,
    pub workers: usize,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            shots: 2,
            coils: 4,
            sigma_fraction: 0.5,
            cg: CgConfig::default(),
            seed: 0,
            workers: 1,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct DatasetManifest {
    records: Vec<ManifestRecord>,
}

impl DatasetManifest {
    pub fn new(mut records: Vec<ManifestRecord>) -> Self {
        records.sort_by(|a, b| a.id.cmp(&b.id));
        Self { records }
    }

    pub fn records(&self) -> &[ManifestRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn split(&self, split: Split) -> impl Iterator<Item = &ManifestRecord> {
        self.records.iter().filter(move |r| r.split == split)
    }

    /// Distinct degrees in ascending order.
    pub fn degrees(&self) -> Vec<f64> {
        let mut d: Vec<f64> = self.records.iter().map(|r| r.degree).collect();
        d.sort_by(f64::total_cmp);
        d.dedup();
        d
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&serde_json::to_string(r).expect("record serializes"));
            out.push('\n');
        }
        out
    }

    pub fn from_jsonl(text: &str) -> Result<Self> {
        let records = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(n, l)| {
                serde_json::from_str(l).map_err(|e| Error::Manifest {
                    line: n + 1,
                    message: e.to_string(),
                })
            })
            .collect::<Result<Vec<ManifestRecord>>>()?;
        Ok(Self::new(records))
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        file.write_all(self.to_jsonl().as_bytes())
            .map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_jsonl(&text)
    }

    /// Loads the (input, target) images of one record.
    pub fn load_pair(root: &Path, record: &ManifestRecord) -> Result<(RealImage, RealImage)> {
        let input = RealImage::try_from(load_tensor(root.join(&record.input))?)?;
        let target = RealImage::try_from(load_tensor(root.join(&record.target))?)?;
        if input.dims() != target.dims() {
            return Err(Error::mismatch(format!(
                "{}: input {:?} vs target {:?}",
                record.id,
                input.dims(),
                target.dims()
            )));
        }
        Ok((input, target))
    }

    /// Checks that every referenced tensor exists and loads.
    pub fn verify(&self, root: &Path) -> Result<()> {
        for r in &self.records {
            Self::load_pair(root, r).map_err(|e| Error::Pair {
                id: r.id.clone(),
                source: Box::new(e),
            })?;
        }
        Ok(())
    }

    /// Mean PSNR/SSIM of corrupted inputs against targets, one report per degree.
    pub fn evaluate(&self, root: &Path, split: Split) -> Result<Vec<MetricReport>> {
        let mut buckets: BTreeMap<u64, Vec<&ManifestRecord>> = BTreeMap::new();
        for r in self.split(split) {
            buckets.entry(degree_key(r.degree)).or_default().push(r);
        }
        if buckets.is_empty() {
            return Err(Error::invalid(format!("split {split:?} is empty")));
        }
        let mut reports: Vec<MetricReport> = buckets
            .into_values()
            .map(|records| {
                let pairs = records
                    .iter()
                    .map(|r| Self::load_pair(root, r))
                    .collect::<Result<Vec<_>>>()?;
                MetricReport::over_pairs(
                    Some(records[0].degree),
                    pairs.iter().map(|(input, target)| (target, input)),
                )
            })
            .collect::<Result<_>>()?;
        reports.sort_by(|a, b| a.degree.unwrap().total_cmp(&b.degree.unwrap()));
        Ok(reports)
    }
}

fn degree_key(d: f64) -> u64 {
    // Orders like f64::total_cmp for non-negative and negative values alike.
    let bits = d.to_bits();
    if d.is_sign_negative() {
        !bits
    } else {
        bits | (1 << 63)
    }
}

pub fn pair_id(degree: f64, source_index: usize) -> String {
    format!("deg{degree:06.2}_img{source_index:04}")
}

struct Pair {
    source_index: usize,
    degree: f64,
    id: String,
    input: RealImage,
    target: RealImage,
    normalization: f64,
}

fn reconstruct_magnitude(
    image: &RealImage,
    degree: f64,
    config: &DatasetConfig,
) -> Result<RealImage> {
    let (h, w) = image.dims();
    let maps = gen_gaussian_maps(config.coils, h, w, config.sigma_fraction, config.seed)?;
    let pattern = SamplingPattern::interleaved(config.shots, h)?;
    let traj = make_trajectory(config.shots, degree)?;
    let y = corrupt(image, &maps, &pattern, &traj)?;
    let (x, _) = cg_sense(&y, &maps, &pattern, &config.cg)?;
    Ok(x.magnitude())
}

fn make_pairs(
    index: usize,
    source: &SourceImage,
    degrees: &[f64],
    config: &DatasetConfig,
) -> Result<Vec<Pair>> {
    let wrap = |id: String| {
        move |e: Error| Error::Pair {
            id,
            source: Box::new(e),
        }
    };
    let target =
        reconstruct_magnitude(&source.image, 0.0, config).map_err(wrap(pair_id(0.0, index)))?;
    let peak = target.max_abs();
    degrees
        .iter()
        .map(|&degree| {
            let id = pair_id(degree, index);
            if peak == 0.0 {
                return Err(wrap(id)(Error::invalid(
                    "motion-free reconstruction is all zero",
                )));
            }
            let input = if degree == 0.0 {
                target.clone()
            } else {
                reconstruct_magnitude(&source.image, degree, config).map_err(wrap(id.clone()))?
            };
            Ok(Pair {
                source_index: index,
                degree,
                id,
                input: input.scaled(1.0 / peak),
                target: target.scaled(1.0 / peak),
                normalization: peak,
            })
        })
        .collect()
}

/// Train/test assignment for `n` items of one degree bucket.
pub fn split_assignment(n: usize, seed: u64, bucket: usize) -> Vec<Split> {
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5EED_5EED_0000_0000 ^ bucket as u64);
    order.shuffle(&mut rng);
    let n_train = (TRAIN_FRACTION * n as f64).round() as usize;
    let mut tags = vec![Split::Test; n];
    for &k in &order[..n_train] {
        tags[k] = Split::Train;
    }
    tags
}

/// Runs every source through the static and moving acquisitions for each degree,
/// writes the tensors and the manifest, and returns the manifest.
pub fn generate_pairs(
    sources: &[SourceImage],
    degrees: &[f64],
    config: &DatasetConfig,
    out_dir: impl AsRef<Path>,
) -> Result<DatasetManifest> {
    let out_dir = out_dir.as_ref();
    if sources.is_empty() {
        return Err(Error::invalid("no source images"));
    }
    if degrees.is_empty() {
        return Err(Error::invalid("no motion degrees"));
    }
    config.cg.validate()?;
    let mut distinct = degrees.to_vec();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() != degrees.len() {
        return Err(Error::invalid("duplicate motion degrees"));
    }
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers.max(1))
        .build()
        .map_err(|e| Error::invalid(format!("thread pool: {e}")))?;
    let pairs: Vec<Pair> = pool
        .install(|| {
            sources
                .par_iter()
                .enumerate()
                .map(|(i, src)| {
                    let pairs = make_pairs(i, src, degrees, config)?;
                    for p in &pairs {
                        write_pair(out_dir, p)?;
                    }
                    Ok(pairs)
                })
                .collect::<Result<Vec<_>>>()
        })?
        .into_iter()
        .flatten()
        .collect();

    let mut records = Vec::with_capacity(pairs.len());
    for (bucket, &degree) in degrees.iter().enumerate() {
        let mut in_bucket: Vec<&Pair> = pairs.iter().filter(|p| p.degree == degree).collect();
        in_bucket.sort_by_key(|p| p.source_index);
        let tags = split_assignment(in_bucket.len(), config.seed, bucket);
        for (p, split) in in_bucket.into_iter().zip(tags) {
            let (input, target) = file_names(&p.id);
            records.push(ManifestRecord {
                id: p.id.clone(),
                source: sources[p.source_index].label.clone(),
                degree,
                shots: config.shots,
                coils: config.coils,
                split,
                input,
                target,
                seed: config.seed,
                normalization: p.normalization,
            });
        }
    }
    let manifest = DatasetManifest::new(records);
    manifest.write(out_dir.join(MANIFEST_NAME))?;
    Ok(manifest)
}

fn file_names(id: &str) -> (String, String) {
    (format!("{id}_input.mrt"), format!("{id}_target.mrt"))
}

fn write_pair(out_dir: &Path, pair: &Pair) -> Result<()> {
    let (input, target) = file_names(&pair.id);
    let wrap = |e| Error::Pair {
        id: pair.id.clone(),
        source: Box::new(e),
    };
    save_tensor(out_dir.join(input), &Tensor::from(&pair.input)).map_err(wrap)?;
    save_tensor(out_dir.join(target), &Tensor::from(&pair.target)).map_err(wrap)
}

/// Directory holding a manifest file, for resolving its relative paths.
pub fn manifest_root(manifest_path: &Path) -> PathBuf {
    manifest_path
        .parent()
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from("."))
}
