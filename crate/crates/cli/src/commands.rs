use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use moco_core::dataset::{manifest_root, MANIFEST_NAME};
use moco_core::{
    cg_sense, corrupt, export_png, gen_gaussian_maps, ingest_png, load_tensor, make_trajectory,
    save_tensor, shepp_logan, shepp_logan_variant, CoilKSpace, ComplexImage, DatasetConfig,
    DatasetManifest, MetricReport, RealImage, SamplingPattern, SensitivityMaps, SourceImage, Split,
    Tensor,
};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::args::{
    BenchArgs, Command, CorruptArgs, DatasetArgs, MapsArgs, MetricsArgs, PhantomArgs,
    ReconstructArgs,
};

pub fn run(command: Command) -> Result<serde_json::Value> {
    match command {
        Command::Phantom(a) => phantom(a),
        Command::Maps(a) => maps(a),
        Command::Corrupt(a) => corrupt_cmd(a),
        Command::Reconstruct(a) => reconstruct(a),
        Command::Dataset(a) => dataset(a),
        Command::Metrics(a) => metrics(a),
        Command::Bench(a) => bench(a),
    }
}

fn to_value(v: impl Serialize) -> Result<serde_json::Value> {
    Ok(serde_json::to_value(v)?)
}

fn png_path(out: &Path) -> PathBuf {
    out.with_extension("png")
}

fn ensure_parent(path: &Path) -> Result<()> {
    match path.parent() {
        Some(dir) if !dir.as_os_str().is_empty() => {
            std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
        }
        _ => Ok(()),
    }
}

/// Reads a real image from a tensor file or a grayscale PNG. Complex tensors
/// are reduced to their magnitude.
fn load_image(path: &Path) -> Result<RealImage> {
    let is_png = path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("png"));
    if is_png {
        return ingest_png(path).map_err(Into::into);
    }
    let tensor = load_tensor(path)?;
    let image = match tensor.dtype() {
        moco_core::tensor::DType::Complex128 => ComplexImage::try_from(tensor)?.magnitude(),
        _ => RealImage::try_from(tensor)?,
    };
    Ok(image)
}

fn load_maps(path: &Path) -> Result<SensitivityMaps> {
    let t = load_tensor(path)?;
    SensitivityMaps::from_tensor(t)
        .with_context(|| format!("{} is not a coil map tensor", path.display()))
}

fn phantom(a: PhantomArgs) -> Result<serde_json::Value> {
    let (h, w) = (a.size.height, a.size.width);
    let image = match a.seed {
        Some(seed) => shepp_logan_variant(h, w, seed)?,
        None => shepp_logan(h, w)?,
    };
    ensure_parent(&a.out)?;
    save_tensor(&a.out, &Tensor::from(&image))?;
    eprintln!("wrote {} ({h}x{w})", a.out.display());
    let mut png = None;
    if a.png {
        let p = png_path(&a.out);
        export_png(&image, &p)?;
        eprintln!("wrote {}", p.display());
        png = Some(p);
    }
    Ok(json!({
        "out": a.out,
        "png": png,
        "height": h,
        "width": w,
        "seed": a.seed,
        "max": image.max_abs(),
    }))
}

fn maps(a: MapsArgs) -> Result<serde_json::Value> {
    let (h, w) = (a.size.height, a.size.width);
    let maps = gen_gaussian_maps(a.coil.coils as usize, h, w, a.coil.sigma, a.seed)?;
    ensure_parent(&a.out)?;
    save_tensor(&a.out, &maps.to_tensor())?;
    eprintln!(
        "wrote {} ({} coils, {h}x{w})",
        a.out.display(),
        maps.num_coils()
    );
    let mut pngs = Vec::new();
    if a.png {
        let stem = a.out.with_extension("");
        for c in 0..maps.num_coils() {
            let p = PathBuf::from(format!("{}_coil{c}.png", stem.display()));
            export_png(&maps.coil_image(c), &p)?;
            pngs.push(p);
        }
    }
    Ok(json!({
        "out": a.out,
        "png": pngs,
        "coils": maps.num_coils(),
        "height": h,
        "width": w,
        "sigma": a.coil.sigma,
        "seed": a.seed,
        "sos_deviation": maps.sos_deviation(),
    }))
}

fn corrupt_cmd(a: CorruptArgs) -> Result<serde_json::Value> {
    let image = load_image(&a.input)?;
    let (h, w) = image.dims();
    let maps = match &a.maps {
        Some(p) => load_maps(p)?,
        None => gen_gaussian_maps(a.coil.coils as usize, h, w, a.coil.sigma, a.seed)?,
    };
    let pattern = SamplingPattern::interleaved(a.shots as usize, h)?;
    let traj = make_trajectory(a.shots as usize, a.degree)?;
    let kspace = corrupt(&image, &maps, &pattern, &traj)?;
    ensure_parent(&a.out)?;
    save_tensor(&a.out, &kspace.to_tensor())?;
    eprintln!(
        "wrote {} ({} coils, {} shots, {}°)",
        a.out.display(),
        maps.num_coils(),
        a.shots,
        a.degree
    );
    Ok(json!({
        "out": a.out,
        "coils": maps.num_coils(),
        "shots": a.shots,
        "degree": a.degree,
        "height": h,
        "width": w,
        "seed": a.seed,
    }))
}

fn reconstruct(a: ReconstructArgs) -> Result<serde_json::Value> {
    let t = load_tensor(&a.kspace)?;
    let y = CoilKSpace::from_tensor(t)
        .with_context(|| format!("{} is not a coil k-space tensor", a.kspace.display()))?;
    let (c, h, w) = y.dims();
    let maps = match &a.maps {
        Some(p) => load_maps(p)?,
        None => gen_gaussian_maps(c, h, w, a.sigma, a.seed)?,
    };
    let pattern = SamplingPattern::interleaved(a.shots as usize, h)?;
    let (x, report) = cg_sense(&y, &maps, &pattern, &a.solver.config())?;
    ensure_parent(&a.out)?;
    let magnitude = x.magnitude();
    let tensor = if a.complex {
        Tensor::from(&x)
    } else {
        Tensor::from(&magnitude)
    };
    save_tensor(&a.out, &tensor)?;
    eprintln!(
        "wrote {} after {} iterations ({:.3} s)",
        a.out.display(),
        report.iterations,
        report.wall_time_seconds
    );
    if a.png {
        export_png(&magnitude, png_path(&a.out))?;
    }
    let mut v = to_value(&report)?;
    v["out"] = json!(a.out);
    Ok(v)
}

fn png_sources(dir: &Path) -> Result<Vec<SourceImage>> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
        .with_context(|| format!("listing {}", dir.display()))?
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<_>>()?;
    paths.retain(|p| p.extension().is_some_and(|e| e.eq_ignore_ascii_case("png")));
    paths.sort();
    if paths.is_empty() {
        bail!("no PNG files in {}", dir.display());
    }
    paths
        .into_iter()
        .map(|p| {
            let label = p
                .file_stem()
                .unwrap_or_default()
                .to_string_lossy()
                .into_owned();
            Ok(SourceImage {
                label,
                image: ingest_png(&p)?,
            })
        })
        .collect()
}

fn phantom_sources(count: usize, h: usize, w: usize, seed: u64) -> Result<Vec<SourceImage>> {
    if count == 0 {
        bail!("--count must be at least 1");
    }
    (0..count)
        .map(|k| {
            let variant = seed.wrapping_add(k as u64);
            Ok(SourceImage {
                label: format!("phantom{variant}"),
                image: shepp_logan_variant(h, w, variant)?,
            })
        })
        .collect()
}

fn dataset(a: DatasetArgs) -> Result<serde_json::Value> {
    let sources = match &a.inputs {
        Some(dir) => png_sources(dir)?,
        None => phantom_sources(a.count, a.size.height, a.size.width, a.seed)?,
    };
    let config = DatasetConfig {
        shots: a.shots as usize,
        coils: a.coil.coils as usize,
        sigma_fraction: a.coil.sigma,
        cg: a.solver.config(),
        seed: a.seed,
        workers: a.workers,
    };
    eprintln!(
        "generating {} pairs ({} sources x {} degrees)",
        sources.len() * a.degrees.len(),
        sources.len(),
        a.degrees.len()
    );
    let manifest = moco_core::generate_pairs(&sources, &a.degrees, &config, &a.out_dir)?;
    if a.png {
        for rec in manifest.records() {
            let (input, target) = DatasetManifest::load_pair(&a.out_dir, rec)?;
            export_png(&input, a.out_dir.join(format!("{}_input.png", rec.id)))?;
            export_png(&target, a.out_dir.join(format!("{}_target.png", rec.id)))?;
        }
    }
    let manifest_path = a.out_dir.join(MANIFEST_NAME);
    eprintln!("wrote {}", manifest_path.display());
    let degrees: Vec<_> = manifest
        .degrees()
        .into_iter()
        .map(|d| {
            let count = |s| manifest.split(s).filter(|r| r.degree == d).count();
            json!({"degree": d, "train": count(Split::Train), "test": count(Split::Test)})
        })
        .collect();
    Ok(json!({
        "manifest": manifest_path,
        "pairs": manifest.len(),
        "degrees": degrees,
    }))
}

fn metrics(a: MetricsArgs) -> Result<serde_json::Value> {
    if let Some(path) = &a.manifest {
        let manifest = DatasetManifest::load(path)?;
        let split = Split::from(a.split);
        let reports = manifest.evaluate(&manifest_root(path), split)?;
        return Ok(json!({ "split": split, "reports": to_value(reports)? }));
    }
    let (Some(r), Some(t)) = (&a.reference, &a.test) else {
        bail!("--ref and --test are required without --manifest");
    };
    let reference = load_image(r)?;
    let test = load_image(t)?;
    to_value(MetricReport::over_pairs(None, [(&reference, &test)])?)
}

#[derive(Debug, Serialize)]
struct BenchReport {
    count: usize,
    mean_seconds: f64,
    /// Sample standard deviation; zero for a single image.
    std_seconds: f64,
    min_seconds: f64,
    max_seconds: f64,
    height: usize,
    width: usize,
    coils: usize,
    shots: usize,
    degree: f64,
    workers: usize,
    mean_iterations: f64,
}

fn bench(a: BenchArgs) -> Result<serde_json::Value> {
    let (h, w) = (a.size.height, a.size.width);
    let (coils, shots) = (a.coil.coils as usize, a.shots as usize);
    let config = a.solver.config();
    config.validate()?;
    let maps = gen_gaussian_maps(coils, h, w, a.coil.sigma, a.seed)?;
    let pattern = SamplingPattern::interleaved(shots, h)?;
    let traj = make_trajectory(shots, a.degree)?;
    let sources = phantom_sources(a.count as usize, h, w, a.seed)?;
    let kspaces = sources
        .iter()
        .map(|s| corrupt(&s.image, &maps, &pattern, &traj))
        .collect::<moco_core::Result<Vec<_>>>()?;
    eprintln!(
        "timing {} reconstructions of {h}x{w}, {coils} coils",
        kspaces.len()
    );

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(a.workers.max(1))
        .build()?;
    let timings: Vec<(f64, usize)> = pool.install(|| {
        kspaces
            .par_iter()
            .map(|y| {
                let start = Instant::now();
                let (_, report) = cg_sense(y, &maps, &pattern, &config)?;
                Ok((start.elapsed().as_secs_f64(), report.iterations))
            })
            .collect::<moco_core::Result<_>>()
    })?;

    let n = timings.len();
    let secs: Vec<f64> = timings.iter().map(|t| t.0).collect();
    let mean = secs.iter().sum::<f64>() / n as f64;
    let std = if n > 1 {
        (secs.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
    } else {
        0.0
    };
    to_value(BenchReport {
        count: n,
        mean_seconds: mean,
        std_seconds: std,
        min_seconds: secs.iter().copied().fold(f64::INFINITY, f64::min),
        max_seconds: secs.iter().copied().fold(0.0, f64::max),
        height: h,
        width: w,
        coils,
        shots,
        degree: a.degree,
        workers: a.workers.max(1),
        mean_iterations: timings.iter().map(|t| t.1 as f64).sum::<f64>() / n as f64,
    })
}
