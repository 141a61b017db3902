//! Dataset directory format: `manifest.json`, `images/sample_%05d.png`,
//! optional `fields/sample_%05d.f32`, and `labels.csv`.
//!
//! Generation is reproducible sample by sample: the rng for sample `i` is
//! derived from `(base_seed, i)`, so datasets are independent of generation
//! order and a rerun with the same configuration is byte-identical.

use crate::diffusion::{sample_scenario, solve_fourier, ScenarioRanges};
use crate::error::{Error, Result};
use crate::field::{read_raw_field, write_raw_field, GridSpec, MoistureField, RgbImage};
use crate::rng::seeded;
use crate::synth::colormap::{
    add_field_noise, make_label, render_colormap, stamp_circles, ColormapSpec, NoiseSpec,
};
use serde::{Deserialize, Serialize};
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

/// Current dataset schema version.
pub const SCHEMA_VERSION: u32 = 1;

/// Header line of `labels.csv`.
pub const LABELS_HEADER: &str = "sample_id,y_clean,y_noisy";

/// Marker dropped at the start of generation and removed on success; a
/// directory still carrying it holds partial output and is rejected by the
/// loader.
const INCOMPLETE_MARKER: &str = ".incomplete";

/// Everything the generator needs besides the seed and output directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub height: usize,
    pub width: usize,
    pub n_samples: u64,
    pub scenario_ranges: ScenarioRanges,
    pub noise: NoiseSpec,
    pub colormap: ColormapSpec,
    /// Also write ground-truth fields (`fields/sample_%05d.f32`).
    pub save_fields: bool,
}

impl GeneratorConfig {
    pub fn new(height: usize, width: usize, n_samples: u64) -> Self {
        GeneratorConfig {
            height,
            width,
            n_samples,
            scenario_ranges: ScenarioRanges::default(),
            noise: NoiseSpec::default(),
            colormap: ColormapSpec::default(),
            save_fields: false,
        }
    }

    pub fn grid(&self) -> Result<GridSpec> {
        GridSpec::new(self.height, self.width)
    }

    pub fn validate(&self) -> Result<()> {
        self.grid()?;
        self.scenario_ranges.validate()?;
        self.noise.validate()?;
        self.colormap.validate()?;
        let max_radius = self.noise.circle_radius[1] as usize;
        if max_radius > self.height.min(self.width) {
            return Err(Error::param(format!(
                "circle radius {max_radius} exceeds image side"
            )));
        }
        Ok(())
    }
}

/// On-disk manifest; written last so its presence implies a complete
/// dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub schema_version: u32,
    pub base_seed: u64,
    pub n_samples: u64,
    pub height: usize,
    pub width: usize,
    pub colormap: ColormapSpec,
    pub noise: NoiseSpec,
    pub scenario_ranges: ScenarioRanges,
    pub generator_version: String,
    pub save_fields: bool,
}

/// One fully generated sample, before any file I/O.
#[derive(Debug, Clone)]
pub struct GeneratedSample {
    pub sample_id: u64,
    pub image: RgbImage,
    /// Ground-truth solution field, pre-noise and pre-circles.
    pub clean_field: MoistureField,
    pub y_clean: f64,
    pub y_noisy: f64,
}

/// One sample as loaded back from disk.
#[derive(Debug, Clone)]
pub struct SampleRecord {
    pub sample_id: u64,
    pub image: RgbImage,
    /// Present when the dataset was written with `save_fields`.
    pub true_field: Option<MoistureField>,
    pub y_clean: f64,
    pub y_noisy: f64,
}

/// Generates sample `index` of the dataset identified by `base_seed`.
///
/// Fixed event order against the per-sample rng: scenario draws, label
/// noise, field noise, circle draws. The label is computed from the clean
/// field before any corruption.
pub fn generate_sample(
    cfg: &GeneratorConfig,
    base_seed: u64,
    index: u64,
) -> Result<GeneratedSample> {
    cfg.validate()?;
    let grid = cfg.grid()?;
    let mut rng = seeded(base_seed, index);
    let scenario = sample_scenario(&mut rng, &cfg.scenario_ranges)?;
    let clean = solve_fourier(&scenario, grid)?;
    let (y_clean, y_noisy) = make_label(&clean, cfg.noise.sigma_label, &mut rng)?;
    let noisy = add_field_noise(&clean, cfg.noise.sigma_field, &mut rng)?;
    let stamped = stamp_circles(&noisy, &cfg.noise, &mut rng);
    let image = render_colormap(&stamped, &cfg.colormap)?;
    Ok(GeneratedSample {
        sample_id: index,
        image,
        clean_field: clean,
        y_clean,
        y_noisy,
    })
}

fn image_path(dir: &Path, id: u64) -> PathBuf {
    dir.join("images").join(format!("sample_{id:05}.png"))
}

fn field_path(dir: &Path, id: u64) -> PathBuf {
    dir.join("fields").join(format!("sample_{id:05}.f32"))
}

/// Writes the full dataset under `out_dir` and returns the manifest.
pub fn generate_dataset(
    cfg: &GeneratorConfig,
    base_seed: u64,
    out_dir: &Path,
) -> Result<DatasetManifest> {
    cfg.validate()?;
    fs::create_dir_all(out_dir)?;
    let marker = out_dir.join(INCOMPLETE_MARKER);
    fs::write(&marker, b"")?;
    fs::create_dir_all(out_dir.join("images"))?;
    if cfg.save_fields {
        fs::create_dir_all(out_dir.join("fields"))?;
    }

    let mut labels = BufWriter::new(fs::File::create(out_dir.join("labels.csv"))?);
    writeln!(labels, "{LABELS_HEADER}")?;
    for i in 0..cfg.n_samples {
        let sample = generate_sample(cfg, base_seed, i)?;
        write_png(&image_path(out_dir, i), &sample.image)?;
        if cfg.save_fields {
            write_raw_field(&field_path(out_dir, i), &sample.clean_field)?;
        }
        writeln!(
            labels,
            "{},{},{}",
            sample.sample_id,
            format_sig(sample.y_clean, 9),
            format_sig(sample.y_noisy, 9)
        )?;
    }
    labels.flush()?;
    drop(labels);

    let manifest = DatasetManifest {
        schema_version: SCHEMA_VERSION,
        base_seed,
        n_samples: cfg.n_samples,
        height: cfg.height,
        width: cfg.width,
        colormap: cfg.colormap,
        noise: cfg.noise,
        scenario_ranges: cfg.scenario_ranges,
        generator_version: format!("pgnn-{}", env!("CARGO_PKG_VERSION")),
        save_fields: cfg.save_fields,
    };
    let json = serde_json::to_string_pretty(&manifest)?;
    fs::write(out_dir.join("manifest.json"), json.as_bytes())?;
    fs::remove_file(&marker)?;
    Ok(manifest)
}

fn parse_labels(path: &Path) -> Result<Vec<(u64, f64, f64)>> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == LABELS_HEADER => {}
        other => {
            return Err(Error::Format(format!(
                "labels.csv header mismatch: {other:?}"
            )))
        }
    }
    let mut rows = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let mut parts = line.split(',');
        let parse_err = || Error::Format(format!("labels.csv line {}: {line:?}", lineno + 2));
        let id = parts
            .next()
            .and_then(|s| s.parse::<u64>().ok())
            .ok_or_else(parse_err)?;
        let y_clean = parts
            .next()
            .and_then(|s| s.parse::<f64>().ok())
            .ok_or_else(parse_err)?;
        let y_noisy = parts
            .next()
            .and_then(|s| s.parse::<f64>().ok())
            .ok_or_else(parse_err)?;
        rows.push((id, y_clean, y_noisy));
    }
    Ok(rows)
}

/// Loads a dataset directory written by [`generate_dataset`].
pub fn load_dataset(dir: &Path) -> Result<(DatasetManifest, Vec<SampleRecord>)> {
    if dir.join(INCOMPLETE_MARKER).exists() {
        return Err(Error::Format(format!(
            "dataset {} is marked incomplete (generation was interrupted)",
            dir.display()
        )));
    }
    let manifest_text = fs::read_to_string(dir.join("manifest.json"))?;
    let manifest: DatasetManifest = serde_json::from_str(&manifest_text)?;
    if manifest.schema_version != SCHEMA_VERSION {
        return Err(Error::UnsupportedSchema {
            found: manifest.schema_version,
            supported: SCHEMA_VERSION,
        });
    }
    let labels = parse_labels(&dir.join("labels.csv"))?;
    if labels.len() as u64 != manifest.n_samples {
        return Err(Error::Format(format!(
            "labels.csv has {} rows, manifest says {}",
            labels.len(),
            manifest.n_samples
        )));
    }
    let grid = GridSpec::new(manifest.height, manifest.width)?;
    let mut records = Vec::with_capacity(labels.len());
    for (id, y_clean, y_noisy) in labels {
        let img_path = image_path(dir, id);
        if !img_path.exists() {
            return Err(Error::MissingFile {
                sample_id: id,
                path: img_path,
            });
        }
        let image = read_png(&img_path)?;
        if image.height() != manifest.height || image.width() != manifest.width {
            return Err(Error::Dimension(format!(
                "sample {id}: image is {}x{}, manifest says {}x{}",
                image.height(),
                image.width(),
                manifest.height,
                manifest.width
            )));
        }
        let true_field = if manifest.save_fields {
            let fp = field_path(dir, id);
            if !fp.exists() {
                return Err(Error::MissingFile {
                    sample_id: id,
                    path: fp,
                });
            }
            Some(read_raw_field(&fp, grid)?)
        } else {
            None
        };
        records.push(SampleRecord {
            sample_id: id,
            image,
            true_field,
            y_clean,
            y_noisy,
        });
    }
    Ok((manifest, records))
}

/// Writes an 8-bit RGB PNG (no alpha).
pub fn write_png(path: &Path, img: &RgbImage) -> Result<()> {
    let file = fs::File::create(path)?;
    let mut encoder = png::Encoder::new(
        BufWriter::new(file),
        img.width() as u32,
        img.height() as u32,
    );
    encoder.set_color(png::ColorType::Rgb);
    encoder.set_depth(png::BitDepth::Eight);
    let mut writer = encoder
        .write_header()
        .map_err(|e| Error::Format(e.to_string()))?;
    writer
        .write_image_data(img.pixels())
        .map_err(|e| Error::Format(e.to_string()))?;
    Ok(())
}

/// Reads an 8-bit RGB PNG written by [`write_png`].
pub fn read_png(path: &Path) -> Result<RgbImage> {
    let file = fs::File::open(path)?;
    let decoder = png::Decoder::new(std::io::BufReader::new(file));
    let mut reader = decoder
        .read_info()
        .map_err(|e| Error::Format(e.to_string()))?;
    let mut buf = vec![0u8; reader.output_buffer_size().unwrap_or(0)];
    let info = reader
        .next_frame(&mut buf)
        .map_err(|e| Error::Format(e.to_string()))?;
    if info.color_type != png::ColorType::Rgb || info.bit_depth != png::BitDepth::Eight {
        return Err(Error::Format(format!(
            "{} is not an 8-bit RGB PNG",
            path.display()
        )));
    }
    buf.truncate(info.buffer_size());
    RgbImage::new(info.height as usize, info.width as usize, buf)
}

/// FNV-1a 64-bit hash; used to fingerprint manifests and label files.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf2_9ce4_8422_2325u64;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

/// Hex fingerprint of a dataset's manifest file.
pub fn manifest_hash_hex(dir: &Path) -> Result<String> {
    let bytes = fs::read(dir.join("manifest.json"))?;
    Ok(format!("{:016x}", fnv1a64(&bytes)))
}

/// Formats with `sig` significant digits, plain decimal for moderate
/// exponents and e-notation otherwise (the `%.{sig}g` convention).
pub fn format_sig(x: f64, sig: usize) -> String {
    assert!(sig >= 1);
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let exp = x.abs().log10().floor() as i32;
    if exp >= sig as i32 || exp < -4 {
        format!("{:.*e}", sig - 1, x)
    } else {
        let decimals = (sig as i32 - 1 - exp).max(0) as usize;
        format!("{x:.decimals$}")
    }
}
