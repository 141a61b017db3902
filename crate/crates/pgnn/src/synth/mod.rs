//! Synthetic data generation: colormap rendering, acquisition noise,
//! circular imperfections, label generation, and the on-disk dataset format.
//!
//! A sample is produced in a fixed order from one per-sample rng: scenario →
//! clean field → label (from the clean field) → field noise → circles →
//! colormap. Corruption never touches the label; that ordering is what makes
//! the analytic inverse (exact colormap inversion plus quadrature) a usable
//! oracle for the learned pipeline.

mod colormap;
mod dataset;

pub use colormap::{
    add_field_noise, invert_colormap, make_label, render_colormap, stamp_circles, ColormapSpec,
    NoiseSpec,
};
pub use dataset::{
    fnv1a64, format_sig, generate_dataset, generate_sample, load_dataset, manifest_hash_hex,
    read_png, write_png, DatasetManifest, GeneratedSample, GeneratorConfig, SampleRecord,
    LABELS_HEADER, SCHEMA_VERSION,
};
