//! Dataset directory layout:
//!
//! ```text
//! manifest.json
//! samples/000000/{left,right}_{rt,ro,bg_rt,bg_ro,tool_only}.png
//! samples/000000/{left,right}_id_{rt,ro}.png
//! samples/000000/label.json
//! ```
//!
//! JSON floats are written with 17 significant digits.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use image::codecs::png::{CompressionType, FilterType, PngEncoder};
use image::{ExtendedColorType, ImageEncoder, RgbImage};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::GenerationConfig;
use super::generate::{CameraImages, Generator, RejectionStats, SampleLabel, SampleRecord};
use crate::calibration::ToolOffset;
use crate::camera::StereoRig;
use crate::cuboid::Cuboid;
use crate::error::{Error, Result};
use crate::render::raycast::IdMap;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToolEntry {
    pub screwdriver_id: String,
    pub offset: ToolOffset,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub format_version: u32,
    pub config: GenerationConfig,
    pub rig: StereoRig,
    pub cuboid: Cuboid,
    pub rejection_stats: RejectionStats,
    pub sample_count: usize,
    /// Flange-frame tip offset of every screwdriver in the catalog.
    pub tools: Vec<ToolEntry>,
}

impl Manifest {
    pub fn new(config: GenerationConfig, rig: StereoRig, cuboid: Cuboid, rejection_stats: RejectionStats, sample_count: usize) -> Self {
        let tools = config
            .screwdrivers
            .iter()
            .map(|s| ToolEntry {
                screwdriver_id: s.id.clone(),
                offset: s.nominal_offset(),
            })
            .collect();
        Manifest {
            format_version: FORMAT_VERSION,
            config,
            rig,
            cuboid,
            rejection_stats,
            sample_count,
            tools,
        }
    }

    pub fn tool(&self, id: &str) -> Option<&ToolOffset> {
        self.tools.iter().find(|t| t.screwdriver_id == id).map(|t| &t.offset)
    }
}

/// Pretty JSON with every float printed as `d.dddddddddddddddde±x`.
struct PreciseFormatter(serde_json::ser::PrettyFormatter<'static>);

impl serde_json::ser::Formatter for PreciseFormatter {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> std::io::Result<()> {
        write!(writer, "{value:.16e}")
    }

    fn write_f32<W: ?Sized + Write>(&mut self, writer: &mut W, value: f32) -> std::io::Result<()> {
        self.write_f64(writer, value as f64)
    }

    fn begin_array<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.begin_array(w)
    }

    fn end_array<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.end_array(w)
    }

    fn begin_array_value<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> std::io::Result<()> {
        self.0.begin_array_value(w, first)
    }

    fn end_array_value<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.end_array_value(w)
    }

    fn begin_object<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.begin_object(w)
    }

    fn end_object<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.end_object(w)
    }

    fn begin_object_key<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> std::io::Result<()> {
        self.0.begin_object_key(w, first)
    }

    fn begin_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.begin_object_value(w)
    }

    fn end_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.end_object_value(w)
    }
}

pub fn to_json_string<T: Serialize>(value: &T) -> String {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, PreciseFormatter(serde_json::ser::PrettyFormatter::new()));
    value.serialize(&mut ser).expect("in-memory JSON serialization cannot fail");
    out.push(b'\n');
    String::from_utf8(out).expect("serde_json emits UTF-8")
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    fs::write(path, to_json_string(value)).map_err(|e| Error::io(path, e))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })
}

fn image_error(path: &Path, source: image::ImageError) -> Error {
    Error::Image {
        path: path.to_path_buf(),
        source,
    }
}

fn write_png(path: &Path, bytes: &[u8], width: u32, height: u32, color: ExtendedColorType) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let encoder = PngEncoder::new_with_quality(BufWriter::new(file), CompressionType::Fast, FilterType::Sub);
    encoder.write_image(bytes, width, height, color).map_err(|e| image_error(path, e))
}

pub fn write_rgb(path: &Path, img: &RgbImage) -> Result<()> {
    write_png(path, img.as_raw(), img.width(), img.height(), ExtendedColorType::Rgb8)
}

pub fn write_ids(path: &Path, ids: &IdMap) -> Result<()> {
    let bytes: Vec<u8> = ids.as_raw().iter().flat_map(|v| v.to_ne_bytes()).collect();
    write_png(path, &bytes, ids.width(), ids.height(), ExtendedColorType::L16)
}

pub fn read_rgb(path: &Path) -> Result<RgbImage> {
    Ok(image::open(path).map_err(|e| image_error(path, e))?.into_rgb8())
}

pub fn read_ids(path: &Path) -> Result<IdMap> {
    let img = image::open(path).map_err(|e| image_error(path, e))?;
    match img {
        image::DynamicImage::ImageLuma16(ids) => Ok(ids),
        other => Err(Error::InvalidConfig(format!(
            "{}: expected a 16-bit grayscale id map, found {:?}",
            path.display(),
            other.color()
        ))),
    }
}

pub const CAMERA_NAMES: [&str; 2] = ["left", "right"];

/// Names of the per-camera color images, in storage order.
pub const IMAGE_KINDS: [&str; 5] = ["rt", "ro", "bg_rt", "bg_ro", "tool_only"];

pub fn sample_dir(root: &Path, index: usize) -> PathBuf {
    root.join("samples").join(format!("{index:06}"))
}

/// Creates `root` (which must be absent or empty) and its `samples/` directory.
pub fn create_dataset_dir(root: &Path) -> Result<()> {
    if root.exists() {
        let mut entries = fs::read_dir(root).map_err(|e| Error::io(root, e))?;
        if entries.next().is_some() {
            return Err(Error::io(
                root,
                std::io::Error::new(std::io::ErrorKind::AlreadyExists, "output directory is not empty"),
            ));
        }
    }
    let samples = root.join("samples");
    fs::create_dir_all(&samples).map_err(|e| Error::io(&samples, e))
}

pub fn write_sample(root: &Path, index: usize, record: &SampleRecord) -> Result<()> {
    let dir = sample_dir(root, index);
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    for (name, cam) in CAMERA_NAMES.iter().zip(&record.cameras) {
        for (kind, img) in IMAGE_KINDS.iter().zip(color_images(cam)) {
            write_rgb(&dir.join(format!("{name}_{kind}.png")), img)?;
        }
        write_ids(&dir.join(format!("{name}_id_rt.png")), &cam.id_rt)?;
        write_ids(&dir.join(format!("{name}_id_ro.png")), &cam.id_ro)?;
    }
    write_json(&dir.join("label.json"), &record.label)
}

pub fn color_images(cam: &CameraImages) -> [&RgbImage; 5] {
    [&cam.rt, &cam.ro, &cam.bg_rt, &cam.bg_ro, &cam.tool_only]
}

pub fn write_manifest(root: &Path, manifest: &Manifest) -> Result<()> {
    write_json(&root.join("manifest.json"), manifest)
}

/// An opened dataset. Samples are loaded on demand.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub root: PathBuf,
    pub manifest: Manifest,
}

#[derive(Deserialize)]
struct VersionProbe {
    format_version: u32,
}

impl Dataset {
    pub fn open(root: &Path) -> Result<Self> {
        let path = root.join("manifest.json");
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let json_error = |source| Error::Json {
            path: path.clone(),
            source,
        };
        let probe: VersionProbe = serde_json::from_str(&text).map_err(json_error)?;
        if probe.format_version != FORMAT_VERSION {
            return Err(Error::VersionMismatch {
                expected: FORMAT_VERSION,
                found: probe.format_version,
            });
        }
        let manifest: Manifest = serde_json::from_str(&text).map_err(json_error)?;
        Ok(Dataset {
            root: root.to_path_buf(),
            manifest,
        })
    }

    pub fn len(&self) -> usize {
        self.manifest.sample_count
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn dir(&self, index: usize) -> Result<PathBuf> {
        if index >= self.len() {
            return Err(Error::IndexOutOfRange { index, len: self.len() });
        }
        Ok(sample_dir(&self.root, index))
    }

    pub fn label(&self, index: usize) -> Result<SampleLabel> {
        read_json(&self.dir(index)?.join("label.json"))
    }

    pub fn record(&self, index: usize) -> Result<SampleRecord> {
        let dir = self.dir(index)?;
        let camera = |name: &str| -> Result<CameraImages> {
            let rgb = |kind: &str| read_rgb(&dir.join(format!("{name}_{kind}.png")));
            Ok(CameraImages {
                rt: rgb("rt")?,
                ro: rgb("ro")?,
                bg_rt: rgb("bg_rt")?,
                bg_ro: rgb("bg_ro")?,
                tool_only: rgb("tool_only")?,
                id_rt: read_ids(&dir.join(format!("{name}_id_rt.png")))?,
                id_ro: read_ids(&dir.join(format!("{name}_id_ro.png")))?,
            })
        };
        Ok(SampleRecord {
            label: self.label(index)?,
            cameras: [camera("left")?, camera("right")?],
        })
    }
}

/// Generates `config.samples` samples into `root` and writes the manifest.
pub fn generate_dataset(config: GenerationConfig, root: &Path, workers: usize) -> Result<Manifest> {
    generate_dataset_with_progress(config, root, workers, |_| {})
}

/// As [`generate_dataset`], calling `progress(index)` after each sample is
/// written. Calls come from worker threads in no particular order.
pub fn generate_dataset_with_progress<P>(config: GenerationConfig, root: &Path, workers: usize, progress: P) -> Result<Manifest>
where
    P: Fn(usize) + Sync,
{
    let generator = Generator::new(config)?;
    create_dataset_dir(root)?;
    let stats = generator.generate(workers, |i, record| {
        write_sample(root, i, record)?;
        progress(i);
        Ok(())
    })?;
    let manifest = Manifest::new(
        generator.config().clone(),
        generator.rig().clone(),
        *generator.cuboid(),
        stats,
        stats.accepted as usize,
    );
    write_manifest(root, &manifest)?;
    Ok(manifest)
}

/// Re-runs every check on every stored label, from the manifest's config
/// alone. Returns `(index, problem)` for each sample that fails.
pub fn recheck_dataset(dataset: &Dataset) -> Result<Vec<(usize, String)>> {
    let generator = Generator::new(dataset.manifest.config.clone())?;
    let mut problems = Vec::new();
    if generator.rig() != &dataset.manifest.rig || generator.cuboid() != &dataset.manifest.cuboid {
        problems.push((usize::MAX, "manifest rig or cuboid does not match its config".to_string()));
    }
    let labels: Vec<(usize, Result<SampleLabel>)> = (0..dataset.len()).map(|i| (i, dataset.label(i))).collect();
    let outcomes: Vec<(usize, Result<std::result::Result<(), String>>)> = labels
        .into_par_iter()
        .map(|(i, l)| (i, l.and_then(|l| generator.recheck(&l))))
        .collect();
    for (i, outcome) in outcomes {
        match outcome {
            Ok(Ok(())) => {}
            Ok(Err(msg)) => problems.push((i, msg)),
            Err(e) => problems.push((i, e.to_string())),
        }
    }
    Ok(problems)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::render::randomize::RenderMode;
    use image::{Luma, Rgb};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_record(rng: &mut ChaCha8Rng) -> SampleRecord {
        let mut rgb = || RgbImage::from_fn(16, 12, |_, _| Rgb([rng.random(), rng.random(), rng.random()]));
        let cam = CameraImages {
            rt: rgb(),
            ro: rgb(),
            bg_rt: rgb(),
            bg_ro: rgb(),
            tool_only: rgb(),
            id_rt: IdMap::from_fn(16, 12, |x, y| Luma([(x * 1000 + y) as u16])),
            id_ro: IdMap::from_fn(16, 12, |x, _| Luma([x as u16 % 3])),
        };
        SampleRecord {
            label: SampleLabel {
                position_base_m: std::array::from_fn(|_| rng.random_range(-1.0..1.0)),
                orientation_quat_wxyz: std::array::from_fn(|_| rng.random_range(-1.0..1.0)),
                joints_rad: std::array::from_fn(|_| rng.random_range(-3.0..3.0)),
                screwdriver_id: "sd".into(),
                scene_seed: rng.random(),
                mode: if rng.random() { RenderMode::RobotClothed } else { RenderMode::RobotVisible },
                composited: rng.random(),
            },
            cameras: [cam.clone(), cam],
        }
    }

    fn manifest(n: usize) -> Manifest {
        let cfg = GenerationConfig::default();
        let (rig, cuboid) = cfg.rig_and_cuboid().unwrap();
        let stats = RejectionStats {
            attempts: n as u64 + 3,
            accepted: n as u64,
            unreachable: 1,
            collision: 2,
            ..RejectionStats::default()
        };
        Manifest::new(cfg, rig, cuboid, stats, n)
    }

    #[test]
    fn write_then_read_is_lossless() {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path().join("ds");
        create_dataset_dir(&root).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let records: Vec<SampleRecord> = (0..10).map(|_| random_record(&mut rng)).collect();
        for (i, r) in records.iter().enumerate() {
            write_sample(&root, i, r).unwrap();
        }
        let m = manifest(10);
        write_manifest(&root, &m).unwrap();
        let ds = Dataset::open(&root).unwrap();
        assert_eq!(ds.manifest, m);
        assert!(ds.manifest.rejection_stats.is_consistent());
        for (i, r) in records.iter().enumerate() {
            let back = ds.record(i).unwrap();
            // Bit-exact floats, so the labels are equal outright.
            assert_eq!(back, *r);
        }
        assert!(ds.record(10).is_err());
    }

    #[test]
    fn floats_carry_seventeen_significant_digits() {
        let text = to_json_string(&[0.1f64, -2.5, 1e-300]);
        assert!(text.contains("1.0000000000000001e-1"), "{text}");
        assert!(text.contains("-2.5000000000000000e0"), "{text}");
        let back: Vec<f64> = serde_json::from_str(&text).unwrap();
        assert_eq!(back, vec![0.1, -2.5, 1e-300]);
    }

    #[test]
    fn bad_manifests_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path();
        fs::create_dir_all(root.join("samples")).unwrap();
        let mut m = manifest(0);
        m.format_version = FORMAT_VERSION + 1;
        write_manifest(root, &m).unwrap();
        assert!(matches!(
            Dataset::open(root),
            Err(Error::VersionMismatch { found, .. }) if found == FORMAT_VERSION + 1
        ));
        fs::write(root.join("manifest.json"), "{\"format_version\": 1, \"config\": ").unwrap();
        assert!(matches!(Dataset::open(root), Err(Error::Json { .. })));
        fs::remove_file(root.join("manifest.json")).unwrap();
        assert!(matches!(Dataset::open(root), Err(Error::Io { .. })));
    }

    #[test]
    fn non_empty_output_directory_is_refused() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("junk"), "x").unwrap();
        assert!(create_dataset_dir(dir.path()).is_err());
        assert!(create_dataset_dir(&dir.path().join("fresh")).is_ok());
    }
}
