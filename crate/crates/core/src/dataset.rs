//! Labelled input sets: csv and MNIST idx readers, plus seeded synthetic
//! Gaussian clusters for desk-scale experiments.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub input: Tensor,
    pub label: usize,
}

/// Inputs in `[0,1]^m` with class labels.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    input_shape: Vec<usize>,
    samples: Vec<Sample>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DatasetFormat {
    Csv,
    Idx,
}

impl FromStr for DatasetFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(DatasetFormat::Csv),
            "idx" => Ok(DatasetFormat::Idx),
            other => Err(Error::InvalidArgument(format!("unknown dataset format `{other}`"))),
        }
    }
}

impl Dataset {
    pub fn new(input_shape: Vec<usize>, samples: Vec<Sample>) -> Result<Self> {
        let m: usize = input_shape.iter().product();
        for (i, s) in samples.iter().enumerate() {
            if s.input.len() != m {
                return Err(Error::Data(format!("sample {i} has {} values, expected {m}", s.input.len())));
            }
            if s.input.data().iter().any(|v| !(0.0..=1.0).contains(v)) {
                return Err(Error::Data(format!("sample {i} has values outside [0,1]")));
            }
        }
        Ok(Self { input_shape, samples })
    }

    pub fn input_shape(&self) -> &[usize] {
        &self.input_shape
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn check_labels(&self, label_count: usize) -> Result<()> {
        match self.samples.iter().position(|s| s.label >= label_count) {
            Some(i) => Err(Error::Data(format!(
                "sample {i} has label {} but only {label_count} labels exist",
                self.samples[i].label
            ))),
            None => Ok(()),
        }
    }

    /// Same samples reinterpreted under another shape with equal element count.
    pub fn with_input_shape(mut self, shape: Vec<usize>) -> Result<Self> {
        let m: usize = shape.iter().product();
        if !self.is_empty() && m != self.input_shape.iter().product::<usize>() {
            return Err(Error::ShapeMismatch { expected: self.input_shape, got: shape });
        }
        for s in &mut self.samples {
            s.input = std::mem::replace(&mut s.input, Tensor::zeros(vec![0])).reshape(shape.clone())?;
        }
        self.input_shape = shape;
        Ok(self)
    }

    /// Splits off the first `head` samples.
    pub fn split_at(&self, head: usize) -> (Dataset, Dataset) {
        let head = head.min(self.len());
        (
            Dataset { input_shape: self.input_shape.clone(), samples: self.samples[..head].to_vec() },
            Dataset { input_shape: self.input_shape.clone(), samples: self.samples[head..].to_vec() },
        )
    }

    /// Writes `label,v0,...` lines with values in `[0,1]`.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut out = std::io::BufWriter::new(fs::File::create(path)?);
        for s in &self.samples {
            write!(out, "{}", s.label)?;
            for v in s.input.data() {
                write!(out, ",{v}")?;
            }
            writeln!(out)?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Loads a dataset; for `idx`, `path` is the image file and the label file is
/// found next to it (see [`idx_labels_path`]).
pub fn load_dataset(path: impl AsRef<Path>, format: DatasetFormat, label_count: Option<usize>) -> Result<Dataset> {
    let path = path.as_ref();
    let ds = match format {
        DatasetFormat::Csv => parse_csv(&fs::read_to_string(path)?)?,
        DatasetFormat::Idx => {
            let labels = idx_labels_path(path)
                .ok_or_else(|| Error::Data(format!("no idx1 label file found for {}", path.display())))?;
            parse_idx(&fs::read(path)?, &fs::read(labels)?)?
        }
    };
    if let Some(k) = label_count {
        ds.check_labels(k)?;
    }
    Ok(ds)
}

/// MNIST naming (`*-images-idx3-ubyte` → `*-labels-idx1-ubyte`, also the
/// `images.idx3-ubyte` variant), falling back to `<path>.labels`.
pub fn idx_labels_path(images: &Path) -> Option<PathBuf> {
    let name = images.file_name()?.to_str()?;
    let candidates = [
        name.replace("images-idx3", "labels-idx1"),
        name.replace("images.idx3", "labels.idx1"),
        format!("{name}.labels"),
    ];
    candidates.into_iter().filter(|c| c != name).map(|c| images.with_file_name(c)).find(|p| p.exists())
}

pub fn parse_csv(text: &str) -> Result<Dataset> {
    let mut rows: Vec<(usize, Vec<f64>)> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut fields = line.split(',').map(str::trim);
        let label = fields
            .next()
            .and_then(|f| f.parse::<usize>().ok())
            .ok_or_else(|| Error::Data(format!("line {}: bad label", lineno + 1)))?;
        let values = fields
            .map(|f| f.parse::<f64>().map_err(|_| Error::Data(format!("line {}: bad value `{f}`", lineno + 1))))
            .collect::<Result<Vec<_>>>()?;
        if let Some((_, first)) = rows.first() {
            if first.len() != values.len() {
                return Err(Error::Data(format!(
                    "line {}: {} values, expected {}",
                    lineno + 1,
                    values.len(),
                    first.len()
                )));
            }
        }
        rows.push((label, values));
    }
    let Some((_, first)) = rows.first() else {
        return Ok(Dataset::default());
    };
    let m = first.len();
    let max = rows.iter().flat_map(|(_, v)| v.iter().copied()).fold(0.0, f64::max);
    let min = rows.iter().flat_map(|(_, v)| v.iter().copied()).fold(0.0, f64::min);
    if min < 0.0 || max > 255.0 || !max.is_finite() {
        return Err(Error::Data("csv values must lie in [0,255] or [0,1]".into()));
    }
    let scale = if max > 1.0 { 255.0 } else { 1.0 };
    let samples = rows
        .into_iter()
        .map(|(label, v)| Sample { input: Tensor::vector(v.into_iter().map(|x| x / scale).collect()), label })
        .collect();
    Dataset::new(vec![m], samples)
}

fn be_u32(bytes: &[u8], at: usize, what: &str) -> Result<u32> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| Error::Data(format!("truncated {what} header")))
}

pub const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
pub const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

/// Parses an idx3 image file and its idx1 label file.
pub fn parse_idx(images: &[u8], labels: &[u8]) -> Result<Dataset> {
    let magic = be_u32(images, 0, "image")?;
    if magic != IDX_IMAGES_MAGIC {
        return Err(Error::Data(format!("bad idx3 magic number {magic:#010x}")));
    }
    let count = be_u32(images, 4, "image")? as usize;
    let rows = be_u32(images, 8, "image")? as usize;
    let cols = be_u32(images, 12, "image")? as usize;
    let lmagic = be_u32(labels, 0, "label")?;
    if lmagic != IDX_LABELS_MAGIC {
        return Err(Error::Data(format!("bad idx1 magic number {lmagic:#010x}")));
    }
    let lcount = be_u32(labels, 4, "label")? as usize;
    if lcount != count {
        return Err(Error::Data(format!("{count} images but {lcount} labels")));
    }
    let m = rows * cols;
    let pixels = &images[16..];
    if pixels.len() < count * m {
        return Err(Error::Data(format!("truncated idx3 file: {} of {} pixel bytes", pixels.len(), count * m)));
    }
    let label_bytes = &labels[8..];
    if label_bytes.len() < count {
        return Err(Error::Data(format!("truncated idx1 file: {} of {count} labels", label_bytes.len())));
    }
    let samples = pixels
        .chunks_exact(m.max(1))
        .take(count)
        .zip(label_bytes)
        .map(|(px, &l)| Sample {
            input: Tensor::new(vec![1, rows, cols], px.iter().map(|&b| f64::from(b) / 255.0).collect())
                .expect("pixel count matches shape"),
            label: usize::from(l),
        })
        .collect();
    Dataset::new(vec![1, rows, cols], samples)
}

/// Parameters of [`gen_synthetic`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticSpec {
    pub classes: usize,
    pub dims: usize,
    pub per_class: usize,
    pub spread: f64,
    pub seed: u64,
}

/// Gaussian clusters around `classes` random centres in `[0.2,0.8]^dims`,
/// clipped to `[0,1]`, shuffled deterministically.
pub fn gen_synthetic(spec: SyntheticSpec) -> Result<Dataset> {
    let SyntheticSpec { classes, dims, per_class, spread, seed } = spec;
    if classes < 2 || dims < 2 || !(spread > 0.0 && spread.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "synthetic data needs classes >= 2, dims >= 2, spread > 0 (got {classes}, {dims}, {spread})"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let centers: Vec<Vec<f64>> = (0..classes).map(|_| (0..dims).map(|_| rng.gen_range(0.2..=0.8)).collect()).collect();
    let noise = Normal::new(0.0, spread).expect("spread validated");
    let mut samples = Vec::with_capacity(classes * per_class);
    for (label, c) in centers.iter().enumerate() {
        for _ in 0..per_class {
            let v = c.iter().map(|&ci| (ci + noise.sample(&mut rng)).clamp(0.0, 1.0)).collect();
            samples.push(Sample { input: Tensor::vector(v), label });
        }
    }
    samples.shuffle(&mut rng);
    Dataset::new(vec![dims], samples)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn idx_pair() -> (Vec<u8>, Vec<u8>) {
        let mut images = Vec::new();
        for v in [IDX_IMAGES_MAGIC, 2, 2, 2] {
            images.extend(v.to_be_bytes());
        }
        images.extend([0, 51, 102, 255, 255, 0, 0, 0]);
        let mut labels = Vec::new();
        for v in [IDX_LABELS_MAGIC, 2] {
            labels.extend(v.to_be_bytes());
        }
        labels.extend([3, 9]);
        (images, labels)
    }

    #[test]
    fn idx_two_images() {
        let (images, labels) = idx_pair();
        let ds = parse_idx(&images, &labels).unwrap();
        assert_eq!(ds.len(), 2);
        assert_eq!(ds.input_shape(), &[1, 2, 2]);
        assert_eq!(ds.samples()[0].input.data(), &[0.0, 0.2, 0.4, 1.0]);
        assert_eq!(ds.samples()[1].label, 9);
    }

    #[test]
    fn idx_bad_magic_and_truncation() {
        let (mut images, labels) = idx_pair();
        images[3] = 0x04;
        assert!(parse_idx(&images, &labels).unwrap_err().to_string().contains("magic"));
        let (images, labels) = idx_pair();
        assert!(parse_idx(&images[..images.len() - 1], &labels).unwrap_err().to_string().contains("truncated"));
        assert!(parse_idx(&images[..10], &labels).is_err());
        assert!(parse_idx(&images, &labels[..9]).is_err());
    }

    #[test]
    fn idx_files_on_disk() {
        let dir = tempfile::tempdir().unwrap();
        let (images, labels) = idx_pair();
        let ip = dir.path().join("t10k-images-idx3-ubyte");
        fs::write(&ip, images).unwrap();
        fs::write(dir.path().join("t10k-labels-idx1-ubyte"), labels).unwrap();
        let ds = load_dataset(&ip, DatasetFormat::Idx, Some(10)).unwrap();
        assert_eq!(ds.len(), 2);
        assert!(load_dataset(&ip, DatasetFormat::Idx, Some(5)).is_err());
    }

    #[test]
    fn csv_scales_bytes() {
        let ds = parse_csv("7,0,255,51\n").unwrap();
        assert_eq!(ds.samples()[0].label, 7);
        assert_eq!(ds.samples()[0].input.data(), &[0.0, 1.0, 0.2]);
    }

    #[test]
    fn csv_keeps_unit_values() {
        let ds = parse_csv("1,0.5,0.25\n0,1,0\n").unwrap();
        assert_eq!(ds.samples()[0].input.data(), &[0.5, 0.25]);
    }

    #[test]
    fn empty_csv_is_empty_dataset() {
        assert!(parse_csv("").unwrap().is_empty());
        assert!(parse_csv("\n\n").unwrap().is_empty());
    }

    #[test]
    fn csv_errors() {
        assert!(parse_csv("x,1,2").is_err());
        assert!(parse_csv("1,1,2\n1,3").is_err());
        assert!(parse_csv("1,300").is_err());
        assert!(parse_csv("1,-2").is_err());
        assert!(parse_csv("3,0.1").unwrap().check_labels(3).is_err());
    }

    #[test]
    fn synthetic_is_deterministic_and_in_range() {
        let spec = SyntheticSpec { classes: 3, dims: 4, per_class: 20, spread: 0.3, seed: 5 };
        let a = gen_synthetic(spec).unwrap();
        assert_eq!(a, gen_synthetic(spec).unwrap());
        assert_eq!(a.len(), 60);
        assert!(a.samples().iter().all(|s| s.input.data().iter().all(|v| (0.0..=1.0).contains(v))));
        assert!(a.samples().iter().all(|s| s.label < 3));
        assert_ne!(a, gen_synthetic(SyntheticSpec { seed: 6, ..spec }).unwrap());
        assert!(gen_synthetic(SyntheticSpec { classes: 1, ..spec }).is_err());
        assert!(gen_synthetic(SyntheticSpec { spread: 0.0, ..spec }).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let ds = gen_synthetic(SyntheticSpec { classes: 2, dims: 3, per_class: 4, spread: 0.1, seed: 1 }).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.csv");
        ds.write_csv(&p).unwrap();
        assert_eq!(load_dataset(&p, DatasetFormat::Csv, Some(2)).unwrap(), ds);
    }
}
