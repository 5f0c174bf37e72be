//! Deterministic desk-scale dataset generation and CIFAR-10 binary ingestion.

use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::{next_gaussian, shuffle, substream};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

const CIFAR_RECORD: usize = 3073; // 1 label byte + 3 x 32 x 32 pixels
const CIFAR_PIXELS: usize = 3072;

/// Deterministic train/test partition recipe.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitSpec {
    pub train_fraction: f64,
    #[serde(default)]
    pub seed: u64,
}

impl SplitSpec {
    /// Disjoint, covering `(train, test)` split.
    pub fn apply<S: Scalar>(&self, ds: &Dataset<S>) -> Result<(Dataset<S>, Dataset<S>)> {
        ds.split(self.train_fraction, self.seed)
    }
}

/// Labeled images, stored as one `N x ...sample` tensor. Immutable after
/// construction and freely shared between workers.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset<S> {
    pub images: Tensor<S>,
    pub labels: Vec<usize>,
    pub class_count: usize,
}

impl<S: Scalar> Dataset<S> {
    pub fn new(images: Tensor<S>, labels: Vec<usize>, class_count: usize) -> Result<Self> {
        let n = images.shape().first().copied().unwrap_or(0);
        if n != labels.len() {
            return Err(Error::Config(format!(
                "dataset has {n} images but {} labels",
                labels.len()
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= class_count) {
            return Err(Error::LabelOutOfRange {
                label: bad,
                classes: class_count,
            });
        }
        Ok(Self {
            images,
            labels,
            class_count,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Shape of one sample (the image tensor without the leading N).
    pub fn sample_shape(&self) -> &[usize] {
        &self.images.shape()[1..]
    }

    /// Copy out sample `i` as its own tensor.
    pub fn sample(&self, i: usize) -> Tensor<S> {
        let shape = self.sample_shape().to_vec();
        let stride: usize = shape.iter().product();
        let data = self.images.data()[i * stride..(i + 1) * stride].to_vec();
        Tensor::new(shape, data).expect("sample slice")
    }

    pub fn map_to<T: Scalar>(&self) -> Dataset<T> {
        Dataset {
            images: self.images.map_to::<T>(),
            labels: self.labels.clone(),
            class_count: self.class_count,
        }
    }

    /// Seed-deterministic sample of `n` items without replacement,
    /// stratified by class when `n` divides evenly across classes.
    pub fn subset(&self, n: usize, seed: u64) -> Result<Dataset<S>> {
        if n == 0 {
            return Err(Error::EmptyDataset);
        }
        if n > self.len() {
            return Err(Error::Config(format!(
                "subset of {n} from a dataset of {}",
                self.len()
            )));
        }
        let mut rng = substream(seed, "subset", &[n as u64]);
        let per_class = n / self.class_count;
        let indices: Vec<usize> = if n.is_multiple_of(self.class_count) && per_class > 0 {
            let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); self.class_count];
            for (i, &l) in self.labels.iter().enumerate() {
                by_class[l].push(i);
            }
            if by_class.iter().any(|c| c.len() < per_class) {
                self.plain_sample(n, &mut rng)
            } else {
                let mut picked = Vec::with_capacity(n);
                for class in by_class.iter_mut() {
                    shuffle(&mut rng, class);
                    picked.extend_from_slice(&class[..per_class]);
                }
                picked
            }
        } else {
            self.plain_sample(n, &mut rng)
        };
        self.gather(&indices)
    }

    fn plain_sample<R: Rng>(&self, n: usize, rng: &mut R) -> Vec<usize> {
        let mut all: Vec<usize> = (0..self.len()).collect();
        shuffle(rng, &mut all);
        all.truncate(n);
        all
    }

    fn gather(&self, indices: &[usize]) -> Result<Dataset<S>> {
        let shape = self.sample_shape().to_vec();
        let stride: usize = shape.iter().product();
        let mut data = Vec::with_capacity(indices.len() * stride);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            data.extend_from_slice(&self.images.data()[i * stride..(i + 1) * stride]);
            labels.push(self.labels[i]);
        }
        let mut full_shape = vec![indices.len()];
        full_shape.extend_from_slice(&shape);
        Dataset::new(Tensor::new(full_shape, data)?, labels, self.class_count)
    }

    /// Split into `(train, test)`; deterministic in the seed, disjoint, and
    /// covering.
    pub fn split(&self, train_fraction: f64, seed: u64) -> Result<(Dataset<S>, Dataset<S>)> {
        if !(0.0..=1.0).contains(&train_fraction) || train_fraction == 0.0 {
            return Err(Error::Config(format!(
                "train_fraction {train_fraction} not in (0, 1]"
            )));
        }
        let mut idx: Vec<usize> = (0..self.len()).collect();
        let mut rng = substream(seed, "split", &[]);
        shuffle(&mut rng, &mut idx);
        let n_train = ((self.len() as f64) * train_fraction).round() as usize;
        let n_train = n_train.clamp(1, self.len());
        let train = self.gather(&idx[..n_train])?;
        let test = if n_train == self.len() {
            self.gather(&[])?
        } else {
            self.gather(&idx[n_train..])?
        };
        Ok((train, test))
    }
}

/// `K` isotropic Gaussian clusters in `dims` dimensions with centers at
/// mutual distance >= `separation`. Samples are `[dims, 1, 1]` so vector
/// specs can start with a flatten layer.
pub fn gen_blobs<S: Scalar>(
    classes: usize,
    per_class: usize,
    dims: usize,
    separation: f64,
    seed: u64,
) -> Result<Dataset<S>> {
    if classes < 2 || per_class == 0 || dims == 0 {
        return Err(Error::Config(
            "blobs need >= 2 classes, >= 1 sample, dims >= 1".into(),
        ));
    }
    // Lattice of centers: class k sits on axis (k % dims) at magnitude
    // separation * (1 + k / dims); any two centers are >= separation apart.
    let centers: Vec<Vec<f64>> = (0..classes)
        .map(|k| {
            let mut c = vec![0.0; dims];
            c[k % dims] = separation * (1 + k / dims) as f64;
            c
        })
        .collect();

    let n = classes * per_class;
    let mut data = Vec::with_capacity(n * dims);
    let mut labels = Vec::with_capacity(n);
    let mut rng = substream(seed, "blobs", &[classes as u64, per_class as u64]);
    for (k, center) in centers.iter().enumerate() {
        for _ in 0..per_class {
            for &c in center.iter() {
                data.push(S::from_f64(c + next_gaussian(&mut rng)));
            }
            labels.push(k);
        }
    }
    Dataset::new(Tensor::new(vec![n, dims, 1, 1], data)?, labels, classes)
}

/// Interleaved 2-D spiral arms: class k's arm rotates by `2 pi k / K`, with
/// Gaussian positional noise.
pub fn gen_spirals<S: Scalar>(
    classes: usize,
    per_class: usize,
    noise: f64,
    seed: u64,
) -> Result<Dataset<S>> {
    if classes < 2 {
        return Err(Error::Config("spirals need at least 2 classes".into()));
    }
    if per_class == 0 {
        return Err(Error::EmptyDataset);
    }
    let n = classes * per_class;
    let mut data = Vec::with_capacity(n * 2);
    let mut labels = Vec::with_capacity(n);
    let mut rng = substream(seed, "spirals", &[classes as u64, per_class as u64]);
    let turns = 2.5;
    for k in 0..classes {
        let phase = 2.0 * std::f64::consts::PI * k as f64 / classes as f64;
        for i in 0..per_class {
            let t = i as f64 / per_class as f64;
            let r = 0.1 + 0.9 * t;
            let angle = phase + 2.0 * std::f64::consts::PI * turns * t;
            let x = r * angle.cos() + noise * next_gaussian(&mut rng);
            let y = r * angle.sin() + noise * next_gaussian(&mut rng);
            data.push(S::from_f64(x));
            data.push(S::from_f64(y));
            labels.push(k);
        }
    }
    Dataset::new(Tensor::new(vec![n, 2, 1, 1], data)?, labels, classes)
}

/// Rasterize 2-D points onto a `grid x grid` single-channel image via a
/// Gaussian bump, so conv specs can consume point datasets. Points are
/// expected roughly inside [-1.25, 1.25].
pub fn embed_grid<S: Scalar>(points: &Dataset<S>, grid: usize, sigma: f64) -> Result<Dataset<S>> {
    if points.sample_shape() != [2, 1, 1] {
        return Err(Error::Config(format!(
            "grid embedding needs 2-D points, got sample shape {:?}",
            points.sample_shape()
        )));
    }
    if grid < 2 || sigma <= 0.0 {
        return Err(Error::Config(
            "grid embedding needs grid >= 2, sigma > 0".into(),
        ));
    }
    let extent = 1.25f64;
    let n = points.len();
    let mut data = Vec::with_capacity(n * grid * grid);
    for i in 0..n {
        let s = points.sample(i);
        let px = s.data()[0].to_f64();
        let py = s.data()[1].to_f64();
        for gy in 0..grid {
            let cy = -extent + 2.0 * extent * (gy as f64 + 0.5) / grid as f64;
            for gx in 0..grid {
                let cx = -extent + 2.0 * extent * (gx as f64 + 0.5) / grid as f64;
                let d2 = (cx - px) * (cx - px) + (cy - py) * (cy - py);
                data.push(S::from_f64((-d2 / (2.0 * sigma * sigma)).exp()));
            }
        }
    }
    Dataset::new(
        Tensor::new(vec![n, 1, grid, grid], data)?,
        points.labels.clone(),
        points.class_count,
    )
}

/// Class-tinted noise images in the CIFAR-10 shape, with pixel values on the
/// exact u8 grid so a binary export round-trips bit for bit.
pub fn gen_synthetic_cifar<S: Scalar>(
    classes: usize,
    per_class: usize,
    seed: u64,
) -> Result<Dataset<S>> {
    if !(2..=10).contains(&classes) || per_class == 0 {
        return Err(Error::Config(
            "synthetic CIFAR needs 2..=10 classes, >= 1 sample".into(),
        ));
    }
    let n = classes * per_class;
    let mut data = Vec::with_capacity(n * CIFAR_PIXELS);
    let mut labels = Vec::with_capacity(n);
    let mut rng = substream(seed, "synthetic-cifar", &[classes as u64, per_class as u64]);
    for class in 0..classes {
        for _ in 0..per_class {
            labels.push(class);
            for ch in 0..3usize {
                // Per-class channel tint plus uniform noise, quantized.
                let tint = ((class * 23 + ch * 71) % 128) as i32;
                for _ in 0..1024 {
                    let noise: i32 = rng.gen_range(0..128);
                    let px = (tint + noise).clamp(0, 255) as u8;
                    data.push(S::from_f64(px as f64 / 255.0));
                }
            }
        }
    }
    Dataset::new(Tensor::new(vec![n, 3, 32, 32], data)?, labels, classes)
}

/// Parse CIFAR-10 binary batches: records of one label byte (0-9) followed by
/// 3072 channel-planar pixel bytes. Pixels land in [0, 1] and are then
/// normalized per channel as `(v - mean) / std`.
pub fn load_cifar10_bin<S: Scalar>(
    bytes: &[u8],
    mean: [f64; 3],
    std: [f64; 3],
) -> Result<Dataset<S>> {
    if !bytes.len().is_multiple_of(CIFAR_RECORD) {
        return Err(Error::Codec(format!(
            "CIFAR-10 batch length {} is not a multiple of {CIFAR_RECORD}",
            bytes.len()
        )));
    }
    let n = bytes.len() / CIFAR_RECORD;
    let mut data = Vec::with_capacity(n * CIFAR_PIXELS);
    let mut labels = Vec::with_capacity(n);
    for rec in bytes.chunks_exact(CIFAR_RECORD) {
        let label = rec[0] as usize;
        if label > 9 {
            return Err(Error::Codec(format!("CIFAR-10 label byte {label} > 9")));
        }
        labels.push(label);
        for (i, &px) in rec[1..].iter().enumerate() {
            let ch = i / 1024;
            let v = px as f64 / 255.0;
            data.push(S::from_f64((v - mean[ch]) / std[ch]));
        }
    }
    Dataset::new(Tensor::new(vec![n, 3, 32, 32], data)?, labels, 10)
}

pub fn load_cifar10_file<S: Scalar>(
    path: &std::path::Path,
    mean: [f64; 3],
    std: [f64; 3],
) -> Result<Dataset<S>> {
    load_cifar10_bin(&std::fs::read(path)?, mean, std)
}

/// Write a `[N, 3, 32, 32]` dataset with values in [0, 1] back to the
/// CIFAR-10 binary layout (quantized to bytes), for fixture reuse.
pub fn save_cifar10_bin<S: Scalar>(ds: &Dataset<S>) -> Result<Vec<u8>> {
    if ds.sample_shape() != [3, 32, 32] {
        return Err(Error::Codec(format!(
            "CIFAR-10 export needs [3, 32, 32] samples, got {:?}",
            ds.sample_shape()
        )));
    }
    if ds.class_count > 10 {
        return Err(Error::Codec(
            "CIFAR-10 export supports at most 10 classes".into(),
        ));
    }
    let mut out = Vec::with_capacity(ds.len() * CIFAR_RECORD);
    for i in 0..ds.len() {
        out.push(ds.labels[i] as u8);
        let s = ds.sample(i);
        for v in s.iter() {
            let q = (v.to_f64().clamp(0.0, 1.0) * 255.0).round() as u8;
            out.push(q);
        }
    }
    Ok(out)
}

/// Nearest-centroid classifier accuracy, an independent sanity oracle for
/// generated datasets.
pub fn nearest_centroid_accuracy<S: Scalar>(ds: &Dataset<S>) -> Result<f64> {
    if ds.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let dim: usize = ds.sample_shape().iter().product();
    let mut centroids = vec![vec![0.0f64; dim]; ds.class_count];
    let mut counts = vec![0usize; ds.class_count];
    for i in 0..ds.len() {
        let s = ds.sample(i);
        let c = ds.labels[i];
        counts[c] += 1;
        for (acc, v) in centroids[c].iter_mut().zip(s.iter()) {
            *acc += v.to_f64();
        }
    }
    for (c, count) in centroids.iter_mut().zip(&counts) {
        if *count > 0 {
            for v in c.iter_mut() {
                *v /= *count as f64;
            }
        }
    }
    let mut correct = 0usize;
    for i in 0..ds.len() {
        let s = ds.sample(i);
        let mut best = 0usize;
        let mut best_d = f64::INFINITY;
        for (c, centroid) in centroids.iter().enumerate() {
            let d: f64 = centroid
                .iter()
                .zip(s.iter())
                .map(|(a, b)| (a - b.to_f64()) * (a - b.to_f64()))
                .sum();
            if d < best_d {
                best_d = d;
                best = c;
            }
        }
        if best == ds.labels[i] {
            correct += 1;
        }
    }
    Ok(100.0 * correct as f64 / ds.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn blobs_balanced_and_deterministic() {
        let a = gen_blobs::<f32>(2, 10, 3, 6.0, 42).unwrap();
        assert_eq!(a.len(), 20);
        assert_eq!(a.labels.iter().filter(|&&l| l == 0).count(), 10);
        let b = gen_blobs::<f32>(2, 10, 3, 6.0, 42).unwrap();
        assert_eq!(a, b);
        let c = gen_blobs::<f32>(2, 10, 3, 6.0, 43).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn separated_blobs_are_centroid_separable() {
        let ds = gen_blobs::<f64>(3, 60, 2, 10.0, 7).unwrap();
        assert!(nearest_centroid_accuracy(&ds).unwrap() >= 99.0);
    }

    #[test]
    fn spirals_defeat_centroids() {
        let ds = gen_spirals::<f64>(2, 250, 0.0, 5).unwrap();
        // Interleaved arms wrap the origin, so class centroids nearly
        // coincide and the linear oracle hovers near chance.
        assert!(nearest_centroid_accuracy(&ds).unwrap() < 72.0);
        assert_eq!(ds, gen_spirals::<f64>(2, 250, 0.0, 5).unwrap());
        assert!(gen_spirals::<f64>(2, 0, 0.0, 5).is_err());
    }

    #[test]
    fn cifar_codec_round_trip() {
        // Two synthetic records with labels 3 and 7.
        let mut bytes = Vec::new();
        for (label, fill) in [(3u8, 10u8), (7u8, 200u8)] {
            bytes.push(label);
            bytes.extend((0..3072).map(|i| fill.wrapping_add((i % 13) as u8)));
        }
        let ds = load_cifar10_bin::<f32>(&bytes, [0.0; 3], [1.0; 3]).unwrap();
        assert_eq!(ds.len(), 2);
        assert_eq!(ds.labels, vec![3, 7]);

        let back = save_cifar10_bin(&ds).unwrap();
        assert_eq!(back, bytes);

        assert_eq!(
            load_cifar10_bin::<f32>(&bytes[..3073], [0.0; 3], [1.0; 3])
                .unwrap()
                .len(),
            1
        );
        assert!(load_cifar10_bin::<f32>(&bytes[..3074], [0.0; 3], [1.0; 3]).is_err());

        let mut bad_label = bytes.clone();
        bad_label[0] = 11;
        assert!(load_cifar10_bin::<f32>(&bad_label, [0.0; 3], [1.0; 3]).is_err());
    }

    #[test]
    fn synthetic_cifar_survives_binary_round_trip() {
        let ds = gen_synthetic_cifar::<f32>(4, 3, 9).unwrap();
        let bytes = save_cifar10_bin(&ds).unwrap();
        let back = load_cifar10_bin::<f32>(&bytes, [0.0; 3], [1.0; 3]).unwrap();
        assert_eq!(save_cifar10_bin(&back).unwrap(), bytes);
        assert_eq!(back.labels, ds.labels);
    }

    #[test]
    fn subset_behaviour() {
        let ds = gen_blobs::<f32>(2, 16, 2, 5.0, 1).unwrap();
        let full = ds.subset(32, 9).unwrap();
        assert_eq!(full.len(), 32);
        let mut sorted = full.labels.clone();
        sorted.sort_unstable();
        let mut expect = ds.labels.clone();
        expect.sort_unstable();
        assert_eq!(sorted, expect);

        assert!(ds.subset(0, 9).is_err());
        assert!(ds.subset(33, 9).is_err());
        assert_eq!(ds.subset(10, 4).unwrap(), ds.subset(10, 4).unwrap());

        // Stratified path: class proportions within one sample.
        let s = ds.subset(8, 3).unwrap();
        let zeros = s.labels.iter().filter(|&&l| l == 0).count();
        assert_eq!(zeros, 4);
    }

    #[test]
    fn split_is_disjoint_and_covering() {
        let ds = gen_blobs::<f32>(2, 20, 2, 5.0, 2).unwrap();
        let (train, test) = ds.split(0.75, 11).unwrap();
        assert_eq!(train.len() + test.len(), ds.len());
        assert_eq!(train.len(), 30);

        let spec = SplitSpec {
            train_fraction: 0.75,
            seed: 11,
        };
        let (t2, e2) = spec.apply(&ds).unwrap();
        assert_eq!(t2, train);
        assert_eq!(e2, test);
    }
}
