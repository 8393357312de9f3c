//! Synthetic source/target domain pairs with controllable covariate shift
//! (rotation) and task-semantic shift (displacement of the target positive
//! mode), plus the stratified target validation split.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{self, Stream};
use crate::tensor::Tensor;

/// Fraction of the target domain held out, stratified, for validation.
pub const VALIDATION_FRACTION: f64 = 0.2;

/// Labels are binary throughout; class 1 is the positive class.
pub const NUM_CLASSES: usize = 2;
pub const POSITIVE_CLASS: usize = 1;

/// A feature matrix with optional labels.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Split {
    pub features: Tensor,
    pub labels: Option<Vec<usize>>,
}

impl Split {
    pub fn len(&self) -> usize {
        self.features.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn width(&self) -> usize {
        self.features.cols()
    }

    pub fn labels(&self) -> Result<&[usize]> {
        self.labels
            .as_deref()
            .ok_or_else(|| Error::InvalidConfig(String::from("split has no labels")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeneratorKind {
    Moons,
    Blobs,
}

/// Where a dataset came from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Provenance {
    Generated {
        generator: GeneratorKind,
        spec: ShiftSpec,
        seed: u64,
    },
    Files {
        source: String,
        target_train: String,
        target_validation: String,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DomainDataset {
    pub source: Split,
    pub target_train: Split,
    pub target_validation: Split,
    pub metadata: Provenance,
}

impl DomainDataset {
    pub fn validate(&self) -> Result<()> {
        let d = self.source.width();
        for (name, s) in [("target_train", &self.target_train), ("target_validation", &self.target_validation)] {
            if s.width() != d {
                return Err(Error::InvalidConfig(format!(
                    "{name} has {} features, source has {d}",
                    s.width()
                )));
            }
        }
        for (name, s) in [("source", &self.source), ("target_validation", &self.target_validation)] {
            let labels = s.labels.as_ref().ok_or_else(|| Error::InvalidConfig(format!("{name} must be labelled")))?;
            if let Some(&bad) = labels.iter().find(|&&y| y >= NUM_CLASSES) {
                return Err(Error::LabelOutOfRange {
                    label: bad,
                    num_classes: NUM_CLASSES,
                });
            }
        }
        Ok(())
    }

    pub fn input_dim(&self) -> usize {
        self.source.width()
    }
}

/// Shift parameters of a synthetic domain pair.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShiftSpec {
    /// Rotation of the whole target domain, degrees.
    pub rotation_deg: f64,
    /// Displacement added to every target positive sample.
    pub positive_mode_shift: Vec<f64>,
    pub noise_std: f64,
    pub n_source: usize,
    pub n_target: usize,
    pub positive_fraction_target: f64,
}

impl ShiftSpec {
    /// The frozen default benchmark, `shifted-moons-taskflip`.
    pub fn shifted_moons_taskflip() -> Self {
        let noise_std = 0.15;
        ShiftSpec {
            rotation_deg: 30.0,
            // 1.5 noise standard deviations, straight down
            positive_mode_shift: alloc::vec![0.0, -1.5 * noise_std],
            noise_std,
            n_source: 2000,
            n_target: 2000,
            positive_fraction_target: 0.3,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.noise_std > 0.0 && self.noise_std.is_finite()) {
            return Err(Error::InvalidConfig(format!("noise_std must be > 0, got {}", self.noise_std)));
        }
        if !self.rotation_deg.is_finite() || self.positive_mode_shift.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidConfig(String::from("shift parameters must be finite")));
        }
        if self.positive_mode_shift.len() != 2 {
            return Err(Error::InvalidConfig(format!(
                "positive_mode_shift must have 2 components, got {}",
                self.positive_mode_shift.len()
            )));
        }
        if !(self.positive_fraction_target > 0.0 && self.positive_fraction_target <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "positive_fraction_target must lie in (0, 1], got {}",
                self.positive_fraction_target
            )));
        }
        if self.n_source < 2 || self.n_target < 5 {
            return Err(Error::InvalidConfig(format!(
                "need n_source >= 2 and n_target >= 5, got {} and {}",
                self.n_source, self.n_target
            )));
        }
        Ok(())
    }
}

/// Per-class sample counts `(negatives, positives)` with `⌊n·fraction⌋` positives.
pub fn class_counts(n: usize, positive_fraction: f64) -> (usize, usize) {
    let pos = libm::floor(n as f64 * positive_fraction) as usize;
    (n - pos, pos)
}

/// Number of samples of a class that go to validation.
pub fn validation_count(class_size: usize) -> usize {
    libm::floor(class_size as f64 * VALIDATION_FRACTION + 0.5) as usize
}

struct Geometry {
    rotation_center: [f64; 2],
}

fn moon_point<R: Rng + ?Sized>(class: usize, rng: &mut R) -> [f64; 2] {
    let t = rng.random_range(0.0..core::f64::consts::PI);
    let (c, s) = (libm::cos(t), libm::sin(t));
    if class == POSITIVE_CLASS {
        [1.0 - c, 0.5 - s]
    } else {
        [c, s]
    }
}

fn blob_point(class: usize) -> [f64; 2] {
    if class == POSITIVE_CLASS {
        [2.0, 0.0]
    } else {
        [-2.0, 0.0]
    }
}

fn rotate(p: [f64; 2], center: [f64; 2], deg: f64) -> [f64; 2] {
    let (s, c) = libm::sincos(deg.to_radians());
    let (x, y) = (p[0] - center[0], p[1] - center[1]);
    [c * x - s * y + center[0], s * x + c * y + center[1]]
}

fn draw_domain<R: Rng + ?Sized>(
    kind: GeneratorKind,
    geometry: &Geometry,
    counts: (usize, usize),
    shift: Option<&ShiftSpec>,
    noise: &Normal<f64>,
    rng: &mut R,
) -> Vec<([f64; 2], usize)> {
    let mut out = Vec::with_capacity(counts.0 + counts.1);
    for (class, count) in [(0usize, counts.0), (POSITIVE_CLASS, counts.1)] {
        for _ in 0..count {
            let base = match kind {
                GeneratorKind::Moons => moon_point(class, rng),
                GeneratorKind::Blobs => blob_point(class),
            };
            let mut p = [base[0] + noise.sample(rng), base[1] + noise.sample(rng)];
            if let Some(spec) = shift {
                p = rotate(p, geometry.rotation_center, spec.rotation_deg);
                if class == POSITIVE_CLASS {
                    p[0] += spec.positive_mode_shift[0];
                    p[1] += spec.positive_mode_shift[1];
                }
            }
            out.push((p, class));
        }
    }
    out.shuffle(rng);
    out
}

fn to_split(points: &[([f64; 2], usize)], labelled: bool) -> Result<Split> {
    let data = points.iter().flat_map(|(p, _)| *p).collect();
    Ok(Split {
        features: Tensor::matrix(points.len(), 2, data)?,
        labels: labelled.then(|| points.iter().map(|&(_, y)| y).collect()),
    })
}

/// Moves a stratified [`VALIDATION_FRACTION`] of `points` into a validation
/// split, keeping the remaining order.
fn stratified_split(points: Vec<([f64; 2], usize)>, seed: u64) -> Result<(Split, Split)> {
    let mut r = rng::stream(seed, Stream::Split);
    let mut held = alloc::vec![false; points.len()];
    for class in 0..NUM_CLASSES {
        let mut members: Vec<usize> = (0..points.len()).filter(|&i| points[i].1 == class).collect();
        members.shuffle(&mut r);
        for &i in members.iter().take(validation_count(members.len())) {
            held[i] = true;
        }
    }
    let (val, train): (Vec<_>, Vec<_>) = points.into_iter().zip(held).partition(|(_, h)| *h);
    let val: Vec<_> = val.into_iter().map(|(p, _)| p).collect();
    let train: Vec<_> = train.into_iter().map(|(p, _)| p).collect();
    if val.is_empty() || train.is_empty() {
        return Err(Error::InvalidConfig(String::from("target domain too small to split")));
    }
    Ok((to_split(&train, false)?, to_split(&val, true)?))
}

fn generate(kind: GeneratorKind, spec: &ShiftSpec, seed: u64) -> Result<DomainDataset> {
    spec.validate()?;
    let geometry = Geometry {
        rotation_center: match kind {
            GeneratorKind::Moons => [0.5, 0.25],
            GeneratorKind::Blobs => [0.0, 0.0],
        },
    };
    let noise = Normal::new(0.0, spec.noise_std).map_err(|e| Error::InvalidConfig(format!("{e}")))?;
    let mut r = rng::stream(seed, Stream::Data);
    let source = draw_domain(kind, &geometry, class_counts(spec.n_source, 0.5), None, &noise, &mut r);
    let target = draw_domain(
        kind,
        &geometry,
        class_counts(spec.n_target, spec.positive_fraction_target),
        Some(spec),
        &noise,
        &mut r,
    );
    let (target_train, target_validation) = stratified_split(target, seed)?;
    Ok(DomainDataset {
        source: to_split(&source, true)?,
        target_train,
        target_validation,
        metadata: Provenance::Generated {
            generator: kind,
            spec: spec.clone(),
            seed,
        },
    })
}

/// Two-moons source; the target is rotated and its positive moon displaced.
pub fn generate_task_shift_moons(spec: &ShiftSpec, seed: u64) -> Result<DomainDataset> {
    generate(GeneratorKind::Moons, spec, seed)
}

/// Isotropic Gaussian classes at `(±2, 0)`; the target applies the same shift.
pub fn generate_gaussian_blobs(spec: &ShiftSpec, seed: u64) -> Result<DomainDataset> {
    generate(GeneratorKind::Blobs, spec, seed)
}

pub fn generate_kind(kind: GeneratorKind, spec: &ShiftSpec, seed: u64) -> Result<DomainDataset> {
    generate(kind, spec, seed)
}
