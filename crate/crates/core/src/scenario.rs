//! Synthetic pools: a Gaussian base generator plus the corruption models used
//! to probe robustness (minority clusters, white noise, label noise, domain
//! shift).
//!
//! Generation runs in two stages with separate random streams. The base
//! stage draws class means and clean points; the corruption stage picks an
//! exact number of pool points and perturbs them. Two specs that differ only
//! in their corruption settings therefore share the same clean points.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dataset::{FeatureDataset, SplitAssignment};
use crate::error::{ensure, Error, Result};
use crate::points::FeatureMatrix;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScenarioKind {
    Identity,
    GaussianMixtureMinority,
    LabelNoise,
    WhiteNoiseBeta,
    DomainShiftMix,
}

impl std::str::FromStr for ScenarioKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "identity" => ScenarioKind::Identity,
            "gaussian-mixture-minority" => ScenarioKind::GaussianMixtureMinority,
            "label-noise" => ScenarioKind::LabelNoise,
            "white-noise-beta" => ScenarioKind::WhiteNoiseBeta,
            "domain-shift-mix" => ScenarioKind::DomainShiftMix,
            other => return Err(Error::Validation(format!("unknown scenario kind `{other}`"))),
        })
    }
}

/// Knobs for every scenario kind. Fields irrelevant to a kind are ignored.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioParams {
    /// Defaults to 2 for the minority scenario and 10 otherwise.
    pub num_classes: Option<u32>,
    pub dims: usize,
    /// Gaussian modes per class.
    pub modes_per_class: usize,
    /// Distance of every mode mean from the origin. Modes are mutually
    /// orthogonal when they do not outnumber the dimensions, so two modes are
    /// then `class_separation * sqrt(2)` apart.
    pub class_separation: f64,
    /// Per-coordinate standard deviation of points around their mode.
    pub cluster_std: f64,
    /// Share of class 0 drawn from the minority component.
    pub minority_weight: f64,
    /// Minority mean is `mean0 + minority_shift * (mean1 - mean0)`; values
    /// above 0.5 place it across the class 0 / class 1 boundary.
    pub minority_shift: f64,
    /// Minority spread as a multiple of `cluster_std`.
    pub minority_spread: f64,
    /// When false the minority appears only in the labeled and unlabeled
    /// splits, so validation and test follow the clean class-0 distribution.
    pub minority_in_evaluation: bool,
    /// Share of the pool hit by white noise or label noise.
    pub corruption_fraction: f64,
    pub beta_a: f64,
    pub beta_b: f64,
    /// Noise amplitude is `Beta(a, b) * max_power`, applied as the standard
    /// deviation of isotropic Gaussian noise.
    pub max_power: f64,
    /// Share of the pool drawn from the shifted domain.
    pub mix_ratio: f64,
    /// Length of the offset applied to shifted-domain points.
    pub shift_magnitude: f64,
}

impl Default for ScenarioParams {
    fn default() -> Self {
        Self {
            num_classes: None,
            dims: 16,
            modes_per_class: 1,
            class_separation: 3.0,
            cluster_std: 1.0,
            minority_weight: 0.1,
            minority_shift: 1.0,
            minority_spread: 1.0,
            minority_in_evaluation: true,
            corruption_fraction: 0.8,
            beta_a: 1.0,
            beta_b: 3.0,
            max_power: 1.0,
            mix_ratio: 0.5,
            shift_magnitude: 4.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub kind: ScenarioKind,
    #[serde(default)]
    pub params: ScenarioParams,
    pub seed: u64,
}

impl ScenarioSpec {
    pub fn new(kind: ScenarioKind, seed: u64) -> Self {
        Self { kind, params: ScenarioParams::default(), seed }
    }

    pub fn num_classes(&self) -> u32 {
        self.params.num_classes.unwrap_or(match self.kind {
            ScenarioKind::GaussianMixtureMinority => 2,
            _ => 10,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let p = &self.params;
        let unit = |name: &str, v: f64| -> Result<()> {
            ensure!((0.0..=1.0).contains(&v), Validation, "{name} must lie in [0, 1], got {v}");
            Ok(())
        };
        ensure!(self.num_classes() >= 2, Validation, "need at least two classes");
        ensure!(p.dims >= 1, Validation, "dims must be positive");
        ensure!(p.modes_per_class >= 1, Validation, "modes_per_class must be positive");
        ensure!(
            p.cluster_std >= 0.0 && p.cluster_std.is_finite(),
            Validation,
            "cluster_std must be finite and non-negative"
        );
        ensure!(p.class_separation.is_finite(), Validation, "class_separation must be finite");
        unit("minority_weight", p.minority_weight)?;
        unit("corruption_fraction", p.corruption_fraction)?;
        unit("mix_ratio", p.mix_ratio)?;
        ensure!(p.beta_a > 0.0 && p.beta_b > 0.0, Validation, "Beta shape parameters must be positive");
        ensure!(p.max_power >= 0.0 && p.max_power.is_finite(), Validation, "max_power must be finite and non-negative");
        ensure!(p.minority_spread > 0.0, Validation, "minority_spread must be positive");
        ensure!(p.minority_shift.is_finite() && p.shift_magnitude.is_finite(), Validation, "shifts must be finite");
        Ok(())
    }
}

/// Point counts per split. Ids are assigned consecutively in the order
/// labeled, unlabeled, validation, test.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitSizes {
    pub labeled: usize,
    pub unlabeled: usize,
    pub validation: usize,
    pub test: usize,
}

impl SplitSizes {
    pub fn new(labeled: usize, unlabeled: usize, validation: usize, test: usize) -> Self {
        Self { labeled, unlabeled, validation, test }
    }

    pub fn total(&self) -> usize {
        self.labeled + self.unlabeled + self.validation + self.test
    }

    fn as_array(&self) -> [usize; 4] {
        [self.labeled, self.unlabeled, self.validation, self.test]
    }
}

impl std::str::FromStr for SplitSizes {
    type Err = Error;

    /// Parses `labeled,unlabeled,validation,test`.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<usize> = s
            .split(',')
            .map(|p| p.trim().parse::<usize>())
            .collect::<Result<_, _>>()
            .map_err(|e| Error::Validation(format!("bad split sizes `{s}`: {e}")))?;
        ensure!(parts.len() == 4, Validation, "expected four comma-separated sizes, got `{s}`");
        Ok(Self::new(parts[0], parts[1], parts[2], parts[3]))
    }
}

/// What happened to each point during generation.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ScenarioRecord {
    /// Points drawn from the class-0 minority component.
    pub minority: BTreeSet<u64>,
    /// White-noise amplitude per corrupted point.
    pub noise_amplitude: BTreeMap<u64, f64>,
    pub shifted: BTreeSet<u64>,
    /// Pool points whose label was redrawn (possibly to the same value).
    pub relabeled: BTreeSet<u64>,
}

#[derive(Clone, Debug)]
pub struct GeneratedScenario {
    pub dataset: FeatureDataset,
    pub splits: SplitAssignment,
    pub record: ScenarioRecord,
}

#[derive(Clone, Copy)]
enum Component {
    Majority,
    Minority,
}

/// Builds a dataset and split assignment from a scenario description.
/// Output is a pure function of `(spec, sizes)`.
pub fn generate_scenario(spec: &ScenarioSpec, sizes: SplitSizes) -> Result<GeneratedScenario> {
    spec.validate()?;
    ensure!(sizes.as_array().iter().all(|&n| n > 0), Validation, "every split size must be positive, got {sizes:?}");
    let p = &spec.params;
    let classes = spec.num_classes() as usize;
    let dims = p.dims;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let means = mode_means(&mut rng, classes * p.modes_per_class, dims, p.class_separation);
    let mode_mean = |class: usize, mode: usize| &means[class * p.modes_per_class + mode];
    let minority_mean: Vec<f64> =
        mode_mean(0, 0).iter().zip(mode_mean(1, 0)).map(|(a, b)| a + p.minority_shift * (b - a)).collect();
    let with_minority = spec.kind == ScenarioKind::GaussianMixtureMinority;

    let mut data: Vec<f64> = Vec::with_capacity(sizes.total() * dims);
    let mut labels = Vec::with_capacity(sizes.total());
    let mut record = ScenarioRecord::default();
    let mut split_ids: [Vec<u64>; 4] = Default::default();
    let mut next_id = 0u64;

    for (split, &count) in sizes.as_array().iter().enumerate() {
        let mut slots: Vec<(u32, Component)> = Vec::with_capacity(count);
        for class in 0..classes {
            let n_class = count / classes + usize::from(class < count % classes);
            let evaluation = split >= 2;
            let n_minority = if with_minority && class == 0 && (p.minority_in_evaluation || !evaluation) {
                (p.minority_weight * n_class as f64).round() as usize
            } else {
                0
            };
            for i in 0..n_class {
                let comp = if i < n_minority { Component::Minority } else { Component::Majority };
                slots.push((class as u32, comp));
            }
        }
        slots.shuffle(&mut rng);
        for (class, comp) in slots {
            let (mean, std) = match comp {
                Component::Minority => (&minority_mean, p.cluster_std * p.minority_spread),
                Component::Majority => {
                    let mode = rng.random_range(0..p.modes_per_class);
                    (mode_mean(class as usize, mode), p.cluster_std)
                }
            };
            for m in mean {
                let z: f64 = rng.sample(StandardNormal);
                data.push(m + std * z);
            }
            if matches!(comp, Component::Minority) {
                record.minority.insert(next_id);
            }
            labels.push(class);
            split_ids[split].push(next_id);
            next_id += 1;
        }
    }

    let pool_start = sizes.labeled;
    let pool_len = sizes.unlabeled;
    let mut corrupt_rng = ChaCha8Rng::seed_from_u64(spec.seed);
    corrupt_rng.set_stream(1);
    let exact = |fraction: f64| (fraction * pool_len as f64).round() as usize;
    let pick = |rng: &mut ChaCha8Rng, count: usize| -> Vec<usize> {
        let mut chosen = index::sample(rng, pool_len, count.min(pool_len)).into_vec();
        chosen.sort_unstable();
        chosen.into_iter().map(|i| pool_start + i).collect()
    };

    match spec.kind {
        ScenarioKind::Identity | ScenarioKind::GaussianMixtureMinority => {}
        ScenarioKind::WhiteNoiseBeta => {
            let beta = Beta::new(p.beta_a, p.beta_b)
                .map_err(|e| Error::Validation(format!("invalid Beta parameters: {e}")))?;
            for row in pick(&mut corrupt_rng, exact(p.corruption_fraction)) {
                let amplitude = beta.sample(&mut corrupt_rng) * p.max_power;
                for v in &mut data[row * dims..(row + 1) * dims] {
                    let z: f64 = corrupt_rng.sample(StandardNormal);
                    *v += amplitude * z;
                }
                record.noise_amplitude.insert(row as u64, amplitude);
            }
        }
        ScenarioKind::LabelNoise => {
            for row in pick(&mut corrupt_rng, exact(p.corruption_fraction)) {
                labels[row] = corrupt_rng.random_range(0..classes as u32);
                record.relabeled.insert(row as u64);
            }
        }
        ScenarioKind::DomainShiftMix => {
            let mut offset = gaussian_vec(&mut corrupt_rng, dims, 1.0);
            let norm = offset.iter().map(|v| v * v).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
            offset.iter_mut().for_each(|v| *v *= p.shift_magnitude / norm);
            for row in pick(&mut corrupt_rng, exact(p.mix_ratio)) {
                for (v, o) in data[row * dims..(row + 1) * dims].iter_mut().zip(&offset) {
                    *v += o;
                }
                record.shifted.insert(row as u64);
            }
        }
    }

    let features = FeatureMatrix::new(dims, data.into_iter().map(|v| v as f32).collect())?;
    ensure!(features.all_finite(), Numeric, "generated features overflowed f32");
    let dataset = FeatureDataset::new(features, labels, classes as u32, (0..next_id).collect())?;
    let [labeled, unlabeled, validation, test] = split_ids;
    let splits = SplitAssignment {
        labeled: labeled.into_iter().collect(),
        unlabeled: unlabeled.into_iter().collect(),
        validation: validation.into_iter().collect(),
        test: test.into_iter().collect(),
    };
    Ok(GeneratedScenario { dataset, splits, record })
}

/// Mode means at distance `radius` from the origin in random directions,
/// mutually orthogonal whenever there are no more modes than dimensions.
fn mode_means(rng: &mut ChaCha8Rng, count: usize, dims: usize, radius: f64) -> Vec<Vec<f64>> {
    let mut means: Vec<Vec<f64>> = Vec::with_capacity(count);
    for i in 0..count {
        let mut v = gaussian_vec(rng, dims, 1.0);
        if i < dims {
            for m in &means {
                let proj: f64 = v.iter().zip(m).map(|(a, b)| a * b).sum::<f64>() / (radius * radius);
                v.iter_mut().zip(m).for_each(|(a, b)| *a -= proj * b);
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
        v.iter_mut().for_each(|x| *x *= radius / norm);
        means.push(v);
    }
    means
}

fn gaussian_vec(rng: &mut ChaCha8Rng, dims: usize, scale: f64) -> Vec<f64> {
    (0..dims).map(|_| scale * rng.sample::<f64, _>(StandardNormal)).collect()
}
