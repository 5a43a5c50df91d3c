//! Deterministic synthetic cross-modal datasets with controllable
//! one-to-many ambiguity, plus the feature-corruption transform.
//!
//! Each class gets one random unit prototype per modality and a distinct
//! binary attribute vector. Item features are the prototype plus Gaussian
//! noise; a configurable fraction of modality-B items is instead blended
//! 50/50 between the class prototype and another class's prototype (and
//! flagged), so inputs become genuinely ambiguous while ground-truth matches
//! stay clean. The ground-truth match relation is class equality across
//! modalities.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use rand::seq::index;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::embedding::Modality;
use crate::error::{Error, Result};
use crate::streams::keyed_rng;
use crate::vecmath::norm;

/// Parameters controlling synthetic dataset generation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetConfig {
    pub num_classes: usize,
    pub items_per_class_per_modality: usize,
    pub feature_dim: usize,
    /// Length of the per-class binary attribute vectors.
    pub attribute_dim: usize,
    pub noise_sigma: f64,
    /// Fraction of modality-B items per class blended between two class
    /// prototypes.
    pub ambiguity_fraction: f64,
    pub seed: u64,
}

impl DatasetConfig {
    fn validate(&self) -> Result<()> {
        if self.num_classes == 0 || self.items_per_class_per_modality == 0 {
            return Err(Error::InvalidArgument(
                "num_classes and items_per_class_per_modality must be positive".into(),
            ));
        }
        if self.feature_dim == 0 || self.attribute_dim == 0 {
            return Err(Error::InvalidArgument(
                "feature_dim and attribute_dim must be positive".into(),
            ));
        }
        if !(self.noise_sigma.is_finite() && self.noise_sigma >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "noise_sigma must be a nonnegative real, got {}",
                self.noise_sigma
            )));
        }
        if !(0.0..=1.0).contains(&self.ambiguity_fraction) {
            return Err(Error::InvalidArgument(format!(
                "ambiguity_fraction must be in [0, 1], got {}",
                self.ambiguity_fraction
            )));
        }
        let needed_bits = if self.num_classes <= 1 {
            0
        } else {
            (self.num_classes - 1).ilog2() as usize + 1
        };
        if self.attribute_dim < needed_bits {
            return Err(Error::InvalidArgument(format!(
                "attribute_dim = {} cannot distinguish {} classes (need at least {needed_bits})",
                self.attribute_dim, self.num_classes
            )));
        }
        if self.ambiguity_fraction > 0.0 && self.num_classes < 2 {
            return Err(Error::InvalidArgument(
                "ambiguity requires at least two classes to blend between".into(),
            ));
        }
        Ok(())
    }
}

/// One dataset item.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Item {
    pub id: String,
    pub modality: Modality,
    pub features: Vec<f64>,
    pub class_id: usize,
    /// Binary attribute vector shared by every item of the class.
    pub attributes: Vec<u8>,
    pub ambiguous: bool,
}

/// Items in two modalities with a class-derived match relation.
#[derive(Debug, Clone, PartialEq)]
pub struct CrossModalDataset {
    items: Vec<Item>,
    by_id: BTreeMap<String, usize>,
}

impl CrossModalDataset {
    /// Wrap items, validating id uniqueness and uniform feature/attribute
    /// dimensions.
    pub fn from_items(items: Vec<Item>) -> Result<Self> {
        if items.is_empty() {
            return Err(Error::InvalidArgument("dataset has no items".into()));
        }
        let feature_dim = items[0].features.len();
        let attribute_dim = items[0].attributes.len();
        let mut by_id = BTreeMap::new();
        for (idx, item) in items.iter().enumerate() {
            if item.features.len() != feature_dim {
                return Err(Error::DimensionMismatch(format!(
                    "item {:?} has {} features, expected {feature_dim}",
                    item.id,
                    item.features.len()
                )));
            }
            if item.attributes.len() != attribute_dim {
                return Err(Error::DimensionMismatch(format!(
                    "item {:?} has {} attributes, expected {attribute_dim}",
                    item.id,
                    item.attributes.len()
                )));
            }
            if !item.attributes.iter().all(|&b| b <= 1) {
                return Err(Error::InvalidArgument(format!(
                    "item {:?} has non-binary attribute entries",
                    item.id
                )));
            }
            if by_id.insert(item.id.clone(), idx).is_some() {
                return Err(Error::InvalidArgument(format!(
                    "duplicate item id {:?}",
                    item.id
                )));
            }
        }
        Ok(Self { items, by_id })
    }

    pub fn items(&self) -> &[Item] {
        &self.items
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn feature_dim(&self) -> usize {
        self.items[0].features.len()
    }

    pub fn get(&self, id: &str) -> Option<&Item> {
        self.by_id.get(id).map(|&i| &self.items[i])
    }

    pub fn modality_items(&self, modality: Modality) -> Vec<&Item> {
        self.items
            .iter()
            .filter(|i| i.modality == modality)
            .collect()
    }

    /// Ground-truth match relation tau: same class, opposite modality.
    pub fn is_match(&self, x: &Item, y: &Item) -> bool {
        x.modality != y.modality && x.class_id == y.class_id
    }

    /// tau(q): all cross-modal ground-truth matches of the item.
    pub fn matches_of(&self, id: &str) -> Result<Vec<&Item>> {
        let item = self
            .get(id)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown item id {id:?}")))?;
        Ok(self
            .items
            .iter()
            .filter(|other| self.is_match(item, other))
            .collect())
    }
}

fn random_unit_vector(rng: &mut impl Rng, dim: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        let n = norm(&v);
        if n > 1e-6 {
            return v.iter().map(|x| x / n).collect();
        }
    }
}

/// Generate a dataset. Fully deterministic given the config seed (per-class
/// and per-item streams are keyed, so generation order never matters).
pub fn generate(config: &DatasetConfig) -> Result<CrossModalDataset> {
    config.validate()?;

    // distinct per-class attribute vectors, resampled on collision
    let mut attr_rng = keyed_rng(config.seed, &[b"attributes"]);
    let mut attributes: Vec<Vec<u8>> = Vec::with_capacity(config.num_classes);
    for class in 0..config.num_classes {
        let mut accepted = None;
        for _ in 0..1000 {
            let candidate: Vec<u8> = (0..config.attribute_dim)
                .map(|_| u8::from(attr_rng.random::<bool>()))
                .collect();
            if !attributes.contains(&candidate) {
                accepted = Some(candidate);
                break;
            }
        }
        match accepted {
            Some(a) => attributes.push(a),
            None => {
                return Err(Error::InvalidArgument(format!(
                    "could not draw a distinct attribute vector for class {class} \
                     after 1000 attempts"
                )))
            }
        }
    }

    let prototypes: Vec<[Vec<f64>; 2]> = (0..config.num_classes)
        .map(|class| {
            let make = |modality: Modality| {
                let mut rng = keyed_rng(
                    config.seed,
                    &[
                        b"prototype",
                        modality.as_str().as_bytes(),
                        &(class as u64).to_le_bytes(),
                    ],
                );
                random_unit_vector(&mut rng, config.feature_dim)
            };
            [make(Modality::A), make(Modality::B)]
        })
        .collect();

    // which modality-B items of each class are blended
    let per_class = config.items_per_class_per_modality;
    let num_ambiguous = (config.ambiguity_fraction * per_class as f64).floor() as usize;
    let mut items = Vec::with_capacity(config.num_classes * per_class * 2);
    for class in 0..config.num_classes {
        let mut ambiguous_idx = vec![false; per_class];
        let mut partner = vec![0usize; per_class];
        if num_ambiguous > 0 {
            let mut rng = keyed_rng(config.seed, &[b"ambiguity", &(class as u64).to_le_bytes()]);
            for i in index::sample(&mut rng, per_class, num_ambiguous) {
                ambiguous_idx[i] = true;
                // blend partner: any other class
                let mut p = rng.random_range(0..config.num_classes - 1);
                if p >= class {
                    p += 1;
                }
                partner[i] = p;
            }
        }
        for modality in [Modality::A, Modality::B] {
            for idx in 0..per_class {
                let id = format!("{}-c{class}-i{idx}", modality.as_str());
                let ambiguous = modality == Modality::B && ambiguous_idx[idx];
                let base: Vec<f64> = if ambiguous {
                    let own = &prototypes[class][1];
                    let other = &prototypes[partner[idx]][1];
                    own.iter().zip(other).map(|(x, y)| 0.5 * (x + y)).collect()
                } else {
                    prototypes[class][modality as usize].clone()
                };
                let mut noise_rng = keyed_rng(config.seed, &[b"noise", id.as_bytes()]);
                let features: Vec<f64> = base
                    .iter()
                    .map(|&x| {
                        let eps: f64 = noise_rng.sample(StandardNormal);
                        x + config.noise_sigma * eps
                    })
                    .collect();
                items.push(Item {
                    id,
                    modality,
                    features,
                    class_id: class,
                    attributes: attributes[class].clone(),
                    ambiguous,
                });
            }
        }
    }
    CrossModalDataset::from_items(items)
}

/// Zero out `floor(erase_ratio * dim)` coordinates chosen uniformly without
/// replacement from the stream keyed by `seed`. Deterministic; the erased
/// coordinate set depends only on `(ratio, dim, seed)`.
pub fn corrupt(features: &[f64], erase_ratio: f64, seed: u64) -> Result<Vec<f64>> {
    if !(0.0..=1.0).contains(&erase_ratio) {
        return Err(Error::InvalidArgument(format!(
            "erase_ratio must be in [0, 1], got {erase_ratio}"
        )));
    }
    let dim = features.len();
    let k = (erase_ratio * dim as f64).floor() as usize;
    let mut out = features.to_vec();
    if k > 0 {
        let mut rng = keyed_rng(seed, &[b"corrupt"]);
        for i in index::sample(&mut rng, dim, k) {
            out[i] = 0.0;
        }
    }
    Ok(out)
}

/// Plausible-match criterion: the binary attribute vectors differ at no more
/// than `zeta` positions (Hamming distance).
pub fn plausible_match(y_a: &[u8], y_b: &[u8], zeta: usize) -> Result<bool> {
    if y_a.len() != y_b.len() {
        return Err(Error::DimensionMismatch(format!(
            "attribute vectors differ in length: {} vs {}",
            y_a.len(),
            y_b.len()
        )));
    }
    let hamming = y_a.iter().zip(y_b).filter(|(a, b)| a != b).count();
    Ok(hamming <= zeta)
}
