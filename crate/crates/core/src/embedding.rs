//! Deterministic stand-in for an aligned text/vision embedding space.
//!
//! Text tags map to unit vectors seeded by a stable hash of the canonical
//! tag. Tags that share a synonym group are small rotations of a common base
//! vector, so they score high against each other while unrelated tags are
//! nearly orthogonal. Visual features are noisy rotations of the text
//! feature of the object that produced them.

use std::collections::HashMap;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const DEFAULT_DIMENSION: usize = 64;

/// Replacement tags used when simulating mislabeled landmarks.
pub const DEFAULT_DECOYS: [&str; 32] = [
    "fountain",
    "windmill",
    "lighthouse",
    "aquarium",
    "carousel",
    "greenhouse",
    "observatory",
    "pagoda",
    "totem pole",
    "igloo",
    "ferris wheel",
    "drawbridge",
    "pyramid",
    "cactus",
    "anchor",
    "telescope",
    "obelisk",
    "waterfall",
    "scarecrow",
    "gazebo",
    "sundial",
    "chimney",
    "beehive",
    "harp",
    "volcano",
    "canoe",
    "trampoline",
    "hot air balloon",
    "castle",
    "tractor",
    "yurt",
    "igloo tent",
];

/// Unit-norm embedding vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector<T> {
    values: Vec<T>,
}

impl<T: Scalar> FeatureVector<T> {
    /// Normalizes `values`. Returns `None` for a zero or non-finite vector.
    pub fn normalized(values: Vec<T>) -> Option<Self> {
        let n = norm(&values);
        if !(n.is_finite() && n > T::zero()) {
            return None;
        }
        Some(Self {
            values: values.into_iter().map(|v| v / n).collect(),
        })
    }

    /// Wraps values that are already unit norm.
    pub fn from_unit(values: Vec<T>) -> Result<Self> {
        let n = norm(&values);
        if (n - T::one()).abs() > T::unit_tol() {
            return Err(Error::InvalidArgument(format!(
                "feature vector norm {n} is not 1"
            )));
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn norm(&self) -> T {
        norm(&self.values)
    }

    pub fn dot(&self, other: &Self) -> T {
        debug_assert_eq!(self.dim(), other.dim());
        self.values
            .iter()
            .zip(&other.values)
            .fold(T::zero(), |acc, (&a, &b)| acc + a * b)
    }

    pub fn cast<U: Scalar>(&self) -> FeatureVector<U> {
        FeatureVector::normalized(
            self.values
                .iter()
                .map(|v| U::c(v.to_f64_lossy()))
                .collect(),
        )
        .expect("unit vector stays non-zero under cast")
    }
}

fn norm<T: Scalar>(values: &[T]) -> T {
    values
        .iter()
        .fold(T::zero(), |acc, &v| acc + v * v)
        .sqrt()
}

/// Similarity in `[0, 1]`: the dot product of two unit vectors with negative
/// values clamped to zero.
///
/// Both inputs must be unit norm; this is checked with `debug_assert!`.
#[inline]
pub fn cosine_sim<T: Scalar>(a: &FeatureVector<T>, b: &FeatureVector<T>) -> T {
    debug_assert!(
        (a.norm() - T::one()).abs() <= T::unit_tol() * T::c(16.0),
        "cosine_sim: left operand is not unit norm"
    );
    debug_assert!(
        (b.norm() - T::one()).abs() <= T::unit_tol() * T::c(16.0),
        "cosine_sim: right operand is not unit norm"
    );
    a.dot(b).max(T::zero()).min(T::one())
}

/// Lowercase, trim and collapse internal whitespace.
pub fn canonicalize_tag(tag: &str) -> String {
    tag.split_whitespace()
        .map(str::to_lowercase)
        .collect::<Vec<_>>()
        .join(" ")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynonymGroup {
    pub tags: Vec<String>,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
struct VocabularyFile {
    #[serde(default = "default_dimension")]
    dimension: usize,
    #[serde(default)]
    perturbation: f64,
    #[serde(default)]
    groups: Vec<SynonymGroup>,
    #[serde(default)]
    decoys: Vec<String>,
}

fn default_dimension() -> usize {
    DEFAULT_DIMENSION
}

/// Synonym structure of the embedding space plus the decoy word list.
#[derive(Debug, Clone)]
pub struct Vocabulary {
    dimension: usize,
    perturbation: f64,
    groups: Vec<SynonymGroup>,
    decoys: Vec<String>,
    group_of: HashMap<String, usize>,
}

impl Default for Vocabulary {
    fn default() -> Self {
        Self::new(DEFAULT_DIMENSION, 0.0, Vec::new(), default_decoys())
            .expect("default vocabulary is valid")
    }
}

fn default_decoys() -> Vec<String> {
    DEFAULT_DECOYS.iter().map(|s| s.to_string()).collect()
}

impl Vocabulary {
    pub fn new(
        dimension: usize,
        perturbation: f64,
        groups: Vec<SynonymGroup>,
        decoys: Vec<String>,
    ) -> Result<Self> {
        if dimension < 2 {
            return Err(Error::InvalidArgument(format!(
                "embedding dimension must be at least 2, got {dimension}"
            )));
        }
        if !(perturbation >= 0.0 && perturbation.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "perturbation angle must be >= 0, got {perturbation}"
            )));
        }
        let mut group_of = HashMap::new();
        let mut canon_groups = Vec::with_capacity(groups.len());
        for (gi, group) in groups.into_iter().enumerate() {
            let mut tags = Vec::with_capacity(group.tags.len());
            for tag in group.tags {
                let canon = canonicalize_tag(&tag);
                if canon.is_empty() {
                    return Err(Error::EmptyTag);
                }
                match group_of.insert(canon.clone(), gi) {
                    Some(prev) if prev != gi => return Err(Error::TagInMultipleGroups(canon)),
                    Some(_) => continue,
                    None => tags.push(canon),
                }
            }
            if tags.is_empty() {
                return Err(Error::InvalidArgument(format!("synonym group {gi} is empty")));
            }
            canon_groups.push(SynonymGroup { tags });
        }
        let decoys: Vec<String> = decoys.iter().map(|d| canonicalize_tag(d)).collect();
        if let Some(d) = decoys.iter().find(|d| group_of.contains_key(*d)) {
            return Err(Error::InvalidArgument(format!(
                "decoy {d:?} also appears in a synonym group"
            )));
        }
        Ok(Self {
            dimension,
            perturbation,
            groups: canon_groups,
            decoys,
            group_of,
        })
    }

    pub fn from_toml_str(text: &str, location: &str) -> Result<Self> {
        let file: VocabularyFile = toml::from_str(text).map_err(|e| Error::Parse {
            location: location.to_string(),
            message: e.to_string(),
        })?;
        let decoys = if file.decoys.is_empty() {
            default_decoys()
        } else {
            file.decoys
        };
        Self::new(file.dimension, file.perturbation, file.groups, decoys)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml_str(&text, &path.display().to_string())
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn perturbation(&self) -> f64 {
        self.perturbation
    }

    pub fn groups(&self) -> &[SynonymGroup] {
        &self.groups
    }

    pub fn decoys(&self) -> &[String] {
        &self.decoys
    }

    pub fn group_of(&self, tag: &str) -> Option<usize> {
        self.group_of.get(&canonicalize_tag(tag)).copied()
    }
}

/// 64-bit FNV-1a.
pub fn stable_hash(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

fn hashed_rng(domain: &str, key: &str) -> ChaCha8Rng {
    let mut bytes = Vec::with_capacity(domain.len() + key.len() + 1);
    bytes.extend_from_slice(domain.as_bytes());
    bytes.push(0);
    bytes.extend_from_slice(key.as_bytes());
    ChaCha8Rng::seed_from_u64(stable_hash(&bytes))
}

fn gaussian_unit<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
        let n = norm(&v);
        if n > 1e-12 {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}

/// Unit vector orthogonal to unit `base`, drawn from `rng`.
fn tangent_direction<R: Rng + ?Sized>(rng: &mut R, base: &[f64]) -> Vec<f64> {
    loop {
        let mut u = gaussian_unit(rng, base.len());
        let proj: f64 = u.iter().zip(base).map(|(a, b)| a * b).sum();
        for (ui, bi) in u.iter_mut().zip(base) {
            *ui -= proj * bi;
        }
        let n = norm(&u);
        if n > 1e-6 {
            return u.into_iter().map(|x| x / n).collect();
        }
    }
}

/// `cos(angle) * base + sin(angle) * dir` for orthonormal `base`, `dir`.
fn rotate_towards(base: &[f64], dir: &[f64], angle: f64) -> Vec<f64> {
    let (s, c) = angle.sin_cos();
    base.iter().zip(dir).map(|(b, d)| c * b + s * d).collect()
}

fn to_feature<T: Scalar>(values: Vec<f64>) -> FeatureVector<T> {
    FeatureVector::normalized(values.into_iter().map(T::c).collect())
        .expect("construction yields a non-zero vector")
}

fn embed_text_f64(canon: &str, vocab: &Vocabulary) -> Vec<f64> {
    let dim = vocab.dimension;
    match vocab.group_of.get(canon) {
        Some(&gi) => {
            let anchor = &vocab.groups[gi].tags[0];
            let base = gaussian_unit(&mut hashed_rng("group", anchor), dim);
            let mut rng = hashed_rng("member", canon);
            let angle = vocab.perturbation * rng.random::<f64>();
            let dir = tangent_direction(&mut rng, &base);
            rotate_towards(&base, &dir, angle)
        }
        None => gaussian_unit(&mut hashed_rng("tag", canon), dim),
    }
}

/// Text feature of a tag. Pure in `(tag, vocab)`.
pub fn embed_text<T: Scalar>(tag: &str, vocab: &Vocabulary) -> Result<FeatureVector<T>> {
    let canon = canonicalize_tag(tag);
    if canon.is_empty() {
        return Err(Error::EmptyTag);
    }
    Ok(to_feature(embed_text_f64(&canon, vocab)))
}

/// Simulated visual feature of an object whose true tag is `true_tag`: its
/// text feature rotated by `|N(0, angular_noise_std)|` radians towards a
/// random tangent direction.
pub fn embed_visual<T: Scalar, R: Rng + ?Sized>(
    true_tag: &str,
    angular_noise_std: f64,
    vocab: &Vocabulary,
    rng: &mut R,
) -> Result<FeatureVector<T>> {
    if !(angular_noise_std >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "angular noise std must be >= 0, got {angular_noise_std}"
        )));
    }
    let canon = canonicalize_tag(true_tag);
    if canon.is_empty() {
        return Err(Error::EmptyTag);
    }
    let text = embed_text_f64(&canon, vocab);
    if angular_noise_std == 0.0 {
        return Ok(to_feature(text));
    }
    let angle: f64 = {
        let z: f64 = StandardNormal.sample(rng);
        (z * angular_noise_std).abs()
    };
    let dir = tangent_direction(rng, &text);
    Ok(to_feature(rotate_towards(&text, &dir, angle)))
}
