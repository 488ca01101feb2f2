//! Dataset manifests and identity-disjoint train/test protocols.
//!
//! The manifest is the only source of image locations; nothing here scans
//! the filesystem. Splits and morph pairs are a pure function of the
//! manifest, the split parameters and the seed.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::path::{Path, PathBuf};

use rand::seq::{IndexedRandom, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fsio;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Reference,
    Probe,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImageRecord {
    pub id: String,
    pub path: String,
    pub role: Role,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IdentityRecord {
    pub id: String,
    pub images: Vec<ImageRecord>,
}

impl IdentityRecord {
    pub fn images_with_role(&self, role: Role) -> impl Iterator<Item = &ImageRecord> {
        self.images.iter().filter(move |im| im.role == role)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetManifest {
    pub identities: Vec<IdentityRecord>,
}

impl DatasetManifest {
    pub fn from_json(bytes: &[u8]) -> Result<Self> {
        let manifest: DatasetManifest =
            serde_json::from_slice(bytes).map_err(|e| Error::MalformedManifest(e.to_string()))?;
        manifest.validate()?;
        Ok(manifest)
    }

    pub fn validate(&self) -> Result<()> {
        let mut identity_ids = HashSet::new();
        let mut image_ids = HashSet::new();
        for identity in &self.identities {
            if identity.id.is_empty() {
                return Err(Error::Validation("empty identity id".into()));
            }
            if !identity_ids.insert(identity.id.as_str()) {
                return Err(Error::Validation(format!(
                    "duplicate identity id `{}`",
                    identity.id
                )));
            }
            for image in &identity.images {
                if image.id.is_empty() {
                    return Err(Error::Validation(format!(
                        "empty image id in `{}`",
                        identity.id
                    )));
                }
                if image.path.is_empty() {
                    return Err(Error::Validation(format!(
                        "image `{}` has an empty path",
                        image.id
                    )));
                }
                if !image_ids.insert(image.id.as_str()) {
                    return Err(Error::Validation(format!(
                        "duplicate image id `{}`",
                        image.id
                    )));
                }
            }
            for role in [Role::Reference, Role::Probe] {
                if identity.images_with_role(role).next().is_none() {
                    return Err(Error::Validation(format!(
                        "identity `{}` has no {role:?} image",
                        identity.id
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn identity(&self, id: &str) -> Option<&IdentityRecord> {
        self.identities.iter().find(|i| i.id == id)
    }

    /// Looks up an image by id, returning its owning identity too.
    pub fn image(&self, id: &str) -> Option<(&IdentityRecord, &ImageRecord)> {
        self.identities.iter().find_map(|ident| {
            ident
                .images
                .iter()
                .find(|im| im.id == id)
                .map(|im| (ident, im))
        })
    }

    pub fn image_count(&self) -> usize {
        self.identities.iter().map(|i| i.images.len()).sum()
    }

    pub fn to_json(&self) -> Result<Vec<u8>> {
        Ok(serde_json::to_vec_pretty(self)?)
    }
}

pub fn load_manifest(path: &Path) -> Result<DatasetManifest> {
    DatasetManifest::from_json(&fsio::read(path)?)
}

/// Resolves a manifest image path; relative paths are taken from the
/// manifest's directory.
pub fn resolve_image_path(manifest_path: &Path, image: &ImageRecord) -> PathBuf {
    let p = Path::new(&image.path);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        manifest_path.parent().unwrap_or(Path::new(".")).join(p)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Test => "test",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MorphPair {
    pub a_id: String,
    pub a_img: String,
    pub b_id: String,
    pub b_img: String,
    pub split: Split,
}

impl MorphPair {
    /// File stem shared by every artefact generated from this pair.
    pub fn stem(&self) -> String {
        format!("{}_{}", self.a_id, self.b_id)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitProtocol {
    pub train: BTreeSet<String>,
    pub test: BTreeSet<String>,
    pub pairs: Vec<MorphPair>,
}

impl SplitProtocol {
    pub fn identities(&self, split: Split) -> &BTreeSet<String> {
        match split {
            Split::Train => &self.train,
            Split::Test => &self.test,
        }
    }

    pub fn pairs_in(&self, split: Split) -> impl Iterator<Item = &MorphPair> {
        self.pairs.iter().filter(move |p| p.split == split)
    }

    /// Checks disjointness and pair membership; with a manifest, also that
    /// every referenced identity and image exists and belongs together.
    pub fn validate(&self, manifest: Option<&DatasetManifest>) -> Result<()> {
        if let Some(id) = self.train.intersection(&self.test).next() {
            return Err(Error::Validation(format!(
                "identity `{id}` is in both splits"
            )));
        }
        let mut seen = HashSet::new();
        for pair in &self.pairs {
            if pair.a_id == pair.b_id {
                return Err(Error::Validation(format!(
                    "pair pairs `{}` with itself",
                    pair.a_id
                )));
            }
            let members = self.identities(pair.split);
            for id in [&pair.a_id, &pair.b_id] {
                if !members.contains(id) {
                    return Err(Error::Validation(format!(
                        "pair {} references `{id}` outside the {} split",
                        pair.stem(),
                        pair.split
                    )));
                }
            }
            let key = ordered(&pair.a_id, &pair.b_id);
            if !seen.insert(key) {
                return Err(Error::Validation(format!("pair {} repeated", pair.stem())));
            }
            if let Some(m) = manifest {
                for (ident, img) in [(&pair.a_id, &pair.a_img), (&pair.b_id, &pair.b_img)] {
                    match m.image(img) {
                        Some((owner, _)) if &owner.id == ident => {}
                        Some((owner, _)) => {
                            return Err(Error::Validation(format!(
                                "image `{img}` belongs to `{}`, not `{ident}`",
                                owner.id
                            )))
                        }
                        None => return Err(Error::Validation(format!("unknown image `{img}`"))),
                    }
                }
            }
        }
        if let Some(m) = manifest {
            for id in self.train.iter().chain(&self.test) {
                if m.identity(id).is_none() {
                    return Err(Error::Validation(format!("unknown identity `{id}`")));
                }
            }
        }
        Ok(())
    }

    pub fn from_json(bytes: &[u8]) -> Result<Self> {
        let protocol: SplitProtocol = serde_json::from_slice(bytes)
            .map_err(|e| Error::Validation(format!("malformed protocol: {e}")))?;
        protocol.validate(None)?;
        Ok(protocol)
    }

    pub fn load(path: &Path) -> Result<Self> {
        SplitProtocol::from_json(&fsio::read(path)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fsio::write_json_atomic(path, self)
    }

    /// Source images consumed by morphs in `split`.
    pub fn morph_sources(&self, split: Split) -> BTreeSet<&str> {
        self.pairs_in(split)
            .flat_map(|p| [p.a_img.as_str(), p.b_img.as_str()])
            .collect()
    }

    /// Bona fide images of `split`: every image of the split's identities,
    /// minus morph sources unless the policy says otherwise. Sorted by
    /// identity then manifest order.
    pub fn bonafide_images<'m>(
        &self,
        manifest: &'m DatasetManifest,
        split: Split,
        policy: BonafidePolicy,
    ) -> Vec<(&'m IdentityRecord, &'m ImageRecord)> {
        let members = self.identities(split);
        let sources = self.morph_sources(split);
        let mut out: Vec<_> = manifest
            .identities
            .iter()
            .filter(|i| members.contains(&i.id))
            .flat_map(|i| i.images.iter().map(move |im| (i, im)))
            .filter(|(_, im)| policy == BonafidePolicy::All || !sources.contains(im.id.as_str()))
            .collect();
        out.sort_by(|a, b| a.0.id.cmp(&b.0.id));
        out
    }
}

fn ordered<'a>(a: &'a str, b: &'a str) -> (&'a str, &'a str) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BonafidePolicy {
    /// Skip images used as morph sources.
    #[default]
    ExcludeMorphSources,
    All,
}

/// Builds identity-disjoint splits and within-split morph pairs.
///
/// Identities are shuffled with `seed`; the first `round(n · train_fraction)`
/// (clamped so both splits hold at least two identities) form the training
/// split. Inside each split every identity draws up to `pairs_per_identity`
/// distinct partners from a seeded shuffle. Each pair morphs one reference
/// image from each identity.
pub fn build_splits(
    manifest: &DatasetManifest,
    train_fraction: f64,
    pairs_per_identity: usize,
    seed: u64,
) -> Result<SplitProtocol> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::Precondition(format!(
            "train_fraction {train_fraction} not in (0, 1)"
        )));
    }
    if pairs_per_identity == 0 {
        return Err(Error::Precondition(
            "pairs_per_identity must be positive".into(),
        ));
    }
    manifest.validate()?;
    let n = manifest.identities.len();
    if n < 4 {
        return Err(Error::ProtocolInfeasible(format!(
            "{n} identities cannot form a pair in each split (need at least 4)"
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ids: Vec<&str> = manifest.identities.iter().map(|i| i.id.as_str()).collect();
    ids.sort_unstable();
    ids.shuffle(&mut rng);

    let n_train = ((n as f64 * train_fraction).round() as usize).clamp(2, n - 2);
    let (train_ids, test_ids) = ids.split_at(n_train);

    let mut pairs = Vec::new();
    for (split, members) in [(Split::Train, train_ids), (Split::Test, test_ids)] {
        pair_within(
            manifest,
            members,
            split,
            pairs_per_identity,
            &mut rng,
            &mut pairs,
        );
    }

    Ok(SplitProtocol {
        train: train_ids.iter().map(|s| s.to_string()).collect(),
        test: test_ids.iter().map(|s| s.to_string()).collect(),
        pairs,
    })
}

fn pair_within(
    manifest: &DatasetManifest,
    members: &[&str],
    split: Split,
    per_identity: usize,
    rng: &mut ChaCha8Rng,
    out: &mut Vec<MorphPair>,
) {
    let mut counts: BTreeMap<&str, usize> = members.iter().map(|&m| (m, 0)).collect();
    let mut used = HashSet::new();
    for &a in members {
        let mut partners: Vec<&str> = members.iter().copied().filter(|&b| b != a).collect();
        partners.shuffle(rng);
        for b in partners {
            if counts[a] >= per_identity {
                break;
            }
            if counts[b] >= per_identity || !used.insert(ordered(a, b)) {
                continue;
            }
            *counts.get_mut(a).unwrap() += 1;
            *counts.get_mut(b).unwrap() += 1;
            out.push(MorphPair {
                a_id: a.to_string(),
                a_img: pick_reference(manifest, a, rng),
                b_id: b.to_string(),
                b_img: pick_reference(manifest, b, rng),
                split,
            });
        }
    }
}

fn pick_reference(manifest: &DatasetManifest, identity: &str, rng: &mut ChaCha8Rng) -> String {
    let refs: Vec<&ImageRecord> = manifest
        .identity(identity)
        .expect("split member comes from the manifest")
        .images_with_role(Role::Reference)
        .collect();
    refs.choose(rng)
        .expect("validated manifest has references")
        .id
        .clone()
}

/// Expected per-split counts; bona fide counts are optional.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ExpectedCounts {
    pub train_pairs: usize,
    pub test_pairs: usize,
    #[serde(default)]
    pub train_bonafide: Option<usize>,
    #[serde(default)]
    pub test_bonafide: Option<usize>,
}

/// Published per-kind counts: 1190/1310 morphs and 690/580 bona fide
/// images for train/test (2500 morphs per kind, 1270 bona fide in total).
pub const PUBLISHED_COUNTS: ExpectedCounts = ExpectedCounts {
    train_pairs: 1190,
    test_pairs: 1310,
    train_bonafide: Some(690),
    test_bonafide: Some(580),
};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountRow {
    pub item: String,
    pub expected: usize,
    pub actual: usize,
    pub delta: i64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountReport {
    pub rows: Vec<CountRow>,
    pub pass: bool,
}

/// Compares actual pair (and, given a manifest, bona fide) counts per split
/// against `expected`. Bona fide rows are skipped when either side is absent.
pub fn validate_counts(
    protocol: &SplitProtocol,
    expected: &ExpectedCounts,
    manifest: Option<&DatasetManifest>,
    policy: BonafidePolicy,
) -> CountReport {
    let mut rows = Vec::new();
    let mut row = |item: &str, expected: usize, actual: usize| {
        rows.push(CountRow {
            item: item.to_string(),
            expected,
            actual,
            delta: actual as i64 - expected as i64,
        })
    };
    row(
        "train_pairs",
        expected.train_pairs,
        protocol.pairs_in(Split::Train).count(),
    );
    row(
        "test_pairs",
        expected.test_pairs,
        protocol.pairs_in(Split::Test).count(),
    );
    if let Some(m) = manifest {
        for (split, want) in [
            (Split::Train, expected.train_bonafide),
            (Split::Test, expected.test_bonafide),
        ] {
            if let Some(want) = want {
                row(
                    &format!("{split}_bonafide"),
                    want,
                    protocol.bonafide_images(m, split, policy).len(),
                );
            }
        }
    }
    let pass = rows.iter().all(|r| r.delta == 0);
    CountReport { rows, pass }
}
