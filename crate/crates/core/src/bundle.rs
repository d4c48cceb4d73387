//! Index bundles: a directory holding `manifest.json` plus one binary file per component.
//!
//! The manifest records the format version, the index kind, the build configuration and,
//! for every component, its file name, byte length and CRC-32. Loading verifies every
//! checksum before decoding.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::codec::FORMAT_VERSION;
use crate::error::{Error, Result};
use crate::flat::FlatIndex;
use crate::lsh::LshIndex;
use crate::result::{ResultSet, SearchStats};
use crate::rptree::{ProbeBudget, QlbTree};
use crate::twolevel::{TwoLevelConfig, TwoLevelIndex};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IndexKind {
    Flat,
    Tree,
    Lsh,
    TwoLevel,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Component {
    pub name: String,
    pub file: String,
    pub bytes: u64,
    pub crc32: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: u32,
    pub kind: IndexKind,
    pub dim: usize,
    pub entities: usize,
    /// The build configuration; `null` for flat indexes.
    pub config: serde_json::Value,
    pub components: Vec<Component>,
}

/// Any index the bundle format can hold.
#[derive(Debug, Clone, PartialEq)]
pub enum AnyIndex {
    Flat(FlatIndex),
    Tree(QlbTree),
    Lsh(LshIndex),
    TwoLevel(TwoLevelIndex),
}

/// Search-time knobs; each index reads only the one that applies to it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchParams {
    pub k: usize,
    pub budget: ProbeBudget,
    pub radius: usize,
    /// `None` uses the configured value.
    pub n_probe: Option<usize>,
}

impl Default for SearchParams {
    fn default() -> Self {
        SearchParams {
            k: 10,
            budget: ProbeBudget::unlimited(),
            radius: 1,
            n_probe: None,
        }
    }
}

impl AnyIndex {
    pub fn kind(&self) -> IndexKind {
        match self {
            AnyIndex::Flat(_) => IndexKind::Flat,
            AnyIndex::Tree(_) => IndexKind::Tree,
            AnyIndex::Lsh(_) => IndexKind::Lsh,
            AnyIndex::TwoLevel(_) => IndexKind::TwoLevel,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            AnyIndex::Flat(i) => i.dim(),
            AnyIndex::Tree(i) => i.dim(),
            AnyIndex::Lsh(i) => i.dim(),
            AnyIndex::TwoLevel(i) => i.dim(),
        }
    }

    pub fn len(&self) -> usize {
        match self {
            AnyIndex::Flat(i) => i.len(),
            AnyIndex::Tree(i) => i.len(),
            AnyIndex::Lsh(i) => i.len(),
            AnyIndex::TwoLevel(i) => i.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn search(&self, query: &[f32], feature: Option<&[f32]>, p: &SearchParams) -> Result<(ResultSet, SearchStats)> {
        match self {
            AnyIndex::Flat(i) => i.search(query, p.k),
            AnyIndex::Tree(i) => i.search(query, p.k, p.budget),
            AnyIndex::Lsh(i) => i.search(query, p.k, p.radius),
            AnyIndex::TwoLevel(i) => {
                i.search_with(query, feature, p.k, p.n_probe.unwrap_or(i.config().n_probe))
            }
        }
    }

    fn config_json(&self) -> Result<serde_json::Value> {
        let v = match self {
            AnyIndex::Flat(_) => Ok(serde_json::Value::Null),
            AnyIndex::Tree(i) => serde_json::to_value(i.config()),
            AnyIndex::Lsh(i) => serde_json::to_value(i.config()),
            AnyIndex::TwoLevel(i) => serde_json::to_value(i.config()),
        };
        v.map_err(|e| Error::Format(e.to_string()))
    }

    fn components(&self) -> Vec<(&'static str, Vec<u8>)> {
        match self {
            AnyIndex::Flat(i) => vec![("flat", i.to_bytes())],
            AnyIndex::Tree(i) => vec![("tree", i.to_bytes())],
            AnyIndex::Lsh(i) => vec![("lsh", i.to_bytes())],
            AnyIndex::TwoLevel(i) => vec![
                ("partition", i.partition_bytes()),
                ("top", i.top_bytes()),
                ("bottoms", i.bottoms_bytes()),
            ],
        }
    }
}

impl crate::bench::KnobSearch for AnyIndex {
    /// The knob is the leaf budget, multiprobe radius or `n_probe`, by index kind.
    fn search_knob(&self, q: &[f32], f: Option<&[f32]>, k: usize, knob: usize) -> Result<(ResultSet, SearchStats)> {
        let p = SearchParams {
            k,
            budget: ProbeBudget::Leaves(knob),
            radius: knob,
            n_probe: Some(knob),
        };
        self.search(q, f, &p)
    }
}

/// Writes the bundle into `dir`, creating it if needed.
pub fn save_bundle(dir: &Path, index: &AnyIndex) -> Result<Manifest> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut components = Vec::new();
    for (name, bytes) in index.components() {
        let file = format!("{name}.bin");
        let path = dir.join(&file);
        fs::write(&path, &bytes).map_err(|e| Error::io(&path, e))?;
        components.push(Component {
            name: name.to_string(),
            file,
            bytes: bytes.len() as u64,
            crc32: crc32fast::hash(&bytes),
        });
    }
    let manifest = Manifest {
        format_version: FORMAT_VERSION,
        kind: index.kind(),
        dim: index.dim(),
        entities: index.len(),
        config: index.config_json()?,
        components,
    };
    let path = dir.join(MANIFEST_FILE);
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Format(e.to_string()))?;
    fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))?;
    Ok(manifest)
}

pub fn read_manifest(dir: &Path) -> Result<Manifest> {
    let path = dir.join(MANIFEST_FILE);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let m: Manifest = serde_json::from_str(&text).map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
    if m.format_version != FORMAT_VERSION {
        return Err(Error::Format(format!(
            "bundle format version {} (expected {FORMAT_VERSION})",
            m.format_version
        )));
    }
    Ok(m)
}

/// Loads a bundle, verifying each component's length and checksum first.
pub fn load_bundle(dir: &Path) -> Result<AnyIndex> {
    let m = read_manifest(dir)?;
    let component = |name: &str| -> Result<Vec<u8>> {
        let c = m
            .components
            .iter()
            .find(|c| c.name == name)
            .ok_or_else(|| Error::Format(format!("manifest lists no `{name}` component")))?;
        if c.file.contains(['/', '\\']) || c.file.starts_with('.') {
            return Err(Error::Format(format!("component file name `{}` is not local", c.file)));
        }
        let path = dir.join(&c.file);
        let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
        if bytes.len() as u64 != c.bytes || crc32fast::hash(&bytes) != c.crc32 {
            return Err(Error::Checksum {
                component: name.to_string(),
            });
        }
        Ok(bytes)
    };
    let index = match m.kind {
        IndexKind::Flat => AnyIndex::Flat(FlatIndex::from_bytes(&component("flat")?)?),
        IndexKind::Tree => AnyIndex::Tree(QlbTree::from_bytes(&component("tree")?)?),
        IndexKind::Lsh => AnyIndex::Lsh(LshIndex::from_bytes(&component("lsh")?)?),
        IndexKind::TwoLevel => {
            let cfg: TwoLevelConfig = serde_json::from_value(m.config.clone())
                .map_err(|e| Error::Format(format!("two-level config: {e}")))?;
            AnyIndex::TwoLevel(TwoLevelIndex::from_component_bytes(
                cfg,
                &component("partition")?,
                &component("top")?,
                &component("bottoms")?,
            )?)
        }
    };
    if index.dim() != m.dim || index.len() != m.entities {
        return Err(Error::Format("manifest shape disagrees with components".into()));
    }
    Ok(index)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rptree::TreeConfig;
    use crate::testutil::random_catalog;
    use crate::twolevel::{build_two_level, BottomKind, TopKind};

    fn all_kinds() -> Vec<AnyIndex> {
        let cat = random_catalog(200, 6, 1);
        let cfg = TwoLevelConfig::new(5, 2).with_top(TopKind::Pq).with_bottom(BottomKind::Tree);
        vec![
            AnyIndex::Flat(FlatIndex::build(&cat).unwrap()),
            AnyIndex::Tree(QlbTree::build(&cat, None, &TreeConfig::balanced(3)).unwrap()),
            AnyIndex::Lsh(LshIndex::build(&cat, &crate::lsh::LshConfig::with_seed(4)).unwrap()),
            AnyIndex::TwoLevel(build_two_level(&cat, None, None, &cfg).unwrap()),
        ]
    }

    #[test]
    fn round_trip_every_kind() {
        for index in all_kinds() {
            let dir = tempfile::tempdir().unwrap();
            let m = save_bundle(dir.path(), &index).unwrap();
            assert_eq!(m.kind, index.kind());
            let back = load_bundle(dir.path()).unwrap();
            let q = [0.1f32, -0.2, 0.3, 0.0, 0.5, -0.5];
            let p = SearchParams::default();
            let (a, sa) = index.search(&q, None, &p).unwrap();
            let (b, sb) = back.search(&q, None, &p).unwrap();
            assert_eq!(a, b);
            assert!(sa.same_counts(&sb));
        }
    }

    #[test]
    fn corrupted_component_fails_checksum() {
        let dir = tempfile::tempdir().unwrap();
        let index = all_kinds().remove(1);
        save_bundle(dir.path(), &index).unwrap();
        let path = dir.path().join("tree.bin");
        let mut bytes = fs::read(&path).unwrap();
        let last = bytes.len() - 1;
        bytes[last] ^= 0xff;
        fs::write(&path, bytes).unwrap();
        assert!(matches!(load_bundle(dir.path()), Err(Error::Checksum { .. })));
    }

    #[test]
    fn same_build_same_checksums() {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let m1 = save_bundle(a.path(), &all_kinds().remove(3)).unwrap();
        let m2 = save_bundle(b.path(), &all_kinds().remove(3)).unwrap();
        assert_eq!(m1.components, m2.components);
    }
}
