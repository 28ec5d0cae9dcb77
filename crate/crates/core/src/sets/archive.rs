//! Set-family archives: a directory holding `manifest` (`key=value` lines)
//! and `slice_<i>.hpoly` files.

use std::collections::BTreeMap;
use std::path::Path;

use super::{Result, SetsError};
use crate::polytope::{read_hpoly, write_hpoly, Polytope};

#[derive(Debug, Clone, PartialEq)]
pub struct ArchiveManifest {
    pub system_hash: String,
    pub hold: usize,
    pub schedule: String,
    pub slices: usize,
    /// Extra keys (e.g. `v0_base`, `v0_step`), written in sorted order.
    pub extra: BTreeMap<String, String>,
}

impl ArchiveManifest {
    fn render(&self) -> String {
        let mut s = format!(
            "system_hash={}\nM={}\nschedule={}\nslices={}\n",
            self.system_hash, self.hold, self.schedule, self.slices
        );
        for (k, v) in &self.extra {
            s.push_str(&format!("{k}={v}\n"));
        }
        s
    }

    fn parse(text: &str) -> Result<ArchiveManifest> {
        let mut map: BTreeMap<String, String> = BTreeMap::new();
        for line in text.lines().map(str::trim).filter(|l| !l.is_empty()) {
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| SetsError::Archive(format!("manifest line without '=': {line:?}")))?;
            map.insert(k.trim().to_string(), v.trim().to_string());
        }
        let mut take = |k: &str| map.remove(k).ok_or_else(|| SetsError::Archive(format!("manifest lacks {k}")));
        let system_hash = take("system_hash")?;
        let hold = take("M")?.parse().map_err(|e| SetsError::Archive(format!("M: {e}")))?;
        let schedule = take("schedule")?;
        let slices = take("slices")?.parse().map_err(|e| SetsError::Archive(format!("slices: {e}")))?;
        Ok(ArchiveManifest { system_hash, hold, schedule, slices, extra: map })
    }

    pub fn extra_f64(&self, key: &str) -> Option<f64> {
        self.extra.get(key).and_then(|v| v.parse().ok())
    }
}

fn io_err(path: &Path, e: std::io::Error) -> SetsError {
    SetsError::Archive(format!("{}: {e}", path.display()))
}

/// Writes `slices` under `dir`. Refuses to touch an existing archive unless
/// `force` is set.
pub fn write_archive(dir: &Path, manifest: &ArchiveManifest, slices: &[Polytope], force: bool) -> Result<()> {
    if manifest.slices != slices.len() {
        return Err(SetsError::Archive(format!(
            "manifest announces {} slices, got {}",
            manifest.slices,
            slices.len()
        )));
    }
    let mpath = dir.join("manifest");
    if mpath.exists() && !force {
        return Err(SetsError::Archive(format!("{} exists", mpath.display())));
    }
    std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    if force {
        if let Ok(entries) = std::fs::read_dir(dir) {
            for entry in entries.flatten() {
                let name = entry.file_name();
                let name = name.to_string_lossy();
                if name.starts_with("slice_") && name.ends_with(".hpoly") {
                    let _ = std::fs::remove_file(entry.path());
                }
            }
        }
    }
    for (i, s) in slices.iter().enumerate() {
        write_hpoly(&dir.join(format!("slice_{i}.hpoly")), s)?;
    }
    std::fs::write(&mpath, manifest.render()).map_err(|e| io_err(&mpath, e))
}

pub fn read_archive(dir: &Path) -> Result<(ArchiveManifest, Vec<Polytope>)> {
    let mpath = dir.join("manifest");
    let text = std::fs::read_to_string(&mpath).map_err(|e| io_err(&mpath, e))?;
    let manifest = ArchiveManifest::parse(&text)?;
    let slices = (0..manifest.slices)
        .map(|i| read_hpoly(&dir.join(format!("slice_{i}.hpoly"))).map_err(SetsError::from))
        .collect::<Result<Vec<_>>>()?;
    Ok((manifest, slices))
}
