//! Scalar fields on a [`SphereGrid`], immutable after construction, with a
//! flat binary snapshot format (small header + row-major f64 payload) and a
//! JSON sidecar carrying the metadata.

use std::io::{Read, Write};
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SslError};
use crate::grid::SphereGrid;

const SNAPSHOT_MAGIC: &[u8; 4] = b"SFLD";
const SNAPSHOT_VERSION: u32 = 1;

#[derive(Debug, Clone)]
pub struct SphereField {
    pub grid: Arc<SphereGrid>,
    pub values: Vec<f64>,
    pub name: String,
    pub units: String,
}

impl SphereField {
    pub fn constant(grid: Arc<SphereGrid>, value: f64, name: &str) -> Self {
        let values = vec![value; grid.len()];
        SphereField {
            grid,
            values,
            name: name.to_string(),
            units: String::new(),
        }
    }

    pub fn from_fn(grid: Arc<SphereGrid>, name: &str, f: impl Fn(&[f64; 3]) -> f64) -> Self {
        let values = (0..grid.len()).map(|i| f(&grid.node_flat(i))).collect();
        SphereField {
            grid,
            values,
            name: name.to_string(),
            units: String::new(),
        }
    }

    pub fn zip_with(&self, other: &SphereField, name: &str, f: impl Fn(f64, f64) -> f64) -> Self {
        assert_eq!(self.values.len(), other.values.len());
        SphereField {
            grid: self.grid.clone(),
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| f(*a, *b))
                .collect(),
            name: name.to_string(),
            units: String::new(),
        }
    }

    pub fn map(&self, name: &str, f: impl Fn(f64) -> f64) -> Self {
        SphereField {
            grid: self.grid.clone(),
            values: self.values.iter().map(|v| f(*v)).collect(),
            name: name.to_string(),
            units: String::new(),
        }
    }

    /// Values must be finite at all nodes outside the grid's exclusion disks.
    pub fn validate(&self) -> Result<()> {
        for idx in 0..self.values.len() {
            if !self.values[idx].is_finite() && !self.grid.is_excluded(&self.grid.node_flat(idx)) {
                return Err(SslError::Numerical(format!(
                    "field {:?} is not finite at node {idx} outside exclusion disks",
                    self.name
                )));
            }
        }
        Ok(())
    }

    pub fn sup_norm_excluding(&self) -> f64 {
        let mut sup: f64 = 0.0;
        for idx in 0..self.values.len() {
            if self.grid.exclusions.is_empty() || !self.grid.is_excluded(&self.grid.node_flat(idx))
            {
                sup = sup.max(self.values[idx].abs());
            }
        }
        sup
    }

    /// Write `<path>.bin` (header + row-major little-endian f64 payload) and
    /// `<path>.json` (grid, name, units).
    pub fn write_snapshot(&self, path: &Path) -> Result<()> {
        let bin_path = path.with_extension("bin");
        let mut buf: Vec<u8> =
            Vec::with_capacity(16 + std::mem::size_of_val(self.values.as_slice()));
        buf.extend_from_slice(SNAPSHOT_MAGIC);
        buf.extend_from_slice(&SNAPSHOT_VERSION.to_le_bytes());
        buf.extend_from_slice(&(self.grid.n_theta as u32).to_le_bytes());
        buf.extend_from_slice(&(self.grid.n_phi as u32).to_le_bytes());
        for v in &self.values {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        atomic_write(&bin_path, &buf)?;
        let sidecar = SnapshotSidecar {
            name: self.name.clone(),
            units: self.units.clone(),
            grid: (*self.grid).clone(),
        };
        atomic_write(
            &path.with_extension("json"),
            serde_json::to_string_pretty(&sidecar)?.as_bytes(),
        )?;
        Ok(())
    }

    pub fn read_snapshot(path: &Path) -> Result<Self> {
        let mut file = std::fs::File::open(path.with_extension("bin"))?;
        let mut buf = Vec::new();
        file.read_to_end(&mut buf)?;
        if buf.len() < 16 || &buf[0..4] != SNAPSHOT_MAGIC {
            return Err(SslError::Format("bad field snapshot header".into()));
        }
        let version = u32::from_le_bytes(buf[4..8].try_into().unwrap());
        if version > SNAPSHOT_VERSION {
            return Err(SslError::Format(format!(
                "snapshot version {version} newer than supported {SNAPSHOT_VERSION}"
            )));
        }
        let n_theta = u32::from_le_bytes(buf[8..12].try_into().unwrap()) as usize;
        let n_phi = u32::from_le_bytes(buf[12..16].try_into().unwrap()) as usize;
        let expected = 16 + n_theta * n_phi * 8;
        if buf.len() != expected {
            return Err(SslError::Format(format!(
                "snapshot payload is {} bytes, expected {expected}",
                buf.len()
            )));
        }
        let sidecar_text = std::fs::read_to_string(path.with_extension("json"))?;
        let sidecar: SnapshotSidecar = serde_json::from_str(&sidecar_text)?;
        if sidecar.grid.n_theta != n_theta || sidecar.grid.n_phi != n_phi {
            return Err(SslError::Format(
                "snapshot sidecar grid disagrees with binary header".into(),
            ));
        }
        let values = buf[16..]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Ok(SphereField {
            grid: Arc::new(sidecar.grid),
            values,
            name: sidecar.name,
            units: sidecar.units,
        })
    }
}

#[derive(Serialize, Deserialize)]
struct SnapshotSidecar {
    name: String,
    units: String,
    grid: SphereGrid,
}

/// Write-temp-rename so partially written snapshots are never observed.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    std::fs::create_dir_all(dir)?;
    let tmp = dir.join(format!(
        ".{}.tmp",
        path.file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| "snapshot".into())
    ));
    {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    std::fs::rename(&tmp, path)?;
    Ok(())
}
