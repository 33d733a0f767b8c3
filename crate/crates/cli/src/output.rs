//! Run directories built in a staging sibling and swapped into place on success.

use crate::config::SnapshotFormat;
use nfsf_core::model::io::{encode_binary, snapshot_csv, write_atomic};
use nfsf_core::model::{DensityField, SpatialGrid};
use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

pub struct Staging {
    target: PathBuf,
    dir: PathBuf,
    files: Vec<String>,
}

fn sibling(target: &Path, tag: &str) -> PathBuf {
    let name = target
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "run".into());
    target.with_file_name(format!(".{name}.{tag}-{}", std::process::id()))
}

impl Staging {
    pub fn new(target: &Path) -> io::Result<Self> {
        if let Some(parent) = target.parent().filter(|p| !p.as_os_str().is_empty()) {
            fs::create_dir_all(parent)?;
        }
        let dir = sibling(target, "staging");
        if dir.exists() {
            fs::remove_dir_all(&dir)?;
        }
        fs::create_dir(&dir)?;
        Ok(Staging {
            target: target.to_path_buf(),
            dir,
            files: Vec::new(),
        })
    }

    pub fn write(&mut self, rel: &str, contents: impl AsRef<[u8]>) -> io::Result<()> {
        let path = self.dir.join(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(path, contents)?;
        self.files.push(rel.to_string());
        Ok(())
    }

    pub fn files(&self) -> Vec<String> {
        let mut f = self.files.clone();
        f.sort();
        f
    }

    /// Replace the target directory with the staged one.
    pub fn commit(self) -> io::Result<()> {
        let old = sibling(&self.target, "old");
        if self.target.exists() {
            fs::rename(&self.target, &old)?;
        }
        fs::rename(&self.dir, &self.target)?;
        if old.exists() {
            fs::remove_dir_all(&old)?;
        }
        Ok(())
    }

    pub fn discard(self) {
        let _ = fs::remove_dir_all(&self.dir);
    }
}

/// Write one file of an existing directory atomically.
pub fn write_into(
    dir: &Path,
    rel: &str,
    contents: impl AsRef<[u8]>,
) -> Result<(), nfsf_core::Error> {
    write_atomic(&dir.join(rel), contents.as_ref())
}

pub fn index_header(g: &SpatialGrid) -> &'static str {
    if g.d == 1 {
        "ix"
    } else {
        "ix0,ix1"
    }
}

pub fn index_values(g: &SpatialGrid, x: usize) -> String {
    g.index_of(x)
        .iter()
        .map(|i| i.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

pub fn num(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.17e}")
    } else if v > 0.0 {
        "inf".into()
    } else if v < 0.0 {
        "-inf".into()
    } else {
        "nan".into()
    }
}

pub fn snapshot_name(k: usize, ext: &str) -> String {
    format!("snapshots/snap_{k:05}.{ext}")
}

/// `snapshots/index.csv` plus one file per snapshot in the requested format(s).
pub fn write_snapshots(
    st: &mut Staging,
    format: SnapshotFormat,
    times: &[f64],
    snapshots: &[Vec<DensityField>],
) -> io::Result<()> {
    let mut index = String::from("k,t\n");
    for (k, (t, fields)) in times.iter().zip(snapshots).enumerate() {
        let _ = writeln!(index, "{k},{}", num(*t));
        if format != SnapshotFormat::Binary {
            st.write(&snapshot_name(k, "csv"), snapshot_csv(fields))?;
        }
        if format != SnapshotFormat::Csv {
            st.write(&snapshot_name(k, "bin"), encode_binary(fields))?;
        }
    }
    st.write("snapshots/index.csv", index)
}

/// Long-format table `t,[beta,]ix…,<columns>` from per-time `[β][x]` arrays.
pub fn series_csv(g: &SpatialGrid, times: &[f64], columns: &[(&str, &[Vec<Vec<f64>>])]) -> String {
    let pops = columns[0].1[0].len();
    let multi = pops > 1;
    let mut out = String::from("t,");
    if multi {
        out.push_str("beta,");
    }
    out.push_str(index_header(g));
    for (name, _) in columns {
        out.push(',');
        out.push_str(name);
    }
    out.push('\n');
    for (k, t) in times.iter().enumerate() {
        for b in 0..pops {
            for x in 0..g.cells() {
                out.push_str(&num(*t));
                out.push(',');
                if multi {
                    let _ = write!(out, "{b},");
                }
                out.push_str(&index_values(g, x));
                for (_, data) in columns {
                    out.push(',');
                    out.push_str(&num(data[k][b][x]));
                }
                out.push('\n');
            }
        }
    }
    out
}
