use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::Split;
use crate::error::{Error, Result};
use crate::mask::HoleRect;

#[derive(Clone, Debug, PartialEq)]
pub struct ManifestHeader {
    pub pixel_size_m: f64,
    pub tile_px: usize,
    pub dem_min_m: f64,
    pub dem_max_m: f64,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ManifestRecord {
    pub id: String,
    pub row: usize,
    pub col: usize,
    pub split: Split,
    /// Relative paths resolve against the manifest's directory.
    pub path: PathBuf,
    pub hole: Option<HoleRect>,
}

/// Dataset index. On disk:
///
/// ```text
/// # pixel_size_m=5
/// # tile_px=256
/// # dem_min_m=0
/// # dem_max_m=511
/// # seed=7
/// id  row  col  split  path  hole
/// t0000  0  256  train  tiles/t0000.png
/// t0001  256  0  test  tiles/t0001.png  hole=104,104,48,48
/// ```
#[derive(Clone, Debug, PartialEq)]
pub struct Manifest {
    pub header: ManifestHeader,
    pub records: Vec<ManifestRecord>,
}

const COLUMNS: &str = "id\trow\tcol\tsplit\tpath\thole";

impl Manifest {
    pub fn to_text(&self) -> String {
        let h = &self.header;
        let mut out = format!(
            "# pixel_size_m={}\n# tile_px={}\n# dem_min_m={}\n# dem_max_m={}\n# seed={}\n{COLUMNS}\n",
            h.pixel_size_m, h.tile_px, h.dem_min_m, h.dem_max_m, h.seed
        );
        for r in &self.records {
            write!(out, "{}\t{}\t{}\t{}\t{}", r.id, r.row, r.col, r.split, r.path.display()).unwrap();
            if let Some(hole) = r.hole {
                write!(out, "\thole={},{},{},{}", hole.row0, hole.col0, hole.height, hole.width).unwrap();
            }
            out.push('\n');
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut kv = std::collections::HashMap::new();
        let mut records = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let loc = format!("manifest line {}", i + 1);
            if let Some(rest) = line.strip_prefix('#') {
                if let Some((k, v)) = rest.split_once('=') {
                    kv.insert(k.trim().to_string(), v.trim().to_string());
                }
                continue;
            }
            if line.trim().is_empty() || line == COLUMNS {
                continue;
            }
            let f: Vec<&str> = line.split('\t').collect();
            if !(5..=6).contains(&f.len()) {
                return Err(Error::parse(loc, format!("expected 5 or 6 tab-separated fields, got {}", f.len())));
            }
            let num = |s: &str| s.parse::<usize>().map_err(|e| Error::parse(&loc, format!("`{s}`: {e}")));
            let hole = match f.get(5) {
                None => None,
                Some(h) => Some(parse_hole(h).map_err(|m| Error::parse(&loc, m))?),
            };
            records.push(ManifestRecord {
                id: f[0].to_string(),
                row: num(f[1])?,
                col: num(f[2])?,
                split: f[3].parse().map_err(|m: String| Error::parse(&loc, m))?,
                path: PathBuf::from(f[4]),
                hole,
            });
        }
        let get = |k: &str| {
            kv.get(k).ok_or_else(|| Error::parse("manifest header", format!("missing `{k}`")))
        };
        let bad = |k: &str, e: &dyn std::fmt::Display| Error::parse("manifest header", format!("{k}: {e}"));
        let f64_of = |k: &str| get(k)?.parse::<f64>().map_err(|e| bad(k, &e));
        let header = ManifestHeader {
            pixel_size_m: f64_of("pixel_size_m")?,
            tile_px: get("tile_px")?.parse().map_err(|e| bad("tile_px", &e))?,
            dem_min_m: f64_of("dem_min_m")?,
            dem_max_m: f64_of("dem_max_m")?,
            seed: get("seed")?.parse().map_err(|e| bad("seed", &e))?,
        };
        Ok(Self { header, records })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn find(&self, id: &str) -> Option<&ManifestRecord> {
        self.records.iter().find(|r| r.id == id)
    }

    pub fn split(&self, split: Split) -> impl Iterator<Item = &ManifestRecord> {
        self.records.iter().filter(move |r| r.split == split)
    }
}

impl ManifestRecord {
    pub fn resolve(&self, manifest_dir: &Path) -> PathBuf {
        if self.path.is_absolute() {
            self.path.clone()
        } else {
            manifest_dir.join(&self.path)
        }
    }
}

fn parse_hole(field: &str) -> std::result::Result<HoleRect, String> {
    let body = field.strip_prefix("hole=").ok_or_else(|| format!("expected hole=..., got `{field}`"))?;
    let v: Vec<usize> = body
        .split(',')
        .map(|s| s.trim().parse::<usize>().map_err(|e| format!("hole `{body}`: {e}")))
        .collect::<std::result::Result<_, _>>()?;
    match v[..] {
        [row0, col0, height, width] => Ok(HoleRect { row0, col0, height, width }),
        _ => Err(format!("hole needs 4 numbers, got `{body}`")),
    }
}
