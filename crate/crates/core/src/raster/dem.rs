use super::RasterGeometry;
use crate::error::{Error, Result};

/// Elevation grid in meters above sea level, row-major, north row first.
#[derive(Clone, Debug, PartialEq)]
pub struct DemGrid {
    pub rows: usize,
    pub cols: usize,
    pub elevations: Vec<f64>,
    pub cell_size_m: f64,
    /// Top-left corner in planar meters.
    pub origin_x: f64,
    pub origin_y: f64,
}

impl DemGrid {
    pub fn new(rows: usize, cols: usize, elevations: Vec<f64>, cell_size_m: f64, origin: (f64, f64)) -> Result<Self> {
        if rows == 0 || cols == 0 || elevations.len() != rows * cols {
            return Err(Error::Geometry(format!("{} elevations for a {rows}x{cols} grid", elevations.len())));
        }
        if elevations.iter().any(|e| !e.is_finite()) {
            return Err(Error::Geometry("DEM contains non-finite elevations".into()));
        }
        if !(cell_size_m > 0.0) {
            return Err(Error::Geometry(format!("cell size {cell_size_m} must be positive")));
        }
        Ok(Self { rows, cols, elevations, cell_size_m, origin_x: origin.0, origin_y: origin.1 })
    }

    pub fn at(&self, row: usize, col: usize) -> f64 {
        self.elevations[row * self.cols + col]
    }

    /// Number of raster pixels per DEM cell along each axis.
    pub fn upsample_factor(&self, pixel_size_m: f64) -> Result<usize> {
        let ratio = self.cell_size_m / pixel_size_m;
        let factor = ratio.round();
        if factor < 1.0 || (ratio - factor).abs() > 1e-9 {
            return Err(Error::Geometry(format!(
                "DEM cell {} m is not an integer multiple of the {pixel_size_m} m pixel",
                self.cell_size_m
            )));
        }
        Ok(factor as usize)
    }

    /// Raster geometry covering this DEM at the given pixel size.
    pub fn raster_geometry(&self, pixel_size_m: f64) -> Result<RasterGeometry> {
        let f = self.upsample_factor(pixel_size_m)?;
        Ok(RasterGeometry {
            origin_x: self.origin_x,
            origin_y: self.origin_y,
            pixel_size_m,
            width: self.cols * f,
            height: self.rows * f,
        })
    }

    /// ESRI ASCII grid (`ncols`, `nrows`, `xllcorner`, `yllcorner`, `cellsize`,
    /// optional `NODATA_value`, then rows north to south). No-data cells are rejected.
    pub fn parse_ascii_grid(text: &str) -> Result<Self> {
        let mut tokens = text.split_whitespace().peekable();
        let mut header = std::collections::HashMap::new();
        while let Some(&tok) = tokens.peek() {
            if tok.parse::<f64>().is_ok() {
                break;
            }
            let key = tokens.next().unwrap().to_ascii_lowercase();
            let value = tokens
                .next()
                .and_then(|v| v.parse::<f64>().ok())
                .ok_or_else(|| Error::parse("DEM header", format!("missing value for {key}")))?;
            header.insert(key, value);
        }
        let get = |k: &str| header.get(k).copied().ok_or_else(|| Error::parse("DEM header", format!("missing {k}")));
        let (cols, rows) = (get("ncols")? as usize, get("nrows")? as usize);
        let cell = get("cellsize")?;
        let (xll, yll) = (get("xllcorner")?, get("yllcorner")?);
        let nodata = header.get("nodata_value").copied();
        let mut elevations = Vec::with_capacity(rows * cols);
        for (i, tok) in tokens.enumerate() {
            let v: f64 = tok.parse().map_err(|_| Error::parse(format!("DEM cell {i}"), format!("`{tok}` is not a number")))?;
            if Some(v) == nodata {
                return Err(Error::parse(format!("DEM cell {i}"), "no-data elevation"));
            }
            elevations.push(v);
        }
        Self::new(rows, cols, elevations, cell, (xll, yll + rows as f64 * cell))
    }
}

/// Topo channel for a DEM: each cell expands to a `factor x factor` block and
/// `value = round(255 * (e_max - clamp(e)) / (e_max - e_min))`, rounding half up.
pub fn encode_dem(dem: &DemGrid, pixel_size_m: f64, e_min: f64, e_max: f64) -> Result<Vec<u8>> {
    if !(e_min < e_max) || !e_min.is_finite() || !e_max.is_finite() {
        return Err(Error::Config(format!("degenerate elevation range [{e_min}, {e_max}]")));
    }
    let f = dem.upsample_factor(pixel_size_m)?;
    let width = dem.cols * f;
    let mut out = vec![0u8; dem.rows * f * width];
    for r in 0..dem.rows {
        for c in 0..dem.cols {
            let e = dem.at(r, c).clamp(e_min, e_max);
            let v = (255.0 * (e_max - e) / (e_max - e_min) + 0.5).floor() as u8;
            for dr in 0..f {
                let row = (r * f + dr) * width + c * f;
                out[row..row + f].fill(v);
            }
        }
    }
    Ok(out)
}
