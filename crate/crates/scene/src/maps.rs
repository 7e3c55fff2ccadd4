use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::{Result, SceneError};

/// Row-major grid of depths (m) or errors (mm), row 0 at the top.
///
/// Masked pixels hold NaN and are ignored by every statistic.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthMap {
    pub width: usize,
    pub height: usize,
    pub values: Vec<f64>,
    pub mask: Vec<bool>,
}

impl DepthMap {
    /// Builds a map from `f(col, row)`; `None` masks the pixel.
    pub fn from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> Option<f64>,
    ) -> Self {
        let mut values = Vec::with_capacity(width * height);
        let mut mask = Vec::with_capacity(width * height);
        for row in 0..height {
            for col in 0..width {
                match f(col, row) {
                    Some(v) => {
                        values.push(v);
                        mask.push(true);
                    }
                    None => {
                        values.push(f64::NAN);
                        mask.push(false);
                    }
                }
            }
        }
        Self {
            width,
            height,
            values,
            mask,
        }
    }

    pub fn get(&self, col: usize, row: usize) -> Option<f64> {
        let i = row * self.width + col;
        self.mask[i].then(|| self.values[i])
    }

    pub fn valid_count(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    /// Mean of `|v|` over unmasked pixels whose column satisfies `keep`; NaN if none.
    pub fn mean_abs_where(&self, mut keep: impl FnMut(usize) -> bool) -> f64 {
        let (mut sum, mut n) = (0.0, 0usize);
        for (i, (&v, &m)) in self.values.iter().zip(&self.mask).enumerate() {
            if m && keep(i % self.width) {
                sum += v.abs();
                n += 1;
            }
        }
        if n == 0 {
            f64::NAN
        } else {
            sum / n as f64
        }
    }

    pub fn mean_abs(&self) -> f64 {
        self.mean_abs_where(|_| true)
    }

    fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }
}

/// Signed error `(map − truth) × 1000` with the intersected mask.
pub fn error_map(map: &DepthMap, truth: &DepthMap) -> Result<DepthMap> {
    if map.dims() != truth.dims() {
        return Err(SceneError::Dimension {
            left: map.dims(),
            right: truth.dims(),
        });
    }
    Ok(DepthMap::from_fn(map.width, map.height, |c, r| {
        Some((map.get(c, r)? - truth.get(c, r)?) * 1000.0)
    }))
}

/// Grayscale little-endian PFM; rows are stored bottom to top and masked pixels are NaN.
pub fn write_pfm(map: &DepthMap, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write!(w, "Pf\n{} {}\n-1.0\n", map.width, map.height)?;
    for row in (0..map.height).rev() {
        for col in 0..map.width {
            let v = map.get(col, row).map_or(f32::NAN, |v| v as f32);
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads a grayscale PFM of either endianness; NaN pixels come back masked.
pub fn read_pfm(path: &Path) -> Result<DepthMap> {
    let mut r = BufReader::new(File::open(path)?);
    let mut header = Vec::new();
    let mut tokens: Vec<String> = Vec::new();
    while tokens.len() < 4 {
        header.clear();
        if r.read_until(b'\n', &mut header)? == 0 {
            return Err(SceneError::Format("truncated header".into()));
        }
        tokens.extend(
            String::from_utf8_lossy(&header)
                .split_whitespace()
                .map(str::to_owned),
        );
    }
    if tokens[0] != "Pf" {
        return Err(SceneError::Format(format!(
            "expected grayscale 'Pf', found '{}'",
            tokens[0]
        )));
    }
    let parse = |t: &str| {
        t.parse::<f64>()
            .map_err(|_| SceneError::Format(format!("bad header token '{t}'")))
    };
    let (width, height, scale) = (
        parse(&tokens[1])? as usize,
        parse(&tokens[2])? as usize,
        parse(&tokens[3])?,
    );
    let mut raw = vec![0u8; width * height * 4];
    r.read_exact(&mut raw)
        .map_err(|_| SceneError::Format("pixel data shorter than header size".into()))?;
    let mut rows: Vec<Vec<Option<f64>>> = raw
        .chunks_exact(width * 4)
        .map(|line| {
            line.chunks_exact(4)
                .map(|b| {
                    let b = [b[0], b[1], b[2], b[3]];
                    let v = if scale < 0.0 {
                        f32::from_le_bytes(b)
                    } else {
                        f32::from_be_bytes(b)
                    };
                    (!v.is_nan()).then_some(v as f64)
                })
                .collect()
        })
        .collect();
    rows.reverse();
    Ok(DepthMap::from_fn(width, height, |c, r| rows[r][c]))
}

/// Binary PGM, 255 for valid pixels and 0 for masked ones.
pub fn write_pgm_mask(map: &DepthMap, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write!(w, "P5\n{} {}\n255\n", map.width, map.height)?;
    let bytes: Vec<u8> = map.mask.iter().map(|&m| if m { 255 } else { 0 }).collect();
    w.write_all(&bytes)?;
    w.flush()?;
    Ok(())
}

/// One CSV line per row, top to bottom; masked pixels are empty fields.
pub fn write_csv_grid(map: &DepthMap, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for row in 0..map.height {
        let line: Vec<String> = (0..map.width)
            .map(|c| map.get(c, row).map_or(String::new(), |v| v.to_string()))
            .collect();
        writeln!(w, "{}", line.join(","))?;
    }
    w.flush()?;
    Ok(())
}
