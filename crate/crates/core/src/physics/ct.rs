//! CT gray values to tissue density, and plain-text image/field readers.
//!
//! Image pixel `(row r, column c)` of an `W x H` image maps to grid cell
//! `(i, j) = (c, H - 1 - r)`, so the top image row is the largest `y`.

use crate::error::{Error, Result};
use std::collections::VecDeque;

/// Density of a white pixel (bone), g/cm^3.
pub const RHO_BONE: f64 = 1.85;
/// Density of a black pixel and global density floor, g/cm^3.
pub const RHO_MIN: f64 = 0.05;

/// Gray-scale image with values in `[0, 1]`, stored row-major from the top row.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<f64>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, pixels: Vec<f64>) -> Result<Self> {
        if pixels.len() != width * height {
            return Err(Error::DimensionMismatch {
                what: "image pixels",
                expected: width * height,
                actual: pixels.len(),
            });
        }
        if let Some((index, &value)) = pixels.iter().enumerate().find(|(_, v)| !(0.0..=1.0).contains(*v)) {
            return Err(Error::GrayOutOfRange { index, value });
        }
        Ok(Self { width, height, pixels })
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.pixels[row * self.width + col]
    }
}

/// Reads an ASCII PGM (`P2`) image, scaling samples by the declared maximum.
pub fn parse_pgm(text: &str, source_name: &str) -> Result<GrayImage> {
    let err = |line: usize, message: &str| Error::Parse {
        source_name: source_name.to_string(),
        line,
        message: message.to_string(),
    };
    let mut tokens = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let content = line.split('#').next().unwrap_or("");
        tokens.extend(content.split_whitespace().map(|t| (n + 1, t)));
    }
    let mut it = tokens.into_iter();
    match it.next() {
        Some((_, "P2")) => {}
        Some((line, _)) => return Err(err(line, "expected magic number P2")),
        None => return Err(err(1, "empty image")),
    }
    let mut header = [0usize; 3];
    for h in header.iter_mut() {
        let (line, tok) = it.next().ok_or_else(|| err(0, "truncated header"))?;
        *h = tok.parse().map_err(|_| err(line, "header field is not an unsigned integer"))?;
    }
    let [width, height, maxval] = header;
    if width == 0 || height == 0 || maxval == 0 {
        return Err(err(1, "zero width, height or maximum value"));
    }
    let mut pixels = Vec::with_capacity(width * height);
    for (line, tok) in it {
        let v: usize = tok.parse().map_err(|_| err(line, "pixel is not an unsigned integer"))?;
        if v > maxval {
            return Err(err(line, "pixel exceeds the declared maximum"));
        }
        pixels.push(v as f64 / maxval as f64);
    }
    if pixels.len() != width * height {
        return Err(err(0, &format!("expected {} pixels, found {}", width * height, pixels.len())));
    }
    GrayImage::new(width, height, pixels)
}

/// Reads a numeric CSV field; row `i` holds cells `(i, 0..ny)`. Lines starting
/// with `#` are comments. Returns `(nx, ny, values)` in flat grid order.
pub fn parse_density_csv(text: &str, source_name: &str) -> Result<(usize, usize, Vec<f64>)> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let row: std::result::Result<Vec<f64>, _> = line.split(',').map(|f| f.trim().parse::<f64>()).collect();
        let row = row.map_err(|_| Error::Parse {
            source_name: source_name.to_string(),
            line: n + 1,
            message: "non-numeric entry".into(),
        })?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(Error::Parse {
                    source_name: source_name.to_string(),
                    line: n + 1,
                    message: format!("expected {} columns, found {}", first.len(), row.len()),
                });
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Parse {
            source_name: source_name.to_string(),
            line: 0,
            message: "no data rows".into(),
        });
    }
    let (nx, ny) = (rows.len(), rows[0].len());
    Ok((nx, ny, rows.into_iter().flatten().collect()))
}

/// Affine map `rho = rho_min + g (rho_bone - rho_min)` returned in flat grid
/// order (`nx = width`, `ny = height`).
///
/// With `air_fill = Some((threshold, rho_tissue))`, pixels with gray value at
/// most `threshold` that are 4-connected to the image border are treated as
/// air outside the patient and set to `rho_tissue`.
pub fn ct_to_density(
    image: &GrayImage,
    rho_bone: f64,
    rho_min: f64,
    air_fill: Option<(f64, f64)>,
) -> Result<Vec<f64>> {
    if let Some((index, &value)) = image.pixels.iter().enumerate().find(|(_, v)| !(0.0..=1.0).contains(*v)) {
        return Err(Error::GrayOutOfRange { index, value });
    }
    let (w, h) = (image.width, image.height);
    let mut is_air = vec![false; w * h];
    if let Some((threshold, _)) = air_fill {
        let mut queue = VecDeque::new();
        for r in 0..h {
            for c in 0..w {
                let border = r == 0 || c == 0 || r == h - 1 || c == w - 1;
                if border && image.get(r, c) <= threshold {
                    is_air[r * w + c] = true;
                    queue.push_back((r, c));
                }
            }
        }
        while let Some((r, c)) = queue.pop_front() {
            let mut visit = |rr: usize, cc: usize| {
                let k = rr * w + cc;
                if !is_air[k] && image.get(rr, cc) <= threshold {
                    is_air[k] = true;
                    queue.push_back((rr, cc));
                }
            };
            if r > 0 {
                visit(r - 1, c);
            }
            if r + 1 < h {
                visit(r + 1, c);
            }
            if c > 0 {
                visit(r, c - 1);
            }
            if c + 1 < w {
                visit(r, c + 1);
            }
        }
    }
    let mut rho = vec![0.0; w * h];
    for r in 0..h {
        for c in 0..w {
            let k = r * w + c;
            let value = match air_fill {
                Some((_, tissue)) if is_air[k] => tissue,
                _ => rho_min + image.pixels[k] * (rho_bone - rho_min),
            };
            let (i, j) = (c, h - 1 - r);
            rho[i * h + j] = value;
        }
    }
    Ok(rho)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn anchor_values() {
        let img = GrayImage::new(3, 1, vec![1.0, 0.0, 0.5]).unwrap();
        let rho = ct_to_density(&img, RHO_BONE, RHO_MIN, None).unwrap();
        assert!((rho[0] - 1.85).abs() < 1e-15);
        assert!((rho[1] - 0.05).abs() < 1e-15);
        assert!((rho[2] - 0.95).abs() < 1e-15);
    }

    #[test]
    fn out_of_range_gray_values() {
        assert!(matches!(GrayImage::new(1, 1, vec![1.2]), Err(Error::GrayOutOfRange { .. })));
        let img = GrayImage {
            width: 1,
            height: 1,
            pixels: vec![-0.1],
        };
        assert!(ct_to_density(&img, RHO_BONE, RHO_MIN, None).is_err());
    }

    #[test]
    fn pgm_orientation() {
        let text = "P2\n# two rows\n2 2\n255\n0 255\n51 102\n";
        let img = parse_pgm(text, "t.pgm").unwrap();
        assert_eq!(img.get(0, 1), 1.0);
        let rho = ct_to_density(&img, RHO_BONE, RHO_MIN, None).unwrap();
        // top-right pixel is cell (i = 1, j = 1)
        assert!((rho[3] - 1.85).abs() < 1e-15);
        // bottom-left pixel (gray 0.2) is cell (0, 0)
        assert!((rho[0] - (0.05 + 0.2 * 1.8)).abs() < 1e-15);
    }

    #[test]
    fn pgm_errors_carry_locations() {
        assert!(matches!(parse_pgm("P5\n1 1\n1\n0", "x"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(parse_pgm("P2\n1 1\n10\n\n11\n", "x"), Err(Error::Parse { line: 5, .. })));
        assert!(parse_pgm("P2\n2 2\n1\n0 1 1\n", "x").is_err());
    }

    #[test]
    fn air_outside_patient_is_filled() {
        // dark ring touching the border around a bright body with a dark lung inside
        #[rustfmt::skip]
        let px = vec![
            0.0, 0.0, 0.0, 0.0, 0.0,
            0.0, 0.6, 0.6, 0.6, 0.0,
            0.0, 0.6, 0.0, 0.6, 0.0,
            0.0, 0.6, 0.6, 0.6, 0.0,
            0.0, 0.0, 0.0, 0.0, 0.0,
        ];
        let img = GrayImage::new(5, 5, px).unwrap();
        let rho = ct_to_density(&img, RHO_BONE, RHO_MIN, Some((0.01, 1.0))).unwrap();
        assert_eq!(rho[0], 1.0); // corner air
        assert!((rho[2 * 5 + 2] - 0.05).abs() < 1e-15); // enclosed lung keeps its density
        let without = ct_to_density(&img, RHO_BONE, RHO_MIN, None).unwrap();
        assert!((without[0] - 0.05).abs() < 1e-15);
    }

    #[test]
    fn density_csv_layout() {
        let (nx, ny, v) = parse_density_csv("# rows are x\n1,2,3\n4,5,6\n", "d.csv").unwrap();
        assert_eq!((nx, ny), (2, 3));
        assert_eq!(v, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        assert!(parse_density_csv("1,2\n3\n", "d.csv").is_err());
    }
}
