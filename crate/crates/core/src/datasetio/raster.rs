//! PFM float rasters and PPM/PGM 8-bit images.
//!
//! Rasters are row-major with row 0 at the top. PFM stores rows bottom to
//! top; a negative scale means little-endian samples.

use std::path::Path;

use crate::error::{Error, Result};

/// Decoded float raster.
#[derive(Clone, Debug, PartialEq)]
pub struct Raster {
    pub width: usize,
    pub height: usize,
    /// 1 for "Pf", 3 for "PF".
    pub channels: usize,
    pub data: Vec<f32>,
}

impl Raster {
    pub fn gray(width: usize, height: usize, data: Vec<f32>) -> Self {
        Raster {
            width,
            height,
            channels: 1,
            data,
        }
    }
}

pub fn encode_pfm(r: &Raster) -> Result<Vec<u8>> {
    let magic = match r.channels {
        1 => "Pf",
        3 => "PF",
        c => return Err(Error::format("PFM", format!("unsupported channel count {c}"))),
    };
    if r.data.len() != r.width * r.height * r.channels {
        return Err(Error::DimensionMismatch {
            expected: (r.width, r.height),
            got: (r.data.len() / r.channels.max(1), 1),
        });
    }
    let header = format!("{magic}\n{} {}\n-1.0\n", r.width, r.height);
    let mut out = Vec::with_capacity(header.len() + r.data.len() * 4);
    out.extend_from_slice(header.as_bytes());
    let row = r.width * r.channels;
    for v in (0..r.height).rev() {
        for x in &r.data[v * row..(v + 1) * row] {
            out.extend_from_slice(&x.to_le_bytes());
        }
    }
    Ok(out)
}

/// Splits off `n` whitespace-separated header tokens; the payload starts
/// after the single whitespace byte following the last one.
fn header_tokens(bytes: &[u8], n: usize) -> Result<(Vec<String>, usize)> {
    let mut tokens = Vec::with_capacity(n);
    let mut i = 0;
    while tokens.len() < n {
        while i < bytes.len() && bytes[i].is_ascii_whitespace() {
            i += 1;
        }
        let start = i;
        while i < bytes.len() && !bytes[i].is_ascii_whitespace() {
            i += 1;
        }
        if start == i {
            return Err(Error::format("header", "truncated header"));
        }
        tokens.push(String::from_utf8_lossy(&bytes[start..i]).into_owned());
    }
    if i >= bytes.len() {
        return Err(Error::format("header", "missing payload"));
    }
    Ok((tokens, i + 1))
}

fn parse_dim(s: &str, fmt: &'static str) -> Result<usize> {
    s.parse::<usize>()
        .ok()
        .filter(|&d| d > 0)
        .ok_or_else(|| Error::format(fmt, format!("bad dimension {s:?}")))
}

pub fn decode_pfm(bytes: &[u8]) -> Result<Raster> {
    let (tok, start) = header_tokens(bytes, 4).map_err(|_| Error::format("PFM", "malformed header"))?;
    let channels = match tok[0].as_str() {
        "Pf" => 1,
        "PF" => 3,
        m => return Err(Error::format("PFM", format!("bad magic {m:?}"))),
    };
    let width = parse_dim(&tok[1], "PFM")?;
    let height = parse_dim(&tok[2], "PFM")?;
    let scale: f64 = tok[3]
        .parse()
        .map_err(|_| Error::format("PFM", format!("bad scale {:?}", tok[3])))?;
    if scale == 0.0 || !scale.is_finite() {
        return Err(Error::format("PFM", "scale must be non-zero"));
    }
    let little = scale < 0.0;
    let n = width * height * channels;
    let payload = &bytes[start..];
    if payload.len() != n * 4 {
        return Err(Error::format("PFM", format!("payload has {} bytes, expected {}", payload.len(), n * 4)));
    }
    let row = width * channels;
    let mut data = vec![0f32; n];
    for (k, chunk) in payload.chunks_exact(4).enumerate() {
        let b = [chunk[0], chunk[1], chunk[2], chunk[3]];
        let x = if little { f32::from_le_bytes(b) } else { f32::from_be_bytes(b) };
        let (file_row, col) = (k / row, k % row);
        data[(height - 1 - file_row) * row + col] = x;
    }
    Ok(Raster {
        width,
        height,
        channels,
        data,
    })
}

pub fn write_pfm(path: &Path, r: &Raster) -> Result<()> {
    std::fs::write(path, encode_pfm(r)?).map_err(|e| Error::io(path, e))
}

pub fn read_pfm(path: &Path) -> Result<Raster> {
    decode_pfm(&std::fs::read(path).map_err(|e| Error::io(path, e))?)
}

/// Grayscale float raster to disk.
pub fn write_raster(path: &Path, width: usize, height: usize, values: &[f32]) -> Result<()> {
    write_pfm(path, &Raster::gray(width, height, values.to_vec()))
}

/// Grayscale float raster from disk.
pub fn read_raster(path: &Path) -> Result<Raster> {
    let r = read_pfm(path)?;
    if r.channels != 1 {
        return Err(Error::format("PFM", "expected a grayscale raster"));
    }
    Ok(r)
}

/// 8-bit image, `channels` 1 (PGM) or 3 (PPM).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Image8 {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    pub data: Vec<u8>,
}

pub fn quantize_rgb(rgb: &[[f32; 3]]) -> Vec<u8> {
    rgb.iter()
        .flat_map(|c| c.map(|x| (x.clamp(0.0, 1.0) * 255.0).round() as u8))
        .collect()
}

pub fn encode_pnm(img: &Image8) -> Result<Vec<u8>> {
    let magic = match img.channels {
        1 => "P5",
        3 => "P6",
        c => return Err(Error::format("PNM", format!("unsupported channel count {c}"))),
    };
    if img.data.len() != img.width * img.height * img.channels {
        return Err(Error::format("PNM", "payload size does not match dimensions"));
    }
    let mut out = format!("{magic}\n{} {}\n255\n", img.width, img.height).into_bytes();
    out.extend_from_slice(&img.data);
    Ok(out)
}

pub fn decode_pnm(bytes: &[u8]) -> Result<Image8> {
    let (tok, start) = header_tokens(bytes, 4).map_err(|_| Error::format("PNM", "malformed header"))?;
    let channels = match tok[0].as_str() {
        "P5" => 1,
        "P6" => 3,
        m => return Err(Error::format("PNM", format!("bad magic {m:?}"))),
    };
    let width = parse_dim(&tok[1], "PNM")?;
    let height = parse_dim(&tok[2], "PNM")?;
    if tok[3] != "255" {
        return Err(Error::format("PNM", "only maxval 255 is supported"));
    }
    let data = bytes[start..].to_vec();
    if data.len() != width * height * channels {
        return Err(Error::format("PNM", "truncated payload"));
    }
    Ok(Image8 {
        width,
        height,
        channels,
        data,
    })
}

pub fn write_pnm(path: &Path, img: &Image8) -> Result<()> {
    std::fs::write(path, encode_pnm(img)?).map_err(|e| Error::io(path, e))
}

pub fn read_pnm(path: &Path) -> Result<Image8> {
    decode_pnm(&std::fs::read(path).map_err(|e| Error::io(path, e))?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_bit_exact() {
        let vals = vec![1.0f32, -83.33, f32::NAN, 0.0];
        let r = Raster::gray(2, 2, vals.clone());
        let back = decode_pfm(&encode_pfm(&r).unwrap()).unwrap();
        let bits = |v: &[f32]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&back.data), bits(&vals));
        assert_eq!((back.width, back.height, back.channels), (2, 2, 1));
    }

    #[test]
    fn header_and_row_order() {
        let r = Raster::gray(640, 480, vec![0.0; 640 * 480]);
        let b = encode_pfm(&r).unwrap();
        assert!(b.starts_with(b"Pf\n640 480\n-1.0\n"));
        let r = Raster::gray(1, 2, vec![1.0, 2.0]);
        let b = encode_pfm(&r).unwrap();
        let payload = &b[b.len() - 8..];
        // Bottom row first.
        assert_eq!(&payload[..4], &2.0f32.to_le_bytes());
        assert_eq!(&payload[4..], &1.0f32.to_le_bytes());
    }

    #[test]
    fn big_endian_fixture() {
        // 2×1 raster [0.5, -2.0], big-endian, built byte by byte.
        let mut b = b"Pf\n2 1\n1.0\n".to_vec();
        b.extend_from_slice(&[0x3f, 0x00, 0x00, 0x00, 0xc0, 0x00, 0x00, 0x00]);
        let r = decode_pfm(&b).unwrap();
        assert_eq!(r.data, vec![0.5, -2.0]);
    }

    #[test]
    fn color_round_trip() {
        let r = Raster {
            width: 2,
            height: 1,
            channels: 3,
            data: vec![0.0, 0.6, 0.8, 1.0, 0.0, 0.0],
        };
        let b = encode_pfm(&r).unwrap();
        assert!(b.starts_with(b"PF\n2 1\n-1.0\n"));
        assert_eq!(decode_pfm(&b).unwrap(), r);
    }

    #[test]
    fn malformed() {
        assert!(decode_pfm(b"Pg\n1 1\n-1.0\n\0\0\0\0").is_err());
        assert!(decode_pfm(b"Pf\n1 1\n0.0\n\0\0\0\0").is_err());
        assert!(decode_pfm(b"Pf\n2 1\n-1.0\n\0\0\0\0").is_err());
        assert!(decode_pfm(b"Pf\n1").is_err());
        assert!(decode_pfm(b"Pf\n0 1\n-1.0\n").is_err());
    }

    #[test]
    fn pnm_round_trip() {
        let img = Image8 {
            width: 2,
            height: 1,
            channels: 3,
            data: quantize_rgb(&[[0.0, 0.5, 1.0], [2.0, -1.0, 0.25]]),
        };
        assert_eq!(img.data, vec![0, 128, 255, 255, 0, 64]);
        let b = encode_pnm(&img).unwrap();
        assert!(b.starts_with(b"P6\n2 1\n255\n"));
        assert_eq!(decode_pnm(&b).unwrap(), img);
        let g = Image8 { width: 1, height: 1, channels: 1, data: vec![255] };
        assert_eq!(decode_pnm(&encode_pnm(&g).unwrap()).unwrap(), g);
        assert!(decode_pnm(b"P6\n1 1\n255\n\0").is_err());
    }
}
