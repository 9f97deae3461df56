//! Portable Float Map reading and writing.
//!
//! Files are written little-endian (scale `-1.0`) with bottom-up scanlines.
//! Invalid depth is stored as `-1.0`. Big-endian files (positive scale) are
//! accepted on read.

use std::fs;
use std::path::Path;

use crate::error::IoError;
use crate::raster::{DepthMapBuffer, NormalMap};

pub const INVALID_DEPTH: f32 = -1.0;

/// Raw decoded PFM: row-major top-down, `channels` interleaved values per pixel.
#[derive(Debug, Clone, PartialEq)]
pub struct PfmImage {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    pub data: Vec<f32>,
}

fn header_err(path: &Path, message: impl Into<String>) -> IoError {
    IoError::Header {
        format: "PFM",
        path: path.to_path_buf(),
        message: message.into(),
    }
}

/// Splits off the next whitespace-delimited ASCII token.
fn next_token<'a>(bytes: &'a [u8], pos: &mut usize) -> Option<&'a [u8]> {
    while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
        *pos += 1;
    }
    let start = *pos;
    while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() {
        *pos += 1;
    }
    (start < *pos).then(|| &bytes[start..*pos])
}

pub fn decode_pfm(bytes: &[u8], path: &Path) -> Result<PfmImage, IoError> {
    let mut pos = 0;
    let magic = next_token(bytes, &mut pos).ok_or_else(|| header_err(path, "empty file"))?;
    let channels = match magic {
        b"Pf" => 1,
        b"PF" => 3,
        other => {
            return Err(header_err(
                path,
                format!("bad magic {:?}", String::from_utf8_lossy(other)),
            ))
        }
    };
    let mut number = |what: &str| -> Result<String, IoError> {
        let tok = next_token(bytes, &mut pos).ok_or_else(|| header_err(path, format!("missing {what}")))?;
        Ok(String::from_utf8_lossy(tok).into_owned())
    };
    let width: usize = number("width")?
        .parse()
        .map_err(|_| header_err(path, "width is not an integer"))?;
    let height: usize = number("height")?
        .parse()
        .map_err(|_| header_err(path, "height is not an integer"))?;
    let scale: f32 = number("scale")?
        .parse()
        .map_err(|_| header_err(path, "scale is not a number"))?;
    if scale == 0.0 || !scale.is_finite() {
        return Err(header_err(path, "scale must be finite and non-zero"));
    }
    // Exactly one whitespace byte separates the header from the payload.
    if pos >= bytes.len() || !bytes[pos].is_ascii_whitespace() {
        return Err(header_err(path, "header not terminated"));
    }
    pos += 1;
    let count = width
        .checked_mul(height)
        .and_then(|n| n.checked_mul(channels))
        .filter(|_| width > 0 && height > 0);
    let Some(count) = count else {
        return Err(IoError::Dimensions {
            path: path.to_path_buf(),
            width,
            height,
        });
    };
    let payload = &bytes[pos..];
    if count.checked_mul(4).is_none_or(|n| payload.len() < n) {
        return Err(IoError::Dimensions {
            path: path.to_path_buf(),
            width,
            height,
        });
    }
    let little = scale < 0.0;
    let mut data = vec![0f32; count];
    let row_len = width * channels;
    for (file_row, chunk) in payload[..count * 4].chunks_exact(row_len * 4).enumerate() {
        let y = height - 1 - file_row;
        for (k, b) in chunk.chunks_exact(4).enumerate() {
            let raw = [b[0], b[1], b[2], b[3]];
            data[y * row_len + k] = if little {
                f32::from_le_bytes(raw)
            } else {
                f32::from_be_bytes(raw)
            };
        }
    }
    Ok(PfmImage {
        width,
        height,
        channels,
        data,
    })
}

pub fn encode_pfm(img: &PfmImage) -> Vec<u8> {
    let magic = if img.channels == 3 { "PF" } else { "Pf" };
    let mut out = format!("{magic}\n{} {}\n-1.0\n", img.width, img.height).into_bytes();
    out.reserve(img.data.len() * 4);
    let row_len = img.width * img.channels;
    for y in (0..img.height).rev() {
        for v in &img.data[y * row_len..(y + 1) * row_len] {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn read_pfm(path: &Path) -> Result<PfmImage, IoError> {
    let bytes = fs::read(path).map_err(|e| IoError::io(path, e))?;
    decode_pfm(&bytes, path)
}

pub fn write_pfm(img: &PfmImage, path: &Path) -> Result<(), IoError> {
    fs::write(path, encode_pfm(img)).map_err(|e| IoError::io(path, e))
}

/// Reads a single-channel depth PFM. Finite values `>= 0` are valid, so
/// both metric and normalised relative depth load unchanged; the `-1.0`
/// marker (or any negative / non-finite value) becomes invalid.
pub fn read_depth_map(path: &Path) -> Result<DepthMapBuffer, IoError> {
    let img = read_pfm(path)?;
    if img.channels != 1 {
        return Err(header_err(path, "expected a single-channel (Pf) map"));
    }
    Ok(DepthMapBuffer::from_relative(img.width, img.height, img.data))
}

pub fn write_depth_map(buffer: &DepthMapBuffer, path: &Path) -> Result<(), IoError> {
    let data = buffer
        .values()
        .iter()
        .zip(buffer.valid_mask())
        .map(|(v, ok)| if *ok { *v } else { INVALID_DEPTH })
        .collect();
    write_pfm(
        &PfmImage {
            width: buffer.width(),
            height: buffer.height(),
            channels: 1,
            data,
        },
        path,
    )
}

pub fn write_normal_map(normals: &NormalMap, path: &Path) -> Result<(), IoError> {
    write_pfm(
        &PfmImage {
            width: normals.width(),
            height: normals.height(),
            channels: 3,
            data: normals.values().iter().flatten().copied().collect(),
        },
        path,
    )
}

pub fn read_normal_map(path: &Path) -> Result<NormalMap, IoError> {
    let img = read_pfm(path)?;
    if img.channels != 3 {
        return Err(header_err(path, "expected a three-channel (PF) map"));
    }
    let values = img.data.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect();
    Ok(NormalMap::from_values(img.width, img.height, values))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn roundtrip(buf: &DepthMapBuffer) -> DepthMapBuffer {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.pfm");
        write_depth_map(buf, &path).unwrap();
        read_depth_map(&path).unwrap()
    }

    #[test]
    fn small_buffer_with_invalid_pixel() {
        let buf = DepthMapBuffer::with_mask(2, 2, vec![1.0, 2.0, 3.0, 0.0], vec![true, true, true, false]);
        let back = roundtrip(&buf);
        assert_eq!(back, buf);
        assert_eq!(back.get(1, 1), None);
        assert_eq!(back.get(0, 1), Some(3.0));
    }

    #[test]
    fn all_invalid_roundtrip() {
        let buf = DepthMapBuffer::invalid(5, 3);
        assert_eq!(roundtrip(&buf).valid_count(), 0);
    }

    #[test]
    fn large_random_buffer_is_bit_exact() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let values: Vec<f32> = (0..640 * 480).map(|_| rng.gen_range(0.5f32..10.0)).collect();
        let buf = DepthMapBuffer::from_values(640, 480, values.clone());
        let back = roundtrip(&buf);
        let diff = values
            .iter()
            .zip(back.values())
            .filter(|(a, b)| a.to_bits() != b.to_bits())
            .count();
        assert_eq!(diff, 0);
    }

    #[test]
    fn scanlines_are_bottom_up() {
        let buf = DepthMapBuffer::from_values(1, 2, vec![1.0, 2.0]);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.pfm");
        write_depth_map(&buf, &path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        let payload = &bytes[bytes.len() - 8..];
        assert_eq!(f32::from_le_bytes(payload[..4].try_into().unwrap()), 2.0);
    }

    #[test]
    fn malformed_headers_are_errors() {
        let p = Path::new("x.pfm");
        assert!(matches!(decode_pfm(b"P6\n1 1\n-1\n", p), Err(IoError::Header { .. })));
        assert!(matches!(decode_pfm(b"Pf\n1\n", p), Err(IoError::Header { .. })));
        assert!(matches!(decode_pfm(b"Pf\n2 2\n0\n", p), Err(IoError::Header { .. })));
        assert!(matches!(decode_pfm(b"Pf\n2 2\n-1.0\n\0\0\0\0", p), Err(IoError::Dimensions { .. })));
        let huge = format!("Pf\n{} {}\n-1.0\n", usize::MAX / 2, 3);
        assert!(matches!(decode_pfm(huge.as_bytes(), p), Err(IoError::Dimensions { .. })));
        assert!(decode_pfm(b"", p).is_err());
    }

    #[test]
    fn big_endian_files_are_read() {
        let mut bytes = b"Pf\n1 1\n1.0\n".to_vec();
        bytes.extend_from_slice(&3.5f32.to_be_bytes());
        let img = decode_pfm(&bytes, Path::new("x")).unwrap();
        assert_eq!(img.data, vec![3.5]);
    }

    #[test]
    fn normal_map_roundtrip() {
        let mut n = NormalMap::new(3, 2);
        n.set(1, 1, &nalgebra::Vector3::new(0.0, 0.6, -0.8));
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("n.pfm");
        write_normal_map(&n, &path).unwrap();
        assert_eq!(read_normal_map(&path).unwrap(), n);
    }

    proptest::proptest! {
        #[test]
        fn encode_decode_identity(w in 1usize..9, h in 1usize..9, seed in 0u64..1000) {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let data: Vec<f32> = (0..w * h).map(|_| if rng.gen_bool(0.2) { INVALID_DEPTH } else { rng.gen_range(0.0f32..100.0) }).collect();
            let img = PfmImage { width: w, height: h, channels: 1, data };
            let back = decode_pfm(&encode_pfm(&img), Path::new("p")).unwrap();
            proptest::prop_assert_eq!(back, img);
        }
    }
}
