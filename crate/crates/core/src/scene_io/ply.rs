//! Binary little-endian PLY with per-vertex position, normal and optional colour.

use std::fs;
use std::path::Path;

use crate::cloud::{CloudPoint, PointCloud};
use crate::error::IoError;

fn header_err(path: &Path, message: impl Into<String>) -> IoError {
    IoError::Header {
        format: "PLY",
        path: path.to_path_buf(),
        message: message.into(),
    }
}

pub fn encode_ply(cloud: &PointCloud) -> Vec<u8> {
    let color = cloud.has_color();
    let mut header = String::from("ply\nformat binary_little_endian 1.0\ncomment written by deform-mvs\n");
    header.push_str(&format!("element vertex {}\n", cloud.len()));
    for name in ["x", "y", "z", "nx", "ny", "nz"] {
        header.push_str(&format!("property float {name}\n"));
    }
    if color {
        for name in ["red", "green", "blue"] {
            header.push_str(&format!("property uchar {name}\n"));
        }
    }
    header.push_str("end_header\n");
    let stride = if color { 27 } else { 24 };
    let mut out = header.into_bytes();
    out.reserve(cloud.len() * stride);
    for p in &cloud.points {
        for v in p.position.iter().chain(&p.normal) {
            out.extend_from_slice(&v.to_le_bytes());
        }
        if color {
            out.extend_from_slice(&p.color.unwrap_or_default());
        }
    }
    out
}

pub fn write_point_cloud(cloud: &PointCloud, path: &Path) -> Result<(), IoError> {
    fs::write(path, encode_ply(cloud)).map_err(|e| IoError::io(path, e))
}

/// Reads the layout produced by [`write_point_cloud`].
pub fn decode_ply(bytes: &[u8], path: &Path) -> Result<PointCloud, IoError> {
    const END: &[u8] = b"end_header\n";
    let end = bytes
        .windows(END.len())
        .position(|w| w == END)
        .ok_or_else(|| header_err(path, "missing end_header"))?;
    let header = std::str::from_utf8(&bytes[..end]).map_err(|_| header_err(path, "header is not UTF-8"))?;
    let mut lines = header.lines();
    if lines.next() != Some("ply") {
        return Err(header_err(path, "missing 'ply' magic"));
    }
    let mut count = None;
    let mut props = Vec::new();
    let mut format_ok = false;
    for line in lines {
        let toks: Vec<&str> = line.split_whitespace().collect();
        match toks.as_slice() {
            ["format", "binary_little_endian", "1.0"] => format_ok = true,
            ["format", other, ..] => return Err(header_err(path, format!("unsupported format {other}"))),
            ["comment", ..] | [] => {}
            ["element", "vertex", n] => {
                count = Some(n.parse::<usize>().map_err(|_| header_err(path, "bad vertex count"))?)
            }
            ["element", other, ..] => return Err(header_err(path, format!("unsupported element {other}"))),
            ["property", ty, name] => props.push((ty.to_string(), name.to_string())),
            _ => return Err(header_err(path, format!("unexpected header line '{line}'"))),
        }
    }
    if !format_ok {
        return Err(header_err(path, "missing format line"));
    }
    let count = count.ok_or_else(|| header_err(path, "missing vertex element"))?;
    let names: Vec<&str> = props.iter().map(|(_, n)| n.as_str()).collect();
    let base = ["x", "y", "z", "nx", "ny", "nz"];
    let color = match names.as_slice() {
        n if n == base => false,
        n if n.len() == 9 && n[..6] == base && n[6..] == ["red", "green", "blue"] => true,
        _ => return Err(header_err(path, format!("unsupported vertex layout {names:?}"))),
    };
    let float_ok = props[..6].iter().all(|(t, _)| t == "float" || t == "float32");
    let uchar_ok = props[6..].iter().all(|(t, _)| t == "uchar" || t == "uint8");
    if !(float_ok && uchar_ok) {
        return Err(header_err(path, "unsupported property types"));
    }
    let stride = if color { 27 } else { 24 };
    let payload = &bytes[end + END.len()..];
    if count.checked_mul(stride).is_none_or(|n| payload.len() < n) {
        return Err(header_err(path, "payload shorter than vertex count"));
    }
    let f = |b: &[u8], i: usize| f32::from_le_bytes([b[4 * i], b[4 * i + 1], b[4 * i + 2], b[4 * i + 3]]);
    let points = payload
        .chunks_exact(stride)
        .take(count)
        .map(|b| CloudPoint {
            position: [f(b, 0), f(b, 1), f(b, 2)],
            normal: [f(b, 3), f(b, 4), f(b, 5)],
            color: color.then(|| [b[24], b[25], b[26]]),
        })
        .collect();
    Ok(PointCloud { points })
}

pub fn read_point_cloud(path: &Path) -> Result<PointCloud, IoError> {
    let bytes = fs::read(path).map_err(|e| IoError::io(path, e))?;
    decode_ply(&bytes, path)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pt(x: f32, c: Option<[u8; 3]>) -> CloudPoint {
        CloudPoint {
            position: [x, -x * 0.5, 3.25 + x],
            normal: [0.0, 0.6, -0.8],
            color: c,
        }
    }

    #[test]
    fn empty_cloud_has_zero_vertices() {
        let bytes = encode_ply(&PointCloud::default());
        let text = String::from_utf8_lossy(&bytes);
        assert!(text.contains("element vertex 0\n"));
        assert!(decode_ply(&bytes, Path::new("e")).unwrap().is_empty());
    }

    #[test]
    fn three_points_roundtrip() {
        let cloud = PointCloud::new(vec![pt(0.1, None), pt(1.0 / 3.0, None), pt(-7.75, None)]);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.ply");
        write_point_cloud(&cloud, &path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        assert!(String::from_utf8_lossy(&bytes).contains("element vertex 3\n"));
        assert_eq!(read_point_cloud(&path).unwrap(), cloud);
    }

    #[test]
    fn colored_roundtrip() {
        let cloud = PointCloud::new(vec![pt(1.0, Some([1, 2, 3])), pt(2.0, Some([250, 0, 9]))]);
        assert_eq!(decode_ply(&encode_ply(&cloud), Path::new("c")).unwrap(), cloud);
    }

    #[test]
    fn truncated_payload_is_an_error() {
        let mut bytes = encode_ply(&PointCloud::new(vec![pt(1.0, None)]));
        bytes.truncate(bytes.len() - 3);
        assert!(decode_ply(&bytes, Path::new("t")).is_err());
        assert!(decode_ply(b"ply\nformat ascii 1.0\nend_header\n", Path::new("t")).is_err());
    }
}
