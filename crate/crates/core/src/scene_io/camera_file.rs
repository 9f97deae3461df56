//! Plain-text camera file.
//!
//! One camera per non-empty line; `#` starts a comment. Each line holds the
//! image name followed by 23 numbers: K (9, row-major), R (9, row-major),
//! T (3), width, height.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::{Matrix3, Vector3};

use crate::camera::CameraModel;
use crate::error::IoError;

/// A camera entry together with the image it refers to.
#[derive(Debug, Clone, PartialEq)]
pub struct CameraEntry {
    pub name: String,
    pub camera: CameraModel,
}

pub fn parse_cameras(text: &str, path: &Path) -> Result<Vec<CameraEntry>, IoError> {
    let mut entries = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let parse_err = |message: String| IoError::CameraParse {
            path: path.to_path_buf(),
            line: lineno + 1,
            message,
        };
        let mut toks = line.split_whitespace();
        let name = toks.next().expect("non-empty line").to_string();
        let rest: Vec<&str> = toks.collect();
        if rest.len() != 23 {
            return Err(parse_err(format!("expected 23 numbers after the image name, found {}", rest.len())));
        }
        let mut nums = [0f64; 21];
        for (slot, tok) in nums.iter_mut().zip(&rest[..21]) {
            *slot = tok
                .parse()
                .map_err(|_| parse_err(format!("'{tok}' is not a number")))?;
        }
        let dim = |tok: &str| {
            tok.parse::<usize>()
                .map_err(|_| parse_err(format!("'{tok}' is not an image dimension")))
        };
        let width = dim(rest[21])?;
        let height = dim(rest[22])?;
        let k = Matrix3::from_row_slice(&nums[0..9]);
        let r = Matrix3::from_row_slice(&nums[9..18]);
        let t = Vector3::new(nums[18], nums[19], nums[20]);
        let camera = CameraModel::new(k, r, t, width, height).map_err(|message| IoError::InvalidCamera {
            index: entries.len(),
            name: name.clone(),
            message,
        })?;
        entries.push(CameraEntry { name, camera });
    }
    Ok(entries)
}

pub fn read_cameras(path: &Path) -> Result<Vec<CameraEntry>, IoError> {
    let text = fs::read_to_string(path).map_err(|e| IoError::io(path, e))?;
    parse_cameras(&text, path)
}

/// Formats entries with round-trip precision (`{:?}` on `f64` is shortest-exact).
pub fn format_cameras(entries: &[CameraEntry]) -> String {
    let mut out = String::from("# name K(9) R(9) T(3) width height\n");
    for e in entries {
        let c = &e.camera;
        out.push_str(&e.name);
        let rows = |m: Matrix3<f64>| (0..3).flat_map(move |i| (0..3).map(move |j| m[(i, j)]));
        for v in rows(c.k).chain(rows(c.r)).chain(c.t.iter().copied()) {
            let _ = write!(out, " {v:?}");
        }
        let _ = writeln!(out, " {} {}", c.width, c.height);
    }
    out
}

pub fn write_cameras(entries: &[CameraEntry], path: &Path) -> Result<(), IoError> {
    fs::write(path, format_cameras(entries)).map_err(|e| IoError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn identity_line(name: &str) -> String {
        format!("{name} 500 0 320 0 500 240 0 0 1  1 0 0 0 1 0 0 0 1  0 0 0  640 480")
    }

    #[test]
    fn identity_camera_roundtrips() {
        let p = Path::new("cams.txt");
        let entries = parse_cameras(&identity_line("a.png"), p).unwrap();
        assert_eq!(entries.len(), 1);
        assert_eq!(entries[0].camera.r, Matrix3::identity());
        assert_eq!(entries[0].camera.k[(0, 2)], 320.0);
        let again = parse_cameras(&format_cameras(&entries), p).unwrap();
        assert_eq!(again, entries);
    }

    #[test]
    fn non_orthonormal_rotation_names_camera() {
        let text = "a.png 500 0 320 0 500 240 0 0 1  2 0 0 0 1 0 0 0 1  0 0 0  640 480";
        match parse_cameras(text, Path::new("c")) {
            Err(IoError::InvalidCamera { index, .. }) => assert_eq!(index, 0),
            other => panic!("unexpected {other:?}"),
        }
        let two = format!("{}\n{}", identity_line("a"), text.replacen("a.png", "b.png", 1));
        match parse_cameras(&two, Path::new("c")) {
            Err(IoError::InvalidCamera { index, name, .. }) => {
                assert_eq!(index, 1);
                assert_eq!(name, "b.png");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn malformed_lines_report_line_number() {
        let text = format!("# header\n{}\nb.png 1 2 3\n", identity_line("a"));
        match parse_cameras(&text, Path::new("c")) {
            Err(IoError::CameraParse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
        assert!(parse_cameras(&identity_line("a").replace("640", "x"), Path::new("c")).is_err());
        assert!(parse_cameras(&identity_line("a").replace("500 0 320", "nan 0 320"), Path::new("c")).is_err());
    }

    #[test]
    fn comments_and_blank_lines_are_skipped() {
        let text = format!("\n# c\n{}  # trailing\n\n", identity_line("a"));
        assert_eq!(parse_cameras(&text, Path::new("c")).unwrap().len(), 1);
    }
}
