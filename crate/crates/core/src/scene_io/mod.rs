//! Scene loading and the on-disk exchange formats.

mod camera_file;
mod pfm;
mod ply;

use std::path::{Path, PathBuf};

pub use camera_file::{format_cameras, parse_cameras, read_cameras, write_cameras, CameraEntry};
pub use pfm::{
    decode_pfm, encode_pfm, read_depth_map, read_normal_map, read_pfm, write_depth_map, write_normal_map,
    write_pfm, PfmImage, INVALID_DEPTH,
};
pub use ply::{decode_ply, encode_ply, read_point_cloud, write_point_cloud};

use crate::camera::CameraModel;
use crate::error::IoError;
use crate::raster::{DepthMapBuffer, GrayImage};

/// Conventional file names inside a scene directory.
pub const CAMERA_FILE: &str = "cameras.txt";
pub const IMAGE_DIR: &str = "images";
pub const MONO_DEPTH_DIR: &str = "mono_depth";

/// Cameras with their luminance images and (for export) RGB pixels.
#[derive(Debug, Clone)]
pub struct Scene {
    pub names: Vec<String>,
    pub cameras: Vec<CameraModel>,
    pub images: Vec<GrayImage>,
    pub colors: Vec<Option<Vec<[u8; 3]>>>,
}

impl Scene {
    pub fn len(&self) -> usize {
        self.cameras.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cameras.is_empty()
    }

    /// Loads `<dir>/cameras.txt` and `<dir>/images/`.
    pub fn load_dir(dir: &Path) -> Result<Self, IoError> {
        load_scene(&dir.join(CAMERA_FILE), &dir.join(IMAGE_DIR))
    }
}

/// ITU-R 601 luma of an 8-bit RGB triple, in `[0, 1]`.
pub fn luminance(rgb: [u8; 3]) -> f32 {
    let [r, g, b] = rgb.map(|c| c as f64 / 255.0);
    (0.299 * r + 0.587 * g + 0.114 * b).clamp(0.0, 1.0) as f32
}

/// Reads an 8-bit PNG/PPM/PGM and returns the luminance image and RGB pixels.
pub fn read_image(path: &Path) -> Result<(GrayImage, Vec<[u8; 3]>), IoError> {
    let img = image::open(path).map_err(|e| IoError::Image {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    let rgb = img.to_rgb8();
    let (w, h) = rgb.dimensions();
    let pixels: Vec<[u8; 3]> = rgb.pixels().map(|p| p.0).collect();
    let values = pixels.iter().map(|&p| luminance(p)).collect();
    let gray = GrayImage::new(w as usize, h as usize, values).map_err(|message| IoError::Image {
        path: path.to_path_buf(),
        message,
    })?;
    Ok((gray, pixels))
}

/// Writes a luminance image as 8-bit grayscale PNG.
pub fn write_gray_png(img: &GrayImage, path: &Path) -> Result<(), IoError> {
    let bytes: Vec<u8> = img.values().iter().map(|v| (v * 255.0).round() as u8).collect();
    image::save_buffer(
        path,
        &bytes,
        img.width() as u32,
        img.height() as u32,
        image::ExtendedColorType::L8,
    )
    .map_err(|e| IoError::Image {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

pub fn write_rgb_png(width: usize, height: usize, pixels: &[[u8; 3]], path: &Path) -> Result<(), IoError> {
    let bytes: Vec<u8> = pixels.iter().flatten().copied().collect();
    image::save_buffer(path, &bytes, width as u32, height as u32, image::ExtendedColorType::Rgb8).map_err(|e| {
        IoError::Image {
            path: path.to_path_buf(),
            message: e.to_string(),
        }
    })
}

/// Loads every camera in `camera_file` and the image it names from `image_dir`.
pub fn load_scene(camera_file: &Path, image_dir: &Path) -> Result<Scene, IoError> {
    let entries = read_cameras(camera_file)?;
    if entries.is_empty() {
        return Err(IoError::Mismatch(format!("{} lists no cameras", camera_file.display())));
    }
    let mut scene = Scene {
        names: Vec::with_capacity(entries.len()),
        cameras: Vec::with_capacity(entries.len()),
        images: Vec::with_capacity(entries.len()),
        colors: Vec::with_capacity(entries.len()),
    };
    for (index, entry) in entries.into_iter().enumerate() {
        let path = image_dir.join(&entry.name);
        if !path.is_file() {
            return Err(IoError::Mismatch(format!(
                "camera {index} names image {} which does not exist",
                path.display()
            )));
        }
        let (gray, rgb) = read_image(&path)?;
        if gray.width() != entry.camera.width || gray.height() != entry.camera.height {
            return Err(IoError::Mismatch(format!(
                "camera {index}: image {} is {}x{}, camera says {}x{}",
                entry.name,
                gray.width(),
                gray.height(),
                entry.camera.width,
                entry.camera.height
            )));
        }
        scene.names.push(entry.name);
        scene.cameras.push(entry.camera);
        scene.images.push(gray);
        scene.colors.push(Some(rgb));
    }
    Ok(scene)
}

/// Path of the monocular prior for an image: same stem, `.pfm` extension.
pub fn mono_depth_path(dir: &Path, image_name: &str) -> PathBuf {
    let stem = Path::new(image_name)
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| image_name.to_string());
    dir.join(format!("{stem}.pfm"))
}

/// Loads one monocular depth map per view, checking dimensions.
pub fn load_mono_depths(dir: &Path, scene: &Scene) -> Result<Vec<DepthMapBuffer>, IoError> {
    scene
        .names
        .iter()
        .zip(&scene.cameras)
        .enumerate()
        .map(|(index, (name, cam))| {
            let path = mono_depth_path(dir, name);
            if !path.is_file() {
                return Err(IoError::Mismatch(format!(
                    "view {index} ({name}): monocular depth {} is missing",
                    path.display()
                )));
            }
            let depth = read_depth_map(&path)?;
            if depth.width() != cam.width || depth.height() != cam.height {
                return Err(IoError::Mismatch(format!(
                    "view {index} ({name}): monocular depth is {}x{}, image is {}x{}",
                    depth.width(),
                    depth.height(),
                    cam.width,
                    cam.height
                )));
            }
            Ok(depth)
        })
        .collect()
}
