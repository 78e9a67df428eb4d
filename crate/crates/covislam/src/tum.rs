//! TUM-RGBD directory ingestion and export.
//!
//! Layout: `rgb.txt`, `depth.txt`, `groundtruth.txt` index files plus the
//! image payloads. Color is 8-bit RGB PNG; depth is 16-bit PNG scaled by
//! 5000 per meter, zero meaning invalid. Ground-truth rows are
//! `t tx ty tz qx qy qz qw` camera-to-world; frames store the inverse
//! (world-to-camera).

use nalgebra::{Quaternion, UnitQuaternion, Vector3};
use splat_core::{ColorImage, DepthImage, Frame, Pose};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use thiserror::Error;

pub const ASSOCIATION_WINDOW_S: f64 = 0.02;
pub const DEPTH_SCALE: f64 = 5000.0;

#[derive(Debug, Error)]
pub enum TumError {
    #[error("missing index file {0}")]
    MissingIndex(PathBuf),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("image: {0}")]
    Image(#[from] image::ImageError),
    #[error("malformed line in {file}: '{line}'")]
    Malformed { file: String, line: String },
}

#[derive(Debug)]
pub struct TumLoad {
    pub frames: Vec<Frame>,
    /// Index rows dropped because no partner row fell inside the
    /// association window.
    pub skipped: usize,
}

fn parse_indexed(path: &Path) -> Result<Vec<(f64, Vec<String>)>, TumError> {
    if !path.exists() {
        return Err(TumError::MissingIndex(path.to_path_buf()));
    }
    let text = fs::read_to_string(path)?;
    let mut rows = Vec::new();
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut parts = line.split_whitespace();
        let t: f64 = parts
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| TumError::Malformed {
                file: path.display().to_string(),
                line: line.to_string(),
            })?;
        rows.push((t, parts.map(|s| s.to_string()).collect()));
    }
    rows.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(rows)
}

/// Nearest unused row within the window; rows must be sorted by timestamp.
fn associate(t: f64, rows: &[(f64, Vec<String>)], used: &mut [bool]) -> Option<usize> {
    let mut best: Option<(f64, usize)> = None;
    for (i, (rt, _)) in rows.iter().enumerate() {
        if used[i] {
            continue;
        }
        let dt = (rt - t).abs();
        if dt <= ASSOCIATION_WINDOW_S {
            let better = match best {
                None => true,
                Some((bd, _)) => dt < bd,
            };
            if better {
                best = Some((dt, i));
            }
        } else if *rt > t + ASSOCIATION_WINDOW_S {
            break;
        }
    }
    best.map(|(_, i)| {
        used[i] = true;
        i
    })
}

pub fn load_tum_rgbd(dir: &Path) -> Result<TumLoad, TumError> {
    let rgb_rows = parse_indexed(&dir.join("rgb.txt"))?;
    let depth_rows = parse_indexed(&dir.join("depth.txt"))?;
    let gt_rows = parse_indexed(&dir.join("groundtruth.txt"))?;
    let mut depth_used = vec![false; depth_rows.len()];
    let mut gt_used = vec![false; gt_rows.len()];
    let mut frames = Vec::new();
    let mut skipped = 0usize;

    for (t, payload) in &rgb_rows {
        let Some(di) = associate(*t, &depth_rows, &mut depth_used) else {
            skipped += 1;
            continue;
        };
        let Some(gi) = associate(*t, &gt_rows, &mut gt_used) else {
            skipped += 1;
            continue;
        };
        let rgb_path = dir.join(payload.first().ok_or_else(|| TumError::Malformed {
            file: "rgb.txt".into(),
            line: format!("{t}"),
        })?);
        let depth_path = dir.join(depth_rows[di].1.first().ok_or_else(|| TumError::Malformed {
            file: "depth.txt".into(),
            line: format!("{}", depth_rows[di].0),
        })?);

        let rgb = image::open(&rgb_path)?.to_rgb8();
        let (w, h) = (rgb.width() as usize, rgb.height() as usize);
        let mut color = ColorImage::new(w, h);
        for y in 0..h {
            for x in 0..w {
                let p = rgb.get_pixel(x as u32, y as u32);
                color.set(
                    x,
                    y,
                    Vector3::new(
                        p[0] as f64 / 255.0,
                        p[1] as f64 / 255.0,
                        p[2] as f64 / 255.0,
                    ),
                );
            }
        }
        let depth_png = image::open(&depth_path)?.to_luma16();
        let mut depth = DepthImage::new(w, h);
        for y in 0..h.min(depth_png.height() as usize) {
            for x in 0..w.min(depth_png.width() as usize) {
                let raw = depth_png.get_pixel(x as u32, y as u32)[0];
                depth.set(x, y, raw as f64 / DEPTH_SCALE);
            }
        }

        let g = &gt_rows[gi].1;
        if g.len() < 7 {
            return Err(TumError::Malformed {
                file: "groundtruth.txt".into(),
                line: g.join(" "),
            });
        }
        let vals: Vec<f64> = g.iter().take(7).filter_map(|s| s.parse().ok()).collect();
        if vals.len() < 7 {
            return Err(TumError::Malformed {
                file: "groundtruth.txt".into(),
                line: g.join(" "),
            });
        }
        let cam_to_world = Pose::new(
            UnitQuaternion::from_quaternion(Quaternion::new(vals[6], vals[3], vals[4], vals[5])),
            Vector3::new(vals[0], vals[1], vals[2]),
        );
        frames.push(Frame {
            id: frames.len() as u64,
            timestamp: *t,
            color,
            depth,
            gt_pose: Some(cam_to_world.inverse()),
        });
    }
    skipped += depth_used.iter().filter(|u| !**u).count();
    skipped += gt_used.iter().filter(|u| !**u).count();
    Ok(TumLoad { frames, skipped })
}

fn format_ts(t: f64) -> String {
    format!("{t:.6}")
}

/// Writes frames in the TUM-RGBD layout; re-exporting a loaded directory
/// reproduces it byte for byte (quantization is idempotent).
pub fn export_tum_rgbd(dir: &Path, frames: &[Frame]) -> Result<(), TumError> {
    fs::create_dir_all(dir.join("rgb"))?;
    fs::create_dir_all(dir.join("depth"))?;
    let mut rgb_idx = String::from("# color images\n# timestamp filename\n");
    let mut depth_idx = String::from("# depth images\n# timestamp filename\n");
    let mut gt_idx = String::from("# ground truth trajectory\n# timestamp tx ty tz qx qy qz qw\n");
    for frame in frames {
        let ts = format_ts(frame.timestamp);
        let rgb_name = format!("rgb/{ts}.png");
        let depth_name = format!("depth/{ts}.png");
        let w = frame.width() as u32;
        let h = frame.height() as u32;
        let mut rgb = image::RgbImage::new(w, h);
        for y in 0..h {
            for x in 0..w {
                let c = frame.color.get(x as usize, y as usize);
                rgb.put_pixel(
                    x,
                    y,
                    image::Rgb([
                        (c.x * 255.0).round().clamp(0.0, 255.0) as u8,
                        (c.y * 255.0).round().clamp(0.0, 255.0) as u8,
                        (c.z * 255.0).round().clamp(0.0, 255.0) as u8,
                    ]),
                );
            }
        }
        rgb.save(dir.join(&rgb_name))?;
        let mut depth = image::ImageBuffer::<image::Luma<u16>, Vec<u16>>::new(w, h);
        for y in 0..h {
            for x in 0..w {
                let d = frame.depth.get(x as usize, y as usize);
                let raw = if d.is_finite() && d > 0.0 {
                    (d * DEPTH_SCALE).round().clamp(0.0, u16::MAX as f64) as u16
                } else {
                    0
                };
                depth.put_pixel(x, y, image::Luma([raw]));
            }
        }
        depth.save(dir.join(&depth_name))?;
        let _ = writeln!(rgb_idx, "{ts} {rgb_name}");
        let _ = writeln!(depth_idx, "{ts} {depth_name}");
        if let Some(pose) = &frame.gt_pose {
            let c2w = pose.inverse();
            let q = c2w.rotation.quaternion();
            let t = c2w.translation;
            let _ = writeln!(
                gt_idx,
                "{ts} {} {} {} {} {} {} {}",
                t.x, t.y, t.z, q.i, q.j, q.k, q.w
            );
        }
    }
    fs::write(dir.join("rgb.txt"), rgb_idx)?;
    fs::write(dir.join("depth.txt"), depth_idx)?;
    fs::write(dir.join("groundtruth.txt"), gt_idx)?;
    Ok(())
}

/// Writes a trajectory in TUM ground-truth format (camera-to-world rows).
pub fn write_trajectory(path: &Path, stamps: &[f64], poses_w2c: &[Pose]) -> Result<(), TumError> {
    assert_eq!(stamps.len(), poses_w2c.len());
    let mut text = String::from("# trajectory\n# timestamp tx ty tz qx qy qz qw\n");
    for (t, pose) in stamps.iter().zip(poses_w2c) {
        let c2w = pose.inverse();
        let q = c2w.rotation.quaternion();
        let p = c2w.translation;
        let _ = writeln!(
            text,
            "{} {} {} {} {} {} {} {}",
            format_ts(*t),
            p.x,
            p.y,
            p.z,
            q.i,
            q.j,
            q.k,
            q.w
        );
    }
    fs::write(path, text)?;
    Ok(())
}

/// Reads a trajectory file, returning (timestamp, world-to-camera pose).
pub fn read_trajectory(path: &Path) -> Result<Vec<(f64, Pose)>, TumError> {
    let rows = parse_indexed(path)?;
    let mut out = Vec::new();
    for (t, vals) in rows {
        let v: Vec<f64> = vals.iter().take(7).filter_map(|s| s.parse().ok()).collect();
        if v.len() < 7 {
            return Err(TumError::Malformed {
                file: path.display().to_string(),
                line: vals.join(" "),
            });
        }
        let c2w = Pose::new(
            UnitQuaternion::from_quaternion(Quaternion::new(v[6], v[3], v[4], v[5])),
            Vector3::new(v[0], v[1], v[2]),
        );
        out.push((t, c2w.inverse()));
    }
    Ok(out)
}
