use std::path::{Path, PathBuf};
use std::sync::OnceLock;

use anyhow::{bail, Context, Result};
use bevinst::{InstanceGrid, SegGrid};

use crate::store::{create_dir, read_inst_seq, read_seg_seq, Manifest, MANIFEST};

pub const PALETTE_SIZE: usize = 64;

/// Fixed instance palette: hues spaced by the golden angle, alternating value.
pub fn palette() -> &'static [[u8; 3]; PALETTE_SIZE] {
    static P: OnceLock<[[u8; 3]; PALETTE_SIZE]> = OnceLock::new();
    P.get_or_init(|| {
        let mut p = [[0u8; 3]; PALETTE_SIZE];
        for (i, c) in p.iter_mut().enumerate() {
            let h = (i as f64 * 0.618_033_988_749_895).fract() * 6.0;
            let (s, v) = if i % 2 == 0 { (0.85, 1.0) } else { (0.6, 0.8) };
            let chroma = v * s;
            let x = chroma * (1.0 - (h % 2.0 - 1.0).abs());
            let (r, g, b) = match h as u32 {
                0 => (chroma, x, 0.0),
                1 => (x, chroma, 0.0),
                2 => (0.0, chroma, x),
                3 => (0.0, x, chroma),
                4 => (x, 0.0, chroma),
                _ => (chroma, 0.0, x),
            };
            let m = v - chroma;
            *c = [r, g, b].map(|u| ((u + m) * 255.0).round() as u8);
        }
        p
    })
}

/// Color of instance `id`; background is black.
pub fn id_color(id: u32) -> [u8; 3] {
    if id == 0 {
        [0, 0, 0]
    } else {
        palette()[(id as usize - 1) % PALETTE_SIZE]
    }
}

fn ppm(h: usize, w: usize, pixels: impl Iterator<Item = [u8; 3]>) -> Vec<u8> {
    let mut out = format!("P6\n{w} {h}\n255\n").into_bytes();
    out.reserve(h * w * 3);
    for px in pixels {
        out.extend_from_slice(&px);
    }
    out
}

pub fn render_instances(inst: &InstanceGrid) -> Vec<u8> {
    let (h, w) = inst.shape();
    ppm(h, w, inst.ids().iter().map(|&id| id_color(id)))
}

/// Grayscale rendering of probabilities in [0, 1].
pub fn render_seg(seg: &SegGrid) -> Vec<u8> {
    let (h, w) = seg.shape();
    ppm(
        h,
        w,
        seg.values()
            .iter()
            .map(|&v| [(v.clamp(0.0, 1.0) * 255.0).round() as u8; 3]),
    )
}

/// Writes `frame_<kk>.ppm` per frame. Directories listing `inst` are drawn by
/// instance ID; otherwise `seg` is drawn in grayscale.
pub fn cmd_render(dir: &Path, out: &Path) -> Result<Vec<PathBuf>> {
    let mpath = dir.join(MANIFEST);
    let text =
        std::fs::read_to_string(&mpath).with_context(|| format!("reading {}", mpath.display()))?;
    let m = Manifest::parse(&text, &mpath)?;
    let images: Vec<Vec<u8>> = if m.modalities.iter().any(|x| x == "inst") {
        read_inst_seq(dir, &m)?
            .iter()
            .map(render_instances)
            .collect()
    } else if m.modalities.iter().any(|x| x == "seg") {
        read_seg_seq(dir, &m, "seg")?
            .iter()
            .map(render_seg)
            .collect()
    } else {
        bail!(
            "{}: field `modalities` lists neither `inst` nor `seg`",
            mpath.display()
        );
    };
    create_dir(out)?;
    images
        .into_iter()
        .enumerate()
        .map(|(k, img)| {
            let p = out.join(format!("frame_{k:02}.ppm"));
            std::fs::write(&p, img).with_context(|| format!("writing {}", p.display()))?;
            Ok(p)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn palette_is_distinct_and_never_black() {
        let p = palette();
        for (i, a) in p.iter().enumerate() {
            assert_ne!(*a, [0, 0, 0]);
            for b in &p[..i] {
                assert_ne!(a, b);
            }
        }
        assert_eq!(id_color(1), id_color(65));
    }

    #[test]
    fn empty_grid_renders_black() {
        let img = render_instances(&InstanceGrid::zeros(3, 2));
        let header = b"P6\n2 3\n255\n";
        assert_eq!(&img[..header.len()], header);
        assert!(img[header.len()..].iter().all(|&b| b == 0));
        assert_eq!(img.len(), header.len() + 18);
    }
}
