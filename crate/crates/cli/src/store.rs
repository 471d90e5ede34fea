//! On-disk layout shared by all commands.
//!
//! A data directory holds `manifest.txt` and one `BGRD` file per modality per frame,
//! named `<modality>_<index>.bgrd` with a two-digit frame index. The manifest is a
//! list of `key value...` lines:
//!
//! ```text
//! bevinst-manifest 1
//! kind labels
//! frames 5
//! first_t -1
//! grid 200 200 0.5
//! anchor 5 0 0
//! modalities seg inst centerness offset fwd_flow back_flow
//! ```
//!
//! Extra keys are kept verbatim and ignored by readers that do not need them.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use bevinst::io::{read_flow, read_instance, read_seg, write_grid, GridRef};
use bevinst::{FlowGrid, GridSpec, InstanceGrid, Pose2D, SegGrid};

pub const MANIFEST: &str = "manifest.txt";
const HEADER: &str = "bevinst-manifest 1";

#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    pub kind: String,
    pub frames: usize,
    /// Time index of the first stored frame (-1 when the present frame is included).
    pub first_t: i32,
    pub spec: GridSpec,
    pub modalities: Vec<String>,
    pub extra: BTreeMap<String, String>,
}

impl Manifest {
    pub fn new(
        kind: &str,
        frames: usize,
        first_t: i32,
        spec: GridSpec,
        modalities: &[&str],
    ) -> Self {
        Self {
            kind: kind.to_string(),
            frames,
            first_t,
            spec,
            modalities: modalities.iter().map(|m| m.to_string()).collect(),
            extra: BTreeMap::new(),
        }
    }

    pub fn with(mut self, key: &str, value: impl ToString) -> Self {
        self.extra.insert(key.to_string(), value.to_string());
        self
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{HEADER}");
        let _ = writeln!(out, "kind {}", self.kind);
        let _ = writeln!(out, "frames {}", self.frames);
        let _ = writeln!(out, "first_t {}", self.first_t);
        let _ = writeln!(
            out,
            "grid {} {} {}",
            self.spec.height, self.spec.width, self.spec.resolution
        );
        let a = self.spec.anchor;
        let _ = writeln!(out, "anchor {} {} {}", a.x, a.y, a.yaw);
        let _ = writeln!(out, "modalities {}", self.modalities.join(" "));
        for (k, v) in &self.extra {
            let _ = writeln!(out, "{k} {v}");
        }
        out
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
        if lines.next() != Some(HEADER) {
            bail!("{}: missing `{HEADER}` header", path.display());
        }
        let mut fields: BTreeMap<String, String> = BTreeMap::new();
        for line in lines {
            let (k, v) = line.split_once(' ').unwrap_or((line, ""));
            fields.insert(k.to_string(), v.trim().to_string());
        }
        let mut take = |key: &str| {
            fields
                .remove(key)
                .ok_or_else(|| anyhow!("{}: missing field `{key}`", path.display()))
        };
        let bad = |key: &str| anyhow!("{}: invalid field `{key}`", path.display());
        let kind = take("kind")?;
        let frames: usize = take("frames")?.parse().map_err(|_| bad("frames"))?;
        let first_t: i32 = take("first_t")?.parse().map_err(|_| bad("first_t"))?;
        let grid = take("grid")?;
        let g: Vec<&str> = grid.split_whitespace().collect();
        let anchor = take("anchor")?;
        let a: Vec<f64> = anchor
            .split_whitespace()
            .map(|v| v.parse().map_err(|_| bad("anchor")))
            .collect::<Result<_>>()?;
        if g.len() != 3 {
            return Err(bad("grid"));
        }
        if a.len() != 3 {
            return Err(bad("anchor"));
        }
        let spec = GridSpec::new(
            g[0].parse().map_err(|_| bad("grid"))?,
            g[1].parse().map_err(|_| bad("grid"))?,
            g[2].parse().map_err(|_| bad("grid"))?,
            Pose2D::new(a[0], a[1], a[2]),
        )
        .map_err(|e| anyhow!("{}: field `grid`: {e}", path.display()))?;
        let modalities = take("modalities")?
            .split_whitespace()
            .map(String::from)
            .collect();
        Ok(Self {
            kind,
            frames,
            first_t,
            spec,
            modalities,
            extra: fields,
        })
    }

    pub fn extra_f64(&self, key: &str, path: &Path) -> Result<f64> {
        self.extra
            .get(key)
            .ok_or_else(|| anyhow!("{}: missing field `{key}`", path.display()))?
            .parse()
            .map_err(|_| anyhow!("{}: invalid field `{key}`", path.display()))
    }
}

pub fn grid_file(dir: &Path, modality: &str, index: usize) -> PathBuf {
    dir.join(format!("{modality}_{index:02}.bgrd"))
}

pub fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

pub fn write_manifest(dir: &Path, m: &Manifest) -> Result<()> {
    let path = dir.join(MANIFEST);
    std::fs::write(&path, m.to_text()).with_context(|| format!("writing {}", path.display()))
}

pub fn read_manifest(dir: &Path, kind: &str) -> Result<Manifest> {
    let path = dir.join(MANIFEST);
    let text =
        std::fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
    let m = Manifest::parse(&text, &path)?;
    if m.kind != kind {
        bail!(
            "{}: field `kind` is `{}`, expected `{kind}`",
            path.display(),
            m.kind
        );
    }
    Ok(m)
}

pub fn write_sequence<'a, T: 'a>(dir: &Path, modality: &str, grids: &'a [T]) -> Result<()>
where
    &'a T: Into<GridRef<'a>>,
{
    for (k, g) in grids.iter().enumerate() {
        write_grid(g, grid_file(dir, modality, k))?;
    }
    Ok(())
}

fn check_modality(m: &Manifest, dir: &Path, modality: &str) -> Result<()> {
    if !m.modalities.iter().any(|x| x == modality) {
        bail!(
            "{}: field `modalities` does not list `{modality}`",
            dir.join(MANIFEST).display()
        );
    }
    Ok(())
}

fn check_shape(g: (usize, usize), m: &Manifest, path: &Path) -> Result<()> {
    if g != m.spec.shape() {
        bail!(
            "{}: grid is {g:?}, manifest says {:?}",
            path.display(),
            m.spec.shape()
        );
    }
    Ok(())
}

pub fn read_seg_seq(dir: &Path, m: &Manifest, modality: &str) -> Result<Vec<SegGrid>> {
    check_modality(m, dir, modality)?;
    (0..m.frames)
        .map(|k| {
            let p = grid_file(dir, modality, k);
            let g = read_seg(&p)?;
            check_shape(g.shape(), m, &p)?;
            Ok(g)
        })
        .collect()
}

pub fn read_flow_seq(dir: &Path, m: &Manifest, modality: &str) -> Result<Vec<FlowGrid>> {
    check_modality(m, dir, modality)?;
    (0..m.frames)
        .map(|k| {
            let p = grid_file(dir, modality, k);
            let g = read_flow(&p)?;
            check_shape(g.shape(), m, &p)?;
            Ok(g)
        })
        .collect()
}

pub fn read_inst_seq(dir: &Path, m: &Manifest) -> Result<Vec<InstanceGrid>> {
    check_modality(m, dir, "inst")?;
    (0..m.frames)
        .map(|k| {
            let p = grid_file(dir, "inst", k);
            let g = read_instance(&p)?;
            check_shape(g.shape(), m, &p)?;
            Ok(g)
        })
        .collect()
}
