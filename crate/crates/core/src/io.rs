//! `BGRD` binary grid container.
//!
//! Layout (all integers little-endian):
//!
//! | offset | size | field                         |
//! |--------|------|-------------------------------|
//! | 0      | 4    | magic `b"BGRD"`               |
//! | 4      | 1    | version, always 1             |
//! | 5      | 1    | dtype: 0 = f32, 1 = u32       |
//! | 6      | 4    | height                        |
//! | 10     | 4    | width                         |
//! | 14     | 4    | channels                      |
//! | 18     | ...  | payload                       |
//!
//! The payload is channel-planar: each channel is a full row-major `H x W` plane,
//! stored one after another. Segmentation maps are `f32 x 1`, instance maps
//! `u32 x 1` and flow fields `f32 x 2` (`dy` plane then `dx` plane).

use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::{FlowGrid, InstanceGrid, SegGrid};

pub const MAGIC: &[u8; 4] = b"BGRD";
pub const VERSION: u8 = 1;
const HEADER_LEN: usize = 18;

const DTYPE_F32: u8 = 0;
const DTYPE_U32: u8 = 1;

#[derive(Debug, Clone, PartialEq)]
pub enum AnyGrid {
    Seg(SegGrid),
    Instance(InstanceGrid),
    Flow(FlowGrid),
}

impl AnyGrid {
    pub fn kind(&self) -> &'static str {
        match self {
            AnyGrid::Seg(_) => "segmentation",
            AnyGrid::Instance(_) => "instance",
            AnyGrid::Flow(_) => "flow",
        }
    }
}

/// Borrowed view used for writing without cloning.
#[derive(Debug, Clone, Copy)]
pub enum GridRef<'a> {
    Seg(&'a SegGrid),
    Instance(&'a InstanceGrid),
    Flow(&'a FlowGrid),
}

impl<'a> From<&'a SegGrid> for GridRef<'a> {
    fn from(g: &'a SegGrid) -> Self {
        GridRef::Seg(g)
    }
}

impl<'a> From<&'a InstanceGrid> for GridRef<'a> {
    fn from(g: &'a InstanceGrid) -> Self {
        GridRef::Instance(g)
    }
}

impl<'a> From<&'a FlowGrid> for GridRef<'a> {
    fn from(g: &'a FlowGrid) -> Self {
        GridRef::Flow(g)
    }
}

fn header(out: &mut Vec<u8>, dtype: u8, (h, w): (usize, usize), channels: u32) {
    out.extend_from_slice(MAGIC);
    out.push(VERSION);
    out.push(dtype);
    out.extend_from_slice(&(h as u32).to_le_bytes());
    out.extend_from_slice(&(w as u32).to_le_bytes());
    out.extend_from_slice(&channels.to_le_bytes());
}

pub fn encode<'a>(grid: impl Into<GridRef<'a>>) -> Vec<u8> {
    let grid = grid.into();
    let mut out = Vec::new();
    match grid {
        GridRef::Seg(g) => {
            header(&mut out, DTYPE_F32, g.shape(), 1);
            out.extend(g.values().iter().flat_map(|v| v.to_le_bytes()));
        }
        GridRef::Instance(g) => {
            header(&mut out, DTYPE_U32, g.shape(), 1);
            out.extend(g.ids().iter().flat_map(|v| v.to_le_bytes()));
        }
        GridRef::Flow(g) => {
            header(&mut out, DTYPE_F32, g.shape(), 2);
            out.extend(g.dy().as_slice().iter().flat_map(|v| v.to_le_bytes()));
            out.extend(g.dx().as_slice().iter().flat_map(|v| v.to_le_bytes()));
        }
    }
    out
}

fn read_u32(bytes: &[u8], at: usize) -> u32 {
    u32::from_le_bytes(bytes[at..at + 4].try_into().expect("4-byte slice"))
}

pub fn decode(bytes: &[u8]) -> Result<AnyGrid> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::Format(format!(
            "truncated header: {} bytes",
            bytes.len()
        )));
    }
    if &bytes[0..4] != MAGIC {
        return Err(Error::Format(format!("bad magic {:?}", &bytes[0..4])));
    }
    if bytes[4] != VERSION {
        return Err(Error::Format(format!("unsupported version {}", bytes[4])));
    }
    let dtype = bytes[5];
    let h = read_u32(bytes, 6) as usize;
    let w = read_u32(bytes, 10) as usize;
    let channels = read_u32(bytes, 14);
    let n = h
        .checked_mul(w)
        .ok_or_else(|| Error::Format("grid dimensions overflow".into()))?;
    let expected = n
        .checked_mul(4 * channels as usize)
        .ok_or_else(|| Error::Format("payload size overflow".into()))?;
    let payload = &bytes[HEADER_LEN..];
    if payload.len() != expected {
        return Err(Error::Format(format!(
            "payload is {} bytes, header implies {expected}",
            payload.len()
        )));
    }
    let words = payload
        .chunks_exact(4)
        .map(|c| c.try_into().expect("4 bytes"));
    match (dtype, channels) {
        (DTYPE_F32, 1) => {
            let values: Vec<f32> = words.map(f32::from_le_bytes).collect();
            if values.iter().any(|v| v.is_nan()) {
                return Err(Error::Format("NaN in segmentation payload".into()));
            }
            Ok(AnyGrid::Seg(SegGrid::new(h, w, values)?))
        }
        (DTYPE_U32, 1) => {
            let ids: Vec<u32> = words.map(u32::from_le_bytes).collect();
            Ok(AnyGrid::Instance(InstanceGrid::new(h, w, ids)?))
        }
        (DTYPE_F32, 2) => {
            let mut values: Vec<f32> = words.map(f32::from_le_bytes).collect();
            let dx = values.split_off(n);
            Ok(AnyGrid::Flow(FlowGrid::new(h, w, values, dx)?))
        }
        _ => Err(Error::Format(format!(
            "unsupported dtype/channels combination {dtype}/{channels}"
        ))),
    }
}

pub fn write_grid<'a>(grid: impl Into<GridRef<'a>>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, encode(grid)).map_err(|e| Error::io(path, e))
}

pub fn read_grid(path: impl AsRef<Path>) -> Result<AnyGrid> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes).map_err(|e| match e {
        Error::Format(msg) => Error::Format(format!("{}: {msg}", path.display())),
        other => other,
    })
}

fn wrong_kind(path: &Path, want: &str, got: &AnyGrid) -> Error {
    Error::Format(format!(
        "{}: expected {want} grid, found {}",
        path.display(),
        got.kind()
    ))
}

pub fn read_seg(path: impl AsRef<Path>) -> Result<SegGrid> {
    let path = path.as_ref();
    match read_grid(path)? {
        AnyGrid::Seg(g) => Ok(g),
        other => Err(wrong_kind(path, "segmentation", &other)),
    }
}

pub fn read_instance(path: impl AsRef<Path>) -> Result<InstanceGrid> {
    let path = path.as_ref();
    match read_grid(path)? {
        AnyGrid::Instance(g) => Ok(g),
        other => Err(wrong_kind(path, "instance", &other)),
    }
}

pub fn read_flow(path: impl AsRef<Path>) -> Result<FlowGrid> {
    let path = path.as_ref();
    match read_grid(path)? {
        AnyGrid::Flow(g) => Ok(g),
        other => Err(wrong_kind(path, "flow", &other)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn small_seg_round_trip() {
        let g = SegGrid::new(2, 2, vec![0.0, 0.5, 1.0, 0.25]).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("seg.bgrd");
        write_grid(&g, &p).unwrap();
        assert_eq!(read_seg(&p).unwrap(), g);
        let bytes = std::fs::read(&p).unwrap();
        assert_eq!(&bytes[..6], b"BGRD\x01\x00");
        assert_eq!(bytes.len(), HEADER_LEN + 16);
    }

    #[test]
    fn bad_magic_rejected() {
        let mut bytes = encode(&SegGrid::zeros(2, 2));
        bytes[0] = b'X';
        assert!(matches!(decode(&bytes), Err(Error::Format(_))));
    }

    #[test]
    fn truncated_payload_rejected() {
        let mut bytes = encode(&InstanceGrid::zeros(3, 3));
        bytes.pop();
        assert!(matches!(decode(&bytes), Err(Error::Format(_))));
    }

    #[test]
    fn nan_segmentation_rejected() {
        let mut bytes = encode(&SegGrid::zeros(1, 2));
        bytes[HEADER_LEN..HEADER_LEN + 4].copy_from_slice(&f32::NAN.to_le_bytes());
        assert!(decode(&bytes).is_err());
    }

    #[test]
    fn typed_reader_rejects_wrong_kind() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("inst.bgrd");
        write_grid(&InstanceGrid::zeros(2, 2), &p).unwrap();
        assert!(read_flow(&p).is_err());
        assert!(read_instance(&p).is_ok());
    }

    #[test]
    fn flow_golden_hash_is_stable() {
        use sha2::{Digest, Sha256};
        let mut flow = FlowGrid::zeros(200, 200);
        for r in 0..200 {
            for c in 0..200 {
                flow.set(r, c, ((r as f32 - 100.0) * 0.25, (c as f32) * -0.125));
            }
        }
        let bytes = encode(&flow);
        let digest = hex::encode(Sha256::digest(&bytes));
        assert_eq!(decode(&bytes).unwrap(), AnyGrid::Flow(flow.clone()));
        assert_eq!(digest, hex::encode(Sha256::digest(encode(&flow))));
        assert_eq!(
            digest,
            "e2f4e940742b70cdbce96f5666feef65741aeaa6e6cdc328f6cad71e57dd508a"
        );
    }

    proptest! {
        #[test]
        fn round_trip_all_kinds(h in 1usize..12, w in 1usize..12, seed in any::<u64>()) {
            let n = h * w;
            let f = |i: usize| ((seed.wrapping_mul(i as u64 + 1) >> 40) as f32) / (1u64 << 24) as f32;
            let seg = SegGrid::new(h, w, (0..n).map(f).collect()).unwrap();
            let inst = InstanceGrid::new(h, w, (0..n).map(|i| (seed as u32).wrapping_add(i as u32)).collect()).unwrap();
            let flow = FlowGrid::new(h, w, (0..n).map(|i| f(i) * 40.0 - 20.0).collect(),
                                     (0..n).map(|i| -f(n - i)).collect()).unwrap();
            prop_assert_eq!(decode(&encode(&seg)).unwrap(), AnyGrid::Seg(seg));
            prop_assert_eq!(decode(&encode(&inst)).unwrap(), AnyGrid::Instance(inst));
            prop_assert_eq!(decode(&encode(&flow)).unwrap(), AnyGrid::Flow(flow));
        }
    }
}
