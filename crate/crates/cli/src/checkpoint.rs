//! Binary checkpoints.
//!
//! Layout, all little-endian: the 8 bytes `LCDFLOW1`; `u32` dim, `u32` n;
//! `f64` length, t, eta, m1, m2; then `f64` samples of ρ, each velocity
//! component and each director component, row-major.

use std::fs;
use std::path::Path;

use lcdflow_core::{Field, Grid, Params, SimState, VectorField};
use thiserror::Error;

pub const MAGIC: &[u8; 8] = b"LCDFLOW1";
const HEADER_LEN: usize = 8 + 4 + 4 + 5 * 8;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("checkpoint i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("not a checkpoint: bad magic bytes")]
    BadMagic,
    #[error("truncated checkpoint: expected {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },
    #[error("checkpoint has {extra} trailing bytes")]
    TrailingBytes { extra: usize },
    #[error("invalid checkpoint: {0}")]
    Invalid(String),
}

/// Model constants stored alongside the state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CheckpointParams {
    pub eta: f64,
    pub m1: f64,
    pub m2: f64,
}

impl CheckpointParams {
    pub fn of(params: &Params) -> Self {
        Self { eta: params.eta, m1: params.m1, m2: params.m2 }
    }
}

pub fn encode(state: &SimState, params: &CheckpointParams) -> Vec<u8> {
    let grid = state.grid();
    let mut out = Vec::with_capacity(HEADER_LEN + 8 * grid.len() * (1 + 2 * grid.dim()));
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(grid.dim() as u32).to_le_bytes());
    out.extend_from_slice(&(grid.n() as u32).to_le_bytes());
    for v in [grid.length(), state.t, params.eta, params.m1, params.m2] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    let fields = std::iter::once(&state.rho).chain(state.u.components()).chain(state.d.components());
    for f in fields {
        for v in f.values() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

fn f64_at(bytes: &[u8], offset: usize) -> f64 {
    f64::from_le_bytes(bytes[offset..offset + 8].try_into().expect("8 bytes"))
}

fn u32_at(bytes: &[u8], offset: usize) -> u32 {
    u32::from_le_bytes(bytes[offset..offset + 4].try_into().expect("4 bytes"))
}

pub fn decode(bytes: &[u8]) -> Result<(SimState, CheckpointParams), CheckpointError> {
    if bytes.len() < MAGIC.len() {
        return Err(if MAGIC.starts_with(bytes) {
            CheckpointError::Truncated { expected: HEADER_LEN, found: bytes.len() }
        } else {
            CheckpointError::BadMagic
        });
    }
    if &bytes[..8] != MAGIC {
        return Err(CheckpointError::BadMagic);
    }
    if bytes.len() < HEADER_LEN {
        return Err(CheckpointError::Truncated { expected: HEADER_LEN, found: bytes.len() });
    }
    let dim = u32_at(bytes, 8) as usize;
    let n = u32_at(bytes, 12) as usize;
    let length = f64_at(bytes, 16);
    let t = f64_at(bytes, 24);
    let params = CheckpointParams { eta: f64_at(bytes, 32), m1: f64_at(bytes, 40), m2: f64_at(bytes, 48) };
    let grid = Grid::new(dim, n, length).map_err(|e| CheckpointError::Invalid(e.to_string()))?;
    let fields = 1 + 2 * dim;
    let expected = HEADER_LEN + 8 * grid.len() * fields;
    if bytes.len() < expected {
        return Err(CheckpointError::Truncated { expected, found: bytes.len() });
    }
    if bytes.len() > expected {
        return Err(CheckpointError::TrailingBytes { extra: bytes.len() - expected });
    }
    let read_field = |k: usize| -> Result<Field, CheckpointError> {
        let start = HEADER_LEN + 8 * grid.len() * k;
        let values = (0..grid.len()).map(|i| f64_at(bytes, start + 8 * i)).collect();
        Field::from_values(grid, values).map_err(|e| CheckpointError::Invalid(e.to_string()))
    };
    let rho = read_field(0)?;
    let u = VectorField::from_components((1..=dim).map(read_field).collect::<Result<_, _>>()?)
        .map_err(|e| CheckpointError::Invalid(e.to_string()))?;
    let d = VectorField::from_components((dim + 1..=2 * dim).map(read_field).collect::<Result<_, _>>()?)
        .map_err(|e| CheckpointError::Invalid(e.to_string()))?;
    let state = SimState::new(rho, u, d, t).map_err(|e| CheckpointError::Invalid(e.to_string()))?;
    Ok((state, params))
}

pub fn save_checkpoint(state: &SimState, params: &CheckpointParams, path: &Path) -> Result<(), CheckpointError> {
    // Write-then-rename so a crash never leaves a half-written checkpoint.
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, encode(state, params))?;
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<(SimState, CheckpointParams), CheckpointError> {
    decode(&fs::read(path)?)
}
