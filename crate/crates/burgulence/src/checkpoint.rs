//! Versioned binary snapshots of a running trajectory.
//!
//! Layout (all integers and floats little-endian):
//!
//! | offset | size | field                                            |
//! |--------|------|--------------------------------------------------|
//! | 0      | 4    | magic `b"BGLC"`                                  |
//! | 4      | 2    | format version, u16 = 1                          |
//! | 6      | 1    | scheme: 0 spectral, 1 linearized, 2 finite-volume|
//! | 7      | 1    | reserved, 0                                      |
//! | 8      | 8    | t, f64                                           |
//! | 16     | 8    | nu, f64 (0.0 for the finite-volume scheme)       |
//! | 24     | 8    | forcing seed, u64                                |
//! | 32     | 8    | ensemble member id, u64                          |
//! | 40     | 8    | RNG step counter, u64                            |
//! | 48     | 4    | count, u32: modes K (spectral) or cells N        |
//! | 52     | 4    | reserved, 0                                      |
//! | 56     | ...  | payload: K (re, im) f64 pairs, or N cell f64s    |
//!
//! Forcing coefficients are configuration, not state; a resumed run must be
//! handed the same `ForcingSpec`, and the stored seed/member let that be
//! verified. With the counter-based noise, resuming from a checkpoint is
//! bit-identical to never having stopped.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::field::SpectralField;
use crate::integrator::SolverState;
use crate::inviscid::CellField;

const MAGIC: [u8; 4] = *b"BGLC";
const VERSION: u16 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    Spectral = 0,
    Linearized = 1,
    FiniteVolume = 2,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Payload {
    Modes(Vec<Complex64>),
    Cells(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub scheme: Scheme,
    pub t: f64,
    pub nu: f64,
    pub seed: u64,
    pub member_id: u64,
    pub step_index: u64,
    pub payload: Payload,
}

impl Checkpoint {
    pub fn from_state(
        state: &SolverState,
        seed: u64,
        member_id: u64,
        step_index: u64,
        linearized: bool,
    ) -> Self {
        Self {
            scheme: if linearized {
                Scheme::Linearized
            } else {
                Scheme::Spectral
            },
            t: state.t,
            nu: state.nu,
            seed,
            member_id,
            step_index,
            payload: Payload::Modes(state.u.positive_modes().to_vec()),
        }
    }

    pub fn from_cells(cells: &CellField, seed: u64, member_id: u64, step_index: u64) -> Self {
        Self {
            scheme: Scheme::FiniteVolume,
            t: cells.t(),
            nu: 0.0,
            seed,
            member_id,
            step_index,
            payload: Payload::Cells(cells.averages().to_vec()),
        }
    }

    pub fn to_state(&self) -> Result<SolverState> {
        match &self.payload {
            Payload::Modes(modes) => Ok(SolverState {
                t: self.t,
                u: SpectralField::from_positive_modes(modes.clone())?,
                nu: self.nu,
                k_active: modes.len(),
            }),
            Payload::Cells(_) => Err(Error::Checkpoint(
                "finite-volume checkpoint cannot restore a spectral state".into(),
            )),
        }
    }

    pub fn to_cells(&self) -> Result<CellField> {
        match &self.payload {
            Payload::Cells(cells) => CellField::new(cells.clone(), self.t),
            Payload::Modes(_) => Err(Error::Checkpoint(
                "spectral checkpoint cannot restore a finite-volume state".into(),
            )),
        }
    }

    pub fn write_to(&self, mut w: impl Write) -> Result<()> {
        w.write_all(&MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        w.write_all(&[self.scheme as u8, 0])?;
        w.write_all(&self.t.to_le_bytes())?;
        w.write_all(&self.nu.to_le_bytes())?;
        w.write_all(&self.seed.to_le_bytes())?;
        w.write_all(&self.member_id.to_le_bytes())?;
        w.write_all(&self.step_index.to_le_bytes())?;
        let count = match &self.payload {
            Payload::Modes(m) => m.len(),
            Payload::Cells(c) => c.len(),
        } as u32;
        w.write_all(&count.to_le_bytes())?;
        w.write_all(&0u32.to_le_bytes())?;
        match &self.payload {
            Payload::Modes(modes) => {
                for m in modes {
                    w.write_all(&m.re.to_le_bytes())?;
                    w.write_all(&m.im.to_le_bytes())?;
                }
            }
            Payload::Cells(cells) => {
                for c in cells {
                    w.write_all(&c.to_le_bytes())?;
                }
            }
        }
        Ok(())
    }

    pub fn read_from(mut r: impl Read) -> Result<Self> {
        let mut head = [0u8; 56];
        r.read_exact(&mut head)?;
        if head[0..4] != MAGIC {
            return Err(Error::Checkpoint("bad magic".into()));
        }
        let version = u16::from_le_bytes([head[4], head[5]]);
        if version != VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported format version {version}"
            )));
        }
        let scheme = match head[6] {
            0 => Scheme::Spectral,
            1 => Scheme::Linearized,
            2 => Scheme::FiniteVolume,
            s => return Err(Error::Checkpoint(format!("unknown scheme tag {s}"))),
        };
        let f = |o: usize| f64::from_le_bytes(head[o..o + 8].try_into().unwrap());
        let u = |o: usize| u64::from_le_bytes(head[o..o + 8].try_into().unwrap());
        let count = u32::from_le_bytes(head[48..52].try_into().unwrap()) as usize;

        let payload = match scheme {
            Scheme::Spectral | Scheme::Linearized => {
                let mut buf = vec![0u8; 16 * count];
                r.read_exact(&mut buf)?;
                let modes = buf
                    .chunks_exact(16)
                    .map(|c| {
                        Complex64::new(
                            f64::from_le_bytes(c[0..8].try_into().unwrap()),
                            f64::from_le_bytes(c[8..16].try_into().unwrap()),
                        )
                    })
                    .collect();
                Payload::Modes(modes)
            }
            Scheme::FiniteVolume => {
                let mut buf = vec![0u8; 8 * count];
                r.read_exact(&mut buf)?;
                Payload::Cells(
                    buf.chunks_exact(8)
                        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                        .collect(),
                )
            }
        };
        Ok(Self {
            scheme,
            t: f(8),
            nu: f(16),
            seed: u(24),
            member_id: u(32),
            step_index: u(40),
            payload,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_from(BufReader::new(File::open(path)?))
    }
}
