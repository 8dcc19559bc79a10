//! Binary checkpoints for the shared sub-policies and, optionally, a master.
//!
//! Layout, all integers `u32` little-endian unless noted:
//!
//! ```text
//! magic  b"MLSHCKPT"
//! version (= 1)
//! sub-policy count K, sub input dim, sub hidden, sub action count
//! master period N
//! has-master flag (0/1), master input dim, master hidden, master action count
//! K * sub param count f64 LE, then master param count f64 LE if present
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{MlshError, Result};
use crate::nn::{NetParams, NetShape};
use crate::scalar::Scalar;

const MAGIC: &[u8; 8] = b"MLSHCKPT";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint<S> {
    pub master_period: usize,
    pub subs: Vec<NetParams<S>>,
    pub master: Option<NetParams<S>>,
}

fn put_u32(w: &mut impl Write, x: usize) -> Result<()> {
    let x = u32::try_from(x).map_err(|_| MlshError::Format(format!("{x} does not fit in u32")))?;
    w.write_all(&x.to_le_bytes())?;
    Ok(())
}

fn get_u32(r: &mut impl Read) -> Result<usize> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b) as usize)
}

fn put_shape(w: &mut impl Write, s: NetShape) -> Result<()> {
    put_u32(w, s.input_dim)?;
    put_u32(w, s.hidden)?;
    put_u32(w, s.action_count)
}

fn get_shape(r: &mut impl Read) -> Result<NetShape> {
    let input_dim = get_u32(r)?;
    let hidden = get_u32(r)?;
    let action_count = get_u32(r)?;
    Ok(NetShape { input_dim, hidden, action_count })
}

fn put_params<S: Scalar>(w: &mut impl Write, net: &NetParams<S>) -> Result<()> {
    for &x in net.as_flat() {
        w.write_all(&x.as_f64().to_le_bytes())?;
    }
    Ok(())
}

fn get_params<S: Scalar>(r: &mut impl Read, shape: NetShape) -> Result<NetParams<S>> {
    let mut flat = Vec::with_capacity(shape.param_count());
    let mut b = [0u8; 8];
    for _ in 0..shape.param_count() {
        r.read_exact(&mut b)?;
        flat.push(S::lit(f64::from_le_bytes(b)));
    }
    NetParams::from_flat(shape, flat)
}

impl<S: Scalar> Checkpoint<S> {
    pub fn sub_shape(&self) -> Option<NetShape> {
        self.subs.first().map(|n| n.shape())
    }

    pub fn write_to(&self, w: &mut impl Write) -> Result<()> {
        let shape = self
            .sub_shape()
            .ok_or_else(|| MlshError::Format("checkpoint needs at least one sub-policy".into()))?;
        if self.subs.iter().any(|n| n.shape() != shape) {
            return Err(MlshError::Format("sub-policies differ in shape".into()));
        }
        w.write_all(MAGIC)?;
        put_u32(w, FORMAT_VERSION as usize)?;
        put_u32(w, self.subs.len())?;
        put_shape(w, shape)?;
        put_u32(w, self.master_period)?;
        match &self.master {
            Some(m) => {
                put_u32(w, 1)?;
                put_shape(w, m.shape())?;
            }
            None => {
                put_u32(w, 0)?;
                put_shape(w, NetShape { input_dim: 0, hidden: 0, action_count: 0 })?;
            }
        }
        for net in &self.subs {
            put_params(w, net)?;
        }
        if let Some(m) = &self.master {
            put_params(w, m)?;
        }
        Ok(())
    }

    pub fn read_from(r: &mut impl Read) -> Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(MlshError::Format("not an MLSH checkpoint (bad magic)".into()));
        }
        let version = get_u32(r)?;
        if version != FORMAT_VERSION as usize {
            return Err(MlshError::Format(format!("unsupported checkpoint version {version}")));
        }
        let k = get_u32(r)?;
        if k == 0 {
            return Err(MlshError::Format("checkpoint has zero sub-policies".into()));
        }
        let shape = get_shape(r)?;
        let master_period = get_u32(r)?;
        let has_master = get_u32(r)?;
        let master_shape = get_shape(r)?;
        let subs = (0..k).map(|_| get_params(r, shape)).collect::<Result<Vec<_>>>()?;
        let master = match has_master {
            0 => None,
            1 => Some(get_params(r, master_shape)?),
            other => return Err(MlshError::Format(format!("bad master flag {other}"))),
        };
        Ok(Self { master_period, subs, master })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let mut r = BufReader::new(File::open(path)?);
        Self::read_from(&mut r)
    }
}
