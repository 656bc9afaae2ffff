//! Binary model checkpoints.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic   b"CFCK"
//! version u16 = 1
//! kind    u8   (1 = relational model, 2 = task model)
//! kind 1 only: lambda f64
//! nets    one per sub-network: relational models store extractor,
//!         regressor, classifier in that order; task models store one net
//! ```
//!
//! Each net: `n_layers u32`, then per layer `in u32, out u32, activation u8`,
//! then every parameter as `f64` in the flat layout (weights row-major, then
//! bias, layer by layer).

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::models::{DarklModel, UtpModel};
use crate::nn::{Activation, Mlp};

const MAGIC: &[u8; 4] = b"CFCK";
const VERSION: u16 = 1;
const KIND_DARKL: u8 = 1;
const KIND_UTP: u8 = 2;

struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    fn new() -> Self {
        Self { buf: Vec::new() }
    }

    fn u16(&mut self, v: u16) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    fn u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    fn u8(&mut self, v: u8) {
        self.buf.push(v);
    }

    fn f64(&mut self, v: f64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    fn net(&mut self, net: &Mlp) {
        self.u32(net.layers().len() as u32);
        for layer in net.layers() {
            self.u32(layer.in_dim() as u32);
            self.u32(layer.out_dim() as u32);
            self.u8(layer.activation().tag());
        }
        for &v in net.flatten_params().as_slice() {
            self.f64(v);
        }
    }
}

struct Reader<'a> {
    path: &'a Path,
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn err(&self, msg: impl Into<String>) -> Error {
        Error::Format { path: self.path.display().to_string(), msg: msg.into() }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.buf.len() {
            return Err(self.err("truncated checkpoint"));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().expect("sized")))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("sized")))
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("sized")))
    }

    fn net(&mut self) -> Result<Mlp> {
        let n_layers = self.u32()? as usize;
        if n_layers == 0 || n_layers > 64 {
            return Err(self.err(format!("implausible layer count {n_layers}")));
        }
        let mut shapes = Vec::with_capacity(n_layers);
        for _ in 0..n_layers {
            let in_dim = self.u32()? as usize;
            let out_dim = self.u32()? as usize;
            let tag = self.u8()?;
            let act = Activation::from_tag(tag)
                .ok_or_else(|| self.err(format!("unknown activation tag {tag}")))?;
            shapes.push((in_dim, out_dim, act));
        }
        let mut values = Vec::new();
        for &(in_dim, out_dim, _) in &shapes {
            let count = in_dim * out_dim + out_dim;
            let mut layer_vals = Vec::with_capacity(count);
            for _ in 0..count {
                layer_vals.push(self.f64()?);
            }
            values.push(layer_vals);
        }
        Mlp::from_layers_raw(&shapes, |l| {
            let (in_dim, out_dim, _) = shapes[l];
            let vals = &values[l];
            (vals[..in_dim * out_dim].to_vec(), vals[in_dim * out_dim..].to_vec())
        })
    }

    fn done(&self) -> Result<()> {
        if self.pos != self.buf.len() {
            return Err(self.err(format!("{} trailing bytes", self.buf.len() - self.pos)));
        }
        Ok(())
    }
}

fn open(path: &Path, buf: &mut Vec<u8>) -> Result<()> {
    *buf = fs::read(path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            Error::MissingArtifact(format!("checkpoint {} does not exist", path.display()))
        } else {
            Error::Io(e)
        }
    })?;
    Ok(())
}

fn check_preamble(r: &mut Reader<'_>, expected_kind: u8) -> Result<()> {
    if r.take(4)? != MAGIC {
        return Err(r.err("not a checkpoint file"));
    }
    let version = r.u16()?;
    if version != VERSION {
        return Err(r.err(format!("unsupported checkpoint version {version}")));
    }
    let kind = r.u8()?;
    if kind != expected_kind {
        return Err(r.err(format!("checkpoint kind {kind}, expected {expected_kind}")));
    }
    Ok(())
}

pub fn write_darkl_checkpoint(path: &Path, model: &DarklModel) -> Result<()> {
    let mut w = Writer::new();
    w.buf.extend_from_slice(MAGIC);
    w.u16(VERSION);
    w.u8(KIND_DARKL);
    w.f64(model.lambda());
    w.net(model.feature_extractor());
    w.net(model.data_regressor());
    w.net(model.domain_classifier());
    fs::write(path, &w.buf)?;
    Ok(())
}

pub fn read_darkl_checkpoint(path: &Path) -> Result<DarklModel> {
    let mut buf = Vec::new();
    open(path, &mut buf)?;
    let mut r = Reader { path, buf: &buf, pos: 0 };
    check_preamble(&mut r, KIND_DARKL)?;
    let lambda = r.f64()?;
    let fe = r.net()?;
    let dr = r.net()?;
    let dc = r.net()?;
    r.done()?;
    DarklModel::from_parts(fe, dr, dc, lambda)
}

pub fn write_utp_checkpoint(path: &Path, model: &UtpModel) -> Result<()> {
    let mut w = Writer::new();
    w.buf.extend_from_slice(MAGIC);
    w.u16(VERSION);
    w.u8(KIND_UTP);
    w.net(model.net());
    fs::write(path, &w.buf)?;
    Ok(())
}

pub fn read_utp_checkpoint(path: &Path) -> Result<UtpModel> {
    let mut buf = Vec::new();
    open(path, &mut buf)?;
    let mut r = Reader { path, buf: &buf, pos: 0 };
    check_preamble(&mut r, KIND_UTP)?;
    let net = r.net()?;
    r.done()?;
    UtpModel::from_net(net)
}
