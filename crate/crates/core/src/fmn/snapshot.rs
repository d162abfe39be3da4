//! Versioned little-endian model snapshots.
//!
//! Layout: magic `FMNS`, u32 version, config (depth, roster, hyper-parameters,
//! seed), arity, trained flag, then per layer and unit the op code, both
//! weight vectors and the mask, then the read-out vector. Vectors are a u32
//! length followed by their elements.

use std::io::{Read, Write};

use super::{FmnConfig, FmnError, FmnModel, Layer, Normalization, Unit, UnitOp};

const MAGIC: &[u8; 4] = b"FMNS";
const VERSION: u32 = 1;

struct Writer(Vec<u8>);

impl Writer {
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }
    fn u32(&mut self, v: u32) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn f64(&mut self, v: f64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn f64s(&mut self, v: &[f64]) {
        self.u32(v.len() as u32);
        for x in v {
            self.f64(*x);
        }
    }
    fn bools(&mut self, v: &[bool]) {
        self.u32(v.len() as u32);
        for b in v {
            self.u8(*b as u8);
        }
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    at: usize,
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8], FmnError> {
        if self.at + n > self.buf.len() {
            return Err(FmnError::Snapshot("truncated".into()));
        }
        let s = &self.buf[self.at..self.at + n];
        self.at += n;
        Ok(s)
    }
    fn u8(&mut self) -> Result<u8, FmnError> {
        Ok(self.take(1)?[0])
    }
    fn u32(&mut self) -> Result<u32, FmnError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn u64(&mut self) -> Result<u64, FmnError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn f64(&mut self) -> Result<f64, FmnError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn f64s(&mut self) -> Result<Vec<f64>, FmnError> {
        let n = self.u32()? as usize;
        (0..n).map(|_| self.f64()).collect()
    }
    fn bools(&mut self) -> Result<Vec<bool>, FmnError> {
        let n = self.u32()? as usize;
        (0..n).map(|_| Ok(self.u8()? != 0)).collect()
    }
    fn op(&mut self) -> Result<UnitOp, FmnError> {
        let c = self.u8()?;
        UnitOp::from_code(c).ok_or_else(|| FmnError::Snapshot(format!("unknown unit op {c}")))
    }
}

pub fn write_snapshot(model: &FmnModel, out: &mut impl Write) -> std::io::Result<()> {
    let c = &model.config;
    let mut w = Writer(Vec::new());
    w.0.extend_from_slice(MAGIC);
    w.u32(VERSION);
    w.u32(c.depth as u32);
    w.u32(c.roster.len() as u32);
    for op in &c.roster {
        w.u8(op.code());
    }
    w.f64(c.learning_rate);
    w.u64(c.epochs as u64);
    w.u64(c.batch_size as u64);
    w.f64(c.lambda1);
    w.f64(c.lambda2);
    w.f64(c.eps);
    w.f64(c.init_scale);
    w.u8(match c.normalization {
        Normalization::PerUnit => 0,
        Normalization::Global => 1,
    });
    w.u64(c.seed);
    w.u32(model.arity as u32);
    w.u8(model.trained as u8);
    w.u32(model.layers.len() as u32);
    for layer in &model.layers {
        w.u32(layer.units.len() as u32);
        for u in &layer.units {
            w.u8(u.op.code());
            w.f64s(&u.w1);
            w.f64s(&u.w2);
            w.bools(&u.mask);
        }
    }
    w.f64s(&model.regression);
    out.write_all(&w.0)
}

pub fn read_snapshot(input: &mut impl Read) -> Result<FmnModel, FmnError> {
    let mut buf = Vec::new();
    input
        .read_to_end(&mut buf)
        .map_err(|e| FmnError::Snapshot(e.to_string()))?;
    let mut r = Reader { buf: &buf, at: 0 };
    if r.take(4)? != MAGIC {
        return Err(FmnError::Snapshot("bad magic".into()));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(FmnError::Snapshot(format!("unsupported version {version}")));
    }
    let depth = r.u32()? as usize;
    let roster_len = r.u32()? as usize;
    let roster = (0..roster_len).map(|_| r.op()).collect::<Result<Vec<_>, _>>()?;
    let config = FmnConfig {
        depth,
        roster,
        learning_rate: r.f64()?,
        epochs: r.u64()? as usize,
        batch_size: r.u64()? as usize,
        lambda1: r.f64()?,
        lambda2: r.f64()?,
        eps: r.f64()?,
        init_scale: r.f64()?,
        normalization: match r.u8()? {
            0 => Normalization::PerUnit,
            1 => Normalization::Global,
            v => return Err(FmnError::Snapshot(format!("unknown normalization {v}"))),
        },
        seed: r.u64()?,
    };
    let arity = r.u32()? as usize;
    let trained = r.u8()? != 0;
    let n_layers = r.u32()? as usize;
    let mut layers = Vec::with_capacity(n_layers);
    for _ in 0..n_layers {
        let n_units = r.u32()? as usize;
        let mut units = Vec::with_capacity(n_units);
        for _ in 0..n_units {
            units.push(Unit {
                op: r.op()?,
                w1: r.f64s()?,
                w2: r.f64s()?,
                mask: r.bools()?,
            });
        }
        layers.push(Layer { units });
    }
    let regression = r.f64s()?;
    if r.at != buf.len() {
        return Err(FmnError::Snapshot("trailing bytes".into()));
    }
    let model = FmnModel {
        config,
        arity,
        layers,
        regression,
        trained,
    };
    for (i, layer) in model.layers.iter().enumerate() {
        let w = model.width(i);
        for u in &layer.units {
            let w2_ok = if u.op.is_binary() { u.w2.len() == w } else { u.w2.is_empty() };
            if u.w1.len() != w || !w2_ok || !(u.mask.is_empty() || u.mask.len() == w) {
                return Err(FmnError::Snapshot(format!("layer {i}: weight shape mismatch")));
            }
        }
    }
    if model.regression.len() != model.width(model.layers.len()) {
        return Err(FmnError::Snapshot("read-out shape mismatch".into()));
    }
    Ok(model)
}
