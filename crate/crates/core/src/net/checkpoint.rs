//! Binary checkpoint layout, all little-endian:
//! `"LSR1"`, u32 input_dim, u32 output_dim, u32 hidden layer count, one u32
//! per hidden width, u32 activation id, then `param_count` f64 values.

use super::{Activation, MlpArchitecture, NetError, Result};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"LSR1";

fn corrupt(msg: impl Into<String>) -> NetError {
    NetError::InvalidArchitecture(format!("checkpoint: {}", msg.into()))
}

fn as_u32(v: usize, what: &str) -> Result<u32> {
    u32::try_from(v).map_err(|_| corrupt(format!("{what} {v} does not fit in 32 bits")))
}

pub fn encode_checkpoint(arch: &MlpArchitecture, theta: &[f64]) -> Result<Vec<u8>> {
    arch.validate()?;
    arch.check_params(theta)?;
    let mut out = Vec::with_capacity(4 * (5 + arch.hidden.len()) + 8 * theta.len());
    out.extend_from_slice(CHECKPOINT_MAGIC);
    let mut words = vec![
        as_u32(arch.input_dim, "input_dim")?,
        as_u32(arch.output_dim, "output_dim")?,
        as_u32(arch.hidden.len(), "hidden layer count")?,
    ];
    for &w in &arch.hidden {
        words.push(as_u32(w, "hidden width")?);
    }
    words.push(arch.activation.id());
    for w in words {
        out.extend_from_slice(&w.to_le_bytes());
    }
    for v in theta {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| corrupt(format!("truncated at byte {}", self.pos)))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<usize> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes(b.try_into().expect("4 bytes")) as usize)
    }
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<(MlpArchitecture, Vec<f64>)> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4)? != CHECKPOINT_MAGIC {
        return Err(corrupt("bad magic bytes"));
    }
    let input_dim = r.u32()?;
    let output_dim = r.u32()?;
    let depth = r.u32()?;
    // each width needs 4 bytes, so a corrupt count cannot over-allocate
    if depth > bytes.len() / 4 {
        return Err(corrupt(format!("hidden layer count {depth} exceeds the file")));
    }
    let hidden = (0..depth).map(|_| r.u32()).collect::<Result<Vec<_>>>()?;
    let id = r.u32()? as u32;
    let activation = Activation::from_id(id).ok_or_else(|| corrupt(format!("unknown activation id {id}")))?;
    let arch = MlpArchitecture::new(input_dim, output_dim, hidden, activation)?;
    let m = arch.param_count();
    let rest = &bytes[r.pos..];
    if rest.len() != 8 * m {
        return Err(corrupt(format!(
            "expected {m} parameters ({} bytes), found {} bytes",
            8 * m,
            rest.len()
        )));
    }
    let theta = rest
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    Ok((arch, theta))
}
