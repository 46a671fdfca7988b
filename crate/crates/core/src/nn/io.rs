//! `.inrw` weight files: one line of JSON header, then the flat parameter
//! vector as little-endian `f64`.

use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Mlp, MlpArch};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightsHeader {
    pub arch: MlpArch,
    pub param_count: usize,
    pub seed: u64,
}

pub fn write_weights<W: Write>(mlp: &Mlp, mut w: W) -> Result<()> {
    let header = WeightsHeader {
        arch: *mlp.arch(),
        param_count: mlp.param_count(),
        seed: mlp.seed(),
    };
    let mut buf = serde_json::to_vec(&header)?;
    buf.push(b'\n');
    buf.reserve(8 * mlp.param_count());
    for p in mlp.params() {
        buf.extend_from_slice(&p.to_le_bytes());
    }
    w.write_all(&buf)
        .map_err(|e| Error::io("<weights stream>", e))
}

pub fn read_weights<R: BufRead>(mut r: R) -> Result<Mlp> {
    let mut line = Vec::new();
    r.read_until(b'\n', &mut line)
        .map_err(|e| Error::io("<weights stream>", e))?;
    if line.last() != Some(&b'\n') {
        return Err(Error::parse(line.len(), "missing header terminator"));
    }
    let header: WeightsHeader = serde_json::from_slice(&line[..line.len() - 1])
        .map_err(|e| Error::parse(0, format!("bad weights header: {e}")))?;
    if header.arch.param_count() != header.param_count {
        return Err(Error::parse(
            0,
            format!(
                "header param_count {} disagrees with architecture ({})",
                header.param_count,
                header.arch.param_count()
            ),
        ));
    }
    let mut payload = Vec::new();
    r.read_to_end(&mut payload)
        .map_err(|e| Error::io("<weights stream>", e))?;
    if payload.len() != 8 * header.param_count {
        return Err(Error::parse(
            line.len() + payload.len(),
            format!(
                "payload has {} bytes, expected {}",
                payload.len(),
                8 * header.param_count
            ),
        ));
    }
    let theta = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    Mlp::from_parts(header.arch, header.seed, theta)
}

pub fn save_weights(mlp: &Mlp, path: &Path) -> Result<()> {
    let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_weights(mlp, std::io::BufWriter::new(f))
}

pub fn load_weights(path: &Path) -> Result<Mlp> {
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_weights(std::io::BufReader::new(f))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_preserves_network() {
        let m = Mlp::init(MlpArch::ffn(2, 1, 8, 3, 4, 2.0), 99).unwrap();
        let mut buf = Vec::new();
        write_weights(&m, &mut buf).unwrap();
        let back = read_weights(&buf[..]).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn truncated_payload_rejected() {
        let m = Mlp::init(MlpArch::siren(1, 1, 4, 2), 1).unwrap();
        let mut buf = Vec::new();
        write_weights(&m, &mut buf).unwrap();
        buf.truncate(buf.len() - 3);
        assert!(matches!(read_weights(&buf[..]), Err(Error::Parse { .. })));
    }
}
