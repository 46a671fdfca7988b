//! RIFF/WAVE, 16-bit PCM, mono.

use std::path::Path;

use super::{grid_coords, Modality, Signal, ValueScale};
use crate::error::{Error, Result};
use crate::linalg::Matrix;

fn u16_at(buf: &[u8], at: usize) -> Option<u16> {
    Some(u16::from_le_bytes(buf.get(at..at + 2)?.try_into().ok()?))
}

fn u32_at(buf: &[u8], at: usize) -> Option<u32> {
    Some(u32::from_le_bytes(buf.get(at..at + 4)?.try_into().ok()?))
}

pub fn parse_wav(buf: &[u8]) -> Result<Signal> {
    if buf.get(0..4) != Some(b"RIFF") || buf.get(8..12) != Some(b"WAVE") {
        return Err(Error::parse(0, "not a RIFF/WAVE file"));
    }
    let mut pos = 12;
    let mut format: Option<(u32, usize)> = None;
    loop {
        let id = buf
            .get(pos..pos + 4)
            .ok_or_else(|| Error::parse(pos, "missing 'data' chunk"))?;
        let size = u32_at(buf, pos + 4)
            .ok_or_else(|| Error::parse(pos + 4, "truncated chunk header"))? as usize;
        let body = pos + 8;
        let end = body
            .checked_add(size)
            .filter(|&e| e <= buf.len());
        match id {
            b"fmt " => {
                if size < 16 || end.is_none() {
                    return Err(Error::parse(pos, "'fmt ' chunk truncated"));
                }
                let tag = u16_at(buf, body).unwrap_or(0);
                let channels = u16_at(buf, body + 2).unwrap_or(0);
                let rate = u32_at(buf, body + 4).unwrap_or(0);
                let bits = u16_at(buf, body + 14).unwrap_or(0);
                if tag != 1 || channels != 1 || bits != 16 {
                    return Err(Error::parse(
                        body,
                        format!(
                            "'fmt ' chunk: unsupported encoding (format {tag}, {channels} channels, {bits} bits); need PCM16 mono"
                        ),
                    ));
                }
                format = Some((rate, body));
            }
            b"data" => {
                let (rate, _) =
                    format.ok_or_else(|| Error::parse(pos, "'data' chunk before 'fmt ' chunk"))?;
                let end = end.ok_or_else(|| {
                    Error::parse(buf.len(), format!("'data' chunk truncated: declares {size} bytes"))
                })?;
                if !size.is_multiple_of(2) {
                    return Err(Error::parse(pos + 4, "'data' chunk has an odd byte count"));
                }
                let samples: Vec<f64> = buf[body..end]
                    .chunks_exact(2)
                    .map(|c| ValueScale::PCM16.to_value(i16::from_le_bytes([c[0], c[1]]) as f64))
                    .collect();
                let n = samples.len();
                return Ok(Signal {
                    modality: Modality::Audio1D,
                    coords: grid_coords(&[n]),
                    values: Matrix::from_vec(n, 1, samples)?,
                    shape: vec![n],
                    value_scale: ValueScale::PCM16,
                    sample_rate: Some(rate),
                });
            }
            _ => {
                if end.is_none() {
                    return Err(Error::parse(pos, "chunk runs past end of file"));
                }
            }
        }
        // chunks are padded to even length
        pos = body + size + (size & 1);
    }
}

pub fn load_audio_wav(path: &Path) -> Result<Signal> {
    let buf = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_wav(&buf)
}

/// Encodes a mono signal as PCM16, rounding half to even and clamping.
pub fn write_wav(signal: &Signal) -> Result<Vec<u8>> {
    if signal.channels() != 1 {
        return Err(Error::invalid("only mono audio can be written"));
    }
    let rate = signal.sample_rate.unwrap_or(16_000);
    let n = signal.len();
    let data_len = u32::try_from(2 * n).map_err(|_| Error::invalid("audio too long for WAV"))?;
    let mut out = Vec::with_capacity(44 + 2 * n);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&(36 + data_len).to_le_bytes());
    out.extend_from_slice(b"WAVEfmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes());
    out.extend_from_slice(&rate.to_le_bytes());
    out.extend_from_slice(&(2 * rate).to_le_bytes());
    out.extend_from_slice(&2u16.to_le_bytes());
    out.extend_from_slice(&16u16.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&data_len.to_le_bytes());
    for &v in signal.values.as_slice() {
        let raw = ValueScale::PCM16
            .to_raw(v)
            .round_ties_even()
            .clamp(-32768.0, 32767.0) as i16;
        out.extend_from_slice(&raw.to_le_bytes());
    }
    Ok(out)
}

pub fn save_audio_wav(signal: &Signal, path: &Path) -> Result<()> {
    std::fs::write(path, write_wav(signal)?).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn wav_of(samples: &[i16]) -> Vec<u8> {
        let values = samples.iter().map(|&s| s as f64 / 32768.0).collect();
        let s = Signal {
            modality: Modality::Audio1D,
            coords: grid_coords(&[samples.len()]),
            values: Matrix::from_vec(samples.len(), 1, values).unwrap(),
            shape: vec![samples.len()],
            value_scale: ValueScale::PCM16,
            sample_rate: Some(8000),
        };
        write_wav(&s).unwrap()
    }

    #[test]
    fn scaling_extremes() {
        let s = parse_wav(&wav_of(&[-32768, 32767, 0])).unwrap();
        assert_eq!(s.values.as_slice(), &[-1.0, 32767.0 / 32768.0, 0.0]);
        assert_eq!(s.sample_rate, Some(8000));
    }

    #[test]
    fn silence_is_zero() {
        let s = parse_wav(&wav_of(&[0; 10])).unwrap();
        assert!(s.values.as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn round_trip_is_exact() {
        let samples: Vec<i16> = (0..500).map(|i| ((i * 7919) % 65536 - 32768) as i16).collect();
        let buf = wav_of(&samples);
        assert_eq!(write_wav(&parse_wav(&buf).unwrap()).unwrap(), buf);
    }

    #[test]
    fn unknown_chunks_skipped() {
        let mut buf = wav_of(&[1, 2]);
        let mut extra = b"LIST\x03\x00\x00\x00abc\x00".to_vec();
        let data_at = 36;
        buf.splice(data_at..data_at, extra.drain(..));
        let s = parse_wav(&buf).unwrap();
        assert_eq!(s.len(), 2);
    }

    #[test]
    fn stereo_rejected_naming_chunk() {
        let mut buf = wav_of(&[1, 2]);
        buf[22] = 2;
        match parse_wav(&buf) {
            Err(Error::Parse { message, .. }) => assert!(message.contains("fmt ")),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn truncated_data_rejected() {
        let buf = wav_of(&[1, 2, 3]);
        assert!(parse_wav(&buf[..buf.len() - 1]).is_err());
    }
}
