//! RIFF/WAVE reading (PCM 8/16/24/32-bit, IEEE float 32/64) and 16-bit PCM writing.

use std::fs;
use std::path::Path;

use super::{downmix, Waveform};
use crate::error::{Error, Result};

const FORMAT_PCM: u16 = 1;
const FORMAT_FLOAT: u16 = 3;
const FORMAT_EXTENSIBLE: u16 = 0xFFFE;

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(Error::Decode {
                offset: self.pos as u64,
                message: format!("truncated {what}: need {n} bytes"),
            });
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u16(&mut self, what: &str) -> Result<u16> {
        let b = self.take(2, what)?;
        Ok(u16::from_le_bytes([b[0], b[1]]))
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        let b = self.take(4, what)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }
}

struct Format {
    code: u16,
    channels: u16,
    sample_rate: u32,
    bits: u16,
}

/// Decode an in-memory RIFF/WAVE byte stream, averaging channels to mono.
pub fn decode_wav(bytes: &[u8]) -> Result<Waveform> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4, "RIFF tag")? != b"RIFF" {
        return Err(Error::Decode {
            offset: 0,
            message: "missing RIFF tag".into(),
        });
    }
    r.u32("RIFF size")?;
    if r.take(4, "WAVE tag")? != b"WAVE" {
        return Err(Error::Decode {
            offset: 8,
            message: "missing WAVE tag".into(),
        });
    }

    let mut format: Option<Format> = None;
    let mut data: Option<(usize, &[u8])> = None;
    while r.pos + 8 <= bytes.len() {
        let id_offset = r.pos;
        let id = r.take(4, "chunk id")?;
        let size = r.u32("chunk size")? as usize;
        let body_offset = r.pos;
        // Tolerate a data chunk whose declared size overruns the file.
        let avail = bytes.len() - r.pos;
        let body = if id == b"data" && size > avail {
            r.take(avail, "data chunk")?
        } else {
            r.take(size, "chunk body")?
        };
        match id {
            b"fmt " => {
                if body.len() < 16 {
                    return Err(Error::Decode {
                        offset: id_offset as u64,
                        message: "fmt chunk shorter than 16 bytes".into(),
                    });
                }
                let mut f = Reader { bytes: body, pos: 0 };
                let mut code = f.u16("format code")?;
                let channels = f.u16("channel count")?;
                let sample_rate = f.u32("sample rate")?;
                f.u32("byte rate")?;
                f.u16("block align")?;
                let bits = f.u16("bits per sample")?;
                if code == FORMAT_EXTENSIBLE {
                    if body.len() < 26 {
                        return Err(Error::Decode {
                            offset: (body_offset + 16) as u64,
                            message: "extensible fmt chunk missing sub-format".into(),
                        });
                    }
                    code = u16::from_le_bytes([body[24], body[25]]);
                }
                format = Some(Format {
                    code,
                    channels,
                    sample_rate,
                    bits,
                });
            }
            b"data" => data = Some((body_offset, body)),
            _ => {}
        }
        if size % 2 == 1 && r.pos < bytes.len() {
            r.pos += 1;
        }
    }

    let fmt = format.ok_or_else(|| Error::Decode {
        offset: 12,
        message: "no fmt chunk".into(),
    })?;
    let (data_offset, data) = data.ok_or_else(|| Error::Decode {
        offset: r.pos as u64,
        message: "no data chunk".into(),
    })?;
    if fmt.channels == 0 {
        return Err(Error::Decode {
            offset: 22,
            message: "zero channels".into(),
        });
    }
    if fmt.sample_rate == 0 {
        return Err(Error::Decode {
            offset: 24,
            message: "zero sample rate".into(),
        });
    }

    let values = decode_samples(&fmt, data, data_offset)?;
    let channels = fmt.channels as usize;
    if values.len() < channels {
        return Err(Error::Decode {
            offset: data_offset as u64,
            message: "data chunk holds no complete frame".into(),
        });
    }
    let mono = downmix(&values[..values.len() - values.len() % channels], channels);
    Waveform::new(mono, fmt.sample_rate)
}

fn decode_samples(fmt: &Format, data: &[u8], data_offset: usize) -> Result<Vec<f64>> {
    let values: Vec<f64> = match (fmt.code, fmt.bits) {
        (FORMAT_PCM, 8) => data.iter().map(|&b| (b as f64 - 128.0) / 128.0).collect(),
        (FORMAT_PCM, 16) => data
            .chunks_exact(2)
            .map(|b| i16::from_le_bytes([b[0], b[1]]) as f64 / 32768.0)
            .collect(),
        (FORMAT_PCM, 24) => data
            .chunks_exact(3)
            .map(|b| {
                let v = i32::from_le_bytes([0, b[0], b[1], b[2]]) >> 8;
                v as f64 / 8_388_608.0
            })
            .collect(),
        (FORMAT_PCM, 32) => data
            .chunks_exact(4)
            .map(|b| i32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64 / 2_147_483_648.0)
            .collect(),
        (FORMAT_FLOAT, 32) => data
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64)
            .collect(),
        (FORMAT_FLOAT, 64) => data
            .chunks_exact(8)
            .map(|b| f64::from_le_bytes(b.try_into().expect("chunk of 8")))
            .collect(),
        (code, bits) => {
            return Err(Error::UnsupportedFormat(format!(
                "format code {code} with {bits} bits per sample"
            )))
        }
    };
    let width = (fmt.bits / 8) as usize;
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::Decode {
            offset: (data_offset + i * width) as u64,
            message: "non-finite float sample".into(),
        });
    }
    Ok(values)
}

pub fn read_wav(path: impl AsRef<Path>) -> Result<Waveform> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_wav(&bytes)
}

/// Quantize to 16-bit PCM: clamp to [-1, 1], scale by 32768, round half away
/// from zero, saturate at the i16 range.
pub fn quantize_i16(x: f32) -> i16 {
    let v = (x.clamp(-1.0, 1.0) as f64 * 32768.0).round();
    v.clamp(-32768.0, 32767.0) as i16
}

/// Encode as a mono 16-bit PCM RIFF/WAVE byte stream.
pub fn encode_wav(w: &Waveform) -> Vec<u8> {
    let data_len = (w.len() * 2) as u32;
    let mut out = Vec::with_capacity(44 + data_len as usize);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&(36 + data_len).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&FORMAT_PCM.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes());
    out.extend_from_slice(&w.sample_rate_hz().to_le_bytes());
    out.extend_from_slice(&(w.sample_rate_hz() * 2).to_le_bytes());
    out.extend_from_slice(&2u16.to_le_bytes());
    out.extend_from_slice(&16u16.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&data_len.to_le_bytes());
    for &s in w.samples() {
        out.extend_from_slice(&quantize_i16(s).to_le_bytes());
    }
    out
}

pub fn write_wav(w: &Waveform, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_wav(w)).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn wav_bytes(code: u16, channels: u16, bits: u16, rate: u32, data: &[u8]) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(b"RIFF");
        out.extend_from_slice(&(36 + data.len() as u32).to_le_bytes());
        out.extend_from_slice(b"WAVEfmt ");
        out.extend_from_slice(&16u32.to_le_bytes());
        out.extend_from_slice(&code.to_le_bytes());
        out.extend_from_slice(&channels.to_le_bytes());
        out.extend_from_slice(&rate.to_le_bytes());
        let align = channels * bits / 8;
        out.extend_from_slice(&(rate * align as u32).to_le_bytes());
        out.extend_from_slice(&align.to_le_bytes());
        out.extend_from_slice(&bits.to_le_bytes());
        out.extend_from_slice(b"data");
        out.extend_from_slice(&(data.len() as u32).to_le_bytes());
        out.extend_from_slice(data);
        out
    }

    #[test]
    fn sixteen_bit_scaling() {
        let data: Vec<u8> = [0i16, 16384, -32768]
            .iter()
            .flat_map(|v| v.to_le_bytes())
            .collect();
        let w = decode_wav(&wav_bytes(1, 1, 16, 8000, &data)).unwrap();
        assert_eq!(w.samples(), &[0.0, 0.5, -1.0]);
    }

    #[test]
    fn stereo_is_averaged() {
        let data: Vec<u8> = [1.0f32, 0.0].iter().flat_map(|v| v.to_le_bytes()).collect();
        let w = decode_wav(&wav_bytes(3, 2, 32, 8000, &data)).unwrap();
        assert_eq!(w.samples(), &[0.5]);
    }

    #[test]
    fn eight_and_twenty_four_bit() {
        let w = decode_wav(&wav_bytes(1, 1, 8, 8000, &[128, 192, 0])).unwrap();
        assert_eq!(w.samples(), &[0.0, 0.5, -1.0]);
        let data = [0x00, 0x00, 0x40, 0x00, 0x00, 0x80];
        let w = decode_wav(&wav_bytes(1, 1, 24, 8000, &data)).unwrap();
        assert_eq!(w.samples(), &[0.5, -1.0]);
    }

    #[test]
    fn quantization_extremes() {
        assert_eq!(quantize_i16(1.0), 32767);
        assert_eq!(quantize_i16(-1.0), -32768);
        assert_eq!(quantize_i16(2.0), 32767);
        assert_eq!(quantize_i16(0.5 / 32768.0), 1);
        assert_eq!(quantize_i16(-0.5 / 32768.0), -1);
    }

    #[test]
    fn errors_name_offsets_and_formats() {
        match decode_wav(b"RIFX") {
            Err(Error::Decode { offset: 0, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
        let alaw = wav_bytes(6, 1, 8, 8000, &[0, 1]);
        assert!(matches!(decode_wav(&alaw), Err(Error::UnsupportedFormat(_))));
        let mut truncated = wav_bytes(1, 1, 16, 8000, &[0, 0]);
        truncated.truncate(30);
        assert!(matches!(decode_wav(&truncated), Err(Error::Decode { .. })));
    }

    #[test]
    fn nan_float_sample_is_an_error() {
        let data: Vec<u8> = [0.0f32, f32::NAN].iter().flat_map(|v| v.to_le_bytes()).collect();
        match decode_wav(&wav_bytes(3, 1, 32, 8000, &data)) {
            Err(Error::Decode { offset, .. }) => assert_eq!(offset, 48),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn encoded_duration_for_generated_clip() {
        let w = Waveform::silence(196_608, 44_100).unwrap();
        let bytes = encode_wav(&w);
        assert_eq!(bytes.len(), 44 + 2 * 196_608);
        let back = decode_wav(&bytes).unwrap();
        assert!((back.duration_secs() - 4.458).abs() < 1e-3);
    }
}
