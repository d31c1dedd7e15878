//! Minimal RIFF/WAVE reader and writer.
//!
//! Reads 16-bit PCM (scaled by 1/32768) and 32-bit IEEE float, mono or
//! multi-channel (channels are averaged to mono unless one is selected).
//! Writes 32-bit IEEE float mono. Nothing here resamples: the sample rate
//! travels with the data.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::signal::Signal;

const FMT_PCM: u16 = 1;
const FMT_IEEE_FLOAT: u16 = 3;
const FMT_EXTENSIBLE: u16 = 0xFFFE;

/// Load a WAV file, averaging channels to mono.
pub fn load_audio(path: impl AsRef<Path>) -> Result<Signal> {
    load_audio_channel(path, None)
}

/// Load a WAV file. `channel` picks one channel (0-based); `None` averages
/// all channels. This is how the two channels of an audio+EGG recording are
/// pulled apart.
pub fn load_audio_channel(path: impl AsRef<Path>, channel: Option<usize>) -> Result<Signal> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_wav(path, &bytes, channel)
}

fn decode_wav(path: &Path, b: &[u8], channel: Option<usize>) -> Result<Signal> {
    let parse_err = |offset: usize, detail: &str| Error::WavParse {
        path: path.to_path_buf(),
        offset: offset as u64,
        detail: detail.to_string(),
    };

    if b.len() < 12 {
        return Err(parse_err(b.len(), "file shorter than RIFF header"));
    }
    if &b[0..4] != b"RIFF" {
        return Err(parse_err(0, "missing RIFF magic"));
    }
    if &b[8..12] != b"WAVE" {
        return Err(parse_err(8, "missing WAVE form type"));
    }

    let mut pos = 12usize;
    let mut fmt: Option<(u16, u16, u32, u16)> = None; // (format, channels, rate, bits)
    let mut data: Option<(usize, usize)> = None; // (offset, len)

    while pos + 8 <= b.len() {
        let id = &b[pos..pos + 4];
        let size = u32::from_le_bytes(b[pos + 4..pos + 8].try_into().unwrap()) as usize;
        let body = pos + 8;
        if body + size > b.len() {
            return Err(parse_err(
                body,
                &format!(
                    "chunk '{}' claims {} bytes but only {} remain",
                    String::from_utf8_lossy(id),
                    size,
                    b.len() - body
                ),
            ));
        }
        match id {
            b"fmt " => {
                if size < 16 {
                    return Err(parse_err(body, "fmt chunk shorter than 16 bytes"));
                }
                let mut format = u16::from_le_bytes(b[body..body + 2].try_into().unwrap());
                let channels = u16::from_le_bytes(b[body + 2..body + 4].try_into().unwrap());
                let rate = u32::from_le_bytes(b[body + 4..body + 8].try_into().unwrap());
                let bits = u16::from_le_bytes(b[body + 14..body + 16].try_into().unwrap());
                if format == FMT_EXTENSIBLE {
                    // sub-format GUID starts with the real format tag
                    if size < 40 {
                        return Err(parse_err(body, "extensible fmt chunk shorter than 40 bytes"));
                    }
                    format = u16::from_le_bytes(b[body + 24..body + 26].try_into().unwrap());
                }
                fmt = Some((format, channels, rate, bits));
            }
            b"data" => {
                data = Some((body, size));
            }
            _ => {}
        }
        // chunks are word-aligned
        pos = body + size + (size & 1);
    }

    let (format, channels, rate, bits) = fmt.ok_or_else(|| parse_err(pos, "no fmt chunk"))?;
    let (data_off, data_len) = data.ok_or_else(|| parse_err(pos, "no data chunk"))?;
    if channels == 0 {
        return Err(parse_err(data_off, "fmt chunk declares zero channels"));
    }
    if rate == 0 {
        return Err(parse_err(data_off, "fmt chunk declares zero sample rate"));
    }
    let channels = channels as usize;
    if let Some(c) = channel {
        if c >= channels {
            return Err(Error::Domain(format!(
                "{}: channel {} requested but file has {}",
                path.display(),
                c,
                channels
            )));
        }
    }

    let unsupported = |what: String| Error::WavEncoding {
        path: path.to_path_buf(),
        detail: what,
    };

    let bytes_per = match (format, bits) {
        (FMT_PCM, 16) => 2,
        (FMT_IEEE_FLOAT, 32) => 4,
        (FMT_PCM, other) => {
            return Err(unsupported(format!("{}-bit PCM (only 16-bit PCM is read)", other)))
        }
        (FMT_IEEE_FLOAT, other) => {
            return Err(unsupported(format!(
                "{}-bit float (only 32-bit float is read)",
                other
            )))
        }
        (tag, _) => return Err(unsupported(format!("format tag {:#06x}", tag))),
    };

    let frame_bytes = bytes_per * channels;
    let n_frames = data_len / frame_bytes;
    if data_len % frame_bytes != 0 {
        return Err(parse_err(
            data_off + n_frames * frame_bytes,
            &format!(
                "data chunk length {} is not a multiple of the {}-byte frame",
                data_len, frame_bytes
            ),
        ));
    }

    let mut samples = vec![0.0f64; n_frames];
    let raw = &b[data_off..data_off + data_len];
    match bytes_per {
        2 => {
            for (i, out) in samples.iter_mut().enumerate() {
                let base = i * frame_bytes;
                *out = match channel {
                    Some(c) => {
                        let o = base + 2 * c;
                        i16::from_le_bytes(raw[o..o + 2].try_into().unwrap()) as f64 / 32768.0
                    }
                    None => {
                        let mut acc = 0.0;
                        for c in 0..channels {
                            let o = base + 2 * c;
                            acc += i16::from_le_bytes(raw[o..o + 2].try_into().unwrap()) as f64;
                        }
                        acc / (32768.0 * channels as f64)
                    }
                };
            }
        }
        _ => {
            for (i, out) in samples.iter_mut().enumerate() {
                let base = i * frame_bytes;
                *out = match channel {
                    Some(c) => {
                        let o = base + 4 * c;
                        f32::from_le_bytes(raw[o..o + 4].try_into().unwrap()) as f64
                    }
                    None => {
                        let mut acc = 0.0;
                        for c in 0..channels {
                            let o = base + 4 * c;
                            acc += f32::from_le_bytes(raw[o..o + 4].try_into().unwrap()) as f64;
                        }
                        acc / channels as f64
                    }
                };
            }
        }
    }

    Ok(Signal::new(samples, rate))
}

/// Write a signal as mono 32-bit float WAV.
pub fn save_audio(path: impl AsRef<Path>, signal: &Signal) -> Result<()> {
    let path = path.as_ref();
    let data_len = signal.samples.len() * 4;
    let mut out = Vec::with_capacity(44 + data_len);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&((36 + data_len) as u32).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&FMT_IEEE_FLOAT.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes()); // channels
    out.extend_from_slice(&signal.sample_rate.to_le_bytes());
    out.extend_from_slice(&(signal.sample_rate * 4).to_le_bytes()); // byte rate
    out.extend_from_slice(&4u16.to_le_bytes()); // block align
    out.extend_from_slice(&32u16.to_le_bytes()); // bits per sample
    out.extend_from_slice(b"data");
    out.extend_from_slice(&(data_len as u32).to_le_bytes());
    for &x in &signal.samples {
        out.extend_from_slice(&(x as f32).to_le_bytes());
    }

    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&out).map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Read a whole file (helper shared by the CSV loaders).
pub(crate) fn read_to_string(path: &Path) -> Result<String> {
    let mut s = String::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_string(&mut s))
        .map_err(|e| Error::io(path, e))?;
    Ok(s)
}
