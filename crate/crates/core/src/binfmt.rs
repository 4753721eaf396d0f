//! Shared pieces of the binary container formats: 4-byte magic, `u32`
//! little-endian version, `u64` little-endian header length, UTF-8 JSON
//! header, then little-endian `f32` payloads.

use std::io::{Read, Write};

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub(crate) fn io_err(e: std::io::Error) -> Error {
    Error::Io {
        path: "<stream>".into(),
        source: e,
    }
}

pub(crate) fn write_preamble<W: Write, H: Serialize>(w: &mut W, magic: &[u8; 4], version: u32, header: &H) -> Result<()> {
    let json = serde_json::to_vec(header)?;
    w.write_all(magic).map_err(io_err)?;
    w.write_all(&version.to_le_bytes()).map_err(io_err)?;
    w.write_all(&(json.len() as u64).to_le_bytes()).map_err(io_err)?;
    w.write_all(&json).map_err(io_err)?;
    Ok(())
}

pub(crate) fn read_preamble<R: Read, H: DeserializeOwned>(r: &mut R, magic: &[u8; 4], version: u32) -> Result<H> {
    let mut got = [0u8; 4];
    read_exact(r, &mut got)?;
    if &got != magic {
        return Err(Error::format(format!(
            "bad magic {:?}, expected {:?}",
            String::from_utf8_lossy(&got),
            String::from_utf8_lossy(magic)
        )));
    }
    let v = read_u32(r)?;
    if v != version {
        return Err(Error::format(format!("unsupported version {v}, expected {version}")));
    }
    read_json(r)
}

pub(crate) fn write_json_block<W: Write, H: Serialize>(w: &mut W, value: &H) -> Result<()> {
    let json = serde_json::to_vec(value)?;
    w.write_all(&(json.len() as u64).to_le_bytes()).map_err(io_err)?;
    w.write_all(&json).map_err(io_err)
}

pub(crate) fn read_json<R: Read, H: DeserializeOwned>(r: &mut R) -> Result<H> {
    let len = read_u64(r)?;
    if len > (1 << 31) {
        return Err(Error::format(format!("header length {len} is implausible")));
    }
    let mut buf = vec![0u8; len as usize];
    read_exact(r, &mut buf)?;
    let text = std::str::from_utf8(&buf).map_err(|_| Error::format("header is not UTF-8"))?;
    Ok(serde_json::from_str(text)?)
}

pub(crate) fn write_f32s<W: Write, S: Scalar>(w: &mut W, values: &[S]) -> Result<()> {
    let mut buf = Vec::with_capacity(values.len() * 4);
    for v in values {
        buf.extend_from_slice(&(v.to_f64_lossy() as f32).to_le_bytes());
    }
    w.write_all(&buf).map_err(io_err)
}

pub(crate) fn read_f32s<R: Read, S: Scalar>(r: &mut R, count: usize) -> Result<Vec<S>> {
    let mut buf = vec![0u8; count * 4];
    read_exact(r, &mut buf)?;
    Ok(buf
        .chunks_exact(4)
        .map(|b| S::from_f64_lossy(f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64))
        .collect())
}

fn read_exact<R: Read>(r: &mut R, buf: &mut [u8]) -> Result<()> {
    r.read_exact(buf).map_err(|e| {
        if e.kind() == std::io::ErrorKind::UnexpectedEof {
            Error::format("unexpected end of file")
        } else {
            io_err(e)
        }
    })
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    read_exact(r, &mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    read_exact(r, &mut b)?;
    Ok(u64::from_le_bytes(b))
}

pub(crate) fn expect_eof<R: Read>(r: &mut R) -> Result<()> {
    let mut b = [0u8; 1];
    match r.read(&mut b).map_err(io_err)? {
        0 => Ok(()),
        _ => Err(Error::format("trailing bytes after payload")),
    }
}
