//! Little-endian read/write helpers shared by the on-disk formats.
//! Truncation surfaces as FormatError naming the field being read, not
//! as a bare I/O error.

use std::io::{Read, Write};

use crate::error::{Error, Result};

pub(crate) fn read_exact_or_format(r: &mut impl Read, buf: &mut [u8], what: &str) -> Result<()> {
    r.read_exact(buf).map_err(|e| {
        if e.kind() == std::io::ErrorKind::UnexpectedEof {
            Error::Format(format!("truncated file while reading {what}"))
        } else {
            e.into()
        }
    })
}

pub(crate) fn read_u32_le(r: &mut impl Read, what: &str) -> Result<u32> {
    let mut b = [0u8; 4];
    read_exact_or_format(r, &mut b, what)?;
    Ok(u32::from_le_bytes(b))
}

pub(crate) fn read_u64_le(r: &mut impl Read, what: &str) -> Result<u64> {
    let mut b = [0u8; 8];
    read_exact_or_format(r, &mut b, what)?;
    Ok(u64::from_le_bytes(b))
}

pub(crate) fn read_f32_le(r: &mut impl Read, what: &str) -> Result<f32> {
    let mut b = [0u8; 4];
    read_exact_or_format(r, &mut b, what)?;
    Ok(f32::from_le_bytes(b))
}

pub(crate) fn write_u32_le(w: &mut impl Write, v: u32) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

pub(crate) fn write_u64_le(w: &mut impl Write, v: u64) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

pub(crate) fn write_f32_le(w: &mut impl Write, v: f32) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}
