//! The 16 binary 4-pixel images `0h..Fh` and the 8-image toy database.
//!
//! Pixel `j` of image `h` is bit `j` of `h`.

use crate::encoding::{Database, ImageData};
use crate::error::{Error, Result};

pub const TOY_PIXELS: usize = 4;

/// Images at database indices 0..8.
pub const TOY_DATABASE_HEX: [u8; 8] = [0x0, 0x2, 0x4, 0x6, 0x8, 0xA, 0xC, 0xE];

pub fn image(hex: u8) -> Result<ImageData> {
    if hex > 0xF {
        return Err(Error::InvalidArgument(format!("toy image {hex:#x} out of range 0h..Fh")));
    }
    ImageData::binary_from_bits(hex as u64, TOY_PIXELS)
}

pub fn label(hex: u8) -> String {
    format!("{hex:X}h")
}

/// Parses `"0h"`, `"Ah"`, `"a"`, `"0xA"` or `"10"`.
pub fn parse_hex(s: &str) -> Result<u8> {
    let t = s.trim();
    let t = t.strip_suffix(['h', 'H']).unwrap_or(t);
    let t = t.strip_prefix("0x").unwrap_or(t);
    let v = u8::from_str_radix(t, 16)
        .map_err(|_| Error::InvalidArgument(format!("bad toy image name {s:?}")))?;
    if v > 0xF {
        return Err(Error::InvalidArgument(format!("toy image {s:?} out of range 0h..Fh")));
    }
    Ok(v)
}

pub fn database() -> Database {
    Database::new(
        TOY_DATABASE_HEX.iter().map(|&h| image(h).unwrap()).collect(),
        Some(TOY_DATABASE_HEX.iter().map(|&h| label(h)).collect()),
    )
    .expect("toy database is well-formed")
}

/// Database index holding `hex`, if present.
pub fn index_of(hex: u8) -> Option<usize> {
    TOY_DATABASE_HEX.iter().position(|&h| h == hex)
}
