//! Binary portable graymap (P5) I/O with maxval 255 or 65535.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use image::codecs::pnm::{GraymapHeader, PnmDecoder, PnmEncoder, PnmHeader, PnmSubtype, SampleEncoding};
use image::{ExtendedColorType, ImageDecoder};

use crate::error::{Error, Result};
use crate::image::ImagePatch;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PgmDepth {
    Eight,
    Sixteen,
}

impl PgmDepth {
    pub fn maxval(self) -> u32 {
        match self {
            PgmDepth::Eight => 255,
            PgmDepth::Sixteen => 65535,
        }
    }
}

fn pgm_err(e: impl std::fmt::Display) -> Error {
    Error::Pgm(e.to_string())
}

pub fn read_pgm<T: Scalar>(reader: impl std::io::BufRead) -> Result<ImagePatch<T>> {
    let decoder = PnmDecoder::new(reader).map_err(pgm_err)?;
    let header = decoder.header();
    if header.subtype() != PnmSubtype::Graymap(SampleEncoding::Binary) {
        return Err(Error::Pgm(format!("expected a P5 graymap, found {:?}", header.subtype())));
    }
    let maxval = header.maximal_sample();
    let depth = match maxval {
        255 => PgmDepth::Eight,
        65535 => PgmDepth::Sixteen,
        other => return Err(Error::Pgm(format!("unsupported maxval {other} (expected 255 or 65535)"))),
    };
    let (w, h) = decoder.dimensions();
    let mut buf = vec![0u8; decoder.total_bytes() as usize];
    decoder.read_image(&mut buf).map_err(pgm_err)?;
    let scale = 1.0 / maxval as f64;
    let pixels: Vec<T> = match depth {
        PgmDepth::Eight => buf.iter().map(|&b| T::lit(b as f64 * scale)).collect(),
        PgmDepth::Sixteen => buf
            .chunks_exact(2)
            .map(|c| T::lit(u16::from_ne_bytes([c[0], c[1]]) as f64 * scale))
            .collect(),
    };
    ImagePatch::new(h as usize, w as usize, pixels)
}

pub fn load_pgm<T: Scalar>(path: impl AsRef<Path>) -> Result<ImagePatch<T>> {
    read_pgm(BufReader::new(File::open(path)?))
}

/// Quantizes `patch` (clipped to `[0, 1]`) to the given depth.
pub fn write_pgm<T: Scalar>(patch: &ImagePatch<T>, depth: PgmDepth, writer: impl Write) -> Result<()> {
    let maxval = depth.maxval() as f64;
    let q = |v: T| (v.as_f64().clamp(0.0, 1.0) * maxval).round();
    let (w, h) = (patch.width() as u32, patch.height() as u32);
    let header = PnmHeader::from(GraymapHeader {
        encoding: SampleEncoding::Binary,
        height: h,
        width: w,
        maxwhite: depth.maxval(),
    });
    let mut encoder = PnmEncoder::new(writer).with_header(header);
    match depth {
        PgmDepth::Eight => {
            let data: Vec<u8> = patch.pixels().iter().map(|&v| q(v) as u8).collect();
            encoder.encode(data.as_slice(), w, h, ExtendedColorType::L8)
        }
        PgmDepth::Sixteen => {
            let data: Vec<u16> = patch.pixels().iter().map(|&v| q(v) as u16).collect();
            encoder.encode(data.as_slice(), w, h, ExtendedColorType::L16)
        }
    }
    .map_err(pgm_err)
}

pub fn save_pgm_with_depth<T: Scalar>(patch: &ImagePatch<T>, path: impl AsRef<Path>, depth: PgmDepth) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    write_pgm(patch, depth, &mut out)?;
    out.flush()?;
    Ok(())
}

/// 8-bit save.
pub fn save_pgm<T: Scalar>(patch: &ImagePatch<T>, path: impl AsRef<Path>) -> Result<()> {
    save_pgm_with_depth(patch, path, PgmDepth::Eight)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn read(bytes: &[u8]) -> Result<ImagePatch<f64>> {
        read_pgm(bytes)
    }

    #[test]
    fn single_white_pixel() {
        let img = read(b"P5\n1 1\n255\n\xff").unwrap();
        assert_eq!(img.shape(), (1, 1));
        assert_eq!(img.get(0, 0), 1.0);
    }

    #[test]
    fn header_comments() {
        let img = read(b"P5\n# made by hand\n2 1\n# maxval next\n255\n\x00\x33").unwrap();
        assert_eq!(img.shape(), (1, 2));
        assert_eq!(img.get(0, 1), 0x33 as f64 / 255.0);
    }

    #[test]
    fn sixteen_bit_is_big_endian() {
        let img = read(b"P5 2 1 65535\n\x00\x01\xff\xff").unwrap();
        assert_eq!(img.get(0, 0), 1.0 / 65535.0);
        assert_eq!(img.get(0, 1), 1.0);
    }

    #[test]
    fn malformed_inputs() {
        assert!(read(b"P5\n2 2\n255\n\x00\x01\x02").is_err());
        assert!(read(b"P5\n1 1\n1023\n\x00\x01").is_err());
        assert!(read(b"P2\n1 1\n255\n7\n").is_err());
        assert!(read(b"P5\nxx 1\n255\n\x00").is_err());
        assert!(read(b"").is_err());
    }

    #[test]
    fn round_trip_within_quantization() {
        let patch = ImagePatch::from_fn(5, 7, |r, c| ((r * 7 + c) as f64 * 0.618).fract());
        for (depth, bound) in [(PgmDepth::Eight, 0.5 / 255.0), (PgmDepth::Sixteen, 0.5 / 65535.0)] {
            let mut bytes = Vec::new();
            write_pgm(&patch, depth, &mut bytes).unwrap();
            assert!(bytes.starts_with(b"P5"));
            let back = read(&bytes).unwrap();
            assert_eq!(back.shape(), patch.shape());
            for (a, b) in patch.pixels().iter().zip(back.pixels()) {
                assert!((a - b).abs() <= bound + 1e-15);
            }
            let mut again = Vec::new();
            write_pgm(&back, depth, &mut again).unwrap();
            assert_eq!(bytes, again);
        }
    }
}
