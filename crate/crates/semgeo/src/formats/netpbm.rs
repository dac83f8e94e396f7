//! Netpbm raster IO: PFM (portable float map) for explanation rasters and
//! binary PGM with a 16-bit max value for label rasters.
//!
//! PFM follows the usual conventions: a `PF` (3-channel) or `Pf`
//! (1-channel) magic, dimensions, a scale line whose sign encodes sample
//! endianness (negative = little endian), and rows stored bottom-to-top.
//! In-memory rasters are top-down; readers and writers flip accordingly, so
//! a write/read pair is bit-exact.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use crate::concept::{channel_max, ChannelStack, ExplanationMap, SegmentationMap};
use crate::error::{Error, Result};

/// Byte order of PFM samples, encoded in the sign of the scale line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PfmEndianness {
    #[default]
    Little,
    Big,
}

const MAX_DIMENSION: usize = 1 << 16;

fn check_dimensions(width: usize, height: usize, channels: usize) -> Result<()> {
    if width == 0 || height == 0 || width > MAX_DIMENSION || height > MAX_DIMENSION {
        return Err(Error::Format(format!(
            "raster dimensions {width}x{height} out of range"
        )));
    }
    // guard the multiplication before allocating
    width
        .checked_mul(height)
        .and_then(|p| p.checked_mul(channels))
        .and_then(|p| p.checked_mul(4))
        .ok_or_else(|| Error::Format("raster dimension overflow".into()))?;
    Ok(())
}

/// Pulls the next whitespace-delimited token, skipping `#` comment lines.
fn next_token<'a>(bytes: &'a [u8], pos: &mut usize, what: &str) -> Result<&'a [u8]> {
    loop {
        while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        if *pos < bytes.len() && bytes[*pos] == b'#' {
            while *pos < bytes.len() && bytes[*pos] != b'\n' {
                *pos += 1;
            }
            continue;
        }
        break;
    }
    let start = *pos;
    while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() {
        *pos += 1;
    }
    if start == *pos {
        return Err(Error::Format(format!("truncated header: missing {what}")));
    }
    Ok(&bytes[start..*pos])
}

fn parse_number<T: std::str::FromStr>(token: &[u8], what: &str) -> Result<T> {
    std::str::from_utf8(token)
        .ok()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::Format(format!("bad {what} in header")))
}

pub fn read_pfm(path: impl AsRef<Path>) -> Result<ChannelStack> {
    let mut bytes = Vec::new();
    File::open(path.as_ref())?.read_to_end(&mut bytes)?;
    read_pfm_bytes(&bytes)
}

pub fn read_pfm_bytes(bytes: &[u8]) -> Result<ChannelStack> {
    let mut pos = 0;
    let magic = next_token(bytes, &mut pos, "magic")?;
    let channels = match magic {
        b"PF" => 3,
        b"Pf" => 1,
        other => {
            return Err(Error::Format(format!(
                "bad magic {:?}, expected PF or Pf",
                String::from_utf8_lossy(other)
            )))
        }
    };
    let width: usize = parse_number(next_token(bytes, &mut pos, "width")?, "width")?;
    let height: usize = parse_number(next_token(bytes, &mut pos, "height")?, "height")?;
    check_dimensions(width, height, channels)?;
    let scale: f32 = parse_number(next_token(bytes, &mut pos, "scale")?, "scale")?;
    if scale == 0.0 || !scale.is_finite() {
        return Err(Error::Format("scale must be finite and non-zero".into()));
    }
    let little_endian = scale < 0.0;
    // exactly one whitespace byte separates the scale line from the payload
    pos += 1;
    let expected = width * height * channels * 4;
    let payload = bytes
        .get(pos..pos + expected)
        .ok_or_else(|| Error::Format("truncated payload".into()))?;

    let mut values = vec![0.0f32; width * height * channels];
    let row_len = width * channels;
    for file_row in 0..height {
        let mem_row = height - 1 - file_row; // bottom-up file order
        for i in 0..row_len {
            let offset = (file_row * row_len + i) * 4;
            let raw: [u8; 4] = payload[offset..offset + 4].try_into().unwrap();
            let v = if little_endian {
                f32::from_le_bytes(raw)
            } else {
                f32::from_be_bytes(raw)
            };
            values[mem_row * row_len + i] = v;
        }
    }
    ChannelStack::new(width, height, channels, values)
}

pub fn write_pfm(path: impl AsRef<Path>, stack: &ChannelStack) -> Result<()> {
    write_pfm_with(path, stack, PfmEndianness::Little)
}

pub fn write_pfm_with(
    path: impl AsRef<Path>,
    stack: &ChannelStack,
    endianness: PfmEndianness,
) -> Result<()> {
    let channels = stack.channels();
    let magic = match channels {
        1 => "Pf",
        3 => "PF",
        other => {
            return Err(Error::Format(format!(
                "PFM supports 1 or 3 channels, not {other}"
            )))
        }
    };
    let scale = match endianness {
        PfmEndianness::Little => "-1.0",
        PfmEndianness::Big => "1.0",
    };
    let mut out = BufWriter::new(File::create(path.as_ref())?);
    write!(out, "{magic}\n{} {}\n{scale}\n", stack.width(), stack.height())?;
    let row_len = stack.width() * channels;
    for file_row in 0..stack.height() {
        let mem_row = stack.height() - 1 - file_row;
        let row = &stack.values()[mem_row * row_len..(mem_row + 1) * row_len];
        for &v in row {
            let raw = match endianness {
                PfmEndianness::Little => v.to_le_bytes(),
                PfmEndianness::Big => v.to_be_bytes(),
            };
            out.write_all(&raw)?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Reads a PFM and reduces it over channels into an explanation raster.
pub fn read_explanation(path: impl AsRef<Path>) -> Result<ExplanationMap> {
    let stack = read_pfm(path)?;
    Ok(channel_max(&stack))
}

pub fn read_pgm(path: impl AsRef<Path>) -> Result<SegmentationMap> {
    let mut bytes = Vec::new();
    File::open(path.as_ref())?.read_to_end(&mut bytes)?;
    read_pgm_bytes(&bytes)
}

pub fn read_pgm_bytes(bytes: &[u8]) -> Result<SegmentationMap> {
    let mut pos = 0;
    let magic = next_token(bytes, &mut pos, "magic")?;
    if magic != b"P5" {
        return Err(Error::Format(format!(
            "bad magic {:?}, expected P5",
            String::from_utf8_lossy(magic)
        )));
    }
    let width: usize = parse_number(next_token(bytes, &mut pos, "width")?, "width")?;
    let height: usize = parse_number(next_token(bytes, &mut pos, "height")?, "height")?;
    check_dimensions(width, height, 1)?;
    let maxval: u32 = parse_number(next_token(bytes, &mut pos, "maxval")?, "maxval")?;
    if maxval == 0 || maxval > 65535 {
        return Err(Error::Format(format!("maxval {maxval} out of range")));
    }
    pos += 1; // single whitespace after maxval
    let wide = maxval > 255;
    let expected = width * height * if wide { 2 } else { 1 };
    let payload = bytes
        .get(pos..pos + expected)
        .ok_or_else(|| Error::Format("truncated payload".into()))?;

    let labels: Vec<u16> = if wide {
        payload
            .chunks_exact(2)
            .map(|pair| u16::from_be_bytes([pair[0], pair[1]]))
            .collect()
    } else {
        payload.iter().map(|&b| b as u16).collect()
    };
    SegmentationMap::new(width, height, labels)
}

/// Writes a binary PGM with max value 65535 (two big-endian bytes per label).
pub fn write_pgm(path: impl AsRef<Path>, seg: &SegmentationMap) -> Result<()> {
    let mut out = BufWriter::new(File::create(path.as_ref())?);
    write!(out, "P5\n{} {}\n65535\n", seg.width(), seg.height())?;
    for &label in seg.labels() {
        out.write_all(&label.to_be_bytes())?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn pfm_round_trip_is_bit_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(71);
        let dir = tempfile::tempdir().unwrap();
        for channels in [1usize, 3] {
            let values: Vec<f32> = (0..16 * 16 * channels)
                .map(|_| rng.gen_range(-100.0..100.0))
                .collect();
            let stack = ChannelStack::new(16, 16, channels, values).unwrap();
            let path = dir.path().join(format!("r{channels}.pfm"));
            write_pfm(&path, &stack).unwrap();
            let back = read_pfm(&path).unwrap();
            assert_eq!(back, stack);
        }
    }

    #[test]
    fn both_endiannesses_decode_to_the_same_raster() {
        let mut rng = ChaCha8Rng::seed_from_u64(73);
        let values: Vec<f32> = (0..8 * 4).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let stack = ChannelStack::new(8, 4, 1, values).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let little = dir.path().join("le.pfm");
        let big = dir.path().join("be.pfm");
        write_pfm_with(&little, &stack, PfmEndianness::Little).unwrap();
        write_pfm_with(&big, &stack, PfmEndianness::Big).unwrap();
        let file_le = std::fs::read(&little).unwrap();
        let file_be = std::fs::read(&big).unwrap();
        assert_ne!(file_le, file_be);
        assert_eq!(read_pfm(&little).unwrap(), read_pfm(&big).unwrap());
        assert_eq!(read_pfm(&little).unwrap(), stack);
    }

    #[test]
    fn pfm_rows_are_stored_bottom_up() {
        // 1x2 raster: memory top = 1.0, bottom = 2.0; the file stores the
        // bottom row first.
        let stack = ChannelStack::new(1, 2, 1, vec![1.0, 2.0]).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("updown.pfm");
        write_pfm(&path, &stack).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        let payload = &bytes[bytes.len() - 8..];
        assert_eq!(f32::from_le_bytes(payload[0..4].try_into().unwrap()), 2.0);
        assert_eq!(f32::from_le_bytes(payload[4..8].try_into().unwrap()), 1.0);
    }

    #[test]
    fn pgm_round_trip_preserves_labels() {
        let labels: Vec<u16> = (0..150).chain(0..106).collect();
        let seg = SegmentationMap::new(16, 16, labels).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("labels.pgm");
        write_pgm(&path, &seg).unwrap();
        let back = read_pgm(&path).unwrap();
        assert_eq!(back, seg);
    }

    #[test]
    fn narrow_pgm_payloads_are_read_as_one_byte() {
        // hand-built maxval-255 file
        let mut bytes = b"P5\n2 2\n255\n".to_vec();
        bytes.extend_from_slice(&[0, 7, 149, 255]);
        let seg = read_pgm_bytes(&bytes).unwrap();
        assert_eq!(seg.labels(), &[0, 7, 149, 255]);
    }

    #[test]
    fn pgm_header_comments_are_skipped() {
        let mut bytes = b"P5\n# made by hand\n2 1\n255\n".to_vec();
        bytes.extend_from_slice(&[3, 4]);
        let seg = read_pgm_bytes(&bytes).unwrap();
        assert_eq!(seg.labels(), &[3, 4]);
    }

    #[test]
    fn bad_magic_and_truncation_are_errors() {
        assert!(read_pgm_bytes(b"P6\n1 1\n255\nx").is_err());
        assert!(read_pgm_bytes(b"P5\n2 2\n255\n\x00").is_err());
        assert!(read_pfm_bytes(b"Px\n1 1\n-1.0\n\x00\x00\x00\x00").is_err());
        assert!(read_pfm_bytes(b"Pf\n4 4\n-1.0\n\x00\x00").is_err());
        assert!(read_pfm_bytes(b"Pf\n1 1\n0.0\n\x00\x00\x00\x00").is_err());
    }

    #[test]
    fn oversized_dimensions_are_rejected_before_allocation() {
        assert!(read_pfm_bytes(b"Pf\n99999999 99999999\n-1.0\n").is_err());
        assert!(read_pgm_bytes(b"P5\n0 5\n255\n").is_err());
    }

    proptest::proptest! {
        #[test]
        fn rasters_survive_a_round_trip(
            values in proptest::collection::vec(-1.0e30f32..1.0e30, 48),
            labels in proptest::collection::vec(0u16..=u16::MAX, 48),
        ) {
            let dir = tempfile::tempdir().unwrap();
            let stack = ChannelStack::new(8, 6, 1, values).unwrap();
            let pfm = dir.path().join("x.pfm");
            write_pfm(&pfm, &stack).unwrap();
            proptest::prop_assert_eq!(read_pfm(&pfm).unwrap(), stack);

            let seg = SegmentationMap::new(8, 6, labels).unwrap();
            let pgm = dir.path().join("x.pgm");
            write_pgm(&pgm, &seg).unwrap();
            proptest::prop_assert_eq!(read_pgm(&pgm).unwrap(), seg);
        }
    }
}
