//! Binary container for fixed-point matrices.
//!
//! Layout (little-endian): magic `LWFP`, rows `u32`, cols `u32`, bits `u8`,
//! frac bits `u8`, two zero bytes, then row-major raw values stored in 1, 2
//! or 4 bytes for 4/8, 16 and 32-bit formats.

use std::io::{Read, Write};

use crate::error::{Error, Result, StreamError};
use crate::fixed::Format;
use crate::matrix::DenseMatrix;

pub const WEIGHT_MAGIC: [u8; 4] = *b"LWFP";
const HEADER: usize = 16;

fn value_bytes(bits: u32) -> usize {
    match bits {
        4 | 8 => 1,
        16 => 2,
        _ => 4,
    }
}

pub fn write_weights<W: Write>(mut out: W, m: &DenseMatrix) -> Result<()> {
    let (rows, cols) = (m.rows(), m.cols());
    let dim = |v: usize| u32::try_from(v).map_err(|_| Error::InvalidMatrix(format!("dimension {v} exceeds u32")));
    let fmt = m.format();
    let mut buf = Vec::with_capacity(HEADER + rows * cols * value_bytes(fmt.bits));
    buf.extend_from_slice(&WEIGHT_MAGIC);
    buf.extend_from_slice(&dim(rows)?.to_le_bytes());
    buf.extend_from_slice(&dim(cols)?.to_le_bytes());
    buf.extend_from_slice(&[fmt.bits as u8, fmt.frac_bits as u8, 0, 0]);
    for &v in m.data() {
        match value_bytes(fmt.bits) {
            1 => buf.push(v as i8 as u8),
            2 => buf.extend_from_slice(&(v as i16).to_le_bytes()),
            _ => buf.extend_from_slice(&v.to_le_bytes()),
        }
    }
    out.write_all(&buf)?;
    Ok(())
}

pub fn read_weights<R: Read>(mut input: R) -> Result<DenseMatrix> {
    let mut bytes = Vec::new();
    input.read_to_end(&mut bytes)?;
    if bytes.len() < HEADER {
        return Err(StreamError::Truncated { expected: HEADER, found: bytes.len() }.into());
    }
    let magic: [u8; 4] = bytes[0..4].try_into().expect("4 bytes");
    if magic != WEIGHT_MAGIC {
        return Err(StreamError::BadMagic(magic).into());
    }
    let word = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().expect("4 bytes")) as usize;
    let (rows, cols) = (word(4), word(8));
    let format = Format::new(bytes[12] as u32, bytes[13] as u32)?;
    let width = value_bytes(format.bits);
    let expected = rows
        .checked_mul(cols)
        .and_then(|n| n.checked_mul(width))
        .and_then(|n| n.checked_add(HEADER))
        .ok_or_else(|| StreamError::BadHeader(format!("{rows}x{cols} is too large")))?;
    if bytes.len() != expected {
        return Err(StreamError::Truncated { expected, found: bytes.len() }.into());
    }
    let data = bytes[HEADER..]
        .chunks_exact(width)
        .map(|c| match width {
            1 => c[0] as i8 as i32,
            2 => i16::from_le_bytes([c[0], c[1]]) as i32,
            _ => i32::from_le_bytes([c[0], c[1], c[2], c[3]]),
        })
        .collect();
    DenseMatrix::try_new(rows, cols, data, format)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_every_width() {
        for (bits, frac, vals) in [
            (4, 3, vec![-8, 7, 0, 1, -1, 3]),
            (8, 0, vec![-128, 127, 0, 5, -6, 9]),
            (16, 8, vec![-32768, 32767, 0, 300, -2, 1]),
            (32, 20, vec![i32::MIN, i32::MAX, 0, 70000, -1, 2]),
        ] {
            let m = DenseMatrix::try_new(2, 3, vals, Format::new(bits, frac).unwrap()).unwrap();
            let mut buf = Vec::new();
            write_weights(&mut buf, &m).unwrap();
            assert_eq!(buf.len(), 16 + 6 * value_bytes(bits));
            assert_eq!(read_weights(&buf[..]).unwrap(), m);
        }
    }

    #[test]
    fn header_layout() {
        let m = DenseMatrix::try_new(1, 2, vec![-1, 2], Format::SINT4_INPUT).unwrap();
        let mut buf = Vec::new();
        write_weights(&mut buf, &m).unwrap();
        assert_eq!(buf, [b'L', b'W', b'F', b'P', 1, 0, 0, 0, 2, 0, 0, 0, 4, 3, 0, 0, 0xff, 2]);
    }

    #[test]
    fn malformed_containers() {
        assert!(matches!(read_weights(&b"LWFP"[..]), Err(Error::Stream(StreamError::Truncated { .. }))));
        let mut buf = Vec::new();
        write_weights(&mut buf, &DenseMatrix::zeros(2, 2, Format::SINT4_INPUT)).unwrap();
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(matches!(read_weights(&bad[..]), Err(Error::Stream(StreamError::BadMagic(_)))));
        assert!(matches!(read_weights(&buf[..buf.len() - 1]), Err(Error::Stream(StreamError::Truncated { .. }))));
        let mut wide = buf.clone();
        wide[16] = 9;
        assert!(matches!(read_weights(&wide[..]), Err(Error::ValueOutOfRange { .. })));
        let mut fmt = buf;
        fmt[12] = 5;
        assert!(matches!(read_weights(&fmt[..]), Err(Error::InvalidFormat(_))));
    }
}
