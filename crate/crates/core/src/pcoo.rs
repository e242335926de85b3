//! Packet-level column-only coordinate lists.
//!
//! Every stored element of a sparse tile becomes one fixed-width packet:
//!
//! ```text
//!  MSB                                           LSB
//! +-----+-----+-----+---------------+-------------+
//! | SOR | EOR | VLD | col (log2 T)  | value (H)   |
//! +-----+-----+-----+---------------+-------------+
//! ```
//!
//! SOR marks the first packet of a row and EOR the last; VLD separates real
//! elements from injected empty ones. A row without nonzeros is a single
//! packet with SOR = EOR = 1 and VLD = 0. An all-zero word is an idle slot.
//! The row index is never stored: each PE counts EOR flags.
//!
//! Streams (`.pcoo` files) are a 16-byte little-endian header followed by
//! packets in cycle-major order, each packet packed MSB-first into
//! `ceil(width / 8)` bytes.

use crate::error::{Error, Result, StreamError};
use crate::schedule::TileSchedule;

pub const STREAM_MAGIC: [u8; 4] = *b"PCOO";
pub const STREAM_VERSION: u16 = 1;
pub const HEADER_BYTES: usize = 16;

/// Tile width `T` (a power of two) and value width `H`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct PacketLayout {
    tile_width: usize,
    value_bits: u32,
}

impl PacketLayout {
    pub fn new(tile_width: usize, value_bits: u32) -> Result<Self> {
        if !tile_width.is_power_of_two() || tile_width > 1 << 15 {
            return Err(Error::InvalidConfig(format!(
                "tile width {tile_width} must be a power of two no larger than 32768"
            )));
        }
        if value_bits > 32 {
            return Err(Error::InvalidConfig(format!("value width {value_bits} exceeds 32 bits")));
        }
        Ok(PacketLayout { tile_width, value_bits })
    }

    pub fn tile_width(&self) -> usize {
        self.tile_width
    }

    pub fn value_bits(&self) -> u32 {
        self.value_bits
    }

    pub fn col_bits(&self) -> u32 {
        self.tile_width.trailing_zeros()
    }

    /// `3 + log2(T) + H`.
    pub fn width(&self) -> u32 {
        3 + self.col_bits() + self.value_bits
    }

    pub fn bytes_per_packet(&self) -> usize {
        self.width().div_ceil(8) as usize
    }

    fn value_fits(&self, value: i32) -> bool {
        match self.value_bits {
            0 => value == 0,
            32 => true,
            h => {
                let v = value as i64;
                v >= -(1i64 << (h - 1)) && v < (1i64 << (h - 1))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct PcooPacket {
    pub sor: bool,
    pub eor: bool,
    pub vld: bool,
    pub col: u32,
    pub value: i32,
}

impl PcooPacket {
    pub const IDLE: PcooPacket = PcooPacket { sor: false, eor: false, vld: false, col: 0, value: 0 };
    pub const EMPTY_ROW: PcooPacket = PcooPacket { sor: true, eor: true, vld: false, col: 0, value: 0 };

    pub fn element(col: u32, value: i32, sor: bool, eor: bool) -> Self {
        PcooPacket { sor, eor, vld: true, col, value }
    }

    pub fn is_idle(&self) -> bool {
        !self.sor && !self.eor && !self.vld
    }

    pub fn is_empty_row(&self) -> bool {
        self.sor && self.eor && !self.vld
    }

    /// An invalid packet that still carries column or value bits.
    pub fn is_malformed(&self) -> bool {
        !self.vld && (self.col != 0 || self.value != 0)
    }
}

pub fn encode_packet(p: &PcooPacket, layout: PacketLayout) -> Result<u64> {
    if p.col as usize >= layout.tile_width {
        return Err(Error::ColumnOutOfRange { col: p.col as usize, width: layout.tile_width });
    }
    if !layout.value_fits(p.value) {
        return Err(Error::ValueOutOfRange { value: p.value as i64, bits: layout.value_bits });
    }
    let t = layout.tile_width as u64;
    let header = p.col as u64 + t * p.vld as u64 + 2 * t * p.eor as u64 + 4 * t * p.sor as u64;
    let h = layout.value_bits;
    let value_mask = if h == 0 { 0 } else { u64::MAX >> (64 - h) };
    Ok((header << h) | (p.value as i64 as u64 & value_mask))
}

/// Decodes any bit pattern below `2^width`; the value is sign-extended.
pub fn decode_packet(bits: u64, layout: PacketLayout) -> PcooPacket {
    let h = layout.value_bits;
    let value = if h == 0 {
        0
    } else {
        let raw = bits & (u64::MAX >> (64 - h));
        ((raw << (64 - h)) as i64 >> (64 - h)) as i32
    };
    let header = bits >> h;
    let cb = layout.col_bits();
    PcooPacket {
        sor: header >> (cb + 2) & 1 == 1,
        eor: header >> (cb + 1) & 1 == 1,
        vld: header >> cb & 1 == 1,
        col: (header & ((1u64 << cb) - 1)) as u32,
        value,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StreamHeader {
    pub version: u16,
    pub layout: PacketLayout,
    pub pes: usize,
    pub cycles: usize,
}

impl StreamHeader {
    pub fn new(layout: PacketLayout, pes: usize, cycles: usize) -> Self {
        StreamHeader { version: STREAM_VERSION, layout, pes, cycles }
    }

    fn to_bytes(self) -> Result<[u8; HEADER_BYTES]> {
        let pes = u16::try_from(self.pes)
            .ok()
            .filter(|&k| k > 0)
            .ok_or_else(|| Error::InvalidConfig(format!("PE count {} not in 1..=65535", self.pes)))?;
        let cycles = u32::try_from(self.cycles)
            .map_err(|_| Error::InvalidConfig(format!("{} cycles exceed the header field", self.cycles)))?;
        let mut b = [0u8; HEADER_BYTES];
        b[0..4].copy_from_slice(&STREAM_MAGIC);
        b[4..6].copy_from_slice(&self.version.to_le_bytes());
        b[6..8].copy_from_slice(&(self.layout.tile_width as u16).to_le_bytes());
        b[8] = self.layout.value_bits as u8;
        b[10..12].copy_from_slice(&pes.to_le_bytes());
        b[12..16].copy_from_slice(&cycles.to_le_bytes());
        Ok(b)
    }

    fn from_bytes(b: &[u8]) -> Result<Self, StreamError> {
        if b.len() < HEADER_BYTES {
            return Err(StreamError::Truncated { expected: HEADER_BYTES, found: b.len() });
        }
        let magic: [u8; 4] = b[0..4].try_into().unwrap();
        if magic != STREAM_MAGIC {
            return Err(StreamError::BadMagic(magic));
        }
        let version = u16::from_le_bytes([b[4], b[5]]);
        if version != STREAM_VERSION {
            return Err(StreamError::VersionMismatch(version));
        }
        let tile_width = u16::from_le_bytes([b[6], b[7]]) as usize;
        let layout = PacketLayout::new(tile_width, b[8] as u32).map_err(|e| StreamError::BadHeader(e.to_string()))?;
        let pes = u16::from_le_bytes([b[10], b[11]]) as usize;
        if pes == 0 {
            return Err(StreamError::BadHeader("zero PEs".into()));
        }
        let cycles = u32::from_le_bytes(b[12..16].try_into().unwrap()) as usize;
        Ok(StreamHeader { version, layout, pes, cycles })
    }
}

pub fn serialize_stream(schedule: &TileSchedule, layout: PacketLayout) -> Result<Vec<u8>> {
    let header = StreamHeader::new(layout, schedule.pes(), schedule.cycles());
    let per = layout.bytes_per_packet();
    let mut out = Vec::with_capacity(HEADER_BYTES + per * schedule.packets().len());
    out.extend_from_slice(&header.to_bytes()?);
    for p in schedule.packets() {
        let word = encode_packet(p, layout)?;
        out.extend_from_slice(&word.to_be_bytes()[8 - per..]);
    }
    Ok(out)
}

pub fn deserialize_stream(bytes: &[u8]) -> Result<(StreamHeader, TileSchedule)> {
    let header = StreamHeader::from_bytes(bytes)?;
    let per = header.layout.bytes_per_packet();
    let count = header.cycles * header.pes;
    let expected = HEADER_BYTES + count * per;
    if bytes.len() != expected {
        return Err(StreamError::Truncated { expected, found: bytes.len() }.into());
    }
    let packets = bytes[HEADER_BYTES..]
        .chunks_exact(per)
        .map(|chunk| {
            let mut word = [0u8; 8];
            word[8 - per..].copy_from_slice(chunk);
            decode_packet(u64::from_be_bytes(word), header.layout)
        })
        .collect();
    Ok((header, TileSchedule::from_packets(header.pes, packets)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn layout(t: usize, h: u32) -> PacketLayout {
        PacketLayout::new(t, h).unwrap()
    }

    #[test]
    fn row_encodings_follow_additive_offsets() {
        // T = 8, H = 0: sor = 32, eor = 16, vld = 8.
        let l = layout(8, 0);
        let first = PcooPacket::element(1, 0, true, false);
        let last = PcooPacket::element(5, 0, false, true);
        assert_eq!(encode_packet(&first, l).unwrap(), 41);
        assert_eq!(encode_packet(&last, l).unwrap(), 29);
        assert_eq!(encode_packet(&PcooPacket::EMPTY_ROW, l).unwrap(), 48);
        assert_eq!(encode_packet(&PcooPacket::IDLE, l).unwrap(), 0);
    }

    #[test]
    fn value_occupies_low_bits() {
        let l = layout(8, 4);
        let p = PcooPacket::element(1, 3, true, false);
        assert_eq!(encode_packet(&p, l).unwrap(), 659);
        assert_eq!(decode_packet(659, l), p);
        assert_eq!(decode_packet(0, l), PcooPacket::IDLE);
        let neg = PcooPacket::element(7, -8, false, false);
        assert_eq!(decode_packet(encode_packet(&neg, l).unwrap(), l), neg);
    }

    #[test]
    fn encode_rejects_out_of_range_fields() {
        let l = layout(8, 4);
        assert!(matches!(
            encode_packet(&PcooPacket::element(8, 0, false, false), l),
            Err(Error::ColumnOutOfRange { .. })
        ));
        assert!(matches!(
            encode_packet(&PcooPacket::element(0, 8, false, false), l),
            Err(Error::ValueOutOfRange { .. })
        ));
        assert!(encode_packet(&PcooPacket::element(0, 1, false, false), layout(8, 0)).is_err());
    }

    #[test]
    fn exhaustive_round_trip_small_layout() {
        let l = layout(8, 4);
        assert_eq!(l.width(), 10);
        for bits in 0..1u64 << 10 {
            let p = decode_packet(bits, l);
            assert_eq!(encode_packet(&p, l).unwrap(), bits);
            assert_eq!(p.is_malformed(), !p.vld && bits & 0b111_1111 != 0);
        }
    }

    #[test]
    fn stream_sizes() {
        let l = layout(8, 0);
        let empty = TileSchedule::empty(2);
        let bytes = serialize_stream(&empty, l).unwrap();
        assert_eq!(bytes.len(), HEADER_BYTES);
        let (h, s) = deserialize_stream(&bytes).unwrap();
        assert_eq!(h.cycles, 0);
        assert_eq!(s, empty);

        let one =
            TileSchedule::from_packets(2, vec![PcooPacket::EMPTY_ROW, PcooPacket::element(3, 0, true, true)]).unwrap();
        let bytes = serialize_stream(&one, l).unwrap();
        assert_eq!(bytes.len(), 18);
        assert_eq!(&bytes[16..], &[48, 59]);
        assert_eq!(deserialize_stream(&bytes).unwrap().1, one);
    }

    #[test]
    fn stream_errors() {
        let l = layout(8, 4);
        let one = TileSchedule::from_packets(1, vec![PcooPacket::EMPTY_ROW]).unwrap();
        let mut bytes = serialize_stream(&one, l).unwrap();
        assert!(matches!(
            deserialize_stream(&bytes[..bytes.len() - 1]),
            Err(Error::Stream(StreamError::Truncated { .. }))
        ));
        bytes[4] = 9;
        assert!(matches!(deserialize_stream(&bytes), Err(Error::Stream(StreamError::VersionMismatch(9)))));
        bytes[0] = b'X';
        assert!(matches!(deserialize_stream(&bytes), Err(Error::Stream(StreamError::BadMagic(_)))));
    }
}
