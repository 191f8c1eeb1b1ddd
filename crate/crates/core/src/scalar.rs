//! Floating-point scalar abstraction for the vector core.

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Scalar type an index can store: f32 or f64.
///
/// The byte encoding is little-endian and pinned by `SCALAR_ID` in the
/// persisted index header, so a file written with one width is never
/// reinterpreted at another.
pub trait Real:
    Float + FromPrimitive + ToPrimitive + std::fmt::Debug + Send + Sync + 'static
{
    /// Identifier stored in the index header.
    const SCALAR_ID: u8;
    /// Bytes per value on disk.
    const BYTE_WIDTH: usize;

    fn write_le(self, out: &mut Vec<u8>);
    fn read_le(bytes: &[u8]) -> Self;
}

impl Real for f32 {
    const SCALAR_ID: u8 = 1;
    const BYTE_WIDTH: usize = 4;

    fn write_le(self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.to_le_bytes());
    }

    fn read_le(bytes: &[u8]) -> Self {
        f32::from_le_bytes(bytes[..4].try_into().expect("4-byte f32"))
    }
}

impl Real for f64 {
    const SCALAR_ID: u8 = 2;
    const BYTE_WIDTH: usize = 8;

    fn write_le(self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.to_le_bytes());
    }

    fn read_le(bytes: &[u8]) -> Self {
        f64::from_le_bytes(bytes[..8].try_into().expect("8-byte f64"))
    }
}
