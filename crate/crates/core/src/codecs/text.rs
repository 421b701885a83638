//! Lossless caption coding: a zlib (RFC 1950) wrapped DEFLATE stream.

use std::io::Write;

use flate2::write::ZlibEncoder;
use flate2::{Compression, Decompress, FlushDecompress, Status};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TextCodecError {
    #[error("text stream is truncated")]
    Truncated,
    #[error("corrupt text stream: {0}")]
    Corrupt(String),
    #[error("{0} trailing bytes after end of text stream")]
    TrailingBytes(usize),
    #[error("decoded text is not valid UTF-8")]
    InvalidUtf8,
    #[error("stream decodes but is not the canonical encoding of its text")]
    NonCanonical,
}

pub fn encode_text(caption: &str) -> Vec<u8> {
    let mut enc = ZlibEncoder::new(Vec::new(), Compression::best());
    // Writing into a Vec cannot fail.
    enc.write_all(caption.as_bytes()).expect("in-memory write");
    enc.finish().expect("in-memory write")
}

/// Inverts [`encode_text`] and accepts nothing else: the stream must decode
/// completely with a matching Adler-32 trailer, and must be byte-identical to
/// the encoding of the decoded text. The last check catches flips in DEFLATE
/// padding bits, which the format itself ignores. Partial output is never
/// returned.
pub fn decode_text(bits: &[u8]) -> Result<String, TextCodecError> {
    let text = decode_text_lenient(bits)?;
    if encode_text(&text) != bits {
        return Err(TextCodecError::NonCanonical);
    }
    Ok(text)
}

/// Decodes any conformant zlib stream holding UTF-8 text, e.g. one produced
/// by another zlib implementation or compression level.
pub fn decode_text_lenient(bits: &[u8]) -> Result<String, TextCodecError> {
    let out = inflate_exact(bits)?;
    String::from_utf8(out).map_err(|_| TextCodecError::InvalidUtf8)
}

/// Inflates a complete zlib stream that must span all of `bits`.
pub(crate) fn inflate_exact(bits: &[u8]) -> Result<Vec<u8>, TextCodecError> {
    let mut inflater = Decompress::new(true);
    let mut out = Vec::with_capacity(bits.len().saturating_mul(4).max(64));
    loop {
        if out.len() == out.capacity() {
            out.reserve(out.capacity());
        }
        let consumed = inflater.total_in() as usize;
        let produced = inflater.total_out();
        let status = inflater
            .decompress_vec(&bits[consumed..], &mut out, FlushDecompress::None)
            .map_err(|e| TextCodecError::Corrupt(e.to_string()))?;
        match status {
            Status::StreamEnd => break,
            Status::Ok | Status::BufError => {
                let stalled = inflater.total_in() as usize == consumed && inflater.total_out() == produced;
                if stalled && out.len() < out.capacity() {
                    return Err(TextCodecError::Truncated);
                }
            }
        }
    }
    let used = inflater.total_in() as usize;
    if used != bits.len() {
        return Err(TextCodecError::TrailingBytes(bits.len() - used));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_round_trip() {
        let bits = encode_text("");
        assert!(!bits.is_empty());
        assert_eq!(decode_text(&bits).unwrap(), "");
    }

    #[test]
    fn repetitive_text_compresses() {
        let s = "a".repeat(1000);
        let bits = encode_text(&s);
        assert!(bits.len() < 100, "{} bytes", bits.len());
        assert_eq!(decode_text(&bits).unwrap(), s);
    }

    #[test]
    fn zlib_wrapper_present() {
        let bits = encode_text("hello");
        // CMF: deflate, 32K window; FCHECK makes the header a multiple of 31.
        assert_eq!(bits[0] & 0x0f, 8);
        assert_eq!(u16::from_be_bytes([bits[0], bits[1]]) % 31, 0);
        let adler = u32::from_be_bytes(bits[bits.len() - 4..].try_into().unwrap());
        let (mut a, mut b) = (1u32, 0u32);
        for &c in b"hello" {
            a = (a + c as u32) % 65521;
            b = (b + a) % 65521;
        }
        assert_eq!(adler, (b << 16) | a);
    }

    #[test]
    fn truncation_is_an_error() {
        let bits = encode_text("a caption describing a ferris wheel at dusk");
        for len in 0..bits.len() {
            assert!(decode_text(&bits[..len]).is_err(), "prefix of {len} bytes decoded");
        }
    }

    #[test]
    fn checksum_corruption_is_an_error() {
        let bits = encode_text("two dogs running on a beach");
        for i in bits.len() - 4..bits.len() {
            let mut bad = bits.clone();
            bad[i] ^= 0x01;
            assert!(decode_text(&bad).is_err());
        }
    }

    #[test]
    fn trailing_bytes_rejected() {
        let mut bits = encode_text("x");
        bits.push(0);
        assert_eq!(decode_text(&bits), Err(TextCodecError::TrailingBytes(1)));
    }

    #[test]
    fn padding_flips_rejected() {
        let s = "a caption";
        let bits = encode_text(s);
        let mut flipped = 0;
        for i in 0..bits.len() {
            for k in 0..8 {
                let mut bad = bits.clone();
                bad[i] ^= 1 << k;
                if decode_text_lenient(&bad).is_ok() {
                    flipped += 1;
                }
                assert!(decode_text(&bad).is_err());
            }
        }
        // the lenient path really does accept some of them
        assert!(flipped > 0);
    }

    #[test]
    fn other_encoders_need_lenient_path() {
        let s = "to be or not to be, that is the question; to be or not to be";
        let mut enc = ZlibEncoder::new(Vec::new(), Compression::fast());
        enc.write_all(s.as_bytes()).unwrap();
        let bits = enc.finish().unwrap();
        assert_ne!(bits, encode_text(s));
        assert_eq!(decode_text_lenient(&bits).unwrap(), s);
        assert_eq!(decode_text(&bits), Err(TextCodecError::NonCanonical));
    }

    #[test]
    fn invalid_utf8_rejected() {
        let mut enc = ZlibEncoder::new(Vec::new(), Compression::default());
        enc.write_all(&[0xff, 0xfe]).unwrap();
        let bits = enc.finish().unwrap();
        assert_eq!(decode_text_lenient(&bits), Err(TextCodecError::InvalidUtf8));
        assert_eq!(decode_text(&bits), Err(TextCodecError::InvalidUtf8));
    }
}
