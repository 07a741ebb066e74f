//! Raw DEFLATE (RFC 1951) entropy stage.

use std::io::{Read, Write};

use flate2::read::DeflateDecoder;
use flate2::write::DeflateEncoder;
use flate2::Compression;

use super::{CodecError, Result};

pub fn entropy_encode(bytes: &[u8]) -> Vec<u8> {
    let mut enc = DeflateEncoder::new(Vec::with_capacity(bytes.len() / 4 + 16), Compression::default());
    enc.write_all(bytes).expect("writing to a Vec cannot fail");
    enc.finish().expect("writing to a Vec cannot fail")
}

pub fn entropy_decode(bytes: &[u8]) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    DeflateDecoder::new(bytes)
        .read_to_end(&mut out)
        .map_err(|e| CodecError::CorruptData(format!("deflate stream: {e}")))?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{RngCore, SeedableRng};

    #[test]
    fn empty_round_trip() {
        let enc = entropy_encode(&[]);
        assert!(!enc.is_empty());
        assert_eq!(entropy_decode(&enc).unwrap(), Vec::<u8>::new());
    }

    #[test]
    fn zeros_collapse() {
        let zeros = vec![0u8; 4096];
        let enc = entropy_encode(&zeros);
        assert!(enc.len() < 64, "{} bytes", enc.len());
        assert_eq!(entropy_decode(&enc).unwrap(), zeros);
    }

    #[test]
    fn random_kib_round_trips() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let mut data = vec![0u8; 1024];
        rng.fill_bytes(&mut data);
        assert_eq!(entropy_decode(&entropy_encode(&data)).unwrap(), data);
    }

    #[test]
    fn garbage_is_corrupt() {
        // BTYPE=11 is reserved
        assert!(matches!(entropy_decode(&[0xff, 0xff, 0xff]), Err(CodecError::CorruptData(_))));
        let enc = entropy_encode(b"hello hello hello hello");
        assert!(entropy_decode(&enc[..enc.len() - 2]).is_err());
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(32))]
        #[test]
        fn round_trips_arbitrary(data in proptest::collection::vec(proptest::prelude::any::<u8>(), 0..(1 << 20))) {
            proptest::prop_assert_eq!(entropy_decode(&entropy_encode(&data)).unwrap(), data);
        }
    }
}
