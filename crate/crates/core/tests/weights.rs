use harmonia_core::weights::{decode, encode, load_weights, save_weights, WeightsError};
use harmonia_kernel::{ParameterStore, Tensor};
use proptest::prelude::*;

fn le(v: u32) -> [u8; 4] {
    v.to_le_bytes()
}

#[test]
fn layout_matches_hand_built_bytes() {
    let t = Tensor::from_vec(&[1, 2], vec![1.0, -2.0]).unwrap();
    let bytes = encode(&[("w".to_string(), t)]).unwrap();
    let mut want = b"HGW1".to_vec();
    for v in [1, 1, 1] {
        want.extend(le(v));
    }
    want.push(b'w');
    for v in [2, 1, 2] {
        want.extend(le(v));
    }
    want.extend(1.0f32.to_le_bytes());
    want.extend((-2.0f32).to_le_bytes());
    // zlib.crc32 of the 37 bytes above
    want.extend(le(0xb9bf_e083));
    assert_eq!(bytes, want);
}

#[test]
fn empty_store_is_a_valid_container() {
    let bytes = encode(&[]).unwrap();
    let mut want = b"HGW1".to_vec();
    want.extend(le(1));
    want.extend(le(0));
    want.extend(le(0x1ce1_4233));
    assert_eq!(bytes, want);
    assert!(decode(&bytes).unwrap().is_empty());
}

#[test]
fn corrupted_payload_byte_fails_checksum() {
    let t = Tensor::from_vec(&[3], vec![0.5, 0.25, 0.125]).unwrap();
    let mut bytes = encode(&[("a".to_string(), t)]).unwrap();
    let n = bytes.len();
    bytes[n - 6] ^= 0x01;
    assert!(matches!(decode(&bytes), Err(WeightsError::Checksum { .. })));
}

#[test]
fn version_mismatch_is_rejected() {
    let mut bytes = encode(&[]).unwrap();
    bytes[4] = 2;
    assert_eq!(decode(&bytes), Err(WeightsError::UnsupportedVersion(2)));
}

#[test]
fn truncation_and_bad_magic() {
    let t = Tensor::from_vec(&[2, 2], vec![1.0; 4]).unwrap();
    let bytes = encode(&[("a".to_string(), t)]).unwrap();
    for cut in [2, 10, bytes.len() - 1] {
        let e = decode(&bytes[..cut]).unwrap_err();
        assert!(matches!(e, WeightsError::Truncated(_) | WeightsError::Checksum { .. }), "{cut}: {e:?}");
    }
    assert_eq!(decode(b"RIFF0000000000000000"), Err(WeightsError::BadMagic));
}

#[test]
fn duplicate_names_are_rejected_both_ways() {
    let t = || Tensor::from_vec(&[1], vec![1.0]).unwrap();
    let e = encode(&[("x".to_string(), t()), ("x".to_string(), t())]).unwrap_err();
    assert_eq!(e, WeightsError::DuplicateName("x".into()));

    let mut body = b"HGW1".to_vec();
    body.extend(le(1));
    body.extend(le(2));
    for _ in 0..2 {
        body.extend(le(1));
        body.push(b'x');
        body.extend(le(1));
        body.extend(le(1));
        body.extend(1.0f32.to_le_bytes());
    }
    let crc = crc32(&body);
    body.extend(le(crc));
    assert_eq!(decode(&body), Err(WeightsError::DuplicateName("x".into())));
}

#[test]
fn zero_dimension_is_rejected() {
    let mut body = b"HGW1".to_vec();
    for v in [1, 1, 1] {
        body.extend(le(v));
    }
    body.push(b'z');
    body.extend(le(2));
    body.extend(le(3));
    body.extend(le(0));
    let crc = crc32(&body);
    body.extend(le(crc));
    assert!(matches!(decode(&body), Err(WeightsError::InvalidDims { .. })));
}

// Bitwise CRC-32 (IEEE, reflected), independent of the library's table.
fn crc32(bytes: &[u8]) -> u32 {
    let mut crc = !0u32;
    for &b in bytes {
        crc ^= b as u32;
        for _ in 0..8 {
            crc = if crc & 1 == 1 { (crc >> 1) ^ 0xedb8_8320 } else { crc >> 1 };
        }
    }
    !crc
}

#[test]
fn file_round_trip_through_store() {
    let mut store = ParameterStore::new();
    store.insert("layer.weight", Tensor::from_vec(&[2, 3], vec![1.0, 2.0, 3.0, -4.0, 5.5, 1e-30]).unwrap()).unwrap();
    store.insert("layer.bias", Tensor::from_vec(&[3], vec![0.0, -0.0, f32::MAX]).unwrap()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.hgw");
    save_weights(&store, &path).unwrap();
    let back = load_weights(&path).unwrap();
    let a: Vec<_> = store.iter().map(|(n, t)| (n.to_string(), t.shape().to_vec(), bits(t.data()))).collect();
    let b: Vec<_> = back.iter().map(|(n, t)| (n.to_string(), t.shape().to_vec(), bits(t.data()))).collect();
    assert_eq!(a, b);
}

fn bits(v: &[f32]) -> Vec<u32> {
    v.iter().map(|x| x.to_bits()).collect()
}

fn arb_tensors() -> impl Strategy<Value = Vec<(String, Vec<usize>, Vec<u32>)>> {
    let entry = ("[a-z][a-z0-9_.]{0,12}", prop::collection::vec(1usize..5, 1..4)).prop_flat_map(|(name, dims)| {
        let n = dims.iter().product::<usize>();
        (Just(name), Just(dims), prop::collection::vec(any::<u32>(), n))
    });
    prop::collection::vec(entry, 0..6).prop_map(|mut v| {
        let mut seen = std::collections::HashSet::new();
        v.retain(|(n, _, _)| seen.insert(n.clone()));
        v
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn round_trip_is_bit_exact(entries in arb_tensors()) {
        let tensors: Vec<(String, Tensor)> = entries
            .iter()
            .map(|(n, d, b)| (n.clone(), Tensor::from_vec(d, b.iter().map(|&x| f32::from_bits(x)).collect()).unwrap()))
            .collect();
        let bytes = encode(&tensors).unwrap();
        prop_assert_eq!(crc32(&bytes[..bytes.len() - 4]).to_le_bytes(), &bytes[bytes.len() - 4..]);
        let back = decode(&bytes).unwrap();
        prop_assert_eq!(back.len(), entries.len());
        for ((n, d, b), (bn, bt)) in entries.iter().zip(&back) {
            prop_assert_eq!(n, bn);
            prop_assert_eq!(d.as_slice(), bt.shape());
            prop_assert_eq!(b, &bits(bt.data()));
        }
        prop_assert_eq!(encode(&back).unwrap(), bytes);
    }
}
