mod common;

use bioatm::minutiae::{FingerprintTemplate, MinutiaKind};
use bioatm::wire::{
    Frame, Message, MessageType, WireError, crc16, decode_frame, decode_minutiae, decode_stream,
    encode_frame, encode_minutiae, encode_pin_block, extract_pin,
};
use common::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn crc_check_value_agrees_with_shift_register() {
    assert_eq!(crc16_bitwise(b"123456789"), 0x29B1);
    assert_eq!(crc16(b"123456789"), 0x29B1);
    assert_eq!(crc16(b""), 0xFFFF);
}

proptest! {
    #[test]
    fn crc_matches_bitwise_oracle(bytes in proptest::collection::vec(any::<u8>(), 0..512)) {
        prop_assert_eq!(crc16(&bytes), crc16_bitwise(&bytes));
    }
}

#[test]
fn end_session_frame_layout() {
    let bytes = encode_frame(&Frame::new(MessageType::EndSession, vec![0; 8])).unwrap();
    assert_eq!(bytes.len(), 16);
    assert_eq!(bytes[..6], [0xA7, 0x4D, 0x01, 0x07, 0x00, 0x08]);
    assert_eq!(bytes[6..14], [0; 8]);
    assert_eq!(
        u16::from_be_bytes([bytes[14], bytes[15]]),
        crc16_bitwise(&bytes[..14])
    );
}

#[test]
fn every_single_bit_flip_is_detected() {
    let msg = Message::TxnReq {
        token: bioatm::wire::Token([1, 2, 3, 4, 5, 6, 7, 8]),
        txn_type: bioatm::wire::TxnType::Withdraw,
        amount: 3000,
    };
    let bytes = msg.to_bytes().unwrap();
    for bit in 0..bytes.len() * 8 {
        let mut corrupt = bytes.clone();
        corrupt[bit / 8] ^= 1 << (bit % 8);
        assert!(
            decode_frame(&corrupt).is_err(),
            "flip of bit {bit} went unnoticed"
        );
    }
}

#[test]
fn bit_flips_in_a_large_frame_are_detected() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let payload: Vec<u8> = (0..65_535).map(|_| rng.random()).collect();
    let bytes = encode_frame(&Frame::new(MessageType::Err, payload)).unwrap();
    for _ in 0..300 {
        let bit = rng.random_range(0..bytes.len() * 8);
        let mut corrupt = bytes.clone();
        corrupt[bit / 8] ^= 1 << (bit % 8);
        assert!(
            decode_frame(&corrupt).is_err(),
            "flip of bit {bit} went unnoticed"
        );
    }
}

#[test]
fn decode_errors_are_specific() {
    let good = Message::Err {
        code: bioatm::wire::ResponseCode::Malformed,
    }
    .to_bytes()
    .unwrap();
    let mut bad = good.clone();
    bad[1] = 0;
    assert_eq!(decode_frame(&bad), Err(WireError::BadMagic));
    let mut bad = good.clone();
    bad[2] = 0x02;
    assert_eq!(decode_frame(&bad), Err(WireError::UnsupportedVersion(2)));
    assert!(matches!(
        decode_frame(&good[..good.len() - 1]),
        Err(WireError::Truncated { .. })
    ));
    let mut bad = good.clone();
    *bad.last_mut().unwrap() ^= 0xFF;
    assert!(matches!(
        decode_frame(&bad),
        Err(WireError::CrcMismatch { .. })
    ));

    let mut unknown = vec![0xA7, 0x4D, 0x01, 0x42, 0x00, 0x00];
    let crc = crc16(&unknown);
    unknown.extend_from_slice(&crc.to_be_bytes());
    assert_eq!(
        decode_frame(&unknown),
        Err(WireError::UnknownMessageType(0x42))
    );
}

fn any_type() -> impl Strategy<Value = MessageType> {
    proptest::sample::select(MessageType::ALL.to_vec())
}

proptest! {
    #[test]
    fn messages_round_trip_byte_exactly(t in any_type(), seed in any::<u64>()) {
        let msg = random_message(&mut ChaCha8Rng::seed_from_u64(seed), t);
        let bytes = msg.to_bytes().unwrap();
        let (back, used) = Message::from_bytes(&bytes).unwrap();
        prop_assert_eq!(used, bytes.len());
        prop_assert_eq!(back.to_bytes().unwrap(), bytes);
        prop_assert_eq!(back, msg);
    }

    #[test]
    fn stream_of_k_frames_decodes_to_k(seeds in proptest::collection::vec((any_type(), any::<u64>()), 0..20)) {
        let msgs: Vec<Message> = seeds
            .iter()
            .map(|&(t, s)| random_message(&mut ChaCha8Rng::seed_from_u64(s), t))
            .collect();
        let mut stream = Vec::new();
        for m in &msgs {
            stream.extend(m.to_bytes().unwrap());
        }
        let frames = decode_stream(&stream).unwrap();
        prop_assert_eq!(frames.len(), msgs.len());
        let total: usize = frames.iter().map(Frame::encoded_len).sum();
        prop_assert_eq!(total, stream.len());
        for (f, m) in frames.iter().zip(&msgs) {
            prop_assert_eq!(&Message::from_frame(f).unwrap(), m);
        }
    }

    #[test]
    fn arbitrary_bytes_never_panic(bytes in proptest::collection::vec(any::<u8>(), 0..300)) {
        let _ = Message::from_bytes(&bytes);
        let _ = decode_stream(&bytes);
    }

    #[test]
    fn valid_header_with_random_body_never_panics(t in any::<u8>(), body in proptest::collection::vec(any::<u8>(), 0..120)) {
        // A correct CRC gets past framing, so the payload decoders see the junk.
        let mut bytes = vec![0xA7, 0x4D, 0x01, t];
        bytes.extend_from_slice(&(body.len() as u16).to_be_bytes());
        bytes.extend_from_slice(&body);
        let crc = crc16(&bytes);
        bytes.extend_from_slice(&crc.to_be_bytes());
        let _ = Message::from_bytes(&bytes);
    }
}

#[test]
fn pin_block_known_answer_agrees_with_hand_oracle() {
    assert_eq!(pin_block_by_hand("1234", "79927398713"), "041234866D8C678E");
    let block = encode_pin_block("1234", "79927398713").unwrap();
    assert_eq!(block.to_hex(), "041234866D8C678E");
    assert_eq!(extract_pin(&block, "79927398713").unwrap(), "1234");
}

#[test]
fn pin_block_with_wrong_pan_fails_fill_check() {
    // 041234866D8C678E ^ 0000111111111111 = 041225977C9D769F: fill nibble 6 is 9.
    assert_eq!(pin_block_by_hand("1234", "79927398713"), "041234866D8C678E");
    let block = encode_pin_block("1234", "79927398713").unwrap();
    assert_eq!(
        extract_pin(&block, "4111111111111111"),
        Err(WireError::BadPinBlockFill {
            position: 6,
            nibble: 0x9
        })
    );
}

proptest! {
    #[test]
    fn pin_block_round_trips_and_matches_oracle(pin in "[0-9]{4,6}", pan in "[0-9]{2,19}") {
        let block = encode_pin_block(&pin, &pan).unwrap();
        prop_assert_eq!(block.to_hex(), pin_block_by_hand(&pin, &pan));
        prop_assert_eq!(extract_pin(&block, &pan).unwrap(), pin);
    }
}

#[test]
fn pin_block_rejects_bad_input() {
    assert_eq!(
        encode_pin_block("123", "79927398713"),
        Err(WireError::BadPinLength(3))
    );
    assert_eq!(
        encode_pin_block("1234567", "79927398713"),
        Err(WireError::BadPinLength(7))
    );
    assert_eq!(
        encode_pin_block("12x4", "79927398713"),
        Err(WireError::NonDigit)
    );
    let mut block = encode_pin_block("1234", "79927398713").unwrap();
    block.0[0] ^= 0x30;
    assert_eq!(
        extract_pin(&block, "79927398713"),
        Err(WireError::BadPinBlockControl(3))
    );
}

#[test]
fn single_minutia_wire_layout() {
    let t = FingerprintTemplate::new(vec![minutia(10, 20, 90, MinutiaKind::RidgeEnding)]).unwrap();
    assert_eq!(
        encode_minutiae(&t),
        [0x00, 0x01, 0x00, 0x0A, 0x00, 0x14, 0x00, 0x5A, 0x00]
    );
}

#[test]
fn minutiae_decode_rejects_bad_layouts() {
    assert!(decode_minutiae(&[0x00, 0x00]).is_err(), "empty template");
    assert!(
        decode_minutiae(&[0x00, 0x02, 0x00, 0x0A, 0x00, 0x14, 0x00, 0x5A, 0x00]).is_err(),
        "count mismatch"
    );
    assert!(
        decode_minutiae(&[0x00, 0x01, 0x03, 0xE9, 0x00, 0x14, 0x00, 0x5A, 0x00]).is_err(),
        "x = 1001"
    );
    assert!(
        decode_minutiae(&[0x00, 0x01, 0x00, 0x0A, 0x00, 0x14, 0x01, 0x68, 0x00]).is_err(),
        "angle = 360"
    );
    assert!(
        decode_minutiae(&[0x00, 0x01, 0x00, 0x0A, 0x00, 0x14, 0x00, 0x5A, 0x02]).is_err(),
        "kind = 2"
    );
}

proptest! {
    #[test]
    fn minutiae_round_trip(seed in any::<u64>(), n in 1usize..=200) {
        let t = random_template(&mut ChaCha8Rng::seed_from_u64(seed), n, 0, 1000);
        let bytes = encode_minutiae(&t);
        prop_assert_eq!(bytes.len(), 2 + 7 * n);
        prop_assert_eq!(decode_minutiae(&bytes).unwrap(), t);
    }
}
