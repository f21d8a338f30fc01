// Encode terminal messages, split a byte stream back into frames, and watch
// the CRC reject a corrupted frame.

use bioatm::wire::{Message, Token, TxnType, crc16, decode_frame, decode_stream};

pub fn run() -> Result<(), Box<dyn std::error::Error>> {
    println!("crc16(\"123456789\") = {:#06X}", crc16(b"123456789"));

    let token = Token([0x11, 0x22, 0x33, 0x44, 0x55, 0x66, 0x77, 0x88]);
    let msgs = [
        Message::TxnReq {
            token,
            txn_type: TxnType::Withdraw,
            amount: 3000,
        },
        Message::EndSession { token },
    ];
    let mut stream = Vec::new();
    for m in &msgs {
        let bytes = m.to_bytes()?;
        println!("{:<12} {}", m.msg_type().name(), hex::encode_upper(&bytes));
        stream.extend(bytes);
    }

    let frames = decode_stream(&stream)?;
    for f in &frames {
        println!("decoded {:?}", Message::from_frame(f)?);
    }

    let mut corrupt = msgs[0].to_bytes()?;
    corrupt[10] ^= 0x04;
    println!("one flipped bit: {}", decode_frame(&corrupt).unwrap_err());
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run()
}
