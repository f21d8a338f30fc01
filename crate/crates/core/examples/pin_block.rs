// Format-0 PIN blocks: the PIN never travels in the clear, and decoding
// with the wrong card number fails the fill-nibble check.

use bioatm::wire::{encode_pin_block, extract_pin};

pub fn run() -> Result<(), Box<dyn std::error::Error>> {
    let pan = "79927398713";
    let block = encode_pin_block("1234", pan)?;
    println!("PIN block for 1234 on {pan}: {}", block.to_hex());
    println!("extracted: {}", extract_pin(&block, pan)?);
    match extract_pin(&block, "4111111111111111") {
        Ok(pin) => println!("wrong card decoded to {pin}?"),
        Err(e) => println!("wrong card: {e}"),
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run()
}
