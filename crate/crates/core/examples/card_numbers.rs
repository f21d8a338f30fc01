// Luhn validation of card numbers, and completing a number with its check digit.

use bioatm::vault::{luhn_check, luhn_check_digit};

pub fn run() -> Result<(), Box<dyn std::error::Error>> {
    for pan in ["79927398713", "79927398714", "0000000000"] {
        println!(
            "{pan:<12} {}",
            if luhn_check(pan)? { "valid" } else { "invalid" }
        );
    }
    let body = "506112345678901";
    println!("{body} + check digit {}", luhn_check_digit(body)?);
    println!("letters: {}", luhn_check("4111-1111").unwrap_err());
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run()
}
