use super::VaultError;

/// True iff the digit string passes the Luhn (mod 10) check.
pub fn luhn_check(pan: &str) -> Result<bool, VaultError> {
    Ok(luhn_sum(pan, false)? % 10 == 0)
}

/// Digit that, appended to `partial`, makes it Luhn-valid.
pub fn luhn_check_digit(partial: &str) -> Result<u8, VaultError> {
    let sum = luhn_sum(partial, true)?;
    Ok(((10 - sum % 10) % 10) as u8)
}

/// Doubles every second digit counting from the right, starting with the
/// rightmost when `doubling_first` is set.
fn luhn_sum(digits: &str, doubling_first: bool) -> Result<u32, VaultError> {
    if digits.is_empty() {
        return Err(VaultError::InvalidPan("empty card number".into()));
    }
    digits
        .bytes()
        .rev()
        .enumerate()
        .try_fold(0u32, |acc, (i, b)| {
            if !b.is_ascii_digit() {
                return Err(VaultError::InvalidPan(format!(
                    "non-digit {:?} in card number",
                    char::from(b)
                )));
            }
            let mut d = u32::from(b - b'0');
            if (i % 2 == 0) == doubling_first {
                d *= 2;
                if d > 9 {
                    d -= 9;
                }
            }
            Ok(acc + d)
        })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_verdicts() {
        assert_eq!(luhn_check("79927398713"), Ok(true));
        assert_eq!(luhn_check("79927398714"), Ok(false));
        assert_eq!(luhn_check("0000000000"), Ok(true));
        assert_eq!(luhn_check("4111111111111111"), Ok(true));
    }

    #[test]
    fn rejects_bad_input() {
        assert!(luhn_check("").is_err());
        assert!(luhn_check("7992 7398 713").is_err());
        assert!(luhn_check("79927398713a").is_err());
    }

    #[test]
    fn check_digit_completes() {
        assert_eq!(luhn_check_digit("7992739871"), Ok(3));
        assert_eq!(luhn_check_digit("411111111111111"), Ok(1));
        for partial in ["0", "5", "123456789", "506100000000000"] {
            let d = luhn_check_digit(partial).unwrap();
            assert_eq!(luhn_check(&format!("{partial}{d}")), Ok(true));
        }
    }
}
