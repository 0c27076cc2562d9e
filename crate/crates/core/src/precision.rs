//! Process-wide working precision.
//!
//! The working precision is read once at startup (CLI flag, environment
//! variable or config file) and is immutable afterwards. All floating
//! coefficients are created at this precision unless a caller explicitly
//! requests an elevated one (the finite-frequency oracle does, to absorb
//! the cancellations of the hyperbolic closed forms at small arguments).

use std::sync::OnceLock;

/// Default number of significant decimal digits.
pub const DEFAULT_DIGITS: u32 = 60;

/// Extra guard bits beyond the decimal-digit request.
const GUARD_BITS: u32 = 32;

static DIGITS: OnceLock<u32> = OnceLock::new();

/// Set the working precision in decimal digits. May be called at most once
/// before any computation; later calls with the same value are no-ops,
/// later calls with a different value return the active value as `Err`.
pub fn set_digits(digits: u32) -> Result<(), u32> {
    let d = *DIGITS.get_or_init(|| digits);
    if d == digits {
        Ok(())
    } else {
        Err(d)
    }
}

/// The working precision in decimal digits (defaults to [`DEFAULT_DIGITS`]).
pub fn digits() -> u32 {
    *DIGITS.get_or_init(|| DEFAULT_DIGITS)
}

/// Convert a decimal-digit count to a binary MPFR precision.
pub fn bits_for_digits(digits: u32) -> u32 {
    // log2(10) = 3.3219...; round up and add guard bits.
    (digits as f64 * std::f64::consts::LOG2_10).ceil() as u32 + GUARD_BITS
}

/// The working precision in bits.
pub fn working_bits() -> u32 {
    bits_for_digits(digits())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_to_sixty_digits() {
        assert_eq!(digits(), DEFAULT_DIGITS);
        assert!(working_bits() > 199);
        // Same-value set after the default has been read is accepted.
        assert!(set_digits(DEFAULT_DIGITS).is_ok());
        assert_eq!(set_digits(30), Err(DEFAULT_DIGITS));
    }
}
