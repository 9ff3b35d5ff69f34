//! Number formatting shared by every CSV the crates write.

/// 17 significant digits in scientific notation; parses back to the same
/// `f64` bit pattern.
pub fn format_real(x: f64) -> String {
    format!("{x:.16e}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trips_exactly() {
        for x in [0.0, -0.0, 1.0 / 3.0, 6.02214076e23, -1e-300, f64::MIN_POSITIVE, 0.1 + 0.2] {
            let back: f64 = format_real(x).parse().unwrap();
            assert_eq!(back.to_bits(), x.to_bits());
        }
    }
}
