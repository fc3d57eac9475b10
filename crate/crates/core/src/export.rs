//! Plain-text number formatting shared by the CSV and JSON writers.

/// Scientific notation with 17 significant digits.
pub fn fmt17(value: f64) -> String {
    format!("{value:.16e}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trips() {
        for v in [0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, 0.0] {
            assert_eq!(fmt17(v).parse::<f64>().unwrap(), v);
        }
        assert_eq!(fmt17(1.0), "1.0000000000000000e0");
    }
}
