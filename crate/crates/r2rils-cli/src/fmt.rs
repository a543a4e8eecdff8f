//! CSV value formatting: full round-trip precision, scientific notation
//! below 1e-3 in magnitude.

pub fn num(x: f64) -> String {
    if x == 0.0 {
        "0".to_string()
    } else if x.abs() < 1e-3 {
        format!("{x:e}")
    } else {
        format!("{x}")
    }
}

pub fn flag(b: bool) -> String {
    if b { "true" } else { "false" }.to_string()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_values_use_scientific_notation() {
        assert_eq!(num(0.0001), "1e-4");
        assert_eq!(num(-3.5e-7), "-3.5e-7");
        assert_eq!(num(0.0), "0");
    }

    #[test]
    fn large_values_stay_decimal() {
        assert_eq!(num(2.5), "2.5");
        assert_eq!(num(-10.0), "-10");
        assert_eq!(num(0.001), "0.001");
    }

    #[test]
    fn formatting_round_trips() {
        for &x in &[1.5e-300, -7.23e-4, 0.0012345678901234567, 3.0, 1e6] {
            assert_eq!(num(x).parse::<f64>().unwrap(), x);
        }
    }
}
