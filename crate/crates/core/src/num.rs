//! Floating-point helpers shared by several modules.

/// `floor(n * ratio)` for a count `n` and a ratio in `[0, 1]`.
///
/// Products that land within a few ulps below an integer (for example
/// `10 * 0.7`, which is `6.999…` in binary) are snapped up, so decimal
/// ratios give the counts their decimal spelling promises.
pub(crate) fn floor_count(n: usize, ratio: f64) -> usize {
    let x = n as f64 * ratio;
    let nearest = libm::round(x);
    let snapped = if (x - nearest).abs() <= 1e-9 * x.abs().max(1.0) { nearest } else { libm::floor(x) };
    (snapped.max(0.0) as usize).min(n)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floor_count_matches_integer_arithmetic_on_decimal_grid() {
        for n in 0..=200usize {
            for tenths in 0..=10usize {
                let r = tenths as f64 / 10.0;
                assert_eq!(floor_count(n, r), n * tenths / 10, "n={n} r={r}");
                let r = 0.1 * tenths as f64;
                assert_eq!(floor_count(n, r), n * tenths / 10, "n={n} r={r}");
            }
        }
    }

    #[test]
    fn floor_count_truncates_genuine_fractions() {
        assert_eq!(floor_count(7, 0.5), 3);
        assert_eq!(floor_count(20, 0.4), 8);
        assert_eq!(floor_count(20, 0.599), 11);
        assert_eq!(floor_count(30, 0.6), 18);
    }
}
