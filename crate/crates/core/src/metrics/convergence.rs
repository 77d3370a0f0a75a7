/// First round whose accuracy reaches `target` (inclusive), if any.
pub fn rounds_to_target(curve: &[(usize, f64)], target: f64) -> Option<usize> {
    curve.iter().find(|(_, acc)| *acc >= target).map(|(r, _)| *r)
}

/// `baseline_rounds / method_rounds`, or `None` when the method never gets
/// there.
pub fn speedup(baseline_rounds: usize, method_rounds: Option<usize>) -> Option<f64> {
    method_rounds.map(|m| baseline_rounds as f64 / m as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_crossing_inclusive() {
        let curve = [(1, 0.3), (2, 0.6), (3, 0.5)];
        assert_eq!(rounds_to_target(&curve, 0.5), Some(2));
        assert_eq!(rounds_to_target(&curve, 0.6), Some(2));
        assert_eq!(rounds_to_target(&curve, 0.61), None);
    }

    #[test]
    fn self_speedup() {
        let curve = [(1, 0.2), (2, 0.4), (3, 0.7)];
        let r = rounds_to_target(&curve, 0.7).unwrap();
        assert_eq!(r, 3);
        assert_eq!(speedup(r, Some(r)), Some(1.0));
        assert_eq!(speedup(3, None), None);
    }
}
