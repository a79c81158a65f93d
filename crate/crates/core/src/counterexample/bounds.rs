//! Closed-form constants of the non-retractability argument.

use crate::error::{invalid, Result};

fn fourth_root(n: f64) -> f64 {
    n.sqrt().sqrt()
}

fn check_eps(epsilon: f64) -> Result<()> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(invalid(format!("ε must lie in (0, 1), got {epsilon}")));
    }
    Ok(())
}

/// `M_n = n^{1/4} (1 - ε) / (25 d)`: no retraction from `B_{E_n}` onto the
/// `n`-th tube is `M_n`-Lipschitz.
pub fn m_n(n: usize, epsilon: f64, d: f64) -> Result<f64> {
    if n == 0 {
        return Err(invalid("n must be at least 1"));
    }
    check_eps(epsilon)?;
    if !(d >= 1.0) {
        return Err(invalid("d must be at least 1"));
    }
    Ok(fourth_root(n as f64) * (1.0 - epsilon) / (25.0 * d))
}

/// `n^{1/4} / 3`, a lower bound for Lipschitz retractions of `l_inf` onto `l_2^n`.
pub fn lind_bound(n: usize) -> Result<f64> {
    if n == 0 {
        return Err(invalid("n must be at least 1"));
    }
    Ok(fourth_root(n as f64) / 3.0)
}

/// `2 d L / (1 - ε)`: the constant of the retraction of `l_inf` onto `l_2^n`
/// obtained from an `L`-Lipschitz retraction of `B_{E_n}` onto `B_{Y_n}`.
pub fn transfer(lipschitz: f64, d: f64, epsilon: f64) -> Result<f64> {
    check_eps(epsilon)?;
    if !(lipschitz >= 0.0) || !(d >= 1.0) {
        return Err(invalid("need L >= 0 and d >= 1"));
    }
    Ok(2.0 * d * lipschitz / (1.0 - epsilon))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_values() {
        assert_eq!(m_n(16, 0.5, 1.0).unwrap(), 0.04);
        assert_eq!(lind_bound(81).unwrap(), 1.0);
        assert_eq!(transfer(1.0, 1.0, 0.5).unwrap(), 4.0);
    }

    #[test]
    fn monotonicity() {
        for n in 1..50 {
            assert!(m_n(n + 1, 0.5, 2.0).unwrap() > m_n(n, 0.5, 2.0).unwrap());
            assert!(m_n(n, 0.5, 3.0).unwrap() < m_n(n, 0.5, 2.0).unwrap());
            assert!(m_n(n, 0.6, 2.0).unwrap() < m_n(n, 0.5, 2.0).unwrap());
        }
        assert!(m_n(1, 1.0, 1.0).is_err());
        assert!(m_n(0, 0.5, 1.0).is_err());
        assert!(transfer(1.0, 0.5, 0.5).is_err());
    }

    #[test]
    fn chained_bound_stays_below_lindenstrauss() {
        // a 4 M_n retraction transfers to 8 n^{1/4} / 25 < n^{1/4} / 3
        for n in [1, 16, 81, 1000] {
            let m = m_n(n, 0.5, 2.0).unwrap();
            assert!(transfer(4.0 * m, 2.0, 0.5).unwrap() < lind_bound(n).unwrap());
        }
    }
}
