use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{Bindings, Expr};

/// Number of random points that must all evaluate below the threshold.
pub const ZERO_TEST_POINTS: usize = 8;
pub const ZERO_TEST_THRESHOLD: f64 = 1e-10;

/// Zero test: structural zero after simplification, otherwise evaluation at
/// [`ZERO_TEST_POINTS`] random bindings with every free symbol drawn from
/// `[-1, 1]`. Points where evaluation fails (poles, domain errors) are
/// redrawn; if too few points evaluate the expression is not declared zero.
pub fn is_identically_zero(e: &Expr, seed: u64) -> bool {
    let s = e.simplify();
    if s.is_zero_literal() {
        return true;
    }
    if s.as_const().is_some() {
        return false;
    }
    let symbols = s.free_symbols();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut accepted = 0;
    for _ in 0..ZERO_TEST_POINTS * 8 {
        let mut b = Bindings::new();
        for name in &symbols {
            b.set(name.clone(), rng.gen_range(-1.0..=1.0));
        }
        match s.evaluate(&b) {
            Ok(v) if v.is_finite() => {
                if v.abs() >= ZERO_TEST_THRESHOLD {
                    return false;
                }
                accepted += 1;
                if accepted == ZERO_TEST_POINTS {
                    return true;
                }
            }
            _ => continue,
        }
    }
    false
}

#[cfg(test)]
mod tests {
    use super::super::{parse, Symbols};
    use super::*;

    fn p(s: &str) -> Expr {
        parse(s, &Symbols::planar(["a"])).unwrap()
    }

    #[test]
    fn structural_and_numeric_zero() {
        assert!(is_identically_zero(&p("x - x"), 1));
        // not cancelled structurally, but zero everywhere
        assert!(is_identically_zero(&p("sin(x)^2 + cos(x)^2 - 1"), 1));
        assert!(!is_identically_zero(&p("x*y - a"), 1));
        assert!(!is_identically_zero(&p("1e-3"), 1));
    }
}
