use core::cmp::Ordering;
use core::fmt;

/// An unreduced count ratio. Probabilities stay exact until they are
/// rendered as a decimal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Ratio {
    pub numerator: u64,
    pub denominator: u64,
}

impl Ratio {
    pub const fn new(numerator: u64, denominator: u64) -> Self {
        Self { numerator, denominator }
    }

    pub fn to_f64(self) -> f64 {
        if self.denominator == 0 {
            return f64::NAN;
        }
        self.numerator as f64 / self.denominator as f64
    }

    pub fn is_zero(self) -> bool {
        self.numerator == 0
    }

    pub fn is_one(self) -> bool {
        self.numerator == self.denominator && self.denominator != 0
    }

    /// Value comparison by cross-multiplication.
    pub fn cmp_value(self, other: Ratio) -> Ordering {
        let l = self.numerator as u128 * other.denominator as u128;
        let r = other.numerator as u128 * self.denominator as u128;
        l.cmp(&r)
    }

    /// `self > p/q`, exactly.
    pub fn exceeds(self, p: u64, q: u64) -> bool {
        self.cmp_value(Ratio::new(p, q)) == Ordering::Greater
    }
}

impl fmt::Display for Ratio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.numerator, self.denominator)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn comparisons() {
        assert_eq!(Ratio::new(1, 2).cmp_value(Ratio::new(2, 4)), Ordering::Equal);
        assert!(Ratio::new(51, 100).exceeds(1, 2));
        assert!(!Ratio::new(1, 2).exceeds(1, 2));
        assert!(Ratio::new(3, 3).is_one());
        assert_eq!(Ratio::new(2, 3).to_f64(), 2.0 / 3.0);
    }
}
