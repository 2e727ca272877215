//! Exact rational arithmetic used on every verification path.

use num_rational::Ratio;

/// Exact rational value, always kept in lowest terms.
pub type Rational = Ratio<i64>;

/// `binomial(a, b)`, zero whenever `b < 0` or `b > a`.
pub fn binomial(a: i64, b: i64) -> i64 {
    if b < 0 || a < 0 || b > a {
        return 0;
    }
    let b = b.min(a - b);
    let mut acc: i64 = 1;
    for i in 0..b {
        // exact at every step: acc * (a - i) is divisible by (i + 1)
        acc = acc * (a - i) / (i + 1);
    }
    acc
}

pub fn rat(numer: i64, denom: i64) -> Rational {
    Rational::new(numer, denom)
}

pub fn int(value: i64) -> Rational {
    Rational::from_integer(value)
}

/// `base^exp` for a non-negative integer exponent.
pub fn rpow(base: Rational, exp: usize) -> Rational {
    let mut acc = int(1);
    for _ in 0..exp {
        acc *= base;
    }
    acc
}

/// Parses `"p/q"`, `"p"` or a finite decimal such as `"0.25"` into an exact rational.
pub fn parse_rational(text: &str) -> Option<Rational> {
    let text = text.trim();
    if let Some((p, q)) = text.split_once('/') {
        let p: i64 = p.trim().parse().ok()?;
        let q: i64 = q.trim().parse().ok()?;
        return (q != 0).then(|| rat(p, q));
    }
    if let Some((whole, frac)) = text.split_once('.') {
        if frac.len() > 15 || !frac.chars().all(|c| c.is_ascii_digit()) {
            return None;
        }
        let negative = whole.starts_with('-');
        let whole: i64 = if whole.is_empty() || whole == "-" {
            0
        } else {
            whole.parse().ok()?
        };
        let scale = 10_i64.pow(frac.len() as u32);
        let frac: i64 = if frac.is_empty() { 0 } else { frac.parse().ok()? };
        let numer = whole.abs() * scale + frac;
        return Some(rat(if negative { -numer } else { numer }, scale));
    }
    text.parse().ok().map(int)
}

pub fn to_f64(value: Rational) -> f64 {
    *value.numer() as f64 / *value.denom() as f64
}
