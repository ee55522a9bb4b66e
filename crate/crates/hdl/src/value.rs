//! Four-state bit vectors parsed from Verilog literal text.

use std::fmt;

use num_bigint::BigUint;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Bit {
    Zero,
    One,
    X,
    Z,
}

impl Bit {
    fn from_char(c: char) -> Option<Bit> {
        match c {
            '0' => Some(Bit::Zero),
            '1' => Some(Bit::One),
            'x' | 'X' => Some(Bit::X),
            'z' | 'Z' | '?' => Some(Bit::Z),
            _ => None,
        }
    }

    fn as_char(self) -> char {
        match self {
            Bit::Zero => '0',
            Bit::One => '1',
            Bit::X => 'x',
            Bit::Z => 'z',
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid literal {text:?}: {reason}")]
pub struct ValueError {
    pub text: String,
    pub reason: String,
}

fn invalid(text: &str, reason: impl Into<String>) -> ValueError {
    ValueError { text: text.to_string(), reason: reason.into() }
}

/// Bits stored least-significant first. `size` is the declared literal width
/// when one was written.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LogicValue {
    bits: Vec<Bit>,
    size: Option<usize>,
}

fn expand_digit(c: char, bits_per_digit: usize, text: &str) -> Result<Vec<Bit>, ValueError> {
    if let Some(b) = Bit::from_char(c).filter(|b| !matches!(b, Bit::Zero | Bit::One)) {
        return Ok(vec![b; bits_per_digit]);
    }
    let v = c.to_digit(1 << bits_per_digit).ok_or_else(|| invalid(text, format!("digit {c:?} out of range")))?;
    Ok((0..bits_per_digit).map(|i| if v >> i & 1 == 1 { Bit::One } else { Bit::Zero }).collect())
}

fn decimal_bits(digits: &str, text: &str) -> Result<Vec<Bit>, ValueError> {
    if digits.len() == 1 {
        if let Some(b) = Bit::from_char(digits.chars().next().unwrap()).filter(|b| !matches!(b, Bit::Zero | Bit::One)) {
            return Ok(vec![b]);
        }
    }
    let n = BigUint::parse_bytes(digits.as_bytes(), 10).ok_or_else(|| invalid(text, "bad decimal digits"))?;
    Ok(n.to_radix_le(2).into_iter().map(|d| if d == 1 { Bit::One } else { Bit::Zero }).collect())
}

impl LogicValue {
    /// Parses `1'b0`, `128'hA5`, `'hff`, `8'd255`, `2'b1x`, `'1`, or a bare
    /// decimal / binary digit string such as `0`, `45`.
    pub fn parse(text: &str) -> Result<Self, ValueError> {
        let t: String = text.trim().chars().filter(|c| *c != '_' && !c.is_whitespace()).collect();
        if t.is_empty() {
            return Err(invalid(text, "empty"));
        }
        let Some(q) = t.find('\'') else {
            if !t.chars().all(|c| c.is_ascii_digit()) {
                return Err(invalid(text, "not a literal"));
            }
            return Ok(Self { bits: decimal_bits(&t, text)?, size: None });
        };
        let size = match &t[..q] {
            "" => None,
            s => {
                let n: usize = s.parse().map_err(|_| invalid(text, "bad size"))?;
                if n == 0 || n > 1 << 16 {
                    return Err(invalid(text, "size out of range"));
                }
                Some(n)
            }
        };
        let mut rest = &t[q + 1..];
        if rest.starts_with(['s', 'S']) {
            rest = &rest[1..];
        }
        let mut chars = rest.chars();
        let base = chars.next().ok_or_else(|| invalid(text, "missing base"))?;
        let digits = chars.as_str();
        let bits = match base.to_ascii_lowercase() {
            // '0 '1 'x 'z: fill the whole width.
            '0' | '1' | 'x' | 'z' if size.is_none() && digits.is_empty() => {
                return Ok(Self { bits: vec![Bit::from_char(base).unwrap()], size: None });
            }
            'b' | 'o' | 'h' => {
                let per = match base.to_ascii_lowercase() {
                    'b' => 1,
                    'o' => 3,
                    _ => 4,
                };
                if digits.is_empty() {
                    return Err(invalid(text, "missing digits"));
                }
                let mut bits = Vec::with_capacity(digits.len() * per);
                for c in digits.chars().rev() {
                    bits.extend(expand_digit(c, per, text)?);
                }
                bits
            }
            'd' => {
                if digits.is_empty() {
                    return Err(invalid(text, "missing digits"));
                }
                decimal_bits(digits, text)?
            }
            _ => return Err(invalid(text, "unknown base")),
        };
        Ok(Self { bits, size }.fit_declared())
    }

    fn fit_declared(mut self) -> Self {
        if let Some(n) = self.size {
            self = self.resized(n);
        }
        self
    }

    pub fn size(&self) -> Option<usize> {
        self.size
    }

    pub fn bit_len(&self) -> usize {
        self.bits.len()
    }

    /// Extends (zero, or x/z when the top bit is x/z) or truncates to `width`.
    pub fn resized(&self, width: usize) -> Self {
        let fill = match self.bits.last() {
            Some(Bit::X) => Bit::X,
            Some(Bit::Z) => Bit::Z,
            _ => Bit::Zero,
        };
        let mut bits = self.bits.clone();
        bits.resize(width.max(1), fill);
        Self { bits, size: Some(width.max(1)) }
    }

    /// Four-state equality after extending both sides to `width` (or to the
    /// wider of the two when `width` is `None`).
    pub fn equivalent(&self, other: &LogicValue, width: Option<usize>) -> bool {
        let w = width.unwrap_or_else(|| self.effective_width().max(other.effective_width()));
        self.resized(w).bits == other.resized(w).bits
    }

    fn effective_width(&self) -> usize {
        self.size.unwrap_or(self.bits.len()).max(1)
    }

    /// Canonical `<width>'b<bits>` rendering.
    pub fn to_binary_literal(&self) -> String {
        let w = self.effective_width();
        let v = self.resized(w);
        let bits: String = v.bits.iter().rev().map(|b| b.as_char()).collect();
        format!("{w}'b{bits}")
    }

    pub fn to_u128(&self) -> Option<u128> {
        if self.bits.len() > 128 && self.bits[128..].iter().any(|b| *b != Bit::Zero) {
            return None;
        }
        let mut v = 0u128;
        for (i, b) in self.bits.iter().take(128).enumerate() {
            match b {
                Bit::One => v |= 1 << i,
                Bit::Zero => {}
                _ => return None,
            }
        }
        Some(v)
    }
}

impl fmt::Display for LogicValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_binary_literal())
    }
}
