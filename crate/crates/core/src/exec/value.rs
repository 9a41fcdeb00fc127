//! Four-state bit vectors (0, 1, x) up to 128 bits; `z` is folded into `x`.

use std::fmt;
use std::ops::Not;

use crate::syntax::literal::mask;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Vec4 {
    pub width: u32,
    /// Known-one bits. Always disjoint from `x`.
    pub val: u128,
    pub x: u128,
}

impl Vec4 {
    pub fn new(width: u32, val: u128, x: u128) -> Self {
        let m = mask(width);
        let x = x & m;
        Vec4 {
            width,
            val: val & m & !x,
            x,
        }
    }

    pub fn known(width: u32, val: u128) -> Self {
        Vec4::new(width, val, 0)
    }

    pub fn unknown(width: u32) -> Self {
        Vec4::new(width, 0, u128::MAX)
    }

    pub fn bit(b: Option<bool>) -> Self {
        match b {
            Some(v) => Vec4::known(1, v as u128),
            None => Vec4::unknown(1),
        }
    }

    pub fn is_known(&self) -> bool {
        self.x == 0
    }

    fn zeros(&self) -> u128 {
        mask(self.width) & !self.val & !self.x
    }

    /// Zero-extends or truncates to `width`.
    pub fn resize(self, width: u32) -> Self {
        Vec4::new(width, self.val, self.x)
    }

    /// `Some(true)` when some bit is a known 1, `Some(false)` when all bits are
    /// known 0, `None` otherwise.
    pub fn truth(&self) -> Option<bool> {
        if self.val != 0 {
            Some(true)
        } else if self.x == 0 {
            Some(false)
        } else {
            None
        }
    }

    pub fn and(self, o: Self) -> Self {
        let zero = self.zeros() | o.zeros();
        let one = self.val & o.val;
        Vec4::new(self.width, one, !(zero | one))
    }

    pub fn or(self, o: Self) -> Self {
        let one = self.val | o.val;
        let zero = self.zeros() & o.zeros();
        Vec4::new(self.width, one, !(zero | one))
    }

    pub fn xor(self, o: Self) -> Self {
        let x = self.x | o.x;
        Vec4::new(self.width, self.val ^ o.val, x)
    }

    /// Applies `f` to known operands; any unknown bit makes the result all-x.
    pub fn arith(self, o: Self, f: impl FnOnce(u128, u128) -> Option<u128>) -> Self {
        if !self.is_known() || !o.is_known() {
            return Vec4::unknown(self.width);
        }
        match f(self.val, o.val) {
            Some(v) => Vec4::known(self.width, v),
            None => Vec4::unknown(self.width),
        }
    }

    pub fn reduce_and(self) -> Self {
        if self.zeros() != 0 {
            Vec4::bit(Some(false))
        } else if self.x != 0 {
            Vec4::bit(None)
        } else {
            Vec4::bit(Some(true))
        }
    }

    pub fn reduce_or(self) -> Self {
        Vec4::bit(self.truth())
    }

    pub fn reduce_xor(self) -> Self {
        if self.x != 0 {
            Vec4::bit(None)
        } else {
            Vec4::bit(Some(self.val.count_ones() % 2 == 1))
        }
    }

    /// Bits `[lo, lo + width)`; positions past the vector read as x.
    pub fn extract(self, lo: u32, width: u32) -> Self {
        let inside = self.width.saturating_sub(lo).min(width);
        let (val, x) = if lo >= 128 {
            (0, 0)
        } else {
            (self.val >> lo, self.x >> lo)
        };
        let outside = mask(width) & !mask(inside);
        Vec4::new(width, val & mask(inside), (x & mask(inside)) | outside)
    }

    /// Overwrites bits `[lo, lo + v.width)` with `v`.
    pub fn insert(self, lo: u32, v: Vec4) -> Self {
        let m = mask(v.width) << lo;
        Vec4::new(self.width, (self.val & !m) | (v.val << lo), (self.x & !m) | (v.x << lo))
    }

    /// `{self, low}`.
    pub fn concat(self, low: Vec4) -> Self {
        let width = self.width + low.width;
        let up = |v: u128| v.checked_shl(low.width).unwrap_or(0);
        Vec4::new(width, up(self.val) | low.val, up(self.x) | low.x)
    }

    /// Most significant bit first, `x` for unknown bits.
    pub fn to_bits(&self) -> String {
        (0..self.width)
            .rev()
            .map(|i| {
                if self.x >> i & 1 == 1 {
                    'x'
                } else if self.val >> i & 1 == 1 {
                    '1'
                } else {
                    '0'
                }
            })
            .collect()
    }
}

impl Not for Vec4 {
    type Output = Vec4;

    fn not(self) -> Vec4 {
        Vec4::new(self.width, !self.val, self.x)
    }
}

impl fmt::Display for Vec4 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}'b{}", self.width, self.to_bits())
    }
}
