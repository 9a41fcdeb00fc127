//! Decoding of integer literals such as `8'hFF`, `4'b10x1`, `'d7` and `42`.

/// Widest vector the decoder represents.
pub const MAX_WIDTH: u32 = 128;

/// An integer literal as a bit-vector with an unknown-bit mask.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Literal {
    /// `None` for unsized literals (32 bits in expressions).
    pub width: Option<u32>,
    pub signed: bool,
    pub value: u128,
    /// Bits that are `x` or `z`.
    pub xmask: u128,
}

pub fn mask(width: u32) -> u128 {
    if width >= 128 {
        u128::MAX
    } else {
        (1u128 << width) - 1
    }
}

pub fn parse_literal(text: &str) -> Result<Literal, String> {
    let clean: String = text.chars().filter(|c| !c.is_whitespace() && *c != '_').collect();
    let Some(tick) = clean.find('\'') else {
        if clean.contains(['.', 'e', 'E']) {
            return Err(format!("real literal `{text}` is not an integer"));
        }
        let value: u128 = clean
            .parse()
            .map_err(|_| format!("integer literal `{text}` out of range"))?;
        if value > u32::MAX as u128 {
            return Err(format!("unsized literal `{text}` exceeds 32 bits"));
        }
        return Ok(Literal {
            width: None,
            signed: true,
            value,
            xmask: 0,
        });
    };
    let size = &clean[..tick];
    let width = if size.is_empty() {
        None
    } else {
        let w: u32 = size.parse().map_err(|_| format!("bad literal size in `{text}`"))?;
        if w == 0 || w > MAX_WIDTH {
            return Err(format!("literal width {w} outside 1..={MAX_WIDTH}"));
        }
        Some(w)
    };
    let mut rest = clean[tick + 1..].chars().peekable();
    let signed = matches!(rest.peek(), Some('s' | 'S'));
    if signed {
        rest.next();
    }
    let base = rest
        .next()
        .ok_or_else(|| format!("missing base in `{text}`"))?
        .to_ascii_lowercase();
    let digits: Vec<char> = rest.collect();
    if digits.is_empty() {
        return Err(format!("missing digits in `{text}`"));
    }
    let is_unknown = |c: char| matches!(c.to_ascii_lowercase(), 'x' | 'z' | '?');
    let (mut value, mut xmask, natural): (u128, u128, u32) = match base {
        'd' => {
            if digits.len() == 1 && is_unknown(digits[0]) {
                (0, u128::MAX, MAX_WIDTH)
            } else {
                let s: String = digits.iter().collect();
                let v: u128 = s
                    .parse()
                    .map_err(|_| format!("decimal literal `{text}` out of range"))?;
                (v, 0, 128 - v.leading_zeros())
            }
        }
        'b' | 'o' | 'h' => {
            let bits = match base {
                'b' => 1,
                'o' => 3,
                _ => 4,
            };
            if digits.len() as u32 * bits > MAX_WIDTH {
                return Err(format!("literal `{text}` wider than {MAX_WIDTH} bits"));
            }
            let (mut v, mut x) = (0u128, 0u128);
            for &c in &digits {
                v <<= bits;
                x <<= bits;
                if is_unknown(c) {
                    x |= mask(bits);
                } else {
                    let d = c
                        .to_digit(1 << bits)
                        .ok_or_else(|| format!("invalid digit `{c}` in `{text}`"))?;
                    v |= d as u128;
                }
            }
            (v, x, digits.len() as u32 * bits)
        }
        _ => return Err(format!("unknown base `{base}` in `{text}`")),
    };
    let effective = width.unwrap_or(32);
    // A leading x/z digit extends through the upper bits.
    if natural < effective && natural > 0 && (xmask >> (natural - 1)) & 1 == 1 {
        xmask |= mask(effective) & !mask(natural);
    }
    value &= mask(effective);
    xmask &= mask(effective);
    value &= !xmask;
    Ok(Literal {
        width,
        signed,
        value,
        xmask,
    })
}
