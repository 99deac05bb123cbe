//! Runtime conventions shared by both backends: traps and value printing.

/// Runtime failures that abort a phrase without ending the session.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[repr(u64)]
pub enum TrapKind {
    DivideByZero = 1,
    Bounds = 2,
    Exhaustion = 3,
    StackOverflow = 4,
    InvalidArgument = 5,
}

impl TrapKind {
    pub fn from_code(code: u64) -> Option<TrapKind> {
        Some(match code {
            1 => TrapKind::DivideByZero,
            2 => TrapKind::Bounds,
            3 => TrapKind::Exhaustion,
            4 => TrapKind::StackOverflow,
            5 => TrapKind::InvalidArgument,
            _ => return None,
        })
    }

    pub fn code(self) -> u64 {
        self as u64
    }

    pub fn message(self) -> &'static str {
        match self {
            TrapKind::DivideByZero => "Exception: Division_by_zero.",
            TrapKind::Bounds => "Exception: Invalid_argument \"index out of bounds\".",
            TrapKind::Exhaustion => "Exception: Out_of_memory.",
            TrapKind::StackOverflow => "Exception: Stack_overflow.",
            TrapKind::InvalidArgument => "Exception: Invalid_argument \"Array.make\".",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, thiserror::Error)]
#[error("{}", kind.message())]
pub struct Trap {
    pub kind: TrapKind,
}

impl From<TrapKind> for Trap {
    fn from(kind: TrapKind) -> Trap {
        Trap { kind }
    }
}

/// Shortest round-trip decimal, with a trailing `.` for integral values.
pub fn format_float(f: f64) -> String {
    if f.is_nan() {
        return "nan".into();
    }
    if f.is_infinite() {
        return if f > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let s = format!("{:?}", f);
    if let Some((mantissa, exp)) = s.split_once('e') {
        let (sign, digits) = match exp.strip_prefix('-') {
            Some(d) => ('-', d),
            None => ('+', exp),
        };
        return format!("{}e{}{:0>2}", mantissa, sign, digits);
    }
    match s.strip_suffix(".0") {
        Some(head) => format!("{}.", head),
        None => s,
    }
}

/// Sign-extends the low 63 bits: the range of a tagged integer.
pub fn wrap63(x: i64) -> i64 {
    x.wrapping_shl(1) >> 1
}

/// Float to int with the conversion instruction's semantics: NaN and
/// out-of-range values become `i64::MIN` before wrapping to 63 bits.
pub fn int_of_float(f: f64) -> i64 {
    const LIMIT: f64 = 9_223_372_036_854_775_808.0;
    let n = if f.is_nan() || !(-LIMIT..LIMIT).contains(&f) {
        i64::MIN
    } else {
        f as i64
    };
    wrap63(n)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_render_like_the_toplevel() {
        assert_eq!(format_float(1.0), "1.");
        assert_eq!(format_float(0.5), "0.5");
        assert_eq!(format_float(3.75), "3.75");
        assert_eq!(format_float(-0.0), "-0.");
        assert_eq!(format_float(1e20), "1e+20");
        assert_eq!(format_float(2.5e-7), "2.5e-07");
        assert_eq!(format_float(-1.5e300), "-1.5e+300");
        assert_eq!(format_float(1e300), "1e+300");
        assert_eq!(format_float(f64::NAN), "nan");
    }

    #[test]
    fn conversion_edge_cases() {
        assert_eq!(int_of_float(2.9), 2);
        assert_eq!(int_of_float(-2.9), -2);
        assert_eq!(int_of_float(f64::NAN), 0);
        assert_eq!(int_of_float(4611686018427387904.0), -4611686018427387904);
    }
}
