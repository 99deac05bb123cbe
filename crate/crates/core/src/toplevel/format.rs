//! Renders phrase results by static type; runtime words carry no type.

use crate::bytecode::VmValue;
use crate::frontend::Ty;
use crate::linkrun::Machine;
use crate::rt::format_float;

/// Arrays longer than this print their prefix followed by `...`.
pub const MAX_ELEMENTS: usize = 256;

/// Read access to one backend's values.
pub trait ValueView {
    type V: Clone;
    fn int(&self, v: &Self::V) -> Option<i64>;
    fn boolean(&self, v: &Self::V) -> Option<bool>;
    fn float(&self, v: &Self::V) -> Option<f64>;
    fn string(&self, v: &Self::V) -> Option<Vec<u8>>;
    fn fields(&self, v: &Self::V) -> Option<Vec<Self::V>>;
}

/// OCaml-style escaped string literal.
pub fn string_literal(bytes: &[u8]) -> String {
    let mut out = String::from("\"");
    for &b in bytes {
        match b {
            b'"' => out.push_str("\\\""),
            b'\\' => out.push_str("\\\\"),
            b'\n' => out.push_str("\\n"),
            b'\t' => out.push_str("\\t"),
            b'\r' => out.push_str("\\r"),
            0x08 => out.push_str("\\b"),
            0x20..=0x7e => out.push(b as char),
            _ => out.push_str(&format!("\\{:03}", b)),
        }
    }
    out.push('"');
    out
}

pub fn render<W: ValueView>(view: &W, ty: &Ty, v: &W::V) -> String {
    const BAD: &str = "<invalid>";
    match ty {
        Ty::Int => view
            .int(v)
            .map(|n| n.to_string())
            .unwrap_or_else(|| BAD.into()),
        Ty::Bool => view
            .boolean(v)
            .map(|b| b.to_string())
            .unwrap_or_else(|| BAD.into()),
        Ty::Unit => "()".into(),
        Ty::Float => view
            .float(v)
            .map(format_float)
            .unwrap_or_else(|| BAD.into()),
        Ty::String => view
            .string(v)
            .map(|s| string_literal(&s))
            .unwrap_or_else(|| BAD.into()),
        Ty::Arrow(..) => "<fun>".into(),
        Ty::Var(_) => "<poly>".into(),
        Ty::Tuple(ts) => match view.fields(v) {
            Some(fs) if fs.len() == ts.len() => {
                let parts: Vec<String> = ts
                    .iter()
                    .zip(&fs)
                    .map(|(t, f)| render(view, t, f))
                    .collect();
                format!("({})", parts.join(", "))
            }
            _ => BAD.into(),
        },
        Ty::Array(t) => match view.fields(v) {
            Some(fs) => {
                let mut parts: Vec<String> = fs
                    .iter()
                    .take(MAX_ELEMENTS)
                    .map(|f| render(view, t, f))
                    .collect();
                if fs.len() > MAX_ELEMENTS {
                    parts.push("...".into());
                }
                format!("[|{}|]", parts.join("; "))
            }
            None => BAD.into(),
        },
    }
}

pub struct VmView;

impl ValueView for VmView {
    type V = VmValue;

    fn int(&self, v: &VmValue) -> Option<i64> {
        match v {
            VmValue::Int(n) => Some(*n),
            _ => None,
        }
    }

    fn boolean(&self, v: &VmValue) -> Option<bool> {
        match v {
            VmValue::Bool(b) => Some(*b),
            _ => None,
        }
    }

    fn float(&self, v: &VmValue) -> Option<f64> {
        match v {
            VmValue::Float(f) => Some(*f),
            _ => None,
        }
    }

    fn string(&self, v: &VmValue) -> Option<Vec<u8>> {
        match v {
            VmValue::Str(s) => Some(s.as_bytes().to_vec()),
            _ => None,
        }
    }

    fn fields(&self, v: &VmValue) -> Option<Vec<VmValue>> {
        match v {
            VmValue::Block(b) => Some(b.borrow().clone()),
            _ => None,
        }
    }
}

/// Reads tagged words out of a native session's heap and data.
pub struct NativeView<'a>(pub &'a Machine);

impl ValueView for NativeView<'_> {
    type V = u64;

    fn int(&self, v: &u64) -> Option<i64> {
        (v & 1 == 1).then_some((*v as i64) >> 1)
    }

    fn boolean(&self, v: &u64) -> Option<bool> {
        match v {
            1 => Some(false),
            3 => Some(true),
            _ => None,
        }
    }

    fn float(&self, v: &u64) -> Option<f64> {
        self.0.read_word(*v).map(f64::from_bits)
    }

    fn string(&self, v: &u64) -> Option<Vec<u8>> {
        self.0.read_string(*v)
    }

    fn fields(&self, v: &u64) -> Option<Vec<u64>> {
        let n = self.0.block_header(*v)? >> 10;
        (0..n).map(|k| self.0.read_word(v + 8 * k)).collect()
    }
}

pub fn format_vm(ty: &Ty, v: &VmValue) -> String {
    render(&VmView, ty, v)
}

pub fn format_native(ty: &Ty, word: u64, m: &Machine) -> String {
    render(&NativeView(m), ty, &word)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::cell::RefCell;
    use std::rc::Rc;

    #[test]
    fn vm_rendering() {
        let arr = VmValue::Block(Rc::new(RefCell::new(vec![
            VmValue::Float(1.0),
            VmValue::Float(0.5),
        ])));
        assert_eq!(format_vm(&Ty::array(Ty::Float), &arr), "[|1.; 0.5|]");
        let pair = VmValue::Block(Rc::new(RefCell::new(vec![
            VmValue::Int(7),
            VmValue::Bool(true),
        ])));
        assert_eq!(
            format_vm(&Ty::Tuple(vec![Ty::Int, Ty::Bool]), &pair),
            "(7, true)"
        );
        assert_eq!(
            format_vm(&Ty::String, &VmValue::Str("a\"b\n".into())),
            "\"a\\\"b\\n\""
        );
    }

    #[test]
    fn native_int_is_untagged() {
        let m = Machine::new(Default::default()).unwrap();
        assert_eq!(format_native(&Ty::Int, 85, &m), "42");
        assert_eq!(format_native(&Ty::Bool, 3, &m), "true");
        assert_eq!(format_native(&Ty::Unit, 1, &m), "()");
    }
}
