//! Width-limited s-expression printer shared by the IR dumps.

pub enum Sexp {
    Atom(String),
    List(Vec<Sexp>),
}

impl Sexp {
    pub fn atom(s: impl Into<String>) -> Sexp {
        Sexp::Atom(s.into())
    }

    pub fn list(head: &str, rest: impl IntoIterator<Item = Sexp>) -> Sexp {
        let mut items = vec![Sexp::atom(head)];
        items.extend(rest);
        Sexp::List(items)
    }

    fn flat_len(&self) -> usize {
        match self {
            Sexp::Atom(a) => a.len(),
            Sexp::List(items) => 2 + items.iter().map(|i| i.flat_len() + 1).sum::<usize>(),
        }
    }

    fn flat(&self, out: &mut String) {
        match self {
            Sexp::Atom(a) => out.push_str(a),
            Sexp::List(items) => {
                out.push('(');
                for (i, it) in items.iter().enumerate() {
                    if i > 0 {
                        out.push(' ');
                    }
                    it.flat(out);
                }
                out.push(')');
            }
        }
    }

    /// Renders on one line when it fits in `width`, otherwise breaks after
    /// the head with children indented by two spaces.
    pub fn render(&self, width: usize) -> String {
        let mut out = String::new();
        self.pretty(0, width, &mut out);
        out
    }

    fn pretty(&self, indent: usize, width: usize, out: &mut String) {
        match self {
            Sexp::List(items) if indent + self.flat_len() > width && items.len() > 1 => {
                out.push('(');
                items[0].flat(out);
                for it in &items[1..] {
                    out.push('\n');
                    out.extend(std::iter::repeat_n(' ', indent + 2));
                    it.pretty(indent + 2, width, out);
                }
                out.push(')');
            }
            _ => self.flat(out),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn short_lists_stay_on_one_line() {
        let s = Sexp::list("+", [Sexp::atom("1"), Sexp::atom("2")]);
        assert_eq!(s.render(80), "(+ 1 2)");
    }

    #[test]
    fn long_lists_break() {
        let s = Sexp::list("seq", [Sexp::atom("aaaa"), Sexp::atom("bbbb")]);
        assert_eq!(s.render(8), "(seq\n  aaaa\n  bbbb)");
    }
}
