//! Shows the relocatable object of a phrase and where the linker put it.

use nml::toplevel::{Session, SessionConfig};

fn main() {
    let mut s = Session::new(SessionConfig::default());
    s.eval("let base = 100;;");
    s.eval("let offset x = x + base;;");
    let ev = s.eval("offset 23;;");
    print!("{}", ev.output);
    let linked = s.last_linked.as_ref().expect("native phrase");
    let obj = &linked.object;
    println!(
        "text {} bytes, data {} bytes",
        obj.text.len(),
        obj.data.len()
    );
    for d in &obj.defined {
        println!("defines {} at {:?}+{:#x}", d.name, d.section, d.offset);
    }
    for r in &obj.relocs {
        println!(
            "reloc {:?}+{:#x} {:?} -> {} {:+}",
            r.section, r.offset, r.kind, r.target, r.addend
        );
    }
    println!("unresolved before linking: {:?}", obj.referenced);
}
