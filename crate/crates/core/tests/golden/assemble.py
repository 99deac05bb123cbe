#!/usr/bin/env python3
"""Assembles the golden inputs with GNU as and records the bytes.

encoding_input.s  -> encoding.golden       (one instruction per line)
functions/*.s     -> functions/*.golden    (text and data sections)
"""
import pathlib
import subprocess
import tempfile

HERE = pathlib.Path(__file__).resolve().parent


def assemble(source, sections):
    with tempfile.TemporaryDirectory() as tmp:
        tmp = pathlib.Path(tmp)
        (tmp / "in.s").write_text(source)
        subprocess.run(["as", "--64", "-o", str(tmp / "out.o"), str(tmp / "in.s")], check=True)
        out = {}
        for name in sections:
            subprocess.run(
                ["objcopy", "-O", "binary", f"--only-section=.{name}", str(tmp / "out.o"), str(tmp / name)],
                check=True,
            )
            out[name] = (tmp / name).read_bytes()
        return out


def hexed(data):
    return " ".join(f"{b:02X}" for b in data)


def single_instructions():
    lines = [l for l in (HERE / "encoding_input.s").read_text().splitlines() if l.strip()]
    rows = []
    for line in lines:
        text = assemble(f".intel_syntax noprefix\n.text\n{line}\n", ["text"])["text"]
        rows.append(f"{line}\t{hexed(text)}")
    (HERE / "encoding.golden").write_text("\n".join(rows) + "\n")


def functions():
    for path in sorted((HERE / "functions").glob("*.s")):
        # Our objects pad code with int3 rather than nops.
        source = path.read_text().replace(".p2align 4\n", ".p2align 4, 0xcc\n")
        out = assemble(source, ["text", "data"])
        path.with_suffix(".golden").write_text(f"text\t{hexed(out['text'])}\ndata\t{hexed(out['data'])}\n")


if __name__ == "__main__":
    single_instructions()
    functions()
