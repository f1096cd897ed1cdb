"""Smoke test for the Python bindings.

Build first: `pip install --no-build-isolation -e crates/py` (needs maturin).
"""

from pathlib import Path

import jbc2ctrs_py as j

ROOT = Path(__file__).resolve().parent.parent


def test_append_end_to_end():
    prog = j.Program.parse((ROOT / "corpus" / "append.jbc").read_text())
    assert "append" in prog.render()

    steps, result = prog.run("List.append", ["List{next:List{next:null}}", "List{next:null}"])
    assert steps == 26
    assert result == "unit"

    an = j.Analysis(
        prog,
        "List.append",
        assume=["acyclic:this", "unshared:this,ys"],
        this_nonnull=True,
    )
    assert an.node_count == 35
    assert an.k == 3
    assert an.rule_count > 0
    assert "->" in an.ctrs()
    assert an.dot().startswith("digraph")

    rep = an.simulate(["List{next:List{next:null}}", "List{next:null}"])
    assert rep.holds
    assert rep.m == 26
    assert rep.m <= rep.l <= rep.k * rep.m


def test_errors_surface_as_exceptions():
    try:
        j.Program.parse("Class:")
    except ValueError:
        pass
    else:
        raise AssertionError("bad source accepted")


if __name__ == "__main__":
    test_append_end_to_end()
    test_errors_surface_as_exceptions()
    print("ok")
