"""The object-language standard library and its build driver.

The library lives in ``stdlib/*.hott``; ``manifest.txt`` lists the files in
dependency order, one path per line.  Each entry below records which
declarations a file provides, a topic tag, whether the entry is required
for a passing build, and which feature flags it needs.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

from .checker import Report, Signature, check_module
from .parser import parse_module, resolve_names


@dataclass(frozen=True)
class StdlibEntry:
    file: str
    names: tuple
    tag: str
    required: bool = True
    needs_ua: bool = False
    needs_resizing: bool = False


MANIFEST = (
    StdlibEntry("prelude.hott", ("arr", "idfun", "comp"), "composition"),
    StdlibEntry(
        "path.hott",
        ("sym", "trans", "congArg", "congFun", "reflLeft", "transport"),
        "path algebra",
    ),
    StdlibEntry(
        "equiv.hott",
        ("linv", "rinv", "isEquiv", "equiv", "idEquiv", "idToEquiv", "idToEquivRefl"),
        "equivalence data",
    ),
    StdlibEntry(
        "inverse.hott",
        ("inverseFun", "inverseLeft", "inverseMid", "inverseMidRight",
         "inverseMidLeft", "inversesAgree", "inverseRight"),
        "two-sided inverses",
    ),
    StdlibEntry(
        "compose.hott",
        ("equivCompLeft", "equivCompRight", "equivComp"),
        "equivalence composition",
    ),
    StdlibEntry(
        "prop.hott",
        ("isProp", "isPropPi", "propAux", "cancelLeft", "propsAreSets", "isPropIsProp"),
        "propositions",
    ),
    StdlibEntry(
        "universe.hott",
        ("transportU", "uaPath", "transportUa", "propU0"),
        "universe transport",
        needs_ua=True,
    ),
    StdlibEntry(
        "resize.hott",
        ("propResize",),
        "resizing",
        needs_resizing=True,
    ),
)

REQUIRED_THEOREMS = {
    "T1": "idToEquivRefl",
    "T2": "inverseRight",
    "T3": "equivComp",
    "T4": "isPropPi",
    "T5": "isPropIsProp",
    "T6": "transportUa",
}


def stdlib_dir() -> Path:
    return Path(__file__).parent / "stdlib"


def manifest_files() -> list:
    lines = (stdlib_dir() / "manifest.txt").read_text(encoding="utf-8").splitlines()
    return [line.strip() for line in lines if line.strip()]


def load_stdlib_decls(files=None, known_globals=None):
    """Parse and resolve the stdlib sources into core declarations."""
    seen = set(known_globals or ())
    decls = []
    for name in files if files is not None else manifest_files():
        path = stdlib_dir() / name
        resolved = resolve_names(parse_module(path.read_text(encoding="utf-8"), str(path)), seen)
        for decl_name, _, _ in resolved:
            seen.add(decl_name)
        decls.extend(resolved)
    return decls


def default_signature() -> Signature:
    return Signature(tower_height=3, ua_levels=None, resizing=True)


def build_stdlib(sig: Signature | None = None) -> Report:
    """Check the whole manifest against a signature (fresh by default)."""
    if sig is None:
        sig = default_signature()
    decls = load_stdlib_decls(known_globals=sig.consts.keys())
    return check_module(sig, decls)
