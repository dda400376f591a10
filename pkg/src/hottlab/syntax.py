"""Nameless core syntax.

Terms carry de Bruijn indices, so alpha-equivalence is literal structural
equality and substitution is capture-avoiding by construction.  Binder
conventions:

* ``Pi(dom, cod)``, ``Sigma(fst, snd)``, ``CodePi``, ``CodeSigma``: the
  second field is scoped under one binder.
* ``Lam(body)``: one binder, no domain annotation (the checker supplies it).
* ``J(motive, base, lhs, rhs, path)``: the motive is scoped under three
  binders (left endpoint, right endpoint, path); ``base`` inhabits the
  motive at ``(lhs, lhs, Refl lhs)`` and the whole eliminator lives at the
  motive instantiated with ``(lhs, rhs, path)``.
* ``AxFunext(dom, cod, f, g, htpy)``: ``cod`` is a type scoped under one
  binder; the axiom is always fully instantiated.

Universes are Tarski-style: ``Univ(n)`` is a type, its elements are codes
(``CodePi``, ``CodeSigma``, ``CodeId``, ``CodeUniv``, ``Lift``) and ``El``
decodes.  Cumulativity is explicit via ``Lift``.

Everything here is immutable and safe to share between workers.
"""

from __future__ import annotations

from dataclasses import dataclass


class MalformedTermError(Exception):
    """Raised when an operation would produce an ill-scoped term."""


@dataclass(frozen=True)
class Term:
    __slots__ = ()


@dataclass(frozen=True)
class Var(Term):
    index: int


@dataclass(frozen=True)
class Pi(Term):
    dom: Term
    cod: Term  # under one binder


@dataclass(frozen=True)
class Lam(Term):
    body: Term  # under one binder


@dataclass(frozen=True)
class App(Term):
    fn: Term
    arg: Term


@dataclass(frozen=True)
class Sigma(Term):
    fst: Term
    snd: Term  # under one binder


@dataclass(frozen=True)
class Pair(Term):
    a: Term
    b: Term


@dataclass(frozen=True)
class Fst(Term):
    p: Term


@dataclass(frozen=True)
class Snd(Term):
    p: Term


@dataclass(frozen=True)
class IdTy(Term):
    ty: Term
    lhs: Term
    rhs: Term


@dataclass(frozen=True)
class Refl(Term):
    t: Term


@dataclass(frozen=True)
class J(Term):
    motive: Term  # under three binders
    base: Term
    lhs: Term
    rhs: Term
    path: Term


@dataclass(frozen=True)
class Univ(Term):
    level: int


@dataclass(frozen=True)
class El(Term):
    code: Term


@dataclass(frozen=True)
class CodePi(Term):
    dom: Term
    cod: Term  # under one binder


@dataclass(frozen=True)
class CodeSigma(Term):
    fst: Term
    snd: Term  # under one binder


@dataclass(frozen=True)
class CodeId(Term):
    code: Term
    lhs: Term
    rhs: Term


@dataclass(frozen=True)
class CodeUniv(Term):
    level: int


@dataclass(frozen=True)
class Lift(Term):
    code: Term


@dataclass(frozen=True)
class AxFunext(Term):
    dom: Term
    cod: Term  # under one binder
    f: Term
    g: Term
    htpy: Term


@dataclass(frozen=True)
class AxUa(Term):
    level: int


@dataclass(frozen=True)
class AxResize(Term):
    level: int


@dataclass(frozen=True)
class Const(Term):
    """Reference to a checked top-level definition."""

    name: str


def shift(t: Term, amount: int, cutoff: int = 0) -> Term:
    """Move every free index >= cutoff by ``amount``.

    Raises :class:`MalformedTermError` if a free index would go negative.
    """
    match t:
        case Var(k):
            if k < cutoff:
                return t
            if k + amount < cutoff:
                raise MalformedTermError(f"shift drives index {k} below cutoff {cutoff}")
            return Var(k + amount)
        case Pi(dom, cod):
            return Pi(shift(dom, amount, cutoff), shift(cod, amount, cutoff + 1))
        case Lam(body):
            return Lam(shift(body, amount, cutoff + 1))
        case App(fn, arg):
            return App(shift(fn, amount, cutoff), shift(arg, amount, cutoff))
        case Sigma(fst, snd):
            return Sigma(shift(fst, amount, cutoff), shift(snd, amount, cutoff + 1))
        case Pair(a, b):
            return Pair(shift(a, amount, cutoff), shift(b, amount, cutoff))
        case Fst(p):
            return Fst(shift(p, amount, cutoff))
        case Snd(p):
            return Snd(shift(p, amount, cutoff))
        case IdTy(ty, lhs, rhs):
            return IdTy(shift(ty, amount, cutoff), shift(lhs, amount, cutoff), shift(rhs, amount, cutoff))
        case Refl(u):
            return Refl(shift(u, amount, cutoff))
        case J(motive, base, lhs, rhs, path):
            return J(
                shift(motive, amount, cutoff + 3),
                shift(base, amount, cutoff),
                shift(lhs, amount, cutoff),
                shift(rhs, amount, cutoff),
                shift(path, amount, cutoff),
            )
        case El(code):
            return El(shift(code, amount, cutoff))
        case CodePi(dom, cod):
            return CodePi(shift(dom, amount, cutoff), shift(cod, amount, cutoff + 1))
        case CodeSigma(fst, snd):
            return CodeSigma(shift(fst, amount, cutoff), shift(snd, amount, cutoff + 1))
        case CodeId(code, lhs, rhs):
            return CodeId(shift(code, amount, cutoff), shift(lhs, amount, cutoff), shift(rhs, amount, cutoff))
        case Lift(code):
            return Lift(shift(code, amount, cutoff))
        case AxFunext(dom, cod, f, g, htpy):
            return AxFunext(
                shift(dom, amount, cutoff),
                shift(cod, amount, cutoff + 1),
                shift(f, amount, cutoff),
                shift(g, amount, cutoff),
                shift(htpy, amount, cutoff),
            )
        case Univ(_) | CodeUniv(_) | AxUa(_) | AxResize(_) | Const(_):
            return t
    raise MalformedTermError(f"unknown term {t!r}")


def substitute(t: Term, target: int, s: Term) -> Term:
    """Replace ``Var(target)`` by ``s``; free indices above ``target`` drop by one."""
    match t:
        case Var(k):
            if k == target:
                return s
            if k > target:
                return Var(k - 1)
            return t
        case Pi(dom, cod):
            return Pi(substitute(dom, target, s), substitute(cod, target + 1, shift(s, 1)))
        case Lam(body):
            return Lam(substitute(body, target + 1, shift(s, 1)))
        case App(fn, arg):
            return App(substitute(fn, target, s), substitute(arg, target, s))
        case Sigma(fst, snd):
            return Sigma(substitute(fst, target, s), substitute(snd, target + 1, shift(s, 1)))
        case Pair(a, b):
            return Pair(substitute(a, target, s), substitute(b, target, s))
        case Fst(p):
            return Fst(substitute(p, target, s))
        case Snd(p):
            return Snd(substitute(p, target, s))
        case IdTy(ty, lhs, rhs):
            return IdTy(substitute(ty, target, s), substitute(lhs, target, s), substitute(rhs, target, s))
        case Refl(u):
            return Refl(substitute(u, target, s))
        case J(motive, base, lhs, rhs, path):
            return J(
                substitute(motive, target + 3, shift(s, 3)),
                substitute(base, target, s),
                substitute(lhs, target, s),
                substitute(rhs, target, s),
                substitute(path, target, s),
            )
        case El(code):
            return El(substitute(code, target, s))
        case CodePi(dom, cod):
            return CodePi(substitute(dom, target, s), substitute(cod, target + 1, shift(s, 1)))
        case CodeSigma(fst, snd):
            return CodeSigma(substitute(fst, target, s), substitute(snd, target + 1, shift(s, 1)))
        case CodeId(code, lhs, rhs):
            return CodeId(substitute(code, target, s), substitute(lhs, target, s), substitute(rhs, target, s))
        case Lift(code):
            return Lift(substitute(code, target, s))
        case AxFunext(dom, cod, f, g, htpy):
            return AxFunext(
                substitute(dom, target, s),
                substitute(cod, target + 1, shift(s, 1)),
                substitute(f, target, s),
                substitute(g, target, s),
                substitute(htpy, target, s),
            )
        case Univ(_) | CodeUniv(_) | AxUa(_) | AxResize(_) | Const(_):
            return t
    raise MalformedTermError(f"unknown term {t!r}")


def term_size(t: Term) -> int:
    match t:
        case Var(_) | Univ(_) | CodeUniv(_) | AxUa(_) | AxResize(_) | Const(_):
            return 1
        case Lam(b) | Fst(b) | Snd(b) | Refl(b) | El(b) | Lift(b):
            return 1 + term_size(b)
        case Pi(a, b) | App(a, b) | Sigma(a, b) | Pair(a, b) | CodePi(a, b) | CodeSigma(a, b):
            return 1 + term_size(a) + term_size(b)
        case IdTy(a, b, c) | CodeId(a, b, c):
            return 1 + term_size(a) + term_size(b) + term_size(c)
        case J(m, b, l, r, p):
            return 1 + sum(map(term_size, (m, b, l, r, p)))
        case AxFunext(d, c, f, g, h):
            return 1 + sum(map(term_size, (d, c, f, g, h)))
    raise MalformedTermError(f"unknown term {t!r}")


# ---------------------------------------------------------------------------
# Closed types of the ua / resize constants.
#
# These are built once per level, in beta-normal form, and are convertible
# with the unfoldings of the stdlib definitions of the same notions.

def _id_lam() -> Term:
    return Lam(Var(0))


def _comp_lam(g: Term, f: Term) -> Term:
    # \x. g (f x)
    return Lam(App(shift(g, 1), App(shift(f, 1), Var(0))))


def _arrow(dom: Term, cod: Term) -> Term:
    # non-dependent function type
    return Pi(dom, shift(cod, 1))


def _linv_type(x: Term, y: Term, f: Term) -> Term:
    # Sigma (g : y -> x). Id (x -> x) (g . f) id
    inner = IdTy(
        _arrow(shift(x, 1), shift(x, 1)),
        _comp_lam(Var(0), shift(f, 1)),
        _id_lam(),
    )
    return Sigma(_arrow(y, x), inner)


def _rinv_type(x: Term, y: Term, f: Term) -> Term:
    # Sigma (h : y -> x). Id (y -> y) (f . h) id
    inner = IdTy(
        _arrow(shift(y, 1), shift(y, 1)),
        _comp_lam(shift(f, 1), Var(0)),
        _id_lam(),
    )
    return Sigma(_arrow(y, x), inner)


def is_equiv_type(x: Term, y: Term, f: Term) -> Term:
    """The type of bi-invertibility data for ``f : x -> y``."""
    return Sigma(_linv_type(x, y, f), shift(_rinv_type(x, y, f), 1))


def equiv_type(x: Term, y: Term) -> Term:
    """Sigma (f : x -> y). isEquiv f."""
    return Sigma(_arrow(x, y), is_equiv_type(shift(x, 1), shift(y, 1), Var(0)))


def id_equiv_term() -> Term:
    """The identity function packaged with its trivial inverse data."""
    half = Pair(_id_lam(), Refl(_id_lam()))
    return Pair(_id_lam(), Pair(half, half))


def id_to_equiv_term(level: int, a: Term, b: Term, p: Term) -> Term:
    """Transport of the identity equivalence along ``p : Id (Univ level) a b``."""
    motive = equiv_type(El(Var(2)), El(Var(1)))
    return J(motive, id_equiv_term(), a, b, p)


def ua_axiom_type(level: int) -> Term:
    """Pi (A B : Univ level). isEquiv (\\p. idToEquiv A B p)."""
    a, b = Var(1), Var(0)
    dom = IdTy(Univ(level), a, b)
    cod = equiv_type(El(a), El(b))
    fn = Lam(id_to_equiv_term(level, shift(a, 1), shift(b, 1), Var(0)))
    return Pi(Univ(level), Pi(Univ(level), is_equiv_type(dom, cod, fn)))


def is_prop_type(t: Term) -> Term:
    """Pi (x y : t). Id t x y."""
    return Pi(t, Pi(shift(t, 1), IdTy(shift(t, 2), Var(1), Var(0))))


def prop_universe_type(level: int) -> Term:
    """Sigma (A : Univ level). isProp (El A)."""
    return Sigma(Univ(level), is_prop_type(El(Var(0))))


def prop_compare_term() -> Term:
    """The canonical map Prop_(U n) -> Prop_(U n+1): lift the code, keep the witness."""
    return Lam(Pair(Lift(Fst(Var(0))), Snd(Var(0))))


def resize_axiom_type(level: int) -> Term:
    """isEquiv of the canonical map Prop_(U level) -> Prop_(U level+1)."""
    return is_equiv_type(
        prop_universe_type(level),
        prop_universe_type(level + 1),
        prop_compare_term(),
    )
