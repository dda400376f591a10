"""Bidirectional type checker.

The theory checked here: dependent products with the eta rule, dependent
sums, intensional identity types with the J eliminator computing on refl,
a finite tower of Tarski universes closed under the type constructors
(codes reduce judgmentally under El), fully instantiated function
extensionality, a univalence constant per universe level, and an optional
propositional resizing constant.

Rule-set choices this kernel fixes (the reference presentations leave them
to an appendix): the J motive abstracts both endpoints and the path, with
the base point given at the left endpoint; funext is a constant of type
``Pi (f g : Pi (x:A). B). (Pi (x:A). Id(B, f x, g x)) -> Id(Pi(x:A).B, f, g)``
instantiated per use; there is no eta for Sigma and no cumulative subtyping
(Lift mediates between levels).

A Signature is immutable once a module has been checked into it; checking
within one module is sequential because declarations depend on their
predecessors.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Optional

from . import nbe
from .nbe import (
    Closure, FunClosure, VIdTy, VPi, VSigma, VUniv, Value, evaluate, fresh,
    quote, quote_type, vapp, vel, vfst,
)
from .syntax import (
    App, AxFunext, AxResize, AxUa, CodeId, CodePi, CodeSigma, CodeUniv, Const,
    El, Fst, IdTy, J, Lam, Lift, Pair, Pi, Refl, Sigma, Snd, Term, Univ, Var,
    term_size,
)


class CheckError(Exception):
    def __init__(self, kind: str, message: str):
        super().__init__(message)
        self.kind = kind
        self.message = message


def _mismatch(depth: int, expected: Value, got: Value) -> CheckError:
    return CheckError(
        "type-mismatch",
        "type mismatch:\n  expected: %s\n  got:      %s"
        % (quote_type(depth, expected), quote_type(depth, got)),
    )


@dataclass(frozen=True)
class ConstInfo:
    ty: Value
    value: Value
    ty_term: Term
    body_term: Term


@dataclass
class Signature:
    """Checked global constants plus the feature-flag block."""

    tower_height: int = 3
    ua_levels: Optional[frozenset] = None  # None means every level below the tower
    resizing: bool = False
    consts: dict = field(default_factory=dict)
    order: list = field(default_factory=list)

    def ua_enabled(self, level: int) -> bool:
        if self.ua_levels is None:
            return True
        return level in self.ua_levels

    def globals_values(self) -> dict:
        return {name: info.value for name, info in self.consts.items()}

    def add(self, name: str, info: ConstInfo) -> None:
        if name in self.consts:
            raise CheckError("duplicate-definition", f"duplicate definition of {name!r}")
        self.consts[name] = info
        self.order.append(name)


@dataclass(frozen=True)
class Ctx:
    types: tuple = ()  # innermost first
    env: tuple = ()    # innermost first, fresh neutrals at the binder's type

    @property
    def depth(self) -> int:
        return len(self.env)

    def extend(self, ty: Value) -> "Ctx":
        var = fresh(self.depth, ty)
        return Ctx((ty,) + self.types, (var,) + self.env)


def _eval(sig: Signature, ctx: Ctx, t: Term) -> Value:
    return evaluate(t, ctx.env, sig.globals_values())


def is_type(sig: Signature, ctx: Ctx, t: Term) -> Value:
    """Validate a type former and return its semantic value."""
    match t:
        case Pi(dom, cod):
            dom_v = is_type(sig, ctx, dom)
            is_type(sig, ctx.extend(dom_v), cod)
            return VPi(dom_v, Closure(ctx.env, cod, sig.globals_values()))
        case Sigma(fst, snd):
            fst_v = is_type(sig, ctx, fst)
            is_type(sig, ctx.extend(fst_v), snd)
            return VSigma(fst_v, Closure(ctx.env, snd, sig.globals_values()))
        case IdTy(ty, lhs, rhs):
            ty_v = is_type(sig, ctx, ty)
            check(sig, ctx, lhs, ty_v)
            check(sig, ctx, rhs, ty_v)
            return VIdTy(ty_v, _eval(sig, ctx, lhs), _eval(sig, ctx, rhs))
        case Univ(n):
            if not 0 <= n < sig.tower_height:
                raise CheckError(
                    "universe-overflow",
                    f"universe level {n} outside tower of height {sig.tower_height}",
                )
            return VUniv(n)
        case El(code):
            code_ty = infer(sig, ctx, code)
            if not isinstance(code_ty, VUniv):
                raise CheckError(
                    "type-mismatch",
                    f"El expects a universe code, but {quote_type(ctx.depth, code_ty)!s} is not a universe"
                    if not isinstance(code, Univ)
                    else f"Univ {code.level} is not a code",
                )
            return vel(_eval(sig, ctx, code))
    raise CheckError("not-a-type", f"not a type former: {t!r}")


def infer(sig: Signature, ctx: Ctx, t: Term) -> Value:
    """Synthesize the type of a term; returns the semantic type."""
    match t:
        case Var(k):
            if k >= len(ctx.types):
                raise CheckError("unbound-variable", f"unbound variable index {k}")
            return ctx.types[k]
        case Const(name):
            info = sig.consts.get(name)
            if info is None:
                raise CheckError("unbound-variable", f"unknown constant {name!r}")
            return info.ty
        case App(fn, arg):
            fn_ty = infer(sig, ctx, fn)
            if not isinstance(fn_ty, VPi):
                raise CheckError(
                    "type-mismatch",
                    f"application head has non-function type {quote_type(ctx.depth, fn_ty)}",
                )
            check(sig, ctx, arg, fn_ty.dom)
            return fn_ty.cod.apply(_eval(sig, ctx, arg))
        case Fst(p):
            p_ty = infer(sig, ctx, p)
            if not isinstance(p_ty, VSigma):
                raise CheckError(
                    "type-mismatch",
                    f"projection from non-pair type {quote_type(ctx.depth, p_ty)}",
                )
            return p_ty.fst
        case Snd(p):
            p_ty = infer(sig, ctx, p)
            if not isinstance(p_ty, VSigma):
                raise CheckError(
                    "type-mismatch",
                    f"projection from non-pair type {quote_type(ctx.depth, p_ty)}",
                )
            return p_ty.snd.apply(vfst(_eval(sig, ctx, p)))
        case Refl(u):
            u_ty = infer(sig, ctx, u)
            u_v = _eval(sig, ctx, u)
            return VIdTy(u_ty, u_v, u_v)
        case J(motive, base, lhs, rhs, path):
            path_ty = infer(sig, ctx, path)
            if not isinstance(path_ty, VIdTy):
                raise CheckError(
                    "type-mismatch",
                    f"J expects a path, got one of type {quote_type(ctx.depth, path_ty)}",
                )
            a_ty = path_ty.ty
            check(sig, ctx, lhs, a_ty)
            check(sig, ctx, rhs, a_ty)
            lhs_v = _eval(sig, ctx, lhs)
            rhs_v = _eval(sig, ctx, rhs)
            if not nbe.convertible(ctx.depth, lhs_v, path_ty.lhs, a_ty):
                raise CheckError("type-mismatch", "J endpoint does not match the path's left endpoint")
            if not nbe.convertible(ctx.depth, rhs_v, path_ty.rhs, a_ty):
                raise CheckError("type-mismatch", "J endpoint does not match the path's right endpoint")
            ctx_x = ctx.extend(a_ty)
            ctx_xy = ctx_x.extend(a_ty)
            x_var, y_var = ctx_xy.env[1], ctx_xy.env[0]
            ctx_xyq = ctx_xy.extend(VIdTy(a_ty, x_var, y_var))
            is_type(sig, ctx_xyq, motive)
            motive_clo = nbe.Closure3(ctx.env, motive, sig.globals_values())
            check(sig, ctx, base, motive_clo.apply(lhs_v, lhs_v, nbe.VRefl(lhs_v)))
            return motive_clo.apply(lhs_v, rhs_v, _eval(sig, ctx, path))
        case CodePi(dom, cod):
            n = _infer_code_level(sig, ctx, dom, "code-pi domain")
            ctx2 = ctx.extend(vel(_eval(sig, ctx, dom)))
            m = _infer_code_level(sig, ctx2, cod, "code-pi codomain")
            if m != n:
                raise CheckError(
                    "universe-overflow",
                    f"code-pi components live at different levels {n} and {m}; lift one side",
                )
            return VUniv(n)
        case CodeSigma(fst, snd):
            n = _infer_code_level(sig, ctx, fst, "code-sg first component")
            ctx2 = ctx.extend(vel(_eval(sig, ctx, fst)))
            m = _infer_code_level(sig, ctx2, snd, "code-sg second component")
            if m != n:
                raise CheckError(
                    "universe-overflow",
                    f"code-sg components live at different levels {n} and {m}; lift one side",
                )
            return VUniv(n)
        case CodeId(code, lhs, rhs):
            n = _infer_code_level(sig, ctx, code, "code-id carrier")
            carrier = vel(_eval(sig, ctx, code))
            check(sig, ctx, lhs, carrier)
            check(sig, ctx, rhs, carrier)
            return VUniv(n)
        case CodeUniv(n):
            if not 0 <= n + 1 < sig.tower_height:
                raise CheckError(
                    "universe-overflow",
                    f"code-u {n} needs universe level {n + 1}, tower height is {sig.tower_height}",
                )
            return VUniv(n + 1)
        case Lift(code):
            n = _infer_code_level(sig, ctx, code, "lift argument")
            if n + 1 >= sig.tower_height:
                raise CheckError(
                    "universe-overflow",
                    f"lift out of the tower: level {n + 1} >= height {sig.tower_height}",
                )
            return VUniv(n + 1)
        case AxUa(n):
            if not 0 <= n < sig.tower_height:
                raise CheckError("universe-overflow", f"ua {n}: no universe at level {n}")
            if not sig.ua_enabled(n):
                raise CheckError("axiom-disabled", f"univalence is disabled at level {n}")
            return nbe.ua_type_value(n)
        case AxResize(n):
            if not 0 <= n + 1 < sig.tower_height:
                raise CheckError("universe-overflow", f"resize {n}: no universe at level {n + 1}")
            if not sig.resizing:
                raise CheckError("axiom-disabled", "propositional resizing is disabled")
            return nbe.resize_type_value(n)
        case AxFunext(dom, cod, f, g, htpy):
            dom_v = is_type(sig, ctx, dom)
            is_type(sig, ctx.extend(dom_v), cod)
            cod_clo = Closure(ctx.env, cod, sig.globals_values())
            fn_ty = VPi(dom_v, cod_clo)
            check(sig, ctx, f, fn_ty)
            check(sig, ctx, g, fn_ty)
            f_v = _eval(sig, ctx, f)
            g_v = _eval(sig, ctx, g)
            htpy_ty = VPi(dom_v, FunClosure(
                lambda u: VIdTy(cod_clo.apply(u), vapp(f_v, u), vapp(g_v, u))))
            check(sig, ctx, htpy, htpy_ty)
            return VIdTy(fn_ty, f_v, g_v)
        case Univ(n):
            raise CheckError("not-a-term", f"Univ {n} is a type, not a term (its code is code-u)")
        case Pi(_, _) | Sigma(_, _) | IdTy(_, _, _) | El(_):
            raise CheckError("not-a-term", f"type former in term position: {type(t).__name__}")
        case Lam(_) | Pair(_, _):
            raise CheckError(
                "cannot-infer",
                f"cannot infer a type for {type(t).__name__}; an annotation is required",
            )
    raise CheckError("not-a-term", f"cannot infer {t!r}")


def _infer_code_level(sig: Signature, ctx: Ctx, t: Term, what: str) -> int:
    ty = infer(sig, ctx, t)
    if not isinstance(ty, VUniv):
        raise CheckError(
            "type-mismatch",
            f"{what} must be a universe code, got {quote_type(ctx.depth, ty)}",
        )
    return ty.level


def check(sig: Signature, ctx: Ctx, t: Term, ty: Value) -> None:
    """Check a term against a semantic type."""
    match t:
        case Lam(body):
            if not isinstance(ty, VPi):
                raise CheckError(
                    "type-mismatch",
                    f"lambda checked against non-function type {quote_type(ctx.depth, ty)}",
                )
            ctx2 = ctx.extend(ty.dom)
            check(sig, ctx2, body, ty.cod.apply(ctx2.env[0]))
            return
        case Pair(a, b):
            if not isinstance(ty, VSigma):
                raise CheckError(
                    "type-mismatch",
                    f"pair checked against non-pair type {quote_type(ctx.depth, ty)}",
                )
            check(sig, ctx, a, ty.fst)
            check(sig, ctx, b, ty.snd.apply(_eval(sig, ctx, a)))
            return
        case Refl(u):
            if not isinstance(ty, VIdTy):
                raise CheckError(
                    "type-mismatch",
                    f"refl checked against non-path type {quote_type(ctx.depth, ty)}",
                )
            check(sig, ctx, u, ty.ty)
            u_v = _eval(sig, ctx, u)
            if not nbe.convertible(ctx.depth, u_v, ty.lhs, ty.ty):
                raise CheckError(
                    "type-mismatch",
                    "refl endpoint mismatch:\n  refl at:  %s\n  expected: %s"
                    % (quote(ctx.depth, ty.ty, u_v), quote(ctx.depth, ty.ty, ty.lhs)),
                )
            if not nbe.convertible(ctx.depth, u_v, ty.rhs, ty.ty):
                raise CheckError(
                    "type-mismatch",
                    "refl endpoint mismatch:\n  refl at:  %s\n  expected: %s"
                    % (quote(ctx.depth, ty.ty, u_v), quote(ctx.depth, ty.ty, ty.rhs)),
                )
            return
    got = infer(sig, ctx, t)
    if not nbe.convertible_types(ctx.depth, got, ty):
        raise _mismatch(ctx.depth, ty, got)


# --- module checking --------------------------------------------------------


@dataclass(frozen=True)
class DeclReport:
    name: str
    ok: bool
    elapsed_ms: float
    nf_size: int
    error: Optional[str] = None
    error_kind: Optional[str] = None

    def to_json(self) -> dict:
        out = {
            "name": self.name,
            "ok": self.ok,
            "elapsed_ms": round(self.elapsed_ms, 3),
            "nf_size": self.nf_size,
        }
        if self.error is not None:
            out["error"] = self.error
            out["error_kind"] = self.error_kind
        return out


@dataclass
class Report:
    decls: list

    @property
    def ok(self) -> bool:
        return all(d.ok for d in self.decls)

    def to_json(self) -> dict:
        return {"ok": self.ok, "decls": [d.to_json() for d in self.decls]}


def check_decl(sig: Signature, name: str, annot: Term, body: Term) -> DeclReport:
    start = time.perf_counter()
    try:
        if name in sig.consts:
            raise CheckError("duplicate-definition", f"duplicate definition of {name!r}")
        ctx = Ctx()
        ty_v = is_type(sig, ctx, annot)
        check(sig, ctx, body, ty_v)
        value = evaluate(body, (), sig.globals_values())
        nf = quote(0, ty_v, value)
        sig.add(name, ConstInfo(ty_v, value, annot, body))
        elapsed = (time.perf_counter() - start) * 1000.0
        return DeclReport(name, True, elapsed, term_size(nf))
    except CheckError as err:
        elapsed = (time.perf_counter() - start) * 1000.0
        return DeclReport(name, False, elapsed, 0, error=err.message, error_kind=err.kind)


def check_module(sig: Signature, decls, strict: bool = False) -> Report:
    """Check declarations in order, extending the signature as they pass.

    Failures are reported per declaration; later declarations that mention a
    failed name report a dependency failure instead of an unbound constant.
    """
    reports = []
    failed: set = set()
    for name, annot, body in decls:
        report = check_decl(sig, name, annot, body)
        if not report.ok and report.error_kind == "unbound-variable":
            for bad in failed:
                if f"{bad!r}" in (report.error or ""):
                    report = DeclReport(
                        name, False, report.elapsed_ms, 0,
                        error=f"dependency {bad!r} failed to check",
                        error_kind="dependency-failed",
                    )
                    break
        reports.append(report)
        if not report.ok:
            failed.add(name)
            if strict:
                break
    return Report(reports)


def normalize_const(sig: Signature, name: str) -> Term:
    """Eta-long beta-normal form of a checked global."""
    info = sig.consts.get(name)
    if info is None:
        raise CheckError("unbound-variable", f"unknown constant {name!r}")
    return quote(0, info.ty, info.value)


def infer_term(sig: Signature, ctx_types, t: Term) -> Term:
    """Public inference over a syntactic context: returns the quoted type."""
    ctx = Ctx()
    for ty_term in ctx_types:
        ctx = ctx.extend(is_type(sig, ctx, ty_term))
    return quote_type(ctx.depth, infer(sig, ctx, t))
