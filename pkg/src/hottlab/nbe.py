"""Normalization by evaluation.

Terms evaluate into a semantic value domain; readback produces beta-normal
terms that are eta-long at Pi types.  Conversion compares readbacks, so it
is type-directed where a type is available (the checker always has one) and
falls back to structural readback for raw, untyped terms.

Neutrals carry the type of their head where known, which lets readback
recover argument types while walking a spine.  Axioms (funext, ua, resize)
have no computation rule and block as neutrals.  The J eliminator computes
on reflexivity: ``J(C, d, a, a, refl a)`` evaluates to ``d``.

Values are immutable; environments are shared, never mutated.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Mapping, Optional

from .syntax import (
    App, AxFunext, AxResize, AxUa, CodeId, CodePi, CodeSigma, CodeUniv, Const,
    El, Fst, IdTy, J, Lam, Lift, MalformedTermError, Pair, Pi, Refl, Sigma,
    Snd, Term, Univ, Var, resize_axiom_type, ua_axiom_type,
)


class EvalError(Exception):
    """Internal invariant violation: evaluation of an ill-formed term."""


@dataclass(frozen=True)
class Value:
    __slots__ = ()


Env = tuple  # index 0 is the innermost binder
Globals = Mapping[str, "Value"]


@dataclass(frozen=True)
class Closure:
    env: Env
    term: Term
    globals: Globals

    def apply(self, v: Value) -> Value:
        return evaluate(self.term, (v,) + self.env, self.globals)


@dataclass(frozen=True)
class Closure3:
    """A term scoped under three binders (the motive of J)."""

    env: Env
    term: Term
    globals: Globals

    def apply(self, x: Value, y: Value, q: Value) -> Value:
        return evaluate(self.term, (q, y, x) + self.env, self.globals)


@dataclass(frozen=True)
class FunClosure:
    """Semantic closure built from a host function (used when decoding codes)."""

    fn: Callable[[Value], Value]

    def apply(self, v: Value) -> Value:
        return self.fn(v)


@dataclass(frozen=True)
class VLam(Value):
    closure: Closure


@dataclass(frozen=True)
class VPi(Value):
    dom: Value
    cod: Closure | FunClosure


@dataclass(frozen=True)
class VSigma(Value):
    fst: Value
    snd: Closure | FunClosure


@dataclass(frozen=True)
class VPair(Value):
    a: Value
    b: Value


@dataclass(frozen=True)
class VIdTy(Value):
    ty: Value
    lhs: Value
    rhs: Value


@dataclass(frozen=True)
class VRefl(Value):
    t: Value


@dataclass(frozen=True)
class VUniv(Value):
    level: int


@dataclass(frozen=True)
class VEl(Value):
    neutral: "VNeutral"


@dataclass(frozen=True)
class VCodePi(Value):
    dom: Value
    cod: Closure | FunClosure


@dataclass(frozen=True)
class VCodeSigma(Value):
    fst: Value
    snd: Closure | FunClosure


@dataclass(frozen=True)
class VCodeId(Value):
    code: Value
    lhs: Value
    rhs: Value


@dataclass(frozen=True)
class VCodeUniv(Value):
    level: int


@dataclass(frozen=True)
class VLift(Value):
    code: Value


# --- neutral heads and spine frames ---------------------------------------


@dataclass(frozen=True)
class HVar:
    level: int
    ty: Optional[Value]


@dataclass(frozen=True)
class HUa:
    level: int


@dataclass(frozen=True)
class HResize:
    level: int


@dataclass(frozen=True)
class HFunext:
    dom: Value
    cod: Closure | FunClosure
    f: Value
    g: Value
    htpy: Value


@dataclass(frozen=True)
class FApp:
    arg: Value


@dataclass(frozen=True)
class FFst:
    pass


@dataclass(frozen=True)
class FSnd:
    pass


@dataclass(frozen=True)
class FJ:
    motive: Closure3
    base: Value
    lhs: Value
    rhs: Value


@dataclass(frozen=True)
class VNeutral(Value):
    head: HVar | HUa | HResize | HFunext
    spine: tuple
    ty: Optional[Value]


def fresh(level: int, ty: Optional[Value] = None) -> VNeutral:
    return VNeutral(HVar(level, ty), (), ty)


_AXIOM_TYPE_CACHE: dict = {}


def ua_type_value(level: int) -> Value:
    key = ("ua", level)
    if key not in _AXIOM_TYPE_CACHE:
        _AXIOM_TYPE_CACHE[key] = evaluate(ua_axiom_type(level), (), {})
    return _AXIOM_TYPE_CACHE[key]


def resize_type_value(level: int) -> Value:
    key = ("resize", level)
    if key not in _AXIOM_TYPE_CACHE:
        _AXIOM_TYPE_CACHE[key] = evaluate(resize_axiom_type(level), (), {})
    return _AXIOM_TYPE_CACHE[key]


# --- evaluation ------------------------------------------------------------


def evaluate(t: Term, env: Env, globals: Globals) -> Value:
    match t:
        case Var(k):
            if k >= len(env):
                raise EvalError(f"ill-scoped variable {k} in environment of size {len(env)}")
            return env[k]
        case Lam(body):
            return VLam(Closure(env, body, globals))
        case Pi(dom, cod):
            return VPi(evaluate(dom, env, globals), Closure(env, cod, globals))
        case App(fn, arg):
            return vapp(evaluate(fn, env, globals), evaluate(arg, env, globals))
        case Sigma(fst, snd):
            return VSigma(evaluate(fst, env, globals), Closure(env, snd, globals))
        case Pair(a, b):
            return VPair(evaluate(a, env, globals), evaluate(b, env, globals))
        case Fst(p):
            return vfst(evaluate(p, env, globals))
        case Snd(p):
            return vsnd(evaluate(p, env, globals))
        case IdTy(ty, lhs, rhs):
            return VIdTy(
                evaluate(ty, env, globals),
                evaluate(lhs, env, globals),
                evaluate(rhs, env, globals),
            )
        case Refl(u):
            return VRefl(evaluate(u, env, globals))
        case J(motive, base, lhs, rhs, path):
            return vj(
                Closure3(env, motive, globals),
                evaluate(base, env, globals),
                evaluate(lhs, env, globals),
                evaluate(rhs, env, globals),
                evaluate(path, env, globals),
            )
        case Univ(n):
            return VUniv(n)
        case El(code):
            return vel(evaluate(code, env, globals))
        case CodePi(dom, cod):
            return VCodePi(evaluate(dom, env, globals), Closure(env, cod, globals))
        case CodeSigma(fst, snd):
            return VCodeSigma(evaluate(fst, env, globals), Closure(env, snd, globals))
        case CodeId(code, lhs, rhs):
            return VCodeId(
                evaluate(code, env, globals),
                evaluate(lhs, env, globals),
                evaluate(rhs, env, globals),
            )
        case CodeUniv(n):
            return VCodeUniv(n)
        case Lift(code):
            return VLift(evaluate(code, env, globals))
        case AxFunext(dom, cod, f, g, htpy):
            vdom = evaluate(dom, env, globals)
            vcod = Closure(env, cod, globals)
            vf = evaluate(f, env, globals)
            vg = evaluate(g, env, globals)
            vh = evaluate(htpy, env, globals)
            return VNeutral(HFunext(vdom, vcod, vf, vg, vh), (), VIdTy(VPi(vdom, vcod), vf, vg))
        case AxUa(n):
            return VNeutral(HUa(n), (), ua_type_value(n))
        case AxResize(n):
            return VNeutral(HResize(n), (), resize_type_value(n))
        case Const(name):
            if name not in globals:
                raise EvalError(f"unknown constant {name!r}")
            return globals[name]
    raise EvalError(f"cannot evaluate {t!r}")


def apply_closure(c, v: Value) -> Value:
    return c.apply(v)


def vapp(f: Value, a: Value) -> Value:
    match f:
        case VLam(clo):
            return clo.apply(a)
        case VNeutral(head, spine, ty):
            result_ty = ty.cod.apply(a) if isinstance(ty, VPi) else None
            return VNeutral(head, spine + (FApp(a),), result_ty)
    raise EvalError(f"application of non-function value {type(f).__name__}")


def vfst(p: Value) -> Value:
    match p:
        case VPair(a, _):
            return a
        case VNeutral(head, spine, ty):
            result_ty = ty.fst if isinstance(ty, VSigma) else None
            return VNeutral(head, spine + (FFst(),), result_ty)
    raise EvalError(f"first projection of non-pair value {type(p).__name__}")


def vsnd(p: Value) -> Value:
    match p:
        case VPair(_, b):
            return b
        case VNeutral(head, spine, ty):
            result_ty = None
            if isinstance(ty, VSigma):
                result_ty = ty.snd.apply(vfst(p))
            return VNeutral(head, spine + (FSnd(),), result_ty)
    raise EvalError(f"second projection of non-pair value {type(p).__name__}")


def vj(motive: Closure3, base: Value, lhs: Value, rhs: Value, path: Value) -> Value:
    match path:
        case VRefl(_):
            return base
        case VNeutral(head, spine, _):
            result_ty = motive.apply(lhs, rhs, path)
            return VNeutral(head, spine + (FJ(motive, base, lhs, rhs),), result_ty)
    raise EvalError(f"J applied to non-path value {type(path).__name__}")


def vel(code: Value) -> Value:
    """Decode a code value into the type it names."""
    match code:
        case VCodePi(dom, cod):
            return VPi(vel(dom), FunClosure(lambda v, c=cod: vel(c.apply(v))))
        case VCodeSigma(fst, snd):
            return VSigma(vel(fst), FunClosure(lambda v, c=snd: vel(c.apply(v))))
        case VCodeId(c, lhs, rhs):
            return VIdTy(vel(c), lhs, rhs)
        case VCodeUniv(n):
            return VUniv(n)
        case VLift(c):
            return vel(c)
        case VNeutral(_, _, _):
            return VEl(code)
    raise EvalError(f"El applied to non-code value {type(code).__name__}")


# --- readback --------------------------------------------------------------


def quote(depth: int, ty: Optional[Value], v: Value) -> Term:
    """Type-directed readback; eta-long at Pi, no eta at Sigma."""
    match ty:
        case VPi(dom, cod):
            x = fresh(depth, dom)
            return Lam(quote(depth + 1, cod.apply(x), vapp(v, x)))
        case VSigma(fst, snd):
            if isinstance(v, VPair):
                a = v.a
                return Pair(quote(depth, fst, a), quote(depth, snd.apply(a), v.b))
            return quote_neutral(depth, v)
        case VIdTy(t, _, _):
            if isinstance(v, VRefl):
                return Refl(quote(depth, t, v.t))
            return quote_neutral(depth, v)
        case VUniv(n):
            return quote_code(depth, n, v)
        case VEl(_):
            return quote_neutral(depth, v)
        case None:
            return quote_untyped(depth, v)
    # a stuck type cannot direct the readback any further
    return quote_untyped(depth, v)


def quote_code(depth: int, level: int, v: Value) -> Term:
    match v:
        case VCodePi(dom, cod):
            x = fresh(depth, vel(dom))
            return CodePi(quote_code(depth, level, dom), quote_code(depth + 1, level, cod.apply(x)))
        case VCodeSigma(fst, snd):
            x = fresh(depth, vel(fst))
            return CodeSigma(quote_code(depth, level, fst), quote_code(depth + 1, level, snd.apply(x)))
        case VCodeId(c, lhs, rhs):
            t = vel(c)
            return CodeId(quote_code(depth, level, c), quote(depth, t, lhs), quote(depth, t, rhs))
        case VCodeUniv(n):
            return CodeUniv(n)
        case VLift(c):
            return Lift(quote_code(depth, level - 1, c))
        case VNeutral(_, _, _):
            return quote_neutral(depth, v)
    raise EvalError(f"expected a code value, got {type(v).__name__}")


def quote_type(depth: int, v: Value) -> Term:
    match v:
        case VPi(dom, cod):
            x = fresh(depth, dom)
            return Pi(quote_type(depth, dom), quote_type(depth + 1, cod.apply(x)))
        case VSigma(fst, snd):
            x = fresh(depth, fst)
            return Sigma(quote_type(depth, fst), quote_type(depth + 1, snd.apply(x)))
        case VIdTy(t, lhs, rhs):
            return IdTy(quote_type(depth, t), quote(depth, t, lhs), quote(depth, t, rhs))
        case VUniv(n):
            return Univ(n)
        case VEl(neutral):
            return El(quote_neutral(depth, neutral))
    raise EvalError(f"expected a type value, got {type(v).__name__}")


def quote_neutral(depth: int, v: Value) -> Term:
    if not isinstance(v, VNeutral):
        raise EvalError(f"expected a neutral value, got {type(v).__name__}")
    head, spine = v.head, v.spine
    match head:
        case HVar(level, ty):
            if level >= depth:
                raise EvalError(f"variable level {level} escapes depth {depth}")
            term: Term = Var(depth - 1 - level)
            cur_ty = ty
        case HUa(n):
            term, cur_ty = AxUa(n), ua_type_value(n)
        case HResize(n):
            term, cur_ty = AxResize(n), resize_type_value(n)
        case HFunext(dom, cod, f, g, htpy):
            x = fresh(depth, dom)
            cod_term = quote_type(depth + 1, cod.apply(x))
            fn_ty = VPi(dom, cod)
            htpy_ty = VPi(dom, FunClosure(
                lambda u, c=cod, vf=f, vg=g: VIdTy(c.apply(u), vapp(vf, u), vapp(vg, u))))
            term = AxFunext(
                quote_type(depth, dom),
                cod_term,
                quote(depth, fn_ty, f),
                quote(depth, fn_ty, g),
                quote(depth, htpy_ty, htpy),
            )
            cur_ty = VIdTy(fn_ty, f, g)
    done: tuple = ()
    for frame in spine:
        match frame:
            case FApp(arg):
                if isinstance(cur_ty, VPi):
                    term = App(term, quote(depth, cur_ty.dom, arg))
                    cur_ty = cur_ty.cod.apply(arg)
                else:
                    term = App(term, quote_untyped(depth, arg))
                    cur_ty = None
            case FFst():
                term = Fst(term)
                cur_ty = cur_ty.fst if isinstance(cur_ty, VSigma) else None
            case FSnd():
                if isinstance(cur_ty, VSigma):
                    prev = VNeutral(head, done, None)
                    cur_ty = cur_ty.snd.apply(vfst(prev))
                else:
                    cur_ty = None
                term = Snd(term)
            case FJ(motive, base, lhs, rhs):
                if isinstance(cur_ty, VIdTy):
                    a_ty = cur_ty.ty
                    x = fresh(depth, a_ty)
                    y = fresh(depth + 1, a_ty)
                    q = fresh(depth + 2, VIdTy(a_ty, x, y))
                    motive_term = quote_type(depth + 3, motive.apply(x, y, q))
                    base_ty = motive.apply(lhs, lhs, VRefl(lhs))
                    term = J(
                        motive_term,
                        quote(depth, base_ty, base),
                        quote(depth, a_ty, lhs),
                        quote(depth, a_ty, rhs),
                        term,
                    )
                    path = VNeutral(head, done, cur_ty)
                    cur_ty = motive.apply(lhs, rhs, path)
                else:
                    x = fresh(depth)
                    y = fresh(depth + 1)
                    q = fresh(depth + 2)
                    term = J(
                        quote_untyped(depth + 3, motive.apply(x, y, q)),
                        quote_untyped(depth, base),
                        quote_untyped(depth, lhs),
                        quote_untyped(depth, rhs),
                        term,
                    )
                    cur_ty = None
        done = done + (frame,)
    return term


def quote_untyped(depth: int, v: Value) -> Term:
    """Structural readback: beta-normal, no eta expansion."""
    match v:
        case VLam(_):
            return Lam(quote_untyped(depth + 1, vapp(v, fresh(depth))))
        case VPair(a, b):
            return Pair(quote_untyped(depth, a), quote_untyped(depth, b))
        case VRefl(t):
            return Refl(quote_untyped(depth, t))
        case VPi(dom, cod):
            return Pi(quote_untyped(depth, dom), quote_untyped(depth + 1, cod.apply(fresh(depth))))
        case VSigma(fst, snd):
            return Sigma(quote_untyped(depth, fst), quote_untyped(depth + 1, snd.apply(fresh(depth))))
        case VIdTy(t, lhs, rhs):
            return IdTy(quote_untyped(depth, t), quote_untyped(depth, lhs), quote_untyped(depth, rhs))
        case VUniv(n):
            return Univ(n)
        case VEl(neutral):
            return El(quote_neutral(depth, neutral))
        case VCodePi(dom, cod):
            return CodePi(quote_untyped(depth, dom), quote_untyped(depth + 1, cod.apply(fresh(depth))))
        case VCodeSigma(fst, snd):
            return CodeSigma(quote_untyped(depth, fst), quote_untyped(depth + 1, snd.apply(fresh(depth))))
        case VCodeId(c, lhs, rhs):
            return CodeId(quote_untyped(depth, c), quote_untyped(depth, lhs), quote_untyped(depth, rhs))
        case VCodeUniv(n):
            return CodeUniv(n)
        case VLift(c):
            return Lift(quote_untyped(depth, c))
        case VNeutral(_, _, _):
            return quote_neutral(depth, v)
    raise EvalError(f"cannot quote {type(v).__name__}")


# --- conversion ------------------------------------------------------------


def readback(depth: int, v: Value, ty: Optional[Value] = None) -> Term:
    """Public readback; eta-long when a type is supplied."""
    if ty is None:
        return quote_untyped(depth, v)
    return quote(depth, ty, v)


def convertible(depth: int, a: Value, b: Value, ty: Optional[Value]) -> bool:
    """Definitional equality at a type: compare eta-long readbacks."""
    return quote(depth, ty, a) == quote(depth, ty, b)


def convertible_types(depth: int, a: Value, b: Value) -> bool:
    return quote_type(depth, a) == quote_type(depth, b)


def normalize(t: Term, globals: Globals | None = None, ty: Optional[Term] = None) -> Term:
    """Evaluate then read back a closed term."""
    g = globals or {}
    v = evaluate(t, (), g)
    if ty is None:
        return quote_untyped(0, v)
    ty_v = evaluate(ty, (), g)
    return quote(0, ty_v, v)
