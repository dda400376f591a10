"""Surface syntax front end: lexing, parsing, name resolution, printing.

The concrete grammar is keyword-prefixed to avoid precedence ambiguity:

    module  := decl*
    decl    := "def" IDENT ":" term ":=" term
    term    := "Pi" binder+ "->" term
             | "Sg" binder+ "." term
             | "\\" IDENT+ "." term
             | "Id" atom atom atom | "refl" atom
             | "J" atom atom atom atom atom
             | "U" NAT | "El" atom | "lift" atom
             | "funext" atom atom atom atom atom
             | "ua" NAT | "resize" NAT
             | "code-pi" atom atom | "code-sg" atom atom
             | "code-id" atom atom atom | "code-u" NAT
             | atom atom* | "(" term "," term ")"
    binder  := "(" IDENT+ ":" term ")"
    atom    := IDENT | "U" NAT | "(" term ")" | atom ".1" | atom ".2"

Binder-taking arguments are written as lambdas and unwrapped during
resolution: the motive of J is a three-argument lambda, the codomain
family of funext and the second argument of code-pi/code-sg are
one-argument lambdas.  Files use extension ``.hott``, encoding UTF-8.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .syntax import (
    App, AxFunext, AxResize, AxUa, CodeId, CodePi, CodeSigma, CodeUniv, Const,
    El, Fst, IdTy, J, Lam, Lift, Pair, Pi, Refl, Sigma, Snd, Term, Univ, Var,
)

KEYWORDS = {
    "def", "Pi", "Sg", "Id", "refl", "J", "El", "lift", "funext", "ua",
    "resize", "code-pi", "code-sg", "code-id", "code-u",
}


@dataclass(frozen=True)
class SourceSpan:
    file: str
    line: int
    col: int
    end_line: int
    end_col: int

    def __str__(self):
        return f"{self.file}:{self.line}:{self.col}"


class ParseError(Exception):
    def __init__(self, span: SourceSpan, message: str, expected: Optional[list] = None):
        detail = message if not expected else f"{message}; expected one of {', '.join(expected)}"
        super().__init__(f"{span}: {detail}")
        self.span = span
        self.message = message
        self.expected = expected or []


class ResolveError(Exception):
    def __init__(self, span: SourceSpan, message: str):
        super().__init__(f"{span}: {message}")
        self.span = span
        self.message = message


@dataclass(frozen=True)
class Token:
    kind: str  # IDENT NAT UNIV LPAREN RPAREN COLON DEFEQ ARROW DOT COMMA LAMBDA PROJ1 PROJ2 EOF + keywords
    text: str
    span: SourceSpan


def _ident_char(c: str) -> bool:
    return c.isalnum() or c in "_'"


def tokenize(source: str, filename: str = "<input>") -> list:
    tokens = []
    line, col, i = 1, 1, 0
    n = len(source)

    def span(l0, c0):
        return SourceSpan(filename, l0, c0, line, col)

    while i < n:
        c = source[i]
        if c == "\n":
            i += 1
            line += 1
            col = 1
            continue
        if c in " \t\r":
            i += 1
            col += 1
            continue
        if c == "-" and i + 1 < n and source[i + 1] == "-":
            while i < n and source[i] != "\n":
                i += 1
            continue
        l0, c0 = line, col
        if c == "(":
            i += 1; col += 1
            tokens.append(Token("LPAREN", "(", span(l0, c0)))
        elif c == ")":
            i += 1; col += 1
            tokens.append(Token("RPAREN", ")", span(l0, c0)))
        elif c == ",":
            i += 1; col += 1
            tokens.append(Token("COMMA", ",", span(l0, c0)))
        elif c == "\\":
            i += 1; col += 1
            tokens.append(Token("LAMBDA", "\\", span(l0, c0)))
        elif c == ":":
            if i + 1 < n and source[i + 1] == "=":
                i += 2; col += 2
                tokens.append(Token("DEFEQ", ":=", span(l0, c0)))
            else:
                i += 1; col += 1
                tokens.append(Token("COLON", ":", span(l0, c0)))
        elif c == "-" and i + 1 < n and source[i + 1] == ">":
            i += 2; col += 2
            tokens.append(Token("ARROW", "->", span(l0, c0)))
        elif c == ".":
            if i + 1 < n and source[i + 1] in "12" and (i + 2 >= n or not source[i + 2].isdigit()):
                kind = "PROJ1" if source[i + 1] == "1" else "PROJ2"
                i += 2; col += 2
                tokens.append(Token(kind, "." + source[i - 1], span(l0, c0)))
            else:
                i += 1; col += 1
                tokens.append(Token("DOT", ".", span(l0, c0)))
        elif c.isdigit():
            j = i
            while j < n and source[j].isdigit():
                j += 1
            text = source[i:j]
            col += j - i
            i = j
            tokens.append(Token("NAT", text, span(l0, c0)))
        elif c.isalpha() or c == "_":
            j = i
            while j < n:
                if _ident_char(source[j]):
                    j += 1
                elif source[j] == "-" and j + 1 < n and (source[j + 1].isalpha() or source[j + 1] == "_"):
                    j += 1
                else:
                    break
            text = source[i:j]
            col += j - i
            i = j
            if text[0] == "U" and len(text) > 1 and text[1:].isdigit():
                tokens.append(Token("UNIV", text, span(l0, c0)))
            elif text in KEYWORDS:
                tokens.append(Token(text, text, span(l0, c0)))
            else:
                tokens.append(Token("IDENT", text, span(l0, c0)))
        else:
            raise ParseError(span(l0, c0), f"unexpected character {c!r}")
    tokens.append(Token("EOF", "", SourceSpan(filename, line, col, line, col)))
    return tokens


# --- surface terms ----------------------------------------------------------


@dataclass(frozen=True)
class STerm:
    span: SourceSpan


@dataclass(frozen=True)
class SVar(STerm):
    name: str


@dataclass(frozen=True)
class SUniv(STerm):
    level: int


@dataclass(frozen=True)
class SPi(STerm):
    name: str
    ty: STerm
    body: STerm


@dataclass(frozen=True)
class SSigma(STerm):
    name: str
    ty: STerm
    body: STerm


@dataclass(frozen=True)
class SLam(STerm):
    name: str
    body: STerm


@dataclass(frozen=True)
class SApp(STerm):
    fn: STerm
    arg: STerm


@dataclass(frozen=True)
class SPair(STerm):
    a: STerm
    b: STerm


@dataclass(frozen=True)
class SProj(STerm):
    which: int
    arg: STerm


@dataclass(frozen=True)
class SId(STerm):
    ty: STerm
    lhs: STerm
    rhs: STerm


@dataclass(frozen=True)
class SRefl(STerm):
    arg: STerm


@dataclass(frozen=True)
class SJ(STerm):
    motive: STerm
    base: STerm
    lhs: STerm
    rhs: STerm
    path: STerm


@dataclass(frozen=True)
class SEl(STerm):
    arg: STerm


@dataclass(frozen=True)
class SLift(STerm):
    arg: STerm


@dataclass(frozen=True)
class SCodePi(STerm):
    dom: STerm
    fam: STerm


@dataclass(frozen=True)
class SCodeSigma(STerm):
    fst: STerm
    fam: STerm


@dataclass(frozen=True)
class SCodeId(STerm):
    code: STerm
    lhs: STerm
    rhs: STerm


@dataclass(frozen=True)
class SCodeUniv(STerm):
    level: int


@dataclass(frozen=True)
class SFunext(STerm):
    dom: STerm
    fam: STerm
    f: STerm
    g: STerm
    htpy: STerm


@dataclass(frozen=True)
class SUa(STerm):
    level: int


@dataclass(frozen=True)
class SResize(STerm):
    level: int


@dataclass(frozen=True)
class SurfaceDecl:
    name: str
    annotation: STerm
    body: STerm
    span: SourceSpan


class _Parser:
    def __init__(self, tokens):
        self.tokens = tokens
        self.pos = 0

    def peek(self) -> Token:
        return self.tokens[self.pos]

    def next(self) -> Token:
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect(self, kind: str) -> Token:
        tok = self.peek()
        if tok.kind != kind:
            raise ParseError(tok.span, f"unexpected {tok.text or 'end of input'!r}", expected=[kind])
        return self.next()

    def expect_nat(self) -> int:
        return int(self.expect("NAT").text)

    def parse_module(self) -> list:
        decls = []
        while self.peek().kind != "EOF":
            decls.append(self.parse_decl())
        return decls

    def parse_decl(self) -> SurfaceDecl:
        start = self.expect("def")
        name = self.expect("IDENT")
        self.expect("COLON")
        annot = self.parse_term()
        self.expect("DEFEQ")
        body = self.parse_term()
        return SurfaceDecl(name.text, annot, body, start.span)

    def parse_binders(self) -> list:
        binders = []
        while self.peek().kind == "LPAREN":
            save = self.pos
            self.next()
            names = []
            while self.peek().kind == "IDENT":
                names.append(self.next())
            if not names or self.peek().kind != "COLON":
                self.pos = save  # not a binder: a parenthesized term follows
                break
            self.next()
            ty = self.parse_term()
            self.expect("RPAREN")
            binders.extend((n, ty) for n in names)
        return binders

    def parse_term(self) -> STerm:
        tok = self.peek()
        match tok.kind:
            case "Pi":
                self.next()
                binders = self.parse_binders()
                if not binders:
                    raise ParseError(self.peek().span, "Pi needs at least one binder", ["("])
                self.expect("ARROW")
                body = self.parse_term()
                for name, ty in reversed(binders):
                    body = SPi(tok.span, name.text, ty, body)
                return body
            case "Sg":
                self.next()
                binders = self.parse_binders()
                if not binders:
                    raise ParseError(self.peek().span, "Sg needs at least one binder", ["("])
                self.expect("DOT")
                body = self.parse_term()
                for name, ty in reversed(binders):
                    body = SSigma(tok.span, name.text, ty, body)
                return body
            case "LAMBDA":
                self.next()
                names = []
                while self.peek().kind == "IDENT":
                    names.append(self.next())
                if not names:
                    raise ParseError(self.peek().span, "lambda needs at least one name", ["IDENT"])
                self.expect("DOT")
                body = self.parse_term()
                for name in reversed(names):
                    body = SLam(tok.span, name.text, body)
                return body
            case "Id":
                self.next()
                return SId(tok.span, self.parse_atom(), self.parse_atom(), self.parse_atom())
            case "refl":
                self.next()
                return SRefl(tok.span, self.parse_atom())
            case "J":
                self.next()
                args = [self.parse_atom() for _ in range(5)]
                return SJ(tok.span, *args)
            case "El":
                self.next()
                return SEl(tok.span, self.parse_atom())
            case "lift":
                self.next()
                return SLift(tok.span, self.parse_atom())
            case "funext":
                self.next()
                args = [self.parse_atom() for _ in range(5)]
                return SFunext(tok.span, *args)
            case "ua" | "resize":
                self.next()
                level = self.expect_nat()
                head: STerm = (SUa if tok.kind == "ua" else SResize)(tok.span, level)
                while self.peek().kind in ("IDENT", "UNIV", "LPAREN"):
                    head = SApp(head.span, head, self.parse_atom())
                return head
            case "code-pi":
                self.next()
                return SCodePi(tok.span, self.parse_atom(), self.parse_atom())
            case "code-sg":
                self.next()
                return SCodeSigma(tok.span, self.parse_atom(), self.parse_atom())
            case "code-id":
                self.next()
                return SCodeId(tok.span, self.parse_atom(), self.parse_atom(), self.parse_atom())
            case "code-u":
                self.next()
                return SCodeUniv(tok.span, self.expect_nat())
        # application spine
        head = self.parse_atom()
        while self.peek().kind in ("IDENT", "UNIV", "LPAREN"):
            arg = self.parse_atom()
            head = SApp(head.span, head, arg)
        return head

    def parse_atom(self) -> STerm:
        tok = self.peek()
        if tok.kind == "IDENT":
            self.next()
            out: STerm = SVar(tok.span, tok.text)
        elif tok.kind == "UNIV":
            self.next()
            out = SUniv(tok.span, int(tok.text[1:]))
        elif tok.kind == "LPAREN":
            self.next()
            inner = self.parse_term()
            if self.peek().kind == "COMMA":
                self.next()
                second = self.parse_term()
                self.expect("RPAREN")
                out = SPair(tok.span, inner, second)
            else:
                self.expect("RPAREN")
                out = inner
        else:
            raise ParseError(tok.span, f"unexpected {tok.text or 'end of input'!r}",
                             expected=["IDENT", "U<level>", "("])
        while self.peek().kind in ("PROJ1", "PROJ2"):
            proj = self.next()
            out = SProj(proj.span, 1 if proj.kind == "PROJ1" else 2, out)
        return out


def parse_module(source: str, filename: str = "<input>") -> list:
    """Parse a module into surface declarations."""
    return _Parser(tokenize(source, filename)).parse_module()


def parse_term(source: str, filename: str = "<input>") -> STerm:
    parser = _Parser(tokenize(source, filename))
    term = parser.parse_term()
    parser.expect("EOF")
    return term


# --- name resolution --------------------------------------------------------


def _unwrap_lambdas(s: STerm, count: int, what: str) -> tuple:
    names = []
    for _ in range(count):
        if not isinstance(s, SLam):
            raise ResolveError(s.span, f"{what} must be written as a {count}-argument lambda")
        names.append(s.name)
        s = s.body
    return names, s


def resolve_term(s: STerm, scope: list, globals: set) -> Term:
    """Turn a surface term into a nameless core term.

    ``scope`` lists binder names, innermost first; ``globals`` holds the
    names of previously resolved top-level definitions.
    """
    match s:
        case SVar(span, name):
            if name in scope:
                return Var(scope.index(name))
            if name in globals:
                return Const(name)
            raise ResolveError(span, f"unbound identifier {name!r}")
        case SUniv(_, level):
            return Univ(level)
        case SPi(_, name, ty, body):
            return Pi(resolve_term(ty, scope, globals), resolve_term(body, [name] + scope, globals))
        case SSigma(_, name, ty, body):
            return Sigma(resolve_term(ty, scope, globals), resolve_term(body, [name] + scope, globals))
        case SLam(_, name, body):
            return Lam(resolve_term(body, [name] + scope, globals))
        case SApp(_, fn, arg):
            return App(resolve_term(fn, scope, globals), resolve_term(arg, scope, globals))
        case SPair(_, a, b):
            return Pair(resolve_term(a, scope, globals), resolve_term(b, scope, globals))
        case SProj(_, which, arg):
            inner = resolve_term(arg, scope, globals)
            return Fst(inner) if which == 1 else Snd(inner)
        case SId(_, ty, lhs, rhs):
            return IdTy(
                resolve_term(ty, scope, globals),
                resolve_term(lhs, scope, globals),
                resolve_term(rhs, scope, globals),
            )
        case SRefl(_, arg):
            return Refl(resolve_term(arg, scope, globals))
        case SJ(_, motive, base, lhs, rhs, path):
            names, motive_body = _unwrap_lambdas(motive, 3, "the motive of J")
            return J(
                resolve_term(motive_body, list(reversed(names)) + scope, globals),
                resolve_term(base, scope, globals),
                resolve_term(lhs, scope, globals),
                resolve_term(rhs, scope, globals),
                resolve_term(path, scope, globals),
            )
        case SEl(_, arg):
            return El(resolve_term(arg, scope, globals))
        case SLift(_, arg):
            return Lift(resolve_term(arg, scope, globals))
        case SCodePi(_, dom, fam):
            names, fam_body = _unwrap_lambdas(fam, 1, "the family of code-pi")
            return CodePi(
                resolve_term(dom, scope, globals),
                resolve_term(fam_body, [names[0]] + scope, globals),
            )
        case SCodeSigma(_, fst, fam):
            names, fam_body = _unwrap_lambdas(fam, 1, "the family of code-sg")
            return CodeSigma(
                resolve_term(fst, scope, globals),
                resolve_term(fam_body, [names[0]] + scope, globals),
            )
        case SCodeId(_, code, lhs, rhs):
            return CodeId(
                resolve_term(code, scope, globals),
                resolve_term(lhs, scope, globals),
                resolve_term(rhs, scope, globals),
            )
        case SCodeUniv(_, level):
            return CodeUniv(level)
        case SFunext(_, dom, fam, f, g, htpy):
            names, fam_body = _unwrap_lambdas(fam, 1, "the codomain family of funext")
            return AxFunext(
                resolve_term(dom, scope, globals),
                resolve_term(fam_body, [names[0]] + scope, globals),
                resolve_term(f, scope, globals),
                resolve_term(g, scope, globals),
                resolve_term(htpy, scope, globals),
            )
        case SUa(_, level):
            return AxUa(level)
        case SResize(_, level):
            return AxResize(level)
    raise ResolveError(s.span, f"cannot resolve {type(s).__name__}")


def resolve_names(decls, known_globals: Optional[set] = None) -> list:
    """Resolve a parsed module to (name, annotation, body) core triples."""
    globals_seen = set(known_globals or ())
    out = []
    for decl in decls:
        if decl.name in globals_seen:
            raise ResolveError(decl.span, f"duplicate definition of {decl.name!r}")
        annot = resolve_term(decl.annotation, [], globals_seen)
        body = resolve_term(decl.body, [], globals_seen)
        globals_seen.add(decl.name)
        out.append((decl.name, annot, body))
    return out


# --- printing ----------------------------------------------------------------


def _name(depth: int) -> str:
    return f"x{depth}"


def print_term(t: Term, depth: int = 0) -> str:
    """Render a core term in the concrete grammar; parses back alpha-equal."""
    match t:
        case Var(k):
            return _name(depth - 1 - k)
        case Const(name):
            return name
        case Univ(n):
            return f"U{n}"
        case Pi(dom, cod):
            return f"Pi ({_name(depth)} : {print_term(dom, depth)}) -> {print_term(cod, depth + 1)}"
        case Sigma(fst, snd):
            return f"Sg ({_name(depth)} : {print_term(fst, depth)}) . {print_term(snd, depth + 1)}"
        case Lam(body):
            return f"\\{_name(depth)}. {print_term(body, depth + 1)}"
        case App(fn, arg):
            fn_s = print_term(fn, depth) if isinstance(fn, (App, Var, Const)) else _atom(fn, depth)
            return f"{fn_s} {_atom(arg, depth)}"
        case Pair(a, b):
            return f"({print_term(a, depth)} , {print_term(b, depth)})"
        case Fst(p):
            return f"{_atom(p, depth)}.1"
        case Snd(p):
            return f"{_atom(p, depth)}.2"
        case IdTy(ty, lhs, rhs):
            return f"Id {_atom(ty, depth)} {_atom(lhs, depth)} {_atom(rhs, depth)}"
        case Refl(u):
            return f"refl {_atom(u, depth)}"
        case J(motive, base, lhs, rhs, path):
            m = (f"(\\{_name(depth)} {_name(depth + 1)} {_name(depth + 2)}. "
                 f"{print_term(motive, depth + 3)})")
            return (f"J {m} {_atom(base, depth)} {_atom(lhs, depth)} "
                    f"{_atom(rhs, depth)} {_atom(path, depth)}")
        case El(code):
            return f"El {_atom(code, depth)}"
        case Lift(code):
            return f"lift {_atom(code, depth)}"
        case CodePi(dom, cod):
            return f"code-pi {_atom(dom, depth)} (\\{_name(depth)}. {print_term(cod, depth + 1)})"
        case CodeSigma(fst, snd):
            return f"code-sg {_atom(fst, depth)} (\\{_name(depth)}. {print_term(snd, depth + 1)})"
        case CodeId(code, lhs, rhs):
            return f"code-id {_atom(code, depth)} {_atom(lhs, depth)} {_atom(rhs, depth)}"
        case CodeUniv(n):
            return f"code-u {n}"
        case AxFunext(dom, cod, f, g, htpy):
            fam = f"(\\{_name(depth)}. {print_term(cod, depth + 1)})"
            return (f"funext {_atom(dom, depth)} {fam} {_atom(f, depth)} "
                    f"{_atom(g, depth)} {_atom(htpy, depth)}")
        case AxUa(n):
            return f"ua {n}"
        case AxResize(n):
            return f"resize {n}"
    raise ValueError(f"cannot print {t!r}")


def _atom(t: Term, depth: int) -> str:
    if isinstance(t, (Var, Const, Univ)):
        return print_term(t, depth)
    if isinstance(t, (Fst, Snd)):
        return print_term(t, depth)
    return f"({print_term(t, depth)})"


def parse_program(source: str, filename: str = "<input>", known_globals=None) -> list:
    """Parse and resolve in one step."""
    return resolve_names(parse_module(source, filename), known_globals)
