"""Finite groupoids with dense composition tables.

Objects are integers ``0..n-1`` and morphisms are integers with source,
target, and inverse tables; composition is a total table on composable
pairs.  Optional labels (arbitrary hashable data) ride along on objects and
morphisms so that derived structures (pullbacks, section groupoids) stay
identifiable; labels never influence the algebra.

Validation is exhaustive: associativity on all composable triples, identity
and inverse laws.  Input-level structures obey the configured size caps;
derived constructions are allowed to grow up to a hard ceiling, past which
a resource error is raised instead of grinding on.

All structures are immutable after validation and safe to share.
"""

from __future__ import annotations

import itertools
import os
from dataclasses import dataclass, field
from typing import Optional


class GroupoidError(Exception):
    pass


class ResourceCapError(Exception):
    """A structure exceeded the configured size caps."""


@dataclass(frozen=True)
class Limits:
    max_objects: int = 8
    max_morphisms: int = 48
    derived_objects: int = 4096
    derived_morphisms: int = 65536

    @staticmethod
    def from_env() -> "Limits":
        cap = os.environ.get("HOTT_MAX_OBJECTS")
        if cap is None:
            return Limits()
        n = int(cap)
        return Limits(max_objects=n, max_morphisms=n * n + n, derived_objects=max(4096, n * 64))


DEFAULT_LIMITS = Limits.from_env()


class FinGroupoid:
    """A finite groupoid as composition tables.

    ``compose(g, f)`` means "g after f" and is defined when dst(f) == src(g).
    """

    def __init__(self, n_objects, src, dst, identity, comp, object_labels=None,
                 morphism_labels=None, check=True, derived=False,
                 limits: Limits = None):
        self.n_objects = n_objects
        self.src = tuple(src)
        self.dst = tuple(dst)
        self.identity = tuple(identity)
        self.comp = dict(comp)
        self.object_labels = tuple(object_labels) if object_labels is not None else None
        self.morphism_labels = tuple(morphism_labels) if morphism_labels is not None else None
        limits = limits or DEFAULT_LIMITS
        cap_obj = limits.derived_objects if derived else limits.max_objects
        cap_mor = limits.derived_morphisms if derived else limits.max_morphisms
        if n_objects > cap_obj or self.n_morphisms > cap_mor:
            raise ResourceCapError(
                f"groupoid size {n_objects} objects / {self.n_morphisms} morphisms "
                f"exceeds cap {cap_obj}/{cap_mor}"
            )
        self._hom = {}
        for m in range(self.n_morphisms):
            self._hom.setdefault((self.src[m], self.dst[m]), []).append(m)
        self.inverse = self._find_inverses() if check else None
        if check:
            self.validate()
        self._label_to_obj = None
        self._label_to_mor = None

    @property
    def n_morphisms(self) -> int:
        return len(self.src)

    def objects(self):
        return range(self.n_objects)

    def morphisms(self):
        return range(self.n_morphisms)

    def hom(self, x: int, y: int) -> tuple:
        return tuple(self._hom.get((x, y), ()))

    def compose(self, g: int, f: int) -> int:
        return self.comp[(g, f)]

    def inv(self, m: int) -> int:
        return self.inverse[m]

    def obj_by_label(self, label):
        if self._label_to_obj is None:
            self._label_to_obj = {lab: i for i, lab in enumerate(self.object_labels or ())}
        return self._label_to_obj[label]

    def mor_by_label(self, label):
        if self._label_to_mor is None:
            self._label_to_mor = {lab: i for i, lab in enumerate(self.morphism_labels or ())}
        return self._label_to_mor[label]

    def _find_inverses(self):
        inv = [None] * self.n_morphisms
        for m in range(self.n_morphisms):
            x, y = self.src[m], self.dst[m]
            for n in self.hom(y, x):
                if self.comp.get((n, m)) == self.identity[x] and self.comp.get((m, n)) == self.identity[y]:
                    inv[m] = n
                    break
            if inv[m] is None:
                raise GroupoidError(f"morphism {m} has no inverse")
        return tuple(inv)

    def validate(self) -> None:
        n, m = self.n_objects, self.n_morphisms
        if len(self.dst) != m or len(self.identity) != n:
            raise GroupoidError("table sizes disagree")
        for x in range(n):
            i = self.identity[x]
            if not (0 <= i < m and self.src[i] == x and self.dst[i] == x):
                raise GroupoidError(f"bad identity on object {x}")
        for (g, f), h in self.comp.items():
            if self.dst[f] != self.src[g]:
                raise GroupoidError(f"composition table entry for non-composable pair ({g},{f})")
            if not (self.src[h] == self.src[f] and self.dst[h] == self.dst[g]):
                raise GroupoidError(f"composite ({g},{f}) has wrong endpoints")
        for f in range(m):
            for g in range(m):
                if self.dst[f] == self.src[g] and (g, f) not in self.comp:
                    raise GroupoidError(f"composition table misses composable pair ({g},{f})")
            if self.comp[(f, self.identity[self.src[f]])] != f:
                raise GroupoidError(f"right identity law fails at {f}")
            if self.comp[(self.identity[self.dst[f]], f)] != f:
                raise GroupoidError(f"left identity law fails at {f}")
        out_of = {}
        for g in range(m):
            out_of.setdefault(self.src[g], []).append(g)
        for (g, f), gf in self.comp.items():
            for h in out_of.get(self.dst[g], ()):
                if self.comp[(h, gf)] != self.comp[(self.comp[(h, g)], f)]:
                    raise GroupoidError(f"associativity fails at ({h},{g},{f})")

    def is_discrete(self) -> bool:
        return self.n_morphisms == self.n_objects

    def connected_components(self):
        parent = list(range(self.n_objects))

        def find(x):
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        for m in range(self.n_morphisms):
            a, b = find(self.src[m]), find(self.dst[m])
            if a != b:
                parent[a] = b
        groups = {}
        for x in range(self.n_objects):
            groups.setdefault(find(x), []).append(x)
        return list(groups.values())

    def __repr__(self):
        return f"FinGroupoid({self.n_objects} objects, {self.n_morphisms} morphisms)"


def build_groupoid(objects, morphisms, compose_fn, identity_fn, derived=True,
                   limits=None) -> FinGroupoid:
    """Assemble a groupoid from labelled data.

    ``objects``: iterable of labels; ``morphisms``: iterable of
    (label, src_label, dst_label); ``compose_fn(g_label, f_label)`` returns
    the composite's label; ``identity_fn(obj_label)`` the identity's label.
    """
    objs = list(objects)
    obj_idx = {lab: i for i, lab in enumerate(objs)}
    if len(obj_idx) != len(objs):
        raise GroupoidError("duplicate object labels")
    mors = list(morphisms)
    mor_idx = {lab: i for i, (lab, _, _) in enumerate(mors)}
    if len(mor_idx) != len(mors):
        raise GroupoidError("duplicate morphism labels")
    src = [obj_idx[s] for (_, s, _) in mors]
    dst = [obj_idx[d] for (_, _, d) in mors]
    identity = [mor_idx[identity_fn(lab)] for lab in objs]
    by_src = {}
    for gi, (glab, gs, _) in enumerate(mors):
        by_src.setdefault(gs, []).append((gi, glab))
    comp = {}
    for fi, (flab, _, fd) in enumerate(mors):
        for gi, glab in by_src.get(fd, ()):
            comp[(gi, fi)] = mor_idx[compose_fn(glab, flab)]
    return FinGroupoid(
        len(objs), src, dst, identity, comp,
        object_labels=objs, morphism_labels=[lab for (lab, _, _) in mors],
        derived=derived, limits=limits,
    )


# --- standard builders -------------------------------------------------------


def discrete(n: int, limits=None) -> FinGroupoid:
    return FinGroupoid(
        n, list(range(n)), list(range(n)), list(range(n)),
        {(i, i): i for i in range(n)},
        object_labels=[("obj", i) for i in range(n)],
        morphism_labels=[("id", i) for i in range(n)],
        limits=limits,
    )


def terminal() -> FinGroupoid:
    return discrete(1)


def cyclic_group(n: int, limits=None) -> FinGroupoid:
    """One object with Z/n as automorphisms."""
    return FinGroupoid(
        1, [0] * n, [0] * n, [0],
        {(g, f): (g + f) % n for g in range(n) for f in range(n)},
        object_labels=[("obj", 0)],
        morphism_labels=[("rot", k) for k in range(n)],
        limits=limits,
    )


def codiscrete(n: int, limits=None) -> FinGroupoid:
    """Exactly one morphism between any two objects."""
    mors = [(x, y) for x in range(n) for y in range(n)]
    idx = {m: i for i, m in enumerate(mors)}
    return FinGroupoid(
        n, [x for x, _ in mors], [y for _, y in mors],
        [idx[(x, x)] for x in range(n)],
        {(idx[(y, z)], idx[(x, y2)]): idx[(x, z)]
         for (x, y2) in mors for (y, z) in mors if y2 == y},
        object_labels=[("obj", i) for i in range(n)],
        morphism_labels=[("arrow", x, y) for (x, y) in mors],
        limits=limits,
    )


def product(a: FinGroupoid, b: FinGroupoid, derived=True, limits=None) -> FinGroupoid:
    objs = [(x, y) for x in a.objects() for y in b.objects()]
    mors = [((f, g), (a.src[f], b.src[g]), (a.dst[f], b.dst[g]))
            for f in a.morphisms() for g in b.morphisms()]
    return build_groupoid(
        objs, mors,
        lambda gl, fl: (a.compose(gl[0], fl[0]), b.compose(gl[1], fl[1])),
        lambda ol: (a.identity[ol[0]], b.identity[ol[1]]),
        derived=derived, limits=limits,
    )


# --- functors ----------------------------------------------------------------


class GFunctor:
    def __init__(self, dom: FinGroupoid, cod: FinGroupoid, obj_map, mor_map, check=True):
        self.dom = dom
        self.cod = cod
        self.obj_map = tuple(obj_map)
        self.mor_map = tuple(mor_map)
        if check:
            self.validate()

    def validate(self) -> None:
        if len(self.obj_map) != self.dom.n_objects or len(self.mor_map) != self.dom.n_morphisms:
            raise GroupoidError("functor maps have wrong lengths")
        for m in self.dom.morphisms():
            if self.cod.src[self.mor_map[m]] != self.obj_map[self.dom.src[m]]:
                raise GroupoidError(f"functor breaks sources at {m}")
            if self.cod.dst[self.mor_map[m]] != self.obj_map[self.dom.dst[m]]:
                raise GroupoidError(f"functor breaks targets at {m}")
        for x in self.dom.objects():
            if self.mor_map[self.dom.identity[x]] != self.cod.identity[self.obj_map[x]]:
                raise GroupoidError(f"functor breaks identity at {x}")
        for (g, f), h in self.dom.comp.items():
            if self.cod.compose(self.mor_map[g], self.mor_map[f]) != self.mor_map[h]:
                raise GroupoidError(f"functor breaks composition at ({g},{f})")

    def __call__(self, obj: int) -> int:
        return self.obj_map[obj]

    def on_mor(self, m: int) -> int:
        return self.mor_map[m]

    def then(self, other: "GFunctor") -> "GFunctor":
        """self followed by other."""
        if other.dom is not self.cod and (other.dom.n_objects != self.cod.n_objects
                                          or other.dom.n_morphisms != self.cod.n_morphisms):
            raise GroupoidError("functor composition endpoint mismatch")
        return GFunctor(
            self.dom, other.cod,
            [other.obj_map[x] for x in self.obj_map],
            [other.mor_map[m] for m in self.mor_map],
            check=False,
        )

    def same_maps(self, other: "GFunctor") -> bool:
        return self.obj_map == other.obj_map and self.mor_map == other.mor_map

    def is_injective_on_objects(self) -> bool:
        return len(set(self.obj_map)) == len(self.obj_map)

    def is_faithful(self) -> bool:
        for x in self.dom.objects():
            for y in self.dom.objects():
                seen = {}
                for m in self.dom.hom(x, y):
                    im = self.mor_map[m]
                    if im in seen:
                        return False
                    seen[im] = m
        return True

    def is_full(self) -> bool:
        for x in self.dom.objects():
            for y in self.dom.objects():
                images = {self.mor_map[m] for m in self.dom.hom(x, y)}
                needed = set(self.cod.hom(self.obj_map[x], self.obj_map[y]))
                if not needed <= images:
                    return False
        return True

    def is_essentially_surjective(self) -> bool:
        hit = set()
        for x in self.dom.objects():
            fx = self.obj_map[x]
            for y in self.cod.objects():
                if self.cod.hom(fx, y):
                    hit.add(y)
        return hit == set(self.cod.objects())

    def __repr__(self):
        return f"GFunctor({self.dom!r} -> {self.cod!r})"


def identity_functor(g: FinGroupoid) -> GFunctor:
    return GFunctor(g, g, list(g.objects()), list(g.morphisms()), check=False)


def functor_from_labels(dom: FinGroupoid, cod: FinGroupoid, obj_fn, mor_fn) -> GFunctor:
    """Build a functor by mapping labels; validates the result."""
    obj_map = [cod.obj_by_label(obj_fn(lab)) for lab in dom.object_labels]
    mor_map = [cod.mor_by_label(mor_fn(lab)) for lab in dom.morphism_labels]
    return GFunctor(dom, cod, obj_map, mor_map)


def all_functors(dom: FinGroupoid, cod: FinGroupoid, limit: Optional[int] = None):
    """Enumerate every functor dom -> cod in deterministic order.

    Backtracking over object images and then non-identity morphism images,
    with inverses forced and composition checked incrementally.
    """
    if dom.n_objects == 0:
        yield GFunctor(dom, cod, [], [], check=False)
        return
    mors = [m for m in dom.morphisms() if m not in set(dom.identity)]
    count = 0
    for obj_map in itertools.product(range(cod.n_objects), repeat=dom.n_objects):
        mor_map = [None] * dom.n_morphisms
        for x in dom.objects():
            mor_map[dom.identity[x]] = cod.identity[obj_map[x]]

        def assign(i):
            nonlocal count
            if i == len(mors):
                yield GFunctor(dom, cod, list(obj_map), list(mor_map))
                return
            m = mors[i]
            if mor_map[m] is not None:
                yield from assign(i + 1)
                return
            for cand in cod.hom(obj_map[dom.src[m]], obj_map[dom.dst[m]]):
                mor_map[m] = cand
                inv_m = dom.inv(m)
                saved_inv = mor_map[inv_m]
                mor_map[inv_m] = cod.inv(cand)
                ok = True
                for (g, f), h in dom.comp.items():
                    mg, mf, mh = mor_map[g], mor_map[f], mor_map[h]
                    if mg is not None and mf is not None and mh is not None:
                        if cod.compose(mg, mf) != mh:
                            ok = False
                            break
                if ok:
                    yield from assign(i + 1)
                mor_map[m] = None
                mor_map[inv_m] = saved_inv

        for fn in assign(0):
            yield fn
            count += 1
            if limit is not None and count >= limit:
                return


# --- natural isomorphisms ----------------------------------------------------


class NatIso:
    def __init__(self, source: GFunctor, target: GFunctor, components, check=True):
        self.source = source
        self.target = target
        self.components = tuple(components)
        if check:
            self.validate()

    def validate(self) -> None:
        f, g = self.source, self.target
        cod = f.cod
        if g.cod is not cod and (g.cod.n_objects, g.cod.n_morphisms) != (cod.n_objects, cod.n_morphisms):
            raise GroupoidError("natural iso endpoints disagree")
        if len(self.components) != f.dom.n_objects:
            raise GroupoidError("wrong number of components")
        for x in f.dom.objects():
            c = self.components[x]
            if cod.src[c] != f.obj_map[x] or cod.dst[c] != g.obj_map[x]:
                raise GroupoidError(f"component at {x} has wrong endpoints")
        for m in f.dom.morphisms():
            x, y = f.dom.src[m], f.dom.dst[m]
            left = cod.compose(self.components[y], f.mor_map[m])
            right = cod.compose(g.mor_map[m], self.components[x])
            if left != right:
                raise GroupoidError(f"naturality square fails at morphism {m}")

    def inverse(self) -> "NatIso":
        cod = self.source.cod
        return NatIso(self.target, self.source,
                      [cod.inv(c) for c in self.components], check=False)

    def then(self, other: "NatIso") -> "NatIso":
        cod = self.source.cod
        return NatIso(self.source, other.target,
                      [cod.compose(other.components[x], self.components[x])
                       for x in range(len(self.components))], check=False)


def homotopies_between(f: GFunctor, g: GFunctor):
    """All natural isomorphisms f => g, in lexicographic component order."""
    if f.dom.n_objects != g.dom.n_objects or f.cod is not g.cod and \
            (f.cod.n_objects, f.cod.n_morphisms) != (g.cod.n_objects, g.cod.n_morphisms):
        raise GroupoidError("homotopiesBetween endpoint mismatch")
    cod = f.cod
    choices = []
    for x in f.dom.objects():
        cands = cod.hom(f.obj_map[x], g.obj_map[x])
        if not cands:
            return []
        choices.append(cands)
    out = []
    for combo in itertools.product(*choices):
        ok = True
        for m in f.dom.morphisms():
            x, y = f.dom.src[m], f.dom.dst[m]
            if cod.compose(combo[y], f.mor_map[m]) != cod.compose(g.mor_map[m], combo[x]):
                ok = False
                break
        if ok:
            out.append(NatIso(f, g, combo, check=False))
    return out


# --- isofibrations -----------------------------------------------------------


class FibrationMap:
    """A functor with a chosen lift for every (object, iso out of its image)."""

    def __init__(self, functor: GFunctor, lifts, check=True):
        self.functor = functor
        self.lifts = dict(lifts)
        if check:
            self.validate()

    @property
    def total(self) -> FinGroupoid:
        return self.functor.dom

    @property
    def base(self) -> FinGroupoid:
        return self.functor.cod

    def lift(self, e: int, beta: int) -> int:
        return self.lifts[(e, beta)]

    def validate(self) -> None:
        total, base, fn = self.total, self.base, self.functor
        for e in total.objects():
            pe = fn.obj_map[e]
            for beta in base.morphisms():
                if base.src[beta] != pe:
                    continue
                m = self.lifts.get((e, beta))
                if m is None:
                    raise GroupoidError(f"missing lift at object {e}, base morphism {beta}")
                if total.src[m] != e or fn.mor_map[m] != beta:
                    raise GroupoidError(f"bad lift at object {e}, base morphism {beta}")

    @staticmethod
    def from_functor(functor: GFunctor) -> "FibrationMap | None":
        """Choose lifts by search; None when the functor is not an isofibration."""
        total, base = functor.dom, functor.cod
        lifts = {}
        out_by_image = {}
        for m in total.morphisms():
            out_by_image.setdefault((total.src[m], functor.mor_map[m]), m)
        for e in total.objects():
            pe = functor.obj_map[e]
            for beta in base.morphisms():
                if base.src[beta] != pe:
                    continue
                m = out_by_image.get((e, beta))
                if m is None:
                    return None
                lifts[(e, beta)] = m
        return FibrationMap(functor, lifts, check=False)

    def then(self, outer: "FibrationMap") -> "FibrationMap":
        """Composite fibration: self (upper) followed by outer (lower)."""
        fn = self.functor.then(outer.functor)
        lifts = {}
        for e in self.total.objects():
            pe = fn.obj_map[e]
            for gamma in outer.base.morphisms():
                if outer.base.src[gamma] != pe:
                    continue
                mid = outer.lift(self.functor.obj_map[e], gamma)
                lifts[(e, gamma)] = self.lift(e, mid)
        return FibrationMap(fn, lifts, check=False)

    def __repr__(self):
        return f"FibrationMap({self.total!r} -> {self.base!r})"


class TribeSquare:
    """A commuting square of functors; optionally flagged as a pullback."""

    def __init__(self, top: GFunctor, left: GFunctor, right: GFunctor,
                 bottom: GFunctor, is_pullback: bool = False):
        self.top = top        # P -> E
        self.left = left      # P -> X
        self.right = right    # E -> B
        self.bottom = bottom  # X -> B
        self.is_pullback = is_pullback
        one = self.top.then(self.right)
        two = self.left.then(self.bottom)
        if not one.same_maps(two):
            raise GroupoidError("square does not commute")

    def check_cone(self, to_x: GFunctor, to_e: GFunctor) -> GFunctor:
        """Mediating functor for a commuting cone; unique for a strict pullback."""
        if not to_x.then(self.bottom).same_maps(to_e.then(self.right)):
            raise GroupoidError("cone does not commute")
        p = self.top.dom
        pair_to_obj = {(self.left.obj_map[o], self.top.obj_map[o]): o for o in p.objects()}
        pair_to_mor = {(self.left.mor_map[m], self.top.mor_map[m]): m for m in p.morphisms()}
        obj_map = [pair_to_obj[(to_x.obj_map[z], to_e.obj_map[z])] for z in to_x.dom.objects()]
        mor_map = [pair_to_mor[(to_x.mor_map[m], to_e.mor_map[m])] for m in to_x.dom.morphisms()]
        return GFunctor(to_x.dom, p, obj_map, mor_map)


# --- JSON exchange format -----------------------------------------------------


def groupoid_to_json(g: FinGroupoid) -> dict:
    return {
        "objects": g.n_objects,
        "morphisms": [{"id": m, "src": g.src[m], "dst": g.dst[m]} for m in g.morphisms()],
        "compose": [[gi, fi, h] for (gi, fi), h in sorted(g.comp.items())],
        "identities": list(g.identity),
    }


def groupoid_from_json(data: dict, limits=None) -> FinGroupoid:
    mors = sorted(data["morphisms"], key=lambda m: m["id"])
    if [m["id"] for m in mors] != list(range(len(mors))):
        raise GroupoidError("morphism ids must be 0..n-1")
    comp = {(g, f): h for g, f, h in data["compose"]}
    return FinGroupoid(
        data["objects"],
        [m["src"] for m in mors],
        [m["dst"] for m in mors],
        data["identities"],
        comp,
        limits=limits,
    )


def functor_to_json(f: GFunctor, dom_name: str, cod_name: str) -> dict:
    return {
        "dom": dom_name,
        "cod": cod_name,
        "object_map": list(f.obj_map),
        "morphism_map": list(f.mor_map),
    }


def functor_from_json(data: dict, groupoids: dict) -> GFunctor:
    return GFunctor(groupoids[data["dom"]], groupoids[data["cod"]],
                    data["object_map"], data["morphism_map"])
