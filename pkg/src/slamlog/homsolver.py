"""Homomorphism solving between finite relational structures.

Candidate sets are bitmasks over the target domain.  Search is complete
backtracking with arc-consistency propagation at every node, using fixed
lowest-index-first variable order and ascending value order so results are
reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass

from .structures import Structure


class SignatureMismatch(ValueError):
    """Instance and template disagree on relation symbols or arities."""


@dataclass(frozen=True)
class CandidateSets:
    """Per-element candidate sets, the greatest arc-consistent fixpoint."""

    sets: tuple[frozenset[int], ...]

    def __getitem__(self, i: int) -> frozenset[int]:
        return self.sets[i]


def _check_signatures(a: Structure, b: Structure):
    if a.signature.symbols != b.signature.symbols:
        raise SignatureMismatch(
            f"signatures differ: {a.signature.symbols} vs {b.signature.symbols}"
        )


class HomSearcher:
    """Reusable solver with the target structure preprocessed once."""

    def __init__(self, target: Structure):
        self.target = target
        self.nb = target.size
        self.full = (1 << self.nb) - 1
        self.target_rels = [sorted(rel) for rel in target.relations]

    def _atoms(self, a: Structure):
        """Pair each instance tuple with the target rows of its relation."""
        atoms = []
        for ri, rel in enumerate(a.relations):
            rows = self.target_rels[ri]
            for t in sorted(rel):
                atoms.append((t, rows))
        return atoms

    # -- arc consistency ----------------------------------------------------

    @staticmethod
    def _propagate(atoms, cand: list[int]) -> bool:
        """Prune to the per-atom support fixpoint.  False on wipeout."""
        changed = True
        while changed:
            changed = False
            for t, rows in atoms:
                k = len(t)
                support = [0] * k
                for u in rows:
                    ok = True
                    for j in range(k):
                        if not (cand[t[j]] >> u[j]) & 1:
                            ok = False
                            break
                    if ok:
                        for j in range(k):
                            support[j] |= 1 << u[j]
                for j in range(k):
                    new = cand[t[j]] & support[j]
                    if new != cand[t[j]]:
                        cand[t[j]] = new
                        changed = True
                        if new == 0:
                            return False
        return True

    def arc_consistency(self, a: Structure) -> CandidateSets | None:
        _check_signatures(a, self.target)
        if a.size and self.nb == 0:
            return None
        cand = [self.full] * a.size
        if not self._propagate(self._atoms(a), cand):
            return None
        sets = tuple(
            frozenset(v for v in range(self.nb) if (m >> v) & 1) for m in cand
        )
        return CandidateSets(sets=sets)

    # -- search -------------------------------------------------------------

    def find(self, a: Structure) -> tuple[int, ...] | None:
        _check_signatures(a, self.target)
        if a.size == 0:
            return ()
        if self.nb == 0:
            return None
        atoms = self._atoms(a)
        cand = [self.full] * a.size
        if not self._propagate(atoms, cand):
            return None
        out = self._search(atoms, cand)
        if out is not None:
            assert is_homomorphism(a, self.target, out)
        return out

    def _search(self, atoms, cand: list[int]) -> tuple[int, ...] | None:
        var = next((i for i, m in enumerate(cand) if m & (m - 1)), None)
        if var is None:
            return tuple(m.bit_length() - 1 for m in cand)
        mask = cand[var]
        v = 0
        while mask:
            if mask & 1:
                trial = list(cand)
                trial[var] = 1 << v
                if self._propagate(atoms, trial):
                    got = self._search(atoms, trial)
                    if got is not None:
                        return got
            mask >>= 1
            v += 1
        return None

    def exists(self, a: Structure) -> bool:
        return self.find(a) is not None

    def enumerate(self, a: Structure, limit: int | None = None):
        """Yield every homomorphism in lexicographic order of the value tuple."""
        _check_signatures(a, self.target)
        if limit is not None and limit <= 0:
            return
        if a.size == 0:
            yield ()
            return
        if self.nb == 0:
            return
        atoms = self._atoms(a)
        cand = [self.full] * a.size
        if not self._propagate(atoms, cand):
            return
        count = 0
        stack: list[tuple[int, list[int]]] = [(0, cand)]
        while stack:
            depth, cur = stack.pop()
            if depth == a.size:
                yield tuple(m.bit_length() - 1 for m in cur)
                count += 1
                if limit is not None and count >= limit:
                    return
                continue
            children = []
            mask = cur[depth]
            v = 0
            while mask:
                if mask & 1:
                    trial = list(cur)
                    trial[depth] = 1 << v
                    if self._propagate(atoms, trial):
                        children.append((depth + 1, trial))
                mask >>= 1
                v += 1
            stack.extend(reversed(children))


def arc_consistency(a: Structure, b: Structure) -> CandidateSets | None:
    """Greatest arc-consistent candidate sets, or None when inconsistent."""
    return HomSearcher(b).arc_consistency(a)


def find_homomorphism(a: Structure, b: Structure) -> tuple[int, ...] | None:
    """First homomorphism a -> b in lexicographic order, or None."""
    return HomSearcher(b).find(a)


def enumerate_homomorphisms(a, b, limit: int | None = None):
    return HomSearcher(b).enumerate(a, limit=limit)


def is_homomorphism(a: Structure, b: Structure, h) -> bool:
    if len(h) != a.size:
        return False
    if any(not 0 <= v < b.size for v in h):
        return False
    for (rel_a, rel_b) in zip(a.relations, b.relations):
        for t in rel_a:
            if tuple(h[e] for e in t) not in rel_b:
                return False
    return True


def hom_equivalent(a: Structure, b: Structure) -> bool:
    return find_homomorphism(a, b) is not None and find_homomorphism(b, a) is not None


# ---------------------------------------------------------------------------
# Cores
# ---------------------------------------------------------------------------

def _induced(b: Structure, kept: list[int]) -> Structure:
    pos = {e: i for i, e in enumerate(kept)}
    keep = set(kept)
    rels = tuple(
        frozenset(
            tuple(pos[e] for e in t) for t in rel if all(e in keep for e in t)
        )
        for rel in b.relations
    )
    return Structure(signature=b.signature, size=len(kept), relations=rels,
                     name=b.name)


def _shrinking_endomorphism(b: Structure) -> tuple[int, ...] | None:
    """A homomorphism from b into some proper induced substructure, if any."""
    for drop in range(b.size):
        kept = [e for e in range(b.size) if e != drop]
        sub = _induced(b, kept)
        h = find_homomorphism(b, sub)
        if h is not None:
            return tuple(kept[v] for v in h)  # back to b's own elements
    return None


def core_of(b: Structure) -> tuple[Structure, tuple[int, ...]]:
    """Core of b plus a retraction of b onto it.

    Repeatedly finds an endomorphism into a smaller induced substructure and
    restricts to its image.  The survivor admits no non-surjective
    endomorphism; the returned map is a homomorphism from b onto the core
    that fixes the core pointwise.
    """
    kept = list(range(b.size))          # core candidates, as elements of b
    comp = list(range(b.size))          # b-element -> index into kept
    current = b
    while True:
        h = _shrinking_endomorphism(current)
        if h is None:
            break
        image = sorted(set(h))
        comp = [image.index(h[comp[e]]) for e in range(b.size)]
        kept = [kept[i] for i in image]
        current = _induced(b, kept)
    core = current
    # comp restricted to the core is an endomorphism of a core, hence a
    # permutation; undo it so the final map is a genuine retraction
    inner = [comp[kept[i]] for i in range(core.size)]
    inverse = [0] * core.size
    for i, v in enumerate(inner):
        inverse[v] = i
    retraction = tuple(inverse[comp[e]] for e in range(b.size))
    assert is_homomorphism(b, core, retraction)
    assert all(retraction[kept[i]] == i for i in range(core.size))
    return core, retraction


def is_core(b: Structure) -> bool:
    return _shrinking_endomorphism(b) is None


# ---------------------------------------------------------------------------
# Isomorphism (used by tests and the gadget contract checks)
# ---------------------------------------------------------------------------

def find_isomorphism(a: Structure, b: Structure) -> tuple[int, ...] | None:
    """An isomorphism a -> b, or None.  Sizes and tuple counts must agree."""
    if a.signature.symbols != b.signature.symbols:
        return None
    if a.size != b.size:
        return None
    if tuple(len(r) for r in a.relations) != tuple(len(r) for r in b.relations):
        return None
    for h in enumerate_homomorphisms(a, b):
        if len(set(h)) == a.size:
            # injective hom with matching tuple counts is an isomorphism
            return h
    return None


def is_isomorphic(a: Structure, b: Structure) -> bool:
    return find_isomorphism(a, b) is not None
