"""Exact combinatorics of binary genealogies.

This module is the discrete backbone of the package: vertices of the
infinite binary tree, the evolutionary sets a branching population can
occupy, the genealogy gauges, and the generation-count quotient.

Everything here is exact.  Dyadic masses are verified in integer
arithmetic, vertices pack their whole path into one integer so hashing
and prefix tests are cheap, and all types are immutable values that can
be shared freely between threads.
"""

from __future__ import annotations

import functools
from collections import Counter, deque
from typing import Iterable, Iterator, Sequence

#: Hard cap on vertex height.  Beyond ~60 the dyadic denominators leave
#: 64-bit range (Python integers keep the check exact anyway) and no
#: desk-scale run needs more than this.
DEPTH_MAX = 120


class CapacityError(RuntimeError):
    """A configured depth or size limit would be exceeded."""


@functools.total_ordering
class Vertex:
    """A node of the infinite binary tree, named by its path from the root.

    The path is a finite word over {1, 2}; the empty word is the root.
    Internally the word is packed into a single integer with a leading
    sentinel bit (root -> 1, <1> -> 0b10, <2> -> 0b11, <2,1> -> 0b110,
    ...), which gives O(1) hashing and ordering and cheap prefix tests.
    Instances are immutable.
    """

    __slots__ = ("_key",)

    def __init__(self, path: Sequence[int] = ()):
        key = 1
        for step in path:
            if step not in (1, 2):
                raise ValueError(f"path steps must be 1 or 2, got {step!r}")
            key = (key << 1) | (step - 1)
        if key.bit_length() - 1 > DEPTH_MAX:
            raise CapacityError(
                f"vertex height {key.bit_length() - 1} exceeds DEPTH_MAX={DEPTH_MAX}"
            )
        object.__setattr__(self, "_key", key)

    @classmethod
    def _from_key(cls, key: int) -> "Vertex":
        v = cls.__new__(cls)
        object.__setattr__(v, "_key", key)
        return v

    @classmethod
    def from_string(cls, text: str) -> "Vertex":
        """Parse the canonical text form, a string over '1' and '2' ('' is the root)."""
        try:
            return cls(tuple(int(c) for c in text))
        except ValueError as exc:
            raise ValueError(f"invalid vertex string {text!r}") from exc

    def __setattr__(self, name, value):
        raise AttributeError("Vertex is immutable")

    @property
    def height(self) -> int:
        return self._key.bit_length() - 1

    @property
    def bits(self) -> int:
        """The path steps as a bit field (step 1 -> 0, step 2 -> 1), MSB first."""
        return self._key ^ (1 << self.height)

    @property
    def path(self) -> tuple[int, ...]:
        h = self.height
        return tuple(((self._key >> (h - 1 - j)) & 1) + 1 for j in range(h))

    def child(self, side: int) -> "Vertex":
        if side not in (1, 2):
            raise ValueError("side must be 1 or 2")
        if self.height + 1 > DEPTH_MAX:
            raise CapacityError(f"child would exceed DEPTH_MAX={DEPTH_MAX}")
        return Vertex._from_key((self._key << 1) | (side - 1))

    @property
    def children(self) -> tuple["Vertex", "Vertex"]:
        return self.child(1), self.child(2)

    @property
    def parent(self) -> "Vertex | None":
        if self._key == 1:
            return None
        return Vertex._from_key(self._key >> 1)

    def restrict(self, j: int) -> "Vertex":
        """The ancestor at height j (the first j steps of the path)."""
        h = self.height
        if not 0 <= j <= h:
            raise ValueError(f"restriction height {j} outside [0, {h}]")
        return Vertex._from_key(self._key >> (h - j))

    def is_prefix_of(self, other: "Vertex", strict: bool = False) -> bool:
        dh = other.height - self.height
        if dh < 0 or (strict and dh == 0):
            return False
        return (other._key >> dh) == self._key

    def __str__(self) -> str:
        h = self.height
        return "".join(str(((self._key >> (h - 1 - j)) & 1) + 1) for j in range(h))

    def __repr__(self) -> str:
        return f"Vertex({str(self)!r})"

    def __eq__(self, other) -> bool:
        return isinstance(other, Vertex) and self._key == other._key

    def __lt__(self, other) -> bool:
        # Lexicographic order on path words, matching sorted canonical strings.
        if not isinstance(other, Vertex):
            return NotImplemented
        return str(self) < str(other)

    def __hash__(self) -> int:
        return hash(self._key)


ROOT = Vertex()


class EvolutionarySet:
    """A reachable population state: a prefix-free leaf set of dyadic mass one.

    These are exactly the leaf sets of finite full binary trees, i.e. the
    states reachable from {root} by repeatedly replacing a member with its
    two children.  Construction validates both characterizing conditions
    unless ``validate=False`` (used internally where the invariant is
    preserved by construction).
    """

    __slots__ = ("_members",)

    def __init__(self, members: Iterable[Vertex], *, validate: bool = True):
        ms = frozenset(members)
        if validate and not is_evolutionary(ms):
            raise ValueError(
                "not an evolutionary set (must be nonempty, prefix-free, "
                "with dyadic masses summing to exactly one)"
            )
        object.__setattr__(self, "_members", ms)

    def __setattr__(self, name, value):
        raise AttributeError("EvolutionarySet is immutable")

    @classmethod
    def initial(cls) -> "EvolutionarySet":
        return cls((ROOT,), validate=False)

    @property
    def members(self) -> frozenset[Vertex]:
        return self._members

    def __iter__(self) -> Iterator[Vertex]:
        return iter(self._members)

    def __len__(self) -> int:
        return len(self._members)

    def __contains__(self, v) -> bool:
        return v in self._members

    def __eq__(self, other) -> bool:
        return isinstance(other, EvolutionarySet) and self._members == other._members

    def __hash__(self) -> int:
        return hash(self._members)

    @property
    def max_height(self) -> int:
        return max(v.height for v in self._members)

    def sorted_members(self) -> list[Vertex]:
        return sorted(self._members)

    def height_counts(self) -> Counter:
        return Counter(v.height for v in self._members)

    def to_strings(self) -> list[str]:
        """Canonical serialization: sorted list of path strings."""
        return sorted(str(v) for v in self._members)

    @classmethod
    def from_strings(cls, texts: Iterable[str]) -> "EvolutionarySet":
        return cls(Vertex.from_string(t) for t in texts)

    def __repr__(self) -> str:
        return f"EvolutionarySet({self.to_strings()!r})"


def is_evolutionary(members: Iterable[Vertex]) -> bool:
    """Whether a finite vertex set is a valid evolutionary set.

    Checks prefix-freeness and that the masses 2**(-height) sum to exactly
    one, in exact integer arithmetic over the common denominator
    2**max_height.  Total: returns False rather than raising.
    """
    words = sorted(str(v) for v in set(members))
    if not words:
        return False
    for a, b in zip(words, words[1:]):
        if b.startswith(a):
            return False
    hmax = len(words[-1]) if words[-1] else 0
    hmax = max(hmax, max(len(w) for w in words))
    total = sum(1 << (hmax - len(w)) for w in words)
    return total == 1 << hmax


def branch(state: EvolutionarySet, v: Vertex) -> EvolutionarySet:
    """Replace member v by its two children.

    The single transition of the branching dynamics; it preserves the
    evolutionary-set invariants and grows the cardinality by one.
    """
    if v not in state:
        raise ValueError(f"cannot branch at {v!r}: not a member of the state")
    c1, c2 = v.children  # raises CapacityError at the depth cap
    return EvolutionarySet(state.members - {v} | {c1, c2}, validate=False)


def gauge(state: EvolutionarySet, beta: float) -> float:
    """Genealogy gauge: sum of beta**height over the members.

    beta = 1 gives the cardinality exactly; beta = 1/2 is identically one
    (the dyadic mass).  Terms are grouped per height and summed in
    increasing height order, so the rounding error stays within a few
    machine epsilons per occupied height.
    """
    if not 0.0 < beta <= 1.0:
        raise ValueError(f"beta must be in (0, 1], got {beta}")
    counts = state.height_counts()
    total = 0.0
    for h in sorted(counts):
        total += counts[h] * beta**h
    return total


def gauge_of_counts(counts: Sequence[int], beta: float) -> float:
    """Gauge evaluated on a generation-count vector (counts[h] members at height h)."""
    if not 0.0 < beta <= 1.0:
        raise ValueError(f"beta must be in (0, 1], got {beta}")
    total = 0.0
    for h, c in enumerate(counts):
        if c:
            total += c * beta**h
    return total


class EvolutionarySequence:
    """A generation-count profile: entry k counts members at height k.

    The quotient of an evolutionary set that forgets which vertices are
    occupied and keeps only how many per generation.  Moves replace one
    member of generation k by two of generation k+1.
    """

    __slots__ = ("_counts",)

    def __init__(self, counts: Iterable[int]):
        t = tuple(int(c) for c in counts)
        if any(c < 0 for c in t):
            raise ValueError("generation counts must be non-negative")
        while len(t) > 1 and t[-1] == 0:
            t = t[:-1]
        if sum(t) < 1:
            raise ValueError("a generation profile must count at least one member")
        object.__setattr__(self, "_counts", t)

    def __setattr__(self, name, value):
        raise AttributeError("EvolutionarySequence is immutable")

    @classmethod
    def initial(cls) -> "EvolutionarySequence":
        return cls((1,))

    @property
    def counts(self) -> tuple[int, ...]:
        return self._counts

    def __getitem__(self, k: int) -> int:
        return self._counts[k] if 0 <= k < len(self._counts) else 0

    def __len__(self) -> int:
        return len(self._counts)

    @property
    def total(self) -> int:
        return sum(self._counts)

    def apply_move(self, k: int) -> "EvolutionarySequence":
        """One branching in generation k: counts[k] -= 1, counts[k+1] += 2."""
        if self[k] < 1:
            raise ValueError(f"no member in generation {k} to branch")
        if k + 1 > DEPTH_MAX:
            raise CapacityError(f"move would exceed DEPTH_MAX={DEPTH_MAX}")
        c = list(self._counts) + [0] * (k + 2 - len(self._counts))
        c[k] -= 1
        c[k + 1] += 2
        return EvolutionarySequence(c)

    def is_reachable(self) -> bool:
        """Whether this profile occurs for some evolutionary set.

        Equivalent to exact dyadic mass one: sum over k of counts[k] * 2**-k
        equals 1, checked in integer arithmetic.  (Kraft equality; any such
        profile is realized by a full binary tree built level by level.)
        """
        k_max = len(self._counts) - 1
        total = sum(c << (k_max - k) for k, c in enumerate(self._counts))
        return total == 1 << k_max

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, EvolutionarySequence) and self._counts == other._counts
        )

    def __hash__(self) -> int:
        return hash(self._counts)

    def __repr__(self) -> str:
        return f"EvolutionarySequence({self._counts!r})"


def generation_profile(state: EvolutionarySet) -> EvolutionarySequence:
    """Quotient map: count the members of each generation."""
    counts = state.height_counts()
    out = [0] * (max(counts) + 1)
    for h, c in counts.items():
        out[h] = c
    return EvolutionarySequence(out)


def full_frontier(depth: int) -> EvolutionarySet:
    """The state with all 2**depth vertices of one generation.

    Materializes 2**depth vertices; capped at depth 20 to keep memory sane
    (the generator norm witness avoids materializing frontiers entirely).
    """
    if depth < 0:
        raise ValueError("depth must be >= 0")
    if depth > 20:
        raise CapacityError(f"refusing to materialize 2**{depth} vertices")
    lo = 1 << depth
    return EvolutionarySet(
        (Vertex._from_key(k) for k in range(lo, 2 * lo)), validate=False
    )


def enumerate_evolutionary_sets(max_leaves: int) -> list[EvolutionarySet]:
    """All evolutionary sets with at most ``max_leaves`` members, by BFS.

    A state with m members arises from m-1 branchings, so the enumeration
    walks the branching graph from {root} and deduplicates.  The count per
    cardinality m is the Catalan number C(m-1).
    """
    if max_leaves < 1:
        raise ValueError("max_leaves must be >= 1")
    if max_leaves > 10:
        raise CapacityError("enumeration beyond 10 leaves is too large to be useful")
    seen = {EvolutionarySet.initial()}
    queue = deque(seen)
    while queue:
        state = queue.popleft()
        if len(state) >= max_leaves:
            continue
        for v in state:
            nxt = branch(state, v)
            if nxt not in seen:
                seen.add(nxt)
                queue.append(nxt)
    return sorted(seen, key=lambda s: (len(s), s.to_strings()))
