"""Typed (coloured) partitions of a finite ground set."""
from __future__ import annotations

import dataclasses
from typing import Iterable, Mapping

Label = tuple[int, int]


@dataclasses.dataclass(frozen=True)
class TypedPartition:
    """
    A ``d``-tuple of disjoint collections of blocks whose union partitions
    the ground set. ``classes[i]`` holds the blocks of colour ``i``.

    Ground-set labels are ``(type, index)`` pairs, both 0-based; the type
    in a label is the element's original type and need not equal the
    colour of the block currently containing it.
    """

    classes: tuple[frozenset, ...]

    @classmethod
    def singletons(cls, n: Iterable[int]) -> TypedPartition:
        """Every element ``(i, p)``, ``p < n_i``, in its own colour-``i`` block."""
        return cls(tuple(
            frozenset(frozenset([(i, p)]) for p in range(ni)) for i, ni in enumerate(n)
        ))

    @classmethod
    def from_blocks(cls, d: int, blocks: Iterable[tuple[Iterable[Label], int]]) -> TypedPartition:
        """Build from ``(block, colour)`` pairs and validate."""
        classes = [set() for _ in range(d)]
        for block, colour in blocks:
            if not (0 <= colour < d):
                raise ValueError(f"colour {colour} out of range")
            classes[colour].add(frozenset(tuple(x) for x in block))
        p = cls(tuple(frozenset(c) for c in classes))
        p.validate()
        return p

    @property
    def d(self) -> int:
        return len(self.classes)

    @property
    def blocks(self) -> list[tuple[frozenset, int]]:
        return [(b, i) for i, c in enumerate(self.classes) for b in sorted(c, key=sorted)]

    @property
    def ground(self) -> frozenset:
        return frozenset().union(*[b for c in self.classes for b in c])

    def counts(self) -> tuple[int, ...]:
        return tuple(len(c) for c in self.classes)

    def validate(self) -> None:
        seen = set()
        for c in self.classes:
            for b in c:
                if not b:
                    raise ValueError("empty block")
                if seen & b:
                    raise ValueError("blocks overlap")
                seen |= b

    def project(self, subset: Iterable[Label]) -> TypedPartition:
        return project_partition(self, subset)

    def permute(self, sigma: Mapping[Label, Label]) -> TypedPartition:
        """
        Relabel ground elements by ``sigma``, which must map each label to
        a label of the same type and be a bijection of the ground set.
        Unlisted labels are fixed.
        """
        ground = self.ground
        for a, b in sigma.items():
            if a[0] != b[0]:
                raise ValueError(f"permutation maps {a} to {b}, mixing types")
        image = {sigma.get(x, x) for x in ground}
        if image != ground:
            raise ValueError("permutation is not a bijection of the ground set")
        return TypedPartition(tuple(
            frozenset(frozenset(sigma.get(x, x) for x in b) for b in c)
            for c in self.classes
        ))


def project_partition(p: TypedPartition, subset: Iterable[Label]) -> TypedPartition:
    """Restrict to ``subset``: intersect blocks, drop empty ones, keep colours."""
    subset = frozenset(tuple(x) for x in subset)
    if not subset:
        raise ValueError("cannot project onto the empty set")
    classes = []
    for c in p.classes:
        kept = (b & subset for b in c)
        classes.append(frozenset(b for b in kept if b))
    return TypedPartition(tuple(classes))
