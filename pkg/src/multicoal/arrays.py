"""
Truncated arrays ``mu_{b,k}`` indexed by pairs ``k <= b`` in ``Z^d_{>=0}``
minus a box, their recursion, and recovery of the representing data.

Storage: along each axis the pair ``(b_j, k_j)`` with ``0 <= k_j <= b_j <= B``
is flattened to the triangular index ``b_j (b_j + 1) / 2 + k_j``, so an
array is a dense ``(T,) * d`` block with ``T = (B + 1)(B + 2) / 2``.
Entries whose ``k`` lies in the box are NaN.
"""
from __future__ import annotations

import dataclasses
import itertools
from typing import Mapping, Sequence

import numpy as np

from .measures import FiniteMeasureOnCube, MergerMeasureSet


class RecursionViolated(ValueError):
    """The array does not satisfy the recursion within tolerance."""


def tri(b: int, k: int) -> int:
    return b * (b + 1) // 2 + k


@dataclasses.dataclass(frozen=True)
class ArrayIndexSet:
    """The pairs ``(b, k)`` with ``k <= b <= B_max * 1`` and ``k`` outside the box ``B_ell``."""

    d: int
    ell: tuple[int, ...]
    b_max: int = 16

    def __post_init__(self):
        ell = tuple(int(x) for x in self.ell)
        if len(ell) != self.d or self.d < 1:
            raise ValueError("ell must have d entries")
        if any(x < 0 for x in ell):
            raise ValueError("box bounds must be non-negative")
        if self.b_max <= max(ell):
            raise ValueError("b_max must exceed every box bound")
        object.__setattr__(self, "ell", ell)
        # every k outside the box dominates a minimal element
        for k in itertools.product(range(self.b_max + 1), repeat=self.d):
            if self.outside_box(k) and not any(
                all(kj >= gj for kj, gj in zip(k, g)) for g in self.minimal
            ):
                raise AssertionError(f"{k} dominates no minimal element")

    @property
    def size(self) -> int:
        """Per-axis length ``T`` of the stored block."""
        return (self.b_max + 1) * (self.b_max + 2) // 2

    @property
    def minimal(self) -> list[tuple[int, ...]]:
        """``Gamma_ell``: ``(ell_i + 1) e_i`` for each ``i``."""
        out = []
        for i in range(self.d):
            g = [0] * self.d
            g[i] = self.ell[i] + 1
            out.append(tuple(g))
        return out

    def outside_box(self, k) -> bool:
        return any(kj > lj for kj, lj in zip(k, self.ell))

    def axis_bk(self) -> tuple[np.ndarray, np.ndarray]:
        """``(b, k)`` arrays of length ``T`` along one axis."""
        b = np.concatenate([np.full(x + 1, x) for x in range(self.b_max + 1)])
        k = np.concatenate([np.arange(x + 1) for x in range(self.b_max + 1)])
        return b, k

    def domain_mask(self) -> np.ndarray:
        _, k = self.axis_bk()
        mask = np.zeros((self.size,) * self.d, dtype=bool)
        for j in range(self.d):
            shape = [1] * self.d
            shape[j] = self.size
            mask |= (k > self.ell[j]).reshape(shape)
        return mask

    def flat(self, b, k) -> tuple[int, ...]:
        if any(not (0 <= kj <= bj <= self.b_max) for kj, bj in zip(k, b)):
            raise IndexError(f"(b={tuple(b)}, k={tuple(k)}) outside the truncation")
        return tuple(tri(bj, kj) for bj, kj in zip(b, k))

    def unflat(self, idx) -> tuple[tuple[int, ...], tuple[int, ...]]:
        b, k = self.axis_bk()
        return tuple(int(b[t]) for t in idx), tuple(int(k[t]) for t in idx)


@dataclasses.dataclass(frozen=True, eq=False)
class RateArray:
    index: ArrayIndexSet
    values: np.ndarray
    rho: np.ndarray | None = None
    j_measure: FiniteMeasureOnCube | None = None

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (self.index.size,) * self.index.d:
            raise ValueError("values do not match the index set")
        dom = self.index.domain_mask()
        if np.any(np.isnan(v[dom])):
            raise ValueError("missing values inside the domain")
        if np.any(v[dom] < 0):
            raise ValueError("array values must be non-negative")
        v = np.where(dom, v, np.nan)
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def value(self, b, k) -> float:
        if not self.index.outside_box(k):
            raise IndexError(f"k={tuple(k)} lies in the box")
        return float(self.values[self.index.flat(b, k)])

    def translated(self, x, b, k) -> float:
        """``mu^x_{b,k} = mu_{b+x, k+x}``."""
        return self.value([bj + xj for bj, xj in zip(b, x)], [kj + xj for kj, xj in zip(k, x)])

    def with_values(self, values) -> RateArray:
        """A copy with new values and no attached representation."""
        return RateArray(self.index, np.nan_to_num(values, nan=0.0))


def _axis_factors(s: float, index: ArrayIndexSet) -> np.ndarray:
    """``s^k (1 - s)^(b - k)`` along one axis, ``0^0 = 1``."""
    b, k = index.axis_bk()
    return np.power(s, k) * np.power(1.0 - s, b - k)


def _rho_vector(index: ArrayIndexSet, rho) -> np.ndarray:
    if isinstance(rho, Mapping):
        out = np.zeros(index.d)
        gam = index.minimal
        for x, v in rho.items():
            x = tuple(x)
            if x not in gam:
                raise ValueError(f"{x} is not a minimal element")
            out[gam.index(x)] = v
        return out
    out = np.asarray(rho, dtype=float).reshape(-1)
    if len(out) != index.d:
        raise ValueError("need one rho value per minimal element")
    return out


def array_from_representation(ell: Sequence[int], b_max: int, rho,
                              j_measure: FiniteMeasureOnCube | None) -> RateArray:
    """
    Fill ``mu_{b,k} = sum_x 1{k = x} rho(x) + int s^k (1 - s)^(b - k) J(ds)``.

    ``rho`` lists the values at ``(ell_i + 1) e_i`` in order of ``i``, or
    maps minimal elements to values.
    """
    d = len(ell)
    index = ArrayIndexSet(d, tuple(ell), b_max)
    rho_v = _rho_vector(index, rho)
    if np.any(rho_v < 0) or np.any(~np.isfinite(rho_v)):
        raise ValueError("rho must be finite and non-negative")
    if j_measure is None:
        j_measure = FiniteMeasureOnCube.empty(d)
    if j_measure.d != d:
        raise ValueError("J has the wrong dimension")
    vals = np.zeros((index.size,) * d)
    for w, s in zip(j_measure.weights, j_measure.points):
        term = np.asarray(w, dtype=float)
        for j in range(d):
            term = np.multiply.outer(term, _axis_factors(float(s[j]), index))
        vals += term
    _, kax = index.axis_bk()
    for i, x in enumerate(index.minimal):
        hit = np.ones((index.size,) * d, dtype=bool)
        for j in range(d):
            shape = [1] * d
            shape[j] = index.size
            hit &= (kax == x[j]).reshape(shape)
        vals[hit] += rho_v[i]
    return RateArray(index, np.where(index.domain_mask(), vals, np.nan), rho_v, j_measure)


def array_for_type(m: MergerMeasureSet, i: int, b_max: int = 16) -> RateArray:
    """The type ``i`` merger-rate array: box ``{0, e_i}``."""
    ell = [0] * m.d
    ell[i] = 1
    rho = [m.rho_change[j, i] if j != i else m.rho_pair[i] for j in range(m.d)]
    return array_from_representation(ell, b_max, rho, m.q_measures[i])


@dataclasses.dataclass(frozen=True)
class RecursionCheck:
    """Largest residual ``mu_{b,k} - mu_{b+e_j,k} - mu_{b+e_j,k+e_j}`` and where it occurs."""

    max_residual: float
    b: tuple[int, ...] | None
    k: tuple[int, ...] | None
    j: int | None

    def involves(self, b, k) -> bool:
        """Whether ``mu_{b,k}`` is one of the three terms at the worst triple."""
        if self.b is None:
            return False
        b, k = tuple(b), tuple(k)
        e = [0] * len(self.b)
        e[self.j] = 1
        b1 = tuple(x + y for x, y in zip(self.b, e))
        k1 = tuple(x + y for x, y in zip(self.k, e))
        return (b, k) in {(self.b, self.k), (b1, self.k), (b1, k1)}


def _residuals(a: RateArray):
    index = a.index
    bax, kax = index.axis_bk()
    v = a.values
    res = []
    for j in range(index.d):
        ok = bax < index.b_max
        up1 = np.where(ok, tri(bax + 1, kax), 0)
        up2 = np.where(ok, tri(bax + 1, kax + 1), 0)
        r = v - np.take(v, up1, axis=j) - np.take(v, up2, axis=j)
        shape = [1] * index.d
        shape[j] = index.size
        r = np.where(ok.reshape(shape), r, np.nan)
        res.append(r)
    return res


def check_recursion_array(a: RateArray) -> RecursionCheck:
    if a.index.b_max < 1:
        raise ValueError("need b_max >= 1")
    best = RecursionCheck(0.0, None, None, None)
    for j, r in enumerate(_residuals(a)):
        if np.all(np.isnan(r)):
            continue
        flat = int(np.nanargmax(np.abs(r)))
        idx = np.unravel_index(flat, r.shape)
        val = float(abs(r[idx]))
        if best.b is None or val > best.max_residual:
            b, k = a.index.unflat(idx)
            best = RecursionCheck(val, b, k, j)
    return best


@dataclasses.dataclass(frozen=True)
class RecoveryReport:
    """
    ``rho`` estimates at the minimal elements with a last-increment error
    proxy, and the moment table ``int s^k (1 - s)^(b - k) J(ds)``.

    ``exact`` marks table entries read directly from the array (``k`` not
    minimal); entries at minimal ``k`` subtract the ``rho`` estimate and
    carry its error.
    """

    index: ArrayIndexSet
    rho: np.ndarray
    rho_error: np.ndarray
    moments: np.ndarray
    exact: np.ndarray
    recursion: RecursionCheck

    def moment(self, b, k) -> float:
        return float(self.moments[self.index.flat(b, k)])

    def power_moment(self, m) -> float:
        """``int s^m J(ds)``."""
        return self.moment(m, m)

    def translated_moment(self, x, b, k) -> float:
        """Moment of ``s^x J`` at ``(b, k)``, read from the translated array."""
        return self.moment([bj + xj for bj, xj in zip(b, x)], [kj + xj for kj, xj in zip(k, x)])

    def compatibility_residual(self, order: int) -> float:
        """
        Max over minimal ``x, y`` and ``|b| <= order`` of the difference
        between the moments of ``s^{z-x} (s^x J)`` and ``s^{z-y} (s^y J)``,
        ``z = x v y``, computed from the two translated tables.
        """
        worst = 0.0
        gam = self.index.minimal
        d = self.index.d
        for x, y in itertools.combinations(gam, 2):
            z = tuple(max(p, q) for p, q in zip(x, y))
            for b in itertools.product(range(order + 1), repeat=d):
                if sum(b) > order or any(bj + zj > self.index.b_max for bj, zj in zip(b, z)):
                    continue
                for k in itertools.product(*[range(bj + 1) for bj in b]):
                    bx = [bj + zj - xj for bj, zj, xj in zip(b, z, x)]
                    kx = [kj + zj - xj for kj, zj, xj in zip(k, z, x)]
                    by = [bj + zj - yj for bj, zj, yj in zip(b, z, y)]
                    ky = [kj + zj - yj for kj, zj, yj in zip(k, z, y)]
                    lhs = self.translated_moment(x, bx, kx)
                    rhs = self.translated_moment(y, by, ky)
                    worst = max(worst, abs(lhs - rhs))
        return worst


def recover_representation(a: RateArray, tol: float = 1e-9) -> RecoveryReport:
    """
    Read ``rho`` and the moments of ``J`` off a recursion-satisfying array.

    ``rho(x)`` is estimated by ``mu_{B 1, x}`` at the truncation corner,
    the smallest available term of the non-increasing sequence
    ``mu_{x + n 1, x}``; the error proxy is its last diagonal decrement.
    """
    index = a.index
    check = check_recursion_array(a)
    scale = max(1.0, float(np.nanmax(np.abs(a.values))))
    if check.max_residual > tol * scale:
        raise RecursionViolated(
            f"residual {check.max_residual:.3g} at b={check.b}, k={check.k}, j={check.j}")
    B = index.b_max
    corner = (B,) * index.d
    rho = np.empty(index.d)
    err = np.empty(index.d)
    for i, x in enumerate(index.minimal):
        rho[i] = a.value(corner, x)
        prev = tuple(c - 1 for c in corner)
        err[i] = a.value(prev, x) - rho[i] if all(p >= xj for p, xj in zip(prev, x)) else np.nan
    moments = np.array(a.values, dtype=float)
    exact = index.domain_mask()
    _, kax = index.axis_bk()
    for i, x in enumerate(index.minimal):
        hit = np.ones(moments.shape, dtype=bool)
        for j in range(index.d):
            shape = [1] * index.d
            shape[j] = index.size
            hit &= (kax == x[j]).reshape(shape)
        moments[hit] -= rho[i]
        exact &= ~hit
    return RecoveryReport(index, rho, err, moments, exact, check)
