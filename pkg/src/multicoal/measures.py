"""
Characterizing data of multitype Lambda-coalescents.

A process on ``d`` types is specified by

* colour-change rates ``rho_change[j, i]`` (a single block of type ``j``
  turns into type ``i``),
* within-type pairwise merger rates ``rho_pair[i]``,
* one finite-atom merger measure ``Q_{->i}`` on ``[0, 1]^d`` per target
  type ``i``.

Types are 0-based in the Python API. The JSON configuration format uses
1-based type indices, matching the usual mathematical notation.
"""
from __future__ import annotations

import copy
import dataclasses
import functools
import json
import math
from typing import Any, Iterable, Sequence

import numpy as np
from scipy import special

SCHEMA_VERSION = 1


class ConfigError(ValueError):
    """Raised for malformed or invalid measure configurations."""


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclasses.dataclass(frozen=True, eq=False)
class FiniteMeasureOnCube:
    """
    A finite list of weighted atoms on ``[0, 1]^d``.

    :ivar d: dimension of the cube.
    :ivar weights: shape ``(m,)`` non-negative atom weights.
    :ivar points: shape ``(m, d)`` atom locations.
    :ivar family_tag: optional provenance record, e.g. the parametric
        density and quadrature rule an atom list was generated from.
    """

    d: int
    weights: np.ndarray
    points: np.ndarray
    family_tag: dict | None = None

    def __post_init__(self):
        if self.d < 1:
            raise ConfigError("dimension must be at least 1")
        w = np.array(self.weights, dtype=float).reshape(-1)
        p = np.array(self.points, dtype=float).reshape(len(w), self.d)
        if np.any(~np.isfinite(w)) or np.any(w < 0):
            raise ConfigError("atom weights must be finite and non-negative")
        if np.any(~np.isfinite(p)) or np.any(p < 0) or np.any(p > 1):
            raise ConfigError("atom points must lie in [0, 1]^d")
        if len(w) and np.any(np.all(p == 0, axis=1)):
            raise ConfigError(
                "atom at the zero vector; put that mass into rho_pair instead"
            )
        keep = w > 0
        object.__setattr__(self, "weights", _frozen(w[keep]))
        object.__setattr__(self, "points", _frozen(p[keep]))

    @classmethod
    def empty(cls, d: int) -> FiniteMeasureOnCube:
        return cls(d, np.zeros(0), np.zeros((0, d)))

    @classmethod
    def from_atoms(cls, d: int, atoms: Iterable, family_tag=None):
        """Build from an iterable of ``(weight, point)`` pairs."""
        atoms = list(atoms)
        if not atoms:
            return cls(d, np.zeros(0), np.zeros((0, d)), family_tag)
        w = [float(a[0]) for a in atoms]
        pts = []
        for a in atoms:
            s = np.atleast_1d(np.asarray(a[1], dtype=float))
            if s.shape != (d,):
                raise ConfigError(f"atom point {a[1]!r} does not have {d} coordinates")
            pts.append(s)
        return cls(d, np.array(w), np.array(pts), family_tag)

    def __len__(self):
        return len(self.weights)

    @property
    def atoms(self) -> list[tuple[float, tuple[float, ...]]]:
        return [(float(w), tuple(float(x) for x in s))
                for w, s in zip(self.weights, self.points)]

    @property
    def total_mass(self) -> float:
        return float(self.weights.sum())

    def integrate(self, f) -> float:
        """Integrate ``f``, a function of an ``(m, d)`` point array."""
        if len(self) == 0:
            return 0.0
        return float(np.dot(self.weights, f(self.points)))

    def coordinate(self, i: int) -> tuple[FiniteMeasureOnCube, float]:
        """
        Pushforward under ``s -> s_i``, as a measure on ``[0, 1]``.

        Atoms landing on 0 are dropped; their total weight is returned as
        the second element.
        """
        u = self.points[:, i]
        zero = u == 0
        proj = FiniteMeasureOnCube(1, self.weights[~zero], u[~zero].reshape(-1, 1))
        return proj, float(self.weights[zero].sum())

    def scaled(self, c: float) -> FiniteMeasureOnCube:
        return FiniteMeasureOnCube(self.d, self.weights * c, self.points, self.family_tag)

    def __add__(self, other: FiniteMeasureOnCube) -> FiniteMeasureOnCube:
        if other.d != self.d:
            raise ValueError("dimension mismatch")
        return FiniteMeasureOnCube(
            self.d,
            np.concatenate([self.weights, other.weights]),
            np.concatenate([self.points, other.points]),
        )

    def allclose(self, other: FiniteMeasureOnCube, rtol: float = 1e-12) -> bool:
        """Atomwise equality up to ordering, within relative tolerance."""
        if self.d != other.d or len(self) != len(other):
            return False
        a = np.lexsort(self.points.T[::-1])
        b = np.lexsort(other.points.T[::-1])
        return bool(
            np.allclose(self.points[a], other.points[b], rtol=rtol, atol=0)
            and np.allclose(self.weights[a], other.weights[b], rtol=rtol, atol=0)
        )


@dataclasses.dataclass(frozen=True, eq=False)
class MergerMeasureSet:
    """
    The full characterizing datum of a ``d``-type Lambda-coalescent.

    ``rho_change[j, i]`` is the rate at which a single type ``j`` block
    becomes type ``i``; the diagonal is unused and stored as zero.
    Instances are immutable and compare by identity; use :meth:`allclose`
    for value comparison.
    """

    d: int
    rho_change: np.ndarray
    rho_pair: np.ndarray
    q_measures: tuple[FiniteMeasureOnCube, ...]
    family: dict | None = None

    def __post_init__(self):
        d = self.d
        if not isinstance(d, (int, np.integer)) or d < 1:
            raise ConfigError("d must be a positive integer")
        rc = np.array(self.rho_change, dtype=float).reshape(d, d)
        rp = np.array(self.rho_pair, dtype=float).reshape(d)
        off = ~np.eye(d, dtype=bool)
        if np.any(~np.isfinite(rc[off])) or np.any(rc[off] < 0):
            raise ConfigError("colour-change rates must be finite and non-negative")
        if np.any(~np.isfinite(rp)) or np.any(rp < 0):
            raise ConfigError("pairwise merger rates must be finite and non-negative")
        rc[~off] = 0.0
        qs = tuple(self.q_measures)
        if len(qs) != d:
            raise ConfigError(f"expected {d} merger measures, got {len(qs)}")
        for q in qs:
            if q.d != d:
                raise ConfigError("merger measure dimension does not match d")
        object.__setattr__(self, "d", int(d))
        object.__setattr__(self, "rho_change", _frozen(rc))
        object.__setattr__(self, "rho_pair", _frozen(rp))
        object.__setattr__(self, "q_measures", qs)

    @classmethod
    def kingman(cls, rho_pair: Sequence[float], rho_change=None) -> MergerMeasureSet:
        """Multitype Kingman coalescent: no large mergers."""
        d = len(rho_pair)
        rc = np.zeros((d, d)) if rho_change is None else rho_change
        return cls(d, rc, rho_pair, tuple(FiniteMeasureOnCube.empty(d) for _ in range(d)))

    @functools.cached_property
    def pooled(self) -> tuple[np.ndarray, np.ndarray]:
        """All atoms of all ``Q_{->i}`` stacked (weights, points)."""
        w = np.concatenate([q.weights for q in self.q_measures])
        p = np.concatenate([q.points for q in self.q_measures]).reshape(-1, self.d)
        return w, p

    @property
    def is_atomic(self) -> bool:
        return True

    def out_rate(self, j: int) -> float:
        """Total colour-change rate out of type ``j`` (excluding Q events)."""
        return float(self.rho_change[j].sum())

    def allclose(self, other: MergerMeasureSet, rtol: float = 1e-12) -> bool:
        return (
            self.d == other.d
            and np.allclose(self.rho_change, other.rho_change, rtol=rtol, atol=0)
            and np.allclose(self.rho_pair, other.rho_pair, rtol=rtol, atol=0)
            and all(a.allclose(b, rtol) for a, b in zip(self.q_measures, other.q_measures))
        )

    def to_config(self) -> dict:
        """Serialize to the JSON configuration schema (1-based types)."""
        d = self.d
        cfg: dict[str, Any] = {"schema_version": SCHEMA_VERSION, "d": d}
        if self.family is not None and self.family.get("kind") == "csbp-local":
            cfg["family"] = copy.deepcopy(self.family)
            return cfg
        cfg["rho_change"] = [
            [j + 1, i + 1, float(self.rho_change[j, i])]
            for j in range(d) for i in range(d)
            if i != j and self.rho_change[j, i] > 0
        ]
        cfg["rho_pair"] = [float(x) for x in self.rho_pair]
        q_entries = []
        for i, q in enumerate(self.q_measures):
            n_explicit = len(q)
            if q.family_tag is not None:
                n_explicit = q.family_tag.get("explicit_atoms", len(q))
            atoms = q.atoms[:n_explicit]
            if atoms:
                q_entries.append({
                    "target": i + 1,
                    "atoms": [[w, list(s)] for w, s in atoms],
                })
        cfg["q"] = q_entries
        if self.family is not None:
            cfg["family"] = copy.deepcopy(self.family)
        return cfg


@dataclasses.dataclass(frozen=True)
class CsbpParams:
    """
    Branching-mechanism data of a ``d``-dimensional continuous-state
    branching process.

    ``nu[i]`` is a list of ``(weight, r)`` atoms with ``r`` a non-negative
    jump vector of length ``d``; ``kappa[i][j]`` is the drift coefficient
    written ``kappa_{i->j}``.
    """

    beta: tuple[float, ...]
    kappa: tuple[tuple[float, ...], ...]
    nu: tuple[tuple[tuple[float, tuple[float, ...]], ...], ...]

    def __post_init__(self):
        d = len(self.beta)
        if d < 1:
            raise ConfigError("need at least one type")
        if any(b < 0 for b in self.beta):
            raise ConfigError("beta must be non-negative")
        k = np.asarray(self.kappa, dtype=float)
        if k.shape != (d, d):
            raise ConfigError("kappa must be d x d")
        if np.any(k[~np.eye(d, dtype=bool)] < 0):
            raise ConfigError("off-diagonal kappa entries must be non-negative")
        if len(self.nu) != d:
            raise ConfigError("need one jump measure per type")
        for atoms in self.nu:
            for w, r in atoms:
                if w < 0 or len(r) != d or any(x < 0 for x in r):
                    raise ConfigError("jump measure atoms need w >= 0 and r >= 0 in R^d")

    @property
    def d(self) -> int:
        return len(self.beta)


# -- parametric families ---------------------------------------------------

def beta_nodes(a: float, b: float, nodes: int, rule: str = "gauss-jacobi"):
    """
    Quadrature nodes and weights for the Beta(a, b) probability law on
    ``(0, 1)``.

    ``gauss-jacobi`` integrates polynomials of degree ``2 nodes - 1``
    exactly against the Beta density; ``gauss-legendre`` multiplies the
    density into Legendre weights and is only sensible for ``a, b >= 1``.
    """
    if a <= 0 or b <= 0:
        raise ConfigError("Beta parameters must be positive")
    if nodes < 1:
        raise ConfigError("need at least one quadrature node")
    if rule == "gauss-jacobi":
        # (1 - x)^alpha (1 + x)^beta on [-1, 1] with u = (1 + x) / 2
        x, w = special.roots_jacobi(nodes, b - 1.0, a - 1.0)
        u = (1.0 + x) / 2.0
        w = w / w.sum()
    elif rule == "gauss-legendre":
        x, w = np.polynomial.legendre.leggauss(nodes)
        u = (1.0 + x) / 2.0
        dens = np.exp((a - 1) * np.log(u) + (b - 1) * np.log1p(-u) - special.betaln(a, b))
        w = w / 2.0 * dens
    else:
        raise ConfigError(f"unknown quadrature rule {rule!r}")
    return u, w


def _beta_component_atoms(comp: dict, d: int, rule: str, nodes: int):
    u, w = beta_nodes(comp["a"], comp["b"], nodes, rule)
    lam = comp["mass"] * w
    pts = np.zeros((len(u), d))
    pts[:, comp["coordinate"]] = u
    return lam / u ** 2, pts


def beta_first_moment(comp: dict) -> float:
    """``int s_c Q(ds)`` for the continuous component (may be infinite)."""
    a, b = comp["a"], comp["b"]
    if a <= 1:
        return math.inf
    return comp["mass"] * (a + b - 1) / (a - 1)


# -- configuration parsing -------------------------------------------------

_TOP_KEYS = {"schema_version", "d", "rho_change", "rho_pair", "q", "family"}


def _require(cond, msg):
    if not cond:
        raise ConfigError(msg)


def _type_index(x, d, what) -> int:
    _require(isinstance(x, int) and not isinstance(x, bool), f"{what} must be an integer")
    _require(1 <= x <= d, f"{what} {x} out of range 1..{d}")
    return x - 1


def build_measure_set(config: dict) -> MergerMeasureSet:
    """
    Validate a configuration dictionary and build the measure set.

    The schema is::

        {"d": int,
         "rho_change": [[j, i, rate], ...],
         "rho_pair": [rate, ...],
         "q": [{"target": i, "atoms": [[w, [s1, ..., sd]], ...]}, ...],
         "family": {...}}          # optional

    Type indices are 1-based. ``family`` is either a Beta family::

        {"kind": "beta", "rule": "gauss-jacobi", "nodes": 32,
         "components": [{"target": i, "coordinate": c,
                         "a": a, "b": b, "mass": m}, ...]}

    which adds ``m * Beta(a, b)(du) / u^2`` placed on the ray ``u e_c`` to
    ``Q_{->i}`` (discretized with the given rule), or a ``csbp-local``
    family, see :func:`csbp_from_config`.
    """
    _require(isinstance(config, dict), "configuration must be a JSON object")
    unknown = set(config) - _TOP_KEYS
    _require(not unknown, f"unknown configuration fields: {sorted(unknown)}")
    if "schema_version" in config:
        _require(config["schema_version"] == SCHEMA_VERSION,
                 f"unsupported schema_version {config['schema_version']!r}")
    d = config.get("d")
    _require(isinstance(d, int) and not isinstance(d, bool) and d >= 1,
             "d must be a positive integer")
    family = config.get("family")
    if family is not None:
        _require(isinstance(family, dict) and "kind" in family, "family needs a 'kind'")
        if family["kind"] == "csbp-local":
            _require(not any(k in config for k in ("rho_change", "rho_pair", "q")),
                     "a csbp-local family determines all rates; omit rho_change/rho_pair/q")
            params, x, convention = csbp_from_config(family, d)
            m = csbp_local_rates(params, x, convention)
            return dataclasses.replace(m, family=copy.deepcopy(family))
        _require(family["kind"] == "beta", f"unknown family kind {family['kind']!r}")

    rc = np.zeros((d, d))
    for entry in config.get("rho_change", []):
        _require(isinstance(entry, list) and len(entry) == 3, "rho_change entries are [j, i, rate]")
        j = _type_index(entry[0], d, "rho_change source")
        i = _type_index(entry[1], d, "rho_change target")
        _require(i != j, "rho_change needs distinct source and target")
        rate = entry[2]
        _require(isinstance(rate, (int, float)) and rate >= 0, "negative or non-numeric rate")
        rc[j, i] += rate
    rp = config.get("rho_pair", [0.0] * d)
    _require(isinstance(rp, list) and len(rp) == d, f"rho_pair must list {d} rates")
    for r in rp:
        _require(isinstance(r, (int, float)) and not isinstance(r, bool) and r >= 0,
                 "negative or non-numeric rate")

    atoms: list[list] = [[] for _ in range(d)]
    for entry in config.get("q", []):
        _require(isinstance(entry, dict) and set(entry) <= {"target", "atoms"},
                 "q entries are {'target': i, 'atoms': [...]}")
        i = _type_index(entry.get("target"), d, "q target")
        for atom in entry.get("atoms", []):
            _require(isinstance(atom, list) and len(atom) == 2, "atoms are [w, [s1..sd]]")
            w, s = atom
            _require(isinstance(w, (int, float)) and w >= 0, "atom weight must be non-negative")
            _require(isinstance(s, list) and len(s) == d, f"atom point needs {d} coordinates")
            atoms[i].append((float(w), [float(x) for x in s]))

    measures = []
    comps_by_target: list[list[dict]] = [[] for _ in range(d)]
    rule = nodes = None
    if family is not None:
        allowed = {"kind", "rule", "nodes", "components"}
        _require(set(family) <= allowed, f"unknown family fields: {sorted(set(family) - allowed)}")
        rule = family.get("rule", "gauss-jacobi")
        nodes = family.get("nodes", 32)
        _require(isinstance(nodes, int) and nodes >= 1, "nodes must be a positive integer")
        for comp in family.get("components", []):
            keys = {"target", "coordinate", "a", "b", "mass"}
            _require(isinstance(comp, dict) and set(comp) == keys,
                     f"beta components need exactly {sorted(keys)}")
            i = _type_index(comp["target"], d, "component target")
            c = _type_index(comp["coordinate"], d, "component coordinate")
            _require(comp["a"] > 0 and comp["b"] > 0 and comp["mass"] >= 0,
                     "beta components need a, b > 0 and mass >= 0")
            comps_by_target[i].append(
                {"coordinate": c, "a": float(comp["a"]), "b": float(comp["b"]),
                 "mass": float(comp["mass"])})
    for i in range(d):
        explicit = FiniteMeasureOnCube.from_atoms(d, atoms[i])
        if not comps_by_target[i]:
            measures.append(explicit)
            continue
        ws, ps = [explicit.weights], [explicit.points]
        for comp in comps_by_target[i]:
            w, p = _beta_component_atoms(comp, d, rule, nodes)
            ws.append(w)
            ps.append(p)
        tag = {"kind": "beta", "rule": rule, "nodes": nodes,
               "explicit_atoms": len(explicit),
               "components": tuple(comps_by_target[i])}
        measures.append(FiniteMeasureOnCube(d, np.concatenate(ws), np.concatenate(ps), tag))
    return MergerMeasureSet(d, rc, rp, tuple(measures), family=copy.deepcopy(family))


def load_measure_set(path) -> MergerMeasureSet:
    """Read a JSON configuration file and build the measure set."""
    try:
        with open(path) as f:
            config = json.load(f)
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}: invalid JSON: {e}") from e
    return build_measure_set(config)


# -- integrability, projection, killing -------------------------------------

@dataclasses.dataclass(frozen=True)
class IntegrabilityReport:
    """
    Per-type values of ``int (s_i^2 + sum_{j != i} s_j) Q_{->i}(ds)``.

    ``values`` are exact sums over the stored atoms. ``analytic`` holds the
    corresponding integral of any continuous family the atoms were
    discretized from (``inf`` when that integral diverges), else ``None``.
    """

    values: tuple[float, ...]
    analytic: tuple[float | None, ...]

    @property
    def finite(self) -> tuple[bool, ...]:
        return tuple(
            math.isfinite(v) and (a is None or math.isfinite(a))
            for v, a in zip(self.values, self.analytic)
        )

    @property
    def ok(self) -> bool:
        return all(self.finite)


def _integrability_integrand(i: int):
    def f(p):
        return p[:, i] ** 2 + p.sum(axis=1) - p[:, i]
    return f


def check_integrability(m: MergerMeasureSet) -> IntegrabilityReport:
    values, analytic = [], []
    for i, q in enumerate(m.q_measures):
        values.append(q.integrate(_integrability_integrand(i)))
        tag = q.family_tag
        if tag and tag.get("kind") == "beta":
            n = tag["explicit_atoms"]
            explicit = float(np.dot(q.weights[:n], _integrability_integrand(i)(q.points[:n])))
            total = explicit
            for comp in tag["components"]:
                if comp["coordinate"] == i:
                    # int u^2 * u^-2 Lambda(du) = total Lambda mass
                    total += comp["mass"]
                else:
                    total += beta_first_moment(comp)
            analytic.append(total)
        else:
            analytic.append(None)
    return IntegrabilityReport(tuple(values), tuple(analytic))


@dataclasses.dataclass(frozen=True)
class ProjectedMeasure:
    """Single-type pair ``(rho, Qbar)`` for one type, plus dropped mass."""

    rho: float
    q: FiniteMeasureOnCube
    dropped_mass: float


def _check_type(m: MergerMeasureSet, i: int):
    if not (0 <= i < m.d):
        raise IndexError(f"type index {i} out of range for d={m.d}")


def project_measure(m: MergerMeasureSet, i: int) -> ProjectedMeasure:
    """
    The type ``i`` projected single-type coalescent data.

    ``Qbar_{->i}`` is the pushforward of ``Q_{->i}`` under ``s -> s_i``.
    Atoms with ``s_i = 0`` involve no type ``i`` block; their weight is
    reported as ``dropped_mass`` instead of being kept as an atom at 0.
    """
    _check_type(m, i)
    q, dropped = m.q_measures[i].coordinate(i)
    return ProjectedMeasure(float(m.rho_pair[i]), q, dropped)


def kill_measure(m: MergerMeasureSet, i: int) -> tuple[float, FiniteMeasureOnCube]:
    """
    Killing data for the type ``i`` projected coalescent.

    Returns ``(r_i, W_i)`` where ``W_i`` is the pushforward of
    ``sum_{j != i} Q_{->j}`` under ``s -> s_i`` (atoms at 0 dropped since
    they kill nothing) and ``r_i`` is the mean per-block removal rate
    ``int u W_i(du) + sum_{j != i} rho_{i->j}``.
    """
    _check_type(m, i)
    parts = [m.q_measures[j].coordinate(i)[0] for j in range(m.d) if j != i]
    w = FiniteMeasureOnCube.empty(1)
    for p in parts:
        w = w + p
    r = w.integrate(lambda p: p[:, 0]) + m.out_rate(i)
    return float(r), w


# -- single-type decomposition ----------------------------------------------

def single_type_decompose(atoms: Iterable) -> tuple[float, FiniteMeasureOnCube]:
    """
    Split a finite measure ``Lambda`` on ``[0, 1]`` into ``(rho, Q)`` with
    ``Lambda = rho delta_0 + s^-2 Q``.

    ``atoms`` is an iterable of ``(weight, s)`` with ``s`` in ``[0, 1]``.
    """
    rho = 0.0
    w_out, s_out = [], []
    for w, s in atoms:
        s = float(s)
        if w < 0 or not (0 <= s <= 1):
            raise ConfigError("Lambda atoms need w >= 0 and s in [0, 1]")
        if s == 0:
            rho += float(w)
        else:
            q_w = float(w) / s / s
            if not math.isfinite(q_w):
                raise ConfigError(f"atom at s={s!r} is too close to 0 to rescale")
            w_out.append(q_w)
            s_out.append(s)
    return rho, FiniteMeasureOnCube(1, np.array(w_out), np.array(s_out).reshape(-1, 1))


def single_type_compose(rho: float, q: FiniteMeasureOnCube) -> list[tuple[float, float]]:
    """Inverse of :func:`single_type_decompose`."""
    if q.d != 1:
        raise ValueError("single-type composition needs a measure on [0, 1]")
    out = [(float(rho), 0.0)] if rho > 0 else []
    out += [(float(w * s[0] ** 2), float(s[0])) for w, s in zip(q.weights, q.points)]
    return out


# -- continuous-state branching local rates ----------------------------------

def csbp_local_rates(p: CsbpParams, x: Sequence[float],
                     convention: str = "feller") -> MergerMeasureSet:
    """
    Local multitype Lambda-coalescent rates induced by a CSBP at population
    vector ``x``.

    ``rho_pair[i] = beta_i / x_i`` and ``Q_{->i}`` is the pushforward of
    ``nu_i`` under ``r -> r / (x + r)`` coordinatewise. The colour-change
    rate follows ``convention``:

    * ``"feller"``: ``rho_{j->i} = kappa_{j->i} x_j / x_i``
    * ``"printed"``: ``rho_{j->i} = kappa_{i->j} x_i / x_j``
    """
    d = p.d
    x = np.asarray(x, dtype=float)
    if x.shape != (d,):
        raise ConfigError(f"population vector needs {d} coordinates")
    if np.any(x <= 0):
        raise ValueError("population coordinates must be positive")
    k = np.asarray(p.kappa, dtype=float)
    rc = np.zeros((d, d))
    for j in range(d):
        for i in range(d):
            if i == j:
                continue
            if convention == "feller":
                rc[j, i] = k[j, i] * x[j] / x[i]
            elif convention == "printed":
                rc[j, i] = k[i, j] * x[i] / x[j]
            else:
                raise ConfigError(f"unknown colour-change convention {convention!r}")
    rp = np.asarray(p.beta, dtype=float) / x
    qs = []
    for i in range(d):
        kept = []
        for w, r in p.nu[i]:
            r = np.asarray(r, dtype=float)
            s = r / (x + r)
            if np.any(s > 0):
                kept.append((w, s))
        qs.append(FiniteMeasureOnCube.from_atoms(d, kept))
    return MergerMeasureSet(d, rc, rp, tuple(qs))


def csbp_from_config(family: dict, d: int) -> tuple[CsbpParams, list[float], str]:
    """
    Parse a ``csbp-local`` family block::

        {"kind": "csbp-local", "beta": [...], "kappa": [[...], ...],
         "nu": [[{"weight": w, "r": [...]}, ...], ...],
         "x": [...], "convention": "feller"}
    """
    allowed = {"kind", "beta", "kappa", "nu", "x", "convention"}
    _require(set(family) <= allowed, f"unknown csbp fields: {sorted(set(family) - allowed)}")
    for key in ("beta", "kappa", "x"):
        _require(key in family, f"csbp-local family needs {key!r}")
    nu_cfg = family.get("nu", [[] for _ in range(d)])
    _require(len(nu_cfg) == d and len(family["beta"]) == d and len(family["x"]) == d,
             f"csbp-local lists must have length {d}")
    nu = []
    for atoms in nu_cfg:
        row = []
        for a in atoms:
            _require(isinstance(a, dict) and set(a) == {"weight", "r"},
                     "nu atoms are {'weight': w, 'r': [...]}")
            row.append((float(a["weight"]), tuple(float(v) for v in a["r"])))
        nu.append(tuple(row))
    params = CsbpParams(
        tuple(float(b) for b in family["beta"]),
        tuple(tuple(float(v) for v in row) for row in family["kappa"]),
        tuple(nu),
    )
    x = [float(v) for v in family["x"]]
    _require(all(v > 0 for v in x), "population vector must be positive")
    return params, x, family.get("convention", "feller")
