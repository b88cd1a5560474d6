"""
Processing speeds, the coming-down-from-infinity decision, and descent
and flow profiles.

Two normalizations of the total processing speed are supported through
``form``:

``"drift"``
    ``Psi(x) = sum_i rho_ii x_i (x_i - 1) / 2 + sum_i int (<x, s> - 1 + prod_j (1 - s_j)^x_j) Q_{->i}(ds)``;
    at integer ``x`` this is exactly the expected rate of decrease of the
    total number of blocks.

``"quadratic"``
    the same with ``rho_ii x_i^2 / 2`` in place of ``rho_ii x_i (x_i - 1) / 2``;
    this is the asymptotic form whose single-type Kingman value is ``q^2 / 2``.
"""
from __future__ import annotations

import dataclasses
import enum
import functools
import math
import warnings

import numpy as np
from scipy import integrate, optimize, special

from .measures import MergerMeasureSet, beta_first_moment

FORMS = ("drift", "quadratic")


def _check_form(form: str) -> float:
    if form not in FORMS:
        raise ValueError(f"form must be one of {FORMS}, got {form!r}")
    return 1.0 if form == "drift" else 0.0


def _h(x):
    """``exp(-x) - 1 + x`` without cancellation for small ``x``."""
    x = np.asarray(x, dtype=float)
    small = x < 1e-3
    xs = np.where(small, x, 0.0)
    series = xs * xs * (0.5 - xs * (1 / 6 - xs * (1 / 24 - xs / 120)))
    return np.where(small, series, np.expm1(-np.where(small, 1.0, x)) + x)


def _check_q(q):
    q = np.asarray(q, dtype=float)
    if np.any(q < 0) or np.any(np.isnan(q)):
        raise ValueError("processing speeds need q >= 0")
    return q


def _own_coordinate(m: MergerMeasureSet, i: int):
    if not (0 <= i < m.d):
        raise IndexError(f"type {i} out of range for d={m.d}")
    q = m.q_measures[i]
    return q.weights, q.points[:, i]


def psi(m: MergerMeasureSet, i: int, q):
    """``(rho_ii / 2) q^2 + int (e^{-q s_i} - 1 + q s_i) Q_{->i}(ds)``."""
    q = _check_q(q)
    w, s = _own_coordinate(m, i)
    val = 0.5 * m.rho_pair[i] * q ** 2
    if len(w):
        val = val + _h(q[..., None] * s) @ w
    return val if val.ndim else float(val)


def psi_tilde(m: MergerMeasureSet, i: int, q):
    """``rho_ii q (q - 1) / 2 + int (q s_i - 1 + (1 - s_i)^q) Q_{->i}(ds)``."""
    q = _check_q(q)
    w, s = _own_coordinate(m, i)
    val = 0.5 * m.rho_pair[i] * q * (q - 1.0)
    if len(w):
        qq = q[..., None]
        with np.errstate(invalid="ignore", divide="ignore"):
            logp = np.where(qq == 0, 0.0, qq * np.log1p(-s))
        val = val + (qq * s + np.expm1(logp)) @ w
    return val if val.ndim else float(val)


class _PsiData:
    """Pooled atom arrays for evaluating Psi, its gradient and Hessian."""

    def __init__(self, m: MergerMeasureSet, form: str):
        self.c = _check_form(form)
        self.d = m.d
        self.rho = np.asarray(m.rho_pair, dtype=float)
        w, s = m.pooled
        self.w, self.s = w, s
        with np.errstate(divide="ignore"):
            self.log1m = np.log1p(-s)
        rigid = np.any(s >= 1.0, axis=1)
        self.rigid = rigid
        self.w_soft, self.s_soft, self.l_soft = w[~rigid], s[~rigid], self.log1m[~rigid]
        self.w_rigid, self.s_rigid = w[rigid], s[rigid]

    def _kingman(self, x):
        return 0.5 * float(self.rho @ (x * (x - self.c)))

    def value(self, x) -> float:
        """Exact Psi with ``(1 - 1)^0 = 1``."""
        with np.errstate(invalid="ignore"):
            terms = np.where(x[None, :] == 0, 0.0, self.log1m * x[None, :])
        logp = terms.sum(axis=1)
        return self._kingman(x) + float(self.w @ (self.s @ x + np.expm1(logp)))

    # Closure used by the simplex minimization: atoms with some s_j = 1 have
    # their product term set to 0, its infimum as x_j -> 0+.
    def closed_value(self, x) -> float:
        val = self._kingman(x) + float(self.w_rigid @ (self.s_rigid @ x - 1.0))
        if len(self.w_soft):
            val += float(self.w_soft @ (self.s_soft @ x + np.expm1(self.l_soft @ x)))
        return val

    def closed_grad(self, x) -> np.ndarray:
        g = self.rho * (x - 0.5 * self.c) + self.s.T @ self.w
        if len(self.w_soft):
            p = np.exp(self.l_soft @ x)
            g = g + self.l_soft.T @ (self.w_soft * p)
        return g

    def closed_hess(self, x) -> np.ndarray:
        h = np.diag(self.rho)
        if len(self.w_soft):
            p = np.exp(self.l_soft @ x)
            h = h + (self.l_soft * (self.w_soft * p)[:, None]).T @ self.l_soft
        return h


def _psi_data(m: MergerMeasureSet, form: str) -> _PsiData:
    cache = m.__dict__.setdefault("_psi_data", {})
    if form not in cache:
        cache[form] = _PsiData(m, form)
    return cache[form]


def _check_x(x, d: int) -> np.ndarray:
    x = np.asarray(x, dtype=float).reshape(-1)
    if len(x) != d:
        raise ValueError(f"expected {d} coordinates, got {len(x)}")
    if np.any(x < 0) or np.any(np.isnan(x)):
        raise ValueError("coordinates must be non-negative")
    return x


def big_psi(m: MergerMeasureSet, x, form: str = "drift") -> float:
    """Total processing speed at ``x`` (see module docstring for ``form``)."""
    return _psi_data(m, form).value(_check_x(x, m.d))


@dataclasses.dataclass(frozen=True)
class OmegaResult:
    value: float
    argmin: np.ndarray
    gap: float
    iterations: int


def _minimize_on_simplex(data: _PsiData, total: float, tol: float, max_iter: int = 200):
    d = data.d
    f, grad, hess = data.closed_value, data.closed_grad, data.closed_hess
    starts = [np.full(d, total / d)] + [total * np.eye(d)[j] for j in range(d)]
    x = min(starts, key=f)
    fx = f(x)
    gap = math.inf
    it = stall = 0
    for it in range(1, max_iter + 1):
        g = grad(x)
        gap = float(g @ x - total * g.min())
        if gap <= tol * max(1.0, abs(fx)):
            break
        support = x > 0
        free = support.copy()
        free[int(np.argmin(g))] = True
        idx = np.flatnonzero(free)
        p = np.zeros(d)
        if len(idx) > 1:
            k = len(idx)
            kkt = np.zeros((k + 1, k + 1))
            kkt[:k, :k] = hess(x)[np.ix_(idx, idx)]
            kkt[:k, k] = kkt[k, :k] = 1.0
            rhs = np.concatenate([-g[idx], [0.0]])
            sol = np.linalg.lstsq(kkt, rhs, rcond=None)[0]
            p[idx] = sol[:k]
            p[idx] -= p[idx].mean()
        if not (g @ p < -1e-300) or not np.all(np.isfinite(p)):
            # pairwise step: shift mass from the worst support coordinate
            p = np.zeros(d)
            src = np.flatnonzero(support)[int(np.argmax(g[support]))]
            p[int(np.argmin(g))] += 1.0
            p[src] -= 1.0
        neg = p < 0
        alpha_max = float(np.min(-x[neg] / p[neg]))

        def dphi(a):
            return float(grad(np.maximum(x + a * p, 0.0)) @ p)

        if dphi(alpha_max) <= 0:
            alpha = alpha_max
        else:
            alpha = optimize.brentq(dphi, 0.0, alpha_max, xtol=1e-16 * alpha_max,
                                   rtol=4 * np.finfo(float).eps, maxiter=200, disp=False)
        x_new = np.maximum(x + alpha * p, 0.0)
        if alpha == alpha_max:
            x_new[np.flatnonzero(neg)[int(np.argmin(-x[neg] / p[neg]))]] = 0.0
        s = x_new.sum()
        if s > 0:
            x_new *= total / s
        f_new = f(x_new)
        # near the optimum f is flat to rounding; keep following the
        # gradient information as long as the gap still shrinks
        if f_new > fx + 8 * np.finfo(float).eps * max(1.0, abs(fx)) or np.array_equal(x_new, x):
            break
        g_new = grad(x_new)
        gap_new = float(g_new @ x_new - total * g_new.min())
        stall = stall + 1 if gap_new >= gap else 0
        if stall >= 3:
            break
        x, fx = x_new, f_new
    return x, f(x), gap, it


def omega_result(m: MergerMeasureSet, total: float, form: str = "drift",
                 tol: float = 1e-13) -> OmegaResult:
    """
    Infimum of Psi over ``{x >= 0, sum x = total}``, with its minimizer.

    Convexity makes any stationary point global; the Frank-Wolfe gap
    ``<g, x> - total * min g`` bounds the remaining suboptimality and is
    reported as ``gap``.
    """
    if not total >= 0 or math.isinf(total):
        raise ValueError("Omega needs a finite non-negative argument")
    data = _psi_data(m, form)
    if total == 0:
        return OmegaResult(0.0, np.zeros(m.d), 0.0, 0)
    if m.d == 1:
        x = np.array([float(total)])
        return OmegaResult(data.value(x), x, 0.0, 0)
    x, fx, gap, it = _minimize_on_simplex(data, float(total), tol)
    return OmegaResult(fx, x, gap, it)


def omega(m: MergerMeasureSet, total, form: str = "drift") -> float:
    """``min`` (infimum) of Psi over non-negative vectors summing to ``total``."""
    if np.ndim(total):
        return np.array([omega_result(m, float(t), form).value for t in np.ravel(total)]
                        ).reshape(np.shape(total))
    return omega_result(m, float(total), form).value


def phi_flow(m: MergerMeasureSet, x) -> np.ndarray:
    """
    Expected instantaneous change of the number of blocks of each type at
    (real) block counts ``x``.
    """
    x = _check_x(x, m.d)
    d = m.d
    rc = m.rho_change
    out = rc.T @ x - rc.sum(axis=1) * x
    out -= m.rho_pair * x * (x - 1.0) / 2
    for i, q in enumerate(m.q_measures):
        if not len(q):
            continue
        with np.errstate(divide="ignore", invalid="ignore"):
            terms = np.where(x[None, :] == 0, 0.0, np.log1p(-q.points) * x[None, :])
        out[i] -= float(q.weights @ np.expm1(terms.sum(axis=1)))
        # every target's measure removes type-j participants
        out -= x * (q.points.T @ q.weights)
    assert out.shape == (d,)
    return out


class ProcessingSpeeds:
    """Bound processing-speed functionals of one measure set."""

    def __init__(self, m: MergerMeasureSet, form: str = "drift"):
        _check_form(form)
        self.m = m
        self.form = form

    def psi(self, i: int, q):
        return psi(self.m, i, q)

    def psi_tilde(self, i: int, q):
        return psi_tilde(self.m, i, q)

    def big_psi(self, x) -> float:
        return big_psi(self.m, x, self.form)

    def omega(self, total):
        return omega(self.m, total, self.form)

    def phi(self, x) -> np.ndarray:
        return phi_flow(self.m, x)


# -- coming down from infinity ------------------------------------------------

class Verdict(str, enum.Enum):
    COMES_DOWN = "ComesDown"
    STAYS_INFINITE = "StaysInfinite"
    INCONCLUSIVE = "Inconclusive"


@dataclasses.dataclass(frozen=True)
class TypeVerdict:
    verdict: Verdict
    shortcut: str | None
    evidence: dict

    def to_json(self) -> dict:
        return {"verdict": self.verdict.value, "shortcut": self.shortcut,
                "evidence": self.evidence}


@dataclasses.dataclass(frozen=True)
class CdiReport:
    per_type: tuple[TypeVerdict, ...]

    @property
    def overall(self) -> Verdict:
        vs = [t.verdict for t in self.per_type]
        if all(v is Verdict.COMES_DOWN for v in vs):
            return Verdict.COMES_DOWN
        if any(v is Verdict.STAYS_INFINITE for v in vs):
            return Verdict.STAYS_INFINITE
        return Verdict.INCONCLUSIVE

    def to_json(self) -> dict:
        return {"overall": self.overall.value,
                "per_type": [t.to_json() for t in self.per_type]}


def _beta_psi_part(comp: dict, q: float) -> float:
    """``mass * int (e^{-qu} - 1 + qu) u^-2 Beta(a, b)(du)``, on a log scale."""
    a, b, mass = comp["a"], comp["b"], comp["mass"]
    lb = special.betaln(a, b)

    def f(y):
        u = math.exp(-y)
        # u^-2 * u^(a-1) (1-u)^(b-1) / B(a,b) * u  (du = -u dy)
        logdens = (a - 2.0) * math.log(u) + (b - 1.0) * math.log1p(-u) - lb if u < 1 else -math.inf
        if logdens == -math.inf:
            return 0.0
        return float(_h(q * u)) * math.exp(logdens)

    split = max(math.log(q), 0.0) if q > 0 else 0.0
    upper = split + 60.0 / a + 40.0
    pieces = [(0.0, split), (split, upper)] if split > 0 else [(0.0, upper)]
    total = 0.0
    for lo, hi in pieces:
        val, _ = integrate.quad(f, lo, hi, limit=400, epsabs=0.0, epsrel=1e-10)
        total += val
    return mass * total


def continuous_psi(m: MergerMeasureSet, i: int, q: float) -> float:
    """
    ``psi_i`` of the continuous family a measure was discretized from:
    explicit atoms plus exact integrals of its Beta components.
    Falls back to the atomic ``psi_i`` for purely atomic measures.
    """
    qm = m.q_measures[i]
    tag = qm.family_tag
    if not (tag and tag.get("kind") == "beta"):
        return psi(m, i, q)
    n = tag["explicit_atoms"]
    s = qm.points[:n, i]
    val = 0.5 * m.rho_pair[i] * q * q + float(_h(q * s) @ qm.weights[:n])
    for comp in tag["components"]:
        if comp["coordinate"] == i and comp["mass"] > 0:
            val += _beta_psi_part(comp, q)
    return val


def _own_first_moment(m: MergerMeasureSet, i: int) -> tuple[float, bool]:
    """``(int s_i Q_{->i}(ds), psi_i identically zero)`` using continuous families."""
    qm = m.q_measures[i]
    tag = qm.family_tag
    if tag and tag.get("kind") == "beta":
        n = tag["explicit_atoms"]
        s = qm.points[:n, i]
        first = float(qm.weights[:n] @ s)
        zero = not np.any((s > 0) & (qm.weights[:n] > 0))
        for comp in tag["components"]:
            if comp["coordinate"] == i and comp["mass"] > 0:
                first += beta_first_moment(comp)
                zero = False
        return first, zero
    s = qm.points[:, i]
    return float(qm.weights @ s), not np.any(s > 0)


def classify_cdi(m: MergerMeasureSet, q_max: float = 1e8, margin: float = 0.1,
                 grid_points: int = 64) -> CdiReport:
    """
    Per-type coming-down verdicts.

    Shortcuts: a Kingman component comes down; ``psi_i = 0`` or a finite
    first moment ``int s_i Q_{->i}`` (so ``psi_i`` grows at most linearly)
    stays infinite. Otherwise the tail exponent of ``psi_i`` is fitted on
    the upper half of a geometric grid on ``[1, q_max]``.
    """
    out = []
    grid = np.geomspace(1.0, q_max, grid_points)
    for i in range(m.d):
        rho = float(m.rho_pair[i])
        if rho > 0:
            out.append(TypeVerdict(Verdict.COMES_DOWN, "kingman_component", {"rho_pair": rho}))
            continue
        first, zero = _own_first_moment(m, i)
        if zero:
            out.append(TypeVerdict(Verdict.STAYS_INFINITE, "psi_identically_zero", {}))
            continue
        if math.isfinite(first):
            out.append(TypeVerdict(Verdict.STAYS_INFINITE, "finite_first_moment",
                                   {"first_moment": first}))
            continue
        vals = np.array([continuous_psi(m, i, float(q)) for q in grid])
        upper = slice(grid_points // 2, None)
        gamma, logc = np.polyfit(np.log(grid[upper]), np.log(vals[upper]), 1)
        integral = float(integrate.trapezoid(grid / vals, np.log(grid)))
        evidence = {"tail_exponent": float(gamma), "prefactor": float(math.exp(logc)),
                    "integral_1_to_qmax": integral, "q_max": q_max, "margin": margin}
        hints = [2.0 - c["a"] for c in m.q_measures[i].family_tag["components"]
                 if c["coordinate"] == i and c["mass"] > 0]
        if hints:
            evidence["analytic_exponent"] = max(hints)
        if gamma > 1 + margin:
            v = Verdict.COMES_DOWN
        elif gamma < 1 - margin:
            v = Verdict.STAYS_INFINITE
        else:
            v = Verdict.INCONCLUSIVE
        out.append(TypeVerdict(v, None, evidence))
    return CdiReport(tuple(out))


# -- profiles -------------------------------------------------------------

class DivergentIntegral(ValueError):
    """The requested infinite-start profile does not exist numerically."""


def _omega_zero_threshold(om, n: float) -> float:
    """``sup {q in [0, n] : Omega(q) <= 0}`` for convex ``Omega`` with ``Omega(0) = 0``."""
    if om(n) <= 0:
        return n
    eps = 1e-9 * max(1.0, n)
    if om(eps) > 0:
        return 0.0
    lo, hi = eps, n
    return optimize.brentq(om, lo, hi, xtol=1e-14, rtol=4 * np.finfo(float).eps)


def descent_profile(m: MergerMeasureSet, times, n0: float, form: str = "drift") -> np.ndarray:
    """
    ``w_{n0}(t)`` solving ``t = int_{w}^{n0} dq / Omega(q)`` at each time.

    ``n0 = inf`` uses the improper integral; it requires ``rho_ii > 0`` for
    every type, which is what makes the integral converge for an atomic
    measure set.
    """
    _check_form(form)
    times = np.asarray(times, dtype=float)
    if np.any(times < 0):
        raise ValueError("times must be non-negative")
    infinite = math.isinf(n0)
    if infinite:
        if not np.all(m.rho_pair > 0):
            raise DivergentIntegral(
                "the infinite-start profile needs every rho_ii > 0; "
                "int dq / Omega(q) diverges otherwise for atomic measures")
    elif not n0 >= 0:
        raise ValueError("n0 must be non-negative")

    @functools.lru_cache(maxsize=None)
    def om(q):
        return omega(m, q, form)

    def inv(q):
        return 1.0 / om(q)

    if infinite:
        # Omega is eventually positive; find a finite anchor above its zero set
        anchor = 1.0
        while om(anchor) <= 0:
            anchor *= 2
        q_star = _omega_zero_threshold(om, anchor)
        top = math.inf
    else:
        q_star = _omega_zero_threshold(om, float(n0))
        top = float(n0)
        if q_star >= top:
            return np.full(times.shape, float(n0))

    def tail(w):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", integrate.IntegrationWarning)
            return integrate.quad(inv, w, top, limit=400, epsabs=1e-13, epsrel=1e-12)[0]

    out = np.empty(times.shape)
    for idx, t in np.ndenumerate(times):
        if t == 0:
            out[idx] = top
            continue
        # bracket the root in (q_star, top]
        hi = top if not infinite else max(2 * q_star, 1.0)
        if infinite:
            while tail(hi) > t:
                hi *= 2
        gap = hi - q_star
        lo = q_star + gap / 2
        while tail(lo) < t and gap > 1e-14 * max(1.0, q_star):
            gap /= 2
            lo = q_star + gap
        if tail(lo) < t:
            out[idx] = lo
            continue
        out[idx] = optimize.brentq(lambda w: tail(w) - t, lo, hi, xtol=1e-13,
                                   rtol=4 * np.finfo(float).eps)
    return out


def flow_profile(m: MergerMeasureSet, times, x0, rtol: float = 1e-8) -> np.ndarray:
    """Solve ``v' = Phi(v)`` from finite ``x0``; returns ``v`` at each time."""
    x0 = _check_x(x0, m.d)
    times = np.asarray(times, dtype=float)
    if np.any(np.diff(times) < 0) or np.any(times < 0):
        raise ValueError("times must be non-negative and sorted")
    if len(times) == 0:
        return np.zeros((0, m.d))
    t_end = float(times[-1])
    if t_end == 0:
        return np.tile(x0, (len(times), 1))

    def rhs(_t, v):
        return phi_flow(m, np.maximum(v, 0.0))

    sol = integrate.solve_ivp(rhs, (0.0, t_end), x0, method="RK45", t_eval=times,
                              rtol=rtol, atol=1e-10 * max(1.0, float(x0.sum())))
    if not sol.success:
        raise RuntimeError(f"flow integration failed: {sol.message}")
    return sol.y.T
