"""Command-line entry point: ``multicoal <subcommand> ...``."""
from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import logging
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import analysis, arrays, builtin, verification
from .measures import SCHEMA_VERSION, ConfigError, FiniteMeasureOnCube, load_measure_set
from .rates import TableTooLarge, merger_rate, transition_table
from .simulator import (
    JumpChain, RngSpec, TypedPartition, lump, simulate_labelled,
)

log = logging.getLogger("multicoal")

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2
SUITES = ("drift", "consistency", "jensen", "exchange", "inequalities", "recursion",
          "engines", "coupling")


class UsageError(Exception):
    """Bad arguments or configuration (exit code 2)."""


@dataclasses.dataclass(frozen=True)
class RunConfig:
    """Everything that determines a run; embedded in every JSON output."""

    command: str
    config: str | None
    seed: int
    out: str | None
    options: dict

    @classmethod
    def from_args(cls, ns: argparse.Namespace) -> RunConfig:
        opts = {k: v for k, v in vars(ns).items()
                if k not in {"command", "config", "seed", "out", "log_level", "handler"}}
        seed = ns.seed if hasattr(ns, "seed") else 0
        env = os.environ.get("MULTICOAL_SEED")
        if env is not None:
            try:
                seed = int(env, 0)
            except ValueError:
                raise UsageError(f"MULTICOAL_SEED must be an integer, got {env!r}") from None
        return cls(ns.command, getattr(ns, "config", None), int(seed or 0),
                   getattr(ns, "out", None), opts)

    def to_json(self) -> dict:
        return {"command": self.command, "config": self.config, "seed": self.seed,
                "out": self.out, "options": self.options}


# -- helpers ------------------------------------------------------------------

def _int_list(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _float_list(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _load(rc: RunConfig):
    if rc.config is None:
        raise UsageError("--config is required")
    path = Path(rc.config)
    if not path.exists():
        stem = path.name.removesuffix(".json")
        if stem in builtin.NAMES:
            return builtin.example(stem)
        raise UsageError(f"config file {rc.config} not found")
    return load_measure_set(path)


def _counts(values, d: int, what: str = "--n0") -> tuple[int, ...]:
    if values is None:
        raise UsageError(f"{what} is required")
    if len(values) != d or any(v < 0 for v in values):
        raise UsageError(f"{what} needs {d} non-negative integers")
    return tuple(values)


def _emit_json(rc: RunConfig, result) -> None:
    doc = {"schema_version": SCHEMA_VERSION, "run": rc.to_json(), "result": result}
    text = json.dumps(doc, indent=2, allow_nan=False)
    if rc.out:
        Path(rc.out).write_text(text + "\n")
    else:
        sys.stdout.write(text + "\n")


def _open_csv(rc: RunConfig):
    if rc.out:
        f = open(rc.out, "w", newline="")
    else:
        f = sys.stdout
    return f, csv.writer(f, lineterminator="\n")


def _fmt(x: float) -> str:
    return repr(float(x))


# -- subcommands ------------------------------------------------------------------

def cmd_simulate(rc: RunConfig) -> int:
    m = _load(rc)
    o = rc.options
    n0 = _counts(o["n0"], m.d)
    if sum(n0) < 1:
        raise UsageError("--n0 needs at least one block")
    if o["replicas"] < 1:
        raise UsageError("--replicas must be positive")
    f, w = _open_csv(rc)
    try:
        w.writerow(["replica", "time", "event_kind", "target_type"]
                   + [f"k_{j + 1}" for j in range(m.d)] + [f"n_{j + 1}" for j in range(m.d)])
        chain = JumpChain(m) if o["engine"] == "jump" else None
        for r in range(o["replicas"]):
            spec = RngSpec(rc.seed, r)
            if chain is not None:
                traj = chain.run(n0, o["t_max"], spec)
            else:
                traj = simulate_labelled(m, TypedPartition.singletons(n0), o["t_max"], spec)
            w.writerow([r, _fmt(0.0), "initial", ""] + [0] * m.d + list(n0))
            for e in traj.events:
                w.writerow([r, _fmt(e.time), e.kind, e.target + 1] + list(e.k)
                           + list(lump(e.state)))
    finally:
        if f is not sys.stdout:
            f.close()
    return EXIT_OK


def cmd_rates(rc: RunConfig) -> int:
    m = _load(rc)
    o = rc.options
    if o["table"]:
        n = _counts(o["n"] if o["n"] is not None else o["b"], m.d, "--n")
        tab = transition_table(m, n, o["cap"])
        f, w = _open_csv(rc)
        try:
            w.writerow([f"k_{j + 1}" for j in range(m.d)]
                       + ["target_type", "multiplicity", "rate", "class_rate"])
            for k, i, mult, r, cr in zip(tab.ks.tolist(), tab.targets.tolist(),
                                         tab.multiplicity, tab.rates, tab.class_rates):
                w.writerow(list(k) + [i + 1, mult, _fmt(r), _fmt(cr)])
        finally:
            if f is not sys.stdout:
                f.close()
        return EXIT_OK
    b = _counts(o["b"], m.d, "--b")
    k = _counts(o["k"], m.d, "--k")
    if o["target"] is None or not (1 <= o["target"] <= m.d):
        raise UsageError(f"--target must be in 1..{m.d}")
    try:
        val = merger_rate(m, b, k, o["target"] - 1)
    except ValueError as e:
        raise UsageError(str(e)) from e
    if rc.out:
        Path(rc.out).write_text(_fmt(val) + "\n")
    else:
        print(_fmt(val))
    return EXIT_OK


def cmd_cdi(rc: RunConfig) -> int:
    m = _load(rc)
    rep = analysis.classify_cdi(m, q_max=rc.options["q_max"], margin=rc.options["margin"])
    _emit_json(rc, rep.to_json())
    return EXIT_OK


def cmd_flow(rc: RunConfig) -> int:
    m = _load(rc)
    o = rc.options
    times = np.asarray(o["t_grid"], dtype=float)
    if len(times) == 0 or np.any(times < 0):
        raise UsageError("--t-grid needs non-negative times")
    x0_text = o["x0"].strip().lower()
    if x0_text in {"inf", "infinity"}:
        try:
            vals = analysis.descent_profile(m, times, math.inf, form=o["form"])
        except analysis.DivergentIntegral as e:
            raise UsageError(str(e)) from e
        header, rows = ["t", "w"], [[t, v] for t, v in zip(times, vals)]
    else:
        x0 = _float_list(o["x0"])
        if len(x0) != m.d:
            raise UsageError(f"--x0 needs {m.d} values or 'inf'")
        if o["descent"]:
            vals = analysis.descent_profile(m, times, float(sum(x0)), form=o["form"])
            header, rows = ["t", "w"], [[t, v] for t, v in zip(times, vals)]
        else:
            if np.any(np.diff(times) < 0):
                raise UsageError("--t-grid must be sorted for the flow")
            vals = analysis.flow_profile(m, times, x0)
            header = ["t"] + [f"v_{j + 1}" for j in range(m.d)]
            rows = [[t] + list(v) for t, v in zip(times, vals)]
    f, w = _open_csv(rc)
    try:
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(x) for x in row])
    finally:
        if f is not sys.stdout:
            f.close()
    return EXIT_OK


def _load_representation(path: str):
    try:
        cfg = json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise UsageError(f"representation file {path} not found") from None
    except json.JSONDecodeError as e:
        raise UsageError(f"{path}: invalid JSON: {e}") from None
    allowed = {"schema_version", "ell", "b_max", "rho", "J"}
    if not isinstance(cfg, dict) or not set(cfg) <= allowed or "ell" not in cfg:
        raise UsageError(f"representation needs 'ell' and only fields {sorted(allowed)}")
    d = len(cfg["ell"])
    try:
        J = FiniteMeasureOnCube.from_atoms(d, [(w, tuple(s)) for w, s in cfg.get("J", [])])
    except (TypeError, ValueError) as e:
        raise UsageError(f"bad J atoms: {e}") from e
    return cfg["ell"], int(cfg.get("b_max", 16)), cfg.get("rho", [0.0] * d), J


def cmd_arrays(rc: RunConfig) -> int:
    if rc.config is None:
        raise UsageError("--config is required")
    ell, b_max, rho, J = _load_representation(rc.config)
    try:
        a = arrays.array_from_representation(ell, b_max, rho, J)
    except (ValueError, AssertionError) as e:
        raise UsageError(str(e)) from e
    check = arrays.check_recursion_array(a)
    result = {"ell": list(a.index.ell), "b_max": b_max,
              "recursion": {"max_residual": check.max_residual,
                            "b": check.b, "k": check.k,
                            "j": None if check.j is None else check.j + 1}}
    try:
        rep = arrays.recover_representation(a)
        order = rc.options["moment_order"]
        result["recovered"] = {
            "rho": rep.rho.tolist(),
            "rho_error_proxy": [None if math.isnan(x) else x for x in rep.rho_error],
            "minimal": [list(x) for x in a.index.minimal],
            "compatibility_residual": rep.compatibility_residual(order),
        }
    except arrays.RecursionViolated as e:
        result["recovered"] = None
        result["error"] = str(e)
    _emit_json(rc, result)
    return EXIT_OK


def _default_partition(n0):
    """Singletons, except the first two elements of the largest type form a block."""
    d = len(n0)
    top = int(np.argmax(n0))
    blocks = [([(i, p)], i) for i in range(d) for p in range(n0[i])]
    sigma = {}
    if n0[top] >= 3:
        blocks = [b for b in blocks if b[0][0] not in {(top, 0), (top, 1)}]
        blocks.append(([(top, 0), (top, 1)], top))
        sigma = {(top, 1): (top, 2), (top, 2): (top, 1)}
    return TypedPartition.from_blocks(d, blocks), sigma


def cmd_verify(rc: RunConfig) -> int:
    o = rc.options
    suite = o["suite"]
    seed, replicas = rc.seed, o["replicas"]
    reports = []
    if suite == "recursion":
        if rc.config:
            sets = [_load(rc)]
        else:
            rng = RngSpec(seed, 0).generator()
            sets = [verification.random_measure_set(rng) for _ in range(100)]
        reports.append(verification.recursion_suite(sets, seed=seed))
    elif suite == "inequalities":
        sets = [_load(rc)] if rc.config else None
        reports += verification.inequality_suite(seed, o["pairs"], measure_sets=sets)
    else:
        m = _load(rc)
        n0 = _counts(o["n0"], m.d) if o["n0"] is not None else (2,) * m.d
        t = o["t"]
        if suite == "drift":
            reports.append(verification.mc_drift_check(m, n0, o["h"], replicas, seed))
        elif suite == "engines":
            reports.append(verification.engine_equivalence_check(m, n0, t, replicas, seed))
        elif suite == "consistency":
            p0 = TypedPartition.singletons(n0)
            ground = sorted(p0.ground)
            if len(ground) < 2:
                raise UsageError("consistency needs at least two elements")
            reports.append(verification.consistency_check(m, p0, ground[:-1], t, replicas, seed))
        elif suite == "exchange":
            p0, sigma = _default_partition(n0)
            reports.append(verification.exchangeability_check(m, p0, sigma, t, replicas, seed))
        elif suite == "jensen":
            reports.append(verification.jensen_bound_check(m, n0, o["t_grid"], replicas, seed))
        elif suite == "coupling":
            i = o["type"] - 1
            if not (0 <= i < m.d):
                raise UsageError(f"--type must be in 1..{m.d}")
            reports.append(verification.coupling_bound_check(m, i, sum(n0), t, replicas, seed))
    for r in reports:
        log.info("%s: statistic=%.6g threshold=%.6g %s", r.name, r.statistic, r.threshold,
                 "PASS" if r.passed else "FAIL")
    _emit_json(rc, [r.to_json() for r in reports])
    return EXIT_OK if all(r.passed for r in reports) else EXIT_FAIL


def cmd_examples(rc: RunConfig) -> int:
    out = Path(rc.options["out_dir"])
    out.mkdir(parents=True, exist_ok=True)
    for name in builtin.NAMES:
        path = out / f"{name}.json"
        path.write_text(json.dumps(builtin.example_config(name), indent=2) + "\n")
        print(path)
    return EXIT_OK


# -- parser ------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="multicoal", description=__doc__)
    p.add_argument("--log-level", default="WARNING",
                   choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    sub = p.add_subparsers(dest="command", required=True, metavar="SUBCOMMAND")

    def common(sp, seed=False, out=True):
        sp.add_argument("--log-level", default=argparse.SUPPRESS,
                        choices=["DEBUG", "INFO", "WARNING", "ERROR"])
        sp.add_argument("--config", help="measure-set JSON (or a built-in example name)")
        if seed:
            sp.add_argument("--seed", type=int, default=0)
        if out:
            sp.add_argument("--out", help="output path (default stdout)")

    s = sub.add_parser("simulate", help="simulate trajectories to CSV")
    common(s, seed=True)
    s.add_argument("--n0", type=_int_list, required=True)
    s.add_argument("--t-max", type=float, required=True)
    s.add_argument("--replicas", type=int, default=1)
    s.add_argument("--engine", choices=["jump", "atomic"], default="jump")
    s.set_defaults(handler=cmd_simulate)

    s = sub.add_parser("rates", help="merger rate or transition table")
    common(s)
    s.add_argument("--b", type=_int_list)
    s.add_argument("--k", type=_int_list)
    s.add_argument("--target", type=int, help="1-based target type")
    s.add_argument("--table", action="store_true", help="emit the transition table at --n")
    s.add_argument("--n", type=_int_list)
    s.add_argument("--cap", type=int, default=10 ** 6)
    s.set_defaults(handler=cmd_rates)

    s = sub.add_parser("cdi", help="coming-down-from-infinity report")
    common(s)
    s.add_argument("--q-max", type=float, default=1e8)
    s.add_argument("--margin", type=float, default=0.1)
    s.set_defaults(handler=cmd_cdi)

    s = sub.add_parser("flow", help="flow or descent profile")
    common(s)
    s.add_argument("--t-grid", type=_float_list, required=True)
    s.add_argument("--x0", required=True, help="comma list, or 'inf' for the descent profile")
    s.add_argument("--descent", action="store_true", help="descent profile from |x0|")
    s.add_argument("--form", choices=analysis.FORMS, default="drift")
    s.set_defaults(handler=cmd_flow)

    s = sub.add_parser("arrays", help="build, check and recover a represented array")
    common(s)
    s.add_argument("--moment-order", type=int, default=4)
    s.set_defaults(handler=cmd_arrays)

    s = sub.add_parser("verify", help="run a verification suite")
    s.add_argument("suite", choices=SUITES)
    common(s, seed=True)
    s.add_argument("--replicas", type=int, default=verification.DEFAULT_REPLICAS)
    s.add_argument("--n0", type=_int_list)
    s.add_argument("--t", type=float, default=1.0)
    s.add_argument("--t-grid", type=_float_list, default=[0.25, 1.0])
    s.add_argument("--h", type=float)
    s.add_argument("--type", type=int, default=1)
    s.add_argument("--pairs", type=int, default=1000)
    s.set_defaults(handler=cmd_verify)

    s = sub.add_parser("examples", help="write the built-in example configs")
    s.add_argument("--out-dir", default=".")
    s.add_argument("--log-level", default=argparse.SUPPRESS,
                   choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    s.set_defaults(handler=cmd_examples)
    return p


def dispatch(argv=None) -> int:
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code) if e.code is not None else EXIT_USAGE
    logging.basicConfig(level=ns.log_level, format="%(levelname)s %(name)s: %(message)s")
    try:
        rc = RunConfig.from_args(ns)
        return ns.handler(rc)
    except (UsageError, ConfigError, TableTooLarge, argparse.ArgumentTypeError) as e:
        print(f"multicoal: error: {e}", file=sys.stderr)
        return EXIT_USAGE


def main() -> None:
    sys.exit(dispatch())


if __name__ == "__main__":
    main()
