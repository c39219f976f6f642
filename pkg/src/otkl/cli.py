"""Command-line front end.

Instances are JSON documents with keys ``q``, ``p`` (weight arrays),
``cost`` (array of arrays) and optional ``reference``. Weights need not be
normalized. Information quantities are in nats unless ``--bits`` is given.

Exit codes: 0 success, 1 verification failure, 2 input error.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import re
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import geometry, oracles
from .channel import solve_ocp
from .errors import OTKLError
from .info_otp import solve_constrained_otp
from .measures import (
    CostMatrix,
    Distribution,
    entropy,
    kl_divergence,
    mutual_information,
    pythagorean_residual,
)
from .transport_lp import (
    complementary_slackness_residual,
    dual_feasibility_violation,
    dual_value,
    solve_otp,
)

COMMANDS = ("otp", "ocp", "cotp", "dual", "identities", "sweep", "verify")
SWEEP_COLUMNS = ("lambda", "r_c", "k_c_lambda", "j_c", "v_lambda", "beta", "info_achieved", "active", "gap")
VERIFY_COLUMNS = ("seed", "check", "passed", "residual")
LN2 = math.log(2.0)

DEFAULT_TOLERANCES = {
    "lp_oracle": 1e-10,
    "strong_duality": 1e-9,
    "complementary_slackness": 1e-9,
    "dual_feasibility": 1e-9,
    "sandwich": 1e-8,
    "endpoint": 1e-6,
    "law_of_cosines": 1e-10,
    "kl_minus": 1e-10,
    "pythagorean": 1e-10,
    "dual_chain": 1e-8,
    "identities": 1e-10,
}


class InputError(Exception):
    """Malformed instance or arguments; maps to exit code 2."""


@dataclass
class Instance:
    q: Distribution
    p: Distribution
    cost: CostMatrix
    reference: Distribution | None = None


@dataclass
class RunConfig:
    command: str
    input_path: str | None = None
    lam: float | None = None
    lambda_grid: tuple[float, float, int] | None = None
    output_path: str | None = None
    seed: int = 0
    count: int = 100
    bits: bool = False
    tolerances: dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise InputError(f"unknown command {self.command!r}")
        if self.lam is not None and self.lambda_grid is not None:
            raise InputError("--lambda and --grid are mutually exclusive")


def fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x) + 0.0
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return format(x, ".12g")


def _line_of(text: str, key: str) -> int:
    m = re.search(r'"%s"\s*:' % re.escape(key), text)
    return text.count("\n", 0, m.start()) + 1 if m else 1


def load_instance(source: str) -> Instance:
    """Parse an instance from a file path, or from inline JSON if ``source`` starts with ``{``."""
    if source.lstrip().startswith("{"):
        text, name = source, "<inline>"
    else:
        try:
            text, name = Path(source).read_text(), source
        except OSError as exc:
            raise InputError(f"{source}: cannot read: {exc.strerror}") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"{name}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    if not isinstance(doc, dict):
        raise InputError(f"{name}:1: top level must be an object with keys q, p, cost")
    for key in ("q", "p", "cost"):
        if key not in doc:
            raise InputError(f"{name}:1: missing key {key!r}")

    def build(key, kind):
        try:
            return kind(np.asarray(doc[key], dtype=float))
        except (OTKLError, ValueError, TypeError) as exc:
            raise InputError(f"{name}:{_line_of(text, key)}: bad {key!r}: {exc}") from None

    q, p, cost = build("q", Distribution), build("p", Distribution), build("cost", CostMatrix)
    if cost.shape != (q.space_size, p.space_size):
        raise InputError(
            f"{name}:{_line_of(text, 'cost')}: cost shape {cost.shape} does not match "
            f"len(q)={q.space_size}, len(p)={p.space_size}"
        )
    ref = build("reference", Distribution) if doc.get("reference") is not None else None
    return Instance(q, p, cost, ref)


def _need_lambda(cfg: RunConfig) -> float:
    if cfg.lam is None:
        raise InputError(f"{cfg.command} needs --lambda")
    if cfg.lam < 0 or math.isnan(cfg.lam):
        raise InputError(f"--lambda must be non-negative, got {cfg.lam}")
    return cfg.lam


def _info(x: float, bits: bool) -> float:
    return x / LN2 if bits else x


def _unit(bits: bool) -> str:
    return "bits" if bits else "nats"


def _vector(a) -> str:
    return "[" + ", ".join(fmt(v) for v in np.asarray(a).ravel()) + "]"


def _cmd_otp(inst: Instance, cfg: RunConfig, out) -> int:
    sol = solve_otp(inst.q, inst.p, inst.cost)
    f, g = sol.potentials
    print(f"K_c = {fmt(sol.value)}", file=out)
    print("plan =", file=out)
    for row in sol.plan.mass:
        print("  " + _vector(row), file=out)
    print(f"f = {_vector(f)}", file=out)
    print(f"g = {_vector(g)}", file=out)
    print(f"pivots = {sol.iterations}", file=out)
    return 0


def _cmd_ocp(inst: Instance, cfg: RunConfig, out) -> int:
    lam = _need_lambda(cfg)
    sol = solve_ocp(inst.q, inst.cost, lam)
    print(f"R_c = {fmt(sol.value)}", file=out)
    print(f"beta = {fmt(sol.beta)}", file=out)
    print(f"I = {fmt(_info(sol.info, cfg.bits))} {_unit(cfg.bits)}", file=out)
    print(f"output_marginal = {_vector(sol.output_marginal.mass)}", file=out)
    return 0


def _cmd_cotp(inst: Instance, cfg: RunConfig, out) -> int:
    lam = _need_lambda(cfg)
    sol = solve_constrained_otp(inst.q, inst.p, inst.cost, lam)
    print(f"K_c(lambda) = {fmt(sol.value)}", file=out)
    print(f"active = {fmt(sol.active)}", file=out)
    print(f"beta = {fmt(sol.beta)}", file=out)
    print(f"I = {fmt(_info(sol.info, cfg.bits))} {_unit(cfg.bits)}", file=out)
    return 0


def _cmd_dual(inst: Instance, cfg: RunConfig, out) -> int:
    sol = solve_otp(inst.q, inst.p, inst.cost)
    j = dual_value(sol, inst.q, inst.p)
    print(f"J_c = {fmt(j)}", file=out)
    print(f"K_c = {fmt(sol.value)}", file=out)
    print(f"duality_gap = {fmt(sol.value - j)}", file=out)
    print(f"dual_infeasibility = {fmt(dual_feasibility_violation(*sol.potentials, inst.cost.cost))}", file=out)
    return 0


def _cmd_identities(inst: Instance, cfg: RunConfig, out) -> int:
    if inst.q.space_size != inst.p.space_size:
        raise InputError("identities need q and p on the same space")
    r = inst.reference if inst.reference is not None else Distribution.uniform(inst.q.space_size)
    try:
        cos = geometry.law_of_cosines(inst.p, inst.q, r)
        minus = geometry.kl_minus_decomposition(inst.p, inst.q, r)
    except OTKLError as exc:
        raise InputError(str(exc)) from None
    plan = solve_otp(inst.q, inst.p, inst.cost).plan
    residuals = {
        "law_of_cosines": cos.residual,
        "kl_minus": minus.difference_form.residual,
        "symmetrized": minus.symmetrized.residual,
        "pythagorean": pythagorean_residual(plan),
    }
    tol = cfg.tolerances.get("identities", DEFAULT_TOLERANCES["identities"])
    ok = True
    for name, value in residuals.items():
        passed = value <= tol
        ok &= passed
        print(f"{name} residual = {fmt(value)} {'ok' if passed else 'FAIL'}", file=out)
    return 0 if ok else 1


def _grid(cfg: RunConfig) -> np.ndarray:
    if cfg.lambda_grid is None:
        raise InputError("sweep needs --grid START STOP STEPS")
    start, stop, steps = cfg.lambda_grid
    if steps < 1 or start < 0 or stop < start:
        raise InputError("grid needs 0 <= START <= STOP and STEPS >= 1")
    return np.linspace(start, stop, steps)


def sweep_rows(inst: Instance, grid, bits: bool = False) -> list[list[str]]:
    lp = solve_otp(inst.q, inst.p, inst.cost)
    j = dual_value(lp, inst.q, inst.p)
    r0 = solve_ocp(inst.q, inst.cost, 0.0).value
    rows = []
    for lam in grid:
        ocp = solve_ocp(inst.q, inst.cost, lam)
        cotp = solve_constrained_otp(inst.q, inst.p, inst.cost, lam, lp=lp)
        active = math.isfinite(ocp.beta)
        rows.append(
            [
                fmt(_info(lam, bits)),
                fmt(ocp.value),
                fmt(cotp.value),
                fmt(j),
                fmt(r0 - ocp.value),
                fmt(ocp.beta),
                fmt(_info(ocp.info, bits)),
                fmt(active),
                fmt(cotp.value - ocp.value),
            ]
        )
    return rows


def _write_csv(header, rows, cfg: RunConfig, out) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    if cfg.output_path:
        Path(cfg.output_path).write_text(buf.getvalue())
    else:
        out.write(buf.getvalue())


def _cmd_sweep(inst: Instance, cfg: RunConfig, out) -> int:
    _write_csv(SWEEP_COLUMNS, sweep_rows(inst, _grid(cfg), cfg.bits), cfg, out)
    return 0


_COST_KINDS = ("hamming", "grid_abs", "random_uniform", "translation_invariant_cyclic")


def verify_instance(seed: int, tolerances: dict[str, float]) -> list[tuple[str, bool, float]]:
    """Run one seeded instance through the oracle comparisons and inequality chains."""
    tol = {**DEFAULT_TOLERANCES, **tolerances}
    rng = np.random.default_rng(seed)
    kind = _COST_KINDS[seed % len(_COST_KINDS)]
    nx = int(rng.integers(2, 4))
    ny = nx if kind == "translation_invariant_cyclic" else int(rng.integers(2, 4))
    q, p, c = oracles.generate(oracles.InstanceSpec(nx, ny, seed, kind))
    results = []

    def record(name, residual, passed=None):
        if passed is None:
            passed = residual <= tol[name]
        results.append((name, bool(passed), float(residual)))

    sol = solve_otp(q, p, c)
    brute, _ = oracles.lp_bruteforce(q, p, c)
    record("lp_oracle", abs(sol.value - brute))
    record("strong_duality", abs(sol.value - dual_value(sol, q, p)))
    record("complementary_slackness", complementary_slackness_residual(sol, c))
    record("dual_feasibility", dual_feasibility_violation(*sol.potentials, c.cost))

    lam = float(rng.uniform(0.05, 0.95)) * min(entropy(q), entropy(p))
    r_c = solve_ocp(q, c, lam).value
    k_c = solve_constrained_otp(q, p, c, lam, lp=sol).value
    record("sandwich", r_c - k_c, r_c <= k_c + tol["sandwich"])
    k_end = solve_constrained_otp(q, p, c, min(entropy(q), entropy(p)), lp=sol).value
    record("endpoint", abs(k_end - sol.value))

    # identities on a fresh strictly positive triple
    n = nx
    pt, qt, rt = (Distribution(rng.dirichlet(np.ones(n)) + 1e-3) for _ in range(3))
    record("law_of_cosines", geometry.law_of_cosines(pt, qt, rt).residual)
    record("kl_minus", geometry.kl_minus_decomposition(pt, qt, rt).residual)
    w = rng.dirichlet(np.ones(n * n)).reshape(n, n) + 1e-3
    record("pythagorean", pythagorean_residual(w / w.sum()))

    pp = geometry.PotentialPair(rng.normal(size=n), rng.normal(size=n), rng.uniform(0.1, 2), rng.uniform(0.1, 2), rt)
    cp = rng.random((n, n)) + 0.05
    rep = geometry.epsilon_feasibility(pp, cp)
    lp_pp = solve_otp(pp.q, pp.p, cp)
    j_pp = dual_value(lp_pp, pp.q, pp.p)
    chain = max(rep.j_c_eps - j_pp, j_pp - lp_pp.value)
    record("dual_chain", chain, chain <= tol["dual_chain"])
    return results


def _cmd_verify(cfg: RunConfig, out, err) -> int:
    if cfg.count < 1:
        raise InputError("--count must be >= 1")
    rows, failures = [], []
    for seed in range(cfg.seed, cfg.seed + cfg.count):
        for name, passed, residual in verify_instance(seed, cfg.tolerances):
            rows.append([fmt(seed), name, fmt(passed), fmt(residual)])
            if not passed:
                failures.append(f"FAIL {name} seed={seed} residual={fmt(residual)}")
    _write_csv(VERIFY_COLUMNS, rows, cfg, out)
    for line in failures:
        print(line, file=err)
    print(f"verify: {len(rows) - len(failures)} passed, {len(failures)} failed", file=err)
    return 1 if failures else 0


_HANDLERS = {
    "otp": _cmd_otp,
    "ocp": _cmd_ocp,
    "cotp": _cmd_cotp,
    "dual": _cmd_dual,
    "identities": _cmd_identities,
    "sweep": _cmd_sweep,
}


def run(cfg: RunConfig, out=None, err=None) -> int:
    out = sys.stdout if out is None else out
    err = sys.stderr if err is None else err
    try:
        if cfg.command == "verify":
            return _cmd_verify(cfg, out, err)
        if cfg.input_path is None:
            raise InputError(f"{cfg.command} needs an instance file")
        inst = load_instance(cfg.input_path)
        return _HANDLERS[cfg.command](inst, cfg, out)
    except InputError as exc:
        print(f"error: {exc}", file=err)
        return 2
    except OTKLError as exc:
        print(f"error: {exc}", file=err)
        return 2


def _tolerance(text: str) -> tuple[str, float]:
    key, sep, value = text.partition("=")
    if not sep or key not in DEFAULT_TOLERANCES:
        raise argparse.ArgumentTypeError(f"expected NAME=VALUE with NAME in {sorted(DEFAULT_TOLERANCES)}")
    try:
        return key, float(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad tolerance value {value!r}") from None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="otkl", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        cmd = sub.add_parser(name)
        if name != "verify":
            cmd.add_argument("input", help="instance JSON file, or inline JSON")
        if name in ("ocp", "cotp"):
            cmd.add_argument("--lambda", dest="lam", type=float, help="information budget in nats")
        if name == "sweep":
            cmd.add_argument("--grid", nargs=3, metavar=("START", "STOP", "STEPS"), help="budget grid in nats")
        if name in ("sweep", "verify"):
            cmd.add_argument("--out", help="write CSV here instead of stdout")
        if name == "verify":
            cmd.add_argument("--seed", type=int, default=0)
            cmd.add_argument("--count", type=int, default=100)
        if name in ("verify", "identities"):
            cmd.add_argument("--tol", type=_tolerance, action="append", default=[], metavar="NAME=VALUE")
        cmd.add_argument("--bits", action="store_true", help="print information in bits")
    return parser


def config_from_args(argv=None) -> RunConfig:
    ns = build_parser().parse_args(argv)
    grid = None
    if getattr(ns, "grid", None):
        try:
            start, stop, steps = float(ns.grid[0]), float(ns.grid[1]), int(ns.grid[2])
        except ValueError:
            raise InputError(f"bad --grid {' '.join(ns.grid)}") from None
        grid = (start, stop, steps)
    return RunConfig(
        command=ns.command,
        input_path=getattr(ns, "input", None),
        lam=getattr(ns, "lam", None),
        lambda_grid=grid,
        output_path=getattr(ns, "out", None),
        seed=getattr(ns, "seed", 0),
        count=getattr(ns, "count", 100),
        bits=ns.bits,
        tolerances=dict(getattr(ns, "tol", [])),
    )


def main(argv=None) -> int:
    try:
        cfg = config_from_args(argv)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
