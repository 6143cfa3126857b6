"""Command-line front end: coefficient evaluation, sweeps, series,
full-problem verification, and regularization self-checks.

Single-run commands emit a versioned JSON record; `sweep` emits CSV with the
fixed header `e,C_family1,C_family2,min_delta1_1,min_delta1_2,status_1,status_2`.
A plain-text key=value config file can pre-set any flag (flags win).  Exit
codes: 0 success, 1 validation error, 2 computation failure.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import os
import sys
import tempfile
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from . import __version__
from .coefficient import compute_C, sweep_e
from .errors import RtbpError, ValidationError
from .levi_civita import (
    action_angle_from_state,
    angle_consistency_check,
    frequencies,
    integrate_k_flow,
    k_value,
    lc_forward,
    lc_inverse,
    state_from_action_angle,
    symplecticity_defect,
)
from .perturbation import ResonantFamily, canonical_families
from .series import leading_coefficient
from .verifier import extrapolate_C, monodromy, refine_periodic_orbit

SCHEMA_VERSION = 1
_DEFAULT_MU_LIST = (1e-4, 3e-5, 1e-5, 3e-6)
_CSV_HEADER = [
    "e",
    "C_family1",
    "C_family2",
    "min_delta1_1",
    "min_delta1_2",
    "status_1",
    "status_2",
]


@dataclass
class ResultRecord:
    """Serializable record of one CLI invocation."""

    schema_version: int
    command: str
    inputs: dict
    outputs: dict
    status: str
    timings: dict = field(default_factory=dict)
    version: str = __version__


def _full_precision(obj):
    """Round-trip-lossless rendering: floats carry 17 significant digits."""
    if isinstance(obj, dict):
        return {k: _full_precision(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_full_precision(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        return float(f"{float(obj):.17g}")
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.ndarray):
        return _full_precision(obj.tolist())
    if isinstance(obj, complex):
        return {"re": _full_precision(obj.real), "im": _full_precision(obj.imag)}
    return obj


def _record_json(record: ResultRecord) -> str:
    return json.dumps(_full_precision(asdict(record)), indent=2, sort_keys=True)


def _emit(text: str, output: str | None):
    if output is None or output == "-":
        sys.stdout.write(text + "\n")
    else:
        with open(output, "w") as fh:
            fh.write(text + "\n")


class _Parser(argparse.ArgumentParser):
    """argparse with exit code 1 on usage/validation errors."""

    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(1)


def _parse_float_list(text: str):
    try:
        values = [float(v) for v in text.split(",") if v.strip() != ""]
    except ValueError as exc:
        raise ValidationError(f"bad number list {text!r}") from exc
    return values


def _family_args(sp):
    sp.add_argument("--p", type=int, required=True, help="resonance numerator p")
    sp.add_argument("--q", type=int, required=True, help="resonance denominator q")
    sp.add_argument(
        "--direction",
        choices=("direct", "retrograde"),
        default="direct",
        help="sense of circulation relative to the frame",
    )


def build_parser() -> _Parser:
    parser = _Parser(prog="rtbp-resonance", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    common = {"--output": dict(default=None, help="output file (default stdout)")}

    sp = sub.add_parser("coeff", parents=[], help="stability coefficient of both families")
    _family_args(sp)
    sp.add_argument("--e", type=float, required=True, help="eccentricity in (0, 1)")
    sp.add_argument("--tol", type=float, default=1e-10, help="quadrature tolerance")
    sp.add_argument("--config", default=None)
    sp.add_argument("--output", **common["--output"])

    sp = sub.add_parser("sweep", help="CSV sweep of C over an eccentricity grid")
    _family_args(sp)
    sp.add_argument("--e-grid", default=None, help="comma-separated eccentricities")
    sp.add_argument("--e-min", type=float, default=None)
    sp.add_argument("--e-max", type=float, default=None)
    sp.add_argument("--e-step", type=float, default=None)
    sp.add_argument("--tol", type=float, default=1e-10)
    sp.add_argument("--jobs", type=int, default=0, help="worker processes (0 = all cores)")
    sp.add_argument("--config", default=None)
    sp.add_argument("--output", **common["--output"])

    sp = sub.add_parser("series", help="leading series coefficient of both families")
    _family_args(sp)
    sp.add_argument("--e", type=float, default=None, help="optionally evaluate c*e^m here")
    sp.add_argument("--config", default=None)
    sp.add_argument("--output", **common["--output"])

    sp = sub.add_parser("verify", help="monodromy verification against the quadrature")
    _family_args(sp)
    sp.add_argument("--e", type=float, required=True)
    sp.add_argument("--family", choices=("1", "2", "both"), default="both")
    sp.add_argument("--mu-list", default=",".join(repr(m) for m in _DEFAULT_MU_LIST))
    sp.add_argument("--corrector-tol", type=float, default=1e-10)
    sp.add_argument("--tol", type=float, default=1e-10, help="quadrature tolerance")
    sp.add_argument("--cache-dir", default=None, help="cache directory for verification runs")
    sp.add_argument("--config", default=None)
    sp.add_argument("--output", **common["--output"])

    sp = sub.add_parser("regularize", help="Levi-Civita self-checks at mu = 0")
    sp.add_argument("--jacobi-constant", type=float, default=-1.5)
    sp.add_argument("--angular-momentum", type=float, default=0.3, help="G (twice h)")
    sp.add_argument("--action", type=float, default=0.8, help="action L")
    sp.add_argument("--config", default=None)
    sp.add_argument("--output", **common["--output"])

    return parser


def _inject_config(argv):
    """Expand `--config FILE` into flags placed before the explicit flags.

    The file holds one `key = value` pair per line (# comments allowed); keys
    match the long option names.  Injected flags precede the command line
    ones, so explicit flags override the file.
    """
    if "--config" not in argv:
        return argv
    i = argv.index("--config")
    if i + 1 >= len(argv):
        return argv
    path = argv[i + 1]
    injected = []
    with open(path) as fh:
        for line in fh:
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValidationError(f"bad config line {line!r} in {path}")
            key, value = (part.strip() for part in line.split("=", 1))
            injected += [f"--{key}", value]
    # Keep the subcommand first, then config-derived flags, then explicit ones.
    return argv[:1] + injected + argv[1:]


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def _family_record(f: ResonantFamily) -> dict:
    return {
        "p": f.p,
        "q": f.q,
        "e": f.e,
        "n_l": f.n_l,
        "n_g": f.n_g,
        "direction": f.direction,
    }


def cmd_coeff(args) -> int:
    t0 = time.perf_counter()
    families = canonical_families(args.p, args.q, args.e, args.direction)
    outputs = {"families": []}
    for f in families:
        res = compute_C(f, args.tol)
        lead = leading_coefficient(f)
        outputs["families"].append(
            {
                "family": _family_record(f),
                "C": res.C,
                "C1": res.C1,
                "C2": res.C2,
                "nodes": res.nodes,
                "err_estimate": res.err_estimate,
                "min_delta1": res.min_delta1,
                "leading_exponent": lead.exponent,
                "leading_coefficient": lead.value,
            }
        )
    record = ResultRecord(
        schema_version=SCHEMA_VERSION,
        command="coeff",
        inputs={"p": args.p, "q": args.q, "e": args.e, "direction": args.direction, "tol": args.tol},
        outputs=outputs,
        status="ok",
        timings={"seconds": time.perf_counter() - t0},
    )
    _emit(_record_json(record), args.output)
    return 0


def _resolve_grid(args):
    if args.e_grid is not None:
        return _parse_float_list(args.e_grid)
    if args.e_min is None and args.e_max is None and args.e_step is None:
        return []
    if args.e_min is None or args.e_max is None or args.e_step is None:
        raise ValidationError("--e-min, --e-max and --e-step must be given together")
    if args.e_step <= 0.0:
        raise ValidationError("--e-step must be positive")
    n = int(math.floor((args.e_max - args.e_min) / args.e_step + 1e-9)) + 1
    return [args.e_min + i * args.e_step for i in range(max(0, n))]


def cmd_sweep(args) -> int:
    grid = _resolve_grid(args)
    if any(not 0.0 < e < 1.0 for e in grid):
        raise ValidationError("eccentricity grid must lie in (0, 1)")
    # Validate the family parameters up front (empty grids skip the workers).
    ResonantFamily(args.p, args.q, 0.5, 0, 0, args.direction)
    jobs = args.jobs if args.jobs > 0 else (os.cpu_count() or 1)
    if grid and jobs > 1:
        with ProcessPoolExecutor(max_workers=min(jobs, 2 * len(grid))) as pool:
            rows = sweep_e(args.p, args.q, args.direction, grid, args.tol, map_fn=pool.map)
    else:
        rows = sweep_e(args.p, args.q, args.direction, grid, args.tol)

    def fmt(v):
        return "" if v is None else f"{v:.17g}"

    out = sys.stdout if args.output in (None, "-") else open(args.output, "w", newline="")
    try:
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(_CSV_HEADER)
        for row in rows:
            writer.writerow(
                [
                    f"{row.e:.17g}",
                    fmt(row.C_family1),
                    fmt(row.C_family2),
                    fmt(row.min_delta1_1),
                    fmt(row.min_delta1_2),
                    row.status_1,
                    row.status_2,
                ]
            )
    finally:
        if out is not sys.stdout:
            out.close()
    if rows and all(r.status_1 != "ok" and r.status_2 != "ok" for r in rows):
        return 2
    return 0


def cmd_series(args) -> int:
    t0 = time.perf_counter()
    # Validate e only when given (the leading coefficient itself is e-free).
    probe_e = args.e if args.e is not None else 0.5
    families = canonical_families(args.p, args.q, probe_e, args.direction)
    outputs = {"families": []}
    for f in families:
        lead = leading_coefficient(f)
        entry = {
            "family": _family_record(f) | {"e": args.e},
            "leading_exponent": lead.exponent,
            "leading_coefficient": lead.value,
        }
        if args.e is not None:
            entry["leading_term"] = lead.value * args.e**lead.exponent
        outputs["families"].append(entry)
    record = ResultRecord(
        schema_version=SCHEMA_VERSION,
        command="series",
        inputs={"p": args.p, "q": args.q, "e": args.e, "direction": args.direction},
        outputs=outputs,
        status="ok",
        timings={"seconds": time.perf_counter() - t0},
    )
    _emit(_record_json(record), args.output)
    return 0


def _cache_path(cache_dir: str, key: dict) -> str:
    digest = hashlib.sha256(
        json.dumps(_full_precision(key), sort_keys=True).encode()
    ).hexdigest()
    return os.path.join(cache_dir, f"{digest}.json")


def _cache_store(path: str, text: str):
    os.makedirs(os.path.dirname(path), exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=os.path.dirname(path), suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)  # atomic: readers never observe partial records
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _verify_family(f: ResonantFamily, mu_list, corrector_tol, quad_tol) -> dict:
    per_mu = []
    good = []
    for mu in mu_list:
        try:
            rep = monodromy(refine_periodic_orbit(f, mu, corrector_tol))
            per_mu.append({"mu": mu, "C_estimate": rep.C_estimate, "status": "ok"})
            good.append((mu, rep.C_estimate))
        except RtbpError as exc:
            per_mu.append({"mu": mu, "C_estimate": None, "status": f"corrector-divergence: {exc}"})
    entry = {"family": _family_record(f), "per_mu": per_mu}
    if len(good) >= 2:
        A = np.column_stack([np.ones(len(good)), np.sqrt([m for m, _ in good])])
        coef, *_ = np.linalg.lstsq(A, np.array([c for _, c in good]), rcond=None)
        C_fit = float(coef[0])
        C_quad = compute_C(f, quad_tol).C
        entry.update(
            {
                "extrapolated_C": C_fit,
                "fit_residual": float(np.max(np.abs(A @ coef - [c for _, c in good]))),
                "C_quadrature": C_quad,
                "relative_error": abs(C_fit - C_quad) / abs(C_quad),
                "status": "ok",
            }
        )
    else:
        entry.update({"extrapolated_C": None, "status": "corrector-divergence"})
    return entry


def cmd_verify(args) -> int:
    t0 = time.perf_counter()
    mu_list = _parse_float_list(args.mu_list)
    if not mu_list:
        raise ValidationError("--mu-list must contain at least one value")
    families = canonical_families(args.p, args.q, args.e, args.direction)
    selected = {"1": [families[0]], "2": [families[1]], "both": list(families)}[args.family]

    key = {
        "command": "verify",
        "families": [_family_record(f) for f in selected],
        "mu_list": mu_list,
        "corrector_tol": args.corrector_tol,
        "quad_tol": args.tol,
    }
    cache_path = _cache_path(args.cache_dir, key) if args.cache_dir else None
    if cache_path and os.path.exists(cache_path):
        with open(cache_path) as fh:
            text = fh.read().rstrip("\n")
        _emit(text, args.output)
        record = json.loads(text)
        return 0 if record.get("status") == "ok" else 2

    outputs = {"families": [
        _verify_family(f, mu_list, args.corrector_tol, args.tol) for f in selected
    ]}
    all_failed = all(e["status"] != "ok" for e in outputs["families"])
    record = ResultRecord(
        schema_version=SCHEMA_VERSION,
        command="verify",
        inputs=key | {"e": args.e, "direction": args.direction},
        outputs=outputs,
        status="corrector-divergence" if all_failed else "ok",
        timings={"seconds": time.perf_counter() - t0},
    )
    text = _record_json(record)
    if cache_path:
        _cache_store(cache_path, text)
    _emit(text, args.output)
    return 2 if all_failed else 0


def regularization_checks(C: float, G: float, L: float) -> dict:
    """Run the Levi-Civita self-check battery; returns per-check reports."""
    if G == 0.0:
        raise ValidationError("action-angle chart invalid at G = 0")
    if G + 2.0 * C >= 0.0:
        raise ValidationError(f"condition G + 2C < 0 violated (G={G}, C={C})")
    if L <= 0.0 or abs(G) >= 2.0 * L:
        raise ValidationError("need L > 0 and |G| < 2L")

    checks = {}
    rng = np.random.default_rng(20260823)

    defect = max(
        symplecticity_defect(
            state_from_action_angle(
                L, G, float(rng.uniform(-math.pi, math.pi)), float(rng.uniform(0, 2 * math.pi)), C
            ),
            0.0,
        )
        for _ in range(20)
    )
    checks["symplecticity"] = {"max_defect": defect, "tolerance": 1e-9, "ok": defect <= 1e-9}

    s = state_from_action_angle(L, G, 0.7, 0.4, C)
    freq_l, freq_g = frequencies(L, G, C)
    tau_span = 10.0 * 2.0 * math.pi / freq_l
    taus, states = integrate_k_flow(s, 0.0, tau_span, 2001, tol=1e-13)
    K0 = k_value(states[0], 0.0)
    G0 = states[0].angular_momentum_G
    k_drift = max(abs(k_value(st, 0.0) - K0) for st in states)
    g_drift = max(abs(st.angular_momentum_G - G0) for st in states)
    checks["conservation"] = {
        "K_drift": k_drift,
        "G_drift": g_drift,
        "tolerance": 1e-11,
        "ok": max(k_drift, g_drift) <= 1e-11,
    }

    aa = action_angle_from_state(s, C)
    rt_cart = lc_inverse(lc_forward(lc_inverse(s, 0.0), 0.0, C_J=C), 0.0)
    rt_err = max(
        abs(a - b) for a, b in zip(rt_cart.as_array(), lc_inverse(s, 0.0).as_array())
    )
    act_err = max(abs(aa.L - L), abs(aa.G - G))
    ang_err = max(abs(aa.l - 0.7), abs(aa.g - 0.4))
    checks["round_trip"] = {
        "map_error": rt_err,
        "action_error": act_err,
        "angle_error": ang_err,
        "ok": rt_err <= 1e-12 and act_err <= 1e-10 and ang_err <= 1e-8,
    }

    sigma = math.copysign(1.0, G)
    aas = [action_angle_from_state(st, C) for st in states]
    ls = np.unwrap([a.l for a in aas])
    pair = np.unwrap([a.g + sigma * a.l / 2.0 for a in aas])
    gs = pair - sigma * ls / 2.0
    slope_l = float(np.polyfit(taus, ls, 1)[0])
    slope_g = float(np.polyfit(taus, gs, 1)[0])
    checks["frequencies"] = {
        "dl_dtau_error": abs(slope_l - freq_l),
        "dg_dtau_error": abs(slope_g - freq_g),
        "tolerance": 1e-8,
        "ok": max(abs(slope_l - freq_l), abs(slope_g - freq_g)) <= 1e-8,
    }

    grid = np.linspace(0.0, 2.0 * math.pi, 201)
    r_cycle = angle_consistency_check(
        [state_from_action_angle(L, G, l, 0.4 - sigma * l / 2.0, C) for l in grid], C
    )
    th_cycle = angle_consistency_check(
        [state_from_action_angle(L, G, 0.7, 0.4 + dg, C) for dg in grid], C
    )
    cyc_err = max(
        abs(r_cycle.delta_l - 2.0 * math.pi),
        abs(r_cycle.delta_pair),
        abs(th_cycle.delta_l),
        abs(th_cycle.delta_pair - 2.0 * math.pi),
    )
    checks["cycles"] = {
        "r_cycle": [r_cycle.delta_l, r_cycle.delta_pair],
        "theta_cycle": [th_cycle.delta_l, th_cycle.delta_pair],
        "tolerance": 1e-8,
        "ok": cyc_err <= 1e-8,
    }
    return checks


def cmd_regularize(args) -> int:
    t0 = time.perf_counter()
    checks = regularization_checks(args.jacobi_constant, args.angular_momentum, args.action)
    all_ok = all(c["ok"] for c in checks.values())
    record = ResultRecord(
        schema_version=SCHEMA_VERSION,
        command="regularize",
        inputs={
            "jacobi_constant": args.jacobi_constant,
            "angular_momentum": args.angular_momentum,
            "action": args.action,
        },
        outputs={"checks": checks},
        status="ok" if all_ok else "check-failed",
        timings={"seconds": time.perf_counter() - t0},
    )
    _emit(_record_json(record), args.output)
    return 0 if all_ok else 2


_DISPATCH = {
    "coeff": cmd_coeff,
    "sweep": cmd_sweep,
    "series": cmd_series,
    "verify": cmd_verify,
    "regularize": cmd_regularize,
}


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        argv = _inject_config(argv)
        args = parser.parse_args(argv)
        return _DISPATCH[args.command](args)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 0
    except ValidationError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 1
    except RtbpError as exc:
        sys.stderr.write(f"computation failed: {exc}\n")
        return 2
    except OSError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
