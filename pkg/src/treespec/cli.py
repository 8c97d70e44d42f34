"""Batch command-line front end.

Seven subcommands drive the library end to end: coupling sweeps and law
fits, Birman-Schwinger trace tables and the eigenvalue correspondence,
transform self-checks, tree bracketing, and the variational bound tables.
Configuration is a flat key=value text file plus repeatable --set overrides;
unknown keys are errors.  Every run writes one CSV (17 significant digits,
header comments carrying the tool version and a config hash) so reruns are
byte-identical; --plot adds an SVG with the data points and fitted line.

Exit codes: 0 success, 1 validation error, 2 solver non-convergence or a
failed numerical check, 3 I/O error.  Failures print one machine-readable
line on stderr: error: kind=<kind> message="...".
"""

from __future__ import annotations

import argparse
import hashlib
import math
import os
import sys
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np

from . import __version__
from .asymptotics import (fit_log_corrected, fit_power_law, sweep_ground_state,
                          variational_bound_exp, variational_bound_hat)
from .birman_schwinger import BSKernelSpec, top_eigenvalue_qe, trace_qe
from .fourier_bessel import SampledFunction, TransformPlan, diagonalization_residual
from .halfline import HalfLineProblem, PotentialSpec, ground_state_weighted
from .trees import build_geometric_tree, dimension_constants
from .treesolve import reduced_ground_state, tree_ground_state

__all__ = ["RunConfig", "main", "run"]

COMMANDS = ("sweep", "fit", "bs-trace", "bs-correspond", "fb-check",
            "tree-bracket", "bounds")


class CliError(Exception):
    kind = "validation"
    code = 1


class SolverError(CliError):
    kind = "solver"
    code = 2


def _float(s: str) -> float:
    try:
        return float(s)
    except ValueError:
        raise CliError(f"not a number: {s!r}")


def _int(s: str) -> int:
    try:
        return int(s)
    except ValueError:
        raise CliError(f"not an integer: {s!r}")


def _float_list(s: str) -> Tuple[float, ...]:
    parts = [p for p in s.split(",") if p.strip()]
    if not parts:
        raise CliError(f"empty list: {s!r}")
    return tuple(_float(p) for p in parts)


def _str(s: str) -> str:
    return s


# key -> (parser, default); None default means "absent unless configured"
_SOLVER_KEYS = {
    "mesh_ratio": (_float, 1.05),
    "truncation_cap": (_float, 1e8),
}
_SCHEMAS: Dict[str, Dict[str, tuple]] = {
    "sweep": {
        "d": (_float, 1.6), "gamma": (_float, 1.2), "c": (_float, 1.0),
        "scale": (_float, 1.0),
        "alpha_min": (_float, 1e-3), "alpha_max": (_float, 1e-1),
        "n_alpha": (_int, 10), "alphas": (_float_list, None),
        **_SOLVER_KEYS,
    },
    "bs-trace": {
        "d": (_float, 1.6), "gamma": (_float, 1.2), "c": (_float, 1.0),
        "e_min": (_float, 1e-4), "e_max": (_float, 1e-1), "n_e": (_int, 5),
    },
    "bs-correspond": {
        "d": (_float, 1.5), "gamma": (_float, 1.2), "c": (_float, 1.0),
        "alphas": (_float_list, (0.2, 0.5, 1.0)), "rank": (_int, 1600),
        **_SOLVER_KEYS,
    },
    "fb-check": {
        "d": (_float, 1.6),
    },
    "tree-bracket": {
        "d": (_float, 1.5), "b": (_int, 2), "gamma": (_float, 1.2),
        "c": (_float, 1.0), "alpha": (_float, 1.0), "height": (_float, 60.0),
        "e_plus": (_float, None), "e_minus": (_float, None),
        "mesh_ratio": (_float, 1.05),
    },
    "bounds": {
        "d": (_float, 1.6), "gamma": (_float, 1.2), "c": (_float, 1.0),
        "alphas": (_float_list, (1e-2, 1e-3)),
        "k": (_float, None), "beta": (_float, None),
        **_SOLVER_KEYS,
    },
}
_SCHEMAS["fit"] = {**_SCHEMAS["sweep"], "law": (_str, "power")}


@dataclass
class RunConfig:
    command: str
    params: dict
    out_dir: str = "."
    plot: bool = False

    @classmethod
    def assemble(cls, command: str, config_path: Optional[str],
                 overrides: List[str], out_dir: str, plot: bool) -> "RunConfig":
        if command not in COMMANDS:
            raise CliError(f"unknown command {command!r}")
        schema = _SCHEMAS[command]
        params = {k: dflt for k, (_, dflt) in schema.items()}
        pairs: List[Tuple[str, str]] = []
        if config_path is not None:
            pairs.extend(_read_config_file(config_path))
        for item in overrides:
            if "=" not in item:
                raise CliError(f"--set expects key=value, got {item!r}")
            k, v = item.split("=", 1)
            pairs.append((k.strip(), v.strip()))
        for k, v in pairs:
            if k not in schema:
                raise CliError(f"unknown config key {k!r} for command {command}")
            params[k] = schema[k][0](v)
        cfg = cls(command, params, out_dir=out_dir, plot=plot)
        cfg.validate()
        return cfg

    def validate(self):
        p = self.params
        if "gamma" in p and p["gamma"] == 2.0:
            raise CliError(
                "envelope exponent gamma = 2 is excluded; need gamma != 2")
        if "d" in p and not 1.0 < p["d"] <= 2.0:
            raise CliError(f"dimension d must lie in (1, 2], got {p['d']}")
        if "gamma" in p and not 1.0 < p["gamma"] <= p.get("d", 2.0):
            raise CliError(
                f"need 1 < gamma <= d, got gamma={p['gamma']} d={p.get('d')}")
        if p.get("c", 1.0) <= 0.0:
            raise CliError("potential constant c must be positive")
        if "b" in p and p["b"] < 2:
            raise CliError(f"branching number must be >= 2, got {p['b']}")
        if "mesh_ratio" in p and not 1.0 < p["mesh_ratio"] < 2.0:
            raise CliError(f"mesh_ratio must lie in (1, 2), got {p['mesh_ratio']}")
        for key in ("alpha_min", "alpha_max", "alpha", "e_min", "e_max",
                    "height", "scale"):
            if key in p and p[key] is not None and p[key] <= 0.0:
                raise CliError(f"{key} must be positive, got {p[key]}")
        for key in ("n_alpha", "n_e"):
            if key in p and p[key] < 2:
                raise CliError(f"{key} must be at least 2, got {p[key]}")
        if p.get("alphas") is not None and any(a <= 0.0 for a in p["alphas"]):
            raise CliError("all couplings must be positive")
        if self.command == "fit":
            if p["law"] not in ("power", "log"):
                raise CliError(f"law must be power or log, got {p['law']!r}")
            n = len(p["alphas"]) if p["alphas"] is not None else p["n_alpha"]
            if n < 5:
                raise CliError("fit needs at least 5 couplings")
        if self.command == "bs-correspond" and p["rank"] < 200:
            raise CliError(f"rank must be at least 200, got {p['rank']}")

    def hash(self) -> str:
        lines = [self.command]
        for k in sorted(self.params):
            v = self.params[k]
            if v is None:
                continue
            if isinstance(v, tuple):
                v = ",".join(repr(float(x)) for x in v)
            lines.append(f"{k}={v!r}")
        digest = hashlib.sha256("\n".join(lines).encode()).hexdigest()
        return digest[:12]


def _read_config_file(path: str) -> List[Tuple[str, str]]:
    pairs = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise CliError(f"{path}:{lineno}: expected key=value")
            k, v = line.split("=", 1)
            pairs.append((k.strip(), v.strip()))
    return pairs


# ---------------------------------------------------------------------------
# output helpers

def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "%d" % int(v)
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return "%.16e" % float(v)


def _write_csv(cfg: RunConfig, header: str, rows: List[str],
               footer: Optional[List[str]] = None) -> str:
    path = os.path.join(cfg.out_dir, f"{cfg.command}.csv")
    lines = [f"# treespec {__version__}",
             f"# command {cfg.command}",
             f"# config {cfg.hash()}",
             header]
    lines.extend(rows)
    lines.extend(footer or [])
    os.makedirs(cfg.out_dir, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
    return path


def _plot_loglog(cfg: RunConfig, x, y, line_x, line_y) -> str:
    import matplotlib
    matplotlib.use("Agg")
    matplotlib.rcParams["svg.hashsalt"] = "treespec"
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(5.0, 3.75))
    ax.loglog(line_x, line_y, "-", color="tab:blue")
    ax.loglog(x, y, "o", color="tab:red", markersize=4)
    path = os.path.join(cfg.out_dir, f"{cfg.command}.svg")
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return path


# ---------------------------------------------------------------------------
# command implementations

def _alpha_grid(p: dict) -> List[float]:
    if p.get("alphas") is not None:
        return [float(a) for a in p["alphas"]]
    if p["alpha_min"] >= p["alpha_max"]:
        raise CliError("alpha_min must be below alpha_max")
    return list(np.geomspace(p["alpha_max"], p["alpha_min"], p["n_alpha"]))


def _run_sweep_report(cfg: RunConfig):
    p = cfg.params
    pot = PotentialSpec.power(p["gamma"], p["c"])
    alphas = _alpha_grid(p)
    family = HalfLineProblem.build(p["d"], alphas[0], pot, scale=p["scale"],
                                   mesh_ratio=p["mesh_ratio"],
                                   truncation_cap=p["truncation_cap"])
    return sweep_ground_state(family, alphas, mesh_ratio=p["mesh_ratio"])


def _cmd_sweep(cfg: RunConfig) -> int:
    report = _run_sweep_report(cfg)
    rows = list(report.csv_rows())
    _write_csv(cfg, rows[0], rows[1:])
    if not all(e.converged for e in report.entries):
        raise SolverError("sweep contains non-converged entries")
    return 0


def _cmd_fit(cfg: RunConfig) -> int:
    p = cfg.params
    report = _run_sweep_report(cfg)
    rows = list(report.csv_rows())
    try:
        if p["law"] == "power":
            expo, resid = fit_power_law(report)
            footer = [f"# fit law=power",
                      f"# exponent {_fmt(expo)}",
                      f"# intercept {_fmt(report.fit_intercept)}",
                      f"# residual {_fmt(resid)}"]
        else:
            rmin, rmax = fit_log_corrected(report, p["gamma"])
            footer = [f"# fit law=log-corrected",
                      f"# exponent {_fmt(report.fit_exponent)}",
                      f"# ratio_min {_fmt(rmin)}",
                      f"# ratio_max {_fmt(rmax)}"]
    except ValueError as exc:
        _write_csv(cfg, rows[0], rows[1:])
        raise SolverError(str(exc))
    _write_csv(cfg, rows[0], rows[1:], footer)
    if cfg.plot:
        pts = report.fit_entries()
        a = np.array([e.alpha for e in pts])
        e1 = np.array([-e.e1 for e in pts])
        if p["law"] == "power":
            line = math.exp(report.fit_intercept) * a ** report.fit_exponent
        else:
            mid = math.sqrt(rmin * rmax)
            line = mid * np.abs(a * np.log(a)) ** report.fit_exponent
        _plot_loglog(cfg, a, e1, a, line)
    if not all(e.converged for e in report.entries):
        raise SolverError("sweep contains non-converged entries")
    return 0


def _cmd_bs_trace(cfg: RunConfig) -> int:
    p = cfg.params
    if p["e_min"] >= p["e_max"]:
        raise CliError("e_min must be below e_max")
    pot = PotentialSpec.power(p["gamma"], p["c"])
    energies = np.geomspace(p["e_min"], p["e_max"], p["n_e"])
    traces = [trace_qe(BSKernelSpec(e, p["d"], pot)) for e in energies]
    rows = ["%.16e,%.16e" % (e, t) for e, t in zip(energies, traces)]
    coef = np.polynomial.polynomial.polyfit(np.log(energies), np.log(traces), 1)
    footer = [f"# slope {_fmt(coef[1])}", f"# intercept {_fmt(coef[0])}"]
    _write_csv(cfg, "e_shift,trace", rows, footer)
    if cfg.plot:
        line = np.exp(coef[0]) * energies ** coef[1]
        _plot_loglog(cfg, energies, traces, energies, line)
    return 0


def _cmd_bs_correspond(cfg: RunConfig) -> int:
    p = cfg.params
    pot = PotentialSpec.power(p["gamma"], p["c"])
    rows = []
    stale = []
    for alpha in p["alphas"]:
        prob = HalfLineProblem.build(p["d"], alpha, pot,
                                     mesh_ratio=p["mesh_ratio"],
                                     truncation_cap=p["truncation_cap"])
        res = ground_state_weighted(prob)
        if res.e1 >= 0.0:
            raise SolverError(f"no bound state at alpha={alpha}")
        if not res.converged:
            stale.append(f"half-line solve at alpha={alpha}")
        mu = top_eigenvalue_qe(BSKernelSpec(-res.e1, p["d"], pot),
                               rank=p["rank"])
        if not mu.converged:
            stale.append(f"eigenvalue at alpha={alpha}")
        rows.append("%.16e,%.16e,%.16e,%.16e"
                    % (alpha, -res.e1, mu.value, mu.value * alpha))
    _write_csv(cfg, "alpha,e_shift,mu,mu_alpha", rows)
    if stale:
        raise SolverError("non-converged: " + "; ".join(stale))
    return 0


def _fb_bump() -> SampledFunction:
    def fn(x):
        return np.exp(-2.0 * (np.asarray(x, dtype=float) - 3.0) ** 2)

    return SampledFunction.from_callable(fn, 0.25, 7.0)


FB_THRESHOLDS = {"isometry_rel": 1e-6, "round_trip_rel": 1e-4,
                 "diag_residual": 1e-4, "p_tail_fraction": 1e-6}


def fb_checks(d: float) -> Dict[str, float]:
    """Transform self-check suite at one dimension; see FB_THRESHOLDS."""
    phi = _fb_bump()
    plan = TransformPlan(d, phi.support)
    vals = phi.interpolate(plan.x_nodes)
    psi = plan.forward_values(phi)
    ex = plan.x_energy(vals)
    ep = plan.p_energy(psi)
    back = plan.inverse_values(psi)
    cd = 0.25 * (d - 1.0) * (d - 3.0)

    def h0(x):
        x = np.asarray(x, dtype=float)
        second = (16.0 * (x - 3.0) ** 2 - 4.0) * phi.fn(x)
        return -second + cd * (1.0 + x) ** -2 * phi.fn(x)

    h0_phi = SampledFunction.from_callable(h0, *phi.support)
    return {
        "isometry_rel": abs(ep - ex) / ex,
        "round_trip_rel": math.sqrt(plan.x_energy(back - vals) / ex),
        "diag_residual": diagonalization_residual(phi, h0_phi, d),
        "p_tail_fraction": plan.tail_fraction(psi),
    }


def _cmd_fb_check(cfg: RunConfig) -> int:
    checks = fb_checks(cfg.params["d"])
    rows = []
    bad = []
    for name, value in checks.items():
        thr = FB_THRESHOLDS[name]
        ok = value <= thr
        rows.append("%s,%.16e,%.16e,%d" % (name, value, thr, ok))
        if not ok:
            bad.append(name)
    _write_csv(cfg, "check,value,threshold,ok", rows)
    if bad:
        raise SolverError("failed checks: " + ", ".join(bad))
    return 0


def _cmd_tree_bracket(cfg: RunConfig) -> int:
    p = cfg.params
    pot = PotentialSpec.power(p["gamma"], p["c"])
    tree = build_geometric_tree(p["d"], p["b"], p["height"])
    consts = dimension_constants(tree)
    e_plus = p["e_plus"] if p["e_plus"] is not None else consts.e_plus
    e_minus = p["e_minus"] if p["e_minus"] is not None else consts.e_minus

    def halfline_e1(scale):
        prob = HalfLineProblem.build(p["d"], p["alpha"], pot, scale=scale,
                                     truncation=tree.truncation_height,
                                     mesh_ratio=p["mesh_ratio"])
        return ground_state_weighted(prob)

    lo = halfline_e1(e_minus)
    hi = halfline_e1(e_plus)
    on_tree = tree_ground_state(tree, p["alpha"], pot,
                                mesh_ratio=p["mesh_ratio"])
    reduced = reduced_ground_state(tree, p["alpha"], pot,
                                   mesh_ratio=p["mesh_ratio"])
    row = "%.16e,%.16e,%.16e,%.16e" % (lo.e1, on_tree.e1, reduced.e1, hi.e1)
    _write_csv(cfg, "e1_minus,e1_tree,e1_reduced,e1_plus", [row])
    for res, name in ((lo, "lower comparison"), (hi, "upper comparison"),
                      (on_tree, "tree"), (reduced, "reduction")):
        if not res.converged:
            raise SolverError(f"{name} solve did not converge")
    if not lo.e1 <= on_tree.e1 <= hi.e1:
        raise SolverError("bracketing inequality violated")
    if abs(on_tree.e1 - reduced.e1) > 1e-5 * abs(on_tree.e1):
        raise SolverError("tree and reduced ground states disagree")
    return 0


def _cmd_bounds(cfg: RunConfig) -> int:
    p = cfg.params
    rows = []
    use_hat = p["gamma"] == p["d"]
    for alpha in p["alphas"]:
        try:
            if use_hat:
                q, const = variational_bound_hat(p["d"], p["c"], alpha,
                                                 beta=p["beta"])
                ceiling = -const * abs(alpha * math.log(alpha)) \
                    ** (2.0 / (2.0 - p["d"]))
                law = "log-corrected"
            else:
                q, const = variational_bound_exp(p["d"], p["gamma"], p["c"],
                                                 alpha, k=p["k"])
                ceiling = -const * alpha ** (2.0 / (2.0 - p["gamma"]))
                law = "power"
        except ValueError as exc:
            raise CliError(str(exc))
        rows.append("%.16e,%s,%.16e,%.16e,%.16e"
                    % (alpha, law, q, const, ceiling))
    _write_csv(cfg, "alpha,law,quotient,bound_constant,ceiling", rows)
    return 0


_DISPATCH: Dict[str, Callable[[RunConfig], int]] = {
    "sweep": _cmd_sweep,
    "fit": _cmd_fit,
    "bs-trace": _cmd_bs_trace,
    "bs-correspond": _cmd_bs_correspond,
    "fb-check": _cmd_fb_check,
    "tree-bracket": _cmd_tree_bracket,
    "bounds": _cmd_bounds,
}


def run(config: RunConfig) -> int:
    """Dispatch a validated configuration; returns the process exit code."""
    return _DISPATCH[config.command](config)


def _error_line(kind: str, message: str) -> str:
    msg = " ".join(str(message).split())
    return f'error: kind={kind} message="{msg}"'


def main(argv: Optional[List[str]] = None) -> int:
    parser = argparse.ArgumentParser(
        prog="treespec",
        description="Weak-coupling spectral experiments on metric trees")
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", metavar="PATH", default=None)
    parser.add_argument("--set", metavar="KEY=VALUE", action="append",
                        default=[], dest="overrides")
    parser.add_argument("--out", metavar="DIR", default=".")
    parser.add_argument("--plot", action="store_true")
    args = parser.parse_args(argv)

    try:
        cfg = RunConfig.assemble(args.command, args.config, args.overrides,
                                 args.out, args.plot)
        return run(cfg)
    except SolverError as exc:
        print(_error_line(exc.kind, exc), file=sys.stderr)
        return exc.code
    except CliError as exc:
        print(_error_line(exc.kind, exc), file=sys.stderr)
        return exc.code
    except ValueError as exc:
        print(_error_line("validation", exc), file=sys.stderr)
        return 1
    except OSError as exc:
        print(_error_line("io", exc), file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
