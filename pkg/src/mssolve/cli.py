"""
Command-line front end.

    mssolve <command> [--scenario FILE] [--out DIR] [--backend {spectral,bie}] [--k K] [--dt DT]

Commands: ``solve-elliptic``, ``solve-stokes``, ``spectrum``, ``evolve`` and
``verify``.  Exit status is 0 on success, 2 on a solver error (including a
failed verification) and 3 on invalid input.  ``MSSOLVE_THREADS`` caps the
number of BLAS threads.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .elliptic import _residual
from .errors import MSSolveError, ParseError, SolverError, ValidationError
from .evolution import _chemical_potential, _flow, _mu_traces, evolve
from .ms_operator import spectrum_table
from .scenario import DEFAULT_SCENARIO, Scenario, parse_scenario
from .sobolev import h_norm, norm_table
from .stokes import SpectralFlowField, energy_identity_residual, stokes_residual
from .verification import run_verification

log = logging.getLogger("mssolve")

EXIT_OK, EXIT_SOLVER, EXIT_INVALID = 0, 2, 3


# output helpers -------------------------------------------------------------------


def _fmt(x) -> str:
    return f"{float(x):.16e}"


def write_csv(path: Path, header, rows, scenario: Scenario):
    """CSV with a provenance comment line, a header row and 17-digit numbers."""
    meta = f"# K={scenario.K} dt={_fmt(scenario.dt)} backend={scenario.backend} version={__version__}"
    lines = [meta, ",".join(header)]
    lines += [",".join(_fmt(v) for v in row) for row in rows]
    path.write_text("\n".join(lines) + "\n")


def write_json(path: Path, payload: dict):
    path.write_text(json.dumps(payload, indent=2, sort_keys=True, default=float) + "\n")


def _grid(n: int) -> np.ndarray:
    return 2 * np.pi * np.arange(n) / n


# commands -------------------------------------------------------------------------


def cmd_solve_elliptic(sc: Scenario, out: Path) -> dict:
    problem = sc.problem()
    h = problem.h0
    mu = _chemical_potential(problem, h, 0.0)
    theta = _grid(max(4 * sc.K, 64))
    mp, mm = mu.trace(theta, 1), mu.trace(theta, -1)
    dp, dm = mu.normal_derivative(theta, 1), mu.normal_derivative(theta, -1)
    write_csv(out / "elliptic.csv", ["theta", "mu_plus", "mu_minus", "dn_mu_plus", "dn_mu_minus", "jump"],
              zip(theta, mp, mm, dp, dm, dp - dm), sc)
    traces = _mu_traces(problem, h, 0.0)
    res = _residual(mu, traces[0], traces[1], problem.data.mu_outer, problem.bc, 512)
    report = {"residual": res, "backend": sc.backend, "jump_max": float(np.max(np.abs(dp - dm)))}
    write_json(out / "elliptic.json", report)
    return report


def cmd_solve_stokes(sc: Scenario, out: Path) -> dict:
    problem = sc.problem()
    flow, data = _flow(problem, problem.h0, 0.0)
    theta = _grid(max(4 * sc.K, 64))
    tr = flow.interface_traces(theta)
    cols = [theta]
    header = ["theta"]
    for key in ("v+", "v-", "t+", "t-"):
        cols += [tr[key].real, tr[key].imag]
        name = key.replace("+", "_plus").replace("-", "_minus")
        header += [name + "_x", name + "_y"]
    cols += [np.real(tr["p+"]), np.real(tr["p-"])]
    header += ["p_plus", "p_minus"]
    write_csv(out / "stokes.csv", header, zip(*cols), sc)
    report = {"residual": stokes_residual(flow, data), "backend": flow.backend,
              "mean_normal_velocity_max": float(np.max(np.abs(flow.normal_velocity_mean(theta))))}
    if isinstance(flow, SpectralFlowField):
        bal = energy_identity_residual(flow, data)
        report["energy_lhs"], report["energy_rhs"], report["energy_relative"] = bal.lhs, bal.rhs, bal.relative
    write_json(out / "stokes.json", report)
    return report


def cmd_spectrum(sc: Scenario, out: Path) -> dict:
    b2 = sc.coefficients.get("b2", 1.0)
    table = spectrum_table(sc.geometry, sc.K, sc.sigma, b2, sc.bc.mu_outer)
    write_csv(out / "spectrum.csv", ["k", "A0", "B0", "B1"], table, sc)
    return {"rows": int(table.shape[0])}


def _real_coefficients(h) -> np.ndarray:
    """``c_0, Re c_1, Im c_1, ..., Re c_K, Im c_K`` of a real field."""
    K = h.K
    pos = h.modes[K + 1:]
    return np.concatenate([[h.modes[K].real], np.column_stack([pos.real, pos.imag]).ravel()])


def cmd_evolve(sc: Scenario, out: Path) -> dict:
    traj, diag = evolve(sc.problem(), estimate_samples=3)
    header = ["t", "c0"] + [f"{p}{k}" for k in range(1, sc.K + 1) for p in ("re", "im")]
    rows = [np.concatenate([[t], _real_coefficients(h)]) for t, h in zip(traj.times, traj.fields)]
    write_csv(out / "trajectory.csv", header, rows, sc)
    write_csv(out / "norms.csv", ["t", "h_half", "h_two", "h_seven_half"], norm_table(traj), sc)
    report = diag.as_dict()
    report["final_h_half"] = h_norm(traj[-1], 0.5)
    write_json(out / "diagnostics.json", report)
    return report


def cmd_verify(sc: Scenario, out: Path) -> dict:
    if sc.geometry.is_circle():
        r0, R = sc.geometry.mean_radius(), sc.geometry.R
    else:
        r0, R = 1.0, 2.0
    results = run_verification(r0, R)
    report = {"r0": r0, "R": R, "all_passed": all(r.passed for r in results),
              "checks": [{k: v for k, v in r.as_dict().items() if k != "seconds"} for r in results]}
    write_json(out / "verify.json", report)
    if not report["all_passed"]:
        raise SolverError("verification failed: " + ", ".join(r.name for r in results if not r.passed))
    return report


COMMANDS = {
    "solve-elliptic": cmd_solve_elliptic,
    "solve-stokes": cmd_solve_stokes,
    "spectrum": cmd_spectrum,
    "evolve": cmd_evolve,
    "verify": cmd_verify,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mssolve", description=__doc__.split("\n\n")[0].strip())
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--scenario", type=Path, default=DEFAULT_SCENARIO, help="YAML scenario file")
    p.add_argument("--out", type=Path, default=None, help="output directory")
    p.add_argument("--backend", choices=("spectral", "bie"), default=None)
    p.add_argument("--k", type=int, default=None, help="Fourier cutoff K")
    p.add_argument("--dt", type=float, default=None, help="time step")
    p.add_argument("-v", "--verbose", action="store_true")
    p.add_argument("--version", action="version", version=__version__)
    return p


def run(command: str, scenario: Scenario, out: Path | None = None) -> int:
    """Run one command and return its exit status."""
    out = Path(out or scenario.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
        COMMANDS[command](scenario, out)
    except (ValidationError, ParseError) as exc:
        log.error("invalid input: %s", exc)
        return EXIT_INVALID
    except SolverError as exc:
        log.error("solver error: %s", exc)
        return EXIT_SOLVER
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        sc = parse_scenario(args.scenario)
        sc = sc.with_overrides(K=args.k, dt=args.dt, backend=args.backend)
    except (ValidationError, ParseError) as exc:
        log.error("invalid scenario: %s", exc)
        return EXIT_INVALID
    except OSError as exc:
        log.error("cannot read scenario: %s", exc)
        return EXIT_INVALID
    except MSSolveError as exc:
        log.error("%s", exc)
        return EXIT_SOLVER
    return run(args.command, sc, args.out)


if __name__ == "__main__":
    sys.exit(main())
