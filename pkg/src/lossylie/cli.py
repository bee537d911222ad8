"""Command-line front end.

Subcommands::

    lossylie evolve    --config run.json --out traj.csv
    lossylie compare   --config run.json [--out traj.csv]
    lossylie spectrum  --config run.json
    lossylie hom-scan  --kappa 1 --gammas 0,0.5,1 --out dip.csv [--resolution 2000]
    lossylie structure --modes 2 [--format json|text]

Exit codes: 0 success, 1 configuration error, 2 numerical failure. Failures
print a single ``error kind=... exit=... message="..."`` line on stderr.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from dataclasses import dataclass, field
from itertools import combinations
from pathlib import Path

import numpy as np

from .errors import ConfigError, NumericalError
from .fock import DensityMatrix, FockBasis, fock_state, mixture, trace_distance
from .liouville import Schedule, SystemParams
from .oracle import IntegratorConfig, Trajectory, integrate_master

SOLVERS = ("oracle", "eigen", "weinorman")
WEIGHT_TOL = 1e-12
AGREEMENT_TOL = 1e-5


def _fmt(x: float) -> str:
    return f"{x:.15g}"


# -- configuration -------------------------------------------------------------


def _schedule(raw, name: str):
    if isinstance(raw, bool):
        raise ConfigError(f"{name}: expected a number or a schedule object")
    if isinstance(raw, (int, float)):
        return Schedule.constant(raw)
    if isinstance(raw, dict):
        extra = set(raw) - {"times", "values"}
        if extra or not {"times", "values"} <= set(raw):
            raise ConfigError(f"{name}: schedule objects need exactly 'times' and 'values'")
        return Schedule(tuple(raw["times"]), tuple(raw["values"]))
    raise ConfigError(f"{name}: expected a number or a schedule object")


def _schedule_list(raw, name: str, length: int):
    if not isinstance(raw, list):
        raise ConfigError(f"{name} must be a list")
    if len(raw) != length:
        raise ConfigError(f"{name} needs {length} entries, got {len(raw)}")
    return tuple(_schedule(v, f"{name}[{i}]") for i, v in enumerate(raw))


def _occupations(raw, n_modes: int, max_total: int, name: str) -> tuple[int, ...]:
    if not isinstance(raw, list) or len(raw) != n_modes:
        raise ConfigError(f"{name}: need a list of {n_modes} occupations")
    if any(not isinstance(v, int) or isinstance(v, bool) or v < 0 for v in raw):
        raise ConfigError(f"{name}: occupations must be nonnegative integers")
    if sum(raw) > max_total:
        raise ConfigError(f"{name}: total excitation {sum(raw)} exceeds max_total={max_total}")
    return tuple(raw)


@dataclass
class RunConfig:
    modes: int
    max_total: int
    params: SystemParams
    initial_state: dict
    t_final: float
    samples: int
    solver: str = "oracle"
    tolerances: IntegratorConfig = field(default_factory=IntegratorConfig)

    @property
    def basis(self) -> FockBasis:
        return FockBasis(self.modes, self.max_total)

    @property
    def time_grid(self) -> np.ndarray:
        return np.linspace(0.0, self.t_final, self.samples)

    def rho0(self) -> DensityMatrix:
        spec = self.initial_state
        if spec["type"] == "fock":
            return fock_state(self.basis, spec["occupations"])
        return mixture(self.basis, spec["terms"])

    @classmethod
    def from_dict(cls, raw: dict) -> "RunConfig":
        if not isinstance(raw, dict):
            raise ConfigError("config must be a JSON object")
        known = {
            "modes", "max_total", "sigma", "gamma", "kappa", "initial_state",
            "t_final", "samples", "solver", "tolerances",
        }  # fmt: skip
        unknown = set(raw) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        missing = {"modes", "max_total", "sigma", "gamma", "kappa", "initial_state", "t_final", "samples"} - set(raw)
        if missing:
            raise ConfigError(f"missing config keys: {sorted(missing)}")

        n, n_p = raw["modes"], raw["max_total"]
        for key, v, lo in (("modes", n, 1), ("max_total", n_p, 0), ("samples", raw["samples"], 1)):
            if not isinstance(v, int) or isinstance(v, bool) or v < lo:
                raise ConfigError(f"{key} must be an integer >= {lo}")
        params = SystemParams(
            n,
            _schedule_list(raw["sigma"], "sigma", n),
            _schedule_list(raw["gamma"], "gamma", n),
            _schedule_list(raw["kappa"], "kappa", n - 1),
        )

        state = raw["initial_state"]
        if not isinstance(state, dict) or state.get("type") not in ("fock", "mixture"):
            raise ConfigError("initial_state.type must be 'fock' or 'mixture'")
        if state["type"] == "fock":
            init = {"type": "fock", "occupations": _occupations(state.get("occupations"), n, n_p, "initial_state")}
        else:
            terms = state.get("terms")
            if not isinstance(terms, list) or not terms:
                raise ConfigError("mixture needs a non-empty 'terms' list")
            parsed = []
            for i, term in enumerate(terms):
                if not isinstance(term, dict) or "weight" not in term:
                    raise ConfigError(f"terms[{i}] needs 'weight' and 'occupations'")
                w = term["weight"]
                if not isinstance(w, (int, float)) or isinstance(w, bool) or w < 0:
                    raise ConfigError(f"terms[{i}].weight must be a nonnegative number")
                parsed.append((float(w), _occupations(term.get("occupations"), n, n_p, f"terms[{i}]")))
            total = math.fsum(w for w, _ in parsed)
            if abs(total - 1.0) > WEIGHT_TOL:
                raise ConfigError(f"mixture weights sum to {total!r}, expected 1")
            init = {"type": "mixture", "terms": parsed}

        t_final = raw["t_final"]
        if not isinstance(t_final, (int, float)) or isinstance(t_final, bool):
            raise ConfigError("t_final must be a number")
        if not (math.isfinite(t_final) and t_final >= 0):
            raise ConfigError("t_final must be finite and nonnegative")
        if raw["samples"] > 1 and t_final == 0:
            raise ConfigError("t_final must be positive when samples > 1")

        solver = raw.get("solver", "oracle")
        if solver not in SOLVERS + ("all",):
            raise ConfigError(f"solver must be one of {SOLVERS + ('all',)}")

        tol = raw.get("tolerances", {}) or {}
        if not isinstance(tol, dict) or set(tol) - {"rtol", "atol", "max_steps", "initial_step"}:
            raise ConfigError("tolerances accepts rtol, atol, max_steps, initial_step")
        return cls(n, n_p, params, init, float(t_final), raw["samples"], solver, IntegratorConfig(**tol))


def load_config(path) -> RunConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc}") from exc
    return RunConfig.from_dict(raw)


# -- solvers -------------------------------------------------------------------


def run_solver(name: str, cfg: RunConfig) -> Trajectory:
    rho0, t = cfg.rho0(), cfg.time_grid
    if name == "oracle":
        return integrate_master(cfg.params, rho0, t, cfg.tolerances)
    if name == "eigen":
        from .eigensolver import evolve_eigendecomposition

        if not cfg.params.is_constant:
            raise ConfigError("the eigen solver needs constant parameters")
        return evolve_eigendecomposition(cfg.params, rho0, t)
    if name == "weinorman":
        from .weinorman import evolve_weinorman

        return evolve_weinorman(cfg.params, rho0, t, cfg.tolerances)
    raise ConfigError(f"unknown solver {name!r}")


def applicable_solvers(cfg: RunConfig) -> tuple[list[str], dict]:
    """Solvers that can run ``cfg``, plus reasons for the ones that cannot."""
    skipped = {}
    if not cfg.params.is_constant:
        skipped["eigen"] = "time-dependent parameters"
    if cfg.modes != 2:
        skipped["weinorman"] = "implemented for two modes only"
    return [s for s in SOLVERS if s not in skipped], skipped


def trajectory_csv(traj: Trajectory, n_modes: int) -> str:
    pairs = list(combinations(range(1, n_modes + 1), 2))
    header = ["t", "trace"] + [f"n_{k}" for k in range(1, n_modes + 1)]
    header += [f"G_{i}{j}" if n_modes < 10 else f"G_{i}_{j}" for i, j in pairs] + ["purity"]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    numbers = [traj.numbers(k) for k in range(1, n_modes + 1)]
    coinc = [traj.coincidences(i, j) for i, j in pairs]
    traces = traj.traces()
    for r, (t, rho) in enumerate(zip(traj.times, traj.states)):
        row = [t, traces[r].real] + [n[r] for n in numbers] + [g[r] for g in coinc] + [rho.purity()]
        w.writerow([_fmt(float(x)) for x in row])
    return buf.getvalue()


def compare_trajectories(trajs: dict) -> dict:
    out = {}
    for a, b in combinations(trajs, 2):
        d = max(trace_distance(x, y) for x, y in zip(trajs[a].states, trajs[b].states))
        out[f"{a}-{b}"] = d
    return out


def sidecar_path(out: Path) -> Path:
    return out.with_name(out.name + ".compare.json")


def cmd_evolve(cfg: RunConfig, out: Path | None, stdout=sys.stdout) -> int:
    if cfg.solver != "all":
        traj = run_solver(cfg.solver, cfg)
        text = trajectory_csv(traj, cfg.modes)
        if out is None:
            stdout.write(text)
        else:
            out.write_text(text)
        return 0

    names, skipped = applicable_solvers(cfg)
    trajs = {name: run_solver(name, cfg) for name in names}
    distances = compare_trajectories(trajs)
    worst = max(distances.values(), default=0.0)
    report = {
        "solvers": names,
        "skipped": skipped,
        "max_trace_distance": {k: float(v) for k, v in distances.items()},
        "tolerance": AGREEMENT_TOL,
        "agree": bool(worst <= AGREEMENT_TOL),
    }
    report_text = json.dumps(report, indent=2, sort_keys=True) + "\n"
    if out is not None:
        out.write_text(trajectory_csv(trajs["oracle"], cfg.modes))
        sidecar_path(out).write_text(report_text)
    else:
        stdout.write(report_text)
    if worst > AGREEMENT_TOL:
        raise NumericalError(f"solvers disagree: max trace distance {worst:.3e} > {AGREEMENT_TOL:g}")
    return 0


def _complex_list(z) -> list:
    return [[float(np.real(v)), float(np.imag(v))] for v in np.atleast_1d(z)]


def spectrum_report(cfg: RunConfig) -> dict:
    from .eigensolver import heff_spectrum, liouvillian_eigenvalue_multiset, liouvillian_exponents

    if not cfg.params.is_constant:
        raise ConfigError("spectrum needs constant parameters")
    spec = heff_spectrum(cfg.params)
    rows = liouvillian_exponents(spec, cfg.max_total)
    exponents = [
        {"alpha": list(a), "beta": list(b), "value": [v.real, v.imag]} for a, b, v in rows
    ]
    nonzero = [r for r in rows if any(r[0]) or any(r[1])]
    return {
        "lambdas": _complex_list(spec.lambdas),
        "eigenvalue_multiset": _complex_list(liouvillian_eigenvalue_multiset(spec)),
        "ep_condition": float(spec.ep_condition),
        "exponents": exponents,
        "slowest_nonzero_exponent": [nonzero[0][2].real, nonzero[0][2].imag] if nonzero else None,
    }


def hom_scan_csv(kappa: float, gammas, resolution: int = 2000) -> str:
    from .eigensolver import hom_dip

    if not (math.isfinite(kappa) and kappa > 0):
        raise ConfigError("kappa must be positive")
    if resolution < 2:
        raise ConfigError("resolution must be >= 2")
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["gamma_over_kappa", "kappa_t_dip", "Gamma_min", "pt_broken"])
    for g in gammas:
        if not (math.isfinite(g) and g >= 0):
            raise ConfigError(f"loss rate {g!r} must be finite and nonnegative")
        t_dip, g_min = hom_dip(kappa, g, resolution)
        w.writerow([_fmt(g / kappa), _fmt(kappa * t_dip), _fmt(g_min), int(g >= 2 * kappa)])
    return buf.getvalue()


def structure_text(report: dict) -> str:
    d = report["dims"]
    n = report["n_modes"]
    lines = [
        f"quadratic superoperator algebra, N = {n}",
        f"  total       {d['total']:4d}",
        f"  nilpotent   {d['nilpotent']:4d}   (L_i^- R_j^-)",
        f"  abelian     {d['abelian']:4d}   (sum L_k^+ L_k^-, sum R_k^+ R_k^-)",
        f"  sl(N) left  {d['sl_left']:4d}",
        f"  sl(N) right {d['sl_right']:4d}",
        f"  radical spanned by: {', '.join(report['radical_tags'])}",
        f"  closure residual {report['closure_residual']:.3e}",
        f"  jacobi residual  {report['jacobi_residual']:.3e}",
    ]
    return "\n".join(lines) + "\n"


# -- entry point ---------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def _float_list(text: str) -> list[float]:
    try:
        vals = [float(x) for x in text.replace(" ", "").split(",") if x]
    except ValueError as exc:
        raise ConfigError(f"cannot parse number list {text!r}") from exc
    if not vals:
        raise ConfigError("empty number list")
    return vals


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="lossylie", description="Lossy bosonic mode networks in Liouville space.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    e = sub.add_parser("evolve", help="propagate a configured system and write a CSV")
    e.add_argument("--config", required=True)
    e.add_argument("--out", required=True)

    c = sub.add_parser("compare", help="run every applicable solver and report agreement")
    c.add_argument("--config", required=True)
    c.add_argument("--out")

    s = sub.add_parser("spectrum", help="mode eigenvalues and Liouvillian exponents as JSON")
    s.add_argument("--config", required=True)

    h = sub.add_parser("hom-scan", help="closed-form coincidence dip versus loss")
    h.add_argument("--kappa", type=float, required=True)
    h.add_argument("--gammas", type=_float_list, required=True)
    h.add_argument("--out", required=True)
    h.add_argument("--resolution", type=int, default=2000)

    st = sub.add_parser("structure", help="decompose the quadratic superoperator algebra")
    st.add_argument("--modes", type=int, required=True)
    st.add_argument("--format", choices=("json", "text"), default="json")
    return p


def _dispatch(args, stdout) -> int:
    if args.command == "evolve":
        return cmd_evolve(load_config(args.config), Path(args.out), stdout)
    if args.command == "compare":
        cfg = load_config(args.config)
        cfg.solver = "all"
        return cmd_evolve(cfg, Path(args.out) if args.out else None, stdout)
    if args.command == "spectrum":
        stdout.write(json.dumps(spectrum_report(load_config(args.config)), indent=2) + "\n")
        return 0
    if args.command == "hom-scan":
        Path(args.out).write_text(hom_scan_csv(args.kappa, args.gammas, args.resolution))
        return 0
    if args.command == "structure":
        from .structure import decompose

        if args.modes < 1:
            raise ConfigError("--modes must be >= 1")
        report = decompose(args.modes)
        if args.format == "text":
            stdout.write(structure_text(report))
        else:
            stdout.write(json.dumps(report, indent=2) + "\n")
        return 0
    raise ConfigError(f"unknown command {args.command!r}")


def _fail(kind: str, code: int, message: str, stderr) -> int:
    stderr.write(f"error kind={kind} exit={code} message={json.dumps(message)}\n")
    return code


def main(argv=None, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    try:
        args = build_parser().parse_args(argv)
        return _dispatch(args, stdout)
    except ConfigError as exc:
        return _fail(type(exc).__name__, 1, str(exc), stderr)
    except NumericalError as exc:
        return _fail(type(exc).__name__, 2, str(exc), stderr)
    except OSError as exc:
        return _fail(type(exc).__name__, 1, str(exc), stderr)


if __name__ == "__main__":
    sys.exit(main())
