"""Command-line entry point: config parsing, experiment dispatch, emission.

Usage:
    nelson-lab <identity|inequalities|observables|sweep|all>
               --config <path> [--out <dir>] [--format csv|json]
               [--seed <u64>] [--dry-run]

Exit codes: 0 all checks pass, 1 at least one check failed, 2 usage or
config error.  NELSON_LAB_THREADS caps the sweep worker count.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import experiments as ex

SELECTORS = ("identity", "inequalities", "observables", "sweep", "all")

DEFAULTS = {
    "n_max": 6,
    "identity_n_max": [4, 6, 8],
    "times": [0.25, 0.5, 1.0],
    "steps": 64,
    "step_tol": 1e-6,
    "krylov_tol": 1e-10,
    "trials": 100,
    "seed": 20240817,
    "experiment": "all",
    "out_dir": "out",
    "out_format": "csv",
}


class ConfigError(Exception):
    """Carries every validation violation found, not just the first."""

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


@dataclass
class RunConfig:
    """Fully resolved run configuration (all defaults applied)."""

    d: int
    sites: int
    spacing: float
    n_particles: int
    mass: float
    mu: float
    lam: float
    lam_list: list
    sigma: float
    sigma0: float
    modes: list
    weights: list
    n_max: int
    identity_n_max: list
    alphas: list
    times: list
    steps: int
    step_tol: float
    krylov_tol: float
    trials: int
    seed: int
    experiment: str
    out_dir: str
    out_format: str
    echo: dict = field(default_factory=dict)


def _uniform_modes(spec: dict, violations) -> tuple:
    """Symmetric uniform d=1 grid: count modes covering (-k_max, k_max)."""
    count = spec.get("count")
    k_max = spec.get("k_max")
    if not isinstance(count, int) or count < 2 or count % 2 != 0:
        violations.append("grid.uniform.count must be a positive even integer")
        return [], []
    if not isinstance(k_max, (int, float)) or k_max <= 0:
        violations.append("grid.uniform.k_max must be positive")
        return [], []
    dk = 2 * k_max / count
    modes = [-k_max + (i + 0.5) * dk for i in range(count)]
    return modes, [dk] * count


def parse_config(text: str) -> RunConfig:
    """Parse and validate a JSON config document.

    Raises ConfigError listing every violation; JSON syntax errors carry
    line/column information.
    """
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(
            [f"JSON syntax error at line {exc.lineno}, column {exc.colno}: "
             f"{exc.msg}"]) from exc
    if not isinstance(doc, dict):
        raise ConfigError(["config root must be a JSON object"])

    violations = []
    model = doc.get("model", {})
    gridblk = doc.get("grid", {})
    trunc = doc.get("truncation", {})
    fieldblk = doc.get("field", {})
    prop = doc.get("propagation", {})
    output = doc.get("output", {})

    def req(block, blockname, key, types=(int, float)):
        v = block.get(key)
        if v is None:
            violations.append(f"{blockname}.{key} is required")
            return None
        if not isinstance(v, types):
            violations.append(f"{blockname}.{key} has the wrong type")
            return None
        return v

    d = req(model, "model", "d", int) or 1
    sites = req(model, "model", "L", int) or 2
    spacing = model.get("h", 1.0)
    p = model.get("p", 1)
    mass = model.get("M", 1.0)
    mu = req(model, "model", "mu")
    mu = 1.0 if mu is None else mu
    lam = req(model, "model", "lambda")
    lam = 0.0 if lam is None else lam
    sigma = req(model, "model", "sigma")
    sigma0 = req(model, "model", "sigma0")
    lam_list = model.get("lambda_list", [lam])

    if "uniform" in gridblk:
        modes, weights = _uniform_modes(gridblk["uniform"], violations)
        if d != 1:
            violations.append("grid.uniform requires model.d = 1")
    else:
        modes = gridblk.get("modes")
        if modes is None:
            violations.append("grid.modes (or grid.uniform) is required")
            modes = []
        weights = gridblk.get("weights", [1.0] * len(modes))

    n_max = trunc.get("n_max", DEFAULTS["n_max"])
    identity_n_max = trunc.get("identity_n_max", DEFAULTS["identity_n_max"])
    alphas_raw = fieldblk.get("alphas", [[0.0, 0.0]] * len(modes))
    times = prop.get("times", DEFAULTS["times"])
    steps = prop.get("steps", DEFAULTS["steps"])
    step_tol = prop.get("step_tol", DEFAULTS["step_tol"])
    krylov_tol = prop.get("krylov_tol", DEFAULTS["krylov_tol"])
    trials = doc.get("trials", DEFAULTS["trials"])
    seed = doc.get("seed", DEFAULTS["seed"])
    experiment = doc.get("experiment", DEFAULTS["experiment"])
    out_dir = output.get("path", DEFAULTS["out_dir"])
    out_format = output.get("format", DEFAULTS["out_format"])

    # semantic validation: every violation collected, then raised together
    mode_vecs = [([m] if isinstance(m, (int, float)) else list(m))
                 for m in modes]
    if sigma is not None and sigma0 is not None and not 0 < sigma0 < sigma:
        violations.append(
            f"model.sigma0 must satisfy 0 < sigma0 < sigma "
            f"(got sigma0={sigma0}, sigma={sigma})")
    if lam < 0:
        violations.append("model.lambda must be >= 0")
    if mu < 0:
        violations.append("model.mu must be >= 0")
    if spacing <= 0:
        violations.append("model.h must be positive")
    if mass <= 0:
        violations.append("model.M must be positive")
    if p < 1:
        violations.append("model.p must be >= 1")
    if sites < 2:
        violations.append("model.L must be >= 2")
    if n_max < 0:
        violations.append("truncation.n_max must be >= 0")
    if not isinstance(trials, int) or trials < 1:
        violations.append("trials must be a positive integer")
    if out_format not in ("csv", "json"):
        violations.append(
            f"output.format must be 'csv' or 'json', got {out_format!r}")
    if experiment not in SELECTORS:
        violations.append(
            f"experiment must be one of {SELECTORS}, got {experiment!r}")
    if steps < 1:
        violations.append("propagation.steps must be >= 1")
    if step_tol <= 0 or krylov_tol <= 0:
        violations.append("propagation tolerances must be positive")
    if any(t < 0 for t in times):
        violations.append("propagation.times must be nonnegative")
    if len(weights) != len(mode_vecs):
        violations.append(
            f"grid.weights length {len(weights)} != mode count {len(mode_vecs)}")
    elif any(w <= 0 for w in weights):
        violations.append("grid.weights must all be positive")
    for m in mode_vecs:
        if len(m) != d:
            violations.append(f"grid mode {m} does not have dimension d={d}")
            break
    kk = [float(np.linalg.norm(m)) for m in mode_vecs]
    for m, norm in zip(mode_vecs, kk):
        if max(abs(c) for c in m) * spacing >= np.pi:
            violations.append(
                f"grid mode {m} violates the sampling bound |k| h < pi")
    if mu == 0 and any(norm == 0 for norm in kk):
        violations.append("mu = 0 forbids a zero momentum mode")
    if len({tuple(m) for m in mode_vecs}) != len(mode_vecs):
        violations.append("grid.modes contains duplicates")
    if sigma is not None and sigma0 is not None and 0 < sigma0 < sigma and kk:
        if not any(norm <= sigma0 for norm in kk):
            violations.append(
                "grid must contain at least one mode at or below sigma0")
        if not any(sigma0 < norm <= sigma for norm in kk):
            violations.append(
                "grid must contain at least one mode in (sigma0, sigma]")
    alphas = []
    if len(alphas_raw) != len(mode_vecs):
        violations.append(
            f"field.alphas length {len(alphas_raw)} != mode count "
            f"{len(mode_vecs)}")
    else:
        try:
            alphas = [complex(a[0], a[1]) if isinstance(a, list)
                      else complex(a) for a in alphas_raw]
        except (TypeError, IndexError):
            violations.append(
                "field.alphas entries must be [re, im] pairs or numbers")
    if not lam_list:
        violations.append("model.lambda_list must be nonempty")
    elif any(l <= 0 for l in lam_list):
        if any(abs(a) != 0 for a in alphas) or experiment in ("sweep",
                                                              "observables"):
            violations.append(
                "model.lambda_list must be positive for coherent-frame runs")
    elif sorted(lam_list, reverse=True) != list(lam_list):
        violations.append("model.lambda_list must be strictly descending")
    if alphas and lam_list and all(l > 0 for l in lam_list) and sigma:
        grid_ok = (len(weights) == len(mode_vecs) and mode_vecs
                   and all(w > 0 for w in weights)
                   and all(len(m) == d for m in mode_vecs))
        if grid_ok:
            occ = max(sum(w * abs(a / l) ** 2
                          for w, a in zip(weights, alphas))
                      for l in lam_list)
            if occ > n_max / 2:
                violations.append(
                    f"coherent sizing rule violated: occupancy {occ:.3g} at "
                    f"the smallest lambda exceeds N_max/2 = {n_max / 2}")
    if violations:
        raise ConfigError(violations)

    cfg = RunConfig(
        d=d, sites=sites, spacing=float(spacing), n_particles=p,
        mass=float(mass), mu=float(mu), lam=float(lam),
        lam_list=[float(l) for l in lam_list], sigma=float(sigma),
        sigma0=float(sigma0), modes=mode_vecs,
        weights=[float(w) for w in weights], n_max=n_max,
        identity_n_max=list(identity_n_max), alphas=alphas,
        times=[float(t) for t in times], steps=steps,
        step_tol=float(step_tol), krylov_tol=float(krylov_tol),
        trials=trials, seed=seed, experiment=experiment,
        out_dir=out_dir, out_format=out_format)
    cfg.echo = resolved_echo(cfg)
    return cfg


def resolved_echo(cfg: RunConfig) -> dict:
    """The fully resolved config as a JSON-serializable dict."""
    return {
        "model": {"d": cfg.d, "L": cfg.sites, "h": cfg.spacing,
                  "p": cfg.n_particles, "M": cfg.mass, "mu": cfg.mu,
                  "lambda": cfg.lam, "lambda_list": cfg.lam_list,
                  "sigma": cfg.sigma, "sigma0": cfg.sigma0},
        "grid": {"modes": cfg.modes, "weights": cfg.weights},
        "truncation": {"n_max": cfg.n_max,
                       "identity_n_max": cfg.identity_n_max},
        "field": {"alphas": [[a.real, a.imag] for a in cfg.alphas]},
        "propagation": {"times": cfg.times, "steps": cfg.steps,
                        "step_tol": cfg.step_tol,
                        "krylov_tol": cfg.krylov_tol},
        "trials": cfg.trials,
        "seed": cfg.seed,
        "experiment": cfg.experiment,
        "output": {"path": cfg.out_dir, "format": cfg.out_format},
    }


def dispatch(cfg: RunConfig, selector: str | None = None) -> int:
    """Run the selected experiment(s); emit results; return the exit code.

    Results are always written before the exit status is decided.
    """
    selector = selector or cfg.experiment
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    all_passed = True

    def finish(report, stem):
        nonlocal all_passed
        ex.emit(report, out / f"{stem}_report.json", "json")
        all_passed = all_passed and report.passed

    if selector in ("identity", "all"):
        finish(ex.run_dressing_identity(cfg), "identity")
    if selector in ("inequalities", "all"):
        finish(ex.run_inequality_suite(cfg), "inequalities")
    if selector in ("observables", "all"):
        report = ex.run_classical_observables(cfg)
        if cfg.out_format == "csv":
            ex.emit(report, out / "observables.csv", "csv")
        finish(report, "observables")
    if selector in ("sweep", "all"):
        result = ex.run_convergence_sweep(cfg)
        ex.emit(result, out / f"sweep.{cfg.out_format}", cfg.out_format)
        finish(ex.evaluate_sweep(result, cfg), "sweep")
    return 0 if all_passed else 1


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="nelson-lab",
        description="Numerical experiments on the cutoff particle-field model")
    parser.add_argument("selector", choices=SELECTORS,
                        help="which experiment family to run")
    parser.add_argument("--config", required=True, help="JSON config file")
    parser.add_argument("--out", help="output directory (overrides config)")
    parser.add_argument("--format", choices=("csv", "json"),
                        help="output format (overrides config)")
    parser.add_argument("--seed", type=int, help="RNG seed (overrides config)")
    parser.add_argument("--dry-run", action="store_true",
                        help="print the resolved config and exit")
    args = parser.parse_args(argv)

    try:
        text = Path(args.config).read_text()
    except OSError as exc:
        print(f"error: cannot read config: {exc}", file=sys.stderr)
        return 2
    try:
        cfg = parse_config(text)
    except ConfigError as exc:
        for v in exc.violations:
            print(f"config error: {v}", file=sys.stderr)
        return 2

    if args.out:
        cfg.out_dir = args.out
    if args.format:
        cfg.out_format = args.format
    if args.seed is not None:
        cfg.seed = args.seed
    cfg.echo = resolved_echo(cfg)

    if args.dry_run:
        print(json.dumps(cfg.echo, indent=2, sort_keys=True))
        return 0
    return dispatch(cfg, args.selector)


if __name__ == "__main__":
    sys.exit(main())
