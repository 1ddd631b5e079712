"""Reproducible experiment runner.

Subcommands expose the library pipelines with seeded flat key=value configs
and machine-readable outputs:

    splitflow ou-check   --config cfg [--out DIR] [--seed N]
    splitflow robustness --config cfg [--out DIR] [--seed N]
    splitflow hyperbolic --config cfg [--out DIR] [--seed N]
    splitflow wave       --config cfg [--out DIR] [--seed N]

Config files are ``key = value`` lines (``#`` comments allowed); unknown or
malformed keys are usage errors.  Exit codes: 0 success, 1 scientific
failure (a certificate or threshold check failed), 2 usage/config error.
All randomness flows from the single seed through fixed stream splits, so
identical config and seed give byte-identical outputs.
"""

import argparse
import json
import sys
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from .cocycle import DiscreteCocycle
from .dichotomy import DichotomyCertificate
from .errors import ConfigurationError, SplitflowError
from .grids import TimeGrid
from .hyperbolic import (SemilinearProblem, certify_hyperbolic,
                         find_hyperbolic_solution)
from .noise import (KappaFn, ensemble_diagnostics, injected_path, linear_path,
                    ou_series, pathwise_ou_residual, sample_wiener_path,
                    shift_path, sublinearity_report, zero_path)
from .robustness import robust_dichotomy_discrete, robustness_report_json
from .sde_bridge import StratonovichSpec, random_ode_problem, run_wave_demo

# key -> (parser, default); None default means required
_COMMON = {
    "seed": (int, 12345),
    "t_min": (float, None),
    "t_max": (float, None),
    "h": (float, None),
}


def _float_list(text):
    vals = [float(tok) for tok in text.split(",") if tok.strip()]
    return vals


def _bool(text):
    t = text.strip().lower()
    if t in ("true", "1", "yes"):
        return True
    if t in ("false", "0", "no"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


SCHEMAS = {
    "ou-check": {
        **_COMMON,
        "t_min": (float, -30.0), "t_max": (float, 8.0), "h": (float, 1.0 / 64),
        "n_paths": (int, 10000),
        "variance_band": (float, 0.03),
        "w1_band": (float, 0.05),
        "linear_tol": (float, 1e-4),
        "ode_tol": (float, 5e-3),
        "checkpoints": (_float_list, [10.0, 25.0, 50.0, 100.0]),
    },
    "robustness": {
        **_COMMON,
        "t_min": (float, -8.0), "t_max": (float, 8.0), "h": (float, 1.0 / 64),
        "base_step": (float, 0.5),
        "pert_step": (float, 0.55),
        "rotation": (float, 0.01),
        "slack": (float, 1.1),
        "run_saddle": (_bool, True),
    },
    "hyperbolic": {
        **_COMMON,
        "t_min": (float, -70.0), "t_max": (float, 70.0), "h": (float, 1.0 / 64),
        "model": (str, "cubic"),
        "eta_grid": (_float_list, [0.2, 0.1, 0.05, 0.025]),
        "kappa_amplitude": (float, 0.002),
        "r_u": (float, 0.3),
        "tol": (float, 1e-9),
        "tail_tol": (float, 1e-9),
        "n_half": (int, 4),
    },
    "wave": {
        **_COMMON,
        "t_min": (float, -60.0), "t_max": (float, 60.0), "h": (float, 1.0 / 32),
        "n_modes": (int, 4),
        "beta_damping": (float, 1.0),
        "f_linear_coeff": (float, 1.0),
        "eta_grid": (_float_list, []),
        "kappa_amplitude": (float, 0.05),
        "tol": (float, 1e-7),
        "tail_tol": (float, 1e-7),
        "trunc_tol": (float, 1e-7),
        "n_half": (int, 3),
    },
}


def parse_config_text(text, command):
    """Typed config dict from flat key=value text; errors carry line numbers."""
    schema = SCHEMAS[command]
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigurationError(
                f"line {lineno}: expected 'key = value', got {raw!r}")
        key, _, val = line.partition("=")
        key, val = key.strip(), val.strip()
        if key not in schema:
            raise ConfigurationError(
                f"line {lineno}: unknown key {key!r} for command {command!r}")
        if key in values:
            raise ConfigurationError(f"line {lineno}: duplicate key {key!r}")
        parser = schema[key][0]
        try:
            values[key] = parser(val)
        except (ValueError, TypeError) as exc:
            raise ConfigurationError(
                f"line {lineno}: field {key!r}: {exc}") from exc
    return values


class ExperimentConfig:
    """A command plus its typed key/value map, round-trippable to text."""

    def __init__(self, command, values):
        if command not in SCHEMAS:
            raise ConfigurationError(f"unknown command {command!r}")
        schema = SCHEMAS[command]
        merged = {}
        for key, (_, default) in schema.items():
            if key in values:
                merged[key] = values[key]
            elif default is not None:
                merged[key] = default
            else:
                raise ConfigurationError(f"missing required key {key!r}")
        extra = set(values) - set(schema)
        if extra:
            raise ConfigurationError(f"unknown keys {sorted(extra)}")
        self.command = command
        self.values = merged
        self._validate()

    def _validate(self):
        for key in ("tol", "tail_tol", "trunc_tol", "ode_tol", "linear_tol"):
            if key in self.values and not self.values[key] > 0.0:
                raise ConfigurationError(f"tolerance {key} must be positive")
        if "eta_grid" in self.values:
            grid = self.values["eta_grid"]
            if any(e < 0 for e in grid):
                raise ConfigurationError("eta_grid entries must be >= 0")
            if list(grid) != sorted(grid, reverse=True):
                raise ConfigurationError("eta_grid must be sorted descending")
        if "h" in self.values and not self.values["h"] > 0.0:
            raise ConfigurationError("h must be positive")

    @classmethod
    def from_text(cls, text, command):
        return cls(command, parse_config_text(text, command))

    def to_text(self):
        lines = [f"# splitflow {self.command} config"]
        for key in SCHEMAS[self.command]:
            v = self.values[key]
            if isinstance(v, list):
                lines.append(f"{key} = {','.join(repr(float(x)) for x in v)}")
            elif isinstance(v, bool):
                lines.append(f"{key} = {'true' if v else 'false'}")
            elif isinstance(v, float):
                lines.append(f"{key} = {v!r}")
            else:
                lines.append(f"{key} = {v}")
        return "\n".join(lines) + "\n"

    def grid(self):
        return TimeGrid(self.values["t_min"], self.values["t_max"],
                        self.values["h"])


def _write(out_dir, name, text):
    path = Path(out_dir) / name
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="\n") as fh:
        fh.write(text)
    return str(path)


def _csv(rows, columns):
    lines = [",".join(columns)]
    for r in rows:
        out = []
        for c in columns:
            v = r.get(c)
            if isinstance(v, (bool, np.bool_)):
                out.append("true" if v else "false")
            elif isinstance(v, (float, np.floating)):
                out.append(repr(float(v)))
            elif v is None:
                out.append("")
            else:
                out.append(str(v))
        lines.append(",".join(out))
    return "\n".join(lines) + "\n"


def cmd_ou_check(cfg, out_dir):
    """Noise-module diagnostics; nonzero exit on any invariant failure."""
    v = cfg.values
    grid = cfg.grid()
    checks = []

    ens = ensemble_diagnostics(v["n_paths"], h=v["h"], t_min=v["t_min"],
                               seed=v["seed"])
    checks.append({"check": "wiener_variance_at_1", "value": ens["w1_var"],
                   "target": 1.0, "band": v["w1_band"],
                   "passed": abs(ens["w1_var"] - 1.0) <= v["w1_band"]})
    checks.append({"check": "ou_variance", "value": ens["z_var"],
                   "target": 0.5, "band": v["variance_band"],
                   "passed": abs(ens["z_var"] - 0.5) <= v["variance_band"]})

    lp = linear_path(grid)
    eval_grid = TimeGrid(-1.0, min(5.0, grid.t_max), grid.h)
    zs = ou_series(lp, eval_grid)
    err = float(np.max(np.abs(zs - 1.0)))
    checks.append({"check": "linear_path_filter", "value": err, "target": 0.0,
                   "band": v["linear_tol"], "passed": err <= v["linear_tol"]})

    sp = injected_path(grid, lambda t: np.sin(t))
    res = pathwise_ou_residual(sp, eval_grid)
    rmax = float(np.max(np.abs(res)))
    checks.append({"check": "pathwise_ode_identity", "value": rmax,
                   "target": 0.0, "band": v["ode_tol"],
                   "passed": rmax <= v["ode_tol"]})

    zp = zero_path(grid)
    z0 = float(np.max(np.abs(ou_series(zp, eval_grid))))
    checks.append({"check": "zero_path_filter", "value": z0, "target": 0.0,
                   "band": 0.0, "passed": z0 == 0.0})

    wp = sample_wiener_path(grid, v["seed"])
    q1 = shift_path(shift_path(wp, 2.0), 1.0)
    q2 = shift_path(wp, 3.0)
    lohi = (max(q1.grid.t_min, q2.grid.t_min), min(q1.grid.t_max, q2.grid.t_max))
    ts = np.arange(np.ceil(lohi[0] / grid.h), np.floor(lohi[1] / grid.h) + 1) * grid.h
    gerr = float(np.max(np.abs(
        np.array([q1.value_at(t) for t in ts[:200]])
        - np.array([q2.value_at(t) for t in ts[:200]]))))
    checks.append({"check": "shift_group_law", "value": gerr, "target": 0.0,
                   "band": 0.0, "passed": gerr == 0.0})

    # sublinearity trend: ensemble medians at the first/last checkpoints
    cps = v["checkpoints"]
    wide = TimeGrid(-30.0, max(cps) + 2.0, 1.0 / 16)
    meds = []
    for cp in (cps[0], cps[-1]):
        vals = []
        for k in range(500):
            pk = sample_wiener_path(wide, v["seed"] + 1000 + k)
            vals.append(sublinearity_report(pk, [cp])[0])
        meds.append(float(np.median(vals)))
    checks.append({"check": "sublinearity_trend", "value": meds[1],
                   "target": meds[0], "band": 0.0,
                   "passed": meds[1] < meds[0]})

    files = [_write(out_dir, "ou_check.csv",
                    _csv(checks, ("check", "value", "target", "band", "passed")))]
    ok = all(c["passed"] for c in checks)
    return (0 if ok else 1), files


def cmd_robustness(cfg, out_dir):
    """Scalar and saddle regression instances through the discrete pipeline."""
    v = cfg.values
    instances = []
    ok = True

    base = DiscreteCocycle.constant([[v["base_step"]]])
    pert = DiscreteCocycle.constant([[v["pert_step"]]])
    bc = DichotomyCertificate.constant([[1.0]], 1.0, float(np.log(2.0)),
                                       discrete=True)
    window = (int(np.ceil(v["t_min"])), int(np.floor(v["t_max"])))
    entry = {"name": "scalar", "base_step": v["base_step"],
             "pert_step": v["pert_step"]}
    try:
        cert = robust_dichotomy_discrete(base, bc, pert, window,
                                         slack=v["slack"])
        rep = cert.meta["verification"]
        entry.update(json.loads(robustness_report_json(cert)))
        entry["alpha_tilde"] = cert.exponent
        true_rate = float(-np.log(abs(v["pert_step"]))) \
            if v["pert_step"] != 0 else None
        entry["true_rate"] = true_rate
        entry["exponent_conservative"] = (
            true_rate is not None and cert.exponent <= true_rate + 1e-9)
        ok = ok and rep.passed and entry["exponent_conservative"]
    except SplitflowError as exc:
        entry["error"] = str(exc)
        entry["measured"] = getattr(exc, "measured", None)
        entry["threshold"] = getattr(exc, "threshold", None)
        ok = False
    instances.append(entry)

    if v["run_saddle"]:
        eps = v["rotation"]
        d_mat = np.diag([0.5, 2.0])
        rot = np.array([[np.cos(eps), -np.sin(eps)],
                        [np.sin(eps), np.cos(eps)]])
        base2 = DiscreteCocycle.constant(d_mat)
        pert2 = DiscreteCocycle.constant(rot @ d_mat)
        bc2 = DichotomyCertificate.constant(np.diag([1.0, 0.0]), 1.0,
                                            float(np.log(2.0)), discrete=True)
        entry2 = {"name": "saddle_rotation", "rotation": eps}
        try:
            cert2 = robust_dichotomy_discrete(base2, bc2, pert2, window,
                                              slack=v["slack"])
            rep2 = cert2.meta["verification"]
            entry2.update(json.loads(robustness_report_json(cert2)))
            ok = ok and rep2.passed
        except SplitflowError as exc:
            entry2["error"] = str(exc)
            entry2["threshold"] = getattr(exc, "threshold", None)
            ok = False
        instances.append(entry2)

    body = json.dumps({"command": "robustness", "seed": v["seed"],
                       "passed": bool(ok), "instances": instances}, indent=2)
    files = [_write(out_dir, "robustness.json", body + "\n")]
    return (0 if ok else 1), files


def _hyperbolic_problem(cfg):
    v = cfg.values
    if v["model"] == "additive":
        return SemilinearProblem(
            a_matrix=[[-1.0]],
            f_eta=lambda eta, t, y: np.array([eta * np.cos(t)]),
            f0=lambda y: np.zeros(1),
            y0_star=[0.0], r_u=1.0,
            f0_prime=lambda y: np.zeros((1, 1)),
            f_eta_dy=lambda eta, t, y: np.zeros((1, 1)),
        )
    if v["model"] == "cubic":
        pg = TimeGrid(v["t_min"] - 42.0, v["t_max"] + 2.0, v["h"])
        path = sample_wiener_path(pg, v["seed"])
        kap = KappaFn.inverse_quadratic(v["kappa_amplitude"])
        strat = StratonovichSpec(
            b_matrix=[[1.0]], f=lambda y: -y ** 3,
            f_prime=lambda y: np.atleast_2d(-3.0 * y ** 2),
            eta=1.0, kappa=kap,
        )
        return random_ode_problem(strat, path, [1.0], r_u=v["r_u"])
    raise ConfigurationError(f"field 'model': unknown model {v['model']!r}")


def cmd_hyperbolic(cfg, out_dir):
    """Bounded-solution ladder over the eta grid, with certification."""
    v = cfg.values
    problem = _hyperbolic_problem(cfg)
    window = cfg.grid()
    rows = []
    ok = True
    for eta in v["eta_grid"]:
        row = {"eta": eta, "sup_distance": None, "eps_used": None,
               "lambda": None, "certified": False, "alpha_tilde": None,
               "M_bound": None, "residual": None, "status": "error",
               "error": None}
        try:
            sol = find_hyperbolic_solution(problem, eta, window, tol=v["tol"],
                                           tail_tol=v["tail_tol"])
            certify_hyperbolic(problem, sol, n_half=v["n_half"])
            row["sup_distance"] = sol.sup_distance
            row["eps_used"] = sol.eps_used
            row["lambda"] = sol.lambda_value
            row["residual"] = sol.fixed_point_residual
            row["status"] = sol.status
            row["certified"] = sol.status == "certified"
            if sol.linearization_certificate is not None:
                row["alpha_tilde"] = float(sol.linearization_certificate.exponent)
                row["M_bound"] = float(sol.linearization_certificate.bound)
            if row["certified"] and not sol.sup_distance < sol.eps_used:
                ok = False
        except SplitflowError as exc:
            row["error"] = str(exc)
        rows.append(row)
    cols = ("eta", "sup_distance", "eps_used", "lambda", "certified",
            "alpha_tilde", "M_bound", "residual", "status", "error")
    files = [_write(out_dir, "hyperbolic.csv", _csv(rows, cols)),
             _write(out_dir, "hyperbolic.json",
                    json.dumps({"command": "hyperbolic", "seed": v["seed"],
                                "model": v["model"], "rows": rows},
                               indent=2) + "\n")]
    return (0 if ok else 1), files


def cmd_wave(cfg, out_dir):
    """Stochastic damped-wave pipeline over the eta ladder."""
    v = cfg.values
    window = cfg.grid()
    a = v["f_linear_coeff"]
    kap = KappaFn.inverse_quadratic(v["kappa_amplitude"])
    eta_grid = v["eta_grid"] if v["eta_grid"] else None
    try:
        report = run_wave_demo(
            v["n_modes"], v["beta_damping"], eta_grid, v["seed"], window,
            f_scalar=lambda u: a * u - u ** 3,
            f_scalar_prime=lambda u: a - 3.0 * u ** 2,
            kappa=kap, tol=v["tol"], tail_tol=v["tail_tol"],
            trunc_tol=v["trunc_tol"], n_half=v["n_half"],
        )
    except SplitflowError as exc:
        files = [_write(out_dir, "wave.json",
                        json.dumps({"command": "wave", "error": str(exc)},
                                   indent=2) + "\n")]
        sys.stderr.write(f"wave: {exc}\n")
        return 1, files
    import io

    buf = io.StringIO()
    report.to_csv(buf)
    files = [_write(out_dir, "wave.csv", buf.getvalue()),
             _write(out_dir, "wave.json", report.to_json() + "\n")]
    cutoff = report.meta["eta_cutoff"]
    ok = all(r["certified"] for r in report.rows if r["eta"] <= cutoff)
    ok = ok and not any(r["status"] == "failed" for r in report.rows)
    return (0 if ok else 1), files


_COMMANDS = {
    "ou-check": cmd_ou_check,
    "robustness": cmd_robustness,
    "hyperbolic": cmd_hyperbolic,
    "wave": cmd_wave,
}


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="splitflow",
        description="dichotomy robustness and random hyperbolic solutions",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", help="flat key=value config file")
        sp.add_argument("--out", default="splitflow_out",
                        help="output directory")
        sp.add_argument("--seed", type=int, help="override the config seed")
    args = parser.parse_args(argv)
    try:
        text = ""
        if args.config:
            try:
                with open(args.config) as fh:
                    text = fh.read()
            except OSError as exc:
                raise ConfigurationError(f"cannot read config: {exc}") from exc
        cfg = ExperimentConfig.from_text(text, args.command)
        if args.seed is not None:
            cfg.values["seed"] = args.seed
    except ConfigurationError as exc:
        sys.stderr.write(f"config error: {exc}\n")
        return 2
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        try:
            code, files = _COMMANDS[args.command](cfg, args.out)
        except ConfigurationError as exc:
            sys.stderr.write(f"config error: {exc}\n")
            return 2
    for f in files:
        sys.stderr.write(f"wrote {f}\n")
    return code


def entry():
    sys.exit(main())


if __name__ == "__main__":
    entry()
