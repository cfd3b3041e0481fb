"""Experiment harness: ``greedycond {greedy,condition,rates,oracle} --config FILE``.

Exit codes: 0 success, 2 configuration error, 3 numerical error.
Outputs go to ``<outdir>/<run-id>/`` where ``run-id`` hashes the
normalized configuration.
"""

from __future__ import annotations

import argparse
import copy
import datetime as _dt
import hashlib
import json
import os
import sys
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from . import conditioning, greedy, rates, transferop
from .exceptions import ConfigError, DomainError, NumericalError
from .jointmodel import (
    brownian_restriction_model, cumulative_sum_map, eigen_truncation_model,
    invertible_map_model,
)
from .kernelcore import Grid, kernel_from_spec
from .outputs import csv_text, json_text, matrix_csv_text, write_atomic

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 2, 3
MODEL_NAMES = ("brownian_restriction", "eigen_truncation", "invertible_map")
TRANSFER_VARIANTS = ("restriction_bm", "noisy_restriction_bm", "inverse_map",
                     "moore_penrose_grid", "eigen_truncation")
ORACLE_TOL = 1e-6
POWER_TOL = 1e-8
MC_SE = 3.0
MC_FRACTION = 0.99

DEFAULTS = {
    "greedy": {"gamma": 1.0, "seed": 0, "n_max": 50, "stop_tol": None},
    "condition": {"selection": "greedy"},
    "rates": {"window": [10, 50]},
    "oracle": {"mc_samples": 100_000, "seed": 0, "selection": "all"},
    "outputs": {"directory": "runs", "formats": ["csv", "json"]},
}


def _section(cfg, name):
    sec = cfg.get(name, {})
    if not isinstance(sec, dict):
        raise ConfigError("must be an object", name)
    merged = copy.deepcopy(DEFAULTS.get(name, {}))
    merged.update(sec)
    return merged


def _grid(spec, key, default_lower, default_upper):
    if spec is None:
        return Grid.uniform(default_lower, default_upper)
    try:
        lower = float(spec.get("lower", default_lower))
        upper = float(spec.get("upper", default_upper))
        n = spec.get("points")
        return Grid.uniform(lower, upper, None if n is None else int(n))
    except (AttributeError, TypeError, ValueError, DomainError) as exc:
        raise ConfigError(str(exc), key) from exc


def _map_matrix(spec, n):
    if isinstance(spec, str):
        if spec == "identity":
            return np.eye(n)
        if spec == "cumsum":
            return cumulative_sum_map(n)
        raise ConfigError(f"unknown map {spec!r}", "model.params.map")
    if isinstance(spec, dict) and "scale" in spec:
        return float(spec["scale"]) * np.eye(n)
    return np.asarray(spec, dtype=float)


@dataclass
class Experiment:
    """A validated configuration with its constructed objects."""

    config: dict
    model: object = None
    kernel: object = None
    grid_y: Grid = None
    transfer: object = None
    rule: greedy.SelectionRule = None
    sections: dict = field(default_factory=dict)

    @property
    def run_id(self):
        return hashlib.sha256(json_text(self.config).encode()).hexdigest()[:16]


def load_config(cfg) -> Experiment:
    """Validate ``cfg`` and build every object it names; raises ConfigError."""
    if not isinstance(cfg, dict):
        raise ConfigError("top level must be a JSON object")
    unknown = set(cfg) - {"model", "kernel", "transfer", "greedy", "grids", "condition",
                          "rates", "oracle", "outputs"}
    if unknown:
        raise ConfigError(f"unknown keys {sorted(unknown)}")
    sections = {name: _section(cfg, name) for name in DEFAULTS}
    g = sections["greedy"]
    try:
        gamma = float(g["gamma"])
        n_max = int(g["n_max"])
        seed = int(g["seed"])
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc), "greedy") from exc
    if n_max < 1:
        raise ConfigError(f"n_max must be >= 1, got {n_max}", "greedy.n_max")
    if g["stop_tol"] is not None and float(g["stop_tol"]) < 0:
        raise ConfigError("stop_tol must be >= 0", "greedy.stop_tol")
    try:
        rule = greedy.SelectionRule(gamma, None if gamma == 1.0 else seed)
    except DomainError as exc:
        raise ConfigError(str(exc), "greedy.gamma") from exc
    o = sections["oracle"]
    if int(o["mc_samples"]) < conditioning.MC_MIN_SAMPLES:
        raise ConfigError(f"mc_samples must be >= {conditioning.MC_MIN_SAMPLES}",
                          "oracle.mc_samples")
    w = sections["rates"]["window"]
    if not (isinstance(w, list) and len(w) == 2 and 1 <= int(w[0]) <= int(w[1])):
        raise ConfigError("window must be [n_min, n_max] with 1 <= n_min <= n_max",
                          "rates.window")

    grids = cfg.get("grids", {})
    exp = Experiment(config={}, rule=rule, sections=sections)
    kernel_spec = cfg.get("kernel")
    if kernel_spec is not None:
        try:
            exp.kernel = kernel_from_spec(kernel_spec)
        except DomainError as exc:
            raise ConfigError(str(exc), "kernel") from exc

    model_spec = cfg.get("model")
    if model_spec is not None:
        exp.model = _build_model(model_spec, grids, exp.kernel)
        exp.grid_y = exp.model.grid_y
    elif exp.kernel is not None:
        exp.grid_y = _grid(grids.get("y"), "grids.y", exp.kernel.lower, exp.kernel.upper)
    else:
        raise ConfigError("need a model or a kernel", "model")

    transfer_spec = cfg.get("transfer")
    if transfer_spec is not None:
        if exp.model is None:
            raise ConfigError("a transfer operator needs a model", "transfer")
        if transfer_spec.get("variant") not in TRANSFER_VARIANTS:
            raise ConfigError(f"variant must be one of {TRANSFER_VARIANTS}", "transfer.variant")
        try:
            exp.transfer = transferop.transfer_from_spec(transfer_spec, exp.model)
        except (DomainError, KeyError, TypeError) as exc:
            raise ConfigError(str(exc), "transfer") from exc

    normalized = {k: copy.deepcopy(v) for k, v in cfg.items() if k not in DEFAULTS}
    normalized.update(copy.deepcopy(sections))
    normalized["outputs"].pop("directory", None)
    exp.config = normalized
    return exp


def _build_model(spec, grids, kernel):
    name = spec.get("name") if isinstance(spec, dict) else None
    if name not in MODEL_NAMES:
        raise ConfigError(f"name must be one of {MODEL_NAMES}", "model.name")
    params = spec.get("params", {})
    try:
        if name == "brownian_restriction":
            return brownian_restriction_model(
                float(params.get("noise_variance", 0.0)),
                _grid(grids.get("x"), "grids.x", 0.0, 1.0),
                _grid(grids.get("y"), "grids.y", 0.5, 1.0))
        if name == "eigen_truncation":
            return eigen_truncation_model(params["eigenvalues"], params["kept"],
                                          _grid(grids.get("x"), "grids.x", 0.0, 1.0))
        if kernel is None:
            raise ConfigError("invertible_map needs a base kernel", "kernel")
        grid = _grid(grids.get("x"), "grids.x", kernel.lower, kernel.upper)
        return invertible_map_model(kernel, grid, _map_matrix(params.get("map", "identity"),
                                                              len(grid)))
    except KeyError as exc:
        raise ConfigError(f"missing parameter {exc}", "model.params") from exc
    except (DomainError, TypeError, ValueError) as exc:
        raise ConfigError(str(exc), "model.params") from exc
    except NumericalError as exc:
        raise ConfigError(str(exc), "model.params.map") from exc


def _run_greedy(exp, n_max=None):
    g = exp.sections["greedy"]
    kernel = exp.model.k_yy if exp.model is not None else exp.kernel
    label = exp.model.label if exp.model is not None else kernel.name
    state = greedy.init(kernel, exp.grid_y, exp.rule, label=label)
    stop = None if g["stop_tol"] is None else float(g["stop_tol"])
    return greedy.run(state, int(g["n_max"]) if n_max is None else n_max, stop)


def _selection(exp, spec, key):
    n_y = len(exp.grid_y)
    if spec == "greedy":
        return list(_run_greedy(exp).selected)
    if spec == "all":
        return list(range(n_y))
    if spec == "none":
        return []
    if isinstance(spec, dict) and "points" in spec:
        try:
            return [exp.grid_y.index_of(float(t), atol=1e-9) for t in spec["points"]]
        except DomainError as exc:
            raise ConfigError(str(exc), key) from exc
    if isinstance(spec, list):
        return [int(i) for i in spec]
    raise ConfigError("selection must be 'greedy', 'all', 'none', a list of indices "
                      "or {'points': [...]}", key)


def cmd_greedy(exp):
    state = _run_greedy(exp)
    sel_rows = [(h.step, h.index, h.point) for h in state.history]
    files = {
        "selection.csv": csv_text(["step", "index", "point"], sel_rows),
        "power_history.csv": csv_text(["step", "point", "sup_power_sq"],
                                      greedy.history_rows(state)),
    }
    return files, {}


def cmd_condition(exp):
    if exp.model is None:
        raise ConfigError("condition needs a model", "model")
    sel = _selection(exp, exp.sections["condition"]["selection"], "condition.selection")
    pk = conditioning.posterior_kernel(exp.model, sel)
    R = pk.residual_matrix()
    xs = exp.model.grid_x.points
    report = conditioning.opnorm_of(R, exp.model.grid_x).to_dict()
    report.update({"n_selected": len(sel), "selected_points": pk.selected_points,
                   "jitter": pk.jitter})
    files = {"residual_matrix.csv": matrix_csv_text(R, xs, xs)}
    if exp.transfer is not None:
        via = conditioning.conditional_cov_via_M(exp.model, exp.transfer)
        full = conditioning.full_observation_residual(exp.model)
        report["via_M"] = dict(conditioning.opnorm_of(via, exp.model.grid_x).to_dict(),
                               variant=exp.transfer.variant,
                               max_discrepancy=float(np.max(np.abs(via - full))))
        files["residual_via_m.csv"] = matrix_csv_text(via, xs, xs)
    files["opnorm.json"] = json_text(report)
    return files, {"posterior": pk.jitter}


def cmd_rates(exp):
    if exp.model is None:
        raise ConfigError("rates needs a model", "model")
    M = exp.transfer or transferop.transfer_for_model(exp.model)
    state = _run_greedy(exp)
    window = tuple(int(v) for v in exp.sections["rates"]["window"])
    y = rates.decay_curve(exp.model, state, "Y_residual")
    x = rates.decay_curve(exp.model, state, "X_given_Yn_residual")
    fit = rates.fit_power_law(y, window)
    transfer = rates.check_transfer_bound(exp.model, M, state)
    width = greedy.check_width_bound(state)
    normalized = float(np.max(exp.model.K_yy.diagonal())) <= 1 + greedy.NUM_TOL
    rate = rates.check_rate_bound(exp.model, M, state, window)
    rate["hypothesis_met"] = normalized
    passed = transfer["pass"] and width["pass"] and (rate["pass"] or not normalized)
    report = {
        "pass": passed,
        "per_n": transfer["per_n"],
        "constants": dict(transfer["constants"], gamma=state.gamma,
                          norm_M_probe=transferop.probe_norm(M),
                          alpha_hat=fit.alpha_hat, c_hat=fit.c_hat,
                          fit_residual=fit.residual, window=list(window)),
        "transfer_bound": {"pass": transfer["pass"]},
        "width_bound": width,
        "rate_bound": rate,
    }
    rows = [(n, a, b) for n, a, b in zip(y.ns, y.values, x.values)]
    files = {"decay.csv": csv_text(["n", "Y_residual", "X_given_Yn_residual"], rows),
             "bounds_report.json": json_text(report)}
    return files, {}


def cmd_oracle(exp):
    if exp.model is None:
        raise ConfigError("oracle needs a model", "model")
    model = exp.model
    state = _run_greedy(exp)
    diag = model.k_yy.diagonal(model.grid_y)
    newton_sq = np.cumsum(state.newton ** 2, axis=1)
    per_n = []
    for n in range(state.n + 1):
        inc = conditioning.newton_residual(model, state, n)
        dense = conditioning.schur_oracle(model, state.selected[:n])
        pw = greedy.dense_power_sq(model.k_yy, model.grid_y, state.selected[:n])
        p_inc = diag - (newton_sq[:, n - 1] if n else 0.0)
        per_n.append({"n": n, "max_discrepancy": float(np.max(np.abs(inc - dense))),
                      "power_sq_discrepancy": float(np.max(np.abs(p_inc - pw)))})
    max_disc = max(r["max_discrepancy"] for r in per_n)
    max_pw = max(r["power_sq_discrepancy"] for r in per_n)
    o = exp.sections["oracle"]
    sel = _selection(exp, o["selection"], "oracle.selection")
    mc = conditioning.monte_carlo_oracle(model, sel, int(o["mc_samples"]), int(o["seed"]))
    ref = conditioning.schur_oracle(model, sel)
    frac = mc.agreement(ref, MC_SE)
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.abs(mc.residual - ref) / mc.stderr
    z = z[np.isfinite(z) & (mc.stderr > 1e-10)]
    report = {
        "incremental_vs_dense": {"per_n": per_n, "max_discrepancy": max_disc,
                                 "max_power_sq_discrepancy": max_pw,
                                 "tolerance": ORACLE_TOL, "power_tolerance": POWER_TOL,
                                 "pass": max_disc <= ORACLE_TOL and max_pw <= POWER_TOL},
        "monte_carlo": {"samples": mc.samples, "seed": mc.seed, "n_selected": len(sel),
                        "fraction_within_3se": frac,
                        "max_se_multiple": float(np.max(z)) if z.size else 0.0,
                        "required_fraction": MC_FRACTION, "pass": frac >= MC_FRACTION},
    }
    report["pass"] = report["incremental_vs_dense"]["pass"] and report["monte_carlo"]["pass"]
    return {"oracle_report.json": json_text(report)}, {}


COMMANDS = {"greedy": cmd_greedy, "condition": cmd_condition, "rates": cmd_rates,
            "oracle": cmd_oracle}


def execute(command, cfg, outdir=None):
    """Validate, run and write one subcommand; returns the run directory."""
    exp = load_config(cfg)
    files, jitters = COMMANDS[command](exp)
    outdir = outdir or exp.sections["outputs"]["directory"]
    formats = set(exp.sections["outputs"]["formats"])
    run_dir = os.path.join(outdir, exp.run_id)
    checksums = {}
    for name, text in sorted(files.items()):
        if name.rsplit(".", 1)[-1] in formats:
            checksums[name] = write_atomic(os.path.join(run_dir, name), text)
    manifest = {
        "command": command,
        "config": exp.config,
        "version": __version__,
        "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(),
        "jitter": jitters,
        "checksums": checksums,
    }
    write_atomic(os.path.join(run_dir, f"{command}.manifest.json"), json_text(manifest))
    return run_dir


def _thread_limit():
    value = os.environ.get("GG_THREADS")
    if not value:
        return None
    try:
        return max(1, int(value))
    except ValueError:
        raise ConfigError(f"GG_THREADS must be an integer, got {value!r}") from None


def main(argv=None):
    parser = argparse.ArgumentParser(prog="greedycond", description=__doc__.splitlines()[0])
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", required=True, help="JSON experiment config")
    parser.add_argument("--outdir", help="output root (overrides outputs.directory)")
    args = parser.parse_args(argv)
    try:
        with open(args.config, encoding="utf-8") as fh:
            try:
                cfg = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"line {exc.lineno} column {exc.colno}: {exc.msg}",
                                  args.config) from exc
        limit = _thread_limit()
        if limit is None:
            run_dir = execute(args.command, cfg, args.outdir)
        else:
            from threadpoolctl import threadpool_limits
            with threadpool_limits(limits=limit):
                run_dir = execute(args.command, cfg, args.outdir)
    except (ConfigError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DomainError, NumericalError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    print(run_dir)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
