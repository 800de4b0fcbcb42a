"""Command-line entry point: ``qfamp <subcommand> --config run.json [flags]``.

Exit codes: 0 success, 2 configuration error, 3 numeric or stability
failure, 4 pole on the imaginary axis, 64 unknown subcommand.
"""

from __future__ import annotations

import argparse
import copy
import csv
import io
import json
import os
import sys
import tempfile

import numpy as np

from . import __version__
from .analysis import (
    GAIN_COLUMNS,
    GainCurve,
    NOISE_COLUMNS,
    added_noise,
    fmt,
    gain_profile,
    gain_rows,
    loop_gain_bode,
    noise_rows,
    sensitivity_bound,
    stability,
    _eval_on_axis,
    _signal_gain,
)
from .errors import (
    ConfigError,
    DegeneracyError,
    DomainError,
    ExperimentError,
    NumericError,
    ParameterError,
    PoleEvaluationError,
    RangeError,
)
from .experiments import MonteCarloConfig, PerturbationSpec, _clean, run_noise_experiment, run_robustness_experiment
from .interconnect import FeedbackLoopConfig, close_feedback
from .models import check_scattering_constraints, controller_from_config, plant_from_config
from .schema import SCHEMA_VERSION, load_config, validate_config, validate_result
from .tfcore import RationalMatrix

SUBCOMMANDS = ("gain", "poles", "stability", "noise", "sensitivity", "bode", "montecarlo", "constraints")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_POLE, EXIT_USAGE = 0, 2, 3, 4, 64

DEFAULTS = {
    "schema_version": SCHEMA_VERSION,
    "plant": {"type": "detuned_ndpa", "kappa": 1.0, "lambda": 5.0},
    "grid": {"omega_min": -1.0, "omega_max": 1.0, "n_points": 201},
    "output": {"format": "csv"},
}

USAGE = "usage: qfamp {" + ",".join(SUBCOMMANDS) + "} [--config FILE] [options]"


class StabilityFailure(Exception):
    pass


def _parser(cmd: str) -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog=f"qfamp {cmd}")
    p.add_argument("--config", help="JSON run configuration")
    p.add_argument("--output", help="output file (default: stdout)")
    p.add_argument("--format", choices=("csv", "json"))
    p.add_argument("--omega-range", nargs=2, type=float, metavar=("MIN", "MAX"))
    p.add_argument("--points", type=int)
    p.add_argument("--omega", type=float, help="single evaluation frequency")
    p.add_argument("--lambda", dest="lam", type=float)
    p.add_argument("--gamma", type=float)
    p.add_argument("--beta", type=float)
    p.add_argument("--alpha", type=float, help="sets alpha1 = alpha2")
    p.add_argument("--seed", type=int)
    p.add_argument("--samples", type=int)
    return p


def effective_config(args) -> dict:
    """Defaults, then the config file, then command-line flags."""
    cfg = copy.deepcopy(DEFAULTS)
    if args.config:
        for key, val in load_config(args.config).items():
            if key in ("grid", "output"):
                cfg[key].update(val)
            else:
                cfg[key] = val
    if args.lam is not None:
        cfg["plant"]["lambda"] = args.lam
    if args.gamma is not None:
        cfg["plant"]["gamma"] = args.gamma
    if args.beta is not None:
        cfg.setdefault("controller", {"type": "beam_splitter"})["beta"] = args.beta
    if args.alpha is not None:
        cfg["feedback"] = {"alpha1": args.alpha, "alpha2": args.alpha}
    if args.omega_range is not None:
        cfg["grid"]["omega_min"], cfg["grid"]["omega_max"] = args.omega_range
    if args.points is not None:
        cfg["grid"]["n_points"] = args.points
    exp = cfg.get("experiment")
    if args.seed is not None:
        cfg.setdefault("experiment", {})["seed"] = args.seed
    elif exp is None or "seed" not in exp:
        env = os.environ.get("QFA_SEED")
        if env is not None:
            try:
                cfg.setdefault("experiment", {})["seed"] = int(env)
            except ValueError:
                raise ConfigError(f"QFA_SEED must be an integer, got {env!r}") from None
    if args.samples is not None:
        cfg.setdefault("experiment", {})["n_samples"] = args.samples
    if args.format is not None:
        cfg["output"]["format"] = args.format
    if args.output is not None:
        cfg["output"]["path"] = args.output
    return validate_config(cfg)


def _loop(cfg) -> FeedbackLoopConfig | None:
    fb = cfg.get("feedback")
    if not fb:
        return None
    return FeedbackLoopConfig(fb.get("alpha1", 1.0), fb.get("alpha2", 1.0))


def _system(cfg):
    """The closed loop when a controller is configured, otherwise the bare plant."""
    plant = plant_from_config(cfg["plant"])
    if "controller" not in cfg:
        return plant, plant
    return plant, close_feedback(plant, controller_from_config(cfg["controller"]), _loop(cfg))


def _grid(cfg, args):
    if args.omega is not None:
        return np.array([args.omega])
    g = cfg["grid"]
    if not g["omega_max"] > g["omega_min"]:
        raise ConfigError("grid omega_max must exceed omega_min")
    return np.linspace(g["omega_min"], g["omega_max"], g["n_points"])


def _require_stable(system):
    verdict = stability(system)
    if not verdict.stable:
        raise StabilityFailure(verdict.summary())
    return verdict


def cmd_gain(cfg, args):
    _, system = _system(cfg)
    _require_stable(system)
    w = _grid(cfg, args)
    if w.size == 1:
        curve = GainCurve(w, np.atleast_1d(_eval_on_axis(_signal_gain(system), w)))
    else:
        curve = gain_profile(system, w[0], w[-1], w.size)
    w_peak, db_peak = curve.peak()
    return list(GAIN_COLUMNS), list(gain_rows(curve)), f"peak gain_db = {db_peak:.6g} at omega = {w_peak:.6g}"


def cmd_poles(cfg, args):
    plant, system = _system(cfg)
    rows = [["plant", fmt(p.real), fmt(p.imag)] for p in plant.poles()]
    if system is not plant:
        rows += [["closed_loop", fmt(p.real), fmt(p.imag)] for p in system.poles]
    verdict = stability(system)
    return ["system", "re", "im"], rows, f"{len(rows)} poles; {verdict.summary()}"


def cmd_stability(cfg, args):
    _, system = _system(cfg)
    verdict = _require_stable(system)
    rows = [[fmt(p.real), fmt(p.imag)] for p in verdict.poles]
    return ["re", "im"], rows, verdict.summary()


def cmd_noise(cfg, args):
    _, system = _system(cfg)
    _require_stable(system)
    reports = [added_noise(system, float(w)) for w in _grid(cfg, args)]
    at = min(reports, key=lambda r: abs(r.omega))
    return list(NOISE_COLUMNS), list(noise_rows(reports)), \
        f"added noise ({reports[0].flavor}) = {at.a_value:.6g} at omega = {at.omega:.6g}"


def cmd_sensitivity(cfg, args):
    plant = plant_from_config(cfg["plant"])
    ctrl = controller_from_config(cfg.get("controller"))
    rows, bounds = [], []
    for w in _grid(cfg, args):
        b = sensitivity_bound(plant, ctrl, float(w))
        bounds.append((abs(w), b))
        rows.append([fmt(w), fmt(b)])
    at = min(bounds)
    return ["omega", "bound"], rows, f"sensitivity bound 1/|1-K21 G22| = {at[1]:.6g} at omega = {at[0]:.6g}"


def cmd_bode(cfg, args):
    plant = plant_from_config(cfg["plant"])
    ctrl = controller_from_config(cfg.get("controller"))
    curve = loop_gain_bode(plant, ctrl, _grid(cfg, args))
    rows = [r + [fmt(u)] for r, u in zip(gain_rows(curve), curve.phase_unwrapped_deg)]
    i = int(np.argmax(curve.magnitude))
    return list(GAIN_COLUMNS) + ["phase_unwrapped_deg"], rows, \
        f"max |K21 G22| = {curve.magnitude[i]:.6g} at omega = {curve.omegas[i]:.6g}"


def cmd_constraints(cfg, args):
    plant, system = _system(cfg)
    w = _grid(cfg, args)
    reports = [("plant", check_scattering_constraints(plant.matrix, w))]
    if system is not plant:
        labels = tuple(system.b1_row)
        row = RationalMatrix((tuple(system.b1_row.values()),), ("b̃1",), labels)
        reports.append(("closed_loop", check_scattering_constraints(row, w)))
    rows = []
    for name, rep in reports:
        for key, res in rep.residuals.items():
            rows += [[name, key, fmt(o), fmt(r)] for o, r in zip(rep.omegas, res)]
    worst = max(rep.max_residual for _, rep in reports)
    if not all(rep.passed for _, rep in reports):
        raise NumericError(f"scattering constraints violated, max residual = {worst:.3g}")
    return ["system", "identity", "omega", "residual"], rows, f"constraints satisfied, max residual = {worst:.3g}"


def _mc_config(cfg) -> tuple[str, MonteCarloConfig, int]:
    exp = cfg.get("experiment", {})
    plant = cfg["plant"]
    if plant.get("type") != "detuned_ndpa":
        raise ConfigError("montecarlo runs perturb a detuned_ndpa plant")
    kind = exp.get("kind", "noise" if "sweep" in exp else "robustness")
    ctrl = cfg.get("controller", {"beta": 0.1})
    fb = cfg.get("feedback", {})
    default_alpha = 0.99 if kind == "robustness" else 0.5
    sweep = exp.get("sweep", {})
    mc = MonteCarloConfig(
        seed=exp.get("seed", 0),
        n_samples=exp.get("n_samples", 50),
        kappa=plant.get("kappa", 1.0),
        lambda0=plant.get("lambda", 5.0),
        gamma=plant.get("gamma", 0.0),
        beta=ctrl.get("beta", 0.1),
        alpha1=fb.get("alpha1", default_alpha),
        alpha2=fb.get("alpha2", default_alpha),
        omega_eval=exp.get("omega_eval", 0.0),
        perturbation=PerturbationSpec(exp.get("rel_lambda", 0.1), exp.get("rel_delta", 0.001),
                                      exp.get("delta_base", "perturbed")),
        sweep_axis=sweep.get("axis"),
        sweep_values=tuple(sweep.get("values", ())),
    )
    return kind, mc, exp.get("workers", 1)


MC_COLUMNS = ("index", "sweep_value", "stable", "open_loop_gain", "closed_loop_gain", "a_open", "a_fb")


def cmd_montecarlo(cfg, args):
    kind, mc, workers = _mc_config(cfg)
    if kind == "noise":
        result = run_noise_experiment(mc, workers)
        msg = f"noise sweep over {mc.sweep_axis}: {len(result.per_sample)} evaluations, " \
              f"A_fb < A_o for all stable samples: {result.extras['fb_below_open']}"
    else:
        result = run_robustness_experiment(mc, workers)
        msg = f"suppression ratio = {result.suppression_ratio:.6g} " \
              f"({result.summary['n_used']} used, {result.summary['n_excluded']} unstable excluded)"
    rows = []
    for r in result.per_sample:
        rows.append([str(r["index"]), fmt(r.get("sweep_value", float("nan"))), str(int(r["stable"]))]
                    + [fmt(r[c]) if c in r else "nan" for c in MC_COLUMNS[3:]])
    return list(MC_COLUMNS), rows, msg, result


def _atomic_write(path: str, text: str) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".qfamp-", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def render(cmd, cfg, columns, rows, summary, result=None) -> str:
    if cfg["output"]["format"] == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(columns)
        writer.writerows(rows)
        return buf.getvalue()
    meta = {"artifact_version": __version__, "config": cfg}
    if result is not None:
        doc = _clean(result.to_dict())
        doc["metadata"]["experiment_config"] = doc["metadata"].pop("config")
        doc["metadata"].update(_clean(meta))
        doc["command"] = cmd
    else:
        doc = {"schema_version": SCHEMA_VERSION, "command": cmd, "metadata": _clean(meta),
               "summary": summary, "columns": columns, "rows": rows}
    validate_result(doc)
    return json.dumps(doc, indent=2, sort_keys=True, ensure_ascii=False, allow_nan=False) + "\n"


COMMANDS = {
    "gain": cmd_gain, "poles": cmd_poles, "stability": cmd_stability, "noise": cmd_noise,
    "sensitivity": cmd_sensitivity, "bode": cmd_bode, "montecarlo": cmd_montecarlo,
    "constraints": cmd_constraints,
}


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    if not argv or argv[0] not in SUBCOMMANDS:
        print(USAGE, file=sys.stderr)
        return EXIT_USAGE
    cmd = argv[0]
    try:
        args = _parser(cmd).parse_args(argv[1:])
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    try:
        cfg = effective_config(args)
        out = COMMANDS[cmd](cfg, args)
        columns, rows, summary = out[:3]
        text = render(cmd, cfg, columns, rows, summary, out[3] if len(out) > 3 else None)
    except (ConfigError, ParameterError, DomainError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except PoleEvaluationError as exc:
        print(f"pole on axis: {exc}", file=sys.stderr)
        return EXIT_POLE
    except StabilityFailure as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_NUMERIC
    except (NumericError, DegeneracyError, ExperimentError, RangeError) as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    path = cfg["output"].get("path")
    if path:
        _atomic_write(path, text)
        print(f"{summary} -> {path}")
    else:
        sys.stdout.write(text)
        print(summary, file=sys.stderr)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
