"""Seeded Monte Carlo robustness and added-noise experiments on the detuned NDPA.

Each sample draws ``(eps0, eps1, eps2)`` uniformly on ``[-1, 1]`` and perturbs
the nominal plant as ``lam = (1 + r_l eps0) lam0``, ``delta_i = (1 + r_d eps_i) base``
where ``base`` is the perturbed ``lam`` (default) or ``lam0``.

Sample ``i`` uses its own generator,
``Generator(Philox(SeedSequence([seed, i])))``, so results do not depend on
evaluation order or worker count.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from . import __version__
from .analysis import added_noise, sensitivity_bound, stability
from .errors import ExperimentError, ParameterError
from .interconnect import FeedbackLoopConfig, close_lossy_feedback
from .models import PlantModel, build_beam_splitter, build_ndpa

RNG_NAME = "numpy.random.Philox(4x64-10) seeded by SeedSequence([seed, sample_index])"
DEFAULT_NOISE_GAMMAS = (0.01, 0.05, 0.1)
SUMMARY_COLUMNS = ("open_loop_gain", "closed_loop_gain", "a_open", "a_fb")


@dataclass(frozen=True)
class PerturbationSpec:
    rel_lambda: float = 0.1
    rel_delta: float = 0.001
    # detunings scale the perturbed coupling unless this is "nominal"
    delta_base: str = "perturbed"

    def __post_init__(self):
        if self.rel_lambda < 0 or self.rel_delta < 0:
            raise ParameterError("perturbation magnitudes must be nonnegative")
        if self.delta_base not in ("perturbed", "nominal"):
            raise ParameterError(f"delta_base must be 'perturbed' or 'nominal', got {self.delta_base!r}")


@dataclass(frozen=True)
class MonteCarloConfig:
    seed: int = 0
    n_samples: int = 50
    kappa: float = 1.0
    lambda0: float = 5.0
    gamma: float = 0.0
    beta: float = 0.1
    alpha1: float = 0.99
    alpha2: float = 0.99
    omega_eval: float = 0.0
    perturbation: PerturbationSpec = field(default_factory=PerturbationSpec)
    sweep_axis: str | None = None
    sweep_values: tuple = ()
    curve_omegas: tuple = ()

    def __post_init__(self):
        if self.n_samples < 1:
            raise ParameterError("n_samples must be at least 1")
        if self.sweep_axis not in (None, "gamma", "alpha"):
            raise ParameterError(f"unknown sweep axis {self.sweep_axis!r}")
        object.__setattr__(self, "sweep_values", tuple(float(v) for v in self.sweep_values))
        object.__setattr__(self, "curve_omegas", tuple(float(v) for v in self.curve_omegas))

    @property
    def loop(self) -> FeedbackLoopConfig:
        return FeedbackLoopConfig(self.alpha1, self.alpha2)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["sweep_values"] = list(self.sweep_values)
        d["curve_omegas"] = list(self.curve_omegas)
        return d


@dataclass
class MonteCarloResult:
    config: MonteCarloConfig
    kind: str
    per_sample: list
    summary: dict
    suppression_ratio: float | None = None
    extras: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "schema_version": 1,
            "kind": self.kind,
            "metadata": {
                "artifact_version": __version__,
                "seed": self.config.seed,
                "rng": RNG_NAME,
                "numpy_version": np.__version__,
                "config": self.config.to_dict(),
            },
            "summary": self.summary,
            "suppression_ratio": self.suppression_ratio,
            "extras": self.extras,
            "per_sample": self.per_sample,
        }

    def to_json(self) -> str:
        return json.dumps(_clean(self.to_dict()), indent=2, sort_keys=True, allow_nan=False)


def _clean(obj):
    """Round floats to 12 significant digits; NaN/inf become null."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if not math.isfinite(x):
            return None
        return float("%.12g" % x)
    return obj


def sample_epsilons(seed: int, index: int) -> tuple[float, float, float]:
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, index])))
    e = rng.uniform(-1.0, 1.0, size=3)
    return float(e[0]), float(e[1]), float(e[2])


def sample_perturbed_plant(kappa: float, lambda0: float, gamma: float, spec: PerturbationSpec,
                           draws: Sequence[float]) -> PlantModel:
    """Perturbed detuned NDPA for one draw ``(eps0, eps1, eps2)`` in ``[-1, 1]^3``."""
    e0, e1, e2 = draws
    if max(abs(e0), abs(e1), abs(e2)) > 1:
        raise ParameterError("perturbation draws must lie in [-1, 1]")
    lam = (1 + spec.rel_lambda * e0) * lambda0
    base = lam if spec.delta_base == "perturbed" else lambda0
    return build_ndpa(kappa, lam, (1 + spec.rel_delta * e1) * base, (1 + spec.rel_delta * e2) * base, gamma)


def summarize(records: Sequence[dict], columns=SUMMARY_COLUMNS) -> dict:
    """Mean/std/min/max of each column over the records flagged stable."""
    used = [r for r in records if r["stable"]]
    out = {"n_used": len(used), "n_excluded": len(records) - len(used)}
    for col in columns:
        vals = np.array([r[col] for r in used if col in r], dtype=float)
        if vals.size == 0:
            continue
        out[col] = {"mean": float(vals.mean()), "std": float(vals.std()),
                    "min": float(vals.min()), "max": float(vals.max())}
    return out


def _map(fn, items, workers: int):
    if workers <= 1:
        return [fn(i) for i in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def _robustness_sample(cfg: MonteCarloConfig, controller, index: int) -> dict:
    eps = sample_epsilons(cfg.seed, index)
    plant = sample_perturbed_plant(cfg.kappa, cfg.lambda0, cfg.gamma, cfg.perturbation, eps)
    system = close_lossy_feedback(plant, controller, cfg.loop, with_b3=False)
    open_ok = stability(plant).stable
    closed_ok = stability(system).stable
    s = 1j * cfg.omega_eval
    rec = {
        "index": index,
        "epsilons": list(eps),
        "open_stable": open_ok,
        "closed_stable": closed_ok,
        "stable": open_ok and closed_ok,
        "g22": [plant.G(2, 2)(s).real, plant.G(2, 2)(s).imag],
    }
    if rec["stable"]:
        rec["open_loop_gain"] = abs(plant.G(1, 1)(s))
        rec["closed_loop_gain"] = abs(system.b1_row["b1"](s))
        rec["a_open"] = added_noise(plant, cfg.omega_eval, "plant").a_value
        rec["a_fb"] = added_noise(system, cfg.omega_eval, "closed_loop").a_value
        if cfg.curve_omegas:
            w = 1j * np.asarray(cfg.curve_omegas)
            rec["open_curve"] = list(np.abs(plant.G(1, 1)(w)))
            rec["closed_curve"] = list(np.abs(system.b1_row["b1"](w)))
    return rec


def run_robustness_experiment(cfg: MonteCarloConfig, workers: int = 1) -> MonteCarloResult:
    """Gain spread with and without feedback over perturbed plants.

    ``suppression_ratio`` is the ratio of normalized spreads
    ``(std/mean)_closed / (std/mean)_open`` of the gain at ``omega_eval``, the
    quantity bounded by ``1/|1 - a K21 G22|``.  The plain ``std_closed/std_open``
    is kept in ``extras["absolute_suppression_ratio"]``.  For each sample,
    ``extras`` also records the normalized closed-loop deviation from the
    nominal design divided by ``|dG22|/|G22|`` and whether it stays within the
    nominal sensitivity bound.
    """
    controller = build_beam_splitter(cfg.beta)
    nominal = sample_perturbed_plant(cfg.kappa, cfg.lambda0, cfg.gamma, cfg.perturbation, (0.0, 0.0, 0.0))
    nominal_sys = close_lossy_feedback(nominal, controller, cfg.loop)
    if not stability(nominal_sys).stable:
        raise ExperimentError("nominal closed loop is unstable")
    records = _map(lambda i: _robustness_sample(cfg, controller, i), range(cfg.n_samples), workers)
    used = [r for r in records if r["stable"]]
    if not used:
        raise ExperimentError("every perturbed sample is unstable")

    s = 1j * cfg.omega_eval
    g22_nom = complex(nominal.G(2, 2)(s))
    closed_nom = abs(nominal_sys.b1_row["b1"](s))
    a = cfg.alpha1 * cfg.alpha2
    bound = 1.0 / abs(1 - a * cfg.beta * g22_nom)
    respected = True
    for r in used:
        dg22 = abs(complex(*r["g22"]) - g22_nom) / abs(g22_nom)
        dfb = abs(r["closed_loop_gain"] - closed_nom) / closed_nom
        r["deviation_ratio"] = dfb / dg22 if dg22 > 0 else 0.0
        r["bound_respected"] = dfb <= bound * dg22 * (1 + 1e-12)
        respected = respected and r["bound_respected"]

    summary = summarize(records)
    o = summary["open_loop_gain"]
    c = summary["closed_loop_gain"]
    zero_spread = o["std"] == 0.0
    if zero_spread:
        ratio = abs_ratio = float("nan")
    else:
        abs_ratio = c["std"] / o["std"]
        ratio = (c["std"] / c["mean"]) / (o["std"] / o["mean"])
    extras = {
        "absolute_suppression_ratio": abs_ratio,
        "zero_spread": zero_spread,
        "sensitivity_bound": bound,
        "ideal_sensitivity_bound": sensitivity_bound(nominal, controller, cfg.omega_eval)
        if not nominal.lossy else None,
        "bound_respected": respected,
        "nominal_open_gain": abs(nominal.G(1, 1)(s)),
        "nominal_closed_gain": closed_nom,
    }
    return MonteCarloResult(cfg, "robustness", records, summary, ratio, extras)


def _noise_sample(cfg: MonteCarloConfig, controller, value: float, index: int) -> dict:
    eps = sample_epsilons(cfg.seed, index)
    gamma = value if cfg.sweep_axis == "gamma" else cfg.gamma
    alpha = value if cfg.sweep_axis == "alpha" else None
    loop = FeedbackLoopConfig(alpha, alpha) if alpha is not None else cfg.loop
    plant = sample_perturbed_plant(cfg.kappa, cfg.lambda0, gamma, cfg.perturbation, eps)
    system = close_lossy_feedback(plant, controller, loop, with_b3=False)
    ok = stability(plant).stable and stability(system).stable
    rec = {"index": index, "sweep_value": value, "epsilons": list(eps), "stable": ok}
    if ok:
        rec["a_open"] = added_noise(plant, cfg.omega_eval, "plant").a_value
        rec["a_fb"] = added_noise(system, cfg.omega_eval, "closed_loop").a_value
        rec["open_loop_gain"] = abs(plant.G(1, 1)(1j * cfg.omega_eval))
        rec["closed_loop_gain"] = abs(system.b1_row["b1"](1j * cfg.omega_eval))
    return rec


def run_noise_experiment(cfg: MonteCarloConfig, workers: int = 1) -> MonteCarloResult:
    """Added noise of the open plant and the feedback system along a sweep.

    The sweep runs over signal loss ``gamma`` (axis ``"gamma"``) or over the
    line transmissivity ``alpha1 = alpha2`` (axis ``"alpha"``).  The same
    per-sample perturbation draws are reused at every sweep point.
    """
    if cfg.sweep_axis is None or not cfg.sweep_values:
        raise ParameterError("noise experiment needs a nonempty sweep")
    controller = build_beam_splitter(cfg.beta)
    jobs = [(v, i) for v in cfg.sweep_values for i in range(cfg.n_samples)]
    records = _map(lambda job: _noise_sample(cfg, controller, *job), jobs, workers)
    if not any(r["stable"] for r in records):
        raise ExperimentError("every perturbed sample is unstable")
    summary = {"%.12g" % v: summarize([r for r in records if r["sweep_value"] == v])
               for v in cfg.sweep_values}
    extras = {"sweep_axis": cfg.sweep_axis,
              "fb_below_open": all(r["a_fb"] < r["a_open"] for r in records if r["stable"])}
    return MonteCarloResult(cfg, "noise", records, summary, None, extras)


def robustness_config(seed: int = 0, **overrides) -> MonteCarloConfig:
    """Robustness setup: lam0 = 5, beta = 0.1, alpha1 = alpha2 = 0.99, 50 samples."""
    base = dict(seed=seed, n_samples=50, lambda0=5.0, beta=0.1, alpha1=0.99, alpha2=0.99, gamma=0.0,
                curve_omegas=tuple(np.linspace(-1.0, 1.0, 101)))
    base.update(overrides)
    return MonteCarloConfig(**base)


def noise_vs_loss_config(seed: int = 0, **overrides) -> MonteCarloConfig:
    """Added noise versus gamma in [0, 0.2] with very lossy lines (alpha = 0.5)."""
    base = dict(seed=seed, n_samples=50, lambda0=5.0, beta=0.1, alpha1=0.5, alpha2=0.5,
                sweep_axis="gamma", sweep_values=tuple(np.linspace(0.0, 0.2, 11)))
    base.update(overrides)
    return MonteCarloConfig(**base)


def noise_vs_line_config(gamma: float, seed: int = 0, **overrides) -> MonteCarloConfig:
    """Added noise versus alpha1 = alpha2 in [0.5, 1] at fixed gamma."""
    base = dict(seed=seed, n_samples=50, lambda0=5.0, beta=0.1, gamma=gamma,
                sweep_axis="alpha", sweep_values=tuple(np.linspace(0.5, 1.0, 11)))
    base.update(overrides)
    return MonteCarloConfig(**base)
