"""Stability, gain profiles, added noise and sensitivity of amplifier models.

Frequencies and rates are in units of the reference cavity decay rate.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Union

import numpy as np

from .errors import DegeneracyError, ParameterError, PoleEvaluationError, RangeError
from .interconnect import ClosedLoopSystem
from .models import ControllerModel, PlantModel
from .tfcore import RationalFunction, poly_roots

DEFAULT_MARGIN = 1e-9

System = Union[PlantModel, ClosedLoopSystem]


@dataclass(frozen=True)
class StabilityVerdict:
    poles: list
    max_real_part: float
    stable: bool
    margin: float
    marginal: bool = False

    def summary(self) -> str:
        state = "stable" if self.stable else ("marginal (unstable)" if self.marginal else "unstable")
        return f"{state}, max Re(pole) = {self.max_real_part:.12g}"


def _charpoly(system):
    if isinstance(system, (PlantModel, ClosedLoopSystem)):
        return system.charpoly
    if isinstance(system, RationalFunction):
        return system.den
    raise TypeError(f"cannot extract a characteristic polynomial from {type(system).__name__}")


def stability(system, margin: float = DEFAULT_MARGIN) -> StabilityVerdict:
    """Pole-location verdict: stable iff every pole has ``Re < -margin``.

    Poles inside the band ``|Re| <= margin`` are flagged marginal and count
    as unstable.
    """
    char = _charpoly(system)
    poles = poly_roots(char) if char.degree >= 1 else []
    if not poles:
        return StabilityVerdict([], -math.inf, True, margin)
    worst = max(p.real for p in poles)
    return StabilityVerdict(poles, worst, worst < -margin, margin, abs(worst) <= margin)


def detuned_stability_threshold(kappa: float, beta: float) -> float:
    """Largest ``|lambda|`` keeping the beam-splitter-controlled detuned NDPA stable.

    ``(kappa/2) sqrt((1 + beta) / (beta² (1 - beta)))``; for ``beta² << 1`` this
    is roughly ``kappa / (2 |beta|)``.  ``beta = 0`` returns ``inf``.
    """
    if not abs(beta) < 1:
        raise ParameterError(f"|beta| must be below 1, got {beta}")
    if beta == 0:
        return math.inf
    return 0.5 * kappa * math.sqrt((1 + beta) / (beta * beta * (1 - beta)))


@dataclass(frozen=True)
class GainCurve:
    omegas: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.omegas, dtype=float)
        v = np.asarray(self.values, dtype=complex)
        if w.shape != v.shape:
            raise ParameterError("omegas and values differ in length")
        if w.size > 1 and not np.all(np.diff(w) > 0):
            raise ParameterError("omegas must be strictly increasing")
        object.__setattr__(self, "omegas", w)
        object.__setattr__(self, "values", v)

    @property
    def magnitude(self) -> np.ndarray:
        return np.abs(self.values)

    @property
    def gain_db(self) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return 20.0 * np.log10(np.abs(self.values))

    @property
    def phase_deg(self) -> np.ndarray:
        return np.degrees(np.angle(self.values))

    @property
    def phase_unwrapped_deg(self) -> np.ndarray:
        return np.degrees(np.unwrap(np.angle(self.values)))

    def peak(self) -> tuple[float, float]:
        i = int(np.argmax(self.magnitude))
        return float(self.omegas[i]), float(self.gain_db[i])


def _signal_gain(system) -> RationalFunction:
    if isinstance(system, PlantModel):
        return system.G(1, 1)
    if isinstance(system, ClosedLoopSystem):
        return system.b1_row["b1"]
    if isinstance(system, RationalFunction):
        return system
    raise TypeError(f"no signal gain for {type(system).__name__}")


def _eval_on_axis(r: RationalFunction, omegas):
    try:
        return r(1j * np.asarray(omegas, dtype=float))
    except PoleEvaluationError as exc:
        w = float(np.imag(exc.s)) if exc.s is not None else float("nan")
        raise PoleEvaluationError(f"pole on the imaginary axis at omega = {w:.6g}", s=exc.s) from exc


def gain_profile(system, omega_min: float, omega_max: float, n_points: int) -> GainCurve:
    """Signal gain ``G11`` (or ``G11^(fb)``) on a uniform frequency grid."""
    if n_points < 2:
        raise ParameterError("gain profile needs at least two points")
    if not omega_max > omega_min:
        raise ParameterError("omega_max must exceed omega_min")
    w = np.linspace(omega_min, omega_max, n_points)
    return GainCurve(w, _eval_on_axis(_signal_gain(system), w))


def _crossing(w, g, level, start, step):
    i = start
    while 0 <= i + step < len(g):
        j = i + step
        if g[j] <= level:
            t = (g[i] - level) / (g[i] - g[j])
            return w[i] + t * (w[j] - w[i])
        i = j
    return None


def effective_bandwidth(curve: GainCurve, drop_db: float = 3.0) -> float:
    """Half-width of the band around the gain peak before it drops by ``drop_db``.

    The crossings on each side of the peak are located by linear
    interpolation of the dB curve; the result is half their separation.
    """
    g = curve.gain_db
    i = int(np.argmax(g))
    level = g[i] - drop_db
    right = _crossing(curve.omegas, g, level, i, +1)
    left = _crossing(curve.omegas, g, level, i, -1)
    if right is None or left is None:
        raise RangeError(f"gain does not fall {drop_db} dB below its peak inside the sampled range")
    return 0.5 * (right - left)


@dataclass(frozen=True)
class NoiseReport:
    omega: float
    a_value: float
    flavor: str
    decomposition: dict = field(default_factory=dict)


def _noise_report(omega, g11, excess, flavor):
    m2 = abs(g11) ** 2
    if m2 == 0:
        raise DegeneracyError(f"signal gain vanishes at omega = {omega}")
    terms = {"half_term": 0.5, "gain_term": -0.5 / m2, "excess_term": excess}
    return NoiseReport(float(omega), sum(terms.values()), flavor, terms)


def added_noise(system, omega: float = 0.0, flavor: str | None = None) -> NoiseReport:
    """Added noise of a phase-preserving amplifier with vacuum noise inputs.

    Flavors
    -------
    ideal
        ``(|g1|² - 1) / (2 |g1|²)`` from the signal gain alone.
    plant
        ``1/2 - 1/(2|G11|²) + |G13|²/|G11|²`` for a (lossy) plant.
    closed_loop
        Same form for the feedback system, with the excess ratio
        ``|G13 - a K21 (G13 G22 - G12 G23)|² / |G11 - a K21 (G11 G22 - G12 G21)|²``
        evaluated from plant and controller responses (``a = alpha1 alpha2``).
    """
    s = 1j * omega
    if flavor is None:
        flavor = "closed_loop" if isinstance(system, ClosedLoopSystem) else "plant"
    if flavor == "ideal":
        g1 = complex(_eval_on_axis(_signal_gain(system), omega))
        return _noise_report(omega, g1, 0.0, "ideal")
    if flavor == "plant":
        plant = system.plant if isinstance(system, ClosedLoopSystem) else system
        G = plant.matrix.evaluate(s)
        g13 = G[0, 2] if plant.lossy else 0.0
        return _noise_report(omega, G[0, 0], abs(g13) ** 2 / abs(G[0, 0]) ** 2, "plant")
    if flavor == "closed_loop":
        if not isinstance(system, ClosedLoopSystem):
            raise ParameterError("closed_loop noise needs a ClosedLoopSystem")
        plant, ctrl, loop = system.plant, system.controller, system.loop
        G = plant.matrix.evaluate(s)
        g11, g12, g21, g22 = G[0, 0], G[0, 1], G[1, 0], G[1, 1]
        g13 = G[0, 2] if plant.lossy else 0.0
        g23 = G[1, 2] if plant.lossy else 0.0
        k21 = complex(ctrl.K(2, 1)(s))
        a = loop.alpha1 * loop.alpha2
        top = g13 - a * k21 * (g13 * g22 - g12 * g23)
        bottom = g11 - a * k21 * (g11 * g22 - g12 * g21)
        if bottom == 0:
            raise DegeneracyError(f"closed-loop signal gain vanishes at omega = {omega}")
        gfb = complex(system.b1_row["b1"](s))
        return _noise_report(omega, gfb, abs(top) ** 2 / abs(bottom) ** 2, "closed_loop")
    raise ParameterError(f"unknown noise flavor {flavor!r}")


def added_noise_from_row(row_values: dict) -> float:
    """Added noise as (sum of non-signal |G1k|²) / (2 |G11|²); ``row_values`` keyed by input label."""
    g11 = abs(row_values["b1"]) ** 2
    rest = sum(abs(v) ** 2 for k, v in row_values.items() if k != "b1")
    return rest / (2.0 * g11)


def noise_limit(plant: PlantModel, omega: float = 0.0) -> float:
    """Large-gain limit ``1/2 + |G13|²/|G11|²`` of the plant's added noise."""
    G = plant.matrix.evaluate(1j * omega)
    g13 = G[0, 2] if plant.lossy else 0.0
    return 0.5 + abs(g13) ** 2 / abs(G[0, 0]) ** 2


def sensitivity_bound(plant: PlantModel, controller: ControllerModel, omega: float = 0.0) -> float:
    """Suppression factor ``1 / |1 - K21 G22|`` of relative plant-gain fluctuations."""
    s = 1j * omega
    g22 = complex(_eval_on_axis(plant.G(2, 2), omega))
    k21 = complex(controller.K(2, 1)(s))
    den = abs(1 - k21 * g22)
    if den == 0:
        raise DegeneracyError("1 - K21 G22 = 0")
    return 1.0 / den


def first_order_gain_fluctuation(G22: complex, K21: complex, dG22: complex) -> float:
    """First-order relative change of ``|G11^(fb)|`` caused by ``G22 -> G22 + dG22``.

    Uses the exact form ``|G11^(fb)| = |G22* - K21| / |1 - K21 G22|``.
    """
    loop = 1 - K21 * G22
    if loop == 0:
        raise DegeneracyError("1 - K21 G22 = 0")
    x = np.conj(G22) - K21
    return float((1 - abs(K21) ** 2) / abs(x) ** 2 * ((x / loop) * dG22).real)


def closed_loop_gain_ratio(G22: complex, K21: complex) -> float:
    """``|G22* - K21| / |1 - K21 G22|``, the closed-loop gain of a lossless plant."""
    return abs(np.conj(G22) - K21) / abs(1 - K21 * G22)


def classical_sensitivity_factor(G: float, K: float) -> float:
    den = 1 + G * K
    if den == 0:
        raise DegeneracyError("1 + G K = 0")
    return 1.0 / den


def loop_gain_bode(plant: PlantModel, controller: ControllerModel, grid) -> GainCurve:
    """Loop gain ``K21(i w) G22(i w)``; use ``gain_db`` and ``phase_unwrapped_deg`` for Bode data."""
    w = np.asarray(grid, dtype=float)
    g22 = _eval_on_axis(plant.G(2, 2), w)
    k21 = _eval_on_axis(controller.K(2, 1), w)
    return GainCurve(w, np.asarray(k21 * g22, dtype=complex))


GAIN_COLUMNS = ("omega", "re", "im", "gain_db", "phase_deg")
NOISE_COLUMNS = ("omega", "a_value", "half_term", "gain_term", "excess_term")


def fmt(x: float) -> str:
    return "%.12g" % x


def gain_rows(curve: GainCurve):
    for w, v, g, p in zip(curve.omegas, curve.values, curve.gain_db, curve.phase_deg):
        yield [fmt(w), fmt(v.real), fmt(v.imag), fmt(g), fmt(p)]


def noise_rows(reports):
    for r in reports:
        d = r.decomposition
        yield [fmt(r.omega), fmt(r.a_value), fmt(d["half_term"]), fmt(d["gain_term"]), fmt(d["excess_term"])]


def write_csv(path, header, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)

