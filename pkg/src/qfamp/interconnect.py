"""Coherent feedback closure of the amplifier's idler port through a passive controller.

The idler output b̃2 is routed into the controller input b3 and the controller
output b̃4 back into the idler input b2.  Lossy transmission lines are modelled
as beam splitters with transmissivities ``alpha1`` (b̃2 -> b3) and ``alpha2``
(b̃4 -> b2) admitting vacuum noise d5, d6.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DegeneracyError, ParameterError
from .models import ControllerModel, PlantModel, build_beam_splitter
from .tfcore import ComplexPoly, RationalFunction, poly_roots, DEFAULT_ROOT_TOL

B1_ROW_LABELS = ("b1", "b4†", "d3", "d4†", "d5†", "d6†")
B3_ROW_LABELS = B1_ROW_LABELS


@dataclass(frozen=True)
class FeedbackLoopConfig:
    alpha1: float = 1.0
    alpha2: float = 1.0

    def __post_init__(self):
        for name in ("alpha1", "alpha2"):
            a = getattr(self, name)
            if not 0.0 < a <= 1.0:
                raise ParameterError(f"{name} must lie in (0, 1], got {a}")

    @property
    def delta1_bs(self) -> float:
        return math.sqrt(1.0 - self.alpha1 ** 2)

    @property
    def delta2_bs(self) -> float:
        return math.sqrt(1.0 - self.alpha2 ** 2)

    @property
    def ideal(self) -> bool:
        return self.alpha1 == 1.0 and self.alpha2 == 1.0


@dataclass(frozen=True)
class ClosedLoopSystem:
    """Closed-loop rows from every external input to b̃1 and to b̃3†.

    ``b1_row[label]`` is G1k^(fb); ``b3_row[label]`` is G2k^(fb).  Inputs
    that are absent from the configuration are omitted.  ``charpoly`` is the
    cleared numerator of ``1 - alpha1 alpha2 K21 G22`` (times the controller
    denominator), i.e. the closed-loop characteristic polynomial.
    """

    plant: PlantModel
    controller: ControllerModel
    loop: FeedbackLoopConfig
    b1_row: dict
    b3_row: dict
    charpoly: ComplexPoly
    _poles: list = field(default=None, repr=False, compare=False)

    @property
    def poles(self) -> list[complex]:
        if self._poles is None:
            roots = poly_roots(self.charpoly, DEFAULT_ROOT_TOL) if self.charpoly.degree >= 1 else []
            object.__setattr__(self, "_poles", roots)
        return self._poles

    def G(self, i: int, j: int) -> RationalFunction:
        """1-based access: ``G(1, k)`` from b1_row, ``G(2, k)`` from b3_row."""
        row = self.b1_row if i == 1 else self.b3_row
        return row.get(B1_ROW_LABELS[j - 1], RationalFunction.constant(0.0))

    def transfer(self, output: str = "b̃1", inputs=None):
        row = self.b1_row if output == "b̃1" else self.b3_row
        return {k: v for k, v in row.items() if inputs is None or k in inputs}


def _common_denominator(entries) -> tuple[ComplexPoly, list[ComplexPoly]]:
    """Write rational functions over one shared denominator.

    Distinct denominators are multiplied together; entries built by the model
    constructors already share theirs, so no degree is added in practice.
    """
    dens: list[ComplexPoly] = []
    for e in entries:
        if not any(_same_poly(e.den, d) for d in dens):
            dens.append(e.den)
    common = ComplexPoly([1.0])
    for d in dens:
        common = common * d
    nums = []
    for e in entries:
        num = e.num
        for d in dens:
            if not _same_poly(e.den, d):
                num = num * d
        nums.append(num)
    return common, nums


def _same_poly(p: ComplexPoly, q: ComplexPoly) -> bool:
    return p.coeffs.size == q.coeffs.size and np.allclose(p.coeffs, q.coeffs, rtol=1e-14, atol=0.0)


def _exact_quotient(p: ComplexPoly, q: ComplexPoly) -> ComplexPoly | None:
    """``p / q`` when ``q`` divides ``p`` up to round-off, else ``None``."""
    if p.is_zero:
        return p
    if q.degree < 1 or p.degree < q.degree:
        return None
    quo, rem = np.polydiv(p.coeffs[::-1], q.coeffs[::-1])
    if np.max(np.abs(rem), initial=0.0) > 1e-12 * np.max(np.abs(p.coeffs)):
        return None
    return ComplexPoly(quo[::-1])


def _signal_row_entry(E, D, C, Nx, X, M21, a) -> RationalFunction:
    # [Gx - a K21 (Gx G22 - G12 G2x)] / (1 - a K21 G22) with Gx = Nx/D, K21 = M21/E
    # and X = Nx N22 - N12 N2x; usually D divides X and the D factor drops out
    Xq = _exact_quotient(X, D)
    if Xq is not None:
        return RationalFunction(E * Nx - a * M21 * Xq, C)
    return RationalFunction(E * D * Nx - a * M21 * X, D * C)


def _closure(plant: PlantModel, controller: ControllerModel, a1: float, a2: float, d1: float, d2: float,
             with_b3: bool) -> tuple[dict, dict, ComplexPoly]:
    """Closed-loop rows as polynomial ratios over the characteristic polynomial.

    With ``Gij = Nij/D``, ``Kij = Mij/E`` and ``a = a1 a2`` every entry is
    rewritten over ``C = E D - a M21 N22``, so that no factor shared by the
    plant entries is ever expanded twice.
    """
    a = a1 * a2
    lossy, noisy = plant.lossy, controller.noisy
    g_entries = [plant.G(1, 1), plant.G(1, 2), plant.G(2, 1), plant.G(2, 2)]
    if lossy:
        g_entries += [plant.G(1, 3), plant.G(2, 3)]
    k_entries = [controller.K(1, 1), controller.K(1, 2), controller.K(2, 1), controller.K(2, 2)]
    if noisy:
        k_entries += [controller.K(1, 3), controller.K(2, 3)]
    D, gn = _common_denominator(g_entries)
    E, kn = _common_denominator(k_entries)
    N11, N12, N21, N22 = gn[:4]
    M11, M12, M21, M22 = kn[:4]
    C = E * D - a * (M21 * N22)
    if C.is_zero:
        raise DegeneracyError("closed-loop denominator 1 - alpha1 alpha2 K21 G22 vanishes identically")

    b1_row = {
        "b1": _signal_row_entry(E, D, C, N11, N11 * N22 - N12 * N21, M21, a),
        "b4†": RationalFunction(a2 * N12 * M22, C),
    }
    if lossy:
        N13, N23 = gn[4:]
        b1_row["d3"] = _signal_row_entry(E, D, C, N13, N13 * N22 - N12 * N23, M21, a)
    if noisy:
        M13, M23 = kn[4:]
        b1_row["d4†"] = RationalFunction(a2 * N12 * M23, C)
    if d1 > 0:
        b1_row["d5†"] = RationalFunction(a2 * d1 * N12 * M21, C)
    if d2 > 0:
        b1_row["d6†"] = RationalFunction(d2 * N12 * E, C)

    b3_row = {}
    if with_b3:
        EC = E * C
        b3_row["b1"] = RationalFunction(a1 * M11 * N21, C)
        b3_row["b4†"] = RationalFunction(M12 * C + a * M11 * N22 * M22, EC)
        if lossy:
            b3_row["d3"] = RationalFunction(a1 * M11 * N23, C)
        if noisy:
            b3_row["d4†"] = RationalFunction(M13 * C + a * M11 * N22 * M23, EC)
        if d1 > 0:
            b3_row["d5†"] = RationalFunction(d1 * M11 * D, C)
        if d2 > 0:
            b3_row["d6†"] = RationalFunction(a1 * d2 * M11 * N22, C)
    return b1_row, b3_row, C


def close_ideal_feedback(plant: PlantModel, controller: ControllerModel) -> ClosedLoopSystem:
    """Lossless closure (b̃2 -> b3, b̃4 -> b2) of a 2x2 plant with a 2x2 controller.

    ``G11fb = (G11 - K21 det G) / (1 - K21 G22)``, ``G12fb = G12 K22 / (1 - K21 G22)``,
    ``G21fb = K11 G21 / (1 - K21 G22)`` and
    ``G22fb = K12 + K11 G22 K22 / (1 - K21 G22)``.
    """
    if plant.lossy:
        raise ParameterError("ideal closure needs a lossless (2x2) plant")
    if controller.noisy:
        raise ParameterError("ideal closure needs a 2x2 controller")
    b1_row, b3_row, char = _closure(plant, controller, 1.0, 1.0, 0.0, 0.0, True)
    return ClosedLoopSystem(plant, controller, FeedbackLoopConfig(), b1_row, b3_row, char)


def closed_form_detuned_fb(kappa: float, lam: float, beta: float) -> RationalFunction:
    """Closed-loop signal gain of the detuned NDPA under beam-splitter feedback.

    ``((1-β)s² + βκs - (1+β)κ²/4 + iκλ) / ((1-β)s² + κs + (1+β)κ²/4 + iβκλ)``
    """
    if not kappa > 0:
        raise ParameterError(f"kappa must be positive, got {kappa}")
    if not abs(beta) < 1:
        raise ParameterError(f"|beta| must be below 1, got {beta}")
    num = ComplexPoly([-(1 + beta) * kappa ** 2 / 4 + 1j * kappa * lam, beta * kappa, 1 - beta])
    den = ComplexPoly([(1 + beta) * kappa ** 2 / 4 + 1j * beta * kappa * lam, kappa, 1 - beta])
    return RationalFunction(num, den)


def close_lossy_feedback(plant: PlantModel, controller: ControllerModel,
                         loop: FeedbackLoopConfig | None = None, *, with_b3: bool = True) -> ClosedLoopSystem:
    """Closure with plant loss (d3), controller noise (d4†) and lossy lines (d5†, d6†).

    With ``a = alpha1 alpha2`` and ``𝐆 = 1 - a K21 G22`` the b̃1 row is::

        G11fb = [G11 - a K21 (G11 G22 - G12 G21)] / 𝐆
        G12fb = alpha2 G12 K22 / 𝐆            (input b4†)
        G13fb = [G13 - a K21 (G13 G22 - G12 G23)] / 𝐆
        G14fb = alpha2 G12 K23 / 𝐆            (input d4†)
        G15fb = alpha2 delta1 G12 K21 / 𝐆      (input d5†)
        G16fb = delta2 G12 / 𝐆                 (input d6†)

    The b̃3† row follows from ``b̃3† = K11 b3† + K12 b4† + K13 d4†`` with
    ``b3† = alpha1 b̃2† + delta1 d5†`` and the solved idler input::

        G21fb = alpha1 K11 G21 / 𝐆
        G22fb = K12 + alpha1 alpha2 K11 G22 K22 / 𝐆
        G23fb = alpha1 K11 G23 / 𝐆
        G24fb = K13 + alpha1 alpha2 K11 G22 K23 / 𝐆
        G25fb = delta1 K11 / 𝐆
        G26fb = alpha1 delta2 K11 G22 / 𝐆

    Missing plant/controller noise columns are treated as zero and their
    inputs omitted; with ``alpha1 = alpha2 = 1`` the d5†, d6† inputs vanish.
    ``with_b3=False`` skips the b̃3† row.
    """
    loop = loop or FeedbackLoopConfig()
    b1_row, b3_row, char = _closure(plant, controller, loop.alpha1, loop.alpha2, loop.delta1_bs,
                                    loop.delta2_bs, with_b3)
    return ClosedLoopSystem(plant, controller, loop, b1_row, b3_row, char)


def close_feedback(plant: PlantModel, controller: ControllerModel,
                   loop: FeedbackLoopConfig | None = None) -> ClosedLoopSystem:
    """Ideal closure when nothing is lossy, lossy closure otherwise."""
    if (loop is None or loop.ideal) and not plant.lossy and not controller.noisy:
        return close_ideal_feedback(plant, controller)
    return close_lossy_feedback(plant, controller, loop)


def port_elimination_response(plant: PlantModel, controller: ControllerModel,
                              loop: FeedbackLoopConfig | None, s: complex) -> dict:
    """Closed-loop responses at one point ``s`` by solving the port equations.

    Independent of the symbolic closure formulas: the internal idler fields
    ``x = (b2†, b3†)`` obey ``b3† = alpha1 (G21 b1 + G22 b2† + G23 d3) + delta1 d5†``
    and ``b2† = alpha2 (K21 b3† + K22 b4† + K23 d4†) + delta2 d6†``, a 2x2 linear
    system solved numerically for each unit external input.  Returns
    ``{"b̃1": {label: value}, "b̃3†": {label: value}}`` over all six inputs.
    """
    loop = loop or FeedbackLoopConfig()
    a1, a2, d1, d2 = loop.alpha1, loop.alpha2, loop.delta1_bs, loop.delta2_bs
    G = plant.matrix.evaluate(s)
    K = controller.matrix.evaluate(s)
    G = np.hstack([G, np.zeros((2, 3 - G.shape[1]))])
    K = np.hstack([K, np.zeros((2, 3 - K.shape[1]))])
    # unknowns x = [b2†, b3†];  A x = B u  with u = (b1, b4†, d3, d4†, d5†, d6†)
    A = np.array([[1.0, -a2 * K[1, 0]],
                  [-a1 * G[1, 1], 1.0]], dtype=complex)
    B = np.zeros((2, 6), dtype=complex)
    B[0, 1] = a2 * K[1, 1]
    B[0, 3] = a2 * K[1, 2]
    B[0, 5] = d2
    B[1, 0] = a1 * G[1, 0]
    B[1, 2] = a1 * G[1, 2]
    B[1, 4] = d1
    X = np.linalg.solve(A, B)
    b2d, b3d = X[0], X[1]
    direct1 = np.array([G[0, 0], 0, G[0, 2], 0, 0, 0], dtype=complex)
    out1 = direct1 + G[0, 1] * b2d
    direct3 = np.array([0, K[0, 1], 0, K[0, 2], 0, 0], dtype=complex)
    out3 = direct3 + K[0, 0] * b3d
    return {"b̃1": dict(zip(B1_ROW_LABELS, out1)), "b̃3†": dict(zip(B3_ROW_LABELS, out3))}


def phase_conjugating_gain(system: ClosedLoopSystem, omega: float) -> float:
    """``|G21^(fb)(i omega)|``, the gain from b1† to the auxiliary output b̃3.

    Tends to ``sqrt(1/|K21|² - 1)`` when the plant's conjugating gain diverges.
    """
    if "b1" not in system.b3_row:
        raise ParameterError("closed-loop system has no b̃3† row")
    return abs(system.b3_row["b1"](1j * omega))


def phase_conjugating_limit(K21: complex) -> float:
    return math.sqrt(1.0 / abs(K21) ** 2 - 1.0)


def classical_feedback_gain(G: float, K: float) -> float:
    """Negative-feedback gain ``G / (1 + G K)``."""
    den = 1.0 + G * K
    if den == 0:
        raise DegeneracyError("1 + G K = 0")
    return G / den


def ideal_loop(plant: PlantModel, beta: float) -> ClosedLoopSystem:
    return close_ideal_feedback(plant, build_beam_splitter(beta))
