"""Plant (NDPA) and controller (passive scattering element) transfer matrices."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ParameterError, PoleEvaluationError
from .tfcore import ComplexPoly, RationalFunction, RationalMatrix, poly_roots, DEFAULT_ROOT_TOL

PLANT_ROWS = ("b̃1", "b̃2†")
PLANT_COLS = ("b1", "b2†")
PLANT_COLS_LOSSY = ("b1", "b2†", "d3")
CTRL_ROWS = ("b̃3†", "b̃4†")
CTRL_COLS = ("b3†", "b4†")
CTRL_COLS_NOISY = ("b3†", "b4†", "d4†")


@dataclass(frozen=True)
class PlantModel:
    """Nondegenerate parametric amplifier with optional signal loss.

    ``matrix`` maps (b1, b2†[, d3]) to (b̃1, b̃2†).  ``charpoly`` is the common
    denominator whose roots are the plant poles.
    """

    kappa: float
    lam: float
    delta1: float
    delta2: float
    gamma: float
    matrix: RationalMatrix
    charpoly: ComplexPoly

    @property
    def lossy(self) -> bool:
        return self.matrix.shape[1] == 3

    def G(self, i: int, j: int) -> RationalFunction:
        """1-based entry access, ``G(1, 1)`` is the signal gain."""
        return self.matrix[i - 1, j - 1]

    def poles(self, tol: float = DEFAULT_ROOT_TOL) -> list[complex]:
        return poly_roots(self.charpoly, tol)

    def params(self) -> dict:
        return {"kappa": self.kappa, "lambda": self.lam, "delta1": self.delta1,
                "delta2": self.delta2, "gamma": self.gamma}


@dataclass(frozen=True)
class ControllerModel:
    """Passive two-port in the creation-operator representation.

    ``matrix`` maps (b3†, b4†[, d4†]) to (b̃3†, b̃4†).
    """

    kind: str
    matrix: RationalMatrix
    alpha: float | None = None
    beta: float | None = None

    @property
    def noisy(self) -> bool:
        return self.matrix.shape[1] == 3

    def K(self, i: int, j: int) -> RationalFunction:
        return self.matrix[i - 1, j - 1]


def _poly(*coeffs) -> ComplexPoly:
    return ComplexPoly(list(coeffs))


def build_ndpa(kappa: float, lam: float, delta1: float = 0.0, delta2: float = 0.0,
               gamma: float = 0.0) -> PlantModel:
    """NDPA transfer matrix from its Langevin equations.

    With ``P = s + (kappa+gamma)/2 + i delta1``, ``Q = s + kappa/2 - i delta2``
    and ``D = P Q - lam**2``::

        G11 = ((P - kappa) Q - lam**2) / D      G12 = -kappa lam / D
        G21 = -kappa lam / D                    G22 = ((Q - kappa) P - lam**2) / D
        G13 = -sqrt(kappa gamma) Q / D          G23 = -sqrt(kappa gamma) lam / D

    The loss column (d3) is present only when ``gamma > 0``.
    """
    if not kappa > 0:
        raise ParameterError(f"kappa must be positive, got {kappa}")
    if gamma < 0:
        raise ParameterError(f"gamma must be nonnegative, got {gamma}")
    P = _poly((kappa + gamma) / 2 + 1j * delta1, 1.0)
    Q = _poly(kappa / 2 - 1j * delta2, 1.0)
    lam2 = lam * lam
    D = P * Q - lam2
    g11 = RationalFunction((P - kappa) * Q - lam2, D)
    g22 = RationalFunction((Q - kappa) * P - lam2, D)
    g12 = RationalFunction(_poly(-kappa * lam), D)
    g21 = RationalFunction(_poly(-kappa * lam), D)
    if gamma > 0:
        root = math.sqrt(kappa * gamma)
        g13 = RationalFunction(-root * Q, D)
        g23 = RationalFunction(_poly(-root * lam), D)
        matrix = RationalMatrix(((g11, g12, g13), (g21, g22, g23)), PLANT_ROWS, PLANT_COLS_LOSSY)
    else:
        matrix = RationalMatrix(((g11, g12), (g21, g22)), PLANT_ROWS, PLANT_COLS)
    return PlantModel(kappa, lam, delta1, delta2, gamma, matrix, D)


def build_detuned_ndpa(kappa: float, lam: float) -> PlantModel:
    """NDPA with detuning ``delta1 = delta2 = lam`` in its closed form.

    ``G = [[s² - κ²/4 + iκλ, -κλ], [-κλ, s² - κ²/4 - iκλ]] / (s + κ/2)²``;
    the double pole at ``-κ/2`` does not depend on ``lam``.
    """
    if not kappa > 0:
        raise ParameterError(f"kappa must be positive, got {kappa}")
    D = _poly(kappa * kappa / 4, kappa, 1.0)
    g11 = RationalFunction(_poly(-kappa * kappa / 4 + 1j * kappa * lam, 0.0, 1.0), D)
    g22 = RationalFunction(_poly(-kappa * kappa / 4 - 1j * kappa * lam, 0.0, 1.0), D)
    off = RationalFunction(_poly(-kappa * lam), D)
    matrix = RationalMatrix(((g11, off), (off, g22)), PLANT_ROWS, PLANT_COLS)
    return PlantModel(kappa, lam, lam, lam, 0.0, matrix, D)


def build_beam_splitter(beta: float) -> ControllerModel:
    """Beam splitter ``[[alpha, beta], [beta, -alpha]]`` with ``alpha = sqrt(1 - beta²)``."""
    if abs(beta) > 1:
        raise ParameterError(f"|beta| must not exceed 1, got {beta}")
    alpha = math.sqrt(max(0.0, 1.0 - beta * beta))
    matrix = RationalMatrix.from_constants([[alpha, beta], [beta, -alpha]], CTRL_ROWS, CTRL_COLS)
    return ControllerModel("beam_splitter", matrix, alpha=alpha, beta=beta)


def passive_controller(entries: Sequence[Sequence], grid=None, tol: float = 1e-9) -> ControllerModel:
    """Wrap a caller-supplied 2x2 or 2x3 controller, checking passivity on ``grid``.

    Entries may be numbers or :class:`RationalFunction` objects.  A third
    column is interpreted as the controller noise input d4†.
    """
    rows = tuple(tuple(e if isinstance(e, RationalFunction) else RationalFunction.constant(e)
                       for e in row) for row in entries)
    ncols = len(rows[0])
    if len(rows) != 2 or ncols not in (2, 3):
        raise ParameterError("controller must be 2x2 or 2x3")
    cols = CTRL_COLS if ncols == 2 else CTRL_COLS_NOISY
    matrix = RationalMatrix(rows, CTRL_ROWS, cols)
    grid = np.linspace(-5.0, 5.0, 41) if grid is None else grid
    if passivity_residual(matrix, grid) > tol:
        raise ParameterError("controller is not passive (K K† != I on the grid)")
    return ControllerModel("passive_tf", matrix)


def passivity_residual(matrix: RationalMatrix, grid) -> float:
    """Max deviation of ``K(iw) K(iw)†`` from the identity.

    For square K this is equivalent to ``K† K = I``; for the 2x3 noisy
    controller only the row form can hold.
    """
    K = matrix.frequency_response(grid)
    eye = np.eye(K.shape[1])
    prod = K @ np.conj(np.swapaxes(K, -1, -2))
    return float(np.max(np.abs(prod - eye)))


@dataclass(frozen=True)
class ConstraintReport:
    omegas: np.ndarray
    residuals: dict
    max_residual: float
    passed: bool
    tol: float


def check_scattering_constraints(m: RationalMatrix, grid, tol: float = 1e-9) -> ConstraintReport:
    """Bosonic commutator constraints of a transfer matrix on ``s = i w``.

    With ``J`` = +1 for annihilation columns and -1 for creation columns and
    ``sigma`` the same sign for the output rows, the matrix must satisfy
    ``G J G† = diag(sigma)``.  For the plant this is the familiar
    ``|G11|² - |G12|² (+ |G13|²) = |G22|² - |G21|² (- |G23|²) = 1`` and the
    cross term ``G21 G11* - G22 G12* (+ G23 G13*) = 0``.  Residuals are keyed
    ``"row1"``, ``"row2"``, ``"cross"`` (those that apply).
    """
    omegas = np.asarray(grid, dtype=float)
    if omegas.size == 0:
        raise ParameterError("constraint grid is empty")
    try:
        vals = m.frequency_response(omegas)
    except PoleEvaluationError as exc:
        w = float(np.imag(exc.s)) if exc.s is not None else float("nan")
        raise PoleEvaluationError(f"pole on the frequency grid at omega = {w:.6g}", s=exc.s) from exc
    rsign, csign = m.flavor_signs()
    gram = np.einsum("wik,k,wjk->wij", vals, csign, np.conj(vals))
    residuals = {}
    nrow = m.shape[0]
    for i in range(nrow):
        residuals[f"row{i + 1}"] = np.abs(rsign[i] * gram[:, i, i].real - 1.0) + np.abs(gram[:, i, i].imag)
    if nrow == 2:
        residuals["cross"] = np.abs(gram[:, 1, 0])
    worst = max(float(np.max(r)) for r in residuals.values())
    return ConstraintReport(omegas, residuals, worst, worst <= tol, tol)


def plant_from_config(cfg: dict) -> PlantModel:
    kind = cfg.get("type", "ndpa")
    kappa = float(cfg.get("kappa", 1.0))
    lam = float(cfg.get("lambda", 0.0))
    if kind == "detuned_ndpa":
        gamma = float(cfg.get("gamma", 0.0))
        if gamma > 0:
            return build_ndpa(kappa, lam, lam, lam, gamma)
        return build_detuned_ndpa(kappa, lam)
    if kind == "ndpa":
        return build_ndpa(kappa, lam, float(cfg.get("delta1", 0.0)), float(cfg.get("delta2", 0.0)),
                          float(cfg.get("gamma", 0.0)))
    raise ParameterError(f"unknown plant type {kind!r}")


def controller_from_config(cfg: dict | None) -> ControllerModel:
    if not cfg:
        return build_beam_splitter(0.0)
    if cfg.get("type", "beam_splitter") != "beam_splitter":
        raise ParameterError(f"unknown controller type {cfg.get('type')!r}")
    return build_beam_splitter(float(cfg.get("beta", 0.0)))
