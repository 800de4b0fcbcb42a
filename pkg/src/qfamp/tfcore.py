"""Complex-coefficient polynomials, rational functions and transfer matrices.

Everything is numeric: coefficients are complex doubles, stored in ascending
order of the Laplace variable ``s``.  Rates are dimensionless (``kappa_ref = 1``).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import DomainError, NumericError, PoleEvaluationError

DEFAULT_ROOT_TOL = 1e-10
CANCEL_TOL = 1e-8
# relative size under which a leading coefficient is treated as round-off
_TRIM_RTOL = 8 * np.finfo(float).eps
# |den(s)| below this (relative to the den coefficient scale) counts as a pole
_POLE_GUARD = 1e-13


def _as_coeffs(coeffs) -> np.ndarray:
    arr = np.array(coeffs, dtype=complex, ndmin=1)
    if arr.ndim != 1:
        raise DomainError("polynomial coefficients must be one-dimensional")
    mags = np.abs(arr)
    keep = np.flatnonzero(mags > _TRIM_RTOL * mags.max()) if arr.size else mags
    arr = arr[: keep[-1] + 1] if keep.size else arr[:0]
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class ComplexPoly:
    """Polynomial ``sum_k coeffs[k] * s**k`` with complex coefficients.

    Trailing (highest-degree) coefficients that are zero, or round-off small
    relative to the largest coefficient, are trimmed on construction.  The
    zero polynomial has no coefficients and degree ``-1``.
    """

    coeffs: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "coeffs", _as_coeffs(self.coeffs))

    @classmethod
    def from_roots(cls, roots: Iterable[complex], lead: complex = 1.0) -> "ComplexPoly":
        p = cls([lead])
        for r in roots:
            p = p * cls([-r, 1.0])
        return p

    @classmethod
    def constant(cls, c: complex) -> "ComplexPoly":
        return cls([c])

    @property
    def degree(self) -> int:
        return self.coeffs.size - 1

    @property
    def is_zero(self) -> bool:
        return self.coeffs.size == 0

    @property
    def lead(self) -> complex:
        return complex(self.coeffs[-1]) if self.coeffs.size else 0j

    def scale(self) -> float:
        return float(np.max(np.abs(self.coeffs))) if self.coeffs.size else 0.0

    def __call__(self, s):
        """Horner evaluation; ``s`` may be a scalar or an array."""
        s = np.asarray(s, dtype=complex)
        out = np.zeros_like(s)
        for c in self.coeffs[::-1]:
            out = out * s + c
        return out if out.ndim else complex(out)

    def deriv(self) -> "ComplexPoly":
        if self.degree < 1:
            return ComplexPoly([])
        k = np.arange(1, self.coeffs.size)
        return ComplexPoly(self.coeffs[1:] * k)

    def conj_reflect(self) -> "ComplexPoly":
        """Return ``q`` with ``q(s) = conj(p(-conj(s)))``; on ``s = i w`` this is ``conj(p(i w))``."""
        k = np.arange(self.coeffs.size)
        return ComplexPoly(np.conj(self.coeffs) * (-1.0) ** k)

    def _coerce(self, other) -> "ComplexPoly":
        if isinstance(other, ComplexPoly):
            return other
        return ComplexPoly([other])

    def __add__(self, other):
        other = self._coerce(other)
        n = max(self.coeffs.size, other.coeffs.size)
        out = np.zeros(n, dtype=complex)
        out[: self.coeffs.size] += self.coeffs
        out[: other.coeffs.size] += other.coeffs
        return ComplexPoly(out)

    __radd__ = __add__

    def __neg__(self):
        return ComplexPoly(-self.coeffs)

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return self._coerce(other) - self

    def __mul__(self, other):
        other = self._coerce(other)
        if self.is_zero or other.is_zero:
            return ComplexPoly([])
        return ComplexPoly(np.convolve(self.coeffs, other.coeffs))

    __rmul__ = __mul__

    def __eq__(self, other):
        if not isinstance(other, ComplexPoly):
            return NotImplemented
        return self.coeffs.shape == other.coeffs.shape and bool(np.all(self.coeffs == other.coeffs))

    def __hash__(self):
        return hash(self.coeffs.tobytes())

    def __repr__(self):
        return f"ComplexPoly({np.array2string(self.coeffs, precision=6)})"


def _residual_bound(p: ComplexPoly, r: complex, tol: float) -> float:
    k = np.arange(p.coeffs.size)
    return tol * float(np.sum(np.abs(p.coeffs) * max(1.0, abs(r)) ** k))


def _aberth(monic: np.ndarray, max_iter: int) -> tuple[np.ndarray, bool]:
    n = monic.size - 1
    p = ComplexPoly(monic)
    dp = p.deriv()
    # Fujiwara bound for the initial circle; the angular offset breaks symmetry
    # with real-axis root sets.
    a = np.abs(monic[:-1][::-1])
    bound = 2.0 * max(a[j] ** (1.0 / (j + 1)) for j in range(n))
    bound = max(bound, 1e-3)
    centre = -monic[n - 1] / n
    z = centre + 0.5 * bound * np.exp(1j * (2 * np.pi * np.arange(n) / n + 0.4))
    eps = np.finfo(float).eps
    for _ in range(max_iter):
        pz = p(z)
        dpz = dp(z)
        diff = z[:, None] - z[None, :]
        np.fill_diagonal(diff, 1.0)
        inv = 1.0 / diff
        np.fill_diagonal(inv, 0.0)
        repulse = inv.sum(axis=1)
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = pz / dpz
            step = ratio / (1.0 - ratio * repulse)
        step = np.where(pz == 0, 0.0, step)
        if not np.all(np.isfinite(step)):
            # perturb colliding iterates and carry on
            bad = ~np.isfinite(step)
            z[bad] += 1e-6 * (1 + 1j) * max(1.0, bound)
            continue
        z = z - step
        if np.all(np.abs(step) <= 4 * eps * np.maximum(np.abs(z), 1.0)):
            return z, True
    return z, False


def poly_roots(p: ComplexPoly, tol: float = DEFAULT_ROOT_TOL, max_iter: int = 500) -> list[complex]:
    """All roots of ``p`` with multiplicity, sorted by (real, imag).

    Aberth-Ehrlich simultaneous iteration on the monic polynomial after
    stripping exact zero roots.  Every returned root ``r`` satisfies
    ``|p(r)| <= tol * sum_k |c_k| max(1, |r|)**k``.

    Raises
    ------
    DomainError
        If ``p`` is the zero polynomial or constant.
    NumericError
        If the iteration does not meet the residual bound; ``best`` holds the
        last iterate.
    """
    if p.is_zero:
        raise DomainError("roots of the zero polynomial are undefined")
    if p.degree < 1:
        raise DomainError("constant polynomial has no roots")
    c = p.coeffs
    nzero = int(np.argmax(c != 0))
    roots = [0j] * nzero
    c = c[nzero:]
    if c.size > 1:
        monic = c / c[-1]
        if c.size == 2:
            z = np.array([-monic[0]])
        else:
            z, _ = _aberth(monic, max_iter)
        roots.extend(complex(r) for r in z)
    roots.sort(key=lambda r: (r.real, r.imag))
    worst = [abs(p(r)) - _residual_bound(p, r, tol) for r in roots]
    if max(worst) > 0:
        raise NumericError(
            f"root iteration did not reach residual tolerance {tol:g}", best=roots
        )
    return roots


def _poly_div_linear(c: np.ndarray, r: complex) -> np.ndarray:
    """Synthetic division of ascending coeffs by ``(s - r)``; remainder dropped."""
    desc = c[::-1]
    out = np.empty(desc.size - 1, dtype=complex)
    acc = 0j
    for i in range(desc.size - 1):
        acc = acc * r + desc[i]
        out[i] = acc
    return out[::-1]


@dataclass(frozen=True, eq=False)
class RationalFunction:
    """``num(s) / den(s)`` with the denominator made monic."""

    num: ComplexPoly
    den: ComplexPoly = field(default_factory=lambda: ComplexPoly([1.0]))

    def __post_init__(self):
        num = self.num if isinstance(self.num, ComplexPoly) else ComplexPoly(self.num)
        den = self.den if isinstance(self.den, ComplexPoly) else ComplexPoly(self.den)
        if den.is_zero:
            raise DomainError("rational function with zero denominator")
        lead = den.lead
        object.__setattr__(self, "num", ComplexPoly(num.coeffs / lead))
        object.__setattr__(self, "den", ComplexPoly(den.coeffs / lead))

    @classmethod
    def constant(cls, c: complex) -> "RationalFunction":
        return cls(ComplexPoly([c]))

    @property
    def is_zero(self) -> bool:
        return self.num.is_zero

    def __call__(self, s):
        return rf_eval(self, s)

    def poles(self, tol: float = DEFAULT_ROOT_TOL) -> list[complex]:
        return poly_roots(self.den, tol) if self.den.degree >= 1 else []

    def zeros(self, tol: float = DEFAULT_ROOT_TOL) -> list[complex]:
        return poly_roots(self.num, tol) if self.num.degree >= 1 else []

    def conj_reflect(self) -> "RationalFunction":
        """Para-conjugate: equals ``conj(self(i w))`` on the imaginary axis."""
        return RationalFunction(self.num.conj_reflect(), self.den.conj_reflect())

    def _coerce(self, other) -> "RationalFunction":
        if isinstance(other, RationalFunction):
            return other
        if isinstance(other, ComplexPoly):
            return RationalFunction(other)
        return RationalFunction.constant(other)

    def __add__(self, other):
        return rf_arith(self, self._coerce(other), "add")

    def __radd__(self, other):
        return rf_arith(self._coerce(other), self, "add")

    def __sub__(self, other):
        return rf_arith(self, self._coerce(other), "sub")

    def __rsub__(self, other):
        return rf_arith(self._coerce(other), self, "sub")

    def __mul__(self, other):
        return rf_arith(self, self._coerce(other), "mul")

    def __rmul__(self, other):
        return rf_arith(self._coerce(other), self, "mul")

    def __truediv__(self, other):
        return rf_arith(self, self._coerce(other), "div")

    def __rtruediv__(self, other):
        return rf_arith(self._coerce(other), self, "div")

    def __neg__(self):
        return RationalFunction(-self.num, self.den)

    def __repr__(self):
        return f"RationalFunction(num={self.num!r}, den={self.den!r})"


def rf_eval(r: RationalFunction, s):
    """Evaluate ``r`` at scalar or array ``s`` by Horner's rule.

    Raises
    ------
    PoleEvaluationError
        When ``|den(s)|`` is below the pole guard at any requested point.
    """
    s_arr = np.asarray(s, dtype=complex)
    den = np.asarray(r.den(s_arr), dtype=complex)
    guard = _POLE_GUARD * _abs_horner(r.den, np.maximum(np.abs(s_arr), 1.0))
    hit = np.abs(den) <= guard
    if np.any(hit):
        where = s_arr[hit][0] if s_arr.ndim else complex(s_arr)
        raise PoleEvaluationError(f"evaluation at a pole, s = {complex(where):.6g}", s=complex(where))
    out = np.asarray(r.num(s_arr), dtype=complex) / den
    return out if out.ndim else complex(out)


def _cancel_common(num: ComplexPoly, den: ComplexPoly, tol: float) -> tuple[ComplexPoly, ComplexPoly]:
    if num.degree < 1 or den.degree < 1:
        return num, den
    try:
        zn = poly_roots(num)
        zd = poly_roots(den)
    except NumericError:
        return num, den
    nc, dc = num.coeffs.copy(), den.coeffs.copy()
    used = [False] * len(zd)
    for z in zn:
        best, best_i = None, -1
        for i, p in enumerate(zd):
            if used[i]:
                continue
            d = abs(z - p)
            if best is None or d < best:
                best, best_i = d, i
        if best_i < 0:
            continue
        # multiple denominator roots are only resolved to ~sqrt(eps), so a
        # numerator root that zeroes the current denominator also qualifies
        on_den = abs(ComplexPoly(dc)(z)) <= 1e-14 * _abs_horner(ComplexPoly(dc), max(1.0, abs(z)))
        if best > tol * max(1.0, abs(z)) and not on_den:
            continue
        used[best_i] = True
        r = z if on_den else 0.5 * (z + zd[best_i])
        nc = _poly_div_linear(nc, r)
        dc = _poly_div_linear(dc, r)
    return ComplexPoly(nc), ComplexPoly(dc)


def _abs_horner(p: ComplexPoly, x):
    out = np.zeros_like(x, dtype=float)
    for c in np.abs(p.coeffs[::-1]):
        out = out * x + c
    return out


def _verification_grid() -> np.ndarray:
    return 0.0137 + 1j * np.linspace(-10.0, 10.0, 41)


def rf_arith(a: RationalFunction, b: RationalFunction, op: str, cancel: bool = False,
             cancel_tol: float = CANCEL_TOL) -> RationalFunction:
    """Exact coefficient arithmetic on rational functions.

    ``op`` is one of ``add``, ``sub``, ``mul``, ``div``.  With ``cancel=True``
    numerator/denominator roots closer than ``cancel_tol`` are removed in
    pairs; the cancelled form is kept only if it reproduces the uncancelled
    response to 1e-9 relative on a verification grid.
    """
    if op == "add":
        num = a.num * b.den + b.num * a.den
        den = a.den * b.den
    elif op == "sub":
        num = a.num * b.den - b.num * a.den
        den = a.den * b.den
    elif op == "mul":
        num = a.num * b.num
        den = a.den * b.den
    elif op == "div":
        if b.is_zero:
            raise DomainError("division by the zero rational function")
        num = a.num * b.den
        den = a.den * b.num
    else:
        raise DomainError(f"unknown rational operation {op!r}")
    if num.is_zero:
        return RationalFunction(ComplexPoly([]), ComplexPoly([1.0]))
    if not cancel:
        return RationalFunction(num, den)
    raw = RationalFunction(num, den)
    cn, cd = _cancel_common(num, den, cancel_tol)
    reduced = RationalFunction(cn, cd)
    grid = _verification_grid()
    try:
        ref = rf_eval(raw, grid)
        got = rf_eval(reduced, grid)
    except PoleEvaluationError:
        return raw
    if np.max(np.abs(got - ref) / np.maximum(np.abs(ref), 1e-300)) > 1e-9:
        return raw
    return reduced


def cancel(r: RationalFunction, tol: float = CANCEL_TOL) -> RationalFunction:
    """Common-root cancellation of an existing rational function."""
    return rf_arith(r, RationalFunction.constant(1.0), "mul", cancel=True, cancel_tol=tol)


def is_annihilation(label: str) -> bool:
    return not label.endswith("†")


@dataclass(frozen=True)
class RationalMatrix:
    """Grid of rational functions with labelled output rows and input columns.

    Labels ending in ``†`` are creation-flavoured ports, the rest are
    annihilation-flavoured.
    """

    entries: tuple[tuple[RationalFunction, ...], ...]
    row_labels: tuple[str, ...]
    col_labels: tuple[str, ...]

    def __post_init__(self):
        entries = tuple(tuple(row) for row in self.entries)
        object.__setattr__(self, "entries", entries)
        object.__setattr__(self, "row_labels", tuple(self.row_labels))
        object.__setattr__(self, "col_labels", tuple(self.col_labels))
        if len(entries) != len(self.row_labels):
            raise DomainError("row label count does not match matrix rows")
        for row in entries:
            if len(row) != len(self.col_labels):
                raise DomainError("column label count does not match matrix columns")

    @classmethod
    def from_constants(cls, values: Sequence[Sequence[complex]], row_labels, col_labels) -> "RationalMatrix":
        return cls(tuple(tuple(RationalFunction.constant(v) for v in row) for row in values),
                   row_labels, col_labels)

    @property
    def shape(self) -> tuple[int, int]:
        return len(self.row_labels), len(self.col_labels)

    def __getitem__(self, idx) -> RationalFunction:
        i, j = idx
        return self.entries[i][j]

    def entry(self, row: str, col: str) -> RationalFunction:
        return self.entries[self.row_labels.index(row)][self.col_labels.index(col)]

    def evaluate(self, s) -> np.ndarray:
        """Matrix values; shape ``(rows, cols)`` for scalar ``s``, ``(len(s), rows, cols)`` otherwise."""
        s_arr = np.asarray(s, dtype=complex)
        vals = np.array([[rf_eval(e, s_arr) for e in row] for row in self.entries], dtype=complex)
        if s_arr.ndim:
            return np.moveaxis(vals, -1, 0)
        return vals

    def frequency_response(self, omegas) -> np.ndarray:
        return self.evaluate(1j * np.asarray(omegas, dtype=float))

    def flavor_signs(self) -> tuple[np.ndarray, np.ndarray]:
        rows = np.array([1.0 if is_annihilation(l) else -1.0 for l in self.row_labels])
        cols = np.array([1.0 if is_annihilation(l) else -1.0 for l in self.col_labels])
        return rows, cols
