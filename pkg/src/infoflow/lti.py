"""Discrete-time SISO transfer functions in powers of z^-1.

Polynomials are stored in ascending powers of the delay operator,
``(c0, c1, ..., cd)`` meaning ``c0 + c1 z^-1 + ... + cd z^-d``.  Frequencies
are in cycles per sample, ``theta`` in ``[-1/2, 1/2]``, and the unit circle is
sampled as ``z^-1 = exp(-2j*pi*theta)``.

The feedback loop closes as ``x = G e`` with ``e = x + w + v``, so the
sensitivity function is ``S = 1 / (1 - G) = A / (A - B)`` for ``G = B / A``.
Negative feedback is written by negating ``G``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import signal

from .errors import DegeneratePolynomialError, InvalidLoopError, UnitCirclePoleError

STABILITY_MARGIN = 1e-8
CANCELLATION_TOL = 1e-9
UNIT_CIRCLE_TOL = 1e-12


def _trim(coeffs: Sequence[float]) -> tuple[float, ...]:
    c = [float(v) for v in coeffs]
    while len(c) > 1 and c[-1] == 0.0:
        c.pop()
    return tuple(c) if c else (0.0,)


@dataclass(frozen=True)
class Polynomial:
    """Polynomial in z^-1, trailing zeros trimmed on construction."""

    coeffs: tuple[float, ...]

    def __init__(self, coeffs: Sequence[float]):
        object.__setattr__(self, "coeffs", _trim(coeffs))

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    def is_zero(self) -> bool:
        return all(c == 0.0 for c in self.coeffs)

    def __sub__(self, other: "Polynomial") -> "Polynomial":
        m = max(len(self.coeffs), len(other.coeffs))
        a = np.zeros(m)
        a[: len(self.coeffs)] += self.coeffs
        a[: len(other.coeffs)] -= other.coeffs
        return Polynomial(a)

    def on_circle(self, theta) -> np.ndarray:
        """Evaluate at ``z^-1 = exp(-2j*pi*theta)`` (vectorised over theta)."""
        theta = np.asarray(theta, dtype=float)
        zinv = np.exp(-2j * np.pi * theta)
        # Horner in z^-1
        acc = np.zeros_like(zinv)
        for c in reversed(self.coeffs):
            acc = acc * zinv + c
        return acc


@dataclass(frozen=True)
class TransferFunction:
    """Rational system ``G = num / den``; both polynomials in z^-1."""

    num: Polynomial
    den: Polynomial = field(default_factory=lambda: Polynomial((1.0,)))

    @classmethod
    def from_coeffs(cls, num: Sequence[float], den: Sequence[float] = (1.0,)) -> "TransferFunction":
        return cls(Polynomial(num), Polynomial(den))

    @property
    def is_zero(self) -> bool:
        return self.num.is_zero()

    def to_dict(self) -> dict:
        return {"num": list(self.num.coeffs), "den": list(self.den.coeffs)}


@dataclass(frozen=True)
class FeedbackLoop:
    """Plant ``G`` closed over two AWGN channels, plus the message model.

    The message ``x0 ~ N(0, sigma_02)`` enters the plant recursion
    ``A x = B e + theta * x0``; ``theta[i-1]`` is the loading at time ``i``.
    """

    plant: TransferFunction
    sigma_w2: float
    sigma_v2: float
    sigma_02: float = 1.0
    theta: tuple[float, ...] = (1.0,)

    def __post_init__(self):
        object.__setattr__(self, "theta", tuple(float(t) for t in self.theta))

    def theta_padded(self, n: int) -> np.ndarray:
        out = np.zeros(n)
        m = min(n, len(self.theta))
        out[:m] = self.theta[:m]
        return out

    def with_noise(self, sigma_w2: float, sigma_v2: float) -> "FeedbackLoop":
        return FeedbackLoop(self.plant, sigma_w2, sigma_v2, self.sigma_02, self.theta)

    def with_theta(self, theta: Sequence[float]) -> "FeedbackLoop":
        return FeedbackLoop(self.plant, self.sigma_w2, self.sigma_v2, self.sigma_02, tuple(theta))


def poly_roots(p: Polynomial) -> np.ndarray:
    """Roots in z of ``z^d p(1/z)`` (companion-matrix eigenvalues).

    Roots at infinity, which appear when ``c0 == 0``, are not returned.
    """
    if p.is_zero():
        raise DegeneratePolynomialError("degenerate polynomial")
    # ascending in z^-1 == descending in z
    return np.roots(np.asarray(p.coeffs, dtype=float)).astype(complex)


def closed_loop_char_poly(G: TransferFunction) -> Polynomial:
    """``A - B``; its z-roots are the closed-loop poles."""
    p = G.den - G.num
    if p.is_zero():
        raise DegeneratePolynomialError("degenerate loop (G ≡ 1)")
    return p


def open_loop_poles(G: TransferFunction) -> np.ndarray:
    return poly_roots(G.den)


def closed_loop_poles(G: TransferFunction) -> np.ndarray:
    return poly_roots(closed_loop_char_poly(G))


def freq_response(G: TransferFunction, theta):
    """``G(exp(j 2 pi theta))``; scalar in, complex out; arrays broadcast."""
    a = G.den.on_circle(theta)
    if np.any(np.abs(a) < UNIT_CIRCLE_TOL):
        raise UnitCirclePoleError("open-loop pole on unit circle")
    out = G.num.on_circle(theta) / a
    return complex(out) if np.ndim(out) == 0 else out


def sensitivity(G: TransferFunction, theta):
    """``S = A / (A - B)`` on the unit circle."""
    cl = closed_loop_char_poly(G).on_circle(theta)
    if np.any(np.abs(cl) < UNIT_CIRCLE_TOL):
        raise UnitCirclePoleError("closed-loop pole on unit circle")
    out = G.den.on_circle(theta) / cl
    return complex(out) if np.ndim(out) == 0 else out


def series_coefficients(num: Polynomial, den: Polynomial, n: int) -> np.ndarray:
    """First ``n`` coefficients (from z^0) of the power series of num/den."""
    if den.coeffs[0] == 0.0:
        raise DegeneratePolynomialError("denominator has zero constant term")
    impulse = np.zeros(n)
    if n:
        impulse[0] = 1.0
    return signal.lfilter(num.coeffs, den.coeffs, impulse)


def impulse_response(G: TransferFunction, n: int) -> np.ndarray:
    """``(g1, ..., gn)``; ``g0`` is zero for a strictly proper plant."""
    if n < 1:
        raise ValueError("horizon n must be >= 1")
    return series_coefficients(G.num, G.den, n + 1)[1:]


def _violations_plant(G: TransferFunction) -> list[str]:
    out = []
    if G.den.is_zero():
        out.append("denominator is identically zero")
        return out
    if G.den.coeffs[0] != 1.0:
        out.append(f"denominator constant coefficient must be 1 (got {G.den.coeffs[0]!r})")
    if G.num.coeffs[0] != 0.0:
        out.append("plant not strictly proper: numerator constant coefficient must be 0")
    if not all(np.isfinite(G.num.coeffs)) or not all(np.isfinite(G.den.coeffs)):
        out.append("non-finite plant coefficient")
        return out
    if G.den.coeffs[0] == 0.0:
        return out
    poles = poly_roots(G.den)
    if np.any(np.abs(np.abs(poles) - 1.0) < STABILITY_MARGIN):
        out.append("marginal open-loop pole on unit circle")
    if not G.num.is_zero() and poles.size:
        zeros = poly_roots(G.num)
        if zeros.size and np.min(np.abs(poles[:, None] - zeros[None, :])) < CANCELLATION_TOL:
            out.append("hidden pole-zero cancellation between numerator and denominator")
    cl = G.den - G.num
    if cl.is_zero():
        out.append("degenerate loop (G ≡ 1)")
    else:
        cl_poles = poly_roots(cl)
        if cl_poles.size and np.max(np.abs(cl_poles)) >= 1.0 - STABILITY_MARGIN:
            out.append(
                "closed loop unstable: closed-loop pole magnitude "
                f"{np.max(np.abs(cl_poles)):.6g} not inside unit circle"
            )
    return out


def validate_loop(loop: FeedbackLoop) -> list[str]:
    """Every violated invariant of the loop and its plant; empty when valid."""
    out = _violations_plant(loop.plant)
    for name in ("sigma_w2", "sigma_v2", "sigma_02"):
        if not np.isfinite(getattr(loop, name)):
            out.append(f"{name} must be finite")
    if not loop.sigma_v2 > 0:
        out.append("sigma_v2 must be > 0 (noiseless channel C2)")
    if not loop.sigma_w2 >= 0:
        out.append("sigma_w2 must be >= 0")
    if not loop.sigma_02 > 0:
        out.append("sigma_02 must be > 0")
    if not all(np.isfinite(loop.theta)):
        out.append("message injection theta must be finite")
    return out


def ensure_valid(loop: FeedbackLoop) -> FeedbackLoop:
    report = validate_loop(loop)
    if report:
        raise InvalidLoopError(report)
    return loop
