"""Spectral densities, Gaussian entropy rates and the log-sensitivity integral.

All integrals run over one period in cycles per sample, ``theta in [-1/2, 1/2]``,
with a composite Gauss-Legendre rule.  Densities are per unit cycle
frequency, so integrating a density over the period gives the variance.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np

from .errors import LogSingularityError, QuadratureError, UnitCirclePoleError
from .lti import (
    FeedbackLoop,
    TransferFunction,
    closed_loop_char_poly,
    poly_roots,
    sensitivity,
)

NEAR_CIRCLE_TOL = 1e-6
_TWO_PI_E = 2.0 * np.pi * np.e


@dataclass(frozen=True)
class QuadratureSpec:
    panels: int = 64
    nodes: int = 16
    tol: float = 1e-9
    rule: str = "gauss-legendre-composite"

    def __post_init__(self):
        if self.panels < 1:
            raise ValueError("panel count must be >= 1")
        if self.nodes < 2:
            raise ValueError("nodes per panel must be >= 2")
        if self.rule != "gauss-legendre-composite":
            raise ValueError(f"unknown quadrature rule {self.rule!r}")

    def nodes_weights(self) -> tuple[np.ndarray, np.ndarray]:
        return _composite_gl(self.panels, self.nodes)

    def refined(self) -> "QuadratureSpec":
        return QuadratureSpec(2 * self.panels, self.nodes, self.tol, self.rule)


DEFAULT_QUAD = QuadratureSpec()


@lru_cache(maxsize=16)
def _composite_gl(panels: int, nodes: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(nodes)
    edges = np.linspace(-0.5, 0.5, panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[:-1] + edges[1:])
    theta = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    weights = (half[:, None] * w[None, :]).ravel()
    theta.setflags(write=False)
    weights.setflags(write=False)
    return theta, weights


def integrate(f: Callable[[np.ndarray], np.ndarray], quad: QuadratureSpec = DEFAULT_QUAD) -> float:
    """Integral of a vectorised ``f`` over ``[-1/2, 1/2]``."""
    theta, w = quad.nodes_weights()
    return float(np.dot(w, f(theta)))


@dataclass(frozen=True)
class SpectralDensity:
    """Even, nonnegative density evaluated through ``func(theta)``."""

    name: str
    func: Callable[[np.ndarray], np.ndarray]

    def __call__(self, theta):
        return self.func(np.asarray(theta, dtype=float))

    @classmethod
    def white(cls, variance: float, name: str = "white") -> "SpectralDensity":
        return cls(name, lambda th: np.full(np.shape(th), float(variance)))

    def sample(self, theta) -> "SampledSpectrum":
        theta = np.asarray(theta, dtype=float)
        return SampledSpectrum(self.name, theta, np.asarray(self(theta), dtype=float))


@dataclass(frozen=True)
class SampledSpectrum:
    """A density known only on a grid, e.g. a periodogram on the FFT grid."""

    name: str
    theta: np.ndarray
    density: np.ndarray

    def to_csv(self, path) -> None:
        write_psd_csv(path, self.theta, self.density)


def write_psd_csv(path, theta, density) -> None:
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(["theta", "density"])
        for t, d in zip(np.asarray(theta), np.asarray(density)):
            wr.writerow([repr(float(t)), repr(float(d))])


def entropy_rate_from_psd(psd: Callable, quad: QuadratureSpec = DEFAULT_QUAD) -> float:
    """Gaussian entropy rate ``1/2 * integral of ln(2 pi e psd)``, in nats/sample."""
    theta, w = quad.nodes_weights()
    vals = np.asarray(psd(theta), dtype=float)
    bad = ~(vals > 1e-300) | ~np.isfinite(vals)
    if np.any(bad):
        raise LogSingularityError(theta[np.argmax(bad)])
    return 0.5 * float(np.dot(w, np.log(_TWO_PI_E * vals)))


def output_psd(loop: FeedbackLoop, theta):
    """Density of ``e``: ``|S|^2 (sigma_v2 + sigma_w2)``."""
    s = sensitivity(loop.plant, theta)
    return np.abs(s) ** 2 * (loop.sigma_v2 + loop.sigma_w2)


def output_spectrum(loop: FeedbackLoop) -> SpectralDensity:
    return SpectralDensity("e", lambda th: output_psd(loop, th))


def _check_near_circle(roots: np.ndarray, what: str) -> None:
    if roots.size and np.min(np.abs(np.abs(roots) - 1.0)) < NEAR_CIRCLE_TOL:
        raise QuadratureError(f"quadrature unreliable: {what} pole within {NEAR_CIRCLE_TOL:g} of unit circle")


def log_sensitivity_integral(G: TransferFunction, quad: QuadratureSpec = DEFAULT_QUAD) -> float:
    """``integral of ln|S(exp(j 2 pi theta))|`` over one period, by quadrature."""
    cl = closed_loop_char_poly(G)
    _check_near_circle(poly_roots(cl), "closed-loop")
    _check_near_circle(poly_roots(G.den), "open-loop")
    return integrate(
        lambda th: np.log(np.abs(G.den.on_circle(th))) - np.log(np.abs(cl.on_circle(th))),
        quad,
    )


def bode_integral_poles(G: TransferFunction) -> float:
    """Sum of ``ln|p|`` over open-loop poles outside the unit circle."""
    mags = np.abs(poly_roots(G.den))
    if np.any(np.abs(mags - 1.0) < 1e-8):
        raise UnitCirclePoleError("marginal open-loop pole")
    return float(np.sum(np.log(mags[mags > 1.0])))
