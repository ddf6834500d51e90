"""Seeded Monte Carlo runs of the closed loop and second-order checks.

Each trial has its own PCG64 stream spawned from ``SeedSequence(seed)`` by
trial index, so results do not depend on the order trials are evaluated in.
Within a trial the standard normals are drawn as one vector, laid out like
the noise basis ``(x0, w_1..w_n, v_1..v_n)``.
"""
from __future__ import annotations

import csv
import os
from dataclasses import dataclass

import numpy as np

from .errors import InsufficientDataError
from .lti import FeedbackLoop, ensure_valid
from .spectral import SampledSpectrum

RNG_ALGORITHM = "numpy.PCG64/SeedSequence.spawn(trial); draw order x0,w[1..n],v[1..n]"
SIGNALS = ("e", "x", "y", "w", "v")


@dataclass(frozen=True)
class SimulationConfig:
    loop: FeedbackLoop
    n: int
    trials: int
    seed: int = 0

    def __post_init__(self):
        if self.n < 1 or self.trials < 1:
            raise ValueError("n and trials must both be >= 1")


@dataclass(frozen=True)
class TrajectoryBatch:
    e: np.ndarray
    x: np.ndarray
    y: np.ndarray
    w: np.ndarray
    v: np.ndarray
    x0: np.ndarray
    seed: int
    algorithm: str = RNG_ALGORITHM

    @property
    def trials(self) -> int:
        return self.e.shape[0]

    @property
    def n(self) -> int:
        return self.e.shape[1]

    def signal(self, role: str) -> np.ndarray:
        if role not in SIGNALS:
            raise ValueError(f"unknown signal {role!r}; expected one of {SIGNALS}")
        return getattr(self, role)

    def basis_vector(self, trial: int) -> np.ndarray:
        """Drawn ``(x0, w, v)`` of one trial, in noise-basis order."""
        return np.concatenate(([self.x0[trial]], self.w[trial], self.v[trial]))


def simulate_loop(config: SimulationConfig) -> TrajectoryBatch:
    loop = ensure_valid(config.loop)
    n, trials = config.n, config.trials
    children = np.random.SeedSequence(config.seed).spawn(trials)
    z = np.empty((trials, 1 + 2 * n))
    for k, child in enumerate(children):
        z[k] = np.random.Generator(np.random.PCG64(child)).standard_normal(1 + 2 * n)
    x0 = z[:, 0] * np.sqrt(loop.sigma_02)
    w = z[:, 1 : 1 + n] * np.sqrt(loop.sigma_w2)
    v = z[:, 1 + n :] * np.sqrt(loop.sigma_v2)

    a = loop.plant.den.coeffs
    b = loop.plant.num.coeffs
    theta = loop.theta_padded(n)
    x = np.zeros((trials, n))
    e = np.zeros((trials, n))
    for i in range(n):
        acc = theta[i] * x0
        for k in range(1, min(len(b), i + 1)):
            acc = acc + b[k] * e[:, i - k]
        for k in range(1, min(len(a), i + 1)):
            acc = acc - a[k] * x[:, i - k]
        x[:, i] = acc
        e[:, i] = acc + w[:, i] + v[:, i]
    return TrajectoryBatch(e=e, x=x, y=x + w, w=w, v=v, x0=x0, seed=config.seed)


def _tail(batch: TrajectoryBatch, role: str) -> np.ndarray:
    return batch.signal(role)[:, batch.n // 2 :]


def empirical_covariance(batch: TrajectoryBatch, signal: str, lag_window: int) -> np.ndarray:
    """Autocovariances at lags ``0..lag_window`` over the last half of each trajectory.

    Pooled across trials and time; the pooled tail mean is removed and each lag
    is normalised by its pair count minus one.
    """
    if lag_window < 0:
        raise ValueError("lag window must be >= 0")
    if lag_window >= batch.n / 2:
        raise InsufficientDataError("insufficient tail: lag window must be < n/2")
    s = _tail(batch, signal)
    if s.size < 2:
        raise InsufficientDataError("need at least two tail samples")
    s = s - s.mean()
    T = s.shape[1]
    out = np.empty(lag_window + 1)
    for lag in range(lag_window + 1):
        prod = s[:, : T - lag] * s[:, lag:]
        out[lag] = prod.sum() / (prod.size - 1)
    return out


def periodogram_psd(batch: TrajectoryBatch, signal: str) -> SampledSpectrum:
    """Trial-averaged periodogram of the stationary tail on the FFT grid.

    Scaled as a density per unit cycle frequency, so the grid mean estimates
    the variance.  Rectangular window and no mean removal: the processes are
    zero mean.
    """
    n, trials = batch.n, batch.trials
    if n < 256 or n & (n - 1):
        raise InsufficientDataError("periodogram needs n a power of two >= 256")
    if trials < 100:
        raise InsufficientDataError("periodogram needs at least 100 trials")
    s = _tail(batch, signal)
    T = s.shape[1]
    p = np.mean(np.abs(np.fft.fft(s, axis=1)) ** 2, axis=0) / T
    p = 0.5 * (p + p[(-np.arange(T)) % T])
    theta = np.fft.fftshift(np.fft.fftfreq(T))
    return SampledSpectrum(signal, theta, np.fft.fftshift(p))


def rms_relative_error(estimate: SampledSpectrum, reference) -> float:
    """RMS of ``(estimate - reference) / reference`` over the estimate's grid."""
    ref = np.asarray(reference(estimate.theta), dtype=float)
    return float(np.sqrt(np.mean(((estimate.density - ref) / ref) ** 2)))


def export_trajectories(batch: TrajectoryBatch, directory) -> list[str]:
    """One CSV per signal: a row per trial, a column per time step."""
    os.makedirs(directory, exist_ok=True)
    paths = []
    for role in SIGNALS:
        path = os.path.join(directory, f"trajectories_{role}.csv")
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh, lineterminator="\n")
            wr.writerow(["trial"] + [f"t{i + 1}" for i in range(batch.n)])
            for k, row in enumerate(batch.signal(role)):
                wr.writerow([k] + [repr(float(val)) for val in row])
        paths.append(path)
    return paths


def write_covariance_csv(path, lags: np.ndarray) -> None:
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(["lag", "covariance"])
        for k, c in enumerate(lags):
            wr.writerow([k, repr(float(c))])
