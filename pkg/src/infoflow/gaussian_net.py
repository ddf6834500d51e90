"""Exact finite-horizon directed information for the Gaussian loop.

Every loop signal over ``n`` samples is a linear function of the noise basis
``xi = (x0, w_1..w_n, v_1..v_n)``, whose covariance is diagonal.  A
:class:`LinearSignalMap` stores the ``n x (1 + 2n)`` coefficient matrix of one
signal.  From these maps we get

* the three information quantities as differences of Gaussian entropies,
  ``h(e^n) - h(v^n)``, ``h(e^n) - h(w^n + v^n)`` and ``h(w^n + v^n) - h(v^n)``;
* an independent check that sums ``I(source^i; e_i | e^{i-1})`` straight from
  the definition of directed information.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Iterable

import numpy as np
import scipy.linalg as sla

from .errors import DegenerateCovarianceError, HorizonTooLargeError
from .lti import FeedbackLoop, ensure_valid

ROLES = ("x", "e", "y", "v", "w_plus_v")
DEFAULT_MAP_BUDGET = 2**26  # matrix entries per dense map
ORACLE_LIMIT = 64
_LOG_2_PI_E = float(np.log(2.0 * np.pi * np.e))


@dataclass(frozen=True)
class NoiseBasis:
    n: int
    sigma_02: float
    sigma_w2: float
    sigma_v2: float

    @classmethod
    def from_loop(cls, loop: FeedbackLoop, n: int) -> "NoiseBasis":
        return cls(n, loop.sigma_02, loop.sigma_w2, loop.sigma_v2)

    @property
    def dim(self) -> int:
        return 1 + 2 * self.n

    @property
    def variances(self) -> np.ndarray:
        d = np.empty(self.dim)
        d[0] = self.sigma_02
        d[1 : 1 + self.n] = self.sigma_w2
        d[1 + self.n :] = self.sigma_v2
        return d

    def conditioned_on_message(self) -> "NoiseBasis":
        """Basis with ``x0`` known.  For a linear Gaussian model the conditional
        covariances do not depend on the value of ``x0``."""
        return NoiseBasis(self.n, 0.0, self.sigma_w2, self.sigma_v2)

    def w_cols(self) -> slice:
        return slice(1, 1 + self.n)

    def v_cols(self) -> slice:
        return slice(1 + self.n, 1 + 2 * self.n)


@dataclass(frozen=True)
class LinearSignalMap:
    role: str
    rows: np.ndarray

    @property
    def n(self) -> int:
        return self.rows.shape[0]


@dataclass(frozen=True)
class SignalMaps:
    x: LinearSignalMap
    e: LinearSignalMap
    y: LinearSignalMap
    v: LinearSignalMap
    w_plus_v: LinearSignalMap

    def __getitem__(self, role: str) -> LinearSignalMap:
        return getattr(self, role)


def _check_budget(n: int, budget: int) -> None:
    if n < 1:
        raise ValueError("horizon n must be >= 1")
    if n * (1 + 2 * n) > budget:
        raise HorizonTooLargeError(
            f"horizon too large for dense maps: n={n} needs {n * (1 + 2 * n)} entries, budget {budget}"
        )


def _selector(n: int, w: bool, v: bool) -> np.ndarray:
    m = np.zeros((n, 1 + 2 * n))
    idx = np.arange(n)
    if w:
        m[idx, 1 + idx] = 1.0
    if v:
        m[idx, 1 + n + idx] = 1.0
    return m


def _forward_maps(loop: FeedbackLoop, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Rows of x and e by forward substitution through the loop equations.

    ``x_i = sum_k b_k e_{i-k} - sum_k a_k x_{i-k} + theta_i x0`` and
    ``e_i = x_i + w_i + v_i``; well posed since ``b_0 = 0``.
    """
    a = np.asarray(loop.plant.den.coeffs)
    b = np.asarray(loop.plant.num.coeffs)
    theta = loop.theta_padded(n)
    X = np.zeros((n, 1 + 2 * n))
    E = np.zeros_like(X)
    for i in range(n):
        # columns beyond the causal support of time i stay zero
        hi = 2 + i
        row = X[i]
        for k in range(1, min(len(b), i + 1)):
            if b[k]:
                row[:hi] += b[k] * E[i - k, :hi]
                row[1 + n : 1 + n + i] += b[k] * E[i - k, 1 + n : 1 + n + i]
        for k in range(1, min(len(a), i + 1)):
            if a[k]:
                row[:hi] -= a[k] * X[i - k, :hi]
                row[1 + n : 1 + n + i] -= a[k] * X[i - k, 1 + n : 1 + n + i]
        row[0] += theta[i]
        E[i] = row
        E[i, 1 + i] += 1.0
        E[i, 1 + n + i] += 1.0
    return X, E


def signal_map(loop: FeedbackLoop, n: int, role: str, budget: int = DEFAULT_MAP_BUDGET) -> LinearSignalMap:
    """One map only; cheaper than :func:`build_signal_maps` at large ``n``."""
    if role not in ROLES:
        raise ValueError(f"unknown signal role {role!r}")
    _check_budget(n, budget)
    if role == "v":
        return LinearSignalMap(role, _selector(n, False, True))
    if role == "w_plus_v":
        return LinearSignalMap(role, _selector(n, True, True))
    ensure_valid(loop)
    X, E = _forward_maps(loop, n)
    if role == "x":
        return LinearSignalMap(role, X)
    if role == "e":
        del X
        return LinearSignalMap(role, E)
    del E
    X += _selector(n, True, False)
    return LinearSignalMap("y", X)


def build_signal_maps(loop: FeedbackLoop, n: int, budget: int = DEFAULT_MAP_BUDGET) -> SignalMaps:
    _check_budget(n, budget)
    ensure_valid(loop)
    X, E = _forward_maps(loop, n)
    return SignalMaps(
        x=LinearSignalMap("x", X),
        e=LinearSignalMap("e", E),
        y=LinearSignalMap("y", X + _selector(n, True, False)),
        v=LinearSignalMap("v", _selector(n, False, True)),
        w_plus_v=LinearSignalMap("w_plus_v", _selector(n, True, True)),
    )


def _rows(maps) -> np.ndarray:
    if isinstance(maps, LinearSignalMap):
        return maps.rows
    if isinstance(maps, np.ndarray):
        return maps
    return np.vstack([m.rows if isinstance(m, LinearSignalMap) else m for m in maps])


def covariance(maps, basis: NoiseBasis) -> np.ndarray:
    """``M D M^T`` for one map, or for several maps stacked in order."""
    M = _rows(maps)
    if M.shape[1] != basis.dim:
        raise ValueError(f"dimension mismatch: map has {M.shape[1]} columns, basis has {basis.dim}")
    d = basis.variances
    keep = (d > 0) & np.any(M != 0.0, axis=0)
    K = M[:, keep] * np.sqrt(d[keep])
    sigma = K @ K.T
    return 0.5 * (sigma + sigma.T)


def log_det_pd(sigma: np.ndarray, rcond_min: float = 1e-10) -> float:
    """Log-determinant through a Cholesky factor.

    Raises :class:`DegenerateCovarianceError` when the matrix is not positive
    definite, or when LAPACK's reciprocal condition estimate is below
    ``rcond_min``.
    """
    sigma = np.asarray(sigma, dtype=float)
    if sigma.ndim != 2 or sigma.shape[0] != sigma.shape[1]:
        raise ValueError("covariance must be square")
    scale = max(np.max(np.abs(sigma)), 1e-300)
    if np.max(np.abs(sigma - sigma.T)) > 1e-12 * scale:
        raise DegenerateCovarianceError("degenerate covariance: not symmetric")
    try:
        c = sla.cholesky(sigma, lower=True, check_finite=True)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise DegenerateCovarianceError(f"degenerate covariance: {exc}") from None
    anorm = np.max(np.sum(np.abs(sigma), axis=0))
    rcond, info = sla.lapack.dpocon(c, anorm, uplo="L")
    if info != 0 or rcond < rcond_min:
        raise DegenerateCovarianceError(f"degenerate covariance (rcond estimate {rcond:.3g})")
    return 2.0 * float(np.sum(np.log(np.diag(c))))


def gaussian_entropy(sigma: np.ndarray) -> float:
    """Differential entropy ``1/2 ln((2 pi e)^k det sigma)`` in nats."""
    sigma = np.atleast_2d(sigma)
    return 0.5 * (sigma.shape[0] * _LOG_2_PI_E + log_det_pd(sigma))


def conditional_mutual_information(sigma, x_idx, y_idx, z_idx=()) -> float:
    """``I(X; Y | Z)`` from log-determinants of blocks of a joint covariance.

    Every block involved must be positive definite.
    """
    sigma = np.asarray(sigma, dtype=float)

    def ld(idx):
        idx = list(idx)
        return log_det_pd(sigma[np.ix_(idx, idx)]) if idx else 0.0

    x, y, z = list(x_idx), list(y_idx), list(z_idx)
    return 0.5 * (ld(x + z) + ld(y + z) - ld(z) - ld(x + y + z))


def _project_out(v: np.ndarray, q: np.ndarray) -> np.ndarray:
    v = v - q @ (q.T @ v)
    return v - q @ (q.T @ v)


def _cond_vars_ordered(z, x, t, rank_tol):
    """Conditioning rows kept in time order; source rows then added with pivoting."""
    if z.shape[0]:
        q, r = np.linalg.qr(z.T)
        d = np.abs(np.diag(r))
        if np.min(d) <= rank_tol * np.max(d):
            raise DegenerateCovarianceError("degenerate covariance (definition oracle): singular sink block")
    else:
        q = np.zeros((t.size, 0))
    tz = _project_out(t, q)
    xr = _project_out(x.T, q)
    qx, rx, _ = sla.qr(xr, mode="economic", pivoting=True)
    ref = np.max(np.linalg.norm(x, axis=1))
    qx = qx[:, : int(np.sum(np.abs(np.diag(rx)) > rank_tol * ref))]
    tzx = _project_out(tz, qx)
    return float(tz @ tz), float(tzx @ tzx)


def _cond_vars_pivoted(z, x, t, rank_tol):
    """Same two variances from a single rank-revealing QR per conditioning set."""

    def resid(rows):
        if rows.shape[0] == 0:
            return float(t @ t)
        q, r, _ = sla.qr(rows.T, mode="economic", pivoting=True)
        d = np.abs(np.diag(r))
        q = q[:, : int(np.sum(d > rank_tol * d[0]))]
        res = _project_out(t, q)
        return float(res @ res)

    return resid(z), resid(np.vstack([z, x]))


def directed_info_definition(
    source: LinearSignalMap,
    sink: LinearSignalMap,
    basis: NoiseBasis,
    condition_on_message: bool = False,
    limit: int = ORACLE_LIMIT,
    rank_tol: float = 1e-10,
    agreement_tol: float = 1e-9,
) -> float:
    """``sum_i I(source^i; sink_i | sink^{i-1})`` summed straight from the definition.

    Each term is ``1/2 ln(Var(sink_i | sink^{i-1}) / Var(sink_i | sink^{i-1}, source^i))``.
    This equals the four-log-determinant formula whenever those blocks are
    nonsingular.  The variances are squared residual norms after orthogonal
    projection in whitened noise space.  That keeps the sum well defined when
    ``source^i`` is partly determined by ``sink^{i-1}`` (as ``x^i`` is), and it
    avoids squaring the condition number of the signal blocks.

    Every variance is computed twice, by two differently ordered QR
    factorisations.  If they disagree by more than ``agreement_tol``
    (relative), the blocks are too ill-conditioned for double precision.
    That happens, for example, when conditioning on the message with an
    unstable plant and long horizons, and it raises
    :class:`DegenerateCovarianceError`.  Cost is O(n^4).
    """
    n = sink.n
    if source.n != n:
        raise ValueError("source and sink horizons differ")
    if n > limit:
        raise HorizonTooLargeError(f"horizon {n} exceeds definition-oracle limit {limit}")
    if basis.n != n or sink.rows.shape[1] != basis.dim or source.rows.shape[1] != basis.dim:
        raise ValueError("maps and basis do not share the same noise basis")
    if condition_on_message:
        basis = basis.conditioned_on_message()
    sd = np.sqrt(basis.variances)
    src = source.rows * sd
    snk = sink.rows * sd
    total = 0.0
    for i in range(n):
        # causal support of time i+1: x0, w_1..w_{i+1}, v_1..v_{i+1}
        cols = np.r_[0, 1 : 2 + i, 1 + n : 2 + n + i]
        t = snk[i, cols]
        z = snk[:i][:, cols]
        x = src[: i + 1][:, cols]
        var_z, var_zx = _cond_vars_ordered(z, x, t, rank_tol)
        chk_z, chk_zx = _cond_vars_pivoted(z, x, t, rank_tol)
        floor = 1e-14 * max(float(t @ t), 1e-300)
        if var_z <= floor or var_zx <= floor:
            raise DegenerateCovarianceError("degenerate covariance (definition oracle)")
        for a, b in ((var_z, chk_z), (var_zx, chk_zx)):
            if abs(a - b) > agreement_tol * abs(a):
                raise DegenerateCovarianceError(
                    f"degenerate covariance (definition oracle): conditioning block at step {i + 1} "
                    "too ill-conditioned for double precision"
                )
        total += 0.5 * np.log(var_z / var_zx)
    return float(total)


@dataclass(frozen=True)
class FiniteInfoReport:
    n: int
    i_total: float
    i_x: float
    i_cond: float
    residual: float
    oracle_total: float | None = None
    oracle_x: float | None = None
    oracle_cond: float | None = None
    oracle_max_disagreement: float | None = None
    oracle_error: str | None = None

    @property
    def per_sample(self) -> dict:
        return {
            "i_total": self.i_total / self.n,
            "i_x": self.i_x / self.n,
            "i_cond": self.i_cond / self.n,
        }

    def to_dict(self) -> dict:
        d = asdict(self)
        d["per_sample"] = self.per_sample
        return d


def _entropies(loop: FeedbackLoop, n: int, budget: int, which: Iterable[str]) -> dict:
    basis = NoiseBasis.from_loop(loop, n)
    out = {}
    for role in which:
        m = signal_map(loop, n, role, budget)
        out[role] = gaussian_entropy(covariance(m, basis))
        del m
    return out


def directed_info_total(loop: FeedbackLoop, n: int, budget: int = DEFAULT_MAP_BUDGET) -> float:
    """``I(y^n -> e^n) = h(e^n) - h(v^n)``."""
    h = _entropies(loop, n, budget, ("e", "v"))
    return h["e"] - h["v"]


def directed_info_from_x(loop: FeedbackLoop, n: int, budget: int = DEFAULT_MAP_BUDGET) -> float:
    """``I(x^n -> e^n) = h(e^n) - h(w^n + v^n)``."""
    h = _entropies(loop, n, budget, ("e", "w_plus_v"))
    return h["e"] - h["w_plus_v"]


def directed_info_cond(loop: FeedbackLoop, n: int, budget: int = DEFAULT_MAP_BUDGET) -> float:
    """``I(y^n -> e^n | x0) = h(w^n + v^n) - h(v^n)``."""
    ensure_valid(loop)
    h = _entropies(loop, n, budget, ("w_plus_v", "v"))
    return h["w_plus_v"] - h["v"]


def definition_values(loop: FeedbackLoop, n: int, limit: int = ORACLE_LIMIT) -> tuple[float, float, float]:
    """The three quantities via :func:`directed_info_definition`."""
    maps = build_signal_maps(loop, n)
    basis = NoiseBasis.from_loop(loop, n)
    total = directed_info_definition(maps.y, maps.e, basis, limit=limit)
    from_x = directed_info_definition(maps.x, maps.e, basis, limit=limit)
    cond = directed_info_definition(maps.y, maps.e, basis, condition_on_message=True, limit=limit)
    return total, from_x, cond


def finite_report(
    loop: FeedbackLoop,
    n: int,
    oracle_limit: int = ORACLE_LIMIT,
    budget: int = DEFAULT_MAP_BUDGET,
) -> FiniteInfoReport:
    """The three finite-horizon quantities and their conservation residual.

    For ``n <= oracle_limit`` the definition-based values are attached too,
    together with their largest absolute disagreement from the identities.
    When the oracle declares its blocks too ill-conditioned, ``oracle_error``
    carries the reason and the oracle fields stay ``None``.
    """
    ensure_valid(loop)
    h = _entropies(loop, n, budget, ("e", "v", "w_plus_v"))
    i_total = h["e"] - h["v"]
    i_x = h["e"] - h["w_plus_v"]
    i_cond = h["w_plus_v"] - h["v"]
    extra = {}
    if n <= oracle_limit:
        try:
            ot, ox, oc = definition_values(loop, n, limit=oracle_limit)
        except DegenerateCovarianceError as exc:
            extra = dict(oracle_error=str(exc))
        else:
            extra = dict(
                oracle_total=ot,
                oracle_x=ox,
                oracle_cond=oc,
                oracle_max_disagreement=max(abs(ot - i_total), abs(ox - i_x), abs(oc - i_cond)),
            )
    return FiniteInfoReport(n, i_total, i_x, i_cond, i_total - i_x - i_cond, **extra)


def causality_violations(m: LinearSignalMap, strict: bool = False) -> list[int]:
    """Row indices (0-based) that touch noise samples from the future.

    With ``strict`` the current sample is forbidden as well, as required of ``x``.
    """
    n = m.n
    bad = []
    for i in range(n):
        first = i if strict else i + 1
        if np.any(m.rows[i, 1 + first : 1 + n] != 0) or np.any(m.rows[i, 1 + n + first :] != 0):
            bad.append(i)
    return bad

