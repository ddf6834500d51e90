import numpy as np
import pytest

from infoflow.lti import FeedbackLoop, TransferFunction, validate_loop

SYSTEM_B = TransferFunction.from_coeffs([0.0, -1.5], [1.0, -2.0])
# open-loop poles 1.25 and 1.6, closed-loop poles 0.5 and 0.4
TWO_UNSTABLE = TransferFunction.from_coeffs([0.0, -1.95, 1.8], [1.0, -2.85, 2.0])


def loop_b(sigma_w2=1.0, sigma_v2=1.0, theta=(1.0,), sigma_02=1.0):
    return FeedbackLoop(SYSTEM_B, sigma_w2, sigma_v2, sigma_02, theta)


def _poly_from_roots(roots):
    # ascending in z^-1: prod (1 - r z^-1)
    return np.real(np.poly(roots))


def random_stable_loops(count, seed=2024, max_degree=3):
    """Open- and closed-loop stable plants, degree <= max_degree, variances in [0.5, 2]."""
    rng = np.random.default_rng(seed)
    loops = []
    while len(loops) < count:
        d = int(rng.integers(1, max_degree + 1))
        roots = []
        while len(roots) < d:
            r = rng.uniform(0.05, 0.8)
            if d - len(roots) >= 2 and rng.random() < 0.5:
                phi = rng.uniform(0.2, np.pi - 0.2)
                roots += [r * np.exp(1j * phi), r * np.exp(-1j * phi)]
            else:
                roots.append(r * rng.choice([-1.0, 1.0]))
        den = _poly_from_roots(roots)
        num = np.concatenate(([0.0], rng.uniform(-1.0, 1.0, d)))
        num *= rng.uniform(0.1, 0.9)
        loop = FeedbackLoop(
            TransferFunction.from_coeffs(num, den),
            sigma_w2=float(rng.uniform(0.5, 2.0)),
            sigma_v2=float(rng.uniform(0.5, 2.0)),
            sigma_02=float(rng.uniform(0.5, 2.0)),
        )
        if validate_loop(loop):
            continue
        cl = np.roots(np.asarray(loop.plant.den.coeffs) - np.pad(num, (0, len(den) - len(num))))
        if np.max(np.abs(cl)) > 0.95:
            continue
        loops.append(loop)
    return loops


@pytest.fixture
def system_b():
    return loop_b()


@pytest.fixture(scope="session")
def stable_loops():
    return random_stable_loops(20)


def long_division(num, den, n):
    """First n power-series coefficients of num/den by schoolbook division."""
    rem = list(num) + [0.0] * (n + len(den))
    out = []
    for i in range(n):
        q = rem[i] / den[0]
        out.append(q)
        for k, d in enumerate(den):
            rem[i + k] -= q * d
    return np.array(out)
