import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from scipy import integrate

from gowerslab.autocorr import ball_autocorrelation_closed_form
from gowerslab.grid import GridFunction, GridSpec, radius_for_measure

settings.register_profile(
    "default", deadline=None, max_examples=30, suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")


def direct_autocorrelation(values: np.ndarray, cv: float) -> np.ndarray:
    """O(N^2) loop over every shift; the reference for the FFT path."""
    n = values.shape
    out = np.zeros([2 * m - 1 for m in n])
    for j in np.ndindex(*out.shape):
        s = [jj - (m - 1) for jj, m in zip(j, n)]
        a = tuple(slice(max(0, -si), m - max(0, si)) for si, m in zip(s, n))
        b = tuple(slice(max(0, si), m - max(0, -si)) for si, m in zip(s, n))
        out[j] = cv * np.sum(values[a] * values[b])
    return out


def gamma2_quadrature(d: int) -> float:
    """``int |B cap (B + s)|^2 ds`` for the unit-measure ball, by adaptive radial quadrature."""
    r = radius_for_measure(d, 1.0)
    shell = {1: lambda u: 2.0, 2: lambda u: 2 * np.pi * u, 3: lambda u: 4 * np.pi * u**2}[d]
    val, _ = integrate.quad(lambda u: shell(u) * ball_autocorrelation_closed_form(d, r, u) ** 2, 0, 2 * r,
                            epsabs=1e-13, epsrel=1e-12, limit=200)
    return val


def random_function(rng: np.random.Generator, d: int, n: int, sparsity: float = 0.5) -> GridFunction:
    """Random nonnegative function supported away from the grid boundary."""
    spec = GridSpec(d, 1.0, n)
    v = rng.random(spec.shape) * (rng.random(spec.shape) > sparsity)
    inner = tuple(slice(1, n - 1) for _ in range(d))
    out = np.zeros(spec.shape)
    out[inner] = v[inner]
    return GridFunction(spec, out)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
