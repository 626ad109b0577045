"""Real trigonometric DFT basis and the l1-norm constants that drive the design.

The basis here diagonalizes circular convolution on real sequences: the
constant vector, scaled cosines up to the half frequency, then scaled sines.
Inner products are taken with respect to the uniform probability measure on
``{0, ..., n-1}``, so the l1 norm of a basis vector is the mean of its entry
moduli.  The minimum of that norm over the basis controls how much sup-norm
headroom a mask needs to hit a prescribed spectrum.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

__all__ = [
    "BasisSpec",
    "dft",
    "basis_vector",
    "basis_matrix",
    "inner",
    "beta",
    "m_bound",
]


@dataclass(frozen=True)
class BasisSpec:
    """Geometry of the length-n real trigonometric basis."""

    n: int

    def __post_init__(self):
        if self.n < 1:
            raise ValueError(f"basis length must be positive, got {self.n}")

    @property
    def h(self) -> int:
        """Index of the half frequency (cos/sin split point)."""
        return math.ceil((self.n - 1) / 2)

    @property
    def omega(self) -> float:
        """Fundamental angular frequency, radians per index step."""
        return 2.0 * math.pi / self.n


def dft(a) -> np.ndarray:
    """Unnormalized forward DFT of a real vector.

    Returns the complex amplitudes ``sum_i a_i exp(-1j * 2*pi*j*i/n)``.
    Parseval: ``sum |out|^2 == n * sum a^2``.
    """
    a = np.asarray(a, dtype=float)
    if a.size == 0:
        raise ValueError("cannot transform an empty vector")
    return np.fft.fft(a)


def _resolve_n(spec) -> int:
    return spec.n if isinstance(spec, BasisSpec) else int(spec)


def basis_vector(spec, j: int) -> np.ndarray:
    """The j-th orthonormal basis vector of length n.

    Index 0 is the constant, indices below the half frequency are sqrt(2)
    cosines, indices above it are sqrt(2) sines.  The half-frequency vector
    itself is the unscaled alternating cosine when n is even.
    """
    n = _resolve_n(spec)
    if not 0 <= j <= n - 1:
        raise ValueError(f"basis index {j} out of range for n={n}")
    h = math.ceil((n - 1) / 2)
    w = 2.0 * math.pi / n
    i = np.arange(n)
    if j == 0:
        return np.ones(n)
    if j == h:
        v = np.cos(w * h * i)
        return v if n % 2 == 0 else math.sqrt(2.0) * v
    if j < h:
        return math.sqrt(2.0) * np.cos(w * j * i)
    return math.sqrt(2.0) * np.sin(w * j * i)


@lru_cache(maxsize=8)
def _basis_matrix_cached(n: int) -> np.ndarray:
    B = np.empty((n, n))
    for j in range(n):
        B[j] = basis_vector(n, j)
    B.setflags(write=False)
    return B

def basis_matrix(n: int) -> np.ndarray:
    """All n basis vectors stacked as rows (read-only, cached)."""
    if n < 1:
        raise ValueError(f"basis length must be positive, got {n}")
    return _basis_matrix_cached(n)


def inner(u, v) -> float:
    """Inner product under the uniform probability measure on indices."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    return float(np.mean(u * v))


@lru_cache(maxsize=None)
def beta(n: int) -> float:
    """Minimum normalized l1 norm over the length-n basis.

    The l1 norm of a cosine/sine vector at frequency j depends only on
    gcd(j, n) (the index multiset ``{j*i mod n}`` is the gcd-class orbit), so
    only one evaluation per divisor class is needed.  This keeps n ~ 1e4
    instant without the full n^2 scan.
    """
    if n < 1:
        raise ValueError(f"n must be positive, got {n}")
    if n == 1:
        return 1.0
    h = math.ceil((n - 1) / 2)
    w = 2.0 * math.pi / n
    i = np.arange(n)
    best = 1.0  # j = 0, the constant vector
    cache: dict[tuple[str, int], float] = {}
    for j in range(1, n):
        if j == h:
            best = min(best, float(np.mean(np.abs(basis_vector(n, h)))))
            continue
        g = math.gcd(j, n)
        key = ("cos" if j < h else "sin", g)
        if key not in cache:
            phase = w * g * i
            v = np.cos(phase) if key[0] == "cos" else np.sin(phase)
            cache[key] = float(math.sqrt(2.0) * np.mean(np.abs(v)))
        best = min(best, cache[key])
    return best


def m_bound(n: int) -> float:
    """Sup-norm budget constant (3*pi/2) / beta(n)^2."""
    return 1.5 * math.pi / beta(n) ** 2
