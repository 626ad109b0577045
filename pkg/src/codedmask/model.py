"""Scene priors, imaging configuration, and the LMMSE evaluator.

The scene is a stationary (circulant-covariance) random vector whose spectral
density is sampled from a symmetric function d on [0, 1].  A mask a in [0,1]^n
acts by circular convolution; reconstruction error is scored by the linear
MMSE, which depends on the mask only through its DFT magnitudes and its mean
(the transmissivity).
"""

from __future__ import annotations

import shlex
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

__all__ = [
    "ScenePrior",
    "ImagingConfig",
    "Aperture",
    "DesignCertificate",
    "sample_prior",
    "parse_prior_record",
    "lmmse",
    "random_onoff",
    "best_random_onoff",
]

_PRIOR_KINDS = ("iid", "bandlimited", "powerlaw", "table")


@dataclass(frozen=True)
class ScenePrior:
    """Spectral density d(x) on [0, 1/2], mirrored to [1/2, 1].

    d(0) = theta sets the variance scale.  Kinds:

    - ``iid``: constant theta.
    - ``bandlimited``: theta up to s-r, linear ramp to zero at s+r.
    - ``powerlaw``: theta * (x0/(x0+x))**exponent; the knee x0 regularizes
      the divergence at zero frequency.
    - ``table``: linear interpolation of sampled values on [0, 1/2].
    """

    kind: str
    theta: float = 1.0
    s: float | None = None
    r: float | None = None
    exponent: float | None = None
    x0: float = 0.01
    table: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.kind not in _PRIOR_KINDS:
            raise ValueError(f"unknown prior kind {self.kind!r}")
        if self.theta < 0:
            raise ValueError("theta must be nonnegative")
        if self.kind == "bandlimited":
            if self.s is None or self.r is None:
                raise ValueError("bandlimited prior needs s and r")
            if self.r <= 0:
                raise ValueError("rolloff half-width r must be positive")
            if self.s + self.r > 0.5:
                raise ValueError("band edge s+r must not exceed 1/2")
        if self.kind == "powerlaw":
            if self.exponent is None or self.exponent <= 0:
                raise ValueError("powerlaw prior needs a positive exponent")
            if self.x0 <= 0:
                raise ValueError("powerlaw knee x0 must be positive")
        if self.kind == "table":
            if self.table is None or len(self.table) == 0:
                raise ValueError("table prior needs sampled values")
            tab = np.asarray(self.table, dtype=float)
            if np.any(tab < 0):
                raise ValueError("table prior values must be nonnegative")
            object.__setattr__(self, "table", tab)
            object.__setattr__(self, "theta", float(tab[0]))

    @classmethod
    def iid(cls, theta: float = 1.0) -> "ScenePrior":
        return cls("iid", theta=theta)

    @classmethod
    def bandlimited(cls, theta: float, s: float, r: float) -> "ScenePrior":
        return cls("bandlimited", theta=theta, s=s, r=r)

    @classmethod
    def powerlaw(cls, theta: float, exponent: float, x0: float = 0.01) -> "ScenePrior":
        return cls("powerlaw", theta=theta, exponent=exponent, x0=x0)

    @classmethod
    def from_table(cls, values) -> "ScenePrior":
        return cls("table", table=np.asarray(values, dtype=float))

    def density(self, x: float) -> float:
        """Evaluate d at a point of [0, 1], using mirror symmetry."""
        x = float(x)
        if not 0.0 <= x <= 1.0:
            raise ValueError(f"density argument {x} outside [0, 1]")
        x = min(x, 1.0 - x)
        if self.kind == "iid":
            return self.theta
        if self.kind == "bandlimited":
            if x <= self.s - self.r:
                return self.theta
            if x >= self.s + self.r:
                return 0.0
            return self.theta * (self.s + self.r - x) / (2.0 * self.r)
        if self.kind == "powerlaw":
            return self.theta * (self.x0 / (self.x0 + x)) ** self.exponent
        grid = np.linspace(0.0, 0.5, len(self.table))
        return float(np.interp(x, grid, self.table))


def sample_prior(prior: ScenePrior, n: int) -> np.ndarray:
    """n-point sampling d_i = (1/n) d(i/n) of the spectral density."""
    if n < 1:
        raise ValueError(f"n must be positive, got {n}")
    return np.array([prior.density(i / n) / n for i in range(n)])


def parse_prior_record(text: str, base_dir: str | Path | None = None) -> ScenePrior:
    """Parse a one-line prior record.

    Format: ``prior <kind> theta=<v> [s=<v> r=<v>] [exponent=<v>] [x0=<v>]
    [table=<path>]``.  Table files hold one float per line, samples of d on
    [0, 1/2] inclusive.
    """
    parts = shlex.split(text)
    if len(parts) < 2 or parts[0] != "prior":
        raise ValueError(f"malformed prior record: {text!r}")
    kind = parts[1]
    kv: dict[str, str] = {}
    for tok in parts[2:]:
        if "=" not in tok:
            raise ValueError(f"malformed prior field {tok!r}")
        key, val = tok.split("=", 1)
        kv[key] = val

    if kind == "table":
        if "table" not in kv:
            raise ValueError("table prior record needs table=<path>")
        path = Path(kv["table"])
        if base_dir is not None and not path.is_absolute():
            path = Path(base_dir) / path
        values = [float(line) for line in path.read_text().split()]
        return ScenePrior.from_table(values)

    theta = float(kv.get("theta", 1.0))
    if kind == "iid":
        return ScenePrior.iid(theta)
    if kind == "bandlimited":
        return ScenePrior.bandlimited(theta, float(kv["s"]), float(kv["r"]))
    if kind == "powerlaw":
        return ScenePrior.powerlaw(
            theta, float(kv["exponent"]), float(kv.get("x0", 0.01))
        )
    raise ValueError(f"unknown prior kind {kind!r}")


@dataclass(frozen=True)
class ImagingConfig:
    """Scene size, exposure, and noise levels.

    ``dims`` is 1 for line scenes and 2 for n-by-n scenes; npixels is the
    total element count used in the noise normalization.
    """

    n: int
    t: float
    W: float
    J: float
    dims: int = 1

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be positive")
        if self.t < 0 or self.W < 0 or self.J < 0:
            raise ValueError("t, W, J must be nonnegative")
        if self.dims not in (1, 2):
            raise ValueError("dims must be 1 or 2")

    @property
    def npixels(self) -> int:
        return self.n ** self.dims

    def gamma(self, rho: float) -> float:
        """Effective SNR-per-frequency scale t / (npixels * (W + J*rho))."""
        noise = self.W + self.J * rho
        if noise <= 0:
            raise ValueError("W + J*rho must be positive to define gamma")
        return self.t / (self.npixels * noise)

    def with_t(self, t: float) -> "ImagingConfig":
        return ImagingConfig(self.n, t, self.W, self.J, self.dims)


@dataclass(frozen=True)
class Aperture:
    """Mask values in [0,1] (or the ideal-lens vector, flagged non-mask)."""

    values: np.ndarray
    is_mask: bool = True

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim not in (1, 2):
            raise ValueError("aperture must be a 1D vector or 2D grid")
        if v.ndim == 2 and v.shape[0] != v.shape[1]:
            raise ValueError("2D aperture must be square")
        if self.is_mask and (np.any(v < 0) or np.any(v > 1)):
            raise ValueError("mask entries must lie in [0, 1]")
        if not self.is_mask and np.any(v < 0):
            raise ValueError("aperture entries must be nonnegative")
        object.__setattr__(self, "values", v)

    @property
    def dims(self) -> int:
        return self.values.ndim

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def rho(self) -> float:
        return float(self.values.mean())

    def spectrum(self) -> np.ndarray:
        """Unnormalized DFT amplitudes (fftn for 2D)."""
        return np.fft.fftn(self.values)

    @classmethod
    def ideal_lens(cls, n: int, dims: int = 1) -> "Aperture":
        """The perfectly focused lens; its DFT is n (or n^2) everywhere."""
        if dims == 1:
            v = np.zeros(n)
            v[0] = n
        else:
            v = np.zeros((n, n))
            v[0, 0] = n * n
        return cls(v, is_mask=False)


@dataclass
class DesignCertificate:
    """Verified guarantees of a synthesized aperture.

    ``achieved`` and ``required`` are per-frequency spectral magnitudes
    (flattened, DC first); ``b_sup_norm`` is the sup norm of the intermediate
    bounded vector; ``penalty`` the certified multiplicative exposure factor.
    """

    achieved: np.ndarray
    required: np.ndarray
    b_sup_norm: float
    penalty: float
    passed: bool
    seed: int | None = None
    restarts: int = 0
    detail: dict = field(default_factory=dict)


def lmmse(config: ImagingConfig, d, aperture: Aperture, *,
          allow_noiseless: bool = False) -> float:
    """Linear MMSE of scene reconstruction through the given aperture.

    Each frequency contributes 1/(1/d_i + gamma |a_hat_i|^2); frequencies
    with d_i = 0 contribute nothing (the prior pins them exactly).
    """
    d = np.asarray(d, dtype=float).ravel()
    if d.size != config.npixels:
        raise ValueError(
            f"prior has {d.size} samples, config expects {config.npixels}")
    total = float(d.sum())
    if config.t == 0:
        return total
    rho = aperture.rho
    noise = config.W + config.J * rho
    ahat2 = np.abs(aperture.spectrum()).ravel() ** 2
    if noise <= 0:
        if not allow_noiseless:
            raise ValueError(
                "noiseless evaluation (W + J*rho == 0 with t > 0) must be "
                "enabled explicitly")
        # Noiseless limit: any sensed frequency is recovered exactly.
        return float(d[ahat2 <= 0].sum())
    g = config.t / (config.npixels * noise)
    pos = d > 0
    terms = np.zeros_like(d)
    terms[pos] = 1.0 / (1.0 / d[pos] + g * ahat2[pos])
    return float(terms.sum())


def random_onoff(n: int, rho: float, seed, dims: int = 1) -> Aperture:
    """Binary mask with i.i.d. Bernoulli(rho) entries from a seeded PCG64."""
    if not 0.0 <= rho <= 1.0:
        raise ValueError("density rho must lie in [0, 1]")
    rng = np.random.default_rng(seed)
    shape = (n,) if dims == 1 else (n, n)
    return Aperture((rng.random(shape) < rho).astype(float))


def best_random_onoff(config: ImagingConfig, d, rho_grid, trials: int,
                      seed) -> tuple[float, float]:
    """Optimize the random on-off density over a grid of rho values.

    Averages the LMMSE of ``trials`` seeded draws at each grid point and
    returns the minimizing density with its mean.  Fully deterministic for a
    fixed seed: trial streams are spawned from a single SeedSequence.
    """
    rho_grid = list(rho_grid)
    if not rho_grid:
        raise ValueError("rho grid must be nonempty")
    if trials < 1:
        raise ValueError("trials must be at least 1")
    streams = np.random.SeedSequence(seed).spawn(len(rho_grid) * trials)
    best = None
    for gi, rho in enumerate(rho_grid):
        vals = []
        for trial in range(trials):
            a = random_onoff(config.n, rho, streams[gi * trials + trial],
                             dims=config.dims)
            vals.append(lmmse(config, d, a))
        mean = float(np.mean(vals))
        if best is None or mean < best[1]:
            best = (float(rho), mean)
    return best
