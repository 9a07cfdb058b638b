"""Gaussian kernel, its spectral measure, and random Fourier feature maps.

The kernel k(x, x') = exp(-gamma * ||x - x'||^2) is the Fourier transform of a
Gaussian frequency measure tau with independent N(0, gamma / (2 pi^2))
coordinates.  A frequency v maps an input x to the feature pair

    (cos(-2 pi v.x), sin(-2 pi v.x)),

and averaging products of feature pairs over v ~ tau recovers the kernel.
Feature sets sampled from a reweighted (leverage-optimized) distribution carry
per-frequency weights so the same average can be importance-corrected.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError

FEATURE_MODES = ("conventional", "optimized")


@dataclass(frozen=True)
class GaussianKernel:
    """Shift-invariant Gaussian kernel exp(-gamma ||x - x'||^2)."""

    gamma: float
    dim: int

    def __post_init__(self):
        if not (self.gamma > 0):
            raise ConfigError(f"gamma must be positive, got {self.gamma}")
        if not (isinstance(self.dim, (int, np.integer)) and self.dim >= 1):
            raise ConfigError(f"dim must be an integer >= 1, got {self.dim}")

    @property
    def tau_sigma(self) -> float:
        """Per-coordinate standard deviation of the spectral measure tau."""
        return float(np.sqrt(self.gamma / (2.0 * np.pi**2)))


def eval_kernel(kern: GaussianKernel, x, y) -> np.ndarray:
    """Evaluate k(x, y) elementwise for broadcastable arrays of points.

    The trailing axis of each argument is the coordinate axis of length
    ``kern.dim``.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    d2 = ((x - y) ** 2).sum(axis=-1)
    return np.exp(-kern.gamma * d2)


def gram(kern: GaussianKernel, X, Y=None) -> np.ndarray:
    """Gram matrix K[i, j] = k(X[i], Y[j]); Y defaults to X.

    With Y omitted the result is exactly symmetric with a unit diagonal
    because each entry is computed from the coordinate differences alone.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    Y = X if Y is None else np.atleast_2d(np.asarray(Y, dtype=float))
    d2 = ((X[:, None, :] - Y[None, :, :]) ** 2).sum(axis=-1)
    return np.exp(-kern.gamma * d2)


def sample_tau(kern: GaussianKernel, m: int, rng: np.random.Generator) -> np.ndarray:
    """Draw m frequencies from the spectral measure tau, shape (m, dim)."""
    if m < 1:
        raise ConfigError(f"m must be >= 1, got {m}")
    return rng.normal(0.0, kern.tau_sigma, size=(m, kern.dim))


def feature_pair(v, x):
    """Return (cos(-2 pi v.x), sin(-2 pi v.x)) with broadcasting over rows.

    ``v`` and ``x`` have the coordinate axis last; the product contracts that
    axis, so (M, D) frequencies against a (D,) point give two length-M arrays.
    """
    v = np.asarray(v, dtype=float)
    x = np.asarray(x, dtype=float)
    ang = -2.0 * np.pi * (v * x).sum(axis=-1)
    return np.cos(ang), np.sin(ang)


def feature_real(v, b, x):
    """Real feature sqrt(2) cos(-2 pi v.x + 2 pi b) with phase b in [0, 1]."""
    v = np.asarray(v, dtype=float)
    x = np.asarray(x, dtype=float)
    b = np.asarray(b, dtype=float)
    if np.any(b < 0) or np.any(b > 1):
        raise ConfigError("phase b must lie in [0, 1]")
    ang = -2.0 * np.pi * (v * x).sum(axis=-1) + 2.0 * np.pi * b
    return np.sqrt(2.0) * np.cos(ang)


@dataclass(frozen=True)
class RealFeatureParams:
    """Frequency and phase of a single real random Fourier feature."""

    v: np.ndarray
    b: float

    def __post_init__(self):
        if not (0.0 <= self.b <= 1.0):
            raise ConfigError(f"phase b must lie in [0, 1], got {self.b}")


@dataclass(frozen=True)
class FeatureSet:
    """A bag of M sampled frequencies plus sampling metadata.

    freqs           : (M, D) array of frequency vectors.
    mode            : "conventional" (drawn from tau) or "optimized"
                      (drawn from a leverage-reweighted distribution).
    leverage_values : optional length-M array of the sampling density ratio
                      q(v_m) relative to tau, required for importance-weighted
                      kernel estimates; each entry must be positive.
    lam             : ridge parameter the optimized distribution was built
                      for; present exactly when mode == "optimized".
    """

    freqs: np.ndarray
    mode: str
    leverage_values: np.ndarray | None = None
    lam: float | None = None

    def __post_init__(self):
        freqs = np.asarray(self.freqs, dtype=float)
        if freqs.ndim != 2 or freqs.shape[0] < 1:
            raise ConfigError("freqs must be a (M, D) array with M >= 1")
        object.__setattr__(self, "freqs", freqs)
        if self.mode not in FEATURE_MODES:
            raise ConfigError(f"mode must be one of {FEATURE_MODES}, got {self.mode!r}")
        if (self.mode == "optimized") != (self.lam is not None):
            raise ConfigError("lam must be present exactly when mode is 'optimized'")
        if self.lam is not None and not (self.lam > 0):
            raise ConfigError(f"lam must be positive, got {self.lam}")
        if self.leverage_values is not None:
            q = np.asarray(self.leverage_values, dtype=float)
            if q.shape != (freqs.shape[0],):
                raise ConfigError("leverage_values must have one entry per frequency")
            if not np.all(q > 0):
                raise ConfigError("leverage_values must be positive")
            object.__setattr__(self, "leverage_values", q)

    @property
    def num_features(self) -> int:
        return self.freqs.shape[0]

    @property
    def dim(self) -> int:
        return self.freqs.shape[1]


def _pair_products(fs: FeatureSet, x, y) -> np.ndarray:
    cx, sx = feature_pair(fs.freqs, np.asarray(x, dtype=float))
    cy, sy = feature_pair(fs.freqs, np.asarray(y, dtype=float))
    return cx * cy + sx * sy


def kernel_mc_estimate(fs: FeatureSet, x, y) -> float:
    """Plain Monte Carlo kernel estimate (1/M) sum_m [cc' + ss']."""
    return float(_pair_products(fs, x, y).mean())


def kernel_importance_estimate(fs: FeatureSet, x, y) -> float:
    """Importance-weighted kernel estimate sum_m [cc' + ss'] / (M q_m).

    Unbiased when the frequencies were drawn from the density q * tau and
    ``leverage_values`` stores q at each accepted frequency.
    """
    if fs.leverage_values is None:
        raise ConfigError("feature set has no leverage values to weight with")
    w = 1.0 / (fs.num_features * fs.leverage_values)
    return float((w * _pair_products(fs, x, y)).sum())


# --- external file format -------------------------------------------------
#
# feature set files are plain text:
#   # mode=<conventional|optimized> M=<int> D=<int> lambda=<float|none>
#   <v[0,0]> <v[0,1]> ... <v[0,D-1]> [q=<float>]
#   ...                                        (M rows)
#
# floats are written with repr() so a save/load/save round trip is
# byte-identical.


def _fmt(x: float) -> str:
    return repr(float(x))


def format_feature_set(fs: FeatureSet) -> str:
    lam = "none" if fs.lam is None else _fmt(fs.lam)
    lines = [f"# mode={fs.mode} M={fs.num_features} D={fs.dim} lambda={lam}"]
    for m in range(fs.num_features):
        row = " ".join(_fmt(v) for v in fs.freqs[m])
        if fs.leverage_values is not None:
            row += f" q={_fmt(fs.leverage_values[m])}"
        lines.append(row)
    return "\n".join(lines) + "\n"


def parse_feature_set(text: str) -> FeatureSet:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or not lines[0].startswith("#"):
        raise ConfigError("feature set file must start with a '#' header line")
    header = dict(tok.split("=", 1) for tok in lines[0][1:].split())
    try:
        mode = header["mode"]
        m_count = int(header["M"])
        dim = int(header["D"])
        lam = None if header["lambda"] == "none" else float(header["lambda"])
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"malformed feature set header: {lines[0]!r}") from exc
    if len(lines) - 1 != m_count:
        raise ConfigError(f"expected {m_count} frequency rows, found {len(lines) - 1}")
    freqs = np.empty((m_count, dim))
    qs = []
    for i, ln in enumerate(lines[1:]):
        toks = ln.split()
        if toks and toks[-1].startswith("q="):
            qs.append(float(toks[-1][2:]))
            toks = toks[:-1]
        if len(toks) != dim:
            raise ConfigError(f"row {i} has {len(toks)} coordinates, expected {dim}")
        freqs[i] = [float(t) for t in toks]
    if qs and len(qs) != m_count:
        raise ConfigError("leverage values must be present on every row or none")
    return FeatureSet(
        freqs=freqs,
        mode=mode,
        leverage_values=np.asarray(qs) if qs else None,
        lam=lam,
    )


def save_feature_set(fs: FeatureSet, path, force: bool = True) -> None:
    from .fileio import atomic_write

    atomic_write(path, format_feature_set(fs), force=force)


def load_feature_set(path) -> FeatureSet:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_feature_set(fh.read())
