"""Leverage scores of random Fourier features and samplers built on them.

Given N0 unlabeled points, the integral operator of the kernel under the
empirical input distribution is represented by the Gram matrix K / N0.  The
ridge leverage of a frequency v at level ``lam`` is

    ell(v) = (1/N0) * z^H (K/N0 + lam I)^{-1} z,     z_j = exp(-2 pi i v.x_j),

computed over the reals by splitting z into cosine and sine parts.  Averaged
over v ~ tau this equals the degree of freedom d(lam) = tr K/N0 (K/N0+lam)^-1,
so q(v) = ell(v) / d(lam) is a probability density relative to tau.  Sampling
frequencies from q * tau instead of tau concentrates them where the data
spectrum lives; q is bounded by (1/lam)/d(lam), which gives the rejection
envelope used here.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve
from scipy.stats import norm

from .errors import ConfigError, SamplerAbort
from .features import FeatureSet, GaussianKernel, gram, sample_tau

# eigenvalues of K/N0 below this are counted as zero rank; more negative
# than -1e-10 means the Gram computation itself went wrong
RANK_TOL = 1e-12
NEG_EIG_TOL = -1e-10
DOF_AGREE_TOL = 1e-8

# chunk size for evaluating leverage over many frequencies at once
_BATCH = 16384


@dataclass(frozen=True)
class SpectralModel:
    """Empirical spectral summary of the kernel on a point sample.

    points : (N0, D) unlabeled inputs (or count-tree cell centers repeated
             by multiplicity).
    mu     : eigenvalues of K/N0, descending, clipped at zero.
    """

    kern: GaussianKernel
    lam: float
    points: np.ndarray
    mu: np.ndarray
    chol: tuple
    dof: float

    @property
    def num_points(self) -> int:
        return self.points.shape[0]

    @property
    def rank(self) -> int:
        return int((self.mu > RANK_TOL).sum())


def _checked_gram(points, kern: GaussianKernel) -> np.ndarray:
    points = np.atleast_2d(np.asarray(points, dtype=float))
    if points.shape[0] < 1:
        raise ConfigError("need at least one point")
    if points.shape[1] != kern.dim:
        raise ConfigError(
            f"points have dimension {points.shape[1]}, kernel expects {kern.dim}"
        )
    K = gram(kern, points)
    if not np.array_equal(K, K.T) or not np.all(K.diagonal() == 1.0):
        raise RuntimeError("Gram matrix must be symmetric with unit diagonal")
    return K


def spectrum_of(points, kern: GaussianKernel) -> np.ndarray:
    """Eigenvalues of K/N0, descending and clipped at zero.

    Raises if any eigenvalue falls below -1e-10; such a value signals a
    broken Gram computation rather than harmless rounding.
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    K = _checked_gram(points, kern)
    mu = np.linalg.eigvalsh(K / points.shape[0])[::-1].copy()
    if mu[-1] < NEG_EIG_TOL:
        raise RuntimeError(
            f"eigenvalue {mu[-1]:.3e} of K/N0 below {NEG_EIG_TOL}: numerical failure"
        )
    return np.clip(mu, 0.0, None)


def build_spectral_model(points, kern: GaussianKernel, lam: float) -> SpectralModel:
    """Factorize (K/N0 + lam I) and eigendecompose K/N0 for later reuse.

    Raises if the Gram matrix is not symmetric with unit diagonal, if any
    eigenvalue of K/N0 falls below -1e-10, or if the eigenvalue and trace
    routes to d(lam) disagree beyond 1e-8.
    """
    if not (lam > 0):
        raise ConfigError(f"lam must be positive, got {lam}")
    points = np.atleast_2d(np.asarray(points, dtype=float))
    n0 = points.shape[0]
    mu = spectrum_of(points, kern)
    Kn = _checked_gram(points, kern) / n0
    chol = cho_factor(Kn + lam * np.eye(n0), lower=True)
    dof_eig = float((mu / (mu + lam)).sum())
    dof_tr = float(np.trace(cho_solve(chol, Kn)))
    if abs(dof_eig - dof_tr) > DOF_AGREE_TOL:
        raise RuntimeError(
            f"degree-of-freedom routes disagree: eig {dof_eig!r} vs trace {dof_tr!r}"
        )
    return SpectralModel(kern=kern, lam=lam, points=points, mu=mu,
                         chol=chol, dof=dof_eig)


def degree_of_freedom(model: SpectralModel) -> float:
    """d(lam) = sum_i mu_i / (mu_i + lam) over the eigenvalues of K/N0."""
    return model.dof


def dof_from_trace(model: SpectralModel) -> float:
    """d(lam) via tr[K/N0 (K/N0 + lam I)^{-1}]; independent of the eigenroute."""
    Kn = gram(model.kern, model.points) / model.num_points
    return float(np.trace(cho_solve(model.chol, Kn)))


def q_max_bound(model: SpectralModel) -> float:
    """Envelope for the normalized leverage: q(v) <= (1/lam) / d(lam)."""
    return (1.0 / model.lam) / model.dof


def expected_acceptance(model: SpectralModel) -> float:
    """Mean acceptance rate of envelope rejection sampling: lam * d(lam)."""
    return model.lam * model.dof


def unnormalized_leverage(model: SpectralModel, V) -> np.ndarray:
    """ell(v) for each frequency row; averages to d(lam) over v ~ tau."""
    V = np.atleast_2d(np.asarray(V, dtype=float))
    out = np.empty(V.shape[0])
    n0 = model.num_points
    for lo in range(0, V.shape[0], _BATCH):
        chunk = V[lo:lo + _BATCH]
        ang = 2.0 * np.pi * (chunk @ model.points.T)
        c = np.cos(ang)
        s = np.sin(ang)
        bc = cho_solve(model.chol, c.T)
        bs = cho_solve(model.chol, s.T)
        out[lo:lo + _BATCH] = ((c * bc.T).sum(axis=1) + (s * bs.T).sum(axis=1)) / n0
    return out


def leverage_score(model: SpectralModel, V) -> np.ndarray:
    """Normalized leverage density q(v) = ell(v) / d(lam), positive and
    bounded by q_max_bound(model)."""
    return unnormalized_leverage(model, V) / model.dof


@dataclass(frozen=True)
class SamplerDiagnostics:
    """Book-keeping from an optimized-feature sampling run."""

    proposals: int
    accepted: int
    acceptance_rate: float
    expected_acceptance: float


def sample_conventional(kern: GaussianKernel, m: int,
                        rng: np.random.Generator) -> FeatureSet:
    """Draw m frequencies straight from tau."""
    return FeatureSet(freqs=sample_tau(kern, m, rng), mode="conventional")


def sample_optimized_rejection(
    model: SpectralModel,
    m: int,
    rng: np.random.Generator,
    accept_floor: float = 1e-6,
    trial_budget: int = 100_000,
    bottom_raised: bool = False,
) -> tuple[FeatureSet, SamplerDiagnostics]:
    """Sample m frequencies from q * tau by envelope rejection.

    Proposals come from tau and are accepted with probability
    q(v) / q_max_bound.  With ``bottom_raised`` the target is the mixture
    (q(v) + 1) / 2, which keeps every frequency reachable at the cost of a
    weaker reweighting; the stored leverage values always describe the
    density actually sampled from.

    Raises SamplerAbort once at least ``trial_budget`` proposals have been
    spent and the observed acceptance rate sits below ``accept_floor``.
    """
    if m < 1:
        raise ConfigError(f"m must be >= 1, got {m}")
    if not (0 < accept_floor <= 1):
        raise ConfigError(f"accept_floor must lie in (0, 1], got {accept_floor}")
    env = q_max_bound(model)
    if bottom_raised:
        env = env / 2.0 + 0.5
    exp_rate = 1.0 / env
    freqs = []
    qs = []
    proposals = 0
    accepted = 0
    while accepted < m:
        # deterministic batch schedule: scale with the expected yield
        batch = min(1 << 20, max(1024, math.ceil(1.5 * (m - accepted) / exp_rate)))
        V = sample_tau(model.kern, batch, rng)
        q = leverage_score(model, V)
        if bottom_raised:
            q = q / 2.0 + 0.5
        u = rng.random(batch)
        keep = u * env < q
        hits = np.flatnonzero(keep)
        if accepted + hits.size >= m:
            # stop counting at the m-th acceptance so the recorded
            # acceptance rate stays an unbiased estimate
            need = m - accepted
            cut = int(hits[need - 1]) + 1
            hits = hits[:need]
            proposals += cut
        else:
            proposals += batch
        freqs.append(V[hits])
        qs.append(q[hits])
        accepted += hits.size
        if accepted < m and proposals >= trial_budget:
            rate = accepted / proposals
            if rate < accept_floor:
                raise SamplerAbort(
                    f"acceptance rate {rate:.3e} below floor {accept_floor:.3e} "
                    f"after {proposals} proposals (expected rate "
                    f"{exp_rate:.3e} = lam * d(lam) adjusted for envelope)",
                    proposals=proposals,
                    accepted=accepted,
                    expected_acceptance=exp_rate,
                )
    fs = FeatureSet(freqs=np.vstack(freqs), mode="optimized",
                    leverage_values=np.concatenate(qs), lam=model.lam)
    diag = SamplerDiagnostics(
        proposals=proposals,
        accepted=accepted,
        acceptance_rate=accepted / proposals,
        expected_acceptance=exp_rate,
    )
    return fs, diag


@dataclass(frozen=True)
class GridTabulation:
    """Exact tabulation of the optimized density on a rectangular grid.

    edges   : per-coordinate cell edge arrays (length cells+1 each).
    centers : per-coordinate cell center arrays.
    probs   : flattened cell probabilities (C-order over coordinates),
              normalized to sum to one.
    covered : tau mass of the grid box before normalization.
    """

    edges: list[np.ndarray]
    centers: list[np.ndarray]
    probs: np.ndarray
    covered: float


def tabulate_optimized_density(
    model: SpectralModel,
    cells_per_coord: int = 512,
    half_width_sigmas: float = 6.0,
) -> GridTabulation:
    """Tabulate q(v) tau(v) on a product grid covering >= 1 - 1e-6 tau mass.

    Only implemented for dimension <= 2; the grid sampler and its
    distributional tests build on this shared tabulation.  Cell mass is the
    exact tau measure of the cell times the leverage density at the cell
    center.
    """
    dim = model.kern.dim
    if dim > 2:
        raise ConfigError("grid tabulation only supports dimension <= 2")
    sigma = model.kern.tau_sigma
    half = half_width_sigmas * sigma
    tail = 2.0 * norm.sf(half_width_sigmas)
    covered = (1.0 - tail) ** dim
    if covered < 1.0 - 1e-6:
        raise ConfigError(
            f"grid covers only {covered!r} of tau mass; widen half_width_sigmas"
        )
    edges = [np.linspace(-half, half, cells_per_coord + 1) for _ in range(dim)]
    centers = [0.5 * (e[:-1] + e[1:]) for e in edges]
    masses = [np.diff(norm.cdf(e / sigma)) for e in edges]
    if dim == 1:
        V = centers[0][:, None]
        tau_mass = masses[0]
    else:
        g0, g1 = np.meshgrid(centers[0], centers[1], indexing="ij")
        V = np.stack([g0.ravel(), g1.ravel()], axis=1)
        tau_mass = np.outer(masses[0], masses[1]).ravel()
    probs = leverage_score(model, V) * tau_mass
    probs = probs / probs.sum()
    return GridTabulation(edges=edges, centers=centers, probs=probs,
                          covered=covered)


def sample_optimized_grid(
    model: SpectralModel,
    m: int,
    rng: np.random.Generator,
    cells_per_coord: int = 512,
    half_width_sigmas: float = 6.0,
) -> tuple[FeatureSet, SamplerDiagnostics]:
    """Exact inverse-CDF sampling from the tabulated optimized density.

    Draws a grid cell proportional to its tabulated mass, then jitters
    uniformly inside the cell.  Dimension <= 2 only.
    """
    if m < 1:
        raise ConfigError(f"m must be >= 1, got {m}")
    tab = tabulate_optimized_density(model, cells_per_coord, half_width_sigmas)
    dim = model.kern.dim
    cum = np.cumsum(tab.probs)
    cum[-1] = 1.0
    flat = np.searchsorted(cum, rng.random(m), side="right")
    if dim == 1:
        idx = flat[:, None]
    else:
        idx = np.stack(np.unravel_index(flat, (cells_per_coord,) * dim), axis=1)
    lo = np.stack([tab.edges[c][idx[:, c]] for c in range(dim)], axis=1)
    width = np.stack([np.diff(tab.edges[c])[idx[:, c]] for c in range(dim)], axis=1)
    freqs = lo + width * rng.random((m, dim))
    qs = leverage_score(model, freqs)
    fs = FeatureSet(freqs=freqs, mode="optimized", leverage_values=qs,
                    lam=model.lam)
    diag = SamplerDiagnostics(proposals=m, accepted=m, acceptance_rate=1.0,
                              expected_acceptance=1.0)
    return fs, diag
