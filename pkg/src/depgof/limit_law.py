"""Monte-Carlo limit laws of the KS and CM statistics and the tests themselves.

The limiting bridge is synthesized from a kernel spectrum as
y = U Lambda^{1/2} z with iid standard normal z, giving one M-vector per
trial; the statistics are KS = max_i |y_i| and CM = sum_i y_i^2 / (M+1)
(the quadrature weight of the grid, so that E[CM] = Tr H exactly).

Trials are generated in fixed-size chunks whose generators are spawned
from (seed, chunk index), so results are bitwise reproducible and
independent of how chunks are scheduled across workers.  Distributions
are immutable sorted sample arrays; p-values use the upper-tail
(r+1)/(n_trials+1) convention, which never returns zero.
"""

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.special import erf

from .errors import DataError, ParameterError
from .grid import QuantileGrid
from .sampling import as_series

_CHUNK = 16_384


@dataclass(frozen=True)
class StatisticDistribution:
    """Sorted Monte-Carlo samples of one statistic, acting as its null CDF."""

    kind: str                 # "ks" or "cm"
    samples: np.ndarray       # ascending
    n_trials: int
    spectrum_digest: str
    grid_m: int

    def quantile(self, u):
        return np.quantile(self.samples, u)


@dataclass(frozen=True)
class GofResult:
    """Both statistics of one series with their Monte-Carlo p-values."""

    ks_stat: float
    cm_stat: float
    ks_p: float
    cm_p: float
    n: int


def kolmogorov_cdf(k):
    """Classical limit CDF of the iid KS statistic, K(k) = 1 - 2 sum (-1)^{j-1} e^{-2 j^2 k^2}."""
    k = np.asarray(k, dtype=float)
    out = np.zeros_like(k, dtype=float)
    pos = k > 0
    if np.any(pos):
        j = np.arange(1, 101)
        terms = (-1.0) ** (j - 1) * np.exp(-2.0 * j ** 2 * k[pos, None] ** 2)
        out[pos] = 1.0 - 2.0 * terms.sum(axis=-1)
    return out if out.ndim else float(out)


def uniformity_pvalue(pvals):
    """Asymptotic KS test of a p-value sample against the uniform law."""
    p = np.sort(np.asarray(pvals, dtype=float))
    n = p.size
    if n == 0:
        raise DataError("empty p-value sample")
    grid = np.arange(1, n + 1) / n
    d = max(np.abs(grid - p).max(), np.abs(grid - 1.0 / n - p).max())
    return float(1.0 - kolmogorov_cdf(math.sqrt(n) * d))


def _chunk_rng(seed, index):
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(index,)))


def sample_limit_process(spectrum, seed):
    """One draw of the limiting bridge on the grid: U (sqrt(lambda) z)."""
    rng = np.random.default_rng(seed)
    z = rng.standard_normal(spectrum.n_modes)
    return spectrum.eigenvectors @ (np.sqrt(spectrum.eigenvalues) * z)


def _law_chunk(spectrum, synth, weight, seed, index, count):
    z = _chunk_rng(seed, index).standard_normal((count, spectrum.n_modes))
    y = z @ synth
    ks = np.abs(y).max(axis=1)
    cm = np.einsum("ij,ij->i", y, y) * weight
    return ks, cm


def simulate_statistic_distribution(spectrum, n_trials, seed, n_threads=1):
    """Empirical KS and CM laws from n_trials draws of the limit process.

    Both statistics are computed from the same draws.  Trials come in
    fixed chunks of 16384 seeded by (seed, chunk), so the result does not
    depend on n_threads.
    """
    if n_trials < 1:
        raise ParameterError("need at least one trial")
    if n_trials < 10_000:
        warnings.warn(f"n_trials={n_trials} is small for quantile use; "
                      "p-values will be coarse", RuntimeWarning, stacklevel=2)
    g = spectrum.grid
    synth = (spectrum.eigenvectors * np.sqrt(spectrum.eigenvalues)[None, :]).T
    counts = [min(_CHUNK, n_trials - s) for s in range(0, n_trials, _CHUNK)]
    args = [(spectrum, synth, g.weight, seed, i, c) for i, c in enumerate(counts)]
    if n_threads > 1:
        with ThreadPoolExecutor(max_workers=n_threads) as pool:
            parts = list(pool.map(lambda a: _law_chunk(*a), args))
    else:
        parts = [_law_chunk(*a) for a in args]
    ks = np.sort(np.concatenate([p[0] for p in parts]))
    cm = np.sort(np.concatenate([p[1] for p in parts]))
    return (
        StatisticDistribution(kind="ks", samples=ks, n_trials=n_trials,
                              spectrum_digest=spectrum.digest, grid_m=g.m),
        StatisticDistribution(kind="cm", samples=cm, n_trials=n_trials,
                              spectrum_digest=spectrum.digest, grid_m=g.m),
    )


def simulate_iid_statistic_distribution(m, n_trials, seed, refine=True):
    """KS and CM laws under independence, by direct bridge simulation.

    The bridge is built from Gaussian increments (exact at the grid).  With
    ``refine`` the supremum is completed to the continuum: conditional on
    its endpoints each grid interval is a Brownian bridge whose running
    max has the closed-form tail exp(-2(h-a)(h-b)/dt), sampled by
    inversion (and the min by symmetry), so the refined KS statistic is a
    draw of the true sup over [0,1] rather than over the grid.  The CM
    statistic stays a grid quadrature.  With ``refine`` off, the law
    matches simulate_statistic_distribution on the bridge spectrum.
    """
    if n_trials < 1:
        raise ParameterError("need at least one trial")
    g = QuantileGrid(m)
    w = g.weight
    u = g.points
    ks_parts = []
    cm_parts = []
    done = 0
    index = 0
    while done < n_trials:
        b = min(_CHUNK, n_trials - done)
        rng = _chunk_rng(seed, index)
        incr = rng.standard_normal((b, m + 1)) * math.sqrt(w)
        walk = np.cumsum(incr, axis=1)
        y = np.empty((b, m + 2))
        y[:, 0] = 0.0
        y[:, -1] = 0.0
        y[:, 1:m + 1] = walk[:, :m] - np.outer(walk[:, m], u)
        inner = y[:, 1:m + 1]
        if refine:
            a = y[:, :-1]
            c = y[:, 1:]
            gap2 = (c - a) ** 2
            hi = 0.5 * ((a + c) + np.sqrt(gap2 - 2.0 * w * np.log(rng.random((b, m + 1)))))
            lo = 0.5 * ((a + c) - np.sqrt(gap2 - 2.0 * w * np.log(rng.random((b, m + 1)))))
            ks_parts.append(np.maximum(hi, -lo).max(axis=1))
        else:
            ks_parts.append(np.abs(inner).max(axis=1))
        cm_parts.append(np.einsum("ij,ij->i", inner, inner) * w)
        done += b
        index += 1
    ks = np.sort(np.concatenate(ks_parts))
    cm = np.sort(np.concatenate(cm_parts))
    digest = f"bridge:iid:m={m}:refined={refine}"
    return (
        StatisticDistribution(kind="ks", samples=ks, n_trials=n_trials,
                              spectrum_digest=digest, grid_m=m),
        StatisticDistribution(kind="cm", samples=cm, n_trials=n_trials,
                              spectrum_digest=digest, grid_m=m),
    )


def p_value(stat, dist):
    """Upper-tail Monte-Carlo p-value (r+1)/(n_trials+1), r = #samples >= stat."""
    if dist.n_trials == 0:
        raise DataError("empty statistic distribution")
    r = dist.n_trials - np.searchsorted(dist.samples, stat, side="left")
    return (r + 1.0) / (dist.n_trials + 1.0)


def run_gof_test(series, target_cdf, dist_ks, dist_cm):
    """Test one series against a target CDF using supplied null laws.

    The empirical bridge sqrt(N)(F_N - u) is evaluated at the interior
    quantile grid of the null laws, so the finite-grid sup/sum biases of
    the statistic and of its reference distribution cancel.
    """
    if dist_ks.kind != "ks" or dist_cm.kind != "cm":
        raise ParameterError("distributions must be (ks, cm) in that order")
    if dist_ks.grid_m != dist_cm.grid_m:
        raise ParameterError("null laws were built on different grids")
    x = as_series(series)
    n = x.size
    order = np.sort(x)
    f_sorted = np.asarray(target_cdf(order), dtype=float)
    if np.any(~np.isfinite(f_sorted)) or np.any((f_sorted < 0) | (f_sorted > 1)):
        raise DataError("target CDF must map the sample into [0,1]")
    if np.any(np.diff(f_sorted) < -1e-12):
        raise DataError("target CDF is not monotone on the sample range")
    g = QuantileGrid(dist_ks.grid_m)
    ecdf = np.searchsorted(f_sorted, g.points, side="right") / n
    y = math.sqrt(n) * (ecdf - g.points)
    ks = float(np.abs(y).max())
    cm = float(np.sum(y * y) * g.weight)
    return GofResult(ks_stat=ks, cm_stat=cm,
                     ks_p=float(p_value(ks, dist_ks)),
                     cm_p=float(p_value(cm, dist_cm)), n=n)


def dominant_mode_cdf(kind, spectrum, k):
    """Closed-form CDF approximations when one eigenvalue dominates.

    KS: the bridge is nearly U_0 sqrt(lambda_0) z_0, so KS is |Gaussian|
    with width kappa* = sqrt(sum_j lambda_j U_j(u*)^2) evaluated where
    |U_0| peaks (the sub-dominant modes widen the Gaussian but it remains
    Gaussian to second order), giving erf(k / (sqrt(2) kappa*)).
    CM: lambda_0 z_0^2 is a one-degree chi-square, giving
    erf(sqrt(k / (2 lambda_0))).
    """
    lam = spectrum.eigenvalues
    if lam[0] <= 0:
        raise ParameterError("dominant eigenvalue must be positive")
    k = np.asarray(k, dtype=float)
    if kind == "cm":
        out = erf(np.sqrt(np.clip(k, 0.0, None) / (2.0 * lam[0])))
    elif kind == "ks":
        peak = int(np.argmax(np.abs(spectrum.eigenvectors[:, 0])))
        kappa_star = math.sqrt(float(np.sum(lam * spectrum.eigenvectors[peak, :] ** 2)))
        out = erf(np.clip(k, 0.0, None) / (math.sqrt(2.0) * kappa_star))
    else:
        raise ParameterError(f"kind must be 'ks' or 'cm', got {kind!r}")
    return out if out.ndim else float(out)


def reduction_ratio(dep, iid, u):
    """Quantile ratio dep/iid at level u: the effective sample-size deflation sqrt(N/N_eff)."""
    if dep.kind != iid.kind:
        raise ParameterError(f"distribution kinds differ: {dep.kind} vs {iid.kind}")
    if dep.n_trials == 0 or iid.n_trials == 0:
        raise DataError("empty statistic distribution")
    if not 0.0 < u < 1.0:
        raise ParameterError("quantile level must be inside (0,1)")
    return float(dep.quantile(u) / iid.quantile(u))
