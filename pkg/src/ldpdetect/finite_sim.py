"""Finite-sample machinery and Monte Carlo validation of the exponents.

The exact size-``n`` objects live here: Toeplitz covariances under both
hypotheses, the quadratic kernels of the three detectors, the deterministic
log-determinant offset, and the test statistics themselves.  ``simulate``
draws Gaussian observation vectors under each hypothesis, applies the
zero-threshold decision rule and estimates the error probabilities.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass

import numpy as np
from scipy import linalg, stats

from ._io import csv_line, write_text
from .cgf import FINITE_N_CAP, DetectorModel
from .errors import ContractError, DomainError, NumericalError, ResourceLimitError
from .spectra import NoiseModel, Spectrum

SAMPLING_CAP = 4096
MIN_TRIALS = 1000
CHUNK = 4096
Z95 = stats.norm.ppf(0.975)

SIM_HEADER = "n,alpha,alpha_lo,alpha_hi,beta,beta_lo,beta_hi,pe,pe_lo,pe_hi"


# -- exact finite-n objects -------------------------------------------------


def signal_covariance(spectrum: Spectrum, n: int) -> np.ndarray:
    """Toeplitz matrix of signal autocorrelations for lags ``0..n-1``."""
    if spectrum.kind == "gauss_markov":
        column = spectrum.a ** np.arange(n, dtype=float)
    elif spectrum.kind == "triangular":
        column = np.maximum(0.0, 1.0 - np.arange(n) / spectrum.M)
    else:
        column = np.array([spectrum.autocorrelation(k) for k in range(n)])
    return linalg.toeplitz(column)


def toeplitz_covariances(spectrum: Spectrum, noise: NoiseModel, n: int, cap: int = FINITE_N_CAP):
    """Observation covariances ``(sigma2 I, sigma2 I + theta2 Sigma_s)``."""
    if n < 1:
        raise DomainError(f"n must be positive, got {n}")
    if n > cap:
        raise ResourceLimitError(f"n={n} exceeds cap {cap}")
    sigma0 = noise.sigma2 * np.eye(n)
    sigma1 = sigma0 + noise.theta2 * signal_covariance(spectrum, n)
    return sigma0, sigma1


@functools.lru_cache(maxsize=8)
def covariance_cholesky(spectrum: Spectrum, noise: NoiseModel, n: int) -> np.ndarray:
    """Lower Cholesky factor of the H1 covariance (cached, read-only)."""
    _, sigma1 = toeplitz_covariances(spectrum, noise, n)
    try:
        chol = np.linalg.cholesky(sigma1)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"H1 covariance is not positive definite at n={n}") from exc
    chol.setflags(write=False)
    return chol


def banded_matrix(b, n: int) -> np.ndarray:
    """Symmetric banded Toeplitz matrix with first row ``b0, ..., bm, 0, ...``."""
    column = np.zeros(n)
    k = min(len(b), n)
    column[:k] = np.asarray(b, dtype=float)[:k]
    return linalg.toeplitz(column)


@functools.lru_cache(maxsize=4)
def quadratic_matrix(detector: DetectorModel, n: int) -> np.ndarray:
    """Kernel ``W`` in ``T_n = offset + y'Wy / (2n)`` (cached, read-only)."""
    W = _quadratic_matrix(detector, n)
    W.setflags(write=False)
    return W


def _quadratic_matrix(detector: DetectorModel, n: int) -> np.ndarray:
    s2, th2 = detector.noise.sigma2, detector.noise.theta2
    if detector.family == "simple_quadratic":
        return th2 / (s2 * (s2 + th2)) * np.eye(n)
    if detector.family == "banded":
        return banded_matrix(detector.b, n)
    chol = covariance_cholesky(detector.spectrum, detector.noise, n)
    inv1 = linalg.cho_solve((chol, True), np.eye(n))
    W = np.eye(n) / s2 - inv1
    return 0.5 * (W + W.T)


def statistic_offset(detector: DetectorModel, n: int) -> float:
    """Deterministic part of the statistic.

    ``(1/2) log(sigma2/(sigma2+theta2))`` for the simple detector, and
    ``(1/2n) log(|Sigma_0| / |Sigma_1|)`` for the other two.
    """
    s2, th2 = detector.noise.sigma2, detector.noise.theta2
    if detector.family == "simple_quadratic":
        return 0.5 * math.log(s2 / (s2 + th2))
    chol = covariance_cholesky(detector.spectrum, detector.noise, n)
    logdet1 = 2.0 * float(np.sum(np.log(np.diag(chol))))
    return 0.5 * (n * math.log(s2) - logdet1) / n


def banded_recursion(y, b) -> float:
    """``y' Q y`` for the banded kernel, accumulated one sample at a time.

    Sample ``i`` only needs its ``m`` predecessors:
    ``C_i = C_{i-1} + b0 y_i^2 + 2 sum_{l=1..m} b_l y_{i-l} y_i``.
    """
    b = [float(x) for x in b]
    m = len(b) - 1
    total = 0.0
    for i, yi in enumerate(y):
        acc = b[0] * yi
        for lag in range(1, min(m, i) + 1):
            acc += 2.0 * b[lag] * y[i - lag]
        total += acc * yi
    return total


def _banded_form(y: np.ndarray, b) -> np.ndarray:
    """Vectorized lag sums of :func:`banded_recursion` over the last axis."""
    out = b[0] * np.einsum("...i,...i->...", y, y)
    for lag in range(1, len(b)):
        if lag >= y.shape[-1]:
            break
        out = out + 2.0 * b[lag] * np.einsum("...i,...i->...", y[..., lag:], y[..., :-lag])
    return out


def statistic(detector: DetectorModel, y) -> np.ndarray | float:
    """Normalized log-likelihood-type statistic for one vector or a batch.

    ``y`` has shape ``(n,)`` or ``(trials, n)``.  The optimal detector
    whitens with the H1 Cholesky factor: ``y'Qy = |y|^2/sigma2 - |L^{-1}y|^2``.
    """
    y = np.asarray(y, dtype=float)
    if y.ndim not in (1, 2) or y.shape[-1] < 1:
        raise ContractError(f"y must have shape (n,) or (trials, n), got {y.shape}")
    n = y.shape[-1]
    s2, th2 = detector.noise.sigma2, detector.noise.theta2
    offset = statistic_offset(detector, n)
    energy = np.einsum("...i,...i->...", y, y)
    if detector.family == "simple_quadratic":
        form = th2 / (s2 * (s2 + th2)) * energy
    elif detector.family == "banded":
        form = _banded_form(y, detector.b)
    else:
        chol = covariance_cholesky(detector.spectrum, detector.noise, n)
        white = linalg.solve_triangular(chol, y.T, lower=True, check_finite=False)
        form = energy / s2 - np.einsum("i...,i...->...", white, white)
    out = offset + form / (2.0 * n)
    return float(out) if np.ndim(out) == 0 else out


# -- Monte Carlo ------------------------------------------------------------


@dataclass(frozen=True)
class SimConfig:
    detector: DetectorModel
    n_list: tuple
    trials: int = 100_000
    seed: int = 0
    prior0: float = 0.5

    def __post_init__(self):
        object.__setattr__(self, "n_list", tuple(int(n) for n in self.n_list))
        if not self.n_list:
            raise DomainError("n_list is empty")
        if any(b <= a for a, b in zip(self.n_list, self.n_list[1:])) or self.n_list[0] < 1:
            raise DomainError("n_list must be strictly increasing positive integers")
        if self.n_list[-1] > SAMPLING_CAP:
            raise ResourceLimitError(f"n={self.n_list[-1]} exceeds sampling cap {SAMPLING_CAP}")
        if self.trials < MIN_TRIALS:
            raise DomainError(f"trials must be at least {MIN_TRIALS}, got {self.trials}")
        if self.prior0 != 0.5:
            raise DomainError("only equal priors are supported")
        if not 0 <= self.seed < 2**64:
            raise DomainError("seed must be a 64-bit unsigned integer")


def clopper_pearson(k: int, total: int, level: float = 0.95) -> tuple[float, float]:
    """Exact binomial confidence interval for ``k`` successes in ``total``."""
    tail = (1.0 - level) / 2.0
    lo = 0.0 if k == 0 else float(stats.beta.ppf(tail, k, total - k + 1))
    hi = 1.0 if k == total else float(stats.beta.ppf(1.0 - tail, k + 1, total - k))
    return lo, hi


@dataclass(frozen=True)
class SimRow:
    n: int
    alpha: float
    alpha_ci: tuple
    beta: float
    beta_ci: tuple
    pe: float
    pe_ci: tuple
    errors0: int
    errors1: int

    def csv(self) -> str:
        return csv_line([self.n, self.alpha, *self.alpha_ci, self.beta, *self.beta_ci,
                         self.pe, *self.pe_ci])


@dataclass(frozen=True)
class SimEstimate:
    rows: tuple
    trials: int
    fitted_slope: float
    slope_ci: tuple
    usable: int
    truncated: bool

    def footer(self) -> list:
        return [self.fitted_slope, *self.slope_ci]

    def to_csv(self, target=None) -> str:
        text = SIM_HEADER + "\n" + "".join(r.csv() for r in self.rows) + csv_line(self.footer())
        if target is not None:
            write_text(target, text)
        return text


def _generator(seed: int, n: int, hypothesis: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(n, hypothesis))))


def count_errors(detector: DetectorModel, n: int, trials: int, seed: int, hypothesis: int) -> int:
    """Number of wrong decisions among ``trials`` draws under ``hypothesis``.

    Decision rule: decide H1 when the statistic is ``>= 0``.
    """
    rng = _generator(seed, n, hypothesis)
    scale = math.sqrt(detector.noise.sigma2)
    chol = covariance_cholesky(detector.spectrum, detector.noise, n) if hypothesis else None
    errors = 0
    done = 0
    while done < trials:
        size = min(CHUNK, trials - done)
        z = rng.standard_normal((size, n))
        y = z @ chol.T if hypothesis else scale * z
        t = statistic(detector, y)
        errors += int(np.count_nonzero(t < 0) if hypothesis else np.count_nonzero(t >= 0))
        done += size
    return errors


def fit_slope(n_values, pe_values, total: int):
    """Weighted least-squares slope of ``-log pe`` against ``n``.

    Weights are inverse delta-method variances ``pe * total / (1 - pe)``.
    Returns ``(slope, (lo, hi))`` or NaNs with fewer than two points.
    """
    x = np.asarray(n_values, dtype=float)
    p = np.asarray(pe_values, dtype=float)
    if x.size < 2:
        return math.nan, (math.nan, math.nan)
    w = p * total / (1.0 - p)
    y = -np.log(p)
    xbar = np.sum(w * x) / np.sum(w)
    ybar = np.sum(w * y) / np.sum(w)
    sxx = np.sum(w * (x - xbar) ** 2)
    slope = float(np.sum(w * (x - xbar) * (y - ybar)) / sxx)
    half = float(Z95 / math.sqrt(sxx))
    return slope, (slope - half, slope + half)


def simulate(config: SimConfig) -> SimEstimate:
    """Monte Carlo error probabilities and their exponential decay rate.

    The slope is fitted on the prefix of ``n_list`` whose pooled error
    estimate is nonzero; ``truncated`` marks a shorter prefix than asked for.
    """
    rows = []
    T = config.trials
    for n in config.n_list:
        k0 = count_errors(config.detector, n, T, config.seed, 0)
        k1 = count_errors(config.detector, n, T, config.seed, 1)
        rows.append(SimRow(
            n=n,
            alpha=k0 / T, alpha_ci=clopper_pearson(k0, T),
            beta=k1 / T, beta_ci=clopper_pearson(k1, T),
            pe=(k0 + k1) / (2 * T), pe_ci=clopper_pearson(k0 + k1, 2 * T),
            errors0=k0, errors1=k1,
        ))
    usable = 0
    for row in rows:
        if row.pe <= 0 or row.pe >= 1:
            break
        usable += 1
    prefix = rows[:usable]
    slope, ci = fit_slope([r.n for r in prefix], [r.pe for r in prefix], 2 * T)
    return SimEstimate(tuple(rows), T, slope, ci, usable, usable < len(rows))
