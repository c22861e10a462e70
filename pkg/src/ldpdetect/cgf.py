"""Limiting cumulant generating functions of the detector statistics.

Each detector compares the normalized log-likelihood-type statistic

    T_n = offset_n + (1/2n) y' W y

against zero, where ``W`` is the detector's quadratic kernel.  Its scaled
CGF ``(1/n) log E_j exp(n t T_n)`` converges to

    Lambda_j(t) = t * c - 1/2 * mean_w log(1 - t * q(w) * f_j(w)),

with ``q`` the symbol of ``W``, ``f_0 = sigma2`` and ``f_1 = sigma2 +
theta2 * f_s`` the observation spectra, and ``c`` the limit of the offset.
All three detector families are instances of this form.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass

import numpy as np

from .errors import ContractError, DomainError, ResourceLimitError
from .spectra import DEFAULT_PANELS, NoiseModel, Spectrum, grid_mean, omega_grid

# Evaluations closer than this (relative) to the domain edge report +inf.
BOUNDARY_GUARD = 1e-9
FINITE_N_CAP = 8192
FAMILIES = ("optimal", "simple_quadratic", "banded")


def g_m(b, omega):
    """Symbol ``b0 + 2 sum_l b_l cos(l w)`` of the banded Toeplitz kernel."""
    b = np.asarray(b, dtype=float)
    w = np.asarray(omega, dtype=float)
    out = np.full(w.shape, b[0]) if w.ndim else np.float64(b[0])
    for lag in range(1, b.size):
        out = out + 2.0 * b[lag] * np.cos(lag * w)
    return float(out) if np.ndim(out) == 0 else out


def banded_symbol_sup(b, panels: int = DEFAULT_PANELS) -> float:
    """Supremum of ``g_m`` over the quadrature nodes plus ``0`` and ``pi``."""
    nodes = np.concatenate([omega_grid(panels), [0.0, math.pi]])
    return float(np.max(g_m(b, nodes)))


@dataclass(frozen=True)
class DetectorModel:
    """One detector family applied to a given noise model and signal spectrum."""

    family: str
    noise: NoiseModel
    spectrum: Spectrum
    b: tuple = ()

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise DomainError(f"unknown detector family {self.family!r}")
        if self.family == "banded":
            if len(self.b) == 0:
                raise DomainError("banded detector needs coefficients b0..bm")
            object.__setattr__(self, "b", tuple(float(x) for x in self.b))
        elif self.b:
            raise DomainError(f"{self.family} detector takes no coefficients")

    @property
    def m(self) -> int:
        return len(self.b) - 1

    @classmethod
    def optimal(cls, noise, spectrum):
        return cls("optimal", noise, spectrum)

    @classmethod
    def simple_quadratic(cls, noise, spectrum):
        return cls("simple_quadratic", noise, spectrum)

    @classmethod
    def banded(cls, noise, spectrum, b):
        return cls("banded", noise, spectrum, tuple(b))

    def label(self) -> str:
        if self.family == "banded":
            return f"banded(m={self.m})"
        return self.family


class LimitCgf:
    """One limiting CGF ``t -> t*c - 1/2 mean log(1 - t*h)`` on a grid.

    Calling the object returns ``math.inf`` at and beyond the right edge of
    the domain instead of raising.
    """

    def __init__(self, offset: float, h: np.ndarray, t_sup: float):
        self.offset = float(offset)
        self.h = np.asarray(h, dtype=float)
        self.t_sup = float(t_sup)
        self._guard = self.t_sup - BOUNDARY_GUARD * max(1.0, abs(self.t_sup))

    def __call__(self, t: float) -> float:
        t = float(t)
        if t >= self._guard:
            return math.inf
        total = np.log1p(self.h * -t).sum()
        if not math.isfinite(total):
            return math.inf
        return t * self.offset - 0.5 * float(total) / self.h.size

    def derivative(self, t: float, step: float | None = None) -> float:
        """Central-difference slope with step ``1e-6 (1 + |t|)``."""
        h = 1e-6 * (1.0 + abs(t)) if step is None else step
        return (self(t + h) - self(t - h)) / (2.0 * h)

    @property
    def mean(self) -> float:
        """Slope at the origin, i.e. the limit of the statistic."""
        return self.derivative(0.0)


@dataclass(frozen=True)
class CgfPair:
    """The two limiting CGFs of a statistic, under H0 and under H1."""

    lambda0: LimitCgf
    lambda1: LimitCgf

    @property
    def t0_sup(self) -> float:
        return self.lambda0.t_sup

    @property
    def t1_sup(self) -> float:
        return self.lambda1.t_sup

    def __getitem__(self, hypothesis: int) -> LimitCgf:
        return (self.lambda0, self.lambda1)[hypothesis]


def _sup_inverse(peak: float) -> float:
    return math.inf if peak <= 0 else 1.0 / peak


def log_det_limit(noise: NoiseModel, spectrum: Spectrum, panels: int = DEFAULT_PANELS) -> float:
    """``(1/2) mean log(sigma2 / (sigma2 + theta2 f))``, the limit of the offset."""
    f = spectrum.on_grid(panels)
    return 0.5 * grid_mean(-np.log1p(noise.theta2 * f / noise.sigma2))


def cgf_simple_quadratic(noise: NoiseModel, spectrum: Spectrum, panels: int = DEFAULT_PANELS) -> CgfPair:
    """CGFs of the energy detector designed for a white signal."""
    s2, th2 = noise.sigma2, noise.theta2
    f = spectrum.on_grid(panels)
    _, sup_M = spectrum.bounds()
    offset = 0.5 * math.log(s2 / (s2 + th2))
    h0 = np.full(f.shape, th2 / (s2 + th2))
    h1 = th2 * (s2 + th2 * f) / (s2 * (s2 + th2))
    return CgfPair(
        LimitCgf(offset, h0, _sup_inverse(th2 / (s2 + th2))),
        LimitCgf(offset, h1, _sup_inverse(th2 * (s2 + th2 * sup_M) / (s2 * (s2 + th2)))),
    )


def cgf_optimal(noise: NoiseModel, spectrum: Spectrum, panels: int = DEFAULT_PANELS) -> CgfPair:
    """CGFs of the log-likelihood-ratio statistic."""
    s2, th2 = noise.sigma2, noise.theta2
    f = spectrum.on_grid(panels)
    _, sup_M = spectrum.bounds()
    offset = log_det_limit(noise, spectrum, panels)
    h0 = th2 * f / (s2 + th2 * f)
    h1 = th2 * f / s2
    return CgfPair(
        LimitCgf(offset, h0, _sup_inverse(th2 * sup_M / (s2 + th2 * sup_M))),
        LimitCgf(offset, h1, _sup_inverse(th2 * sup_M / s2)),
    )


def cgf_banded(noise: NoiseModel, spectrum: Spectrum, b, panels: int = DEFAULT_PANELS) -> CgfPair:
    """CGFs of the banded-quadratic statistic with Toeplitz coefficients ``b``."""
    s2, th2 = noise.sigma2, noise.theta2
    nodes = omega_grid(panels)
    f = spectrum.on_grid(panels)
    g = g_m(b, nodes)
    if np.any(g <= 0):
        raise ContractError("banded symbol g_m is not positive on the frequency grid")
    offset = log_det_limit(noise, spectrum, panels)
    h0 = s2 * g
    h1 = (s2 + th2 * f) * g
    g_sup = banded_symbol_sup(b, panels)
    return CgfPair(
        LimitCgf(offset, h0, _sup_inverse(s2 * g_sup)),
        LimitCgf(offset, h1, _sup_inverse(float(h1.max()))),
    )


def detector_cgf(detector: DetectorModel, panels: int = DEFAULT_PANELS) -> CgfPair:
    """Dispatch to the CGF of ``detector.family``."""
    if detector.family == "optimal":
        return cgf_optimal(detector.noise, detector.spectrum, panels)
    if detector.family == "simple_quadratic":
        return cgf_simple_quadratic(detector.noise, detector.spectrum, panels)
    return cgf_banded(detector.noise, detector.spectrum, detector.b, panels)


# -- finite-n oracle ------------------------------------------------------


@functools.lru_cache(maxsize=8)
def _covariance_eigenvalues(spectrum: Spectrum, noise: NoiseModel, n: int) -> np.ndarray:
    from . import finite_sim

    _, sigma1 = finite_sim.toeplitz_covariances(spectrum, noise, n)
    eig = np.linalg.eigvalsh(sigma1)
    eig.setflags(write=False)
    return eig


@functools.lru_cache(maxsize=24)
def _finite_spectrum(detector: DetectorModel, n: int, hypothesis: int):
    """Deterministic offset and eigenvalues of ``W Sigma_j`` at size ``n``.

    ``Sigma_0 = sigma2 I`` and the simple detector's ``W = c I`` reduce to
    scalings.  For the optimal detector ``W = I/sigma2 - Sigma_1^{-1}``
    shares eigenvectors with ``Sigma_1``, so both hypotheses follow from the
    eigenvalues ``mu`` of ``Sigma_1``: ``1 - sigma2/mu`` and
    ``mu/sigma2 - 1``.  The banded detector forms ``L' W L`` with
    ``Sigma_1 = L L'``, which is similar to ``W Sigma_1``.
    """
    from . import finite_sim

    offset = finite_sim.statistic_offset(detector, n)
    s2 = detector.noise.sigma2
    if detector.family == "simple_quadratic":
        c = finite_sim.quadratic_matrix(detector, 1)[0, 0]
        if hypothesis == 0:
            eig = np.full(n, c * s2)
        else:
            eig = c * _covariance_eigenvalues(detector.spectrum, detector.noise, n)
    elif detector.family == "optimal":
        mu = _covariance_eigenvalues(detector.spectrum, detector.noise, n)
        eig = 1.0 - s2 / mu if hypothesis == 0 else mu / s2 - 1.0
    else:
        W = finite_sim.quadratic_matrix(detector, n)
        if hypothesis == 0:
            eig = s2 * np.linalg.eigvalsh(W)
        else:
            chol = finite_sim.covariance_cholesky(detector.spectrum, detector.noise, n)
            eig = np.linalg.eigvalsh(chol.T @ (W @ chol))
    eig = np.array(eig)
    eig.setflags(write=False)
    return offset, eig


def finite_cgf(detector: DetectorModel, n: int, t: float, hypothesis: int, cap: int = FINITE_N_CAP) -> float:
    """Exact ``(1/n) log E_j exp(n t T_n)`` from the eigenvalues of ``W Sigma_j``.

    Uses the Gaussian quadratic-form identity
    ``log E exp(s y'Wy) = -1/2 sum log(1 - 2 s lambda_i)`` with ``s = t/2``.
    Returns ``math.inf`` outside the finite-n domain.
    """
    if hypothesis not in (0, 1):
        raise DomainError(f"hypothesis must be 0 or 1, got {hypothesis}")
    if n < 1:
        raise DomainError(f"n must be positive, got {n}")
    if n > cap:
        raise ResourceLimitError(f"n={n} exceeds the finite-n cap {cap}")
    offset, eig = _finite_spectrum(detector, int(n), int(hypothesis))
    arg = 1.0 - float(t) * eig
    if np.any(arg <= 0):
        return math.inf
    return float(t) * offset - 0.5 * float(np.mean(np.log(arg)))
