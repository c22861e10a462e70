"""Signal spectra on the unit circle and the shared frequency quadrature.

Every spectrum here is the power spectral density of a real, zero-mean,
unit-variance stationary sequence, so it is an even function of the
frequency and integrates to one:

    (1/2pi) * int_0^{2pi} f(w) dw = 1.

All integrals in the package are averages of even functions of ``w`` over a
period.  They are computed with the midpoint rule on ``panels`` uniform
panels; by symmetry only the nodes in ``(0, pi)`` are needed, which halves
the work without changing the result.
"""

from __future__ import annotations

import functools
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import integrate

from .errors import DomainError, NumericalError

TWO_PI = 2.0 * math.pi
DEFAULT_PANELS = 2**14


@functools.lru_cache(maxsize=16)
def omega_grid(panels: int = DEFAULT_PANELS) -> np.ndarray:
    """Midpoint nodes in ``(0, pi)`` of a ``panels``-panel rule on ``[0, 2pi)``.

    The returned array is read-only and shared between callers.
    """
    if panels < 2 or panels % 2:
        raise DomainError(f"panels must be an even integer >= 2, got {panels}")
    nodes = TWO_PI * (np.arange(panels // 2) + 0.5) / panels
    nodes.setflags(write=False)
    return nodes


def grid_mean(values) -> float:
    """Average of an even integrand sampled on :func:`omega_grid` nodes."""
    return float(np.mean(values))


@dataclass(frozen=True)
class NoiseModel:
    """White observation noise of variance ``sigma2`` and signal power ``theta2``."""

    sigma2: float = 1.0
    theta2: float = 1.0

    def __post_init__(self):
        if not self.sigma2 > 0:
            raise DomainError(f"sigma2 must be positive, got {self.sigma2}")
        if not self.theta2 >= 0:
            raise DomainError(f"theta2 must be nonnegative, got {self.theta2}")

    @property
    def snr(self) -> float:
        return self.theta2 / self.sigma2

    @property
    def snr_db(self) -> float:
        return 10.0 * math.log10(self.snr) if self.theta2 > 0 else -math.inf

    @classmethod
    def from_snr_db(cls, snr_db: float, sigma2: float = 1.0) -> "NoiseModel":
        """Noise model with ``theta2 = sigma2 * 10**(snr_db/10)``."""
        return cls(sigma2=sigma2, theta2=sigma2 * 10.0 ** (snr_db / 10.0))


@dataclass(frozen=True)
class Spectrum:
    """A bounded, even, unit-power spectral density.

    Build instances with the ``white``, ``gauss_markov``, ``triangular``,
    ``tabulated`` or ``from_file`` constructors rather than directly.
    """

    kind: str
    a: float = 0.0
    M: int = 1
    samples: tuple = field(default=(), repr=False)

    def __post_init__(self):
        if self.kind == "gauss_markov":
            if not 0.0 <= self.a < 1.0:
                raise DomainError(f"gauss_markov requires 0 <= a < 1, got {self.a}")
        elif self.kind == "triangular":
            if int(self.M) != self.M or self.M < 1:
                raise DomainError(f"triangular requires a positive integer M, got {self.M}")
        elif self.kind == "tabulated":
            if len(self.samples) < 2:
                raise DomainError("tabulated spectrum needs at least two samples")
            if min(self.samples) < 0:
                raise DomainError("tabulated spectrum has negative samples")
        elif self.kind != "white":
            raise DomainError(f"unknown spectrum kind {self.kind!r}")

    # -- constructors -----------------------------------------------------

    @classmethod
    def white(cls) -> "Spectrum":
        return cls("white")

    @classmethod
    def gauss_markov(cls, a: float) -> "Spectrum":
        """AR(1) spectrum with correlation ``a**|k|`` (Poisson kernel)."""
        return cls("gauss_markov", a=float(a))

    @classmethod
    def triangular(cls, M: int) -> "Spectrum":
        """Triangular correlation ``max(0, 1 - |k|/M)`` (Fejer kernel)."""
        if int(M) != M:
            raise DomainError(f"triangular requires an integer M, got {M}")
        return cls("triangular", M=int(M))

    @classmethod
    def from_parameter(cls, kind: str, param=None) -> "Spectrum":
        """One-parameter family member: ``a`` for gauss_markov, ``M`` for triangular."""
        if kind == "gauss_markov":
            return cls.gauss_markov(param)
        if kind == "triangular":
            return cls.triangular(param)
        if kind == "white":
            return cls.white()
        raise DomainError(f"spectrum kind {kind!r} has no scalar parameter")

    @classmethod
    def tabulated(cls, samples, omega=None, symmetry_tol: float = 1e-9) -> "Spectrum":
        """Spectrum from samples on a grid over ``[0, 2pi)``.

        Samples on a non-uniform ``omega`` grid are resampled by periodic
        linear interpolation onto the uniform grid ``2pi k / K`` of the same
        length.  The result is rescaled to unit mean power; a warning is
        issued when the rescaling exceeds 1%.
        """
        values = np.asarray(samples, dtype=float)
        if values.ndim != 1 or values.size < 2:
            raise DomainError("tabulated spectrum needs a 1-D array of at least two samples")
        K = values.size
        uniform = TWO_PI * np.arange(K) / K
        if omega is not None:
            omega = np.asarray(omega, dtype=float)
            if omega.shape != values.shape:
                raise DomainError("omega and samples differ in length")
            if omega[0] < 0 or omega[-1] >= TWO_PI or np.any(np.diff(omega) <= 0):
                raise DomainError("omega must be strictly increasing in [0, 2pi)")
            if not np.allclose(omega, uniform, rtol=0, atol=1e-9):
                values = np.interp(uniform, omega, values, period=TWO_PI)
        if np.any(values < 0):
            raise DomainError("tabulated spectrum has negative samples")
        mirrored = values[(-np.arange(K)) % K]
        if np.max(np.abs(values - mirrored)) > symmetry_tol * max(1.0, values.max()):
            raise DomainError("tabulated spectrum is not symmetric, f(w) != f(2pi - w)")
        power = values.mean()
        if power <= 0:
            raise DomainError("tabulated spectrum has zero power")
        if abs(power - 1.0) > 0.01:
            warnings.warn(
                f"tabulated spectrum rescaled by {1.0 / power:.6g} to unit power",
                stacklevel=2,
            )
        return cls("tabulated", samples=tuple((values / power).tolist()))

    @classmethod
    def from_file(cls, path) -> "Spectrum":
        """Read a two-column ``omega value`` text file."""
        try:
            data = np.loadtxt(Path(path), ndmin=2)
        except ValueError as exc:
            raise DomainError(f"cannot parse spectrum file {path}: {exc}") from None
        if data.shape[1] != 2:
            raise DomainError(f"{path}: expected two columns, found {data.shape[1]}")
        return cls.tabulated(data[:, 1], omega=data[:, 0])

    # -- evaluation -------------------------------------------------------

    def eval(self, omega):
        """Spectral density at ``omega`` in ``[0, 2pi)``; scalar or array."""
        w = np.asarray(omega, dtype=float)
        if np.any(w < 0) or np.any(w >= TWO_PI) or np.any(np.isnan(w)):
            raise DomainError("omega must lie in [0, 2pi)")
        out = self._eval(w)
        return float(out) if out.ndim == 0 else out

    def _eval(self, w: np.ndarray) -> np.ndarray:
        if self.kind == "white":
            return np.ones_like(w)
        if self.kind == "gauss_markov":
            a = self.a
            return (1 - a * a) / (1 - 2 * a * np.cos(w) + a * a)
        if self.kind == "triangular":
            M = self.M
            half = w / 2
            s = np.sin(half)
            near_pole = np.abs(s) < 1e-8
            safe = np.where(near_pole, 1.0, s)
            ratio = np.where(near_pole, M * np.cos(M * half) / np.cos(half), np.sin(M * half) / safe)
            return ratio * ratio / M
        samples = np.asarray(self.samples)
        K = samples.size
        grid = TWO_PI * np.arange(K + 1) / K
        return np.interp(w, grid, np.append(samples, samples[0]))

    def on_grid(self, panels: int = DEFAULT_PANELS) -> np.ndarray:
        """Spectrum sampled at :func:`omega_grid` nodes (cached, read-only)."""
        return _on_grid(self, panels)

    def bounds(self) -> tuple[float, float]:
        """Essential infimum and supremum of the density."""
        if self.kind == "white":
            return 1.0, 1.0
        if self.kind == "gauss_markov":
            a = self.a
            return (1 - a) / (1 + a), (1 + a) / (1 - a)
        if self.kind == "triangular":
            return (0.0 if self.M > 1 else 1.0), float(self.M)
        return float(min(self.samples)), float(max(self.samples))

    def autocorrelation(self, lag: int) -> float:
        """Correlation ``E[s_0 s_k]`` of the underlying sequence."""
        k = abs(int(lag))
        if self.kind == "white":
            return 1.0 if k == 0 else 0.0
        if self.kind == "gauss_markov":
            return self.a**k
        if self.kind == "triangular":
            return max(0.0, 1.0 - k / self.M)
        # Fourier coefficient of the piecewise-linear interpolant: the DFT of
        # the samples times the transform of the hat kernel.
        samples = np.asarray(self.samples)
        K = samples.size
        x = math.pi * k / K
        hat = 1.0 if k == 0 else (math.sin(x) / x) ** 2
        return hat * float(np.mean(samples * np.cos(k * TWO_PI * np.arange(K) / K)))

    def log_mean(self, panels: int = DEFAULT_PANELS, tol: float = 1e-8) -> float:
        """Geometric-mean exponent ``(1/2pi) int log f(w) dw``.

        Spectra bounded away from zero use the uniform grid.  Spectra with
        isolated zeros (Fejer kernels, tabulated samples equal to zero) are
        integrated adaptively with breakpoints at the zeros, where the log
        singularity is integrable.
        """
        inf_m, _ = self.bounds()
        if inf_m > 0:
            return grid_mean(np.log(self.on_grid(panels)))
        zeros = self._zeros_in_half_period()

        def integrand(w):
            v = self._eval(np.asarray(w, dtype=float))
            return math.log(v) if v > 0 else -1e300

        value, abserr = integrate.quad(integrand, 0.0, math.pi, points=zeros or None, limit=500)
        if not math.isfinite(value) or abserr > tol:
            raise NumericalError(
                "log-mean quadrature did not converge", value=value, residual=abserr
            )
        return value / math.pi

    def _zeros_in_half_period(self) -> list[float]:
        if self.kind == "triangular":
            return [TWO_PI * k / self.M for k in range(1, self.M // 2 + 1)]
        samples = np.asarray(self.samples)
        K = samples.size
        return [TWO_PI * k / K for k in np.flatnonzero(samples == 0) if 0 < TWO_PI * k / K <= math.pi]

    def label(self) -> str:
        if self.kind == "gauss_markov":
            return f"gauss_markov(a={self.a:g})"
        if self.kind == "triangular":
            return f"triangular(M={self.M})"
        if self.kind == "tabulated":
            return f"tabulated(K={len(self.samples)})"
        return "white"


@functools.lru_cache(maxsize=64)
def _on_grid(spectrum: Spectrum, panels: int) -> np.ndarray:
    values = spectrum._eval(omega_grid(panels))
    values.setflags(write=False)
    return values
