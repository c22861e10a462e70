"""Coefficient design for the banded-quadratic detector by grid search.

For a candidate kernel ``b = (b0, ..., bm)`` the search

1. computes the limits of the statistic under both hypotheses,
2. rejects the cell unless the limits straddle the zero threshold,
3. computes both one-sided exponents and keeps the smaller one,

and returns the cell with the largest exponent.  Extra rounds re-grid a
halved box around the incumbent.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from ._io import csv_line
from .cgf import cgf_banded, g_m, log_det_limit
from .errors import ContractError, DomainError
from .exponent import MEAN_MARGIN, ExponentReport, exponents_from_cgf
from .spectra import DEFAULT_PANELS, NoiseModel, Spectrum, omega_grid

TIE_TOL = 1e-12


def limits(noise: NoiseModel, spectrum: Spectrum, b, panels: int = DEFAULT_PANELS) -> tuple[float, float]:
    """Almost-sure limits ``(Tbar0, Tbar1)`` of the banded statistic.

    The quadratic parts average ``g_m`` against the observation spectrum;
    with the cosine expansion of ``g_m`` these reduce to ``b0`` and
    ``b0 + 2 sum_l b_l r_l`` where ``r_l`` is the signal autocorrelation.
    """
    b = np.asarray(b, dtype=float)
    s2, th2 = noise.sigma2, noise.theta2
    first = log_det_limit(noise, spectrum, panels)
    signal_part = b[0] + 2.0 * sum(b[l] * spectrum.autocorrelation(l) for l in range(1, b.size))
    tbar0 = first + 0.5 * s2 * b[0]
    tbar1 = first + 0.5 * (s2 * b[0] + th2 * signal_part)
    return tbar0, tbar1


def feasible(noise: NoiseModel, spectrum: Spectrum, b, panels: int = DEFAULT_PANELS) -> bool:
    """True when the limits straddle zero, a prerequisite for a positive exponent."""
    tbar0, tbar1 = limits(noise, spectrum, b, panels)
    return tbar0 < -MEAN_MARGIN and tbar1 > MEAN_MARGIN


def symbol_positive(b, panels: int = DEFAULT_PANELS) -> bool:
    """``g_m > 0`` on the quadrature nodes and at ``w = 0, pi``."""
    nodes = np.concatenate([omega_grid(panels), [0.0, math.pi]])
    return bool(np.all(g_m(b, nodes) > 0))


def cell_exponent(noise: NoiseModel, spectrum: Spectrum, b, panels: int = DEFAULT_PANELS) -> ExponentReport:
    """Exponent report of the banded detector with kernel ``b``.

    Raises ContractError for an infeasible kernel.
    """
    if not symbol_positive(b, panels):
        raise ContractError(f"g_m is not positive for b={tuple(b)}")
    if not feasible(noise, spectrum, b, panels):
        raise ContractError(f"limits do not straddle the threshold for b={tuple(b)}")
    return exponents_from_cgf(cgf_banded(noise, spectrum, b, panels))


@dataclass(frozen=True)
class BandedSearchConfig:
    """Search box and resolution for the coefficient grid.

    ``ranges`` holds one ``(lo, hi, steps)`` triple per coefficient.  The
    default box for ``b0`` is ``[0.01, 2]`` and ``[-1, 1]`` for the rest,
    with 64 steps each.
    """

    noise: NoiseModel
    spectrum: Spectrum
    m: int = 1
    ranges: tuple = ()
    refinement_rounds: int = 2
    panels: int = DEFAULT_PANELS

    def __post_init__(self):
        if self.m < 0:
            raise DomainError(f"m must be nonnegative, got {self.m}")
        if not self.ranges:
            default = ((0.01, 2.0, 64),) + ((-1.0, 1.0, 64),) * self.m
            object.__setattr__(self, "ranges", default)
        ranges = tuple((float(lo), float(hi), int(steps)) for lo, hi, steps in self.ranges)
        object.__setattr__(self, "ranges", ranges)
        if len(ranges) != self.m + 1:
            raise DomainError(f"need {self.m + 1} coefficient ranges, got {len(ranges)}")
        for lo, hi, steps in ranges:
            if not hi > lo:
                raise DomainError(f"range needs hi > lo, got ({lo}, {hi})")
            if steps < 3:
                raise DomainError(f"at least 3 steps per coefficient, got {steps}")
        if self.refinement_rounds < 0:
            raise DomainError("refinement_rounds must be nonnegative")


@dataclass(frozen=True)
class BandedResult:
    b_star: tuple | None
    exponent_report: ExponentReport | None
    cells_evaluated: int
    cells_feasible: int
    m: int = 0
    history: tuple = field(default=(), repr=False)

    @property
    def found(self) -> bool:
        return self.b_star is not None

    def csv_row(self) -> str:
        """``m,b0,...,bm,E0,E1,E,cells_evaluated,cells_feasible``."""
        nan = math.nan
        b = self.b_star if self.found else (nan,) * (self.m + 1)
        r = self.exponent_report
        e = (r.e0, r.e1, r.e) if r is not None else (nan, nan, 0.0)
        return csv_line([self.m, *b, *e, self.cells_evaluated, self.cells_feasible])


def result_header(m: int) -> str:
    return ",".join(["m", *(f"b{l}" for l in range(m + 1)), "E0", "E1", "E",
                     "cells_evaluated", "cells_feasible"])


def _axes(ranges):
    return [np.linspace(lo, hi, steps) for lo, hi, steps in ranges]


def _scan(config: BandedSearchConfig, ranges, state):
    """Evaluate one box; updates ``state`` (best, counters) in place."""
    noise, spectrum, panels = config.noise, config.spectrum, config.panels
    nodes = np.concatenate([omega_grid(panels), [0.0, math.pi]])
    first = log_det_limit(noise, spectrum, panels)
    rho = np.array([spectrum.autocorrelation(l) for l in range(config.m + 1)])
    cos_table = np.cos(np.outer(np.arange(1, config.m + 1), nodes))
    s2, th2 = noise.sigma2, noise.theta2

    candidates = np.array(list(itertools.product(*_axes(ranges))))
    # positivity of g_m on the grid nodes plus w = 0 and w = pi
    positive = np.empty(len(candidates), dtype=bool)
    for start in range(0, len(candidates), 512):
        chunk = candidates[start:start + 512]
        g = chunk[:, :1] + 2.0 * chunk[:, 1:] @ cos_table
        positive[start:start + 512] = (g > 0).all(axis=1)
    # straddling limits
    signal_part = candidates[:, 0] + 2.0 * candidates[:, 1:] @ rho[1:]
    tbar0 = first + 0.5 * s2 * candidates[:, 0]
    tbar1 = first + 0.5 * (s2 * candidates[:, 0] + th2 * signal_part)
    straddle = (tbar0 < -MEAN_MARGIN) & (tbar1 > MEAN_MARGIN)

    for b, ok_pos, ok_lim in zip(candidates, positive, straddle):
        key = tuple(float(x) for x in b)
        if key in state["seen"]:
            continue
        state["seen"].add(key)
        state["evaluated"] += 1
        if not (ok_pos and ok_lim):
            continue
        state["feasible"] += 1
        report = exponents_from_cgf(cgf_banded(noise, spectrum, key, panels))
        if not report.feasible:
            continue
        best = state["best"]
        if best is None or report.e > best[1].e + TIE_TOL:
            state["best"] = (key, report)
        elif abs(report.e - best[1].e) <= TIE_TOL and key < best[0]:
            state["best"] = (key, report)


def grid_search(config: BandedSearchConfig) -> BandedResult:
    """Best banded kernel on the configured grid, with local refinement.

    Each refinement round halves every coefficient range around the current
    incumbent (clipped to the original box) and re-grids it with the same
    number of steps.  Ties within 1e-12 go to the lexicographically
    smallest kernel, so the result does not depend on evaluation order.
    """
    state = {"seen": set(), "evaluated": 0, "feasible": 0, "best": None}
    ranges = config.ranges
    history = []
    _scan(config, ranges, state)
    history.append(state["best"])
    for _ in range(config.refinement_rounds):
        if state["best"] is None:
            break
        centre = state["best"][0]
        refined = []
        for (lo0, hi0, steps), (lo, hi, _), c in zip(config.ranges, ranges, centre):
            half = 0.25 * (hi - lo)
            refined.append((max(lo0, c - half), min(hi0, c + half), steps))
        ranges = tuple(refined)
        _scan(config, ranges, state)
        history.append(state["best"])
    best = state["best"]
    if best is None:
        return BandedResult(None, None, state["evaluated"], state["feasible"], config.m, tuple(history))
    return BandedResult(best[0], best[1], state["evaluated"], state["feasible"], config.m, tuple(history))
