"""Rate functions, error exponents and asymptotic relative efficiency.

With equal priors the detectors threshold their statistic at zero, so the
false-alarm and miss exponents are the rate functions evaluated at the
threshold:

    E0 = sup_{t >= 0} -Lambda_0(t),    E1 = sup_{t <= 0} -Lambda_1(t),

provided the limits of the statistic straddle zero (``Lambda_0'(0) < 0 <
Lambda_1'(0)``).  Otherwise the corresponding error probability decays
sub-exponentially and the exponent is zero.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

from scipy import optimize

from ._io import csv_line, write_text
from .cgf import CgfPair, DetectorModel, LimitCgf, detector_cgf
from .errors import ContractError, DomainError, NumericalError, UndefinedAREError
from .spectra import DEFAULT_PANELS, NoiseModel, Spectrum

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0
MEAN_MARGIN = 1e-12
EDGE_FRACTION = 1e-6
LEFT_BRACKET_CAP = 1e6
T_RTOL = 1e-12

SWEEP_HEADER = "param,snr_db,E_detector1,E_detector2,ARE,feasible1,feasible2"


@dataclass(frozen=True)
class ExponentReport:
    e0: float
    e1: float
    e: float
    t0_star: float
    t1_star: float
    feasible: bool
    mean0: float
    mean1: float
    residual0: float = 0.0
    residual1: float = 0.0


def _slope(phi, t: float) -> float:
    h = 1e-6 * (1.0 + abs(t))
    return (phi(t + h) - phi(t - h)) / (2.0 * h)


def maximize_concave(phi, lo: float, hi: float, rtol: float = T_RTOL, max_iter: int = 500):
    """Maximize a concave ``phi`` on ``[lo, hi]``.

    Golden-section search narrows the bracket to 1% of its width, then a
    safeguarded Newton iteration on the central-difference slope (second
    derivative from successive slopes) finishes.  Newton steps that leave
    the bracket are replaced by bisection.  Returns ``(t, phi(t))``.
    """
    if not hi > lo:
        raise NumericalError("empty bracket", lo=lo, hi=hi)
    a, b = lo, hi
    x1 = b - GOLDEN * (b - a)
    x2 = a + GOLDEN * (b - a)
    f1, f2 = phi(x1), phi(x2)
    coarse = 1e-2 * (hi - lo)
    for _ in range(max_iter):
        if b - a <= coarse:
            break
        if f1 >= f2:
            b, x2, f2 = x2, x1, f1
            x1 = b - GOLDEN * (b - a)
            f1 = phi(x1)
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + GOLDEN * (b - a)
            f2 = phi(x2)

    # Bracket endpoints may be the domain ends, where the maximum can sit.
    t = x1 if f1 >= f2 else x2
    s = _slope(phi, t)
    t_prev, s_prev = (x2, _slope(phi, x2)) if t == x1 else (x1, _slope(phi, x1))
    for _ in range(max_iter):
        if s > 0:
            a = max(a, t)
        elif s < 0:
            b = min(b, t)
        else:
            break
        curvature = (s - s_prev) / (t - t_prev) if t != t_prev else 0.0
        step_ok = curvature < 0 and math.isfinite(curvature)
        t_new = t - s / curvature if step_ok else 0.5 * (a + b)
        if not a < t_new < b:
            t_new = 0.5 * (a + b)
        tol = rtol * max(1.0, abs(t_new))
        if abs(t_new - t) <= tol or b - a <= tol:
            t = t_new
            break
        t_prev, s_prev = t, s
        t, s = t_new, _slope(phi, t_new)
    else:
        raise NumericalError("maximizer did not converge", bracket=(a, b), t=t)

    value = phi(t)
    for edge in (lo, hi):
        edge_value = phi(edge)
        if edge_value > value:
            t, value = edge, edge_value
    return t, value


def _right_edge(cgf: LimitCgf) -> float:
    if math.isinf(cgf.t_sup):
        raise NumericalError("right bracket requested for an unbounded domain")
    return cgf.t_sup * (1.0 - EDGE_FRACTION)


def _left_edge(slope_at, cap: float = LEFT_BRACKET_CAP) -> float:
    """Smallest ``-T`` (doubling from 1) where the objective slope turns positive."""
    T = 1.0
    while T <= cap:
        if slope_at(-T) > 0:
            return -T
        T *= 2.0
    raise NumericalError("no sign change of the slope on the left", cap=cap)


def rate(cgf: LimitCgf, z: float) -> float:
    """Legendre transform ``sup_t [z t - Lambda(t)]`` over ``t < t_sup``.

    Solves the stationarity equation ``Lambda'(t) = z`` with a bracketed
    root finder.  Returns ``math.inf`` when the supremum is not attained in
    the interior of the domain: ``z`` below the slope as ``t -> -inf``, or
    above the slope at the last point where the central difference stays
    inside the domain.
    """
    return rate_with_argmax(cgf, z)[0]


def rate_with_argmax(cgf: LimitCgf, z: float):
    def excess(t):
        return z - cgf.derivative(t)

    start = excess(0.0)
    if abs(start) <= MEAN_MARGIN:
        return 0.0, 0.0
    if start > 0:
        if math.isinf(cgf.t_sup):
            t = 1.0
            while excess(t) > 0:
                t *= 2.0
                if t > LEFT_BRACKET_CAP:
                    return math.inf, math.inf
            lo, hi = t / 2.0 if t > 1.0 else 0.0, t
        else:
            lo, hi = 0.0, _right_edge(cgf) - 2e-6 * (1.0 + abs(cgf.t_sup))
            if excess(hi) > 0:
                return math.inf, hi
    else:
        try:
            lo, hi = _left_edge(lambda t: excess(t)), 0.0
        except NumericalError:
            return math.inf, -LEFT_BRACKET_CAP
    t = optimize.brentq(excess, lo, hi, xtol=1e-15, rtol=1e-15, maxiter=500)
    return z * t - cgf(t), t


def _one_sided(cgf: LimitCgf, side: int):
    phi = lambda t: -cgf(t)
    if side > 0:
        lo, hi = 0.0, _right_edge(cgf)
    else:
        lo, hi = _left_edge(lambda t: _slope(phi, t)), 0.0
    t, value = maximize_concave(phi, lo, hi)
    return value, t, abs(cgf.derivative(t))


def exponents_from_cgf(pair: CgfPair, degenerate: bool = False) -> ExponentReport:
    """Error exponents at the zero threshold from a pair of limiting CGFs."""
    if degenerate:
        return ExponentReport(0.0, 0.0, 0.0, 0.0, 0.0, False, 0.0, 0.0)
    mean0 = pair.lambda0.mean
    mean1 = pair.lambda1.mean
    e0 = t0 = r0 = 0.0
    e1 = t1 = r1 = 0.0
    if mean0 < -MEAN_MARGIN:
        e0, t0, r0 = _one_sided(pair.lambda0, +1)
    if mean1 > MEAN_MARGIN:
        e1, t1, r1 = _one_sided(pair.lambda1, -1)
    feasible = mean0 < -MEAN_MARGIN and mean1 > MEAN_MARGIN
    e = min(e0, e1) if feasible else 0.0
    return ExponentReport(e0, e1, e, t0, t1, feasible, mean0, mean1, r0, r1)


def exponents(detector: DetectorModel, panels: int = DEFAULT_PANELS) -> ExponentReport:
    """False-alarm, miss and average-error exponents of ``detector``."""
    if detector.noise.theta2 == 0:
        return exponents_from_cgf(None, degenerate=True)
    return exponents_from_cgf(detector_cgf(detector, panels))


def equivalent(detector1: DetectorModel, detector2: DetectorModel) -> bool:
    """True when both detectors compute the same statistic.

    Besides identical models this covers the optimal and simple-quadratic
    detectors under a flat signal spectrum, where the two coincide.
    """
    if detector1 == detector2:
        return True
    same_setting = (detector1.noise, detector1.spectrum) == (detector2.noise, detector2.spectrum)
    lo, hi = detector1.spectrum.bounds()
    pair = {detector1.family, detector2.family}
    return same_setting and lo == hi and pair == {"optimal", "simple_quadratic"}


def are(detector1: DetectorModel, detector2: DetectorModel, panels: int = DEFAULT_PANELS) -> float:
    """Efficiency of ``detector1`` relative to ``detector2``: ``E(d1) / E(d2)``."""
    reference = exponents(detector2, panels).e
    if reference <= 0:
        raise UndefinedAREError(f"{detector2.label()} has zero error exponent")
    if equivalent(detector1, detector2):
        return 1.0
    return exponents(detector1, panels).e / reference


# -- sweeps ---------------------------------------------------------------


@dataclass(frozen=True)
class SweepRow:
    param: float
    snr_db: float
    e_detector1: float
    e_detector2: float
    are: float
    feasible1: bool
    feasible2: bool
    error: str = ""

    def csv(self) -> str:
        return csv_line(
            [self.param, self.snr_db, self.e_detector1, self.e_detector2,
             self.are, self.feasible1, self.feasible2]
        )


def make_detector(family: str, noise: NoiseModel, spectrum: Spectrum, b=()) -> DetectorModel:
    if family == "banded":
        return DetectorModel.banded(noise, spectrum, b)
    return DetectorModel(family, noise, spectrum)


def _sweep_cell(family1, family2, kind, param, snr_db, sigma2, panels, b1, b2) -> SweepRow:
    nan = math.nan
    try:
        spectrum = Spectrum.from_parameter(kind, param)
        noise = NoiseModel.from_snr_db(snr_db, sigma2)
        d1 = make_detector(family1, noise, spectrum, b1)
        d2 = make_detector(family2, noise, spectrum, b2)
        r1 = exponents(d1, panels)
        r2 = exponents(d2, panels)
    except (NumericalError, ContractError, DomainError) as exc:
        return SweepRow(param, snr_db, nan, nan, nan, False, False, str(exc))
    if r2.e <= 0:
        return SweepRow(param, snr_db, r1.e, r2.e, nan, r1.feasible, r2.feasible,
                        "reference exponent is zero")
    ratio = 1.0 if equivalent(d1, d2) else r1.e / r2.e
    return SweepRow(param, snr_db, r1.e, r2.e, ratio, r1.feasible, r2.feasible)


def are_sweep(family1, family2, kind, params, snr_db_list, *, sigma2=1.0,
              panels=DEFAULT_PANELS, b1=(), b2=(), max_workers=None) -> list[SweepRow]:
    """ARE of ``family1`` relative to ``family2`` on a (parameter, SNR) grid.

    Rows come back ordered by ``(param, snr_db)``.  A failing cell is
    recorded with NaN values and an ``error`` message; the sweep continues.
    """
    params = list(params)
    snrs = list(snr_db_list)
    if not params or not snrs:
        raise DomainError("are_sweep needs nonempty parameter and SNR grids")
    cells = sorted((p, s) for p in params for s in snrs)
    work = lambda cell: _sweep_cell(family1, family2, kind, cell[0], cell[1],
                                    sigma2, panels, tuple(b1), tuple(b2))
    if max_workers and max_workers > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            return list(pool.map(work, cells))
    return [work(cell) for cell in cells]


def sweep_to_csv(rows, target=None) -> str:
    text = SWEEP_HEADER + "\n" + "".join(row.csv() for row in rows)
    if target is not None:
        write_text(target, text)
    return text
