"""Curve fitting and histogram statistics for the experiment harness."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import curve_fit


def _tanh_model(x, lo, hi, k, x0):
    return lo + (hi - lo) * 0.5 * (1.0 - np.tanh(k * (x - x0) / 2.0))


@dataclass(frozen=True)
class TanhFit:
    """Least-squares fit of a falling tanh transition.

    ``k`` is on the logistic-rate scale: the fitted curve is
    lo + (hi-lo) * logistic(-k (x - x0)).
    """

    lo: float
    hi: float
    k: float
    x0: float
    r_squared: float

    def predict(self, x):
        return _tanh_model(np.asarray(x, dtype=float), self.lo, self.hi, self.k, self.x0)


def fit_tanh(x, y) -> TanhFit:
    """Fit a shifted/scaled falling tanh by least squares."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    amp = max(y.max() - y.min(), 1e-12)
    # crude center: steepest falling segment
    slopes = np.diff(y) / np.diff(x)
    i0 = int(np.argmin(slopes))
    k0 = max(4.0 * abs(slopes[i0]) / amp, 1e-6)
    p0 = (float(y.min()), float(y.max()), k0, float(0.5 * (x[i0] + x[i0 + 1])))
    span = x.max() - x.min()
    bounds = ([-0.5, -0.5, 1e-9, x.min() - span], [1.5, 1.5, 1e9, x.max() + span])
    try:
        popt, _ = curve_fit(_tanh_model, x, y, p0=p0, bounds=bounds, maxfev=20000)
    except RuntimeError:
        popt = p0
    resid = y - _tanh_model(x, *popt)
    ss_res = float(np.sum(resid ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 0.0
    return TanhFit(lo=float(popt[0]), hi=float(popt[1]), k=float(popt[2]),
                   x0=float(popt[3]), r_squared=r2)


def logistic_steepness(x, y, fit_r2_threshold: float = 0.95) -> float:
    """Logistic rate constant describing how sharply a transfer curve falls.

    When a least-squares tanh fit describes the data (R^2 at or above the
    threshold) its rate is returned.  Curves with near-discontinuous jumps
    are not logistic-shaped and a global fit badly under-reports their
    steepness (it averages across the jump), so for those the rate implied
    by the steepest resolved segment is used instead: a logistic of rate k
    and amplitude A has peak slope A*k/4, giving k = 4*max|dy/dx|/A.  That
    estimate is a lower bound limited by the grid spacing.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    fit = fit_tanh(x, y)
    if fit.r_squared >= fit_r2_threshold:
        return fit.k
    amp = max(y.max() - y.min(), 1e-12)
    peak = float(np.max(np.abs(np.diff(y) / np.diff(x))))
    return 4.0 * peak / amp


def rail_bin_mass(counts: np.ndarray) -> float:
    """Fraction of histogram mass in the two outermost bins."""
    total = counts.sum()
    if total == 0:
        return 0.0
    return float(counts[0] + counts[-1]) / float(total)


def interior_mode_count(counts: np.ndarray, rel_threshold: float = 0.1,
                        smooth: int = 3) -> tuple[int, bool]:
    """(number of modes, modal bin is interior) for a binned distribution.

    The histogram is smoothed with a short moving average, then local maxima
    above ``rel_threshold`` of the global peak are counted; plateaus merge
    into one mode.
    """
    c = counts.astype(float)
    if smooth > 1:
        kernel = np.ones(smooth) / smooth
        c = np.convolve(c, kernel, mode="same")
    peak = c.max()
    if peak <= 0:
        return 0, False
    thresh = rel_threshold * peak
    modes = 0
    in_plateau = False
    for i in range(len(c)):
        left = c[i - 1] if i > 0 else -1.0
        right = c[i + 1] if i < len(c) - 1 else -1.0
        is_max = c[i] >= left and c[i] >= right and c[i] > thresh
        if is_max and not in_plateau:
            modes += 1
        in_plateau = is_max and c[i] == right
    modal_bin = int(np.argmax(c))
    interior = 0 < modal_bin < len(c) - 1
    return modes, interior


def sliding_window_freq(values: np.ndarray, window: int) -> np.ndarray:
    """Moving average over a window anchored at each starting index.

    Entry i is the mean of values[i : i + window]; tail entries with an
    incomplete window are dropped.
    """
    if window < 1 or window > len(values):
        raise ValueError("window out of range")
    c = np.concatenate([[0.0], np.cumsum(values, dtype=float)])
    return (c[window:] - c[:-window]) / window


def dwell_lengths(codes: np.ndarray, target: int) -> list[int]:
    """Lengths of consecutive runs of ``target`` in an integer sequence."""
    runs = []
    count = 0
    for c in codes:
        if c == target:
            count += 1
        elif count:
            runs.append(count)
            count = 0
    if count:
        runs.append(count)
    return runs
