"""Monte Carlo model of a repeated single-atom supply cycle.

One cycle: draw a Poisson-distributed sample from the reservoir, reduce it
to 0 or 1 atoms by light-assisted pair collisions, then record a
fluorescence count rate from which the occupancy is inferred by a
threshold. The count-rate histogram is fitted with two Gaussians.

Seeding: trial ``i`` of a run with master seed ``s`` draws from
``numpy.random.default_rng([s, i])``, so every trial is reproducible on
its own and the order of execution does not matter.
"""
from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass

import numpy as np
from scipy import optimize, stats

from .errors import DomainError, FitError

SQRT_2PI = np.sqrt(2 * np.pi)


@dataclass(frozen=True)
class PipelineConfig:
    """Defaults reproduce the measured histogram: one-atom weight ~0.558 and
    Gaussians that cross 4833 counts/s with 50 % delivery probability."""

    poisson_mean_lambda: float = 3.0
    collision_duration: float = 30e-3
    single_atom_retention: float = 0.9
    exposure_time: float = 199e-3
    bg_rate_mean: float = 2000.0
    bg_rate_sigma: float = 694.5
    atom_rate_mean: float = 6500.0
    atom_rate_sigma: float = 1323.6
    threshold: float = 4833.0
    trials: int = 900
    rng_seed: int = 0
    overhead_time: float = 0.0
    # probability that a light-assisted collision ejects only one of the two atoms
    pair_single_loss: float = 0.4
    bin_width: float | None = None

    def __post_init__(self):
        if self.poisson_mean_lambda < 0:
            raise DomainError("poisson_mean_lambda must be >= 0")
        if not 0 <= self.single_atom_retention <= 1:
            raise DomainError("single_atom_retention must lie in [0, 1]")
        if not 0 <= self.pair_single_loss < 1:
            raise DomainError("pair_single_loss must lie in [0, 1)")
        if not (self.bg_rate_sigma > 0 and self.atom_rate_sigma > 0):
            raise DomainError("count-rate sigmas must be positive")
        if not self.atom_rate_mean > self.bg_rate_mean:
            raise DomainError("atom_rate_mean must exceed bg_rate_mean")
        if self.trials < 1:
            raise DomainError("trials must be >= 1")
        if min(self.collision_duration, self.exposure_time, self.overhead_time) < 0:
            raise DomainError("durations must be non-negative")
        if self.bin_width is not None and not self.bin_width > 0:
            raise DomainError("bin_width must be positive")

    @property
    def cycle_time(self):
        return self.collision_duration + self.exposure_time + self.overhead_time


@dataclass(frozen=True)
class TrialOutcome:
    initial_atoms: int
    final_atoms: int
    count_rate: float
    classified_as: int


@dataclass(frozen=True)
class Histogram:
    edges: np.ndarray
    counts: np.ndarray

    @property
    def centers(self):
        return 0.5 * (self.edges[:-1] + self.edges[1:])

    @property
    def bin_width(self):
        return float(self.edges[1] - self.edges[0])

    @property
    def total(self):
        return float(self.counts.sum())

    def scaled(self, factor):
        return Histogram(self.edges, self.counts * factor)


@dataclass(frozen=True)
class HistogramFit:
    weight_0: float
    mean_0: float
    sigma_0: float
    weight_1: float
    mean_1: float
    sigma_1: float
    residual: float = 0.0
    degenerate: bool = False

    @property
    def p_zero(self):
        return self.weight_0

    @property
    def p_one(self):
        return self.weight_1


@dataclass(frozen=True)
class SupplyStats:
    p_zero: float
    p_one: float
    false_positive_rate: float
    delivery_probability: float
    delivery_fidelity: float
    repetition_rate: float | None = None
    false_positive_mass: float = 0.0

    def to_json(self):
        return json.dumps(asdict(self), indent=2, sort_keys=True) + "\n"


def extract_sample(lam, rng, size=None):
    """Poisson-distributed atom number drawn from the reservoir."""
    if lam < 0:
        raise DomainError("lambda must be non-negative")
    return rng.poisson(lam, size=size)


def collisional_blockade(n, retention, rng, pair_single_loss=0.0):
    """Reduce an atom number to 0 or 1 by pairwise light-assisted losses.

    With ``pair_single_loss = 0`` this is a parity projection, n -> n mod 2.
    A surviving single atom is kept with probability ``retention``. Accepts
    a scalar or an integer array.
    """
    n = np.asarray(n)
    if np.any(n < 0):
        raise DomainError("atom number must be non-negative")
    if pair_single_loss == 0:
        left = n % 2
    else:
        left = n.copy()
        busy = left >= 2
        while np.any(busy):
            single = rng.random(left.shape) < pair_single_loss
            left = np.where(busy, left - np.where(single, 1, 2), left)
            busy = left >= 2
    kept = rng.random(left.shape) < retention
    out = np.where((left == 1) & kept, 1, 0)
    return int(out) if out.ndim == 0 else out


def _ends_single(n_max, beta):
    # probability that n atoms end as exactly one, before retention
    f = np.zeros(n_max + 1)
    if n_max >= 1:
        f[1] = 1.0
    for k in range(2, n_max + 1):
        f[k] = beta * f[k - 1] + (1 - beta) * f[k - 2]
    return f


def p_single_analytic(lam, retention, pair_single_loss=0.0):
    """Probability that one cycle ends with exactly one atom.

    For pure parity projection this is retention * (1 - exp(-2 lam)) / 2.
    """
    if lam < 0:
        raise DomainError("lambda must be non-negative")
    if pair_single_loss == 0:
        return retention * -np.expm1(-2 * lam) / 2
    n_max = int(lam + 20 * np.sqrt(lam) + 30)
    pmf = stats.poisson.pmf(np.arange(n_max + 1), lam)
    return float(retention * np.dot(pmf, _ends_single(n_max, pair_single_loss)))


def detect(final_atoms, config, rng, size=None):
    """Fluorescence count rate [counts/s] for an empty or singly occupied trap."""
    if final_atoms not in (0, 1):
        raise DomainError("final_atoms must be 0 or 1")
    if final_atoms:
        return rng.normal(config.atom_rate_mean, config.atom_rate_sigma, size)
    return rng.normal(config.bg_rate_mean, config.bg_rate_sigma, size)


def build_histogram(rates, bin_width=None):
    """Fixed-width histogram; default width is (max - min) / 60.

    Bin edges sit on integer multiples of the bin width.
    """
    x = np.asarray(rates, dtype=float)
    if x.size == 0:
        raise DomainError("cannot histogram an empty sample")
    if bin_width is None:
        span = float(x.max() - x.min())
        bin_width = span / 60 if span > 0 else 1.0
    if not bin_width > 0:
        raise DomainError("bin_width must be positive")
    lo = np.floor(x.min() / bin_width)
    n_bins = int(np.floor(x.max() / bin_width) - lo) + 1
    edges = (lo + np.arange(n_bins + 1)) * bin_width
    idx = np.clip(np.floor(x / bin_width).astype(np.int64) - int(lo), 0, n_bins - 1)
    counts = np.bincount(idx, minlength=n_bins).astype(float)
    return Histogram(edges, counts)


def _smooth(y, width=3):
    kernel = np.ones(width) / width
    return np.convolve(y, kernel, mode="same")


def _find_modes(hist, min_height=0.05):
    """Indices (left, right, valley) of two separated modes, or None.

    The secondary peak must reach ``min_height`` of the primary one and the
    valley between them must sit at least 20 % below both.
    """
    y = _smooth(hist.counts) if hist.counts.size >= 5 else hist.counts
    n = y.size
    peaks = [i for i in range(n)
             if y[i] > 0
             and (i == 0 or y[i] >= y[i - 1])
             and (i == n - 1 or y[i] > y[i + 1])]
    peaks.sort(key=lambda i: (-y[i], i))
    min_sep = max(3, n // 10)
    for a_rank, a in enumerate(peaks):
        for b in peaks[a_rank + 1:]:
            if abs(a - b) < min_sep or y[b] < min_height * y[a]:
                continue
            left, right = sorted((a, b))
            valley = left + int(np.argmin(y[left:right + 1]))
            if y[valley] <= 0.8 * min(y[left], y[right]):
                return left, right, valley
        break  # only pair with the highest peak
    return None


def _side_moments(hist, split):
    c, y = hist.centers, hist.counts
    out = []
    for sl in (slice(0, split), slice(split, None)):
        w = y[sl]
        mass = w.sum()
        if mass <= 0:
            return None
        mu = np.dot(w, c[sl]) / mass
        sd = np.sqrt(max(np.dot(w, (c[sl] - mu) ** 2) / mass, hist.bin_width**2 / 4))
        out.append((mass, mu, sd))
    return out


def _mixture(c, bw, a0, m0, s0, a1, m1, s1):
    g0 = np.exp(-0.5 * ((c - m0) / s0) ** 2) / (s0 * SQRT_2PI)
    g1 = np.exp(-0.5 * ((c - m1) / s1) ** 2) / (s1 * SQRT_2PI)
    return bw * (a0 * g0 + a1 * g1)


def fit_two_gaussians(hist, max_nfev=5000):
    """Least-squares fit of a two-Gaussian mixture to binned counts.

    The leftmost component is the no-atom class. Histograms without two
    separated modes are still fitted but flagged ``degenerate``.
    """
    if hist.total <= 0:
        raise DomainError("histogram is empty")
    modes = _find_modes(hist)
    degenerate = modes is None
    if degenerate:
        cum = np.cumsum(hist.counts)
        split = int(np.searchsorted(cum, cum[-1] / 2)) + 1
    else:
        split = modes[2] + 1
    split = min(max(split, 1), hist.counts.size - 1) if hist.counts.size > 1 else 1
    moments = _side_moments(hist, split) if hist.counts.size > 1 else None
    if moments is None:
        raise FitError("histogram does not contain two populated regions", residual=None)
    (a0, m0, s0), (a1, m1, s1) = moments
    if not degenerate:
        m0, m1 = hist.centers[modes[0]], hist.centers[modes[1]]

    c, y, bw = hist.centers, hist.counts, hist.bin_width
    scale = hist.total
    p0 = np.array([a0 / scale, m0, s0, a1 / scale, m1, s1])

    def resid(p):
        return (_mixture(c, bw, p[0] * scale, p[1], p[2], p[3] * scale, p[4], p[5]) - y) / scale

    lower = [0, c[0] - 10 * bw, bw / 10, 0, c[0] - 10 * bw, bw / 10]
    upper = [np.inf, c[-1] + 10 * bw, np.inf, np.inf, c[-1] + 10 * bw, np.inf]
    p0 = np.clip(p0, lower, [u if np.isfinite(u) else np.inf for u in upper])
    sol = optimize.least_squares(resid, p0, bounds=(lower, upper), x_scale="jac",
                                 xtol=1e-12, ftol=1e-12, gtol=1e-12, max_nfev=max_nfev)
    residual = float(np.sqrt(np.mean((sol.fun * scale) ** 2)))
    if sol.status <= 0 or not np.all(np.isfinite(sol.x)):
        raise FitError(f"two-Gaussian fit did not converge: {sol.message}", residual=residual)
    a0, m0, s0, a1, m1, s1 = sol.x
    if m0 > m1:
        a0, m0, s0, a1, m1, s1 = a1, m1, s1, a0, m0, s0
    total = a0 + a1
    if total <= 0:
        raise FitError("fitted amplitudes vanish", residual=residual)
    return HistogramFit(
        weight_0=float(a0 / total), mean_0=float(m0), sigma_0=float(abs(s0)),
        weight_1=float(a1 / total), mean_1=float(m1), sigma_1=float(abs(s1)),
        residual=residual, degenerate=degenerate,
    )


def classify_and_score(fit, threshold, repetition_rate=None):
    """Delivery statistics for calling every event above ``threshold`` a single atom.

    ``false_positive_mass`` is the joint probability of an empty trap
    reading above threshold; ``false_positive_rate`` is that mass as a
    fraction of all above-threshold events, and the delivery fidelity is
    its complement.
    """
    if not fit.mean_0 < threshold < fit.mean_1:
        raise DomainError(
            f"threshold {threshold:g} must lie between the fitted means "
            f"({fit.mean_0:g}, {fit.mean_1:g})"
        )
    fp = fit.weight_0 * stats.norm.sf((threshold - fit.mean_0) / fit.sigma_0)
    tp = fit.weight_1 * stats.norm.sf((threshold - fit.mean_1) / fit.sigma_1)
    delivered = fp + tp
    rate = fp / delivered if delivered > 0 else 0.0
    return SupplyStats(
        p_zero=fit.weight_0,
        p_one=fit.weight_1,
        false_positive_rate=float(rate),
        delivery_probability=float(delivered),
        delivery_fidelity=float(1.0 - rate),
        repetition_rate=repetition_rate,
        false_positive_mass=float(fp),
    )


def run_trial(config, index):
    rng = np.random.default_rng([config.rng_seed, index])
    n0 = int(extract_sample(config.poisson_mean_lambda, rng))
    n1 = int(collisional_blockade(n0, config.single_atom_retention, rng,
                                  config.pair_single_loss))
    rate = float(detect(n1, config, rng))
    return TrialOutcome(n0, n1, rate, int(rate > config.threshold))


def run_pipeline(config):
    """Run ``config.trials`` independent supply cycles and score them.

    Returns
    -------
    outcomes : list of TrialOutcome
    fit : HistogramFit
    stats : SupplyStats
    """
    outcomes = [run_trial(config, i) for i in range(config.trials)]
    hist = build_histogram([o.count_rate for o in outcomes], config.bin_width)
    fit = fit_two_gaussians(hist)
    summary = classify_and_score(fit, config.threshold, 1.0 / config.cycle_time)
    return outcomes, fit, summary


def write_trial_log(outcomes, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["trial", "initial_atoms", "final_atoms", "count_rate", "classified"])
        for i, o in enumerate(outcomes):
            w.writerow([i, o.initial_atoms, o.final_atoms, f"{o.count_rate:.9e}", o.classified_as])


def write_histogram(hist, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["bin_center", "count"])
        for c, n in zip(hist.centers, hist.counts):
            w.writerow([f"{c:.9e}", int(n)])
