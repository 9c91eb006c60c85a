"""Weak-target detection next to a strong self-interferer.

Single-symbol, zero-Doppler sensing chain: one OFDM symbol is drawn from the
configured constellation/distribution, the receiver sees the self-interference
echo (delay cell 0), the target echo (cell 8 by default), and white noise, and
forms the matched-filter range profile

    z_k = sum_l Y_l conj(X_l) exp(+2j pi l k / L),   profile = |z|^2.

Power conventions (both relative to the unit-variance per-subcarrier noise):

* target SNR is measured *after* the matched filter, per range cell — the
  per-cell noise floor is L, the expected peak power |a|^2 L^2, so the echo
  amplitude is sqrt(snr / L);
* SI-to-noise ratio is measured *before* the matched filter, per subcarrier
  (it models raw leakage at the receiver input), so the SI amplitude is
  sqrt(si) directly.  After matched filtering the SI peak sits si*L above
  the per-cell floor, and — for non-constant-modulus constellations — leaks
  a pedestal of si * L * (E[A^4] - 1) into every other cell, which is what
  degrades weak-target detection for shaped/unshaped QAM.

Detection uses a smallest-of CFAR: each cell is compared against
alpha * min(leading-window mean, lagging-window mean), guard cells skipped,
edge cells falling back to whichever window is available.  alpha is
calibrated empirically on noise-only profiles; the ratio statistic is
scale-free, so the calibration transfers across noise levels.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .ambiguity import OFDMConfig
from .constellation import Constellation, Distribution
from .seeds import derive_seed, trial_seed

WILSON_Z95 = 1.959963984540054
MIN_CAL_FACTOR = 10.0          # required noise-only cells: 10 / P_fa
DEFAULT_CAL_FACTOR = 100.0     # default calibration size: 100 / P_fa
_CAL_CHUNK_ROWS = 4096


@dataclass(frozen=True)
class DetectionScenario:
    """One sensing experiment: constellation, geometry, CFAR window."""

    constellation: Constellation
    distribution: Distribution
    cfg: OFDMConfig
    snr_db: float = 10.0
    target_cell: int = 8
    si_cell: int = 0
    si_to_noise_db: float = 10.0
    p_fa: float = 1e-4
    n_trials: int = 5000
    ref_cells: int = 16
    guard_cells: int = 2

    def __post_init__(self):
        length = self.cfg.n_subcarriers
        if self.target_cell == self.si_cell:
            raise ValueError("target and self-interference cells coincide")
        if not 0 <= self.target_cell < length or not 0 <= self.si_cell < length:
            raise ValueError("range cells outside the profile")
        if not 0.0 < self.p_fa < 1.0:
            raise ValueError("p_fa must lie in (0, 1)")
        if self.ref_cells < 1 or self.guard_cells < 0:
            raise ValueError("need >= 1 reference cell and >= 0 guard cells")
        if 2 * (self.ref_cells + self.guard_cells) > length:
            raise ValueError("CFAR window larger than the range profile: "
                             "every cell needs one complete reference side")
        if self.n_trials < 1:
            raise ValueError("n_trials must be positive")


@dataclass(frozen=True)
class RangeProfile:
    """Per-cell matched-filter power with its generating seed."""

    values: np.ndarray
    seed: int

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if not np.all(np.isfinite(v)) or np.any(v < 0):
            raise ValueError("profile powers must be finite and nonnegative")
        object.__setattr__(self, "values", v)


def _choice_probs(d: Distribution) -> np.ndarray:
    p = np.clip(np.asarray(d.per_point, dtype=float), 0.0, None)
    return p / p.sum()


def _simulate(sc: DetectionScenario, rng: np.random.Generator) -> np.ndarray:
    length = sc.cfg.n_subcarriers
    probs = _choice_probs(sc.distribution)
    x = sc.constellation.points[rng.choice(sc.constellation.size, size=length,
                                           p=probs)]
    l_idx = np.arange(length)
    y = np.zeros(length, dtype=complex)
    si_lin = 10.0 ** (sc.si_to_noise_db / 10.0)
    if si_lin > 0.0:
        phase = np.exp(2j * np.pi * rng.uniform())
        y += np.sqrt(si_lin) * phase * x * np.exp(-2j * np.pi * l_idx * sc.si_cell / length)
    snr_lin = 10.0 ** (sc.snr_db / 10.0)
    if snr_lin > 0.0:
        phase = np.exp(2j * np.pi * rng.uniform())
        y += np.sqrt(snr_lin / length) * phase * x * np.exp(
            -2j * np.pi * l_idx * sc.target_cell / length)
    y += rng.normal(scale=np.sqrt(0.5), size=length) \
        + 1j * rng.normal(scale=np.sqrt(0.5), size=length)
    z = length * np.fft.ifft(y * np.conj(x))
    return np.abs(z) ** 2


def simulate_profile(sc: DetectionScenario, seed: int = 0) -> RangeProfile:
    """One Monte-Carlo draw of the matched-filter range profile."""
    rng = np.random.default_rng(seed)
    return RangeProfile(values=_simulate(sc, rng), seed=seed)


# ---------------------------------------------------------------------------
# SO-CFAR


def _side_means(profiles: np.ndarray, ref: int, guard: int) -> np.ndarray:
    """min(leading mean, lagging mean) per cell; rows are profiles.

    Only complete reference windows count: a window that sticks out of the
    profile picks up NaN padding, its plain mean goes NaN, and ``fmin``
    falls back to the other (complete) side.  Partial windows would let a
    lone edge cell act as a one-sample noise estimate and blow up the
    false-alarm tail.
    """
    rows, length = profiles.shape
    pad = ref + guard
    arr = np.concatenate([np.full((rows, pad), np.nan), profiles,
                          np.full((rows, pad), np.nan)], axis=1)
    win = sliding_window_view(arr, ref, axis=1)
    lead = np.mean(win[:, :length, :], axis=2)
    lagg = np.mean(win[:, ref + 2 * guard + 1:ref + 2 * guard + 1 + length, :],
                   axis=2)
    return np.fmin(lead, lagg)


def so_cfar_statistic(profile, ref_cells: int = 16,
                      guard_cells: int = 2) -> np.ndarray:
    """Smallest-of reference statistic for each cell of one profile."""
    p = np.atleast_2d(np.asarray(profile, dtype=float))
    if 2 * (ref_cells + guard_cells) > p.shape[1]:
        raise ValueError("CFAR window larger than the range profile: "
                         "every cell needs one complete reference side")
    return _side_means(p, ref_cells, guard_cells)[0]


def so_cfar_detect(profile, alpha: float, ref_cells: int = 16,
                   guard_cells: int = 2) -> np.ndarray:
    """Boolean detections: cell power above alpha * smallest-of statistic."""
    p = np.asarray(profile, dtype=float)
    stat = so_cfar_statistic(p, ref_cells, guard_cells)
    return p > alpha * stat


def _noise_only(sc: DetectionScenario) -> DetectionScenario:
    return replace(sc, snr_db=-np.inf, si_to_noise_db=-np.inf)


def _batch_ratios(sc: DetectionScenario, n_rows: int,
                  rng: np.random.Generator) -> np.ndarray:
    """Noise-only profile/statistic ratios, n_rows profiles at a time."""
    length = sc.cfg.n_subcarriers
    probs = _choice_probs(sc.distribution)
    out = []
    for start in range(0, n_rows, _CAL_CHUNK_ROWS):
        rows = min(_CAL_CHUNK_ROWS, n_rows - start)
        idx = rng.choice(sc.constellation.size, size=(rows, length), p=probs)
        x = sc.constellation.points[idx]
        noise = rng.normal(scale=np.sqrt(0.5), size=(rows, length)) \
            + 1j * rng.normal(scale=np.sqrt(0.5), size=(rows, length))
        z = length * np.fft.ifft(noise * np.conj(x), axis=1)
        power = np.abs(z) ** 2
        stat = _side_means(power, sc.ref_cells, sc.guard_cells)
        out.append((power / stat).ravel())
    return np.concatenate(out)


def calibrate_so_cfar(sc: DetectionScenario, n_cal: int | None = None,
                      seed: int = 0) -> float:
    """Empirical threshold factor alpha hitting the configured P_fa.

    ``n_cal`` counts noise-only cell evaluations (default 100/P_fa, at least
    10/P_fa required); alpha is the (1 - P_fa) quantile of the cell-power /
    smallest-of-statistic ratio, which is distribution- and noise-level-free
    up to the weak cell coupling induced by the random symbol power.
    """
    if n_cal is None:
        n_cal = int(np.ceil(DEFAULT_CAL_FACTOR / sc.p_fa))
    if n_cal < MIN_CAL_FACTOR / sc.p_fa:
        raise ValueError(
            f"insufficient calibration samples: need >= {MIN_CAL_FACTOR / sc.p_fa:.0f} "
            f"noise-only cells for P_fa={sc.p_fa}, got {n_cal}")
    length = sc.cfg.n_subcarriers
    n_rows = int(np.ceil(n_cal / length))
    rng = np.random.default_rng(derive_seed(seed, "cfar-calibration"))
    ratios = _batch_ratios(_noise_only(sc), n_rows, rng)
    return float(np.quantile(ratios, 1.0 - sc.p_fa))


def empirical_false_alarm_rate(sc: DetectionScenario, alpha: float,
                               n_cells: int, seed: int = 0) -> float:
    """Fresh noise-only run: fraction of cells crossing alpha * statistic."""
    length = sc.cfg.n_subcarriers
    n_rows = int(np.ceil(n_cells / length))
    rng = np.random.default_rng(derive_seed(seed, "cfar-evaluation"))
    ratios = _batch_ratios(_noise_only(sc), n_rows, rng)
    return float(np.mean(ratios > alpha))


# ---------------------------------------------------------------------------
# detection-probability curves


def wilson_interval(hits: int, n: int, z: float = WILSON_Z95):
    """Wilson score interval for a binomial proportion."""
    p_hat = hits / n
    denom = 1.0 + z * z / n
    center = (p_hat + z * z / (2 * n)) / denom
    half = z * np.sqrt(p_hat * (1.0 - p_hat) / n + z * z / (4 * n * n)) / denom
    # the score bounds are exactly 0/1 at the extremes; keep them free of
    # rounding residue so the interval always brackets hits/n
    lo = 0.0 if hits == 0 else max(0.0, center - half)
    hi = 1.0 if hits == n else min(1.0, center + half)
    return lo, hi


@dataclass(frozen=True)
class PdCurve:
    snr_db: np.ndarray
    pd: np.ndarray
    ci_lo: np.ndarray
    ci_hi: np.ndarray
    alpha: float
    n_trials: int

    def to_csv(self, path) -> None:
        lines = ["snr_db,pd,ci_lo,ci_hi"]
        for s, p, lo, hi in zip(self.snr_db, self.pd, self.ci_lo, self.ci_hi):
            lines.append(f"{s:.9g},{p:.9g},{lo:.9g},{hi:.9g}")
        with open(path, "w", newline="") as fh:
            fh.write("\n".join(lines) + "\n")


def detection_probability(sc: DetectionScenario, alpha: float,
                          seed: int = 0) -> tuple[float, float, float]:
    """P_d with Wilson bounds at the scenario's own SNR, n_trials trials."""
    hits = 0
    for t in range(sc.n_trials):
        rng = np.random.default_rng(trial_seed(seed, t))
        prof = _simulate(sc, rng)
        det = so_cfar_detect(prof, alpha, sc.ref_cells, sc.guard_cells)
        hits += bool(det[sc.target_cell])
    lo, hi = wilson_interval(hits, sc.n_trials)
    return hits / sc.n_trials, lo, hi


def pd_curve(sc: DetectionScenario, snr_db_values, seed: int = 0,
             alpha: float | None = None) -> PdCurve:
    """Detection probability versus sensing SNR.

    Calibrates alpha from the same master seed when not supplied; each curve
    point runs ``sc.n_trials`` independent trials under per-trial seeds
    derived from (seed, point index, trial index), so the curve is bit-exact
    reproducible and trivially parallelizable.
    """
    snrs = np.asarray(snr_db_values, dtype=float)
    if snrs.size == 0:
        raise ValueError("need at least one SNR point")
    if alpha is None:
        alpha = calibrate_so_cfar(sc, seed=seed)
    pd = np.empty(snrs.size)
    lo = np.empty(snrs.size)
    hi = np.empty(snrs.size)
    for i, snr in enumerate(snrs):
        point_seed = derive_seed(seed, f"pd-point-{i}")
        p, l, h = detection_probability(replace(sc, snr_db=float(snr)),
                                        alpha, seed=point_seed)
        pd[i], lo[i], hi[i] = p, l, h
    return PdCurve(snr_db=snrs, pd=pd, ci_lo=lo, ci_hi=hi,
                   alpha=float(alpha), n_trials=sc.n_trials)
