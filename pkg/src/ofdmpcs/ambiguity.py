"""Ambiguity function of OFDM symbols carrying random data.

Exact single-symbol and symbol-train values, Monte-Carlo averages over the
data distribution, and closed-form moments (mean of the self term, variances
of the self and cross terms).

The delay-Doppler response of one OFDM symbol splits into a "self" part
(subcarrier paired with itself, carrying only symbol energies ``A**2``) and a
"cross" part (distinct subcarrier pairs).  With unit-power data the self-term
variance is ``T_diff**2 * sinc(nu*T_diff)**2 * L * (E[A**4] - 1)``, which is
why the fourth moment of the constellation drives sidelobe fluctuation.

All ``sinc`` factors follow the integral identity

    integral_{Tmin}^{Tmax} exp(j*2*pi*f*t) dt
        = T_diff * sinc(f*T_diff) * exp(j*2*pi*f*T_avg)

with ``sinc(x) = sin(pi*x)/(pi*x)`` (numpy's convention).  An alternate
variance convention that puts ``2*pi`` inside the sinc argument is available
behind ``sinc_2pi=True`` for comparison; it does not follow from the identity
above and disagrees with Monte-Carlo, so it is off by default.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .constellation import Constellation, Distribution, moment
from .seeds import trial_seed

CONFIG_TOL = 1e-12


@dataclass(frozen=True)
class OFDMConfig:
    """OFDM signal parameters: L subcarriers, N symbols, unit time-bandwidth.

    Subcarrier spacing and symbol duration must satisfy
    ``spacing * duration == 1`` (rectangular pulses, orthogonal subcarriers).
    """

    n_subcarriers: int
    subcarrier_spacing: float = 1.0
    symbol_duration: float = 1.0
    n_symbols: int = 1

    def __post_init__(self):
        if self.n_subcarriers < 1:
            raise ValueError("need at least one subcarrier")
        if self.n_symbols < 1:
            raise ValueError("need at least one symbol")
        if self.subcarrier_spacing <= 0 or self.symbol_duration <= 0:
            raise ValueError("spacing and duration must be positive")
        prod = self.subcarrier_spacing * self.symbol_duration
        if abs(prod - 1.0) > CONFIG_TOL:
            raise ValueError(f"spacing*duration = {prod!r}; subcarriers would "
                             "not be orthogonal")


@dataclass(frozen=True)
class SymbolMatrix:
    """An (N, L) draw of constellation symbols plus its provenance."""

    values: np.ndarray
    seed: int
    constellation_id: str
    distribution_id: str


@dataclass(frozen=True)
class AFGrid:
    """Sampled delay-Doppler surface.

    Axes are normalized: delays in units of the symbol duration, Dopplers in
    units of the subcarrier spacing.  ``values[i, j]`` belongs to
    ``(tau_axis[i], nu_axis[j])``.  ``units`` is ``"linear"`` or ``"db"``.
    """

    tau_axis: np.ndarray
    nu_axis: np.ndarray
    values: np.ndarray
    units: str

    def __post_init__(self):
        if self.values.shape != (len(self.tau_axis), len(self.nu_axis)):
            raise ValueError("values shape does not match the axes")
        if self.units not in ("linear", "db"):
            raise ValueError("units must be 'linear' or 'db'")

    def to_csv(self, path) -> None:
        """Write ``tau,nu,value_db`` rows, 9 significant digits, LF endings."""
        if self.units != "db":
            raise ValueError("CSV export is defined for dB grids")
        with open(path, "w", newline="") as fh:
            fh.write("tau,nu,value_db\n")
            for i, t in enumerate(self.tau_axis):
                for j, v in enumerate(self.nu_axis):
                    fh.write(f"{t:.9g},{v:.9g},{self.values[i, j]:.9g}\n")


# ---------------------------------------------------------------------------
# sampling


def _choice_probs(d: Distribution) -> np.ndarray:
    # tolerate the -1e-12 negative slack allowed by validation
    p = np.maximum(np.asarray(d.per_point, dtype=float), 0.0)
    return p / p.sum()


def sample_symbols(c: Constellation, d: Distribution, cfg: OFDMConfig,
                   seed: int) -> SymbolMatrix:
    """Draw an (N, L) i.i.d. symbol matrix; identical seed, identical draw."""
    rng = np.random.default_rng(seed)
    idx = rng.choice(c.size, size=(cfg.n_symbols, cfg.n_subcarriers),
                     p=_choice_probs(d))
    return SymbolMatrix(values=c.points[idx], seed=seed,
                        constellation_id=c.digest(),
                        distribution_id=d.digest())


def _draw_flat(c, d, cfg, n_mc, seed) -> np.ndarray:
    """(n_mc, N*L) symbol draws; trial m uses seed XOR m."""
    probs = _choice_probs(d)
    points = c.points
    nl = cfg.n_symbols * cfg.n_subcarriers
    out = np.empty((n_mc, nl), dtype=complex)
    for m in range(n_mc):
        rng = np.random.default_rng(trial_seed(seed, m))
        out[m] = points[rng.choice(c.size, size=nl, p=probs)]
    return out


# ---------------------------------------------------------------------------
# exact values


def _window(tau: float, delta: int, t_p: float):
    """Overlap window of symbol n1 against symbol n2 = n1 + delta at lag tau.

    Returns (t_diff, t_avg); t_diff <= 0 means no overlap.
    """
    shift = tau + delta * t_p
    t_min = max(0.0, shift)
    t_max = min(t_p, t_p + shift)
    return t_max - t_min, 0.5 * (t_max + t_min)


def _kernel(cfg: OFDMConfig, tau: float, nu: float) -> np.ndarray:
    """(N*L, N*L) matrix K with AF(tau, nu) = sum_ij x_i conj(x_j) K_ij.

    Index i flattens (symbol n1, subcarrier l1) row-major; j likewise for
    (n2, l2).  Each (n1, n2) block integrates the window overlap of the two
    pulses and carries the subcarrier mixing phase.
    """
    L, N = cfg.n_subcarriers, cfg.n_symbols
    df, t_p = cfg.subcarrier_spacing, cfg.symbol_duration
    l = np.arange(L)
    ldiff = l[:, None] - l[None, :]            # l1 - l2
    K = np.zeros((N * L, N * L), dtype=complex)
    for n1 in range(N):
        for n2 in range(N):
            delta = n2 - n1
            t_diff, t_avg = _window(tau, delta, t_p)
            if t_diff <= 0.0:
                continue
            f = ldiff * df - nu
            phase = f * t_avg + l[None, :] * df * (delta * t_p + tau) \
                - n1 * nu * t_p
            block = t_diff * np.sinc(f * t_diff) \
                * np.exp(2j * np.pi * phase)
            K[n1 * L:(n1 + 1) * L, n2 * L:(n2 + 1) * L] = block
    return K


def _check_point(tau, nu):
    if not (np.isfinite(tau) and np.isfinite(nu)):
        raise ValueError("tau and nu must be finite")


def af_sequence(m: SymbolMatrix | np.ndarray, cfg: OFDMConfig,
                tau: float, nu: float) -> complex:
    """Exact AF of an N-symbol train at (tau, nu); zero for |tau| >= N*T_p."""
    _check_point(tau, nu)
    values = m.values if isinstance(m, SymbolMatrix) else np.asarray(m)
    values = values.reshape(cfg.n_symbols, cfg.n_subcarriers)
    span = cfg.n_symbols * cfg.symbol_duration
    if abs(tau) >= span:
        return 0.0 + 0.0j
    x = values.ravel()
    K = _kernel(cfg, tau, nu)
    return complex(x @ (K @ np.conj(x)))


def af_single(row: np.ndarray, cfg: OFDMConfig, tau: float, nu: float) -> complex:
    """Exact AF of a single OFDM symbol; zero outside |tau| < T_p."""
    row = np.asarray(row).ravel()
    if row.size != cfg.n_subcarriers:
        raise ValueError("row length must equal the subcarrier count")
    one = OFDMConfig(cfg.n_subcarriers, cfg.subcarrier_spacing,
                     cfg.symbol_duration, 1)
    return af_sequence(row, one, tau, nu)


def af_components(m: SymbolMatrix | np.ndarray, cfg: OFDMConfig,
                  tau: float, nu: float) -> tuple[complex, complex]:
    """Split the AF into (self term, cross term).

    The self term keeps only diagonal pairs (same symbol index, same
    subcarrier), i.e. the part driven by symbol energies alone; the cross
    term is the remainder.  Their sum equals :func:`af_sequence`.
    """
    _check_point(tau, nu)
    values = m.values if isinstance(m, SymbolMatrix) else np.asarray(m)
    values = values.reshape(cfg.n_symbols, cfg.n_subcarriers)
    span = cfg.n_symbols * cfg.symbol_duration
    if abs(tau) >= span:
        return 0.0 + 0.0j, 0.0 + 0.0j
    x = values.ravel()
    K = _kernel(cfg, tau, nu)
    total = complex(x @ (K @ np.conj(x)))
    self_term = complex(np.dot(np.abs(x) ** 2, np.diag(K)))
    return self_term, total - self_term


# ---------------------------------------------------------------------------
# Monte-Carlo averages


def af_samples(c: Constellation, d: Distribution, cfg: OFDMConfig,
               tau: float, nu: float, n_mc: int, seed: int) -> np.ndarray:
    """AF realizations at one (tau, nu) over n_mc independent data draws."""
    if n_mc < 1:
        raise ValueError("n_mc must be >= 1")
    _check_point(tau, nu)
    X = _draw_flat(c, d, cfg, n_mc, seed)
    K = _kernel(cfg, tau, nu)
    return np.sum(X * (np.conj(X) @ K.T), axis=1)


def average_af(c: Constellation, d: Distribution, cfg: OFDMConfig,
               tau_axis, nu_axis, n_mc: int, seed: int,
               normalize: bool = True) -> AFGrid:
    """Mean squared-magnitude AF over the data distribution, in dB.

    Axes are normalized (delay / T_p, Doppler / spacing).  One set of n_mc
    symbol draws is shared across the whole grid; trial m is seeded with
    ``seed XOR m``.  With ``normalize`` the surface peak is shifted to 0 dB.
    """
    tau_axis = np.asarray(tau_axis, dtype=float)
    nu_axis = np.asarray(nu_axis, dtype=float)
    if tau_axis.size == 0 or nu_axis.size == 0:
        raise ValueError("grid axes must be nonempty")
    if n_mc < 1:
        raise ValueError("n_mc must be >= 1")
    X = _draw_flat(c, d, cfg, n_mc, seed)
    Xc = np.conj(X)
    span = cfg.n_symbols * cfg.symbol_duration
    mean_pow = np.zeros((tau_axis.size, nu_axis.size))
    for i, tn in enumerate(tau_axis):
        tau = tn * cfg.symbol_duration
        if abs(tau) >= span:
            continue
        for j, vn in enumerate(nu_axis):
            nu = vn * cfg.subcarrier_spacing
            K = _kernel(cfg, tau, nu)
            lam = np.sum(X * (Xc @ K.T), axis=1)
            mean_pow[i, j] = float(np.mean(np.abs(lam) ** 2))
    if normalize:
        peak = mean_pow.max()
        if peak <= 0:
            raise ValueError("grid contains no energy; cannot normalize")
        mean_pow = mean_pow / peak
    with np.errstate(divide="ignore"):
        db = 10.0 * np.log10(mean_pow)
    return AFGrid(tau_axis=tau_axis, nu_axis=nu_axis, values=db, units="db")


# ---------------------------------------------------------------------------
# closed-form moments


@dataclass(frozen=True)
class AFMoments:
    """Closed-form AF statistics at one (tau, nu).

    ``mean_self``: expectation of the AF (only the self term survives).
    ``var_self`` / ``var_cross``: single-symbol variances of the two parts.
    ``var_self_train`` / ``var_cross_train``: N-symbol-train counterparts
    (self variance scales exactly by N; the cross part gains inter-symbol
    overlap terms).
    """

    mean_self: complex
    var_self: float
    var_cross: float
    var_self_train: float
    var_cross_train: float


def _pair_sinc_sum(L: int, df: float, nu: float, t_diff: float,
                   include_equal: bool, sinc_2pi: bool) -> float:
    """sum over subcarrier pairs of sinc(((l1-l2)*df - nu) * t_diff)**2.

    Uses the difference distribution: there are L - |d| ordered pairs at each
    l1 - l2 = d.  ``include_equal`` keeps the d = 0 diagonal.
    """
    if t_diff <= 0.0:
        return 0.0
    d = np.arange(-(L - 1), L)
    counts = L - np.abs(d)
    if not include_equal:
        counts = np.where(d == 0, 0, counts)
    arg = (d * df - nu) * t_diff
    if sinc_2pi:
        arg = 2.0 * np.pi * arg
    return float(np.sum(counts * np.sinc(arg) ** 2))


def analytic_moments(c: Constellation, d: Distribution, cfg: OFDMConfig,
                     tau: float, nu: float,
                     sinc_2pi: bool = False) -> AFMoments:
    """Exact mean and variances of the AF at (tau, nu).

    The distribution enters only through the fourth moment (self-term
    variance); the cross-term variance is distribution-free.  ``sinc_2pi``
    selects the alternate variance convention (see module docstring).
    """
    _check_point(tau, nu)
    L, N = cfg.n_subcarriers, cfg.n_symbols
    df, t_p = cfg.subcarrier_spacing, cfg.symbol_duration
    m4 = moment(c, d, 4)

    t_diff, t_avg = _window(tau, 0, t_p)
    if t_diff <= 0.0:
        mean_self = 0.0 + 0.0j
        var_self = 0.0
        var_cross = 0.0
    else:
        l = np.arange(L)
        comb = np.sum(np.exp(2j * np.pi * l * df * tau))
        train = np.sum(np.exp(-2j * np.pi * np.arange(N) * nu * t_p))
        mean_self = (t_diff * np.sinc(nu * t_diff)
                     * np.exp(-2j * np.pi * nu * t_avg) * comb * train)
        var_arg = 2.0 * np.pi * nu * t_diff if sinc_2pi else nu * t_diff
        var_self = t_diff ** 2 * np.sinc(var_arg) ** 2 * L * (m4 - 1.0)
        var_cross = t_diff ** 2 * _pair_sinc_sum(
            L, df, nu, t_diff, include_equal=False, sinc_2pi=sinc_2pi)

    var_cross_train = N * var_cross
    for delta in range(-(N - 1), N):
        if delta == 0:
            continue
        td, _ = _window(tau, delta, t_p)
        if td <= 0.0:
            continue
        # (N - |delta|) symbol pairs share this overlap geometry
        var_cross_train += (N - abs(delta)) * td ** 2 * _pair_sinc_sum(
            L, df, nu, td, include_equal=True, sinc_2pi=sinc_2pi)

    return AFMoments(mean_self=complex(mean_self),
                     var_self=float(var_self),
                     var_cross=float(var_cross),
                     var_self_train=float(N * var_self),
                     var_cross_train=float(var_cross_train))
