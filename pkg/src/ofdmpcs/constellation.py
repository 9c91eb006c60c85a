"""Constellation geometry and input distributions.

A constellation here is a finite set of unit-mean-power complex points
grouped into concentric rings of equal amplitude.  Ring structure is what
matters downstream: the fourth moment of the amplitude distribution controls
radar sidelobe variance, and shaping operates on per-ring masses.

Conventions:

* ``ring_mass[w]`` is the aggregate probability of ring ``w`` (all of its
  points together), not the per-point value.
* every point of ring ``w`` has amplitude exactly ``ring_amps[w]`` (the
  stored per-point amplitude array is built by indexing, so the equality is
  bitwise).
* distributions are "ring-uniform": points within one ring share the same
  probability.  ``validate`` reports violations instead of raising.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field

import numpy as np

CONSTRUCTION_TOL = 1e-12
VALIDATION_TOL = 1e-9


# ---------------------------------------------------------------------------
# constellation


@dataclass(frozen=True)
class Constellation:
    """Unit-power point set grouped into rings of equal amplitude.

    Do not call the constructor directly; use :func:`make_constellation` or
    :meth:`from_rings`, which establish the invariants (unit mean power under
    the uniform distribution, zero mean per ring, strictly increasing ring
    amplitudes).
    """

    family: str
    order: int
    ring_amps: np.ndarray      # (W,) strictly increasing, >= 0
    ring_counts: np.ndarray    # (W,) positive ints summing to order
    ring_index: np.ndarray     # (Q,) ring of each point
    phases: np.ndarray         # (Q,) point phases in radians

    def __post_init__(self):
        amps = np.asarray(self.ring_amps, dtype=float)
        counts = np.asarray(self.ring_counts, dtype=int)
        if amps.ndim != 1 or amps.size == 0:
            raise ValueError("ring_amps must be a nonempty 1-D array")
        if np.any(np.diff(amps) <= 0):
            raise ValueError("ring amplitudes must be strictly increasing")
        if np.any(amps < 0):
            raise ValueError("ring amplitudes must be nonnegative")
        if counts.shape != amps.shape or np.any(counts <= 0):
            raise ValueError("ring_counts must be positive and match ring_amps")
        if int(counts.sum()) != self.order:
            raise ValueError("ring counts must sum to the constellation order")
        # zero mean needs >= 2 evenly spread phases per ring (or amplitude 0)
        for w, (a, c) in enumerate(zip(amps, counts)):
            if c < 2 and a > 0:
                raise ValueError(f"ring {w} has a single point off the origin; "
                                 "the symbol mean would not vanish")
        power = float(np.dot(counts, amps ** 2)) / self.order
        if abs(power - 1.0) > CONSTRUCTION_TOL:
            raise ValueError(f"mean power {power!r} deviates from 1 beyond "
                             f"{CONSTRUCTION_TOL}")
        object.__setattr__(self, "ring_amps", amps)
        object.__setattr__(self, "ring_counts", counts)
        object.__setattr__(self, "ring_index",
                           np.asarray(self.ring_index, dtype=int))
        object.__setattr__(self, "phases", np.asarray(self.phases, dtype=float))

    # -- derived views ------------------------------------------------------

    @property
    def size(self) -> int:
        return self.order

    @property
    def n_rings(self) -> int:
        return self.ring_amps.size

    @property
    def amplitudes(self) -> np.ndarray:
        """Per-point amplitudes; exactly ``ring_amps[ring_index]``."""
        return self.ring_amps[self.ring_index]

    @property
    def points(self) -> np.ndarray:
        """Complex point array (Q,)."""
        return self.amplitudes * np.exp(1j * self.phases)

    @property
    def label(self) -> str:
        return f"{self.family}{self.order}"

    def digest(self) -> str:
        h = hashlib.sha1()
        h.update(self.label.encode())
        h.update(self.ring_amps.tobytes())
        h.update(self.ring_counts.tobytes())
        h.update(self.phases.tobytes())
        return h.hexdigest()[:12]

    def from_rings_mass(self, masses) -> "Distribution":
        return Distribution.from_ring_mass(self, masses)


def make_constellation(family: str, order: int) -> Constellation:
    """Build a named constellation.

    ``psk``: any order >= 2, all points on the unit circle.
    ``qam``: perfect-square order >= 4, square I/Q lattice on odd integers,
    scaled to unit mean power.  Points are grouped into rings by squared
    lattice radius (an exact integer), so ring membership is exact.
    """
    family = family.lower()
    if family == "psk":
        if order < 2:
            raise ValueError("psk order must be >= 2")
        phases = 2.0 * np.pi * np.arange(order) / order
        return Constellation(family="psk", order=order,
                             ring_amps=np.array([1.0]),
                             ring_counts=np.array([order]),
                             ring_index=np.zeros(order, dtype=int),
                             phases=phases)
    if family == "qam":
        k = math.isqrt(order)
        if k * k != order or order < 4:
            raise ValueError("qam order must be a perfect square >= 4")
        levels = np.arange(-(k - 1), k, 2)            # odd (or even) integers
        ii, qq = np.meshgrid(levels, levels, indexing="ij")
        ii, qq = ii.ravel(), qq.ravel()
        r2 = ii * ii + qq * qq                        # exact integer radii
        norm2 = int(r2.sum()) / order                 # mean squared radius
        uniq = np.unique(r2)
        ring_of = {int(v): w for w, v in enumerate(uniq)}
        ring_index = np.array([ring_of[int(v)] for v in r2])
        ring_amps = np.sqrt(uniq / norm2)
        ring_counts = np.bincount(ring_index, minlength=uniq.size)
        phases = np.arctan2(qq, ii)
        order_key = np.lexsort((phases, ring_index))  # group points by ring
        return Constellation(family="qam", order=order,
                             ring_amps=ring_amps,
                             ring_counts=ring_counts,
                             ring_index=ring_index[order_key],
                             phases=phases[order_key])
    raise ValueError(f"unknown constellation family {family!r}")


def from_rings(amps, counts, phase_offsets=None, family: str = "custom") -> Constellation:
    """Custom constellation from ring descriptors (amplitude, count, offset).

    Each ring puts ``count`` points evenly on a circle, rotated by the ring's
    phase offset.  Amplitudes are rescaled to unit mean power.
    """
    amps = np.asarray(amps, dtype=float)
    counts = np.asarray(counts, dtype=int)
    if phase_offsets is None:
        phase_offsets = np.zeros(amps.size)
    phase_offsets = np.asarray(phase_offsets, dtype=float)
    if not (amps.size == counts.size == phase_offsets.size):
        raise ValueError("ring descriptor arrays must have equal length")
    order = int(counts.sum())
    power = float(np.dot(counts, amps ** 2)) / order
    if power <= 0:
        raise ValueError("total power must be positive")
    amps = amps / np.sqrt(power)
    ring_index = np.repeat(np.arange(amps.size), counts)
    phases = np.concatenate([
        2.0 * np.pi * np.arange(c) / c + off
        for c, off in zip(counts, phase_offsets)
    ])
    return Constellation(family=family, order=order, ring_amps=amps,
                         ring_counts=counts, ring_index=ring_index,
                         phases=phases)


# ---------------------------------------------------------------------------
# distributions


@dataclass(frozen=True)
class Distribution:
    """Input distribution over a constellation.

    Stores both views: ``per_point`` (length Q) and ``ring_mass`` (length W,
    aggregate mass per ring).  Constructors keep the two consistent; use
    :func:`validate` for diagnostics on arbitrary data.
    """

    per_point: np.ndarray
    ring_mass: np.ndarray

    @classmethod
    def uniform(cls, c: Constellation) -> "Distribution":
        per_point = np.full(c.size, 1.0 / c.size)
        return cls(per_point=per_point,
                   ring_mass=c.ring_counts / float(c.size))

    @classmethod
    def from_ring_mass(cls, c: Constellation, masses) -> "Distribution":
        masses = np.asarray(masses, dtype=float)
        if masses.shape != (c.n_rings,):
            raise ValueError(f"expected {c.n_rings} ring masses, "
                             f"got shape {masses.shape}")
        if np.any(masses < -1e-12):
            raise ValueError("ring masses must be nonnegative")
        total = float(masses.sum())
        if abs(total - 1.0) > VALIDATION_TOL:
            raise ValueError(f"ring masses sum to {total!r}, not 1")
        masses = np.maximum(masses, 0.0)
        per_point = masses[c.ring_index] / c.ring_counts[c.ring_index]
        return cls(per_point=per_point, ring_mass=masses)

    @classmethod
    def from_per_point(cls, c: Constellation, p) -> "Distribution":
        p = np.asarray(p, dtype=float)
        if p.shape != (c.size,):
            raise ValueError(f"expected {c.size} probabilities, got {p.shape}")
        ring_mass = np.bincount(c.ring_index, weights=p, minlength=c.n_rings)
        return cls(per_point=p, ring_mass=ring_mass)

    def digest(self) -> str:
        h = hashlib.sha1(np.asarray(self.per_point, dtype=float).tobytes())
        return h.hexdigest()[:12]


def expand_ring_mass(c: Constellation, masses) -> Distribution:
    """Spread aggregate ring masses evenly over each ring's points."""
    return Distribution.from_ring_mass(c, masses)


def moment(c: Constellation, d: Distribution, order: int) -> float:
    """Amplitude moment sum(p_q * A_q**order); order 2 or 4."""
    if order not in (2, 4):
        raise ValueError("moment order must be 2 or 4")
    return float(np.dot(d.per_point, c.amplitudes ** order))


def entropy_bits(d: Distribution) -> float:
    """Shannon entropy of the per-point distribution, in bits."""
    p = np.asarray(d.per_point, dtype=float)
    pos = p[p > 0]
    return float(-np.sum(pos * np.log2(pos)))


# ---------------------------------------------------------------------------
# validation diagnostics


@dataclass(frozen=True)
class CheckResult:
    name: str
    residual: float
    tol: float
    passed: bool
    detail: str = ""


@dataclass(frozen=True)
class Diagnostics:
    checks: tuple
    ok: bool

    def failed(self):
        return [c for c in self.checks if not c.passed]


def validate(c: Constellation, d: Distribution,
             tol: float = VALIDATION_TOL) -> Diagnostics:
    """Check distribution/constellation invariants; report, never raise.

    Checks: probabilities sum to 1, nonnegativity, ring-uniformity of the
    per-point vector, consistency of the stored ring masses, unit mean power
    of the constellation, and zero symbol mean under the distribution.
    """
    checks = []
    p = np.asarray(d.per_point, dtype=float)

    res = abs(float(p.sum()) - 1.0)
    checks.append(CheckResult("probability_sum", res, tol, res <= tol))

    res = max(0.0, -float(p.min()))
    checks.append(CheckResult("nonnegative", res, 1e-12, res <= 1e-12))

    worst, worst_ring = 0.0, -1
    for w in range(c.n_rings):
        ring_p = p[c.ring_index == w]
        dev = float(np.max(np.abs(ring_p - ring_p.mean())))
        if dev > worst:
            worst, worst_ring = dev, w
    checks.append(CheckResult("ring_uniform", worst, tol, worst <= tol,
                              detail="" if worst <= tol else
                              f"ring {worst_ring} is not uniform"))

    sums = np.bincount(c.ring_index, weights=p, minlength=c.n_rings)
    res = float(np.max(np.abs(sums - d.ring_mass)))
    checks.append(CheckResult("ring_mass_consistent", res, tol, res <= tol))

    power = float(np.dot(c.ring_counts, c.ring_amps ** 2)) / c.size
    res = abs(power - 1.0)
    checks.append(CheckResult("unit_mean_power", res, CONSTRUCTION_TOL,
                              res <= CONSTRUCTION_TOL))

    mean = complex(np.dot(p, c.points))
    res = abs(mean)
    checks.append(CheckResult("zero_mean", res, tol, res <= tol))

    checks = tuple(checks)
    return Diagnostics(checks=checks, ok=all(ch.passed for ch in checks))


# ---------------------------------------------------------------------------
# JSON serialization


def to_json(c: Constellation, d: Distribution) -> str:
    """Serialize to the ring-list JSON schema.

    Float fields use Python's shortest round-trip repr, so
    dump -> load -> dump is byte-identical.
    """
    rings = [
        {"amp2": float(c.ring_amps[w]) ** 2,
         "count": int(c.ring_counts[w]),
         "mass": float(d.ring_mass[w])}
        for w in range(c.n_rings)
    ]
    payload = {"family": c.family, "order": c.order, "rings": rings}
    return json.dumps(payload, separators=(", ", ": "))


def from_json(text: str) -> tuple[Constellation, Distribution]:
    """Rebuild (constellation, distribution) from the ring-list schema."""
    try:
        payload = json.loads(text)
        family = payload["family"]
        order = int(payload["order"])
        rings = payload["rings"]
        masses = np.array([r["mass"] for r in rings], dtype=float)
        amp2 = np.array([r["amp2"] for r in rings], dtype=float)
        counts = np.array([r["count"] for r in rings], dtype=int)
    except (KeyError, TypeError, json.JSONDecodeError) as exc:
        raise ValueError(f"malformed constellation JSON: {exc}") from exc
    if family in ("psk", "qam"):
        c = make_constellation(family, order)
        if c.n_rings != amp2.size or np.any(np.abs(c.ring_amps**2 - amp2) > 1e-9):
            raise ValueError("ring amplitudes do not match the named family")
    else:
        c = from_rings(np.sqrt(amp2), counts, family=family)
    return c, Distribution.from_ring_mass(c, masses)
