"""Two-decoy analytic bounds on single-photon yields and error rates.

The estimators invert the photon-number mixture of the observed gains: an
inclusion-exclusion "gadget" over the vacuum-substituted intensity patterns
isolates the all-users-nonvacuum sector, and a weighted difference of the two
decoy levels pins the one-photon-each term from below (the neglected
higher-order terms enter with provably nonpositive coefficients).

Bounds are floored at 0, error bounds capped at 1/2, and every clamp leaves a
diagnostic; a vanishing yield bound makes the error bound undefined and is
reported as an explicit marker instead of a number.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import exp

import numpy as np

from .gains import GainSet
from .params import DecoyPlan, DetectorModel

__all__ = [
    "LEVEL_PATTERNS",
    "GainGrid",
    "SinglePhotonBounds",
    "HeraldedStats",
    "MerminYieldBounds",
    "build_gain_grid",
    "wcs_bounds",
    "heralded_stats",
    "heralded_bounds",
    "mermin_yield_bounds",
]

# Intensity patterns per decoy level: every user at the level or at vacuum,
# minus the all-vacuum pattern which is shared between levels.
LEVEL_PATTERNS = ((1, 1, 1), (1, 1, 0), (1, 0, 1), (0, 1, 1),
                  (1, 0, 0), (0, 1, 0), (0, 0, 1))
VACUUM = (0, 0, 0)


@dataclass(frozen=True)
class GainGrid:
    """Gain sets for the 15 intensity patterns of a two-decoy plan.

    Keys are (level, pattern) with level "signal" | "decoy" and pattern a
    0/1-triple saying which users are at the level (0 = vacuum); the shared
    all-vacuum entry appears under both levels.
    """

    entries: dict[tuple[str, tuple[int, int, int]], GainSet]

    def __post_init__(self):
        want = {(lev, pat) for lev in ("signal", "decoy")
                for pat in LEVEL_PATTERNS + (VACUUM,)}
        have = set(self.entries)
        if have != want:
            missing = sorted(want - have)
            extra = sorted(have - want)
            raise ValueError(f"incomplete gain grid: missing {missing}, extra {extra}")

    def gain(self, level, pattern) -> GainSet:
        return self.entries[(level, pattern)]


def build_gain_grid(gain_fn, plan: DecoyPlan) -> GainGrid:
    """Evaluate `gain_fn(mu_a, mu_b, mu_c) -> GainSet` over the 15 patterns."""
    entries = {}
    vacuum_set = gain_fn(0.0, 0.0, 0.0)
    for level, mu in (("signal", plan.mu2), ("decoy", plan.mu1)):
        for pat in LEVEL_PATTERNS:
            entries[(level, pat)] = gain_fn(*(mu * p for p in pat))
        entries[(level, VACUUM)] = vacuum_set
    return GainGrid(entries)


@dataclass(frozen=True)
class SinglePhotonBounds:
    """Decoy-estimated one-photon-per-user quantities.

    y111_zl / y111_xl are yield lower bounds; e111_bxu / e111_bzu error upper
    bounds (None when the corresponding yield bound vanished and the error is
    unbounded).
    """

    y111_zl: float
    y111_xl: float
    e111_bxu: float | None
    e111_bzu: float | None
    diagnostics: tuple[str, ...] = ()


def _gadget(values: dict[tuple[int, int, int], float], weights) -> float:
    """Inclusion-exclusion over vacuum substitutions.

    weights[k] multiplies the patterns with k users at the level; sign
    (-1)^(3-k) removes every contribution with at least one vacuum user.
    """
    total = weights[3] * values[(1, 1, 1)]
    total -= weights[2] * (values[(1, 1, 0)] + values[(1, 0, 1)] + values[(0, 1, 1)])
    total += weights[1] * (values[(1, 0, 0)] + values[(0, 1, 0)] + values[(0, 0, 1)])
    total -= weights[0] * values[VACUUM]
    return total


def _poisson_weights(mu: float):
    # e^{k mu} compensates the Poisson vacuum factors of k nonvacuum users
    return {k: exp(k * mu) for k in range(4)}


def _collect(grid: GainGrid, level: str, extract) -> dict:
    return {pat: extract(grid.gain(level, pat))
            for pat in LEVEL_PATTERNS + (VACUUM,)}


def _clamp_error(raw: float, label: str, diags: list[str]) -> float:
    val = raw
    if val < 0.0:
        diags.append(f"{label} floored at 0 (raw {raw:.3e})")
        val = 0.0
    if val > 0.5:
        diags.append(f"{label} capped at 1/2 (raw {raw:.3e})")
        val = 0.5
    return val


def wcs_bounds(grid_z: GainGrid, grid_x: GainGrid, plan: DecoyPlan) -> SinglePhotonBounds:
    """Two-decoy bounds for phase-randomized weak coherent sources."""
    mu2, mu1 = plan.mu2, plan.mu1
    w1 = _poisson_weights(mu1)
    w2 = _poisson_weights(mu2)
    den = mu2 ** 3 * mu1 ** 3 * (mu2 - mu1)
    diags: list[str] = []

    def lower_yield(grid, label):
        q1 = _collect(grid, "decoy", lambda g: g.q_z if label == "Y111_zl" else g.q_x)
        q2 = _collect(grid, "signal", lambda g: g.q_z if label == "Y111_zl" else g.q_x)
        raw = (mu2 ** 4 * _gadget(q1, w1) - mu1 ** 4 * _gadget(q2, w2)) / den
        if raw < 0.0:
            diags.append(f"{label} floored at 0 (raw {raw:.3e})")
            return 0.0
        return raw

    y_zl = lower_yield(grid_z, "Y111_zl")
    y_xl = lower_yield(grid_x, "Y111_xl")

    def upper_error(grid, y_low, eq_extract, label):
        if y_low <= 0.0:
            diags.append(f"{label} unbounded (single-photon yield bound is 0)")
            return None
        eq1 = _collect(grid, "decoy", eq_extract)
        raw = _gadget(eq1, w1) / (mu1 ** 3 * y_low)
        return _clamp_error(raw, label, diags)

    e_bxu = upper_error(grid_x, y_xl, lambda g: g.eq_x, "e111_bxu")
    e_bzu = upper_error(grid_z, y_zl, lambda g: g.eq_z, "e111_bzu")
    return SinglePhotonBounds(y_zl, y_xl, e_bxu, e_bzu, tuple(diags))


# ---------------------------------------------------------------------------
# Heralded pair sources
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class HeraldedStats:
    """Triggered photon-number statistics of one pair source.

    p_c is the trigger (post-selection) probability; p_n[n] the triggered
    photon-number distribution, truncated with `tail` mass unaccounted.
    """

    mu: float
    p_c: float
    p_n: np.ndarray
    tail: float


def heralded_stats(mu: float, trigger: DetectorModel, n_max: int = 12) -> HeraldedStats:
    """Thermal pair-number statistics P(n) = mu^n/(1+mu)^(n+1), conditioned on
    a trigger click of the threshold detector watching the partner mode."""
    if mu < 0:
        raise ValueError("mean pair number must be >= 0")
    eta, p_d = trigger.eta_d, trigger.p_d
    p_c = (mu * eta + p_d) / (1.0 + mu * eta)
    ns = np.arange(n_max + 1)
    if eta >= 1.0:
        trigger_click = np.where(ns == 0, p_d, 1.0)
    else:
        # 1 - (1-p_d)(1-eta)^n, exact at n = 0 and for tiny eta
        survive = np.exp(ns * np.log1p(-eta))
        trigger_click = -np.expm1(ns * np.log1p(-eta)) + p_d * survive
    raw = mu ** ns / (1.0 + mu) ** (ns + 1.0) * trigger_click
    if p_c == 0.0:
        # source never triggers; conditional distribution degenerates to vacuum
        p_n = np.zeros(n_max + 1)
        p_n[0] = 1.0
        return HeraldedStats(mu=mu, p_c=0.0, p_n=p_n, tail=0.0)
    p_n = raw / p_c
    tail = max(0.0, 1.0 - float(p_n.sum()))
    return HeraldedStats(mu=mu, p_c=p_c, p_n=p_n, tail=tail)


def vacuum_stats(n_max: int = 12) -> HeraldedStats:
    p_n = np.zeros(n_max + 1)
    p_n[0] = 1.0
    return HeraldedStats(mu=0.0, p_c=1.0, p_n=p_n, tail=0.0)


def heralded_bounds(grid_z: GainGrid, grid_x: GainGrid, stats_signal: HeraldedStats,
                    stats_decoy: HeraldedStats) -> SinglePhotonBounds:
    """Two-decoy bounds for triggered pair sources.

    Same structure as the weak-coherent estimators with the Poisson factors
    replaced by the triggered distribution values P0, P1, P2 of each level.
    The error bound divides by the rectilinear-basis yield bound, matching its
    rectilinear-basis numerator.
    """
    p0s, p1s, p2s = (float(stats_signal.p_n[k]) for k in range(3))
    p0d, p1d, p2d = (float(stats_decoy.p_n[k]) for k in range(3))
    wk_d = {k: p0d ** (3 - k) for k in range(4)}
    wk_s = {k: p0s ** (3 - k) for k in range(4)}
    den = p1s ** 2 * p1d ** 2 * (p2s * p1d - p2d * p1s)
    diags: list[str] = []
    if den == 0.0:
        diags.append("degenerate heralded levels (estimator denominator is 0)")
        return SinglePhotonBounds(0.0, 0.0, None, None, tuple(diags))

    def lower_yield(grid, extract, label):
        qd = _collect(grid, "decoy", extract)
        qs = _collect(grid, "signal", extract)
        raw = (p1s ** 2 * p2s * _gadget(qd, wk_d) - p1d ** 2 * p2d * _gadget(qs, wk_s)) / den
        if raw < 0.0:
            diags.append(f"{label} floored at 0 (raw {raw:.3e})")
            return 0.0
        return raw

    y_xl = lower_yield(grid_x, lambda g: g.q_x, "Y111_xl")
    y_zl = lower_yield(grid_z, lambda g: g.q_z, "Y111_zl")

    if y_zl <= 0.0:
        diags.append("e111_bzu unbounded (single-photon yield bound is 0)")
        e_bzu = None
    else:
        eqd = _collect(grid_z, "decoy", lambda g: g.eq_z)
        raw = _gadget(eqd, wk_d) / (p1d ** 3 * y_zl)
        e_bzu = _clamp_error(raw, "e111_bzu", diags)
    return SinglePhotonBounds(y_zl, y_xl, None, e_bzu, tuple(diags))


# ---------------------------------------------------------------------------
# Outcome-resolved bounds for the Mermin estimate
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MerminYieldBounds:
    """Bounds on the correct-outcome single-photon yields of the all-"+" and
    all-"-" preparations (lower/upper for "+", upper for "-")."""

    y_ppp_lower: float
    y_ppp_upper: float
    y_mmm_upper: float
    diagnostics: tuple[str, ...] = ()


def mermin_yield_bounds(grid_ppp: dict, grid_mmm: dict,
                        plan: DecoyPlan) -> MerminYieldBounds:
    """grid_ppp / grid_mmm map (level, pattern) -> announced-outcome gain for
    the respective sign triple (level "signal" | "decoy", patterns as in
    GainGrid)."""
    mu2, mu1 = plan.mu2, plan.mu1
    w1 = _poisson_weights(mu1)
    w2 = _poisson_weights(mu2)
    diags: list[str] = []

    def level_values(grid, level):
        vals = {pat: grid[(level, pat)] for pat in LEVEL_PATTERNS}
        vals[VACUUM] = grid[(level, VACUUM)]
        return vals

    def floored(raw, label):
        if raw < 0.0:
            diags.append(f"{label} floored at 0 (raw {raw:.3e})")
            return 0.0
        return raw

    den = mu2 ** 3 * mu1 ** 3 * (mu2 - mu1)
    ppp_d = level_values(grid_ppp, "decoy")
    ppp_s = level_values(grid_ppp, "signal")
    mmm_d = level_values(grid_mmm, "decoy")

    y_ppp_l = floored((mu2 ** 4 * _gadget(ppp_d, w1) - mu1 ** 4 * _gadget(ppp_s, w2)) / den,
                      "Y+++_lower")
    y_ppp_u = floored(_gadget(ppp_d, w1) / mu1 ** 3, "Y+++_upper")
    y_mmm_u = floored(_gadget(mmm_d, w1) / mu1 ** 3, "Y---_upper")
    return MerminYieldBounds(y_ppp_l, y_ppp_u, y_mmm_u, tuple(diags))
