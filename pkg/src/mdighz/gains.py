"""Per-pulse gains and error rates of the GHZ analyzer for the supported sources.

Weak coherent pulses get closed forms in the rectilinear basis (dark-count
suppressed classes carry modified-Bessel factors from the phase average) and
tensor Gauss-Legendre quadrature in the diagonal basis, where the overall
phases survive into detector-level interference.  Heralded and
photon-number-filtered variants reuse the exact Fock yields.

Conventions: a "gain" Q is the per-pulse-triple probability of one announced
outcome class and includes the 1/8 preparation probability of the specific
polarization/sign triple.  Error rates compose with the misalignment
probability e_d; a zero denominator is reported as None ("no signal"), never
as NaN.
"""

from __future__ import annotations

import itertools
import os
from dataclasses import dataclass
from functools import lru_cache
from math import exp, expm1, sqrt

import numpy as np
from scipy.special import i0 as bessel_i0

from . import fock
from .params import DetectorModel, NumericsError, SystemParams, overall_efficiency

__all__ = [
    "ZGainComponents",
    "XGainComponents",
    "SlicedGains",
    "GainSet",
    "z_gain_components",
    "z_pattern_outcome_gain",
    "x_gain_components",
    "mermin_outcome_gains",
    "phase_sliced_gains",
    "assemble_gain_set",
    "wcs_gain_set",
    "gains_heralded",
    "gains_qnd",
]

# Quadrature defaults: nodes per axis, one refinement doubling certifies this
# relative stability for every returned integral.
QUAD_NODES_2D = 64
QUAD_NODES_3D = 32
QUAD_RTOL = 1e-8

A_CONSISTENCY_RTOL = 1e-12

_FAULT_ENV = "MDIGHZ_FAULT_INJECT"  # test hook: "zgain-sign" flips a gain sign


@dataclass(frozen=True)
class ZGainComponents:
    """Rectilinear-basis gains of the four polarization classes.

    a: all three users same polarization (no dark count needed);
    b/c/d: the mixed classes, each lighting only two detector groups, so one
    dark count is required (b: Alice-Charlie interference, c: Alice-Bob,
    d: Bob-Charlie).
    """

    a: float
    b: float
    c: float
    d: float


@dataclass(frozen=True)
class XGainComponents:
    """Diagonal-basis gains: e for the correct outcome class of a sign triple,
    f for the false one."""

    e: float
    f: float


@dataclass(frozen=True)
class SlicedGains:
    """Phase-post-selected diagonal-basis gains, per emitted pulse triple.

    Includes the 1/K^2 probability that all three announced phase regions
    match; q_c/q_e are the correct/false announced-class gains of the kept
    events.
    """

    q_c: float
    q_e: float
    k: int

    @property
    def q_total(self) -> float:
        return self.q_c + self.q_e

    def error_rate(self, e_d: float) -> float | None:
        q = self.q_total
        if q == 0.0:
            return None
        return (e_d * self.q_c + (1.0 - e_d) * self.q_e) / q


@dataclass(frozen=True)
class GainSet:
    """All per-basis gains and error rates for one intensity triple."""

    q_z: float
    q_cz: float
    q_ez: float
    q_czab: float
    q_ezab: float
    q_czac: float
    q_ezac: float
    q_x: float
    q_cx: float
    q_ex: float
    e_z: float | None
    e_zab: float | None
    e_zac: float | None
    e_x: float | None
    # misalignment used for the error compositions (kept for the EQ products)
    e_d: float = 0.0
    sliced: SlicedGains | None = None

    @property
    def eq_z(self) -> float:
        """E^Z * Q^Z without the division (always defined)."""
        return self.e_d * self.q_cz + (1.0 - self.e_d) * self.q_ez

    @property
    def eq_zab(self) -> float:
        return self.e_d * self.q_czab + (1.0 - self.e_d) * self.q_ezab

    @property
    def eq_zac(self) -> float:
        return self.e_d * self.q_czac + (1.0 - self.e_d) * self.q_ezac

    @property
    def eq_x(self) -> float:
        return self.e_d * self.q_cx + (1.0 - self.e_d) * self.q_ex


# ---------------------------------------------------------------------------
# Weak coherent pulses, rectilinear basis (closed forms)
# ---------------------------------------------------------------------------

def _group_click(intensity: float, p_d: float) -> float:
    # Per-detector click probability when one party's light of the given
    # arriving intensity splits evenly over the group's two detectors;
    # expm1 keeps tiny decoy intensities exact.
    return -expm1(-intensity / 2.0) + p_d * exp(-intensity / 2.0)


def _i0_minus_1(z: float) -> float:
    """I0(z) - 1 without the subtraction loss at small arguments."""
    if z >= 0.5:
        return float(bessel_i0(z)) - 1.0
    q = z * z / 4.0
    term = q
    total = q
    k = 2
    while term > 1e-20 * max(total, 1e-300):
        term *= q / (k * k)
        total += term
        k += 1
    return total


def z_pattern_outcome_gain(pols: str, mu: float, nu: float, omega: float,
                           eta: float, p_d: float,
                           outcome: str = "plus") -> float:
    """Gain of one polarization triple and one announced outcome, from the
    generic four-pattern detector product (no closed form).

    Valid for any of the eight rectilinear triples; used for symmetry checks
    and as the building block the closed forms are asserted against.
    """
    arriving = (mu * eta, nu * eta, omega * eta)
    # group -> arriving intensities it sees (routing per the analyzer wiring)
    group_to = {1: [], 2: [], 3: []}
    groups = {("A", "H"): 3, ("A", "V"): 1, ("B", "H"): 1, ("B", "V"): 2,
              ("C", "H"): 2, ("C", "V"): 3}
    for party, (who, inten) in enumerate(zip("ABC", arriving)):
        group_to[groups[(who, pols[party])]].append(inten)
    # Every valid pattern clicks exactly one detector per group, so each group
    # contributes the phase-averaged <D_clicked (1 - D_other)>; for one-party
    # and empty groups the two detectors are independent with equal means, for
    # two-party groups the interference correlates them (Bessel factor).
    clicked_silent = {}
    for grp in (1, 2, 3):
        ints = group_to[grp]
        if len(ints) <= 1:
            total = ints[0] if ints else 0.0
            d = _group_click(total, p_d)
            clicked_silent[grp] = d * (1.0 - d)
        else:
            w_tot = sum(ints)
            z = sqrt(ints[0] * ints[1])
            # (1-p_d) e^{-w/2} [ (I0(z)-1) + (1-e^{-w/2}) + p_d e^{-w/2} ]
            clicked_silent[grp] = (1.0 - p_d) * exp(-w_tot / 2.0) * (
                _i0_minus_1(z) - expm1(-w_tot / 2.0) + p_d * exp(-w_tot / 2.0))
    patterns = {"plus": ((0, 0, 0), (0, 1, 1), (1, 0, 1), (1, 1, 0)),
                "minus": ((0, 0, 1), (0, 1, 0), (1, 0, 0), (1, 1, 1))}[outcome]
    total = 0.0
    for _pat in patterns:
        term = 1.0
        for grp in (1, 2, 3):
            term *= clicked_silent[grp]
        total += term
    return total / 8.0


def z_gain_components(mu: float, nu: float, omega: float, eta: float,
                      p_d: float) -> ZGainComponents:
    """Closed-form rectilinear gains for arriving intensities mu/nu/omega * eta.

    The same-polarization class is evaluated both from the four-pattern
    product and from its factored closed form; disagreement beyond 1e-12
    relative is a hard numerics error.
    """
    ia, ib, ic = mu * eta, nu * eta, omega * eta
    x = ia + ib + ic
    w = 1.0 - p_d

    a_closed = 0.5 * w ** 3 * exp(-x / 2.0) * (
        _group_click(ia, p_d) * _group_click(ib, p_d) * _group_click(ic, p_d))
    a_product = z_pattern_outcome_gain("HHH", mu, nu, omega, eta, p_d, "plus")
    scale = max(abs(a_closed), abs(a_product), 1e-300)
    if abs(a_closed - a_product) > A_CONSISTENCY_RTOL * scale:
        raise NumericsError(
            f"same-polarization gain forms disagree: {a_closed!r} vs {a_product!r}"
        )

    def _mixed(solo: float, pair1: float, pair2: float) -> float:
        # the printed factors (1 - p_d - e^{s/2}) and (1 - p_d - e^{w/2} I0)
        # are each negative; multiply their magnitudes, which are plain sums
        # of positive terms and safe at tiny intensities
        pair_sum = pair1 + pair2
        f_solo = expm1(solo / 2.0) + p_d
        f_pair = (expm1(pair_sum / 2.0)
                  + exp(pair_sum / 2.0) * _i0_minus_1(sqrt(pair1 * pair2))
                  + p_d)
        val = (p_d / 2.0) * w ** 3 * exp(-x) * f_solo * f_pair
        if val < 0.0:
            raise NumericsError("mixed-class gain went negative")
        return val

    b = _mixed(ib, ia, ic)  # Bob solo, Alice-Charlie interfere
    c = _mixed(ic, ia, ib)  # Charlie solo, Alice-Bob interfere
    d = _mixed(ia, ib, ic)  # Alice solo, Bob-Charlie interfere
    if os.environ.get(_FAULT_ENV) == "zgain-sign":
        b = -b  # validation-suite fault-injection hook
    return ZGainComponents(a=a_closed, b=b, c=c, d=d)


# ---------------------------------------------------------------------------
# Weak coherent pulses, diagonal basis (quadrature)
# ---------------------------------------------------------------------------

@lru_cache(maxsize=16)
def _gl_nodes(n: int, half_width: float):
    t, w = np.polynomial.legendre.leggauss(n)
    return half_width * (t + 1.0), half_width * w


def _mode_intensities(ia, ib, ic, signs, phi_ab, phi_bc, phi_ac):
    """Mean photon numbers at the six detectors for diagonal-basis coherent
    inputs with sign triple `signs` (+1 -> "+", -1 -> "-")."""
    sa, sb, sc = signs
    r_ab = 0.5 * sqrt(ia * ib)
    r_bc = 0.5 * sqrt(ib * ic)
    r_ac = 0.5 * sqrt(ia * ic)
    base1 = (ia + ib) / 4.0
    base2 = (ib + ic) / 4.0
    base3 = (ia + ic) / 4.0
    c1 = np.cos(phi_ab)
    c2 = np.cos(phi_bc)
    c3 = np.cos(phi_ac)
    return (
        base1 + sa * r_ab * c1, base1 - sa * r_ab * c1,
        base2 + sb * r_bc * c2, base2 - sb * r_bc * c2,
        base3 + sc * r_ac * c3, base3 - sc * r_ac * c3,
    )


def _pattern_sums(mean_n, p_d):
    # click = 1 - (1-p_d) e^{-n} via expm1; silent = (1-p_d) e^{-n} directly,
    # so both stay exact for vanishing and for saturating intensities
    survive = [np.exp(-n) for n in mean_n]
    clicks = [-np.expm1(-n) + p_d * s for n, s in zip(mean_n, survive)]
    silents = [(1.0 - p_d) * s for s in survive]
    out = []
    for patterns in (fock.PHI_PLUS_PATTERNS, fock.PHI_MINUS_PATTERNS):
        total = 0.0
        for pat in patterns:
            term = 1.0
            for j in range(6):
                term = term * (clicks[j] if j in pat else silents[j])
            total = total + term
        out.append(total)
    return out


def _x_outcome_quad(signs, ia, ib, ic, p_d, nodes):
    phi, wts = _gl_nodes(nodes, np.pi)  # map [0, 2pi]
    pab, pac = np.meshgrid(phi, phi, indexing="ij")
    weight = np.outer(wts, wts) / (2.0 * np.pi) ** 2
    mean_n = _mode_intensities(ia, ib, ic, signs, pab, pac - pab, pac)
    plus, minus = _pattern_sums(mean_n, p_d)
    return float((plus * weight).sum()) / 8.0, float((minus * weight).sum()) / 8.0


def _certified(fn, nodes, what):
    coarse = np.asarray(fn(nodes), dtype=float)
    fine = np.asarray(fn(2 * nodes), dtype=float)
    scale = np.maximum(np.abs(fine), 1e-300)
    if np.any(np.abs(fine - coarse) > QUAD_RTOL * np.maximum(scale, np.max(scale) * 1e-6)):
        raise NumericsError(f"{what}: quadrature did not stabilize to {QUAD_RTOL} "
                            f"relative after one node doubling")
    return fine


def mermin_outcome_gains(signs: tuple[int, int, int], mu: float, nu: float,
                         omega: float, eta: float, p_d: float,
                         nodes: int = QUAD_NODES_2D) -> tuple[float, float]:
    """Gains of the two announced outcomes for one diagonal-basis sign triple,
    phase-averaged over the full circle (two-angle quadrature).

    Any subset of the intensities may be zero; the vanishing cross terms make
    those cases exact.  Returns (correct-class gain, other-class gain) with
    the correct class being the one a (+,+,+) triple feeds.
    """
    ia, ib, ic = mu * eta, nu * eta, omega * eta
    pair = _certified(lambda n: _x_outcome_quad(signs, ia, ib, ic, p_d, n),
                      nodes, "diagonal-basis gain")
    return float(pair[0]), float(pair[1])


def x_gain_components(mu: float, nu: float, omega: float, eta: float,
                      p_d: float, nodes: int = QUAD_NODES_2D) -> XGainComponents:
    """Diagonal-basis gains for the reference (+,+,+) preparation."""
    e, f = mermin_outcome_gains((1, 1, 1), mu, nu, omega, eta, p_d, nodes)
    return XGainComponents(e=e, f=f)


def _sliced_quad(ia, ib, ic, p_d, k, nodes):
    phi, wts = _gl_nodes(nodes, np.pi / (2.0 * k))  # map [0, pi/K]
    pa = phi[:, None, None]
    pb = phi[None, :, None]
    pc = phi[None, None, :]
    weight = wts[:, None, None] * wts[None, :, None] * wts[None, None, :]
    mean_n = _mode_intensities(ia, ib, ic, (1, 1, 1), pa - pb, pb - pc, pa - pc)
    plus, minus = _pattern_sums(mean_n, p_d)
    norm = k / np.pi ** 3
    return float((plus * weight).sum()) * norm, float((minus * weight).sum()) * norm


def phase_sliced_gains(mu: float, nu: float, omega: float, eta: float,
                       p_d: float, k: int,
                       nodes: int = QUAD_NODES_3D) -> SlicedGains:
    """Diagonal-basis gains of matched-phase-region events, K regions.

    The returned gains are per emitted pulse triple: they contain the 1/K^2
    probability that the three announced regions coincide (all matched-region
    pairs share the same conditional statistics, so only the first region is
    integrated).  At K = 1 this reduces exactly to the full phase average.
    """
    ia, ib, ic = mu * eta, nu * eta, omega * eta
    pair = _certified(lambda n: _sliced_quad(ia, ib, ic, p_d, k, n),
                      nodes, "phase-sliced gain")
    return SlicedGains(q_c=float(pair[0]), q_e=float(pair[1]), k=k)


# ---------------------------------------------------------------------------
# Gain-set assembly (shared by every source model)
# ---------------------------------------------------------------------------

def assemble_gain_set(z: ZGainComponents, x: XGainComponents, e_d: float,
                      sliced: SlicedGains | None = None) -> GainSet:
    """Combine class gains into totals, pairwise splits, and error rates.

    Correct/false bookkeeping per class: the same-polarization class is the
    only correct one for the three-way key; the pairwise (Alice-Bob /
    Alice-Charlie) splits reshuffle the mixed classes.
    """
    a, b, c, d = z.a, z.b, z.c, z.d
    q_cz = 4.0 * a
    q_ez = 4.0 * (b + c + d)
    q_z = q_cz + q_ez
    q_czab = 4.0 * a + 2.0 * b + 2.0 * d
    q_ezab = 2.0 * b + 4.0 * c + 2.0 * d
    q_czac = 4.0 * a + 2.0 * c + 2.0 * d
    q_ezac = 4.0 * b + 2.0 * c + 2.0 * d
    q_cx = 8.0 * x.e
    q_ex = 8.0 * x.f
    q_x = q_cx + q_ex

    def rate(correct, false, total):
        if total == 0.0:
            return None
        return (e_d * correct + (1.0 - e_d) * false) / total

    return GainSet(
        q_z=q_z, q_cz=q_cz, q_ez=q_ez,
        q_czab=q_czab, q_ezab=q_ezab, q_czac=q_czac, q_ezac=q_ezac,
        q_x=q_x, q_cx=q_cx, q_ex=q_ex,
        e_z=rate(q_cz, q_ez, q_z),
        e_zab=rate(q_czab, q_ezab, q_z),
        e_zac=rate(q_czac, q_ezac, q_z),
        e_x=rate(q_cx, q_ex, q_x),
        e_d=e_d,
        sliced=sliced,
    )


def wcs_gain_set(mu: float, nu: float, omega: float, params: SystemParams,
                 phase_k: int | None = None) -> GainSet:
    """Full weak-coherent GainSet at the params' distance; optionally also the
    phase-sliced diagonal gains for K regions."""
    eta = overall_efficiency(params.channel, params.detector)
    p_d = params.detector.p_d
    z = z_gain_components(mu, nu, omega, eta, p_d)
    x = x_gain_components(mu, nu, omega, eta, p_d)
    sliced = None
    if phase_k is not None:
        sliced = phase_sliced_gains(mu, nu, omega, eta, p_d, phase_k)
    return assemble_gain_set(z, x, params.e_d, sliced)


# ---------------------------------------------------------------------------
# Fock-backed sources: heralded pair sources and the photon-number filter
# ---------------------------------------------------------------------------

_CLASS_POLS = {"a": "HHH", "b": "HHV", "c": "VHH", "d": "HVH", "x": "+++"}


def _components_nml(numbers, eta, p_d):
    """Per-photon-number analogs of the six gain-class components (incl. the
    1/8 preparation probability and the equal-outcome-class averaging).

    Evaluated directly from the cached output distributions; direct products
    keep full relative precision at long distances, where collapsing to
    polynomials in the survival probability would cancel catastrophically.
    """
    vals = {}
    for cls in ("a", "b", "c", "d"):
        dist = fock.propagate_parties(_CLASS_POLS[cls], numbers)
        yp, ym = fock.ghz_outcome_yields(dist, eta, p_d)
        vals[cls] = (yp + ym) / 16.0
    yp, ym = fock.ghz_outcome_yields(fock.propagate_parties("+++", numbers), eta, p_d)
    return (ZGainComponents(vals["a"], vals["b"], vals["c"], vals["d"]),
            XGainComponents(yp / 8.0, ym / 8.0))


def gains_from_number_distributions(dists: tuple[np.ndarray, np.ndarray, np.ndarray],
                                    eta: float, p_d: float, e_d: float,
                                    tail_budget: float = 1e-12) -> GainSet:
    """GainSet for independent per-user photon-number distributions.

    Sums Fock yields over all (n, m, l) whose joint weight clears a floor;
    the neglected probability mass (bounded by yields <= 1) must stay inside
    `tail_budget` or the truncation is refused.
    """
    weight_floor = tail_budget / 4096.0
    za = xa = None
    comps_z = [0.0, 0.0, 0.0, 0.0]
    comps_x = [0.0, 0.0]
    included = 0.0
    for n, wn in enumerate(dists[0]):
        if wn == 0.0:
            continue
        for m, wm in enumerate(dists[1]):
            wnm = wn * wm
            if wnm == 0.0:
                continue
            for l, wl in enumerate(dists[2]):
                w = wnm * wl
                if w < weight_floor:
                    continue
                if n + m + l > fock.N_MAX:
                    continue
                included += w
                z, x = _components_nml((n, m, l), eta, p_d)
                comps_z[0] += w * z.a
                comps_z[1] += w * z.b
                comps_z[2] += w * z.c
                comps_z[3] += w * z.d
                comps_x[0] += w * x.e
                comps_x[1] += w * x.f
    tail = 1.0 - included
    if tail > tail_budget:
        raise NumericsError(
            f"photon-number truncation tail {tail:.3e} exceeds budget {tail_budget:.1e}; "
            f"raise the cutoff or lower the source intensity"
        )
    za = ZGainComponents(*comps_z)
    xa = XGainComponents(*comps_x)
    return assemble_gain_set(za, xa, e_d)


def gains_heralded(dist_a: np.ndarray, dist_b: np.ndarray, dist_c: np.ndarray,
                   eta: float, p_d: float, e_d: float) -> GainSet:
    """GainSet for triggered pair sources with the given per-user triggered
    photon-number distributions (see decoy.heralded_stats)."""
    return gains_from_number_distributions((dist_a, dist_b, dist_c), eta, p_d, e_d)


def gains_qnd(mu: float, nu: float, omega: float, eta_t: float,
              detector: DetectorModel, e_d: float) -> GainSet:
    """GainSet for weak coherent pulses behind a nondestructive <=1-photon
    filter per arm.

    Transmission eta_t thins the Poisson inputs before the filter; only the
    detector efficiency acts afterwards.  Events with two or more photons in
    any arm are discarded (the Poisson weights are deliberately not
    renormalized).
    """
    lams = (mu * eta_t, nu * eta_t, omega * eta_t)
    comps_z = [0.0, 0.0, 0.0, 0.0]
    comps_x = [0.0, 0.0]
    pref = exp(-sum(lams))
    for n, m, l in itertools.product((0, 1), repeat=3):
        w = pref * lams[0] ** n * lams[1] ** m * lams[2] ** l
        if w == 0.0:
            continue
        z, x = _components_nml((n, m, l), detector.eta_d, detector.p_d)
        comps_z[0] += w * z.a
        comps_z[1] += w * z.b
        comps_z[2] += w * z.c
        comps_z[3] += w * z.d
        comps_x[0] += w * x.e
        comps_x[1] += w * x.f
    return assemble_gain_set(ZGainComponents(*comps_z), XGainComponents(*comps_x), e_d)
