"""Disk margins of SISO loops.

A disk perturbation multiplies the loop by f = (2 + (1 - sigma) d) /
(2 - (1 + sigma) d) with |d| < alpha.  For fixed skew sigma this sweeps
a disk (or half plane, or disk exterior) of gain/phase perturbations
anchored at f = 1.  The largest alpha the loop tolerates is the
reciprocal of the peak gain of S + (sigma - 1)/2, where S is the
sensitivity; the peak frequency supplies a critical perturbation d0 on
the disk boundary, and d0 lifts to an all-pass first-order perturbation
that provably destabilizes.

Conventions used throughout:

- gamma_min/gamma_max are the real-axis intercepts (2 -+ alpha (1 -
  sigma)) / (2 +- alpha (1 + sigma)) taken verbatim, so for exterior
  disks they are intercepts of the excluded region and may be negative.
- Reported guaranteed gain ranges are clipped to physical gains: lower
  end at least 0, upper end math.inf when unbounded.
- Guaranteed phase comes from cos(phi) = (1 + gamma_min gamma_max) /
  (gamma_min + gamma_max); when that has no solution (half plane
  included) the guarantee is math.inf.
"""

import cmath
import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    ConstructionError,
    InputError,
    NominalInstabilityError,
    PoleOnAxisError,
    UnsupportedCaseError,
    WellPosednessError,
)
from .lti import (
    LtiModel,
    Polynomial,
    StateSpace,
    TransferFunction,
    _as_model,
    eval_freq,
    is_stable,
    poles,
    scalar_close,
    sensitivity_pair,
)
from .specnorm import FrequencyGrid, PeakGain, default_grid, hinf_norm

__all__ = [
    "DiskSpec",
    "DiskGeometry",
    "DiskMarginResult",
    "PerturbationLti",
    "MarginTrace",
    "NyquistExclusion",
    "VerificationReport",
    "INTERIOR_DISK",
    "HALF_PLANE",
    "EXTERIOR_DISK",
    "disk_geometry",
    "disk_margin",
    "guaranteed_gm_pm",
    "gain_phase_tradeoff",
    "safe_region_curve",
    "nyquist_exclusion",
    "freq_margin_trace",
    "worst_perturbation_lti",
    "verify_destabilizing",
]

INTERIOR_DISK = "interior-disk"
HALF_PLANE = "half-plane"
EXTERIOR_DISK = "exterior-disk"


@dataclass(frozen=True)
class DiskSpec:
    """Perturbation family: radius alpha > 0 and skew sigma (0 symmetric,
    +1 sensitivity-like, -1 complementary-sensitivity-like)."""

    alpha: float
    sigma: float = 0.0

    def __post_init__(self):
        if not (self.alpha > 0.0) or math.isnan(self.sigma):
            raise InputError("disk spec needs alpha > 0 and a real sigma")


@dataclass(frozen=True)
class DiskGeometry:
    """Shape of the perturbation region in the f plane.

    kind is one of INTERIOR_DISK, HALF_PLANE, EXTERIOR_DISK.  For an
    interior disk the region is |f - center| < radius and gamma_min,
    gamma_max are its real-axis intercepts.  At the half-plane
    transition (alpha (1 + sigma) = 2) one intercept is math.inf (or
    -math.inf) and center/radius degenerate to math.inf.  For an
    exterior the region is |f - center| > radius and the intercepts
    bound the excluded disk; they are then typically negative.
    phi_max is the largest |angle f| over the region, math.inf when the
    region wraps the origin or is unbounded in angle.
    """

    gamma_min: float
    gamma_max: float
    center: float
    radius: float
    phi_max: float
    kind: str


@dataclass(frozen=True)
class PerturbationLti:
    """First-order all-pass realization of a boundary perturbation.

    delta_hat has constant modulus alpha on the axis and equals delta0
    at the construction frequency.  f_hat is its image under the disk
    map, normalized to a monic denominator.  beta is the all-pass corner
    (None for constant, real delta0)."""

    delta_hat: TransferFunction
    f_hat: TransferFunction
    beta: object


@dataclass(frozen=True)
class DiskMarginResult:
    """Largest tolerated disk at a given skew, and everything derived at it."""

    spec: DiskSpec
    omega_crit: float
    delta0: object
    f0: object
    geometry: DiskGeometry
    guaranteed_gm: tuple
    guaranteed_pm: float
    peak_gain: PeakGain


@dataclass(frozen=True)
class MarginTrace:
    """Frequency-by-frequency margins.  alpha_of_omega holds math.nan at
    flagged samples (grid point on a pole); gm_of_omega holds (lo, hi)
    pairs and pm_of_omega radians, both using the reporting conventions
    of guaranteed_gm_pm."""

    grid: FrequencyGrid
    alpha_of_omega: tuple
    gm_of_omega: tuple
    pm_of_omega: tuple
    flagged: tuple = ()


@dataclass(frozen=True)
class NyquistExclusion:
    """Disk the open-loop Nyquist plot must avoid: center and radius on
    the real axis, with intercepts (-1/gamma_min, -1/gamma_max)."""

    center: float
    radius: float
    intercepts: tuple


@dataclass(frozen=True)
class VerificationReport:
    verdict: str
    pole: object
    distance: float
    messages: tuple = ()


def _raw_intercepts(alpha, sigma):
    """Intercepts straight from the boundary map, plus the region kind."""
    a = alpha * (1.0 - sigma)
    b = alpha * (1.0 + sigma)
    if abs(abs(b) - 2.0) <= 1e-12 * 2.0:
        # classification asserts the knife edge |b| = 2, so evaluate the
        # remaining intercept there too instead of leaking alpha noise
        a_star = 2.0 / abs(1.0 + sigma) * (1.0 - sigma)
        if b > 0:
            return (2.0 - a_star) / 4.0, math.inf, HALF_PLANE
        return -math.inf, (2.0 + a_star) / 4.0, HALF_PLANE
    gmin = (2.0 - a) / (2.0 + b)
    gmax = (2.0 + a) / (2.0 - b)
    kind = INTERIOR_DISK if abs(b) < 2.0 else EXTERIOR_DISK
    return gmin, gmax, kind


def disk_geometry(spec):
    """Region of multiplicative perturbations f reachable by a DiskSpec.

    See DiskGeometry for the field conventions.  The transition cases
    are first class: alpha (1 + sigma) = 2 gives a half plane, larger
    alpha an exterior region.
    """
    gmin, gmax, kind = _raw_intercepts(spec.alpha, spec.sigma)
    if kind == HALF_PLANE:
        return DiskGeometry(gmin, gmax, math.inf, math.inf, math.inf, kind)
    center = 0.5 * (gmin + gmax)
    radius = 0.5 * abs(gmax - gmin)
    if kind == INTERIOR_DISK and 0.0 < radius < center:
        phi_max = math.asin(radius / center)
    elif kind == INTERIOR_DISK and radius == center:
        phi_max = 0.5 * math.pi
    else:
        phi_max = math.inf
    return DiskGeometry(gmin, gmax, center, radius, phi_max, kind)


def _phase_from_intercepts(gmin, gmax):
    s = gmin + gmax
    if s == 0.0 or not (math.isfinite(gmin) and math.isfinite(gmax)):
        return math.inf
    x = (1.0 + gmin * gmax) / s
    if abs(x) > 1.0:
        return math.inf
    return math.acos(x)


def _reported_gm_pm(alpha, sigma):
    """Sanitized guaranteed gain interval around 1 and phase in radians."""
    if math.isinf(alpha):
        return (0.0, math.inf), math.inf
    gmin, gmax, kind = _raw_intercepts(alpha, sigma)
    if kind == INTERIOR_DISK:
        return (max(0.0, gmin), gmax), _phase_from_intercepts(gmin, gmax)
    if kind == HALF_PLANE:
        lo = max(0.0, gmin) if math.isfinite(gmin) else 0.0
        hi = gmax if math.isfinite(gmax) else math.inf
        return (lo, hi), math.inf
    # exterior: the excluded disk sits on the real axis between the
    # sorted intercepts; report the connected admissible interval around 1
    lo_ex, hi_ex = sorted((gmin, gmax))
    lo = hi_ex if 0.0 < hi_ex < 1.0 else 0.0
    hi = lo_ex if lo_ex > 1.0 else math.inf
    return (lo, hi), _phase_from_intercepts(gmin, gmax)


def guaranteed_gm_pm(x):
    """Guaranteed gain interval and phase rotation for a disk.

    Parameters
    ----------
    x : DiskSpec or DiskMarginResult

    Returns
    -------
    ((g_lo, g_hi), phi)
        Gains are clipped to [0, inf); phi is radians, math.inf when the
        intercept arithmetic admits no bound (half plane and beyond).
    """
    spec = x.spec if isinstance(x, DiskMarginResult) else x
    return _reported_gm_pm(spec.alpha, spec.sigma)


def _shifted_sensitivity(L, sigma):
    S, _T = sensitivity_pair(L)
    r = S.representation
    k = (sigma - 1.0) / 2.0
    if isinstance(r, TransferFunction):
        num = Polynomial(np.polyadd(r.num.coeffs, k * r.den.coeffs))
        return LtiModel(TransferFunction(num, r.den))
    return LtiModel(StateSpace(r.A, r.B, r.C, r.D + k * np.eye(r.noutputs)))


def disk_margin(L, sigma=0.0):
    """Largest disk of multiplicative perturbations the loop tolerates.

    Parameters
    ----------
    L : SISO LtiModel (positive feedback_sign is folded in first).
    sigma : skew of the disk family.

    Returns
    -------
    DiskMarginResult
        alpha_max = 1 / peak gain of S + (sigma - 1)/2, the frequency
        where the peak occurs (lowest such frequency on ties), the
        boundary perturbation delta0 = 1/(S(j w0) + (sigma - 1)/2), its
        image f0 (math.inf sentinel in the trivial case L(j w0) = 0,
        where delta0 = 2/(1 + sigma) and the loop is simply switched
        off), the region geometry, and the guaranteed classical numbers.

    Raises
    ------
    NominalInstabilityError, WellPosednessError, InputError
    """
    L = _as_model(L).normalized()
    if not L.is_siso:
        raise InputError("disk_margin takes a SISO loop; use multiloop_margin for MIMO")
    shifted = _shifted_sensitivity(L, sigma)
    if not is_stable(shifted):
        raise NominalInstabilityError("nominal closed loop is unstable")
    pk = hinf_norm(shifted)
    if pk.value == 0.0:
        # loop response is identically the trivial point; margin unbounded
        spec = DiskSpec(math.inf, sigma)
        return DiskMarginResult(spec, 0.0, None, None, None, (0.0, math.inf), math.inf, pk)
    alpha = 1.0 / pk.value
    w0 = pk.frequency
    g0 = eval_freq(shifted, w0)
    delta0 = 1.0 / g0
    den = 2.0 - (1.0 + sigma) * delta0
    if abs(den) <= 1e-9 * (2.0 + abs((1.0 + sigma) * delta0)):
        f0 = math.inf
    else:
        f0 = (2.0 + (1.0 - sigma) * delta0) / den
    spec = DiskSpec(alpha, sigma)
    gm, pm = _reported_gm_pm(alpha, sigma)
    return DiskMarginResult(
        spec=spec,
        omega_crit=w0,
        delta0=complex(delta0),
        f0=f0,
        geometry=disk_geometry(spec),
        guaranteed_gm=gm,
        guaranteed_pm=pm,
        peak_gain=pk,
    )


def gain_phase_tradeoff(x, gain=None, phase=None):
    """Combined gain/phase slack inside an interior disk.

    Exactly one of gain (> 0) or phase (radians in [0, pi)) must be
    given.  With a gain, returns the largest simultaneous rotation phi
    such that (gain, +-phi) stays in the disk, or None when the gain
    already falls outside.  With a phase, returns the admissible
    (g_low, g_high) gain interval at that rotation, or None when the
    rotation alone exhausts the disk.
    """
    spec = x.spec if isinstance(x, DiskMarginResult) else x
    gmin, gmax, kind = _raw_intercepts(spec.alpha, spec.sigma)
    if kind != INTERIOR_DISK:
        raise UnsupportedCaseError(
            "gain/phase trade-off requires an interior disk, got {}".format(kind)
        )
    if (gain is None) == (phase is None):
        raise InputError("give exactly one of gain or phase")
    p = gmin * gmax
    s = gmin + gmax
    if gain is not None:
        g = float(gain)
        if g <= 0.0:
            raise InputError("gain must be positive")
        x_val = (g * g + p) / (g * s)
        if x_val > 1.0:
            return None
        if x_val < -1.0:
            return math.pi
        return math.acos(x_val)
    phi = float(phase)
    if not 0.0 <= phi < math.pi:
        raise InputError("phase must lie in [0, pi)")
    disc = (s * math.cos(phi)) ** 2 - 4.0 * p
    if disc < 0.0:
        return None
    root = math.sqrt(disc)
    g_lo = 0.5 * (s * math.cos(phi) - root)
    g_hi = 0.5 * (s * math.cos(phi) + root)
    if g_hi <= 0.0:
        return None
    return (max(0.0, g_lo), g_hi)


def safe_region_curve(spec, n=361):
    """Boundary of the perturbation region as (gain_dB, phase_deg) pairs.

    Walks f((alpha, theta)) for theta in [0, pi].  A zero denominator
    (half-plane boundary) yields an infinite-gain sentinel row
    (math.inf, math.nan).
    """
    if n < 2:
        raise InputError("curve needs at least 2 samples")
    out = []
    for theta in np.linspace(0.0, math.pi, int(n)):
        d = spec.alpha * cmath.exp(1j * theta)
        den = 2.0 - (1.0 + spec.sigma) * d
        if abs(den) <= 1e-12 * (2.0 + abs((1.0 + spec.sigma) * d)):
            out.append((math.inf, math.nan))
            continue
        f = (2.0 + (1.0 - spec.sigma) * d) / den
        mag = abs(f)
        db = -math.inf if mag == 0.0 else 20.0 * math.log10(mag)
        out.append((db, math.degrees(cmath.phase(f))))
    return out


def nyquist_exclusion(spec):
    """Disk around the critical point that the Nyquist plot of L must avoid.

    Requires the typical interior geometry 0 < gamma_min < 1 <
    gamma_max < inf; anything else raises UnsupportedCaseError naming
    the violated precondition.  The region {-1/f} has real intercepts
    (-1/gamma_min, -1/gamma_max); for sigma = +1 it reduces to the disk
    of radius alpha centered at -1.
    """
    gmin, gmax, kind = _raw_intercepts(spec.alpha, spec.sigma)
    if kind != INTERIOR_DISK:
        raise UnsupportedCaseError(
            "nyquist exclusion requires an interior disk, got {}".format(kind)
        )
    if not 0.0 < gmin < 1.0:
        raise UnsupportedCaseError(
            "nyquist exclusion requires 0 < gamma_min < 1, got {:.6g}".format(gmin)
        )
    if not (1.0 < gmax < math.inf):
        raise UnsupportedCaseError(
            "nyquist exclusion requires 1 < gamma_max < inf, got {:.6g}".format(gmax)
        )
    i1 = -1.0 / gmin
    i2 = -1.0 / gmax
    return NyquistExclusion(
        center=0.5 * (i1 + i2),
        radius=0.5 * (i2 - i1),
        intercepts=(i1, i2),
    )


def freq_margin_trace(L, sigma=0.0, grid=None, n=400):
    """Disk margin radius and guaranteed margins frequency by frequency.

    alpha(w) = 1 / |S(jw) + (sigma - 1)/2|.  Rows where the evaluation
    hits a pole are flagged and filled with math.nan rather than
    aborting the sweep.  Rows whose alpha leaves the interior regime
    report the unbounded conventions of guaranteed_gm_pm.
    """
    L = _as_model(L).normalized()
    if not L.is_siso:
        raise InputError("freq_margin_trace takes a SISO loop")
    shifted = _shifted_sensitivity(L, sigma)
    if not is_stable(shifted):
        raise NominalInstabilityError("nominal closed loop is unstable")
    if grid is None:
        grid = default_grid(L, n)
    elif not isinstance(grid, FrequencyGrid):
        grid = FrequencyGrid(tuple(grid))
    alphas, gms, pms, flagged = [], [], [], []
    for i, w in enumerate(grid.points):
        try:
            g = abs(eval_freq(shifted, w))
        except PoleOnAxisError:
            flagged.append(i)
            alphas.append(math.nan)
            gms.append((math.nan, math.nan))
            pms.append(math.nan)
            continue
        alpha = math.inf if g == 0.0 else 1.0 / g
        gm, pm = _reported_gm_pm(alpha, sigma)
        alphas.append(alpha)
        gms.append(gm)
        pms.append(pm)
    return MarginTrace(
        grid=grid,
        alpha_of_omega=tuple(alphas),
        gm_of_omega=tuple(gms),
        pm_of_omega=tuple(pms),
        flagged=tuple(flagged),
    )


def _allpass(value, omega, what):
    """First-order all-pass g(s) = +-c (s - beta)/(s + beta) with
    g(j omega) = value; constant for real value."""
    v = complex(value)
    if abs(v) == 0.0:
        raise InputError("{} must be nonzero".format(what))
    if abs(v.imag) <= 1e-12 * abs(v):
        return TransferFunction([v.real], [1.0]), None
    if not (omega is not None and 0.0 < float(omega) < math.inf):
        raise InputError(
            "complex {} needs a finite positive frequency; at w = 0 or w = inf it must be real".format(what)
        )
    omega = float(omega)
    c = abs(v)
    if v.imag > 0:
        sign = 1.0
        phi = cmath.phase(v)
    else:
        sign = -1.0
        phi = cmath.phase(-v)
    beta = omega * math.tan(0.5 * phi)
    num = [sign * c, -sign * c * beta]
    den = [1.0, beta]
    return TransferFunction(num, den), beta


def worst_perturbation_lti(delta0, omega0, sigma):
    """Stable all-pass LTI perturbation through a boundary point.

    Parameters
    ----------
    delta0 : complex boundary perturbation (nonzero).
    omega0 : frequency where delta_hat(j omega0) must equal delta0.
        Required finite and positive when delta0 is complex.
    sigma : skew, used to map delta_hat into f_hat.

    Returns
    -------
    PerturbationLti
        delta_hat is all-pass with |delta_hat(jw)| = |delta0| for all w;
        f_hat = (2 + (1 - sigma) delta_hat)/(2 - (1 + sigma) delta_hat)
        with monic denominator.

    Raises
    ------
    ConstructionError
        If |delta0| (1 + sigma) >= 2, where f_hat turns improper or
        unstable because delta_hat(jw) sweeps through the trivial point
        2/(1 + sigma).
    """
    dhat, beta = _allpass(delta0, omega0, "delta0")
    c = abs(complex(delta0))
    if beta is not None and abs(1.0 + sigma) * c >= 2.0 * (1.0 - 1e-12):
        # delta_hat(jw) sweeps the full circle of radius c and passes
        # through the trivial point, so f_hat cannot be proper and stable
        raise ConstructionError(
            "no stable proper f_hat: |delta0| (1 + sigma) = {:.6g} reaches 2".format(
                abs(1.0 + sigma) * c
            )
        )
    two = Polynomial([2.0])
    fnum = two * dhat.den + (1.0 - sigma) * dhat.num
    fden = two * dhat.den - (1.0 + sigma) * dhat.num
    lead = fden.coeffs[0]
    if abs(lead) <= 1e-12 * (2.0 + abs(1.0 + sigma) * c):
        raise ConstructionError(
            "f_hat is infinite: delta0 equals the trivial point 2/(1 + sigma)"
        )
    f_hat = TransferFunction(fnum.coeffs / lead, fden.coeffs / lead)
    return PerturbationLti(delta_hat=dhat, f_hat=f_hat, beta=beta)


def verify_destabilizing(L, f, omega0, sigma=0.0):
    """Close the loop with a perturbation and check for the promised pole.

    Parameters
    ----------
    L : SISO loop.
    f : PerturbationLti, TransferFunction, or a scalar.  A complex
        scalar is realized as a first-order all-pass through f at omega0.
    omega0 : frequency where a closed-loop pole is expected.
    sigma : unused for scalar f, kept for interface symmetry.

    Returns
    -------
    VerificationReport
        verdict "pass" when some closed-loop pole lies within
        1e-4 * max(1, omega0) of j omega0; "ill-posed" when the closure
        has no proper solution (the w = inf form of destabilization);
        "fail" otherwise, with a note when the closure is in fact stable.
    """
    L = _as_model(L).normalized()
    if isinstance(f, PerturbationLti):
        fsys = f.f_hat
    elif isinstance(f, (TransferFunction, LtiModel)):
        fsys = f
    else:
        fc = complex(f)
        if abs(fc.imag) <= 1e-12 * max(1.0, abs(fc)):
            fsys = TransferFunction([fc.real], [1.0])
        else:
            fsys, _ = _allpass(fc, omega0, "perturbation")
    try:
        closed = scalar_close(L, fsys)
    except WellPosednessError as e:
        return VerificationReport("ill-posed", None, math.nan, (str(e),))
    p = poles(closed)
    if math.isinf(omega0):
        return VerificationReport(
            "fail", None, math.inf,
            ("expected an ill-posed closure at w = inf but the closure is proper",),
        )
    if p.size == 0:
        return VerificationReport("fail", None, math.inf, ("closed loop has no poles",))
    target = 1j * float(omega0)
    dist = np.abs(p - target)
    k = int(np.argmin(dist))
    tol = 1e-4 * max(1.0, abs(float(omega0)))
    messages = []
    verdict = "pass" if dist[k] <= tol else "fail"
    if verdict == "fail" and bool(np.all(p.real < 0)):
        messages.append("closed loop is stable; the perturbation does not destabilize")
    return VerificationReport(verdict, complex(p[k]), float(dist[k]), tuple(messages))
