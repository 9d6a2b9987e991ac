"""Simultaneous multi-loop disk margins via the structured singular value.

Perturbing several loop-break points at once with independent disk
perturbations f_i = (2 + (1 - sigma) d_i)/(2 - (1 + sigma) d_i) turns
the stability question into a mu problem for the diagonally structured
uncertainty d = diag(d_i) acting on M = (I + L)^-1 + (sigma - 1)/2 I,
where L is the open loop seen from the chosen break points.  The
largest simultaneous radius is 1 over the peak of mu(M(jw)).

mu itself is only bracketed: a diagonally scaled largest singular value
from above, a diagonal-phase spectral radius search from below.  The
margin inherits that bracket, [1/peak_upper, 1/peak_lower].
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize, minimize_scalar

from .disk import DiskSpec, _allpass, disk_geometry, disk_margin, worst_perturbation_lti
from .classical import classical_margins
from .errors import (
    ConstructionError,
    InputError,
    NominalInstabilityError,
    PoleOnAxisError,
    WellPosednessError,
)
from .lti import (
    LtiModel,
    StateSpace,
    TransferFunction,
    _as_model,
    _blkdiag,
    eval_freq,
    is_stable,
    poles,
    scalar_close,
    tf_to_ss,
)
from .specnorm import FrequencyGrid, default_grid

__all__ = [
    "MDeltaSystem",
    "MuResult",
    "MultiLoopResult",
    "MultiLoopVerification",
    "build_m",
    "mu_diag",
    "multiloop_margin",
    "loop_at_a_time",
    "verify_multiloop_destabilizing",
]


@dataclass(frozen=True)
class MDeltaSystem:
    """Stable M in feedback with a diagonal perturbation of size n."""

    M: LtiModel
    n: int
    sigma: float


@dataclass(frozen=True)
class MuResult:
    """Bracket on mu of a constant matrix under diagonal complex structure.

    delta_worst is the diagonal matrix built from the lower-bound phases,
    scaled so that det(I - M delta_worst) = 0 with norm 1/lower.
    converged is False when the lower-bound search stagnated before its
    iteration cap."""

    upper: float
    lower: float
    delta_worst: object
    frequency: object = None
    converged: bool = True


@dataclass(frozen=True)
class MultiLoopResult:
    """Simultaneous margin bracket [alpha_lower, alpha_upper].

    alpha_lower is guaranteed (from the mu upper bound peak); alpha_upper
    comes with a certificate perturbation delta_worst at omega_crit.
    geometry describes the disk of radius alpha_lower.  inconclusive_gap
    is set when the bracket is wider than 10 percent."""

    alpha_lower: float
    alpha_upper: float
    omega_crit: float
    delta_worst: object
    geometry: object
    inconclusive_gap: bool


@dataclass(frozen=True)
class MultiLoopVerification:
    stable: bool
    nearest_pole: object
    axis_distance: float
    target_distance: object = None
    messages: tuple = ()


def _to_ss(m):
    r = _as_model(m).representation
    if isinstance(r, TransferFunction):
        return tf_to_ss(r)
    return r


def _normalized_pair(P, K):
    """Plant and controller as state space, sign folded so the loop closes
    as u = -K y.  K = None stands for the identity."""
    P = _as_model(P)
    positive = P.feedback_sign == "positive"
    # the sign belongs to the interconnection, so it is folded into K,
    # never into the plant response itself
    Pss = _to_ss(P)
    if K is None:
        if P.noutputs != P.ninputs:
            raise InputError("controller defaults to identity only for square plants")
        K = LtiModel(StateSpace(np.zeros((0, 0)), np.zeros((0, P.noutputs)),
                                np.zeros((P.noutputs, 0)), np.eye(P.noutputs)))
    else:
        K = _as_model(K)
        positive = positive or K.feedback_sign == "positive"
    Kss = _to_ss(K)
    if Kss.ninputs != Pss.noutputs or Kss.noutputs != Pss.ninputs:
        raise InputError(
            "controller must map {} plant outputs to {} plant inputs".format(
                Pss.noutputs, Pss.ninputs
            )
        )
    if positive:
        Kss = StateSpace(Kss.A, Kss.B, -Kss.C, -Kss.D)
    return Pss, Kss


def _io_loop(Pss, Kss):
    """Open loop seen from stacked break points [plant inputs; plant outputs]:
    L = [[0, Kt], [-P, 0]] for the normalized pair."""
    m, p = Pss.ninputs, Pss.noutputs
    nk, npl = Kss.nstates, Pss.nstates
    dtype = np.result_type(Pss.A.dtype, Kss.A.dtype, np.float64)
    A = _blkdiag([Kss.A, Pss.A], dtype)
    B = np.zeros((nk + npl, m + p), dtype=dtype)
    B[:nk, m:] = Kss.B
    B[nk:, :m] = Pss.B
    C = np.zeros((m + p, nk + npl), dtype=dtype)
    C[:m, :nk] = Kss.C
    C[m:, nk:] = -Pss.C
    D = np.zeros((m + p, m + p), dtype=dtype)
    D[:m, m:] = Kss.D
    D[m:, :m] = -Pss.D
    return StateSpace(A, B, C, D)


def _partial_close(ssys, keep):
    """Close all channels except `keep` under negative unity feedback."""
    nch = ssys.noutputs
    keep = list(keep)
    other = [i for i in range(nch) if i not in keep]
    if not other:
        return ssys
    A, B, C, D = ssys.A, ssys.B, ssys.C, ssys.D
    Bo, Bs = B[:, other], B[:, keep]
    Co, Cs = C[other, :], C[keep, :]
    Doo = D[np.ix_(other, other)]
    Dos = D[np.ix_(other, keep)]
    Dso = D[np.ix_(keep, other)]
    Dss = D[np.ix_(keep, keep)]
    M = np.eye(len(other)) + Doo
    if abs(np.linalg.det(M)) <= 1e-12:
        raise WellPosednessError("closing the unperturbed channels is not well posed")
    Mi = np.linalg.inv(M)
    return StateSpace(
        A - Bo @ Mi @ Co,
        Bs - Bo @ Mi @ Dos,
        Cs - Dso @ Mi @ Co,
        Dss - Dso @ Mi @ Dos,
    )


def _resolve_points(points, m, p):
    if points == "input":
        return list(range(m))
    if points == "output":
        return list(range(m, m + p))
    if points == "io":
        return list(range(m + p))
    try:
        sel = [int(i) for i in points]
    except (TypeError, ValueError):
        raise InputError("points must be 'input', 'output', 'io', or a channel list")
    if not sel or len(set(sel)) != len(sel):
        raise InputError("channel list must be non-empty and free of duplicates")
    if any(i < 0 or i >= m + p for i in sel):
        raise InputError(
            "channel indices must lie in [0, {}) (inputs first, then outputs)".format(m + p)
        )
    return sel


def build_m(P, K, points="input", sigma=0.0):
    """Assemble the M side of the M-Delta loop for chosen break points.

    Parameters
    ----------
    P, K : plant and controller (LtiModel or bare representations).
        K = None uses the identity, so the loop at the plant input is P
        itself.  A positive feedback_sign on either is folded into K.
    points : "input", "output", "io", or a list of channel indices into
        the stacked [inputs, outputs] break-point set.  Unlisted
        channels are closed at their nominal unity value.
    sigma : skew of the per-channel disks.

    Returns
    -------
    MDeltaSystem
        with M = (I + L_sel)^-1 + (sigma - 1)/2 I, where L_sel is the
        open loop restricted to the selected break points.

    Raises
    ------
    NominalInstabilityError
        If the nominal closed loop is unstable (M would be unstable).
    """
    Pss, Kss = _normalized_pair(P, K)
    m, p = Pss.ninputs, Pss.noutputs
    sel = _resolve_points(points, m, p)
    loop = _partial_close(_io_loop(Pss, Kss), sel)
    n = len(sel)
    Mmat = np.eye(n) + loop.D
    if abs(np.linalg.det(Mmat)) <= 1e-12:
        raise WellPosednessError("I + L(inf) is singular at the selected break points")
    Mi = np.linalg.inv(Mmat)
    k = (sigma - 1.0) / 2.0
    S = StateSpace(loop.A - loop.B @ Mi @ loop.C, loop.B @ Mi, -Mi @ loop.C, Mi + k * np.eye(n))
    Msys = LtiModel(S)
    if not is_stable(Msys):
        raise NominalInstabilityError("nominal closed loop is unstable")
    return MDeltaSystem(M=Msys, n=n, sigma=sigma)


def _scaled_sv(M0, t):
    d = np.exp(np.concatenate(([0.0], t)))
    scaled = (d[:, None] * M0) / d[None, :]
    return float(np.linalg.svd(scaled, compute_uv=False)[0])


def _osborne_start(M0):
    n = M0.shape[0]
    d = np.ones(n)
    absM = np.abs(M0)
    for _ in range(10):
        for i in range(n):
            row = absM[i, :] * d[i] / d
            col = absM[:, i] * d / d[i]
            r = np.linalg.norm(np.delete(row, i))
            c = np.linalg.norm(np.delete(col, i))
            if r > 0 and c > 0:
                d[i] *= math.sqrt(c / r)
    t = np.log(d[1:] / d[0])
    return t


def _mu_upper(M0, rel_tol=1e-7, max_cycles=60, t0=None):
    """inf over positive diagonal D of the largest singular value of
    D M D^-1, by Osborne balancing plus cyclic line searches.

    Returns (value, t) so sweeps can warm-start the scaling of the next
    frequency point with the optimum of the previous one.
    """
    n = M0.shape[0]
    if n == 1:
        return abs(M0[0, 0]), np.zeros(0)
    t = _osborne_start(M0)
    best = _scaled_sv(M0, t)
    if t0 is not None and np.shape(t0) == (n - 1,):
        alt = _scaled_sv(M0, np.asarray(t0, dtype=float))
        if alt < best:
            t = np.array(t0, dtype=float)
            best = alt
    for _ in range(max_cycles):
        prev = best
        for i in range(n - 1):
            def f(x, i=i):
                tt = t.copy()
                tt[i] = x
                return _scaled_sv(M0, tt)

            res = minimize_scalar(
                f, bounds=(t[i] - 2.0, t[i] + 2.0), method="bounded",
                options={"xatol": 1e-9},
            )
            if res.fun < best:
                t[i] = res.x
                best = res.fun
        if prev - best <= rel_tol * max(best, 1e-300):
            break
    return best, t


def _rho(M0, theta_tail):
    u = np.exp(1j * np.concatenate(([0.0], theta_tail)))
    return float(np.max(np.abs(np.linalg.eigvals(u[:, None] * M0))))


def _align_iteration(M0, b, maxiter=200):
    """Phase-alignment power iteration.

    Returns (theta_tail, rho, settled); settled is False when the cap was
    hit while the iterate was still moving."""
    n = M0.shape[0]
    theta = np.zeros(n)
    rho_prev = 0.0
    for k in range(maxiter):
        z = M0 @ b
        if not np.all(np.isfinite(z)) or np.linalg.norm(z) == 0.0:
            return theta[1:] - theta[0], rho_prev, True
        theta = np.angle(b) - np.angle(z)
        u = np.exp(1j * theta)
        UM = u[:, None] * M0
        w, v = np.linalg.eig(UM)
        j = int(np.argmax(np.abs(w)))
        rho = abs(w[j])
        b = v[:, j]
        nb = np.linalg.norm(b)
        if nb == 0.0:
            return theta[1:] - theta[0], rho, True
        b = b / nb
        if abs(rho - rho_prev) <= 1e-11 * max(rho, 1e-300):
            return theta[1:] - theta[0], rho, True
        rho_prev = rho
    return theta[1:] - theta[0], rho_prev, False


def _mu_lower(M0, seed=0, restarts=5):
    """max over diagonal unitary U of the spectral radius of U M, by
    power iteration from seeded starts with a simplex polish.
    Returns (rho, theta_tail, converged)."""
    n = M0.shape[0]
    if n == 1:
        return abs(M0[0, 0]), np.zeros(0), True
    rng = np.random.default_rng(seed)
    starts = [np.ones(n) / math.sqrt(n)]
    for _ in range(restarts - 1):
        b = rng.normal(size=n) + 1j * rng.normal(size=n)
        starts.append(b / np.linalg.norm(b))
    best_rho, best_theta, best_settled = -1.0, np.zeros(n - 1), False
    for b in starts:
        theta, rho, settled = _align_iteration(M0, b)
        res = minimize(
            lambda th: -_rho(M0, th), theta, method="Nelder-Mead",
            options={"xatol": 1e-10, "fatol": 1e-13, "maxiter": 800},
        )
        rho_pol = -res.fun
        if rho_pol >= rho:
            cand_theta, cand_rho, cand_settled = res.x, rho_pol, bool(res.success)
        else:
            cand_theta, cand_rho, cand_settled = theta, rho, settled
        if cand_rho > best_rho:
            best_rho, best_theta, best_settled = cand_rho, np.asarray(cand_theta), cand_settled
    return best_rho, best_theta, best_settled


def mu_diag(M0, seed=0, restarts=5):
    """Bracket mu of a constant matrix under diagonal complex uncertainty.

    Parameters
    ----------
    M0 : (n, n) complex ndarray.
    seed, restarts : control the lower-bound search starts.

    Returns
    -------
    MuResult
        upper >= mu >= lower.  delta_worst is diagonal with entries of
        modulus 1/lower and satisfies det(I - M0 delta_worst) = 0 (None
        when M0 is zero).  The upper bound is exact for n <= 3 up to the
        optimizer tolerance.
    """
    M0 = np.atleast_2d(np.asarray(M0, dtype=complex))
    n = M0.shape[0]
    if M0.shape != (n, n):
        raise InputError("mu_diag needs a square matrix")
    if not np.all(np.isfinite(M0)):
        raise InputError("mu_diag needs finite entries")
    if np.all(M0 == 0):
        return MuResult(upper=0.0, lower=0.0, delta_worst=None, converged=True)
    upper, _ = _mu_upper(M0)
    lower, theta_tail, conv = _mu_lower(M0, seed=seed, restarts=restarts)
    lower = min(lower, upper)  # fp guard; the bounds sandwich mu
    u = np.exp(1j * np.concatenate(([0.0], theta_tail)))
    w = np.linalg.eigvals(u[:, None] * M0)
    lam = w[int(np.argmax(np.abs(w)))]
    delta = np.diag(u / lam) if lam != 0 else None
    return MuResult(upper=upper, lower=lower, delta_worst=delta, converged=conv)


def _golden_max(fun, a, b, iters=40):
    """Golden-section maximizer on log-spaced frequencies in [a, b]."""
    la, lb = math.log(a), math.log(b)
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    x1 = lb - invphi * (lb - la)
    x2 = la + invphi * (lb - la)
    f1, f2 = fun(math.exp(x1)), fun(math.exp(x2))
    for _ in range(iters):
        if f1 < f2:
            la, x1, f1 = x1, x2, f2
            x2 = la + invphi * (lb - la)
            f2 = fun(math.exp(x2))
        else:
            lb, x2, f2 = x2, x1, f1
            x1 = lb - invphi * (lb - la)
            f1 = fun(math.exp(x1))
    if f1 >= f2:
        return math.exp(x1), f1
    return math.exp(x2), f2


def multiloop_margin(sys, grid=None, seed=0):
    """Peak-mu sweep giving the simultaneous disk-margin bracket.

    Parameters
    ----------
    sys : MDeltaSystem from build_m.
    grid : FrequencyGrid; defaults to 400 points over the dynamics of M.
    seed : seed for the mu lower-bound restarts.

    Returns
    -------
    MultiLoopResult
        alpha_lower = 1/peak(mu upper) is guaranteed; alpha_upper =
        1/(mu lower at the peak) has the certificate delta_worst.  The
        peak search refines around the three largest grid samples by
        golden section, so a peak far narrower than the grid spacing can
        in principle still be missed.
    """
    if grid is None:
        grid = default_grid(sys.M, 400)
    elif not isinstance(grid, FrequencyGrid):
        grid = FrequencyGrid(tuple(grid))
    pts = list(grid.points)

    warm = {"t": None}

    def ub_at(w):
        try:
            M0 = np.atleast_2d(eval_freq(sys.M, w))
        except PoleOnAxisError:
            return -math.inf
        # mu(jw) varies smoothly, so the previous point's scaling is a good
        # start; _mu_upper falls back to Osborne whenever it is not
        val, warm["t"] = _mu_upper(M0, t0=warm["t"])
        return val

    vals = [ub_at(w) for w in pts]
    order = np.argsort(vals)[::-1]
    cand = [(pts[i], vals[i]) for i in order[:3] if vals[i] > -math.inf]

    for idx in order[:3]:
        w = pts[idx]
        if not (0.0 < w < math.inf):
            continue
        i = pts.index(w)
        lo = next((pts[j] for j in range(i - 1, -1, -1) if 0.0 < pts[j] < math.inf), None)
        hi = next((pts[j] for j in range(i + 1, len(pts)) if 0.0 < pts[j] < math.inf), None)
        if lo is None or hi is None:
            continue
        wbest, vbest = _golden_max(ub_at, lo, hi)
        cand.append((wbest, vbest))

    peak_ub = max(v for _, v in cand)
    omega_crit = min(w for w, v in cand if v >= peak_ub * (1.0 - 1e-9))

    M0 = np.atleast_2d(eval_freq(sys.M, omega_crit))
    mu = mu_diag(M0, seed=seed)
    peak_lb = mu.lower
    alpha_lower = 1.0 / peak_ub if peak_ub > 0 else math.inf
    alpha_upper = 1.0 / peak_lb if peak_lb > 0 else math.inf
    gap = (
        math.isfinite(alpha_upper)
        and alpha_upper - alpha_lower > 0.10 * alpha_lower
    ) or not math.isfinite(alpha_upper)
    geometry = disk_geometry(DiskSpec(alpha_lower, sys.sigma)) if math.isfinite(alpha_lower) else None
    return MultiLoopResult(
        alpha_lower=alpha_lower,
        alpha_upper=alpha_upper,
        omega_crit=omega_crit,
        delta_worst=mu.delta_worst,
        geometry=geometry,
        inconclusive_gap=bool(gap),
    )


def loop_at_a_time(P, K, channel, location="input", sigma=0.0):
    """Margins of one loop broken at a time, the other channels closed.

    Parameters
    ----------
    P, K : plant and controller as in build_m.
    channel : zero-based channel index at the chosen location.
    location : "input" or "output".

    Returns
    -------
    (ClassicalMargins, DiskMarginResult) of the SISO loop seen from that
    single break point.
    """
    Pss, Kss = _normalized_pair(P, K)
    m, p = Pss.ninputs, Pss.noutputs
    if location == "input":
        size, offset = m, 0
    elif location == "output":
        size, offset = p, m
    else:
        raise InputError("location must be 'input' or 'output'")
    if not 0 <= int(channel) < size:
        raise InputError("channel must lie in [0, {})".format(size))
    loop = _partial_close(_io_loop(Pss, Kss), [offset + int(channel)])
    L = LtiModel(loop)
    return classical_margins(L), disk_margin(L, sigma)


def _realize_f(f, omega, sigma):
    fc = complex(f)
    if abs(fc.imag) <= 1e-12 * max(1.0, abs(fc)):
        return TransferFunction([fc.real], [1.0])
    if omega is None or not (0.0 < float(omega) < math.inf):
        raise InputError("complex perturbations need a finite positive frequency")
    den = (1.0 + sigma) * fc + (1.0 - sigma)
    if abs(den) > 1e-9 * (1.0 + abs(fc)):
        d = 2.0 * (fc - 1.0) / den
        try:
            return worst_perturbation_lti(d, float(omega), sigma).f_hat
        except (ConstructionError, InputError):
            pass
    # fall back to an all-pass through f itself; only the value at omega
    # matters for the pole check
    fhat, _beta = _allpass(fc, float(omega), "perturbation")
    return fhat


def verify_multiloop_destabilizing(P, K, points, f_list, omega=None, sigma=0.0):
    """Close every selected break point with its scalar perturbation and
    report what happened to the closed-loop poles.

    Parameters
    ----------
    P, K, points : as in build_m.
    f_list : one scalar per selected channel.  Complex entries are
        realized as stable first-order sections that take the requested
        value at `omega`.
    omega : expected frequency of the induced axis pole (optional for a
        plain stable/unstable verdict with real perturbations).

    Returns
    -------
    MultiLoopVerification
        stable flag, the pole nearest the imaginary axis, its distance
        to the axis, and when omega was given the distance from j omega
        to the nearest pole.
    """
    Pss, Kss = _normalized_pair(P, K)
    sel = _resolve_points(points, Pss.ninputs, Pss.noutputs)
    loop = _partial_close(_io_loop(Pss, Kss), sel)
    if len(f_list) != len(sel):
        raise InputError("expected {} perturbations, got {}".format(len(sel), len(f_list)))
    factors = [_realize_f(f, omega, sigma) for f in f_list]
    try:
        closed = scalar_close(LtiModel(loop), factors)
    except WellPosednessError as e:
        return MultiLoopVerification(
            stable=False, nearest_pole=None, axis_distance=math.nan,
            messages=("closure is ill posed: {}".format(e),),
        )
    p = poles(closed)
    if p.size == 0:
        return MultiLoopVerification(True, None, math.inf, None, ("closed loop has no poles",))
    k = int(np.argmin(np.abs(p.real)))
    target = None
    if omega is not None:
        target = float(np.min(np.abs(p - 1j * float(omega))))
    return MultiLoopVerification(
        stable=bool(np.all(p.real < 0)),
        nearest_pole=complex(p[k]),
        axis_distance=float(abs(p[k].real)),
        target_distance=target,
    )
