"""Minimal LTI plumbing: polynomials, transfer functions, state space.

Everything downstream (margins, mu, the CLI) goes through this module, so
it is deliberately small and explicit.  Polynomials are stored as
coefficient arrays in descending powers of s.  SISO models keep their
transfer-function form so that sensitivity algebra stays exact at the
coefficient level; matrix models are realized to state space once, at
ingestion, and stay there.
"""

import numpy as np

from .errors import (
    AlgebraicLoopError,
    DegreeZeroError,
    ImproperModelError,
    InputError,
    NumericalError,
    PoleOnAxisError,
    WellPosednessError,
)

__all__ = [
    "Polynomial",
    "TransferFunction",
    "StateSpace",
    "LtiModel",
    "tf",
    "ss",
    "tfm",
    "poly_roots",
    "poles",
    "is_stable",
    "eval_freq",
    "sensitivity_pair",
    "tf_to_ss",
    "ss_to_tf",
    "scalar_close",
]


def _as_coeffs(coeffs):
    a = np.atleast_1d(np.asarray(coeffs))
    if a.ndim != 1 or a.size == 0:
        raise InputError("coefficient sequence must be non-empty and one-dimensional")
    if not np.issubdtype(a.dtype, np.number):
        raise InputError("coefficients must be numeric")
    if np.iscomplexobj(a):
        a = a.astype(np.complex128)
        if np.allclose(a.imag, 0.0, atol=0.0):
            a = a.real.copy()
        return a
    return a.astype(np.float64)


class Polynomial:
    """Polynomial in s with coefficients in descending powers.

    Leading zeros are trimmed at construction, so ``coeffs[0]`` is nonzero
    for every polynomial except the zero polynomial, which is stored as
    the single coefficient ``[0.0]``.
    """

    __slots__ = ("coeffs",)

    def __init__(self, coeffs):
        a = _as_coeffs(coeffs)
        a = np.trim_zeros(a, "f")
        if a.size == 0:
            a = np.zeros(1)
        self.coeffs = a

    @property
    def degree(self):
        return self.coeffs.size - 1

    @property
    def is_zero(self):
        return self.coeffs.size == 1 and self.coeffs[0] == 0

    def __call__(self, s):
        return np.polyval(self.coeffs, s)

    def __mul__(self, other):
        if isinstance(other, Polynomial):
            return Polynomial(np.polymul(self.coeffs, other.coeffs))
        return Polynomial(self.coeffs * other)

    __rmul__ = __mul__

    def __add__(self, other):
        return Polynomial(np.polyadd(self.coeffs, other.coeffs))

    def __sub__(self, other):
        return Polynomial(np.polysub(self.coeffs, other.coeffs))

    def monic(self):
        return Polynomial(self.coeffs / self.coeffs[0])

    def __repr__(self):
        return "Polynomial({})".format(np.array2string(self.coeffs, separator=", "))


def poly_roots(p):
    """Roots of a polynomial, sorted by real part then imaginary part.

    Parameters
    ----------
    p : Polynomial or array_like
        Coefficients in descending powers.

    Returns
    -------
    ndarray
        Complex roots.  Computed as companion-matrix eigenvalues.

    Raises
    ------
    DegreeZeroError
        If the polynomial has degree zero (no roots to extract).
    NumericalError
        If the eigensolver fails.
    """
    if not isinstance(p, Polynomial):
        p = Polynomial(p)
    if p.degree == 0:
        raise DegreeZeroError("degree-zero polynomial has no roots")
    try:
        r = np.roots(p.coeffs)
    except np.linalg.LinAlgError as e:
        raise NumericalError("root extraction failed: {}".format(e)) from e
    return np.sort_complex(np.atleast_1d(r))


class TransferFunction:
    """Scalar rational function num(s)/den(s)."""

    __slots__ = ("num", "den")

    def __init__(self, num, den):
        self.num = num if isinstance(num, Polynomial) else Polynomial(num)
        self.den = den if isinstance(den, Polynomial) else Polynomial(den)
        if self.den.is_zero:
            raise InputError("transfer function denominator is identically zero")

    @property
    def is_proper(self):
        return self.num.degree <= self.den.degree or self.num.is_zero

    @property
    def is_strictly_proper(self):
        return self.num.degree < self.den.degree or self.num.is_zero

    def __call__(self, s):
        return self.num(s) / self.den(s)

    def __mul__(self, other):
        if isinstance(other, TransferFunction):
            return TransferFunction(self.num * other.num, self.den * other.den)
        return TransferFunction(self.num * other, self.den)

    __rmul__ = __mul__

    def __neg__(self):
        return TransferFunction(-1 * self.num, self.den)

    def poles(self):
        if self.den.degree == 0:
            return np.zeros(0, dtype=complex)
        return poly_roots(self.den)

    def zeros(self):
        if self.num.degree == 0:
            return np.zeros(0, dtype=complex)
        return poly_roots(self.num)

    def __repr__(self):
        return "TransferFunction({}, {})".format(
            np.array2string(self.num.coeffs, separator=", "),
            np.array2string(self.den.coeffs, separator=", "),
        )


def _as_matrix(x, name):
    a = np.atleast_2d(np.asarray(x))
    if not np.issubdtype(a.dtype, np.number):
        raise InputError("{} must be numeric".format(name))
    if np.iscomplexobj(a):
        return a.astype(np.complex128)
    return a.astype(np.float64)


class StateSpace:
    """State-space model (A, B, C, D).  n = 0 static gains are allowed."""

    __slots__ = ("A", "B", "C", "D")

    def __init__(self, A, B, C, D):
        A = np.asarray(A, dtype=float) if np.asarray(A).size == 0 else _as_matrix(A, "A")
        if A.size == 0:
            A = A.reshape(0, 0)
        B = _as_matrix(B, "B") if np.asarray(B).size else np.zeros((0, np.atleast_2d(D).shape[1]))
        C = _as_matrix(C, "C") if np.asarray(C).size else np.zeros((np.atleast_2d(D).shape[0], 0))
        D = _as_matrix(D, "D")
        n = A.shape[0]
        if A.shape != (n, n):
            raise InputError("A must be square, got {}".format(A.shape))
        if B.shape[0] != n:
            raise InputError("B has {} rows, expected {}".format(B.shape[0], n))
        if C.shape[1] != n:
            raise InputError("C has {} columns, expected {}".format(C.shape[1], n))
        if D.shape != (C.shape[0], B.shape[1]):
            raise InputError(
                "D must be {}x{}, got {}".format(C.shape[0], B.shape[1], D.shape)
            )
        self.A, self.B, self.C, self.D = A, B, C, D

    @property
    def nstates(self):
        return self.A.shape[0]

    @property
    def noutputs(self):
        return self.C.shape[0]

    @property
    def ninputs(self):
        return self.B.shape[1]

    def __repr__(self):
        return "StateSpace(n={}, outputs={}, inputs={})".format(
            self.nstates, self.noutputs, self.ninputs
        )


class LtiModel:
    """A loop or plant, plus the sign convention of the feedback around it.

    representation is a TransferFunction for SISO models or a StateSpace
    otherwise.  Matrix-of-transfer-function input is realized entrywise
    and block-assembled at construction; it is not kept.

    feedback_sign records how the surrounding loop is meant to be closed:
    "negative" (the convention everything downstream analyzes) or
    "positive".  normalized() folds a positive sign into the response so
    that all margin computations can assume negative feedback.
    """

    __slots__ = ("representation", "feedback_sign")

    def __init__(self, representation, feedback_sign="negative"):
        if feedback_sign not in ("negative", "positive"):
            raise InputError(
                "feedback_sign must be 'negative' or 'positive', got {!r}".format(feedback_sign)
            )
        if isinstance(representation, (list, tuple)):
            representation = _tfm_to_ss(representation)
        if not isinstance(representation, (TransferFunction, StateSpace)):
            raise InputError("representation must be a TransferFunction, StateSpace, or matrix of TransferFunctions")
        self.representation = representation
        self.feedback_sign = feedback_sign

    @property
    def noutputs(self):
        r = self.representation
        return 1 if isinstance(r, TransferFunction) else r.noutputs

    @property
    def ninputs(self):
        r = self.representation
        return 1 if isinstance(r, TransferFunction) else r.ninputs

    @property
    def is_siso(self):
        return self.noutputs == 1 and self.ninputs == 1

    def normalized(self):
        """Equivalent model under negative feedback."""
        if self.feedback_sign == "negative":
            return self
        r = self.representation
        if isinstance(r, TransferFunction):
            return LtiModel(-r, "negative")
        return LtiModel(StateSpace(r.A, r.B, -r.C, -r.D), "negative")

    def __repr__(self):
        return "LtiModel({!r}, feedback_sign={!r})".format(self.representation, self.feedback_sign)


def tf(num, den, feedback_sign="negative"):
    """Build a SISO LtiModel from numerator and denominator coefficients."""
    return LtiModel(TransferFunction(num, den), feedback_sign)


def ss(A, B, C, D, feedback_sign="negative"):
    """Build an LtiModel from state-space matrices."""
    return LtiModel(StateSpace(A, B, C, D), feedback_sign)


def tfm(entries, feedback_sign="negative"):
    """Build a matrix-of-transfer-functions LtiModel.

    Parameters
    ----------
    entries : sequence of sequences
        entries[i][j] is the TransferFunction (or (num, den) pair) from
        input j to output i.  Rows must have equal length.
    """
    return LtiModel(list(entries), feedback_sign)


def _as_model(m):
    # accept bare representations in library calls; tests and internal
    # code pass TransferFunction or StateSpace directly
    if isinstance(m, LtiModel):
        return m
    return LtiModel(m)


def _coerce_tf(entry):
    if isinstance(entry, TransferFunction):
        return entry
    if isinstance(entry, (list, tuple)) and len(entry) == 2:
        return TransferFunction(entry[0], entry[1])
    raise InputError("matrix entries must be TransferFunction or (num, den) pairs")


def _tfm_to_ss(rows):
    rows = [[_coerce_tf(e) for e in row] for row in rows]
    if not rows or not rows[0]:
        raise InputError("matrix of transfer functions must be non-empty")
    nin = len(rows[0])
    if any(len(row) != nin for row in rows):
        raise InputError("matrix rows must all have the same length")
    nout = len(rows)
    # realize each entry, then stack: states concatenate, entry (i, j)
    # contributes through input j and output i only
    blocks = [[tf_to_ss(e) for e in row] for row in rows]
    nx = sum(b.nstates for row in blocks for b in row)
    dtype = np.result_type(*[b.A.dtype for row in blocks for b in row],
                           *[b.D.dtype for row in blocks for b in row])
    A = np.zeros((nx, nx), dtype=dtype)
    B = np.zeros((nx, nin), dtype=dtype)
    C = np.zeros((nout, nx), dtype=dtype)
    D = np.zeros((nout, nin), dtype=dtype)
    k = 0
    for i, row in enumerate(blocks):
        for j, b in enumerate(row):
            n = b.nstates
            A[k : k + n, k : k + n] = b.A
            B[k : k + n, j : j + 1] = b.B
            C[i : i + 1, k : k + n] = b.C
            D[i, j] = b.D[0, 0]
            k += n
    # entrywise stacking duplicates shared dynamics; strip the exact
    # copies so closed-loop eigenvalues reflect the model, not the packing
    return _minreal(StateSpace(A, B, C, D))


def _invariant_basis(A, B, tol):
    """Orthonormal basis of the smallest A-invariant subspace containing range(B)."""
    n = A.shape[0]
    Q = np.zeros((n, 0))
    new = np.array(B, dtype=float, copy=True)
    for _ in range(n):
        if Q.shape[1]:
            new = new - Q @ (Q.T @ new)
            new = new - Q @ (Q.T @ new)
        u, sv, _ = np.linalg.svd(new, full_matrices=False)
        k = int(np.sum(sv > tol))
        if k == 0:
            break
        Q = np.hstack([Q, u[:, :k]])
        if Q.shape[1] >= n:
            break
        new = A @ u[:, :k]
    return Q


def _minreal_pass(s, tol):
    Q = _invariant_basis(s.A, s.B, tol)
    A1, B1, C1 = Q.T @ s.A @ Q, Q.T @ s.B, s.C @ Q
    Qo = _invariant_basis(A1.T, C1.T, tol)
    return StateSpace(Qo.T @ A1 @ Qo, Qo.T @ B1, C1 @ Qo, s.D)


def _minreal(s, tol=1e-8):
    """Drop unreachable and unobservable states.

    Meant for exact structural cancellations (duplicated blocks from
    entrywise realization), not for squeezing near-cancellations out of
    physical models.  Projections alternate between reachable and
    observable parts until the dimension stops shrinking.
    """
    if s.nstates == 0:
        return s
    if np.iscomplexobj(s.A) or np.iscomplexobj(s.B) or np.iscomplexobj(s.C):
        return s
    scale = max(
        1.0,
        float(np.linalg.norm(s.A, 2) if s.nstates else 0.0),
        float(np.linalg.norm(s.B, 2)),
        float(np.linalg.norm(s.C, 2)),
    )
    cur = s
    while cur.nstates:
        nxt = _minreal_pass(cur, tol * scale)
        if nxt.nstates == cur.nstates:
            break
        cur = nxt
    return cur


def poles(m):
    """Poles of a model: denominator roots for SISO transfer functions,
    eigenvalues of A for state space.  Degree-zero denominators give an
    empty pole set."""
    m = _as_model(m)
    r = m.representation
    if isinstance(r, TransferFunction):
        return r.poles()
    if r.nstates == 0:
        return np.zeros(0, dtype=complex)
    try:
        p = np.linalg.eigvals(r.A)
    except np.linalg.LinAlgError as e:
        raise NumericalError("eigenvalue computation failed: {}".format(e)) from e
    return np.sort_complex(p)


def is_stable(m, eps_stab=0.0):
    """True when every pole satisfies Re p < -eps_stab."""
    p = poles(m)
    if p.size == 0:
        return True
    return bool(np.all(p.real < -eps_stab))


def _eval_tf(r, w):
    if np.isinf(w):
        # asymptotic value; properness decides between 0 and the
        # leading-coefficient ratio
        if not r.is_proper:
            raise ImproperModelError("improper transfer function has no value at infinite frequency")
        if r.is_strictly_proper:
            return complex(0.0)
        return complex(r.num.coeffs[0] / r.den.coeffs[0])
    s = 1j * w
    dv = r.den(s)
    scale = np.polyval(np.abs(r.den.coeffs), abs(w)) + 1.0
    if abs(dv) <= 1e-12 * scale:
        raise PoleOnAxisError("evaluation at w = {} hits a pole".format(w))
    return complex(r.num(s) / dv)


def _eval_ss(r, w):
    if r.nstates == 0:
        return r.D.astype(complex).copy()
    if np.isinf(w):
        return r.D.astype(complex).copy()
    n = r.nstates
    M = 1j * w * np.eye(n) - r.A
    try:
        X = np.linalg.solve(M, r.B)
    except np.linalg.LinAlgError as e:
        raise PoleOnAxisError("evaluation at w = {} hits a pole".format(w)) from e
    out = r.C @ X + r.D
    if not np.all(np.isfinite(out)):
        raise PoleOnAxisError("evaluation at w = {} hits a pole".format(w))
    return out


def eval_freq(m, w):
    """Frequency response at s = jw.

    Parameters
    ----------
    m : LtiModel or representation
    w : real frequency in rad/s.  math.inf is accepted and returns the
        feedthrough (state space) or asymptotic value (transfer
        function).  Negative w is allowed; responses of real-coefficient
        models satisfy eval_freq(m, -w) == conj(eval_freq(m, w)).

    Returns
    -------
    complex scalar for SISO models, complex ndarray otherwise.

    Raises
    ------
    PoleOnAxisError
        If jw is (numerically) a pole of the model.
    """
    m = _as_model(m)
    w = float(w)
    r = m.representation
    if isinstance(r, TransferFunction):
        return _eval_tf(r, w)
    out = _eval_ss(r, w)
    if out.shape == (1, 1):
        return complex(out[0, 0])
    return out


def tf_to_ss(t):
    """Controllable-canonical realization of a proper SISO transfer function.

    Raises ImproperModelError when deg num > deg den.
    """
    if isinstance(t, LtiModel):
        t = t.representation
    if not isinstance(t, TransferFunction):
        raise InputError("tf_to_ss expects a TransferFunction")
    if not t.is_proper:
        raise ImproperModelError("cannot realize an improper transfer function")
    den = t.den.monic()
    num = Polynomial(t.num.coeffs / t.den.coeffs[0])
    n = den.degree
    dtype = np.result_type(num.coeffs.dtype, den.coeffs.dtype)
    if n == 0:
        return StateSpace(
            np.zeros((0, 0)), np.zeros((0, 1)), np.zeros((1, 0)),
            np.array([[num.coeffs[0]]], dtype=dtype),
        )
    if num.degree == n:
        d = num.coeffs[0]
        rem = np.polysub(num.coeffs, d * den.coeffs)
    else:
        d = 0.0
        rem = num.coeffs
    rem = np.atleast_1d(np.trim_zeros(rem, "f"))
    if rem.size == 0:
        rem = np.zeros(1)
    b = np.zeros(n, dtype=dtype)
    b[n - rem.size :] = rem
    A = np.zeros((n, n), dtype=dtype)
    A[0, :] = -den.coeffs[1:]
    if n > 1:
        A[1:, :-1] = np.eye(n - 1)
    B = np.zeros((n, 1), dtype=dtype)
    B[0, 0] = 1.0
    C = b.reshape(1, n)
    return StateSpace(A, B, C, np.array([[d]], dtype=dtype))


def ss_to_tf(s):
    """Transfer function of a SISO state-space model.

    Uses det(sI - A + B C) = det(sI - A) (1 + C (sI - A)^-1 B), so the
    numerator comes out of two characteristic polynomials.
    """
    if isinstance(s, LtiModel):
        s = s.representation
    if not isinstance(s, StateSpace):
        raise InputError("ss_to_tf expects a StateSpace")
    if s.noutputs != 1 or s.ninputs != 1:
        raise InputError("ss_to_tf is defined for SISO models only")
    if s.nstates == 0:
        return TransferFunction([s.D[0, 0]], [1.0])
    den = np.poly(s.A)
    pert = np.poly(s.A - s.B @ s.C)
    num_sp = np.polysub(pert, den)
    num = np.polyadd(num_sp, s.D[0, 0] * den)
    return TransferFunction(num, den)


def _blkdiag(mats, dtype):
    n = sum(m.shape[0] for m in mats)
    p = sum(m.shape[1] for m in mats)
    out = np.zeros((n, p), dtype=dtype)
    i = j = 0
    for m in mats:
        out[i : i + m.shape[0], j : j + m.shape[1]] = m
        i += m.shape[0]
        j += m.shape[1]
    return out


def _ss_series(first, second):
    # second(s) @ first(s); states of `first` come before states of `second`
    dtype = np.result_type(first.A.dtype, first.D.dtype, second.A.dtype, second.D.dtype)
    n1, n2 = first.nstates, second.nstates
    A = np.zeros((n1 + n2, n1 + n2), dtype=dtype)
    A[:n1, :n1] = first.A
    A[n1:, n1:] = second.A
    A[n1:, :n1] = second.B @ first.C
    B = np.vstack([first.B, second.B @ first.D]).astype(dtype)
    C = np.hstack([second.D @ first.C, second.C]).astype(dtype)
    D = (second.D @ first.D).astype(dtype)
    return StateSpace(A, B, C, D)


def _ss_unity_feedback(g):
    # T = g (I + g)^-1 under negative unity feedback
    p = g.noutputs
    if g.ninputs != p:
        raise InputError("feedback closure needs a square loop")
    M = np.eye(p) + g.D
    if abs(np.linalg.det(M)) <= 1e-12 * max(1.0, np.linalg.norm(M, np.inf) ** p):
        raise WellPosednessError("I + D is singular, closed loop is not well posed")
    Mi = np.linalg.inv(M)
    A = g.A - g.B @ Mi @ g.C
    B = g.B @ Mi
    C = Mi @ g.C
    D = np.eye(p) - Mi
    return StateSpace(A, B, C, D)


def sensitivity_pair(L):
    """Sensitivity and complementary sensitivity of a negative feedback loop.

    Parameters
    ----------
    L : LtiModel
        Loop transfer function.  A positive feedback_sign is folded in
        first, so the pair always refers to I + L_normalized.

    Returns
    -------
    (S, T) : pair of LtiModel
        S = (I + L)^-1 and T = L (I + L)^-1.  S + T = I holds exactly at
        the coefficient level (same denominators, complementary
        numerators; shared A, B and complementary C, D in state space).

    Raises
    ------
    AlgebraicLoopError
        If det(I + L) vanishes identically.
    WellPosednessError
        If the closure drops degree (1 + L(inf) = 0).
    """
    L = _as_model(L).normalized()
    r = L.representation
    if isinstance(r, TransferFunction):
        cl = r.den + r.num
        if cl.is_zero:
            raise AlgebraicLoopError("1 + L is identically zero")
        if cl.degree < r.den.degree:
            raise WellPosednessError("1 + L(inf) = 0, sensitivity is improper")
        S = TransferFunction(r.den, cl)
        T = TransferFunction(r.num, cl)
        return LtiModel(S), LtiModel(T)
    if r.noutputs != r.ninputs:
        raise InputError("sensitivity needs a square loop")
    p = r.noutputs
    M = np.eye(p) + r.D
    if abs(np.linalg.det(M)) <= 1e-12:
        raise AlgebraicLoopError("I + L(inf) is singular, loop equations are ill posed")
    Mi = np.linalg.inv(M)
    A = r.A - r.B @ Mi @ r.C
    B = r.B @ Mi
    S = StateSpace(A, B, -Mi @ r.C, Mi)
    T = StateSpace(A, B, Mi @ r.C, np.eye(p) - Mi)
    return LtiModel(S), LtiModel(T)


def _static_ss(value):
    return StateSpace(np.zeros((0, 0)), np.zeros((0, 1)),
                      np.zeros((1, 0)), np.array([[value]]))


def _realize_factor(f):
    if isinstance(f, TransferFunction):
        return tf_to_ss(f)
    if isinstance(f, LtiModel):
        if not f.is_siso:
            raise InputError("perturbation factors must be scalar")
        r = f.normalized().representation
        return tf_to_ss(r) if isinstance(r, TransferFunction) else r
    return _static_ss(complex(f) if np.iscomplexobj(np.asarray(f)) else float(f))


def scalar_close(L, f):
    """Close the loop f * L under negative unity feedback.

    Parameters
    ----------
    L : LtiModel (any feedback_sign; normalized first)
    f : scalar, TransferFunction, or a sequence of those
        A single factor applies to every channel.  A sequence gives one
        factor per channel of a square MIMO loop.  Complex scalars are
        allowed; the closed loop then has complex coefficients.

    Returns
    -------
    LtiModel
        The closed-loop map f L (I + f L)^-1, suitable for pole checks.

    Raises
    ------
    WellPosednessError
        If 1 + f L(inf) = 0 (degree drop), or I + D singular in state space.
    InputError
        If the factor count does not match the loop dimension.
    """
    L = _as_model(L).normalized()
    r = L.representation
    if isinstance(r, TransferFunction) and not isinstance(f, (list, tuple, np.ndarray)):
        if isinstance(f, LtiModel):
            f = f.normalized().representation
            if isinstance(f, StateSpace):
                f = ss_to_tf(f)
        if isinstance(f, TransferFunction):
            ln = f.num * r.num
            ld = f.den * r.den
        else:
            fc = complex(f)
            if fc.imag == 0:
                fc = fc.real
            ln = fc * r.num
            ld = r.den
        cl = np.polyadd(ld.coeffs, ln.coeffs)
        scale = max(np.max(np.abs(ld.coeffs)), np.max(np.abs(ln.coeffs)))
        if len(cl) == max(len(ld.coeffs), len(ln.coeffs)) and abs(cl[0]) <= 1e-12 * scale:
            raise WellPosednessError("1 + f L(inf) = 0, closure is not well posed")
        clp = Polynomial(cl)
        if clp.is_zero:
            raise AlgebraicLoopError("1 + f L is identically zero")
        if clp.degree < max(ld.degree, ln.degree):
            raise WellPosednessError("closed loop drops degree, closure is not well posed")
        return LtiModel(TransferFunction(ln, clp))
    # state-space path
    if isinstance(r, TransferFunction):
        r = tf_to_ss(r)
    p = r.noutputs
    if r.ninputs != p:
        raise InputError("scalar_close needs a square loop")
    if isinstance(f, (list, tuple, np.ndarray)):
        factors = list(f)
        if len(factors) != p:
            raise InputError("expected {} factors, got {}".format(p, len(factors)))
    else:
        factors = [f] * p
    F = [_realize_factor(x) for x in factors]
    dtype = np.result_type(*(b.D.dtype for b in F), r.A.dtype, np.float64)
    Fss = StateSpace(
        _blkdiag([b.A for b in F], dtype),
        _blkdiag([b.B for b in F], dtype),
        _blkdiag([b.C for b in F], dtype),
        _blkdiag([b.D for b in F], dtype),
    )
    loop = _ss_series(r, Fss)  # F(s) L(s)
    return LtiModel(_ss_unity_feedback(loop))
