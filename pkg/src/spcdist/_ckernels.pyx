# cython: boundscheck=False, wraparound=False, cdivision=True
# cython: language_level=3
"""Compiled implementations of the numerical kernels.

Same contract as ``spcdist._pykernels``: banded natural-spline fits, the
profiled restricted likelihood per smoothing parameter, piecewise-cubic
evaluation, and the exact pairwise L2 integral.  The hot loops here are
plain C over the pentadiagonal system, so a single REML evaluation or
cross-fit costs microseconds.
"""

import numpy as np

from libc.math cimport INFINITY, M_PI, log, sqrt

BACKEND_NAME = "c"

GL_NODES = np.array(
    [
        -0.8611363115940526,
        -0.3399810435848563,
        0.3399810435848563,
        0.8611363115940526,
    ]
)
GL_WEIGHTS = np.array(
    [
        0.3478548451374538,
        0.6521451548625461,
        0.6521451548625461,
        0.3478548451374538,
    ]
)

cdef double[4] _GLX
cdef double[4] _GLW
_GLX[0] = -0.8611363115940526
_GLX[1] = -0.3399810435848563
_GLX[2] = 0.3399810435848563
_GLX[3] = 0.8611363115940526
_GLW[0] = 0.3478548451374538
_GLW[1] = 0.6521451548625461
_GLW[2] = 0.6521451548625461
_GLW[3] = 0.3478548451374538


cdef int _chol_penta(const double[::1] d, const double[::1] e1, const double[::1] e2,
                     double[::1] ld, double[::1] l1, double[::1] l2) nogil:
    """LL^T factorization of an SPD pentadiagonal matrix given by its
    diagonal and two subdiagonals.  Returns 0 on success, -1 if a pivot
    fails to be positive."""
    cdef Py_ssize_t n = d.shape[0]
    cdef Py_ssize_t i
    cdef double t
    for i in range(n):
        t = d[i]
        if i >= 1:
            t -= l1[i - 1] * l1[i - 1]
        if i >= 2:
            t -= l2[i - 2] * l2[i - 2]
        if not t > 0.0:
            return -1
        ld[i] = sqrt(t)
        if i + 1 < n:
            t = e1[i]
            if i >= 1:
                t -= l2[i - 1] * l1[i - 1]
            l1[i] = t / ld[i]
        if i + 2 < n:
            l2[i] = e2[i] / ld[i]
    return 0


cdef void _solve_penta(const double[::1] ld, const double[::1] l1, const double[::1] l2,
                       const double[::1] b, double[::1] out) nogil:
    """Solve L L^T x = b with the factor from ``_chol_penta``."""
    cdef Py_ssize_t n = ld.shape[0]
    cdef Py_ssize_t i
    cdef double t
    for i in range(n):
        t = b[i]
        if i >= 1:
            t -= l1[i - 1] * out[i - 1]
        if i >= 2:
            t -= l2[i - 2] * out[i - 2]
        out[i] = t / ld[i]
    for i in range(n - 1, -1, -1):
        t = out[i]
        if i + 1 < n:
            t -= l1[i] * out[i + 1]
        if i + 2 < n:
            t -= l2[i] * out[i + 2]
        out[i] = t / ld[i]


cdef void _roughness_bands(const double[::1] t, double[::1] qa, double[::1] qb,
                           double[::1] qc, double[::1] Td, double[::1] Te,
                           double[::1] g0, double[::1] g1,
                           double[::1] g2) nogil:
    """Second-difference columns, hat-function Gram tridiagonal, and the
    pentadiagonal Gram of the second-difference operator."""
    cdef Py_ssize_t K = t.shape[0]
    cdef Py_ssize_t n = K - 2
    cdef Py_ssize_t i
    cdef double hl, hr
    for i in range(n):
        hl = t[i + 1] - t[i]
        hr = t[i + 2] - t[i + 1]
        qa[i] = 1.0 / hl
        qc[i] = 1.0 / hr
        qb[i] = -(qa[i] + qc[i])
        Td[i] = (hl + hr) / 3.0
        if i + 1 < n:
            Te[i] = hr / 6.0
    for i in range(n):
        g0[i] = qa[i] * qa[i] + qb[i] * qb[i] + qc[i] * qc[i]
        if i + 1 < n:
            g1[i] = qb[i] * qa[i + 1] + qc[i] * qb[i + 1]
        if i + 2 < n:
            g2[i] = qc[i] * qa[i + 2]


def fit_natural(times, values, double mu):
    """Natural cubic smoothing-spline fit, penalty ``mu``; one banded
    factorization shared by every row of ``values`` (m, K)."""
    t_arr = np.ascontiguousarray(times, dtype=np.float64)
    y_arr = np.ascontiguousarray(values, dtype=np.float64)
    cdef const double[::1] t = t_arr
    cdef const double[:, ::1] Y = y_arr
    cdef Py_ssize_t K = t.shape[0]
    cdef Py_ssize_t n = K - 2
    cdef Py_ssize_t m = Y.shape[0]

    scratch = np.empty((11, n))
    cdef double[::1] qa = scratch[0]
    cdef double[::1] qb = scratch[1]
    cdef double[::1] qc = scratch[2]
    cdef double[::1] Td = scratch[3]
    cdef double[::1] Te = scratch[4]
    cdef double[::1] g0 = scratch[5]
    cdef double[::1] g1 = scratch[6]
    cdef double[::1] g2 = scratch[7]
    cdef double[::1] ld = scratch[8]
    cdef double[::1] l1 = scratch[9]
    cdef double[::1] l2 = scratch[10]
    cdef double[::1] z = np.empty(n)

    fitted_arr = np.empty((m, K))
    gamma_arr = np.empty((m, n))
    cdef double[:, ::1] fitted = fitted_arr
    cdef double[:, ::1] gamma = gamma_arr

    cdef Py_ssize_t i, r
    cdef double hl, hr
    with nogil:
        _roughness_bands(t, qa, qb, qc, Td, Te, g0, g1, g2)
        for i in range(n):
            Td[i] = Td[i] + mu * g0[i]
            if i + 1 < n:
                Te[i] = Te[i] + mu * g1[i]
            if i + 2 < n:
                g2[i] = mu * g2[i]
        r = _chol_penta(Td, Te, g2, ld, l1, l2)
    if r != 0:
        raise np.linalg.LinAlgError("band system not positive definite")
    with nogil:
        for r in range(m):
            for i in range(n):
                hl = t[i + 1] - t[i]
                hr = t[i + 2] - t[i + 1]
                z[i] = (Y[r, i] - Y[r, i + 1]) / hl + (
                    Y[r, i + 2] - Y[r, i + 1]
                ) / hr
            _solve_penta(ld, l1, l2, z, gamma[r])
            for i in range(K):
                fitted[r, i] = Y[r, i]
            for i in range(n):
                fitted[r, i] -= mu * qa[i] * gamma[r, i]
                fitted[r, i + 1] -= mu * qb[i] * gamma[r, i]
                fitted[r, i + 2] -= mu * qc[i] * gamma[r, i]
    return fitted_arr, gamma_arr


cdef class RemlObjective:
    """Profiled restricted log-likelihood in the smoothing parameter.

    Precomputes the banded pieces once per subject; ``evaluate`` then costs
    one pentadiagonal factorization and solve.
    """

    cdef double[::1] _Td, _Te, _g0, _g1, _g2, _z
    cdef double[::1] _wd, _w1, _w2, _ld, _l1, _l2, _gam
    cdef Py_ssize_t _K
    cdef double _span2, _logdet_qtq, _logdet_xtx

    def __init__(self, times, values, double span):
        t_arr = np.ascontiguousarray(times, dtype=np.float64)
        y_arr = np.ascontiguousarray(values, dtype=np.float64)
        cdef const double[::1] t = t_arr
        cdef const double[::1] y = y_arr
        cdef Py_ssize_t K = t.shape[0]
        cdef Py_ssize_t n = K - 2
        self._K = K
        self._span2 = span * span

        store = np.empty((13, n))
        qa, qb, qc = store[0], store[1], store[2]
        self._Td = store[3]
        self._Te = store[4]
        self._g0 = store[5]
        self._g1 = store[6]
        self._g2 = store[7]
        self._z = store[8]
        self._wd = store[9]
        self._w1 = store[10]
        self._w2 = store[11]
        self._gam = store[12]
        ld_arr = np.empty((3, n))
        self._ld = ld_arr[0]
        self._l1 = ld_arr[1]
        self._l2 = ld_arr[2]

        cdef double[::1] cqa = qa
        cdef double[::1] cqb = qb
        cdef double[::1] cqc = qc
        cdef Py_ssize_t i
        cdef double hl, hr
        _roughness_bands(t, cqa, cqb, cqc, self._Td, self._Te,
                         self._g0, self._g1, self._g2)
        for i in range(n):
            hl = t[i + 1] - t[i]
            hr = t[i + 2] - t[i + 1]
            self._z[i] = (y[i] - y[i + 1]) / hl + (y[i + 2] - y[i + 1]) / hr

        # log-determinant of the operator Gram (lambda-independent)
        for i in range(n):
            self._wd[i] = self._g0[i]
            if i + 1 < n:
                self._w1[i] = self._g1[i]
            if i + 2 < n:
                self._w2[i] = self._g2[i]
        if _chol_penta(self._wd, self._w1, self._w2,
                       self._ld, self._l1, self._l2) != 0:
            raise np.linalg.LinAlgError("operator Gram not positive definite")
        cdef double acc = 0.0
        for i in range(n):
            acc += log(self._ld[i])
        self._logdet_qtq = 2.0 * acc

        st = float(np.sum(t_arr))
        stt = float(np.sum(t_arr * t_arr))
        self._logdet_xtx = float(
            np.linalg.slogdet(np.array([[K, st], [st, stt]]))[1]
        )

    def evaluate(self, double lam):
        """Return (restricted log-likelihood, profiled sigma^2) at lam."""
        cdef Py_ssize_t K = self._K
        cdef Py_ssize_t n = K - 2
        cdef double nu = K * lam * self._span2
        cdef Py_ssize_t i
        cdef double acc, ypy, sigma2, logdet, ell
        cdef int bad
        with nogil:
            for i in range(n):
                self._wd[i] = self._Td[i] + nu * self._g0[i]
                if i + 1 < n:
                    self._w1[i] = self._Te[i] + nu * self._g1[i]
                if i + 2 < n:
                    self._w2[i] = nu * self._g2[i]
            bad = _chol_penta(self._wd, self._w1, self._w2,
                              self._ld, self._l1, self._l2)
        if bad != 0:
            raise np.linalg.LinAlgError("band system not positive definite")
        with nogil:
            acc = 0.0
            for i in range(n):
                acc += log(self._ld[i])
            _solve_penta(self._ld, self._l1, self._l2, self._z, self._gam)
            ypy = 0.0
            for i in range(n):
                ypy += self._z[i] * self._gam[i]
            ypy *= nu
        if not ypy > 0.0:
            return -INFINITY, 0.0
        sigma2 = ypy / (K - 2)
        logdet = 2.0 * acc - (K - 2) * log(nu) - self._logdet_qtq + self._logdet_xtx
        ell = -0.5 * ((K - 2) * (log(2.0 * M_PI * sigma2) + 1.0) + logdet)
        return ell, sigma2


cdef Py_ssize_t _interval(const double[::1] knots, double x) nogil:
    """Index of the knot interval containing x, clamped to the ends."""
    cdef Py_ssize_t lo = 0
    cdef Py_ssize_t hi = knots.shape[0] - 1
    cdef Py_ssize_t mid
    if x <= knots[0]:
        return 0
    if x >= knots[hi]:
        return hi - 1
    while hi - lo > 1:
        mid = (lo + hi) >> 1
        if knots[mid] <= x:
            lo = mid
        else:
            hi = mid
    return lo


cdef double _eval_one(const double[::1] knots, const double[:, ::1] coef, double x) nogil:
    """Piecewise cubic inside the knot range, linear continuation outside."""
    cdef Py_ssize_t K = knots.shape[0]
    cdef Py_ssize_t k
    cdef double dt, h, v_end, s_end
    if x < knots[0]:
        return coef[0, 0] + coef[0, 1] * (x - knots[0])
    if x > knots[K - 1]:
        h = knots[K - 1] - knots[K - 2]
        v_end = coef[K - 2, 0] + h * (
            coef[K - 2, 1] + h * (coef[K - 2, 2] + h * coef[K - 2, 3])
        )
        s_end = coef[K - 2, 1] + h * (2.0 * coef[K - 2, 2] + 3.0 * coef[K - 2, 3] * h)
        return v_end + s_end * (x - knots[K - 1])
    k = _interval(knots, x)
    dt = x - knots[k]
    return coef[k, 0] + dt * (coef[k, 1] + dt * (coef[k, 2] + dt * coef[k, 3]))


def eval_piecewise(knots, coef, x):
    """Evaluate a piecewise cubic at the points x (1-D array)."""
    k_arr = np.ascontiguousarray(knots, dtype=np.float64)
    c_arr = np.ascontiguousarray(coef, dtype=np.float64)
    x_arr = np.ascontiguousarray(x, dtype=np.float64)
    cdef const double[::1] kv = k_arr
    cdef const double[:, ::1] cv = c_arr
    cdef const double[::1] xv = x_arr
    out_arr = np.empty(xv.shape[0])
    cdef double[::1] out = out_arr
    cdef Py_ssize_t i
    with nogil:
        for i in range(xv.shape[0]):
            out[i] = _eval_one(kv, cv, xv[i])
    return out_arr


def pair_l2sq(knots_a, coef_a, knots_b, coef_b, double lo, double hi):
    """Exact integral over [lo, hi] of the squared difference of two
    piecewise cubics: 4-node Gauss-Legendre on the union breakpoints."""
    ka_arr = np.ascontiguousarray(knots_a, dtype=np.float64)
    ca_arr = np.ascontiguousarray(coef_a, dtype=np.float64)
    kb_arr = np.ascontiguousarray(knots_b, dtype=np.float64)
    cb_arr = np.ascontiguousarray(coef_b, dtype=np.float64)
    cdef const double[::1] ka = ka_arr
    cdef const double[:, ::1] ca = ca_arr
    cdef const double[::1] kb = kb_arr
    cdef const double[:, ::1] cb = cb_arr
    cdef Py_ssize_t na = ka.shape[0]
    cdef Py_ssize_t nb = kb.shape[0]
    cdef Py_ssize_t ia = 0, ib = 0, g
    cdef double cur = lo, nxt, cand, mid, half, xg, diff, total = 0.0
    with nogil:
        while ia < na and ka[ia] <= cur:
            ia += 1
        while ib < nb and kb[ib] <= cur:
            ib += 1
        while cur < hi:
            nxt = hi
            if ia < na:
                cand = ka[ia]
                if cand < nxt:
                    nxt = cand
            if ib < nb:
                cand = kb[ib]
                if cand < nxt:
                    nxt = cand
            mid = 0.5 * (cur + nxt)
            half = 0.5 * (nxt - cur)
            for g in range(4):
                xg = mid + half * _GLX[g]
                diff = _eval_one(ka, ca, xg) - _eval_one(kb, cb, xg)
                total += half * _GLW[g] * diff * diff
            cur = nxt
            while ia < na and ka[ia] <= cur:
                ia += 1
            while ib < nb and kb[ib] <= cur:
                ib += 1
    return total
