# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled numerical kernels; same surface as ``_pykernels``."""

from libc.math cimport (exp, log, log10, sqrt, cos, sin, lgamma, fabs, floor,
                        ceil, pow, expm1, M_PI, INFINITY)
from libc.stdlib cimport malloc, free

BACKEND_NAME = "compiled"

cdef double LOG10_FLOOR_C = -12.0
cdef double LN10 = 2.302585092994045684
LOG10_FLOOR = -12.0

cdef double WIN_SIGMA = 20.0
cdef double WIN_PAD = 40.0
cdef long ANCHOR = 64
cdef double PMF_TINY = 1e-290

cdef double XGK[8]
cdef double WGK[8]
cdef double WG[4]
XGK[:] = [0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
          0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
          0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
          0.207784955007898467600689403773245, 0.0]
WGK[:] = [0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
          0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
          0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
          0.204432940075298892414161999234649, 0.209482141084727828012999174891714]
WG[:] = [0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
         0.381830050505118944950369775488975, 0.417959183673469387755102040816327]


# --- Bessel J0 --------------------------------------------------------------

cdef double _j0_asymptotic(double x) nogil:
    cdef double chi = x - 0.25 * M_PI
    cdef double p = 0.0, q = 0.0, a = 1.0, inv = 1.0 / x, tp = 1.0
    cdef double prev = INFINITY, term, mag
    cdef int k = 0
    while True:
        term = a * tp
        mag = fabs(term)
        if mag > prev or mag < 1e-18:
            break
        prev = mag
        if k % 2 == 0:
            if (k // 2) % 2 == 0:
                p += term
            else:
                p -= term
        else:
            if ((k - 1) // 2) % 2 == 0:
                q += term
            else:
                q -= term
        k += 1
        a *= -((2.0 * k - 1.0) * (2.0 * k - 1.0)) / (8.0 * k)
        tp *= inv
    return sqrt(2.0 / (M_PI * x)) * (p * cos(chi) - q * sin(chi))


cpdef double bessel_j0(double x):
    """Bessel function of the first kind, order zero."""
    cdef double j_next = 0.0, j_cur = 1.0, j_prev, norm
    cdef int m, k
    x = fabs(x)
    if x == 0.0:
        return 1.0
    if x > 25.0:
        return _j0_asymptotic(x)
    m = 2 * ((<int>x + <int>sqrt(40.0 * x) + 40) // 2)
    norm = 2.0 if m % 2 == 0 else 0.0
    for k in range(m, 0, -1):
        j_prev = (2.0 * k / x) * j_cur - j_next
        j_next = j_cur
        j_cur = j_prev
        if fabs(j_cur) > 1e250:
            j_cur *= 1e-250
            j_next *= 1e-250
            norm *= 1e-250
        if k - 1 > 0 and (k - 1) % 2 == 0:
            norm += 2.0 * j_cur
    norm += j_cur
    return j_cur / norm


# --- Marcum Q via Poisson comparison ----------------------------------------

cdef double LN_SQRT_2PI = 0.91893853320467274178


cdef double _stirlerr(long n) nogil:
    cdef double nn
    if n <= 15:
        return lgamma(n + 1.0) - (n + 0.5) * log(<double>n) + n - LN_SQRT_2PI
    nn = (<double>n) * n
    return (1.0 / 12 - (1.0 / 360 - (1.0 / 1260 - (1.0 / 1680 - 1.0 / 1188 / nn) / nn) / nn) / nn) / n


cdef double _bd0(double x, double mean) nogil:
    cdef double v, s, s1, ej, v2
    cdef int j
    if fabs(x - mean) < 0.1 * (x + mean):
        v = (x - mean) / (x + mean)
        s = (x - mean) * v
        ej = 2.0 * x * v
        v2 = v * v
        j = 1
        while True:
            ej *= v2
            s1 = s + ej / (2 * j + 1)
            if s1 == s:
                return s1
            s = s1
            j += 1
    return x * log(x / mean) + mean - x


cdef inline double _pmf(long k, double mean) nogil:
    if mean == 0.0:
        return 1.0 if k == 0 else 0.0
    if k == 0:
        return exp(-mean)
    return exp(-_stirlerr(k) - _bd0(<double>k, mean)) / sqrt(2.0 * M_PI * k)


cpdef double poisson_ge(double alpha, double beta, int strict):
    """P(U >= V + strict) for independent U ~ Poi(alpha), V ~ Poi(beta)."""
    cdef long j_lo = <long>floor(beta - WIN_SIGMA * sqrt(beta) - WIN_PAD)
    cdef long j_hi = <long>ceil(beta + WIN_SIGMA * sqrt(beta) + WIN_PAD)
    cdef long m_hi = <long>ceil(alpha + WIN_SIGMA * sqrt(alpha) + WIN_PAD)
    cdef long top, m, j
    cdef double tail = 0.0, total = 0.0, pu, pv = 0.0
    if j_lo < 0:
        j_lo = 0
    top = j_hi + strict
    if m_hi > top:
        top = m_hi
    m = top
    pu = _pmf(top, alpha)
    while m >= j_lo + strict:
        if m == 0 or pu < PMF_TINY or (top - m) % ANCHOR == 0:
            pu = _pmf(m, alpha)
        tail += pu
        if alpha > 0.0:
            pu *= m / alpha
        j = m - strict
        if j <= j_hi:
            if j == 0 or pv < PMF_TINY or (j_hi - j) % ANCHOR == 0:
                pv = _pmf(j, beta)
            total += pv * tail
            if beta > 0.0:
                pv *= j / beta
        m -= 1
    return total


cpdef double marcum_q1(double a, double b):
    """First-order Marcum Q function, clamped to [0, 1]."""
    cdef double alpha = 0.5 * a * a, beta = 0.5 * b * b, v
    if b == 0.0:
        return 1.0
    if a >= b:
        v = 1.0 - poisson_ge(beta, alpha, 1)
    else:
        v = poisson_ge(alpha, beta, 0)
    return 1.0 if v > 1.0 else (0.0 if v < 0.0 else v)


cpdef double marcum_q1c(double a, double b):
    """Complement 1 - Q1(a, b), accurate when it is small."""
    cdef double alpha = 0.5 * a * a, beta = 0.5 * b * b, v
    if b == 0.0:
        return 0.0
    if a >= b:
        v = poisson_ge(beta, alpha, 1)
    else:
        v = 1.0 - poisson_ge(alpha, beta, 0)
    return 1.0 if v > 1.0 else (0.0 if v < 0.0 else v)


# --- Tabulated BLER curve ---------------------------------------------------

KIBBLE_MAX_X = 4.0


cpdef double kibble_joint_cdf(double x, double r2) except? -1.0:
    """Joint outage probability for scaled threshold ``x <= KIBBLE_MAX_X``."""
    cdef double terms[64]
    cdef double t, acc = 0.0, tail = 0.0
    cdef int n, j, k
    if x <= 0.0:
        return 0.0
    if x > 4.0:
        raise ValueError("kibble_joint_cdf: x above KIBBLE_MAX_X")
    n = <int>(x + 12.0 * sqrt(x)) + 32
    t = exp(-x)
    for j in range(n):
        terms[j] = t
        t *= x / (j + 1)
    k = n - 1
    while k > 0:
        tail += terms[k]
        acc = acc * r2 + tail * tail
        k -= 1
    return (1.0 - r2) * acc


cdef class TabulatedCurve:
    """BLER curve sampled in dB, interpolated linearly in (dB, log10 BLER)."""

    cdef double *_s
    cdef double *_lv
    cdef int _n
    cdef readonly tuple snr_db
    cdef readonly tuple log_bler

    def __cinit__(self, snr_db, bler):
        self._s = NULL
        self._lv = NULL

    def __init__(self, snr_db, bler):
        cdef int i
        snr = [float(s) for s in snr_db]
        bl = [float(b) for b in bler]
        if not snr:
            raise ValueError("empty BLER curve")
        if len(snr) != len(bl):
            raise ValueError("snr_db and bler lengths differ")
        for i in range(len(snr) - 1):
            if not snr[i + 1] > snr[i]:
                raise ValueError("snr_db samples must be strictly increasing")
        lv = []
        for b in bl:
            if b > 0.0:
                lv.append(max(LOG10_FLOOR_C, log10(min(1.0, b))))
            else:
                lv.append(LOG10_FLOOR_C)
        self._n = len(snr)
        self._s = <double *>malloc(self._n * sizeof(double))
        self._lv = <double *>malloc(self._n * sizeof(double))
        if self._s == NULL or self._lv == NULL:
            raise MemoryError()
        for i in range(self._n):
            self._s[i] = snr[i]
            self._lv[i] = lv[i]
        self.snr_db = tuple(snr)
        self.log_bler = tuple(lv)

    def __dealloc__(self):
        free(self._s)
        free(self._lv)

    def __reduce__(self):
        return (TabulatedCurve, (self.snr_db, [10.0 ** v for v in self.log_bler]))

    cdef inline double _at_db(self, double x) nogil:
        cdef int lo = 0, hi = self._n - 1, mid
        cdef double w
        if x <= self._s[0]:
            return pow(10.0, self._lv[0])
        if x >= self._s[hi]:
            return pow(10.0, self._lv[hi])
        while hi - lo > 1:
            mid = (lo + hi) >> 1
            if self._s[mid] <= x:
                lo = mid
            else:
                hi = mid
        w = (x - self._s[lo]) / (self._s[lo + 1] - self._s[lo])
        return pow(10.0, self._lv[lo] + w * (self._lv[lo + 1] - self._lv[lo]))

    cdef inline double _at(self, double snr_linear) nogil:
        if snr_linear <= 0.0:
            return pow(10.0, self._lv[0])
        return self._at_db(10.0 * log10(snr_linear))

    cpdef double at_db(self, double x_db):
        return self._at_db(x_db)

    cpdef double at(self, double snr_linear):
        return self._at(snr_linear)

    cdef void _segment(self, int i, double lg, double *A, double *K) nogil:
        # On sample interval i the curve is exp(A) * t**K in t = gamma/gamma_b.
        cdef double k = (self._lv[i + 1] - self._lv[i]) / (self._s[i + 1] - self._s[i])
        K[0] = 10.0 * k
        A[0] = LN10 * (self._lv[i] + k * (lg - self._s[i]))

    def expect_rayleigh(self, double gamma_b, double rel_tol=1e-10,
                        int max_sub=200, double tail_factor=40.0):
        """E[curve(gamma)] for gamma ~ Exp(mean gamma_b).

        Same scheme as the pure-Python kernel. Returns
        ``(estimate, error, converged)``.
        """
        cdef int n = self._n, cap, count = 0, i, j, worst, n_sub = 0
        cdef double t0, t_end, t_last, closed, total = 0.0, err = 0.0
        cdef double v, e, v1, e1, v2, e2, a, b, m, tol, A, K
        cdef double lg = 10.0 * log10(gamma_b)
        cdef double *ea
        cdef double *eb
        cdef double *ev
        cdef double *ee
        cdef double *eA
        cdef double *eK
        cdef bint ok = True
        t_last = pow(10.0, self._s[n - 1] / 10.0) / gamma_b
        t0 = pow(10.0, self._s[0] / 10.0) / gamma_b
        if t0 > tail_factor:
            t0 = tail_factor
        t_end = t_last if t_last < tail_factor else tail_factor
        closed = pow(10.0, self._lv[0]) * -expm1(-t0)
        if t_last <= tail_factor:
            closed += pow(10.0, self._lv[n - 1]) * exp(-t_last)
        else:
            closed += self._at(gamma_b * tail_factor) * exp(-tail_factor)
        if t0 >= t_end:
            return (min(1.0, closed), 0.0, True)
        cap = n + max_sub + 2
        ea = <double *>malloc(6 * cap * sizeof(double))
        if ea == NULL:
            raise MemoryError()
        eb = ea + cap
        ev = eb + cap
        ee = ev + cap
        eA = ee + cap
        eK = eA + cap
        a = t0
        for i in range(1, n):
            b = pow(10.0, self._s[i] / 10.0) / gamma_b
            if i == n - 1 or b >= t_end:
                b = t_end
            if b > a:
                self._segment(i - 1, lg, &A, &K)
                _gk15_pow(A, K, a, b, &v, &e)
                ea[count] = a; eb[count] = b; ev[count] = v; ee[count] = e
                eA[count] = A; eK[count] = K
                total += v
                err += e
                count += 1
                a = b
            if b >= t_end:
                break
        while True:
            tol = rel_tol * fabs(total)
            if rel_tol * closed > tol:
                tol = rel_tol * closed
            if tol < 1e-300:
                tol = 1e-300
            if err <= tol:
                break
            if n_sub >= max_sub:
                ok = False
                break
            worst = 0
            for j in range(1, count):
                if ee[j] > ee[worst]:
                    worst = j
            a = ea[worst]; b = eb[worst]
            m = 0.5 * (a + b)
            if not (a < m < b):
                ok = False
                break
            A = eA[worst]; K = eK[worst]
            _gk15_pow(A, K, a, m, &v1, &e1)
            _gk15_pow(A, K, m, b, &v2, &e2)
            total += v1 + v2 - ev[worst]
            err += e1 + e2 - ee[worst]
            eb[worst] = m; ev[worst] = v1; ee[worst] = e1
            ea[count] = m; eb[count] = b; ev[count] = v2; ee[count] = e2
            eA[count] = A; eK[count] = K
            count += 1
            n_sub += 1
        free(ea)
        v = total + closed
        if v > 1.0:
            v = 1.0
        elif v < 0.0:
            v = 0.0
        return (v, err, ok)


cdef inline double _pow_exp(double A, double K, double t) nogil:
    return exp(A + K * log(t) - t)


cdef void _gk15_pow(double A, double K, double a, double b,
                    double *val, double *err) nogil:
    # GK15 panel of exp(A) * t**K * exp(-t)
    cdef double c = 0.5 * (a + b), h = 0.5 * (b - a)
    cdef double fc = _pow_exp(A, K, c)
    cdef double rk = fc * WGK[7], rg = fc * WG[3], dx, f1, f2
    cdef int i
    for i in range(7):
        dx = h * XGK[i]
        f1 = _pow_exp(A, K, c - dx)
        f2 = _pow_exp(A, K, c + dx)
        rk += WGK[i] * (f1 + f2)
        if i % 2 == 1:
            rg += WG[i // 2] * (f1 + f2)
    val[0] = rk * h
    err[0] = fabs((rk - rg) * h)


def gk15(f, double a, double b):
    """One 15-point Kronrod panel; returns (estimate, |K15 - G7|)."""
    cdef double c = 0.5 * (a + b), h = 0.5 * (b - a)
    cdef double fc = f(c), rk, rg, dx, f1, f2
    cdef int i
    rk = fc * WGK[7]
    rg = fc * WG[3]
    for i in range(7):
        dx = h * XGK[i]
        f1 = f(c - dx)
        f2 = f(c + dx)
        rk += WGK[i] * (f1 + f2)
        if i % 2 == 1:
            rg += WG[i // 2] * (f1 + f2)
    return rk * h, fabs((rk - rg) * h)


def adaptive_gk(f, edges, double rel_tol, int max_sub, double abs_floor=1e-300):
    """Globally adaptive GK15 for Python callables (delegates to the
    pure-Python driver; callable overhead dominates either way)."""
    from agvsched._pykernels import adaptive_gk as _py_adaptive
    return _py_adaptive(f, edges, rel_tol, max_sub, abs_floor)
