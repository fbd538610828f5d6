"""Pure-Python numerical kernels.

Mirror of the compiled ``_ckernels`` extension. Both modules expose the same
names and must agree to within floating-point noise; ``_backend`` picks one at
import time.
"""

import heapq
import math
from bisect import bisect_right

BACKEND_NAME = "python"

LOG10_FLOOR = -12.0
_LN10 = math.log(10.0)

# Poisson windows extend this many standard deviations (plus an additive
# margin for small means) past the mean; neglected mass is below exp(-80).
_WIN_SIGMA = 20.0
_WIN_PAD = 40.0
_ANCHOR = 64
# below this a recurred pmf value has lost precision or underflowed
_PMF_TINY = 1e-290

# Gauss-Kronrod 7/15 abscissae and weights (QUADPACK qk15).
_XGK = (
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
)
_WGK = (
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
)
_WG = (
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
)


# ---------------------------------------------------------------------------
# Bessel J0
# ---------------------------------------------------------------------------

def _j0_asymptotic(x):
    # Hankel expansion; for x > 25 the smallest term is far below 1e-17.
    chi = x - 0.25 * math.pi
    p = 0.0
    q = 0.0
    a = 1.0
    inv = 1.0 / x
    term_pow = 1.0
    prev = math.inf
    k = 0
    while True:
        term = a * term_pow
        mag = abs(term)
        if mag > prev or mag < 1e-18:
            break
        prev = mag
        if k % 2 == 0:
            p += term if (k // 2) % 2 == 0 else -term
        else:
            q += term if ((k - 1) // 2) % 2 == 0 else -term
        k += 1
        a *= -((2 * k - 1) ** 2) / (8.0 * k)
        term_pow *= inv
    return math.sqrt(2.0 / (math.pi * x)) * (p * math.cos(chi) - q * math.sin(chi))


def bessel_j0(x):
    """Bessel function of the first kind, order zero."""
    x = abs(x)
    if x == 0.0:
        return 1.0
    if x > 25.0:
        return _j0_asymptotic(x)
    # Miller backward recurrence normalised by J0 + 2*sum(J_2k) = 1.
    m = 2 * ((int(x) + int(math.sqrt(40.0 * x)) + 40) // 2)
    j_next = 0.0
    j_cur = 1.0
    norm = 2.0 if m % 2 == 0 else 0.0
    for k in range(m, 0, -1):
        j_prev = (2.0 * k / x) * j_cur - j_next
        j_next = j_cur
        j_cur = j_prev
        if abs(j_cur) > 1e250:
            j_cur *= 1e-250
            j_next *= 1e-250
            norm *= 1e-250
        if k - 1 > 0 and (k - 1) % 2 == 0:
            norm += 2.0 * j_cur
    norm += j_cur
    return j_cur / norm


# ---------------------------------------------------------------------------
# Marcum Q (first order) via independent Poisson comparison:
#   Q1(a, b) = P(U >= V),  U ~ Poisson(a^2/2),  V ~ Poisson(b^2/2)
# ---------------------------------------------------------------------------

_LN_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


def _stirlerr(n):
    """log(n!) - log(sqrt(2 pi n) (n/e)^n) for integer n >= 1."""
    if n <= 15:
        return math.lgamma(n + 1.0) - (n + 0.5) * math.log(n) + n - _LN_SQRT_2PI
    nn = float(n) * n
    return (1.0 / 12 - (1.0 / 360 - (1.0 / 1260 - (1.0 / 1680 - 1.0 / 1188 / nn) / nn) / nn) / nn) / n


def _bd0(x, mean):
    """Deviance term x*log(x/mean) + mean - x without cancellation."""
    if abs(x - mean) < 0.1 * (x + mean):
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
    return x * math.log(x / mean) + mean - x


def _pmf(k, mean):
    # Saddle-point form; stays accurate when k and mean are both large.
    if mean == 0.0:
        return 1.0 if k == 0 else 0.0
    if k == 0:
        return math.exp(-mean)
    return math.exp(-_stirlerr(k) - _bd0(float(k), mean)) / math.sqrt(2.0 * math.pi * k)


def poisson_ge(alpha, beta, strict):
    """P(U >= V + strict) for independent U ~ Poi(alpha), V ~ Poi(beta)."""
    j_lo = max(0, int(math.floor(beta - _WIN_SIGMA * math.sqrt(beta) - _WIN_PAD)))
    j_hi = int(math.ceil(beta + _WIN_SIGMA * math.sqrt(beta) + _WIN_PAD))
    m_hi = int(math.ceil(alpha + _WIN_SIGMA * math.sqrt(alpha) + _WIN_PAD))
    top = max(j_hi + strict, m_hi)
    tail = 0.0
    total = 0.0
    pu = _pmf(top, alpha)
    pv = 0.0
    # Sum from the far tail inwards so small terms are added first. Both pmfs
    # step down by the ratio recurrence, re-anchored every _ANCHOR steps.
    for m in range(top, j_lo + strict - 1, -1):
        if m == 0 or pu < _PMF_TINY or (top - m) % _ANCHOR == 0:
            pu = _pmf(m, alpha)
        tail += pu
        if alpha > 0.0:
            pu *= m / alpha
        j = m - strict
        if j <= j_hi:
            if j == 0 or pv < _PMF_TINY or (j_hi - j) % _ANCHOR == 0:
                pv = _pmf(j, beta)
            total += pv * tail
            if beta > 0.0:
                pv *= j / beta
    return total


def marcum_q1(a, b):
    """First-order Marcum Q function, clamped to [0, 1]."""
    alpha = 0.5 * a * a
    beta = 0.5 * b * b
    if b == 0.0:
        return 1.0
    if a >= b:
        v = 1.0 - poisson_ge(beta, alpha, 1)
    else:
        v = poisson_ge(alpha, beta, 0)
    return min(1.0, max(0.0, v))


def marcum_q1c(a, b):
    """Complement 1 - Q1(a, b), accurate when it is small."""
    alpha = 0.5 * a * a
    beta = 0.5 * b * b
    if b == 0.0:
        return 0.0
    if a >= b:
        v = poisson_ge(beta, alpha, 1)
    else:
        v = 1.0 - poisson_ge(alpha, beta, 0)
    return min(1.0, max(0.0, v))


# ---------------------------------------------------------------------------
# Joint outage of two correlated unit-mean exponentials (Kibble series):
#   P(X < t, Y < t) = (1 - r2) * sum_k r2^k * P(k + 1, x)^2,  x = t / (1 - r2)
# with P the regularised lower incomplete gamma. Every term is positive, so
# small joint probabilities keep full relative precision.
# ---------------------------------------------------------------------------

KIBBLE_MAX_X = 4.0


def kibble_joint_cdf(x, r2):
    """Joint outage probability for scaled threshold ``x <= KIBBLE_MAX_X``."""
    if x <= 0.0:
        return 0.0
    if x > KIBBLE_MAX_X:
        raise ValueError("kibble_joint_cdf: x above KIBBLE_MAX_X")
    # P(k + 1, x) for k past x + 12 sqrt(x) + 32 is below 1e-30 when x <= 4
    n = int(x + 12.0 * math.sqrt(x)) + 32
    terms = [0.0] * n
    t = math.exp(-x)
    for j in range(n):
        terms[j] = t
        t *= x / (j + 1)
    # Horner in r2 from the highest index; after adding terms[k] the running
    # tail equals P(k, x) = sum_{j >= k} terms[j].
    acc = 0.0
    tail = 0.0
    for k in range(n - 1, 0, -1):
        tail += terms[k]
        acc = acc * r2 + tail * tail
    return (1.0 - r2) * acc


# ---------------------------------------------------------------------------
# Adaptive Gauss-Kronrod
# ---------------------------------------------------------------------------

def gk15(f, a, b):
    """One 15-point Kronrod panel; returns (estimate, |K15 - G7|)."""
    c = 0.5 * (a + b)
    h = 0.5 * (b - a)
    fc = f(c)
    res_k = fc * _WGK[7]
    res_g = fc * _WG[3]
    for i in range(7):
        dx = h * _XGK[i]
        f1 = f(c - dx)
        f2 = f(c + dx)
        res_k += _WGK[i] * (f1 + f2)
        if i % 2 == 1:
            res_g += _WG[i // 2] * (f1 + f2)
    return res_k * h, abs((res_k - res_g) * h)


def adaptive_gk(f, edges, rel_tol, max_sub, abs_floor=1e-300):
    """Globally adaptive GK15 over consecutive ``edges``.

    Returns ``(estimate, error, converged)``; bisects the panel with the
    largest error estimate until the summed error meets ``rel_tol`` relative
    to the running estimate or ``max_sub`` bisections were spent.

    Every seed panel is bisected once up front, and a child's error is at
    least half the change between its parent's estimate and the two
    children's. A jump that happens to fool ``|K15 - G7|`` on one node
    layout is then still caught on the other. Jumps hiding between a panel
    end and its outermost node are caught by comparing the end values.
    """
    heap = []
    total = 0.0
    err = 0.0

    def strip(end, x1, x2):
        # residual of the end value against a line through the two
        # outermost nodes: second order for smooth f, the full step for a jump
        f1 = f(x1)
        lin = f1 + (f1 - f(x2)) * (x1 - end) / (x2 - x1)
        return abs(f(end) - lin) * abs(x1 - end)

    def panel(a, b):
        # the strips between each end and its outermost node are never
        # sampled by either rule
        v, e = gk15(f, a, b)
        c = 0.5 * (a + b)
        h = 0.5 * (b - a)
        s = (strip(max(a, 1e-300), c - h * _XGK[0], c - h * _XGK[1])
             + strip(b, c + h * _XGK[0], c + h * _XGK[1]))
        return v, max(e, s)

    def split(a, b, v):
        m = 0.5 * (a + b)
        if not (a < m < b):
            return None
        v1, e1 = panel(a, m)
        v2, e2 = panel(m, b)
        d = 0.5 * abs(v - v1 - v2)
        return (max(e1, d), a, m, v1), (max(e2, d), m, b, v2)

    for a, b in zip(edges[:-1], edges[1:]):
        if b <= a:
            continue
        v, _e = gk15(f, a, b)
        kids = split(a, b, v)
        if kids is None:
            total += v
            continue
        for e, lo, hi, vv in kids:
            total += vv
            err += e
            heapq.heappush(heap, (-e, lo, hi, vv))
    n_sub = 0
    while err > max(rel_tol * abs(total), abs_floor):
        if n_sub >= max_sub or not heap:
            return total, err, False
        neg_e, a, b, v = heapq.heappop(heap)
        kids = split(a, b, v)
        if kids is None:
            return total, err, False
        total -= v
        err += neg_e
        for e, lo, hi, vv in kids:
            total += vv
            err += e
            heapq.heappush(heap, (-e, lo, hi, vv))
        n_sub += 1
    return total, err, True


# ---------------------------------------------------------------------------
# Tabulated BLER curve
# ---------------------------------------------------------------------------

class TabulatedCurve:
    """BLER curve sampled in dB, interpolated linearly in (dB, log10 BLER)."""

    __slots__ = ("snr_db", "log_bler", "_n")

    def __init__(self, snr_db, bler):
        snr_db = [float(s) for s in snr_db]
        bler = [float(b) for b in bler]
        if not snr_db:
            raise ValueError("empty BLER curve")
        if len(snr_db) != len(bler):
            raise ValueError("snr_db and bler lengths differ")
        for s0, s1 in zip(snr_db[:-1], snr_db[1:]):
            if not s1 > s0:
                raise ValueError("snr_db samples must be strictly increasing")
        self.snr_db = tuple(snr_db)
        self.log_bler = tuple(
            max(LOG10_FLOOR, math.log10(min(1.0, b))) if b > 0.0 else LOG10_FLOOR
            for b in bler
        )
        self._n = len(snr_db)

    def __reduce__(self):
        return (TabulatedCurve, (self.snr_db, [10.0 ** v for v in self.log_bler]))

    def at_db(self, x_db):
        s = self.snr_db
        lv = self.log_bler
        if x_db <= s[0]:
            return 10.0 ** lv[0]
        if x_db >= s[-1]:
            return 10.0 ** lv[-1]
        i = bisect_right(s, x_db) - 1
        w = (x_db - s[i]) / (s[i + 1] - s[i])
        return 10.0 ** (lv[i] + w * (lv[i + 1] - lv[i]))

    def at(self, snr_linear):
        if snr_linear <= 0.0:
            return 10.0 ** self.log_bler[0]
        return self.at_db(10.0 * math.log10(snr_linear))

    def _segment(self, i, lg):
        # On sample interval i the curve is exp(A) * t**K in t = gamma/gamma_b.
        s = self.snr_db
        lv = self.log_bler
        k = (lv[i + 1] - lv[i]) / (s[i + 1] - s[i])
        return _LN10 * (lv[i] + k * (lg - s[i])), 10.0 * k

    def expect_rayleigh(self, gamma_b, rel_tol=1e-10, max_sub=200, tail_factor=40.0):
        """E[curve(gamma)] for gamma ~ Exp(mean gamma_b).

        Integrates in t = gamma / gamma_b. Below the first and above the last
        sample the curve is constant and integrates in closed form; beyond
        ``tail_factor`` the residual is bounded by curve(tail)*exp(-tail).
        Between samples the curve is a power law in t, so each GK15 panel
        integrates ``exp(A) * t**K * exp(-t)`` with that interval's (A, K).
        Returns ``(estimate, error, converged)``.
        """
        s = self.snr_db
        lv = self.log_bler
        n = self._n
        lg = 10.0 * math.log10(gamma_b)
        t_last = 10.0 ** (s[-1] / 10.0) / gamma_b
        t0 = min(10.0 ** (s[0] / 10.0) / gamma_b, tail_factor)
        t_end = min(t_last, tail_factor)
        closed = 10.0 ** lv[0] * -math.expm1(-t0)
        if t_last <= tail_factor:
            closed += 10.0 ** lv[-1] * math.exp(-t_last)
        else:
            closed += self.at(gamma_b * tail_factor) * math.exp(-tail_factor)
        if t0 >= t_end:
            return min(1.0, closed), 0.0, True

        def panel(A, K, a, b):
            return gk15(lambda t: math.exp(A + K * math.log(t) - t), a, b)

        heap = []
        total = 0.0
        err = 0.0
        a = t0
        for i in range(1, n):
            b = 10.0 ** (s[i] / 10.0) / gamma_b
            if i == n - 1 or b >= t_end:
                b = t_end
            if b > a:
                A, K = self._segment(i - 1, lg)
                v, e = panel(A, K, a, b)
                total += v
                err += e
                heap.append((-e, a, b, v, A, K))
                a = b
            if b >= t_end:
                break
        heapq.heapify(heap)
        n_sub = 0
        ok = True
        while err > max(rel_tol * abs(total), rel_tol * closed, 1e-300):
            if n_sub >= max_sub:
                ok = False
                break
            neg_e, a, b, v, A, K = heapq.heappop(heap)
            m = 0.5 * (a + b)
            if not a < m < b:
                ok = False
                break
            v1, e1 = panel(A, K, a, m)
            v2, e2 = panel(A, K, m, b)
            total += v1 + v2 - v
            err += e1 + e2 + neg_e
            heapq.heappush(heap, (-e1, a, m, v1, A, K))
            heapq.heappush(heap, (-e2, m, b, v2, A, K))
            n_sub += 1
        return min(1.0, max(0.0, total + closed)), err, ok
