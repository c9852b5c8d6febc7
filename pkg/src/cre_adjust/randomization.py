"""Treatment assignment: sampling, exhaustive enumeration, and exact indicator moments."""
import itertools
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import InputError, ResourceError, UsageError

DEFAULT_ENUM_CAP = 2_000_000


@dataclass(frozen=True)
class Design:
    kind: str  # "cre" or "bernoulli"
    n: int
    n1: int | None
    pi1: float

    @property
    def pi0(self):
        return 1.0 - self.pi1

    @property
    def odds(self):
        """pi0 / pi1, the factor that shows up in nearly every variance formula."""
        return self.pi0 / self.pi1

    @property
    def is_cre(self):
        return self.kind == "cre"


def cre(n, n1):
    n, n1 = int(n), int(n1)
    if n < 1 or not 1 <= n1 <= n:
        raise UsageError(f"invalid CRE(n={n}, n1={n1})")
    return Design("cre", n, n1, n1 / n)


def bernoulli(n, pi1):
    if not 0 < pi1 < 1:
        raise UsageError(f"Bernoulli design needs 0 < pi1 < 1, got {pi1}")
    return Design("bernoulli", int(n), None, float(pi1))


def cre_from_ratio(n, pi1):
    """CRE with n1 = ceil(n * pi1); the realised pi1 is n1 / n."""
    return cre(n, math.ceil(n * pi1 - 1e-12))


def sample_assignment(d, gen):
    t = np.zeros(d.n, dtype=np.int8)
    if d.is_cre:
        t[gen.permutation(d.n)[: d.n1]] = 1
    else:
        t[:] = gen.random(d.n) < d.pi1
    return t


def sample_assignments(d, gen, K):
    """K independent assignments as a K x n 0/1 matrix."""
    return np.stack([sample_assignment(d, gen) for _ in range(K)]) if K else np.zeros((0, d.n), np.int8)


def count_assignments(d):
    if not d.is_cre:
        raise UsageError("enumeration is only defined for CRE designs")
    return math.comb(d.n, d.n1)


def _check_cap(d, cap):
    total = count_assignments(d)
    if total > cap:
        raise ResourceError(
            f"C({d.n},{d.n1}) = {total} assignments exceeds the enumeration cap {cap}; "
            "use Monte Carlo instead")
    return total


def enumerate_assignments(d, cap=DEFAULT_ENUM_CAP, start=0, stop=None):
    """Yield every CRE assignment once, treated sets in lexicographic order.

    start/stop select a contiguous slice of that order, so disjoint ranges can
    be handed to different workers.
    """
    _check_cap(d, cap)
    for treated in itertools.islice(itertools.combinations(range(d.n), d.n1), start, stop):
        t = np.zeros(d.n, dtype=np.int8)
        t[list(treated)] = 1
        yield t


def assignment_matrix(d, cap=DEFAULT_ENUM_CAP, start=0, stop=None):
    """All assignments (or a slice of them) stacked as rows, same order as enumerate_assignments."""
    total = _check_cap(d, cap)
    stop = total if stop is None else min(stop, total)
    rows = max(stop - start, 0)
    T = np.zeros((rows, d.n), dtype=np.int8)
    combos = itertools.islice(itertools.combinations(range(d.n), d.n1), start, stop)
    for r, treated in enumerate(combos):
        T[r, treated] = 1
    return T


def cre_product_moment(d, j):
    """E[t_1 ... t_j] for j distinct units."""
    j = int(j)
    if j < 0:
        raise UsageError("j must be non-negative")
    if j == 0:
        return 1.0
    if not d.is_cre:
        return d.pi1 ** j
    if j > d.n1:
        return 0.0
    out = d.pi1
    for i in range(1, j):
        out *= (d.n1 - i) / (d.n - i)
    return out


# Covariance patterns between a pair term (t_a/pi1 - 1) t_b and another term.
# Units are labelled 1..4 and always mean distinct units.
PAIR_PATTERNS = {
    "var": (2, 1),           # (t1/pi1-1)t2 with itself
    "swap": (2, 1),          # with (t2/pi1-1)t1
    "share_first": (1, 3),   # with (t1/pi1-1)t3
    "chain_out": (2, 3),     # with (t2/pi1-1)t3
    "chain_in": (3, 1),      # with (t3/pi1-1)t1
    "share_second": (3, 2),  # with (t3/pi1-1)t2
    "disjoint": (3, 4),      # with (t3/pi1-1)t4
}
SINGLE_PATTERNS = {
    "u_other": 3,   # cov((t1/pi1-1)t2, t3)
    "u_first": 1,   # cov((t1/pi1-1)t2, t1)
    "u_second": 2,  # cov((t1/pi1-1)t2, t2)
}
PATTERNS = tuple(PAIR_PATTERNS) + tuple(SINGLE_PATTERNS)


def _pair_poly(a, b, pi1):
    # (t_a/pi1 - 1) t_b as {index set: coefficient}, using t^2 = t
    return {frozenset((a, b)): 1.0 / pi1, frozenset((b,)): -1.0}


def _times(p, q):
    out = {}
    for s, c in p.items():
        for r, e in q.items():
            k = s | r
            out[k] = out.get(k, 0.0) + c * e
    return out


def _expect(poly, d):
    return sum(c * cre_product_moment(d, len(s)) for s, c in poly.items())


def _pattern_other(pattern, pi1):
    if pattern == "var":
        return _pair_poly(1, 2, pi1)
    if pattern in PAIR_PATTERNS:
        a, b = PAIR_PATTERNS[pattern]
        return _pair_poly(a, b, pi1)
    if pattern in SINGLE_PATTERNS:
        return {frozenset((SINGLE_PATTERNS[pattern],)): 1.0}
    raise UsageError(f"unknown covariance pattern {pattern!r}; known: {', '.join(PATTERNS)}")


def _min_units(pattern):
    return {"disjoint": 4, "var": 2, "swap": 2, "u_first": 2, "u_second": 2}.get(pattern, 3)


def cre_pair_covariance_scalar(d, pattern):
    """Exact covariance for one of the named index patterns.

    Computed by expanding both factors into products of indicators and taking
    E[t_1 ... t_k] from cre_product_moment, so it is valid for any design.
    """
    other = _pattern_other(pattern, d.pi1)
    if d.is_cre and d.n < _min_units(pattern):
        raise UsageError(f"pattern {pattern!r} needs n >= {_min_units(pattern)}")
    first = _pair_poly(1, 2, d.pi1)
    return _expect(_times(first, other), d) - _expect(first, d) * _expect(other, d)


def covariance_scalars(d):
    return {k: cre_pair_covariance_scalar(d, k) for k in PATTERNS if d.n >= _min_units(k)}


def written_covariance_scalars(d):
    """Written closed forms of the CRE covariance scalars, two algebraic versions each.

    Returns {pattern: (first_form, second_form)}. "chain_out" has no written
    closed form and is absent.
    """
    n, p = d.n, d.pi1
    q = 1 - p
    a = (n * p - 1) / (n - 1)
    b = (n * p - 1) * (n * p - 2) / ((n - 1) * (n - 2))
    c = (n * p - 1) * (n * p - 2) * (n * p - 3) / ((n - 1) * (n - 2) * (n - 3)) if n > 3 else float("nan")
    out = {
        "var": (
            p + (q / p - 1) * a - q**2 / (n - 1) ** 2,
            1 - p - q * (1 - 2 * p) / (p * (n - 1)) - q**2 / (n - 1) ** 2,
        ),
        "u_other": (
            b - 2 * p * a + p**2,
            -n * p * q / ((n - 1) * (n - 2)) + 2 * q**2 / ((n - 1) * (n - 2)),
        ),
        "u_first": (
            (1 - 2 * p) * a + p**2,
            p * q - q * (1 - 2 * p) / (n - 1),
        ),
        "u_second": (
            q * a - p * q,
            -(q**2) / (n - 1),
        ),
        "swap": (
            q**2 / p * a - q**2 / (n - 1) ** 2,
            q**2 - q**3 / (p * (n - 1)) - q**2 / (n - 1) ** 2,
        ),
        "share_first": (
            (1 / p - 2) * b + p * a - q**2 / (n - 1) ** 2,
            p * q - q**2 / (n - 1) - 2 * q * (1 - 2 * p) / (n - 2)
            + (2 / p - 5 + 1 / (n - 1)) * q**2 / ((n - 1) * (n - 2)),
        ),
        "chain_in": (
            -2 * q**2 / p * a / (n - 2) - q**2 / (n - 1) ** 2,
            -2 * q**2 / (n - 2) + (2 / p - 3 + 1 / (n - 1)) * q**2 / ((n - 1) * (n - 2)),
        ),
        "share_second": (
            b / p - 2 * a + p - q**2 / (n - 1) ** 2,
            -n * q / ((n - 1) * (n - 2)) - q**2 / (n - 1) ** 2 + 2 * q**2 / (p * (n - 1) * (n - 2)),
        ),
        "disjoint": (
            c / p - 2 * b + p * a - q**2 / (n - 1) ** 2,
            -p * q / (n - 2) + 3 * (2 - 3 * p) * q / ((n - 2) * (n - 3))
            - 3 * (2 - 3 * p) * q**2 / ((n - 1) * (n - 2) * (n - 3) * p)
            + q**2 / ((n - 1) ** 2 * (n - 2)),
        ),
    }
    return out


def _falling_ratio(d, start, stop):
    out = 1.0
    for i in range(start, stop + 1):
        out *= (d.n1 - i) / (d.n - i)
    return out


def cre_db_moment(d, m, y1, which, indices):
    """E[t_S tau_unadj] ("first") or E[t_S tau_unadj^2] ("second") for a set S of m distinct units."""
    if not d.is_cre:
        raise UsageError("cre_db_moment needs a CRE design")
    m = int(m)
    if m not in (1, 2, 3):
        raise UsageError(f"m must be 1, 2 or 3, got {m}")
    idx = tuple(int(i) for i in indices)
    if len(idx) != m or len(set(idx)) != m:
        raise UsageError("indices must be m distinct units")
    y = np.asarray(y1, dtype=float)
    if y.shape != (d.n,):
        raise InputError("outcome length does not match the design")
    n, pi0, pi1 = d.n, d.pi0, d.pi1
    taubar = float(np.mean(y))
    ys = y[list(idx)]
    s = float(np.sum(ys))
    if which == "first":
        return _falling_ratio(d, 1, m) * taubar + _falling_ratio(d, 1, m - 1) * pi0 / (n - m) * s
    if which != "second":
        raise UsageError("which must be 'first' or 'second'")
    tau2 = float(np.mean(y**2))
    r_m1 = _falling_ratio(d, 1, m + 1)
    r_m = _falling_ratio(d, 1, m)
    r_prev = _falling_ratio(d, 1, m - 1)
    # sum over unordered pairs r <= s inside S, diagonal included
    pair_sum = float(sum(ys[a] * ys[b] for a in range(m) for b in range(a, m)))
    return (r_m1 / pi1 * taubar**2
            + pi0 / pi1 * r_m / (n - m - 1) * tau2
            + pi0 / pi1 * r_m * 2 / (n - m - 1) * taubar * s
            - pi0 / pi1 * r_m * 2 / (n * (n - m - 1)) * pair_sum
            + pi0 / pi1 * r_prev / (n * (n - m)) * s**2)
