"""Exemplar selection over pooled-activation covariance.

Codes that stay correlated after pooling are redundant; affinity
propagation over a correlation-derived similarity matrix picks one
exemplar per redundant group.  A bisection search on the shared
preference value drives the exemplar count to exactly K.
"""

from dataclasses import dataclass

import numpy as np

DEFAULT_DAMPING = 0.9
DEFAULT_MAX_ITERS = 1000
DEFAULT_CONVERGENCE_WINDOW = 50
DEFAULT_SEARCH_BUDGET = 20
VARIANCE_FLOOR_FACTOR = 1e-12


class DegenerateInputError(ValueError):
    """No live codes survive the variance floor."""


@dataclass
class CovarianceMatrix:
    C: np.ndarray          # (m, m), symmetric
    sample_count: int
    means: np.ndarray      # (m,)


@dataclass
class SimilarityMatrix:
    """Pairwise code similarity 2*C_ij/sqrt(C_ii*C_jj) - 2.

    Off-diagonals lie in [-4, 0]; the diagonal carries the affinity
    propagation preference for live codes and -inf for dead ones (codes
    whose pooled variance fell below the floor, which may never become
    exemplars).
    """

    S: np.ndarray          # (m, m)
    preference: float
    dead: np.ndarray       # (m,) bool

    def with_preference(self, preference):
        S = self.S.copy()
        np.fill_diagonal(S, np.where(self.dead, -np.inf, preference))
        return SimilarityMatrix(S=S, preference=preference, dead=self.dead)


@dataclass
class ExemplarSet:
    indices: np.ndarray      # sorted selected code indices
    assignment: np.ndarray   # (m,) exemplar index per code
    preference_used: float

    @property
    def k(self):
        return len(self.indices)

    def members(self, exemplar):
        """Codes assigned to one exemplar (the exemplar itself included)."""
        return np.nonzero(self.assignment == exemplar)[0]


def estimate_covariance(pooled):
    """Sample covariance (1/(N-1)) of pooled feature rows."""
    pooled = np.asarray(pooled, dtype=np.float64)
    n = pooled.shape[0]
    if n < 2:
        raise ValueError("need at least 2 samples to estimate covariance")
    means = pooled.mean(axis=0)
    centered = pooled - means
    C = centered.T @ centered / (n - 1)
    C = (C + C.T) / 2.0
    return CovarianceMatrix(C=C, sample_count=n, means=means)


def build_similarity(cov, preference, variance_floor=None):
    """Similarity matrix from a pooled covariance.

    Codes with variance below the floor are marked dead: their rows take
    the matrix minimum, their diagonal the -inf sentinel, so affinity
    propagation can never elect them.
    """
    C = cov.C
    m = C.shape[0]
    diag = np.diag(C).copy()
    if variance_floor is None:
        variance_floor = VARIANCE_FLOOR_FACTOR * max(diag.max(), 0.0)
    if variance_floor <= 0:
        variance_floor = np.finfo(np.float64).tiny
    dead = diag < variance_floor
    if dead.all():
        raise DegenerateInputError("every code is dead (zero pooled "
                                   "variance); nothing to select from")
    safe = np.where(dead, 1.0, diag)
    denom = np.sqrt(safe[:, None] * safe[None, :])
    S = 2.0 * C / denom - 2.0
    live_off = S[~dead][:, ~dead]
    np.fill_diagonal(live_off, 0.0)
    s_min = live_off.min() if live_off.size else -4.0
    S[dead, :] = s_min
    S[:, dead] = s_min
    np.fill_diagonal(S, np.where(dead, -np.inf, preference))
    return SimilarityMatrix(S=S, preference=preference, dead=dead)


def _finite_floor(S):
    """A finite stand-in for the -inf dead-code sentinel.

    Message updates would produce NaNs on genuine infinities; a value far
    below every finite similarity keeps dead codes unelectable while
    staying NaN-free.
    """
    finite = S[np.isfinite(S)]
    if finite.size == 0:
        return -1.0
    span = max(finite.max() - finite.min(), 1.0)
    return finite.min() - 1000.0 * span * S.shape[0]


def affinity_propagation(sim, damping=DEFAULT_DAMPING,
                         max_iters=DEFAULT_MAX_ITERS,
                         convergence_window=DEFAULT_CONVERGENCE_WINDOW):
    """Responsibility/availability message passing over a similarity matrix.

    Messages start at zero; each iteration computes the standard
    responsibility and availability updates from the previous full state
    and blends new <- damping * old + (1 - damping) * new.  The run stops
    once the exemplar set, read per point from argmax_k a(i,k) + r(i,k),
    is unchanged for `convergence_window` consecutive iterations AND the
    messages themselves have stopped moving: under heavy damping the
    argmax map can plateau for long stretches while availabilities are
    still accumulating, so set-stability alone stops too early.  Ties
    break toward the lowest index.
    """
    if not 0.5 <= damping < 1.0:
        raise ValueError("damping must lie in [0.5, 1)")
    S_in = sim.S
    m = S_in.shape[0]
    dead = sim.dead
    if m == 1:
        if dead[0]:
            raise DegenerateInputError("sole code is dead")
        return ExemplarSet(indices=np.array([0]),
                           assignment=np.zeros(1, dtype=np.int64),
                           preference_used=sim.preference)

    S = S_in.copy()
    S[~np.isfinite(S)] = _finite_floor(S_in)

    # exactly symmetric inputs (duplicate codes) make the messages
    # oscillate into degenerate ties; a deterministic jitter far below
    # the similarity scale breaks them without moving real optima
    finite = S_in[np.isfinite(S_in)]
    span = float(finite.max() - finite.min()) if finite.size else 1.0
    jitter = np.random.default_rng(0).standard_normal((m, m))
    S = S + jitter * max(span, 1.0) * 1e-9

    R = np.zeros((m, m))
    A = np.zeros((m, m))
    idx = np.arange(m)
    message_tol = 1e-8 * max(span, 1.0)
    current = None
    stable = 0
    for _ in range(max_iters):
        # responsibilities: r(i,k) = s(i,k) - max_{k' != k} (a + s)(i,k')
        AS = A + S
        first_arg = np.argmax(AS, axis=1)
        first = AS[idx, first_arg]
        AS[idx, first_arg] = -np.inf
        second = np.max(AS, axis=1)
        R_new = S - first[:, None]
        R_new[idx, first_arg] = S[idx, first_arg] - second
        delta = np.abs(R - R_new).max()
        R = damping * R + (1.0 - damping) * R_new

        # availabilities from positive responsibilities
        Rp = np.maximum(R, 0.0)
        np.fill_diagonal(Rp, R.diagonal())
        col = Rp.sum(axis=0)
        A_new = col[None, :] - Rp
        diag = A_new.diagonal().copy()
        A_new = np.minimum(A_new, 0.0)
        np.fill_diagonal(A_new, diag)
        delta = max(delta, np.abs(A - A_new).max())
        A = damping * A + (1.0 - damping) * A_new

        exemplar_of = np.argmax(A + R, axis=1)
        if current is not None and np.array_equal(exemplar_of, current):
            stable += 1
            if stable >= convergence_window and delta <= message_tol:
                break
        else:
            stable = 0
        current = exemplar_of

    return _finalize(S_in, A, R, dead, sim.preference)


def _finalize(S, A, R, dead, preference):
    """Exemplar set and assignments from the final message state.

    A code is an exemplar when its own a+r row is maximized at itself;
    other codes follow their row argmax when it lands on an exemplar and
    fall back to the most similar exemplar otherwise.
    """
    m = S.shape[0]
    exemplar_of = np.argmax(A + R, axis=1)
    self_elected = (exemplar_of == np.arange(m)) & ~dead
    exemplars = np.nonzero(self_elected)[0]
    if exemplars.size == 0:
        # no code elected itself: fall back to the candidate with the
        # largest preference plus collected positive responsibilities
        score = np.where(np.isfinite(np.diag(S)), np.diag(S), -np.inf)
        score = score + np.maximum(R, 0.0).sum(axis=0)
        score[dead] = -np.inf
        exemplars = np.array([int(np.argmax(score))])
    assignment = exemplar_of.copy()
    stray = ~np.isin(assignment, exemplars)
    if stray.any():
        assignment[stray] = _nearest_exemplar(S, exemplars)[stray]
    assignment[exemplars] = exemplars
    return ExemplarSet(indices=np.sort(exemplars),
                       assignment=assignment,
                       preference_used=preference)


def _nearest_exemplar(S, exemplars):
    """Most similar exemplar per code, lowest index on ties."""
    sub = S[:, exemplars]
    sub = np.where(np.isfinite(sub), sub, -np.inf)
    return exemplars[np.argmax(sub, axis=1)]


def select_k_exemplars(cov, k, damping=DEFAULT_DAMPING,
                       max_iters=DEFAULT_MAX_ITERS,
                       convergence_window=DEFAULT_CONVERGENCE_WINDOW,
                       search_budget=DEFAULT_SEARCH_BUDGET,
                       variance_floor=None):
    """Exactly k exemplars via bisection on the shared preference.

    Lower probe bound is (min off-diagonal) * m, upper is the max
    off-diagonal; the exemplar count grows with preference, which steers
    the bisection.  If the budget runs out before hitting k exactly, the
    smallest run with at least k exemplars is trimmed to the k exemplars
    with the largest within-cluster total similarity and the remaining
    codes are reassigned to their best surviving exemplar.
    """
    base = build_similarity(cov, preference=0.0,
                            variance_floor=variance_floor)
    m = base.S.shape[0]
    n_live = int(np.sum(~base.dead))
    if not 1 <= k <= n_live:
        raise ValueError(f"k must lie in 1..{n_live} (live codes), got {k}")

    off = base.S[~np.eye(m, dtype=bool)]
    off = off[np.isfinite(off)]
    lo = float(off.min()) * m
    hi = float(off.max())
    ap_kwargs = dict(damping=damping, max_iters=max_iters,
                     convergence_window=convergence_window)

    best_over = None  # smallest run with >= k exemplars
    for probe in range(search_budget):
        if probe == 0:
            pref = lo
        elif probe == 1:
            pref = hi
        else:
            pref = (lo + hi) / 2.0
        result = affinity_propagation(base.with_preference(pref), **ap_kwargs)
        count = result.k
        if count == k:
            return result
        if count > k:
            if best_over is None or count < best_over.k:
                best_over = result
            hi = pref
        else:
            lo = pref

    if best_over is None:
        # even the max-off-diagonal probe stayed under k; a preference
        # above every similarity makes all live codes exemplars
        pref = 1.0
        result = affinity_propagation(base.with_preference(pref), **ap_kwargs)
        if result.k < k:
            raise DegenerateInputError(
                f"could not reach {k} exemplars (best {result.k})")
        if result.k == k:
            return result
        best_over = result

    return _trim_to_k(base, best_over, k)


def _trim_to_k(base, result, k):
    """Keep the k exemplars with the largest within-cluster similarity."""
    S = base.S
    scores = np.empty(result.k)
    for pos, ex in enumerate(result.indices):
        members = result.members(ex)
        members = members[members != ex]
        scores[pos] = S[members, ex].sum() if members.size else 0.0
    order = np.argsort(-scores, kind="stable")
    survivors = np.sort(result.indices[order[:k]])
    assignment = _nearest_exemplar(S, survivors)
    assignment[survivors] = survivors
    return ExemplarSet(indices=survivors, assignment=assignment,
                       preference_used=result.preference_used)
