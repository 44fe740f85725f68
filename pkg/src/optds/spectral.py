"""Spectral method-of-moments initialization of worker confusion matrices.

Workers are split into three groups. The per-item average labels of the
groups behave like three conditionally independent views of the true class,
so their second and third cross moments determine each group's averaged
confusion matrix and the class prior through an orthogonal tensor
decomposition. Individual confusion matrices then follow from one more
cross moment against a different group.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import (
    IllConditionedMomentsError,
    NonConvergenceWarning,
    NotPositiveDefiniteError,
    TooFewWorkersError,
)
from .model import ObservedLabels, clamp_normalize

SIGMA_TOL = 1e-8
DEFAULT_RESTARTS = 30
DEFAULT_ITERS = 100
DEFAULT_DELTA = 1e-6
# (a, b, c), 0-based; pass c recovers the averaged confusion of group c
PERMUTATIONS = ((1, 2, 0), (2, 0, 1), (0, 1, 2))


@dataclass(frozen=True)
class GroupPartition:
    groups: tuple  # three int arrays of worker indices

    def __post_init__(self):
        allw = np.concatenate(self.groups)
        if len(self.groups) != 3 or any(len(g) == 0 for g in self.groups):
            raise ValueError("need three non-empty groups")
        if np.unique(allw).size != allw.size:
            raise ValueError("groups overlap")

    @property
    def num_workers(self) -> int:
        return int(sum(len(g) for g in self.groups))

    def group_of(self) -> np.ndarray:
        out = np.empty(self.num_workers, dtype=np.int64)
        for g, members in enumerate(self.groups):
            out[members] = g
        return out


@dataclass(frozen=True, eq=False)
class GroupMoments:
    perm: tuple
    za_prime: np.ndarray  # (n, k)
    zb_prime: np.ndarray  # (n, k)
    m2: np.ndarray  # (k, k), symmetrized
    m3: np.ndarray  # (k, k, k)


@dataclass(frozen=True, eq=False)
class TensorEigenpairs:
    eigenvalues: np.ndarray  # (k,)
    eigenvectors: np.ndarray  # (k, k), column h is v_h
    converged: np.ndarray  # (k,) bool
    residual: np.ndarray  # deflated tensor after k rounds


@dataclass(frozen=True, eq=False)
class GroupEstimate:
    confusion: np.ndarray  # aggregated confusion of one group, columns by class
    weights: np.ndarray  # prior estimate aligned with the columns
    raw_mu: np.ndarray  # (k, k), column h is the unmatched recovered vector
    raw_weights: np.ndarray
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    assignment: np.ndarray  # assignment[l] = h
    converged: bool = True


@dataclass(frozen=True, eq=False)
class SpectralResult:
    confusions: np.ndarray  # (m, k, k)
    prior: np.ndarray
    partition: GroupPartition
    group_estimates: tuple  # indexed by group
    converged: bool


def partition_workers(m: int, seed) -> GroupPartition:
    """Random split of ``range(m)`` into three groups whose sizes differ by at most one."""
    if m < 3:
        raise TooFewWorkersError(f"need at least 3 workers, got {m}")
    rng = np.random.default_rng(seed)
    perm = rng.permutation(m)
    return GroupPartition(tuple(np.sort(g) for g in np.array_split(perm, 3)))


def group_aggregate(labels: ObservedLabels, partition: GroupPartition) -> np.ndarray:
    """Per-group average label vectors, shape ``(3, n, k)``; absent labels count as zero."""
    gid = partition.group_of()
    sizes = np.array([len(g) for g in partition.groups], dtype=float)
    z = np.zeros((3, labels.num_items, labels.num_classes))
    np.add.at(z, (gid[labels.worker], labels.item, labels.label), 1.0)
    return z / sizes[:, None, None]


def _cross(x, y):
    return x.T @ y / x.shape[0]


def _check_invertible(s, sigma_tol):
    smin = np.linalg.svd(s, compute_uv=False)[-1]
    if not smin > sigma_tol:
        raise IllConditionedMomentsError(float(smin))


def empirical_moments(z: np.ndarray, perm, sigma_tol: float = SIGMA_TOL) -> GroupMoments:
    """Second and third moments of the symmetrized views for ``perm = (a, b, c)``."""
    a, b, c = perm
    za, zb, zc = z[a], z[b], z[c]
    s_ab = _cross(za, zb)
    _check_invertible(s_ab, sigma_tol)
    s_ba = s_ab.T
    # Z'_a = S_cb S_ab^{-1} Z_a  and  Z'_b = S_ca S_ba^{-1} Z_b
    ta = np.linalg.solve(s_ab.T, _cross(zc, zb).T).T
    tb = np.linalg.solve(s_ba.T, _cross(zc, za).T).T
    za_p = za @ ta.T
    zb_p = zb @ tb.T
    n = za.shape[0]
    m2 = za_p.T @ zb_p / n
    m2 = (m2 + m2.T) / 2
    m3 = np.einsum("ja,jb,jc->abc", za_p, zb_p, zc) / n
    return GroupMoments(tuple(perm), za_p, zb_p, m2, m3)


def population_moments(group_confusions, prior, perm) -> GroupMoments:
    """Exact moments for known aggregated group confusions ``(3, k, k)`` and prior.

    Uses the same view transformation as :func:`empirical_moments` with every
    sample average replaced by its expectation under conditional independence
    of the groups; the view arrays are left empty.
    """
    cd = np.asarray(group_confusions, dtype=float)
    w = np.asarray(prior, dtype=float)
    a, b, c = perm

    def s(x, y):
        return cd[x] @ np.diag(w) @ cd[y].T

    ta = s(c, b) @ np.linalg.inv(s(a, b))
    tb = s(c, a) @ np.linalg.inv(s(b, a))
    m2 = ta @ s(a, b) @ tb.T
    m2 = (m2 + m2.T) / 2
    m3 = np.einsum("l,al,bl,cl->abc", w, ta @ cd[a], tb @ cd[b], cd[c])
    k = w.size
    empty = np.zeros((0, k))
    return GroupMoments(tuple(perm), empty, empty, m2, m3)


def whiten(m2: np.ndarray, sigma_tol: float = SIGMA_TOL) -> np.ndarray:
    """Whitening matrix ``Q`` with ``Q.T @ m2 @ Q = I`` from the top-k eigenpairs."""
    m2 = (m2 + m2.T) / 2
    k = m2.shape[0]
    evals, evecs = np.linalg.eigh(m2)
    order = np.argsort(evals)[::-1][:k]
    evals, evecs = evals[order], evecs[:, order]
    if not (evals > sigma_tol).all():
        raise NotPositiveDefiniteError(
            f"second moment not positive definite (eigenvalue {evals.min():.3e})"
        )
    return evecs / np.sqrt(evals)


def multilinear(t: np.ndarray, a, b, c) -> np.ndarray:
    """``T(A, B, C)``: contract mode 1 with ``A``, mode 2 with ``B``, mode 3 with ``C``."""
    return np.einsum("xyz,xi,yj,zk->ijk", t, a, b, c)


def symmetrize(t: np.ndarray) -> np.ndarray:
    perms = [(0, 1, 2), (0, 2, 1), (1, 0, 2), (1, 2, 0), (2, 0, 1), (2, 1, 0)]
    return sum(np.transpose(t, p) for p in perms) / 6.0


def _power_iterations(t, theta, iters, tol):
    converged = False
    for _ in range(iters):
        nxt = np.einsum("ijk,j,k->i", t, theta, theta)
        nrm = np.linalg.norm(nxt)
        if nrm == 0:
            break
        nxt /= nrm
        done = float(nxt @ theta) >= 1.0 - tol
        theta = nxt
        if done:
            converged = True
            break
    return theta, converged


def robust_tensor_power(
    t: np.ndarray,
    restarts: int = DEFAULT_RESTARTS,
    iters: int = DEFAULT_ITERS,
    seed=None,
    tol: float = 1e-10,
) -> TensorEigenpairs:
    """Eigenpairs of a (nearly) orthogonally decomposable symmetric tensor.

    Each of ``k`` deflation rounds runs ``restarts`` random starts of up to
    ``iters`` power iterations, keeps the start with the largest ``T(v, v, v)``,
    polishes it with further iterations and deflates. A round whose polish
    does not reach ``v_new . v_old >= 1 - tol`` triggers a warning; the best
    iterate is returned anyway.
    """
    rng = np.random.default_rng(seed)
    t = np.array(t, dtype=float)
    k = t.shape[0]
    alphas = np.zeros(k)
    vecs = np.zeros((k, k))
    ok = np.zeros(k, dtype=bool)
    for h in range(k):
        best, best_val = None, -np.inf
        for _ in range(restarts):
            theta = rng.standard_normal(k)
            theta /= np.linalg.norm(theta)
            theta, _ = _power_iterations(t, theta, iters, tol)
            val = float(np.einsum("ijk,i,j,k->", t, theta, theta, theta))
            if val > best_val:
                best, best_val = theta, val
        theta, ok[h] = _power_iterations(t, best, iters, tol)
        alpha = float(np.einsum("ijk,i,j,k->", t, theta, theta, theta))
        alphas[h], vecs[:, h] = alpha, theta
        t = t - alpha * np.einsum("i,j,k->ijk", theta, theta, theta)
    if not ok.all():
        warnings.warn(
            f"tensor power method did not converge for {int((~ok).sum())} of {k} "
            "eigenpairs",
            NonConvergenceWarning,
            stacklevel=2,
        )
    return TensorEigenpairs(alphas, vecs, ok, t)


def recover_from_eigenpairs(q: np.ndarray, pairs: TensorEigenpairs):
    """Map whitened eigenpairs back: weights ``alpha^-2`` and vectors ``(Q^T)^-1 alpha v``."""
    alphas = pairs.eigenvalues
    with np.errstate(divide="ignore"):
        weights = alphas ** -2.0
    mu = np.linalg.solve(q.T, pairs.eigenvectors * alphas)
    return mu, weights


def match_columns(mu: np.ndarray, weights: np.ndarray, seed=None, tie_break: str = "diagonal"):
    """Assign recovered vectors to classes by their largest coordinate.

    Returns ``(confusion, weights, assignment)`` with column ``l`` of
    ``confusion`` equal to ``mu[:, assignment[l]]``; ``assignment`` is always a
    permutation. A vector that is the only one peaking at ``l`` goes to
    column ``l``. Contested and empty columns are resolved by ``tie_break``:

    ``"random"``    each contested column draws one of its candidates, empty
                    columns draw from the leftovers.
    ``"diagonal"``  the remaining vectors and columns are paired to maximize
                    the sum of the diagonal entries they produce.
    """
    rng = np.random.default_rng(seed)
    k = mu.shape[1]
    peak = mu.argmax(axis=0)
    assignment = np.full(k, -1, dtype=np.int64)
    used = np.zeros(k, dtype=bool)
    counts = np.bincount(peak, minlength=k)
    for l in range(k):
        if counts[l] == 1:
            h = int(np.flatnonzero(peak == l)[0])
            assignment[l], used[h] = h, True
    if tie_break == "random":
        for l in range(k):
            cand = np.flatnonzero((peak == l) & ~used)
            if assignment[l] < 0 and cand.size:
                h = int(rng.choice(cand))
                assignment[l], used[h] = h, True
        for l in np.flatnonzero(assignment < 0):
            h = int(rng.choice(np.flatnonzero(~used)))
            assignment[l], used[h] = h, True
    elif tie_break == "diagonal":
        cols = np.flatnonzero(assignment < 0)
        if cols.size:
            free = np.flatnonzero(~used)
            # gain[r, s] = coordinate cols[r] of vector free[s]
            r, c = linear_sum_assignment(mu[np.ix_(cols, free)], maximize=True)
            assignment[cols[r]] = free[c]
    else:
        raise ValueError(f"unknown tie_break {tie_break!r}")
    return mu[:, assignment], np.asarray(weights)[assignment], assignment


def decompose_moments(
    moments: GroupMoments,
    restarts: int = DEFAULT_RESTARTS,
    iters: int = DEFAULT_ITERS,
    seed=None,
    sigma_tol: float = SIGMA_TOL,
    tie_break: str = "diagonal",
) -> GroupEstimate:
    """Whiten, decompose and match one permutation's moments."""
    rng = np.random.default_rng(seed)
    q = whiten(moments.m2, sigma_tol)
    t = symmetrize(multilinear(moments.m3, q, q, q))
    pairs = robust_tensor_power(t, restarts, iters, seed=rng)
    mu, weights = recover_from_eigenpairs(q, pairs)
    conf, w, assignment = match_columns(mu, weights, seed=rng, tie_break=tie_break)
    return GroupEstimate(
        conf,
        w,
        mu,
        weights,
        pairs.eigenvalues,
        pairs.eigenvectors,
        assignment,
        bool(pairs.converged.all()),
    )


def average_prior(weights, delta: float = DEFAULT_DELTA) -> np.ndarray:
    """Mean of the aligned prior estimates, floored at ``delta`` and renormalized."""
    w = np.maximum(np.mean(np.asarray(weights, dtype=float), axis=0), delta)
    return w / w.sum()


def recover_worker_confusions(
    labels: ObservedLabels,
    partition: GroupPartition,
    group_confusions,
    prior: np.ndarray,
    delta: float = DEFAULT_DELTA,
    z: np.ndarray = None,
    sigma_tol: float = SIGMA_TOL,
) -> np.ndarray:
    """Individual confusions from the cross moment with another group's average.

    Worker ``i`` in group ``g`` uses group ``a = (g + 1) mod 3``:
    ``normalize(clamp(E[z_i Z_a^T] (W C_a^T)^{-1}, delta))``.
    """
    if z is None:
        z = group_aggregate(labels, partition)
    m, n, k = labels.num_workers, labels.num_items, labels.num_classes
    gid = partition.group_of()
    other = (gid + 1) % 3
    # cross[i] = (1/n) sum_j z_ij Z_{a(i), j}^T
    cross = np.zeros((m, k, k))
    np.add.at(cross, (labels.worker, labels.label), z[other[labels.worker], labels.item])
    cross /= n
    out = np.empty((m, k, k))
    for a in range(3):
        denom = np.diag(prior) @ np.asarray(group_confusions[a]).T
        smin = np.linalg.svd(denom, compute_uv=False)[-1]
        if not smin > sigma_tol:
            raise IllConditionedMomentsError(float(smin))
        members = other == a
        # X denom^{-1} for each member X
        out[members] = np.linalg.solve(denom.T, cross[members].transpose(0, 2, 1)).transpose(
            0, 2, 1
        )
    return clamp_normalize(out, delta)


def spectral_init(
    labels: ObservedLabels,
    seed=None,
    delta: float = DEFAULT_DELTA,
    restarts: int = DEFAULT_RESTARTS,
    iters: int = DEFAULT_ITERS,
    partition: GroupPartition = None,
    sigma_tol: float = SIGMA_TOL,
    tie_break: str = "diagonal",
) -> SpectralResult:
    """Full first stage: partition, moments, decomposition, per-worker recovery."""
    part_seed, tensor_seed = np.random.SeedSequence(seed).spawn(2)
    if partition is None:
        partition = partition_workers(labels.num_workers, part_seed)
    z = group_aggregate(labels, partition)
    rng = np.random.default_rng(tensor_seed)
    # moments of every permutation first: fail before any decomposition work
    moments = [empirical_moments(z, p, sigma_tol) for p in PERMUTATIONS]
    estimates = [None, None, None]
    for mom in moments:
        estimates[mom.perm[2]] = decompose_moments(
            mom, restarts, iters, rng, sigma_tol, tie_break
        )
    converged = all(e.converged for e in estimates)
    prior = average_prior([e.weights for e in estimates], delta)
    confusions = recover_worker_confusions(
        labels, partition, [e.confusion for e in estimates], prior, delta, z, sigma_tol
    )
    return SpectralResult(confusions, prior, partition, tuple(estimates), converged)
