"""Leading spectra of sparse nonsymmetric Markov matrices and their
mapping to generator resonances.

The iterative solver is an implicitly restarted Arnoldi method in the
Krylov-Schur formulation: a Krylov decomposition ``A V = V H + v b^T`` is
expanded to the full subspace dimension, the Rayleigh matrix is reduced
to ordered real Schur form, and the factorization is truncated to the
invariant subspace of the wanted (largest modulus) Ritz values.  Working
in real arithmetic keeps complex-conjugate structure exact through the
restarts, and converged Ritz directions persist at the front of the
compressed basis, which deflates them from further iteration.  A dense
eigendecomposition is used instead below ``dense_threshold``.

Left eigenvectors come from the same procedure applied to the transpose
and are matched to right pairs by eigenvalue proximity.  A stored left
vector ``u`` satisfies ``u^H T = zeta u^H``.

Generator eigenvalues use the principal logarithm, ``lambda = (log|zeta|
+ i arg zeta) / tau`` with the argument in [-pi, pi).  Because the
argument folds at ``|Im lambda| = pi / tau``, resonances are preferably
estimated from the eigenvalue ratio of two matrices at nearby lags,
``lambda = log(zeta_b / zeta_a) / dlag``, which pushes the folding limit
out to ``pi / dlag``.
"""

from __future__ import annotations

import cmath
import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.linalg
import scipy.sparse as sparse
from scipy.optimize import linear_sum_assignment

from .errors import (
    ConvergenceError,
    EmptyPairingError,
    ValidationError,
)
from .hopf import GaussianStream
from .transfer import TransitionMatrix

__all__ = [
    "EigenPair",
    "Resonance",
    "ResonanceSet",
    "leading_eigenpairs",
    "condition_number",
    "to_generator",
    "pair_and_ratio",
    "single_lag_resonances",
    "filter_and_sort",
]

_START_SEED = 0x7A2F_51E9
_BREAKDOWN_TOL = 1e-12


@dataclass(frozen=True)
class EigenPair:
    """One eigenvalue with unit right vector, left vector, and residual bound."""

    value: complex
    right: np.ndarray = field(repr=False)
    left: np.ndarray = field(repr=False)
    residual: float = 0.0


@dataclass(frozen=True)
class Resonance:
    """A generator eigenvalue with its vectors and robustness diagnostics."""

    value: complex
    value_single: complex
    kappa: float
    pair_quality: float
    right: np.ndarray = field(repr=False)
    left: np.ndarray = field(repr=False)


@dataclass(frozen=True)
class ResonanceSet:
    lag: float
    dlag: float
    resonances: list[Resonance]
    n_dropped: int = 0

    def values(self) -> np.ndarray:
        return np.array([r.value for r in self.resonances])


# ---------------------------------------------------------------------------
# deterministic start / replacement vectors


def _vector_stream(n: int):
    stream = GaussianStream(_START_SEED)
    while True:
        yield stream.draw_pairs((n + 1) // 2).ravel()[:n]


def _orthonormalize_against(v: np.ndarray, basis: np.ndarray) -> np.ndarray | None:
    nrm0 = np.linalg.norm(v)
    for _ in range(2):
        if basis.shape[1]:
            v = v - basis @ (basis.T @ v)
    nrm = np.linalg.norm(v)
    if nrm < 1e-8 * max(nrm0, 1.0):
        return None
    return v / nrm


# ---------------------------------------------------------------------------
# Krylov-Schur iteration (real arithmetic)


def _expand(matvec, V, H, j_start, m):
    """Arnoldi-expand the Krylov decomposition from column j_start to m.

    Returns the reached basis size (== m unless the space closed early).
    """
    n = V.shape[0]
    fresh = _vector_stream(n)
    for j in range(j_start, m):
        w = matvec(V[:, j])
        # modified Gram-Schmidt with one reorthogonalization pass
        for _ in range(2):
            for i in range(j + 1):
                c = V[:, i] @ w
                H[i, j] += c
                w -= c * V[:, i]
        h = np.linalg.norm(w)
        scale = max(np.linalg.norm(H[: j + 2, j]), 1.0)
        if h <= _BREAKDOWN_TOL * scale:
            # invariant subspace found: deflate and continue with a fresh direction
            H[j + 1, j] = 0.0
            replacement = None
            for _ in range(3):
                replacement = _orthonormalize_against(next(fresh), V[:, : j + 1])
                if replacement is not None:
                    break
            if replacement is None:
                return j + 1  # whole space exhausted
            V[:, j + 1] = replacement
        else:
            H[j + 1, j] = h
            V[:, j + 1] = w / h
    return m


def _ritz_order(theta: np.ndarray) -> np.ndarray:
    return np.lexsort((-theta.imag, -theta.real, -np.abs(theta)))


def _closure_extend(theta: np.ndarray, order: np.ndarray, k: int, k_max: int) -> int:
    """Smallest k_eff >= k such that order[:k_eff] is conjugate-closed."""
    k_eff = k
    while k_eff < min(k_max, order.size):
        sel = theta[order[:k_eff]]
        closed = True
        for v in sel:
            if abs(v.imag) <= 1e-10 * max(1.0, abs(v)):
                continue
            dist = np.abs(sel - v.conjugate())
            if dist.min() > 1e-6 * max(1.0, abs(v)):
                closed = False
                break
        if closed:
            return k_eff
        k_eff += 1
    return k_eff


def _truncation_size(moduli_sorted: np.ndarray, k: int, m: int) -> int | None:
    """Pick a restart size in (k, m-1] at a strict modulus gap."""
    target = min(m - 2, max(k + 4, k + (m - k) // 2))
    for p in range(target, k, -1):
        if moduli_sorted[p - 1] > moduli_sorted[p] * (1 + 1e-12):
            return p
    for p in range(target + 1, m - 1):
        if moduli_sorted[p - 1] > moduli_sorted[p] * (1 + 1e-12):
            return p
    return None


def _eigs_iterative(matvec, n, k, tol, max_restarts, subspace):
    """Largest-modulus eigenpairs of a real n x n operator.

    Returns (values, vectors, residual_estimates) for at least k pairs,
    extended if needed to close conjugate pairs.
    """
    m = min(subspace, n)
    if k > m - 1 and m < n:
        raise ValidationError(f"subspace dimension {m} too small for k={k}")
    V = np.zeros((n, m + 1), order="F")
    H = np.zeros((m + 1, m))
    start = next(_vector_stream(n))
    V[:, 0] = start / np.linalg.norm(start)
    p = 0
    for cycle in range(max_restarts + 1):
        m_eff = _expand(matvec, V, H, p, m)
        Hm = H[:m_eff, :m_eff]
        beta = H[m_eff, m_eff - 1]
        theta, Y = np.linalg.eig(Hm)
        res_est = abs(beta) * np.abs(Y[m_eff - 1, :])
        order = _ritz_order(theta)
        k_eff = _closure_extend(theta, order, min(k, m_eff), m_eff)
        wanted = order[:k_eff]
        if np.all(res_est[wanted] <= tol):
            X = V[:, :m_eff] @ Y[:, wanted]
            X /= np.linalg.norm(X, axis=0)
            return theta[wanted], X, res_est[wanted]
        if cycle == max_restarts:
            break
        # ordered real Schur truncation of the Rayleigh matrix
        moduli = np.abs(theta[order])
        p_new = _truncation_size(moduli, k_eff, m)
        if p_new is not None:
            thr = 0.5 * (moduli[p_new - 1] + moduli[p_new])
            T, Z, sdim = scipy.linalg.schur(
                Hm, output="real", sort=lambda re, im: np.hypot(re, im) > thr
            )
        if p_new is None or sdim < k_eff or sdim > m - 1:
            # no usable modulus gap: restart from the wanted Ritz combination
            v0 = np.real(V[:, :m_eff] @ Y[:, wanted].sum(axis=1))
            nrm = np.linalg.norm(v0)
            if nrm < 1e-12:
                v0 = next(_vector_stream(n))
                nrm = np.linalg.norm(v0)
            V[:, 0] = v0 / nrm
            H[:] = 0.0
            p = 0
            continue
        b = beta * Z[m_eff - 1, :sdim]
        v_next = V[:, m_eff].copy()
        V[:, :sdim] = V[:, :m_eff] @ Z[:, :sdim]
        H[:] = 0.0
        H[:sdim, :sdim] = T[:sdim, :sdim]
        if abs(beta) > 0:
            V[:, sdim] = v_next
            H[sdim, :sdim] = b
        else:
            repl = _orthonormalize_against(next(_vector_stream(n)), V[:, :sdim])
            V[:, sdim] = repl if repl is not None else 0.0
        p = sdim
    raise ConvergenceError(
        f"Arnoldi did not reach residual {tol:g} for {k} pairs "
        f"within {max_restarts} restarts (subspace {m})"
    )


def _eigs_dense(a: np.ndarray, k: int):
    theta, Y = np.linalg.eig(a)
    order = _ritz_order(theta)
    k_eff = _closure_extend(theta, order, k, theta.size)
    wanted = order[:k_eff]
    X = Y[:, wanted]
    X /= np.linalg.norm(X, axis=0)
    return theta[wanted], X, np.zeros(k_eff)


# ---------------------------------------------------------------------------
# post-processing


def _fix_phase(v: np.ndarray) -> np.ndarray:
    am = int(np.argmax(np.abs(v)))
    pivot = v[am]
    if pivot == 0:
        return v
    return v * (abs(pivot) / pivot)


def _symmetrize(values: np.ndarray, vectors: np.ndarray):
    """Enforce exact conjugate closure of a spectrum of a real matrix."""
    values = values.astype(complex).copy()
    vectors = vectors.astype(complex).copy()
    done = np.zeros(values.size, dtype=bool)
    for i in range(values.size):
        if done[i]:
            continue
        cand = np.abs(values - values[i].conjugate())
        cand[done] = np.inf
        j = int(np.argmin(cand))
        if cand[j] > 1e-6 * max(1.0, abs(values[i])):
            # solitary value: realify only when essentially real already
            if abs(values[i].imag) <= 1e-10 * max(1.0, abs(values[i])):
                values[i] = values[i].real
                v = _fix_phase(vectors[:, i])
                v = v.real.astype(complex)
                nrm = np.linalg.norm(v)
                if nrm > 0:
                    vectors[:, i] = v / nrm
            done[i] = True
            continue
        if j == i:
            values[i] = values[i].real
            v = _fix_phase(vectors[:, i])
            v = v.real.astype(complex)
            nrm = np.linalg.norm(v)
            if nrm > 0:
                vectors[:, i] = v / nrm
            done[i] = True
        else:
            mu = 0.5 * (values[i] + values[j].conjugate())
            values[i] = mu
            values[j] = mu.conjugate()
            vectors[:, i] = _fix_phase(vectors[:, i])
            vectors[:, j] = vectors[:, i].conjugate()
            done[i] = done[j] = True
    return values, vectors


def _as_operator(T):
    if isinstance(T, TransitionMatrix):
        return T.matrix
    if sparse.issparse(T):
        return T
    return np.asarray(T, dtype=np.float64)


def leading_eigenpairs(
    T,
    k: int,
    tol: float = 1e-9,
    method: str = "auto",
    dense_threshold: int = 512,
    max_restarts: int = 30,
    subspace: int | None = None,
) -> list[EigenPair]:
    """The k eigenvalues of largest modulus with right and left eigenvectors.

    ``T`` may be a :class:`TransitionMatrix`, a scipy sparse matrix, or a
    dense array.  For dimensions at or below ``dense_threshold`` (or with
    ``method="dense"``) a full dense eigendecomposition is truncated to k;
    otherwise the restarted Arnoldi solver runs on the sparse operator and
    on its transpose.  The returned list may exceed k by the minimal
    number of pairs needed to keep the spectrum conjugate-closed.
    """
    a = _as_operator(T)
    n = a.shape[0]
    if n != a.shape[1]:
        raise ValidationError("operator must be square")
    use_dense = method == "dense" or (method == "auto" and n <= dense_threshold)
    if method not in ("auto", "dense", "arnoldi"):
        raise ValidationError(f"unknown method {method!r}")
    if not 1 <= k <= n:
        raise ValidationError(f"need 1 <= k <= dim, got k={k}, dim={n}")
    if not use_dense and k >= n:
        raise ValidationError("iterative path requires k < dim")

    if use_dense:
        dense = a.toarray() if sparse.issparse(a) else a
        vals_r, vecs_r, _ = _eigs_dense(dense, k)
        vals_l, vecs_l, _ = _eigs_dense(dense.T, vals_r.size)
    else:
        m = subspace if subspace is not None else max(2 * k + 10, 40)
        csc = a.tocsc() if sparse.issparse(a) else a
        csr = csc.T
        vals_r, vecs_r, _ = _eigs_iterative(lambda v: csc @ v, n, k, tol, max_restarts, m)
        vals_l, vecs_l, _ = _eigs_iterative(lambda v: csr @ v, n, vals_r.size, tol, max_restarts, m)

    vals_r, vecs_r = _symmetrize(vals_r, vecs_r)
    vals_l, vecs_l = _symmetrize(vals_l, vecs_l)

    # match left set to right set by eigenvalue proximity
    cost = np.abs(vals_r[:, None] - vals_l[None, :])
    rows, cols = linear_sum_assignment(cost)
    pairs = []
    for i, j in zip(rows, cols):
        zeta = vals_r[i]
        mismatch = abs(zeta - vals_l[j])
        if mismatch > 1e-8 * max(1.0, abs(zeta)):
            warnings.warn(
                f"left/right eigenvalue mismatch {mismatch:.2e} at zeta={zeta:.6g}; pair dropped",
                stacklevel=2,
            )
            continue
        right = vecs_r[:, i]
        left = vecs_l[:, j].conjugate()  # stored so that left^H T = zeta left^H
        res_r = np.linalg.norm(a @ right - zeta * right)
        res_l = np.linalg.norm(a.T @ vecs_l[:, j] - zeta * vecs_l[:, j])
        pairs.append(EigenPair(value=zeta, right=right, left=left, residual=float(max(res_r, res_l))))
    pairs.sort(key=lambda p: (-abs(p.value), -p.value.real, -p.value.imag))
    return pairs


def condition_number(pair: EigenPair, m: np.ndarray) -> float:
    """Eigenvalue condition number under the m-weighted inner product.

    kappa = ||left||_m ||right||_m / |<left, right>_m| >= 1; large values
    flag eigenvalues that are sensitive to estimation noise.  Returns
    ``inf`` when the inner product is numerically zero.
    """
    w = np.asarray(m, dtype=np.float64)
    w = np.where(w > 0, w, 0.0)
    nl = math.sqrt(float(np.sum(w * np.abs(pair.left) ** 2)))
    nr = math.sqrt(float(np.sum(w * np.abs(pair.right) ** 2)))
    inner = abs(np.sum(w * pair.left.conjugate() * pair.right))
    if inner < 1e-14:
        return math.inf
    return nl * nr / inner


def to_generator(zeta: complex, tau: float) -> complex:
    """Map a transition-matrix eigenvalue to a generator eigenvalue.

    lambda = (log|zeta| + i arg zeta) / tau with arg in [-pi, pi).
    """
    if tau <= 0:
        raise ValidationError(f"tau must be positive, got {tau}")
    if zeta == 0:
        raise ValidationError("zeta = 0 has no finite generator eigenvalue")
    a = cmath.phase(zeta)
    if a == math.pi:
        a = -math.pi
    return complex(math.log(abs(zeta)) / tau, a / tau)


def _quality_matrix(vecs_a, vecs_b, m):
    w = np.asarray(m, dtype=np.float64)
    w = np.where(w > 0, w, 0.0)
    wa = vecs_a.conjugate() * w[:, None]
    num = np.abs(wa.T @ vecs_b)
    na = np.sqrt(np.sum(w[:, None] * np.abs(vecs_a) ** 2, axis=0))
    nb = np.sqrt(np.sum(w[:, None] * np.abs(vecs_b) ** 2, axis=0))
    denom = np.outer(na, nb)
    with np.errstate(invalid="ignore", divide="ignore"):
        q = np.where(denom > 0, num / denom, 0.0)
    return q


def _match_greedy(q: np.ndarray, threshold: float):
    matches = []
    used_a = np.zeros(q.shape[0], dtype=bool)
    used_b = np.zeros(q.shape[1], dtype=bool)
    flat = np.argsort(q, axis=None)[::-1]
    for f in flat:
        i, j = divmod(int(f), q.shape[1])
        if q[i, j] < threshold:
            break
        if used_a[i] or used_b[j]:
            continue
        matches.append((i, j))
        used_a[i] = True
        used_b[j] = True
    return matches


def _match_optimal(q: np.ndarray, threshold: float):
    rows, cols = linear_sum_assignment(-q)
    return [(int(i), int(j)) for i, j in zip(rows, cols) if q[i, j] >= threshold]


def _conjugate_partners(vectors: list[np.ndarray]) -> list[int]:
    """partner[i] = j when vector j is the exact conjugate of vector i."""
    partner = list(range(len(vectors)))
    for i in range(len(vectors)):
        for j in range(i, len(vectors)):
            if np.array_equal(vectors[j], vectors[i].conjugate()):
                partner[i] = j
                partner[j] = i
                break
    return partner


def _symmetrize_matched_values(values: list[complex], partner: list[int]) -> list[complex]:
    out = list(values)
    for i, j in enumerate(partner):
        if j < i:
            continue
        if j == i:
            if abs(out[i].imag) < 1e-10 * max(1.0, abs(out[i])):
                out[i] = complex(out[i].real, 0.0)
        else:
            mu = 0.5 * (values[i] + values[j].conjugate())
            out[i] = mu
            out[j] = mu.conjugate()
    return out


def _sort_resonances(resonances: list[Resonance]) -> list[Resonance]:
    return sorted(
        resonances,
        key=lambda r: (-r.value.real, abs(r.value.imag), -r.value.imag),
    )


def _scaled_left(right: np.ndarray, left: np.ndarray) -> np.ndarray:
    c = np.vdot(left, right)
    if abs(c) < 1e-14:
        return left
    return left / np.conjugate(c)


def pair_and_ratio(
    set_a: list[EigenPair],
    set_b: list[EigenPair],
    tau: float,
    dtau: float,
    m: np.ndarray,
    quality_threshold: float = 0.5,
    method: str = "greedy",
) -> ResonanceSet:
    """Pair eigenvectors across the two lags and take the eigenvalue ratio.

    Pairing maximizes the m-weighted normalized inner product between
    right eigenvectors, one-to-one, greedily on sorted quality (or with
    an optimal assignment when ``method="optimal"``).  Matched pairs give
    ``lambda = log(zeta_b / zeta_a) / dtau``; eigenvalues whose best
    quality falls below the threshold are dropped and counted in
    ``n_dropped``.
    """
    if dtau <= 0:
        raise ValidationError(f"dtau must be positive, got {dtau}")
    if not set_a or not set_b:
        raise ValidationError("both eigenpair sets must be nonempty")
    dim = set_a[0].right.size
    if any(p.right.size != dim for p in set_a + set_b):
        raise ValidationError("eigenpair sets must share one kept-box index set")
    vecs_a = np.column_stack([p.right for p in set_a])
    vecs_b = np.column_stack([p.right for p in set_b])
    q = _quality_matrix(vecs_a, vecs_b, m)
    if method == "greedy":
        matches = _match_greedy(q, quality_threshold)
    elif method == "optimal":
        matches = _match_optimal(q, quality_threshold)
    else:
        raise ValidationError(f"unknown pairing method {method!r}")
    if not matches:
        raise EmptyPairingError(
            f"no eigenvector pair reaches quality {quality_threshold}"
        )
    n_dropped = (len(set_a) - len(matches)) + (len(set_b) - len(matches))

    lams, singles, resonances = [], [], []
    for i, j in matches:
        za, zb = set_a[i].value, set_b[j].value
        if za == 0:
            raise ValidationError("zero eigenvalue cannot enter the ratio")
        ratio = zb / za
        a_arg = cmath.phase(ratio)
        if a_arg == math.pi:
            a_arg = -math.pi
        lam = complex(math.log(abs(ratio)) / dtau, a_arg / dtau)
        lams.append(lam)
        singles.append(to_generator(za, tau))
        resonances.append((i, j, lam))

    rights = [set_a[i].right for i, _, _ in resonances]
    partner = _conjugate_partners(rights)
    lams = _symmetrize_matched_values(lams, partner)
    singles = _symmetrize_matched_values(singles, partner)

    out = []
    for idx, (i, j, _) in enumerate(resonances):
        pa = set_a[i]
        out.append(
            Resonance(
                value=lams[idx],
                value_single=singles[idx],
                kappa=condition_number(pa, m),
                pair_quality=float(q[i, j]),
                right=pa.right,
                left=_scaled_left(pa.right, pa.left),
            )
        )
    return ResonanceSet(lag=tau, dlag=dtau, resonances=_sort_resonances(out), n_dropped=n_dropped)


def single_lag_resonances(pairs: list[EigenPair], tau: float, m: np.ndarray) -> ResonanceSet:
    """Resonances from one transition matrix alone (subject to folding)."""
    rights = [p.right for p in pairs]
    partner = _conjugate_partners(rights)
    lams = _symmetrize_matched_values([to_generator(p.value, tau) for p in pairs], partner)
    resonances = [
        Resonance(
            value=lams[i],
            value_single=lams[i],
            kappa=condition_number(p, m),
            pair_quality=1.0,
            right=p.right,
            left=_scaled_left(p.right, p.left),
        )
        for i, p in enumerate(pairs)
    ]
    return ResonanceSet(lag=tau, dlag=tau, resonances=_sort_resonances(resonances))


def filter_and_sort(rset: ResonanceSet, kappa_max: float = 5.0) -> ResonanceSet:
    """Drop resonances with condition number above ``kappa_max`` and sort.

    Order is descending real part, ties broken by ascending |Im|, with
    the +Im member of a conjugate pair first.
    """
    kept = [r for r in rset.resonances if r.kappa <= kappa_max]
    return replace(rset, resonances=_sort_resonances(kept))
