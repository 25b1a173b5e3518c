"""k-means, spectral clustering, and a self-contained Jacobi eigensolver.

Everything here is deterministic given its seed arguments: k-means++
seeding draws from a stream derived from (seed, restart), and spectral
clustering runs k-means with a fixed seed on the Laplacian embedding.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidK, NoConvergence, NotSymmetric, ZeroVector


@dataclass(frozen=True, eq=False)
class KMeansResult:
    assignments: np.ndarray
    centroids: np.ndarray
    inertia: float
    iterations: int


@dataclass(frozen=True, eq=False)
class SpectralResult:
    labels: np.ndarray
    cluster_sizes: tuple[int, ...]


def _nearest(points: np.ndarray, centroids: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Squared distances to each centroid and the argmin assignment."""
    d2 = ((points[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
    return d2, d2.argmin(axis=1)


def _seed_centroids(points: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """k-means++ seeding; falls back to lowest unused index when all
    candidate distances are zero (duplicate points)."""
    n = points.shape[0]
    chosen = [int(rng.integers(n))]
    for _ in range(1, k):
        d2 = ((points[:, None, :] - points[chosen][None, :, :]) ** 2).sum(axis=2).min(axis=1)
        total = d2.sum()
        if total == 0.0:
            pick = next(i for i in range(n) if i not in chosen)
        else:
            pick = int(rng.choice(n, p=d2 / total))
        chosen.append(pick)
    return points[chosen].copy()


def _lloyd(points: np.ndarray, centroids: np.ndarray, max_iter: int):
    """Lloyd iterations until the assignment reaches a fixpoint.

    Empty clusters are repaired by re-seeding the centroid at the point
    farthest from it, which never increases inertia.  Returns the final
    assignment, centroids, per-iteration inertia trace, and iteration count.
    """
    k = centroids.shape[0]
    d2, assign = _nearest(points, centroids)
    trace = [float(d2.min(axis=1).sum())]
    iterations = 0
    for _ in range(max_iter):
        counts = np.bincount(assign, minlength=k)
        for j in np.flatnonzero(counts == 0):
            far = int(np.argmax(((points - centroids[j]) ** 2).sum(axis=1)))
            centroids[j] = points[far]
        if np.any(counts == 0):
            d2, assign = _nearest(points, centroids)
            counts = np.bincount(assign, minlength=k)
        new_centroids = centroids.copy()
        for j in range(k):
            if counts[j] > 0:
                new_centroids[j] = points[assign == j].mean(axis=0)
        d2, new_assign = _nearest(points, new_centroids)
        trace.append(float(d2.min(axis=1).sum()))
        iterations += 1
        centroids = new_centroids
        if np.array_equal(new_assign, assign):
            assign = new_assign
            break
        assign = new_assign
    return assign, centroids, trace, iterations


def kmeans(
    points,
    k: int,
    seed: int = 0,
    max_iter: int = 100,
    restarts: int = 1,
) -> KMeansResult:
    """Lloyd's algorithm from k-means++ seeding, deterministic given seed.

    Args:
        points: n x d array of points.
        k: Cluster count, 1 <= k <= n.
        seed: Base seed; restart r draws from stream (seed, r).
        max_iter: Cap on Lloyd iterations per restart.
        restarts: Independent seedings; the lowest-inertia run wins.

    Raises:
        InvalidK: k outside [1, n].
    """
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2:
        points = points.reshape(points.shape[0], -1)
    n = points.shape[0]
    if not 1 <= k <= n:
        raise InvalidK(f"k={k} with {n} points")
    best = None
    for restart in range(max(1, restarts)):
        rng = np.random.default_rng([seed, restart])
        centroids = _seed_centroids(points, k, rng)
        assign, centroids, trace, iters = _lloyd(points, centroids, max_iter)
        inertia = trace[-1]
        if best is None or inertia < best.inertia:
            best = KMeansResult(assign, centroids, inertia, iters)
    return best


def symmetric_eigen(M, tol: float = 1e-10, max_sweeps: int = 100):
    """Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.

    Args:
        M: Symmetric matrix (checked to 1e-10).
        tol: Convergence threshold on the off-diagonal norm, relative
            to the Frobenius norm of M.
        max_sweeps: Cap on full rotation sweeps.

    Returns:
        (eigenvalues ascending, eigenvectors as columns in the same order).

    Raises:
        NotSymmetric: Input is not symmetric within 1e-10.
        NoConvergence: Off-diagonal mass does not vanish within the cap.
    """
    M = np.asarray(M, dtype=np.float64)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise NotSymmetric(f"expected square matrix, got {M.shape}")
    if M.shape[0] == 0:
        raise NotSymmetric("empty matrix")
    if np.max(np.abs(M - M.T)) > 1e-10:
        raise NotSymmetric("matrix is not symmetric within 1e-10")
    n = M.shape[0]
    A = (M + M.T) / 2.0
    V = np.eye(n)
    scale = max(np.linalg.norm(A), np.finfo(np.float64).tiny)

    def off_norm(a):
        off = a - np.diag(np.diag(a))
        return np.sqrt((off**2).sum())

    converged = off_norm(A) <= tol * scale
    for _ in range(max_sweeps):
        if converged:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                guard = 100.0 * abs(apq)
                # Entry already negligible against both diagonal values.
                if abs(A[p, p]) + guard == abs(A[p, p]) and abs(A[q, q]) + guard == abs(A[q, q]):
                    A[p, q] = A[q, p] = 0.0
                    continue
                gap = A[q, q] - A[p, p]
                if abs(gap) + guard == abs(gap):
                    t = apq / gap
                else:
                    theta = gap / (2.0 * apq)
                    t = 1.0 / (abs(theta) + np.sqrt(1.0 + theta * theta))
                    if theta < 0:
                        t = -t
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = t * c
                rot = np.array([[c, s], [-s, c]])
                A[[p, q], :] = rot.T @ A[[p, q], :]
                A[:, [p, q]] = A[:, [p, q]] @ rot
                V[:, [p, q]] = V[:, [p, q]] @ rot
        converged = off_norm(A) <= tol * scale
    if not converged:
        raise NoConvergence(f"Jacobi did not converge in {max_sweeps} sweeps")
    eigenvalues = np.diag(A).copy()
    order = np.argsort(eigenvalues, kind="stable")
    return eigenvalues[order], V[:, order]


def spectral_cluster(vectors, k: int, seed: int = 0) -> SpectralResult:
    """Cosine-affinity spectral clustering with a normalized Laplacian.

    The affinity is exp(-(1 - cos)/sigma) with sigma the median pairwise
    (1 - cos), floored at 1e-6.  The embedding uses the eigenvectors of
    the k smallest Laplacian eigenvalues, row-normalized, clustered by
    seeded k-means.  Identical inputs collapse to a single cluster.

    Raises:
        InvalidK: Unless n >= k >= 1.
        ZeroVector: Any input with zero norm (cosine undefined).
    """
    vectors = np.asarray(vectors, dtype=np.float64)
    if vectors.ndim != 2:
        vectors = vectors.reshape(vectors.shape[0], -1)
    n = vectors.shape[0]
    if not 1 <= k <= n:
        raise InvalidK(f"k={k} with {n} vectors")
    norms = np.linalg.norm(vectors, axis=1)
    if np.any(norms == 0.0):
        raise ZeroVector("cosine affinity undefined for zero-norm input")
    if k == 1:
        return SpectralResult(np.zeros(n, dtype=np.int64), (n,))
    unit = vectors / norms[:, None]
    cos = np.clip(unit @ unit.T, -1.0, 1.0)
    dissim = 1.0 - cos
    off_diag = dissim[~np.eye(n, dtype=bool)]
    if off_diag.max(initial=0.0) < 1e-12:
        # All directions coincide: one cluster holds everything.
        sizes = (n,) + (0,) * (k - 1)
        return SpectralResult(np.zeros(n, dtype=np.int64), sizes)
    sigma = max(float(np.median(off_diag)), 1e-6)
    affinity = np.exp(-dissim / sigma)
    degree = affinity.sum(axis=1)
    inv_sqrt = 1.0 / np.sqrt(degree)
    laplacian = np.eye(n) - affinity * inv_sqrt[:, None] * inv_sqrt[None, :]
    laplacian = (laplacian + laplacian.T) / 2.0
    _, eigenvectors = symmetric_eigen(laplacian, tol=1e-10)
    embedding = eigenvectors[:, :k].copy()
    row_norms = np.linalg.norm(embedding, axis=1)
    keep = row_norms > 0.0
    embedding[keep] /= row_norms[keep, None]
    result = kmeans(embedding, k, seed=seed, max_iter=100, restarts=5)
    labels = result.assignments.astype(np.int64)
    sizes = tuple(int(c) for c in np.bincount(labels, minlength=k))
    return SpectralResult(labels, sizes)
