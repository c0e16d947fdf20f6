"""Sparse coding and dictionary learning for poses.

Orthogonal matching pursuit (single-vector and batched), K-SVD training with
a monotone objective guarantee, dictionary-size search against a target
coding error, and large-scale training via k-means pre-partitioning with
sub-dictionary concatenation.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import container
from .dataset import PoseSet
from .errors import DataError, FormatError, InvalidInputError

# dictionaries at or above this atom count use the float32 selection path
FAST_OMP_THRESHOLD = 8192


@dataclass(frozen=True)
class SparseCode:
    """Support, coefficients, and the residual they leave."""

    support: np.ndarray          # atom indices, selection order
    values: np.ndarray
    size: int                    # ambient atom count n
    residual: float

    def __post_init__(self):
        support = np.asarray(self.support, dtype=int)
        values = np.asarray(self.values, dtype=float)
        if support.shape != values.shape:
            raise InvalidInputError("support and values must align")
        if len(np.unique(support)) != len(support):
            raise InvalidInputError("support indices must be distinct")
        if support.size and (support.min() < 0 or support.max() >= self.size):
            raise InvalidInputError("support index out of range")
        object.__setattr__(self, "support", support)
        object.__setattr__(self, "values", values)

    def to_dense(self) -> np.ndarray:
        x = np.zeros(self.size)
        x[self.support] = self.values
        return x


class OmpWorkspace:
    """Reusable state for repeated OMP runs against one coefficient matrix.

    For large dictionaries keeps a float32 transposed copy for correlation
    passes and caches Gram columns so repeated solves against the same
    observation rows cost roughly one matrix-vector product each.
    """

    def __init__(self, A: np.ndarray):
        self.A = A
        self.rows, self.n = A.shape
        # selection normalizes correlations by column norm, which matters
        # when mask extraction leaves columns with unequal energy
        self.col_norms = np.maximum(np.linalg.norm(A, axis=0), 1e-12)
        self.inv_col_norms = 1.0 / self.col_norms
        self.fast = self.n >= FAST_OMP_THRESHOLD
        if self.fast:
            self.At32 = np.ascontiguousarray(A.T, dtype=np.float32)
            self._gram: dict[int, np.ndarray] = {}
            self.inv_col_norms32 = self.inv_col_norms.astype(np.float32)

    def correlations(self, r: np.ndarray) -> np.ndarray:
        if self.fast:
            return self.At32 @ r.astype(np.float32)
        return self.A.T @ r

    def gram_column(self, j: int) -> np.ndarray:
        col = self._gram.get(j)
        if col is None:
            col = self.At32 @ self.At32[j]
            if len(self._gram) >= 256:
                self._gram.pop(next(iter(self._gram)))
            self._gram[j] = col
        return col


def _check_omp_inputs(A, v, kappa, trusted: bool):
    A = np.asarray(A, dtype=float)
    v = np.asarray(v, dtype=float)
    if A.ndim != 2 or A.size == 0 or (not trusted and not np.any(A)):
        raise InvalidInputError("coefficient matrix must be non-empty and non-zero")
    if v.ndim != 1 or v.size != A.shape[0]:
        raise InvalidInputError(
            f"observation length {v.size} does not match {A.shape[0]} rows")
    if v.size == 0:
        raise InvalidInputError("empty observation vector")
    if kappa < 1:
        raise InvalidInputError("kappa must be at least 1")
    return A, v


def omp(A, v, kappa: int, residual_tol: float | None = None,
        workspace: OmpWorkspace | None = None) -> SparseCode:
    """Greedy orthogonal matching pursuit.

    Repeatedly selects the column most correlated with the residual (cosine
    correlation: normalized by column norm) and re-solves least squares on
    the active set. Stops at ``kappa`` atoms, when the residual drops to
    ``residual_tol`` (default: 1e-12 relative to ``|v|``), or when the best
    remaining atom no longer reduces the residual.
    """
    A, v = _check_omp_inputs(A, v, kappa, trusted=workspace is not None)
    ws = workspace if workspace is not None and workspace.A is A else OmpWorkspace(A)
    scale = float(np.linalg.norm(v))
    tol = 1e-12 * scale if residual_tol is None else float(residual_tol)
    gain_tol = 1e-12 * max(scale, 1.0)
    kappa = min(int(kappa), ws.n)

    support: list[int] = []
    x = np.zeros(0)
    residual = scale
    r = v
    if ws.fast:
        c0 = ws.correlations(v)
        corr = c0.copy()
        gram_buf = np.empty((ws.n, kappa), dtype=np.float32)
    cand = np.empty(ws.n, dtype=np.float32 if ws.fast else float)
    while len(support) < kappa and residual > tol:
        if not ws.fast:
            corr = ws.correlations(r)
        np.abs(corr, out=cand)
        cand *= ws.inv_col_norms32 if ws.fast else ws.inv_col_norms
        if support:
            cand[np.asarray(support)] = -1.0
        j = int(np.argmax(cand))
        trial = support + [j]
        sol, *_ = np.linalg.lstsq(A[:, trial], v, rcond=None)
        r_new = v - A[:, trial] @ sol
        res_new = float(np.linalg.norm(r_new))
        if residual - res_new < gain_tol:
            break
        if ws.fast:
            gram_buf[:, len(support)] = ws.gram_column(j)
        support, x, r, residual = trial, sol, r_new, res_new
        if ws.fast and len(support) < kappa and residual > tol:
            corr = c0 - gram_buf[:, :len(support)] @ x.astype(np.float32)
    return SparseCode(np.asarray(support, dtype=int), np.asarray(x, dtype=float),
                      size=ws.n, residual=residual)


def omp_batch(A, V, kappa: int, residual_tol: float | None = None) -> np.ndarray:
    """OMP for every column of V at once; returns dense codes (n, m).

    Same greedy semantics as :func:`omp`, vectorized over poses per
    selection step for training-scale workloads.
    """
    A = np.asarray(A, dtype=float)
    V = np.asarray(V, dtype=float)
    if V.ndim != 2 or V.shape[0] != A.shape[0]:
        raise InvalidInputError("V must be (rows, m) matching A's rows")
    d, n = A.shape
    m = V.shape[1]
    kappa = min(int(kappa), n)
    X = np.zeros((n, m))
    supports: list[list[int]] = [[] for _ in range(m)]
    R = V.copy()
    col_norms = np.maximum(np.linalg.norm(A, axis=0), 1e-12)
    norms = np.linalg.norm(V, axis=0)
    tol = 1e-12 * norms if residual_tol is None else np.full(m, float(residual_tol))
    gain_tol = 1e-12 * np.maximum(norms, 1.0)
    residual = norms.copy()
    active = residual > tol
    for _ in range(kappa):
        if not active.any():
            break
        C = np.abs(A.T @ R[:, active]) / col_norms[:, None]
        idx_active = np.flatnonzero(active)
        for pos, i in enumerate(idx_active):
            if supports[i]:
                C[np.asarray(supports[i]), pos] = -1.0
        picks = np.argmax(C, axis=0)
        for pos, i in enumerate(idx_active):
            trial = supports[i] + [int(picks[pos])]
            sol, *_ = np.linalg.lstsq(A[:, trial], V[:, i], rcond=None)
            r_new = V[:, i] - A[:, trial] @ sol
            res_new = float(np.linalg.norm(r_new))
            if residual[i] - res_new < gain_tol[i]:
                active[i] = False
                continue
            supports[i] = trial
            residual[i] = res_new
            R[:, i] = r_new
            X[np.asarray(trial), i] = sol
            if res_new <= tol[i] or len(trial) >= kappa:
                active[i] = False
    return X


# --------------------------------------------------------------------------
# pose dictionary
# --------------------------------------------------------------------------

class PoseDictionary:
    """Matrix of unit-norm pose atoms plus training provenance."""

    def __init__(self, atoms: np.ndarray, kappa_train: int = 0, meta: dict | None = None):
        atoms = np.asarray(atoms, dtype=float)
        if atoms.ndim != 2 or atoms.shape[1] < 1:
            raise InvalidInputError("atoms must be a (D, n) matrix with n >= 1")
        if not np.all(np.isfinite(atoms)):
            raise InvalidInputError("atoms contain non-finite entries")
        norms = np.linalg.norm(atoms, axis=0)
        if np.any(np.abs(norms - 1.0) > 1e-10):
            raise InvalidInputError("every atom must have unit l2 norm (within 1e-10)")
        self.atoms = atoms
        self.kappa_train = int(kappa_train)
        self.meta = dict(meta or {})
        self._workspaces: dict[bytes | None, OmpWorkspace] = {}

    @property
    def dim(self) -> int:
        return self.atoms.shape[0]

    @property
    def n(self) -> int:
        return self.atoms.shape[1]

    @classmethod
    def from_poses(cls, poses: np.ndarray, kappa_train: int = 0,
                   meta: dict | None = None) -> "PoseDictionary":
        """Build a dictionary whose atoms are the given poses, normalized."""
        poses = np.asarray(poses, dtype=float)
        norms = np.linalg.norm(poses, axis=1)
        if np.any(norms <= 0):
            raise InvalidInputError("cannot normalize a zero pose into an atom")
        return cls((poses / norms[:, None]).T, kappa_train, meta)

    def workspace(self, mask=None) -> OmpWorkspace:
        """Per-mask OMP workspace (row-extracted matrix + caches), LRU-kept."""
        if mask is None or bool(np.all(mask)):
            key = None
        else:
            key = np.asarray(mask, dtype=bool).tobytes()
        ws = self._workspaces.get(key)
        if ws is None:
            rows = self.atoms if key is None else self.atoms[np.asarray(mask, dtype=bool)]
            ws = OmpWorkspace(rows)
            if len(self._workspaces) >= 8:
                self._workspaces.pop(next(iter(self._workspaces)))
            self._workspaces[key] = ws
        return ws

    def save(self, path: str | Path):
        container.write_model(path, kind=container.KIND_DICTIONARY, dim=self.dim,
                              cols=self.n, kappa=self.kappa_train,
                              blocks=[self.atoms.T.reshape(-1)], meta=self.meta)

    @classmethod
    def load(cls, path: str | Path) -> "PoseDictionary":
        kind, dim, cols, kappa, payload = container.read_model(path)
        if kind != container.KIND_DICTIONARY:
            raise FormatError("model container does not hold a dictionary",
                              path=str(path))
        if payload.size != dim * cols:
            raise FormatError("dictionary payload size mismatch", path=str(path))
        atoms = payload.reshape(cols, dim).T.copy()
        meta = {}
        sidecar = Path(str(path) + ".meta.json")
        if sidecar.exists():
            import json
            meta = json.loads(sidecar.read_text())
        return cls(atoms, kappa_train=kappa, meta=meta)


def _as_matrix(Y) -> np.ndarray:
    if isinstance(Y, PoseSet):
        return Y.poses
    return np.asarray(Y, dtype=float)


def coding_mse(A: np.ndarray, Y: np.ndarray, X: np.ndarray) -> float:
    """Mean per-coordinate squared representation error."""
    diff = Y.T - A @ X
    return float(np.mean(diff * diff))


# --------------------------------------------------------------------------
# K-SVD
# --------------------------------------------------------------------------

def ksvd_train(Y, n: int, kappa: int = 3, iters: int = 30,
               init: PoseDictionary | None = None, seed: int = 0) -> PoseDictionary:
    """K-SVD dictionary learning.

    Alternates batched OMP coding with sequential per-atom rank-1 SVD
    updates. Codes are only replaced when they improve, and dead atoms are
    re-seeded with the worst-reconstructed pose, so the Frobenius objective
    is non-increasing across every iteration; the trace is stored in the
    returned dictionary's metadata.
    """
    Ymat = _as_matrix(Y)
    m, dim = Ymat.shape
    if not np.all(np.isfinite(Ymat)):
        raise DataError("training poses contain non-finite values")
    if n < 1 or m < n:
        raise InvalidInputError(f"need at least n={n} training poses, got {m}")
    if iters < 1 or kappa < 1:
        raise InvalidInputError("iters and kappa must be positive")
    rng = np.random.default_rng(seed)
    Yt = Ymat.T                                  # (D, m)
    if init is not None:
        if init.n != n or init.dim != dim:
            raise InvalidInputError("init dictionary has the wrong shape")
        A = init.atoms.copy()
    else:
        picks = rng.choice(m, size=n, replace=False)
        A = PoseDictionary.from_poses(Ymat[picks]).atoms.copy()

    X = np.zeros((n, m))
    trace: list[float] = []
    for _ in range(iters):
        X_new = omp_batch(A, Yt, kappa)
        # keep whichever code reconstructs each pose better
        err_new = np.sum((Yt - A @ X_new) ** 2, axis=0)
        err_old = np.sum((Yt - A @ X) ** 2, axis=0)
        worse = err_new > err_old
        if worse.any():
            X_new[:, worse] = X[:, worse]
        X = X_new

        R = Yt - A @ X
        for k in range(n):
            row = X[k]
            users = np.flatnonzero(np.abs(row) > 1e-12)
            if users.size == 0:
                errs = np.sum(R * R, axis=0)
                worst = int(np.argmax(errs))
                atom = Yt[:, worst]
                norm = np.linalg.norm(atom)
                if norm > 0:
                    A[:, k] = atom / norm
                continue
            Ek = R[:, users] + np.outer(A[:, k], row[users])
            U, s, Vt = np.linalg.svd(Ek, full_matrices=False)
            A[:, k] = U[:, 0]
            X[k, users] = s[0] * Vt[0]
            R[:, users] = Ek - np.outer(A[:, k], X[k, users])
        trace.append(float(np.sum(R * R)))

    return PoseDictionary(A, kappa_train=kappa,
                          meta={"objective_trace": trace, "seed": seed,
                                "iters": iters, "train_poses": m})


def dict_size_search(Y, target_error: float, delta: float = 2.0,
                     n0: int = 32, kappa: int = 3, seed: int = 0
                     ) -> tuple[int, PoseDictionary]:
    """Grow a sampled dictionary until its coding error meets the target.

    Samples ``n0`` training poses as atoms, measures the per-coordinate
    sparse-coding MSE of the training set, accepts when it is within
    ``delta`` times ``target_error`` (learning tightens it later), else grows
    the size by half and repeats; capped at the training-set size.
    """
    Ymat = _as_matrix(Y)
    m = Ymat.shape[0]
    if target_error <= 0:
        raise InvalidInputError("target_error must be positive")
    if delta < 1.0:
        raise InvalidInputError("delta must be at least 1")
    if n0 < 1:
        raise InvalidInputError("n0 must be positive")
    rng = np.random.default_rng(seed)
    n = min(int(n0), m)
    while True:
        picks = rng.choice(m, size=n, replace=False)
        cand = PoseDictionary.from_poses(Ymat[picks], kappa_train=kappa,
                                         meta={"sampled_init": True, "seed": seed})
        X = omp_batch(cand.atoms, Ymat.T, kappa)
        e_s = coding_mse(cand.atoms, Ymat, X)
        if e_s <= delta * target_error or n >= m:
            return n, cand
        n = min(m, int(np.ceil(1.5 * n)))


# --------------------------------------------------------------------------
# large-scale training: k-means partition + concatenation
# --------------------------------------------------------------------------

def kmeans(X: np.ndarray, k: int, seed: int = 0, iters: int = 100) -> np.ndarray:
    """Seeded k-means++ / Lloyd; empty clusters re-seed to the farthest point."""
    m = X.shape[0]
    if k < 1 or k > m:
        raise InvalidInputError("cluster count must lie in 1..m")
    rng = np.random.default_rng(seed)
    centers = np.empty((k, X.shape[1]))
    centers[0] = X[rng.integers(m)]
    d2 = np.sum((X - centers[0]) ** 2, axis=1)
    for i in range(1, k):
        total = d2.sum()
        if total <= 0:
            centers[i] = X[rng.integers(m)]
        else:
            centers[i] = X[rng.choice(m, p=d2 / total)]
        d2 = np.minimum(d2, np.sum((X - centers[i]) ** 2, axis=1))
    labels = np.zeros(m, dtype=int)
    for _ in range(iters):
        dists = ((X[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2) \
            if m * k <= 4_000_000 else None
        if dists is None:
            dists = np.stack([np.sum((X - c) ** 2, axis=1) for c in centers], axis=1)
        new_labels = np.argmin(dists, axis=1)
        for i in range(k):
            members = new_labels == i
            if members.any():
                centers[i] = X[members].mean(axis=0)
            else:
                far = int(np.argmax(dists.min(axis=1)))
                centers[i] = X[far]
                new_labels[far] = i
        if np.array_equal(new_labels, labels):
            break
        labels = new_labels
    return labels


def partition_train(Y, clusters: int, *, kappa: int = 3, iters: int = 30,
                    n_per_cluster: int | None = None,
                    target_error: float | None = None, delta: float = 2.0,
                    n0: int = 32, seed: int = 0) -> PoseDictionary:
    """Cluster the training set, train one sub-dictionary per cluster, and
    concatenate the results."""
    Ymat = _as_matrix(Y)
    if clusters < 1:
        raise InvalidInputError("cluster count must be at least 1")
    if n_per_cluster is None and target_error is None:
        raise InvalidInputError("need n_per_cluster or target_error")
    labels = kmeans(Ymat, clusters, seed=seed) if clusters > 1 \
        else np.zeros(len(Ymat), dtype=int)
    parts = []
    sizes = []
    for c in range(clusters):
        members = Ymat[labels == c]
        if target_error is not None:
            n_c, init = dict_size_search(members, target_error, delta=delta,
                                         n0=n0, kappa=kappa, seed=seed + c)
        else:
            n_c = min(n_per_cluster, len(members))
            init = None
        sub = ksvd_train(members, n_c, kappa=kappa, iters=iters, init=init,
                         seed=seed + c)
        parts.append(sub.atoms)
        sizes.append(sub.n)
    atoms = np.concatenate(parts, axis=1)
    return PoseDictionary(atoms, kappa_train=kappa,
                          meta={"clusters": clusters, "cluster_sizes": sizes,
                                "seed": seed})
