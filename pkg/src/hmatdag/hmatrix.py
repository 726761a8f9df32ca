"""H-matrix storage and the dense/low-rank kernels all arithmetic uses.

An :class:`HMatrix` mirrors a block tree: non-leaf blocks hold a child
grid, inadmissible leaves hold a dense matrix, admissible leaves hold a
factorized low-rank pair ``U @ V.T``.  Rank control happens in
:func:`truncate` (QR + SVD recompression) under a
:class:`TruncationPolicy`; the ``exact`` policy drops only numerically
zero singular values so results stay order-independent up to rounding.

The module also provides the mixed leaf product/update kernels shared by
the recursive arithmetic and the accumulator arithmetic: a product of
any dense/low-rank/blocked operand combination is reduced to a "payload"
(dense or low-rank matrix over a block) which is then folded into a leaf
or scattered into a blocked destination.

Truncation and leaf-update counts are tracked in a process-global,
thread-safe counter for the bench harness.
"""

from __future__ import annotations

import threading

import numpy as np
import scipy.linalg as sla

from .trees import Block

ZERO_CUTOFF = 1e-14  # singular values below this times sigma_1 count as zero

DENSE = "dense"
LOWRANK = "lowrank"
BLOCKED = "blocked"


class TruncationPolicy:
    """Rank control mode: Exact, FixedRank(k) or FixedAccuracy(eps)."""

    __slots__ = ("mode", "k", "eps")

    def __init__(self, mode, k=None, eps=None):
        self.mode = mode
        self.k = k
        self.eps = eps

    @classmethod
    def exact(cls):
        return cls("exact")

    @classmethod
    def fixed_rank(cls, k: int):
        if k < 0:
            raise ValueError("rank must be >= 0")
        return cls("rank", k=k)

    @classmethod
    def fixed_accuracy(cls, eps: float):
        if eps <= 0:
            raise ValueError("accuracy must be positive")
        return cls("accuracy", eps=eps)

    def keep(self, sigma: np.ndarray) -> int:
        """Number of singular values to keep from the sorted spectrum."""
        if sigma.size == 0 or sigma[0] <= 0.0:
            return 0
        if self.mode == "rank":
            r = min(self.k, sigma.size)
            return int(np.count_nonzero(sigma[:r] > ZERO_CUTOFF * sigma[0]))
        if self.mode == "accuracy":
            return int(np.count_nonzero(sigma > self.eps * sigma[0]))
        return int(np.count_nonzero(sigma > ZERO_CUTOFF * sigma[0]))

    def __repr__(self):
        if self.mode == "rank":
            return f"FixedRank({self.k})"
        if self.mode == "accuracy":
            return f"FixedAccuracy({self.eps})"
        return "Exact"


EXACT = TruncationPolicy.exact()


class OpCounters:
    """Thread-safe counters: truncations performed, leaf updates folded."""

    def __init__(self):
        self._lock = threading.Lock()
        self.truncations = 0
        self.updates = 0

    def count_truncation(self):
        with self._lock:
            self.truncations += 1

    def count_update(self):
        with self._lock:
            self.updates += 1

    def reset(self):
        with self._lock:
            self.truncations = 0
            self.updates = 0

    def snapshot(self):
        with self._lock:
            return self.truncations, self.updates


counters = OpCounters()


def truncate(U: np.ndarray, V: np.ndarray, policy: TruncationPolicy):
    """Best low-rank reapproximation of ``U @ V.T`` via QR + SVD.

    Returns a new factor pair under ``policy``.  Rank-0 input passes
    through untouched and is not counted as a truncation.
    """
    if U.shape[1] != V.shape[1]:
        raise ValueError("non-conformal low-rank factors")
    if U.shape[1] == 0:
        return U, V
    counters.count_truncation()
    Qu, Ru = np.linalg.qr(U)
    Qv, Rv = np.linalg.qr(V)
    W, sigma, Zt = np.linalg.svd(Ru @ Rv.T)
    r = policy.keep(sigma)
    Un = Qu @ (W[:, :r] * sigma[:r])
    Vn = Qv @ Zt[:r].T
    return Un, Vn


def dense_to_lowrank(M: np.ndarray, policy: TruncationPolicy):
    """SVD compression of a dense block into a factor pair."""
    counters.count_truncation()
    W, sigma, Zt = np.linalg.svd(M, full_matrices=False)
    r = policy.keep(sigma)
    return W[:, :r] * sigma[:r], Zt[:r].T


class HMatrix:
    """Recursive block matrix over a block tree.

    ``kind`` is one of blocked / dense / lowrank; the kind matches the
    block's leaf status and admissibility.  Leaves may be rewritten in
    place by the arithmetic; the tree shape never changes.
    """

    __slots__ = ("block", "kind", "children", "D", "U", "V", "policy")

    def __init__(self, block: Block, kind: str, policy=EXACT):
        self.block = block
        self.kind = kind
        self.children = None
        self.D = None
        self.U = None
        self.V = None
        self.policy = policy

    @property
    def nrows(self) -> int:
        return self.block.nrows

    @property
    def ncols(self) -> int:
        return self.block.ncols

    @property
    def rank(self) -> int:
        if self.kind != LOWRANK:
            raise ValueError("rank defined for low-rank leaves only")
        return self.U.shape[1]

    def set_lowrank(self, U, V):
        if U.shape[0] != self.nrows or V.shape[0] != self.ncols or U.shape[1] != V.shape[1]:
            raise ValueError("factor shape mismatch")
        self.U, self.V = U, V

    def child_offsets(self, child: "HMatrix"):
        r0 = child.block.row.indices.first - self.block.row.indices.first
        c0 = child.block.col.indices.first - self.block.col.indices.first
        return r0, c0

    def to_dense(self) -> np.ndarray:
        if self.kind == DENSE:
            return self.D.copy()
        if self.kind == LOWRANK:
            return self.U @ self.V.T
        out = np.zeros((self.nrows, self.ncols))
        for row in self.children:
            for ch in row:
                r0, c0 = self.child_offsets(ch)
                out[r0:r0 + ch.nrows, c0:c0 + ch.ncols] = ch.to_dense()
        return out

    def frobenius(self) -> float:
        if self.kind == DENSE:
            return float(np.linalg.norm(self.D))
        if self.kind == LOWRANK:
            g = (self.U.T @ self.U) * (self.V.T @ self.V)
            return float(np.sqrt(max(0.0, g.sum())))
        return float(np.sqrt(sum(ch.frobenius() ** 2
                                 for row in self.children for ch in row)))

    def copy(self) -> "HMatrix":
        out = HMatrix(self.block, self.kind, self.policy)
        if self.kind == DENSE:
            out.D = self.D.copy()
        elif self.kind == LOWRANK:
            out.U, out.V = self.U.copy(), self.V.copy()
        else:
            out.children = [[ch.copy() for ch in row] for row in self.children]
        return out

    def leaves(self):
        if self.kind == BLOCKED:
            for row in self.children:
                for ch in row:
                    yield from ch.leaves()
        else:
            yield self

    def __repr__(self):
        return f"HMatrix({self.block!r}, {self.kind})"


def assemble(block: Block, kernel, policy: TruncationPolicy) -> HMatrix:
    """Evaluate ``kernel`` over the block tree.

    Inadmissible leaves are stored dense; admissible leaves are
    compressed from the densely evaluated block under ``policy``.  The
    kernel is indexed in tree ordering (compose with the cluster-tree
    permutation first when needed).
    """
    hm = HMatrix(block, BLOCKED if not block.is_leaf else
                 (LOWRANK if block.admissible else DENSE), policy)
    if not block.is_leaf:
        hm.children = [[assemble(ch, kernel, policy) for ch in row]
                       for row in block.children]
        return hm
    rows = np.arange(block.row.indices.first, block.row.indices.last)
    cols = np.arange(block.col.indices.first, block.col.indices.last)
    M = kernel.dense(rows, cols)
    if block.admissible:
        hm.set_lowrank(*dense_to_lowrank(M, policy))
    else:
        hm.D = np.ascontiguousarray(M, dtype=float)
    return hm


def zeros(block: Block, policy: TruncationPolicy = EXACT) -> HMatrix:
    """Zero H-matrix over a block tree (rank-0 admissible leaves)."""
    if not block.is_leaf:
        hm = HMatrix(block, BLOCKED, policy)
        hm.children = [[zeros(ch, policy) for ch in row] for row in block.children]
        return hm
    hm = HMatrix(block, LOWRANK if block.admissible else DENSE, policy)
    if block.admissible:
        m, n = block.nrows, block.ncols
        hm.set_lowrank(np.zeros((m, 0)), np.zeros((n, 0)))
    else:
        hm.D = np.zeros((block.nrows, block.ncols))
    return hm


def rel_error(A, B) -> float:
    """Relative Frobenius error ||A - B||_F / ||A||_F with 0/0 = 0."""
    A = A.to_dense() if isinstance(A, HMatrix) else np.asarray(A, dtype=float)
    B = B.to_dense() if isinstance(B, HMatrix) else np.asarray(B, dtype=float)
    num = np.linalg.norm(A - B)
    den = np.linalg.norm(A)
    if den == 0.0:
        return 0.0 if num == 0.0 else float("inf")
    return float(num / den)


def frobenius(M) -> float:
    return M.frobenius() if isinstance(M, HMatrix) else float(np.linalg.norm(M))


# ---------------------------------------------------------------------------
# matrix-times-dense application and triangular solves on dense right sides
# ---------------------------------------------------------------------------


def hm_apply(M: HMatrix, X: np.ndarray) -> np.ndarray:
    """M @ X for a dense X."""
    if M.ncols != X.shape[0]:
        raise ValueError("dimension mismatch in apply")
    if M.kind == DENSE:
        return M.D @ X
    if M.kind == LOWRANK:
        return M.U @ (M.V.T @ X)
    out = np.zeros((M.nrows, X.shape[1]))
    for row in M.children:
        for ch in row:
            r0, c0 = M.child_offsets(ch)
            out[r0:r0 + ch.nrows] += hm_apply(ch, X[c0:c0 + ch.ncols])
    return out


def hm_apply_t(M: HMatrix, X: np.ndarray) -> np.ndarray:
    """M.T @ X for a dense X."""
    if M.nrows != X.shape[0]:
        raise ValueError("dimension mismatch in transposed apply")
    if M.kind == DENSE:
        return M.D.T @ X
    if M.kind == LOWRANK:
        return M.V @ (M.U.T @ X)
    out = np.zeros((M.ncols, X.shape[1]))
    for row in M.children:
        for ch in row:
            r0, c0 = M.child_offsets(ch)
            out[c0:c0 + ch.ncols] += hm_apply_t(ch, X[r0:r0 + ch.nrows])
    return out


def hm_solve_lower(L: HMatrix, Y: np.ndarray) -> np.ndarray:
    """Solve L X = Y with unit-lower-triangular L, dense Y."""
    if L.kind == DENSE:
        return sla.solve_triangular(L.D, Y, lower=True, unit_diagonal=True)
    if L.kind == LOWRANK:
        raise ValueError("triangular solve on a low-rank diagonal block")
    (l00, _), (l10, l11) = L.children
    n0 = l00.nrows
    X0 = hm_solve_lower(l00, Y[:n0])
    X1 = hm_solve_lower(l11, Y[n0:] - hm_apply(l10, X0))
    return np.vstack([X0, X1])


def hm_solve_upper_t(U: HMatrix, Y: np.ndarray) -> np.ndarray:
    """Solve U.T W = Y with upper-triangular U, dense Y."""
    if U.kind == DENSE:
        return sla.solve_triangular(U.D, Y, trans="T", lower=False)
    if U.kind == LOWRANK:
        raise ValueError("triangular solve on a low-rank diagonal block")
    (u00, u01), (_, u11) = U.children
    n0 = u00.nrows
    W0 = hm_solve_upper_t(u00, Y[:n0])
    W1 = hm_solve_upper_t(u11, Y[n0:] - hm_apply_t(u01, W0))
    return np.vstack([W0, W1])


# ---------------------------------------------------------------------------
# product payloads and leaf updates
# ---------------------------------------------------------------------------


def payload_dense(p) -> np.ndarray:
    if p[0] == DENSE:
        return p[1]
    return p[1] @ p[2].T


def payload_shape(p):
    if p[0] == DENSE:
        return p[1].shape
    return p[1].shape[0], p[2].shape[0]


def payload_restrict(p, r0, nr, c0, nc):
    if p[0] == DENSE:
        return (DENSE, p[1][r0:r0 + nr, c0:c0 + nc])
    return (LOWRANK, p[1][r0:r0 + nr], p[2][c0:c0 + nc])


def product_payload(alpha: float, A: HMatrix, B: HMatrix, policy: TruncationPolicy):
    """alpha * A @ B as a dense or low-rank payload.

    Either factor may be blocked; a blocked/blocked product is combined
    from quadrant payloads and truncated under ``policy``.
    """
    if A.ncols != B.nrows:
        raise ValueError("non-conformal product")
    if A.kind == LOWRANK:
        return (LOWRANK, alpha * A.U, hm_apply_t(B, A.V))
    if B.kind == LOWRANK:
        return (LOWRANK, hm_apply(A, alpha * B.U), B.V)
    if A.kind == DENSE and B.kind == DENSE:
        return (DENSE, alpha * (A.D @ B.D))
    if A.kind == DENSE:  # B blocked
        return (DENSE, hm_apply_t(B, alpha * A.D.T).T)
    if B.kind == DENSE:  # A blocked
        return (DENSE, hm_apply(A, alpha * B.D))
    # both blocked: combine the 2x2x2 quadrant products into one payload
    m, n = A.nrows, B.ncols
    us, vs = [], []
    dense_acc = None
    for i in range(2):
        for j in range(2):
            for l in range(2):
                q = product_payload(alpha, A.children[i][l], B.children[l][j], policy)
                r0, _ = A.child_offsets(A.children[i][l])
                c0 = B.children[l][j].block.col.indices.first - B.block.col.indices.first
                if q[0] == DENSE:
                    if dense_acc is None:
                        dense_acc = np.zeros((m, n))
                    qm = q[1]
                    dense_acc[r0:r0 + qm.shape[0], c0:c0 + qm.shape[1]] += qm
                else:
                    qu, qv = q[1], q[2]
                    if qu.shape[1] == 0:
                        continue
                    ue = np.zeros((m, qu.shape[1]))
                    ue[r0:r0 + qu.shape[0]] = qu
                    ve = np.zeros((n, qv.shape[1]))
                    ve[c0:c0 + qv.shape[0]] = qv
                    us.append(ue)
                    vs.append(ve)
    if dense_acc is not None:
        if us:
            dense_acc += np.hstack(us) @ np.hstack(vs).T
        return (DENSE, dense_acc)
    if not us:
        return (LOWRANK, np.zeros((m, 0)), np.zeros((n, 0)))
    U, V = truncate(np.hstack(us), np.hstack(vs), policy)
    return (LOWRANK, U, V)


def fold_payload_into_leaf(C: HMatrix, p, policy: TruncationPolicy):
    """C += payload for a dense or low-rank leaf C."""
    pm, pn = payload_shape(p)
    if (pm, pn) != (C.nrows, C.ncols):
        raise ValueError("payload does not match destination block")
    counters.count_update()
    if C.kind == DENSE:
        C.D += payload_dense(p)
        return
    if C.kind != LOWRANK:
        raise ValueError("fold target must be a leaf")
    if p[0] == DENSE:
        M = C.U @ C.V.T + p[1]
        C.set_lowrank(*dense_to_lowrank(M, policy))
    else:
        U = np.hstack([C.U, p[1]])
        V = np.hstack([C.V, p[2]])
        C.set_lowrank(*truncate(U, V, policy))


def scatter_payload(C: HMatrix, p, policy: TruncationPolicy):
    """Add a payload into C, descending into blocked destinations."""
    if C.kind != BLOCKED:
        fold_payload_into_leaf(C, p, policy)
        return
    for row in C.children:
        for ch in row:
            r0, c0 = C.child_offsets(ch)
            scatter_payload(ch, payload_restrict(p, r0, ch.nrows, c0, ch.ncols), policy)


def leaf_update(C: HMatrix, alpha: float, A: HMatrix, B: HMatrix,
                policy: TruncationPolicy):
    """C += alpha * A @ B where C is a leaf (A, B of any kind)."""
    if alpha == 0.0:
        return
    if A.nrows != C.nrows or B.ncols != C.ncols or A.ncols != B.nrows:
        raise ValueError("non-conformal leaf update")
    fold_payload_into_leaf(C, product_payload(alpha, A, B, policy), policy)
