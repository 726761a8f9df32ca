"""Sequential recursive H-arithmetic.

These routines follow the blocked 2x2 recursions directly and serve as
the reference the DAG execution is verified against.  The factorization
is the unpivoted block LU

    A = L U,   L unit lower triangular, U upper triangular,

with L and U stored as separate H-matrices over A's block tree.  Leaf
factorization has no pivoting, so test matrices carry a diagonal shift;
a vanishing pivot raises :class:`SingularPivotError`.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg as sla

from . import hmatrix as hmod
from .hmatrix import (
    BLOCKED,
    DENSE,
    LOWRANK,
    HMatrix,
    TruncationPolicy,
    fold_payload_into_leaf,
    hm_solve_lower,
    hm_solve_upper_t,
    product_payload,
    scatter_payload,
)

PIVOT_CUTOFF = 1e-14


class SingularPivotError(RuntimeError):
    pass


def hmul(alpha: float, A: HMatrix, B: HMatrix, C: HMatrix,
         policy: TruncationPolicy):
    """C += alpha * A @ B over matching block structures."""
    if alpha == 0.0:
        return
    if A.nrows != C.nrows or B.ncols != C.ncols or A.ncols != B.nrows:
        raise ValueError("non-conformal hmul operands")
    if A.kind == BLOCKED and B.kind == BLOCKED and C.kind == BLOCKED:
        for i in range(2):
            for j in range(2):
                for l in range(2):
                    hmul(alpha, A.children[i][l], B.children[l][j],
                         C.children[i][j], policy)
        return
    p = product_payload(alpha, A, B, policy)
    scatter_payload(C, p, policy)


def dense_lu(A: np.ndarray):
    """Unpivoted LU of a dense block; raises on a vanishing pivot."""
    n = A.shape[0]
    if A.shape[0] != A.shape[1]:
        raise ValueError("LU needs a square block")
    U = A.copy()
    L = np.eye(n)
    scale = np.linalg.norm(A)
    for k in range(n):
        piv = U[k, k]
        if abs(piv) <= PIVOT_CUTOFF * scale:
            raise SingularPivotError(f"pivot {piv:.3e} at index {k}")
        L[k + 1:, k] = U[k + 1:, k] / piv
        U[k + 1:, k:] -= np.outer(L[k + 1:, k], U[k, k:])
        U[k + 1:, k] = 0.0
    return L, U


def hlu(A: HMatrix, L: HMatrix, U: HMatrix, policy: TruncationPolicy):
    """Factor A = L U recursively; A is consumed as workspace."""
    if A.kind == BLOCKED:
        (a00, a01), (a10, a11) = A.children
        (l00, _), (l10, l11) = L.children
        (u00, u01), (_, u11) = U.children
        hlu(a00, l00, u00, policy)
        htrsu(u00, a10, l10, policy)
        htrsl(l00, a01, u01, policy)
        hmul(-1.0, l10, u01, a11, policy)
        hlu(a11, l11, u11, policy)
        return
    if A.kind != DENSE:
        raise ValueError("diagonal leaf must be dense for factorization")
    Ld, Ud = dense_lu(A.D)
    L.kind = DENSE
    L.D = Ld
    U.kind = DENSE
    U.D = Ud


def htrsl(L: HMatrix, M: HMatrix, X: HMatrix, policy: TruncationPolicy):
    """Solve L X = M (L unit lower triangular); M is consumed."""
    if L.nrows != M.nrows or M.nrows != L.ncols:
        raise ValueError("non-conformal triangular solve")
    if M.kind == BLOCKED:
        (l00, _), (l10, l11) = L.children
        (m00, m01), (m10, m11) = M.children
        (x00, x01), (x10, x11) = X.children
        htrsl(l00, m00, x00, policy)
        htrsl(l00, m01, x01, policy)
        hmul(-1.0, l10, x00, m10, policy)
        hmul(-1.0, l10, x01, m11, policy)
        htrsl(l11, m10, x10, policy)
        htrsl(l11, m11, x11, policy)
        return
    if M.kind == DENSE:
        X.kind = DENSE
        X.D = hm_solve_lower(L, M.D)
    else:
        X.kind = LOWRANK
        X.set_lowrank(hm_solve_lower(L, M.U), M.V.copy())


def htrsu(U: HMatrix, M: HMatrix, X: HMatrix, policy: TruncationPolicy):
    """Solve X U = M (U upper triangular); M is consumed."""
    if U.ncols != M.ncols or M.ncols != U.nrows:
        raise ValueError("non-conformal triangular solve")
    if M.kind == BLOCKED:
        (u00, u01), (_, u11) = U.children
        (m00, m01), (m10, m11) = M.children
        (x00, x01), (x10, x11) = X.children
        htrsu(u00, m00, x00, policy)
        htrsu(u00, m10, x10, policy)
        hmul(-1.0, x00, u01, m01, policy)
        hmul(-1.0, x10, u01, m11, policy)
        htrsu(u11, m01, x01, policy)
        htrsu(u11, m11, x11, policy)
        return
    if M.kind == DENSE:
        X.kind = DENSE
        X.D = hm_solve_upper_t(U, M.D.T).T
    else:
        X.kind = LOWRANK
        X.set_lowrank(M.U.copy(), hm_solve_upper_t(U, M.V))
