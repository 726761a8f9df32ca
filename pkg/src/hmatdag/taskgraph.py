"""Task graph construction for H-arithmetic by task refinement.

Every arithmetic task carries input/output data dependencies: pairs of a
matrix identifier and a block index range.  A task precedes another when
one of its outputs intersects one of the other's inputs.  Starting from
the single top-level call, tasks are repeatedly replaced by the
sub-tasks of their defining recursion while the dependencies are
narrowed by intersection tests, until only leaf-level (or stop-size)
tasks remain.  The result is the DAG handed to the executor.

Identifier conventions: the global matrices A, L, U get fixed small ids;
every block's accumulator gets its own id derived from the block, which
is what serializes accumulator traffic in the combined accumulator mode.

Determinism: a task's ``seq`` is its creation path (tuple of child
indices from the root task), assigned structurally.  Mutual dependency
matches are directed by ascending ``seq``, which reproduces the
statement order of the recursive algorithms, and parallel construction
yields bit-identical graphs because paths do not depend on scheduling.

Edge sparsification removes an edge when an alternative path of length
at least two exists inside the refinement neighbourhood.  Removal
decisions within one construction iteration are computed against the
iteration-start edge state and committed afterwards; this keeps the
outcome independent of traversal order, so sequential and parallel
builds agree edge-for-edge.  Commits take the per-task guards in
ascending seq order, all before any removal is applied.
"""

from __future__ import annotations

import threading
from concurrent.futures import ThreadPoolExecutor

from .trees import Block

MID_A, MID_L, MID_U = 0, 1, 2
ACC_BASE = 3

# task kinds
HLU = "hlu"
HTRSL = "htrsl"
HTRSU = "htrsu"
HMUL = "hmul"
ADD_UPD = "add_upd"
SHIFT_UPD = "shift_upd"
APPLY_UPD = "apply_upd"
LEAF_FACTOR = "leaf_factor"
LEAF_SOLVE_L = "leaf_solve_l"
LEAF_SOLVE_U = "leaf_solve_u"
LEAF_UPDATE = "leaf_update"

FACTOR_KINDS = frozenset({HLU, LEAF_FACTOR})
SOLVE_L_KINDS = frozenset({HTRSL, LEAF_SOLVE_L})
SOLVE_U_KINDS = frozenset({HTRSU, LEAF_SOLVE_U})
SOLVE_KINDS = SOLVE_L_KINDS | SOLVE_U_KINDS
UPDATE_KINDS = frozenset({HMUL, LEAF_UPDATE, ADD_UPD})
ACC_KINDS = frozenset({SHIFT_UPD, APPLY_UPD})

STD = "std"
COMBINED = "accu-combined"
MERGED = "accu-merged"
MODES = (STD, COMBINED, MERGED)


def dep(mid: int, block: Block):
    """Data dependency: (matrix id, row range, col range) as a flat tuple."""
    r, c = block.row.indices, block.col.indices
    return (mid, r.first, r.last, c.first, c.last)


def intersects(d1, d2) -> bool:
    """Same matrix id and overlapping half-open row and col ranges."""
    return (d1[0] == d2[0]
            and d1[1] < d2[2] and d2[1] < d1[2]
            and d1[3] < d2[4] and d2[3] < d1[4])


def acc_id(block: Block) -> int:
    return ACC_BASE + block.uid


class Task:
    """A unit of arithmetic work with data dependencies.

    ``seq`` is the hierarchical creation index (root ``(0,)``, sub-task
    ``seq + (i,)``); lexicographic order on seq follows the statement
    order of the recursive algorithms.
    """

    __slots__ = ("kind", "mids", "blocks", "alpha", "in_deps", "out_deps",
                 "succ", "subs", "seq", "_guard")

    def __init__(self, kind, mids, blocks, in_deps, out_deps, seq, alpha=1.0):
        self.kind = kind
        self.mids = mids
        self.blocks = blocks
        self.alpha = alpha
        self.in_deps = tuple(in_deps)
        self.out_deps = tuple(out_deps)
        self.succ = set()
        self.subs = None
        self.seq = seq
        self._guard = None

    def key(self):
        """Canonical identity for cross-build graph comparison."""
        return (self.kind, self.mids, tuple(b.uid for b in self.blocks), self.alpha)

    def guard(self) -> threading.Lock:
        if self._guard is None:
            self._guard = threading.Lock()
        return self._guard

    def __repr__(self):
        return f"Task({self.kind}, seq={self.seq})"


def precedes(t1: Task, t2: Task) -> bool:
    """True iff some output of t1 intersects some input of t2."""
    if t1 is t2:
        return False
    for od in t1.out_deps:
        for ind in t2.in_deps:
            if (od[0] == ind[0]
                    and od[1] < ind[2] and ind[1] < od[2]
                    and od[3] < ind[4] and ind[3] < od[4]):
                return True
    return False


# ---------------------------------------------------------------------------
# task factories
# ---------------------------------------------------------------------------


def _factor_task(b: Block, seq, mode) -> Task:
    ins = [dep(MID_A, b)]
    if mode == COMBINED and b.parent is not None:
        ins.append(dep(acc_id(b.parent), b))
    outs = [dep(MID_L, b), dep(MID_U, b)]
    kind = LEAF_FACTOR if b.is_leaf else HLU
    return Task(kind, (MID_A, MID_L, MID_U), (b,), ins, outs, seq)


def _solve_l_task(bL: Block, bM: Block, mids, seq, mode) -> Task:
    mL, mM, mX = mids
    ins = [dep(mL, bL), dep(mM, bM)]
    if mode == COMBINED and bM.parent is not None:
        ins.append(dep(acc_id(bM.parent), bM))
    outs = [dep(mX, bM)]
    kind = LEAF_SOLVE_L if bM.is_leaf else HTRSL
    return Task(kind, mids, (bL, bM), ins, outs, seq)


def _solve_u_task(bU: Block, bM: Block, mids, seq, mode) -> Task:
    mU, mM, mX = mids
    ins = [dep(mU, bU), dep(mM, bM)]
    if mode == COMBINED and bM.parent is not None:
        ins.append(dep(acc_id(bM.parent), bM))
    outs = [dep(mX, bM)]
    kind = LEAF_SOLVE_U if bM.is_leaf else HTRSU
    return Task(kind, mids, (bU, bM), ins, outs, seq)


def _mul_task(alpha, bA, bB, bC, mids, seq, mode) -> Task:
    # the destination is read-modify-write: C appears among the inputs so
    # that two updates of one block are serialized (direction by seq)
    mA, mB, mC = mids
    ins = [dep(mA, bA), dep(mB, bB), dep(mC, bC)]
    outs = [dep(mC, bC)]
    if mode == STD:
        kind = HMUL
        if bA.is_leaf or bB.is_leaf or bC.is_leaf:
            kind = LEAF_UPDATE
    else:
        kind = ADD_UPD
        if mode == COMBINED:
            outs.append(dep(acc_id(bC), bC))
    return Task(kind, mids, (bA, bB, bC), ins, outs, seq, alpha=alpha)


def _shift_task(b: Block, seq, dest_mid=MID_A) -> Task:
    ins = [dep(acc_id(b), b)]
    if b.parent is not None:
        ins.insert(0, dep(acc_id(b.parent), b))
    outs = [dep(acc_id(b), b)]
    return Task(SHIFT_UPD, (dest_mid,), (b,), ins, outs, seq)


def _apply_task(b: Block, seq, dest_mid=MID_A) -> Task:
    ins = [dep(acc_id(b), b)]
    if b.parent is not None:
        ins.insert(0, dep(acc_id(b.parent), b))
    outs = [dep(dest_mid, b)]
    return Task(APPLY_UPD, (dest_mid,), (b,), ins, outs, seq)


# ---------------------------------------------------------------------------
# refinement
# ---------------------------------------------------------------------------


def _above_stop(b: Block, stop_size: int) -> bool:
    return stop_size <= 0 or max(b.nrows, b.ncols) > stop_size


def refinable(t: Task, stop_size: int = 0) -> bool:
    if t.kind == HLU:
        return _above_stop(t.blocks[0], stop_size)
    if t.kind in (HTRSL, HTRSU):
        return _above_stop(t.blocks[1], stop_size)
    if t.kind == HMUL:
        return _above_stop(t.blocks[2], stop_size)
    if t.kind == ADD_UPD:
        bA, bB, bC = t.blocks
        return (not (bA.is_leaf or bB.is_leaf or bC.is_leaf)
                and _above_stop(bC, stop_size))
    return False


def _auto_local_edges(subs):
    """Pairwise precedes() over the sub-tasks, mutual matches directed by
    ascending seq."""
    for i, a in enumerate(subs):
        for b in subs[i + 1:]:
            if precedes(a, b):
                a.succ.add(b)
            elif precedes(b, a):
                b.succ.add(a)


def refine(t: Task, mode: str) -> list:
    """Replace t by the sub-tasks of its defining recursion.

    Sets ``t.subs`` and installs the loop-free local edges among them.
    """
    if t.subs is not None:
        return t.subs
    seq = t.seq
    subs = []
    mk = subs.append
    if t.kind == HLU:
        b = t.blocks[0]
        if b.is_leaf:
            raise ValueError("cannot refine a leaf factorization")
        (c00, c01), (c10, c11) = b.children
        i = 0
        if mode == COMBINED:
            mk(_shift_task(b, seq + (i,)))
            i += 1
        mk(_factor_task(c00, seq + (i,), mode))
        mk(_solve_u_task(c00, c10, (MID_U, MID_A, MID_L), seq + (i + 1,), mode))
        mk(_solve_l_task(c00, c01, (MID_L, MID_A, MID_U), seq + (i + 2,), mode))
        mk(_mul_task(-1.0, c10, c01, c11, (MID_L, MID_U, MID_A), seq + (i + 3,), mode))
        mk(_factor_task(c11, seq + (i + 4,), mode))
    elif t.kind == HTRSL:
        bL, bM = t.blocks
        if bM.is_leaf:
            raise ValueError("cannot refine a leaf solve")
        if bL.is_leaf:
            raise ValueError("structured solve against a leaf diagonal")
        (l00, _), (l10, l11) = bL.children
        (m00, m01), (m10, m11) = bM.children
        mids = t.mids
        mL, mM, mX = mids
        i = 0
        if mode == COMBINED:
            mk(_shift_task(bM, seq + (i,)))
            i += 1
        mk(_solve_l_task(l00, m00, mids, seq + (i,), mode))
        mk(_solve_l_task(l00, m01, mids, seq + (i + 1,), mode))
        mk(_mul_task(-1.0, l10, m00, m10, (mL, mX, mM), seq + (i + 2,), mode))
        mk(_mul_task(-1.0, l10, m01, m11, (mL, mX, mM), seq + (i + 3,), mode))
        mk(_solve_l_task(l11, m10, mids, seq + (i + 4,), mode))
        mk(_solve_l_task(l11, m11, mids, seq + (i + 5,), mode))
    elif t.kind == HTRSU:
        bU, bM = t.blocks
        if bM.is_leaf:
            raise ValueError("cannot refine a leaf solve")
        if bU.is_leaf:
            raise ValueError("structured solve against a leaf diagonal")
        (u00, u01), (_, u11) = bU.children
        (m00, m01), (m10, m11) = bM.children
        mids = t.mids
        mU, mM, mX = mids
        i = 0
        if mode == COMBINED:
            mk(_shift_task(bM, seq + (i,)))
            i += 1
        mk(_solve_u_task(u00, m00, mids, seq + (i,), mode))
        mk(_solve_u_task(u00, m10, mids, seq + (i + 1,), mode))
        mk(_mul_task(-1.0, m00, u01, m01, (mX, mU, mM), seq + (i + 2,), mode))
        mk(_mul_task(-1.0, m10, u01, m11, (mX, mU, mM), seq + (i + 3,), mode))
        mk(_solve_u_task(u11, m01, mids, seq + (i + 4,), mode))
        mk(_solve_u_task(u11, m11, mids, seq + (i + 5,), mode))
    elif t.kind in (HMUL, ADD_UPD):
        bA, bB, bC = t.blocks
        if bA.is_leaf or bB.is_leaf or bC.is_leaf:
            raise ValueError("cannot refine an update with leaf operands")
        k = 0
        for i in range(2):
            for j in range(2):
                for l in range(2):
                    mk(_mul_task(t.alpha, bA.children[i][l], bB.children[l][j],
                                 bC.children[i][j], t.mids, seq + (k,), mode))
                    k += 1
    else:
        raise ValueError(f"task kind {t.kind} is not refinable")
    _auto_local_edges(subs)
    t.subs = subs
    return subs


def refine_sub_deps(t: Task):
    """Replace edges of a refined task by edges of its matching sub-tasks."""
    for g in t.succ:
        targets = g.subs if g.subs else (g,)
        for tp in t.subs:
            for s in targets:
                if tp is not s and precedes(tp, s):
                    tp.succ.add(s)


def refine_loc_deps(t: Task) -> bool:
    """Narrow edges of an unrefined task to refined successors' sub-tasks.

    Returns whether the successor set changed (drives convergence).
    """
    new_succ = set()
    for g in t.succ:
        if g.subs:
            for s in g.subs:
                if precedes(t, s):
                    new_succ.add(s)
        else:
            new_succ.add(g)
    changed = new_succ != t.succ
    t.succ = new_succ
    return changed


# ---------------------------------------------------------------------------
# edge sparsification
# ---------------------------------------------------------------------------


def _neighbourhood(t: Task):
    n = set(t.subs) if t.subs else {t}
    for s in t.succ:
        if s.subs:
            n.update(s.subs)
        else:
            n.add(s)
    return n


def _bfs_ge2(t: Task, n, succ_of, cap: int):
    """Nodes of G|_n reachable from t by a path of length in [2, cap]."""
    out = set()
    frontier = [s for s in succ_of(t) if s in n]
    seen = set(frontier)
    depth = 1
    while frontier and depth < cap:
        nxt = []
        for u in frontier:
            for v in succ_of(u):
                if v in n:
                    out.add(v)
                    if v not in seen:
                        seen.add(v)
                        nxt.append(v)
        frontier = nxt
        depth += 1
    return out


def remove_redundant(t: Task, n, succ_of, cap: int):
    """Successors of t also reachable by an alternative path in G|_n."""
    reach = _bfs_ge2(t, n, succ_of, cap)
    return [s for s in succ_of(t) if s in reach]


def _sparsify_batch(targets, cap: int, use_guards: bool, pool=None, chunk=256):
    """Sparsify every target against the batch-start edge state.

    All removal decisions are computed from a single snapshot of the
    current edge sets and committed afterwards, so the removed edge set
    does not depend on traversal or scheduling order.  Each commit
    touches only the target's own (or its sub-tasks' own) successor
    sets; in guarded mode the per-task guards over the neighbourhood are
    acquired in ascending seq order, all before any removal.
    """
    work = []
    snap_members = set()
    for t in targets:
        n = _neighbourhood(t)
        prune = t.subs if t.subs else [t]
        work.append((n, prune))
        snap_members |= n
        snap_members.update(prune)
    snapshot = {u: tuple(u.succ) for u in snap_members}
    succ_of = snapshot.__getitem__

    def decide(items):
        return [[(tp, remove_redundant(tp, n, succ_of, cap)) for tp in prune]
                for n, prune in items]

    def commit(pairs):
        for (n, prune), dec in pairs:
            guards = sorted(n | set(prune), key=lambda u: u.seq) if use_guards else ()
            for u in guards:
                u.guard().acquire()
            try:
                for tp, removals in dec:
                    if removals:
                        tp.succ.difference_update(removals)
            finally:
                for u in reversed(guards):
                    u.guard().release()

    if pool is None:
        decisions = decide(work)
        commit(list(zip(work, decisions)))
    else:
        wchunks = [work[i:i + chunk] for i in range(0, len(work), chunk)]
        decisions = []
        for part in pool.map(decide, wchunks):
            decisions.extend(part)
        pairs = list(zip(work, decisions))
        pchunks = [pairs[i:i + chunk] for i in range(0, len(pairs), chunk)]
        list(pool.map(commit, pchunks))


# ---------------------------------------------------------------------------
# DAG computation
# ---------------------------------------------------------------------------


class CycleError(RuntimeError):
    pass


class TaskGraph:
    """Final node and edge sets of a refinement run."""

    def __init__(self, nodes, mode=STD):
        self.nodes = sorted(nodes, key=lambda t: t.seq)
        self.mode = mode
        index = {id(t) for t in self.nodes}
        for t in self.nodes:
            for s in t.succ:
                if id(s) not in index:
                    raise CycleError("edge into a non-final task")

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def n_edges(self) -> int:
        return sum(len(t.succ) for t in self.nodes)

    def stats(self):
        return self.n_nodes, self.n_edges

    def edges(self):
        for t in self.nodes:
            for s in t.succ:
                yield t, s

    def canonical_nodes(self):
        keys = sorted(t.key() for t in self.nodes)
        if len(set(keys)) != len(keys):
            raise CycleError("duplicate task keys in graph")
        return tuple(keys)

    def canonical_edges(self):
        return tuple(sorted((u.key(), v.key()) for u, v in self.edges()))


def check_acyclic(g: TaskGraph) -> bool:
    """Repeatedly remove zero-in-degree nodes; True iff all are removed."""
    indeg = {id(t): 0 for t in g.nodes}
    for _, v in g.edges():
        indeg[id(v)] += 1
    ready = [t for t in g.nodes if indeg[id(t)] == 0]
    seen = 0
    while ready:
        u = ready.pop()
        seen += 1
        for v in u.succ:
            indeg[id(v)] -= 1
            if indeg[id(v)] == 0:
                ready.append(v)
    return seen == len(g.nodes)


def transitive_closure(g: TaskGraph):
    """Reachability as bitsets keyed by canonical task key."""
    order = sorted(g.nodes, key=lambda t: t.key())
    bit = {id(t): 1 << i for i, t in enumerate(order)}
    indeg = {id(t): 0 for t in g.nodes}
    for _, v in g.edges():
        indeg[id(v)] += 1
    ready = [t for t in g.nodes if indeg[id(t)] == 0]
    topo = []
    while ready:
        u = ready.pop()
        topo.append(u)
        for v in u.succ:
            indeg[id(v)] -= 1
            if indeg[id(v)] == 0:
                ready.append(v)
    if len(topo) != len(g.nodes):
        raise CycleError("closure of a cyclic graph")
    reach = {id(t): 0 for t in g.nodes}
    for u in reversed(topo):
        r = 0
        for v in u.succ:
            r |= bit[id(v)] | reach[id(v)]
        reach[id(u)] = r
    return {t.key(): reach[id(t)] for t in g.nodes}


def stats(g: TaskGraph):
    return g.stats()


def compute_dag(root: Task, stop_size: int = 0, *, sparsify: bool = False,
                max_path_len: int = 2, mode: str = STD,
                _pool=None, _chunk: int = 256) -> TaskGraph:
    """Iterative worklist refinement of the root task into a DAG.

    Tasks in the current set are refined; refined tasks push their
    sub-tasks (with narrowed inherited edges) into the next set, while
    unrefined tasks retire once their successor set stops changing.
    """
    retired = []
    current = [root]
    rounds = 0
    while current:
        rounds += 1
        if rounds > 10_000:
            raise CycleError("refinement failed to converge")

        def do_refine(chunk):
            for g in chunk:
                if g.subs is None and refinable(g, stop_size):
                    refine(g, mode)

        def do_deps(chunk):
            nxt, done, starg = [], [], []
            for g in chunk:
                if g.subs:
                    refine_sub_deps(g)
                    nxt.extend(g.subs)
                    if sparsify:
                        starg.append(g)
                else:
                    if refine_loc_deps(g):
                        nxt.append(g)
                    else:
                        done.append(g)
                        if sparsify:
                            starg.append(g)
            return nxt, done, starg

        if _pool is None:
            do_refine(current)
            nxt, done, starg = do_deps(current)
        else:
            chunks = [current[i:i + _chunk] for i in range(0, len(current), _chunk)]
            list(_pool.map(do_refine, chunks))
            nxt, done, starg = [], [], []
            for part in _pool.map(do_deps, chunks):
                nxt.extend(part[0])
                done.extend(part[1])
                starg.extend(part[2])

        if sparsify and starg:
            _sparsify_batch(starg, max_path_len, use_guards=_pool is not None,
                            pool=_pool, chunk=_chunk)
        retired.extend(done)
        current = nxt

    g = TaskGraph(retired, mode=mode)
    if not check_acyclic(g):
        raise CycleError("refinement produced a cyclic graph")
    return g


def par_compute_dag(root: Task, stop_size: int = 0, *, workers: int = 1,
                    sparsify: bool = False, max_path_len: int = 2,
                    mode: str = STD, chunk_size: int = 256) -> TaskGraph:
    """Parallel variant of :func:`compute_dag` over chunked worksets.

    Produces the same node and edge sets as the sequential build.
    """
    if workers < 1:
        raise ValueError("workers must be >= 1")
    if workers == 1:
        return compute_dag(root, stop_size, sparsify=sparsify,
                           max_path_len=max_path_len, mode=mode)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return compute_dag(root, stop_size, sparsify=sparsify,
                           max_path_len=max_path_len, mode=mode,
                           _pool=pool, _chunk=chunk_size)


# ---------------------------------------------------------------------------
# top-level builders
# ---------------------------------------------------------------------------


def _accu_tree(block_root: Block, stop_size: int):
    """Shift/apply tasks over the block tree (merged-mode half graph)."""
    by_uid = {}

    def walk(b: Block, seq):
        terminal = b.is_leaf or not _above_stop(b, stop_size)
        t = _apply_task(b, seq) if terminal else _shift_task(b, seq)
        by_uid[b.uid] = t
        if not terminal:
            k = 0
            for row in b.children:
                for ch in row:
                    t.succ.add(walk(ch, seq + (k,)))
                    k += 1
        return t

    walk(block_root, (0,))
    return by_uid


def build_hlu_dag(block_root: Block, mode: str = STD, *, stop_size: int = 0,
                  sparsify: bool = False, max_path_len: int = 2,
                  workers: int = 1, chunk_size: int = 256) -> TaskGraph:
    """Task graph for the H-LU factorization of a matrix over ``block_root``."""
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}")
    if mode == COMBINED and sparsify:
        # a removed accumulator edge cannot be recovered by later
        # refinement: sub-tasks would lose their shift ordering
        raise ValueError("edge sparsification is not valid in combined "
                         "accumulator mode")
    root = _factor_task(block_root, (1,) if mode == MERGED else (0,), mode)
    arith = par_compute_dag(root, stop_size, workers=workers, sparsify=sparsify,
                            max_path_len=max_path_len, mode=mode,
                            chunk_size=chunk_size)
    if mode != MERGED:
        return arith

    acc_by_uid = _accu_tree(block_root, stop_size)
    for t in arith.nodes:
        if t.kind in FACTOR_KINDS:
            acc_by_uid[t.blocks[0].uid].succ.add(t)
        elif t.kind in SOLVE_KINDS:
            acc_by_uid[t.blocks[1].uid].succ.add(t)
        elif t.kind == ADD_UPD:
            t.succ.add(acc_by_uid[t.blocks[2].uid])
    g = TaskGraph(list(acc_by_uid.values()) + arith.nodes, mode=MERGED)
    if not check_acyclic(g):
        raise CycleError("merged accumulator graph is cyclic")
    return g


def build_accu_dag(block_root: Block, mode: str = "combined", *,
                   stop_size: int = 0, sparsify: bool = False,
                   max_path_len: int = 2, workers: int = 1) -> TaskGraph:
    """Accumulator-arithmetic H-LU DAG, combined or merged construction."""
    if mode not in ("combined", "merged"):
        raise ValueError(f"unknown accumulator mode {mode!r}")
    full = COMBINED if mode == "combined" else MERGED
    return build_hlu_dag(block_root, full, stop_size=stop_size,
                         sparsify=sparsify, max_path_len=max_path_len,
                         workers=workers)


# ---------------------------------------------------------------------------
# export
# ---------------------------------------------------------------------------

_KIND_COLORS = {
    HLU: "indianred1", LEAF_FACTOR: "indianred1",
    HTRSL: "skyblue1", HTRSU: "skyblue1",
    LEAF_SOLVE_L: "skyblue1", LEAF_SOLVE_U: "skyblue1",
    HMUL: "palegreen2", LEAF_UPDATE: "palegreen2", ADD_UPD: "palegreen2",
    SHIFT_UPD: "gold1", APPLY_UPD: "gold1",
}


def to_dot(g: TaskGraph) -> str:
    """Graphviz rendering: one node per task, fill color by kind."""
    ids = {id(t): i for i, t in enumerate(g.nodes)}
    lines = ["digraph taskgraph {", "  node [style=filled, shape=box];"]
    for t in g.nodes:
        b = t.blocks[-1]
        r, c = b.row.indices, b.col.indices
        label = f"{t.kind}\\n[{r.first},{r.last})x[{c.first},{c.last})"
        color = _KIND_COLORS.get(t.kind, "gray80")
        lines.append(f'  n{ids[id(t)]} [label="{label}", fillcolor={color}];')
    for u, v in g.edges():
        lines.append(f"  n{ids[id(u)]} -> n{ids[id(v)]};")
    lines.append("}")
    return "\n".join(lines) + "\n"
