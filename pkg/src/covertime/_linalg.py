"""First-passage linear solves shared by the hitting-time and product solvers."""

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.sparse.csgraph import breadth_first_order

from .errors import SingularSystemError

DENSE_SOLVE_LIMIT = 2000


def can_reach(adj, sources):
    """Mask of nodes with a directed path (length >= 0) into ``sources``.

    ``adj`` is an ``n x n`` sparse or dense matrix; ``adj[i, j] != 0`` is the
    edge ``i -> j``.
    """
    n = adj.shape[0]
    sources = np.asarray(sources, dtype=bool)
    if not sources.any():
        return np.zeros(n, dtype=bool)
    coo = sp.coo_matrix(adj)
    nz = coo.data != 0
    src_idx = np.flatnonzero(sources)
    # reversed edges plus a virtual root (index n) pointing at every source
    rows = np.concatenate([coo.col[nz], np.full(len(src_idx), n)])
    cols = np.concatenate([coo.row[nz], src_idx])
    rev = sp.csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(n + 1, n + 1))
    order = breadth_first_order(rev, n, directed=True, return_predecessors=False)
    mask = np.zeros(n + 1, dtype=bool)
    mask[order] = True
    return mask[:n]


def solve_first_passage(Q, b, exits):
    """Solve ``x = b + Q x`` for the expected cost until absorption.

    Parameters
    ----------
    Q : (n, n) array or sparse matrix
        Substochastic transition block among the unknown states.
    b : (n,) array
        Expected one-step cost plus expected terminal cost. ``inf`` entries
        mark states that may jump into an infinite-cost known state.
    exits : (n,) bool array
        States with positive probability of leaving the unknown block.

    Returns
    -------
    x : (n,) array
        ``inf`` wherever absorption does not happen with probability one or
        the absorbed cost is infinite.
    """
    n = len(b)
    b = np.asarray(b, dtype=float)
    x = np.full(n, np.inf)
    if n == 0:
        return x
    Qs = sp.csr_matrix(Q)
    Qs.eliminate_zeros()
    support = Qs.copy()
    support.data[:] = 1.0
    alive = np.isfinite(b)
    while True:
        dead = ~alive
        leaks = np.asarray(support[:, dead].sum(axis=1)).ravel() > 0 if dead.any() else np.zeros(n, bool)
        alive = alive & ~leaks
        keep = sp.diags(alive.astype(float))
        reach = can_reach(keep @ support @ keep, alive & exits)
        new = alive & reach
        if np.array_equal(new, alive):
            break
        alive = new
    idx = np.flatnonzero(alive)
    if len(idx) == 0:
        return x
    sub = Qs[idx][:, idx]
    try:
        if len(idx) <= DENSE_SOLVE_LIMIT:
            A = np.eye(len(idx)) - sub.toarray()
            x[idx] = np.linalg.solve(A, b[idx])
        else:
            A = (sp.identity(len(idx), format="csc") - sub).tocsc()
            x[idx] = spla.spsolve(A, b[idx])
    except np.linalg.LinAlgError as exc:
        raise SingularSystemError(str(exc)) from exc
    if not np.all(np.isfinite(x[idx])):
        raise SingularSystemError("non-finite solution on the absorbing subsystem")
    return x
