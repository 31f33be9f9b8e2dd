"""Undirected communication graphs.

Plain 0/1 adjacency matrices at desk scale (N <= ~100): dense Laplacians,
eigenvalues via the symmetric eigensolver, connectivity via breadth-first
search. Connectivity is decided by traversal, never by thresholding the
spectrum, so tolerance choices cannot flip it.
"""

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class Topology:
    """Undirected graph on agents 1..N.

    adjacency is a symmetric 0/1 matrix with zero diagonal; neighbor lists are
    derived from it (ascending order) and cached.
    """

    adjacency: np.ndarray
    neighbors: tuple = field(init=False, compare=False)

    def __post_init__(self):
        a = np.asarray(self.adjacency)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError("adjacency must be a square matrix")
        if a.shape[0] < 1:
            raise ValueError("need at least one node")
        if not np.array_equal(a, a.T):
            raise ValueError("adjacency must be symmetric")
        if not np.all((a == 0) | (a == 1)):
            raise ValueError("adjacency entries must be 0 or 1")
        if np.any(np.diag(a) != 0):
            raise ValueError("adjacency diagonal must be zero")
        object.__setattr__(self, "adjacency", a.astype(np.int64))
        nbrs = tuple(tuple(int(j) for j in np.flatnonzero(a[i]))
                     for i in range(a.shape[0]))
        object.__setattr__(self, "neighbors", nbrs)

    @property
    def node_count(self):
        return self.adjacency.shape[0]

    @staticmethod
    def ring(n):
        # n == 2 degenerates to a single edge (the two arcs coincide)
        if n < 2:
            raise ValueError("ring needs at least 2 nodes")
        a = np.zeros((n, n), dtype=np.int64)
        for i in range(n):
            a[i, (i + 1) % n] = 1
            a[(i + 1) % n, i] = 1
        return Topology(a)

    @staticmethod
    def complete(n):
        if n < 2:
            raise ValueError("complete graph needs at least 2 nodes")
        a = np.ones((n, n), dtype=np.int64) - np.eye(n, dtype=np.int64)
        return Topology(a)

    @staticmethod
    def path(n):
        if n < 2:
            raise ValueError("path needs at least 2 nodes")
        a = np.zeros((n, n), dtype=np.int64)
        for i in range(n - 1):
            a[i, i + 1] = 1
            a[i + 1, i] = 1
        return Topology(a)

    def subgraph(self, active):
        """Topology induced on the given active-node mask (length N booleans).

        Node identities are preserved: inactive nodes stay in the matrix with
        all incident edges removed, so indices keep their meaning.
        """
        active = np.asarray(active, dtype=bool)
        a = self.adjacency * np.outer(active, active)
        return Topology(a)


def laplacian(topology):
    """Graph Laplacian L = D - A as a float matrix."""
    a = topology.adjacency.astype(np.float64)
    return np.diag(a.sum(axis=1)) - a


def is_connected(topology, active=None):
    """Breadth-first reachability over all (active) nodes.

    With an active mask, connectivity is judged on the induced subgraph over
    the active nodes only; a single active node counts as connected.
    """
    n = topology.node_count
    if active is None:
        active = np.ones(n, dtype=bool)
    else:
        active = np.asarray(active, dtype=bool)
    idx = np.flatnonzero(active)
    if idx.size == 0:
        return False
    seen = np.zeros(n, dtype=bool)
    queue = [int(idx[0])]
    seen[idx[0]] = True
    while queue:
        i = queue.pop()
        for j in topology.neighbors[i]:
            if active[j] and not seen[j]:
                seen[j] = True
                queue.append(int(j))
    return bool(np.all(seen[active]))


def algebraic_connectivity(L):
    """Second-smallest eigenvalue of a Laplacian; positive iff connected."""
    L = np.asarray(L, dtype=np.float64)
    if L.ndim != 2 or L.shape[0] != L.shape[1] or L.shape[0] < 2:
        raise ValueError("need a square Laplacian of size >= 2")
    w = np.linalg.eigvalsh(L)
    return float(w[1])


def orthonormal_complement(n):
    """N x (N-1) matrix R with R^T R = I and 1^T R = 0.

    Built from the Householder reflection mapping e_1 to 1/sqrt(N): columns
    2..N of the reflector are an orthonormal basis of the complement of the
    all-ones vector. R is not unique; consumers may rely only on the two
    postconditions.
    """
    if n < 2:
        raise ValueError("need at least 2 nodes")
    ones = np.ones(n) / np.sqrt(n)
    v = ones - np.eye(n)[:, 0]
    nv = np.linalg.norm(v)
    if nv < 1e-15:
        return np.eye(n)[:, 1:]
    v = v / nv
    H = np.eye(n) - 2.0 * np.outer(v, v)
    return H[:, 1:]


def random_connected_topology(rng, n, edge_prob=0.3):
    """Random graph guaranteed connected: a random spanning tree plus
    independent extra edges with the given probability."""
    if n < 2:
        raise ValueError("need at least 2 nodes")
    a = np.zeros((n, n), dtype=np.int64)
    order = rng.permutation(n)
    for k in range(1, n):
        i = order[k]
        j = order[rng.integers(0, k)]
        a[i, j] = a[j, i] = 1
    extra = rng.random((n, n)) < edge_prob
    extra = np.triu(extra, 1)
    a = np.maximum(a, (extra | extra.T).astype(np.int64))
    np.fill_diagonal(a, 0)
    return Topology(a)
