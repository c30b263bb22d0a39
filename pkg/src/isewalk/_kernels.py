"""Compiled inner loops shared by several modules.

Everything here works on CSR adjacency arrays (``indptr``, ``indices``) of an
undirected simple graph, so callers keep the Python side free of per-vertex
loops.
"""
import numpy as np
from numba import njit


@njit(cache=True)
def bfs_distances(indptr, indices, source):
    n = indptr.size - 1
    dist = np.full(n, -1, np.int64)
    queue = np.empty(n, np.int64)
    dist[source] = 0
    queue[0] = source
    head, tail = 0, 1
    while head < tail:
        u = queue[head]
        head += 1
        for k in range(indptr[u], indptr[u + 1]):
            w = indices[k]
            if dist[w] < 0:
                dist[w] = dist[u] + 1
                queue[tail] = w
                tail += 1
    return dist


@njit(cache=True)
def all_pairs_max_distance(indptr, indices):
    """Diameter of a connected graph by BFS from every vertex."""
    n = indptr.size - 1
    dist = np.empty(n, np.int64)
    queue = np.empty(n, np.int64)
    best = 0
    for s in range(n):
        dist[:] = -1
        dist[s] = 0
        queue[0] = s
        head, tail = 0, 1
        while head < tail:
            u = queue[head]
            head += 1
            du = dist[u]
            if du > best:
                best = du
            for k in range(indptr[u], indptr[u + 1]):
                w = indices[k]
                if dist[w] < 0:
                    dist[w] = du + 1
                    queue[tail] = w
                    tail += 1
    return best


@njit(cache=True)
def dfs_bridges(indptr, indices, root):
    """Iterative Tarjan low-link pass from ``root``.

    Returns the DFS parent array and a per-vertex flag telling whether the
    tree edge (parent[v], v) is a bridge.
    """
    n = indptr.size - 1
    tin = np.full(n, -1, np.int64)
    low = np.zeros(n, np.int64)
    parent = np.full(n, -1, np.int64)
    bridge_below = np.zeros(n, np.bool_)
    ptr = indptr[:-1].copy()
    stack = np.empty(n, np.int64)
    timer = 0
    top = 0
    stack[0] = root
    tin[root] = 0
    low[root] = 0
    timer = 1
    while top >= 0:
        u = stack[top]
        if ptr[u] < indptr[u + 1]:
            w = indices[ptr[u]]
            ptr[u] += 1
            if tin[w] < 0:
                parent[w] = u
                tin[w] = timer
                low[w] = timer
                timer += 1
                top += 1
                stack[top] = w
            elif w != parent[u]:
                if tin[w] < low[u]:
                    low[u] = tin[w]
        else:
            top -= 1
            p = parent[u]
            if p >= 0:
                if low[u] < low[p]:
                    low[p] = low[u]
                if low[u] > tin[p]:
                    bridge_below[u] = True
    return parent, bridge_below, tin


@njit(cache=True)
def last_separator(indptr, indices, root, parent, bridge_below, selected, fallback):
    """For every vertex, the deepest selected cut-point strictly separating it
    from the root, or ``fallback`` if there is none.

    ``parent``/``bridge_below`` come from :func:`dfs_bridges`; a cut-point
    separates everything below each of its bridges.
    """
    n = indptr.size - 1
    proj = np.full(n, -1, np.int64)
    queue = np.empty(n, np.int64)
    proj[root] = fallback
    queue[0] = root
    head, tail = 0, 1
    seen = np.zeros(n, np.bool_)
    seen[root] = True
    while head < tail:
        u = queue[head]
        head += 1
        for k in range(indptr[u], indptr[u + 1]):
            w = indices[k]
            if seen[w]:
                continue
            seen[w] = True
            if parent[w] == u and bridge_below[w] and selected[u]:
                proj[w] = u
            else:
                proj[w] = proj[u]
            queue[tail] = w
            tail += 1
    return proj


@njit(cache=True)
def group_diameters(indptr, indices, order, starts, anchors, tree_like):
    """Max pairwise graph distance inside each vertex group.

    Group ``g`` consists of ``order[starts[g]:starts[g+1]]``; BFS may also pass
    through ``anchors[g]``.  Tree-like groups use the exact double sweep, the
    others BFS from every member.
    """
    n = indptr.size - 1
    ngroups = starts.size - 1
    allowed = np.full(n, -1, np.int64)
    dist = np.full(n, -1, np.int64)
    queue = np.empty(n, np.int64)
    out = np.zeros(ngroups, np.int64)
    for g in range(ngroups):
        a, b = starts[g], starts[g + 1]
        if b - a <= 1:
            continue
        for i in range(a, b):
            allowed[order[i]] = g
        if anchors[g] >= 0:
            allowed[anchors[g]] = g
        n_src = 2 if tree_like[g] else b - a
        src = order[a]
        best = 0
        for it in range(n_src):
            if not tree_like[g]:
                src = order[a + it]
            dist[src] = 0
            queue[0] = src
            head, tail = 0, 1
            far_v = src
            far_d = 0
            while head < tail:
                u = queue[head]
                head += 1
                for k in range(indptr[u], indptr[u + 1]):
                    w = indices[k]
                    if allowed[w] == g and dist[w] < 0:
                        dist[w] = dist[u] + 1
                        queue[tail] = w
                        tail += 1
            for i in range(a, b):
                v = order[i]
                if dist[v] > far_d:
                    far_d = dist[v]
                    far_v = v
            for i in range(tail):
                dist[queue[i]] = -1
            if far_d > best:
                best = far_d
            src = far_v
        out[g] = best
        for i in range(a, b):
            allowed[order[i]] = -1
        if anchors[g] >= 0:
            allowed[anchors[g]] = -1
    return out


@njit(cache=True)
def seed_kernel(seed):
    np.random.seed(seed)


@njit(cache=True)
def random_walk(indptr, indices, start, steps):
    path = np.empty(steps + 1, np.int64)
    path[0] = start
    u = start
    for i in range(steps):
        lo = indptr[u]
        deg = indptr[u + 1] - lo
        u = indices[lo + np.random.randint(deg)]
        path[i + 1] = u
    return path


@njit(cache=True)
def walk_observables(indptr, indices, start, steps, checkpoints, dist_root, loc, n_walks):
    """Run ``n_walks`` walks of ``steps`` steps from ``start`` and record, at
    each checkpoint m, sums of d(root, X_m), |X_m - X_0| and the indicator
    X_{2m} = X_0 (the latter evaluated at step 2m when 2m <= steps).
    """
    nc = checkpoints.size
    sum_dist = np.zeros(nc)
    sum_euc = np.zeros(nc)
    sum_ret = np.zeros(nc)
    dim = loc.shape[1]
    for _ in range(n_walks):
        u = start
        ci = 0
        ri = 0
        for i in range(1, steps + 1):
            lo = indptr[u]
            deg = indptr[u + 1] - lo
            u = indices[lo + np.random.randint(deg)]
            while ci < nc and checkpoints[ci] == i:
                sum_dist[ci] += dist_root[u]
                if dim > 0:
                    s = 0.0
                    for j in range(dim):
                        dx = loc[u, j] - loc[start, j]
                        s += dx * dx
                    sum_euc[ci] += np.sqrt(s)
                ci += 1
            while ri < nc and 2 * checkpoints[ri] == i:
                if u == start:
                    sum_ret[ri] += 1.0
                ri += 1
    return sum_dist, sum_euc, sum_ret


@njit(cache=True)
def skeleton_trace(path, selected):
    """Successive distinct selected vertices along a path and their clocks."""
    m = path.size
    J = np.empty(m, np.int64)
    A = np.empty(m, np.int64)
    k = 0
    for i in range(m):
        v = path[i]
        if selected[v] and (k == 0 or J[k - 1] != v):
            J[k] = v
            A[k] = i
            k += 1
    return J[:k].copy(), A[:k].copy()


@njit(cache=True)
def walk_skeleton_trace(indptr, indices, start, steps, selected):
    """Fused walk + trace: never materializes the full path."""
    cap = 1024
    J = np.empty(cap, np.int64)
    A = np.empty(cap, np.int64)
    k = 0
    u = start
    for i in range(steps + 1):
        if i > 0:
            lo = indptr[u]
            deg = indptr[u + 1] - lo
            u = indices[lo + np.random.randint(deg)]
        if selected[u] and (k == 0 or J[k - 1] != u):
            if k == cap:
                cap *= 2
                J2 = np.empty(cap, np.int64)
                A2 = np.empty(cap, np.int64)
                J2[:k] = J[:k]
                A2[:k] = A[:k]
                J, A = J2, A2
            J[k] = u
            A[k] = i
            k += 1
    return J[:k].copy(), A[:k].copy()


@njit(cache=True)
def lattice_walk(indptr, indices, cum_prob, hold, start, t_max, absorbing, max_steps):
    """Walk on a weighted lattice with deterministic holding times.

    Stops when the clock reaches ``t_max`` (last holding truncated so the
    clock ends exactly at ``t_max``), when an absorbing site is entered, or
    after ``max_steps`` jumps.  Returns visited sites and entry times.
    """
    cap = 1024
    sites = np.empty(cap, np.int64)
    times = np.empty(cap + 1, np.float64)
    u = start
    clock = 0.0
    k = 0
    sites[0] = u
    times[0] = 0.0
    k = 1
    while True:
        if absorbing[u]:
            break
        if clock + hold[u] >= t_max:
            clock = t_max
            break
        if k > max_steps:
            break
        clock += hold[u]
        lo = indptr[u]
        hi = indptr[u + 1]
        r = np.random.random()
        j = lo
        while j < hi - 1 and cum_prob[j] <= r:
            j += 1
        u = indices[j]
        if k == cap:
            cap *= 2
            s2 = np.empty(cap, np.int64)
            t2 = np.empty(cap + 1, np.float64)
            s2[:k] = sites[:k]
            t2[:k] = times[:k]
            sites, times = s2, t2
        sites[k] = u
        times[k] = clock
        k += 1
    out_t = np.empty(k + 1, np.float64)
    out_t[:k] = times[:k]
    out_t[k] = clock
    return sites[:k].copy(), out_t


@njit(cache=True)
def lattice_hits(indptr, indices, cum_prob, hold, start, absorbing, n_runs, max_steps):
    """Repeated runs until absorption: returns absorbing site and exit time."""
    hit = np.full(n_runs, -1, np.int64)
    tau = np.zeros(n_runs)
    for r in range(n_runs):
        u = start
        clock = 0.0
        steps = 0
        while not absorbing[u] and steps < max_steps:
            clock += hold[u]
            lo = indptr[u]
            hi = indptr[u + 1]
            x = np.random.random()
            j = lo
            while j < hi - 1 and cum_prob[j] <= x:
                j += 1
            u = indices[j]
            steps += 1
        if absorbing[u]:
            hit[r] = u
        tau[r] = clock
    return hit, tau
