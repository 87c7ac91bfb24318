# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled dual-descent loop; mirrors ``_dual_loop_py.advance`` operation for operation."""


cdef inline double grid_value(long long k, double eps, long long M, double U) nogil:
    if k < M:
        return <double>k * eps
    return U


cdef inline long long round_index(double x, double eps, long long M, double U) nogil:
    cdef long long j = <long long>(x / eps)
    cdef double lo_v, hi_v
    if j > M - 1:
        j = M - 1
    while j > 0 and <double>j * eps > x:
        j -= 1
    lo_v = <double>j * eps
    hi_v = grid_value(j + 1, eps, M, U)
    while j + 1 < M and hi_v <= x:
        j += 1
        lo_v = hi_v
        hi_v = grid_value(j + 1, eps, M, U)
    if x - lo_v <= hi_v - x:
        return j
    return j + 1


def round_to_grid(double x, double eps, long long M, double U):
    return round_index(x, eps, M, U)


def advance(long long t, long long T, long long k, int cur,
            double eps, long long M, double U, double eta,
            double[::1] lo, double[::1] hi, double[::1] grad, int n_pol,
            long long[::1] count, long long[::1] sumk, long long[::1] ntop,
            long long tail_start, double[::1] tail,
            long long[::1] rec_k, int[::1] rec_pid, bint record):
    """Run dual iterations ``t .. T-1`` while cached best responses cover ``lambda_t``.

    Returns ``(t, k, cur, need)``; ``need`` is true when ``lambda_t`` lies in
    no cached optimality interval and a planner call is required.
    """
    cdef double lam, x, tail_acc = tail[0]
    cdef int p
    cdef bint need = False
    with nogil:
        while t < T:
            lam = grid_value(k, eps, M, U)
            if cur < 0 or not (lo[cur] <= lam <= hi[cur]):
                cur = -1
                for p in range(n_pol):
                    if lo[p] <= lam <= hi[p]:
                        cur = p
                        break
                if cur < 0:
                    need = True
                    break
            if record:
                rec_k[t] = k
                rec_pid[t] = cur
            count[cur] += 1
            if k < M:
                sumk[cur] += k
            else:
                ntop[cur] += 1
            if t >= tail_start:
                tail_acc += lam
            x = lam - eta * grad[cur]
            if x < 0.0:
                x = 0.0
            elif x > U:
                x = U
            k = round_index(x, eps, M, U)
            t += 1
    tail[0] = tail_acc
    return t, k, cur, need
