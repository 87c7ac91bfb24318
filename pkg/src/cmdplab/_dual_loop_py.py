"""Pure-Python dual-descent loop, used when the compiled kernel is unavailable.

Kept operation-for-operation identical to ``_dual_loop.pyx`` so both backends
produce bit-identical traces.
"""


def grid_value(k, eps, M, U):
    if k < M:
        return float(k) * eps
    return U


def round_to_grid(x, eps, M, U):
    j = int(x / eps)
    if j > M - 1:
        j = M - 1
    while j > 0 and float(j) * eps > x:
        j -= 1
    lo_v = float(j) * eps
    hi_v = grid_value(j + 1, eps, M, U)
    while j + 1 < M and hi_v <= x:
        j += 1
        lo_v = hi_v
        hi_v = grid_value(j + 1, eps, M, U)
    if x - lo_v <= hi_v - x:
        return j
    return j + 1


def advance(t, T, k, cur, eps, M, U, eta, lo, hi, grad, n_pol,
            count, sumk, ntop, tail_start, tail, rec_k, rec_pid, record):
    lo_l = [float(v) for v in lo[:n_pol]]
    hi_l = [float(v) for v in hi[:n_pol]]
    grad_l = [float(v) for v in grad[:n_pol]]
    cnt = [int(v) for v in count[:n_pol]]
    sk = [int(v) for v in sumk[:n_pol]]
    nt = [int(v) for v in ntop[:n_pol]]
    tail_acc = float(tail[0])
    t, k, M, T = int(t), int(k), int(M), int(T)
    eps, U, eta = float(eps), float(U), float(eta)
    need = False
    while t < T:
        lam = float(k) * eps if k < M else U
        if cur < 0 or not (lo_l[cur] <= lam <= hi_l[cur]):
            cur = -1
            for p in range(n_pol):
                if lo_l[p] <= lam <= hi_l[p]:
                    cur = p
                    break
            if cur < 0:
                need = True
                break
        if record:
            rec_k[t] = k
            rec_pid[t] = cur
        cnt[cur] += 1
        if k < M:
            sk[cur] += k
        else:
            nt[cur] += 1
        if t >= tail_start:
            tail_acc += lam
        x = lam - eta * grad_l[cur]
        if x < 0.0:
            x = 0.0
        elif x > U:
            x = U
        k = round_to_grid(x, eps, M, U)
        t += 1
    count[:n_pol] = cnt
    sumk[:n_pol] = sk
    ntop[:n_pol] = nt
    tail[0] = tail_acc
    return t, k, cur, need
