"""Pure-Python implementations of the hot loops.

These mirror ``_kernels.pyx`` operation for operation so both produce
bit-identical results.
"""
import numpy as np


def lindley(interarrival, service):
    """Queue waits from the Lindley recursion.

    ``wq[0] = 0`` and ``wq[n] = max(0, wq[n-1] + service[n-1] - interarrival[n])``.
    """
    a = np.asarray(interarrival, dtype=np.float64)
    s = np.asarray(service, dtype=np.float64)
    n = s.shape[0]
    out = np.empty(n, dtype=np.float64)
    if n == 0:
        return out
    a_l = a.tolist()
    s_l = s.tolist()
    w = 0.0
    out_l = [0.0] * n
    for i in range(1, n):
        w = w + s_l[i - 1] - a_l[i]
        if w < 0.0:
            w = 0.0
        out_l[i] = w
    out[:] = out_l
    return out


def _station_tw(load, mu, sigma):
    return load * load * (1.0 + mu * mu * sigma * sigma) / (2.0 * mu * (mu - load)) + load / mu


def best_assignment(st_fac, st_mu, st_sigma, st_w, lam, d, fixed_cost):
    """Cheapest customer-to-station assignment for one set of open stations.

    Stations must be sorted by flat (facility, level) index. Returns
    ``(value, assign)`` where ``assign[j]`` is the station position of
    customer ``j``; ``(inf, None)`` when every assignment overloads a station.
    Exact ties go to the assignment with the lexicographically greater
    0/1 assignment vector.
    """
    n_st = len(st_fac)
    n_cust = len(lam)
    st_fac = [int(v) for v in st_fac]
    st_mu = [float(v) for v in st_mu]
    st_sigma = [float(v) for v in st_sigma]
    st_w = [float(v) for v in st_w]
    lam = [float(v) for v in lam]
    d = [[float(v) for v in row] for row in np.asarray(d)]
    best_val = float("inf")
    best = None
    if n_st == 0:
        if n_cust == 0:
            return float(fixed_cost), []
        return best_val, None
    assign = [0] * n_cust
    loads = [0.0] * n_st
    while True:
        for s in range(n_st):
            loads[s] = 0.0
        for j in range(n_cust):
            loads[assign[j]] += lam[j]
        ok = True
        for s in range(n_st):
            if loads[s] >= st_mu[s]:
                ok = False
                break
        if ok:
            waiting = 0.0
            for s in range(n_st):
                waiting += st_w[s] * _station_tw(loads[s], st_mu[s], st_sigma[s])
            travel = 0.0
            for s in range(n_st):
                i = st_fac[s]
                for j in range(n_cust):
                    if assign[j] == s:
                        travel += d[i][j] * lam[j]
            val = fixed_cost + waiting + travel
            if val < best_val or (val == best_val and _greater(assign, best, n_st)):
                best_val = val
                best = list(assign)
        # odometer, last customer fastest
        j = n_cust - 1
        while j >= 0:
            assign[j] += 1
            if assign[j] < n_st:
                break
            assign[j] = 0
            j -= 1
        if j < 0:
            break
    return best_val, best


def _greater(a, b, n_st):
    for s in range(n_st):
        for j in range(len(a)):
            ina = a[j] == s
            inb = b[j] == s
            if ina != inb:
                return ina
    return False
