# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled twins of the loops in ``_fallback``; same arithmetic order."""
import numpy as np
cimport numpy as cnp

cnp.import_array()


def lindley(interarrival, service):
    cdef cnp.ndarray[cnp.float64_t, ndim=1] a = np.ascontiguousarray(interarrival, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] s = np.ascontiguousarray(service, dtype=np.float64)
    cdef Py_ssize_t n = s.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.empty(n, dtype=np.float64)
    cdef double w = 0.0
    cdef Py_ssize_t i
    if n == 0:
        return out
    out[0] = 0.0
    for i in range(1, n):
        w = w + s[i - 1] - a[i]
        if w < 0.0:
            w = 0.0
        out[i] = w
    return out


cdef inline double _station_tw(double load, double mu, double sigma) nogil:
    return load * load * (1.0 + mu * mu * sigma * sigma) / (2.0 * mu * (mu - load)) + load / mu


cdef bint _greater(cnp.int64_t[:] a, cnp.int64_t[:] b, Py_ssize_t n_st, Py_ssize_t n_cust) nogil:
    cdef Py_ssize_t s, j
    cdef bint ina, inb
    for s in range(n_st):
        for j in range(n_cust):
            ina = a[j] == s
            inb = b[j] == s
            if ina != inb:
                return ina
    return False


def best_assignment(st_fac, st_mu, st_sigma, st_w, lam, d, double fixed_cost):
    cdef cnp.int64_t[:] fac = np.ascontiguousarray(st_fac, dtype=np.int64)
    cdef double[:] mu = np.ascontiguousarray(st_mu, dtype=np.float64)
    cdef double[:] sig = np.ascontiguousarray(st_sigma, dtype=np.float64)
    cdef double[:] wt = np.ascontiguousarray(st_w, dtype=np.float64)
    cdef double[:] lm = np.ascontiguousarray(lam, dtype=np.float64)
    cdef double[:, :] dd = np.ascontiguousarray(d, dtype=np.float64)
    cdef Py_ssize_t n_st = fac.shape[0]
    cdef Py_ssize_t n_cust = lm.shape[0]
    cdef double best_val = float("inf")
    cdef bint found = False
    if n_st == 0:
        if n_cust == 0:
            return fixed_cost, []
        return best_val, None
    assign_arr = np.zeros(n_cust, dtype=np.int64)
    best_arr = np.zeros(n_cust, dtype=np.int64)
    loads_arr = np.zeros(n_st, dtype=np.float64)
    cdef cnp.int64_t[:] assign = assign_arr
    cdef cnp.int64_t[:] best = best_arr
    cdef double[:] loads = loads_arr
    cdef Py_ssize_t s, j, i
    cdef bint ok
    cdef double waiting, travel, val
    with nogil:
        while True:
            for s in range(n_st):
                loads[s] = 0.0
            for j in range(n_cust):
                loads[assign[j]] += lm[j]
            ok = True
            for s in range(n_st):
                if loads[s] >= mu[s]:
                    ok = False
                    break
            if ok:
                waiting = 0.0
                for s in range(n_st):
                    waiting += wt[s] * _station_tw(loads[s], mu[s], sig[s])
                travel = 0.0
                for s in range(n_st):
                    i = fac[s]
                    for j in range(n_cust):
                        if assign[j] == s:
                            travel += dd[i, j] * lm[j]
                val = fixed_cost + waiting + travel
                if val < best_val or (found and val == best_val and _greater(assign, best, n_st, n_cust)):
                    best_val = val
                    found = True
                    for j in range(n_cust):
                        best[j] = assign[j]
            j = n_cust - 1
            while j >= 0:
                assign[j] += 1
                if assign[j] < n_st:
                    break
                assign[j] = 0
                j -= 1
            if j < 0:
                break
    if not found:
        return best_val, None
    return best_val, [int(v) for v in best_arr]
