"""Open-addressing table of lattice sites, compiled with numba.

Layout mirrors an insertion-ordered dict: ``slots`` (power-of-two length,
linear probing) holds indices into dense entry arrays ``keys`` (coordinates),
``counts`` (local times) and ``first`` (first-visit times).  Entries are
appended in first-visit order and never removed.
"""
import numpy as np
from numba import njit, uint64

EMPTY = -1
MAX_LOAD = 0.5

_MULT = uint64(0x9E3779B97F4A7C15)
_MIX1 = uint64(0xBF58476D1CE4E5B9)
_MIX2 = uint64(0x94D049BB133111EB)


@njit(cache=True, inline="always")
def _hash(vec, d):
    h = uint64(0x2545F4914F6CDD1D)
    for i in range(d):
        h = (h ^ uint64(vec[i])) * _MULT
        h ^= h >> uint64(29)
    h = (h ^ (h >> uint64(30))) * _MIX1
    h = (h ^ (h >> uint64(27))) * _MIX2
    return h ^ (h >> uint64(31))


@njit(cache=True, inline="always")
def _probe(slots, keys, vec, d):
    """Slot holding ``vec``, or the empty slot where it would be inserted."""
    mask = uint64(slots.size - 1)
    h = _hash(vec, d) & mask
    while True:
        e = slots[h]
        if e == EMPTY:
            return h
        same = True
        for i in range(d):
            if keys[e, i] != vec[i]:
                same = False
                break
        if same:
            return h
        h = (h + uint64(1)) & mask


@njit(cache=True)
def lookup_count(slots, keys, counts, vec, d):
    e = slots[_probe(slots, keys, vec, d)]
    if e == EMPTY:
        return 0
    return counts[e]


@njit(cache=True)
def rehash(new_slots, keys, n_entries, d):
    for e in range(n_entries):
        h = _probe(new_slots, keys, keys[e], d)
        new_slots[h] = e


@njit(cache=True)
def ingest(dirs, start, d, pos, slots, keys, counts, first, state, track_new):
    """Walk ``dirs[start:]`` from ``pos``, updating the table in place.

    ``state`` is ``[n_entries, steps, zeta, nu]``.  Stops early, returning the
    index of the first unconsumed step, once the table reaches its load limit;
    the caller grows the arrays and resumes.
    """
    n_entries = state[0]
    t = state[1]
    zeta = state[2]
    nu = state[3]
    limit = min(keys.shape[0], int(slots.size * MAX_LOAD))
    vec = np.empty(d, dtype=np.int64)
    idx = start
    while idx < dirs.size:
        if n_entries >= limit:
            break
        k = dirs[idx]
        if k < d:
            pos[k] += 1
        else:
            pos[k - d] -= 1
        t += 1
        h = _probe(slots, keys, pos, d)
        e = slots[h]
        if track_new and e == EMPTY:
            # Upsilon = {0, e_1}: S_t is new iff neither S_t nor S_t + e_1 was hit before t.
            for i in range(d):
                vec[i] = pos[i]
            vec[0] += 1
            if slots[_probe(slots, keys, vec, d)] == EMPTY:
                zeta += 1
            # Gamma = e_1 + S(1): its point e_1 - e_1 = 0 is S_t itself, already known absent.
            is_new = True
            for j in range(2 * d):
                for i in range(d):
                    vec[i] = pos[i]
                vec[0] += 1
                if j < d:
                    vec[j] += 1
                else:
                    if j == d:
                        continue
                    vec[j - d] -= 1
                if slots[_probe(slots, keys, vec, d)] != EMPTY:
                    is_new = False
                    break
            if is_new:
                nu += 1
        if e == EMPTY:
            e = n_entries
            slots[h] = e
            for i in range(d):
                keys[e, i] = pos[i]
            counts[e] = 1
            first[e] = t
            n_entries += 1
        else:
            counts[e] += 1
        idx += 1
    state[0] = n_entries
    state[1] = t
    state[2] = zeta
    state[3] = nu
    return idx


@njit(cache=True)
def lookup_many(slots, keys, counts, queries, d):
    out = np.zeros(queries.shape[0], dtype=np.int64)
    for q in range(queries.shape[0]):
        e = slots[_probe(slots, keys, queries[q], d)]
        if e != EMPTY:
            out[q] = counts[e]
    return out


@njit(cache=True)
def max_translate_occupation(slots, keys, counts, n_entries, shape, d):
    """max over translates ``A + u`` meeting the visited set of the summed local time."""
    best = 0
    u = np.empty(d, dtype=np.int64)
    vec = np.empty(d, dtype=np.int64)
    for e in range(n_entries):
        for a in range(shape.shape[0]):
            for i in range(d):
                u[i] = keys[e, i] - shape[a, i]
            total = 0
            for b in range(shape.shape[0]):
                for i in range(d):
                    vec[i] = u[i] + shape[b, i]
                f = slots[_probe(slots, keys, vec, d)]
                if f != EMPTY:
                    total += counts[f]
            if total > best:
                best = total
    return best


@njit(cache=True)
def neighbour_counts(slots, keys, counts, n_entries, d):
    """``out[e, j]`` = local time at ``site_e + e_{j+1}`` (0-based direction ``j``)."""
    out = np.zeros((n_entries, 2 * d), dtype=np.int64)
    vec = np.empty(d, dtype=np.int64)
    for e in range(n_entries):
        for j in range(2 * d):
            for i in range(d):
                vec[i] = keys[e, i]
            if j < d:
                vec[j] += 1
            else:
                vec[j - d] -= 1
            f = slots[_probe(slots, keys, vec, d)]
            if f != EMPTY:
                out[e, j] = counts[f]
    return out


@njit(cache=True)
def unvisited_sphere_occupation(slots, keys, counts, n_entries, d):
    """Sphere occupation ``Xi(z)`` of every unvisited site ``z`` adjacent to a visited one.

    Each such site is reported once.
    """
    cap = 16
    while cap < 2 * 2 * d * max(n_entries, 1):
        cap *= 2
    aux_slots = np.full(cap, EMPTY, dtype=np.int64)
    aux_keys = np.empty((2 * d * max(n_entries, 1), d), dtype=np.int64)
    occ = np.empty(aux_keys.shape[0], dtype=np.int64)
    n_aux = 0
    vec = np.empty(d, dtype=np.int64)
    nb = np.empty(d, dtype=np.int64)
    for e in range(n_entries):
        for j in range(2 * d):
            for i in range(d):
                vec[i] = keys[e, i]
            if j < d:
                vec[j] += 1
            else:
                vec[j - d] -= 1
            if slots[_probe(slots, keys, vec, d)] != EMPTY:
                continue
            h = _probe(aux_slots, aux_keys, vec, d)
            if aux_slots[h] != EMPTY:
                continue
            aux_slots[h] = n_aux
            for i in range(d):
                aux_keys[n_aux, i] = vec[i]
            total = 0
            for m in range(2 * d):
                for i in range(d):
                    nb[i] = vec[i]
                if m < d:
                    nb[m] += 1
                else:
                    nb[m - d] -= 1
                f = slots[_probe(slots, keys, nb, d)]
                if f != EMPTY:
                    total += counts[f]
            occ[n_aux] = total
            n_aux += 1
    return occ[:n_aux].copy()
