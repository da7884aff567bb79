# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled twins of the hot kernels in ``_pykernels``.

The arithmetic mirrors the pure-Python reference operation for operation
(same expressions, same evaluation order) so both backends produce
bit-identical results; the equivalence test suite holds them together.
"""

from libc.math cimport ceil, INFINITY

import numpy as np

BACKEND_NAME = "cython"

cdef int ACT_CHARGE = 0
cdef int ACT_IDLE = 1
cdef int ACT_DISCHARGE = 2


cdef inline int _required_slots(double soc, double target, double capacity,
                                double rate, double eta_ch, double dt) nogil:
    if soc >= target:
        return 0
    cdef double needed_kwh = (target - soc) * 0.01 * capacity
    cdef double step_kwh = rate * eta_ch * dt
    return <int>ceil(needed_kwh / step_kwh)


cdef inline double _charge_step(double soc, double power_kw, double dt, double capacity,
                                double eta, double soc_max, double* delivered) nogil:
    cdef double gain = 100.0 * power_kw * dt * eta / capacity
    cdef double headroom = soc_max - soc
    cdef double new_soc
    if gain <= headroom:
        delivered[0] = power_kw
        new_soc = soc + gain
        # guard the ceiling against the last-ulp rounding of soc + gain
        return new_soc if new_soc <= soc_max else soc_max
    if headroom <= 0.0:
        delivered[0] = 0.0
        return soc
    delivered[0] = headroom * capacity / (100.0 * dt * eta)
    return soc_max


cdef inline double _discharge_step(double soc, double power_kw, double dt, double capacity,
                                   double eta, double soc_min, double* delivered) nogil:
    cdef double drop = 100.0 * power_kw * dt / (capacity * eta)
    cdef double available = soc - soc_min
    cdef double new_soc
    if drop <= available:
        delivered[0] = power_kw
        new_soc = soc - drop
        return new_soc if new_soc >= soc_min else soc_min
    if available <= 0.0:
        delivered[0] = 0.0
        return soc
    delivered[0] = available * capacity * eta / (100.0 * dt)
    return soc_min


cdef inline int _decide(int method, double flag_power, int margin, double soc,
                        double target, double smin, double smax, double capacity,
                        double rate, double eta_ch, double eta_dch, double dt,
                        double net, int remaining) nogil:
    """Action code; +8 marks a deadline-forced charge."""
    cdef int required, required_after
    cdef double drop, after
    if method == 2:  # uncontrolled: charge below target, never discharge
        if soc < target:
            return ACT_CHARGE
        return ACT_IDLE
    required = _required_slots(soc, target, capacity, rate, eta_ch, dt)
    if remaining <= required + margin:
        if soc < smax:
            return ACT_CHARGE + 8
        return ACT_IDLE
    if net < flag_power:
        if soc < smax:
            return ACT_CHARGE
        return ACT_IDLE
    if method == 0 and soc > smin:  # threshold method's discharging period
        drop = 100.0 * rate * dt / (capacity * eta_dch)
        after = soc - drop
        if after < smin:
            after = smin
        required_after = _required_slots(after, target, capacity, rate, eta_ch, dt)
        if required_after <= remaining - 1:
            return ACT_DISCHARGE
    return ACT_IDLE


def compute_trajectories(long long[:] arrival, long long[:] length, double[:] rate,
                         double[:] capacity, double[:] init_soc, double[:] target,
                         double[:] soc_min, double[:] soc_max, double[:] eta_ch,
                         double[:] eta_dch, double[:] net_load, int method_code,
                         double flag_power, int margin, double dt):
    cdef Py_ssize_t n_slots = net_load.shape[0]
    cdef Py_ssize_t n_evs = arrival.shape[0]
    charge_arr = np.zeros((n_slots, n_evs))
    discharge_arr = np.zeros((n_slots, n_evs))
    soc_arr = np.zeros((n_slots, n_evs))
    action_arr = np.full((n_slots, n_evs), -1, dtype=np.int8)
    forced_arr = np.zeros((n_slots, n_evs), dtype=np.uint8)
    departure_arr = np.zeros(n_evs)
    cdef double[:, :] charge = charge_arr
    cdef double[:, :] discharge = discharge_arr
    cdef double[:, :] soc = soc_arr
    cdef signed char[:, :] action = action_arr
    cdef unsigned char[:, :] forced = forced_arr
    cdef double[:] departure = departure_arr

    cdef Py_ssize_t i, p, s
    cdef int parked, code
    cdef double x, delivered
    with nogil:
        for i in range(n_evs):
            x = init_soc[i]
            parked = <int>length[i]
            for p in range(parked):
                s = (arrival[i] + p) % n_slots
                code = _decide(method_code, flag_power, margin, x, target[i],
                               soc_min[i], soc_max[i], capacity[i], rate[i],
                               eta_ch[i], eta_dch[i], dt, net_load[s], parked - p)
                forced[s, i] = 1 if code >= 8 else 0
                code = code & 3
                if code == ACT_CHARGE:
                    x = _charge_step(x, rate[i], dt, capacity[i], eta_ch[i],
                                     soc_max[i], &delivered)
                    charge[s, i] = delivered
                elif code == ACT_DISCHARGE:
                    x = _discharge_step(x, rate[i], dt, capacity[i], eta_dch[i],
                                        soc_min[i], &delivered)
                    discharge[s, i] = delivered
                action[s, i] = <signed char>code
                soc[s, i] = x
            departure[i] = x
            for p in range(parked, n_slots):
                soc[(arrival[i] + p) % n_slots, i] = x
    return (charge_arr, discharge_arr, soc_arr, action_arr,
            forced_arr.astype(bool), departure_arr)


cdef struct Alloc:
    double grid_draw
    double cost


cdef inline Alloc _allocate(double charge_kw, double discharge_kw, double base_kw,
                            double pv_kw, double grid_rate, double pv_rate,
                            double dt, int mode_code) nogil:
    cdef double pv_to_load, spare_pv, pv_to_ev, pv_used, residual, offset
    cdef double grid_need, unmet_load, grid_to_load, grid_to_ev
    cdef Alloc out
    pv_to_load = pv_kw if pv_kw < base_kw else base_kw
    spare_pv = pv_kw - pv_to_load
    pv_to_ev = spare_pv if spare_pv < charge_kw else charge_kw
    pv_used = pv_to_load + pv_to_ev
    residual = base_kw + charge_kw - pv_used
    if residual < 0.0:
        residual = 0.0
    if mode_code == 1:
        offset = 0.0
    else:
        offset = discharge_kw if discharge_kw < residual else residual
    grid_need = residual - offset
    if grid_need < 0.0:
        grid_need = 0.0
    unmet_load = base_kw - pv_to_load
    grid_to_load = grid_need if grid_need < unmet_load else unmet_load
    grid_to_ev = grid_need - grid_to_load
    if grid_to_ev < 0.0:
        grid_to_ev = 0.0
    out.grid_draw = grid_to_load + grid_to_ev
    pv_used = pv_to_load + pv_to_ev
    if mode_code == 2:
        out.cost = (grid_rate * out.grid_draw + pv_rate * pv_used) * dt
    else:
        out.cost = (grid_rate * out.grid_draw + pv_rate * (pv_used - discharge_kw)) * dt
    return out


cdef struct SearchCtx:
    Py_ssize_t n_pos
    double dt
    int mode_code
    double grid_cap
    double best_cost
    long long leaves


cdef void _search(SearchCtx* ctx, Py_ssize_t k, double partial, double charge_acc,
                  double discharge_acc, long long[:] pos_slot, long long[:] pos_ev,
                  unsigned char[:] pos_last, long long[:] rem_after, double[:] soc,
                  signed char[:] actions, signed char[:] best_actions,
                  double[:] rate, double[:] capacity, double[:] target,
                  double[:] soc_min, double[:] soc_max, double[:] eta_ch,
                  double[:] eta_dch, unsigned char[:] enforce_target,
                  double[:] base, double[:] pv, double[:] grid_rate,
                  double[:] pv_rate, const int* order) nogil:
    cdef Py_ssize_t s, i, j
    cdef int code, oi
    cdef double soc_i, new_soc, delivered, d_charge, d_discharge
    cdef Alloc alloc
    if k == ctx.n_pos:
        ctx.leaves += 1
        if partial < ctx.best_cost:
            ctx.best_cost = partial
            for j in range(ctx.n_pos):
                best_actions[j] = actions[j]
        return
    s = pos_slot[k]
    i = pos_ev[k]
    soc_i = soc[i]
    for oi in range(3):
        code = order[oi]
        if code == ACT_CHARGE:
            if soc_i >= soc_max[i]:
                continue
            new_soc = _charge_step(soc_i, rate[i], ctx.dt, capacity[i], eta_ch[i],
                                   soc_max[i], &delivered)
            d_charge = delivered
            d_discharge = 0.0
        elif code == ACT_IDLE:
            new_soc = soc_i
            d_charge = 0.0
            d_discharge = 0.0
        else:
            if soc_i <= soc_min[i]:
                continue
            new_soc = _discharge_step(soc_i, rate[i], ctx.dt, capacity[i], eta_dch[i],
                                      soc_min[i], &delivered)
            d_charge = 0.0
            d_discharge = delivered
        if enforce_target[i] and _required_slots(new_soc, target[i], capacity[i],
                                                 rate[i], eta_ch[i], ctx.dt) > rem_after[k]:
            continue
        soc[i] = new_soc
        actions[k] = <signed char>code
        if pos_last[k]:
            alloc = _allocate(charge_acc + d_charge, discharge_acc + d_discharge,
                              base[s], pv[s], grid_rate[s], pv_rate[s], ctx.dt,
                              ctx.mode_code)
            if alloc.grid_draw <= ctx.grid_cap + 1e-9:
                _search(ctx, k + 1, partial + alloc.cost, 0.0, 0.0, pos_slot, pos_ev,
                        pos_last, rem_after, soc, actions, best_actions, rate,
                        capacity, target, soc_min, soc_max, eta_ch, eta_dch,
                        enforce_target, base, pv, grid_rate, pv_rate, order)
        else:
            _search(ctx, k + 1, partial, charge_acc + d_charge,
                    discharge_acc + d_discharge, pos_slot, pos_ev, pos_last,
                    rem_after, soc, actions, best_actions, rate, capacity, target,
                    soc_min, soc_max, eta_ch, eta_dch, enforce_target, base, pv,
                    grid_rate, pv_rate, order)
        soc[i] = soc_i
    actions[k] = -1


def brute_force(long long[:] arrival, long long[:] length, double[:] rate,
                double[:] capacity, double[:] init_soc, double[:] target,
                double[:] soc_min, double[:] soc_max, double[:] eta_ch,
                double[:] eta_dch, double[:] base, double[:] pv,
                double[:] grid_rate, double[:] pv_rate, double dt, int mode_code,
                double grid_cap, unsigned char[:] enforce_target, bint reverse_order):
    cdef Py_ssize_t n_slots = base.shape[0]
    cdef Py_ssize_t n_evs = arrival.shape[0]
    cdef Py_ssize_t i, p, s, k

    parked_at = [[] for _ in range(n_slots)]
    for i in range(n_evs):
        for p in range(<Py_ssize_t>length[i]):
            parked_at[(arrival[i] + p) % n_slots].append(i)
    origin = -1
    for s in range(n_slots):
        if not parked_at[s]:
            origin = s
            break
    if origin < 0:
        raise ValueError("no EV-free slot to anchor the enumeration order")

    pos_slot_list = []
    pos_ev_list = []
    pos_last_list = []
    for k in range(n_slots):
        s = (origin + k) % n_slots
        evs = parked_at[s]
        for j, i in enumerate(evs):
            pos_slot_list.append(s)
            pos_ev_list.append(i)
            pos_last_list.append(1 if j == len(evs) - 1 else 0)
    cdef Py_ssize_t n_pos = len(pos_slot_list)

    seen = {}
    rem_after_list = []
    for i in pos_ev_list:
        seen[i] = seen.get(i, 0) + 1
        rem_after_list.append(int(length[i]) - seen[i])

    cdef double const_cost = 0.0
    cdef Alloc alloc
    for s in range(n_slots):
        if not parked_at[s]:
            alloc = _allocate(0.0, 0.0, base[s], pv[s], grid_rate[s], pv_rate[s],
                              dt, mode_code)
            if alloc.grid_draw > grid_cap + 1e-9:
                # the base load alone breaks the cap: nothing is feasible
                return float("inf"), np.full((n_slots, n_evs), -1, dtype=np.int8), 0
            const_cost += alloc.cost

    pos_slot_arr = np.asarray(pos_slot_list, dtype=np.int64)
    pos_ev_arr = np.asarray(pos_ev_list, dtype=np.int64)
    pos_last_arr = np.asarray(pos_last_list, dtype=np.uint8)
    rem_after_arr = np.asarray(rem_after_list, dtype=np.int64)
    actions_arr = np.full(max(n_pos, 1), -1, dtype=np.int8)
    best_actions_arr = np.full(max(n_pos, 1), -1, dtype=np.int8)
    soc_arr = np.asarray(init_soc, dtype=np.float64).copy()

    cdef int[3] fwd = [ACT_CHARGE, ACT_IDLE, ACT_DISCHARGE]
    cdef int[3] rev = [ACT_DISCHARGE, ACT_IDLE, ACT_CHARGE]

    cdef SearchCtx ctx
    ctx.n_pos = n_pos
    ctx.dt = dt
    ctx.mode_code = mode_code
    ctx.grid_cap = grid_cap
    ctx.best_cost = INFINITY
    ctx.leaves = 0

    cdef long long[:] pos_slot_v = pos_slot_arr
    cdef long long[:] pos_ev_v = pos_ev_arr
    cdef unsigned char[:] pos_last_v = pos_last_arr
    cdef long long[:] rem_after_v = rem_after_arr
    cdef signed char[:] actions_v = actions_arr
    cdef signed char[:] best_actions_v = best_actions_arr
    cdef double[:] soc_v = soc_arr
    cdef const int* order_ptr
    if reverse_order:
        order_ptr = rev
    else:
        order_ptr = fwd

    with nogil:
        _search(&ctx, 0, const_cost, 0.0, 0.0, pos_slot_v, pos_ev_v, pos_last_v,
                rem_after_v, soc_v, actions_v, best_actions_v, rate, capacity,
                target, soc_min, soc_max, eta_ch, eta_dch, enforce_target, base,
                pv, grid_rate, pv_rate, order_ptr)

    table = np.full((n_slots, n_evs), -1, dtype=np.int8)
    if ctx.best_cost != INFINITY:
        for k in range(n_pos):
            table[pos_slot_arr[k], pos_ev_arr[k]] = best_actions_arr[k]
    return float(ctx.best_cost), table, int(ctx.leaves)
