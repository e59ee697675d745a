"""Compiled inner loops for the simulation engine and the Gibbs sampler.

All transcendentals (dwell-time exponentials, filter coefficients) are
precomputed by the callers; the kernels only do per-step arithmetic, so a
pure-Python fallback (numba absent) produces identical results, just slowly.

Uniform-draw discipline: every kernel consumes pre-drawn arrays, one draw per
MTJ per step (or one per node update for Gibbs), so trace observers and
chunking never perturb the stochastic path.
"""

from __future__ import annotations

import math

import numpy as np

try:
    from numba import njit
except ImportError:  # pragma: no cover - numba is a declared dependency
    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]
        return lambda f: f

# Tap source kinds (must match synthesis.Tap)
TAP_Q = 0
TAP_QBAR = 1
TAP_VDD = 2
TAP_VSS = 3
TAP_CLAMP = 4

# Clamp drive levels (must match engine.ClampLevel)
DRIVE0 = 0
DRIVE1 = 1
FLOAT = 2


@njit(cache=True)
def gibbs_kernel(J, h, gain, m, free, orders, draws, counts):
    """Sequential single-node updates; one histogram count per sweep."""
    n = J.shape[0]
    sweeps = orders.shape[0]
    nf = orders.shape[1]
    for s in range(sweeps):
        for k in range(nf):
            i = free[orders[s, k]]
            field = h[i]
            for j in range(n):
                field += J[i, j] * m[j]
            p_plus = 0.5 * (1.0 + math.tanh(gain * field))
            m[i] = 1 if draws[s, k] < p_plus else -1
        idx = 0
        for j in range(n):
            idx = (idx << 1) | (1 if m[j] > 0 else 0)
        counts[idx] += 1


@njit(cache=True)
def pblock_hist_kernel(u, p_flip, levels, alpha, lo, width, nbins,
                       acc_from, st, vf, counts, occ):
    """Advance one p-block chunk, accumulating the filtered-signal histogram.

    ``st`` and ``vf`` are single-element carry arrays (MTJ state index and
    filter state).  Steps before ``acc_from`` are burn-in and not counted.
    ``occ`` accumulates time spent in the P state.
    """
    s = st[0]
    v = vf[0]
    for k in range(u.shape[0]):
        if u[k] < p_flip[s]:
            s = 1 - s
        vm = levels[s]
        v += (vm - v) * alpha
        if k >= acc_from:
            b = int((v - lo) / width)
            if b < 0:
                b = 0
            elif b >= nbins:
                b = nbins - 1
            counts[b] += 1
            occ[0] += s
    st[0] = s
    vf[0] = v


@njit(cache=True)
def pblock_trace_kernel(u, vthresh, p_flip, levels, alpha, vdd, vss, hyst,
                        decim, st, vf, po,
                        o_state, o_vmtj, o_vfilt, o_vthr, o_vout,
                        o_vout_min, o_vout_max):
    """Advance one p-block chunk with a per-step threshold, decimated trace.

    The chunk length is a multiple of ``decim``; one output row is written at
    the end of each window, with the window's comparator-output extremes.
    """
    s = st[0]
    v = vf[0]
    out = po[0]
    row = 0
    wmin = out
    wmax = out
    for k in range(u.shape[0]):
        if u[k] < p_flip[s]:
            s = 1 - s
        vm = levels[s]
        v += (vm - v) * alpha
        th = vthresh[k]
        if hyst == 0.0:
            out = vdd if v > th else vss
        else:
            if v > th + 0.5 * hyst:
                out = vdd
            elif v < th - 0.5 * hyst:
                out = vss
        if out < wmin:
            wmin = out
        if out > wmax:
            wmax = out
        if (k + 1) % decim == 0:
            o_state[row] = s
            o_vmtj[row] = vm
            o_vfilt[row] = v
            o_vthr[row] = th
            o_vout[row] = out
            o_vout_min[row] = wmin
            o_vout_max[row] = wmax
            row += 1
            wmin = out
            wmax = out
    st[0] = s
    vf[0] = v
    po[0] = out


@njit(cache=True)
def _refresh_thresholds(out, clamp_now, tap_start, tap_kind, tap_ref, tap_g,
                        net_vdd, net_vss, div_a, div_b, thresh):
    nb = thresh.shape[0]
    for b in range(nb):
        num = 0.0
        den = 0.0
        for t in range(tap_start[b], tap_start[b + 1]):
            kind = tap_kind[t]
            if kind == TAP_CLAMP:
                lvl = clamp_now[tap_ref[t]]
                if lvl == FLOAT:
                    continue
                src = net_vdd if lvl == DRIVE0 else net_vss
            elif kind == TAP_Q:
                src = out[tap_ref[t]]
            elif kind == TAP_QBAR:
                src = (net_vdd + net_vss) - out[tap_ref[t]]
            elif kind == TAP_VDD:
                src = net_vdd
            else:
                src = net_vss
            g = tap_g[t]
            num += g * src
            den += g
        node_v = num / den if den > 0.0 else 0.0
        thresh[b] = div_a[b] * node_v + div_b[b]


@njit(cache=True)
def pcircuit_kernel(u, clamp_levels, tap_start, tap_kind, tap_ref, tap_g,
                    net_vdd, net_vss, p_flip, levels, alpha, div_a, div_b,
                    vdd, vss, hyst, decim,
                    mtj_state, v_filt, out, thresh,
                    o_state, o_vmtj, o_vfilt, o_vthr, o_vout,
                    o_vout_min, o_vout_max, o_clamp):
    """Advance the coupled circuit one chunk; decimated multi-block trace.

    Each block's threshold is the resistive-network node voltage computed
    from the previous step's comparator outputs (one-step delay), mapped
    through that block's divider.  Thresholds are only recomputed when an
    output or clamp level actually changed, which is rare at sub-dwell dt.

    At most one comparator output may change per step: when several would
    flip simultaneously, the one with the largest crossing margin wins and
    the rest re-evaluate against the updated network on the next step.  This
    serializes coincident crossings the way the continuous circuit does
    (the first output to move re-biases the others before they can cross);
    without it, mutually inhibiting blocks lock into an unphysical
    synchronous flip-flop oscillation.
    """
    nb = mtj_state.shape[0]
    nt = clamp_levels.shape[0]
    steps = u.shape[1]
    clamp_now = np.empty(nt, dtype=np.int8)
    for t in range(nt):
        clamp_now[t] = clamp_levels[t, 0]
    _refresh_thresholds(out, clamp_now, tap_start, tap_kind, tap_ref, tap_g,
                        net_vdd, net_vss, div_a, div_b, thresh)
    wmin = np.empty(nb)
    wmax = np.empty(nb)
    vm = np.empty(nb)
    for b in range(nb):
        wmin[b] = out[b]
        wmax[b] = out[b]
    row = 0
    for k in range(steps):
        changed = False
        for t in range(nt):
            if clamp_levels[t, k] != clamp_now[t]:
                clamp_now[t] = clamp_levels[t, k]
                changed = True
        if changed:
            _refresh_thresholds(out, clamp_now, tap_start, tap_kind, tap_ref,
                                tap_g, net_vdd, net_vss, div_a, div_b, thresh)
        winner = -1
        win_margin = -1.0
        for b in range(nb):
            s = mtj_state[b]
            if u[b, k] < p_flip[b, s]:
                s = 1 - s
                mtj_state[b] = s
            vmb = levels[b, s]
            vm[b] = vmb
            vfb = v_filt[b] + (vmb - v_filt[b]) * alpha[b]
            v_filt[b] = vfb
            th = thresh[b]
            o = out[b]
            if hyst[b] == 0.0:
                o_new = vdd[b] if vfb > th else vss[b]
            else:
                o_new = o
                if vfb > th + 0.5 * hyst[b]:
                    o_new = vdd[b]
                elif vfb < th - 0.5 * hyst[b]:
                    o_new = vss[b]
            if o_new != o:
                margin = vfb - th if vfb > th else th - vfb
                if margin > win_margin:
                    win_margin = margin
                    winner = b
        out_changed = winner >= 0
        if out_changed:
            out[winner] = vdd[winner] if out[winner] == vss[winner] else vss[winner]
        for b in range(nb):
            ob = out[b]
            if ob < wmin[b]:
                wmin[b] = ob
            if ob > wmax[b]:
                wmax[b] = ob
        if out_changed:
            _refresh_thresholds(out, clamp_now, tap_start, tap_kind, tap_ref,
                                tap_g, net_vdd, net_vss, div_a, div_b, thresh)
        if (k + 1) % decim == 0:
            for b in range(nb):
                o_state[b, row] = mtj_state[b]
                o_vmtj[b, row] = vm[b]
                o_vfilt[b, row] = v_filt[b]
                o_vthr[b, row] = thresh[b]
                o_vout[b, row] = out[b]
                o_vout_min[b, row] = wmin[b]
                o_vout_max[b, row] = wmax[b]
                wmin[b] = out[b]
                wmax[b] = out[b]
            for t in range(nt):
                o_clamp[t, row] = clamp_now[t]
            row += 1
