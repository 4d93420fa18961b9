"""Hot per-period loops, written once and run either jitted or interpreted.

Every kernel consumes a pre-drawn array of uniforms (one per period, via
inverse-CDF sampling), so the realized stream depends only on the seed that
produced the uniforms, never on the backend or on thread scheduling.

Status codes: 0 = ok, 1 = every hypothesis assigned zero likelihood to an
observed outcome (only reachable on non-regular instances).
"""

import math

import numpy as np

from ._backend import active_backend, jit_compile

STATUS_OK = 0
STATUS_ALL_ZERO = 1

# policy modes for the trajectory loop
POLICY_MYOPIC = 0
POLICY_THRESHOLD = 1

# lag modes
LAG_POINT = 0
LAG_MIXTURE = 1

# primitive principal-strategy codes for the game loop
STRAT_ALWAYS = 0
STRAT_MIRROR = 1
STRAT_BLOCK = 2


def _traj_loop(hyp_probs, true_probs,
               true_mode, true_k, true_beta,
               agent_mode, agent_lags, agent_beta,
               policy_mode, scores, thr_i, thr_j, thr_lstar, thr_act_low,
               thr_act_high,
               logw, true_mask, pre_hist, u,
               actions, outcomes, post_true, llr_rec, llr_stride, llr_ref):
    T = u.shape[0]
    H = logw.shape[0]
    n_actions = true_probs.shape[0]
    n_out = true_probs.shape[1]
    npre = pre_hist.shape[0]

    acts = np.empty(npre + T, np.int64)
    for i in range(npre):
        acts[i] = pre_hist[i]
    lik = np.empty(H, np.float64)
    w = np.empty(H, np.float64)
    n_rec = 0

    for t in range(1, T + 1):
        pos = npre + t - 1

        # belief entering period t
        for h in range(H):
            w[h] = math.exp(logw[h])
        p_true = 0.0
        for h in range(H):
            if true_mask[h] == 1:
                p_true += w[h]
        post_true[t - 1] = p_true
        if llr_stride > 0 and (t - 1) % llr_stride == 0:
            for h in range(H):
                llr_rec[n_rec, h] = logw[h] - logw[llr_ref]
            n_rec += 1

        # action from the policy
        if policy_mode == POLICY_MYOPIC:
            a_t = 0
            best = -1.0e308
            for a in range(n_actions):
                s = 0.0
                for h in range(H):
                    s += w[h] * scores[h, a]
                if s > best:
                    best = s
                    a_t = a
        else:
            l = logw[thr_i] - logw[thr_j]
            if l >= thr_lstar:
                a_t = thr_act_high
            else:
                a_t = thr_act_low
        acts[pos] = a_t
        actions[t - 1] = a_t

        # outcome under the true lag structure
        uu = u[t - 1]
        y = n_out - 1
        c = 0.0
        if true_mode == LAG_POINT:
            a_lag = acts[pos - true_k]
            for j in range(n_out):
                c += true_probs[a_lag, j]
                if uu < c:
                    y = j
                    break
        else:
            for j in range(n_out):
                p = 0.0
                for m in range(true_beta.shape[0]):
                    p += true_beta[m] * true_probs[acts[pos - m], j]
                c += p
                if uu < c:
                    y = j
                    break
        outcomes[t - 1] = y

        # likelihood of y under the agent's lag model, per hypothesis
        mlik = 0.0
        for h in range(H):
            if agent_mode == LAG_MIXTURE:
                p = 0.0
                for m in range(agent_beta.shape[0]):
                    p += agent_beta[m] * hyp_probs[h, acts[pos - m], y]
            else:
                p = hyp_probs[h, acts[pos - agent_lags[h]], y]
            lik[h] = p
            if p > mlik:
                mlik = p
        if mlik <= 0.0:
            return STATUS_ALL_ZERO, t
        for h in range(H):
            if lik[h] <= 0.0:
                logw[h] = -np.inf
            elif logw[h] > -np.inf:
                logw[h] += math.log(lik[h] / mlik)

        # max-shift renormalisation in log space
        m2 = -np.inf
        for h in range(H):
            if logw[h] > m2:
                m2 = logw[h]
        if m2 == -np.inf:
            return STATUS_ALL_ZERO, t
        ssum = 0.0
        for h in range(H):
            ssum += math.exp(logw[h] - m2)
        shift = m2 + math.log(ssum)
        for h in range(H):
            logw[h] -= shift

    return STATUS_OK, T


def _game_loop(state_probs, payoff, cond_idx, kstar, acc_thresh,
               wrapper_tau, wrapper_eps, strat0, strat1,
               logw, logw_p, pre_hist, u,
               acts_out, props_out, pref1_out, outs_out, llr_out):
    # strat0/strat1 layout (float64[7]):
    #   [pre_code, pre_p1, pre_p2, post_code, post_p1, post_p2, trigger]
    # with trigger = +inf for plain (non-composite) strategies.
    T = u.shape[0]
    n_out = state_probs.shape[2]
    npre = pre_hist.shape[0]

    acts = np.empty(npre + T, np.int64)
    for i in range(npre):
        acts[i] = pre_hist[i]

    switched0 = False
    switched1 = False
    switched0_at = -1
    switched1_at = -1
    branch = 0
    branch_taken = 0

    for t in range(1, T + 1):
        pos = npre + t - 1
        l = logw[1] - logw[0]
        llr_out[t - 1] = l
        pref1 = l > acc_thresh
        pref1_out[t - 1] = 1 if pref1 else 0

        # active composite: latch the permanent switch on the entering LLR
        if branch == 0:
            if not switched0 and l >= strat0[6]:
                switched0 = True
                switched0_at = t
            code = strat0[3] if switched0 else strat0[0]
            p1 = strat0[4] if switched0 else strat0[1]
            p2 = strat0[5] if switched0 else strat0[2]
        else:
            if not switched1 and l >= strat1[6]:
                switched1 = True
                switched1_at = t
            code = strat1[3] if switched1 else strat1[0]
            p1 = strat1[4] if switched1 else strat1[1]
            p2 = strat1[5] if switched1 else strat1[2]

        if code == 0.0:          # constant proposal
            prop = int(p1)
        elif code == 1.0:        # mirror of the action implemented k periods ago
            prop = 1 - acts[pos - int(p1)]
        else:                    # block schedule keyed to the absolute period
            t1 = int(p1)
            t2 = int(p2)
            pos_blk = (t - 1) % (t1 + t2) + 1
            if pos_blk <= t1 and pos_blk % 2 == 0:
                prop = 0
            else:
                prop = 1
        props_out[t - 1] = prop

        if prop == 0:
            a_t = 0
        else:
            a_t = 1 if pref1 else 0
        acts[pos] = a_t
        acts_out[t - 1] = a_t

        # outcome from the conditioning state, true lag k*
        uu = u[t - 1]
        y = n_out - 1
        c = 0.0
        a_lag = acts[pos - kstar]
        for j in range(n_out):
            c += state_probs[cond_idx, a_lag, j]
            if uu < c:
                y = j
                break
        outs_out[t - 1] = y

        # agent update: misattributes the outcome to the current action
        l0 = state_probs[0, a_t, y]
        l1 = state_probs[1, a_t, y]
        mlik = l0 if l0 > l1 else l1
        if mlik <= 0.0:
            return STATUS_ALL_ZERO, t, switched0_at, switched1_at, branch_taken
        logw[0] += math.log(l0 / mlik)
        logw[1] += math.log(l1 / mlik)
        m2 = logw[0] if logw[0] > logw[1] else logw[1]
        shift = m2 + math.log(math.exp(logw[0] - m2) + math.exp(logw[1] - m2))
        logw[0] -= shift
        logw[1] -= shift

        # principal update (correct lag attribution); only used by the wrapper
        if wrapper_tau > 0:
            q0 = state_probs[0, a_lag, y]
            q1 = state_probs[1, a_lag, y]
            mq = q0 if q0 > q1 else q1
            if mq > 0.0:
                logw_p[0] += math.log(q0 / mq)
                logw_p[1] += math.log(q1 / mq)
                mp = logw_p[0] if logw_p[0] > logw_p[1] else logw_p[1]
                sp = mp + math.log(math.exp(logw_p[0] - mp)
                                   + math.exp(logw_p[1] - mp))
                logw_p[0] -= sp
                logw_p[1] -= sp
            if t == wrapper_tau:
                if math.exp(logw_p[0]) < 1.0 - wrapper_eps:
                    branch = 1
                    branch_taken = 1

    return STATUS_OK, T, switched0_at, switched1_at, branch_taken


def _walk_batch(u_mat, values, cumprobs, level):
    n, L = u_mat.shape
    nv = values.shape[0]
    crossed = np.zeros(n, np.bool_)
    final = np.empty(n, np.float64)
    for i in range(n):
        s = 0.0
        hit = False
        for k in range(L):
            uu = u_mat[i, k]
            j = nv - 1
            for m in range(nv):
                if uu < cumprobs[m]:
                    j = m
                    break
            s += values[j]
            if not hit and s >= level:
                hit = True
        crossed[i] = hit
        final[i] = s
    return crossed, final


def _walk_batch_numpy(u_mat, values, cumprobs, level):
    # vectorized fallback; step selection matches the scan in _walk_batch
    idx = np.searchsorted(cumprobs, u_mat, side="right")
    np.clip(idx, 0, values.shape[0] - 1, out=idx)
    sums = np.cumsum(values[idx], axis=1)
    crossed = (sums >= level).any(axis=1)
    return crossed, sums[:, -1].copy()


_PY_IMPLS = {
    "traj": _traj_loop,
    "game": _game_loop,
    "walk": _walk_batch_numpy,
}
_JIT_SOURCES = {
    "traj": _traj_loop,
    "game": _game_loop,
    "walk": _walk_batch,
}
_JIT_CACHE: dict = {}


def kernel(name, backend=None):
    """Return the ``name`` kernel for ``backend`` (default: active backend)."""
    b = backend or active_backend()
    if b == "numpy":
        return _PY_IMPLS[name]
    if name not in _JIT_CACHE:
        _JIT_CACHE[name] = jit_compile(_JIT_SOURCES[name])
    return _JIT_CACHE[name]
