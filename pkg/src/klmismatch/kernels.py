"""Batched measurement kernels.

``measure_batch(pr, q)`` takes stacks of joint matrices of shape
``(n, C, X)`` and returns an ``(n, NUM_FIELDS)`` array, one row per pair,
holding the same quantities :func:`klmismatch.core.mismatch_report`
computes, plus the agreement/disagreement sums used by the lemma checks.

Two implementations share these semantics exactly: a numba kernel and a
vectorized numpy one. ``measure_batch`` dispatches to numba unless it is
unavailable or ``KLMISMATCH_DISABLE_NUMBA`` is set.
"""
import math

import numpy as np

from ._accel import HAS_NUMBA, njit

TIE_TOL = 1e-12

E_STAR = 0
E_Q = 1
DELTA_Q = 2
TV = 3
KL_COND = 4
KL_MARG = 5
KL_JOINT = 6
AGREE_MASS = 7  # sum of pr(x) over x with c_* = c_q
AGREE_ERR = 8  # sum of pr(x) E{e*|x} over the agreement set
DISAGREE_DELTA = 9  # sum of pr(x) Delta_q(x) over the disagreement set
DISAGREE_ERR = 10  # sum of pr(x) E{e*|x} over the disagreement set
MODEL_TIES = 11  # observations (with pr(x) > 0) where the model argmax tied
NUM_FIELDS = 12

FIELD_NAMES = (
    "E_star",
    "E_q",
    "delta_q",
    "tv",
    "kl_cond",
    "kl_marg",
    "kl_joint",
    "agree_mass",
    "agree_err",
    "disagree_delta",
    "disagree_err",
    "model_ties",
)


@njit
def _measure_numba(pr, q):
    n, C, X = pr.shape
    out = np.zeros((n, NUM_FIELDS))
    inf = np.inf
    for i in range(n):
        e_star = 0.0
        e_q = 0.0
        delta = 0.0
        tv = 0.0
        kl_cond = 0.0
        kl_marg = 0.0
        agree_mass = 0.0
        agree_err = 0.0
        dis_delta = 0.0
        dis_err = 0.0
        ties = 0.0
        for x in range(X):
            px = 0.0
            qx = 0.0
            for c in range(C):
                px += pr[i, c, x]
                qx += q[i, c, x]
                tv += abs(pr[i, c, x] - q[i, c, x])
            if px <= 0.0:
                continue
            # Bayes decision on pr(c|x)
            top = -1.0
            for c in range(C):
                v = pr[i, c, x] / px
                if v > top:
                    top = v
            cb = 0
            for c in range(C):
                if pr[i, c, x] / px >= top - TIE_TOL:
                    cb = c
                    break
            # model decision on q(c|x); all-zero column ties at class 0
            cm = 0
            if qx > 0.0:
                qtop = -1.0
                for c in range(C):
                    v = q[i, c, x] / qx
                    if v > qtop:
                        qtop = v
                hits = 0
                found = False
                for c in range(C):
                    if q[i, c, x] / qx >= qtop - TIE_TOL:
                        hits += 1
                        if not found:
                            cm = c
                            found = True
                if hits > 1:
                    ties += 1.0
            else:
                ties += 1.0
            pb = pr[i, cb, x] / px
            pm = pr[i, cm, x] / px
            err_b = 1.0 - pb
            e_star += px * err_b
            e_q += px * (1.0 - pm)
            local_delta = pb - pm
            delta += px * local_delta
            if cb == cm:
                agree_mass += px
                agree_err += px * err_b
            else:
                dis_delta += px * local_delta
                dis_err += px * err_b
            # KL terms
            if qx <= 0.0:
                kl_cond = inf
                kl_marg = inf
                continue
            local = 0.0
            for c in range(C):
                a = pr[i, c, x] / px
                if a == 0.0:
                    continue
                b = q[i, c, x] / qx
                if b == 0.0:
                    local = inf
                    break
                r = a / b
                if r < inf:
                    local += a * math.log(r)
                else:
                    local += a * (math.log(a) - math.log(b))
            kl_cond += px * local
            kl_marg += px * math.log(px / qx)
        out[i, E_STAR] = e_star
        out[i, E_Q] = e_q
        out[i, DELTA_Q] = delta
        out[i, TV] = 0.5 * tv
        out[i, KL_COND] = kl_cond
        out[i, KL_MARG] = kl_marg
        out[i, KL_JOINT] = kl_cond + kl_marg
        out[i, AGREE_MASS] = agree_mass
        out[i, AGREE_ERR] = agree_err
        out[i, DISAGREE_DELTA] = dis_delta
        out[i, DISAGREE_ERR] = dis_err
        out[i, MODEL_TIES] = ties
    return out


def _first_max(cond: np.ndarray) -> np.ndarray:
    """Lowest class index within ``TIE_TOL`` of the max, per (sample, x)."""
    top = cond.max(axis=1, keepdims=True)
    return np.argmax(cond >= top - TIE_TOL, axis=1)


def _measure_numpy(pr: np.ndarray, q: np.ndarray) -> np.ndarray:
    n, C, X = pr.shape
    out = np.zeros((n, NUM_FIELDS))
    with np.errstate(divide="ignore", invalid="ignore"):
        px = pr.sum(axis=1)  # (n, X)
        qx = q.sum(axis=1)
        live = px > 0
        pcond = np.where(live[:, None, :], pr / px[:, None, :], 0.0)
        qlive = qx > 0
        qcond = np.where(qlive[:, None, :], q / qx[:, None, :], 0.0)

        cb = _first_max(pcond)
        cm = np.where(qlive, _first_max(qcond), 0)
        qtop = qcond.max(axis=1, keepdims=True)
        hits = (qcond >= qtop - TIE_TOL).sum(axis=1)
        ties = live & (~qlive | (hits > 1))

        pb = np.take_along_axis(pcond, cb[:, None, :], axis=1)[:, 0, :]
        pm = np.take_along_axis(pcond, cm[:, None, :], axis=1)[:, 0, :]
        w = np.where(live, px, 0.0)
        err_b = 1.0 - pb
        local_delta = pb - pm
        agree = live & (cb == cm)
        dis = live & (cb != cm)

        # per-class KL terms; pcond == 0 contributes nothing
        pos = pcond > 0
        ratio = np.where(pos, pcond / np.where(qcond > 0, qcond, 1.0), 1.0)
        logr = np.where(
            np.isfinite(ratio),
            np.log(ratio),
            np.log(np.where(pos, pcond, 1.0)) - np.log(np.where(qcond > 0, qcond, 1.0)),
        )
        term = np.where(pos, pcond * logr, 0.0)
        term = np.where(pos & (qcond == 0), np.inf, term)
        local = term.sum(axis=1)
        local = np.where(live & ~qlive, np.inf, local)
        kl_cond = np.where(live, w * local, 0.0).sum(axis=1)
        marg = np.where(
            live,
            np.where(qlive, w * np.log(np.where(live, px, 1.0) / np.where(qlive, qx, 1.0)), np.inf),
            0.0,
        )
        kl_marg = marg.sum(axis=1)

    out[:, E_STAR] = (w * err_b).sum(axis=1)
    out[:, E_Q] = (w * (1.0 - pm)).sum(axis=1)
    out[:, DELTA_Q] = (w * local_delta).sum(axis=1)
    out[:, TV] = 0.5 * np.abs(pr - q).sum(axis=(1, 2))
    out[:, KL_COND] = kl_cond
    out[:, KL_MARG] = kl_marg
    out[:, KL_JOINT] = kl_cond + kl_marg
    out[:, AGREE_MASS] = np.where(agree, w, 0.0).sum(axis=1)
    out[:, AGREE_ERR] = np.where(agree, w * err_b, 0.0).sum(axis=1)
    out[:, DISAGREE_DELTA] = np.where(dis, w * local_delta, 0.0).sum(axis=1)
    out[:, DISAGREE_ERR] = np.where(dis, w * err_b, 0.0).sum(axis=1)
    out[:, MODEL_TIES] = ties.sum(axis=1)
    return out


def _prepare(pr, q):
    pr = np.ascontiguousarray(pr, dtype=np.float64)
    q = np.ascontiguousarray(q, dtype=np.float64)
    if pr.ndim == 2:
        pr = pr[None]
    if q.ndim == 2:
        q = q[None]
    if pr.shape != q.shape or pr.ndim != 3:
        raise ValueError(f"pr stack {pr.shape} and q stack {q.shape} differ")
    return pr, q


def measure_batch_numba(pr, q) -> np.ndarray:
    if not HAS_NUMBA:
        raise RuntimeError("numba backend is not available")
    return _measure_numba(*_prepare(pr, q))


def measure_batch_numpy(pr, q) -> np.ndarray:
    return _measure_numpy(*_prepare(pr, q))


measure_batch = measure_batch_numba if HAS_NUMBA else measure_batch_numpy
