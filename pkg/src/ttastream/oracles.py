"""Independent reference implementations used by tests and acceptance.

Everything here is deliberately written the slow, obvious way (explicit
loops, explicit covariance matrices, autodiff instead of hand-derived
gradients) and shares nothing with the engine beyond the numeric primitives
in `core`. These are the second route of every dual-route check:

- one-sided Jacobi SVD for the subspace projector,
- O(K^2) prompt ranking and sort-then-average binning,
- counting majority vote and the closed-form stability-consistency score,
- offline sort characterization of the bounded priority cache,
- explicit d x d covariance form of the surrogate loss,
- central finite differences for gradients,
- an autodiff (torch) loss twin,
- a straight-line replay of the full per-sample adaptation loop.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass

import numpy as np

from .core import l2_normalize


# ---------------------------------------------------------------------------
# SVD


def jacobi_svd_right_vectors(mat: np.ndarray, max_sweeps: int = 60, tol: float = 1e-12):
    """Right singular vectors and singular values via one-sided Jacobi.

    Rotates columns of A until they are mutually orthogonal; the accumulated
    rotations give V, the column norms give the singular values. Returns
    (singular_values_desc, v_columns) with v_columns[:, i] the i-th right
    singular vector.
    """
    a = np.array(mat, dtype=np.float64, copy=True)
    _, n = a.shape
    v = np.eye(n)
    for _ in range(max_sweeps):
        off = 0.0
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = float(a[:, p] @ a[:, q])
                app = float(a[:, p] @ a[:, p])
                aqq = float(a[:, q] @ a[:, q])
                off = max(off, abs(apq) / math.sqrt(app * aqq + 1e-300))
                if abs(apq) < 1e-300:
                    continue
                zeta = (aqq - app) / (2.0 * apq)
                t = math.copysign(1.0, zeta) / (abs(zeta) + math.sqrt(1.0 + zeta * zeta))
                c = 1.0 / math.sqrt(1.0 + t * t)
                s = c * t
                ap = a[:, p].copy()
                a[:, p] = c * ap - s * a[:, q]
                a[:, q] = s * ap + c * a[:, q]
                vp = v[:, p].copy()
                v[:, p] = c * vp - s * v[:, q]
                v[:, q] = s * vp + c * v[:, q]
        if off < tol:
            break
    sigma = np.linalg.norm(a, axis=0)
    order = np.argsort(-sigma, kind="stable")
    return sigma[order], v[:, order]


def projector_from_jacobi(mat: np.ndarray, n: int) -> np.ndarray:
    """Rank-n text-subspace projector built from the Jacobi SVD."""
    _, v = jacobi_svd_right_vectors(mat)
    v_top = v[:, :n]
    return v_top @ v_top.T


# ---------------------------------------------------------------------------
# Prompt ranking / binning


def rank_prompts_bruteforce(prompts: np.ndarray) -> list[int]:
    """All-pairs cosine accumulation with an explicit double loop."""
    k = len(prompts)
    sims = []
    for i in range(k):
        total = 0.0
        for j in range(k):
            if i == j:
                continue
            ui = prompts[i] / math.sqrt(float(prompts[i] @ prompts[i]))
            uj = prompts[j] / math.sqrt(float(prompts[j] @ prompts[j]))
            total += float(ui @ uj)
        sims.append(total)
    return sorted(range(k), key=lambda i: (sims[i], i))


def adjacent_bruteforce(prompts: np.ndarray, m_bins: int) -> np.ndarray:
    """Sort-then-average reference for the progressive binning."""
    n_classes, k, d = prompts.shape
    out = np.zeros((n_classes, m_bins, d))
    for c in range(n_classes):
        order = rank_prompts_bruteforce(prompts[c])
        for m in range(1, m_bins + 1):
            q = (m * k) // m_bins
            acc = np.zeros(d)
            for idx in order[:q]:
                acc += prompts[c][idx]
            out[c, m - 1] = l2_normalize(acc / q)
    return out


# ---------------------------------------------------------------------------
# Committee / score


def vote_oracle(labels: list[int], original: int) -> tuple[int, int]:
    """Counting majority vote; ties prefer the original label, then lowest id."""
    counts = Counter(labels)
    top = max(counts.values())
    tied = sorted(c for c, n in counts.items() if n == top)
    winner = original if original in tied else tied[0]
    return winner, top


def score_oracle(labels: list[int], original: int, gamma: float) -> float:
    """Closed-form w = 1 + ln(R*S) from the definition."""
    winner, top = vote_oracle(labels, original)
    r = 1.0 if winner == original else gamma
    s = len(labels) / top
    return 1.0 + math.log(r * s)


# ---------------------------------------------------------------------------
# Cache


def cache_final_contents(keys: list[float], capacity: int) -> list[int]:
    """Indices surviving a full insert sequence, by offline sort.

    Valid for distinct keys: the survivors are exactly the `capacity`
    smallest keys seen.
    """
    order = sorted(range(len(keys)), key=lambda i: keys[i])
    return sorted(order[:capacity])


def cache_replay(keys: list[float], capacity: int) -> list[int]:
    """Literal replay of the admission rule, for sequences with ties.

    Insert while below capacity; otherwise admit only strictly-smaller keys,
    evicting the oldest among the current maxima. Returns surviving indices
    in arrival order.
    """
    slot: list[int] = []
    for i, key in enumerate(keys):
        if len(slot) < capacity:
            slot.append(i)
            continue
        max_key = max(keys[j] for j in slot)
        if key < max_key:
            oldest_max = min(j for j in slot if keys[j] == max_key)
            slot.remove(oldest_max)
            slot.append(i)
    return slot


# ---------------------------------------------------------------------------
# Losses: explicit covariance + autodiff twins


def surrogate_loss_explicit(z: np.ndarray, label: int, evolved: np.ndarray, tau: float) -> float:
    """Surrogate loss with the class-pair covariances built as d x d matrices."""
    n_classes, n_members, d = evolved.shape
    mu = evolved.mean(axis=1)
    centered = evolved - mu[:, None, :]
    cov = np.zeros((n_classes, n_classes, d, d))
    for c in range(n_classes):
        for cp in range(n_classes):
            acc = np.zeros((d, d))
            for m in range(n_members):
                acc += np.outer(centered[c, m], centered[cp, m])
            cov[c, cp] = acc / n_members
    scores = []
    for c in range(n_classes):
        w = cov[c, c] + cov[label, label] - cov[c, label] - cov[label, c]
        quad = float(z @ w @ z) / (2.0 * tau * tau)
        scores.append(float(z @ evolved[c, -1]) / tau + quad)
    shift = max(scores)
    lse = shift + math.log(sum(math.exp(s - shift) for s in scores))
    return -float(z @ evolved[label, -1]) / tau + lse


def total_loss_torch(
    base: np.ndarray,
    residuals: np.ndarray,
    views: np.ndarray,
    cache_logit_rows: np.ndarray,
    label: int,
    proto_labels: np.ndarray,
    prototypes: np.ndarray,
    tau: float,
    delta: float,
    lambda1: float,
    lambda2: float,
):
    """Autodiff twin of the three-term objective; returns (loss, grad).

    Written straight from the formulas with explicit covariance matrices.
    The confident-view mask is computed from detached probabilities, i.e.
    treated as locally constant, matching the engine and the FD oracle.
    """
    import torch

    base_t = torch.tensor(base, dtype=torch.float64)
    res = torch.tensor(residuals, dtype=torch.float64, requires_grad=True)
    views_t = torch.tensor(views, dtype=torch.float64)
    cache_t = torch.tensor(cache_logit_rows, dtype=torch.float64)

    pre = base_t + res
    evolved = pre / pre.norm(dim=-1, keepdim=True)
    final = evolved[:, -1, :]
    n_classes, n_members = evolved.shape[0], evolved.shape[1]

    logits = (views_t @ final.T + cache_t) / tau
    probs = torch.softmax(logits, dim=1)
    logp = torch.log_softmax(logits, dim=1)
    ents = -(probs * logp).sum(dim=1) / math.log(n_classes)
    mask = ents.detach() < delta
    if not bool(mask.any()):
        mask = torch.zeros_like(mask)
        mask[int(torch.argmin(ents.detach()))] = True
    p_tilde = probs[mask].mean(dim=0)
    safe = torch.clamp(p_tilde, min=1e-300)
    l_ent = -(p_tilde * torch.log(safe)).sum()

    z = views_t[0]
    mu = evolved.mean(dim=1)
    centered = evolved - mu[:, None, :]
    scores = []
    for c in range(n_classes):
        w = torch.zeros((base.shape[2], base.shape[2]), dtype=torch.float64)
        for m in range(n_members):
            w = w + torch.outer(centered[c, m], centered[c, m])
            w = w + torch.outer(centered[label, m], centered[label, m])
            w = w - torch.outer(centered[c, m], centered[label, m])
            w = w - torch.outer(centered[label, m], centered[c, m])
        quad = (z @ (w / n_members) @ z) / (2.0 * tau * tau)
        scores.append(z @ evolved[c, -1] / tau + quad)
    score_vec = torch.stack(scores)
    l_surr = -z @ evolved[label, -1] / tau + torch.logsumexp(score_vec, dim=0)

    if proto_labels.size > 0:
        protos_t = torch.tensor(prototypes, dtype=torch.float64)
        t_act = final[torch.tensor(proto_labels, dtype=torch.long)]
        sim = t_act @ protos_t.T
        diag = torch.diagonal(sim)
        l_align = (
            (torch.logsumexp(sim, dim=1) - diag) + (torch.logsumexp(sim, dim=0) - diag)
        ).mean()
    else:
        l_align = torch.zeros((), dtype=torch.float64)

    total = l_ent + lambda1 * l_surr + lambda2 * l_align
    total.backward()
    return (
        float(total.detach()),
        res.grad.detach().numpy().copy(),
        (float(l_ent.detach()), float(l_surr.detach()), float(l_align.detach())),
    )


def finite_difference_gradient(fn, point: np.ndarray, h: float = 1e-4) -> np.ndarray:
    """Central differences of a scalar function of an array, coordinatewise."""
    grad = np.zeros_like(point, dtype=np.float64)
    flat = grad.reshape(-1)
    base = point.astype(np.float64).copy()
    flat_point = base.reshape(-1)
    for i in range(flat_point.size):
        orig = flat_point[i]
        flat_point[i] = orig + h
        up = fn(base)
        flat_point[i] = orig - h
        down = fn(base)
        flat_point[i] = orig
        flat[i] = (up - down) / (2.0 * h)
    return grad


# ---------------------------------------------------------------------------
# Straight-line replay of the per-sample adaptation loop


@dataclass
class TraceStep:
    sample_id: int
    committee: list[int] | None
    original: int
    majority: int | None
    score: float
    entropy: float
    reweighted: float
    cache_event: str
    evicted_arrival: int | None
    merge_accepted: bool
    prediction: int
    p_final: np.ndarray
    cache_keys: dict[int, list[tuple[int, float]]]
    text_state: np.ndarray


def trace_reference(
    adjacent: np.ndarray,
    projection: np.ndarray,
    records,
    *,
    capacity: int,
    gamma: float,
    tau: float,
    delta: float,
    tau_merge: float,
    lambda1: float,
    lambda2: float,
    eta: float,
    alpha: float,
    beta: float,
    lr: float,
    weight_decay: float,
    opt_eps: float,
    beta1: float,
    beta2: float,
    cer_enabled: bool = True,
    ddc_enabled: bool = True,
    cache_enabled: bool = True,
) -> list[TraceStep]:
    """Flat reimplementation of the full loop, one literal step at a time.

    `records` yields (sample_id, views (V, d), true_label or None). Gradients
    come from the autodiff twin; everything else is plain loops.
    """
    base = np.array(adjacent, dtype=np.float64, copy=True)
    n_classes, n_members, dim = base.shape
    counter = 1
    slots: dict[int, list[dict]] = {c: [] for c in range(n_classes)}
    arrival = 0
    ln_c = math.log(n_classes)
    steps: list[TraceStep] = []

    def slot_prototypes():
        labels, protos = [], []
        for c in range(n_classes):
            if slots[c]:
                acc = np.zeros(dim)
                for e in slots[c]:
                    acc += e["feature"]
                acc /= len(slots[c])
                labels.append(c)
                protos.append(acc / np.linalg.norm(acc))
        if labels:
            return np.array(labels, dtype=np.int64), np.stack(protos)
        return np.empty(0, dtype=np.int64), np.empty((0, dim))

    def cache_row(vec):
        row = np.zeros(n_classes)
        for c in range(n_classes):
            if slots[c] and cache_enabled:
                acc = np.zeros(dim)
                for e in slots[c]:
                    acc += e["feature"]
                acc /= len(slots[c])
                proto = acc / np.linalg.norm(acc)
                row[c] = alpha * math.exp(-beta * (1.0 - float(vec @ proto)))
        return row

    def softmax_probs(logit_vec):
        scaled = np.asarray(logit_vec, dtype=np.float64) / tau
        scaled = scaled - scaled.max()
        ex = np.exp(scaled)
        return ex / ex.sum()

    for sample_id, views, true_label in records:
        z = np.asarray(views[0], dtype=np.float64)
        final = base[:, -1, :]
        original = int(np.argmax([float(z @ final[c]) for c in range(n_classes)]))

        committee = None
        majority = None
        score = 1.0
        if cer_enabled:
            z_proj = projection @ z
            committee = [
                int(np.argmax([float(z_proj @ base[c, m]) for c in range(n_classes)]))
                for m in range(n_members)
            ]
            majority, top = vote_oracle(committee, original)
            r = 1.0 if majority == original else gamma
            score = 1.0 + math.log(r * (n_members / top))

        p_text = softmax_probs([float(z @ final[c]) for c in range(n_classes)])
        entropy = float(-sum(p * math.log(p) for p in p_text if p > 0.0))
        reweighted = score * entropy

        cache_event = "off"
        evicted_arrival = None
        if cache_enabled:
            slot = slots[original]
            item = {
                "feature": z,
                "key": reweighted,
                "arrival": arrival,
                "true": true_label,
            }
            if len(slot) < capacity:
                slot.append(item)
                cache_event = "inserted"
            else:
                max_key = max(e["key"] for e in slot)
                if reweighted < max_key:
                    victim_idx = min(
                        (i for i, e in enumerate(slot) if e["key"] == max_key),
                        key=lambda i: slot[i]["arrival"],
                    )
                    evicted_arrival = slot[victim_idx]["arrival"]
                    del slot[victim_idx]
                    slot.append(item)
                    cache_event = "replaced"
                else:
                    cache_event = "rejected"
        arrival += 1

        merge_accepted = False
        if ddc_enabled and score == 1.0 and entropy / ln_c < tau_merge:
            proto_labels, protos = slot_prototypes() if cache_enabled else (
                np.empty(0, dtype=np.int64),
                np.empty((0, dim)),
            )
            rows = np.stack([cache_row(v) for v in views])
            _, grad, _ = total_loss_torch(
                base,
                np.zeros_like(base),
                np.asarray(views, dtype=np.float64),
                rows,
                original,
                proto_labels,
                protos,
                tau,
                delta,
                lambda1,
                lambda2,
            )
            # fresh single adaptive step from zero state
            m_hat = grad  # (1 - b1) g / (1 - b1)
            v_hat = grad * grad
            step_vec = m_hat / (np.sqrt(v_hat) + opt_eps)
            residual = -lr * step_vec
            candidate = base + residual
            cand_norms = np.linalg.norm(candidate, axis=-1)
            if np.all(cand_norms > 1e-12):
                t_star = candidate / cand_norms[..., None]
                mixed = (counter - 1) * base + t_star
                mixed_norms = np.linalg.norm(mixed, axis=-1)
                if np.all(mixed_norms > 1e-12):
                    base = mixed / mixed_norms[..., None]
                    counter += 1
                    merge_accepted = True

        final = base[:, -1, :]
        logits = np.array([float(z @ final[c]) for c in range(n_classes)]) + cache_row(z)
        p_cls = softmax_probs(logits)
        mu = base.mean(axis=1)
        p_gauss = softmax_probs([float(z @ mu[c]) for c in range(n_classes)])
        p_final = p_cls + eta * p_gauss
        prediction = int(np.argmax(p_final))

        steps.append(
            TraceStep(
                sample_id=sample_id,
                committee=committee,
                original=original,
                majority=majority,
                score=score,
                entropy=entropy,
                reweighted=reweighted,
                cache_event=cache_event,
                evicted_arrival=evicted_arrival,
                merge_accepted=merge_accepted,
                prediction=prediction,
                p_final=p_final,
                cache_keys={
                    c: [(e["arrival"], e["key"]) for e in slots[c]]
                    for c in range(n_classes)
                    if slots[c]
                },
                text_state=base.copy(),
            )
        )
    return steps


def oracle_suite() -> dict:
    """Bundle of the independent reference implementations."""
    return {
        "jacobi_svd": jacobi_svd_right_vectors,
        "projector": projector_from_jacobi,
        "rank_prompts": rank_prompts_bruteforce,
        "adjacent": adjacent_bruteforce,
        "vote": vote_oracle,
        "score": score_oracle,
        "cache_sort": cache_final_contents,
        "cache_replay": cache_replay,
        "surrogate_explicit": surrogate_loss_explicit,
        "loss_autodiff": total_loss_torch,
        "fd_gradient": finite_difference_gradient,
        "trace": trace_reference,
    }
