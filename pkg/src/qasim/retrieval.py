"""Answer selection over candidate pools and confidence-threshold routing.

The best candidate is the one the similarity network scores highest; the
answer is returned to the user only when that score clears a threshold,
otherwise the question escalates to a human agent.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from . import simnet
from .corpus import CandidatePool
from .simnet import SimilarityNetwork
from .training import lookup_features


class RoutingOutcome(str, Enum):
    ANSWER = "answer"
    ESCALATE = "escalate"


@dataclass(frozen=True)
class RoutingDecision:
    outcome: RoutingOutcome
    confidence: float
    answer_doc: int | None = None

    def __post_init__(self):
        if self.outcome is RoutingOutcome.ANSWER and self.answer_doc is None:
            raise ValueError("an answered decision must carry the answer doc id")


def select_answer(net: SimilarityNetwork, q_vector: np.ndarray, pool: CandidatePool,
                  a_features) -> tuple[int, float]:
    """Highest-scoring candidate index and its score; ties take the lowest index."""
    if not pool.candidates:
        raise ValueError("candidate pool is empty")
    fa = np.stack([lookup_features(a_features, c) for c in pool.candidates])
    fq = np.tile(np.asarray(q_vector, dtype=np.float64), (len(pool.candidates), 1))
    scores = simnet.score_batch(net, fq, fa)
    best = int(np.argmax(scores))  # argmax returns the first maximum
    return best, float(scores[best])


def route(score: float, threshold: float, answer_doc: int | None = None) -> RoutingDecision:
    """Answer when score >= threshold (boundary answers), else escalate."""
    if not 0.0 < threshold < 1.0:
        raise ValueError("threshold must lie in (0, 1)")
    if score >= threshold:
        return RoutingDecision(RoutingOutcome.ANSWER, confidence=score, answer_doc=answer_doc)
    return RoutingDecision(RoutingOutcome.ESCALATE, confidence=score)


def evaluate_pool_accuracy(net: SimilarityNetwork, pools: list[CandidatePool],
                           features) -> float:
    """Top-1 accuracy over pools that have a gold answer.

    Pools whose `correct` set is empty do not enter the denominator;
    `pool_report` counts them separately.
    """
    if not pools:
        raise ValueError("pools must be non-empty")
    q_features, a_features = features
    hits = 0
    scored = 0
    for pool in pools:
        if not pool.correct:
            continue
        scored += 1
        best, _ = select_answer(net, lookup_features(q_features, pool.question_doc),
                                pool, a_features)
        if best in pool.correct:
            hits += 1
    if scored == 0:
        raise ValueError("no pool has a correct answer to score against")
    return hits / scored


def pool_report(net: SimilarityNetwork, pools: list[CandidatePool], features,
                threshold: float = 0.7) -> dict:
    """Selection metrics over a pool set as one JSON-ready dict.

    answer_rate is the fraction of all pools whose winning score clears
    the routing threshold.
    """
    if not pools:
        raise ValueError("pools must be non-empty")
    q_features, a_features = features
    hits = 0
    scored = 0
    answered = 0
    for pool in pools:
        best, best_score = select_answer(
            net, lookup_features(q_features, pool.question_doc), pool, a_features)
        decision = route(best_score, threshold, answer_doc=pool.candidates[best])
        if decision.outcome is RoutingOutcome.ANSWER:
            answered += 1
        if pool.correct:
            scored += 1
            if best in pool.correct:
                hits += 1
    return {
        "pool_top1": hits / scored if scored else None,
        "pools_scored": scored,
        "pools_without_gold": len(pools) - scored,
        "threshold": threshold,
        "answer_rate": answered / len(pools),
    }
