"""Seeded synthetic fixtures: topic-cluster corpora, planted QA pools,
and an order-only classification task.

These generators stand in for the proprietary chat data: small, fully
deterministic, and constructed so the expected outcome (cluster
structure, planted answers, order-carried classes) is known by design.
"""

from __future__ import annotations

import numpy as np


def _letters(i: int) -> str:
    """Base-26 token suffix using letters only (digits would map to <NUM>)."""
    out = ""
    for _ in range(3):
        out = chr(ord("a") + i % 26) + out
        i //= 26
    return out


def topic_tokens(prefix: str, count: int) -> list[str]:
    return [prefix + _letters(i) for i in range(count)]


def two_topic_docs(n_docs: int, tokens_per_topic: int = 20, doc_len: int = 20,
                   seed: int = 0) -> tuple[list[list[str]], list[int]]:
    """Documents drawn from two disjoint topic vocabularies.

    Document i belongs to topic i % 2 and samples all its tokens from
    that topic's vocabulary.  Returns (token lists, topic labels).
    """
    rng = np.random.default_rng(seed)
    vocabs = [topic_tokens("x", tokens_per_topic), topic_tokens("y", tokens_per_topic)]
    docs = []
    labels = []
    for i in range(n_docs):
        topic = i % 2
        idx = rng.integers(0, tokens_per_topic, size=doc_len)
        docs.append([vocabs[topic][j] for j in idx])
        labels.append(topic)
    return docs, labels


def planted_qa_records(n_questions: int = 60, n_gold: int = 50,
                       n_filler: int = 50, pool_size: int = 10,
                       tokens_per_topic: int = 20, question_len: int = 8,
                       answer_len: int = 12, seed: int = 0) -> list[dict]:
    """QA dataset records with one planted correct answer per pool.

    Questions and gold answers share one topic vocabulary; filler
    answers come from a second, disjoint topic.  Each pool holds one
    gold answer and pool_size-1 fillers, so the planted candidate is
    the only in-domain document in its pool.  The similarity head is
    additive over the two tower outputs, which makes within-pool
    ranking depend on the answer representation alone; this fixture
    keeps the planted answer decidable under that constraint.  Gold
    usage cycles so every gold answer appears in some pool.  Records
    fit the JSONL QA dataset schema.
    """
    if pool_size - 1 > n_filler:
        raise ValueError("not enough filler answers for the pool size")
    rng = np.random.default_rng(seed)
    vocabs = [topic_tokens("x", tokens_per_topic), topic_tokens("y", tokens_per_topic)]

    def sentence(topic: int, length: int) -> str:
        idx = rng.integers(0, tokens_per_topic, size=length)
        return " ".join(vocabs[topic][j] for j in idx)

    gold_answers = [sentence(0, answer_len) for _ in range(n_gold)]
    filler_answers = [sentence(1, answer_len) for _ in range(n_filler)]
    gold_order = rng.permutation(n_gold)

    records = []
    for q in range(n_questions):
        gold = gold_answers[gold_order[q % n_gold]]
        picks = rng.choice(n_filler, size=pool_size - 1, replace=False)
        distractors = [filler_answers[j] for j in picks]
        slot = int(rng.integers(0, pool_size))
        candidates = distractors[:slot] + [gold] + distractors[slot:]
        records.append({
            "question": sentence(0, question_len),
            "candidates": candidates,
            "correct": [slot],
        })
    return records


def order_carried_docs(n_docs: int = 100, cycles: int = 6, n_tokens: int = 3,
                       seed: int = 0) -> tuple[list[str], list[int]]:
    """Classification fixture where only word order separates the classes.

    The vocabulary is a ring of `n_tokens` tokens.  Every document walks
    the ring from a random start: class 0 forward, class 1 backward.
    Each document contains exactly `cycles` copies of every ring token,
    so the bag-of-words histograms of the two classes are identical and
    only the transition structure carries the label.  With a window of
    one preceding token the next-token distribution is ambiguous between
    the classes at every position, which is what pushes the class signal
    into the document vectors.
    """
    if n_tokens < 3:
        raise ValueError("the ring needs at least 3 tokens to be directional")
    rng = np.random.default_rng(seed)
    ring = [f"ring{chr(97 + i // 26)}{chr(97 + i % 26)}" for i in range(n_tokens)]
    texts = []
    labels = []
    for i in range(n_docs):
        label = i % 2
        step = 1 if label == 0 else -1
        offset = int(rng.integers(0, n_tokens))
        tokens = [ring[(offset + step * j) % n_tokens] for j in range(n_tokens * cycles)]
        texts.append(" ".join(tokens))
        labels.append(label)
    return texts, labels
