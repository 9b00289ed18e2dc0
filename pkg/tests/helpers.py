"""Independent oracles and small builders shared across the test modules.

Each oracle is a deliberately naive re-statement of a contract (brute force,
full enumeration, hour-by-hour scan) kept separate from the implementation
path it checks.
"""

from __future__ import annotations

import random
from datetime import timedelta

import numpy as np

from ddimine.features import FeatureMatrix


def auc_pair_oracle(scores, labels) -> float:
    """Pairwise-count AUC: P(random positive outscores random negative), ties 1/2."""
    pos = [s for s, y in zip(scores, labels) if y == 1]
    neg = [s for s, y in zip(scores, labels) if y == 0]
    assert pos and neg, "oracle needs both classes"
    wins = 0.0
    for sp_ in pos:
        for sn in neg:
            if sp_ > sn:
                wins += 1.0
            elif sp_ == sn:
                wins += 0.5
    return wins / (len(pos) * len(neg))


def match_oracle(tokens, lexicon) -> set[str]:
    """O(tokens * phrases * maxlen) subsequence scan over every phrase."""
    found = set()
    for drug_id, phrases in lexicon.phrases.items():
        for phrase in phrases:
            L = len(phrase)
            for i in range(len(tokens) - L + 1):
                if tuple(tokens[i : i + L]) == phrase:
                    found.add(drug_id)
                    break
    return found


def alg1_assign_oracle(assignment, abstracts, samples) -> list[set[str]]:
    """Literal triple-loop transcription of the split-then-assign procedure."""
    out = []
    for s in samples:
        ids = set()
        for ab in abstracts:
            if assignment.sample_split[s.key] != assignment.abstract_split[ab.id]:
                continue
            if s.cardiac_drug in ab.drug_mentions or s.other_drug in ab.drug_mentions:
                ids.add(ab.id)
        out.append(ids)
    return out


def hourly_alert_oracle(exposures, catalog) -> dict[tuple[str, tuple[str, str]], set]:
    """Hour-by-hour scan: hours where both drugs of a catalog pair are active.

    Valid when all interval endpoints are whole hours.
    """
    active: dict[tuple[str, str], set] = {}
    for e in exposures:
        hours = active.setdefault((e.patient_id, e.drug), set())
        t = e.start
        while t < e.end:
            hours.add(t)
            t += timedelta(hours=1)
    by_patient: dict[str, list[str]] = {}
    for patient, drug in active:
        by_patient.setdefault(patient, []).append(drug)
    result: dict[tuple[str, tuple[str, str]], set] = {}
    for patient, drugs in by_patient.items():
        drugs = sorted(set(drugs))
        for i, a in enumerate(drugs):
            for b in drugs[i + 1 :]:
                if (a, b) not in catalog:
                    continue
                both = active[(patient, a)] & active[(patient, b)]
                if both:
                    result[(patient, (a, b))] = both
    return result


def alert_hours(alerts) -> dict[tuple[str, tuple[str, str]], set]:
    """Hours covered by alert windows, keyed like the hourly oracle."""
    from ddimine.labeling import pair_key

    result: dict[tuple[str, tuple[str, str]], set] = {}
    for al in alerts:
        key = (al.patient_id, pair_key(al.drug_a, al.drug_b))
        hours = result.setdefault(key, set())
        t = al.start
        while t < al.end:
            hours.add(t)
            t += timedelta(hours=1)
    return result


def dense_matrix(X, y, kind: str = "counts") -> FeatureMatrix:
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=np.int64)
    keys = [f"s{i:04d}" for i in range(X.shape[0])]
    return FeatureMatrix(keys, X, y, kind)


def random_dense_matrix(rng: random.Random, n: int, d: int) -> FeatureMatrix:
    X = np.array([[rng.gauss(0.0, 1.0) for _ in range(d)] for _ in range(n)])
    y = np.array([rng.randint(0, 1) for _ in range(n)], dtype=np.int64)
    if y.sum() == 0:
        y[0] = 1
    if y.sum() == n:
        y[0] = 0
    return dense_matrix(X, y)
