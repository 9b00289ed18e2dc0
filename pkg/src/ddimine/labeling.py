"""Interaction catalog, pair enumeration, binary labels, and type templates."""

from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator

from .corpus import DrugLexicon
from .errors import ValidationError

PLACEHOLDER = "(~drug~)"


def pair_key(a: str, b: str) -> tuple[str, str]:
    """Order-insensitive lookup key for a drug pair."""
    return (a, b) if a <= b else (b, a)


class InteractionCatalog:
    """Known interacting drug pairs with free-text descriptions.

    Lookup is order-insensitive.  The order drugs appeared in the source row
    is kept as the display order for rendering alerts.
    """

    def __init__(self, rows: Iterable[tuple[str, str, str]]):
        self._records: dict[tuple[str, str], tuple[tuple[str, str], str]] = {}
        self.n_duplicate_rows = 0
        for a, b, description in rows:
            if not a or not b:
                raise ValidationError("catalog row with empty drug id")
            if a == b:
                raise ValidationError(f"catalog contains self-pair ({a!r}, {b!r})")
            key = pair_key(a, b)
            if key in self._records:
                self.n_duplicate_rows += 1  # first row wins
                continue
            self._records[key] = ((a, b), description)

    def __len__(self) -> int:
        return len(self._records)

    def __contains__(self, pair: tuple[str, str]) -> bool:
        return pair_key(*pair) in self._records

    def pairs(self) -> Iterator[tuple[str, str]]:
        """Canonical (sorted) pairs in first-seen order."""
        return iter(self._records)

    def description(self, a: str, b: str) -> str:
        return self._records[pair_key(a, b)][1]

    def display(self, a: str, b: str) -> tuple[str, str]:
        return self._records[pair_key(a, b)][0]

    def partners(self, drug: str) -> set[str]:
        out = set()
        for x, y in self._records:
            if x == drug:
                out.add(y)
            elif y == drug:
                out.add(x)
        return out

    @classmethod
    def load(cls, path: Path | str) -> "InteractionCatalog":
        """Read rows ``drug_a TAB drug_b TAB description``; '#' lines are comments."""
        rows = []
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.rstrip("\n")
                if not line.strip() or line.lstrip().startswith("#"):
                    continue
                parts = line.split("\t")
                if len(parts) != 3:
                    raise ValidationError(f"{path}:{lineno}: expected 3 tab-separated fields")
                rows.append((parts[0], parts[1], parts[2]))
        return cls(rows)


@dataclass(frozen=True)
class InteractionSample:
    """An ordered (cardiac drug, other drug) pair with its binary label."""

    cardiac_drug: str
    other_drug: str
    label: int
    template_id: int | None = None
    abstract_ids: frozenset[str] = frozenset()

    @property
    def key(self) -> str:
        return f"{self.cardiac_drug}|{self.other_drug}"


@dataclass(frozen=True)
class InteractionTemplate:
    template_id: int
    text: str


def build_universe(cardiac: set[str], catalog: InteractionCatalog) -> set[str]:
    """All catalog partners of cardiac drugs, united with the cardiac set."""
    if not cardiac:
        raise ValidationError("cardiac drug set is empty")
    universe = set(cardiac)
    for drug in cardiac:
        universe |= catalog.partners(drug)
    return universe


def label_pair(d_cardiac: str, d_other: str, catalog: InteractionCatalog) -> int:
    if d_cardiac == d_other:
        raise ValidationError(f"cannot label a self-pair ({d_cardiac!r})")
    return 1 if (d_cardiac, d_other) in catalog else 0


def enumerate_samples(
    cardiac: set[str], universe: set[str], catalog: InteractionCatalog
) -> list[InteractionSample]:
    """One sample per (cardiac, other) pair over the universe.

    A pair of two cardiac drugs appears once, with the lexicographically
    smaller drug in the cardiac slot.  Output order is sorted and stable.
    """
    samples = []
    for d_c in sorted(cardiac):
        for d_o in sorted(universe):
            if d_o == d_c:
                continue
            if d_o in cardiac and not d_c < d_o:
                continue  # cardiac-cardiac pair already emitted from the other side
            samples.append(InteractionSample(d_c, d_o, label_pair(d_c, d_o, catalog)))
    return samples


def templateize(
    description: str, drug_a: str, drug_b: str, lexicon: DrugLexicon
) -> tuple[str, int]:
    """Replace both drugs' name phrases in ``description`` with the placeholder.

    Matching is case-insensitive, longest phrase first.  Returns the template
    text and the number of replacements made (0 means the caller should count
    a warning; the text is returned unchanged).
    """
    if not description:
        raise ValidationError("empty interaction description")
    phrases = list(lexicon.phrases_for(drug_a)) + list(lexicon.phrases_for(drug_b))
    phrases.sort(key=lambda p: (-len(" ".join(p)), p))
    alternation = "|".join(r"[\s\-]+".join(re.escape(tok) for tok in p) for p in phrases)
    pattern = re.compile(rf"(?<![0-9A-Za-z])(?:{alternation})(?![0-9A-Za-z])", re.IGNORECASE)
    return pattern.subn(PLACEHOLDER, description)


@dataclass
class TemplateTable:
    templates: list[InteractionTemplate]
    by_pair: dict[tuple[str, str], int]  # canonical pair -> template_id
    support: dict[int, int]
    n_warnings: int  # descriptions where neither drug name was found


def extract_templates(catalog: InteractionCatalog, lexicon: DrugLexicon) -> TemplateTable:
    """Collapse catalog descriptions to placeholder templates with dense ids.

    Ids are assigned in order of first appearance over the catalog.  A
    description where no drug name was found keeps no template (it would
    carry no placeholder) and counts as a warning.
    """
    ids: dict[str, int] = {}
    by_pair: dict[tuple[str, str], int] = {}
    support: dict[int, int] = {}
    warnings = 0
    for a, b in catalog.pairs():
        text, n_replaced = templateize(catalog.description(a, b), a, b, lexicon)
        if n_replaced == 0:
            warnings += 1
            continue
        if text not in ids:
            ids[text] = len(ids)
        tid = ids[text]
        by_pair[(a, b)] = tid
        support[tid] = support.get(tid, 0) + 1
    templates = [InteractionTemplate(tid, text) for text, tid in ids.items()]
    return TemplateTable(templates, by_pair, support, warnings)


def annotate_template_ids(
    samples: list[InteractionSample], table: TemplateTable
) -> list[InteractionSample]:
    """Fill template_id on positive samples whose pair has a template."""
    out = []
    for s in samples:
        tid = table.by_pair.get(pair_key(s.cardiac_drug, s.other_drug))
        if s.label == 1 and tid is not None:
            s = InteractionSample(s.cardiac_drug, s.other_drug, s.label, tid, s.abstract_ids)
        out.append(s)
    return out


def positive_tallies(samples: list[InteractionSample]) -> dict[str, int]:
    """Positive-pair counts under both the unordered and ordered conventions.

    Enumeration stores each pair once (unordered).  The ordered tally counts
    (cardiac, other) and (other, cardiac) separately when both drugs are
    cardiac, for comparison with conventions that do.
    """
    cardiac = {s.cardiac_drug for s in samples}
    unordered = sum(s.label for s in samples)
    cc = sum(s.label for s in samples if s.other_drug in cardiac)
    return {
        "positives_unordered": unordered,
        "positives_ordered": unordered + cc,
        "cardiac_cardiac_positives": cc,
    }
