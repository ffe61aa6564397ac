"""Evaluation utilities: the epsilon-cubed score and a keyword-behaviour scanner.

epsilon^3 = ACC^2 / A.Tok, with ACC in percent and A.Tok the mean number of
reasoning tokens.

The keyword scanner splits text on whitespace, strips leading/trailing
punctuation from each token for matching only, and counts dictionary phrases
as contiguous token runs (case-sensitive, leftmost-longest, no overlaps).
Frequencies are per thousand raw whitespace tokens.
"""

from __future__ import annotations

import csv
import io
import math
import string
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping

DEFAULT_KEYWORDS: dict[str, tuple[str, ...]] = {
    "Soliloquize&Thinking": ("Wait", "But", "wait", "Hold on", "Alternatively"),
    "Check&Confirm": ("Let me confirm", "Double-check"),
    "Summary&Calculation": ("Remember", "Let me compute", "Therefore"),
}


def epsilon_cubed(acc_percent: float, avg_tokens: float) -> float:
    if not avg_tokens > 0:
        raise ValueError(f"avg_tokens must be > 0, got {avg_tokens}")
    if not 0 <= acc_percent <= 100:
        raise ValueError(f"accuracy must be a percentage in [0, 100], got {acc_percent}")
    return acc_percent**2 / avg_tokens


@dataclass(frozen=True)
class EvalRecord:
    accuracy_percent: float
    avg_tokens: float

    @property
    def epsilon3(self) -> float:
        return epsilon_cubed(self.accuracy_percent, self.avg_tokens)


@dataclass
class EvalTable:
    rows: list[tuple[str, EvalRecord]]
    avg_accuracy: float
    avg_tokens: float
    # Mean of the per-row scores is what the "Average" row reports;
    # the score of the averages is kept alongside since the two disagree.
    epsilon3_mean_of_rows: float
    epsilon3_of_means: float

    def to_csv(self, digits: int = 2) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["name", "acc", "avg_tokens", "epsilon3"])
        for name, r in self.rows:
            w.writerow([name, f"{r.accuracy_percent:.2f}", f"{r.avg_tokens:.2f}", f"{r.epsilon3:.{digits}f}"])
        w.writerow(["Average", f"{self.avg_accuracy:.2f}", f"{self.avg_tokens:.2f}", f"{self.epsilon3_mean_of_rows:.{digits}f}"])
        return buf.getvalue()

    def to_dict(self) -> dict:
        return {
            "rows": [
                {"name": n, "acc": r.accuracy_percent, "avg_tokens": r.avg_tokens, "epsilon3": r.epsilon3}
                for n, r in self.rows
            ],
            "average": {
                "acc": self.avg_accuracy,
                "avg_tokens": self.avg_tokens,
                "epsilon3_mean_of_rows": self.epsilon3_mean_of_rows,
                "epsilon3_of_means": self.epsilon3_of_means,
            },
        }


def eval_report(records: Iterable[tuple[str, EvalRecord]]) -> EvalTable:
    records = list(records)
    if not records:
        raise ValueError("eval_report needs at least one record")
    names = [n for n, _ in records]
    dupes = sorted({n for n in names if names.count(n) > 1})
    if dupes:
        raise ValueError(f"duplicate record names: {dupes}")
    rows = sorted(records, key=lambda nr: nr[0])
    n = len(rows)
    acc = math.fsum(r.accuracy_percent for _, r in rows) / n
    tok = math.fsum(r.avg_tokens for _, r in rows) / n
    return EvalTable(
        rows=rows,
        avg_accuracy=acc,
        avg_tokens=tok,
        epsilon3_mean_of_rows=math.fsum(r.epsilon3 for _, r in rows) / n,
        epsilon3_of_means=epsilon_cubed(acc, tok),
    )


def read_eval_csv(path: str | Path) -> list[tuple[str, EvalRecord]]:
    """Rows of ``name, acc, avg_tokens`` (header optional)."""
    out = []
    with open(path, newline="") as fh:
        for row in csv.reader(fh):
            if not row or row[0].strip().startswith("#"):
                continue
            name, acc, tok = (c.strip() for c in row[:3])
            try:
                out.append((name, EvalRecord(float(acc), float(tok))))
            except ValueError:
                if not out and name.lower() == "name":
                    continue  # header
                raise
    return out


# --- keyword analysis ---------------------------------------------------------


class KeywordDictionary:
    def __init__(self, categories: Mapping[str, Iterable[str]] | None = None):
        categories = DEFAULT_KEYWORDS if categories is None else categories
        self.categories: dict[str, tuple[tuple[str, ...], ...]] = {}
        owner: dict[tuple[str, ...], str] = {}
        for cat, phrases in categories.items():
            toks = []
            for ph in phrases:
                t = tuple(ph.split())
                if not t:
                    raise ValueError(f"empty phrase in category {cat!r}")
                if t in owner:
                    raise ValueError(f"phrase {ph!r} listed under both {owner[t]!r} and {cat!r}")
                owner[t] = cat
                toks.append(t)
            self.categories[cat] = tuple(toks)
        if not owner:
            raise ValueError("keyword dictionary is empty")
        self._owner = owner
        self._max_len = max(len(t) for t in owner)

    @classmethod
    def from_file(cls, path: str | Path) -> "KeywordDictionary":
        """One ``category: phrase`` pair per line; blank and # lines skipped."""
        cats: dict[str, list[str]] = {}
        for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if ":" not in line:
                raise ValueError(f"{path}:{lineno}: expected 'category: phrase'")
            cat, phrase = (s.strip() for s in line.split(":", 1))
            cats.setdefault(cat, []).append(phrase)
        return cls(cats)

    def match_at(self, tokens: list[str], i: int) -> tuple[str, ...] | None:
        for n in range(min(self._max_len, len(tokens) - i), 0, -1):
            cand = tuple(tokens[i : i + n])
            if cand in self._owner:
                return cand
        return None

    def category_of(self, phrase: tuple[str, ...]) -> str:
        return self._owner[phrase]


@dataclass(frozen=True)
class KeywordCount:
    count: int
    per_thousand: float
    matched_tokens: int


def keyword_scan(text: str, dictionary: KeywordDictionary | None = None) -> dict[str, KeywordCount]:
    dictionary = dictionary or KeywordDictionary()
    raw = text.split()
    tokens = [t.strip(string.punctuation) for t in raw]
    counts = {c: 0 for c in dictionary.categories}
    matched = {c: 0 for c in dictionary.categories}
    i = 0
    while i < len(tokens):
        hit = dictionary.match_at(tokens, i)
        if hit is None:
            i += 1
            continue
        cat = dictionary.category_of(hit)
        counts[cat] += 1
        matched[cat] += len(hit)
        i += len(hit)
    n = len(raw)
    return {
        c: KeywordCount(counts[c], counts[c] * 1000.0 / n if n else 0.0, matched[c])
        for c in dictionary.categories
    }
