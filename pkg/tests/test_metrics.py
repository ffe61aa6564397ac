import numpy as np
import pytest
from hypothesis import given, strategies as st

from vpgea.metrics import (
    DEFAULT_KEYWORDS, EvalRecord, KeywordDictionary, epsilon_cubed, eval_report, keyword_scan,
    read_eval_csv,
)

# published 1.5B rows: (benchmark, ACC, A.Tok, printed score)
TABLE1_SMALL = [
    ("GSM8K", 81.00, 519.90, 12.62),
    ("MATH-500", 82.40, 1891.80, 3.59),
    ("AIME24", 33.33, 6659.73, 0.17),
    ("AIME25", 20.00, 6678.70, 0.06),
]

FILLER = ["the", "value", "is", "now", "seven", "so", "we", "add", "two", "and", "check", "again"]


def planted_text(plants: dict[str, int], total: int, seed: int) -> str:
    """``total`` whitespace tokens of filler with each phrase planted the
    given number of times at random non-overlapping slots."""
    rng = np.random.default_rng(seed)
    pieces = [p.split() for p, n in plants.items() for _ in range(n)]
    n_filler = total - sum(len(p) for p in pieces)
    assert n_filler >= 0
    slots = sorted(rng.choice(n_filler + 1, size=len(pieces), replace=True).tolist())
    order = rng.permutation(len(pieces))
    filler = [FILLER[i] for i in rng.integers(len(FILLER), size=n_filler)]
    out, j = [], 0
    for k, slot in enumerate(slots):
        out.extend(filler[j:slot])
        j = slot
        out.extend(pieces[order[k]])
    out.extend(filler[j:])
    assert len(out) == total
    return " ".join(out)


def test_epsilon_cubed_published_spot_checks():
    assert epsilon_cubed(81.00, 519.90) == pytest.approx(12.62, abs=0.005)
    assert epsilon_cubed(92.00, 537.87) == pytest.approx(15.74, abs=0.005)
    assert epsilon_cubed(100, 100) == 100


def test_epsilon_cubed_rows_reproduce_table():
    for _, acc, tok, printed in TABLE1_SMALL:
        assert epsilon_cubed(acc, tok) == pytest.approx(printed, abs=0.01)


def test_epsilon_cubed_validation():
    with pytest.raises(ValueError):
        epsilon_cubed(50, 0)
    with pytest.raises(ValueError):
        epsilon_cubed(120, 10)


@given(st.floats(0.01, 99), st.floats(0.01, 1), st.floats(1, 1e4), st.floats(0.01, 100))
def test_epsilon_cubed_monotone(acc, dacc, tok, dtok):
    assert epsilon_cubed(acc + dacc, tok) > epsilon_cubed(acc, tok)
    assert epsilon_cubed(acc, tok + dtok) < epsilon_cubed(acc, tok)


def test_eval_report_single_and_pair():
    t = eval_report([("a", EvalRecord(70, 350))])
    assert (t.avg_accuracy, t.avg_tokens) == (70, 350) and t.epsilon3_mean_of_rows == t.rows[0][1].epsilon3
    t = eval_report([("x", EvalRecord(100, 100)), ("y", EvalRecord(0, 100))])
    assert (t.avg_accuracy, t.avg_tokens) == (50, 100)
    assert t.epsilon3_mean_of_rows == 50 and t.epsilon3_of_means == 25


def test_eval_report_sorted_and_rejects_duplicates():
    t = eval_report([("b", EvalRecord(1, 1)), ("a", EvalRecord(2, 2))])
    assert [n for n, _ in t.rows] == ["a", "b"]
    with pytest.raises(ValueError):
        eval_report([("a", EvalRecord(1, 1)), ("a", EvalRecord(2, 2))])
    with pytest.raises(ValueError):
        eval_report([])


def test_eval_report_table_rows(tmp_path):
    path = tmp_path / "rows.csv"
    path.write_text("name,acc,avg_tokens\n" + "".join(f"{n},{a},{t}\n" for n, a, t, _ in TABLE1_SMALL))
    table = eval_report(read_eval_csv(path))
    printed = {n: p for n, _, _, p in TABLE1_SMALL}
    for name, rec in table.rows:
        assert rec.epsilon3 == pytest.approx(printed[name], abs=0.01)
    assert table.to_csv().splitlines()[-1].startswith("Average,")


def test_keyword_scan_small_example():
    out = keyword_scan("Wait, wait. Therefore done.")
    assert out["Soliloquize&Thinking"].count == 2 and out["Soliloquize&Thinking"].per_thousand == 500
    assert out["Summary&Calculation"].count == 1 and out["Summary&Calculation"].per_thousand == 250
    assert out["Check&Confirm"].count == 0


def test_keyword_scan_no_hits_and_empty():
    assert all(c.count == 0 and c.per_thousand == 0 for c in keyword_scan("nothing to see here").values())
    assert all(c.count == 0 and c.per_thousand == 0 for c in keyword_scan("").values())


def test_but_is_case_sensitive():
    assert keyword_scan("but But BUT")["Soliloquize&Thinking"].count == 1


def test_planted_check_confirm_frequency():
    text = planted_text({"Let me confirm": 3}, 1000, seed=0)
    assert len(text.split()) == 1000
    assert keyword_scan(text)["Check&Confirm"].per_thousand == 3.0


def test_planted_fixtures_all_categories():
    for seed in range(5):
        plants = {"Wait": 4, "Alternatively": 2, "Double-check": 5, "Let me compute": 3, "Therefore": 1}
        text = planted_text(plants, 1000, seed)
        out = keyword_scan(text)
        for cat, phrases in DEFAULT_KEYWORDS.items():
            want = sum(plants.get(p, 0) for p in phrases)
            assert out[cat].count == want and out[cat].per_thousand == float(want)


def test_leftmost_longest_without_overlap():
    d = KeywordDictionary({"short": ["Let me"], "long": ["Let me confirm"], "tail": ["confirm it"]})
    out = keyword_scan("Let me confirm it", d)
    assert (out["long"].count, out["short"].count, out["tail"].count) == (1, 0, 0)


@given(st.lists(st.sampled_from(["Wait", "But", "x", "Let", "me", "confirm", "Therefore,"]), max_size=40),
       st.integers(1, 3), st.integers(0, 3))
def test_scan_whitespace_invariant(words, gap, pad):
    a = keyword_scan(" ".join(words))
    b = keyword_scan(" " * pad + (" " * gap).join(words) + "\n" * pad)
    assert a == b
    assert sum(c.matched_tokens for c in a.values()) <= len(words)


def test_dictionary_file(tmp_path):
    f = tmp_path / "dict.txt"
    f.write_text("# custom\nHmm: Hmm\nHmm: Let me see\n\nDone: QED\n")
    d = KeywordDictionary.from_file(f)
    out = keyword_scan("Hmm. Let me see... QED", d)
    assert out["Hmm"].count == 2 and out["Done"].count == 1
    bad = tmp_path / "bad.txt"
    bad.write_text("no separator here\n")
    with pytest.raises(ValueError):
        KeywordDictionary.from_file(bad)
    with pytest.raises(ValueError):
        KeywordDictionary({"a": ["x"], "b": ["x"]})
