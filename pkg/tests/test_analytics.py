from __future__ import annotations

import math
import random

import pytest

from conftest import make_transcript
from selfplay_lab.analyst.taxonomy import approach_names, technique_names
from selfplay_lab.analytics.metrics import (
    ALL_GROUP,
    BY_SEVERITY,
    DECREASING,
    FLAT,
    INCREASING,
    NO_GROUPING,
    approach_distribution,
    average_ranks,
    guideline_adherence,
    monotonic_trend,
    severity_index,
    spearman_rho,
    technique_frequency,
    trend_report,
)
from selfplay_lab.errors import AnalyticsError
from selfplay_lab.persona.criteria import SEVERITY_LEVELS
from selfplay_lab.types import MULTI, SINGLE, Annotation


def _ann(session_id: str, approach: str = "PCT", techniques=("reflective listening",), mode: str = MULTI) -> Annotation:
    return Annotation(
        session_id=session_id,
        mode=mode,
        approach=approach,
        techniques=tuple(techniques),
        raw_response="",
    )


def _table_from_proportions(label: str, shares, per_group: int = 10):
    """Distribution over all five severity levels where ``label`` has the given share per level."""
    annotations, ranks = [], {}
    for rank, share in enumerate(shares):
        hits = round(share * per_group)
        for i in range(per_group):
            sid = f"{SEVERITY_LEVELS[rank]}-{i:03d}"
            ranks[sid] = rank
            annotations.append(_ann(sid, approach=label if i < hits else "MI"))
    return approach_distribution(annotations, ranks)


def _random_annotations(rng: random.Random, size: int):
    approaches = approach_names()
    techniques = technique_names()
    annotations, ranks = [], {}
    for i in range(size):
        sid = f"s-{i:04d}"
        ranks[sid] = rng.randrange(5)
        annotations.append(_ann(
            sid,
            approach=rng.choice(approaches),
            techniques=rng.sample(techniques, rng.randint(1, 4)),
        ))
    return annotations, ranks


# ------------------------------------------------------------------
# approach_distribution
# ------------------------------------------------------------------

def test_distribution_example_one_group():
    annotations = [_ann("a", "SFBT"), _ann("b", "SFBT"), _ann("c", "PCT"), _ann("d", "CBT")]
    table = approach_distribution(annotations, {k: 2 for k in "abcd"})

    assert table.groups == ["moderate"]
    props = table.proportions("moderate")
    assert (props["SFBT"], props["PCT"], props["CBT"]) == (0.5, 0.25, 0.25)
    assert sum(1 for v in props.values() if v == 0.0) == 9
    assert table.group_total("moderate") == 4


def test_distribution_rows_ordered_by_rank_then_label():
    annotations = [_ann("x", "SFBT"), _ann("y", "PCT")]
    table = approach_distribution(annotations, {"x": 4, "y": 0})
    assert table.groups == ["mild", "severe"]
    labels = [r.label for r in table.rows if r.group == "mild"]
    assert labels == sorted(approach_names())


def test_one_annotation_per_level_sums_to_one():
    annotations = [_ann(f"s{r}", approach) for r, approach in enumerate(["SFBT", "PCT", "CBT", "MI", "DBT"])]
    table = approach_distribution(annotations, {f"s{r}": r for r in range(5)})
    assert table.groups == list(SEVERITY_LEVELS)
    for group in table.groups:
        assert sum(table.proportions(group).values()) == pytest.approx(1.0, abs=1e-9)


def test_distribution_without_grouping():
    annotations = [_ann("a", "SFBT"), _ann("b", "PCT")]
    table = approach_distribution(annotations, {"a": 0, "b": 4}, grouping=NO_GROUPING)
    assert table.groups == [ALL_GROUP]
    assert table.counts(ALL_GROUP)["SFBT"] == 1


def test_distribution_accepts_transcripts():
    transcripts = [make_transcript(session_id="severe-grace-001", severity_rank=4)]
    table = approach_distribution([_ann("severe-grace-001")], severity_index(transcripts))
    assert table.groups == ["severe"]
    table = approach_distribution([_ann("severe-grace-001")], {t.session_id: t for t in transcripts})
    assert table.groups == ["severe"]


def test_distribution_errors():
    with pytest.raises(AnalyticsError) as info:
        approach_distribution([], {})
    assert info.value.code == "EMPTY_INPUT"

    with pytest.raises(AnalyticsError) as info:
        approach_distribution([_ann("ghost")], {"other": 1})
    assert info.value.code == "DANGLING_SESSION"

    with pytest.raises(AnalyticsError) as info:
        approach_distribution([_ann("a"), _ann("b", mode=SINGLE)], {"a": 0, "b": 0})
    assert info.value.code == "MODE_MISMATCH"

    with pytest.raises(AnalyticsError) as info:
        approach_distribution([_ann("a", "Gestalt Therapy")], {"a": 0})
    assert info.value.code == "UNKNOWN_LABEL"

    with pytest.raises(AnalyticsError) as info:
        approach_distribution([_ann("a")], {"a": 0}, grouping="persona")
    assert info.value.code == "INVALID_GROUPING"


# ------------------------------------------------------------------
# technique_frequency
# ------------------------------------------------------------------

def test_single_mode_frequency_example():
    annotations = [
        _ann("a", techniques=["open questions"], mode=SINGLE),
        _ann("b", techniques=["open questions"], mode=SINGLE),
        _ann("c", techniques=["scaling questions"], mode=SINGLE),
    ]
    table = technique_frequency(annotations, SINGLE)
    counts = table.counts()
    assert (counts["open questions"], counts["scaling questions"]) == (2, 1)
    assert sum(counts.values()) == 3
    assert [r.label for r in table.rows[:2]] == ["open questions", "scaling questions"]
    assert len(table.rows) == 21


def test_multi_mode_share_of_sessions():
    annotations = [
        _ann("a", techniques=["open questions", "affirmations"]),
        _ann("b", techniques=["open questions"]),
    ]
    table = technique_frequency(annotations, MULTI)
    by_label = {r.label: r for r in table.rows}
    assert by_label["open questions"].share == 1.0
    assert by_label["affirmations"].share == 0.5
    assert all(r.share <= 1.0 for r in table.rows)
    assert table.n_sessions == 2


def test_frequency_mode_mismatch():
    with pytest.raises(AnalyticsError) as info:
        technique_frequency([_ann("a"), _ann("b", mode=SINGLE)], MULTI)
    assert info.value.code == "MODE_MISMATCH"


def test_frequency_empty_is_all_zero():
    table = technique_frequency([], SINGLE)
    assert table.n_sessions == 0
    assert all(r.count == 0 and r.share == 0.0 for r in table.rows)


# ------------------------------------------------------------------
# Oracle equivalence
# ------------------------------------------------------------------

def test_tables_match_brute_force_recount():
    rng = random.Random(1234)
    for _ in range(200):
        annotations, ranks = _random_annotations(rng, rng.randint(1, 1000))

        table = approach_distribution(annotations, ranks)
        for rank, level in enumerate(SEVERITY_LEVELS):
            members = [a for a in annotations if ranks[a.session_id] == rank]
            if not members:
                assert level not in table.groups
                continue
            expected = {label: sum(1 for a in members if a.approach == label) for label in approach_names()}
            assert table.counts(level) == expected
            assert table.group_total(level) == len(members)
            assert math.fsum(table.proportions(level).values()) == pytest.approx(1.0, abs=1e-9)

        freq = technique_frequency(annotations, MULTI)
        expected = {label: sum(1 for a in annotations if label in a.techniques) for label in technique_names()}
        assert freq.counts() == expected
        assert all(r.share <= 1.0 for r in freq.rows)


def test_tables_invariant_under_permutation():
    rng = random.Random(77)
    annotations, ranks = _random_annotations(rng, 300)
    shuffled = list(annotations)
    rng.shuffle(shuffled)
    assert approach_distribution(annotations, ranks) == approach_distribution(shuffled, ranks)
    assert technique_frequency(annotations, MULTI) == technique_frequency(shuffled, MULTI)


# ------------------------------------------------------------------
# Spearman and trends
# ------------------------------------------------------------------

def test_average_ranks_ties():
    assert average_ranks([1, 2, 2, 3]) == [1.0, 2.5, 2.5, 4.0]
    assert average_ranks([5, 5, 5]) == [2.0, 2.0, 2.0]


def test_spearman_with_ties():
    rho = spearman_rho([0, 1, 2, 3, 4], [0.1, 0.1, 0.2, 0.3, 0.3])
    assert rho == pytest.approx(9 / math.sqrt(90))


def test_spearman_zero_variance():
    assert spearman_rho([0, 1, 2], [0.4, 0.4, 0.4]) == 0.0


def test_trend_strictly_decreasing():
    table = _table_from_proportions("SFBT", [0.9, 0.7, 0.5, 0.3, 0.1])
    stat = monotonic_trend(table, "SFBT")
    assert stat.rho == pytest.approx(-1.0)
    assert stat.direction == DECREASING
    assert stat.n_groups == 5


def test_trend_strictly_increasing():
    table = _table_from_proportions("PCT", [0.1, 0.2, 0.3, 0.4, 0.5])
    stat = monotonic_trend(table, "PCT")
    assert stat.rho == pytest.approx(1.0)
    assert stat.direction == INCREASING


def test_trend_flat_when_constant():
    table = _table_from_proportions("CBT", [0.2, 0.2, 0.2, 0.2, 0.2])
    stat = monotonic_trend(table, "CBT")
    assert (stat.rho, stat.direction) == (0.0, FLAT)


def test_trend_dead_zone():
    table = _table_from_proportions("SFBT", [0.3, 0.1, 0.5, 0.4, 0.2])
    stat = monotonic_trend(table, "SFBT")
    assert stat.rho == pytest.approx(0.1)
    assert stat.direction == FLAT
    assert monotonic_trend(table, "SFBT", dead_zone=0.05).direction == INCREASING


def test_trend_needs_all_groups():
    annotations = [_ann(f"s{r}") for r in range(4)]
    table = approach_distribution(annotations, {f"s{r}": r for r in range(4)})
    with pytest.raises(AnalyticsError) as info:
        monotonic_trend(table, "PCT")
    assert info.value.code == "MISSING_GROUPS"

    flat = approach_distribution(annotations, {f"s{r}": r for r in range(4)}, grouping=NO_GROUPING)
    with pytest.raises(AnalyticsError):
        monotonic_trend(flat, "PCT")


def test_trend_rejects_unknown_label_and_bad_dead_zone():
    table = _table_from_proportions("SFBT", [0.9, 0.7, 0.5, 0.3, 0.1])
    with pytest.raises(AnalyticsError) as info:
        monotonic_trend(table, "Gestalt Therapy")
    assert info.value.code == "UNKNOWN_LABEL"
    with pytest.raises(ValueError):
        monotonic_trend(table, "SFBT", dead_zone=1.5)


def test_trend_report_leads_with_sfbt_and_pct():
    table = _table_from_proportions("SFBT", [0.9, 0.7, 0.5, 0.3, 0.1])
    stats = trend_report(table)
    assert [s.label for s in stats[:2]] == ["SFBT", "PCT"]
    assert len(stats) == 12
    assert table.grouping == BY_SEVERITY


# ------------------------------------------------------------------
# Guideline adherence
# ------------------------------------------------------------------

def test_guideline_adherence_per_level():
    transcripts = [
        make_transcript(session_id="moderate-sarah-001", severity_rank=2,
                        contents=("one two three", "ok", "a b c d e? f g?", "ok")),
        make_transcript(session_id="severe-grace-001", severity_rank=4,
                        contents=("how are you?", "bad")),
    ]
    rows = guideline_adherence(transcripts, limit=5)
    assert [r.group for r in rows] == ["moderate", "severe"]

    moderate = rows[0]
    assert (moderate.sessions, moderate.therapist_turns, moderate.over_limit_turns) == (1, 2, 1)
    assert (moderate.mean_words, moderate.max_words, moderate.multi_question_turns) == (5.0, 7, 1)
    assert rows[1].multi_question_turns == 0
