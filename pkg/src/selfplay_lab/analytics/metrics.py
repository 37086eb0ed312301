from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence, Tuple, Union

from selfplay_lab.analyst.taxonomy import approach_names, technique_names
from selfplay_lab.errors import AnalyticsError
from selfplay_lab.persona.criteria import SEVERITY_LEVELS
from selfplay_lab.sim.engine import therapist_question_stats, therapist_word_stats
from selfplay_lab.types import MODES, THERAPIST, Annotation, Transcript

BY_SEVERITY = "severity"
NO_GROUPING = "none"
GROUPINGS = (BY_SEVERITY, NO_GROUPING)
ALL_GROUP = "all"

DECREASING = "decreasing"
INCREASING = "increasing"
FLAT = "flat"
DEFAULT_DEAD_ZONE = 0.3

# Approaches the trend report lists first.
HEADLINE_APPROACHES = ("SFBT", "PCT")


@dataclass(frozen=True)
class DistributionRow:
    group: str
    label: str
    count: int
    proportion: float


@dataclass(frozen=True)
class DistributionTable:
    grouping: str
    rows: Tuple[DistributionRow, ...]

    @property
    def groups(self) -> list[str]:
        return list(dict.fromkeys(r.group for r in self.rows))

    def group_total(self, group: str) -> int:
        return sum(r.count for r in self.rows if r.group == group)

    def proportions(self, group: str) -> dict[str, float]:
        return {r.label: r.proportion for r in self.rows if r.group == group}

    def counts(self, group: str) -> dict[str, int]:
        return {r.label: r.count for r in self.rows if r.group == group}


@dataclass(frozen=True)
class FrequencyRow:
    label: str
    count: int
    share: float


@dataclass(frozen=True)
class FrequencyTable:
    mode: str
    rows: Tuple[FrequencyRow, ...]
    n_sessions: int

    def counts(self) -> dict[str, int]:
        return {r.label: r.count for r in self.rows}


@dataclass(frozen=True)
class TrendStat:
    label: str
    rho: float
    direction: str
    n_groups: int


SeverityIndex = Mapping[str, Union[int, Transcript]]


def severity_index(transcripts: Iterable[Transcript]) -> dict[str, int]:
    return {t.session_id: t.severity_rank for t in transcripts}


def _single_mode(annotations: Sequence[Annotation]) -> str:
    modes = {a.mode for a in annotations}
    if len(modes) > 1:
        raise AnalyticsError("MODE_MISMATCH", f"annotations mix modes {sorted(modes)}")
    return modes.pop()


def approach_distribution(
    annotations: Iterable[Annotation],
    transcripts: SeverityIndex,
    grouping: str = BY_SEVERITY,
) -> DistributionTable:
    """Approach counts and proportions per severity group (or one ``all`` group)."""
    if grouping not in GROUPINGS:
        raise AnalyticsError("INVALID_GROUPING", f"grouping must be one of {GROUPINGS}, got {grouping!r}")
    annotations = list(annotations)
    if not annotations:
        raise AnalyticsError("EMPTY_INPUT", "no annotations to aggregate")
    _single_mode(annotations)

    labels = sorted(approach_names())
    counts: dict[int, Counter] = {}
    for a in annotations:
        if a.session_id not in transcripts:
            raise AnalyticsError("DANGLING_SESSION", f"annotation {a.session_id!r} has no transcript")
        if a.approach not in labels:
            raise AnalyticsError("UNKNOWN_LABEL", f"{a.session_id}: unknown approach {a.approach!r}")
        entry = transcripts[a.session_id]
        rank = entry.severity_rank if isinstance(entry, Transcript) else int(entry)
        key = rank if grouping == BY_SEVERITY else -1
        counts.setdefault(key, Counter())[a.approach] += 1

    rows = []
    for key in sorted(counts):
        group = SEVERITY_LEVELS[key] if key >= 0 else ALL_GROUP
        total = sum(counts[key].values())
        for label in labels:
            n = counts[key][label]
            rows.append(DistributionRow(group=group, label=label, count=n, proportion=n / total))
    return DistributionTable(grouping=grouping, rows=tuple(rows))


def technique_frequency(annotations: Iterable[Annotation], mode: str) -> FrequencyTable:
    """Sessions using each technique; a technique counts at most once per session."""
    if mode not in MODES:
        raise AnalyticsError("MODE_MISMATCH", f"unknown mode {mode!r}")
    annotations = list(annotations)
    wrong = sorted({a.session_id for a in annotations if a.mode != mode})
    if wrong:
        raise AnalyticsError("MODE_MISMATCH", f"{len(wrong)} annotation(s) are not {mode}-mode, e.g. {wrong[0]!r}")

    labels = technique_names()
    counter: Counter = Counter()
    for a in annotations:
        for technique in set(a.techniques):
            if technique not in labels:
                raise AnalyticsError("UNKNOWN_LABEL", f"{a.session_id}: unknown technique {technique!r}")
            counter[technique] += 1

    n = len(annotations)
    ordered = sorted(labels, key=lambda label: (-counter[label], label))
    rows = tuple(FrequencyRow(label=label, count=counter[label], share=counter[label] / n if n else 0.0)
                 for label in ordered)
    return FrequencyTable(mode=mode, rows=rows, n_sessions=n)


# ----------------------------------------------------------------------
# Trends
# ----------------------------------------------------------------------

def average_ranks(values: Sequence[float]) -> list[float]:
    """1-based ranks; tied values share the mean of the ranks they span."""
    order = sorted(range(len(values)), key=lambda i: values[i])
    ranks = [0.0] * len(values)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and values[order[j + 1]] == values[order[i]]:
            j += 1
        shared = (i + j) / 2.0 + 1.0
        for k in range(i, j + 1):
            ranks[order[k]] = shared
        i = j + 1
    return ranks


def spearman_rho(xs: Sequence[float], ys: Sequence[float]) -> float:
    if len(xs) != len(ys):
        raise ValueError("spearman_rho needs equally long sequences")
    rx = average_ranks(xs)
    ry = average_ranks(ys)
    mx = sum(rx) / len(rx)
    my = sum(ry) / len(ry)
    sxy = sum((a - mx) * (b - my) for a, b in zip(rx, ry))
    sxx = sum((a - mx) ** 2 for a in rx)
    syy = sum((b - my) ** 2 for b in ry)
    if sxx == 0.0 or syy == 0.0:
        return 0.0
    return max(-1.0, min(1.0, sxy / math.sqrt(sxx * syy)))


def monotonic_trend(
    table: DistributionTable,
    label: str,
    dead_zone: float = DEFAULT_DEAD_ZONE,
) -> TrendStat:
    """Spearman correlation between severity rank and the label's share of sessions."""
    if not 0.0 <= dead_zone <= 1.0:
        raise ValueError(f"dead_zone must be in [0, 1], got {dead_zone}")
    missing = [level for level in SEVERITY_LEVELS if level not in table.groups]
    if table.grouping != BY_SEVERITY or missing:
        raise AnalyticsError("MISSING_GROUPS", f"trend needs all severity groups; missing {missing or 'grouping'}")
    if label not in table.proportions(SEVERITY_LEVELS[0]):
        raise AnalyticsError("UNKNOWN_LABEL", f"{label!r} is not in the table")

    ys = [table.proportions(level)[label] for level in SEVERITY_LEVELS]
    rho = spearman_rho(list(range(len(SEVERITY_LEVELS))), ys)
    if abs(rho) < dead_zone:
        direction = FLAT
    else:
        direction = INCREASING if rho > 0 else DECREASING
    return TrendStat(label=label, rho=rho, direction=direction, n_groups=len(ys))


def trend_report(table: DistributionTable, dead_zone: float = DEFAULT_DEAD_ZONE) -> list[TrendStat]:
    rest = [name for name in approach_names() if name not in HEADLINE_APPROACHES]
    return [monotonic_trend(table, label, dead_zone) for label in (*HEADLINE_APPROACHES, *rest)]


# ----------------------------------------------------------------------
# Guideline adherence
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class AdherenceRow:
    group: str
    sessions: int
    therapist_turns: int
    over_limit_turns: int
    mean_words: float
    max_words: int
    multi_question_turns: int


def guideline_adherence(transcripts: Iterable[Transcript], limit: int) -> list[AdherenceRow]:
    """Therapist length and one-question-per-turn adherence per severity level."""
    groups: dict[int, list[Transcript]] = {}
    for t in transcripts:
        groups.setdefault(t.severity_rank, []).append(t)

    rows = []
    for rank in sorted(groups):
        turns = words = over = max_words = multi = 0
        for t in groups[rank]:
            n = len(t.speaker_turns(THERAPIST))
            ws = therapist_word_stats(t, limit)
            qs = therapist_question_stats(t)
            turns += n
            words += ws.total_words
            over += ws.violations
            max_words = max(max_words, ws.max_words)
            multi += qs.multi_question_turns
        rows.append(AdherenceRow(
            group=SEVERITY_LEVELS[rank],
            sessions=len(groups[rank]),
            therapist_turns=turns,
            over_limit_turns=over,
            mean_words=words / turns if turns else 0.0,
            max_words=max_words,
            multi_question_turns=multi,
        ))
    return rows
