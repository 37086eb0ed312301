"""DSM-5 major depressive episode criteria and the five severity profiles."""
from __future__ import annotations

from dataclasses import dataclass

CLINICALLY_SIGNIFICANT_DISTRESS = "clinically-significant-distress"
WORK_IMPAIRMENT = "work-impairment"
EXTRA_FEATURES = (CLINICALLY_SIGNIFICANT_DISTRESS, WORK_IMPAIRMENT)

SEVERITY_LEVELS = ("mild", "mild-moderate", "moderate", "moderate-severe", "severe")


@dataclass(frozen=True)
class DsmCriterion:
    id: int
    description: str

    def __post_init__(self) -> None:
        if not 1 <= self.id <= 9:
            raise ValueError(f"Criterion id must be in 1..9, got {self.id}")
        if not self.description.strip():
            raise ValueError(f"Criterion {self.id} needs a description")


@dataclass(frozen=True)
class SeverityProfile:
    level: str
    symptom_ids: frozenset
    extra_features: frozenset = frozenset()

    def __post_init__(self) -> None:
        if self.level not in SEVERITY_LEVELS:
            raise ValueError(f"Unknown severity level: {self.level!r}")
        bad = [s for s in self.symptom_ids if not isinstance(s, int) or not 1 <= s <= 9]
        if bad:
            raise ValueError(f"Symptom ids must be criterion ids 1..9, got {sorted(map(str, bad))}")
        unknown = set(self.extra_features) - set(EXTRA_FEATURES)
        if unknown:
            raise ValueError(f"Unknown extra features: {sorted(unknown)}")

    @property
    def rank(self) -> int:
        return SEVERITY_LEVELS.index(self.level)

    @property
    def phrase(self) -> str:
        """Level name as it reads in prose: ``mild-moderate`` -> ``mild to moderate``."""
        return self.level.replace("-", " to ")


_CRITERIA = (
    (1, "Low mood"),
    (2, "Anhedonia (markedly diminished interest or pleasure in all, or almost all, activities)"),
    (3, "Insomnia or hypersomnia"),
    (4, "Fatigue or loss of energy"),
    (5, "Significant (e.g., 5% of body weight within a month) unexplained weight loss or gain, "
        "or change in appetite"),
    (6, "Psychomotor agitation or retardation"),
    (7, "Indecisiveness or poor concentration"),
    (8, "Feelings of worthlessness or inappropriate guilt"),
    (9, "Recurrent thoughts of death, recurrent suicidal ideation without a specific plan, "
        "a suicide attempt or a specific plan for suicide"),
)

_SEVERITY = (
    ("mild", (4,), ()),
    ("mild-moderate", (1, 3, 4), ()),
    ("moderate", (1, 2, 3, 4, 8), (CLINICALLY_SIGNIFICANT_DISTRESS,)),
    ("moderate-severe", (1, 2, 3, 4, 5, 7, 8), (WORK_IMPAIRMENT,)),
    ("severe", (1, 2, 3, 4, 5, 6, 7, 8, 9), (WORK_IMPAIRMENT,)),
)


def builtin_criteria() -> list[DsmCriterion]:
    return [DsmCriterion(id=i, description=d) for i, d in _CRITERIA]


def builtin_severity_registry() -> list[SeverityProfile]:
    """Five profiles in ascending rank; each symptom set strictly contains the previous one."""
    return [
        SeverityProfile(level=level, symptom_ids=frozenset(ids), extra_features=frozenset(extra))
        for level, ids, extra in _SEVERITY
    ]


def severity_by_level(level: str, registry: "list[SeverityProfile] | None" = None) -> SeverityProfile:
    for profile in registry if registry is not None else builtin_severity_registry():
        if profile.level == level:
            return profile
    raise KeyError(f"No severity profile for level {level!r}")
