"""Severity-stratified distributions, technique frequencies and trend statistics."""
from selfplay_lab.analytics.export import export_tables, write_report_index
from selfplay_lab.analytics.metrics import (
    DistributionTable,
    FrequencyTable,
    TrendStat,
    approach_distribution,
    guideline_adherence,
    monotonic_trend,
    technique_frequency,
    trend_report,
)
