"""Research-analyst agent: label taxonomies and transcript annotation."""
from selfplay_lab.analyst.annotate import (
    AnnotationFailure,
    AnnotationReport,
    annotate_batch,
    build_annotation_request,
    parse_annotation,
)
from selfplay_lab.analyst.taxonomy import (
    ApproachLabel,
    TechniqueLabel,
    approach_taxonomy,
    normalize,
    resolve_approach,
    resolve_technique,
    technique_taxonomy,
)
