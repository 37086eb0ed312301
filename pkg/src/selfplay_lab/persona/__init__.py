"""Severity registry, client/therapist vignettes and system-prompt rendering."""
from selfplay_lab.persona.criteria import (
    DsmCriterion,
    SeverityProfile,
    builtin_criteria,
    builtin_severity_registry,
)
from selfplay_lab.persona.profiles import (
    ClientPersona,
    TherapistProfile,
    ValidationResult,
    builtin_personas,
    builtin_therapist,
    load_persona,
    load_therapist,
    resolve_persona,
    resolve_therapist,
    validate_persona,
)
from selfplay_lab.persona.render import PromptText, render_client_prompt, render_therapist_prompt
