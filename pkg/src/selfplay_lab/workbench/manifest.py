"""Run manifests: JSON documents that configure a self-play batch."""
from __future__ import annotations

import json
import logging
from pathlib import Path
from typing import Any, Mapping, Optional

from selfplay_lab.errors import ManifestError, PersonaError
from selfplay_lab.persona.profiles import resolve_persona, resolve_therapist, validate_persona, validate_therapist
from selfplay_lab.sim.batch import RunManifest
from selfplay_lab.types import DEFAULT_OPENER, GenerationParams

logger = logging.getLogger(__name__)

_TOP_LEVEL = {"personas", "sessions_per_persona", "session", "concurrency_limit", "output_dir", "session_retries"}
_SESSION = {"therapist", "turns_per_agent", "opener", "params"}
_PARAMS = {"model_name", "temperature", "max_tokens", "top_p"}

DEFAULTS = {
    "sessions_per_persona": 100,
    "turns_per_agent": 10,
    "therapist": "default",
    "concurrency_limit": 1,
    "output_dir": "outputs",
    "session_retries": 1,
}


def load_manifest(path: Path) -> RunManifest:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ManifestError("IO_ERROR", f"cannot read manifest {path}: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ManifestError("PARSE_ERROR", f"{path}:{exc.lineno}: {exc.msg}", line=exc.lineno) from exc
    manifest = manifest_from_dict(data, base_dir=path.parent)
    logger.info("Loaded manifest %s: %d persona(s) x %d session(s)",
                path, len(manifest.personas), manifest.sessions_per_persona)
    return manifest


def manifest_from_dict(data: Any, base_dir: Optional[Path] = None) -> RunManifest:
    """Defaults apply only to absent keys; persona and therapist paths are relative to ``base_dir``."""
    if not isinstance(data, Mapping):
        raise ManifestError("PARSE_ERROR", "a manifest must be a JSON object")
    _reject_unknown(data, _TOP_LEVEL, "")
    session = data.get("session", {})
    if not isinstance(session, Mapping):
        raise ManifestError("INVALID_VALUE", "session must be an object", field="session")
    _reject_unknown(session, _SESSION, "session.")
    params_data = session.get("params", {})
    if not isinstance(params_data, Mapping):
        raise ManifestError("INVALID_VALUE", "session.params must be an object", field="session.params")
    _reject_unknown(params_data, _PARAMS, "session.params.")

    refs = data.get("personas")
    if not isinstance(refs, list) or not refs or not all(isinstance(r, str) and r for r in refs):
        raise ManifestError("INVALID_VALUE", "personas must be a non-empty list of ids or paths", field="personas")
    personas = []
    for pos, ref in enumerate(refs):
        field = f"personas[{pos}]"
        try:
            persona = resolve_persona(ref, base_dir)
        except (PersonaError, ValueError) as exc:
            raise ManifestError("INVALID_VALUE", f"{field}: {exc}", field=field) from exc
        result = validate_persona(persona)
        if not result.ok:
            raise ManifestError("INVALID_VALUE", f"{field}: {result.describe()}", field=field)
        personas.append(persona)

    therapist_ref = session.get("therapist", DEFAULTS["therapist"])
    if not isinstance(therapist_ref, str) or not therapist_ref:
        raise ManifestError("INVALID_VALUE", "session.therapist must be an id or a path", field="session.therapist")
    try:
        therapist = resolve_therapist(therapist_ref, base_dir)
    except (PersonaError, ValueError) as exc:
        raise ManifestError("INVALID_VALUE", f"session.therapist: {exc}", field="session.therapist") from exc
    result = validate_therapist(therapist)
    if not result.ok:
        raise ManifestError("INVALID_VALUE", f"session.therapist: {result.describe()}", field="session.therapist")

    opener = session.get("opener", DEFAULT_OPENER)
    if opener is not None and (not isinstance(opener, str) or not opener.strip()):
        raise ManifestError("INVALID_VALUE", "session.opener must be non-empty text or null", field="session.opener")

    try:
        params = GenerationParams(**params_data)
    except (TypeError, ValueError) as exc:
        raise ManifestError("INVALID_VALUE", f"session.params: {exc}", field="session.params") from exc

    output_dir = data.get("output_dir", DEFAULTS["output_dir"])
    if not isinstance(output_dir, str) or not output_dir:
        raise ManifestError("INVALID_VALUE", "output_dir must be a path", field="output_dir")

    try:
        return RunManifest(
            personas=tuple(personas),
            therapist=therapist,
            sessions_per_persona=_positive_int(data, "sessions_per_persona", 1),
            turns_per_agent=_positive_int(session, "turns_per_agent", 1, prefix="session."),
            opener=opener,
            params=params,
            concurrency_limit=_positive_int(data, "concurrency_limit", 1),
            output_dir=Path(output_dir),
            session_retries=_positive_int(data, "session_retries", 0),
        )
    except ValueError as exc:
        raise ManifestError("INVALID_VALUE", str(exc)) from exc


def _reject_unknown(data: Mapping, allowed: set, prefix: str) -> None:
    unknown = sorted(set(data) - allowed)
    if unknown:
        raise ManifestError("UNKNOWN_FIELD", f"unknown field(s): {', '.join(prefix + k for k in unknown)}",
                            field=prefix + unknown[0])


def _positive_int(data: Mapping, key: str, minimum: int, prefix: str = "") -> int:
    value = data.get(key, DEFAULTS[key])
    if isinstance(value, bool) or not isinstance(value, int) or value < minimum:
        raise ManifestError("INVALID_VALUE", f"{prefix}{key} must be an integer >= {minimum}, got {value!r}",
                            field=prefix + key)
    return value
