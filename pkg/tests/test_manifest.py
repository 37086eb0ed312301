from __future__ import annotations

import json
from pathlib import Path

import pytest

from selfplay_lab.errors import ManifestError
from selfplay_lab.persona.profiles import DATA_DIR
from selfplay_lab.types import DEFAULT_OPENER
from selfplay_lab.workbench.manifest import load_manifest, manifest_from_dict


def _write(tmp_path, data) -> Path:
    path = tmp_path / "manifest.json"
    path.write_text(json.dumps(data, indent=2), encoding="utf-8")
    return path


def _error(data, base_dir=None) -> ManifestError:
    with pytest.raises(ManifestError) as info:
        manifest_from_dict(data, base_dir)
    return info.value


# ------------------------------------------------------------------
# Defaults
# ------------------------------------------------------------------

def test_defaults_apply_to_absent_keys():
    manifest = manifest_from_dict({"personas": ["moderate-sarah"]})
    assert manifest.sessions_per_persona == 100
    assert manifest.turns_per_agent == 10
    assert manifest.concurrency_limit == 1
    assert manifest.session_retries == 1
    assert manifest.opener == DEFAULT_OPENER
    assert manifest.output_dir == Path("outputs")
    assert manifest.params.model_name == "gpt-4o"
    assert manifest.params.temperature == 0.7


def test_null_opener_means_generated():
    manifest = manifest_from_dict({"personas": ["moderate-sarah"], "session": {"opener": None}})
    assert manifest.opener is None
    assert manifest.session_config(manifest.personas[0]).opener_mode == "generated"


def test_bundled_manifests_load(pilot_manifest_path):
    pilot = load_manifest(pilot_manifest_path)
    assert [p.id for p in pilot.personas] == [
        "mild-daniel", "mild-moderate-mei", "moderate-sarah", "moderate-severe-arjun", "severe-grace",
    ]
    assert (pilot.sessions_per_persona, pilot.turns_per_agent, pilot.concurrency_limit) == (4, 3, 4)

    study = load_manifest(pilot_manifest_path.parent / "study_gpt4o.json")
    assert (study.sessions_per_persona, study.turns_per_agent) == (100, 10)


def test_persona_paths_relative_to_manifest(tmp_path):
    persona = json.loads((DATA_DIR / "moderate-sarah.json").read_text(encoding="utf-8"))
    persona["id"] = "local-sarah"
    (tmp_path / "personas").mkdir()
    (tmp_path / "personas" / "sarah.json").write_text(json.dumps(persona), encoding="utf-8")

    manifest = load_manifest(_write(tmp_path, {"personas": ["personas/sarah.json"], "sessions_per_persona": 2}))
    assert manifest.personas[0].id == "local-sarah"
    assert manifest.session_ids(manifest.personas[0]) == ["local-sarah-001", "local-sarah-002"]


# ------------------------------------------------------------------
# Errors
# ------------------------------------------------------------------

@pytest.mark.parametrize("data,field", [
    ({"personas": ["moderate-sarah"], "sessions_per_persona": -1}, "sessions_per_persona"),
    ({"personas": ["moderate-sarah"], "sessions_per_persona": 0}, "sessions_per_persona"),
    ({"personas": ["moderate-sarah"], "sessions_per_persona": "10"}, "sessions_per_persona"),
    ({"personas": ["moderate-sarah"], "sessions_per_persona": True}, "sessions_per_persona"),
    ({"personas": ["moderate-sarah"], "session": {"turns_per_agent": 0}}, "session.turns_per_agent"),
    ({"personas": ["moderate-sarah"], "concurrency_limit": 0}, "concurrency_limit"),
    ({"personas": ["moderate-sarah"], "session_retries": -1}, "session_retries"),
    ({"personas": ["moderate-sarah"], "session": {"opener": "  "}}, "session.opener"),
    ({"personas": ["moderate-sarah"], "session": {"params": {"temperature": -1}}}, "session.params"),
    ({"personas": []}, "personas"),
    ({"personas": ["nobody"]}, "personas[0]"),
    ({"personas": ["moderate-sarah"], "session": {"therapist": "nobody"}}, "session.therapist"),
])
def test_invalid_values(data, field):
    err = _error(data)
    assert err.code == "INVALID_VALUE"
    assert err.field == field


@pytest.mark.parametrize("data,field", [
    ({"personas": ["moderate-sarah"], "seed": 7}, "seed"),
    ({"personas": ["moderate-sarah"], "session": {"turns": 3}}, "session.turns"),
    ({"personas": ["moderate-sarah"], "session": {"params": {"frequency_penalty": 0.5}}}, "session.params.frequency_penalty"),
])
def test_unknown_fields_rejected(data, field):
    err = _error(data)
    assert err.code == "UNKNOWN_FIELD"
    assert err.field == field


def test_duplicate_personas_rejected():
    assert _error({"personas": ["moderate-sarah", "moderate-sarah"]}).code == "INVALID_VALUE"


def test_parse_error_reports_line(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text('{\n  "personas": ["moderate-sarah"],\n  "sessions_per_persona": ,\n}\n', encoding="utf-8")
    with pytest.raises(ManifestError) as info:
        load_manifest(path)
    assert info.value.code == "PARSE_ERROR"
    assert info.value.line == 3


def test_non_object_manifest(tmp_path):
    with pytest.raises(ManifestError) as info:
        load_manifest(_write(tmp_path, ["moderate-sarah"]))
    assert info.value.code == "PARSE_ERROR"


def test_missing_manifest_file(tmp_path):
    with pytest.raises(ManifestError) as info:
        load_manifest(tmp_path / "absent.json")
    assert info.value.code == "IO_ERROR"
