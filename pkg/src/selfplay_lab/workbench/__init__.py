"""Manifests, JSONL stores and static transcript rendering."""
from selfplay_lab.workbench.html import render_transcript_html, write_transcript_html
from selfplay_lab.workbench.manifest import load_manifest
from selfplay_lab.workbench.store import AnnotationStore, TranscriptStore, read_all, write_transcript
