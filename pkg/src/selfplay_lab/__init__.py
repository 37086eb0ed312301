"""Therapist/client self-play lab package."""

__all__ = ["persona", "gateway", "sim", "analyst", "analytics", "workbench"]
