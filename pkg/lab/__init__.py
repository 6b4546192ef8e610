"""Sequence generators, the continuity harness and the identity suites."""
