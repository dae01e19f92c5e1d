"""Exception hierarchy for the laboratory.

The CLI maps these onto exit codes: configuration problems exit 2,
numerical failures exit 3, and failed invariant checks exit 1 (reported in
the run report rather than raised).
"""
from __future__ import annotations


class SflabError(Exception):
    """Base class for all package errors."""


class ConfigError(SflabError):
    """Malformed or inconsistent configuration input."""


class DomainError(SflabError):
    """A point or parameter left the domain of a map."""


class WordDomainError(DomainError):
    """A chart-word orbit violated an atom's domain restriction."""

    def __init__(self, atom_index: int, message: str):
        self.atom_index = atom_index
        super().__init__(f"word domain violation at atom {atom_index}: {message}")


class AtlasError(SflabError):
    """A surface piece could not be built as requested."""


class FoldError(SflabError):
    """Fold-curve extraction failed (no seed, degenerate point, ...)."""


class PlanError(SflabError):
    """Subsequence planning or asymptotic fitting failed."""


class NumericsError(SflabError):
    """An iterative solve did not converge."""
