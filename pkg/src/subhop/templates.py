"""Prompt template registry.

Templates live in external text files (one per pipeline stage) so prompt
iteration does not require code changes. Placeholders are ``{name}``
tokens; rendering substitutes all of them in a single pass and refuses
requests with unbound placeholders before any backend call.
"""

from __future__ import annotations

import re
from importlib import resources
from pathlib import Path
from typing import Mapping

from .errors import MissingTemplate, TemplateError

TEMPLATE_NAMES = (
    "extract_triples",
    "decompose",
    "rewrite",
    "answer_from_triples",
    "answer_from_docs",
    "final_answer",
)

_PLACEHOLDER_RE = re.compile(r"\{([A-Za-z_][A-Za-z0-9_]*)\}")


class TemplateRegistry:
    def __init__(self, templates: Mapping[str, str]):
        self._templates = dict(templates)
        self._placeholders = {
            name: frozenset(_PLACEHOLDER_RE.findall(body))
            for name, body in self._templates.items()
        }

    @classmethod
    def load(cls, directory: str | Path | None = None) -> "TemplateRegistry":
        """Load all templates; a missing file fails here, not at call time."""
        templates: dict[str, str] = {}
        if directory is None:
            root = resources.files("subhop") / "templates"
            for name in TEMPLATE_NAMES:
                candidate = root / f"{name}.txt"
                if not candidate.is_file():
                    raise MissingTemplate(name)
                templates[name] = candidate.read_text(encoding="utf-8")
        else:
            root = Path(directory)
            for name in TEMPLATE_NAMES:
                candidate = root / f"{name}.txt"
                if not candidate.is_file():
                    raise MissingTemplate(name)
                templates[name] = candidate.read_text(encoding="utf-8")
        return cls(templates)

    def __len__(self) -> int:
        return len(self._templates)

    def placeholders(self, name: str) -> frozenset[str]:
        self._require(name)
        return self._placeholders[name]

    def _require(self, name: str) -> None:
        if name not in self._templates:
            raise TemplateError(f"unknown template {name!r}")

    def render(self, name: str, variables: Mapping[str, object]) -> str:
        self._require(name)
        needed = self._placeholders[name]
        missing = sorted(needed - set(variables))
        if missing:
            raise TemplateError(f"template {name!r} missing bindings for {missing}")

        def _sub(match: re.Match[str]) -> str:
            token = match.group(1)
            if token in needed:
                return str(variables[token])
            return match.group(0)

        return _PLACEHOLDER_RE.sub(_sub, self._templates[name])
