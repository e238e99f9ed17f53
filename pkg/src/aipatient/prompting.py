"""Prompt template loading and shared rendering helpers.

Templates are plain-text files with `$name` placeholders, bundled as package
data and overridable through a directory supplied in the service config.
Prompt sections are wrapped in XML-style tags, which keeps the structure
parseable both for live models and for the deterministic mock rules.
"""

from __future__ import annotations

import json
import re
from functools import lru_cache
from importlib import resources
from pathlib import Path
from string import Template

from aipatient.gql.executor import ResultTable

_TEMPLATE_PACKAGE = "aipatient.prompt_templates"

TEMPLATE_NAMES = (
    "retrieval",
    "abstraction",
    "kg_query",
    "checker",
    "rewrite",
    "summarization",
    "ner",
)


@lru_cache(maxsize=None)
def _template_text(name: str, directory: str | None) -> str:
    if directory is not None:
        return (Path(directory) / f"{name}.txt").read_text(encoding="utf-8")
    return resources.files(_TEMPLATE_PACKAGE).joinpath(f"{name}.txt").read_text(encoding="utf-8")


def load_template(name: str, directory: str | Path | None = None) -> Template:
    if name not in TEMPLATE_NAMES:
        raise KeyError(f"unknown prompt template {name!r}")
    return Template(_template_text(name, str(directory) if directory else None))


@lru_cache(maxsize=None)
def few_shot_examples(directory: str | None = None) -> dict[str, list[dict]]:
    """Worked question-to-query example pairs, grouped by entity category."""
    if directory is not None:
        text = (Path(directory) / "few_shot.json").read_text(encoding="utf-8")
    else:
        text = resources.files(_TEMPLATE_PACKAGE).joinpath("few_shot.json").read_text(
            encoding="utf-8"
        )
    return json.loads(text)


def render_few_shot_block(directory: str | Path | None = None) -> str:
    examples = few_shot_examples(str(directory) if directory else None)
    lines = ["<examples>"]
    for category, pairs in examples.items():
        for pair in pairs:
            lines.append(f"Question ({category}): {pair['question']}")
            lines.append(f"Query: {pair['query']}")
    lines.append("</examples>")
    return "\n".join(lines)


def render_history(summary: str) -> str:
    return summary if summary else "(no prior conversation)"


def render_result_table(table: ResultTable) -> str:
    payload: dict = {"columns": table.columns, "rows": table.rendered_rows()}
    if table.is_empty():
        payload["note"] = "no matching records"
    return json.dumps(payload)


_TAG_CACHE: dict[str, re.Pattern] = {}


def extract_tag(prompt: str, name: str) -> str | None:
    """Pull the contents of the first <name>...</name> block out of a prompt."""
    pattern = _TAG_CACHE.get(name)
    if pattern is None:
        pattern = re.compile(rf"<{name}>(.*?)</{name}>", re.DOTALL)
        _TAG_CACHE[name] = pattern
    match = pattern.search(prompt)
    return match.group(1).strip() if match else None
