"""
Scenario file parser: line-oriented `key = value` with `[section]` headers
and `#` comments. Values are handed to the pydantic schema as text, so type
coercion and range checks live in one place; their errors are mapped back to
the line that set the offending key.
"""
from __future__ import annotations

import logging
from pathlib import Path

from pydantic import BaseModel, ValidationError

from app.schemas.scenario import Scenario

logger = logging.getLogger(__name__)

SECTIONS: dict[str, type[BaseModel]] = {
    name: field.annotation  # type: ignore[misc]
    for name, field in Scenario.model_fields.items()
    if isinstance(field.annotation, type) and issubclass(field.annotation, BaseModel)
}
TOP_LEVEL_KEYS = frozenset(Scenario.model_fields) - frozenset(SECTIONS)

# cross-field validators report no field; blame the first of these keys that the file set
_MODEL_ERROR_KEYS: dict[tuple[str, ...], tuple[tuple[str, str], ...]] = {
    (): (("topology", "spacing"), ("topology", "tx_range")),
    ("tsch",): (("tsch", "shared_slots"), ("tsch", "slotframe_length")),
    ("app",): (("app", "payload_bytes"), ("app", "header_bytes")),
}


class ScenarioError(ValueError):
    def __init__(self, message: str, line: int | None = None) -> None:
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


def _split_top_level(key: str) -> tuple[str, str] | None:
    """`app_interval` or `app.interval` at top level addresses a section key."""
    for sep in (".", "_"):
        head, found, tail = key.partition(sep)
        if found and head in SECTIONS and tail in SECTIONS[head].model_fields:
            return head, tail
    return None


def parse_scenario(text: str) -> Scenario:
    values: dict[str, object] = {}
    lines: dict[tuple[str, ...], int] = {}
    section: str | None = None
    line_count = 0
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line_count = line_no
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise ScenarioError(f"malformed section header {line!r}", line_no)
            section = line[1:-1].strip()
            if section not in SECTIONS:
                raise ScenarioError(f"unknown section [{section}]", line_no)
            lines.setdefault((section,), line_no)
            values.setdefault(section, {})
            continue
        key, sep, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not sep or not key:
            raise ScenarioError(f"expected 'key = value', got {line!r}", line_no)
        if not value:
            raise ScenarioError(f"{key}: missing value", line_no)

        if section is None and key in TOP_LEVEL_KEYS:
            path: tuple[str, ...] = (key,)
        elif section is None:
            target = _split_top_level(key)
            if target is None:
                raise ScenarioError(f"unknown key {key!r}", line_no)
            path = target
        elif key in SECTIONS[section].model_fields:
            path = (section, key)
        else:
            raise ScenarioError(f"unknown key {key!r} in [{section}]", line_no)

        if path in lines:
            raise ScenarioError(f"duplicate key {'.'.join(path)!r} (first set on line {lines[path]})", line_no)
        lines[path] = line_no
        if len(path) == 1:
            values[path[0]] = value
        else:
            values.setdefault(path[0], {})[path[1]] = value  # type: ignore[index]

    try:
        return Scenario.model_validate(values)
    except ValidationError as e:
        raise _to_scenario_error(e, lines, line_count) from None


def _to_scenario_error(err: ValidationError, lines: dict[tuple[str, ...], int], line_count: int) -> ScenarioError:
    first = err.errors()[0]
    loc = tuple(str(p) for p in first["loc"])
    message = first["msg"]
    if first["type"] == "missing":
        return ScenarioError(f"missing required key {'.'.join(loc)!r}", max(line_count, 1))
    if not loc or (len(loc) == 1 and loc[0] in SECTIONS):
        for path in _MODEL_ERROR_KEYS.get(loc, ()):
            if path in lines:
                return ScenarioError(message, lines[path])
        return ScenarioError(message, lines.get(loc, 1))
    key_path = loc[:2] if loc[0] in SECTIONS else loc[:1]
    return ScenarioError(f"{'.'.join(key_path)}: {message}", lines.get(key_path))


def load_scenario(path: str | Path) -> Scenario:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ScenarioError(f"cannot read scenario {path}: {e.strerror or e}") from None
    scenario = parse_scenario(text)
    logger.debug("loaded scenario %s (mode %s)", path, scenario.mode.value)
    return scenario


def with_overrides(scenario: Scenario, **changes: object) -> Scenario:
    """Copy with top-level fields replaced, re-validated."""
    data = scenario.model_dump()
    data.update({k: v for k, v in changes.items() if v is not None})
    try:
        return Scenario.model_validate(data)
    except ValidationError as e:
        raise ScenarioError(str(e.errors()[0]["msg"])) from None
