"""Configuration file loading.

Experiment and platform configs are JSON or TOML. Python 3.10 has no stdlib
TOML reader and this environment's package mirror carries none, so a small
reader for the subset we emit is included: tables, arrays of tables,
strings, numbers, booleans, and single-line arrays.
"""
from __future__ import annotations

import json
import re
from typing import Any

from .errors import ConfigError, ParseError

_TABLE_RE = re.compile(r"^\[(\[)?\s*([A-Za-z0-9_.\-]+)\s*(\])?\]\s*$")
_KEY_RE = re.compile(r"^([A-Za-z0-9_\-]+)\s*=\s*(.+)$")


def _strip_comment(line: str) -> str:
    out = []
    in_str = False
    for ch in line:
        if ch == '"':
            in_str = not in_str
        if ch == "#" and not in_str:
            break
        out.append(ch)
    return "".join(out).strip()


def _parse_value(text: str) -> Any:
    text = text.strip()
    if text.startswith('"') and text.endswith('"') and len(text) >= 2:
        return text[1:-1]
    if text == "true":
        return True
    if text == "false":
        return False
    if text.startswith("[") and text.endswith("]"):
        inner = text[1:-1].strip()
        if not inner:
            return []
        parts, depth, buf = [], 0, []
        in_str = False
        for ch in inner:
            if ch == '"':
                in_str = not in_str
            if ch == "[" and not in_str:
                depth += 1
            if ch == "]" and not in_str:
                depth -= 1
            if ch == "," and depth == 0 and not in_str:
                parts.append("".join(buf))
                buf = []
            else:
                buf.append(ch)
        parts.append("".join(buf))
        return [_parse_value(p) for p in parts]
    try:
        if re.fullmatch(r"[+-]?\d+", text):
            return int(text)
        return float(text)
    except ValueError as exc:
        raise ParseError(f"unsupported TOML value: {text!r}") from exc


def toml_loads(text: str) -> dict:
    """Parse the TOML subset used by the config files."""
    root: dict[str, Any] = {}
    current = root
    for raw in text.splitlines():
        line = _strip_comment(raw)
        if not line:
            continue
        m = _TABLE_RE.match(line)
        if m:
            is_array = bool(m.group(1))
            if is_array != bool(m.group(3)):
                raise ParseError(f"unbalanced table header: {raw!r}")
            node = root
            parts = m.group(2).split(".")
            for part in parts[:-1]:
                node = node.setdefault(part, {})
                if isinstance(node, list):
                    node = node[-1]
            leaf = parts[-1]
            if is_array:
                node.setdefault(leaf, [])
                if not isinstance(node[leaf], list):
                    raise ParseError(f"{leaf} is not an array of tables")
                table: dict[str, Any] = {}
                node[leaf].append(table)
                current = table
            else:
                current = node.setdefault(leaf, {})
            continue
        m = _KEY_RE.match(line)
        if m is None:
            raise ParseError(f"cannot parse line: {raw!r}")
        current[m.group(1)] = _parse_value(m.group(2))
    return root


def load_config(path: str) -> dict:
    """Read a JSON or TOML configuration file."""
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    if path.endswith(".json"):
        try:
            return json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
    try:
        return toml_loads(text)
    except ParseError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
