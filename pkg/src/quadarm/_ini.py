"""Thin wrapper over configparser that remembers where each key came from,
so validation errors can point at ``file:line``."""

from __future__ import annotations

import configparser
import re
from pathlib import Path

_SECTION = re.compile(r"^\s*\[([^\]]+)\]")
_KEY = re.compile(r"^\s*([^=:#;\s][^=:]*?)\s*[=:]")


class ConfigError(ValueError):
    """Parse or validation failure, with ``path:line`` when known."""


class IniFile:
    def __init__(self, path: str | Path, text: str | None = None):
        self.path = str(path)
        if text is None:
            text = Path(path).read_text(encoding="utf-8")
        self.text = text
        parser = configparser.ConfigParser(
            inline_comment_prefixes=("#", ";"), interpolation=None,
            default_section="__no_defaults__")
        parser.optionxform = str
        try:
            parser.read_string(text, source=self.path)
        except configparser.Error as exc:
            lineno = getattr(exc, "lineno", None)
            where = f"{self.path}:{lineno}" if lineno else self.path
            raise ConfigError(f"{where}: {exc.message if hasattr(exc, 'message') else exc}") from None
        self.parser = parser
        self._lines: dict[tuple[str | None, str | None], int] = {}
        section = None
        for n, line in enumerate(text.splitlines(), start=1):
            m = _SECTION.match(line)
            if m:
                section = m.group(1).strip()
                self._lines.setdefault((section, None), n)
                continue
            m = _KEY.match(line)
            if m and section is not None:
                self._lines.setdefault((section, m.group(1).strip()), n)
        self._used: set[tuple[str, str]] = set()

    def where(self, section: str, key: str | None = None) -> str:
        line = self._lines.get((section, key)) or self._lines.get((section, None))
        return f"{self.path}:{line}" if line else self.path

    def error(self, section: str, key: str | None, msg: str) -> ConfigError:
        label = f"[{section}]" + (f" {key}" if key else "")
        return ConfigError(f"{self.where(section, key)}: {label}: {msg}")

    def sections(self) -> list[str]:
        return self.parser.sections()

    def has(self, section: str, key: str | None = None) -> bool:
        if key is None:
            return self.parser.has_section(section)
        return self.parser.has_option(section, key)

    def raw(self, section: str, key: str) -> str:
        self._used.add((section, key))
        return self.parser.get(section, key)

    def get_str(self, section: str, key: str, default: str | None = None) -> str:
        if not self.has(section, key):
            if default is None:
                raise self.error(section, None, f"missing key '{key}'")
            return default
        return self.raw(section, key).strip()

    def get_float(self, section: str, key: str, default: float | None = None) -> float:
        if not self.has(section, key):
            if default is None:
                raise self.error(section, None, f"missing key '{key}'")
            return default
        try:
            return float(self.raw(section, key))
        except ValueError:
            raise self.error(section, key, f"expected a number, got {self.raw(section, key)!r}") from None

    def get_floats(self, section: str, key: str, n: int | None = None,
                   default: list[float] | None = None) -> list[float]:
        if not self.has(section, key):
            if default is None:
                raise self.error(section, None, f"missing key '{key}'")
            return list(default)
        parts = self.raw(section, key).replace(",", " ").split()
        try:
            vals = [float(p) for p in parts]
        except ValueError:
            raise self.error(section, key, f"expected numbers, got {self.raw(section, key)!r}") from None
        if n is not None and len(vals) != n:
            raise self.error(section, key, f"expected {n} values, got {len(vals)}")
        return vals

    def check_unknown(self, allowed: dict[str, set[str]], prefixes: dict[str, set[str]] | None = None):
        """Reject sections/keys not listed in ``allowed`` (or matched by a
        section prefix such as ``psmc.``)."""
        prefixes = prefixes or {}
        for sec in self.parser.sections():
            keys = allowed.get(sec)
            if keys is None:
                for pre, pkeys in prefixes.items():
                    if sec.startswith(pre):
                        keys = pkeys
                        break
            if keys is None:
                raise self.error(sec, None, "unknown section")
            for key in self.parser.options(sec):
                if "*" not in keys and key not in keys:
                    raise self.error(sec, key, "unknown key")
