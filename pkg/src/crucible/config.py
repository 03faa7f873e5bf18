"""INI configuration: [advisor], [environments] and [budgets] sections.

Example::

    [advisor]
    kind = http
    endpoint = https://llm.example/v1/chat/completions
    model = some-model
    temperature = 0.2
    timeout = 120

    [environments]
    envs = abr:oboe-synth, abr:fcc-synth
    trace_count = 20

    [budgets]
    reflect = 2
    bayes = 10

The API key is never read from here; it comes from CRUCIBLE_LLM_API_KEY.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Optional, Tuple

SECTIONS = ("advisor", "environments", "budgets")


class ConfigError(ValueError):
    pass


@dataclass
class Settings:
    advisor: str = "null"
    advisor_settings: Dict[str, str] = field(default_factory=dict)
    envs: Tuple[str, ...] = ()
    trace_count: int = 20
    reflect: int = 1
    bayes: int = 10


def _split(value: str) -> Tuple[str, ...]:
    out: list = []
    for piece in (v.strip() for v in value.replace("\n", ",").split(",")):
        if not piece:
            continue
        if out and ":" not in piece:  # cartpole:seeds=0,1 keeps its seed list
            out[-1] += "," + piece
        else:
            out.append(piece)
    return tuple(out)


def _int(section, key: str, default: int) -> int:
    try:
        v = section.getint(key, fallback=default)
    except ValueError as exc:
        raise ConfigError(f"[{section.name}] {key} must be an integer") from exc
    if v < 0:
        raise ConfigError(f"[{section.name}] {key} must be >= 0")
    return v


def parse_config(text: str) -> Settings:
    cp = configparser.ConfigParser(interpolation=None)
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from exc
    unknown = [s for s in cp.sections() if s not in SECTIONS]
    if unknown:
        raise ConfigError(f"unknown config section(s): {', '.join(unknown)}")
    out = Settings()
    if cp.has_section("advisor"):
        sec = dict(cp["advisor"])
        if any("key" in k.lower() for k in sec):
            raise ConfigError("API keys belong in CRUCIBLE_LLM_API_KEY, not in the config file")
        out.advisor = sec.pop("kind", out.advisor)
        out.advisor_settings = sec
    if cp.has_section("environments"):
        sec = cp["environments"]
        out.envs = _split(sec.get("envs", ""))
        out.trace_count = _int(sec, "trace_count", out.trace_count)
    if cp.has_section("budgets"):
        sec = cp["budgets"]
        out.reflect = _int(sec, "reflect", out.reflect)
        out.bayes = _int(sec, "bayes", out.bayes)
    return out


def load_config(path: Optional[str]) -> Settings:
    if path is None:
        return Settings()
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file not found: {path}")
    return parse_config(p.read_text(encoding="utf-8"))
