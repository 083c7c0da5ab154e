"""Line-based ``key = value`` configuration files."""
from __future__ import annotations

from .errors import ConfigError, ParseError

TRUE = {"1", "true", "yes", "on"}
FALSE = {"0", "false", "no", "off"}


def parse_config(text):
    """Dict of normalized keys (dashes become underscores) to raw string values.

    Blank lines and lines starting with ``#`` are skipped; a repeated key keeps
    its last value.
    """
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ParseError(f"expected 'key = value', got {raw!r}", line=lineno)
        key, value = (t.strip() for t in line.split("=", 1))
        if not key:
            raise ParseError("empty key", line=lineno)
        out[key.lstrip("-").replace("-", "_")] = value
    return out


def read_config(path):
    try:
        with open(path) as fh:
            return parse_config(fh.read())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None


def parse_bool(value):
    v = str(value).strip().lower()
    if v in TRUE:
        return True
    if v in FALSE:
        return False
    raise ConfigError(f"not a boolean: {value!r}")
