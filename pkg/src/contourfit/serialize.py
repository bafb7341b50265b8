"""Deterministic text formatting shared by every CSV/JSON/SVG emitter."""

from __future__ import annotations

import math
from decimal import Decimal

# All emitted numbers carry at least 12 significant digits in plain decimal
# notation, so reruns are byte-identical, values round-trip exactly, and
# downstream parsers never see exponents.
_SIG_DIGITS = 12


def format_float(value: float) -> str:
    value = float(value)
    if math.isnan(value):
        return "nan"
    if math.isinf(value):
        return "inf" if value > 0 else "-inf"
    text = format(Decimal(repr(value)), "f")

    digits = text.lstrip("-").replace(".", "")
    significant = len(digits.lstrip("0"))
    missing = max(_SIG_DIGITS - significant, 0)
    if value == 0.0:
        text, missing = "0", _SIG_DIGITS
    if missing:
        if "." not in text:
            text += "."
        text += "0" * missing
    return text


def csv_text(header: str, rows) -> str:
    """Join a header and iterable of pre-formatted row strings with LF endings."""
    lines = [header]
    lines.extend(rows)
    return "\n".join(lines) + "\n"
