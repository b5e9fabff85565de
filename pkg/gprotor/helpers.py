"""Helper functions for gprotor.

The converters read configuration attributes and environment variables: they strip
surrounding whitespace and return None (or the given default) for anything unreadable."""
import math
from typing import List

import numpy as np

TRUE_WORDS = ("yes", "true", "on", "1")
FALSE_WORDS = ("no", "false", "off", "0")


def int_or_none(value) -> int | None:
    """An integer from value; integral floats such as '2e3' or '4.0' count, fractions do not."""
    if value is None or isinstance(value, bool):
        return None
    text = str(value).strip()
    try:
        return int(text)
    except ValueError:
        pass
    number = float_or_none(text)
    if number is None or not number.is_integer():
        return None
    return int(number)


def int_or_default(value, default=0) -> int:
    parsed = int_or_none(value)
    return default if parsed is None else parsed


def float_or_none(value) -> float | None:
    """A finite float from value, else None."""
    if value is None or isinstance(value, bool):
        return None
    try:
        number = float(str(value).strip())
    except ValueError:
        return None
    return number if math.isfinite(number) else None


def str_or_default(value, default) -> str:
    """str(value) without surrounding whitespace, or default when that leaves nothing."""
    if value is None:
        return default
    return str(value).strip() or default


def bool_or_default(value, default=False) -> bool:
    """Booleans pass through; yes/true/on/1 and no/false/off/0 are read in any case."""
    if isinstance(value, bool):
        return value
    if value is None:
        return default
    word = str(value).strip().lower()
    if word in TRUE_WORDS:
        return True
    if word in FALSE_WORDS:
        return False
    return default


def positive_part(x: float) -> float:
    """The positive part [x]_+ = max(x, 0)."""
    return max(x, 0.0)


def parse_range(text: str) -> List[float]:
    """Parse a parameter range.

    Accepted forms:
        '0,1,10,100'          explicit list
        'lin:0:2:5'           5 linearly spaced values from 0 to 2 inclusive
        'log:0.1:100:4'       4 logarithmically spaced values from 0.1 to 100 inclusive
    """
    text = text.strip()
    if not text:
        raise ValueError("Empty parameter range")
    if text.startswith(("lin:", "log:")):
        parts = text.split(":")
        if len(parts) != 4:
            raise ValueError(f"Range {text} must look like kind:start:stop:count")
        kind, start, stop, count = parts
        start, stop, count = float(start), float(stop), int(count)
        if count < 1:
            raise ValueError(f"Range {text} has no points")
        if kind == "lin":
            return [float(v) for v in np.linspace(start, stop, count)]
        if start <= 0 or stop <= 0:
            raise ValueError(f"Logarithmic range {text} needs positive end points")
        return [float(v) for v in np.geomspace(start, stop, count)]
    values = []
    for entry in text.split(","):
        value = float_or_none(entry.strip())
        if value is None or math.isnan(value):
            raise ValueError(f"Could not read '{entry}' in parameter range {text}")
        values.append(value)
    return values


def parse_int_list(text: str) -> List[int]:
    """Parse '0,1,2' or '0-4' (inclusive) into a list of integers."""
    text = text.strip()
    if "-" in text and "," not in text:
        low, high = text.split("-", 1)
        low, high = int_or_none(low), int_or_none(high)
        if low is None or high is None or high < low:
            raise ValueError(f"Could not read integer range {text}")
        return list(range(low, high + 1))
    values = [int_or_none(entry.strip()) for entry in text.split(",")]
    if any(v is None for v in values):
        raise ValueError(f"Could not read integer list {text}")
    return values


def parse_comma_equals_str_into_dict(values: str, output: dict):
    """Consumes a string in the format '0=0.5,2=0.25' and inserts integer keys with float values
    into the provided dictionary."""
    if values is not None and len(values) > 0:
        for entry in values.split(","):
            info = entry.split("=")
            key = int_or_none(info[0].strip())
            if key is not None and len(info) == 2:
                value = float_or_none(info[1].strip())
                if value is not None:
                    output[key] = value
