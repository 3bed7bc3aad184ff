"""Exact rational parsing and canonical text forms."""

from __future__ import annotations

from fractions import Fraction


def parse_rational(text: str | int | Fraction) -> Fraction:
    """Parse ``p/q``, an integer or a decimal string exactly.

    Decimal input never passes through binary floating point, so
    ``"0.00858"`` becomes ``429/50000``.
    """
    if isinstance(text, Fraction):
        return text
    if isinstance(text, int):
        return Fraction(text)
    if isinstance(text, float):
        raise TypeError("floats are not accepted; pass a string")
    try:
        return Fraction(str(text).strip())
    except (ValueError, ZeroDivisionError) as exc:
        raise ValueError(f"not a rational number: {text!r}") from exc


def fmt(x: Fraction | int) -> str:
    """Canonical ``p/q`` form used in every serialized output."""
    x = Fraction(x)
    return f"{x.numerator}/{x.denominator}"


def fmt_opt(x: Fraction | None) -> str | None:
    return None if x is None else fmt(x)
