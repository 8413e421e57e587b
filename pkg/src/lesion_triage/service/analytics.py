"""Submission analytics: usage distribution by country, age, symptoms, contact.

The summary mirrors the service's reporting table: an overall column plus one
column per top-5 country and an "other" bucket, with counts and column
percentages (1 decimal; "-" when a column is empty). Symptom percentages can
sum past 100 because the questionnaire is multi-select.
"""

from __future__ import annotations

from collections import Counter
from decimal import ROUND_HALF_UP, Decimal
from typing import Sequence

from ..errors import DataError

AGE_BANDS = ("18-30", "31-50", "over50")
SYMPTOMS = ("penile_pain", "penile_discharge", "pain_burning_urination", "none_other")
LAST_CONTACT = ("under1mo", "1to3mo", "over3mo", "never")

TOP_COUNTRIES = 5


class InvalidRangeError(DataError):
    pass


def _pct(count: int, total: int) -> str:
    """Column percentage at 1 decimal, half-up; '-' for an empty column."""
    if total == 0:
        return "-"
    value = Decimal(100 * count) / Decimal(total)
    return str(value.quantize(Decimal("0.1"), rounding=ROUND_HALF_UP))


def _column(questionnaires: Sequence[dict]) -> dict:
    total = len(questionnaires)
    ages = Counter(q["age_band"] for q in questionnaires)
    contact = Counter(q["last_contact"] for q in questionnaires)
    symptoms = Counter()
    for q in questionnaires:
        for s in set(q["symptoms"]):
            symptoms[s] += 1
    return {
        "total": total,
        "age_bands": {
            band: {"count": ages.get(band, 0), "pct": _pct(ages.get(band, 0), total)}
            for band in AGE_BANDS
        },
        "symptoms": {
            s: {"count": symptoms.get(s, 0), "pct": _pct(symptoms.get(s, 0), total)}
            for s in SYMPTOMS
        },
        "last_contact": {
            c: {"count": contact.get(c, 0), "pct": _pct(contact.get(c, 0), total)}
            for c in LAST_CONTACT
        },
    }


def summarize(submissions: Sequence[dict], start: str, end: str) -> dict:
    """Aggregate questionnaires submitted in [start, end] (ISO timestamps).

    ``submissions`` are dicts with ``created_at`` and ``questionnaire`` keys.
    """
    if start > end:
        raise InvalidRangeError(f"from {start!r} is after to {end!r}")
    window = [s for s in submissions if start <= s["created_at"] <= end]
    questionnaires = [s["questionnaire"] for s in window]
    total = len(questionnaires)

    by_country = Counter(q["country"] for q in questionnaires)
    top = [c for c, _ in sorted(by_country.items(), key=lambda kv: (-kv[1], kv[0]))[:TOP_COUNTRIES]]
    columns = {"overall": _column(questionnaires)}
    country_counts = []
    for code in top:
        qs = [q for q in questionnaires if q["country"] == code]
        columns[code] = _column(qs)
        country_counts.append({"country": code, "count": len(qs), "pct": _pct(len(qs), total)})
    other_qs = [q for q in questionnaires if q["country"] not in top]
    columns["other"] = _column(other_qs)
    country_counts.append(
        {"country": "other", "count": len(other_qs), "pct": _pct(len(other_qs), total)}
    )

    return {
        "from": start,
        "to": end,
        "total": total,
        "countries": country_counts,
        "columns": columns,
    }
