"""Parser and formatter for operator-entered incident log blocks.

Incident text arrives as short free-form blocks typed by highway
operators, e.g.::

    Operator ID: Nick
    Cleared 1637: I-405 SB
    JS NE 8TH ACC BLK RL CCTV
    1623 - WSP, FIR ON SCENE

Every field is optional except the raw text itself.  Unrecognized
tokens are ignored rather than rejected: a garbled block parses to an
event of kind "other" with whatever fields could be salvaged.  Only a
fully blank input is an error.
"""

from __future__ import annotations

import datetime as dt
import json
import re
from dataclasses import dataclass, field, asdict
from importlib import resources


class IncidentParseError(ValueError):
    """Raised when incident text is blank or otherwise unusable."""


def _load_tokens() -> dict:
    ref = resources.files("roadcast").joinpath("data/incident_tokens.json")
    return json.loads(ref.read_text(encoding="utf-8"))


_TOKENS = _load_tokens()
KIND_CODES: dict[str, str] = _TOKENS["kind_codes"]
LANE_CODES: dict[str, str] = _TOKENS["lane_codes"]
RELATION_CODES: dict[str, str] = _TOKENS["relation_codes"]
RESPONDER_CODES: dict[str, str] = _TOKENS["responder_codes"]
DIRECTIONS: tuple[str, ...] = tuple(_TOKENS["directions"])
NOISE_CODES: frozenset[str] = frozenset(_TOKENS["noise_codes"])

_ROAD_RE = re.compile(r"\b(I|SR|US|HWY)\s*-?\s*(\d{1,3})\b", re.IGNORECASE)
_CLEARED_RE = re.compile(r"^Cleared\s+(\d{3,4})\s*:\s*(.*)$", re.IGNORECASE)
_OPERATOR_RE = re.compile(r"^Operator(?:\s+ID)?\s*:\s*(.+)$", re.IGNORECASE)
_REPORTED_RE = re.compile(r"^(\d{3,4})\s*-\s*(.*)$")


@dataclass
class IncidentEvent:
    """One parsed operator log block.

    All structured fields are best-effort; ``raw`` always preserves the
    original text.  ``kind`` is "accident" when an accident code was
    present, "blocking" when only a blockage code was, else "other".
    """

    raw: str
    kind: str = "other"
    operator: str | None = None
    road: str | None = None
    direction: str | None = None
    landmark: str | None = None
    lanes: list[str] = field(default_factory=list)
    responders: list[str] = field(default_factory=list)
    reported: dt.time | None = None
    cleared: dt.time | None = None

    def to_dict(self) -> dict:
        d = asdict(self)
        d["reported"] = self.reported.strftime("%H%M") if self.reported else None
        d["cleared"] = self.cleared.strftime("%H%M") if self.cleared else None
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "IncidentEvent":
        d = dict(d)
        for key in ("reported", "cleared"):
            if d.get(key) is not None:
                d[key] = _parse_hhmm(d[key])
        return cls(**d)


def _parse_hhmm(token: str) -> dt.time | None:
    digits = token.strip()
    if not digits.isdigit() or len(digits) not in (3, 4):
        return None
    digits = digits.zfill(4)
    hour, minute = int(digits[:2]), int(digits[2:])
    if hour > 23 or minute > 59:
        return None
    return dt.time(hour, minute)


def _find_road(text: str) -> str | None:
    m = _ROAD_RE.search(text)
    if m is None:
        return None
    return f"{m.group(1).upper()}-{m.group(2)}"


def _find_direction(tokens: list[str]) -> str | None:
    for tok in tokens:
        if tok.upper() in DIRECTIONS:
            return tok.upper()
    return None


def _scan_body(tokens: list[str], event: IncidentEvent) -> None:
    """Pull kind/lane/responder/landmark codes out of a token list."""
    saw_acc = False
    saw_blk = False
    i = 0
    while i < len(tokens):
        tok = tokens[i].upper().strip(",")
        if tok in KIND_CODES:
            saw_acc = saw_acc or KIND_CODES[tok] == "accident"
            saw_blk = saw_blk or KIND_CODES[tok] == "blocking"
        elif tok in LANE_CODES:
            if tok not in event.lanes:
                event.lanes.append(tok)
        elif tok in RESPONDER_CODES:
            if tok not in event.responders:
                event.responders.append(tok)
        elif tok in RELATION_CODES:
            # Landmark = everything up to the next recognized code.
            j = i + 1
            words: list[str] = []
            while j < len(tokens):
                nxt = tokens[j].upper().strip(",")
                if (
                    nxt in KIND_CODES
                    or nxt in LANE_CODES
                    or nxt in RESPONDER_CODES
                    or nxt in RELATION_CODES
                    or nxt in NOISE_CODES
                ):
                    break
                words.append(tokens[j].strip(","))
                j += 1
            if words and event.landmark is None:
                event.landmark = " ".join(words).upper()
            i = j
            continue
        i += 1
    if saw_acc:
        event.kind = "accident"
    elif saw_blk:
        event.kind = "blocking"


def parse_incident(text: str) -> IncidentEvent:
    """Parse one operator log block into an IncidentEvent.

    Raises IncidentParseError on blank input.  Never raises on merely
    garbled text: unknown tokens are skipped and missing fields stay
    None.
    """
    if text is None or not text.strip():
        raise IncidentParseError("blank incident text")
    event = IncidentEvent(raw=text)
    lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
    for line in lines:
        op = _OPERATOR_RE.match(line)
        if op:
            event.operator = op.group(1).strip()
            continue
        cl = _CLEARED_RE.match(line)
        if cl:
            event.cleared = _parse_hhmm(cl.group(1))
            rest = cl.group(2)
            if event.road is None:
                event.road = _find_road(rest)
            if event.direction is None:
                event.direction = _find_direction(rest.split())
            continue
        rp = _REPORTED_RE.match(line)
        if rp:
            t = _parse_hhmm(rp.group(1))
            if t is not None:
                event.reported = t
                _scan_body(rp.group(2).split(), event)
                continue
        _scan_body(line.split(), event)
        if event.road is None:
            event.road = _find_road(line)
        if event.direction is None:
            event.direction = _find_direction(line.split())
    return event


def format_incident(event: IncidentEvent) -> str:
    """Render an event back into operator log text.

    parse_incident(format_incident(e)) recovers every structured field
    of ``e`` (not ``raw``, which is replaced by the rendered text).
    """
    lines: list[str] = []
    if event.operator:
        lines.append(f"Operator ID: {event.operator}")
    head = []
    if event.road:
        head.append(event.road)
    if event.direction:
        head.append(event.direction)
    if event.cleared is not None:
        lines.append(f"Cleared {event.cleared.strftime('%H%M')}: {' '.join(head)}".rstrip())
    elif head:
        lines.append(" ".join(head))
    body: list[str] = []
    if event.landmark:
        body.append(f"JS {event.landmark}")
    if event.kind == "accident":
        body.append("ACC")
    if event.kind in ("accident", "blocking"):
        body.append("BLK")
    body.extend(event.lanes)
    if body:
        body.append("CCTV")
        lines.append(" ".join(body))
    if event.reported is not None:
        tail = f"{event.reported.strftime('%H%M')} -"
        if event.responders:
            tail += " " + ", ".join(event.responders)
        tail += " ON SCENE"
        lines.append(tail)
    elif event.responders:
        lines.append(", ".join(event.responders) + " ON SCENE")
    if not lines:
        lines.append(event.raw.strip() or "INCIDENT")
    return "\n".join(lines)


def split_blocks(text: str) -> list[str]:
    """Split a log file into incident blocks (separated by blank lines)."""
    blocks = re.split(r"\n\s*\n", text.strip())
    return [b for b in blocks if b.strip()]


def assign_dates(
    events: list[IncidentEvent], start: dt.datetime
) -> list[dt.datetime]:
    """Assign full timestamps to a time-ordered stream of events.

    Operator blocks carry only HHMM times, so dates are recovered by
    monotone progression: each event lands on the earliest date at or
    after the previous event whose clock time matches its reported
    (else cleared) time.  Events with no time reuse the previous
    timestamp.
    """
    out: list[dt.datetime] = []
    cursor = start
    for event in events:
        t = event.reported or event.cleared
        if t is None:
            out.append(cursor)
            continue
        stamp = cursor.replace(hour=t.hour, minute=t.minute, second=0, microsecond=0)
        while stamp < cursor:
            stamp += dt.timedelta(days=1)
        cursor = stamp
        out.append(stamp)
    return out
