"""Score ingestion: a MusicXML subset reader plus yulmyeong mapping.

The reader handles partwise MusicXML as produced by common notation tools:
``divisions``, ``note`` with ``pitch``/``rest``/``chord``/``grace``, ``alter``
and ``tie``.  Everything else, lyrics and ornaments included, is ignored.
"""

from __future__ import annotations

import csv
import io
import json
import re
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field, replace
from enum import Enum
from fractions import Fraction
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .errors import MappingError, ScoreParseError, ScoreStructureError

STEPS = "CDEFGAB"
STEP_SEMITONES = {"C": 0, "D": 2, "E": 4, "F": 5, "G": 7, "A": 9, "B": 11}
ACCIDENTALS = {-2: "bb", -1: "b", 0: "", 1: "#", 2: "##"}
# flat-preferring spelling of the twelve pitch classes
FLAT_SPELLING = [
    ("C", 0), ("D", -1), ("D", 0), ("E", -1), ("E", 0), ("F", 0),
    ("G", -1), ("G", 0), ("A", -1), ("A", 0), ("B", -1), ("B", 0),
]

_PITCH_RE = re.compile(r"^([A-G])(bb|b|##|#|)(-?\d+)$")


@dataclass(frozen=True)
class Pitch:
    step: str
    alter: int
    octave: int

    def __post_init__(self):
        if self.step not in STEP_SEMITONES:
            raise MappingError(f"invalid pitch step {self.step!r}")
        if not -2 <= self.alter <= 2:
            raise MappingError(f"alter {self.alter} outside [-2, 2]")
        if not 0 <= self.octave <= 9:
            raise MappingError(f"octave {self.octave} outside [0, 9]")

    def __str__(self) -> str:
        return f"{self.step}{ACCIDENTALS[self.alter]}{self.octave}"

    @classmethod
    def parse(cls, text: str) -> "Pitch":
        """Parse a name such as ``Eb4``, ``F#3`` or ``C5``."""
        m = _PITCH_RE.match(text.strip())
        if m is None:
            raise MappingError(f"cannot parse pitch name {text!r}")
        step, acc, octave = m.groups()
        alter = {v: k for k, v in ACCIDENTALS.items()}[acc]
        return cls(step, alter, int(octave))

    @property
    def midi(self) -> int:
        return 12 * (self.octave + 1) + STEP_SEMITONES[self.step] + self.alter

    @classmethod
    def from_midi(cls, number: int) -> "Pitch":
        step, alter = FLAT_SPELLING[number % 12]
        return cls(step, alter, number // 12 - 1)

    def shift_octaves(self, n: int) -> "Pitch":
        return replace(self, octave=self.octave + n)


class Instrument(str, Enum):
    GEOMUNGO = "geomungo"
    PIRI = "piri"
    GAYAGEUM = "gayageum"
    DAEGEUM = "daegeum"
    HAEGEUM = "haegeum"
    AJAENG = "ajaeng"
    VOICE = "voice"

    @classmethod
    def lookup(cls, name: str) -> "Instrument | None":
        """Find the instrument named somewhere inside ``name`` (case-insensitive)."""
        low = name.lower()
        for inst in cls:
            if inst.value in low:
                return inst
        return None


@dataclass(frozen=True)
class NoteEvent:
    pitch: Pitch
    duration: Fraction
    instrument: Instrument
    piece_id: str

    def __post_init__(self):
        if not isinstance(self.duration, Fraction):
            object.__setattr__(self, "duration", Fraction(self.duration))
        if self.duration <= 0:
            raise ValueError(f"duration must be positive, got {self.duration}")


# ---------------------------------------------------------------------------
# yulmyeong tables


@dataclass(frozen=True)
class YulmyeongTable:
    """Mapping from yulmyeong characters to chromatic offsets above the keynote.

    ``octave_markers`` maps a prefix string to an octave shift, so ``淸黃``
    reads as Hwang one octave up under the default table.
    """

    mapping: Mapping[str, int]
    keynote: Pitch = field(default_factory=lambda: Pitch("E", -1, 4))
    octave_markers: Mapping[str, int] = field(default_factory=dict)

    def __post_init__(self):
        if len(self.mapping) != 12:
            raise MappingError(f"yulmyeong table needs 12 symbols, got {len(self.mapping)}")
        if sorted(self.mapping.values()) != list(range(12)):
            raise MappingError("yulmyeong offsets must be a permutation of 0..11")
        if self.mapping.get("黃") != 0:
            raise MappingError("黃 (Hwang) must map to offset 0")

    @classmethod
    def from_dict(cls, data: Mapping) -> "YulmyeongTable":
        return cls(
            mapping={k: int(v) for k, v in data["mapping"].items()},
            keynote=Pitch.parse(data.get("keynote", "Eb4")),
            octave_markers={k: int(v) for k, v in data.get("octave_markers", {}).items()},
        )

    @classmethod
    def load(cls, path: str | Path) -> "YulmyeongTable":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    @classmethod
    def default(cls) -> "YulmyeongTable":
        text = resources.files("zmkit").joinpath("data/yulmyeong.json").read_text("utf-8")
        return cls.from_dict(json.loads(text))


def yulmyeong_to_pitch(symbol: str, table: YulmyeongTable | None = None) -> Pitch:
    """Translate a yulmyeong token (optionally prefixed by octave markers) to a Pitch."""
    table = table or YulmyeongTable.default()
    token = symbol.strip()
    if not token:
        raise MappingError("empty yulmyeong token")
    base = token[-1]
    if base not in table.mapping:
        raise MappingError(f"unknown yulmyeong symbol {base!r} in token {symbol!r}")
    prefix = token[:-1]
    shift = 0
    # greedy longest-marker-first so multi-character markers win over their pieces
    markers = sorted(table.octave_markers, key=len, reverse=True)
    while prefix:
        for mk in markers:
            if prefix.startswith(mk):
                shift += table.octave_markers[mk]
                prefix = prefix[len(mk):]
                break
        else:
            raise MappingError(f"unknown octave marker {prefix!r} in token {symbol!r}")
    return Pitch.from_midi(table.keynote.midi + table.mapping[base] + 12 * shift)


# ---------------------------------------------------------------------------
# normalization


DEFAULT_OCTAVE_SHIFT = {
    Instrument.DAEGEUM: -1,
    Instrument.GAYAGEUM: 1,
    Instrument.GEOMUNGO: 1,
    Instrument.AJAENG: 1,
    Instrument.PIRI: 0,
    Instrument.HAEGEUM: 0,
    Instrument.VOICE: 0,
}
ALLOWED_SCALES = (Fraction(1, 2), Fraction(1), Fraction(3, 2))


@dataclass(frozen=True)
class NormalizationPolicy:
    octave_shift: Mapping[Instrument, int] = field(default_factory=lambda: dict(DEFAULT_OCTAVE_SHIFT))
    duration_scale: Mapping[str, Fraction] = field(default_factory=dict)

    def __post_init__(self):
        for piece, factor in self.duration_scale.items():
            if Fraction(factor) not in ALLOWED_SCALES:
                raise ValueError(f"duration scale for {piece!r} must be 1/2, 1 or 3/2, got {factor}")

    def shift_for(self, instrument: Instrument) -> int:
        return self.octave_shift.get(instrument, 0)

    def scale_for(self, piece_id: str) -> Fraction:
        return Fraction(self.duration_scale.get(piece_id, 1))

    @classmethod
    def from_dict(cls, data: Mapping) -> "NormalizationPolicy":
        shifts = dict(DEFAULT_OCTAVE_SHIFT)
        for name, n in data.get("octave_shift", {}).items():
            shifts[Instrument(name)] = int(n)
        scales = {k: Fraction(str(v)) for k, v in data.get("duration_scale", {}).items()}
        return cls(octave_shift=shifts, duration_scale=scales)

    @classmethod
    def load(cls, path: str | Path) -> "NormalizationPolicy":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def normalize_events(events: Iterable[NoteEvent], policy: NormalizationPolicy | None = None) -> list[NoteEvent]:
    """Shift each pitch by its instrument's octave offset and scale durations per piece."""
    policy = policy or NormalizationPolicy()
    out = []
    for ev in events:
        out.append(
            replace(
                ev,
                pitch=ev.pitch.shift_octaves(policy.shift_for(ev.instrument)),
                duration=ev.duration * policy.scale_for(ev.piece_id),
            )
        )
    return out


# ---------------------------------------------------------------------------
# units


class UnitKind(str, Enum):
    PITCH = "pitch"
    DURATION = "duration"
    PAIR = "pair"


@dataclass(frozen=True)
class ZipfianUnit:
    pitch: Pitch | None = None
    duration: Fraction | None = None

    def __str__(self) -> str:
        parts = []
        if self.pitch is not None:
            parts.append(str(self.pitch))
        if self.duration is not None:
            parts.append(str(self.duration))
        return "|".join(parts)

    @classmethod
    def parse(cls, text: str) -> "ZipfianUnit":
        pitch = duration = None
        for part in text.split("|"):
            if _PITCH_RE.match(part):
                pitch = Pitch.parse(part)
            else:
                duration = Fraction(part)
        return cls(pitch, duration)


def build_units(events: Iterable[NoteEvent], kind: UnitKind | str = UnitKind.PAIR) -> list[ZipfianUnit]:
    kind = UnitKind(kind)
    if kind is UnitKind.PITCH:
        return [ZipfianUnit(pitch=ev.pitch) for ev in events]
    if kind is UnitKind.DURATION:
        return [ZipfianUnit(duration=ev.duration) for ev in events]
    return [ZipfianUnit(ev.pitch, ev.duration) for ev in events]


# ---------------------------------------------------------------------------
# MusicXML


def _local(tag: str) -> str:
    return tag.rsplit("}", 1)[-1]


def _child(elem: ET.Element, name: str) -> ET.Element | None:
    for c in elem:
        if _local(c.tag) == name:
            return c
    return None


def _children(elem: ET.Element, name: str) -> list[ET.Element]:
    return [c for c in elem if _local(c.tag) == name]


def _int_text(elem: ET.Element | None, what: str, measure: str) -> int:
    if elem is None or elem.text is None:
        raise ScoreStructureError(f"missing {what} in measure {measure}")
    try:
        return int(Fraction(elem.text.strip()))
    except ValueError:
        raise ScoreStructureError(f"non-numeric {what} {elem.text!r} in measure {measure}") from None


def _part_instruments(root: ET.Element) -> dict[str, Instrument | None]:
    found = {}
    part_list = _child(root, "part-list")
    if part_list is None:
        return found
    for sp in _children(part_list, "score-part"):
        names = [e.text or "" for e in sp.iter() if _local(e.tag) in ("part-name", "instrument-name", "part-abbreviation")]
        inst = None
        for n in names:
            inst = Instrument.lookup(n)
            if inst is not None:
                break
        found[sp.get("id", "")] = inst
    return found


def _title(root: ET.Element) -> str | None:
    for path in (("work", "work-title"), ("movement-title",)):
        elem = root
        for name in path:
            elem = _child(elem, name) if elem is not None else None
        if elem is not None and elem.text and elem.text.strip():
            return elem.text.strip()
    return None


def parse_musicxml(
    document: bytes | str,
    piece_id: str | None = None,
    instrument: Instrument | str | None = None,
) -> list[NoteEvent]:
    """Read pitched notes from a partwise MusicXML document in score order.

    Durations are ``duration / divisions`` quarter notes, kept as exact
    fractions.  Rests and grace notes are dropped, chord members become
    separate events, and notes joined by ``tie`` start/stop are merged into a
    single event with the summed duration.  ``instrument`` overrides the
    instrument otherwise read from each part's name; ``piece_id`` defaults to
    the work or movement title, then to ``"piece"``.
    """
    if isinstance(document, str):
        document = document.encode("utf-8")
    try:
        root = ET.fromstring(document)
    except ET.ParseError as exc:
        line, col = exc.position
        raise ScoreParseError(f"malformed XML: {exc}", line, col) from None
    if _local(root.tag) != "score-partwise":
        raise ScoreStructureError(f"expected score-partwise root, got {_local(root.tag)}")

    if piece_id is None:
        piece_id = _title(root) or "piece"
    override = Instrument(instrument) if instrument is not None else None
    part_inst = _part_instruments(root)
    events: list[NoteEvent] = []

    for part in _children(root, "part"):
        pid = part.get("id", "")
        inst = override or part_inst.get(pid)
        if inst is None:
            raise ScoreStructureError(f"cannot determine instrument for part {pid!r}")
        divisions: int | None = None
        open_ties: dict[tuple[str, Pitch], int] = {}
        last_duration: Fraction | None = None

        for measure in _children(part, "measure"):
            mnum = measure.get("number", "?")
            for elem in measure:
                tag = _local(elem.tag)
                if tag == "attributes":
                    div = _child(elem, "divisions")
                    if div is not None:
                        divisions = _int_text(div, "divisions", mnum)
                        if divisions <= 0:
                            raise ScoreStructureError(f"divisions must be positive in measure {mnum}")
                    continue
                if tag != "note":
                    continue
                if _child(elem, "grace") is not None or _child(elem, "cue") is not None:
                    continue
                is_chord = _child(elem, "chord") is not None
                pitch_el = _child(elem, "pitch")
                dur_el = _child(elem, "duration")
                if pitch_el is None:
                    # rest or unpitched: still sets the duration a following chord note might share
                    if dur_el is not None and divisions is not None:
                        last_duration = Fraction(_int_text(dur_el, "duration", mnum), divisions)
                    continue
                if divisions is None:
                    raise ScoreStructureError(f"note before any divisions declaration in measure {mnum}")
                if dur_el is not None:
                    duration = Fraction(_int_text(dur_el, "duration", mnum), divisions)
                elif is_chord and last_duration is not None:
                    duration = last_duration
                else:
                    raise ScoreStructureError(f"pitched note without duration in measure {mnum}")
                if not is_chord:
                    last_duration = duration

                step_el = _child(pitch_el, "step")
                if step_el is None or not (step_el.text or "").strip():
                    raise ScoreStructureError(f"pitch without step in measure {mnum}")
                alter_el = _child(pitch_el, "alter")
                alter_f = Fraction(alter_el.text.strip()) if alter_el is not None and alter_el.text else Fraction(0)
                if alter_f.denominator != 1:
                    raise ScoreStructureError(f"microtonal alter {alter_f} in measure {mnum}")
                octave = _int_text(_child(pitch_el, "octave"), "octave", mnum)
                try:
                    pitch = Pitch(step_el.text.strip(), int(alter_f), octave)
                except MappingError as exc:
                    raise ScoreStructureError(f"{exc} in measure {mnum}") from None

                if duration <= 0:
                    raise ScoreStructureError(f"non-positive duration in measure {mnum}")
                voice_el = _child(elem, "voice")
                voice = (voice_el.text or "1").strip() if voice_el is not None else "1"
                ties = {t.get("type") for t in _children(elem, "tie")}
                key = (voice, pitch)

                if "stop" in ties and key in open_ties:
                    idx = open_ties.pop(key)
                    prev = events[idx]
                    events[idx] = replace(prev, duration=prev.duration + duration)
                    if "start" in ties:
                        open_ties[key] = idx
                    continue
                events.append(NoteEvent(pitch, duration, inst, piece_id))
                if "start" in ties:
                    open_ties[key] = len(events) - 1
    return events


# ---------------------------------------------------------------------------
# event CSV

EVENT_HEADER = ["piece_id", "instrument", "pitch", "duration_num", "duration_den"]


def write_events_csv(events: Iterable[NoteEvent], fh: io.TextIOBase) -> None:
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(EVENT_HEADER)
    for ev in events:
        writer.writerow([ev.piece_id, ev.instrument.value, str(ev.pitch), ev.duration.numerator, ev.duration.denominator])


def events_to_csv(events: Iterable[NoteEvent]) -> str:
    buf = io.StringIO()
    write_events_csv(events, buf)
    return buf.getvalue()


def read_events_csv(fh: io.TextIOBase | str) -> list[NoteEvent]:
    if isinstance(fh, str):
        fh = io.StringIO(fh)
    reader = csv.DictReader(fh)
    if reader.fieldnames != EVENT_HEADER:
        raise ScoreStructureError(f"event CSV header must be {','.join(EVENT_HEADER)}")
    return [
        NoteEvent(
            Pitch.parse(row["pitch"]),
            Fraction(int(row["duration_num"]), int(row["duration_den"])),
            Instrument(row["instrument"]),
            row["piece_id"],
        )
        for row in reader
    ]


def parse_files(paths: Sequence[Path], instrument: Instrument | str | None = None) -> list[NoteEvent]:
    """Parse several MusicXML files; a file without a title uses its stem as piece id."""
    events = []
    for path in sorted(Path(p) for p in paths):
        data = path.read_bytes()
        try:
            title = _title(ET.fromstring(data))
        except ET.ParseError:
            title = None  # parse_musicxml reports the error with its position
        events.extend(parse_musicxml(data, piece_id=title or path.stem, instrument=instrument))
    return events
