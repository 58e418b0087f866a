"""Line-oriented key-value reports with embedded interval tables.

Example::

    tool = quanterr 0.1.0
    command = verify
    verdict = Proved
    stage = DRA
    value.target = 0
    timing.dra = 0.0012
    table delta
     2 0 -0.24459375 0.117625
    end

Scalar values are typed by their text: integers, then floats, then strings.
Floats are written with ``repr`` so parsing restores them exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from . import __version__

VERDICTS = ("Proved", "Falsified", "Unknown", "Error", "")
TOOL = "quanterr"


def _scalar(text: str):
    for conv in (int, float):
        try:
            return conv(text)
        except ValueError:
            pass
    return text


def _fmt(v) -> str:
    if isinstance(v, bool):
        return str(int(v))
    if isinstance(v, float):
        return repr(v)
    s = str(v)
    if "\n" in s:
        raise ValueError("report values must be single-line")
    return s


@dataclass
class Report:
    """Outcome of one command.

    ``tables`` maps a name to rows (layer, neuron, lb, ub); ``values`` holds
    further scalars; ``witness`` is the falsifying input when there is one.
    """

    command: str
    verdict: str = ""
    stage: str = ""
    detail: str = ""
    witness: tuple | None = None
    values: dict = field(default_factory=dict)
    timings: dict = field(default_factory=dict)
    tables: dict = field(default_factory=dict)
    version: str = __version__

    def __post_init__(self):
        if self.verdict not in VERDICTS:
            raise ValueError(f"unknown verdict {self.verdict!r}")

    def add_table(self, name: str, boxes: list, start: int = 0) -> None:
        """Rows from per-layer boxes; ``boxes[i]`` is layer ``start + i`` (None entries skipped)."""
        rows = []
        for i, b in enumerate(boxes):
            if b is None:
                continue
            for j in range(len(b)):
                rows.append((start + i, j, float(b.lo[j]), float(b.hi[j])))
        self.tables[name] = rows

    def to_text(self) -> str:
        out = [f"tool = {TOOL} {self.version}", f"command = {self.command}"]
        if self.verdict:
            out.append(f"verdict = {self.verdict}")
        if self.stage:
            out.append(f"stage = {self.stage}")
        if self.detail:
            out.append(f"detail = {_fmt(self.detail)}")
        if self.witness is not None:
            out.append("witness = " + " ".join(str(int(v)) for v in self.witness))
        for k, v in self.values.items():
            out.append(f"value.{k} = {_fmt(v)}")
        for k, v in self.timings.items():
            out.append(f"timing.{k} = {float(v)!r}")
        for name, rows in self.tables.items():
            out.append(f"table {name}")
            out.extend(f" {l} {j} {lo!r} {hi!r}" for l, j, lo, hi in rows)
            out.append("end")
        return "\n".join(out) + "\n"

    @classmethod
    def parse(cls, text: str) -> "Report":
        r = cls(command="")
        table = None
        for raw in text.splitlines():
            line = raw.rstrip("\n")
            if not line.strip():
                continue
            if table is not None:
                if line.strip() == "end":
                    table = None
                    continue
                l, j, lo, hi = line.split()
                r.tables[table].append((int(l), int(j), float(lo), float(hi)))
                continue
            if line.startswith("table "):
                table = line[6:].strip()
                r.tables[table] = []
                continue
            key, sep, val = line.partition(" = ")
            if not sep:
                key, val = line.rstrip(" =").rstrip(), ""
            if key == "tool":
                r.version = val.split()[-1]
            elif key in ("command", "verdict", "stage", "detail"):
                setattr(r, key, val)
            elif key == "witness":
                r.witness = tuple(int(v) for v in val.split())
            elif key.startswith("value."):
                r.values[key[6:]] = _scalar(val)
            elif key.startswith("timing."):
                r.timings[key[7:]] = float(val)
            else:
                raise ValueError(f"unknown report line {line!r}")
        if table is not None:
            raise ValueError(f"unterminated table {table!r}")
        if r.verdict not in VERDICTS:
            raise ValueError(f"unknown verdict {r.verdict!r}")
        return r
