"""Dead/birth run files.

A run file is plain text: ``#``-prefixed ``key=value`` header lines followed
by whitespace-separated numeric rows ``log_like_death log_like_birth
[insertion_index]``.  Rows hold every point of the run: the ``n_iter`` dead
points in death order, then the final live points.  On dead-point rows the
index column is the insertion index of the replacement drawn in that
iteration; final live rows carry ``-1``.  Floats are written with 17
significant digits so a read/write cycle is lossless.
"""

from dataclasses import dataclass, field
import io

import numpy as np

from .errors import MalformedRunError

FORMAT_NAME = "nsaudit-run"
FORMAT_VERSION = "1"
NO_INDEX = -1


@dataclass
class RunFile:
    header: dict
    death: np.ndarray
    birth: np.ndarray
    index: np.ndarray | None = None
    comments: list = field(default_factory=list)

    @property
    def n_live(self):
        try:
            return int(self.header["n_live"])
        except KeyError:
            raise MalformedRunError("run file header has no n_live") from None

    @property
    def n_iter(self):
        if "n_iter" in self.header:
            return int(self.header["n_iter"])
        return None

    def stored_indexes(self):
        """Recorded insertion indexes, or ``None`` when they must be rebuilt."""
        if self.index is None or self.n_iter is None:
            return None
        return self.index[: self.n_iter]


def format_float(x):
    return "%.17g" % x


def from_trace(trace, extra_header=None):
    """Build a :class:`RunFile` from an engine trace."""
    header = {"format": FORMAT_NAME, "version": FORMAT_VERSION}
    header["n_live"] = str(trace.settings.n_live)
    header["n_iter"] = str(trace.n_iter)
    header["terminated_by"] = trace.terminated_by
    if extra_header:
        header.update(extra_header)
    header["columns"] = "log_like_death log_like_birth insertion_index"
    death, birth = trace.all_points()
    index = np.concatenate([trace.insertion_indexes,
                            np.full(len(trace.final_live_points), NO_INDEX, dtype=int)])
    return RunFile(header, death, birth, index.astype(int))


def dumps(runfile):
    out = io.StringIO()
    for key, value in runfile.header.items():
        out.write(f"# {key}={value}\n")
    for line in runfile.comments:
        out.write(f"# {line}\n")
    if runfile.index is None:
        for d, b in zip(runfile.death.tolist(), runfile.birth.tolist()):
            out.write(f"{format_float(d)} {format_float(b)}\n")
    else:
        for d, b, i in zip(runfile.death.tolist(), runfile.birth.tolist(),
                           runfile.index.tolist()):
            out.write(f"{format_float(d)} {format_float(b)} {i}\n")
    return out.getvalue()


def write(path, runfile):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(dumps(runfile))


def loads(text):
    """Parse run-file text.

    Raises
    ------
    MalformedRunError
        On a row that is not two or three numeric columns, or when rows mix
        both widths.
    """
    header, comments = {}, []
    deaths, births, indexes = [], [], []
    width = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            body = line[1:].strip()
            key, sep, value = body.partition("=")
            if sep and key and " " not in key:
                header[key] = value
            else:
                comments.append(body)
            continue
        parts = line.split()
        if width is None:
            width = len(parts)
        if len(parts) not in (2, 3) or len(parts) != width:
            raise MalformedRunError(
                f"line {lineno}: expected {width if width in (2, 3) else '2 or 3'} columns, "
                f"got {len(parts)}", lineno)
        try:
            deaths.append(float(parts[0]))
            births.append(float(parts[1]))
            if width == 3:
                indexes.append(int(parts[2]))
        except ValueError:
            raise MalformedRunError(f"line {lineno}: non-numeric value in {line!r}",
                                    lineno) from None
    index = np.array(indexes, dtype=int) if width == 3 else None
    return RunFile(header, np.array(deaths, dtype=float), np.array(births, dtype=float),
                   index, comments)


def read(path):
    with open(path, encoding="utf-8") as fh:
        return loads(fh.read())
