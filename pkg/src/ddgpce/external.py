"""Batch protocol for external model executables.

The command is started once per batch.  It receives a CSV header
``x1,...,xN`` followed by one row per sample on standard input and must print
one decimal output per line, in input order, on standard output.
"""

from __future__ import annotations

import shlex
import subprocess
from dataclasses import dataclass

import numpy as np

from .errors import CountMismatchError, ExternalModelError


def _format_batch(x: np.ndarray) -> str:
    header = ",".join(f"x{i + 1}" for i in range(x.shape[1]))
    rows = (",".join(repr(float(v)) for v in row) for row in x)
    return "\n".join([header, *rows]) + "\n"


def _parse_output(text: str, expected: int) -> np.ndarray:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if len(lines) != expected:
        raise CountMismatchError(expected, len(lines))
    out = np.empty(expected)
    for n, ln in enumerate(lines, start=1):
        try:
            out[n - 1] = float(ln.strip())
        except ValueError:
            raise ExternalModelError(f"line {n}: cannot parse {ln.strip()!r} as a number", line=n) from None
        if not np.isfinite(out[n - 1]):
            raise ExternalModelError(f"line {n}: non-finite output {ln.strip()!r}", line=n)
    return out


@dataclass(frozen=True)
class ExternalModel:
    """Evaluator that runs ``command`` on each batch.

    ``batch_size`` splits large inputs into fixed shards, so the number of
    process launches depends only on the input count.
    """

    command: tuple[str, ...]
    timeout: float | None = None
    batch_size: int | None = None

    @classmethod
    def from_string(cls, command: str, timeout=None, batch_size=None) -> "ExternalModel":
        return cls(tuple(shlex.split(command)), timeout, batch_size)

    def _run(self, x: np.ndarray) -> np.ndarray:
        try:
            proc = subprocess.run(
                self.command, input=_format_batch(x), capture_output=True, text=True, timeout=self.timeout
            )
        except FileNotFoundError as exc:
            raise ExternalModelError(f"cannot start {self.command[0]!r}: {exc.strerror}") from exc
        except PermissionError as exc:
            raise ExternalModelError(f"cannot execute {self.command[0]!r}: {exc.strerror}") from exc
        except subprocess.TimeoutExpired:
            raise ExternalModelError(f"{self.command[0]!r} timed out after {self.timeout} s") from None
        if proc.returncode != 0:
            raise ExternalModelError(
                f"{self.command[0]!r} exited with code {proc.returncode}: {proc.stderr.strip()}",
                returncode=proc.returncode, stderr=proc.stderr,
            )
        return _parse_output(proc.stdout, x.shape[0])

    def __call__(self, x) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        step = self.batch_size or max(1, x.shape[0])
        parts = []
        for s in range(0, x.shape[0], step):
            try:
                parts.append(self._run(x[s : s + step]))
            except ExternalModelError as exc:
                if exc.line is not None:
                    exc.sample_index = s + exc.line - 1
                raise
        return np.concatenate(parts) if parts else np.empty(0)
