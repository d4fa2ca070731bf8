"""Progress display for long sweeps and searches, on stderr."""

import sys
from typing import TextIO

# Graceful import - the live bar is only available when Rich is installed
try:
    from rich.console import Console
    from rich.progress import BarColumn, MofNCompleteColumn, Progress, TextColumn, TimeElapsedColumn

    HAS_RICH = True
except ImportError:
    HAS_RICH = False


class ProgressRenderer:
    """
    Turns runner events into a progress display.

    Uses a rich progress bar when rich is importable and `plain` is False,
    otherwise prints a short line every `every` events. Pass the instance
    itself as the runner's `on_progress` callback.
    """

    def __init__(self, stream: TextIO | None = None, plain: bool = False, every: int = 50):
        self._stream = stream or sys.stderr
        self._every = max(1, every)
        self._use_rich = HAS_RICH and not plain
        self._progress: "Progress | None" = None
        self._task = None
        self._done = 0
        self._total = 0

    def start(self, total: int, label: str = "checking") -> None:
        self._total = total
        self._done = 0
        if self._use_rich:
            self._progress = Progress(
                TextColumn("[bold]{task.description}"),
                BarColumn(),
                MofNCompleteColumn(),
                TimeElapsedColumn(),
                console=Console(file=self._stream),
                transient=True,
            )
            self._progress.start()
            self._task = self._progress.add_task(label, total=total or None)
        else:
            print(f"{label}: 0/{total}", file=self._stream)

    def advance(self, label: str = "checking") -> None:
        self._done += 1
        if self._progress is not None:
            self._progress.update(self._task, advance=1)
        elif self._done % self._every == 0 or self._done == self._total:
            print(f"{label}: {self._done}/{self._total}", file=self._stream)

    def stop(self) -> None:
        if self._progress is not None:
            self._progress.stop()
            self._progress = None

    def __call__(self, event: dict) -> None:
        kind = event.get("type", "")
        if kind == "sweep_start":
            self.start(event.get("total", 0))
        elif kind == "instance_done":
            self.advance()
        elif kind == "sweep_complete":
            self.stop()
        elif kind == "search_restart":
            if self._progress is None and self._total == 0:
                self.start(event.get("budget", 0), "searching")
            if self._progress is not None:
                self._progress.update(self._task, completed=event.get("evaluations", 0))
            else:
                print(
                    f"restart {event.get('restart')}: best violation {event.get('best_violation', 0.0):.3e} "
                    f"after {event.get('evaluations', 0)} evaluations",
                    file=self._stream,
                )
        elif kind == "search_complete":
            self.stop()
        elif kind == "regularize_row":
            print(
                f"{event.get('measure_id')} #{event.get('index')}: N={event.get('N')} "
                f"per copy {event.get('per_copy', 0.0):.9g}",
                file=self._stream,
            )
