import abc
import json
import pathlib
import typing as t

from genloop import errors
from genloop import message


class EventIterator(abc.ABC, t.Iterable[message.Event]):
    """Reads pending events from a stream. Derived classes connect the
    stream to an external sink by implementing `_read_events` and
    `_write_event`. Iterating drains the pending events in push order."""

    def __init__(self):
        self._events: list[message.Event] = []

    def __iter__(self) -> 'EventIterator':
        return self

    def __next__(self) -> message.Event:
        self._events.extend(self._read_events())
        if not self._events:
            raise StopIteration
        return self._events.pop(0)

    def push_event(self, event: message.Event) -> None:
        """Push an event to the stream."""
        self._write_event(event)
        self._events.append(event)

    @abc.abstractmethod
    def _read_events(self) -> t.Sequence[message.Event]:
        """Events arriving from outside. Each event shall only be returned
        once; the sequence is empty when nothing is available."""
        raise NotImplementedError

    @abc.abstractmethod
    def _write_event(self, event: message.Event) -> None:
        """Forward a pushed event to the external sink."""
        raise NotImplementedError


class InMemoryEventIterator(EventIterator):
    """Keeps events in memory only. They are lost when the process ends."""

    def _read_events(self) -> t.Sequence[message.Event]:
        return []

    def _write_event(self, event: message.Event) -> None:
        pass


class JournalEventIterator(EventIterator):
    """Appends every pushed event as one JSON line to a journal file, the
    audit trail of a run directory."""

    def __init__(self, path: str | pathlib.Path):
        super().__init__()
        self._path = pathlib.Path(path)
        self._path.parent.mkdir(parents=True, exist_ok=True)

    @property
    def path(self) -> pathlib.Path:
        return self._path

    def _read_events(self) -> t.Sequence[message.Event]:
        return []

    def _write_event(self, event: message.Event) -> None:
        line = json.dumps({
            'type': event.__class__.__name__,
            'data': event.model_dump(mode='json'),
        }, sort_keys=True)
        with self._path.open('a', encoding='utf-8') as journal:
            journal.write(line + '\n')


def read_journal(path: str | pathlib.Path) -> list[dict[str, t.Any]]:
    """Parse a journal into `{'type': ..., 'data': ...}` entries.

    Raises:
        errors.DataError: when the journal cannot be read or parsed.
    """
    try:
        lines = pathlib.Path(path).read_text(encoding='utf-8').splitlines()
        return [json.loads(line) for line in lines if line.strip()]
    except (OSError, json.JSONDecodeError) as ex:
        raise errors.DataError(f'cannot read journal {path}: {ex}') from ex
