import abc
import typing as t

from genloop import message

MT = t.TypeVar('MT', bound=message.Message)
RT = t.TypeVar('RT')


class Handler(abc.ABC, t.Generic[MT, RT]):
    """A link in a chain of responsibility. A stage handler does its work
    in `handle` and passes the message on with `next`, so middleware
    chained behind it (logging, recording) sees every stage that ran.
    Errors travel the same chain through `error`."""

    def __init__(self):
        self._next: 'Handler | None' = None

    def chain(self, handler: 'Handler') -> 'Handler':
        """Put `handler` behind this one and return it, so
        `a.chain(b).chain(c)` builds a -> b -> c."""
        self._next = handler
        return handler

    def next(self, msg: MT, ex: Exception | None = None) -> RT | None:
        """Pass `msg` to the following handler: to its `error` when `ex` is
        given, to its `handle` otherwise. None at the end of the chain."""
        if self._next is None:
            return None
        if ex is not None:
            return self._next.error(msg, ex)
        return self._next.handle(msg)

    def handle(self, msg: MT) -> RT | None:
        return self.next(msg)

    def error(self, msg: MT, ex: Exception) -> None:
        """Called by the dispatcher when `handle` raised. The dispatcher
        re-raises commands afterwards; event errors end here."""
        self.next(msg, ex)


class EventStream(t.Protocol):
    """Anything handlers can push events to."""

    def push_event(self, event: message.Event) -> None:
        ...


class CommandHandler(Handler[message.Command, RT]):
    """Runs one command and returns its result, the next loop state for a
    stage. Events pushed meanwhile are delivered once it returned."""

    def __init__(self, stream: EventStream):
        super().__init__()
        self._stream = stream

    def push(self, event: message.Event) -> None:
        self._stream.push_event(event)


class EventHandler(Handler[message.Event, None]):
    """Reacts to an event. Event handlers return nothing and may push
    follow-up events."""

    def __init__(self, stream: EventStream):
        super().__init__()
        self._stream = stream

    def push(self, event: message.Event) -> None:
        self._stream.push_event(event)


class Logger(t.Protocol):
    """The part of `logging.Logger` the middleware needs."""

    def info(self, msg, *args, **kwargs) -> None:
        ...

    def error(self, msg, *args, **kwargs) -> None:
        ...


class LoggerMiddleware(Handler[message.Message, None]):
    """Logs every message passed to it and every error, then passes both
    on. Messages log through their short repr, never their payload."""

    def __init__(self, logger: Logger) -> None:
        super().__init__()
        self._logger = logger

    def handle(self, msg: message.Message) -> None:
        self._logger.info('handle %r', msg)
        self.next(msg)

    def error(self, msg: message.Message, ex: Exception) -> None:
        self._logger.error('%r failed: %s', msg, ex)
        self.next(msg, ex)
