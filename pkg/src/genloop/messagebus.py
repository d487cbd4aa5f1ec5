import pathlib
import typing as t
from collections import defaultdict

from genloop import dispatcher
from genloop import errors
from genloop import handler
from genloop import iterator
from genloop import message


class MessageBus:
    """Runs loop stages. Every command type has exactly one handler, whose
    result `handle` returns; events pushed while it ran are delivered
    afterwards, in push order, to every handler listening to their type."""

    def __init__(
        self,
        command_dispatcher: dispatcher.CommandDispatcher,
        event_dispatcher: dispatcher.EventDispatcher,
        event_iterator: iterator.EventIterator
    ) -> None:
        self._command_dispatcher = command_dispatcher
        self._event_dispatcher = event_dispatcher
        self._event_iterator = event_iterator
        self._command_handlers: dispatcher.CommandHandlerMap = {}
        self._event_handlers: dict[
            type[message.Event],
            list[handler.EventHandler]
        ] = defaultdict(list)

    @property
    def events(self) -> iterator.EventIterator:
        """The stream handlers push their events to."""
        return self._event_iterator

    def register(
        self,
        key: type[message.Message],
        hdl: handler.Handler,
        middleware: handler.Handler | None = None,
    ) -> None:
        """Register a handler, optionally chained with a middleware.

        Args:
            key: The command or event type the handler runs for.
            hdl: A command handler or an event handler.
            middleware: Chained behind `hdl`; sees what `hdl` passes on.

        Raises:
            ValueError: when `hdl` is neither a command nor an event
                handler, or when `key` already has a command handler.
        """
        if isinstance(hdl, handler.CommandHandler):
            if key in self._command_handlers:
                raise ValueError(f'{key.__name__} already has a handler')
            self._command_handlers[key] = hdl
        elif isinstance(hdl, handler.EventHandler):
            self._event_handlers[key].append(hdl)
        else:
            raise ValueError('handler must be a CommandHandler '
                             'or EventHandler')
        if middleware is not None:
            hdl.chain(middleware)

    def handle(self, command: message.Command) -> t.Any:
        """Run a command, then deliver the events it raised. When the
        handler raises, its error chain runs and the exception propagates;
        pending events stay queued.

        Raises:
            errors.HandlerNotFoundError: when no handler is registered.
            errors.GenloopError: when an event listener raised one; every
                pending event was delivered first.
        """
        result = self._command_dispatcher.dispatch(
            self._command_handlers, command)
        self._deliver()
        return result

    def emit(self, event: message.Event) -> None:
        """Push an event and deliver everything pending."""
        self._event_iterator.push_event(event)
        self._deliver()

    def _deliver(self) -> None:
        failure: errors.GenloopError | None = None
        for event in self._event_iterator:
            try:
                self._event_dispatcher.dispatch(
                    self._event_handlers[type(event)], event)
            except errors.GenloopError as ex:
                failure = failure or ex
        if failure is not None:
            raise failure


def create_message_bus(
    journal: str | pathlib.Path | None = None,
) -> MessageBus:
    """A bus keeping its events in memory, or appending each of them to
    `journal` when given."""
    events = (iterator.InMemoryEventIterator() if journal is None
              else iterator.JournalEventIterator(journal))
    return MessageBus(
        dispatcher.CommandDispatcher(),
        dispatcher.EventDispatcher(),
        events,
    )
