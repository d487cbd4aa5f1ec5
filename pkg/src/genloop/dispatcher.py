import typing as t

from genloop import errors
from genloop import handler
from genloop import message

CommandHandlerMap: t.TypeAlias = dict[
    type[message.Command], handler.CommandHandler]
"""Maps a command type to the handler that runs it."""


class CommandDispatcher:
    """Sends a command to its registered handler. A command without a
    handler cannot be dispatched."""

    @staticmethod
    def dispatch(
        handlers: CommandHandlerMap,
        command: message.Command
    ) -> t.Any:
        """Dispatch a command to its handler.

        Args:
            handlers: The command handler map.
            command: The command to dispatch.

        Raises:
            errors.HandlerNotFoundError: when no handler is registered.

        Returns:
            The result of the command handler.
        """
        _handler = handlers.get(type(command))
        if _handler is None:
            raise errors.HandlerNotFoundError(
                f'no handler for command {command!r}')
        try:
            return _handler.handle(command)
        except Exception as ex:
            _handler.error(command, ex)
            raise


class EventDispatcher:
    """Sends an event to every handler listening to its type. Events
    without listeners are dropped. A failing listener does not stop the
    others; its error chain sees the exception. Genloop errors are raised
    again once every listener ran, other exceptions end in the chain."""

    @staticmethod
    def dispatch(
        handlers: list[handler.EventHandler],
        event: message.Event
    ) -> None:
        """Dispatch an event to a list of event handlers.

        Args:
            handlers: The event handlers.
            event: The event to dispatch.

        Raises:
            errors.GenloopError: the first one a listener raised.
        """
        failure: errors.GenloopError | None = None
        for _handler in handlers:
            try:
                _handler.handle(event)
            except Exception as ex:
                _handler.error(event, ex)
                if failure is None and isinstance(ex, errors.GenloopError):
                    failure = ex
        if failure is not None:
            raise failure
