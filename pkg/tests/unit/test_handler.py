import pytest

from genloop import LoggerMiddleware
from .fakes import FakeCommand
from .fakes import FakeCommandHandler
from .fakes import FakeEvent
from .fakes import FakeEventHandler
from .fakes import RecordingLogger


class TestEventHandler:

    def test_single_handler_must_return_ok(self):
        _handler = FakeEventHandler()
        _event = FakeEvent()

        _handler.handle(_event)

        assert _handler.is_handled is True
        assert _handler.seen == [_event]

    def test_must_handle_multiple_handlers(self):
        _handler1 = FakeEventHandler()
        _handler2 = FakeEventHandler()
        _handler3 = FakeEventHandler()
        _event = FakeEvent()

        _handler = _handler1 \
            .chain(_handler2) \
            .chain(_handler3)
        _handler1.handle(_event)

        assert _handler1.is_handled is True
        assert _handler2.is_handled is True
        assert _handler3.is_handled is True
        assert _handler is _handler3

    def test_must_handle_error(self):
        _handler1 = FakeEventHandler()
        _handler2 = FakeEventHandler(err=RuntimeError())
        _handler3 = FakeEventHandler()
        _event = FakeEvent()

        _handler1.chain(_handler2).chain(_handler3)
        with pytest.raises(RuntimeError):
            _handler1.handle(_event)

        assert _handler1.is_handled is True
        assert _handler2.is_handled is False
        assert _handler3.is_handled is False

    def test_error_travels_down_the_chain(self):
        _handler1 = FakeEventHandler()
        _handler2 = FakeEventHandler()
        _ex = ValueError('boom')

        _handler1.chain(_handler2)
        _handler1.error(FakeEvent(), _ex)

        assert _handler1.errors == [_ex]
        assert _handler2.errors == [_ex]


class TestCommandHandler:

    def test_handler_must_return_none(self):
        _handler = FakeCommandHandler()
        _command = FakeCommand()

        result = _handler.handle(_command)

        assert result is None
        assert _handler.is_handled is True
        assert _command.is_handled is True

    def test_handler_must_return_data(self):
        _handler = FakeCommandHandler()
        _command = FakeCommand(data='test')

        result = _handler.handle(_command)

        assert result == _command.data
        assert _handler.is_handled is True
        assert _command.is_handled is True

    def test_must_handle_error(self):
        _handler = FakeCommandHandler(err=RuntimeError())
        _command = FakeCommand()

        with pytest.raises(RuntimeError):
            _handler.handle(_command)

        assert _handler.is_handled is False
        assert _command.is_handled is False

    def test_can_chain_handler(self):
        _logger = RecordingLogger()
        _command = FakeCommand()

        _handler = LoggerMiddleware(_logger)
        _handler.chain(FakeCommandHandler())
        _handler.handle(_command)

        assert _command.is_handled is True
        assert _command.data is None
        assert _logger.infos == ['handle <FakeCommand>']


class TestLoggerMiddleware:

    def test_logs_errors_and_passes_them_on(self):
        _logger = RecordingLogger()
        _middleware = LoggerMiddleware(_logger)
        _next = FakeCommandHandler()
        _middleware.chain(_next)
        _ex = RuntimeError('stage failed')

        _middleware.error(FakeCommand(), _ex)

        assert _logger.errors == ['<FakeCommand> failed: stage failed']
        assert _next.errors == [_ex]

    def test_logs_events(self):
        _logger = RecordingLogger()
        LoggerMiddleware(_logger).handle(FakeEvent())

        assert _logger.infos == ['handle <FakeEvent>']
