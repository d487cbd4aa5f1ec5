import pytest

from genloop import errors
from genloop import handler
from genloop import iterator
from genloop import messagebus
from .fakes import FakeCommand
from .fakes import FakeCommandHandler
from .fakes import FakeEvent
from .fakes import FakeEventHandler
from .fakes import RecordingLogger


@pytest.fixture
def mbus():
    return messagebus.create_message_bus()


class TestMessageBusCommandHandler:

    def test_handler_not_found(self, mbus):
        _command = FakeCommand()
        with pytest.raises(errors.HandlerNotFoundError):
            mbus.handle(_command)
        assert _command.is_handled is False

    def test_handle_command_with_error(self, mbus):
        _ex = RuntimeError('boom')
        _handler = FakeCommandHandler(err=_ex)
        mbus.register(FakeCommand, _handler)

        _expected = FakeCommand()
        with pytest.raises(RuntimeError):
            mbus.handle(_expected)

        assert _expected.is_handled is False
        assert _handler.is_handled is False
        assert _handler.errors == [_ex]

    def test_error_reaches_the_middleware(self, mbus):
        _logger = RecordingLogger()
        _handler = FakeCommandHandler(err=RuntimeError('boom'))
        mbus.register(
            FakeCommand, _handler, handler.LoggerMiddleware(_logger))

        with pytest.raises(RuntimeError):
            mbus.handle(FakeCommand())

        assert _logger.errors == ['<FakeCommand> failed: boom']

    def test_middleware_sees_what_the_handler_passes_on(self, mbus):
        _logger = RecordingLogger()

        class PassingHandler(FakeCommandHandler):
            def handle(self, cmd):
                result = super().handle(cmd)
                self.next(cmd)
                return result

        mbus.register(
            FakeCommand, PassingHandler(), handler.LoggerMiddleware(_logger))
        mbus.handle(FakeCommand())

        assert _logger.infos == ['handle <FakeCommand>']

    def test_one_handler_per_command(self, mbus):
        _handler = FakeCommandHandler()
        mbus.register(FakeCommand, _handler)

        with pytest.raises(ValueError):
            mbus.register(FakeCommand, FakeCommandHandler())
        assert mbus._command_handlers == {FakeCommand: _handler}

    def test_register_rejects_plain_handlers(self, mbus):
        with pytest.raises(ValueError):
            mbus.register(FakeCommand, handler.LoggerMiddleware(
                RecordingLogger()))

    def test_handle_command_with_data(self, mbus):
        _handler = FakeCommandHandler()
        mbus.register(FakeCommand, _handler)

        _expected = FakeCommand(data='test')
        _result = mbus.handle(_expected)

        assert _expected.is_handled is True
        assert _handler.is_handled is True
        assert _result == _expected.data

    def test_handle_events_after_command(self, mbus):
        _event1 = FakeEvent(name='first')
        _event2 = FakeEvent(name='second')
        _event3 = FakeEvent(name='third')
        _handler1 = FakeCommandHandler(
            stream=mbus.events,
            events=[_event1, _event2])
        _handler2 = FakeEventHandler(
            stream=mbus.events,
            events=[_event3])
        mbus.register(FakeCommand, _handler1)
        mbus.register(FakeEvent, _handler2)

        _result = mbus.handle(FakeCommand(data='test'))

        # push order, including events pushed by event handlers
        assert _result == 'test'
        assert _handler2.seen == [_event1, _event2, _event3]


class TestMessageBusEventHandler:

    def test_event_without_listeners_is_dropped(self, mbus):
        mbus.emit(FakeEvent())
        assert list(mbus.events) == []

    def test_must_not_raise_if_handler_raises(self, mbus):
        _ex = RuntimeError()
        _failing = FakeEventHandler(err=_ex)
        _other = FakeEventHandler()
        mbus.register(FakeEvent, _failing)
        mbus.register(FakeEvent, _other)

        mbus.emit(FakeEvent())

        assert _failing.is_handled is False
        assert _failing.errors == [_ex]
        assert _other.is_handled is True

    def test_genloop_errors_reach_the_caller(self, mbus):
        _ex = errors.DataError('bad summary')
        _failing = FakeEventHandler(err=_ex)
        _other = FakeEventHandler()
        mbus.register(FakeEvent, _failing)
        mbus.register(FakeEvent, _other)

        with pytest.raises(errors.DataError):
            mbus.emit(FakeEvent())

        assert _failing.errors == [_ex]
        assert _other.is_handled is True

    def test_pending_events_are_delivered_before_raising(self, mbus):
        _late = FakeEvent(name='late')
        _failing = FakeEventHandler(err=errors.DataError('bad summary'))
        _handler = FakeCommandHandler(
            stream=mbus.events, events=[FakeEvent(name='early'), _late])
        _listener = FakeEventHandler()
        mbus.register(FakeCommand, _handler)
        mbus.register(FakeEvent, _failing)
        mbus.register(FakeEvent, _listener)

        with pytest.raises(errors.DataError):
            mbus.handle(FakeCommand())

        assert _listener.seen[-1] == _late
        assert list(mbus.events) == []

    def test_every_listener_sees_the_event(self, mbus):
        _handler1 = FakeEventHandler()
        _handler2 = FakeEventHandler()
        mbus.register(FakeEvent, _handler1)
        mbus.register(FakeEvent, _handler2)

        _expected = FakeEvent()
        mbus.emit(_expected)

        assert _handler1.seen == [_expected]
        assert _handler2.seen == [_expected]

    def test_handle_events_after_event(self, mbus):
        _event1 = FakeEvent(name='first')
        _event2 = FakeEvent(name='second')
        _handler1 = FakeEventHandler(
            stream=mbus.events,
            events=[_event1, _event2])
        mbus.register(FakeEvent, _handler1)

        _expected = FakeEvent()
        mbus.emit(_expected)

        assert _handler1.seen == [_expected, _event1, _event2]


class TestJournalMessageBus:

    def test_events_are_journaled(self, tmp_path):
        _path = tmp_path / 'events.jsonl'
        mbus = messagebus.create_message_bus(_path)
        _handler = FakeCommandHandler(
            stream=mbus.events, events=[FakeEvent(name='done')])
        mbus.register(FakeCommand, _handler)

        mbus.handle(FakeCommand())
        mbus.emit(FakeEvent(name='extra'))

        entries = iterator.read_journal(_path)
        assert [e['type'] for e in entries] == ['FakeEvent', 'FakeEvent']
        assert [e['data']['name'] for e in entries] == ['done', 'extra']

    def test_in_memory_bus_writes_nothing(self, tmp_path):
        mbus = messagebus.create_message_bus()
        mbus.register(FakeEvent, FakeEventHandler())
        mbus.emit(FakeEvent())
        assert list(tmp_path.iterdir()) == []
