"""Drives the closed loop: every stage of an iteration is a command sent
through the message bus, every finished iteration is committed to the run
directory, and an interrupted run resumes from its last commit."""
import logging
import pathlib

from genloop import config as config_
from genloop import handler
from genloop import messagebus
from genloop.loop import commands
from genloop.loop import handlers
from genloop.loop import state as state_
from genloop.loop import store as store_

logger = logging.getLogger(__name__)


class ProgressLogger(handler.EventHandler):
    """Logs committed iterations."""

    def handle(self, event: commands.IterationCommitted) -> None:
        logger.info('iteration %d: |D_gen|=%d accuracy=%.4f',
                    event.iteration, event.dgen_size, event.accuracy)
        self.next(event)


def create_loop_bus(
    context: state_.LoopContext,
    journal: str | pathlib.Path | None = None,
) -> messagebus.MessageBus:
    """A bus with every stage handler registered behind a logging
    middleware. With `journal` every event is appended to that file."""
    bus = messagebus.create_message_bus(journal)
    middleware_logger = logging.getLogger('genloop.loop.stages')
    for command, handler_cls in handlers.HANDLERS.items():
        bus.register(
            command,
            handler_cls(bus.events, context),
            handler.LoggerMiddleware(middleware_logger))
    bus.register(
        commands.StageCompleted,
        handlers.SummaryRecorder(bus.events, context))
    bus.register(
        commands.IterationCommitted, ProgressLogger(bus.events))
    return bus


def loop_iteration(
    state: state_.LoopState,
    context: state_.LoopContext,
    bus: messagebus.MessageBus | None = None,
) -> state_.LoopState:
    """Run iteration t + 1 from `state`, stage by stage.

    `state` is never modified. When a stage raises, the exception
    propagates and `state` stays the last good state.
    """
    bus = bus or create_loop_bus(context)
    iteration = state.iteration + 1
    context.summaries.pop(iteration, None)
    current = state.advance(d_cand=(), d_high=(), d_pref=())
    for command in commands.PIPELINE:
        current = bus.handle(command(state=current, iteration=iteration))
    return current


def resume_state(
    store: store_.RunStore,
    context: state_.LoopContext,
) -> state_.LoopState:
    """The latest committed state, or a freshly committed iteration 0."""
    latest = store.latest()
    if latest is not None:
        logger.info('resuming %s from iteration %d', store.root, latest)
        return store.load(latest)
    initial = state_.initial_state(context)
    store.commit(initial)
    return initial


def run_loop(
    config: config_.LoopConfig,
    out: str | pathlib.Path | None = None,
) -> state_.LoopState:
    """Run `config.iterations` iterations.

    With `out` the run lives in `<out>/<config.name>`: iterations already
    committed there are not repeated, each new one is committed as it
    finishes and all events are journaled.

    Raises:
        errors.ConfigError: when `out` holds a run of another
            configuration.
        errors.IntegrityError: when a committed artifact was altered.
    """
    context = state_.LoopContext(config)
    if out is None:
        bus = create_loop_bus(context)
        state = state_.initial_state(context)
        for _ in range(config.iterations):
            state = loop_iteration(state, context, bus)
        return state
    store = store_.RunStore(out, config)
    store.open()
    bus = create_loop_bus(context, store.journal)
    state = resume_state(store, context)
    while state.iteration < config.iterations:
        try:
            following = loop_iteration(state, context, bus)
            directory = store.commit(following)
        except Exception:
            store.discard(state.iteration + 1)
            raise
        bus.emit(commands.IterationCommitted(
            iteration=following.iteration,
            dgen_size=len(following.d_gen),
            accuracy=following.history[-1].accuracy,
            directory=str(directory),
        ))
        state = following
    return state
