import typing as t

import pydantic


class Event(pydantic.BaseModel):
    """Event is the base class for loop events. An event reports a stage
    that has finished. Multiple listeners can listen to an event. Events
    are journaled, so their fields must serialize to JSON."""
    model_config = pydantic.ConfigDict(frozen=True)

    def __repr__(self) -> str:
        return f'<{self.__class__.__name__}>'


class Command(pydantic.BaseModel):
    """Command is the base class for loop commands. A command asks for one
    stage of the closed loop to run now and returns its result, usually the
    next loop state."""
    model_config = pydantic.ConfigDict(arbitrary_types_allowed=True)

    def __repr__(self) -> str:
        return f'<{self.__class__.__name__}>'


Message = t.Union['Event', 'Command']
"""A message is either an event or a command."""
