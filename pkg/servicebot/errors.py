"""Exception hierarchy shared by the engine, the services and the commands."""


class ServiceBotError(Exception):
    """Base class for every error raised by servicebot."""

    def __init__(self, message, source=None, line=None, column=None):
        super().__init__(message)
        self.message = message
        self.source = source
        self.line = line
        self.column = column

    def with_source(self, source):
        """Attach the file the error came from and return self."""
        self.source = source
        return self

    def location(self):
        """Render ``path:line:column`` for whatever position info is known."""
        parts = [str(p) for p in (self.source, self.line, self.column) if p is not None]
        return ":".join(parts)

    def __str__(self):
        where = self.location()
        return f"{where}: {self.message}" if where else self.message


class TermSyntaxError(ServiceBotError):
    def __init__(self, message, line=None, column=None, expected=None, source=None):
        super().__init__(message, source=source, line=line, column=column)
        self.expected = frozenset(expected or ())


# Knowledge base

class KBError(ServiceBotError):
    pass


class HierarchyError(KBError):
    pass


class ClauseError(KBError):
    pass


class SameLevelConflict(KBError):
    pass


class UnknownSubject(KBError):
    pass


class UnknownClass(UnknownSubject):
    pass


class UnknownIndividual(UnknownSubject):
    pass


class UnknownTarget(KBError):
    pass


# SitLog

class SitLogError(ServiceBotError):
    pass


class ValidationError(SitLogError):
    pass


class UnknownVariable(SitLogError):
    pass


class UnknownFunction(SitLogError):
    pass


class SitLogTypeError(SitLogError):
    pass


class EvaluationError(SitLogError):
    pass


class NoMatch(SitLogError):
    """No arc expectation accepted the input of a situation."""

    def __init__(self, message, situation=None, input_term=None):
        super().__init__(message)
        self.situation = situation
        self.input_term = input_term


class ScriptExhausted(SitLogError):
    pass


# World

class WorldError(ServiceBotError):
    pass


# Inference

class InferenceError(ServiceBotError):
    pass


class UnknownCommand(InferenceError):
    pass


class NoUnseenShelves(InferenceError):
    pass


class BudgetTooSmall(InferenceError):
    pass


class NoPlan(InferenceError):
    pass


class UnknownActionKind(InferenceError):
    pass


class GiveUp(InferenceError):
    pass


# Preference flows

class FlowError(ServiceBotError):
    pass


class UnresolvableRequest(FlowError):
    pass


class NoReply(FlowError):
    pass
