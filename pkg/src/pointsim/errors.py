"""Exception hierarchy shared across the package."""


class PointSimError(Exception):
    pass


class InvalidGroup(PointSimError, ValueError):
    pass


# fid
class InvalidParams(PointSimError, ValueError):
    pass


class UnknownLink(PointSimError, KeyError):
    pass


class WidthMismatch(PointSimError, ValueError):
    pass


# pce
class NoPath(PointSimError):
    def __init__(self, src, dst):
        super().__init__(f"no path from node {src} to node {dst}")
        self.src = src
        self.dst = dst


# igmp
class InvalidMessage(PointSimError, ValueError):
    pass


class DecodeError(PointSimError, ValueError):
    pass


class BadLength(DecodeError):
    pass


class BadChecksum(DecodeError):
    pass


class UnknownType(DecodeError):
    pass


class BadGroup(DecodeError):
    pass


# nap
class UnconfiguredGroup(PointSimError):
    pass


# scenario / cli
class InvalidScenario(PointSimError):
    pass


class ParseError(InvalidScenario):
    def __init__(self, message, line=None, column=None):
        where = f" (line {line}, column {column})" if line is not None else ""
        super().__init__(message + where)
        self.line = line
        self.column = column


class ValidationError(InvalidScenario):
    pass
