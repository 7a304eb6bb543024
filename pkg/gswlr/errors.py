class GswlrError(Exception):
    exit_code = 1


class InputError(GswlrError):
    exit_code = 2


class DomainError(InputError, ValueError):
    pass


class ConfigError(InputError):
    pass


class DataError(InputError):
    pass


class NoEventsError(InputError):
    pass


class BeyondFollowUpError(InputError):
    pass


class DesignError(InputError):
    pass


class StateError(GswlrError):
    exit_code = 3


class NumericalError(GswlrError):
    exit_code = 4


class DegenerateVarianceError(NumericalError):
    pass
