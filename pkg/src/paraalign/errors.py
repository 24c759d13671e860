"""Exception roots shared across the toolchain.

``InputError`` marks bad configs, malformed inputs, and violated
preconditions (CLI exit code 1). ``RuntimeFailure`` marks transport, IO,
and endpoint trouble (CLI exit code 2).
"""


class ParaAlignError(Exception):
    pass


class InputError(ParaAlignError):
    pass


class RuntimeFailure(ParaAlignError):
    pass
