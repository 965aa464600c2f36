"""Exception hierarchy shared by every engine component.

The CLI maps these onto stable exit codes: usage problems exit 1, data
errors exit 2, component failures exit 3.
"""


class EngineError(Exception):
    """Base class for all errors raised by this package."""


class UsageError(EngineError):
    """Bad command-line invocation (missing flags, unknown mode, ...)."""


# -- data errors (exit code 2) ------------------------------------------------

class DataError(EngineError):
    """Base class for malformed inputs and violated data contracts."""


class ParseError(DataError):
    """A file failed to parse; the message names the offending line or offset."""


class DimensionError(DataError):
    """Feature vectors with inconsistent lengths or mismatched shapes."""


class SpecError(DataError):
    """A split/config parameter violates its stated constraint."""


class StratificationError(DataError):
    """A stratified split cannot be honored for this dataset."""


class SeedError(DataError):
    """Invalid seed set for label propagation (empty, or a class without seeds)."""


# -- component failures (exit code 3) -----------------------------------------

class ComponentError(EngineError):
    """Base class for runtime failures inside a pipeline component."""


class DegenerateRowError(ComponentError):
    """A sample is at distance zero from every other sample."""


class DivergenceError(ComponentError):
    """An optimization produced a non-finite loss; message reports the iteration."""


class ExtractorError(ComponentError):
    """An external extractor process failed; carries its captured stderr."""


class ProtocolError(ExtractorError):
    """An external extractor violated the wire protocol."""
