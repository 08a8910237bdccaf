"""Exception hierarchy shared across the package.

The CLI maps these onto distinct exit codes, so raising the right class
matters more than the message wording.
"""


class ConfigError(ValueError):
    """Bad configuration: unknown keys, out-of-domain parameters, bad flags."""


class InputError(ValueError):
    """Invalid input data: malformed files, broken matrix invariants."""


class EmptyNetworkError(InputError):
    """Preprocessing removed every taxon; no network is left to build."""


class NumericalError(RuntimeError):
    """A sampler or transform produced non-finite values."""
