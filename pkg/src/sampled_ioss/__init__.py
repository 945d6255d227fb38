"""Sample-based incremental input/output-to-state stability: checks, search and certificate synthesis."""

__version__ = "0.1.0"

from . import certify, compfn, sampling, synth, sysmodel  # noqa: E402
from .falsify import falsify  # noqa: E402

__all__ = ["certify", "compfn", "sampling", "synth", "sysmodel", "falsify", "__version__"]
