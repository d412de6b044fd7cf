"""Compare what two reading communities read: matching, rank drift, co-readership
networks and core-periphery structure."""

from .corpus import Corpus, EventKind, InteractionEvent, ItemRecord, ReaderRecord, load_corpus
from .errors import ConfigError, CoreadError, DataError, NumericalError, StageError
from .pipeline import RunConfig, load_config, run_pipeline

__version__ = "0.1.0"

__all__ = [
    "Corpus", "EventKind", "InteractionEvent", "ItemRecord", "ReaderRecord", "load_corpus",
    "ConfigError", "CoreadError", "DataError", "NumericalError", "StageError",
    "RunConfig", "load_config", "run_pipeline", "__version__",
]
