"""Error taxonomy for the exporter."""


class ManifestError(ValueError):
    """The manifest file violates its contract (ids, texts, structure)."""


class EncoderError(RuntimeError):
    """The encoder backend cannot be loaded or failed on a record."""
