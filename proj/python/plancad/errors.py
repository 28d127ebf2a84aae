class PlancadError(Exception):
    """Raised for library errors; kind is the stable error name."""

    def __init__(self, kind, message):
        super().__init__(message)
        self.kind = kind
