import logging


class InfoOnlyFilter(logging.Filter):
    """Filter INFO level logs only"""

    def filter(self, record):
        return record.levelno == logging.INFO


class CycleSampleFilter(logging.Filter):
    """Keep only every n-th per-cycle DEBUG record; other records pass through"""

    def __init__(self, every=10):
        super().__init__()
        self.every = max(int(every), 1)

    def filter(self, record):
        cycle = getattr(record, "cycle", None)
        if record.levelno > logging.DEBUG or cycle is None:
            return True
        return cycle % self.every == 0
