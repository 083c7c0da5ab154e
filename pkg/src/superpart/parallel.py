"""Thread-count policy shared by every parallel stage."""
import os

_override = None


def set_threads(n):
    global _override
    _override = None if n is None else max(1, int(n))


def thread_count():
    """Threads to use: explicit override, capped by ``SUPERPART_THREADS``, else CPU count."""
    n = _override if _override is not None else (os.cpu_count() or 1)
    cap = os.environ.get("SUPERPART_THREADS")
    if cap:
        try:
            n = min(n, max(1, int(cap)))
        except ValueError:
            pass
    return n
