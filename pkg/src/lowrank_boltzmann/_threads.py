import os

THREADS_ENV = "LOWRANK_BOLTZMANN_THREADS"


def fft_workers() -> int:
    """Worker count for batched FFTs, from ``LOWRANK_BOLTZMANN_THREADS`` (default 1)."""
    try:
        return max(1, int(os.environ.get(THREADS_ENV, "1")))
    except ValueError:
        return 1
