import os

import numba

# NUMBA_DISABLE_JIT=1 is honoured by numba itself; this only toggles on-disk caching.
_CACHE = os.environ.get("SLIMECURVE_NUMBA_CACHE", "1").strip().lower() not in {"0", "false", "no", "off"}

njit = numba.njit(cache=_CACHE)
