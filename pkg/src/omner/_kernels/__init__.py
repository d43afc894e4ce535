"""Kernel backend selection.

The compiled Cython extension `_fast` is preferred when built; the NumPy
fallback `_pure` is used otherwise. Set OMNER_BACKEND=pure or =fast to force
one (forcing `fast` raises if the extension is missing).
"""

import os

from . import _pure

_forced = os.environ.get("OMNER_BACKEND", "").lower()

if _forced == "pure":
    backend = _pure
else:
    try:
        from . import _fast as backend  # type: ignore[no-redef]
    except ImportError:
        if _forced == "fast":
            raise ImportError("OMNER_BACKEND=fast but the compiled extension is not built")
        backend = _pure

BACKEND_NAME = backend.NAME

lstm_forward = backend.lstm_forward
lstm_backward = backend.lstm_backward
crf_forward = backend.crf_forward
crf_backward = backend.crf_backward
crf_viterbi = backend.crf_viterbi
