"""Synthetic token corpus of recall and copy episodes.

A recall episode is a run of filler letters containing one needle
``k1 k2 v1 v2`` and ends with ``<eot> k1 k2 v1 v2`` and a newline. Needle
letters are excluded from that episode's filler, mirroring the retrieval probe
in :mod:`endprompt_lab.evaluate`, which also uses ``<eot>`` as its query mark.
A copy episode ends with ``<eot>`` and a verbatim repeat of one span of its
filler. Both reward copying what followed an earlier occurrence of the current
token, at whatever distance the episode happened to place it.
"""

from __future__ import annotations

import numpy as np

from .data import EOT_ID

LETTERS = tuple(range(97, 113))  # 'a'..'p'
RECALL_MARK = EOT_ID
NEWLINE = ord("\n")


def episode(rng: np.random.Generator, length: int, key_len: int = 2, value_len: int = 2, letters=LETTERS) -> np.ndarray:
    letters = np.asarray(letters, dtype=np.int64)
    needle = rng.choice(letters, size=key_len + value_len, replace=False)
    recall = np.concatenate(([RECALL_MARK], needle, [NEWLINE]))
    hay_len = max(length - recall.size, needle.size)
    filler = rng.choice(np.setdiff1d(letters, needle), size=hay_len)
    off = int(rng.integers(0, hay_len - needle.size + 1))
    filler[off : off + needle.size] = needle
    return np.concatenate((filler, recall))


def copy_episode(rng: np.random.Generator, length: int, min_span: int = 4, max_span: int = 12, letters=LETTERS) -> np.ndarray:
    """Filler letters, then ``<eot>`` and a verbatim repeat of one span of that filler."""
    letters = np.asarray(letters, dtype=np.int64)
    span = int(rng.integers(min_span, max_span + 1))
    hay_len = max(length - span - 2, span)
    filler = rng.choice(letters, size=hay_len)
    off = int(rng.integers(0, hay_len - span + 1))
    return np.concatenate((filler, [RECALL_MARK], filler[off : off + span], [NEWLINE]))


def synthetic_corpus(
    seed: int,
    n_bytes: int,
    min_episode: int = 128,
    max_episode: int = 128,
    copy_fraction: float = 0.0,
    copy_span: tuple[int, int] = (4, 12),
) -> np.ndarray:
    """``n_bytes`` tokens of episode text; episode lengths are uniform in ``[min, max]``.

    With equal bounds matching the training window, every window holds exactly
    one episode, so a key never has a stale occurrence from an earlier episode.
    A ``copy_fraction`` share of episodes are span repeats instead of recalls.
    """
    rng = np.random.default_rng(seed)
    parts: list[np.ndarray] = []
    total = 0
    while total < n_bytes:
        length = int(rng.integers(min_episode, max_episode + 1))
        ep = copy_episode(rng, length, *copy_span) if rng.random() < copy_fraction else episode(rng, length)
        parts.append(ep)
        total += ep.size
    return np.concatenate(parts)[:n_bytes]
