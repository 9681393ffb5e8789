import numpy as np

from endprompt_lab.corpus import LETTERS, NEWLINE, RECALL_MARK, copy_episode, episode, synthetic_corpus
from endprompt_lab.data import EOT_ID


def test_recall_episode_layout():
    rng = np.random.default_rng(0)
    for length in (16, 40, 128):
        ep = episode(rng, length)
        assert ep.size == length
        assert ep[-6] == RECALL_MARK == EOT_ID and ep[-1] == NEWLINE
        needle = ep[-5:-1]
        hay = ep[:-6]
        hits = [i for i in range(hay.size - 3) if hay[i : i + 4].tolist() == needle.tolist()]
        assert len(hits) == 1
        filler = np.delete(hay, np.arange(hits[0], hits[0] + 4))
        assert not set(filler.tolist()) & set(needle.tolist())


def test_copy_episode_repeats_a_span():
    rng = np.random.default_rng(1)
    ep = copy_episode(rng, 60, 8, 8)
    assert ep.size == 60
    span = ep[-9:-1]
    hay = ep[:-10]
    assert ep[-10] == RECALL_MARK
    assert any(hay[i : i + 8].tolist() == span.tolist() for i in range(hay.size - 7))
    assert set(hay.tolist()) <= set(LETTERS)


def test_corpus_is_deterministic_and_sized():
    a = synthetic_corpus(3, 5000)
    b = synthetic_corpus(3, 5000)
    assert a.size == 5000 and np.array_equal(a, b)
    assert not np.array_equal(a, synthetic_corpus(4, 5000))
    assert a.min() >= 0 and a.max() <= EOT_ID
