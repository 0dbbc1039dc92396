import numpy as np
import pytest

from dialogsearch.lm import Context, TableLM
from dialogsearch.vocab import Vocabulary


@pytest.fixture
def ab_vocab():
    return Vocabulary(["a", "b"])


@pytest.fixture
def abc_vocab():
    return Vocabulary(["a", "b", "c"])


def build_random_table_lm(
    vocab: Vocabulary,
    ctx: Context,
    max_prefix_len: int,
    rng: np.random.Generator,
    floor: float = 1e-3,
) -> TableLM:
    """TableLM with a random but fully supported distribution at every prefix.

    Populates every prefix over the non-eos emittable tokens up to
    max_prefix_len, so any search bounded by that length is covered. The
    floor keeps all emittable probabilities positive.
    """
    model = TableLM(vocab, max_prefix_len=max_prefix_len + 1)
    emit = vocab.emittable_ids
    growable = [i for i in emit if i != vocab.eos_id]

    def fill(prefix: tuple[int, ...]) -> None:
        probs = rng.dirichlet(np.ones(len(emit))) + floor
        probs /= probs.sum()
        model.set_probs(ctx, prefix, dict(zip(emit, probs)))
        if len(prefix) < max_prefix_len:
            for token in growable:
                fill(prefix + (token,))

    fill(())
    return model


@pytest.fixture
def random_table_lm():
    return build_random_table_lm
