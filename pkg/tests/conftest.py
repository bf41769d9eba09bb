import pytest

from sentaug.corpus import Review, ReviewSet, build_vocab
from sentaug.model import ModelConfig
from sentaug.synthetic import make_pair_corpus
from sentaug.train import TrainConfig, build_model, train


@pytest.fixture
def three_reviews():
    return ReviewSet(
        [
            Review("r1", "p1", "great tights , soft fabric", 5),
            Review("r2", "p1", "the tights are okay", 4),
            Review("r3", "p2", "terrible lamp , dim switch", 1),
        ]
    )


def small_model_config(vocab_size):
    return ModelConfig(
        vocab_size=vocab_size,
        embedding_dim=64,
        hidden_dim=64,
        sentiment_dim=16,
        content_dim=16,
        decoder_hidden_dim=128,
        attention_dim=32,
    )


@pytest.fixture(scope="session")
def toy_trained():
    """A lightly trained toy model shared by tests that need a working one.

    Quality is deliberately modest (acceptance tests train their own, better
    models); this exists so functional tests stay fast.
    """
    pairs = make_pair_corpus(300, seed=7)
    members = ReviewSet()
    for p in pairs:
        members.add(p.positive)
        members.add(p.negative)
    vocab = build_vocab(members, min_freq=1)
    model = build_model(small_model_config(len(vocab)), seed=0)
    config = TrainConfig(learning_rate=2e-3, batch_size=8, epochs=15, anneal_fraction=0.1, seed=0)
    train(model, pairs, vocab, config)
    return model, vocab, pairs
