import random

import pytest

from discoursegen.classify import LabeledArticle
from discoursegen.schema import DiscourseRole, DiscourseSchema, load_schema
from discoursegen.textseg import Article


@pytest.fixture(scope="session")
def news_schema():
    return load_schema("news")


@pytest.fixture(scope="session")
def recipe_schema():
    return load_schema("recipe")


@pytest.fixture
def toy_schema():
    return DiscourseSchema(
        domain="toy",
        roles=(
            DiscourseRole("a", "A", "Role a."),
            DiscourseRole("b", "B", "Role b."),
        ),
    )


def make_labeled(schema, label_ids, article_id="art"):
    """LabeledArticle whose units are placeholders; labels drive the metrics."""
    units = tuple(f"Unit {i}." for i in range(len(label_ids)))
    labels = tuple(schema.role_by_id(label) for label in label_ids)
    article = Article(id=article_id, units=units, raw=" ".join(units))
    return LabeledArticle(article=article, labels=labels)


def random_corpus(schema, rng: random.Random, max_articles=20, max_units=15):
    """Random labeled corpus plus the parallel list of label-id sequences."""
    corpus = []
    sequences = []
    for k in range(rng.randint(1, max_articles)):
        labels = [
            rng.choice(schema.roles).id
            for _ in range(rng.randint(1, max_units))
        ]
        sequences.append(labels)
        corpus.append(make_labeled(schema, labels, article_id=f"art{k}"))
    return corpus, sequences
